//! Deterministic small-step interpreters for a call-by-push-value core and
//! its one-shot control extensions (delimited control, effect handlers,
//! asymmetric coroutines, reference cells), the macro-translations between
//! them, and a differential-testing harness that checks the translations
//! preserve behaviour.

pub mod difftest;
pub mod machine;
pub mod parser;
pub mod syntax;
pub mod translate;
