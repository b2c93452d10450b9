//! Small-step machine: stores, configurations, evaluation-context
//! decomposition, the beta rules of all five calculi, a deterministic fueled
//! driver with optional tracing, and the coroutine well-formedness checker.

use crate::syntax::{
    self, check_calculus, fresh_name, pretty_comp, subst1_comp, Calculus, CheckViolation, Comp,
    Handler, Label, LabelSort, Name, Proj, Subst, Value,
};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub const DEFAULT_FUEL: u64 = 100_000;
pub const DEFAULT_TRACE_CAP: usize = 10_000;

// ---------------------------------------------------------------------------
// Store
// ---------------------------------------------------------------------------

/// What a label maps to. `Nil` is a real entry, distinct from absence: a
/// label in the domain with a `Nil` entry has been consumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StoreEntry {
    Nil,
    /// Captured delimited continuation, stored as an abstraction.
    DelCont(Comp),
    /// Captured handler continuation, stored as an abstraction.
    EffCont(Comp),
    /// Coroutine state.
    AcVal(Value),
    /// Reference-cell content.
    RefVal(Value),
}

impl StoreEntry {
    pub fn kind(&self) -> &'static str {
        match self {
            StoreEntry::Nil => "nil",
            StoreEntry::DelCont(_) => "del-cont",
            StoreEntry::EffCont(_) => "eff-cont",
            StoreEntry::AcVal(_) => "ac-val",
            StoreEntry::RefVal(_) => "ref-val",
        }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, StoreEntry::Nil)
    }
}

/// Finite partial map from runtime labels to entries, with one id counter per
/// label sort. The domain never shrinks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Store {
    entries: BTreeMap<Label, StoreEntry>,
    next: [u64; 4],
}

fn sort_index(sort: LabelSort) -> usize {
    match sort {
        LabelSort::Del => 0,
        LabelSort::Ac => 1,
        LabelSort::Eff => 2,
        LabelSort::Ref => 3,
    }
}

impl Store {
    pub fn new() -> Self {
        Store::default()
    }

    /// Allocates the next id of the sort; never collides with any id handed
    /// out before.
    pub fn fresh_label(&mut self, sort: LabelSort) -> Label {
        let idx = sort_index(sort);
        let id = self.next[idx];
        self.next[idx] += 1;
        Label { sort, id }
    }

    pub fn bind(&mut self, label: Label, entry: StoreEntry) {
        debug_assert!(entry_matches_sort(&entry, label.sort));
        self.entries.insert(label, entry);
    }

    pub fn get(&self, label: &Label) -> Option<&StoreEntry> {
        self.entries.get(label)
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.entries.contains_key(label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &StoreEntry)> {
        self.entries.iter()
    }
}

fn entry_matches_sort(entry: &StoreEntry, sort: LabelSort) -> bool {
    match entry {
        StoreEntry::Nil => true,
        StoreEntry::DelCont(_) => sort == LabelSort::Del,
        StoreEntry::EffCont(_) => sort == LabelSort::Eff,
        StoreEntry::AcVal(_) => sort == LabelSort::Ac,
        StoreEntry::RefVal(_) => sort == LabelSort::Ref,
    }
}

// ---------------------------------------------------------------------------
// Configurations and frames
// ---------------------------------------------------------------------------

/// A running pair ⟨computation; store⟩ or the error state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Configuration {
    Running { comp: Comp, store: Store },
    Bottom,
}

impl Configuration {
    pub fn initial(comp: Comp) -> Self {
        Configuration::Running {
            comp,
            store: Store::new(),
        }
    }
}

/// One evaluation-context frame. `Seq`, `App`, and `Prj` are the pure frames;
/// a pure context consists only of those.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Frame {
    Seq(Name, Comp),
    App(Value),
    Prj(Proj),
    Dollar(Name, Comp),
    Handle(Handler),
    Labeled(u64),
}

impl Frame {
    pub fn is_pure(&self) -> bool {
        matches!(self, Frame::Seq(_, _) | Frame::App(_) | Frame::Prj(_))
    }

    fn plug(self, hole: Comp) -> Comp {
        match self {
            Frame::Seq(x, n) => Comp::Seq(x, Box::new(hole), Box::new(n)),
            Frame::App(v) => Comp::App(Box::new(hole), v),
            Frame::Prj(i) => Comp::Prj(i, Box::new(hole)),
            Frame::Dollar(x, n) => Comp::Dollar(Box::new(hole), x, Box::new(n)),
            Frame::Handle(h) => Comp::Handle(Box::new(h), Box::new(hole)),
            Frame::Labeled(l) => Comp::Labeled(l, Box::new(hole)),
        }
    }
}

/// Plugs `hole` into frames listed outermost-first.
pub fn plug(frames: Vec<Frame>, hole: Comp) -> Comp {
    frames.into_iter().rev().fold(hole, |acc, f| f.plug(acc))
}

/// An evaluation context paired with the redex it surrounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    /// Outermost frame first.
    pub frames: Vec<Frame>,
    pub redex: Comp,
}

/// Why no rule applies at the focus of a computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StuckReason {
    Shift0WithoutDollar,
    YieldOutsideCoroutine,
    UnhandledOp(Name),
    ForceNonThunk,
    PcaseNonPair,
    ScaseNoClause(Name),
    ScaseNonVariant,
    ApplyNonFunction,
    ProjectNonPair,
    BareAbstraction,
    BareComputationPair,
    ThrowNonContinuation,
    ResumeNonCoroutine,
    RefOpNonCell,
    DanglingLabel(Label),
    ForeignConstruct(&'static str),
}

impl StuckReason {
    pub fn code(&self) -> &'static str {
        match self {
            StuckReason::Shift0WithoutDollar => "shift0-without-dollar",
            StuckReason::YieldOutsideCoroutine => "yield-outside-coroutine",
            StuckReason::UnhandledOp(_) => "unhandled-op",
            StuckReason::ForceNonThunk => "force-non-thunk",
            StuckReason::PcaseNonPair => "pcase-non-pair",
            StuckReason::ScaseNoClause(_) => "case-no-matching-clause",
            StuckReason::ScaseNonVariant => "case-non-variant",
            StuckReason::ApplyNonFunction => "apply-non-function",
            StuckReason::ProjectNonPair => "project-non-pair",
            StuckReason::BareAbstraction => "bare-abstraction",
            StuckReason::BareComputationPair => "bare-computation-pair",
            StuckReason::ThrowNonContinuation => "throw-non-continuation",
            StuckReason::ResumeNonCoroutine => "resume-non-coroutine",
            StuckReason::RefOpNonCell => "ref-op-non-cell",
            StuckReason::DanglingLabel(_) => "dangling-label",
            StuckReason::ForeignConstruct(_) => "foreign-construct",
        }
    }
}

impl fmt::Display for StuckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StuckReason::UnhandledOp(op) => write!(f, "unhandled-op({op})"),
            StuckReason::ScaseNoClause(tag) => write!(f, "case-no-matching-clause({tag})"),
            StuckReason::DanglingLabel(l) => write!(f, "dangling-label({l})"),
            StuckReason::ForeignConstruct(c) => write!(f, "foreign-construct({c})"),
            other => f.write_str(other.code()),
        }
    }
}

/// Result of decomposing a computation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decomposed {
    Redex(Decomposition),
    Terminal(Value),
    NoRedex(StuckReason),
}

fn allowed(k: Calculus, c: &Comp) -> Result<(), &'static str> {
    match c {
        Comp::Shift0(_, _) if k != Calculus::Del => Err("shift0"),
        Comp::Dollar(_, _, _) if k != Calculus::Del => Err("dollar"),
        Comp::Throw(_, _) if k != Calculus::Del && k != Calculus::Eff => Err("throw"),
        Comp::Create(_) | Comp::Resume(_, _) | Comp::Yield(_) | Comp::Labeled(_, _)
            if k != Calculus::Ac =>
        {
            Err("coroutine-form")
        }
        Comp::OpCall(_, _) | Comp::Handle(_, _) if k != Calculus::Eff => Err("effect-form"),
        Comp::RefCreate(_) | Comp::RefSet(_, _) | Comp::RefGet(_) if k != Calculus::Ref => {
            Err("ref-form")
        }
        _ => Ok(()),
    }
}

/// Finds the unique decomposition of a computation into an evaluation
/// context and a redex. `Shift0` is a redex only as the body of a dollar
/// reached through a pure context; likewise `Yield` under a labeled
/// computation and an operation call under a handler with a matching clause.
pub fn decompose(comp: &Comp, k: Calculus) -> Decomposed {
    let mut frames: Vec<Frame> = Vec::new();
    let mut cur = comp;
    loop {
        if let Err(name) = allowed(k, cur) {
            return Decomposed::NoRedex(StuckReason::ForeignConstruct(name));
        }
        match cur {
            Comp::Return(v) => {
                if frames.is_empty() {
                    return Decomposed::Terminal(v.clone());
                }
                // A return under a pure frame is consumed by the frame's own
                // rule, which fires at the frame node; reaching here means
                // the innermost frame is App or Prj.
                return match frames.last().unwrap() {
                    Frame::App(_) => Decomposed::NoRedex(StuckReason::ApplyNonFunction),
                    Frame::Prj(_) => Decomposed::NoRedex(StuckReason::ProjectNonPair),
                    _ => unreachable!("seq/dollar/handle/labeled fire before descending"),
                };
            }
            Comp::Seq(x, m, n) => {
                if matches!(**m, Comp::Return(_)) {
                    return redex(frames, cur.clone());
                }
                frames.push(Frame::Seq(x.clone(), (**n).clone()));
                cur = m;
            }
            Comp::App(m, v) => {
                if matches!(**m, Comp::Abs(_, _)) {
                    return redex(frames, cur.clone());
                }
                frames.push(Frame::App(v.clone()));
                cur = m;
            }
            Comp::Prj(i, m) => {
                if matches!(**m, Comp::CPair(_, _)) {
                    return redex(frames, cur.clone());
                }
                frames.push(Frame::Prj(*i));
                cur = m;
            }
            Comp::Dollar(m, x, n) => {
                if matches!(**m, Comp::Return(_)) {
                    return redex(frames, cur.clone());
                }
                frames.push(Frame::Dollar(x.clone(), (**n).clone()));
                cur = m;
            }
            Comp::Handle(h, m) => {
                if matches!(**m, Comp::Return(_)) {
                    return redex(frames, cur.clone());
                }
                frames.push(Frame::Handle((**h).clone()));
                cur = m;
            }
            Comp::Labeled(l, m) => {
                if matches!(**m, Comp::Return(_)) {
                    return redex(frames, cur.clone());
                }
                frames.push(Frame::Labeled(*l));
                cur = m;
            }
            Comp::PCase(v, _, _, _) => {
                return match v {
                    Value::Pair(_, _) => redex(frames, cur.clone()),
                    _ => Decomposed::NoRedex(StuckReason::PcaseNonPair),
                };
            }
            Comp::SCase(v, clauses) => {
                return match v {
                    Value::Inj(tag, _) => {
                        if clauses.iter().any(|cl| &cl.tag == tag) {
                            redex(frames, cur.clone())
                        } else {
                            Decomposed::NoRedex(StuckReason::ScaseNoClause(tag.clone()))
                        }
                    }
                    _ => Decomposed::NoRedex(StuckReason::ScaseNonVariant),
                };
            }
            Comp::Force(v) => {
                return match v {
                    Value::Thunk(_) => redex(frames, cur.clone()),
                    _ => Decomposed::NoRedex(StuckReason::ForceNonThunk),
                };
            }
            Comp::Abs(_, _) => return Decomposed::NoRedex(StuckReason::BareAbstraction),
            Comp::CPair(_, _) => return Decomposed::NoRedex(StuckReason::BareComputationPair),
            Comp::Shift0(_, _) => {
                // Capture the pure context up to the nearest dollar frame.
                return match nearest_delimiter(&frames) {
                    Some(Frame::Dollar(_, _)) => {
                        let point = capture_point(&frames);
                        let hctx = frames.split_off(point);
                        let Some(Frame::Dollar(x, n)) = frames.pop() else {
                            unreachable!()
                        };
                        let inner = plug(hctx, cur.clone());
                        redex(frames, Comp::Dollar(Box::new(inner), x, Box::new(n)))
                    }
                    _ => Decomposed::NoRedex(StuckReason::Shift0WithoutDollar),
                };
            }
            Comp::Yield(_) => {
                return match nearest_delimiter(&frames) {
                    Some(Frame::Labeled(_)) => {
                        let point = capture_point(&frames);
                        let hctx = frames.split_off(point);
                        let Some(Frame::Labeled(l)) = frames.pop() else {
                            unreachable!()
                        };
                        let inner = plug(hctx, cur.clone());
                        redex(frames, Comp::Labeled(l, Box::new(inner)))
                    }
                    _ => Decomposed::NoRedex(StuckReason::YieldOutsideCoroutine),
                };
            }
            Comp::OpCall(op, _) => {
                return match nearest_delimiter(&frames) {
                    Some(Frame::Handle(h)) => {
                        if h.clause(op).is_none() {
                            return Decomposed::NoRedex(StuckReason::UnhandledOp(op.clone()));
                        }
                        let point = capture_point(&frames);
                        let hctx = frames.split_off(point);
                        let Some(Frame::Handle(h)) = frames.pop() else {
                            unreachable!()
                        };
                        let inner = plug(hctx, cur.clone());
                        redex(frames, Comp::Handle(Box::new(h), Box::new(inner)))
                    }
                    _ => Decomposed::NoRedex(StuckReason::UnhandledOp(op.clone())),
                };
            }
            Comp::Throw(v, _) => {
                let ok = match (k, v) {
                    (Calculus::Del, Value::DelLabel(_)) => true,
                    (Calculus::Eff, Value::EffLabel(_, _)) => true,
                    (_, Value::Var(_)) => false,
                    _ => false,
                };
                return if ok {
                    redex(frames, cur.clone())
                } else {
                    Decomposed::NoRedex(StuckReason::ThrowNonContinuation)
                };
            }
            Comp::Create(_) => return redex(frames, cur.clone()),
            Comp::Resume(v, _) => {
                return match v {
                    Value::AcLabel(_) => redex(frames, cur.clone()),
                    _ => Decomposed::NoRedex(StuckReason::ResumeNonCoroutine),
                };
            }
            Comp::RefCreate(_) => return redex(frames, cur.clone()),
            Comp::RefSet(v, _) | Comp::RefGet(v) => {
                return match v {
                    Value::RefCell(_) => redex(frames, cur.clone()),
                    _ => Decomposed::NoRedex(StuckReason::RefOpNonCell),
                };
            }
        }
    }
}

/// Index of the first frame of the maximal pure suffix.
fn capture_point(frames: &[Frame]) -> usize {
    let mut i = frames.len();
    while i > 0 && frames[i - 1].is_pure() {
        i -= 1;
    }
    i
}

/// The innermost non-pure frame, if any.
fn nearest_delimiter(frames: &[Frame]) -> Option<&Frame> {
    let point = capture_point(frames);
    if point == 0 {
        None
    } else {
        Some(&frames[point - 1])
    }
}

fn redex(frames: Vec<Frame>, redex: Comp) -> Decomposed {
    Decomposed::Redex(Decomposition { frames, redex })
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

/// Store change performed by one step.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct StoreDelta {
    pub label: String,
    pub was: Option<&'static str>,
    pub now: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Next {
        config: Configuration,
        rule: &'static str,
        delta: Vec<StoreDelta>,
    },
    /// The computation is `return V` at the empty context.
    Terminal(Value),
    Stuck(StuckReason),
}

fn delta_for(store: &Store, label: Label, now: &StoreEntry) -> StoreDelta {
    StoreDelta {
        label: label.to_string(),
        was: store.get(&label).map(|e| e.kind()),
        now: now.kind(),
    }
}

fn bind_with_delta(
    store: &mut Store,
    label: Label,
    entry: StoreEntry,
    deltas: &mut Vec<StoreDelta>,
) {
    deltas.push(delta_for(store, label, &entry));
    store.bind(label, entry);
}

/// Fresh binder for a captured continuation body, avoiding every name in the
/// surrounding captured term.
fn fresh_for(comps: &[&Comp], base: &str) -> Name {
    let mut avoid = BTreeSet::new();
    for c in comps {
        syntax::all_names_comp(c, &mut avoid);
    }
    fresh_name(base, &avoid)
}

/// Applies exactly the one applicable beta rule at the decomposed redex.
/// `(fail)` rules yield the error state; inapplicability is a stuck state.
pub fn step(config: &Configuration, k: Calculus) -> StepResult {
    let (comp, store) = match config {
        Configuration::Running { comp, store } => (comp, store),
        Configuration::Bottom => {
            return StepResult::Stuck(StuckReason::ForeignConstruct("bottom"));
        }
    };
    let decomposition = match decompose(comp, k) {
        Decomposed::Terminal(v) => return StepResult::Terminal(v),
        Decomposed::NoRedex(reason) => return StepResult::Stuck(reason),
        Decomposed::Redex(d) => d,
    };
    let mut store = store.clone();
    let mut deltas = Vec::new();
    let (rule, next) = match apply_rule(decomposition.redex, &mut store, k, &mut deltas) {
        RuleOutcome::Stepped(rule, comp) => (rule, comp),
        RuleOutcome::Fail(rule) => {
            return StepResult::Next {
                config: Configuration::Bottom,
                rule,
                delta: deltas,
            };
        }
        RuleOutcome::Stuck(reason) => return StepResult::Stuck(reason),
    };
    StepResult::Next {
        config: Configuration::Running {
            comp: plug(decomposition.frames, next),
            store,
        },
        rule,
        delta: deltas,
    }
}

enum RuleOutcome {
    Stepped(&'static str, Comp),
    Fail(&'static str),
    Stuck(StuckReason),
}

fn apply_rule(
    redex: Comp,
    store: &mut Store,
    k: Calculus,
    deltas: &mut Vec<StoreDelta>,
) -> RuleOutcome {
    use RuleOutcome::*;
    match redex {
        // (×)
        Comp::PCase(Value::Pair(v1, v2), x1, x2, m) => {
            let mut s = Subst::new();
            s.insert(x1, *v1);
            s.insert(x2, *v2);
            Stepped("pcase", syntax::substitute_comp(&m, &s))
        }
        // (+)
        Comp::SCase(Value::Inj(tag, v), clauses) => {
            match clauses.into_iter().find(|cl| cl.tag == tag) {
                Some(cl) => Stepped("case", subst1_comp(&cl.body, &cl.binder, &v)),
                None => Stuck(StuckReason::ScaseNoClause(tag)),
            }
        }
        // (F)
        Comp::Seq(x, m, n) => match *m {
            Comp::Return(v) => Stepped("let", subst1_comp(&n, &x, &v)),
            _ => unreachable!("decompose only yields seq redexes over return"),
        },
        // (U)
        Comp::Force(Value::Thunk(m)) => Stepped("force", *m),
        // (→)
        Comp::App(m, v) => match *m {
            Comp::Abs(x, body) => Stepped("app", subst1_comp(&body, &x, &v)),
            _ => unreachable!("decompose only yields app redexes over abstractions"),
        },
        // (&)
        Comp::Prj(i, m) => match *m {
            Comp::CPair(m1, m2) => Stepped(
                "prj",
                match i {
                    Proj::Fst => *m1,
                    Proj::Snd => *m2,
                },
            ),
            _ => unreachable!("decompose only yields prj redexes over cpairs"),
        },
        Comp::Dollar(m, x, n) => match *m {
            // (ret)
            Comp::Return(v) => Stepped("dollar-ret", subst1_comp(&n, &x, &v)),
            // (shift): ⟨H[shift0 k. M] $ x. N⟩ captures λy. ⟨H[return y] $ x. N⟩
            inner => {
                let (hctx, kvar, body) = match strip_pure_to_shift0(inner) {
                    Some(parts) => parts,
                    None => return Stuck(StuckReason::Shift0WithoutDollar),
                };
                let label = store.fresh_label(LabelSort::Del);
                let y = fresh_for(&[&body, &*n], "y");
                let resumed = plug(hctx, Comp::Return(Value::Var(y.clone())));
                let cont = Comp::Abs(y, Box::new(Comp::Dollar(Box::new(resumed), x, n)));
                bind_with_delta(store, label, StoreEntry::DelCont(cont), deltas);
                Stepped(
                    "shift",
                    subst1_comp(&body, &kvar, &Value::DelLabel(label.id)),
                )
            }
        },
        Comp::Throw(v, w) => match (k, v) {
            (Calculus::Del, Value::DelLabel(id)) => {
                let label = Label {
                    sort: LabelSort::Del,
                    id,
                };
                match store.get(&label) {
                    Some(StoreEntry::DelCont(cont)) => {
                        let cont = cont.clone();
                        bind_with_delta(store, label, StoreEntry::Nil, deltas);
                        match cont {
                            Comp::Abs(y, body) => Stepped("throw", subst1_comp(&body, &y, &w)),
                            _ => unreachable!("del store holds abstractions"),
                        }
                    }
                    Some(StoreEntry::Nil) => Fail("fail"),
                    _ => Stuck(StuckReason::DanglingLabel(label)),
                }
            }
            (Calculus::Eff, Value::EffLabel(id, _)) => {
                let label = Label {
                    sort: LabelSort::Eff,
                    id,
                };
                match store.get(&label) {
                    Some(StoreEntry::EffCont(cont)) => {
                        let cont = cont.clone();
                        bind_with_delta(store, label, StoreEntry::Nil, deltas);
                        match cont {
                            Comp::Abs(y, body) => Stepped("throw", subst1_comp(&body, &y, &w)),
                            _ => unreachable!("eff store holds abstractions"),
                        }
                    }
                    Some(StoreEntry::Nil) => Fail("fail"),
                    _ => Stuck(StuckReason::DanglingLabel(label)),
                }
            }
            _ => Stuck(StuckReason::ThrowNonContinuation),
        },
        Comp::Handle(h, m) => match *m {
            // (ret)
            Comp::Return(v) => Stepped("handle-ret", subst1_comp(&h.ret_body, &h.ret_binder, &v)),
            // (op): the continuation binder receives a fresh label carrying
            // the handler.
            inner => {
                let (hctx, op, arg) = match strip_pure_to_opcall(inner) {
                    Some(parts) => parts,
                    None => return Stuck(StuckReason::UnhandledOp("?".into())),
                };
                let clause = match h.clause(&op) {
                    Some(cl) => cl.clone(),
                    None => return Stuck(StuckReason::UnhandledOp(op)),
                };
                let label = store.fresh_label(LabelSort::Eff);
                let x = fresh_for(&[&h.ret_body, &clause.body], "x");
                let resumed = plug(hctx, Comp::Return(Value::Var(x.clone())));
                let cont = Comp::Abs(x, Box::new(Comp::Handle(h.clone(), Box::new(resumed))));
                bind_with_delta(store, label, StoreEntry::EffCont(cont), deltas);
                let mut s = Subst::new();
                s.insert(clause.param.clone(), arg);
                s.insert(clause.cont.clone(), Value::EffLabel(label.id, h));
                Stepped("op", syntax::substitute_comp(&clause.body, &s))
            }
        },
        // (create)
        Comp::Create(v) => {
            let label = store.fresh_label(LabelSort::Ac);
            bind_with_delta(store, label, StoreEntry::AcVal(v), deltas);
            Stepped("create", Comp::Return(Value::AcLabel(label.id)))
        }
        Comp::Resume(Value::AcLabel(id), w) => {
            let label = Label {
                sort: LabelSort::Ac,
                id,
            };
            match store.get(&label) {
                Some(StoreEntry::AcVal(v)) => {
                    let v = v.clone();
                    bind_with_delta(store, label, StoreEntry::Nil, deltas);
                    Stepped(
                        "resume",
                        Comp::Labeled(id, Box::new(Comp::App(Box::new(Comp::Force(v)), w))),
                    )
                }
                Some(StoreEntry::Nil) => Fail("fail"),
                _ => Stuck(StuckReason::DanglingLabel(label)),
            }
        }
        Comp::Labeled(l, m) => match *m {
            // (ret): the store is left unchanged.
            Comp::Return(v) => Stepped("coro-ret", Comp::Return(v)),
            // (yield)
            inner => {
                let (hctx, v) = match strip_pure_to_yield(inner) {
                    Some(parts) => parts,
                    None => return Stuck(StuckReason::YieldOutsideCoroutine),
                };
                let label = Label {
                    sort: LabelSort::Ac,
                    id: l,
                };
                let y = fresh_for(&[&plug(hctx.clone(), Comp::Return(Value::Unit))], "y");
                let resumed = plug(hctx, Comp::Return(Value::Var(y.clone())));
                let cont = Value::Thunk(Box::new(Comp::Abs(y, Box::new(resumed))));
                bind_with_delta(store, label, StoreEntry::AcVal(cont), deltas);
                Stepped("yield", Comp::Return(v))
            }
        },
        // (create) for reference cells
        Comp::RefCreate(v) => {
            let label = store.fresh_label(LabelSort::Ref);
            bind_with_delta(store, label, StoreEntry::RefVal(v), deltas);
            Stepped("ref-create", Comp::Return(Value::RefCell(label.id)))
        }
        // (set)
        Comp::RefSet(Value::RefCell(id), v) => {
            let label = Label {
                sort: LabelSort::Ref,
                id,
            };
            if !store.contains(&label) {
                return Stuck(StuckReason::DanglingLabel(label));
            }
            bind_with_delta(store, label, StoreEntry::RefVal(v), deltas);
            Stepped("ref-set", Comp::Return(Value::Unit))
        }
        // (get)
        Comp::RefGet(Value::RefCell(id)) => {
            let label = Label {
                sort: LabelSort::Ref,
                id,
            };
            match store.get(&label) {
                Some(StoreEntry::RefVal(v)) => Stepped("ref-get", Comp::Return(v.clone())),
                _ => Stuck(StuckReason::DanglingLabel(label)),
            }
        }
        other => unreachable!("decompose produced a non-redex: {}", pretty_comp(&other)),
    }
}

/// Splits `H[shift0 k. M]` into the pure frames, the binder, and the body.
fn strip_pure_to_shift0(c: Comp) -> Option<(Vec<Frame>, Name, Comp)> {
    let mut frames = Vec::new();
    let mut cur = c;
    loop {
        match cur {
            Comp::Shift0(kvar, body) => return Some((frames, kvar, *body)),
            Comp::Seq(x, m, n) => {
                frames.push(Frame::Seq(x, *n));
                cur = *m;
            }
            Comp::App(m, v) => {
                frames.push(Frame::App(v));
                cur = *m;
            }
            Comp::Prj(i, m) => {
                frames.push(Frame::Prj(i));
                cur = *m;
            }
            _ => return None,
        }
    }
}

fn strip_pure_to_opcall(c: Comp) -> Option<(Vec<Frame>, Name, Value)> {
    let mut frames = Vec::new();
    let mut cur = c;
    loop {
        match cur {
            Comp::OpCall(op, v) => return Some((frames, op, v)),
            Comp::Seq(x, m, n) => {
                frames.push(Frame::Seq(x, *n));
                cur = *m;
            }
            Comp::App(m, v) => {
                frames.push(Frame::App(v));
                cur = *m;
            }
            Comp::Prj(i, m) => {
                frames.push(Frame::Prj(i));
                cur = *m;
            }
            _ => return None,
        }
    }
}

fn strip_pure_to_yield(c: Comp) -> Option<(Vec<Frame>, Value)> {
    let mut frames = Vec::new();
    let mut cur = c;
    loop {
        match cur {
            Comp::Yield(v) => return Some((frames, v)),
            Comp::Seq(x, m, n) => {
                frames.push(Frame::Seq(x, *n));
                cur = *m;
            }
            Comp::App(m, v) => {
                frames.push(Frame::App(v));
                cur = *m;
            }
            Comp::Prj(i, m) => {
                frames.push(Frame::Prj(i));
                cur = *m;
            }
            _ => return None,
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation driver
// ---------------------------------------------------------------------------

/// Terminal classification of an evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutcomeKind {
    Value {
        value: Value,
        store: Store,
    },
    Bottom,
    Stuck {
        comp: Comp,
        store: Store,
        reason: StuckReason,
    },
    FuelExhausted {
        comp: Comp,
        store: Store,
    },
}

impl OutcomeKind {
    pub fn tag(&self) -> &'static str {
        match self {
            OutcomeKind::Value { .. } => "value",
            OutcomeKind::Bottom => "bottom",
            OutcomeKind::Stuck { .. } => "stuck",
            OutcomeKind::FuelExhausted { .. } => "fuel-exhausted",
        }
    }

    pub fn value(&self) -> Option<&Value> {
        match self {
            OutcomeKind::Value { value, .. } => Some(value),
            _ => None,
        }
    }
}

/// One trace record: step index, the rule applied, the resulting
/// computation, and the store delta.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub index: u64,
    pub rule: &'static str,
    pub comp: String,
    pub delta: Vec<StoreDelta>,
}

impl TraceStep {
    /// Line-delimited export form.
    pub fn render(&self) -> String {
        let delta = self
            .delta
            .iter()
            .map(|d| match d.was {
                Some(was) => format!("{}:{}->{}", d.label, was, d.now),
                None => format!("{}:+{}", d.label, d.now),
            })
            .collect::<Vec<_>>()
            .join(",");
        format!("{}\t{}\t{}\t[{}]", self.index, self.rule, self.comp, delta)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub kind: OutcomeKind,
    pub steps: u64,
    pub trace: Option<Vec<TraceStep>>,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub fuel: u64,
    pub trace: bool,
    pub trace_cap: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            fuel: DEFAULT_FUEL,
            trace: false,
            trace_cap: DEFAULT_TRACE_CAP,
        }
    }
}

/// Runs a program of calculus `k` from the empty store for at most `fuel`
/// beta steps. The program must pass the calculus check in program mode.
pub fn evaluate(
    p: &Comp,
    k: Calculus,
    fuel: u64,
    want_trace: bool,
) -> Result<Outcome, CheckViolation> {
    evaluate_opt(
        p,
        k,
        &EvalOptions {
            fuel,
            trace: want_trace,
            ..EvalOptions::default()
        },
        &mut |_, _| {},
    )
}

/// As `evaluate`, with a per-configuration inspector (called on the initial
/// configuration and after every step).
pub fn evaluate_opt(
    p: &Comp,
    k: Calculus,
    opts: &EvalOptions,
    inspect: &mut dyn FnMut(u64, &Configuration),
) -> Result<Outcome, CheckViolation> {
    check_calculus(p, k, true)?;
    let mut config = Configuration::initial(p.clone());
    let mut steps: u64 = 0;
    let mut trace: Option<Vec<TraceStep>> = if opts.trace { Some(Vec::new()) } else { None };
    inspect(0, &config);
    loop {
        if steps == opts.fuel {
            let (comp, store) = match config {
                Configuration::Running { comp, store } => (comp, store),
                Configuration::Bottom => unreachable!("bottom returns immediately"),
            };
            return Ok(Outcome {
                kind: OutcomeKind::FuelExhausted { comp, store },
                steps,
                trace,
            });
        }
        match step(&config, k) {
            StepResult::Terminal(value) => {
                let store = match config {
                    Configuration::Running { store, .. } => store,
                    Configuration::Bottom => unreachable!(),
                };
                return Ok(Outcome {
                    kind: OutcomeKind::Value { value, store },
                    steps,
                    trace,
                });
            }
            StepResult::Stuck(reason) => {
                let (comp, store) = match config {
                    Configuration::Running { comp, store } => (comp, store),
                    Configuration::Bottom => unreachable!(),
                };
                return Ok(Outcome {
                    kind: OutcomeKind::Stuck {
                        comp,
                        store,
                        reason,
                    },
                    steps,
                    trace,
                });
            }
            StepResult::Next {
                config: next,
                rule,
                delta,
            } => {
                steps += 1;
                if let Some(t) = trace.as_mut() {
                    if t.len() < opts.trace_cap {
                        let comp = match &next {
                            Configuration::Running { comp, .. } => pretty_comp(comp),
                            Configuration::Bottom => "⊥".to_string(),
                        };
                        t.push(TraceStep {
                            index: steps,
                            rule,
                            comp,
                            delta,
                        });
                    }
                }
                inspect(steps, &next);
                match next {
                    Configuration::Bottom => {
                        return Ok(Outcome {
                            kind: OutcomeKind::Bottom,
                            steps,
                            trace,
                        });
                    }
                    running => config = running,
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Well-formedness of coroutine configurations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("well-formedness violation ({clause}){}", match .label { Some(l) => format!(" at #c{l}"), None => String::new() })]
pub struct WfViolation {
    pub label: Option<u64>,
    pub clause: String,
}

fn wf_violation(label: Option<u64>, clause: impl Into<String>) -> WfViolation {
    WfViolation {
        label,
        clause: clause.into(),
    }
}

/// Labels of all labeled computations appearing anywhere in the value.
pub fn active_labels_value(v: &Value, acc: &mut BTreeSet<u64>) {
    match v {
        Value::Var(_)
        | Value::Unit
        | Value::DelLabel(_)
        | Value::AcLabel(_)
        | Value::RefCell(_) => {}
        Value::Pair(a, b) => {
            active_labels_value(a, acc);
            active_labels_value(b, acc);
        }
        Value::Inj(_, w) => active_labels_value(w, acc),
        Value::Thunk(m) => active_labels_comp(m, acc),
        Value::EffLabel(_, h) => {
            active_labels_comp(&h.ret_body, acc);
            for cl in &h.ops {
                active_labels_comp(&cl.body, acc);
            }
        }
    }
}

pub fn active_labels_comp(c: &Comp, acc: &mut BTreeSet<u64>) {
    match c {
        Comp::Labeled(l, m) => {
            acc.insert(*l);
            active_labels_comp(m, acc);
        }
        Comp::PCase(v, _, _, m) => {
            active_labels_value(v, acc);
            active_labels_comp(m, acc);
        }
        Comp::SCase(v, clauses) => {
            active_labels_value(v, acc);
            for cl in clauses {
                active_labels_comp(&cl.body, acc);
            }
        }
        Comp::Force(v)
        | Comp::Return(v)
        | Comp::Create(v)
        | Comp::Yield(v)
        | Comp::RefCreate(v)
        | Comp::RefGet(v)
        | Comp::OpCall(_, v) => active_labels_value(v, acc),
        Comp::Seq(_, m, n) | Comp::Dollar(m, _, n) | Comp::CPair(m, n) => {
            active_labels_comp(m, acc);
            active_labels_comp(n, acc);
        }
        Comp::Abs(_, m) | Comp::Shift0(_, m) | Comp::Prj(_, m) => active_labels_comp(m, acc),
        Comp::App(m, v) => {
            active_labels_comp(m, acc);
            active_labels_value(v, acc);
        }
        Comp::Throw(v, w) | Comp::Resume(v, w) | Comp::RefSet(v, w) => {
            active_labels_value(v, acc);
            active_labels_value(w, acc);
        }
        Comp::Handle(h, m) => {
            active_labels_comp(&h.ret_body, acc);
            for cl in &h.ops {
                active_labels_comp(&cl.body, acc);
            }
            active_labels_comp(m, acc);
        }
    }
}

fn no_active_value(v: &Value, clause: &str) -> Result<(), WfViolation> {
    let mut acc = BTreeSet::new();
    active_labels_value(v, &mut acc);
    match acc.into_iter().next() {
        Some(l) => Err(wf_violation(Some(l), clause)),
        None => Ok(()),
    }
}

fn no_active_comp(c: &Comp, clause: &str) -> Result<(), WfViolation> {
    let mut acc = BTreeSet::new();
    active_labels_comp(c, &mut acc);
    match acc.into_iter().next() {
        Some(l) => Err(wf_violation(Some(l), clause)),
        None => Ok(()),
    }
}

/// The inductive WF predicate on coroutine computations: no active labels
/// under binders or in value position, and only along the evaluation spine;
/// a labeled computation must not contain its own label as an active label.
pub fn wf_comp(c: &Comp) -> Result<(), WfViolation> {
    match c {
        Comp::PCase(v, _, _, m) => {
            no_active_value(v, "pcase scrutinee")?;
            no_active_comp(m, "pcase body")
        }
        Comp::SCase(v, clauses) => {
            no_active_value(v, "case scrutinee")?;
            for cl in clauses {
                no_active_comp(&cl.body, "case clause body")?;
            }
            Ok(())
        }
        Comp::Force(v) => no_active_value(v, "force argument"),
        Comp::Return(v) => no_active_value(v, "returned value"),
        Comp::Seq(_, m, n) => {
            wf_comp(m)?;
            no_active_comp(n, "let continuation")
        }
        Comp::Abs(_, m) => no_active_comp(m, "abstraction body"),
        Comp::App(m, v) => {
            wf_comp(m)?;
            no_active_value(v, "application argument")
        }
        Comp::CPair(m, n) => {
            no_active_comp(m, "cpair component")?;
            no_active_comp(n, "cpair component")
        }
        Comp::Prj(_, m) => wf_comp(m),
        Comp::Labeled(l, m) => {
            wf_comp(m)?;
            let mut acc = BTreeSet::new();
            active_labels_comp(m, &mut acc);
            if acc.contains(l) {
                Err(wf_violation(Some(*l), "label active in its own body"))
            } else {
                Ok(())
            }
        }
        Comp::Create(v) => no_active_value(v, "create argument"),
        Comp::Resume(v, w) => {
            no_active_value(v, "resume target")?;
            no_active_value(w, "resume argument")
        }
        Comp::Yield(v) => no_active_value(v, "yield argument"),
        // Remaining constructors are not coroutine computations.
        other => no_active_comp(other, "non-coroutine form"),
    }
}

/// Checks that a coroutine configuration is well-formed: the computation
/// satisfies WF, stored values hold no active labels, and every label active
/// in the computation is consumed in the store.
pub fn ac_well_formed(config: &Configuration) -> Result<(), WfViolation> {
    let (comp, store) = match config {
        Configuration::Running { comp, store } => (comp, store),
        Configuration::Bottom => return Ok(()),
    };
    wf_comp(comp)?;
    for (label, entry) in store.iter() {
        if let StoreEntry::AcVal(v) = entry {
            let mut acc = BTreeSet::new();
            active_labels_value(v, &mut acc);
            if let Some(l) = acc.into_iter().next() {
                return Err(wf_violation(
                    Some(l),
                    format!("stored value at {label} contains an active label"),
                ));
            }
        }
    }
    let mut active = BTreeSet::new();
    active_labels_comp(comp, &mut active);
    for l in active {
        let label = Label {
            sort: LabelSort::Ac,
            id: l,
        };
        match store.get(&label) {
            Some(StoreEntry::Nil) => {}
            _ => {
                return Err(wf_violation(
                    Some(l),
                    "active label is not mapped to nil in the store",
                ));
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Handler totality preprocessing
// ---------------------------------------------------------------------------

/// Rewrites every handler to forward operations it does not handle:
/// for each missing `op` occurring in the program, the clause
/// `op(p k) ↦ let r = op p in throw k r` is appended. Off by default;
/// unhandled operations are otherwise a stuck state.
pub fn forward_ops(p: &Comp) -> Comp {
    let mut ops = BTreeSet::new();
    collect_ops(p, &mut ops);
    let mut avoid = BTreeSet::new();
    syntax::all_names_comp(p, &mut avoid);
    let param = fresh_name("p", &avoid);
    avoid.insert(param.clone());
    let cont = fresh_name("k", &avoid);
    avoid.insert(cont.clone());
    let res = fresh_name("r", &avoid);
    rewrite_handlers(p, &ops, &param, &cont, &res)
}

fn collect_ops(c: &Comp, acc: &mut BTreeSet<Name>) {
    match c {
        Comp::OpCall(op, _) => {
            acc.insert(op.clone());
        }
        Comp::PCase(_, _, _, m)
        | Comp::Abs(_, m)
        | Comp::Shift0(_, m)
        | Comp::Prj(_, m)
        | Comp::Labeled(_, m) => collect_ops(m, acc),
        Comp::SCase(_, clauses) => {
            for cl in clauses {
                collect_ops(&cl.body, acc);
            }
        }
        Comp::Seq(_, m, n) | Comp::Dollar(m, _, n) | Comp::CPair(m, n) => {
            collect_ops(m, acc);
            collect_ops(n, acc);
        }
        Comp::App(m, _) => collect_ops(m, acc),
        Comp::Handle(h, m) => {
            collect_ops(&h.ret_body, acc);
            for cl in &h.ops {
                collect_ops(&cl.body, acc);
            }
            collect_ops(m, acc);
        }
        Comp::Force(v)
        | Comp::Return(v)
        | Comp::Create(v)
        | Comp::Yield(v)
        | Comp::RefCreate(v)
        | Comp::RefGet(v) => collect_ops_value(v, acc),
        Comp::Throw(v, w) | Comp::Resume(v, w) | Comp::RefSet(v, w) => {
            collect_ops_value(v, acc);
            collect_ops_value(w, acc);
        }
    }
}

fn collect_ops_value(v: &Value, acc: &mut BTreeSet<Name>) {
    match v {
        Value::Thunk(m) => collect_ops(m, acc),
        Value::Pair(a, b) => {
            collect_ops_value(a, acc);
            collect_ops_value(b, acc);
        }
        Value::Inj(_, w) => collect_ops_value(w, acc),
        _ => {}
    }
}

fn rewrite_handlers(c: &Comp, ops: &BTreeSet<Name>, p: &str, k: &str, r: &str) -> Comp {
    let recurse = |m: &Comp| rewrite_handlers(m, ops, p, k, r);
    match c {
        Comp::Handle(h, m) => {
            let mut h = (**h).clone();
            h.ret_body = Box::new(recurse(&h.ret_body));
            for cl in h.ops.iter_mut() {
                cl.body = recurse(&cl.body);
            }
            for op in ops {
                if h.clause(op).is_none() {
                    h.ops.push(crate::syntax::OpClause {
                        op: op.clone(),
                        param: p.to_string(),
                        cont: k.to_string(),
                        body: Comp::Seq(
                            r.to_string(),
                            Box::new(Comp::OpCall(op.clone(), Value::Var(p.to_string()))),
                            Box::new(Comp::Throw(
                                Value::Var(k.to_string()),
                                Value::Var(r.to_string()),
                            )),
                        ),
                    });
                }
            }
            Comp::Handle(Box::new(h), Box::new(recurse(m)))
        }
        Comp::PCase(v, x1, x2, m) => {
            Comp::PCase(v.clone(), x1.clone(), x2.clone(), Box::new(recurse(m)))
        }
        Comp::SCase(v, clauses) => Comp::SCase(
            v.clone(),
            clauses
                .iter()
                .map(|cl| crate::syntax::SClause {
                    tag: cl.tag.clone(),
                    binder: cl.binder.clone(),
                    body: recurse(&cl.body),
                })
                .collect(),
        ),
        Comp::Seq(x, m, n) => Comp::Seq(x.clone(), Box::new(recurse(m)), Box::new(recurse(n))),
        Comp::Abs(x, m) => Comp::Abs(x.clone(), Box::new(recurse(m))),
        Comp::Shift0(x, m) => Comp::Shift0(x.clone(), Box::new(recurse(m))),
        Comp::App(m, v) => Comp::App(Box::new(recurse(m)), v.clone()),
        Comp::CPair(m, n) => Comp::CPair(Box::new(recurse(m)), Box::new(recurse(n))),
        Comp::Prj(i, m) => Comp::Prj(*i, Box::new(recurse(m))),
        Comp::Dollar(m, x, n) => {
            Comp::Dollar(Box::new(recurse(m)), x.clone(), Box::new(recurse(n)))
        }
        Comp::Labeled(l, m) => Comp::Labeled(*l, Box::new(recurse(m))),
        Comp::Force(v) => Comp::Force(rewrite_value(v, ops, p, k, r)),
        Comp::Return(v) => Comp::Return(rewrite_value(v, ops, p, k, r)),
        Comp::Create(v) => Comp::Create(rewrite_value(v, ops, p, k, r)),
        Comp::Yield(v) => Comp::Yield(rewrite_value(v, ops, p, k, r)),
        Comp::RefCreate(v) => Comp::RefCreate(rewrite_value(v, ops, p, k, r)),
        Comp::RefGet(v) => Comp::RefGet(rewrite_value(v, ops, p, k, r)),
        Comp::OpCall(op, v) => Comp::OpCall(op.clone(), rewrite_value(v, ops, p, k, r)),
        Comp::Throw(v, w) => Comp::Throw(
            rewrite_value(v, ops, p, k, r),
            rewrite_value(w, ops, p, k, r),
        ),
        Comp::Resume(v, w) => Comp::Resume(
            rewrite_value(v, ops, p, k, r),
            rewrite_value(w, ops, p, k, r),
        ),
        Comp::RefSet(v, w) => Comp::RefSet(
            rewrite_value(v, ops, p, k, r),
            rewrite_value(w, ops, p, k, r),
        ),
    }
}

fn rewrite_value(v: &Value, ops: &BTreeSet<Name>, p: &str, k: &str, r: &str) -> Value {
    match v {
        Value::Thunk(m) => Value::Thunk(Box::new(rewrite_handlers(m, ops, p, k, r))),
        Value::Pair(a, b) => Value::Pair(
            Box::new(rewrite_value(a, ops, p, k, r)),
            Box::new(rewrite_value(b, ops, p, k, r)),
        ),
        Value::Inj(tag, w) => Value::Inj(tag.clone(), Box::new(rewrite_value(w, ops, p, k, r))),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;
    use crate::syntax::{abs, app, dollar, force, pair, ret, seq, shift0, thunk, var};

    fn eval_program(text: &str, k: Calculus, fuel: u64) -> Outcome {
        let p = parse_program(text, k).expect("parse");
        evaluate(&p, k, fuel, false).expect("precondition")
    }

    #[test]
    fn decompose_seq_is_f_redex() {
        let c = seq("x", ret(Value::Unit), ret(var("x")));
        match decompose(&c, Calculus::Mam) {
            Decomposed::Redex(d) => {
                assert!(d.frames.is_empty());
                assert_eq!(d.redex, c);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decompose_shift_under_dollar() {
        let c = dollar(
            seq("x", shift0("k", ret(Value::Unit)), ret(var("x"))),
            "y",
            ret(var("y")),
        );
        match decompose(&c, Calculus::Del) {
            Decomposed::Redex(d) => {
                assert!(d.frames.is_empty());
                assert_eq!(d.redex, c);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decompose_shift_without_dollar_is_stuck() {
        let c = shift0("k", ret(Value::Unit));
        assert_eq!(
            decompose(&c, Calculus::Del),
            Decomposed::NoRedex(StuckReason::Shift0WithoutDollar)
        );
    }

    #[test]
    fn force_thunk_steps() {
        let config = Configuration::initial(force(thunk(ret(Value::Unit))));
        match step(&config, Calculus::Mam) {
            StepResult::Next {
                config: Configuration::Running { comp, .. },
                rule,
                ..
            } => {
                assert_eq!(rule, "force");
                assert_eq!(comp, ret(Value::Unit));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shift_rule_captures_context() {
        // ⟨let x = shift0 k (throw k ()) in return x $ y. return y⟩
        let p = parse_program(
            "(dollar (let x (shift0 k (throw k ())) (return x)) y (return y))",
            Calculus::Del,
        )
        .unwrap();
        let out = evaluate(&p, Calculus::Del, 100, false).unwrap();
        assert!(matches!(
            out.kind,
            OutcomeKind::Value {
                value: Value::Unit,
                ..
            }
        ));
    }

    #[test]
    fn resume_consumed_coroutine_is_bottom() {
        let out = eval_program(
            "(let z (create (thunk (lam u (return u)))) \
               (let a (resume z ()) (resume z ())))",
            Calculus::Ac,
            100,
        );
        assert_eq!(out.kind.tag(), "bottom");
    }

    #[test]
    fn yield_reactivates() {
        // The coroutine yields once and is resumed twice; the second resume
        // runs the stored rest of the body.
        let out = eval_program(
            "(let z (create (thunk (lam u (let a (yield (inj A ())) (return a))))) \
               (let r1 (resume z ()) (resume z (inj B ()))))",
            Calculus::Ac,
            100,
        );
        match out.kind {
            OutcomeKind::Value { value, .. } => {
                assert_eq!(value, crate::syntax::inj("B", Value::Unit));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn omega_exhausts_fuel() {
        let out = eval_program(
            "(app (lam x (app (force x) x)) (thunk (lam x (app (force x) x))))",
            Calculus::Mam,
            1000,
        );
        assert_eq!(out.kind.tag(), "fuel-exhausted");
        assert_eq!(out.steps, 1000);
    }

    #[test]
    fn fresh_labels_per_sort() {
        let mut store = Store::new();
        assert_eq!(store.fresh_label(LabelSort::Del).id, 0);
        assert_eq!(store.fresh_label(LabelSort::Del).id, 1);
        assert_eq!(store.fresh_label(LabelSort::Ac).id, 0);
    }

    #[test]
    fn ref_cells_last_write_wins() {
        let out = eval_program(
            "(let r (ref (inj A ())) (let u (set! r (inj B ())) (get r)))",
            Calculus::Ref,
            100,
        );
        match out.kind {
            OutcomeKind::Value { value, .. } => {
                assert_eq!(value, crate::syntax::inj("B", Value::Unit));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn op_without_matching_clause_is_stuck() {
        let out = eval_program(
            "(handle (handler (ret x (return x)) (on tick p k (throw k p))) (op tock ()))",
            Calculus::Eff,
            100,
        );
        match out.kind {
            OutcomeKind::Stuck { reason, .. } => {
                assert_eq!(reason, StuckReason::UnhandledOp("tock".into()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn forward_ops_makes_unhandled_op_pass_through() {
        let p = parse_program(
            "(handle (handler (ret x (return (pair x x)))) \
               (handle (handler (ret y (return y)) (on ask q j (throw j (inj A ())))) \
                 (op tock ())))",
            Calculus::Eff,
        )
        .unwrap();
        // Without forwarding: inner handler lacks `tock`, outer cannot see
        // through the inner handle frame, so the program is stuck.
        let out = evaluate(&p, Calculus::Eff, 1000, false).unwrap();
        assert_eq!(out.kind.tag(), "stuck");
        // With forwarding the inner handler re-raises; the outer handler has
        // no tock clause either, so the rewritten program is stuck at the
        // outer level only if tock is missing there too. Forwarding adds the
        // clause to both handlers, so the op escapes to the top and stays
        // stuck -- but a handler that *does* handle it now receives it.
        let wrapped = parse_program(
            "(handle (handler (ret x (return x)) (on tock p k (throw k (inj B ())))) \
               (handle (handler (ret y (return y)) (on ask q j (throw j (inj A ())))) \
                 (op tock ())))",
            Calculus::Eff,
        )
        .unwrap();
        let out = evaluate(&wrapped, Calculus::Eff, 1000, false).unwrap();
        assert_eq!(out.kind.tag(), "stuck", "inner handler hides the op");
        let forwarded = forward_ops(&wrapped);
        let out = evaluate(&forwarded, Calculus::Eff, 1000, false).unwrap();
        match out.kind {
            OutcomeKind::Value { value, .. } => {
                assert_eq!(value, crate::syntax::inj("B", Value::Unit));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wf_rejects_nested_same_label() {
        let inner = Comp::Labeled(7, Box::new(ret(Value::Unit)));
        let config = Configuration::Running {
            comp: Comp::Labeled(7, Box::new(inner)),
            store: Store::new(),
        };
        let err = ac_well_formed(&config).unwrap_err();
        assert_eq!(err.label, Some(7));
    }

    #[test]
    fn wf_accepts_active_label_mapped_to_nil() {
        let mut store = Store::new();
        let l = store.fresh_label(LabelSort::Ac);
        store.bind(l, StoreEntry::Nil);
        let config = Configuration::Running {
            comp: Comp::Labeled(l.id, Box::new(app(abs("x", ret(var("x"))), Value::Unit))),
            store,
        };
        assert!(ac_well_formed(&config).is_ok());
        let config = Configuration::Running {
            comp: ret(Value::Unit),
            store: Store::new(),
        };
        assert!(ac_well_formed(&config).is_ok());
    }

    #[test]
    fn wf_rejects_active_label_in_stored_value() {
        let mut store = Store::new();
        let l = store.fresh_label(LabelSort::Ac);
        store.bind(
            l,
            StoreEntry::AcVal(thunk(Comp::Labeled(9, Box::new(ret(Value::Unit))))),
        );
        let config = Configuration::Running {
            comp: ret(Value::Unit),
            store,
        };
        assert!(ac_well_formed(&config).is_err());
    }

    #[test]
    fn one_shot_throw_twice_is_bottom() {
        let out = eval_program(
            "(dollar (shift0 k (let a (throw k (nat 1)) (let b (throw k (nat 2)) (return (pair a b))))) x (return x))",
            Calculus::Del,
            1000,
        );
        assert_eq!(out.kind.tag(), "bottom");
    }

    #[test]
    fn trace_records_rules_and_deltas() {
        let p = parse_program(
            "(let z (create (thunk (lam u (return u)))) (resume z ()))",
            Calculus::Ac,
        )
        .unwrap();
        let out = evaluate(&p, Calculus::Ac, 100, true).unwrap();
        let trace = out.trace.unwrap();
        let rules: Vec<&str> = trace.iter().map(|t| t.rule).collect();
        assert_eq!(
            rules,
            vec!["create", "let", "resume", "force", "app", "coro-ret"]
        );
        let resume_step = &trace[2];
        assert_eq!(resume_step.delta.len(), 1);
        assert_eq!(resume_step.delta[0].now, "nil");
        assert_eq!(resume_step.delta[0].was, Some("ac-val"));
    }

    #[test]
    fn labels_in_value_under_pair_pass_through() {
        // A label may escape as part of the final value.
        let out = eval_program(
            "(let z (create (thunk (lam u (return u)))) (return (pair z ())))",
            Calculus::Ac,
            100,
        );
        match out.kind {
            OutcomeKind::Value { value, .. } => {
                assert_eq!(value, pair(Value::AcLabel(0), Value::Unit));
            }
            other => panic!("{other:?}"),
        }
    }
}
