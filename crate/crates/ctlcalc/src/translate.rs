//! Macro-translations between the calculi, on label-free programs.
//!
//! Every translation is homomorphic on the shared core constructors and
//! replaces each extension constructor by a fixed syntactic abstraction
//! instantiated at the translated subterms. Binders introduced by the
//! abstractions are freshened against every name in the source program, so
//! they can never capture program variables.

use crate::syntax::{
    self, abs, alpha_equal_comp, app, check_calculus, force, free_vars_value, inj, pair, ret, seq,
    thunk, var, Calculus, CheckViolation, Comp, Handler, Name, NamePool, OpClause, SClause, Value,
};
use std::collections::BTreeSet;
use std::fmt;

/// The directed translations. `eff_to_ac` is the composition of `eff_to_del`
/// and `del_to_ac_counter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TranslationId {
    DelToAcNaive,
    DelToAcCounter,
    EffToDel,
    DelToEff,
    RefToAc,
    EffToAc,
}

impl TranslationId {
    pub const ALL: [TranslationId; 6] = [
        TranslationId::DelToAcNaive,
        TranslationId::DelToAcCounter,
        TranslationId::EffToDel,
        TranslationId::DelToEff,
        TranslationId::RefToAc,
        TranslationId::EffToAc,
    ];

    pub fn source(self) -> Calculus {
        match self {
            TranslationId::DelToAcNaive
            | TranslationId::DelToAcCounter
            | TranslationId::DelToEff => Calculus::Del,
            TranslationId::EffToDel | TranslationId::EffToAc => Calculus::Eff,
            TranslationId::RefToAc => Calculus::Ref,
        }
    }

    pub fn target(self) -> Calculus {
        match self {
            TranslationId::DelToAcNaive
            | TranslationId::DelToAcCounter
            | TranslationId::RefToAc
            | TranslationId::EffToAc => Calculus::Ac,
            TranslationId::EffToDel => Calculus::Del,
            TranslationId::DelToEff => Calculus::Eff,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TranslationId::DelToAcNaive => "del_to_ac_naive",
            TranslationId::DelToAcCounter => "del_to_ac_counter",
            TranslationId::EffToDel => "eff_to_del",
            TranslationId::DelToEff => "del_to_eff",
            TranslationId::RefToAc => "ref_to_ac",
            TranslationId::EffToAc => "eff_to_ac",
        }
    }
}

impl fmt::Display for TranslationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TranslationId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TranslationId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| format!("unknown translation `{s}`"))
    }
}

/// The operation name reserved by the dollar encoding in `del_to_eff`.
pub const RESERVED_OP: &str = "shift0";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TranslateError {
    #[error("source program rejected: {0}")]
    SourceViolation(#[from] CheckViolation),
    #[error("operation name `{0}` is reserved by this translation")]
    ReservedOp(String),
    #[error("runtime labels have no translation")]
    LabelPresent,
}

// ---------------------------------------------------------------------------
// Helper runtime terms from the refined translation
// ---------------------------------------------------------------------------

/// Names of the closed helper terms of the counter translation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HelperName {
    Fail,
    Zero,
    Incr,
    Compare,
    Cmp,
    Ref,
    Th,
    Get,
    Set,
}

impl std::str::FromStr for HelperName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail" => Ok(HelperName::Fail),
            "zero" => Ok(HelperName::Zero),
            "incr" => Ok(HelperName::Incr),
            "compare" => Ok(HelperName::Compare),
            "cmp" => Ok(HelperName::Cmp),
            "ref" => Ok(HelperName::Ref),
            "th" => Ok(HelperName::Th),
            "get" => Ok(HelperName::Get),
            "set" => Ok(HelperName::Set),
            other => Err(format!("unknown helper `{other}`")),
        }
    }
}

/// Emits the named helper as a closed coroutine-calculus value. The result
/// is identical across calls.
pub fn emit_helper(name: HelperName) -> Value {
    match name {
        HelperName::Fail => fail_helper(),
        HelperName::Zero => zero(),
        HelperName::Incr => incr_helper(),
        HelperName::Compare => compare_helper(),
        HelperName::Cmp => cmp_helper(),
        HelperName::Ref => ref_helper(),
        HelperName::Th => th_helper(),
        HelperName::Get => get_helper(),
        HelperName::Set => set_helper(),
    }
}

pub fn zero() -> Value {
    inj("Zero", Value::Unit)
}

pub fn succ(v: Value) -> Value {
    inj("Succ", v)
}

/// `{ let z = create {λ_. return ()} in let _ = resume z () in resume z () }`
/// — consumes a fresh coroutine twice, reaching the error state.
fn fail_helper() -> Value {
    thunk(seq(
        "z",
        Comp::Create(thunk(abs("u", ret(Value::Unit)))),
        seq(
            "u",
            Comp::Resume(var("z"), Value::Unit),
            Comp::Resume(var("z"), Value::Unit),
        ),
    ))
}

/// `{λn. return (inj Succ n)}`
fn incr_helper() -> Value {
    thunk(abs("n", ret(succ(var("n")))))
}

/// `{λf. λn. λm. case-split on both numerals}` — the recursive core of
/// Peano equality; `f` receives the self-application knot.
fn cmp_helper() -> Value {
    let arm = |body: Comp| body;
    thunk(abs(
        "f",
        abs(
            "n",
            abs(
                "m",
                Comp::SCase(
                    var("n"),
                    vec![
                        SClause {
                            tag: "Zero".into(),
                            binder: "u".into(),
                            body: Comp::SCase(
                                var("m"),
                                vec![
                                    SClause {
                                        tag: "Zero".into(),
                                        binder: "u'".into(),
                                        body: arm(ret(inj("True", Value::Unit))),
                                    },
                                    SClause {
                                        tag: "Succ".into(),
                                        binder: "m'".into(),
                                        body: arm(ret(inj("False", Value::Unit))),
                                    },
                                ],
                            ),
                        },
                        SClause {
                            tag: "Succ".into(),
                            binder: "n'".into(),
                            body: Comp::SCase(
                                var("m"),
                                vec![
                                    SClause {
                                        tag: "Zero".into(),
                                        binder: "u'".into(),
                                        body: arm(ret(inj("False", Value::Unit))),
                                    },
                                    SClause {
                                        tag: "Succ".into(),
                                        binder: "m'".into(),
                                        body: arm(app(app(force(var("f")), var("n'")), var("m'"))),
                                    },
                                ],
                            ),
                        },
                    ],
                ),
            ),
        ),
    ))
}

/// Self-application knot over a thunked recursive body:
/// `(λx. (force g) {(force x) x}) {λx. (force g) {(force x) x}}`.
fn knot(g: Value) -> Comp {
    let spin = |g: Value| abs("x", app(force(g), thunk(app(force(var("x")), var("x")))));
    app(spin(g.clone()), thunk(spin(g)))
}

/// `{ knot(cmp) }` — forces to a two-argument Peano equality test.
fn compare_helper() -> Value {
    thunk(knot(cmp_helper()))
}

/// `{λf. λs. λq. case q of Set/Get}` — one step of the cell protocol:
/// answer the request, suspend, recurse with the new state.
fn th_helper() -> Value {
    thunk(abs(
        "f",
        abs(
            "s",
            abs(
                "q",
                Comp::SCase(
                    var("q"),
                    vec![
                        SClause {
                            tag: "Set".into(),
                            binder: "v".into(),
                            body: seq(
                                "q'",
                                Comp::Yield(Value::Unit),
                                app(app(force(var("f")), var("v")), var("q'")),
                            ),
                        },
                        SClause {
                            tag: "Get".into(),
                            binder: "u".into(),
                            body: seq(
                                "q'",
                                Comp::Yield(var("s")),
                                app(app(force(var("f")), var("s")), var("q'")),
                            ),
                        },
                    ],
                ),
            ),
        ),
    ))
}

/// `refcell⟨v⟩ ≔ {λy. let q' = return y in ((force {knot(th)}) v) q'}` —
/// the coroutine body of a mutable cell holding `v`. Binders are freshened
/// against the free variables of `v`.
pub fn refcell(v: Value) -> Value {
    let mut avoid = free_vars_value(&v);
    syntax::all_names_value(&v, &mut avoid);
    let mut pool = NamePool::new(avoid);
    let y = pool.fresh("y");
    let q = pool.fresh("q'");
    let x = pool.fresh("x");
    let spin = |g: Value, x: &str| abs(x, app(force(g), thunk(app(force(var(x)), var(x)))));
    let fix = thunk(app(spin(th_helper(), &x), thunk(spin(th_helper(), &x))));
    thunk(abs(
        y.clone(),
        seq(q.clone(), ret(var(y)), app(app(force(fix), v), var(q))),
    ))
}

/// `{λv. create refcell⟨v⟩}`
fn ref_helper() -> Value {
    thunk(abs("v", Comp::Create(refcell(var("v")))))
}

/// `{λc. resume c (inj Get ())}`
fn get_helper() -> Value {
    thunk(abs("c", Comp::Resume(var("c"), inj("Get", Value::Unit))))
}

/// `{λc. λv. resume c (inj Set v)}`
fn set_helper() -> Value {
    thunk(abs(
        "c",
        abs("v", Comp::Resume(var("c"), inj("Set", var("v")))),
    ))
}

// ---------------------------------------------------------------------------
// The translations
// ---------------------------------------------------------------------------

/// Translates a label-free program of the source calculus into a label-free
/// program of the target calculus.
pub fn translate(p: &Comp, id: TranslationId) -> Result<Comp, TranslateError> {
    check_calculus(p, id.source(), true)?;
    translate_phrase(p, id)
}

/// Phrase-level translation: no closedness requirement, used by the
/// structural condition checks. Still rejects foreign constructors and
/// runtime labels.
pub fn translate_phrase(c: &Comp, id: TranslationId) -> Result<Comp, TranslateError> {
    if syntax::has_labels_comp(c) {
        return Err(TranslateError::LabelPresent);
    }
    match id {
        TranslationId::EffToAc => {
            let mid = translate_phrase(c, TranslationId::EffToDel)?;
            translate_phrase(&mid, TranslationId::DelToAcCounter)
        }
        _ => {
            if id == TranslationId::DelToEff && contains_op(c, RESERVED_OP) {
                return Err(TranslateError::ReservedOp(RESERVED_OP.into()));
            }
            let mut tr = Translator::new(c, id);
            tr.comp(c)
        }
    }
}

pub fn translate_value(v: &Value, id: TranslationId) -> Result<Value, TranslateError> {
    match id {
        TranslationId::EffToAc => {
            let mid = translate_value(v, TranslationId::EffToDel)?;
            translate_value(&mid, TranslationId::DelToAcCounter)
        }
        _ => {
            let mut avoid = BTreeSet::new();
            syntax::all_names_value(v, &mut avoid);
            let mut tr = Translator::with_avoid(avoid, id);
            tr.value(v)
        }
    }
}

fn contains_op(c: &Comp, op: &str) -> bool {
    let mut found = false;
    let mut ops = BTreeSet::new();
    collect_op_names(c, &mut ops);
    if ops.contains(op) {
        found = true;
    }
    found
}

fn collect_op_names(c: &Comp, acc: &mut BTreeSet<Name>) {
    use Comp::*;
    match c {
        OpCall(op, v) => {
            acc.insert(op.clone());
            collect_op_names_value(v, acc);
        }
        PCase(v, _, _, m) => {
            collect_op_names_value(v, acc);
            collect_op_names(m, acc);
        }
        SCase(v, clauses) => {
            collect_op_names_value(v, acc);
            for cl in clauses {
                collect_op_names(&cl.body, acc);
            }
        }
        Force(v) | Return(v) | Create(v) | Yield(v) | RefCreate(v) | RefGet(v) => {
            collect_op_names_value(v, acc)
        }
        Seq(_, m, n) | Dollar(m, _, n) | CPair(m, n) => {
            collect_op_names(m, acc);
            collect_op_names(n, acc);
        }
        Abs(_, m) | Shift0(_, m) | Prj(_, m) | Labeled(_, m) => collect_op_names(m, acc),
        App(m, v) => {
            collect_op_names(m, acc);
            collect_op_names_value(v, acc);
        }
        Throw(v, w) | Resume(v, w) | RefSet(v, w) => {
            collect_op_names_value(v, acc);
            collect_op_names_value(w, acc);
        }
        Handle(h, m) => {
            for cl in &h.ops {
                acc.insert(cl.op.clone());
                collect_op_names(&cl.body, acc);
            }
            collect_op_names(&h.ret_body, acc);
            collect_op_names(m, acc);
        }
    }
}

fn collect_op_names_value(v: &Value, acc: &mut BTreeSet<Name>) {
    match v {
        Value::Thunk(m) => collect_op_names(m, acc),
        Value::Pair(a, b) => {
            collect_op_names_value(a, acc);
            collect_op_names_value(b, acc);
        }
        Value::Inj(_, w) => collect_op_names_value(w, acc),
        _ => {}
    }
}

/// Binder names used by the syntactic abstractions, freshened once per
/// translation run against all names of the source program. Template binders
/// only ever occur bound, so reusing one fixed set across instantiations
/// cannot capture program variables.
struct Templates {
    z: Name,
    zc: Name,
    res: Name,
    i: Name,
    j: Name,
    b: Name,
    i2: Name,
    wild: Name,
    w: Name,
    k: Name,
    h: Name,
    y: Name,
    c: Name,
    p: Name,
}

struct Translator {
    id: TranslationId,
    names: Templates,
}

impl Translator {
    fn new(p: &Comp, id: TranslationId) -> Self {
        let mut avoid = BTreeSet::new();
        syntax::all_names_comp(p, &mut avoid);
        Translator::with_avoid(avoid, id)
    }

    fn with_avoid(avoid: BTreeSet<Name>, id: TranslationId) -> Self {
        let mut pool = NamePool::new(avoid);
        let names = Templates {
            z: pool.fresh("z"),
            zc: pool.fresh("zc"),
            res: pool.fresh("res"),
            i: pool.fresh("i"),
            j: pool.fresh("j"),
            b: pool.fresh("b"),
            i2: pool.fresh("i'"),
            wild: pool.fresh("_"),
            w: pool.fresh("w"),
            k: pool.fresh("k"),
            h: pool.fresh("h"),
            y: pool.fresh("y"),
            c: pool.fresh("c"),
            p: pool.fresh("p"),
        };
        Translator { id, names }
    }

    fn value(&mut self, v: &Value) -> Result<Value, TranslateError> {
        Ok(match v {
            Value::Var(x) => Value::Var(x.clone()),
            Value::Unit => Value::Unit,
            Value::Pair(a, b) => pair(self.value(a)?, self.value(b)?),
            Value::Inj(tag, w) => inj(tag.clone(), self.value(w)?),
            Value::Thunk(m) => thunk(self.comp(m)?),
            Value::DelLabel(_) | Value::AcLabel(_) | Value::EffLabel(_, _) | Value::RefCell(_) => {
                return Err(TranslateError::LabelPresent)
            }
        })
    }

    fn comp(&mut self, c: &Comp) -> Result<Comp, TranslateError> {
        Ok(match c {
            // Shared core: translated homomorphically.
            Comp::PCase(v, x1, x2, m) => Comp::PCase(
                self.value(v)?,
                x1.clone(),
                x2.clone(),
                Box::new(self.comp(m)?),
            ),
            Comp::SCase(v, clauses) => Comp::SCase(
                self.value(v)?,
                clauses
                    .iter()
                    .map(|cl| {
                        Ok(SClause {
                            tag: cl.tag.clone(),
                            binder: cl.binder.clone(),
                            body: self.comp(&cl.body)?,
                        })
                    })
                    .collect::<Result<_, TranslateError>>()?,
            ),
            Comp::Force(v) => Comp::Force(self.value(v)?),
            Comp::Return(v) => Comp::Return(self.value(v)?),
            Comp::Seq(x, m, n) => {
                Comp::Seq(x.clone(), Box::new(self.comp(m)?), Box::new(self.comp(n)?))
            }
            Comp::Abs(x, m) => Comp::Abs(x.clone(), Box::new(self.comp(m)?)),
            Comp::App(m, v) => Comp::App(Box::new(self.comp(m)?), self.value(v)?),
            Comp::CPair(m, n) => Comp::CPair(Box::new(self.comp(m)?), Box::new(self.comp(n)?)),
            Comp::Prj(i, m) => Comp::Prj(*i, Box::new(self.comp(m)?)),
            Comp::Labeled(_, _) => return Err(TranslateError::LabelPresent),
            // Extension constructors: fixed syntactic abstractions.
            Comp::Shift0(k, m) => {
                let body = self.comp(m)?;
                match self.id {
                    TranslationId::DelToAcNaive | TranslationId::DelToAcCounter => {
                        // yield {λk. ⟦M⟧}
                        Comp::Yield(thunk(abs(k.clone(), body)))
                    }
                    TranslationId::DelToEff => {
                        // op shift0 {λk. ⟦M⟧}
                        Comp::OpCall(RESERVED_OP.into(), thunk(abs(k.clone(), body)))
                    }
                    _ => return Err(foreign(self.id, "shift0")),
                }
            }
            Comp::Dollar(m, x, n) => {
                let m = self.comp(m)?;
                let n = self.comp(n)?;
                match self.id {
                    TranslationId::DelToAcNaive => self.dollar_naive(m, x.clone(), n),
                    TranslationId::DelToAcCounter => self.dollar_counter(m, x.clone(), n),
                    TranslationId::DelToEff => {
                        // handle {return x ↦ ⟦N⟧, shift0 p k ↦ (force p) k} ⟦M⟧
                        let handler = Handler {
                            ret_binder: x.clone(),
                            ret_body: Box::new(n),
                            ops: vec![OpClause {
                                op: RESERVED_OP.into(),
                                param: self.names.p.clone(),
                                cont: self.names.k.clone(),
                                body: app(force(var(&self.names.p)), var(&self.names.k)),
                            }],
                        };
                        Comp::Handle(Box::new(handler), Box::new(m))
                    }
                    _ => return Err(foreign(self.id, "dollar")),
                }
            }
            Comp::Throw(v, w) => {
                let v = self.value(v)?;
                let w = self.value(w)?;
                match self.id {
                    TranslationId::DelToAcNaive => self.throw_naive(v, w),
                    TranslationId::DelToAcCounter => self.throw_counter(v, w),
                    TranslationId::DelToEff => Comp::Throw(v, w),
                    TranslationId::EffToDel => {
                        // (force ⟦V⟧) ⟦W⟧
                        app(force(v), w)
                    }
                    _ => return Err(foreign(self.id, "throw")),
                }
            }
            Comp::OpCall(op, v) => {
                let v = self.value(v)?;
                match self.id {
                    TranslationId::EffToDel => {
                        // shift0 k. λh. (force h) (inj op (⟦V⟧, {λy. (throw k y) h}))
                        let n = &self.names;
                        let resume_thunk = thunk(abs(
                            n.y.clone(),
                            app(Comp::Throw(var(&n.k), var(&n.y)), var(&n.h)),
                        ));
                        Comp::Shift0(
                            n.k.clone(),
                            Box::new(abs(
                                n.h.clone(),
                                app(force(var(&n.h)), inj(op.clone(), pair(v, resume_thunk))),
                            )),
                        )
                    }
                    _ => return Err(foreign(self.id, "op")),
                }
            }
            Comp::Handle(h, m) => {
                let m = self.comp(m)?;
                match self.id {
                    TranslationId::EffToDel => self.handle_to_dollar(h, m)?,
                    _ => return Err(foreign(self.id, "handle")),
                }
            }
            Comp::RefCreate(v) => {
                let v = self.value(v)?;
                match self.id {
                    TranslationId::RefToAc => Comp::Create(refcell(v)),
                    _ => return Err(foreign(self.id, "ref")),
                }
            }
            Comp::RefSet(v, w) => {
                let v = self.value(v)?;
                let w = self.value(w)?;
                match self.id {
                    TranslationId::RefToAc => Comp::Resume(v, inj("Set", w)),
                    _ => return Err(foreign(self.id, "set!")),
                }
            }
            Comp::RefGet(v) => {
                let v = self.value(v)?;
                match self.id {
                    TranslationId::RefToAc => Comp::Resume(v, inj("Get", Value::Unit)),
                    _ => return Err(foreign(self.id, "get")),
                }
            }
            Comp::Create(_) | Comp::Resume(_, _) | Comp::Yield(_) => {
                return Err(foreign(self.id, "coroutine-form"))
            }
        })
    }

    /// `let z = create {λ_. let x = ⟦M⟧ in return {λ_. ⟦N⟧}} in
    ///  let res = resume z () in (force res) z`
    fn dollar_naive(&self, m: Comp, x: Name, n: Comp) -> Comp {
        let t = &self.names;
        let body = thunk(abs(
            t.wild.clone(),
            seq(x, m, ret(thunk(abs(t.wild.clone(), n)))),
        ));
        seq(
            t.z.clone(),
            Comp::Create(body),
            seq(
                t.res.clone(),
                Comp::Resume(var(&t.z), Value::Unit),
                app(force(var(&t.res)), var(&t.z)),
            ),
        )
    }

    /// `let res = resume ⟦V⟧ ⟦W⟧ in (force res) ⟦V⟧`
    fn throw_naive(&self, v: Value, w: Value) -> Comp {
        let t = &self.names;
        seq(
            t.res.clone(),
            Comp::Resume(v.clone(), w),
            app(force(var(&t.res)), v),
        )
    }

    /// The counter version pairs the coroutine with a fresh counter cell and
    /// hands continuations out as `((z, zc), i)` triples.
    fn dollar_counter(&self, m: Comp, x: Name, n: Comp) -> Comp {
        let t = &self.names;
        let body = thunk(abs(
            t.wild.clone(),
            seq(x, m, ret(thunk(abs(t.wild.clone(), n)))),
        ));
        seq(
            t.z.clone(),
            Comp::Create(body),
            seq(
                t.zc.clone(),
                app(force(ref_helper()), zero()),
                seq(
                    t.res.clone(),
                    Comp::Resume(var(&t.z), Value::Unit),
                    app(
                        force(var(&t.res)),
                        pair(pair(var(&t.z), var(&t.zc)), zero()),
                    ),
                ),
            ),
        )
    }

    /// Validates the continuation's index against the counter before
    /// resuming; a stale index forces `fail`.
    fn throw_counter(&self, v: Value, w: Value) -> Comp {
        let t = &self.names;
        let valid_arm = seq(
            t.i2.clone(),
            app(force(incr_helper()), var(&t.i)),
            seq(
                t.wild.clone(),
                app(app(force(set_helper()), var(&t.zc)), var(&t.i2)),
                seq(
                    t.res.clone(),
                    Comp::Resume(var(&t.z), w),
                    app(
                        force(var(&t.res)),
                        pair(pair(var(&t.z), var(&t.zc)), var(&t.i2)),
                    ),
                ),
            ),
        );
        let check = seq(
            t.j.clone(),
            app(force(get_helper()), var(&t.zc)),
            seq(
                t.b.clone(),
                app(app(force(compare_helper()), var(&t.i)), var(&t.j)),
                Comp::SCase(
                    var(&t.b),
                    vec![
                        SClause {
                            tag: "True".into(),
                            binder: t.wild.clone(),
                            body: valid_arm,
                        },
                        SClause {
                            tag: "False".into(),
                            binder: t.wild.clone(),
                            body: force(fail_helper()),
                        },
                    ],
                ),
            ),
        );
        Comp::PCase(
            v,
            t.w.clone(),
            t.i.clone(),
            Box::new(Comp::PCase(
                var(&t.w),
                t.z.clone(),
                t.zc.clone(),
                Box::new(check),
            )),
        )
    }

    /// `(⟦M⟧ $ x. λ_. ⟦M_ret⟧) {λc. case c of (inj op (p, k) ↦ ⟦M_op⟧)}`
    fn handle_to_dollar(&mut self, h: &Handler, m: Comp) -> Result<Comp, TranslateError> {
        let t_ret = self.comp(&h.ret_body)?;
        let mut clauses = Vec::with_capacity(h.ops.len());
        for cl in &h.ops {
            let body = self.comp(&cl.body)?;
            clauses.push(SClause {
                tag: cl.op.clone(),
                binder: self.names.w.clone(),
                body: Comp::PCase(
                    var(&self.names.w),
                    cl.param.clone(),
                    cl.cont.clone(),
                    Box::new(body),
                ),
            });
        }
        let t = &self.names;
        let ops_fn = thunk(abs(t.c.clone(), Comp::SCase(var(&t.c), clauses)));
        let ret_clause = abs(t.wild.clone(), t_ret);
        Ok(app(
            Comp::Dollar(Box::new(m), h.ret_binder.clone(), Box::new(ret_clause)),
            ops_fn,
        ))
    }
}

fn foreign(id: TranslationId, constructor: &str) -> TranslateError {
    TranslateError::SourceViolation(CheckViolation {
        path: "<root>".into(),
        constructor: constructor.into(),
        detail: format!("not a {} constructor", id.source()),
    })
}

// ---------------------------------------------------------------------------
// Behaviour check for the cell encoding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellOp {
    Set(Value),
    Get,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CellCheckError {
    #[error("cell values must be first-order (unit, pairs, variants)")]
    NotFirstOrder,
    #[error("cell program failed: {0}")]
    BadOutcome(String),
}

fn first_order(v: &Value) -> bool {
    match v {
        Value::Unit => true,
        Value::Pair(a, b) => first_order(a) && first_order(b),
        Value::Inj(_, w) => first_order(w),
        _ => false,
    }
}

/// Runs `let c = (force ref) v0` followed by the given operations through
/// the coroutine cell encoding, inside one evaluation, and returns the
/// values produced by the gets.
pub fn refcell_behaviour_check(v0: &Value, ops: &[CellOp]) -> Result<Vec<Value>, CellCheckError> {
    if !first_order(v0) {
        return Err(CellCheckError::NotFirstOrder);
    }
    for op in ops {
        if let CellOp::Set(v) = op {
            if !first_order(v) {
                return Err(CellCheckError::NotFirstOrder);
            }
        }
    }
    let cell = "c";
    let mut gets = Vec::new();
    // Build from the back: return the list of observed get results.
    let mut names = Vec::new();
    for (idx, op) in ops.iter().enumerate() {
        if matches!(op, CellOp::Get) {
            names.push(format!("g{idx}"));
        }
    }
    let result = names
        .iter()
        .rev()
        .fold(Value::Unit, |acc, name| pair(var(name.clone()), acc));
    let mut body = ret(result);
    for (idx, op) in ops.iter().enumerate().rev() {
        body = match op {
            CellOp::Set(v) => seq(
                format!("s{idx}"),
                app(app(force(set_helper()), var(cell)), v.clone()),
                body,
            ),
            CellOp::Get => seq(format!("g{idx}"), app(force(get_helper()), var(cell)), body),
        };
    }
    let program = seq(cell, app(force(ref_helper()), v0.clone()), body);
    let outcome = crate::machine::evaluate(&program, Calculus::Ac, 1_000_000, false)
        .map_err(|e| CellCheckError::BadOutcome(e.to_string()))?;
    let value = match outcome.kind {
        crate::machine::OutcomeKind::Value { value, .. } => value,
        other => return Err(CellCheckError::BadOutcome(other.tag().to_string())),
    };
    let mut cur = &value;
    loop {
        match cur {
            Value::Unit => break,
            Value::Pair(head, tail) => {
                gets.push((**head).clone());
                cur = tail;
            }
            _ => return Err(CellCheckError::BadOutcome("malformed result list".into())),
        }
    }
    Ok(gets)
}

// ---------------------------------------------------------------------------
// Structural conditions on translations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub enum MacroViolationKind {
    NotTargetProgram,
    NonHomomorphic,
    TemplateMismatch,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct MacroViolation {
    pub kind: MacroViolationKind,
    pub constructor: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct MacroReport {
    pub violations: Vec<MacroViolation>,
}

impl MacroReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub type TranslateFn<'a> = dyn Fn(&Comp) -> Result<Comp, TranslateError> + 'a;
pub type TranslateValueFn<'a> = dyn Fn(&Value) -> Result<Value, TranslateError> + 'a;

/// Checks the structural macro-translation conditions on `p`:
/// the output is a target program, shared-core nodes translate
/// homomorphically, and each extension node is one fixed abstraction
/// instantiated at the translated children.
pub fn check_macro_conditions(id: TranslationId, p: &Comp) -> MacroReport {
    let f: &TranslateFn = &|c| translate_phrase(c, id);
    let fv: &TranslateValueFn = &|v| translate_value(v, id);
    check_macro_conditions_with(f, fv, id, p)
}

pub fn check_macro_conditions_with(
    f: &TranslateFn,
    fv: &TranslateValueFn,
    id: TranslationId,
    p: &Comp,
) -> MacroReport {
    let mut report = MacroReport::default();
    match f(p) {
        Ok(out) => {
            if let Err(v) = check_calculus(&out, id.target(), true) {
                report.violations.push(MacroViolation {
                    kind: MacroViolationKind::NotTargetProgram,
                    constructor: "<program>".into(),
                    detail: v.to_string(),
                });
            }
        }
        Err(e) => {
            report.violations.push(MacroViolation {
                kind: MacroViolationKind::NotTargetProgram,
                constructor: "<program>".into(),
                detail: e.to_string(),
            });
            return report;
        }
    }
    walk_comp(f, fv, id, p, &mut report);
    report
}

fn record(report: &mut MacroReport, kind: MacroViolationKind, constructor: &str, detail: String) {
    if report.violations.len() < 16 {
        report.violations.push(MacroViolation {
            kind,
            constructor: constructor.to_string(),
            detail,
        });
    }
}

/// Recomputes the node's translation from its children's translations and
/// compares. For shared-core nodes the expectation is the same constructor;
/// for extension nodes it is the node's syntactic abstraction.
fn walk_comp(
    f: &TranslateFn,
    fv: &TranslateValueFn,
    id: TranslationId,
    c: &Comp,
    report: &mut MacroReport,
) {
    let actual = match f(c) {
        Ok(t) => t,
        Err(_) => return, // already reported at the root
    };
    let (constructor, expected, is_core) = match expected_translation(f, fv, id, c) {
        Ok(parts) => parts,
        Err(_) => return,
    };
    if !alpha_equal_comp(&actual, &expected) {
        let kind = if is_core {
            MacroViolationKind::NonHomomorphic
        } else {
            MacroViolationKind::TemplateMismatch
        };
        record(
            report,
            kind,
            constructor,
            format!(
                "translation of node differs from its reconstruction: {} vs {}",
                syntax::pretty_comp(&actual),
                syntax::pretty_comp(&expected)
            ),
        );
    }
    // Recurse into child computations (including under binders and thunks).
    for child in child_comps(c) {
        walk_comp(f, fv, id, child, report);
    }
}

fn child_comps(c: &Comp) -> Vec<&Comp> {
    let mut out: Vec<&Comp> = Vec::new();
    match c {
        Comp::PCase(v, _, _, m) => {
            value_comps(v, &mut out);
            out.push(m);
        }
        Comp::SCase(v, clauses) => {
            value_comps(v, &mut out);
            for cl in clauses {
                out.push(&cl.body);
            }
        }
        Comp::Force(v)
        | Comp::Return(v)
        | Comp::Create(v)
        | Comp::Yield(v)
        | Comp::RefCreate(v)
        | Comp::RefGet(v)
        | Comp::OpCall(_, v) => value_comps(v, &mut out),
        Comp::Seq(_, m, n) | Comp::Dollar(m, _, n) | Comp::CPair(m, n) => {
            out.push(m);
            out.push(n);
        }
        Comp::Abs(_, m) | Comp::Shift0(_, m) | Comp::Prj(_, m) | Comp::Labeled(_, m) => out.push(m),
        Comp::App(m, v) => {
            out.push(m);
            value_comps(v, &mut out);
        }
        Comp::Throw(v, w) | Comp::Resume(v, w) | Comp::RefSet(v, w) => {
            value_comps(v, &mut out);
            value_comps(w, &mut out);
        }
        Comp::Handle(h, m) => {
            out.push(&h.ret_body);
            for cl in &h.ops {
                out.push(&cl.body);
            }
            out.push(m);
        }
    }
    out
}

fn value_comps<'a>(v: &'a Value, out: &mut Vec<&'a Comp>) {
    match v {
        Value::Thunk(m) => out.push(m),
        Value::Pair(a, b) => {
            value_comps(a, out);
            value_comps(b, out);
        }
        Value::Inj(_, w) => value_comps(w, out),
        _ => {}
    }
}

fn expected_translation(
    f: &TranslateFn,
    fv: &TranslateValueFn,
    id: TranslationId,
    c: &Comp,
) -> Result<(&'static str, Comp, bool), TranslateError> {
    // Rebuilds the node from independently translated children. Extension
    // nodes go through a fresh template instantiation.
    let core =
        |c: Comp| -> Result<(&'static str, Comp, bool), TranslateError> { Ok(("core", c, true)) };
    match c {
        Comp::PCase(v, x1, x2, m) => {
            core(Comp::PCase(fv(v)?, x1.clone(), x2.clone(), Box::new(f(m)?)))
        }
        Comp::SCase(v, clauses) => core(Comp::SCase(
            fv(v)?,
            clauses
                .iter()
                .map(|cl| {
                    Ok(SClause {
                        tag: cl.tag.clone(),
                        binder: cl.binder.clone(),
                        body: f(&cl.body)?,
                    })
                })
                .collect::<Result<_, TranslateError>>()?,
        )),
        Comp::Force(v) => core(Comp::Force(fv(v)?)),
        Comp::Return(v) => core(Comp::Return(fv(v)?)),
        Comp::Seq(x, m, n) => core(Comp::Seq(x.clone(), Box::new(f(m)?), Box::new(f(n)?))),
        Comp::Abs(x, m) => core(Comp::Abs(x.clone(), Box::new(f(m)?))),
        Comp::App(m, v) => core(Comp::App(Box::new(f(m)?), fv(v)?)),
        Comp::CPair(m, n) => core(Comp::CPair(Box::new(f(m)?), Box::new(f(n)?))),
        Comp::Prj(i, m) => core(Comp::Prj(*i, Box::new(f(m)?))),
        Comp::Labeled(_, _) => Err(TranslateError::LabelPresent),
        // Extension constructors: instantiate the template afresh.
        Comp::Shift0(k, m) => {
            let mut tr = Translator::new(c, id);
            let body = f(m)?;
            let rebuilt = match id {
                TranslationId::DelToAcNaive | TranslationId::DelToAcCounter => {
                    Comp::Yield(thunk(abs(k.clone(), body)))
                }
                TranslationId::DelToEff => {
                    Comp::OpCall(RESERVED_OP.into(), thunk(abs(k.clone(), body)))
                }
                _ => tr.comp(c)?,
            };
            Ok(("shift0", rebuilt, false))
        }
        Comp::Dollar(m, x, n) => {
            let tr = Translator::new(c, id);
            let (tm, tn) = (f(m)?, f(n)?);
            let rebuilt = match id {
                TranslationId::DelToAcNaive => tr.dollar_naive(tm, x.clone(), tn),
                TranslationId::DelToAcCounter => tr.dollar_counter(tm, x.clone(), tn),
                TranslationId::DelToEff => {
                    let handler = Handler {
                        ret_binder: x.clone(),
                        ret_body: Box::new(tn),
                        ops: vec![OpClause {
                            op: RESERVED_OP.into(),
                            param: tr.names.p.clone(),
                            cont: tr.names.k.clone(),
                            body: app(force(var(&tr.names.p)), var(&tr.names.k)),
                        }],
                    };
                    Comp::Handle(Box::new(handler), Box::new(tm))
                }
                _ => return Err(foreign(id, "dollar")),
            };
            Ok(("dollar", rebuilt, false))
        }
        Comp::Throw(v, w) => {
            let tr = Translator::new(c, id);
            let (tv, tw) = (fv(v)?, fv(w)?);
            let rebuilt = match id {
                TranslationId::DelToAcNaive => tr.throw_naive(tv, tw),
                TranslationId::DelToAcCounter => tr.throw_counter(tv, tw),
                TranslationId::DelToEff => Comp::Throw(tv, tw),
                TranslationId::EffToDel => app(force(tv), tw),
                _ => return Err(foreign(id, "throw")),
            };
            Ok(("throw", rebuilt, false))
        }
        Comp::OpCall(_, _) | Comp::Handle(_, _) => {
            // Reuse the translator on the node; children recursion
            // independently covers compositionality below this node.
            let mut tr = Translator::new(c, id);
            Ok(("effect-form", tr.comp(c)?, false))
        }
        Comp::RefCreate(v) => Ok(("ref", Comp::Create(refcell(fv(v)?)), false)),
        Comp::RefSet(v, w) => Ok(("set!", Comp::Resume(fv(v)?, inj("Set", fv(w)?)), false)),
        Comp::RefGet(v) => Ok(("get", Comp::Resume(fv(v)?, inj("Get", Value::Unit)), false)),
        Comp::Create(_) | Comp::Resume(_, _) | Comp::Yield(_) => Err(foreign(id, "coroutine-form")),
    }
}

/// Mutation-testing fixture: translates `let` non-homomorphically by
/// swapping its two computations. Used as a negative control for the
/// structural checks.
pub fn broken_seq_translate(c: &Comp, id: TranslationId) -> Result<Comp, TranslateError> {
    let t = translate_phrase(c, id)?;
    Ok(swap_top_seqs(&t))
}

fn swap_top_seqs(c: &Comp) -> Comp {
    match c {
        Comp::Seq(x, m, n) => Comp::Seq(x.clone(), n.clone(), m.clone()),
        other => other.clone(),
    }
}
