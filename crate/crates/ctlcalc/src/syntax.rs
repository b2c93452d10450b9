//! Unified AST for the five calculi, with calculus membership checks,
//! capture-avoiding substitution, alpha-equivalence, and the canonical
//! printer.
//!
//! Values and computations are separate sorts. The core constructors are
//! shared by every calculus; each extension adds its own constructors and a
//! sort of runtime label. A *program* is a closed computation that contains
//! no runtime labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Name = String;

/// Which calculus a phrase is checked against.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum Calculus {
    Mam,
    Del,
    Ac,
    Eff,
    Ref,
}

impl Calculus {
    pub const ALL: [Calculus; 5] = [
        Calculus::Mam,
        Calculus::Del,
        Calculus::Ac,
        Calculus::Eff,
        Calculus::Ref,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Calculus::Mam => "mam",
            Calculus::Del => "del",
            Calculus::Ac => "ac",
            Calculus::Eff => "eff",
            Calculus::Ref => "ref",
        }
    }
}

impl fmt::Display for Calculus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Calculus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mam" => Ok(Calculus::Mam),
            "del" => Ok(Calculus::Del),
            "ac" => Ok(Calculus::Ac),
            "eff" => Ok(Calculus::Eff),
            "ref" => Ok(Calculus::Ref),
            other => Err(format!("unknown calculus `{other}` (mam|del|ac|eff|ref)")),
        }
    }
}

/// The four disjoint label spaces. Ids are allocated per evaluation.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum LabelSort {
    Del,
    Ac,
    Eff,
    Ref,
}

impl LabelSort {
    pub fn marker(self) -> char {
        match self {
            LabelSort::Del => 'd',
            LabelSort::Ac => 'c',
            LabelSort::Eff => 'e',
            LabelSort::Ref => 'r',
        }
    }
}

/// A runtime label: sort plus id. Equality is literal.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub struct Label {
    pub sort: LabelSort,
    pub id: u64,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}{}", self.sort.marker(), self.id)
    }
}

/// Projection index for computation pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Proj {
    Fst,
    Snd,
}

impl Proj {
    pub fn digit(self) -> char {
        match self {
            Proj::Fst => '1',
            Proj::Snd => '2',
        }
    }
}

#[derive(Debug, Clone, Eq)]
pub enum Value {
    Var(Name),
    Unit,
    Pair(Box<Value>, Box<Value>),
    Inj(Name, Box<Value>),
    Thunk(Box<Comp>),
    /// Continuation label (runtime only).
    DelLabel(u64),
    /// Coroutine label (runtime only).
    AcLabel(u64),
    /// Continuation label carrying its handler (runtime only). Identity is
    /// the id; the handler is recoverable from the store.
    EffLabel(u64, Box<Handler>),
    /// Reference cell (runtime only).
    RefCell(u64),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Var(a), Value::Var(b)) => a == b,
            (Value::Unit, Value::Unit) => true,
            (Value::Pair(a1, a2), Value::Pair(b1, b2)) => a1 == b1 && a2 == b2,
            (Value::Inj(t1, v1), Value::Inj(t2, v2)) => t1 == t2 && v1 == v2,
            (Value::Thunk(m), Value::Thunk(n)) => m == n,
            (Value::DelLabel(a), Value::DelLabel(b)) => a == b,
            (Value::AcLabel(a), Value::AcLabel(b)) => a == b,
            // A continuation label is identified by its id alone; the
            // handler payload is recoverable from the store.
            (Value::EffLabel(a, _), Value::EffLabel(b, _)) => a == b,
            (Value::RefCell(a), Value::RefCell(b)) => a == b,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Comp {
    PCase(Value, Name, Name, Box<Comp>),
    SCase(Value, Vec<SClause>),
    Force(Value),
    Return(Value),
    Seq(Name, Box<Comp>, Box<Comp>),
    Abs(Name, Box<Comp>),
    App(Box<Comp>, Value),
    CPair(Box<Comp>, Box<Comp>),
    Prj(Proj, Box<Comp>),
    // one-shot delimited control
    Shift0(Name, Box<Comp>),
    Dollar(Box<Comp>, Name, Box<Comp>),
    Throw(Value, Value),
    // asymmetric coroutines
    Create(Value),
    Resume(Value, Value),
    Yield(Value),
    /// Coroutine `l` currently executing (runtime only).
    Labeled(u64, Box<Comp>),
    // one-shot effect handlers
    OpCall(Name, Value),
    Handle(Box<Handler>, Box<Comp>),
    // reference cells
    RefCreate(Value),
    RefSet(Value, Value),
    RefGet(Value),
}

/// One variant-case clause: tag, payload binder, body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SClause {
    pub tag: Name,
    pub binder: Name,
    pub body: Comp,
}

/// Effect handler: a return clause plus operation clauses. Op names must be
/// pairwise distinct; clause order carries no meaning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Handler {
    pub ret_binder: Name,
    pub ret_body: Box<Comp>,
    pub ops: Vec<OpClause>,
}

impl Handler {
    pub fn clause(&self, op: &str) -> Option<&OpClause> {
        self.ops.iter().find(|c| c.op == op)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpClause {
    pub op: Name,
    pub param: Name,
    pub cont: Name,
    pub body: Comp,
}

/// Either sort of term, for operations that accept both.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Value(Value),
    Comp(Comp),
}

impl From<Value> for Term {
    fn from(v: Value) -> Self {
        Term::Value(v)
    }
}

impl From<Comp> for Term {
    fn from(c: Comp) -> Self {
        Term::Comp(c)
    }
}

// ---------------------------------------------------------------------------
// Constructors without the Box noise
// ---------------------------------------------------------------------------

pub fn var(x: impl Into<Name>) -> Value {
    Value::Var(x.into())
}

pub fn pair(a: Value, b: Value) -> Value {
    Value::Pair(Box::new(a), Box::new(b))
}

pub fn inj(tag: impl Into<Name>, v: Value) -> Value {
    Value::Inj(tag.into(), Box::new(v))
}

pub fn thunk(c: Comp) -> Value {
    Value::Thunk(Box::new(c))
}

pub fn ret(v: Value) -> Comp {
    Comp::Return(v)
}

pub fn force(v: Value) -> Comp {
    Comp::Force(v)
}

pub fn seq(x: impl Into<Name>, m: Comp, n: Comp) -> Comp {
    Comp::Seq(x.into(), Box::new(m), Box::new(n))
}

pub fn abs(x: impl Into<Name>, body: Comp) -> Comp {
    Comp::Abs(x.into(), Box::new(body))
}

pub fn app(m: Comp, v: Value) -> Comp {
    Comp::App(Box::new(m), v)
}

pub fn pcase(v: Value, x1: impl Into<Name>, x2: impl Into<Name>, body: Comp) -> Comp {
    Comp::PCase(v, x1.into(), x2.into(), Box::new(body))
}

pub fn scase(v: Value, clauses: Vec<(Name, Name, Comp)>) -> Comp {
    Comp::SCase(
        v,
        clauses
            .into_iter()
            .map(|(tag, binder, body)| SClause { tag, binder, body })
            .collect(),
    )
}

pub fn shift0(k: impl Into<Name>, body: Comp) -> Comp {
    Comp::Shift0(k.into(), Box::new(body))
}

pub fn dollar(m: Comp, x: impl Into<Name>, n: Comp) -> Comp {
    Comp::Dollar(Box::new(m), x.into(), Box::new(n))
}

// ---------------------------------------------------------------------------
// Free variables and name collection
// ---------------------------------------------------------------------------

pub fn free_vars_value(v: &Value) -> BTreeSet<Name> {
    let mut acc = BTreeSet::new();
    collect_free_value(v, &mut Vec::new(), &mut acc);
    acc
}

pub fn free_vars_comp(c: &Comp) -> BTreeSet<Name> {
    let mut acc = BTreeSet::new();
    collect_free_comp(c, &mut Vec::new(), &mut acc);
    acc
}

pub fn free_vars(t: &Term) -> BTreeSet<Name> {
    match t {
        Term::Value(v) => free_vars_value(v),
        Term::Comp(c) => free_vars_comp(c),
    }
}

fn collect_free_value(v: &Value, bound: &mut Vec<Name>, acc: &mut BTreeSet<Name>) {
    match v {
        Value::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                acc.insert(x.clone());
            }
        }
        Value::Unit | Value::DelLabel(_) | Value::AcLabel(_) | Value::RefCell(_) => {}
        Value::Pair(a, b) => {
            collect_free_value(a, bound, acc);
            collect_free_value(b, bound, acc);
        }
        Value::Inj(_, w) => collect_free_value(w, bound, acc),
        Value::Thunk(m) => collect_free_comp(m, bound, acc),
        Value::EffLabel(_, h) => collect_free_handler(h, bound, acc),
    }
}

fn collect_free_handler(h: &Handler, bound: &mut Vec<Name>, acc: &mut BTreeSet<Name>) {
    bound.push(h.ret_binder.clone());
    collect_free_comp(&h.ret_body, bound, acc);
    bound.pop();
    for cl in &h.ops {
        bound.push(cl.param.clone());
        bound.push(cl.cont.clone());
        collect_free_comp(&cl.body, bound, acc);
        bound.pop();
        bound.pop();
    }
}

fn collect_free_comp(c: &Comp, bound: &mut Vec<Name>, acc: &mut BTreeSet<Name>) {
    match c {
        Comp::PCase(v, x1, x2, m) => {
            collect_free_value(v, bound, acc);
            bound.push(x1.clone());
            bound.push(x2.clone());
            collect_free_comp(m, bound, acc);
            bound.pop();
            bound.pop();
        }
        Comp::SCase(v, clauses) => {
            collect_free_value(v, bound, acc);
            for cl in clauses {
                bound.push(cl.binder.clone());
                collect_free_comp(&cl.body, bound, acc);
                bound.pop();
            }
        }
        Comp::Force(v)
        | Comp::Return(v)
        | Comp::Create(v)
        | Comp::Yield(v)
        | Comp::RefCreate(v)
        | Comp::RefGet(v)
        | Comp::OpCall(_, v) => collect_free_value(v, bound, acc),
        Comp::Seq(x, m, n) => {
            collect_free_comp(m, bound, acc);
            bound.push(x.clone());
            collect_free_comp(n, bound, acc);
            bound.pop();
        }
        Comp::Abs(x, m) | Comp::Shift0(x, m) => {
            bound.push(x.clone());
            collect_free_comp(m, bound, acc);
            bound.pop();
        }
        Comp::App(m, v) => {
            collect_free_comp(m, bound, acc);
            collect_free_value(v, bound, acc);
        }
        Comp::CPair(m, n) => {
            collect_free_comp(m, bound, acc);
            collect_free_comp(n, bound, acc);
        }
        Comp::Prj(_, m) | Comp::Labeled(_, m) => collect_free_comp(m, bound, acc),
        Comp::Dollar(m, x, n) => {
            collect_free_comp(m, bound, acc);
            bound.push(x.clone());
            collect_free_comp(n, bound, acc);
            bound.pop();
        }
        Comp::Throw(v, w) | Comp::Resume(v, w) | Comp::RefSet(v, w) => {
            collect_free_value(v, bound, acc);
            collect_free_value(w, bound, acc);
        }
        Comp::Handle(h, m) => {
            collect_free_handler(h, bound, acc);
            collect_free_comp(m, bound, acc);
        }
    }
}

/// Every name occurring in the computation, free or bound. Used to seed
/// fresh-name pools.
pub fn all_names_comp(c: &Comp, acc: &mut BTreeSet<Name>) {
    match c {
        Comp::PCase(v, x1, x2, m) => {
            all_names_value(v, acc);
            acc.insert(x1.clone());
            acc.insert(x2.clone());
            all_names_comp(m, acc);
        }
        Comp::SCase(v, clauses) => {
            all_names_value(v, acc);
            for cl in clauses {
                acc.insert(cl.binder.clone());
                all_names_comp(&cl.body, acc);
            }
        }
        Comp::Force(v)
        | Comp::Return(v)
        | Comp::Create(v)
        | Comp::Yield(v)
        | Comp::RefCreate(v)
        | Comp::RefGet(v)
        | Comp::OpCall(_, v) => all_names_value(v, acc),
        Comp::Seq(x, m, n) | Comp::Dollar(m, x, n) => {
            acc.insert(x.clone());
            all_names_comp(m, acc);
            all_names_comp(n, acc);
        }
        Comp::Abs(x, m) | Comp::Shift0(x, m) => {
            acc.insert(x.clone());
            all_names_comp(m, acc);
        }
        Comp::App(m, v) => {
            all_names_comp(m, acc);
            all_names_value(v, acc);
        }
        Comp::CPair(m, n) => {
            all_names_comp(m, acc);
            all_names_comp(n, acc);
        }
        Comp::Prj(_, m) | Comp::Labeled(_, m) => all_names_comp(m, acc),
        Comp::Throw(v, w) | Comp::Resume(v, w) | Comp::RefSet(v, w) => {
            all_names_value(v, acc);
            all_names_value(w, acc);
        }
        Comp::Handle(h, m) => {
            all_names_handler(h, acc);
            all_names_comp(m, acc);
        }
    }
}

pub fn all_names_value(v: &Value, acc: &mut BTreeSet<Name>) {
    match v {
        Value::Var(x) => {
            acc.insert(x.clone());
        }
        Value::Unit | Value::DelLabel(_) | Value::AcLabel(_) | Value::RefCell(_) => {}
        Value::Pair(a, b) => {
            all_names_value(a, acc);
            all_names_value(b, acc);
        }
        Value::Inj(_, w) => all_names_value(w, acc),
        Value::Thunk(m) => all_names_comp(m, acc),
        Value::EffLabel(_, h) => all_names_handler(h, acc),
    }
}

fn all_names_handler(h: &Handler, acc: &mut BTreeSet<Name>) {
    acc.insert(h.ret_binder.clone());
    all_names_comp(&h.ret_body, acc);
    for cl in &h.ops {
        acc.insert(cl.param.clone());
        acc.insert(cl.cont.clone());
        all_names_comp(&cl.body, acc);
    }
}

// ---------------------------------------------------------------------------
// Fresh names
// ---------------------------------------------------------------------------

/// Smallest variant of `base` (`base`, `base_1`, `base_2`, ...) not in
/// `avoid`. Deterministic, so traces and translations are reproducible.
pub fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    if !avoid.contains(base) {
        return base.to_string();
    }
    for n in 1u64.. {
        let candidate = format!("{base}_{n}");
        if !avoid.contains(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

/// Stateful fresh-name source: remembers what it has handed out.
#[derive(Debug, Clone)]
pub struct NamePool {
    used: BTreeSet<Name>,
}

impl NamePool {
    pub fn new(avoid: BTreeSet<Name>) -> Self {
        NamePool { used: avoid }
    }

    pub fn for_comp(c: &Comp) -> Self {
        let mut avoid = BTreeSet::new();
        all_names_comp(c, &mut avoid);
        NamePool::new(avoid)
    }

    pub fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    pub fn fresh(&mut self, base: &str) -> Name {
        let name = fresh_name(base, &self.used);
        self.used.insert(name.clone());
        name
    }
}

// ---------------------------------------------------------------------------
// Substitution
// ---------------------------------------------------------------------------

pub type Subst = BTreeMap<Name, Value>;

pub fn subst1_comp(c: &Comp, x: &str, v: &Value) -> Comp {
    let mut s = Subst::new();
    s.insert(x.to_string(), v.clone());
    substitute_comp(c, &s)
}

/// Simultaneous capture-avoiding substitution on values.
pub fn substitute_value(val: &Value, s: &Subst) -> Value {
    if s.is_empty() {
        return val.clone();
    }
    match val {
        Value::Var(x) => match s.get(x) {
            Some(v) => v.clone(),
            None => val.clone(),
        },
        Value::Unit | Value::DelLabel(_) | Value::AcLabel(_) | Value::RefCell(_) => val.clone(),
        Value::Pair(a, b) => pair(substitute_value(a, s), substitute_value(b, s)),
        Value::Inj(tag, w) => inj(tag.clone(), substitute_value(w, s)),
        Value::Thunk(m) => thunk(substitute_comp(m, s)),
        Value::EffLabel(id, h) => Value::EffLabel(*id, Box::new(substitute_handler(h, s))),
    }
}

/// Simultaneous capture-avoiding substitution on computations. Bound names
/// are renamed on demand; the result is alpha-equivalent regardless of the
/// bound-name choices in the input.
pub fn substitute_comp(c: &Comp, s: &Subst) -> Comp {
    if s.is_empty() {
        return c.clone();
    }
    match c {
        Comp::PCase(v, x1, x2, m) => {
            let v = substitute_value(v, s);
            let (binders, m) = under_binders(&[x1.clone(), x2.clone()], m, s);
            Comp::PCase(v, binders[0].clone(), binders[1].clone(), Box::new(m))
        }
        Comp::SCase(v, clauses) => {
            let v = substitute_value(v, s);
            let clauses = clauses
                .iter()
                .map(|cl| {
                    let (binders, body) =
                        under_binders(std::slice::from_ref(&cl.binder), &cl.body, s);
                    SClause {
                        tag: cl.tag.clone(),
                        binder: binders[0].clone(),
                        body,
                    }
                })
                .collect();
            Comp::SCase(v, clauses)
        }
        Comp::Force(v) => Comp::Force(substitute_value(v, s)),
        Comp::Return(v) => Comp::Return(substitute_value(v, s)),
        Comp::Seq(x, m, n) => {
            let m = substitute_comp(m, s);
            let (binders, n) = under_binders(std::slice::from_ref(x), n, s);
            Comp::Seq(binders[0].clone(), Box::new(m), Box::new(n))
        }
        Comp::Abs(x, m) => {
            let (binders, m) = under_binders(std::slice::from_ref(x), m, s);
            Comp::Abs(binders[0].clone(), Box::new(m))
        }
        Comp::App(m, v) => app(substitute_comp(m, s), substitute_value(v, s)),
        Comp::CPair(m, n) => Comp::CPair(
            Box::new(substitute_comp(m, s)),
            Box::new(substitute_comp(n, s)),
        ),
        Comp::Prj(i, m) => Comp::Prj(*i, Box::new(substitute_comp(m, s))),
        Comp::Shift0(k, m) => {
            let (binders, m) = under_binders(std::slice::from_ref(k), m, s);
            Comp::Shift0(binders[0].clone(), Box::new(m))
        }
        Comp::Dollar(m, x, n) => {
            let m = substitute_comp(m, s);
            let (binders, n) = under_binders(std::slice::from_ref(x), n, s);
            Comp::Dollar(Box::new(m), binders[0].clone(), Box::new(n))
        }
        Comp::Throw(v, w) => Comp::Throw(substitute_value(v, s), substitute_value(w, s)),
        Comp::Create(v) => Comp::Create(substitute_value(v, s)),
        Comp::Resume(v, w) => Comp::Resume(substitute_value(v, s), substitute_value(w, s)),
        Comp::Yield(v) => Comp::Yield(substitute_value(v, s)),
        Comp::Labeled(l, m) => Comp::Labeled(*l, Box::new(substitute_comp(m, s))),
        Comp::OpCall(op, v) => Comp::OpCall(op.clone(), substitute_value(v, s)),
        Comp::Handle(h, m) => Comp::Handle(
            Box::new(substitute_handler(h, s)),
            Box::new(substitute_comp(m, s)),
        ),
        Comp::RefCreate(v) => Comp::RefCreate(substitute_value(v, s)),
        Comp::RefSet(v, w) => Comp::RefSet(substitute_value(v, s), substitute_value(w, s)),
        Comp::RefGet(v) => Comp::RefGet(substitute_value(v, s)),
    }
}

fn substitute_handler(h: &Handler, s: &Subst) -> Handler {
    let (binders, ret_body) = under_binders(std::slice::from_ref(&h.ret_binder), &h.ret_body, s);
    let ops = h
        .ops
        .iter()
        .map(|cl| {
            let (bs, body) = under_binders(&[cl.param.clone(), cl.cont.clone()], &cl.body, s);
            OpClause {
                op: cl.op.clone(),
                param: bs[0].clone(),
                cont: bs[1].clone(),
                body,
            }
        })
        .collect();
    Handler {
        ret_binder: binders[0].clone(),
        ret_body: Box::new(ret_body),
        ops,
    }
}

/// Substitute in a body guarded by `binders`: shadowed bindings are dropped,
/// and binders that would capture a free variable of the substituted values
/// are renamed first.
fn under_binders(binders: &[Name], body: &Comp, s: &Subst) -> (Vec<Name>, Comp) {
    // Drop shadowed bindings.
    let mut inner: Subst = s
        .iter()
        .filter(|(k, _)| !binders.contains(k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    if inner.is_empty() {
        return (binders.to_vec(), body.clone());
    }
    // Free variables of the values being substituted in.
    let mut value_fvs: BTreeSet<Name> = BTreeSet::new();
    for v in inner.values() {
        value_fvs.extend(free_vars_value(v));
    }
    let mut avoid: BTreeSet<Name> = value_fvs.clone();
    all_names_comp(body, &mut avoid);
    avoid.extend(inner.keys().cloned());
    avoid.extend(binders.iter().cloned());

    let mut new_binders = Vec::with_capacity(binders.len());
    for b in binders {
        if value_fvs.contains(b) {
            let fresh = fresh_name(b, &avoid);
            avoid.insert(fresh.clone());
            inner.insert(b.clone(), Value::Var(fresh.clone()));
            new_binders.push(fresh);
        } else {
            new_binders.push(b.clone());
        }
    }
    (new_binders, substitute_comp(body, &inner))
}

// ---------------------------------------------------------------------------
// Alpha-equivalence
// ---------------------------------------------------------------------------

/// Identical up to consistent renaming of bound names. Label ids are compared
/// literally; an `EffLabel` is identified by its id alone. Case clauses and
/// handler op-clauses are compared with order taken as irrelevant (tags are
/// required to be distinct).
pub fn alpha_equal(t1: &Term, t2: &Term) -> bool {
    match (t1, t2) {
        (Term::Value(a), Term::Value(b)) => alpha_equal_value(a, b),
        (Term::Comp(a), Term::Comp(b)) => alpha_equal_comp(a, b),
        _ => false,
    }
}

pub fn alpha_equal_value(a: &Value, b: &Value) -> bool {
    alpha_value(a, b, &mut Vec::new())
}

pub fn alpha_equal_comp(a: &Comp, b: &Comp) -> bool {
    alpha_comp(a, b, &mut Vec::new())
}

type Pairs = Vec<(Name, Name)>;

fn var_matches(x: &str, y: &str, env: &Pairs) -> bool {
    for (a, b) in env.iter().rev() {
        match (a == x, b == y) {
            (true, true) => return true,
            (true, false) | (false, true) => return false,
            _ => {}
        }
    }
    x == y
}

fn alpha_value(a: &Value, b: &Value, env: &mut Pairs) -> bool {
    match (a, b) {
        (Value::Var(x), Value::Var(y)) => var_matches(x, y, env),
        (Value::Unit, Value::Unit) => true,
        (Value::Pair(a1, a2), Value::Pair(b1, b2)) => {
            alpha_value(a1, b1, env) && alpha_value(a2, b2, env)
        }
        (Value::Inj(t1, v1), Value::Inj(t2, v2)) => t1 == t2 && alpha_value(v1, v2, env),
        (Value::Thunk(m), Value::Thunk(n)) => alpha_comp(m, n, env),
        (Value::DelLabel(l1), Value::DelLabel(l2)) => l1 == l2,
        (Value::AcLabel(l1), Value::AcLabel(l2)) => l1 == l2,
        (Value::EffLabel(l1, _), Value::EffLabel(l2, _)) => l1 == l2,
        (Value::RefCell(l1), Value::RefCell(l2)) => l1 == l2,
        _ => false,
    }
}

fn alpha_under(xs: &[&Name], ys: &[&Name], ma: &Comp, mb: &Comp, env: &mut Pairs) -> bool {
    debug_assert_eq!(xs.len(), ys.len());
    for (x, y) in xs.iter().zip(ys) {
        env.push(((*x).clone(), (*y).clone()));
    }
    let r = alpha_comp(ma, mb, env);
    for _ in xs {
        env.pop();
    }
    r
}

fn alpha_comp(a: &Comp, b: &Comp, env: &mut Pairs) -> bool {
    match (a, b) {
        (Comp::PCase(v1, x1, x2, m1), Comp::PCase(v2, y1, y2, m2)) => {
            alpha_value(v1, v2, env) && alpha_under(&[x1, x2], &[y1, y2], m1, m2, env)
        }
        (Comp::SCase(v1, cs1), Comp::SCase(v2, cs2)) => {
            if !alpha_value(v1, v2, env) || cs1.len() != cs2.len() {
                return false;
            }
            // Clause order is irrelevant; tags are distinct, so match by tag.
            cs1.iter()
                .all(|c1| match cs2.iter().find(|c| c.tag == c1.tag) {
                    Some(c2) => alpha_under(&[&c1.binder], &[&c2.binder], &c1.body, &c2.body, env),
                    None => false,
                })
        }
        (Comp::Force(v1), Comp::Force(v2)) => alpha_value(v1, v2, env),
        (Comp::Return(v1), Comp::Return(v2)) => alpha_value(v1, v2, env),
        (Comp::Seq(x, m1, n1), Comp::Seq(y, m2, n2)) => {
            alpha_comp(m1, m2, env) && alpha_under(&[x], &[y], n1, n2, env)
        }
        (Comp::Abs(x, m1), Comp::Abs(y, m2)) => alpha_under(&[x], &[y], m1, m2, env),
        (Comp::App(m1, v1), Comp::App(m2, v2)) => {
            alpha_comp(m1, m2, env) && alpha_value(v1, v2, env)
        }
        (Comp::CPair(m1, n1), Comp::CPair(m2, n2)) => {
            alpha_comp(m1, m2, env) && alpha_comp(n1, n2, env)
        }
        (Comp::Prj(i1, m1), Comp::Prj(i2, m2)) => i1 == i2 && alpha_comp(m1, m2, env),
        (Comp::Shift0(x, m1), Comp::Shift0(y, m2)) => alpha_under(&[x], &[y], m1, m2, env),
        (Comp::Dollar(m1, x, n1), Comp::Dollar(m2, y, n2)) => {
            alpha_comp(m1, m2, env) && alpha_under(&[x], &[y], n1, n2, env)
        }
        (Comp::Throw(v1, w1), Comp::Throw(v2, w2)) => {
            alpha_value(v1, v2, env) && alpha_value(w1, w2, env)
        }
        (Comp::Create(v1), Comp::Create(v2)) => alpha_value(v1, v2, env),
        (Comp::Resume(v1, w1), Comp::Resume(v2, w2)) => {
            alpha_value(v1, v2, env) && alpha_value(w1, w2, env)
        }
        (Comp::Yield(v1), Comp::Yield(v2)) => alpha_value(v1, v2, env),
        (Comp::Labeled(l1, m1), Comp::Labeled(l2, m2)) => l1 == l2 && alpha_comp(m1, m2, env),
        (Comp::OpCall(o1, v1), Comp::OpCall(o2, v2)) => o1 == o2 && alpha_value(v1, v2, env),
        (Comp::Handle(h1, m1), Comp::Handle(h2, m2)) => {
            alpha_handler(h1, h2, env) && alpha_comp(m1, m2, env)
        }
        (Comp::RefCreate(v1), Comp::RefCreate(v2)) => alpha_value(v1, v2, env),
        (Comp::RefSet(v1, w1), Comp::RefSet(v2, w2)) => {
            alpha_value(v1, v2, env) && alpha_value(w1, w2, env)
        }
        (Comp::RefGet(v1), Comp::RefGet(v2)) => alpha_value(v1, v2, env),
        _ => false,
    }
}

fn alpha_handler(h1: &Handler, h2: &Handler, env: &mut Pairs) -> bool {
    if h1.ops.len() != h2.ops.len() {
        return false;
    }
    if !alpha_under(
        &[&h1.ret_binder],
        &[&h2.ret_binder],
        &h1.ret_body,
        &h2.ret_body,
        env,
    ) {
        return false;
    }
    h1.ops
        .iter()
        .all(|c1| match h2.ops.iter().find(|c| c.op == c1.op) {
            Some(c2) => alpha_under(
                &[&c1.param, &c1.cont],
                &[&c2.param, &c2.cont],
                &c1.body,
                &c2.body,
                env,
            ),
            None => false,
        })
}

// ---------------------------------------------------------------------------
// Calculus membership
// ---------------------------------------------------------------------------

/// First offending subterm, as a path of constructor names from the root.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{constructor} not allowed at {path}: {detail}")]
pub struct CheckViolation {
    pub path: String,
    pub constructor: String,
    pub detail: String,
}

fn violation(path: &[&str], constructor: &str, detail: impl Into<String>) -> CheckViolation {
    CheckViolation {
        path: if path.is_empty() {
            "<root>".to_string()
        } else {
            path.join("/")
        },
        constructor: constructor.to_string(),
        detail: detail.into(),
    }
}

/// Checks that a computation uses only constructors of calculus `k`. In
/// program mode it additionally forbids runtime labels and labeled
/// computations and requires the term to be closed.
pub fn check_calculus(c: &Comp, k: Calculus, require_program: bool) -> Result<(), CheckViolation> {
    let mut path = Vec::new();
    check_comp(c, k, require_program, &mut path)?;
    if require_program {
        let fvs = free_vars_comp(c);
        if let Some(x) = fvs.iter().next() {
            return Err(violation(
                &[],
                "var",
                format!("program is not closed: free variable `{x}`"),
            ));
        }
    }
    Ok(())
}

pub fn check_calculus_value(
    v: &Value,
    k: Calculus,
    require_program: bool,
) -> Result<(), CheckViolation> {
    let mut path = Vec::new();
    check_value(v, k, require_program, &mut path)
}

fn check_value<'a>(
    v: &'a Value,
    k: Calculus,
    prog: bool,
    path: &mut Vec<&'a str>,
) -> Result<(), CheckViolation> {
    match v {
        Value::Var(_) | Value::Unit => Ok(()),
        Value::Pair(a, b) => {
            path.push("pair");
            check_value(a, k, prog, path)?;
            check_value(b, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Value::Inj(_, w) => {
            path.push("inj");
            check_value(w, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Value::Thunk(m) => {
            path.push("thunk");
            check_comp(m, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Value::DelLabel(_) => gate_label(k, Calculus::Del, prog, path, "del-label"),
        Value::AcLabel(_) => gate_label(k, Calculus::Ac, prog, path, "ac-label"),
        Value::EffLabel(_, h) => {
            gate_label(k, Calculus::Eff, prog, path, "eff-label")?;
            path.push("eff-label");
            check_handler(h, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Value::RefCell(_) => gate_label(k, Calculus::Ref, prog, path, "ref-cell"),
    }
}

fn gate_label(
    k: Calculus,
    owner: Calculus,
    prog: bool,
    path: &[&str],
    name: &str,
) -> Result<(), CheckViolation> {
    if k != owner {
        return Err(violation(path, name, format!("not a {k} constructor")));
    }
    if prog {
        return Err(violation(
            path,
            name,
            "runtime labels may not occur in programs",
        ));
    }
    Ok(())
}

fn gate(k: Calculus, owners: &[Calculus], path: &[&str], name: &str) -> Result<(), CheckViolation> {
    if owners.contains(&k) {
        Ok(())
    } else {
        Err(violation(path, name, format!("not a {k} constructor")))
    }
}

fn check_handler<'a>(
    h: &'a Handler,
    k: Calculus,
    prog: bool,
    path: &mut Vec<&'a str>,
) -> Result<(), CheckViolation> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for cl in &h.ops {
        if !seen.insert(&cl.op) {
            return Err(violation(
                path,
                "handler",
                format!("duplicate op clause `{}`", cl.op),
            ));
        }
    }
    path.push("ret");
    check_comp(&h.ret_body, k, prog, path)?;
    path.pop();
    for cl in &h.ops {
        path.push("on");
        check_comp(&cl.body, k, prog, path)?;
        path.pop();
    }
    Ok(())
}

fn check_comp<'a>(
    c: &'a Comp,
    k: Calculus,
    prog: bool,
    path: &mut Vec<&'a str>,
) -> Result<(), CheckViolation> {
    use Calculus::*;
    match c {
        Comp::PCase(v, _, _, m) => {
            path.push("pcase");
            check_value(v, k, prog, path)?;
            check_comp(m, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::SCase(v, clauses) => {
            let mut seen: BTreeSet<&str> = BTreeSet::new();
            for cl in clauses {
                if !seen.insert(&cl.tag) {
                    return Err(violation(
                        path,
                        "case",
                        format!("duplicate tag `{}`", cl.tag),
                    ));
                }
            }
            path.push("case");
            check_value(v, k, prog, path)?;
            for cl in clauses {
                check_comp(&cl.body, k, prog, path)?;
            }
            path.pop();
            Ok(())
        }
        Comp::Force(v) | Comp::Return(v) => {
            path.push(if matches!(c, Comp::Force(_)) {
                "force"
            } else {
                "return"
            });
            check_value(v, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Seq(_, m, n) => {
            path.push("let");
            check_comp(m, k, prog, path)?;
            check_comp(n, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Abs(_, m) => {
            path.push("lam");
            check_comp(m, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::App(m, v) => {
            path.push("app");
            check_comp(m, k, prog, path)?;
            check_value(v, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::CPair(m, n) => {
            path.push("cpair");
            check_comp(m, k, prog, path)?;
            check_comp(n, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Prj(_, m) => {
            path.push("prj");
            check_comp(m, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Shift0(_, m) => {
            gate(k, &[Del], path, "shift0")?;
            path.push("shift0");
            check_comp(m, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Dollar(m, _, n) => {
            gate(k, &[Del], path, "dollar")?;
            path.push("dollar");
            check_comp(m, k, prog, path)?;
            check_comp(n, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Throw(v, w) => {
            gate(k, &[Del, Eff], path, "throw")?;
            path.push("throw");
            check_value(v, k, prog, path)?;
            check_value(w, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Create(v) => {
            gate(k, &[Ac], path, "create")?;
            path.push("create");
            check_value(v, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Resume(v, w) => {
            gate(k, &[Ac], path, "resume")?;
            path.push("resume");
            check_value(v, k, prog, path)?;
            check_value(w, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Yield(v) => {
            gate(k, &[Ac], path, "yield")?;
            path.push("yield");
            check_value(v, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Labeled(_, m) => {
            gate(k, &[Ac], path, "labeled")?;
            if prog {
                return Err(violation(
                    path,
                    "labeled",
                    "runtime-only form; programs contain no labeled computations",
                ));
            }
            path.push("labeled");
            check_comp(m, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::OpCall(_, v) => {
            gate(k, &[Eff], path, "op")?;
            path.push("op");
            check_value(v, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::Handle(h, m) => {
            gate(k, &[Eff], path, "handle")?;
            path.push("handle");
            check_handler(h, k, prog, path)?;
            check_comp(m, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::RefCreate(v) => {
            gate(k, &[Ref], path, "ref")?;
            path.push("ref");
            check_value(v, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::RefSet(v, w) => {
            gate(k, &[Ref], path, "set!")?;
            path.push("set!");
            check_value(v, k, prog, path)?;
            check_value(w, k, prog, path)?;
            path.pop();
            Ok(())
        }
        Comp::RefGet(v) => {
            gate(k, &[Ref], path, "get")?;
            path.push("get");
            check_value(v, k, prog, path)?;
            path.pop();
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

/// Canonical surface syntax. Runtime labels print as `#d0`, `#c0`, `#e0`,
/// `#r0` and are rejected by the parser; `print_program` in the parser module
/// refuses terms containing them.
pub fn pretty_value(v: &Value) -> String {
    let mut s = String::new();
    write_value(&mut s, v);
    s
}

pub fn pretty_comp(c: &Comp) -> String {
    let mut s = String::new();
    write_comp(&mut s, c);
    s
}

pub fn pretty(t: &Term) -> String {
    match t {
        Term::Value(v) => pretty_value(v),
        Term::Comp(c) => pretty_comp(c),
    }
}

fn write_value(out: &mut String, v: &Value) {
    match v {
        Value::Var(x) => out.push_str(x),
        Value::Unit => out.push_str("()"),
        Value::Pair(a, b) => {
            out.push_str("(pair ");
            write_value(out, a);
            out.push(' ');
            write_value(out, b);
            out.push(')');
        }
        Value::Inj(tag, w) => {
            out.push_str("(inj ");
            out.push_str(tag);
            out.push(' ');
            write_value(out, w);
            out.push(')');
        }
        Value::Thunk(m) => {
            out.push_str("(thunk ");
            write_comp(out, m);
            out.push(')');
        }
        Value::DelLabel(l) => {
            out.push_str(&format!("#d{l}"));
        }
        Value::AcLabel(l) => {
            out.push_str(&format!("#c{l}"));
        }
        Value::EffLabel(l, _) => {
            out.push_str(&format!("#e{l}"));
        }
        Value::RefCell(l) => {
            out.push_str(&format!("#r{l}"));
        }
    }
}

fn write_comp(out: &mut String, c: &Comp) {
    match c {
        Comp::PCase(v, x1, x2, m) => {
            out.push_str("(pcase ");
            write_value(out, v);
            out.push_str(&format!(" ({x1} {x2}) "));
            write_comp(out, m);
            out.push(')');
        }
        Comp::SCase(v, clauses) => {
            out.push_str("(case ");
            write_value(out, v);
            for cl in clauses {
                out.push_str(&format!(" ({} {} ", cl.tag, cl.binder));
                write_comp(out, &cl.body);
                out.push(')');
            }
            out.push(')');
        }
        Comp::Force(v) => {
            out.push_str("(force ");
            write_value(out, v);
            out.push(')');
        }
        Comp::Return(v) => {
            out.push_str("(return ");
            write_value(out, v);
            out.push(')');
        }
        Comp::Seq(x, m, n) => {
            out.push_str(&format!("(let {x} "));
            write_comp(out, m);
            out.push(' ');
            write_comp(out, n);
            out.push(')');
        }
        Comp::Abs(x, m) => {
            out.push_str(&format!("(lam {x} "));
            write_comp(out, m);
            out.push(')');
        }
        Comp::App(m, v) => {
            out.push_str("(app ");
            write_comp(out, m);
            out.push(' ');
            write_value(out, v);
            out.push(')');
        }
        Comp::CPair(m, n) => {
            out.push_str("(cpair ");
            write_comp(out, m);
            out.push(' ');
            write_comp(out, n);
            out.push(')');
        }
        Comp::Prj(i, m) => {
            out.push_str(&format!("(prj {} ", i.digit()));
            write_comp(out, m);
            out.push(')');
        }
        Comp::Shift0(k, m) => {
            out.push_str(&format!("(shift0 {k} "));
            write_comp(out, m);
            out.push(')');
        }
        Comp::Dollar(m, x, n) => {
            out.push_str("(dollar ");
            write_comp(out, m);
            out.push_str(&format!(" {x} "));
            write_comp(out, n);
            out.push(')');
        }
        Comp::Throw(v, w) => {
            out.push_str("(throw ");
            write_value(out, v);
            out.push(' ');
            write_value(out, w);
            out.push(')');
        }
        Comp::Create(v) => {
            out.push_str("(create ");
            write_value(out, v);
            out.push(')');
        }
        Comp::Resume(v, w) => {
            out.push_str("(resume ");
            write_value(out, v);
            out.push(' ');
            write_value(out, w);
            out.push(')');
        }
        Comp::Yield(v) => {
            out.push_str("(yield ");
            write_value(out, v);
            out.push(')');
        }
        Comp::Labeled(l, m) => {
            out.push_str(&format!("(labeled #c{l} "));
            write_comp(out, m);
            out.push(')');
        }
        Comp::OpCall(op, v) => {
            out.push_str(&format!("(op {op} "));
            write_value(out, v);
            out.push(')');
        }
        Comp::Handle(h, m) => {
            out.push_str("(handle ");
            write_handler(out, h);
            out.push(' ');
            write_comp(out, m);
            out.push(')');
        }
        Comp::RefCreate(v) => {
            out.push_str("(ref ");
            write_value(out, v);
            out.push(')');
        }
        Comp::RefSet(v, w) => {
            out.push_str("(set! ");
            write_value(out, v);
            out.push(' ');
            write_value(out, w);
            out.push(')');
        }
        Comp::RefGet(v) => {
            out.push_str("(get ");
            write_value(out, v);
            out.push(')');
        }
    }
}

fn write_handler(out: &mut String, h: &Handler) {
    out.push_str(&format!("(handler (ret {} ", h.ret_binder));
    write_comp(out, &h.ret_body);
    out.push(')');
    for cl in &h.ops {
        out.push_str(&format!(" (on {} {} {} ", cl.op, cl.param, cl.cont));
        write_comp(out, &cl.body);
        out.push(')');
    }
    out.push(')');
}

/// Whether the computation contains any runtime label or labeled computation.
pub fn has_labels_comp(c: &Comp) -> bool {
    fn value(v: &Value) -> bool {
        match v {
            Value::Var(_) | Value::Unit => false,
            Value::Pair(a, b) => value(a) || value(b),
            Value::Inj(_, w) => value(w),
            Value::Thunk(m) => comp(m),
            Value::DelLabel(_) | Value::AcLabel(_) | Value::EffLabel(_, _) | Value::RefCell(_) => {
                true
            }
        }
    }
    fn handler(h: &Handler) -> bool {
        comp(&h.ret_body) || h.ops.iter().any(|cl| comp(&cl.body))
    }
    fn comp(c: &Comp) -> bool {
        match c {
            Comp::Labeled(_, _) => true,
            Comp::PCase(v, _, _, m) => value(v) || comp(m),
            Comp::SCase(v, cls) => value(v) || cls.iter().any(|cl| comp(&cl.body)),
            Comp::Force(v)
            | Comp::Return(v)
            | Comp::Create(v)
            | Comp::Yield(v)
            | Comp::RefCreate(v)
            | Comp::RefGet(v)
            | Comp::OpCall(_, v) => value(v),
            Comp::Seq(_, m, n) | Comp::Dollar(m, _, n) | Comp::CPair(m, n) => comp(m) || comp(n),
            Comp::Abs(_, m) | Comp::Shift0(_, m) | Comp::Prj(_, m) => comp(m),
            Comp::App(m, v) => comp(m) || value(v),
            Comp::Throw(v, w) | Comp::Resume(v, w) | Comp::RefSet(v, w) => value(v) || value(w),
            Comp::Handle(h, m) => handler(h) || comp(m),
        }
    }
    comp(c)
}

/// Peano numeral: `inj Succ (... (inj Zero ()))`.
pub fn peano(n: u64) -> Value {
    let mut v = inj("Zero", Value::Unit);
    for _ in 0..n {
        v = inj("Succ", v);
    }
    v
}

/// Reads a Peano numeral back, if the value is one.
pub fn peano_value(v: &Value) -> Option<u64> {
    let mut n = 0;
    let mut cur = v;
    loop {
        match cur {
            Value::Inj(tag, w) if tag == "Succ" => {
                n += 1;
                cur = w;
            }
            Value::Inj(tag, w) if tag == "Zero" && **w == Value::Unit => return Some(n),
            _ => return None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Value {
        var("x")
    }

    #[test]
    fn free_vars_basics() {
        assert_eq!(free_vars_comp(&ret(x())), ["x".to_string()].into());
        assert!(free_vars_comp(&abs("x", ret(x()))).is_empty());
        let t = seq("x", ret(Value::Unit), app(force(var("f")), x()));
        assert_eq!(free_vars_comp(&t), ["f".to_string()].into());
    }

    #[test]
    fn substitute_simple_and_shadowed() {
        let mut s = Subst::new();
        s.insert("x".into(), Value::Unit);
        assert_eq!(substitute_comp(&ret(x()), &s), ret(Value::Unit));
        let shadowed = abs("x", ret(x()));
        assert_eq!(substitute_comp(&shadowed, &s), shadowed);
    }

    #[test]
    fn substitute_capture_avoidance() {
        // (lam y (return (pair x y)))[y/x]  ->  lam y' (return (pair y y'))
        let t = abs("y", ret(pair(x(), var("y"))));
        let mut s = Subst::new();
        s.insert("x".into(), var("y"));
        let r = substitute_comp(&t, &s);
        let expected = abs("z", ret(pair(var("y"), var("z"))));
        assert!(alpha_equal_comp(&r, &expected), "got {}", pretty_comp(&r));
    }

    #[test]
    fn substitute_is_simultaneous() {
        // [y/x, ()/y] applied at once differs from sequential application.
        let t = ret(pair(x(), var("y")));
        let mut s = Subst::new();
        s.insert("x".into(), var("y"));
        s.insert("y".into(), Value::Unit);
        let simultaneous = substitute_comp(&t, &s);
        assert_eq!(simultaneous, ret(pair(var("y"), Value::Unit)));
        let sequential = subst1_comp(&subst1_comp(&t, "x", &var("y")), "y", &Value::Unit);
        assert_eq!(sequential, ret(pair(Value::Unit, Value::Unit)));
        assert_ne!(simultaneous, sequential);
    }

    #[test]
    fn alpha_equal_basics() {
        assert!(alpha_equal_comp(
            &abs("x", ret(x())),
            &abs("y", ret(var("y")))
        ));
        assert!(!alpha_equal_comp(
            &abs("x", ret(x())),
            &abs("x", ret(Value::Unit))
        ));
        assert!(!alpha_equal_value(&Value::DelLabel(1), &Value::DelLabel(2)));
        // Free variables must match by name.
        assert!(!alpha_equal_comp(&ret(x()), &ret(var("y"))));
    }

    #[test]
    fn alpha_equal_ignores_clause_order() {
        let a = scase(
            x(),
            vec![
                ("A".into(), "u".into(), ret(Value::Unit)),
                ("B".into(), "v".into(), ret(var("v"))),
            ],
        );
        let b = scase(
            x(),
            vec![
                ("B".into(), "w".into(), ret(var("w"))),
                ("A".into(), "u".into(), ret(Value::Unit)),
            ],
        );
        assert!(alpha_equal_comp(&a, &b));
    }

    #[test]
    fn check_calculus_gating() {
        let s = shift0("k", ret(Value::Unit));
        assert!(check_calculus(&s, Calculus::Ac, false).is_err());
        assert!(check_calculus(&s, Calculus::Del, false).is_ok());
        let c = Comp::Create(thunk(ret(Value::Unit)));
        assert!(check_calculus(&c, Calculus::Ac, true).is_ok());
        let l = Comp::Labeled(0, Box::new(ret(Value::Unit)));
        assert!(check_calculus(&l, Calculus::Ac, false).is_ok());
        assert!(check_calculus(&l, Calculus::Ac, true).is_err());
    }

    #[test]
    fn check_calculus_mam_subset_of_all() {
        let t = seq(
            "x",
            ret(Value::Unit),
            pcase(pair(var("x"), Value::Unit), "a", "b", ret(var("a"))),
        );
        assert!(check_calculus(&t, Calculus::Mam, true).is_ok());
        for k in Calculus::ALL {
            assert!(check_calculus(&t, k, true).is_ok());
        }
    }

    #[test]
    fn check_calculus_rejects_open_programs() {
        let t = Comp::Resume(var("q"), Value::Unit);
        let err = check_calculus(&t, Calculus::Ac, true).unwrap_err();
        assert!(err.detail.contains("free variable"));
    }

    #[test]
    fn pretty_examples() {
        assert_eq!(pretty_comp(&ret(Value::Unit)), "(return ())");
        assert_eq!(
            pretty_value(&thunk(abs("x", ret(x())))),
            "(thunk (lam x (return x)))"
        );
        assert_eq!(
            pretty_comp(&dollar(ret(Value::Unit), "x", ret(x()))),
            "(dollar (return ()) x (return x))"
        );
        assert_eq!(pretty_value(&Value::AcLabel(3)), "#c3");
    }

    #[test]
    fn peano_round_trip() {
        assert_eq!(peano_value(&peano(0)), Some(0));
        assert_eq!(peano_value(&peano(7)), Some(7));
        assert_eq!(peano_value(&Value::Unit), None);
    }
}
