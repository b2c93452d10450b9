//! Differential testing: seeded random program generation per calculus,
//! execution of source programs against their translations, first-order
//! observational comparison, and the counterexample corpus.

use crate::machine::{self, evaluate, evaluate_opt, EvalOptions, Outcome, OutcomeKind, StoreEntry};
use crate::parser::{parse_program, print_program};
use crate::syntax::{
    self, abs, app, force, inj, pair, peano_value, ret, seq, thunk, Calculus, Comp, Handler, Name,
    OpClause, SClause, Value,
};
use crate::translate::{translate, TranslationId};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

/// Per-constructor weights. Weights for constructors outside the target
/// calculus are ignored; constructs whose scope requirements are unmet (a
/// throw with no continuation variable in scope) contribute nothing.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Weights {
    pub ret: u32,
    pub seq: u32,
    pub beta: u32,
    pub force: u32,
    pub pcase: u32,
    pub scase: u32,
    pub prj: u32,
    pub shift0: u32,
    pub dollar: u32,
    pub throw: u32,
    pub handle: u32,
    pub opcall: u32,
    pub create: u32,
    pub resume: u32,
    pub yield_: u32,
    pub ref_create: u32,
    pub ref_set: u32,
    pub ref_get: u32,
}

impl Default for Weights {
    fn default() -> Self {
        // Control constructs carry roughly 40% of the weight at an internal
        // node so stores get exercised.
        Weights {
            ret: 8,
            seq: 14,
            beta: 7,
            force: 4,
            pcase: 4,
            scase: 4,
            prj: 3,
            shift0: 10,
            dollar: 14,
            throw: 16,
            handle: 14,
            opcall: 16,
            create: 12,
            resume: 14,
            yield_: 14,
            ref_create: 12,
            ref_set: 14,
            ref_get: 14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenConfig {
    pub calculus: Calculus,
    pub seed: u64,
    /// AST node budget per program.
    pub max_size: usize,
    pub binder_depth_cap: usize,
    pub op_name_pool: Vec<String>,
    pub weights: Weights,
    /// When set, the corpus programs of this calculus occupy the first
    /// indices of a suite.
    pub mix_corpus: bool,
}

impl GenConfig {
    pub fn new(calculus: Calculus, seed: u64) -> Self {
        GenConfig {
            calculus,
            seed,
            max_size: 30,
            binder_depth_cap: 8,
            op_name_pool: vec!["ask".into(), "tick".into()],
            weights: Weights::default(),
            mix_corpus: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Plain,
    Cont,
    Coro,
    Cell,
}

struct Gen {
    rng: ChaCha8Rng,
    calculus: Calculus,
    weights: Weights,
    op_pool: Vec<String>,
    depth_cap: usize,
    name_counter: u64,
    vars: Vec<(Name, VarKind)>,
    handled: Vec<Vec<String>>,
    in_dollar: bool,
    in_coroutine: bool,
    depth: usize,
    mam_only: bool,
}

const TAGS: [&str; 3] = ["A", "B", "C"];

impl Gen {
    fn fresh(&mut self) -> Name {
        let n = self.name_counter;
        self.name_counter += 1;
        format!("x{n}")
    }

    fn vars_of(&self, kind: VarKind) -> Vec<Name> {
        self.vars
            .iter()
            .filter(|(_, k)| *k == kind)
            .map(|(n, _)| n.clone())
            .collect()
    }

    fn handled_ops(&self) -> Vec<String> {
        self.handled.last().cloned().unwrap_or_default()
    }

    fn value(&mut self, budget: usize) -> Value {
        // Continuation binders are used only as throw targets. A captured
        // continuation flowing into a discriminating position (a pcase
        // scrutinee, a force) distinguishes label representations across the
        // encodings, so plain value positions draw from the other kinds.
        let vars: Vec<Name> = self
            .vars
            .iter()
            .filter(|(_, k)| *k != VarKind::Cont)
            .map(|(n, _)| n.clone())
            .collect();
        let mut options: Vec<(u32, u8)> = vec![(3, 0)]; // unit
        if !vars.is_empty() {
            options.push((6, 1));
        }
        if budget >= 3 {
            options.push((3, 2)); // pair
        }
        if budget >= 2 {
            options.push((4, 3)); // inj
        }
        if budget >= 2 && self.depth < self.depth_cap {
            options.push((3, 4)); // thunk
        }
        match pick(&mut self.rng, &options) {
            1 => Value::Var(vars[self.rng.gen_range(0..vars.len())].clone()),
            2 => {
                let half = (budget - 1) / 2;
                pair(self.value(half.max(1)), self.value(half.max(1)))
            }
            3 => inj(
                TAGS[self.rng.gen_range(0..TAGS.len())],
                self.value(budget - 1),
            ),
            4 => {
                self.depth += 1;
                let m = self.comp(budget - 1);
                self.depth -= 1;
                thunk(m)
            }
            _ => Value::Unit,
        }
    }

    fn comp(&mut self, budget: usize) -> Comp {
        if budget <= 1 || self.depth >= self.depth_cap + 4 {
            return ret(self.value(budget.max(1)));
        }
        let w = self.weights.clone();
        let mam = self.mam_only;
        let k = self.calculus;
        let mut options: Vec<(u32, u8)> = vec![(w.ret, 0)];
        if budget >= 3 {
            options.push((w.seq, 1));
            options.push((w.beta, 2));
        }
        options.push((w.force, 3));
        if budget >= 3 {
            options.push((w.pcase, 4));
            options.push((w.scase, 5));
            options.push((w.prj, 6));
        }
        if !mam {
            match k {
                Calculus::Del => {
                    if budget >= 2 {
                        let sw = if self.in_dollar {
                            w.shift0
                        } else {
                            w.shift0 / 8
                        };
                        options.push((sw.max(1), 7));
                    }
                    if budget >= 4 {
                        options.push((w.dollar, 8));
                    }
                    if !self.vars_of(VarKind::Cont).is_empty() {
                        options.push((w.throw, 9));
                    }
                }
                Calculus::Eff => {
                    if budget >= 5 && self.depth < self.depth_cap {
                        options.push((w.handle, 10));
                    }
                    if !self.handled_ops().is_empty() {
                        options.push((w.opcall, 11));
                    }
                    if !self.vars_of(VarKind::Cont).is_empty() {
                        options.push((w.throw, 9));
                    }
                }
                Calculus::Ac => {
                    if budget >= 3 && self.depth < self.depth_cap {
                        options.push((w.create, 12));
                    }
                    if !self.vars_of(VarKind::Coro).is_empty() {
                        options.push((w.resume, 13));
                    }
                    if self.in_coroutine {
                        options.push((w.yield_, 14));
                    }
                }
                Calculus::Ref => {
                    if budget >= 2 {
                        options.push((w.ref_create, 15));
                    }
                    if !self.vars_of(VarKind::Cell).is_empty() {
                        options.push((w.ref_set, 16));
                        options.push((w.ref_get, 17));
                    }
                }
                Calculus::Mam => {}
            }
        }
        match pick(&mut self.rng, &options) {
            1 => {
                let half = (budget - 1) / 2;
                let m = self.comp(half.max(1));
                let kind = match &m {
                    Comp::Create(_) => VarKind::Coro,
                    Comp::RefCreate(_) => VarKind::Cell,
                    _ => VarKind::Plain,
                };
                let x = self.fresh();
                self.vars.push((x.clone(), kind));
                let n = self.comp(half.max(1));
                self.vars.pop();
                seq(x, m, n)
            }
            2 => {
                let half = (budget - 2) / 2;
                let x = self.fresh();
                self.vars.push((x.clone(), VarKind::Plain));
                self.depth += 1;
                let body = self.comp(half.max(1));
                self.depth -= 1;
                self.vars.pop();
                let v = self.value(half.max(1));
                app(abs(x, body), v)
            }
            3 => {
                if self.rng.gen_ratio(4, 5) && budget >= 2 && self.depth < self.depth_cap {
                    self.depth += 1;
                    let m = self.comp(budget - 1);
                    self.depth -= 1;
                    force(thunk(m))
                } else {
                    force(self.value(budget - 1))
                }
            }
            4 => {
                let half = (budget - 1) / 2;
                let scrutinee = if self.rng.gen_ratio(17, 20) {
                    let quarter = (half / 2).max(1);
                    pair(self.value(quarter), self.value(quarter))
                } else {
                    self.value(half.max(1))
                };
                let x1 = self.fresh();
                let x2 = self.fresh();
                self.vars.push((x1.clone(), VarKind::Plain));
                self.vars.push((x2.clone(), VarKind::Plain));
                let body = self.comp(half.max(1));
                self.vars.pop();
                self.vars.pop();
                Comp::PCase(scrutinee, x1, x2, Box::new(body))
            }
            5 => {
                let n_clauses = self.rng.gen_range(1..=2usize);
                let mut tags: Vec<&str> = TAGS.to_vec();
                let mut clauses = Vec::new();
                let per = ((budget - 2) / (n_clauses + 1)).max(1);
                for _ in 0..n_clauses {
                    let tag = tags.remove(self.rng.gen_range(0..tags.len()));
                    let binder = self.fresh();
                    self.vars.push((binder.clone(), VarKind::Plain));
                    let body = self.comp(per);
                    self.vars.pop();
                    clauses.push(SClause {
                        tag: tag.into(),
                        binder,
                        body,
                    });
                }
                let scrutinee = if self.rng.gen_ratio(17, 20) {
                    let t = &clauses[self.rng.gen_range(0..clauses.len())].tag;
                    inj(t.clone(), self.value(per))
                } else {
                    self.value(per)
                };
                Comp::SCase(scrutinee, clauses)
            }
            6 => {
                let half = (budget - 2) / 2;
                let i = if self.rng.gen_bool(0.5) {
                    syntax::Proj::Fst
                } else {
                    syntax::Proj::Snd
                };
                let m1 = self.comp(half.max(1));
                let m2 = self.comp(half.max(1));
                Comp::Prj(i, Box::new(Comp::CPair(Box::new(m1), Box::new(m2))))
            }
            7 => {
                let kv = self.fresh();
                self.vars.push((kv.clone(), VarKind::Cont));
                self.depth += 1;
                let body = self.comp(budget - 1);
                self.depth -= 1;
                self.vars.pop();
                Comp::Shift0(kv, Box::new(body))
            }
            8 => {
                let half = (budget - 2) / 2;
                let was = self.in_dollar;
                self.in_dollar = true;
                let m = self.comp(half.max(1));
                self.in_dollar = was;
                let x = self.fresh();
                self.vars.push((x.clone(), VarKind::Plain));
                let n = self.comp(half.max(1));
                self.vars.pop();
                Comp::Dollar(Box::new(m), x, Box::new(n))
            }
            9 => {
                let conts = self.vars_of(VarKind::Cont);
                let target = conts[self.rng.gen_range(0..conts.len())].clone();
                Comp::Throw(Value::Var(target), self.value(budget - 1))
            }
            10 => {
                let mut pool = self.op_pool.clone();
                let n_ops = self.rng.gen_range(1..=2usize.min(pool.len()));
                let per = ((budget - 3) / (n_ops + 2)).max(1);
                let mut ops = Vec::new();
                let mut op_names = Vec::new();
                for _ in 0..n_ops {
                    let op = pool.remove(self.rng.gen_range(0..pool.len()));
                    op_names.push(op.clone());
                    let param = self.fresh();
                    let cont = self.fresh();
                    self.vars.push((param.clone(), VarKind::Plain));
                    self.vars.push((cont.clone(), VarKind::Cont));
                    self.depth += 1;
                    let body = self.comp(per);
                    self.depth -= 1;
                    self.vars.pop();
                    self.vars.pop();
                    ops.push(OpClause {
                        op,
                        param,
                        cont,
                        body,
                    });
                }
                let ret_binder = self.fresh();
                self.vars.push((ret_binder.clone(), VarKind::Plain));
                let ret_body = self.comp(per);
                self.vars.pop();
                // Only ops with a clause on the innermost handler are raised
                // inside the body, matching the totality assumption.
                self.handled.push(op_names);
                let body = self.comp(per);
                self.handled.pop();
                Comp::Handle(
                    Box::new(Handler {
                        ret_binder,
                        ret_body: Box::new(ret_body),
                        ops,
                    }),
                    Box::new(body),
                )
            }
            11 => {
                let ops = self.handled_ops();
                let op = ops[self.rng.gen_range(0..ops.len())].clone();
                Comp::OpCall(op, self.value(budget - 1))
            }
            12 => {
                let param = self.fresh();
                self.vars.push((param.clone(), VarKind::Plain));
                let was = self.in_coroutine;
                self.in_coroutine = true;
                self.depth += 1;
                let body = self.comp(budget - 2);
                self.depth -= 1;
                self.in_coroutine = was;
                self.vars.pop();
                Comp::Create(thunk(abs(param, body)))
            }
            13 => {
                let coros = self.vars_of(VarKind::Coro);
                let target = coros[self.rng.gen_range(0..coros.len())].clone();
                Comp::Resume(Value::Var(target), self.value(budget - 1))
            }
            14 => Comp::Yield(self.value(budget - 1)),
            15 => Comp::RefCreate(self.value(budget - 1)),
            16 => {
                let cells = self.vars_of(VarKind::Cell);
                let target = cells[self.rng.gen_range(0..cells.len())].clone();
                Comp::RefSet(Value::Var(target), self.value(budget - 1))
            }
            17 => {
                let cells = self.vars_of(VarKind::Cell);
                let target = cells[self.rng.gen_range(0..cells.len())].clone();
                Comp::RefGet(Value::Var(target))
            }
            _ => ret(self.value(budget - 1)),
        }
    }
}

fn pick(rng: &mut ChaCha8Rng, options: &[(u32, u8)]) -> u8 {
    let total: u32 = options.iter().map(|(w, _)| *w).sum();
    if total == 0 {
        return options[0].1;
    }
    let mut roll = rng.gen_range(0..total);
    for (w, tag) in options {
        if roll < *w {
            return *tag;
        }
        roll -= w;
    }
    options.last().unwrap().1
}

/// Generates the `index`-th program of the stream determined by `cfg`.
/// The result is closed, label-free, and valid for the configured calculus.
pub fn generate(cfg: &GenConfig, index: u64) -> Comp {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index.wrapping_add(1));
    let mam_only = rng.gen_ratio(1, 10);
    let mut gen = Gen {
        rng,
        calculus: cfg.calculus,
        weights: cfg.weights.clone(),
        op_pool: cfg.op_name_pool.clone(),
        depth_cap: cfg.binder_depth_cap,
        name_counter: 0,
        vars: Vec::new(),
        handled: Vec::new(),
        in_dollar: false,
        in_coroutine: false,
        depth: 0,
        mam_only,
    };
    let program = gen.comp(cfg.max_size.max(1));
    debug_assert!(
        syntax::check_calculus(&program, cfg.calculus, true).is_ok(),
        "generator produced an invalid program: {}",
        syntax::pretty_comp(&program)
    );
    program
}

// ---------------------------------------------------------------------------
// Observations
// ---------------------------------------------------------------------------

/// First-order shape of a value; thunks and every label sort are opaque.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Observation {
    Unit,
    Pair(Box<Observation>, Box<Observation>),
    Inj(String, Box<Observation>),
    Opaque,
}

pub fn observe(v: &Value) -> Observation {
    match v {
        Value::Unit => Observation::Unit,
        Value::Pair(a, b) => Observation::Pair(Box::new(observe(a)), Box::new(observe(b))),
        Value::Inj(tag, w) => Observation::Inj(tag.clone(), Box::new(observe(w))),
        Value::Var(_)
        | Value::Thunk(_)
        | Value::DelLabel(_)
        | Value::AcLabel(_)
        | Value::EffLabel(_, _)
        | Value::RefCell(_) => Observation::Opaque,
    }
}

/// Structural equality, except that an opaque position on the source side
/// matches anything: translations may encode an opaque source value (a
/// captured continuation, say) as a structured target value.
pub fn observation_matches(source: &Observation, target: &Observation) -> bool {
    match (source, target) {
        (Observation::Opaque, _) => true,
        (Observation::Unit, Observation::Unit) => true,
        (Observation::Pair(a1, b1), Observation::Pair(a2, b2)) => {
            observation_matches(a1, a2) && observation_matches(b1, b2)
        }
        (Observation::Inj(t1, w1), Observation::Inj(t2, w2)) => {
            t1 == t2 && observation_matches(w1, w2)
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Differential runs
// ---------------------------------------------------------------------------

/// Target fuel as a function of observed source steps. The counter
/// translation performs Peano comparisons whose cumulative cost is quadratic
/// in the number of throws, so the policy must dominate a quadratic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FuelPolicy {
    pub base: u64,
    pub linear: u64,
    pub quadratic: u64,
}

impl Default for FuelPolicy {
    fn default() -> Self {
        FuelPolicy {
            base: 1000,
            linear: 64,
            quadratic: 16,
        }
    }
}

impl FuelPolicy {
    pub fn target_fuel(&self, source_steps: u64) -> u64 {
        self.base
            .saturating_add(self.linear.saturating_mul(source_steps))
            .saturating_add(
                self.quadratic
                    .saturating_mul(source_steps.saturating_mul(source_steps)),
            )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FuelSide {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct OutcomeSummary {
    pub kind: String,
    pub steps: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

fn summarize(outcome: &Outcome) -> OutcomeSummary {
    OutcomeSummary {
        kind: outcome.kind.tag().to_string(),
        steps: outcome.steps,
        observation: outcome.kind.value().map(observe),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Verdict {
    Agree {
        kind: String,
    },
    Disagree {
        source: OutcomeSummary,
        target: OutcomeSummary,
        program: String,
    },
    Inconclusive {
        side: FuelSide,
    },
}

impl Verdict {
    pub fn key(&self) -> String {
        match self {
            Verdict::Agree { kind } => format!("agree-{kind}"),
            Verdict::Disagree { .. } => "disagree".to_string(),
            Verdict::Inconclusive { side } => match side {
                FuelSide::Source => "inconclusive-source".to_string(),
                FuelSide::Target => "inconclusive-target".to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffOutcome {
    pub verdict: Verdict,
    pub source_steps: u64,
    pub target_steps: Option<u64>,
    /// Well-formedness violations observed on coroutine-side configurations
    /// (always empty unless checking was requested).
    pub wf_violations: Vec<String>,
}

/// Evaluates `p`, translates it, evaluates the image with fuel given by the
/// policy, and compares outcome kinds (observations too for values).
pub fn diff_run(
    p: &Comp,
    id: TranslationId,
    source_fuel: u64,
    policy: FuelPolicy,
    check_ac_wf: bool,
) -> DiffOutcome {
    let source = evaluate(p, id.source(), source_fuel, false)
        .expect("diff_run requires a valid source program");
    if matches!(source.kind, OutcomeKind::FuelExhausted { .. }) {
        return DiffOutcome {
            verdict: Verdict::Inconclusive {
                side: FuelSide::Source,
            },
            source_steps: source.steps,
            target_steps: None,
            wf_violations: Vec::new(),
        };
    }
    let translated = translate(p, id).expect("validated source program must translate");
    let target_fuel = policy.target_fuel(source.steps);
    let mut wf_violations = Vec::new();
    let opts = EvalOptions {
        fuel: target_fuel,
        trace: false,
        ..EvalOptions::default()
    };
    let target = if check_ac_wf && id.target() == Calculus::Ac {
        evaluate_opt(&translated, id.target(), &opts, &mut |step, config| {
            if let Err(v) = machine::ac_well_formed(config) {
                if wf_violations.len() < 8 {
                    wf_violations.push(format!("step {step}: {v}"));
                }
            }
        })
    } else {
        evaluate_opt(&translated, id.target(), &opts, &mut |_, _| {})
    }
    .expect("translated program must be a valid target program");

    let verdict = match (&source.kind, &target.kind) {
        (_, OutcomeKind::FuelExhausted { .. }) => Verdict::Inconclusive {
            side: FuelSide::Target,
        },
        (OutcomeKind::Value { value: sv, .. }, OutcomeKind::Value { value: tv, .. }) => {
            if observation_matches(&observe(sv), &observe(tv)) {
                Verdict::Agree {
                    kind: "value".into(),
                }
            } else {
                disagree(p, &source, &target)
            }
        }
        (OutcomeKind::Bottom, OutcomeKind::Bottom) => Verdict::Agree {
            kind: "bottom".into(),
        },
        (OutcomeKind::Stuck { .. }, OutcomeKind::Stuck { .. }) => Verdict::Agree {
            kind: "stuck".into(),
        },
        _ => disagree(p, &source, &target),
    };
    DiffOutcome {
        verdict,
        source_steps: source.steps,
        target_steps: Some(target.steps),
        wf_violations,
    }
}

fn disagree(p: &Comp, source: &Outcome, target: &Outcome) -> Verdict {
    Verdict::Disagree {
        source: summarize(source),
        target: summarize(target),
        program: print_program(p).unwrap_or_else(|_| syntax::pretty_comp(p)),
    }
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ItemRecord {
    pub index: u64,
    pub seed: u64,
    pub verdict: Verdict,
    pub source_steps: u64,
    pub target_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SuiteReport {
    pub translation: String,
    pub seed: u64,
    pub count: u64,
    pub max_size: usize,
    pub source_fuel: u64,
    pub totals: BTreeMap<String, u64>,
    pub wf_violation_count: u64,
    pub items: Vec<ItemRecord>,
}

impl SuiteReport {
    pub fn disagreements(&self) -> impl Iterator<Item = &ItemRecord> {
        self.items
            .iter()
            .filter(|r| matches!(r.verdict, Verdict::Disagree { .. }))
    }

    pub fn total(&self, key: &str) -> u64 {
        self.totals.get(key).copied().unwrap_or(0)
    }

    pub fn inconclusive(&self) -> u64 {
        self.total("inconclusive-source") + self.total("inconclusive-target")
    }

    /// Line-delimited records followed by a summary document.
    pub fn render_lines(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("serializable record"));
            out.push('\n');
        }
        let summary = serde_json::json!({
            "translation": self.translation,
            "seed": self.seed,
            "count": self.count,
            "totals": self.totals,
            "wf_violation_count": self.wf_violation_count,
        });
        out.push_str(&summary.to_string());
        out.push('\n');
        out
    }
}

/// The program executed at each suite index: corpus programs first when
/// mixing is enabled, generated programs after.
pub fn suite_program(cfg: &GenConfig, index: u64) -> Comp {
    if cfg.mix_corpus {
        let mut from_corpus = corpus().into_iter().filter(|e| e.calculus == cfg.calculus);
        if let Some(entry) = from_corpus.nth(index as usize) {
            return entry.program;
        }
    }
    generate(cfg, index)
}

/// Runs `count` differential items. Items run in parallel; the report is
/// ordered and deterministic for a given configuration.
pub fn run_suite(
    cfg: &GenConfig,
    id: TranslationId,
    count: u64,
    source_fuel: u64,
    policy: FuelPolicy,
    check_ac_wf: bool,
) -> SuiteReport {
    let outcomes: Vec<(u64, DiffOutcome)> = (0..count)
        .into_par_iter()
        .map(|index| {
            let program = suite_program(cfg, index);
            (
                index,
                diff_run(&program, id, source_fuel, policy, check_ac_wf),
            )
        })
        .collect();
    let wf_violation_count: u64 = outcomes
        .iter()
        .map(|(_, o)| o.wf_violations.len() as u64)
        .sum();
    let items: Vec<ItemRecord> = outcomes
        .into_iter()
        .map(|(index, outcome)| ItemRecord {
            index,
            seed: cfg.seed,
            verdict: outcome.verdict,
            source_steps: outcome.source_steps,
            target_steps: outcome.target_steps,
        })
        .collect();
    let mut totals: BTreeMap<String, u64> = BTreeMap::new();
    for item in &items {
        *totals.entry(item.verdict.key()).or_insert(0) += 1;
    }
    SuiteReport {
        translation: id.name().to_string(),
        seed: cfg.seed,
        count,
        max_size: cfg.max_size,
        source_fuel,
        totals,
        wf_violation_count,
        items,
    }
}

// ---------------------------------------------------------------------------
// Counter-cell inspection
// ---------------------------------------------------------------------------

/// Reads the stored state of a suspended cell coroutine:
/// `{λy. let q = return y in ((force f) s) q}` yields `s`.
pub fn refcell_state(entry: &StoreEntry) -> Option<Value> {
    let StoreEntry::AcVal(Value::Thunk(body)) = entry else {
        return None;
    };
    let Comp::Abs(y, inner) = &**body else {
        return None;
    };
    let Comp::Seq(q, first, rest) = &**inner else {
        return None;
    };
    let Comp::Return(Value::Var(ret_var)) = &**first else {
        return None;
    };
    if ret_var != y {
        return None;
    }
    let Comp::App(inner_app, Value::Var(arg)) = &**rest else {
        return None;
    };
    if arg != q {
        return None;
    }
    let Comp::App(_, state) = &**inner_app else {
        return None;
    };
    Some(state.clone())
}

/// Runs a coroutine-calculus program and checks that every store label whose
/// entries take the cell-coroutine shape with Peano state has non-decreasing
/// state along the trace.
pub fn counter_cells_monotone(p: &Comp, fuel: u64) -> Result<(), String> {
    let mut last: BTreeMap<u64, u64> = BTreeMap::new();
    let mut error: Option<String> = None;
    let opts = EvalOptions {
        fuel,
        trace: false,
        ..EvalOptions::default()
    };
    evaluate_opt(p, Calculus::Ac, &opts, &mut |step, config| {
        if error.is_some() {
            return;
        }
        if let machine::Configuration::Running { store, .. } = config {
            for (label, entry) in store.iter() {
                if label.sort != syntax::LabelSort::Ac {
                    continue;
                }
                let Some(state) = refcell_state(entry) else {
                    continue;
                };
                let Some(n) = peano_value(&state) else {
                    continue;
                };
                if let Some(prev) = last.get(&label.id) {
                    if n < *prev {
                        error = Some(format!(
                            "step {step}: counter {label} decreased from {prev} to {n}"
                        ));
                        return;
                    }
                }
                last.insert(label.id, n);
            }
        }
    })
    .map_err(|e| e.to_string())?;
    match error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ExpectedOutcome {
    Value,
    Bottom,
    Stuck,
    Diverges,
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub calculus: Calculus,
    pub program: Comp,
    pub expected: ExpectedOutcome,
    /// Expected first-order observation for value outcomes.
    pub expected_observation: Option<Observation>,
}

const OMEGA: &str = "(app (lam x (app (force x) x)) (thunk (lam x (app (force x) x))))";

fn m_ref_text() -> String {
    "(let r (ref (inj A ())) \
       (let i (get r) \
         (let _ (set! r (inj B ())) \
           (let k (get r) \
             (return (pair i k))))))"
        .to_string()
}

/// The named witness programs with their expected outcomes.
pub fn corpus() -> Vec<CorpusEntry> {
    let ab_pair = Observation::Pair(
        Box::new(Observation::Inj("A".into(), Box::new(Observation::Unit))),
        Box::new(Observation::Inj("B".into(), Box::new(Observation::Unit))),
    );
    let m_del = "(dollar \
                   (let j (shift0 k1 (let r1 (throw k1 (nat 10)) \
                                       (let r2 (throw k1 (nat 20)) (return r1)))) \
                     (shift0 k2 (return (nat 30)))) \
                   i (return i))";
    let l_ref = format!(
        "(let r {} \
           (pcase r (a b) \
             (case a \
               (A u1 (case b (B u2 (return ())) (A u3 {OMEGA}))) \
               (B u4 {OMEGA}))))",
        m_ref_text()
    );
    let double_throw_del = "(dollar \
                              (shift0 k (let a (throw k (nat 1)) \
                                          (let b (throw k (nat 2)) (return (pair a b))))) \
                              x (return x))";
    let double_throw_eff = "(handle \
                              (handler (ret x (return x)) \
                                (on E p k (let a (throw k (nat 1)) \
                                            (let b (throw k (nat 2)) (return (pair a b)))))) \
                              (op E ()))";
    vec![
        CorpusEntry {
            name: "M_del",
            calculus: Calculus::Del,
            program: parse_program(m_del, Calculus::Del).expect("corpus M_del"),
            expected: ExpectedOutcome::Bottom,
            expected_observation: None,
        },
        CorpusEntry {
            name: "M_ref",
            calculus: Calculus::Ref,
            program: parse_program(&m_ref_text(), Calculus::Ref).expect("corpus M_ref"),
            expected: ExpectedOutcome::Value,
            expected_observation: Some(ab_pair),
        },
        CorpusEntry {
            name: "L_ref",
            calculus: Calculus::Ref,
            program: parse_program(&l_ref, Calculus::Ref).expect("corpus L_ref"),
            expected: ExpectedOutcome::Value,
            expected_observation: Some(Observation::Unit),
        },
        CorpusEntry {
            name: "double_throw_del",
            calculus: Calculus::Del,
            program: parse_program(double_throw_del, Calculus::Del)
                .expect("corpus double_throw_del"),
            expected: ExpectedOutcome::Bottom,
            expected_observation: None,
        },
        CorpusEntry {
            name: "double_throw_eff",
            calculus: Calculus::Eff,
            program: parse_program(double_throw_eff, Calculus::Eff)
                .expect("corpus double_throw_eff"),
            expected: ExpectedOutcome::Bottom,
            expected_observation: None,
        },
        CorpusEntry {
            name: "omega",
            calculus: Calculus::Mam,
            program: parse_program(OMEGA, Calculus::Mam).expect("corpus omega"),
            expected: ExpectedOutcome::Diverges,
            expected_observation: None,
        },
    ]
}

pub fn corpus_entry(name: &str) -> Option<CorpusEntry> {
    corpus().into_iter().find(|e| e.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::alpha_equal_comp;

    #[test]
    fn generation_is_deterministic() {
        let cfg = GenConfig::new(Calculus::Del, 42);
        for index in 0..20 {
            let a = generate(&cfg, index);
            let b = generate(&cfg, index);
            assert!(alpha_equal_comp(&a, &b));
            assert_eq!(a, b, "same (seed,index) must be identical");
        }
    }

    #[test]
    fn smallest_budget_gives_return_unit() {
        let mut cfg = GenConfig::new(Calculus::Del, 7);
        cfg.max_size = 1;
        assert_eq!(generate(&cfg, 3), ret(Value::Unit));
    }

    #[test]
    fn generated_programs_are_valid() {
        for k in Calculus::ALL {
            let cfg = GenConfig::new(k, 11);
            let count = if k == Calculus::Del { 1000 } else { 200 };
            for index in 0..count {
                let p = generate(&cfg, index);
                assert!(
                    syntax::check_calculus(&p, k, true).is_ok(),
                    "{k}: {}",
                    syntax::pretty_comp(&p)
                );
            }
        }
    }

    #[test]
    fn observe_examples() {
        let v = pair(inj("A", Value::Unit), inj("B", Value::Unit));
        assert_eq!(
            observe(&v),
            Observation::Pair(
                Box::new(Observation::Inj("A".into(), Box::new(Observation::Unit))),
                Box::new(Observation::Inj("B".into(), Box::new(Observation::Unit))),
            )
        );
        assert_eq!(observe(&thunk(ret(Value::Unit))), Observation::Opaque);
        assert_eq!(observe(&Value::Unit), Observation::Unit);
    }

    #[test]
    fn corpus_outcomes_match_expectations() {
        for entry in corpus() {
            let fuel = match entry.expected {
                ExpectedOutcome::Diverges => 2_000,
                _ => 100_000,
            };
            let out = evaluate(&entry.program, entry.calculus, fuel, false).unwrap();
            match entry.expected {
                ExpectedOutcome::Value => {
                    let OutcomeKind::Value { value, .. } = &out.kind else {
                        panic!("{}: expected value, got {}", entry.name, out.kind.tag());
                    };
                    if let Some(expected) = &entry.expected_observation {
                        assert_eq!(&observe(value), expected, "{}", entry.name);
                    }
                }
                ExpectedOutcome::Bottom => assert_eq!(out.kind.tag(), "bottom", "{}", entry.name),
                ExpectedOutcome::Stuck => assert_eq!(out.kind.tag(), "stuck", "{}", entry.name),
                ExpectedOutcome::Diverges => {
                    assert_eq!(out.kind.tag(), "fuel-exhausted", "{}", entry.name)
                }
            }
        }
    }

    #[test]
    fn trivial_program_agrees_under_every_translation() {
        let p = ret(Value::Unit);
        for id in TranslationId::ALL {
            let source_k = id.source();
            let p = parse_program("(return ())", source_k).unwrap();
            let out = diff_run(&p, id, 1000, FuelPolicy::default(), true);
            assert_eq!(
                out.verdict,
                Verdict::Agree {
                    kind: "value".into()
                },
                "{id}"
            );
        }
        let _ = p;
    }

    #[test]
    fn naive_translation_disagrees_on_m_del() {
        let entry = corpus_entry("M_del").unwrap();
        let out = diff_run(
            &entry.program,
            TranslationId::DelToAcNaive,
            100_000,
            FuelPolicy::default(),
            true,
        );
        match out.verdict {
            Verdict::Disagree { source, target, .. } => {
                assert_eq!(source.kind, "bottom");
                assert_eq!(target.kind, "value");
            }
            other => panic!("expected disagreement, got {other:?}"),
        }
        assert!(out.wf_violations.is_empty());
    }

    #[test]
    fn counter_translation_agrees_on_m_del() {
        let entry = corpus_entry("M_del").unwrap();
        let out = diff_run(
            &entry.program,
            TranslationId::DelToAcCounter,
            100_000,
            FuelPolicy::default(),
            true,
        );
        assert_eq!(
            out.verdict,
            Verdict::Agree {
                kind: "bottom".into()
            }
        );
        assert!(out.wf_violations.is_empty());
    }

    #[test]
    fn ref_translation_agrees_on_m_ref() {
        let entry = corpus_entry("M_ref").unwrap();
        let out = diff_run(
            &entry.program,
            TranslationId::RefToAc,
            100_000,
            FuelPolicy::default(),
            true,
        );
        assert_eq!(
            out.verdict,
            Verdict::Agree {
                kind: "value".into()
            }
        );
    }

    #[test]
    fn small_suites_have_no_disagreements() {
        for id in [
            TranslationId::EffToDel,
            TranslationId::DelToEff,
            TranslationId::DelToAcCounter,
            TranslationId::RefToAc,
            TranslationId::EffToAc,
        ] {
            let cfg = GenConfig::new(id.source(), 5);
            let report = run_suite(&cfg, id, 60, 10_000, FuelPolicy::default(), false);
            assert_eq!(report.total("disagree"), 0, "{id}: {:?}", report.totals);
        }
    }

    #[test]
    fn counter_cells_are_monotone_on_m_del() {
        let entry = corpus_entry("M_del").unwrap();
        let t = translate(&entry.program, TranslationId::DelToAcCounter).unwrap();
        counter_cells_monotone(&t, 1_000_000).unwrap();
    }

    #[test]
    fn counter_encoding_is_visible_to_pcase() {
        // Boundary of the counter translation: a continuation is an opaque
        // label in the source, so scrutinising one with pcase is stuck; the
        // counter encoding represents it as ((z, zc), i), which pcase can
        // take apart. Programs that use continuations only as throw targets
        // (as the generator does) never observe the difference.
        let p = parse_program(
            "(dollar (let x (dollar (shift0 k0 (return k0)) y (shift0 k1 (return k1))) \
               (pcase x (a b) (return a))) w (return w))",
            Calculus::Del,
        )
        .unwrap();
        let source = evaluate(&p, Calculus::Del, 10_000, false).unwrap();
        assert_eq!(source.kind.tag(), "stuck");
        let out = diff_run(
            &p,
            TranslationId::DelToAcCounter,
            10_000,
            FuelPolicy::default(),
            false,
        );
        assert!(
            matches!(out.verdict, Verdict::Disagree { .. }),
            "expected the harness to flag the observable encoding: {:?}",
            out.verdict
        );
        // The naive encoding hands out a bare label, which stays opaque.
        let out = diff_run(
            &p,
            TranslationId::DelToAcNaive,
            10_000,
            FuelPolicy::default(),
            false,
        );
        assert_eq!(
            out.verdict,
            Verdict::Agree {
                kind: "stuck".into()
            }
        );
    }

    #[test]
    fn suite_report_lines_are_stable() {
        let cfg = GenConfig::new(Calculus::Del, 3);
        let a = run_suite(
            &cfg,
            TranslationId::DelToAcCounter,
            10,
            5_000,
            FuelPolicy::default(),
            false,
        );
        let b = run_suite(
            &cfg,
            TranslationId::DelToAcCounter,
            10,
            5_000,
            FuelPolicy::default(),
            false,
        );
        assert_eq!(a.render_lines(), b.render_lines());
    }
}
