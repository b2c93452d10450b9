//! Command-line front end: evaluate programs, translate between calculi,
//! dump traces, run differential suites, and print the built-in corpus.

use clap::{Args, Parser, Subcommand};
use ctlcalc::difftest::{self, observe, FuelPolicy, GenConfig, Verdict};
use ctlcalc::machine::{self, evaluate, EvalOptions, Outcome, OutcomeKind};
use ctlcalc::parser::{detect_calculus, print_program, SourceFile};
use ctlcalc::syntax::{pretty_value, Calculus, Comp};
use ctlcalc::translate::{translate, TranslationId};
use std::io::Read;
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_BOTTOM: u8 = 2;
const EXIT_STUCK: u8 = 3;
const EXIT_FUEL: u8 = 4;
const EXIT_DISAGREE: u8 = 5;

#[derive(Parser)]
#[command(
    name = "ctlcalc",
    about = "Interpreters and translations for one-shot control calculi"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a program and print its outcome.
    Eval(EvalArgs),
    /// Translate a program between calculi.
    Translate(TranslateArgs),
    /// Evaluate a program and print the step trace.
    Trace(TraceArgs),
    /// Run a randomized differential suite for one translation.
    Difftest(DifftestArgs),
    /// Print built-in corpus programs.
    Corpus(CorpusArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Source calculus; defaults to the file's `;; calculus:` header.
    #[arg(long)]
    calculus: Option<Calculus>,
    /// Maximum number of beta steps (default 100000; env CTLCALC_FUEL).
    #[arg(long)]
    fuel: Option<u64>,
    /// Print the step trace before the outcome.
    #[arg(long)]
    trace: bool,
    /// Emit a single JSON document instead of text.
    #[arg(long)]
    json: bool,
    /// Path, `-` for stdin, or `corpus:<name>`.
    input: String,
}

#[derive(Args)]
struct TranslateArgs {
    #[arg(long)]
    from: Calculus,
    #[arg(long)]
    to: Calculus,
    /// `naive` or `counter`; only meaningful for del -> ac (default counter).
    #[arg(long)]
    variant: Option<String>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<String>,
    /// Path, `-` for stdin, or `corpus:<name>`.
    input: String,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    calculus: Option<Calculus>,
    #[arg(long)]
    fuel: Option<u64>,
    /// Maximum number of trace records kept.
    #[arg(long, default_value_t = machine::DEFAULT_TRACE_CAP)]
    max_trace: usize,
    input: String,
}

#[derive(Args)]
struct DifftestArgs {
    /// Source calculus (validated against the translation).
    #[arg(long)]
    from: Option<Calculus>,
    #[arg(long)]
    translation: TranslationId,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    count: u64,
    /// AST node budget per generated program.
    #[arg(long, default_value_t = 30)]
    size: usize,
    /// Source-side fuel.
    #[arg(long)]
    fuel: Option<u64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CorpusArgs {
    /// List the available names.
    #[arg(long)]
    list: bool,
    name: Option<String>,
}

fn default_fuel() -> u64 {
    std::env::var("CTLCALC_FUEL")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(machine::DEFAULT_FUEL)
}

struct Usage(String);

fn read_input(input: &str) -> Result<(String, Option<Calculus>), Usage> {
    if let Some(name) = input.strip_prefix("corpus:") {
        let entry = difftest::corpus_entry(name)
            .ok_or_else(|| Usage(format!("unknown corpus program `{name}`")))?;
        let text = print_program(&entry.program).expect("corpus programs are label-free");
        return Ok((text, Some(entry.calculus)));
    }
    let text = if input == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|e| Usage(format!("cannot read stdin: {e}")))?;
        buf
    } else {
        std::fs::read_to_string(input).map_err(|e| Usage(format!("cannot read {input}: {e}")))?
    };
    let header = detect_calculus(&text);
    Ok((text, header))
}

fn load_program(input: &str, flag: Option<Calculus>) -> Result<(Comp, Calculus), Usage> {
    let (text, header) = read_input(input)?;
    let source = SourceFile::new(text, flag.or(header))
        .map_err(|e| Usage(format!("parse error: {e}")))?;
    let program = source.parse().map_err(|e| Usage(format!("parse error: {e}")))?;
    Ok((program, source.calculus))
}

fn outcome_exit(kind: &OutcomeKind) -> u8 {
    match kind {
        OutcomeKind::Value { .. } => EXIT_OK,
        OutcomeKind::Bottom => EXIT_BOTTOM,
        OutcomeKind::Stuck { .. } => EXIT_STUCK,
        OutcomeKind::FuelExhausted { .. } => EXIT_FUEL,
    }
}

fn outcome_json(outcome: &Outcome) -> serde_json::Value {
    let mut doc = serde_json::json!({
        "outcome": outcome.kind.tag(),
        "steps": outcome.steps,
    });
    if let OutcomeKind::Value { value, .. } = &outcome.kind {
        doc["value_observation"] = serde_json::to_value(observe(value)).expect("observation");
        doc["value"] = serde_json::Value::String(pretty_value(value));
    }
    if let OutcomeKind::Stuck { reason, .. } = &outcome.kind {
        doc["stuck_reason"] = serde_json::Value::String(reason.to_string());
    }
    doc
}

fn cmd_eval(args: EvalArgs) -> Result<u8, Usage> {
    let (program, calculus) = load_program(&args.input, args.calculus)?;
    let fuel = args.fuel.unwrap_or_else(default_fuel);
    let opts = EvalOptions {
        fuel,
        trace: args.trace,
        ..EvalOptions::default()
    };
    let outcome = machine::evaluate_opt(&program, calculus, &opts, &mut |_, _| {})
        .map_err(|e| Usage(format!("invalid program: {e}")))?;
    if args.trace {
        if let Some(steps) = &outcome.trace {
            for s in steps {
                println!("{}", s.render());
            }
        }
    }
    if args.json {
        println!("{}", outcome_json(&outcome));
    } else {
        match &outcome.kind {
            OutcomeKind::Value { value, .. } => println!("{}", pretty_value(value)),
            OutcomeKind::Bottom => println!("bottom after {} steps", outcome.steps),
            OutcomeKind::Stuck { reason, .. } => {
                println!("stuck after {} steps: {}", outcome.steps, reason)
            }
            OutcomeKind::FuelExhausted { .. } => {
                println!("fuel exhausted after {} steps", outcome.steps)
            }
        }
    }
    Ok(outcome_exit(&outcome.kind))
}

fn translation_for(
    from: Calculus,
    to: Calculus,
    variant: Option<&str>,
) -> Result<TranslationId, Usage> {
    let id = match (from, to) {
        (Calculus::Del, Calculus::Ac) => match variant.unwrap_or("counter") {
            "naive" => TranslationId::DelToAcNaive,
            "counter" => TranslationId::DelToAcCounter,
            other => return Err(Usage(format!("unknown variant `{other}` (naive|counter)"))),
        },
        (Calculus::Eff, Calculus::Del) => TranslationId::EffToDel,
        (Calculus::Del, Calculus::Eff) => TranslationId::DelToEff,
        (Calculus::Ref, Calculus::Ac) => TranslationId::RefToAc,
        (Calculus::Eff, Calculus::Ac) => TranslationId::EffToAc,
        (f, t) => return Err(Usage(format!("no translation from {f} to {t}"))),
    };
    if variant.is_some() && !matches!((from, to), (Calculus::Del, Calculus::Ac)) {
        return Err(Usage("--variant only applies to del -> ac".to_string()));
    }
    Ok(id)
}

fn cmd_translate(args: TranslateArgs) -> Result<u8, Usage> {
    let id = translation_for(args.from, args.to, args.variant.as_deref())?;
    let (program, _) = load_program(&args.input, Some(args.from))?;
    let translated = translate(&program, id).map_err(|e| Usage(format!("translate: {e}")))?;
    let text = print_program(&translated).expect("translations are label-free");
    let doc = format!(";; calculus: {}\n{}\n", id.target(), text);
    match args.out {
        Some(path) => {
            std::fs::write(&path, doc).map_err(|e| Usage(format!("cannot write {path}: {e}")))?
        }
        None => print!("{doc}"),
    }
    Ok(EXIT_OK)
}

fn cmd_trace(args: TraceArgs) -> Result<u8, Usage> {
    let (program, calculus) = load_program(&args.input, args.calculus)?;
    let fuel = args.fuel.unwrap_or_else(default_fuel);
    let opts = EvalOptions {
        fuel,
        trace: true,
        trace_cap: args.max_trace,
    };
    let outcome = machine::evaluate_opt(&program, calculus, &opts, &mut |_, _| {})
        .map_err(|e| Usage(format!("invalid program: {e}")))?;
    for s in outcome.trace.as_deref().unwrap_or(&[]) {
        println!("{}", s.render());
    }
    println!("outcome\t{}\tsteps\t{}", outcome.kind.tag(), outcome.steps);
    Ok(outcome_exit(&outcome.kind))
}

fn cmd_difftest(args: DifftestArgs) -> Result<u8, Usage> {
    let id = args.translation;
    if let Some(from) = args.from {
        if from != id.source() {
            return Err(Usage(format!(
                "--from {from} does not match {id}, which starts from {}",
                id.source()
            )));
        }
    }
    let mut cfg = GenConfig::new(id.source(), args.seed);
    cfg.max_size = args.size;
    let fuel = args.fuel.unwrap_or(10_000);
    let report = difftest::run_suite(&cfg, id, args.count, fuel, FuelPolicy::default(), true);
    if args.json {
        print!("{}", report.render_lines());
    } else {
        for (key, n) in &report.totals {
            println!("{key}\t{n}");
        }
        for item in report.disagreements() {
            if let Verdict::Disagree {
                source,
                target,
                program,
            } = &item.verdict
            {
                println!(
                    "disagree at index {}: source={} target={} program={}",
                    item.index, source.kind, target.kind, program
                );
            }
        }
        if report.wf_violation_count > 0 {
            println!("well-formedness violations: {}", report.wf_violation_count);
        }
    }
    if report.total("disagree") > 0 {
        Ok(EXIT_DISAGREE)
    } else {
        Ok(EXIT_OK)
    }
}

fn cmd_corpus(args: CorpusArgs) -> Result<u8, Usage> {
    if args.list || args.name.is_none() {
        for entry in difftest::corpus() {
            println!("{}\t{}\t{:?}", entry.name, entry.calculus, entry.expected);
        }
        return Ok(EXIT_OK);
    }
    let name = args.name.unwrap();
    let entry = difftest::corpus_entry(&name)
        .ok_or_else(|| Usage(format!("unknown corpus program `{name}`")))?;
    let text = print_program(&entry.program).expect("corpus programs are label-free");
    println!(";; calculus: {}", entry.calculus);
    println!("{text}");
    Ok(EXIT_OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => cmd_eval(args),
        Command::Translate(args) => cmd_translate(args),
        Command::Trace(args) => cmd_trace(args),
        Command::Difftest(args) => cmd_difftest(args),
        Command::Corpus(args) => cmd_corpus(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

// `evaluate` is re-exported for doc purposes; silence the lint when unused.
#[allow(unused_imports)]
use evaluate as _evaluate_alias;
