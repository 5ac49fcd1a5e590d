use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use opa_bench::fixtures::{parse_matrix, published_rankings};
use opa_bench::{sensitivity_permutations, BenchError, EntityStats, MethodRegistry, Moora, Topsis, Vikor};
use opa_core::elicitation::{next_question, record_answer, replay, start_session, utility_band, Answer, SessionStatus};
use opa_core::opa::GroupWeights;
use opa_core::pr::solve_opa_pr;
use opa_core::OpaError;
use opa_workbench::document::{canonical_hash, from_value, parse_json, read_text, to_canonical_json, SCHEMA_VERSION};
use opa_workbench::models::{build_pr_instance, stage2_profile};
use opa_workbench::{
    load_instance, ErrorClass, InstanceDocument, ModelRegistry, NoSessions, ResultDocument, SessionFile, SessionSource,
    SessionStore, SolveOptions, WorkbenchError,
};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "opa", version, about = "Ordinal Priority Approach workbench")]
pub struct Cli {
    /// Write the JSON artifact of the command to this path.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Log simplex tableaus to stderr.
    #[arg(long, global = true)]
    pub lp_trace: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classical OPA weights from the ranks alone.
    Solve {
        instance: PathBuf,
        /// Cross-check the closed form against the LP.
        #[arg(long)]
        lp_check: bool,
    },
    /// Two-stage preference-robust OPA.
    PrSolve {
        instance: PathBuf,
        #[arg(long)]
        lp_check: bool,
    },
    /// Robust-satisficing OPA at target level alpha.
    PrsSolve {
        instance: PathBuf,
        /// Target level in [0, 1]; defaults to the instance's `alpha`.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Lottery-question elicitation of a utility ambiguity set.
    Elicit {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        ranks: usize,
        #[arg(long, default_value_t = 0.3)]
        lipschitz: f64,
        #[arg(long, default_value_t = 2)]
        questions: usize,
        /// Ask the questions on stdin.
        #[arg(long, conflicts_with = "replay")]
        interactive: bool,
        /// Rebuild a recorded session file and check its final set.
        #[arg(long, value_name = "FILE")]
        replay: Option<PathBuf>,
    },
    /// Rank the alternatives of a decision matrix with TOPSIS, VIKOR and MOORA.
    Bench {
        #[arg(long, value_name = "FILE")]
        matrix: PathBuf,
        /// VIKOR strategy weight.
        #[arg(long, default_value_t = 0.5)]
        vikor_v: f64,
    },
    /// Stage-2 weights under permutations of the expert ranks.
    Sensitivity {
        instance: PathBuf,
        /// Maximum number of scenarios.
        #[arg(long)]
        cap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the HTTP API on the loopback interface.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
        bind: IpAddr,
    },
}

fn classify(err: &anyhow::Error) -> Option<(&'static str, bool)> {
    if let Some(e) = err.downcast_ref::<WorkbenchError>() {
        let solver = matches!(e.class(), ErrorClass::Solver | ErrorClass::Internal);
        return Some((e.code(), solver));
    }
    if let Some(e) = err.downcast_ref::<OpaError>() {
        return Some((e.code(), !e.is_validation()));
    }
    if let Some(e) = err.downcast_ref::<BenchError>() {
        return Some((e.code(), !e.is_validation()));
    }
    None
}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    match classify(err) {
        Some((_, true)) => EXIT_SOLVER,
        Some((_, false)) => EXIT_VALIDATION,
        None if err.downcast_ref::<std::io::Error>().is_some() => EXIT_VALIDATION,
        None => EXIT_SOLVER,
    }
}

fn report(err: &anyhow::Error) {
    match classify(err) {
        Some((code, _)) => eprintln!("error[{code}]: {err:#}"),
        None => eprintln!("error: {err:#}"),
    }
    if let Some(e) = err.downcast_ref::<WorkbenchError>() {
        for v in e.violations() {
            eprintln!("  at {}: {}", if v.pointer.is_empty() { "/" } else { &v.pointer }, v.message);
        }
    }
}

fn init_logging(lp_trace: bool) {
    let mut builder = env_logger::Builder::new();
    builder.filter_level(log::LevelFilter::Warn).parse_default_env();
    if lp_trace {
        builder.filter_module(opa_lp::TRACE_TARGET, log::LevelFilter::Trace);
    }
    let _ = builder.try_init();
}

pub fn run(args: impl IntoIterator<Item = OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    init_logging(cli.lp_trace);
    let stdin = std::io::stdin();
    match execute(&cli, &mut stdin.lock(), &mut std::io::stdout()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report(&e);
            exit_code(&e)
        }
    }
}

fn write_out<T: Serialize>(out: Option<&Path>, value: &T) -> anyhow::Result<()> {
    if let Some(path) = out {
        let mut text = to_canonical_json(value)?;
        text.push('\n');
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn uses_sessions(doc: &InstanceDocument) -> bool {
    doc.utilities.iter().flatten().flatten().any(|u| u.session.is_some())
}

fn sessions_for(doc: &InstanceDocument) -> anyhow::Result<Box<dyn SessionSource>> {
    Ok(if uses_sessions(doc) { Box::new(SessionStore::from_env()?) } else { Box::new(NoSessions) })
}

fn labelled(prefix: &str, values: &[f64]) -> String {
    values.iter().enumerate().map(|(k, v)| format!("{prefix}{}={v:.6}", k + 1)).collect::<Vec<_>>().join(" ")
}

fn print_groups(w: &mut dyn Write, g: &GroupWeights) -> std::io::Result<()> {
    writeln!(w, "experts:      {}", labelled("E", &g.expert))?;
    writeln!(w, "attributes:   {}", labelled("C", &g.attribute))?;
    writeln!(w, "alternatives: {}", labelled("A", &g.alternative))
}

fn print_result(w: &mut dyn Write, res: &ResultDocument) -> std::io::Result<()> {
    writeln!(w, "model: {} ({})", res.model, res.provenance.solver_path)?;
    writeln!(w, "z={:.6}", res.z)?;
    print_groups(w, &res.aggregates)?;
    if let Some(f) = &res.fragility {
        writeln!(w, "alpha={} target={:.6}", f.alpha, f.target)?;
        writeln!(w, "fragility: total={:.6} phi={:.6} eta=[{}]", f.total, f.phi, fmt_list(&f.eta))?;
    }
    if let Some(dev) = res.provenance.lp_deviation {
        writeln!(w, "lp deviation: {dev:.3e}")?;
    }
    Ok(())
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(", ")
}

fn solve(cli: &Cli, model: &str, instance: &Path, opts: SolveOptions, w: &mut dyn Write) -> anyhow::Result<()> {
    let doc = load_instance(instance)?;
    let sessions = sessions_for(&doc)?;
    let res = ModelRegistry::default().solve(model, &doc, sessions.as_ref(), &opts)?;
    print_result(w, &res)?;
    write_out(cli.out.as_deref(), &res)
}

fn print_question(w: &mut dyn Write, q: &opa_core::elicitation::LotteryQuestion) -> std::io::Result<()> {
    writeln!(
        w,
        "question {}: lottery ({} w.p. {:.4}, {} w.p. {:.4}) or {} for certain  [r1={} r2={} r3={} p={:.6}]",
        q.index + 1,
        q.r1,
        1.0 - q.p,
        q.r3,
        q.p,
        q.r2,
        q.r1,
        q.r2,
        q.r3,
        q.p
    )
}

fn print_band(w: &mut dyn Write, session: &opa_core::elicitation::ElicitationSession) -> anyhow::Result<()> {
    if session.status == SessionStatus::Inconsistent {
        writeln!(w, "status: INCONSISTENT (answers contradict each other)")?;
        return Ok(());
    }
    writeln!(w, "utility band:")?;
    for (x, (lo, hi)) in session.spec.grid.iter().zip(utility_band(session)?) {
        writeln!(w, "  u({x}) in [{lo:.6}, {hi:.6}]")?;
    }
    Ok(())
}

fn read_answer(input: &mut dyn BufRead, w: &mut dyn Write) -> anyhow::Result<Option<Answer>> {
    loop {
        write!(w, "prefer the [l]ottery or the [c]ertain rank? ")?;
        w.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Ok(None);
        }
        match line.trim().to_ascii_lowercase().as_str() {
            "l" | "lottery" => return Ok(Some(Answer::PrefersLottery)),
            "c" | "certain" => return Ok(Some(Answer::PrefersCertain)),
            other => writeln!(w, "unrecognized answer `{other}`")?,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn elicit(
    cli: &Cli,
    seed: u64,
    ranks: usize,
    lipschitz: f64,
    questions: usize,
    interactive: bool,
    replay_file: Option<&Path>,
    input: &mut dyn BufRead,
    w: &mut dyn Write,
) -> anyhow::Result<()> {
    if let Some(path) = replay_file {
        let file: SessionFile = from_value(parse_json(&read_text(path)?)?)?;
        let recorded = &file.session;
        let session =
            replay(recorded.ranks, recorded.lipschitz, recorded.target_questions, recorded.seed, &recorded.asked)?;
        let want = canonical_hash(&recorded.spec)?;
        let got = canonical_hash(&session.spec)?;
        writeln!(w, "replayed {} answers (seed {})", session.asked.len(), session.seed)?;
        writeln!(w, "spec sha256={got}")?;
        if got != want {
            return Err(WorkbenchError::Conflict(format!("replayed set {got} differs from the recorded {want}")).into());
        }
        writeln!(w, "matches recording")?;
        print_band(w, &session)?;
        let out = SessionFile { schema_version: SCHEMA_VERSION, id: file.id.clone(), session };
        return write_out(cli.out.as_deref(), &out);
    }
    let mut session = start_session(ranks, lipschitz, questions, seed)?;
    if session.budget_warning {
        writeln!(w, "warning: {questions} questions need more than {ranks} ranks for distinct triples")?;
    }
    if interactive {
        while session.status == SessionStatus::Active {
            let q = next_question(&mut session)?;
            print_question(w, &q)?;
            match read_answer(input, w)? {
                Some(a) => record_answer(&mut session, a)?,
                None => break,
            }
        }
        print_band(w, &session)?;
    } else {
        let q = next_question(&mut session)?;
        print_question(w, &q)?;
    }
    let out = SessionFile { schema_version: SCHEMA_VERSION, id: ulid::Ulid::new().to_string(), session };
    write_out(cli.out.as_deref(), &out)
}

#[derive(Serialize)]
struct BenchReport {
    outputs: Vec<opa_bench::MethodOutput>,
}

fn bench(cli: &Cli, matrix: &Path, vikor_v: f64, w: &mut dyn Write) -> anyhow::Result<()> {
    let fixture = parse_matrix(&read_text(matrix)?)?;
    let m = fixture.to_matrix()?;
    let mut reg = MethodRegistry::new();
    reg.register(Box::new(Topsis))?;
    reg.register(Box::new(Vikor { v: vikor_v }))?;
    reg.register(Box::new(Moora))?;
    let outputs = reg.evaluate_all(&m)?;
    let published = published_rankings()?;
    let comparable = published.alternatives == m.alternatives;
    for out in &outputs {
        let ranks = out.ranking.ranks.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let note = match published.get(&out.method) {
            Some(p) if comparable => {
                if *p == out.ranking {
                    "  (matches published row)".to_string()
                } else {
                    format!("  (published: {})", p.ranks.iter().map(usize::to_string).collect::<Vec<_>>().join(" "))
                }
            }
            _ => String::new(),
        };
        writeln!(w, "{:<6} {ranks}{note}", out.method)?;
        for (name, values) in &out.details {
            writeln!(w, "       {name}: [{}]", fmt_list(values))?;
        }
    }
    write_out(cli.out.as_deref(), &BenchReport { outputs })
}

fn print_stats(w: &mut dyn Write, title: &str, rows: &[EntityStats]) -> std::io::Result<()> {
    writeln!(w, "{title}")?;
    writeln!(w, "  {:<6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}", "", "mean", "skew", "kurt", "cv", "min", "max")?;
    for r in rows {
        let s = &r.stats;
        writeln!(
            w,
            "  {:<6} {:>10.6} {:>10.4} {:>10.4} {:>10.4} {:>10.6} {:>10.6}",
            r.entity, s.mean, s.skewness, s.kurtosis, s.coefficient_of_variation, s.min, s.max
        )?;
    }
    Ok(())
}

fn sensitivity(cli: &Cli, instance: &Path, cap: usize, seed: u64, w: &mut dyn Write) -> anyhow::Result<()> {
    let doc = load_instance(instance)?;
    let sessions = sessions_for(&doc)?;
    let (inst, _) = build_pr_instance(&doc, sessions.as_ref())?;
    let sol = solve_opa_pr(&inst, false)?;
    let profile = stage2_profile(&inst, &sol)?;
    let report = sensitivity_permutations(&profile, cap, seed)?;
    let kind = if report.exhaustive { "all expert orderings" } else { "sampled expert orderings" };
    writeln!(w, "{} scenarios ({kind})", report.scenarios.len())?;
    print_stats(w, "experts", &report.expert)?;
    print_stats(w, "attributes", &report.attribute)?;
    print_stats(w, "alternatives", &report.alternative)?;
    write_out(cli.out.as_deref(), &report)
}

fn serve(port: u16, bind: IpAddr, w: &mut dyn Write) -> anyhow::Result<()> {
    let store = SessionStore::from_env()?;
    writeln!(w, "data directory: {}", store.root().display())?;
    writeln!(w, "listening on http://{}", SocketAddr::new(bind, port))?;
    w.flush()?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(opa_workbench::api::serve(SocketAddr::new(bind, port), store))
        .with_context(|| format!("serving on port {port}"))?;
    Ok(())
}

pub fn execute(cli: &Cli, input: &mut dyn BufRead, w: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::Solve { instance, lp_check } => {
            solve(cli, "opa", instance, SolveOptions { lp_check: *lp_check, alpha: None }, w)
        }
        Command::PrSolve { instance, lp_check } => {
            solve(cli, "opa-pr", instance, SolveOptions { lp_check: *lp_check, alpha: None }, w)
        }
        Command::PrsSolve { instance, alpha } => {
            solve(cli, "opa-prs", instance, SolveOptions { lp_check: false, alpha: *alpha }, w)
        }
        Command::Elicit { seed, ranks, lipschitz, questions, interactive, replay } => {
            elicit(cli, *seed, *ranks, *lipschitz, *questions, *interactive, replay.as_deref(), input, w)
        }
        Command::Bench { matrix, vikor_v } => bench(cli, matrix, *vikor_v, w),
        Command::Sensitivity { instance, cap, seed } => sensitivity(cli, instance, *cap, *seed, w),
        Command::Serve { port, bind } => serve(*port, *bind, w),
    }
}
