//! Command-line front end. Exit codes: 0 stable or pass, 1 usage or input
//! error, 2 unstable, 3 envelope check failed.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::corpus;
use crate::criterion::{check, fmt_matrix, fmt_vector, verify_controller, ControllerVerification, CriterionReport};
use crate::levels::{decompose, LevelDecomposition};
use crate::model::{split_components, validate, FormationSpec};
use crate::numerics::{exp_envelope, is_hurwitz_with, ExpEnvelope};
use crate::pairwise::cross_compare;
use crate::serde_util;
use crate::simulation::{
    chain_residual, envelope_runs, error_dynamics_check, fit_envelope, ideal_initial_states, write_csv, write_svg,
    EnvelopeFit, LeaderSignal, TraceMetadata,
};
use crate::synthesis::{enumerate_family, synthesize, synthesize_leader_independent, ControllerSet, SplitStrategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNSTABLE: i32 = 2;
pub const EXIT_ENVELOPE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "formation", version, about = "Internal stability of linear leader-follower formations")]
pub struct Cli {
    /// Run configuration (JSON); flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Integration step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Simulation horizon.
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide internal stability and write the criterion report.
    Check {
        spec: PathBuf,
        /// Analyze each weak component of a disconnected instance separately.
        #[arg(long)]
        split: bool,
    },
    /// Synthesize a stabilizing controller (or a sample of the family).
    Synthesize {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::ParentOnly)]
        strategy: StrategyArg,
        /// Number of family members to sample.
        #[arg(long)]
        family: Option<usize>,
    },
    /// Simulate the closed loop, write the trace and check the error envelope.
    Simulate {
        spec: PathBuf,
        /// Controller file; without it a controller is synthesized.
        #[arg(long, conflicts_with = "auto")]
        controller: Option<PathBuf>,
        /// Synthesize the controller (default when no file is given).
        #[arg(long)]
        auto: bool,
        #[arg(long, value_enum, default_value_t = StrategyArg::ParentOnly)]
        strategy: StrategyArg,
        /// Leader input: zero, const:C1,C2, sin:A1,A2:OMEGA[:PHASE] or
        /// pwc:T=V1,V2;T=... Give once for all leaders or once per leader.
        #[arg(long)]
        signals: Vec<String>,
        /// Initial states, agents separated by `;`, entries by `,`.
        #[arg(long, conflicts_with_all = ["ideal", "random"])]
        x0: Option<String>,
        /// Start on the ideal configuration x_i = x0 − D_i with random x0.
        #[arg(long, conflicts_with = "random")]
        ideal: bool,
        /// Random initial states (default).
        #[arg(long)]
        random: bool,
        /// Also write an SVG chart of the edge error norms.
        #[arg(long)]
        svg: bool,
    },
    /// Analyze every two-agent subformation.
    Pairwise { spec: PathBuf },
    /// Run a bundled instance end to end and compare with its known outcome.
    Demo { name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    ParentOnly,
    Uniform,
    /// Followers use only their own state.
    LeaderIndependent,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl CliError {
    fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }
}

struct Context {
    config: RunConfig,
    out_dir: PathBuf,
}

impl Context {
    fn write(&self, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        let io = |source| CliError::Output {
            path: path.display().to_string(),
            source,
        };
        fs::create_dir_all(&self.out_dir).map_err(io)?;
        fs::write(&path, contents).map_err(io)?;
        Ok(path)
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed)
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn build_context(cli: &Cli) -> Result<Context, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::Input(format!("malformed config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dt) = cli.dt {
        config.dt = Some(dt);
    }
    if let Some(t) = cli.horizon {
        config.horizon = t;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.display().to_string();
    }
    config.validate()?;
    let out_dir = PathBuf::from(&config.out_dir);
    Ok(Context { config, out_dir })
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    let ctx = build_context(&cli)?;
    match cli.command {
        Command::Check { spec, split } => cmd_check(&ctx, &spec, split),
        Command::Synthesize { spec, strategy, family } => cmd_synthesize(&ctx, &spec, strategy, family),
        Command::Simulate {
            spec,
            controller,
            auto: _,
            strategy,
            signals,
            x0,
            ideal,
            random: _,
            svg,
        } => {
            let init = match (x0, ideal) {
                (Some(text), _) => InitialCondition::Explicit(text),
                (None, true) => InitialCondition::Ideal,
                (None, false) => InitialCondition::Random,
            };
            cmd_simulate(&ctx, &spec, controller.as_deref(), strategy, &signals, init, svg)
        }
        Command::Pairwise { spec } => cmd_pairwise(&ctx, &spec),
        Command::Demo { name } => cmd_demo(&ctx, &name),
    }
}

fn load_spec(path: &Path) -> Result<FormationSpec, CliError> {
    FormationSpec::load(path).map_err(CliError::input)
}

fn prepare(spec: FormationSpec) -> Result<(FormationSpec, LevelDecomposition), CliError> {
    let spec = validate(spec).map_err(|e| {
        let hint = if e.only_disconnected() { "\n(use `check --split` to analyze each component)" } else { "" };
        CliError::Input(format!("invalid formation:\n{e}{hint}"))
    })?;
    let decomp = decompose(&spec).map_err(CliError::input)?;
    Ok((spec, decomp))
}

fn run_check(ctx: &Context, spec: &FormationSpec, decomp: &LevelDecomposition) -> Result<CriterionReport, CliError> {
    check(spec, decomp, &ctx.config.tolerances).map_err(CliError::input)
}

fn verdict_code(stable: bool) -> i32 {
    if stable {
        EXIT_OK
    } else {
        EXIT_UNSTABLE
    }
}

fn cmd_check(ctx: &Context, path: &Path, split: bool) -> Result<i32, CliError> {
    let raw = load_spec(path)?;
    if split {
        if let Err(e) = validate(raw.clone()) {
            if e.only_disconnected() {
                return check_components(ctx, &raw);
            }
        }
    }
    let (spec, decomp) = prepare(raw)?;
    let report = run_check(ctx, &spec, &decomp)?;
    ctx.write("criterion.json", report.to_json().as_bytes())?;
    let table = report.to_table();
    ctx.write("criterion.txt", table.as_bytes())?;
    print!("{table}");
    Ok(verdict_code(report.is_stable()))
}

fn check_components(ctx: &Context, raw: &FormationSpec) -> Result<i32, CliError> {
    let mut all_stable = true;
    for (k, comp) in split_components(raw).into_iter().enumerate() {
        let ids: Vec<String> = comp.nodes.iter().map(|v| (v + 1).to_string()).collect();
        let (spec, decomp) = prepare(comp.spec)?;
        let report = run_check(ctx, &spec, &decomp)?;
        all_stable &= report.is_stable();
        ctx.write(&format!("criterion-component-{}.json", k + 1), report.to_json().as_bytes())?;
        println!("component {} (nodes {}; numbered 1.. locally)", k + 1, ids.join(", "));
        print!("{}", report.to_table());
        println!();
    }
    println!("overall: {}", if all_stable { "stable" } else { "unstable" });
    Ok(verdict_code(all_stable))
}

#[derive(Serialize)]
struct FollowerCertificate {
    #[serde(with = "serde_util::one_based")]
    node: usize,
    spectral_abscissa: f64,
    envelope: Option<ExpEnvelope>,
}

#[derive(Serialize)]
struct SynthesisSummary<'a> {
    controller: &'a ControllerSet,
    verification: &'a ControllerVerification,
    /// `‖e^{t(A_i + B_i S_i)}‖ ≤ C e^{−α t}` with `α` half the stability margin.
    decay: Vec<FollowerCertificate>,
}

fn certificates(ctx: &Context, spec: &FormationSpec, ctrl: &ControllerSet) -> Result<Vec<FollowerCertificate>, CliError> {
    let tol = &ctx.config.tolerances;
    ctrl.followers
        .iter()
        .map(|f| {
            let a = &spec.agents[f.node].a + &spec.agents[f.node].b * &f.s;
            let h = is_hurwitz_with(&a, tol).map_err(CliError::input)?;
            let envelope = if h.is_hurwitz {
                exp_envelope(&a, -0.5 * h.spectral_abscissa, tol, ctx.config.pade_order).ok()
            } else {
                None
            };
            Ok(FollowerCertificate {
                node: f.node,
                spectral_abscissa: h.spectral_abscissa,
                envelope,
            })
        })
        .collect()
}

fn build_controller(
    ctx: &Context,
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    report: &CriterionReport,
    strategy: StrategyArg,
) -> Result<ControllerSet, CliError> {
    let tol = &ctx.config.tolerances;
    let result = match strategy {
        StrategyArg::ParentOnly => synthesize(spec, decomp, report, &SplitStrategy::ParentOnly, tol),
        StrategyArg::Uniform => synthesize(spec, decomp, report, &SplitStrategy::Uniform, tol),
        StrategyArg::LeaderIndependent => synthesize_leader_independent(spec, decomp, report, tol),
    };
    result.map_err(CliError::input)
}

fn describe_verification(v: &ControllerVerification) -> String {
    format!(
        "verify: {}  gain defect {:.3e}  offset defect {:.3e}  tolerance {:.3e}",
        if v.pass { "PASS" } else { "FAIL" },
        v.max_gain_defect,
        v.max_offset_defect,
        v.tolerance
    )
}

fn describe_controller(ctrl: &ControllerSet) -> String {
    let mut out = String::new();
    for f in &ctrl.followers {
        let _ = writeln!(out, "follower {}: S = {}  k = {}", f.node + 1, fmt_matrix(&f.s), fmt_vector(&f.offset));
        for g in &f.parent_gains {
            let _ = writeln!(out, "  K_({},{}) = {}", f.node + 1, g.parent + 1, fmt_matrix(&g.gain));
        }
    }
    out
}

fn cmd_synthesize(ctx: &Context, path: &Path, strategy: StrategyArg, family: Option<usize>) -> Result<i32, CliError> {
    let (spec, decomp) = prepare(load_spec(path)?)?;
    let report = run_check(ctx, &spec, &decomp)?;
    if !report.is_stable() {
        println!("formation is unstable; no stabilizing controller exists");
        return Ok(EXIT_UNSTABLE);
    }
    let tol = &ctx.config.tolerances;
    let controllers = match family {
        Some(count) => {
            if strategy != StrategyArg::ParentOnly {
                return Err(CliError::Input("--family samples its own splits; drop --strategy".into()));
            }
            enumerate_family(&spec, &decomp, &report, count, &mut ctx.rng(), tol).map_err(CliError::input)?
        }
        None => vec![build_controller(ctx, &spec, &decomp, &report, strategy)?],
    };
    let many = family.is_some();
    let mut all_pass = true;
    for (k, ctrl) in controllers.iter().enumerate() {
        let v = verify_controller(&spec, &decomp, ctrl, tol).map_err(CliError::input)?;
        all_pass &= v.pass;
        let name = if many { format!("controller-{:02}.json", k + 1) } else { "controller.json".to_string() };
        ctx.write(&name, ctrl.to_json().as_bytes())?;
        let summary = SynthesisSummary {
            controller: ctrl,
            verification: &v,
            decay: certificates(ctx, &spec, ctrl)?,
        };
        let summary_name = name.replace("controller", "synthesis");
        ctx.write(&summary_name, to_json(&summary).as_bytes())?;
        println!("{name} ({})", ctrl.strategy);
        print!("{}", describe_controller(ctrl));
        println!("{}", describe_verification(&v));
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_INPUT })
}

enum InitialCondition {
    Explicit(String),
    Ideal,
    Random,
}

fn parse_states(text: &str, l: usize, n: usize) -> Result<Vec<DVector<f64>>, CliError> {
    let states: Vec<DVector<f64>> = text
        .split(';')
        .map(|agent| {
            agent
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map(DVector::from_vec)
                .map_err(|e| CliError::Input(format!("bad --x0 entry `{agent}`: {e}")))
        })
        .collect::<Result<_, _>>()?;
    if states.len() != l || states.iter().any(|x| x.len() != n) {
        return Err(CliError::Input(format!("--x0 needs {l} agents with {n} entries each")));
    }
    Ok(states)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn parse_signals(raw: &[String], leaders: usize, m: usize) -> Result<Vec<LeaderSignal>, CliError> {
    let parsed: Vec<LeaderSignal> = raw
        .iter()
        .map(|s| s.parse::<LeaderSignal>().map_err(CliError::Input))
        .collect::<Result<_, _>>()?;
    let signals = match parsed.len() {
        0 => vec![LeaderSignal::Zero; leaders],
        1 => vec![parsed[0].clone(); leaders],
        k if k == leaders => parsed,
        k => return Err(CliError::Input(format!("{k} signals given for {leaders} leaders"))),
    };
    for s in &signals {
        s.validate(m).map_err(CliError::Input)?;
    }
    Ok(signals)
}

#[derive(Serialize)]
struct ChainCheck {
    #[serde(with = "serde_util::one_based")]
    node: usize,
    #[serde(with = "serde_util::one_based")]
    parent_a: usize,
    #[serde(with = "serde_util::one_based")]
    parent_b: usize,
    max_residual: f64,
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    metadata: &'a TraceMetadata,
    verification: &'a ControllerVerification,
    max_error_norm: f64,
    recompute_defect: f64,
    error_dynamics_defect: f64,
    chain_residuals: Vec<ChainCheck>,
    envelope: &'a EnvelopeFit,
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summary serializes")
}

struct SimulationOutcome {
    envelope_pass: bool,
    max_error_norm: f64,
}

#[allow(clippy::too_many_arguments)]
fn simulate_and_report(
    ctx: &Context,
    spec: &FormationSpec,
    decomp: &LevelDecomposition,
    ctrl: &ControllerSet,
    signals: &[LeaderSignal],
    x0: &[DVector<f64>],
    svg: bool,
    prefix: &str,
) -> Result<SimulationOutcome, CliError> {
    let tol = &ctx.config.tolerances;
    let verification = verify_controller(spec, decomp, ctrl, tol).map_err(CliError::input)?;
    let runs = envelope_runs(spec, decomp, ctrl, x0, signals, ctx.config.horizon, ctx.config.dt)
        .map_err(CliError::input)?;
    let fit = fit_envelope(&runs, decomp, &ctx.config.envelope).map_err(CliError::input)?;
    let trace = &runs.full;

    let mut chain_residuals = Vec::new();
    for i in decomp.followers() {
        let ps = &decomp.parents[i];
        for (a, &j) in ps.iter().enumerate() {
            for &s in &ps[a + 1..] {
                if let Ok(r) = chain_residual(trace, decomp, (i, j), s) {
                    chain_residuals.push(ChainCheck {
                        node: i,
                        parent_a: j,
                        parent_b: s,
                        max_residual: r.into_iter().fold(0.0, f64::max),
                    });
                }
            }
        }
    }
    chain_residuals.sort_by_key(|c| (c.node, c.parent_a, c.parent_b));

    let summary = SimulationSummary {
        metadata: &trace.metadata,
        verification: &verification,
        max_error_norm: trace.max_error_norm(),
        recompute_defect: trace.recompute_defect(),
        error_dynamics_defect: error_dynamics_check(trace, spec, decomp, ctrl),
        chain_residuals,
        envelope: &fit,
    };

    let mut csv = Vec::new();
    write_csv(trace, decomp, &mut csv).map_err(CliError::input)?;
    ctx.write(&format!("{prefix}trace.csv"), &csv)?;
    ctx.write(&format!("{prefix}simulation.json"), to_json(&summary).as_bytes())?;
    if svg {
        let mut buf = Vec::new();
        write_svg(trace, &mut buf).map_err(CliError::input)?;
        ctx.write(&format!("{prefix}errors.svg"), &buf)?;
    }

    println!("{}", describe_verification(&verification));
    println!(
        "simulated {} steps of dt {:.3e} up to T = {}",
        trace.metadata.steps, trace.metadata.dt, trace.metadata.horizon
    );
    println!("max |z(t)| = {:.6e}  |z(0)| = {:.6e}", summary.max_error_norm, fit.initial_error);
    println!(
        "identity checks: recompute {:.3e}  error dynamics {:.3e}",
        summary.recompute_defect, summary.error_dynamics_defect
    );
    for e in &fit.edges {
        let alpha = e.alpha.map_or("undefined".to_string(), |a| format!("{a:.6}"));
        println!(
            "  edge ({},{}): C = {:.6}  alpha = {}  beta = {:.6}",
            e.from + 1,
            e.to + 1,
            e.c,
            alpha,
            e.beta
        );
    }
    println!(
        "envelope: {}{}  max violation {:.3e}  tolerance {:.3e}",
        if fit.pass { "PASS" } else { "FAIL" },
        if fit.degenerate { " (vacuous)" } else { "" },
        fit.max_violation,
        fit.tolerance
    );
    Ok(SimulationOutcome {
        envelope_pass: fit.pass,
        max_error_norm: summary.max_error_norm,
    })
}

fn cmd_simulate(
    ctx: &Context,
    path: &Path,
    controller: Option<&Path>,
    strategy: StrategyArg,
    raw_signals: &[String],
    init: InitialCondition,
    svg: bool,
) -> Result<i32, CliError> {
    let (spec, decomp) = prepare(load_spec(path)?)?;
    let ctrl = match controller {
        Some(file) => ControllerSet::load(file).map_err(CliError::input)?,
        None => {
            let report = run_check(ctx, &spec, &decomp)?;
            if !report.is_stable() {
                println!("formation is unstable; nothing to synthesize");
                return Ok(EXIT_UNSTABLE);
            }
            build_controller(ctx, &spec, &decomp, &report, strategy)?
        }
    };
    let signals = parse_signals(raw_signals, decomp.l0(), spec.m)?;
    let mut rng = ctx.rng();
    let x0 = match init {
        InitialCondition::Explicit(text) => parse_states(&text, spec.len(), spec.n)?,
        InitialCondition::Ideal => ideal_initial_states(&decomp, &random_vector(&mut rng, spec.n)),
        InitialCondition::Random => (0..spec.len()).map(|_| random_vector(&mut rng, spec.n)).collect(),
    };
    let outcome = simulate_and_report(ctx, &spec, &decomp, &ctrl, &signals, &x0, svg, "")?;
    Ok(if outcome.envelope_pass { EXIT_OK } else { EXIT_ENVELOPE })
}

fn cmd_pairwise(ctx: &Context, path: &Path) -> Result<i32, CliError> {
    let (spec, decomp) = prepare(load_spec(path)?)?;
    let cmp = cross_compare(&spec, &decomp, &ctx.config.tolerances).map_err(CliError::input)?;
    ctx.write("pairwise.json", to_json(&cmp).as_bytes())?;
    let table = cmp.pairs.to_table();
    ctx.write("pairwise.txt", table.as_bytes())?;
    print!("{table}");
    println!("formation: {}  class: {}", cmp.formation, cmp.class);
    Ok(verdict_code(cmp.pairs.all_stable))
}

/// `D_i` written as the sum of edge displacements along the parent chain.
fn offset_expression(decomp: &LevelDecomposition, i: usize) -> Vec<String> {
    decomp
        .parent_chain(i)
        .windows(2)
        .map(|w| format!("d_{}{}", w[0] + 1, w[1] + 1))
        .collect()
}

fn displacement_condition(decomp: &LevelDecomposition, i: usize, j: usize) -> String {
    let lhs = format!("d_{}{}", i + 1, j + 1);
    let di = offset_expression(decomp, i).join(" + ");
    let dj = offset_expression(decomp, j);
    if dj.is_empty() {
        format!("{lhs} = {di}")
    } else {
        format!("{lhs} = {di} - ({})", dj.join(" + "))
    }
}

fn cmd_demo(ctx: &Context, name: &str) -> Result<i32, CliError> {
    let demo = corpus::demo(name).ok_or_else(|| {
        CliError::Input(format!("unknown demo `{name}`; choose one of {}", corpus::DEMO_NAMES.join(", ")))
    })?;
    let (spec, decomp) = prepare(demo.spec.clone())?;
    let tol = &ctx.config.tolerances;
    println!("demo {}: {}", demo.name, demo.summary);

    let report = run_check(ctx, &spec, &decomp)?;
    let cmp = cross_compare(&spec, &decomp, tol).map_err(CliError::input)?;
    ctx.write(&format!("{name}.json"), spec.to_json().as_bytes())?;
    ctx.write(&format!("{name}-criterion.json"), report.to_json().as_bytes())?;
    ctx.write(&format!("{name}-pairwise.json"), to_json(&cmp).as_bytes())?;
    print!("{}", report.to_table());
    println!();
    print!("{}", cmp.pairs.to_table());

    let mut mismatches = Vec::new();
    println!();
    println!("formation verdict: {} (expected {})", report.overall, demo.verdict);
    if report.overall != demo.verdict {
        mismatches.push("formation verdict".to_string());
    }
    let unstable: Vec<(usize, usize)> = cmp.unstable_pairs.iter().map(|&(i, j)| (i + 1, j + 1)).collect();
    for &(i, j) in &unstable {
        println!("pair ({i},{j}): unstable");
    }
    if unstable != demo.unstable_pairs {
        mismatches.push("unstable pairs".to_string());
    }
    let inconsistent: Vec<(usize, usize)> = report
        .condition3
        .entries
        .iter()
        .filter(|e| !e.pass)
        .map(|e| (e.from + 1, e.to + 1))
        .collect();
    for e in report.condition3.entries.iter().filter(|e| !e.pass) {
        println!("condition {} violated", displacement_condition(&decomp, e.from, e.to));
    }
    if inconsistent != demo.inconsistent_edges {
        mismatches.push("displacement defects".to_string());
    }
    println!("pairwise class: {} (expected {})", cmp.class, demo.pair_class);
    if cmp.class != demo.pair_class {
        mismatches.push("pairwise class".to_string());
    }

    if report.is_stable() {
        let ctrl = build_controller(ctx, &spec, &decomp, &report, StrategyArg::ParentOnly)?;
        println!();
        print!("{}", describe_controller(&ctrl));
        let mut rng = ctx.rng();
        let x0 = random_vector(&mut rng, spec.n);
        let ideal = ideal_initial_states(&decomp, &x0);
        let zero = vec![LeaderSignal::Zero; decomp.l0()];
        println!("ideal start:");
        let out = simulate_and_report(ctx, &spec, &decomp, &ctrl, &zero, &ideal, false, &format!("{name}-ideal-"))?;
        if out.max_error_norm > 1e-9 * (1.0 + x0.norm()) {
            mismatches.push("ideal trajectory".to_string());
        }
        println!("random start:");
        let x0: Vec<DVector<f64>> = (0..spec.len()).map(|_| random_vector(&mut rng, spec.n)).collect();
        let out = simulate_and_report(ctx, &spec, &decomp, &ctrl, &zero, &x0, false, &format!("{name}-random-"))?;
        if !out.envelope_pass {
            mismatches.push("envelope".to_string());
        }
    }

    if mismatches.is_empty() {
        println!("\ndemo {name}: all outcomes as expected");
        Ok(EXIT_OK)
    } else {
        eprintln!("demo {name}: MISMATCH in {}", mismatches.join(", "));
        Ok(EXIT_INPUT)
    }
}
