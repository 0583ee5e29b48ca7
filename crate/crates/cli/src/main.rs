use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use revealplan_core::sim::{write_report_csv, write_study_csv};
use revealplan_core::verify::{
    default_full_solver, faulty_exploit_solver, lemma_structure_with, oracle_equivalence_with,
    random_small_spec, FullSolution, LemmaConfig, VerifyConfig,
};
use revealplan_core::{
    load_spec, no_learning_path, preset, simulate, study, Game, GameSpec, LeaderPolicy, Model,
    Observability, Planner, PlannerKind, SimConfig, StudyConfig,
};
use serde::Serialize;

type Fallible<T = ()> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(
    name = "revealplan",
    version,
    about = "Plan, simulate and verify leader-follower reveal games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a game and print the plan along the no-learning branch.
    Solve(SolveArgs),
    /// Cross-check the planners against the brute-force oracle.
    Verify(VerifyArgs),
    /// Simulate a planner against partially adapting followers.
    Simulate(SimulateArgs),
    /// Compare both planners over a horizon sweep on random games.
    Study(StudyArgs),
    /// Run the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    JsonLines,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Baseline {
    Complete,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Fault {
    /// Commit to the worst row after a reveal.
    Exploit,
}

#[derive(Args)]
struct GameArgs {
    /// Bundled game, e.g. table-clearing.
    #[arg(long, conflicts_with = "spec")]
    preset: Option<String>,
    /// Game spec JSON file.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    model: Option<Model>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    horizon: Option<usize>,
}

impl GameArgs {
    fn game(&self) -> Fallible<Game> {
        let mut spec: GameSpec = match (&self.preset, &self.spec) {
            (Some(name), None) => preset(name)?,
            (None, Some(path)) => load_spec(
                &std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {e}", path.display()))?,
            )?,
            _ => return Err("give --preset or --spec".into()),
        };
        if let Some(model) = self.model {
            spec.model = model;
        }
        if let Some(alpha) = self.alpha {
            spec.alpha = alpha;
        }
        if let Some(horizon) = self.horizon {
            spec.horizon = horizon;
        }
        Ok(Game::new(spec)?)
    }
}

#[derive(Args)]
struct PlannerArgs {
    #[arg(long, conflicts_with = "baseline")]
    planner: Option<PlannerKind>,
    /// Same as `--planner complete`.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Complete baseline that only sees the follower's responses.
    #[arg(long, conflicts_with = "full_obs")]
    partial_obs: bool,
    /// Complete baseline that is told whether the follower learned.
    #[arg(long)]
    full_obs: bool,
}

impl PlannerArgs {
    fn build(&self, game: &Game) -> Fallible<Planner> {
        let kind = match (self.planner, self.baseline) {
            (_, Some(Baseline::Complete)) => PlannerKind::Complete,
            (Some(kind), None) => kind,
            (None, None) => PlannerKind::Partial,
        };
        let observability = if self.partial_obs {
            Observability::Partial
        } else if self.full_obs {
            Observability::Full
        } else {
            game.model().observability()
        };
        if kind == PlannerKind::Partial && observability != game.model().observability() {
            return Err(format!(
                "the partial planner uses the observability of model {}; \
                 --partial-obs and --full-obs apply to the complete baseline",
                game.model()
            )
            .into());
        }
        Ok(Planner::build_with(game, kind, observability)?)
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OutputArgs {
    fn writer(&self) -> Fallible<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(
                File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?,
            ),
            None => Box::new(io::stdout().lock()),
        })
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    planner: PlannerArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct VerifyArgs {
    /// Random instances for the oracle comparison.
    #[arg(long, default_value_t = 200)]
    instances: usize,
    /// Random instances for the commitment-structure check.
    #[arg(long, default_value_t = 500)]
    lemma_instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Swap in a broken solver to check that the suites catch it.
    #[arg(long, value_enum, hide = true)]
    inject_fault: Option<Fault>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    game: GameArgs,
    #[command(flatten)]
    planner: PlannerArgs,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep per-run trajectories (json-lines only).
    #[arg(long)]
    trajectories: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    instances: u64,
    /// Runs per instance.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated horizons.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64,128")]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    rows: usize,
    #[arg(long, default_value_t = 3)]
    columns: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ServeArgs {
    /// Overrides the port of the bind address.
    #[arg(long)]
    port: Option<u16>,
    /// Session database file. Sessions are kept in memory without one.
    #[arg(long)]
    data: Option<PathBuf>,
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

#[derive(Serialize)]
struct SolveOutput {
    model: Model,
    planner: PlannerKind,
    observability: Observability,
    first_action: usize,
    first_action_label: String,
    value: f64,
    plan: Vec<usize>,
    plan_labels: Vec<String>,
    predicted_rewards: Vec<f64>,
}

fn cmd_solve(args: SolveArgs) -> Fallible {
    let game = args.game.game()?;
    let planner = args.planner.build(&game)?;
    let plan = no_learning_path(&planner, &game);
    let labels: Vec<String> = plan
        .iter()
        .map(|&r| game.row_label(r).to_string())
        .collect();
    let out = SolveOutput {
        model: game.model(),
        planner: planner.kind(),
        observability: planner.observability(),
        first_action: plan[0],
        first_action_label: labels[0].clone(),
        value: planner.value(),
        plan,
        plan_labels: labels.clone(),
        predicted_rewards: planner.predicted_rewards(),
    };
    let mut w = args.output.writer()?;
    match args.output.format {
        Some(Format::JsonLines) => writeln!(w, "{}", serde_json::to_string(&out)?)?,
        Some(Format::Csv) => {
            writeln!(w, "round,action,label,predicted_reward")?;
            for (t, (row, r)) in out.plan.iter().zip(&out.predicted_rewards).enumerate() {
                writeln!(w, "{},{row},{},{r}", t + 1, labels[t])?;
            }
        }
        None => {
            let rest = if labels.len() > 1 {
                format!(" then {}", labels[1..].join(", "))
            } else {
                String::new()
            };
            writeln!(w, "{}{rest}; value {}", labels[0], fmt_num(out.value))?;
            writeln!(
                w,
                "model {}, planner {}, {} observability",
                out.model,
                out.planner,
                match out.observability {
                    Observability::Full => "full",
                    Observability::Partial => "partial",
                }
            )?;
            let predicted: Vec<String> =
                out.predicted_rewards.iter().map(|&r| fmt_num(r)).collect();
            writeln!(w, "predicted reward per round: {}", predicted.join(", "))?;
        }
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Fallible<bool> {
    let solver: &(dyn Fn(&Game) -> revealplan_core::Result<FullSolution> + Sync) =
        match args.inject_fault {
            Some(Fault::Exploit) => &faulty_exploit_solver,
            None => &default_full_solver,
        };
    let config = VerifyConfig {
        instances: args.instances,
        seed: args.seed,
        tolerance: args.tolerance,
    };
    let mut stdout = io::stdout().lock();
    if args.instances <= 10 {
        for i in 0..args.instances {
            let seed = config.instance_seed(i);
            let spec = random_small_spec(seed);
            writeln!(
                stdout,
                "instance {seed}: {}x{}, T={}, alpha={}, rewards {:?}, beliefs {:?}",
                spec.rows(),
                spec.columns(),
                spec.horizon,
                spec.alpha,
                spec.rewards,
                spec.belief_best_response
            )?;
        }
    }
    let report = oracle_equivalence_with(&config, solver);
    let lemma = lemma_structure_with(
        &LemmaConfig {
            instances: args.lemma_instances,
            seed: args.seed,
            tolerance: args.tolerance,
            ..LemmaConfig::default()
        },
        solver,
    );
    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    let equivalence: Vec<_> = report.equivalence_failures().collect();
    let monotone: Vec<_> = report.monotonicity_failures().collect();
    writeln!(
        stdout,
        "oracle equivalence: {} ({} instances, seed {}, max |delta| {:.2e})",
        verdict(equivalence.is_empty()),
        report.instances,
        args.seed,
        report.max_deviation
    )?;
    writeln!(
        stdout,
        "information monotonicity: {}",
        verdict(monotone.is_empty())
    )?;
    writeln!(
        stdout,
        "lemma structure: {} ({} instances, {} states)",
        verdict(lemma.passed()),
        lemma.instances,
        lemma.states_checked
    )?;
    let failures: Vec<_> = report.failures.iter().chain(&lemma.violations).collect();
    const SHOWN: usize = 20;
    for f in failures.iter().take(SHOWN) {
        let model = f.model.map(|m| format!(" {m}")).unwrap_or_default();
        writeln!(stdout, "  seed {}{model}: {}", f.seed, f.what)?;
    }
    if failures.len() > SHOWN {
        writeln!(stdout, "  ... {} more", failures.len() - SHOWN)?;
    }
    if failures.is_empty() {
        writeln!(stdout, "PASS, max |Δ| < {:e}", args.tolerance)?;
        Ok(true)
    } else {
        let mut seeds: Vec<u64> = failures.iter().map(|f| f.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
        writeln!(
            stdout,
            "FAIL, {} failures; seeds {}",
            failures.len(),
            seeds.join(", ")
        )?;
        Ok(false)
    }
}

fn cmd_simulate(args: SimulateArgs) -> Fallible {
    let game = args.game.game()?;
    let planner = args.planner.build(&game)?;
    let mut config = SimConfig::new(args.runs as usize, args.seed);
    config.keep_trajectories = args.trajectories;
    let label = planner.kind().to_string();
    let report = simulate(&game, &planner, &label, config)?;
    eprintln!(
        "{label} planner vs {} follower: total mean {} ± {} over {} runs",
        game.model(),
        fmt_num(report.total_mean),
        fmt_num(report.total_stderr),
        report.runs
    );
    let mut w = args.output.writer()?;
    match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            if args.trajectories {
                return Err("--trajectories needs --format json-lines".into());
            }
            write_report_csv(&report, &mut w)?
        }
        Format::JsonLines => writeln!(w, "{}", serde_json::to_string(&report)?)?,
    }
    Ok(())
}

fn cmd_study(args: StudyArgs) -> Fallible {
    let config = StudyConfig {
        instances: args.instances as usize,
        runs_per_instance: args.runs as usize,
        seed: args.seed,
        horizons: args.horizons,
        rows: args.rows,
        columns: args.columns,
    };
    let result = study(&config)?;
    for &t in &config.horizons {
        if let Some(gap) = result.relative_gap(t) {
            eprintln!("T={t}: partial ahead by {:.2}%", 100.0 * gap);
        }
    }
    let mut w = args.output.writer()?;
    match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => write_study_csv(&result.rows, &mut w)?,
        Format::JsonLines => {
            for row in &result.rows {
                writeln!(w, "{}", serde_json::to_string(row)?)?;
            }
        }
    }
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Fallible {
    let config = revealplan_service::ServeConfig::from_env(args.port, args.data)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(revealplan_service::serve(config))
        .map_err(|e| e.to_string())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
        Command::Study(a) => cmd_study(a).map(|_| true),
        Command::Serve(a) => cmd_serve(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
