use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use expalign::benchmarks::{self, BenchmarkInstance};
use expalign::formulation::build_query_lp;
use expalign::harness::{self, Method, RunRecord, SuiteConfig};
use expalign::ird::{DEFAULT_REWARD_HIGH, DEFAULT_REWARD_LOW};
use expalign::query::{GroundTruthOracle, InteractiveOracle, Oracle};
use expalign::simplex::{write_mps, MpsOptions};
use expalign::{Family, FormulationParams, PlanningFunction, SessionStatus};
use expalign_service::{AppState, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "expalign",
    version,
    about = "Detect and repair reward misspecification by querying the user"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a grid benchmark instance.
    Gen {
        #[arg(long)]
        family: Family,
        /// Grid size as WxH.
        #[arg(long, value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one method on one instance and print its record as JSON.
    Run {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "align")]
        method: Method,
        #[arg(long, value_enum, default_value_t = OracleKind::Truth)]
        oracle: OracleKind,
        /// `optimal` or `noisy:THRESH`.
        #[arg(long, default_value = "optimal")]
        planning: PlanningFunction,
        /// Write each round's query program as MPS into this directory.
        #[arg(long)]
        dump_lp: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_REWARD_HIGH)]
        reward_high: f64,
        #[arg(long, default_value_t = DEFAULT_REWARD_LOW, allow_hyphen_values = true)]
        reward_low: f64,
    },
    /// Run every family, size and seed of a preset with both methods.
    Suite {
        #[arg(long, value_enum, default_value_t = Preset::Table1)]
        preset: Preset,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Also print an aligned summary table.
        #[arg(long)]
        pretty: bool,
        #[arg(long, default_value = "optimal")]
        planning: PlanningFunction,
        #[arg(long, default_value_t = DEFAULT_REWARD_HIGH)]
        reward_high: f64,
        #[arg(long, default_value_t = DEFAULT_REWARD_LOW, allow_hyphen_values = true)]
        reward_low: f64,
    },
    /// Answer the queries yourself at the terminal.
    Interactive {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value = "optimal")]
        planning: PlanningFunction,
    },
    /// Start the HTTP session service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        instances: Option<PathBuf>,
        /// Built UI bundle served under `/`.
        #[arg(long)]
        ui: Option<PathBuf>,
        /// Seconds before an idle session is dropped.
        #[arg(long, default_value_t = 3600)]
        idle_timeout: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    Truth,
    Interactive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Table1,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let dim = |t: &str| t.parse::<usize>().map_err(|_| format!("bad dimension `{t}` in `{s}`"));
    Ok((dim(w)?, dim(h)?))
}

fn load(path: &Path) -> Result<BenchmarkInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    benchmarks::deserialize(&text).with_context(|| format!("parsing {}", path.display()))
}

fn labels(instance: &BenchmarkInstance) -> Vec<String> {
    (0..instance.num_states())
        .map(|s| match instance.cell_of(s) {
            Some((r, c)) => format!("cell ({r},{c})"),
            None => instance.robot_domain.state_name(s).to_string(),
        })
        .collect()
}

fn dump_rounds(
    dir: &Path,
    instance: &BenchmarkInstance,
    run: &harness::AlignRun,
    params: &FormulationParams,
) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for round in run.session.rounds() {
        let lp = build_query_lp(&instance.robot_domain, &round.constraints, params);
        let name = format!("round{:03}", round.iteration);
        let text = write_mps(
            &lp.problem,
            &MpsOptions {
                name: name.clone(),
                column_labels: lp.column_labels(&instance.robot_domain),
            },
        );
        let path = dir.join(format!("{name}.mps"));
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn print_record(record: &RunRecord) -> Result<()> {
    println!("{}", serde_json::to_string(record)?);
    Ok(())
}

fn exit_for(status: &SessionStatus) -> ExitCode {
    match status {
        SessionStatus::Solved { .. } => ExitCode::SUCCESS,
        _ => ExitCode::from(2),
    }
}

fn align(
    instance: &BenchmarkInstance,
    oracle: &mut dyn Oracle,
    planning: PlanningFunction,
    dump_lp: Option<&Path>,
) -> Result<ExitCode> {
    let params = FormulationParams::default();
    let run = harness::run_align_with(instance, oracle, planning, params, harness::DEFAULT_BUDGET)?;
    if let Some(dir) = dump_lp {
        dump_rounds(dir, instance, &run, &params)?;
    }
    if run.timed_out {
        eprintln!("time budget exceeded");
    }
    print_record(&run.record)?;
    Ok(exit_for(run.session.status()))
}

fn interactive_oracle(instance: &BenchmarkInstance) -> InteractiveOracle<io::StdinLock<'static>, io::Stderr> {
    InteractiveOracle::new(io::stdin().lock(), io::stderr(), labels(instance))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen {
            family,
            size: (w, h),
            seed,
            out,
        } => {
            let instance = benchmarks::generate(family, w, h, seed)?;
            std::fs::write(&out, benchmarks::serialize(&instance))
                .with_context(|| format!("writing {}", out.display()))?;
            eprintln!("{} states -> {}", instance.num_states(), out.display());
        }
        Command::Run {
            instance,
            method,
            oracle,
            planning,
            dump_lp,
            reward_high,
            reward_low,
        } => {
            let instance = load(&instance)?;
            match method {
                Method::Align => {
                    return match oracle {
                        OracleKind::Truth => {
                            let mut o = GroundTruthOracle::new(&instance.ground_truth);
                            align(&instance, &mut o, planning, dump_lp.as_deref())
                        }
                        OracleKind::Interactive => {
                            let mut o = interactive_oracle(&instance);
                            align(&instance, &mut o, planning, dump_lp.as_deref())
                        }
                    };
                }
                Method::Ird => {
                    let params = FormulationParams::default();
                    let record = harness::run_ird_record(&instance, planning, params, reward_high, reward_low)?;
                    print_record(&record)?;
                }
            }
        }
        Command::Suite {
            preset: Preset::Table1,
            out,
            jobs,
            pretty,
            planning,
            reward_high,
            reward_low,
        } => {
            let config = SuiteConfig {
                jobs,
                planning,
                reward_high,
                reward_low,
                ..SuiteConfig::table1()
            };
            let result = harness::run_suite(&config)?;
            let summary = harness::write_reports(&result.records, &out)?;
            for name in &result.timed_out {
                eprintln!("timed out: {name}");
            }
            if pretty {
                print!("{}", harness::pretty_table(&summary));
            }
            eprintln!("{} runs -> {}", result.records.len(), out.display());
        }
        Command::Interactive { instance, planning } => {
            let instance = load(&instance)?;
            let mut oracle = interactive_oracle(&instance);
            let run = harness::run_align_with(
                &instance,
                &mut oracle,
                planning,
                FormulationParams::default(),
                harness::DEFAULT_BUDGET,
            )?;
            let mut err = io::stderr().lock();
            writeln!(err, "status: {}", run.session.status())?;
            if let SessionStatus::Solved { policy, .. } = run.session.status() {
                let d = &instance.robot_domain;
                for (s, label) in labels(&instance).iter().enumerate() {
                    writeln!(err, "  {label}: {}", d.action_name(policy.action(s)))?;
                }
            }
            print_record(&run.record)?;
            return Ok(exit_for(run.session.status()));
        }
        Command::Serve {
            port,
            instances,
            ui,
            idle_timeout,
        } => {
            let state = AppState::new(ServiceConfig {
                idle_timeout: Duration::from_secs(idle_timeout),
                ui_dir: ui,
                ..Default::default()
            });
            state.load_builtin();
            if let Some(dir) = &instances {
                let n = state.load_dir(dir)?;
                eprintln!("loaded {n} instances from {}", dir.display());
            }
            let addr = SocketAddr::from(([0, 0, 0, 0], port));
            eprintln!("listening on {addr}");
            tokio::runtime::Runtime::new()?.block_on(expalign_service::serve(state, addr))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
