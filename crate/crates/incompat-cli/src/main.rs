//! Command-line surface: compute robustness measures, evaluate analytic
//! bounds, search for maximally incompatible sets, and reproduce the
//! reference tables, figures and counterexamples.

mod input;
mod repro;

use clap::{Parser, Subcommand, ValueEnum};
use incompat::bounds;
use incompat::noise::NoiseModelKind;
use incompat::robustness::{solve_robustness, RobustnessResult, SolveOptions};
use incompat::search::{
    estimate_chi, figure_curves, FigureTarget, Restriction, SearchConfig, SearchRecord,
};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_PARSE: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_MISMATCH: u8 = 4;

#[derive(Parser)]
#[command(
    name = "incompat",
    about = "Robustness-based incompatibility measures of quantum measurements",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    D,
    R,
    P,
    Jm,
    G,
    All,
}

impl MeasureArg {
    fn kinds(self) -> Vec<NoiseModelKind> {
        match self {
            MeasureArg::D => vec![NoiseModelKind::Depolarising],
            MeasureArg::R => vec![NoiseModelKind::Random],
            MeasureArg::P => vec![NoiseModelKind::Probabilistic],
            MeasureArg::Jm => vec![NoiseModelKind::JointlyMeasurable],
            MeasureArg::G => vec![NoiseModelKind::Generalised],
            MeasureArg::All => NoiseModelKind::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the robustness program of a measurement set.
    Compute {
        /// Input: mub:<d> | theta:<radians> | qMUB:<d> | dev:3 | primemubs:<d>:<k> | file:<path>
        #[arg(long)]
        pair: String,
        #[arg(long, value_enum, default_value = "all")]
        measure: MeasureArg,
        /// Solver tolerance.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Omit the parent POVM and dual certificate from the output.
        #[arg(long)]
        no_certificates: bool,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate every applicable analytic bound on a measurement set.
    Bounds {
        #[arg(long)]
        pair: String,
        #[arg(long, value_enum, default_value = "all")]
        measure: MeasureArg,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomised search for the lowest visibility at a given shape.
    Search {
        #[arg(long)]
        dim: usize,
        /// Comma-separated outcome counts, e.g. 2,2 or 3,3,3.
        #[arg(long)]
        outcomes: String,
        /// Comma-separated measures to track. The random measure is skipped
        /// by default: padding with zero outcomes drives its minimum to the
        /// trivial floor, so searching it is pointless.
        #[arg(long, default_value = "d,p,jm,g")]
        measure: String,
        #[arg(long, default_value_t = 1000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// rank-one-projective | rank-one | general
        #[arg(long, default_value = "rank-one-projective")]
        restriction: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Checkpoint file, written periodically and on completion.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Resume from the checkpoint file if it exists.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Tabulate a figure curve.
    Figure {
        /// fig-runex | fig-devil | fig-chi
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 25)]
        resolution: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Re-derive a reference table, figure or counterexample and check it.
    Reproduce {
        /// One of: table-magic fig-runex fig-devil fig-chi mub-values
        /// ctrex-1..ctrex-5 triplet-qubit table-embed
        target: String,
        #[arg(long, default_value = "repro_out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

fn hermitian_json(m: &incompat::linalg::HermitianMatrix) -> serde_json::Value {
    let d = m.dim();
    let rows: Vec<Vec<[f64; 2]>> = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    let z = m.as_matrix()[(i, j)];
                    [z.re, z.im]
                })
                .collect()
        })
        .collect();
    serde_json::json!(rows)
}

fn result_json(r: &RobustnessResult, with_certificates: bool) -> serde_json::Value {
    let mut value = serde_json::json!({
        "measure": r.measure.short_name(),
        "eta": r.eta,
        "dual_objective": r.dual_objective,
        "gap": r.residuals.gap,
        "residuals": r.residuals,
        "iterations": r.iterations,
        "outcome_counts": r.outcome_counts,
    });
    if with_certificates {
        value["parent"] = serde_json::json!(r
            .parent
            .elements()
            .iter()
            .map(hermitian_json)
            .collect::<Vec<_>>());
        value["dual"] = serde_json::json!({
            "x": r.dual.x.iter().map(|row| row.iter().map(hermitian_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "n": r.dual.n.as_ref().map(hermitian_json),
            "xi": r.dual.xi,
        });
    }
    value
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| e.to_string()),
        None => {
            if text.ends_with('\n') {
                print!("{text}");
            } else {
                println!("{text}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, (u8, String)> {
    match cli.command {
        Command::Compute {
            pair,
            measure,
            tol,
            format,
            no_certificates,
            out,
        } => {
            let set = input::parse_measurement_set(&pair).map_err(|e| (EXIT_PARSE, e))?;
            let opts = SolveOptions {
                tol,
                ..Default::default()
            };
            let mut results = Vec::new();
            for kind in measure.kinds() {
                let r = solve_robustness(&set, kind, &opts)
                    .map_err(|e| (EXIT_SOLVER, e.to_string()))?;
                results.push(r);
            }
            let text = match format {
                Format::Json => {
                    let items: Vec<_> = results
                        .iter()
                        .map(|r| result_json(r, !no_certificates))
                        .collect();
                    if items.len() == 1 {
                        serde_json::to_string_pretty(&items[0]).unwrap()
                    } else {
                        serde_json::to_string_pretty(&items).unwrap()
                    }
                }
                Format::Csv => {
                    let mut text = String::from("measure,eta,dual_objective,gap\n");
                    for r in &results {
                        text.push_str(&format!(
                            "{},{:.11e},{:.11e},{:.11e}\n",
                            r.measure.short_name(),
                            r.eta,
                            r.dual_objective,
                            r.residuals.gap
                        ));
                    }
                    text
                }
            };
            emit(&out, &text).map_err(|e| (EXIT_SOLVER, e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds {
            pair,
            measure,
            format,
            out,
        } => {
            let set = input::parse_measurement_set(&pair).map_err(|e| (EXIT_PARSE, e))?;
            let reports: Vec<_> = measure
                .kinds()
                .into_iter()
                .map(|kind| bounds::bound_report(&set, kind))
                .collect();
            let text = match format {
                Format::Json => serde_json::to_string_pretty(&reports).unwrap(),
                Format::Csv => {
                    let mut text = String::from("measure,side,tag,value\n");
                    for report in &reports {
                        for b in &report.lower {
                            text.push_str(&format!(
                                "{},lower,{},{:.11e}\n",
                                report.measure, b.tag, b.value
                            ));
                        }
                        for b in &report.upper {
                            text.push_str(&format!(
                                "{},upper,{},{:.11e}\n",
                                report.measure, b.tag, b.value
                            ));
                        }
                    }
                    text
                }
            };
            emit(&out, &text).map_err(|e| (EXIT_SOLVER, e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Search {
            dim,
            outcomes,
            measure,
            samples,
            seed,
            restriction,
            workers,
            checkpoint,
            resume,
            out,
            tol,
        } => {
            let outcome_counts: Vec<usize> = outcomes
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| (EXIT_PARSE, format!("bad outcome list `{outcomes}`")))?;
            let restriction = Restriction::parse(&restriction)
                .ok_or((EXIT_PARSE, format!("bad restriction `{restriction}`")))?;
            let kinds: Vec<NoiseModelKind> = measure
                .split(',')
                .map(|t| {
                    NoiseModelKind::parse(t.trim())
                        .ok_or((EXIT_PARSE, format!("bad measure `{t}`")))
                })
                .collect::<Result<_, _>>()?;
            let mut cfg = SearchConfig::new(dim, outcome_counts, kinds);
            cfg.samples = samples;
            cfg.seed = seed;
            cfg.restriction = restriction;
            cfg.workers = workers;
            cfg.checkpoint = checkpoint.clone();
            cfg.solve = SolveOptions {
                tol,
                ..Default::default()
            };
            let previous = if resume {
                match &checkpoint {
                    Some(path) if path.exists() => {
                        Some(SearchRecord::load(path).map_err(|e| (EXIT_PARSE, e.to_string()))?)
                    }
                    _ => None,
                }
            } else {
                None
            };
            let record =
                estimate_chi(&cfg, previous).map_err(|e| (EXIT_SOLVER, e.to_string()))?;
            for (kind, best) in &record.best {
                println!(
                    "{kind}: best eta {:.10} at sample {}",
                    best.eta, best.sample_index
                );
            }
            if let Some(path) = out {
                record
                    .save(&path)
                    .map_err(|e| (EXIT_SOLVER, e.to_string()))?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Figure {
            target,
            resolution,
            out,
            tol,
        } => {
            let target = FigureTarget::parse(&target)
                .ok_or((EXIT_PARSE, format!("unknown figure target `{target}`")))?;
            let opts = SolveOptions {
                tol,
                ..Default::default()
            };
            let data =
                figure_curves(target, resolution, &opts).map_err(|e| (EXIT_SOLVER, e.to_string()))?;
            emit(&out, &data.to_csv()).map_err(|e| (EXIT_SOLVER, e))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Reproduce {
            target,
            out,
            format,
            tol,
        } => {
            let opts = SolveOptions {
                tol,
                ..Default::default()
            };
            let report = repro::run(&target, &opts).map_err(|e| (EXIT_PARSE, e))?;
            let written = report
                .write_files(&out)
                .map_err(|e| (EXIT_SOLVER, e.to_string()))?;
            let checks_path = out.join(match format {
                Format::Csv => format!("{target}_checks.csv"),
                Format::Json => format!("{target}_checks.json"),
            });
            let checks_text = match format {
                Format::Csv => report.checks_csv(),
                Format::Json => {
                    let items: Vec<serde_json::Value> = report
                        .checks
                        .iter()
                        .map(|c| serde_json::json!({"passed": c.passed()}))
                        .collect();
                    serde_json::to_string_pretty(&items).unwrap()
                }
            };
            std::fs::write(&checks_path, checks_text)
                .map_err(|e| (EXIT_SOLVER, e.to_string()))?;
            print!("{}", report.render_summary(&target));
            for file in written {
                println!("wrote {file}");
            }
            println!("wrote {}", checks_path.display());
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(EXIT_MISMATCH))
            }
        }
    }
}
