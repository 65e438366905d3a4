//! Command-line front end for the reduction pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use symred::blockdiag::{block_diagonalize, check_block_diagonalization, BlockDiagonalization, TAU_BLK};
use symred::builders::{build_qap_relaxation, build_theta_prime, er_graph};
use symred::fetch::{default_cache_dir, Fetcher};
use symred::io::{
    block_diagonalization_to_file, parse_dimacs_graph, parse_partition, parse_problem, parse_qaplib,
    partition_to_file, write_block_diagonalization, write_partition, write_problem,
};
use symred::reduce::{certify_admissible, reduce, ReduceOptions, CERT_TOL, DEFAULT_DIGITS, DEFAULT_REPEATS};
use symred::sdpa::write_sdpa;
use symred::{assemble_reduced, solve, ConicProblem, Error, Partition, SolveOptions, Status};

#[derive(Parser)]
#[command(name = "symred", version, about = "Symmetry reduction for doubly nonnegative SDPs")]
struct Cli {
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// A problem file (JSON), a QAPLib instance, a DIMACS graph (ϑ′), or `--er q`.
#[derive(Args)]
struct Input {
    problem: Option<PathBuf>,
    /// Use ϑ′ of the polarity graph ER(q).
    #[arg(long, value_name = "Q", conflicts_with = "problem")]
    er: Option<u64>,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long, default_value_t = DEFAULT_DIGITS)]
    digits: u32,
    #[arg(long, default_value_t = DEFAULT_REPEATS)]
    repeats: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Find and certify the optimal admissible partition.
    Reduce {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        opts: ReduceArgs,
        /// Write the partition JSON here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Block-diagonalize the algebra of a partition.
    Blockdiag {
        #[command(flatten)]
        input: Input,
        /// Partition JSON; computed by `reduce` when omitted.
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Allow complex blocks when no real decomposition exists.
        #[arg(long)]
        complex: bool,
        /// Random samples for the eigenvalue equivalence check.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[command(flatten)]
        opts: ReduceArgs,
        /// Write the decomposition JSON here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Reduce, block-diagonalize and solve.
    Solve {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        /// Write the reduced problem in SDPA sparse format instead of only solving.
        #[arg(long, value_name = "PATH")]
        export_sdpa: Option<PathBuf>,
        #[arg(long)]
        complex: bool,
        #[command(flatten)]
        opts: ReduceArgs,
    },
    /// Write the ϑ′ problem of a DIMACS graph or of ER(q).
    ThetaPrime {
        graph: Option<PathBuf>,
        #[arg(long, value_name = "Q", conflicts_with = "graph")]
        er: Option<u64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the QAP relaxation of a QAPLib instance.
    Qap {
        instance: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Download QAPLib instances into the cache.
    Fetch {
        #[arg(required = true)]
        names: Vec<String>,
        #[arg(long)]
        offline: bool,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        /// Use this base URL instead of the manifest mirrors.
        #[arg(long)]
        url_base: Option<String>,
    },
}

/// Exit codes per stage.
mod code {
    pub const INPUT: u8 = 2;
    pub const REDUCE: u8 = 3;
    pub const BLOCKDIAG: u8 = 4;
    pub const SOLVE: u8 = 5;
    pub const FETCH: u8 = 6;
    pub const IO: u8 = 7;
}

struct Failure {
    code: u8,
    err: String,
}

type Outcome<T> = std::result::Result<T, Failure>;

fn at(code: u8) -> impl Fn(Error) -> Failure {
    move |e| Failure { code, err: e.to_string() }
}

fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure {
        code: code::INPUT,
        err: format!("{}: {e}", path.display()),
    })
}

fn write_text(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure {
        code: code::IO,
        err: format!("{}: {e}", path.display()),
    })
}

/// Detects the file kind from its content: `{` starts a problem JSON, `p` or
/// `c` lines a DIMACS graph, anything else a QAPLib instance.
fn load_problem(input: &Input) -> Outcome<(String, ConicProblem)> {
    let bad = at(code::INPUT);
    if let Some(q) = input.er {
        let g = er_graph(q).map_err(&bad)?;
        return Ok((format!("ER({q})"), build_theta_prime(&g).map_err(&bad)?));
    }
    let Some(path) = &input.problem else {
        return Err(Failure {
            code: code::INPUT,
            err: "give a problem file or --er q".into(),
        });
    };
    let name = path
        .file_stem()
        .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
    let text = read_text(path)?;
    let head = text.trim_start();
    let problem = if head.starts_with('{') {
        parse_problem(&text).map_err(&bad)?
    } else if head.starts_with('p') || head.starts_with('c') {
        build_theta_prime(&parse_dimacs_graph(&text).map_err(&bad)?).map_err(&bad)?
    } else {
        build_qap_relaxation(&parse_qaplib(&text).map_err(&bad)?).map_err(&bad)?
    };
    Ok((name, problem))
}

fn reduce_opts(cli: &Cli, a: &ReduceArgs) -> ReduceOptions {
    ReduceOptions {
        digits: a.digits,
        repeats: a.repeats,
        seed: cli.seed,
        ..ReduceOptions::default()
    }
}

fn blockdiag_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15))
}

fn decompose(p: &Partition, complex: bool, seed: u64) -> Outcome<BlockDiagonalization> {
    let mut rng = blockdiag_rng(seed);
    block_diagonalize(p, TAU_BLK, &mut rng, complex).map_err(at(code::BLOCKDIAG))
}

fn run(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Reduce { input, opts, output } => {
            let (name, problem) = load_problem(input)?;
            let red = reduce(&problem, &reduce_opts(cli, opts)).map_err(at(code::REDUCE))?;
            if let Some(path) = output {
                write_text(path, &write_partition(&red.partition))?;
            }
            if cli.json {
                println!(
                    "{}",
                    json!({
                        "name": name,
                        "ambient_dim": problem.ambient_dim(),
                        "n_parts": red.partition.n_parts(),
                        "dim": red.partition.dim(),
                        "iterations": red.iterations,
                        "restarts": red.restarts,
                        "certificate": red.certificate,
                        "partition": partition_to_file(&red.partition),
                    })
                );
            } else {
                println!("{name} {} {}", problem.ambient_dim(), red.partition.dim());
                println!(
                    "certificate: admissible, jordan configuration {}, max violation {:.3e}",
                    red.certificate.jordan_configuration(),
                    red.certificate.max_violation
                );
            }
            Ok(())
        }
        Command::Blockdiag {
            input,
            partition,
            complex,
            samples,
            opts,
            output,
        } => {
            let (name, problem) = load_problem(input)?;
            let p = match partition {
                Some(path) => {
                    let p = parse_partition(&read_text(path)?).map_err(at(code::INPUT))?;
                    let cert = certify_admissible(&p, &problem, CERT_TOL).map_err(at(code::REDUCE))?;
                    if !cert.admissible() {
                        return Err(Failure {
                            code: code::REDUCE,
                            err: format!("partition is not admissible: {cert:?}"),
                        });
                    }
                    p
                }
                None => reduce(&problem, &reduce_opts(cli, opts)).map_err(at(code::REDUCE))?.partition,
            };
            let bd = decompose(&p, *complex, cli.seed)?;
            let report = check_block_diagonalization(&p, &bd, *samples, TAU_BLK, &mut blockdiag_rng(cli.seed ^ 1));
            if let Some(path) = output {
                write_text(path, &write_block_diagonalization(&bd))?;
            }
            if cli.json {
                println!(
                    "{}",
                    json!({
                        "name": name,
                        "n_parts": p.n_parts(),
                        "decomposition": block_diagonalization_to_file(&bd),
                        "verification": report,
                    })
                );
            } else {
                println!("{}", bd.structure_string());
                println!(
                    "field {}, reconstruction error {:.3e}, eigenvalue deviation {:.3e} over {} samples",
                    format!("{:?}", bd.field).to_lowercase(), report.reconstruction_error, report.max_deviation, report.samples
                );
            }
            if report.passed {
                Ok(())
            } else {
                Err(Failure {
                    code: code::BLOCKDIAG,
                    err: "decomposition failed verification".into(),
                })
            }
        }
        Command::Solve {
            input,
            eps,
            export_sdpa,
            complex,
            opts,
        } => {
            let (name, problem) = load_problem(input)?;
            let red = reduce(&problem, &reduce_opts(cli, opts)).map_err(at(code::REDUCE))?;
            let bd = decompose(&red.partition, *complex, cli.seed)?;
            let rp = assemble_reduced(&problem, &red.partition, &bd).map_err(at(code::SOLVE))?;
            if let Some(path) = export_sdpa {
                write_text(path, &write_sdpa(&rp).map_err(at(code::SOLVE))?)?;
            }
            let sopts = SolveOptions {
                eps: *eps,
                ..SolveOptions::default()
            };
            let sol = solve(&rp, &sopts).map_err(at(code::SOLVE))?;
            if cli.json {
                println!(
                    "{}",
                    json!({
                        "name": name,
                        "dim": red.partition.dim(),
                        "structure": bd.structure_string(),
                        "solution": sol,
                    })
                );
            } else {
                println!("{name}: dimension {}, blocks {}", red.partition.dim(), bd.structure_string());
                println!("objective {:.6}", sol.objective);
                println!(
                    "status {}, feasibility residual {:.3e}, min block eigenvalue {:.3e}",
                    sol.status, sol.feas_residual, sol.min_block_eig
                );
            }
            if sol.status == Status::Optimal {
                Ok(())
            } else {
                Err(Failure {
                    code: code::SOLVE,
                    err: format!("solver finished with status {}", sol.status),
                })
            }
        }
        Command::ThetaPrime { graph, er, output } => {
            let input = Input {
                problem: graph.clone(),
                er: *er,
            };
            if input.er.is_none() {
                let Some(path) = &input.problem else {
                    return Err(Failure {
                        code: code::INPUT,
                        err: "give a DIMACS graph file or --er q".into(),
                    });
                };
                let g = parse_dimacs_graph(&read_text(path)?).map_err(at(code::INPUT))?;
                return emit_problem(&build_theta_prime(&g).map_err(at(code::INPUT))?, output.as_deref());
            }
            let (_, problem) = load_problem(&input)?;
            emit_problem(&problem, output.as_deref())
        }
        Command::Qap { instance, output } => {
            let inst = parse_qaplib(&read_text(instance)?).map_err(at(code::INPUT))?;
            emit_problem(&build_qap_relaxation(&inst).map_err(at(code::INPUT))?, output.as_deref())
        }
        Command::Fetch {
            names,
            offline,
            cache_dir,
            url_base,
        } => {
            let mut f = Fetcher::new(cache_dir.clone().unwrap_or_else(default_cache_dir));
            f.offline = *offline;
            f.url_base = url_base.clone();
            for name in names {
                let path = f.fetch(name).map_err(at(code::FETCH))?;
                if cli.json {
                    println!("{}", json!({ "name": name, "path": path }));
                } else {
                    println!("{name} {}", path.display());
                }
            }
            Ok(())
        }
    }
}

fn emit_problem(problem: &ConicProblem, output: Option<&Path>) -> Outcome<()> {
    let text = write_problem(problem);
    match output {
        Some(path) => write_text(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.err);
            ExitCode::from(f.code)
        }
    }
}
