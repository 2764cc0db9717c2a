//! `qrat`: QRE, rationalization bounds, marginal graphs and agent
//! simulations for games described in JSON files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qrat::gamefile::{self, GameFileError};
use qrat::numfmt::fmt_sig;
use qrat::population::{simulate, test_observed, BeliefMode, SimulationConfig, DEFAULT_Z};
use qrat::qre::{
    find_equilibria, residual, solve_fixed_point, QreResult, SolverOptions, DEFAULT_GRID,
};
use qrat::rationalization::{run_procedure, ProcedureOptions};
use qrat::structure::{marginal_graph, prop3_check, theorem2_report, Prop3Outcome, RELAXED_NOTICE};
use qrat::{Error, Integration, MixedProfile, PopulationGame, StaticGame};

const EXIT_PARSE: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;
const EXIT_UNSUPPORTED: u8 = 4;

/// Residual below which a rationalization limit counts as a QRE.
const LIMIT_QRE_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "qrat",
    version,
    about = "Quantal response equilibria and rationalization bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for quantal response equilibria.
    Qre {
        file: PathBuf,
        /// Grid cells for 2×2 enumeration.
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        /// List every equilibrium found (complete for 2×2 games).
        #[arg(long)]
        all: bool,
    },
    /// Run the rationalization procedure and report its limit.
    Rationalize {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
        /// Write the bound trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Classify actions through the marginal-action graph.
    Graph {
        file: PathBuf,
        /// Write the graph in DOT format.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_GRID)]
        grid: usize,
    },
    /// Simulate agents best-responding to a belief and test the result.
    Simulate {
        file: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        agents: usize,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Belief::Qre)]
        belief: Belief,
        /// Write the per-round trace as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Belief {
    Qre,
    Uniform,
    Lag,
}

struct Failure {
    code: u8,
    message: String,
}

impl From<GameFileError> for Failure {
    fn from(e: GameFileError) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Unsupported(_) => EXIT_UNSUPPORTED,
            Error::InvalidArgument(_) => EXIT_PARSE,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("QRE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if n > 0 {
            // Only fails if a pool already exists, which cannot happen here.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
    }
    let outcome = match cli.command {
        Command::Qre {
            file,
            grid,
            tol,
            damping,
            max_iter,
            all,
        } => cmd_qre(&file, grid, tol, damping, max_iter, all),
        Command::Rationalize {
            file,
            tol,
            max_iter,
            csv,
        } => cmd_rationalize(&file, tol, max_iter, csv.as_deref()),
        Command::Graph { file, dot, grid } => cmd_graph(&file, dot.as_deref(), grid),
        Command::Simulate {
            file,
            agents,
            rounds,
            seed,
            belief,
            csv,
        } => cmd_simulate(&file, agents, rounds, seed, belief, csv.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qrat: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn label(game: &StaticGame, i: usize, a: usize) -> String {
    format!("{}{}", game.actions(i)[a], i + 1)
}

fn print_profile(game: &StaticGame, p: &MixedProfile) {
    println!("player\taction\tprobability");
    for i in 0..game.num_players() {
        for (a, name) in game.actions(i).iter().enumerate() {
            println!(
                "{}\t{}\t{}",
                game.player_name(i),
                name,
                fmt_sig(p.player(i)[a])
            );
        }
    }
}

fn print_qre(game: &StaticGame, k: usize, r: &QreResult) {
    println!("QRE {k}: residual {}", fmt_sig(r.residual));
    print_profile(game, &r.profile);
}

fn cmd_qre(
    file: &Path,
    grid: usize,
    tol: f64,
    damping: f64,
    max_iter: usize,
    all: bool,
) -> CmdResult {
    let pg = gamefile::load(file)?;
    let game = pg.game();
    let opts = SolverOptions {
        damping,
        tol,
        max_iter,
        ..SolverOptions::default()
    };
    if all {
        let set = find_equilibria(&pg, grid, &opts)?;
        println!(
            "{} equilibria ({})",
            set.equilibria.len(),
            if set.complete {
                "complete"
            } else {
                "multistart search, may be incomplete"
            }
        );
        for (k, r) in set.equilibria.iter().enumerate() {
            print_qre(game, k + 1, r);
        }
        return Ok(0);
    }
    let r = solve_fixed_point(&pg, &MixedProfile::uniform(game), &opts)?;
    print_qre(game, 1, &r);
    if r.converged {
        Ok(0)
    } else {
        eprintln!("qrat: no convergence after {} iterations", r.iterations);
        Ok(EXIT_NO_CONVERGENCE)
    }
}

/// Whether the limit bounds, read as a profile, are a QRE.
fn limit_summary(pg: &PopulationGame, limit: &[Vec<f64>]) -> Result<String, Error> {
    let short = limit
        .iter()
        .any(|q| q.iter().sum::<f64>() < 1.0 - LIMIT_QRE_TOL);
    if short {
        return Ok("limit is NOT a QRE (per-player bound sums < 1)".into());
    }
    let normalized = limit
        .iter()
        .map(|q| {
            let s: f64 = q.iter().sum();
            q.iter().map(|x| x / s).collect()
        })
        .collect();
    let profile = MixedProfile::new(normalized)?;
    let res = residual(pg, &profile, Integration::Exact)?;
    Ok(if res <= LIMIT_QRE_TOL {
        "limit is a QRE".into()
    } else {
        format!("limit is NOT a QRE (residual {})", fmt_sig(res))
    })
}

fn cmd_rationalize(file: &Path, tol: f64, max_iter: usize, csv: Option<&Path>) -> CmdResult {
    let pg = gamefile::load(file)?;
    let game = pg.game();
    let opts = ProcedureOptions {
        tol,
        max_iter,
        ..ProcedureOptions::default()
    };
    let trace = run_procedure(&pg, &opts)?;
    if let Some(path) = csv {
        let f = File::create(path).map_err(|e| io_failure(path, e))?;
        trace
            .write_csv(game, BufWriter::new(f))
            .map_err(|e| io_failure(path, e))?;
    }
    let limit = trace.limit();
    println!("steps: {}", trace.num_steps());
    println!("player\taction\tbound");
    for i in 0..game.num_players() {
        for (a, name) in game.actions(i).iter().enumerate() {
            println!(
                "{}\t{}\t{}",
                game.player_name(i),
                name,
                fmt_sig(limit.get(i, a))
            );
        }
    }
    for i in 0..game.num_players() {
        println!(
            "sum for player {}: {}",
            game.player_name(i),
            fmt_sig(limit.player_sum(i))
        );
    }
    println!("{}", limit_summary(&pg, limit.as_slices())?);
    if trace.converged {
        Ok(0)
    } else {
        eprintln!(
            "qrat: bounds still moving by {} after {} steps",
            fmt_sig(trace.sup_step),
            trace.num_steps()
        );
        Ok(EXIT_NO_CONVERGENCE)
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_graph(file: &Path, dot: Option<&Path>, grid: usize) -> CmdResult {
    let pg = gamefile::load(file)?;
    let game = pg.game();
    if game.num_players() != 2 {
        return Err(Failure {
            code: EXIT_UNSUPPORTED,
            message: format!(
                "graph analysis needs two players, got {}; with more players the conditions are relaxed criteria only",
                game.num_players()
            ),
        });
    }
    let graph = marginal_graph(game)?;
    let report = theorem2_report(&pg, grid)?;
    if report.relaxed_only {
        println!("note: {RELAXED_NOTICE}");
    }
    println!("action\tnon_serial\teventually_non_serial\tC1\tC2\tC2'\tverdict");
    for (c, (_, verdict)) in report.classification.nodes.iter().zip(&report.verdicts) {
        println!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            label(game, c.node.player, c.node.action),
            flag(c.non_serial),
            flag(c.eventually_non_serial),
            flag(c.c1),
            flag(c.c2),
            flag(c.c2_prime),
            verdict
        );
    }
    println!(
        "game is {}",
        if report.classification.serial {
            "serial"
        } else {
            "not serial"
        }
    );
    if let Some(k) = report.qre_count {
        println!("QREs found: {k}");
    }
    match prop3_check(game)? {
        Prop3Outcome::Holds => println!("no action satisfies C2"),
        Prop3Outcome::Counterexample(n) => {
            println!(
                "C2 holds for {} in a serial game",
                label(game, n.player, n.action)
            )
        }
        Prop3Outcome::Inapplicable(_) => {
            if report.classification.nodes.iter().all(|c| !c.c2) {
                println!("no action satisfies C2");
            }
        }
    }
    println!("edges:");
    for (from, to) in graph.edges() {
        println!(
            "{} -> {}",
            label(game, from.player, from.action),
            label(game, to.player, to.action)
        );
    }
    if let Some(path) = dot {
        std::fs::write(path, graph.to_dot(game)).map_err(|e| io_failure(path, e))?;
    }
    Ok(0)
}

fn qre_belief(pg: &PopulationGame) -> Result<MixedProfile, Failure> {
    let opts = SolverOptions::default();
    let found = if pg.game().is_two_by_two() {
        find_equilibria(pg, DEFAULT_GRID, &opts)?
            .equilibria
            .into_iter()
            .next()
    } else {
        Some(solve_fixed_point(
            pg,
            &MixedProfile::uniform(pg.game()),
            &opts,
        )?)
    };
    match found {
        Some(r) if r.converged => Ok(r.profile),
        _ => Err(Failure {
            code: EXIT_NO_CONVERGENCE,
            message: "no QRE found to use as the belief".into(),
        }),
    }
}

fn cmd_simulate(
    file: &Path,
    agents: usize,
    rounds: usize,
    seed: u64,
    belief: Belief,
    csv: Option<&Path>,
) -> CmdResult {
    let pg = gamefile::load(file)?;
    let game = pg.game();
    let belief_mode = match belief {
        Belief::Qre => BeliefMode::Fixed(qre_belief(&pg)?),
        Belief::Uniform => BeliefMode::Fixed(MixedProfile::uniform(game)),
        Belief::Lag => BeliefMode::EmpiricalLag {
            initial: MixedProfile::uniform(game),
        },
    };
    let config = SimulationConfig {
        agents_per_round: agents,
        rounds,
        seed,
        belief_mode,
    };
    let trace = simulate(&pg, &config)?;
    if let Some(path) = csv {
        let f = File::create(path).map_err(|e| io_failure(path, e))?;
        trace
            .write_csv(game, BufWriter::new(f))
            .map_err(|e| io_failure(path, e))?;
    }
    let proc = run_procedure(&pg, &ProcedureOptions::default())?;
    if !proc.converged {
        return Err(Failure {
            code: EXIT_NO_CONVERGENCE,
            message: "rationalization bounds did not converge".into(),
        });
    }
    let checks = test_observed(&trace, &proc, DEFAULT_Z)?;
    let last = trace.last();
    println!("player\taction\tfinal_round\tround_average\tbound");
    for i in 0..game.num_players() {
        for (a, name) in game.actions(i).iter().enumerate() {
            println!(
                "{}\t{}\t{}\t{}\t{}",
                game.player_name(i),
                name,
                fmt_sig(last.frequencies.player(i)[a]),
                fmt_sig(last.cumulative.player(i)[a]),
                fmt_sig(proc.limit().get(i, a))
            );
        }
    }
    let failed: Vec<usize> = checks.iter().filter(|c| !c.pass).map(|c| c.round).collect();
    if failed.is_empty() {
        println!("bounds check: PASS");
    } else {
        let first = &checks[failed[0] - 1];
        let v = first
            .verdicts
            .iter()
            .find(|v| !v.pass)
            .expect("a failing round has a failing player");
        println!(
            "bounds check: FAIL ({} of {} rounds; first in round {}: {} observed {} below bound {})",
            failed.len(),
            checks.len(),
            first.round,
            label(game, v.player, v.binding_action),
            fmt_sig(v.observed),
            fmt_sig(v.bound)
        );
    }
    Ok(0)
}
