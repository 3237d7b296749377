use clap::{Parser, Subcommand, ValueEnum};
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use transship::config::{InstanceFile, StudyFile};
use transship::experiments::{
    boxplot_data, read_records, run_study, write_boxplots, write_pivots, write_records, GapPair,
};
use transship::heuristic::{EstimateOpts, Heuristic};
use transship::milp::{build_lp1, default_partitions, solve_static, BranchBound};
use transship::sdp::{bounds_diagnostic, evaluate_policy, solve_sdp1, solve_sdp2};
use transship::{Instance, State};

/// Solver suite for the two-location lot-sizing problem with proactive
/// lateral transshipment.
#[derive(Parser)]
#[command(name = "transship", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverChoice {
    Sdp1,
    Sdp2,
    Milp,
}

#[derive(Subcommand)]
enum Command {
    /// Run a study from a spec file: gap records plus pivot tables.
    Run {
        /// Study spec (TOML).
        #[arg(long)]
        study: PathBuf,
        /// Output directory for records.csv and pivots.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve a single instance with a chosen solver.
    Solve {
        /// Instance file (TOML).
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, value_enum)]
        solver: SolverChoice,
        /// Opening state "i1,i2" (defaults to the instance file's opening).
        #[arg(long)]
        opening: Option<String>,
        /// Write the full value table / plan to this CSV.
        #[arg(long)]
        table: Option<PathBuf>,
        /// Partition regions for the static model.
        #[arg(long, default_value_t = 10)]
        n_regions: usize,
    },
    /// Compare two solvers on one instance.
    Gap {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        pair: String,
        #[arg(long)]
        opening: Option<String>,
        #[arg(long, default_value_t = 10)]
        n_regions: usize,
        /// Replication cap for the heuristic side.
        #[arg(long, default_value_t = 200_000)]
        cap: usize,
    },
    /// Export the static model in LP text format.
    ExportLp {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        opening: Option<String>,
        /// First period of the model horizon.
        #[arg(long, default_value_t = 1)]
        start: usize,
        #[arg(long, default_value_t = 10)]
        n_regions: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Box-plot data from a records CSV.
    PlotData {
        #[arg(long)]
        records: PathBuf,
        /// Grouping dimension: pattern1, pattern2, k, r, b.
        #[arg(long)]
        pivot: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_opening(text: &Option<String>, fallback: State) -> anyhow::Result<State> {
    match text {
        None => Ok(fallback),
        Some(s) => {
            let parts: Vec<&str> = s.split(',').collect();
            if parts.len() != 2 {
                anyhow::bail!("opening must be `i1,i2`, got `{s}`");
            }
            Ok(State::new(parts[0].trim().parse()?, parts[1].trim().parse()?))
        }
    }
}

fn load_instance(path: &PathBuf) -> anyhow::Result<(Instance, State)> {
    let text = fs::read_to_string(path)?;
    let file = InstanceFile::parse(&text)?;
    let inst = file.to_instance()?;
    for warning in inst.regime_warnings().0 {
        eprintln!("warning: {warning}");
    }
    Ok((inst, file.opening()))
}

fn main() -> anyhow::Result<()> {
    if let Ok(workers) = std::env::var("TRANSSHIP_WORKERS") {
        let n: usize = workers.parse().map_err(|_| {
            anyhow::anyhow!("TRANSSHIP_WORKERS must be a positive integer, got `{workers}`")
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Run { study, out } => {
            let spec = StudyFile::parse(&fs::read_to_string(&study)?)?.to_spec()?;
            fs::create_dir_all(&out)?;
            let records_path = out.join("records.csv");
            let existing = if records_path.exists() {
                read_records(&fs::read_to_string(&records_path)?)?
            } else {
                Vec::new()
            };
            let result = run_study(&spec, &existing);
            let mut f = fs::File::create(&records_path)?;
            write_records(&result.records, &mut f)?;
            let mut f = fs::File::create(out.join("pivots.csv"))?;
            write_pivots(&result.pivots, result.grand_average, &mut f)?;
            println!("instances: {}", result.records.len());
            println!("failures:  {}", result.failures.len());
            for (id, err) in &result.failures {
                eprintln!("failed {id}: {err}");
            }
            for pivot in &result.pivots {
                println!("pivot by {}", pivot.dimension);
                for (key, avg, n) in &pivot.rows {
                    println!("  {key:<8} {avg:>10.4}%  ({n})");
                }
            }
            println!("grand average gap: {:.4}%", result.grand_average);
        }
        Command::Solve {
            instance,
            solver,
            opening,
            table,
            n_regions,
        } => {
            let (inst, fallback) = load_instance(&instance)?;
            let opening = parse_opening(&opening, fallback)?;
            match solver {
                SolverChoice::Sdp1 | SolverChoice::Sdp2 => {
                    let t = match solver {
                        SolverChoice::Sdp1 => solve_sdp1(&inst)?,
                        _ => solve_sdp2(&inst)?,
                    };
                    let cost = t
                        .cost(1, opening)
                        .ok_or_else(|| anyhow::anyhow!("opening off-lattice"))?;
                    let action = t.best_action(1, opening).unwrap();
                    println!("expected total cost: {cost:.6}");
                    println!(
                        "first action: W = {}, Q1 = {}, Q2 = {}",
                        action.w, action.q1, action.q2
                    );
                    let report = bounds_diagnostic(&inst, &t, &[opening])?;
                    if !report.ok {
                        eprintln!(
                            "warning: boundary mass {:.3e} exceeds {:.0e}; widen state bounds",
                            report.max_boundary_mass,
                            transship::sdp::BOUNDARY_MASS_TOL
                        );
                    }
                    let eval = evaluate_policy(&inst, &t, opening)?;
                    println!("policy evaluation: {:.6}", eval.expected_cost);
                    if let Some(path) = table {
                        let mut f = fs::File::create(&path)?;
                        t.write_csv(&mut f)?;
                        println!("value table written to {}", path.display());
                    }
                }
                SolverChoice::Milp => {
                    let parts = default_partitions(&inst, 1, n_regions)?;
                    let model = build_lp1(&inst, opening, 1, &parts)?;
                    let plan = solve_static(&model, &BranchBound::default())?;
                    println!(
                        "objective: {:.6} (proven: {}, nodes: {})",
                        plan.objective, plan.proven_optimal, plan.nodes
                    );
                    for tau in 0..plan.w.len() {
                        println!(
                            "t={}: W = {:.3}, Q1 = {:.3}, Q2 = {:.3}",
                            model.start + tau,
                            plan.w[tau],
                            plan.q[tau][0],
                            plan.q[tau][1]
                        );
                    }
                    if let Some(path) = table {
                        let mut f = fs::File::create(&path)?;
                        writeln!(f, "t,w,q1,q2,ibar1,ibar2,hbar1,hbar2,bbar1,bbar2")?;
                        for tau in 0..plan.w.len() {
                            writeln!(
                                f,
                                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                                model.start + tau,
                                plan.w[tau],
                                plan.q[tau][0],
                                plan.q[tau][1],
                                plan.ibar[tau][0],
                                plan.ibar[tau][1],
                                plan.hbar[tau][0],
                                plan.hbar[tau][1],
                                plan.bbar[tau][0],
                                plan.bbar[tau][1],
                            )?;
                        }
                        println!("plan written to {}", path.display());
                    }
                }
            }
        }
        Command::Gap {
            instance,
            pair,
            opening,
            n_regions,
            cap,
        } => {
            let (inst, fallback) = load_instance(&instance)?;
            let opening = parse_opening(&opening, fallback)?;
            let pair: GapPair = pair.parse()?;
            match pair {
                GapPair::Sdp1VsSdp2 => {
                    let t1 = solve_sdp1(&inst)?;
                    let t2 = solve_sdp2(&inst)?;
                    let c1 = t1.cost(1, opening).unwrap();
                    let c2 = t2.cost(1, opening).unwrap();
                    println!("ETC1 (joint DP):     {c1:.6}");
                    println!("ETC2 (two-stage DP): {c2:.6}");
                    println!("gap: {:.6}%", 100.0 * (c2 - c1) / c1);
                }
                GapPair::Sdp2VsHeuristic => {
                    let t2 = solve_sdp2(&inst)?;
                    let c1 = t2.cost(1, opening).unwrap();
                    let runner = Heuristic::new(&inst, n_regions)?;
                    let est = runner.estimate(
                        opening,
                        0.95,
                        0.001,
                        EstimateOpts {
                            cap,
                            ..EstimateOpts::default()
                        },
                    )?;
                    println!("ETC1 (two-stage DP): {c1:.6}");
                    println!(
                        "ETC2 (heuristic):    {:.6} +- {:.6} (n = {}, converged: {})",
                        est.mean, est.half_width, est.n, est.converged
                    );
                    println!("gap: {:.6}%", 100.0 * (est.mean - c1) / c1);
                }
            }
        }
        Command::ExportLp {
            instance,
            opening,
            start,
            n_regions,
            out,
        } => {
            let (inst, fallback) = load_instance(&instance)?;
            let opening = parse_opening(&opening, fallback)?;
            let parts = default_partitions(&inst, start, n_regions)?;
            let model = build_lp1(&inst, opening, start, &parts)?;
            let mut f = fs::File::create(&out)?;
            model.write_lp(&mut f)?;
            println!(
                "{} variables, {} rows written to {}",
                model.model.vars.len(),
                model.model.cons.len(),
                out.display()
            );
        }
        Command::PlotData {
            records,
            pivot,
            out,
        } => {
            let recs = read_records(&fs::read_to_string(&records)?)?;
            let groups = boxplot_data(&recs, &pivot)?;
            let mut f = fs::File::create(&out)?;
            write_boxplots(&groups, &mut f)?;
            println!("{} groups written to {}", groups.len(), out.display());
        }
    }
    Ok(())
}
