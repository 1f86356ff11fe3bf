//! Command-line front end for the patrol planner: scenario generation,
//! assignment/routing inspection, full mission planning, strategy
//! comparison, and artifact re-rendering.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uav_patrol::assignment::{cluster_q_totals, feature_vectors, neighbor_sets, p1_objective};
use uav_patrol::harness::{compare_strategies, run_strategy, RunConfig, Strategy};
use uav_patrol::output;
use uav_patrol::routing::{route_weight, solve_route};
use uav_patrol::scenario::{generate_scenario, load_scenario, save_scenario, Point2, Scenario};
use uav_patrol::trajectory::BcdConfig;
use uav_patrol::{Error, Result};

#[derive(Parser)]
#[command(
    name = "patrol",
    about = "Multi-UAV patrol planner with edge offloading",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StrategyArgs {
    /// Scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Partitioning strategy: ebtas, region or shortest.
    #[arg(long, default_value = "ebtas")]
    strategy: Strategy,
    /// Clustering seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct SolverArgs {
    /// Slots per trajectory segment.
    #[arg(long)]
    slots: Option<usize>,
    /// Completion-time weight in the reported objective.
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Balance weight in the reported objective.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Worker threads (0 = rayon default).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random scenario and write it as TOML.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of cruise points.
        #[arg(long, default_value_t = 20)]
        points: usize,
        /// Number of UAVs.
        #[arg(long, default_value_t = 2)]
        uavs: usize,
        /// Side length of the square patrol area, metres.
        #[arg(long, default_value_t = 1000.0)]
        extent: f64,
        /// Data volume range at each cruise point, bits.
        #[arg(long, default_value_t = 5e7)]
        q_min: f64,
        #[arg(long, default_value_t = 5e8)]
        q_max: f64,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Partition cruise points and print the clusters.
    Assign {
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// Partition and order each cluster; print the visit orders.
    Route {
        #[command(flatten)]
        strategy: StrategyArgs,
    },
    /// Full pipeline; write the per-slot trajectory table.
    Plan {
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Full pipeline; write trajectory, report and SVG artifacts.
    Run {
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run all strategies over a seed range and tabulate the results.
    Compare {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Number of seeds (0..n).
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Re-render SVGs from a previously written trajectory table.
    Render {
        /// Scenario TOML file.
        #[arg(long)]
        scenario: PathBuf,
        /// Directory holding trajectories.csv.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Infeasible(msg)) => {
            eprintln!("infeasible: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn setup_jobs(jobs: usize) {
    if jobs > 0 {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
}

fn run_config(strategy: &StrategyArgs, solver: &SolverArgs) -> RunConfig {
    let mut bcd = BcdConfig::default();
    if let Some(slots) = solver.slots {
        bcd.slots = slots;
    }
    RunConfig {
        strategy: strategy.strategy,
        seed: strategy.seed,
        bcd,
        phi: solver.phi,
        lambda: solver.lambda,
    }
}

fn assignment_for(scenario: &Scenario, args: &StrategyArgs) -> Result<uav_patrol::assignment::Assignment> {
    match args.strategy {
        Strategy::Ebtas => uav_patrol::assignment::ebtas_cluster(scenario, args.seed, 100),
        Strategy::Region => Ok(uav_patrol::assignment::baseline_region(scenario)),
        Strategy::Shortest => Ok(uav_patrol::assignment::baseline_shortest_distance(
            scenario, args.seed,
        )),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen {
            seed,
            points,
            uavs,
            extent,
            q_min,
            q_max,
            out,
        } => {
            let scenario = generate_scenario(seed, points, uavs, extent, (q_min, q_max))?;
            std::fs::create_dir_all(&out).map_err(|source| Error::Io {
                path: out.display().to_string(),
                source,
            })?;
            let path = out.join("scenario.toml");
            save_scenario(&scenario, &path)?;
            println!(
                "wrote {} ({} points, {} stations, {} uavs)",
                path.display(),
                scenario.cruise_points.len(),
                scenario.stations.len(),
                scenario.n_uavs
            );
            Ok(())
        }
        Command::Assign { strategy } => {
            let scenario = load_scenario(&strategy.scenario)?;
            let assignment = assignment_for(&scenario, &strategy)?;
            let features = feature_vectors(&scenario);
            let nsets = neighbor_sets(&scenario.cruise_points, scenario.weights.neighbor_d_m);
            let q_totals = cluster_q_totals(&assignment, &features);
            println!("strategy: {} seed: {}", strategy.strategy, strategy.seed);
            println!("cluster,size,q_total_bits,points");
            for (c, members) in assignment.clusters().iter().enumerate() {
                let ids: Vec<String> = members
                    .iter()
                    .map(|&i| scenario.cruise_points[i].id.to_string())
                    .collect();
                println!("{},{},{},{}", c + 1, members.len(), q_totals[c], ids.join(" "));
            }
            println!(
                "p1_objective: {}",
                p1_objective(&assignment, &features, &nsets, &scenario.weights)
            );
            Ok(())
        }
        Command::Route { strategy } => {
            let scenario = load_scenario(&strategy.scenario)?;
            let assignment = assignment_for(&scenario, &strategy)?;
            println!("uav,weight,order");
            for (c, members) in assignment.clusters().iter().enumerate() {
                let route = solve_route(&scenario, c + 1, members);
                let ids: Vec<String> = route
                    .order
                    .iter()
                    .map(|&i| scenario.cruise_points[i].id.to_string())
                    .collect();
                println!(
                    "{},{},{}",
                    route.uav_id,
                    route_weight(&scenario, &route),
                    ids.join(" ")
                );
            }
            Ok(())
        }
        Command::Plan {
            strategy,
            solver,
            out,
        } => {
            setup_jobs(solver.jobs);
            let scenario = load_scenario(&strategy.scenario)?;
            let cfg = run_config(&strategy, &solver);
            let (report, plans) = run_strategy(&scenario, &cfg)?;
            std::fs::create_dir_all(&out).map_err(|source| Error::Io {
                path: out.display().to_string(),
                source,
            })?;
            let path = out.join("trajectories.csv");
            output::write_trajectories_csv(&scenario, &plans, &path)?;
            println!("wrote {}", path.display());
            print_report_summary(&report);
            Ok(())
        }
        Command::Run {
            strategy,
            solver,
            out,
        } => {
            setup_jobs(solver.jobs);
            let scenario = load_scenario(&strategy.scenario)?;
            let cfg = run_config(&strategy, &solver);
            let (report, plans) = run_strategy(&scenario, &cfg)?;
            let written = output::emit_outputs(&scenario, &plans, &report, &out)?;
            for p in &written {
                println!("wrote {}", p.display());
            }
            print_report_summary(&report);
            Ok(())
        }
        Command::Compare {
            scenario,
            seeds,
            solver,
            out,
        } => {
            setup_jobs(solver.jobs);
            let scenario = load_scenario(&scenario)?;
            let seed_list: Vec<u64> = (0..seeds.max(1)).collect();
            let base = RunConfig {
                strategy: Strategy::Ebtas,
                seed: 0,
                bcd: {
                    let mut bcd = BcdConfig::default();
                    if let Some(slots) = solver.slots {
                        bcd.slots = slots;
                    }
                    bcd
                },
                phi: solver.phi,
                lambda: solver.lambda,
            };
            let cmp = compare_strategies(&scenario, &seed_list, &base)?;
            std::fs::create_dir_all(&out).map_err(|source| Error::Io {
                path: out.display().to_string(),
                source,
            })?;
            let path = out.join("comparison.csv");
            output::write_comparison_csv(&cmp, &path)?;
            println!("wrote {}", path.display());
            println!("strategy,mean_T_avg_s,mean_E_total_j,mean_minmax_gap_s");
            for s in &cmp.summaries {
                println!(
                    "{},{},{},{}",
                    s.strategy, s.mean_t_avg_s, s.mean_e_total_j, s.mean_minmax_gap_s
                );
            }
            Ok(())
        }
        Command::Render { scenario, out } => {
            let scenario = load_scenario(&scenario)?;
            render_from_csv(&scenario, &out)
        }
    }
}

fn print_report_summary(report: &uav_patrol::harness::EnergyReport) {
    println!("uav_id,t_complete_s,e_total_j");
    for u in &report.per_uav {
        println!("{},{},{}", u.uav_id, u.t_complete_s, u.energy.total_j);
    }
    println!(
        "t_avg_s={} e_total_all_j={} minmax_gap_s={} p0_literal={} p0_abs={}",
        report.t_avg_s,
        report.e_total_all_j,
        report.minmax_gap_s,
        report.p0_literal,
        report.p0_abs
    );
}

fn render_from_csv(scenario: &Scenario, dir: &Path) -> Result<()> {
    let rows = output::read_trajectories_csv(&dir.join("trajectories.csv"))?;
    let mut uavs: Vec<usize> = rows.iter().map(|r| r.uav).collect();
    uavs.sort_unstable();
    uavs.dedup();

    let paths: Vec<(usize, Vec<Point2>)> = uavs
        .iter()
        .map(|&uav| {
            let mut pts = vec![scenario.start];
            pts.extend(
                rows.iter()
                    .filter(|r| r.uav == uav)
                    .map(|r| Point2::new(r.x_m, r.y_m)),
            );
            (uav, pts)
        })
        .collect();
    let svg_path = dir.join("trajectories.svg");
    std::fs::write(&svg_path, output::trajectories_svg(scenario, &paths)).map_err(|source| {
        Error::Io {
            path: svg_path.display().to_string(),
            source,
        }
    })?;
    println!("wrote {}", svg_path.display());

    for &uav in &uavs {
        let series: Vec<(f64, f64, f64)> = rows
            .iter()
            .filter(|r| r.uav == uav)
            .map(|r| (r.t_s, r.speed_mps, r.best_rate_bps))
            .collect();
        let path = dir.join(format!("speed_rate_uav{uav}.svg"));
        std::fs::write(&path, output::speed_rate_svg(uav, &series)).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
