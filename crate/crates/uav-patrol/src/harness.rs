//! End-to-end experiment driver: runs a partitioning strategy through
//! routing and trajectory planning, accounts energy and completion
//! times, and compares strategies across seeds.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::assignment::{baseline_region, baseline_shortest_distance, ebtas_cluster};
use crate::energy::EnergyBreakdown;
use crate::routing::solve_route;
use crate::scenario::Scenario;
use crate::trajectory::{plan_mission, BcdConfig, MissionPlan};
use crate::{Error, Result};

/// Cluster-assignment strategy under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Composite clustering balancing distance, data and rate.
    Ebtas,
    /// Geographic partition into fixed regions.
    Region,
    /// Position-only distance-minimizing clustering.
    Shortest,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Ebtas, Strategy::Region, Strategy::Shortest];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Ebtas => "ebtas",
            Strategy::Region => "region",
            Strategy::Shortest => "shortest",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ebtas" => Ok(Strategy::Ebtas),
            "region" => Ok(Strategy::Region),
            "shortest" => Ok(Strategy::Shortest),
            other => Err(Error::Other(format!(
                "unknown strategy '{other}' (expected ebtas, region or shortest)"
            ))),
        }
    }
}

/// Settings for one strategy run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub strategy: Strategy,
    /// Clustering seed (region ignores it).
    pub seed: u64,
    pub bcd: BcdConfig,
    /// Completion-time weight in the reported objective.
    pub phi: f64,
    /// Balance weight in the reported objective.
    pub lambda: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            strategy: Strategy::Ebtas,
            seed: 0,
            bcd: BcdConfig::default(),
            phi: 0.0,
            lambda: 0.0,
        }
    }
}

/// Completion time and energy of one UAV's mission.
#[derive(Debug, Clone, PartialEq)]
pub struct UavReport {
    pub uav_id: usize,
    pub t_complete_s: f64,
    pub energy: EnergyBreakdown,
}

/// Aggregated run outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub per_uav: Vec<UavReport>,
    pub t_avg_s: f64,
    pub e_total_all_j: f64,
    pub minmax_gap_s: f64,
    /// The signed balance term lambda * sum(T_i - T_avg); an identity
    /// that must vanish.
    pub balance_literal: f64,
    /// sum_i E_i + phi T_i + lambda (T_i - T_avg).
    pub p0_literal: f64,
    /// Same objective with |T_i - T_avg| in the balance term.
    pub p0_abs: f64,
}

impl EnergyReport {
    pub fn from_missions(missions: &[MissionPlan], phi: f64, lambda: f64) -> EnergyReport {
        let per_uav: Vec<UavReport> = missions
            .iter()
            .map(|m| UavReport {
                uav_id: m.uav_id,
                t_complete_s: m.t_total_s,
                energy: m.energy,
            })
            .collect();
        let n = per_uav.len().max(1) as f64;
        let t_sum: f64 = per_uav.iter().map(|u| u.t_complete_s).sum();
        let t_avg_s = t_sum / n;
        let e_total_all_j = per_uav.iter().map(|u| u.energy.total_j).sum();
        let t_max = per_uav.iter().map(|u| u.t_complete_s).fold(0.0, f64::max);
        let t_min = per_uav
            .iter()
            .map(|u| u.t_complete_s)
            .fold(f64::INFINITY, f64::min);
        let minmax_gap_s = if per_uav.is_empty() { 0.0 } else { t_max - t_min };
        let base: f64 = per_uav
            .iter()
            .map(|u| u.energy.total_j + phi * u.t_complete_s)
            .sum();
        let balance_literal =
            lambda * per_uav.iter().map(|u| u.t_complete_s - t_avg_s).sum::<f64>();
        let balance_abs =
            lambda * per_uav.iter().map(|u| (u.t_complete_s - t_avg_s).abs()).sum::<f64>();
        EnergyReport {
            per_uav,
            t_avg_s,
            e_total_all_j,
            minmax_gap_s,
            balance_literal,
            p0_literal: base + balance_literal,
            p0_abs: base + balance_abs,
        }
    }
}

/// Runs one strategy end to end: assignment, per-cluster routing,
/// per-leg trajectory optimization, and accounting. Deterministic for a
/// fixed scenario and config.
pub fn run_strategy(scenario: &Scenario, cfg: &RunConfig) -> Result<(EnergyReport, Vec<MissionPlan>)> {
    let assignment = match cfg.strategy {
        Strategy::Ebtas => ebtas_cluster(scenario, cfg.seed, 100)?,
        Strategy::Region => baseline_region(scenario),
        Strategy::Shortest => baseline_shortest_distance(scenario, cfg.seed),
    };
    let clusters = assignment.clusters();
    let missions: Vec<MissionPlan> = clusters
        .par_iter()
        .enumerate()
        .map(|(i, cluster)| {
            let uav_id = i + 1;
            let route = solve_route(scenario, uav_id, cluster);
            plan_mission(&route, scenario, &cfg.bcd).map_err(|e| match e {
                Error::Infeasible(msg) => {
                    Error::Infeasible(format!("uav {uav_id} (cluster of {}): {msg}", cluster.len()))
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = EnergyReport::from_missions(&missions, cfg.phi, cfg.lambda);
    Ok((report, missions))
}

/// One per-UAV row of the strategy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub strategy: Strategy,
    pub seed: u64,
    pub uav_id: usize,
    pub t_i_s: f64,
    pub e_i_j: f64,
    pub t_avg_s: f64,
    pub e_total_j: f64,
    pub minmax_gap_s: f64,
}

/// Per-strategy means over all seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySummary {
    pub strategy: Strategy,
    pub mean_t_avg_s: f64,
    pub mean_e_total_j: f64,
    pub mean_minmax_gap_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<CompareRow>,
    pub summaries: Vec<StrategySummary>,
}

/// Runs all three strategies over every seed and tabulates the results.
/// Rows and aggregates are in canonical (strategy, seed, uav) order, so
/// the outcome does not depend on the order of `seeds`.
pub fn compare_strategies(
    scenario: &Scenario,
    seeds: &[u64],
    base: &RunConfig,
) -> Result<Comparison> {
    if seeds.is_empty() {
        return Err(Error::Other("compare_strategies needs at least one seed".into()));
    }
    let mut ordered: Vec<u64> = seeds.to_vec();
    ordered.sort_unstable();
    ordered.dedup();

    let jobs: Vec<(Strategy, u64)> = Strategy::ALL
        .iter()
        .flat_map(|&s| ordered.iter().map(move |&seed| (s, seed)))
        .collect();
    let reports: Vec<(Strategy, u64, EnergyReport)> = jobs
        .par_iter()
        .map(|&(strategy, seed)| {
            let cfg = RunConfig {
                strategy,
                seed,
                ..base.clone()
            };
            run_strategy(scenario, &cfg).map(|(report, _)| (strategy, seed, report))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &strategy in &Strategy::ALL {
        let mut sum_t = 0.0;
        let mut sum_e = 0.0;
        let mut sum_gap = 0.0;
        let mut n = 0.0;
        for &(s, seed, ref report) in &reports {
            if s != strategy {
                continue;
            }
            for u in &report.per_uav {
                rows.push(CompareRow {
                    strategy,
                    seed,
                    uav_id: u.uav_id,
                    t_i_s: u.t_complete_s,
                    e_i_j: u.energy.total_j,
                    t_avg_s: report.t_avg_s,
                    e_total_j: report.e_total_all_j,
                    minmax_gap_s: report.minmax_gap_s,
                });
            }
            sum_t += report.t_avg_s;
            sum_e += report.e_total_all_j;
            sum_gap += report.minmax_gap_s;
            n += 1.0;
        }
        summaries.push(StrategySummary {
            strategy,
            mean_t_avg_s: sum_t / n,
            mean_e_total_j: sum_e / n,
            mean_minmax_gap_s: sum_gap / n,
        });
    }
    Ok(Comparison { rows, summaries })
}
