//! Per-segment trajectory planning: discretized flight between two
//! anchor points while a data load is processed on board and offloaded
//! to ground stations.
//!
//! Each segment is optimized by block coordinate descent over three
//! blocks: the offload schedule (tau), the CPU frequencies (UAV and
//! per-station), and the flight geometry (waypoints and slot durations)
//! via one convex surrogate step per iteration. Every block ends with an
//! exact frequency repair and an accept-only-if-not-worse rule, so the
//! energy trace is monotone and returned plans always satisfy the plan
//! invariants.

mod sca;

use rayon::prelude::*;

use crate::channel::{causality_ok, sample_links};
use crate::energy::{max_range_speed, segment_energy, EnergyBreakdown};
use crate::routing::Route;
use crate::scenario::{Point2, Scenario};
use crate::{Error, Result};

/// Relative tolerance on the processed-data requirement.
pub const DATA_REL_TOL: f64 = 1e-6;
/// Smallest admissible slot duration, seconds.
pub const MIN_SLOT_S: f64 = 1e-4;
/// Trust-region floor for the geometry step, metres.
pub const TRUST_FLOOR_M: f64 = 0.1;
/// Duration inflation factor applied when a segment cannot process its
/// load at the current duration.
pub const INFLATE_FACTOR: f64 = 1.5;
/// Maximum number of inflation retries (1.5^12 is a 129x stretch).
pub const MAX_INFLATE_RETRIES: usize = 12;

/// Discretized plan for one segment.
///
/// `waypoints` has one more entry than `slot_s`; slot `l` flies from
/// `waypoints[l]` to `waypoints[l + 1]` in `slot_s[l]` seconds while
/// offloading fraction `tau[l][m]` of the slot to station `m`, running
/// the on-board CPU at `f_uav[l]` and station CPUs at `f_gbs[l][m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPlan {
    pub waypoints: Vec<Point2>,
    pub slot_s: Vec<f64>,
    pub tau: Vec<Vec<f64>>,
    pub f_uav: Vec<f64>,
    pub f_gbs: Vec<Vec<f64>>,
    pub q_target_bits: f64,
}

/// Result of a frequency pass: the repaired plan plus any load that
/// could not be processed at the current duration (zero when feasible).
#[derive(Debug, Clone)]
pub struct FreqOutcome {
    pub plan: SegmentPlan,
    pub shortfall_bits: f64,
}

/// Optimized plan for a full visit order.
#[derive(Debug, Clone)]
pub struct MissionPlan {
    pub uav_id: usize,
    pub segments: Vec<SegmentPlan>,
    pub t_total_s: f64,
    pub energy: EnergyBreakdown,
}

/// Tuning for the per-segment block coordinate descent.
#[derive(Debug, Clone)]
pub struct BcdConfig {
    /// Slots per segment.
    pub slots: usize,
    /// Relative energy improvement below which the descent stops.
    pub bcd_tol: f64,
    /// Maximum descent iterations.
    pub bcd_max_iter: usize,
    /// Initial trust radius as a fraction of the segment length.
    pub trust_radius_frac: f64,
}

impl Default for BcdConfig {
    fn default() -> Self {
        BcdConfig {
            slots: 40,
            bcd_tol: 1e-3,
            bcd_max_iter: 50,
            trust_radius_frac: 0.1,
        }
    }
}

impl SegmentPlan {
    pub fn slots(&self) -> usize {
        self.slot_s.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.slot_s.iter().sum()
    }

    /// Midpoint of slot `l`, where link rates are evaluated.
    pub fn midpoint(&self, l: usize) -> Point2 {
        (self.waypoints[l] + self.waypoints[l + 1]) * 0.5
    }

    pub fn speed_mps(&self, l: usize) -> f64 {
        self.waypoints[l].dist(self.waypoints[l + 1]) / self.slot_s[l]
    }

    /// Link rates at every slot midpoint, slots x stations, bit/s.
    pub fn rate_table(&self, scenario: &Scenario) -> Vec<Vec<f64>> {
        (0..self.slots())
            .map(|l| {
                sample_links(
                    self.midpoint(l),
                    &scenario.stations,
                    &scenario.uav,
                    &scenario.channel,
                )
                .into_iter()
                .map(|s| s.rate_bps)
                .collect()
            })
            .collect()
    }

    /// Bits offloaded to each station in each slot.
    pub fn offloaded_bits(&self, rates: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.slots())
            .map(|l| {
                (0..self.tau[l].len())
                    .map(|m| self.tau[l][m] * rates[l][m] * self.slot_s[l])
                    .collect()
            })
            .collect()
    }

    /// Bits processed on board plus at the stations.
    pub fn processed_bits(&self, scenario: &Scenario) -> f64 {
        let c = scenario.channel.cycles_per_bit;
        (0..self.slots())
            .map(|l| {
                let f_total: f64 = self.f_uav[l] + self.f_gbs[l].iter().sum::<f64>();
                f_total * self.slot_s[l] / c
            })
            .sum()
    }

    /// Checks every plan invariant, naming the first violated one.
    pub fn check_invariants(&self, scenario: &Scenario) -> Result<()> {
        let l_n = self.slots();
        let m_n = scenario.stations.len();
        if l_n == 0 {
            return Err(Error::Invariant("plan has no slots".into()));
        }
        if self.waypoints.len() != l_n + 1 {
            return Err(Error::Invariant("waypoints must number slots + 1".into()));
        }
        if self.tau.len() != l_n
            || self.f_gbs.len() != l_n
            || self.f_uav.len() != l_n
            || self.tau.iter().any(|r| r.len() != m_n)
            || self.f_gbs.iter().any(|r| r.len() != m_n)
        {
            return Err(Error::Invariant("per-slot table shape mismatch".into()));
        }
        if !self.q_target_bits.is_finite() || self.q_target_bits < 0.0 {
            return Err(Error::Invariant("q_target_bits must be finite, >= 0".into()));
        }
        for (l, &d) in self.slot_s.iter().enumerate() {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Invariant(format!("slot {l} duration not positive")));
            }
        }
        let v_cap = scenario.uav.v_max_mps;
        for l in 0..l_n {
            let step = self.waypoints[l].dist(self.waypoints[l + 1]);
            if step > v_cap * self.slot_s[l] * (1.0 + 1e-9) + 1e-12 {
                return Err(Error::Invariant(format!("slot {l} exceeds max speed")));
            }
            let row_sum: f64 = self.tau[l].iter().sum();
            if row_sum > 1.0 + 1e-9 {
                return Err(Error::Invariant(format!("slot {l} tau row sum > 1")));
            }
            for m in 0..m_n {
                if self.tau[l][m] < -1e-12 || self.tau[l][m] > 1.0 + 1e-12 {
                    return Err(Error::Invariant(format!("tau[{l}][{m}] out of [0, 1]")));
                }
                if self.f_gbs[l][m] < -1e-9
                    || self.f_gbs[l][m] > scenario.stations[m].max_cpu_hz * (1.0 + 1e-9)
                {
                    return Err(Error::Invariant(format!("f_gbs[{l}][{m}] out of range")));
                }
            }
            if self.f_uav[l] < -1e-9 || self.f_uav[l] > scenario.uav.max_cpu_hz * (1.0 + 1e-9) {
                return Err(Error::Invariant(format!("f_uav[{l}] out of range")));
            }
        }
        let processed = self.processed_bits(scenario);
        if processed < self.q_target_bits - (DATA_REL_TOL * self.q_target_bits).max(1.0) {
            return Err(Error::Invariant(format!(
                "processed {processed} bits < target {} bits",
                self.q_target_bits
            )));
        }
        let rates = self.rate_table(scenario);
        let offloaded = self.offloaded_bits(&rates);
        let c = scenario.channel.cycles_per_bit;
        let mut proc_prefix = vec![vec![0.0; l_n]; m_n];
        let mut off_prefix = vec![vec![0.0; l_n]; m_n];
        for m in 0..m_n {
            let mut p = 0.0;
            let mut o = 0.0;
            for l in 0..l_n {
                p += self.f_gbs[l][m] * self.slot_s[l] / c;
                o += offloaded[l][m];
                proc_prefix[m][l] = p;
                off_prefix[m][l] = o;
            }
        }
        if !causality_ok(&off_prefix, &proc_prefix)? {
            return Err(Error::Invariant(
                "station processing precedes offloading".into(),
            ));
        }
        Ok(())
    }
}

/// Builds the initial plan: straight-line waypoints, uniform slots at
/// the max-range speed (stretched when the load needs more time), full
/// offload toward the best station, frequencies from a repair pass.
pub fn init_segment(
    from: Point2,
    to: Point2,
    q_target_bits: f64,
    slots: usize,
    scenario: &Scenario,
) -> Result<SegmentPlan> {
    assert!(slots >= 2, "a segment needs at least two slots");
    let dist = from.dist(to);
    let v_mr = max_range_speed(&scenario.uav.rotor, scenario.uav.v_max_mps);
    let c = scenario.channel.cycles_per_bit;

    // Duration estimate: long enough to fly the line, and long enough to
    // clear the load assuming the best endpoint link stays available.
    let t_flight = dist / v_mr;
    let t_data = if q_target_bits > 0.0 {
        let r_best = [from, (from + to) * 0.5, to]
            .iter()
            .map(|&p| {
                crate::channel::best_rate_bps(p, &scenario.stations, &scenario.uav, &scenario.channel)
            })
            .fold(0.0, f64::max);
        c * q_target_bits / (scenario.uav.max_cpu_hz + c * r_best)
    } else {
        0.0
    };
    let t0 = t_flight.max(t_data).max(MIN_SLOT_S * slots as f64).max(1.0);

    // Interior waypoints are interpolated; the endpoints are pinned
    // bit-exactly because neighboring segments share them.
    let mut waypoints: Vec<Point2> = (0..=slots)
        .map(|l| from + (to - from) * (l as f64 / slots as f64))
        .collect();
    waypoints[0] = from;
    waypoints[slots] = to;
    let slot_s = vec![t0 / slots as f64; slots];
    let m_n = scenario.stations.len();
    let mut plan = SegmentPlan {
        waypoints,
        slot_s,
        tau: vec![vec![0.0; m_n]; slots],
        f_uav: vec![0.0; slots],
        f_gbs: vec![vec![0.0; m_n]; slots],
        q_target_bits,
    };
    if q_target_bits > 0.0 {
        let rates = plan.rate_table(scenario);
        for l in 0..slots {
            if let Some((m, &r)) = rates[l]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            {
                if r > 0.0 {
                    plan.tau[l][m] = 1.0;
                }
            }
        }
    }
    repair_with_inflation(plan, scenario, "initial plan")
}

/// Recomputes all CPU frequencies exactly for the current geometry and
/// schedule: per-station forward water-filling against the offloaded
/// stream, then a constant on-board frequency covering the residual.
///
/// A nonzero `shortfall_bits` signals that the segment needs a longer
/// duration.
pub fn optimize_frequencies(plan: &SegmentPlan, scenario: &Scenario) -> FreqOutcome {
    let l_n = plan.slots();
    let m_n = scenario.stations.len();
    let c = scenario.channel.cycles_per_bit;
    let rates = plan.rate_table(scenario);
    let offloaded = plan.offloaded_bits(&rates);

    let mut out = plan.clone();
    let mut processed = 0.0;
    for m in 0..m_n {
        let f_max = scenario.stations[m].max_cpu_hz;
        let mut backlog = 0.0;
        for l in 0..l_n {
            let avail = backlog + offloaded[l][m];
            let cap = f_max * plan.slot_s[l] / c;
            let take = avail.min(cap);
            out.f_gbs[l][m] = (take * c / plan.slot_s[l]).min(f_max);
            backlog = avail - take;
            processed += take;
        }
    }

    let residual = (plan.q_target_bits - processed).max(0.0);
    let t_total = plan.duration_s();
    let f_flat = (c * residual / t_total).min(scenario.uav.max_cpu_hz);
    for l in 0..l_n {
        out.f_uav[l] = f_flat;
    }
    let local = f_flat * t_total / c;
    let mut shortfall = plan.q_target_bits - processed - local;
    if shortfall <= (DATA_REL_TOL * plan.q_target_bits).max(1.0) {
        shortfall = 0.0;
    }
    FreqOutcome {
        plan: out,
        shortfall_bits: shortfall,
    }
}

/// Repairs frequencies, stretching every slot by 1.5x (up to 12 times)
/// whenever the load does not fit in the current duration.
fn repair_with_inflation(
    mut plan: SegmentPlan,
    scenario: &Scenario,
    context: &str,
) -> Result<SegmentPlan> {
    for _ in 0..=MAX_INFLATE_RETRIES {
        let out = optimize_frequencies(&plan, scenario);
        if out.shortfall_bits == 0.0 {
            return Ok(out.plan);
        }
        plan = out.plan;
        for d in &mut plan.slot_s {
            *d *= INFLATE_FACTOR;
        }
    }
    Err(Error::Infeasible(format!(
        "{context}: segment cannot process {} bits even with a 100x longer duration",
        plan.q_target_bits
    )))
}

/// Rebuilds the offload schedule greedily: best-rate slots first, each
/// offloading through its best station while the marginal transmit cost
/// stays below the marginal on-board compute cost for the remaining
/// load. The candidate is kept only if it does not raise the segment
/// energy after an exact frequency repair.
pub fn optimize_schedule(plan: &SegmentPlan, scenario: &Scenario) -> SegmentPlan {
    let l_n = plan.slots();
    let rates = plan.rate_table(scenario);
    let t_total = plan.duration_s();
    let c = scenario.channel.cycles_per_bit;
    let theta = scenario.uav.cap_coeff;
    let p_tx = scenario.uav.tx_power_w;

    let mut candidate = plan.clone();
    for row in &mut candidate.tau {
        row.iter_mut().for_each(|t| *t = 0.0);
    }

    let mut best: Vec<(usize, usize, f64)> = (0..l_n)
        .map(|l| {
            let (m, &r) = rates[l]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            (l, m, r)
        })
        .collect();
    best.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));

    let mut residual = plan.q_target_bits;
    for &(l, m, r) in &best {
        if residual <= 0.0 || r <= 0.0 {
            break;
        }
        // Offloading stays worthwhile while p_tx / r < 3 theta f^2 c with
        // f = c * residual / t_total; below this residual, local compute
        // is cheaper.
        let break_even = (t_total / c) * (p_tx / (3.0 * theta * c * r)).sqrt();
        let cap = r * plan.slot_s[l];
        let take = (residual - break_even).min(cap).max(0.0);
        if take > 0.0 {
            candidate.tau[l][m] = take / cap;
            residual -= take;
        }
    }

    let repaired = optimize_frequencies(&candidate, scenario);
    if repaired.shortfall_bits > 0.0 {
        return plan.clone();
    }
    let e_old = segment_energy(plan, scenario).total_j;
    let e_new = segment_energy(&repaired.plan, scenario).total_j;
    if e_new <= e_old {
        repaired.plan
    } else {
        plan.clone()
    }
}

/// One geometry step: solves a convex surrogate around the incumbent
/// (waypoints, durations, induced-power slack) inside a trust region,
/// repairs frequencies exactly, and accepts only if the true segment
/// energy decreases. On rejection the radius is halved down to 0.1 m.
pub fn optimize_trajectory_sca(
    plan: &SegmentPlan,
    scenario: &Scenario,
    trust_radius_m: f64,
) -> SegmentPlan {
    let e_inc = segment_energy(plan, scenario).total_j;
    let mut radius = trust_radius_m;
    while radius >= TRUST_FLOOR_M {
        let stepped = sca::solve_step(plan, scenario, radius);
        let repaired = optimize_frequencies(&stepped, scenario);
        if repaired.shortfall_bits == 0.0 {
            let e_new = segment_energy(&repaired.plan, scenario).total_j;
            if e_new < e_inc {
                return repaired.plan;
            }
        }
        radius *= 0.5;
    }
    plan.clone()
}

/// Optimizes one segment end to end.
pub fn optimize_segment(
    from: Point2,
    to: Point2,
    q_target_bits: f64,
    scenario: &Scenario,
    cfg: &BcdConfig,
) -> Result<SegmentPlan> {
    let mut plan = init_segment(from, to, q_target_bits, cfg.slots, scenario)?;
    let radius = (from.dist(to) * cfg.trust_radius_frac).max(1.0);
    let mut e_prev = segment_energy(&plan, scenario).total_j;
    for _ in 0..cfg.bcd_max_iter {
        plan = optimize_schedule(&plan, scenario);
        let freq = optimize_frequencies(&plan, scenario);
        if freq.shortfall_bits == 0.0 {
            plan = freq.plan;
        }
        plan = optimize_trajectory_sca(&plan, scenario, radius);
        let e = segment_energy(&plan, scenario).total_j;
        let drop = e_prev - e;
        e_prev = e;
        if drop <= cfg.bcd_tol * e_prev.max(1e-9) {
            break;
        }
    }
    plan.check_invariants(scenario)?;
    Ok(plan)
}

/// Plans every leg of a route: start to first point carries no load,
/// each later leg processes the data collected at the departed point.
pub fn plan_mission(route: &Route, scenario: &Scenario, cfg: &BcdConfig) -> Result<MissionPlan> {
    let mut legs: Vec<(Point2, Point2, f64)> = Vec::new();
    if route.order.is_empty() {
        legs.push((scenario.start, scenario.finish, 0.0));
    } else {
        let pts = &scenario.cruise_points;
        legs.push((scenario.start, pts[route.order[0]].position, 0.0));
        for pair in route.order.windows(2) {
            legs.push((
                pts[pair[0]].position,
                pts[pair[1]].position,
                pts[pair[0]].data_bits,
            ));
        }
        let last = *route.order.last().unwrap();
        legs.push((pts[last].position, scenario.finish, pts[last].data_bits));
    }
    let segments: Vec<SegmentPlan> = legs
        .par_iter()
        .map(|&(a, b, q)| optimize_segment(a, b, q, scenario, cfg))
        .collect::<Result<Vec<_>>>()?;
    let energy = segments
        .iter()
        .fold(EnergyBreakdown::ZERO, |acc, s| acc.add(segment_energy(s, scenario)));
    let t_total_s = segments.iter().map(|s| s.duration_s()).sum();
    Ok(MissionPlan {
        uav_id: route.uav_id,
        segments,
        t_total_s,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::flight_power_w;
    use crate::scenario::generate_scenario;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_scenario(seed: u64) -> Scenario {
        generate_scenario(seed, 8, 2, 1000.0, (5e7, 5e8)).unwrap()
    }

    fn random_leg(rng: &mut ChaCha8Rng, extent: f64) -> (Point2, Point2, f64) {
        let p = |rng: &mut ChaCha8Rng| {
            Point2::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent))
        };
        (p(rng), p(rng), rng.gen_range(0.0..4e8))
    }

    #[test]
    fn init_plans_satisfy_invariants() {
        let s = test_scenario(1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let (a, b, q) = random_leg(&mut rng, 1000.0);
            let plan = init_segment(a, b, q, 20, &s).unwrap();
            plan.check_invariants(&s).unwrap();
            assert_eq!(plan.waypoints[0], a);
            assert_eq!(plan.waypoints[20], b);
            assert_eq!(plan.slots(), 20);
        }
    }

    #[test]
    fn init_handles_coincident_endpoints() {
        let s = test_scenario(2);
        let p = Point2::new(400.0, 400.0);
        let plan = init_segment(p, p, 2e8, 10, &s).unwrap();
        plan.check_invariants(&s).unwrap();
        assert!(plan.duration_s() > 0.0);
        assert!(plan.waypoints.iter().all(|&w| w == p));
    }

    #[test]
    fn frequencies_split_residual_evenly() {
        let s = test_scenario(3);
        let plan = init_segment(Point2::new(0.0, 0.0), Point2::new(900.0, 900.0), 3e8, 15, &s)
            .unwrap();
        let out = optimize_frequencies(&plan, &s);
        assert_eq!(out.shortfall_bits, 0.0);
        let f = &out.plan.f_uav;
        let spread = f.iter().fold(0.0f64, |m, &x| m.max(x))
            - f.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        assert!(spread <= 1e-6, "on-board frequency must be flat, spread {spread}");
        out.plan.check_invariants(&s).unwrap();
    }

    #[test]
    fn flat_frequency_beats_random_profiles() {
        let s = test_scenario(4);
        let c = s.channel.cycles_per_bit;
        let theta = s.uav.cap_coeff;
        let slots = 12usize;
        let slot_s = vec![2.0; slots];
        let t: f64 = slot_s.iter().sum();
        let residual = 0.4 * s.uav.max_cpu_hz * t / c;
        let f_flat = c * residual / t;
        let e_flat: f64 = slot_s.iter().map(|&d| theta * f_flat.powi(3) * d).sum();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tried = 0;
        while tried < 200 {
            let w: Vec<f64> = (0..slots).map(|_| rng.gen_range(0.05..1.0)).collect();
            let wd: f64 = w.iter().zip(&slot_s).map(|(a, b)| a * b).sum();
            // Scale so the profile completes exactly the same work as the
            // flat profile: sum(f_i * d_i) / c = residual.
            let f: Vec<f64> = w.iter().map(|&x| x * c * residual / wd).collect();
            if f.iter().any(|&x| x > s.uav.max_cpu_hz) {
                continue;
            }
            tried += 1;
            let e: f64 = f
                .iter()
                .zip(&slot_s)
                .map(|(&fi, &d)| theta * fi.powi(3) * d)
                .sum();
            assert!(e >= e_flat - 1e-9 * e_flat, "profile beat flat: {e} < {e_flat}");
        }
    }

    #[test]
    fn frequency_shortfall_signals_and_inflation_repairs() {
        let s = test_scenario(5);
        let c = s.channel.cycles_per_bit;
        // One second of flight cannot process this load even offloading.
        let q = 4.0 * s.uav.max_cpu_hz / c; // four seconds of on-board work
        let mut plan = init_segment(Point2::new(0.0, 0.0), Point2::new(10.0, 0.0), q, 4, &s)
            .unwrap();
        // Shrink the duration behind the repair's back.
        for d in &mut plan.slot_s {
            *d = 0.1;
        }
        plan.tau.iter_mut().for_each(|r| r.iter_mut().for_each(|t| *t = 0.0));
        let out = optimize_frequencies(&plan, &s);
        assert!(out.shortfall_bits > 0.0, "expected a duration shortfall");
        let repaired = repair_with_inflation(plan, &s, "test").unwrap();
        repaired.check_invariants(&s).unwrap();
        assert!(repaired.duration_s() > 0.4);
    }

    #[test]
    fn impossible_load_reports_infeasible() {
        let s = test_scenario(6);
        let c = s.channel.cycles_per_bit;
        let q = 1e6 * s.uav.max_cpu_hz / c;
        let plan = SegmentPlan {
            waypoints: vec![Point2::new(0.0, 0.0); 3],
            slot_s: vec![0.5; 2],
            tau: vec![vec![0.0; s.stations.len()]; 2],
            f_uav: vec![0.0; 2],
            f_gbs: vec![vec![0.0; s.stations.len()]; 2],
            q_target_bits: q,
        };
        let err = repair_with_inflation(plan, &s, "test").unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn schedule_prefers_high_rate_slots() {
        let s = test_scenario(7);
        let q = 2.5e8;
        let plan = init_segment(Point2::new(50.0, 50.0), Point2::new(950.0, 450.0), q, 20, &s)
            .unwrap();
        let out = optimize_schedule(&plan, &s);
        out.check_invariants(&s).unwrap();
        let rates = out.rate_table(&s);
        let best: Vec<f64> = rates
            .iter()
            .map(|r| r.iter().fold(0.0f64, |m, &x| m.max(x)))
            .collect();
        let used: Vec<f64> = out.tau.iter().map(|r| r.iter().sum()).collect();
        // Every slot with offload must have a rate at least as high as
        // every slot without, up to the partially filled boundary slot.
        let min_used_rate = best
            .iter()
            .zip(&used)
            .filter(|(_, &u)| u > 1e-9)
            .map(|(&r, _)| r)
            .fold(f64::INFINITY, f64::min);
        let mut higher_unused = 0;
        for (&r, &u) in best.iter().zip(&used) {
            if u <= 1e-9 && r > min_used_rate * (1.0 + 1e-9) {
                higher_unused += 1;
            }
        }
        assert!(higher_unused <= 1, "greedy fill must use the best slots first");
    }

    #[test]
    fn schedule_never_raises_energy() {
        let s = test_scenario(8);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let (a, b, q) = random_leg(&mut rng, 1000.0);
            let plan = init_segment(a, b, q, 12, &s).unwrap();
            let e0 = segment_energy(&plan, &s).total_j;
            let out = optimize_schedule(&plan, &s);
            let e1 = segment_energy(&out, &s).total_j;
            assert!(e1 <= e0 + 1e-9 * e0, "schedule raised energy {e0} -> {e1}");
        }
    }

    #[test]
    fn sca_step_never_raises_energy() {
        let s = test_scenario(9);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..8 {
            let (a, b, q) = random_leg(&mut rng, 1000.0);
            let plan = init_segment(a, b, q, 10, &s).unwrap();
            let plan = optimize_schedule(&plan, &s);
            let e0 = segment_energy(&plan, &s).total_j;
            let out = optimize_trajectory_sca(&plan, &s, a.dist(b).max(10.0) * 0.1);
            let e1 = segment_energy(&out, &s).total_j;
            assert!(e1 <= e0 + 1e-9 * e0.max(1.0), "sca raised energy {e0} -> {e1}");
            out.check_invariants(&s).unwrap();
        }
    }

    #[test]
    fn bcd_trace_is_monotone() {
        let s = test_scenario(10);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..4 {
            let (a, b, q) = random_leg(&mut rng, 1000.0);
            let mut plan = init_segment(a, b, q, 10, &s).unwrap();
            let radius = (a.dist(b) * 0.1).max(1.0);
            let mut e = segment_energy(&plan, &s).total_j;
            for _ in 0..6 {
                plan = optimize_schedule(&plan, &s);
                let e1 = segment_energy(&plan, &s).total_j;
                assert!(e1 <= e + 1e-9 * e.max(1.0));
                let freq = optimize_frequencies(&plan, &s);
                assert_eq!(freq.shortfall_bits, 0.0);
                plan = freq.plan;
                let e2 = segment_energy(&plan, &s).total_j;
                assert!(e2 <= e1 + 1e-9 * e1.max(1.0));
                plan = optimize_trajectory_sca(&plan, &s, radius);
                let e3 = segment_energy(&plan, &s).total_j;
                assert!(e3 <= e2 + 1e-9 * e2.max(1.0));
                e = e3;
            }
            plan.check_invariants(&s).unwrap();
        }
    }

    #[test]
    fn empty_load_flies_at_max_range_speed() {
        let s = test_scenario(11);
        let a = Point2::new(100.0, 100.0);
        let b = Point2::new(800.0, 600.0);
        let plan = optimize_segment(a, b, 0.0, &s, &BcdConfig {
            slots: 10,
            ..BcdConfig::default()
        })
        .unwrap();
        let v_mr = max_range_speed(&s.uav.rotor, s.uav.v_max_mps);
        let analytic = flight_power_w(v_mr, &s.uav.rotor) * a.dist(b) / v_mr;
        let e = segment_energy(&plan, &s).total_j;
        assert!(
            (e - analytic).abs() <= 0.01 * analytic,
            "empty-load energy {e} vs analytic {analytic}"
        );
    }

    #[test]
    fn optimize_segment_is_deterministic() {
        let s = test_scenario(12);
        let cfg = BcdConfig {
            slots: 8,
            bcd_max_iter: 6,
            ..BcdConfig::default()
        };
        let a = Point2::new(200.0, 150.0);
        let b = Point2::new(700.0, 650.0);
        let p1 = optimize_segment(a, b, 2e8, &s, &cfg).unwrap();
        let p2 = optimize_segment(a, b, 2e8, &s, &cfg).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn mission_legs_carry_departure_loads() {
        let s = test_scenario(13);
        let route = Route {
            uav_id: 1,
            order: vec![2, 5],
        };
        let cfg = BcdConfig {
            slots: 6,
            bcd_max_iter: 3,
            ..BcdConfig::default()
        };
        let mission = plan_mission(&route, &s, &cfg).unwrap();
        assert_eq!(mission.segments.len(), 3);
        assert_eq!(mission.segments[0].q_target_bits, 0.0);
        assert_eq!(mission.segments[1].q_target_bits, s.cruise_points[2].data_bits);
        assert_eq!(mission.segments[2].q_target_bits, s.cruise_points[5].data_bits);
        // Segment endpoints chain start -> p2 -> p5 -> finish.
        assert_eq!(mission.segments[0].waypoints[0], s.start);
        assert_eq!(
            *mission.segments[0].waypoints.last().unwrap(),
            s.cruise_points[2].position
        );
        assert_eq!(
            *mission.segments[2].waypoints.last().unwrap(),
            s.finish
        );
        // Mission totals are the exact sums of the segment numbers.
        let e_sum = mission
            .segments
            .iter()
            .fold(EnergyBreakdown::ZERO, |acc, p| acc.add(segment_energy(p, &s)));
        assert_eq!(mission.energy.total_j, e_sum.total_j);
        let t_sum: f64 = mission.segments.iter().map(|p| p.duration_s()).sum();
        assert_eq!(mission.t_total_s, t_sum);
    }

    #[test]
    fn surrogate_log_bound_is_global_lower_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let c = rng.gen_range(1e2..1e8);
            let alpha = rng.gen_range(2.0..4.0);
            let z_hat = rng.gen_range(1e3..1e6);
            let z = rng.gen_range(1e3..1e6);
            let (a, b) = sca::log_affine_bound(z_hat, c, alpha);
            let bound = a - b * z;
            let exact = sca::log_term(z, c, alpha);
            assert!(
                bound <= exact + 1e-9 * exact.abs().max(1.0),
                "bound {bound} above exact {exact} at z={z}, z_hat={z_hat}"
            );
        }
    }
}
