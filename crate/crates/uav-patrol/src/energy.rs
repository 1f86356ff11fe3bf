//! Propulsion, compute, and transmit energy models, plus the
//! max-range speed used to seed every flight plan.

use crate::scenario::{RotorParams, Scenario};
use crate::trajectory::SegmentPlan;

/// Per-segment (or per-mission) energy split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub flight_j: f64,
    pub compute_j: f64,
    pub transmit_j: f64,
    pub total_j: f64,
}

impl EnergyBreakdown {
    pub fn new(flight_j: f64, compute_j: f64, transmit_j: f64) -> Self {
        EnergyBreakdown {
            flight_j,
            compute_j,
            transmit_j,
            total_j: flight_j + compute_j + transmit_j,
        }
    }

    pub const ZERO: EnergyBreakdown = EnergyBreakdown {
        flight_j: 0.0,
        compute_j: 0.0,
        transmit_j: 0.0,
        total_j: 0.0,
    };

    pub fn add(self, other: EnergyBreakdown) -> EnergyBreakdown {
        EnergyBreakdown::new(
            self.flight_j + other.flight_j,
            self.compute_j + other.compute_j,
            self.transmit_j + other.transmit_j,
        )
    }
}

/// Rotary-wing power at forward speed `v`:
/// blade profile + induced + parasite terms.
///
/// P0*(1 + 3v^2/Utip^2) + Pi*(sqrt(1 + v^4/(4 v0^4)) - v^2/(2 v0^2))^(1/2)
/// + (1/2) d0 rho s A v^3
pub fn flight_power_w(speed_mps: f64, rotor: &RotorParams) -> f64 {
    let v2 = speed_mps * speed_mps;
    let profile = rotor.p0_w * (1.0 + 3.0 * v2 / (rotor.u_tip_mps * rotor.u_tip_mps));
    let v0_2 = rotor.v0_mps * rotor.v0_mps;
    let radical = (1.0 + v2 * v2 / (4.0 * v0_2 * v0_2)).sqrt() - v2 / (2.0 * v0_2);
    // The radical is analytically positive; guard against cancellation at
    // large v where it approaches zero from above.
    let induced = rotor.pi_w * radical.max(0.0).sqrt();
    let parasite = 0.5 * rotor.d0 * rotor.rho_kgm3 * rotor.s * rotor.disc_area_m2 * v2 * speed_mps;
    profile + induced + parasite
}

/// Energy per meter at speed v; minimized by the max-range speed.
fn power_per_meter(v: f64, rotor: &RotorParams) -> f64 {
    flight_power_w(v, rotor) / v
}

/// Speed minimizing energy per meter of forward flight, within
/// (0, v_max], found to better than +/-0.01 m/s.
///
/// Golden-section search over (0.01, v_max]; a coarse grid scan guards
/// against non-unimodal parameter corners and picks the better result.
pub fn max_range_speed(rotor: &RotorParams, v_max_mps: f64) -> f64 {
    let lo = 0.01;
    let hi = v_max_mps.max(lo + 1e-6);
    let golden = golden_section(lo, hi, 1e-6, |v| power_per_meter(v, rotor));

    // Fallback scan: 200 coarse cells, refined if any beats the local optimum.
    let mut best_v = golden;
    let mut best = power_per_meter(golden, rotor);
    let cells = 200;
    for i in 0..=cells {
        let v = lo + (hi - lo) * i as f64 / cells as f64;
        let val = power_per_meter(v, rotor);
        if val < best {
            let cell = (hi - lo) / cells as f64;
            let refined = golden_section(
                (v - cell).max(lo),
                (v + cell).min(hi),
                1e-6,
                |x| power_per_meter(x, rotor),
            );
            let rv = power_per_meter(refined, rotor);
            if rv < best {
                best = rv;
                best_v = refined;
            }
        }
    }
    best_v
}

fn golden_section(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Discretized energy of one planned segment:
/// flight = sum P(|v_l|) delta_l, compute = sum cap_coeff f_l^3 delta_l,
/// transmit = sum tau_{l,m} P_tx delta_l.
pub fn segment_energy(plan: &SegmentPlan, scenario: &Scenario) -> EnergyBreakdown {
    let uav = &scenario.uav;
    let mut flight = 0.0;
    let mut compute = 0.0;
    let mut transmit = 0.0;
    for l in 0..plan.slots() {
        let dt = plan.slot_s[l];
        let dist = plan.waypoints[l + 1].dist(plan.waypoints[l]);
        let speed = if dt > 0.0 { dist / dt } else { 0.0 };
        flight += flight_power_w(speed, &uav.rotor) * dt;
        compute += uav.cap_coeff * plan.f_uav[l].powi(3) * dt;
        let tau_sum: f64 = plan.tau[l].iter().sum();
        transmit += tau_sum * uav.tx_power_w * dt;
    }
    EnergyBreakdown::new(flight, compute, transmit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{default_uav, generate_scenario};
    use crate::trajectory::SegmentPlan;
    use approx::assert_relative_eq;

    fn rotor() -> RotorParams {
        default_uav().rotor
    }

    #[test]
    fn hover_power_is_profile_plus_induced() {
        // v=0: radical is exactly 1, parasite 0 -> P0 + Pi.
        assert!((flight_power_w(0.0, &rotor()) - 168.4).abs() < 1e-9);
    }

    #[test]
    fn power_at_ten_mps_matches_high_precision_oracle() {
        // Frozen 50-digit evaluation of the full power expression.
        assert_relative_eq!(
            flight_power_w(10.0, &rotor()),
            125.468_043_485_291_58,
            max_relative = 1e-14
        );
    }

    #[test]
    fn parasite_term_dominates_at_high_speed() {
        let r = rotor();
        let v = 2000.0;
        let parasite = 0.5 * r.d0 * r.rho_kgm3 * r.s * r.disc_area_m2 * v * v * v;
        let ratio = flight_power_w(v, &r) / parasite;
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn max_range_speed_matches_fine_grid() {
        let r = rotor();
        let v = max_range_speed(&r, 20.0);
        let mut best_v = 0.001;
        let mut best = f64::INFINITY;
        let mut i = 1;
        loop {
            let g = i as f64 * 0.001;
            if g > 20.0 {
                break;
            }
            let val = power_per_meter(g, &r);
            if val < best {
                best = val;
                best_v = g;
            }
            i += 1;
        }
        assert!(
            (v - best_v).abs() <= 0.01,
            "golden {v} vs grid {best_v} (P/v {best})"
        );
    }

    #[test]
    fn max_range_speed_is_a_local_min_and_scale_invariant() {
        let r = rotor();
        let v = max_range_speed(&r, 20.0);
        let here = power_per_meter(v, &r);
        assert!(here <= power_per_meter(v / 2.0, &r));
        assert!(here <= power_per_meter((2.0 * v).min(20.0), &r));

        let mut scaled = r.clone();
        scaled.p0_w *= 3.5;
        scaled.pi_w *= 3.5;
        // Parasite coefficient scales through d0.
        scaled.d0 *= 3.5;
        let v2 = max_range_speed(&scaled, 20.0);
        assert!((v - v2).abs() < 1e-3, "{v} vs {v2}");
    }

    #[test]
    fn power_per_meter_is_unimodal_on_grid() {
        let r = rotor();
        let mut prev = power_per_meter(0.05, &r);
        let mut sign_changes = 0;
        let mut last_sign = 0i32;
        let mut v = 0.1;
        while v <= 20.0 {
            let cur = power_per_meter(v, &r);
            let d = cur - prev;
            if d.abs() > 1e-9 {
                let s = if d > 0.0 { 1 } else { -1 };
                if last_sign != 0 && s != last_sign {
                    sign_changes += 1;
                }
                last_sign = s;
            }
            prev = cur;
            v += 0.05;
        }
        assert!(sign_changes <= 1, "{sign_changes} sign changes");
    }

    fn hover_plan(duration_s: f64, slots: usize, m: usize) -> SegmentPlan {
        let p = crate::scenario::Point2::new(100.0, 100.0);
        SegmentPlan {
            waypoints: vec![p; slots + 1],
            slot_s: vec![duration_s / slots as f64; slots],
            tau: vec![vec![0.0; m]; slots],
            f_uav: vec![0.0; slots],
            f_gbs: vec![vec![0.0; m]; slots],
            q_target_bits: 0.0,
        }
    }

    #[test]
    fn hover_segment_energy_is_hover_power_times_time() {
        let s = generate_scenario(1, 4, 2, 1000.0, (0.0, 0.0)).unwrap();
        let plan = hover_plan(10.0, 5, s.stations.len());
        let e = segment_energy(&plan, &s);
        assert_relative_eq!(e.flight_j, 1684.0, max_relative = 1e-12);
        assert_eq!(e.compute_j, 0.0);
        assert_eq!(e.transmit_j, 0.0);
        assert_relative_eq!(e.total_j, 1684.0, max_relative = 1e-12);
    }

    #[test]
    fn transmit_energy_is_tau_times_power_times_time() {
        let s = generate_scenario(1, 4, 2, 1000.0, (0.0, 0.0)).unwrap();
        let mut plan = hover_plan(2.0, 1, s.stations.len());
        plan.tau[0][0] = 1.0; // one full slot of 2 s at 0.1 W
        let e = segment_energy(&plan, &s);
        assert_relative_eq!(e.transmit_j, 0.2, max_relative = 1e-12);
    }

    #[test]
    fn compute_energy_matches_cubic_law() {
        let s = generate_scenario(1, 4, 2, 1000.0, (0.0, 0.0)).unwrap();
        let mut plan = hover_plan(1.0, 1, s.stations.len());
        plan.f_uav[0] = 0.8e9;
        let e = segment_energy(&plan, &s);
        assert_relative_eq!(e.compute_j, 0.512, max_relative = 1e-12);
    }

    #[test]
    fn segment_energy_additive_over_slot_split() {
        let s = generate_scenario(2, 4, 2, 1000.0, (0.0, 0.0)).unwrap();
        let m = s.stations.len();
        let a = crate::scenario::Point2::new(0.0, 0.0);
        let b = crate::scenario::Point2::new(120.0, 50.0);
        let mid = crate::scenario::Point2::new(60.0, 25.0);
        let whole = SegmentPlan {
            waypoints: vec![a, b],
            slot_s: vec![10.0],
            tau: vec![vec![0.25; m]],
            f_uav: vec![3e8],
            f_gbs: vec![vec![0.0; m]],
            q_target_bits: 0.0,
        };
        let halves = SegmentPlan {
            waypoints: vec![a, mid, b],
            slot_s: vec![5.0, 5.0],
            tau: vec![vec![0.25; m]; 2],
            f_uav: vec![3e8; 2],
            f_gbs: vec![vec![0.0; m]; 2],
            q_target_bits: 0.0,
        };
        let e1 = segment_energy(&whole, &s);
        let e2 = segment_energy(&halves, &s);
        assert_relative_eq!(e1.flight_j, e2.flight_j, max_relative = 1e-9);
        assert_relative_eq!(e1.compute_j, e2.compute_j, max_relative = 1e-9);
        assert_relative_eq!(e1.transmit_j, e2.transmit_j, max_relative = 1e-9);
        assert_relative_eq!(e1.total_j, e2.total_j, max_relative = 1e-9);
    }

    #[test]
    fn breakdown_total_is_exact_sum() {
        let e = EnergyBreakdown::new(1.25, 0.5, 0.125);
        assert_eq!(e.total_j, 1.25 + 0.5 + 0.125);
    }
}
