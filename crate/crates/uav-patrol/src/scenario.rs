//! World model: cruise points, ground stations, UAV and channel
//! parameters, the on-disk scenario format, and a seeded generator.
//!
//! A `Scenario` is immutable after construction and safe to share
//! read-only across worker threads.

use std::ops::{Add, Mul, Sub};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// 2-D position in meters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// A point the UAV must visit; `data_bits` is collected there and must be
/// fully processed (locally or via offload) before the next point.
#[derive(Debug, Clone, PartialEq)]
pub struct CruisePoint {
    pub id: u32,
    pub position: Point2,
    pub data_bits: f64,
}

/// Ground base station able to receive offloaded data and process it at
/// up to `max_cpu_hz` cycles per second.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundStation {
    pub id: u32,
    pub position: Point2,
    pub height_m: f64,
    pub max_cpu_hz: f64,
}

/// Rotary-wing propulsion parameters for the flight power model.
#[derive(Debug, Clone, PartialEq)]
pub struct RotorParams {
    /// Blade profile power in hover, W.
    pub p0_w: f64,
    /// Induced power in hover, W.
    pub pi_w: f64,
    /// Mean rotor induced velocity in hover, m/s.
    pub v0_mps: f64,
    /// Fuselage drag ratio.
    pub d0: f64,
    /// Air density, kg/m^3.
    pub rho_kgm3: f64,
    /// Rotor solidity.
    pub s: f64,
    /// Rotor disc area, m^2.
    pub disc_area_m2: f64,
    /// Rotor blade tip speed, m/s.
    pub u_tip_mps: f64,
}

/// UAV platform: kinematics, radio, and onboard compute.
#[derive(Debug, Clone, PartialEq)]
pub struct UavModel {
    pub altitude_m: f64,
    pub v_max_mps: f64,
    /// Constant transmit power while offloading, W.
    pub tx_power_w: f64,
    /// Cap on the onboard CPU frequency, cycles/s.
    pub max_cpu_hz: f64,
    /// Effective switched capacitance of the onboard CPU, J*s^2/cycles^3.
    pub cap_coeff: f64,
    pub rotor: RotorParams,
}

/// Air-to-ground channel and workload parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub bandwidth_hz: f64,
    /// Linear power gain at 1 m reference distance.
    pub beta0: f64,
    pub noise_w: f64,
    /// SNR gap to capacity, >= 1.
    pub snr_gap: f64,
    /// Path-loss exponent, >= 2.
    pub alpha: f64,
    // Sigmoid coefficients of the elevation-dependent rate factor:
    // chi1 < 0, chi2 > 0 (per degree), chi4 > 0, chi3 + chi4 = 1.
    pub chi1: f64,
    pub chi2: f64,
    pub chi3: f64,
    pub chi4: f64,
    /// CPU cycles needed per bit of inspection data.
    pub cycles_per_bit: f64,
}

/// Tuning weights for the assignment objective and the completion-time
/// compensation terms of the mission objective.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// Coefficient of the pairwise movement-distance difference in the
    /// two-cluster form of the assignment problem; kept for completeness,
    /// `psi` plays its role in the matrix objective.
    pub u: f64,
    /// Weight of the pairwise distance-load difference.
    pub psi: f64,
    /// Weight of the pairwise data-load difference.
    pub v: f64,
    /// Weight of the pairwise offload-rate difference.
    pub w: f64,
    /// Data-variance weight in the clustering distance.
    pub m: f64,
    /// Rate-variance weight in the clustering distance.
    pub n: f64,
    /// Completion-time compensation, J/s.
    pub phi: f64,
    /// Completion-time balance compensation, J/s.
    pub lambda: f64,
    /// Half-width of the four-direction neighbor search box, m.
    pub neighbor_d_m: f64,
}

/// Immutable world model consumed by every pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cruise_points: Vec<CruisePoint>,
    pub stations: Vec<GroundStation>,
    pub uav: UavModel,
    pub channel: ChannelParams,
    pub n_uavs: usize,
    pub start: Point2,
    pub finish: Point2,
    /// Maximum cruise points per cluster.
    pub c_max: usize,
    pub weights: Weights,
}

impl Scenario {
    /// Vertical separation |H_U - H_G| used by the link geometry.
    ///
    /// Stored heights may put the stations above the UAV (rooftop masts);
    /// the line-of-sight model consumes the magnitude.
    pub fn delta_h(&self, station: &GroundStation) -> f64 {
        (self.uav.altitude_m - station.height_m).abs()
    }

    pub fn k(&self) -> usize {
        self.cruise_points.len()
    }

    /// Checks every structural invariant, naming the first violated one.
    pub fn validate(&self) -> Result<()> {
        let k = self.cruise_points.len();
        if k < 1 {
            return Err(Error::Invariant("K >= 1 (no cruise points)".into()));
        }
        if self.stations.is_empty() {
            return Err(Error::Invariant("M >= 1 (no ground stations)".into()));
        }
        if self.n_uavs < 1 {
            return Err(Error::Invariant("n_uavs >= 1".into()));
        }
        if self.n_uavs * self.c_max < k {
            return Err(Error::Invariant(format!(
                "n_uavs * c_max >= K ({} * {} < {})",
                self.n_uavs, self.c_max, k
            )));
        }

        let mut ids: Vec<u32> = self.cruise_points.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.iter().enumerate().any(|(i, &id)| id != i as u32 + 1) {
            return Err(Error::Invariant("cruise point ids not dense 1..K".into()));
        }
        for p in &self.cruise_points {
            if !p.position.is_finite() {
                return Err(Error::Invariant(format!(
                    "cruise point {} has non-finite coordinates",
                    p.id
                )));
            }
            if !p.data_bits.is_finite() || p.data_bits < 0.0 {
                return Err(Error::Invariant(format!(
                    "cruise point {} data_bits not finite and >= 0",
                    p.id
                )));
            }
        }

        let mut sids: Vec<u32> = self.stations.iter().map(|s| s.id).collect();
        sids.sort_unstable();
        sids.dedup();
        if sids.len() != self.stations.len() {
            return Err(Error::Invariant("station ids not unique".into()));
        }
        for s in &self.stations {
            if !s.position.is_finite() {
                return Err(Error::Invariant(format!(
                    "station {} has non-finite coordinates",
                    s.id
                )));
            }
            if !(s.height_m > 0.0) {
                return Err(Error::Invariant(format!("station {} height <= 0", s.id)));
            }
            if !(s.max_cpu_hz > 0.0) {
                return Err(Error::Invariant(format!("station {} max_cpu_hz <= 0", s.id)));
            }
        }
        for (i, a) in self.stations.iter().enumerate() {
            for b in &self.stations[i + 1..] {
                if a.position == b.position {
                    return Err(Error::Invariant(format!(
                        "station positions not distinct ({} and {})",
                        a.id, b.id
                    )));
                }
            }
        }

        let u = &self.uav;
        let r = &u.rotor;
        let uav_fields = [
            ("uav altitude_m", u.altitude_m),
            ("uav v_max_mps", u.v_max_mps),
            ("uav tx_power_w", u.tx_power_w),
            ("uav max_cpu_hz", u.max_cpu_hz),
            ("uav cap_coeff", u.cap_coeff),
            ("rotor p0_w", r.p0_w),
            ("rotor pi_w", r.pi_w),
            ("rotor v0_mps", r.v0_mps),
            ("rotor d0", r.d0),
            ("rotor rho_kgm3", r.rho_kgm3),
            ("rotor s", r.s),
            ("rotor disc_area_m2", r.disc_area_m2),
            ("rotor u_tip_mps", r.u_tip_mps),
        ];
        for (name, val) in uav_fields {
            if !(val > 0.0) || !val.is_finite() {
                return Err(Error::Invariant(format!("{name} must be positive")));
            }
        }

        let c = &self.channel;
        if !(c.bandwidth_hz > 0.0) {
            return Err(Error::Invariant("channel bandwidth_hz must be positive".into()));
        }
        if !(c.beta0 > 0.0) {
            return Err(Error::Invariant("channel beta0 must be positive".into()));
        }
        if !(c.noise_w > 0.0) {
            return Err(Error::Invariant("channel noise_w must be positive".into()));
        }
        if !(c.snr_gap >= 1.0) {
            return Err(Error::Invariant("channel snr_gap must be >= 1".into()));
        }
        if !(c.alpha >= 2.0) {
            return Err(Error::Invariant("channel alpha must be >= 2".into()));
        }
        if !(c.chi1 < 0.0) {
            return Err(Error::Invariant("chi1 must be < 0".into()));
        }
        if !(c.chi2 > 0.0) {
            return Err(Error::Invariant("chi2 must be > 0".into()));
        }
        if !(c.chi4 > 0.0) {
            return Err(Error::Invariant("chi4 must be > 0".into()));
        }
        if c.chi3 + c.chi4 != 1.0 {
            return Err(Error::Invariant("chi3+chi4 != 1".into()));
        }
        if !(c.cycles_per_bit > 0.0) {
            return Err(Error::Invariant("channel cycles_per_bit must be positive".into()));
        }

        let w = &self.weights;
        let weight_fields = [
            ("weights u", w.u),
            ("weights psi", w.psi),
            ("weights v", w.v),
            ("weights w", w.w),
            ("weights phi", w.phi),
            ("weights lambda", w.lambda),
            ("weights neighbor_d_m", w.neighbor_d_m),
        ];
        for (name, val) in weight_fields {
            if !(val >= 0.0) || !val.is_finite() {
                return Err(Error::Invariant(format!("{name} must be >= 0")));
            }
        }
        // The metric weights m and n may be negative (a negative data
        // weight evens cluster loads), they just have to be finite.
        if !w.m.is_finite() || !w.n.is_finite() {
            return Err(Error::Invariant("weights m and n must be finite".into()));
        }

        if !self.start.is_finite() || !self.finish.is_finite() {
            return Err(Error::Invariant("start/finish must be finite".into()));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// On-disk format (TOML). Raw mirror structs keep the file schema explicit
// and reject unknown keys; domain structs stay free of serde concerns.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScenario {
    cruise_points: Vec<FileCruisePoint>,
    stations: Vec<FileStation>,
    uav: FileUav,
    channel: FileChannel,
    weights: FileWeights,
    mission: FileMission,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCruisePoint {
    id: u32,
    x_m: f64,
    y_m: f64,
    q_bits: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileStation {
    id: u32,
    x_m: f64,
    y_m: f64,
    h_m: f64,
    f_max_hz: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileUav {
    h_m: f64,
    v_max_mps: f64,
    tx_power_w: f64,
    f_max_hz: f64,
    cap_coeff: f64,
    rotor: FileRotor,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRotor {
    p0_w: f64,
    pi_w: f64,
    v0_mps: f64,
    d0: f64,
    rho_kgm3: f64,
    s: f64,
    disc_area_m2: f64,
    u_tip_mps: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileChannel {
    bandwidth_hz: f64,
    beta0: f64,
    noise_w: f64,
    snr_gap: f64,
    alpha: f64,
    chi1: f64,
    chi2: f64,
    chi3: f64,
    chi4: f64,
    cycles_per_bit: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileWeights {
    u: f64,
    psi: f64,
    v: f64,
    w: f64,
    m: f64,
    n: f64,
    phi: f64,
    lambda: f64,
    neighbor_d_m: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileMission {
    n_uavs: usize,
    start_xy: [f64; 2],
    finish_xy: [f64; 2],
    c_max: usize,
}

impl From<&Scenario> for FileScenario {
    fn from(s: &Scenario) -> Self {
        FileScenario {
            cruise_points: s
                .cruise_points
                .iter()
                .map(|p| FileCruisePoint {
                    id: p.id,
                    x_m: p.position.x,
                    y_m: p.position.y,
                    q_bits: p.data_bits,
                })
                .collect(),
            stations: s
                .stations
                .iter()
                .map(|g| FileStation {
                    id: g.id,
                    x_m: g.position.x,
                    y_m: g.position.y,
                    h_m: g.height_m,
                    f_max_hz: g.max_cpu_hz,
                })
                .collect(),
            uav: FileUav {
                h_m: s.uav.altitude_m,
                v_max_mps: s.uav.v_max_mps,
                tx_power_w: s.uav.tx_power_w,
                f_max_hz: s.uav.max_cpu_hz,
                cap_coeff: s.uav.cap_coeff,
                rotor: FileRotor {
                    p0_w: s.uav.rotor.p0_w,
                    pi_w: s.uav.rotor.pi_w,
                    v0_mps: s.uav.rotor.v0_mps,
                    d0: s.uav.rotor.d0,
                    rho_kgm3: s.uav.rotor.rho_kgm3,
                    s: s.uav.rotor.s,
                    disc_area_m2: s.uav.rotor.disc_area_m2,
                    u_tip_mps: s.uav.rotor.u_tip_mps,
                },
            },
            channel: FileChannel {
                bandwidth_hz: s.channel.bandwidth_hz,
                beta0: s.channel.beta0,
                noise_w: s.channel.noise_w,
                snr_gap: s.channel.snr_gap,
                alpha: s.channel.alpha,
                chi1: s.channel.chi1,
                chi2: s.channel.chi2,
                chi3: s.channel.chi3,
                chi4: s.channel.chi4,
                cycles_per_bit: s.channel.cycles_per_bit,
            },
            weights: FileWeights {
                u: s.weights.u,
                psi: s.weights.psi,
                v: s.weights.v,
                w: s.weights.w,
                m: s.weights.m,
                n: s.weights.n,
                phi: s.weights.phi,
                lambda: s.weights.lambda,
                neighbor_d_m: s.weights.neighbor_d_m,
            },
            mission: FileMission {
                n_uavs: s.n_uavs,
                start_xy: [s.start.x, s.start.y],
                finish_xy: [s.finish.x, s.finish.y],
                c_max: s.c_max,
            },
        }
    }
}

impl From<FileScenario> for Scenario {
    fn from(f: FileScenario) -> Self {
        let mut cruise_points: Vec<CruisePoint> = f
            .cruise_points
            .into_iter()
            .map(|p| CruisePoint {
                id: p.id,
                position: Point2::new(p.x_m, p.y_m),
                data_bits: p.q_bits,
            })
            .collect();
        // Canonical order: dense ids 1..K map to indices 0..K-1.
        cruise_points.sort_by_key(|p| p.id);
        Scenario {
            cruise_points,
            stations: f
                .stations
                .into_iter()
                .map(|g| GroundStation {
                    id: g.id,
                    position: Point2::new(g.x_m, g.y_m),
                    height_m: g.h_m,
                    max_cpu_hz: g.f_max_hz,
                })
                .collect(),
            uav: UavModel {
                altitude_m: f.uav.h_m,
                v_max_mps: f.uav.v_max_mps,
                tx_power_w: f.uav.tx_power_w,
                max_cpu_hz: f.uav.f_max_hz,
                cap_coeff: f.uav.cap_coeff,
                rotor: RotorParams {
                    p0_w: f.uav.rotor.p0_w,
                    pi_w: f.uav.rotor.pi_w,
                    v0_mps: f.uav.rotor.v0_mps,
                    d0: f.uav.rotor.d0,
                    rho_kgm3: f.uav.rotor.rho_kgm3,
                    s: f.uav.rotor.s,
                    disc_area_m2: f.uav.rotor.disc_area_m2,
                    u_tip_mps: f.uav.rotor.u_tip_mps,
                },
            },
            channel: ChannelParams {
                bandwidth_hz: f.channel.bandwidth_hz,
                beta0: f.channel.beta0,
                noise_w: f.channel.noise_w,
                snr_gap: f.channel.snr_gap,
                alpha: f.channel.alpha,
                chi1: f.channel.chi1,
                chi2: f.channel.chi2,
                chi3: f.channel.chi3,
                chi4: f.channel.chi4,
                cycles_per_bit: f.channel.cycles_per_bit,
            },
            n_uavs: f.mission.n_uavs,
            start: Point2::new(f.mission.start_xy[0], f.mission.start_xy[1]),
            finish: Point2::new(f.mission.finish_xy[0], f.mission.finish_xy[1]),
            c_max: f.mission.c_max,
            weights: Weights {
                u: f.weights.u,
                psi: f.weights.psi,
                v: f.weights.v,
                w: f.weights.w,
                m: f.weights.m,
                n: f.weights.n,
                phi: f.weights.phi,
                lambda: f.weights.lambda,
                neighbor_d_m: f.weights.neighbor_d_m,
            },
        }
    }
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}

/// Parses a scenario from its textual form; `origin` labels errors.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario> {
    let raw: FileScenario = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_string(),
        msg: e.to_string(),
    })?;
    let scenario = Scenario::from(raw);
    scenario.validate()?;
    Ok(scenario)
}

/// Serializes a scenario to its canonical textual form.
pub fn scenario_to_string(s: &Scenario) -> String {
    toml::to_string_pretty(&FileScenario::from(s)).expect("scenario serialization cannot fail")
}

/// Writes the canonical serialization of `s` to `path`.
pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scenario_to_string(s)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

/// Default platform parameters (25 m cruise altitude, 20 m/s cap,
/// 0.1 W radio, 0.8 GHz CPU) used by the generator.
pub fn default_uav() -> UavModel {
    UavModel {
        altitude_m: 25.0,
        v_max_mps: 20.0,
        tx_power_w: 0.1,
        max_cpu_hz: 0.8e9,
        cap_coeff: 1e-27,
        rotor: RotorParams {
            p0_w: 79.8,
            pi_w: 88.6,
            v0_mps: 4.0,
            d0: 0.6,
            rho_kgm3: 1.2,
            s: 0.05,
            disc_area_m2: 0.5,
            u_tip_mps: 120.0,
        },
    }
}

/// Default channel: 1 MHz bandwidth, -50 dB gain at 1 m, -100 dBm noise,
/// ~1 dB SNR gap, path-loss exponent 2.7, 1000 cycles/bit workload.
pub fn default_channel() -> ChannelParams {
    ChannelParams {
        bandwidth_hz: 1e6,
        beta0: 1e-5,
        noise_w: 1e-13,
        snr_gap: 1.26,
        alpha: 2.7,
        chi1: -1.5,
        chi2: 0.15,
        chi3: 0.2,
        chi4: 0.8,
        cycles_per_bit: 1000.0,
    }
}

/// Default assignment weights. The features are normalized to comparable
/// unitless scales first, so these are pure preference knobs. The
/// objective weights keep movement and distance-load at 1 and raise the
/// data-load imbalance weight (v=8) so the cost of an offload gap is
/// visible next to the movement term. The metric weights m and n are
/// negative: a point then prefers the cluster whose mean data load (and,
/// weakly, mean rate) differs most from its own, which drains overloaded
/// clusters and evens the totals; the magnitudes were chosen on 100-seed
/// sweeps as the smallest that reliably un-sticks the balance without
/// wrecking cluster compactness. The neighbor search box spans the whole
/// map so every point keeps a nearest point per axis direction and the
/// movement proxy never silently drops to zero on sparse instances.
pub fn default_weights(extent_m: f64) -> Weights {
    Weights {
        u: 1.0,
        psi: 1.0,
        v: 8.0,
        w: 1.0,
        m: -8.0,
        n: -2.0,
        phi: 0.0,
        lambda: 0.0,
        neighbor_d_m: extent_m,
    }
}

/// Hexagonal station lattice covering `[0, extent]^2` with the given pitch.
fn hex_lattice(extent_m: f64, pitch_m: f64) -> Vec<Point2> {
    let row_step = pitch_m * 3f64.sqrt() / 2.0;
    let eps = 1e-9 * extent_m.max(1.0);
    let mut out = Vec::new();
    let mut row = 0usize;
    loop {
        let y = row as f64 * row_step;
        if y > extent_m + eps {
            break;
        }
        let offset = if row % 2 == 1 { pitch_m / 2.0 } else { 0.0 };
        let mut col = 0usize;
        loop {
            let x = offset + col as f64 * pitch_m;
            if x > extent_m + eps {
                break;
            }
            out.push(Point2::new(x, y));
            col += 1;
        }
        row += 1;
    }
    out
}

/// Builds a reproducible random scenario: `k` cruise points uniform over
/// `extent x extent` meters with data volumes uniform in `q_range`,
/// stations on a hexagonal lattice (pitch `extent/2`), and a shared
/// start/finish point adjacent to the central lattice station.
pub fn generate_scenario(
    seed: u64,
    k: usize,
    n_uavs: usize,
    extent_m: f64,
    q_range: (f64, f64),
) -> Result<Scenario> {
    generate_scenario_with_pitch(seed, k, n_uavs, extent_m, q_range, extent_m / 2.0)
}

/// `generate_scenario` with an explicit lattice pitch.
pub fn generate_scenario_with_pitch(
    seed: u64,
    k: usize,
    n_uavs: usize,
    extent_m: f64,
    q_range: (f64, f64),
    pitch_m: f64,
) -> Result<Scenario> {
    if k < 1 {
        return Err(Error::Invariant("generator needs k >= 1".into()));
    }
    if !(extent_m > 0.0) || !(pitch_m > 0.0) {
        return Err(Error::Invariant("generator needs extent > 0 and pitch > 0".into()));
    }
    if q_range.0 > q_range.1 || q_range.0 < 0.0 {
        return Err(Error::Invariant("generator needs 0 <= q_min <= q_max".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cruise_points = (0..k)
        .map(|i| {
            let x = rng.gen_range(0.0..extent_m);
            let y = rng.gen_range(0.0..extent_m);
            let q = if q_range.0 == q_range.1 {
                q_range.0
            } else {
                rng.gen_range(q_range.0..q_range.1)
            };
            CruisePoint {
                id: i as u32 + 1,
                position: Point2::new(x, y),
                data_bits: q,
            }
        })
        .collect();

    let stations = hex_lattice(extent_m, pitch_m)
        .into_iter()
        .enumerate()
        .map(|(i, position)| GroundStation {
            id: i as u32 + 1,
            position,
            height_m: 100.0,
            max_cpu_hz: 8e9,
        })
        .collect::<Vec<_>>();

    // Start/finish: offset a quarter pitch from the lattice station
    // nearest the extent center, clamped to the map.
    let center = Point2::new(extent_m / 2.0, extent_m / 2.0);
    let anchor = stations
        .iter()
        .map(|s| s.position)
        .min_by(|a, b| a.dist(center).total_cmp(&b.dist(center)))
        .expect("lattice is never empty");
    let start = Point2::new(
        (anchor.x + pitch_m / 4.0).clamp(0.0, extent_m),
        (anchor.y + pitch_m / 4.0).clamp(0.0, extent_m),
    );

    // Tight per-cluster cap: an even split plus one point of slack, so
    // the assignment stage has to balance cluster sizes.
    let c_max = (k + n_uavs - 1) / n_uavs;
    let scenario = Scenario {
        cruise_points,
        stations,
        uav: default_uav(),
        channel: default_channel(),
        n_uavs,
        start,
        finish: start,
        c_max,
        weights: default_weights(extent_m),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_scenario() -> Scenario {
        generate_scenario(7, 12, 2, 1000.0, (5e7, 5e8)).unwrap()
    }

    #[test]
    fn generator_is_deterministic() {
        let a = generate_scenario(1, 20, 2, 1000.0, (1e8, 3e8)).unwrap();
        let b = generate_scenario(1, 20, 2, 1000.0, (1e8, 3e8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generator_respects_extent_and_q_range() {
        let s = generate_scenario(3, 40, 4, 800.0, (1e8, 2e8)).unwrap();
        assert_eq!(s.cruise_points.len(), 40);
        assert_eq!(s.n_uavs, 4);
        for p in &s.cruise_points {
            assert!(p.position.x >= 0.0 && p.position.x <= 800.0);
            assert!(p.position.y >= 0.0 && p.position.y <= 800.0);
            assert!(p.data_bits >= 1e8 && p.data_bits <= 2e8);
        }
    }

    #[test]
    fn degenerate_q_range_pins_all_volumes() {
        let s = generate_scenario(9, 10, 2, 1000.0, (1e8, 1e8)).unwrap();
        assert!(s.cruise_points.iter().all(|p| p.data_bits == 1e8));
    }

    #[test]
    fn generated_scenarios_validate() {
        for seed in 0..10 {
            let s = generate_scenario(seed, 20, 2, 1000.0, (5e7, 5e8)).unwrap();
            s.validate().unwrap();
        }
    }

    #[test]
    fn lattice_is_honeycomb_like() {
        let pts = hex_lattice(1000.0, 500.0);
        // Three rows (y = 0, 433, 866); middle row offset by half a pitch.
        assert_eq!(pts.len(), 8);
        let mid: Vec<_> = pts.iter().filter(|p| p.y > 100.0 && p.y < 800.0).collect();
        assert_eq!(mid.len(), 2);
        assert!((mid[0].x - 250.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_preserves_every_field() {
        let s = sample_scenario();
        let text = scenario_to_string(&s);
        let back = parse_scenario(&text, "mem").unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn save_and_load_round_trip_on_disk() {
        let s = sample_scenario();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.toml");
        save_scenario(&s, &path).unwrap();
        let back = load_scenario(&path).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let s = sample_scenario();
        let mut text = scenario_to_string(&s);
        text.push_str("\n[extra]\nbogus = 1\n");
        assert!(parse_scenario(&text, "mem").is_err());
        let text2 = scenario_to_string(&s).replace("[uav]", "[uav]\nwarp_drive = true");
        assert!(parse_scenario(&text2, "mem").is_err());
    }

    #[test]
    fn chi_sum_condition_is_exact() {
        let mut s = sample_scenario();
        s.channel.chi3 = 0.2;
        s.channel.chi4 = 0.8;
        s.validate().unwrap();
        s.channel.chi3 = 0.3;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("chi3+chi4 != 1"), "got: {err}");
    }

    #[test]
    fn capacity_invariant_is_checked() {
        let mut s = sample_scenario();
        s.c_max = 5; // 2 * 5 < 12
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("n_uavs * c_max"), "got: {err}");
    }

    #[test]
    fn dense_id_invariant_is_checked() {
        let mut s = sample_scenario();
        s.cruise_points[3].id = 99;
        assert!(s.validate().is_err());
    }

    #[test]
    fn table_defaults_survive_the_file_format() {
        let s = sample_scenario();
        let text = scenario_to_string(&s);
        let back = parse_scenario(&text, "mem").unwrap();
        assert_eq!(back.uav.rotor.p0_w, 79.8);
        assert_eq!(back.uav.rotor.pi_w, 88.6);
        assert_eq!(back.uav.rotor.v0_mps, 4.0);
        assert_eq!(back.uav.rotor.u_tip_mps, 120.0);
        assert_eq!(back.channel.cycles_per_bit, 1000.0);
        assert_eq!(back.uav.cap_coeff, 1e-27);
        assert_eq!(back.uav.tx_power_w, 0.1);
        assert_eq!(back.channel.bandwidth_hz, 1e6);
        assert_eq!(back.channel.beta0, 1e-5);
        assert_eq!(back.channel.noise_w, 1e-13);
    }
}
