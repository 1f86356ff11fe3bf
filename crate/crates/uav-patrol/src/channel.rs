//! Air-to-ground link geometry and achievable offload rate, plus the
//! data-causality check used by schedule validation.
//!
//! The rate model combines an elevation-dependent line-of-sight factor
//! (a logistic curve in the elevation angle) with a log-distance capacity
//! term. All functions here are pure and reentrant.

use crate::scenario::{ChannelParams, GroundStation, Point2, UavModel};
use crate::{Error, Result};

/// One evaluated UAV-station link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub station_id: u32,
    pub distance_m: f64,
    pub elevation_deg: f64,
    pub rate_bps: f64,
}

/// Vertical separation used by the link geometry; heights may put the
/// station mast above the cruise altitude, the model wants the magnitude.
pub(crate) fn delta_h(gbs: &GroundStation, uav: &UavModel) -> f64 {
    (uav.altitude_m - gbs.height_m).abs()
}

/// Slant distance sqrt(dH^2 + horizontal^2) between UAV and station.
pub fn link_distance(uav_pos: Point2, gbs: &GroundStation, uav: &UavModel) -> f64 {
    let dh = delta_h(gbs, uav);
    let horiz = uav_pos.dist(gbs.position);
    dh.hypot(horiz)
}

/// Elevation angle of the UAV seen from the station, in degrees.
///
/// Returns exactly 90 when the horizontal offset is zero (the arctan
/// argument diverges there).
pub fn elevation_deg(uav_pos: Point2, gbs: &GroundStation, uav: &UavModel) -> f64 {
    let horiz = uav_pos.dist(gbs.position);
    if horiz == 0.0 {
        return 90.0;
    }
    (delta_h(gbs, uav) / horiz).atan().to_degrees()
}

/// Line-of-sight probability factor: chi3 + chi4 / (1 + e^-(chi1 + chi2*theta)).
pub(crate) fn sigmoid_factor(ch: &ChannelParams, elevation_deg: f64) -> f64 {
    ch.chi3 + ch.chi4 / (1.0 + (-(ch.chi1 + ch.chi2 * elevation_deg)).exp())
}

/// Achievable offload rate in bits/s:
/// sigmoid(theta) * H * log2(1 + gamma_hat * P / d^alpha),
/// with gamma_hat = beta0 / (noise * snr_gap).
pub fn rate_bps(uav_pos: Point2, gbs: &GroundStation, uav: &UavModel, ch: &ChannelParams) -> f64 {
    let d = link_distance(uav_pos, gbs, uav);
    let theta = elevation_deg(uav_pos, gbs, uav);
    let gamma_hat = ch.beta0 / (ch.noise_w * ch.snr_gap);
    let snr = gamma_hat * uav.tx_power_w / d.powf(ch.alpha);
    sigmoid_factor(ch, theta) * ch.bandwidth_hz * (1.0 + snr).log2()
}

/// Evaluates every station link at one position.
pub fn sample_links(
    uav_pos: Point2,
    stations: &[GroundStation],
    uav: &UavModel,
    ch: &ChannelParams,
) -> Vec<LinkSample> {
    stations
        .iter()
        .map(|g| LinkSample {
            station_id: g.id,
            distance_m: link_distance(uav_pos, g, uav),
            elevation_deg: elevation_deg(uav_pos, g, uav),
            rate_bps: rate_bps(uav_pos, g, uav, ch),
        })
        .collect()
}

/// Best achievable rate over all stations at one position.
pub fn best_rate_bps(
    uav_pos: Point2,
    stations: &[GroundStation],
    uav: &UavModel,
    ch: &ChannelParams,
) -> f64 {
    stations
        .iter()
        .map(|g| rate_bps(uav_pos, g, uav, ch))
        .fold(0.0, f64::max)
}

/// Checks per-station data causality on cumulative (prefix-sum) series:
/// at every prefix, bits processed by a station must not exceed bits
/// offloaded to it, within 1e-6 relative tolerance.
///
/// Both arguments are indexed `[station][slot]` and must share the grid.
pub fn causality_ok(offloaded_prefix: &[Vec<f64>], processed_prefix: &[Vec<f64>]) -> Result<bool> {
    if offloaded_prefix.len() != processed_prefix.len() {
        return Err(Error::Other(format!(
            "causality_ok: {} offload series vs {} processed series",
            offloaded_prefix.len(),
            processed_prefix.len()
        )));
    }
    for (o, p) in offloaded_prefix.iter().zip(processed_prefix) {
        if o.len() != p.len() {
            return Err(Error::Other(format!(
                "causality_ok: slot grids differ ({} vs {})",
                o.len(),
                p.len()
            )));
        }
        for (&ob, &pb) in o.iter().zip(p) {
            let tol = 1e-6 * ob.abs().max(1.0);
            if pb > ob + tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
