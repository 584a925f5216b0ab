//! UAV corridor geometry, mobility, Rician channel sampling and downlink rates.
//!
//! Four UAVs are deployed around a circular monitored area of radius `r0`
//! centred at `(x0, y0)`. Each UAV lives in a corridor: one horizontal
//! coordinate is pinned to the centre line, the other ranges over the
//! offset band `(a, b)` with `a = r0 + rs` and `b = r0 + rs + d`, and the
//! height is bounded by `[z_min, z_max]`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Margin used to turn the open corridor intervals into closed ones.
pub const CORRIDOR_MARGIN: f64 = 1e-9;

/// Number of UAVs the corridor layout supports.
pub const NUM_CORRIDORS: usize = 4;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub center: [f64; 2],
    pub radius_r0: f64,
    pub safety_rs: f64,
    pub corridor_depth_d: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub ground_position: Vec3,
    pub max_step_a_max: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            radius_r0: 100.0,
            safety_rs: 10.0,
            corridor_depth_d: 50.0,
            z_min: 10.0,
            z_max: 50.0,
            ground_position: [0.0, 0.0, 0.0],
            max_step_a_max: 1.0,
        }
    }
}

impl GeometryConfig {
    /// Inner offset `a = r0 + rs`.
    pub fn inner(&self) -> f64 {
        self.radius_r0 + self.safety_rs
    }

    /// Outer offset `b = r0 + rs + d`.
    pub fn outer(&self) -> f64 {
        self.radius_r0 + self.safety_rs + self.corridor_depth_d
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("geometry: {what}")));
        if !(self.radius_r0 > 0.0) {
            return bad("radius_r0 must be > 0");
        }
        if !(self.safety_rs >= 0.0) {
            return bad("safety_rs must be >= 0");
        }
        if !(self.corridor_depth_d > 0.0) {
            return bad("corridor_depth_d must be > 0");
        }
        if !(self.z_min > 0.0 && self.z_min < self.z_max) {
            return bad("need 0 < z_min < z_max");
        }
        if !(self.max_step_a_max > 0.0) {
            return bad("max_step_a_max must be > 0");
        }
        if self.center.iter().chain(&self.ground_position).any(|v| !v.is_finite()) {
            return bad("positions must be finite");
        }
        Ok(())
    }
}

/// Horizontal axis of a corridor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
        }
    }
}

/// The closed feasible box for one UAV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorridorRegion {
    pub pinned_axis: Axis,
    pub pinned_value: f64,
    /// Interval of the free horizontal axis (the other one).
    pub free_interval: (f64, f64),
    pub height_interval: (f64, f64),
    /// `+1.0` when the corridor lies on the positive side of the centre.
    pub outward_sign: f64,
}

impl CorridorRegion {
    pub fn free_axis(&self) -> Axis {
        match self.pinned_axis {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }

    /// Box bounds per world coordinate as `(lo, hi)`.
    pub fn bounds(&self) -> [(f64, f64); 3] {
        let mut out = [(0.0, 0.0); 3];
        out[self.pinned_axis.index()] = (self.pinned_value, self.pinned_value);
        out[self.free_axis().index()] = self.free_interval;
        out[2] = self.height_interval;
        out
    }

    /// Euclidean projection onto the region. The region is an axis-aligned
    /// box, so the projection is a per-coordinate clamp.
    pub fn project(&self, p: Vec3) -> Vec3 {
        let b = self.bounds();
        [
            p[0].clamp(b[0].0, b[0].1),
            p[1].clamp(b[1].0, b[1].1),
            p[2].clamp(b[2].0, b[2].1),
        ]
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.bounds()
            .iter()
            .zip(p)
            .all(|(&(lo, hi), v)| v >= lo && v <= hi)
    }

    /// Maps a world position to `(radial, lateral, height)` fractions in
    /// `[0, 1]`: radial is 0 at the inner edge and 1 at the outer edge,
    /// lateral is 0.5 on the pinned centre line.
    pub fn normalized(&self, p: Vec3) -> Vec3 {
        let free = p[self.free_axis().index()];
        let (lo, hi) = self.free_interval;
        let mut radial = (free - lo) / (hi - lo);
        if self.outward_sign < 0.0 {
            radial = 1.0 - radial;
        }
        let (zl, zh) = self.height_interval;
        let lateral = 0.5 + (p[self.pinned_axis.index()] - self.pinned_value);
        [
            radial.clamp(0.0, 1.0),
            lateral.clamp(0.0, 1.0),
            ((p[2] - zl) / (zh - zl)).clamp(0.0, 1.0),
        ]
    }

    /// Rotates a corridor-local `(radial, lateral, vertical)` displacement
    /// into world coordinates.
    pub fn local_to_world(&self, local: Vec3) -> Vec3 {
        let mut out = [0.0; 3];
        out[self.free_axis().index()] = self.outward_sign * local[0];
        out[self.pinned_axis.index()] = self.outward_sign * local[1];
        out[2] = local[2];
        out
    }

    pub fn center_point(&self) -> Vec3 {
        let mut out = [0.0; 3];
        out[self.pinned_axis.index()] = self.pinned_value;
        out[self.free_axis().index()] = 0.5 * (self.free_interval.0 + self.free_interval.1);
        out[2] = 0.5 * (self.height_interval.0 + self.height_interval.1);
        out
    }
}

/// Feasible region of UAV `m` (1-based).
pub fn corridor_for(m: usize, g: &GeometryConfig) -> Result<CorridorRegion> {
    let (a, b) = (g.inner(), g.outer());
    let [x0, y0] = g.center;
    let e = CORRIDOR_MARGIN;
    let height_interval = (g.z_min + e, g.z_max - e);
    let (pinned_axis, pinned_value, free_interval, outward_sign) = match m {
        1 => (Axis::X, x0, (y0 + a + e, y0 + b - e), 1.0),
        2 => (Axis::Y, y0, (x0 + a + e, x0 + b - e), 1.0),
        3 => (Axis::X, x0, (y0 - b + e, y0 - a - e), -1.0),
        4 => (Axis::Y, y0, (x0 - b + e, x0 - a - e), -1.0),
        other => return Err(Error::InvalidUavId(other)),
    };
    Ok(CorridorRegion {
        pinned_axis,
        pinned_value,
        free_interval,
        height_interval,
        outward_sign,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavState {
    /// 1-based UAV id.
    pub uav_id: usize,
    pub position: Vec3,
    /// Transmit power, W.
    pub power: f64,
    /// Selected bitrate, bit/s.
    pub bitrate: f64,
}

/// Rescales `a_vec` to norm `a_max` when it is longer.
pub fn saturate_step(a_vec: Vec3, a_max: f64) -> Vec3 {
    let norm = norm3(a_vec);
    if norm > a_max {
        let s = a_max / norm;
        [a_vec[0] * s, a_vec[1] * s, a_vec[2] * s]
    } else {
        a_vec
    }
}

/// Moves the UAV by `a_vec` (saturated at `a_max`) and projects the result
/// back onto its corridor.
pub fn advance_position(u: &UavState, a_vec: Vec3, g: &GeometryConfig) -> Result<UavState> {
    let region = corridor_for(u.uav_id, g)?;
    let step = saturate_step(a_vec, g.max_step_a_max);
    let moved = [
        u.position[0] + step[0],
        u.position[1] + step[1],
        u.position[2] + step[2],
    ];
    Ok(UavState {
        position: region.project(moved),
        ..*u
    })
}

pub fn distance_to_ground(u: &UavState, g: &GeometryConfig) -> Result<f64> {
    let gp = g.ground_position;
    let d = norm3([
        gp[0] - u.position[0],
        gp[1] - u.position[1],
        gp[2] - u.position[2],
    ]);
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::DegenerateGeometry(
            "uav coincides with the ground user".into(),
        ))
    }
}

fn norm3(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Phase convention for the unit-modulus LoS coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosPhase {
    #[default]
    Zero,
    /// `exp(-j 2 pi d fc / c)`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub rician_factor: f64,
    pub gain: f64,
    pub carrier_hz: f64,
    pub light_speed: f64,
    pub exponent_los: f64,
    pub exponent_nlos: f64,
    pub bandwidth_hz: f64,
    /// Noise power spectral density, W/Hz.
    pub noise_psd: f64,
    pub los_phase: LosPhase,
}

/// Converts a PSD in dBm/Hz to W/Hz.
pub fn dbm_per_hz_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            rician_factor: 10.0,
            gain: 1.0,
            carrier_hz: 2.4e9,
            light_speed: 3e8,
            exponent_los: 2.0,
            exponent_nlos: 3.0,
            bandwidth_hz: 20e6,
            noise_psd: dbm_per_hz_to_watts(-174.0),
            los_phase: LosPhase::Zero,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("channel: {what}")));
        if !(self.rician_factor >= 0.0) {
            return bad("rician_factor must be >= 0");
        }
        if !(self.gain > 0.0) {
            return bad("gain must be > 0");
        }
        if !(self.carrier_hz > 0.0 && self.light_speed > 0.0) {
            return bad("carrier_hz and light_speed must be > 0");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be > 0");
        }
        if !(self.noise_psd > 0.0) {
            return bad("noise_psd must be > 0");
        }
        if !(self.exponent_los >= 1.0 && self.exponent_nlos >= 1.0) {
            return bad("path-loss exponents must be >= 1");
        }
        Ok(())
    }

    /// Free-space amplitude factor `c / (4 pi fc d)`.
    pub fn free_space_factor(&self, d: f64) -> f64 {
        self.light_speed / (4.0 * PI * self.carrier_hz * d)
    }

    /// `(sqrt(rho/(rho+1)), sqrt(1/(rho+1)))`. An infinite Rician factor
    /// yields the pure-LoS pair.
    pub fn rician_weights(&self) -> (f64, f64) {
        let rho = self.rician_factor;
        if rho.is_infinite() {
            return (1.0, 0.0);
        }
        ((rho / (rho + 1.0)).sqrt(), (1.0 / (rho + 1.0)).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub coefficient: Complex64,
    pub los_part: Complex64,
    pub nlos_part: Complex64,
    pub distance: f64,
}

impl ChannelRealization {
    /// Combines LoS and NLoS parts with the Rician weights of `p`.
    pub fn combine(los: Complex64, nlos: Complex64, p: &ChannelParams) -> Complex64 {
        let (wl, wn) = p.rician_weights();
        los * wl + nlos * wn
    }

    pub fn power_gain(&self) -> f64 {
        self.coefficient.norm_sqr()
    }
}

/// Draws one Rician realization at distance `d`.
pub fn sample_channel<R: Rng + ?Sized>(
    rng: &mut R,
    d: f64,
    p: &ChannelParams,
) -> Result<ChannelRealization> {
    if !(d > 0.0) {
        return Err(Error::DegenerateGeometry(format!("distance {d} must be > 0")));
    }
    let fs = p.free_space_factor(d);
    let los_unit = match p.los_phase {
        LosPhase::Zero => Complex64::new(1.0, 0.0),
        LosPhase::Geometric => Complex64::from_polar(1.0, -2.0 * PI * d * p.carrier_hz / p.light_speed),
    };
    // CN(0,1): each quadrature carries half the variance.
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let nlos_unit = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;

    let los_part = los_unit * (p.gain * fs.powf(p.exponent_los));
    let nlos_part = nlos_unit * (p.gain * fs.powf(p.exponent_nlos));
    Ok(ChannelRealization {
        coefficient: ChannelRealization::combine(los_part, nlos_part, p),
        los_part,
        nlos_part,
        distance: d,
    })
}

/// Per-UAV downlink rates in bit/s under mutual interference.
pub fn downlink_rates(
    powers: &[f64],
    channels: &[ChannelRealization],
    p: &ChannelParams,
) -> Result<Vec<f64>> {
    if powers.is_empty() {
        return Err(Error::EmptyInput("downlink_rates needs at least one uav"));
    }
    if powers.len() != channels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} powers vs {} channels",
            powers.len(),
            channels.len()
        )));
    }
    let received: Vec<f64> = powers
        .iter()
        .zip(channels)
        .map(|(&pw, ch)| pw * ch.power_gain())
        .collect();
    let noise = p.bandwidth_hz * p.noise_psd;
    Ok((0..received.len())
        .map(|m| {
            let interference: f64 = received
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != m)
                .map(|(_, &r)| r)
                .sum();
            let sinr = received[m] / (noise + interference);
            (p.bandwidth_hz * (1.0 + sinr).log2()).max(0.0)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    fn geometry() -> GeometryConfig {
        GeometryConfig {
            z_min: 10.0,
            z_max: 50.0,
            ..GeometryConfig::default()
        }
    }

    fn uav(id: usize, position: Vec3) -> UavState {
        UavState {
            uav_id: id,
            position,
            power: 1.0,
            bitrate: 1e5,
        }
    }

    fn scalar_channel(gain_amplitude: f64) -> ChannelRealization {
        let h = Complex64::new(gain_amplitude, 0.0);
        ChannelRealization {
            coefficient: h,
            los_part: h,
            nlos_part: Complex64::new(0.0, 0.0),
            distance: 1.0,
        }
    }

    #[test]
    fn corridor_layout() {
        let g = geometry();
        let c1 = corridor_for(1, &g).unwrap();
        assert_eq!(c1.pinned_axis, Axis::X);
        assert_eq!(c1.pinned_value, 0.0);
        assert!((c1.free_interval.0 - 110.0).abs() < 1e-6 && c1.free_interval.0 > 110.0);
        assert!((c1.free_interval.1 - 160.0).abs() < 1e-6 && c1.free_interval.1 < 160.0);

        let c3 = corridor_for(3, &g).unwrap();
        assert_eq!(c3.pinned_axis, Axis::X);
        assert!((c3.free_interval.0 + 160.0).abs() < 1e-6);
        assert!((c3.free_interval.1 + 110.0).abs() < 1e-6);

        let c2 = corridor_for(2, &g).unwrap();
        assert_eq!(c2.pinned_axis, Axis::Y);
        assert!((c2.free_interval.0 - 110.0).abs() < 1e-6);
        assert!((c2.free_interval.1 - 160.0).abs() < 1e-6);

        assert!(matches!(corridor_for(0, &g), Err(Error::InvalidUavId(0))));
        assert!(matches!(corridor_for(5, &g), Err(Error::InvalidUavId(5))));
    }

    #[test]
    fn interior_and_pinned_moves() {
        let g = geometry();
        let u = uav(1, [0.0, 120.0, 20.0]);
        let next = advance_position(&u, [0.0, 0.5, 0.0], &g).unwrap();
        assert_eq!(next.position, [0.0, 120.5, 20.0]);

        let g5 = GeometryConfig {
            max_step_a_max: 10.0,
            ..g
        };
        let next = advance_position(&u, [0.0, 5.0, 0.0], &g5).unwrap();
        assert_eq!(next.position, [0.0, 125.0, 20.0]);
        let next = advance_position(&u, [5.0, 5.0, 0.0], &g5).unwrap();
        assert_eq!(next.position, [0.0, 125.0, 20.0]);
        assert_eq!(next.power, u.power);
        assert_eq!(next.bitrate, u.bitrate);
    }

    #[test]
    fn oversized_step_is_rescaled() {
        let g = geometry();
        let u = uav(1, [0.0, 158.0, 48.0]);
        let next = advance_position(&u, [0.0, 10.0, 10.0], &g).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((next.position[1] - (158.0 + s)).abs() < 1e-12);
        assert!((next.position[2] - (48.0 + s)).abs() < 1e-12);
        assert_eq!(next.position[0], 0.0);
    }

    #[test]
    fn zero_step_is_identity_inside_corridor() {
        let g = geometry();
        for id in 1..=4 {
            let region = corridor_for(id, &g).unwrap();
            let u = uav(id, region.center_point());
            assert_eq!(advance_position(&u, [0.0; 3], &g).unwrap(), u);
        }
    }

    #[test]
    fn local_frame_points_outward() {
        let g = geometry();
        for id in 1..=4 {
            let region = corridor_for(id, &g).unwrap();
            let c = region.center_point();
            let w = region.local_to_world([1.0, 0.0, 0.0]);
            let moved = [c[0] + w[0], c[1] + w[1], c[2] + w[2]];
            let d0 = distance_to_ground(&uav(id, c), &g).unwrap();
            let d1 = distance_to_ground(&uav(id, moved), &g).unwrap();
            assert!(d1 > d0, "uav {id}");
            let n = region.normalized(moved);
            assert!(n[0] > 0.5 && (n[1] - 0.5).abs() < 1e-12 && (n[2] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn ground_distance() {
        let g = geometry();
        assert_eq!(distance_to_ground(&uav(1, [30.0, 40.0, 0.0]), &g).unwrap(), 50.0);
        assert_eq!(distance_to_ground(&uav(1, [0.0, 0.0, 10.0]), &g).unwrap(), 10.0);
        let d = distance_to_ground(&uav(1, [0.0, 120.0, 20.0]), &g).unwrap();
        assert!((d - 121.6552506059644).abs() < 1e-9);
        assert!(matches!(
            distance_to_ground(&uav(1, [0.0, 0.0, 0.0]), &g),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn los_magnitude_and_limits() {
        let mut rng = rng_from_seed(3);
        let p = ChannelParams {
            gain: 1.0,
            carrier_hz: 2.4e9,
            light_speed: 3e8,
            exponent_los: 2.0,
            ..ChannelParams::default()
        };
        let ch = sample_channel(&mut rng, 100.0, &p).unwrap();
        assert!((ch.los_part.norm() - 9.894646840072049e-9).abs() < 1e-20);

        let big = ChannelParams {
            rician_factor: 1e12,
            ..p
        };
        let ch = sample_channel(&mut rng, 100.0, &big).unwrap();
        assert!((ch.coefficient.norm() / ch.los_part.norm() - 1.0).abs() < 1e-4);

        let rayleigh = ChannelParams {
            rician_factor: 0.0,
            ..p
        };
        let ch = sample_channel(&mut rng, 100.0, &rayleigh).unwrap();
        assert_eq!(ch.coefficient, ch.nlos_part);

        assert!(sample_channel(&mut rng, 0.0, &p).is_err());
        assert!(sample_channel(&mut rng, -1.0, &p).is_err());
    }

    #[test]
    fn geometric_phase_keeps_magnitude() {
        let p = ChannelParams {
            los_phase: LosPhase::Geometric,
            ..ChannelParams::default()
        };
        let ch = sample_channel(&mut rng_from_seed(1), 123.4, &p).unwrap();
        let zero = sample_channel(&mut rng_from_seed(1), 123.4, &ChannelParams::default()).unwrap();
        assert!((ch.los_part.norm() / zero.los_part.norm() - 1.0).abs() < 1e-12);
        assert_eq!(ch.nlos_part, zero.nlos_part);
    }

    #[test]
    fn reconstruction_identity_is_exact() {
        let p = ChannelParams::default();
        let mut rng = rng_from_seed(11);
        for i in 0..1000 {
            let d = 50.0 + i as f64 * 0.1;
            let ch = sample_channel(&mut rng, d, &p).unwrap();
            let (wl, wn) = p.rician_weights();
            assert_eq!(ch.coefficient, ch.los_part * wl + ch.nlos_part * wn);
        }
    }

    #[test]
    fn nlos_unit_variance() {
        let p = ChannelParams {
            gain: 1.0,
            exponent_nlos: 1.0,
            ..ChannelParams::default()
        };
        let mut rng = rng_from_seed(5);
        let d = 10.0;
        let scale = p.free_space_factor(d);
        let n = 100_000;
        let mean: f64 = (0..n)
            .map(|_| {
                let ch = sample_channel(&mut rng, d, &p).unwrap();
                (ch.nlos_part / scale).norm_sqr()
            })
            .sum::<f64>()
            / n as f64;
        assert!((0.98..=1.02).contains(&mean), "mean |g|^2 = {mean}");
    }

    #[test]
    fn rate_examples() {
        let p = ChannelParams {
            bandwidth_hz: 1.0,
            noise_psd: 1.0,
            ..ChannelParams::default()
        };
        let r = downlink_rates(&[1.0], &[scalar_channel(1.0)], &p).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15);

        let r = downlink_rates(
            &[3.0, 1.0],
            &[scalar_channel(1.0), scalar_channel(1.0)],
            &p,
        )
        .unwrap();
        assert!((r[0] - 1.3219280948873624).abs() < 1e-12);

        let r = downlink_rates(&[2.0, 1.0], &[scalar_channel(0.0), scalar_channel(1.0)], &p).unwrap();
        assert_eq!(r[0], 0.0);

        assert!(downlink_rates(&[], &[], &p).is_err());
        assert!(downlink_rates(&[1.0], &[], &p).is_err());
    }

    #[test]
    fn rate_increases_with_power_and_bandwidth() {
        let channels = [scalar_channel(1e-8), scalar_channel(2e-8)];
        let base = ChannelParams::default();
        let mut last = 0.0;
        for k in 1..=10 {
            let r = downlink_rates(&[0.5 * k as f64, 1.0], &channels, &base).unwrap()[0];
            assert!(r > last);
            last = r;
        }
        let mut last = 0.0;
        for k in 1..=10 {
            let p = ChannelParams {
                bandwidth_hz: 1e6 * k as f64,
                ..base
            };
            let r = downlink_rates(&[5.0, 1.0], &channels, &p).unwrap()[0];
            assert!(r > last && r.is_finite());
            last = r;
        }
    }

    #[test]
    fn config_validation() {
        assert!(GeometryConfig::default().validate().is_ok());
        assert!(GeometryConfig { z_min: 60.0, ..Default::default() }.validate().is_err());
        assert!(GeometryConfig { radius_r0: 0.0, ..Default::default() }.validate().is_err());
        assert!(ChannelParams::default().validate().is_ok());
        assert!(ChannelParams { exponent_nlos: 0.5, ..Default::default() }.validate().is_err());
        assert!(ChannelParams { noise_psd: 0.0, ..Default::default() }.validate().is_err());
    }
}
