//! Geometry of the transmitter (Alice), the receiver and the scatterers.
//!
//! Everything in this crate uses meters, microseconds and radians. With
//! `c` in m/µs, a carrier frequency in GHz and a bandwidth in MHz the
//! derived quantities come out as
//!
//! * wavelength `λ_c = c / (1000 · f_c)` meters,
//! * sampling period `T_s = 1 / B` microseconds.
//!
//! Path parameters are always ordered LOS first, then one entry per
//! scatterer in the order the scatterers are listed.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Sub};

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{DaisError, Result};

pub type Complex64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Position2D {
    pub x: f64,
    pub y: f64,
}

impl Position2D {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Position2D) -> f64 {
        (self - other).norm()
    }

    pub fn dot(self, other: Position2D) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Unit vector pointing along `angle`.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Position2D {
    fn from(v: [f64; 2]) -> Self {
        Self::new(v[0], v[1])
    }
}

impl From<Position2D> for [f64; 2] {
    fn from(p: Position2D) -> Self {
        [p.x, p.y]
    }
}

impl Add for Position2D {
    type Output = Position2D;
    fn add(self, rhs: Position2D) -> Position2D {
        Position2D::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Position2D {
    type Output = Position2D;
    fn sub(self, rhs: Position2D) -> Position2D {
        Position2D::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Position2D {
    type Output = Position2D;
    fn mul(self, rhs: f64) -> Position2D {
        Position2D::new(self.x * rhs, self.y * rhs)
    }
}

/// Positions plus the radio constants of one localization scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    /// Alice (the transmitter to be localized), meters.
    pub alice: Position2D,
    /// The single-antenna receiver, meters. Bob and Eve share this position.
    pub receiver: Position2D,
    /// One scatterer per NLOS path, meters.
    pub scatterers: Vec<Position2D>,
    /// Carrier frequency, GHz.
    pub carrier_freq_ghz: f64,
    /// Bandwidth, MHz.
    pub bandwidth_mhz: f64,
    /// Propagation speed, m/µs.
    pub c: f64,
    pub n_subcarriers: usize,
    pub n_tx: usize,
    pub n_symbols: usize,
    /// Cyclic prefix duration, µs.
    pub cp_duration_us: f64,
    /// Transmit antenna spacing, meters.
    pub antenna_spacing_m: f64,
}

impl Scene {
    /// The reference scenario: two scatterers, 60 GHz carrier, 30 MHz
    /// bandwidth, 16 subcarriers, 16 transmit antennas, 16 symbols.
    pub fn reference() -> Self {
        let carrier_freq_ghz = 60.0;
        let c = 300.0;
        let wavelength = c / (1000.0 * carrier_freq_ghz);
        let bandwidth_mhz = 30.0;
        Scene {
            alice: Position2D::new(3.0, 0.0),
            receiver: Position2D::new(10.0, 5.0),
            scatterers: vec![Position2D::new(7.44, 8.53), Position2D::new(8.87, -6.05)],
            carrier_freq_ghz,
            bandwidth_mhz,
            c,
            n_subcarriers: 16,
            n_tx: 16,
            n_symbols: 16,
            cp_duration_us: 4.0 / bandwidth_mhz,
            antenna_spacing_m: wavelength / 2.0,
        }
    }

    /// Same radio constants as `self` with the scatterers removed.
    pub fn los_only(&self) -> Self {
        Scene { scatterers: Vec::new(), ..self.clone() }
    }

    pub fn n_paths(&self) -> usize {
        self.scatterers.len() + 1
    }

    pub fn wavelength(&self) -> f64 {
        self.c / (1000.0 * self.carrier_freq_ghz)
    }

    pub fn sampling_period(&self) -> f64 {
        1.0 / self.bandwidth_mhz
    }

    /// `N · T_s`, the unambiguous delay range.
    pub fn delay_span(&self) -> f64 {
        self.n_subcarriers as f64 * self.sampling_period()
    }

    pub fn numerology(&self) -> Numerology {
        Numerology {
            n_subcarriers: self.n_subcarriers,
            n_tx: self.n_tx,
            n_symbols: self.n_symbols,
            sampling_period: self.sampling_period(),
            wavelength: self.wavelength(),
            antenna_spacing: self.antenna_spacing_m,
            c: self.c,
        }
    }

    pub fn true_locations(&self) -> LocationVector {
        LocationVector { alice: self.alice, scatterers: self.scatterers.clone(), k_min: 0 }
    }

    /// Checks the scene invariants. Returns soft warnings on success.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |msg: String| Err(DaisError::InvalidScene(msg));
        let positive = [
            ("carrier_freq_ghz", self.carrier_freq_ghz),
            ("bandwidth_mhz", self.bandwidth_mhz),
            ("c", self.c),
            ("cp_duration_us", self.cp_duration_us),
            ("antenna_spacing_m", self.antenna_spacing_m),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return bad(format!("{name} must be positive and finite, got {value}"));
            }
        }
        for (name, value) in [
            ("n_subcarriers", self.n_subcarriers),
            ("n_tx", self.n_tx),
            ("n_symbols", self.n_symbols),
        ] {
            if value == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        let points = std::iter::once(self.alice).chain(std::iter::once(self.receiver)).chain(self.scatterers.iter().copied());
        for p in points {
            if !p.is_finite() {
                return bad(format!("non-finite position {p:?}"));
            }
        }
        if self.alice.distance(self.receiver) == 0.0 {
            return bad("alice coincides with the receiver".into());
        }
        for (k, v) in self.scatterers.iter().enumerate() {
            if v.distance(self.alice) == 0.0 || v.distance(self.receiver) == 0.0 {
                return bad(format!("scatterer {} coincides with alice or the receiver", k + 1));
            }
        }
        if self.cp_duration_us > self.delay_span() {
            return bad(format!(
                "cp_duration_us {} exceeds N*T_s = {}",
                self.cp_duration_us,
                self.delay_span()
            ));
        }
        let paths = paths_from_scene(self)?;
        for (k, tau) in paths.delays.iter().enumerate() {
            if *tau > self.cp_duration_us {
                return bad(format!("path {k} delay {tau} us exceeds the cyclic prefix {} us", self.cp_duration_us));
            }
        }

        let mut warnings = Vec::new();
        let ratio = self.bandwidth_mhz / (1000.0 * self.carrier_freq_ghz);
        if ratio > 0.01 {
            warnings.push(format!("bandwidth/carrier ratio {ratio:.4} is not narrowband"));
        }
        Ok(warnings)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DaisError::Config { field: "scene".into(), message: e.message().to_string() })
    }
}

/// Radio constants needed by the waveform and information computations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerology {
    pub n_subcarriers: usize,
    pub n_tx: usize,
    pub n_symbols: usize,
    pub sampling_period: f64,
    pub wavelength: f64,
    pub antenna_spacing: f64,
    pub c: f64,
}

impl Numerology {
    pub fn delay_span(&self) -> f64 {
        self.n_subcarriers as f64 * self.sampling_period
    }

    /// `2π d / λ_c`, the phase step per antenna per unit of `sin θ`.
    pub fn spatial_phase_step(&self) -> f64 {
        2.0 * PI * self.antenna_spacing / self.wavelength
    }
}

/// Per-path channel parameters, LOS at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PathParams {
    pub gains: Vec<Complex64>,
    /// Delays, µs.
    pub delays: Vec<f64>,
    /// Angles of departure, radians.
    pub aods: Vec<f64>,
}

impl PathParams {
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn with_gains(mut self, gains: Vec<Complex64>) -> Self {
        assert_eq!(gains.len(), self.delays.len(), "one gain per path");
        self.gains = gains;
        self
    }

    /// Index of the smallest delay; ties go to the smallest index.
    pub fn k_min(&self) -> usize {
        let mut best = 0;
        for (k, tau) in self.delays.iter().enumerate() {
            if *tau < self.delays[best] {
                best = k;
            }
        }
        best
    }

    /// Keep only the listed paths, in the listed order.
    pub fn select(&self, paths: &[usize]) -> PathParams {
        PathParams {
            gains: paths.iter().map(|&k| self.gains[k]).collect(),
            delays: paths.iter().map(|&k| self.delays[k]).collect(),
            aods: paths.iter().map(|&k| self.aods[k]).collect(),
        }
    }

    pub fn validate(&self, delay_span: f64) -> Result<()> {
        let n = self.delays.len();
        if n == 0 || self.aods.len() != n || self.gains.len() != n {
            return Err(DaisError::InvalidScene(format!(
                "path parameter lengths differ or are empty: {} gains, {} delays, {} aods",
                self.gains.len(),
                n,
                self.aods.len()
            )));
        }
        for (k, (&tau, &theta)) in self.delays.iter().zip(&self.aods).enumerate() {
            if !(tau > 0.0 && tau <= delay_span) {
                return Err(DaisError::InvalidScene(format!("path {k} delay {tau} outside (0, {delay_span}]")));
            }
            if !(theta > -FRAC_PI_2 && theta <= FRAC_PI_2) {
                return Err(DaisError::InvalidScene(format!("path {k} angle {theta} outside (-pi/2, pi/2]")));
            }
        }
        Ok(())
    }
}

/// Delay and angle shift applied by the spoofing precoder.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftPair {
    /// µs
    pub delta_tau: f64,
    /// radians
    pub delta_theta: f64,
}

impl ShiftPair {
    pub const ZERO: ShiftPair = ShiftPair { delta_tau: 0.0, delta_theta: 0.0 };

    pub const fn new(delta_tau: f64, delta_theta: f64) -> Self {
        Self { delta_tau, delta_theta }
    }

    pub fn is_zero(&self) -> bool {
        self.delta_tau == 0.0 && self.delta_theta == 0.0
    }
}

/// Alice's position and the scatterer positions, as seen by a localizer
/// that treats path `k_min` as the line of sight.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationVector {
    pub alice: Position2D,
    pub scatterers: Vec<Position2D>,
    pub k_min: usize,
}

impl LocationVector {
    pub fn len(&self) -> usize {
        2 * (self.scatterers.len() + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Stacked as `[p_x, p_y, v1_x, v1_y, ...]`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.len());
        out.extend([self.alice.x, self.alice.y]);
        for v in &self.scatterers {
            out.extend([v.x, v.y]);
        }
        DVector::from_vec(out)
    }

    pub fn from_slice(values: &[f64], k_min: usize) -> Self {
        assert!(values.len() >= 2 && values.len().is_multiple_of(2));
        let alice = Position2D::new(values[0], values[1]);
        let scatterers = values[2..].chunks(2).map(|c| Position2D::new(c[0], c[1])).collect();
        LocationVector { alice, scatterers, k_min }
    }

    /// Path index carried by geometric slot `slot` (slot 0 is Alice's
    /// direct path, slot j the j-th scatterer).
    pub fn path_of_slot(&self, slot: usize) -> usize {
        swap_index(slot, self.k_min)
    }
}

/// The transposition exchanging 0 and `k_min`.
pub(crate) fn swap_index(i: usize, k_min: usize) -> usize {
    if i == 0 {
        k_min
    } else if i == k_min {
        0
    } else {
        i
    }
}

/// `x` reduced into `(t1, t2]` by whole periods of `t2 - t1`.
pub fn wrap_interval(x: f64, t1: f64, t2: f64) -> Result<f64> {
    if !(t1 < t2) {
        return Err(DaisError::InvalidInterval { lo: t1, hi: t2 });
    }
    let period = t2 - t1;
    // floor here is "largest integer strictly less than", which keeps t2 and maps t1 to t2
    let turns = ((x - t1) / period).ceil() - 1.0;
    let mut out = x - turns * period;
    // guard the rounding edge of the division
    if out <= t1 {
        out += period;
    } else if out > t2 {
        out -= period;
    }
    Ok(out)
}

/// Folds an angle into `(-π/2, π/2]`, the range of `arctan`.
pub fn fold_half_turn(angle: f64) -> f64 {
    let mut a = angle;
    while a > FRAC_PI_2 {
        a -= PI;
    }
    while a <= -FRAC_PI_2 {
        a += PI;
    }
    a
}

/// Slope angle of the line through `from` and `to`, in `(-π/2, π/2]`.
pub(crate) fn slope_angle(from: Position2D, to: Position2D) -> f64 {
    let d = to - from;
    fold_half_turn(d.y.atan2(d.x))
}

/// Geometric (delay, angle) per slot: slot 0 is the direct path, slot j
/// the bounce off scatterer j.
fn slot_geometry(alice: Position2D, scatterers: &[Position2D], receiver: Position2D, c: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut delays = Vec::with_capacity(scatterers.len() + 1);
    let mut aods = Vec::with_capacity(scatterers.len() + 1);
    let d0 = alice.distance(receiver);
    if d0 == 0.0 {
        return Err(DaisError::DegenerateGeometry("alice coincides with the receiver".into()));
    }
    delays.push(d0 / c);
    aods.push(slope_angle(alice, receiver));
    for (j, &v) in scatterers.iter().enumerate() {
        let to_alice = alice.distance(v);
        if to_alice == 0.0 {
            return Err(DaisError::DegenerateGeometry(format!("scatterer {} coincides with alice", j + 1)));
        }
        delays.push((receiver.distance(v) + to_alice) / c);
        aods.push(slope_angle(alice, v));
    }
    Ok((delays, aods))
}

/// Maps locations to per-path (delay, angle) under the standard geometric
/// model, with the path labels of slots 0 and `k_min` exchanged.
pub fn forward_map(locations: &LocationVector, receiver: Position2D, c: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (slot_delays, slot_aods) = slot_geometry(locations.alice, &locations.scatterers, receiver, c)?;
    let n = slot_delays.len();
    let mut delays = vec![0.0; n];
    let mut aods = vec![0.0; n];
    for slot in 0..n {
        let k = locations.path_of_slot(slot);
        delays[k] = slot_delays[slot];
        aods[k] = slot_aods[slot];
    }
    Ok((delays, aods))
}

/// Delays and angles of the physical paths. Gains are set to one; see
/// [`pathloss_gains`].
pub fn paths_from_scene(scene: &Scene) -> Result<PathParams> {
    let (delays, aods) = slot_geometry(scene.alice, &scene.scatterers, scene.receiver, scene.c)?;
    Ok(PathParams { gains: vec![Complex64::new(1.0, 0.0); delays.len()], delays, aods })
}

/// Free-space path gains: amplitude `λ_c / (4π · path length)`, phase
/// `-2π · path length / λ_c`; NLOS amplitudes are scaled by `reflection_loss`.
pub fn pathloss_gains(scene: &Scene, reflection_loss: f64) -> Result<Vec<Complex64>> {
    if !(reflection_loss > 0.0 && reflection_loss <= 1.0) {
        return Err(DaisError::InvalidScene(format!("reflection loss {reflection_loss} outside (0, 1]")));
    }
    let lambda = scene.wavelength();
    let paths = paths_from_scene(scene)?;
    paths
        .delays
        .iter()
        .enumerate()
        .map(|(k, tau)| {
            let length = scene.c * tau;
            let scale = if k == 0 { 1.0 } else { reflection_loss };
            let amplitude = scale * lambda / (4.0 * PI * length);
            let phase = wrap_interval(-2.0 * PI * length / lambda, -PI, PI)?;
            Ok(Complex64::from_polar(amplitude, phase))
        })
        .collect()
}

/// Physical paths with free-space gains.
pub fn scene_paths(scene: &Scene, reflection_loss: f64) -> Result<PathParams> {
    let gains = pathloss_gains(scene, reflection_loss)?;
    Ok(paths_from_scene(scene)?.with_gains(gains))
}

/// The parameters the spoofed channel presents: delays shifted modulo
/// `N·T_s`, angle sines shifted modulo 2. Gains are untouched.
pub fn shift_params(params: &PathParams, shift: ShiftPair, delay_span: f64) -> PathParams {
    let delays = params
        .delays
        .iter()
        .map(|tau| wrap_interval(tau + shift.delta_tau, 0.0, delay_span).expect("positive span"))
        .collect();
    let sin_shift = shift.delta_theta.sin();
    let aods = if sin_shift == 0.0 {
        params.aods.clone()
    } else {
        params
            .aods
            .iter()
            .map(|theta| {
                let mut sine = theta.sin() + sin_shift;
                // land exactly on end-fire when rounding leaves the sum a few ulps off ±1
                if (sine.abs() - 1.0).abs() <= 4.0 * f64::EPSILON {
                    sine = sine.signum();
                }
                wrap_interval(sine, -1.0, 1.0).expect("fixed interval").asin()
            })
            .collect()
    };
    PathParams { gains: params.gains.clone(), delays, aods }
}

/// Inverts the geometric model. The path with the smallest delay is taken
/// as the line of sight; if that is not path 0, path 0 is mapped to the
/// scatterer slot `k_min`.
pub fn locations_from_params(params: &PathParams, receiver: Position2D, c: f64) -> Result<LocationVector> {
    if params.is_empty() || params.aods.len() != params.delays.len() {
        return Err(DaisError::InvalidScene("need at least one path with matching delays and angles".into()));
    }
    let k_min = params.k_min();
    let direction = Position2D::from_angle(params.aods[k_min]);
    let alice = receiver - direction * (c * params.delays[k_min]);
    let direct = c * params.delays[k_min];
    let mut scatterers = vec![Position2D::default(); params.len() - 1];
    for k in 0..params.len() {
        if k == k_min {
            continue;
        }
        let range = c * params.delays[k];
        let u = Position2D::from_angle(params.aods[k]);
        // range² − direct² over range − direct·cos(Δθ), written without the
        // cancellation that hits scatterers close to the direct path
        let excess = c * (params.delays[k] - params.delays[k_min]);
        let half_turn = (0.5 * (params.aods[k] - params.aods[k_min])).sin();
        let denominator = excess + 2.0 * direct * half_turn * half_turn;
        let numerator = excess * (range + direct);
        if denominator.abs() <= 1e-12 * range.max(1.0) || numerator.abs() <= 1e-12 * range * range {
            return Err(DaisError::DegenerateGeometry(format!("path {k}: bistatic range equation has no finite solution")));
        }
        let b = numerator / denominator;
        scatterers[swap_index(k, k_min) - 1] = alice + u * (b / 2.0);
    }
    Ok(LocationVector { alice, scatterers, k_min })
}
