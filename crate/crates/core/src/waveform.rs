//! Pilots, steering vectors, per-subcarrier channels and the spoofing precoder.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{DaisError, Result};
use crate::scene::{Complex64, Numerology, PathParams, ShiftPair};

/// `α(θ)`: entry `m` is `exp(-j 2π m d sin θ / λ_c)`.
pub fn steering_vector(theta: f64, n_tx: usize, spacing: f64, wavelength: f64) -> DVector<Complex64> {
    let step = -2.0 * PI * spacing * theta.sin() / wavelength;
    DVector::from_iterator(n_tx, (0..n_tx).map(|m| Complex64::from_polar(1.0, step * m as f64)))
}

fn delay_phasor(n: usize, delay: f64, numerology: &Numerology) -> Complex64 {
    Complex64::from_polar(1.0, -2.0 * PI * n as f64 * delay / numerology.delay_span())
}

/// Row vector `h⁽ⁿ⁾ = Σ_k γ_k e^{-j2πnτ_k/(N T_s)} α(θ_k)ᴴ`, returned as the
/// list of its `N_t` entries.
pub fn channel_vector(n: usize, params: &PathParams, numerology: &Numerology) -> DVector<Complex64> {
    let mut h = DVector::zeros(numerology.n_tx);
    for k in 0..params.len() {
        let alpha = steering_vector(params.aods[k], numerology.n_tx, numerology.antenna_spacing, numerology.wavelength);
        let scale = params.gains[k] * delay_phasor(n, params.delays[k], numerology);
        h += alpha.map(|a| a.conj() * scale);
    }
    h
}

/// Diagonal precoder for one subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub diagonal: DVector<Complex64>,
}

impl Precoder {
    pub fn apply(&self, symbol: &[Complex64]) -> Vec<Complex64> {
        self.diagonal.iter().zip(symbol).map(|(d, s)| d * s).collect()
    }
}

/// `Φ⁽ⁿ⁾ = e^{-j2πnΔτ/(N T_s)} diag(α(Δθ)ᴴ)`.
pub fn dais_precoder(n: usize, shift: ShiftPair, numerology: &Numerology) -> Precoder {
    let alpha = steering_vector(shift.delta_theta, numerology.n_tx, numerology.antenna_spacing, numerology.wavelength);
    let scalar = delay_phasor(n, shift.delta_tau, numerology);
    Precoder { diagonal: alpha.map(|a| a.conj() * scalar) }
}

/// Unit-modulus pilots scaled by `1/√N_t`, indexed by (symbol, subcarrier, antenna).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    pub n_symbols: usize,
    pub n_subcarriers: usize,
    pub n_tx: usize,
    pub seed: u64,
    symbols: Vec<Complex64>,
}

impl PilotSet {
    /// Pilot vector of symbol `g` (zero based) on subcarrier `n`.
    pub fn pilot(&self, g: usize, n: usize) -> &[Complex64] {
        let start = (g * self.n_subcarriers + n) * self.n_tx;
        &self.symbols[start..start + self.n_tx]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn matches(&self, numerology: &Numerology) -> bool {
        self.n_symbols == numerology.n_symbols
            && self.n_subcarriers == numerology.n_subcarriers
            && self.n_tx == numerology.n_tx
    }
}

/// Pilots with i.i.d. uniform phases. Each (symbol, subcarrier) pair draws
/// from its own ChaCha stream so the result does not depend on fill order.
pub fn pilots(n_symbols: usize, n_subcarriers: usize, n_tx: usize, seed: u64) -> PilotSet {
    let scale = 1.0 / (n_tx as f64).sqrt();
    let mut symbols = Vec::with_capacity(n_symbols * n_subcarriers * n_tx);
    for g in 0..n_symbols {
        for n in 0..n_subcarriers {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((g * n_subcarriers + n) as u64);
            for _ in 0..n_tx {
                let phase = 2.0 * PI * rng.random::<f64>();
                symbols.push(Complex64::from_polar(scale, phase));
            }
        }
    }
    PilotSet { n_symbols, n_subcarriers, n_tx, seed, symbols }
}

/// One path of a received signal model, parameterized by the sine of its
/// departure angle so that precoded and spoofed views share one code path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectivePath {
    pub gain: Complex64,
    /// µs
    pub delay: f64,
    /// Sine of the departure angle seen by the receiver (not wrapped).
    pub sine: f64,
    /// Derivative of `sine` with respect to the angle being estimated.
    pub sine_rate: f64,
}

impl EffectivePath {
    /// Paths as a receiver who takes `params` at face value sees them.
    pub fn observed(params: &PathParams) -> Vec<EffectivePath> {
        (0..params.len())
            .map(|k| EffectivePath {
                gain: params.gains[k],
                delay: params.delays[k],
                sine: params.aods[k].sin(),
                sine_rate: params.aods[k].cos(),
            })
            .collect()
    }

    /// The precoded physical channel `h⁽ⁿ⁾Φ⁽ⁿ⁾`, parameterized by the true
    /// delays and angles in `true_params`.
    pub fn precoded(true_params: &PathParams, shift: ShiftPair) -> Vec<EffectivePath> {
        let sin_shift = shift.delta_theta.sin();
        (0..true_params.len())
            .map(|k| EffectivePath {
                gain: true_params.gains[k],
                delay: true_params.delays[k] + shift.delta_tau,
                sine: true_params.aods[k].sin() + sin_shift,
                sine_rate: true_params.aods[k].cos(),
            })
            .collect()
    }
}

/// Per-path pieces of one noiseless sample: the delay phasor and the
/// array responses `Σ_m e^{jφ m u} s_m` and `Σ_m m e^{jφ m u} s_m`.
pub(crate) struct PathResponse {
    pub phasor: Complex64,
    pub response: Complex64,
    pub weighted_response: Complex64,
}

pub(crate) fn path_response(n: usize, path: &EffectivePath, symbol: &[Complex64], numerology: &Numerology) -> PathResponse {
    let step = numerology.spatial_phase_step() * path.sine;
    let mut response = Complex64::new(0.0, 0.0);
    let mut weighted_response = Complex64::new(0.0, 0.0);
    for (m, s) in symbol.iter().enumerate() {
        let term = Complex64::from_polar(1.0, step * m as f64) * s;
        response += term;
        weighted_response += term * m as f64;
    }
    PathResponse { phasor: delay_phasor(n, path.delay, numerology), response, weighted_response }
}

pub fn noiseless_sample(n: usize, paths: &[EffectivePath], symbol: &[Complex64], numerology: &Numerology) -> Complex64 {
    paths
        .iter()
        .map(|p| {
            let r = path_response(n, p, symbol, numerology);
            p.gain * r.phasor * r.response
        })
        .sum()
}

/// All noiseless samples, ordered symbol-major then subcarrier.
pub fn noiseless_samples(paths: &[EffectivePath], pilots: &PilotSet, numerology: &Numerology) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(pilots.n_symbols * pilots.n_subcarriers);
    for g in 0..pilots.n_symbols {
        for n in 0..pilots.n_subcarriers {
            out.push(noiseless_sample(n, paths, pilots.pilot(g, n), numerology));
        }
    }
    out
}

/// Noise standard deviation giving the requested SNR for the precoded
/// signal, with SNR defined as mean received sample energy over `σ²`.
pub fn snr_to_sigma(true_params: &PathParams, shift: ShiftPair, pilots: &PilotSet, numerology: &Numerology, snr_db: f64) -> Result<f64> {
    if !pilots.matches(numerology) {
        return Err(DaisError::InvalidScene("pilot dimensions do not match the scene".into()));
    }
    let paths = EffectivePath::precoded(true_params, shift);
    let energy: f64 = noiseless_samples(&paths, pilots, numerology).iter().map(|w| w.norm_sqr()).sum();
    if !(energy > 0.0) {
        return Err(DaisError::DegenerateSignal);
    }
    let count = (pilots.n_symbols * pilots.n_subcarriers) as f64;
    Ok((energy / (count * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// Noisy received samples, for demonstration output only.
pub fn noisy_samples(paths: &[EffectivePath], pilots: &PilotSet, numerology: &Numerology, sigma: f64, seed: u64) -> Result<Vec<Complex64>> {
    if !(sigma > 0.0) {
        return Err(DaisError::InvalidNoise(sigma));
    }
    let normal = Normal::new(0.0, sigma / 2f64.sqrt()).map_err(|_| DaisError::InvalidNoise(sigma))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(noiseless_samples(paths, pilots, numerology)
        .into_iter()
        .map(|w| w + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect())
}
