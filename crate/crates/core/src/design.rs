//! Choosing the shift: the end-fire angle set, a delay search for a fixed
//! angle, grid surfaces, random-shift averages and a delay-only baseline.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DaisError, Result};
use crate::mcrb::{bound_report, closed_form_bound, mcrb, mcrb_for, pseudo_true_locations, McrbResult};
use crate::model::LinkModel;
use crate::scene::{wrap_interval, ShiftPair};

/// Angle shift that drives the sine of a path at `theta` to ±1, the member
/// of the end-fire set with no extra turns. `|theta| < π/2`.
pub fn desired_angle_shift(theta: f64) -> f64 {
    wrap_interval(1.0 - theta.sin(), -1.0, 1.0).expect("fixed interval").asin()
}

/// `[lo, hi]` sampled every `step`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range1D {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Range1D {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        Range1D { lo, hi, step }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite() && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(DaisError::InvalidGrid(format!("{name}: step must be positive and bounds finite")));
        }
        if self.hi < self.lo {
            return Err(DaisError::InvalidGrid(format!("{name}: empty range [{}, {}]", self.lo, self.hi)));
        }
        Ok(())
    }

    /// Grid points `lo + i·step` up to `hi` (with a small tolerance so that a
    /// range spanning whole steps keeps its end point).
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayDesign {
    pub delta_tau: f64,
    /// Angle term plus squared mismatch, m². `+∞` when unbounded.
    pub objective: f64,
}

/// Exhaustive search over `grid` for the delay shift maximizing the
/// noise-dependent angle term plus the squared Alice mismatch of the
/// closed-form bound. Ties go to the smallest delay.
pub fn optimal_delay_shift(model: &LinkModel, delta_theta: f64, grid: &Range1D, sigma: f64) -> Result<DelayDesign> {
    grid.validate("delay grid")?;
    let values: Vec<f64> = grid
        .points()
        .par_iter()
        .map(|&tau| delay_objective(model, ShiftPair::new(tau, delta_theta), sigma).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let points = grid.points();
    let mut best = DelayDesign { delta_tau: points[0], objective: values[0] };
    for (tau, value) in points.iter().zip(&values).skip(1) {
        if *value > best.objective {
            best = DelayDesign { delta_tau: *tau, objective: *value };
        }
    }
    Ok(best)
}

pub fn delay_objective(model: &LinkModel, shift: ShiftPair, sigma: f64) -> Result<f64> {
    let bound = closed_form_bound(model, shift, sigma, 0.0)?;
    Ok(if bound.unbounded { f64::INFINITY } else { bound.angle_term + bound.mismatch_term })
}

/// Delay and angle shift grid with the SNR used for every cell.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignGrid {
    pub delta_tau: Range1D,
    pub delta_theta: Range1D,
    pub snr_db: f64,
}

impl DesignGrid {
    /// Full delay span centred on zero, all angle shifts, 0.01 resolution
    /// on both axes, 20 dB.
    pub fn for_model(model: &LinkModel) -> Self {
        let half = model.numerology.delay_span() / 2.0;
        DesignGrid {
            delta_tau: Range1D::new(-half, half, 0.01),
            delta_theta: Range1D::new(-FRAC_PI_2, FRAC_PI_2, 0.01),
            snr_db: 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.delta_tau.validate("delta_tau")?;
        self.delta_theta.validate("delta_theta")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub row: usize,
    pub col: usize,
    pub reason: String,
}

/// Per-cell results; rows follow delay shifts, columns angle shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSurface {
    pub grid: DesignGrid,
    pub delta_tau: Vec<f64>,
    pub delta_theta: Vec<f64>,
    pub rmse_eve: DMatrix<f64>,
    pub mismatch_distance: DMatrix<f64>,
    pub cos_sq_kmin: DMatrix<f64>,
    pub k_min: DMatrix<usize>,
    pub failures: Vec<CellFailure>,
}

struct Cell {
    rmse_eve: f64,
    mismatch: f64,
    cos_sq: f64,
    k_min: usize,
    failure: Option<String>,
}

fn eval_cell(model: &LinkModel, shift: ShiftPair, snr_db: f64) -> Cell {
    let shifted = model.shifted_paths(shift);
    let k_min = shifted.k_min();
    let cos_sq = shifted.aods[k_min].cos().powi(2);
    let mismatch = pseudo_true_locations(&shifted, model.scene.receiver, model.scene.c)
        .map(|s| s.locations.alice.distance(model.scene.alice))
        .unwrap_or(f64::INFINITY);
    let result = model.sigma_for_snr(shift, snr_db).and_then(|sigma| mcrb(model, shift, sigma));
    match result {
        Ok(r) => Cell { rmse_eve: r.rmse_eve, mismatch, cos_sq, k_min, failure: None },
        Err(e) => Cell { rmse_eve: f64::INFINITY, mismatch, cos_sq, k_min, failure: Some(e.to_string()) },
    }
}

/// Eve's bound on every grid cell. Cells whose bound cannot be formed are
/// stored as `+∞` and listed in `failures`.
pub fn grid_eval(model: &LinkModel, grid: &DesignGrid) -> Result<DesignSurface> {
    grid.validate()?;
    let taus = grid.delta_tau.points();
    let thetas = grid.delta_theta.points();
    let (rows, cols) = (taus.len(), thetas.len());
    let cells: Vec<Cell> = (0..rows * cols)
        .into_par_iter()
        .map(|i| eval_cell(model, ShiftPair::new(taus[i / cols], thetas[i % cols]), grid.snr_db))
        .collect();
    let mut surface = DesignSurface {
        grid: *grid,
        rmse_eve: DMatrix::zeros(rows, cols),
        mismatch_distance: DMatrix::zeros(rows, cols),
        cos_sq_kmin: DMatrix::zeros(rows, cols),
        k_min: DMatrix::zeros(rows, cols),
        failures: Vec::new(),
        delta_tau: taus,
        delta_theta: thetas,
    };
    for (i, cell) in cells.into_iter().enumerate() {
        let (r, c) = (i / cols, i % cols);
        surface.rmse_eve[(r, c)] = cell.rmse_eve;
        surface.mismatch_distance[(r, c)] = cell.mismatch;
        surface.cos_sq_kmin[(r, c)] = cell.cos_sq;
        surface.k_min[(r, c)] = cell.k_min;
        if let Some(reason) = cell.failure {
            surface.failures.push(CellFailure { row: r, col: c, reason });
        }
    }
    Ok(surface)
}

/// Ranks with ties sharing their average rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation of paired samples.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let mean = (n - 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean) * (a - mean);
        syy += (b - mean) * (b - mean);
    }
    sxy / (sxx * syy).sqrt()
}

/// Mean bounds at one SNR over random shifts.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedBounds {
    pub snr_db: f64,
    pub rmse_bob: f64,
    pub rmse_eve: f64,
    /// Realizations included in the mean.
    pub realizations: usize,
    pub failures: usize,
}

/// Shifts drawn uniformly: delay over the centred delay span, angle over
/// `[−π/2, π/2]`.
pub fn random_shifts(model: &LinkModel, n: usize, seed: u64) -> Vec<ShiftPair> {
    let half = model.numerology.delay_span() / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tau = rng.random_range(-half..=half);
            let theta = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
            ShiftPair::new(tau, theta)
        })
        .collect()
}

fn order_free_mean(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

/// Arithmetic means of both receivers' RMSE bounds over `n` random shifts,
/// one entry per SNR. Realizations whose bound is singular are counted and
/// left out of the mean.
pub fn random_shift_average(model: &LinkModel, n: usize, seed: u64, snrs: &[f64]) -> Result<Vec<AveragedBounds>> {
    if n == 0 {
        return Err(DaisError::InvalidGrid("need at least one realization".into()));
    }
    let shifts = random_shifts(model, n, seed);
    snrs.iter()
        .map(|&snr| {
            let reports: Vec<_> = shifts.par_iter().map(|&s| bound_report(model, s, snr)).collect();
            let ok: Vec<_> = reports.iter().filter_map(|r| r.as_ref().ok()).collect();
            if ok.is_empty() {
                return Err(DaisError::SingularInformation { condition: f64::INFINITY });
            }
            Ok(AveragedBounds {
                snr_db: snr,
                rmse_bob: order_free_mean(ok.iter().map(|r| r.rmse_bob).collect()),
                rmse_eve: order_free_mean(ok.iter().map(|r| r.rmse_eve).collect()),
                realizations: ok.len(),
                failures: n - ok.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub bound: McrbResult,
    /// The extra delay does not push the direct path behind any reflection,
    /// so the obfuscation has no effect on the leading path.
    pub ineffective: bool,
}

/// Eve's bound when only the direct-path delay is pushed back by `tau_obf`.
pub fn delay_only_baseline(model: &LinkModel, tau_obf: f64, sigma: f64) -> Result<BaselineResult> {
    let mut shifted = model.true_paths.clone();
    shifted.delays[0] = wrap_interval(shifted.delays[0] + tau_obf, 0.0, model.numerology.delay_span())?;
    let min_nlos = model.true_paths.delays.iter().skip(1).copied().fold(f64::INFINITY, f64::min);
    let ineffective = !(shifted.delays[0] > min_nlos);
    let bound = mcrb_for(model, shifted, sigma)?;
    Ok(BaselineResult { bound, ineffective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::crb_bob;
    use crate::scene::Scene;
    use std::f64::consts::PI;

    #[test]
    fn desired_angle_examples() {
        assert!((desired_angle_shift(0.0) - FRAC_PI_2).abs() < 1e-15);
        let d = desired_angle_shift(0.620249);
        assert!((d - 0.418762f64.asin()).abs() < 1e-6);
        assert!((d - 0.432111).abs() < 1e-4 * 0.432111);
    }

    #[test]
    fn desired_angle_reaches_end_fire() {
        let model = LinkModel::reference(1);
        for k in 0..model.n_paths() {
            let shift = ShiftPair::new(0.0, desired_angle_shift(model.true_paths.aods[k]));
            let shifted = model.shifted_paths(shift);
            assert!(shifted.aods[k].cos().abs() < 1e-9, "path {k}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let theta = rng.random_range(-1.5..1.5);
            let sine = f64::sin(theta) + desired_angle_shift(theta).sin();
            let landed = wrap_interval(if (sine.abs() - 1.0).abs() <= 4.0 * f64::EPSILON { sine.signum() } else { sine }, -1.0, 1.0).unwrap();
            assert!(landed.asin().cos().abs() < 1e-9, "{theta}");
        }
    }

    #[test]
    fn range_points() {
        assert_eq!(Range1D::new(0.0, 1.0, 0.25).points(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(Range1D::new(0.0, 0.0, 0.1).points(), vec![0.0]);
        assert!(Range1D::new(1.0, 0.0, 0.1).validate("x").is_err());
        assert!(Range1D::new(0.0, 1.0, 0.0).validate("x").is_err());
    }

    #[test]
    fn delay_objective_without_shift_is_angle_term() {
        let model = LinkModel::reference(1);
        let sigma = 1e-5;
        let v = delay_objective(&model, ShiftPair::ZERO, sigma).unwrap();
        let b = closed_form_bound(&model, ShiftPair::ZERO, sigma, 0.0).unwrap();
        assert!(b.mismatch_term < 1e-24);
        assert_eq!(v, b.angle_term + b.mismatch_term);
    }

    #[test]
    fn noiseless_delay_search_stops_before_first_wrap() {
        let model = LinkModel::reference(1);
        let span = model.numerology.delay_span();
        let grid = Range1D::new(0.0, span, 1e-4);
        let best = optimal_delay_shift(&model, 0.0, &grid, 0.0).unwrap();
        // the longest path wraps once τ + Δτ exceeds the span
        let wrap_at = span - model.true_paths.delays[2];
        assert!(best.delta_tau <= wrap_at && best.delta_tau > wrap_at - 2e-4, "{best:?} vs {wrap_at}");
        let c = model.scene.c;
        assert!((best.objective - (c * best.delta_tau).powi(2)).abs() < 1e-9 * best.objective);
        let at_zero = delay_objective(&model, ShiftPair::ZERO, 0.0).unwrap();
        assert!(best.objective >= at_zero);
    }

    #[test]
    fn delay_search_ignores_gain_phase() {
        let model = LinkModel::reference(1);
        let mut rotated = model.clone();
        rotated.true_paths.gains = rotated.true_paths.gains.iter().map(|g| g * crate::scene::Complex64::from_polar(1.0, 1.234)).collect();
        let grid = Range1D::new(-0.2, 0.2, 1e-3);
        let a = optimal_delay_shift(&model, 0.3, &grid, 1e-5).unwrap();
        let b = optimal_delay_shift(&rotated, 0.3, &grid, 1e-5).unwrap();
        assert_eq!(a.delta_tau, b.delta_tau);
        assert!((a.objective - b.objective).abs() <= 1e-12 * a.objective);
    }

    #[test]
    fn small_surface_behaviour() {
        let model = LinkModel::reference(1);
        let grid = DesignGrid {
            delta_tau: Range1D::new(-0.1, 0.1, 0.05),
            delta_theta: Range1D::new(-0.6, 0.6, 0.3),
            snr_db: 20.0,
        };
        let s = grid_eval(&model, &grid).unwrap();
        assert_eq!(s.rmse_eve.shape(), (5, 5));
        let sigma = model.sigma_for_snr(ShiftPair::ZERO, 20.0).unwrap();
        let crb = crb_bob(&model, ShiftPair::ZERO, sigma).unwrap();
        assert!((s.rmse_eve[(2, 2)] - crb.rmse_bob).abs() <= 1e-9 * crb.rmse_bob);
        assert!(s.mismatch_distance[(2, 2)] < 1e-12);
        for r in 0..5 {
            for c in 0..5 {
                let shifted = model.shifted_paths(ShiftPair::new(s.delta_tau[r], s.delta_theta[c]));
                assert_eq!(s.k_min[(r, c)], shifted.k_min());
            }
        }
        assert!(s.rmse_eve.iter().all(|v| *v >= s.rmse_eve[(2, 2)]));
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![1.5, 0.0, 1.5]);
    }

    #[test]
    fn single_realization_average_is_plain_bound() {
        let model = LinkModel::reference(1);
        let avg = random_shift_average(&model, 1, 9, &[10.0]).unwrap();
        let shift = random_shifts(&model, 1, 9)[0];
        let direct = bound_report(&model, shift, 10.0).unwrap();
        assert_eq!(avg[0].rmse_eve, direct.rmse_eve);
        assert_eq!(avg[0].rmse_bob, direct.rmse_bob);
        assert_eq!(random_shift_average(&model, 5, 2, &[0.0, 40.0]).unwrap(), random_shift_average(&model, 5, 2, &[0.0, 40.0]).unwrap());
        assert!(random_shift_average(&model, 0, 2, &[0.0]).is_err());
    }

    #[test]
    fn shifts_cover_their_ranges() {
        let model = LinkModel::reference(1);
        let half = model.numerology.delay_span() / 2.0;
        for s in random_shifts(&model, 500, 4) {
            assert!(s.delta_tau.abs() <= half && s.delta_theta.abs() <= FRAC_PI_2);
        }
    }

    #[test]
    fn baseline_examples() {
        let model = LinkModel::reference(1);
        let sigma = model.sigma_for_snr(ShiftPair::ZERO, 10.0).unwrap();
        let none = delay_only_baseline(&model, 0.0, sigma).unwrap();
        let crb = crb_bob(&model, ShiftPair::ZERO, sigma).unwrap();
        assert!(none.ineffective);
        assert!((none.bound.trace_alice() - crb.trace_alice()).abs() <= 1e-9 * crb.trace_alice());
        let base = delay_only_baseline(&model, 0.0279, sigma).unwrap();
        assert!(!base.ineffective);
        assert_eq!(base.bound.pseudo_true.k_min, 1);
    }

    #[test]
    fn baseline_is_weaker_than_spoofing_at_30_db() {
        let model = LinkModel::reference(1);
        let shift = ShiftPair::new(-0.073, 0.167 * PI);
        let sigma = model.sigma_for_snr(shift, 30.0).unwrap();
        let dais = mcrb(&model, shift, sigma).unwrap();
        let base = delay_only_baseline(&model, 0.0279, model.sigma_for_snr(ShiftPair::ZERO, 30.0).unwrap()).unwrap();
        assert!(base.bound.rmse_eve < dais.rmse_eve, "{} vs {}", base.bound.rmse_eve, dais.rmse_eve);
    }

    #[test]
    fn los_only_surface_has_single_leader() {
        let model = LinkModel::new(Scene::reference().los_only(), 1.0, 1).unwrap();
        let grid = DesignGrid { delta_tau: Range1D::new(-0.2, 0.2, 0.1), delta_theta: Range1D::new(-1.0, 1.0, 0.5), snr_db: 20.0 };
        let s = grid_eval(&model, &grid).unwrap();
        assert!(s.k_min.iter().all(|k| *k == 0));
    }
}
