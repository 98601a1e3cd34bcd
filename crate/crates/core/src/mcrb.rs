//! The eavesdropper's misspecified bound. Eve fits the standard geometric
//! model to the shifted channel; her estimate converges to the pseudo-true
//! locations and her error is bounded by the inverse information at that
//! point plus the squared geometric mismatch.

use std::f64::consts::PI;
use std::ops::{Add, Div, Mul, Sub};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{DaisError, Result};
use crate::fisher::{efim, fim_channel, invert_information, location_fim, location_jacobian, BoundReport, FisherMatrix, crb_bob};
use crate::model::LinkModel;
use crate::scene::{forward_map, locations_from_params, LocationVector, PathParams, Position2D, ShiftPair};
use crate::waveform::EffectivePath;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoTrueSolution {
    pub locations: LocationVector,
    pub k_min: usize,
    /// The shortest shifted path is not the physical direct path.
    pub swapped: bool,
    /// Largest absolute difference between the forward map of `locations`
    /// and the shifted parameters.
    pub residual: f64,
}

pub fn pseudo_true_locations(shifted: &PathParams, receiver: Position2D, c: f64) -> Result<PseudoTrueSolution> {
    let locations = locations_from_params(shifted, receiver, c)?;
    let (delays, aods) = forward_map(&locations, receiver, c)?;
    let residual = delays
        .iter()
        .zip(&shifted.delays)
        .chain(aods.iter().zip(&shifted.aods))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let k_min = locations.k_min;
    Ok(PseudoTrueSolution { locations, k_min, swapped: k_min != 0, residual })
}

/// Everything Eve's bound is built from at one operating point.
#[derive(Debug, Clone)]
pub struct EveInformation {
    pub shifted: PathParams,
    pub pseudo_true: PseudoTrueSolution,
    /// Effective information of the shifted delays and angles.
    pub channel_efim: FisherMatrix,
    pub jacobian: DMatrix<f64>,
    pub location_fim: DMatrix<f64>,
}

pub fn eve_information(model: &LinkModel, shift: ShiftPair, sigma: f64) -> Result<EveInformation> {
    eve_information_for(model, model.shifted_paths(shift), sigma)
}

/// As [`eve_information`] for an arbitrary observed parameter set.
pub fn eve_information_for(model: &LinkModel, shifted: PathParams, sigma: f64) -> Result<EveInformation> {
    let pseudo_true = pseudo_true_locations(&shifted, model.scene.receiver, model.scene.c)?;
    let j = fim_channel(&EffectivePath::observed(&shifted), &model.pilots, &model.numerology, sigma)?;
    let channel_efim = efim(&j, 0..2 * shifted.len())?;
    let jacobian = location_jacobian(&pseudo_true.locations, model.scene.receiver, model.scene.c)?;
    let location_fim = location_fim(&channel_efim.entries, &jacobian);
    Ok(EveInformation { shifted, pseudo_true, channel_efim, jacobian, location_fim })
}

#[derive(Debug, Clone, PartialEq)]
pub struct McrbResult {
    /// Full bound `Ψ` on the location vector.
    pub psi: DMatrix<f64>,
    /// Inverse location information at the pseudo-true point.
    pub estimation_part: DMatrix<f64>,
    /// Outer product of the location mismatch (rank one at most).
    pub mismatch_part: DMatrix<f64>,
    pub rmse_eve: f64,
    pub mismatch_distance: f64,
    pub condition: f64,
    pub pseudo_true: PseudoTrueSolution,
}

impl McrbResult {
    pub fn trace_alice(&self) -> f64 {
        self.psi[(0, 0)] + self.psi[(1, 1)]
    }
}

pub fn mcrb(model: &LinkModel, shift: ShiftPair, sigma: f64) -> Result<McrbResult> {
    mcrb_for(model, model.shifted_paths(shift), sigma)
}

/// Eve's bound when she observes `shifted` instead of the physical channel.
pub fn mcrb_for(model: &LinkModel, shifted: PathParams, sigma: f64) -> Result<McrbResult> {
    let eve = eve_information_for(model, shifted, sigma)?;
    let inv = invert_information(&eve.location_fim)?;
    let mismatch = eve.pseudo_true.locations.to_vector() - model.true_locations().to_vector();
    let mismatch_part = &mismatch * mismatch.transpose();
    let psi = &inv.matrix + &mismatch_part;
    let rmse_eve = (psi[(0, 0)] + psi[(1, 1)]).sqrt();
    let mismatch_distance = eve.pseudo_true.locations.alice.distance(model.scene.alice);
    Ok(McrbResult {
        psi,
        estimation_part: inv.matrix,
        mismatch_part,
        rmse_eve,
        mismatch_distance,
        condition: inv.condition,
        pseudo_true: eve.pseudo_true,
    })
}

/// Both receivers' bounds at one shift and SNR.
pub fn bound_report(model: &LinkModel, shift: ShiftPair, snr_db: f64) -> Result<BoundReport> {
    let sigma = model.sigma_for_snr(shift, snr_db)?;
    let bob = crb_bob(model, shift, sigma)?;
    let eve = mcrb(model, shift, sigma)?;
    Ok(BoundReport {
        shift,
        snr_db,
        sigma,
        crb_trace_alice: bob.trace_alice(),
        mcrb_trace_alice: eve.trace_alice(),
        mismatch_distance: eve.mismatch_distance,
        rmse_bob: bob.rmse_bob,
        rmse_eve: eve.rmse_eve,
        k_min: eve.pseudo_true.k_min,
        bob_condition: bob.condition,
        eve_condition: eve.condition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn constant(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }

    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        Dual { v: r, d: self.d / (2.0 * r) }
    }

    fn atan2(self, x: Dual) -> Self {
        let r2 = x.v * x.v + self.v * self.v;
        Dual { v: self.v.atan2(x.v), d: (x.v * self.d - self.v * x.d) / r2 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual { v: self.v + o.v, d: self.d + o.d }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual { v: self.v - o.v, d: self.d - o.d }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual { v: self.v * o.v, d: self.d * o.v + self.v * o.d }
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual { v: self.v / o.v, d: (self.d * o.v - self.v * o.d) / (o.v * o.v) }
    }
}

fn dual_distance(a: [Dual; 2], b: [Dual; 2]) -> Dual {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

fn dual_slope(from: [Dual; 2], to: [Dual; 2]) -> Dual {
    let mut a = (to[1] - from[1]).atan2(to[0] - from[0]);
    while a.v > PI / 2.0 {
        a.v -= PI;
    }
    while a.v <= -PI / 2.0 {
        a.v += PI;
    }
    a
}

/// Forward-mode derivative of the geometric map, one location coordinate
/// at a time. Rows and columns as in [`location_jacobian`].
fn forward_map_jacobian(locations: &LocationVector, receiver: Position2D, c: f64) -> DMatrix<f64> {
    let phi = locations.to_vector();
    let k1 = locations.scatterers.len() + 1;
    let z = [Dual::constant(receiver.x), Dual::constant(receiver.y)];
    let light = Dual::constant(c);
    let mut jac = DMatrix::zeros(2 * k1, 2 * k1);
    for col in 0..phi.len() {
        let seed = |i: usize| Dual { v: phi[i], d: if i == col { 1.0 } else { 0.0 } };
        let p = [seed(0), seed(1)];
        let row = locations.path_of_slot(0);
        jac[(row, col)] = (dual_distance(z, p) / light).d;
        jac[(k1 + row, col)] = dual_slope(p, z).d;
        for slot in 1..k1 {
            let v = [seed(2 * slot), seed(2 * slot + 1)];
            let row = locations.path_of_slot(slot);
            jac[(row, col)] = ((dual_distance(z, v) + dual_distance(v, p)) / light).d;
            jac[(k1 + row, col)] = dual_slope(p, v).d;
        }
    }
    jac
}

/// The two generalized information matrices of the misspecified problem.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedFims {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl GeneralizedFims {
    /// `A⁻¹ B A⁻¹`
    pub fn sandwich(&self) -> Result<DMatrix<f64>> {
        let neg_inv = invert_information(&(-&self.a))?.matrix;
        Ok(&neg_inv * &self.b * &neg_inv)
    }
}

/// `A = −(∂o/∂φ̄)ᵀ Σ⁻¹ (∂o/∂φ̄)` with `Σ` the inverse effective information of
/// the shifted channel, and `B = −A`. The Jacobian is taken by forward-mode
/// differentiation of the geometric map, independently of
/// [`location_jacobian`].
pub fn generalized_fims(model: &LinkModel, shift: ShiftPair, sigma: f64) -> Result<GeneralizedFims> {
    let eve = eve_information(model, shift, sigma)?;
    let covariance = invert_information(&eve.channel_efim.entries)?.matrix;
    let precision = invert_information(&covariance)?.matrix;
    let jac = forward_map_jacobian(&eve.pseudo_true.locations, model.scene.receiver, model.scene.c);
    let mut a = -(jac.transpose() * precision * &jac);
    a = (&a + a.transpose()) * 0.5;
    let b = -&a;
    Ok(GeneralizedFims { a, b })
}

const MAX_RECENTRES: usize = 200;

/// Coarse-to-fine grid for the KL oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlGrid {
    /// Initial half width of the window around the centre, m.
    pub half_width: f64,
    /// Final grid spacing, m.
    pub resolution: f64,
    /// Points per coordinate at each level; odd so the centre is included.
    pub points_per_axis: usize,
}

impl Default for KlGrid {
    fn default() -> Self {
        KlGrid { half_width: 2.0, resolution: 0.01, points_per_axis: 9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlSearchResult {
    pub locations: LocationVector,
    pub objective: f64,
    /// Spacing of the last level, m.
    pub final_step: f64,
    pub evaluations: usize,
}

/// `(o(φ) − η̄)ᵀ Σ⁻¹ (o(φ) − η̄)` with `η̄ = [τ̄; θ̄]`. Degenerate candidates
/// score `+∞`.
pub fn kl_objective(candidate: &LocationVector, shifted: &PathParams, receiver: Position2D, c: f64, precision: &DMatrix<f64>) -> f64 {
    let Ok((delays, aods)) = forward_map(candidate, receiver, c) else {
        return f64::INFINITY;
    };
    let k1 = shifted.len();
    let residual = nalgebra::DVector::from_fn(2 * k1, |i, _| if i < k1 { delays[i] - shifted.delays[i] } else { aods[i - k1] - shifted.aods[i - k1] });
    residual.dot(&(precision * &residual))
}

/// Brute-force minimizer of [`kl_objective`] over a shrinking grid centred
/// on `centre`. At each spacing the grid follows its best point before it
/// shrinks. Path labels follow `centre.k_min`.
pub fn kl_pseudo_true_search(
    shifted: &PathParams,
    receiver: Position2D,
    c: f64,
    covariance: &DMatrix<f64>,
    centre: &LocationVector,
    grid: &KlGrid,
) -> Result<KlSearchResult> {
    if grid.points_per_axis < 2 || !(grid.half_width > 0.0) || !(grid.resolution > 0.0) || !grid.half_width.is_finite() {
        return Err(DaisError::InvalidGrid(format!(
            "need at least 2 points per axis and positive widths, got {} points, half width {}, resolution {}",
            grid.points_per_axis, grid.half_width, grid.resolution
        )));
    }
    if covariance.nrows() != 2 * shifted.len() || centre.scatterers.len() + 1 != shifted.len() {
        return Err(DaisError::InvalidGrid("covariance, centre and path count disagree".into()));
    }
    let precision = invert_information(covariance)?.matrix;
    let dims = centre.len();
    let per_axis = grid.points_per_axis;
    let total = per_axis.checked_pow(dims as u32).filter(|n| *n <= 50_000_000).ok_or_else(|| DaisError::InvalidGrid(format!("{per_axis}^{dims} grid points is too many")))?;

    let mut best = centre.to_vector();
    let mut best_value = kl_objective(centre, shifted, receiver, c, &precision);
    let mut half_width = grid.half_width;
    let mut evaluations = 1;
    let mut recentred = 0;
    loop {
        let step = 2.0 * half_width / (per_axis - 1) as f64;
        let origin = best.clone();
        let candidate = |index: usize| {
            let mut point = origin.clone();
            let mut rest = index;
            for coord in 0..dims {
                point[coord] += -half_width + step * (rest % per_axis) as f64;
                rest /= per_axis;
            }
            point
        };
        let values: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|i| kl_objective(&LocationVector::from_slice(candidate(i).as_slice(), centre.k_min), shifted, receiver, c, &precision))
            .collect();
        evaluations += total;
        let mut moved = false;
        for (i, v) in values.iter().enumerate() {
            if *v < best_value {
                best_value = *v;
                best = candidate(i);
                moved = true;
            }
        }
        // re-centre at this spacing until the minimum stays put
        if moved && recentred < MAX_RECENTRES {
            recentred += 1;
            continue;
        }
        recentred = 0;
        if step <= grid.resolution {
            return Ok(KlSearchResult {
                locations: LocationVector::from_slice(best.as_slice(), centre.k_min),
                objective: best_value,
                final_step: step,
                evaluations,
            });
        }
        half_width = step;
    }
}

/// Asymptotic large-`G` bound on Eve's mean squared error for Alice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormBound {
    /// m²; `+∞` when unbounded.
    pub value: f64,
    pub unbounded: bool,
    /// Always set: the bound holds only for a large enough number of symbols.
    pub asymptotic: bool,
    pub delay_term: f64,
    pub angle_term: f64,
    pub mismatch_term: f64,
    pub k_min: usize,
}

pub fn closed_form_bound(model: &LinkModel, shift: ShiftPair, sigma: f64, psi_slack: f64) -> Result<ClosedFormBound> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(DaisError::InvalidNoise(sigma));
    }
    let shifted = model.shifted_paths(shift);
    let pseudo_true = pseudo_true_locations(&shifted, model.scene.receiver, model.scene.c)?;
    let k = pseudo_true.k_min;
    let num = &model.numerology;
    let gain2 = shifted.gains[k].norm_sqr();
    let g = num.n_symbols as f64;
    let n = num.n_subcarriers as f64;
    let nt = num.n_tx as f64;
    let c = num.c;
    let s2 = sigma * sigma;
    let delay_term = 3.0 * s2 * c * c * n * num.sampling_period.powi(2) / (2.0 * g * gain2 * PI * PI * (n * n - 1.0)) - psi_slack / g;
    let c2 = 3.0 * s2 * c * c * num.wavelength.powi(2) / (2.0 * g * gain2 * PI * PI * num.antenna_spacing.powi(2) * n * (nt * nt - 1.0));
    let mismatch_term = pseudo_true.locations.alice.distance(model.scene.alice).powi(2);
    let cos = shifted.aods[k].cos();
    let tau = shifted.delays[k];
    // a sine within a few ulps of ±1 is end-fire to working precision
    let unbounded = 1.0 - shifted.aods[k].sin().abs() <= 4.0 * f64::EPSILON;
    let angle_term = if unbounded { f64::INFINITY } else { c2 * tau * tau / (cos * cos) };
    let value = if unbounded { f64::INFINITY } else { delay_term + angle_term + mismatch_term };
    Ok(ClosedFormBound { value, unbounded, asymptotic: true, delay_term, angle_term, mismatch_term, k_min: k })
}
