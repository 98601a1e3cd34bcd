//! Channel-parameter Fisher information, its effective (nuisance-free) form,
//! the map to the location domain and the legitimate receiver's CRB.
//!
//! Channel parameters are always stacked as `[τ; θ; Re γ; Im γ]`, one entry
//! per path in each block.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{DaisError, Result};
use crate::model::LinkModel;
use crate::scene::{Complex64, LocationVector, Numerology, Position2D, ShiftPair};
use crate::waveform::{path_response, EffectivePath, PilotSet};

/// Relative eigenvalue floor below which an information matrix is treated
/// as singular.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMap {
    pub delays: Range<usize>,
    pub aods: Range<usize>,
    pub re_gain: Range<usize>,
    pub im_gain: Range<usize>,
    pub shifts: Option<Range<usize>>,
}

impl BlockMap {
    pub fn channel(n_paths: usize) -> Self {
        BlockMap {
            delays: 0..n_paths,
            aods: n_paths..2 * n_paths,
            re_gain: 2 * n_paths..3 * n_paths,
            im_gain: 3 * n_paths..4 * n_paths,
            shifts: None,
        }
    }

    /// Delay and angle blocks only, as left by [`efim`].
    pub fn location_relevant(n_paths: usize) -> Self {
        BlockMap { delays: 0..n_paths, aods: n_paths..2 * n_paths, re_gain: 0..0, im_gain: 0..0, shifts: None }
    }
}

pub fn channel_labels(n_paths: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(4 * n_paths);
    for prefix in ["tau", "theta", "re_gamma", "im_gamma"] {
        labels.extend((0..n_paths).map(|k| format!("{prefix}_{k}")));
    }
    labels
}

/// A real symmetric information matrix with its parameter labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    pub entries: DMatrix<f64>,
    pub labels: Vec<String>,
    pub blocks: BlockMap,
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn symmetry_error(&self) -> f64 {
        let scale = self.entries.amax().max(f64::MIN_POSITIVE);
        (&self.entries - self.entries.transpose()).amax() / scale
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        SymmetricEigen::new(self.entries.clone()).eigenvalues
    }

    /// True when symmetric to 1e-9 and no eigenvalue is below `-1e-9 · max`.
    pub fn is_valid_information(&self) -> bool {
        let eig = self.eigenvalues();
        let max = eig.amax();
        self.symmetry_error() <= 1e-9 && eig.iter().all(|&l| l >= -1e-9 * max)
    }
}

/// Inverse of a positive definite matrix with its condition number.
#[derive(Debug, Clone, PartialEq)]
pub struct Inverse {
    pub matrix: DMatrix<f64>,
    pub condition: f64,
}

/// Inverts a symmetric positive definite matrix through a Jacobi-scaled
/// eigendecomposition. Eigenvalues under `EIGEN_FLOOR · max` of the scaled
/// matrix are reported as singular.
pub fn invert_information(m: &DMatrix<f64>) -> Result<Inverse> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Inverse { matrix: DMatrix::zeros(0, 0), condition: 1.0 });
    }
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    if diag.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(DaisError::SingularInformation { condition: f64::INFINITY });
    }
    let scale = DVector::from_iterator(n, diag.iter().map(|d| 1.0 / d.sqrt()));
    let mut scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * scale[i] * scale[j]);
    scaled = (&scaled + scaled.transpose()) * 0.5;
    let eig = SymmetricEigen::new(scaled);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(min > EIGEN_FLOOR * max) {
        return Err(DaisError::SingularInformation { condition });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let scaled_inverse = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    let mut matrix = DMatrix::from_fn(n, n, |i, j| scaled_inverse[(i, j)] * scale[i] * scale[j]);
    matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(Inverse { matrix, condition })
}

/// Partial derivatives of the noiseless sample `(g, n)` with respect to
/// `[τ; θ; Re γ; Im γ]`. The angle partials follow `paths[k].sine_rate`,
/// so the same routine serves both the observed and the precoded views.
pub fn signal_gradient(g: usize, n: usize, paths: &[EffectivePath], pilots: &PilotSet, numerology: &Numerology) -> DVector<Complex64> {
    let k1 = paths.len();
    let mut grad = DVector::zeros(4 * k1);
    write_gradient(grad.as_mut_slice(), n, paths, pilots.pilot(g, n), numerology);
    grad
}

fn write_gradient(out: &mut [Complex64], n: usize, paths: &[EffectivePath], symbol: &[Complex64], numerology: &Numerology) {
    let k1 = paths.len();
    let j = Complex64::new(0.0, 1.0);
    let delay_rate = -2.0 * PI * n as f64 / numerology.delay_span();
    let angle_step = numerology.spatial_phase_step();
    for (k, path) in paths.iter().enumerate() {
        let r = path_response(n, path, symbol, numerology);
        let base = r.phasor * r.response;
        out[k] = path.gain * base * j * delay_rate;
        out[k1 + k] = path.gain * r.phasor * r.weighted_response * j * (angle_step * path.sine_rate);
        out[2 * k1 + k] = base;
        out[3 * k1 + k] = base * j;
    }
}

/// All sample gradients stacked as rows, symbol-major.
pub fn gradient_matrix(paths: &[EffectivePath], pilots: &PilotSet, numerology: &Numerology) -> DMatrix<Complex64> {
    let rows = pilots.n_symbols * pilots.n_subcarriers;
    let cols = 4 * paths.len();
    let mut d = DMatrix::zeros(rows, cols);
    let mut buf = vec![Complex64::new(0.0, 0.0); cols];
    for g in 0..pilots.n_symbols {
        for n in 0..pilots.n_subcarriers {
            write_gradient(&mut buf, n, paths, pilots.pilot(g, n), numerology);
            let row = g * pilots.n_subcarriers + n;
            for (c, v) in buf.iter().enumerate() {
                d[(row, c)] = *v;
            }
        }
    }
    d
}

/// `(2/σ²) Re{Dᴴ D}` for a stacked gradient matrix `D`.
pub fn fim_from_gradients(gradients: &DMatrix<Complex64>, sigma: f64) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(DaisError::InvalidNoise(sigma));
    }
    let gram: DMatrix<Complex<f64>> = gradients.adjoint() * gradients;
    let mut j = gram.map(|z| z.re) * (2.0 / (sigma * sigma));
    j = (&j + j.transpose()) * 0.5;
    Ok(j)
}

/// Fisher information of the channel parameters `ξ = [τ; θ; Re γ; Im γ]`.
pub fn fim_channel(paths: &[EffectivePath], pilots: &PilotSet, numerology: &Numerology, sigma: f64) -> Result<FisherMatrix> {
    let entries = fim_from_gradients(&gradient_matrix(paths, pilots, numerology), sigma)?;
    Ok(FisherMatrix { entries, labels: channel_labels(paths.len()), blocks: BlockMap::channel(paths.len()) })
}

/// Effective information of the parameters in `keep` after marginalizing
/// all the others: `J₁ − J₂ J₄⁻¹ J₃`.
pub fn efim(fim: &FisherMatrix, keep: Range<usize>) -> Result<FisherMatrix> {
    let n = fim.dim();
    assert!(keep.end <= n && keep.start <= keep.end, "keep range out of bounds");
    let kept: Vec<usize> = keep.clone().collect();
    let rest: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| fim.entries[(rows[i], cols[j])]);
    let j1 = pick(&kept, &kept);
    let entries = if rest.is_empty() {
        j1
    } else {
        let j2 = pick(&kept, &rest);
        let j4 = pick(&rest, &rest);
        let inv = invert_information(&j4).map_err(|e| match e {
            DaisError::SingularInformation { condition } => DaisError::SingularNuisance { condition },
            other => other,
        })?;
        let schur = &j1 - &j2 * inv.matrix * j2.transpose();
        (&schur + schur.transpose()) * 0.5
    };
    let labels = kept.iter().map(|&i| fim.labels[i].clone()).collect();
    let blocks = if keep == (0..2 * (n / 4)) && fim.blocks == BlockMap::channel(n / 4) {
        BlockMap::location_relevant(n / 4)
    } else {
        BlockMap { delays: 0..kept.len(), aods: 0..0, re_gain: 0..0, im_gain: 0..0, shifts: None }
    };
    Ok(FisherMatrix { entries, labels, blocks })
}

/// `∂η/∂φ`: rows `[τ_0..τ_K, θ_0..θ_K]` by path label, columns
/// `[p_x, p_y, v1_x, v1_y, ...]`. Path labels follow `locations.k_min`.
pub fn location_jacobian(locations: &LocationVector, receiver: Position2D, c: f64) -> Result<DMatrix<f64>> {
    let k1 = locations.scatterers.len() + 1;
    let mut pi = DMatrix::zeros(2 * k1, 2 * k1);
    let p = locations.alice;
    let degenerate = |what: String| DaisError::DegenerateGeometry(what);

    // direct path
    let row = locations.path_of_slot(0);
    let d = receiver - p;
    let r2 = d.dot(d);
    if r2 == 0.0 {
        return Err(degenerate("alice coincides with the receiver".into()));
    }
    let r = r2.sqrt();
    pi[(row, 0)] = -d.x / (c * r);
    pi[(row, 1)] = -d.y / (c * r);
    pi[(k1 + row, 0)] = d.y / r2;
    pi[(k1 + row, 1)] = -d.x / r2;

    for (j, &v) in locations.scatterers.iter().enumerate() {
        let slot = j + 1;
        let row = locations.path_of_slot(slot);
        let col = 2 * slot;
        let out = v - p;
        let back = v - receiver;
        let (r_out, r_back) = (out.norm(), back.norm());
        if r_out == 0.0 || r_back == 0.0 {
            return Err(degenerate(format!("scatterer {slot} coincides with alice or the receiver")));
        }
        pi[(row, 0)] = -out.x / (c * r_out);
        pi[(row, 1)] = -out.y / (c * r_out);
        pi[(row, col)] = back.x / (c * r_back) + out.x / (c * r_out);
        pi[(row, col + 1)] = back.y / (c * r_back) + out.y / (c * r_out);
        let r2 = r_out * r_out;
        pi[(k1 + row, 0)] = out.y / r2;
        pi[(k1 + row, 1)] = -out.x / r2;
        pi[(k1 + row, col)] = -out.y / r2;
        pi[(k1 + row, col + 1)] = out.x / r2;
    }
    Ok(pi)
}

/// `Πᵀ J_η Π`.
pub fn location_fim(efim: &DMatrix<f64>, jacobian: &DMatrix<f64>) -> DMatrix<f64> {
    let j = jacobian.transpose() * efim * jacobian;
    (&j + j.transpose()) * 0.5
}

/// Summary of both receivers' bounds at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub shift: ShiftPair,
    pub snr_db: f64,
    pub sigma: f64,
    /// Trace of the Alice block of Bob's CRB, m².
    pub crb_trace_alice: f64,
    /// Trace of the Alice block of Eve's MCRB, m².
    pub mcrb_trace_alice: f64,
    /// Distance between Alice's true and pseudo-true positions, m.
    pub mismatch_distance: f64,
    pub rmse_bob: f64,
    pub rmse_eve: f64,
    pub k_min: usize,
    pub bob_condition: f64,
    pub eve_condition: f64,
}

/// Bob's CRB on all locations.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbResult {
    /// `Ξ = J_φ⁻¹`
    pub crb: DMatrix<f64>,
    pub location_fim: DMatrix<f64>,
    pub rmse_bob: f64,
    pub condition: f64,
}

impl CrbResult {
    pub fn trace_alice(&self) -> f64 {
        self.crb[(0, 0)] + self.crb[(1, 1)]
    }
}

/// Effective information of Bob's true delays and angles. Bob knows the
/// shift, so he differentiates the precoded signal `h⁽ⁿ⁾Φ⁽ⁿ⁾s` with respect
/// to the physical parameters.
pub fn bob_efim(model: &LinkModel, shift: ShiftPair, sigma: f64) -> Result<FisherMatrix> {
    let paths = EffectivePath::precoded(&model.true_paths, shift);
    let j = fim_channel(&paths, &model.pilots, &model.numerology, sigma)?;
    efim(&j, 0..2 * model.n_paths())
}

pub fn crb_bob(model: &LinkModel, shift: ShiftPair, sigma: f64) -> Result<CrbResult> {
    let j_eta = bob_efim(model, shift, sigma)?;
    let pi = location_jacobian(&model.true_locations(), model.scene.receiver, model.scene.c)?;
    let j_phi = location_fim(&j_eta.entries, &pi);
    let inv = invert_information(&j_phi)?;
    let rmse_bob = (inv.matrix[(0, 0)] + inv.matrix[(1, 1)]).sqrt();
    Ok(CrbResult { crb: inv.matrix, location_fim: j_phi, rmse_bob, condition: inv.condition })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{forward_map, PathParams, Scene};
    use crate::waveform::{noiseless_sample, pilots};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_rel(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * b.abs().max(a.abs()), "{a} vs {b}");
    }

    #[test]
    fn zero_gain_kills_location_partials() {
        let model = LinkModel::reference(1);
        let mut params = model.true_paths.clone();
        params.gains[1] = Complex64::new(0.0, 0.0);
        let paths = EffectivePath::observed(&params);
        let grad = signal_gradient(2, 5, &paths, &model.pilots, &model.numerology);
        assert_eq!(grad[1], Complex64::new(0.0, 0.0));
        assert_eq!(grad[4], Complex64::new(0.0, 0.0));
        let dc = signal_gradient(2, 0, &paths, &model.pilots, &model.numerology);
        for k in 0..3 {
            assert_eq!(dc[k].norm(), 0.0);
        }
    }

    fn sample_at(xi: &[f64], n: usize, symbol: &[Complex64], num: &Numerology) -> Complex64 {
        let k1 = xi.len() / 4;
        let params = PathParams {
            delays: xi[..k1].to_vec(),
            aods: xi[k1..2 * k1].to_vec(),
            gains: (0..k1).map(|k| Complex64::new(xi[2 * k1 + k], xi[3 * k1 + k])).collect(),
        };
        noiseless_sample(n, &EffectivePath::observed(&params), symbol, num)
    }

    #[test]
    fn gradient_matches_central_differences() {
        let model = LinkModel::reference(4);
        let num = model.numerology;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let params = model.shifted_paths(ShiftPair::new(0.05, 0.3));
        let k1 = params.len();
        let mut xi: Vec<f64> = params.delays.clone();
        xi.extend(&params.aods);
        xi.extend(params.gains.iter().map(|g| g.re));
        xi.extend(params.gains.iter().map(|g| g.im));
        let paths = EffectivePath::observed(&params);
        for _ in 0..20 {
            let g = rng.random_range(0..num.n_symbols);
            let n = rng.random_range(1..num.n_subcarriers);
            let symbol = model.pilots.pilot(g, n);
            let analytic = signal_gradient(g, n, &paths, &model.pilots, &num);
            for i in 0..4 * k1 {
                let block = i / k1;
                let scale = match block {
                    0 => 0.05,
                    1 => 1.0,
                    _ => params.gains[i % k1].norm(),
                };
                let h = 1e-6 * scale;
                let mut up = xi.clone();
                up[i] += h;
                let mut down = xi.clone();
                down[i] -= h;
                let fd = (sample_at(&up, n, symbol, &num) - sample_at(&down, n, symbol, &num)) / (2.0 * h);
                let block_max = (block * k1..(block + 1) * k1).map(|c| analytic[c].norm()).fold(0.0, f64::max);
                assert!((fd - analytic[i]).norm() <= 1e-6 * block_max, "param {i}: {fd} vs {}", analytic[i]);
            }
        }
    }

    #[test]
    fn fim_scales_with_noise() {
        let model = LinkModel::reference(1);
        let paths = EffectivePath::observed(&model.true_paths);
        let a = fim_channel(&paths, &model.pilots, &model.numerology, 1e-6).unwrap();
        let b = fim_channel(&paths, &model.pilots, &model.numerology, 2e-6).unwrap();
        for (x, y) in a.entries.iter().zip(b.entries.iter()) {
            assert_rel(*x, 4.0 * y, 1e-14);
        }
        assert!(a.is_valid_information());
        assert_eq!(a.labels[0], "tau_0");
        assert_eq!(a.labels[11], "im_gamma_2");
        assert!(matches!(fim_channel(&paths, &model.pilots, &model.numerology, 0.0), Err(DaisError::InvalidNoise(_))));
    }

    #[test]
    fn single_path_gain_coupling_settles_at_index_moments() {
        // Phases are referenced to subcarrier 0 and antenna 0, so the delay and
        // angle partials stay correlated with the gain phase for any G. The
        // coupling converges to mean(i) / rms(i) over the index range.
        let mut scene = Scene::reference().los_only();
        scene.n_symbols = 256;
        let model = LinkModel::new(scene, 1.0, 2).unwrap();
        let paths = EffectivePath::observed(&model.true_paths);
        let j = fim_channel(&paths, &model.pilots, &model.numerology, 1e-6).unwrap().entries;
        let moment_ratio = |len: usize| {
            let mean = (0..len).sum::<usize>() as f64 / len as f64;
            let square = (0..len).map(|i| (i * i) as f64).sum::<f64>() / len as f64;
            mean / square.sqrt()
        };
        let expected = [moment_ratio(model.numerology.n_subcarriers), moment_ratio(model.numerology.n_tx)];
        for loc in 0..2 {
            let coupling = ((j[(loc, 2)].powi(2) + j[(loc, 3)].powi(2)) / (j[(loc, loc)] * j[(2, 2)])).sqrt();
            assert!((coupling - expected[loc]).abs() < 0.03, "{loc}: {coupling} vs {}", expected[loc]);
        }
    }

    #[test]
    fn efim_examples() {
        let j = FisherMatrix {
            entries: DMatrix::from_row_slice(4, 4, &[2., 0., 1., 0., 0., 2., 0., 1., 1., 0., 1., 0., 0., 1., 0., 1.]),
            labels: channel_labels(1),
            blocks: BlockMap::channel(1),
        };
        let e = efim(&j, 0..2).unwrap();
        assert!((e.entries - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
        assert_eq!(e.blocks, BlockMap::location_relevant(1));

        let diag = FisherMatrix {
            entries: DMatrix::from_diagonal(&DVector::from_vec(vec![3., 4., 5., 6.])),
            labels: channel_labels(1),
            blocks: BlockMap::channel(1),
        };
        let e = efim(&diag, 0..2).unwrap();
        assert_eq!(e.entries, DMatrix::from_diagonal(&DVector::from_vec(vec![3., 4.])));

        let singular = FisherMatrix {
            entries: DMatrix::from_row_slice(4, 4, &[2., 0., 1., 0., 0., 2., 0., 1., 1., 0., 1., 1., 0., 1., 1., 1.]),
            labels: channel_labels(1),
            blocks: BlockMap::channel(1),
        };
        assert!(matches!(efim(&singular, 0..2), Err(DaisError::SingularNuisance { .. })));
    }

    #[test]
    fn efim_never_exceeds_leading_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let a = DMatrix::from_fn(6, 8, |_, _| rng.random_range(-1.0..1.0));
            let j = FisherMatrix { entries: &a * a.transpose() + DMatrix::identity(6, 6) * 1e-3, labels: vec![String::new(); 6], blocks: BlockMap::channel(1) };
            let e = efim(&j, 0..3).unwrap();
            let gap = j.entries.view((0, 0), (3, 3)).into_owned() - e.entries;
            let min = SymmetricEigen::new(gap).eigenvalues.min();
            assert!(min >= -1e-12, "{min}");
        }
    }

    #[test]
    fn location_jacobian_example_and_structure() {
        let scene = Scene::reference();
        let pi = location_jacobian(&scene.true_locations(), scene.receiver, scene.c).unwrap();
        assert_rel(pi[(0, 0)], -0.813733 / 300.0, 1e-6);
        assert_rel(pi[(0, 1)], -0.581238 / 300.0, 1e-6);
        for col in 2..6 {
            assert_eq!(pi[(0, col)], 0.0);
            assert_eq!(pi[(3, col)], 0.0);
        }
    }

    #[test]
    fn location_jacobian_matches_finite_differences() {
        let scene = Scene::reference();
        let paths = scene_paths_for(&scene);
        for shift in [ShiftPair::ZERO, ShiftPair::new(15.0 / 30.0, 0.25 * PI)] {
            let shifted = crate::scene::shift_params(&paths, shift, scene.delay_span());
            let loc = crate::scene::locations_from_params(&shifted, scene.receiver, scene.c).unwrap();
            let pi = location_jacobian(&loc, scene.receiver, scene.c).unwrap();
            let phi = loc.to_vector();
            let eval = |v: &DVector<f64>| {
                let l = LocationVector::from_slice(v.as_slice(), loc.k_min);
                let (d, a) = forward_map(&l, scene.receiver, scene.c).unwrap();
                let mut out = d;
                out.extend(a);
                out
            };
            for col in 0..phi.len() {
                let h = 1e-6 * phi[col].abs().max(1.0);
                let mut up = phi.clone();
                up[col] += h;
                let mut down = phi.clone();
                down[col] -= h;
                let (fu, fd) = (eval(&up), eval(&down));
                for row in 0..phi.len() {
                    let numeric = (fu[row] - fd[row]) / (2.0 * h);
                    let row_max = pi.row(row).amax();
                    assert!((numeric - pi[(row, col)]).abs() <= 1e-6 * row_max, "({row},{col}) {numeric} vs {}", pi[(row, col)]);
                }
            }
        }
    }

    fn scene_paths_for(scene: &Scene) -> PathParams {
        crate::scene::scene_paths(scene, 1.0).unwrap()
    }

    #[test]
    fn bob_without_shift_is_the_plain_crb() {
        let model = LinkModel::reference(1);
        let sigma = model.sigma_for_snr(ShiftPair::ZERO, 0.0).unwrap();
        let bob = crb_bob(&model, ShiftPair::ZERO, sigma).unwrap();
        let paths = EffectivePath::observed(&model.true_paths);
        let j = efim(&fim_channel(&paths, &model.pilots, &model.numerology, sigma).unwrap(), 0..6).unwrap();
        let pi = location_jacobian(&model.true_locations(), model.scene.receiver, model.scene.c).unwrap();
        let plain = invert_information(&location_fim(&j.entries, &pi)).unwrap();
        assert!((&bob.crb - &plain.matrix).amax() <= 1e-10 * plain.matrix.amax());
    }

    #[test]
    fn bob_rmse_follows_noise_level() {
        let model = LinkModel::reference(1);
        let shift = ShiftPair::new(model.numerology.sampling_period, 0.25 * PI);
        let mut last = None;
        for snr in [-10.0, 10.0, 30.0] {
            let sigma = model.sigma_for_snr(shift, snr).unwrap();
            let rmse = crb_bob(&model, shift, sigma).unwrap().rmse_bob;
            if let Some(prev) = last {
                assert_rel(prev / rmse, 10.0, 0.02);
            }
            last = Some(rmse);
        }
    }

    #[test]
    fn bob_information_is_reparameterized_virtual_information() {
        let model = LinkModel::reference(3);
        let shift = ShiftPair::new(0.07, -0.6);
        let sigma = 1e-6;
        let bob = fim_channel(&EffectivePath::precoded(&model.true_paths, shift), &model.pilots, &model.numerology, sigma).unwrap();
        let shifted = model.shifted_paths(shift);
        let eve = fim_channel(&EffectivePath::observed(&shifted), &model.pilots, &model.numerology, sigma).unwrap();
        let k1 = model.n_paths();
        let mut chain = DVector::from_element(4 * k1, 1.0);
        for k in 0..k1 {
            chain[k1 + k] = model.true_paths.aods[k].cos() / shifted.aods[k].cos();
        }
        let conjugated = DMatrix::from_fn(4 * k1, 4 * k1, |i, j| eve.entries[(i, j)] * chain[i] * chain[j]);
        assert!((&bob.entries - &conjugated).amax() <= 1e-8 * bob.entries.amax());
    }

    #[test]
    fn more_symbols_never_lose_information() {
        let scene = Scene::reference();
        let num = scene.numerology();
        let params = scene_paths_for(&scene);
        let paths = EffectivePath::observed(&params);
        let short = pilots(16, num.n_subcarriers, num.n_tx, 6);
        let long = pilots(32, num.n_subcarriers, num.n_tx, 6);
        let a = fim_channel(&paths, &short, &num, 1e-6).unwrap().entries;
        let mut num_long = num;
        num_long.n_symbols = 32;
        let b = fim_channel(&paths, &long, &num_long, 1e-6).unwrap().entries;
        let diff = &b - &a;
        let min = SymmetricEigen::new(diff).eigenvalues.min();
        assert!(min >= -1e-9 * b.amax());
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(invert_information(&m), Err(DaisError::SingularInformation { .. })));
        let ok = invert_information(&DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0])).unwrap();
        let id = ok.matrix * DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        assert!((id - DMatrix::<f64>::identity(2, 2)).amax() < 1e-14);
    }
}
