//! What an adversary can still do: estimate the shift jointly with the
//! channel (the augmented information is singular), or localize from two
//! sub-array bearings (the orientation estimate inherits the angle shift).

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2, Vector2};
use rayon::prelude::*;

use crate::error::{DaisError, Result};
use crate::fisher::{channel_labels, fim_from_gradients, gradient_matrix, BlockMap, FisherMatrix};
use crate::model::LinkModel;
use crate::scene::{wrap_interval, Position2D, ShiftPair};
use crate::waveform::EffectivePath;

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LeakageFim {
    /// Information on `[τ; θ; Re γ; Im γ; Δτ; Δθ]`.
    pub fim: FisherMatrix,
    pub rank: usize,
    /// Smallest over largest singular value of the diagonally scaled matrix.
    pub min_singular_ratio: f64,
}

impl LeakageFim {
    pub fn rank_deficiency(&self) -> usize {
        self.fim.dim() - self.rank
    }

    /// Rank after dropping the two shift parameters.
    pub fn channel_rank(&self) -> usize {
        let n = self.fim.dim() - 2;
        scaled_spectrum(&self.fim.entries.view((0, 0), (n, n)).into_owned()).0
    }
}

/// Rank and singular-value ratio of `m` after scaling to unit diagonal, so
/// that parameters in different units weigh equally.
fn scaled_spectrum(m: &DMatrix<f64>) -> (usize, f64) {
    let n = m.nrows();
    let scale: Vec<f64> = (0..n).map(|i| if m[(i, i)] > 0.0 { 1.0 / m[(i, i)].sqrt() } else { 1.0 }).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] * scale[i] * scale[j]);
    let sv = scaled.singular_values();
    let max = sv.max();
    let min = sv.min();
    let rank = sv.iter().filter(|s| **s > RANK_TOLERANCE * max).count();
    (rank, if max > 0.0 { min / max } else { 0.0 })
}

/// Information when Eve treats the shift as two extra unknowns alongside
/// the physical channel. The delay-shift partial is the sum of the delay
/// partials; the angle-shift partial is taken directly from the precoder.
pub fn leakage_fim(model: &LinkModel, shift: ShiftPair, sigma: f64) -> Result<LeakageFim> {
    let k1 = model.n_paths();
    let paths = EffectivePath::precoded(&model.true_paths, shift);
    let base = gradient_matrix(&paths, &model.pilots, &model.numerology);
    let shift_rate = shift.delta_theta.cos();
    let through_precoder: Vec<EffectivePath> = paths.iter().map(|p| EffectivePath { sine_rate: shift_rate, ..*p }).collect();
    let precoder = gradient_matrix(&through_precoder, &model.pilots, &model.numerology);

    let rows = base.nrows();
    let mut d = DMatrix::zeros(rows, 4 * k1 + 2);
    d.columns_mut(0, 4 * k1).copy_from(&base);
    for r in 0..rows {
        d[(r, 4 * k1)] = (0..k1).map(|k| base[(r, k)]).sum();
        d[(r, 4 * k1 + 1)] = (0..k1).map(|k| precoder[(r, k1 + k)]).sum();
    }
    let entries = fim_from_gradients(&d, sigma)?;
    let mut labels = channel_labels(k1);
    labels.extend(["delta_tau".to_string(), "delta_theta".to_string()]);
    let mut blocks = BlockMap::channel(k1);
    blocks.shifts = Some(4 * k1..4 * k1 + 2);
    let (rank, min_singular_ratio) = scaled_spectrum(&entries);
    Ok(LeakageFim { fim: FisherMatrix { entries, labels, blocks }, rank, min_singular_ratio })
}

/// Two-sub-array eavesdropper facing a direct path only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubArrayScene {
    pub eve_center: Position2D,
    /// Full array aperture, m.
    pub aperture: f64,
    /// Array orientation, radians.
    pub true_orientation: f64,
    pub alice: Position2D,
    pub shift: ShiftPair,
}

impl SubArrayScene {
    /// Aperture of `n_rx` elements at half-wavelength spacing.
    pub fn with_elements(eve_center: Position2D, alice: Position2D, n_rx: usize, wavelength: f64, true_orientation: f64) -> Result<Self> {
        if n_rx < 2 {
            return Err(DaisError::InvalidScene(format!("need at least 2 receive antennas, got {n_rx}")));
        }
        let s = SubArrayScene { eve_center, aperture: (n_rx - 1) as f64 * wavelength / 2.0, true_orientation, alice, shift: ShiftPair::ZERO };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.aperture > 0.0 && self.aperture.is_finite()) {
            return Err(DaisError::InvalidScene(format!("aperture must be positive, got {}", self.aperture)));
        }
        if self.alice.distance(self.eve_center) <= self.aperture {
            return Err(DaisError::DegenerateGeometry("alice lies within the receive aperture".into()));
        }
        Ok(())
    }
}

fn wrap_angle(a: f64) -> f64 {
    wrap_interval(a, -PI, PI).expect("fixed interval")
}

fn bearing(from: Position2D, to: Position2D) -> f64 {
    let d = to - from;
    d.y.atan2(d.x)
}

/// Sub-array centres for an array turned to `orientation`.
pub fn subarray_positions(s: &SubArrayScene, orientation: f64) -> (Position2D, Position2D) {
    let offset = Position2D::new(orientation.sin(), -orientation.cos()) * (s.aperture / 4.0);
    (s.eve_center + offset, s.eve_center - offset)
}

/// Noiseless arrival angles at both sub-arrays, relative to the true
/// orientation and wrapped to `(−π, π]`.
pub fn true_aoas(s: &SubArrayScene) -> (f64, f64) {
    let (z1, z2) = subarray_positions(s, s.true_orientation);
    (wrap_angle(bearing(z1, s.alice) - s.true_orientation), wrap_angle(bearing(z2, s.alice) - s.true_orientation))
}

/// Orientation Eve infers from the departure angle she observes toward
/// sub-array 1 and the arrival angle there.
pub fn assumed_orientation(s: &SubArrayScene) -> f64 {
    let (z1, _) = subarray_positions(s, s.true_orientation);
    let d = z1 - s.alice;
    let departure = crate::scene::fold_half_turn(d.y.atan2(d.x));
    let sine = wrap_interval(departure.sin() + s.shift.delta_theta.sin(), -1.0, 1.0).expect("fixed interval");
    wrap_angle(PI + sine.asin() - true_aoas(s).0)
}

/// Intersection of the two bearing lines, in closed form.
pub fn perceived_location(s: &SubArrayScene, aoas: (f64, f64), orientation: f64) -> Result<Position2D> {
    let a1 = (aoas.0 + orientation).tan();
    let a2 = (aoas.1 + orientation).tan();
    let delta = a2 - a1;
    if !delta.is_finite() || delta.abs() <= 1e-12 * (1.0 + a1.abs() + a2.abs()) {
        return Err(DaisError::NoIntersection);
    }
    let (sin, cos) = orientation.sin_cos();
    let d = s.aperture;
    let z = s.eve_center;
    Ok(Position2D::new(
        z.x - d * sin * (a1 + a2) / (4.0 * delta) - d * cos / (2.0 * delta),
        z.y - d * cos * (a1 + a2) / (4.0 * delta) - d * sin * a1 * a2 / (2.0 * delta),
    ))
}

/// Intersection of the two bearing lines by solving the 2×2 system
/// `z1 + t1·u1 = z2 + t2·u2`.
pub fn intersect_bearings(s: &SubArrayScene, aoas: (f64, f64), orientation: f64) -> Result<Position2D> {
    let (z1, z2) = subarray_positions(s, orientation);
    let (u1, u2) = (Position2D::from_angle(aoas.0 + orientation), Position2D::from_angle(aoas.1 + orientation));
    let m = Matrix2::new(u1.x, -u2.x, u1.y, -u2.y);
    if m.determinant().abs() <= 1e-14 {
        return Err(DaisError::NoIntersection);
    }
    let t = m.lu().solve(&Vector2::new(z2.x - z1.x, z2.y - z1.y)).ok_or(DaisError::NoIntersection)?;
    Ok(z1 + u1 * t[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationPoint {
    pub shift: ShiftPair,
    /// Distance between Eve's perceived position and Alice, m; `+∞` when
    /// the bearing lines are parallel.
    pub deviation: f64,
    pub no_intersection: bool,
}

/// Perceived-position error of the sub-array method across shifts.
pub fn deviation_sweep(s: &SubArrayScene, shifts: &[ShiftPair]) -> Vec<DeviationPoint> {
    let aoas = true_aoas(s);
    shifts
        .par_iter()
        .map(|&shift| {
            let scene = SubArrayScene { shift, ..*s };
            match perceived_location(&scene, aoas, assumed_orientation(&scene)) {
                Ok(p) => DeviationPoint { shift, deviation: p.distance(s.alice), no_intersection: false },
                Err(_) => DeviationPoint { shift, deviation: f64::INFINITY, no_intersection: true },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scene;

    fn reference_subarray() -> SubArrayScene {
        let scene = Scene::reference();
        SubArrayScene::with_elements(scene.receiver, scene.alice, 16, scene.wavelength(), 0.0).unwrap()
    }

    #[test]
    fn leakage_structure() {
        let model = LinkModel::reference(1);
        let shift = ShiftPair::new(0.03, 0.7);
        let leak = leakage_fim(&model, shift, 1e-5).unwrap();
        assert_eq!(leak.fim.dim(), 14);
        assert!(leak.min_singular_ratio < 1e-10);
        assert!(leak.rank <= 12);
        assert_eq!(leak.channel_rank(), 12);
        assert_eq!(leak.fim.labels[13], "delta_theta");
    }

    #[test]
    fn shift_partials_are_combinations_of_channel_partials() {
        let model = LinkModel::reference(2);
        let shift = ShiftPair::new(-0.1, -0.4);
        let k1 = model.n_paths();
        let paths = EffectivePath::precoded(&model.true_paths, shift);
        let base = gradient_matrix(&paths, &model.pilots, &model.numerology);
        let through: Vec<EffectivePath> = paths.iter().map(|p| EffectivePath { sine_rate: shift.delta_theta.cos(), ..*p }).collect();
        let direct = gradient_matrix(&through, &model.pilots, &model.numerology);
        let scale = base.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for r in 0..base.nrows() {
            let combined: crate::scene::Complex64 = (0..k1)
                .map(|k| base[(r, k1 + k)] * (shift.delta_theta.cos() / model.true_paths.aods[k].cos()))
                .sum();
            let from_precoder: crate::scene::Complex64 = (0..k1).map(|k| direct[(r, k1 + k)]).sum();
            assert!((combined - from_precoder).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn subarray_examples() {
        let s = SubArrayScene { eve_center: Position2D::new(10.0, 5.0), aperture: 0.4, true_orientation: 0.0, alice: Position2D::new(3.0, 0.0), shift: ShiftPair::ZERO };
        let (z1, z2) = subarray_positions(&s, 0.0);
        assert_eq!(z1, Position2D::new(10.0, 4.9));
        assert_eq!(z2, Position2D::new(10.0, 5.1));
        for theta in [0.3, -2.0, 3.0] {
            let (a, b) = subarray_positions(&s, theta);
            assert!(((a + b) * 0.5).distance(s.eve_center) < 1e-12);
            assert!((a.distance(b) - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn unshifted_geometry_recovers_alice() {
        for orientation in [0.0, 0.8, -2.5, 3.0] {
            let mut s = reference_subarray();
            s.true_orientation = orientation;
            assert!(wrap_angle(assumed_orientation(&s) - orientation).abs() < 1e-12);
            let p = perceived_location(&s, true_aoas(&s), orientation).unwrap();
            assert!(p.distance(s.alice) < 1e-9);
        }
    }

    #[test]
    fn swapped_labels_give_same_point() {
        let s = reference_subarray();
        let (t1, t2) = true_aoas(&s);
        let a = perceived_location(&s, (t1, t2), 0.2).unwrap();
        let b = perceived_location(&s, (t2 - PI, t1 - PI), 0.2 + PI).unwrap();
        assert!(a.distance(b) < 1e-9);
    }

    #[test]
    fn parallel_bearings_have_no_intersection() {
        let s = reference_subarray();
        assert_eq!(perceived_location(&s, (0.3, 0.3), 0.0), Err(DaisError::NoIntersection));
        assert_eq!(intersect_bearings(&s, (0.3, 0.3), 0.0), Err(DaisError::NoIntersection));
    }

    #[test]
    fn deviation_is_a_rotation_about_eve() {
        let s = reference_subarray();
        let r = s.alice.distance(s.eve_center);
        let shifts: Vec<ShiftPair> = [-1.2, -0.5, -0.1, 0.0, 0.1, 0.5, 1.2].iter().map(|&t| ShiftPair::new(0.0, t)).collect();
        for point in deviation_sweep(&s, &shifts) {
            let error = wrap_angle(assumed_orientation(&SubArrayScene { shift: point.shift, ..s }) - s.true_orientation);
            assert!((point.deviation - 2.0 * r * (error / 2.0).sin().abs()).abs() < 1e-6, "{point:?}");
        }
    }

    #[test]
    fn delay_shift_does_not_move_the_perceived_point() {
        let s = reference_subarray();
        let a = deviation_sweep(&s, &[ShiftPair::new(0.0, 0.4), ShiftPair::new(0.2, 0.4), ShiftPair::new(-0.25, 0.4)]);
        assert_eq!(a[0].deviation, a[1].deviation);
        assert_eq!(a[0].deviation, a[2].deviation);
        assert!(deviation_sweep(&s, &[ShiftPair::ZERO])[0].deviation < 1e-9);
    }

    #[test]
    fn aperture_validation() {
        let scene = Scene::reference();
        assert!(SubArrayScene::with_elements(scene.receiver, scene.alice, 1, scene.wavelength(), 0.0).is_err());
        let s = SubArrayScene { aperture: -1.0, ..reference_subarray() };
        assert!(s.validate().is_err());
    }
}
