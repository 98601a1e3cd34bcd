//! Experiment orchestration: configuration, runs, CSV and plot output.

mod config;
mod output;
mod plot;

pub use config::{AverageSettings, ExperimentConfig, ExperimentKind, Seeds, SubarraySettings};
pub use output::{format_number, write_csv, write_rows, ResultRow, COLUMNS, SCHEMA_VERSION};
pub use plot::{emit_plot, heatmap_svg, line_svg, Series};

use std::path::PathBuf;

use rayon::prelude::*;

use crate::design::{delay_only_baseline, grid_eval, random_shift_average};
use crate::error::{DaisError, Result};
use crate::fisher::BoundReport;
use crate::mcrb::{bound_report, closed_form_bound, pseudo_true_locations, PseudoTrueSolution};
use crate::robustness::{deviation_sweep, leakage_fim, SubArrayScene, RANK_TOLERANCE};
use crate::scene::ShiftPair;

fn flag_error(row: &mut ResultRow, err: &DaisError) {
    row.flag(match err {
        DaisError::SingularInformation { .. } => "singular_information",
        DaisError::SingularNuisance { .. } => "singular_nuisance",
        DaisError::DegenerateGeometry(_) => "degenerate_geometry",
        DaisError::NoIntersection => "no_intersection",
        _ => "error",
    });
}

fn report_row(experiment: &str, shift: ShiftPair, snr_db: f64, report: Result<BoundReport>) -> ResultRow {
    let mut row = ResultRow::new(experiment, shift.delta_tau, shift.delta_theta);
    row.snr_db = Some(snr_db);
    match report {
        Ok(r) => {
            row.rmse_bob = Some(r.rmse_bob);
            row.rmse_eve = Some(r.rmse_eve);
            row.mismatch = Some(r.mismatch_distance);
            row.k_min = Some(r.k_min);
            row.bob_condition = Some(r.bob_condition);
            row.eve_condition = Some(r.eve_condition);
            if r.k_min != 0 {
                row.flag("swapped");
            }
        }
        Err(e) => {
            row.rmse_bob = Some(f64::INFINITY);
            row.rmse_eve = Some(f64::INFINITY);
            flag_error(&mut row, &e);
        }
    }
    row
}

/// Both bounds at the configured shift for every SNR of the sweep.
pub fn run_bounds(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let model = config.link_model()?;
    let snrs = config.snr_sweep.points();
    Ok(snrs
        .par_iter()
        .map(|&snr| {
            let mut row = report_row("bounds", config.shift, snr, bound_report(&model, config.shift, snr));
            if let Ok(sigma) = model.sigma_for_snr(config.shift, snr) {
                if let Ok(bound) = closed_form_bound(&model, config.shift, sigma, 0.0) {
                    if bound.unbounded {
                        row.flag("closed_form_unbounded");
                    }
                }
            }
            row
        })
        .collect())
}

/// Eve's bound over the design grid, one row per cell.
pub fn run_design(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let model = config.link_model()?;
    let surface = grid_eval(&model, &config.design)?;
    let mut rows = Vec::with_capacity(surface.delta_tau.len() * surface.delta_theta.len());
    for (i, &tau) in surface.delta_tau.iter().enumerate() {
        for (j, &theta) in surface.delta_theta.iter().enumerate() {
            let mut row = ResultRow::new("design", tau, theta);
            row.snr_db = Some(config.design.snr_db);
            row.rmse_eve = Some(surface.rmse_eve[(i, j)]);
            row.mismatch = Some(surface.mismatch_distance[(i, j)]);
            row.cos_sq_kmin = Some(surface.cos_sq_kmin[(i, j)]);
            row.k_min = Some(surface.k_min[(i, j)]);
            if !surface.rmse_eve[(i, j)].is_finite() {
                row.flag("singular_information");
            }
            if !surface.mismatch_distance[(i, j)].is_finite() {
                row.flag("degenerate_geometry");
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Random-shift averages per SNR, plus the delay-only baseline when
/// configured.
pub fn run_average(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let model = config.link_model()?;
    let snrs = config.snr_sweep.points();
    let averages = random_shift_average(&model, config.average.realizations, config.seeds.shift, &snrs)?;
    let mut rows: Vec<ResultRow> = averages
        .iter()
        .map(|a| {
            let mut row = ResultRow::new("average", f64::NAN, f64::NAN);
            row.snr_db = Some(a.snr_db);
            row.rmse_bob = Some(a.rmse_bob);
            row.rmse_eve = Some(a.rmse_eve);
            row.flag(format!("realizations={}", a.realizations));
            if a.failures > 0 {
                row.flag(format!("failures={}", a.failures));
            }
            row
        })
        .collect();
    if let Some(tau_obf) = config.average.baseline_tau_obf {
        for &snr in &snrs {
            let mut row = ResultRow::new("average-baseline", tau_obf, 0.0);
            row.snr_db = Some(snr);
            let result = model.sigma_for_snr(ShiftPair::ZERO, snr).and_then(|sigma| delay_only_baseline(&model, tau_obf, sigma));
            match result {
                Ok(b) => {
                    row.rmse_eve = Some(b.bound.rmse_eve);
                    row.mismatch = Some(b.bound.mismatch_distance);
                    row.k_min = Some(b.bound.pseudo_true.k_min);
                    row.eve_condition = Some(b.bound.condition);
                    if b.ineffective {
                        row.flag("baseline_ineffective");
                    }
                }
                Err(e) => {
                    row.rmse_eve = Some(f64::INFINITY);
                    flag_error(&mut row, &e);
                }
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Rank and conditioning of the information when the shift is unknown.
pub fn run_leakage(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let model = config.link_model()?;
    config
        .snr_sweep
        .points()
        .iter()
        .map(|&snr| {
            let sigma = model.sigma_for_snr(config.shift, snr)?;
            let leak = leakage_fim(&model, config.shift, sigma)?;
            let mut row = ResultRow::new("leakage", config.shift.delta_tau, config.shift.delta_theta);
            row.snr_db = Some(snr);
            row.rank = Some(leak.rank);
            row.min_singular_ratio = Some(leak.min_singular_ratio);
            if leak.min_singular_ratio < RANK_TOLERANCE {
                row.flag("singular");
            }
            Ok(row)
        })
        .collect()
}

/// Sub-array perceived-position error across angle (and delay) shifts.
/// The first row on each side of zero angle shift whose error exceeds
/// 1 m is flagged `threshold`.
pub fn run_subarray(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let scene = &config.scene;
    let base = SubArrayScene::with_elements(scene.receiver, scene.alice, config.subarray.n_rx, scene.wavelength(), config.subarray.orientation)?;
    let thetas = config.subarray.delta_theta.points();
    let mut rows = Vec::new();
    for &tau in &config.subarray.delta_tau {
        let shifts: Vec<ShiftPair> = thetas.iter().map(|&t| ShiftPair::new(tau, t)).collect();
        let points = deviation_sweep(&base, &shifts);
        let mut block: Vec<ResultRow> = points
            .iter()
            .map(|p| {
                let mut row = ResultRow::new("subarray", p.shift.delta_tau, p.shift.delta_theta);
                row.deviation = Some(p.deviation);
                if p.no_intersection {
                    row.flag("no_intersection");
                }
                row
            })
            .collect();
        for positive in [true, false] {
            let first = block
                .iter()
                .enumerate()
                .filter(|(_, r)| if positive { r.delta_theta > 0.0 } else { r.delta_theta < 0.0 })
                .filter(|(_, r)| r.deviation.is_some_and(|d| d > 1.0))
                .min_by(|a, b| a.1.delta_theta.abs().total_cmp(&b.1.delta_theta.abs()))
                .map(|(i, _)| i);
            if let Some(i) = first {
                block[i].flag("threshold");
            }
        }
        rows.extend(block);
    }
    Ok(rows)
}

pub fn run_pseudo_true(config: &ExperimentConfig) -> Result<PseudoTrueSolution> {
    let model = config.link_model()?;
    pseudo_true_locations(&model.shifted_paths(config.shift), model.scene.receiver, model.scene.c)
}

/// Rows of the configured experiment. The pseudo-true solution is reported
/// as a single row carrying its mismatch and leading path.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    match config.experiment {
        ExperimentKind::Bounds => run_bounds(config),
        ExperimentKind::Design => run_design(config),
        ExperimentKind::Average => run_average(config),
        ExperimentKind::Leakage => run_leakage(config),
        ExperimentKind::Subarray => run_subarray(config),
        ExperimentKind::PseudoTrue => {
            let solution = run_pseudo_true(config)?;
            let mut row = ResultRow::new("pseudo-true", config.shift.delta_tau, config.shift.delta_theta);
            row.mismatch = Some(solution.locations.alice.distance(config.scene.alice));
            row.k_min = Some(solution.k_min);
            if solution.swapped {
                row.flag("swapped");
            }
            Ok(vec![row])
        }
    }
}

/// Paths written by [`run_and_write`].
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub plot: Option<(PathBuf, PathBuf)>,
    pub rows: usize,
    /// Every row is non-finite.
    pub all_degenerate: bool,
}

/// Runs the experiment and writes `<kind>.csv` (and a plot for kinds that
/// have one) into the configured output directory.
pub fn run_and_write(config: &ExperimentConfig) -> Result<Artifacts> {
    let rows = run(config)?;
    std::fs::create_dir_all(&config.output)?;
    let stem = config.experiment.name();
    let csv = config.output.join(format!("{stem}.csv"));
    write_csv(&csv, &rows)?;
    let plot = match config.experiment {
        ExperimentKind::PseudoTrue => None,
        kind => Some(emit_plot(&rows, kind, &config.output, stem)?),
    };
    let all_degenerate = !rows.is_empty() && rows.iter().all(ResultRow::is_degenerate);
    Ok(Artifacts { csv, plot, rows: rows.len(), all_degenerate })
}

/// Reference experiment for `kind` with the given output directory.
pub fn reference_config(kind: ExperimentKind, output: PathBuf) -> ExperimentConfig {
    ExperimentConfig { output, ..ExperimentConfig::reference(kind) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bounds_rows_follow_the_sweep() {
        let mut config = ExperimentConfig::reference(ExperimentKind::Bounds);
        config.snr_sweep = crate::design::Range1D::new(0.0, 20.0, 10.0);
        let rows = run_bounds(&config).unwrap();
        assert_eq!(rows.len(), 3);
        assert!((rows[0].rmse_eve.unwrap() - 19.22).abs() < 0.1);
        assert!(rows.iter().all(|r| r.flags.is_empty()));
    }

    #[test]
    fn zero_shift_bounds_coincide() {
        let mut config = ExperimentConfig::reference(ExperimentKind::Bounds);
        config.shift = ShiftPair::ZERO;
        for row in run_bounds(&config).unwrap() {
            let (b, e) = (row.rmse_bob.unwrap(), row.rmse_eve.unwrap());
            assert!((b - e).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn leakage_rows_are_flagged_singular() {
        let mut config = ExperimentConfig::reference(ExperimentKind::Leakage);
        config.snr_sweep = crate::design::Range1D::new(0.0, 0.0, 1.0);
        let rows = run_leakage(&config).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].flags.contains(&"singular".to_string()));
    }

    #[test]
    fn subarray_threshold_near_a_tenth_of_a_radian() {
        let config = ExperimentConfig::reference(ExperimentKind::Subarray);
        let rows = run_subarray(&config).unwrap();
        let thresholds: Vec<f64> = rows.iter().filter(|r| r.flags.contains(&"threshold".to_string())).map(|r| r.delta_theta).collect();
        assert_eq!(thresholds.len(), 2);
        for t in thresholds {
            assert!((t.abs() - 0.1).abs() < 0.02, "{t}");
        }
    }

    #[test]
    fn pseudo_true_row() {
        let mut config = ExperimentConfig::reference(ExperimentKind::PseudoTrue);
        config.shift = ShiftPair::new(config.scene.sampling_period() * 15.0, 0.25 * PI);
        let rows = run(&config).unwrap();
        assert_eq!(rows[0].k_min, Some(1));
        assert_eq!(rows[0].flags, vec!["swapped".to_string()]);
    }
}
