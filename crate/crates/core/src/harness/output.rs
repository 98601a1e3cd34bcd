use std::io::Write;
use std::path::Path;

use crate::error::Result;

/// Bumped whenever the column set or its meaning changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 16] = [
    "schema",
    "experiment",
    "snr_db",
    "delta_tau_us",
    "delta_theta_rad",
    "rmse_bob_m",
    "rmse_eve_m",
    "mismatch_m",
    "k_min",
    "bob_condition",
    "eve_condition",
    "cos_sq_kmin",
    "deviation_m",
    "rank",
    "min_singular_ratio",
    "flags",
];

/// One evaluated point. Columns that do not apply to an experiment stay
/// empty; non-finite values are written as `inf` and explained in `flags`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultRow {
    pub experiment: String,
    pub snr_db: Option<f64>,
    pub delta_tau: f64,
    pub delta_theta: f64,
    pub rmse_bob: Option<f64>,
    pub rmse_eve: Option<f64>,
    pub mismatch: Option<f64>,
    pub k_min: Option<usize>,
    pub bob_condition: Option<f64>,
    pub eve_condition: Option<f64>,
    pub cos_sq_kmin: Option<f64>,
    pub deviation: Option<f64>,
    pub rank: Option<usize>,
    pub min_singular_ratio: Option<f64>,
    pub flags: Vec<String>,
}

impl ResultRow {
    pub fn new(experiment: &str, delta_tau: f64, delta_theta: f64) -> Self {
        ResultRow { experiment: experiment.to_string(), delta_tau, delta_theta, ..Default::default() }
    }

    pub fn flag(&mut self, flag: impl Into<String>) {
        let flag = flag.into();
        if !self.flags.contains(&flag) {
            self.flags.push(flag);
        }
    }

    /// True when the row carries no finite bound at all.
    pub fn is_degenerate(&self) -> bool {
        let values = [self.rmse_bob, self.rmse_eve, self.deviation, self.min_singular_ratio];
        values.iter().flatten().all(|v| !v.is_finite()) && values.iter().any(|v| v.is_some())
    }

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
        let count = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_default();
        vec![
            SCHEMA_VERSION.to_string(),
            self.experiment.clone(),
            opt(self.snr_db),
            format_number(self.delta_tau),
            format_number(self.delta_theta),
            opt(self.rmse_bob),
            opt(self.rmse_eve),
            opt(self.mismatch),
            count(self.k_min),
            opt(self.bob_condition),
            opt(self.eve_condition),
            opt(self.cos_sq_kmin),
            opt(self.deviation),
            count(self.rank),
            opt(self.min_singular_ratio),
            self.flags.join(";"),
        ]
    }
}

/// Shortest representation that parses back to the same `f64`; `inf`,
/// `-inf` and `nan` for the non-finite values.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(COLUMNS)?;
    for row in rows {
        writer.write_record(row.record())?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_rows(std::io::BufWriter::new(file), rows)
}
