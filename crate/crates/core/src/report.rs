//! CSV tables written by the experiments and read back by the same schemas.
//! Comma separated, header row, LF line endings.

use std::io::{Read, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{FitOutcome, SweepCell, SweepResult};
use crate::error::Result;

pub(crate) fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// A CSV table with a fixed column order.
pub trait Table: Serialize + DeserializeOwned {
    const HEADER: &'static [&'static str];
}

pub fn write_table<T: Table, W: Write>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(writer);
    w.write_record(T::HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<T: Table, R: Read>(reader: R) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(T::HEADER.iter().copied()) {
        return Err(crate::error::Error::parse(
            &header.iter().collect::<Vec<_>>().join(","),
            format!("expected header {}", T::HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    #[serde(rename = "T")]
    pub t_ramp: f64,
    pub ramp: String,
    pub n: usize,
    pub plateau_residual: f64,
    pub plateau_index: Option<usize>,
    pub balance_residual: f64,
}

impl Table for SweepRow {
    const HEADER: &'static [&'static str] =
        &["eps", "T", "ramp", "n", "plateau_residual", "plateau_index", "balance_residual"];
}

impl From<&SweepCell> for SweepRow {
    fn from(c: &SweepCell) -> Self {
        SweepRow {
            eps: c.eps,
            t_ramp: c.t_ramp,
            ramp: c.ramp.clone(),
            n: c.n,
            plateau_residual: c.plateau_residual,
            plateau_index: c.plateau_index,
            balance_residual: c.balance_residual,
        }
    }
}

/// `model` is `algebraic`, `exponential` or `skipped`; a skipped row has
/// empty numeric fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub model: String,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub r2: Option<f64>,
}

impl Table for FitRow {
    const HEADER: &'static [&'static str] = &["model", "slope", "intercept", "r2"];
}

impl From<&FitOutcome> for FitRow {
    fn from(f: &FitOutcome) -> Self {
        match f {
            FitOutcome::Fitted(fit) => FitRow {
                model: fit.model.to_string(),
                slope: Some(fit.slope),
                intercept: Some(fit.intercept),
                r2: Some(fit.r_squared),
            },
            FitOutcome::Skipped(_) => FitRow {
                model: "skipped".into(),
                slope: None,
                intercept: None,
                r2: None,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub eps: f64,
    pub ramp: String,
    pub abs_error: f64,
    /// `n + 1` for `poly:n`; empty for the exponential ramp.
    pub predicted_order: Option<usize>,
}

impl Table for OracleRow {
    const HEADER: &'static [&'static str] = &["eps", "ramp", "abs_error", "predicted_order"];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BvpRow {
    pub eps: f64,
    #[serde(rename = "T")]
    pub t_ramp: f64,
    pub ramp: String,
    pub shoot_nudge_diff: f64,
    pub plateau_norm: f64,
}

impl Table for BvpRow {
    const HEADER: &'static [&'static str] = &["eps", "T", "ramp", "shoot_nudge_diff", "plateau_norm"];
}

pub fn sweep_rows(res: &SweepResult) -> Vec<SweepRow> {
    res.cells.iter().map(SweepRow::from).collect()
}

/// One row per ramp, in sweep order.
pub fn fit_rows(res: &SweepResult) -> Vec<FitRow> {
    res.fits.iter().map(|f| FitRow::from(&f.outcome)).collect()
}
