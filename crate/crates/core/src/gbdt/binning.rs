//! Feature quantization and histogram accumulation.
//!
//! Numeric features are quantized once per training run into
//! equal-frequency bins; categorical features use their dense ids directly.
//! Code 0 is the dedicated missing bin for every feature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Column, ColumnKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BinKind {
    /// Bin i (1-based) covers (boundaries[i-2], boundaries[i-1]], with the
    /// first bin open below and the last open above.
    Numeric { boundaries: Vec<f64> },
    Categorical { n_categories: u32 },
}

/// A feature column quantized to small integer codes.
#[derive(Debug, Clone)]
pub struct BinnedFeature {
    pub name: String,
    pub kind: BinKind,
    /// Per row: 0 = missing, otherwise 1..=n_bins.
    pub codes: Vec<u16>,
    pub n_bins: u16,
    /// Bin holding raw value 0.0, when any row is exactly zero.
    pub zero_code: Option<u16>,
    /// The zero bin contains no value other than 0.0; required for exact
    /// bundle decoding.
    pub zero_bin_pure: bool,
    pub has_missing: bool,
    /// Rows that are neither missing nor exactly zero; orders the bundling
    /// greedy.
    pub nonzero_count: usize,
}

impl BinnedFeature {
    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, BinKind::Categorical { .. })
    }
}

/// Quantizes one feature column. Numeric boundaries are equal-frequency
/// over the non-missing values; when there are no more distinct values
/// than `max_bins`, every distinct value gets its own bin.
pub fn bin_feature(column: &Column, max_bins: u16) -> Result<BinnedFeature> {
    if max_bins < 2 {
        return Err(Error::invalid("max_bins must be at least 2"));
    }
    match column.kind {
        ColumnKind::Categorical => bin_categorical(column),
        ColumnKind::Numeric => Ok(bin_numeric(column, max_bins)),
    }
}

fn bin_categorical(column: &Column) -> Result<BinnedFeature> {
    let mut max_id = 0u32;
    for v in column.values.iter().flatten() {
        if *v < 0.0 || v.fract() != 0.0 {
            return Err(Error::invalid(format!(
                "categorical column {} holds non-id value {}",
                column.name, v
            )));
        }
        max_id = max_id.max(*v as u32);
    }
    if max_id >= u16::MAX as u32 - 1 {
        return Err(Error::invalid(format!(
            "categorical column {} has too many categories ({})",
            column.name,
            max_id + 1
        )));
    }
    let mut has_missing = false;
    let mut nonzero_count = 0usize;
    let codes: Vec<u16> = column
        .values
        .iter()
        .map(|v| match v {
            Some(v) => {
                if *v != 0.0 {
                    nonzero_count += 1;
                }
                *v as u16 + 1
            }
            None => {
                has_missing = true;
                0
            }
        })
        .collect();
    let zero_code = if column.values.iter().any(|v| *v == Some(0.0)) {
        Some(1)
    } else {
        None
    };
    Ok(BinnedFeature {
        name: column.name.clone(),
        kind: BinKind::Categorical {
            n_categories: max_id + 1,
        },
        codes,
        n_bins: max_id as u16 + 1,
        zero_code,
        zero_bin_pure: true,
        has_missing,
        nonzero_count,
    })
}

fn bin_numeric(column: &Column, max_bins: u16) -> BinnedFeature {
    let mut present: Vec<f64> = column.values.iter().flatten().copied().collect();
    present.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    // Distinct values with multiplicities.
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in &present {
        match distinct.last_mut() {
            Some((d, c)) if d == v => *c += 1,
            _ => distinct.push((*v, 1)),
        }
    }

    let boundaries: Vec<f64> = if distinct.len() <= max_bins as usize {
        distinct
            .windows(2)
            .map(|w| midpoint(w[0].0, w[1].0))
            .collect()
    } else {
        // Equal-frequency cuts over distinct values: close a bin whenever
        // the cumulative count reaches the next ideal quantile position.
        let total = present.len();
        let n_bins = max_bins as usize;
        let mut cuts = Vec::with_capacity(n_bins - 1);
        let mut acc = 0usize;
        for (i, (_, count)) in distinct.iter().enumerate() {
            acc += count;
            if cuts.len() + 1 >= n_bins {
                break;
            }
            let ideal = (cuts.len() + 1) * total / n_bins;
            if acc >= ideal && i + 1 < distinct.len() {
                cuts.push(midpoint(distinct[i].0, distinct[i + 1].0));
            }
        }
        cuts
    };

    let n_bins = boundaries.len() as u16 + 1;
    let mut has_missing = false;
    let mut nonzero_count = 0usize;
    let codes: Vec<u16> = column
        .values
        .iter()
        .map(|v| match v {
            Some(v) => {
                if *v != 0.0 {
                    nonzero_count += 1;
                }
                numeric_code(&boundaries, *v)
            }
            None => {
                has_missing = true;
                0
            }
        })
        .collect();
    let zero_code = if column.values.iter().any(|v| *v == Some(0.0)) {
        Some(numeric_code(&boundaries, 0.0))
    } else {
        None
    };
    let zero_bin_pure = match zero_code {
        None => false,
        Some(z) => !column
            .values
            .iter()
            .flatten()
            .any(|&v| v != 0.0 && numeric_code(&boundaries, v) == z),
    };
    BinnedFeature {
        name: column.name.clone(),
        kind: BinKind::Numeric { boundaries },
        codes,
        n_bins,
        zero_code,
        zero_bin_pure,
        has_missing,
        nonzero_count,
    }
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // Guard against rounding collapsing the midpoint onto b, which would
    // shift b's bin.
    if m >= b {
        a
    } else {
        m
    }
}

/// 1-based bin code of a non-missing value: values <= boundaries[i] map to
/// bin i+1.
pub fn numeric_code(boundaries: &[f64], v: f64) -> u16 {
    boundaries.partition_point(|b| v > *b) as u16 + 1
}

/// One histogram slot: weighted gradient/hessian sums plus the raw row count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HistBin {
    pub grad: f64,
    pub hess: f64,
    pub count: u32,
}

impl HistBin {
    pub fn subtract(&self, other: &HistBin) -> HistBin {
        HistBin {
            grad: self.grad - other.grad,
            hess: self.hess - other.hess,
            count: self.count - other.count,
        }
    }
}

/// Accumulates the node histogram of one code column over `rows`, in row
/// order. Slot layout is the caller's (per-feature codes or a bundle's
/// merged codes).
pub fn accumulate_histogram(
    codes: &[u16],
    rows: &[u32],
    grad: &[f64],
    hess: &[f64],
    n_slots: usize,
) -> Vec<HistBin> {
    let mut hist = vec![HistBin::default(); n_slots];
    for &r in rows {
        let r = r as usize;
        let slot = &mut hist[codes[r] as usize];
        slot.grad += grad[r];
        slot.hess += hess[r];
        slot.count += 1;
    }
    hist
}

/// Convenience wrapper: quantize a column and accumulate its histogram
/// over all rows.
pub fn build_histograms(
    column: &Column,
    gradients: &[f64],
    hessians: &[f64],
    max_bins: u16,
) -> Result<(BinnedFeature, Vec<HistBin>)> {
    let binned = bin_feature(column, max_bins)?;
    let rows: Vec<u32> = (0..column.values.len() as u32).collect();
    let hist = accumulate_histogram(
        &binned.codes,
        &rows,
        gradients,
        hessians,
        binned.n_bins as usize + 1,
    );
    Ok((binned, hist))
}
