//! Pearson correlation, feature ranking, outlier screening, and the
//! missing-value policy.
//!
//! The coefficient is evaluated in a numerically stable two-pass form:
//! means first, then centered sums. A zero standard deviation on either
//! side yields the explicit `Undefined` variant with a warning, never a
//! NaN and never a panic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faults::{self, FaultId};
use crate::series::FeatureTable;

/// The coefficient itself: `Undefined` when either standard deviation is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CorrelationValue {
    Defined(f64),
    Undefined,
}

impl CorrelationValue {
    pub fn defined(self) -> Option<f64> {
        match self {
            CorrelationValue::Defined(r) => Some(r),
            CorrelationValue::Undefined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: CorrelationValue,
    /// Pairs that survived missing/outlier filtering.
    pub n_used: usize,
    /// Indices (into the filtered pair list) removed by the outlier screen.
    pub outliers_removed: Vec<usize>,
    /// Pairs dropped because either side was missing.
    pub dropped_missing: usize,
    pub warnings: Vec<String>,
}

/// `Raw` computes straight over the present pairs; `Screened` additionally
/// removes outlier pairs first. Missing cells are dropped pairwise under
/// both policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Policy {
    Raw,
    Screened,
}

/// Pairwise deletion: a pair survives only when both sides are present.
pub fn drop_missing_pairs(x: &[Option<f64>], y: &[Option<f64>]) -> (Vec<(f64, f64)>, usize) {
    let mut pairs = Vec::with_capacity(x.len());
    let mut dropped = 0;
    for (&xv, &yv) in x.iter().zip(y) {
        if faults::on(FaultId::CorrMissingAsZero) {
            pairs.push((xv.unwrap_or(0.0), yv.unwrap_or(0.0)));
            continue;
        }
        if faults::on(FaultId::CorrMissingChecksXOnly) {
            match xv {
                Some(xv) => pairs.push((xv, yv.unwrap_or(f64::NAN))),
                None => dropped += 1,
            }
            continue;
        }
        match (xv, yv) {
            (Some(xv), Some(yv)) => pairs.push((xv, yv)),
            _ => dropped += 1,
        }
    }
    (pairs, dropped)
}

/// Removes pairs where either coordinate falls outside its column's
/// `[Q1 - 3 IQR, Q3 + 3 IQR]` fences. With fewer than 4 pairs the quartiles
/// are meaningless and nothing is removed. Returns survivors plus the
/// removed indices.
pub fn remove_outlier_pairs(pairs: &[(f64, f64)]) -> (Vec<(f64, f64)>, Vec<usize>) {
    if pairs.len() < 4 {
        return (pairs.to_vec(), Vec::new());
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (x_lo, x_hi) = fences(&xs);
    let (y_lo, y_hi) = fences(&ys);
    let mut kept = Vec::with_capacity(pairs.len());
    let mut removed = Vec::new();
    for (i, &(x, y)) in pairs.iter().enumerate() {
        if x < x_lo || x > x_hi || y < y_lo || y > y_hi {
            removed.push(i);
        } else {
            kept.push((x, y));
        }
    }
    (kept, removed)
}

fn fences(values: &[f64]) -> (f64, f64) {
    let q1 = percentile(values, 25.0);
    let q3 = percentile(values, 75.0);
    let iqr = q3 - q1;
    (q1 - 3.0 * iqr, q3 + 3.0 * iqr)
}

/// Linear-interpolation percentile over a copy of the data.
fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lower = rank.floor() as usize;
    let upper = rank.ceil() as usize;
    if lower == upper {
        sorted[lower]
    } else {
        let w = rank - lower as f64;
        sorted[lower] * (1.0 - w) + sorted[upper] * w
    }
}

/// Pearson correlation over optionally-missing inputs.
pub fn pearson(x: &[Option<f64>], y: &[Option<f64>], policy: Policy) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewPairs { n: x.len() });
    }

    let mut warnings = Vec::new();
    let (mut pairs, dropped_missing) = drop_missing_pairs(x, y);
    if dropped_missing > 0 {
        warnings.push(format!("dropped {dropped_missing} pairs with missing cells"));
    }

    let mut outliers_removed = Vec::new();
    let screen = policy == Policy::Screened && !faults::on(FaultId::CorrScreenSkipped);
    if screen {
        let (kept, removed) = remove_outlier_pairs(&pairs);
        if !removed.is_empty() {
            warnings.push(format!("removed {} outlier pairs at indices {removed:?}", removed.len()));
        }
        pairs = kept;
        outliers_removed = removed;
    }

    if pairs.len() < 2 {
        return Err(Error::TooFewPairs { n: pairs.len() });
    }

    let n = pairs.len() as f64;
    let (mut mean_x, mut mean_y) = (0.0, 0.0);
    for &(xv, yv) in &pairs {
        mean_x += xv;
        mean_y += yv;
    }
    if !faults::on(FaultId::CorrMeanSkipsDivide) {
        mean_x /= n;
        mean_y /= n;
    }

    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(xv, yv) in &pairs {
        let dx = xv - mean_x;
        let dy = yv - mean_y;
        if faults::on(FaultId::CorrNumeratorUncentered) {
            sxy += xv * yv;
        } else {
            sxy += dx * dy;
        }
        sxx += dx * dx;
        syy += dy * dy;
    }
    if faults::on(FaultId::CorrNumeratorNegated) {
        sxy = -sxy;
    }

    if sxx == 0.0 || syy == 0.0 {
        if faults::on(FaultId::CorrUndefinedAsNan) {
            return Ok(CorrelationResult {
                r: CorrelationValue::Defined(f64::NAN),
                n_used: pairs.len(),
                outliers_removed,
                dropped_missing,
                warnings,
            });
        }
        warnings.push("correlation undefined: a standard deviation is zero".into());
        return Ok(CorrelationResult {
            r: CorrelationValue::Undefined,
            n_used: pairs.len(),
            outliers_removed,
            dropped_missing,
            warnings,
        });
    }

    let denom = if faults::on(FaultId::CorrMissingSqrt) {
        sxx * syy
    } else {
        sxx.sqrt() * syy.sqrt()
    };
    let mut r = sxy / denom;
    if !faults::on(FaultId::CorrClampSkipped) {
        // Two-pass arithmetic can land a hair outside [-1, 1].
        r = r.clamp(-1.0, 1.0);
    }
    Ok(CorrelationResult {
        r: CorrelationValue::Defined(r),
        n_used: pairs.len(),
        outliers_removed,
        dropped_missing,
        warnings,
    })
}

/// Pearson over dense slices.
pub fn pearson_values(x: &[f64], y: &[f64], policy: Policy) -> Result<CorrelationResult> {
    let xo: Vec<Option<f64>> = x.iter().copied().map(Some).collect();
    let yo: Vec<Option<f64>> = y.iter().copied().map(Some).collect();
    pearson(&xo, &yo, policy)
}

/// Features ordered by predictive strength against the target: descending
/// |r| with ties broken by ascending name. Features whose coefficient is
/// undefined are listed separately with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub ranked: Vec<(String, f64)>,
    pub undefined: Vec<(String, String)>,
}

/// Scores every non-target column with `|pearson(column, target, Screened)|`.
pub fn rank_features(table: &FeatureTable, target: &str) -> Result<FeatureRanking> {
    let target_col = table.column(target)?;
    let target_dense: Vec<f64> = target_col.values.iter().flatten().copied().collect();
    if target_dense.len() >= 2 {
        let first = target_dense[0];
        if target_dense.iter().all(|v| *v == first) {
            return Err(Error::TargetConstant { name: target.into() });
        }
    }

    let mut ranked = Vec::new();
    let mut undefined = Vec::new();
    for col in table.columns() {
        if col.name == target {
            continue;
        }
        match pearson(&col.values, &target_col.values, Policy::Screened) {
            Ok(res) => match res.r {
                CorrelationValue::Defined(r) => {
                    let score = if faults::on(FaultId::RankBySignedR) { r } else { r.abs() };
                    ranked.push((col.name.clone(), score));
                }
                CorrelationValue::Undefined => {
                    undefined.push((col.name.clone(), res.warnings.join("; ")));
                }
            },
            Err(e) => undefined.push((col.name.clone(), e.to_string())),
        }
    }
    ranked.sort_by(|(na, sa), (nb, sb)| {
        let ord = sb.partial_cmp(sa).expect("scores are finite");
        let ord = if faults::on(FaultId::RankAscending) { ord.reverse() } else { ord };
        ord.then_with(|| na.cmp(nb))
    });
    Ok(FeatureRanking { ranked, undefined })
}
