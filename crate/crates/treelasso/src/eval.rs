//! Support-recovery metrics (ROC / AUC, sensitivity, specificity),
//! prediction error, and replicate aggregation.
//!
//! The solver's smoothed duals never produce exact zeros, so support is read
//! off by thresholding coefficient magnitudes; the ROC sweeps that threshold
//! over all distinct values of `|b_hat|`. A lambda-sweep tracing mode exists
//! at the CLI level for comparison, built from the same point machinery.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::CoefficientMatrix;

/// Number of FPR grid points used when averaging curves across replicates.
pub const FPR_GRID_POINTS: usize = 101;

/// Scale-free default threshold for a single operating point.
pub fn default_support_tau(b_hat: &ArrayView2<f64>) -> f64 {
    1e-4 * b_hat.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// ROC curve traced by a magnitude-threshold sweep.
#[derive(Debug, Clone)]
pub struct RocCurve {
    /// (false positive rate, true positive rate), starting at (0,0) and
    /// ending at (1,1) with non-decreasing FPR.
    pub points: Vec<(f64, f64)>,
    /// Magnitude cutoff producing each point; +inf and -inf sentinels at the
    /// ends.
    pub thresholds: Vec<f64>,
}

/// Confusion counts and rates at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Entry true iff `|b[j,k]| > tau`.
pub fn support_from_coefficients(b: &ArrayView2<f64>, tau: f64) -> Result<Array2<bool>> {
    if tau < 0.0 || tau.is_nan() {
        return Err(Error::Input(format!("support threshold must be >= 0, got {tau}")));
    }
    Ok(b.mapv(|v| v.abs() > tau))
}

fn check_same_shape(a: &ArrayView2<f64>, b: &ArrayView2<f64>, what: &str) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.dim(),
            b.dim()
        )));
    }
    Ok(())
}

/// Confusion counts of the estimated support `|b_hat| > tau` against the
/// exact support of `b_true`.
pub fn support_metrics(
    b_hat: &ArrayView2<f64>,
    b_true: &ArrayView2<f64>,
    tau: f64,
) -> Result<SupportMetrics> {
    check_same_shape(b_hat, b_true, "support_metrics")?;
    let est = support_from_coefficients(b_hat, tau)?;
    let (mut tp, mut fp, mut tn, mut fnn) = (0usize, 0, 0, 0);
    for (e, t) in est.iter().zip(b_true.iter()) {
        match (*e, *t != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fnn += 1,
        }
    }
    let rate = |num: usize, den: usize| if den == 0 { f64::NAN } else { num as f64 / den as f64 };
    Ok(SupportMetrics {
        sensitivity: rate(tp, tp + fnn),
        specificity: rate(tn, tn + fp),
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fnn,
    })
}

/// Sweeps a magnitude threshold over the distinct values of `|b_hat|`,
/// one (FPR, TPR) point per cutoff, from (0,0) down to (1,1).
pub fn roc_by_threshold(b_hat: &ArrayView2<f64>, b_true: &ArrayView2<f64>) -> Result<RocCurve> {
    check_same_shape(b_hat, b_true, "roc_by_threshold")?;
    let positives = b_true.iter().filter(|&&v| v != 0.0).count();
    let negatives = b_true.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Input(
            "true coefficients must contain both zero and nonzero entries; \
             TPR or FPR would be undefined"
                .into(),
        ));
    }

    // Pair each entry's magnitude with its truth label, sorted descending,
    // so lowering the cutoff admits entries one magnitude class at a time.
    let mut scored: Vec<(f64, bool)> = b_hat
        .iter()
        .zip(b_true.iter())
        .map(|(&h, &t)| (h.abs(), t != 0.0))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let cut = scored[i].0;
        while i < scored.len() && scored[i].0 == cut {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // The point where the sweep threshold sits just below `cut`.
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(cut);
    }
    if *points.last().unwrap() != (1.0, 1.0) {
        // Only reachable when the smallest magnitude class was not yet
        // admitted (cannot happen above) — kept as a guard.
        points.push((1.0, 1.0));
        thresholds.push(f64::NEG_INFINITY);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Mean squared error over all entries.
pub fn test_mse(y_pred: &ArrayView2<f64>, y_test: &ArrayView2<f64>) -> Result<f64> {
    check_same_shape(y_pred, y_test, "test_mse")?;
    let n = y_pred.len();
    if n == 0 {
        return Err(Error::Input("empty prediction matrices".into()));
    }
    let sse: f64 = y_pred
        .iter()
        .zip(y_test.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sse / n as f64)
}

/// TPR of `curve` at a given FPR: linear interpolation between the curve's
/// points, taking the upper envelope at vertical segments.
fn tpr_at(curve: &RocCurve, fpr: f64) -> f64 {
    let pts = &curve.points;
    // Largest TPR among points with matching FPR, else interpolate.
    let mut best: Option<f64> = None;
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if fpr >= x0 && fpr <= x1 {
            let y = if x1 == x0 {
                y0.max(y1)
            } else {
                y0 + (y1 - y0) * (fpr - x0) / (x1 - x0)
            };
            best = Some(best.map_or(y, |b: f64| b.max(y)));
        }
    }
    best.unwrap_or(1.0)
}

/// Mean curve over replicates: vertical averaging of TPR on a fixed grid of
/// [`FPR_GRID_POINTS`] FPR values. The returned thresholds are empty (they
/// have no common meaning across replicates).
pub fn aggregate_curves(curves: &[RocCurve]) -> Result<RocCurve> {
    if curves.is_empty() {
        return Err(Error::Input("no replicate curves to aggregate".into()));
    }
    let points = (0..FPR_GRID_POINTS)
        .map(|i| {
            let fpr = i as f64 / (FPR_GRID_POINTS - 1) as f64;
            let mean = curves.iter().map(|c| tpr_at(c, fpr)).sum::<f64>() / curves.len() as f64;
            (fpr, mean)
        })
        .collect();
    Ok(RocCurve { points, thresholds: vec![] })
}

/// Mean and standard error of a scalar metric over replicates.
pub fn aggregate_scalars(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::Input("no replicate values to aggregate".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Convenience: AUC of the threshold-sweep ROC of `b_hat` against `b_true`.
pub fn support_auc(b_hat: &CoefficientMatrix, b_true: &CoefficientMatrix) -> Result<f64> {
    Ok(auc(&roc_by_threshold(&b_hat.view(), &b_true.view())?))
}
