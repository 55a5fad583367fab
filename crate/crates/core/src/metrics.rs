//! Sensitivity, specificity, F1 and ROC AUC.
//!
//! Ratios with an empty denominator are reported as 0. Predictions are
//! binarized with `>=`, so a probability of exactly the threshold counts as
//! foreground.

use crate::field::{BinaryMask, ScalarField2D};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

impl std::ops::Add for Confusion {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
            fn_: self.fn_ + o.fn_,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Counts of one prediction against one mask, plus the derived rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub counts: Confusion,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub auc: f64,
}

impl MetricsReport {
    pub fn from_counts(counts: Confusion, auc: f64) -> Self {
        Self {
            counts,
            sensitivity: counts.sensitivity(),
            specificity: counts.specificity(),
            f1: counts.f1(),
            auc,
        }
    }
}

pub fn confusion(p: &ScalarField2D, gt: &BinaryMask, threshold: f64) -> Result<Confusion> {
    p.check_dims(gt)?;
    let mut c = Confusion::default();
    for (&pv, &g) in p.values().iter().zip(gt.values()) {
        match (pv >= threshold, g == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Twice the Mann-Whitney U statistic of the positives, from midranks.
///
/// Ranks are kept doubled so every midrank is an integer and the statistic
/// is exact.
fn doubled_u_statistic(scores: &[f64], labels: &[u8]) -> (u64, u64, u64) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut doubled_rank_sum: u64 = 0;
    let mut n_pos: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share the midrank (i + j + 2) / 2.
        let doubled_midrank = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            if labels[k] == 1 {
                doubled_rank_sum += doubled_midrank;
                n_pos += 1;
            }
        }
        i = j + 1;
    }
    let n_neg = scores.len() as u64 - n_pos;
    (doubled_rank_sum - n_pos * (n_pos + 1), n_pos, n_neg)
}

/// Area under the ROC curve via the rank-sum statistic with midranks for ties.
pub fn roc_auc(p: &ScalarField2D, gt: &BinaryMask) -> Result<f64> {
    p.check_dims(gt)?;
    let (u2, n_pos, n_neg) = doubled_u_statistic(p.values(), gt.values());
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateMask);
    }
    Ok(u2 as f64 / (2 * n_pos * n_neg) as f64)
}

/// Confusion counts at `threshold` plus AUC.
pub fn evaluate(p: &ScalarField2D, gt: &BinaryMask, threshold: f64) -> Result<MetricsReport> {
    let counts = confusion(p, gt, threshold)?;
    let auc = roc_auc(p, gt)?;
    Ok(MetricsReport::from_counts(counts, auc))
}

/// Macro and micro summaries of several per-image reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    /// Mean of the per-image rates; counts are pooled.
    pub macro_avg: MetricsReport,
    /// Rates recomputed from pooled counts. AUC is the per-image mean, since
    /// pooling it would need the raw scores.
    pub micro: MetricsReport,
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<Aggregate> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports to aggregate"));
    }
    let n = reports.len() as f64;
    let pooled = reports.iter().fold(Confusion::default(), |acc, r| acc + r.counts);
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let auc = mean(|r| r.auc);
    Ok(Aggregate {
        macro_avg: MetricsReport {
            counts: pooled,
            sensitivity: mean(|r| r.sensitivity),
            specificity: mean(|r| r.specificity),
            f1: mean(|r| r.f1),
            auc,
        },
        micro: MetricsReport::from_counts(pooled, auc),
    })
}

pub const METRICS_CSV_HEADER: &str = "method,loss,image_id,sens,spec,f1,auc";

pub fn metrics_csv_row(method: &str, loss: &str, image_id: &str, r: &MetricsReport) -> String {
    format!(
        "{method},{loss},{image_id},{:.6},{:.6},{:.6},{:.6}",
        r.sensitivity, r.specificity, r.f1, r.auc
    )
}
