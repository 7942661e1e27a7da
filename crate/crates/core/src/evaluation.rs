//! AUROC, confusion counts and mean ± stddev aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::ScoredRow;

/// Area under the ROC curve with half credit for tied scores, i.e. the
/// Mann–Whitney probability that a random anomaly outscores a random normal.
///
/// Computed by one sort and a sweep over tie groups; the pair count is kept
/// in integer half-units so the result equals the pairwise definition exactly.
pub fn auroc(scores: &[(f64, bool)]) -> Result<f64> {
    if scores.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::NonFinite { row: 0, feature: 0 });
    }
    let positives = scores.iter().filter(|(_, y)| *y).count() as u64;
    let negatives = scores.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // 2 × (pairs won by the anomaly + ½ × tied pairs)
    let mut twice_wins: u64 = 0;
    let mut negatives_below: u64 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_wins += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        i = j;
    }
    Ok(twice_wins as f64 / (2 * positives * negatives) as f64)
}

/// ROC curve points `(fpr, tpr)` from the strictest threshold to the loosest,
/// one point per distinct score.
pub fn roc_curve(scores: &[(f64, bool)]) -> Result<Vec<(f64, f64)>> {
    let positives = scores.iter().filter(|(_, y)| *y).count();
    let negatives = scores.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut sorted: Vec<(f64, bool)> = scores.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let current = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == current {
            if sorted[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub threshold: f64,
    /// Set when a rate's denominator was zero (rate reported as 0).
    pub undefined_rate: bool,
}

/// Confusion counts with `predicted = score >= threshold`.
pub fn confusion(scores: &[(f64, bool)], threshold: f64) -> Confusion {
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for &(s, y) in scores {
        match (s >= threshold, y) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let rate = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Confusion {
        tp,
        tn,
        fp,
        fn_,
        tpr: rate(tp, tp + fn_),
        fpr: rate(fp, fp + tn),
        threshold,
        undefined_rate: tp + fn_ == 0 || fp + tn == 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub auroc: f64,
    #[serde(flatten)]
    pub confusion: Confusion,
}

pub fn evaluate(rows: &[ScoredRow], threshold: f64) -> Result<EvaluationReport> {
    let pairs: Vec<(f64, bool)> = rows.iter().map(|r| (r.score, r.truth)).collect();
    Ok(EvaluationReport {
        auroc: auroc(&pairs)?,
        confusion: confusion(&pairs, threshold),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Arithmetic mean and sample (n − 1) standard deviation; 0 for one value.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("no values to aggregate"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Ok(Self { mean, std })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub auroc: MeanStd,
    pub tpr: MeanStd,
    pub fpr: MeanStd,
    pub tp: MeanStd,
    pub tn: MeanStd,
    pub fp: MeanStd,
    #[serde(rename = "fn")]
    pub fn_: MeanStd,
}

pub fn aggregate(reports: &[EvaluationReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::Empty("no reports to aggregate"));
    }
    let metric = |f: fn(&EvaluationReport) -> f64| {
        MeanStd::of(&reports.iter().map(f).collect::<Vec<_>>())
    };
    Ok(AggregateReport {
        runs: reports.len(),
        auroc: metric(|r| r.auroc)?,
        tpr: metric(|r| r.confusion.tpr)?,
        fpr: metric(|r| r.confusion.fpr)?,
        tp: metric(|r| r.confusion.tp as f64)?,
        tn: metric(|r| r.confusion.tn as f64)?,
        fp: metric(|r| r.confusion.fp as f64)?,
        fn_: metric(|r| r.confusion.fn_ as f64)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_counts(tp: usize, fn_: usize, fp: usize, tn: usize) -> Vec<(f64, bool)> {
        let mut v = Vec::new();
        v.extend(std::iter::repeat_n((1.0, true), tp));
        v.extend(std::iter::repeat_n((0.0, true), fn_));
        v.extend(std::iter::repeat_n((1.0, false), fp));
        v.extend(std::iter::repeat_n((0.0, false), tn));
        v
    }

    #[test]
    fn auroc_small_cases() {
        assert_eq!(auroc(&[(0.9, true), (0.8, true), (0.1, false)]).unwrap(), 1.0);
        assert_eq!(auroc(&[(0.5, true), (0.5, false)]).unwrap(), 0.5);
        assert_eq!(auroc(&[(0.1, true), (0.9, false)]).unwrap(), 0.0);
        assert!(matches!(auroc(&[(0.1, true)]), Err(Error::SingleClass)));
        assert!(auroc(&[(f64::NAN, true), (0.0, false)]).is_err());
    }

    #[test]
    fn trapezoid_area_matches_auroc() {
        let s = [(0.9, true), (0.7, false), (0.7, true), (0.4, false), (0.2, true), (0.1, false)];
        let pts = roc_curve(&s).unwrap();
        let area: f64 = pts
            .windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum();
        assert!((area - auroc(&s).unwrap()).abs() < 1e-12);
        assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
    }

    #[test]
    fn published_confusion_rates() {
        let c = confusion(&with_counts(276, 57, 87, 2902), 0.5);
        assert_eq!((c.tp, c.fn_, c.fp, c.tn), (276, 57, 87, 2902));
        assert!((c.tpr - 0.829).abs() < 1e-3);
        assert!((c.fpr - 0.029).abs() < 1e-3);

        let c = confusion(&with_counts(274, 59, 128, 2861), 0.5);
        assert!((c.tpr - 0.822).abs() < 1e-3);
        assert!((c.fpr - 0.043).abs() < 1e-3);
    }

    #[test]
    fn all_below_threshold() {
        let c = confusion(&[(1.0, true), (2.0, false), (3.0, true)], 10.0);
        assert_eq!((c.tp, c.fp, c.tpr, c.fpr), (0, 0, 0.0, 0.0));
        assert!(!c.undefined_rate);
        let c = confusion(&[(1.0, true)], 0.0);
        assert!(c.undefined_rate);
        assert_eq!(c.fpr, 0.0);
    }

    #[test]
    fn aggregation() {
        let m = MeanStd::of(&[0.94; 5]).unwrap();
        assert!((m.mean - 0.94).abs() < 1e-15);
        assert!(m.std < 1e-15);
        let m = MeanStd::of(&[0.93, 0.95]).unwrap();
        assert!((m.mean - 0.94).abs() < 1e-12);
        assert!((m.std - 0.0141421356).abs() < 1e-8);
        assert_eq!(MeanStd::of(&[0.7]).unwrap().std, 0.0);
        assert!(MeanStd::of(&[]).is_err());
        assert!(aggregate(&[]).is_err());
    }
}
