//! Binary classification metrics with Tampered as the positive class.
//!
//! A row is predicted positive when `p_tampered >= threshold`. Ratios with a
//! zero denominator are reported as 0.

use std::fmt::Write as _;
use std::path::Path;

use crate::classifier::bce_loss;
use crate::dataset::Label;
use crate::io::write_text_atomic;
use crate::{Error, Result};

/// Tolerance on `p_authentic + p_tampered = 1`.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub path: String,
    pub label: Label,
    pub p_authentic: f64,
    pub p_tampered: f64,
}

/// Per-image class probabilities with ground truth. Never empty.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    rows: Vec<PredictionRow>,
}

impl PredictionSet {
    pub fn new(rows: Vec<PredictionRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyPredictionSet);
        }
        for r in &rows {
            let ok = r.p_authentic >= 0.0
                && r.p_tampered >= 0.0
                && (r.p_authentic + r.p_tampered - 1.0).abs() <= PROBABILITY_SUM_TOLERANCE;
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "{}: probabilities ({}, {}) are not a distribution",
                    r.path, r.p_authentic, r.p_tampered
                )));
            }
        }
        Ok(Self { rows })
    }

    /// Convenience constructor from `(label, p_tampered)` pairs.
    pub fn from_scores(items: &[(Label, f64)]) -> Result<Self> {
        Self::new(
            items
                .iter()
                .enumerate()
                .map(|(i, &(label, p))| PredictionRow {
                    path: format!("row{i}"),
                    label,
                    p_authentic: 1.0 - p,
                    p_tampered: p,
                })
                .collect(),
        )
    }

    pub fn rows(&self) -> &[PredictionRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["path", "label", "p_authentic", "p_tampered"])?;
        for r in &self.rows {
            wtr.write_record([
                r.path.as_str(),
                &(r.label as u8).to_string(),
                &r.p_authentic.to_string(),
                &r.p_tampered.to_string(),
            ])?;
        }
        let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text_atomic(path, &self.to_csv()?)
    }

    /// Parses `path,label,p_authentic,p_tampered`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |message: String| Error::Format {
            kind: "predictions CSV",
            message,
        };
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["path", "label", "p_authentic", "p_tampered"] {
            return Err(bad(format!("unexpected header {headers:?}")));
        }
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| bad(format!("row {}: column {i}: {e}", line + 1)))
            };
            let label = rec[1]
                .trim()
                .parse::<u8>()
                .ok()
                .and_then(Label::from_index)
                .ok_or_else(|| bad(format!("row {}: label {:?} is not 0 or 1", line + 1, &rec[1])))?;
            rows.push(PredictionRow {
                path: rec[0].to_string(),
                label,
                p_authentic: num(2)?,
                p_tampered: num(3)?,
            });
        }
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

pub fn confusion(preds: &PredictionSet, threshold: f64) -> Result<ConfusionCounts> {
    if preds.is_empty() {
        return Err(Error::EmptyPredictionSet);
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut cc = ConfusionCounts::default();
    for r in preds.rows() {
        match (r.p_tampered >= threshold, r.label) {
            (true, Label::Tampered) => cc.tp += 1,
            (true, Label::Authentic) => cc.fp += 1,
            (false, Label::Authentic) => cc.tn += 1,
            (false, Label::Tampered) => cc.fn_ += 1,
        }
    }
    Ok(cc)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `tp / (tp + fp)`.
pub fn precision(cc: &ConfusionCounts) -> f64 {
    ratio(cc.tp, cc.tp + cc.fp)
}

/// `tp / (tp + fn)`.
pub fn recall(cc: &ConfusionCounts) -> f64 {
    ratio(cc.tp, cc.tp + cc.fn_)
}

pub fn accuracy(cc: &ConfusionCounts) -> f64 {
    ratio(cc.tp + cc.tn, cc.total())
}

/// `(1 + β²)·p·r / (β²·p + r)`, or 0 when the denominator vanishes.
pub fn f_measure(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * precision + recall;
    if den == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / den
    }
}

/// ROC points from `(0, 0)` to `(1, 1)` with the score threshold that
/// produces each point. The first threshold is `+∞` (nothing predicted
/// positive).
#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

impl RocCurve {
    /// `threshold,fpr,tpr` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fpr,tpr\n");
        for (&t, &(fpr, tpr)) in self.thresholds.iter().zip(&self.points) {
            let _ = writeln!(s, "{t},{fpr},{tpr}");
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text_atomic(path, &self.to_csv())
    }
}

/// Staircase ROC: scores are swept from high to low, and rows sharing a score
/// enter together, which yields a diagonal segment for tied groups.
pub fn roc_curve(preds: &PredictionSet) -> Result<RocCurve> {
    let positives = preds.rows().iter().filter(|r| r.label == Label::Tampered).count();
    let negatives = preds.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClassOnly);
    }
    let mut scored: Vec<(f64, Label)> = preds.rows().iter().map(|r| (r.p_tampered, r.label)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let score = scored[i].0;
        while i < scored.len() && scored[i].0 == score {
            match scored[i].1 {
                Label::Tampered => tp += 1,
                Label::Authentic => fp += 1,
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(score);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub threshold: f64,
    pub beta: f64,
    pub counts: ConfusionCounts,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub auc: f64,
    pub mean_bce: f64,
}

pub fn evaluate(preds: &PredictionSet, threshold: f64, beta: f64) -> Result<MetricsReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidArgument(format!("beta {beta} must be positive")));
    }
    let counts = confusion(preds, threshold)?;
    let (p, r) = (precision(&counts), recall(&counts));
    let probs: Vec<[f64; 2]> = preds.rows().iter().map(|r| [r.p_authentic, r.p_tampered]).collect();
    let labels: Vec<[f64; 2]> = preds.rows().iter().map(|r| r.label.one_hot()).collect();
    Ok(MetricsReport {
        threshold,
        beta,
        counts,
        accuracy: accuracy(&counts),
        precision: p,
        recall: r,
        f_measure: f_measure(p, r, beta),
        auc: auc(&roc_curve(preds)?),
        mean_bce: bce_loss(&probs, &labels)?,
    })
}

impl MetricsReport {
    fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("recall", self.recall),
            ("f_measure", self.f_measure),
            ("auc", self.auc),
            ("mean_bce", self.mean_bce),
        ]
    }

    /// Human-readable `key=value` lines; rates are shown to four decimals.
    pub fn to_text(&self) -> String {
        let c = &self.counts;
        let mut s = format!(
            "threshold={}\nbeta={}\nn={}\ntp={}\nfp={}\ntn={}\nfn={}\n",
            self.threshold,
            self.beta,
            c.total(),
            c.tp,
            c.fp,
            c.tn,
            c.fn_
        );
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k}={v:.4}");
        }
        s
    }

    /// `metric,value` rows at full precision.
    pub fn to_csv(&self) -> String {
        let c = &self.counts;
        let mut s = String::from("metric,value\n");
        let _ = writeln!(s, "threshold,{}", self.threshold);
        let _ = writeln!(s, "beta,{}", self.beta);
        for (k, v) in [("tp", c.tp), ("fp", c.fp), ("tn", c.tn), ("fn", c.fn_)] {
            let _ = writeln!(s, "{k},{v}");
        }
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }
}
