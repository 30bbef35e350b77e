//! Per-entity baselines, threshold alarms, Gaussian naive Bayes and ROC
//! evaluation.
//!
//! The anomaly indicator of a window is the distance between its reduced
//! feature and the sample mean of the entity's recent history. An alarm is
//! raised when the indicator exceeds a multiple of the history's deviation
//! scale.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::Serialize;

use crate::format::{self, parse_f64};
use crate::reduction::ReducedFeature;
use crate::similarity::euclidean;
use crate::{Error, Result};

pub const DEFAULT_CAPACITY: usize = 8;
pub const DEFAULT_MIN_HISTORY: usize = 4;
pub const DEFAULT_MULTIPLIER: f64 = 3.0;
/// Leading deviation components appended to the indicator for the classifier.
pub const CLASSIFIER_COMPONENTS: usize = 8;
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// How the spread of the retained history is summarized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeviationScale {
    /// Root-mean-square distance of history samples from their mean, i.e.
    /// the square root of the total variance of the feature vectors.
    #[default]
    RootMeanSquare,
    /// Population standard deviation of the scalar distances from the mean.
    NormSpread,
}

impl std::str::FromStr for DeviationScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rms" => Ok(DeviationScale::RootMeanSquare),
            "norm-spread" => Ok(DeviationScale::NormSpread),
            other => Err(Error::invalid(format!("unknown deviation scale {other:?}"))),
        }
    }
}

/// Sliding-window history of one entity's reduced features.
#[derive(Debug, Clone, PartialEq)]
pub struct Baseline {
    entity: String,
    capacity: usize,
    scale: DeviationScale,
    history: VecDeque<Vec<f64>>,
    mean: Vec<f64>,
    dev_sigma: f64,
}

impl Baseline {
    pub fn new(entity: impl Into<String>, capacity: usize, scale: DeviationScale) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::invalid("baseline capacity must be positive"));
        }
        Ok(Baseline {
            entity: entity.into(),
            capacity,
            scale,
            history: VecDeque::with_capacity(capacity),
            mean: Vec::new(),
            dev_sigma: 0.0,
        })
    }

    pub fn entity(&self) -> &str {
        &self.entity
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn dev_sigma(&self) -> f64 {
        self.dev_sigma
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Appends a sample, evicting the oldest beyond capacity, and recomputes
    /// the mean and deviation scale over what is retained.
    pub fn absorb(&mut self, coords: &[f64]) -> Result<()> {
        if let Some(first) = self.history.front() {
            if first.len() != coords.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    found: coords.len(),
                });
            }
        }
        if self.history.len() == self.capacity {
            self.history.pop_front();
        }
        self.history.push_back(coords.to_vec());

        let n = self.history.len() as f64;
        let mut mean = vec![0.0; coords.len()];
        for h in &self.history {
            for (m, x) in mean.iter_mut().zip(h) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let dists: Vec<f64> = self
            .history
            .iter()
            .map(|h| euclidean(h, &mean).expect("uniform dimensions"))
            .collect();
        self.dev_sigma = match self.scale {
            DeviationScale::RootMeanSquare => (dists.iter().map(|d| d * d).sum::<f64>() / n).sqrt(),
            DeviationScale::NormSpread => {
                let avg = dists.iter().sum::<f64>() / n;
                (dists.iter().map(|d| (d - avg) * (d - avg)).sum::<f64>() / n).sqrt()
            }
        };
        self.mean = mean;
        Ok(())
    }
}

/// Returns `b` with `sample` absorbed.
pub fn update_baseline(b: &Baseline, sample: &ReducedFeature) -> Result<Baseline> {
    let mut next = b.clone();
    next.absorb(&sample.coords)?;
    Ok(next)
}

/// Distance of `current` from the baseline mean.
pub fn indicator(current: &ReducedFeature, b: &Baseline) -> Result<f64> {
    if b.history.is_empty() {
        return Err(Error::EmptyBaseline);
    }
    euclidean(&b.mean, &current.coords)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlarmSource {
    Threshold,
    Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alarm {
    pub entity: String,
    pub window_start: i64,
    pub indicator: f64,
    pub threshold: f64,
    pub source: AlarmSource,
}

/// Alarm policy for [`threshold_detect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorConfig {
    pub multiplier: f64,
    pub min_history: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            multiplier: DEFAULT_MULTIPLIER,
            min_history: DEFAULT_MIN_HISTORY,
        }
    }
}

/// Raises an alarm when the baseline holds at least `min_history` samples,
/// its deviation scale is positive, and the indicator exceeds
/// `multiplier · dev_sigma`.
pub fn threshold_detect(
    current: &ReducedFeature,
    window_start: i64,
    b: &Baseline,
    config: &DetectorConfig,
) -> Result<Option<Alarm>> {
    if b.history_len() < config.min_history.max(1) || b.dev_sigma <= 0.0 {
        return Ok(None);
    }
    let value = indicator(current, b)?;
    let threshold = config.multiplier * b.dev_sigma;
    Ok((value > threshold).then(|| Alarm {
        entity: current.entity.clone(),
        window_start,
        indicator: value,
        threshold,
        source: AlarmSource::Threshold,
    }))
}

/// Classifier input: the indicator followed by the leading components of
/// `current − mean`, zero-padded to [`CLASSIFIER_COMPONENTS`].
pub fn classifier_features(current: &ReducedFeature, b: &Baseline) -> Result<Vec<f64>> {
    let value = indicator(current, b)?;
    let mut out = Vec::with_capacity(1 + CLASSIFIER_COMPONENTS);
    out.push(value);
    out.extend(
        (0..CLASSIFIER_COMPONENTS).map(|i| current.coords.get(i).map_or(0.0, |c| c - b.mean[i])),
    );
    Ok(out)
}

/// Gaussian naive Bayes over two classes (index 0 normal, 1 anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct NbModel {
    pub priors: [f64; 2],
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
}

/// Fits class priors and per-dimension Gaussians (maximum-likelihood
/// variance, floored at [`VARIANCE_FLOOR`]).
pub fn train_nb(examples: &[(Vec<f64>, bool)]) -> Result<NbModel> {
    let dim = examples.first().map_or(0, |e| e.0.len());
    let mut counts = [0usize; 2];
    let mut sums = [vec![0.0; dim], vec![0.0; dim]];
    for (x, label) in examples {
        if x.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        let c = *label as usize;
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(x) {
            *s += v;
        }
    }
    if counts.contains(&0) {
        return Err(Error::SingleClass);
    }
    let means = [0, 1].map(|c| {
        sums[c]
            .iter()
            .map(|s| s / counts[c] as f64)
            .collect::<Vec<_>>()
    });
    let mut sq = [vec![0.0; dim], vec![0.0; dim]];
    for (x, label) in examples {
        let c = *label as usize;
        for ((s, v), m) in sq[c].iter_mut().zip(x).zip(&means[c]) {
            *s += (v - m) * (v - m);
        }
    }
    let variances = [0, 1].map(|c| {
        sq[c]
            .iter()
            .map(|s| (s / counts[c] as f64).max(VARIANCE_FLOOR))
            .collect::<Vec<_>>()
    });
    let total = examples.len() as f64;
    Ok(NbModel {
        priors: [counts[0] as f64 / total, counts[1] as f64 / total],
        means,
        variances,
    })
}

impl NbModel {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Unnormalized log posterior of each class.
    pub fn log_scores(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok([0, 1].map(|c| {
            let mut s = self.priors[c].ln();
            for ((v, m), var) in x.iter().zip(&self.means[c]).zip(&self.variances[c]) {
                s += -0.5 * (2.0 * PI * var).ln() - (v - m) * (v - m) / (2.0 * var);
            }
            s
        }))
    }

    /// `prior,<class>,<p>` lines, then `<class>,<dim>,<mean>,<variance>`.
    pub fn to_csv(&self) -> String {
        let names = ["normal", "anomalous"];
        let mut out = String::new();
        for (name, prior) in names.iter().zip(self.priors) {
            out.push_str(&format!("prior,{name},{}\n", format::float(prior)));
        }
        for (c, name) in names.iter().enumerate() {
            for d in 0..self.dim() {
                out.push_str(&format!(
                    "{name},{d},{},{}\n",
                    format::float(self.means[c][d]),
                    format::float(self.variances[c][d])
                ));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let class = |s: &str, line| match s.trim() {
            "normal" => Ok(0usize),
            "anomalous" => Ok(1),
            other => Err(Error::parse(line, format!("unknown class {other:?}"))),
        };
        let mut priors = [f64::NAN; 2];
        let mut rows: [Vec<(usize, f64, f64)>; 2] = [Vec::new(), Vec::new()];
        for (line, content) in format::lines(text) {
            let fields: Vec<&str> = content.split(',').collect();
            match fields.as_slice() {
                ["prior", c, p] => priors[class(c, line)?] = parse_f64(p, line)?,
                [c, d, m, v] => {
                    let dim = format::parse_i64(d, line)? as usize;
                    rows[class(c, line)?].push((dim, parse_f64(m, line)?, parse_f64(v, line)?));
                }
                _ => return Err(Error::parse(line, "unrecognized model row")),
            }
        }
        if priors.iter().any(|p| !p.is_finite()) {
            return Err(Error::parse(1, "missing class priors"));
        }
        let mut means = [Vec::new(), Vec::new()];
        let mut variances = [Vec::new(), Vec::new()];
        for c in 0..2 {
            rows[c].sort_by_key(|r| r.0);
            if rows[c].iter().enumerate().any(|(i, r)| r.0 != i) {
                return Err(Error::parse(
                    1,
                    "model dimensions must be contiguous from 0",
                ));
            }
            means[c] = rows[c].iter().map(|r| r.1).collect();
            variances[c] = rows[c].iter().map(|r| r.2.max(VARIANCE_FLOOR)).collect();
        }
        if means[0].len() != means[1].len() {
            return Err(Error::parse(1, "classes have different dimensions"));
        }
        Ok(NbModel {
            priors,
            means,
            variances,
        })
    }
}

/// Maximum a posteriori label (`true` = anomalous) and the anomalous-class
/// posterior. Exact ties resolve to normal.
pub fn classify_nb(model: &NbModel, x: &[f64]) -> Result<(bool, f64)> {
    let [n, a] = model.log_scores(x)?;
    let top = n.max(a);
    let (en, ea) = ((n - top).exp(), (a - top).exp());
    Ok((a > n, ea / (en + ea)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// One point per distinct threshold, from `+∞` down to `-∞`, where a score
/// at or above the threshold counts as a positive prediction.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite);
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            tpr: tp as f64 / pos as f64,
            fpr: fp as f64 / neg as f64,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        tpr: 1.0,
        fpr: 1.0,
    });
    Ok(points)
}

/// Trapezoidal area under a threshold-sorted ROC curve.
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn roc_to_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            format::float(p.threshold),
            format::float(p.fpr),
            format::float(p.tpr)
        ));
    }
    out
}

/// Reads `score,label` rows; labels are `1`/`0` or `true`/`false`. A
/// non-numeric first line is treated as a header.
pub fn scores_from_csv(text: &str) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (idx, (line, content)) in format::lines(text).enumerate() {
        let (s, l) = content
            .split_once(',')
            .ok_or_else(|| Error::parse(line, "expected score,label"))?;
        if idx == 0 && s.trim().parse::<f64>().is_err() {
            continue;
        }
        scores.push(parse_f64(s, line)?);
        labels.push(match l.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::parse(line, format!("invalid label {other:?}"))),
        });
    }
    Ok((scores, labels))
}
