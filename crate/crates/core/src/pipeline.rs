//! Multi-stage helpers shared by the command-line tool and the tests.

use crate::anomaly::{
    classifier_features, classify_nb, threshold_detect, Alarm, AlarmSource, Baseline,
    DetectorConfig, DeviationScale, NbModel,
};
use crate::ingest::EvolutionWindow;
use crate::reduction::{choose_k, project, svd, Basis, FeatureMatrix, ReducedFeature, Svd};
use crate::similarity::{pdist, SimilarityMatrix};
use crate::spectrum::{fingerprint_with, FeatureVector, FftPlan};
use crate::{Error, Result};

/// Fingerprints windows of a common length with one shared FFT plan.
pub fn fingerprint_windows(windows: &[EvolutionWindow]) -> Result<Vec<FeatureVector>> {
    let Some(first) = windows.first() else {
        return Ok(Vec::new());
    };
    let plan = FftPlan::new(first.len())?;
    windows.iter().map(|w| fingerprint_with(&plan, w)).collect()
}

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ComponentCount {
    Fixed(usize),
    /// Smallest count reaching this energy fraction.
    Energy(f64),
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub features: FeatureMatrix,
    pub svd: Svd,
    pub basis: Basis,
    /// Count asked for before clamping to the matrix rank.
    pub requested_k: usize,
    pub reduced: Vec<ReducedFeature>,
    pub similarity: SimilarityMatrix,
}

/// SVD, projection and pairwise distances over a set of fingerprints.
pub fn analyze(features: &[FeatureVector], count: ComponentCount) -> Result<Analysis> {
    let matrix = FeatureMatrix::from_features(features)?;
    let decomposition = svd(&matrix.data)?;
    let requested_k = match count {
        ComponentCount::Fixed(k) => k,
        ComponentCount::Energy(target) => {
            if !(target > 0.0 && target <= 1.0) {
                return Err(Error::invalid(format!(
                    "energy target {target} outside (0, 1]"
                )));
            }
            choose_k(&decomposition.singular_values, target)
        }
    };
    let basis = Basis::from_svd(&decomposition, requested_k);
    let reduced = project(&matrix, &basis)?;
    let similarity = pdist(&reduced)?;
    Ok(Analysis {
        features: matrix,
        svd: decomposition,
        basis,
        requested_k,
        reduced,
        similarity,
    })
}

/// Settings for replaying one entity's history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub scale: DeviationScale,
    pub detector: DetectorConfig,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            capacity: crate::anomaly::DEFAULT_CAPACITY,
            scale: DeviationScale::default(),
            detector: DetectorConfig::default(),
        }
    }
}

/// Feeds chronological `(window_start, feature)` samples through a fresh
/// baseline. Each sample is tested against the history before it and then
/// absorbed. Classifier records are added when a model is supplied and the
/// detector is armed.
pub fn replay(
    entity: &str,
    history: &[(i64, ReducedFeature)],
    config: &ReplayConfig,
    model: Option<&NbModel>,
) -> Result<Vec<Alarm>> {
    let mut baseline = Baseline::new(entity, config.capacity, config.scale)?;
    let mut alarms = Vec::new();
    for (start, feature) in history {
        if let Some(alarm) = threshold_detect(feature, *start, &baseline, &config.detector)? {
            alarms.push(alarm);
        }
        if let Some(model) = model {
            if baseline.history_len() >= config.detector.min_history.max(1) {
                let x = classifier_features(feature, &baseline)?;
                let (anomalous, _) = classify_nb(model, &x)?;
                if anomalous {
                    alarms.push(Alarm {
                        entity: entity.to_string(),
                        window_start: *start,
                        indicator: x[0],
                        threshold: 0.5,
                        source: AlarmSource::Classifier,
                    });
                }
            }
        }
        baseline.absorb(&feature.coords)?;
    }
    Ok(alarms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(entity: &str, amps: &[f64]) -> FeatureVector {
        let n = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        FeatureVector {
            entity: entity.into(),
            amplitudes: amps.iter().map(|a| a / n).collect(),
        }
    }

    #[test]
    fn identical_entities_have_zero_distance() {
        let a = analyze(
            &[fv("A", &[1.0, 2.0, 3.0]), fv("B", &[1.0, 2.0, 3.0])],
            ComponentCount::Fixed(40),
        )
        .unwrap();
        assert_eq!(a.requested_k, 40);
        assert_eq!(a.basis.k(), 1);
        assert_eq!(a.similarity.get(0, 1), 0.0);
    }

    #[test]
    fn energy_target_selects_k() {
        let feats = [
            fv("A", &[1.0, 0.0, 0.0]),
            fv("B", &[0.0, 1.0, 0.0]),
            fv("C", &[0.0, 0.0, 1.0]),
        ];
        let a = analyze(&feats, ComponentCount::Energy(0.5)).unwrap();
        assert_eq!(a.basis.k(), 2);
        assert!(analyze(&feats, ComponentCount::Energy(1.5)).is_err());
    }

    #[test]
    fn replay_flags_outlier_after_warmup() {
        let history: Vec<(i64, ReducedFeature)> = [0.0, 0.1, 0.0, 0.1, 0.05, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                (
                    i as i64,
                    ReducedFeature {
                        entity: "A".into(),
                        coords: vec![v],
                    },
                )
            })
            .collect();
        let alarms = replay("A", &history, &ReplayConfig::default(), None).unwrap();
        assert_eq!(alarms.len(), 1);
        assert_eq!(alarms[0].window_start, 5);
    }
}
