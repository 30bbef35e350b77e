//! Synthetic weekly-periodic network-size windows with injected anomalies.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`; Gaussian noise is drawn with `rand_distr::Normal`. Both
//! are pinned in the manifest so datasets are reproducible.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ingest::EvolutionWindow;
use crate::{Error, Result, WEEK_SECONDS};

/// One cosine component; harmonic `h` completes `h` cycles per window, so
/// `h = 7` is a daily cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub index: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalParams {
    pub base_level: f64,
    #[serde(default)]
    pub harmonics: Vec<Harmonic>,
    /// Level multiplier applied on the last two days of the window.
    #[serde(default = "one")]
    pub weekend_factor: f64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SignalParams {
    fn validate(&self) -> Result<()> {
        let finite = self.base_level.is_finite()
            && self.weekend_factor.is_finite()
            && self.noise_sigma.is_finite()
            && self
                .harmonics
                .iter()
                .all(|h| h.amplitude.is_finite() && h.phase.is_finite());
        if !finite {
            return Err(Error::NonFinite);
        }
        if self.base_level <= 0.0 {
            return Err(Error::invalid("base_level must be positive"));
        }
        if self.weekend_factor < 0.0 {
            return Err(Error::invalid("weekend_factor must be non-negative"));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::invalid("noise_sigma must be non-negative"));
        }
        Ok(())
    }
}

/// Generates one window: `max(0, level(t)·(1 + Σ a·cos(2π·h·t/T + φ)) + noise)`.
pub fn generate_weekly(p: &SignalParams, len: usize) -> Result<EvolutionWindow> {
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise = Normal::new(0.0, p.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let weekend_start = len * 5 / 7;
    let samples: Vec<f64> = (0..len)
        .map(|t| {
            let level = if t >= weekend_start {
                p.base_level * p.weekend_factor
            } else {
                p.base_level
            };
            let shape: f64 = p
                .harmonics
                .iter()
                .map(|h| {
                    h.amplitude
                        * (2.0 * PI * h.index as f64 * t as f64 / len as f64 + h.phase).cos()
                })
                .sum();
            let eps = if p.noise_sigma > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            (level * (1.0 + shape) + eps).max(0.0)
        })
        .collect();
    if samples.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateSignal);
    }
    EvolutionWindow::new("SYN", 0, samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    Dropout,
    Spike,
    Drift,
}

impl AnomalyKind {
    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::Dropout => "dropout",
            AnomalyKind::Spike => "spike",
            AnomalyKind::Drift => "drift",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub magnitude: f64,
    pub start_fraction: f64,
    pub end_fraction: f64,
}

impl AnomalySpec {
    fn validate(&self) -> Result<()> {
        let (s, e, m) = (self.start_fraction, self.end_fraction, self.magnitude);
        if !(0.0..1.0).contains(&s) || e <= s || e > 1.0 {
            return Err(Error::invalid(format!(
                "anomaly span [{s}, {e}] outside [0, 1]"
            )));
        }
        if !m.is_finite() || m < 0.0 {
            return Err(Error::invalid(
                "anomaly magnitude must be finite and non-negative",
            ));
        }
        match self.kind {
            AnomalyKind::Dropout if m >= 1.0 => {
                Err(Error::invalid("dropout magnitude must be below 1"))
            }
            AnomalyKind::Spike if m <= 1.0 => Err(Error::invalid("spike magnitude must exceed 1")),
            AnomalyKind::Drift if m == 0.0 => {
                Err(Error::invalid("drift magnitude must be positive"))
            }
            _ => Ok(()),
        }
    }

    /// Sample indices `i` with `start ≤ i/T < end`.
    pub fn span(&self, len: usize) -> std::ops::Range<usize> {
        let lo = (self.start_fraction * len as f64).ceil() as usize;
        let hi = (self.end_fraction * len as f64).ceil() as usize;
        lo.min(len)..hi.min(len)
    }
}

/// Scales the samples inside the anomaly span. Dropouts and spikes apply a
/// constant factor; drift ramps the factor linearly from 1 to `magnitude`.
pub fn inject_anomaly(w: &EvolutionWindow, spec: &AnomalySpec) -> Result<EvolutionWindow> {
    spec.validate()?;
    let mut out = w.clone();
    let span = spec.span(w.len());
    let n = span.len();
    for (offset, i) in span.enumerate() {
        let factor = match spec.kind {
            AnomalyKind::Dropout | AnomalyKind::Spike => spec.magnitude,
            AnomalyKind::Drift if n > 1 => {
                1.0 + (spec.magnitude - 1.0) * offset as f64 / (n - 1) as f64
            }
            AnomalyKind::Drift => spec.magnitude,
        };
        out.samples[i] *= factor;
    }
    Ok(out)
}

/// Ranges from which labelled anomalies are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalyDistribution {
    pub kinds: Vec<AnomalyKind>,
    pub dropout_magnitude: (f64, f64),
    pub spike_magnitude: (f64, f64),
    pub drift_magnitude: (f64, f64),
    /// Span length as a fraction of the window.
    pub span_fraction: (f64, f64),
}

impl Default for AnomalyDistribution {
    fn default() -> Self {
        AnomalyDistribution {
            kinds: vec![AnomalyKind::Dropout, AnomalyKind::Spike, AnomalyKind::Drift],
            dropout_magnitude: (0.2, 0.6),
            spike_magnitude: (2.0, 4.0),
            drift_magnitude: (1.5, 3.0),
            span_fraction: (0.1, 0.3),
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

impl AnomalyDistribution {
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Result<AnomalySpec> {
        if self.kinds.is_empty() {
            return Err(Error::invalid("anomaly distribution has no kinds"));
        }
        let kind = self.kinds[rng.random_range(0..self.kinds.len())];
        let magnitude = match kind {
            AnomalyKind::Dropout => uniform(rng, self.dropout_magnitude),
            AnomalyKind::Spike => uniform(rng, self.spike_magnitude),
            AnomalyKind::Drift => uniform(rng, self.drift_magnitude),
        };
        let width = uniform(rng, self.span_fraction).clamp(1e-6, 1.0);
        let start = uniform(rng, (0.0, 1.0 - width));
        let spec = AnomalySpec {
            kind,
            magnitude,
            start_fraction: start,
            end_fraction: (start + width).min(1.0),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A generated window and the anomaly injected into it, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledWindow {
    pub window: EvolutionWindow,
    pub anomaly: Option<AnomalySpec>,
}

impl LabelledWindow {
    pub fn is_anomalous(&self) -> bool {
        self.anomaly.is_some()
    }
}

/// `n_normal` clean windows followed by `n_anomalous` windows with one drawn
/// anomaly each. Window `i` starts at week `i` and carries `entity`; every
/// window's noise seed is drawn from a generator seeded with `seed`.
pub fn make_labelled_dataset(
    n_normal: usize,
    n_anomalous: usize,
    p: &SignalParams,
    anomalies: &AnomalyDistribution,
    seed: u64,
    len: usize,
    entity: &str,
) -> Result<Vec<LabelledWindow>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_normal + n_anomalous);
    for i in 0..n_normal + n_anomalous {
        let params = SignalParams {
            seed: rng.next_u64(),
            ..p.clone()
        };
        let mut window = generate_weekly(&params, len)?;
        window.entity = entity.to_string();
        window.start = i as i64 * WEEK_SECONDS;
        let anomaly = if i >= n_normal {
            let spec = anomalies.draw(&mut rng)?;
            window = inject_anomaly(&window, &spec)?;
            Some(spec)
        } else {
            None
        };
        out.push(LabelledWindow { window, anomaly });
    }
    Ok(out)
}
