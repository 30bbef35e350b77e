//! Discrete Fourier transforms and normalized amplitude fingerprints.
//!
//! Both transforms are unnormalized (`X[k] = Σ x[t]·e^{-2πikt/T}`). A
//! `1/T` prefactor would cancel in the fingerprint anyway.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::format::{self, parse_f64};
use crate::ingest::EvolutionWindow;
use crate::{Error, Result};

/// Precomputed twiddles and bit-reversal table for one radix-2 length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    twiddles: Vec<Complex64>,
    reversed: Vec<usize>,
}

impl FftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if !len.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(len));
        }
        // Each twiddle evaluated directly; a rotation recurrence drifts at T=2048.
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        let bits = len.trailing_zeros();
        let reversed = (0..len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        Ok(FftPlan {
            len,
            twiddles,
            reversed,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Forward transform in place.
    pub fn process(&self, data: &mut [Complex64]) -> Result<()> {
        if data.len() != self.len {
            return Err(Error::DimensionMismatch {
                expected: self.len,
                found: data.len(),
            });
        }
        for i in 0..self.len {
            let j = self.reversed[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut half = 1;
        while half < self.len {
            let stride = self.len / (2 * half);
            for block in data.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for (j, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
                    let t = *b * self.twiddles[j * stride];
                    *b = *a - t;
                    *a += t;
                }
            }
            half *= 2;
        }
        Ok(())
    }
}

/// Radix-2 forward FFT. The input length must be a power of two.
pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(x.len())?;
    let mut out = x.to_vec();
    plan.process(&mut out)?;
    Ok(out)
}

/// Direct O(T²) summation of the forward DFT, for any length.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| {
                    // Reduce k·t modulo n before scaling so the angle stays small.
                    let phase = ((k * t) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, -2.0 * PI * phase)
                })
                .sum()
        })
        .collect()
}

/// Unit-norm amplitude spectrum of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub entity: String,
    pub amplitudes: Vec<f64>,
}

/// Scales raw spectrum magnitudes to unit Euclidean norm.
pub fn normalize_amplitudes(spectrum: &[Complex64]) -> Result<Vec<f64>> {
    let amps: Vec<f64> = spectrum.iter().map(|z| z.norm()).collect();
    let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateSignal);
    }
    if !norm.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(amps.into_iter().map(|a| a / norm).collect())
}

/// Fingerprint using a prepared plan; the plan length must match the window.
pub fn fingerprint_with(plan: &FftPlan, w: &EvolutionWindow) -> Result<FeatureVector> {
    let mut data: Vec<Complex64> = w.samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.process(&mut data)?;
    Ok(FeatureVector {
        entity: w.entity.clone(),
        amplitudes: normalize_amplitudes(&data)?,
    })
}

/// `|FFT(w)| / ‖ |FFT(w)| ‖` over all `T` bins, mirrored bins included.
pub fn fingerprint(w: &EvolutionWindow) -> Result<FeatureVector> {
    fingerprint_with(&FftPlan::new(w.len())?, w)
}

/// Feature store: one `entity,a0,...,a{T-1}` row per vector.
pub fn features_to_csv(features: &[FeatureVector]) -> String {
    let mut out = String::new();
    for f in features {
        out.push_str(&format::row(&f.entity, f.amplitudes.iter().copied()));
        out.push('\n');
    }
    out
}

pub fn features_from_csv(text: &str) -> Result<Vec<FeatureVector>> {
    let mut out: Vec<FeatureVector> = Vec::new();
    for (line, content) in format::lines(text) {
        let mut fields = content.split(',');
        let entity = fields.next().unwrap_or_default().trim().to_string();
        let amplitudes = fields
            .map(|f| parse_f64(f, line))
            .collect::<Result<Vec<_>>>()?;
        if amplitudes.is_empty() {
            return Err(Error::parse(line, "feature row has no amplitudes"));
        }
        if let Some(first) = out.first() {
            if first.amplitudes.len() != amplitudes.len() {
                return Err(Error::parse(
                    line,
                    format!(
                        "expected {} amplitudes, found {}",
                        first.amplitudes.len(),
                        amplitudes.len()
                    ),
                ));
            }
        }
        if amplitudes.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::parse(
                line,
                "amplitudes must be finite and non-negative",
            ));
        }
        out.push(FeatureVector { entity, amplitudes });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let base: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (diff / base).sqrt()
    }

    fn window(samples: Vec<f64>) -> EvolutionWindow {
        EvolutionWindow::new("XX", 0, samples).unwrap()
    }

    #[test]
    fn impulse_and_constant() {
        let out = fft(&[c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap();
        assert_eq!(out, vec![c(1.0); 4]);
        let out = fft(&[c(1.0); 4]).unwrap();
        assert_eq!(out, vec![c(4.0), c(0.0), c(0.0), c(0.0)]);
        assert_eq!(fft(&[c(2.5)]).unwrap(), vec![c(2.5)]);
    }

    #[test]
    fn fft_rejects_non_power_of_two() {
        assert!(matches!(fft(&[c(1.0); 6]), Err(Error::NotPowerOfTwo(6))));
        assert!(matches!(fft(&[]), Err(Error::NotPowerOfTwo(0))));
    }

    #[test]
    fn naive_dft_small_cases() {
        assert_eq!(naive_dft(&[c(1.0), c(0.0)]), vec![c(1.0), c(1.0)]);
        assert_eq!(naive_dft(&[c(0.0); 3]), vec![c(0.0); 3]);
    }

    #[test]
    fn naive_dft_inverts_through_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Complex64> = (0..12)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let spec = naive_dft(&x);
        let conj: Vec<Complex64> = spec.iter().map(|z| z.conj()).collect();
        let back: Vec<Complex64> = naive_dft(&conj)
            .iter()
            .map(|z| z.conj() / x.len() as f64)
            .collect();
        assert!(rel_err(&back, &x) < 1e-9);
    }

    #[test]
    fn fft_matches_naive_dft_length_256() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Complex64> = (0..256)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        assert!(rel_err(&fft(&x).unwrap(), &naive_dft(&x)) <= 1e-9);
    }

    #[test]
    fn parseval_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x: Vec<Complex64> = (0..1024)
            .map(|_| Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)))
            .collect();
        let time: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let freq: f64 = fft(&x).unwrap().iter().map(|z| z.norm_sqr()).sum();
        assert!((freq - 1024.0 * time).abs() <= 1e-9 * freq);
    }

    #[test]
    fn constant_window_is_dc_only() {
        for level in [0.5, 7.0, 1e6] {
            let f = fingerprint(&window(vec![level; 8])).unwrap();
            let mut expected = vec![0.0; 8];
            expected[0] = 1.0;
            for (a, e) in f.amplitudes.iter().zip(&expected) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_splits_between_mirrored_bins() {
        // 2·cos(2πt/8) is negative at some samples, so build the window
        // directly rather than through the non-negative constructor.
        let w = EvolutionWindow {
            entity: "XX".into(),
            start: 0,
            samples: (0..8)
                .map(|t| 2.0 * (2.0 * PI * t as f64 / 8.0).cos())
                .collect(),
            span: crate::WEEK_SECONDS,
        };
        let f = fingerprint(&w).unwrap();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for (k, a) in f.amplitudes.iter().enumerate() {
            let expected = if k == 1 || k == 7 { half } else { 0.0 };
            assert!((a - expected).abs() < 1e-12, "bin {k}: {a}");
        }
    }

    #[test]
    fn zero_window_is_degenerate() {
        assert!(matches!(
            fingerprint(&window(vec![0.0; 16])),
            Err(Error::DegenerateSignal)
        ));
    }

    #[test]
    fn fingerprint_matches_naive_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let samples: Vec<f64> = (0..64).map(|_| rng.random_range(0.1..100.0)).collect();
        let w = window(samples.clone());
        let f = fingerprint(&w).unwrap();
        let spec = naive_dft(&samples.iter().map(|&v| c(v)).collect::<Vec<_>>());
        let amps: Vec<f64> = spec.iter().map(|z| z.norm()).collect();
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        for (a, b) in f.amplitudes.iter().zip(&amps) {
            assert!((a - b / norm).abs() <= 1e-9);
        }
    }

    #[test]
    fn feature_store_round_trip() {
        let features = vec![
            FeatureVector {
                entity: "AU".into(),
                amplitudes: vec![0.6, 0.8],
            },
            FeatureVector {
                entity: "NZ".into(),
                amplitudes: vec![1.0, 0.0],
            },
        ];
        let text = features_to_csv(&features);
        assert_eq!(features_from_csv(&text).unwrap(), features);
        assert!(features_from_csv("AU,0.6,0.8\nNZ,1.0\n").is_err());
    }

    proptest! {
        #[test]
        fn fingerprint_invariants(samples in proptest::collection::vec(0.01f64..1e4, 32),
                                  scale in 1e-3f64..1e3, shift in 0usize..32) {
            let f = fingerprint(&window(samples.clone())).unwrap();
            let norm: f64 = f.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-9);
            let scaled = fingerprint(&window(samples.iter().map(|v| v * scale).collect())).unwrap();
            let mut rotated = samples.clone();
            rotated.rotate_left(shift);
            let rotated = fingerprint(&window(rotated)).unwrap();
            for k in 0..32 {
                prop_assert!((f.amplitudes[k] - scaled.amplitudes[k]).abs() <= 1e-9);
                prop_assert!((f.amplitudes[k] - rotated.amplitudes[k]).abs() <= 1e-9);
                if k > 0 {
                    prop_assert!((f.amplitudes[k] - f.amplitudes[32 - k]).abs() <= 1e-9);
                }
            }
        }
    }
}
