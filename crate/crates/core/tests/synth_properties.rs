//! Statistical properties of generated windows in fingerprint space.

use netprint_core::ingest::EvolutionWindow;
use netprint_core::pipeline::{analyze, fingerprint_windows, ComponentCount};
use netprint_core::similarity::scatter_coords;
use netprint_core::synth::{
    generate_weekly, inject_anomaly, AnomalyKind, AnomalySpec, Harmonic, SignalParams,
};

fn weekly(noise_fraction: f64) -> SignalParams {
    SignalParams {
        base_level: 1000.0,
        harmonics: vec![
            Harmonic {
                index: 7,
                amplitude: 0.3,
                phase: 0.0,
            },
            Harmonic {
                index: 14,
                amplitude: 0.1,
                phase: 0.3,
            },
        ],
        weekend_factor: 0.8,
        noise_sigma: noise_fraction * 1000.0,
        seed: 0,
    }
}

fn replicas(p: &SignalParams, seeds: std::ops::Range<u64>) -> Vec<EvolutionWindow> {
    seeds
        .map(|seed| generate_weekly(&SignalParams { seed, ..p.clone() }, 2048).unwrap())
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Bound on the fingerprint distance between two same-parameter windows,
/// `1.25 · noise_sigma / base_level`. The factor comes from a sweep over
/// noise fractions 0.005..0.1 whose worst observed ratio was 0.96.
fn noise_bound(p: &SignalParams) -> f64 {
    1.25 * p.noise_sigma / p.base_level
}

#[test]
fn same_parameter_windows_stay_close() {
    for fraction in [0.01, 0.02, 0.05] {
        let p = weekly(fraction);
        let f = fingerprint_windows(&replicas(&p, 100..120)).unwrap();
        for i in 0..f.len() {
            for j in i + 1..f.len() {
                assert!(dist(&f[i].amplitudes, &f[j].amplitudes) < noise_bound(&p));
            }
        }
    }
}

#[test]
fn dropout_leaves_the_normal_cloud() {
    let p = weekly(0.05);
    let normal = fingerprint_windows(&replicas(&p, 0..100)).unwrap();
    let t = normal[0].amplitudes.len();
    let mean: Vec<f64> = (0..t)
        .map(|k| normal.iter().map(|f| f.amplitudes[k]).sum::<f64>() / normal.len() as f64)
        .collect();
    let spread = normal
        .iter()
        .map(|f| dist(&f.amplitudes, &mean))
        .fold(0.0, f64::max);
    let base = generate_weekly(
        &SignalParams {
            seed: 500,
            ..p.clone()
        },
        2048,
    )
    .unwrap();
    for start in [0.0, 0.3, 0.9] {
        let spec = AnomalySpec {
            kind: AnomalyKind::Dropout,
            magnitude: 0.5,
            start_fraction: start,
            end_fraction: start + 0.1,
        };
        let hit = fingerprint_windows(&[inject_anomaly(&base, &spec).unwrap()]).unwrap();
        assert!(dist(&hit[0].amplitudes, &mean) > spread, "start {start}");
    }
}

#[test]
fn generated_samples_are_finite_and_non_negative() {
    let p = SignalParams {
        harmonics: vec![Harmonic {
            index: 7,
            amplitude: 1.2,
            phase: 0.0,
        }],
        ..weekly(0.3)
    };
    for w in replicas(&p, 0..10) {
        assert!(w.samples.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}

#[test]
fn two_cluster_scatter_separates() {
    let a = weekly(0.02);
    let b = SignalParams {
        harmonics: vec![Harmonic {
            index: 1,
            amplitude: 0.3,
            phase: 0.0,
        }],
        weekend_factor: 1.2,
        ..weekly(0.02)
    };
    let mut windows = replicas(&a, 0..10);
    windows.extend(replicas(&b, 10..20));
    for (i, w) in windows.iter_mut().enumerate() {
        w.entity = format!("E{i:02}");
    }
    let analysis = analyze(
        &fingerprint_windows(&windows).unwrap(),
        ComponentCount::Fixed(40),
    )
    .unwrap();
    let map = scatter_coords(&analysis.features, &analysis.basis).unwrap();
    let d = |i: usize, j: usize| {
        let (p, q) = (map.coords[i], map.coords[j]);
        ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt()
    };
    let (mut good, mut total) = (0, 0);
    for i in 0..20 {
        for j in 0..20 {
            for k in 0..20 {
                let same = |x: usize, y: usize| (x < 10) == (y < 10);
                if i != j && same(i, j) && !same(i, k) {
                    total += 1;
                    good += (d(i, j) < d(i, k)) as usize;
                }
            }
        }
    }
    assert!(good as f64 >= 0.9 * total as f64, "{good}/{total}");
}
