//! One function per subcommand. Each reads its inputs from files, calls the
//! library, and writes plain-text outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use netprint_core::anomaly::{roc, roc_to_csv, scores_from_csv, NbModel};
use netprint_core::format;
use netprint_core::ingest::{
    aggregate, load_geodb, looks_like_window, parse_snapshot, resample, series_from_csv,
    series_to_csv, EvolutionWindow,
};
use netprint_core::pipeline::{analyze, fingerprint_windows, replay};
use netprint_core::reduction::{reduced_from_csv, singular_values_to_csv, ReducedFeature};
use netprint_core::similarity::{
    cluster, nearest_neighbors, regions_from_csv, scatter_coords, SimilarityMatrix,
};
use netprint_core::spectrum::{features_from_csv, features_to_csv};
use netprint_core::synth::{make_labelled_dataset, AnomalyDistribution, SignalParams};
use netprint_core::Error;
use serde::Deserialize;

use crate::config::PipelineConfig;

/// Separates entity and window start in multi-week feature keys.
pub const KEY_SEPARATOR: char = '@';

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Regular files in `dir`, sorted by name.
fn files_in(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn window_key(entity: &str, start: i64) -> String {
    format!("{entity}{KEY_SEPARATOR}{start}")
}

/// Splits `ENTITY@start`; plain keys get start 0.
pub fn split_key(key: &str) -> Result<(String, i64)> {
    match key.rsplit_once(KEY_SEPARATOR) {
        Some((entity, start)) => Ok((
            entity.to_string(),
            start
                .parse()
                .with_context(|| format!("invalid window start in key {key:?}"))?,
        )),
        None => Ok((key.to_string(), 0)),
    }
}

pub fn ingest(snapshots: &Path, geodb: &Path, out: &Path) -> Result<String> {
    let db = load_geodb(&read(geodb)?).with_context(|| format!("loading {}", geodb.display()))?;
    let files = files_in(snapshots)?;
    if files.is_empty() {
        bail!("no snapshots in {}", snapshots.display());
    }
    let parsed = files
        .iter()
        .map(|f| parse_snapshot(&read(f)?).with_context(|| format!("parsing {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    let series = aggregate(&parsed, &db);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut summary = String::new();
    for s in &series {
        write(&out.join(format!("{}.csv", s.entity)), &series_to_csv(s))?;
        let peak = s.points.iter().map(|p| p.1).max().unwrap_or(0);
        writeln!(
            summary,
            "{}\t{} points\tpeak {}",
            s.entity,
            s.points.len(),
            peak
        )?;
    }
    Ok(summary)
}

/// Reads every window or count-series file in `input` and writes one
/// fingerprint row per window. Returns the warnings for skipped entities.
pub fn fingerprint(
    input: &Path,
    window_starts: &[i64],
    config: &PipelineConfig,
    out: &Path,
) -> Result<Vec<String>> {
    let mut windows: Vec<(String, EvolutionWindow)> = Vec::new();
    let mut warnings = Vec::new();
    let files: Vec<PathBuf> = files_in(input)?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .filter(|p| p.file_name().is_some_and(|n| n != "labels.csv"))
        .collect();
    for file in &files {
        let text = read(file)?;
        if looks_like_window(&text) {
            let w = EvolutionWindow::from_csv(&text)
                .with_context(|| format!("parsing window {}", file.display()))?;
            if w.len() != config.t {
                bail!(
                    "{} has {} samples, expected {}",
                    file.display(),
                    w.len(),
                    config.t
                );
            }
            windows.push((window_key(&w.entity, w.start), w));
            continue;
        }
        let all = series_from_csv(&text).with_context(|| format!("parsing {}", file.display()))?;
        if window_starts.is_empty() {
            bail!(
                "--window-start is required for count series ({})",
                file.display()
            );
        }
        for series in &all {
            for &start in window_starts {
                match resample(series, start, config.t) {
                    Ok(w) => {
                        let key = if window_starts.len() == 1 {
                            series.entity.clone()
                        } else {
                            window_key(&series.entity, start)
                        };
                        windows.push((key, w));
                    }
                    Err(e @ Error::InsufficientData { .. }) => {
                        warnings.push(format!("skipping {} at {start}: {e}", series.entity));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    windows.sort_by(|a, b| {
        (a.1.entity.as_str(), a.1.start, a.0.as_str()).cmp(&(
            b.1.entity.as_str(),
            b.1.start,
            b.0.as_str(),
        ))
    });
    if windows.windows(2).any(|p| p[0].0 == p[1].0) {
        bail!("duplicate window keys in {}", input.display());
    }
    if windows.is_empty() {
        bail!("no usable entities in {}", input.display());
    }
    let raw: Vec<EvolutionWindow> = windows.iter().map(|(_, w)| w.clone()).collect();
    let mut features = fingerprint_windows(&raw)?;
    for (f, (key, _)) in features.iter_mut().zip(&windows) {
        f.entity = key.clone();
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write(out, &features_to_csv(&features))?;
    Ok(warnings)
}

/// What `analyze` should print besides writing its files.
#[derive(Debug, Default, Clone)]
pub struct Queries {
    pub neighbors_of: Option<String>,
    pub neighbors: usize,
    pub cutoff: Option<f64>,
}

fn answer(s: &SimilarityMatrix, q: &Queries) -> Result<String> {
    let mut out = String::new();
    if let Some(entity) = &q.neighbors_of {
        for (e, d) in nearest_neighbors(s, entity, q.neighbors)? {
            writeln!(out, "{entity}\t{e}\t{d}")?;
        }
    }
    if let Some(c) = q.cutoff {
        for group in cluster(s, c) {
            writeln!(out, "{}", group.join(","))?;
        }
    }
    Ok(out)
}

/// Queries a precomputed similarity matrix without recomputing anything.
pub fn analyze_matrix(matrix: &Path, q: &Queries) -> Result<String> {
    let s = SimilarityMatrix::from_csv(&read(matrix)?)
        .with_context(|| format!("parsing {}", matrix.display()))?;
    answer(&s, q)
}

pub struct AnalyzeReport {
    pub stdout: String,
    pub warnings: Vec<String>,
}

pub fn analyze_features(
    features: &Path,
    config: &PipelineConfig,
    out: &Path,
    regions: Option<&Path>,
    q: &Queries,
) -> Result<AnalyzeReport> {
    let feats = features_from_csv(&read(features)?)
        .with_context(|| format!("parsing {}", features.display()))?;
    if feats.len() < 2 {
        bail!("analyze needs at least 2 entities, found {}", feats.len());
    }
    let analysis = analyze(&feats, config.components())?;
    let mut warnings = Vec::new();
    if analysis.basis.k() < analysis.requested_k {
        warnings.push(format!(
            "k clamped from {} to matrix rank {}",
            analysis.requested_k,
            analysis.basis.k()
        ));
    }

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join("basis.csv"), &analysis.basis.to_csv())?;
    write(
        &out.join("singular_values.csv"),
        &singular_values_to_csv(&analysis.svd.singular_values),
    )?;
    write(
        &out.join("reduced.csv"),
        &netprint_core::reduction::reduced_to_csv(&analysis.reduced),
    )?;
    write(&out.join("similarity.csv"), &analysis.similarity.to_csv())?;
    if analysis.basis.k() >= 2 {
        let mut map = scatter_coords(&analysis.features, &analysis.basis)?;
        if let Some(path) = regions {
            map = map.with_regions(&regions_from_csv(&read(path)?)?);
        }
        write(&out.join("scatter.csv"), &map.to_csv())?;
    } else {
        warnings.push("fewer than 2 components; scatter.csv not written".into());
    }
    write_history(&analysis.reduced, &out.join("history"))?;

    Ok(AnalyzeReport {
        stdout: answer(&analysis.similarity, q)?,
        warnings,
    })
}

/// Per-entity chronological files of `window_start,c0,...` rows.
fn write_history(reduced: &[ReducedFeature], dir: &Path) -> Result<()> {
    let mut by_entity: BTreeMap<String, Vec<(i64, &ReducedFeature)>> = BTreeMap::new();
    for r in reduced {
        let (entity, start) = split_key(&r.entity)?;
        by_entity.entry(entity).or_default().push((start, r));
    }
    fs::create_dir_all(dir)?;
    for (entity, mut rows) in by_entity {
        rows.sort_by_key(|r| r.0);
        let mut text = String::new();
        for (start, r) in rows {
            text.push_str(&format::row(&start.to_string(), r.coords.iter().copied()));
            text.push('\n');
        }
        write(&dir.join(format!("{entity}.csv")), &text)?;
    }
    Ok(())
}

fn read_history(path: &Path) -> Result<(String, Vec<(i64, ReducedFeature)>)> {
    let entity = path
        .file_stem()
        .and_then(|s| s.to_str())
        .context("history file name is not valid UTF-8")?
        .to_string();
    let rows = reduced_from_csv(&read(path)?)
        .with_context(|| format!("corrupt feature file {}", path.display()))?;
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let start: i64 = r.entity.parse().with_context(|| {
            format!("corrupt feature file {}: bad window start", path.display())
        })?;
        if out
            .last()
            .is_some_and(|(prev, _): &(i64, ReducedFeature)| *prev >= start)
        {
            bail!("corrupt feature file {}: rows out of order", path.display());
        }
        out.push((
            start,
            ReducedFeature {
                entity: entity.clone(),
                coords: r.coords,
            },
        ));
    }
    Ok((entity, out))
}

/// Replays every history file and returns alarm JSON lines.
pub fn detect(history: &Path, config: &PipelineConfig, model: Option<&Path>) -> Result<String> {
    let model = match model.or(config.model.as_deref()) {
        Some(path) => Some(
            NbModel::from_csv(&read(path)?)
                .with_context(|| format!("parsing model {}", path.display()))?,
        ),
        None => None,
    };
    let mut out = String::new();
    for file in files_in(history)? {
        if file.extension().is_none_or(|e| e != "csv") {
            continue;
        }
        let (entity, rows) = read_history(&file)?;
        let alarms = replay(&entity, &rows, &config.replay(), model.as_ref())
            .with_context(|| format!("replaying {}", file.display()))?;
        for alarm in alarms {
            out.push_str(&serde_json::to_string(&alarm)?);
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn roc_csv(input: &Path) -> Result<String> {
    let (scores, labels) =
        scores_from_csv(&read(input)?).with_context(|| format!("parsing {}", input.display()))?;
    Ok(roc_to_csv(&roc(&scores, &labels)?))
}

/// Dataset description read by `synth`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub seed: Option<u64>,
    pub t: Option<usize>,
    #[serde(default = "default_entity")]
    pub entity: String,
    #[serde(default)]
    pub n_normal: usize,
    #[serde(default)]
    pub n_anomalous: usize,
    pub signal: SignalParams,
    #[serde(default)]
    pub anomalies: AnomalyDistribution,
}

fn default_entity() -> String {
    "SYN".into()
}

pub const MANIFEST_HEADER: &str =
    "file,entity,start,label,kind,magnitude,start_fraction,end_fraction";

/// Writes window files `w00000.csv`, ... and a `labels.csv` manifest.
/// `--seed` and `--t` on the command line win over the params file, which
/// wins over the pipeline config.
pub fn synth(
    params: &Path,
    config: &PipelineConfig,
    cli_seed: Option<u64>,
    cli_t: Option<usize>,
    out: &Path,
) -> Result<usize> {
    let p: SynthParams =
        toml::from_str(&read(params)?).with_context(|| format!("parsing {}", params.display()))?;
    let seed = cli_seed.or(p.seed).or(config.seed).unwrap_or(0);
    let len = cli_t.or(p.t).unwrap_or(config.t);
    let data = make_labelled_dataset(
        p.n_normal,
        p.n_anomalous,
        &p.signal,
        &p.anomalies,
        seed,
        len,
        &p.entity,
    )?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut manifest = format!("{MANIFEST_HEADER}\n");
    for (i, item) in data.iter().enumerate() {
        let name = format!("w{i:05}.csv");
        write(&out.join(&name), &item.window.to_csv())?;
        let w = &item.window;
        match &item.anomaly {
            None => writeln!(manifest, "{name},{},{},normal,,,,", w.entity, w.start)?,
            Some(a) => writeln!(
                manifest,
                "{name},{},{},anomalous,{},{},{},{}",
                w.entity,
                w.start,
                a.kind.name(),
                format::float(a.magnitude),
                format::float(a.start_fraction),
                format::float(a.end_fraction)
            )?,
        }
    }
    write(&out.join("labels.csv"), &manifest)?;
    Ok(data.len())
}
