//! Pairwise distances between reduced features, neighbor queries,
//! single-linkage grouping and two-component scatter export.

use std::collections::BTreeMap;

use crate::format::{self, parse_f64};
use crate::reduction::{project, Basis, FeatureMatrix, ReducedFeature};
use crate::{Error, Result};

/// Euclidean distance between two reduced features.
pub fn distance(a: &ReducedFeature, b: &ReducedFeature) -> Result<f64> {
    euclidean(&a.coords, &b.coords)
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    entities: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// Wraps a precomputed square matrix, checking shape, symmetry and the
    /// diagonal.
    pub fn new(entities: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        let w = entities.len();
        if values.len() != w {
            return Err(Error::DimensionMismatch {
                expected: w,
                found: values.len(),
            });
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != w {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    found: row.len(),
                });
            }
            if row[i] != 0.0 {
                return Err(Error::invalid(format!(
                    "non-zero diagonal at {}",
                    entities[i]
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::invalid("distances must be finite and non-negative"));
                }
                if (v - values[j][i]).abs() > 1e-9 {
                    return Err(Error::invalid(format!(
                        "asymmetric entry {}/{}",
                        entities[i], entities[j]
                    )));
                }
            }
        }
        Ok(SimilarityMatrix { entities, values })
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn index_of(&self, entity: &str) -> Result<usize> {
        self.entities
            .iter()
            .position(|e| e == entity)
            .ok_or_else(|| Error::UnknownEntity(entity.to_string()))
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(0.0, f64::max)
    }

    /// Header of entity codes (after an empty corner cell), then one
    /// `entity,v1,...,vw` row per entity.
    pub fn to_csv(&self) -> String {
        let mut out = format!(",{}\n", self.entities.join(","));
        for (e, row) in self.entities.iter().zip(&self.values) {
            out.push_str(&format::row(e, row.iter().copied()));
            out.push('\n');
        }
        out
    }

    /// Parses the CSV written by [`SimilarityMatrix::to_csv`]; the header's
    /// corner cell may be omitted.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = format::lines(text);
        let (hline, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty similarity matrix"))?;
        let mut entities: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        if entities.first().is_some_and(String::is_empty) {
            entities.remove(0);
        }
        let mut values = Vec::with_capacity(entities.len());
        for (i, (line, content)) in lines.enumerate() {
            let mut fields = content.split(',');
            let label = fields.next().unwrap_or_default().trim();
            if entities.get(i).map(String::as_str) != Some(label) {
                return Err(Error::parse(
                    line,
                    format!("row label {label:?} does not match header order"),
                ));
            }
            values.push(
                fields
                    .map(|f| parse_f64(f, line))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        SimilarityMatrix::new(entities, values).map_err(|e| Error::parse(hline, e.to_string()))
    }
}

/// All pairwise distances between `features`.
pub fn pdist(features: &[ReducedFeature]) -> Result<SimilarityMatrix> {
    if features.is_empty() {
        return Err(Error::invalid("pdist needs at least one feature"));
    }
    let w = features.len();
    let mut values = vec![vec![0.0; w]; w];
    for i in 0..w {
        for j in i + 1..w {
            let d = distance(&features[i], &features[j])?;
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    Ok(SimilarityMatrix {
        entities: features.iter().map(|f| f.entity.clone()).collect(),
        values,
    })
}

/// The `n` closest other entities, nearest first; ties go to the
/// lexicographically smaller code.
pub fn nearest_neighbors(
    s: &SimilarityMatrix,
    entity: &str,
    n: usize,
) -> Result<Vec<(String, f64)>> {
    let i = s.index_of(entity)?;
    let mut others: Vec<(String, f64)> = (0..s.len())
        .filter(|&j| j != i)
        .map(|j| (s.entities[j].clone(), s.values[i][j]))
        .collect();
    others.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    others.truncate(n);
    Ok(others)
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Single-linkage grouping cut at `cutoff`: the connected components of the
/// graph joining entities whose distance is at most `cutoff`.
///
/// Members are sorted within each group and groups are ordered by their
/// smallest member.
pub fn cluster(s: &SimilarityMatrix, cutoff: f64) -> Vec<Vec<String>> {
    let w = s.len();
    let mut parent: Vec<usize> = (0..w).collect();
    for i in 0..w {
        for j in i + 1..w {
            if s.values[i][j] <= cutoff {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for i in 0..w {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(s.entities[i].clone());
    }
    let mut out: Vec<Vec<String>> = groups
        .into_values()
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    out.sort();
    out
}

/// First two principal coordinates per entity, with optional region labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterMap {
    pub entities: Vec<String>,
    pub coords: Vec<(f64, f64)>,
    pub regions: Vec<Option<String>>,
}

impl ScatterMap {
    /// Attaches region labels by entity code.
    pub fn with_regions(mut self, regions: &BTreeMap<String, String>) -> Self {
        self.regions = self
            .entities
            .iter()
            .map(|e| regions.get(e).cloned())
            .collect();
        self
    }

    /// `entity,pc1,pc2,region` rows under a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("entity,pc1,pc2,region\n");
        for ((e, (x, y)), r) in self.entities.iter().zip(&self.coords).zip(&self.regions) {
            out.push_str(&format!(
                "{e},{},{},{}\n",
                format::float(*x),
                format::float(*y),
                r.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

pub fn scatter_coords(features: &FeatureMatrix, basis: &Basis) -> Result<ScatterMap> {
    if basis.k() < 2 {
        return Err(Error::invalid(format!(
            "scatter needs at least 2 components, basis has {}",
            basis.k()
        )));
    }
    let reduced = project(features, basis)?;
    Ok(ScatterMap {
        entities: reduced.iter().map(|r| r.entity.clone()).collect(),
        coords: reduced.iter().map(|r| (r.coords[0], r.coords[1])).collect(),
        regions: vec![None; reduced.len()],
    })
}

/// Reads `entity,region` lines.
pub fn regions_from_csv(text: &str) -> Result<BTreeMap<String, String>> {
    format::lines(text)
        .map(|(line, content)| {
            let (e, r) = content
                .split_once(',')
                .ok_or_else(|| Error::parse(line, "expected entity,region"))?;
            Ok((e.trim().to_string(), r.trim().to_string()))
        })
        .collect()
}
