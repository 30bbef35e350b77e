//! SVD of the fingerprint matrix and projection onto leading components.

use crate::format::{self, parse_f64};
use crate::spectrum::FeatureVector;
use crate::{Error, Result};

/// Singular values at or below `RANK_TOL · s_max` count as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Component count used when no energy target is given.
pub const DEFAULT_K: usize = 40;

const MAX_SWEEPS: usize = 80;

/// Dense column-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows * columns.len());
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Matrix {
            rows,
            cols: columns.len(),
            data,
        })
    }

    /// Builds a matrix from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Keeps the first `n` columns.
    pub fn leading_columns(&self, n: usize) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: n,
            data: self.data[..n * self.rows].to_vec(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn two_columns_mut(&mut self, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(p < q);
        let (head, tail) = self.data.split_at_mut(q * self.rows);
        (
            &mut head[p * self.rows..(p + 1) * self.rows],
            &mut tail[..self.rows],
        )
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin singular value decomposition `M = U·diag(s)·Vᵀ`.
///
/// `U` is `rows × r` and `V` is `cols × r` with `r = min(rows, cols)`; both
/// have orthonormal columns. Singular values are sorted in descending order
/// and the largest-magnitude entry of every `U` column is non-negative.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(m: &Matrix) -> Result<Svd> {
    if m.rows == 0 || m.cols == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    if m.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.rows >= m.cols {
        let mut out = jacobi_tall(m.clone());
        fix_signs(&mut out);
        Ok(out)
    } else {
        let t = jacobi_tall(m.transpose());
        let mut out = Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
        fix_signs(&mut out);
        Ok(out)
    }
}

fn jacobi_tall(mut a: Matrix) -> Svd {
    let (rows, n) = (a.rows, a.cols);
    let mut v = Matrix::identity(n);
    let tol = f64::EPSILON * rows as f64;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (cp, cq) = a.two_columns_mut(p, q);
                let alpha = dot(cp, cp);
                let beta = dot(cq, cq);
                let gamma = dot(cp, cq);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(cp, cq, c, s);
                let (vp, vq) = v.two_columns_mut(p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| dot(a.col(j), a.col(j)).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let s_max = norms[order[0]];
    let mut u = Matrix::zeros(rows, n);
    let mut v_sorted = Matrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        v_sorted.col_mut(dst).copy_from_slice(v.col(src));
        if sigma > s_max * RANK_TOL && sigma > 0.0 {
            for (o, x) in u.col_mut(dst).iter_mut().zip(a.col(src)) {
                *o = x / sigma;
            }
            singular_values.push(sigma);
        } else {
            singular_values.push(if s_max == 0.0 { 0.0 } else { sigma });
            missing.push(dst);
        }
    }
    complete_orthonormal(&mut u, &missing);
    Svd {
        u,
        singular_values,
        v: v_sorted,
    }
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to every
/// other column, drawing candidates from the standard basis.
fn complete_orthonormal(u: &mut Matrix, missing: &[usize]) {
    let mut filled: Vec<usize> = (0..u.cols).filter(|j| !missing.contains(j)).collect();
    let mut candidate = 0;
    for &j in missing {
        while candidate < u.rows {
            let mut e = vec![0.0; u.rows];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &f in &filled {
                    let proj = dot(&e, u.col(f));
                    for (x, y) in e.iter_mut().zip(u.col(f)) {
                        *x -= proj * y;
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 0.5 {
                for (o, x) in u.col_mut(j).iter_mut().zip(&e) {
                    *o = x / norm;
                }
                filled.push(j);
                break;
            }
        }
    }
}

fn fix_signs(out: &mut Svd) {
    for j in 0..out.u.cols {
        let col = out.u.col(j);
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            out.u.col_mut(j).iter_mut().for_each(|x| *x = -*x);
            out.v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Number of singular values above the relative rank tolerance.
pub fn positive_count(singular_values: &[f64]) -> usize {
    let s_max = singular_values.iter().copied().fold(0.0, f64::max);
    singular_values
        .iter()
        .filter(|&&s| s > 0.0 && s > s_max * RANK_TOL)
        .count()
}

fn cumulative_energy(singular_values: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    std::iter::once(0.0)
        .chain(singular_values.iter().map(|s| {
            acc += s * s;
            acc
        }))
        .collect()
}

/// Share of `Σ s²` captured by the first `k` singular values.
pub fn energy_fraction(singular_values: &[f64], k: usize) -> Result<f64> {
    if k > singular_values.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds {} singular values",
            singular_values.len()
        )));
    }
    let cum = cumulative_energy(singular_values);
    let total = cum[singular_values.len()];
    if total == 0.0 {
        return Err(Error::ZeroEnergy);
    }
    Ok(cum[k] / total)
}

/// Smallest `k` whose energy fraction reaches `target`, clamped to the
/// number of positive singular values.
pub fn choose_k(singular_values: &[f64], target: f64) -> usize {
    let limit = positive_count(singular_values);
    let cum = cumulative_energy(singular_values);
    let total = cum[singular_values.len()];
    if total == 0.0 {
        return 0;
    }
    (1..=limit)
        .find(|&k| cum[k] / total >= target)
        .unwrap_or(limit)
}

/// Fingerprints arranged as columns of a `T × w` matrix.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub entities: Vec<String>,
    pub data: Matrix,
}

impl FeatureMatrix {
    pub fn from_features(features: &[FeatureVector]) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::invalid("feature matrix needs at least one column"));
        }
        let columns: Vec<Vec<f64>> = features.iter().map(|f| f.amplitudes.clone()).collect();
        Ok(FeatureMatrix {
            entities: features.iter().map(|f| f.entity.clone()).collect(),
            data: Matrix::from_columns(&columns)?,
        })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// Leading left singular vectors retained for projection.
#[derive(Debug, Clone)]
pub struct Basis {
    vectors: Matrix,
    singular_values: Vec<f64>,
}

impl Basis {
    /// Keeps `min(k, rank)` leading vectors of `svd.u`.
    pub fn from_svd(svd: &Svd, k: usize) -> Self {
        let k = k.min(positive_count(&svd.singular_values));
        Basis {
            vectors: svd.u.leading_columns(k),
            singular_values: svd.singular_values.clone(),
        }
    }

    pub fn from_parts(vectors: Matrix, singular_values: Vec<f64>) -> Self {
        Basis {
            vectors,
            singular_values,
        }
    }

    pub fn k(&self) -> usize {
        self.vectors.cols
    }

    pub fn dim(&self) -> usize {
        self.vectors.rows
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Coordinates of one `T`-dimensional vector in this basis.
    pub fn coords(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok((0..self.k()).map(|j| dot(self.vectors.col(j), x)).collect())
    }

    /// Header line `k,T` then one row of `T` coefficients per vector.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{}\n", self.k(), self.dim());
        for j in 0..self.k() {
            let mut line = String::new();
            for (i, v) in self.vectors.col(j).iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&format::float(*v));
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_csv(basis: &str, singular_values: &str) -> Result<Self> {
        let mut lines = format::lines(basis);
        let (line, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty basis file"))?;
        let dims: Vec<&str> = header.split(',').collect();
        if dims.len() != 2 {
            return Err(Error::parse(line, "expected header k,T"));
        }
        let k = format::parse_i64(dims[0], line)? as usize;
        let dim = format::parse_i64(dims[1], line)? as usize;
        let mut columns = Vec::with_capacity(k);
        for (line, content) in lines {
            let col = content
                .split(',')
                .map(|f| parse_f64(f, line))
                .collect::<Result<Vec<_>>>()?;
            if col.len() != dim {
                return Err(Error::parse(line, format!("expected {dim} coefficients")));
            }
            columns.push(col);
        }
        if columns.len() != k {
            return Err(Error::parse(line, format!("expected {k} basis rows")));
        }
        let vectors = if k == 0 {
            Matrix::zeros(dim, 0)
        } else {
            Matrix::from_columns(&columns)?
        };
        Ok(Basis {
            vectors,
            singular_values: singular_values_from_csv(singular_values)?,
        })
    }
}

/// Single-row CSV of singular values.
pub fn singular_values_to_csv(values: &[f64]) -> String {
    let row: Vec<String> = values.iter().map(|v| format::float(*v)).collect();
    format!("{}\n", row.join(","))
}

pub fn singular_values_from_csv(text: &str) -> Result<Vec<f64>> {
    match format::lines(text).next() {
        Some((line, content)) => content.split(',').map(|f| parse_f64(f, line)).collect(),
        None => Ok(Vec::new()),
    }
}

/// A fingerprint expressed in the first `k` principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFeature {
    pub entity: String,
    pub coords: Vec<f64>,
}

/// Projects every column of `features` onto `basis`.
pub fn project(features: &FeatureMatrix, basis: &Basis) -> Result<Vec<ReducedFeature>> {
    if features.data.rows != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: features.data.rows,
        });
    }
    features
        .entities
        .iter()
        .enumerate()
        .map(|(j, e)| {
            Ok(ReducedFeature {
                entity: e.clone(),
                coords: basis.coords(features.data.col(j))?,
            })
        })
        .collect()
}

pub fn reduced_to_csv(features: &[ReducedFeature]) -> String {
    let mut out = String::new();
    for f in features {
        out.push_str(&format::row(&f.entity, f.coords.iter().copied()));
        out.push('\n');
    }
    out
}

pub fn reduced_from_csv(text: &str) -> Result<Vec<ReducedFeature>> {
    let mut out: Vec<ReducedFeature> = Vec::new();
    for (line, content) in format::lines(text) {
        let mut fields = content.split(',');
        let entity = fields.next().unwrap_or_default().trim().to_string();
        let coords = fields
            .map(|f| parse_f64(f, line))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = out.first() {
            if first.coords.len() != coords.len() {
                return Err(Error::parse(line, "inconsistent coordinate count"));
            }
        }
        out.push(ReducedFeature { entity, coords });
    }
    Ok(out)
}
