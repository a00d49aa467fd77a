//! Points and vertices of the bi-mapping polytope.
//!
//! A point is a pair of row-stochastic blocks: `fblock` (n×m, soft map
//! X→Y) and `gblock` (m×n, soft map Y→X). In the dense (n+m)×(n+m) layout
//! `fblock` sits at rows `0..n`, columns `0..m` and `gblock` at rows
//! `n..n+m`, columns `m..m+n`; every other entry is a structural zero.
//! Vertices are exactly the 0/1 points and correspond to mapping pairs.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of a [`SoftBimapping`] must be 1 within this tolerance.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// Default cap for [`enumerate_vertices`].
pub const VERTEX_ENUMERATION_LIMIT: u128 = 10_000_000;

/// A point of the bi-mapping polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftBimapping {
    fblock: DMatrix<f64>,
    gblock: DMatrix<f64>,
}

impl SoftBimapping {
    pub fn new(fblock: DMatrix<f64>, gblock: DMatrix<f64>) -> Result<Self> {
        let (n, m) = fblock.shape();
        if gblock.shape() != (m, n) {
            return Err(Error::DimensionMismatch {
                expected: format!("{m}x{n} gblock"),
                found: format!("{}x{}", gblock.nrows(), gblock.ncols()),
            });
        }
        if n < 2 || m < 2 {
            return Err(Error::TooFewPoints { size: n.min(m) });
        }
        for block in [&fblock, &gblock] {
            for row in block.row_iter() {
                if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::InvalidParameter(
                        "soft bimapping entries must lie in [0, 1]".into(),
                    ));
                }
                if (row.sum() - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::InvalidParameter(format!(
                        "soft bimapping row sums to {}",
                        row.sum()
                    )));
                }
            }
        }
        Ok(Self { fblock, gblock })
    }

    /// Draws every row uniformly from its simplex (flat Dirichlet).
    pub fn random<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Self {
        Self {
            fblock: random_stochastic(n, m, rng),
            gblock: random_stochastic(m, n, rng),
        }
    }

    /// Number of points of the first space.
    pub fn n(&self) -> usize {
        self.fblock.nrows()
    }

    /// Number of points of the second space.
    pub fn m(&self) -> usize {
        self.fblock.ncols()
    }

    pub fn fblock(&self) -> &DMatrix<f64> {
        &self.fblock
    }

    pub fn gblock(&self) -> &DMatrix<f64> {
        &self.gblock
    }

    /// The full (n+m)×(n+m) matrix with explicit structural zeros.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, m) = (self.n(), self.m());
        let mut s = DMatrix::zeros(n + m, n + m);
        s.view_mut((0, 0), (n, m)).copy_from(&self.fblock);
        s.view_mut((n, m), (m, n)).copy_from(&self.gblock);
        s
    }

    /// Reads the structural blocks back out of a dense matrix without
    /// re-validating them.
    pub(crate) fn from_dense_unchecked(s: &DMatrix<f64>, n: usize, m: usize) -> Self {
        Self {
            fblock: s.view((0, 0), (n, m)).into_owned(),
            gblock: s.view((n, m), (m, n)).into_owned(),
        }
    }

    /// `(1 − γ)·self + γ·vertex`.
    pub fn move_toward(&self, vertex: &MappingPair, gamma: f64) -> SoftBimapping {
        let mut fblock = &self.fblock * (1.0 - gamma);
        let mut gblock = &self.gblock * (1.0 - gamma);
        for (i, &j) in vertex.f.iter().enumerate() {
            fblock[(i, j)] += gamma;
        }
        for (i, &j) in vertex.g.iter().enumerate() {
            gblock[(i, j)] += gamma;
        }
        SoftBimapping { fblock, gblock }
    }

    /// Frobenius inner product with a vertex.
    pub fn dot_vertex(&self, vertex: &MappingPair) -> f64 {
        let f: f64 = vertex.f.iter().enumerate().map(|(i, &j)| self.fblock[(i, j)]).sum();
        let g: f64 = vertex.g.iter().enumerate().map(|(i, &j)| self.gblock[(i, j)]).sum();
        f + g
    }
}

fn random_stochastic<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let mut block = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(Exp1));
    for mut row in block.row_iter_mut() {
        let total = row.sum();
        row /= total;
    }
    block
}

/// A vertex of the polytope: `f[i]` is the image in Y of point `i` of X
/// and `g[j]` the image in X of point `j` of Y (all 0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MappingPair {
    pub f: Vec<usize>,
    pub g: Vec<usize>,
}

impl MappingPair {
    /// Checks that `f` maps `0..n` into `0..m` and `g` maps `0..m` into `0..n`.
    pub fn new(f: Vec<usize>, g: Vec<usize>) -> Result<Self> {
        let (n, m) = (f.len(), g.len());
        if let Some(&bad) = f.iter().find(|&&j| j >= m) {
            return Err(Error::InvalidParameter(format!("f maps into {bad}, but m = {m}")));
        }
        if let Some(&bad) = g.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidParameter(format!("g maps into {bad}, but n = {n}")));
        }
        Ok(Self { f, g })
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn m(&self) -> usize {
        self.g.len()
    }

    /// The same pair seen from the other side: maps Y→X first.
    pub fn swapped(&self) -> MappingPair {
        MappingPair {
            f: self.g.clone(),
            g: self.f.clone(),
        }
    }

    /// Column of the single 1 in each row of the dense representation.
    pub fn dense_columns(&self) -> Vec<usize> {
        let m = self.m();
        self.f
            .iter()
            .copied()
            .chain(self.g.iter().map(|&i| m + i))
            .collect()
    }

    /// Whether `f` is a bijection and `g` its inverse.
    pub fn is_bijective(&self) -> bool {
        self.n() == self.m() && self.g.iter().enumerate().all(|(j, &i)| self.f[i] == j)
    }

    pub fn to_point(&self) -> SoftBimapping {
        vertex_to_point(self)
    }
}

/// The 0/1 point with ones at `(i, f[i])` and `(j, g[j])`.
pub fn vertex_to_point(pair: &MappingPair) -> SoftBimapping {
    let (n, m) = (pair.n(), pair.m());
    let mut fblock = DMatrix::zeros(n, m);
    let mut gblock = DMatrix::zeros(m, n);
    for (i, &j) in pair.f.iter().enumerate() {
        fblock[(i, j)] = 1.0;
    }
    for (j, &i) in pair.g.iter().enumerate() {
        gblock[(j, i)] = 1.0;
    }
    SoftBimapping { fblock, gblock }
}

/// Linear minimization over the polytope.
///
/// Each row of the structural blocks independently picks its smallest
/// gradient entry; ties go to the lowest column. The second value counts
/// rows whose minimum is not unique (compared exactly).
pub fn lmo(gradient: &DMatrix<f64>, n: usize, m: usize) -> Result<(MappingPair, usize)> {
    let size = n + m;
    if gradient.shape() != (size, size) {
        return Err(Error::DimensionMismatch {
            expected: format!("{size}x{size} gradient"),
            found: format!("{}x{}", gradient.nrows(), gradient.ncols()),
        });
    }
    let mut ties = 0;
    let mut pick = |row: usize, cols: std::ops::Range<usize>| -> usize {
        let offset = cols.start;
        let mut best = cols.start;
        let mut tied = false;
        for col in cols.skip(1) {
            let v = gradient[(row, col)];
            let b = gradient[(row, best)];
            if v < b {
                best = col;
                tied = false;
            } else if v == b {
                tied = true;
            }
        }
        if tied {
            ties += 1;
        }
        best - offset
    };
    let f = (0..n).map(|i| pick(i, 0..m)).collect();
    let g = (0..m).map(|j| pick(n + j, m..m + n)).collect();
    Ok((MappingPair { f, g }, ties))
}

/// Nearest vertex in Frobenius norm: the row-wise argmax, lowest index
/// on ties.
pub fn project_to_vertex(s: &SoftBimapping) -> MappingPair {
    fn argmax_rows(block: &DMatrix<f64>) -> Vec<usize> {
        block
            .row_iter()
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
    MappingPair {
        f: argmax_rows(&s.fblock),
        g: argmax_rows(&s.gblock),
    }
}

/// Number of vertices, `m^n · n^m`, or `None` on overflow.
pub fn vertex_count(n: usize, m: usize) -> Option<u128> {
    let a = (m as u128).checked_pow(n.try_into().ok()?)?;
    let b = (n as u128).checked_pow(m.try_into().ok()?)?;
    a.checked_mul(b)
}

/// Every vertex exactly once, in mixed-radix order over `(f, g)`.
pub fn enumerate_vertices(n: usize, m: usize) -> Result<VertexIter> {
    enumerate_vertices_with_limit(n, m, VERTEX_ENUMERATION_LIMIT)
}

pub fn enumerate_vertices_with_limit(n: usize, m: usize, limit: u128) -> Result<VertexIter> {
    let count = vertex_count(n, m).unwrap_or(u128::MAX);
    if count > limit {
        return Err(Error::TooLarge { count, limit });
    }
    Ok(VertexIter {
        next: Some(MappingPair {
            f: vec![0; n],
            g: vec![0; m],
        }),
    })
}

/// Iterator returned by [`enumerate_vertices`].
#[derive(Debug, Clone)]
pub struct VertexIter {
    next: Option<MappingPair>,
}

impl Iterator for VertexIter {
    type Item = MappingPair;

    fn next(&mut self) -> Option<MappingPair> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let (n, m) = (succ.n(), succ.m());
        let advanced = increment(&mut succ.f, m) || increment(&mut succ.g, n);
        if advanced {
            self.next = Some(succ);
        }
        Some(current)
    }
}

/// Odometer step; returns false after wrapping around completely.
fn increment(digits: &mut [usize], radix: usize) -> bool {
    for d in digits.iter_mut() {
        *d += 1;
        if *d < radix {
            return true;
        }
        *d = 0;
    }
    false
}

/// Dense indices `(row, col)` inside the structural blocks where `s` is
/// exactly zero. Two points lie on the same face iff these sets agree.
pub fn face_indicator(s: &SoftBimapping) -> BTreeSet<(usize, usize)> {
    let (n, m) = (s.n(), s.m());
    let mut zeros = BTreeSet::new();
    for i in 0..n {
        for j in 0..m {
            if s.fblock[(i, j)] == 0.0 {
                zeros.insert((i, j));
            }
        }
    }
    for i in 0..m {
        for j in 0..n {
            if s.gblock[(i, j)] == 0.0 {
                zeros.insert((n + i, m + j));
            }
        }
    }
    zeros
}
