//! Finite metric spaces given by their distance matrices, plus the scalar
//! invariants the solver needs: diameter, radius, distortion gap and the
//! trivial lower bound on the Gromov-Hausdorff distance.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Absolute slack allowed by the strict triangle-inequality check.
pub const TRIANGLE_TOLERANCE: f64 = 1e-12;

/// Default cap on the number of distance differences enumerated by
/// [`distortion_gap`].
pub const RHO_WORK_LIMIT: u128 = 100_000_000;

/// A validated finite metric space.
///
/// The matrix is symmetric with an exactly zero diagonal and nonnegative
/// finite entries. Diameter and radius are cached at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    dist: DMatrix<f64>,
    diameter: f64,
    radius: f64,
}

impl MetricSpace {
    /// Validates symmetry, zero diagonal and nonnegativity.
    pub fn new(dist: DMatrix<f64>) -> Result<Self> {
        validate(dist, false)
    }

    /// Like [`MetricSpace::new`] but also checks the triangle inequality.
    pub fn new_strict(dist: DMatrix<f64>) -> Result<Self> {
        validate(dist, true)
    }

    /// Builds the Euclidean distance matrix of a point set. The upper
    /// triangle is computed once and mirrored so the result is exactly
    /// symmetric.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let k = points.len();
        let mut dist = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in (i + 1)..k {
                let d = points[i]
                    .as_ref()
                    .iter()
                    .zip(points[j].as_ref())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                dist[(i, j)] = d;
                dist[(j, i)] = d;
            }
        }
        Self::new(dist)
    }

    pub fn size(&self) -> usize {
        self.dist.nrows()
    }

    pub fn dist(&self) -> &DMatrix<f64> {
        &self.dist
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Smallest eccentricity: `min_x max_x' d(x, x')`.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Divides every distance by `factor`.
    pub fn scaled_down(&self, factor: f64) -> MetricSpace {
        let dist = self.dist.map(|d| d / factor);
        let (diameter, radius) = extremes(&dist);
        MetricSpace {
            dist,
            diameter,
            radius,
        }
    }

    /// Relabels points: point `i` of the result is point `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> MetricSpace {
        let k = self.size();
        assert_eq!(perm.len(), k, "permutation length must match the space size");
        let dist = DMatrix::from_fn(k, k, |i, j| self.dist[(perm[i], perm[j])]);
        MetricSpace {
            dist,
            diameter: self.diameter,
            radius: self.radius,
        }
    }

    /// Distinct distance values, including zero, in ascending order.
    pub fn distinct_distances(&self) -> Vec<f64> {
        let k = self.size();
        let mut values = Vec::with_capacity(k * (k - 1) / 2 + 1);
        values.push(0.0);
        for i in 0..k {
            for j in (i + 1)..k {
                values.push(self.dist[(i, j)]);
            }
        }
        values.sort_unstable_by(f64::total_cmp);
        values.dedup();
        values
    }
}

/// Checks a square matrix and wraps it into a [`MetricSpace`].
pub fn validate(dist: DMatrix<f64>, strict: bool) -> Result<MetricSpace> {
    let (rows, cols) = dist.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows < 2 {
        return Err(Error::TooFewPoints { size: rows });
    }
    for i in 0..rows {
        if dist[(i, i)] != 0.0 {
            return Err(Error::NonzeroDiagonal { i });
        }
        for j in (i + 1)..rows {
            let (a, b) = (dist[(i, j)], dist[(j, i)]);
            if !a.is_finite() || a < 0.0 {
                return Err(Error::NegativeDistance { i, j });
            }
            if !b.is_finite() || b < 0.0 {
                return Err(Error::NegativeDistance { i: j, j: i });
            }
            if a != b {
                return Err(Error::AsymmetricMatrix { i, j });
            }
        }
    }
    if strict {
        check_triangle(&dist)?;
    }
    let (diameter, radius) = extremes(&dist);
    Ok(MetricSpace {
        dist,
        diameter,
        radius,
    })
}

fn check_triangle(dist: &DMatrix<f64>) -> Result<()> {
    let k = dist.nrows();
    for i in 0..k {
        for k2 in (i + 1)..k {
            let direct = dist[(i, k2)];
            for j in 0..k {
                if j == i || j == k2 {
                    continue;
                }
                if direct > dist[(i, j)] + dist[(j, k2)] + TRIANGLE_TOLERANCE {
                    return Err(Error::TriangleViolation { i, j, k: k2 });
                }
            }
        }
    }
    Ok(())
}

fn extremes(dist: &DMatrix<f64>) -> (f64, f64) {
    let mut diameter = 0.0f64;
    let mut radius = f64::INFINITY;
    for row in dist.row_iter() {
        let ecc = row.iter().copied().fold(0.0, f64::max);
        diameter = diameter.max(ecc);
        radius = radius.min(ecc);
    }
    (diameter, radius)
}

/// The factor that was divided out by [`normalize_pair`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationRecord {
    pub scale: f64,
}

impl NormalizationRecord {
    pub fn rescale(&self, value: f64) -> f64 {
        value * self.scale
    }
}

/// Divides both spaces by `max{diam a, diam b}` so the larger diameter is 1.
pub fn normalize_pair(
    a: &MetricSpace,
    b: &MetricSpace,
) -> Result<(MetricSpace, MetricSpace, NormalizationRecord)> {
    let scale = a.diameter().max(b.diameter());
    if scale <= 0.0 {
        return Err(Error::DegenerateSpace);
    }
    Ok((
        a.scaled_down(scale),
        b.scaled_down(scale),
        NormalizationRecord { scale },
    ))
}

/// Smallest positive difference between distinct values of
/// `{|d_a(x,x') - d_b(y,y')|}`; `+inf` when that set has a single value.
pub fn distortion_gap(a: &MetricSpace, b: &MetricSpace) -> Result<f64> {
    distortion_gap_with_limit(a, b, RHO_WORK_LIMIT)
}

/// [`distortion_gap`] with an explicit cap on the number of enumerated
/// differences. The cap applies to the product of the distinct-distance
/// counts of both spaces.
pub fn distortion_gap_with_limit(a: &MetricSpace, b: &MetricSpace, limit: u128) -> Result<f64> {
    let da = a.distinct_distances();
    let db = b.distinct_distances();
    let work = da.len() as u128 * db.len() as u128;
    if work > limit {
        return Err(Error::WorkLimitExceeded { work, limit });
    }
    let mut deltas = Vec::with_capacity(work as usize);
    for &x in &da {
        for &y in &db {
            deltas.push((x - y).abs());
        }
    }
    deltas.sort_unstable_by(f64::total_cmp);
    deltas.dedup();
    Ok(deltas
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min))
}

/// Distortion gap on the scale of [`normalize_pair`], taken on the input
/// distances and divided by the scale afterwards. Dividing first would
/// split mathematically equal differences such as 2/3 − 1/2 and 1/2 − 1/3
/// into distinct floats and report a gap of one ulp.
pub fn normalized_distortion_gap(a: &MetricSpace, b: &MetricSpace, limit: u128) -> Result<f64> {
    let scale = a.diameter().max(b.diameter());
    if scale <= 0.0 {
        return Err(Error::DegenerateSpace);
    }
    Ok(distortion_gap_with_limit(a, b, limit)? / scale)
}

/// `½·max{|diam a − diam b|, |rad a − rad b|}`.
pub fn trivial_lower_bound(a: &MetricSpace, b: &MetricSpace) -> f64 {
    0.5 * (a.diameter() - b.diameter())
        .abs()
        .max((a.radius() - b.radius()).abs())
}
