//! The block system `(V, U, W)` of a pair of spaces, the distortion of a
//! mapping pair, the exponential surrogate `σ_c` with its gradient, and
//! the non-convexity diagnostics of `σ_c`.
//!
//! Layouts, with `X` (n×n) and `Y` (m×m) the distance matrices:
//!
//! ```text
//! V = [X 0]   U = [Y 0]   W = [0 Y]   rows (m, n), cols (n, m)
//!     [0 Y]       [0 X]       [X 0]
//! ```
//!
//! `σ_c(S) = ⟨S, M(S)⟩` where
//! `M(S) = c^V S c^-U + c^-V S c^U + (c^W S c^-W + c^-W S c^W)^T` is
//! self-adjoint, so `∇σ_c(S) = 2 M(S)`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::metric::MetricSpace;
use crate::polytope::{MappingPair, SoftBimapping};

/// Largest value any exponential cache may reach.
pub const OVERFLOW_GUARD: f64 = 1e300;

/// Default cap on the Hessian dimension `(n+m)^2` for the exact validator.
pub const HESSIAN_LIMIT: usize = 400;

/// Precomputed matrices for a fixed pair of spaces and a fixed base `c`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    n: usize,
    m: usize,
    c: f64,
    d_max: f64,
    x: DMatrix<f64>,
    y: DMatrix<f64>,
    v: DMatrix<f64>,
    u: DMatrix<f64>,
    w: DMatrix<f64>,
    exp_v_pos: DMatrix<f64>,
    exp_v_neg: DMatrix<f64>,
    exp_u_pos: DMatrix<f64>,
    exp_u_neg: DMatrix<f64>,
    exp_w_pos: DMatrix<f64>,
    exp_w_neg: DMatrix<f64>,
}

/// Builds `V`, `U`, `W` and their entrywise exponentials `c^{±V}` etc.
///
/// The math does not depend on which space is larger; the solver still
/// orients inputs so that `a` is the larger one.
pub fn build_blocks(a: &MetricSpace, b: &MetricSpace, c: f64) -> Result<BlockSystem> {
    if !(c >= 1.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be a finite value >= 1, got {c}")));
    }
    let x = a.dist().clone();
    let y = b.dist().clone();
    let (n, m) = (x.nrows(), y.nrows());
    let d_max = a.diameter().max(b.diameter());
    let top = c.powf(d_max);
    if !top.is_finite() || top > OVERFLOW_GUARD {
        return Err(Error::OverflowRisk { c, d_max });
    }

    let size = n + m;
    let mut v = DMatrix::zeros(size, size);
    v.view_mut((0, 0), (n, n)).copy_from(&x);
    v.view_mut((n, n), (m, m)).copy_from(&y);
    let mut u = DMatrix::zeros(size, size);
    u.view_mut((0, 0), (m, m)).copy_from(&y);
    u.view_mut((m, m), (n, n)).copy_from(&x);
    let mut w = DMatrix::zeros(size, size);
    w.view_mut((0, n), (m, m)).copy_from(&y);
    w.view_mut((m, 0), (n, n)).copy_from(&x);

    let pos = |mat: &DMatrix<f64>| mat.map(|d| c.powf(d));
    let neg = |mat: &DMatrix<f64>| mat.map(|d| c.powf(-d));
    Ok(BlockSystem {
        n,
        m,
        c,
        d_max,
        exp_v_pos: pos(&v),
        exp_v_neg: neg(&v),
        exp_u_pos: pos(&u),
        exp_u_neg: neg(&u),
        exp_w_pos: pos(&w),
        exp_w_neg: neg(&w),
        x,
        y,
        v,
        u,
        w,
    })
}

impl BlockSystem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `n + m`, the side of every block matrix.
    pub fn size(&self) -> usize {
        self.n + self.m
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `max{diam X, diam Y}`.
    pub fn d_max(&self) -> f64 {
        self.d_max
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// The six cached exponentials in the order
    /// `c^V, c^-V, c^U, c^-U, c^W, c^-W`.
    pub fn exponentials(&self) -> [&DMatrix<f64>; 6] {
        [
            &self.exp_v_pos,
            &self.exp_v_neg,
            &self.exp_u_pos,
            &self.exp_u_neg,
            &self.exp_w_pos,
            &self.exp_w_neg,
        ]
    }

    fn check_pair(&self, pair: &MappingPair) -> Result<()> {
        if pair.n() != self.n || pair.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: format!("mapping pair for {}+{} points", self.n, self.m),
                found: format!("{}+{}", pair.n(), pair.m()),
            });
        }
        Ok(())
    }

    fn check_dense(&self, s: &DMatrix<f64>) -> Result<()> {
        let size = self.size();
        if s.shape() != (size, size) {
            return Err(Error::DimensionMismatch {
                expected: format!("{size}x{size}"),
                found: format!("{}x{}", s.nrows(), s.ncols()),
            });
        }
        Ok(())
    }

    fn check_point(&self, s: &SoftBimapping) -> Result<()> {
        if s.n() != self.n || s.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: format!("point for {}+{} points", self.n, self.m),
                found: format!("{}+{}", s.n(), s.m()),
            });
        }
        Ok(())
    }

    /// `dis R = ‖V − R U Rᵀ + R W − Wᵀ Rᵀ‖_∞`, evaluated by index lookup.
    pub fn distortion(&self, pair: &MappingPair) -> Result<f64> {
        self.check_pair(pair)?;
        let (x, y) = (&self.x, &self.y);
        let (f, g) = (&pair.f, &pair.g);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((x[(i, j)] - y[(f[i], f[j])]).abs());
            }
        }
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                worst = worst.max((y[(i, j)] - x[(g[i], g[j])]).abs());
            }
        }
        for i in 0..self.n {
            for j in 0..self.m {
                worst = worst.max((y[(f[i], j)] - x[(i, g[j])]).abs());
            }
        }
        Ok(worst)
    }

    /// The distance difference matrix `D = V − R U Rᵀ + R W − Wᵀ Rᵀ`.
    pub fn difference_matrix(&self, pair: &MappingPair) -> Result<DMatrix<f64>> {
        self.check_pair(pair)?;
        let (n, m) = (self.n, self.m);
        let (x, y) = (&self.x, &self.y);
        let (f, g) = (&pair.f, &pair.g);
        let mut d = DMatrix::zeros(n + m, n + m);
        for i in 0..n {
            for j in 0..n {
                d[(i, j)] = x[(i, j)] - y[(f[i], f[j])];
            }
        }
        for i in 0..m {
            for j in 0..m {
                d[(n + i, n + j)] = y[(i, j)] - x[(g[i], g[j])];
            }
        }
        for i in 0..n {
            for j in 0..m {
                let cross = y[(f[i], j)] - x[(i, g[j])];
                d[(i, n + j)] = cross;
                d[(n + j, i)] = -cross;
            }
        }
        Ok(d)
    }

    /// `M(S)`, half the gradient, for an arbitrary square matrix `S`.
    pub fn operator(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_dense(s)?;
        let mut out = &self.exp_v_pos * s * &self.exp_u_neg;
        out += &self.exp_v_neg * s * &self.exp_u_pos;
        let cross = &self.exp_w_pos * s * &self.exp_w_neg + &self.exp_w_neg * s * &self.exp_w_pos;
        out += cross.transpose();
        Ok(out)
    }

    /// `M(R)` for a vertex. `R B` only selects rows of `B`, so each term
    /// costs a single dense product.
    pub fn operator_at_vertex(&self, pair: &MappingPair) -> Result<DMatrix<f64>> {
        self.check_pair(pair)?;
        let cols = pair.dense_columns();
        let gather = |b: &DMatrix<f64>| DMatrix::from_fn(cols.len(), b.ncols(), |i, j| b[(cols[i], j)]);
        let mut out = &self.exp_v_pos * gather(&self.exp_u_neg);
        out += &self.exp_v_neg * gather(&self.exp_u_pos);
        let cross =
            &self.exp_w_pos * gather(&self.exp_w_neg) + &self.exp_w_neg * gather(&self.exp_w_pos);
        out += cross.transpose();
        Ok(out)
    }

    /// The quadratic form `⟨S, M(S)⟩` on any square matrix, including
    /// differences of points that lie outside the polytope.
    pub fn quadratic_form(&self, s: &DMatrix<f64>) -> Result<f64> {
        let value = s.dot(&self.operator(s)?);
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteResult)
        }
    }

    /// `σ_c(S)`.
    pub fn sigma(&self, s: &SoftBimapping) -> Result<f64> {
        self.check_point(s)?;
        self.quadratic_form(&s.to_dense())
    }

    /// `∇σ_c(S) = 2 M(S)` over the full square matrix.
    pub fn sigma_gradient(&self, s: &SoftBimapping) -> Result<DMatrix<f64>> {
        self.check_point(s)?;
        let grad = self.operator(&s.to_dense())? * 2.0;
        if grad.iter().all(|v| v.is_finite()) {
            Ok(grad)
        } else {
            Err(Error::NonFiniteResult)
        }
    }

    /// `‖c^D + c^-D‖₁` for the difference matrix `D` of a vertex. Equals
    /// `σ_c(R) − 2(n+m)²`.
    pub fn relaxed_norm(&self, pair: &MappingPair) -> Result<f64> {
        let d = self.difference_matrix(pair)?;
        let c = self.c;
        Ok(d.iter().map(|&v| c.powf(v) + c.powf(-v)).sum())
    }

    /// Upper bound on `nconv(σ_c)` from the spectral argument, in
    /// `O((n+m)²)` time.
    pub fn nconv_bound(&self) -> NconvReport {
        let size = self.size() as f64;
        let size4 = size.powi(4);
        let w1: f64 = self.w.sum();
        let w2sq: f64 = self.w.norm_squared();
        let p_max = if self.d_max > 0.0 {
            (2.0 * 2f64.sqrt() + 4.0) * size * size * (size * size * w2sq - w1 * w1).max(0.0).sqrt()
                / self.d_max
                + 6.0
        } else {
            6.0
        };

        let alpha_bound = if self.c == 1.0 || self.d_max == 0.0 {
            0.0
        } else {
            let ch = self.c.powf(2.0 * self.d_max) + self.c.powf(-2.0 * self.d_max) - 2.0;
            let ew_pos: f64 = self.exp_w_pos.sum();
            let ew_neg: f64 = self.exp_w_neg.sum();
            let radicand = 16.0 * size4 + ch * p_max - 16.0 / size4 * (ew_pos * ew_neg).powi(2);
            let q = radicand.max(0.0).sqrt() / size;
            if q.is_finite() {
                0.5 - 1.0 / (q + 2.0)
            } else {
                0.5f64.next_down()
            }
        };

        NconvReport {
            alpha_bound,
            d_max: self.d_max,
            p_max,
            exact_nconv: None,
            lambda_plus: None,
            lambda_minus: None,
        }
    }

    /// The constant Hessian of `σ_c` as an `(n+m)²×(n+m)²` matrix acting
    /// on row-major vectorizations, with the commutation matrix `K` on the
    /// left of the cross terms:
    /// `H = 2(c^V⊗c^-U + c^-V⊗c^U + K(c^W⊗c^-Wᵀ + c^-W⊗c^Wᵀ))`.
    pub fn hessian(&self) -> Result<DMatrix<f64>> {
        self.hessian_with_limit(HESSIAN_LIMIT)
    }

    pub fn hessian_with_limit(&self, limit: usize) -> Result<DMatrix<f64>> {
        let size = self.size();
        let dim = size * size;
        if dim > limit {
            return Err(Error::TooLarge {
                count: dim as u128,
                limit: limit as u128,
            });
        }
        let (ev, emv) = (&self.exp_v_pos, &self.exp_v_neg);
        let (eu, emu) = (&self.exp_u_pos, &self.exp_u_neg);
        let (ew, emw) = (&self.exp_w_pos, &self.exp_w_neg);
        Ok(DMatrix::from_fn(dim, dim, |row, col| {
            let (i, j) = (row / size, row % size);
            let (k, l) = (col / size, col % size);
            2.0 * (ev[(i, k)] * emu[(j, l)]
                + emv[(i, k)] * eu[(j, l)]
                + ew[(j, k)] * emw[(l, i)]
                + emw[(j, k)] * ew[(l, i)])
        }))
    }

    /// Exact `nconv(σ_c) = λ⁻/(λ⁺ + λ⁻)` from a full eigendecomposition of
    /// the Hessian. Only for small instances.
    pub fn hessian_nconv_exact(&self) -> Result<NconvReport> {
        self.hessian_nconv_exact_with_limit(HESSIAN_LIMIT)
    }

    pub fn hessian_nconv_exact_with_limit(&self, limit: usize) -> Result<NconvReport> {
        let h = self.hessian_with_limit(limit)?;
        let eigen = SymmetricEigen::new(h);
        let (mut plus, mut minus) = (0.0, 0.0);
        for &lambda in eigen.eigenvalues.iter() {
            if lambda > 0.0 {
                plus += lambda;
            } else {
                minus -= lambda;
            }
        }
        let mut report = self.nconv_bound();
        report.exact_nconv = Some(minus / (plus + minus));
        report.lambda_plus = Some(plus);
        report.lambda_minus = Some(minus);
        Ok(report)
    }
}

/// Non-convexity diagnostics of `σ_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct NconvReport {
    /// Upper bound on `nconv(σ_c)`, always in `[0, ½)`.
    pub alpha_bound: f64,
    pub d_max: f64,
    pub p_max: f64,
    pub exact_nconv: Option<f64>,
    pub lambda_plus: Option<f64>,
    pub lambda_minus: Option<f64>,
}

impl NconvReport {
    /// `(λ⁺ − 8(n+m)²)/(2λ⁺ − 8(n+m)²)`, which agrees with the exact value
    /// because `λ⁺ − λ⁻ = tr H = 8(n+m)²`.
    pub fn nconv_from_trace(&self, size: usize) -> Option<f64> {
        let trace = 8.0 * (size * size) as f64;
        self.lambda_plus
            .map(|plus| (plus - trace) / (2.0 * plus - trace))
    }
}

/// Result of [`safe_c_threshold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafeC {
    pub value: f64,
    /// The exact threshold exceeded [`OVERFLOW_GUARD`] and was clamped, so
    /// it no longer certifies anything.
    pub capped: bool,
}

/// `(((n+m)² − n − m)/2)^{1/ρ}`: any `c` at or above it makes every
/// vertex minimizer of the relaxed norm a distortion minimizer.
pub fn safe_c_threshold(n: usize, m: usize, rho: f64) -> Result<SafeC> {
    if !(rho > 0.0) {
        return Err(Error::NonpositiveGap(rho));
    }
    let size = (n + m) as f64;
    let base = (size * size - size) / 2.0;
    let value = base.powf(1.0 / rho);
    if value.is_finite() && value <= OVERFLOW_GUARD {
        Ok(SafeC {
            value,
            capped: false,
        })
    } else {
        Ok(SafeC {
            value: OVERFLOW_GUARD,
            capped: true,
        })
    }
}
