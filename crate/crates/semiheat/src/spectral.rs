//! Exact functional calculus of the graph generator.
//!
//! Everything downstream (approximation operators, norms, paraproducts,
//! solvers) is driven by one dense symmetric eigendecomposition per graph:
//! `L psi_i = lambda_i psi_i` with `<psi_i, psi_j>_mu = delta_ij`. Functions
//! of `L` are then diagonal, and `phi(L) f = basis * diag(phi(lambda)) *
//! forward * f` where `forward = basis^T D_mu`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::GraphSpace;
use crate::quad::TimeQuad;

pub type Field = DVector<f64>;

/// Eigenpairs of `L` in the `mu`-weighted inner product.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    lambdas: DVector<f64>,
    /// Columns are eigenvectors, `mu`-orthonormal.
    basis: DMatrix<f64>,
    /// `basis^T * D_mu`; maps vertex coordinates to spectral coordinates.
    forward: DMatrix<f64>,
    graph: GraphSpace,
}

impl SpectralDecomposition {
    pub fn lambdas(&self) -> &DVector<f64> {
        &self.lambdas
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambdas[self.n() - 1]
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn forward_matrix(&self) -> &DMatrix<f64> {
        &self.forward
    }

    pub fn graph(&self) -> &GraphSpace {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    pub fn to_spectral(&self, f: &Field) -> DVector<f64> {
        &self.forward * f
    }

    pub fn from_spectral(&self, coefs: &DVector<f64>) -> Field {
        &self.basis * coefs
    }

    /// `mu`-weighted inner product of two fields.
    pub fn inner(&self, f: &Field, g: &Field) -> f64 {
        let mu = self.graph.measure();
        (0..self.n()).map(|x| f[x] * g[x] * mu[x]).sum()
    }

    /// `mu`-weighted `L^p` norm (`p = inf` is the plain max).
    pub fn lp_norm(&self, f: &Field, p: f64) -> f64 {
        if p.is_infinite() {
            return f.amax();
        }
        let mu = self.graph.measure();
        (0..self.n()).map(|x| f[x].abs().powf(p) * mu[x]).sum::<f64>().powf(1.0 / p)
    }

    /// Rebuilds a decomposition from cached data, revalidating dimensions.
    pub fn from_parts(graph: GraphSpace, lambdas: DVector<f64>, basis: DMatrix<f64>) -> Result<Self> {
        let n = graph.n();
        if lambdas.len() != n || basis.nrows() != n || basis.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: lambdas.len() });
        }
        let mut forward = basis.transpose();
        for (j, &mu) in graph.measure().iter().enumerate() {
            forward.column_mut(j).scale_mut(mu);
        }
        Ok(SpectralDecomposition { lambdas, basis, forward, graph })
    }
}

/// Diagonalizes `L f = (1/m)(f - K f)` in the `mu`-weighted inner product.
///
/// Requires `mu` proportional to `m` (otherwise `L` is not self-adjoint in
/// `<.,.>_mu` and the request is rejected). The conjugated matrix
/// `D_sqrt(mu) L D_1/sqrt(mu)` is symmetric and is what gets decomposed.
pub fn diagonalize(graph: &GraphSpace) -> Result<SpectralDecomposition> {
    let n = graph.n();
    let m = graph.mass();
    let mu = graph.measure();
    let ratios: Vec<f64> = (0..n).map(|x| mu[x] / m[x]).collect();
    let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let rmax = ratios.iter().cloned().fold(0.0f64, f64::max);
    if (rmax - rmin) > 1e-10 * rmax {
        return Err(Error::NotSelfAdjoint { spread: rmax - rmin });
    }

    let sqrt_mu: Vec<f64> = mu.iter().map(|&v| v.sqrt()).collect();
    let mut sym = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in 0..n {
            let l_xy = (if x == y { 1.0 } else { 0.0 } - graph.kernel()[(x, y)]) / m[x];
            sym[(x, y)] = sqrt_mu[x] * l_xy / sqrt_mu[y];
        }
    }
    // enforce exact symmetry before the solver
    for x in 0..n {
        for y in (x + 1)..n {
            let avg = 0.5 * (sym[(x, y)] + sym[(y, x)]);
            sym[(x, y)] = avg;
            sym[(y, x)] = avg;
        }
    }

    let (values, vectors) = crate::eigh::symmetric_eigen(sym);
    let mut lambdas = DVector::zeros(n);
    let mut basis = DMatrix::zeros(n, n);
    for i in 0..n {
        lambdas[i] = values[i].max(0.0);
        let col = vectors.column(i);
        // undo the conjugation and fix the sign so the largest entry is positive
        let mut v = DVector::from_fn(n, |x, _| col[x] / sqrt_mu[x]);
        let lead = v.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        if lead < 0.0 {
            v.neg_mut();
        }
        basis.set_column(i, &v);
    }
    lambdas[0] = 0.0;

    SpectralDecomposition::from_parts(graph.clone(), lambdas, basis)
}

/// `phi(L) f` for a scalar function evaluated on the spectrum.
pub fn apply_fn(s: &SpectralDecomposition, phi: impl Fn(f64) -> f64, f: &Field) -> Result<Field> {
    let mut coefs = s.to_spectral(f);
    for i in 0..s.n() {
        let v = phi(s.lambdas()[i]);
        if !v.is_finite() {
            return Err(Error::NonFiniteFilter { lambda: s.lambdas()[i] });
        }
        coefs[i] *= v;
    }
    Ok(s.from_spectral(&coefs))
}

/// `phi_a(x) = e^{-x} sum_{k<a} x^k / k!`, the low-pass profile of `P_t^(a)`.
/// `phi_a(0) = 1` and `t d/dt phi_a(t lam) = -(t lam)^a e^{-t lam} / (a-1)!`.
pub fn phi_low(a: usize, x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..a {
        term *= x / k as f64;
        sum += term;
    }
    (-x).exp() * sum
}

/// `(t lam)^a e^{-t lam}`, the band-pass profile of `Q_t^(a)`.
pub fn q_profile(a: usize, x: f64) -> f64 {
    x.powi(a as i32) * (-x).exp()
}

/// `gamma_a = (a-1)!` for integer `a`.
pub fn gamma_const(a: usize) -> f64 {
    (1..a).map(|k| k as f64).product()
}

/// Heat semigroup `e^{-tL} f`.
pub fn heat(s: &SpectralDecomposition, t: f64, f: &Field) -> Result<Field> {
    if t < 0.0 {
        return Err(Error::InvalidParameter { name: "t", reason: format!("negative time {t}") });
    }
    apply_fn(s, |lam| (-t * lam).exp(), f)
}

/// Band-pass operator `Q_t^(a) f = (tL)^a e^{-tL} f`.
pub fn q_op(s: &SpectralDecomposition, a: usize, t: f64, f: &Field) -> Result<Field> {
    if a == 0 {
        return Err(Error::InvalidParameter { name: "a", reason: "a = 0 is the semigroup; use heat".into() });
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter { name: "t", reason: format!("negative time {t}") });
    }
    apply_fn(s, |lam| q_profile(a, t * lam), f)
}

/// Low-pass operator `P_t^(a) f = phi_a(tL) f`.
pub fn p_op(s: &SpectralDecomposition, a: usize, t: f64, f: &Field) -> Result<Field> {
    if a == 0 {
        return Err(Error::InvalidParameter { name: "a", reason: "a must be >= 1".into() });
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter { name: "t", reason: format!("negative time {t}") });
    }
    apply_fn(s, |lam| phi_low(a, t * lam), f)
}

/// `Gamma(f,g)` on the underlying graph.
pub fn carre_du_champ(s: &SpectralDecomposition, f: &Field, g: &Field) -> Field {
    s.graph().carre_du_champ(f, g)
}

/// Relative sup-norm defect of the Calderon reproducing formula
/// `f = gamma_a^{-1} int_0^1 Q_t^(a) f dt/t + P_1^(a) f`
/// under the given quadrature. Exact per eigenvalue up to quadrature error.
pub fn calderon_residual(
    s: &SpectralDecomposition,
    a: usize,
    f: &Field,
    quad: &TimeQuad,
) -> Result<f64> {
    if quad.is_empty() {
        return Err(Error::EmptyQuadrature);
    }
    if a == 0 {
        return Err(Error::InvalidParameter { name: "a", reason: "a must be >= 1".into() });
    }
    let sup = f.amax();
    if sup == 0.0 {
        return Ok(0.0);
    }
    let ga = gamma_const(a);
    let mut coefs = s.to_spectral(f);
    for i in 0..s.n() {
        let lam = s.lambdas()[i];
        let integral = quad.integrate(|t| q_profile(a, t * lam)) / ga;
        let reproduced = integral + phi_low(a, lam);
        coefs[i] *= 1.0 - reproduced;
    }
    Ok(s.from_spectral(&coefs).amax() / sup)
}

/// Batched evaluation used by the paraproduct engine and the norms: applies a
/// per-(mode, column) filter matrix to one field, producing the matrix whose
/// column `k` is `filters[.,k](L) f`.
pub fn apply_filter_columns(
    s: &SpectralDecomposition,
    filters: &DMatrix<f64>,
    f: &Field,
) -> DMatrix<f64> {
    let coefs = s.to_spectral(f);
    let mut scaled = filters.clone();
    for i in 0..s.n() {
        let c = coefs[i];
        scaled.row_mut(i).scale_mut(c);
    }
    s.basis() * scaled
}
