//! Quadrature rules and time grids.
//!
//! The `dt/t` integrals over `(0,1]` behind the paraproducts and norms are
//! evaluated with composite Gauss-Legendre in `u = log t`: the integrands are
//! smooth in `log t` on a finite spectrum and vanish polynomially at `t = 0`,
//! so the truncation at `t_min` costs `O(t_min)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-based initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
                nodes[i] = -x;
                nodes[n - 1 - i] = x;
                weights[n - 1 - i] = weights[i];
                break;
            }
        }
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Quadrature for `int_0^1 F(t) dt/t`, nodes in `(t_min, 1)`.
#[derive(Debug, Clone)]
pub struct TimeQuad {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub spec: QuadSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub panels: usize,
    pub nodes_per_panel: usize,
    pub t_min: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec { panels: 8, nodes_per_panel: 32, t_min: 1e-10 }
    }
}

impl QuadSpec {
    pub fn build(self) -> Result<TimeQuad> {
        if self.panels == 0 || self.nodes_per_panel == 0 {
            return Err(Error::EmptyQuadrature);
        }
        if !(self.t_min > 0.0 && self.t_min < 1.0) {
            return Err(Error::InvalidParameter {
                name: "t_min",
                reason: format!("must lie in (0,1), got {}", self.t_min),
            });
        }
        let (xs, ws) = gauss_legendre(self.nodes_per_panel);
        let lo = self.t_min.ln();
        let width = -lo / self.panels as f64;
        let mut nodes = Vec::with_capacity(self.panels * self.nodes_per_panel);
        let mut weights = Vec::with_capacity(nodes.capacity());
        for p in 0..self.panels {
            let a = lo + p as f64 * width;
            for (x, w) in xs.iter().zip(&ws) {
                let u = a + 0.5 * width * (x + 1.0);
                nodes.push(u.exp());
                weights.push(0.5 * width * w);
            }
        }
        Ok(TimeQuad { nodes, weights, spec: self })
    }

    /// The same rule with every panel carrying `factor` times more nodes.
    pub fn refined(self, factor: usize) -> Self {
        QuadSpec { nodes_per_panel: self.nodes_per_panel * factor, ..self }
    }

    pub fn id(&self) -> String {
        format!("loggauss-{}x{}-tmin{:.0e}", self.panels, self.nodes_per_panel, self.t_min)
    }
}

impl TimeQuad {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `int_0^1 f(t) dt/t` of a scalar function.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// Strictly increasing time nodes, either in `(0,1]` for norm suprema or on
/// `[0,T]` for trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::BadTimeGrid("empty grid".into()));
        }
        for w in nodes.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::BadTimeGrid(format!(
                    "nodes not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(TimeGrid { nodes })
    }

    /// Dyadic supremum grid `t = 2^-j`, `j = 0..=j_max`, ascending.
    pub fn dyadic(j_max: u32) -> Self {
        let nodes = (0..=j_max).rev().map(|j| 0.5f64.powi(j as i32)).collect();
        TimeGrid { nodes }
    }

    /// Uniform trajectory grid `0, h, …, T` with `steps` intervals.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::BadTimeGrid(format!("bad horizon {horizon} or steps {steps}")));
        }
        let h = horizon / steps as f64;
        Ok(TimeGrid { nodes: (0..=steps).map(|k| k as f64 * h).collect() })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn is_uniform(&self) -> bool {
        if self.nodes.len() < 3 {
            return true;
        }
        let h = self.nodes[1] - self.nodes[0];
        self.nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.max(1.0))
    }

    pub fn id(&self) -> String {
        format!("grid-{}-{:.6e}-{:.6e}", self.len(), self.nodes[0], self.horizon())
    }
}

/// `int_{a1}^{a2} u^m e^{-lam u} du`, exact up to rounding.
///
/// Series branch for small `lam * a2` avoids the cancellation in the
/// recurrence; the upward recurrence handles the rest.
pub fn exp_poly_integral(m: usize, lam: f64, a1: f64, a2: f64) -> f64 {
    debug_assert!(a1 <= a2);
    if a2 == a1 {
        return 0.0;
    }
    if lam * a2 < 0.75 {
        // sum_j (-lam)^j / j! * (a2^{m+j+1} - a1^{m+j+1}) / (m+j+1)
        let mut acc = 0.0;
        let mut coef = 1.0;
        for j in 0..60 {
            let p = (m + j + 1) as f64;
            let term = coef * (a2.powf(p) - a1.powf(p)) / p;
            acc += term;
            if term.abs() < 1e-17 * acc.abs().max(1e-300) {
                break;
            }
            coef *= -lam / (j as f64 + 1.0);
        }
        return acc;
    }
    let e1 = (-lam * a1).exp();
    let e2 = (-lam * a2).exp();
    // E_0 via expm1 keeps precision when the interval is narrow
    let mut e = e1 * (-(-lam * (a2 - a1)).exp_m1()) / lam;
    for k in 1..=m {
        e = (a1.powi(k as i32) * e1 - a2.powi(k as i32) * e2 + k as f64 * e) / lam;
    }
    e
}

/// `int_0^1 t^m e^{-lam t} dt/t` for `m >= 1`; the building block of the
/// closed-form evaluation of the paraproduct time integrals.
pub fn dt_over_t_integral(m: usize, lam: f64) -> f64 {
    debug_assert!(m >= 1);
    exp_poly_integral(m - 1, lam, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        // degree-9 polynomial is exact for 5 nodes
        let val: f64 = x.iter().zip(&w).map(|(&x, &w)| w * (x.powi(9) + 3.0 * x.powi(4))).sum();
        let exact = 0.0 + 3.0 * 2.0 / 5.0;
        assert!((val - exact).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn log_quad_matches_closed_form() {
        let q = QuadSpec::default().build().unwrap();
        // int_0^1 t^2 e^{-3t} dt/t
        let got = q.integrate(|t| t * t * (-3.0 * t).exp());
        let want = dt_over_t_integral(2, 3.0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn exp_poly_integral_vs_simpson() {
        for &(m, lam, a1, a2) in
            &[(0, 2.0, 0.0, 1.0), (3, 0.1, 0.2, 0.9), (5, 40.0, 0.0, 0.5), (2, 0.0, 0.0, 2.0)]
        {
            let exact = exp_poly_integral(m, lam, a1, a2);
            let steps = 20000;
            let h = (a2 - a1) / steps as f64;
            let mut acc = 0.0;
            for i in 0..steps {
                let u0 = a1 + i as f64 * h;
                let um = u0 + 0.5 * h;
                let u1 = u0 + h;
                let f = |u: f64| u.powi(m as i32) * (-lam * u).exp();
                acc += h / 6.0 * (f(u0) + 4.0 * f(um) + f(u1));
            }
            assert!(
                (exact - acc).abs() < 1e-10 * acc.abs().max(1.0),
                "m={m} lam={lam}: {exact} vs {acc}"
            );
        }
    }

    #[test]
    fn grids() {
        let g = TimeGrid::dyadic(3);
        assert_eq!(g.nodes(), &[0.125, 0.25, 0.5, 1.0]);
        let g = TimeGrid::uniform(2.0, 4).unwrap();
        assert_eq!(g.nodes(), &[0.0, 0.5, 1.0, 1.5, 2.0]);
        assert!(g.is_uniform());
        assert!(TimeGrid::new(vec![0.1, 0.1]).is_err());
        assert!(TimeGrid::new(vec![]).is_err());
    }
}
