//! Heat-kernel bound certification.
//!
//! The dense kernel `p_t(x,y) = (e^{-tL} delta_y)(x) / mu_y` is compared
//! against the Gaussian majorant families: the two-sided volume form
//! `(V(x,sqrt t) V(y,sqrt t))^{-1/2} exp(-c d(x,y)^2/t)` for the upper
//! estimate and its difference-quotient variant for the Lipschitz bound, and
//! the `mu`-weighted `L^q` operator bound of `sqrt(t) Gamma e^{-tL}`. The
//! rate `c` is fitted by least squares in log scale and the prefactor is then
//! inflated so the inequality holds on every sampled point; the worst
//! residual after inflation is reported.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::standard_normal_field;
use crate::graph::{ball_volume, DistanceTable, GraphSpace};
use crate::spectral::{apply_fn, SpectralDecomposition};

pub const DENSE_LIMIT_DEFAULT: usize = 4096;

/// Dense heat kernel at time `t`, normalized so that
/// `(e^{-tL} f)(x) = sum_y p_t(x,y) f(y) mu_y`.
pub fn heat_kernel_matrix(s: &SpectralDecomposition, t: f64) -> Result<DMatrix<f64>> {
    if s.n() > DENSE_LIMIT_DEFAULT {
        return Err(Error::TooLargeForDense { n: s.n(), limit: DENSE_LIMIT_DEFAULT });
    }
    let n = s.n();
    let mut scaled = s.basis().clone();
    for i in 0..n {
        scaled.column_mut(i).scale_mut((-t * s.lambdas()[i]).exp());
    }
    let mut p = scaled * s.forward_matrix();
    for y in 0..n {
        let inv = 1.0 / s.graph().measure()[y];
        p.column_mut(y).scale_mut(inv);
    }
    Ok(p)
}

/// Ball volumes `V(x, sqrt t)` for every vertex.
pub fn volumes_at_scale(g: &GraphSpace, dist: &DistanceTable, t: f64) -> Vec<f64> {
    let r = t.sqrt();
    (0..g.n()).map(|x| ball_volume(g, dist, x, r)).collect()
}

/// The one-sided Gaussian comparison kernel
/// `G_t(x,y) = V(x, sqrt t)^{-1} exp(-c d(x,y)^2 / t)`.
pub fn gaussian_majorant(
    g: &GraphSpace,
    dist: &DistanceTable,
    rate_c: f64,
    t: f64,
    x: usize,
    _y: usize,
    d: f64,
) -> f64 {
    let v = ball_volume(g, dist, x, t.sqrt());
    (-rate_c * d * d / t).exp() / v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundTarget {
    UpperEstimate,
    Lipschitz,
    GradientLq,
}

#[derive(Debug, Clone)]
pub struct KernelBoundFit {
    pub target: BoundTarget,
    /// Multiplicative constant `C`.
    pub constant: f64,
    /// Gaussian rate `c` (zero for the `L^q` gradient bound).
    pub rate: f64,
    pub q: Option<f64>,
    /// Worst residual `value - C * majorant` after inflation; `<= 0` means
    /// the inequality holds on the whole sampled grid.
    pub violation_max: f64,
    pub t_grid: Vec<f64>,
}

fn regression_rate(points: &[(f64, f64)]) -> f64 {
    // least squares for log v = a - c z, returning max(c, 0)
    let n = points.len() as f64;
    if points.len() < 2 {
        return 0.0;
    }
    let sz: f64 = points.iter().map(|p| p.0).sum();
    let sv: f64 = points.iter().map(|p| p.1).sum();
    let szz: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let szv: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * szz - sz * sz;
    if denom <= 0.0 {
        return 0.0;
    }
    (-(n * szv - sz * sv) / denom).max(0.0)
}

/// Fits `(C, c)` for the requested bound over the time grid.
pub fn fit_kernel_bounds(
    s: &SpectralDecomposition,
    dist: &DistanceTable,
    target: BoundTarget,
    t_grid: &[f64],
    q: Option<f64>,
    sample_seed: u64,
    sample_count: usize,
) -> Result<KernelBoundFit> {
    if s.n() > DENSE_LIMIT_DEFAULT {
        return Err(Error::TooLargeForDense { n: s.n(), limit: DENSE_LIMIT_DEFAULT });
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::InvalidParameter {
            name: "t_grid",
            reason: "need a nonempty grid inside (0,1]".into(),
        });
    }
    let g = s.graph();
    let n = s.n();
    match target {
        BoundTarget::UpperEstimate => {
            // log(p sqrt(Vx Vy)) = log C - c d^2/t
            let mut pts = Vec::new();
            for &t in t_grid {
                let p = heat_kernel_matrix(s, t)?;
                let vols = volumes_at_scale(g, dist, t);
                for x in 0..n {
                    for y in 0..n {
                        let base = (vols[x] * vols[y]).sqrt();
                        let v = p[(x, y)].max(0.0) * base;
                        if v > 1e-14 {
                            let z = (dist.get(x, y) as f64).powi(2) / t;
                            pts.push((z, v.ln()));
                        }
                    }
                }
            }
            let rate = regression_rate(&pts);
            let constant =
                pts.iter().map(|&(z, lv)| (lv + rate * z).exp()).fold(0.0f64, f64::max);
            // worst residual of p <= C (VxVy)^{-1/2} e^{-cz}
            let mut violation = f64::NEG_INFINITY;
            for &t in t_grid {
                let p = heat_kernel_matrix(s, t)?;
                let vols = volumes_at_scale(g, dist, t);
                for x in 0..n {
                    for y in 0..n {
                        let z = (dist.get(x, y) as f64).powi(2) / t;
                        let maj = constant * (-rate * z).exp() / (vols[x] * vols[y]).sqrt();
                        violation = violation.max(p[(x, y)] - maj);
                    }
                }
            }
            Ok(KernelBoundFit { target, constant, rate, q: None, violation_max: violation, t_grid: t_grid.to_vec() })
        }
        BoundTarget::Lipschitz => {
            // |p_t(x,y) - p_t(z,y)| <= C (d(x,z)/sqrt t) (Vx Vy)^{-1/2} e^{-c d(x,y)^2/t}
            // over adjacent pairs (x,z), where the bound binds.
            let mut pts = Vec::new();
            for &t in t_grid {
                let p = heat_kernel_matrix(s, t)?;
                let vols = volumes_at_scale(g, dist, t);
                for x in 0..n {
                    for &(z, _) in &g.adjacency()[x] {
                        for y in 0..n {
                            let diff = (p[(x, y)] - p[(z, y)]).abs();
                            let base = (1.0 / t.sqrt()) / (vols[x] * vols[y]).sqrt();
                            let v = diff / base;
                            if v > 1e-14 {
                                let zz = (dist.get(x, y) as f64).powi(2) / t;
                                pts.push((zz, v.ln()));
                            }
                        }
                    }
                }
            }
            let rate = regression_rate(&pts);
            let constant =
                pts.iter().map(|&(z, lv)| (lv + rate * z).exp()).fold(0.0f64, f64::max);
            let mut violation = f64::NEG_INFINITY;
            for &t in t_grid {
                let p = heat_kernel_matrix(s, t)?;
                let vols = volumes_at_scale(g, dist, t);
                for x in 0..n {
                    for &(z, _) in &g.adjacency()[x] {
                        for y in 0..n {
                            let diff = (p[(x, y)] - p[(z, y)]).abs();
                            let zz = (dist.get(x, y) as f64).powi(2) / t;
                            let maj = constant * (-rate * zz).exp() / (t.sqrt() * (vols[x] * vols[y]).sqrt());
                            violation = violation.max(diff - maj);
                        }
                    }
                }
            }
            Ok(KernelBoundFit { target, constant, rate, q: None, violation_max: violation, t_grid: t_grid.to_vec() })
        }
        BoundTarget::GradientLq => {
            let q = q.ok_or(Error::InvalidParameter {
                name: "q",
                reason: "gradient bound needs an integrability exponent".into(),
            })?;
            let mut best = 0.0f64;
            for &t in t_grid {
                for draw in 0..sample_count {
                    let f = standard_normal_field(n, sample_seed, draw as u64);
                    let hf = apply_fn(s, |lam| (-t * lam).exp(), &f)?;
                    let gam = g.carre_du_champ(&hf, &hf).map(|v: f64| v.max(0.0).sqrt());
                    let num = t.sqrt() * s.lp_norm(&gam, q);
                    let den = s.lp_norm(&f, q);
                    if den > 0.0 {
                        best = best.max(num / den);
                    }
                }
            }
            Ok(KernelBoundFit {
                target,
                constant: best,
                rate: 0.0,
                q: Some(q),
                violation_max: 0.0,
                t_grid: t_grid.to_vec(),
            })
        }
    }
}

/// Discrete check of the Gaussian composition inequality
/// `int G_s(x,y) G_t(y,z) mu(dy) <= C G_s(x,z)` for `s > t`: returns the
/// largest observed constant over all `(x, z)` and scale pairs.
pub fn kernel_composition_constant(
    g: &GraphSpace,
    dist: &DistanceTable,
    rate_c: f64,
    scale_pairs: &[(f64, f64)],
) -> f64 {
    let n = g.n();
    let mut worst = 0.0f64;
    for &(s, t) in scale_pairs {
        debug_assert!(s > t);
        let vs = volumes_at_scale(g, dist, s);
        let vt = volumes_at_scale(g, dist, t);
        for x in 0..n {
            for z in 0..n {
                let mut conv = 0.0;
                for y in 0..n {
                    let dxy = dist.get(x, y) as f64;
                    let dyz = dist.get(y, z) as f64;
                    conv += ((-rate_c * dxy * dxy / s).exp() / vs[x])
                        * ((-rate_c * dyz * dyz / t).exp() / vt[y])
                        * g.measure()[y];
                }
                let dxz = dist.get(x, z) as f64;
                let target = (-rate_c * dxz * dxz / s).exp() / vs[x];
                worst = worst.max(conv / target);
            }
        }
    }
    worst
}
