//! Schauder resolution and the Anderson-model solvers.
//!
//! `resolution` evaluates the Duhamel integral `R(v)_t = int_0^t P^(b)_{t-s}
//! v(s) ds` exactly per eigenmode for the piecewise-linear interpolant of
//! `v`. On top of it sit two solvers for
//!
//! ```text
//! d_t u + L u = F(u) xi^eps - C^eps F'(u) F(u)
//! ```
//!
//! a direct exponential-Euler stepper, and the paracontrolled Picard
//! iteration that expands the candidate solution along the reference
//! trajectory `Z = X^eps` and multiplies by the noise through the enhanced
//! pair `(zeta, zeta2)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{manufactured_field, standard_normal_field, SpaceTimeField};
use crate::norms::{default_sup_grid, holder_norm, spacetime_norm, SpaceTimeKind, SpaceTimeParams};
use crate::para::{ParaConfig, ParaEngine};
use crate::parallel::par_map_indexed;
use crate::quad::{exp_poly_integral, TimeGrid};
use crate::renorm::{EnhancedNoise, Horizon, RenormEngine};
use crate::spectral::{apply_fn, q_profile, Field, SpectralDecomposition};

/// Vertexwise nonlinearity with two derivatives; the built-ins are `C^3`
/// with bounded derivatives except the identity, which the linear solver
/// uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Nonlinearity {
    Zero,
    One,
    Identity,
    Tanh,
    /// `amp * (sigmoid(x) - 1/2)`
    ScaledSigmoid { amp: f64 },
}

impl Nonlinearity {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::One => 1.0,
            Nonlinearity::Identity => x,
            Nonlinearity::Tanh => x.tanh(),
            Nonlinearity::ScaledSigmoid { amp } => amp * (1.0 / (1.0 + (-x).exp()) - 0.5),
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Zero | Nonlinearity::One => 0.0,
            Nonlinearity::Identity => 1.0,
            Nonlinearity::Tanh => 1.0 - x.tanh().powi(2),
            Nonlinearity::ScaledSigmoid { amp } => {
                let s = 1.0 / (1.0 + (-x).exp());
                amp * s * (1.0 - s)
            }
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            Nonlinearity::Zero | Nonlinearity::One | Nonlinearity::Identity => 0.0,
            Nonlinearity::Tanh => {
                let t = x.tanh();
                -2.0 * t * (1.0 - t * t)
            }
            Nonlinearity::ScaledSigmoid { amp } => {
                let s = 1.0 / (1.0 + (-x).exp());
                amp * s * (1.0 - s) * (1.0 - 2.0 * s)
            }
        }
    }

    pub fn apply(&self, f: &Field) -> Field {
        f.map(|x| self.eval(x))
    }

    pub fn apply_d1(&self, f: &Field) -> Field {
        f.map(|x| self.d1(x))
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub horizon: f64,
    pub steps: usize,
    pub para: ParaConfig,
    pub nonlinearity: Nonlinearity,
    pub picard_max: usize,
    pub picard_tol: f64,
    /// Solution-scale exponent and the slightly smaller iteration exponent.
    pub alpha: f64,
    pub alpha_prime: f64,
    /// Weight ladder for the global linear solver.
    pub lambda_init: f64,
    pub lambda_cap: f64,
    pub divergence_cap: f64,
    pub norm_a: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            horizon: 1.0,
            steps: 256,
            para: ParaConfig::default(),
            nonlinearity: Nonlinearity::Identity,
            picard_max: 40,
            picard_tol: 1e-9,
            alpha: 0.75,
            alpha_prime: 0.65,
            lambda_init: 1.0,
            lambda_cap: 4096.0,
            divergence_cap: 1e8,
            norm_a: 2,
        }
    }
}

impl SolverConfig {
    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.horizon, self.steps)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    /// Per-step stability indicator `h * max|d rhs/d u|` for the direct
    /// solver; per-iteration distances for the Picard solvers.
    pub step_contraction: Vec<f64>,
    pub distances: Vec<f64>,
    pub contraction_factors: Vec<f64>,
    pub iterations: usize,
    pub lambda_used: Option<f64>,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub u: SpaceTimeField,
    pub diagnostics: SolveDiagnostics,
}

/// Paracontrolled triple `(f, f', f#)` with its reference trajectory.
#[derive(Debug, Clone)]
pub struct ParacontrolledFn {
    pub f: SpaceTimeField,
    pub fprime: SpaceTimeField,
    pub fsharp: SpaceTimeField,
    pub reference: SpaceTimeField,
}

impl ParacontrolledFn {
    /// Worst defect of `f = Pi_{f'}(Z) + f#` across nodes.
    pub fn defect(&self, engine: &ParaEngine) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..self.f.len() {
            let para = engine.paraproduct(self.fprime.value(k), self.reference.value(k))?;
            worst = worst.max((self.f.value(k) - para - self.fsharp.value(k)).amax());
        }
        Ok(worst)
    }
}

/// `R(v)_t = int_0^t P^(b)_{t-s} v(s) ds` on the trajectory's grid, exact per
/// eigenmode for the piecewise-linear interpolant of `v`.
pub fn resolution(s: &SpectralDecomposition, b: usize, v: &SpaceTimeField) -> Result<SpaceTimeField> {
    if b == 0 {
        return Err(Error::InvalidParameter { name: "b", reason: "resolution order must be >= 1".into() });
    }
    let grid = v.grid().clone();
    let nodes = grid.nodes();
    if nodes[0] != 0.0 {
        return Err(Error::BadTimeGrid("resolution expects a grid starting at 0".into()));
    }
    let n = s.n();
    let kn = grid.len();

    // spectral coefficients of every node: [n x kn]
    let mut coefs = DMatrix::zeros(n, kn);
    for k in 0..kn {
        coefs.set_column(k, &s.to_spectral(v.value(k)));
    }

    // phi_b(u lam) primitives over [a1,a2]: J0 = int phi, J1 = int u phi
    let phi_ints = |lam: f64, a1: f64, a2: f64| -> (f64, f64) {
        let mut j0 = 0.0;
        let mut j1 = 0.0;
        let mut c = 1.0;
        for m in 0..b {
            if m > 0 {
                c *= lam / m as f64;
            }
            j0 += c * exp_poly_integral(m, lam, a1, a2);
            j1 += c * exp_poly_integral(m + 1, lam, a1, a2);
        }
        (j0, j1)
    };

    let uniform = grid.is_uniform();
    let h = if kn > 1 { nodes[1] - nodes[0] } else { 0.0 };

    let out_cols: Vec<DVector<f64>> = par_map_indexed(n, |i| {
        let lam = s.lambdas()[i];
        let mut out = DVector::zeros(kn);
        if uniform && kn > 1 {
            // lag weights: contribution of [t_j, t_{j+1}] at target t_k with
            // lag l = k - j: u = t_k - s in [(l-1)h, lh]
            let mut w0 = vec![0.0; kn];
            let mut w1 = vec![0.0; kn];
            for l in 1..kn {
                let a1 = (l - 1) as f64 * h;
                let a2 = l as f64 * h;
                let (j0, j1) = phi_ints(lam, a1, a2);
                // c(s) = c_j (u - a1)/h + c_{j+1} (a2 - u)/h in u-coordinates
                w0[l] = (j1 - a1 * j0) / h;
                w1[l] = (a2 * j0 - j1) / h;
            }
            for k in 1..kn {
                let mut acc = 0.0;
                for j in 0..k {
                    let l = k - j;
                    acc += w0[l] * coefs[(i, j)] + w1[l] * coefs[(i, j + 1)];
                }
                out[k] = acc;
            }
        } else {
            for k in 1..kn {
                let t = nodes[k];
                let mut acc = 0.0;
                for j in 0..k {
                    let a1 = t - nodes[j + 1];
                    let a2 = t - nodes[j];
                    let (j0, j1) = phi_ints(lam, a1, a2);
                    let hj = nodes[j + 1] - nodes[j];
                    acc += coefs[(i, j)] * (j1 - a1 * j0) / hj
                        + coefs[(i, j + 1)] * (a2 * j0 - j1) / hj;
                }
                out[k] = acc;
            }
        }
        out
    });

    let mut spec_out = DMatrix::zeros(n, kn);
    for (i, col) in out_cols.iter().enumerate() {
        for k in 0..kn {
            spec_out[(i, k)] = col[k];
        }
    }
    let vertex = s.basis() * spec_out;
    let values: Vec<Field> = (0..kn).map(|k| Field::from(vertex.column(k))).collect();
    SpaceTimeField::new(grid, values)
}

/// The paracontrolled product `(f,f') . zhat` at one grid node:
/// `Pi_f(zeta) + Pi_zeta(f) + Pi(f#, zeta) + C(Z, f', zeta) + f'. zeta2`.
pub fn paracontrolled_product(
    engine: &ParaEngine,
    f: &Field,
    fprime: &Field,
    fsharp: &Field,
    z_ref: &Field,
    zeta: &Field,
    zeta2: &Field,
) -> Result<Field> {
    let a = engine.paraproduct(f, zeta)?; // zeta high, f low
    let b = engine.paraproduct(zeta, f)?; // f high, zeta low
    let c = engine.resonant(fsharp, zeta)?;
    let d = engine.commutator(z_ref, fprime, zeta)?;
    let e = fprime.component_mul(zeta2);
    Ok(a + b + c + d + e)
}

/// Lift of a paracontrolled pair through a nonlinearity:
/// `(F(f), F'(f) f')` with the remainder recomputed from the definition.
pub fn nonlinear_lift(
    engine: &ParaEngine,
    nl: Nonlinearity,
    pf: &ParacontrolledFn,
) -> Result<ParacontrolledFn> {
    let f = pf.f.map(|v| nl.apply(v));
    let fprime = SpaceTimeField::new(
        pf.f.grid().clone(),
        (0..pf.f.len())
            .map(|k| nl.apply_d1(pf.f.value(k)).component_mul(pf.fprime.value(k)))
            .collect(),
    )?;
    let mut sharp_vals = Vec::with_capacity(pf.f.len());
    for k in 0..pf.f.len() {
        let para = engine.paraproduct(fprime.value(k), pf.reference.value(k))?;
        sharp_vals.push(f.value(k) - para);
    }
    let fsharp = SpaceTimeField::new(pf.f.grid().clone(), sharp_vals)?;
    Ok(ParacontrolledFn { f, fprime, fsharp, reference: pf.reference.clone() })
}

/// Exponential-Euler stepping of the renormalized equation.
pub fn solve_direct(
    s: &SpectralDecomposition,
    cfg: &SolverConfig,
    u0: &Field,
    xi_eps: &Field,
    c_eps: &Field,
) -> Result<Trajectory> {
    let grid = cfg.grid()?;
    let h = cfg.horizon / cfg.steps as f64;
    let n = s.n();
    let nl = cfg.nonlinearity;

    let decay: Vec<f64> = s.lambdas().iter().map(|&l| (-h * l).exp()).collect();
    let phi1: Vec<f64> = s
        .lambdas()
        .iter()
        .map(|&l| if l > 1e-14 { (-(-h * l).exp_m1()) / (h * l) } else { 1.0 })
        .collect();

    let mut diagnostics = SolveDiagnostics::default();
    let mut values = Vec::with_capacity(grid.len());
    values.push(u0.clone());
    let mut u = u0.clone();
    for _step in 0..cfg.steps {
        let fu = nl.apply(&u);
        let fpu = nl.apply_d1(&u);
        let rhs = Field::from_fn(n, |x, _| fu[x] * xi_eps[x] - c_eps[x] * fpu[x] * fu[x]);
        // local Lipschitz indicator of the reaction term
        let lip = (0..n)
            .map(|x| {
                (nl.d1(u[x]) * xi_eps[x]
                    - c_eps[x] * (nl.d2(u[x]) * fu[x] + fpu[x] * fpu[x]))
                .abs()
            })
            .fold(0.0, f64::max);
        diagnostics.step_contraction.push(h * lip);

        let mut uc = s.to_spectral(&u);
        let rc = s.to_spectral(&rhs);
        for i in 0..n {
            uc[i] = decay[i] * uc[i] + h * phi1[i] * rc[i];
        }
        u = s.from_spectral(&uc);
        if u.amax() > cfg.divergence_cap {
            diagnostics.aborted =
                Some(format!("divergence cap {} exceeded at t = {}", cfg.divergence_cap, values.len() as f64 * h));
            let partial_grid = TimeGrid::uniform(values.len() as f64 * h, values.len())?;
            values.push(u);
            return Ok(Trajectory {
                u: SpaceTimeField::new(partial_grid, values)?,
                diagnostics,
            });
        }
        values.push(u.clone());
    }
    Ok(Trajectory { u: SpaceTimeField::new(grid, values)?, diagnostics })
}

fn heat_flow(s: &SpectralDecomposition, u0: &Field, grid: &TimeGrid) -> SpaceTimeField {
    let coefs = s.to_spectral(u0);
    SpaceTimeField::from_fn(grid.clone(), |t| {
        let mut c = coefs.clone();
        for i in 0..s.n() {
            c[i] *= (-t * s.lambdas()[i]).exp();
        }
        s.from_spectral(&c)
    })
}

enum PicardNorm {
    Holder,
    Weighted(f64),
}

fn picard_distance(
    s: &SpectralDecomposition,
    a: &SpaceTimeField,
    b: &SpaceTimeField,
    alpha_prime: f64,
    norm_a: usize,
    norm: &PicardNorm,
) -> Result<f64> {
    let diff = SpaceTimeField::new(
        a.grid().clone(),
        (0..a.len()).map(|k| a.value(k) - b.value(k)).collect(),
    )?;
    let mut params = SpaceTimeParams::new(alpha_prime);
    params.a = norm_a;
    match norm {
        PicardNorm::Holder => {
            Ok(spacetime_norm(s, SpaceTimeKind::CTC, &diff, &params)?.value)
        }
        PicardNorm::Weighted(lambda) => {
            let params = params.with_lambda(*lambda);
            Ok(spacetime_norm(s, SpaceTimeKind::WL, &diff, &params)?.value)
        }
    }
}

fn picard_loop(
    s: &SpectralDecomposition,
    cfg: &SolverConfig,
    u0: &Field,
    zhat: &EnhancedNoise,
    nl: Nonlinearity,
    norm: PicardNorm,
) -> Result<(Trajectory, ParacontrolledFn)> {
    let grid = cfg.grid()?;
    if zhat.zeta2.grid() != &grid {
        return Err(Error::BadTimeGrid(
            "enhanced noise grid does not match the solver grid".into(),
        ));
    }
    let engine = ParaEngine::new(s, cfg.para)?;
    let base = heat_flow(s, u0, &grid);

    let mut u = base.clone();
    let mut uprime = u.map(|v| nl.apply(v));
    let mut diagnostics = SolveDiagnostics::default();
    let mut prev_dist: Option<f64> = None;
    let mut bad_streak = 0;

    for iter in 0..cfg.picard_max {
        // lift (F(u), F'(u) u') and recompute the remainder per node
        let fu: Vec<Field> = (0..grid.len()).map(|k| nl.apply(u.value(k))).collect();
        let fpu: Vec<Field> = (0..grid.len())
            .map(|k| nl.apply_d1(u.value(k)).component_mul(uprime.value(k)))
            .collect();

        let prods: Vec<Field> = par_map_indexed(grid.len(), |k| {
            let sharp = {
                let para = engine
                    .paraproduct(&fpu[k], zhat.reference.value(k))
                    .expect("dimension checked");
                &fu[k] - para
            };
            paracontrolled_product(
                &engine,
                &fu[k],
                &fpu[k],
                &sharp,
                zhat.reference.value(k),
                &zhat.zeta,
                zhat.zeta2.value(k),
            )
            .expect("dimension checked")
        });
        let forcing = SpaceTimeField::new(grid.clone(), prods)?;
        let duhamel = resolution(s, cfg.para.b, &forcing)?;
        let v = SpaceTimeField::new(
            grid.clone(),
            (0..grid.len()).map(|k| base.value(k) + duhamel.value(k)).collect(),
        )?;

        let dist = picard_distance(s, &v, &u, cfg.alpha_prime, cfg.norm_a, &norm)?;
        diagnostics.distances.push(dist);
        if let Some(p) = prev_dist {
            let factor = if p > 0.0 { dist / p } else { 0.0 };
            diagnostics.contraction_factors.push(factor);
            if factor >= 1.0 {
                bad_streak += 1;
                if bad_streak >= 3 {
                    diagnostics.aborted = Some(format!(
                        "no contraction at this horizon: factors {:?}",
                        &diagnostics.contraction_factors
                    ));
                    diagnostics.iterations = iter + 1;
                    let pf = assemble_pf(&engine, &grid, &u, &uprime, zhat)?;
                    return Ok((Trajectory { u, diagnostics }, pf));
                }
            } else {
                bad_streak = 0;
            }
        }
        let new_prime = SpaceTimeField::new(grid.clone(), fu)?;
        u = v;
        uprime = new_prime;
        diagnostics.iterations = iter + 1;
        if dist < cfg.picard_tol {
            break;
        }
        prev_dist = Some(dist);
    }
    let engine = ParaEngine::new(s, cfg.para)?;
    let pf = assemble_pf(&engine, &grid, &u, &uprime, zhat)?;
    Ok((Trajectory { u, diagnostics }, pf))
}

fn assemble_pf(
    engine: &ParaEngine,
    grid: &TimeGrid,
    u: &SpaceTimeField,
    uprime: &SpaceTimeField,
    zhat: &EnhancedNoise,
) -> Result<ParacontrolledFn> {
    let mut sharp = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let para = engine.paraproduct(uprime.value(k), zhat.reference.value(k))?;
        sharp.push(u.value(k) - para);
    }
    Ok(ParacontrolledFn {
        f: u.clone(),
        fprime: uprime.clone(),
        fsharp: SpaceTimeField::new(grid.clone(), sharp)?,
        reference: zhat.reference.clone(),
    })
}

/// Picard iteration of the paracontrolled fixed point on `[0, T]`.
pub fn solve_paracontrolled(
    s: &SpectralDecomposition,
    cfg: &SolverConfig,
    u0: &Field,
    zhat: &EnhancedNoise,
) -> Result<(Trajectory, ParacontrolledFn)> {
    picard_loop(s, cfg, u0, zhat, cfg.nonlinearity, PicardNorm::Holder)
}

/// Global linear solver: the same loop with `F = Id`, distances measured in
/// the exponentially weighted norm, raising `lambda` by 4 until the
/// iteration contracts or the cap is reached.
pub fn solve_global_linear(
    s: &SpectralDecomposition,
    cfg: &SolverConfig,
    u0: &Field,
    zhat: &EnhancedNoise,
) -> Result<Trajectory> {
    let mut lambda = cfg.lambda_init.max(1.0);
    loop {
        let (mut traj, _) =
            picard_loop(s, cfg, u0, zhat, Nonlinearity::Identity, PicardNorm::Weighted(lambda))?;
        traj.diagnostics.lambda_used = Some(lambda);
        if traj.diagnostics.aborted.is_none() {
            return Ok(traj);
        }
        lambda *= 4.0;
        if lambda > cfg.lambda_cap {
            traj.diagnostics.aborted =
                Some(format!("no contraction up to lambda cap {}", cfg.lambda_cap));
            return Ok(traj);
        }
    }
}

/// One cell of an epsilon sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub renormalized: bool,
    /// `||u^eps - u^{eps/2}||_{C_T L^inf}` against the next ladder entry.
    pub diff_to_next: Option<f64>,
    pub final_sup: f64,
    pub aborted: bool,
}

/// Solves the (renormalized or bare) equation for every epsilon in the
/// ladder with one fixed noise realization, reporting successive
/// differences and final sup-norms. Cell failures are recorded, not fatal.
pub fn epsilon_sweep(
    s: &SpectralDecomposition,
    cfg: &SolverConfig,
    xi: &Field,
    ladder: &[f64],
    renormalize: bool,
) -> Result<Vec<SweepRow>> {
    let renorm_engine = RenormEngine::new(s, cfg.para)?;
    let n = s.n();
    let cells: Vec<(Option<SpaceTimeField>, f64, bool)> = par_map_indexed(ladder.len(), |idx| {
        let eps = ladder[idx];
        let run = || -> Result<(SpaceTimeField, f64, bool)> {
            let xi_eps = apply_fn(s, |l| (-eps * l).exp(), xi)?;
            let c_eps = if renormalize {
                renorm_engine.renorm_constant(eps, Horizon::Finite(cfg.horizon))?
            } else {
                DVector::zeros(n)
            };
            let traj = solve_direct(s, cfg, &DVector::from_element(n, 1.0), &xi_eps, &c_eps)?;
            let sup = traj.u.values().iter().map(|v| v.amax()).fold(0.0, f64::max);
            let aborted = traj.diagnostics.aborted.is_some();
            Ok((traj.u, sup, aborted))
        };
        match run() {
            Ok((u, sup, aborted)) => (Some(u), sup, aborted),
            Err(_) => (None, f64::NAN, true),
        }
    });

    let mut rows = Vec::with_capacity(ladder.len());
    for (idx, &eps) in ladder.iter().enumerate() {
        let (u, sup, aborted) = &cells[idx];
        let diff = if idx + 1 < ladder.len() {
            match (u, &cells[idx + 1].0) {
                (Some(a), Some(b)) if a.len() == b.len() => Some(a.sup_distance(b)?),
                _ => None,
            }
        } else {
            None
        };
        rows.push(SweepRow {
            eps,
            renormalized: renormalize,
            diff_to_next: diff,
            final_sup: *sup,
            aborted: *aborted,
        });
    }
    Ok(rows)
}

/// Empirical constants of the three Schauder inequalities.
#[derive(Debug, Clone)]
pub struct SchauderReport {
    /// `sup_t ||R(v)_t||_{C^{beta+2}} / ((1+T) ||v||_{C_T C^beta})`
    pub c_plain: f64,
    /// `sup_t ||R(v)_t||_{C^{beta+2-2eps'}} / (T^{eps'} ||v||)`
    pub c_horizon: f64,
    /// Per-lambda constants of the weighted inequality.
    pub weighted: Vec<(f64, f64)>,
    /// Log-log slope of the weighted constants against lambda.
    pub weighted_slope: f64,
}

/// Measures the Schauder constants over band-pass and broadband filtered
/// noise samples (time-constant trajectories). The weighted constant per
/// lambda is the maximum ratio over the sample family, which is what makes
/// the `lambda^{-eps'}` decay visible.
pub fn schauder_check(
    s: &SpectralDecomposition,
    b: usize,
    beta: f64,
    eps_prime: f64,
    lambdas: &[f64],
    horizon: f64,
    steps: usize,
    seed: u64,
) -> Result<SchauderReport> {
    if !(beta > -2.0 && beta < 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("need beta in (-2,0), got {beta}"),
        });
    }
    if !(eps_prime > 0.0 && eps_prime < 1.0) {
        return Err(Error::InvalidParameter {
            name: "eps_prime",
            reason: format!("need eps' in (0,1), got {eps_prime}"),
        });
    }
    let grid = TimeGrid::uniform(horizon, steps)?;
    let sup_grid = default_sup_grid();
    let n = s.n();

    // band-pass samples Q^(2)_{2^-j} xi plus a few broadband fields
    let mut samples: Vec<Field> = (0..=10u32)
        .map(|j| {
            let t = 0.5f64.powi(j as i32);
            let xi = standard_normal_field(n, seed, j as u64);
            apply_fn(s, |lam| q_profile(2, t * lam), &xi).expect("finite filter")
        })
        .collect();
    for d in 0..3 {
        samples.push(manufactured_field(s, beta, seed.wrapping_add(1), d));
    }

    let mut c_plain = 0.0f64;
    let mut c_horizon = 0.0f64;
    let mut weighted_best = vec![0.0f64; lambdas.len()];

    for v0 in &samples {
        let nv = holder_norm(s, v0, beta, 2, &sup_grid)?.value;
        if nv < 1e-12 {
            continue;
        }
        let v = SpaceTimeField::constant(grid.clone(), v0.clone());
        let rv = resolution(s, b, &v)?;
        let mut sup_plain = 0.0f64;
        let mut sup_hor = 0.0f64;
        let mut weighted_sup = vec![0.0f64; lambdas.len()];
        for (k, &t) in grid.nodes().iter().enumerate().skip(1) {
            let h_plain = holder_norm(s, rv.value(k), beta + 2.0, 2, &sup_grid)?.value;
            let h_eps = holder_norm(s, rv.value(k), beta + 2.0 - 2.0 * eps_prime, 2, &sup_grid)?.value;
            sup_plain = sup_plain.max(h_plain);
            sup_hor = sup_hor.max(h_eps);
            for (li, &lam) in lambdas.iter().enumerate() {
                weighted_sup[li] = weighted_sup[li].max((-lam * t).exp() * h_eps);
            }
        }
        c_plain = c_plain.max(sup_plain / ((1.0 + horizon) * nv));
        c_horizon = c_horizon.max(sup_hor / (horizon.powf(eps_prime) * nv));
        for li in 0..lambdas.len() {
            // time-constant v: sup_t e^{-lam t} ||v||_{C^beta} = ||v||_{C^beta}
            weighted_best[li] = weighted_best[li].max(weighted_sup[li] / nv);
        }
    }

    // log-log fit of the weighted constants
    let xs: Vec<f64> = lambdas.iter().map(|&l| l.ln()).collect();
    let ys: Vec<f64> = weighted_best.iter().map(|&c| c.ln()).collect();
    let nn = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);

    Ok(SchauderReport {
        c_plain,
        c_horizon,
        weighted: lambdas.iter().copied().zip(weighted_best).collect(),
        weighted_slope: slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{cycle, torus2d};
    use crate::noise::{sample_noise, x_eps, NoiseModel};
    use crate::renorm::enhance_zero;
    use crate::spectral::diagonalize;

    #[test]
    fn resolution_constant_forcing() {
        // v = c: R(v)_t = t c since P is conservative
        let s = diagonalize(&cycle(6, 1.0).unwrap()).unwrap();
        let grid = TimeGrid::uniform(2.0, 8).unwrap();
        let v = SpaceTimeField::constant(grid.clone(), DVector::from_element(6, 3.0));
        let r = resolution(&s, 3, &v).unwrap();
        for (k, &t) in grid.nodes().iter().enumerate() {
            assert!(
                (r.value(k) - DVector::from_element(6, 3.0 * t)).amax() < 1e-12,
                "node {k}"
            );
        }
    }

    #[test]
    fn resolution_eigenmode_closed_form() {
        // v(s) = e^{-s lam} psi with b = 1: R(v)_t = t e^{-t lam} psi
        let s = diagonalize(&cycle(6, 1.0).unwrap()).unwrap();
        let i = 4;
        let lam = s.lambdas()[i];
        let psi = Field::from(s.basis().column(i));
        let grid = TimeGrid::uniform(1.0, 64).unwrap();
        let v = SpaceTimeField::from_fn(grid.clone(), |t| (-t * lam).exp() * &psi);
        let r = resolution(&s, 1, &v).unwrap();
        // piecewise-linear interpolation of e^{-s lam} brings O(h^2) error
        let t = 1.0;
        let want = t * (-t * lam).exp();
        let got = r.value(64).dot(&psi) * s.graph().measure()[0];
        assert!(
            (got - want).abs() < 5e-4 * want.abs().max(1.0),
            "got {got} want {want}"
        );
    }

    #[test]
    fn resolution_order_two_in_grid() {
        let s = diagonalize(&cycle(6, 1.0).unwrap()).unwrap();
        let i = 4;
        let lam = s.lambdas()[i];
        let psi = Field::from(s.basis().column(i));
        let runs: Vec<f64> = [32usize, 64, 128]
            .iter()
            .map(|&steps| {
                let grid = TimeGrid::uniform(1.0, steps).unwrap();
                let v = SpaceTimeField::from_fn(grid.clone(), |t| (-t * lam).exp() * &psi);
                let r = resolution(&s, 1, &v).unwrap();
                let want = 1.0 * (-lam).exp();
                (r.value(steps).dot(&psi) * s.graph().measure()[0] - want).abs()
            })
            .collect();
        let o1 = (runs[0] / runs[1]).log2();
        let o2 = (runs[1] / runs[2]).log2();
        assert!(o1 > 1.7 && o2 > 1.7, "orders {o1} {o2}");
    }

    #[test]
    fn resolution_heat_equation_residual_b1() {
        // (d_t + L) R(v) = v at interior nodes, checked by central differences
        let g = torus2d(3, 1.0).unwrap();
        let s = diagonalize(&g).unwrap();
        let xi = sample_noise(&NoiseModel::new(3), &g, 0).xi;
        let err = |steps: usize| {
            let grid = TimeGrid::uniform(1.0, steps).unwrap();
            let v = SpaceTimeField::constant(grid.clone(), xi.clone());
            let r = resolution(&s, 1, &v).unwrap();
            let h = 1.0 / steps as f64;
            let k = steps / 2;
            let dt = (r.value(k + 1) - r.value(k - 1)) / (2.0 * h);
            let lr = g.apply_generator(r.value(k));
            (dt + lr - &xi).amax()
        };
        let e1 = err(64);
        let e2 = err(128);
        assert!(e1 / e2 > 3.0, "no O(h^2) decay: {e1} vs {e2}");
    }

    #[test]
    fn resolution_positivity_b1() {
        // heat kernel is nonnegative: R with b=1 preserves positive forcing
        let s = diagonalize(&torus2d(3, 1.0).unwrap()).unwrap();
        let grid = TimeGrid::uniform(1.0, 16).unwrap();
        let mut v0 = DVector::zeros(9);
        v0[4] = 1.0;
        let v = SpaceTimeField::constant(grid, v0);
        let r = resolution(&s, 1, &v).unwrap();
        for k in 0..r.len() {
            assert!(r.value(k).min() > -1e-12, "node {k} lost positivity");
        }
    }

    #[test]
    fn direct_solver_pure_heat_flow() {
        let g = torus2d(3, 1.0).unwrap();
        let s = diagonalize(&g).unwrap();
        let cfg = SolverConfig {
            nonlinearity: Nonlinearity::Zero,
            steps: 32,
            ..Default::default()
        };
        let u0 = sample_noise(&NoiseModel::new(4), &g, 0).xi;
        let zero = DVector::zeros(9);
        let traj = solve_direct(&s, &cfg, &u0, &zero, &zero).unwrap();
        for (k, &t) in traj.u.grid().nodes().iter().enumerate() {
            let want = crate::spectral::heat(&s, t, &u0).unwrap();
            assert!((traj.u.value(k) - want).amax() < 1e-12);
        }
    }

    #[test]
    fn direct_solver_constant_nonlinearity_matches_x_eps() {
        // F = 1: u(t) = heat flow + X^eps(t), exactly for time-constant forcing
        let g = torus2d(3, 1.0).unwrap();
        let s = diagonalize(&g).unwrap();
        let cfg = SolverConfig {
            nonlinearity: Nonlinearity::One,
            steps: 64,
            ..Default::default()
        };
        let u0 = DVector::from_element(9, 0.5);
        let xi = sample_noise(&NoiseModel::new(5), &g, 0).xi;
        let zero = DVector::zeros(9);
        let traj = solve_direct(&s, &cfg, &u0, &xi, &zero).unwrap();
        let x = x_eps(&s, &xi, traj.u.grid()).unwrap();
        for k in 0..traj.u.len() {
            let t = traj.u.grid().nodes()[k];
            let want = crate::spectral::heat(&s, t, &u0).unwrap() + x.value(k);
            assert!((traj.u.value(k) - want).amax() < 1e-10, "node {k}");
        }
    }

    #[test]
    fn direct_solver_mass_law_linear() {
        // d/dt int u dmu = int u (xi - C) dmu for F = Id
        let g = torus2d(3, 1.0).unwrap();
        let s = diagonalize(&g).unwrap();
        let cfg = SolverConfig { steps: 512, ..Default::default() };
        let u0 = DVector::from_element(9, 1.0);
        let xi = sample_noise(&NoiseModel::new(6), &g, 0).xi;
        let c = DVector::from_element(9, 0.3);
        let traj = solve_direct(&s, &cfg, &u0, &xi, &c).unwrap();
        let mass = |k: usize| s.inner(traj.u.value(k), &DVector::from_element(9, 1.0));
        let k = 256;
        let h = 1.0 / 512.0;
        let dmass = (mass(k + 1) - mass(k - 1)) / (2.0 * h);
        let flux: f64 = (0..9)
            .map(|x| traj.u.value(k)[x] * (xi[x] - c[x]) * s.graph().measure()[x])
            .sum();
        assert!(
            (dmass - flux).abs() < 5e-3 * flux.abs().max(1.0),
            "dmass {dmass} flux {flux}"
        );
    }

    #[test]
    fn divergence_cap_aborts_with_partial_trajectory() {
        let g = torus2d(3, 1.0).unwrap();
        let s = diagonalize(&g).unwrap();
        let cfg = SolverConfig {
            divergence_cap: 10.0,
            steps: 64,
            ..Default::default()
        };
        let u0 = DVector::from_element(9, 1.0);
        let xi = DVector::from_element(9, 8.0); // strong uniform growth
        let zero = DVector::zeros(9);
        let traj = solve_direct(&s, &cfg, &u0, &xi, &zero).unwrap();
        assert!(traj.diagnostics.aborted.is_some());
        assert!(traj.u.len() < 65);
    }

    #[test]
    fn paracontrolled_zero_noise_is_heat_flow() {
        let g = torus2d(3, 1.0).unwrap();
        let s = diagonalize(&g).unwrap();
        let cfg = SolverConfig { steps: 16, nonlinearity: Nonlinearity::Tanh, ..Default::default() };
        let grid = cfg.grid().unwrap();
        let zhat = enhance_zero(&s, cfg.para, &grid);
        let u0 = sample_noise(&NoiseModel::new(8), &g, 0).xi;
        let (traj, pf) = solve_paracontrolled(&s, &cfg, &u0, &zhat).unwrap();
        assert!(traj.diagnostics.iterations <= 2);
        for (k, &t) in grid.nodes().iter().enumerate() {
            let want = crate::spectral::heat(&s, t, &u0).unwrap();
            assert!((traj.u.value(k) - want).amax() < 1e-9, "node {k}");
        }
        // paracontrolled invariant: f = Pi_{f'}(Z) + f# (Z = 0 here)
        let engine = ParaEngine::new(&s, cfg.para).unwrap();
        assert!(pf.defect(&engine).unwrap() < 1e-12);
    }

    #[test]
    fn global_linear_zero_noise_runs_any_lambda() {
        let g = torus2d(3, 1.0).unwrap();
        let s = diagonalize(&g).unwrap();
        let cfg = SolverConfig { steps: 8, horizon: 2.0, ..Default::default() };
        let grid = cfg.grid().unwrap();
        let zhat = enhance_zero(&s, cfg.para, &grid);
        let u0 = DVector::from_element(9, 1.0);
        let traj = solve_global_linear(&s, &cfg, &u0, &zhat).unwrap();
        assert!(traj.diagnostics.aborted.is_none());
        assert_eq!(traj.diagnostics.lambda_used, Some(1.0));
    }

    #[test]
    fn sweep_zero_noise_all_zero_differences() {
        // zero noise model: omega = 0, so both the realization and the
        // renormalization constant vanish
        let g = torus2d(3, 1.0).unwrap();
        let g = g.with_weight(DVector::zeros(9)).unwrap();
        let s = diagonalize(&g).unwrap();
        let cfg = SolverConfig { steps: 16, ..Default::default() };
        let xi = DVector::zeros(9);
        let rows = epsilon_sweep(&s, &cfg, &xi, &[0.25, 0.125, 0.0625], true).unwrap();
        assert_eq!(rows.len(), 3);
        for row in &rows[..2] {
            assert!(row.diff_to_next.unwrap() < 1e-14);
        }
        assert!(rows[2].diff_to_next.is_none());
    }

    #[test]
    fn schauder_zero_input_and_validation() {
        let s = diagonalize(&torus2d(3, 1.0).unwrap()).unwrap();
        assert!(schauder_check(&s, 3, 0.5, 0.25, &[1.0], 1.0, 8, 1).is_err());
        assert!(schauder_check(&s, 3, -0.5, 1.5, &[1.0], 1.0, 8, 1).is_err());
        let rep = schauder_check(&s, 3, -0.5, 0.25, &[1.0, 4.0], 2.0, 16, 1).unwrap();
        assert!(rep.c_plain.is_finite() && rep.c_plain > 0.0);
        assert!(rep.weighted[0].1 >= rep.weighted[1].1);
    }
}
