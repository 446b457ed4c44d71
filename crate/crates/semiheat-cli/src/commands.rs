//! Command implementations: each builds its inputs from the config, runs the
//! library operation, writes artifacts and records them in the manifest.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context as _};
use nalgebra::{DMatrix, DVector};

use semiheat::fields::manufactured_field;
use semiheat::graph::GraphFile;
use semiheat::kernel_fit::{fit_kernel_bounds, kernel_composition_constant, BoundTarget};
use semiheat::noise::{noise_regularity_study, sample_noise as draw_noise, NoiseModel};
use semiheat::norms::{
    besov_norm, holder_norm, lambda_norm, sobolev_norm, NORM_CSV_HEADER,
};
use semiheat::oracle::{OracleTerm, TensorOracle};
use semiheat::para::ParaEngine;
use semiheat::quad::TimeGrid;
use semiheat::renorm::RenormEngine;
use semiheat::solver::{
    epsilon_sweep, solve_direct, solve_global_linear, solve_paracontrolled, Trajectory,
};
use semiheat::spectral::{diagonalize, Field, SpectralDecomposition};
use semiheat::{build_graph, graph_distance, GraphSpace};

use crate::artifacts::{fmt_f, linear_fit, svg_plot, write_atomic, CsvTable, Series};
use crate::config::{RunConfig, SolveMode};
use crate::manifest::Manifest;

pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub spectral_cache: Option<PathBuf>,
}

impl Context {
    fn graph(&self) -> anyhow::Result<GraphSpace> {
        Ok(build_graph(&self.cfg.graph)?)
    }

    fn decomposition(&self, g: &GraphSpace) -> anyhow::Result<SpectralDecomposition> {
        if let Some(cache) = &self.spectral_cache {
            if let Some(s) = load_spectral_cache(cache, g)? {
                return Ok(s);
            }
            let s = diagonalize(g)?;
            save_spectral_cache(cache, &s)?;
            return Ok(s);
        }
        Ok(diagonalize(g)?)
    }

    fn record(
        &self,
        command: &str,
        graph_hash: u64,
        started: Instant,
        paths: &[PathBuf],
    ) -> anyhow::Result<()> {
        let mut manifest = Manifest::load(&self.out)?;
        manifest.record(
            &self.out,
            command,
            graph_hash,
            serde_json::to_value(&self.cfg)?,
            started.elapsed().as_millis(),
            paths,
        )
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

const CACHE_MAGIC: u64 = 0x5348_5350_4331_0001; // "SHSPC1"

fn load_spectral_cache(
    path: &std::path::Path,
    g: &GraphSpace,
) -> anyhow::Result<Option<SpectralDecomposition>> {
    if !path.exists() {
        return Ok(None);
    }
    let bytes = std::fs::read(path)?;
    let mut cur = 0usize;
    let mut u64_at = |cur: &mut usize| -> anyhow::Result<u64> {
        let v = u64::from_le_bytes(bytes[*cur..*cur + 8].try_into()?);
        *cur += 8;
        Ok(v)
    };
    if u64_at(&mut cur)? != CACHE_MAGIC {
        bail!("bad spectral cache magic in {}", path.display());
    }
    if u64_at(&mut cur)? != g.content_hash() {
        return Ok(None); // cache belongs to another graph
    }
    let n = u64_at(&mut cur)? as usize;
    if n != g.n() {
        return Ok(None);
    }
    let mut f64_at = |cur: &mut usize| -> anyhow::Result<f64> {
        let v = f64::from_le_bytes(bytes[*cur..*cur + 8].try_into()?);
        *cur += 8;
        Ok(v)
    };
    let lambdas = DVector::from_fn(n, |_, _| f64_at(&mut cur).unwrap());
    let mut basis = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            basis[(i, j)] = f64_at(&mut cur)?;
        }
    }
    Ok(Some(SpectralDecomposition::from_parts(g.clone(), lambdas, basis)?))
}

fn save_spectral_cache(path: &std::path::Path, s: &SpectralDecomposition) -> anyhow::Result<()> {
    let n = s.n();
    let mut bytes = Vec::with_capacity(24 + 8 * n * (n + 1));
    bytes.extend_from_slice(&CACHE_MAGIC.to_le_bytes());
    bytes.extend_from_slice(&s.graph().content_hash().to_le_bytes());
    bytes.extend_from_slice(&(n as u64).to_le_bytes());
    for i in 0..n {
        bytes.extend_from_slice(&s.lambdas()[i].to_le_bytes());
    }
    for j in 0..n {
        for i in 0..n {
            bytes.extend_from_slice(&s.basis()[(i, j)].to_le_bytes());
        }
    }
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn gen_graph(ctx: &Context, spec: Option<&str>) -> anyhow::Result<u8> {
    let started = Instant::now();
    let spec = spec.unwrap_or(&ctx.cfg.graph);
    let g = build_graph(spec)?;
    let file = GraphFile::from_graph(&g);
    let path = ctx.path("graph.json");
    write_atomic(&path, serde_json::to_string_pretty(&file)?.as_bytes())?;
    println!(
        "graph {} n={} hash={:016x}",
        spec,
        g.n(),
        g.content_hash()
    );
    ctx.record("gen-graph", g.content_hash(), started, &[path])?;
    Ok(0)
}

pub fn spectrum(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let s = ctx.decomposition(&g)?;
    let mut csv = CsvTable::new(ctx.path("spectrum.csv"), "spectrum", "index,lambda");
    for i in 0..s.n() {
        csv.row(&format!("{i},{}", fmt_f(s.lambdas()[i])));
    }
    let path = csv.finish()?;
    println!("n={} lambda_max={:.6}", s.n(), s.lambda_max());
    ctx.record("spectrum", g.content_hash(), started, &[path])?;
    Ok(0)
}

pub fn verify_geometry(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let dist = graph_distance(&g);
    let thresholds = ctx.cfg.geometry.to_thresholds(ctx.cfg.seed);
    let rep = semiheat::geometry::verify_geometry(&g, &dist, &thresholds)?;
    let mut csv = CsvTable::new(
        ctx.path("geometry.csv"),
        "geometry",
        "doubling,ahlfors_c1,ahlfors_nu,poincare,degiorgi_c,degiorgi_theta,degiorgi_q,too_small,all_pass",
    );
    csv.row(&format!(
        "{},{},{},{},{},{},{},{},{}",
        fmt_f(rep.doubling_constant),
        fmt_f(rep.ahlfors_c1),
        fmt_f(rep.ahlfors_nu),
        fmt_f(rep.poincare_constant),
        fmt_f(rep.degiorgi_constant),
        fmt_f(rep.degiorgi_theta),
        fmt_f(rep.degiorgi_q),
        rep.too_small,
        rep.all_pass()
    ));
    let path = csv.finish()?;
    println!(
        "nu={:.4} doubling={:.3} poincare={:.3} degiorgi={:.3} pass={}",
        rep.ahlfors_nu,
        rep.doubling_constant,
        rep.poincare_constant,
        rep.degiorgi_constant,
        rep.all_pass()
    );
    ctx.record("verify-geometry", g.content_hash(), started, &[path])?;
    Ok(0)
}

pub fn verify_kernel(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let s = ctx.decomposition(&g)?;
    let dist = graph_distance(&g);
    let ks = &ctx.cfg.kernel;
    let mut csv = CsvTable::new(
        ctx.path("kernel_bounds.csv"),
        "kernel-bounds",
        "target,constant,rate,q,violation_max",
    );
    for (target, q) in [
        (BoundTarget::UpperEstimate, None),
        (BoundTarget::Lipschitz, None),
        (BoundTarget::GradientLq, Some(ks.q)),
    ] {
        let fit = fit_kernel_bounds(&s, &dist, target, &ks.t_grid, q, ctx.cfg.seed, ks.samples)?;
        csv.row(&format!(
            "{:?},{},{},{},{}",
            fit.target,
            fmt_f(fit.constant),
            fmt_f(fit.rate),
            fit.q.map_or_else(|| "-".into(), fmt_f),
            fmt_f(fit.violation_max)
        ));
        if target == BoundTarget::UpperEstimate {
            let pairs: Vec<(f64, f64)> = ks
                .t_grid
                .iter()
                .flat_map(|&s0| ks.t_grid.iter().filter(move |&&t| t < s0).map(move |&t| (s0, t)))
                .collect();
            let comp = kernel_composition_constant(&g, &dist, fit.rate, &pairs);
            csv.row(&format!("Composition,{},{},-,-", fmt_f(comp), fmt_f(fit.rate)));
        }
    }
    let path = csv.finish()?;
    ctx.record("verify-kernel", g.content_hash(), started, &[path])?;
    Ok(0)
}

pub fn norms(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let s = ctx.decomposition(&g)?;
    let dist = graph_distance(&g);
    let ns = &ctx.cfg.norms;
    let grid = TimeGrid::dyadic(ns.dyadic_j_max);
    let quad = ctx.cfg.para.to_para_config().quad.build()?;
    let f = manufactured_field(&s, ns.field_alpha, ctx.cfg.seed, 0);

    let mut csv = CsvTable::new(ctx.path("norms.csv"), "norms", NORM_CSV_HEADER);
    for &sigma in &ns.sigmas {
        csv.row(&holder_norm(&s, &f, sigma, ns.a, &grid)?.csv_row());
        if sigma > 0.0 && sigma <= 1.0 {
            csv.row(&lambda_norm(&f, &dist, sigma)?.csv_row());
        }
        if (ns.a as f64) > sigma / 2.0 {
            csv.row(&besov_norm(&s, &f, sigma, ns.p, ns.q, ns.a, &quad)?.csv_row());
        }
    }
    for &smooth in &ns.sobolev_s {
        csv.row(&sobolev_norm(&s, &f, smooth, ns.p)?.csv_row());
    }
    let mut paths = vec![csv.finish()?];

    // refinement study of the raw noise regularity
    let ex = &ctx.cfg.experiment;
    if !ex.regularity_sigmas.is_empty() {
        let graphs: Vec<(usize, GraphSpace)> = ex
            .sides
            .iter()
            .map(|&n| {
                Ok((n, build_graph(&format!("torus2d:{n}:scaled:{}", ex.mass_c))?))
            })
            .collect::<anyhow::Result<_>>()?;
        let decomps: Vec<(usize, SpectralDecomposition)> = graphs
            .iter()
            .map(|(n, g)| Ok((*n, diagonalize(g)?)))
            .collect::<anyhow::Result<_>>()?;
        let refs: Vec<(usize, &SpectralDecomposition)> =
            decomps.iter().map(|(n, s)| (*n, s)).collect();
        let study = noise_regularity_study(
            &NoiseModel::new(ctx.cfg.seed),
            &refs,
            &ex.regularity_sigmas,
            ex.regularity_draws,
        )?;
        let mut csv = CsvTable::new(
            ctx.path("regularity.csv"),
            "noise-regularity",
            "sigma,side,median_norm",
        );
        for cell in &study.cells {
            csv.row(&format!("{},{},{}", cell.sigma, cell.side, fmt_f(cell.median_norm)));
        }
        paths.push(csv.finish()?);
    }
    ctx.record("norm", g.content_hash(), started, &paths)?;
    Ok(0)
}

pub fn paraproduct(ctx: &Context, use_oracle: bool) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let s = ctx.decomposition(&g)?;
    let cfg = ctx.cfg.para.to_para_config();
    let f = manufactured_field(&s, 0.6, ctx.cfg.seed, 0);
    let h = manufactured_field(&s, 0.8, ctx.cfg.seed, 1);
    let grid = TimeGrid::dyadic(ctx.cfg.norms.dyadic_j_max);

    let (pgf, pfg, res, low, residual) = if use_oracle {
        let o = TensorOracle::new(&s, cfg)?;
        let pgf = o.evaluate(OracleTerm::Para, &f, &h)?;
        let pfg = o.evaluate(OracleTerm::Para, &h, &f)?;
        let res = o.evaluate(OracleTerm::Resonant, &f, &h)?;
        let low = o.evaluate(OracleTerm::LowFreq, &f, &h)?;
        let prod = f.component_mul(&h);
        let residual = &prod - &pgf - &pfg - &res - &low;
        (pgf, pfg, res, low, residual)
    } else {
        let e = ParaEngine::new(&s, cfg)?;
        let d = e.bony_decompose(&f, &h)?;
        (d.para_g_f, d.para_f_g, d.resonant, d.low_freq, d.residual)
    };

    let mut csv = CsvTable::new(
        ctx.path("paraproduct.csv"),
        "bony-pieces",
        "piece,evaluator,sup_norm,holder_0p5",
    );
    let eval = if use_oracle { "oracle" } else { "quadrature" };
    for (name, field) in [
        ("para_g_f", &pgf),
        ("para_f_g", &pfg),
        ("resonant", &res),
        ("low_freq", &low),
        ("residual", &residual),
    ] {
        let hn = holder_norm(&s, field, 0.5, 2, &grid)?.value;
        csv.row(&format!("{name},{eval},{},{}", fmt_f(field.amax()), fmt_f(hn)));
    }
    let rel = residual.amax() / f.component_mul(&h).amax().max(1e-300);
    csv.row(&format!("relative_residual,{eval},{},-", fmt_f(rel)));
    let path = csv.finish()?;
    println!("relative Bony residual: {rel:.3e} ({eval})");
    ctx.record("paraproduct", g.content_hash(), started, &[path])?;
    Ok(0)
}

pub fn commutator_test(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let ex = &ctx.cfg.experiment;
    let (al, be, ga_) = ex.commutator_alphas;
    let delta = (al + be).min(1.0) + ga_;
    let grid = TimeGrid::dyadic(ctx.cfg.norms.dyadic_j_max);
    let cfg = ctx.cfg.para.to_para_config();

    let mut csv = CsvTable::new(
        ctx.path("commutator.csv"),
        "commutator-gain",
        "side,median_commutator_delta,median_uncommuted_alpha_gamma",
    );
    let mut hash = 0u64;
    for &side in &ex.sides {
        let g = build_graph(&format!("torus2d:{side}:scaled:{}", ex.mass_c))?;
        hash = g.content_hash();
        let s = diagonalize(&g)?;
        let engine = ParaEngine::new(&s, cfg)?;
        let vals = semiheat::parallel::par_map_indexed(ex.samples, |i| {
            let d = 3 * i as u64;
            let f = manufactured_field(&s, al, ctx.cfg.seed, d);
            let gg = manufactured_field(&s, be, ctx.cfg.seed, d + 1);
            let h = manufactured_field(&s, ga_, ctx.cfg.seed, d + 2);
            let pgf = engine.paraproduct(&gg, &f).expect("dims");
            let c = engine.resonant(&pgf, &h).expect("dims")
                - gg.component_mul(&engine.resonant(&f, &h).expect("dims"));
            let p = engine.resonant(&pgf, &h).expect("dims");
            let cn = holder_norm(&s, &c, delta, 2, &grid).expect("params").value;
            let pn = holder_norm(&s, &p, al + ga_, 2, &grid).expect("params").value;
            (cn, pn)
        });
        let med = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let cm = med(vals.iter().map(|v| v.0).collect());
        let pm = med(vals.iter().map(|v| v.1).collect());
        csv.row(&format!("{side},{},{}", fmt_f(cm), fmt_f(pm)));
        println!("side {side}: |C|_Cdelta median {cm:.4}, |Pi(Pi_g f,h)|_C(a+g) median {pm:.4}");
    }
    let path = csv.finish()?;
    ctx.record("commutator-test", hash, started, &[path])?;
    Ok(0)
}

pub fn sample_noise(ctx: &Context, draws: u64) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let model = NoiseModel::new(ctx.cfg.seed);
    let mut payload = Vec::new();
    for d in 0..draws {
        let nf = draw_noise(&model, &g, d);
        for x in 0..g.n() {
            payload.extend_from_slice(&nf.xi[x].to_le_bytes());
        }
    }
    let bin = ctx.path("noise.bin");
    write_atomic(&bin, &payload)?;
    let header = serde_json::json!({
        "graph_hash": format!("{:016x}", g.content_hash()),
        "seed": ctx.cfg.seed,
        "draws": draws,
        "n": g.n(),
        "eps": ctx.cfg.noise.eps,
        "b": ctx.cfg.para.b,
        "payload": "noise.bin",
        "layout": "draw-major f64le",
    });
    let head = ctx.path("noise.json");
    write_atomic(&head, serde_json::to_string_pretty(&header)?.as_bytes())?;
    ctx.record("sample-noise", g.content_hash(), started, &[head, bin])?;
    Ok(0)
}

pub fn renorm_constant(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let s = ctx.decomposition(&g)?;
    let engine = RenormEngine::new(&s, ctx.cfg.para.to_para_config())?;
    let horizon = ctx.cfg.renorm.horizon();

    let mut csv = CsvTable::new(
        ctx.path("renorm_ladder.csv"),
        "renorm-ladder",
        "eps,mean_c,min_c,max_c",
    );
    let mut pts = Vec::new();
    for &eps in &ctx.cfg.renorm.eps_ladder {
        let c = engine.renorm_constant(eps, horizon)?;
        let mean = c.sum() / c.len() as f64;
        csv.row(&format!("{},{},{},{}", fmt_f(eps), fmt_f(mean), fmt_f(c.min()), fmt_f(c.max())));
        pts.push(((1.0 / eps).ln(), mean));
    }
    let (a, b, r2) = linear_fit(&pts);
    csv.row(&format!("# fit a={} b={} r2={}", fmt_f(a), fmt_f(b), fmt_f(r2)));
    let path = csv.finish()?;
    println!("C^eps ladder fit: a={a:.4} b={b:.4} R^2={r2:.5}");
    ctx.record("renorm-constant", g.content_hash(), started, &[path])?;
    Ok(0)
}

pub fn enhance(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let s = ctx.decomposition(&g)?;
    let cfg = ctx.cfg.para.to_para_config();
    let grid = TimeGrid::uniform(ctx.cfg.solver.horizon, ctx.cfg.solver.steps)?;
    let xi = draw_noise(&NoiseModel::new(ctx.cfg.seed), &g, ctx.cfg.noise.draw).xi;
    let en = semiheat::renorm::enhance(&s, cfg, &xi, ctx.cfg.noise.eps, &grid, ctx.cfg.solver.horizon)?;

    let mut payload = Vec::new();
    let mut push_field = |f: &Field, payload: &mut Vec<u8>| {
        for x in 0..f.len() {
            payload.extend_from_slice(&f[x].to_le_bytes());
        }
    };
    push_field(&en.zeta, &mut payload);
    for k in 0..en.zeta2.len() {
        push_field(en.zeta2.value(k), &mut payload);
    }
    push_field(&en.renorm, &mut payload);
    let bin = ctx.path("enhanced.bin");
    write_atomic(&bin, &payload)?;
    let header = serde_json::json!({
        "graph_hash": format!("{:016x}", g.content_hash()),
        "seed": ctx.cfg.seed,
        "draw": ctx.cfg.noise.draw,
        "eps": en.epsilon,
        "b": en.b,
        "grid_id": grid.id(),
        "nodes": grid.len(),
        "n": g.n(),
        "payload": "enhanced.bin",
        "layout": "zeta | zeta2 per node | renorm, f64le",
    });
    let head = ctx.path("enhanced.json");
    write_atomic(&head, serde_json::to_string_pretty(&header)?.as_bytes())?;
    ctx.record("enhance", g.content_hash(), started, &[head, bin])?;
    Ok(0)
}

fn write_trajectory(
    ctx: &Context,
    name: &str,
    traj: &Trajectory,
) -> anyhow::Result<Vec<PathBuf>> {
    let mut csv = CsvTable::new(
        ctx.path(&format!("{name}.csv")),
        "trajectory-long",
        "t,vertex,value",
    );
    for (k, &t) in traj.u.grid().nodes().iter().enumerate() {
        let v = traj.u.value(k);
        for x in 0..v.len() {
            csv.row(&format!("{},{x},{}", fmt_f(t), fmt_f(v[x])));
        }
    }
    let csv_path = csv.finish()?;
    let diag = serde_json::json!({
        "iterations": traj.diagnostics.iterations,
        "distances": traj.diagnostics.distances,
        "contraction_factors": traj.diagnostics.contraction_factors,
        "step_contraction_max": traj.diagnostics.step_contraction.iter().cloned().fold(0.0f64, f64::max),
        "lambda_used": traj.diagnostics.lambda_used,
        "aborted": traj.diagnostics.aborted,
    });
    let diag_path = ctx.path(&format!("{name}_diagnostics.json"));
    write_atomic(&diag_path, serde_json::to_string_pretty(&diag)?.as_bytes())?;
    Ok(vec![csv_path, diag_path])
}

pub fn solve(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let s = ctx.decomposition(&g)?;
    let para = ctx.cfg.para.to_para_config();
    let solver = ctx.cfg.solver.to_solver_config(para);
    let u0 = DVector::from_element(g.n(), 1.0);
    let xi = draw_noise(&NoiseModel::new(ctx.cfg.seed), &g, ctx.cfg.noise.draw).xi;

    let traj = match ctx.cfg.solver.mode {
        SolveMode::Direct => {
            let xi_eps = semiheat::noise::regularize(&s, &xi, ctx.cfg.noise.eps)?;
            let engine = RenormEngine::new(&s, para)?;
            let c_eps = engine.renorm_constant(
                ctx.cfg.noise.eps,
                semiheat::renorm::Horizon::Finite(solver.horizon),
            )?;
            solve_direct(&s, &solver, &u0, &xi_eps, &c_eps)?
        }
        SolveMode::Paracontrolled => {
            let grid = solver.grid()?;
            let zhat = semiheat::renorm::enhance(
                &s,
                para,
                &xi,
                ctx.cfg.noise.eps,
                &grid,
                solver.horizon,
            )?;
            solve_paracontrolled(&s, &solver, &u0, &zhat)?.0
        }
        SolveMode::GlobalLinear => {
            let grid = solver.grid()?;
            let zhat = semiheat::renorm::enhance(
                &s,
                para,
                &xi,
                ctx.cfg.noise.eps,
                &grid,
                solver.horizon,
            )?;
            solve_global_linear(&s, &solver, &u0, &zhat)?
        }
    };
    let aborted = traj.diagnostics.aborted.is_some();
    let paths = write_trajectory(ctx, "solution", &traj)?;
    ctx.record("solve", g.content_hash(), started, &paths)?;
    if aborted {
        eprintln!("solver aborted: {}", traj.diagnostics.aborted.as_deref().unwrap_or("?"));
        return Ok(2);
    }
    Ok(0)
}

pub fn sweep_eps(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let g = ctx.graph()?;
    let s = ctx.decomposition(&g)?;
    let para = ctx.cfg.para.to_para_config();
    let solver = ctx.cfg.solver.to_solver_config(para);
    let xi = draw_noise(&NoiseModel::new(ctx.cfg.seed), &g, ctx.cfg.noise.draw).xi;

    let mut csv = CsvTable::new(
        ctx.path("sweep.csv"),
        "eps-sweep",
        "eps,renormalized,diff_norm,final_sup,aborted",
    );
    for renormalized in [true, false] {
        let rows = epsilon_sweep(&s, &solver, &xi, &ctx.cfg.noise.eps_ladder, renormalized)?;
        for r in rows {
            csv.row(&format!(
                "{},{},{},{},{}",
                fmt_f(r.eps),
                r.renormalized,
                r.diff_to_next.map_or_else(|| "-".into(), fmt_f),
                fmt_f(r.final_sup),
                r.aborted
            ));
        }
    }
    let path = csv.finish()?;
    ctx.record("sweep-eps", g.content_hash(), started, &[path])?;
    Ok(0)
}

/// Schauder experiment is exposed through the library and the acceptance
/// suite; the report command only renders recorded artifacts.
pub fn report(ctx: &Context) -> anyhow::Result<u8> {
    let started = Instant::now();
    let manifest = Manifest::load(&ctx.out)?;
    if manifest.entries.is_empty() {
        eprintln!("empty manifest: nothing to report");
        return Ok(1);
    }
    let mut outputs = Vec::new();
    let mut summary = CsvTable::new(
        ctx.path("summary.csv"),
        "report-summary",
        "source,quantity,value",
    );
    let mut missing = Vec::new();

    // renorm ladder plot with the log fit overlay
    if let Some(art) = manifest.find_artifact("renorm_ladder.csv") {
        let text = std::fs::read_to_string(ctx.out.join(&art.path))?;
        let mut pts = Vec::new();
        for line in text.lines().skip(2) {
            if line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() >= 2 {
                let eps: f64 = cols[0].parse()?;
                let mean: f64 = cols[1].parse()?;
                pts.push(((1.0 / eps).ln(), mean));
            }
        }
        let (a, b, r2) = linear_fit(&pts);
        let fit_pts: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, a * p.0 + b)).collect();
        let svg = svg_plot(
            "renormalization constant vs log(1/eps)",
            "log(1/eps)",
            "mean C^eps",
            &[
                Series { label: "mean C^eps", points: pts, color: "steelblue", dashed: false },
                Series { label: "a log(1/eps)+b", points: fit_pts, color: "firebrick", dashed: true },
            ],
            Some(&format!("a={a:.4} b={b:.4} R2={r2:.5}")),
        );
        let p = ctx.path("renorm_ladder.svg");
        write_atomic(&p, svg.as_bytes())?;
        summary.row(&format!("renorm_ladder,log_fit_r2,{}", fmt_f(r2)));
        summary.row(&format!("renorm_ladder,log_fit_slope,{}", fmt_f(a)));
        outputs.push(p);
    } else {
        missing.push("renorm_ladder.csv");
    }

    // eps sweep: successive differences and final sup-norms, both arms
    if let Some(art) = manifest.find_artifact("sweep.csv") {
        let text = std::fs::read_to_string(ctx.out.join(&art.path))?;
        let mut diff_r = Vec::new();
        let mut diff_u = Vec::new();
        let mut sup_u = Vec::new();
        for line in text.lines().skip(2) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() < 5 {
                continue;
            }
            let eps: f64 = cols[0].parse()?;
            let renorm = cols[1] == "true";
            let x = (1.0 / eps).ln();
            if cols[2] != "-" {
                let d: f64 = cols[2].parse()?;
                if renorm {
                    diff_r.push((x, d.ln()));
                } else {
                    diff_u.push((x, d.ln()));
                }
            }
            if !renorm {
                sup_u.push((x, cols[3].parse::<f64>()?.ln()));
            }
        }
        let svg = svg_plot(
            "successive differences down the eps ladder",
            "log(1/eps)",
            "log ||u^eps - u^{eps/2}||",
            &[
                Series { label: "renormalized", points: diff_r.clone(), color: "steelblue", dashed: false },
                Series { label: "bare", points: diff_u, color: "firebrick", dashed: false },
            ],
            None,
        );
        let p = ctx.path("sweep_differences.svg");
        write_atomic(&p, svg.as_bytes())?;
        outputs.push(p);
        if diff_r.len() >= 2 {
            summary.row(&format!(
                "sweep,renormalized_diff_monotone,{}",
                diff_r.windows(2).all(|w| w[1].1 < w[0].1)
            ));
        }
        if sup_u.len() >= 2 {
            let (slope, _, _) = linear_fit(&sup_u);
            summary.row(&format!("sweep,bare_log_sup_slope,{}", fmt_f(slope)));
        }
    } else {
        missing.push("sweep.csv");
    }

    // noise regularity medians across refinement
    if let Some(art) = manifest.find_artifact("regularity.csv") {
        let text = std::fs::read_to_string(ctx.out.join(&art.path))?;
        let mut by_sigma: std::collections::BTreeMap<String, Vec<(f64, f64)>> = Default::default();
        for line in text.lines().skip(2) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() == 3 {
                by_sigma
                    .entry(cols[0].to_string())
                    .or_default()
                    .push((cols[1].parse::<f64>()?.ln(), cols[2].parse::<f64>()?.ln()));
            }
        }
        let colors = ["steelblue", "firebrick", "seagreen", "darkorange"];
        let series: Vec<Series> = by_sigma
            .iter()
            .enumerate()
            .map(|(i, (sig, pts))| Series {
                label: Box::leak(format!("sigma={sig}").into_boxed_str()),
                points: pts.clone(),
                color: colors[i % colors.len()],
                dashed: false,
            })
            .collect();
        let svg = svg_plot(
            "noise Hoelder norm medians vs refinement",
            "log N",
            "log median norm",
            &series,
            None,
        );
        let p = ctx.path("regularity.svg");
        write_atomic(&p, svg.as_bytes())?;
        outputs.push(p);
    } else {
        missing.push("regularity.csv");
    }

    outputs.push(summary.finish()?);
    let hash = manifest
        .entries
        .last()
        .map(|e| u64::from_str_radix(&e.graph_hash, 16).unwrap_or(0))
        .unwrap_or(0);
    if !missing.is_empty() {
        eprintln!("missing inputs: {}", missing.join(", "));
        let mut m = Manifest::load(&ctx.out)?;
        m.record(&ctx.out, "report", hash, serde_json::to_value(&ctx.cfg)?, started.elapsed().as_millis(), &outputs)?;
        return Ok(1);
    }
    ctx.record("report", hash, started, &outputs)?;
    Ok(0)
}


