//! Run configuration: one JSON document with sections mirroring the library
//! modules. Every knob has a default, and the effective (fully defaulted)
//! config is echoed into the manifest so reruns are reproducible.

use serde::{Deserialize, Serialize};

use semiheat::para::ParaConfig;
use semiheat::quad::QuadSpec;
use semiheat::solver::{Nonlinearity, SolverConfig};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Generator spec (`torus2d:16`, `cycle:8:scaled:5`, …) or a graph file path.
    pub graph: String,
    pub seed: u64,
    pub para: ParaSection,
    pub solver: SolverSection,
    pub noise: NoiseSection,
    pub norms: NormSection,
    pub geometry: GeometrySection,
    pub kernel: KernelSection,
    pub renorm: RenormSection,
    pub experiment: ExperimentSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: "torus2d:16".into(),
            seed: 1,
            para: ParaSection::default(),
            solver: SolverSection::default(),
            noise: NoiseSection::default(),
            norms: NormSection::default(),
            geometry: GeometrySection::default(),
            kernel: KernelSection::default(),
            renorm: RenormSection::default(),
            experiment: ExperimentSection::default(),
        }
    }
}

/// Refinement-sweep settings shared by the commutator and regularity
/// experiments: torus sides, the diffusive mass scale `m = mass_c / N^2`,
/// and the manufactured-field exponents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub sides: Vec<usize>,
    pub mass_c: f64,
    pub samples: usize,
    pub commutator_alphas: (f64, f64, f64),
    pub regularity_sigmas: Vec<f64>,
    pub regularity_draws: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            sides: vec![8, 16, 32],
            mass_c: 5.0,
            samples: 50,
            commutator_alphas: (0.6, 0.8, -0.9),
            regularity_sigmas: vec![-1.1, -0.5],
            regularity_draws: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ParaSection {
    pub b: usize,
    pub quad_panels: usize,
    pub quad_nodes_per_panel: usize,
    pub quad_t_min: f64,
    pub oracle_max_n: usize,
}

impl Default for ParaSection {
    fn default() -> Self {
        let p = ParaConfig::default();
        ParaSection {
            b: p.b,
            quad_panels: p.quad.panels,
            quad_nodes_per_panel: p.quad.nodes_per_panel,
            quad_t_min: p.quad.t_min,
            oracle_max_n: p.oracle_max_n,
        }
    }
}

impl ParaSection {
    pub fn to_para_config(&self) -> ParaConfig {
        ParaConfig {
            b: self.b,
            quad: QuadSpec {
                panels: self.quad_panels,
                nodes_per_panel: self.quad_nodes_per_panel,
                t_min: self.quad_t_min,
            },
            oracle_max_n: self.oracle_max_n,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub mode: SolveMode,
    pub horizon: f64,
    pub steps: usize,
    pub nonlinearity: Nonlinearity,
    pub picard_max: usize,
    pub picard_tol: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub lambda_init: f64,
    pub lambda_cap: f64,
    pub divergence_cap: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    Direct,
    Paracontrolled,
    GlobalLinear,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSection {
            mode: SolveMode::Direct,
            horizon: s.horizon,
            steps: s.steps,
            nonlinearity: s.nonlinearity,
            picard_max: s.picard_max,
            picard_tol: s.picard_tol,
            alpha: s.alpha,
            alpha_prime: s.alpha_prime,
            lambda_init: s.lambda_init,
            lambda_cap: s.lambda_cap,
            divergence_cap: s.divergence_cap,
        }
    }
}

impl SolverSection {
    pub fn to_solver_config(&self, para: ParaConfig) -> SolverConfig {
        SolverConfig {
            horizon: self.horizon,
            steps: self.steps,
            para,
            nonlinearity: self.nonlinearity,
            picard_max: self.picard_max,
            picard_tol: self.picard_tol,
            alpha: self.alpha,
            alpha_prime: self.alpha_prime,
            lambda_init: self.lambda_init,
            lambda_cap: self.lambda_cap,
            divergence_cap: self.divergence_cap,
            norm_a: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub eps: f64,
    pub eps_ladder: Vec<f64>,
    pub draws: usize,
    pub draw: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            eps: 0.25,
            eps_ladder: (3..=9).map(|j| 0.5f64.powi(j)).collect(),
            draws: 1,
            draw: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NormSection {
    pub sigmas: Vec<f64>,
    pub a: usize,
    pub p: f64,
    pub q: f64,
    pub sobolev_s: Vec<f64>,
    pub dyadic_j_max: u32,
    /// Regularity of the manufactured test field the `norm` command evaluates.
    pub field_alpha: f64,
}

impl Default for NormSection {
    fn default() -> Self {
        NormSection {
            sigmas: vec![0.3, 0.5, 0.8],
            a: 2,
            p: 2.0,
            q: 2.0,
            sobolev_s: vec![0.0, 1.0, 2.0],
            dyadic_j_max: 40,
            field_alpha: 0.7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub nu_min: f64,
    pub nu_max: f64,
    pub doubling_max: f64,
    pub poincare_max: f64,
    pub degiorgi_max: f64,
    pub degiorgi_q: f64,
    pub samples: usize,
}

impl Default for GeometrySection {
    fn default() -> Self {
        let t = semiheat::geometry::GeometryThresholds::default();
        GeometrySection {
            nu_min: t.nu_range.0,
            nu_max: t.nu_range.1,
            doubling_max: t.doubling_max,
            poincare_max: t.poincare_max,
            degiorgi_max: t.degiorgi_max,
            degiorgi_q: t.degiorgi_q,
            samples: t.samples,
        }
    }
}

impl GeometrySection {
    pub fn to_thresholds(&self, seed: u64) -> semiheat::geometry::GeometryThresholds {
        semiheat::geometry::GeometryThresholds {
            nu_range: (self.nu_min, self.nu_max),
            doubling_max: self.doubling_max,
            poincare_max: self.poincare_max,
            degiorgi_max: self.degiorgi_max,
            degiorgi_q: self.degiorgi_q,
            samples: self.samples,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    pub t_grid: Vec<f64>,
    pub q: f64,
    pub samples: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection { t_grid: vec![0.0625, 0.125, 0.25, 0.5, 1.0], q: 2.0, samples: 20 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RenormSection {
    /// Outer horizon of the s-integral; `null` means the kernel-projected
    /// infinite horizon.
    pub horizon: Option<f64>,
    pub eps_ladder: Vec<f64>,
}

impl Default for RenormSection {
    fn default() -> Self {
        RenormSection {
            horizon: Some(4.0),
            eps_ladder: (2..=10).map(|j| 0.5f64.powi(j)).collect(),
        }
    }
}

impl RenormSection {
    pub fn horizon(&self) -> semiheat::renorm::Horizon {
        match self.horizon {
            Some(t) => semiheat::renorm::Horizon::Finite(t),
            None => semiheat::renorm::Horizon::InfiniteProjected,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&std::path::Path>) -> anyhow::Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                Ok(serde_json::from_str(&text)?)
            }
            None => Ok(RunConfig::default()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
