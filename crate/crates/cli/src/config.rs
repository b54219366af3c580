//! Run configuration: a TOML file with one table per pipeline stage.
//!
//! Relative paths inside the file resolve against the file's directory.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mpsolve::constants::SvConfig;
use mpsolve::fieldio::read_field;
use mpsolve::mountainpass::NewtonConfig;
use mpsolve::{
    build_torus_with_scheme, make_em_family, make_hebey_family, make_power_family, make_table_family, ConstantsConfig,
    ContinuationConfig, Field, ManifoldGrid, MpConfig, NonlinearFamily, Problem, Schedule, Scheme,
};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

/// One Fourier term `amplitude · cos|sin(2π k x_axis / L_axis)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub amplitude: f64,
    pub axis: usize,
    pub k: u32,
    #[serde(default = "default_phase")]
    pub phase: Phase,
}

fn default_phase() -> Phase {
    Phase::Cos
}

/// Nodal coefficient: a number, a constant plus Fourier modes, or an FLD1
/// file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Value(f64),
    Table(CoefficientTable),
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientTable {
    pub constant: Option<f64>,
    #[serde(default)]
    pub modes: Vec<Mode>,
    pub file: Option<PathBuf>,
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Value(1.0)
    }
}

impl Coefficient {
    fn zero() -> Self {
        Coefficient::Value(0.0)
    }

    pub fn to_field(&self, grid: &Arc<ManifoldGrid>, base: &Path, name: &str) -> Result<Field, ConfigError> {
        let table = match self {
            Coefficient::Value(c) => return Ok(Field::constant(grid, *c)),
            Coefficient::Table(t) => t,
        };
        if let Some(file) = &table.file {
            if table.constant.is_some() || !table.modes.is_empty() {
                return invalid(format!("{name}: `file` excludes `constant` and `modes`"));
            }
            return read_field(base.join(file), grid).map_err(|e| ConfigError::Invalid(format!("{name}: {e}")));
        }
        let dim = grid.dim();
        for m in &table.modes {
            if m.axis >= dim {
                return invalid(format!("{name}: mode axis {} >= dim {dim}", m.axis));
            }
        }
        let lengths = grid.lengths().to_vec();
        let c = table.constant.unwrap_or(0.0);
        Ok(Field::from_fn(grid, |x| {
            let mut v = c;
            for m in &table.modes {
                let arg = 2.0 * PI * m.k as f64 * x[m.axis] / lengths[m.axis];
                v += m.amplitude
                    * match m.phase {
                        Phase::Cos => arg.cos(),
                        Phase::Sin => arg.sin(),
                    };
            }
            v
        }))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldSpec {
    pub dim: usize,
    pub points: Vec<usize>,
    pub lengths: Vec<f64>,
    pub scheme: Option<Scheme>,
    /// Log conformal factor `φ`, metric `e^{2φ} δ`.
    pub conformal: Option<Coefficient>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    /// `f = B|u|^{2*-2}u`, `g = A s^{-(2*+2)/2}`.
    Hebey {
        #[serde(default = "Coefficient::zero")]
        a: Coefficient,
        b: Coefficient,
    },
    /// Hebey plus `C s^{-(p+2)/2}` in `g`.
    Em {
        #[serde(default = "Coefficient::zero")]
        a: Coefficient,
        b: Coefficient,
        c: Coefficient,
        p: f64,
    },
    /// `f = B|u|^{q-2}u`, `g = A s^{-r}`.
    Power {
        b: Coefficient,
        q: f64,
        #[serde(default = "Coefficient::zero")]
        a: Coefficient,
        r: f64,
    },
    /// Sample tables `(u, f(u))` and `(s, g(s))`.
    CustomTable {
        mu: f64,
        f_u: Vec<f64>,
        f_values: Vec<f64>,
        g_s: Vec<f64>,
        g_values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSpec {
    pub eps0: f64,
    pub ratio: f64,
    pub k_max: usize,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        let s = Schedule::default();
        Self {
            eps0: s.eps0,
            ratio: s.ratio,
            k_max: s.k_max,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Palais–Smale residual required of a converged solve.
    pub tol_residual: f64,
    /// Weak-form residual required at `ε = 0`.
    pub tol_weak: f64,
    /// Slack allowed on energy identities and pointwise inequalities.
    pub tol_identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            tol_weak: 1e-6,
            tol_identity: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    /// `ε` for `solve`; defaults to `schedule.eps0`.
    pub eps: Option<f64>,
    pub path_nodes: usize,
    pub max_sweeps: usize,
    pub ray_samples: usize,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub final_refine: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let mp = MpConfig::default();
        Self {
            eps: None,
            path_nodes: mp.path_nodes,
            max_sweeps: mp.max_sweeps,
            ray_samples: mp.ray_samples,
            newton_max_iter: mp.newton.max_iter,
            linear_tol: mp.newton.linear_tol,
            final_refine: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSpec {
    pub sv_starts: usize,
    pub sv_max_iter: usize,
    pub sv_override: Option<f64>,
    pub kv_tol: f64,
}

impl Default for ConstantsSpec {
    fn default() -> Self {
        let c = ConstantsConfig::default();
        Self {
            sv_starts: c.sv.starts,
            sv_max_iter: c.sv.max_iter,
            sv_override: None,
            kv_tol: c.kv_tol,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySpec {
    /// Field to verify; defaults to `u_final.fld` in the output directory.
    pub field: Option<PathBuf>,
    pub battery_size: usize,
    pub gradient_directions: usize,
    /// `ε` for the gradient check and identities; defaults to the last rung.
    pub eps: Option<f64>,
    pub bootstrap_s: usize,
    pub bootstrap_l: usize,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            field: None,
            battery_size: 16,
            gradient_directions: 10,
            eps: None,
            bootstrap_s: 4,
            bootstrap_l: 8,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExportSpec {
    /// FLD1 file to export; defaults to `u_final.fld` in the output directory.
    pub field: Option<PathBuf>,
    /// CSV destination; defaults to the field name with a `.csv` extension.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub manifold: ManifoldSpec,
    #[serde(default)]
    pub potential: Coefficient,
    pub family: FamilySpec,
    #[serde(default)]
    pub psi: Coefficient,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub constants: ConstantsSpec,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub export: ExportSpec,
    /// Directory of the config file; not part of the schema.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Parsed config plus the exact bytes it was read from.
pub struct LoadedConfig {
    pub config: RunConfig,
    pub bytes: Vec<u8>,
}

pub fn load(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let bytes = std::fs::read(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| ConfigError::Invalid(format!("not UTF-8: {e}")))?;
    let mut config = parse(text)?;
    config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, bytes })
}

pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
    let config: RunConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

fn positive(name: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} = {x} must be positive and finite"))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.manifold;
        if m.dim < 3 {
            return invalid(format!("manifold.dim = {} must be at least 3", m.dim));
        }
        if m.points.len() != m.dim || m.lengths.len() != m.dim {
            return invalid(format!(
                "manifold.points and manifold.lengths need {} entries, got {} and {}",
                m.dim,
                m.points.len(),
                m.lengths.len()
            ));
        }
        let t = &self.tolerances;
        positive("tolerances.tol_residual", t.tol_residual)?;
        positive("tolerances.tol_weak", t.tol_weak)?;
        positive("tolerances.tol_identity", t.tol_identity)?;
        positive("schedule.eps0", self.schedule.eps0)?;
        if !(self.schedule.ratio > 0.0 && self.schedule.ratio < 1.0) {
            return invalid(format!("schedule.ratio = {} must lie in (0, 1)", self.schedule.ratio));
        }
        if let Some(eps) = self.solver.eps {
            positive("solver.eps", eps)?;
        }
        if let Some(eps) = self.verify.eps {
            positive("verify.eps", eps)?;
        }
        if let Some(s) = self.constants.sv_override {
            positive("constants.sv_override", s)?;
        }
        positive("constants.kv_tol", self.constants.kv_tol)?;
        positive("solver.linear_tol", self.solver.linear_tol)?;
        if self.solver.path_nodes < 3 {
            return invalid("solver.path_nodes must be at least 3");
        }
        if self.constants.sv_starts == 0 || self.verify.battery_size == 0 {
            return invalid("constants.sv_starts and verify.battery_size must be positive");
        }
        if self.verify.bootstrap_s == 0 || self.verify.bootstrap_l < 2 {
            return invalid("verify.bootstrap_s must be positive and verify.bootstrap_l at least 2");
        }
        Ok(())
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output_dir)
    }

    pub fn schedule(&self) -> Schedule {
        Schedule {
            eps0: self.schedule.eps0,
            ratio: self.schedule.ratio,
            k_max: self.schedule.k_max,
        }
    }

    pub fn mp_config(&self) -> MpConfig {
        let s = &self.solver;
        MpConfig {
            path_nodes: s.path_nodes,
            max_sweeps: s.max_sweeps,
            ray_samples: s.ray_samples,
            newton: NewtonConfig {
                max_iter: s.newton_max_iter,
                tol_residual: self.tolerances.tol_residual,
                linear_tol: s.linear_tol,
                ..NewtonConfig::default()
            },
            ..MpConfig::default()
        }
    }

    pub fn constants_config(&self) -> ConstantsConfig {
        let c = &self.constants;
        ConstantsConfig {
            kv_tol: c.kv_tol,
            sv: SvConfig {
                starts: c.sv_starts,
                max_iter: c.sv_max_iter,
                seed: self.seed,
                ..SvConfig::default()
            },
            sv_override: c.sv_override,
            ..ConstantsConfig::default()
        }
    }

    pub fn continuation_config(&self) -> ContinuationConfig {
        ContinuationConfig {
            schedule: self.schedule(),
            mp: self.mp_config(),
            battery_size: self.verify.battery_size,
            seed: self.seed,
            final_refine: self.solver.final_refine,
            ..ContinuationConfig::default()
        }
    }

    pub fn solve_eps(&self) -> f64 {
        self.solver.eps.unwrap_or(self.schedule.eps0)
    }

    pub fn verify_eps(&self) -> f64 {
        self.verify
            .eps
            .unwrap_or_else(|| self.schedule().eps(self.schedule.k_max))
    }

    pub fn grid(&self) -> Result<Arc<ManifoldGrid>, ConfigError> {
        let m = &self.manifold;
        let num = |e: mpsolve::Error| ConfigError::Invalid(format!("manifold: {e}"));
        let conformal = match &m.conformal {
            None => None,
            Some(c) => {
                let flat = build_torus_with_scheme(m.dim, &m.points, &m.lengths, None, Scheme::FiniteDifference)
                    .map_err(num)?;
                Some(c.to_field(&flat, &self.base_dir, "manifold.conformal")?.into_values())
            }
        };
        let scheme = m.scheme.unwrap_or(if conformal.is_some() {
            Scheme::FiniteDifference
        } else {
            Scheme::Spectral
        });
        build_torus_with_scheme(m.dim, &m.points, &m.lengths, conformal, scheme).map_err(num)
    }

    pub fn family(&self, grid: &Arc<ManifoldGrid>) -> Result<NonlinearFamily, ConfigError> {
        let base = &self.base_dir;
        let field = |c: &Coefficient, name: &str| c.to_field(grid, base, name);
        let dim = grid.dim();
        let family = match &self.family {
            FamilySpec::Hebey { a, b } => make_hebey_family(&field(a, "family.a")?, &field(b, "family.b")?, dim),
            FamilySpec::Em { a, b, c, p } => make_em_family(
                &field(a, "family.a")?,
                &field(b, "family.b")?,
                &field(c, "family.c")?,
                *p,
                dim,
            ),
            FamilySpec::Power { b, q, a, r } => {
                make_power_family(&field(b, "family.b")?, *q, &field(a, "family.a")?, *r)
            }
            FamilySpec::CustomTable {
                mu,
                f_u,
                f_values,
                g_s,
                g_values,
            } => make_table_family(dim, *mu, (f_u, f_values), (g_s, g_values)),
        };
        family.map_err(|e| ConfigError::Invalid(format!("family: {e}")))
    }

    pub fn potential(&self, grid: &Arc<ManifoldGrid>) -> Result<Field, ConfigError> {
        self.potential.to_field(grid, &self.base_dir, "potential")
    }

    pub fn psi(&self, grid: &Arc<ManifoldGrid>) -> Result<Field, ConfigError> {
        self.psi.to_field(grid, &self.base_dir, "psi")
    }
}

/// Grid, problem and comparison direction built from a config. A potential
/// that fails (V) is a verdict, not a config error, so the problem is kept
/// as a `Result`.
pub struct Setup {
    pub grid: Arc<ManifoldGrid>,
    pub potential: Field,
    pub family: NonlinearFamily,
    pub psi: Field,
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Self, ConfigError> {
        let grid = cfg.grid()?;
        Ok(Self {
            potential: cfg.potential(&grid)?,
            family: cfg.family(&grid)?,
            psi: cfg.psi(&grid)?,
            grid,
        })
    }

    pub fn problem(&self) -> mpsolve::Result<Problem> {
        Problem::new(self.potential.clone(), self.family.clone())
    }
}
