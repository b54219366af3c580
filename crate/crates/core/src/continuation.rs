//! The `ε → 0` ladder with warm starts, the lower bound at the minimum point,
//! and the weak-form check of the limit equation at `ε = 0`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{normalize_psi, MpGeometry};
use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::manifold::Field;
use crate::mountainpass::{find_t2, newton_refine, solve_mountain_pass, sup_along_ray, MpConfig, MpStatus};
use crate::random::band_limited;
use crate::sum::pairwise_sum;

/// Geometric schedule `ε_k = ε_0 r^k`, `k = 0..=k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub eps0: f64,
    pub ratio: f64,
    pub k_max: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            eps0: 0.1,
            ratio: 0.5,
            k_max: 20,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return Err(Error::Domain(format!("eps0 = {} must be positive", self.eps0)));
        }
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Domain(format!("ratio = {} must lie in (0, 1)", self.ratio)));
        }
        Ok(())
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.eps0 * self.ratio.powi(k as i32)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..=self.k_max).map(|k| self.eps(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContinuationConfig {
    pub schedule: Schedule,
    pub mp: MpConfig,
    /// Test functions in the final weak-form check.
    pub battery_size: usize,
    pub seed: u64,
    /// Run Newton at `ε = 0` on the last rung before verifying.
    pub final_refine: bool,
    /// `min u` below this on any rung is reported as a singular collapse.
    pub collapse_floor: f64,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::default(),
            mp: MpConfig::default(),
            battery_size: 16,
            seed: 0,
            final_refine: false,
            collapse_floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinPointCheck {
    /// Lowest-index node attaining `min u`.
    pub node: usize,
    pub min_u: f64,
    /// `-Δ_g u` at the minimum node; non-positive for the flux-form stencil.
    pub laplacian: f64,
    /// `V u + |f(x,u)| − g(x, ε+u²) u` at the minimum node.
    pub margin: f64,
    /// `V u − f(x,u) − g(x, ε+u²) u` at the minimum node, which equals
    /// `Δ_g u` there for an exact solution.
    pub tight_margin: f64,
}

/// Evaluate the minimum-point inequality `V u + |f| >= g(x, ε+u²) u`.
pub fn check_min_point(problem: &Problem, eps: f64, u: &Field) -> Result<MinPointCheck> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be non-negative")));
    }
    let node = u.argmin();
    let m = u.values()[node];
    if !(m > 0.0) {
        return Err(Error::Domain(format!("min u = {m:.3e}; the check needs u > 0")));
    }
    let lap = problem.grid().laplacian_values(u.values())[node];
    let v = problem.potential().values()[node];
    let fam = problem.family();
    let f = fam.f(node, m);
    let gu = fam.g(node, eps + m * m) * m;
    Ok(MinPointCheck {
        node,
        min_u: m,
        laplacian: -lap,
        margin: v * m + f.abs() - gu,
        tight_margin: v * m - f - gu,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub battery_size: usize,
    /// `max_φ |∫∇u·∇φ + Vuφ − ∫fφ − ∫g(x,u²)uφ|`, `‖φ‖ = 1`.
    pub weak_residual_max: f64,
    /// `max_φ ∫ g(x,u²)|uφ|`.
    pub singular_integrability: f64,
    pub positivity_min: f64,
    pub min_point_inequality_margin: f64,
}

/// Test functions: the constant, `cos` and `sin` of the first mode on each
/// axis, then seeded band-limited noise; each normalized to `‖φ‖ = 1`.
pub fn test_battery(problem: &Problem, size: usize, seed: u64) -> Result<Vec<Field>> {
    let grid = problem.grid();
    let mut raw = vec![Field::constant(grid, 1.0)];
    for d in 0..grid.dim() {
        let k = 2.0 * std::f64::consts::PI / grid.lengths()[d];
        raw.push(Field::from_fn(grid, |x| (k * x[d]).cos()));
        raw.push(Field::from_fn(grid, |x| (k * x[d]).sin()));
    }
    raw.truncate(size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while raw.len() < size {
        raw.push(band_limited(grid, &mut rng, 2));
    }
    raw.iter()
        .map(|phi| normalize_psi(problem, phi).map(|(p, _)| p))
        .collect()
}

/// Weak form of the unregularized equation tested against a battery.
pub fn verify_solution(problem: &Problem, u: &Field, battery_size: usize, seed: u64) -> Result<VerificationReport> {
    let positivity_min = u.min();
    if !(positivity_min > 0.0) {
        return Err(Error::Domain(format!(
            "min u = {positivity_min:.3e}; g(x,u²) is undefined where u = 0"
        )));
    }
    let grid = problem.grid();
    let fam = problem.family();
    let w = grid.volume_weights();
    let au = problem.apply_operator(u.values());
    let uv = u.values();
    let f: Vec<f64> = uv.iter().enumerate().map(|(i, &x)| fam.f(i, x)).collect();
    let gu: Vec<f64> = uv.iter().enumerate().map(|(i, &x)| fam.g(i, x * x) * x).collect();
    let battery = test_battery(problem, battery_size, seed)?;
    let rows: Vec<(f64, f64)> = battery
        .par_iter()
        .map(|phi| {
            let p = phi.values();
            let lhs = grid.dot(&au, p);
            let rhs = grid.dot(&f, p) + grid.dot(&gu, p);
            let sing: Vec<f64> = (0..p.len()).map(|i| w[i] * (gu[i] * p[i]).abs()).collect();
            ((lhs - rhs).abs(), pairwise_sum(&sing))
        })
        .collect();
    let check = check_min_point(problem, 0.0, u)?;
    Ok(VerificationReport {
        battery_size: battery.len(),
        weak_residual_max: rows.iter().fold(0.0, |m, r| m.max(r.0)),
        singular_integrability: rows.iter().fold(0.0, |m, r| m.max(r.1)),
        positivity_min,
        min_point_inequality_margin: check.margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rung {
    pub eps: f64,
    pub c_eps: f64,
    pub min_u: f64,
    pub ps_residual: f64,
    /// `‖u_ε‖²`
    pub norm_sq: f64,
    pub bracket: (f64, f64),
    /// Solved by Newton from the previous rung rather than a full mountain pass.
    pub warm: bool,
    pub converged: bool,
    pub min_point: MinPointCheck,
}

#[derive(Debug, Clone)]
pub struct ContinuationResult {
    pub ladder: Vec<Rung>,
    pub delta0: f64,
    pub u_final: Field,
    pub final_verification: VerificationReport,
}

impl ContinuationResult {
    pub fn all_converged(&self) -> bool {
        self.ladder.iter().all(|r| r.converged)
    }

    /// `eps,c_eps,min_u,residual` rows.
    pub fn ladder_csv(&self) -> String {
        let mut out = String::from("eps,c_eps,min_u,residual\n");
        for r in &self.ladder {
            out.push_str(&format!(
                "{:e},{:e},{:e},{:e}\n",
                r.eps, r.c_eps, r.min_u, r.ps_residual
            ));
        }
        out
    }
}

fn collapse_diagnostic(problem: &Problem, eps: f64, u: &Field) -> String {
    let fam = problem.family();
    let v = problem.potential().values();
    let mut lhs = f64::NEG_INFINITY;
    let mut rhs = f64::INFINITY;
    for (i, &x) in u.values().iter().enumerate() {
        if x > 0.0 {
            lhs = lhs.max(v[i] + fam.f(i, x).abs() / x);
        }
        rhs = rhs.min(fam.g(i, eps + x * x));
    }
    format!(
        "max_M (V + |f(x,u)|/u) = {lhs:.6e} vs min_M g(x, eps + u^2) = {rhs:.6e}; \
         a bounded left side against a growing right side points at (F2) or (G4)"
    )
}

/// Solve along the schedule. Rung 0 is a full mountain pass; later rungs try
/// Newton from the previous solution and fall back to a mountain pass when
/// it fails or leaves the level bracket.
pub fn run_continuation(
    problem: &Problem,
    psi: &Field,
    geometry: &MpGeometry,
    cfg: &ContinuationConfig,
) -> Result<ContinuationResult> {
    cfg.schedule.validate()?;
    let (unit, _) = normalize_psi(problem, psi)?;
    let tol = cfg.mp.bracket_tol;
    let mut ladder: Vec<Rung> = Vec::new();
    let mut prev: Option<Field> = None;
    for eps in cfg.schedule.values() {
        let t2 = find_t2(problem, eps, &unit, geometry.t0)?;
        let (_, sup) = sup_along_ray(problem, eps, &unit, geometry.t1, t2, cfg.mp.ray_samples)?;
        let lower = geometry.phi_t0;
        let mut solved = None;
        if let Some(u_prev) = &prev {
            let out = newton_refine(problem, eps, u_prev, &cfg.mp.newton)?;
            if out.converged {
                let c = problem.energy_values(eps, out.u.values()).total;
                if c >= lower - tol && c <= sup + tol {
                    solved = Some((out.u, c, out.residual, true, true));
                }
            }
        }
        let (u, c, residual, warm, converged) = match solved {
            Some(s) => s,
            None => {
                let mp = solve_mountain_pass(problem, eps, &unit, geometry, &cfg.mp)?;
                let ok = mp.status == MpStatus::Converged;
                (mp.u_eps, mp.c_eps, mp.ps_residual, false, ok)
            }
        };
        if converged && !(c >= lower - tol && c <= sup + tol) {
            return Err(Error::BracketViolation {
                level: c,
                lower,
                upper: sup,
            });
        }
        if u.min() < cfg.collapse_floor {
            return Err(Error::SingularCollapse {
                eps,
                min_u: u.min(),
                diagnostic: collapse_diagnostic(problem, eps, &u),
            });
        }
        let min_point = check_min_point(problem, eps, &u)?;
        ladder.push(Rung {
            eps,
            c_eps: c,
            min_u: u.min(),
            ps_residual: residual,
            norm_sq: problem.h1_norm_sq(&u)?,
            bracket: (lower, sup),
            warm,
            converged,
            min_point,
        });
        prev = Some(u);
    }
    let mut u_final = prev.expect("schedule has at least one rung");
    if cfg.final_refine {
        let floor = 0.5 * u_final.min();
        let out = newton_refine(problem, 0.0, &u_final, &cfg.mp.newton)?;
        if out.converged && out.u.min() >= floor {
            u_final = out.u;
        }
    }
    let delta0 = ladder.iter().map(|r| r.min_u).fold(f64::INFINITY, f64::min);
    let final_verification = verify_solution(problem, &u_final, cfg.battery_size, cfg.seed)?;
    Ok(ContinuationResult {
        ladder,
        delta0,
        u_final,
        final_verification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::mp_geometry;
    use crate::manifold::build_torus;
    use crate::nonlinearity::{make_hebey_family, make_power_family};

    fn constant_problem(a: f64) -> Problem {
        let g = build_torus(3, &[8, 8, 8], &[1.0; 3], None).unwrap();
        let fam = make_hebey_family(&Field::constant(&g, a), &Field::constant(&g, 1.0), 3).unwrap();
        Problem::new(Field::constant(&g, 1.0), fam).unwrap()
    }

    #[test]
    fn schedule_values() {
        let s = Schedule::default();
        let v = s.values();
        assert_eq!(v.len(), 21);
        assert_eq!(v[0], 0.1);
        assert!((v[20] - 0.1 / 1_048_576.0).abs() < 1e-20);
        assert!(Schedule { ratio: 1.0, ..s }.validate().is_err());
    }

    #[test]
    fn min_point_of_constant_solution() {
        let g = build_torus(3, &[4, 4, 4], &[1.0; 3], None).unwrap();
        let one = Field::constant(&g, 1.0);
        let fam = make_power_family(&one, 4.0, &Field::constant(&g, 0.0), 2.0).unwrap();
        let p = Problem::new(one.clone(), fam).unwrap();
        let chk = check_min_point(&p, 0.1, &one).unwrap();
        assert_eq!(chk.node, 0);
        assert_eq!(chk.tight_margin, 0.0);
        assert_eq!(chk.margin, 2.0);
        assert!(chk.laplacian.abs() < 1e-12);
    }

    #[test]
    fn verification_rejects_nonpositive_fields() {
        let p = constant_problem(1e-7);
        assert!(verify_solution(&p, &Field::zeros(p.grid()), 4, 0).is_err());
    }

    #[test]
    fn battery_is_normalized() {
        let p = constant_problem(1e-7);
        let b = test_battery(&p, 10, 3).unwrap();
        assert_eq!(b.len(), 10);
        for phi in &b {
            assert!((p.h1_norm_sq(phi).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_schedule_is_one_solve() {
        let p = constant_problem(1e-7);
        let geo = mp_geometry(1.0, 1.0, 3).unwrap();
        let cfg = ContinuationConfig {
            schedule: Schedule {
                k_max: 0,
                ..Schedule::default()
            },
            ..ContinuationConfig::default()
        };
        let res = run_continuation(&p, &Field::constant(p.grid(), 1.0), &geo, &cfg).unwrap();
        assert_eq!(res.ladder.len(), 1);
        assert!(!res.ladder[0].warm);
        assert!(res.all_converged());
    }
}
