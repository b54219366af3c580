//! Mountain-pass solve at fixed `ε`.
//!
//! A discrete path joins `t_1ψ` to `t_2ψ`, where `J_ε(t_2ψ) < 0`. Sweeps move
//! the interior nodes one H¹-preconditioned descent step each and then
//! redistribute them by H¹ arc length, so the path relaxes toward a minimal
//! energy path whose maximum sits at the saddle. Once the path maximum
//! stalls, the interpolated argmax field seeds a damped Newton iteration on
//! the residual.

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::{golden_max, normalize_psi, MpGeometry};
use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::krylov::fgmres;
use crate::manifold::Field;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Target L²(dv_g) norm of the residual.
    pub tol_residual: f64,
    /// Relative tolerance of the inner Krylov solve.
    pub linear_tol: f64,
    pub restart: usize,
    pub linear_max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tol_residual: 1e-10,
            linear_tol: 1e-10,
            restart: 60,
            linear_max_iter: 600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpConfig {
    /// Nodes of the discrete path, endpoints included.
    pub path_nodes: usize,
    pub max_sweeps: usize,
    /// Sweeps over which the path maximum is compared for stalling.
    pub stall_window: usize,
    /// Relative decrease of the path maximum below which the path counts as
    /// stalled.
    pub stall_tol: f64,
    /// Slack on the level bracket `[Φ(t_0), sup_t J_ε(tψ)]`.
    pub bracket_tol: f64,
    /// Samples for the supremum along the ray.
    pub ray_samples: usize,
    pub newton: NewtonConfig,
}

impl Default for MpConfig {
    fn default() -> Self {
        Self {
            path_nodes: 33,
            max_sweeps: 400,
            stall_window: 5,
            stall_tol: 1e-4,
            bracket_tol: 1e-8,
            ray_samples: 400,
            newton: NewtonConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MpStatus {
    Converged,
    /// Sweep cap reached without a Newton refinement inside the bracket; the
    /// best path point is returned.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepLog {
    pub iteration: usize,
    pub path_max: f64,
    pub ps_residual: f64,
}

#[derive(Debug, Clone)]
pub struct MpResult {
    pub u_eps: Field,
    pub c_eps: f64,
    pub ps_residual: f64,
    pub iterations: usize,
    pub newton_iterations: usize,
    /// `(Φ(t_0), sup_{t∈[t_1,t_2]} J_ε(tψ))`
    pub bracket: (f64, f64),
    pub t2: f64,
    pub status: MpStatus,
    pub log: Vec<SweepLog>,
}

fn ray_energy(problem: &Problem, eps: f64, unit: &Field, t: f64) -> f64 {
    let u: Vec<f64> = unit.values().iter().map(|x| t * x).collect();
    problem.energy_values(eps, &u).total
}

/// A radius with `J_ε(t_2 ψ) < 0` for the normalized `ψ`. Scans
/// `t = t_0 2^k`, then bisects to the sign change and returns the first
/// point past it.
pub fn find_t2(problem: &Problem, eps: f64, psi: &Field, t0: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps = {eps} must be positive")));
    }
    let (unit, _) = normalize_psi(problem, psi)?;
    let j = |t: f64| ray_energy(problem, eps, &unit, t);
    let mut lo = t0;
    let mut hi = None;
    for k in 0..=30 {
        let t = t0 * 2f64.powi(k);
        if j(t) < 0.0 {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi.ok_or(Error::NoSignChange {
        t_max: t0 * 2f64.powi(30),
    })?;
    if lo == hi {
        lo = 0.5 * t0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if j(mid) < 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `sup_{t∈[t1,t2]} J_ε(tψ)` for the normalized `ψ`: dense sampling, then
/// golden-section refinement around the best sample. Returns `(t, J)`.
pub fn sup_along_ray(problem: &Problem, eps: f64, psi: &Field, t1: f64, t2: f64, samples: usize) -> Result<(f64, f64)> {
    let (unit, _) = normalize_psi(problem, psi)?;
    let samples = samples.max(3);
    let ts: Vec<f64> = (0..samples)
        .map(|i| t1 + (t2 - t1) * i as f64 / (samples - 1) as f64)
        .collect();
    let js: Vec<f64> = ts.par_iter().map(|&t| ray_energy(problem, eps, &unit, t)).collect();
    let k = (0..samples).fold(0, |b, i| if js[i] > js[b] { i } else { b });
    let a = ts[k.saturating_sub(1)];
    let b = ts[(k + 1).min(samples - 1)];
    let (t, jt) = golden_max(|t| ray_energy(problem, eps, &unit, t), a, b, 1e-13);
    Ok(if jt > js[k] { (t, jt) } else { (ts[k], js[k]) })
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: Field,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nodewise derivative of `u ↦ f(x,u) + g(x, ε+u²)u` by central differences.
fn source_derivative(problem: &Problem, eps: f64, u: &[f64]) -> Vec<f64> {
    u.par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let mut h = 1e-6 * x.abs().max(1e-3);
            // keep the stencil away from the singularity when ε is tiny
            if eps < 1e-2 * x * x {
                h = h.min(0.25 * x.abs());
            }
            (problem.source(eps, i, x + h) - problem.source(eps, i, x - h)) / (2.0 * h)
        })
        .collect()
}

/// Damped Newton on the residual with the positivity projection `u ← |u|`.
/// The Jacobian `-Δ_g + V − ∂_u(f + g u)` is applied matrix-free and inverted
/// by flexible GMRES, since it is indefinite at a mountain-pass point. With
/// `eps = 0` the iterate must stay strictly positive.
pub fn newton_refine(problem: &Problem, eps: f64, guess: &Field, cfg: &NewtonConfig) -> Result<NewtonOutcome> {
    if eps < 0.0 {
        return Err(Error::Domain(format!("eps = {eps} must be non-negative")));
    }
    let grid = problem.grid();
    let mut u: Vec<f64> = guess.values().iter().map(|x| x.abs()).collect();
    let positive = |u: &[f64]| eps > 0.0 || u.iter().all(|&x| x > 0.0);
    if !positive(&u) {
        return Err(Error::Domain("eps = 0 requires a strictly positive iterate".into()));
    }
    let mut r = problem.residual_values(eps, &u);
    let mut norm = problem.l2(&r);
    let mut iterations = 0;
    while iterations < cfg.max_iter && norm >= cfg.tol_residual {
        iterations += 1;
        let d = source_derivative(problem, eps, &u);
        let apply = |v: &[f64]| {
            let mut out = problem.apply_operator(v);
            for ((o, di), vi) in out.iter_mut().zip(&d).zip(v) {
                *o -= di * vi;
            }
            out
        };
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let dot = |a: &[f64], b: &[f64]| grid.dot(a, b);
        let step = match fgmres(
            apply,
            |v| problem.precondition(v),
            dot,
            &rhs,
            cfg.linear_tol,
            cfg.restart,
            cfg.linear_max_iter,
        ) {
            Ok((s, _)) => s,
            Err(Error::Convergence { .. }) => break,
            Err(e) => return Err(e),
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, s)| (a + lambda * s).abs()).collect();
            if positive(&trial) {
                let rt = problem.residual_values(eps, &trial);
                let nt = problem.l2(&rt);
                if nt.is_finite() && nt <= (1.0 - 1e-4 * lambda) * norm {
                    u = trial;
                    r = rt;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(NewtonOutcome {
        u: Field::from_raw(grid, u),
        residual: norm,
        iterations,
        converged: norm < cfg.tol_residual,
    })
}

/// Discrete admissible path with fixed endpoints.
#[derive(Debug, Clone)]
pub struct PathState {
    pub nodes: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
}

impl PathState {
    fn along_ray(problem: &Problem, eps: f64, unit: &Field, t1: f64, t2: f64, count: usize) -> Self {
        let count = count.max(3);
        let nodes = (0..count)
            .map(|j| {
                let t = t1 + (t2 - t1) * j as f64 / (count - 1) as f64;
                unit.values().iter().map(|x| t * x).collect()
            })
            .collect();
        let mut path = Self {
            nodes,
            energies: Vec::new(),
        };
        path.evaluate(problem, eps);
        path
    }

    fn evaluate(&mut self, problem: &Problem, eps: f64) {
        self.energies = self
            .nodes
            .par_iter()
            .map(|u| problem.energy_values(eps, u).total)
            .collect();
    }

    /// Highest-energy node, ties to the lowest index.
    pub fn argmax(&self) -> usize {
        (0..self.energies.len()).fold(0, |b, i| if self.energies[i] > self.energies[b] { i } else { b })
    }

    pub fn max_energy(&self) -> f64 {
        self.energies[self.argmax()]
    }

    /// One preconditioned descent step with Armijo backtracking on each
    /// interior node whose energy lies in the upper half between the higher
    /// endpoint and the path maximum. Lower nodes stay put; past the saddle
    /// `J_ε` is unbounded below and free nodes would run off.
    fn descend(&mut self, problem: &Problem, eps: f64) -> Result<()> {
        let last = self.nodes.len() - 1;
        let base = self.energies[0].max(self.energies[last]);
        let level = base + 0.5 * (self.max_energy() - base);
        let max_step = 0.5 * self.arc_length(problem) / last as f64;
        let moved: Vec<(Vec<f64>, f64)> = self.nodes[1..last]
            .par_iter()
            .zip(&self.energies[1..last])
            .map(|(u, &e)| {
                if e > level {
                    descent_step(problem, eps, u, e, max_step)
                } else {
                    Ok((u.clone(), e))
                }
            })
            .collect::<Result<_>>()?;
        for (j, (u, e)) in moved.into_iter().enumerate() {
            self.nodes[j + 1] = u;
            self.energies[j + 1] = e;
        }
        Ok(())
    }

    /// Redistribute interior nodes uniformly in H¹ arc length.
    fn retension(&mut self, problem: &Problem, eps: f64) {
        let count = self.nodes.len();
        let mut arc = vec![0.0; count];
        for j in 1..count {
            let diff: Vec<f64> = self.nodes[j]
                .iter()
                .zip(&self.nodes[j - 1])
                .map(|(a, b)| a - b)
                .collect();
            arc[j] = arc[j - 1] + problem.h1_values(&diff).max(0.0).sqrt();
        }
        let total = arc[count - 1];
        if !(total > 0.0) {
            return;
        }
        let old = self.nodes.clone();
        let mut seg = 0;
        for j in 1..count - 1 {
            let target = total * j as f64 / (count - 1) as f64;
            while seg < count - 2 && arc[seg + 1] < target {
                seg += 1;
            }
            let len = arc[seg + 1] - arc[seg];
            let w = if len > 0.0 { (target - arc[seg]) / len } else { 0.0 };
            self.nodes[j] = old[seg]
                .iter()
                .zip(&old[seg + 1])
                .map(|(a, b)| (1.0 - w) * a + w * b)
                .collect();
        }
        self.evaluate(problem, eps);
    }

    fn arc_length(&self, problem: &Problem) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| {
                let diff: Vec<f64> = w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect();
                problem.h1_values(&diff).max(0.0).sqrt()
            })
            .sum()
    }

    /// Field at the vertex of the parabola through the argmax node and its
    /// neighbors, linearly interpolated along the path.
    fn interpolated_peak(&self) -> Vec<f64> {
        let k = self.argmax();
        let last = self.nodes.len() - 1;
        if k == 0 || k == last {
            return self.nodes[k].clone();
        }
        let (em, e0, ep) = (self.energies[k - 1], self.energies[k], self.energies[k + 1]);
        let curv = em - 2.0 * e0 + ep;
        let offset = if curv < 0.0 {
            (0.5 * (em - ep) / curv).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let (other, w) = if offset >= 0.0 {
            (k + 1, offset)
        } else {
            (k - 1, -offset)
        };
        self.nodes[k]
            .iter()
            .zip(&self.nodes[other])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }
}

/// Armijo step along the Riesz gradient `w = (-Δ_g+V)^{-1} r`, with H¹ step
/// length at most `max_step`.
fn descent_step(problem: &Problem, eps: f64, u: &[f64], energy: f64, max_step: f64) -> Result<(Vec<f64>, f64)> {
    let r = problem.residual_values(eps, u);
    let (w, _) = problem.solve_operator(&r, 1e-8)?;
    // ⟨r, w⟩ = ‖w‖²
    let slope = problem.grid().dot(&r, &w);
    if !(slope > 0.0) {
        return Ok((u.to_vec(), energy));
    }
    let mut tau = (max_step / slope.sqrt()).min(1.0);
    for _ in 0..40 {
        let trial: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - tau * b).collect();
        let e = problem.energy_values(eps, &trial).total;
        if e.is_finite() && e <= energy - 1e-4 * tau * slope {
            return Ok((trial, e));
        }
        tau *= 0.5;
    }
    Ok((u.to_vec(), energy))
}

/// Mountain-pass critical point of `J_ε` along paths from `t_1ψ` to `t_2ψ`.
pub fn solve_mountain_pass(
    problem: &Problem,
    eps: f64,
    psi: &Field,
    geometry: &MpGeometry,
    cfg: &MpConfig,
) -> Result<MpResult> {
    let (unit, _) = normalize_psi(problem, psi)?;
    let t2 = find_t2(problem, eps, &unit, geometry.t0)?;
    let (_, sup) = sup_along_ray(problem, eps, &unit, geometry.t1, t2, cfg.ray_samples)?;
    let lower = geometry.phi_t0;
    let tol = cfg.bracket_tol;
    let mut path = PathState::along_ray(problem, eps, &unit, geometry.t1, t2, cfg.path_nodes);
    let mut log = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut newton_iterations = 0;
    let mut since_newton = 0;

    for sweep in 0..=cfg.max_sweeps {
        let k = path.argmax();
        let pmax = path.energies[k];
        let r = problem.residual_values(eps, &path.nodes[k]);
        log.push(SweepLog {
            iteration: sweep,
            path_max: pmax,
            ps_residual: problem.l2(&r),
        });
        history.push(pmax);
        // every admissible path crosses the sphere ‖u‖ = t_0, where J_ε >= Φ(t_0)
        if pmax < lower - tol {
            return Err(Error::BracketViolation {
                level: pmax,
                lower,
                upper: sup,
            });
        }
        let stalled = history.len() > cfg.stall_window && {
            let before = history[history.len() - 1 - cfg.stall_window];
            before - pmax <= cfg.stall_tol * pmax.abs().max(1e-300)
        };
        if (stalled && since_newton >= cfg.stall_window) || sweep == cfg.max_sweeps {
            since_newton = 0;
            let guess = Field::from_raw(problem.grid(), path.interpolated_peak());
            let out = newton_refine(problem, eps, &guess, &cfg.newton)?;
            newton_iterations += out.iterations;
            if out.converged {
                let c = problem.energy_values(eps, out.u.values()).total;
                if c >= lower - tol && c <= sup + tol {
                    return Ok(MpResult {
                        u_eps: out.u,
                        c_eps: c,
                        ps_residual: out.residual,
                        iterations: sweep,
                        newton_iterations,
                        bracket: (lower, sup),
                        t2,
                        status: MpStatus::Converged,
                        log,
                    });
                }
            }
        }
        if sweep == cfg.max_sweeps {
            break;
        }
        since_newton += 1;
        path.descend(problem, eps)?;
        path.retension(problem, eps);
    }

    let k = path.argmax();
    let u: Vec<f64> = path.nodes[k].iter().map(|x| x.abs()).collect();
    let residual = problem.l2(&problem.residual_values(eps, &u));
    Ok(MpResult {
        c_eps: path.energies[k],
        u_eps: Field::from_raw(problem.grid(), u),
        ps_residual: residual,
        iterations: cfg.max_sweeps,
        newton_iterations,
        bracket: (lower, sup),
        t2,
        status: MpStatus::Indeterminate,
        log,
    })
}
