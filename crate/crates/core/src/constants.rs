//! The constants entering the mountain-pass geometry: the coercivity constant
//! `K_V`, the Sobolev constant `S_V`, the growth constant `C_δ` at
//! `δ = 1/(4K_V)`, the functions
//!
//! ```text
//! Φ(t) = ¼t² − S_V C t^{2*}        Ψ(t) = ¾t² + S_V C t^{2*}
//! ```
//!
//! with their critical radii, and the smallness budget on `G` along `ψ`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{Helmholtz, Problem};
use crate::manifold::{Field, ManifoldGrid};
use crate::nonlinearity::{log_space, GrowthLaw, NonlinearFamily, Verdict};
use crate::random::band_limited;
use crate::sum::pairwise_sum;

/// Used in place of a fitted `C_δ = 0` (no positive part of `f` above the
/// linear term), so that `t_0` stays finite.
pub const C_DELTA_FLOOR: f64 = 1e-12;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KvEstimate {
    pub k_v: f64,
    pub lambda_min: f64,
    pub iterations: usize,
}

/// `K_V = 1/λ_min(-Δ_g + V)` by inverse iteration on the shifted operator
/// `-Δ_g + V + σ`, `σ = max(0, -min V) + 1`, which is positive definite for
/// every `V`.
pub fn estimate_kv(grid: &Arc<ManifoldGrid>, potential: &Field, tol: f64) -> Result<KvEstimate> {
    if !Arc::ptr_eq(grid, potential.grid()) && **grid != **potential.grid() {
        return Err(Error::GridMismatch);
    }
    let v = potential.values();
    let sigma = (-potential.min()).max(0.0) + 1.0;
    let shifted = Helmholtz::new(grid, v.iter().map(|x| x + sigma).collect());
    let plain = Helmholtz::new(grid, v.to_vec());
    let dot = |a: &[f64], b: &[f64]| grid.dot(a, b);
    let normalize = |u: &mut Vec<f64>| {
        let n = dot(u, u).sqrt();
        u.iter_mut().for_each(|x| *x /= n);
    };

    // the ground state is positive, so the constant overlaps it
    let mut u = vec![1.0; grid.node_count()];
    normalize(&mut u);
    let mut lambda = dot(&plain.apply(&u), &u);
    let max_iter = 500;
    for it in 1..=max_iter {
        let (mut w, _) = shifted.solve(&u, 1e-13)?;
        normalize(&mut w);
        let aw = plain.apply(&w);
        let next = dot(&aw, &w);
        let res: Vec<f64> = aw.iter().zip(&w).map(|(a, x)| a - next * x).collect();
        let res_norm = dot(&res, &res).sqrt();
        let scale = next.abs().max(1.0);
        let settled = (next - lambda).abs() <= tol * scale && res_norm <= tol.sqrt() * scale;
        u = w;
        lambda = next;
        if settled {
            return finish_kv(lambda, it);
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        residual: lambda,
    })
}

fn finish_kv(lambda: f64, iterations: usize) -> Result<KvEstimate> {
    if lambda <= 0.0 {
        return Err(Error::PotentialNotCoercive(format!(
            "smallest eigenvalue of -Δ_g + V is {lambda:.6e} <= 0"
        )));
    }
    Ok(KvEstimate {
        k_v: 1.0 / lambda,
        lambda_min: lambda,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SvConfig {
    /// Number of ascent starts, the constant included.
    pub starts: usize,
    pub max_iter: usize,
    /// Stationarity tolerance on the tangential Riesz gradient.
    pub tol: f64,
    /// Fourier band of the random starts.
    pub kmax: usize,
    pub seed: u64,
}

impl Default for SvConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_iter: 5000,
            tol: 1e-8,
            kmax: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvEstimate {
    pub s_v: f64,
    /// Index of the winning start (0 is the constant).
    pub best_start: usize,
    /// Ratio reached by each start.
    pub ratios: Vec<f64>,
    /// Stationarity residual of the winner.
    pub residual: f64,
    pub converged: bool,
}

impl SvEstimate {
    /// `(max − min)/max` over the starts.
    pub fn spread(&self) -> f64 {
        let lo = self.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        (self.s_v - lo) / self.s_v
    }
}

/// `∫|u|^{2*} / ‖u‖^{2*}`.
pub fn sobolev_ratio(grid: &ManifoldGrid, potential: &Field, u: &Field) -> Result<f64> {
    let p = grid.critical_exponent();
    let norm_sq = grid.h1_norm_sq(potential, u)?;
    Ok(grid.lp_norm(u, p)?.powf(p) / norm_sq.powf(p / 2.0))
}

struct Ascent {
    ratio: f64,
    residual: f64,
    converged: bool,
}

/// Maximize `Q(u) = ∫|u|^{2*}` on the sphere `‖u‖ = 1` by the normalized
/// Riesz-gradient iteration `u ← w/‖w‖`, `w = (-Δ_g+V)^{-1}(2*|u|^{2*-2}u)`.
/// Because `Q` is convex, each step does not decrease `Q`.
fn ascend(op: &Helmholtz, grid: &ManifoldGrid, start: Vec<f64>, cfg: &SvConfig) -> Result<Ascent> {
    let p = grid.critical_exponent();
    let h1 = |u: &[f64]| grid.dot(&op.apply(u), u);
    let q_of = |u: &[f64]| {
        let w = grid.volume_weights();
        pairwise_sum(&u.iter().zip(w).map(|(x, w)| w * x.abs().powf(p)).collect::<Vec<_>>())
    };
    let mut u = start;
    let n = h1(&u).sqrt();
    u.iter_mut().for_each(|x| *x /= n);
    let mut q = q_of(&u);
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iter {
        let grad: Vec<f64> = u.iter().map(|x| p * x.abs().powf(p - 2.0) * x).collect();
        let (w, _) = op.solve(&grad, 1e-13)?;
        // ‖w‖² = ⟨Aw, w⟩ = ∫ grad·w; the tangential part is w − p Q u
        let w_norm_sq = grid.dot(&grad, &w);
        let tangent: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a - p * q * b).collect();
        residual = (h1(&tangent).max(0.0)).sqrt() / w_norm_sq.sqrt();
        if residual < cfg.tol {
            return Ok(Ascent {
                ratio: q,
                residual,
                converged: true,
            });
        }
        let inv = 1.0 / w_norm_sq.sqrt();
        u = w.into_iter().map(|x| x * inv).collect();
        q = q_of(&u);
    }
    Ok(Ascent {
        ratio: q,
        residual,
        converged: false,
    })
}

/// Multi-start estimate of the discrete Sobolev constant. The constant field
/// is always start 0; the others are seeded band-limited noise. Starts run in
/// parallel and are merged by maximum, ties to the lowest index.
pub fn estimate_sv(grid: &Arc<ManifoldGrid>, potential: &Field, cfg: &SvConfig) -> Result<SvEstimate> {
    let op = Helmholtz::new(grid, potential.values().to_vec());
    let starts: Vec<Vec<f64>> = (0..cfg.starts.max(1))
        .map(|i| {
            if i == 0 {
                vec![1.0; grid.node_count()]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
                band_limited(grid, &mut rng, cfg.kmax).into_values()
            }
        })
        .collect();
    let results: Vec<Ascent> = starts
        .into_par_iter()
        .map(|s| ascend(&op, grid, s, cfg))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.ratio > results[best].ratio {
            best = i;
        }
    }
    Ok(SvEstimate {
        s_v: results[best].ratio,
        best_start: best,
        ratios: results.iter().map(|r| r.ratio).collect(),
        residual: results[best].residual,
        converged: results[best].converged,
    })
}

/// Smallest `C` with `|f(x,u)| <= δ|u| + C|u|^{2*-1}`. Closed form for power
/// laws; otherwise a sampled fit over `u_range` with golden-section
/// refinement around the best sample. A result of zero is floored at
/// [`C_DELTA_FLOOR`].
pub fn fit_c_delta(family: &NonlinearFamily, grid: &ManifoldGrid, delta: f64, u_range: (f64, f64)) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be positive")));
    }
    let p = family.critical_exponent();
    let c = match family.growth() {
        GrowthLaw::Power { exponent, coefficient } => {
            let q = *exponent;
            let b = coefficient.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if q > p + 1e-12 {
                return Err(Error::Hypothesis {
                    hypothesis: "(F1)",
                    detail: format!("power {q} exceeds the critical exponent {p}"),
                });
            }
            if b == 0.0 {
                0.0
            } else if (q - p).abs() <= 1e-12 {
                b
            } else {
                let a = p - q;
                let bb = p - 2.0;
                let u_star = (bb * delta / (a * b)).powf(1.0 / (bb - a));
                b * (1.0 - a / bb) * u_star.powf(-a)
            }
        }
        GrowthLaw::General => sampled_c_delta(family, grid, delta, u_range)?,
    };
    Ok(c.max(C_DELTA_FLOOR))
}

fn sampled_c_delta(family: &NonlinearFamily, grid: &ManifoldGrid, delta: f64, (lo, hi): (f64, f64)) -> Result<f64> {
    let p = family.critical_exponent();
    let us = log_space(lo, hi, 40);
    let mut best = 0.0f64;
    for node in 0..family.sample_nodes(grid) {
        let ratio = |u: f64| {
            let fu = family.f(node, u).abs().max(family.f(node, -u).abs());
            (fu - delta * u).max(0.0) / u.powf(p - 1.0)
        };
        let top = ratio(hi);
        if top > 2.0 * ratio(hi / 10.0) && top > 0.0 {
            return Err(Error::Hypothesis {
                hypothesis: "(F1)",
                detail: format!("|f(u)|/u^(2*-1) still growing at u = {hi:.3e}; growth is supercritical"),
            });
        }
        let values: Vec<f64> = us.iter().map(|&u| ratio(u)).collect();
        let k = (0..values.len()).fold(0, |b, i| if values[i] > values[b] { i } else { b });
        let a = us[k.saturating_sub(1)].ln();
        let b = us[(k + 1).min(us.len() - 1)].ln();
        let refined = golden_max(|x| ratio(x.exp()), a, b, 1e-12);
        best = best.max(values[k]).max(refined.1);
    }
    Ok(best)
}

/// Golden-section search for a maximum of a unimodal `h` on `[a, b]`.
/// Returns `(argmax, max)`.
pub(crate) fn golden_max(h: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut h1 = h(x1);
    let mut h2 = h(x2);
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if h1 < h2 {
            a = x1;
            x1 = x2;
            h1 = h2;
            x2 = a + GOLDEN * (b - a);
            h2 = h(x2);
        } else {
            b = x2;
            x2 = x1;
            h2 = h1;
            x1 = b - GOLDEN * (b - a);
            h1 = h(x1);
        }
    }
    if h1 >= h2 {
        (x1, h1)
    } else {
        (x2, h2)
    }
}

/// `Φ(t) = ¼t² − sc·t^p`.
pub fn phi(t: f64, sc: f64, p: f64) -> f64 {
    0.25 * t * t - sc * t.powf(p)
}

/// `Ψ(t) = ¾t² + sc·t^p`.
pub fn psi(t: f64, sc: f64, p: f64) -> f64 {
    0.75 * t * t + sc * t.powf(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpGeometry {
    pub dim: usize,
    /// `S_V · C_δ`
    pub sc: f64,
    pub theta: f64,
    pub beta: f64,
    pub t0: f64,
    pub t1: f64,
    pub phi_t0: f64,
    pub psi_t1: f64,
    /// `½Φ(t_0) − Ψ(t_1)`
    pub chain_margin: f64,
}

impl MpGeometry {
    pub fn critical_exponent(&self) -> f64 {
        crate::manifold::critical_exponent(self.dim)
    }

    pub fn chain_holds(&self) -> bool {
        self.chain_margin > 0.0
    }
}

/// Radii and levels of the mountain-pass geometry.
pub fn mp_geometry(s_v: f64, c: f64, dim: usize) -> Result<MpGeometry> {
    if !(s_v > 0.0 && c > 0.0) || dim < 3 {
        return Err(Error::Domain(format!(
            "geometry needs S_V > 0, C > 0, N >= 3 (got {s_v}, {c}, {dim})"
        )));
    }
    let n = dim as f64;
    let p = crate::manifold::critical_exponent(dim);
    let sc = s_v * c;
    let t0 = (1.0 / (2.0 * p * sc)).powf((n - 2.0) / 4.0);
    let theta = (1.0 / (12.0 * (n - 1.0))).sqrt();
    let beta = (1.0 / (6.0 * (n - 1.0))).sqrt() * t0;
    let t1 = theta * t0;
    let phi_t0 = phi(t0, sc, p);
    let psi_t1 = psi(t1, sc, p);
    Ok(MpGeometry {
        dim,
        sc,
        theta,
        beta,
        t0,
        t1,
        phi_t0,
        psi_t1,
        chain_margin: 0.5 * phi_t0 - psi_t1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GfCheck {
    /// `‖ψ‖` before normalization.
    pub psi_norm: f64,
    /// `−∫G(x,(βψ)²)`
    pub beta_lhs: f64,
    /// `1/(2N(S_V C)^{N/2−1})`
    pub beta_rhs: f64,
    pub beta: Verdict,
    /// `−½∫G(x,(t_1ψ)²)`
    pub working_lhs: f64,
    /// `½Φ(t_0)`
    pub working_rhs: f64,
    pub working: Verdict,
    /// `∫F(x,βψ)`
    pub positivity_lhs: f64,
    pub positivity: Verdict,
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

/// `ψ/‖ψ‖`.
pub fn normalize_psi(problem: &Problem, psi: &Field) -> Result<(Field, f64)> {
    let norm = problem.h1_norm_sq(psi)?.max(0.0).sqrt();
    if !(norm > 0.0) {
        return Err(Error::Domain("ψ has zero norm".into()));
    }
    Ok((psi.scaled(1.0 / norm), norm))
}

/// Evaluate the `G`-budget along `ψ` in both the `β` form and the working
/// `t_1` form, and the positivity of `∫F` at `βψ`.
pub fn check_gf(problem: &Problem, psi: &Field, geometry: &MpGeometry) -> Result<GfCheck> {
    let (unit, psi_norm) = normalize_psi(problem, psi)?;
    let grid = problem.grid();
    let fam = problem.family();
    let w = grid.volume_weights();
    let integrate = |h: &dyn Fn(usize, f64) -> f64, scale: f64| -> f64 {
        let terms: Vec<f64> = unit
            .values()
            .iter()
            .enumerate()
            .map(|(i, &x)| w[i] * h(i, scale * x))
            .collect();
        pairwise_sum(&terms)
    };
    let n = grid.dim() as f64;
    let beta_lhs = -integrate(&|i, x| fam.primitive_g(i, x * x), geometry.beta);
    let beta_rhs = 1.0 / (2.0 * n * geometry.sc.powf(n / 2.0 - 1.0));
    let working_lhs = -0.5 * integrate(&|i, x| fam.primitive_g(i, x * x), geometry.t1);
    let working_rhs = 0.5 * geometry.phi_t0;
    let positivity_lhs = integrate(&|i, x| fam.primitive_f(i, x), geometry.beta);
    Ok(GfCheck {
        psi_norm,
        beta_lhs,
        beta_rhs,
        beta: verdict(beta_lhs <= beta_rhs),
        working_lhs,
        working_rhs,
        working: verdict(working_lhs <= working_rhs),
        positivity_lhs,
        positivity: verdict(positivity_lhs > 0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsConfig {
    pub kv_tol: f64,
    pub sv: SvConfig,
    /// Replaces the estimated `S_V`.
    pub sv_override: Option<f64>,
    /// Sampling range for non-power `C_δ` fits.
    pub u_range: (f64, f64),
}

impl Default for ConstantsConfig {
    fn default() -> Self {
        Self {
            kv_tol: 1e-10,
            sv: SvConfig::default(),
            sv_override: None,
            u_range: (1e-6, 1e6),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantsReport {
    pub k_v: f64,
    pub lambda_min: f64,
    pub s_v: f64,
    pub s_v_estimated: f64,
    pub s_v_overridden: bool,
    pub s_v_converged: bool,
    pub s_v_spread: f64,
    pub delta: f64,
    pub c_delta: f64,
    pub geometry: MpGeometry,
    pub gf: GfCheck,
}

impl ConstantsReport {
    /// Working-form budget and positivity: the gates the solver relies on.
    pub fn gates_pass(&self) -> bool {
        self.gf.working == Verdict::Pass && self.gf.positivity == Verdict::Pass && self.geometry.chain_holds()
    }
}

pub fn compute_constants(problem: &Problem, psi: &Field, cfg: &ConstantsConfig) -> Result<ConstantsReport> {
    let grid = problem.grid();
    let kv = estimate_kv(grid, problem.potential(), cfg.kv_tol)?;
    let sv = estimate_sv(grid, problem.potential(), &cfg.sv)?;
    let s_v = cfg.sv_override.unwrap_or(sv.s_v);
    if !(s_v > 0.0) {
        return Err(Error::Domain(format!("S_V override {s_v} must be positive")));
    }
    let delta = 1.0 / (4.0 * kv.k_v);
    let c_delta = fit_c_delta(problem.family(), grid, delta, cfg.u_range)?;
    let geometry = mp_geometry(s_v, c_delta, grid.dim())?;
    let gf = check_gf(problem, psi, &geometry)?;
    Ok(ConstantsReport {
        k_v: kv.k_v,
        lambda_min: kv.lambda_min,
        s_v,
        s_v_estimated: sv.s_v,
        s_v_overridden: cfg.sv_override.is_some(),
        s_v_converged: sv.converged,
        s_v_spread: sv.spread(),
        delta,
        c_delta,
        geometry,
        gf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::build_torus;
    use crate::nonlinearity::{make_hebey_family, make_power_family, NonlinearFamily};
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<ManifoldGrid> {
        build_torus(3, &[n, n, n], &[1.0; 3], None).unwrap()
    }

    #[test]
    fn kv_of_constant_potentials() {
        let g = grid(8);
        for (v, expect) in [(1.0, 1.0), (4.0, 0.25)] {
            let kv = estimate_kv(&g, &Field::constant(&g, v), 1e-10).unwrap();
            assert!((kv.k_v - expect).abs() < 1e-8);
        }
    }

    #[test]
    fn kv_rejects_noncoercive_potential() {
        let g = grid(8);
        let v = Field::constant(&g, -0.5);
        assert!(matches!(
            estimate_kv(&g, &v, 1e-10),
            Err(Error::PotentialNotCoercive(_))
        ));
    }

    #[test]
    fn kv_allows_partly_negative_potential() {
        let g = grid(8);
        let v = Field::from_fn(&g, |x| 1.0 + 1.5 * (2.0 * PI * x[0]).cos());
        let kv = estimate_kv(&g, &v, 1e-10).unwrap();
        // the mean bounds λ_min from above
        assert!(kv.lambda_min > 0.0 && kv.lambda_min < 1.0);
    }

    #[test]
    fn sv_constant_trial_bound() {
        let g = grid(8);
        let v = Field::constant(&g, 1.0);
        let est = estimate_sv(
            &g,
            &v,
            &SvConfig {
                starts: 3,
                ..SvConfig::default()
            },
        )
        .unwrap();
        assert!(est.s_v >= 1.0 - 1e-12);
        assert!(est.converged);
        assert_eq!(est.ratios.len(), 3);
    }

    #[test]
    fn sv_lower_bounds_constant_ratio_for_larger_torus() {
        let g = build_torus(3, &[8, 8, 8], &[2.0, 1.0, 1.0], None).unwrap();
        let v = Field::constant(&g, 3.0);
        let est = estimate_sv(
            &g,
            &v,
            &SvConfig {
                starts: 2,
                ..SvConfig::default()
            },
        )
        .unwrap();
        let p = 6.0;
        let trial = 2.0f64.powf(1.0 - p / 2.0) / 3.0f64.powf(p / 2.0);
        assert!(est.s_v >= trial * (1.0 - 1e-12));
    }

    #[test]
    fn c_delta_closed_forms() {
        let g = grid(4);
        let one = Field::constant(&g, 1.0);
        let zero = Field::constant(&g, 0.0);
        let cubic = make_power_family(&one, 4.0, &zero, 2.0).unwrap();
        assert!((fit_c_delta(&cubic, &g, 0.25, (1e-6, 1e6)).unwrap() - 1.0).abs() < 1e-12);
        assert!((fit_c_delta(&cubic, &g, 1.0, (1e-6, 1e6)).unwrap() - 0.25).abs() < 1e-12);
        let hebey = make_hebey_family(&zero, &one, 3).unwrap();
        for delta in [0.01, 0.25, 3.0] {
            assert_eq!(fit_c_delta(&hebey, &g, delta, (1e-6, 1e6)).unwrap(), 1.0);
        }
        let nothing = make_hebey_family(&zero, &zero, 3).unwrap();
        assert_eq!(fit_c_delta(&nothing, &g, 0.25, (1e-6, 1e6)).unwrap(), C_DELTA_FLOOR);
    }

    fn closure_cubic() -> NonlinearFamily {
        NonlinearFamily::custom(
            "cubic",
            3,
            4.0,
            Arc::new(|_, u| u * u * u),
            Arc::new(|_, u| u.powi(4) / 4.0),
            Arc::new(|_, _| 0.0),
            Arc::new(|_, _| 0.0),
        )
        .unwrap()
        .x_independent()
    }

    #[test]
    fn sampled_fit_matches_closed_form() {
        let g = grid(4);
        let c = fit_c_delta(&closure_cubic(), &g, 0.25, (1e-6, 1e6)).unwrap();
        assert!((c - 1.0).abs() < 1e-9, "{c}");
    }

    #[test]
    fn sampled_fit_detects_supercritical_growth() {
        let g = grid(4);
        let fam = NonlinearFamily::custom(
            "u7",
            3,
            8.0,
            Arc::new(|_, u| u.powi(7)),
            Arc::new(|_, u| u.powi(8) / 8.0),
            Arc::new(|_, _| 0.0),
            Arc::new(|_, _| 0.0),
        )
        .unwrap()
        .x_independent();
        assert!(matches!(
            fit_c_delta(&fam, &g, 0.25, (1e-6, 1e6)),
            Err(Error::Hypothesis { hypothesis: "(F1)", .. })
        ));
    }

    #[test]
    fn geometry_reference_values() {
        let geo = mp_geometry(1.0, 1.0, 3).unwrap();
        assert!((geo.t0 - 0.537_284_965_9).abs() < 1e-10);
        assert!((geo.theta - 0.204_124_145_2).abs() < 1e-10);
        assert!((geo.phi_t0 - 0.048_112_522_4).abs() < 1e-10);
        assert!((geo.t1 - geo.theta * geo.t0).abs() < 1e-15);
        assert!(geo.chain_holds());
    }

    #[test]
    fn t0_is_a_maximum_of_phi() {
        for n in 3..=6 {
            for sc in [0.1, 1.0, 10.0] {
                let geo = mp_geometry(sc, 1.0, n).unwrap();
                let p = geo.critical_exponent();
                let h = 1e-5 * geo.t0;
                let d1 = (phi(geo.t0 + h, sc, p) - phi(geo.t0 - h, sc, p)) / (2.0 * h);
                let d2 = (phi(geo.t0 + h, sc, p) - 2.0 * geo.phi_t0 + phi(geo.t0 - h, sc, p)) / (h * h);
                assert!(d1.abs() < 1e-8 && d2 < 0.0);
                assert!(geo.phi_t0 > 0.0 && geo.t1 < geo.t0);
            }
        }
    }

    #[test]
    fn gf_closed_form_for_constant_psi() {
        let g = grid(8);
        let a = 1e-7;
        let fam = make_hebey_family(&Field::constant(&g, a), &Field::constant(&g, 1.0), 3).unwrap();
        let p = Problem::new(Field::constant(&g, 1.0), fam).unwrap();
        let geo = mp_geometry(1.0, 1.0, 3).unwrap();
        let gf = check_gf(&p, &Field::constant(&g, 2.0), &geo).unwrap();
        let exact = a / 6.0 * geo.t1.powf(-6.0);
        assert!((gf.working_lhs / exact - 1.0).abs() < 1e-8);
        assert_eq!(gf.working, Verdict::Pass);
        assert_eq!(gf.positivity, Verdict::Pass);
        assert!((gf.psi_norm - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gf_trivial_cases() {
        let g = grid(4);
        let zero = Field::constant(&g, 0.0);
        let one = Field::constant(&g, 1.0);
        let geo = mp_geometry(1.0, 1.0, 3).unwrap();
        let no_g = Problem::new(one.clone(), make_hebey_family(&zero, &one, 3).unwrap()).unwrap();
        let gf = check_gf(&no_g, &one, &geo).unwrap();
        assert_eq!((gf.beta_lhs, gf.working_lhs), (0.0, 0.0));
        assert_eq!((gf.beta, gf.working), (Verdict::Pass, Verdict::Pass));
        let no_f = Problem::new(one.clone(), make_hebey_family(&one, &zero, 3).unwrap()).unwrap();
        let gf = check_gf(&no_f, &one, &geo).unwrap();
        assert_eq!(gf.positivity, Verdict::Fail);
        assert!(check_gf(&no_f, &zero, &geo).is_err());
    }
}
