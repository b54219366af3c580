//! Checks on computed fields: the first variation against central
//! differences, the energy identities at a critical point, truncated
//! Dirichlet energies of the bootstrap argument, and the splitting of the
//! equation into a linear part with bounded coefficient.
//!
//! On a finite grid every `L^q` norm is finite, so the bootstrap probe can
//! only exhibit the mechanism (uniformly bounded truncated energies), not the
//! integrability conclusion.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::manifold::{Field, ManifoldGrid};
use crate::random::band_limited;
use crate::sum::pairwise_sum;

/// Worst relative error between `∫ r v` and
/// `(J_ε(u+hv) − J_ε(u−hv))/2h` over seeded band-limited directions.
pub fn gradient_check(problem: &Problem, eps: f64, u: &Field, n_directions: usize, seed: u64, h: f64) -> Result<f64> {
    let r = problem.residual(eps, u)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Vec<Field> = (0..n_directions)
        .map(|_| band_limited(problem.grid(), &mut rng, 3))
        .collect();
    let errors: Vec<f64> = directions
        .par_iter()
        .map(|v| {
            let plus: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a - h * b).collect();
            let fd = (problem.energy_values(eps, &plus).total - problem.energy_values(eps, &minus).total) / (2.0 * h);
            let exact = problem.grid().dot(r.values(), v.values());
            (fd - exact).abs() / exact.abs().max(fd.abs()).max(f64::MIN_POSITIVE)
        })
        .collect();
    Ok(errors.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyIdentities {
    pub norm_sq: f64,
    pub energy: f64,
    /// `|J_ε(u) − c_ε|`
    pub level_gap: f64,
    /// `|‖u‖² − ∫f u − ∫g(x,ε+u²)u²|`
    pub nehari_defect: f64,
    /// `4c_ε/(μ−2) + 2c_ε − ‖u‖²`
    pub norm_bound_slack: f64,
    /// `∫(f u − 2F) − (μ−2)∫F`
    pub ar_f_margin: f64,
    /// `∫ g(x,ε+u²)u² − G(x,ε+u²)`
    pub ar_g_margin: f64,
}

pub fn energy_identities(problem: &Problem, eps: f64, u: &Field, c_eps: f64) -> Result<EnergyIdentities> {
    let e = problem.energy(eps, u)?;
    let fam = problem.family();
    let mu = fam.mu();
    let w = problem.grid().volume_weights();
    let uv = u.values();
    let integral = |h: &dyn Fn(usize, f64) -> f64| {
        pairwise_sum(&uv.iter().enumerate().map(|(i, &x)| w[i] * h(i, x)).collect::<Vec<_>>())
    };
    let norm_sq = 2.0 * e.quadratic;
    let fu = integral(&|i, x| fam.f(i, x) * x);
    let gu2 = integral(&|i, x| fam.g(i, eps + x * x) * x * x);
    let big_g = integral(&|i, x| fam.primitive_g(i, eps + x * x));
    Ok(EnergyIdentities {
        norm_sq,
        energy: e.total,
        level_gap: (e.total - c_eps).abs(),
        nehari_defect: (norm_sq - fu - gu2).abs(),
        norm_bound_slack: 4.0 * c_eps / (mu - 2.0) + 2.0 * c_eps - norm_sq,
        ar_f_margin: fu - 2.0 * e.potential_f - (mu - 2.0) * e.potential_f,
        ar_g_margin: gu2 - big_g,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapProbe {
    /// `s_0 = 0`, `s_i + 1 = (s_{i−1} + 1) N/(N−2)`.
    pub s_values: Vec<f64>,
    pub l_values: Vec<f64>,
    /// `truncated_energies[i][j] = ∫|∇(u min{|u|^{s_i}, L_j})|²` in the
    /// edge form of the stencil.
    pub truncated_energies: Vec<Vec<f64>>,
    /// `q_i = 2(s_i + 1)`.
    pub exponent_ladder: Vec<f64>,
    /// Last over second-to-last `L` column, per `s`; 1 when both vanish.
    pub saturation_ratios: Vec<f64>,
    pub monotone_in_l: bool,
}

/// Truncated Dirichlet energies over an `s` ladder and a geometric `L`
/// ladder starting at 1, with ratio chosen so the last two columns are past
/// `max|u|^{s}` for every `s`. Energies use the flux-form edge sum, for which
/// monotonicity in `L` is exact: `u ↦ u min{|u|^s, L}` and its increments in
/// `L` are odd and non-decreasing.
pub fn bootstrap_probe(grid: &ManifoldGrid, u: &Field, s_count: usize, l_count: usize) -> Result<BootstrapProbe> {
    if s_count == 0 || l_count < 2 {
        return Err(Error::Domain(
            "bootstrap probe needs s_count >= 1 and l_count >= 2".into(),
        ));
    }
    let n = grid.dim() as f64;
    let step = n / (n - 2.0);
    let mut s_values = vec![0.0];
    while s_values.len() < s_count {
        let prev = *s_values.last().expect("non-empty");
        s_values.push((prev + 1.0) * step - 1.0);
    }
    let exponent_ladder: Vec<f64> = (0..s_count).map(|i| 2.0 * step.powi(i as i32)).collect();
    let peak = u.max_abs().max(1.0);
    let s_max = *s_values.last().expect("non-empty");
    let top = peak.powf(s_max);
    let l_values: Vec<f64> = if l_count == 2 {
        vec![top, 2.0 * top]
    } else {
        let ratio = 2f64.max(top.powf(1.0 / (l_count - 2) as f64));
        (0..l_count).map(|j| ratio.powi(j as i32)).collect()
    };
    let truncated_energies: Vec<Vec<f64>> = s_values
        .par_iter()
        .map(|&s| {
            l_values
                .iter()
                .map(|&l| {
                    let t: Vec<f64> = u.values().iter().map(|&x| x * x.abs().powf(s).min(l)).collect();
                    grid.edge_dirichlet_energy(&t)
                })
                .collect()
        })
        .collect();
    let saturation_ratios = truncated_energies
        .iter()
        .map(|row| {
            let (a, b) = (row[l_count - 2], row[l_count - 1]);
            if a == 0.0 && b == 0.0 {
                1.0
            } else {
                b / a
            }
        })
        .collect();
    let monotone_in_l = truncated_energies
        .iter()
        .all(|row| row.windows(2).all(|w| w[1] >= w[0]));
    Ok(BootstrapProbe {
        s_values,
        l_values,
        truncated_energies,
        exponent_ladder,
        saturation_ratios,
        monotone_in_l,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `max |h|`, `h = V − g(x, ε+u²)`.
    pub h_max: f64,
    /// `max |V| + max g(·, ε)`
    pub h_bound: f64,
    pub h_bound_holds: bool,
    /// `g(x, ε+u²) <= g(x, ε)` at every node.
    pub g_monotone_holds: bool,
    /// `min_x a(1+|u|) − |k|` with `k = −h u + f(x,u)`, `a = |h| + |f/u|`.
    pub k_margin_min: f64,
    /// `‖a‖_{L^{N/2}}`
    pub a_norm: f64,
}

/// Split `−Δ_g u = k(x,u)` with `k = −h u + f`, `h = V − g(x, ε+u²)`, and
/// check the bounds on `h` and `k`.
pub fn regularity_decomposition_check(problem: &Problem, eps: f64, u: &Field) -> Result<RegularityReport> {
    if !(u.min() > 0.0) {
        return Err(Error::Domain(format!("min u = {:.3e}; the check needs u > 0", u.min())));
    }
    let fam = problem.family();
    let v = problem.potential().values();
    let n = problem.dim() as f64;
    let mut h_max = 0.0f64;
    let mut v_max = 0.0f64;
    let mut g_eps_max = 0.0f64;
    let mut g_monotone = true;
    let mut k_margin = f64::INFINITY;
    let mut a_pow = Vec::with_capacity(u.len());
    let w = problem.grid().volume_weights();
    for (i, &x) in u.values().iter().enumerate() {
        let g_here = fam.g(i, eps + x * x);
        let g_eps = fam.g(i, eps);
        g_monotone &= g_here <= g_eps;
        let h = v[i] - g_here;
        let f = fam.f(i, x);
        let k = -h * x + f;
        let a = h.abs() + (f / x).abs();
        h_max = h_max.max(h.abs());
        v_max = v_max.max(v[i].abs());
        g_eps_max = g_eps_max.max(g_eps);
        k_margin = k_margin.min(a * (1.0 + x.abs()) - k.abs());
        a_pow.push(w[i] * a.powf(n / 2.0));
    }
    let h_bound = v_max + g_eps_max;
    Ok(RegularityReport {
        h_max,
        h_bound,
        h_bound_holds: h_max <= h_bound,
        g_monotone_holds: g_monotone,
        k_margin_min: k_margin,
        a_norm: pairwise_sum(&a_pow).powf(2.0 / n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::build_torus;
    use crate::nonlinearity::make_hebey_family;
    use rand::SeedableRng;

    fn problem(a: f64, b: f64) -> Problem {
        let g = build_torus(3, &[8, 8, 8], &[1.0; 3], None).unwrap();
        let fam = make_hebey_family(&Field::constant(&g, a), &Field::constant(&g, b), 3).unwrap();
        Problem::new(Field::constant(&g, 1.0), fam).unwrap()
    }

    #[test]
    fn gradient_check_quadratic_is_roundoff() {
        let p = problem(0.0, 0.0);
        let u = band_limited(p.grid(), &mut ChaCha8Rng::seed_from_u64(1), 2);
        assert!(gradient_check(&p, 0.1, &u, 5, 2, 1e-3).unwrap() < 1e-9);
    }

    #[test]
    fn gradient_check_hebey() {
        let p = problem(1e-3, 1.0);
        let u = band_limited(p.grid(), &mut ChaCha8Rng::seed_from_u64(4), 2);
        let e1 = gradient_check(&p, 0.01, &u, 5, 5, 1e-3).unwrap();
        let e2 = gradient_check(&p, 0.01, &u, 5, 5, 5e-4).unwrap();
        assert!(gradient_check(&p, 0.01, &u, 10, 5, 1e-5).unwrap() < 1e-6);
        // second order in h
        assert!(e2 < 0.3 * e1, "{e1} {e2}");
    }

    #[test]
    fn identities_at_zero_solution() {
        let p = problem(0.0, 0.0);
        let z = Field::zeros(p.grid());
        let c = p.energy(0.1, &z).unwrap().total;
        let id = energy_identities(&p, 0.1, &z, c).unwrap();
        assert_eq!(id.level_gap, 0.0);
        assert_eq!(id.nehari_defect, 0.0);
        assert_eq!(id.norm_bound_slack, 0.0);
    }

    #[test]
    fn bootstrap_ladder_and_constants() {
        let g = build_torus(3, &[8, 8, 8], &[1.0; 3], None).unwrap();
        let probe = bootstrap_probe(&g, &Field::constant(&g, 1.3), 4, 5).unwrap();
        assert_eq!(probe.s_values, vec![0.0, 2.0, 8.0, 26.0]);
        assert_eq!(probe.exponent_ladder, vec![2.0, 6.0, 18.0, 54.0]);
        assert!(probe.truncated_energies.iter().flatten().all(|&e| e == 0.0));
        assert!(probe.saturation_ratios.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn bootstrap_saturates_and_is_monotone() {
        let g = build_torus(3, &[8, 8, 8], &[1.0; 3], None).unwrap();
        let u = band_limited(&g, &mut ChaCha8Rng::seed_from_u64(8), 2).map(|x| 1.5 * x);
        let probe = bootstrap_probe(&g, &u, 4, 6).unwrap();
        assert!(probe.monotone_in_l);
        for r in &probe.saturation_ratios {
            assert_eq!(*r, 1.0);
        }
        assert!(probe.l_values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn regularity_without_singular_term() {
        let p = problem(0.0, 1.0);
        let u = Field::constant(p.grid(), 0.7);
        let rep = regularity_decomposition_check(&p, 0.1, &u).unwrap();
        assert!(rep.h_bound_holds && rep.g_monotone_holds);
        assert_eq!(rep.h_max, 1.0);
        assert!(rep.k_margin_min >= 0.0);
    }
}
