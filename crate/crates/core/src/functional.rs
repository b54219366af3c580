//! The regularized energy
//!
//! ```text
//! J_ε(u) = ½‖u‖² − ∫ F(x,u) dv_g − ½ ∫ G(x, ε + u²) dv_g
//! ```
//!
//! and its first variation. The residual is formed in strong form on the grid;
//! because the discrete Laplace–Beltrami operator is self-adjoint in the
//! quadrature pairing, it is exactly the L²(dv_g) gradient of the discrete
//! energy.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::krylov::{pcg, SolveStats};
use crate::manifold::{same_grid, Field, ManifoldGrid};
use crate::nonlinearity::NonlinearFamily;
use crate::sum::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    /// `½‖u‖²`
    pub quadratic: f64,
    /// `∫ F(x,u) dv_g`
    pub potential_f: f64,
    /// `½ ∫ G(x, ε + u²) dv_g`
    pub potential_g: f64,
    pub total: f64,
}

/// Grid, potential and nonlinear data of one equation.
#[derive(Debug, Clone)]
pub struct Problem {
    grid: Arc<ManifoldGrid>,
    potential: Field,
    family: NonlinearFamily,
    mean_potential: f64,
    helmholtz: Helmholtz,
}

const OPERATOR_MAX_ITER: usize = 2000;

impl Problem {
    pub fn new(potential: Field, family: NonlinearFamily) -> Result<Self> {
        let grid = potential.grid().clone();
        if family.dim() != grid.dim() {
            return Err(Error::Dimension(format!(
                "family has N = {}, grid has N = {}",
                family.dim(),
                grid.dim()
            )));
        }
        let mean_potential = grid.integrate(&potential)? / grid.total_volume();
        if !(mean_potential > 0.0) {
            return Err(Error::PotentialNotCoercive(format!(
                "mean of V is {mean_potential:.3e}; constants would have non-positive energy"
            )));
        }
        let helmholtz = Helmholtz::new(&grid, potential.values().to_vec());
        Ok(Self {
            grid,
            potential,
            family,
            mean_potential,
            helmholtz,
        })
    }

    pub fn grid(&self) -> &Arc<ManifoldGrid> {
        &self.grid
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn family(&self) -> &NonlinearFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn critical_exponent(&self) -> f64 {
        self.grid.critical_exponent()
    }

    fn check(&self, u: &Field) -> Result<()> {
        if same_grid(&self.grid, u.grid()) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn check_eps(eps: f64) -> Result<()> {
        if eps > 0.0 && eps.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "regularization eps = {eps}; the energy is only defined for eps > 0"
            )))
        }
    }

    /// `‖u‖² = ∫ |∇u|² + V u² dv_g`.
    pub fn h1_norm_sq(&self, u: &Field) -> Result<f64> {
        self.grid.h1_norm_sq(&self.potential, u)
    }

    pub(crate) fn h1_values(&self, u: &[f64]) -> f64 {
        self.grid.h1_values(self.potential.values(), u)
    }

    /// `(-Δ_g + V) u`.
    pub(crate) fn apply_operator(&self, u: &[f64]) -> Vec<f64> {
        self.helmholtz.apply(u)
    }

    /// Nodewise `f(x,u) + g(x, ε + u²) u`. `eps` may be zero here when the
    /// caller guarantees `u != 0`.
    #[inline]
    pub(crate) fn source(&self, eps: f64, node: usize, u: f64) -> f64 {
        self.family.f(node, u) + self.family.g(node, eps + u * u) * u
    }

    pub(crate) fn energy_values(&self, eps: f64, u: &[f64]) -> EnergyBreakdown {
        let quadratic = 0.5 * self.h1_values(u);
        let weights = self.grid.volume_weights();
        let big_f: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, &x)| weights[i] * self.family.primitive_f(i, x))
            .collect();
        let big_g: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(i, &x)| weights[i] * self.family.primitive_g(i, eps + x * x))
            .collect();
        let potential_f = pairwise_sum(&big_f);
        let potential_g = 0.5 * pairwise_sum(&big_g);
        EnergyBreakdown {
            quadratic,
            potential_f,
            potential_g,
            total: quadratic - potential_f - potential_g,
        }
    }

    /// `J_ε(u)` by quadrature.
    pub fn energy(&self, eps: f64, u: &Field) -> Result<EnergyBreakdown> {
        Self::check_eps(eps)?;
        self.check(u)?;
        Ok(self.energy_values(eps, u.values()))
    }

    pub(crate) fn residual_values(&self, eps: f64, u: &[f64]) -> Vec<f64> {
        let mut r = self.apply_operator(u);
        for (i, (ri, &x)) in r.iter_mut().zip(u).enumerate() {
            *ri -= self.source(eps, i, x);
        }
        r
    }

    /// `-Δ_g u + V u - f(x,u) - g(x, ε + u²) u`, the L²(dv_g) gradient of `J_ε`.
    pub fn residual(&self, eps: f64, u: &Field) -> Result<Field> {
        Self::check_eps(eps)?;
        self.check(u)?;
        Ok(Field::from_raw(&self.grid, self.residual_values(eps, u.values())))
    }

    /// Weighted L² norm of raw node values.
    pub(crate) fn l2(&self, r: &[f64]) -> f64 {
        self.grid.dot(r, r).sqrt()
    }

    /// Solve `(-Δ_g + V) w = r` to relative residual `tol`.
    pub(crate) fn solve_operator(&self, r: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        self.helmholtz.solve(r, tol)
    }

    /// Approximate inverse of `-Δ_g + σ` with `σ` the mean of `V`, used to
    /// precondition Krylov solves. Exact (FFT) on flat grids.
    pub(crate) fn precondition(&self, r: &[f64]) -> Vec<f64> {
        match self.grid.solve_shifted_flat(r, self.mean_potential) {
            Some(w) => w,
            None => self
                .solve_operator(r, 1e-6)
                .map(|(w, _)| w)
                .unwrap_or_else(|_| r.to_vec()),
        }
    }

    /// H¹ Riesz representative of the residual: `(-Δ_g + V) w = r`.
    pub fn precond_gradient(&self, r: &Field, tol: f64) -> Result<Field> {
        self.check(r)?;
        let (w, _) = self.solve_operator(r.values(), tol)?;
        Ok(Field::from_raw(&self.grid, w))
    }
}

/// `-Δ_g + W` for a nodal potential `W` with positive mean, and its inverse.
#[derive(Debug, Clone)]
pub(crate) struct Helmholtz {
    grid: Arc<ManifoldGrid>,
    w: Vec<f64>,
    mean: f64,
    constant: bool,
}

impl Helmholtz {
    pub(crate) fn new(grid: &Arc<ManifoldGrid>, w: Vec<f64>) -> Self {
        let mean = grid.integrate_values(&w) / grid.total_volume();
        let constant = w.iter().all(|&x| x == w[0]);
        Self {
            grid: grid.clone(),
            w,
            mean,
            constant,
        }
    }

    pub(crate) fn apply(&self, u: &[f64]) -> Vec<f64> {
        let lap = self.grid.laplacian_values(u);
        lap.iter()
            .zip(u.iter().zip(&self.w))
            .map(|(l, (x, w))| w * x - l)
            .collect()
    }

    /// Conjugate gradients with an FFT preconditioner on flat grids (exact
    /// when `W` is constant) and Jacobi otherwise.
    pub(crate) fn solve(&self, r: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        let grid = &self.grid;
        let dot = |a: &[f64], b: &[f64]| grid.dot(a, b);
        let breakdown = |e: Error| match e {
            Error::Convergence { iterations: 0, .. } => {
                Error::PotentialNotCoercive("non-positive curvature in the first conjugate-gradient step".into())
            }
            other => other,
        };
        if grid.is_flat() && self.mean > 0.0 {
            if self.constant {
                let w = grid.solve_shifted_flat(r, self.w[0]).expect("flat grid");
                return Ok((
                    w,
                    SolveStats {
                        iterations: 1,
                        relative_residual: 0.0,
                    },
                ));
            }
            let precond = |x: &[f64]| grid.solve_shifted_flat(x, self.mean).expect("flat grid");
            return pcg(|x| self.apply(x), precond, dot, r, tol, OPERATOR_MAX_ITER).map_err(breakdown);
        }
        let diag: Vec<f64> = grid
            .stencil_diagonal()
            .iter()
            .zip(&self.w)
            .map(|(d, w)| d + w)
            .collect();
        let jacobi = diag.iter().all(|&d| d > 0.0);
        let precond = |x: &[f64]| -> Vec<f64> {
            if jacobi {
                x.iter().zip(&diag).map(|(a, d)| a / d).collect()
            } else {
                x.to_vec()
            }
        };
        pcg(|x| self.apply(x), precond, dot, r, tol, OPERATOR_MAX_ITER).map_err(breakdown)
    }
}
