//! Discrete closed manifolds: periodic N-dimensional grids (flat tori, optionally
//! carrying a conformal factor `g = e^{2φ}·δ`) with quadrature, norms and the
//! Laplace–Beltrami operator.
//!
//! Flat tori default to a trigonometric-spectral Laplacian, which is exact on
//! band-limited fields. Conformal metrics use a second-order flux-form finite
//! difference stencil
//!
//! ```text
//! (Δ_g u)_i = e^{-Nφ_i} Σ_d [a_{i+½}(u_{i+1} - u_i) - a_{i-½}(u_i - u_{i-1})] / h_d²,
//! a_{i+½}   = ½(e^{(N-2)φ_i} + e^{(N-2)φ_{i+1}}),
//! ```
//!
//! which discretizes `e^{-2φ}(Δu + (N-2)∇φ·∇u)` and is symmetric with respect to
//! the quadrature weights `cell volume × e^{Nφ}` (midpoint rule).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::sum::pairwise_sum;

/// Discretization of the Laplace–Beltrami operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Spectral,
    FiniteDifference,
}

struct AxisFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// A periodic grid on `T^N = Π [0, L_d)` with metric volume weights.
pub struct ManifoldGrid {
    dim: usize,
    points: Vec<usize>,
    lengths: Vec<f64>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    scheme: Scheme,
    conformal: Option<Vec<f64>>,
    weights: Vec<f64>,
    cell_volume: f64,
    // flux-form stencil data, one entry per node per axis (edge i -> i + e_d)
    edge_coeff: Vec<Vec<f64>>,
    inv_density: Option<Vec<f64>>,
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
    // Fourier symbol of -Δ on flat grids (spectral or finite-difference)
    symbol: Option<Vec<f64>>,
    ffts: Vec<AxisFft>,
}

impl fmt::Debug for ManifoldGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldGrid")
            .field("dim", &self.dim)
            .field("points", &self.points)
            .field("lengths", &self.lengths)
            .field("scheme", &self.scheme)
            .field("conformal", &self.conformal.is_some())
            .finish()
    }
}

impl PartialEq for ManifoldGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.points == other.points
            && self.lengths == other.lengths
            && self.scheme == other.scheme
            && self.conformal == other.conformal
    }
}

/// Build a torus with the default scheme (spectral when flat, finite
/// differences when a conformal log-factor is supplied).
pub fn build_torus(
    dim: usize,
    points_per_axis: &[usize],
    lengths: &[f64],
    conformal_log_factor: Option<Vec<f64>>,
) -> Result<Arc<ManifoldGrid>> {
    let scheme = if conformal_log_factor.is_some() {
        Scheme::FiniteDifference
    } else {
        Scheme::Spectral
    };
    build_torus_with_scheme(dim, points_per_axis, lengths, conformal_log_factor, scheme)
}

pub fn build_torus_with_scheme(
    dim: usize,
    points_per_axis: &[usize],
    lengths: &[f64],
    conformal_log_factor: Option<Vec<f64>>,
    scheme: Scheme,
) -> Result<Arc<ManifoldGrid>> {
    if dim < 3 {
        return Err(Error::Dimension(format!(
            "N = {dim}; the critical exponent 2N/(N-2) needs N >= 3"
        )));
    }
    if points_per_axis.len() != dim || lengths.len() != dim {
        return Err(Error::Dimension(format!(
            "expected {dim} axis counts and lengths, got {} and {}",
            points_per_axis.len(),
            lengths.len()
        )));
    }
    for (d, &n) in points_per_axis.iter().enumerate() {
        if n < 4 || n % 2 != 0 {
            return Err(Error::Domain(format!("axis {d}: {n} points; need an even count >= 4")));
        }
    }
    for (d, &l) in lengths.iter().enumerate() {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!("axis {d}: non-positive length {l}")));
        }
    }
    if conformal_log_factor.is_some() && scheme == Scheme::Spectral {
        return Err(Error::Domain(
            "conformal metrics are discretized with finite differences only".into(),
        ));
    }

    let total: usize = points_per_axis.iter().product();
    let mut strides = vec![1usize; dim];
    for d in (0..dim - 1).rev() {
        strides[d] = strides[d + 1] * points_per_axis[d + 1];
    }
    let spacing: Vec<f64> = lengths
        .iter()
        .zip(points_per_axis)
        .map(|(&l, &n)| l / n as f64)
        .collect();
    let cell_volume: f64 = spacing.iter().product();

    let mut plus = vec![vec![0usize; total]; dim];
    let mut minus = vec![vec![0usize; total]; dim];
    for idx in 0..total {
        for d in 0..dim {
            let n = points_per_axis[d];
            let s = strides[d];
            let i = (idx / s) % n;
            let base = idx - i * s;
            plus[d][idx] = base + ((i + 1) % n) * s;
            minus[d][idx] = base + ((i + n - 1) % n) * s;
        }
    }

    let nf = dim as f64;
    let (weights, edge_coeff, inv_density) = match &conformal_log_factor {
        None => (vec![cell_volume; total], vec![vec![1.0; total]; dim], None),
        Some(phi) => {
            if phi.len() != total {
                return Err(Error::Dimension(format!(
                    "conformal factor has {} values, grid has {total} nodes",
                    phi.len()
                )));
            }
            if phi.iter().any(|p| !p.is_finite()) {
                return Err(Error::Domain("conformal factor is not finite".into()));
            }
            let weights = phi.iter().map(|p| cell_volume * (nf * p).exp()).collect();
            let flux: Vec<f64> = phi.iter().map(|p| ((nf - 2.0) * p).exp()).collect();
            let edges = (0..dim)
                .map(|d| (0..total).map(|i| 0.5 * (flux[i] + flux[plus[d][i]])).collect())
                .collect();
            let inv = phi.iter().map(|p| (-nf * p).exp()).collect();
            (weights, edges, Some(inv))
        }
    };

    let mut planner = FftPlanner::<f64>::new();
    let ffts = points_per_axis
        .iter()
        .map(|&n| AxisFft {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
        .collect();

    let symbol = if conformal_log_factor.is_none() {
        let axis_symbols: Vec<Vec<f64>> = (0..dim)
            .map(|d| {
                let n = points_per_axis[d];
                (0..n)
                    .map(|i| {
                        let m = signed_frequency(i, n) as f64;
                        match scheme {
                            Scheme::Spectral => (2.0 * PI * m / lengths[d]).powi(2),
                            Scheme::FiniteDifference => {
                                let h = spacing[d];
                                4.0 / (h * h) * (PI * m / n as f64).sin().powi(2)
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        let sym = (0..total)
            .map(|idx| {
                (0..dim)
                    .map(|d| axis_symbols[d][(idx / strides[d]) % points_per_axis[d]])
                    .sum()
            })
            .collect();
        Some(sym)
    } else {
        None
    };

    Ok(Arc::new(ManifoldGrid {
        dim,
        points: points_per_axis.to_vec(),
        lengths: lengths.to_vec(),
        spacing,
        strides,
        scheme,
        conformal: conformal_log_factor,
        weights,
        cell_volume,
        edge_coeff,
        inv_density,
        plus,
        minus,
        symbol,
        ffts,
    }))
}

/// Frequency index in `(-n/2, n/2]` for FFT slot `i`.
pub(crate) fn signed_frequency(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl ManifoldGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn volume_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn conformal_log_factor(&self) -> Option<&[f64]> {
        self.conformal.as_deref()
    }

    pub fn is_flat(&self) -> bool {
        self.conformal.is_none()
    }

    /// Critical Sobolev exponent `2* = 2N/(N-2)`.
    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.dim)
    }

    pub fn total_volume(&self) -> f64 {
        pairwise_sum(&self.weights)
    }

    /// Multi-index of a linear node index (row-major, last axis fastest).
    pub fn multi_index(&self, idx: usize) -> Vec<usize> {
        (0..self.dim)
            .map(|d| (idx / self.strides[d]) % self.points[d])
            .collect()
    }

    /// Coordinates `x_d = i_d h_d` of a node.
    pub fn coordinates(&self, idx: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|d| ((idx / self.strides[d]) % self.points[d]) as f64 * self.spacing[d])
            .collect()
    }

    /// Weighted pairing `Σ w_i a_i b_i`.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.weights.len());
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * x * y)
            .collect();
        pairwise_sum(&terms)
    }

    /// Quadrature `Σ w_i a_i`.
    pub fn integrate_values(&self, a: &[f64]) -> f64 {
        let terms: Vec<f64> = self.weights.iter().zip(a).map(|(w, x)| w * x).collect();
        pairwise_sum(&terms)
    }

    /// Discrete Laplace–Beltrami operator on raw node values.
    pub fn laplacian_values(&self, u: &[f64]) -> Vec<f64> {
        match (self.scheme, &self.symbol) {
            (Scheme::Spectral, Some(symbol)) => self.apply_symbol(u, |k| -symbol[k]),
            _ => self.stencil_laplacian(u),
        }
    }

    fn stencil_laplacian(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let mut out = vec![0.0; n];
        for d in 0..self.dim {
            let inv_h2 = 1.0 / (self.spacing[d] * self.spacing[d]);
            let a = &self.edge_coeff[d];
            let plus = &self.plus[d];
            let minus = &self.minus[d];
            for i in 0..n {
                let flux_out = a[i] * (u[plus[i]] - u[i]);
                let flux_in = a[minus[i]] * (u[i] - u[minus[i]]);
                out[i] += (flux_out - flux_in) * inv_h2;
            }
        }
        if let Some(inv) = &self.inv_density {
            for (o, s) in out.iter_mut().zip(inv) {
                *o *= s;
            }
        }
        out
    }

    /// Diagonal of the discrete `-Δ_g` (finite-difference stencil only).
    pub(crate) fn stencil_diagonal(&self) -> Vec<f64> {
        let n = self.node_count();
        let mut diag = vec![0.0; n];
        for d in 0..self.dim {
            let inv_h2 = 1.0 / (self.spacing[d] * self.spacing[d]);
            let (edge, minus) = (&self.edge_coeff[d], &self.minus[d]);
            for (i, dg) in diag.iter_mut().enumerate() {
                *dg += (edge[i] + edge[minus[i]]) * inv_h2;
            }
        }
        if let Some(inv) = &self.inv_density {
            for (o, s) in diag.iter_mut().zip(inv) {
                *o *= s;
            }
        }
        diag
    }

    /// Dirichlet energy of the flux-form stencil,
    /// `Σ_i Σ_d cell · a_{i+½} (u_{i+e_d} - u_i)² / h_d²`. Every edge term is
    /// non-decreasing under monotone truncations of `u`.
    pub fn edge_dirichlet_energy(&self, u: &[f64]) -> f64 {
        let mut terms = Vec::with_capacity(u.len() * self.dim);
        for d in 0..self.dim {
            let inv_h2 = 1.0 / (self.spacing[d] * self.spacing[d]);
            let a = &self.edge_coeff[d];
            for (i, &j) in self.plus[d].iter().enumerate() {
                let diff = u[j] - u[i];
                terms.push(self.cell_volume * a[i] * diff * diff * inv_h2);
            }
        }
        pairwise_sum(&terms)
    }

    /// Solve `(-Δ + shift) w = r` exactly by FFT. Only available on flat grids.
    pub(crate) fn solve_shifted_flat(&self, r: &[f64], shift: f64) -> Option<Vec<f64>> {
        let symbol = self.symbol.as_ref()?;
        Some(self.apply_symbol(r, |k| 1.0 / (symbol[k] + shift)))
    }

    /// Zero every Fourier mode with `|m_d| > kmax` on some axis.
    pub(crate) fn low_pass(&self, u: &[f64], kmax: usize) -> Vec<f64> {
        let kmax = kmax as i64;
        self.apply_symbol(u, |idx| {
            let keep = (0..self.dim).all(|d| {
                let i = (idx / self.strides[d]) % self.points[d];
                signed_frequency(i, self.points[d]).abs() <= kmax
            });
            if keep {
                1.0
            } else {
                0.0
            }
        })
    }

    fn apply_symbol(&self, u: &[f64], multiplier: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut data: Vec<Complex64> = u.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft_nd(&mut data, false);
        for (k, c) in data.iter_mut().enumerate() {
            *c *= multiplier(k);
        }
        self.fft_nd(&mut data, true);
        let scale = 1.0 / data.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    fn fft_nd(&self, data: &mut [Complex64], inverse: bool) {
        let total = data.len();
        for d in 0..self.dim {
            let n = self.points[d];
            let stride = self.strides[d];
            let plan = if inverse {
                &self.ffts[d].inverse
            } else {
                &self.ffts[d].forward
            };
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            let block = n * stride;
            for outer in 0..total / block {
                for inner in 0..stride {
                    let base = outer * block + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, slot) in line.iter().enumerate() {
                        data[base + j * stride] = *slot;
                    }
                }
            }
        }
    }

    fn check(&self, u: &Field) -> Result<()> {
        if same_grid(self, &u.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `Δ_g u`.
    pub fn laplace_beltrami(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(Field {
            grid: u.grid.clone(),
            values: self.laplacian_values(&u.values),
        })
    }

    /// `∫_M u dv_g`.
    pub fn integrate(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(self.integrate_values(&u.values))
    }

    /// `∫|∇u|² dv_g`, computed as `-∫ u Δ_g u dv_g`.
    pub fn dirichlet_energy(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        Ok(self.dirichlet_values(&u.values))
    }

    pub(crate) fn dirichlet_values(&self, u: &[f64]) -> f64 {
        let lap = self.laplacian_values(u);
        -self.dot(u, &lap)
    }

    /// `‖u‖² = ∫ |∇u|² + V u² dv_g`.
    pub fn h1_norm_sq(&self, potential: &Field, u: &Field) -> Result<f64> {
        self.check(potential)?;
        self.check(u)?;
        let value = self.h1_values(&potential.values, &u.values);
        let scale = self.dot(&u.values, &u.values) * potential.max_abs() + f64::MIN_POSITIVE;
        if value < -1e-10 * scale {
            return Err(Error::PotentialNotCoercive(format!(
                "negative quadratic form {value:.3e}"
            )));
        }
        Ok(value.max(0.0))
    }

    pub(crate) fn h1_values(&self, potential: &[f64], u: &[f64]) -> f64 {
        let lap = self.laplacian_values(u);
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(u.iter().zip(lap.iter().zip(potential)))
            .map(|(w, (x, (l, v)))| w * x * (v * x - l))
            .collect();
        pairwise_sum(&terms)
    }

    /// `(∫|u|^p dv_g)^{1/p}`.
    pub fn lp_norm(&self, u: &Field, p: f64) -> Result<f64> {
        self.check(u)?;
        if !(p >= 1.0) {
            return Err(Error::Domain(format!("L^p norm needs p >= 1, got {p}")));
        }
        let powered: Vec<f64> = u.values.iter().map(|x| x.abs().powf(p)).collect();
        Ok(self.integrate_values(&powered).powf(1.0 / p))
    }
}

pub fn critical_exponent(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * n / (n - 2.0)
}

pub fn same_grid(a: &ManifoldGrid, b: &ManifoldGrid) -> bool {
    std::ptr::eq(a, b) || a == b
}

/// A real-valued function sampled at the nodes of a grid.
#[derive(Clone, Debug)]
pub struct Field {
    grid: Arc<ManifoldGrid>,
    values: Vec<f64>,
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        same_grid(&self.grid, &other.grid) && self.values == other.values
    }
}

impl Field {
    pub fn new(grid: &Arc<ManifoldGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at node {i}")));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_raw(grid: &Arc<ManifoldGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.node_count());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn constant(grid: &Arc<ManifoldGrid>, c: f64) -> Self {
        Self::from_raw(grid, vec![c; grid.node_count()])
    }

    pub fn zeros(grid: &Arc<ManifoldGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: &Arc<ManifoldGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.node_count()).map(|i| f(&grid.coordinates(i))).collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Arc<ManifoldGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Self::from_raw(&self.grid, self.values.iter().map(|&x| f(x)).collect())
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|x| s * x)
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: f64, other: &Field) -> Result<Field> {
        if !same_grid(&self.grid, &other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self::from_raw(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + s * b).collect(),
        ))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Index of the smallest value; ties go to the lowest index.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }
}
