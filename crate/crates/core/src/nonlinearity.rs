//! Nonlinear data `(f, F, g, G)` of the equation
//! `-Δ_g u + V u = f(x,u) + g(x,u²) u`, the built-in families, and a
//! sampling audit of the structural hypotheses.
//!
//! `G` is normalized as `G(x,s) = -∫_s^∞ g(x,t) dt`, so `G <= 0` and
//! `∂G/∂s = g`. For the singular families `∫_0^s g` diverges; this tail
//! normalization reproduces the Lichnerowicz energy `-(1/2*)∫ A u^{-2*}`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::manifold::{critical_exponent, Field, ManifoldGrid};
use crate::table::LogLogTable;

pub type NodeFn = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// Shape of `f` used by the closed-form `C_δ` fit.
#[derive(Debug, Clone)]
pub enum GrowthLaw {
    /// `f(x,u) = B(x)|u|^{q-2}u`.
    Power {
        exponent: f64,
        coefficient: Arc<Vec<f64>>,
    },
    General,
}

#[derive(Clone)]
pub struct NonlinearFamily {
    name: String,
    dim: usize,
    mu: f64,
    f: NodeFn,
    primitive_f: NodeFn,
    g: NodeFn,
    primitive_g: NodeFn,
    growth: GrowthLaw,
    x_dependent: bool,
}

impl fmt::Debug for NonlinearFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearFamily")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("mu", &self.mu)
            .field("growth", &self.growth)
            .finish()
    }
}

impl NonlinearFamily {
    /// A family given by closures of `(node, value)`. `primitive_g` must be
    /// supplied explicitly; it is audited only through `G' = g`, sign and
    /// monotonicity.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        mu: f64,
        f: NodeFn,
        primitive_f: NodeFn,
        g: NodeFn,
        primitive_g: NodeFn,
    ) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            name: name.into(),
            dim,
            mu,
            f,
            primitive_f,
            g,
            primitive_g,
            growth: GrowthLaw::General,
            x_dependent: true,
        })
    }

    /// Mark a custom family as independent of the node, which lets audits and
    /// fits evaluate a single node.
    pub fn x_independent(mut self) -> Self {
        self.x_dependent = false;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Ambrosetti–Rabinowitz exponent.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.dim)
    }

    pub fn growth(&self) -> &GrowthLaw {
        &self.growth
    }

    pub fn is_x_dependent(&self) -> bool {
        self.x_dependent
    }

    #[inline]
    pub fn f(&self, node: usize, u: f64) -> f64 {
        (self.f)(node, u)
    }

    /// `F(x,u) = ∫_0^u f(x,t) dt`.
    #[inline]
    pub fn primitive_f(&self, node: usize, u: f64) -> f64 {
        (self.primitive_f)(node, u)
    }

    #[inline]
    pub fn g(&self, node: usize, s: f64) -> f64 {
        (self.g)(node, s)
    }

    /// `G(x,s) = -∫_s^∞ g(x,t) dt`.
    #[inline]
    pub fn primitive_g(&self, node: usize, s: f64) -> f64 {
        (self.primitive_g)(node, s)
    }

    /// Nodes an audit must visit.
    pub(crate) fn sample_nodes(&self, grid: &ManifoldGrid) -> usize {
        if self.x_dependent {
            grid.node_count()
        } else {
            1
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim < 3 {
        Err(Error::Dimension(format!("N = {dim}; need N >= 3")))
    } else {
        Ok(())
    }
}

fn coefficient(field: &Field, dim: usize, label: &str) -> Result<Arc<Vec<f64>>> {
    if field.grid().dim() != dim {
        return Err(Error::Dimension(format!(
            "coefficient {label} lives on a {}-dimensional grid, family has N = {dim}",
            field.grid().dim()
        )));
    }
    Ok(Arc::new(field.values().to_vec()))
}

fn require_nonnegative(values: &[f64], label: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|&a| a < 0.0) {
        return Err(Error::Hypothesis {
            hypothesis: "(G1)/(G2)",
            detail: format!("coefficient {label} is negative at node {i}"),
        });
    }
    Ok(())
}

/// `c s^{-e}`, with `0·∞ = 0`.
#[inline]
fn scaled_power(c: f64, s: f64, e: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * s.powf(-e)
    }
}

fn power_f(b: Arc<Vec<f64>>, q: f64) -> (NodeFn, NodeFn) {
    let b2 = b.clone();
    let f: NodeFn = Arc::new(move |i, u| b[i] * u.abs().powf(q - 2.0) * u);
    let big_f: NodeFn = Arc::new(move |i, u| b2[i] * u.abs().powf(q) / q);
    (f, big_f)
}

/// Motivating Einstein–Lichnerowicz data:
/// `f = B|u|^{2*-2}u`, `g(x,s) = A s^{-(2*+2)/2}`, `G(x,s) = -(2A/2*) s^{-2*/2}`.
pub fn make_hebey_family(a: &Field, b: &Field, dim: usize) -> Result<NonlinearFamily> {
    check_dim(dim)?;
    let a = coefficient(a, dim, "A")?;
    let b = coefficient(b, dim, "B")?;
    require_nonnegative(&a, "A")?;
    let p = critical_exponent(dim);
    let (f, primitive_f) = power_f(b.clone(), p);
    let a2 = a.clone();
    let g: NodeFn = Arc::new(move |i, s| scaled_power(a[i], s, (p + 2.0) / 2.0));
    let primitive_g: NodeFn = Arc::new(move |i, s| -scaled_power(2.0 * a2[i] / p, s, p / 2.0));
    Ok(NonlinearFamily {
        name: "hebey".into(),
        dim,
        mu: p,
        f,
        primitive_f,
        g,
        primitive_g,
        growth: GrowthLaw::Power {
            exponent: p,
            coefficient: b,
        },
        x_dependent: true,
    })
}

/// Hebey data plus the electromagnetic term `C(x)/((u²)^{p/2} u)`, `2 < p < 2*`.
pub fn make_em_family(a: &Field, b: &Field, c: &Field, p: f64, dim: usize) -> Result<NonlinearFamily> {
    check_dim(dim)?;
    let crit = critical_exponent(dim);
    if !(p > 2.0 && p < crit) {
        return Err(Error::Domain(format!(
            "electromagnetic exponent p = {p} outside (2, {crit})"
        )));
    }
    let base = make_hebey_family(a, b, dim)?;
    let c = coefficient(c, dim, "C")?;
    require_nonnegative(&c, "C")?;
    let c2 = c.clone();
    let (g0, big_g0) = (base.g.clone(), base.primitive_g.clone());
    let g: NodeFn = Arc::new(move |i, s| g0(i, s) + scaled_power(c[i], s, (p + 2.0) / 2.0));
    let primitive_g: NodeFn = Arc::new(move |i, s| big_g0(i, s) - scaled_power(2.0 * c2[i] / p, s, p / 2.0));
    Ok(NonlinearFamily {
        name: "em".into(),
        g,
        primitive_g,
        ..base
    })
}

/// Subcritical testbed `f = B|u|^{q-2}u`, `g(x,s) = A s^{-r}`,
/// `G(x,s) = -A s^{1-r}/(r-1)`, with `2 < q <= 2*` and `r > 1`.
pub fn make_power_family(b: &Field, q: f64, a: &Field, r: f64) -> Result<NonlinearFamily> {
    let dim = b.grid().dim();
    check_dim(dim)?;
    let crit = critical_exponent(dim);
    if !(q > 2.0 && q <= crit) {
        return Err(Error::Domain(format!("power q = {q} outside (2, {crit}]")));
    }
    if !(r > 1.0) {
        return Err(Error::Domain(format!(
            "singular exponent r = {r}; the tail integral of s^-r diverges unless r > 1"
        )));
    }
    let a = coefficient(a, dim, "A")?;
    let b = coefficient(b, dim, "B")?;
    let (f, primitive_f) = power_f(b.clone(), q);
    let a2 = a.clone();
    let g: NodeFn = Arc::new(move |i, s| scaled_power(a[i], s, r));
    let primitive_g: NodeFn = Arc::new(move |i, s| -scaled_power(a2[i] / (r - 1.0), s, r - 1.0));
    Ok(NonlinearFamily {
        name: "power".into(),
        dim,
        mu: q,
        f,
        primitive_f,
        g,
        primitive_g,
        growth: GrowthLaw::Power {
            exponent: q,
            coefficient: b,
        },
        x_dependent: true,
    })
}

/// x-independent family from sample tables `(u_j, f_j)` for `u > 0` and
/// `(s_j, g_j)`, interpolated monotonically in log-log coordinates with power
/// tails. `f` is extended oddly; `F` and `G` are exact integrals of the
/// interpolants.
pub fn make_table_family(
    dim: usize,
    mu: f64,
    f_table: (&[f64], &[f64]),
    g_table: (&[f64], &[f64]),
) -> Result<NonlinearFamily> {
    check_dim(dim)?;
    let ft = Arc::new(LogLogTable::new(f_table.0, f_table.1)?);
    let gt = Arc::new(LogLogTable::new(g_table.0, g_table.1)?);
    if ft.left_exponent() <= 0.0 {
        return Err(Error::Domain(format!(
            "f table must vanish at 0 (leading exponent {} <= 0)",
            ft.left_exponent()
        )));
    }
    if gt.right_exponent() >= -1.0 {
        return Err(Error::Domain(format!(
            "g table tail decays like s^{}; need an exponent below -1",
            gt.right_exponent()
        )));
    }
    let (ft1, ft2, gt1, gt2) = (ft.clone(), ft, gt.clone(), gt);
    Ok(NonlinearFamily {
        name: "custom-table".into(),
        dim,
        mu,
        f: Arc::new(move |_, u| u.signum() * ft1.eval(u.abs())),
        primitive_f: Arc::new(move |_, u| ft2.integral_from_zero(u.abs())),
        g: Arc::new(move |_, s| gt1.eval(s)),
        primitive_g: Arc::new(move |_, s| -gt2.integral_to_infinity(s)),
        growth: GrowthLaw::General,
        x_dependent: false,
    })
}

// ---------------------------------------------------------------------------
// hypothesis audit

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    F1,
    F2,
    F3,
    G1,
    G2,
    G3,
    G4,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 7] = [
        Hypothesis::F1,
        Hypothesis::F2,
        Hypothesis::F3,
        Hypothesis::G1,
        Hypothesis::G2,
        Hypothesis::G3,
        Hypothesis::G4,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Hypothesis::F1 => "(F1)",
            Hypothesis::F2 => "(F2)",
            Hypothesis::F3 => "(F3)",
            Hypothesis::G1 => "(G1)",
            Hypothesis::G2 => "(G2)",
            Hypothesis::G3 => "(G3)",
            Hypothesis::G4 => "(G4)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplePoint {
    pub node: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub hypothesis: Hypothesis,
    pub verdict: Verdict,
    pub margin: f64,
    pub worst: Option<SamplePoint>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<HypothesisCheck>,
}

impl AssumptionReport {
    pub fn get(&self, h: Hypothesis) -> &HypothesisCheck {
        self.checks
            .iter()
            .find(|c| c.hypothesis == h)
            .expect("every hypothesis has an entry")
    }

    /// True when no hypothesis failed outright.
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }
}

pub fn log_space(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    let n = ((b - a) * per_decade as f64).round() as usize;
    (0..=n)
        .map(|k| 10f64.powf(a + (b - a) * k as f64 / n.max(1) as f64))
        .collect()
}

/// Log-spaced `u` samples over `[1e-6, 1e3]`.
pub fn default_u_samples() -> Vec<f64> {
    log_space(1e-6, 1e3, 10)
}

/// Log-spaced `s` samples over `[1e-12, 1e3]`.
pub fn default_s_samples() -> Vec<f64> {
    log_space(1e-12, 1e3, 10)
}

const REL_TOL: f64 = 1e-10;
const F2_THRESHOLD: f64 = 1e-3;
const G4_THRESHOLD: f64 = 1e6;

struct Extremum {
    value: f64,
    at: Option<SamplePoint>,
}

impl Extremum {
    fn min() -> Self {
        Self {
            value: f64::INFINITY,
            at: None,
        }
    }

    fn max() -> Self {
        Self {
            value: f64::NEG_INFINITY,
            at: None,
        }
    }

    fn lower(&mut self, v: f64, node: usize, value: f64) {
        if v < self.value || v.is_nan() {
            self.value = v;
            self.at = Some(SamplePoint { node, value });
        }
    }

    fn raise(&mut self, v: f64, node: usize, value: f64) {
        if v > self.value || v.is_nan() {
            self.value = v;
            self.at = Some(SamplePoint { node, value });
        }
    }
}

/// Audit (F1)–(F3), (G1)–(G4) on the sampled `u` (positive, ascending) and
/// `s` (positive, ascending) ladders over every node of `grid`.
pub fn check_assumptions(
    family: &NonlinearFamily,
    grid: &ManifoldGrid,
    u_samples: &[f64],
    s_samples: &[f64],
) -> AssumptionReport {
    let mut us: Vec<f64> = u_samples.iter().copied().filter(|u| *u > 0.0).collect();
    us.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut ss: Vec<f64> = s_samples.iter().copied().filter(|s| *s > 0.0).collect();
    ss.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let nodes = family.sample_nodes(grid);
    let crit = family.critical_exponent();

    let checks = vec![
        check_f1(family, nodes, &us, crit),
        check_f2(family, nodes, &us),
        check_f3(family, nodes, &us),
        check_g1(family, nodes, &ss),
        check_g2(family, nodes, &ss),
        check_g3(family, grid, &ss),
        check_g4(family, nodes, &ss),
    ];
    AssumptionReport { checks }
}

fn check_f1(family: &NonlinearFamily, nodes: usize, us: &[f64], crit: f64) -> HypothesisCheck {
    let mut odd = Extremum::max();
    let mut growth = Vec::with_capacity(us.len());
    let mut finite = true;
    for &u in us {
        let mut ratio: f64 = 0.0;
        for i in 0..nodes {
            let (fp, fm) = (family.f(i, u), family.f(i, -u));
            finite &= fp.is_finite() && fm.is_finite();
            odd.raise((fp + fm).abs() / (1.0 + fp.abs()), i, u);
            ratio = ratio.max(fp.abs() / (1.0 + u.powf(crit - 1.0)));
        }
        growth.push(ratio);
    }
    let note = "continuity in x assumed (Hölder regularity is not certified by sampling)";
    if !finite {
        return HypothesisCheck {
            hypothesis: Hypothesis::F1,
            verdict: Verdict::Fail,
            margin: f64::NAN,
            worst: None,
            note: "non-finite f".into(),
        };
    }
    if odd.value > REL_TOL {
        return HypothesisCheck {
            hypothesis: Hypothesis::F1,
            verdict: Verdict::Fail,
            margin: -odd.value,
            worst: odd.at,
            note: format!("f is not odd; {note}"),
        };
    }
    let bound = growth.iter().copied().fold(0.0, f64::max);
    let top = *us.last().unwrap_or(&1.0);
    let reference = us.iter().rposition(|&u| u <= top / 10.0);
    let verdict = match reference {
        None => Verdict::Indeterminate,
        Some(j) => {
            let last = *growth.last().expect("samples");
            if last <= 1.01 * growth[j] || last < 1e-300 {
                Verdict::Pass
            } else if last > 2.0 * growth[j] {
                Verdict::Fail
            } else {
                Verdict::Indeterminate
            }
        }
    };
    HypothesisCheck {
        hypothesis: Hypothesis::F1,
        verdict,
        margin: bound,
        worst: None,
        note: format!("margin = sup |f|/(1+|u|^(2*-1)); {note}"),
    }
}

fn check_f2(family: &NonlinearFamily, nodes: usize, us: &[f64]) -> HypothesisCheck {
    let ratio = |u: f64| -> (f64, usize) {
        let mut best = (0.0, 0);
        for i in 0..nodes {
            let r = family.f(i, u).abs() / u;
            if r > best.0 || r.is_nan() {
                best = (r, i);
            }
        }
        best
    };
    let Some(&u_min) = us.first() else {
        return HypothesisCheck {
            hypothesis: Hypothesis::F2,
            verdict: Verdict::Indeterminate,
            margin: f64::NAN,
            worst: None,
            note: "no samples".into(),
        };
    };
    let (low, node) = ratio(u_min);
    let upper = us
        .iter()
        .copied()
        .find(|&u| u >= 100.0 * u_min)
        .unwrap_or(*us.last().expect("samples"));
    let (high, _) = ratio(upper);
    let verdict = if low < F2_THRESHOLD && low <= high * (1.0 + 1e-9) {
        Verdict::Pass
    } else if low >= F2_THRESHOLD && low >= 0.5 * high {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    };
    HypothesisCheck {
        hypothesis: Hypothesis::F2,
        verdict,
        margin: low,
        worst: Some(SamplePoint { node, value: u_min }),
        note: format!("max |f|/|u| = {low:.3e} at u = {u_min:.1e}, {high:.3e} at u = {upper:.1e}"),
    }
}

fn check_f3(family: &NonlinearFamily, nodes: usize, us: &[f64]) -> HypothesisCheck {
    let mu = family.mu();
    let mut ar = Extremum::min();
    let mut sign = Extremum::min();
    for &u in us {
        for i in 0..nodes {
            for v in [u, -u] {
                let fu = family.f(i, v) * v;
                let big_f = family.primitive_f(i, v);
                let scale = 1.0 + fu.abs() + mu * big_f.abs();
                ar.lower((fu - mu * big_f) / scale, i, v);
                sign.lower(big_f / (1.0 + big_f.abs()), i, v);
            }
        }
    }
    let (margin, worst) = if ar.value <= sign.value {
        (ar.value, ar.at)
    } else {
        (sign.value, sign.at)
    };
    let verdict = if mu > 2.0 && margin >= -REL_TOL {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    HypothesisCheck {
        hypothesis: Hypothesis::F3,
        verdict,
        margin,
        worst,
        note: format!(
            "mu = {mu}; min (f u - mu F)/scale = {:.3e}, min F/scale = {:.3e}",
            ar.value, sign.value
        ),
    }
}

fn check_g1(family: &NonlinearFamily, nodes: usize, ss: &[f64]) -> HypothesisCheck {
    let mut top = Extremum::max();
    for &s in ss {
        for i in 0..nodes {
            let big_g = family.primitive_g(i, s);
            top.raise(big_g / (1.0 + big_g.abs()), i, s);
        }
    }
    let verdict = if top.value <= REL_TOL {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    HypothesisCheck {
        hypothesis: Hypothesis::G1,
        verdict,
        margin: -top.value,
        worst: top.at,
        note: "G <= 0 sampled; continuity in x assumed".into(),
    }
}

fn check_g2(family: &NonlinearFamily, nodes: usize, ss: &[f64]) -> HypothesisCheck {
    let mut worst = Extremum::min();
    for i in 0..nodes {
        let g: Vec<f64> = ss.iter().map(|&s| family.g(i, s)).collect();
        let big_g: Vec<f64> = ss.iter().map(|&s| family.primitive_g(i, s)).collect();
        for j in 0..ss.len() {
            worst.lower(g[j] / (1.0 + g[j].abs()), i, ss[j]);
            if j + 1 < ss.len() {
                let dg = (g[j] - g[j + 1]) / (1.0 + g[j].abs());
                worst.lower(dg, i, ss[j + 1]);
                let d_big = (big_g[j + 1] - big_g[j]) / (1.0 + big_g[j].abs());
                worst.lower(d_big, i, ss[j + 1]);
            }
        }
    }
    let verdict = if worst.value >= -REL_TOL {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    HypothesisCheck {
        hypothesis: Hypothesis::G2,
        verdict,
        margin: worst.value,
        worst: worst.at,
        note: "g >= 0 decreasing and G increasing along the s ladder".into(),
    }
}

fn check_g3(family: &NonlinearFamily, grid: &ManifoldGrid, ss: &[f64]) -> HypothesisCheck {
    let mut largest = Extremum::max();
    for &s in ss {
        let values: Vec<f64> = (0..grid.node_count()).map(|i| family.primitive_g(i, s).abs()).collect();
        let integral = grid.integrate_values(&values);
        largest.raise(integral, 0, s);
    }
    let verdict = if largest.value.is_finite() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    HypothesisCheck {
        hypothesis: Hypothesis::G3,
        verdict,
        margin: largest.value,
        worst: largest.at,
        note: "margin = max over s of ∫|G(x,s)| dv_g".into(),
    }
}

fn check_g4(family: &NonlinearFamily, nodes: usize, ss: &[f64]) -> HypothesisCheck {
    let min_g = |s: f64| (0..nodes).map(|i| family.g(i, s)).fold(f64::INFINITY, f64::min);
    let Some(&s_min) = ss.first() else {
        return HypothesisCheck {
            hypothesis: Hypothesis::G4,
            verdict: Verdict::Indeterminate,
            margin: f64::NAN,
            worst: None,
            note: "no samples".into(),
        };
    };
    let ladder: Vec<f64> = ss.iter().map(|&s| min_g(s)).collect();
    let monotone = ladder.windows(2).all(|w| w[0] >= w[1] * (1.0 - 1e-12));
    let low = ladder[0];
    let far = ss
        .iter()
        .position(|&s| s >= 1e6 * s_min)
        .map(|j| ladder[j])
        .unwrap_or(*ladder.last().expect("samples"));
    let verdict = if monotone && low > G4_THRESHOLD {
        Verdict::Pass
    } else if low <= far * (1.0 + 1e-12) {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    };
    HypothesisCheck {
        hypothesis: Hypothesis::G4,
        verdict,
        margin: low,
        worst: Some(SamplePoint { node: 0, value: s_min }),
        note: format!("min_x g = {low:.3e} at s = {s_min:.1e}; threshold {G4_THRESHOLD:.0e}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::build_torus;

    fn grid() -> Arc<ManifoldGrid> {
        build_torus(3, &[4, 4, 4], &[1.0; 3], None).unwrap()
    }

    fn hebey(a: f64, b: f64) -> NonlinearFamily {
        let g = grid();
        make_hebey_family(&Field::constant(&g, a), &Field::constant(&g, b), 3).unwrap()
    }

    fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn hebey_closed_forms() {
        let fam = hebey(0.0, 1.0);
        assert_eq!(fam.f(0, 2.0), 32.0);
        assert_eq!(fam.primitive_g(3, 0.5), 0.0);
        assert_eq!(fam.mu(), 6.0);
        let fam = hebey(1.0, 1.0);
        assert!((fam.g(0, 1.0) - 1.0).abs() < 1e-15);
        assert!((fam.primitive_g(0, 1.0) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hebey_derivatives_match_central_differences() {
        let fam = hebey(0.7, 1.3);
        let h = 1e-5;
        let dg = central(|s| fam.primitive_g(0, s), 0.7, h);
        assert!((dg / fam.g(0, 0.7) - 1.0).abs() < 1e-6);
        let df = central(|u| fam.primitive_f(0, u), 0.9, h);
        assert!((df / fam.f(0, 0.9) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn hebey_rejects_negative_a() {
        let g = grid();
        let out = make_hebey_family(&Field::constant(&g, -1.0), &Field::constant(&g, 1.0), 3);
        assert!(matches!(out, Err(Error::Hypothesis { .. })));
    }

    #[test]
    fn em_family() {
        let g = grid();
        let (zero, one) = (Field::constant(&g, 0.0), Field::constant(&g, 1.0));
        let em = make_em_family(&zero, &one, &one, 4.0, 3).unwrap();
        assert!((em.g(0, 1.0) - 1.0).abs() < 1e-15);
        assert!((em.primitive_g(0, 1.0) + 0.5).abs() < 1e-15);
        let dg = central(|s| em.primitive_g(0, s), 0.5, 1e-5);
        assert!((dg / em.g(0, 0.5) - 1.0).abs() < 1e-6);

        let a = Field::constant(&g, 0.3);
        let em0 = make_em_family(&a, &one, &zero, 4.0, 3).unwrap();
        let heb = make_hebey_family(&a, &one, 3).unwrap();
        for &s in &[1e-3, 0.4, 7.0] {
            assert_eq!(em0.g(2, s), heb.g(2, s));
            assert_eq!(em0.primitive_g(2, s), heb.primitive_g(2, s));
        }
        assert!(matches!(make_em_family(&a, &one, &one, 6.0, 3), Err(Error::Domain(_))));
        assert!(matches!(make_em_family(&a, &one, &one, 2.0, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn power_family() {
        let g = grid();
        let one = Field::constant(&g, 1.0);
        let fam = make_power_family(&one, 4.0, &one, 2.0).unwrap();
        for &u in &[0.3, 1.0, 2.5] {
            assert!((fam.f(0, u) * u - 4.0 * fam.primitive_f(0, u)).abs() < 1e-14);
        }
        assert!((fam.primitive_g(0, 2.0) + 0.5).abs() < 1e-15);
        assert!((fam.g(0, 2.0) - 0.25).abs() < 1e-15);
        assert!(make_power_family(&one, 4.0, &one, 1.0).is_err());
        assert!(make_power_family(&one, 7.0, &one, 2.0).is_err());
    }

    #[test]
    fn hebey_passes_all_hypotheses() {
        let g = grid();
        let report = check_assumptions(&hebey(1.0, 1.0), &g, &default_u_samples(), &default_s_samples());
        for c in &report.checks {
            assert_eq!(c.verdict, Verdict::Pass, "{:?}", c);
        }
        assert_eq!(report.checks.len(), 7);
    }

    #[test]
    fn linear_f_fails_f2() {
        let g = grid();
        let fam = NonlinearFamily::custom(
            "linear",
            3,
            2.5,
            Arc::new(|_, u| u),
            Arc::new(|_, u| 0.5 * u * u),
            Arc::new(|_, s| s.powi(-2)),
            Arc::new(|_, s| -1.0 / s),
        )
        .unwrap();
        let report = check_assumptions(&fam, &g, &default_u_samples(), &default_s_samples());
        assert_eq!(report.get(Hypothesis::F2).verdict, Verdict::Fail);
        assert!(!report.passes());
    }

    #[test]
    fn increasing_g_fails_g2() {
        let g = grid();
        let fam = NonlinearFamily::custom(
            "increasing-g",
            3,
            4.0,
            Arc::new(|_, u| u * u * u),
            Arc::new(|_, u| u.powi(4) / 4.0),
            Arc::new(|_, s| s),
            Arc::new(|_, s| 0.5 * s * s - 1e7),
        )
        .unwrap()
        .x_independent();
        let report = check_assumptions(&fam, &g, &default_u_samples(), &default_s_samples());
        assert_eq!(report.get(Hypothesis::G2).verdict, Verdict::Fail);
        assert_eq!(report.get(Hypothesis::G4).verdict, Verdict::Fail);
    }

    #[test]
    fn supercritical_f_fails_f1() {
        let g = grid();
        let fam = NonlinearFamily::custom(
            "u^7",
            3,
            8.0,
            Arc::new(|_, u| u.powi(7)),
            Arc::new(|_, u| u.powi(8) / 8.0),
            Arc::new(|_, s| s.powi(-2)),
            Arc::new(|_, s| -1.0 / s),
        )
        .unwrap();
        let report = check_assumptions(&fam, &g, &default_u_samples(), &default_s_samples());
        assert_eq!(report.get(Hypothesis::F1).verdict, Verdict::Fail);
    }

    #[test]
    fn vanishing_singular_term_fails_g4() {
        let g = grid();
        let report = check_assumptions(&hebey(0.0, 1.0), &g, &default_u_samples(), &default_s_samples());
        assert_eq!(report.get(Hypothesis::G4).verdict, Verdict::Fail);
        assert_eq!(report.get(Hypothesis::G2).verdict, Verdict::Pass);
    }

    #[test]
    fn negative_b_fails_f3() {
        let g = grid();
        let report = check_assumptions(&hebey(1.0, -1.0), &g, &default_u_samples(), &default_s_samples());
        assert_eq!(report.get(Hypothesis::F3).verdict, Verdict::Fail);
    }

    #[test]
    fn table_family_reproduces_power_data() {
        let us: Vec<f64> = log_space(1e-3, 1e2, 4);
        let fs: Vec<f64> = us.iter().map(|u| u.powi(3)).collect();
        let ss: Vec<f64> = log_space(1e-8, 1e2, 4);
        let gs: Vec<f64> = ss.iter().map(|s| s.powi(-2)).collect();
        let fam = make_table_family(3, 4.0, (&us, &fs), (&ss, &gs)).unwrap();
        assert!((fam.f(0, -0.5) + 0.125).abs() < 1e-12);
        assert!((fam.primitive_f(0, 0.5) - 0.5f64.powi(4) / 4.0).abs() < 1e-12);
        assert!(
            (fam.primitive_g(0, 0.25) + 4.0).abs() < 1e-9,
            "{}",
            fam.primitive_g(0, 0.25)
        );
        let dg = central(|s| fam.primitive_g(0, s), 0.3, 1e-5);
        assert!((dg / fam.g(0, 0.3) - 1.0).abs() < 1e-6);
        let report = check_assumptions(&fam, &grid(), &default_u_samples(), &default_s_samples());
        assert!(report.passes(), "{report:?}");
    }
}
