//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p mpsolve-cli --test acceptance`.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use mpsolve::constants::{estimate_kv, estimate_sv, fit_c_delta, mp_geometry, phi, psi, MpGeometry, SvConfig};
use mpsolve::continuation::{run_continuation, ContinuationConfig, ContinuationResult, Schedule};
use mpsolve::diagnostics::{bootstrap_probe, gradient_check};
use mpsolve::mountainpass::{solve_mountain_pass, MpConfig, MpStatus};
use mpsolve::random::band_limited;
use mpsolve::{
    build_torus, compute_constants, make_hebey_family, make_power_family, ConstantsConfig, Field, ManifoldGrid, Problem,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

// tolerances, one per criterion
const OPERATOR_TOL: f64 = 1e-10;
const KV_TOL: f64 = 1e-8;
const C_DELTA_TOL: f64 = 1e-5;
const PHI_PRIME_TOL: f64 = 1e-8;
const SANDWICH_SLACK: f64 = -1e-8;
const GRADIENT_TOL: f64 = 1e-6;
const ROOT_TOL: f64 = 1e-5;
const LIMIT_TOL: f64 = 1e-4;
const BRACKET_TOL: f64 = 1e-8;
const NORM_BOUND_TOL: f64 = 1e-6;
const MIN_POINT_TOL: f64 = -1e-6;
const WEAK_TOL: f64 = 1e-6;
const SATURATION_TOL: f64 = 0.01;

// homogeneous data: V = 1, f = B u^5, g = A s^-4 on the unit 3-torus
const A: f64 = 1e-7;
const B: f64 = 1.0;
const V: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit_grid(n: usize) -> Arc<ManifoldGrid> {
    build_torus(3, &[n, n, n], &[1.0; 3], None).unwrap()
}

fn hebey(grid: &Arc<ManifoldGrid>, v: Field) -> Problem {
    let fam = make_hebey_family(&Field::constant(grid, A), &Field::constant(grid, B), 3).unwrap();
    Problem::new(v, fam).unwrap()
}

fn bisect(h: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let s_lo = h(lo).signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid).signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Larger root of `Vc = Bc⁵ + Ac(ε+c²)^{-4}`.
fn scalar_root(eps: f64) -> f64 {
    bisect(|c| V * c - B * c.powi(5) - A * c * (eps + c * c).powi(-4), 0.5, 2.0)
}

/// `J_ε` of the constant field `t` on unit volume.
fn scalar_energy(t: f64, eps: f64) -> f64 {
    0.5 * V * t * t - B * t.powi(6) / 6.0 + A / 6.0 * (eps + t * t).powi(-3)
}

/// Maximum of `h` on `[lo, hi]`: dense log sampling then ternary search.
fn dense_max(h: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 20_000;
    let (a, b) = (lo.ln(), hi.ln());
    let at = |k: usize| (a + (b - a) * k as f64 / n as f64).exp();
    let best = (0..=n).max_by(|&i, &j| h(at(i)).total_cmp(&h(at(j)))).unwrap();
    let (mut l, mut r) = (at(best.saturating_sub(1)), at((best + 1).min(n)));
    for _ in 0..200 {
        let m1 = l + (r - l) / 3.0;
        let m2 = r - (r - l) / 3.0;
        if h(m1) < h(m2) {
            l = m1;
        } else {
            r = m2;
        }
    }
    h(0.5 * (l + r))
}

fn operator_exactness() -> Outcome {
    let g = unit_grid(16);
    let k = [1.0, 2.0, 3.0];
    let lambda: f64 = k.iter().map(|m| (2.0 * PI * m).powi(2)).sum();
    let u = Field::from_fn(&g, |x| (2.0 * PI * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2])).cos());
    let lap = g.laplace_beltrami(&u).unwrap();
    let residual = lap
        .values()
        .iter()
        .zip(u.values())
        .fold(0.0f64, |m, (l, x)| m.max((l + lambda * x).abs()))
        / lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut defect: f64 = 0.0;
    for _ in 0..10 {
        let a = band_limited(&g, &mut rng, 4);
        let b = band_limited(&g, &mut rng, 4);
        let la = g.laplace_beltrami(&a).unwrap();
        let lb = g.laplace_beltrami(&b).unwrap();
        let lhs = g.dot(la.values(), b.values());
        let rhs = g.dot(a.values(), lb.values());
        let scale = g.dot(la.values(), la.values()).sqrt() * g.dot(b.values(), b.values()).sqrt();
        defect = defect.max((lhs - rhs).abs() / scale);
    }
    outcome(
        residual < OPERATOR_TOL && defect < OPERATOR_TOL,
        format!("plane-wave residual {residual:.2e}, self-adjointness defect {defect:.2e} (< {OPERATOR_TOL:.0e})"),
    )
}

fn kv_constants() -> Outcome {
    let g = unit_grid(8);
    let one = estimate_kv(&g, &Field::constant(&g, 1.0), 1e-12).unwrap().k_v;
    let four = estimate_kv(&g, &Field::constant(&g, 4.0), 1e-12).unwrap().k_v;
    let (e1, e4) = ((one - 1.0).abs(), (four - 0.25).abs());
    outcome(
        e1 < KV_TOL && e4 < KV_TOL,
        format!("V=1: K_V={one:.12} (err {e1:.1e}); V=4: K_V={four:.12} (err {e4:.1e})"),
    )
}

fn c_delta_fit() -> Outcome {
    let g = unit_grid(4);
    let one = Field::constant(&g, 1.0);
    let fam = make_power_family(&one, 4.0, &Field::constant(&g, 0.0), 2.0).unwrap();
    let delta = 0.25;
    let fitted = fit_c_delta(&fam, &g, delta, (1e-6, 1e6)).unwrap();
    // C_δ = sup_u (u³ − δu)/u⁵
    let oracle = dense_max(|u| (u.powi(3) - delta * u) / u.powi(5), 1e-3, 1e3);
    let pass = (fitted - 1.0).abs() < C_DELTA_TOL && (oracle - 1.0).abs() < C_DELTA_TOL;
    outcome(
        pass,
        format!("fitted {fitted:.10}, 1-D oracle {oracle:.10}, target 1 ± {C_DELTA_TOL:.0e}"),
    )
}

fn geometry_chain() -> Outcome {
    let mut worst_margin = f64::INFINITY;
    let mut worst_slope: f64 = 0.0;
    for dim in 3..=6 {
        for sc in [0.1, 1.0, 10.0] {
            let geo = mp_geometry(sc, 1.0, dim).unwrap();
            let p = geo.critical_exponent();
            worst_margin = worst_margin.min(psi_margin(&geo, p));
            let h = 1e-6 * geo.t0;
            let slope = (phi(geo.t0 + h, sc, p) - phi(geo.t0 - h, sc, p)) / (2.0 * h);
            worst_slope = worst_slope.max(slope.abs());
        }
    }
    outcome(
        worst_margin > 0.0 && worst_slope < PHI_PRIME_TOL,
        format!(
            "min ½Φ(t0) − Ψ(t1) = {worst_margin:.4e}, max |Φ'(t0)| = {worst_slope:.2e} over N∈3..6, S_V·C∈{{0.1,1,10}}"
        ),
    )
}

/// `½Φ(t_0) − Ψ(t_1)` recomputed from the geometry's radii.
fn psi_margin(geo: &MpGeometry, p: f64) -> f64 {
    0.5 * phi(geo.t0, geo.sc, p) - psi(geo.t1, geo.sc, p)
}

fn sandwich() -> Outcome {
    let g = unit_grid(8);
    let fam = make_hebey_family(&Field::constant(&g, 0.0), &Field::constant(&g, 1.0), 3).unwrap();
    let v = Field::from_fn(&g, |x| 1.0 + 0.25 * (2.0 * PI * x[1]).cos());
    let p = Problem::new(v, fam).unwrap();
    let kv = estimate_kv(&g, p.potential(), 1e-10).unwrap();
    let sv = estimate_sv(&g, p.potential(), &SvConfig::default()).unwrap();
    let c = fit_c_delta(p.family(), &g, 1.0 / (4.0 * kv.k_v), (1e-6, 1e6)).unwrap();
    let sc = sv.s_v * c;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    for k in 0..100 {
        let scale = 10f64.powf(-2.0 + 3.0 * k as f64 / 99.0);
        let u = band_limited(&g, &mut rng, 3).scaled(scale);
        let e = p.energy(1.0, &u).unwrap();
        let t = (2.0 * e.quadratic).sqrt();
        let middle = e.quadratic - e.potential_f;
        worst = worst.min(middle - phi(t, sc, 6.0)).min(psi(t, sc, 6.0) - middle);
    }
    outcome(
        worst >= SANDWICH_SLACK,
        format!("min slack {worst:.3e} over 100 fields (S_V={:.6}, C_δ={c:.6})", sv.s_v),
    )
}

fn gradient_consistency() -> Outcome {
    let g = unit_grid(8);
    let v = Field::from_fn(&g, |x| 1.0 + 0.25 * (2.0 * PI * x[1]).cos());
    let p = {
        let fam = make_hebey_family(&Field::constant(&g, 1e-3), &Field::constant(&g, 1.0), 3).unwrap();
        Problem::new(v, fam).unwrap()
    };
    // ε = 0.01 keeps ε + u² >= 0.01
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let u = band_limited(&g, &mut ChaCha8Rng::seed_from_u64(100 + seed), 2);
        worst = worst.max(gradient_check(&p, 0.01, &u, 10, seed, 1e-5).unwrap());
    }
    outcome(
        worst < GRADIENT_TOL,
        format!("max relative error {worst:.2e} over 5 bases × 10 directions"),
    )
}

struct Ladders {
    homogeneous: ContinuationResult,
    homogeneous_geo: MpGeometry,
    varying: ContinuationResult,
    varying_geo: MpGeometry,
    varying_problem: Problem,
}

fn ladders() -> Ladders {
    let g = unit_grid(8);
    let cfg = ContinuationConfig {
        schedule: Schedule::default(),
        ..ContinuationConfig::default()
    };
    let constants = ConstantsConfig {
        sv: SvConfig {
            starts: 4,
            ..SvConfig::default()
        },
        ..ConstantsConfig::default()
    };
    let psi_field = Field::constant(&g, 1.0);
    let hom = hebey(&g, Field::constant(&g, V));
    let hom_rep = compute_constants(&hom, &psi_field, &constants).unwrap();
    assert!(hom_rep.gates_pass(), "homogeneous data must pass the gates");
    let homogeneous = run_continuation(&hom, &psi_field, &hom_rep.geometry, &cfg).unwrap();

    let var = hebey(&g, Field::from_fn(&g, |x| 1.0 + 0.3 * (2.0 * PI * x[0]).cos()));
    let var_rep = compute_constants(&var, &psi_field, &constants).unwrap();
    assert!(var_rep.gates_pass(), "varying-potential data must pass the gates");
    let varying = run_continuation(&var, &psi_field, &var_rep.geometry, &cfg).unwrap();
    Ladders {
        homogeneous,
        homogeneous_geo: hom_rep.geometry,
        varying,
        varying_geo: var_rep.geometry,
        varying_problem: var,
    }
}

fn homogeneous_oracle(l: &Ladders) -> Outcome {
    let g = unit_grid(8);
    let p = hebey(&g, Field::constant(&g, V));
    let psi_field = Field::constant(&g, 1.0);
    let mut worst: f64 = 0.0;
    let mut all_converged = true;
    for eps in Schedule::default().values() {
        let res = solve_mountain_pass(&p, eps, &psi_field, &l.homogeneous_geo, &MpConfig::default()).unwrap();
        all_converged &= res.status == MpStatus::Converged;
        let c = scalar_root(eps);
        worst = worst.max(res.u_eps.values().iter().fold(0.0f64, |m, x| m.max((x - c).abs())));
    }
    let limit = scalar_root(0.0);
    let u = &l.homogeneous.u_final;
    let limit_err = u.values().iter().fold(0.0f64, |m, x| m.max((x - limit).abs()));
    outcome(
        all_converged && worst < ROOT_TOL && limit_err < LIMIT_TOL,
        format!(
            "max |Δ|∞ {worst:.2e} over 21 rungs (< {ROOT_TOL:.0e}); limit error {limit_err:.2e} (< {LIMIT_TOL:.0e})"
        ),
    )
}

fn level_bracket(l: &Ladders) -> Outcome {
    let geo = &l.homogeneous_geo;
    let mut worst = f64::INFINITY;
    for r in &l.homogeneous.ladder {
        // ψ ≡ 1 with V = 1 on unit volume: the normalized ray is the constant t
        let sup = dense_max(|t| scalar_energy(t, r.eps), geo.t1, 4.0);
        worst = worst
            .min(r.c_eps - (geo.phi_t0 - BRACKET_TOL))
            .min(sup + BRACKET_TOL - r.c_eps);
    }
    let hom_worst = worst;
    let geo = &l.varying_geo;
    for r in &l.varying.ladder {
        worst = worst
            .min(r.c_eps - (geo.phi_t0 - BRACKET_TOL))
            .min(r.bracket.1 + BRACKET_TOL - r.c_eps);
    }
    let converged = l.homogeneous.all_converged() && l.varying.all_converged();
    outcome(
        converged && worst >= 0.0,
        format!("min bracket slack {worst:.3e} (homogeneous, scalar oracle: {hom_worst:.3e}) over 42 rungs"),
    )
}

fn norm_bound(l: &Ladders) -> Outcome {
    let mu = 6.0;
    let mut worst = f64::INFINITY;
    for r in l.homogeneous.ladder.iter().chain(&l.varying.ladder) {
        let slack = 4.0 * r.c_eps / (mu - 2.0) + 2.0 * r.c_eps - r.norm_sq;
        worst = worst.min(slack + NORM_BOUND_TOL * (1.0 + r.norm_sq.sqrt()));
    }
    outcome(
        worst >= 0.0,
        format!("min slack incl. tolerance {worst:.4e} over 42 rungs"),
    )
}

fn positivity_ladder(l: &Ladders) -> Outcome {
    let margin = l
        .homogeneous
        .ladder
        .iter()
        .chain(&l.varying.ladder)
        .fold(f64::INFINITY, |m, r| m.min(r.min_point.margin));
    let (d_h, d_v) = (l.homogeneous.delta0, l.varying.delta0);
    outcome(
        d_h > 0.0 && d_v > 0.0 && margin >= MIN_POINT_TOL,
        format!("δ0 = {d_h:.6} (homogeneous), {d_v:.6} (varying V); min min-point margin {margin:.4e}"),
    )
}

fn weak_verification(l: &Ladders) -> Outcome {
    let (h, v) = (&l.homogeneous.final_verification, &l.varying.final_verification);
    let worst = h.weak_residual_max.max(v.weak_residual_max);
    let finite = h.singular_integrability.is_finite() && v.singular_integrability.is_finite();
    outcome(
        worst < WEAK_TOL && finite && h.battery_size == 16 && v.battery_size == 16,
        format!(
            "weak residual {:.2e} / {:.2e}; ∫g|uφ| max {:.4e} / {:.4e} (homogeneous / varying V, 16 functions)",
            h.weak_residual_max, v.weak_residual_max, h.singular_integrability, v.singular_integrability
        ),
    )
}

fn bootstrap(l: &Ladders) -> Outcome {
    let n: f64 = 3.0;
    let probe = bootstrap_probe(l.varying_problem.grid(), &l.varying.u_final, 4, 8).unwrap();
    let exact = probe
        .exponent_ladder
        .iter()
        .enumerate()
        .all(|(i, q)| *q == 2.0 * (n / (n - 2.0)).powi(i as i32));
    let worst = probe
        .saturation_ratios
        .iter()
        .fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    outcome(
        probe.monotone_in_l && worst <= SATURATION_TOL && exact,
        format!(
            "monotone {}, max |ratio − 1| {worst:.2e}, ladder {:?}",
            probe.monotone_in_l, probe.exponent_ladder
        ),
    )
}

const DETERMINISM_CONFIG: &str = r#"
seed = 3
output_dir = "out"
potential = { constant = 1.0, modes = [{ amplitude = 0.3, axis = 0, k = 1 }] }

[manifold]
dim = 3
points = [8, 8, 8]
lengths = [1.0, 1.0, 1.0]

[family]
kind = "hebey"
a = 1e-7
b = 1.0

[schedule]
eps0 = 0.1
ratio = 0.5
k_max = 10
"#;

fn run_cli(dir: &Path, threads: &str) -> bool {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, DETERMINISM_CONFIG).unwrap();
    ["constants", "solve", "continue", "verify", "export"]
        .iter()
        .all(|cmd| {
            Command::new(env!("CARGO_BIN_EXE_mpsolve"))
                .args([cmd, cfg.to_str().unwrap()])
                .env("SOLVER_THREADS", threads)
                .output()
                .map(|o| o.status.success())
                .unwrap_or(false)
        })
}

fn determinism() -> Outcome {
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap()];
    let ok = run_cli(dirs[0].path(), "1") && run_cli(dirs[1].path(), "4");
    if !ok {
        return outcome(false, "a CLI run exited non-zero".into());
    }
    let mut names: Vec<_> = fs::read_dir(dirs[0].path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| {
            fs::read(dirs[0].path().join("out").join(n)).ok() != fs::read(dirs[1].path().join("out").join(n)).ok()
        })
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} files compared across 1 and 4 threads; differing: {differing:?}",
            names.len()
        ),
    )
}

fn main() {
    let ladders = ladders();
    let results: Vec<(&str, Outcome)> = vec![
        ("operator exactness", operator_exactness()),
        ("K_V", kv_constants()),
        ("C_δ", c_delta_fit()),
        ("geometry chain", geometry_chain()),
        ("sandwich", sandwich()),
        ("gradient consistency", gradient_consistency()),
        ("homogeneous oracle", homogeneous_oracle(&ladders)),
        ("level bracket", level_bracket(&ladders)),
        ("norm bound", norm_bound(&ladders)),
        ("positivity ladder", positivity_ladder(&ladders)),
        ("final weak verification", weak_verification(&ladders)),
        ("bootstrap probe", bootstrap(&ladders)),
        ("determinism", determinism()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {:>2} {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
