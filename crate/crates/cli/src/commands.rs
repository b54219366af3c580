//! Subcommand implementations. Each writes its report and artifacts into the
//! output directory and returns the verdicts it gated on.

use std::path::{Path, PathBuf};

use mpsolve::continuation::verify_solution;
use mpsolve::diagnostics::{bootstrap_probe, energy_identities, gradient_check, regularity_decomposition_check};
use mpsolve::fieldio::{read_field, read_fld1, to_csv, write_fld1};
use mpsolve::nonlinearity::{default_s_samples, default_u_samples};
use mpsolve::random::band_limited;
use mpsolve::{
    check_assumptions, compute_constants, run_continuation, solve_mountain_pass, ConstantsReport, Error, MpStatus,
    Problem, Verdict,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::config::{RunConfig, Setup};
use crate::report::{to_value, write_report};

/// Relative central-difference step for the gradient check.
const GRADIENT_STEP: f64 = 1e-5;
/// Relative error allowed between `∫r·v` and the difference quotient.
const GRADIENT_TOL: f64 = 1e-6;
/// Base points for the gradient check: the verified field plus this
/// fraction of `max|u|` along seeded directions. At the solution itself both
/// sides of the check vanish.
const GRADIENT_OFFSET: f64 = 0.1;
const GRADIENT_BASES: u64 = 5;
/// Lower bound on `ε` for the gradient check, keeping `g(x, ε+u²)` away
/// from its singularity.
const GRADIENT_EPS_FLOOR: f64 = 0.01;
/// Allowed distance of the bootstrap saturation ratios from 1.
const SATURATION_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Check,
    Constants,
    Solve,
    Continue,
    Verify,
    Export,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Constants => "constants",
            Command::Solve => "solve",
            Command::Continue => "continue",
            Command::Verify => "verify",
            Command::Export => "export",
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Exit code for a failure raised by the solver pipeline.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::PotentialNotCoercive(_) | Error::Hypothesis { .. } | Error::GateFailed(_) => EXIT_VERDICT,
        Error::Convergence { .. }
        | Error::NoSignChange { .. }
        | Error::BracketViolation { .. }
        | Error::SingularCollapse { .. }
        | Error::Domain(_) => EXIT_NUMERICAL,
        Error::Dimension(_) | Error::GridMismatch | Error::Format(_) | Error::Io(_) => EXIT_CONFIG,
    }
}

/// Result of one subcommand.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub verdicts: Map<String, Value>,
    pub constants: Option<Value>,
    pub message: Option<String>,
}

impl Outcome {
    fn verdict(&mut self, name: &str, pass: bool, fail_code: i32) {
        self.verdicts
            .insert(name.into(), Value::from(if pass { "pass" } else { "fail" }));
        if !pass && (self.code == EXIT_PASS || fail_code > self.code) {
            self.code = fail_code;
        }
    }

    fn fail(mut self, err: &Error) -> Self {
        self.code = exit_code(err);
        self.message = Some(err.to_string());
        self
    }
}

pub fn execute(cmd: Command, cfg: &RunConfig, setup: &Setup) -> Outcome {
    let out = cfg.output_dir();
    match cmd {
        Command::Check => check(cfg, setup, &out),
        Command::Constants => constants(cfg, setup, &out).0,
        Command::Solve => solve(cfg, setup, &out),
        Command::Continue => continuation(cfg, setup, &out),
        Command::Verify => verify(cfg, setup, &out),
        Command::Export => export(cfg, &out),
    }
}

fn io_failure(mut outcome: Outcome, err: std::io::Error) -> Outcome {
    outcome.code = EXIT_CONFIG;
    outcome.message = Some(format!("cannot write output: {err}"));
    outcome
}

fn check(_cfg: &RunConfig, setup: &Setup, out: &Path) -> Outcome {
    let mut outcome = Outcome::default();
    let report = check_assumptions(&setup.family, &setup.grid, &default_u_samples(), &default_s_samples());
    for c in &report.checks {
        outcome
            .verdicts
            .insert(c.hypothesis.label().into(), Value::from(c.verdict.to_string()));
    }
    if !report.passes() {
        outcome.code = EXIT_VERDICT;
    }
    let coercive = setup.problem();
    let mean_v = setup.grid.integrate_values(setup.potential.values()) / setup.grid.total_volume();
    outcome.verdict("(V)", coercive.is_ok(), EXIT_VERDICT);
    let value = json!({
        "family": setup.family.name(),
        "mu": setup.family.mu(),
        "potential": { "mean": mean_v, "min": setup.potential.min(), "coercive": coercive.is_ok() },
        "assumptions": to_value(&report),
    });
    if let Err(e) = write_report(out, "check", &value) {
        return io_failure(outcome, e);
    }
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| c.verdict == Verdict::Fail)
        .map(|c| c.hypothesis.label())
        .collect();
    if !failed.is_empty() {
        outcome.message = Some(format!("violated: {}", failed.join(" ")));
    }
    outcome
}

/// Problem plus a constants report whose gates passed, or the outcome to
/// return instead.
fn gated(cfg: &RunConfig, setup: &Setup, out: &Path) -> Result<(Problem, ConstantsReport, Outcome), Box<Outcome>> {
    let (outcome, rep) = constants(cfg, setup, out);
    match rep {
        Some((problem, rep)) if outcome.code == EXIT_PASS => Ok((problem, rep, outcome)),
        _ => {
            let mut outcome = outcome;
            if outcome.code == EXIT_PASS {
                outcome.code = EXIT_VERDICT;
            }
            Err(Box::new(outcome))
        }
    }
}

fn constants(cfg: &RunConfig, setup: &Setup, out: &Path) -> (Outcome, Option<(Problem, ConstantsReport)>) {
    let outcome = Outcome::default();
    let problem = match setup.problem() {
        Ok(p) => p,
        Err(e) => return (outcome.fail(&e), None),
    };
    let rep = match compute_constants(&problem, &setup.psi, &cfg.constants_config()) {
        Ok(r) => r,
        Err(e) => return (outcome.fail(&e), None),
    };
    let mut outcome = outcome;
    outcome.verdict("gf_working", rep.gf.working == Verdict::Pass, EXIT_VERDICT);
    outcome.verdict("gf_positivity", rep.gf.positivity == Verdict::Pass, EXIT_VERDICT);
    outcome.verdict("geometry_chain", rep.geometry.chain_holds(), EXIT_VERDICT);
    outcome
        .verdicts
        .insert("gf_beta".into(), Value::from(rep.gf.beta.to_string()));
    let value = to_value(&rep);
    outcome.constants = Some(value.clone());
    if outcome.code != EXIT_PASS {
        outcome.message = Some("mountain-pass gates failed; see constants report".into());
    }
    if let Err(e) = write_report(out, "constants", &value) {
        return (io_failure(outcome, e), None);
    }
    (outcome, Some((problem, rep)))
}

fn solve(cfg: &RunConfig, setup: &Setup, out: &Path) -> Outcome {
    let (problem, rep, mut outcome) = match gated(cfg, setup, out) {
        Ok(x) => x,
        Err(o) => return *o,
    };
    let eps = cfg.solve_eps();
    let res = match solve_mountain_pass(&problem, eps, &setup.psi, &rep.geometry, &cfg.mp_config()) {
        Ok(r) => r,
        Err(e) => return outcome.fail(&e),
    };
    let converged = res.status == MpStatus::Converged;
    outcome.verdict("converged", converged, EXIT_NUMERICAL);
    outcome.verdict(
        "ps_residual",
        res.ps_residual < cfg.tolerances.tol_residual,
        EXIT_NUMERICAL,
    );
    let tol = cfg.mp_config().bracket_tol;
    outcome.verdict(
        "level_bracket",
        res.c_eps >= res.bracket.0 - tol && res.c_eps <= res.bracket.1 + tol,
        EXIT_VERDICT,
    );
    let value = json!({
        "eps": eps,
        "c_eps": res.c_eps,
        "ps_residual": res.ps_residual,
        "status": to_value(&res.status),
        "sweeps": res.iterations,
        "newton_iterations": res.newton_iterations,
        "bracket": { "lower": res.bracket.0, "upper": res.bracket.1 },
        "t2": res.t2,
        "min_u": res.u_eps.min(),
        "max_u": res.u_eps.max(),
    });
    let mut log = String::from("iteration,path_max,ps_residual\n");
    for row in &res.log {
        log.push_str(&format!("{},{:e},{:e}\n", row.iteration, row.path_max, row.ps_residual));
    }
    let written = write_report(out, "solve", &value)
        .and_then(|_| std::fs::write(out.join("solve_log.csv"), log))
        .and_then(|_| write_fld1(out.join("u_eps.fld"), &res.u_eps).map_err(into_io));
    if let Err(e) = written {
        return io_failure(outcome, e);
    }
    if !converged {
        outcome.message = Some(format!("mountain pass indeterminate after {} sweeps", res.iterations));
    }
    outcome
}

fn into_io(e: Error) -> std::io::Error {
    match e {
        Error::Io(io) => io,
        other => std::io::Error::other(other.to_string()),
    }
}

fn continuation(cfg: &RunConfig, setup: &Setup, out: &Path) -> Outcome {
    let (problem, rep, mut outcome) = match gated(cfg, setup, out) {
        Ok(x) => x,
        Err(o) => return *o,
    };
    let res = match run_continuation(&problem, &setup.psi, &rep.geometry, &cfg.continuation_config()) {
        Ok(r) => r,
        Err(e) => return outcome.fail(&e),
    };
    let tol = cfg.tolerances.tol_identity;
    let mu = setup.family.mu();
    let slacks: Vec<f64> = res
        .ladder
        .iter()
        .map(|r| 4.0 * r.c_eps / (mu - 2.0) + 2.0 * r.c_eps - r.norm_sq)
        .collect();
    let bracket_tol = cfg.mp_config().bracket_tol;
    outcome.verdict("converged", res.all_converged(), EXIT_NUMERICAL);
    outcome.verdict(
        "level_bracket",
        res.ladder
            .iter()
            .all(|r| r.c_eps >= r.bracket.0 - bracket_tol && r.c_eps <= r.bracket.1 + bracket_tol),
        EXIT_VERDICT,
    );
    outcome.verdict(
        "norm_bound",
        res.ladder
            .iter()
            .zip(&slacks)
            .all(|(r, s)| *s >= -tol * (1.0 + r.norm_sq.sqrt())),
        EXIT_VERDICT,
    );
    outcome.verdict("positivity", res.delta0 > 0.0, EXIT_VERDICT);
    outcome.verdict(
        "min_point",
        res.ladder.iter().all(|r| r.min_point.margin >= -tol),
        EXIT_VERDICT,
    );
    outcome.verdict(
        "weak_residual",
        res.final_verification.weak_residual_max < cfg.tolerances.tol_weak,
        EXIT_VERDICT,
    );
    let ladder: Vec<Value> = res
        .ladder
        .iter()
        .zip(&slacks)
        .map(|(r, s)| {
            let mut v = to_value(r);
            v["norm_bound_slack"] = Value::from(*s);
            v
        })
        .collect();
    let value = json!({
        "schedule": to_value(&cfg.schedule()),
        "delta0": res.delta0,
        "ladder": ladder,
        "final_verification": to_value(&res.final_verification),
    });
    let written = write_report(out, "continue", &value)
        .and_then(|_| std::fs::write(out.join("ladder.csv"), res.ladder_csv()))
        .and_then(|_| write_fld1(out.join("u_final.fld"), &res.u_final).map_err(into_io));
    if let Err(e) = written {
        return io_failure(outcome, e);
    }
    outcome
}

fn field_path(cfg: &RunConfig, explicit: &Option<PathBuf>, out: &Path) -> PathBuf {
    match explicit {
        Some(p) => cfg.base_dir.join(p),
        None => out.join("u_final.fld"),
    }
}

fn verify(cfg: &RunConfig, setup: &Setup, out: &Path) -> Outcome {
    let mut outcome = Outcome::default();
    let problem = match setup.problem() {
        Ok(p) => p,
        Err(e) => return outcome.fail(&e),
    };
    let path = field_path(cfg, &cfg.verify.field, out);
    let u = match read_field(&path, &setup.grid) {
        Ok(u) => u,
        Err(e) => {
            outcome.code = EXIT_CONFIG;
            outcome.message = Some(format!("{}: {e}", path.display()));
            return outcome;
        }
    };
    outcome.verdict("positivity", u.min() > 0.0, EXIT_VERDICT);
    if u.min() <= 0.0 {
        outcome.message = Some(format!("min u = {:e}; the weak form needs u > 0", u.min()));
        let value = json!({ "positivity_min": u.min() });
        if let Err(e) = write_report(out, "verify", &value) {
            return io_failure(outcome, e);
        }
        return outcome;
    }
    let v = &cfg.verify;
    let eps = cfg.verify_eps();
    let result = (|| -> mpsolve::Result<Value> {
        let weak = verify_solution(&problem, &u, v.battery_size, cfg.seed)?;
        let grad_eps = eps.max(GRADIENT_EPS_FLOOR);
        let mut gradient: f64 = 0.0;
        for k in 0..GRADIENT_BASES {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k));
            let w = band_limited(&setup.grid, &mut rng, 2);
            let base = u.add_scaled(GRADIENT_OFFSET * u.max_abs() / w.max_abs(), &w)?;
            let err = gradient_check(
                &problem,
                grad_eps,
                &base,
                v.gradient_directions,
                cfg.seed,
                GRADIENT_STEP,
            )?;
            gradient = gradient.max(err);
        }
        let energy = problem.energy(eps, &u)?.total;
        let identities = energy_identities(&problem, eps, &u, energy)?;
        let probe = bootstrap_probe(&setup.grid, &u, v.bootstrap_s, v.bootstrap_l)?;
        let regularity = regularity_decomposition_check(&problem, eps, &u)?;
        outcome.verdict(
            "weak_residual",
            weak.weak_residual_max < cfg.tolerances.tol_weak,
            EXIT_VERDICT,
        );
        outcome.verdict("gradient", gradient < GRADIENT_TOL, EXIT_VERDICT);
        outcome.verdict("bootstrap_monotone", probe.monotone_in_l, EXIT_VERDICT);
        outcome.verdict(
            "bootstrap_saturated",
            probe
                .saturation_ratios
                .iter()
                .all(|r| (r - 1.0).abs() <= SATURATION_TOL),
            EXIT_VERDICT,
        );
        outcome.verdict(
            "regularity_bounds",
            regularity.h_bound_holds && regularity.g_monotone_holds && regularity.k_margin_min >= 0.0,
            EXIT_VERDICT,
        );
        Ok(json!({
            "eps": eps,
            "weak": to_value(&weak),
            "gradient": { "eps": grad_eps, "bases": GRADIENT_BASES, "relative_error": gradient },
            "identities": to_value(&identities),
            "bootstrap": to_value(&probe),
            "regularity": to_value(&regularity),
        }))
    })();
    let value = match result {
        Ok(v) => v,
        Err(e) => return outcome.fail(&e),
    };
    if let Err(e) = write_report(out, "verify", &value) {
        return io_failure(outcome, e);
    }
    if outcome.verdicts.get("weak_residual").and_then(Value::as_str) == Some("fail") {
        outcome.message = Some(format!(
            "weak_residual_max = {} above tol_weak = {}",
            value["weak"]["weak_residual_max"], cfg.tolerances.tol_weak
        ));
    }
    outcome
}

fn export(cfg: &RunConfig, out: &Path) -> Outcome {
    let mut outcome = Outcome::default();
    let path = field_path(cfg, &cfg.export.field, out);
    let (header, values) = match read_fld1(&path) {
        Ok(x) => x,
        Err(e) => {
            outcome.code = EXIT_CONFIG;
            outcome.message = Some(format!("{}: {e}", path.display()));
            return outcome;
        }
    };
    let dest = match &cfg.export.output {
        Some(p) => cfg.base_dir.join(p),
        None => out.join(path.with_extension("csv").file_name().expect("field path names a file")),
    };
    if let Err(e) = std::fs::write(&dest, to_csv(&header, &values)) {
        return io_failure(outcome, e);
    }
    outcome
}
