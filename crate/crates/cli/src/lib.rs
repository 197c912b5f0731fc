//! Problem-spec documents, result documents and the batch commands behind the
//! `levy-impulse` binary.
//!
//! Exit codes: 0 success, 1 error (including spec errors), 2 detected
//! degeneracy, 3 verification ran but a check failed.

use std::fmt::Write as _;
use std::time::Instant;

use levy_impulse::ladder::{build_ladder_system, LadderSystem};
use levy_impulse::prelude::{
    gain_rate, run_policy, Degeneracy, Error, Gamma, LevyModel, PayoffSpec, PolicySolution, Restart, RunningCost,
    SimOptions, SimulationReport, SolveOptions, Strategy,
};
use levy_impulse::simulate::{verify_solution, VerificationReport, VerifyOptions};
use levy_impulse::solver::{ladder_options_for, potential_for, prepare_with_ladder, solve_prepared, Audit};
use levy_impulse::tail::TailFunction;
use levy_impulse::transform::{generator_gamma, hat_h};
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DEGENERATE: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("spec parse error at line {line}, column {column} (field `{path}`): {message}")]
    SpecParse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("spec parse error (field `{field}`): {reason}")]
    SpecInvalid { field: String, reason: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solver(#[from] Error),
    #[error("unknown sweep parameter `{0}` (expected K, drift, sigma2 or jump_rate)")]
    UnknownParam(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(e) => exit_code(e),
            _ => EXIT_ERROR,
        }
    }
}

/// 2 for degeneracies the solver classifies, 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NoThreshold { .. } | Error::Unbounded => EXIT_DEGENERATE,
        _ => EXIT_ERROR,
    }
}

pub fn degeneracy_of(e: &Error) -> Option<Degeneracy> {
    match e {
        Error::NoThreshold { .. } => Some(Degeneracy::NoThreshold),
        Error::Unbounded => Some(Degeneracy::Unbounded),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffDoc {
    pub gamma: Gamma<f64>,
    #[serde(default = "zero_cost")]
    pub h: RunningCost<f64>,
    #[serde(rename = "K")]
    pub k: f64,
}

fn zero_cost() -> RunningCost<f64> {
    RunningCost::Zero
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartMode {
    Free,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestartDoc {
    pub mode: RestartMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
}

impl Default for RestartDoc {
    fn default() -> Self {
        Self {
            mode: RestartMode::Free,
            point: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub dt: f64,
    /// Potential-density grid step; derived from the ladder when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    pub working_bound: f64,
    /// Paths for Monte Carlo ladder estimates and the supermartingale check.
    pub mc_paths: usize,
    pub mc_cycles: usize,
    pub seed: u64,
    pub tol_rho: f64,
    #[serde(rename = "tol_G")]
    pub tol_g: f64,
    pub audit: Audit,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            grid_step: None,
            working_bound: 1e3,
            mc_paths: 2000,
            mc_cycles: 100_000,
            seed: 42,
            tol_rho: 1e-12,
            tol_g: 1e-10,
            audit: Audit::Standard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub process: LevyModel<f64>,
    pub payoff: PayoffDoc,
    #[serde(default)]
    pub restart: RestartDoc,
    #[serde(default)]
    pub numerics: Numerics,
}

fn invalid(field: &str, reason: impl Into<String>) -> CliError {
    CliError::SpecInvalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ProblemSpec {
    /// Parses and validates a JSON spec; errors carry the position and field path.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: ProblemSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::SpecParse {
                path,
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, CliError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        self.payoff()?;
        let n = &self.numerics;
        let positive = [
            ("numerics.dt", n.dt),
            ("numerics.working_bound", n.working_bound),
            ("numerics.tol_rho", n.tol_rho),
            ("numerics.tol_G", n.tol_g),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        if let Some(g) = n.grid_step {
            if !(g > 0.0 && g.is_finite()) {
                return Err(invalid(
                    "numerics.grid_step",
                    format!("must be finite and > 0, got {g}"),
                ));
            }
        }
        if n.mc_paths == 0 {
            return Err(invalid("numerics.mc_paths", "must be > 0"));
        }
        if n.mc_cycles == 0 {
            return Err(invalid("numerics.mc_cycles", "must be > 0"));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<LevyModel<f64>, CliError> {
        let p = &self.process;
        LevyModel::new(p.drift, p.sigma2, p.jump_rate, p.jump_law).map_err(|e| field_error("process", e))
    }

    pub fn payoff(&self) -> Result<PayoffSpec<f64>, CliError> {
        let restart = match (self.restart.mode, self.restart.point) {
            (RestartMode::Free, None) => Restart::Free,
            (RestartMode::Fixed, Some(point)) => Restart::Fixed { point },
            (RestartMode::Free, Some(_)) => return Err(invalid("restart.point", "only allowed with mode = fixed")),
            (RestartMode::Fixed, None) => return Err(invalid("restart.point", "required with mode = fixed")),
        };
        PayoffSpec::new(self.payoff.gamma.clone(), self.payoff.h.clone(), self.payoff.k)
            .and_then(|p| p.with_restart(restart))
            .map_err(|e| field_error("payoff", e))
    }

    pub fn solve_options(&self) -> SolveOptions<f64> {
        let n = &self.numerics;
        let mut o = SolveOptions {
            working_bound: n.working_bound,
            rho_tol: n.tol_rho,
            g_tol: n.tol_g,
            audit: n.audit,
            ..SolveOptions::default()
        };
        o.ladder.occupation.dt = n.dt;
        o.ladder.occupation.n_paths = n.mc_paths;
        o.ladder.occupation.seed = n.seed;
        if let Some(step) = n.grid_step {
            let model = self.model().ok();
            let z_max = model
                .and_then(|m| build_ladder_system(&m, &o.ladder).ok())
                .map(|l| potential_for(&l, &o).map(|u| u.z_max()).unwrap_or(16.0))
                .unwrap_or(16.0);
            o.potential_z_max = Some(z_max);
            o.potential_points = ((z_max / step).ceil() as usize + 1).max(3);
        }
        o
    }

    pub fn sim_options(&self) -> SimOptions<f64> {
        let n = &self.numerics;
        SimOptions {
            n_cycles: n.mc_cycles,
            dt: n.dt,
            seed: n.seed,
            ..SimOptions::default()
        }
    }

    pub fn verify_options(&self) -> VerifyOptions<f64> {
        VerifyOptions {
            sim: self.sim_options(),
            solve: self.solve_options(),
            supermartingale: self.numerics.audit == Audit::High,
            sm_paths: self.numerics.mc_paths,
            ..VerifyOptions::default()
        }
    }
}

fn field_error(field: &str, e: Error) -> CliError {
    match e {
        Error::InvalidParameter { name, reason } => invalid(&format!("{field}.{name}"), reason),
        Error::NonPositiveMean { mean } => invalid(field, format!("mean rate must be > 0, got {mean}")),
        other => CliError::Solver(other),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub solve_seconds: Option<f64>,
    pub simulate_seconds: Option<f64>,
    pub verify_seconds: Option<f64>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub version: String,
    pub spec: ProblemSpec,
    pub degeneracy: Degeneracy,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<PolicySolution<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationReport<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationReport<f64>>,
    pub timings: Timings,
}

impl RunResult {
    fn new(spec: &ProblemSpec) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            spec: spec.clone(),
            degeneracy: Degeneracy::None,
            message: None,
            solution: None,
            simulation: None,
            verification: None,
            timings: Timings::default(),
        }
    }
}

/// A result document and the exit code it maps to.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: RunResult,
    pub exit_code: i32,
}

type Parts = (LevyModel<f64>, PayoffSpec<f64>, LadderSystem<f64>);

fn ladder_for(spec: &ProblemSpec) -> Result<Parts, CliError> {
    let model = spec.model()?;
    let payoff = spec.payoff()?;
    let ladder = build_ladder_system(&model, &ladder_options_for(&payoff, &spec.solve_options()))?;
    Ok((model, payoff, ladder))
}

fn solve_spec(spec: &ProblemSpec) -> Result<Result<PolicySolution<f64>, Error>, CliError> {
    let (_, payoff, ladder) = ladder_for(spec)?;
    let opts = spec.solve_options();
    let attempt = prepare_with_ladder(ladder, &payoff, &opts).and_then(|prep| solve_prepared(&prep, &payoff, &opts));
    match attempt {
        Ok(sol) => Ok(Ok(sol)),
        Err(e) if degeneracy_of(&e).is_some() => Ok(Err(e)),
        Err(e) => Err(e.into()),
    }
}

/// Runs ladder → transform → solver.
pub fn cmd_solve(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let mut result = RunResult::new(spec);
    let exit_code = match solve_spec(spec)? {
        Ok(sol) => {
            result.degeneracy = sol.degeneracy;
            let code = if sol.degeneracy == Degeneracy::None {
                EXIT_OK
            } else {
                EXIT_DEGENERATE
            };
            result.solution = Some(sol);
            code
        }
        Err(e) => {
            result.degeneracy = degeneracy_of(&e).expect("degenerate error");
            result.message = Some(e.to_string());
            EXIT_DEGENERATE
        }
    };
    result.timings.solve_seconds = Some(start.elapsed().as_secs_f64());
    result.timings.total_seconds = start.elapsed().as_secs_f64();
    Ok(Outcome { result, exit_code })
}

/// Simulates the band `(s, S)` (restart at `restart.point` in fixed mode).
pub fn cmd_simulate(
    spec: &ProblemSpec,
    s: Option<f64>,
    big_s: f64,
    cycles: Option<usize>,
    seed: Option<u64>,
) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let model = spec.model()?;
    let payoff = spec.payoff()?;
    let strategy = match payoff.restart {
        Restart::Free => Strategy::Band {
            s: s.ok_or_else(|| invalid("s", "required for free restart"))?,
            big_s,
        },
        Restart::Fixed { point } => Strategy::FixedRestart { y0: point, big_s },
    };
    let mut opts = spec.sim_options();
    if let Some(n) = cycles {
        opts.n_cycles = n;
    }
    if let Some(seed) = seed {
        opts.seed = seed;
    }
    let report = run_policy(&model, &payoff, &strategy, &opts)?;
    let mut result = RunResult::new(spec);
    result.simulation = Some(report);
    result.timings.simulate_seconds = Some(start.elapsed().as_secs_f64());
    result.timings.total_seconds = start.elapsed().as_secs_f64();
    Ok(Outcome {
        result,
        exit_code: EXIT_OK,
    })
}

/// Solves, then runs the full verification protocol.
pub fn cmd_verify(spec: &ProblemSpec) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let mut outcome = cmd_solve(spec)?;
    let Some(sol) = outcome.result.solution.clone() else {
        return Ok(outcome);
    };
    if sol.degeneracy != Degeneracy::None {
        return Ok(outcome);
    }
    let t = Instant::now();
    let report = verify_solution(&spec.model()?, &spec.payoff()?, &sol, &spec.verify_options())?;
    outcome.exit_code = if report.all_passed() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    };
    outcome.result.simulation = Some(report.simulation.clone());
    outcome.result.verification = Some(report);
    outcome.result.timings.verify_seconds = Some(t.elapsed().as_secs_f64());
    outcome.result.timings.total_seconds = start.elapsed().as_secs_f64();
    Ok(outcome)
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

/// CSV rows `param,rho_star,s,S,degeneracy` over an evenly spaced grid.
/// Sweeping `K` reuses one prepared ladder, gain rate and potential density.
pub fn cmd_sweep(spec: &ProblemSpec, param: &str, from: f64, to: f64, steps: usize) -> Result<String, CliError> {
    if steps == 0 {
        return Err(invalid("steps", "must be > 0"));
    }
    if !["K", "drift", "sigma2", "jump_rate"].contains(&param) {
        return Err(CliError::UnknownParam(param.to_string()));
    }
    let values: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                from
            } else {
                from + (to - from) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let mut out = String::from("param,rho_star,s,S,degeneracy\n");
    let opts = spec.solve_options();
    let shared = if param == "K" {
        let (_, payoff, ladder) = ladder_for(spec)?;
        Some(prepare_with_ladder(ladder, &payoff, &opts))
    } else {
        None
    };
    for v in values {
        let mut local = spec.clone();
        match param {
            "K" => local.payoff.k = v,
            "drift" => local.process.drift = v,
            "sigma2" => local.process.sigma2 = v,
            _ => local.process.jump_rate = v,
        }
        local.validate()?;
        let attempt = match &shared {
            Some(Ok(prep)) => solve_prepared(prep, &local.payoff()?, &opts),
            Some(Err(e)) => Err(e.clone()),
            None => {
                let (_, payoff, ladder) = ladder_for(&local)?;
                prepare_with_ladder(ladder, &payoff, &opts).and_then(|prep| solve_prepared(&prep, &payoff, &opts))
            }
        };
        match attempt {
            Ok(sol) => writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f(v),
                fmt_f(sol.rho_star),
                fmt_f(sol.s),
                fmt_f(sol.big_s),
                degeneracy_label(sol.degeneracy)
            )
            .expect("write to string"),
            Err(e) => match degeneracy_of(&e) {
                Some(d) => writeln!(out, "{},,,,{}", fmt_f(v), degeneracy_label(d)).expect("write to string"),
                None => return Err(e.into()),
            },
        }
    }
    Ok(out)
}

pub fn degeneracy_label(d: Degeneracy) -> &'static str {
    match d {
        Degeneracy::None => "none",
        Degeneracy::Unbounded => "unbounded",
        Degeneracy::NoThreshold => "no-threshold",
        Degeneracy::InactionCandidate => "inaction-candidate",
    }
}

/// CSV rows `quantity,x,value`: scalars (`q`, `delta_h`, `mean_rate`,
/// `jump_mass`, `normalization_residual`) with empty `x`, then the `pi_bar_h`
/// grid and, with `potential`, the `u` grid.
pub fn cmd_ladder(spec: &ProblemSpec, potential: bool) -> Result<String, CliError> {
    let (_, _, ladder) = ladder_for(spec)?;
    let mut out = String::from("quantity,x,value\n");
    let scalar = |out: &mut String, name: &str, v: Option<f64>| {
        writeln!(out, "{name},,{}", v.map(fmt_f).unwrap_or_default()).expect("write to string");
    };
    scalar(&mut out, "q", ladder.q);
    scalar(&mut out, "delta_h", Some(ladder.delta_h));
    scalar(&mut out, "mean_rate", Some(ladder.mean_rate));
    scalar(&mut out, "jump_mass", Some(ladder.jump_mass));
    scalar(&mut out, "normalization_residual", Some(ladder.normalization_residual));
    let reach = match &ladder.pi_bar_h {
        TailFunction::Zero => 1.0,
        TailFunction::Step { at, .. } => 2.0 * at,
        TailFunction::Table { knots, .. } => *knots.last().expect("non-empty"),
        t => 10.0 / t.decay_rate(),
    };
    for i in 0..=200 {
        let x = reach * i as f64 / 200.0;
        writeln!(out, "pi_bar_h,{},{}", fmt_f(x), fmt_f(ladder.pi_bar_h.eval(x))).expect("write to string");
    }
    if potential {
        let u = potential_for(&ladder, &spec.solve_options())?;
        writeln!(out, "u_atom,0,{}", fmt_f(u.atom_at_zero)).expect("write to string");
        for (t, v) in u.grid() {
            writeln!(out, "u,{},{}", fmt_f(t), fmt_f(v)).expect("write to string");
        }
    }
    Ok(out)
}

/// CSV rows `x,hat_h,generator,g` on an evenly spaced grid.
pub fn cmd_transform(spec: &ProblemSpec, from: f64, to: f64, steps: usize) -> Result<String, CliError> {
    if steps < 2 {
        return Err(invalid("steps", "must be >= 2"));
    }
    let (_, payoff, ladder) = ladder_for(spec)?;
    let hh = hat_h(&ladder, &payoff.h)?;
    let gen = generator_gamma(&ladder, &payoff.gamma)?;
    let g = gain_rate(&ladder, &payoff)?;
    let mut out = String::from("x,hat_h,generator,g\n");
    for i in 0..steps {
        let x = from + (to - from) * i as f64 / (steps - 1) as f64;
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f(x),
            fmt_f(hh.eval(x)),
            fmt_f(gen.eval(x)),
            fmt_f(g.eval(x))
        )
        .expect("write to string");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BM: &str = r#"{
        "process": {"drift": 1.0, "sigma2": 2.0, "jump_rate": 0.0, "jump_law": null},
        "payoff": {"gamma": {"kind": "linear", "params": {"c": 1.0}},
                   "h": {"kind": "polynomial", "params": {"coeffs": [0.0, 0.0, 1.0]}},
                   "K": 1.3333333333333333}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let spec = ProblemSpec::parse(BM).unwrap();
        assert_eq!(spec.numerics, Numerics::default());
        assert_eq!(spec.restart.mode, RestartMode::Free);
    }

    #[test]
    fn negative_k_names_the_field() {
        let bad = BM.replace("1.3333333333333333", "-1.0");
        let err = ProblemSpec::parse(&bad).unwrap_err();
        assert!(err.to_string().contains("K"), "{err}");
        assert_eq!(err.exit_code(), EXIT_ERROR);
    }

    #[test]
    fn unknown_field_reports_position() {
        let bad = BM.replace("\"jump_rate\"", "\"jump_rte\"");
        match ProblemSpec::parse(&bad).unwrap_err() {
            CliError::SpecParse { path, line, .. } => {
                assert!(path.starts_with("process"), "{path}");
                assert_eq!(line, 2);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn restart_point_iff_fixed() {
        let fixed = BM.replace(
            "\"K\": 1.3333333333333333",
            "\"K\": 1.0}, \"restart\": {\"mode\": \"fixed\"",
        );
        let fixed = fixed.trim_end().trim_end_matches('}').to_string() + "}";
        assert!(ProblemSpec::parse(&fixed).is_err());
    }

    #[test]
    fn spec_round_trips() {
        let spec = ProblemSpec::parse(BM).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(ProblemSpec::parse(&text).unwrap(), spec);
    }
}
