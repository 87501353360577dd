//! Seeded Monte Carlo experiments, paired filter comparisons, and scenario validation.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::batch::{self, OracleOptions};
use crate::constraints::{self, ConstraintSchedule, Family};
use crate::error::{Error, Result};
use crate::filter::{self, FilterMode, FilterPlan, Start};
use crate::linalg::{self, Mat, Vector};
use crate::model::{self, LdssModel, Simulator, Trajectory};

/// Trials are processed in fixed-size chunks whose partial sums are combined in chunk order, so
/// results do not depend on the number of worker threads.
const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Kf,
    Lmvdrf,
    Lckf,
    Lclmvdrf,
    Lcmve,
}

impl FilterKind {
    pub const ALL: [FilterKind; 5] =
        [FilterKind::Kf, FilterKind::Lmvdrf, FilterKind::Lckf, FilterKind::Lclmvdrf, FilterKind::Lcmve];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Kf => "kf",
            FilterKind::Lmvdrf => "lmvdrf",
            FilterKind::Lckf => "lckf",
            FilterKind::Lclmvdrf => "lclmvdrf",
            FilterKind::Lcmve => "lcmve",
        }
    }

    /// Start used when a scenario does not specify one.
    pub fn default_start(self) -> Start {
        match self {
            FilterKind::Kf | FilterKind::Lckf => Start::Prior,
            _ => Start::Fisher,
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FilterKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown filter `{s}` (expected one of kf, lmvdrf, lckf, lclmvdrf, lcmve)"))
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: LdssModel,
    pub filter: FilterKind,
    /// User constraints before preset expansion.
    pub schedule: ConstraintSchedule,
    pub init: Start,
    pub trials: usize,
    pub seed: u64,
    /// Fixed `x_1` for every trial; otherwise `x_1` is drawn from the prior.
    pub x1_override: Option<Vector>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, model: LdssModel, filter: FilterKind) -> Self {
        Self {
            name: name.into(),
            model,
            filter,
            schedule: ConstraintSchedule::default(),
            init: filter.default_start(),
            trials: 1000,
            seed: 0,
            x1_override: None,
        }
    }

    /// Start and expanded schedule for `kind` under this scenario.
    pub fn configuration(&self, kind: FilterKind) -> Result<(Start, ConstraintSchedule)> {
        let stochastic_start = match &self.init {
            Start::Fisher => Start::Prior,
            other => other.clone(),
        };
        Ok(match kind {
            FilterKind::Kf => (stochastic_start, ConstraintSchedule::unconstrained()),
            FilterKind::Lmvdrf => (Start::Fisher, ConstraintSchedule::unconstrained()),
            FilterKind::Lckf => (self.init.clone(), self.schedule.clone()),
            FilterKind::Lclmvdrf => (Start::Fisher, constraints::lckf_to_lclmvdrf(&self.schedule, &self.model)?),
            FilterKind::Lcmve => {
                filter::check_static_regime(&self.model)?;
                match &self.init {
                    Start::Rwlse { .. } => (self.init.clone(), self.schedule.clone()),
                    _ => (Start::Fisher, constraints::lckf_to_lclmvdrf(&self.schedule, &self.model)?),
                }
            }
        })
    }

    fn simulate(&self, sim: &Simulator<'_>, trial: usize) -> Result<Trajectory> {
        let seed = self.seed.wrapping_add(trial as u64);
        match &self.x1_override {
            Some(x1) => sim.with_initial_state(x1, seed),
            None => Ok(sim.from_prior(seed)),
        }
    }
}

/// Two-state rotation dynamics observed through three channels over ten steps, with a schedule
/// that nulls channel 3 from step 3 and adds a channel-difference null at step 6.
pub fn reference_scenario() -> Scenario {
    let angle: f64 = 0.1;
    let f = Mat::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()]);
    let h = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let model = LdssModel::time_invariant(
        10,
        f,
        h,
        Mat::identity(2, 2) * 0.01,
        Mat::identity(3, 3) * 0.25,
        Vector::from_vec(vec![1.0, 0.0]),
        Mat::identity(2, 2),
    );
    let e3 = Mat::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
    let diff = Mat::from_row_slice(3, 1, &[1.0, -1.0, 0.0]);
    let mut blocks: Vec<Option<(Mat, Mat)>> = vec![None; 10];
    blocks[2] = Some((e3, Mat::zeros(2, 1)));
    blocks[5] = Some((diff, Mat::zeros(2, 1)));
    let mut s = Scenario::new("reference", model, FilterKind::Lckf);
    s.schedule = ConstraintSchedule::from_blocks(blocks);
    s.trials = 10_000;
    s.seed = 1;
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct StepStats {
    pub step: usize,
    pub theoretical_covariance: Vec<Vec<f64>>,
    /// Empirical `E[e eᵀ]` of the error `e = x − x̂`.
    pub empirical_covariance: Vec<Vec<f64>>,
    pub empirical_bias: Vec<f64>,
    /// `4 √(P_ii / trials)`.
    pub bias_bound: Vec<f64>,
    pub bias_within_bound: bool,
    pub theo_mse_trace: f64,
    pub est_mse_trace: f64,
    pub bias_norm: f64,
    pub constraint_residual: f64,
    pub constraint_tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub filter: String,
    pub modes: Vec<FilterMode>,
    pub trials: usize,
    pub base_seed: u64,
    pub horizon: usize,
    /// Shape of the stacked constraint `Λ_k` per step.
    pub constraint_dims: Vec<[usize; 2]>,
    pub steps: Vec<StepStats>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl RunReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "est_mse_trace", "theo_mse_trace", "bias_norm", "constraint_residual"])?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.est_mse_trace.to_string(),
                s.theo_mse_trace.to_string(),
                s.bias_norm.to_string(),
                s.constraint_residual.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn step(&self, k: usize) -> &StepStats {
        &self.steps[k - 1]
    }
}

fn rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Running sums of errors and error outer products per step.
#[derive(Debug, Clone)]
struct Accumulator {
    sum: Vec<Vector>,
    outer: Vec<Mat>,
}

impl Accumulator {
    fn new(model: &LdssModel, horizon: usize) -> Self {
        let dims: Vec<usize> = (1..=horizon).map(|k| model.state_dim(k)).collect();
        Self {
            sum: dims.iter().map(|&p| Vector::zeros(p)).collect(),
            outer: dims.iter().map(|&p| Mat::zeros(p, p)).collect(),
        }
    }

    fn add_trial(&mut self, estimates: &[Vector], states: &[Vector]) {
        for (i, (xh, x)) in estimates.iter().zip(states).enumerate() {
            let e = x - xh;
            self.outer[i].ger(1.0, &e, &e, 1.0);
            self.sum[i] += e;
        }
    }

    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.outer.iter_mut().zip(&other.outer) {
            *a += b;
        }
    }
}

/// Plan for one filter plus the stacked-constraint shapes for reporting.
struct Prepared {
    label: String,
    plan: FilterPlan,
    constraint_dims: Vec<[usize; 2]>,
}

fn prepare(scenario: &Scenario, kind: FilterKind, label: String) -> Result<Prepared> {
    let model = &scenario.model;
    let horizon = model.horizon();
    let (start, schedule) = scenario.configuration(kind)?;
    let plan = match FilterPlan::build(model, &start, &schedule, horizon) {
        Ok(plan) => plan,
        Err(source) => {
            let step = (1..=horizon)
                .find(|&k| FilterPlan::build(model, &start, &schedule, k).is_err())
                .unwrap_or(horizon);
            return Err(Error::Trial { trial: 0, step, source: Box::new(source) });
        }
    };
    let effective = filter::effective_schedule(model, &start, &schedule);
    let families = effective.resolve(horizon)?;
    let mut constraint_dims = Vec::with_capacity(horizon);
    let (mut rows, mut cols) = (0, 0);
    for (i, fam) in families.iter().enumerate() {
        let k = i + 1;
        rows += model.meas_dim(k);
        let new = effective.step(k).columns();
        cols = match fam {
            Family::None => 0,
            Family::C3 => cols,
            Family::C2 => new,
            Family::C1 => cols + new,
        };
        constraint_dims.push([rows, cols]);
    }
    Ok(Prepared { label, plan, constraint_dims })
}

fn accumulate(scenario: &Scenario, plans: &[&FilterPlan]) -> Result<Vec<Accumulator>> {
    if scenario.trials == 0 {
        return Err(Error::Scenario { path: "experiment.trials".into(), message: "must be at least 1".into() });
    }
    let model = &scenario.model;
    let horizon = model.horizon();
    let sim = Simulator::new(model)?;
    let chunks = scenario.trials.div_ceil(CHUNK);
    let partials: Vec<Result<Vec<Accumulator>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut accs = vec![Accumulator::new(model, horizon); plans.len()];
            for t in c * CHUNK..((c + 1) * CHUNK).min(scenario.trials) {
                let traj = scenario.simulate(&sim, t)?;
                for (acc, plan) in accs.iter_mut().zip(plans) {
                    acc.add_trial(&plan.apply(model, &traj.measurements), &traj.states);
                }
            }
            Ok(accs)
        })
        .collect();
    let mut total = vec![Accumulator::new(model, horizon); plans.len()];
    for part in partials {
        for (t, p) in total.iter_mut().zip(&part?) {
            t.merge(p);
        }
    }
    Ok(total)
}

fn summarize(scenario: &Scenario, prepared: &Prepared, acc: &Accumulator, elapsed: Duration) -> RunReport {
    let n = scenario.trials as f64;
    let steps = (0..prepared.plan.horizon())
        .map(|i| {
            let p = &prepared.plan.covariances[i];
            let bias = &acc.sum[i] / n;
            let second = &acc.outer[i] / n;
            let bound: Vec<f64> = p.diagonal().iter().map(|v| 4.0 * (v.max(0.0) / n).sqrt()).collect();
            StepStats {
                step: i + 1,
                theoretical_covariance: rows(p),
                empirical_covariance: rows(&second),
                bias_within_bound: bias.iter().zip(&bound).all(|(b, lim)| b.abs() <= *lim),
                empirical_bias: bias.iter().copied().collect(),
                bias_bound: bound,
                theo_mse_trace: p.trace(),
                est_mse_trace: second.trace(),
                bias_norm: bias.norm(),
                constraint_residual: prepared.plan.constraint_residuals[i],
                constraint_tolerance: prepared.plan.constraint_tolerances[i],
            }
        })
        .collect();
    RunReport {
        scenario: scenario.name.clone(),
        filter: prepared.label.clone(),
        modes: prepared.plan.modes.clone(),
        trials: scenario.trials,
        base_seed: scenario.seed,
        horizon: prepared.plan.horizon(),
        constraint_dims: prepared.constraint_dims.clone(),
        steps,
        elapsed,
    }
}

/// Monte Carlo run of the scenario's configured filter. Trial `t` uses seed `seed + t`.
pub fn run_trials(scenario: &Scenario) -> Result<RunReport> {
    let started = Instant::now();
    let prepared = prepare(scenario, scenario.filter, scenario.filter.name().to_string())?;
    let acc = accumulate(scenario, &[&prepared.plan])?;
    Ok(summarize(scenario, &prepared, &acc[0], started.elapsed()))
}

#[derive(Debug, Clone, Serialize)]
pub struct PairOrdering {
    pub first: String,
    pub second: String,
    /// `trace P(first) ≤ trace P(second)` at every step.
    pub theoretical_trace_leq: bool,
    /// Smallest eigenvalue of `P(second) − P(first)` over all steps.
    pub min_eigen_gap: f64,
    /// Steps at which the empirical MSE trace of `first` is at most that of `second`.
    pub empirical_leq_steps: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub scenario: String,
    pub trials: usize,
    pub base_seed: u64,
    /// Filters in canonical order.
    pub filters: Vec<RunReport>,
    pub orderings: Vec<PairOrdering>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ComparisonReport {
    /// Summary columns of the first filter (canonical order) plus one theoretical trace column
    /// per filter.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> =
            ["step", "est_mse_trace", "theo_mse_trace", "bias_norm", "constraint_residual"].map(String::from).to_vec();
        header.extend(self.filters.iter().map(|f| format!("trace_{}", f.filter)));
        w.write_record(&header)?;
        let first = &self.filters[0];
        for (i, s) in first.steps.iter().enumerate() {
            let mut rec = vec![
                s.step.to_string(),
                s.est_mse_trace.to_string(),
                s.theo_mse_trace.to_string(),
                s.bias_norm.to_string(),
                s.constraint_residual.to_string(),
            ];
            rec.extend(self.filters.iter().map(|f| f.steps[i].theo_mse_trace.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn filter(&self, label: &str) -> Option<&RunReport> {
        self.filters.iter().find(|f| f.filter == label)
    }
}

/// Paired comparison: every filter sees the same trajectories. The list is put in canonical
/// order first, so the report does not depend on the order given; repeats are labelled `kf#2`.
pub fn compare_filters(scenario: &Scenario, filters: &[FilterKind]) -> Result<ComparisonReport> {
    if filters.is_empty() {
        return Err(Error::Scenario { path: "filters".into(), message: "at least one filter is required".into() });
    }
    let started = Instant::now();
    let mut kinds = filters.to_vec();
    kinds.sort();
    let mut prepared = Vec::with_capacity(kinds.len());
    for (i, kind) in kinds.iter().enumerate() {
        let repeat = kinds[..i].iter().filter(|k| *k == kind).count();
        let label = if repeat == 0 { kind.name().to_string() } else { format!("{}#{}", kind.name(), repeat + 1) };
        prepared.push(prepare(scenario, *kind, label)?);
    }
    let plans: Vec<&FilterPlan> = prepared.iter().map(|p| &p.plan).collect();
    let accs = accumulate(scenario, &plans)?;
    let elapsed = started.elapsed();
    let reports: Vec<RunReport> =
        prepared.iter().zip(&accs).map(|(p, a)| summarize(scenario, p, a, elapsed)).collect();

    let mut orderings = Vec::new();
    for i in 0..reports.len() {
        for j in i + 1..reports.len() {
            let (a, b) = (&prepared[i].plan, &prepared[j].plan);
            let min_eigen_gap = a
                .covariances
                .iter()
                .zip(&b.covariances)
                .map(|(pa, pb)| linalg::min_eigenvalue(&(pb - pa)))
                .fold(f64::INFINITY, f64::min);
            orderings.push(PairOrdering {
                first: reports[i].filter.clone(),
                second: reports[j].filter.clone(),
                theoretical_trace_leq: a.covariances.iter().zip(&b.covariances).all(|(pa, pb)| pa.trace() <= pb.trace() + 1e-12 * pb.trace().abs()),
                min_eigen_gap,
                empirical_leq_steps: reports[i]
                    .steps
                    .iter()
                    .zip(&reports[j].steps)
                    .filter(|(sa, sb)| sa.est_mse_trace <= sb.est_mse_trace)
                    .count(),
            });
        }
    }
    Ok(ComparisonReport {
        scenario: scenario.name.clone(),
        trials: scenario.trials,
        base_seed: scenario.seed,
        filters: reports,
        orderings,
        elapsed,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DistortionlessReport {
    pub filter: String,
    pub trials: usize,
    /// Largest `‖e_a − e_b‖_∞` over trials and steps.
    pub max_difference: f64,
    pub passed: bool,
}

/// Runs paired trials that differ only in `x_1` and checks that the error trajectories agree to
/// `1e-9`.
pub fn distortionless_check(scenario: &Scenario, x1_a: &Vector, x1_b: &Vector) -> Result<DistortionlessReport> {
    let prepared = prepare(scenario, scenario.filter, scenario.filter.name().to_string())?;
    let model = &scenario.model;
    let sim = Simulator::new(model)?;
    let errors = |x1: &Vector, t: usize| -> Result<Vec<Vector>> {
        let traj = sim.with_initial_state(x1, scenario.seed.wrapping_add(t as u64))?;
        let est = prepared.plan.apply(model, &traj.measurements);
        Ok(traj.states.iter().zip(&est).map(|(x, xh)| x - xh).collect())
    };
    let diffs: Vec<Result<f64>> = (0..scenario.trials)
        .into_par_iter()
        .map(|t| {
            let (ea, eb) = (errors(x1_a, t)?, errors(x1_b, t)?);
            Ok(ea.iter().zip(&eb).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max))
        })
        .collect();
    let mut max_difference: f64 = 0.0;
    for d in diffs {
        max_difference = max_difference.max(d?);
    }
    Ok(DistortionlessReport {
        filter: prepared.label,
        trials: scenario.trials,
        max_difference,
        passed: max_difference <= 1e-9,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationRow {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ScenarioValidation {
    pub rows: Vec<ValidationRow>,
}

impl ScenarioValidation {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.status != CheckStatus::Fail)
    }

    pub fn row(&self, name: &str) -> Option<&ValidationRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    fn push(&mut self, name: &str, status: CheckStatus, detail: impl Into<String>) {
        self.rows.push(ValidationRow { name: name.into(), status, detail: detail.into() });
    }
}

/// Steps checked by the recursion-versus-batch comparison.
pub const VALIDATION_STEPS: usize = 6;
pub const VALIDATION_TOLERANCE: f64 = 1e-8;

/// Model checks, the uncorrelation conditions of the recursion, declared cross-covariances, and
/// recursion-versus-batch agreement for the first few steps.
pub fn validate_scenario(scenario: &Scenario) -> Result<ScenarioValidation> {
    let mut out = ScenarioValidation::default();
    let model = &scenario.model;
    let report = model::validate_model(model);
    for c in &report.checks {
        let status = if c.passed { CheckStatus::Pass } else { CheckStatus::Fail };
        out.push(&format!("model:{}", c.name), status, c.detail.clone());
    }
    if !report.passed() {
        return Ok(out);
    }

    let conditions = batch::uncorrelation_conditions(model)?;
    let failing: Vec<String> = conditions
        .iter()
        .filter(|c| !c.passed())
        .map(|c| format!("k={}: |C(w,ȳ)|={:.2e} |C(v,ȳ)|={:.2e}", c.k, c.state_noise, c.measurement_noise))
        .collect();
    let conditions_ok = failing.is_empty();
    if conditions_ok {
        out.push("uncorrelation_conditions", CheckStatus::Pass, format!("{} steps", conditions.len()));
    } else {
        out.push("uncorrelation_conditions", CheckStatus::Fail, failing.join("; "));
    }

    let mismatch = batch::cross_covariance_mismatch(model)?;
    let scale = 1.0 + batch::build_stacked(model, 1)?.cy_bar.norm();
    let bad: Vec<String> =
        mismatch.iter().filter(|(_, d)| *d > 1e-10 * scale).map(|(n, d)| format!("{n} off by {d:.2e}")).collect();
    if bad.is_empty() {
        out.push("declared_cross_covariances", CheckStatus::Pass, "ok");
    } else {
        out.push("declared_cross_covariances", CheckStatus::Fail, bad.join("; "));
    }

    if !conditions_ok {
        out.push(
            "recursion_vs_batch",
            CheckStatus::Skipped,
            "skipped: the uncorrelation conditions do not hold, so the recursion is not expected to match",
        );
        return Ok(out);
    }
    match recursion_vs_batch(scenario, VALIDATION_STEPS.min(model.horizon())) {
        Ok(worst) if worst <= VALIDATION_TOLERANCE => out.push(
            "recursion_vs_batch",
            CheckStatus::Pass,
            format!("max relative difference {worst:.2e} (tolerance {VALIDATION_TOLERANCE:.0e})"),
        ),
        Ok(worst) => out.push(
            "recursion_vs_batch",
            CheckStatus::Fail,
            format!("max relative difference {worst:.2e} exceeds {VALIDATION_TOLERANCE:.0e}"),
        ),
        Err(e) => out.push("recursion_vs_batch", CheckStatus::Fail, e.to_string()),
    }
    Ok(out)
}

/// Largest relative difference between the recursion and the batch solution (estimate and
/// covariance) over steps `1..=steps` on one simulated trajectory.
pub fn recursion_vs_batch(scenario: &Scenario, steps: usize) -> Result<f64> {
    let (start, schedule) = scenario.configuration(scenario.filter)?;
    let model = scenario.model.truncated(steps);
    let traj = scenario.simulate(&Simulator::new(&model)?, 0)?;
    let states = filter::run_filter(&model, &start, &schedule, &traj.measurements)?;
    let effective = filter::effective_schedule(&model, &start, &schedule);
    let oracle_model = match &start {
        Start::Rwlse { sigma, c } => LdssModel { x0_mean: c.clone(), cx0: sigma.clone(), ..model.clone() },
        _ => model.clone(),
    };
    let opts = OracleOptions::default();
    let mut worst: f64 = 0.0;
    for k in 1..=steps {
        let stacked = batch::build_stacked(&oracle_model, k)?;
        let c = constraints::compile_schedule(&effective, &oracle_model, k)?;
        let y_bar = linalg::stack_vectors(&traj.measurements[..k]);
        let (x_batch, p_batch) = match start {
            Start::Fisher => {
                let sol = batch::batch_lcllmse(&stacked.c_gw, &stacked.c_gw_n, &stacked.cn_bar, &c.lambda, &c.gamma, &opts)?;
                (sol.w.transpose() * &y_bar, sol.p)
            }
            _ => {
                let sol = batch::batch_lcllmse(&stacked.cx, &stacked.cxy, &stacked.cy_bar, &c.lambda, &c.gamma, &opts)?;
                (stacked.estimate(&sol, &y_bar), sol.p)
            }
        };
        let s = &states[k - 1];
        let xa = Mat::from_column_slice(s.x_hat.len(), 1, s.x_hat.as_slice());
        let xb = Mat::from_column_slice(x_batch.len(), 1, x_batch.as_slice());
        worst = worst.max(linalg::relative_difference(&xa, &xb)).max(linalg::relative_difference(&s.p, &p_batch));
    }
    Ok(worst)
}

/// Writes `report.json` and `steps.csv` into `dir`, creating it if needed.
pub fn write_outputs<T: Serialize>(dir: &Path, report: &T, csv: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    std::fs::write(dir.join("report.json"), json)?;
    let mut buf = Vec::new();
    csv(&mut buf)?;
    std::fs::write(dir.join("steps.csv"), buf)?;
    Ok(())
}
