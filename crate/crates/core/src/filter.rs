//! Predictor/corrector recursions: Kalman filter with cross-covariance terms, distortionless
//! (Fisher-initialized) filters, the linearly constrained corrector, and the static-state
//! estimators.

use serde::{Deserialize, Serialize};

use crate::constraints::{self, ConstraintSchedule, Family};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SpdSolver, Vector};
use crate::model::LdssModel;

/// Condition guard applied to every innovation covariance and Fisher information matrix.
pub const FILTER_KAPPA_MAX: f64 = 1e12;

/// Guard for the constraint Gram matrix `ΔᵀS⁻¹Δ`; only a failed factorization trips it.
const GRAM_KAPPA_MAX: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterMode {
    Kf,
    Lmvdrf,
    Lckf,
    Lcmve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub k: usize,
    pub x_hat: Vector,
    pub p: Mat,
    /// State-former of the last correction (the estimate update is `Wᵀ ε`).
    pub w_last: Option<Mat>,
    pub mode: FilterMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedState {
    pub k: usize,
    pub x_pred: Vector,
    pub p_pred: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Innovation {
    pub eps: Vector,
    pub s: Mat,
}

/// State at `k = 0`: the prior of `x_1`.
pub fn init_prior(model: &LdssModel) -> FilterState {
    FilterState { k: 0, x_hat: model.x0_mean.clone(), p: model.cx0.clone(), w_last: None, mode: FilterMode::Kf }
}

/// Weighted least-squares start treating `x_1` as deterministic.
pub fn init_fisher(model: &LdssModel, y1: &Vector) -> Result<FilterState> {
    let h = model.h_at(1);
    let rank = linalg::column_rank(h);
    if !rank.full_column_rank {
        return Err(Error::Initialization(format!("H_1 has rank {} < {}", rank.rank, h.ncols())));
    }
    let p1 = model.state_dim(1);
    let mut state = init_constrained_fisher(model, y1, h, &Mat::identity(p1, p1))?;
    state.mode = FilterMode::Lmvdrf;
    Ok(state)
}

/// Minimum-variance start `min W_1ᵀC_{v_1}W_1` subject to `W_1ᵀΛ = Γ`, where `Λ` contains `H_1`
/// (mapped to `I`) so the start is distortionless. Gives `W = C⁻¹Λ(ΛᵀC⁻¹Λ)⁻¹Γᵀ`,
/// `P = Γ(ΛᵀC⁻¹Λ)⁻¹Γᵀ`.
pub fn init_constrained_fisher(model: &LdssModel, y1: &Vector, lambda: &Mat, gamma: &Mat) -> Result<FilterState> {
    let (n, p) = (model.meas_dim(1), model.state_dim(1));
    if y1.len() != n {
        return Err(Error::model(format!("y_1 has dimension {}, expected {n}", y1.len())));
    }
    if lambda.nrows() != n || gamma.shape() != (p, lambda.ncols()) {
        return Err(Error::model(format!(
            "step-1 constraint shapes Λ {:?}, Γ {:?} incompatible with N_1 = {n}, P_1 = {p}",
            lambda.shape(),
            gamma.shape()
        )));
    }
    if lambda.ncols() > n {
        return Err(Error::DegreesOfFreedom { step: 1, columns: lambda.ncols(), available: n });
    }
    let rank = linalg::column_rank(lambda);
    if !rank.full_column_rank {
        return Err(Error::Initialization(format!("step-1 constraint matrix has rank {} < {}", rank.rank, lambda.ncols())));
    }
    let init_err = |e: Error| Error::Initialization(e.to_string());
    let cv = SpdSolver::new(model.cv_at(1), FILTER_KAPPA_MAX, "C_v1").map_err(init_err)?;
    let cv_lambda = cv.solve(lambda);
    let info = lambda.transpose() * &cv_lambda;
    let info = SpdSolver::new(&info, FILTER_KAPPA_MAX, "ΛᵀC_v1⁻¹Λ").map_err(init_err)?;
    let coef = info.solve(&gamma.transpose());
    let w = &cv_lambda * &coef;
    let p_post = linalg::symmetrize(&(gamma * &coef));
    let x_hat = w.transpose() * y1;
    Ok(FilterState { k: 1, x_hat, p: p_post, w_last: Some(w), mode: FilterMode::Lckf })
}

/// `x̂_{k|k-1} = F_{k-1} x̂`, `P_{k|k-1} = F P Fᵀ + C_w + F C_{w,x}ᵀ + C_{w,x} Fᵀ`. At `k = 1` the
/// prior already describes `x_1`, so prediction is the identity.
pub fn predict(state: &FilterState, model: &LdssModel, k: usize) -> Result<PredictedState> {
    model.check_step(k)?;
    if state.k + 1 != k {
        return Err(Error::model(format!("cannot predict step {k} from a state at step {}", state.k)));
    }
    if k == 1 {
        if state.x_hat.len() != model.state_dim(1) || state.p.shape() != (state.x_hat.len(), state.x_hat.len()) {
            return Err(Error::model("initial state does not match the dimension of x_1"));
        }
        return Ok(PredictedState { k, x_pred: state.x_hat.clone(), p_pred: state.p.clone() });
    }
    let f = model.f_at(k - 1);
    if f.ncols() != state.x_hat.len() {
        return Err(Error::model(format!(
            "F_{} has {} columns but the state has dimension {}",
            k - 1,
            f.ncols(),
            state.x_hat.len()
        )));
    }
    let mut p_pred = f * &state.p * f.transpose() + model.cw_at(k - 1);
    if let Some(cwx) = model.cwx_at(k - 1) {
        let cross = f * cwx.transpose();
        p_pred += &cross + cross.transpose();
    }
    Ok(PredictedState { k, x_pred: f * &state.x_hat, p_pred: linalg::symmetrize(&p_pred) })
}

/// `ε = y − H x̂_{k|k-1}`, `S = H P Hᵀ + C_v + H C_{v,x}ᵀ + C_{v,x} Hᵀ`.
pub fn innovation(pred: &PredictedState, model: &LdssModel, y: &Vector) -> Result<Innovation> {
    let k = pred.k;
    model.check_step(k)?;
    let h = model.h_at(k);
    if h.ncols() != pred.x_pred.len() || y.len() != h.nrows() {
        return Err(Error::model(format!(
            "step {k}: H is {:?}, state has dimension {}, measurement {}",
            h.shape(),
            pred.x_pred.len(),
            y.len()
        )));
    }
    let mut s = h * &pred.p_pred * h.transpose() + model.cv_at(k);
    if let Some(cvx) = model.cvx_at(k) {
        let cross = h * cvx.transpose();
        s += &cross + cross.transpose();
    }
    Ok(Innovation { eps: y - h * &pred.x_pred, s: linalg::symmetrize(&s) })
}

struct Correction {
    innovation: Innovation,
    s_solver: SpdSolver,
    /// Unconstrained state-former `S⁻¹(H P_pred + C_{v,x})`.
    w_free: Mat,
    /// `(I − 𝕎ᵀH) P_pred − 𝕎ᵀ C_{v,x}`.
    p_free: Mat,
}

fn correction(pred: &PredictedState, model: &LdssModel, k: usize, y: &Vector) -> Result<Correction> {
    if pred.k != k {
        return Err(Error::model(format!("predicted state is for step {}, not {k}", pred.k)));
    }
    let innovation = innovation(pred, model, y)?;
    let s_solver = SpdSolver::new(&innovation.s, FILTER_KAPPA_MAX, &format!("S_{k}"))?;
    let h = model.h_at(k);
    let mut rhs = h * &pred.p_pred;
    if let Some(cvx) = model.cvx_at(k) {
        rhs += cvx;
    }
    let w_free = s_solver.solve(&rhs);
    let p = pred.p_pred.nrows();
    let mut p_free = (Mat::identity(p, p) - w_free.transpose() * h) * &pred.p_pred;
    if let Some(cvx) = model.cvx_at(k) {
        p_free -= w_free.transpose() * cvx;
    }
    Ok(Correction { innovation, s_solver, w_free, p_free })
}

/// Unconstrained corrector.
pub fn update_kf(pred: &PredictedState, model: &LdssModel, k: usize, y: &Vector) -> Result<FilterState> {
    let c = correction(pred, model, k, y)?;
    let x_hat = &pred.x_pred + c.w_free.transpose() * &c.innovation.eps;
    Ok(FilterState { k, x_hat, p: linalg::symmetrize(&c.p_free), w_last: Some(c.w_free), mode: FilterMode::Kf })
}

/// Error covariance of the corrector `x̂ = x̂_{k|k-1} + Wᵀε` for an arbitrary state-former `W`:
/// `A P Aᵀ + WᵀC_vW − A C_{v,x}ᵀW − WᵀC_{v,x}Aᵀ` with `A = I − WᵀH`.
pub fn joseph_covariance(p_pred: &Mat, h: &Mat, cv: &Mat, cvx: Option<&Mat>, w: &Mat) -> Mat {
    let p = p_pred.nrows();
    let a = Mat::identity(p, p) - w.transpose() * h;
    let mut out = &a * p_pred * a.transpose() + w.transpose() * cv * w;
    if let Some(cvx) = cvx {
        let cross = &a * cvx.transpose() * w;
        out -= &cross + cross.transpose();
    }
    linalg::symmetrize(&out)
}

/// Corrector under `WᵀΔ = T`. Requires `Δ` of full column rank with fewer columns than `N_k`;
/// an empty `Δ` is the unconstrained corrector.
pub fn update_lckf(
    pred: &PredictedState,
    model: &LdssModel,
    k: usize,
    y: &Vector,
    delta: &Mat,
    target: &Mat,
) -> Result<FilterState> {
    if delta.ncols() == 0 {
        return update_kf(pred, model, k, y);
    }
    model.check_step(k)?;
    let (n, p) = (model.meas_dim(k), model.state_dim(k));
    if delta.nrows() != n || target.shape() != (p, delta.ncols()) {
        return Err(Error::model(format!(
            "step {k}: Δ is {:?} and T is {:?}, expected {n}x· and {p}x{}",
            delta.shape(),
            target.shape(),
            delta.ncols()
        )));
    }
    if delta.ncols() >= n {
        return Err(Error::DegreesOfFreedom { step: k, columns: delta.ncols(), available: n });
    }
    let rank = linalg::column_rank(delta);
    if !rank.full_column_rank {
        return Err(Error::Constraint(format!("step {k}: Δ has rank {} < {}", rank.rank, delta.ncols())));
    }
    let c = correction(pred, model, k, y)?;
    let s_delta = c.s_solver.solve(delta);
    let gram = delta.transpose() * &s_delta;
    let gram = SpdSolver::new(&gram, GRAM_KAPPA_MAX, &format!("ΔᵀS⁻¹Δ at step {k}"))?;
    let mismatch = target - c.w_free.transpose() * delta;
    let coef = gram.solve(&mismatch.transpose());
    let w = &c.w_free + &s_delta * &coef;
    let x_hat = &pred.x_pred + w.transpose() * &c.innovation.eps;
    let p_post = joseph_covariance(&pred.p_pred, model.h_at(k), model.cv_at(k), model.cvx_at(k), &w);
    if cfg!(debug_assertions) {
        let closed = &c.p_free + &mismatch * &coef;
        let scale = pred.p_pred.norm() + (w.transpose() * &c.innovation.s * &w).norm();
        debug_assert!(
            (linalg::symmetrize(&closed) - &p_post).norm() <= 1e-8 * scale.max(f64::MIN_POSITIVE),
            "constrained covariance closed form disagrees with direct evaluation at step {k}"
        );
    }
    Ok(FilterState { k, x_hat, p: p_post, w_last: Some(w), mode: FilterMode::Lckf })
}

/// How the recursion is started.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// From the model prior on `x_1`.
    Prior,
    /// Distortionless start at `k = 1` from `y_1` alone. The step-1 constraint of the schedule
    /// is used as the start constraint and must contain `H_1 ↦ I`; an empty step 1 means
    /// `W_1ᵀH_1 = I`.
    Fisher,
    /// Regularized least squares: a fictitious observation `c` of `x_1` with covariance `Σ`.
    Rwlse { sigma: Mat, c: Vector },
}

/// Prior-equivalent state for the regularized start: `x̂_{1|0} = c`, `P_{1|0} = Σ`.
pub fn rwlse_augment(model: &LdssModel, sigma: &Mat, c: &Vector) -> Result<FilterState> {
    let p = model.state_dim(1);
    if sigma.shape() != (p, p) || c.len() != p {
        return Err(Error::model(format!(
            "Σ is {:?} and c has dimension {}, expected {p}x{p} and {p}",
            sigma.shape(),
            c.len()
        )));
    }
    if !linalg::is_symmetric(sigma, 1e-10) {
        return Err(Error::Statistics("Σ is not symmetric".into()));
    }
    SpdSolver::new(sigma, FILTER_KAPPA_MAX, "Σ").map_err(|e| Error::Statistics(e.to_string()))?;
    Ok(FilterState { k: 0, x_hat: c.clone(), p: sigma.clone(), w_last: None, mode: FilterMode::Lcmve })
}

/// The schedule actually applied for `start`. A Fisher start puts a constraint in force from
/// step 1: an empty step 1 gets the plain distortionless constraint, and later C² steps become
/// C¹ steps.
pub fn effective_schedule(model: &LdssModel, start: &Start, schedule: &ConstraintSchedule) -> ConstraintSchedule {
    let Start::Fisher = start else {
        return schedule.clone();
    };
    let mut out = schedule.clone();
    if schedule.step(1).new_block().is_none() {
        out.set(1, ConstraintSchedule::lmvdrf(model).step(1));
    }
    for step in out.steps.iter_mut().skip(1) {
        if step.family == Family::C2 {
            step.family = Family::C1;
        }
    }
    out
}

/// Runs the recursion over `measurements` (steps `1..=len`).
pub fn run_filter(
    model: &LdssModel,
    start: &Start,
    schedule: &ConstraintSchedule,
    measurements: &[Vector],
) -> Result<Vec<FilterState>> {
    let horizon = measurements.len();
    if horizon > model.horizon() {
        return Err(Error::model(format!("{horizon} measurements for a horizon of {}", model.horizon())));
    }
    let sched = effective_schedule(model, start, schedule);
    let families = sched.resolve(horizon)?;
    let plain_distortionless = matches!(start, Start::Fisher) && !schedule.has_new_blocks();

    let mut states: Vec<FilterState> = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let y = &measurements[k - 1];
        let step = sched.step(k);
        let mut state = if k == 1 && matches!(start, Start::Fisher) {
            let (lambda, gamma) = step.new_block().expect("Fisher start has a step-1 constraint");
            let state = init_constrained_fisher(model, y, lambda, gamma)?;
            let w = state.w_last.as_ref().expect("gain");
            let p1 = model.state_dim(1);
            let distortion = (w.transpose() * model.h_at(1) - Mat::identity(p1, p1)).norm();
            if distortion > 1e-8 * (1.0 + w.norm() * model.h_at(1).norm()) {
                return Err(Error::Schedule("a Fisher start needs a step-1 constraint containing H_1 ↦ I".into()));
            }
            state
        } else {
            let prev = match (k, start) {
                (1, Start::Rwlse { sigma, c }) => rwlse_augment(model, sigma, c)?,
                (1, _) => init_prior(model),
                _ => states[k - 2].clone(),
            };
            let pred = predict(&prev, model, k)?;
            match step.new_block() {
                Some((d, t)) if families[k - 1] != Family::C3 => update_lckf(&pred, model, k, y, d, t)?,
                _ => update_kf(&pred, model, k, y)?,
            }
        };
        state.mode = if plain_distortionless {
            FilterMode::Lmvdrf
        } else if families[..k].iter().any(|f| *f != Family::None) {
            FilterMode::Lckf
        } else {
            FilterMode::Kf
        };
        states.push(state);
    }
    Ok(states)
}

/// Fisher start followed by unconstrained corrections.
pub fn run_lmvdrf(model: &LdssModel, measurements: &[Vector]) -> Result<Vec<FilterState>> {
    run_filter(model, &Start::Fisher, &ConstraintSchedule::unconstrained(), measurements)
}

pub fn check_static_regime(model: &LdssModel) -> Result<()> {
    if !model.is_static() {
        return Err(Error::Regime(
            "recursive LCMVE requires a static state (F = I, Cw = 0) and temporally white measurement noise".into(),
        ));
    }
    Ok(())
}

/// Constrained minimum-variance estimation of a static deterministic state. The schedule's
/// step-1 constraint is widened with `H_1 ↦ I` so the estimator is distortionless.
pub fn run_lcmve(model: &LdssModel, measurements: &[Vector], schedule: &ConstraintSchedule) -> Result<Vec<FilterState>> {
    check_static_regime(model)?;
    let widened = constraints::lckf_to_lclmvdrf(schedule, model)?;
    let mut states = run_filter(model, &Start::Fisher, &widened, measurements)?;
    for s in &mut states {
        s.mode = FilterMode::Lcmve;
    }
    Ok(states)
}

/// As [`run_lcmve`] but continuing from a `k = 0` state such as [`rwlse_augment`]; the schedule
/// is applied as given.
pub fn run_lcmve_from(
    model: &LdssModel,
    start: &FilterState,
    measurements: &[Vector],
    schedule: &ConstraintSchedule,
) -> Result<Vec<FilterState>> {
    check_static_regime(model)?;
    if start.k != 0 {
        return Err(Error::model(format!("start state is at step {}, expected 0", start.k)));
    }
    let mut states = run_filter(
        model,
        &Start::Rwlse { sigma: start.p.clone(), c: start.x_hat.clone() },
        schedule,
        measurements,
    )?;
    for s in &mut states {
        s.mode = FilterMode::Lcmve;
    }
    Ok(states)
}

/// Gains and covariances of a run. They do not depend on the data, so one plan serves every
/// Monte Carlo trial.
#[derive(Debug, Clone)]
pub struct FilterPlan {
    /// Estimate of `x_1` before `y_1` (unused weight for a Fisher start, where `W_1ᵀH_1 = I`).
    pub start_mean: Vector,
    pub gains: Vec<Mat>,
    pub covariances: Vec<Mat>,
    pub modes: Vec<FilterMode>,
    /// `‖W_kᵀΔ_k − T_k‖_F` per step (zero where nothing new is imposed).
    pub constraint_residuals: Vec<f64>,
    pub constraint_tolerances: Vec<f64>,
}

impl FilterPlan {
    pub fn build(model: &LdssModel, start: &Start, schedule: &ConstraintSchedule, horizon: usize) -> Result<Self> {
        let zeros: Vec<Vector> = (1..=horizon).map(|k| Vector::zeros(model.meas_dim(k))).collect();
        let states = run_filter(model, start, schedule, &zeros)?;
        let sched = effective_schedule(model, start, schedule);
        let start_mean = match start {
            Start::Prior => model.x0_mean.clone(),
            Start::Rwlse { c, .. } => c.clone(),
            Start::Fisher => Vector::zeros(model.state_dim(1)),
        };
        let mut plan = FilterPlan {
            start_mean,
            gains: Vec::with_capacity(horizon),
            covariances: Vec::with_capacity(horizon),
            modes: Vec::with_capacity(horizon),
            constraint_residuals: Vec::with_capacity(horizon),
            constraint_tolerances: Vec::with_capacity(horizon),
        };
        for s in states {
            let w = s.w_last.expect("every step has a gain");
            let check = constraints::verify_gain_constraint(&w, &sched.step(s.k));
            plan.constraint_residuals.push(check.residual);
            plan.constraint_tolerances.push(check.tolerance);
            plan.gains.push(w);
            plan.covariances.push(s.p);
            plan.modes.push(s.mode);
        }
        Ok(plan)
    }

    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    /// Estimates `x̂_{k|k}` for one measurement sequence.
    pub fn apply(&self, model: &LdssModel, measurements: &[Vector]) -> Vec<Vector> {
        let mut out: Vec<Vector> = Vec::with_capacity(self.horizon());
        for (i, (w, y)) in self.gains.iter().zip(measurements).enumerate() {
            let k = i + 1;
            let x_pred = if k == 1 { self.start_mean.clone() } else { model.f_at(k - 1) * &out[i - 1] };
            let eps = y - model.h_at(k) * &x_pred;
            out.push(x_pred + w.transpose() * eps);
        }
        out
    }
}
