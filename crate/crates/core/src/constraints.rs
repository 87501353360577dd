//! Per-step gain constraints `W_kᵀΔ_k = T_k`, their stacked equivalent `W̄_kᵀΛ_k = Γ_k`, and
//! builders for robustness constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::model::LdssModel;

/// How a step relates to the constraints in force before it.
///
/// `C1` propagates the previous constraint and adds `(Δ_k, T_k)`; `C2` introduces `(Δ_k, T_k)`
/// when nothing is in force; `C3` only propagates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    None,
    C1,
    C2,
    C3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepConstraint {
    pub family: Family,
    pub delta: Option<Mat>,
    pub target: Option<Mat>,
}

impl StepConstraint {
    pub fn none() -> Self {
        Self { family: Family::None, delta: None, target: None }
    }

    pub fn propagate() -> Self {
        Self { family: Family::C3, delta: None, target: None }
    }

    pub fn new_only(delta: Mat, target: Mat) -> Self {
        Self { family: Family::C2, delta: Some(delta), target: Some(target) }
    }

    pub fn combined(delta: Mat, target: Mat) -> Self {
        Self { family: Family::C1, delta: Some(delta), target: Some(target) }
    }

    /// The same `(Δ, T)` under another family tag.
    pub fn with_family(mut self, family: Family) -> Self {
        self.family = family;
        self
    }

    /// `(Δ_k, T_k)` introduced at this step, if any.
    pub fn new_block(&self) -> Option<(&Mat, &Mat)> {
        match (self.family, &self.delta, &self.target) {
            (Family::C1 | Family::C2, Some(d), Some(t)) if d.ncols() > 0 => Some((d, t)),
            _ => None,
        }
    }

    pub fn columns(&self) -> usize {
        self.new_block().map_or(0, |(d, _)| d.ncols())
    }
}

/// Step constraints indexed from step 1; steps past the end are `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSchedule {
    pub steps: Vec<StepConstraint>,
}

impl ConstraintSchedule {
    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn step(&self, k: usize) -> StepConstraint {
        self.steps.get(k - 1).cloned().unwrap_or_else(StepConstraint::none)
    }

    pub fn set(&mut self, k: usize, c: StepConstraint) {
        if self.steps.len() < k {
            self.steps.resize(k, StepConstraint::none());
        }
        self.steps[k - 1] = c;
    }

    pub fn with_step(mut self, k: usize, c: StepConstraint) -> Self {
        self.set(k, c);
        self
    }

    /// Builds a schedule from optional new `(Δ_k, T_k)` blocks: the first block is tagged C², later
    /// ones C¹, and gaps after the first block propagate (C³).
    pub fn from_blocks(blocks: Vec<Option<(Mat, Mat)>>) -> Self {
        let mut active = false;
        let steps = blocks
            .into_iter()
            .map(|b| match b {
                Some((d, t)) if d.ncols() > 0 => {
                    let family = if active { Family::C1 } else { Family::C2 };
                    active = true;
                    StepConstraint { family, delta: Some(d), target: Some(t) }
                }
                _ if active => StepConstraint::propagate(),
                _ => StepConstraint::none(),
            })
            .collect();
        Self { steps }
    }

    /// The distortionless schedule `W_1ᵀH_1 = I` followed by pure propagation.
    pub fn lmvdrf(model: &LdssModel) -> Self {
        let p1 = model.state_dim(1);
        Self::default().with_step(1, StepConstraint::new_only(model.h_at(1).clone(), Mat::identity(p1, p1)))
    }

    pub fn has_new_blocks(&self) -> bool {
        self.steps.iter().any(|s| s.new_block().is_some())
    }

    /// Normalized family for each of the first `horizon` steps. Unspecified steps after a
    /// constraint has been introduced become C³. C³ or C¹ with nothing in force, and C² while a
    /// constraint is in force, are sequencing errors.
    pub fn resolve(&self, horizon: usize) -> Result<Vec<Family>> {
        let mut active = false;
        let mut out = Vec::with_capacity(horizon);
        for k in 1..=horizon {
            let step = self.step(k);
            if matches!(step.family, Family::C1 | Family::C2) {
                match (&step.delta, &step.target) {
                    (Some(d), Some(t)) if d.ncols() != t.ncols() => {
                        return Err(Error::Schedule(format!(
                            "step {k}: Δ has {} columns but T has {}",
                            d.ncols(),
                            t.ncols()
                        )))
                    }
                    (Some(_), Some(_)) => {}
                    _ => return Err(Error::Schedule(format!("step {k}: {:?} requires both Δ and T", step.family))),
                }
            }
            let has_new = step.new_block().is_some();
            let family = match (step.family, active) {
                (Family::None, false) => Family::None,
                (Family::None | Family::C3, true) => Family::C3,
                (Family::C3, false) => {
                    return Err(Error::Schedule(format!("step {k}: C3 with no constraint in force")))
                }
                (Family::C1, true) => {
                    if has_new {
                        Family::C1
                    } else {
                        Family::C3
                    }
                }
                (Family::C1, false) if k > 1 => {
                    return Err(Error::Schedule(format!("step {k}: C1 with no constraint in force; use C2")))
                }
                (Family::C1 | Family::C2, false) => {
                    if has_new {
                        Family::C2
                    } else {
                        Family::None
                    }
                }
                (Family::C2, true) => {
                    return Err(Error::Schedule(format!(
                        "step {k}: C2 while a constraint is in force; use C1 to add constraints"
                    )))
                }
            };
            active = family != Family::None;
            out.push(family);
        }
        Ok(out)
    }
}

/// `W̄_kᵀ Λ_k = Γ_k` over the stacked measurements `ȳ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedConstraint {
    pub lambda: Mat,
    pub gamma: Mat,
}

fn check_block(model: &LdssModel, k: usize, delta: &Mat, target: &Mat) -> Result<()> {
    let (n, p) = (model.meas_dim(k), model.state_dim(k));
    if delta.nrows() != n || target.shape() != (p, delta.ncols()) {
        return Err(Error::model(format!(
            "step {k}: Δ is {:?} and T is {:?}, expected {n}x· and {p}x{}",
            delta.shape(),
            target.shape(),
            delta.ncols()
        )));
    }
    Ok(())
}

/// Stacked constraint equivalent to applying `schedule` recursively up to step `k`.
pub fn compile_schedule(schedule: &ConstraintSchedule, model: &LdssModel, k: usize) -> Result<StackedConstraint> {
    model.check_step(k)?;
    let families = schedule.resolve(k)?;
    let mut lambda = Mat::zeros(0, 0);
    let mut gamma = Mat::zeros(model.state_dim(1), 0);
    let mut rows = 0;
    for (i, family) in families.iter().enumerate() {
        let l = i + 1;
        let n = model.meas_dim(l);
        let step = schedule.step(l);
        // Propagate the constraint in force into step l.
        let (prop_rows, prop_gamma) = if l == 1 {
            (Mat::zeros(n, gamma.ncols()), gamma.clone())
        } else {
            let f = model.f_at(l - 1);
            let fg = f * &gamma;
            (model.h_at(l) * &fg, fg)
        };
        let new = step.new_block();
        if let Some((d, t)) = new {
            check_block(model, l, d, t)?;
        }
        match family {
            Family::None => {
                lambda = Mat::zeros(rows + n, 0);
                gamma = Mat::zeros(model.state_dim(l), 0);
            }
            Family::C3 => {
                lambda = linalg::vstack(&[&lambda, &prop_rows]);
                gamma = prop_gamma;
            }
            Family::C2 | Family::C1 => {
                let (d, t) = new.expect("resolved new block");
                let old_cols = if *family == Family::C1 { lambda.ncols() } else { 0 };
                let mut next = Mat::zeros(rows + n, old_cols + d.ncols());
                if old_cols > 0 {
                    next.view_mut((0, 0), (rows, old_cols)).copy_from(&lambda);
                    next.view_mut((rows, 0), (n, old_cols)).copy_from(&prop_rows);
                }
                next.view_mut((rows, old_cols), d.shape()).copy_from(d);
                lambda = next;
                gamma = if *family == Family::C1 { linalg::hstack(&[&prop_gamma, t]) } else { t.clone() };
            }
        }
        rows += n;
    }
    if lambda.ncols() > 0 {
        let rank = linalg::column_rank(&lambda);
        if !rank.full_column_rank {
            return Err(Error::Constraint(format!(
                "stacked constraint at step {k} ({}x{}) has rank {}",
                lambda.nrows(),
                lambda.ncols(),
                rank.rank
            )));
        }
    }
    Ok(StackedConstraint { lambda, gamma })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainResidual {
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Constraint tolerance `1e-10 · (1 + ‖T‖_F)`.
pub fn constraint_tolerance(target: &Mat) -> f64 {
    1e-10 * (1.0 + target.norm())
}

/// `‖WᵀΔ − T‖_F` for the new block of `c`; vacuous for steps without one.
pub fn verify_gain_constraint(w: &Mat, c: &StepConstraint) -> GainResidual {
    let Some((d, t)) = c.new_block() else {
        return GainResidual { residual: 0.0, tolerance: 0.0, passed: true };
    };
    let tolerance = constraint_tolerance(t);
    if w.nrows() != d.nrows() || t.shape() != (w.ncols(), d.ncols()) {
        return GainResidual { residual: f64::INFINITY, tolerance, passed: false };
    }
    let residual = (w.transpose() * d - t).norm();
    GainResidual { residual, tolerance, passed: residual <= tolerance }
}

fn drop_zero_columns(m: &Mat) -> Mat {
    let scale = m.norm();
    let keep: Vec<usize> = (0..m.ncols()).filter(|&j| m.column(j).norm() > 1e-14 * scale && scale > 0.0).collect();
    Mat::from_fn(m.nrows(), keep.len(), |i, j| m[(i, keep[j])])
}

/// Nulls first-order calibration error: `Wᵀ[∂H/∂θ_i ⋯, Ĥ ∂F/∂ω_j ⋯] = 0`.
///
/// `dh[i]` is `∂H_k/∂θ_i` (N×P) and `df[j]` is `∂F_{k-1}/∂ω_j`; their columns are the
/// derivatives of the individual columns of `H_k` and `F_{k-1}`. Identically zero columns are
/// dropped; if nothing remains the step is unconstrained. `step` is only used in errors.
pub fn jacobian_constraints(h_hat: &Mat, dh: &[Mat], df: &[Mat], step: usize) -> Result<StepConstraint> {
    let (n, p) = h_hat.shape();
    let mut blocks: Vec<Mat> = Vec::new();
    for (i, d) in dh.iter().enumerate() {
        if d.nrows() != n {
            return Err(Error::model(format!("∂H/∂θ_{i} has {} rows, expected {n}", d.nrows())));
        }
        blocks.push(d.clone());
    }
    for (j, d) in df.iter().enumerate() {
        if d.nrows() != p {
            return Err(Error::model(format!("∂F/∂ω_{j} has {} rows, expected {p}", d.nrows())));
        }
        blocks.push(h_hat * d);
    }
    if blocks.is_empty() {
        return Ok(StepConstraint::none());
    }
    let delta = drop_zero_columns(&linalg::hstack(&blocks.iter().collect::<Vec<_>>()));
    if delta.ncols() == 0 {
        return Ok(StepConstraint::none());
    }
    let rank = linalg::column_rank(&delta);
    if delta.ncols() >= n || !rank.full_column_rank {
        return Err(Error::DegreesOfFreedom { step, columns: rank.rank.max(delta.ncols()), available: n });
    }
    let m = delta.ncols();
    Ok(StepConstraint::new_only(delta, Mat::zeros(p, m)))
}

/// Central-difference derivatives of a matrix-valued function, one matrix per parameter, with
/// step `1e-6 · (1 + |θ_i|)`.
pub fn numeric_jacobian(f: impl Fn(&[f64]) -> Mat, params: &[f64]) -> Vec<Mat> {
    let mut theta = params.to_vec();
    (0..params.len())
        .map(|i| {
            let h = 1e-6 * (1.0 + params[i].abs());
            theta[i] = params[i] + h;
            let plus = f(&theta);
            theta[i] = params[i] - h;
            let minus = f(&theta);
            theta[i] = params[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Nulls structured uncertainty `ΔF = A₁BC`, `ΔH = A₂BC`: `Wᵀ[A₂, H A₁] = 0`.
pub fn structured_uncertainty_constraints(a1: &Mat, a2: &Mat, h: &Mat) -> Result<StepConstraint> {
    let (n, p) = h.shape();
    if a2.nrows() != n || a1.nrows() != p {
        return Err(Error::model(format!(
            "A1 is {:?} and A2 is {:?}, incompatible with H of shape {:?}",
            a1.shape(),
            a2.shape(),
            h.shape()
        )));
    }
    let ha1 = h * a1;
    let delta = drop_zero_columns(&linalg::hstack(&[a2, &ha1]));
    if delta.ncols() == 0 {
        return Ok(StepConstraint::none());
    }
    let rank = linalg::column_rank(&delta);
    if n <= rank.rank {
        return Err(Error::NoNontrivialSolution { rank: rank.rank, rows: n });
    }
    if !rank.full_column_rank {
        return Err(Error::Constraint(format!(
            "[A2, H A1] has {} columns but rank {}",
            delta.ncols(),
            rank.rank
        )));
    }
    let m = delta.ncols();
    Ok(StepConstraint::new_only(delta, Mat::zeros(p, m)))
}

/// Widens the step-1 constraint to `W_1ᵀ[Δ_1, H_1] = [T_1, I]` so the filter becomes distortionless.
/// Later steps keep their new blocks (as C¹) and otherwise propagate.
pub fn lckf_to_lclmvdrf(schedule: &ConstraintSchedule, model: &LdssModel) -> Result<ConstraintSchedule> {
    let h1 = model.h_at(1);
    let (n1, p1) = h1.shape();
    let first = schedule.step(1);
    let (delta, target) = match first.new_block() {
        Some((d, t)) => {
            check_block(model, 1, d, t)?;
            (linalg::hstack(&[d, h1]), linalg::hstack(&[t, &Mat::identity(p1, p1)]))
        }
        None => (h1.clone(), Mat::identity(p1, p1)),
    };
    let rank = linalg::column_rank(&delta);
    if delta.ncols() > n1 || !rank.full_column_rank {
        return Err(Error::DegreesOfFreedom { step: 1, columns: delta.ncols(), available: n1 });
    }
    let mut out = ConstraintSchedule::default().with_step(1, StepConstraint::new_only(delta, target));
    for k in 2..=schedule.steps.len().max(1) {
        let s = schedule.step(k);
        let next = match s.new_block() {
            Some(_) => s.with_family(Family::C1),
            None => StepConstraint::propagate(),
        };
        out.set(k, next);
    }
    Ok(out)
}
