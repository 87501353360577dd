//! Horizon-stacked observation model and closed-form (non-recursive) estimators.
//!
//! These solves never form explicit inverses; they serve as the reference the recursions are
//! checked against.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SpdSolver, Vector, DEFAULT_KAPPA_MAX};
use crate::model::{JointNoise, LdssModel, NoiseTerm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Largest accepted condition number of `C_y`.
    pub kappa_max: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self { kappa_max: DEFAULT_KAPPA_MAX }
    }
}

/// `ȳ_k = Ā_k x_1 + n̄_k` together with the exact second-order statistics of every term.
#[derive(Debug, Clone)]
pub struct StackedModel {
    pub k: usize,
    /// `Ā_k`, rows `H_l B_{l,1}` for `l = 1..k`.
    pub a_bar: Mat,
    /// `B_{k,1}`.
    pub b_k1: Mat,
    /// `G_k = [B_{k,2} ⋯ B_{k,k}]`, so that `G_k w̄_{k-1} = Σ_l B_{k,l+1} w_l`.
    pub g: Mat,
    pub mean_x: Vector,
    pub mean_y: Vector,
    /// `C_{x_k}`.
    pub cx: Mat,
    /// `C_{ȳ_k}`.
    pub cy_bar: Mat,
    /// `C_{x_k, ȳ_k}`.
    pub cxy: Mat,
    /// `C_{n̄_k}`.
    pub cn_bar: Mat,
    /// Covariance of `G_k w̄_{k-1}`.
    pub c_gw: Mat,
    /// `C_{G_k w̄_{k-1}, n̄_k}`.
    pub c_gw_n: Mat,
    /// `N_1..N_k`.
    pub block_rows: Vec<usize>,
}

impl StackedModel {
    /// Affine LMMSE-type estimate `E[x_k] + Wᵀ(ȳ − E[ȳ])`.
    pub fn estimate(&self, solution: &BatchSolution, y_bar: &Vector) -> Vector {
        &self.mean_x + solution.w.transpose() * (y_bar - &self.mean_y)
    }
}

pub fn build_stacked(model: &LdssModel, k: usize) -> Result<StackedModel> {
    model.check_step(k)?;
    let model = model.truncated(k);
    let joint = JointNoise::new(&model)?;
    let states = joint.state_maps(&model)?;
    let meas = joint.measurement_maps(&model)?;
    let sigma = &joint.cov;

    let psi = linalg::vstack(&meas.iter().collect::<Vec<_>>());
    let phi = &states[k - 1];

    let mut rows = Vec::with_capacity(k);
    for l in 1..=k {
        rows.push(model.h_at(l) * model.transition(l, 1)?);
    }
    let a_bar = linalg::vstack(&rows.iter().collect::<Vec<_>>());
    let b_k1 = model.transition(k, 1)?;
    let g_blocks: Vec<Mat> = (1..k).map(|l| model.transition(k, l + 1)).collect::<Result<_>>()?;
    let g = if g_blocks.is_empty() {
        Mat::zeros(model.state_dim(k), 0)
    } else {
        linalg::hstack(&g_blocks.iter().collect::<Vec<_>>())
    };

    // Noise-only maps: drop the x_1 columns.
    let x1 = joint.range(NoiseTerm::X1)?;
    let mut phi_n = phi.clone();
    phi_n.columns_mut(x1.start, x1.len()).fill(0.0);
    let mut psi_n = psi.clone();
    psi_n.columns_mut(x1.start, x1.len()).fill(0.0);

    let quad = |a: &Mat, b: &Mat| a * sigma * b.transpose();
    Ok(StackedModel {
        k,
        mean_x: phi * &joint.mean,
        mean_y: &psi * &joint.mean,
        cx: linalg::symmetrize(&quad(phi, phi)),
        cy_bar: linalg::symmetrize(&quad(&psi, &psi)),
        cxy: quad(phi, &psi),
        cn_bar: linalg::symmetrize(&quad(&psi_n, &psi_n)),
        c_gw: linalg::symmetrize(&quad(&phi_n, &phi_n)),
        c_gw_n: quad(&phi_n, &psi_n),
        block_rows: (1..=k).map(|l| model.meas_dim(l)).collect(),
        a_bar,
        b_k1,
        g,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSolution {
    /// State-former: the estimate is `Wᵀ y`.
    pub w: Mat,
    /// Error covariance.
    pub p: Mat,
    /// `‖WᵀΛ − T‖_F`; zero for unconstrained solves.
    pub residual: f64,
}

fn check_shapes(cx: &Mat, cxy: &Mat, cy: &Mat) -> Result<()> {
    if !cx.is_square() || !cy.is_square() || cxy.shape() != (cx.nrows(), cy.nrows()) {
        return Err(Error::model(format!(
            "incompatible statistics: C_x {:?}, C_xy {:?}, C_y {:?}",
            cx.shape(),
            cxy.shape(),
            cy.shape()
        )));
    }
    Ok(())
}

/// Unconstrained solve: `W = C_y⁻¹ C_yx`, `P = C_x − C_xy C_y⁻¹ C_yx`.
pub fn batch_llmse(cx: &Mat, cxy: &Mat, cy: &Mat, opts: &OracleOptions) -> Result<BatchSolution> {
    check_shapes(cx, cxy, cy)?;
    let cy_solver = SpdSolver::new(cy, opts.kappa_max, "C_y")?;
    let w = cy_solver.solve(&cxy.transpose());
    let p = linalg::symmetrize(&(cx - cxy * &w));
    Ok(BatchSolution { w, p, residual: 0.0 })
}

/// Solve under `WᵀΛ = T`. An empty `Λ` reduces to [`batch_llmse`].
pub fn batch_lcllmse(
    cx: &Mat,
    cxy: &Mat,
    cy: &Mat,
    lambda: &Mat,
    t: &Mat,
    opts: &OracleOptions,
) -> Result<BatchSolution> {
    if lambda.ncols() == 0 {
        return batch_llmse(cx, cxy, cy, opts);
    }
    check_shapes(cx, cxy, cy)?;
    check_constraint_shapes(lambda, t, cy.nrows(), cx.nrows())?;
    let rank = linalg::column_rank(lambda);
    if !rank.full_column_rank {
        return Err(Error::Constraint(format!(
            "stacked constraint matrix ({}x{}) has rank {}",
            lambda.nrows(),
            lambda.ncols(),
            rank.rank
        )));
    }
    let cy_solver = SpdSolver::new(cy, opts.kappa_max, "C_y")?;
    let w_free = cy_solver.solve(&cxy.transpose());
    let p_free = cx - cxy * &w_free;
    let cy_lambda = cy_solver.solve(lambda);
    let gram = lambda.transpose() * &cy_lambda;
    let gram_solver = SpdSolver::new(&gram, opts.kappa_max * opts.kappa_max, "ΛᵀC_y⁻¹Λ")?;
    let mismatch = t - w_free.transpose() * lambda;
    let correction = gram_solver.solve(&mismatch.transpose());
    let w = &w_free + &cy_lambda * &correction;
    let p = linalg::symmetrize(&(p_free + &mismatch * &correction));
    let residual = (w.transpose() * lambda - t).norm();
    Ok(BatchSolution { w, p, residual })
}

fn check_constraint_shapes(lambda: &Mat, t: &Mat, dim_y: usize, dim_x: usize) -> Result<()> {
    if lambda.nrows() != dim_y || t.shape() != (dim_x, lambda.ncols()) {
        return Err(Error::model(format!(
            "constraint shapes Λ {:?}, T {:?} do not match dim(y) = {dim_y}, dim(x) = {dim_x}",
            lambda.shape(),
            t.shape()
        )));
    }
    Ok(())
}

/// Independent solve of the constrained problem from its Lagrangian stationarity conditions
/// `[2C_y Λ; Λᵀ 0] [W; M] = [2C_yx; Tᵀ]`, with `P` evaluated directly as the quadratic form.
pub fn kkt_reference(cx: &Mat, cxy: &Mat, cy: &Mat, lambda: &Mat, t: &Mat) -> Result<BatchSolution> {
    check_shapes(cx, cxy, cy)?;
    check_constraint_shapes(lambda, t, cy.nrows(), cx.nrows())?;
    let (n, m) = (cy.nrows(), lambda.ncols());
    let mut kkt = Mat::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(cy * 2.0));
    kkt.view_mut((0, n), (n, m)).copy_from(lambda);
    kkt.view_mut((n, 0), (m, n)).copy_from(&lambda.transpose());
    let rhs = linalg::vstack(&[&(cxy.transpose() * 2.0), &t.transpose()]);
    let sol = linalg::lu_solve(&kkt, &rhs, "KKT system")?;
    let w = sol.rows(0, n).into_owned();
    let p = cx - w.transpose() * cxy.transpose() - cxy * &w + w.transpose() * cy * &w;
    let residual = (w.transpose() * lambda - t).norm();
    Ok(BatchSolution { w, p: linalg::symmetrize(&p), residual })
}

/// Distortionless solve at horizon `k`: `W̄ᵀĀ_k = B_{k,1}` on the noise-only statistics, so the
/// estimate is `W̄ᵀȳ_k` and `x_1` is treated as deterministic.
pub fn batch_lmvdr(model: &LdssModel, k: usize, opts: &OracleOptions) -> Result<BatchSolution> {
    let rank = linalg::column_rank(model.h_at(1));
    if !rank.full_column_rank {
        return Err(Error::Initialization(format!("H_1 has rank {} < {}", rank.rank, model.state_dim(1))));
    }
    let s = build_stacked(model, k)?;
    batch_lcllmse(&s.c_gw, &s.c_gw_n, &s.cn_bar, &s.a_bar, &s.b_k1, opts)
}

/// Residuals of the conditions under which the predictor/corrector recursion is the LLMSE:
/// `C_{w_{k-1}, ȳ_{k-1}} = 0` and `C_{v_k, ȳ_{k-1}} = 0` for `k = 2..K`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionResidual {
    pub k: usize,
    pub state_noise: f64,
    pub measurement_noise: f64,
    pub tolerance: f64,
}

impl ConditionResidual {
    pub fn passed(&self) -> bool {
        self.state_noise <= self.tolerance && self.measurement_noise <= self.tolerance
    }
}

pub fn uncorrelation_conditions(model: &LdssModel) -> Result<Vec<ConditionResidual>> {
    let joint = JointNoise::new(model)?;
    let meas = joint.measurement_maps(model)?;
    let sigma = &joint.cov;
    let tolerance = 1e-12 * (1.0 + sigma.norm());
    let mut out = Vec::new();
    for k in 2..=model.horizon() {
        let past = linalg::vstack(&meas[..k - 1].iter().collect::<Vec<_>>());
        let cross = |t: NoiseTerm| -> Result<f64> { Ok((joint.selector(t)? * sigma * past.transpose()).norm()) };
        out.push(ConditionResidual {
            k,
            state_noise: cross(NoiseTerm::W(k - 1))?,
            measurement_noise: cross(NoiseTerm::V(k))?,
            tolerance,
        });
    }
    Ok(out)
}

/// Differences between the declared `C_{w_l,x_l}`, `C_{v_k,x_k}` (zero when absent) and the
/// values implied by the joint statistics. Returns `(label, ‖declared − implied‖_F)`.
pub fn cross_covariance_mismatch(model: &LdssModel) -> Result<Vec<(String, f64)>> {
    let joint = JointNoise::new(model)?;
    let states = joint.state_maps(model)?;
    let sigma = &joint.cov;
    let mut out = Vec::new();
    for k in 1..=model.horizon() {
        let implied = joint.selector(NoiseTerm::V(k))? * sigma * states[k - 1].transpose();
        let declared = model.cvx_at(k).cloned().unwrap_or_else(|| Mat::zeros(implied.nrows(), implied.ncols()));
        out.push((format!("Cvx_{k}"), (declared - implied).norm()));
    }
    for l in 1..model.horizon() {
        let implied = joint.selector(NoiseTerm::W(l))? * sigma * states[l - 1].transpose();
        let declared = model.cwx_at(l).cloned().unwrap_or_else(|| Mat::zeros(implied.nrows(), implied.ncols()));
        out.push((format!("Cwx_{l}"), (declared - implied).norm()));
    }
    Ok(out)
}
