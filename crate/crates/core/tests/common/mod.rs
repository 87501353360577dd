//! Random model and schedule generators shared by the integration tests.
#![allow(dead_code)]

use lckf_core::batch::{self, OracleOptions};
use lckf_core::constraints::ConstraintSchedule;
use lckf_core::model::LdssModel;
use lckf_core::{Mat, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random SPD matrix `s·(A Aᵀ/n) + floor·I`.
pub fn spd(rng: &mut ChaCha8Rng, n: usize, scale: f64, floor: f64) -> Mat {
    let a = gaussian(rng, n, n);
    &a * a.transpose() * (scale / n as f64) + Mat::identity(n, n) * floor
}

#[derive(Debug, Clone, Copy)]
pub struct ModelShape {
    pub p: usize,
    pub n: usize,
    pub horizon: usize,
    /// Correlate `v_k` with `w_{k-1}` (and `v_1` with `x_1`).
    pub correlated: bool,
    /// Draw different matrices at every step.
    pub time_varying: bool,
}

/// Random model with standard noise structure: white state and measurement noise, with
/// optional correlation between `v_k` and `w_{k-1}`. Each correlated pair is drawn from one
/// random SPD block, so the joint covariance is PSD by construction.
pub fn random_standard_model(rng: &mut ChaCha8Rng, shape: ModelShape) -> LdssModel {
    let ModelShape { p, n, horizon, correlated, time_varying } = shape;
    let draw_f = |rng: &mut ChaCha8Rng| Mat::identity(p, p) * 0.8 + gaussian(rng, p, p) * 0.3;
    let draw_h = |rng: &mut ChaCha8Rng| gaussian(rng, n, p) + Mat::identity(n, p);
    let f0 = draw_f(rng);
    let h0 = draw_h(rng);
    let mut f = Vec::new();
    let mut h = Vec::new();
    for k in 1..=horizon {
        h.push(if time_varying { draw_h(rng) } else { h0.clone() });
        if k < horizon {
            f.push(if time_varying { draw_f(rng) } else { f0.clone() });
        }
    }
    // Pair 0 is (x_1, v_1); pair k-1 is (w_{k-1}, v_k).
    let mut cw = Vec::new();
    let mut cv = Vec::new();
    let mut cvx = Vec::new();
    let mut cx0 = Mat::zeros(p, p);
    for k in 1..=horizon {
        let (state_scale, state_floor) = if k == 1 { (1.0_f64, 0.3) } else { (0.2, 0.02) };
        let joint = if correlated {
            // D (A Aᵀ / dim) D + blockdiag(floors) is PSD and couples the two parts.
            let a = gaussian(rng, p + n, p + n);
            let d = Mat::from_diagonal(&Vector::from_fn(p + n, |i, _| if i < p { state_scale.sqrt() } else { 0.7 }));
            let mut j = &d * &a * a.transpose() * &d / (p + n) as f64;
            for i in 0..p + n {
                j[(i, i)] += if i < p { state_floor } else { 0.3 };
            }
            j
        } else {
            let mut j = Mat::zeros(p + n, p + n);
            j.view_mut((0, 0), (p, p)).copy_from(&spd(rng, p, state_scale, state_floor));
            j.view_mut((p, p), (n, n)).copy_from(&spd(rng, n, 0.5, 0.3));
            j
        };
        let ss = j_block(&joint, 0, 0, p, p);
        let vv = j_block(&joint, p, p, n, n);
        let vs = j_block(&joint, p, 0, n, p);
        if k == 1 {
            cx0 = ss;
        } else {
            cw.push(ss);
        }
        cv.push(vv);
        cvx.push(vs);
    }
    LdssModel {
        f,
        h,
        cw,
        cv,
        cwx: None,
        cvx: if correlated { Some(cvx) } else { None },
        extra_cross: Vec::new(),
        x0_mean: gaussian_vec(rng, p),
        cx0,
    }
}

fn j_block(m: &Mat, r: usize, c: usize, nr: usize, nc: usize) -> Mat {
    m.view((r, c), (nr, nc)).into_owned()
}

/// Largest condition number of `C_ȳ` over the horizon.
pub fn stacked_condition(model: &LdssModel) -> f64 {
    let s = batch::build_stacked(model, model.horizon()).unwrap();
    let eig = lckf_core::linalg::symmetric_eigenvalues(&s.cy_bar);
    eig.last().unwrap() / eig.first().unwrap()
}

/// Draws models until one is jointly PSD and has `cond(C_ȳ) < limit`.
pub fn well_conditioned_model(rng: &mut ChaCha8Rng, shape: ModelShape, limit: f64) -> LdssModel {
    loop {
        let m = random_standard_model(rng, shape);
        if lckf_core::model::validate_model(&m).passed() && stacked_condition(&m) < limit {
            return m;
        }
    }
}

/// Random shape with `P ≤ 3`, `P ≤ N ≤ 4`.
pub fn random_shape(rng: &mut ChaCha8Rng, max_horizon: usize, min_n: usize) -> ModelShape {
    let p = rng.random_range(1..=3);
    let n = rng.random_range(p.max(min_n)..=4);
    ModelShape {
        p,
        n,
        horizon: rng.random_range(1..=max_horizon),
        correlated: rng.random_bool(0.5),
        time_varying: rng.random_bool(0.5),
    }
}

/// Random constraint schedule: each step introduces a block with probability `prob`, with
/// `1 ≤ M < N` columns and a random target. Families follow from the sequence (C², then C¹, with
/// C³ gaps).
pub fn random_schedule(rng: &mut ChaCha8Rng, model: &LdssModel, prob: f64) -> ConstraintSchedule {
    let blocks = (1..=model.horizon())
        .map(|k| {
            let (n, p) = (model.meas_dim(k), model.state_dim(k));
            if n < 2 || !rng.random_bool(prob) {
                return None;
            }
            let m = rng.random_range(1..n);
            let target = if rng.random_bool(0.3) { Mat::zeros(p, m) } else { gaussian(rng, p, m) };
            Some((gaussian(rng, n, m), target))
        })
        .collect();
    ConstraintSchedule::from_blocks(blocks)
}

pub fn as_column(v: &Vector) -> Mat {
    Mat::from_column_slice(v.len(), 1, v.as_slice())
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`.
pub fn rel(a: &Mat, b: &Mat) -> f64 {
    lckf_core::linalg::relative_difference(a, b)
}

pub fn rel_vec(a: &Vector, b: &Vector) -> f64 {
    rel(&as_column(a), &as_column(b))
}

pub fn oracle() -> OracleOptions {
    OracleOptions::default()
}

/// Static deterministic-regime model: `F = I`, `w ≡ 0`, white measurement noise.
pub fn random_static_model(rng: &mut ChaCha8Rng, p: usize, n: usize, horizon: usize) -> LdssModel {
    let h: Vec<Mat> = (0..horizon).map(|_| gaussian(rng, n, p) + Mat::identity(n, p)).collect();
    let cv: Vec<Mat> = (0..horizon).map(|_| spd(rng, n, 0.5, 0.3)).collect();
    LdssModel {
        f: vec![Mat::identity(p, p); horizon - 1],
        h,
        cw: vec![Mat::zeros(p, p); horizon - 1],
        cv,
        cwx: None,
        cvx: None,
        extra_cross: Vec::new(),
        x0_mean: Vector::zeros(p),
        cx0: Mat::identity(p, p),
    }
}

/// Weighted normal equations `(Σ H_lᵀC_l⁻¹H_l + R) x = Σ H_lᵀC_l⁻¹y_l + r` solved by LU.
pub fn weighted_normal_equations(model: &LdssModel, ys: &[Vector], prior: Option<(&Mat, &Vector)>) -> Vector {
    let p = model.state_dim(1);
    let mut lhs = Mat::zeros(p, p);
    let mut rhs = Vector::zeros(p);
    for (k, y) in ys.iter().enumerate() {
        let h = model.h_at(k + 1);
        let ci = model.cv_at(k + 1).clone().try_inverse().unwrap();
        lhs += h.transpose() * &ci * h;
        rhs += h.transpose() * &ci * y;
    }
    if let Some((sigma, c)) = prior {
        let si = sigma.clone().try_inverse().unwrap();
        lhs += &si;
        rhs += &si * c;
    }
    lhs.lu().solve(&rhs).unwrap()
}
