//! Linear discrete state-space models, their joint second-order statistics, and a seeded simulator.
//!
//! Steps are 1-based throughout: `x_k = F_{k-1} x_{k-1} + w_{k-1}`, `y_k = H_k x_k + v_k`,
//! for `k = 1..=K`. The prior `(x0_mean, Cx0)` describes `x_1` directly.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// A primitive random term of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseTerm {
    /// Initial state `x_1`.
    X1,
    /// State noise `w_l`, `l = 1..K-1` (enters `x_{l+1}`).
    W(usize),
    /// Measurement noise `v_k`, `k = 1..K`.
    V(usize),
}

impl std::fmt::Display for NoiseTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseTerm::X1 => write!(f, "x1"),
            NoiseTerm::W(l) => write!(f, "w{l}"),
            NoiseTerm::V(k) => write!(f, "v{k}"),
        }
    }
}

/// Additional cross-covariance `C(left, right)` between two primitive terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovariance {
    pub left: NoiseTerm,
    pub right: NoiseTerm,
    pub cov: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdssModel {
    /// `F_1..F_{K-1}`; `f[i]` maps `x_{i+1}` to `x_{i+2}`.
    pub f: Vec<Mat>,
    /// `H_1..H_K`.
    pub h: Vec<Mat>,
    /// `C_{w_1}..C_{w_{K-1}}`.
    pub cw: Vec<Mat>,
    /// `C_{v_1}..C_{v_K}`.
    pub cv: Vec<Mat>,
    /// `C_{w_l, x_l}` for `l = 1..K-1`, used by the prediction step into `x_{l+1}`.
    pub cwx: Option<Vec<Mat>>,
    /// `C_{v_k, x_k}` for `k = 1..K`.
    pub cvx: Option<Vec<Mat>>,
    pub extra_cross: Vec<CrossCovariance>,
    pub x0_mean: Vector,
    pub cx0: Mat,
}

impl LdssModel {
    /// Broadcasts one set of matrices over `horizon` steps.
    pub fn time_invariant(horizon: usize, f: Mat, h: Mat, cw: Mat, cv: Mat, x0_mean: Vector, cx0: Mat) -> Self {
        let steps = horizon.saturating_sub(1);
        Self {
            f: vec![f; steps],
            h: vec![h; horizon],
            cw: vec![cw; steps],
            cv: vec![cv; horizon],
            cwx: None,
            cvx: None,
            extra_cross: Vec::new(),
            x0_mean,
            cx0,
        }
    }

    pub fn horizon(&self) -> usize {
        self.h.len()
    }

    /// `P_k`, the state dimension at step `k`.
    pub fn state_dim(&self, k: usize) -> usize {
        self.h[k - 1].ncols()
    }

    /// `N_k`, the measurement dimension at step `k`.
    pub fn meas_dim(&self, k: usize) -> usize {
        self.h[k - 1].nrows()
    }

    /// `F_k`.
    pub fn f_at(&self, k: usize) -> &Mat {
        &self.f[k - 1]
    }

    pub fn h_at(&self, k: usize) -> &Mat {
        &self.h[k - 1]
    }

    pub fn cw_at(&self, l: usize) -> &Mat {
        &self.cw[l - 1]
    }

    pub fn cv_at(&self, k: usize) -> &Mat {
        &self.cv[k - 1]
    }

    pub fn cwx_at(&self, l: usize) -> Option<&Mat> {
        self.cwx.as_ref().map(|c| &c[l - 1])
    }

    pub fn cvx_at(&self, k: usize) -> Option<&Mat> {
        self.cvx.as_ref().map(|c| &c[k - 1])
    }

    pub(crate) fn check_step(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.horizon() {
            return Err(Error::model(format!("step {k} outside 1..={}", self.horizon())));
        }
        Ok(())
    }

    /// The same model restricted to the first `k` steps.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.horizon());
        let steps = k.saturating_sub(1);
        let mut out = self.clone();
        out.f.truncate(steps);
        out.h.truncate(k);
        out.cw.truncate(steps);
        out.cv.truncate(k);
        if let Some(c) = out.cwx.as_mut() {
            c.truncate(steps);
        }
        if let Some(c) = out.cvx.as_mut() {
            c.truncate(k);
        }
        out.extra_cross.retain(|c| term_in_horizon(c.left, k) && term_in_horizon(c.right, k));
        out
    }

    /// `B_{k,l}` for this model; sizes come from the measurement matrices, so `k = l` works
    /// even when no transition is defined.
    pub fn transition(&self, k: usize, l: usize) -> Result<Mat> {
        self.check_step(k)?;
        self.check_step(l)?;
        if k == l {
            return Ok(Mat::identity(self.state_dim(k), self.state_dim(k)));
        }
        if k < l {
            return Ok(Mat::zeros(self.state_dim(k), self.state_dim(l)));
        }
        transition_product(&self.f, k, l)
    }

    /// True when the state is static and the noise temporally white: `F = I`, `w ≡ 0`,
    /// and no cross-covariances.
    pub fn is_static(&self) -> bool {
        let zero = |m: &Mat| m.iter().all(|v| *v == 0.0);
        self.f.iter().all(|f| f.is_square() && *f == Mat::identity(f.nrows(), f.ncols()))
            && self.cw.iter().all(zero)
            && self.cwx.as_ref().is_none_or(|c| c.iter().all(zero))
            && self.cvx.as_ref().is_none_or(|c| c.iter().all(zero))
            && self.extra_cross.iter().all(|c| zero(&c.cov))
    }
}

fn term_in_horizon(t: NoiseTerm, k: usize) -> bool {
    match t {
        NoiseTerm::X1 => true,
        NoiseTerm::W(l) => l >= 1 && l < k,
        NoiseTerm::V(j) => j >= 1 && j <= k,
    }
}

/// `B_{k,l} = F_{k-1} ⋯ F_l` for `k > l`, the identity for `k = l`, zero for `k < l`.
///
/// `f[i]` holds `F_{i+1}`. Sizes of `x_j` are read off the sequence, so `k` and `l` must lie
/// in `1..=f.len()+1`.
pub fn transition_product(f: &[Mat], k: usize, l: usize) -> Result<Mat> {
    let dim = |j: usize| -> Result<usize> {
        if j >= 1 && j <= f.len() {
            Ok(f[j - 1].ncols())
        } else if j >= 2 && j == f.len() + 1 {
            Ok(f[j - 2].nrows())
        } else {
            Err(Error::model(format!("state dimension at step {j} is not defined by {} transitions", f.len())))
        }
    };
    let (pk, pl) = (dim(k)?, dim(l)?);
    if k < l {
        return Ok(Mat::zeros(pk, pl));
    }
    let mut acc = Mat::identity(pl, pl);
    for m in l..k {
        let fm = &f[m - 1];
        if fm.ncols() != acc.nrows() {
            return Err(Error::model(format!(
                "F_{m} has {} columns but x_{m} has dimension {}",
                fm.ncols(),
                acc.nrows()
            )));
        }
        acc = fm * acc;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &str, problems: Vec<String>) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            passed: problems.is_empty(),
            detail: if problems.is_empty() { "ok".into() } else { problems.join("; ") },
        });
    }
}

/// Checks sequence lengths, the dimension chain, finiteness, symmetry and PSD-ness of every
/// covariance, and PSD-ness of the joint covariance of all primitive terms.
pub fn validate_model(model: &LdssModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let k = model.horizon();
    let steps = k.saturating_sub(1);

    let mut lengths = Vec::new();
    if k == 0 {
        lengths.push("horizon must be at least 1".to_string());
    }
    let mut expect = |name: &str, got: usize, want: usize| {
        if got != want {
            lengths.push(format!("{name} has {got} entries, expected {want}"));
        }
    };
    expect("F", model.f.len(), steps);
    expect("Cw", model.cw.len(), steps);
    expect("Cv", model.cv.len(), k);
    if let Some(c) = &model.cwx {
        expect("Cwx", c.len(), steps);
    }
    if let Some(c) = &model.cvx {
        expect("Cvx", c.len(), k);
    }
    let lengths_ok = lengths.is_empty();
    report.push("lengths", lengths);
    if !lengths_ok {
        return report;
    }

    let mut dims = Vec::new();
    fn shape(dims: &mut Vec<String>, name: String, m: &Mat, rows: usize, cols: usize) {
        if m.shape() != (rows, cols) {
            dims.push(format!("{name} is {}x{}, expected {rows}x{cols}", m.nrows(), m.ncols()));
        }
    }
    let p1 = model.state_dim(1);
    shape(&mut dims, "x0_mean".into(), &Mat::from_column_slice(model.x0_mean.len(), 1, model.x0_mean.as_slice()), p1, 1);
    shape(&mut dims, "Cx0".into(), &model.cx0, p1, p1);
    for j in 1..=k {
        let (p, n) = (model.state_dim(j), model.meas_dim(j));
        shape(&mut dims, format!("Cv_{j}"), model.cv_at(j), n, n);
        if let Some(c) = model.cvx_at(j) {
            shape(&mut dims, format!("Cvx_{j}"), c, n, p);
        }
        if j < k {
            let pn = model.state_dim(j + 1);
            shape(&mut dims, format!("F_{j}"), model.f_at(j), pn, p);
            shape(&mut dims, format!("Cw_{j}"), model.cw_at(j), pn, pn);
            if let Some(c) = model.cwx_at(j) {
                shape(&mut dims, format!("Cwx_{j}"), c, pn, p);
            }
        }
    }
    for (i, c) in model.extra_cross.iter().enumerate() {
        match (term_dim(model, c.left), term_dim(model, c.right)) {
            (Some(r), Some(cc)) => shape(&mut dims, format!("extra_cross[{i}]"), &c.cov, r, cc),
            _ => dims.push(format!("extra_cross[{i}] refers to a term outside the horizon")),
        }
        if c.left == c.right {
            dims.push(format!("extra_cross[{i}] pairs {} with itself", c.left));
        }
    }
    let dims_ok = dims.is_empty();
    report.push("dimension_chain", dims);
    if !dims_ok {
        return report;
    }

    let mut finite = Vec::new();
    let mut all: Vec<(String, &Mat)> = vec![("Cx0".into(), &model.cx0)];
    if model.x0_mean.iter().any(|v| !v.is_finite()) {
        finite.push("x0_mean".to_string());
    }
    for (i, m) in model.f.iter().enumerate() {
        all.push((format!("F_{}", i + 1), m));
    }
    for (i, m) in model.h.iter().enumerate() {
        all.push((format!("H_{}", i + 1), m));
    }
    let covs_start = all.len();
    for (i, m) in model.cw.iter().enumerate() {
        all.push((format!("Cw_{}", i + 1), m));
    }
    for (i, m) in model.cv.iter().enumerate() {
        all.push((format!("Cv_{}", i + 1), m));
    }
    for (name, m) in &all {
        if !linalg::all_finite(m) {
            finite.push(name.clone());
        }
    }
    for (i, c) in model.extra_cross.iter().enumerate() {
        if !linalg::all_finite(&c.cov) {
            finite.push(format!("extra_cross[{i}]"));
        }
    }
    for (name, seq) in [("Cwx", &model.cwx), ("Cvx", &model.cvx)] {
        if let Some(seq) = seq {
            for (i, m) in seq.iter().enumerate() {
                if !linalg::all_finite(m) {
                    finite.push(format!("{name}_{}", i + 1));
                }
            }
        }
    }
    let finite_ok = finite.is_empty();
    report.push("finite", finite.into_iter().map(|n| format!("{n} has non-finite entries")).collect());
    if !finite_ok {
        return report;
    }

    let mut covs: Vec<(String, &Mat)> = vec![all[0].clone()];
    covs.extend(all[covs_start..].iter().cloned());
    let mut sym = Vec::new();
    let mut psd = Vec::new();
    for (name, m) in &covs {
        if !linalg::is_symmetric(m, 1e-10) {
            sym.push(format!("{name} is not symmetric"));
            continue;
        }
        let lo = linalg::min_eigenvalue(m);
        if lo < -linalg::psd_floor(m) {
            psd.push(format!("{name} has eigenvalue {lo:.3e}"));
        }
    }
    let marginals_ok = sym.is_empty() && psd.is_empty();
    report.push("symmetric", sym);
    report.push("psd", psd);
    if !marginals_ok {
        return report;
    }

    let joint = JointNoise::new(model).map(|j| {
        let lo = linalg::min_eigenvalue(&j.cov);
        if lo < -linalg::psd_floor(&j.cov) {
            vec![format!("joint covariance of (x1, w, v) has eigenvalue {lo:.3e}")]
        } else {
            Vec::new()
        }
    });
    report.push("joint_psd", joint.unwrap_or_else(|e| vec![e.to_string()]));
    report
}

fn term_dim(model: &LdssModel, t: NoiseTerm) -> Option<usize> {
    let k = model.horizon();
    if !term_in_horizon(t, k) {
        return None;
    }
    Some(match t {
        NoiseTerm::X1 => model.state_dim(1),
        NoiseTerm::W(l) => model.state_dim(l + 1),
        NoiseTerm::V(j) => model.meas_dim(j),
    })
}

/// Joint mean and covariance of `z = (x_1, w_1..w_{K-1}, v_1..v_K)`.
///
/// Declared cross terms are realised as follows: `C_{v_1,x_1}` is the `(v_1, x_1)` block and
/// `C_{v_k,x_k}` (k ≥ 2) the `(v_k, w_{k-1})` block; `C_{w_1,x_1}` is the `(w_1, x_1)` block and
/// `C_{w_l,x_l}` (l ≥ 2) the `(w_l, w_{l-1})` block. Each `C_{w_l,x_l}` is paired with a
/// `(w_l, v_l)` block of `-C_{w_l,x_l} H_lᵀ` so that `w_l` stays uncorrelated with `y_l`,
/// which is what the Kalman recursion requires. `extra_cross` blocks are added on top.
#[derive(Debug, Clone)]
pub struct JointNoise {
    pub mean: Vector,
    pub cov: Mat,
    x1: Range<usize>,
    w: Vec<Range<usize>>,
    v: Vec<Range<usize>>,
}

impl JointNoise {
    pub fn new(model: &LdssModel) -> Result<Self> {
        let k = model.horizon();
        if k == 0 {
            return Err(Error::model("horizon must be at least 1"));
        }
        let mut offset = 0;
        let mut next = |len: usize| {
            let r = offset..offset + len;
            offset += len;
            r
        };
        let x1 = next(model.state_dim(1));
        let w: Vec<_> = (1..k).map(|l| next(model.state_dim(l + 1))).collect();
        let v: Vec<_> = (1..=k).map(|j| next(model.meas_dim(j))).collect();
        let dim = offset;

        let mut joint = Self { mean: Vector::zeros(dim), cov: Mat::zeros(dim, dim), x1, w, v };
        if model.x0_mean.len() != joint.x1.len() {
            return Err(Error::model("x0_mean does not match the dimension of x_1"));
        }
        joint.mean.rows_mut(0, joint.x1.len()).copy_from(&model.x0_mean);

        joint.add_block(NoiseTerm::X1, NoiseTerm::X1, &model.cx0)?;
        for l in 1..k {
            joint.add_block(NoiseTerm::W(l), NoiseTerm::W(l), model.cw_at(l))?;
        }
        for j in 1..=k {
            joint.add_block(NoiseTerm::V(j), NoiseTerm::V(j), model.cv_at(j))?;
        }
        if let Some(cvx) = &model.cvx {
            for (i, c) in cvx.iter().enumerate() {
                let j = i + 1;
                let partner = if j == 1 { NoiseTerm::X1 } else { NoiseTerm::W(j - 1) };
                joint.add_block(NoiseTerm::V(j), partner, c)?;
            }
        }
        if let Some(cwx) = &model.cwx {
            for (i, c) in cwx.iter().enumerate() {
                let l = i + 1;
                let partner = if l == 1 { NoiseTerm::X1 } else { NoiseTerm::W(l - 1) };
                joint.add_block(NoiseTerm::W(l), partner, c)?;
                let compensation = -(c * model.h_at(l).transpose());
                joint.add_block(NoiseTerm::W(l), NoiseTerm::V(l), &compensation)?;
            }
        }
        for c in &model.extra_cross {
            joint.add_block(c.left, c.right, &c.cov)?;
        }
        Ok(joint)
    }

    fn add_block(&mut self, a: NoiseTerm, b: NoiseTerm, m: &Mat) -> Result<()> {
        let (ra, rb) = (self.range(a)?, self.range(b)?);
        if m.shape() != (ra.len(), rb.len()) {
            return Err(Error::model(format!(
                "covariance block ({a}, {b}) is {}x{}, expected {}x{}",
                m.nrows(),
                m.ncols(),
                ra.len(),
                rb.len()
            )));
        }
        let mut blk = self.cov.view_mut((ra.start, rb.start), m.shape());
        blk += m;
        if a != b {
            let mut blk = self.cov.view_mut((rb.start, ra.start), (rb.len(), ra.len()));
            blk += m.transpose();
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn range(&self, t: NoiseTerm) -> Result<Range<usize>> {
        let missing = || Error::model(format!("term {t} is outside the horizon"));
        match t {
            NoiseTerm::X1 => Ok(self.x1.clone()),
            NoiseTerm::W(l) => l.checked_sub(1).and_then(|i| self.w.get(i)).cloned().ok_or_else(missing),
            NoiseTerm::V(j) => j.checked_sub(1).and_then(|i| self.v.get(i)).cloned().ok_or_else(missing),
        }
    }

    /// Row selector `E_t` with `t = E_t z`.
    pub fn selector(&self, t: NoiseTerm) -> Result<Mat> {
        let r = self.range(t)?;
        let mut e = Mat::zeros(r.len(), self.dim());
        for (i, c) in r.enumerate() {
            e[(i, c)] = 1.0;
        }
        Ok(e)
    }

    /// Maps `Φ_k` with `x_k = Φ_k z`, for `k = 1..=K`.
    pub fn state_maps(&self, model: &LdssModel) -> Result<Vec<Mat>> {
        let mut maps = vec![self.selector(NoiseTerm::X1)?];
        for l in 1..model.horizon() {
            let f = model.f_at(l);
            let prev = &maps[l - 1];
            if f.ncols() != prev.nrows() {
                return Err(Error::model(format!("F_{l} does not match the dimension of x_{l}")));
            }
            maps.push(f * prev + self.selector(NoiseTerm::W(l))?);
        }
        Ok(maps)
    }

    /// Maps `Ψ_k` with `y_k = Ψ_k z`.
    pub fn measurement_maps(&self, model: &LdssModel) -> Result<Vec<Mat>> {
        let states = self.state_maps(model)?;
        states
            .iter()
            .enumerate()
            .map(|(i, phi)| {
                let h = model.h_at(i + 1);
                if h.ncols() != phi.nrows() {
                    return Err(Error::model(format!("H_{} does not match the dimension of x_{}", i + 1, i + 1)));
                }
                Ok(h * phi + self.selector(NoiseTerm::V(i + 1))?)
            })
            .collect()
    }

    /// `C(a, b)` between two primitive terms.
    pub fn block(&self, a: NoiseTerm, b: NoiseTerm) -> Result<Mat> {
        let (ra, rb) = (self.range(a)?, self.range(b)?);
        Ok(self.cov.view((ra.start, rb.start), (ra.len(), rb.len())).into_owned())
    }

    fn noise_indices(&self) -> Range<usize> {
        self.x1.end..self.dim()
    }
}

/// One realisation of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vector>,
    pub measurements: Vec<Vector>,
    pub seed: u64,
    /// `w_1..w_{K-1}`.
    pub state_noise: Vec<Vector>,
    /// `v_1..v_K`.
    pub measurement_noise: Vec<Vector>,
}

/// Reusable sampler; factorizes the joint covariance once.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    model: &'a LdssModel,
    joint: JointNoise,
    full_sqrt: Mat,
    noise_sqrt: Mat,
}

impl<'a> Simulator<'a> {
    pub fn new(model: &'a LdssModel) -> Result<Self> {
        let joint = JointNoise::new(model)?;
        let full_sqrt = linalg::psd_sqrt(&joint.cov, "joint covariance of (x1, w, v)")?;
        let r = joint.noise_indices();
        let marginal = joint.cov.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let noise_sqrt = linalg::psd_sqrt(&marginal, "joint covariance of (w, v)")?;
        Ok(Self { model, joint, full_sqrt, noise_sqrt })
    }

    pub fn joint(&self) -> &JointNoise {
        &self.joint
    }

    fn standard_normals(seed: u64, n: usize) -> Vector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Vector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)))
    }

    /// Noise drawn from its marginal with `x_1` fixed. The noise depends only on `seed`.
    pub fn with_initial_state(&self, x1: &Vector, seed: u64) -> Result<Trajectory> {
        if x1.len() != self.joint.x1.len() {
            return Err(Error::model(format!(
                "x1 has dimension {}, expected {}",
                x1.len(),
                self.joint.x1.len()
            )));
        }
        let noise = &self.noise_sqrt * Self::standard_normals(seed, self.noise_sqrt.nrows());
        let mut z = Vector::zeros(self.joint.dim());
        z.rows_mut(0, x1.len()).copy_from(x1);
        z.rows_mut(x1.len(), noise.len()).copy_from(&noise);
        Ok(self.assemble(&z, seed))
    }

    /// `x_1` and all noise drawn jointly from the model statistics.
    pub fn from_prior(&self, seed: u64) -> Trajectory {
        let z = &self.joint.mean + &self.full_sqrt * Self::standard_normals(seed, self.joint.dim());
        self.assemble(&z, seed)
    }

    fn assemble(&self, z: &Vector, seed: u64) -> Trajectory {
        let part = |r: Range<usize>| z.rows(r.start, r.len()).into_owned();
        let x1 = part(self.joint.x1.clone());
        let w: Vec<Vector> = self.joint.w.iter().map(|r| part(r.clone())).collect();
        let v: Vec<Vector> = self.joint.v.iter().map(|r| part(r.clone())).collect();
        let (states, measurements) = propagate(self.model, &x1, &w, &v);
        Trajectory { states, measurements, seed, state_noise: w, measurement_noise: v }
    }
}

/// Runs the state and measurement equations for given initial state and noise.
pub fn propagate(model: &LdssModel, x1: &Vector, w: &[Vector], v: &[Vector]) -> (Vec<Vector>, Vec<Vector>) {
    let k = model.horizon();
    let mut states = Vec::with_capacity(k);
    let mut measurements = Vec::with_capacity(k);
    let mut x = x1.clone();
    for j in 1..=k {
        if j > 1 {
            x = model.f_at(j - 1) * &x + &w[j - 2];
        }
        measurements.push(model.h_at(j) * &x + &v[j - 1]);
        states.push(x.clone());
    }
    (states, measurements)
}

/// Trajectory from a fixed `x_1`; identical seeds give identical noise.
pub fn simulate_trajectory(model: &LdssModel, x1: &Vector, seed: u64) -> Result<Trajectory> {
    Simulator::new(model)?.with_initial_state(x1, seed)
}

/// Trajectory with `x_1` drawn from the prior together with the noise.
pub fn simulate_from_prior(model: &LdssModel, seed: u64) -> Result<Trajectory> {
    Ok(Simulator::new(model)?.from_prior(seed))
}
