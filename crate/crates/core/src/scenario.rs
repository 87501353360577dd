//! JSON scenario files.
//!
//! Matrices are written as `{"dims": [rows, cols], "data": [[...], ...]}` (row-major); a
//! per-step sequence is either one matrix, broadcast over the horizon, or an array of matrices.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::constraints::{ConstraintSchedule, Family, StepConstraint};
use crate::error::{Error, Result};
use crate::filter::Start;
use crate::harness::{FilterKind, Scenario};
use crate::linalg::{Mat, Vector};
use crate::model::{CrossCovariance, LdssModel, NoiseTerm};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub dims: [usize; 2],
    pub data: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MatrixSeq {
    One(MatrixSpec),
    Many(Vec<MatrixSpec>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossSpec {
    pub left: String,
    pub right: String,
    pub cov: MatrixSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub horizon: usize,
    #[serde(rename = "F", default)]
    pub f: Option<MatrixSeq>,
    #[serde(rename = "H")]
    pub h: MatrixSeq,
    #[serde(rename = "Cw", default)]
    pub cw: Option<MatrixSeq>,
    #[serde(rename = "Cv")]
    pub cv: MatrixSeq,
    #[serde(rename = "Cwx", default)]
    pub cwx: Option<MatrixSeq>,
    #[serde(rename = "Cvx", default)]
    pub cvx: Option<MatrixSeq>,
    pub x0_mean: Vec<f64>,
    #[serde(rename = "Cx0")]
    pub cx0: MatrixSpec,
    #[serde(default)]
    pub extra_cross: Vec<CrossSpec>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Kf,
    Lmvdrf,
    Lckf,
    Lclmvdrf,
    Lcmve,
}

impl From<Preset> for FilterKind {
    fn from(p: Preset) -> Self {
        match p {
            Preset::Kf => FilterKind::Kf,
            Preset::Lmvdrf => FilterKind::Lmvdrf,
            Preset::Lckf => FilterKind::Lckf,
            Preset::Lclmvdrf => FilterKind::Lclmvdrf,
            Preset::Lcmve => FilterKind::Lcmve,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub enum FamilySpec {
    #[serde(alias = "none")]
    None,
    #[serde(alias = "c1")]
    C1,
    #[serde(alias = "c2")]
    C2,
    #[serde(alias = "c3")]
    C3,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub step: usize,
    pub family: FamilySpec,
    #[serde(default)]
    pub delta: Option<MatrixSpec>,
    #[serde(default)]
    pub target: Option<MatrixSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDetail {
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub steps: Vec<StepSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Preset(Preset),
    Detail(ScheduleDetail),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitName {
    Prior,
    Fisher,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RwlseSpec {
    pub sigma: MatrixSpec,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitSpec {
    Name(InitName),
    Rwlse { rwlse: RwlseSpec },
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub x1_override: Option<Vec<f64>>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self { trials: default_trials(), seed: 0, x1_override: None }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    #[serde(default)]
    pub schedule: Option<ScheduleSpec>,
    #[serde(default)]
    pub init: Option<InitSpec>,
    #[serde(default)]
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Scenario { path: path.into(), message: message.into() }
}

/// Parses a scenario document; errors name the offending key.
pub fn parse(text: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        err(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
    })
}

pub fn load(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(path.display().to_string(), format!("cannot read scenario: {e}")))?;
    parse(&text)
}

impl MatrixSpec {
    pub fn to_matrix(&self, path: &str) -> Result<Mat> {
        let [r, c] = self.dims;
        if self.data.len() != r {
            return Err(err(path, format!("dims say {r} rows but data has {}", self.data.len())));
        }
        for (i, row) in self.data.iter().enumerate() {
            if row.len() != c {
                return Err(err(format!("{path}.data[{i}]"), format!("dims say {c} columns but row has {}", row.len())));
            }
        }
        Ok(Mat::from_fn(r, c, |i, j| self.data[i][j]))
    }
}

impl MatrixSeq {
    fn expand(&self, path: &str, len: usize) -> Result<Vec<Mat>> {
        match self {
            MatrixSeq::One(m) => Ok(vec![m.to_matrix(path)?; len]),
            MatrixSeq::Many(ms) => {
                if ms.len() < len {
                    return Err(err(path, format!("sequence has {} entries, need {len}", ms.len())));
                }
                ms.iter().take(len).enumerate().map(|(i, m)| m.to_matrix(&format!("{path}[{i}]"))).collect()
            }
        }
    }
}

fn parse_term(s: &str, path: &str) -> Result<NoiseTerm> {
    let bad = || err(path, format!("`{s}` is not a term (expected x1, w<l> or v<k>)"));
    if s == "x1" {
        return Ok(NoiseTerm::X1);
    }
    let (kind, idx) = s.split_at(1.min(s.len()));
    let idx: usize = idx.parse().map_err(|_| bad())?;
    match kind {
        "w" => Ok(NoiseTerm::W(idx)),
        "v" => Ok(NoiseTerm::V(idx)),
        _ => Err(bad()),
    }
}

impl ModelSpec {
    pub fn to_model(&self, horizon: usize) -> Result<LdssModel> {
        if horizon == 0 {
            return Err(err("model.horizon", "must be at least 1"));
        }
        let steps = horizon - 1;
        let h = self.h.expand("model.H", horizon)?;
        let cv = self.cv.expand("model.Cv", horizon)?;
        let f = match &self.f {
            Some(s) => s.expand("model.F", steps)?,
            None if steps == 0 => Vec::new(),
            None => return Err(err("model.F", "required when the horizon exceeds 1")),
        };
        let cw = match &self.cw {
            Some(s) => s.expand("model.Cw", steps)?,
            None if steps == 0 => Vec::new(),
            None => return Err(err("model.Cw", "required when the horizon exceeds 1")),
        };
        let cwx = self.cwx.as_ref().map(|s| s.expand("model.Cwx", steps)).transpose()?;
        let cvx = self.cvx.as_ref().map(|s| s.expand("model.Cvx", horizon)).transpose()?;
        let mut extra_cross = Vec::new();
        for (i, c) in self.extra_cross.iter().enumerate() {
            let path = format!("model.extra_cross[{i}]");
            let left = parse_term(&c.left, &format!("{path}.left"))?;
            let right = parse_term(&c.right, &format!("{path}.right"))?;
            let within = |t: NoiseTerm| match t {
                NoiseTerm::X1 => true,
                NoiseTerm::W(l) => l < horizon,
                NoiseTerm::V(k) => k <= horizon,
            };
            // Terms beyond a shortened horizon are dropped along with the steps.
            if within(left) && within(right) {
                extra_cross.push(CrossCovariance { left, right, cov: c.cov.to_matrix(&format!("{path}.cov"))? });
            }
        }
        Ok(LdssModel {
            f,
            h,
            cw,
            cv,
            cwx,
            cvx,
            extra_cross,
            x0_mean: Vector::from_vec(self.x0_mean.clone()),
            cx0: self.cx0.to_matrix("model.Cx0")?,
        })
    }
}

impl ScenarioFile {
    /// Builds the scenario, optionally overriding the horizon (one-matrix sequences are
    /// re-broadcast; explicit sequences are truncated).
    pub fn to_scenario(&self, horizon: Option<usize>) -> Result<Scenario> {
        let declared = self.model.horizon;
        let horizon = horizon.unwrap_or(declared);
        let model = self.model.to_model(horizon)?;

        let (preset, steps) = match &self.schedule {
            None => (Preset::Lckf, &[][..]),
            Some(ScheduleSpec::Preset(p)) => (*p, &[][..]),
            Some(ScheduleSpec::Detail(d)) => (d.preset.unwrap_or(Preset::Lckf), &d.steps[..]),
        };
        let mut schedule = ConstraintSchedule::default();
        for (i, s) in steps.iter().enumerate() {
            let path = format!("schedule.steps[{i}]");
            if s.step == 0 || s.step > declared.max(horizon) {
                return Err(err(format!("{path}.step"), format!("step {} outside 1..={}", s.step, declared.max(horizon))));
            }
            if s.step > horizon {
                continue;
            }
            let delta = s.delta.as_ref().map(|m| m.to_matrix(&format!("{path}.delta"))).transpose()?;
            let target = s.target.as_ref().map(|m| m.to_matrix(&format!("{path}.target"))).transpose()?;
            let family = match s.family {
                FamilySpec::None => Family::None,
                FamilySpec::C1 => Family::C1,
                FamilySpec::C2 => Family::C2,
                FamilySpec::C3 => Family::C3,
            };
            if matches!(family, Family::C1 | Family::C2) && (delta.is_none() || target.is_none()) {
                return Err(err(&path, "C1 and C2 steps need both `delta` and `target`"));
            }
            schedule.set(s.step, StepConstraint { family, delta, target });
        }

        let filter = FilterKind::from(preset);
        let init = match &self.init {
            None => filter.default_start(),
            Some(InitSpec::Name(InitName::Prior)) => Start::Prior,
            Some(InitSpec::Name(InitName::Fisher)) => Start::Fisher,
            Some(InitSpec::Rwlse { rwlse }) => Start::Rwlse {
                sigma: rwlse.sigma.to_matrix("init.rwlse.sigma")?,
                c: Vector::from_vec(rwlse.c.clone()),
            },
        };
        let x1_override = self.experiment.x1_override.as_ref().map(|v| Vector::from_vec(v.clone()));
        if let Some(x1) = &x1_override {
            if x1.len() != self.model.x0_mean.len() {
                return Err(err("experiment.x1_override", format!("has {} entries, expected {}", x1.len(), self.model.x0_mean.len())));
            }
        }
        if self.experiment.trials == 0 {
            return Err(err("experiment.trials", "must be at least 1"));
        }
        Ok(Scenario {
            name: self.name.clone().unwrap_or_else(|| "scenario".to_string()),
            model,
            filter,
            schedule,
            init,
            trials: self.experiment.trials,
            seed: self.experiment.seed,
            x1_override,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "model": {
            "horizon": 3,
            "F": {"dims": [1, 1], "data": [[1.0]]},
            "H": {"dims": [2, 1], "data": [[1.0], [1.0]]},
            "Cw": {"dims": [1, 1], "data": [[0.1]]},
            "Cv": {"dims": [2, 2], "data": [[1.0, 0.0], [0.0, 1.0]]},
            "x0_mean": [0.0],
            "Cx0": {"dims": [1, 1], "data": [[1.0]]}
        }
    }"#;

    #[test]
    fn minimal_scenario_uses_defaults() {
        let s = parse(MINIMAL).unwrap().to_scenario(None).unwrap();
        assert_eq!(s.model.horizon(), 3);
        assert_eq!(s.model.f.len(), 2);
        assert_eq!(s.filter, FilterKind::Lckf);
        assert_eq!(s.init, Start::Prior);
        assert_eq!(s.trials, 1000);
    }

    #[test]
    fn horizon_override_rebroadcasts() {
        let s = parse(MINIMAL).unwrap().to_scenario(Some(7)).unwrap();
        assert_eq!(s.model.horizon(), 7);
        assert_eq!(s.model.cw.len(), 6);
    }

    #[test]
    fn dims_are_cross_checked() {
        let text = MINIMAL.replace(r#""dims": [2, 1], "data": [[1.0], [1.0]]"#, r#""dims": [3, 1], "data": [[1.0], [1.0]]"#);
        match parse(&text).unwrap().to_scenario(None) {
            Err(Error::Scenario { path, .. }) => assert_eq!(path, "model.H"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_name_the_offending_key() {
        let text = MINIMAL.replace(r#""x0_mean": [0.0]"#, r#""x0_mean": "zero""#);
        match parse(&text) {
            Err(Error::Scenario { path, .. }) => assert_eq!(path, "model.x0_mean"),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replace(r#""horizon": 3,"#, r#""horizon": 3, "horizn": 2,"#);
        match parse(&text) {
            Err(Error::Scenario { message, .. }) => assert!(message.contains("horizn")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn presets_and_steps() {
        let text = MINIMAL.replace(
            "\"model\"",
            r#""schedule": {"preset": "lclmvdrf", "steps": [{"step": 1, "family": "C2", "delta": {"dims": [2, 1], "data": [[1.0], [-1.0]]}, "target": {"dims": [1, 1], "data": [[0.0]]}}]},
            "init": {"rwlse": {"sigma": {"dims": [1, 1], "data": [[4.0]]}, "c": [0.5]}},
            "model""#,
        );
        let s = parse(&text).unwrap().to_scenario(None).unwrap();
        assert_eq!(s.filter, FilterKind::Lclmvdrf);
        assert_eq!(s.schedule.step(1).family, Family::C2);
        assert!(matches!(s.init, Start::Rwlse { .. }));
        let text = MINIMAL.replace("\"model\"", r#""schedule": "kalman", "model""#);
        assert!(matches!(parse(&text), Err(Error::Scenario { .. })));
    }

    #[test]
    fn extra_cross_terms() {
        let text = MINIMAL.replace(
            r#""x0_mean""#,
            r#""extra_cross": [{"left": "w1", "right": "v1", "cov": {"dims": [1, 2], "data": [[0.1, 0.0]]}}], "x0_mean""#,
        );
        let s = parse(&text).unwrap().to_scenario(None).unwrap();
        assert_eq!(s.model.extra_cross[0].left, NoiseTerm::W(1));
        assert_eq!(s.model.extra_cross[0].right, NoiseTerm::V(1));
    }
}
