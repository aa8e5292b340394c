use serde::{Deserialize, Serialize};

use crate::dimfun::{parse_approx, parse_dimfun, DimensionFunction};
use crate::diophantine::{Partition, Psi, SceneConfig};
use crate::engine::SyntheticKind;
use crate::geometry::{identity, Norm};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Predict,
    Classify,
    Witnesses,
    Measure,
    Boxdim,
    TransferCheck,
    MtpBuild,
    MtpVerify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Predict => "predict",
            Command::Classify => "classify",
            Command::Witnesses => "witnesses",
            Command::Measure => "measure",
            Command::Boxdim => "boxdim",
            Command::TransferCheck => "transfer-check",
            Command::MtpBuild => "mtp-build",
            Command::MtpVerify => "mtp-verify",
        }
    }
}

/// One experiment. Every field has an explicit default so the echoed
/// config re-runs the experiment exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub out: String,
    pub scene: SceneSection,
    pub dimfun: DimfunSection,
    pub truncation: TruncationSection,
    pub estimator: EstimatorSection,
    pub engine: EngineSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSection {
    pub n: usize,
    pub m: usize,
    pub psi: String,
    /// Inhomogeneous shift; empty means zero.
    pub y: Vec<f64>,
    /// Row-major `m x m`; empty means the identity.
    pub phi: Vec<Vec<f64>>,
    /// Blocks of `{1, .., n+m}` over `(q, p)`; empty means no primitivity filter.
    pub partition: Vec<Vec<usize>>,
    /// "block" or "euclidean".
    pub norm: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimfunSection {
    pub f: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationSection {
    pub q: u64,
    pub g: u64,
    /// Upper `|q|` for Diophantine engine scenes.
    pub j_max: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub samples: u64,
    /// Query point for `witnesses`, column-major.
    pub x: Vec<f64>,
    /// "shell" or "union".
    pub schedule: String,
    pub t_lo: u32,
    pub t_hi: u32,
    /// `delta_t = Q_t^-delta_exponent`.
    pub delta_exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    /// "dyadic-points", "vertical-lines" or "diophantine".
    pub scene: String,
    /// Dimension function of the construction.
    pub f: String,
    pub eta: f64,
    pub depth: usize,
    /// Radius of `B0`.
    pub radius: f64,
    /// Centre of `B0`; empty means the origin.
    pub center: Vec<f64>,
    pub levels: Vec<u32>,
    /// Synthetic scenes use `g(Y_t)^(1/m) = fraction * spacing_t`.
    pub fraction: f64,
    pub calibration_instances: usize,
    pub gen_window: usize,
    pub max_sublevels: usize,
    /// Raster cells per axis for coverage reports (`2^g_res`).
    pub g_res: u32,
    pub samples: usize,
    /// Constant for the closed-form mass-distribution check.
    pub mdp_c: f64,
    /// Existing tree for `mtp-verify`; empty means build one.
    pub tree: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: Command::Predict,
            seed: 1,
            threads: 0,
            out: "out".into(),
            scene: SceneSection::default(),
            dimfun: DimfunSection::default(),
            truncation: TruncationSection::default(),
            estimator: EstimatorSection::default(),
            engine: EngineSection::default(),
        }
    }
}

impl Default for SceneSection {
    fn default() -> Self {
        SceneSection {
            n: 2,
            m: 1,
            psi: "powerlaw c=1 tau=3".into(),
            y: Vec::new(),
            phi: Vec::new(),
            partition: Vec::new(),
            norm: "block".into(),
        }
    }
}

impl Default for DimfunSection {
    fn default() -> Self {
        DimfunSection {
            f: "dimfun c=1 s=2 a=0".into(),
        }
    }
}

impl Default for TruncationSection {
    fn default() -> Self {
        TruncationSection {
            q: 200,
            g: 1,
            j_max: 50,
        }
    }
}

impl Default for EstimatorSection {
    fn default() -> Self {
        EstimatorSection {
            samples: 4000,
            x: Vec::new(),
            schedule: "shell".into(),
            t_lo: 2,
            t_hi: 6,
            delta_exponent: 2.0,
        }
    }
}

impl Default for EngineSection {
    fn default() -> Self {
        EngineSection {
            scene: "dyadic-points".into(),
            f: "dimfun c=2000 s=0.5 a=0".into(),
            eta: 10.0,
            depth: 2,
            radius: 2.5e5,
            center: Vec::new(),
            levels: vec![4, 18],
            fraction: 0.25,
            calibration_instances: 100,
            gen_window: 4,
            max_sublevels: 16,
            g_res: 12,
            samples: 1000,
            mdp_c: 2.0,
            tree: String::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scene;
        if s.n == 0 || s.m == 0 {
            return Err(Error::Invalid("scene.n and scene.m must be positive".into()));
        }
        self.psi()?;
        self.f()?;
        self.engine_f()?;
        self.scene_config()?;
        if self.truncation.q == 0 {
            return Err(Error::Invalid("truncation.q must be positive".into()));
        }
        let e = &self.estimator;
        if !matches!(e.schedule.as_str(), "shell" | "union") {
            return Err(Error::Invalid(format!(
                "estimator.schedule must be \"shell\" or \"union\", got {:?}",
                e.schedule
            )));
        }
        if e.t_lo > e.t_hi || e.t_hi > 40 {
            return Err(Error::Invalid("estimator.t_lo <= t_hi <= 40 required".into()));
        }
        let g = &self.engine;
        if !matches!(g.scene.as_str(), "dyadic-points" | "vertical-lines" | "diophantine") {
            return Err(Error::Invalid(format!("engine.scene {:?} is unknown", g.scene)));
        }
        if !(g.eta > 1.0) || g.depth == 0 || !(g.radius > 0.0) || !(g.fraction > 0.0) {
            return Err(Error::Invalid(
                "engine needs eta > 1, depth >= 1, radius > 0, fraction > 0".into(),
            ));
        }
        if g.levels.is_empty() || g.levels.windows(2).any(|w| w[0] >= w[1]) || g.levels.iter().any(|t| *t > 30) {
            return Err(Error::Invalid("engine.levels must be increasing and at most 30".into()));
        }
        if g.g_res > 24 {
            return Err(Error::Invalid("engine.g_res must be at most 24".into()));
        }
        Ok(())
    }

    pub fn psi(&self) -> Result<crate::dimfun::ApproxFunction> {
        parse_approx(&self.scene.psi)
    }

    pub fn f(&self) -> Result<DimensionFunction> {
        parse_dimfun(&self.dimfun.f)
    }

    pub fn engine_f(&self) -> Result<DimensionFunction> {
        parse_dimfun(&self.engine.f)
    }

    pub fn norm(&self) -> Result<Norm> {
        match self.scene.norm.as_str() {
            "block" => Ok(Norm::Block {
                n: self.scene.n,
                m: self.scene.m,
            }),
            "euclidean" => Ok(Norm::Euclidean),
            other => Err(Error::Invalid(format!("scene.norm {other:?} is unknown"))),
        }
    }

    pub fn scene_config(&self) -> Result<SceneConfig> {
        let s = &self.scene;
        let cfg = SceneConfig {
            n: s.n,
            m: s.m,
            psi: Psi::Single(self.psi()?),
            y: if s.y.is_empty() { vec![0.0; s.m] } else { s.y.clone() },
            phi: if s.phi.is_empty() { identity(s.m) } else { s.phi.clone() },
            partition: if s.partition.is_empty() {
                None
            } else {
                Some(Partition::new(s.n + s.m, s.partition.clone())?)
            },
            norm: self.norm()?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn synthetic_kind(&self) -> Option<SyntheticKind> {
        match self.engine.scene.as_str() {
            "dyadic-points" => Some(SyntheticKind::DyadicPoints),
            "vertical-lines" => Some(SyntheticKind::VerticalLines),
            _ => None,
        }
    }
}
