//! Suite configuration file (TOML).

use std::path::{Path, PathBuf};

use airgrasp_core::collision::CollisionParams;
use airgrasp_core::grasp::GraspParams;
use airgrasp_core::guidance::GuidanceParams;
use airgrasp_core::kinematics::{ArmModel, Placement};
use airgrasp_core::mission::{Ablation, MissionConfig, Pipeline};
use serde::{Deserialize, Serialize};

use crate::scenario::ScenarioName;
use crate::{HarnessError, Result};

/// Arm geometry in file units (degrees for joint limits).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmSection {
    pub link_lengths: [f64; 4],
    pub limits_deg: [[f64; 2]; 4],
    pub mount_offset: f64,
    pub standoff: f64,
    pub min_base_z: f64,
}

impl Default for ArmSection {
    fn default() -> Self {
        let arm = ArmModel::default();
        let p = Placement::default();
        Self {
            link_lengths: arm.link_lengths,
            limits_deg: arm.limits.map(|[a, b]| [a.to_degrees(), b.to_degrees()]),
            mount_offset: arm.mount_offset,
            standoff: p.standoff,
            min_base_z: p.min_base_z,
        }
    }
}

impl ArmSection {
    pub fn arm(&self) -> ArmModel {
        ArmModel {
            link_lengths: self.link_lengths,
            limits: self.limits_deg.map(|[a, b]| [a.to_radians(), b.to_radians()]),
            mount_offset: self.mount_offset,
        }
    }

    pub fn placement(&self) -> Placement {
        Placement {
            standoff: self.standoff,
            min_base_z: self.min_base_z,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSection {
    /// Episodes per (scenario, ablation) cell.
    pub episodes: usize,
    /// Seed of the first episode; episode `i` uses `base_seed + i`.
    pub base_seed: u64,
    pub scenarios: Vec<ScenarioName>,
    /// Ablation names: `full`, or flags joined by `+`.
    pub ablations: Vec<String>,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Optional camera resolution override `[width, height]`.
    pub camera_resolution: Option<[u32; 2]>,
}

impl Default for SuiteSection {
    fn default() -> Self {
        Self {
            episodes: 10,
            base_seed: 0,
            scenarios: vec![ScenarioName::TabletopSparse],
            ablations: vec!["full".into()],
            out_dir: PathBuf::from("results"),
            threads: 0,
            camera_resolution: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub guidance: GuidanceParams,
    pub grasp: GraspParams,
    pub arm: ArmSection,
    pub collision: CollisionParams,
    pub mission: MissionConfig,
    pub suite: SuiteSection,
}

/// Environment variable overriding `suite.out_dir`.
pub const OUT_DIR_ENV: &str = "AIRGRASP_OUT_DIR";

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline(Ablation::default(), 0)
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.suite.episodes == 0 {
            return Err(HarnessError::Config("suite.episodes must be positive".into()));
        }
        if self.suite.scenarios.is_empty() || self.suite.ablations.is_empty() {
            return Err(HarnessError::Config("suite needs at least one scenario and one ablation".into()));
        }
        if let Some([w, h]) = self.suite.camera_resolution {
            if w == 0 || h == 0 {
                return Err(HarnessError::Config("camera resolution must be positive".into()));
            }
        }
        for a in &self.suite.ablations {
            self.ablation(a)?;
        }
        Ok(())
    }

    pub fn ablation(&self, name: &str) -> Result<Ablation> {
        Ablation::from_name(name).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Core pipeline for one episode.
    pub fn pipeline(&self, ablation: Ablation, seed: u64) -> Pipeline {
        let mut mission = self.mission.clone();
        mission.ablation = ablation;
        mission.seed = seed;
        Pipeline::new(
            mission,
            self.guidance.clone(),
            self.grasp.clone(),
            self.collision.clone(),
            self.arm.arm(),
            self.arm.placement(),
        )
    }

    /// Output directory: explicit argument, then the environment, then the file.
    pub fn out_dir(&self, explicit: Option<&Path>) -> PathBuf {
        if let Some(p) = explicit {
            return p.to_path_buf();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.suite.out_dir.clone(),
        }
    }

    /// FNV-1a hash of the configuration, output location excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.suite.out_dir = PathBuf::new();
        c.suite.threads = 0;
        let text = serde_json::to_string(&c).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}
