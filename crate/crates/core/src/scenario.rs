//! Versioned JSON scenario files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ambiguity::SearchRegion;
use crate::channel::{SamplingSpec, TargetParams};
use crate::error::{Result, RsfError};
use crate::montecarlo::{CodewordPolicy, Scenario};
use crate::waveform::WaveformSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// Sample interval used when a file gives neither `sampling` nor `delta_s`.
pub const DEFAULT_DELTA_S: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub snr_grid_db: Vec<f64>,
    pub trials_per_snr: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub codeword_policy: CodewordPolicy,
}

/// On-disk scenario. `sampling` and `region` fall back to the defaults
/// derived from the waveform and target when omitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub waveform: WaveformSpec,
    pub target: TargetParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<SearchRegion>,
    pub sweep: SweepSettings,
}

impl ScenarioFile {
    pub fn from_scenario(scn: &Scenario, name: Option<String>) -> Self {
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            name,
            waveform: scn.waveform.clone(),
            target: scn.target,
            delta_s: None,
            sampling: Some(scn.sampling),
            region: Some(scn.region),
            sweep: SweepSettings {
                snr_grid_db: scn.snr_grid_db.clone(),
                trials_per_snr: scn.trials_per_snr,
                master_seed: scn.master_seed,
                codeword_policy: scn.codeword_policy,
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(RsfError::validation(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", file.schema_version),
            ));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario file serializes")
    }

    /// Resolves defaults and validates.
    pub fn into_scenario(self) -> Result<Scenario> {
        self.waveform.validate()?;
        self.target.validate()?;
        let delta = match (self.delta_s, &self.sampling) {
            (Some(d), Some(s)) if d != s.delta_s => {
                return Err(RsfError::validation("delta_s", "disagrees with sampling.delta_s"));
            }
            (_, Some(s)) => s.delta_s,
            (Some(d), None) => d,
            (None, None) => DEFAULT_DELTA_S,
        };
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(RsfError::validation("delta_s", format!("must be > 0, got {delta}")));
        }
        let region = match self.region {
            Some(r) => r,
            None => SearchRegion::default_for(&self.waveform, self.target.tau0_s, delta)?,
        };
        let sampling = match self.sampling {
            Some(s) => s,
            None => SamplingSpec::covering(&self.waveform, region.tau_max, region.gamma_min, delta)?,
        };
        let scn = Scenario {
            waveform: self.waveform,
            target: self.target,
            sampling,
            region,
            snr_grid_db: self.sweep.snr_grid_db,
            trials_per_snr: self.sweep.trials_per_snr,
            master_seed: self.sweep.master_seed,
            codeword_policy: self.sweep.codeword_policy,
        };
        scn.validate()?;
        Ok(scn)
    }
}
