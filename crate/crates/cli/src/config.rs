use std::path::Path;

use serde::{Deserialize, Serialize};
use vdaa_core::cas::MdpConfig;
use vdaa_core::dataset_io::{MetadataAdapter, SyntheticConfig};
use vdaa_core::metrics::DetectionEvalConfig;
use vdaa_core::{EncounterConfig, SimConfig};

use crate::CliError;

/// Everything a run can be configured with. Every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub encounters: EncounterConfig,
    pub mdp: MdpConfig,
    pub simulation: SimConfig,
    pub dataset: SyntheticConfig,
    pub eval: DetectionEvalConfig,
    pub metadata_adapter: MetadataAdapter,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }
}
