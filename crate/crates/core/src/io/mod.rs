//! Configuration files, trajectory dumps and run manifests.

mod config;
mod dump;
mod manifest;

pub use config::{
    effective_config, locate_key, parse_config, CaseBSection, CheckSection, SmallNoiseSection, ConfigError, ConfigFile, ExperimentSection,
    InitialSection, ModelSection, SimulateConfig,
};
pub use dump::{decode_dump, encode_dump, rows_dat, Dump, DumpContext, DumpHeader, PathKind, DUMP_FORMAT, ROW_COLUMNS};
pub use manifest::{read_manifests, sha256_hex, unix_now, verify_manifest, FileEntry, OutputDir, RunManifest, MANIFEST_FILE};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("format error: {0}")]
    Format(String),
}

/// Reads `<stem>.json` and `<stem>.bin`.
pub fn read_dump(stem: &std::path::Path) -> Result<Dump, IoError> {
    let side = std::fs::read_to_string(stem.with_extension("json"))?;
    let body = std::fs::read(stem.with_extension("bin"))?;
    decode_dump(&side, &body)
}
