//! Run manifest written next to each primary output.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn config_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub rng_seed: Option<u64>,
    pub version: &'static str,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: String, config_text: &str, rng_seed: Option<u64>) -> Self {
        Self {
            command,
            config_digest: config_digest(config_text),
            rng_seed,
            version: env!("CARGO_PKG_VERSION"),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn render(&self) -> String {
        let seed = self
            .rng_seed
            .map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "command = {}\nconfig_sha256 = {}\nrng_seed = {}\nversion = {}\ntimestamp = {}\n",
            self.command, self.config_digest, seed, self.version, self.timestamp
        )
    }

    /// Writes `<out>.manifest`.
    pub fn write_beside(&self, out: &Path) -> Result<PathBuf, CliError> {
        let mut name = out.as_os_str().to_owned();
        name.push(".manifest");
        let path = PathBuf::from(name);
        std::fs::write(&path, self.render()).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_text() {
        assert_eq!(
            config_digest(""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            config_digest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn digest_tracks_text() {
        assert_eq!(
            config_digest("mc.rng_seed = 1\n"),
            config_digest("mc.rng_seed = 1\n")
        );
        assert_ne!(
            config_digest("mc.rng_seed = 1\n"),
            config_digest("mc.rng_seed = 2\n")
        );
    }

    #[test]
    fn rendering() {
        let m = RunManifest {
            command: "twinbeam trace --out t.csv".into(),
            config_digest: config_digest(""),
            rng_seed: None,
            version: "0.1.0",
            timestamp: "2026-01-01T00:00:00Z".into(),
        };
        let text = m.render();
        assert!(text.starts_with("command = twinbeam trace --out t.csv\n"));
        assert!(text.contains("rng_seed = none\n"));
        assert!(text.ends_with("timestamp = 2026-01-01T00:00:00Z\n"));
    }
}
