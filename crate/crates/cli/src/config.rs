//! `--config` TOML file: `[spectral]`, `[mel]` and `[loss]` tables mirroring
//! the library config structs. Missing keys keep their defaults.

use std::path::Path;

use anyhow::{Context, Result};
use freev_core::dsp::SpectralConfig;
use freev_core::losses::LossWeights;
use freev_core::melbank::{build_filterbank, MelConfig, MelFilterbank};
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub spectral: SpectralConfig,
    pub mel: MelConfig,
    pub loss: LossWeights,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Config = toml::from_str(&text)
            .map_err(|e| anyhow::anyhow!("{}", e.message()))
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.spectral.validate().context("config [spectral]")?;
        cfg.mel.validate(cfg.spectral.sample_rate).context("config [mel]")?;
        cfg.loss.validate().context("config [loss]")?;
        Ok(cfg)
    }

    pub fn filterbank(&self) -> Result<MelFilterbank> {
        build_filterbank(&self.spectral, &self.mel).context("building mel filterbank")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Config> {
        let dir = tempfile::tempdir()?;
        let path = dir.path().join("c.toml");
        std::fs::write(&path, text)?;
        Config::load(Some(&path))
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("").unwrap(), Config::default());
    }

    #[test]
    fn partial_sections_override_fields() {
        let c = parse("[spectral]\nn_fft = 2048\nwin_length = 2048\n[loss]\nlambda_p = 1.0\n").unwrap();
        assert_eq!(c.spectral.n_fft, 2048);
        assert_eq!(c.spectral.hop, 256);
        assert_eq!(c.loss.lambda_p, 1.0);
        assert_eq!(c.loss.lambda_a, 45.0);
        assert_eq!(c.filterbank().unwrap().n_freq(), 1025);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(parse("[spectral]\nnfft = 1\n").is_err());
        assert!(parse("[extra]\n").is_err());
        assert!(parse("[loss]\nlambda_a = -1.0\n").is_err());
        assert!(parse("[mel]\nmel_scale = \"htk\"\n").is_ok());
    }
}
