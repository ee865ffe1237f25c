//! Run configuration shared by the command line and TOML config files.
//!
//! Every setting is optional in both places; a value given as a flag wins
//! over the config file, which wins over the built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;
use textline_core::init::InitConfig;
use textline_core::{EmConfig, Variant};

use crate::formats::read_moments;
use crate::IoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    /// Vertical residuals, horizontal extent (the default model).
    Shear,
    /// Rotation-invariant fit along the principal axis.
    Rot,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Shear => Variant::Shear,
            VariantArg::Rot => Variant::RotationInvariant,
        }
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Fraction of text pixels sampled as graph vertices.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Maximum EM iterations.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Convergence threshold on the mean symmetric KL between iterations.
    #[arg(long)]
    pub kld: Option<f64>,
    /// Lines whose prior falls below this are pruned.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Plateau ratio of the fitting feature.
    #[arg(long)]
    pub plateau_ratio: Option<f64>,
    /// Counting number of every vertex.
    #[arg(long)]
    pub cv: Option<f64>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Seed of the pixel sampler.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for document-level parallelism (0 = all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// File with three pairwise moments (equal, adjacent, farther).
    #[arg(long)]
    pub moments: Option<PathBuf>,
    /// Per-edge weight of the Gaussian penalty on the learned prior parameters.
    #[arg(long)]
    pub regularization: Option<f64>,
    /// Fixed binarization level (pixels at or below it are ink); Otsu otherwise.
    #[arg(long)]
    pub binarize: Option<u8>,
    /// Largest filter-bank orientation, in degrees.
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// Filter-bank orientation step, in degrees.
    #[arg(long)]
    pub alpha_step: Option<f64>,
    /// Blob split threshold, in mean component heights.
    #[arg(long)]
    pub overlap_factor: Option<f64>,
    /// Minimum ink fraction of a blob.
    #[arg(long)]
    pub residual_ratio: Option<f64>,
    /// Also write `<name>.overlay.png`.
    #[arg(long)]
    pub overlay: Option<bool>,
    /// Also write `<name>.diagnostics.txt`.
    #[arg(long)]
    pub diagnostics: Option<bool>,
}

impl Settings {
    pub fn parse_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_file(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(|e| IoError::Read(path.to_path_buf(), e))?;
        Self::parse_toml(&text).map_err(|msg| IoError::Decode(path.to_path_buf(), msg))
    }

    /// `self` where set, otherwise `fallback`.
    pub fn or(self, fallback: Settings) -> Settings {
        Settings {
            ratio: self.ratio.or(fallback.ratio),
            max_iter: self.max_iter.or(fallback.max_iter),
            kld: self.kld.or(fallback.kld),
            epsilon: self.epsilon.or(fallback.epsilon),
            plateau_ratio: self.plateau_ratio.or(fallback.plateau_ratio),
            cv: self.cv.or(fallback.cv),
            variant: self.variant.or(fallback.variant),
            seed: self.seed.or(fallback.seed),
            threads: self.threads.or(fallback.threads),
            moments: self.moments.or(fallback.moments),
            regularization: self.regularization.or(fallback.regularization),
            binarize: self.binarize.or(fallback.binarize),
            alpha_max: self.alpha_max.or(fallback.alpha_max),
            alpha_step: self.alpha_step.or(fallback.alpha_step),
            overlap_factor: self.overlap_factor.or(fallback.overlap_factor),
            residual_ratio: self.residual_ratio.or(fallback.residual_ratio),
            overlay: self.overlay.or(fallback.overlay),
            diagnostics: self.diagnostics.or(fallback.diagnostics),
        }
    }

    /// Resolves the pipeline configuration, reading the moments file if one
    /// is named, and validates it.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut em = EmConfig::default();
        em.sampling_ratio = self.ratio.unwrap_or(em.sampling_ratio);
        em.max_iterations = self.max_iter.unwrap_or(em.max_iterations);
        em.kld_threshold = self.kld.unwrap_or(em.kld_threshold);
        em.prune_epsilon = self.epsilon.unwrap_or(em.prune_epsilon);
        em.plateau_ratio = self.plateau_ratio.unwrap_or(em.plateau_ratio);
        em.counting_number = self.cv.unwrap_or(em.counting_number);
        em.variant = self.variant.map(Variant::from).unwrap_or(em.variant);
        em.seed = self.seed.unwrap_or(em.seed);
        em.message_passing.regularization = self.regularization.unwrap_or(em.message_passing.regularization);
        if let Some(path) = &self.moments {
            em.pairwise_moments = read_moments(path)?;
        }
        let mut init = InitConfig::default();
        init.alpha_max_deg = self.alpha_max.unwrap_or(init.alpha_max_deg);
        init.alpha_step_deg = self.alpha_step.unwrap_or(init.alpha_step_deg);
        init.overlap_factor = self.overlap_factor.unwrap_or(init.overlap_factor);
        init.residual_ratio = self.residual_ratio.unwrap_or(init.residual_ratio);
        em.validate()?;
        init.validate()?;
        Ok(RunConfig {
            em,
            init,
            threads: self.threads.unwrap_or(0),
            binarize: self.binarize,
            overlay: self.overlay.unwrap_or(false),
            diagnostics: self.diagnostics.unwrap_or(false),
        })
    }
}

/// Fully resolved settings of a `segment` run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub em: EmConfig,
    pub init: InitConfig,
    pub threads: usize,
    pub binarize: Option<u8>,
    pub overlay: bool,
    pub diagnostics: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_pipeline() {
        let run = Settings::default().resolve().unwrap();
        assert_eq!(run.em, EmConfig::default());
        assert_eq!(run.init, InitConfig::default());
        assert_eq!(run.threads, 0);
        assert!(!run.overlay && !run.diagnostics);
    }

    #[test]
    fn flags_override_file() {
        let file = Settings::parse_toml("ratio = 0.15\nmax_iter = 7\nvariant = \"rot\"\n").unwrap();
        let flags = Settings { ratio: Some(0.01), ..Default::default() };
        let run = flags.or(file).resolve().unwrap();
        assert_eq!(run.em.sampling_ratio, 0.01);
        assert_eq!(run.em.max_iterations, 7);
        assert_eq!(run.em.variant, Variant::RotationInvariant);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(Settings::parse_toml("rate = 0.1").is_err());
        assert!(Settings { ratio: Some(0.0), ..Default::default() }.resolve().is_err());
    }
}
