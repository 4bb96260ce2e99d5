//! Run configuration: a JSON key-value file with defaults for every key,
//! strict schema (unknown keys are rejected) and per-key CLI overrides.

use crate::error::CliError;
use panosynth_core::depth_sampler::DepthSpacing;
use panosynth_core::mvs::{DecodeMode, Descriptor};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Builtin scene name ("sphere-room", "occlusion-room") or a path to a
    /// scene description JSON.
    pub scene: String,
    pub height: usize,
    /// 0 means 2 * height.
    pub width: usize,
    /// Number of poses spread along the x axis (first/middle/last for 3).
    pub views: usize,
    /// First-to-last camera distance in meters.
    pub baseline: f64,
    /// Camera layout: "line" or "square" (four corners, `baseline` is the
    /// diagonal).
    pub layout: String,

    // sphere-sweep stereo
    pub descriptor: String,
    pub downsample4: bool,
    pub n_uni: usize,
    pub n_mono: usize,
    pub sigma: f64,
    pub beta: f64,
    pub near: f64,
    pub far: f64,
    pub spacing: String,
    pub aggregate_radius: usize,
    pub decode: String,
    pub tau: f64,
    pub prior: String,
    pub prior_relative_sigma: f64,
    pub prior_additive_sigma: f64,
    pub dump_cost_volume: bool,

    // renderer
    pub n_coarse: usize,
    pub n_fine: usize,
    pub kappa: f64,
    pub n_l: usize,
    pub visibility_bandwidth: f64,
    pub depth_source: String,
    pub target: String,
    pub above_offset: f64,

    // evaluation & run
    pub pole_mask: f64,
    pub seed: u64,
    pub out_dir: String,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scene: "sphere-room".into(),
            height: 128,
            width: 0,
            views: 3,
            baseline: 1.0,
            layout: "line".into(),
            descriptor: "zncc_patch".into(),
            downsample4: false,
            n_uni: 59,
            n_mono: 5,
            sigma: 0.5,
            beta: 3.0,
            near: 0.1,
            far: 10.0,
            spacing: "linear".into(),
            aggregate_radius: 2,
            decode: "soft".into(),
            tau: 0.002,
            prior: "gt".into(),
            prior_relative_sigma: 0.0,
            prior_additive_sigma: 0.5,
            dump_cost_volume: false,
            n_coarse: 64,
            n_fine: 64,
            kappa: 50.0,
            n_l: 2,
            // half the uniform bin width of the default 64-candidate sweep
            visibility_bandwidth: 9.9 / 64.0 / 2.0,
            depth_source: "gt".into(),
            target: "middle".into(),
            above_offset: 0.25,
            pole_mask: 0.05,
            seed: 0,
            out_dir: "out".into(),
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.fill_derived();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fill_derived(&mut self) {
        if self.width == 0 {
            self.width = 2 * self.height;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |msg: String| Err(CliError::Config(msg));
        if self.height == 0 || self.width != 2 * self.height {
            return err(format!(
                "width must be 2*height (got {}x{})",
                self.height, self.width
            ));
        }
        if !(self.near > 0.0 && self.near < self.far) {
            return err(format!("need 0 < near < far (got {}..{})", self.near, self.far));
        }
        if self.n_uni + self.n_mono == 0 {
            return err("need at least one depth candidate".into());
        }
        if self.n_mono > 0 && !(self.sigma > 0.0 && self.beta > 0.0) {
            return err("mono-guided sampling needs positive sigma and beta".into());
        }
        self.parsed_descriptor()?;
        self.parsed_spacing()?;
        self.parsed_decode()?;
        match self.prior.as_str() {
            "gt" | "noisy" => {}
            other => return err(format!("unknown prior {other:?} (gt|noisy)")),
        }
        match self.depth_source.as_str() {
            "gt" | "mvs" => {}
            other => return err(format!("unknown depth_source {other:?} (gt|mvs)")),
        }
        match self.target.as_str() {
            "middle" | "identity" | "above" => {}
            other => return err(format!("unknown target {other:?} (middle|identity|above)")),
        }
        match self.layout.as_str() {
            "line" | "square" => {}
            other => return err(format!("unknown layout {other:?} (line|square)")),
        }
        if self.layout == "square" && self.views != 4 {
            return err("square layout requires views = 4".into());
        }
        if !(self.kappa > 0.0) {
            return err("kappa must be positive".into());
        }
        if !(1..=2).contains(&self.n_l) {
            return err("n_l must be 1 or 2".into());
        }
        if !(self.tau > 0.0) {
            return err("tau must be positive".into());
        }
        if !(0.0..0.5).contains(&self.pole_mask) {
            return err("pole_mask must be in [0, 0.5)".into());
        }
        if self.views == 0 {
            return err("need at least one view".into());
        }
        Ok(())
    }

    pub fn parsed_descriptor(&self) -> Result<Descriptor, CliError> {
        self.descriptor
            .parse()
            .map_err(|e| CliError::Config(format!("{e}")))
    }

    pub fn parsed_spacing(&self) -> Result<DepthSpacing, CliError> {
        match self.spacing.as_str() {
            "linear" => Ok(DepthSpacing::Linear),
            "inverse_depth" => Ok(DepthSpacing::InverseDepth),
            other => Err(CliError::Config(format!(
                "unknown spacing {other:?} (linear|inverse_depth)"
            ))),
        }
    }

    pub fn parsed_decode(&self) -> Result<DecodeMode, CliError> {
        match self.decode.as_str() {
            "wta" => Ok(DecodeMode::WinnerTakeAll),
            "soft" => Ok(DecodeMode::Soft { tau: self.tau }),
            other => Err(CliError::Config(format!("unknown decode {other:?} (soft|wta)"))),
        }
    }

    pub fn sweep(&self) -> panosynth_core::depth_sampler::SweepConfig {
        panosynth_core::depth_sampler::SweepConfig {
            near: self.near,
            far: self.far,
            n_uni: self.n_uni,
            n_mono: self.n_mono,
            sigma: self.sigma,
            beta: self.beta,
            spacing: self.parsed_spacing().expect("validated"),
        }
    }

    pub fn render_config(&self) -> panosynth_core::renderer::RenderConfig {
        panosynth_core::renderer::RenderConfig {
            n_coarse: self.n_coarse,
            n_fine: self.n_fine,
            near: self.near,
            far: self.far,
            kappa: self.kappa,
            n_l: self.n_l,
            height: self.height,
            width: self.width,
        }
    }
}

/// Per-key CLI overrides; every RunConfig key has a flag.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    #[arg(long, global = true)]
    pub scene: Option<String>,
    #[arg(long, global = true)]
    pub height: Option<usize>,
    #[arg(long, global = true)]
    pub width: Option<usize>,
    #[arg(long, global = true)]
    pub views: Option<usize>,
    #[arg(long, global = true)]
    pub baseline: Option<f64>,
    #[arg(long, global = true)]
    pub layout: Option<String>,
    #[arg(long, global = true)]
    pub descriptor: Option<String>,
    #[arg(long, global = true)]
    pub downsample4: Option<bool>,
    #[arg(long, global = true)]
    pub n_uni: Option<usize>,
    #[arg(long, global = true)]
    pub n_mono: Option<usize>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub near: Option<f64>,
    #[arg(long, global = true)]
    pub far: Option<f64>,
    #[arg(long, global = true)]
    pub spacing: Option<String>,
    #[arg(long, global = true)]
    pub aggregate_radius: Option<usize>,
    #[arg(long, global = true)]
    pub decode: Option<String>,
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    #[arg(long, global = true)]
    pub prior: Option<String>,
    #[arg(long, global = true)]
    pub prior_relative_sigma: Option<f64>,
    #[arg(long, global = true)]
    pub prior_additive_sigma: Option<f64>,
    #[arg(long, global = true)]
    pub dump_cost_volume: Option<bool>,
    #[arg(long, global = true)]
    pub n_coarse: Option<usize>,
    #[arg(long, global = true)]
    pub n_fine: Option<usize>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    #[arg(long, global = true)]
    pub n_l: Option<usize>,
    #[arg(long, global = true)]
    pub visibility_bandwidth: Option<f64>,
    #[arg(long, global = true)]
    pub depth_source: Option<String>,
    #[arg(long, global = true)]
    pub target: Option<String>,
    #[arg(long, global = true)]
    pub above_offset: Option<f64>,
    #[arg(long, global = true)]
    pub pole_mask: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "DIR", global = true)]
    pub out: Option<String>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = &self.$field { cfg.$target = v.clone(); })*
            };
        }
        set! {
            scene => scene, layout => layout, descriptor => descriptor,
            spacing => spacing, decode => decode, prior => prior,
            depth_source => depth_source, target => target, out => out_dir,
        }
        macro_rules! setc {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        setc! {
            height => height, width => width, views => views,
            baseline => baseline, downsample4 => downsample4, n_uni => n_uni,
            n_mono => n_mono, sigma => sigma, beta => beta, near => near,
            far => far, aggregate_radius => aggregate_radius, tau => tau,
            prior_relative_sigma => prior_relative_sigma,
            prior_additive_sigma => prior_additive_sigma,
            dump_cost_volume => dump_cost_volume, n_coarse => n_coarse,
            n_fine => n_fine, kappa => kappa, n_l => n_l,
            visibility_bandwidth => visibility_bandwidth,
            above_offset => above_offset, pole_mask => pole_mask,
            seed => seed, threads => threads,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let mut cfg = RunConfig::default();
        cfg.fill_derived();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.width, 256);
        assert_eq!(cfg.n_uni + cfg.n_mono, 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let res: Result<RunConfig, _> = serde_json::from_str(r#"{"heigth": 64}"#);
        assert!(res.is_err());
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut cfg = RunConfig {
            near: 5.0,
            far: 1.0,
            ..RunConfig::default()
        };
        cfg.fill_derived();
        assert!(cfg.validate().is_err());

        let mut cfg = RunConfig {
            decode: "argmax".into(),
            ..RunConfig::default()
        };
        cfg.fill_derived();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::default();
        let ov = Overrides {
            seed: Some(9),
            n_uni: Some(64),
            n_mono: Some(0),
            out: Some("elsewhere".into()),
            ..Overrides::default()
        };
        ov.apply(&mut cfg);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.n_uni, 64);
        assert_eq!(cfg.n_mono, 0);
        assert_eq!(cfg.out_dir, "elsewhere");
    }
}
