//! CLI error taxonomy; the process exit code distinguishes configuration,
//! IO and numerical failures.

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<panosynth_core::io::IoError> for CliError {
    fn from(e: panosynth_core::io::IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<panosynth_core::scene_oracle::OracleError> for CliError {
    fn from(e: panosynth_core::scene_oracle::OracleError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<panosynth_core::mvs::MvsError> for CliError {
    fn from(e: panosynth_core::mvs::MvsError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<panosynth_core::depth_sampler::SamplerError> for CliError {
    fn from(e: panosynth_core::depth_sampler::SamplerError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<panosynth_core::volume_render::RenderError> for CliError {
    fn from(e: panosynth_core::volume_render::RenderError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<panosynth_core::panorama::ImageError> for CliError {
    fn from(e: panosynth_core::panorama::ImageError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

/// Exit-code-4 guard: every float leaving the pipeline must be finite.
pub fn ensure_finite(
    img: &panosynth_core::panorama::EquirectImage,
    what: &str,
) -> Result<(), CliError> {
    if img.data().iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numerical(format!("{what} contains NaN/Inf")));
    }
    Ok(())
}
