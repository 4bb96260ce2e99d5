//! Occlusion/visibility along rays as mixtures of logistic CDFs, and the
//! analytic construction of mixture parameters from an estimated spherical
//! depth. The construction stands in for a learned decoder and is the
//! largest modeling substitution in this toolkit: a sharp surface component
//! at 0.95*depth plus a wider uncertainty tail at 1.05*depth.

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum VisibilityError {
    #[error("invalid mixture parameter: {0}")]
    InvalidParam(&'static str),
}

/// Occlusion CDF `o(t) = sum_k m_k * S((t - mu_k) / sigma_k)` with logistic
/// components; `v(t) = 1 - o(t)` is the visibility.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticMixture {
    mu: Vec<f64>,
    sigma: Vec<f64>,
    m: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LogisticMixture {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>, m: Vec<f64>) -> Result<Self, VisibilityError> {
        if mu.is_empty() || mu.len() != sigma.len() || mu.len() != m.len() {
            return Err(VisibilityError::InvalidParam("component count"));
        }
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(VisibilityError::InvalidParam("scale must be positive"));
        }
        if m.iter().any(|&w| !(w >= 0.0)) {
            return Err(VisibilityError::InvalidParam("weights must be non-negative"));
        }
        let sum: f64 = m.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(VisibilityError::InvalidParam("weights must sum to 1"));
        }
        Ok(LogisticMixture { mu, sigma, m })
    }

    pub fn components(&self) -> usize {
        self.mu.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.mu
    }
    pub fn scales(&self) -> &[f64] {
        &self.sigma
    }
    pub fn weights(&self) -> &[f64] {
        &self.m
    }

    /// Probability that a point at depth `t` is occluded; nondecreasing in t.
    pub fn occlusion_prob(&self, t: f64) -> f64 {
        let mut o = 0.0;
        for k in 0..self.mu.len() {
            o += self.m[k] * sigmoid((t - self.mu[k]) / self.sigma[k]);
        }
        o
    }

    /// `v(t) = 1 - o(t)`.
    pub fn visibility(&self, t: f64) -> f64 {
        1.0 - self.occlusion_prob(t)
    }

    /// Occlusion mass accumulated over `[t0, t1]`; non-negative for ordered
    /// bounds because the CDF is monotone.
    pub fn interval_mass(&self, t0: f64, t1: f64) -> f64 {
        (self.occlusion_prob(t1) - self.occlusion_prob(t0)).max(0.0)
    }

    /// Mixture-weighted mean of the component scales.
    pub fn mean_scale(&self) -> f64 {
        self.m
            .iter()
            .zip(&self.sigma)
            .map(|(&m, &s)| m * s)
            .sum()
    }
}

/// Builds the analytic occlusion mixture for a surface at `depth`.
///
/// `n_l = 1` places a single logistic at the depth; `n_l = 2` splits into a
/// sharp surface component (weight 0.8, scale `bandwidth`) slightly in front
/// and an uncertainty tail (weight 0.2, scale `3 * bandwidth`) slightly
/// behind, at `depth * (1 -/+ 0.05)`.
pub fn mixture_from_depth(
    depth: f64,
    bandwidth: f64,
    n_l: usize,
) -> Result<LogisticMixture, VisibilityError> {
    if !(depth > 0.0) {
        return Err(VisibilityError::InvalidParam("depth must be positive"));
    }
    if !(bandwidth > 0.0) {
        return Err(VisibilityError::InvalidParam("bandwidth must be positive"));
    }
    match n_l {
        1 => LogisticMixture::new(vec![depth], vec![bandwidth], vec![1.0]),
        2 => LogisticMixture::new(
            vec![depth * 0.95, depth * 1.05],
            vec![bandwidth, 3.0 * bandwidth],
            vec![0.8, 0.2],
        ),
        _ => Err(VisibilityError::InvalidParam("n_l must be 1 or 2")),
    }
}

/// Visible probability of a sample at depth `t_i` for the view owning `mix`.
pub fn sample_visibility(mix: &LogisticMixture, t_i: f64) -> f64 {
    mix.visibility(t_i)
}
