//! Depth-candidate generation for sphere sweeps: uniform coverage of the
//! valid range plus mono-guided candidates at Gaussian quantile-bin
//! midpoints around a per-pixel depth prior.
//!
//! The quantile machinery (erf, normal CDF/quantile) is implemented here
//! rather than pulled from a stats crate because the equal-mass bin
//! property of the offsets gates the whole sampler and is tested against
//! independent oracles.

use crate::panorama::EquirectImage;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SamplerError {
    #[error("probability {0} outside (0, 1)")]
    OutOfDomain(f64),
    #[error("invalid depth range: near {near} >= far {far}")]
    InvalidRange { near: f64, far: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
}

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Error function, accurate to a few ulp. Non-alternating power series for
/// small |x|, Lentz continued fraction for the complement beyond.
pub fn erf(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    let value = if ax < 3.0 {
        erf_series(ax)
    } else {
        1.0 - erfc_cf(ax)
    };
    if x < 0.0 {
        -value
    } else {
        value
    }
}

pub fn erfc(x: f64) -> f64 {
    if x >= 3.0 {
        erfc_cf(x)
    } else {
        1.0 - erf(x)
    }
}

// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n * x / (2n+1)!!
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= 2.0 * x2 / (2.0 * n as f64 + 1.0);
        let prev = sum;
        sum += term;
        if sum == prev {
            break;
        }
        debug_assert!(n < 200);
    }
    FRAC_2_SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm.
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    let mut k = 0.5;
    for _ in 0..200 {
        d = x + k * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + k / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
        k += 0.5;
    }
    (-x * x).exp() / (std::f64::consts::PI.sqrt() * f)
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        0.5 * (1.0 + erf(z / SQRT_2))
    } else {
        0.5 * erfc(-z / SQRT_2)
    }
}

/// Standard normal PDF.
pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile: Acklam's rational approximation refined by one
/// Newton step on the CDF, giving |CDF(z) - p| well under 1e-9.
pub fn std_normal_quantile(p: f64) -> Result<f64, SamplerError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SamplerError::OutOfDomain(p));
    }
    let z = acklam(p);
    // one Newton step on Phi(z) = p
    let err = std_normal_cdf(z) - p;
    Ok(z - err / std_normal_pdf(z))
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Probability mass covered by the search space `[-beta, beta]` in standard
/// deviations: `P* = erf(beta / sqrt(2))`.
pub fn coverage_mass(beta: f64) -> f64 {
    erf(beta / SQRT_2)
}

/// Quantile bin edges behind the offsets: edge k (k = 0..=n) of the
/// equal-mass partition of `[-beta, beta]`. Computed for the lower half and
/// mirrored, which is exact because the edge arguments pair to `p, 1 - p`.
pub fn quantile_edges(n_mono: usize, beta: f64) -> Vec<f64> {
    debug_assert!(n_mono >= 1 && beta > 0.0);
    let p_star = coverage_mass(beta);
    let n = n_mono;
    let mut edges = vec![0.0f64; n + 1];
    for k in 0..=n / 2 {
        let p = (k as f64 / n as f64) * p_star + (1.0 - p_star) / 2.0;
        let e = std_normal_quantile(p).expect("edge probabilities are interior");
        edges[k] = e;
        edges[n - k] = -e;
    }
    edges
}

/// Offsets `b_k` (k = 1..=n_mono): midpoints of the equal-probability-mass
/// quantile bins covering `[-beta, beta]`. Antisymmetric by construction;
/// `n_mono = 1` yields exactly `[0]`.
pub fn quantile_offsets(n_mono: usize, beta: f64) -> Vec<f64> {
    let edges = quantile_edges(n_mono, beta);
    (0..n_mono)
        .map(|k| 0.5 * (edges[k] + edges[k + 1]))
        .collect()
}

/// Per-pixel monocular spherical-depth prior with a global Gaussian spread.
#[derive(Debug, Clone)]
pub struct GaussianPrior {
    pub mu: EquirectImage,
    pub sigma: f64,
    pub beta: f64,
}

impl GaussianPrior {
    pub fn new(mu: EquirectImage, sigma: f64, beta: f64) -> Result<Self, SamplerError> {
        if mu.channels() != 1 {
            return Err(SamplerError::InvalidParam("prior must be single-channel"));
        }
        if mu.data().iter().any(|&v| !(v > 0.0)) {
            return Err(SamplerError::InvalidParam("prior depths must be positive"));
        }
        if !(sigma > 0.0) {
            return Err(SamplerError::InvalidParam("sigma must be positive"));
        }
        if !(beta > 0.0) {
            return Err(SamplerError::InvalidParam("beta must be positive"));
        }
        Ok(GaussianPrior { mu, sigma, beta })
    }
}

/// Depth candidates `mu_{u,v} + b_k * sigma` around the prior at pixel
/// `(col, row)`, clamped into `[near, far]`.
pub fn mono_candidates(
    prior: &GaussianPrior,
    col: usize,
    row: usize,
    n_mono: usize,
    near: f64,
    far: f64,
) -> Vec<f64> {
    let mu = prior.mu.pixel(col, row)[0] as f64;
    quantile_offsets(n_mono, prior.beta)
        .into_iter()
        .map(|b| (mu + b * prior.sigma).clamp(near, far))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthSpacing {
    /// Bin midpoints linear in depth (the literal reading of uniform
    /// sampling).
    Linear,
    /// Bin midpoints uniform in inverse depth; denser near the camera.
    InverseDepth,
}

/// Midpoints of `n_uni` equal-width bins over `[near, far]`.
pub fn uniform_candidates(
    near: f64,
    far: f64,
    n_uni: usize,
    spacing: DepthSpacing,
) -> Result<Vec<f64>, SamplerError> {
    if !(near > 0.0) || near >= far {
        return Err(SamplerError::InvalidRange { near, far });
    }
    if n_uni == 0 {
        return Err(SamplerError::InvalidParam("n_uni must be at least 1"));
    }
    let n = n_uni as f64;
    Ok(match spacing {
        DepthSpacing::Linear => {
            let width = (far - near) / n;
            (0..n_uni)
                .map(|i| near + (i as f64 + 0.5) * width)
                .collect()
        }
        DepthSpacing::InverseDepth => {
            let inv_near = 1.0 / near;
            let inv_far = 1.0 / far;
            let width = (inv_far - inv_near) / n;
            (0..n_uni)
                .map(|i| 1.0 / (inv_near + (i as f64 + 0.5) * width))
                .collect()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateSource {
    Uniform,
    Mono,
}

/// Strictly ascending per-pixel depth hypotheses with provenance tags.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthCandidates {
    pub t: Vec<f64>,
    pub source: Vec<CandidateSource>,
}

impl DepthCandidates {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Sorted union of uniform and mono candidates; exact duplicates are nudged
/// up by 1e-6 m so the result stays strictly ascending.
pub fn merge_candidates(uniform: &[f64], mono: &[f64]) -> DepthCandidates {
    let mut tagged: Vec<(f64, CandidateSource)> = uniform
        .iter()
        .map(|&t| (t, CandidateSource::Uniform))
        .chain(mono.iter().map(|&t| (t, CandidateSource::Mono)))
        .collect();
    tagged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for i in 1..tagged.len() {
        if tagged[i].0 <= tagged[i - 1].0 {
            tagged[i].0 = tagged[i - 1].0 + 1e-6;
        }
    }
    DepthCandidates {
        t: tagged.iter().map(|&(t, _)| t).collect(),
        source: tagged.iter().map(|&(_, s)| s).collect(),
    }
}

/// Sweep configuration shared by every pixel of a cost volume.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SweepConfig {
    pub near: f64,
    pub far: f64,
    pub n_uni: usize,
    pub n_mono: usize,
    /// Gaussian prior spread in meters (only used when `n_mono > 0`).
    pub sigma: f64,
    pub beta: f64,
    pub spacing: DepthSpacing,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            near: 0.1,
            far: 10.0,
            n_uni: 59,
            n_mono: 5,
            sigma: 0.5,
            beta: 3.0,
            spacing: DepthSpacing::Linear,
        }
    }
}

impl SweepConfig {
    pub fn total(&self) -> usize {
        self.n_uni + self.n_mono
    }
}

/// Per-pixel candidate depths for a whole `h x w` sweep, depths stored
/// row-major with `d` values per pixel.
#[derive(Debug, Clone)]
pub struct CandidateGrid {
    pub h: usize,
    pub w: usize,
    pub d: usize,
    t: Vec<f64>,
}

impl CandidateGrid {
    pub fn depths(&self, col: usize, row: usize) -> &[f64] {
        let off = (row * self.w + col) * self.d;
        &self.t[off..off + self.d]
    }

    /// Builds a grid from explicit per-pixel depth lists (row-major, `d`
    /// strictly ascending values per pixel).
    pub fn from_depths(h: usize, w: usize, d: usize, t: Vec<f64>) -> Result<Self, SamplerError> {
        if t.len() != h * w * d || d == 0 {
            return Err(SamplerError::InvalidParam("depth grid length mismatch"));
        }
        for px in t.chunks(d) {
            if px.windows(2).any(|p| p[1] <= p[0]) {
                return Err(SamplerError::InvalidParam(
                    "per-pixel depths must be strictly ascending",
                ));
            }
        }
        Ok(CandidateGrid { h, w, d, t })
    }
}

/// Builds the candidate grid: shared uniform sweep plus per-pixel
/// mono-guided candidates when a prior is supplied.
pub fn candidate_grid(
    cfg: &SweepConfig,
    prior: Option<&GaussianPrior>,
    h: usize,
    w: usize,
) -> Result<CandidateGrid, SamplerError> {
    let uniform = if cfg.n_uni > 0 {
        uniform_candidates(cfg.near, cfg.far, cfg.n_uni, cfg.spacing)?
    } else {
        Vec::new()
    };
    let d = cfg.total();
    if d == 0 {
        return Err(SamplerError::InvalidParam("no candidates requested"));
    }
    let mut t = Vec::with_capacity(h * w * d);
    match (cfg.n_mono, prior) {
        (0, _) => {
            let merged = merge_candidates(&uniform, &[]);
            for _ in 0..h * w {
                t.extend_from_slice(&merged.t);
            }
        }
        (_, None) => {
            return Err(SamplerError::InvalidParam(
                "mono candidates require a depth prior",
            ))
        }
        (n_mono, Some(prior)) => {
            if prior.mu.height() != h || prior.mu.width() != w {
                return Err(SamplerError::InvalidParam("prior resolution mismatch"));
            }
            let offsets = quantile_offsets(n_mono, prior.beta);
            let mut mono = vec![0.0f64; n_mono];
            for row in 0..h {
                for col in 0..w {
                    let mu = prior.mu.pixel(col, row)[0] as f64;
                    for (k, &b) in offsets.iter().enumerate() {
                        mono[k] = (mu + b * prior.sigma).clamp(cfg.near, cfg.far);
                    }
                    t.extend_from_slice(&merge_candidates(&uniform, &mono).t);
                }
            }
        }
    }
    Ok(CandidateGrid { h, w, d, t })
}
