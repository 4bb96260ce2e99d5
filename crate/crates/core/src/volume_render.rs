//! NeRF-style compositing along spherical rays: alpha from density, blending
//! weights, color/depth composition, stratified and importance sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RenderError {
    #[error("invalid sample range: near {near} >= far {far}")]
    InvalidRange { near: f64, far: f64 },
    #[error("ray samples must be strictly increasing in t")]
    NotAscending,
    #[error("densities must be non-negative")]
    NegativeDensity,
    #[error("sample arrays have mismatched lengths")]
    LengthMismatch,
    #[error("no source views")]
    NoSources,
}

/// Samples along one ray: strictly ascending depths, non-negative densities
/// (1/meter) and per-sample colors in [0, 1].
#[derive(Debug, Clone)]
pub struct RaySamples {
    pub t: Vec<f64>,
    pub sigma: Vec<f64>,
    pub color: Vec<[f64; 3]>,
}

impl RaySamples {
    pub fn new(t: Vec<f64>, sigma: Vec<f64>, color: Vec<[f64; 3]>) -> Result<Self, RenderError> {
        if t.len() != sigma.len() || t.len() != color.len() || t.is_empty() {
            return Err(RenderError::LengthMismatch);
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(RenderError::NotAscending);
        }
        if sigma.iter().any(|&s| s < 0.0) {
            return Err(RenderError::NegativeDensity);
        }
        Ok(RaySamples { t, sigma, color })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderResult {
    pub color: [f64; 3],
    /// Expected termination depth, sum(w_i t_i)/sum(w_i); 0 when nothing
    /// was hit.
    pub depth: f64,
    pub weights: Vec<f64>,
    /// 1 - sum(w_i): probability mass that escaped past the far cap.
    pub transmittance_residual: f64,
}

/// `alpha = 1 - exp(-sigma * delta)`, clamped strictly below 1 so log-space
/// users never divide by zero.
pub fn alpha_from_density(sigma: f64, delta: f64) -> f64 {
    debug_assert!(sigma >= 0.0 && delta >= 0.0);
    let a = -(-sigma * delta).exp_m1();
    a.min(1.0 - 1e-15)
}

/// Interval lengths `delta_i = t_{i+1} - t_i`, with the last interval
/// extending to `far_cap` (zero if `t_N` already passed it).
pub fn sample_deltas(t: &[f64], far_cap: f64) -> Vec<f64> {
    let n = t.len();
    let mut deltas = Vec::with_capacity(n);
    for i in 0..n {
        let hi = if i + 1 < n { t[i + 1] } else { far_cap.max(t[i]) };
        deltas.push(hi - t[i]);
    }
    deltas
}

/// `w_i = prod_{k<i}(1 - alpha_k) * alpha_i` for an explicit alpha array.
pub fn blend_weights_from_alphas(alphas: &[f64]) -> Vec<f64> {
    let mut transmittance = 1.0;
    alphas
        .iter()
        .map(|&a| {
            let w = transmittance * a;
            transmittance *= 1.0 - a;
            w
        })
        .collect()
}

/// Blending weights of `samples` with the terminal interval capped at
/// `far_cap`.
pub fn blend_weights(samples: &RaySamples, far_cap: f64) -> Vec<f64> {
    let deltas = sample_deltas(&samples.t, far_cap);
    let alphas: Vec<f64> = samples
        .sigma
        .iter()
        .zip(&deltas)
        .map(|(&s, &d)| alpha_from_density(s, d))
        .collect();
    blend_weights_from_alphas(&alphas)
}

/// Composites color and expected depth from the blending weights. The
/// residual transmittance composites against black and is reported
/// separately.
pub fn composite(samples: &RaySamples, far_cap: f64) -> RenderResult {
    let weights = blend_weights(samples, far_cap);
    composite_with_weights(samples, weights)
}

pub fn composite_with_weights(samples: &RaySamples, weights: Vec<f64>) -> RenderResult {
    let mut color = [0.0; 3];
    let mut depth_acc = 0.0;
    let mut w_sum = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        for k in 0..3 {
            color[k] += w * samples.color[i][k];
        }
        depth_acc += w * samples.t[i];
        w_sum += w;
    }
    let depth = if w_sum > 0.0 { depth_acc / w_sum } else { 0.0 };
    RenderResult {
        color,
        depth,
        weights,
        transmittance_residual: (1.0 - w_sum).clamp(0.0, 1.0),
    }
}

/// One sample per equal-width bin of `[near, far]`; jittered uniformly
/// within each bin when an RNG is supplied, bin midpoints otherwise.
pub fn stratified_sample(
    near: f64,
    far: f64,
    n: usize,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<Vec<f64>, RenderError> {
    if !(near > 0.0) || near >= far {
        return Err(RenderError::InvalidRange { near, far });
    }
    debug_assert!(n >= 1);
    let width = (far - near) / n as f64;
    let mut out = Vec::with_capacity(n);
    match rng {
        Some(rng) => {
            for i in 0..n {
                out.push(near + (i as f64 + rng.gen::<f64>()) * width);
            }
        }
        None => {
            for i in 0..n {
                out.push(near + (i as f64 + 0.5) * width);
            }
        }
    }
    Ok(out)
}

/// Inverse-CDF resampling from the piecewise-constant PDF proportional to
/// `coarse_weights` (+ a small floor so all-zero weights stay valid). Bin i
/// spans `[t_i, t_{i+1})`, the last bin ends at `far_cap`. Output is sorted;
/// callers merge it with the coarse samples for the fine pass.
pub fn importance_resample(
    coarse_t: &[f64],
    coarse_weights: &[f64],
    n_fine: usize,
    far_cap: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    const PDF_FLOOR: f64 = 1e-5;
    debug_assert_eq!(coarse_t.len(), coarse_weights.len());
    let n = coarse_t.len();
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for &w in coarse_weights {
        acc += w.max(0.0) + PDF_FLOOR;
        cdf.push(acc);
    }
    let total = acc;

    let mut out = Vec::with_capacity(n_fine);
    for _ in 0..n_fine {
        let u = rng.gen::<f64>() * total;
        // first bin whose upper cdf exceeds u
        let mut idx = match cdf.binary_search_by(|p| p.partial_cmp(&u).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        idx = idx.min(n - 1);
        let lo = coarse_t[idx];
        let hi = if idx + 1 < n { coarse_t[idx + 1] } else { far_cap.max(lo) };
        let frac = (u - cdf[idx]) / (cdf[idx + 1] - cdf[idx]);
        out.push(lo + frac * (hi - lo));
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Sorted union of two ascending sample lists, nudging exact duplicates
/// apart so the result stays strictly ascending.
pub fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    all.sort_by(|x, y| x.partial_cmp(y).unwrap());
    for i in 1..all.len() {
        if all[i] <= all[i - 1] {
            all[i] = all[i - 1] + 1e-9;
        }
    }
    all
}
