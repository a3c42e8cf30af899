use super::SpdeError;
use std::f64::consts::{LN_10, PI};

/// Below this time `Auto` uses the image sum. Up to here seven images are
/// exact in double precision, and above it the series has no cancellation.
pub const IMAGE_SWITCH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    #[default]
    Auto,
    /// Fixed number of cosine terms, series form at every `t`.
    Terms(usize),
    /// Gaussian image sum over seven periods; accurate for short times.
    Images,
}

fn series(t: f64, x: f64, k_max: usize) -> f64 {
    let mut s = 0.0;
    for k in 1..=k_max {
        let kf = k as f64;
        s += (-kf * kf * t).exp() * (kf * x).cos();
    }
    1.0 / (2.0 * PI) + s / PI
}

fn image_sum(t: f64, x: f64) -> f64 {
    let norm = (4.0 * PI * t).sqrt();
    (-3..=3)
        .map(|j: i32| {
            let y = x - 2.0 * PI * j as f64;
            (-y * y / (4.0 * t)).exp()
        })
        .sum::<f64>()
        / norm
}

/// Number of series terms with `e^{-K^2 t} < 1e-16`.
pub(crate) fn auto_terms(t: f64) -> usize {
    (16.0 * LN_10 / t).sqrt().ceil() as usize + 1
}

/// Periodic heat kernel on `[-pi, pi]`.
pub fn heat_kernel(t: f64, x: f64, truncation: Truncation) -> Result<f64, SpdeError> {
    if !(t > 0.0) {
        return Err(SpdeError::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    Ok(match truncation {
        Truncation::Terms(k) => series(t, x, k),
        Truncation::Images => image_sum(t, x),
        Truncation::Auto if t < IMAGE_SWITCH => image_sum(t, x),
        Truncation::Auto => series(t, x, auto_terms(t)),
    })
}

/// `sup_t sqrt(t) max_x G(t, x)` over a log grid of `t` in `[1e-6, 1]`.
pub fn kernel_sup_constant() -> f64 {
    crate::numerics::log_space(1e-6, 1.0, 241)
        .into_iter()
        .map(|t| t.sqrt() * heat_kernel(t, 0.0, Truncation::Auto).unwrap())
        .fold(0.0, f64::max)
}
