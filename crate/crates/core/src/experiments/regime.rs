use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Amplitude below which the boundary case `beta + 1 = 2 gamma` is covered by
/// the non-explosion theorem: the case-(a) inequality certifies amplitudes up
/// to `1 / (4 pi)` for every `beta`.
pub const BOUNDARY_AMPLITUDE: f64 = 1.0 / (4.0 * PI);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Bounded noise: explosion with probability one.
    BgExplosive,
    Open,
    /// Covered by the non-explosion theorem.
    Thm1NonExplosive,
    /// Fast-growing noise: explosion with positive probability.
    MuellerExplosive,
}

impl Regime {
    /// Case split for `b = A u^beta`, `sigma = u^gamma`, `beta` in `(1, 2]`.
    pub fn annotate(beta: f64, gamma: f64, amplitude: f64) -> Option<Regime> {
        if !(beta > 1.0 && beta <= 2.0) || !(gamma >= 0.0) {
            return None;
        }
        let edge = (beta + 1.0) / 2.0;
        Some(if gamma == 0.0 {
            Regime::BgExplosive
        } else if gamma > 1.5 {
            Regime::MuellerExplosive
        } else if gamma > edge {
            Regime::Thm1NonExplosive
        } else if gamma == edge && amplitude.abs() < BOUNDARY_AMPLITUDE {
            Regime::Thm1NonExplosive
        } else {
            Regime::Open
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::BgExplosive => "bg-explosive",
            Regime::Open => "open",
            Regime::Thm1NonExplosive => "thm1-non-explosive",
            Regime::MuellerExplosive => "mueller-explosive",
        }
    }
}
