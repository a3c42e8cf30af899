use super::tripling::{RhoEvent, TriplingTracker};
use crate::spde::FieldState;
use serde::{Deserialize, Serialize};

/// Time of a first crossing, interpolated between samples, and the index of
/// the first sample beyond the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub time: f64,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelHit {
    pub level: f64,
    pub time: f64,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Classification {
    SurvivedToHorizon,
    Exploded { t: f64 },
    MinHit { t: f64 },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingParams {
    /// L1 level `M` of `tau^1_M`.
    pub m: Option<f64>,
    /// Level `eps` of `tau^inf_eps`.
    pub eps: Option<f64>,
    pub u_cap: f64,
    /// Sup-norm levels `n` tracked by `tau^infty_n`.
    pub levels: Vec<f64>,
    pub halt_on_min: bool,
    /// Localization level `n`: `tau^infty_n` counts as a stopping event.
    #[serde(default)]
    pub localization: Option<f64>,
}

impl StoppingParams {
    /// Levels `3^m` for `m = 0, 1, ...` up to the first one at or above `u_cap`.
    pub fn new(u_cap: f64) -> Self {
        let mut levels = vec![];
        let mut l = 1.0;
        while l < u_cap * 3.0 {
            levels.push(l);
            l *= 3.0;
        }
        Self { m: None, eps: None, u_cap, levels, halt_on_min: false, localization: None }
    }

    pub fn with_l1(mut self, m: f64) -> Self {
        self.m = Some(m);
        self
    }

    pub fn with_localization(mut self, n: f64) -> Self {
        self.localization = Some(n);
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
struct Sample {
    t: f64,
    l1: f64,
    linf: f64,
    min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingRecord {
    pub tau_inf_eps: Option<Hit>,
    pub tau_l1_m: Option<Hit>,
    pub tau_infty_hits: Vec<LevelHit>,
    /// First time `L∞ > n` at the localization level.
    #[serde(default)]
    pub tau_infty_n: Option<Hit>,
    pub tripling: TriplingTracker,
    pub classification: Classification,
    samples: usize,
    last: Option<Sample>,
}

impl Default for StoppingRecord {
    fn default() -> Self {
        Self {
            tau_inf_eps: None,
            tau_l1_m: None,
            tau_infty_hits: vec![],
            tau_infty_n: None,
            tripling: TriplingTracker::default(),
            classification: Classification::Inconclusive,
            samples: 0,
            last: None,
        }
    }
}

fn interp(t0: f64, y0: f64, t1: f64, y1: f64, level: f64) -> f64 {
    if !y1.is_finite() || y1 == y0 {
        return t1;
    }
    t0 + (t1 - t0) * ((level - y0) / (y1 - y0)).clamp(0.0, 1.0)
}

impl StoppingRecord {
    pub fn rho_sequence(&self) -> &[RhoEvent] {
        self.tripling.events()
    }

    pub fn is_halted(&self) -> bool {
        matches!(self.classification, Classification::Exploded { .. } | Classification::MinHit { .. })
    }

    /// Earliest of the recorded `tau^1_M`, `tau^inf_eps`, `tau^infty_n` and
    /// explosion times.
    pub fn first_stop(&self) -> Option<f64> {
        let exploded = match self.classification {
            Classification::Exploded { t } => Some(t),
            _ => None,
        };
        [self.tau_l1_m.map(|h| h.time), self.tau_inf_eps.map(|h| h.time), self.tau_infty_n.map(|h| h.time), exploded]
            .into_iter()
            .flatten()
            .reduce(f64::min)
    }

    /// Records first crossings at a new sample. Times already recorded are
    /// never changed and samples after a halt are ignored.
    pub fn observe(&mut self, t: f64, l1: f64, linf: f64, min: f64, p: &StoppingParams) {
        if self.is_halted() {
            return;
        }
        let idx = self.samples;
        self.samples += 1;
        let cur = Sample { t, l1, linf, min };
        let prev = self.last.unwrap_or(cur);
        if self.tau_l1_m.is_none() {
            if let Some(m) = p.m {
                if l1 >= m || !l1.is_finite() {
                    self.tau_l1_m = Some(Hit { time: interp(prev.t, prev.l1, t, l1, m), index: idx });
                }
            }
        }
        if self.tau_inf_eps.is_none() {
            if let Some(e) = p.eps {
                if min < e {
                    let time = interp(prev.t, prev.min, t, min, e);
                    self.tau_inf_eps = Some(Hit { time, index: idx });
                    if p.halt_on_min {
                        self.classification = Classification::MinHit { t: time };
                    }
                }
            }
        }
        if self.tau_infty_n.is_none() {
            if let Some(n) = p.localization {
                if linf > n || linf.is_nan() {
                    self.tau_infty_n = Some(Hit { time: interp(prev.t, prev.linf, t, linf, n), index: idx });
                }
            }
        }
        let reached = self.tau_infty_hits.len();
        for &level in p.levels.iter().skip(reached) {
            if linf > level || linf.is_nan() {
                self.tau_infty_hits.push(LevelHit { level, time: interp(prev.t, prev.linf, t, linf, level), index: idx });
            } else {
                break;
            }
        }
        if linf.is_finite() {
            self.tripling.push(t, linf.max(f64::MIN_POSITIVE));
        }
        if (linf > p.u_cap || !linf.is_finite()) && !self.is_halted() {
            self.classification = Classification::Exploded { t: interp(prev.t, prev.linf, t, linf, p.u_cap) };
        }
        self.last = Some(cur);
    }

    /// Marks a path that reached the horizon without halting.
    pub fn finish(&mut self) {
        if !self.is_halted() {
            self.classification = Classification::SurvivedToHorizon;
        }
    }
}

pub fn update_stopping(mut record: StoppingRecord, state: &FieldState, p: &StoppingParams) -> StoppingRecord {
    record.observe(state.t, state.l1(), state.linf(), state.min(), p);
    record
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(linf: &[f64], l1: &[f64], min: &[f64], p: &StoppingParams) -> StoppingRecord {
        let mut r = StoppingRecord::default();
        for i in 0..linf.len() {
            r.observe(i as f64, l1[i], linf[i], min[i], p);
        }
        r
    }

    #[test]
    fn sup_level_hits() {
        let p = StoppingParams::new(1e6);
        let r = run(&[1.0, 2.0, 5.0, 2.0], &[1.0; 4], &[1.0; 4], &p);
        let three = r.tau_infty_hits.iter().find(|h| h.level == 3.0).unwrap();
        assert_eq!(three.index, 2);
        assert!((three.time - (1.0 + 1.0 / 3.0)).abs() < 1e-15);
        assert_eq!(r.tau_infty_hits.len(), 2);
    }

    #[test]
    fn l1_and_min_hits() {
        let p = StoppingParams::new(1e6).with_l1(5.0).with_eps(0.1);
        let r = run(&[1.0; 3], &[1.0, 4.0, 9.0], &[1.0, 0.5, 0.05], &p);
        assert_eq!(r.tau_l1_m.unwrap().index, 2);
        assert!((r.tau_l1_m.unwrap().time - 1.2).abs() < 1e-15);
        assert_eq!(r.tau_inf_eps.unwrap().index, 2);
    }

    #[test]
    fn explosion_is_recorded_once() {
        let p = StoppingParams::new(100.0);
        let mut r = run(&[1.0, 50.0, 150.0, 1.0], &[1.0; 4], &[1.0; 4], &p);
        assert_eq!(r.classification, Classification::Exploded { t: 1.5 });
        r.finish();
        assert_eq!(r.classification, Classification::Exploded { t: 1.5 });
        assert_eq!(r.first_stop(), Some(1.5));
    }
}
