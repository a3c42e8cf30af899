use super::DiagnosticsError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Triple,
    Third,
}

/// Passage of the sup norm from level `3^from` to `3^to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoEvent {
    pub time: f64,
    pub from: i32,
    pub to: i32,
    pub direction: Direction,
}

fn level_of(y: f64) -> i32 {
    if y <= 1.0 {
        0
    } else {
        // nudge so exact powers of three land on their own level
        ((y.ln() / 3f64.ln()) + 1e-12).floor() as i32
    }
}

/// Crossing time of `level` on the segment `(t0, y0) -> (t1, y1)`.
fn crossing(t0: f64, y0: f64, t1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return t1;
    }
    t0 + (t1 - t0) * ((level - y0) / (y1 - y0)).clamp(0.0, 1.0)
}

/// Ties between an upward and a downward crossing resolve to a third.
pub(crate) fn pick(t_up: Option<f64>, t_down: Option<f64>) -> Option<Direction> {
    match (t_up, t_down) {
        (None, None) => None,
        (Some(_), None) => Some(Direction::Triple),
        (None, Some(_)) => Some(Direction::Third),
        (Some(u), Some(d)) => Some(if d <= u { Direction::Third } else { Direction::Triple }),
    }
}

/// Incremental version of [`tripling_sequence`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TriplingTracker {
    level: Option<i32>,
    last: (f64, f64),
    events: Vec<RhoEvent>,
}

impl TriplingTracker {
    pub fn push(&mut self, t: f64, y: f64) {
        let Some(mut m) = self.level else {
            self.level = Some(level_of(y));
            self.last = (t, y);
            return;
        };
        let (mut t0, mut y0) = self.last;
        loop {
            let up = 3f64.powi(m + 1);
            let down = (m >= 1).then(|| 3f64.powi(m - 1));
            let t_up = (y >= up && y0 < up).then(|| crossing(t0, y0, t, y, up));
            let t_down = down.filter(|&d| y <= d && y0 > d).map(|d| crossing(t0, y0, t, y, d));
            match pick(t_up, t_down) {
                None => break,
                Some(Direction::Triple) => {
                    let tc = t_up.unwrap();
                    self.events.push(RhoEvent { time: tc, from: m, to: m + 1, direction: Direction::Triple });
                    m += 1;
                    (t0, y0) = (tc, up);
                }
                Some(Direction::Third) => {
                    let tc = t_down.unwrap();
                    self.events.push(RhoEvent { time: tc, from: m, to: m - 1, direction: Direction::Third });
                    m -= 1;
                    (t0, y0) = (tc, down.unwrap());
                }
            }
        }
        self.level = Some(m);
        self.last = (t, y);
    }

    pub fn events(&self) -> &[RhoEvent] {
        &self.events
    }

    pub fn current_level(&self) -> Option<i32> {
        self.level
    }
}

/// Passages between adjacent levels `3^m` of a sampled sup-norm series.
///
/// Tracking starts at the level of the first sample (at least `3^0`); from
/// level 0 only upward passages exist. Events leaving a level below `m0` are
/// dropped.
pub fn tripling_sequence(series: &[(f64, f64)], m0: i32) -> Result<Vec<RhoEvent>, DiagnosticsError> {
    if let Some(&(t, y)) = series.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(DiagnosticsError::Precondition(format!("sup norm must be positive, got {y} at t = {t}")));
    }
    let mut tr = TriplingTracker::default();
    for &(t, y) in series {
        tr.push(t, y);
    }
    Ok(tr.events.into_iter().filter(|e| e.from >= m0).collect())
}

/// Number of upward passages starting from level `m0` or above.
pub fn count_triplings(events: &[RhoEvent], m0: i32) -> usize {
    events.iter().filter(|e| e.direction == Direction::Triple && e.from >= m0).count()
}
