use serde::{Deserialize, Serialize};

/// Natural cubic spline through a strictly increasing set of knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(knots: &[[f64; 2]]) -> Result<Self, String> {
        if knots.len() < 2 {
            return Err("a table needs at least two knots".into());
        }
        let xs: Vec<f64> = knots.iter().map(|k| k[0]).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k[1]).collect();
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err("table abscissae must be strictly increasing".into());
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err("table entries must be finite".into());
        }
        let n = xs.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives.
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut upper = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 1..n - 1 {
                let h0 = xs[i] - xs[i - 1];
                let h1 = xs[i + 1] - xs[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
            }
            for i in 1..k {
                let lower = xs[i + 1] - xs[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; k];
            sol[k - 1] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
            }
            m[1..n - 1].copy_from_slice(&sol);
        }
        Ok(Self { xs, ys, m })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn knots(&self) -> Vec<[f64; 2]> {
        self.xs.iter().zip(&self.ys).map(|(&x, &y)| [x, y]).collect()
    }

    /// Value or derivative of order 0..=2; `None` outside the table.
    pub fn eval(&self, x: f64, order: u8) -> Option<f64> {
        let (lo, hi) = self.range();
        if !(x >= lo && x <= hi) {
            return None;
        }
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => 0,
            p => (p - 1).min(self.xs.len() - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        Some(match order {
            0 => a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0,
            1 => (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1,
            _ => a * m0 + b * m1,
        })
    }
}
