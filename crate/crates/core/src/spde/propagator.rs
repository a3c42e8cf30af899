use super::{FieldState, Grid1D};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Linear part of one time step: the exact heat semigroup on Fourier modes,
/// or the implicit finite-difference resolvent `(I - dt L_h)^{-1}`.
pub enum Propagator {
    Spectral {
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        /// `e^{-k^2 s} / nx` per FFT bin.
        factors: Vec<f64>,
        buf: Vec<Complex64>,
        scratch: Vec<Complex64>,
    },
    Implicit(CyclicTridiagonal),
}

/// Signed wave number of FFT bin `j`.
pub(crate) fn wave_number(j: usize, nx: usize) -> f64 {
    if j <= nx / 2 {
        j as f64
    } else {
        j as f64 - nx as f64
    }
}

impl Propagator {
    pub fn spectral(grid: Grid1D, s: f64) -> Self {
        let nx = grid.nx();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nx);
        let inverse = planner.plan_fft_inverse(nx);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let factors = (0..nx)
            .map(|j| {
                let k = wave_number(j, nx);
                (-k * k * s).exp() / nx as f64
            })
            .collect();
        Propagator::Spectral {
            forward,
            inverse,
            factors,
            buf: vec![Complex64::new(0.0, 0.0); nx],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn implicit(grid: Grid1D, dt: f64) -> Self {
        let r = dt / (grid.dx() * grid.dx());
        Propagator::Implicit(CyclicTridiagonal::new(grid.nx(), 1.0 + 2.0 * r, -r))
    }

    pub fn apply(&mut self, values: &mut [f64]) {
        match self {
            Propagator::Spectral { forward, inverse, factors, buf, scratch } => {
                for (b, &v) in buf.iter_mut().zip(values.iter()) {
                    *b = Complex64::new(v, 0.0);
                }
                forward.process_with_scratch(buf, scratch);
                for (b, f) in buf.iter_mut().zip(factors.iter()) {
                    *b *= *f;
                }
                inverse.process_with_scratch(buf, scratch);
                for (v, b) in values.iter_mut().zip(buf.iter()) {
                    *v = b.re;
                }
            }
            Propagator::Implicit(solver) => solver.solve_in_place(values),
        }
    }
}

/// Circular convolution of the field with the heat kernel at time `s`.
pub fn semigroup_apply(field: &FieldState, s: f64) -> FieldState {
    let mut values = field.values().to_vec();
    Propagator::spectral(field.grid(), s).apply(&mut values);
    FieldState::new(field.t + s, values)
}

/// Symmetric cyclic tridiagonal system with constant diagonal `d` and
/// off-diagonals `e`, solved by the Thomas algorithm plus a Sherman-Morrison
/// correction for the corner entries.
pub struct CyclicTridiagonal {
    n: usize,
    e: f64,
    gamma: f64,
    /// Modified super-diagonal and inverse pivots of the Thomas sweep.
    c_prime: Vec<f64>,
    inv_pivot: Vec<f64>,
    /// Solution of `T z = (gamma, 0, ..., 0, e)`.
    z: Vec<f64>,
    fact: f64,
    work: Vec<f64>,
}

impl CyclicTridiagonal {
    pub fn new(n: usize, d: f64, e: f64) -> Self {
        let gamma = -d;
        let mut diag = vec![d; n];
        diag[0] = d - gamma;
        diag[n - 1] = d - e * e / gamma;
        let mut c_prime = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut p = diag[0];
        inv_pivot[0] = 1.0 / p;
        c_prime[0] = e / p;
        for i in 1..n {
            p = diag[i] - e * c_prime[i - 1];
            inv_pivot[i] = 1.0 / p;
            c_prime[i] = e / p;
        }
        let mut out = Self { n, e, gamma, c_prime, inv_pivot, z: vec![0.0; n], fact: 0.0, work: vec![0.0; n] };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = e;
        out.thomas(&mut u);
        out.fact = 1.0 + u[0] + e * u[n - 1] / gamma;
        out.z = u;
        out
    }

    fn thomas(&self, x: &mut [f64]) {
        let (n, e) = (self.n, self.e);
        x[0] *= self.inv_pivot[0];
        for i in 1..n {
            x[i] = (x[i] - e * x[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.c_prime[i] * x[i + 1];
        }
    }

    pub fn solve_in_place(&mut self, x: &mut [f64]) {
        let mut y = std::mem::take(&mut self.work);
        y.copy_from_slice(x);
        self.thomas(&mut y);
        let k = (y[0] + self.e * y[self.n - 1] / self.gamma) / self.fact;
        for (xi, (yi, zi)) in x.iter_mut().zip(y.iter().zip(&self.z)) {
            *xi = yi - k * zi;
        }
        self.work = y;
    }
}
