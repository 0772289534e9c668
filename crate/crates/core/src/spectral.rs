//! Uniform periodic grids, grid functions and the Fourier-side operators
//! built on them: differentiation, quadrature, the Helmholtz operator
//! `1 - d²/dx²` and its inverse (convolution with `Q(x) = e^{-|x|}/2`).
//!
//! The real line is represented by a periodic box. Wavenumbers use the
//! symmetric layout `k_j = 2πj/L` for `j <= n/2` and `2π(j-n)/L` above it;
//! odd-order derivatives zero the Nyquist mode, even-order symbols keep it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid of `n` points on `[origin, origin + length)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    length: f64,
    origin: f64,
}

impl Grid {
    pub fn new(n: usize, length: f64, origin: f64) -> Result<Self> {
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count {n} must be a power of two and at least 8"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("length {length} must be positive")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("origin {origin} must be finite")));
        }
        Ok(Grid { n, length, origin })
    }

    /// Box of the given length centred on zero, so `x = 0` is a grid point.
    pub fn centered(n: usize, length: f64) -> Result<Self> {
        Grid::new(n, length, -0.5 * length)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Map `x` into `[origin, origin + length)`.
    pub fn wrap(&self, x: f64) -> f64 {
        self.origin + (x - self.origin).rem_euclid(self.length)
    }

    /// Signed periodic distance `x - center`, folded into `[-L/2, L/2)`.
    pub fn offset(&self, x: f64, center: f64) -> f64 {
        let half = 0.5 * self.length;
        (x - center + half).rem_euclid(self.length) - half
    }

    /// Index of the grid point nearest to `x` (periodically).
    pub fn nearest_index(&self, x: f64) -> usize {
        let s = (self.wrap(x) - self.origin) / self.dx();
        (s.round() as usize) % self.n
    }

    /// Signed wavenumber of mode `j`; the Nyquist mode is reported positive.
    pub fn wavenumber(&self, j: usize) -> f64 {
        2.0 * PI * signed_index(j, self.n) as f64 / self.length
    }

    pub(crate) fn odd_wavenumber(&self, j: usize) -> f64 {
        if 2 * j == self.n {
            0.0
        } else {
            self.wavenumber(j)
        }
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.wavenumber(j)).collect()
    }
}

/// Construct a grid; see [`Grid::new`] for the preconditions.
pub fn make_grid(n: usize, length: f64, origin: f64) -> Result<Grid> {
    Grid::new(n, length, origin)
}

pub(crate) fn signed_index(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Real samples of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::InvalidGrid(format!(
                "{} samples supplied for a grid of {} points",
                values.len(),
                grid.n()
            )));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.n()],
        }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Field {
            grid,
            values: vec![c; grid.n()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n()).map(|i| f(grid.x(i))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, op: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { op })
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Result<Field> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scaled(&self, s: f64) -> Field {
        self.map(|v| s * v)
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        self.zip_with(other, |a, b| a + s * b)
    }

    /// Max-norm distance to another field on the same grid.
    pub fn max_diff(&self, other: &Field) -> Result<f64> {
        Ok(self.zip_with(other, |a, b| a - b)?.max_abs())
    }

    /// Circular shift by whole grid cells: `result[i] = self[i + cells]`.
    pub fn roll(&self, cells: isize) -> Field {
        let n = self.grid.n() as isize;
        let values = (0..n)
            .map(|i| self.values[(i + cells).rem_euclid(n) as usize])
            .collect();
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Unnormalised discrete Fourier transform of the samples.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plans(self.grid.n()).forward.process(&mut buf);
        buf
    }

    /// Inverse of [`Field::spectrum`]; the imaginary part is discarded.
    pub fn from_spectrum(grid: Grid, mut coeffs: Vec<Complex64>) -> Field {
        debug_assert_eq!(coeffs.len(), grid.n());
        plans(grid.n()).inverse.process(&mut coeffs);
        let scale = 1.0 / grid.n() as f64;
        Field {
            grid,
            values: coeffs.into_iter().map(|c| c.re * scale).collect(),
        }
    }
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(p) = cache.read().expect("fft plan cache poisoned").get(&n) {
        return p.clone();
    }
    let mut write = cache.write().expect("fft plan cache poisoned");
    write
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Apply a Fourier multiplier `symbol(j)` to `f`.
pub(crate) fn apply_symbol(
    f: &Field,
    op: &'static str,
    symbol: impl Fn(usize) -> Complex64,
) -> Result<Field> {
    f.check_finite(op)?;
    let mut spec = f.spectrum();
    for (j, c) in spec.iter_mut().enumerate() {
        *c *= symbol(j);
    }
    let out = Field::from_spectrum(*f.grid(), spec);
    out.check_finite(op)?;
    Ok(out)
}

/// Zero every mode with `3|j| > n` (two-thirds rule).
pub(crate) fn dealias(spec: &mut [Complex64]) {
    let n = spec.len();
    for (j, c) in spec.iter_mut().enumerate() {
        if 3 * signed_index(j, n).unsigned_abs() as usize > n {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// Spectral first derivative.
pub fn deriv(f: &Field) -> Result<Field> {
    let g = *f.grid();
    apply_symbol(f, "deriv", |j| Complex64::new(0.0, g.odd_wavenumber(j)))
}

/// Spectral derivative of arbitrary order.
pub fn deriv_n(f: &Field, order: u32) -> Result<Field> {
    let g = *f.grid();
    apply_symbol(f, "deriv_n", |j| {
        let k = if order % 2 == 1 {
            g.odd_wavenumber(j)
        } else {
            g.wavenumber(j)
        };
        Complex64::new(0.0, k).powu(order)
    })
}

/// Rectangle rule `dx * sum(values)`; spectrally accurate for smooth periodic data.
pub fn integrate(f: &Field) -> Result<f64> {
    f.check_finite("integrate")?;
    Ok(f.grid().dx() * f.values().iter().sum::<f64>())
}

/// `m = u - u_xx`, symbol `1 + k²`.
pub fn helmholtz_apply(u: &Field) -> Result<Field> {
    let g = *u.grid();
    apply_symbol(u, "helmholtz_apply", |j| {
        let k = g.wavenumber(j);
        Complex64::new(1.0 + k * k, 0.0)
    })
}

/// `u = (1 - d²/dx²)^{-1} m`, symbol `1 / (1 + k²)`.
pub fn helmholtz_solve(m: &Field) -> Result<Field> {
    let g = *m.grid();
    apply_symbol(m, "helmholtz_solve", |j| {
        let k = g.wavenumber(j);
        Complex64::new(1.0 / (1.0 + k * k), 0.0)
    })
}

/// `Q * f` with `Q` the periodised Green kernel, evaluated through the
/// kernel's own Fourier coefficients.
pub fn green_convolve(f: &Field) -> Result<Field> {
    let g = *f.grid();
    apply_symbol(f, "green_convolve", |j| GreenKernel::transform(g.wavenumber(j)))
}

/// Green kernel `Q(x) = e^{-|x|}/2` of `1 - d²/dx²` and its periodisation.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreenKernel;

impl GreenKernel {
    pub fn line(x: f64) -> f64 {
        0.5 * (-x.abs()).exp()
    }

    /// `Q'(x)` away from the origin; zero at the kink.
    pub fn line_derivative(x: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            -0.5 * x.signum() * (-x.abs()).exp()
        }
    }

    /// `sum_k Q(x + kL)` in closed form.
    pub fn periodized(x: f64, length: f64) -> f64 {
        let s = x.rem_euclid(length);
        ((-s).exp() + (s - length).exp()) / (2.0 * (1.0 - (-length).exp()))
    }

    /// `∫ Q(x) e^{-ikx} dx`, assembled from the transforms of the two
    /// one-sided exponentials. Equals the Fourier coefficient of the
    /// periodised kernel at every box wavenumber.
    pub fn transform(k: f64) -> Complex64 {
        let right = Complex64::new(1.0, k).inv();
        let left = Complex64::new(1.0, -k).inv();
        0.5 * (right + left)
    }
}

/// Band-limited (trigonometric) interpolant of a field, for off-grid sampling.
#[derive(Debug, Clone)]
pub struct Interpolant {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Interpolant {
    pub fn new(f: &Field) -> Self {
        let n = f.grid().n() as f64;
        let coeffs = f.spectrum().into_iter().map(|c| c / n).collect();
        Interpolant {
            grid: *f.grid(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_with_derivative(x).0
    }

    /// Value and first derivative of the interpolant at `x`.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let n = self.grid.n();
        let k1 = 2.0 * PI / self.grid.length();
        let s = x - self.grid.origin();
        let step = Complex64::from_polar(1.0, k1 * s);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut value = self.coeffs[0].re;
        let mut slope = 0.0;
        for j in 1..n / 2 {
            phase *= step;
            if j % 64 == 0 {
                phase = Complex64::from_polar(1.0, k1 * s * j as f64);
            }
            let term = self.coeffs[j] * phase;
            value += 2.0 * term.re;
            slope -= 2.0 * k1 * j as f64 * term.im;
        }
        let kn = k1 * (n / 2) as f64;
        value += self.coeffs[n / 2].re * (kn * s).cos();
        (value, slope)
    }
}

/// `f(x + a)` sampled on the grid of `f`, by Fourier phase shift.
pub fn shift(f: &Field, a: f64) -> Result<Field> {
    let g = *f.grid();
    let n = g.n();
    apply_symbol(f, "shift", |j| {
        let k = g.wavenumber(j);
        if 2 * j == n {
            Complex64::new((k * a).cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, k * a)
        }
    })
}
