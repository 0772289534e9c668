//! The map between the theta-equation and the b-family
//! `w_τ - α² w_τzz + c0 w_z + (b+1) w w_z + Γ w_zzz = α² (b w_z w_zz + w w_zzz)`,
//! and the rescaled form `u_s + u u_x + [Q * B(u, u_x)]_x = 0` with `s = theta t`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ThetaParam, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{self, Field, Grid};

/// `b = 1/theta - 1`.
pub fn theta_to_b(theta: f64) -> Result<f64> {
    if theta == 0.0 || !theta.is_finite() {
        return Err(Error::Unsupported("theta = 0 has no b-equation counterpart".into()));
    }
    Ok(1.0 / theta - 1.0)
}

/// `theta = 1/(b + 1)`.
pub fn b_to_theta(b: f64) -> Result<f64> {
    if b == -1.0 || !b.is_finite() {
        return Err(Error::Unsupported("b = -1 has no theta-equation counterpart".into()));
    }
    Ok(1.0 / (b + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BTransformParams {
    pub theta: f64,
    pub c0: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl BTransformParams {
    pub fn new(theta: f64, c0: f64, gamma: f64, alpha: f64) -> Result<Self> {
        let p = BTransformParams { theta, c0, gamma, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn identity(theta: f64) -> Result<Self> {
        Self::new(theta, 0.0, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        theta_to_b(self.theta)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param("alpha", "must be positive"));
        }
        if !(self.c0.is_finite() && self.gamma.is_finite()) {
            return Err(Error::param("c0", "c0 and gamma must be finite"));
        }
        if self.theta == 1.0 && self.c0 + self.gamma / (self.alpha * self.alpha) != 0.0 {
            return Err(Error::Unsupported(
                "at theta = 1 only c0 + gamma/alpha² = 0 is reachable".into(),
            ));
        }
        Ok(())
    }

    pub fn b(&self) -> f64 {
        1.0 / self.theta - 1.0
    }

    /// Constant `A` in `u = A + w`.
    pub fn shift(&self) -> f64 {
        if self.theta == 1.0 {
            return 0.0;
        }
        self.theta * (self.c0 + self.gamma / (self.alpha * self.alpha)) / (1.0 - self.theta)
    }

    /// Frame speed `V` in `z = alpha (x - V t)`.
    pub fn drift(&self) -> f64 {
        self.shift() - self.c0 * self.theta
    }

    pub fn tau(&self, t: f64) -> f64 {
        self.alpha * self.theta * t
    }
}

/// Fields `w(τ_i, z)` on the grid `z = alpha x`.
#[derive(Debug, Clone)]
pub struct BTrajectory {
    pub params: BTransformParams,
    pub grid: Grid,
    pub taus: Vec<f64>,
    pub states: Vec<Field>,
}

impl BTrajectory {
    /// Snapshots with `τ` in `[lo, hi]`; the window must lie inside the recorded range.
    pub fn window(&self, lo: f64, hi: f64) -> Result<BTrajectory> {
        let (start, end) = (self.taus[0], *self.taus.last().expect("non-empty"));
        let (a, b) = (start.min(end), start.max(end));
        for t in [lo, hi] {
            if t < a || t > b {
                return Err(Error::OutOfRange { t, start: a, end: b });
            }
        }
        let keep: Vec<usize> = (0..self.taus.len())
            .filter(|&i| self.taus[i] >= lo.min(hi) && self.taus[i] <= lo.max(hi))
            .collect();
        Ok(BTrajectory {
            params: self.params,
            grid: self.grid,
            taus: keep.iter().map(|&i| self.taus[i]).collect(),
            states: keep.iter().map(|&i| self.states[i].clone()).collect(),
        })
    }
}

/// `w(τ, z) = u(t, z/alpha + V t) - A` with `τ = alpha theta t`.
pub fn transform_to_b(traj: &Trajectory, params: BTransformParams) -> Result<BTrajectory> {
    params.validate()?;
    if (traj.theta.value() - params.theta).abs() > 1e-15 * params.theta.abs() {
        return Err(Error::param("theta", "differs from the trajectory's theta"));
    }
    let g = traj.grid;
    let zgrid = Grid::new(g.n(), params.alpha * g.length(), params.alpha * g.origin())?;
    let (a, v) = (params.shift(), params.drift());
    let mut states = Vec::with_capacity(traj.states.len());
    for (&t, u) in traj.times.iter().zip(&traj.states) {
        let moved = spectral::shift(u, v * t)?;
        states.push(Field::new(zgrid, moved.values().iter().map(|x| x - a).collect())?);
    }
    Ok(BTrajectory {
        params,
        grid: zgrid,
        taus: traj.times.iter().map(|&t| params.tau(t)).collect(),
        states,
    })
}

/// First three spectral derivatives, coded from the symbols `(ik)^p` directly.
fn z_derivatives(w: &Field) -> [Field; 3] {
    let g = *w.grid();
    let n = g.n();
    let hat = w.spectrum();
    let two_pi = 2.0 * std::f64::consts::PI;
    let make = |p: u32| {
        let coeffs = hat
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let s = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                if 2 * j == n && p % 2 == 1 {
                    return Complex64::new(0.0, 0.0);
                }
                let k = two_pi * s / g.length();
                c * Complex64::new(0.0, k).powu(p)
            })
            .collect();
        Field::from_spectrum(g, coeffs)
    };
    [make(1), make(2), make(3)]
}

/// `w_τ` of the b-equation in non-conservative form.
pub fn b_equation_rhs(w: &Field, params: &BTransformParams) -> Result<Field> {
    w.check_finite("b_equation_rhs")?;
    let b = params.b();
    let a2 = params.alpha * params.alpha;
    let [wz, wzz, wzzz] = z_derivatives(w);
    let mut src = Vec::with_capacity(w.values().len());
    for i in 0..w.values().len() {
        let (u, u1, u2, u3) = (w.values()[i], wz.values()[i], wzz.values()[i], wzzz.values()[i]);
        src.push(-params.c0 * u1 - (b + 1.0) * u * u1 - params.gamma * u3 + a2 * (b * u1 * u2 + u * u3));
    }
    let g = *w.grid();
    let n = g.n();
    let hat: Vec<Complex64> = Field::new(g, src)?
        .spectrum()
        .into_iter()
        .enumerate()
        .map(|(j, c)| {
            let s = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            let k = 2.0 * std::f64::consts::PI * s / g.length();
            c / (1.0 + a2 * k * k)
        })
        .collect();
    let out = Field::from_spectrum(g, hat);
    out.check_finite("b_equation_rhs")?;
    Ok(out)
}

/// Weights of the derivative of order `m` at `x0` on `nodes` (Fornberg's recursion).
pub fn fornberg_weights(x0: f64, nodes: &[f64], m: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Largest `|w_τ - b_equation_rhs(w)|` over snapshots, with `w_τ` from five-point
/// finite differences across neighbouring snapshots.
pub fn b_residual(bt: &BTrajectory) -> Result<f64> {
    let k = bt.taus.len();
    if k < 5 {
        return Err(Error::Contract("at least five snapshots are needed".into()));
    }
    let mut worst: f64 = 0.0;
    for i in 0..k {
        let lo = i.saturating_sub(2).min(k - 5);
        let nodes = &bt.taus[lo..lo + 5];
        let w = fornberg_weights(bt.taus[i], nodes, 1);
        let mut dt = Field::zeros(bt.grid);
        for (j, wj) in w.iter().enumerate() {
            dt = dt.axpy(*wj, &bt.states[lo + j])?;
        }
        let r = b_equation_rhs(&bt.states[i], &bt.params)?;
        worst = worst.max(dt.max_diff(&r)?);
    }
    Ok(worst)
}

/// `u_s = -u u_x - ∂x Q*[(1/theta - 1) u²/2 + (4 - 1/theta) u_x²/2]`, the equation in `s = theta t`.
pub fn big_b_rhs(u: &Field, theta: ThetaParam) -> Result<Field> {
    let th = theta.value();
    if th == 0.0 {
        return Err(Error::Unsupported("the rescaled form needs theta != 0".into()));
    }
    let ux = spectral::deriv(u)?;
    let b = u.zip_with(&ux, |a, d| 0.5 * (1.0 / th - 1.0) * a * a + 0.5 * (4.0 - 1.0 / th) * d * d)?;
    let nonlocal = spectral::deriv(&spectral::green_convolve(&b)?)?;
    let adv = u.zip_with(&ux, |a, d| a * d)?;
    adv.zip_with(&nonlocal, |a, q| -(a + q))
}

/// Fixed-step RK4 of [`big_b_rhs`] to `s_end`.
pub fn evolve_big_b(u0: &Field, theta: ThetaParam, s_end: f64, ds: f64) -> Result<Field> {
    let steps = (s_end / ds).ceil().max(1.0) as usize;
    let h = s_end / steps as f64;
    let mut u = u0.clone();
    for _ in 0..steps {
        let k1 = big_b_rhs(&u, theta)?;
        let k2 = big_b_rhs(&u.axpy(0.5 * h, &k1)?, theta)?;
        let k3 = big_b_rhs(&u.axpy(0.5 * h, &k2)?, theta)?;
        let k4 = big_b_rhs(&u.axpy(h, &k3)?, theta)?;
        u = u
            .axpy(h / 6.0, &k1)?
            .axpy(h / 3.0, &k2)?
            .axpy(h / 3.0, &k3)?
            .axpy(h / 6.0, &k4)?;
    }
    Ok(u)
}
