//! Distributional residual `∫∫(u ψ_t + F(u) ψ_x) + ∫u0 ψ(0,·)` of candidate
//! solutions against smooth compactly supported test functions.

use std::cell::Cell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{integrate, integrate_with_breaks, Quad, Tolerance};
use crate::dynamics::{flux, rhs, ThetaParam, Trajectory};
use crate::error::{Error, Result};
use crate::scenarios::Peakon;
use crate::spectral::{deriv, green_convolve, Field, Interpolant};

/// `Q * exp(-2|·|)` on the line: `(2/3) e^{-|y|} - (1/3) e^{-2|y|}`.
pub fn peakon_kernel_convolution(y: f64) -> f64 {
    let a = y.abs();
    (2.0 * (-a).exp() - (-2.0 * a).exp()) / 3.0
}

/// A function of `(t, x)` tested against the weak formulation.
/// Pointwise evaluator returning `(u, F(u))`.
pub type Evaluator<'a> = Box<dyn Fn(f64) -> (f64, f64) + 'a>;

pub trait WeakCandidate: Sync {
    /// Evaluator of `(u, F(u))` at time `t`.
    fn at(&self, t: f64, theta: ThetaParam) -> Result<Evaluator<'_>>;

    /// Positions of slope discontinuities at time `t`.
    fn kinks(&self, _t: f64) -> Vec<f64> {
        Vec::new()
    }

    fn describe(&self) -> String;
}

/// Closed-form flux of `a exp(-|x - s|)`: `theta a² e^{-2|y|}/2 + (3 theta/2) a² (Q * e^{-2|·|})(y)`.
fn exponential_flux(a: f64, y: f64, theta: f64) -> f64 {
    let sq = a * a * (-2.0 * y.abs()).exp();
    0.5 * theta * sq + 1.5 * theta * a * a * peakon_kernel_convolution(y)
}

impl WeakCandidate for Peakon {
    fn at(&self, t: f64, theta: ThetaParam) -> Result<Evaluator<'_>> {
        let crest = self.crest(t);
        let th = theta.value();
        Ok(Box::new(move |x| {
            let y = x - crest;
            (self.c * (-y.abs()).exp(), exponential_flux(self.c, y, th))
        }))
    }

    fn kinks(&self, t: f64) -> Vec<f64> {
        vec![self.crest(t)]
    }

    fn describe(&self) -> String {
        format!("{} exp(-|x - {} - {} t|)", self.c, self.x0, self.speed)
    }
}

/// A solver trajectory read as a function of `(t, x)`: band-limited in `x`,
/// cubic Hermite in `t` with `u_t` and `F_t` taken from the equation.
pub struct TrajectoryCandidate<'a> {
    traj: &'a Trajectory,
    u: Vec<Field>,
    u_t: Vec<Field>,
    f: Vec<Field>,
    f_t: Vec<Field>,
}

impl<'a> TrajectoryCandidate<'a> {
    pub fn new(traj: &'a Trajectory) -> Result<Self> {
        let theta = traj.theta;
        let th = theta.value();
        let parts = traj
            .states
            .par_iter()
            .map(|u| -> Result<(Field, Field, Field)> {
                let ut = rhs(u, theta)?;
                let f = flux(u, theta)?;
                // F_t = theta u u_t + Q*[(1 - theta) u u_t + (4 theta - 1) u_x u_xt].
                let (ux, uxt) = (deriv(u)?, deriv(&ut)?);
                let local = u.zip_with(&ut, |a, b| a * b)?;
                let grad = ux.zip_with(&uxt, |a, b| a * b)?;
                let src = local.zip_with(&grad, |a, b| (1.0 - th) * a + (4.0 * th - 1.0) * b)?;
                let ft = green_convolve(&src)?.axpy(th, &local)?;
                Ok((ut, f, ft))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = TrajectoryCandidate {
            traj,
            u: traj.states.clone(),
            u_t: Vec::with_capacity(parts.len()),
            f: Vec::with_capacity(parts.len()),
            f_t: Vec::with_capacity(parts.len()),
        };
        for (ut, f, ft) in parts {
            out.u_t.push(ut);
            out.f.push(f);
            out.f_t.push(ft);
        }
        Ok(out)
    }

    fn hermite(&self, t: f64, values: &[Field], rates: &[Field]) -> Result<Field> {
        let times = &self.traj.times;
        let (start, end) = (times[0], *times.last().expect("non-empty"));
        if !(t >= start && t <= end) {
            return Err(Error::OutOfRange { t, start, end });
        }
        if times.len() == 1 {
            return Ok(values[0].clone());
        }
        let i = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1) - 1;
        let h = times[i + 1] - times[i];
        let s = (t - times[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let w = [2.0 * s3 - 3.0 * s2 + 1.0, (s3 - 2.0 * s2 + s) * h, -2.0 * s3 + 3.0 * s2, (s3 - s2) * h];
        let mut out = values[i].scaled(w[0]);
        out = out.axpy(w[1], &rates[i])?;
        out = out.axpy(w[2], &values[i + 1])?;
        out.axpy(w[3], &rates[i + 1])
    }
}

impl WeakCandidate for TrajectoryCandidate<'_> {
    fn at(&self, t: f64, theta: ThetaParam) -> Result<Evaluator<'_>> {
        if theta != self.traj.theta {
            return Err(Error::param("theta", "differs from the trajectory's theta"));
        }
        let u = Interpolant::new(&self.hermite(t, &self.u, &self.u_t)?);
        let f = Interpolant::new(&self.hermite(t, &self.f, &self.f_t)?);
        Ok(Box::new(move |x| (u.eval(x), f.eval(x))))
    }

    fn describe(&self) -> String {
        format!(
            "solver trajectory on {} points, theta = {}",
            self.traj.grid.n(),
            self.traj.theta.value()
        )
    }
}

fn bump(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - s * s;
    let v = (-1.0 / q).exp();
    (v, -2.0 * s / (q * q) * v)
}

/// A smooth compactly supported test function on `[0, T) x R`.
pub trait TestFn: Sync {
    /// `(psi, psi_t, psi_x)`.
    fn eval(&self, t: f64, x: f64) -> (f64, f64, f64);
    /// `(t_lo, t_hi, x_lo, x_hi)` containing the support.
    fn support(&self) -> (f64, f64, f64, f64);
}

/// `phi((t - t0)/r_t) phi((x - x0)/r_x)` with `phi(s) = exp(-1/(1 - s²))` on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub t0: f64,
    pub x0: f64,
    pub r_t: f64,
    pub r_x: f64,
}

impl TestFunction {
    pub fn new(t0: f64, x0: f64, r_t: f64, r_x: f64) -> Result<Self> {
        if !(r_t > 0.0 && r_x > 0.0) {
            return Err(Error::param("radius", "must be positive"));
        }
        Ok(TestFunction { t0, x0, r_t, r_x })
    }

    pub fn translated(&self, dt: f64, dx: f64) -> Self {
        TestFunction {
            t0: self.t0 + dt,
            x0: self.x0 + dx,
            ..*self
        }
    }
}

impl TestFn for TestFunction {
    fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        let (a, da) = bump((t - self.t0) / self.r_t);
        let (b, db) = bump((x - self.x0) / self.r_x);
        (a * b, da * b / self.r_t, a * db / self.r_x)
    }

    fn support(&self) -> (f64, f64, f64, f64) {
        (
            self.t0 - self.r_t,
            self.t0 + self.r_t,
            self.x0 - self.r_x,
            self.x0 + self.r_x,
        )
    }
}

/// Linear combination `sum w_i psi_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Combination(pub Vec<(f64, TestFunction)>);

impl TestFn for Combination {
    fn eval(&self, t: f64, x: f64) -> (f64, f64, f64) {
        self.0.iter().fold((0.0, 0.0, 0.0), |acc, (w, p)| {
            let v = p.eval(t, x);
            (acc.0 + w * v.0, acc.1 + w * v.1, acc.2 + w * v.2)
        })
    }

    fn support(&self) -> (f64, f64, f64, f64) {
        self.0.iter().fold(
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
            |acc, (_, p)| {
                let s = p.support();
                (acc.0.min(s.0), acc.1.max(s.1), acc.2.min(s.2), acc.3.max(s.3))
            },
        )
    }
}

/// Twelve bumps at two scales following the line `x = x0 + speed t` on `[0, T)`;
/// the earliest bump of each scale straddles `t = 0`.
pub fn standard_test_set(t_end: f64, speed: f64, x0: f64) -> Vec<TestFunction> {
    let mut set = Vec::with_capacity(12);
    let on_line = |t: f64| x0 + speed * t;
    for &t0 in &[t_end / 8.0, t_end / 2.0] {
        for &dx in &[-1.0, 0.0, 1.0] {
            set.push(TestFunction {
                t0,
                x0: on_line(t0) + dx,
                r_t: t_end / 4.0,
                r_x: 2.0,
            });
        }
    }
    for &t0 in &[t_end / 16.0, t_end / 2.0, 3.0 * t_end / 4.0] {
        for &dx in &[0.0, 0.3] {
            set.push(TestFunction {
                t0,
                x0: on_line(t0) + dx,
                r_t: t_end / 8.0,
                r_x: 0.5,
            });
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    pub value: f64,
    pub error_estimate: f64,
}

/// Inner tolerance relative to the outer one.
const INNER_FACTOR: f64 = 1e-2;

/// `∫₀ᵀ∫(u psi_t + F(u) psi_x) dx dt + ∫u0 psi(0,x) dx`, with the space
/// integral split at the candidate's kinks.
pub fn weak_residual(
    candidate: &dyn WeakCandidate,
    theta: ThetaParam,
    psi: &dyn TestFn,
    t_end: f64,
    tol: f64,
) -> Result<WeakResidual> {
    let (t_lo, t_hi, x_lo, x_hi) = psi.support();
    if !(t_hi < t_end) {
        return Err(Error::param("psi", format!("support reaches t = {t_hi}, not inside [0, {t_end})")));
    }
    let inner_tol = Tolerance::new(tol * INNER_FACTOR / (t_hi - t_lo).max(1.0), 0.0);
    let failure: Cell<Option<Error>> = Cell::new(None);
    let inner_error = Cell::new(0.0);
    let slice = |t: f64| -> f64 {
        let result = candidate.at(t, theta).and_then(|eval| {
            let integrand = |x: f64| {
                let (u, f) = eval(x);
                let (_, pt, px) = psi.eval(t, x);
                u * pt + f * px
            };
            integrate_with_breaks(integrand, x_lo, x_hi, &candidate.kinks(t), inner_tol)
        });
        match result {
            Ok(q) => {
                inner_error.set(inner_error.get() + q.error);
                q.value
            }
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let outer = integrate(slice, t_lo.max(0.0), t_hi, Tolerance::new(0.5 * tol, 0.0))?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let initial = if t_lo < 0.0 {
        let eval = candidate.at(0.0, theta)?;
        integrate_with_breaks(
            |x| eval(x).0 * psi.eval(0.0, x).0,
            x_lo,
            x_hi,
            &candidate.kinks(0.0),
            Tolerance::new(0.25 * tol, 0.0),
        )?
    } else {
        Quad { value: 0.0, error: 0.0 }
    };
    Ok(WeakResidual {
        value: outer.value + initial.value,
        error_estimate: outer.error + initial.error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiResidual {
    pub psi: TestFunction,
    pub residual: f64,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaVerification {
    pub theta: f64,
    pub residuals: Vec<PsiResidual>,
    pub pass: bool,
}

/// Verification report for the exact peakon and its wrong-speed impostor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakonReport {
    pub candidate: String,
    pub c: f64,
    pub t_end: f64,
    pub tolerance: f64,
    pub thetas: Vec<ThetaVerification>,
    /// Largest impostor residual per theta; rejection needs one above `reject_level`.
    pub impostor_max: Vec<f64>,
    pub reject_level: f64,
    pub pass: bool,
}

fn verify_candidate(candidate: &dyn WeakCandidate, theta: ThetaParam, set: &[TestFunction], t_end: f64, tol: f64) -> Result<Vec<PsiResidual>> {
    set.par_iter()
        .map(|psi| {
            let r = weak_residual(candidate, theta, psi, t_end, tol * 1e-2)?;
            Ok(PsiResidual {
                psi: *psi,
                residual: r.value,
                error_estimate: r.error_estimate,
            })
        })
        .collect()
}

/// The peakon travels at `theta c`; the impostor `c exp(-|x - (theta + 1) c t|)`
/// reduces to `c exp(-|x - 2ct|)` at `theta = 1`.
pub fn impostor(c: f64, theta: ThetaParam) -> Peakon {
    Peakon {
        c,
        speed: (theta.value() + 1.0) * c,
        x0: 0.0,
    }
}

pub fn verify_peakon(c: f64, thetas: &[ThetaParam], t_end: f64, tol: f64, reject_level: f64) -> Result<PeakonReport> {
    let mut out = PeakonReport {
        candidate: format!("{c} exp(-|x - theta {c} t|)"),
        c,
        t_end,
        tolerance: tol,
        thetas: Vec::new(),
        impostor_max: Vec::new(),
        reject_level,
        pass: true,
    };
    for &theta in thetas {
        let p = Peakon::for_theta(c, theta);
        let set = standard_test_set(t_end, p.speed, 0.0);
        let residuals = verify_candidate(&p, theta, &set, t_end, tol)?;
        let pass = residuals.iter().all(|r| r.residual.abs() < tol);
        let fake = impostor(c, theta);
        let fake_set = standard_test_set(t_end, fake.speed, 0.0);
        let worst = verify_candidate(&fake, theta, &fake_set, t_end, tol)?
            .iter()
            .map(|r| r.residual.abs())
            .fold(0.0, f64::max);
        out.pass &= pass && (c == 0.0 || worst > reject_level);
        out.impostor_max.push(worst);
        out.thetas.push(ThetaVerification {
            theta: theta.value(),
            residuals,
            pass,
        });
    }
    Ok(out)
}
