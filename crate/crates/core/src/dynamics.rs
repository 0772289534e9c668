//! Right-hand side of the theta-equation in conservative form
//! `u_t + F(u)_x = 0`, classical RK4 stepping, and the time loop with
//! wave-breaking detection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord, Sign};
use crate::error::{Error, Result};
use crate::spectral::{self, dealias, Field, GreenKernel, Grid};

/// Tolerance used when matching `theta` against its distinguished values.
const THETA_MATCH_TOL: f64 = 1e-12;

/// The parameter of the theta-equation. Any finite real is allowed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ThetaParam(f64);

/// Regularity class of a `theta` value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaClass {
    /// `theta = 0`.
    Borderline,
    /// `0 < theta < 1/4`: breaking under a momentum sign condition.
    SignConditional,
    /// `1/4 <= theta < 1/2`: breaking for any negative slope at a symmetry point.
    SlopeConditional,
    /// `1/2 <= theta <= 1`.
    GlobalRange,
    /// `theta = 2n/(2n-1)`.
    EvenRatio(u32),
    Other,
}

impl ThetaParam {
    pub fn new(theta: f64) -> Result<Self> {
        if theta.is_finite() {
            Ok(ThetaParam(theta))
        } else {
            Err(Error::param("theta", format!("{theta} is not finite")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }

    pub fn class(self) -> ThetaClass {
        let t = self.0;
        if t == 0.0 {
            ThetaClass::Borderline
        } else if t > 0.0 && t < 0.25 {
            ThetaClass::SignConditional
        } else if (0.25..0.5).contains(&t) {
            ThetaClass::SlopeConditional
        } else if (0.5..=1.0).contains(&t) {
            ThetaClass::GlobalRange
        } else if let Some(n) = self.even_ratio_index() {
            ThetaClass::EvenRatio(n)
        } else {
            ThetaClass::Other
        }
    }

    /// `n` such that `theta = 2n/(2n-1)`, if any.
    pub fn even_ratio_index(self) -> Option<u32> {
        let t = self.0;
        if t <= 1.0 || t > 2.0 + THETA_MATCH_TOL {
            return None;
        }
        let n = (t / (2.0 * (t - 1.0))).round();
        if n < 1.0 || n > u32::MAX as f64 {
            return None;
        }
        let exact = 2.0 * n / (2.0 * n - 1.0);
        ((exact - t).abs() <= THETA_MATCH_TOL * t).then_some(n as u32)
    }

    /// Exponent `theta/(1-theta)` of the conserved momentum integral, for `theta` in (0, 1).
    pub fn momentum_exponent(self) -> Option<f64> {
        (self.0 > 0.0 && self.0 < 1.0).then(|| self.0 / (1.0 - self.0))
    }
}

impl TryFrom<f64> for ThetaParam {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        ThetaParam::new(value)
    }
}

/// Time-loop configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub theta: ThetaParam,
    pub t_end: f64,
    /// Courant number for both the advective and the slope time-step limits.
    pub cfl: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub slope_blowup_threshold: f64,
    /// Record a state every this many steps (the final state is always recorded).
    pub output_every: usize,
}

impl SimConfig {
    pub const DEFAULT_CFL: f64 = 0.5;
    pub const DEFAULT_DT_MIN: f64 = 1e-10;
    pub const DEFAULT_DT_MAX: f64 = 0.01;
    pub const DEFAULT_SLOPE_THRESHOLD: f64 = 1e6;
    pub const DEFAULT_OUTPUT_EVERY: usize = 10;

    pub fn new(theta: ThetaParam, t_end: f64) -> Self {
        SimConfig {
            theta,
            t_end,
            cfl: Self::DEFAULT_CFL,
            dt_min: Self::DEFAULT_DT_MIN,
            dt_max: Self::DEFAULT_DT_MAX,
            slope_blowup_threshold: Self::DEFAULT_SLOPE_THRESHOLD,
            output_every: Self::DEFAULT_OUTPUT_EVERY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ThetaParam::new(self.theta.value())?;
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::param("t_end", "must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::param("cfl", format!("{} is outside (0, 1]", self.cfl)));
        }
        if !(self.dt_min.is_finite() && self.dt_min > 0.0) {
            return Err(Error::param("dt_min", "must be positive"));
        }
        if !(self.dt_max > self.dt_min) {
            return Err(Error::param("dt_max", "must exceed dt_min"));
        }
        if !(self.slope_blowup_threshold.is_finite() && self.slope_blowup_threshold > 0.0) {
            return Err(Error::param("slope_blowup_threshold", "must be positive"));
        }
        if self.output_every == 0 {
            return Err(Error::param("output_every", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Slope unbounded from below.
    Below,
    /// Slope unbounded from above.
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowupCause {
    SlopeThreshold,
    DtUnderflow,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub t_detect: f64,
    pub direction: Direction,
    pub max_slope: f64,
    pub min_slope: f64,
    /// Upper bound on the breaking time in the run's own time variable, when a theorem supplies one.
    pub theoretical_bound: Option<f64>,
    pub cause: BlowupCause,
    /// Last time at which `max|u_x|` was below `min(1e3, threshold)`.
    pub t_lower_bracket: f64,
}

impl BlowupReport {
    pub fn bound_satisfied(&self) -> Option<bool> {
        self.theoretical_bound.map(|b| self.t_detect < b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Terminal {
    Completed,
    Blowup(BlowupReport),
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub theta: ThetaParam,
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub terminal: Terminal,
    pub steps: usize,
    /// Largest `max|u_x|` over every accepted step.
    pub peak_slope: f64,
}

impl Trajectory {
    pub fn is_completed(&self) -> bool {
        matches!(self.terminal, Terminal::Completed)
    }

    pub fn blowup(&self) -> Option<&BlowupReport> {
        match &self.terminal {
            Terminal::Blowup(r) => Some(r),
            Terminal::Completed => None,
        }
    }

    pub fn blowup_mut(&mut self) -> Option<&mut BlowupReport> {
        match &mut self.terminal {
            Terminal::Blowup(r) => Some(r),
            Terminal::Completed => None,
        }
    }

    pub fn initial(&self) -> &Field {
        &self.states[0]
    }

    pub fn last(&self) -> &Field {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    pub fn t_last(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least the initial time")
    }
}

fn flux_spectrum(u: &Field, theta: f64) -> Vec<Complex64> {
    let g = *u.grid();
    let u_hat = u.spectrum();
    let ux_hat: Vec<Complex64> = u_hat
        .iter()
        .enumerate()
        .map(|(j, c)| c * Complex64::new(0.0, g.odd_wavenumber(j)))
        .collect();
    let ux = Field::from_spectrum(g, ux_hat);
    let mut sq = u.map(|v| v * v).spectrum();
    let mut sq_x = ux.map(|v| v * v).spectrum();
    dealias(&mut sq);
    dealias(&mut sq_x);
    let local = 0.5 * theta;
    let a = 0.5 * (1.0 - theta);
    let b = 0.5 * (4.0 * theta - 1.0);
    sq.iter()
        .zip(&sq_x)
        .enumerate()
        .map(|(j, (&s, &sx))| local * s + GreenKernel::transform(g.wavenumber(j)) * (a * s + b * sx))
        .collect()
}

/// `F(u) = theta u²/2 + Q * [(1-theta) u²/2 + (4 theta - 1) u_x²/2]`, with the
/// quadratic products dealiased.
pub fn flux(u: &Field, theta: ThetaParam) -> Result<Field> {
    u.check_finite("flux")?;
    let out = Field::from_spectrum(*u.grid(), flux_spectrum(u, theta.value()));
    out.check_finite("flux")?;
    Ok(out)
}

/// `u_t = -F(u)_x`.
pub fn rhs(u: &Field, theta: ThetaParam) -> Result<Field> {
    u.check_finite("rhs")?;
    let g = *u.grid();
    let spec = flux_spectrum(u, theta.value())
        .into_iter()
        .enumerate()
        .map(|(j, c)| -c * Complex64::new(0.0, g.odd_wavenumber(j)))
        .collect();
    let out = Field::from_spectrum(g, spec);
    out.check_finite("rhs")?;
    Ok(out)
}

/// Advective step `cfl * dx / max(|theta| max|u|, 1e-8)`, capped by `remaining`.
pub fn cfl_dt(u: &Field, theta: ThetaParam, cfl: f64, remaining: f64) -> f64 {
    let speed = (theta.value().abs() * u.max_abs()).max(1e-8);
    (cfl * u.grid().dx() / speed).min(remaining)
}

/// One classical four-stage Runge-Kutta step.
pub fn step_rk4(u: &Field, dt: f64, theta: ThetaParam) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    let stage = |v: &Field, idx: usize| -> Result<Field> {
        rhs(v, theta).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFiniteStage { stage: idx },
            other => other,
        })
    };
    let k1 = stage(u, 1)?;
    let k2 = stage(&u.axpy(0.5 * dt, &k1)?, 2)?;
    let k3 = stage(&u.axpy(0.5 * dt, &k2)?, 3)?;
    let k4 = stage(&u.axpy(dt, &k3)?, 4)?;
    let mut next = u.clone();
    let w = dt / 6.0;
    for (i, v) in next.values_mut().iter_mut().enumerate() {
        *v += w * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i]);
    }
    if !next.is_finite() {
        return Err(Error::NonFiniteStage { stage: 4 });
    }
    Ok(next)
}

/// Fixed-step RK4 to `t_end`; the last step is shortened to land on `t_end`.
pub fn integrate_fixed(u0: &Field, theta: ThetaParam, dt: f64, t_end: f64) -> Result<Field> {
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let mut u = u0.clone();
    for _ in 0..steps {
        u = step_rk4(&u, h, theta)?;
    }
    Ok(u)
}

fn slope_extrema(u: &Field) -> Option<(f64, f64)> {
    let ux = spectral::deriv(u).ok()?;
    Some((ux.min(), ux.max()))
}

/// Advance `u0` to `config.t_end`, stopping early when the slope exceeds the
/// threshold, the step size underflows `dt_min`, or the state turns non-finite.
pub fn evolve(u0: &Field, config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    u0.check_finite("evolve")?;
    let theta = config.theta;
    let grid = *u0.grid();
    let m0 = spectral::helmholtz_apply(u0)?;
    let m0_sign = Sign::of(&m0, diagnostics::SIGN_TOL);
    let bracket_level = config.slope_blowup_threshold.min(1e3);
    let t_scale = config.t_end.max(1.0);

    let mut traj = Trajectory {
        grid,
        theta,
        times: vec![0.0],
        states: vec![u0.clone()],
        diagnostics: vec![diagnostics::record(0.0, u0, theta, Some(m0_sign))?],
        terminal: Terminal::Completed,
        steps: 0,
        peak_slope: 0.0,
    };

    let mut u = u0.clone();
    let mut t = 0.0;
    let (mut min_s, mut max_s) =
        slope_extrema(&u).ok_or(Error::NonFinite { op: "evolve" })?;
    traj.peak_slope = min_s.abs().max(max_s.abs());
    let mut t_lower = 0.0;

    let blowup = |traj: &mut Trajectory, t: f64, min_s: f64, max_s: f64, cause, t_lower| {
        let direction = if min_s.abs() >= max_s.abs() {
            Direction::Below
        } else {
            Direction::Above
        };
        traj.terminal = Terminal::Blowup(BlowupReport {
            t_detect: t,
            direction,
            max_slope: max_s,
            min_slope: min_s,
            theoretical_bound: None,
            cause,
            t_lower_bracket: t_lower,
        });
    };

    loop {
        let remaining = config.t_end - t;
        if remaining <= 1e-12 * t_scale {
            break;
        }
        let sup_slope = min_s.abs().max(max_s.abs());
        let dt = cfl_dt(&u, theta, config.cfl, f64::INFINITY)
            .min(config.cfl / sup_slope.max(1e-300))
            .min(config.dt_max);
        if dt < config.dt_min {
            blowup(&mut traj, t, min_s, max_s, BlowupCause::DtUnderflow, t_lower);
            break;
        }
        let dt = dt.min(remaining);
        let next = match step_rk4(&u, dt, theta) {
            Ok(v) => v,
            Err(Error::NonFiniteStage { .. }) => {
                blowup(&mut traj, t, min_s, max_s, BlowupCause::NonFinite, t_lower);
                break;
            }
            Err(e) => return Err(e),
        };
        let Some((lo, hi)) = slope_extrema(&next) else {
            blowup(&mut traj, t + dt, min_s, max_s, BlowupCause::NonFinite, t_lower);
            break;
        };
        u = next;
        t = if config.t_end - (t + dt) <= 1e-12 * t_scale {
            config.t_end
        } else {
            t + dt
        };
        traj.steps += 1;
        min_s = lo;
        max_s = hi;
        let sup = lo.abs().max(hi.abs());
        traj.peak_slope = traj.peak_slope.max(sup);
        if sup < bracket_level {
            t_lower = t;
        }
        let detected = sup >= config.slope_blowup_threshold;
        if detected || traj.steps.is_multiple_of(config.output_every) || t == config.t_end {
            traj.times.push(t);
            traj.diagnostics.push(diagnostics::record(t, &u, theta, Some(m0_sign))?);
            traj.states.push(u.clone());
        }
        if detected {
            blowup(&mut traj, t, min_s, max_s, BlowupCause::SlopeThreshold, t_lower);
            break;
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Divergence {
    Below,
    Above,
    None,
}

/// Direction in which the slope diverged, from the recorded extrema.
pub fn classify_divergence(traj: &Trajectory) -> Divergence {
    match traj.blowup() {
        None => Divergence::None,
        Some(r) if r.min_slope.abs() >= r.max_slope.abs() => Divergence::Below,
        Some(_) => Divergence::Above,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{deriv, helmholtz_solve, Grid};
    use std::f64::consts::PI;

    fn theta(t: f64) -> ThetaParam {
        ThetaParam::new(t).unwrap()
    }

    /// Smooth, band-limited periodic test state (all modes well inside the dealiasing band).
    fn smooth_state(g: Grid) -> Field {
        let k = 2.0 * PI / g.length();
        Field::from_fn(g, |x| {
            0.4 + 0.3 * (k * x).sin() - 0.2 * (2.0 * k * x + 0.7).cos() + 0.1 * (3.0 * k * x + 1.3).sin()
        })
    }

    #[test]
    fn theta_classes() {
        assert_eq!(theta(0.0).class(), ThetaClass::Borderline);
        assert_eq!(theta(0.1).class(), ThetaClass::SignConditional);
        assert_eq!(theta(0.25).class(), ThetaClass::SlopeConditional);
        assert_eq!(theta(1.0 / 3.0).class(), ThetaClass::SlopeConditional);
        assert_eq!(theta(0.5).class(), ThetaClass::GlobalRange);
        assert_eq!(theta(2.0 / 3.0).class(), ThetaClass::GlobalRange);
        assert_eq!(theta(1.0).class(), ThetaClass::GlobalRange);
        assert_eq!(theta(2.0).class(), ThetaClass::EvenRatio(1));
        assert_eq!(theta(4.0 / 3.0).class(), ThetaClass::EvenRatio(2));
        assert_eq!(theta(6.0 / 5.0).class(), ThetaClass::EvenRatio(3));
        assert_eq!(theta(1.5).class(), ThetaClass::Other);
        assert_eq!(theta(-0.3).class(), ThetaClass::Other);
        assert!(ThetaParam::new(f64::NAN).is_err());
        assert!((theta(2.0 / 3.0).momentum_exponent().unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(theta(1.0).momentum_exponent(), None);
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::new(theta(0.3), 1.0);
        assert!(c.validate().is_ok());
        c.cfl = 1.5;
        assert!(matches!(c.validate(), Err(Error::InvalidParameter { name: "cfl", .. })));
        c.cfl = 0.5;
        c.t_end = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn flux_examples() {
        let g = Grid::centered(64, 20.0).unwrap();
        for &t in &[0.0, 0.25, 1.0 / 3.0, 1.0, 2.0, -0.7] {
            assert!(flux(&Field::zeros(g), theta(t)).unwrap().max_abs() == 0.0);
            let c = 1.7;
            let f = flux(&Field::constant(g, c), theta(t)).unwrap();
            assert!(f.max_diff(&Field::constant(g, 0.5 * c * c)).unwrap() < 1e-13);
        }
    }

    #[test]
    fn theta_zero_flux_is_helmholtz_form() {
        // u_t = d/dx (1 - d²/dx²)^{-1} (u_x²/2 - u²/2) at theta = 0.
        let g = Grid::new(64, 2.0 * PI, 0.0).unwrap();
        let u = smooth_state(g);
        let ux = deriv(&u).unwrap();
        let src = u.zip_with(&ux, |a, b| 0.5 * b * b - 0.5 * a * a).unwrap();
        let expected = deriv(&helmholtz_solve(&src).unwrap()).unwrap();
        let got = rhs(&u, theta(0.0)).unwrap();
        assert!(got.max_diff(&expected).unwrap() < 1e-13);
    }

    #[test]
    fn rhs_of_constants_vanishes() {
        let g = Grid::centered(32, 10.0).unwrap();
        for &t in &[0.0, 0.3, 1.0, 2.0] {
            assert!(rhs(&Field::zeros(g), theta(t)).unwrap().max_abs() == 0.0);
            assert!(rhs(&Field::constant(g, -2.0), theta(t)).unwrap().max_abs() < 1e-13);
        }
    }

    #[test]
    fn rhs_at_one_third_is_scaled_camassa_holm() {
        // Independent Camassa-Holm right-hand side: -[u u_x + d/dx Q*(u² + u_x²/2)].
        let g = Grid::new(64, 2.0 * PI, 0.0).unwrap();
        let u = smooth_state(g);
        let ux = deriv(&u).unwrap();
        let advect = u.zip_with(&ux, |a, b| a * b).unwrap();
        let src = u.zip_with(&ux, |a, b| a * a + 0.5 * b * b).unwrap();
        let nonlocal = deriv(&helmholtz_solve(&src).unwrap()).unwrap();
        let ch = advect.zip_with(&nonlocal, |a, b| -(a + b)).unwrap();
        let got = rhs(&u, theta(1.0 / 3.0)).unwrap();
        let err = got.max_diff(&ch.scaled(1.0 / 3.0)).unwrap();
        assert!(err < 1e-12 * ch.max_abs().max(1.0), "err = {err}");
    }

    #[test]
    fn cfl_examples() {
        let g = Grid::new(64, 6.4, 0.0).unwrap();
        assert_eq!(g.dx(), 0.1);
        let u = Field::from_fn(g, |x| 2.0 * (2.0 * PI * x / 6.4).sin());
        let dt = cfl_dt(&u, theta(1.0), 0.5, f64::INFINITY);
        assert!((dt - 0.025).abs() < 1e-12);
        let zero = Field::zeros(g);
        assert_eq!(cfl_dt(&zero, theta(1.0), 0.5, 3.0), 3.0);
        assert_eq!(cfl_dt(&zero, theta(1.0), 0.5, f64::INFINITY), 0.5 * 0.1 / 1e-8);
        let fine = Grid::new(128, 6.4, 0.0).unwrap();
        let u_fine = Field::from_fn(fine, |x| 2.0 * (2.0 * PI * x / 6.4).sin());
        let dt_fine = cfl_dt(&u_fine, theta(1.0), 0.5, f64::INFINITY);
        assert!((dt_fine - 0.5 * dt).abs() < 1e-15);
    }

    #[test]
    fn rk4_fixed_points() {
        let g = Grid::centered(32, 10.0).unwrap();
        for &t in &[0.0, 0.25, 1.0, 2.0] {
            assert_eq!(step_rk4(&Field::zeros(g), 0.1, theta(t)).unwrap().max_abs(), 0.0);
            let c = Field::constant(g, 0.75);
            assert!(step_rk4(&c, 0.1, theta(t)).unwrap().max_diff(&c).unwrap() < 1e-15);
        }
        assert!(step_rk4(&Field::zeros(g), 0.0, theta(0.3)).is_err());
    }

    #[test]
    fn rk4_nan_reports_stage() {
        let g = Grid::centered(32, 10.0).unwrap();
        let mut u = Field::zeros(g);
        u.values_mut()[2] = f64::INFINITY;
        assert!(matches!(step_rk4(&u, 0.1, theta(0.3)), Err(Error::NonFiniteStage { stage: 1 })));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let g = Grid::new(32, 2.0 * PI, 0.0).unwrap();
        let u0 = smooth_state(g);
        let th = theta(1.0 / 3.0);
        let dt = 0.1;
        let reference = integrate_fixed(&u0, th, dt / 16.0, 1.0).unwrap();
        let errs: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|d| integrate_fixed(&u0, th, dt / d, 1.0).unwrap().max_diff(&reference).unwrap())
            .collect();
        let r1 = errs[0] / errs[1];
        let r2 = errs[1] / errs[2];
        assert!(r1 > 13.0 && r1 < 19.0, "ratio {r1}");
        assert!(r2 > 13.0 && r2 < 19.0, "ratio {r2}");
    }

    #[test]
    fn evolve_zero_data_completes() {
        let g = Grid::centered(64, 20.0).unwrap();
        let cfg = SimConfig::new(theta(0.3), 0.5);
        let traj = evolve(&Field::zeros(g), &cfg).unwrap();
        assert!(traj.is_completed());
        assert_eq!(traj.t_last(), 0.5);
        assert!(traj.states.iter().all(|s| s.max_abs() == 0.0));
        assert_eq!(classify_divergence(&traj), Divergence::None);
    }

    #[test]
    fn evolve_is_deterministic_and_conserves_mass() {
        let g = Grid::new(64, 2.0 * PI, 0.0).unwrap();
        let u0 = smooth_state(g);
        let mut cfg = SimConfig::new(theta(0.4), 1.0);
        cfg.output_every = 3;
        let a = evolve(&u0, &cfg).unwrap();
        let b = evolve(&u0, &cfg).unwrap();
        assert_eq!(a.times, b.times);
        for (x, y) in a.states.iter().zip(&b.states) {
            assert_eq!(x.values(), y.values());
        }
        let mass0 = spectral::integrate(&u0).unwrap();
        for s in &a.states {
            let drift = (spectral::integrate(s).unwrap() - mass0).abs();
            assert!(drift <= 1e-10 * (1.0 + mass0.abs()));
        }
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn evolve_commutes_with_grid_shifts() {
        let g = Grid::new(64, 2.0 * PI, 0.0).unwrap();
        let u0 = smooth_state(g);
        let cfg = SimConfig::new(theta(0.6), 0.5);
        let a = evolve(&u0, &cfg).unwrap();
        let b = evolve(&u0.roll(5), &cfg).unwrap();
        assert_eq!(a.times.len(), b.times.len());
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!(x.roll(5).max_diff(y).unwrap() < 1e-10);
        }
    }

    #[test]
    fn dt_underflow_terminates_as_blowup() {
        let g = Grid::new(64, 2.0 * PI, 0.0).unwrap();
        let u0 = smooth_state(g);
        let mut cfg = SimConfig::new(theta(0.4), 1.0);
        cfg.dt_min = 1.0;
        cfg.dt_max = 2.0;
        let traj = evolve(&u0, &cfg).unwrap();
        let r = traj.blowup().unwrap();
        assert_eq!(r.cause, BlowupCause::DtUnderflow);
        assert_eq!(r.t_detect, 0.0);
    }

    #[test]
    fn slope_threshold_sets_direction() {
        let g = Grid::new(64, 2.0 * PI, 0.0).unwrap();
        let u0 = Field::from_fn(g, |x| x.sin());
        let mut cfg = SimConfig::new(theta(0.4), 1.0);
        cfg.slope_blowup_threshold = 0.5;
        let traj = evolve(&u0, &cfg).unwrap();
        let r = traj.blowup().unwrap();
        assert_eq!(r.cause, BlowupCause::SlopeThreshold);
        assert!(r.max_slope.abs().max(r.min_slope.abs()) >= 0.5);
        assert_eq!(traj.steps, 1);
    }
}
