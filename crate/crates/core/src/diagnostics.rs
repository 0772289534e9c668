//! Conserved quantities, rate identities and a-priori bounds, evaluated on
//! single states or along recorded trajectories.

use serde::{Deserialize, Serialize};

use crate::dynamics::{rhs, ThetaParam, Trajectory};
use crate::error::{Error, Result};
use crate::spectral::{deriv, deriv_n, helmholtz_apply, integrate, Field};

/// Relative tolerance for "definite sign": `m >= -SIGN_TOL * max|m|`.
pub const SIGN_TOL: f64 = 1e-12;
/// Relative tolerance for sign agreement of an evolved momentum with its initial value.
pub const SIGN_PERSISTENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sign {
    NonNeg,
    NonPos,
    Indefinite,
}

impl Sign {
    /// Sign class of `m` with slack `tol * max|m|`. The zero field is non-negative.
    pub fn of(m: &Field, tol: f64) -> Sign {
        let slack = tol * m.max_abs();
        if m.values().iter().all(|&v| v >= -slack) {
            Sign::NonNeg
        } else if m.values().iter().all(|&v| v <= slack) {
            Sign::NonPos
        } else {
            Sign::Indefinite
        }
    }

    pub fn is_definite(self) -> bool {
        self != Sign::Indefinite
    }

    fn factor(self) -> Option<f64> {
        match self {
            Sign::NonNeg => Some(1.0),
            Sign::NonPos => Some(-1.0),
            Sign::Indefinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub time: f64,
    pub mass_u: f64,
    pub mass_m: f64,
    pub h1_sq: f64,
    /// `∫(u² + u_x² + u_xx²)`, the square of the norm equivalent to `∫m²`.
    pub h2_sq: f64,
    pub m_l2_sq: f64,
    pub lp_momentum: Option<f64>,
    /// `false` when the exponent is below one.
    pub lp_is_norm: Option<bool>,
    pub dhh: Option<f64>,
    pub sup_u: f64,
    pub sup_ux: f64,
    pub min_ux: f64,
    pub l1_u: f64,
    pub l1_m: f64,
    pub sign_consistent: Option<bool>,
}

fn l1(f: &Field) -> f64 {
    f.values().iter().map(|v| v.abs()).sum::<f64>() * f.grid().dx()
}

fn sq_integral(f: &Field) -> Result<f64> {
    integrate(&f.map(|v| v * v))
}

/// Evaluate every monitored quantity on the state `u` at `time`.
pub fn record(time: f64, u: &Field, theta: ThetaParam, m0_sign: Option<Sign>) -> Result<DiagnosticsRecord> {
    u.check_finite("record")?;
    let ux = deriv(u)?;
    let uxx = deriv_n(u, 2)?;
    let m = helmholtz_apply(u)?;
    let u_sq = sq_integral(u)?;
    let ux_sq = sq_integral(&ux)?;
    let lp_momentum = match theta.momentum_exponent() {
        Some(_) => Some(lp_momentum(&m, theta)?),
        None => None,
    };
    let dhh = match theta.even_ratio_index() {
        Some(n) => Some(dhh_invariant(&m, n)?),
        None => None,
    };
    let sign_consistent = m0_sign.and_then(Sign::factor).map(|s| {
        let slack = SIGN_PERSISTENCE_TOL * m.max_abs();
        m.values().iter().all(|&v| s * v >= -slack)
    });
    Ok(DiagnosticsRecord {
        time,
        mass_u: integrate(u)?,
        mass_m: integrate(&m)?,
        h1_sq: u_sq + ux_sq,
        h2_sq: u_sq + ux_sq + sq_integral(&uxx)?,
        m_l2_sq: sq_integral(&m)?,
        lp_momentum,
        lp_is_norm: theta.momentum_exponent().map(|p| p >= 1.0),
        dhh,
        sup_u: u.max_abs(),
        sup_ux: ux.max_abs(),
        min_ux: ux.min(),
        l1_u: l1(u),
        l1_m: l1(&m),
        sign_consistent,
    })
}

/// `∫|m|^p` with `p = theta/(1-theta)`; defined for `theta` in (0, 1).
pub fn lp_momentum(m: &Field, theta: ThetaParam) -> Result<f64> {
    let p = theta.momentum_exponent().ok_or_else(|| {
        Error::Unsupported(format!(
            "momentum exponent theta/(1-theta) requires theta in (0, 1), got {}",
            theta.value()
        ))
    })?;
    integrate(&m.map(|v| v.abs().powf(p)))
}

/// `∫(4n² m^{2n-2} m_x² + m^{2n})`, conserved when `theta = 2n/(2n-1)`.
pub fn dhh_invariant(m: &Field, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    let mx = deriv(m)?;
    let k = 2 * n as i32;
    let c = 4.0 * (n as f64) * (n as f64);
    let density = m.zip_with(&mx, |a, b| c * a.powi(k - 2) * b * b + a.powi(k))?;
    integrate(&density)
}

/// The two sides of `d/dt ∫m² = (3 theta - 2) ∫u_x m²` at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateIdentity {
    pub lhs: f64,
    pub rhs: f64,
    /// Magnitude against which the residual is judged.
    pub scale: f64,
}

impl RateIdentity {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn m_l2_rate(u: &Field, theta: ThetaParam) -> Result<RateIdentity> {
    let m = helmholtz_apply(u)?;
    let m_t = helmholtz_apply(&rhs(u, theta)?)?;
    let lhs = 2.0 * integrate(&m.zip_with(&m_t, |a, b| a * b)?)?;
    let ux = deriv(u)?;
    let cubic = integrate(&ux.zip_with(&m, |a, b| a * b * b)?)?;
    Ok(RateIdentity {
        lhs,
        rhs: (3.0 * theta.value() - 2.0) * cubic,
        scale: sq_integral(&m)? + cubic.abs(),
    })
}

/// `|d/dt ∫m² - (3 theta - 2) ∫u_x m²|` with the time derivative taken from the semidiscrete right-hand side.
pub fn m_l2_rate_residual(u: &Field, theta: ThetaParam) -> Result<f64> {
    Ok(m_l2_rate(u, theta)?.residual())
}

/// The two sides of `d/dt ∫(u² + 2u_x² + u_xx²) = -2∫u_x(u_x² + u_xx²)` at `theta = 0`.
pub fn theta0_energy_rate(u: &Field) -> Result<RateIdentity> {
    let zero = ThetaParam::new(0.0)?;
    let r = rhs(u, zero)?;
    let (ux, uxx) = (deriv(u)?, deriv_n(u, 2)?);
    let (rx, rxx) = (deriv(&r)?, deriv_n(&r, 2)?);
    let mut lhs_density = u.zip_with(&r, |a, b| a * b)?;
    for (i, v) in lhs_density.values_mut().iter_mut().enumerate() {
        *v += 2.0 * ux.values()[i] * rx.values()[i] + uxx.values()[i] * rxx.values()[i];
    }
    let lhs = 2.0 * integrate(&lhs_density)?;
    let cubic = ux.zip_with(&uxx, |a, b| a * (a * a + b * b))?;
    let rhs_val = -2.0 * integrate(&cubic)?;
    let energy = integrate(&u.zip_with(&ux, |a, b| a * a + 2.0 * b * b)?)? + sq_integral(&uxx)?;
    let scale = integrate(&cubic.map(f64::abs))? + energy * ux.max_abs();
    Ok(RateIdentity {
        lhs,
        rhs: rhs_val,
        scale,
    })
}

pub fn theta0_energy_residual(u: &Field) -> Result<f64> {
    Ok(theta0_energy_rate(u)?.residual())
}

/// Per-time outcome of the a-priori bounds for sign-definite momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub times: Vec<f64>,
    pub slope_ok: Vec<bool>,
    pub h1_ok: Vec<bool>,
    pub l1_ok: Vec<bool>,
    /// Largest `sup|u_x| / slope_bound`.
    pub worst_slope_ratio: f64,
    /// Largest `||u||_{H¹} / h1_bound`.
    pub worst_h1_ratio: f64,
    /// Largest relative drift of the conserved L¹ norm.
    pub worst_l1_drift: f64,
}

impl BoundReport {
    pub fn all_hold(&self) -> bool {
        self.slope_ok.iter().chain(&self.h1_ok).chain(&self.l1_ok).all(|&b| b)
    }
}

const EQUALITY_TOL: f64 = 1e-8;
const INEQUALITY_SLACK: f64 = 1e-6;

fn definite_sign(u0: &Field) -> Result<Sign> {
    let m0 = helmholtz_apply(u0)?;
    let s = Sign::of(&m0, SIGN_TOL);
    if s.is_definite() {
        Ok(s)
    } else {
        Err(Error::Contract("initial momentum has no definite sign".into()))
    }
}

struct BoundRule {
    slope_bound: f64,
    growth_rate: f64,
    /// Use the L¹ norm of `m` (true) or of `u` (false) as the conserved quantity.
    conserved_is_m: bool,
    slope_slack: f64,
}

fn check_bounds(traj: &Trajectory, u0: &Field, rule: BoundRule, l1_u0: f64) -> Result<BoundReport> {
    let h1_0 = record(0.0, u0, traj.theta, None)?.h1_sq.sqrt();
    let mut rep = BoundReport {
        times: traj.times.clone(),
        slope_ok: Vec::new(),
        h1_ok: Vec::new(),
        l1_ok: Vec::new(),
        worst_slope_ratio: 0.0,
        worst_h1_ratio: 0.0,
        worst_l1_drift: 0.0,
    };
    for (&t, u) in traj.times.iter().zip(&traj.states) {
        let ux = deriv(u)?;
        let sup_ux = ux.max_abs();
        rep.slope_ok.push(sup_ux <= rule.slope_bound * (1.0 + rule.slope_slack));
        if rule.slope_bound > 0.0 {
            rep.worst_slope_ratio = rep.worst_slope_ratio.max(sup_ux / rule.slope_bound);
        }
        let h1 = (sq_integral(u)? + sq_integral(&ux)?).sqrt();
        let h1_bound = (rule.growth_rate * t).exp() * h1_0;
        rep.h1_ok.push(h1 <= h1_bound * (1.0 + INEQUALITY_SLACK));
        if h1_bound > 0.0 {
            rep.worst_h1_ratio = rep.worst_h1_ratio.max(h1 / h1_bound);
        }
        let conserved = if rule.conserved_is_m { l1(&helmholtz_apply(u)?) } else { l1(u) };
        let drift = if l1_u0 > 0.0 { (conserved - l1_u0).abs() / l1_u0 } else { conserved };
        rep.l1_ok.push(drift <= EQUALITY_TOL);
        rep.worst_l1_drift = rep.worst_l1_drift.max(drift);
    }
    Ok(rep)
}

/// Bounds of the `theta = 0` global theory: `sup|u_x| <= ||u0||_{L¹}`,
/// `||u||_{H¹} <= exp(t ||u0||_{L¹}/2) ||u0||_{H¹}` and `||m(t)||_{L¹} = ||u0||_{L¹}`.
pub fn bound_check_theta0(traj: &Trajectory, u0: &Field) -> Result<BoundReport> {
    if !traj.theta.is_zero() {
        return Err(Error::Contract("bound_check_theta0 requires a theta = 0 trajectory".into()));
    }
    definite_sign(u0)?;
    let l1_u0 = l1(u0);
    let rule = BoundRule {
        slope_bound: l1_u0,
        growth_rate: 0.5 * l1_u0,
        conserved_is_m: true,
        slope_slack: EQUALITY_TOL,
    };
    check_bounds(traj, u0, rule, l1_u0)
}

/// Bounds for sign-definite momentum at `theta != 0`: `||u(t)||_{L¹}` conserved,
/// `sup|u_x| <= ||u0||_{L¹}/2` and `||u||_{H¹} <= exp(|1/theta - 3| t ||u0||_{L¹}/2) ||u0||_{H¹}`.
pub fn bound_check_sign_definite(traj: &Trajectory, u0: &Field) -> Result<BoundReport> {
    let th = traj.theta.value();
    if th == 0.0 {
        return bound_check_theta0(traj, u0);
    }
    definite_sign(u0)?;
    let l1_u0 = l1(u0);
    let rule = BoundRule {
        slope_bound: 0.5 * l1_u0,
        growth_rate: 0.5 * (1.0 / th - 3.0).abs() * l1_u0,
        conserved_is_m: false,
        slope_slack: INEQUALITY_SLACK,
    };
    check_bounds(traj, u0, rule, l1_u0)
}

/// True iff `m(t,x) m0(x) >= -tol max|m0|²` wherever `|m0| > tol max|m0|`, at every recorded time.
pub fn sign_persistence_check(traj: &Trajectory, m0: &Field) -> Result<bool> {
    let scale = m0.max_abs();
    if scale == 0.0 {
        return Ok(true);
    }
    let tol = SIGN_PERSISTENCE_TOL;
    for u in &traj.states {
        let m = helmholtz_apply(u)?;
        let ok = m
            .values()
            .iter()
            .zip(m0.values())
            .all(|(&a, &b)| b.abs() <= tol * scale || a * b >= -tol * scale * scale);
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}
