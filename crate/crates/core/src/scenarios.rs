//! Initial data built from a momentum profile, the analytic peakon, and
//! numerical validation of the hypotheses each regularity regime needs.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Sign, SIGN_TOL};
use crate::dynamics::{ThetaParam, ThetaClass};
use crate::error::{Error, Result};
use crate::lagrangian::{oddness_defect, ODDNESS_TOL};
use crate::spectral::{helmholtz_apply, helmholtz_solve, Field, GreenKernel, Grid, Interpolant};

/// Travelling peaked wave `c exp(-|x - x0 - speed t|)`.
///
/// For the theta-equation written in the time variable `t` the exact weak
/// solution travels at `theta c`; [`Peakon::new`] keeps the unit-speed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peakon {
    pub c: f64,
    pub speed: f64,
    #[serde(default)]
    pub x0: f64,
}

impl Peakon {
    pub fn new(c: f64) -> Self {
        Peakon { c, speed: c, x0: 0.0 }
    }

    pub fn for_theta(c: f64, theta: ThetaParam) -> Self {
        Peakon {
            c,
            speed: theta.value() * c,
            x0: 0.0,
        }
    }

    pub fn with_origin(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn crest(&self, t: f64) -> f64 {
        self.x0 + self.speed * t
    }

    pub fn u(&self, t: f64, x: f64) -> f64 {
        self.c * (-(x - self.crest(t)).abs()).exp()
    }

    /// Slope away from the crest; the mean of the one-sided limits at the crest.
    pub fn u_x(&self, t: f64, x: f64) -> f64 {
        let y = x - self.crest(t);
        if y == 0.0 {
            0.0
        } else {
            -y.signum() * self.c * (-y.abs()).exp()
        }
    }

    /// Weight of the momentum `2c δ(x - crest)`.
    pub fn momentum_mass(&self) -> f64 {
        2.0 * self.c
    }

    /// Samples on a grid, measuring the crest offset periodically.
    pub fn sample(&self, grid: Grid, t: f64) -> Field {
        let crest = self.crest(t);
        Field::from_fn(grid, |x| self.c * (-grid.offset(x, crest).abs()).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Zero {},
    Peakon {
        c: f64,
    },
    SmoothedPeakon {
        c: f64,
        eps: f64,
        #[serde(default)]
        center: f64,
    },
    /// Gaussian momentum `amplitude exp(-((x - center)/width)²)`.
    FromMomentum {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
    /// Odd momentum about `center`; `target_slope`, when given, rescales the
    /// amplitude so that `u_x(0, center)` equals it.
    OddBlowup {
        #[serde(default = "one")]
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        target_slope: Option<f64>,
    },
    /// Initial velocity read from a snapshot file.
    Custom {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

/// Initial data with its momentum and construction warnings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub u0: Field,
    pub m0: Field,
    pub warnings: Vec<String>,
    /// Symmetry point used by the construction, if any.
    pub x_star: Option<f64>,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite"))
            }
        };
        match *self {
            ScenarioSpec::Zero {} | ScenarioSpec::Custom { .. } => Ok(()),
            ScenarioSpec::Peakon { c } => finite("c", c),
            ScenarioSpec::SmoothedPeakon { c, eps, center } => {
                finite("c", c)?;
                finite("center", center)?;
                if !(eps > 0.0 && eps.is_finite()) {
                    return Err(Error::param("eps", "must be positive"));
                }
                Ok(())
            }
            ScenarioSpec::FromMomentum { amplitude, width, center } => {
                finite("amplitude", amplitude)?;
                finite("center", center)?;
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::param("width", "must be positive"));
                }
                Ok(())
            }
            ScenarioSpec::OddBlowup {
                amplitude,
                width,
                center,
                target_slope,
            } => {
                if !(amplitude > 0.0 && amplitude.is_finite()) {
                    return Err(Error::param("amplitude", "must be positive"));
                }
                if !(width > 0.0 && width.is_finite()) {
                    return Err(Error::param("width", "must be positive"));
                }
                finite("center", center)?;
                if let Some(s) = target_slope {
                    if !(s < 0.0 && s.is_finite()) {
                        return Err(Error::param("target_slope", "must be negative"));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn build(&self, grid: Grid) -> Result<Scenario> {
        self.validate()?;
        match self {
            ScenarioSpec::Zero {} => from_momentum(&Field::zeros(grid)),
            ScenarioSpec::Peakon { .. } => Err(Error::Unsupported(
                "the exact peakon has a slope discontinuity; use smoothed_peakon for solver runs".into(),
            )),
            &ScenarioSpec::SmoothedPeakon { c, eps, center } => smoothed_peakon_at(c, eps, grid, center),
            &ScenarioSpec::FromMomentum { amplitude, width, center } => {
                from_momentum(&gaussian_momentum(grid, amplitude, width, center))
            }
            &ScenarioSpec::OddBlowup {
                amplitude,
                width,
                center,
                target_slope,
            } => {
                let (u0, report) = match target_slope {
                    Some(s) => odd_blowup_data_with_slope(s, width, grid, center)?,
                    None => odd_blowup_data(amplitude, width, grid, center)?,
                };
                let m0 = helmholtz_apply(&u0)?;
                let mut warnings = Vec::new();
                if !report.hypotheses_met {
                    warnings.push("u_x(0, x*) is not negative; breaking hypotheses unmet".into());
                }
                Ok(Scenario {
                    u0,
                    m0,
                    warnings,
                    x_star: Some(center),
                })
            }
            ScenarioSpec::Custom { path } => {
                let snap = crate::io::read_snapshot(path)?;
                if snap.field.grid() != &grid {
                    return Err(Error::GridMismatch);
                }
                from_momentum(&helmholtz_apply(&snap.field)?)
            }
        }
    }
}

/// `amplitude exp(-((x - center)/width)²)` with periodic distance.
pub fn gaussian_momentum(grid: Grid, amplitude: f64, width: f64, center: f64) -> Field {
    Field::from_fn(grid, |x| {
        let y = grid.offset(x, center) / width;
        amplitude * (-y * y).exp()
    })
}

/// `u0 = Q * m0`, keeping `m0` alongside.
pub fn from_momentum(m0: &Field) -> Result<Scenario> {
    Ok(Scenario {
        u0: helmholtz_solve(m0)?,
        m0: m0.clone(),
        warnings: Vec::new(),
        x_star: None,
    })
}

/// `Q * m_eps` where `m_eps` is a Gaussian of standard deviation `eps` and mass `2c`
/// centred in the box.
pub fn smoothed_peakon(c: f64, eps: f64, grid: Grid) -> Result<Scenario> {
    smoothed_peakon_at(c, eps, grid, grid.origin() + 0.5 * grid.length())
}

pub fn smoothed_peakon_at(c: f64, eps: f64, grid: Grid, center: f64) -> Result<Scenario> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::param("eps", "must be positive"));
    }
    let norm = 2.0 * c / (eps * (2.0 * std::f64::consts::PI).sqrt());
    let m0 = Field::from_fn(grid, |x| {
        let y = grid.offset(x, center) / eps;
        norm * (-0.5 * y * y).exp()
    });
    let mut s = from_momentum(&m0)?;
    if eps < grid.dx() {
        s.warnings.push(format!("eps = {eps} is below the grid spacing {}; the profile is under-resolved", grid.dx()));
    }
    Ok(s)
}

fn odd_momentum(amplitude: f64, width: f64, grid: Grid, x_star: f64) -> Field {
    let half = 0.5 * grid.length();
    Field::from_fn(grid, |x| {
        let y = grid.offset(x, x_star);
        if y == -half {
            0.0
        } else {
            -amplitude * y * (-(y / width) * (y / width)).exp()
        }
    })
}

/// Odd data `m0 = -amplitude (x - x*) exp(-((x - x*)/width)²)` satisfying
/// `(x - x*) m0 <= 0`, lifted to `u0 = Q * m0`.
pub fn odd_blowup_data(amplitude: f64, width: f64, grid: Grid, x_star: f64) -> Result<(Field, HypothesisReport)> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::param("amplitude", "must be positive"));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::param("width", "must be positive"));
    }
    let m0 = odd_momentum(amplitude, width, grid, x_star);
    let u0 = helmholtz_solve(&m0)?;
    let report = hypothesis_report(&u0, &m0, None, Some(x_star))?;
    Ok((u0, report))
}

/// [`odd_blowup_data`] with the amplitude chosen so that `u_x(0, x*) = slope`.
pub fn odd_blowup_data_with_slope(slope: f64, width: f64, grid: Grid, x_star: f64) -> Result<(Field, HypothesisReport)> {
    if !(slope < 0.0 && slope.is_finite()) {
        return Err(Error::param("slope", "must be negative"));
    }
    let (unit, _) = odd_blowup_data(1.0, width, grid, x_star)?;
    let d = Interpolant::new(&unit).eval_with_derivative(x_star).1;
    if !(d < 0.0) {
        return Err(Error::NoBound { slope: d });
    }
    odd_blowup_data(slope / d, width, grid, x_star)
}

/// `(Q_x * m0)(x*)` by direct quadrature against the line kernel.
pub fn slope_by_kernel(m0: &Field, x_star: f64) -> f64 {
    let g = m0.grid();
    g.points()
        .iter()
        .zip(m0.values())
        .map(|(&y, &m)| GreenKernel::line_derivative(g.offset(x_star, y)) * m)
        .sum::<f64>()
        * g.dx()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    GlobalBySign,
    GlobalByRange,
    GlobalByEvenRatio,
    BlowupI,
    BlowupII,
    Unclassified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub m0_sign: Sign,
    pub odd_about: Option<f64>,
    /// `(x - x*) m0(x) <= 0` at every grid point (false without a symmetry point).
    pub momentum_sign_condition: bool,
    pub u_x_at_xstar: Option<f64>,
    /// `u_x(0, x*) < 0` when a symmetry point was requested.
    pub hypotheses_met: bool,
    pub applicable_theorems: Vec<Regime>,
    /// `max(|u0|, |m0|)` at the box edge, standing in for decay on the line.
    pub boundary_magnitude: f64,
    pub l1_u0: f64,
    pub l1_m0: f64,
}

fn boundary_magnitude(f: &Field) -> f64 {
    let v = f.values();
    let n = v.len();
    v[0].abs().max(v[n - 1].abs())
}

fn hypothesis_report(u0: &Field, m0: &Field, theta: Option<ThetaParam>, x_star: Option<f64>) -> Result<HypothesisReport> {
    let g = *u0.grid();
    let sign = Sign::of(m0, SIGN_TOL);
    let odd_about = match x_star {
        Some(x) => match oddness_defect(u0, x) {
            Ok(d) if d <= ODDNESS_TOL => Some(x),
            _ => None,
        },
        None => None,
    };
    let scale = m0.max_abs();
    // The antipode of x* has no sign of x - x* on the box; oddness pins m0 to zero there.
    let momentum_sign_condition = odd_about.is_some_and(|xs| {
        g.points().iter().zip(m0.values()).all(|(&x, &m)| {
            let y = g.offset(x, xs);
            (y.abs() - 0.5 * g.length()).abs() < 1e-9 * g.dx() || y * m <= SIGN_TOL * scale * g.length()
        })
    });
    let u_x_at_xstar = x_star.map(|x| Interpolant::new(u0).eval_with_derivative(x).1);
    let hypotheses_met = u_x_at_xstar.is_some_and(|d| d < 0.0);
    let l1 = |f: &Field| f.values().iter().map(|v| v.abs()).sum::<f64>() * g.dx();
    let mut applicable = Vec::new();
    if let Some(theta) = theta {
        let t = theta.value();
        if sign.is_definite() {
            applicable.push(Regime::GlobalBySign);
        }
        if theta.class() == ThetaClass::GlobalRange {
            applicable.push(Regime::GlobalByRange);
        }
        if matches!(theta.class(), ThetaClass::EvenRatio(n) if n >= 2) {
            applicable.push(Regime::GlobalByEvenRatio);
        }
        if odd_about.is_some() && hypotheses_met {
            if t > 0.0 && t <= 0.25 && momentum_sign_condition {
                applicable.push(Regime::BlowupI);
            }
            if (0.25..0.5).contains(&t) {
                applicable.push(Regime::BlowupII);
            }
        }
        if applicable.is_empty() {
            applicable.push(Regime::Unclassified);
        }
    }
    Ok(HypothesisReport {
        m0_sign: sign,
        odd_about,
        momentum_sign_condition,
        u_x_at_xstar,
        hypotheses_met,
        applicable_theorems: applicable,
        boundary_magnitude: boundary_magnitude(u0).max(boundary_magnitude(m0)),
        l1_u0: l1(u0),
        l1_m0: l1(m0),
    })
}

/// Candidate symmetry point: the grid point nearest the circular centroid of `|m0|`.
fn symmetry_candidate(m0: &Field) -> Option<f64> {
    let g = m0.grid();
    let k = 2.0 * std::f64::consts::PI / g.length();
    let (mut s, mut c) = (0.0, 0.0);
    for (&x, &m) in g.points().iter().zip(m0.values()) {
        let w = m.abs();
        s += w * (k * (x - g.origin())).sin();
        c += w * (k * (x - g.origin())).cos();
    }
    if s == 0.0 && c == 0.0 {
        return None;
    }
    let x = g.origin() + s.atan2(c) / k;
    Some(g.x(g.nearest_index(x)))
}

/// Which regularity or breaking regime `(u0, theta)` falls into.
pub fn validate(u0: &Field, theta: ThetaParam) -> Result<HypothesisReport> {
    let m0 = helmholtz_apply(u0)?;
    let x_star = symmetry_candidate(&m0).filter(|&x| oddness_defect(u0, x).is_ok_and(|d| d <= ODDNESS_TOL));
    hypothesis_report(u0, &m0, Some(theta), x_star)
}

/// [`validate`] with an explicit symmetry point.
pub fn validate_about(u0: &Field, theta: ThetaParam, x_star: f64) -> Result<HypothesisReport> {
    let m0 = helmholtz_apply(u0)?;
    hypothesis_report(u0, &m0, Some(theta), Some(x_star))
}
