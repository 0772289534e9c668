//! Text formats: field snapshots and the diagnostics, path and slope CSV tables.
//! Every float is written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::lagrangian::{CharacteristicPath, RiccatiTrace};
use crate::spectral::{Field, Grid};

pub const DIAGNOSTICS_HEADER: &str =
    "time,mass_u,mass_m,h1_sq,m_l2_sq,lp_momentum,dhh,sup_u,sup_ux,min_ux,sign_ok";
pub const PATH_HEADER: &str = "time,alpha,x,F,m_along";
pub const RICCATI_HEADER: &str = "time,d,lhs_residual,regime,t_star";

/// Round-trip representation of a float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub field: Field,
    pub time: f64,
    pub theta: f64,
}

pub fn format_snapshot(field: &Field, time: f64, theta: f64) -> String {
    let g = field.grid();
    let mut s = format!(
        "n={},L={},origin={},time={},theta={}\n",
        g.n(),
        fmt_f64(g.length()),
        fmt_f64(g.origin()),
        fmt_f64(time),
        fmt_f64(theta)
    );
    for (i, v) in field.values().iter().enumerate() {
        let _ = writeln!(s, "{},{}", fmt_f64(g.x(i)), fmt_f64(*v));
    }
    s
}

pub fn parse_snapshot(text: &str, path: &Path) -> Result<Snapshot> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let mut n = None;
    let (mut length, mut origin, mut time, mut theta) = (None, None, None, None);
    for item in header.split(',') {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| bad(format!("header item `{item}` is not key=value")))?;
        let num = || value.trim().parse::<f64>().map_err(|e| bad(format!("header `{key}`: {e}")));
        match key.trim() {
            "n" => n = Some(value.trim().parse::<usize>().map_err(|e| bad(format!("header `n`: {e}")))?),
            "L" => length = Some(num()?),
            "origin" => origin = Some(num()?),
            "time" => time = Some(num()?),
            "theta" => theta = Some(num()?),
            other => return Err(bad(format!("unknown header key `{other}`"))),
        }
    }
    let missing = |k: &str| bad(format!("header lacks `{k}`"));
    let grid = Grid::new(
        n.ok_or_else(|| missing("n"))?,
        length.ok_or_else(|| missing("L"))?,
        origin.ok_or_else(|| missing("origin"))?,
    )?;
    let mut values = Vec::with_capacity(grid.n());
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let (x, v) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("line {} is not `x,value`", i + 2)))?;
        let x: f64 = x.trim().parse().map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
        let v: f64 = v.trim().parse().map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
        if i >= grid.n() {
            return Err(bad(format!("more than {} samples", grid.n())));
        }
        if (x - grid.x(i)).abs() > 1e-9 * grid.length() {
            return Err(bad(format!("line {}: x = {x} is off the grid", i + 2)));
        }
        values.push(v);
    }
    if values.len() != grid.n() {
        return Err(bad(format!("expected {} samples, found {}", grid.n(), values.len())));
    }
    Ok(Snapshot {
        field: Field::new(grid, values)?,
        time: time.ok_or_else(|| missing("time"))?,
        theta: theta.ok_or_else(|| missing("theta"))?,
    })
}

pub fn write_snapshot(path: &Path, field: &Field, time: f64, theta: f64) -> Result<()> {
    fs::write(path, format_snapshot(field, time, theta)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, path)
}

pub fn format_diagnostics(records: &[DiagnosticsRecord]) -> String {
    let mut s = String::from(DIAGNOSTICS_HEADER);
    s.push('\n');
    for r in records {
        let sign = r.sign_consistent.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.time),
            fmt_f64(r.mass_u),
            fmt_f64(r.mass_m),
            fmt_f64(r.h1_sq),
            fmt_f64(r.m_l2_sq),
            fmt_opt(r.lp_momentum),
            fmt_opt(r.dhh),
            fmt_f64(r.sup_u),
            fmt_f64(r.sup_ux),
            fmt_f64(r.min_ux),
            sign
        );
    }
    s
}

pub fn format_paths(paths: &[CharacteristicPath]) -> String {
    let mut s = String::from(PATH_HEADER);
    s.push('\n');
    for p in paths {
        for i in 0..p.times.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt_f64(p.times[i]),
                fmt_f64(p.alpha),
                fmt_f64(p.positions[i]),
                fmt_f64(p.jacobian[i]),
                fmt_f64(p.m_along[i])
            );
        }
    }
    s
}

pub fn format_riccati(trace: &RiccatiTrace) -> String {
    let mut s = String::from(RICCATI_HEADER);
    s.push('\n');
    for i in 0..trace.times.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(trace.times[i]),
            fmt_f64(trace.d_values[i]),
            fmt_f64(trace.lhs_residual[i]),
            trace.regime.tag(),
            fmt_opt(trace.t_star_run)
        );
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ThetaParam;
    use proptest::prelude::*;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let g = Grid::centered(16, 80.0).unwrap();
        let f = Field::from_fn(g, |x| (0.1 * x).sin() / 3.0 + 1e-300);
        let text = format_snapshot(&f, 1.0 / 3.0, 1.0 / 3.0);
        assert!(text.starts_with("n=16,L="));
        let back = parse_snapshot(&text, Path::new("mem")).unwrap();
        assert_eq!(back.field.values(), f.values());
        assert_eq!(back.field.grid(), f.grid());
        assert_eq!(back.time, 1.0 / 3.0);
        assert_eq!(back.theta, 1.0 / 3.0);
    }

    #[test]
    fn malformed_snapshots() {
        let p = Path::new("mem");
        assert!(parse_snapshot("", p).is_err());
        assert!(parse_snapshot("n=8,L=8,origin=0,time=0\n", p).is_err());
        let g = Grid::new(8, 8.0, 0.0).unwrap();
        let text = format_snapshot(&Field::zeros(g), 0.0, 0.5);
        let truncated: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_snapshot(&truncated, p), Err(Error::Format { .. })));
        let shifted = text.replacen("0.0000000000000000e0,", "0.5000000000000000e0,", 1);
        assert!(parse_snapshot(&shifted, p).is_err());
    }

    #[test]
    fn diagnostics_columns() {
        let g = Grid::centered(16, 10.0).unwrap();
        let r = crate::diagnostics::record(0.0, &Field::zeros(g), ThetaParam::new(1.0).unwrap(), None).unwrap();
        let text = format_diagnostics(&[r]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), DIAGNOSTICS_HEADER);
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 11);
        assert_eq!(row[5], "");
        assert_eq!(row[6], "");
        assert_eq!(row[10], "");
    }

    proptest! {
        #[test]
        fn float_format_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
