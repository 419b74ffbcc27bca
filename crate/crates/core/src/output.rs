//! File emission. Numbers in CSV files use a fixed `%.9g`-style format so
//! identical runs give byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::feasibility::RasterCell;
use crate::model::{PiecewiseTrajectory, VehicleRecord};
use crate::scheduler::ScheduleEntry;
use crate::sim::Event;

pub const TRAJECTORY_HEADER: &str = "t,vehicle_id,lane,zone,p,v,u,arc_kind";
pub const SCHEDULE_HEADER: &str = "id,lane,t0,v0,tm_star,vm,binding_case";
pub const RASTER_HEADER: &str = "tau,upsilon,s_star,feasible";
pub const SOLVE_HEADER: &str = "t,p,v,u,arc_kind";
pub const ARCS_HEADER: &str = "arc,kind,start,end,p0,v0,u0,jerk";

/// Formats `x` with 9 significant digits, trailing zeros trimmed, switching
/// to exponent notation outside `[1e-5, 1e9)`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Samples every vehicle on the global grid `j * step` over `[t0, tf]`, plus
/// both endpoints; vehicle-major, in identity order.
pub fn trajectory_csv(records: &[VehicleRecord], step: f64) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    let mut sorted: Vec<&VehicleRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.id);
    for r in sorted {
        let mut times = vec![r.t0];
        let first = (r.t0 / step - 1e-9).ceil() as i64;
        let last = (r.tf / step + 1e-9).floor() as i64;
        for j in first..=last {
            let t = j as f64 * step;
            if t > r.t0 + 1e-9 * step && t < r.tf - 1e-9 * step {
                times.push(t);
            }
        }
        times.push(r.tf);
        for t in times {
            let (zone, kind) = if t <= r.tm {
                ("cz", r.trajectory.arc_at(t).kind.label())
            } else {
                ("mz", "cruise")
            };
            let s = r.state_at(t).expect("sample inside the vehicle's domain");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                fmt_num(t),
                r.id,
                r.lane,
                zone,
                fmt_num(s.p),
                fmt_num(s.v),
                fmt_num(s.u),
                kind
            );
        }
    }
    out
}

/// Control-zone samples of a single solved trajectory.
pub fn solve_csv(traj: &PiecewiseTrajectory, step: f64) -> String {
    let mut out = String::from(SOLVE_HEADER);
    out.push('\n');
    let (t0, tm) = (traj.start(), traj.end());
    let mut times = vec![t0];
    let first = (t0 / step - 1e-9).ceil() as i64;
    let last = (tm / step + 1e-9).floor() as i64;
    times.extend(
        (first..=last)
            .map(|j| j as f64 * step)
            .filter(|&t| t > t0 + 1e-9 * step && t < tm - 1e-9 * step),
    );
    times.push(tm);
    for t in times {
        let arc = traj.arc_at(t);
        let s = arc.eval(t);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_num(t),
            fmt_num(s.p),
            fmt_num(s.v),
            fmt_num(s.u),
            arc.kind.label()
        );
    }
    out
}

/// One row per arc, with local coefficients about the arc start.
pub fn arcs_csv(traj: &PiecewiseTrajectory) -> String {
    let mut out = String::from(ARCS_HEADER);
    out.push('\n');
    for (i, a) in traj.arcs().iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            i,
            a.kind.label(),
            fmt_num(a.start),
            fmt_num(a.end),
            fmt_num(a.poly.p0),
            fmt_num(a.poly.v0),
            fmt_num(a.poly.u0),
            fmt_num(a.poly.jerk)
        );
    }
    out
}

pub fn schedule_csv(entries: &[ScheduleEntry]) -> String {
    let mut out = String::from(SCHEDULE_HEADER);
    out.push('\n');
    for e in entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            e.id,
            e.lane,
            fmt_num(e.t0),
            fmt_num(e.v0),
            fmt_num(e.tm_star),
            fmt_num(e.vm),
            e.binding_case.label()
        );
    }
    out
}

pub fn raster_csv(cells: &[RasterCell]) -> String {
    let mut out = String::from(RASTER_HEADER);
    out.push('\n');
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_num(c.tau),
            fmt_num(c.upsilon),
            fmt_num(c.s_star),
            u8::from(c.feasible)
        );
    }
    out
}

/// One JSON object per line.
pub fn events_jsonl(events: &[Event]) -> Result<String> {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).map_err(|e| Error::Io(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(400.0), "400");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(-12.3456789012), "-12.3456789");
        assert_eq!(fmt_num(123456789.4), "123456789");
        assert_eq!(fmt_num(1.5e9), "1.5e+09");
        assert_eq!(fmt_num(2.5e-7), "2.5e-07");
        assert_eq!(fmt_num(9.9999999999), "10");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn empty_run_gives_header_only() {
        assert_eq!(trajectory_csv(&[], 0.1), format!("{TRAJECTORY_HEADER}\n"));
    }
}
