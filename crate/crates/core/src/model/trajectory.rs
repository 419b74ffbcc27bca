use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which side of a box constraint is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bound {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcKind {
    /// Affine control, cubic position.
    UnconstrainedCubic,
    /// Control pinned at `u_min` or `u_max`.
    ControlSaturated(Bound),
    /// Speed pinned at `v_min` or `v_max`, zero control.
    SpeedSaturated(Bound),
}

impl ArcKind {
    pub fn label(self) -> &'static str {
        match self {
            ArcKind::UnconstrainedCubic => "cubic",
            ArcKind::ControlSaturated(Bound::Upper) => "u_max",
            ArcKind::ControlSaturated(Bound::Lower) => "u_min",
            ArcKind::SpeedSaturated(Bound::Upper) => "v_max",
            ArcKind::SpeedSaturated(Bound::Lower) => "v_min",
        }
    }

    pub fn is_constrained(self) -> bool {
        !matches!(self, ArcKind::UnconstrainedCubic)
    }
}

impl fmt::Display for ArcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Position, speed and control at an instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub p: f64,
    pub v: f64,
    pub u: f64,
}

/// Cubic in absolute time: `u = a t + b`, `v = a t²/2 + b t + c`,
/// `p = a t³/6 + b t²/2 + c t + d`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Cubic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Cubic {
    pub fn eval(&self, t: f64) -> State {
        State {
            p: ((self.a / 6.0 * t + self.b / 2.0) * t + self.c) * t + self.d,
            v: (self.a / 2.0 * t + self.b) * t + self.c,
            u: self.a * t + self.b,
        }
    }

    /// Same polynomial written in local time `σ = t - origin`.
    pub fn local(&self, origin: f64) -> LocalPoly {
        let s = self.eval(origin);
        LocalPoly {
            p0: s.p,
            v0: s.v,
            u0: s.u,
            jerk: self.a,
        }
    }
}

/// Motion polynomial in local time `σ = t - t_start`:
/// `p = p0 + v0 σ + u0 σ²/2 + jerk σ³/6`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPoly {
    pub p0: f64,
    pub v0: f64,
    pub u0: f64,
    pub jerk: f64,
}

impl LocalPoly {
    pub fn eval(&self, s: f64) -> State {
        State {
            p: self.p0 + s * (self.v0 + s * (self.u0 / 2.0 + s * self.jerk / 6.0)),
            v: self.v0 + s * (self.u0 + s * self.jerk / 2.0),
            u: self.u0 + s * self.jerk,
        }
    }

    /// Expands to absolute-time coefficients for a local origin at `origin`.
    pub fn to_absolute(&self, origin: f64) -> Cubic {
        let (t, j) = (origin, self.jerk);
        Cubic {
            a: j,
            b: self.u0 - j * t,
            c: self.v0 - self.u0 * t + j * t * t / 2.0,
            d: self.p0 - self.v0 * t + self.u0 * t * t / 2.0 - j * t * t * t / 6.0,
        }
    }

    /// `½∫u²` over `[0, h]`.
    pub fn control_energy(&self, h: f64) -> f64 {
        let (u0, j) = (self.u0, self.jerk);
        0.5 * (u0 * u0 * h + u0 * j * h * h + j * j * h * h * h / 3.0)
    }
}

/// Coefficient record of one arc in absolute time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArcCoefficients {
    /// `(a, b, c, d)` of an unconstrained arc.
    Cubic(Cubic),
    /// `v = u_sat t + f`, `p = u_sat t²/2 + f t + e`.
    ControlSaturated { u_sat: f64, f: f64, e: f64 },
    /// `p = v_sat t + r`.
    SpeedSaturated { v_sat: f64, r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub kind: ArcKind,
    pub start: f64,
    pub end: f64,
    pub poly: LocalPoly,
}

impl Arc {
    pub fn eval(&self, t: f64) -> State {
        self.poly.eval(t - self.start)
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn absolute(&self) -> Cubic {
        self.poly.to_absolute(self.start)
    }

    pub fn coefficients(&self) -> ArcCoefficients {
        let abs = self.absolute();
        match self.kind {
            ArcKind::UnconstrainedCubic => ArcCoefficients::Cubic(abs),
            ArcKind::ControlSaturated(_) => ArcCoefficients::ControlSaturated {
                u_sat: abs.b,
                f: abs.c,
                e: abs.d,
            },
            ArcKind::SpeedSaturated(_) => ArcCoefficients::SpeedSaturated {
                v_sat: abs.c,
                r: abs.d,
            },
        }
    }
}

/// Junction-tiled sequence of arcs over `[t0, tm]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseTrajectory {
    arcs: Vec<Arc>,
}

/// Relative tolerance on position/speed continuity across junctions.
pub const CONTINUITY_TOL: f64 = 1e-9;

impl PiecewiseTrajectory {
    /// Assembles arcs, checking that they tile their span and that position
    /// and speed are continuous at every junction.
    pub fn new(arcs: Vec<Arc>) -> Result<Self> {
        if arcs.is_empty() {
            return Err(Error::Internal("trajectory needs at least one arc".into()));
        }
        let scale_p = arcs
            .iter()
            .map(|a| a.eval(a.end).p.abs().max(a.poly.p0.abs()))
            .fold(1.0, f64::max);
        let scale_v = arcs.iter().map(|a| a.poly.v0.abs()).fold(1.0, f64::max);
        for arc in &arcs {
            if !(arc.end >= arc.start) {
                return Err(Error::Internal(format!(
                    "arc with negative duration [{}, {}]",
                    arc.start, arc.end
                )));
            }
        }
        for w in arcs.windows(2) {
            let (l, r) = (&w[0], &w[1]);
            if (l.end - r.start).abs() > 1e-12 * l.end.abs().max(1.0) {
                return Err(Error::Internal(format!(
                    "gap between arcs at {} and {}",
                    l.end, r.start
                )));
            }
            let sl = l.eval(l.end);
            let sr = r.eval(r.start);
            if (sl.p - sr.p).abs() > CONTINUITY_TOL * scale_p
                || (sl.v - sr.v).abs() > CONTINUITY_TOL * scale_v
            {
                return Err(Error::Internal(format!(
                    "discontinuous junction at t={}: p {} vs {}, v {} vs {}",
                    l.end, sl.p, sr.p, sl.v, sr.v
                )));
            }
        }
        Ok(PiecewiseTrajectory { arcs })
    }

    pub fn single(arc: Arc) -> Self {
        PiecewiseTrajectory { arcs: vec![arc] }
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn start(&self) -> f64 {
        self.arcs[0].start
    }

    pub fn end(&self) -> f64 {
        self.arcs[self.arcs.len() - 1].end
    }

    /// Interior junction times.
    pub fn junctions(&self) -> impl Iterator<Item = f64> + '_ {
        self.arcs[..self.arcs.len() - 1].iter().map(|a| a.end)
    }

    pub fn has_constrained_arc(&self) -> bool {
        self.arcs.iter().any(|a| a.kind.is_constrained())
    }

    /// Index of the arc covering `t`; junctions belong to the later arc.
    pub fn arc_index(&self, t: f64) -> usize {
        let idx = self.arcs.partition_point(|a| a.end <= t);
        idx.min(self.arcs.len() - 1)
    }

    pub fn arc_at(&self, t: f64) -> &Arc {
        &self.arcs[self.arc_index(t)]
    }

    /// Position, speed and control at `t`.
    pub fn eval_state(&self, t: f64) -> Result<State> {
        let (start, end) = (self.start(), self.end());
        let slack = 1e-12 * end.abs().max(1.0);
        if !(t >= start - slack && t <= end + slack) {
            return Err(Error::Domain { t, start, end });
        }
        Ok(self.arc_at(t).eval(t))
    }

    pub fn terminal_state(&self) -> State {
        let last = &self.arcs[self.arcs.len() - 1];
        last.eval(last.end)
    }

    /// `½∫u² dt`, integrated in closed form arc by arc.
    pub fn cost(&self) -> f64 {
        self.arcs
            .iter()
            .map(|a| a.poly.control_energy(a.duration()))
            .sum()
    }
}

/// `½∫u² dt` of a trajectory.
pub fn trajectory_cost(traj: &PiecewiseTrajectory) -> f64 {
    traj.cost()
}
