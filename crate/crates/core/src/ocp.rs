//! Minimum-energy trajectories over the control zone.
//!
//! The unconstrained optimum has affine control that vanishes at the
//! merging-zone entry. When it breaks a control or speed bound, saturated arcs
//! are pieced onto it: a saturated-control arc at the start, where the control
//! magnitude is largest, and a saturated-speed cruise at the end, where the
//! speed is most extreme. Junction times follow in closed form from position
//! and speed continuity.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::model::{
    Arc, ArcKind, Bound, Cubic, LocalPoly, PiecewiseTrajectory, State, VehicleLimits,
};

/// Boundary data of one vehicle's control-zone problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryConditions {
    pub t0: f64,
    pub v0: f64,
    pub tm: f64,
    /// Merging-zone entry position (control-zone length).
    pub cz_length: f64,
    /// Position at `t0`; zero at control-zone entry, nonzero when re-solving mid-course.
    pub p0: f64,
}

impl BoundaryConditions {
    pub fn new(t0: f64, v0: f64, tm: f64, cz_length: f64) -> Self {
        BoundaryConditions {
            t0,
            v0,
            tm,
            cz_length,
            p0: 0.0,
        }
    }

    fn horizon(&self) -> f64 {
        self.tm - self.t0
    }

    fn distance(&self) -> f64 {
        self.cz_length - self.p0
    }
}

/// Scaled residual budget of the boundary system.
const RESIDUAL_TOL: f64 = 1e-9;

/// Unconstrained optimum as a local polynomial anchored at `bc.t0`.
///
/// Solves the four boundary equations (initial position and speed, terminal
/// position, zero terminal costate) after scaling time by the horizon and
/// position by the control-zone length.
fn unconstrained_local(bc: &BoundaryConditions) -> Result<(LocalPoly, f64)> {
    let horizon = bc.horizon();
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::DegenerateHorizon {
            t0: bc.t0,
            tm: bc.tm,
        });
    }
    let len = bc.cz_length.abs().max(f64::MIN_POSITIVE);
    // rows: p(0), v(0), p(1), -u(1); unknowns (a, b, c, d) in scaled time
    #[rustfmt::skip]
    let m = Matrix4::new(
        0.0,       0.0, 0.0, 1.0,
        0.0,       0.0, 1.0, 0.0,
        1.0 / 6.0, 0.5, 1.0, 1.0,
        -1.0,     -1.0, 0.0, 0.0,
    );
    let rhs = Vector4::new(bc.p0 / len, bc.v0 * horizon / len, bc.cz_length / len, 0.0);
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular boundary system".into()))?;
    let residual = (m * x - rhs).amax();
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::Numerical(format!(
            "boundary residual {residual:e} exceeds tolerance"
        )));
    }
    let poly = LocalPoly {
        p0: x[3] * len,
        v0: x[2] * len / horizon,
        u0: x[1] * len / (horizon * horizon),
        jerk: x[0] * len / (horizon * horizon * horizon),
    };
    Ok((poly, residual))
}

/// Unconstrained minimum-energy cubic `(a, b, c, d)` in absolute time.
pub fn solve_unconstrained(bc: &BoundaryConditions) -> Result<Cubic> {
    unconstrained_local(bc).map(|(poly, _)| poly.to_absolute(bc.t0))
}

/// Scaled residual of the boundary system solved by [`solve_unconstrained`].
pub fn boundary_residual(bc: &BoundaryConditions) -> Result<f64> {
    unconstrained_local(bc).map(|(_, r)| r)
}

/// Re-solves the unconstrained problem from the measured state `(t, p, v)`.
pub fn resolve_feedback(bc: &BoundaryConditions, t: f64, p: f64, v: f64) -> Result<Cubic> {
    if !(t >= bc.t0 && t < bc.tm) {
        return Err(Error::DegenerateHorizon { t0: t, tm: bc.tm });
    }
    let from_here = BoundaryConditions {
        t0: t,
        v0: v,
        tm: bc.tm,
        cz_length: bc.cz_length,
        p0: p,
    };
    solve_unconstrained(&from_here)
}

/// Single-arc trajectory of the unconstrained optimum, ignoring limits.
pub fn unconstrained_trajectory(bc: &BoundaryConditions) -> Result<PiecewiseTrajectory> {
    let (poly, _) = unconstrained_local(bc)?;
    Ok(PiecewiseTrajectory::single(Arc {
        kind: ArcKind::UnconstrainedCubic,
        start: bc.t0,
        end: bc.tm,
        poly,
    }))
}

/// Appends arcs from the running end state so junctions are continuous by construction.
struct ArcChain {
    arcs: Vec<Arc>,
    t: f64,
    state: State,
}

impl ArcChain {
    fn new(t0: f64, p0: f64, v0: f64) -> Self {
        ArcChain {
            arcs: Vec::new(),
            t: t0,
            state: State {
                p: p0,
                v: v0,
                u: 0.0,
            },
        }
    }

    fn push(&mut self, kind: ArcKind, duration: f64, u0: f64, jerk: f64) {
        if duration <= 0.0 {
            return;
        }
        let poly = LocalPoly {
            p0: self.state.p,
            v0: self.state.v,
            u0,
            jerk,
        };
        let arc = Arc {
            kind,
            start: self.t,
            end: self.t + duration,
            poly,
        };
        self.state = poly.eval(duration);
        self.t = arc.end;
        self.arcs.push(arc);
    }

    /// Closes the chain exactly at `tm` (absorbing rounding in the last arc).
    fn finish(mut self, tm: f64) -> Result<PiecewiseTrajectory> {
        if let Some(last) = self.arcs.last_mut() {
            last.end = tm;
        }
        PiecewiseTrajectory::new(self.arcs)
    }
}

/// Relative tolerance used when deciding whether a bound is violated.
const ACTIVE_TOL: f64 = 1e-12;

/// Minimum-energy trajectory respecting control and speed limits.
pub fn solve_with_constraints(
    bc: &BoundaryConditions,
    limits: &VehicleLimits,
) -> Result<PiecewiseTrajectory> {
    let horizon = bc.horizon();
    if !(horizon > 0.0) {
        return Err(Error::DegenerateHorizon {
            t0: bc.t0,
            tm: bc.tm,
        });
    }
    let v0 = bc.v0;
    let v_tol = ACTIVE_TOL * limits.v_max;
    if v0 > limits.v_max + v_tol || v0 < limits.v_min - v_tol {
        return Err(Error::InfeasibleEntry {
            v0,
            v_max: limits.v_max,
        });
    }
    let (poly, _) = unconstrained_local(bc)?;
    let terminal = poly.eval(horizon);
    let u_tol = ACTIVE_TOL * limits.u_max.max(-limits.u_min);
    let within = |s: &State| {
        s.u <= limits.u_max + u_tol
            && s.u >= limits.u_min - u_tol
            && s.v <= limits.v_max + v_tol
            && s.v >= limits.v_min - v_tol
    };
    // u is affine and v has its vertex at tm, so the extremes sit at the ends
    if within(&poly.eval(0.0)) && within(&terminal) {
        return Ok(PiecewiseTrajectory::single(Arc {
            kind: ArcKind::UnconstrainedCubic,
            start: bc.t0,
            end: bc.tm,
            poly,
        }));
    }

    let distance = bc.distance();
    let accelerating = poly.u0 > 0.0;
    let (bound, u_lim, v_lim) = if accelerating {
        (Bound::Upper, limits.u_max, limits.v_max)
    } else {
        (Bound::Lower, limits.u_min, limits.v_min)
    };
    let sign = if accelerating { 1.0 } else { -1.0 };
    let dist_tol = 1e-10 * distance.abs().max(1.0);
    let speed_gap = v_lim - v0;

    // Extreme reachable distance: saturated control, then saturated speed.
    let reach_time = speed_gap / u_lim;
    let extreme = if reach_time <= horizon {
        v_lim * horizon - speed_gap * speed_gap / (2.0 * u_lim)
    } else {
        v0 * horizon + 0.5 * u_lim * horizon * horizon
    };
    if sign * (distance - extreme) > dist_tol {
        return Err(Error::InfeasibleHorizon {
            distance,
            horizon,
            reason: format!(
                "the {} distance reachable within the limits is {extreme}",
                if accelerating { "largest" } else { "smallest" }
            ),
        });
    }

    let mut chain = ArcChain::new(bc.t0, bc.p0, v0);
    let control_arc = ArcKind::ControlSaturated(bound);
    let speed_arc = ArcKind::SpeedSaturated(bound);

    // Saturated control, then a linear ramp down to zero control at tm.
    if poly.u0 / u_lim > 1.0 {
        let deficit = v0 * horizon + 0.5 * u_lim * horizon * horizon - distance;
        let ramp = if deficit.abs() <= dist_tol {
            0.0
        } else {
            (6.0 * deficit / u_lim).max(0.0).sqrt().min(horizon)
        };
        let v_end = v0 + u_lim * (horizon - 0.5 * ramp);
        if sign * (v_end - v_lim) <= v_tol {
            chain.push(control_arc, horizon - ramp, u_lim, 0.0);
            if ramp > 0.0 {
                chain.push(ArcKind::UnconstrainedCubic, ramp, u_lim, -u_lim / ramp);
            }
            return chain.finish(bc.tm);
        }
    }

    // Speed bound active at the end: affine control reaching zero exactly
    // when the speed bound is hit, then cruise.
    if speed_gap.abs() > 0.0 {
        let ramp = 3.0 * (v_lim * horizon - distance) / speed_gap;
        let u_start = 2.0 * speed_gap / ramp;
        if ramp > 0.0 && ramp <= horizon * (1.0 + ACTIVE_TOL) && u_start / u_lim <= 1.0 + ACTIVE_TOL
        {
            let ramp = ramp.min(horizon);
            chain.push(ArcKind::UnconstrainedCubic, ramp, u_start, -u_start / ramp);
            chain.push(speed_arc, horizon - ramp, 0.0, 0.0);
            return chain.finish(bc.tm);
        }
    }

    // Saturated control, linear ramp to zero control at the speed bound, cruise.
    let slack = v_lim * horizon - speed_gap * speed_gap / (2.0 * u_lim) - distance;
    let ramp = if slack.abs() <= dist_tol {
        0.0
    } else {
        (24.0 * slack / u_lim).max(0.0).sqrt()
    };
    let ramp_max = 2.0 * speed_gap / u_lim;
    let saturated = reach_time - 0.5 * ramp;
    let on_bound = reach_time + 0.5 * ramp;
    if ramp <= ramp_max * (1.0 + 1e-9)
        && saturated >= -1e-9 * horizon
        && on_bound <= horizon * (1.0 + 1e-9)
    {
        let saturated = saturated.max(0.0);
        let ramp = ramp.min(horizon - saturated);
        chain.push(control_arc, saturated, u_lim, 0.0);
        if ramp > 0.0 {
            chain.push(ArcKind::UnconstrainedCubic, ramp, u_lim, -u_lim / ramp);
        }
        // the ramp leaves exactly v_lim; pin it against rounding
        chain.state.v = v_lim;
        chain.push(speed_arc, horizon - saturated - ramp, 0.0, 0.0);
        return chain.finish(bc.tm);
    }

    Err(Error::Numerical(format!(
        "no supported arc composition for t0={}, v0={}, tm={}, distance={} (saturated={saturated}, ramp={ramp})",
        bc.t0, bc.v0, bc.tm, distance
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::dynamics_lower_bound;

    fn case1_limits() -> VehicleLimits {
        VehicleLimits::new(-100.0, 0.2, 0.0, 13.0).unwrap()
    }

    #[test]
    fn cruise_is_the_unconstrained_optimum() {
        let c = solve_unconstrained(&BoundaryConditions::new(0.0, 10.0, 40.0, 400.0)).unwrap();
        assert!(c.a.abs() < 1e-15 && c.b.abs() < 1e-15);
        assert!((c.c - 10.0).abs() < 1e-12 && c.d.abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_is_degenerate() {
        let bc = BoundaryConditions::new(5.0, 10.0, 5.0, 400.0);
        assert!(matches!(
            solve_unconstrained(&bc),
            Err(Error::DegenerateHorizon { .. })
        ));
        assert!(matches!(
            solve_with_constraints(&bc, &case1_limits()),
            Err(Error::DegenerateHorizon { .. })
        ));
    }

    #[test]
    fn feasible_unconstrained_gives_single_arc() {
        let bc = BoundaryConditions::new(0.0, 10.0, 42.0, 400.0);
        let traj = solve_with_constraints(&bc, &case1_limits()).unwrap();
        assert_eq!(traj.arcs().len(), 1);
        let c = solve_unconstrained(&bc).unwrap();
        let abs = traj.arcs()[0].absolute();
        assert!((abs.a - c.a).abs() < 1e-15 && (abs.b - c.b).abs() < 1e-14);
    }

    #[test]
    fn full_throttle_bound_gives_bang_cruise() {
        let lim = case1_limits();
        let b = dynamics_lower_bound(0.0, 12.5, 400.0, &lim).unwrap();
        let traj = solve_with_constraints(&BoundaryConditions::new(0.0, 12.5, b.t_c, 400.0), &lim)
            .unwrap();
        let kinds: Vec<_> = traj.arcs().iter().map(|a| a.kind).collect();
        assert_eq!(
            kinds,
            vec![
                ArcKind::ControlSaturated(Bound::Upper),
                ArcKind::SpeedSaturated(Bound::Upper)
            ]
        );
        // switch after (13 - 12.5) / 0.2 = 2.5 s
        assert!((traj.arcs()[0].end - 2.5).abs() < 1e-6);
        let end = traj.terminal_state();
        assert!((end.p - 400.0).abs() < 1e-6);
        assert!((end.v - 13.0).abs() < 1e-9);
    }

    #[test]
    fn control_only_saturation() {
        let lim = VehicleLimits::new(-4.0, 0.5, 0.0, 30.0).unwrap();
        // unconstrained start control 3 (400 - 300) / 900 = 0.333.. with T = 30
        let bc = BoundaryConditions::new(0.0, 10.0, 25.0, 400.0);
        let unc = unconstrained_trajectory(&bc).unwrap();
        assert!(unc.arcs()[0].poly.u0 > 0.5);
        let traj = solve_with_constraints(&bc, &lim).unwrap();
        assert_eq!(traj.arcs().len(), 2);
        assert_eq!(traj.arcs()[0].kind, ArcKind::ControlSaturated(Bound::Upper));
        let end = traj.terminal_state();
        assert!((end.p - 400.0).abs() < 1e-9 * 400.0);
        assert!(end.u.abs() < 1e-12);
        assert!(traj.cost() >= unc.cost());
    }

    #[test]
    fn deceleration_to_standstill_and_wait() {
        let lim = VehicleLimits::new(-2.0, 2.0, 0.0, 15.0).unwrap();
        // creeping 50 m in 60 s from 10 m/s: must stop and wait
        let bc = BoundaryConditions::new(0.0, 10.0, 60.0, 50.0);
        let traj = solve_with_constraints(&bc, &lim).unwrap();
        let last = traj.arcs().last().unwrap();
        assert_eq!(last.kind, ArcKind::SpeedSaturated(Bound::Lower));
        assert!((traj.terminal_state().p - 50.0).abs() < 1e-8);
        for arc in traj.arcs() {
            for k in 0..=100 {
                let s = arc.eval(arc.start + arc.duration() * k as f64 / 100.0);
                assert!(s.v >= -1e-9 && s.u >= -2.0 - 1e-9);
            }
        }
    }

    #[test]
    fn unreachable_horizon() {
        let bc = BoundaryConditions::new(0.0, 10.0, 30.0, 400.0);
        assert!(matches!(
            solve_with_constraints(&bc, &case1_limits()),
            Err(Error::InfeasibleHorizon { .. })
        ));
    }

    #[test]
    fn feedback_on_own_trajectory_is_identity() {
        let bc = BoundaryConditions::new(0.0, 10.0, 50.0, 400.0);
        let c = solve_unconstrained(&bc).unwrap();
        let s = c.eval(20.0);
        let r = resolve_feedback(&bc, 20.0, s.p, s.v).unwrap();
        for (x, y) in [(c.a, r.a), (c.b, r.b), (c.c, r.c), (c.d, r.d)] {
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}
