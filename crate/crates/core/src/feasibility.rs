//! Rear-end safety of a follower behind its same-lane predecessor.
//!
//! The gap `s(t) = p_k(t) - p_i(t)` is a piecewise cubic in time. Pieces are
//! cut at every junction of either trajectory and at the predecessor's
//! merging-zone entry, after which the predecessor cruises at constant speed.
//! The minimum gap is found per piece from its endpoints and the roots of the
//! quadratic gap rate, so membership of an arrival `(τ, υ)` in the feasible
//! region is decided exactly rather than by sampling.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Cubic, LocalPoly, PiecewiseTrajectory, VehicleLimits, VehicleRecord};
use crate::ocp::{solve_with_constraints, BoundaryConditions};
use crate::scheduler::dynamics_lower_bound;

/// Which regime of the predecessor/follower pair a gap piece belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GapCase {
    /// Both vehicles on unconstrained arcs inside the control zone.
    BothUnconstrained,
    /// Predecessor cruising through (or past) the merging zone, follower unconstrained.
    PredecessorInMergingZone,
    /// Predecessor on a saturated arc, follower unconstrained.
    PredecessorConstrained,
    /// Follower on a saturated arc.
    FollowerConstrained,
}

/// Where on its piece the minimum gap was attained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MinLocation {
    PieceStart,
    PieceEnd,
    Interior,
}

/// Everything the follower knows about its same-lane predecessor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredecessorContext {
    pub trajectory: PiecewiseTrajectory,
    /// Merging-zone speed of the predecessor.
    pub vm: f64,
    pub cz_length: f64,
    pub mz_side: f64,
    pub safe_distance: f64,
    /// Limits used when planning the follower.
    pub limits: VehicleLimits,
}

impl PredecessorContext {
    pub fn new(
        trajectory: PiecewiseTrajectory,
        cz_length: f64,
        mz_side: f64,
        safe_distance: f64,
        limits: VehicleLimits,
    ) -> Result<Self> {
        if !(safe_distance < mz_side) {
            return Err(Error::Context(format!(
                "safe distance {safe_distance} must be below merging-zone side {mz_side}"
            )));
        }
        let vm = trajectory.terminal_state().v;
        if !(vm > 0.0) {
            return Err(Error::Context(format!(
                "predecessor merging-zone speed {vm} must be positive"
            )));
        }
        Ok(PredecessorContext {
            trajectory,
            vm,
            cz_length,
            mz_side,
            safe_distance,
            limits,
        })
    }

    pub fn from_record(
        k: &VehicleRecord,
        mz_side: f64,
        safe_distance: f64,
        limits: VehicleLimits,
    ) -> Result<Self> {
        Self::new(
            k.trajectory.clone(),
            k.mz_entry_position(),
            mz_side,
            safe_distance,
            limits,
        )
    }

    pub fn t_k0(&self) -> f64 {
        self.trajectory.start()
    }

    pub fn v_k0(&self) -> f64 {
        self.trajectory.arcs()[0].poly.v0
    }

    pub fn t_km(&self) -> f64 {
        self.trajectory.end()
    }

    /// Merging-zone exit time of the predecessor.
    pub fn t_kf(&self) -> f64 {
        self.t_km() + self.mz_side / self.vm
    }

    /// Predecessor position, extended past the merging-zone entry at constant speed.
    pub fn predecessor_position(&self, t: f64) -> f64 {
        if t > self.t_km() {
            self.cz_length + self.vm * (t - self.t_km())
        } else {
            self.trajectory.arc_at(t).eval(t).p
        }
    }

    /// Entry time of a follower directly behind the predecessor: the same-lane
    /// headway or the follower's dynamic bound, whichever is later.
    pub fn follower_entry_time(&self, tau: f64, upsilon: f64) -> Result<f64> {
        let bound = dynamics_lower_bound(tau, upsilon, self.cz_length, &self.limits)?;
        Ok((self.t_km() + self.safe_distance / self.vm).max(bound.t_c))
    }

    /// Earliest arrival time at which the predecessor is already `δ` into the
    /// zone, i.e. the smallest root of `p_k(τ) = δ`.
    pub fn entry_safe_time(&self) -> f64 {
        let target = self.safe_distance;
        let f = |t: f64| self.predecessor_position(t) - target;
        let speed = |t: f64| {
            if t > self.t_km() {
                self.vm
            } else {
                self.trajectory.arc_at(t).eval(t).v
            }
        };
        let lo = self.t_k0();
        let mut hi = self.t_kf();
        while f(hi) < 0.0 {
            hi += self.mz_side / self.vm;
        }
        newton_bisect(f, speed, lo, hi, 1e-10, 200)
    }
}

/// Root of a nondecreasing `f` on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
/// Newton steps are taken when they stay inside the bracket; otherwise bisect.
fn newton_bisect(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let mut t = 0.5 * (lo + hi);
    for _ in 0..max_iter {
        let ft = f(t);
        if ft == 0.0 {
            return t;
        }
        if ft < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= tol {
            break;
        }
        let slope = df(t);
        let newton = t - ft / slope;
        t = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    // smallest root: prefer the left end of the final bracket
    if f(lo) >= 0.0 {
        lo
    } else {
        hi.min(t.max(lo))
    }
}

/// One cubic piece of the gap `s(t) = A t³ + B t² + C t + D` on `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPolynomial {
    pub start: f64,
    pub end: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub case: GapCase,
    /// Same piece in local time from `start`, used for root finding.
    #[serde(skip)]
    local: LocalPoly,
}

impl GapPolynomial {
    fn from_pieces(start: f64, end: f64, lead: &Cubic, follow: &Cubic, case: GapCase) -> Self {
        let a = (lead.a - follow.a) / 6.0;
        let b = (lead.b - follow.b) / 2.0;
        let c = lead.c - follow.c;
        let d = lead.d - follow.d;
        let (l, f) = (lead.local(start), follow.local(start));
        GapPolynomial {
            start,
            end,
            a,
            b,
            c,
            d,
            case,
            local: LocalPoly {
                p0: l.p0 - f.p0,
                v0: l.v0 - f.v0,
                u0: l.u0 - f.u0,
                jerk: l.jerk - f.jerk,
            },
        }
    }

    /// Gap from the absolute coefficients.
    pub fn eval(&self, t: f64) -> f64 {
        ((self.a * t + self.b) * t + self.c) * t + self.d
    }

    /// Gap rate `3A t² + 2B t + C`.
    pub fn rate(&self, t: f64) -> f64 {
        (3.0 * self.a * t + 2.0 * self.b) * t + self.c
    }

    /// Gap acceleration `6A t + 2B`.
    pub fn curvature(&self, t: f64) -> f64 {
        6.0 * self.a * t + 2.0 * self.b
    }

    /// Discriminant `4B² − 12AC` of the gap-rate quadratic.
    pub fn discriminant(&self) -> f64 {
        4.0 * self.b * self.b - 12.0 * self.a * self.c
    }

    /// Minimum over the piece; ties go to the earliest time.
    fn minimum(&self) -> (f64, f64, MinLocation) {
        let h = self.end - self.start;
        let g = &self.local;
        let mut best = (g.p0, self.start, MinLocation::PieceStart);
        let mut offer = |sigma: f64, loc: MinLocation| {
            let s = g.eval(sigma).p;
            if s < best.0 {
                best = (s, self.start + sigma, loc);
            }
        };
        for sigma in critical_points(g, h) {
            offer(sigma, MinLocation::Interior);
        }
        offer(h, MinLocation::PieceEnd);
        best
    }
}

/// Interior minima of a local gap polynomial on `(0, h)`: roots of the rate
/// with nonnegative curvature, sorted by time.
fn critical_points(g: &LocalPoly, h: f64) -> Vec<f64> {
    // rate: v0 + u0 σ + (jerk / 2) σ²
    let (qa, qb, qc) = (0.5 * g.jerk, g.u0, g.v0);
    let scale = qa.abs() * h * h + qb.abs() * h + qc.abs();
    let mut roots = Vec::with_capacity(2);
    if scale == 0.0 {
        return roots;
    }
    if qa.abs() * h * h < 1e-12 * scale {
        if qb.abs() * h >= 1e-12 * scale {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc > 0.0 {
            let q = -0.5 * (qb + qb.signum() * disc.sqrt());
            let (r1, r2) = if q != 0.0 {
                (q / qa, qc / q)
            } else {
                (0.0, 0.0)
            };
            roots.push(r1);
            roots.push(r2);
        } else if disc == 0.0 {
            roots.push(-qb / (2.0 * qa));
        }
    }
    roots.retain(|&s| s > 0.0 && s < h && g.u0 + g.jerk * s >= 0.0);
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

/// Gap pieces for the follower trajectory `follower` behind the predecessor.
pub fn gap_segments_for(
    ctx: &PredecessorContext,
    follower: &PiecewiseTrajectory,
) -> Result<Vec<GapPolynomial>> {
    let tau = follower.start();
    let tm = follower.end();
    if tau < ctx.t_k0() {
        return Err(Error::Context(format!(
            "follower entry {tau} precedes predecessor entry {}",
            ctx.t_k0()
        )));
    }
    let t_km = ctx.t_km();
    let mut cuts: Vec<f64> = vec![tau, tm];
    cuts.extend(ctx.trajectory.junctions());
    cuts.push(t_km);
    cuts.extend(follower.junctions());
    cuts.retain(|&t| t >= tau && t <= tm);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));

    let cruise = Cubic {
        a: 0.0,
        b: 0.0,
        c: ctx.vm,
        d: ctx.cz_length - ctx.vm * t_km,
    };
    let mut out = Vec::with_capacity(cuts.len());
    for w in cuts.windows(2) {
        let (start, end) = (w[0], w[1]);
        let mid = 0.5 * (start + end);
        let follow_arc = follower.arc_at(mid);
        let (lead, lead_constrained) = if mid > t_km {
            (cruise, false)
        } else {
            let arc = ctx.trajectory.arc_at(mid);
            (arc.absolute(), arc.kind.is_constrained())
        };
        let case = if follow_arc.kind.is_constrained() {
            GapCase::FollowerConstrained
        } else if mid > t_km {
            GapCase::PredecessorInMergingZone
        } else if lead_constrained {
            GapCase::PredecessorConstrained
        } else {
            GapCase::BothUnconstrained
        };
        out.push(GapPolynomial::from_pieces(
            start,
            end,
            &lead,
            &follow_arc.absolute(),
            case,
        ));
    }
    if out.is_empty() {
        // zero-length horizon: a single degenerate piece
        let lead = if tau > t_km {
            cruise
        } else {
            ctx.trajectory.arc_at(tau).absolute()
        };
        out.push(GapPolynomial::from_pieces(
            tau,
            tau,
            &lead,
            &follower.arc_at(tau).absolute(),
            GapCase::BothUnconstrained,
        ));
    }
    Ok(out)
}

/// Gap pieces up to the follower's merging-zone exit (or the predecessor's,
/// whichever comes first). Past its own entry the follower cruises at its
/// terminal speed, so a faster follower can close the gap inside the zone.
pub fn gap_segments_through_exit(
    ctx: &PredecessorContext,
    follower: &PiecewiseTrajectory,
) -> Result<Vec<GapPolynomial>> {
    let mut segs = gap_segments_for(ctx, follower)?;
    let tm = follower.end();
    let vm = follower.terminal_state().v;
    if !(vm > 0.0) {
        return Ok(segs);
    }
    let end = (tm + ctx.mz_side / vm).min(ctx.t_kf());
    if end > tm {
        let lead = Cubic {
            a: 0.0,
            b: 0.0,
            c: ctx.vm,
            d: ctx.cz_length - ctx.vm * ctx.t_km(),
        };
        let follow = Cubic {
            a: 0.0,
            b: 0.0,
            c: vm,
            d: follower.terminal_state().p - vm * tm,
        };
        segs.push(GapPolynomial::from_pieces(
            tm,
            end,
            &lead,
            &follow,
            GapCase::PredecessorInMergingZone,
        ));
    }
    Ok(segs)
}

/// Plans the follower for arrival `(tau, upsilon)` with entry time `tm` and
/// returns its gap pieces.
pub fn gap_segments(
    ctx: &PredecessorContext,
    tau: f64,
    upsilon: f64,
    tm: f64,
) -> Result<Vec<GapPolynomial>> {
    if tau < ctx.t_k0() {
        return Err(Error::Context(format!(
            "follower entry {tau} precedes predecessor entry {}",
            ctx.t_k0()
        )));
    }
    let follower = solve_with_constraints(
        &BoundaryConditions::new(tau, upsilon, tm, ctx.cz_length),
        &ctx.limits,
    )?;
    gap_segments_for(ctx, &follower)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinGap {
    pub s_star: f64,
    pub t_star: f64,
    pub case: GapCase,
    pub location: MinLocation,
}

/// Global minimum of the gap over all pieces (earliest time on ties).
pub fn min_gap(segments: &[GapPolynomial]) -> MinGap {
    let mut best: Option<MinGap> = None;
    for seg in segments {
        let (s, t, location) = seg.minimum();
        if best.map_or(true, |b| s < b.s_star) {
            best = Some(MinGap {
                s_star: s,
                t_star: t,
                case: seg.case,
                location,
            });
        }
    }
    best.expect("at least one gap piece")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub feasible: bool,
    pub witness: MinGap,
}

/// Default membership tolerance in meters.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Checks a planned follower trajectory against the safe distance.
pub fn check_trajectory(
    ctx: &PredecessorContext,
    follower: &PiecewiseTrajectory,
    tolerance: f64,
) -> Result<Verdict> {
    let witness = min_gap(&gap_segments_for(ctx, follower)?);
    Ok(Verdict {
        feasible: witness.s_star >= ctx.safe_distance - tolerance,
        witness,
    })
}

/// Like [`check_trajectory`] but also covers the shared merging-zone transit.
pub fn check_through_exit(
    ctx: &PredecessorContext,
    follower: &PiecewiseTrajectory,
    tolerance: f64,
) -> Result<Verdict> {
    let witness = min_gap(&gap_segments_through_exit(ctx, follower)?);
    Ok(Verdict {
        feasible: witness.s_star >= ctx.safe_distance - tolerance,
        witness,
    })
}

/// Whether arrival `(tau, upsilon)` with merging-zone entry `tm` keeps the gap.
pub fn is_feasible(
    ctx: &PredecessorContext,
    tau: f64,
    upsilon: f64,
    tm: f64,
    tolerance: f64,
) -> Result<Verdict> {
    let witness = min_gap(&gap_segments(ctx, tau, upsilon, tm)?);
    Ok(Verdict {
        feasible: witness.s_star >= ctx.safe_distance - tolerance,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RasterCell {
    pub tau: f64,
    pub upsilon: f64,
    /// Minimum gap; NaN when no admissible trajectory exists for the cell.
    pub s_star: f64,
    pub feasible: bool,
}

/// Evaluates membership on a `tau × upsilon` grid (row-major over `tau`
/// rows, `upsilon` fastest). Each cell's entry time comes from
/// [`PredecessorContext::follower_entry_time`].
pub fn feasibility_map(
    ctx: &PredecessorContext,
    tau_range: (f64, f64),
    upsilon_range: (f64, f64),
    resolution: (usize, usize),
    tolerance: f64,
) -> Result<Vec<RasterCell>> {
    let (nt, nv) = resolution;
    if nt < 2 || nv < 2 {
        return Err(Error::Config(format!(
            "raster resolution must be at least 2x2, got {nt}x{nv}"
        )));
    }
    if !(tau_range.1 >= tau_range.0 && upsilon_range.1 >= upsilon_range.0) {
        return Err(Error::Config("raster ranges must be nonempty".into()));
    }
    let lerp =
        |(lo, hi): (f64, f64), i: usize, n: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let mut cells = Vec::with_capacity(nt * nv);
    for it in 0..nt {
        let tau = lerp(tau_range, it, nt);
        for iv in 0..nv {
            let upsilon = lerp(upsilon_range, iv, nv);
            let verdict = ctx
                .follower_entry_time(tau, upsilon)
                .and_then(|tm| is_feasible(ctx, tau, upsilon, tm, tolerance));
            cells.push(match verdict {
                Ok(v) => RasterCell {
                    tau,
                    upsilon,
                    s_star: v.witness.s_star,
                    feasible: v.feasible,
                },
                Err(_) => RasterCell {
                    tau,
                    upsilon,
                    s_star: f64::NAN,
                    feasible: false,
                },
            });
        }
    }
    Ok(cells)
}

/// Closed-form position cubic `K_A t³ + K_B t² + K_C t + K_D` of a vehicle
/// that covers `cz_length` between `(t0, v0)` and `(tm, vm)` on one
/// unconstrained arc.
pub fn unconstrained_position_terms(
    t0: f64,
    v0: f64,
    tm: f64,
    vm: f64,
    cz_length: f64,
) -> [f64; 4] {
    let l = cz_length;
    let dt = t0 - tm;
    let q = dt * dt * dt;
    [
        (2.0 * l + (vm + v0) * dt) / q,
        -(3.0 * l * (t0 + tm) + (v0 * (t0 + 2.0 * tm) + vm * (2.0 * t0 + tm)) * dt) / q,
        (6.0 * t0 * tm * l
            + (v0 * (tm * tm + 2.0 * t0 * tm) + vm * (t0 * t0 + 2.0 * tm * t0)) * dt)
            / q,
        (l * (t0 * t0 * t0 - 3.0 * t0 * t0 * tm) - (v0 * t0 * tm * tm + vm * t0 * t0 * tm) * dt)
            / q,
    ]
}

/// Gap coefficients while both vehicles are on their single unconstrained arc.
pub fn control_zone_gap_terms(
    k: (f64, f64, f64, f64),
    i: (f64, f64, f64, f64),
    cz_length: f64,
) -> [f64; 4] {
    let kt = unconstrained_position_terms(k.0, k.1, k.2, k.3, cz_length);
    let it = unconstrained_position_terms(i.0, i.1, i.2, i.3, cz_length);
    [kt[0] - it[0], kt[1] - it[1], kt[2] - it[2], kt[3] - it[3]]
}

/// Gap coefficients while the predecessor cruises at `speed` from position
/// `anchor_p` at time `anchor_t` and the follower is on its unconstrained arc.
pub fn cruising_predecessor_gap_terms(
    speed: f64,
    anchor_t: f64,
    anchor_p: f64,
    i: (f64, f64, f64, f64),
    cz_length: f64,
) -> [f64; 4] {
    let it = unconstrained_position_terms(i.0, i.1, i.2, i.3, cz_length);
    [
        -it[0],
        -it[1],
        speed - it[2],
        anchor_p - speed * anchor_t - it[3],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arc, ArcKind};

    fn cruise_traj(t0: f64, v: f64, len: f64) -> PiecewiseTrajectory {
        PiecewiseTrajectory::single(Arc {
            kind: ArcKind::UnconstrainedCubic,
            start: t0,
            end: t0 + len / v,
            poly: LocalPoly {
                p0: 0.0,
                v0: v,
                u0: 0.0,
                jerk: 0.0,
            },
        })
    }

    fn limits() -> VehicleLimits {
        VehicleLimits::new(-4.0, 2.0, 0.0, 13.0).unwrap()
    }

    fn cruising_leader() -> PredecessorContext {
        PredecessorContext::new(cruise_traj(0.0, 10.0, 400.0), 400.0, 30.0, 10.0, limits()).unwrap()
    }

    #[test]
    fn hermite_terms_match_cruise() {
        let k = unconstrained_position_terms(0.0, 10.0, 40.0, 10.0, 400.0);
        assert!(k[0].abs() < 1e-15 && k[1].abs() < 1e-14);
        assert!((k[2] - 10.0).abs() < 1e-12 && k[3].abs() < 1e-10);
    }

    #[test]
    fn constant_offset_gap() {
        let ctx = cruising_leader();
        // same cruise, 2 s later: constant gap of 20 m
        let follower = cruise_traj(2.0, 10.0, 400.0);
        let segs = gap_segments_for(&ctx, &follower).unwrap();
        let m = min_gap(&segs);
        assert!((m.s_star - 20.0).abs() < 1e-9);
        assert_eq!(m.t_star, 2.0);
        assert_eq!(m.location, MinLocation::PieceStart);
    }

    #[test]
    fn two_pieces_for_unconstrained_pair() {
        let ctx = cruising_leader();
        let segs = gap_segments(&ctx, 3.0, 10.0, 41.0).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].case, GapCase::BothUnconstrained);
        assert_eq!(segs[1].case, GapCase::PredecessorInMergingZone);
        assert_eq!(segs[0].end, 40.0);
        // predecessor terms of the first piece are those of p_k = 10 t
        let k = unconstrained_position_terms(0.0, 10.0, 40.0, 10.0, 400.0);
        assert!(k[0].abs() < 1e-15 && (k[2] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn follower_before_predecessor_is_an_error() {
        let ctx =
            PredecessorContext::new(cruise_traj(5.0, 10.0, 400.0), 400.0, 30.0, 10.0, limits())
                .unwrap();
        assert!(matches!(
            gap_segments(&ctx, 4.0, 10.0, 50.0),
            Err(Error::Context(_))
        ));
    }

    #[test]
    fn arrival_after_predecessor_exit_is_feasible() {
        let ctx = cruising_leader();
        let tau = ctx.t_kf();
        for upsilon in [1.0, 6.5, 12.0] {
            let tm = ctx.follower_entry_time(tau, upsilon).unwrap();
            let v = is_feasible(&ctx, tau, upsilon, tm, DEFAULT_TOLERANCE).unwrap();
            assert!(v.feasible);
            assert!(v.witness.s_star > 30.0);
        }
    }

    #[test]
    fn entry_at_safe_time_is_on_the_boundary() {
        let ctx = cruising_leader();
        let t_delta = ctx.entry_safe_time();
        assert!((t_delta - 1.0).abs() < 1e-9);
        let follower = cruise_traj(t_delta, 10.0, 400.0);
        let v = check_trajectory(&ctx, &follower, 0.0).unwrap();
        assert!(v.feasible);
        assert!((v.witness.s_star - 10.0).abs() < 1e-9);
    }

    #[test]
    fn interior_minimum_found() {
        // follower enters fast and decelerates below the predecessor speed
        let ctx =
            PredecessorContext::new(cruise_traj(0.0, 8.0, 400.0), 400.0, 30.0, 10.0, limits())
                .unwrap();
        let segs = gap_segments(&ctx, 5.0, 13.0, 57.5).unwrap();
        let m = min_gap(&segs);
        assert_eq!(m.location, MinLocation::Interior);
        assert!(m.t_star > 5.0 && m.t_star < 50.0);
        assert!(m.s_star < 10.0);
        // dense sampling never goes below the analytic minimum
        let mut dense = f64::INFINITY;
        for seg in &segs {
            let n = 20_000;
            for j in 0..=n {
                let t = seg.start + (seg.end - seg.start) * j as f64 / n as f64;
                dense = dense.min(seg.eval(t));
            }
        }
        assert!(dense >= m.s_star - 1e-9 && dense - m.s_star < 1e-4);
    }

    #[test]
    fn faster_follower_closes_gap_in_merging_zone() {
        let ctx =
            PredecessorContext::new(cruise_traj(0.0, 8.0, 400.0), 400.0, 30.0, 10.0, limits())
                .unwrap();
        // enters 80 m behind at 13 m/s, scheduled at the same-lane headway
        let follower = solve_with_constraints(
            &BoundaryConditions::new(10.0, 13.0, 51.25, 400.0),
            &ctx.limits,
        )
        .unwrap();
        assert!(follower.terminal_state().v > 8.0);
        assert!(check_trajectory(&ctx, &follower, 0.0).unwrap().feasible);
        let v = check_through_exit(&ctx, &follower, 0.0).unwrap();
        assert!(!v.feasible);
        assert!((v.witness.t_star - ctx.t_kf()).abs() < 1e-9);
    }

    #[test]
    fn small_raster_past_exit_all_feasible() {
        let ctx = cruising_leader();
        let t = ctx.t_kf();
        let cells = feasibility_map(
            &ctx,
            (t + 1.0, t + 5.0),
            (5.0, 12.0),
            (2, 2),
            DEFAULT_TOLERANCE,
        )
        .unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.feasible));
        assert!(feasibility_map(&ctx, (0.0, 1.0), (1.0, 2.0), (1, 5), 0.0).is_err());
    }
}
