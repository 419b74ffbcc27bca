//! Safety monitors run over finished schedules. A violation in coordinated
//! mode means a bug, not an expected outcome.

use serde::Serialize;

use crate::feasibility::{check_through_exit, PredecessorContext};
use crate::model::{IntersectionGeometry, RelationLabel, VehicleLimits, VehicleRecord};

/// Gap may dip this far below the safe distance before it counts.
pub const REAR_END_SLACK: f64 = 1e-6;
/// Relative slack on merging-zone interval comparisons.
pub const LATERAL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RearEndReport {
    pub leader: u64,
    pub follower: u64,
    /// Minimum over the sampling grid.
    pub min_gap: f64,
    pub t_min: f64,
    /// Minimum of the piecewise-cubic gap, when it could be formed.
    pub analytic_min: Option<f64>,
    /// Runs of grid points below the safe distance, as `(first, last)` sample times.
    pub violations: Vec<(f64, f64)>,
}

impl RearEndReport {
    pub fn violated(&self, delta: f64) -> bool {
        !self.violations.is_empty()
            || self
                .analytic_min
                .is_some_and(|m| m < delta - REAR_END_SLACK)
    }
}

/// Samples `p_k - p_i` on the common time domain of two same-lane vehicles
/// (both extended through the merging zone at constant speed).
pub fn monitor_rear_end(
    k: &VehicleRecord,
    i: &VehicleRecord,
    delta: f64,
    sample_step: f64,
    mz_side: f64,
) -> RearEndReport {
    let start = i.t0.max(k.t0);
    let end = i.tf.min(k.tf);
    let mut report = RearEndReport {
        leader: k.id,
        follower: i.id,
        min_gap: f64::INFINITY,
        t_min: start,
        analytic_min: None,
        violations: Vec::new(),
    };
    if end < start {
        return report;
    }
    let gap = |t: f64| k.position_at(t).unwrap_or(f64::NAN) - i.position_at(t).unwrap_or(f64::NAN);
    let n = ((end - start) / sample_step).floor() as usize;
    let mut run: Option<(f64, f64)> = None;
    let mut visit = |t: f64, report: &mut RearEndReport| {
        let s = gap(t);
        if s < report.min_gap || s.is_nan() {
            report.min_gap = s;
            report.t_min = t;
        }
        if !(s >= delta - REAR_END_SLACK) {
            run = Some(run.map_or((t, t), |(a, _)| (a, t)));
        } else if let Some(r) = run.take() {
            report.violations.push(r);
        }
    };
    for j in 0..=n {
        visit(start + j as f64 * sample_step, &mut report);
    }
    if start + n as f64 * sample_step < end {
        visit(end, &mut report);
    }
    if let Some(r) = run.take() {
        report.violations.push(r);
    }

    if i.t0 >= k.t0 && k.vm > 0.0 && delta < mz_side {
        // limits only matter for planning; any valid pair will do here
        let limits = VehicleLimits {
            u_min: -1.0,
            u_max: 1.0,
            v_min: 0.0,
            v_max: f64::MAX,
        };
        if let Ok(ctx) = PredecessorContext::new(
            k.trajectory.clone(),
            k.mz_entry_position(),
            mz_side,
            delta,
            limits,
        ) {
            if let Ok(v) = check_through_exit(&ctx, &i.trajectory, 0.0) {
                report.analytic_min = Some(v.witness.s_star);
            }
        }
    }
    report
}

/// Consecutive same-lane pairs `(leader, follower)` by control-zone entry.
pub fn same_lane_pairs(records: &[VehicleRecord]) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        records[a]
            .t0
            .partial_cmp(&records[b].t0)
            .unwrap()
            .then(records[a].id.cmp(&records[b].id))
    });
    let mut last: std::collections::BTreeMap<&str, usize> = Default::default();
    let mut pairs = Vec::new();
    for idx in order {
        if let Some(prev) = last.insert(records[idx].lane.as_str(), idx) {
            pairs.push((prev, idx));
        }
    }
    pairs
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LateralViolation {
    pub first: u64,
    pub second: u64,
    /// Earliest admissible entry of `second`.
    pub required_entry: f64,
    pub actual_entry: f64,
}

/// Checks every conflicting pair: the later vehicle may not enter the merging
/// zone before the earlier one has covered the conflict spacing (its exit
/// when the spacing equals the zone side). Touching intervals are allowed.
pub fn monitor_lateral(
    records: &[VehicleRecord],
    geom: &IntersectionGeometry,
) -> Vec<LateralViolation> {
    let mut order: Vec<&VehicleRecord> = records.iter().collect();
    order.sort_by(|a, b| a.tm.partial_cmp(&b.tm).unwrap().then(a.id.cmp(&b.id)));
    let mut out = Vec::new();
    for (n, a) in order.iter().enumerate() {
        let required = a.tm + geom.mz_spacing / a.vm;
        for b in &order[n + 1..] {
            let slack = LATERAL_SLACK * required.abs().max(1.0);
            if b.tm >= required - slack {
                break;
            }
            if geom.classify_relation(&a.lane, &b.lane) == Ok(RelationLabel::Conflicting) {
                out.push(LateralViolation {
                    first: a.id,
                    second: b.id,
                    required_entry: required,
                    actual_entry: b.tm,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arc, ArcKind, Heading, Lane, LocalPoly, PiecewiseTrajectory};

    fn cruise(id: u64, lane: &str, t0: f64, v: f64) -> VehicleRecord {
        let traj = PiecewiseTrajectory::single(Arc {
            kind: ArcKind::UnconstrainedCubic,
            start: t0,
            end: t0 + 400.0 / v,
            poly: LocalPoly {
                p0: 0.0,
                v0: v,
                u0: 0.0,
                jerk: 0.0,
            },
        });
        VehicleRecord::from_trajectory(id, 1, None, lane.into(), 30.0, traj)
    }

    fn geom() -> IntersectionGeometry {
        IntersectionGeometry::new(
            400.0,
            30.0,
            10.0,
            None,
            vec![
                Lane::straight("E", Heading::Eastbound),
                Lane::straight("N", Heading::Northbound),
            ],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn headway_exactly_delta() {
        let k = cruise(1, "E", 0.0, 10.0);
        let i = cruise(2, "E", 1.0, 10.0);
        let r = monitor_rear_end(&k, &i, 10.0, 0.1, 30.0);
        assert!((r.min_gap - 10.0).abs() < 1e-9);
        assert!(!r.violated(10.0));
        assert!((r.analytic_min.unwrap() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn entry_at_predecessor_exit() {
        let k = cruise(1, "E", 0.0, 10.0);
        let i = cruise(2, "E", k.tf, 10.0);
        let r = monitor_rear_end(&k, &i, 10.0, 0.1, 30.0);
        assert!(r.min_gap > 30.0);
        assert!(!r.violated(10.0));
    }

    #[test]
    fn touching_intervals_allowed() {
        let a = cruise(1, "E", 0.0, 10.0);
        assert!(monitor_lateral(std::slice::from_ref(&a), &geom()).is_empty());
        let b = cruise(2, "N", a.tf - 40.0, 10.0);
        assert_eq!(b.tm, a.tf);
        assert!(monitor_lateral(&[a.clone(), b], &geom()).is_empty());
        let c = cruise(3, "N", a.tf - 40.0 - 0.1, 10.0);
        let v = monitor_lateral(&[a, c], &geom());
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].first, v[0].second), (1, 3));
    }

    #[test]
    fn pairs_follow_entry_order() {
        let recs = vec![
            cruise(1, "E", 0.0, 10.0),
            cruise(2, "N", 1.0, 10.0),
            cruise(3, "E", 2.0, 10.0),
        ];
        assert_eq!(same_lane_pairs(&recs), vec![(0, 2)]);
    }
}
