//! Merging-zone entry scheduling.
//!
//! Each arriving vehicle gets the earliest merging-zone entry time that keeps
//! the queue order, the same-lane headway, the conflicting-path separation and
//! the vehicle's own acceleration limit. The recursion only looks at vehicles
//! already in the queue, so a vehicle's schedule is fixed at arrival.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{IntersectionGeometry, RelationLabel, VehicleLimits};

/// How the queue head picks its merging-zone entry time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "time", rename_all = "snake_case")]
pub enum FirstVehiclePolicy {
    /// Cruise at the entry speed (zero control).
    EnergyOptimal,
    /// Arrive as early as the acceleration limit allows.
    ThroughputOptimal,
    /// Externally assigned entry time.
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingCase {
    FirstVehicle,
    PredecessorOrder,
    SameLaneHeadway,
    ConflictSeparation,
    DynamicsLowerBound,
}

impl BindingCase {
    pub fn label(self) -> &'static str {
        match self {
            BindingCase::FirstVehicle => "first_vehicle",
            BindingCase::PredecessorOrder => "predecessor_order",
            BindingCase::SameLaneHeadway => "same_lane_headway",
            BindingCase::ConflictSeparation => "conflict_separation",
            BindingCase::DynamicsLowerBound => "dynamics_lower_bound",
        }
    }
}

/// Earliest physically reachable merging-zone entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsBound {
    /// The bound itself (`t1` or `t2`, whichever applies).
    pub t_c: f64,
    /// Speed at the merging zone on the full-throttle trajectory.
    pub vm_at_bound: f64,
    /// Accelerate to `v_max`, then cruise.
    pub t1: f64,
    /// Full throttle all the way, never reaching `v_max`.
    pub t2: f64,
    pub reaches_v_max: bool,
}

/// Full-throttle arrival bound for a vehicle entering at `(t0, v0)`.
pub fn dynamics_lower_bound(
    t0: f64,
    v0: f64,
    cz_length: f64,
    limits: &VehicleLimits,
) -> Result<DynamicsBound> {
    let (u_max, v_max) = (limits.u_max, limits.v_max);
    if v0 > v_max {
        return Err(Error::InfeasibleEntry { v0, v_max });
    }
    if v0 < 0.0 {
        return Err(Error::InfeasibleEntry { v0, v_max });
    }
    let t1 = t0 + cz_length / v_max + (v_max - v0).powi(2) / (2.0 * u_max * v_max);
    let v_full = (2.0 * cz_length * u_max + v0 * v0).sqrt();
    let t2 = t0 + (v_full - v0) / u_max;
    let reach_distance = (v_max * v_max - v0 * v0) / (2.0 * u_max);
    let reaches_v_max = reach_distance <= cz_length;
    Ok(if reaches_v_max {
        DynamicsBound {
            t_c: t1,
            vm_at_bound: v_max,
            t1,
            t2,
            reaches_v_max,
        }
    } else {
        DynamicsBound {
            t_c: t2,
            vm_at_bound: v_full,
            t1,
            t2,
            reaches_v_max,
        }
    })
}

/// Merging-zone entry time of the queue head.
pub fn first_vehicle_policy(
    policy: FirstVehiclePolicy,
    t0: f64,
    v0: f64,
    cz_length: f64,
    limits: &VehicleLimits,
) -> Result<f64> {
    let bound = dynamics_lower_bound(t0, v0, cz_length, limits)?;
    match policy {
        FirstVehiclePolicy::EnergyOptimal => {
            if v0 <= limits.v_min || v0 <= 0.0 {
                return Err(Error::InfeasibleHorizon {
                    distance: cz_length,
                    horizon: f64::INFINITY,
                    reason: format!("cruising requires an entry speed above v_min, got {v0}"),
                });
            }
            Ok(t0 + cz_length / v0)
        }
        FirstVehiclePolicy::ThroughputOptimal => Ok(bound.t_c),
        FirstVehiclePolicy::Explicit(t) => {
            if t < bound.t_c {
                Err(Error::InfeasibleSchedule {
                    requested: t,
                    bound: bound.t_c,
                })
            } else {
                Ok(t)
            }
        }
    }
}

/// A vehicle arriving at the control zone.
#[derive(Debug, Clone, PartialEq)]
pub struct Arrival {
    pub id: u64,
    pub lane: String,
    pub t0: f64,
    pub v0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub id: u64,
    pub lane: String,
    pub t0: f64,
    pub v0: f64,
    pub tm_star: f64,
    /// Merging-zone speed. Provisional until the trajectory is solved.
    pub vm: f64,
    pub binding_case: BindingCase,
    /// Relation of the queue predecessor; `None` for the queue head.
    pub relation: Option<RelationLabel>,
    pub t_c: f64,
    pub t1_bound: f64,
    pub t2_bound: f64,
}

/// Schedules `arrival` behind the vehicles already in `queue` (in queue order,
/// with final `tm_star` and `vm`).
///
/// Beyond the predecessor-based terms, every queued vehicle on a conflicting
/// path contributes its separation term. These extra terms only bind when
/// several non-conflicting vehicles share the merging zone, a situation the
/// plain predecessor recursion does not see.
pub fn schedule_next(
    queue: &[ScheduleEntry],
    arrival: &Arrival,
    geom: &IntersectionGeometry,
    limits: &VehicleLimits,
    policy: FirstVehiclePolicy,
) -> Result<ScheduleEntry> {
    let l = geom.cz_length;
    let bound = dynamics_lower_bound(arrival.t0, arrival.v0, l, limits)?;
    let mut entry = ScheduleEntry {
        id: arrival.id,
        lane: arrival.lane.clone(),
        t0: arrival.t0,
        v0: arrival.v0,
        tm_star: 0.0,
        vm: arrival.v0,
        binding_case: BindingCase::FirstVehicle,
        relation: None,
        t_c: bound.t_c,
        t1_bound: bound.t1,
        t2_bound: bound.t2,
    };
    geom.lane(&arrival.lane)
        .ok_or_else(|| Error::Config(format!("unknown lane {}", arrival.lane)))?;

    let Some(prev) = queue.last() else {
        entry.tm_star = first_vehicle_policy(policy, arrival.t0, arrival.v0, l, limits)?;
        if policy == FirstVehiclePolicy::ThroughputOptimal {
            entry.vm = bound.vm_at_bound;
        }
        return Ok(entry);
    };

    let label = geom.classify_relation(&prev.lane, &arrival.lane)?;
    entry.relation = Some(label);

    let lane_pred = queue.iter().rev().find(|e| e.lane == arrival.lane);
    if label == RelationLabel::SameLane && lane_pred.map(|k| k.id) != Some(prev.id) {
        return Err(Error::Internal(format!(
            "vehicle {} labelled same-lane but no lane predecessor found",
            arrival.id
        )));
    }

    let mut best = (prev.tm_star, BindingCase::PredecessorOrder);
    let mut consider = |t: f64, case: BindingCase| {
        if t > best.0 {
            best = (t, case);
        }
    };
    if let Some(k) = lane_pred {
        consider(
            k.tm_star + geom.safe_distance / k.vm,
            BindingCase::SameLaneHeadway,
        );
    }
    // the predecessor first, then any other conflicting vehicle still queued
    if label == RelationLabel::Conflicting {
        consider(
            prev.tm_star + geom.mz_spacing / prev.vm,
            BindingCase::ConflictSeparation,
        );
    }
    for j in queue {
        if geom.classify_relation(&j.lane, &arrival.lane)? == RelationLabel::Conflicting {
            consider(
                j.tm_star + geom.mz_spacing / j.vm,
                BindingCase::ConflictSeparation,
            );
        }
    }
    consider(bound.t_c, BindingCase::DynamicsLowerBound);

    entry.tm_star = best.0;
    entry.binding_case = best.1;
    if best.1 == BindingCase::DynamicsLowerBound {
        entry.vm = bound.vm_at_bound;
    }
    Ok(entry)
}
