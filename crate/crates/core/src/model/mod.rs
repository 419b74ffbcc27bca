//! Domain types shared across the crate: intersection layout, vehicle
//! limits, piecewise trajectories and per-vehicle records.

mod geometry;
mod trajectory;

pub use geometry::{Heading, IntersectionGeometry, Lane, RelationLabel, VehicleLimits};
pub use trajectory::{
    trajectory_cost, Arc, ArcCoefficients, ArcKind, Bound, Cubic, LocalPoly, PiecewiseTrajectory,
    State, CONTINUITY_TOL,
};

use crate::error::Result;

/// One admitted vehicle: identity, boundary data, schedule and planned motion.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleRecord {
    /// Unique index assigned by the coordinator.
    pub id: u64,
    /// Position in the coordinator queue at admission (1-based).
    pub queue_position: usize,
    /// Relation of the queue predecessor to this vehicle; `None` for the queue head.
    pub relation: Option<RelationLabel>,
    pub lane: String,
    /// Control-zone entry time.
    pub t0: f64,
    pub v0: f64,
    /// Merging-zone entry time.
    pub tm: f64,
    /// Merging-zone (constant) speed.
    pub vm: f64,
    /// Merging-zone exit time.
    pub tf: f64,
    pub trajectory: PiecewiseTrajectory,
}

impl VehicleRecord {
    /// Builds a record from its trajectory; `vm` and `tf` follow from the
    /// terminal speed and the constant-speed merging-zone transit.
    pub fn from_trajectory(
        id: u64,
        queue_position: usize,
        relation: Option<RelationLabel>,
        lane: String,
        mz_side: f64,
        trajectory: PiecewiseTrajectory,
    ) -> Self {
        let start = trajectory
            .eval_state(trajectory.start())
            .expect("start in domain");
        let vm = trajectory.terminal_state().v;
        let tm = trajectory.end();
        VehicleRecord {
            id,
            queue_position,
            relation,
            lane,
            t0: trajectory.start(),
            v0: start.v,
            tm,
            vm,
            tf: tm + mz_side / vm,
            trajectory,
        }
    }

    /// Entry position of the merging zone (control-zone length).
    pub fn mz_entry_position(&self) -> f64 {
        self.trajectory.terminal_state().p
    }

    /// State for `t >= t0`, extended past `tm` at the constant merging-zone speed.
    pub fn state_at(&self, t: f64) -> Result<State> {
        if t > self.tm {
            Ok(State {
                p: self.mz_entry_position() + self.vm * (t - self.tm),
                v: self.vm,
                u: 0.0,
            })
        } else {
            self.trajectory.eval_state(t)
        }
    }

    pub fn position_at(&self, t: f64) -> Result<f64> {
        self.state_at(t).map(|s| s.p)
    }
}
