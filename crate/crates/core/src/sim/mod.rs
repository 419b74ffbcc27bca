//! Event-driven intersection simulation.
//!
//! Arrivals, merging-zone entries and exits are the only events. Each arrival
//! is scheduled against the vehicles still in the system, planned once, and
//! then flies its plan. Arrivals that would violate the rear-end gap wait
//! upstream and retry. Monitors run over the finished records.

pub mod arrivals;
pub mod baseline;
pub mod fuel;
pub mod metrics;
pub mod monitor;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{PolicyConfig, ScenarioConfig};
use crate::error::{Error, Result};
use crate::feasibility::{check_through_exit, PredecessorContext, DEFAULT_TOLERANCE};
use crate::model::{IntersectionGeometry, RelationLabel, VehicleLimits, VehicleRecord};
use crate::ocp::{solve_with_constraints, BoundaryConditions};
use crate::scheduler::{schedule_next, Arrival, ScheduleEntry};

use arrivals::{tie_key, ArrivalEntry};
use fuel::{fuel_rate, trajectory_fuel};
use metrics::{Comparison, MetricsSummary, VehicleMetrics};
use monitor::{
    monitor_lateral, monitor_rear_end, same_lane_pairs, LateralViolation, RearEndReport,
};

/// What vehicle `w` knows from admission until it enters the merging zone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InformationSet {
    pub w: u64,
    pub queue_position: usize,
    pub relation: Option<RelationLabel>,
    /// Same-lane vehicle directly ahead, if still in the system.
    pub lane_predecessor: Option<u64>,
    pub tm_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    Arrival {
        arrival: usize,
        lane: String,
        v0: f64,
    },
    Admission {
        vehicle: u64,
        arrival: usize,
        queue_position: usize,
        relation: Option<String>,
        tm: f64,
        vm: f64,
        binding: &'static str,
        constrained: bool,
    },
    Rejection {
        arrival: usize,
        reason: String,
        s_star: Option<f64>,
        permanent: bool,
    },
    MzEntry {
        vehicle: u64,
    },
    MzExit {
        vehicle: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Why an arrival could not be admitted.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub reason: String,
    pub s_star: Option<f64>,
}

/// Coordinator bookkeeping: identities, the queue of vehicles in the system
/// and their published information.
#[derive(Debug, Clone)]
pub struct Coordinator {
    pub geometry: IntersectionGeometry,
    pub limits: VehicleLimits,
    pub policy: PolicyConfig,
    /// Cumulative number of admitted vehicles; never decreases.
    pub cumulative_count: u64,
    /// Vehicles in the control or merging zone, in admission order.
    pub queue: Vec<ScheduleEntry>,
    pub records: BTreeMap<u64, VehicleRecord>,
    pub information: BTreeMap<u64, InformationSet>,
}

/// Longest accepted time from control-zone entry to merging-zone exit.
/// Keeps a collapsing schedule from producing unbounded trajectories.
pub const MAX_TRANSIT: f64 = 3600.0;

impl Coordinator {
    pub fn new(
        geometry: IntersectionGeometry,
        limits: VehicleLimits,
        policy: PolicyConfig,
    ) -> Self {
        Coordinator {
            geometry,
            limits,
            policy,
            cumulative_count: 0,
            queue: Vec::new(),
            records: BTreeMap::new(),
            information: BTreeMap::new(),
        }
    }

    /// Schedules, plans and checks a vehicle entering `lane` at `(t0, v0)`.
    /// On success the vehicle gets identity `M + 1` and joins the queue.
    pub fn admit(
        &mut self,
        lane: &str,
        t0: f64,
        v0: f64,
    ) -> std::result::Result<(ScheduleEntry, VehicleRecord), Rejection> {
        let reject = |reason: String| Rejection {
            reason,
            s_star: None,
        };
        let arrival = Arrival {
            id: self.cumulative_count + 1,
            lane: lane.to_string(),
            t0,
            v0,
        };
        let mut entry = schedule_next(
            &self.queue,
            &arrival,
            &self.geometry,
            &self.limits,
            self.policy.first_vehicle,
        )
        .map_err(|e| reject(format!("schedule: {e}")))?;
        let bc = BoundaryConditions::new(t0, v0, entry.tm_star, self.geometry.cz_length);
        let traj =
            solve_with_constraints(&bc, &self.limits).map_err(|e| reject(format!("solve: {e}")))?;
        let vm = traj.terminal_state().v;
        if !(vm > 0.0 && vm >= self.policy.min_mz_speed) {
            return Err(reject(format!("merging-zone speed {vm:.6} below floor")));
        }
        let transit = entry.tm_star - t0 + self.geometry.mz_side / vm;
        if !(transit <= MAX_TRANSIT) {
            return Err(reject(format!("crossing would take {transit:.3} s")));
        }
        let lane_pred = self
            .queue
            .iter()
            .rev()
            .find(|e| e.lane == lane)
            .map(|e| e.id);
        if let (Some(k), true) = (lane_pred, self.policy.enforce_feasibility) {
            let rec = &self.records[&k];
            let ctx = PredecessorContext::from_record(
                rec,
                self.geometry.mz_side,
                self.geometry.safe_distance,
                self.limits,
            )
            .map_err(|e| reject(format!("context: {e}")))?;
            let verdict = check_through_exit(&ctx, &traj, DEFAULT_TOLERANCE)
                .map_err(|e| reject(format!("gap: {e}")))?;
            if !verdict.feasible {
                return Err(Rejection {
                    reason: format!(
                        "rear-end gap {:.6} below safe distance behind {k}",
                        verdict.witness.s_star
                    ),
                    s_star: Some(verdict.witness.s_star),
                });
            }
        }

        self.cumulative_count += 1;
        let w = self.cumulative_count;
        entry.vm = vm;
        let record = VehicleRecord::from_trajectory(
            w,
            self.queue.len() + 1,
            entry.relation,
            lane.to_string(),
            self.geometry.mz_side,
            traj,
        );
        self.information.insert(
            w,
            InformationSet {
                w,
                queue_position: record.queue_position,
                relation: entry.relation,
                lane_predecessor: lane_pred,
                tm_star: entry.tm_star,
            },
        );
        self.queue.push(entry.clone());
        self.records.insert(w, record.clone());
        Ok((entry, record))
    }

    /// Removes vehicle `w` after it leaves the merging zone.
    pub fn exit(&mut self, w: u64) {
        self.queue.retain(|e| e.id != w);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pending {
    Arrive(usize),
    Retry(usize),
    MzEntry(u64),
    MzExit(u64),
}

#[derive(Debug, Clone, Copy)]
struct Scheduled {
    t: f64,
    tie: u64,
    seq: u64,
    what: Pending,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then(other.tie.cmp(&self.tie))
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub arrived: usize,
    pub admitted: usize,
    pub exited: usize,
    pub rejected: usize,
    pub retries: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Admitted vehicles by identity.
    pub records: Vec<VehicleRecord>,
    /// Original arrival time of each admitted vehicle, by identity.
    pub ready_times: Vec<f64>,
    pub schedule: Vec<ScheduleEntry>,
    pub information: Vec<InformationSet>,
    pub events: Vec<Event>,
    pub counters: Counters,
    pub metrics: MetricsSummary,
    pub rear_end: Vec<RearEndReport>,
    pub lateral: Vec<LateralViolation>,
    pub safe_distance: f64,
}

impl RunOutput {
    pub fn rear_end_violations(&self) -> Vec<&RearEndReport> {
        self.rear_end
            .iter()
            .filter(|r| r.violated(self.safe_distance))
            .collect()
    }

    /// Fails with a diagnostic when any monitor fired.
    pub fn ensure_safe(&self) -> Result<()> {
        let rear = self.rear_end_violations();
        if rear.is_empty() && self.lateral.is_empty() {
            return Ok(());
        }
        let mut msg = Vec::new();
        for r in rear {
            msg.push(format!(
                "rear-end: vehicle {} behind {} min gap {:.6} at t={:.3}",
                r.follower,
                r.leader,
                r.min_gap.min(r.analytic_min.unwrap_or(f64::INFINITY)),
                r.t_min
            ));
        }
        for l in &self.lateral {
            msg.push(format!(
                "lateral: vehicle {} entered at {:.6} before {:.6} required by {}",
                l.second, l.actual_entry, l.required_entry, l.first
            ));
        }
        Err(Error::MonitorViolation(msg.join("; ")))
    }
}

struct Engine {
    coord: Coordinator,
    heap: BinaryHeap<Scheduled>,
    seq: u64,
    rng: ChaCha8Rng,
    events: Vec<Event>,
    counters: Counters,
    /// Upstream queue per lane: arrival index and failed attempts.
    pending: Vec<VecDeque<(usize, u32)>>,
    retry_armed: Vec<bool>,
    ready: BTreeMap<u64, f64>,
    entries: BTreeMap<u64, ScheduleEntry>,
    in_system: usize,
}

impl Engine {
    fn push(&mut self, t: f64, what: Pending) {
        self.seq += 1;
        let tie = tie_key(&mut self.rng);
        self.heap.push(Scheduled {
            t,
            tie,
            seq: self.seq,
            what,
        });
    }

    fn log(&mut self, t: f64, kind: EventKind) {
        self.events.push(Event { t, kind });
    }

    fn attempt(&mut self, lane: usize, now: f64, arrivals: &[ArrivalEntry]) {
        while let Some(&(idx, tries)) = self.pending[lane].front() {
            let a = &arrivals[idx];
            let t0 = now.max(a.t0);
            match self.coord.admit(&a.lane, t0, a.v0) {
                Ok((entry, record)) => {
                    self.pending[lane].pop_front();
                    self.counters.admitted += 1;
                    self.in_system += 1;
                    self.ready.insert(record.id, a.t0);
                    self.log(
                        t0,
                        EventKind::Admission {
                            vehicle: record.id,
                            arrival: idx,
                            queue_position: record.queue_position,
                            relation: entry.relation.map(|r| r.to_string()),
                            tm: record.tm,
                            vm: record.vm,
                            binding: entry.binding_case.label(),
                            constrained: record.trajectory.has_constrained_arc(),
                        },
                    );
                    self.push(record.tm, Pending::MzEntry(record.id));
                    self.entries.insert(record.id, entry);
                    self.push(record.tf, Pending::MzExit(record.id));
                }
                Err(rej) => {
                    let permanent = tries >= self.coord.policy.max_retries;
                    self.log(
                        now,
                        EventKind::Rejection {
                            arrival: idx,
                            reason: rej.reason,
                            s_star: rej.s_star,
                            permanent,
                        },
                    );
                    if permanent {
                        self.pending[lane].pop_front();
                        self.counters.rejected += 1;
                        continue;
                    }
                    self.pending[lane][0].1 += 1;
                    self.counters.retries += 1;
                    self.retry_armed[lane] = true;
                    let delay = self.coord.policy.retry_delay;
                    self.push(now + delay, Pending::Retry(lane));
                    return;
                }
            }
        }
    }

    fn check_conservation(&self) -> Result<()> {
        let c = &self.counters;
        let waiting: usize = self.pending.iter().map(|p| p.len()).sum();
        if c.arrived != c.admitted + c.rejected + waiting || c.admitted != c.exited + self.in_system
        {
            return Err(Error::Internal(format!(
                "vehicle conservation broken: {c:?}, waiting {waiting}"
            )));
        }
        Ok(())
    }
}

/// Coordinated run of a scenario. Monitor findings are reported in the
/// output; call [`RunOutput::ensure_safe`] to turn them into an error.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let geom = cfg.geometry()?;
    let lanes = cfg.lane_ids();
    let arrivals = generate_arrivals(cfg)?;
    let mut tie_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    tie_rng.set_stream(1);

    let mut eng = Engine {
        coord: Coordinator::new(geom.clone(), cfg.limits, cfg.policy.clone()),
        heap: BinaryHeap::new(),
        seq: 0,
        rng: tie_rng,
        events: Vec::new(),
        counters: Counters::default(),
        pending: vec![VecDeque::new(); lanes.len()],
        retry_armed: vec![false; lanes.len()],
        ready: BTreeMap::new(),
        entries: BTreeMap::new(),
        in_system: 0,
    };
    for (idx, a) in arrivals.iter().enumerate() {
        eng.push(a.t0, Pending::Arrive(idx));
    }

    while let Some(ev) = eng.heap.pop() {
        let now = ev.t;
        match ev.what {
            Pending::Arrive(idx) => {
                let a = &arrivals[idx];
                let lane = lanes
                    .iter()
                    .position(|l| *l == a.lane)
                    .ok_or_else(|| Error::Config(format!("unknown lane {}", a.lane)))?;
                eng.counters.arrived += 1;
                eng.log(
                    now,
                    EventKind::Arrival {
                        arrival: idx,
                        lane: a.lane.clone(),
                        v0: a.v0,
                    },
                );
                eng.pending[lane].push_back((idx, 0));
                if !eng.retry_armed[lane] && eng.pending[lane].len() == 1 {
                    eng.attempt(lane, now, &arrivals);
                }
            }
            Pending::Retry(lane) => {
                eng.retry_armed[lane] = false;
                eng.attempt(lane, now, &arrivals);
            }
            Pending::MzEntry(w) => eng.log(now, EventKind::MzEntry { vehicle: w }),
            Pending::MzExit(w) => {
                eng.coord.exit(w);
                eng.counters.exited += 1;
                eng.in_system -= 1;
                eng.log(now, EventKind::MzExit { vehicle: w });
            }
        }
        eng.check_conservation()?;
    }

    let records: Vec<VehicleRecord> = eng.coord.records.values().cloned().collect();
    let ready_times: Vec<f64> = records.iter().map(|r| eng.ready[&r.id]).collect();
    let schedule: Vec<ScheduleEntry> = eng.entries.values().cloned().collect();

    let rear_end: Vec<RearEndReport> = same_lane_pairs(&records)
        .into_iter()
        .map(|(k, i)| {
            monitor_rear_end(
                &records[k],
                &records[i],
                geom.safe_distance,
                cfg.sample_step,
                geom.mz_side,
            )
        })
        .collect();
    let lateral = monitor_lateral(&records, &geom);

    let per_vehicle: Vec<VehicleMetrics> = records
        .iter()
        .zip(&ready_times)
        .map(|(r, &ready)| coordinated_metrics(r, ready, geom.mz_side, &cfg.fuel))
        .collect::<Result<_>>()?;
    let metrics = MetricsSummary::from_vehicles(
        "coordinated",
        per_vehicle,
        eng.counters.rejected,
        eng.counters.retries,
    );

    Ok(RunOutput {
        information: eng.coord.information.values().cloned().collect(),
        records,
        ready_times,
        schedule,
        events: eng.events,
        counters: eng.counters,
        metrics,
        rear_end,
        lateral,
        safe_distance: geom.safe_distance,
    })
}

/// Travel time from first arrival to merging-zone exit; fuel includes any
/// upstream wait (at entry speed) and the constant-speed zone transit.
fn coordinated_metrics(
    r: &VehicleRecord,
    ready: f64,
    mz_side: f64,
    c: &fuel::FuelCoefficients,
) -> Result<VehicleMetrics> {
    let wait = r.t0 - ready;
    let fuel = trajectory_fuel(&r.trajectory, c)
        + fuel_rate(r.vm, 0.0, c)? * mz_side / r.vm
        + fuel_rate(r.v0, 0.0, c)? * wait;
    Ok(VehicleMetrics {
        id: r.id,
        lane: r.lane.clone(),
        arrival: ready,
        exit: r.tf,
        travel_time: r.tf - ready,
        energy: r.trajectory.cost(),
        fuel,
    })
}

/// The scenario's arrival stream; both modes see the same one.
pub fn generate_arrivals(cfg: &ScenarioConfig) -> Result<Vec<ArrivalEntry>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    cfg.arrivals.generate(&cfg.lane_ids(), &mut rng)
}

/// Signalized baseline on the scenario's arrival stream.
pub fn run_baseline(cfg: &ScenarioConfig) -> Result<MetricsSummary> {
    let geom = cfg.geometry()?;
    let arrivals = generate_arrivals(cfg)?;
    let per_vehicle =
        baseline::run_baseline(&arrivals, &geom, &cfg.limits, &cfg.baseline, &cfg.fuel);
    let missing = arrivals.len() - per_vehicle.len();
    Ok(MetricsSummary::from_vehicles(
        "baseline",
        per_vehicle,
        missing,
        0,
    ))
}

/// Runs both modes and reports improvement ratios.
pub fn compare(cfg: &ScenarioConfig) -> Result<(RunOutput, Comparison)> {
    let out = run(cfg)?;
    let base = run_baseline(cfg)?;
    let cmp = Comparison::new(out.metrics.clone(), base);
    Ok((out, cmp))
}
