//! Scenario configuration: TOML schema, validation and echo.
//!
//! Parsing walks the document by hand so that every missing field, type
//! mismatch and invariant violation is reported at once, each with its
//! dotted field path.

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::{Heading, IntersectionGeometry, Lane, RelationLabel, VehicleLimits};
use crate::scheduler::FirstVehiclePolicy;
use crate::sim::arrivals::{ArrivalEntry, ArrivalSpec};
use crate::sim::baseline::{IdmParams, SignalBaseline};
use crate::sim::fuel::FuelCoefficients;

#[derive(Debug, Clone, PartialEq)]
pub struct RelationOverride {
    pub prev: String,
    pub cur: String,
    pub label: RelationLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    pub cz_length: f64,
    pub mz_side: f64,
    pub safe_distance: f64,
    pub mz_spacing: f64,
    pub lanes: Vec<Lane>,
    pub relations: Vec<RelationOverride>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub first_vehicle: FirstVehiclePolicy,
    /// Reject arrivals whose planned gap to the lane predecessor would drop below the safe distance.
    pub enforce_feasibility: bool,
    /// Wait before a rejected arrival tries again, seconds.
    pub retry_delay: f64,
    pub max_retries: u32,
    /// Arrivals whose planned merging-zone speed falls below this are rejected.
    pub min_mz_speed: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            first_vehicle: FirstVehiclePolicy::EnergyOptimal,
            enforce_feasibility: true,
            retry_delay: 0.5,
            max_retries: 600,
            min_mz_speed: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub limits: VehicleLimits,
    pub policy: PolicyConfig,
    pub arrivals: ArrivalSpec,
    /// Trajectory and monitor sampling step, seconds.
    pub sample_step: f64,
    pub fuel: FuelCoefficients,
    pub baseline: SignalBaseline,
}

impl ScenarioConfig {
    pub fn geometry(&self) -> Result<IntersectionGeometry> {
        let g = &self.geometry;
        let overrides: Vec<_> = g
            .relations
            .iter()
            .map(|r| (r.prev.clone(), r.cur.clone(), r.label))
            .collect();
        IntersectionGeometry::new(
            g.cz_length,
            g.mz_side,
            g.safe_distance,
            Some(g.mz_spacing),
            g.lanes.clone(),
            &overrides,
        )
    }

    pub fn lane_ids(&self) -> Vec<String> {
        self.geometry.lanes.iter().map(|l| l.id.clone()).collect()
    }

    /// Parses and validates a TOML document; all problems are returned together.
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, Vec<String>> {
        let root: Table = text
            .parse::<Table>()
            .map_err(|e| vec![format!("syntax: {e}")])?;
        let mut r = Reader::default();
        let cfg = r.scenario(&root);
        if r.errors.is_empty() {
            r.errors = cfg.validate();
        }
        if r.errors.is_empty() {
            Ok(cfg)
        } else {
            Err(r.errors)
        }
    }

    /// Invariant checks on an already-typed config.
    pub fn validate(&self) -> Vec<String> {
        let mut e = Vec::new();
        let g = &self.geometry;
        if let Err(Error::Config(msg)) = self.geometry() {
            e.extend(msg.split("; ").map(|m| format!("geometry: {m}")));
        }
        if let Err(errs) = self.limits.validate() {
            e.extend(errs.into_iter().map(|m| format!("limits: {m}")));
        }
        let p = &self.policy;
        if let FirstVehiclePolicy::Explicit(t) = p.first_vehicle {
            if !t.is_finite() {
                e.push(format!("policy.first_vehicle_time must be finite, got {t}"));
            }
        }
        if !(p.min_mz_speed >= 0.0 && p.min_mz_speed < self.limits.v_max) {
            e.push(format!(
                "policy.min_mz_speed must satisfy 0 <= value < v_max, got {}",
                p.min_mz_speed
            ));
        }
        if !(p.retry_delay > 0.0) {
            e.push(format!(
                "policy.retry_delay must be positive, got {}",
                p.retry_delay
            ));
        }
        let lanes = self.lane_ids();
        let (vlo, vhi) = (self.limits.v_min, self.limits.v_max);
        match &self.arrivals {
            ArrivalSpec::Poisson {
                rate_per_hour,
                speed_range,
                horizon,
            } => {
                if !(*rate_per_hour > 0.0) {
                    e.push(format!(
                        "arrivals.rate_per_hour must be positive, got {rate_per_hour}"
                    ));
                }
                if !(*horizon > 0.0) {
                    e.push(format!("arrivals.horizon must be positive, got {horizon}"));
                }
                let [a, b] = *speed_range;
                if !(a <= b && a > vlo && b <= vhi) {
                    e.push(format!(
                        "arrivals.speed_range must satisfy v_min < lo <= hi <= v_max, got [{a}, {b}]"
                    ));
                }
            }
            ArrivalSpec::Deterministic { vehicles } => {
                let mut last: std::collections::BTreeMap<&str, f64> = Default::default();
                for (n, v) in vehicles.iter().enumerate() {
                    let path = format!("arrivals.vehicles[{n}]");
                    if !lanes.contains(&v.lane) {
                        e.push(format!("{path}.lane: unknown lane {}", v.lane));
                    }
                    if !(v.t0 >= 0.0 && v.t0.is_finite()) {
                        e.push(format!(
                            "{path}.t0 must be finite and nonnegative, got {}",
                            v.t0
                        ));
                    }
                    if !(v.v0 > vlo && v.v0 <= vhi) {
                        e.push(format!(
                            "{path}.v0 must lie in (v_min, v_max], got {}",
                            v.v0
                        ));
                    }
                    if let Some(prev) = last.insert(v.lane.as_str(), v.t0) {
                        if !(v.t0 > prev) {
                            e.push(format!("{path}.t0 must increase within lane {}", v.lane));
                        }
                    }
                }
            }
        }
        if !(self.sample_step > 0.0) {
            e.push(format!(
                "output.sample_step must be positive, got {}",
                self.sample_step
            ));
        }
        let b = &self.baseline;
        for (name, val) in [("green_ns", b.green_ns), ("green_ew", b.green_ew)] {
            if !(val > 0.0) {
                e.push(format!("baseline.{name} must be positive, got {val}"));
            }
        }
        if !(b.lost_time >= 0.0) {
            e.push(format!(
                "baseline.lost_time must be nonnegative, got {}",
                b.lost_time
            ));
        }
        let i = &b.idm;
        for (name, val) in [
            ("max_accel", i.max_accel),
            ("comfort_decel", i.comfort_decel),
            ("time_headway", i.time_headway),
            ("jam_gap", i.jam_gap),
            ("exponent", i.exponent),
            ("step", i.step),
        ] {
            if !(val > 0.0) {
                e.push(format!("baseline.idm.{name} must be positive, got {val}"));
            }
        }
        if !(i.vehicle_length >= 0.0) {
            e.push(format!(
                "baseline.idm.vehicle_length must be nonnegative, got {}",
                i.vehicle_length
            ));
        }
        if !(g.cz_length.is_finite()) {
            e.push("geometry.cz_length must be finite".into());
        }
        e
    }

    /// Emits the config as TOML; parsing the result gives back an equal config.
    pub fn to_toml_string(&self) -> String {
        let mut root = Table::new();
        root.insert("name".into(), self.name.clone().into());
        root.insert("seed".into(), Value::Integer(self.seed as i64));

        let g = &self.geometry;
        let mut geom = Table::new();
        geom.insert("cz_length".into(), g.cz_length.into());
        geom.insert("mz_side".into(), g.mz_side.into());
        geom.insert("safe_distance".into(), g.safe_distance.into());
        geom.insert("mz_spacing".into(), g.mz_spacing.into());
        let lanes: Vec<Value> = g
            .lanes
            .iter()
            .map(|l| {
                let mut t = Table::new();
                t.insert("id".into(), l.id.clone().into());
                t.insert("approach".into(), heading_name(l.approach).into());
                t.insert("destination".into(), heading_name(l.destination).into());
                Value::Table(t)
            })
            .collect();
        geom.insert("lanes".into(), Value::Array(lanes));
        if !g.relations.is_empty() {
            let rel: Vec<Value> = g
                .relations
                .iter()
                .map(|r| {
                    let mut t = Table::new();
                    t.insert("prev".into(), r.prev.clone().into());
                    t.insert("cur".into(), r.cur.clone().into());
                    t.insert("label".into(), label_name(r.label).into());
                    Value::Table(t)
                })
                .collect();
            geom.insert("relations".into(), Value::Array(rel));
        }
        root.insert("geometry".into(), Value::Table(geom));

        let l = &self.limits;
        root.insert(
            "limits".into(),
            float_table(&[
                ("u_min", l.u_min),
                ("u_max", l.u_max),
                ("v_min", l.v_min),
                ("v_max", l.v_max),
            ]),
        );

        let p = &self.policy;
        let mut pol = Table::new();
        let (kind, time) = match p.first_vehicle {
            FirstVehiclePolicy::EnergyOptimal => ("energy_optimal", None),
            FirstVehiclePolicy::ThroughputOptimal => ("throughput_optimal", None),
            FirstVehiclePolicy::Explicit(t) => ("explicit", Some(t)),
        };
        pol.insert("first_vehicle".into(), kind.into());
        if let Some(t) = time {
            pol.insert("first_vehicle_time".into(), t.into());
        }
        pol.insert("enforce_feasibility".into(), p.enforce_feasibility.into());
        pol.insert("retry_delay".into(), p.retry_delay.into());
        pol.insert("max_retries".into(), Value::Integer(p.max_retries as i64));
        pol.insert("min_mz_speed".into(), p.min_mz_speed.into());
        root.insert("policy".into(), Value::Table(pol));

        let mut arr = Table::new();
        match &self.arrivals {
            ArrivalSpec::Poisson {
                rate_per_hour,
                speed_range,
                horizon,
            } => {
                arr.insert("kind".into(), "poisson".into());
                arr.insert("rate_per_hour".into(), (*rate_per_hour).into());
                arr.insert(
                    "speed_range".into(),
                    Value::Array(vec![speed_range[0].into(), speed_range[1].into()]),
                );
                arr.insert("horizon".into(), (*horizon).into());
            }
            ArrivalSpec::Deterministic { vehicles } => {
                arr.insert("kind".into(), "deterministic".into());
                let v: Vec<Value> = vehicles
                    .iter()
                    .map(|a| {
                        let mut t = Table::new();
                        t.insert("t0".into(), a.t0.into());
                        t.insert("v0".into(), a.v0.into());
                        t.insert("lane".into(), a.lane.clone().into());
                        Value::Table(t)
                    })
                    .collect();
                arr.insert("vehicles".into(), Value::Array(v));
            }
        }
        root.insert("arrivals".into(), Value::Table(arr));

        root.insert(
            "output".into(),
            float_table(&[("sample_step", self.sample_step)]),
        );
        let f = &self.fuel;
        root.insert(
            "fuel".into(),
            float_table(&[
                ("q0", f.q0),
                ("q1", f.q1),
                ("q2", f.q2),
                ("q3", f.q3),
                ("r0", f.r0),
                ("r1", f.r1),
                ("r2", f.r2),
            ]),
        );
        let b = &self.baseline;
        let Value::Table(mut base) = float_table(&[
            ("green_ns", b.green_ns),
            ("green_ew", b.green_ew),
            ("lost_time", b.lost_time),
        ]) else {
            unreachable!()
        };
        let i = &b.idm;
        base.insert(
            "idm".into(),
            float_table(&[
                ("max_accel", i.max_accel),
                ("comfort_decel", i.comfort_decel),
                ("time_headway", i.time_headway),
                ("jam_gap", i.jam_gap),
                ("vehicle_length", i.vehicle_length),
                ("exponent", i.exponent),
                ("step", i.step),
            ]),
        );
        root.insert("baseline".into(), Value::Table(base));
        toml::to_string(&root).expect("config tables serialize")
    }
}

/// Reads and validates a scenario file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    ScenarioConfig::from_toml_str(&text).map_err(|errs| Error::Config(errs.join("\n")))
}

fn float_table(items: &[(&str, f64)]) -> Value {
    Value::Table(
        items
            .iter()
            .map(|(k, v)| (k.to_string(), Value::Float(*v)))
            .collect(),
    )
}

fn heading_name(h: Heading) -> &'static str {
    match h {
        Heading::Northbound => "northbound",
        Heading::Southbound => "southbound",
        Heading::Eastbound => "eastbound",
        Heading::Westbound => "westbound",
    }
}

fn parse_heading(s: &str) -> Option<Heading> {
    Some(match s {
        "northbound" => Heading::Northbound,
        "southbound" => Heading::Southbound,
        "eastbound" => Heading::Eastbound,
        "westbound" => Heading::Westbound,
        _ => return None,
    })
}

fn label_name(l: RelationLabel) -> &'static str {
    match l {
        RelationLabel::SameDirectionDifferentLane => "same_direction",
        RelationLabel::SameLane => "same_lane",
        RelationLabel::Conflicting => "conflicting",
        RelationLabel::OppositeNoConflict => "opposite",
    }
}

fn parse_label(s: &str) -> Option<RelationLabel> {
    Some(match s {
        "same_direction" => RelationLabel::SameDirectionDifferentLane,
        "same_lane" => RelationLabel::SameLane,
        "conflicting" => RelationLabel::Conflicting,
        "opposite" => RelationLabel::OppositeNoConflict,
        _ => return None,
    })
}

fn type_name(v: &Value) -> &'static str {
    v.type_str()
}

#[derive(Default)]
struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn check_keys(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                let full = if path.is_empty() {
                    k.clone()
                } else {
                    format!("{path}.{k}")
                };
                self.errors.push(format!("{full}: unknown field"));
            }
        }
    }

    fn section<'a>(&mut self, t: Option<&'a Table>, path: &str, key: &str) -> Option<&'a Table> {
        match t?.get(key) {
            None => None,
            Some(Value::Table(s)) => Some(s),
            Some(v) => {
                self.errors.push(format!(
                    "{}: expected table, found {}",
                    join(path, key),
                    type_name(v)
                ));
                None
            }
        }
    }

    fn num(&mut self, t: Option<&Table>, path: &str, key: &str, default: Option<f64>) -> f64 {
        match t.and_then(|t| t.get(key)) {
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(x)) => *x as f64,
            Some(v) => {
                self.errors.push(format!(
                    "{}: expected number, found {}",
                    join(path, key),
                    type_name(v)
                ));
                f64::NAN
            }
            None => default.unwrap_or_else(|| {
                self.errors
                    .push(format!("{}: missing field", join(path, key)));
                f64::NAN
            }),
        }
    }

    fn int(&mut self, t: Option<&Table>, path: &str, key: &str, default: u64) -> u64 {
        match t.and_then(|t| t.get(key)) {
            Some(Value::Integer(x)) if *x >= 0 => *x as u64,
            Some(v) => {
                self.errors.push(format!(
                    "{}: expected nonnegative integer, found {v}",
                    join(path, key)
                ));
                default
            }
            None => default,
        }
    }

    fn boolean(&mut self, t: Option<&Table>, path: &str, key: &str, default: bool) -> bool {
        match t.and_then(|t| t.get(key)) {
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                self.errors.push(format!(
                    "{}: expected boolean, found {}",
                    join(path, key),
                    type_name(v)
                ));
                default
            }
            None => default,
        }
    }

    fn string(
        &mut self,
        t: Option<&Table>,
        path: &str,
        key: &str,
        default: Option<&str>,
    ) -> String {
        match t.and_then(|t| t.get(key)) {
            Some(Value::String(s)) => s.clone(),
            Some(v) => {
                self.errors.push(format!(
                    "{}: expected string, found {}",
                    join(path, key),
                    type_name(v)
                ));
                String::new()
            }
            None => match default {
                Some(d) => d.to_string(),
                None => {
                    self.errors
                        .push(format!("{}: missing field", join(path, key)));
                    String::new()
                }
            },
        }
    }

    fn tables<'a>(
        &mut self,
        t: Option<&'a Table>,
        path: &str,
        key: &str,
        required: bool,
    ) -> Vec<&'a Table> {
        match t.and_then(|t| t.get(key)) {
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .filter_map(|(n, v)| match v {
                    Value::Table(t) => Some(t),
                    other => {
                        self.errors.push(format!(
                            "{}[{n}]: expected table, found {}",
                            join(path, key),
                            type_name(other)
                        ));
                        None
                    }
                })
                .collect(),
            Some(v) => {
                self.errors.push(format!(
                    "{}: expected array of tables, found {}",
                    join(path, key),
                    type_name(v)
                ));
                Vec::new()
            }
            None => {
                if required {
                    self.errors
                        .push(format!("{}: missing field", join(path, key)));
                }
                Vec::new()
            }
        }
    }

    fn scenario(&mut self, root: &Table) -> ScenarioConfig {
        self.check_keys(
            root,
            "",
            &[
                "name", "seed", "geometry", "limits", "policy", "arrivals", "output", "fuel",
                "baseline",
            ],
        );
        let r = Some(root);
        let name = self.string(r, "", "name", Some("scenario"));
        let seed = self.int(r, "", "seed", 0);

        let g = self.section(r, "", "geometry");
        if let Some(g) = g {
            self.check_keys(
                g,
                "geometry",
                &[
                    "cz_length",
                    "mz_side",
                    "safe_distance",
                    "mz_spacing",
                    "lanes",
                    "relations",
                ],
            );
        }
        let cz_length = self.num(g, "geometry", "cz_length", None);
        let mz_side = self.num(g, "geometry", "mz_side", None);
        let safe_distance = self.num(g, "geometry", "safe_distance", None);
        let mz_spacing = self.num(g, "geometry", "mz_spacing", Some(mz_side));
        let mut lanes = Vec::new();
        for (n, lt) in self
            .tables(g, "geometry", "lanes", true)
            .into_iter()
            .enumerate()
        {
            let path = format!("geometry.lanes[{n}]");
            self.check_keys(lt, &path, &["id", "approach", "destination"]);
            let id = self.string(Some(lt), &path, "id", None);
            let approach = self.string(Some(lt), &path, "approach", None);
            let destination = self.string(Some(lt), &path, "destination", Some(&approach));
            let ha = parse_heading(&approach);
            let hd = parse_heading(&destination);
            if ha.is_none() && !approach.is_empty() {
                self.errors
                    .push(format!("{path}.approach: unknown heading {approach}"));
            }
            if hd.is_none() && !destination.is_empty() && ha.is_some() {
                self.errors
                    .push(format!("{path}.destination: unknown heading {destination}"));
            }
            if let (Some(a), Some(d)) = (ha, hd) {
                lanes.push(Lane {
                    id,
                    approach: a,
                    destination: d,
                });
            }
        }
        let mut relations = Vec::new();
        for (n, rt) in self
            .tables(g, "geometry", "relations", false)
            .into_iter()
            .enumerate()
        {
            let path = format!("geometry.relations[{n}]");
            self.check_keys(rt, &path, &["prev", "cur", "label"]);
            let prev = self.string(Some(rt), &path, "prev", None);
            let cur = self.string(Some(rt), &path, "cur", None);
            let label = self.string(Some(rt), &path, "label", None);
            match parse_label(&label) {
                Some(label) => relations.push(RelationOverride { prev, cur, label }),
                None => self
                    .errors
                    .push(format!("{path}.label: unknown relation {label}")),
            }
        }

        let l = self.section(r, "", "limits");
        if let Some(l) = l {
            self.check_keys(l, "limits", &["u_min", "u_max", "v_min", "v_max"]);
        }
        let limits = VehicleLimits {
            u_min: self.num(l, "limits", "u_min", None),
            u_max: self.num(l, "limits", "u_max", None),
            v_min: self.num(l, "limits", "v_min", None),
            v_max: self.num(l, "limits", "v_max", None),
        };

        let p = self.section(r, "", "policy");
        if let Some(p) = p {
            self.check_keys(
                p,
                "policy",
                &[
                    "first_vehicle",
                    "first_vehicle_time",
                    "enforce_feasibility",
                    "retry_delay",
                    "max_retries",
                    "min_mz_speed",
                ],
            );
        }
        let d = PolicyConfig::default();
        let kind = self.string(p, "policy", "first_vehicle", Some("energy_optimal"));
        let first_vehicle = match kind.as_str() {
            "energy_optimal" => FirstVehiclePolicy::EnergyOptimal,
            "throughput_optimal" => FirstVehiclePolicy::ThroughputOptimal,
            "explicit" => {
                FirstVehiclePolicy::Explicit(self.num(p, "policy", "first_vehicle_time", None))
            }
            other => {
                self.errors
                    .push(format!("policy.first_vehicle: unknown policy {other}"));
                d.first_vehicle
            }
        };
        let policy = PolicyConfig {
            first_vehicle,
            enforce_feasibility: self.boolean(
                p,
                "policy",
                "enforce_feasibility",
                d.enforce_feasibility,
            ),
            retry_delay: self.num(p, "policy", "retry_delay", Some(d.retry_delay)),
            max_retries: self.int(p, "policy", "max_retries", d.max_retries as u64) as u32,
            min_mz_speed: self.num(p, "policy", "min_mz_speed", Some(d.min_mz_speed)),
        };

        let a = self.section(r, "", "arrivals");
        let kind = self.string(a, "arrivals", "kind", None);
        let arrivals = match kind.as_str() {
            "poisson" => {
                if let Some(a) = a {
                    self.check_keys(
                        a,
                        "arrivals",
                        &["kind", "rate_per_hour", "speed_range", "horizon"],
                    );
                }
                let rate_per_hour = self.num(a, "arrivals", "rate_per_hour", None);
                let horizon = self.num(a, "arrivals", "horizon", None);
                let speed_range = match a.and_then(|a| a.get("speed_range")) {
                    Some(Value::Array(v)) if v.len() == 2 => {
                        let x: Vec<f64> = v
                            .iter()
                            .map(|x| {
                                x.as_float()
                                    .or(x.as_integer().map(|i| i as f64))
                                    .unwrap_or(f64::NAN)
                            })
                            .collect();
                        if x.iter().any(|x| x.is_nan()) {
                            self.errors
                                .push("arrivals.speed_range: expected two numbers".into());
                        }
                        [x[0], x[1]]
                    }
                    Some(_) => {
                        self.errors
                            .push("arrivals.speed_range: expected two numbers".into());
                        [f64::NAN; 2]
                    }
                    None => {
                        self.errors
                            .push("arrivals.speed_range: missing field".into());
                        [f64::NAN; 2]
                    }
                };
                ArrivalSpec::Poisson {
                    rate_per_hour,
                    speed_range,
                    horizon,
                }
            }
            "deterministic" => {
                if let Some(a) = a {
                    self.check_keys(a, "arrivals", &["kind", "vehicles"]);
                }
                let mut vehicles = Vec::new();
                for (n, vt) in self
                    .tables(a, "arrivals", "vehicles", true)
                    .into_iter()
                    .enumerate()
                {
                    let path = format!("arrivals.vehicles[{n}]");
                    self.check_keys(vt, &path, &["t0", "v0", "lane"]);
                    vehicles.push(ArrivalEntry {
                        t0: self.num(Some(vt), &path, "t0", None),
                        v0: self.num(Some(vt), &path, "v0", None),
                        lane: self.string(Some(vt), &path, "lane", None),
                    });
                }
                ArrivalSpec::Deterministic { vehicles }
            }
            "" => ArrivalSpec::Deterministic {
                vehicles: Vec::new(),
            },
            other => {
                self.errors
                    .push(format!("arrivals.kind: unknown arrival process {other}"));
                ArrivalSpec::Deterministic {
                    vehicles: Vec::new(),
                }
            }
        };

        let o = self.section(r, "", "output");
        if let Some(o) = o {
            self.check_keys(o, "output", &["sample_step"]);
        }
        let sample_step = self.num(o, "output", "sample_step", Some(0.1));

        let f = self.section(r, "", "fuel");
        if let Some(f) = f {
            self.check_keys(f, "fuel", &["q0", "q1", "q2", "q3", "r0", "r1", "r2"]);
        }
        let fd = FuelCoefficients::illustrative();
        let fuel = FuelCoefficients {
            q0: self.num(f, "fuel", "q0", Some(fd.q0)),
            q1: self.num(f, "fuel", "q1", Some(fd.q1)),
            q2: self.num(f, "fuel", "q2", Some(fd.q2)),
            q3: self.num(f, "fuel", "q3", Some(fd.q3)),
            r0: self.num(f, "fuel", "r0", Some(fd.r0)),
            r1: self.num(f, "fuel", "r1", Some(fd.r1)),
            r2: self.num(f, "fuel", "r2", Some(fd.r2)),
        };

        let b = self.section(r, "", "baseline");
        if let Some(b) = b {
            self.check_keys(b, "baseline", &["green_ns", "green_ew", "lost_time", "idm"]);
        }
        let bd = SignalBaseline::default();
        let idm_t = self.section(b, "baseline", "idm");
        if let Some(t) = idm_t {
            self.check_keys(
                t,
                "baseline.idm",
                &[
                    "max_accel",
                    "comfort_decel",
                    "time_headway",
                    "jam_gap",
                    "vehicle_length",
                    "exponent",
                    "step",
                ],
            );
        }
        let id = bd.idm;
        let baseline = SignalBaseline {
            green_ns: self.num(b, "baseline", "green_ns", Some(bd.green_ns)),
            green_ew: self.num(b, "baseline", "green_ew", Some(bd.green_ew)),
            lost_time: self.num(b, "baseline", "lost_time", Some(bd.lost_time)),
            idm: IdmParams {
                max_accel: self.num(idm_t, "baseline.idm", "max_accel", Some(id.max_accel)),
                comfort_decel: self.num(
                    idm_t,
                    "baseline.idm",
                    "comfort_decel",
                    Some(id.comfort_decel),
                ),
                time_headway: self.num(
                    idm_t,
                    "baseline.idm",
                    "time_headway",
                    Some(id.time_headway),
                ),
                jam_gap: self.num(idm_t, "baseline.idm", "jam_gap", Some(id.jam_gap)),
                vehicle_length: self.num(
                    idm_t,
                    "baseline.idm",
                    "vehicle_length",
                    Some(id.vehicle_length),
                ),
                exponent: self.num(idm_t, "baseline.idm", "exponent", Some(id.exponent)),
                step: self.num(idm_t, "baseline.idm", "step", Some(id.step)),
            },
        };

        ScenarioConfig {
            name,
            seed,
            geometry: GeometryConfig {
                cz_length,
                mz_side,
                safe_distance,
                mz_spacing,
                lanes,
                relations,
            },
            limits,
            policy,
            arrivals,
            sample_step,
            fuel,
            baseline,
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
cz_length = 400
mz_side = 30
safe_distance = 10
lanes = [{ id = "E", approach = "eastbound" }, { id = "N", approach = "northbound" }]

[limits]
u_min = -4.0
u_max = 2.0
v_min = 0.0
v_max = 13.0

[arrivals]
kind = "deterministic"
vehicles = [{ t0 = 0.0, v0 = 10.0, lane = "E" }]
"#;

    #[test]
    fn minimal_parses_with_defaults() {
        let c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.geometry.mz_spacing, 30.0);
        assert_eq!(c.sample_step, 0.1);
        assert_eq!(c.policy, PolicyConfig::default());
        assert_eq!(c.fuel, FuelCoefficients::illustrative());
        assert!(c.geometry().is_ok());
    }

    #[test]
    fn empty_file_lists_required_fields() {
        let errs = ScenarioConfig::from_toml_str("").unwrap_err();
        for field in [
            "geometry.cz_length",
            "geometry.mz_side",
            "geometry.safe_distance",
            "geometry.lanes",
            "limits.u_min",
            "limits.u_max",
            "limits.v_min",
            "limits.v_max",
            "arrivals.kind",
        ] {
            assert!(
                errs.iter().any(|e| e.starts_with(field)),
                "{field} not reported in {errs:?}"
            );
        }
    }

    #[test]
    fn safe_distance_must_be_below_zone_side() {
        let text = MINIMAL.replace("safe_distance = 10", "safe_distance = 40");
        let errs = ScenarioConfig::from_toml_str(&text).unwrap_err();
        assert!(errs.iter().any(|e| e.contains("delta")), "{errs:?}");
    }

    #[test]
    fn errors_are_aggregated_with_paths() {
        let text = MINIMAL
            .replace("u_max = 2.0", "u_max = \"fast\"")
            .replace("v_max = 13.0", "v_max = 13.0\nbogus = 1");
        let errs = ScenarioConfig::from_toml_str(&text).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.starts_with("limits.u_max: expected number")));
        assert!(errs
            .iter()
            .any(|e| e.starts_with("limits.bogus: unknown field")));
    }

    #[test]
    fn echo_round_trips() {
        let mut c = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        c.policy.first_vehicle = FirstVehiclePolicy::Explicit(41.5);
        c.geometry.relations.push(RelationOverride {
            prev: "E".into(),
            cur: "N".into(),
            label: RelationLabel::Conflicting,
        });
        let back = ScenarioConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }
}
