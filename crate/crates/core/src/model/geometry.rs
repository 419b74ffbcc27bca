use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of travel along an approach road.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heading {
    Northbound,
    Southbound,
    Eastbound,
    Westbound,
}

impl Heading {
    fn opposite(self) -> Heading {
        match self {
            Heading::Northbound => Heading::Southbound,
            Heading::Southbound => Heading::Northbound,
            Heading::Eastbound => Heading::Westbound,
            Heading::Westbound => Heading::Eastbound,
        }
    }

    fn is_north_south(self) -> bool {
        matches!(self, Heading::Northbound | Heading::Southbound)
    }
}

/// Positional relation of the queue predecessor with respect to a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationLabel {
    /// Same road and direction, different lane.
    SameDirectionDifferentLane,
    /// Same lane.
    SameLane,
    /// Different road with crossing paths inside the merging zone.
    Conflicting,
    /// Same road, opposite direction, no crossing.
    OppositeNoConflict,
}

impl RelationLabel {
    /// Integer code assigned by the coordinator (one-to-one onto 1..=4).
    pub fn code(self) -> u8 {
        match self {
            RelationLabel::SameDirectionDifferentLane => 1,
            RelationLabel::SameLane => 2,
            RelationLabel::Conflicting => 3,
            RelationLabel::OppositeNoConflict => 4,
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RelationLabel::SameDirectionDifferentLane => "R",
            RelationLabel::SameLane => "L",
            RelationLabel::Conflicting => "C",
            RelationLabel::OppositeNoConflict => "O",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub id: String,
    pub approach: Heading,
    pub destination: Heading,
}

impl Lane {
    pub fn straight(id: impl Into<String>, heading: Heading) -> Self {
        Lane {
            id: id.into(),
            approach: heading,
            destination: heading,
        }
    }
}

/// Control zone / merging zone layout and the lane relation table.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionGeometry {
    /// Control-zone length from entry to the merging zone.
    pub cz_length: f64,
    /// Side of the square merging zone.
    pub mz_side: f64,
    /// Minimum rear-end gap between consecutive same-lane vehicles.
    pub safe_distance: f64,
    /// Separation used for conflicting vehicles inside the merging zone (equal to `mz_side` unless relaxed).
    pub mz_spacing: f64,
    pub lanes: Vec<Lane>,
    relations: BTreeMap<(String, String), RelationLabel>,
}

impl IntersectionGeometry {
    /// Builds the geometry, deriving the relation table from lane headings and
    /// then applying `overrides` (ordered pairs).
    pub fn new(
        cz_length: f64,
        mz_side: f64,
        safe_distance: f64,
        mz_spacing: Option<f64>,
        lanes: Vec<Lane>,
        overrides: &[(String, String, RelationLabel)],
    ) -> Result<Self> {
        let mut errors = Vec::new();
        if !(cz_length > 0.0) {
            errors.push(format!("cz_length must be positive, got {cz_length}"));
        }
        if !(mz_side > 0.0) {
            errors.push(format!("mz_side must be positive, got {mz_side}"));
        }
        if !(safe_distance > 0.0 && safe_distance < mz_side) {
            errors.push(format!(
                "safe_distance must satisfy 0 < delta < S, got delta={safe_distance}, S={mz_side}"
            ));
        }
        let spacing = mz_spacing.unwrap_or(mz_side);
        if !(spacing > 0.0 && spacing <= mz_side) {
            errors.push(format!("mz_spacing must satisfy 0 < r <= S, got {spacing}"));
        }
        if lanes.is_empty() {
            errors.push("at least one lane is required".into());
        }
        for (n, lane) in lanes.iter().enumerate() {
            if lane.approach != lane.destination {
                errors.push(format!(
                    "lane {}: turning movements are not supported",
                    lane.id
                ));
            }
            if lanes[..n].iter().any(|l| l.id == lane.id) {
                errors.push(format!("duplicate lane id {}", lane.id));
            }
        }
        if !errors.is_empty() {
            return Err(Error::Config(errors.join("; ")));
        }

        let mut relations = BTreeMap::new();
        for a in &lanes {
            for b in &lanes {
                relations.insert((a.id.clone(), b.id.clone()), derive_relation(a, b));
            }
        }
        for (a, b, label) in overrides {
            let key = (a.clone(), b.clone());
            if !relations.contains_key(&key) {
                return Err(Error::Config(format!(
                    "relation override for unknown lane pair ({a}, {b})"
                )));
            }
            relations.insert(key, *label);
        }
        for ((a, b), label) in &relations {
            let rev = relations[&(b.clone(), a.clone())];
            if (*label == RelationLabel::Conflicting) != (rev == RelationLabel::Conflicting) {
                return Err(Error::Config(format!(
                    "relation table not symmetric in conflict class for ({a}, {b})"
                )));
            }
            if (a == b) != (*label == RelationLabel::SameLane) {
                return Err(Error::Config(format!(
                    "only identical lanes may be labelled same-lane ({a}, {b})"
                )));
            }
        }

        Ok(IntersectionGeometry {
            cz_length,
            mz_side,
            safe_distance,
            mz_spacing: spacing,
            lanes,
            relations,
        })
    }

    pub fn lane(&self, id: &str) -> Option<&Lane> {
        self.lanes.iter().find(|l| l.id == id)
    }

    /// Relation of the vehicle on `lane_prev` with respect to the one on `lane_cur`.
    pub fn classify_relation(&self, lane_prev: &str, lane_cur: &str) -> Result<RelationLabel> {
        self.relations
            .get(&(lane_prev.to_string(), lane_cur.to_string()))
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown lane pair ({lane_prev}, {lane_cur})")))
    }

    pub fn relation_table(&self) -> &BTreeMap<(String, String), RelationLabel> {
        &self.relations
    }

    /// Non-default entries of the relation table, used when echoing a configuration.
    pub fn relation_overrides(&self) -> Vec<(String, String, RelationLabel)> {
        let mut out = Vec::new();
        for ((a, b), label) in &self.relations {
            let (la, lb) = (self.lane(a).unwrap(), self.lane(b).unwrap());
            if derive_relation(la, lb) != *label {
                out.push((a.clone(), b.clone(), *label));
            }
        }
        out
    }
}

fn derive_relation(a: &Lane, b: &Lane) -> RelationLabel {
    if a.id == b.id {
        RelationLabel::SameLane
    } else if a.approach == b.approach {
        RelationLabel::SameDirectionDifferentLane
    } else if a.approach == b.approach.opposite() {
        RelationLabel::OppositeNoConflict
    } else {
        debug_assert_ne!(a.approach.is_north_south(), b.approach.is_north_south());
        RelationLabel::Conflicting
    }
}

/// Control and speed bounds of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleLimits {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl VehicleLimits {
    pub fn new(u_min: f64, u_max: f64, v_min: f64, v_max: f64) -> Result<Self> {
        let limits = VehicleLimits {
            u_min,
            u_max,
            v_min,
            v_max,
        };
        limits.validate().map_err(|e| Error::Config(e.join("; ")))?;
        Ok(limits)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), Vec<String>> {
        let mut errors = Vec::new();
        if !(self.u_min < 0.0) {
            errors.push(format!("u_min must be negative, got {}", self.u_min));
        }
        if !(self.u_max > 0.0) {
            errors.push(format!("u_max must be positive, got {}", self.u_max));
        }
        if !(self.v_min >= 0.0 && self.v_min < self.v_max) {
            errors.push(format!(
                "speed limits must satisfy 0 <= v_min < v_max, got [{}, {}]",
                self.v_min, self.v_max
            ));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_way() -> IntersectionGeometry {
        IntersectionGeometry::new(
            400.0,
            30.0,
            10.0,
            None,
            vec![
                Lane::straight("E", Heading::Eastbound),
                Lane::straight("W", Heading::Westbound),
                Lane::straight("N", Heading::Northbound),
                Lane::straight("S", Heading::Southbound),
                Lane::straight("E2", Heading::Eastbound),
            ],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn relation_labels() {
        let g = four_way();
        assert_eq!(
            g.classify_relation("E", "E").unwrap(),
            RelationLabel::SameLane
        );
        assert_eq!(
            g.classify_relation("E", "N").unwrap(),
            RelationLabel::Conflicting
        );
        assert_eq!(
            g.classify_relation("N", "E").unwrap(),
            RelationLabel::Conflicting
        );
        assert_eq!(
            g.classify_relation("E", "W").unwrap(),
            RelationLabel::OppositeNoConflict
        );
        assert_eq!(
            g.classify_relation("E2", "E").unwrap(),
            RelationLabel::SameDirectionDifferentLane
        );
        assert!(matches!(
            g.classify_relation("E", "X"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn relation_table_is_total() {
        let g = four_way();
        assert_eq!(g.relation_table().len(), 25);
        assert!(g.relation_overrides().is_empty());
    }

    #[test]
    fn asymmetric_conflict_override_rejected() {
        let err = IntersectionGeometry::new(
            400.0,
            30.0,
            10.0,
            None,
            vec![
                Lane::straight("E", Heading::Eastbound),
                Lane::straight("N", Heading::Northbound),
            ],
            &[("E".into(), "N".into(), RelationLabel::OppositeNoConflict)],
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn delta_must_be_below_side() {
        let err = IntersectionGeometry::new(
            400.0,
            30.0,
            40.0,
            None,
            vec![Lane::straight("E", Heading::Eastbound)],
            &[],
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn limits_validation() {
        assert!(VehicleLimits::new(-4.0, 2.0, 0.0, 13.0).is_ok());
        assert!(VehicleLimits::new(1.0, 2.0, 0.0, 13.0).is_err());
        assert!(VehicleLimits::new(-1.0, 2.0, 13.0, 13.0).is_err());
    }
}
