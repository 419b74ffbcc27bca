use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleMetrics {
    pub id: u64,
    pub lane: String,
    /// Time the vehicle first showed up at the control-zone entry.
    pub arrival: f64,
    /// Merging-zone exit time.
    pub exit: f64,
    pub travel_time: f64,
    /// `½∫u² dt`
    pub energy: f64,
    /// Liters.
    pub fuel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub mode: String,
    pub vehicles: usize,
    pub rejected: usize,
    pub retries: usize,
    pub mean_travel_time: f64,
    pub mean_fuel: f64,
    pub total_fuel: f64,
    pub mean_energy: f64,
    pub total_energy: f64,
    pub per_vehicle: Vec<VehicleMetrics>,
}

impl MetricsSummary {
    pub fn from_vehicles(
        mode: &str,
        per_vehicle: Vec<VehicleMetrics>,
        rejected: usize,
        retries: usize,
    ) -> Self {
        let n = per_vehicle.len();
        let total = |f: fn(&VehicleMetrics) -> f64| per_vehicle.iter().map(f).sum::<f64>();
        let mean = |x: f64| if n == 0 { 0.0 } else { x / n as f64 };
        let total_fuel = total(|m| m.fuel);
        let total_energy = total(|m| m.energy);
        let total_tt = total(|m| m.travel_time);
        MetricsSummary {
            mode: mode.to_string(),
            vehicles: n,
            rejected,
            retries,
            mean_travel_time: mean(total_tt),
            mean_fuel: mean(total_fuel),
            total_fuel,
            mean_energy: mean(total_energy),
            total_energy,
            per_vehicle,
        }
    }
}

/// Relative improvement `(baseline − coordinated) / baseline`; zero when the baseline is zero.
pub fn improvement(baseline: f64, coordinated: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (baseline - coordinated) / baseline
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub fuel_improvement: f64,
    pub travel_time_improvement: f64,
    /// Figures reported for the original microscopic-simulator study, for reference only.
    pub reference_fuel_improvement: f64,
    pub reference_travel_time_improvement: f64,
    pub coordinated: MetricsSummary,
    pub baseline: MetricsSummary,
}

impl Comparison {
    pub fn new(coordinated: MetricsSummary, baseline: MetricsSummary) -> Self {
        Comparison {
            fuel_improvement: improvement(baseline.mean_fuel, coordinated.mean_fuel),
            travel_time_improvement: improvement(
                baseline.mean_travel_time,
                coordinated.mean_travel_time,
            ),
            reference_fuel_improvement: 0.466,
            reference_travel_time_improvement: 0.309,
            coordinated,
            baseline,
        }
    }
}
