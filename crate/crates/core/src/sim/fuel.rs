//! Polynomial fuel-rate metamodel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LocalPoly, PiecewiseTrajectory};

/// Coefficients of `f(v, u) = q0 + q1 v + q2 v² + q3 v³ + [u > 0] u (r0 + r1 v + r2 v²)`
/// in liters per second with `v` in m/s and `u` in m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuelCoefficients {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
}

impl FuelCoefficients {
    /// Illustrative light-duty profile of the usual polynomial metamodel shape.
    pub fn illustrative() -> Self {
        FuelCoefficients {
            q0: 1.569e-4,
            q1: 2.450e-5,
            q2: -7.415e-7,
            q3: 5.975e-8,
            r0: 7.224e-5,
            r1: 9.681e-5,
            r2: 1.075e-6,
        }
    }
}

impl Default for FuelCoefficients {
    fn default() -> Self {
        Self::illustrative()
    }
}

/// Fuel rate in liters per second. Braking adds nothing; the rate is never negative.
pub fn fuel_rate(v: f64, u: f64, c: &FuelCoefficients) -> Result<f64> {
    if v < 0.0 || !v.is_finite() {
        return Err(Error::NegativeSpeed(v));
    }
    Ok(rate_unchecked(v, u, c))
}

fn rate_unchecked(v: f64, u: f64, c: &FuelCoefficients) -> f64 {
    let cruise = c.q0 + v * (c.q1 + v * (c.q2 + v * c.q3));
    let accel = if u > 0.0 {
        u * (c.r0 + v * (c.r1 + v * c.r2))
    } else {
        0.0
    };
    (cruise + accel).max(0.0)
}

// 5-point Gauss-Legendre on [-1, 1]
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn integrate_poly(poly: &LocalPoly, a: f64, b: f64, c: &FuelCoefficients) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(x, w)| {
            let st = poly.eval(mid + half * x);
            w * rate_unchecked(st.v.max(0.0), st.u, c)
        })
        .sum::<f64>()
        * half
}

/// Fuel used along a trajectory. Arcs are split where the control changes
/// sign, so each piece is integrated exactly by the 5-point rule.
pub fn trajectory_fuel(traj: &PiecewiseTrajectory, c: &FuelCoefficients) -> f64 {
    let mut total = 0.0;
    for arc in traj.arcs() {
        let h = arc.duration();
        let p = &arc.poly;
        let mut cuts = vec![0.0, h];
        if p.jerk != 0.0 {
            let s = -p.u0 / p.jerk;
            if s > 0.0 && s < h {
                cuts.insert(1, s);
            }
        }
        for w in cuts.windows(2) {
            total += integrate_poly(p, w[0], w[1], c);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Arc, ArcKind};

    #[test]
    fn idle_rate_is_constant_term() {
        let c = FuelCoefficients::illustrative();
        assert_eq!(fuel_rate(0.0, 0.0, &c).unwrap(), c.q0);
    }

    #[test]
    fn braking_uses_cruise_term_only() {
        let c = FuelCoefficients::illustrative();
        assert_eq!(
            fuel_rate(10.0, -3.0, &c).unwrap(),
            fuel_rate(10.0, 0.0, &c).unwrap()
        );
    }

    #[test]
    fn hand_evaluation() {
        let c = FuelCoefficients::illustrative();
        let expected = 1.569e-4 + 2.450e-5 * 10.0 - 7.415e-7 * 100.0
            + 5.975e-8 * 1000.0
            + 0.1 * (7.224e-5 + 9.681e-5 * 10.0 + 1.075e-6 * 100.0);
        assert!((fuel_rate(10.0, 0.1, &c).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn negative_speed_rejected() {
        assert!(matches!(
            fuel_rate(-1.0, 0.0, &FuelCoefficients::illustrative()),
            Err(Error::NegativeSpeed(_))
        ));
    }

    #[test]
    fn quadrature_matches_fine_riemann_sum() {
        let c = FuelCoefficients::illustrative();
        let traj = PiecewiseTrajectory::single(Arc {
            kind: ArcKind::UnconstrainedCubic,
            start: 0.0,
            end: 30.0,
            poly: LocalPoly {
                p0: 0.0,
                v0: 12.0,
                u0: -0.3,
                jerk: 0.02,
            },
        });
        let n = 300_000;
        let h = 30.0 / n as f64;
        let riemann: f64 = (0..n)
            .map(|i| {
                let st = traj.arcs()[0].poly.eval((i as f64 + 0.5) * h);
                fuel_rate(st.v, st.u, &c).unwrap() * h
            })
            .sum();
        assert!((trajectory_fuel(&traj, &c) - riemann).abs() < 1e-9);
    }
}
