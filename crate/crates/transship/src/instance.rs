//! Core problem statement: cost parameters, per-location demand, and the
//! state/action types shared by solvers, the heuristic and the studies.

use crate::demand::{DemandSpec, DEFAULT_TRUNCATION_EPS};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Cost parameters of one problem instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Costs {
    /// Fixed ordering cost per order.
    pub k: f64,
    /// Unit ordering cost.
    pub z: f64,
    /// Fixed transshipping cost per transshipment.
    pub r: f64,
    /// Unit transshipping cost.
    pub v: f64,
    /// Unit holding cost per period.
    pub h: f64,
    /// Unit back-order penalty cost per period.
    pub b: f64,
}

impl Costs {
    /// Transshipping cost `u(x) = R + v x` for `x > 0`, else 0.
    pub fn transship(&self, units: i64) -> f64 {
        if units > 0 {
            self.r + self.v * units as f64
        } else {
            0.0
        }
    }

    /// Ordering cost `c(Q) = K + z Q` for `Q > 0`, else 0.
    pub fn order(&self, quantity: i64) -> f64 {
        if quantity > 0 {
            self.k + self.z * quantity as f64
        } else {
            0.0
        }
    }
}

/// Inventory levels at the two locations at a review epoch. Negative values
/// are back-orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct State {
    pub i1: i64,
    pub i2: i64,
}

impl State {
    pub fn new(i1: i64, i2: i64) -> Self {
        State { i1, i2 }
    }

    /// Feasible transshipment interval for this state: positive values ship
    /// from location 1 to 2. Only actual stock moves, never back-orders.
    pub fn transship_bounds(&self) -> (i64, i64) {
        ((-self.i2).min(0), self.i1.max(0))
    }
}

/// Joint decision at one review epoch: transship quantity (sign = direction,
/// positive means location 1 to 2) and two order quantities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub w: i64,
    pub q1: i64,
    pub q2: i64,
}

impl Action {
    pub fn new(w: i64, q1: i64, q2: i64) -> Self {
        Action { w, q1, q2 }
    }
}

/// Full problem statement for the two-location lot-sizing problem.
#[derive(Clone, Debug)]
pub struct Instance {
    pub horizon: usize,
    pub costs: Costs,
    /// Demand specifications for locations 1 and 2.
    pub demand: [DemandSpec; 2],
    /// Inclusive inventory-level bounds per location for the DP lattice.
    pub state_bounds: [(i64, i64); 2],
    /// Maximum order quantity per location and period.
    pub q_max: i64,
    /// Truncation threshold applied when discretizing demand.
    pub truncation_eps: f64,
}

/// Non-fatal observations about an instance relative to the experimental
/// regime the cost grids are drawn from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegimeWarnings(pub Vec<String>);

impl Instance {
    /// Builds an instance with derived default lattice bounds and order cap.
    ///
    /// Defaults: `q_max` covers the largest whole-horizon truncated demand of
    /// either location, and the bounds are `[-(sum of max demand),
    /// +(sum of max demand + q_max)]` per location.
    pub fn new(horizon: usize, costs: Costs, demand: [DemandSpec; 2]) -> Result<Self> {
        Self::with_options(horizon, costs, demand, None, None, DEFAULT_TRUNCATION_EPS)
    }

    pub fn with_options(
        horizon: usize,
        costs: Costs,
        demand: [DemandSpec; 2],
        state_bounds: Option<[(i64, i64); 2]>,
        q_max: Option<i64>,
        truncation_eps: f64,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Domain("horizon must be at least 1".into()));
        }
        for spec in &demand {
            spec.validate()?;
            if spec.horizon() != horizon {
                return Err(Error::Domain(format!(
                    "demand spec covers {} periods, horizon is {horizon}",
                    spec.horizon()
                )));
            }
        }
        for (name, value) in [
            ("K", costs.k),
            ("z", costs.z),
            ("R", costs.r),
            ("v", costs.v),
            ("h", costs.h),
            ("b", costs.b),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::Domain(format!("cost {name} must be nonnegative")));
            }
        }
        if costs.h <= 0.0 || costs.b <= 0.0 {
            return Err(Error::Domain("holding and penalty costs must be positive".into()));
        }

        let mut demand_span = [0i64; 2];
        for (j, spec) in demand.iter().enumerate() {
            let mut total = 0i64;
            for t in 1..=horizon {
                total += spec.discretize(t, truncation_eps)?.support_max();
            }
            demand_span[j] = total;
        }
        let q_max = q_max.unwrap_or_else(|| demand_span[0].max(demand_span[1]).max(1));
        if q_max < 0 {
            return Err(Error::Domain("q_max must be nonnegative".into()));
        }
        let state_bounds = state_bounds
            .unwrap_or([
                (-demand_span[0], demand_span[0] + q_max),
                (-demand_span[1], demand_span[1] + q_max),
            ]);
        for (lo, hi) in state_bounds {
            if lo > hi {
                return Err(Error::Domain("state bounds must satisfy lo <= hi".into()));
            }
        }
        Ok(Instance {
            horizon,
            costs,
            demand,
            state_bounds,
            q_max,
            truncation_eps,
        })
    }

    /// Checks the paper-regime conventions `K > R`, `K <= 2R`, `v < b`.
    /// Violations are reported, not rejected.
    pub fn regime_warnings(&self) -> RegimeWarnings {
        let mut w = Vec::new();
        let c = &self.costs;
        if c.k <= c.r {
            w.push(format!(
                "K = {} not greater than R = {}: transshipment does not take precedence over ordering",
                c.k, c.r
            ));
        }
        if c.k > 2.0 * c.r {
            w.push(format!(
                "K = {} exceeds 2R = {}: a single order may dominate all transshipment",
                c.k,
                2.0 * c.r
            ));
        }
        if c.v >= c.b {
            w.push(format!(
                "v = {} not below b = {}: unmet demand may stay back-ordered despite worthwhile transshipment",
                c.v, c.b
            ));
        }
        RegimeWarnings(w)
    }

    /// True if `state` lies on the DP lattice.
    pub fn contains(&self, state: State) -> bool {
        let [(lo1, hi1), (lo2, hi2)] = self.state_bounds;
        (lo1..=hi1).contains(&state.i1) && (lo2..=hi2).contains(&state.i2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::DemandSpec;

    fn costs() -> Costs {
        Costs {
            k: 10.0,
            z: 2.0,
            r: 5.0,
            v: 1.0,
            h: 1.0,
            b: 3.0,
        }
    }

    #[test]
    fn cost_functions_are_zero_at_zero() {
        let c = costs();
        assert_eq!(c.transship(0), 0.0);
        assert_eq!(c.order(0), 0.0);
        assert_eq!(c.transship(3), 5.0 + 3.0);
        assert_eq!(c.order(4), 10.0 + 8.0);
    }

    #[test]
    fn transship_bounds_respect_backorders() {
        assert_eq!(State::new(5, -2).transship_bounds(), (0, 5));
        assert_eq!(State::new(-3, 4).transship_bounds(), (-4, 0));
        assert_eq!(State::new(-1, -1).transship_bounds(), (0, 0));
        assert_eq!(State::new(2, 3).transship_bounds(), (-3, 2));
    }

    #[test]
    fn default_bounds_cover_demand_span() {
        let d = DemandSpec::poisson(vec![2.0, 3.0]).unwrap();
        let inst = Instance::new(2, costs(), [d.clone(), d]).unwrap();
        let [(lo, hi), _] = inst.state_bounds;
        assert!(lo < 0 && hi > 0);
        assert!(inst.q_max > 0);
        assert!(inst.contains(State::new(0, 0)));
    }

    #[test]
    fn regime_checks_warn_not_reject() {
        let mut c = costs();
        c.k = 3.0; // K <= R
        let d = DemandSpec::poisson(vec![1.0]).unwrap();
        let inst = Instance::new(1, c, [d.clone(), d]).unwrap();
        assert!(!inst.regime_warnings().0.is_empty());
    }

    #[test]
    fn mismatched_horizon_rejected() {
        let d = DemandSpec::poisson(vec![1.0, 2.0]).unwrap();
        assert!(Instance::new(3, costs(), [d.clone(), d]).is_err());
    }
}
