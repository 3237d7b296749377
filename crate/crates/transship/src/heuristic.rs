//! Receding-horizon near-optimal policy: re-solve the static model from the
//! realized state every period, adopt its order quantities, choose the
//! transshipment by a one-stage lookahead with the plan substituted for the
//! future, and repeat replications until the confidence-interval stopping
//! rule fires.

use crate::demand::DiscreteDist;
use crate::instance::{Instance, State};
use crate::milp::{
    build_lp1, default_partitions, solve_static, BranchBound, Lp1Partitions, StaticPlan,
};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex};

/// One simulated path: sampled demands, realized decisions and costs.
#[derive(Clone, Debug)]
pub struct Replication {
    pub seed: u64,
    /// Sampled demand per period and location.
    pub demands: Vec<[i64; 2]>,
    /// Opening state of each period (length T+1; last entry is terminal).
    pub states: Vec<State>,
    pub w: Vec<i64>,
    pub q: Vec<[i64; 2]>,
    pub period_costs: Vec<f64>,
    pub total_cost: f64,
}

impl Replication {
    /// Streams `period,i1,i2,w,q1,q2,cost` records for audit.
    pub fn write_records<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for t in 0..self.w.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{:.12e}",
                t + 1,
                self.states[t].i1,
                self.states[t].i2,
                self.w[t],
                self.q[t][0],
                self.q[t][1],
                self.period_costs[t]
            )?;
        }
        Ok(())
    }
}

/// Running mean/variance accumulator with order-independent merging.
#[derive(Clone, Copy, Debug, Default)]
pub struct EstimateAccumulator {
    pub n: usize,
    mean: f64,
    m2: f64,
}

impl EstimateAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Pairwise combination; the result is independent of merge order within
    /// floating tolerance.
    pub fn merge(&mut self, other: &EstimateAccumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let delta = other.mean - self.mean;
        let total = n1 + n2;
        self.mean += delta * n2 / total;
        self.m2 += other.m2 + delta * delta * n1 * n2 / total;
        self.n += other.n;
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_var(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// CI half-width at confidence `alpha`: Student-t quantile for n <= 30,
    /// normal beyond. Needs n >= 2.
    pub fn half_width(&self, alpha: f64) -> f64 {
        if self.n < 2 {
            return f64::INFINITY;
        }
        let p = 1.0 - (1.0 - alpha) / 2.0;
        let quantile = if self.n <= 30 {
            StudentsT::new(0.0, 1.0, (self.n - 1) as f64)
                .unwrap()
                .inverse_cdf(p)
        } else {
            Normal::new(0.0, 1.0).unwrap().inverse_cdf(p)
        };
        quantile * (self.sample_var() / self.n as f64).sqrt()
    }
}

/// Result of the sequential estimation.
#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
    pub converged: bool,
}

/// Batching knobs for [`estimate_stream`] and `Heuristic::estimate`.
#[derive(Clone, Copy, Debug)]
pub struct EstimateOpts {
    pub batch: usize,
    pub min_reps: usize,
    pub cap: usize,
}

impl Default for EstimateOpts {
    fn default() -> Self {
        EstimateOpts {
            batch: 100,
            min_reps: 100,
            cap: 1_000_000,
        }
    }
}

/// Runs `sample(seed)` for seeds 0,1,2,... in batches until the Student-t /
/// normal half-width drops to `rel_halfwidth * mean`, with a floor of
/// `min_reps` draws and a hard cap.
pub fn estimate_stream(
    mut sample: impl FnMut(u64) -> f64,
    alpha: f64,
    rel_halfwidth: f64,
    opts: EstimateOpts,
) -> Estimate {
    let mut acc = EstimateAccumulator::default();
    let mut seed = 0u64;
    loop {
        for _ in 0..opts.batch {
            acc.push(sample(seed));
            seed += 1;
        }
        let hw = acc.half_width(alpha);
        if acc.n >= opts.min_reps && hw <= rel_halfwidth * acc.mean().abs() {
            return Estimate {
                mean: acc.mean(),
                half_width: hw,
                n: acc.n,
                converged: true,
            };
        }
        if acc.n >= opts.cap {
            return Estimate {
                mean: acc.mean(),
                half_width: hw,
                n: acc.n,
                converged: false,
            };
        }
    }
}

/// The receding-horizon policy runner for one instance: per-start-period
/// partitions, a plan cache keyed by (period, opening state), and the exact
/// backend behind every re-solve.
pub struct Heuristic<'a> {
    pub inst: &'a Instance,
    pub n_regions: usize,
    backend: BranchBound,
    partitions: Vec<Lp1Partitions>,
    dists: Vec<[DiscreteDist; 2]>,
    cache: Mutex<HashMap<(usize, i64, i64), Arc<StaticPlan>>>,
}

impl<'a> Heuristic<'a> {
    pub fn new(inst: &'a Instance, n_regions: usize) -> Result<Self> {
        let mut partitions = Vec::with_capacity(inst.horizon);
        for k in 1..=inst.horizon {
            partitions.push(default_partitions(inst, k, n_regions)?);
        }
        let mut dists = Vec::with_capacity(inst.horizon);
        for t in 1..=inst.horizon {
            dists.push([
                inst.demand[0].discretize(t, inst.truncation_eps)?,
                inst.demand[1].discretize(t, inst.truncation_eps)?,
            ]);
        }
        Ok(Heuristic {
            inst,
            n_regions,
            backend: BranchBound::default(),
            partitions,
            dists,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Number of distinct static models solved so far.
    pub fn plans_solved(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// The static plan for horizon `[k, T]` from `opening`, memoized.
    pub fn plan_for(&self, k: usize, opening: State) -> Result<Arc<StaticPlan>> {
        let key = (k, opening.i1, opening.i2);
        if let Some(plan) = self.cache.lock().unwrap().get(&key) {
            return Ok(plan.clone());
        }
        // The plan must be a pure function of (instance, k, opening) so that
        // replications stay deterministic under any solve order; no cross-state
        // warm starts.
        let model = build_lp1(self.inst, opening, k, &self.partitions[k - 1])?;
        let plan = Arc::new(solve_static(&model, &self.backend)?);
        self.cache.lock().unwrap().insert(key, plan.clone());
        Ok(plan)
    }

    /// Chooses the period-`k` transshipment by enumerating every feasible
    /// integer W and rolling the plan out deterministically against the
    /// sampled demand path. Ties: smallest |W|, then smallest W.
    pub fn choose_transshipment(
        &self,
        opening: State,
        k: usize,
        plan: &StaticPlan,
        sampled: &[[i64; 2]],
    ) -> i64 {
        let (w_lo, w_hi) = opening.transship_bounds();
        let mut best_w = 0;
        let mut best = self.rollout_cost(opening, k, 0, plan, sampled);
        for m in 1..=(-w_lo).max(w_hi) {
            for w in [-m, m] {
                if w < w_lo || w > w_hi {
                    continue;
                }
                let cost = self.rollout_cost(opening, k, w, plan, sampled);
                if cost < best {
                    best = cost;
                    best_w = w;
                }
            }
        }
        best_w
    }

    /// Deterministic rollout: period k uses the candidate W and the plan's
    /// order pair; later periods freeze both decisions to the plan, with the
    /// planned transshipment clipped to the realized feasible interval (no
    /// back-order ever moves). Demands are the sampled path throughout.
    fn rollout_cost(
        &self,
        opening: State,
        k: usize,
        w: i64,
        plan: &StaticPlan,
        sampled: &[[i64; 2]],
    ) -> f64 {
        let c = &self.inst.costs;
        let mut state = opening;
        let mut total = 0.0;
        for t in k..=self.inst.horizon {
            let tau = t - k;
            let wt = if tau == 0 {
                w
            } else {
                let (lo, hi) = state.transship_bounds();
                plan.w_int[tau].clamp(lo, hi)
            };
            let q = plan.q_int[tau];
            let y1 = state.i1 - wt + q[0];
            let y2 = state.i2 + wt + q[1];
            let d = sampled[t - 1];
            total += c.transship(wt.abs())
                + c.order(q[0])
                + c.order(q[1])
                + c.h * ((y1 - d[0]).max(0) + (y2 - d[1]).max(0)) as f64
                + c.b * ((d[0] - y1).max(0) + (d[1] - y2).max(0)) as f64;
            state = State::new(y1 - d[0], y2 - d[1]);
        }
        total
    }

    /// Simulates one full path: sample demands, then per period re-solve the
    /// static model from the realized opening, adopt its orders, and pick
    /// the transshipment by lookahead. `(instance, opening, seed)` fully
    /// determines the result.
    pub fn run_replication(&self, opening: State, seed: u64) -> Result<Replication> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let horizon = self.inst.horizon;
        let mut demands = Vec::with_capacity(horizon);
        for t in 0..horizon {
            let d1 = self.dists[t][0].sample(&mut rng);
            let d2 = self.dists[t][1].sample(&mut rng);
            demands.push([d1, d2]);
        }

        let c = &self.inst.costs;
        let mut rep = Replication {
            seed,
            demands: demands.clone(),
            states: vec![opening],
            w: Vec::with_capacity(horizon),
            q: Vec::with_capacity(horizon),
            period_costs: Vec::with_capacity(horizon),
            total_cost: 0.0,
        };
        let mut state = opening;
        for k in 1..=horizon {
            let plan = self.plan_for(k, state).map_err(|e| {
                Error::Infeasible(format!(
                    "static model failed at period {k} from ({}, {}): {e}",
                    state.i1, state.i2
                ))
            })?;
            let w = self.choose_transshipment(state, k, &plan, &demands);
            let q = plan.q_int[0];
            let y1 = state.i1 - w + q[0];
            let y2 = state.i2 + w + q[1];
            let d = demands[k - 1];
            let cost = c.transship(w.abs())
                + c.order(q[0])
                + c.order(q[1])
                + c.h * ((y1 - d[0]).max(0) + (y2 - d[1]).max(0)) as f64
                + c.b * ((d[0] - y1).max(0) + (d[1] - y2).max(0)) as f64;
            state = State::new(y1 - d[0], y2 - d[1]);
            rep.w.push(w);
            rep.q.push(q);
            rep.period_costs.push(cost);
            rep.total_cost += cost;
            rep.states.push(state);
        }
        Ok(rep)
    }

    /// Estimates the expected total cost from `opening` under the stopping
    /// rule: replications run in seed batches (executed in parallel, merged
    /// in seed order) until the CI half-width reaches
    /// `rel_halfwidth * mean` at confidence `alpha`.
    pub fn estimate(
        &self,
        opening: State,
        alpha: f64,
        rel_halfwidth: f64,
        opts: EstimateOpts,
    ) -> Result<Estimate> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain("confidence must lie in (0,1)".into()));
        }
        if rel_halfwidth <= 0.0 {
            return Err(Error::Domain("relative half-width must be positive".into()));
        }
        let mut acc = EstimateAccumulator::default();
        let mut next_seed = 0u64;
        loop {
            let seeds: Vec<u64> = (next_seed..next_seed + opts.batch as u64).collect();
            next_seed += opts.batch as u64;
            let costs: Vec<Result<f64>> = seeds
                .par_iter()
                .map(|&s| self.run_replication(opening, s).map(|r| r.total_cost))
                .collect();
            for c in costs {
                acc.push(c?);
            }
            let hw = acc.half_width(alpha);
            if acc.n >= opts.min_reps && hw <= rel_halfwidth * acc.mean().abs() {
                return Ok(Estimate {
                    mean: acc.mean(),
                    half_width: hw,
                    n: acc.n,
                    converged: true,
                });
            }
            if acc.n >= opts.cap {
                return Ok(Estimate {
                    mean: acc.mean(),
                    half_width: hw,
                    n: acc.n,
                    converged: false,
                });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::demand::DemandSpec;
    use crate::instance::Costs;
    use approx::assert_abs_diff_eq;

    fn small_costs() -> Costs {
        Costs {
            k: 8.0,
            z: 1.0,
            r: 4.0,
            v: 0.5,
            h: 1.0,
            b: 5.0,
        }
    }

    #[test]
    fn zero_stock_forces_zero_transshipment() {
        let spec = DemandSpec::poisson(vec![2.0, 2.0]).unwrap();
        let inst = Instance::new(2, small_costs(), [spec.clone(), spec]).unwrap();
        let h = Heuristic::new(&inst, 4).unwrap();
        let plan = h.plan_for(1, State::new(0, 0)).unwrap();
        let w = h.choose_transshipment(State::new(0, 0), 1, &plan, &[[2, 2], [2, 2]]);
        assert_eq!(w, 0);
    }

    #[test]
    fn lookahead_clears_backorder_exactly() {
        // Opening (5,-3), cheap fixed transship cost, v < b, near-zero
        // demand so the plan orders nothing: ship exactly 3.
        let spec = DemandSpec::normal(vec![1e-6, 1e-6], 0.5).unwrap();
        let costs = Costs {
            k: 50.0,
            z: 1.0,
            r: 0.1,
            v: 0.5,
            h: 1.0,
            b: 5.0,
        };
        let inst = Instance::with_options(
            2,
            costs,
            [spec.clone(), spec],
            Some([(-8, 8), (-8, 8)]),
            Some(4),
            1e-3,
        )
        .unwrap();
        let h = Heuristic::new(&inst, 2).unwrap();
        let plan = h.plan_for(1, State::new(5, -3)).unwrap();
        let w = h.choose_transshipment(State::new(5, -3), 1, &plan, &[[0, 0], [0, 0]]);
        assert_eq!(w, 3);
    }

    #[test]
    fn prohibitive_fixed_cost_blocks_transshipment() {
        let spec = DemandSpec::poisson(vec![1.5, 1.5]).unwrap();
        let mut costs = small_costs();
        costs.r = 1e5;
        let inst = Instance::new(2, costs, [spec.clone(), spec]).unwrap();
        let h = Heuristic::new(&inst, 4).unwrap();
        for opening in [State::new(6, -2), State::new(3, 3), State::new(-1, 7)] {
            let plan = h.plan_for(1, opening).unwrap();
            assert_eq!(h.choose_transshipment(opening, 1, &plan, &[[1, 2], [2, 1]]), 0);
        }
    }

    #[test]
    fn replications_are_deterministic_in_the_seed() {
        let spec = DemandSpec::poisson(vec![2.0, 3.0]).unwrap();
        let inst = Instance::new(2, small_costs(), [spec.clone(), spec]).unwrap();
        let h = Heuristic::new(&inst, 4).unwrap();
        let a = h.run_replication(State::new(1, 1), 17).unwrap();
        let b = h.run_replication(State::new(1, 1), 17).unwrap();
        assert_eq!(a.demands, b.demands);
        assert_eq!(a.w, b.w);
        assert_eq!(a.q, b.q);
        assert_eq!(a.total_cost.to_bits(), b.total_cost.to_bits());
    }

    #[test]
    fn deterministic_demand_converges_at_the_floor() {
        let spec = DemandSpec::normal(vec![2.0, 3.0], 0.001).unwrap();
        let inst = Instance::new(2, small_costs(), [spec.clone(), spec]).unwrap();
        let h = Heuristic::new(&inst, 2).unwrap();
        let est = h
            .estimate(
                State::new(0, 0),
                0.95,
                0.001,
                EstimateOpts {
                    batch: 10,
                    min_reps: 20,
                    cap: 1000,
                },
            )
            .unwrap();
        assert!(est.converged);
        assert_eq!(est.n, 20);
        assert!(est.half_width.abs() < 1e-9);
    }

    #[test]
    fn stream_estimator_matches_sample_size_formula() {
        // N(100, 1) stream: n ~ (1.96 / 0.1)^2 ~ 384, reached at the 400
        // checkpoint under batches of 100.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let normal = Normal::new(100.0, 1.0).unwrap();
        let est = estimate_stream(
            |_| normal.inverse_cdf(rng.gen::<f64>()),
            0.95,
            0.001,
            EstimateOpts::default(),
        );
        assert!(est.converged);
        assert!(
            (327..=442).contains(&est.n),
            "stopped at n = {} outside +-15% of 384",
            est.n
        );
    }

    #[test]
    fn higher_confidence_needs_at_least_as_many_draws() {
        let run = |alpha: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let normal = Normal::new(50.0, 2.0).unwrap();
            estimate_stream(
                |_| normal.inverse_cdf(rng.gen::<f64>()),
                alpha,
                0.005,
                EstimateOpts::default(),
            )
        };
        assert!(run(0.99).n >= run(0.95).n);
    }

    #[test]
    fn accumulator_merge_is_order_independent() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| (i as f64 * 0.37).sin() * 10.0 + 50.0)
            .collect();
        let mut whole = EstimateAccumulator::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut left = EstimateAccumulator::default();
        let mut right = EstimateAccumulator::default();
        xs[..300].iter().for_each(|&x| left.push(x));
        xs[300..].iter().for_each(|&x| right.push(x));
        let mut merged = EstimateAccumulator::default();
        merged.merge(&right);
        merged.merge(&left);
        assert_abs_diff_eq!(merged.mean(), whole.mean(), epsilon = 1e-9);
        assert_abs_diff_eq!(merged.sample_var(), whole.sample_var(), epsilon = 1e-9);
    }
}
