//! Exact backward-induction solvers over the two-location lattice.
//!
//! `solve_sdp1` minimizes over the joint action space per state;
//! `solve_sdp2` performs the decoupled transship-then-order minimization
//! (outer over the transshipment, inner over the order pair). Both walk the
//! same truncated demand lattice, clamp transitions to the state bounds, and
//! break argmin ties lexicographically by (|W|, W, Q1, Q2), smallest first.

use crate::instance::{Action, Instance, State};
use crate::{demand::DiscreteDist, Error, Result};
use rayon::prelude::*;
use std::collections::VecDeque;
use std::io::Write;

/// Probability mass allowed to fold onto a clamped lattice boundary along an
/// optimal trajectory before the bounds are reported as too tight.
pub const BOUNDARY_MASS_TOL: f64 = 1e-4;

/// Inclusive integer interval with dense indexing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Span {
    lo: i64,
    hi: i64,
}

impl Span {
    fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    fn idx(&self, v: i64) -> usize {
        debug_assert!(v >= self.lo && v <= self.hi);
        (v - self.lo) as usize
    }

    fn clamp(&self, v: i64) -> i64 {
        v.clamp(self.lo, self.hi)
    }

    fn contains(&self, v: i64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// Per-stage map from states to optimal cost-to-go and optimal action.
#[derive(Clone, Debug)]
pub struct ValueTable {
    pub horizon: usize,
    bounds: [Span; 2],
    stages: Vec<StageTable>,
}

#[derive(Clone, Debug)]
struct StageTable {
    cost: Vec<f64>,
    action: Vec<Action>,
}

impl ValueTable {
    fn state_idx(&self, state: State) -> Option<usize> {
        let [s1, s2] = self.bounds;
        if !s1.contains(state.i1) || !s2.contains(state.i2) {
            return None;
        }
        Some(s1.idx(state.i1) * s2.len() + s2.idx(state.i2))
    }

    /// Optimal expected cost-to-go from `state` at 1-based `stage`.
    pub fn cost(&self, stage: usize, state: State) -> Option<f64> {
        if stage == 0 || stage > self.horizon {
            return None;
        }
        self.state_idx(state)
            .map(|i| self.stages[stage - 1].cost[i])
    }

    /// Optimal action at `state` for 1-based `stage`.
    pub fn best_action(&self, stage: usize, state: State) -> Option<Action> {
        if stage == 0 || stage > self.horizon {
            return None;
        }
        self.state_idx(state)
            .map(|i| self.stages[stage - 1].action[i])
    }

    /// Iterates `(stage, state, cost, action)` over the whole table.
    pub fn iter(&self) -> impl Iterator<Item = (usize, State, f64, Action)> + '_ {
        let [s1, s2] = self.bounds;
        (1..=self.horizon).flat_map(move |t| {
            let stage = &self.stages[t - 1];
            (s1.lo..=s1.hi).flat_map(move |i1| {
                (s2.lo..=s2.hi).map(move |i2| {
                    let idx = s1.idx(i1) * s2.len() + s2.idx(i2);
                    (t, State::new(i1, i2), stage.cost[idx], stage.action[idx])
                })
            })
        })
    }

    /// Writes the flat CSV form `stage,i1,i2,cost,w,q1,q2`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "stage,i1,i2,cost,w,q1,q2")?;
        for (t, s, cost, a) in self.iter() {
            writeln!(
                out,
                "{},{},{},{:.12e},{},{},{}",
                t, s.i1, s.i2, cost, a.w, a.q1, a.q2
            )?;
        }
        Ok(())
    }
}

/// Expected one-period holding plus penalty cost at post-decision position
/// `y` against a truncated demand distribution.
fn holding_penalty(dist: &DiscreteDist, y: i64, h: f64, b: f64) -> f64 {
    let mut acc = 0.0;
    for (d, p) in dist.iter() {
        let over = (y - d).max(0) as f64;
        let short = (d - y).max(0) as f64;
        acc += p * (h * over + b * short);
    }
    acc
}

/// Immediate expected holding and penalty cost of one period, given the
/// post-transshipment, post-order positions of both locations.
pub fn immediate_cost(inst: &Instance, period: usize, y1: i64, y2: i64) -> Result<f64> {
    let d1 = inst.demand[0].discretize(period, inst.truncation_eps)?;
    let d2 = inst.demand[1].discretize(period, inst.truncation_eps)?;
    let c = &inst.costs;
    Ok(holding_penalty(&d1, y1, c.h, c.b) + holding_penalty(&d2, y2, c.h, c.b))
}

/// How the per-state minimization is organized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum SolveMode {
    /// Scan the joint (W, Q1, Q2) space per state.
    Joint,
    /// Outer minimization over W, inner over (Q1, Q2).
    Nested,
}

struct Engine<'a> {
    inst: &'a Instance,
    dists: Vec<[DiscreteDist; 2]>,
    state1: Span,
    state2: Span,
    tilde1: Span,
    tilde2: Span,
    post1: Span,
    post2: Span,
}

impl<'a> Engine<'a> {
    fn new(inst: &'a Instance) -> Result<Self> {
        let mut dists = Vec::with_capacity(inst.horizon);
        for t in 1..=inst.horizon {
            dists.push([
                inst.demand[0].discretize(t, inst.truncation_eps)?,
                inst.demand[1].discretize(t, inst.truncation_eps)?,
            ]);
        }
        let [(lo1, hi1), (lo2, hi2)] = inst.state_bounds;
        let state1 = Span { lo: lo1, hi: hi1 };
        let state2 = Span { lo: lo2, hi: hi2 };
        // Post-transshipment positions reachable from the grid: shipping the
        // whole positive stock away empties a location; receiving the other
        // location's whole stock tops it up.
        let tilde1 = Span {
            lo: lo1.min(0),
            hi: hi1 + hi2.max(0),
        };
        let tilde2 = Span {
            lo: lo2.min(0),
            hi: hi2 + hi1.max(0),
        };
        let post1 = Span {
            lo: tilde1.lo,
            hi: tilde1.hi + inst.q_max,
        };
        let post2 = Span {
            lo: tilde2.lo,
            hi: tilde2.hi + inst.q_max,
        };
        Ok(Engine {
            inst,
            dists,
            state1,
            state2,
            tilde1,
            tilde2,
            post1,
            post2,
        })
    }

    fn n_states(&self) -> usize {
        self.state1.len() * self.state2.len()
    }

    /// Expected next-stage value at every post-order position pair, folding
    /// off-lattice transitions onto the boundary. Separable in the two
    /// independent demands: first convolve axis 1, then axis 2.
    fn expectation_table(&self, t: usize, next: &StageTable) -> Vec<f64> {
        let (d1, d2) = (&self.dists[t - 1][0], &self.dists[t - 1][1]);
        let (n_post1, n_post2) = (self.post1.len(), self.post2.len());
        let n2 = self.state2.len();

        let mut partial = vec![0.0; n_post1 * n2];
        partial
            .par_chunks_mut(n2)
            .enumerate()
            .for_each(|(p1, row)| {
                let y1 = self.post1.lo + p1 as i64;
                for (d, p) in d1.iter() {
                    let r = self.state1.idx(self.state1.clamp(y1 - d));
                    let src = &next.cost[r * n2..(r + 1) * n2];
                    for (acc, v) in row.iter_mut().zip(src) {
                        *acc += p * v;
                    }
                }
            });

        let mut ev = vec![0.0; n_post1 * n_post2];
        ev.par_chunks_mut(n_post2)
            .enumerate()
            .for_each(|(p1, row)| {
                let src = &partial[p1 * n2..(p1 + 1) * n2];
                for (i, acc) in row.iter_mut().enumerate() {
                    let y2 = self.post2.lo + i as i64;
                    let mut sum = 0.0;
                    for (d, p) in d2.iter() {
                        sum += p * src[self.state2.idx(self.state2.clamp(y2 - d))];
                    }
                    *acc = sum;
                }
            });
        ev
    }

    /// `J[y1][y2]`: expected immediate holding/penalty plus continuation at
    /// each post-order position pair.
    fn post_order_table(&self, t: usize, next: Option<&StageTable>) -> Vec<f64> {
        let (h, b) = (self.inst.costs.h, self.inst.costs.b);
        let (d1, d2) = (&self.dists[t - 1][0], &self.dists[t - 1][1]);
        let hb1: Vec<f64> = (self.post1.lo..=self.post1.hi)
            .map(|y| holding_penalty(d1, y, h, b))
            .collect();
        let hb2: Vec<f64> = (self.post2.lo..=self.post2.hi)
            .map(|y| holding_penalty(d2, y, h, b))
            .collect();
        let n_post2 = self.post2.len();
        let mut j = match next {
            Some(table) => self.expectation_table(t, table),
            None => vec![0.0; self.post1.len() * n_post2],
        };
        j.par_chunks_mut(n_post2).enumerate().for_each(|(p1, row)| {
            let base = hb1[p1];
            for (cell, hb) in row.iter_mut().zip(&hb2) {
                *cell += base + hb;
            }
        });
        j
    }

    fn order_stage(&self, j: &[f64], mode: SolveMode) -> Vec<(f64, i64, i64)> {
        match mode {
            SolveMode::Joint => self.order_stage_scan(j),
            SolveMode::Nested => self.order_stage_windows(j),
        }
    }

    /// Direct scan over the full (Q1, Q2) rectangle for each position.
    fn order_stage_scan(&self, j: &[f64]) -> Vec<(f64, i64, i64)> {
        let q_max = self.inst.q_max;
        let costs = self.inst.costs;
        let order_cost: Vec<f64> = (0..=q_max).map(|q| costs.order(q)).collect();
        let n_post2 = self.post2.len();
        let n_t2 = self.tilde2.len();

        let mut out = vec![(f64::INFINITY, 0, 0); self.tilde1.len() * n_t2];
        out.par_chunks_mut(n_t2).enumerate().for_each(|(a, row)| {
            let t1 = self.tilde1.lo + a as i64;
            let q1_hi = q_max.min(self.post1.hi - t1);
            for (bidx, slot) in row.iter_mut().enumerate() {
                let t2 = self.tilde2.lo + bidx as i64;
                let q2_hi = q_max.min(self.post2.hi - t2);
                let mut best = (f64::INFINITY, 0i64, 0i64);
                for q1 in 0..=q1_hi {
                    let c1 = order_cost[q1 as usize];
                    let row_base = self.post1.idx(t1 + q1) * n_post2 + self.post2.idx(t2);
                    for q2 in 0..=q2_hi {
                        let cost = c1 + order_cost[q2 as usize] + j[row_base + q2 as usize];
                        if cost < best.0 {
                            best = (cost, q1, q2);
                        }
                    }
                }
                *slot = best;
            }
        });
        out
    }

    /// Sliding-window formulation: the four (Q1 = 0 / > 0) x (Q2 = 0 / > 0)
    /// cases, each a windowed minimum of `z * y + J` over the admissible
    /// post-order positions. Exact and tie-break-identical to the scan.
    fn order_stage_windows(&self, j: &[f64]) -> Vec<(f64, i64, i64)> {
        let q_max = self.inst.q_max;
        let costs = self.inst.costs;
        let (k, z) = (costs.k, costs.z);
        let n_post2 = self.post2.len();
        let n_t1 = self.tilde1.len();
        let n_t2 = self.tilde2.len();

        // Q1 > 0, Q2 = 0: per t2 column, window over y1.
        let only1_cols: Vec<Vec<(f64, i64)>> = (0..n_t2)
            .into_par_iter()
            .map(|bidx| {
                let col = self.post2.idx(self.tilde2.lo + bidx as i64);
                window_min_over(self.tilde1, self.post1, q_max, |y1| {
                    z * y1 as f64 + j[self.post1.idx(y1) * n_post2 + col]
                })
            })
            .collect();

        // Q1 = 0, Q2 > 0: per t1 row, window over y2.
        let only2_rows: Vec<Vec<(f64, i64)>> = (0..n_t1)
            .into_par_iter()
            .map(|aidx| {
                let row = self.post1.idx(self.tilde1.lo + aidx as i64) * n_post2;
                window_min_over(self.tilde2, self.post2, q_max, |y2| {
                    z * y2 as f64 + j[row + self.post2.idx(y2)]
                })
            })
            .collect();

        // Q1 > 0, Q2 > 0: window over y1 for every y2 column, then over y2.
        let pass1: Vec<Vec<(f64, i64)>> = (0..n_post2)
            .into_par_iter()
            .map(|col| {
                window_min_over(self.tilde1, self.post1, q_max, |y1| {
                    z * y1 as f64 + j[self.post1.idx(y1) * n_post2 + col]
                })
            })
            .collect();
        let both_rows: Vec<Vec<(f64, i64, i64)>> = (0..n_t1)
            .into_par_iter()
            .map(|aidx| {
                window_min_pairs(self.tilde2, self.post2, q_max, |y2| {
                    let (val, y1) = pass1[self.post2.idx(y2)][aidx];
                    (val + z * y2 as f64, y1)
                })
            })
            .collect();

        let mut out = vec![(f64::INFINITY, 0, 0); n_t1 * n_t2];
        out.par_chunks_mut(n_t2).enumerate().for_each(|(aidx, row)| {
            let t1 = self.tilde1.lo + aidx as i64;
            for (bidx, slot) in row.iter_mut().enumerate() {
                let t2 = self.tilde2.lo + bidx as i64;
                let none = j[self.post1.idx(t1) * n_post2 + self.post2.idx(t2)];
                let mut best = (none, 0i64, 0i64);
                let mut consider = |cand: (f64, i64, i64)| {
                    if cand.0 < best.0
                        || (cand.0 == best.0 && (cand.1, cand.2) < (best.1, best.2))
                    {
                        best = cand;
                    }
                };
                let (v2, y2) = only2_rows[aidx][bidx];
                if v2.is_finite() {
                    consider((k + v2 - z * t2 as f64, 0, y2 - t2));
                }
                let (v1, y1) = only1_cols[bidx][aidx];
                if v1.is_finite() {
                    consider((k + v1 - z * t1 as f64, y1 - t1, 0));
                }
                let (vb, y1b, y2b) = both_rows[aidx][bidx];
                if vb.is_finite() {
                    consider((2.0 * k + vb - z * (t1 + t2) as f64, y1b - t1, y2b - t2));
                }
                *slot = best;
            }
        });
        out
    }

    /// One full backward-induction stage: order-stage table then the outer
    /// transshipment scan.
    fn stage(&self, t: usize, next: Option<&StageTable>, mode: SolveMode) -> StageTable {
        let j = self.post_order_table(t, next);
        let order = self.order_stage(&j, mode);
        let n2 = self.state2.len();
        let n_t2 = self.tilde2.len();
        let costs = self.inst.costs;

        let mut cost = vec![0.0; self.n_states()];
        let mut action = vec![Action::default(); self.n_states()];
        cost.par_chunks_mut(n2)
            .zip(action.par_chunks_mut(n2))
            .enumerate()
            .for_each(|(r, (crow, arow))| {
                let i1 = self.state1.lo + r as i64;
                for (cidx, (cslot, aslot)) in crow.iter_mut().zip(arow.iter_mut()).enumerate() {
                    let i2 = self.state2.lo + cidx as i64;
                    let (w_lo, w_hi) = State::new(i1, i2).transship_bounds();
                    let eval = |w: i64| {
                        let a = self.tilde1.idx(i1 - w);
                        let b = self.tilde2.idx(i2 + w);
                        let (c, q1, q2) = order[a * n_t2 + b];
                        (costs.transship(w.abs()) + c, q1, q2)
                    };
                    // Ties resolve to the smallest |W|, then the smallest W:
                    // scan 0, -1, +1, -2, +2, ... keeping strict improvements.
                    let (mut best, mut bq1, mut bq2) = eval(0);
                    let mut bw = 0i64;
                    for m in 1..=(-w_lo).max(w_hi) {
                        for w in [-m, m] {
                            if w < w_lo || w > w_hi {
                                continue;
                            }
                            let (c, q1, q2) = eval(w);
                            if c < best {
                                best = c;
                                bw = w;
                                bq1 = q1;
                                bq2 = q2;
                            }
                        }
                    }
                    *cslot = best;
                    *aslot = Action::new(bw, bq1, bq2);
                }
            });
        StageTable { cost, action }
    }

    fn solve(&self, mode: SolveMode) -> ValueTable {
        let mut rev: Vec<StageTable> = Vec::with_capacity(self.inst.horizon);
        for t in (1..=self.inst.horizon).rev() {
            let stage = self.stage(t, rev.last(), mode);
            rev.push(stage);
        }
        rev.reverse();
        ValueTable {
            horizon: self.inst.horizon,
            bounds: [self.state1, self.state2],
            stages: rev,
        }
    }
}

/// Windowed minimum of `vals(y)` over `y in (t, t + q_max]` for every `t` in
/// `targets`, keeping the smallest `y` on value ties. Infinity marks an
/// empty window.
fn window_min_over(
    targets: Span,
    domain: Span,
    q_max: i64,
    vals: impl Fn(i64) -> f64,
) -> Vec<(f64, i64)> {
    let mut out = vec![(f64::INFINITY, 0i64); targets.len()];
    let mut deque: VecDeque<(f64, i64)> = VecDeque::new();
    let mut cursor = targets.lo + 1;
    for t in targets.lo..=targets.hi {
        let upper = (t + q_max).min(domain.hi);
        while cursor <= upper {
            let v = vals(cursor);
            while matches!(deque.back(), Some(&(bv, _)) if bv > v) {
                deque.pop_back();
            }
            deque.push_back((v, cursor));
            cursor += 1;
        }
        while matches!(deque.front(), Some(&(_, y)) if y <= t) {
            deque.pop_front();
        }
        if let Some(&(v, y)) = deque.front() {
            out[targets.idx(t)] = (v, y);
        }
    }
    out
}

/// As [`window_min_over`] but the values carry a second argmin coordinate;
/// ties prefer the lexicographically smaller `(value, carried, y)`.
fn window_min_pairs(
    targets: Span,
    domain: Span,
    q_max: i64,
    vals: impl Fn(i64) -> (f64, i64),
) -> Vec<(f64, i64, i64)> {
    let mut out = vec![(f64::INFINITY, 0i64, 0i64); targets.len()];
    let mut deque: VecDeque<(f64, i64, i64)> = VecDeque::new();
    let mut cursor = targets.lo + 1;
    for t in targets.lo..=targets.hi {
        let upper = (t + q_max).min(domain.hi);
        while cursor <= upper {
            let (v, carried) = vals(cursor);
            while matches!(deque.back(), Some(&(bv, bc, _)) if (bv, bc) > (v, carried)) {
                deque.pop_back();
            }
            deque.push_back((v, carried, cursor));
            cursor += 1;
        }
        while matches!(deque.front(), Some(&(_, _, y)) if y <= t) {
            deque.pop_front();
        }
        if let Some(&(v, carried, y)) = deque.front() {
            out[targets.idx(t)] = (v, carried, y);
        }
    }
    out
}

/// Solves the joint-action-space dynamic program exactly.
pub fn solve_sdp1(inst: &Instance) -> Result<ValueTable> {
    Ok(Engine::new(inst)?.solve(SolveMode::Joint))
}

/// Solves the two-stage (transship, then order) dynamic program exactly.
pub fn solve_sdp2(inst: &Instance) -> Result<ValueTable> {
    Ok(Engine::new(inst)?.solve(SolveMode::Nested))
}

/// A per-stage state-to-action map.
pub trait PolicyMap {
    fn action(&self, stage: usize, state: State) -> Option<Action>;
}

impl PolicyMap for ValueTable {
    fn action(&self, stage: usize, state: State) -> Option<Action> {
        self.best_action(stage, state)
    }
}

/// A fixed per-period plan interpreted as a policy. With `clamp_w` the
/// transshipment is clipped to the feasible interval of the realized state
/// (stock moves, back-orders never do); without it the plan is applied
/// verbatim, which evaluates the plan under the linear balance dynamics the
/// static model assumes.
#[derive(Clone, Debug)]
pub struct OpenLoopPolicy {
    pub actions: Vec<Action>,
    pub clamp_w: bool,
}

impl PolicyMap for OpenLoopPolicy {
    fn action(&self, stage: usize, state: State) -> Option<Action> {
        let mut a = *self.actions.get(stage - 1)?;
        if self.clamp_w {
            let (lo, hi) = state.transship_bounds();
            a.w = a.w.clamp(lo, hi);
        }
        Some(a)
    }
}

/// Result of an exact forward policy evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyEvaluation {
    pub expected_cost: f64,
    /// Probability mass folded onto a clamped lattice boundary, summed per
    /// axis pass over all stages (an upper estimate of the union mass).
    pub boundary_mass: f64,
}

/// Exact expected total cost of following `policy` from `initial`, by
/// forward induction over the truncated demand lattice from stage 1.
pub fn evaluate_policy(
    inst: &Instance,
    policy: &dyn PolicyMap,
    initial: State,
) -> Result<PolicyEvaluation> {
    evaluate_policy_from(inst, policy, initial, 1)
}

/// As [`evaluate_policy`], starting at 1-based `start_stage`.
pub fn evaluate_policy_from(
    inst: &Instance,
    policy: &dyn PolicyMap,
    initial: State,
    start_stage: usize,
) -> Result<PolicyEvaluation> {
    if start_stage == 0 || start_stage > inst.horizon {
        return Err(Error::Domain(format!(
            "start stage {start_stage} outside horizon 1..={}",
            inst.horizon
        )));
    }
    if !inst.contains(initial) {
        return Err(Error::Domain(format!(
            "initial state ({}, {}) outside the lattice",
            initial.i1, initial.i2
        )));
    }
    let [(lo1, hi1), (lo2, hi2)] = inst.state_bounds;
    let s1 = Span { lo: lo1, hi: hi1 };
    let s2 = Span { lo: lo2, hi: hi2 };
    let n2 = s2.len();
    let costs = inst.costs;

    let mut prob = vec![0.0; s1.len() * n2];
    prob[s1.idx(initial.i1) * n2 + s2.idx(initial.i2)] = 1.0;
    let mut total_cost = 0.0;
    let mut boundary = 0.0;

    for t in start_stage..=inst.horizon {
        let d1 = inst.demand[0].discretize(t, inst.truncation_eps)?;
        let d2 = inst.demand[1].discretize(t, inst.truncation_eps)?;

        // Scatter onto post-decision positions, charging decision costs and
        // the expected holding/penalty of the period.
        let mut moves: Vec<(i64, i64, f64)> = Vec::new();
        let mut y1_span = Span { lo: i64::MAX, hi: i64::MIN };
        let mut y2_span = Span { lo: i64::MAX, hi: i64::MIN };
        for (idx, &p) in prob.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let state = State::new(s1.lo + (idx / n2) as i64, s2.lo + (idx % n2) as i64);
            let a = policy.action(t, state).ok_or(Error::UnreachableState {
                stage: t,
                i1: state.i1,
                i2: state.i2,
            })?;
            if a.q1 < 0 || a.q2 < 0 {
                return Err(Error::Domain("negative order quantity in policy".into()));
            }
            let y1 = state.i1 - a.w + a.q1;
            let y2 = state.i2 + a.w + a.q2;
            y1_span.lo = y1_span.lo.min(y1);
            y1_span.hi = y1_span.hi.max(y1);
            y2_span.lo = y2_span.lo.min(y2);
            y2_span.hi = y2_span.hi.max(y2);
            total_cost += p
                * (costs.transship(a.w.abs())
                    + costs.order(a.q1)
                    + costs.order(a.q2)
                    + holding_penalty(&d1, y1, costs.h, costs.b)
                    + holding_penalty(&d2, y2, costs.h, costs.b));
            moves.push((y1, y2, p));
        }
        if moves.is_empty() {
            break;
        }
        let ny2 = y2_span.len();
        let mut post = vec![0.0; y1_span.len() * ny2];
        for &(y1, y2, p) in &moves {
            post[y1_span.idx(y1) * ny2 + y2_span.idx(y2)] += p;
        }

        // Axis-1 demand convolution with clamping.
        let mut partial = vec![0.0; s1.len() * ny2];
        for (pidx, &p) in post.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let y1 = y1_span.lo + (pidx / ny2) as i64;
            let col = pidx % ny2;
            for (d, pd) in d1.iter() {
                let nxt = y1 - d;
                let clamped = s1.clamp(nxt);
                if clamped != nxt {
                    boundary += p * pd;
                }
                partial[s1.idx(clamped) * ny2 + col] += p * pd;
            }
        }
        // Axis-2 demand convolution with clamping.
        let mut next = vec![0.0; s1.len() * n2];
        for (pidx, &p) in partial.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let r = pidx / ny2;
            let y2 = y2_span.lo + (pidx % ny2) as i64;
            for (d, pd) in d2.iter() {
                let nxt = y2 - d;
                let clamped = s2.clamp(nxt);
                if clamped != nxt {
                    boundary += p * pd;
                }
                next[r * n2 + s2.idx(clamped)] += p * pd;
            }
        }
        prob = next;
    }
    Ok(PolicyEvaluation {
        expected_cost: total_cost,
        boundary_mass: boundary,
    })
}

/// Diagnostic report on lattice tightness along optimal trajectories.
#[derive(Clone, Debug)]
pub struct BoundsReport {
    pub max_boundary_mass: f64,
    pub ok: bool,
}

/// Follows the table's own optimal policy from each designated initial state
/// and reports the worst boundary-clamp probability. A mass above
/// [`BOUNDARY_MASS_TOL`] means the lattice is too tight for those starts.
pub fn bounds_diagnostic(
    inst: &Instance,
    table: &ValueTable,
    initials: &[State],
) -> Result<BoundsReport> {
    let mut worst: f64 = 0.0;
    for &s in initials {
        let eval = evaluate_policy(inst, table, s)?;
        worst = worst.max(eval.boundary_mass);
    }
    Ok(BoundsReport {
        max_boundary_mass: worst,
        ok: worst <= BOUNDARY_MASS_TOL,
    })
}

/// Expected cost over the remaining horizon when no action is taken in the
/// leading period `t` and the table's policy is followed afterwards. Purely
/// diagnostic; no solver path consumes it.
pub fn no_action_cost(
    inst: &Instance,
    table: &ValueTable,
    t: usize,
    state: State,
) -> Result<f64> {
    struct NoOpAt<'a> {
        stage: usize,
        inner: &'a ValueTable,
    }
    impl PolicyMap for NoOpAt<'_> {
        fn action(&self, stage: usize, state: State) -> Option<Action> {
            if stage == self.stage {
                Some(Action::default())
            } else {
                self.inner.best_action(stage, state)
            }
        }
    }
    let policy = NoOpAt { stage: t, inner: table };
    Ok(evaluate_policy_from(inst, &policy, state, t)?.expected_cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::DemandSpec;
    use crate::instance::Costs;
    use approx::assert_abs_diff_eq;

    fn basic_costs() -> Costs {
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
    fn immediate_cost_two_outcome_hand_check() {
        let d1 = DiscreteDist::from_pmf(1, vec![0.5, 0.0, 0.5]).unwrap();
        let d2 = DiscreteDist::point_mass(0);
        let cost = holding_penalty(&d1, 2, 1.0, 5.0) + holding_penalty(&d2, 0, 1.0, 5.0);
        assert_abs_diff_eq!(cost, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn immediate_cost_is_separable_for_identical_locations() {
        let spec = DemandSpec::poisson(vec![2.0]).unwrap();
        let inst = Instance::new(1, basic_costs(), [spec.clone(), spec]).unwrap();
        let joint = immediate_cost(&inst, 1, 3, 3).unwrap();
        let single = {
            let d = inst.demand[0].discretize(1, inst.truncation_eps).unwrap();
            holding_penalty(&d, 3, 1.0, 3.0)
        };
        assert_abs_diff_eq!(joint, 2.0 * single, epsilon = 1e-12);
    }

    #[test]
    fn free_ordering_covers_point_demand_exactly() {
        let d1 = DemandSpec::normal(vec![3.0], 0.01).unwrap();
        let d2 = DemandSpec::normal(vec![2.0], 0.01).unwrap();
        let costs = Costs {
            k: 0.0,
            z: 0.0,
            r: 0.0,
            v: 0.0,
            h: 1.0,
            b: 5.0,
        };
        let inst = Instance::with_options(
            1,
            costs,
            [d1, d2],
            Some([(-8, 8), (-8, 8)]),
            Some(8),
            1e-9,
        )
        .unwrap();
        let table = solve_sdp1(&inst).unwrap();
        let a = table.best_action(1, State::new(0, 0)).unwrap();
        assert_eq!((a.w, a.q1, a.q2), (0, 3, 2));
        assert!(table.cost(1, State::new(0, 0)).unwrap() < 1e-6);
    }

    #[test]
    fn prohibitive_ordering_forces_transshipment() {
        // T=1, start (5,-2): shipping two units heals the back-order; the
        // demand is a near-point mass at zero.
        let spec = DemandSpec::normal(vec![1e-6], 0.5).unwrap();
        let costs = Costs {
            k: 100.0,
            z: 0.0,
            r: 1.0,
            v: 0.1,
            h: 1.0,
            b: 5.0,
        };
        let inst = Instance::with_options(
            1,
            costs,
            [spec.clone(), spec],
            Some([(-8, 8), (-8, 8)]),
            Some(0),
            1e-3,
        )
        .unwrap();
        let d = inst.demand[0].discretize(1, inst.truncation_eps).unwrap();
        assert_eq!((d.support_min, d.support_max()), (0, 0));
        let table = solve_sdp1(&inst).unwrap();
        let a = table.best_action(1, State::new(5, -2)).unwrap();
        assert_eq!(a.w, 2);
        assert_abs_diff_eq!(
            table.cost(1, State::new(5, -2)).unwrap(),
            1.0 + 0.2 + 3.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn transshipment_priced_out_gives_zero_w_everywhere() {
        let spec = DemandSpec::poisson(vec![1.0, 1.0]).unwrap();
        let mut costs = basic_costs();
        costs.r = 1e6;
        let inst = Instance::with_options(
            2,
            costs,
            [spec.clone(), spec],
            Some([(-6, 10), (-6, 10)]),
            Some(6),
            1e-4,
        )
        .unwrap();
        let table = solve_sdp2(&inst).unwrap();
        for (_, _, _, a) in table.iter() {
            assert_eq!(a.w, 0);
        }
    }

    #[test]
    fn sdp1_and_sdp2_agree_for_single_period() {
        let d1 = DemandSpec::poisson(vec![1.5]).unwrap();
        let d2 = DemandSpec::poisson(vec![0.8]).unwrap();
        let inst = Instance::with_options(
            1,
            basic_costs(),
            [d1, d2],
            Some([(-5, 9), (-5, 9)]),
            Some(5),
            1e-5,
        )
        .unwrap();
        let t1 = solve_sdp1(&inst).unwrap();
        let t2 = solve_sdp2(&inst).unwrap();
        for (t, s, c, _) in t1.iter() {
            assert_abs_diff_eq!(c, t2.cost(t, s).unwrap(), epsilon = 1e-9);
        }
    }

    #[test]
    fn best_actions_respect_transship_feasibility() {
        let spec = DemandSpec::poisson(vec![1.0, 2.0]).unwrap();
        let inst = Instance::with_options(
            2,
            basic_costs(),
            [spec.clone(), spec],
            Some([(-7, 12), (-7, 12)]),
            Some(7),
            1e-4,
        )
        .unwrap();
        for table in [solve_sdp1(&inst).unwrap(), solve_sdp2(&inst).unwrap()] {
            for (_, s, _, a) in table.iter() {
                let (lo, hi) = s.transship_bounds();
                assert!(a.w >= lo && a.w <= hi, "W {} outside [{lo},{hi}]", a.w);
                assert!(a.q1 >= 0 && a.q1 <= inst.q_max);
                assert!(a.q2 >= 0 && a.q2 <= inst.q_max);
            }
        }
    }

    #[test]
    fn policy_evaluation_matches_table_cost() {
        let d1 = DemandSpec::poisson(vec![1.0, 1.4]).unwrap();
        let d2 = DemandSpec::poisson(vec![0.7, 1.1]).unwrap();
        let inst = Instance::with_options(
            2,
            basic_costs(),
            [d1, d2],
            Some([(-10, 14), (-10, 14)]),
            Some(8),
            1e-6,
        )
        .unwrap();
        let table = solve_sdp1(&inst).unwrap();
        for s in [State::new(0, 0), State::new(3, -2), State::new(-1, 4)] {
            let eval = evaluate_policy(&inst, &table, s).unwrap();
            assert_abs_diff_eq!(
                eval.expected_cost,
                table.cost(1, s).unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn zero_action_policy_pays_penalty_on_all_demand() {
        let spec = DemandSpec::poisson(vec![1.0]).unwrap();
        let costs = Costs {
            k: 10.0,
            z: 1.0,
            r: 5.0,
            v: 1.0,
            h: 1.0,
            b: 5.0,
        };
        let inst = Instance::with_options(
            1,
            costs,
            [spec.clone(), spec],
            Some([(-12, 12), (-12, 12)]),
            Some(6),
            1e-10,
        )
        .unwrap();
        let policy = OpenLoopPolicy {
            actions: vec![Action::default()],
            clamp_w: false,
        };
        let eval = evaluate_policy(&inst, &policy, State::new(0, 0)).unwrap();
        assert_abs_diff_eq!(eval.expected_cost, 10.0, epsilon = 1e-4);
    }

    #[test]
    fn sdp2_policy_cost_dominates_sdp1_value() {
        let d1 = DemandSpec::poisson(vec![1.2, 0.9]).unwrap();
        let d2 = DemandSpec::poisson(vec![0.6, 1.3]).unwrap();
        let inst = Instance::with_options(
            2,
            basic_costs(),
            [d1, d2],
            Some([(-9, 13), (-9, 13)]),
            Some(7),
            1e-5,
        )
        .unwrap();
        let t1 = solve_sdp1(&inst).unwrap();
        let t2 = solve_sdp2(&inst).unwrap();
        for s in [State::new(0, 0), State::new(4, -3), State::new(-2, 2)] {
            let c1 = t1.cost(1, s).unwrap();
            let realized = evaluate_policy(&inst, &t2, s).unwrap().expected_cost;
            assert!(realized >= c1 - 1e-9);
        }
    }

    #[test]
    fn raising_penalty_never_lowers_cost() {
        let spec = DemandSpec::poisson(vec![1.0, 1.0]).unwrap();
        let mut lo = basic_costs();
        lo.b = 2.0;
        let mut hi = basic_costs();
        hi.b = 6.0;
        let mk = |c| {
            Instance::with_options(
                2,
                c,
                [spec.clone(), spec.clone()],
                Some([(-6, 10), (-6, 10)]),
                Some(6),
                1e-4,
            )
            .unwrap()
        };
        let t_lo = solve_sdp1(&mk(lo)).unwrap();
        let t_hi = solve_sdp1(&mk(hi)).unwrap();
        for (t, s, c, _) in t_lo.iter() {
            assert!(t_hi.cost(t, s).unwrap() >= c - 1e-9);
        }
    }

    #[test]
    fn boundary_diagnostic_flags_tight_lattice() {
        let spec = DemandSpec::poisson(vec![3.0, 3.0]).unwrap();
        let inst = Instance::with_options(
            2,
            basic_costs(),
            [spec.clone(), spec.clone()],
            Some([(-2, 4), (-2, 4)]),
            Some(4),
            1e-6,
        )
        .unwrap();
        let table = solve_sdp1(&inst).unwrap();
        let report = bounds_diagnostic(&inst, &table, &[State::new(0, 0)]).unwrap();
        assert!(!report.ok, "a -2..4 lattice cannot hold Poisson(3) demand");

        let wide = Instance::new(2, basic_costs(), [spec.clone(), spec]).unwrap();
        let table = solve_sdp1(&wide).unwrap();
        let report = bounds_diagnostic(&wide, &table, &[State::new(0, 0)]).unwrap();
        assert!(report.ok);
    }

    #[test]
    fn no_action_cost_is_an_upper_bound_on_value() {
        let spec = DemandSpec::poisson(vec![1.0, 1.0]).unwrap();
        let inst = Instance::with_options(
            2,
            basic_costs(),
            [spec.clone(), spec],
            Some([(-8, 10), (-8, 10)]),
            Some(6),
            1e-5,
        )
        .unwrap();
        let table = solve_sdp1(&inst).unwrap();
        for s in [State::new(0, 0), State::new(2, 2)] {
            let g = no_action_cost(&inst, &table, 1, s).unwrap();
            assert!(g >= table.cost(1, s).unwrap() - 1e-9);
        }
    }
}
