//! Best-first branch-and-bound over the dense simplex, with a presolve that
//! pivots free variables out through equality rows (the static model's
//! balance and cumulative-inventory definitions) so every relaxation is a
//! pure `A x <= b, x >= 0` system.

use super::model::{MilpModel, MilpSolution, Sense};
use super::simplex::{solve_dense_lp, DenseLp, LpOutcome};
use super::warm::{DualEnd, WarmTableau};
use crate::{Error, Result};
use std::collections::BinaryHeap;

/// Pluggable solver interface for [`MilpModel`]s.
pub trait MilpBackend: Sync {
    fn solve(&self, model: &MilpModel) -> Result<MilpSolution> {
        self.solve_hinted(model, None)
    }

    /// `hint`, when given, proposes one value per binary (in model binary
    /// order) used to seed the incumbent.
    fn solve_hinted(&self, model: &MilpModel, hint: Option<&[u8]>) -> Result<MilpSolution>;
}

/// The built-in exact backend.
#[derive(Clone, Debug)]
pub struct BranchBound {
    /// Relative gap at which optimality is declared proven.
    pub rel_gap: f64,
    /// Node budget before giving up.
    pub max_nodes: usize,
    /// Integrality tolerance on binaries.
    pub int_tol: f64,
}

impl Default for BranchBound {
    fn default() -> Self {
        BranchBound {
            rel_gap: 1e-6,
            max_nodes: 200_000,
            int_tol: 1e-6,
        }
    }
}

/// One eliminated variable: `value = constant + sum coeff * x[idx]`, indices
/// referring to the variable set at elimination time.
struct Eliminated {
    var: usize,
    constant: f64,
    terms: Vec<(usize, f64)>,
}

/// Model reduced to nonnegative variables and inequality rows.
struct Reduced {
    /// Kept original variable indices, in order; columns of the core LP.
    keep: Vec<usize>,
    eliminated: Vec<Eliminated>,
    obj: Vec<f64>,
    obj_const: f64,
    /// Rows in `<=` form over kept columns.
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    /// Lazy rows in `<=` form; activated only when violated.
    lazy_rows: Vec<(Vec<(usize, f64)>, f64)>,
    /// Finite upper bounds per kept column (binaries carry 1).
    upper: Vec<Option<f64>>,
    /// Positions (in `keep`) of the binary columns, branch order.
    binaries: Vec<usize>,
    /// Branching priority class per binary (parallel to `binaries`).
    bin_priority: Vec<i32>,
}

fn presolve(model: &MilpModel) -> Result<Reduced> {
    let n = model.vars.len();
    // Working sparse rows over original indices.
    let mut rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = model
        .cons
        .iter()
        .map(|c| {
            let mut terms = c.terms.clone();
            terms.sort_by_key(|&(i, _)| i);
            // merge duplicates
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
            for (i, a) in terms {
                match merged.last_mut() {
                    Some((j, acc)) if *j == i => *acc += a,
                    _ => merged.push((i, a)),
                }
            }
            (merged, c.sense, c.rhs)
        })
        .collect();
    let mut obj: Vec<f64> = model.vars.iter().map(|v| v.obj).collect();
    let mut obj_const = 0.0;
    let mut alive = vec![true; n];
    let mut row_alive = vec![true; rows.len()];
    let mut eliminated: Vec<Eliminated> = Vec::new();

    let is_free = |v: &super::model::Variable| {
        !v.binary && v.lb == f64::NEG_INFINITY && v.ub == f64::INFINITY
    };

    loop {
        // Find an equality row holding a free variable with a solid pivot.
        let mut pick: Option<(usize, usize, f64)> = None;
        'outer: for (ri, (terms, sense, _)) in rows.iter().enumerate() {
            if !row_alive[ri] || *sense != Sense::Eq {
                continue;
            }
            for &(vi, a) in terms {
                if alive[vi] && is_free(&model.vars[vi]) && a.abs() > 1e-6 {
                    pick = Some((ri, vi, a));
                    break 'outer;
                }
            }
        }
        let Some((ri, vi, a)) = pick else { break };
        // v = (rhs - sum_{u != v} a_u x_u) / a
        let (terms, _, rhs) = rows[ri].clone();
        let constant = rhs / a;
        let sub: Vec<(usize, f64)> = terms
            .iter()
            .filter(|&&(u, _)| u != vi)
            .map(|&(u, c)| (u, -c / a))
            .collect();
        row_alive[ri] = false;
        alive[vi] = false;
        // Substitute into every live row.
        for (rj, live) in row_alive.iter().enumerate() {
            if !live {
                continue;
            }
            let (rt, _, rr) = &mut rows[rj];
            if let Some(pos) = rt.iter().position(|&(u, _)| u == vi) {
                let factor = rt[pos].1;
                rt.remove(pos);
                *rr -= factor * constant;
                for &(u, c) in &sub {
                    match rt.iter_mut().find(|(x, _)| *x == u) {
                        Some((_, acc)) => *acc += factor * c,
                        None => rt.push((u, factor * c)),
                    }
                }
                rt.retain(|&(_, c)| c != 0.0);
            }
        }
        // Substitute into the objective.
        let factor = obj[vi];
        if factor != 0.0 {
            obj[vi] = 0.0;
            obj_const += factor * constant;
            for &(u, c) in &sub {
                obj[u] += factor * c;
            }
        }
        eliminated.push(Eliminated {
            var: vi,
            constant,
            terms: sub,
        });
    }

    // Any remaining free variable would need a sign split; the lot-sizing
    // models never leave one behind, so reject loudly instead.
    if let Some((vi, _)) = model
        .vars
        .iter()
        .enumerate()
        .find(|&(vi, v)| alive[vi] && is_free(v))
    {
        return Err(Error::Domain(format!(
            "free variable `{}` not eliminable through any equality",
            model.vars[vi].name
        )));
    }
    if let Some((vi, _)) = model
        .vars
        .iter()
        .enumerate()
        .find(|&(vi, v)| alive[vi] && (v.lb != 0.0 || !v.lb.is_finite()))
    {
        return Err(Error::Domain(format!(
            "variable `{}` has lower bound {} (only 0 or free supported)",
            model.vars[vi].name, model.vars[vi].lb
        )));
    }

    let keep: Vec<usize> = (0..n).filter(|&i| alive[i]).collect();
    let col_of: Vec<Option<usize>> = {
        let mut m = vec![None; n];
        for (c, &i) in keep.iter().enumerate() {
            m[i] = Some(c);
        }
        m
    };
    let mut out_rows = Vec::new();
    let mut lazy_rows = Vec::new();
    for (ri, live) in row_alive.iter().enumerate() {
        if !live {
            continue;
        }
        let (terms, sense, rhs) = &rows[ri];
        // Equalities never go lazy; a lazy pair could mask each other.
        let lazy = model.cons[ri].lazy && *sense != Sense::Eq;
        let sink = |store: &mut Vec<(Vec<(usize, f64)>, f64)>| match sense {
            Sense::Le => store.push((
                terms
                    .iter()
                    .map(|&(u, c)| (col_of[u].expect("eliminated var left in row"), c))
                    .collect(),
                *rhs,
            )),
            Sense::Ge => store.push((
                terms
                    .iter()
                    .map(|&(u, c)| (col_of[u].expect("eliminated var left in row"), -c))
                    .collect(),
                -rhs,
            )),
            Sense::Eq => {
                let mapped: Vec<(usize, f64)> = terms
                    .iter()
                    .map(|&(u, c)| (col_of[u].expect("eliminated var left in row"), c))
                    .collect();
                store.push((mapped.clone(), *rhs));
                store.push((mapped.iter().map(|&(u, c)| (u, -c)).collect(), -rhs));
            }
        };
        if lazy {
            sink(&mut lazy_rows);
        } else {
            sink(&mut out_rows);
        }
    }
    let upper: Vec<Option<f64>> = keep
        .iter()
        .map(|&i| {
            let v = &model.vars[i];
            v.ub.is_finite().then_some(v.ub)
        })
        .collect();
    // Branch order: priority class first, then creation order.
    let mut bin_order: Vec<usize> = model.binaries();
    bin_order.sort_by_key(|&i| (model.vars[i].priority, i));
    let bin_priority: Vec<i32> = bin_order.iter().map(|&i| model.vars[i].priority).collect();
    let binaries: Vec<usize> = bin_order
        .into_iter()
        .map(|i| col_of[i].expect("binary eliminated"))
        .collect();
    Ok(Reduced {
        obj: keep.iter().map(|&i| obj[i]).collect(),
        keep,
        eliminated,
        obj_const,
        rows: out_rows,
        lazy_rows,
        upper,
        binaries,
        bin_priority,
    })
}

impl Reduced {
    /// Builds the dense relaxation with per-binary bounds `[lo, hi]` and the
    /// given active subset of lazy rows.
    fn relaxation(&self, bin_bounds: &[(f64, f64)], active_lazy: &[usize]) -> DenseLp {
        let n = self.obj.len();
        let mut rows: Vec<(Vec<f64>, f64)> =
            Vec::with_capacity(self.rows.len() + active_lazy.len() + n);
        for (terms, rhs) in self
            .rows
            .iter()
            .chain(active_lazy.iter().map(|&i| &self.lazy_rows[i]))
        {
            let mut dense = vec![0.0; n];
            for &(c, a) in terms {
                dense[c] += a;
            }
            rows.push((dense, *rhs));
        }
        for (c, ub) in self.upper.iter().enumerate() {
            let bin_pos = self.binaries.iter().position(|&b| b == c);
            let ub = match bin_pos {
                Some(k) => Some(bin_bounds[k].1),
                None => *ub,
            };
            if let Some(u) = ub {
                let mut dense = vec![0.0; n];
                dense[c] = 1.0;
                rows.push((dense, u));
            }
            if let Some(k) = bin_pos {
                let lo = bin_bounds[k].0;
                if lo > 0.0 {
                    let mut dense = vec![0.0; n];
                    dense[c] = -1.0;
                    rows.push((dense, -lo));
                }
            }
        }
        DenseLp {
            obj: self.obj.clone(),
            rows,
        }
    }

    /// Checks a candidate point against every row (eager, lazy and bounds).
    fn point_feasible(&self, x: &[f64]) -> bool {
        let check = |rows: &[(Vec<(usize, f64)>, f64)]| {
            rows.iter().all(|(terms, rhs)| {
                terms.iter().map(|&(c, a)| a * x[c]).sum::<f64>() <= rhs + 1e-7
            })
        };
        check(&self.rows)
            && check(&self.lazy_rows)
            && x.iter().all(|&v| v >= -1e-9)
            && self
                .upper
                .iter()
                .enumerate()
                .all(|(c, ub)| ub.map_or(true, |u| x[c] <= u + 1e-9))
    }

    /// Reconstructs the full model-variable vector from core columns.
    fn reconstruct(&self, model: &MilpModel, x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; model.vars.len()];
        for (c, &i) in self.keep.iter().enumerate() {
            full[i] = x[c];
        }
        for e in self.eliminated.iter().rev() {
            let mut v = e.constant;
            for &(u, coeff) in &e.terms {
                v += coeff * full[u];
            }
            full[e.var] = v;
        }
        full
    }
}

/// Solves the relaxation under `bin_bounds`, generating violated lazy rows
/// until none remain. The active set only grows; rows added for one node
/// stay active for the rest of the search (they are valid globally).
fn solve_with_lazy(
    red: &Reduced,
    bin_bounds: &[(f64, f64)],
    active: &mut Vec<usize>,
    member: &mut [bool],
) -> LpOutcome {
    loop {
        match solve_dense_lp(&red.relaxation(bin_bounds, active)) {
            LpOutcome::Optimal { x, objective } => {
                let mut violated: Vec<(f64, usize)> = red
                    .lazy_rows
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| !member[i])
                    .filter_map(|(i, (terms, rhs))| {
                        let lhs: f64 = terms.iter().map(|&(c, a)| a * x[c]).sum();
                        (lhs > rhs + 1e-9).then_some((lhs - rhs, i))
                    })
                    .collect();
                if violated.is_empty() {
                    return LpOutcome::Optimal { x, objective };
                }
                violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, i) in violated.iter().take(32) {
                    member[i] = true;
                    active.push(i);
                }
            }
            LpOutcome::Unbounded if active.len() < red.lazy_rows.len() => {
                for i in 0..red.lazy_rows.len() {
                    if !member[i] {
                        member[i] = true;
                        active.push(i);
                    }
                }
            }
            other => return other,
        }
    }
}

/// Heap node ordered by (bound, creation order), smallest bound first.
struct Node {
    bound: f64,
    seq: usize,
    bin_bounds: Vec<(f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // BinaryHeap is a max-heap: reverse for best-bound-first, then by
        // creation order.
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl MilpBackend for BranchBound {
    fn solve_hinted(&self, model: &MilpModel, hint: Option<&[u8]>) -> Result<MilpSolution> {
        let red = presolve(model)?;
        // The warm depth-first engine needs the all-slack basis to be dual
        // feasible; models with negative objective coefficients take the
        // scratch best-first path instead.
        if red.obj.iter().all(|&c| c >= 0.0) {
            return self.solve_warm_dfs(model, &red, hint);
        }
        self.solve_best_first(model, &red, hint)
    }
}

impl BranchBound {
    fn solve_best_first(
        &self,
        model: &MilpModel,
        red: &Reduced,
        hint: Option<&[u8]>,
    ) -> Result<MilpSolution> {
        let red = &red;
        let nb = red.binaries.len();
        let free_bounds = vec![(0.0, 1.0); nb];

        let mut incumbent: Option<(f64, Vec<f64>)> = None;
        let mut nodes_used = 0usize;
        let mut active: Vec<usize> = Vec::new();
        let mut member = vec![false; red.lazy_rows.len()];

        let try_fixing = |bounds: &[(f64, f64)],
                              incumbent: &mut Option<(f64, Vec<f64>)>,
                              active: &mut Vec<usize>,
                              member: &mut [bool]|
         -> Option<f64> {
            match solve_with_lazy(&red, bounds, active, member) {
                LpOutcome::Optimal { x, objective } => {
                    let integral = red
                        .binaries
                        .iter()
                        .all(|&c| (x[c] - x[c].round()).abs() <= self.int_tol);
                    if integral
                        && incumbent
                            .as_ref()
                            .map_or(true, |(best, _)| objective < *best)
                    {
                        *incumbent = Some((objective, x));
                    }
                    Some(objective)
                }
                _ => None,
            }
        };

        // Seed the incumbent from the caller's hint, if any.
        if let Some(h) = hint {
            if h.len() == nb {
                let bounds: Vec<(f64, f64)> = h
                    .iter()
                    .map(|&v| if v > 0 { (1.0, 1.0) } else { (0.0, 0.0) })
                    .collect();
                try_fixing(&bounds, &mut incumbent, &mut active, &mut member);
            }
        }

        let mut heap: BinaryHeap<Node> = BinaryHeap::new();
        let mut seq = 0usize;

        // Root relaxation.
        match solve_with_lazy(&red, &free_bounds, &mut active, &mut member) {
            LpOutcome::Optimal { x, objective } => {
                // Rounding repair: fix every binary to its rounded value and
                // re-solve once; a cheap strong incumbent for best-first.
                if nb > 0 {
                    let bounds: Vec<(f64, f64)> = red
                        .binaries
                        .iter()
                        .map(|&c| {
                            if x[c] > 0.5 {
                                (1.0, 1.0)
                            } else {
                                (0.0, 0.0)
                            }
                        })
                        .collect();
                    try_fixing(&bounds, &mut incumbent, &mut active, &mut member);
                }
                let integral = red
                    .binaries
                    .iter()
                    .all(|&c| (x[c] - x[c].round()).abs() <= self.int_tol);
                if integral {
                    if incumbent
                        .as_ref()
                        .map_or(true, |(best, _)| objective < *best)
                    {
                        incumbent = Some((objective, x));
                    }
                } else {
                    heap.push(Node {
                        bound: objective,
                        seq,
                        bin_bounds: free_bounds.clone(),
                    });
                    seq += 1;
                }
            }
            LpOutcome::Infeasible => {
                return Err(Error::Infeasible("root relaxation infeasible".into()))
            }
            LpOutcome::Unbounded => {
                return Err(Error::Unbounded("root relaxation unbounded".into()))
            }
            LpOutcome::IterLimit => {
                return Err(Error::SolverLimit("root relaxation hit pivot cap".into()))
            }
        }

        let gap_ok = |bound: f64, best: f64| bound >= best - self.rel_gap * best.abs().max(1.0);

        while let Some(node) = heap.pop() {
            if let Some((best, _)) = &incumbent {
                if gap_ok(node.bound, *best) {
                    break; // best-bound proves optimality within the gap
                }
            }
            if nodes_used >= self.max_nodes {
                break;
            }
            nodes_used += 1;

            match solve_with_lazy(&red, &node.bin_bounds, &mut active, &mut member) {
                LpOutcome::Optimal { x, objective } => {
                    if let Some((best, _)) = &incumbent {
                        if gap_ok(objective, *best) {
                            continue;
                        }
                    }
                    let is_frac = |k: usize| {
                        let c = red.binaries[k];
                        node.bin_bounds[k].0 != node.bin_bounds[k].1
                            && (x[c] - x[c].round()).abs() > self.int_tol
                    };
                    let frac: Vec<usize> = (0..nb).filter(|&k| is_frac(k)).collect();
                    if frac.is_empty() {
                        if incumbent
                            .as_ref()
                            .map_or(true, |(best, _)| objective < *best)
                        {
                            incumbent = Some((objective, x));
                        }
                        continue;
                    }
                    let low_class = frac.iter().map(|&k| red.bin_priority[k]).min().unwrap();
                    let base_class = red.bin_priority.iter().copied().min().unwrap_or(0);
                    if low_class > base_class {
                        // Only auxiliary indicators are fractional. Rounding
                        // them all one way is often feasible at the same
                        // objective: verify against every row before use.
                        let mut settled = false;
                        for side in [0.0, 1.0] {
                            let mut cand = x.clone();
                            for &k in &frac {
                                cand[red.binaries[k]] = side;
                            }
                            if red.point_feasible(&cand) {
                                let cand_obj: f64 =
                                    red.obj.iter().zip(&cand).map(|(c, v)| c * v).sum();
                                if incumbent
                                    .as_ref()
                                    .map_or(true, |(best, _)| cand_obj < *best)
                                {
                                    incumbent = Some((cand_obj, cand));
                                }
                                settled = true;
                                break;
                            }
                        }
                        if settled {
                            continue;
                        }
                    }
                    // Rounding repair (throttled): fixing every binary to
                    // its rounded relaxation value gives a cheap feasible
                    // incumbent that sharpens best-bound pruning.
                    if nodes_used % 32 == 1 {
                        let bounds: Vec<(f64, f64)> = red
                            .binaries
                            .iter()
                            .map(|&c| if x[c] > 0.5 { (1.0, 1.0) } else { (0.0, 0.0) })
                            .collect();
                        try_fixing(&bounds, &mut incumbent, &mut active, &mut member);
                        if let Some((best, _)) = &incumbent {
                            if gap_ok(objective, *best) {
                                continue;
                            }
                        }
                    }
                    // Branch on the first fractional binary of the lowest
                    // fractional priority class.
                    let k = *frac
                        .iter()
                        .find(|&&k| red.bin_priority[k] == low_class)
                        .unwrap();
                    for fix in [0.0, 1.0] {
                        let mut child = node.bin_bounds.clone();
                        child[k] = (fix, fix);
                        heap.push(Node {
                            bound: objective,
                            seq,
                            bin_bounds: child,
                        });
                        seq += 1;
                    }
                }
                LpOutcome::Infeasible => {}
                LpOutcome::Unbounded => {
                    return Err(Error::Unbounded("node relaxation unbounded".into()))
                }
                LpOutcome::IterLimit => {
                    return Err(Error::SolverLimit("node relaxation hit pivot cap".into()))
                }
            }
        }

        let proven = match heap.peek() {
            None => true,
            Some(n) => incumbent
                .as_ref()
                .is_some_and(|(best, _)| gap_ok(n.bound, *best)),
        };
        match incumbent {
            Some((objective, x)) => Ok(MilpSolution {
                objective: objective + red.obj_const,
                values: red.reconstruct(model, &x),
                proven_optimal: proven,
                nodes: nodes_used,
            }),
            None => Err(Error::Infeasible(
                "no integer-feasible point found".into(),
            )),
        }
    }

    fn solve_warm_dfs(
        &self,
        model: &MilpModel,
        red: &Reduced,
        hint: Option<&[u8]>,
    ) -> Result<MilpSolution> {
        let nb = red.binaries.len();
        // Discover the binding lazy rows once at the root with the scratch
        // path; the master tableau then carries only those, plus a block of
        // inert spare slots for rows that surface deeper in the tree.
        let mut active: Vec<usize> = Vec::new();
        let mut member = vec![false; red.lazy_rows.len()];
        match solve_with_lazy(red, &vec![(0.0, 1.0); nb], &mut active, &mut member) {
            LpOutcome::Optimal { .. } => {}
            LpOutcome::Infeasible => {
                return Err(Error::Infeasible("root relaxation infeasible".into()))
            }
            LpOutcome::Unbounded => {
                return Err(Error::Unbounded("root relaxation unbounded".into()))
            }
            LpOutcome::IterLimit => {
                return Err(Error::SolverLimit("root relaxation hit pivot cap".into()))
            }
        }

        const SPARE_SLOTS: usize = 64;
        let n = red.obj.len();
        let mut rows: Vec<(Vec<(usize, f64)>, f64)> = red.rows.clone();
        rows.extend(active.iter().map(|&i| red.lazy_rows[i].clone()));
        for (c, ub) in red.upper.iter().enumerate() {
            if red.binaries.contains(&c) {
                continue;
            }
            if let Some(u) = ub {
                rows.push((vec![(c, 1.0)], *u));
            }
        }
        let mut ub_row = vec![0usize; nb];
        let mut lo_row = vec![0usize; nb];
        for (k, &c) in red.binaries.iter().enumerate() {
            ub_row[k] = rows.len();
            rows.push((vec![(c, 1.0)], 1.0));
            lo_row[k] = rows.len();
            rows.push((vec![(c, -1.0)], 0.0));
        }
        for _ in 0..SPARE_SLOTS {
            rows.push((Vec::new(), 0.0));
        }
        let mut master = WarmTableau::new(&red.obj, &rows);
        master.set_spare_block(SPARE_SLOTS);
        match master.dual_reoptimize(4000 + 40 * (n + rows.len())) {
            DualEnd::Optimal => {}
            DualEnd::Infeasible => {
                return Err(Error::Infeasible("root relaxation infeasible".into()))
            }
            DualEnd::IterLimit => {
                return Err(Error::SolverLimit("root relaxation hit pivot cap".into()))
            }
        }

        let mut ctx = DfsCtx {
            bb: self,
            red,
            ub_row: &ub_row,
            lo_row: &lo_row,
            incumbent: None,
            nodes: 0,
            aborted: false,
        };
        let _ = member;
        // Seed the incumbent from the hint, then from a rounding repair of
        // the root relaxation.
        if let Some(h) = hint {
            if h.len() == nb {
                let fixes: Vec<f64> = h.iter().map(|&v| if v > 0 { 1.0 } else { 0.0 }).collect();
                ctx.try_full_fixing(&master, &fixes);
            }
        }
        let root_x = master.extract();
        let fixes: Vec<f64> = red
            .binaries
            .iter()
            .map(|&c| if root_x[c] > 0.5 { 1.0 } else { 0.0 })
            .collect();
        ctx.try_full_fixing(&master, &fixes);

        let mut fixed = vec![-1i8; nb];
        let root_obj = master.objective_of(&red.obj);
        ctx.visit(master, root_obj, &mut fixed)?;

        let proven = !ctx.aborted;
        let nodes = ctx.nodes;
        match ctx.incumbent {
            Some((objective, x)) => Ok(MilpSolution {
                objective: objective + red.obj_const,
                values: red.reconstruct(model, &x),
                proven_optimal: proven,
                nodes,
            }),
            None => Err(Error::Infeasible("no integer-feasible point found".into())),
        }
    }
}

struct DfsCtx<'a> {
    bb: &'a BranchBound,
    red: &'a Reduced,
    ub_row: &'a [usize],
    lo_row: &'a [usize],
    incumbent: Option<(f64, Vec<f64>)>,
    nodes: usize,
    aborted: bool,
}

impl DfsCtx<'_> {
    fn gap_ok(&self, bound: f64, best: f64) -> bool {
        bound >= best - self.bb.rel_gap * best.abs().max(1.0)
    }

    fn offer(&mut self, objective: f64, x: Vec<f64>) {
        if self
            .incumbent
            .as_ref()
            .is_none_or(|(best, _)| objective < *best)
        {
            self.incumbent = Some((objective, x));
        }
    }

    /// Fixes every binary on a clone of `base` and re-optimizes; a feasible
    /// integral result seeds or improves the incumbent.
    fn try_full_fixing(&mut self, base: &WarmTableau, fixes: &[f64]) {
        let mut t = base.clone();
        for (k, &side) in fixes.iter().enumerate() {
            if side > 0.5 {
                t.rhs_shift(self.lo_row[k], -1.0);
            } else {
                t.rhs_shift(self.ub_row[k], -1.0);
            }
        }
        if let DualEnd::Optimal = t.dual_reoptimize(2000 + 20 * (t.n + t.m)) {
            let x = t.extract();
            if self.red.point_feasible(&x) {
                let obj = t.objective_of(&self.red.obj);
                self.offer(obj, x);
            }
        }
    }

    /// Re-optimizes a tableau, activating violated lazy rows, until it is
    /// clean; returns its objective (None when infeasible).
    fn optimize(&mut self, t: &mut WarmTableau) -> Result<Option<f64>> {
        loop {
            match t.dual_reoptimize(2000 + 20 * (t.n + t.m)) {
                DualEnd::Optimal => {}
                DualEnd::Infeasible => return Ok(None),
                DualEnd::IterLimit => {
                    return Err(Error::SolverLimit("node relaxation hit pivot cap".into()))
                }
            }
            let x = t.extract();
            // A lazy row this tableau already carries cannot be violated by
            // its own optimum, so scanning all of them finds the missing ones.
            let violated = self.red.lazy_rows.iter().position(|(terms, rhs)| {
                terms.iter().map(|&(c, a)| a * x[c]).sum::<f64>() > rhs + 1e-7
            });
            match violated {
                Some(i) => {
                    let (terms, rhs) = &self.red.lazy_rows[i];
                    if !t.activate_row(terms, *rhs) {
                        return Err(Error::SolverLimit(
                            "lazy-row spare slots exhausted".into(),
                        ));
                    }
                }
                None => return Ok(Some(t.objective_of(&self.red.obj))),
            }
        }
    }

    /// Visits an optimized node: integrality handling, branching, and
    /// recursion into the children in bound order (better bound first).
    fn visit(&mut self, t: WarmTableau, objective: f64, fixed: &mut Vec<i8>) -> Result<()> {
        if self.aborted {
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.bb.max_nodes {
            self.aborted = true;
            return Ok(());
        }
        if let Some((best, _)) = &self.incumbent {
            if self.gap_ok(objective, *best) {
                return Ok(());
            }
        }
        let x = t.extract();
        let nb = self.red.binaries.len();
        let is_frac = |k: usize| {
            fixed[k] < 0
                && (x[self.red.binaries[k]] - x[self.red.binaries[k]].round()).abs()
                    > self.bb.int_tol
        };
        let frac: Vec<usize> = (0..nb).filter(|&k| is_frac(k)).collect();
        if frac.is_empty() {
            self.offer(objective, x);
            return Ok(());
        }
        let low_class = frac.iter().map(|&k| self.red.bin_priority[k]).min().unwrap();
        let base_class = self.red.bin_priority.iter().copied().min().unwrap_or(0);
        if low_class > base_class {
            // Only auxiliary indicators are fractional: rounding them all one
            // way often stays feasible at the same objective.
            for side in [0.0, 1.0] {
                let mut cand = x.clone();
                for &k in &frac {
                    cand[self.red.binaries[k]] = side;
                }
                if self.red.point_feasible(&cand) {
                    let cand_obj: f64 =
                        self.red.obj.iter().zip(&cand).map(|(c, v)| c * v).sum();
                    self.offer(cand_obj, cand);
                    return Ok(());
                }
            }
        }
        // Rounding repair: every node early on, then periodically.
        if self.nodes <= 64 || self.nodes % 8 == 1 {
            let fixes: Vec<f64> = self
                .red
                .binaries
                .iter()
                .enumerate()
                .map(|(k, &c)| match fixed[k] {
                    0 => 0.0,
                    1 => 1.0,
                    _ => {
                        if x[c] > 0.5 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                })
                .collect();
            self.try_full_fixing(&t, &fixes);
            if let Some((best, _)) = &self.incumbent {
                if self.gap_ok(objective, *best) {
                    return Ok(());
                }
            }
        }
        // Branch on the first fractional binary of the lowest class; solve
        // both children warm and descend into the better bound first.
        let k = *frac
            .iter()
            .find(|&&k| self.red.bin_priority[k] == low_class)
            .unwrap();
        let first: i8 = if x[self.red.binaries[k]] > 0.5 { 1 } else { 0 };
        let mut kids: Vec<(f64, WarmTableau, i8)> = Vec::with_capacity(2);
        let mut parent = Some(t);
        for side in [first, 1 - first] {
            let mut child = if side == 1 - first {
                parent.take().unwrap()
            } else {
                parent.as_ref().unwrap().clone()
            };
            let row = if side == 1 { self.lo_row[k] } else { self.ub_row[k] };
            child.rhs_shift(row, -1.0);
            if let Some(cobj) = self.optimize(&mut child)? {
                kids.push((cobj, child, side));
            }
        }
        kids.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (cobj, child, side) in kids {
            fixed[k] = side;
            let out = self.visit(child, cobj, fixed);
            fixed[k] = -1;
            out?;
            if self.aborted {
                return Ok(());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// min 10 g + x : x >= 3 - 5 g, x >= 0, g binary. g=0 -> 3; g=1 -> 10.
    #[test]
    fn picks_the_cheaper_binary_branch() {
        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, f64::INFINITY, 1.0);
        let g = m.add_binary("g", 10.0);
        m.add_con("cover", vec![(x, 1.0), (g, 5.0)], Sense::Ge, 3.0);
        let sol = BranchBound::default().solve(&m).unwrap();
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-9);
        assert!(sol.proven_optimal);
    }

    #[test]
    fn equality_elimination_recovers_free_variable() {
        // min x : i = x - 4 (i free), i >= -1  ->  x >= 3.
        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, f64::INFINITY, 1.0);
        let i = m.add_var("i", f64::NEG_INFINITY, f64::INFINITY, 0.0);
        m.add_con("def", vec![(i, 1.0), (x, -1.0)], Sense::Eq, -4.0);
        m.add_con("lb", vec![(i, 1.0)], Sense::Ge, -1.0);
        let sol = BranchBound::default().solve(&m).unwrap();
        assert_abs_diff_eq!(sol.objective, 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.values[i], -1.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_model_reports_typed_error() {
        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, f64::INFINITY, 1.0);
        m.add_con("a", vec![(x, 1.0)], Sense::Le, 1.0);
        m.add_con("b", vec![(x, 1.0)], Sense::Ge, 2.0);
        assert!(matches!(
            BranchBound::default().solve(&m),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn enumeration_agrees_with_branch_and_bound() {
        // Three binaries with coupling rows.
        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, f64::INFINITY, 1.0);
        let y = m.add_var("y", 0.0, f64::INFINITY, 2.0);
        let g0 = m.add_binary("g0", 4.0);
        let g1 = m.add_binary("g1", 3.0);
        let g2 = m.add_binary("g2", 2.5);
        m.add_con("c0", vec![(x, 1.0), (g0, 6.0), (g1, 2.0)], Sense::Ge, 5.0);
        m.add_con("c1", vec![(y, 1.0), (g1, 3.0), (g2, 4.0)], Sense::Ge, 4.0);
        m.add_con("cap", vec![(x, 1.0), (y, 1.0)], Sense::Le, 7.0);
        let bb = BranchBound::default().solve(&m).unwrap();
        let brute = enumerate_binaries(&m).unwrap();
        assert_abs_diff_eq!(bb.objective, brute.objective, epsilon = 1e-7);
    }

    #[test]
    fn hint_seeds_incumbent_without_changing_optimum() {
        let mut m = MilpModel::default();
        let x = m.add_var("x", 0.0, f64::INFINITY, 1.0);
        let g = m.add_binary("g", 2.0);
        m.add_con("cover", vec![(x, 1.0), (g, 10.0)], Sense::Ge, 8.0);
        let bb = BranchBound::default();
        let plain = bb.solve(&m).unwrap();
        let hinted = bb.solve_hinted(&m, Some(&[1])).unwrap();
        assert_abs_diff_eq!(plain.objective, hinted.objective, epsilon = 1e-9);
    }
}
