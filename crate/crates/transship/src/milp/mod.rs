//! The static-uncertainty model: all transship and order quantities decided
//! up front from distributional information, holding and back-order levels
//! captured through the piecewise-linear loss bounds, fixed costs through
//! indicator binaries with big-M rows.

mod branch_bound;
mod warm;
mod model;
mod simplex;

pub use branch_bound::{enumerate_binaries, lp_relaxation_bound, BranchBound, MilpBackend};
pub use model::{Constraint, MilpModel, MilpSolution, Sense, Variable};
pub use simplex::{solve_dense_lp, DenseLp, LpOutcome};

use crate::demand::{convolve, Family};
use crate::instance::{Costs, Instance, State};
use crate::loss::{build_partition, loss_exact, piecewise_lower_bounds, LossDist, Partition};
use crate::sdp::OpenLoopPolicy;
use crate::{Action, Error, Result};
use std::io::Write;

/// Per-(period, location) partitions of cumulative demand plus the means the
/// balance rows use.
#[derive(Clone, Debug)]
pub struct Lp1Partitions {
    pub start: usize,
    /// Partition of `d_{start..t}^j` for each local period and location.
    pub parts: Vec<[Partition; 2]>,
    /// Distribution handles the partitions were built on.
    pub cum_dists: Vec<[LossDist; 2]>,
    /// Per-period demand means used by the balance equalities.
    pub per_means: Vec<[f64; 2]>,
}

/// Builds partitions of cumulative demand for periods `start..=T`: analytic
/// Normal for Normal demand, exact truncated convolutions for Poisson.
pub fn default_partitions(
    inst: &Instance,
    start_period: usize,
    n_regions: usize,
) -> Result<Lp1Partitions> {
    if start_period == 0 || start_period > inst.horizon {
        return Err(Error::Domain(format!(
            "start period {start_period} outside horizon 1..={}",
            inst.horizon
        )));
    }
    let mut parts = Vec::new();
    let mut cum_dists = Vec::new();
    let mut per_means = Vec::new();
    let mut poisson_acc: [Option<crate::demand::DiscreteDist>; 2] = [None, None];
    for t in start_period..=inst.horizon {
        let mut row_parts = Vec::with_capacity(2);
        let mut row_dists = Vec::with_capacity(2);
        let mut row_means = [0.0; 2];
        for j in 0..2 {
            let spec = &inst.demand[j];
            let dist = match spec.family {
                Family::Normal => {
                    let mean: f64 = (start_period..=t).map(|k| spec.mean(k)).sum();
                    let var: f64 = (start_period..=t).map(|k| spec.sd(k).powi(2)).sum();
                    row_means[j] = spec.mean(t);
                    LossDist::Normal {
                        mean,
                        sd: var.sqrt(),
                    }
                }
                Family::Poisson => {
                    let step = spec.discretize(t, inst.truncation_eps)?;
                    row_means[j] = step.mean();
                    let acc = match poisson_acc[j].take() {
                        None => step,
                        Some(prev) => convolve(&prev, &step),
                    };
                    poisson_acc[j] = Some(acc.clone());
                    LossDist::Discrete(acc)
                }
            };
            row_parts.push(build_partition(&dist, n_regions)?);
            row_dists.push(dist);
        }
        parts.push([row_parts.remove(0), row_parts.remove(0)]);
        cum_dists.push([row_dists.remove(0), row_dists.remove(0)]);
        per_means.push(row_means);
    }
    Ok(Lp1Partitions {
        start: start_period,
        parts,
        cum_dists,
        per_means,
    })
}

/// Variable indices of one assembled static model.
#[derive(Clone, Debug)]
pub struct StaticVars {
    pub q: Vec<[usize; 2]>,
    pub hbar: Vec<[usize; 2]>,
    pub bbar: Vec<[usize; 2]>,
    pub ibar: Vec<[usize; 2]>,
    pub xbar: Vec<[usize; 2]>,
    pub w_plus: Vec<usize>,
    pub w_minus: Vec<usize>,
    pub delta: Vec<Option<usize>>,
    pub gamma: Vec<[Option<usize>; 2]>,
    pub pi: Vec<[Option<usize>; 2]>,
}

/// The assembled static-uncertainty MILP for horizon `start..=T`.
#[derive(Clone, Debug)]
pub struct StaticModel {
    pub horizon: usize,
    pub start: usize,
    pub opening: State,
    pub model: MilpModel,
    pub vars: StaticVars,
    pub costs: Costs,
    /// Twin without the later-period transshipment-domain machinery (no pi
    /// indicators). Its optimum lower-bounds the full model; when its plan
    /// already respects every W-domain constraint the two optima coincide,
    /// so the solver tries the twin first and falls back on violation.
    relaxed: Box<Option<(MilpModel, StaticVars)>>,
}

impl StaticModel {
    pub fn periods(&self) -> usize {
        self.horizon - self.start + 1
    }

    /// The pi-free twin, when present (diagnostics and tests).
    pub fn relaxed_parts(&self) -> Option<(&MilpModel, &StaticVars)> {
        self.relaxed.as_ref().as_ref().map(|(m, v)| (m, v))
    }

    /// Exports the model in LP text format.
    pub fn write_lp<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        self.model.write_lp(out)
    }
}

/// The solved static plan: per-period quantities, their integer roundings,
/// and the expected inventory levels behind the objective.
#[derive(Clone, Debug)]
pub struct StaticPlan {
    pub start: usize,
    pub objective: f64,
    pub w: Vec<f64>,
    pub w_int: Vec<i64>,
    pub q: Vec<[f64; 2]>,
    pub q_int: Vec<[i64; 2]>,
    pub ibar: Vec<[f64; 2]>,
    pub hbar: Vec<[f64; 2]>,
    pub bbar: Vec<[f64; 2]>,
    pub proven_optimal: bool,
    pub nodes: usize,
}

impl StaticPlan {
    /// The rounded plan as a fixed per-stage policy over absolute stages
    /// `start..=T` (earlier stages, if any, get no-ops).
    pub fn open_loop(&self, horizon: usize, clamp_w: bool) -> OpenLoopPolicy {
        let mut actions = vec![Action::default(); horizon];
        for (tau, a) in actions.iter_mut().skip(self.start - 1).enumerate() {
            if let (Some(&w), Some(q)) = (self.w_int.get(tau), self.q_int.get(tau)) {
                *a = Action::new(w, q[0], q[1]);
            }
        }
        OpenLoopPolicy { actions, clamp_w }
    }
}

/// Builds model LP-1 from the opening state at `start_period`, with the loss
/// bounds taken from `parts`.
pub fn build_lp1(
    inst: &Instance,
    opening: State,
    start_period: usize,
    parts: &Lp1Partitions,
) -> Result<StaticModel> {
    build_lp1_scaled(inst, opening, start_period, parts, 1.0)
}

fn build_lp1_scaled(
    inst: &Instance,
    opening: State,
    start_period: usize,
    parts: &Lp1Partitions,
    big_m_scale: f64,
) -> Result<StaticModel> {
    let (model, vars) = assemble_lp1(inst, opening, start_period, parts, big_m_scale, true)?;
    let relaxed = assemble_lp1(inst, opening, start_period, parts, big_m_scale, false)?;
    Ok(StaticModel {
        horizon: inst.horizon,
        start: start_period,
        opening,
        model,
        vars,
        costs: inst.costs,
        relaxed: Box::new(Some(relaxed)),
    })
}

fn assemble_lp1(
    inst: &Instance,
    opening: State,
    start_period: usize,
    parts: &Lp1Partitions,
    big_m_scale: f64,
    with_w_domain: bool,
) -> Result<(MilpModel, StaticVars)> {
    if parts.start != start_period {
        return Err(Error::Domain(
            "partitions were built for a different start period".into(),
        ));
    }
    let n_periods = inst.horizon - start_period + 1;
    if parts.parts.len() != n_periods {
        return Err(Error::Domain(format!(
            "expected {n_periods} partition rows, got {}",
            parts.parts.len()
        )));
    }
    let c = inst.costs;
    let mut m = MilpModel::default();
    let inf = f64::INFINITY;

    // Big-M magnitudes from the truncated demand spans.
    let mut spans = Vec::with_capacity(n_periods);
    for t in start_period..=inst.horizon {
        let s1 = inst.demand[0].discretize(t, inst.truncation_eps)?.support_max();
        let s2 = inst.demand[1].discretize(t, inst.truncation_eps)?.support_max();
        spans.push((s1 + s2) as f64);
    }
    let backlog = (-opening.i1).max(0) as f64 + (-opening.i2).max(0) as f64;
    let m_order: Vec<f64> = (0..n_periods)
        .map(|tau| big_m_scale * (spans[tau..].iter().sum::<f64>() + backlog).max(1.0))
        .collect();
    // Per-period magnitude for the transship-side rows: along any optimal
    // plan, |Ibar_{t-1}| and the transshipped amount stay within the opening
    // magnitudes plus everything that can arrive or leave before t.
    let m_w: Vec<f64> = (0..n_periods)
        .map(|tau| {
            big_m_scale
                * (opening.i1.unsigned_abs() as f64
                    + opening.i2.unsigned_abs() as f64
                    + spans[..tau].iter().sum::<f64>()
                    + spans[tau.min(n_periods - 1)]
                    + 1.0)
        })
        .collect();

    let mut vars = StaticVars {
        q: Vec::new(),
        hbar: Vec::new(),
        bbar: Vec::new(),
        ibar: Vec::new(),
        xbar: Vec::new(),
        w_plus: Vec::new(),
        w_minus: Vec::new(),
        delta: Vec::new(),
        gamma: Vec::new(),
        pi: Vec::new(),
    };
    for tau in 0..n_periods {
        let t = start_period + tau;
        vars.q.push([
            m.add_var(format!("q_{t}_1"), 0.0, inf, c.z),
            m.add_var(format!("q_{t}_2"), 0.0, inf, c.z),
        ]);
        vars.hbar.push([
            m.add_var(format!("hb_{t}_1"), 0.0, inf, c.h),
            m.add_var(format!("hb_{t}_2"), 0.0, inf, c.h),
        ]);
        vars.bbar.push([
            m.add_var(format!("bb_{t}_1"), 0.0, inf, c.b),
            m.add_var(format!("bb_{t}_2"), 0.0, inf, c.b),
        ]);
        vars.ibar.push([
            m.add_var(format!("ib_{t}_1"), -inf, inf, 0.0),
            m.add_var(format!("ib_{t}_2"), -inf, inf, 0.0),
        ]);
        vars.xbar.push([
            m.add_var(format!("xb_{t}_1"), -inf, inf, 0.0),
            m.add_var(format!("xb_{t}_2"), -inf, inf, 0.0),
        ]);
        vars.w_plus.push(m.add_var(format!("wp_{t}"), 0.0, inf, c.v));
        vars.w_minus.push(m.add_var(format!("wm_{t}"), 0.0, inf, c.v));
        vars.delta
            .push((c.r > 0.0).then(|| m.add_binary(format!("dt_{t}"), c.r)));
        vars.gamma.push([
            (c.k > 0.0).then(|| m.add_binary(format!("gm_{t}_1"), c.k)),
            (c.k > 0.0).then(|| m.add_binary(format!("gm_{t}_2"), c.k)),
        ]);
        vars.pi.push([
            (tau > 0 && with_w_domain)
                .then(|| m.add_binary_with_priority(format!("pi_{t}_1"), 0.0, 1)),
            (tau > 0 && with_w_domain)
                .then(|| m.add_binary_with_priority(format!("pi_{t}_2"), 0.0, 1)),
        ]);
    }

    let openings = [opening.i1 as f64, opening.i2 as f64];
    for tau in 0..n_periods {
        let t = start_period + tau;
        for j in 0..2 {
            // Location 1 sends a positive W, location 2 receives it.
            let (wp_sign, wm_sign) = if j == 0 { (-1.0, 1.0) } else { (1.0, -1.0) };
            let mean_t = parts.per_means[tau][j];

            // Flow balance: I_{t-1} -/+ W_t + Q_t - mean = I_t.
            let mut bal = vec![
                (vars.w_plus[tau], wp_sign),
                (vars.w_minus[tau], wm_sign),
                (vars.q[tau][j], 1.0),
                (vars.ibar[tau][j], -1.0),
            ];
            let mut rhs = mean_t;
            if tau == 0 {
                rhs -= openings[j];
            } else {
                bal.push((vars.ibar[tau - 1][j], 1.0));
            }
            m.add_con(format!("bal_{t}_{}", j + 1), bal, Sense::Eq, rhs);

            // Cumulative inventory available to satisfy demand up to t:
            // X_t = opening + sum_{k<=t} (Q_k -/+ W_k), kept recursive.
            let mut xd = vec![
                (vars.xbar[tau][j], 1.0),
                (vars.q[tau][j], -1.0),
                (vars.w_plus[tau], -wp_sign),
                (vars.w_minus[tau], -wm_sign),
            ];
            let rhs = if tau == 0 {
                openings[j]
            } else {
                xd.push((vars.xbar[tau - 1][j], -1.0));
                0.0
            };
            m.add_con(format!("xdef_{t}_{}", j + 1), xd, Sense::Eq, rhs);

            // Piecewise lower bounds on expected overage and shortage.
            let mean_cum = parts.cum_dists[tau][j].mean();
            let bounds = piecewise_lower_bounds(&parts.parts[tau][j], mean_cum);
            for (i, aff) in bounds.complement.iter().enumerate().skip(1) {
                m.add_lazy_con(
                    format!("ph_{t}_{}_{i}", j + 1),
                    vec![(vars.hbar[tau][j], 1.0), (vars.xbar[tau][j], -aff.slope)],
                    Sense::Ge,
                    aff.intercept,
                );
            }
            let n_regions = parts.parts[tau][j].n_regions();
            for (i, aff) in bounds.loss.iter().enumerate().take(n_regions) {
                m.add_lazy_con(
                    format!("pb_{t}_{}_{i}", j + 1),
                    vec![(vars.bbar[tau][j], 1.0), (vars.xbar[tau][j], -aff.slope)],
                    Sense::Ge,
                    aff.intercept,
                );
            }

            // Fixed ordering cost indicator.
            if let Some(g) = vars.gamma[tau][j] {
                m.add_con(
                    format!("qcap_{t}_{}", j + 1),
                    vec![(vars.q[tau][j], 1.0), (g, -m_order[tau])],
                    Sense::Le,
                    0.0,
                );
            }
        }

        // Fixed transshipping cost indicator.
        if let Some(d) = vars.delta[tau] {
            m.add_con(
                format!("wcap_{t}"),
                vec![
                    (vars.w_plus[tau], 1.0),
                    (vars.w_minus[tau], 1.0),
                    (d, -m_w[tau]),
                ],
                Sense::Le,
                0.0,
            );
        }

        // Transshipment domain: only actual stock moves.
        if tau == 0 {
            m.add_con(
                format!("wdom_{t}_1"),
                vec![(vars.w_plus[tau], 1.0)],
                Sense::Le,
                openings[0].max(0.0),
            );
            m.add_con(
                format!("wdom_{t}_2"),
                vec![(vars.w_minus[tau], 1.0)],
                Sense::Le,
                openings[1].max(0.0),
            );
        } else if with_w_domain {
            let sides = [
                (vars.w_plus[tau], vars.ibar[tau - 1][0], vars.pi[tau][0]),
                (vars.w_minus[tau], vars.ibar[tau - 1][1], vars.pi[tau][1]),
            ];
            for (side, (w, ib, pi)) in sides.into_iter().enumerate() {
                let pi = pi.expect("pi exists for tau > 0");
                // W <= Ibar + M (1 - pi)  and  W <= M pi: together they are
                // exactly W <= max(0, Ibar) over binary pi.
                m.add_con(
                    format!("wlink_{t}_{}_a", side + 1),
                    vec![(w, 1.0), (ib, -1.0), (pi, m_w[tau])],
                    Sense::Le,
                    m_w[tau],
                );
                m.add_con(
                    format!("wlink_{t}_{}_b", side + 1),
                    vec![(w, 1.0), (pi, -m_w[tau])],
                    Sense::Le,
                    0.0,
                );
            }
        }
    }

    Ok((m, vars))
}

/// Solves a static model with the given backend and extracts the plan.
pub fn solve_static(model: &StaticModel, backend: &dyn MilpBackend) -> Result<StaticPlan> {
    solve_static_hinted(model, backend, None)
}

/// As [`solve_static`] with an optional binary-pattern hint for the backend.
pub fn solve_static_hinted(
    model: &StaticModel,
    backend: &dyn MilpBackend,
    hint: Option<&[u8]>,
) -> Result<StaticPlan> {
    // The pi-free twin is a relaxation; accept its optimum when the plan
    // already keeps every later-period transshipment within the expected
    // stock of the sending location.
    if let Some((twin, twin_vars)) = model.relaxed.as_ref() {
        if let Ok(sol) = backend.solve_hinted(twin, None) {
            let ok = (1..twin_vars.w_plus.len()).all(|tau| {
                let wp = sol.values[twin_vars.w_plus[tau]];
                let wm = sol.values[twin_vars.w_minus[tau]];
                let i1 = sol.values[twin_vars.ibar[tau - 1][0]];
                let i2 = sol.values[twin_vars.ibar[tau - 1][1]];
                wp <= i1.max(0.0) + 1e-6 && wm <= i2.max(0.0) + 1e-6
            });
            if ok {
                return extract_plan(model, twin_vars, &sol);
            }
        }
    }
    let sol = backend.solve_hinted(&model.model, hint)?;
    extract_plan(model, &model.vars, &sol)
}

fn extract_plan(
    model: &StaticModel,
    v: &StaticVars,
    sol: &crate::milp::MilpSolution,
) -> Result<StaticPlan> {
    let n = model.periods();
    let take = |idx: usize| sol.values[idx];
    let mut plan = StaticPlan {
        start: model.start,
        objective: sol.objective,
        w: Vec::with_capacity(n),
        w_int: Vec::with_capacity(n),
        q: Vec::with_capacity(n),
        q_int: Vec::with_capacity(n),
        ibar: Vec::with_capacity(n),
        hbar: Vec::with_capacity(n),
        bbar: Vec::with_capacity(n),
        proven_optimal: sol.proven_optimal,
        nodes: sol.nodes,
    };
    for tau in 0..n {
        let w = take(v.w_plus[tau]) - take(v.w_minus[tau]);
        plan.w.push(w);
        plan.w_int.push(w.round() as i64);
        let q = [take(v.q[tau][0]), take(v.q[tau][1])];
        plan.q.push(q);
        plan.q_int.push([q[0].round() as i64, q[1].round() as i64]);
        plan.ibar.push([take(v.ibar[tau][0]), take(v.ibar[tau][1])]);
        plan.hbar.push([take(v.hbar[tau][0]), take(v.hbar[tau][1])]);
        plan.bbar.push([take(v.bbar[tau][0]), take(v.bbar[tau][1])]);
    }

    // Objective identity: the reported objective re-derives from the parts.
    let c = model.costs;
    let mut check = 0.0;
    for tau in 0..n {
        check += c.v * (take(v.w_plus[tau]) + take(v.w_minus[tau]));
        if let Some(d) = v.delta[tau] {
            check += c.r * take(d);
        }
        for j in 0..2 {
            check += c.z * plan.q[tau][j] + c.h * plan.hbar[tau][j] + c.b * plan.bbar[tau][j];
            if let Some(g) = v.gamma[tau][j] {
                check += c.k * take(g);
            }
        }
    }
    if (check - plan.objective).abs() > 1e-6 * plan.objective.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "objective identity violated: parts {check} vs reported {}",
            plan.objective
        )));
    }
    Ok(plan)
}

fn fixed_cost(fixed: f64, unit: f64, amount: f64) -> f64 {
    if amount > 1e-9 {
        fixed + unit * amount
    } else {
        0.0
    }
}

/// Exact expected cost of executing a static `(W, Q)` plan open-loop under
/// the linear balance dynamics, using the same cumulative distributions the
/// model was built on. The model objective lower-bounds this value.
pub fn exact_static_cost(
    costs: &Costs,
    opening: State,
    w: &[f64],
    q: &[[f64; 2]],
    parts: &Lp1Partitions,
) -> f64 {
    let openings = [opening.i1 as f64, opening.i2 as f64];
    let mut total = 0.0;
    for tau in 0..parts.parts.len() {
        total += fixed_cost(costs.r, costs.v, w[tau].abs());
        for j in 0..2 {
            total += fixed_cost(costs.k, costs.z, q[tau][j]);
            let sign = if j == 0 { -1.0 } else { 1.0 };
            let x: f64 = openings[j]
                + (0..=tau)
                    .map(|k| q[k][j] + sign * w[k])
                    .sum::<f64>();
            let eval = loss_exact(x, &parts.cum_dists[tau][j]);
            total += costs.h * eval.complement + costs.b * eval.loss;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::DemandSpec;
    use approx::assert_abs_diff_eq;

    fn near_zero_demand() -> DemandSpec {
        DemandSpec::normal(vec![1e-6], 0.5).unwrap()
    }

    #[test]
    fn zero_demand_zero_opening_gives_zero_plan() {
        let spec = near_zero_demand();
        let costs = Costs {
            k: 10.0,
            z: 1.0,
            r: 5.0,
            v: 1.0,
            h: 1.0,
            b: 9.0,
        };
        let inst = Instance::with_options(
            1,
            costs,
            [spec.clone(), spec],
            Some([(-5, 5), (-5, 5)]),
            Some(5),
            1e-3,
        )
        .unwrap();
        let parts = default_partitions(&inst, 1, 2).unwrap();
        let model = build_lp1(&inst, State::new(0, 0), 1, &parts).unwrap();
        let plan = solve_static(&model, &BranchBound::default()).unwrap();
        assert!(plan.objective.abs() < 1e-3, "objective {}", plan.objective);
        assert_eq!(plan.q_int[0], [0, 0]);
        assert_eq!(plan.w_int[0], 0);
    }

    #[test]
    fn single_period_orders_the_means() {
        let d1 = DemandSpec::normal(vec![10.0], 0.001).unwrap();
        let d2 = DemandSpec::normal(vec![7.0], 0.001).unwrap();
        let costs = Costs {
            k: 10.0,
            z: 1.0,
            r: 5.0,
            v: 1.0,
            h: 1.0,
            b: 9.0,
        };
        let inst = Instance::with_options(
            1,
            costs,
            [d1, d2],
            Some([(-20, 30), (-20, 30)]),
            Some(30),
            1e-6,
        )
        .unwrap();
        let parts = default_partitions(&inst, 1, 1).unwrap();
        let model = build_lp1(&inst, State::new(0, 0), 1, &parts).unwrap();
        let plan = solve_static(&model, &BranchBound::default()).unwrap();
        assert_abs_diff_eq!(plan.objective, 2.0 * 10.0 + 1.0 * 17.0, epsilon = 1e-4);
        assert_abs_diff_eq!(plan.q[0][0], 10.0, epsilon = 1e-6);
        assert_abs_diff_eq!(plan.q[0][1], 7.0, epsilon = 1e-6);
    }

    #[test]
    fn no_binaries_when_fixed_costs_vanish() {
        let spec = DemandSpec::poisson(vec![2.0, 3.0]).unwrap();
        let costs = Costs {
            k: 0.0,
            z: 1.0,
            r: 0.0,
            v: 0.5,
            h: 1.0,
            b: 4.0,
        };
        let inst = Instance::new(2, costs, [spec.clone(), spec]).unwrap();
        let parts = default_partitions(&inst, 1, 3).unwrap();
        let model = build_lp1(&inst, State::new(0, 0), 1, &parts).unwrap();
        // only the pi indicators remain
        assert_eq!(model.model.binaries().len(), 2);
        let plan = solve_static(&model, &BranchBound::default()).unwrap();
        assert!(plan.proven_optimal);
    }

    #[test]
    fn objective_insensitive_to_big_m_scale() {
        let d1 = DemandSpec::poisson(vec![3.0, 2.0, 4.0]).unwrap();
        let d2 = DemandSpec::poisson(vec![2.0, 3.0, 2.0]).unwrap();
        let costs = Costs {
            k: 12.0,
            z: 0.5,
            r: 6.0,
            v: 1.0,
            h: 1.0,
            b: 5.0,
        };
        let inst = Instance::new(3, costs, [d1, d2]).unwrap();
        let parts = default_partitions(&inst, 1, 4).unwrap();
        let base = build_lp1_scaled(&inst, State::new(4, -2), 1, &parts, 1.0).unwrap();
        let wide = build_lp1_scaled(&inst, State::new(4, -2), 1, &parts, 4.0).unwrap();
        let bb = BranchBound::default();
        let a = solve_static(&base, &bb).unwrap();
        let b = solve_static(&wide, &bb).unwrap();
        assert_abs_diff_eq!(a.objective, b.objective, epsilon = 1e-6);
    }

    #[test]
    fn plan_objective_lower_bounds_exact_open_loop_cost() {
        let d1 = DemandSpec::poisson(vec![6.0, 5.0]).unwrap();
        let d2 = DemandSpec::poisson(vec![5.0, 7.0]).unwrap();
        let costs = Costs {
            k: 8.0,
            z: 1.0,
            r: 4.0,
            v: 0.5,
            h: 1.0,
            b: 5.0,
        };
        let inst = Instance::new(2, costs, [d1, d2]).unwrap();
        let mut prev_gap = f64::INFINITY;
        for n_regions in [2usize, 4, 8, 16] {
            let parts = default_partitions(&inst, 1, n_regions).unwrap();
            let model = build_lp1(&inst, State::new(0, 0), 1, &parts).unwrap();
            let plan = solve_static(&model, &BranchBound::default()).unwrap();
            let exact = exact_static_cost(&costs, State::new(0, 0), &plan.w, &plan.q, &parts);
            assert!(
                plan.objective <= exact + 1e-7,
                "N={n_regions}: objective {} above exact {exact}",
                plan.objective
            );
            let gap = exact - plan.objective;
            assert!(gap <= prev_gap + 1e-7, "gap must shrink with refinement");
            prev_gap = gap;
        }
    }

    #[test]
    fn w_domain_blocks_transshipping_backorders() {
        // Opening (0, -4): nothing may move at the start period even though
        // shipping to location 2 would heal its backlog.
        let spec = DemandSpec::poisson(vec![1.0]).unwrap();
        let costs = Costs {
            k: 5.0,
            z: 0.5,
            r: 1.0,
            v: 0.1,
            h: 1.0,
            b: 9.0,
        };
        let inst = Instance::new(1, costs, [spec.clone(), spec]).unwrap();
        let parts = default_partitions(&inst, 1, 2).unwrap();
        let model = build_lp1(&inst, State::new(0, -4), 1, &parts).unwrap();
        let plan = solve_static(&model, &BranchBound::default()).unwrap();
        assert_eq!(plan.w_int[0], 0);
    }

    #[test]
    fn lp_export_roundtrips_sections() {
        let spec = DemandSpec::poisson(vec![2.0]).unwrap();
        let costs = Costs {
            k: 10.0,
            z: 2.0,
            r: 5.0,
            v: 1.0,
            h: 1.0,
            b: 3.0,
        };
        let inst = Instance::new(1, costs, [spec.clone(), spec]).unwrap();
        let parts = default_partitions(&inst, 1, 2).unwrap();
        let model = build_lp1(&inst, State::new(1, 1), 1, &parts).unwrap();
        let mut buf = Vec::new();
        model.write_lp(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("bal_1_1"));
        assert!(text.contains("Binaries"));
        assert!(text.contains("End"));
    }
}
