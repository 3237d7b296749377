use std::time::Instant;
use transship::demand::{make_pattern, DemandSpec, PatternId};
use transship::instance::{Costs, Instance};
use transship::milp::{build_lp1, default_partitions, solve_static, BranchBound};
use transship::State;

fn main() {
    let means1 = make_pattern(PatternId::Lcy, 7, 10.0).unwrap();
    let means2 = make_pattern(PatternId::Sin, 7, 10.0).unwrap();
    let costs = Costs { k: 20.0, z: 0.5, r: 5.0, v: 1.0, h: 1.0, b: 5.0 };
    let inst7 = Instance::new(
        7,
        costs,
        [
            DemandSpec::normal(means1, 0.1).unwrap(),
            DemandSpec::normal(means2, 0.1).unwrap(),
        ],
    )
    .unwrap();
    let parts = default_partitions(&inst7, 1, 10).unwrap();
    let model = build_lp1(&inst7, State::new(0, 0), 1, &parts).unwrap();
    println!(
        "model: {} vars ({} binaries), {} rows ({} lazy)",
        model.model.vars.len(),
        model.model.binaries().len(),
        model.model.cons.len(),
        model.model.cons.iter().filter(|c| c.lazy).count()
    );
    let bb = BranchBound::default();
    let t0 = Instant::now();
    let plan = solve_static(&model, &bb).unwrap();
    println!(
        "solve: {:?}  objective {:.4}  nodes {}  proven {}",
        t0.elapsed(),
        plan.objective,
        plan.nodes,
        plan.proven_optimal
    );
    // per-period smaller solves
    for k in [4usize, 7] {
        let parts = default_partitions(&inst7, k, 10).unwrap();
        let model = build_lp1(&inst7, State::new(3, 5), k, &parts).unwrap();
        let t0 = Instant::now();
        let plan = solve_static(&model, &bb).unwrap();
        println!(
            "start {k}: {:?} nodes {} rows {}",
            t0.elapsed(),
            plan.nodes,
            model.model.cons.len()
        );
    }
}
