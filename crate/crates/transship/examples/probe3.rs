use transship::demand::{make_pattern, DemandSpec, PatternId};
use transship::instance::{Costs, Instance};
use transship::milp::{build_lp1, default_partitions, lp_relaxation_bound, BranchBound, MilpBackend};
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
    let bb = BranchBound::default();
    // solve the twin directly
    let t0 = std::time::Instant::now();
    let (twin, tv) = model.relaxed_parts().unwrap();
    let sol = bb.solve(twin).unwrap();
    println!("twin: {:?} nodes {} obj {:.4}", t0.elapsed(), sol.nodes, sol.objective);
    println!("twin root LP bound: {:.4}", lp_relaxation_bound(twin).unwrap());
    println!("full root LP bound: {:.4}", lp_relaxation_bound(&model.model).unwrap());
    for tau in 0..7 {
        let wp = sol.values[tv.w_plus[tau]];
        let wm = sol.values[tv.w_minus[tau]];
        let i1 = if tau > 0 { sol.values[tv.ibar[tau - 1][0]] } else { 0.0 };
        let i2 = if tau > 0 { sol.values[tv.ibar[tau - 1][1]] } else { 0.0 };
        println!("tau {tau}: wp {wp:.3} wm {wm:.3} prev_i1 {i1:.3} prev_i2 {i2:.3}");
    }
}
