use std::time::Instant;
use transship::demand::{make_pattern, DemandSpec, PatternId};
use transship::experiments::{build_instance, measure_gap, InstanceConfig, StudySpec};
use transship::heuristic::{EstimateOpts, Heuristic};
use transship::instance::{Costs, Instance};
use transship::sdp::{solve_sdp1, solve_sdp2};
use transship::State;

fn main() {
    // 4-period worst case: SIN1 at scale 10 (means up to 15).
    let spec4 = StudySpec::four_period_default();
    let cfg = InstanceConfig {
        pattern1: PatternId::Sin1,
        pattern2: PatternId::Sin1,
        k: 30.0,
        r: 5.0,
        b: 5.0,
        z: 2.0,
        v: 1.0,
    };
    let inst = build_instance(&spec4, &cfg).unwrap();
    println!(
        "4p instance: bounds {:?} q_max {}",
        inst.state_bounds, inst.q_max
    );
    let t0 = Instant::now();
    let t1 = solve_sdp1(&inst).unwrap();
    println!("solve_sdp1: {:?}", t0.elapsed());
    let t0 = Instant::now();
    let t2 = solve_sdp2(&inst).unwrap();
    println!("solve_sdp2: {:?}", t0.elapsed());
    let s = State::new(0, 0);
    println!(
        "C1 = {:.9}, C2 = {:.9}, diff = {:.3e}",
        t1.cost(1, s).unwrap(),
        t2.cost(1, s).unwrap(),
        (t1.cost(1, s).unwrap() - t2.cost(1, s).unwrap()).abs()
    );

    let t0 = Instant::now();
    let rec = measure_gap(&spec4, &cfg).unwrap();
    println!("full 4p measure_gap: {:?} gap {:.3e}%", t0.elapsed(), rec.gap_pct);

    // 10-period (T=7) heuristic probe at scale 10.
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
    println!("7p instance: bounds {:?} q_max {}", inst7.state_bounds, inst7.q_max);
    let t0 = Instant::now();
    let tab = solve_sdp2(&inst7).unwrap();
    println!("solve_sdp2 (T=7): {:?}  C~1(0,0) = {:.4}", t0.elapsed(), tab.cost(1, State::new(0, 0)).unwrap());

    let runner = Heuristic::new(&inst7, 10).unwrap();
    let t0 = Instant::now();
    let r = runner.run_replication(State::new(0, 0), 0).unwrap();
    println!("first replication: {:?} cost {:.3} (plans {})", t0.elapsed(), r.total_cost, runner.plans_solved());
    let t0 = Instant::now();
    for s in 1..=20u64 {
        runner.run_replication(State::new(0, 0), s).unwrap();
    }
    println!("20 more reps: {:?} (plans {})", t0.elapsed(), runner.plans_solved());
    let t0 = Instant::now();
    let est = runner
        .estimate(State::new(0, 0), 0.95, 0.001, EstimateOpts { batch: 100, min_reps: 100, cap: 2000 })
        .unwrap();
    println!(
        "estimate(cap 2000): {:?} mean {:.3} hw {:.4} n {} converged {} plans {}",
        t0.elapsed(),
        est.mean,
        est.half_width,
        est.n,
        est.converged,
        runner.plans_solved()
    );
}
