//! Study harness: instance grids over cost parameters and demand-pattern
//! pairs, Latin hypercube sampling, optimality-gap records, pivot tables and
//! box-plot data.

use crate::demand::{make_pattern, DemandSpec, PatternId};
use crate::heuristic::{EstimateOpts, Heuristic};
use crate::instance::{Costs, Instance, State};
use crate::sdp::{bounds_diagnostic, solve_sdp1, solve_sdp2};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

/// Which two solvers a study compares; the gap is
/// `100 * (ETC2 - ETC1) / ETC1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapPair {
    /// ETC1 = joint-action DP, ETC2 = two-stage DP (4-period family).
    Sdp1VsSdp2,
    /// ETC1 = two-stage DP, ETC2 = receding-horizon estimate (10-period).
    Sdp2VsHeuristic,
}

impl fmt::Display for GapPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GapPair::Sdp1VsSdp2 => write!(f, "sdp1-vs-sdp2"),
            GapPair::Sdp2VsHeuristic => write!(f, "sdp2-vs-heuristic"),
        }
    }
}

impl FromStr for GapPair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdp1-vs-sdp2" => Ok(GapPair::Sdp1VsSdp2),
            "sdp2-vs-heuristic" => Ok(GapPair::Sdp2VsHeuristic),
            other => Err(Error::Config(format!("unknown gap pair `{other}`"))),
        }
    }
}

/// Horizon family of a study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StudyFamily {
    FourPeriodPoisson,
    TenPeriodNormal,
}

impl fmt::Display for StudyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyFamily::FourPeriodPoisson => write!(f, "four-period-poisson"),
            StudyFamily::TenPeriodNormal => write!(f, "ten-period-normal"),
        }
    }
}

impl FromStr for StudyFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "four-period-poisson" => Ok(StudyFamily::FourPeriodPoisson),
            "ten-period-normal" => Ok(StudyFamily::TenPeriodNormal),
            other => Err(Error::Config(format!("unknown study family `{other}`"))),
        }
    }
}

/// How instances are drawn from the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Every ordered pattern pair crossed with every cost group.
    Full,
    /// Joint Latin hypercube over (pattern1, pattern2, K, R, b, zv).
    Lhs { n: usize },
    /// Latin hypercube over the pattern pair only, crossed with the full
    /// cost grid.
    LhsPatterns { n: usize },
}

/// A full study specification.
#[derive(Clone, Debug)]
pub struct StudySpec {
    pub family: StudyFamily,
    pub horizon: usize,
    pub scale: f64,
    /// Coefficient of variation (Normal family only).
    pub cv: f64,
    pub h: f64,
    pub k_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub b_grid: Vec<f64>,
    pub zv_grid: Vec<(f64, f64)>,
    pub patterns: Vec<PatternId>,
    pub sampling: Sampling,
    pub gap_pair: GapPair,
    /// Initial states; when empty a grid of {-d/2, 0, +d/2} per location is
    /// derived from the mean demand.
    pub openings: Vec<(i64, i64)>,
    pub n_regions: usize,
    pub truncation_eps: f64,
    pub seed: u64,
    pub alpha: f64,
    pub rel_halfwidth: f64,
    pub estimate: EstimateOpts,
}

impl StudySpec {
    /// The 4-period Poisson family with its cost grid.
    pub fn four_period_default() -> Self {
        StudySpec {
            family: StudyFamily::FourPeriodPoisson,
            horizon: 4,
            scale: 10.0,
            cv: 0.0,
            h: 1.0,
            k_grid: vec![10.0, 20.0, 30.0],
            r_grid: vec![5.0, 10.0, 20.0],
            b_grid: vec![3.0, 5.0],
            zv_grid: vec![(2.0, 1.0), (1.0, 0.5)],
            patterns: PatternId::FOUR_PERIOD.to_vec(),
            sampling: Sampling::Lhs { n: 40 },
            gap_pair: GapPair::Sdp1VsSdp2,
            openings: Vec::new(),
            n_regions: 10,
            truncation_eps: 1e-5,
            seed: 20_240_601,
            alpha: 0.95,
            rel_halfwidth: 0.001,
            estimate: EstimateOpts::default(),
        }
    }

    /// The 10-period Normal family (reducible horizon for budget control).
    pub fn ten_period_default() -> Self {
        StudySpec {
            family: StudyFamily::TenPeriodNormal,
            horizon: 10,
            scale: 10.0,
            cv: 0.1,
            h: 1.0,
            k_grid: vec![10.0, 20.0],
            r_grid: vec![5.0, 10.0],
            b_grid: vec![3.0, 5.0],
            zv_grid: vec![(0.5, 1.0)],
            patterns: PatternId::TEN_PERIOD.to_vec(),
            sampling: Sampling::Full,
            gap_pair: GapPair::Sdp2VsHeuristic,
            openings: vec![(0, 0)],
            n_regions: 10,
            truncation_eps: 1e-5,
            seed: 20_240_602,
            alpha: 0.95,
            rel_halfwidth: 0.001,
            estimate: EstimateOpts::default(),
        }
    }
}

/// One instance's gap measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct GapRecord {
    pub id: String,
    pub pattern1: PatternId,
    pub pattern2: PatternId,
    pub k: f64,
    pub r: f64,
    pub b: f64,
    pub z: f64,
    pub v: f64,
    pub etc1: f64,
    pub etc2: f64,
    pub gap_pct: f64,
    /// CI half-width as a percentage of ETC2 (heuristic studies only).
    pub ci_half_pct: Option<f64>,
    pub n_reps: Option<usize>,
}

/// Pivot table: group averages of the gap along one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct PivotTable {
    pub dimension: String,
    pub rows: Vec<(String, f64, usize)>,
}

/// Everything a study produces.
#[derive(Clone, Debug)]
pub struct StudyResult {
    pub records: Vec<GapRecord>,
    pub failures: Vec<(String, String)>,
    pub pivots: Vec<PivotTable>,
    pub grand_average: f64,
}

/// Stratified sample over discrete levels: `n` tuples where each dimension's
/// marginal hits every level at most `ceil(n / levels)` times. With `n`
/// equal to the level count, each dimension is a permutation.
pub fn lhs_sample(dim_levels: &[usize], n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::Config("sample size must be at least 1".into()));
    }
    if dim_levels.iter().any(|&l| l == 0) {
        return Err(Error::Config("every dimension needs at least one level".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(dim_levels.len());
    for &levels in dim_levels {
        let mut column: Vec<usize> = (0..n).map(|i| i % levels).collect();
        column.shuffle(&mut rng);
        columns.push(column);
    }
    Ok((0..n)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect())
}

/// One cost group plus pattern pair drawn from the grid.
#[derive(Clone, Debug)]
pub struct InstanceConfig {
    pub pattern1: PatternId,
    pub pattern2: PatternId,
    pub k: f64,
    pub r: f64,
    pub b: f64,
    pub z: f64,
    pub v: f64,
}

impl InstanceConfig {
    pub fn id(&self, spec: &StudySpec) -> String {
        format!(
            "{}-T{}-s{}-{}-{}-K{}-R{}-b{}-z{}-v{}",
            spec.family,
            spec.horizon,
            spec.scale,
            self.pattern1,
            self.pattern2,
            self.k,
            self.r,
            self.b,
            self.z,
            self.v
        )
    }
}

/// Enumerates or samples the instance configurations of a study.
pub fn sample_configs(spec: &StudySpec) -> Result<Vec<InstanceConfig>> {
    let p = spec.patterns.len();
    let cost_groups: Vec<(f64, f64, f64, f64, f64)> = spec
        .k_grid
        .iter()
        .flat_map(|&k| {
            spec.r_grid.iter().flat_map(move |&r| {
                spec.b_grid.iter().flat_map(move |&b| {
                    spec.zv_grid.iter().map(move |&(z, v)| (k, r, b, z, v))
                })
            })
        })
        .collect();
    let mk = |p1: usize, p2: usize, (k, r, b, z, v): (f64, f64, f64, f64, f64)| InstanceConfig {
        pattern1: spec.patterns[p1],
        pattern2: spec.patterns[p2],
        k,
        r,
        b,
        z,
        v,
    };
    match spec.sampling {
        Sampling::Full => Ok((0..p)
            .flat_map(|p1| {
                let cost_groups = &cost_groups;
                (0..p).flat_map(move |p2| cost_groups.iter().map(move |&cg| mk(p1, p2, cg)))
            })
            .collect()),
        Sampling::Lhs { n } => {
            let dims = [
                p,
                p,
                spec.k_grid.len(),
                spec.r_grid.len(),
                spec.b_grid.len(),
                spec.zv_grid.len(),
            ];
            let tuples = lhs_sample(&dims, n, spec.seed)?;
            Ok(tuples
                .into_iter()
                .map(|t| {
                    mk(
                        t[0],
                        t[1],
                        (
                            spec.k_grid[t[2]],
                            spec.r_grid[t[3]],
                            spec.b_grid[t[4]],
                            spec.zv_grid[t[5]].0,
                            spec.zv_grid[t[5]].1,
                        ),
                    )
                })
                .collect())
        }
        Sampling::LhsPatterns { n } => {
            let tuples = lhs_sample(&[p, p], n, spec.seed)?;
            Ok(tuples
                .into_iter()
                .flat_map(|t| cost_groups.iter().map(move |&cg| mk(t[0], t[1], cg)))
                .collect())
        }
    }
}

/// Builds the instance behind one configuration.
pub fn build_instance(spec: &StudySpec, cfg: &InstanceConfig) -> Result<Instance> {
    let costs = Costs {
        k: cfg.k,
        z: cfg.z,
        r: cfg.r,
        v: cfg.v,
        h: spec.h,
        b: cfg.b,
    };
    let means1 = make_pattern(cfg.pattern1, spec.horizon, spec.scale)?;
    let means2 = make_pattern(cfg.pattern2, spec.horizon, spec.scale)?;
    let demand = match spec.family {
        StudyFamily::FourPeriodPoisson => {
            [DemandSpec::poisson(means1)?, DemandSpec::poisson(means2)?]
        }
        StudyFamily::TenPeriodNormal => [
            DemandSpec::normal(means1, spec.cv)?,
            DemandSpec::normal(means2, spec.cv)?,
        ],
    };
    Instance::with_options(spec.horizon, costs, demand, None, None, spec.truncation_eps)
}

/// The opening-state grid of a study: the spec's explicit list, or offsets
/// of roughly half the mean demand per location.
pub fn derive_openings(spec: &StudySpec, inst: &Instance) -> Vec<State> {
    if !spec.openings.is_empty() {
        return spec
            .openings
            .iter()
            .map(|&(a, b)| State::new(a, b))
            .collect();
    }
    let offset = |j: usize| {
        let means = &inst.demand[j].means;
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        (avg / 2.0).round() as i64
    };
    let (o1, o2) = (offset(0), offset(1));
    let mut out = Vec::with_capacity(9);
    for a in [-o1, 0, o1] {
        for b in [-o2, 0, o2] {
            out.push(State::new(a, b));
        }
    }
    out.sort_by_key(|s| (s.i1, s.i2));
    out.dedup();
    out
}

/// Measures one instance's gap.
pub fn measure_gap(spec: &StudySpec, cfg: &InstanceConfig) -> Result<GapRecord> {
    let inst = build_instance(spec, cfg)?;
    let openings = derive_openings(spec, &inst);
    let (etc1, etc2, ci, n_reps) = match spec.gap_pair {
        GapPair::Sdp1VsSdp2 => {
            let t1 = solve_sdp1(&inst)?;
            let t2 = solve_sdp2(&inst)?;
            let report = bounds_diagnostic(&inst, &t1, &openings)?;
            if !report.ok {
                return Err(Error::Domain(format!(
                    "lattice too tight: boundary mass {:.3e}",
                    report.max_boundary_mass
                )));
            }
            let avg = |table: &crate::sdp::ValueTable| -> Result<f64> {
                let mut acc = 0.0;
                for s in &openings {
                    acc += table.cost(1, *s).ok_or_else(|| {
                        Error::Domain(format!("opening ({}, {}) off-lattice", s.i1, s.i2))
                    })?;
                }
                Ok(acc / openings.len() as f64)
            };
            (avg(&t1)?, avg(&t2)?, None, None)
        }
        GapPair::Sdp2VsHeuristic => {
            let t2 = solve_sdp2(&inst)?;
            let runner = Heuristic::new(&inst, spec.n_regions)?;
            let mut etc1 = 0.0;
            let mut etc2 = 0.0;
            let mut hw_pct: f64 = 0.0;
            let mut reps = 0usize;
            for s in &openings {
                etc1 += t2.cost(1, *s).ok_or_else(|| {
                    Error::Domain(format!("opening ({}, {}) off-lattice", s.i1, s.i2))
                })?;
                let est = runner.estimate(*s, spec.alpha, spec.rel_halfwidth, spec.estimate)?;
                etc2 += est.mean;
                hw_pct = hw_pct.max(100.0 * est.half_width / est.mean.abs().max(1e-12));
                reps += est.n;
            }
            etc1 /= openings.len() as f64;
            etc2 /= openings.len() as f64;
            (etc1, etc2, Some(hw_pct), Some(reps))
        }
    };
    if etc1 <= 0.0 {
        return Err(Error::Domain(format!("nonpositive benchmark cost {etc1}")));
    }
    let gap_pct = 100.0 * (etc2 - etc1) / etc1;
    if !gap_pct.is_finite() {
        return Err(Error::Domain("non-finite gap".into()));
    }
    Ok(GapRecord {
        id: cfg.id(spec),
        pattern1: cfg.pattern1,
        pattern2: cfg.pattern2,
        k: cfg.k,
        r: cfg.r,
        b: cfg.b,
        z: cfg.z,
        v: cfg.v,
        etc1,
        etc2,
        gap_pct,
        ci_half_pct: ci,
        n_reps,
    })
}

/// Runs the whole study. Records already present in `existing` (matched by
/// id) are reused, making re-runs with the same spec and seeds idempotent.
pub fn run_study(spec: &StudySpec, existing: &[GapRecord]) -> StudyResult {
    let configs = sample_configs(spec).unwrap_or_default();
    let outcomes: Vec<(String, std::result::Result<GapRecord, String>)> = configs
        .par_iter()
        .map(|cfg| {
            let id = cfg.id(spec);
            if let Some(done) = existing.iter().find(|r| r.id == id) {
                return (id, Ok(done.clone()));
            }
            let res = measure_gap(spec, cfg).map_err(|e| e.to_string());
            (id, res)
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, outcome) in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push((id, e)),
        }
    }
    let pivots = pivot_tables(spec, &records);
    let grand_average = if records.is_empty() {
        f64::NAN
    } else {
        records.iter().map(|r| r.gap_pct).sum::<f64>() / records.len() as f64
    };
    StudyResult {
        records,
        failures,
        pivots,
        grand_average,
    }
}

fn group_average(
    records: &[GapRecord],
    key: impl Fn(&GapRecord) -> String,
) -> Vec<(String, f64, usize)> {
    let mut order: Vec<String> = Vec::new();
    let mut sums: std::collections::HashMap<String, (f64, usize)> = Default::default();
    for r in records {
        let k = key(r);
        if !sums.contains_key(&k) {
            order.push(k.clone());
        }
        let e = sums.entry(k).or_insert((0.0, 0));
        e.0 += r.gap_pct;
        e.1 += 1;
    }
    order
        .into_iter()
        .map(|k| {
            let (s, n) = sums[&k];
            (k, s / n as f64, n)
        })
        .collect()
}

/// The four pivot tables mirroring the study report layout: by the pattern
/// of location 1, by K, by R, and by b.
pub fn pivot_tables(spec: &StudySpec, records: &[GapRecord]) -> Vec<PivotTable> {
    let mut by_pattern = group_average(records, |r| r.pattern1.to_string());
    let pat_rank = |name: &str| {
        spec.patterns
            .iter()
            .position(|p| p.to_string() == name)
            .unwrap_or(usize::MAX)
    };
    by_pattern.sort_by_key(|(k, _, _)| pat_rank(k));
    let sort_numeric = |rows: &mut Vec<(String, f64, usize)>| {
        rows.sort_by(|a, b| {
            a.0.parse::<f64>()
                .unwrap_or(f64::MAX)
                .total_cmp(&b.0.parse::<f64>().unwrap_or(f64::MAX))
        });
    };
    let mut by_k = group_average(records, |r| format!("{}", r.k));
    sort_numeric(&mut by_k);
    let mut by_r = group_average(records, |r| format!("{}", r.r));
    sort_numeric(&mut by_r);
    let mut by_b = group_average(records, |r| format!("{}", r.b));
    sort_numeric(&mut by_b);
    vec![
        PivotTable {
            dimension: "pattern1".into(),
            rows: by_pattern,
        },
        PivotTable {
            dimension: "K".into(),
            rows: by_k,
        },
        PivotTable {
            dimension: "R".into(),
            rows: by_r,
        },
        PivotTable {
            dimension: "b".into(),
            rows: by_b,
        },
    ]
}

/// Five-number summary of one group, with 1.5 IQR whiskers and outliers.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxplotGroup {
    pub key: String,
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lo_whisker: f64,
    pub hi_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile on sorted data (the common default rule).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Per-group five-number summaries of the gap along `pivot`
/// (`pattern1`/`pattern2`/`k`/`r`/`b`).
pub fn boxplot_data(records: &[GapRecord], pivot: &str) -> Result<Vec<BoxplotGroup>> {
    let key_fn: Box<dyn Fn(&GapRecord) -> String> = match pivot {
        "pattern1" | "pattern" => Box::new(|r: &GapRecord| r.pattern1.to_string()),
        "pattern2" => Box::new(|r: &GapRecord| r.pattern2.to_string()),
        "k" => Box::new(|r: &GapRecord| format!("{}", r.k)),
        "r" => Box::new(|r: &GapRecord| format!("{}", r.r)),
        "b" => Box::new(|r: &GapRecord| format!("{}", r.b)),
        other => {
            return Err(Error::Config(format!(
                "unknown pivot dimension `{other}` (expected pattern1, pattern2, k, r, b)"
            )))
        }
    };
    if records.is_empty() {
        return Err(Error::Config("no records to group".into()));
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<f64>> = Default::default();
    for r in records {
        let k = key_fn(r);
        if !groups.contains_key(&k) {
            order.push(k.clone());
        }
        groups.entry(k).or_default().push(r.gap_pct);
    }
    order.sort();
    Ok(order
        .into_iter()
        .map(|key| {
            let mut xs = groups.remove(&key).unwrap();
            xs.sort_by(f64::total_cmp);
            let q1 = quantile(&xs, 0.25);
            let median = quantile(&xs, 0.5);
            let q3 = quantile(&xs, 0.75);
            let iqr = q3 - q1;
            let lo_fence = q1 - 1.5 * iqr;
            let hi_fence = q3 + 1.5 * iqr;
            let lo_whisker = xs.iter().copied().find(|&x| x >= lo_fence).unwrap_or(xs[0]);
            let hi_whisker = xs
                .iter()
                .rev()
                .copied()
                .find(|&x| x <= hi_fence)
                .unwrap_or(*xs.last().unwrap());
            let outliers = xs
                .iter()
                .copied()
                .filter(|&x| x < lo_fence || x > hi_fence)
                .collect();
            BoxplotGroup {
                key,
                count: xs.len(),
                min: xs[0],
                q1,
                median,
                q3,
                max: *xs.last().unwrap(),
                lo_whisker,
                hi_whisker,
                outliers,
            }
        })
        .collect())
}

pub const RECORDS_HEADER: &str =
    "id,pattern1,pattern2,k,r,b,z,v,etc1,etc2,gap_pct,ci_half_pct,n_reps";

/// Writes gap records as CSV (documented header above).
pub fn write_records<W: Write>(records: &[GapRecord], out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.12e},{:.12e},{:.12e},{},{}",
            r.id,
            r.pattern1,
            r.pattern2,
            r.k,
            r.r,
            r.b,
            r.z,
            r.v,
            r.etc1,
            r.etc2,
            r.gap_pct,
            r.ci_half_pct.map_or(String::new(), |x| format!("{x:.12e}")),
            r.n_reps.map_or(String::new(), |n| n.to_string()),
        )?;
    }
    Ok(())
}

/// Parses records back (resume support).
pub fn read_records(text: &str) -> Result<Vec<GapRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(Error::Config(format!(
                "record line {} has {} fields, expected 13",
                i + 1,
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number `{s}`: {e}")))
        };
        out.push(GapRecord {
            id: f[0].to_string(),
            pattern1: f[1].parse()?,
            pattern2: f[2].parse()?,
            k: num(f[3])?,
            r: num(f[4])?,
            b: num(f[5])?,
            z: num(f[6])?,
            v: num(f[7])?,
            etc1: num(f[8])?,
            etc2: num(f[9])?,
            gap_pct: num(f[10])?,
            ci_half_pct: if f[11].is_empty() {
                None
            } else {
                Some(num(f[11])?)
            },
            n_reps: if f[12].is_empty() {
                None
            } else {
                Some(f[12].parse().map_err(|e| {
                    Error::Config(format!("bad replication count `{}`: {e}", f[12]))
                })?)
            },
        });
    }
    Ok(out)
}

/// Writes pivot tables as CSV.
pub fn write_pivots<W: Write>(
    pivots: &[PivotTable],
    grand_average: f64,
    out: &mut W,
) -> std::io::Result<()> {
    writeln!(out, "dimension,key,avg_gap_pct,count")?;
    for p in pivots {
        for (key, avg, n) in &p.rows {
            writeln!(out, "{},{},{:.12e},{}", p.dimension, key, avg, n)?;
        }
    }
    writeln!(out, "grand,average,{:.12e},", grand_average)?;
    Ok(())
}

/// Writes box-plot groups as CSV.
pub fn write_boxplots<W: Write>(groups: &[BoxplotGroup], out: &mut W) -> std::io::Result<()> {
    writeln!(
        out,
        "key,count,min,q1,median,q3,max,lo_whisker,hi_whisker,outliers"
    )?;
    for g in groups {
        writeln!(
            out,
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{}",
            g.key,
            g.count,
            g.min,
            g.q1,
            g.median,
            g.q3,
            g.max,
            g.lo_whisker,
            g.hi_whisker,
            g.outliers
                .iter()
                .map(|x| format!("{x:.6e}"))
                .collect::<Vec<_>>()
                .join(";")
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lhs_one_dimension_is_a_permutation() {
        let s = lhs_sample(&[4], 4, 9).unwrap();
        let mut seen: Vec<usize> = s.iter().map(|t| t[0]).collect();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn lhs_latin_square_property() {
        let s = lhs_sample(&[10, 10], 10, 3).unwrap();
        for dim in 0..2 {
            let mut seen: Vec<usize> = s.iter().map(|t| t[dim]).collect();
            seen.sort();
            assert_eq!(seen, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn lhs_stratification_cap_holds() {
        let s = lhs_sample(&[3, 5], 11, 123).unwrap();
        for (dim, levels) in [(0usize, 3usize), (1, 5)] {
            let cap = 11usize.div_ceil(levels);
            for level in 0..levels {
                let hits = s.iter().filter(|t| t[dim] == level).count();
                assert!(hits <= cap, "level {level} of dim {dim} hit {hits} > {cap}");
            }
        }
    }

    #[test]
    fn lhs_is_deterministic_in_the_seed() {
        assert_eq!(
            lhs_sample(&[6, 4], 8, 42).unwrap(),
            lhs_sample(&[6, 4], 8, 42).unwrap()
        );
        assert_ne!(
            lhs_sample(&[6, 4], 8, 42).unwrap(),
            lhs_sample(&[6, 4], 8, 43).unwrap()
        );
    }

    #[test]
    fn quantiles_follow_linear_interpolation_rule() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_abs_diff_eq!(quantile(&xs, 0.25), 2.0);
        assert_abs_diff_eq!(quantile(&xs, 0.5), 3.0);
        assert_abs_diff_eq!(quantile(&xs, 0.75), 4.0);
    }

    #[test]
    fn single_record_boxplot_collapses() {
        let rec = GapRecord {
            id: "x".into(),
            pattern1: PatternId::Stat,
            pattern2: PatternId::Stat,
            k: 10.0,
            r: 5.0,
            b: 3.0,
            z: 1.0,
            v: 0.5,
            etc1: 100.0,
            etc2: 100.5,
            gap_pct: 0.5,
            ci_half_pct: None,
            n_reps: None,
        };
        let groups = boxplot_data(&[rec], "pattern1").unwrap();
        assert_eq!(groups.len(), 1);
        let g = &groups[0];
        assert_eq!(g.min, g.q1);
        assert_eq!(g.q1, g.median);
        assert_eq!(g.median, g.q3);
        assert_eq!(g.q3, g.max);
    }

    #[test]
    fn boxplot_group_count_matches_distinct_patterns() {
        let mk = |p: PatternId, gap: f64| GapRecord {
            id: format!("{p}-{gap}"),
            pattern1: p,
            pattern2: PatternId::Stat,
            k: 10.0,
            r: 5.0,
            b: 3.0,
            z: 1.0,
            v: 0.5,
            etc1: 100.0,
            etc2: 100.0 * (1.0 + gap / 100.0),
            gap_pct: gap,
            ci_half_pct: None,
            n_reps: None,
        };
        let records = vec![
            mk(PatternId::Stat, 0.1),
            mk(PatternId::Stat, 0.3),
            mk(PatternId::Lcy, 0.2),
            mk(PatternId::Sin, 0.25),
        ];
        let groups = boxplot_data(&records, "pattern1").unwrap();
        assert_eq!(groups.len(), 3);
    }

    #[test]
    fn records_roundtrip_through_csv() {
        let rec = GapRecord {
            id: "four-period-poisson-T4-s10-LCY1-SIN2-K10-R5-b3-z2-v1".into(),
            pattern1: PatternId::Lcy1,
            pattern2: PatternId::Sin2,
            k: 10.0,
            r: 5.0,
            b: 3.0,
            z: 2.0,
            v: 1.0,
            etc1: 123.456,
            etc2: 123.789,
            gap_pct: 0.2697,
            ci_half_pct: Some(0.09),
            n_reps: Some(4200),
        };
        let mut buf = Vec::new();
        write_records(&[rec.clone()], &mut buf).unwrap();
        let parsed = read_records(&String::from_utf8(buf).unwrap()).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].id, rec.id);
        assert_eq!(parsed[0].n_reps, rec.n_reps);
        assert_abs_diff_eq!(parsed[0].gap_pct, rec.gap_pct, epsilon = 1e-9);
    }

    #[test]
    fn deterministic_tiny_study_gap_is_zero() {
        let mut spec = StudySpec::four_period_default();
        spec.horizon = 2;
        spec.scale = 2.0;
        spec.patterns = vec![PatternId::Stat];
        spec.sampling = Sampling::Full;
        spec.k_grid = vec![10.0];
        spec.r_grid = vec![5.0];
        spec.b_grid = vec![3.0];
        spec.zv_grid = vec![(2.0, 1.0)];
        spec.openings = vec![(0, 0)];
        let result = run_study(&spec, &[]);
        assert!(result.failures.is_empty(), "failures: {:?}", result.failures);
        assert_eq!(result.records.len(), 1);
        assert!(result.records[0].gap_pct.abs() < 1e-7);
    }

    #[test]
    fn study_resume_skips_completed_records() {
        let mut spec = StudySpec::four_period_default();
        spec.horizon = 2;
        spec.scale = 2.0;
        spec.patterns = vec![PatternId::Stat, PatternId::Rand];
        spec.sampling = Sampling::Full;
        spec.k_grid = vec![10.0];
        spec.r_grid = vec![5.0];
        spec.b_grid = vec![3.0];
        spec.zv_grid = vec![(2.0, 1.0)];
        spec.openings = vec![(0, 0)];
        let first = run_study(&spec, &[]);
        let resumed = run_study(&spec, &first.records);
        assert_eq!(first.records, resumed.records);
    }

    #[test]
    fn pivot_averages_recompute_from_raw_records() {
        let mut spec = StudySpec::four_period_default();
        spec.horizon = 2;
        spec.scale = 2.0;
        spec.patterns = vec![PatternId::Stat, PatternId::Rand];
        spec.sampling = Sampling::Full;
        spec.k_grid = vec![10.0, 20.0];
        spec.r_grid = vec![5.0];
        spec.b_grid = vec![3.0];
        spec.zv_grid = vec![(2.0, 1.0)];
        spec.openings = vec![(0, 0)];
        let result = run_study(&spec, &[]);
        for pivot in &result.pivots {
            for (key, avg, n) in &pivot.rows {
                let matching: Vec<f64> = result
                    .records
                    .iter()
                    .filter(|r| match pivot.dimension.as_str() {
                        "pattern1" => r.pattern1.to_string() == *key,
                        "K" => format!("{}", r.k) == *key,
                        "R" => format!("{}", r.r) == *key,
                        "b" => format!("{}", r.b) == *key,
                        _ => false,
                    })
                    .map(|r| r.gap_pct)
                    .collect();
                assert_eq!(matching.len(), *n);
                let recomputed = matching.iter().sum::<f64>() / matching.len() as f64;
                assert_abs_diff_eq!(recomputed, *avg, epsilon = 1e-12);
            }
        }
    }
}
