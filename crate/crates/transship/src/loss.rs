//! First-order loss function `L(x) = E[max(w - x, 0)]`, its complement
//! `Lhat(x) = E[max(x - w, 0)]`, and the N-region piecewise-linear lower
//! bounds embedded in the static model.

use crate::demand::DiscreteDist;
use crate::{Error, Result};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Distribution handle accepted by the loss machinery. Normal demand stays
/// continuous here; integer lattices go through the discrete arm.
#[derive(Clone, Debug)]
pub enum LossDist {
    Discrete(DiscreteDist),
    Normal { mean: f64, sd: f64 },
}

impl LossDist {
    pub fn mean(&self) -> f64 {
        match self {
            LossDist::Discrete(d) => d.mean(),
            LossDist::Normal { mean, .. } => *mean,
        }
    }
}

/// One evaluation of the loss function and its complement at `x`.
/// `complement - loss = x - E[w]` holds by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEval {
    pub x: f64,
    pub loss: f64,
    pub complement: f64,
}

/// Exact loss and complement at `x`: summation for discrete distributions,
/// the closed form `sd * (pdf(z) - z * (1 - cdf(z)))` for Normal.
pub fn loss_exact(x: f64, dist: &LossDist) -> LossEval {
    let (loss, mean) = match dist {
        LossDist::Discrete(d) => {
            let loss = d
                .iter()
                .map(|(k, p)| (k as f64 - x).max(0.0) * p)
                .sum::<f64>();
            (loss, d.mean())
        }
        LossDist::Normal { mean, sd } => {
            let z = (x - mean) / sd;
            let std = Normal::new(0.0, 1.0).unwrap();
            let loss = sd * (std.pdf(z) - z * (1.0 - std.cdf(z)));
            (loss.max(0.0), *mean)
        }
    };
    LossEval {
        x,
        loss,
        complement: loss + (x - mean),
    }
}

/// A partition of a demand distribution into N adjacent regions with their
/// probabilities and conditional means.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub region_probs: Vec<f64>,
    pub cond_means: Vec<f64>,
}

impl Partition {
    pub fn n_regions(&self) -> usize {
        self.region_probs.len()
    }

    /// Overall mean implied by the partition.
    pub fn mean(&self) -> f64 {
        self.region_probs
            .iter()
            .zip(&self.cond_means)
            .map(|(p, m)| p * m)
            .sum()
    }

    fn validate(&self, expected_mean: f64) -> Result<()> {
        let total: f64 = self.region_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "partition probabilities sum to {total}, expected 1"
            )));
        }
        if self
            .cond_means
            .windows(2)
            .any(|w| !(w[0] < w[1]))
        {
            return Err(Error::Domain(
                "partition conditional means must be strictly increasing".into(),
            ));
        }
        if (self.mean() - expected_mean).abs() > 1e-6 {
            return Err(Error::Domain(format!(
                "partition mean {} drifts from distribution mean {expected_mean}",
                self.mean()
            )));
        }
        Ok(())
    }
}

/// Builds an N-region partition.
///
/// Normal distributions use minimax-optimal standard-normal breakpoints
/// (the shipped table for N = 10, the internal equalizer otherwise), scaled
/// by mean and sd. Discrete distributions use equal-probability regions with
/// atoms split exactly across quantile boundaries.
pub fn build_partition(dist: &LossDist, n_regions: usize) -> Result<Partition> {
    if n_regions == 0 {
        return Err(Error::Domain("partition needs at least one region".into()));
    }
    if n_regions == 1 {
        return Ok(Partition {
            region_probs: vec![1.0],
            cond_means: vec![dist.mean()],
        });
    }
    let part = match dist {
        LossDist::Normal { mean, sd } => {
            let breaks = standard_normal_breakpoints(n_regions);
            let std = Normal::new(0.0, 1.0).unwrap();
            let mut probs = Vec::with_capacity(n_regions);
            let mut means = Vec::with_capacity(n_regions);
            for k in 0..n_regions {
                let lo = if k == 0 { f64::NEG_INFINITY } else { breaks[k - 1] };
                let hi = if k == n_regions - 1 {
                    f64::INFINITY
                } else {
                    breaks[k]
                };
                let p_lo = if lo.is_finite() { std.cdf(lo) } else { 0.0 };
                let p_hi = if hi.is_finite() { std.cdf(hi) } else { 1.0 };
                let p = p_hi - p_lo;
                let pdf_lo = if lo.is_finite() { std.pdf(lo) } else { 0.0 };
                let pdf_hi = if hi.is_finite() { std.pdf(hi) } else { 0.0 };
                let cond_z = (pdf_lo - pdf_hi) / p;
                probs.push(p);
                means.push(mean + sd * cond_z);
            }
            Partition {
                region_probs: probs,
                cond_means: means,
            }
        }
        LossDist::Discrete(d) => {
            let atoms = d.iter().filter(|&(_, p)| p > 0.0).count();
            if n_regions > atoms {
                return Err(Error::Domain(format!(
                    "{n_regions} regions exceed the {atoms}-atom support"
                )));
            }
            let share = 1.0 / n_regions as f64;
            let probs = vec![share; n_regions];
            let mut means = vec![0.0; n_regions];
            let mut region = 0usize;
            let mut room = share; // mass the current region still absorbs
            for (value, p) in d.iter() {
                let mut left = p;
                while left > 0.0 && region < n_regions {
                    let take = left.min(room);
                    means[region] += take * value as f64;
                    room -= take;
                    left -= take;
                    // Advance on exhaustion; the epsilon absorbs float dust so
                    // the last region is never left starved.
                    if room <= 1e-12 {
                        region += 1;
                        room = share;
                    }
                }
                if left > 0.0 {
                    // Residual rounding mass goes to the last region.
                    means[n_regions - 1] += left * value as f64;
                }
            }
            for m in &mut means {
                *m /= share;
            }
            // A heavy atom can fill several adjacent regions with identical
            // conditional means; the minorant line between two such regions
            // is the average of its neighbours and never improves the bound,
            // so merging them is lossless and restores strict monotonicity.
            let mut merged_p: Vec<f64> = Vec::with_capacity(n_regions);
            let mut merged_m: Vec<f64> = Vec::with_capacity(n_regions);
            for (p, m) in probs.into_iter().zip(means) {
                match (merged_p.last_mut(), merged_m.last_mut()) {
                    (Some(lp), Some(lm))
                        if (m - *lm).abs() <= 1e-9 * lm.abs().max(1.0) =>
                    {
                        *lm = (*lp * *lm + p * m) / (*lp + p);
                        *lp += p;
                    }
                    _ => {
                        merged_p.push(p);
                        merged_m.push(m);
                    }
                }
            }
            // Absorb rounding drift so that sum(p * cond_mean) == mean holds.
            let drift =
                d.mean() - merged_p.iter().zip(&merged_m).map(|(p, m)| p * m).sum::<f64>();
            let last = merged_m.len() - 1;
            merged_m[last] += drift / merged_p[last];
            Partition {
                region_probs: merged_p,
                cond_means: merged_m,
            }
        }
    };
    part.validate(dist.mean())?;
    Ok(part)
}

/// An affine function `slope * x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl Affine {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// The `N + 1` affine minorants of the complement (`H_i`) and of the loss
/// (`B_i = H_i(x) - x + mean`) induced by a partition.
#[derive(Clone, Debug)]
pub struct PiecewiseBounds {
    pub complement: Vec<Affine>,
    pub loss: Vec<Affine>,
}

impl PiecewiseBounds {
    pub fn max_complement_at(&self, x: f64) -> f64 {
        self.complement
            .iter()
            .map(|a| a.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_loss_at(&self, x: f64) -> f64 {
        self.loss
            .iter()
            .map(|a| a.eval(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Builds the minorant families `H_i(x) = x * sum_{k<=i} p_k - sum_{k<=i}
/// p_k E[w|k]` and `B_i(x) = H_i(x) - x + mean` for `i = 0..N`. The max over
/// i lower-bounds the exact complement (resp. loss) everywhere.
pub fn piecewise_lower_bounds(part: &Partition, mean: f64) -> PiecewiseBounds {
    let n = part.n_regions();
    let mut complement = Vec::with_capacity(n + 1);
    let mut loss = Vec::with_capacity(n + 1);
    let mut prob_prefix = 0.0;
    let mut mass_prefix = 0.0;
    for i in 0..=n {
        if i > 0 {
            prob_prefix += part.region_probs[i - 1];
            mass_prefix += part.region_probs[i - 1] * part.cond_means[i - 1];
        }
        complement.push(Affine {
            slope: prob_prefix,
            intercept: -mass_prefix,
        });
        loss.push(Affine {
            slope: prob_prefix - 1.0,
            intercept: mean - mass_prefix,
        });
    }
    PiecewiseBounds { complement, loss }
}

/// Minimax-optimal breakpoints for the standard normal with N = 10 regions,
/// produced by [`optimal_standard_normal_breakpoints`] and shipped as a
/// constant so model building never re-runs the search.
pub const N10_STANDARD_NORMAL_BREAKPOINTS: [f64; 9] = [
    -1.7272533770852094,
    -1.1469713367244183,
    -0.7178007360705669,
    -0.3474617489391895,
    0.0,
    0.3474617489391832,
    0.7178007360705565,
    1.1469713367244037,
    1.7272533770851908,
];

fn breakpoint_cache() -> &'static Mutex<HashMap<usize, Vec<f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Vec<f64>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Breakpoints for an N-region partition of the standard normal: the shipped
/// table for N = 10, otherwise the equalizer output (memoized per N).
pub fn standard_normal_breakpoints(n_regions: usize) -> Vec<f64> {
    if n_regions == 10 {
        return N10_STANDARD_NORMAL_BREAKPOINTS.to_vec();
    }
    let mut cache = breakpoint_cache().lock().unwrap();
    cache
        .entry(n_regions)
        .or_insert_with(|| optimal_standard_normal_breakpoints(n_regions))
        .clone()
}

/// Tangent line to the standard-normal complement loss at abscissa `b`:
/// `Lhat(x) = pdf(x) + x cdf(x)` has derivative `cdf(x)`, so the tangent is
/// `cdf(b) x + pdf(b)`. The partition minorant `H_i` with breakpoint `b_i`
/// is exactly this tangent, which reduces minimax partitioning to minimax
/// tangent placement on a convex function.
fn tangent(b: f64) -> Affine {
    let std = Normal::new(0.0, 1.0).unwrap();
    Affine {
        slope: std.cdf(b),
        intercept: std.pdf(b),
    }
}

fn complement_std(x: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).unwrap();
    std.pdf(x) + x * std.cdf(x)
}

/// Gap between the complement and the upper intersection of the tangents at
/// `a < b`; this is the largest error of the envelope on `[a, b]`.
fn pair_gap(a: Affine, b: Affine) -> f64 {
    if (b.slope - a.slope).abs() < 1e-300 {
        return 0.0;
    }
    let x = (a.intercept - b.intercept) / (b.slope - a.slope);
    complement_std(x) - a.eval(x)
}

/// Computes minimax breakpoints by equalizing the envelope error across all
/// N tangent gaps: bisection on the common error, with a greedy forward
/// placement of each breakpoint for a candidate error level.
pub fn optimal_standard_normal_breakpoints(n_regions: usize) -> Vec<f64> {
    assert!(n_regions >= 2);
    const SPAN: f64 = 9.0;
    let left_asymptote = Affine {
        slope: 0.0,
        intercept: 0.0,
    };
    let right_asymptote = Affine {
        slope: 1.0,
        intercept: 0.0,
    };

    // Given the previous tangent and a target gap, place the next breakpoint.
    let place_next = |prev: Affine, target: f64, lo_start: f64| -> Option<f64> {
        let mut lo = lo_start;
        let mut hi = SPAN;
        if pair_gap(prev, tangent(hi)) < target {
            return None; // even the widest region stays under the target
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pair_gap(prev, tangent(mid)) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    };

    // The common error is bounded by the single-region envelope error.
    let mut err_lo = 0.0;
    let mut err_hi = pair_gap(left_asymptote, right_asymptote);
    let mut best = Vec::new();
    for _ in 0..200 {
        let target = 0.5 * (err_lo + err_hi);
        let mut breaks = Vec::with_capacity(n_regions - 1);
        let mut prev = left_asymptote;
        let mut cursor = -SPAN;
        let mut feasible = true;
        for _ in 0..n_regions - 1 {
            match place_next(prev, target, cursor) {
                Some(b) => {
                    prev = tangent(b);
                    cursor = b;
                    breaks.push(b);
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        let final_gap = if feasible {
            pair_gap(prev, right_asymptote)
        } else {
            0.0
        };
        if !feasible || final_gap < target {
            // target too large: the last region undershoots
            err_hi = target;
            if feasible {
                best = breaks;
            }
        } else {
            err_lo = target;
            best = breaks;
        }
    }
    best
}

/// Largest envelope error of the N-region minorants against the exact
/// complement of the standard normal, evaluated analytically at the tangent
/// intersections.
pub fn standard_normal_max_gap(breaks: &[f64]) -> f64 {
    let mut prev = Affine {
        slope: 0.0,
        intercept: 0.0,
    };
    let mut worst: f64 = 0.0;
    for &b in breaks {
        let t = tangent(b);
        worst = worst.max(pair_gap(prev, t));
        prev = t;
    }
    worst.max(pair_gap(
        prev,
        Affine {
            slope: 1.0,
            intercept: 0.0,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::{DemandSpec, DiscreteDist};
    use approx::assert_abs_diff_eq;

    #[test]
    fn loss_at_zero_equals_mean_for_poisson() {
        let d = DemandSpec::poisson(vec![3.0]).unwrap().discretize(1, 1e-12).unwrap();
        let eval = loss_exact(0.0, &LossDist::Discrete(d));
        assert_abs_diff_eq!(eval.loss, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn standard_normal_loss_at_zero_is_pdf_at_zero() {
        let eval = loss_exact(0.0, &LossDist::Normal { mean: 0.0, sd: 1.0 });
        assert_abs_diff_eq!(eval.loss, 0.39894, epsilon = 1e-5);
        // numerical-integration cross check
        let mut acc = 0.0;
        let n = 400_000;
        let std = Normal::new(0.0, 1.0).unwrap();
        for i in 0..n {
            let w = -8.0 + 16.0 * (i as f64 + 0.5) / n as f64;
            acc += w.max(0.0) * std.pdf(w) * (16.0 / n as f64);
        }
        assert_abs_diff_eq!(eval.loss, acc, epsilon = 1e-5);
    }

    #[test]
    fn point_mass_has_zero_loss_at_itself() {
        let d = DiscreteDist::point_mass(7);
        let eval = loss_exact(7.0, &LossDist::Discrete(d));
        assert_eq!(eval.loss, 0.0);
        assert_eq!(eval.complement, 0.0);
    }

    #[test]
    fn complement_identity_holds_everywhere() {
        let dists = [
            LossDist::Normal { mean: 4.0, sd: 0.7 },
            LossDist::Discrete(
                DemandSpec::poisson(vec![2.5]).unwrap().discretize(1, 1e-9).unwrap(),
            ),
        ];
        for dist in &dists {
            let mean = dist.mean();
            for i in 0..100 {
                let x = -2.0 + 0.12 * i as f64;
                let e = loss_exact(x, dist);
                assert_abs_diff_eq!(e.complement - e.loss, x - mean, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn loss_and_complement_are_convex() {
        for dist in [
            LossDist::Normal { mean: 5.0, sd: 0.5 },
            LossDist::Discrete(
                DemandSpec::poisson(vec![4.0]).unwrap().discretize(1, 1e-10).unwrap(),
            ),
        ] {
            let evals: Vec<LossEval> = (0..200)
                .map(|i| loss_exact(-1.0 + 0.06 * i as f64, &dist))
                .collect();
            for w in evals.windows(3) {
                assert!(w[0].loss - 2.0 * w[1].loss + w[2].loss >= -1e-9);
                assert!(w[0].complement - 2.0 * w[1].complement + w[2].complement >= -1e-9);
            }
        }
    }

    #[test]
    fn normal_two_region_partition_is_symmetric() {
        let part = build_partition(&LossDist::Normal { mean: 0.0, sd: 1.0 }, 2).unwrap();
        assert_abs_diff_eq!(part.region_probs[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(part.cond_means[0], -0.79788, epsilon = 1e-4);
        assert_abs_diff_eq!(part.cond_means[1], 0.79788, epsilon = 1e-4);
    }

    #[test]
    fn discrete_equal_probability_partition() {
        let d = DiscreteDist::from_pmf(0, vec![0.25; 4]).unwrap();
        let part = build_partition(&LossDist::Discrete(d), 2).unwrap();
        assert_eq!(part.region_probs, vec![0.5, 0.5]);
        assert_abs_diff_eq!(part.cond_means[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(part.cond_means[1], 2.5, epsilon = 1e-9);
    }

    #[test]
    fn single_region_partition_is_the_mean() {
        let dist = LossDist::Normal { mean: 6.0, sd: 1.2 };
        let part = build_partition(&dist, 1).unwrap();
        assert_eq!(part.region_probs, vec![1.0]);
        assert_abs_diff_eq!(part.cond_means[0], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn too_many_regions_for_discrete_support_rejected() {
        let d = DiscreteDist::point_mass(3);
        assert!(build_partition(&LossDist::Discrete(d), 2).is_err());
    }

    #[test]
    fn trivial_minorants_at_prefix_zero() {
        let part = build_partition(&LossDist::Normal { mean: 3.0, sd: 1.0 }, 2).unwrap();
        let bounds = piecewise_lower_bounds(&part, 3.0);
        assert_eq!(bounds.complement[0].eval(11.7), 0.0);
        assert_abs_diff_eq!(bounds.loss[0].eval(1.0), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn minorant_value_matches_hand_computation() {
        let part = build_partition(&LossDist::Normal { mean: 0.0, sd: 1.0 }, 2).unwrap();
        let bounds = piecewise_lower_bounds(&part, 0.0);
        // H_1(0) = 0 * 0.5 - 0.5 * (-0.79788) = 0.39894 = exact complement at 0
        assert_abs_diff_eq!(bounds.complement[1].eval(0.0), 0.39894, epsilon = 1e-4);
        let exact = loss_exact(0.0, &LossDist::Normal { mean: 0.0, sd: 1.0 });
        assert_abs_diff_eq!(bounds.max_complement_at(0.0), exact.complement, epsilon = 1e-9);
    }

    #[test]
    fn sandwich_and_monotone_refinement() {
        for dist in [
            LossDist::Normal { mean: 10.0, sd: 1.0 },
            LossDist::Discrete(
                DemandSpec::poisson(vec![8.0]).unwrap().discretize(1, 1e-9).unwrap(),
            ),
        ] {
            let mean = dist.mean();
            let (lo, hi) = match &dist {
                LossDist::Normal { mean, sd } => (mean - 6.0 * sd, mean + 6.0 * sd),
                LossDist::Discrete(d) => (d.support_min as f64, d.support_max() as f64),
            };
            let grid: Vec<f64> = (0..1000)
                .map(|i| lo + (hi - lo) * i as f64 / 999.0)
                .collect();
            let mut prev_gap = f64::INFINITY;
            for n in [2usize, 4, 8, 16] {
                let part = build_partition(&dist, n).unwrap();
                let bounds = piecewise_lower_bounds(&part, mean);
                let mut max_gap: f64 = 0.0;
                for &x in &grid {
                    let exact = loss_exact(x, &dist);
                    let bc = bounds.max_complement_at(x);
                    let bl = bounds.max_loss_at(x);
                    assert!(bc <= exact.complement + 1e-9, "complement violated at {x}");
                    assert!(bl <= exact.loss + 1e-9, "loss violated at {x}");
                    max_gap = max_gap.max(exact.complement - bc);
                }
                assert!(
                    max_gap <= prev_gap + 1e-12,
                    "gap must not grow as regions double"
                );
                prev_gap = max_gap;
            }
        }
    }

    #[test]
    fn shipped_n10_table_matches_equalizer() {
        let computed = optimal_standard_normal_breakpoints(10);
        assert_eq!(computed.len(), 9);
        for (a, b) in computed.iter().zip(N10_STANDARD_NORMAL_BREAKPOINTS) {
            assert_abs_diff_eq!(a, &b, epsilon = 1e-6);
        }
        // The equalized table beats the naive equal-probability partition.
        let std = Normal::new(0.0, 1.0).unwrap();
        let equal_prob: Vec<f64> = (1..10).map(|k| std.inverse_cdf(k as f64 / 10.0)).collect();
        assert!(
            standard_normal_max_gap(&N10_STANDARD_NORMAL_BREAKPOINTS)
                < standard_normal_max_gap(&equal_prob)
        );
    }
}
