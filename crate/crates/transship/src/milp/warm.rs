//! Depth-first search over binary fixings with a warm-started dual simplex:
//! every child node reuses its parent's tableau and re-optimizes after a
//! right-hand-side flip on that binary's bound row, which typically takes a
//! handful of dual pivots instead of a full solve from scratch.

use super::simplex::EPS;

#[derive(Clone)]
pub(crate) struct WarmTableau {
    pub n: usize,
    pub m: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    /// Next inert spare slot of this tableau (path-local by cloning).
    pub spare_next: usize,
    pub spare_end: usize,
}

pub(crate) enum DualEnd {
    Optimal,
    Infeasible,
    IterLimit,
}

impl WarmTableau {
    /// Builds the master tableau for `min obj . x : rows a.x <= b, x >= 0`
    /// with the all-slack basis. Requires `obj >= 0` so the start is dual
    /// feasible.
    pub fn new(obj: &[f64], rows: &[(Vec<(usize, f64)>, f64)]) -> Self {
        let n = obj.len();
        let m = rows.len();
        let width = n + m + 1;
        let mut cells = vec![0.0; m * width];
        for (i, (terms, rhs)) in rows.iter().enumerate() {
            let base = i * width;
            for &(c, a) in terms {
                cells[base + c] += a;
            }
            cells[base + n + i] = 1.0;
            cells[base + width - 1] = *rhs;
        }
        let mut reduced = vec![0.0; n + m];
        reduced[..n].copy_from_slice(obj);
        WarmTableau {
            n,
            m,
            width,
            cells,
            basis: (n..n + m).collect(),
            reduced,
            spare_next: m,
            spare_end: m,
        }
    }

    /// Declares the trailing `count` rows as inert spare slots.
    pub fn set_spare_block(&mut self, count: usize) {
        self.spare_next = self.m - count;
        self.spare_end = self.m;
    }

    /// Installs a constraint into the next spare slot of this tableau.
    /// Returns false when no slot is left.
    pub fn activate_row(&mut self, terms: &[(usize, f64)], rhs: f64) -> bool {
        if self.spare_next >= self.spare_end {
            return false;
        }
        let slot = self.spare_next;
        self.spare_next += 1;
        self.overwrite_inert_row(slot, terms, rhs);
        true
    }

    fn rhs(&self, r: usize) -> f64 {
        self.cells[r * self.width + self.width - 1]
    }

    /// Shifts the original right-hand side of row `raw_row` by `delta`:
    /// the current rhs column moves by `delta` times the slack column of
    /// that row (which carries the relevant column of the basis inverse).
    pub fn rhs_shift(&mut self, raw_row: usize, delta: f64) {
        let col = self.n + raw_row;
        let w = self.width;
        for r in 0..self.m {
            let factor = self.cells[r * w + col];
            if factor != 0.0 {
                self.cells[r * w + w - 1] += delta * factor;
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let pv = self.cells[row * w + col];
        let (before, rest) = self.cells.split_at_mut(row * w);
        let (prow, after) = rest.split_at_mut(w);
        for x in prow.iter_mut() {
            *x /= pv;
        }
        let eliminate = |target: &mut [f64]| {
            let factor = target[col];
            if factor != 0.0 {
                for (t, p) in target.iter_mut().zip(prow.iter()) {
                    *t -= factor * p;
                }
                target[col] = 0.0;
            }
        };
        for chunk in before.chunks_mut(w) {
            eliminate(chunk);
        }
        for chunk in after.chunks_mut(w) {
            eliminate(chunk);
        }
        let factor = self.reduced[col];
        if factor != 0.0 {
            for (t, p) in self.reduced.iter_mut().zip(prow.iter()) {
                *t -= factor * p;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Dual simplex until primal feasibility (optimal) or proven infeasible.
    pub fn dual_reoptimize(&mut self, max_pivots: usize) -> DualEnd {
        for _ in 0..max_pivots {
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let b = self.rhs(r);
                if b < -EPS && leave.is_none_or(|(_, best)| b < best) {
                    leave = Some((r, b));
                }
            }
            let Some((row, _)) = leave else {
                return DualEnd::Optimal;
            };
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.n + self.m {
                let a = self.cells[row * self.width + j];
                if a < -EPS {
                    let ratio = self.reduced[j] / -a;
                    if enter.is_none_or(|(_, best)| ratio < best - 1e-12) {
                        enter = Some((j, ratio));
                    }
                }
            }
            let Some((col, _)) = enter else {
                return DualEnd::Infeasible;
            };
            self.pivot(row, col);
        }
        DualEnd::IterLimit
    }

    /// Rewrites an inert spare row (all-zero, slack basic) with a real
    /// constraint, expressed in the current basis. The spare row's slack
    /// column is untouched by prior pivots, so elimination of the basic
    /// columns is all that is needed.
    pub fn overwrite_inert_row(&mut self, slot: usize, terms: &[(usize, f64)], rhs: f64) {
        let w = self.width;
        debug_assert_eq!(self.basis[slot], self.n + slot);
        // raw row
        let mut raw = vec![0.0; w];
        for &(c, a) in terms {
            raw[c] += a;
        }
        raw[self.n + slot] = 1.0;
        raw[w - 1] = rhs;
        // eliminate the basic columns
        for r in 0..self.m {
            if r == slot {
                continue;
            }
            let b = self.basis[r];
            let factor = raw[b];
            if factor != 0.0 {
                let row = &self.cells[r * w..(r + 1) * w];
                for (t, p) in raw.iter_mut().zip(row.iter()) {
                    *t -= factor * p;
                }
                raw[b] = 0.0;
            }
        }
        self.cells[slot * w..(slot + 1) * w].copy_from_slice(&raw);
    }

    /// Structural solution values.
    pub fn extract(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n {
                x[b] = self.rhs(r).max(0.0);
            }
        }
        x
    }

    pub fn objective_of(&self, obj: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .filter(|&(_, &b)| b < self.n)
            .map(|(r, &b)| obj[b] * self.rhs(r))
            .sum()
    }
}
