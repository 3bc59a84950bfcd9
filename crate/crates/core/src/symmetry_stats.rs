//! Symmetry statistics computed from residuals.
//!
//! All three statistics are functionals of `Ĝₙ(x) + Ĝₙ(-x) - 1`. The
//! omega-square value uses the ordered-residual form
//! `Σ_t [Ĝₙ(-ε̂_(t)) - (n-t+1)/n]²`, which is normative here; plugging weak
//! EDFs into the integral form gives a slightly different number (it equals
//! the ordered form applied to the negated residuals).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ResidualSet;
use crate::innovation::DistModel;

/// Omega-square symmetry statistic in O(n log n).
pub fn omega_sq(res: &ResidualSet) -> f64 {
    let n = res.len();
    let sorted = res.sorted();
    // integer accumulation keeps the value independent of summation order
    let total: u128 = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let d = res.count_le(-x) as i128 - (n - i) as i128;
            (d * d) as u128
        })
        .sum();
    total as f64 / (n as f64 * n as f64)
}

/// Omega-square by direct O(n²) counting.
///
/// Ranks are recovered by pairwise comparison instead of sorting; tied
/// values share the same `Ĝₙ(-x)`, so the tie order does not matter.
pub fn omega_sq_bruteforce(res: &ResidualSet) -> f64 {
    let v = res.values();
    let n = v.len();
    let mut total: u128 = 0;
    for (i, &x) in v.iter().enumerate() {
        let rank = v
            .iter()
            .enumerate()
            .filter(|&(j, &y)| y < x || (y == x && j < i))
            .count()
            + 1;
        let below_neg = v.iter().filter(|&&y| y <= -x).count();
        let d = below_neg as i128 - (n - rank + 1) as i128;
        total += (d * d) as u128;
    }
    total as f64 / (n as f64 * n as f64)
}

/// `sqrt(n) · sup_x |Ĝₙ(x) + Ĝₙ(-x) - 1|`.
///
/// The function is piecewise constant with breaks at `±ε̂_t`, so the
/// supremum is attained at a break or as a left limit into one.
pub fn d_stat(res: &ResidualSet) -> f64 {
    let n = res.len() as i64;
    let mut worst: i64 = 0;
    for &e in res.values() {
        for b in [e, -e] {
            let at = res.count_le(b) as i64 + res.count_le(-b) as i64 - n;
            let left = res.count_lt(b) as i64 + res.count_le(-b) as i64 - n;
            worst = worst.max(at.abs()).max(left.abs());
        }
    }
    (n as f64).sqrt() * worst as f64 / n as f64
}

/// Cut points `0 = x₀ < x₁ < … < x_{m-1}`; `x_m = ∞` is implicit.
///
/// Cell `j` (1-based) is `B_j⁺ = (x_{j-1}, x_j]` on the right and
/// `B_j⁻ = (-x_j, -x_{j-1}]` on the left, so a zero residual falls in `B₁⁻`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPartition {
    cuts: Vec<f64>,
}

impl CellPartition {
    pub fn new(cuts: Vec<f64>) -> Result<Self> {
        if cuts.first() != Some(&0.0) {
            return Err(Error::InvalidPartition(format!(
                "cuts must start at 0, got {cuts:?}"
            )));
        }
        if cuts.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPartition(format!(
                "cuts must be finite, got {cuts:?}"
            )));
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition(format!(
                "cuts must be strictly increasing, got {cuts:?}"
            )));
        }
        Ok(CellPartition { cuts })
    }

    /// `m` cells of equal null probability `1/(2m)` on each side of zero.
    pub fn equiprobable(dist: &DistModel, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidPartition("m must be >= 1".into()));
        }
        if !dist.is_continuous() || !dist.is_symmetric() {
            return Err(Error::InvalidPartition(format!(
                "equiprobable cells need a continuous symmetric law, got {dist}"
            )));
        }
        let mut cuts = vec![0.0];
        for j in 1..m {
            cuts.push(dist.quantile(0.5 + j as f64 / (2 * m) as f64)?);
        }
        Self::new(cuts)
    }

    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    pub fn m(&self) -> usize {
        self.cuts.len()
    }

    /// Bounds `(x_{j-1}, x_j)` of cell `j` (0-based), with `x_m = ∞`.
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        let hi = self.cuts.get(j + 1).copied().unwrap_or(f64::INFINITY);
        (self.cuts[j], hi)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale must be finite and > 0, got {c}"
            )));
        }
        Self::new(self.cuts.iter().map(|x| x * c).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub nu_plus: Vec<usize>,
    pub nu_minus: Vec<usize>,
    pub n: usize,
}

pub fn cell_counts(res: &ResidualSet, cells: &CellPartition) -> CellCounts {
    let n = res.len();
    let le = |x: f64| -> usize {
        if x == f64::INFINITY {
            n
        } else if x == f64::NEG_INFINITY {
            0
        } else {
            res.count_le(x)
        }
    };
    let (nu_plus, nu_minus) = (0..cells.m())
        .map(|j| {
            let (lo, hi) = cells.bounds(j);
            (le(hi) - le(lo), le(-lo) - le(-hi))
        })
        .unzip();
    CellCounts {
        nu_plus,
        nu_minus,
        n,
    }
}

/// `Σ_j (ν̂_j⁺ - ν̂_j⁻)² / (2 ν̂_j⁺)`; undefined when a positive cell is empty.
pub fn chi_sq(counts: &CellCounts) -> Result<f64> {
    if counts.nu_plus.len() != counts.nu_minus.len() || counts.nu_plus.is_empty() {
        return Err(Error::InvalidParameter(
            "cell count vectors must be non-empty and of equal length".into(),
        ));
    }
    let mut total = 0.0;
    for (j, (&plus, &minus)) in counts.nu_plus.iter().zip(&counts.nu_minus).enumerate() {
        if plus == 0 {
            return Err(Error::EmptyPositiveCell { cell: j + 1 });
        }
        let d = plus as f64 - minus as f64;
        total += d * d / (2.0 * plus as f64);
    }
    Ok(total)
}
