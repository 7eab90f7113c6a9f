//! Solution-quality metrics built on a ranking of all `2^n` bitstrings.
//!
//! Viable bitstrings (Hamming weight `B`) are ranked first by ascending
//! penalty-free objective, followed by the unviable ones. A measured
//! distribution is then scored by the expected rank `W` (earth-mover work to
//! move all probability onto rank 0) and its normalized complement
//! `η = 1 − W/(2^n − 1)`. Because ranks come from the objective alone, the
//! same distribution scores identically under every constraint scheme.

use serde::{Deserialize, Serialize};

use crate::encoding::CostTable;
use crate::error::{Error, Result};
use crate::simulator::ShotCounts;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMode {
    /// Viable block, then one unviable block.
    #[default]
    TwoSet,
    /// Blocks by `|popcount − B|` = 0, 1, 2, ...
    ByViolationMagnitude,
}

/// `rank_of[l]` is the position of basis index `l` in the ranked sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    pub rank_of: Vec<usize>,
    pub mode: RankingMode,
}

impl Ranking {
    /// Basis indices in rank order (the inverse permutation).
    pub fn sequence(&self) -> Vec<usize> {
        let mut order = vec![0; self.rank_of.len()];
        for (l, &r) in self.rank_of.iter().enumerate() {
            order[r] = l;
        }
        order
    }

    pub fn len(&self) -> usize {
        self.rank_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank_of.is_empty()
    }

    /// `2^n − 1`, the largest rank.
    pub fn max_rank(&self) -> usize {
        self.rank_of.len().saturating_sub(1)
    }
}

/// Ranks every basis index; cost ties fall back to ascending index.
pub fn rank_solutions(table: &CostTable, mode: RankingMode) -> Ranking {
    let budget = table.budget as i64;
    let group = |l: usize| -> u64 {
        let violation = (i64::from(l.count_ones()) - budget).unsigned_abs();
        match mode {
            RankingMode::TwoSet => u64::from(violation != 0),
            RankingMode::ByViolationMagnitude => violation,
        }
    };
    let mut order: Vec<usize> = (0..table.dim()).collect();
    order.sort_by(|&a, &b| {
        group(a)
            .cmp(&group(b))
            .then(table.objective[a].total_cmp(&table.objective[b]))
            .then(a.cmp(&b))
    });
    let mut rank_of = vec![0; order.len()];
    for (r, &l) in order.iter().enumerate() {
        rank_of[l] = r;
    }
    Ranking { rank_of, mode }
}

/// `W = Σ_l rank_of[l]·P(l)`.
pub fn wasserstein_work(dist: &[f64], ranking: &Ranking) -> Result<f64> {
    if dist.len() != ranking.len() {
        return Err(Error::LengthMismatch {
            expected: ranking.len(),
            got: dist.len(),
        });
    }
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::arg("distribution has negative or non-finite entries"));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::Unnormalized(total));
    }
    Ok(dist
        .iter()
        .zip(&ranking.rank_of)
        .map(|(p, &r)| p * r as f64)
        .sum())
}

/// [`wasserstein_work`] of the empirical distribution `counts / shots`.
pub fn wasserstein_work_counts(counts: &ShotCounts, ranking: &Ranking) -> Result<f64> {
    if 1usize << counts.n != ranking.len() {
        return Err(Error::LengthMismatch {
            expected: ranking.len(),
            got: 1 << counts.n,
        });
    }
    wasserstein_work(&counts.distribution(), ranking)
}

/// `η = 1 − W/(2^n − 1)`.
pub fn ncwd(work: f64, n: usize) -> Result<f64> {
    if n == 0 || n >= usize::BITS as usize {
        return Err(Error::arg(format!("register size {n} out of range")));
    }
    let max = ((1u64 << n) - 1) as f64;
    let slack = NORMALIZATION_TOL * max;
    if !work.is_finite() || work < -slack || work > max + slack {
        return Err(Error::arg(format!("work {work} outside [0, {max}]")));
    }
    Ok(1.0 - work.clamp(0.0, max) / max)
}

/// `r = M_p / C(x*)` (absent when `C(x*) = 0`) and the bounded variant
/// `r^b = (M_p − C(x_max)) / (C(x*) − C(x_max))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxRatios {
    pub r: Option<f64>,
    pub r_bounded: f64,
}

impl ApproxRatios {
    pub fn r(&self) -> Result<f64> {
        self.r.ok_or(Error::UndefinedRatio)
    }
}

/// `x*` is the rank-0 bitstring; costs are read from the scheme's table.
pub fn approximation_ratios(m_p: f64, table: &CostTable) -> Result<ApproxRatios> {
    if table.dim() == 0 {
        return Err(Error::arg("empty cost table"));
    }
    let best = rank_solutions(table, RankingMode::TwoSet).sequence()[0];
    let c_best = table.costs[best];
    let c_max = table.costs[table.argmax_cost()];
    if c_best == c_max {
        return Err(Error::DegenerateTable);
    }
    Ok(ApproxRatios {
        r: (c_best != 0.0).then(|| m_p / c_best),
        r_bounded: (m_p - c_max) / (c_best - c_max),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    #[serde(rename = "W")]
    pub work: f64,
    pub eta: f64,
    pub r: Option<f64>,
    pub r_bounded: f64,
    #[serde(rename = "M_p")]
    pub m_p: f64,
}

impl QualityReport {
    /// Scores a distribution; `m_p` is the expectation the optimizer saw.
    pub fn evaluate(dist: &[f64], m_p: f64, table: &CostTable, ranking: &Ranking) -> Result<Self> {
        let work = wasserstein_work(dist, ranking)?;
        let eta = ncwd(work, table.n)?;
        let ratios = approximation_ratios(m_p, table)?;
        Ok(QualityReport {
            work,
            eta,
            r: ratios.r,
            r_bounded: ratios.r_bounded,
            m_p,
        })
    }
}
