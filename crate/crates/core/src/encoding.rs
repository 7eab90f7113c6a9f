//! QUBO and Ising encodings of the buy/hold objective, penalty sizing, and
//! the exhaustive cost table every other module leans on.
//!
//! Basis index convention, used crate-wide: bitstring `x` maps to
//! `l = Σ x_i·2^i`, so asset/qubit 0 is the least-significant bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::ProblemInstance;

/// Largest register the exhaustive cost table will enumerate.
pub const MAX_TABLE_QUBITS: usize = 26;

const ALPHA_MARGIN: f64 = 1e-6;

/// How the budget constraint is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintScheme {
    /// Quadratic penalty `α(Σx_i − B)²` added to the cost.
    Soft { alpha: f64 },
    /// Dicke-state start with the complete-graph XY mixer.
    HardDickeComplete,
    /// Random weight-`B` basis state start with the ring XY mixer.
    HardHammingRing { init_seed: u64 },
}

impl ConstraintScheme {
    pub fn penalty(&self) -> f64 {
        match *self {
            ConstraintScheme::Soft { alpha } => alpha,
            _ => 0.0,
        }
    }

    pub fn is_hard(&self) -> bool {
        !matches!(self, ConstraintScheme::Soft { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ConstraintScheme::Soft { alpha } if !(alpha.is_finite() && alpha >= 0.0) => {
                Err(Error::arg(format!("penalty alpha must be finite and >= 0, got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether two schemes build the same cost Hamiltonian family.
    pub(crate) fn same_family(&self, other: &ConstraintScheme) -> bool {
        match (self, other) {
            (ConstraintScheme::Soft { alpha: a }, ConstraintScheme::Soft { alpha: b }) => a == b,
            (ConstraintScheme::HardDickeComplete, ConstraintScheme::HardDickeComplete) => true,
            (ConstraintScheme::HardHammingRing { .. }, ConstraintScheme::HardHammingRing { .. }) => {
                true
            }
            _ => false,
        }
    }
}

/// `Σ_{j≤i} Q_ij x_i x_j + offset`, with the diagonal holding linear terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qubo {
    pub n: usize,
    /// Row `i` stores `Q_i0 ..= Q_ii`; entries above the diagonal stay zero.
    pub q: Vec<Vec<f64>>,
    pub offset: f64,
}

impl Qubo {
    pub fn zeros(n: usize) -> Self {
        Qubo {
            n,
            q: vec![vec![0.0; n]; n],
            offset: 0.0,
        }
    }

    pub fn evaluate(&self, index: usize) -> f64 {
        let mut total = self.offset;
        for i in (0..self.n).filter(|i| index >> i & 1 == 1) {
            for j in (0..=i).filter(|j| index >> j & 1 == 1) {
                total += self.q[i][j];
            }
        }
        total
    }
}

/// `Σ_{i<j} J_ij s_i s_j + Σ h_i s_i + c` over spins `s_i ∈ {−1, +1}`,
/// with bit 1 ↔ spin +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ising {
    pub n: usize,
    /// Strictly upper triangular: only `j[i][k]` with `i < k` is used.
    pub j: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub c: f64,
}

impl Ising {
    pub fn evaluate(&self, index: usize) -> f64 {
        let spin = |i: usize| if index >> i & 1 == 1 { 1.0 } else { -1.0 };
        let mut total = self.c;
        for i in 0..self.n {
            total += self.h[i] * spin(i);
            for k in i + 1..self.n {
                total += self.j[i][k] * spin(i) * spin(k);
            }
        }
        total
    }
}

pub fn build_qubo(instance: &ProblemInstance, scheme: &ConstraintScheme) -> Result<Qubo> {
    instance.validate()?;
    scheme.validate()?;
    let n = instance.n;
    let lam = instance.lambda;
    let mut qubo = Qubo::zeros(n);
    for i in 0..n {
        qubo.q[i][i] = (1.0 - lam) * instance.sigma[i][i] - lam * instance.mu[i];
        for j in 0..i {
            qubo.q[i][j] = 2.0 * (1.0 - lam) * instance.sigma[i][j];
        }
    }
    if let ConstraintScheme::Soft { alpha } = *scheme {
        let b = instance.budget as f64;
        for i in 0..n {
            qubo.q[i][i] += alpha * (1.0 - 2.0 * b);
            for j in 0..i {
                qubo.q[i][j] += 2.0 * alpha;
            }
        }
        qubo.offset += alpha * b * b;
    }
    Ok(qubo)
}

/// Substitutes `x_i = (s_i + 1)/2` into the QUBO.
pub fn qubo_to_ising(qubo: &Qubo) -> Ising {
    let n = qubo.n;
    let mut ising = Ising {
        n,
        j: vec![vec![0.0; n]; n],
        h: vec![0.0; n],
        c: qubo.offset,
    };
    for i in 0..n {
        let linear = qubo.q[i][i];
        ising.h[i] += linear / 2.0;
        ising.c += linear / 2.0;
        for k in 0..i {
            let pair = qubo.q[i][k] / 4.0;
            ising.j[k][i] += pair;
            ising.h[i] += pair;
            ising.h[k] += pair;
            ising.c += pair;
        }
    }
    ising
}

/// Smallest penalty that puts every unviable bitstring strictly above the
/// worst viable one.
///
/// The raw threshold is `max_{x unviable} (C_max^v − C(x)) / (|x| − B)²`.
/// A positive threshold is inflated by a relative `1e-6`; a threshold of
/// exactly zero (ties at α = 0) becomes `1e-6`; a negative one means the
/// ordering already holds and `0` is returned.
pub fn alpha_min(instance: &ProblemInstance) -> Result<f64> {
    instance.validate()?;
    let (n, budget) = (instance.n, instance.budget);
    if budget == 0 || budget >= n {
        return Err(Error::NoViableSolutions { n, budget });
    }
    let objective: Vec<f64> = (0..1usize << n).map(|l| instance.cost_of_index(l)).collect();
    let worst_viable = objective
        .iter()
        .enumerate()
        .filter(|(l, _)| l.count_ones() as usize == budget)
        .map(|(_, &c)| c)
        .fold(f64::NEG_INFINITY, f64::max);
    let raw = objective
        .iter()
        .enumerate()
        .filter(|(l, _)| l.count_ones() as usize != budget)
        .map(|(l, &c)| (worst_viable - c) / violation(l, budget))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(if raw > 0.0 {
        raw * (1.0 + ALPHA_MARGIN)
    } else if raw == 0.0 {
        ALPHA_MARGIN
    } else {
        0.0
    })
}

/// `(popcount(l) − B)²`.
pub(crate) fn violation(l: usize, budget: usize) -> f64 {
    let d = l.count_ones() as f64 - budget as f64;
    d * d
}

/// Brute-forced costs of all `2^n` bitstrings under one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCostTable")]
pub struct CostTable {
    pub n: usize,
    #[serde(rename = "B")]
    pub budget: usize,
    /// Diagonal of the cost Hamiltonian: Markowitz cost plus any penalty.
    pub costs: Vec<f64>,
    pub viable: Vec<bool>,
    /// Penalty-free Markowitz cost; solution ranking is built from this.
    pub objective: Vec<f64>,
    pub scheme: ConstraintScheme,
}

#[derive(Deserialize)]
struct RawCostTable {
    n: usize,
    #[serde(rename = "B")]
    budget: usize,
    costs: Vec<f64>,
    viable: Vec<bool>,
    #[serde(default)]
    objective: Option<Vec<f64>>,
    #[serde(default)]
    scheme: Option<ConstraintScheme>,
}

impl TryFrom<RawCostTable> for CostTable {
    type Error = Error;

    fn try_from(raw: RawCostTable) -> Result<Self> {
        let table = CostTable {
            n: raw.n,
            budget: raw.budget,
            objective: raw.objective.unwrap_or_else(|| raw.costs.clone()),
            costs: raw.costs,
            viable: raw.viable,
            scheme: raw.scheme.unwrap_or(ConstraintScheme::Soft { alpha: 0.0 }),
        };
        table.validate()?;
        Ok(table)
    }
}

impl CostTable {
    /// Builds a table straight from cost values; viability follows popcount.
    pub fn from_costs(n: usize, budget: usize, costs: Vec<f64>) -> Result<Self> {
        if n > MAX_TABLE_QUBITS {
            return Err(Error::arg(format!("n = {n} exceeds the {MAX_TABLE_QUBITS}-qubit guard")));
        }
        let table = CostTable {
            n,
            budget,
            viable: (0..1usize << n).map(|l| l.count_ones() as usize == budget).collect(),
            objective: costs.clone(),
            costs,
            scheme: ConstraintScheme::HardDickeComplete,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n > MAX_TABLE_QUBITS {
            return Err(Error::arg(format!("n = {} exceeds the qubit guard", self.n)));
        }
        let dim = 1usize << self.n;
        for (name, len) in [
            ("costs", self.costs.len()),
            ("viable", self.viable.len()),
            ("objective", self.objective.len()),
        ] {
            if len != dim {
                return Err(Error::arg(format!("{name} has {len} entries, expected {dim}")));
            }
        }
        if self.costs.iter().chain(&self.objective).any(|c| !c.is_finite()) {
            return Err(Error::arg("cost table holds non-finite values"));
        }
        if let Some(l) = (0..dim).find(|&l| self.viable[l] != (l.count_ones() as usize == self.budget)) {
            return Err(Error::arg(format!("viable flag at index {l} disagrees with budget")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.costs.len()
    }

    pub fn viable_count(&self) -> usize {
        self.viable.iter().filter(|&&v| v).count()
    }

    /// Lowest-objective viable index (ties to the lower index).
    pub fn best_viable(&self) -> Option<usize> {
        (0..self.dim())
            .filter(|&l| self.viable[l])
            .min_by(|&a, &b| self.objective[a].total_cmp(&self.objective[b]).then(a.cmp(&b)))
    }

    /// Index with the largest cost-Hamiltonian value.
    pub fn argmax_cost(&self) -> usize {
        (0..self.dim())
            .max_by(|&a, &b| self.costs[a].total_cmp(&self.costs[b]).then(b.cmp(&a)))
            .unwrap_or(0)
    }

    /// `{n, B, costs, viable, objective, scheme}` as JSON.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Exhaustive table: `costs[l] = C(x_l) + α·(|x_l| − B)²` (α = 0 for hard
/// schemes).
pub fn cost_table(instance: &ProblemInstance, scheme: &ConstraintScheme) -> Result<CostTable> {
    instance.validate()?;
    scheme.validate()?;
    let n = instance.n;
    if n > MAX_TABLE_QUBITS {
        return Err(Error::arg(format!("n = {n} exceeds the {MAX_TABLE_QUBITS}-qubit guard")));
    }
    let budget = instance.budget;
    let alpha = scheme.penalty();
    let objective: Vec<f64> = (0..1usize << n)
        .into_par_iter()
        .map(|l| instance.cost_of_index(l))
        .collect();
    let costs = objective
        .iter()
        .enumerate()
        .map(|(l, &c)| c + alpha * violation(l, budget))
        .collect();
    Ok(CostTable {
        n,
        budget,
        costs,
        viable: (0..1usize << n).map(|l| l.count_ones() as usize == budget).collect(),
        objective,
        scheme: *scheme,
    })
}
