//! Dense statevector simulation of the alternating-operator ansatz.
//!
//! Amplitudes are indexed with the crate-wide convention (qubit `i` is bit
//! `i` of the basis index). Every operation mutates a [`Statevector`] in
//! place and is exactly unitary; Trotter error in the XY mixers comes only
//! from the ordering of non-commuting edges.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{ConstraintScheme, CostTable, MAX_TABLE_QUBITS};
use crate::error::{Error, Result};

pub const DEFAULT_SHOTS: u64 = 2048;
pub const DEFAULT_TROTTER_EPS: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// Computational basis state `|l⟩`.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_register(n)?;
        if index >> n != 0 {
            return Err(Error::arg(format!("basis index {index} out of range for {n} qubits")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n, amps })
    }

    /// Wraps raw amplitudes, renormalizing them.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::arg(format!("amplitude count {dim} is not a power of two")));
        }
        let n = dim.trailing_zeros() as usize;
        check_register(n)?;
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::arg("amplitudes have zero or non-finite norm"));
        }
        Ok(Statevector {
            n,
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Statevector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Debug dump as a JSON list of `[re, im]` pairs.
    pub fn to_json(&self) -> Result<String> {
        let pairs: Vec<[f64; 2]> = self.amps.iter().map(|a| [a.re, a.im]).collect();
        Ok(serde_json::to_string(&pairs)?)
    }
}

fn check_register(n: usize) -> Result<()> {
    if n == 0 || n > MAX_TABLE_QUBITS {
        return Err(Error::arg(format!("register size {n} outside 1..={MAX_TABLE_QUBITS}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// `|+⟩^⊗n`.
    Plus,
    /// Equal superposition of all weight-`budget` basis states.
    Dicke { budget: usize },
    /// One weight-`budget` basis state chosen uniformly from `seed`.
    HammingBasis { budget: usize, seed: u64 },
}

pub fn init_state(n: usize, kind: InitKind) -> Result<Statevector> {
    check_register(n)?;
    let dim = 1usize << n;
    let check_budget = |budget: usize| {
        if budget == 0 || budget >= n {
            Err(Error::arg(format!("budget {budget} must lie strictly between 0 and {n}")))
        } else {
            Ok(())
        }
    };
    match kind {
        InitKind::Plus => {
            let a = Complex64::new((dim as f64).sqrt().recip(), 0.0);
            Ok(Statevector {
                n,
                amps: vec![a; dim],
            })
        }
        InitKind::Dicke { budget } => {
            check_budget(budget)?;
            let weight = |l: usize| l.count_ones() as usize == budget;
            let count = (0..dim).filter(|&l| weight(l)).count();
            let a = Complex64::new((count as f64).sqrt().recip(), 0.0);
            let zero = Complex64::new(0.0, 0.0);
            Ok(Statevector {
                n,
                amps: (0..dim).map(|l| if weight(l) { a } else { zero }).collect(),
            })
        }
        InitKind::HammingBasis { budget, seed } => {
            check_budget(budget)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let index = rand::seq::index::sample(&mut rng, n, budget)
                .into_iter()
                .fold(0usize, |acc, q| acc | 1 << q);
            Statevector::basis(n, index)
        }
    }
}

/// Multiplies `amp[l]` by `exp(−iγ·costs[l])`.
pub fn apply_cost_phase(state: &mut Statevector, table: &CostTable, gamma: f64) -> Result<()> {
    check_sizes(state, table)?;
    for (amp, &cost) in state.amps.iter_mut().zip(&table.costs) {
        *amp *= Complex64::from_polar(1.0, -gamma * cost);
    }
    Ok(())
}

/// `∏_j exp(−iβ σ^x_j)`.
pub fn apply_x_mixer(state: &mut Statevector, beta: f64) {
    let (c, s) = (beta.cos(), beta.sin());
    let off = Complex64::new(0.0, -s);
    for q in 0..state.n {
        let mask = 1usize << q;
        for l in (0..state.amps.len()).filter(|l| l & mask == 0) {
            let (a, b) = (state.amps[l], state.amps[l | mask]);
            state.amps[l] = a * c + b * off;
            state.amps[l | mask] = a * off + b * c;
        }
    }
}

/// `exp(−iθ(X_iX_j + Y_iY_j))`, applied exactly.
///
/// On `{|01⟩, |10⟩}` of the pair this is a rotation by `2θ`; `|00⟩` and
/// `|11⟩` are untouched.
pub fn apply_xy_pair(state: &mut Statevector, i: usize, j: usize, theta: f64) -> Result<()> {
    if i == j || i >= state.n || j >= state.n {
        return Err(Error::arg(format!(
            "XY pair ({i}, {j}) invalid for {} qubits",
            state.n
        )));
    }
    let (mi, mj) = (1usize << i, 1usize << j);
    let (c, s) = ((2.0 * theta).cos(), (2.0 * theta).sin());
    let off = Complex64::new(0.0, -s);
    for l in (0..state.amps.len()).filter(|l| l & mi == 0 && l & mj != 0) {
        let partner = l ^ mi ^ mj;
        let (a, b) = (state.amps[l], state.amps[partner]);
        state.amps[l] = a * c + b * off;
        state.amps[partner] = a * off + b * c;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ring,
    Complete,
}

/// Edge order used by the Trotterized mixers: ring edges cyclic from qubit 0,
/// complete-graph edges lexicographic. Two qubits have one edge either way.
pub fn edges(n: usize, topology: Topology) -> Vec<(usize, usize)> {
    match (topology, n) {
        (_, 0 | 1) => Vec::new(),
        (_, 2) => vec![(0, 1)],
        (Topology::Ring, _) => (0..n).map(|i| (i, (i + 1) % n)).collect(),
        (Topology::Complete, _) => (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect(),
    }
}

/// Number of first-order Trotter steps used for mixer angle `beta`.
pub fn trotter_steps(beta: f64, eps: f64) -> usize {
    if beta == 0.0 {
        0
    } else {
        ((beta.abs() / eps).ceil() as usize).max(1)
    }
}

/// First-order Trotterization of `exp(−iβ Σ_edges (XX + YY))`.
pub fn apply_xy_mixer(state: &mut Statevector, topology: Topology, beta: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::arg(format!("Trotter step must be positive, got {eps}")));
    }
    if !beta.is_finite() {
        return Err(Error::arg("mixer angle must be finite"));
    }
    let steps = trotter_steps(beta, eps);
    if steps == 0 {
        return Ok(());
    }
    let theta = beta / steps as f64;
    let edge_list = edges(state.n, topology);
    for _ in 0..steps {
        for &(i, j) in &edge_list {
            apply_xy_pair(state, i, j, theta)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixer {
    X,
    RingXy,
    CompleteXy,
}

/// Order of the two unitaries inside one layer.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerOrder {
    #[default]
    CostThenMixer,
    MixerThenCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzConfig {
    pub n: usize,
    #[serde(rename = "B")]
    pub budget: usize,
    pub scheme: ConstraintScheme,
    pub p: usize,
    pub mixer: Mixer,
    pub trotter_eps: f64,
    #[serde(default)]
    pub layer_order: LayerOrder,
}

impl AnsatzConfig {
    /// Pairs the scheme with its mixer and initial state: soft → X mixer from
    /// `|+⟩`, Dicke → complete-graph XY, Hamming basis → ring XY.
    pub fn new(n: usize, budget: usize, scheme: ConstraintScheme, p: usize) -> Result<Self> {
        let mixer = match scheme {
            ConstraintScheme::Soft { .. } => Mixer::X,
            ConstraintScheme::HardDickeComplete => Mixer::CompleteXy,
            ConstraintScheme::HardHammingRing { .. } => Mixer::RingXy,
        };
        let config = AnsatzConfig {
            n,
            budget,
            scheme,
            p,
            mixer,
            trotter_eps: DEFAULT_TROTTER_EPS,
            layer_order: LayerOrder::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn for_table(table: &CostTable, p: usize) -> Result<Self> {
        Self::new(table.n, table.budget, table.scheme, p)
    }

    pub fn with_trotter_eps(mut self, eps: f64) -> Result<Self> {
        self.trotter_eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_layer_order(mut self, order: LayerOrder) -> Self {
        self.layer_order = order;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_register(self.n)?;
        self.scheme.validate()?;
        if self.p == 0 {
            return Err(Error::arg("depth p must be at least 1"));
        }
        if !(self.trotter_eps > 0.0 && self.trotter_eps.is_finite()) {
            return Err(Error::arg(format!("Trotter step must be positive, got {}", self.trotter_eps)));
        }
        let expected = match self.scheme {
            ConstraintScheme::Soft { .. } => Mixer::X,
            ConstraintScheme::HardDickeComplete => Mixer::CompleteXy,
            ConstraintScheme::HardHammingRing { .. } => Mixer::RingXy,
        };
        if self.mixer != expected {
            return Err(Error::arg(format!(
                "scheme {:?} requires mixer {expected:?}, got {:?}",
                self.scheme, self.mixer
            )));
        }
        if self.scheme.is_hard() && (self.budget == 0 || self.budget >= self.n) {
            return Err(Error::arg(format!(
                "hard constraints need 0 < B < n, got B = {}",
                self.budget
            )));
        }
        Ok(())
    }

    pub fn init_kind(&self) -> InitKind {
        match self.scheme {
            ConstraintScheme::Soft { .. } => InitKind::Plus,
            ConstraintScheme::HardDickeComplete => InitKind::Dicke { budget: self.budget },
            ConstraintScheme::HardHammingRing { init_seed } => InitKind::HammingBasis {
                budget: self.budget,
                seed: init_seed,
            },
        }
    }

    /// Number of variational parameters, `2p`.
    pub fn dim(&self) -> usize {
        2 * self.p
    }
}

/// Layer angles; flattened as `[γ_1..γ_p, β_1..β_p]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl Params {
    pub fn new(gamma: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if gamma.len() != beta.len() || gamma.is_empty() {
            return Err(Error::arg(format!(
                "gamma/beta lengths {} and {} must be equal and nonzero",
                gamma.len(),
                beta.len()
            )));
        }
        if gamma.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(Error::arg("angles must be finite"));
        }
        Ok(Params { gamma, beta })
    }

    pub fn zeros(p: usize) -> Self {
        Params {
            gamma: vec![0.0; p],
            beta: vec![0.0; p],
        }
    }

    pub fn from_flat(x: &[f64]) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::arg(format!("flat parameter vector has odd length {}", x.len())));
        }
        let p = x.len() / 2;
        Self::new(x[..p].to_vec(), x[p..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.gamma.iter().chain(&self.beta).copied().collect()
    }

    pub fn depth(&self) -> usize {
        self.gamma.len()
    }

    /// Appends zero angles up to depth `p`.
    pub fn zero_padded(&self, p: usize) -> Self {
        let mut padded = self.clone();
        padded.gamma.resize(p.max(self.depth()), 0.0);
        padded.beta.resize(p.max(self.depth()), 0.0);
        padded
    }
}

fn check_sizes(state: &Statevector, table: &CostTable) -> Result<()> {
    if table.dim() != state.amps.len() {
        return Err(Error::LengthMismatch {
            expected: state.amps.len(),
            got: table.dim(),
        });
    }
    Ok(())
}

fn apply_mixer(state: &mut Statevector, config: &AnsatzConfig, beta: f64) -> Result<()> {
    match config.mixer {
        Mixer::X => {
            apply_x_mixer(state, beta);
            Ok(())
        }
        Mixer::RingXy => apply_xy_mixer(state, Topology::Ring, beta, config.trotter_eps),
        Mixer::CompleteXy => apply_xy_mixer(state, Topology::Complete, beta, config.trotter_eps),
    }
}

/// Prepares the scheme's initial state and applies `p` layers.
pub fn evolve_ansatz(config: &AnsatzConfig, params: &Params, table: &CostTable) -> Result<Statevector> {
    config.validate()?;
    if table.n != config.n || table.budget != config.budget {
        return Err(Error::ConfigMismatch(format!(
            "table is (n={}, B={}), config is (n={}, B={})",
            table.n, table.budget, config.n, config.budget
        )));
    }
    if !table.scheme.same_family(&config.scheme) {
        return Err(Error::ConfigMismatch(format!(
            "table built for {:?}, config uses {:?}",
            table.scheme, config.scheme
        )));
    }
    if params.gamma.len() != config.p || params.beta.len() != config.p {
        return Err(Error::ConfigMismatch(format!(
            "depth {} config given {} layer angles",
            config.p,
            params.depth()
        )));
    }
    let mut state = init_state(config.n, config.init_kind())?;
    for (&gamma, &beta) in params.gamma.iter().zip(&params.beta) {
        match config.layer_order {
            LayerOrder::CostThenMixer => {
                apply_cost_phase(&mut state, table, gamma)?;
                apply_mixer(&mut state, config, beta)?;
            }
            LayerOrder::MixerThenCost => {
                apply_mixer(&mut state, config, beta)?;
                apply_cost_phase(&mut state, table, gamma)?;
            }
        }
    }
    Ok(state)
}

pub fn probabilities(state: &Statevector) -> Vec<f64> {
    state.amps.iter().map(|a| a.norm_sqr()).collect()
}

/// `Σ_l |amp_l|²·costs[l]`.
pub fn exact_expectation(state: &Statevector, table: &CostTable) -> Result<f64> {
    check_sizes(state, table)?;
    Ok(state
        .amps
        .iter()
        .zip(&table.costs)
        .map(|(a, c)| a.norm_sqr() * c)
        .sum())
}

/// Outcome histogram of a finite number of measurements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub n: usize,
    pub shots: u64,
    pub counts: BTreeMap<usize, u64>,
}

impl ShotCounts {
    /// Empirical distribution over all `2^n` outcomes.
    pub fn distribution(&self) -> Vec<f64> {
        let mut dist = vec![0.0; 1 << self.n];
        for (&l, &c) in &self.counts {
            dist[l] = c as f64 / self.shots as f64;
        }
        dist
    }
}

/// Multinomial sample of `shots` measurements, deterministic in `seed`.
pub fn measure_counts(state: &Statevector, shots: u64, seed: u64) -> Result<ShotCounts> {
    if shots == 0 {
        return Err(Error::arg("shots must be at least 1"));
    }
    let sampler = WeightedIndex::new(probabilities(state))
        .map_err(|e| Error::arg(format!("cannot sample state: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = BTreeMap::new();
    for _ in 0..shots {
        *counts.entry(sampler.sample(&mut rng)).or_insert(0) += 1;
    }
    Ok(ShotCounts {
        n: state.n,
        shots,
        counts,
    })
}

/// `Σ costs[l]·count[l] / shots`.
pub fn estimate_expectation(counts: &ShotCounts, table: &CostTable) -> Result<f64> {
    if counts.n != table.n {
        return Err(Error::LengthMismatch {
            expected: table.n,
            got: counts.n,
        });
    }
    if counts.shots == 0 {
        return Err(Error::arg("counts hold zero shots"));
    }
    let mut total = 0.0;
    for (&l, &c) in &counts.counts {
        let cost = table
            .costs
            .get(l)
            .ok_or_else(|| Error::arg(format!("outcome {l} outside the table")))?;
        total += cost * c as f64;
    }
    Ok(total / counts.shots as f64)
}
