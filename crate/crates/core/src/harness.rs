//! Experiment orchestration: runs, sweeps over the budget, optimizer
//! benchmarks, depth-scaling tables, shot-noise variability, and
//! JSON-lines/CSV persistence.
//!
//! Every run is described by a [`RunSpec`] whose seeds fully determine the
//! outcome, so any [`RunRecord`] can be replayed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::encoding::{alpha_min, cost_table, ConstraintScheme};
use crate::error::{Error, Result};
use crate::optimizers::{derive_seed, random_start, Backend, OptResult, OptimizerKind, QaoaObjective, Termination};
use crate::portfolio::{random_instance, ProblemInstance, RandomInstanceConfig};
use crate::quality::{ncwd, rank_solutions, wasserstein_work, wasserstein_work_counts, QualityReport, RankingMode};
use crate::simulator::{
    evolve_ansatz, measure_counts, probabilities, AnsatzConfig, LayerOrder, Params, DEFAULT_SHOTS,
    DEFAULT_TROTTER_EPS,
};

/// Largest register the sweep and benchmark drivers accept by default.
pub const MAX_SWEEP_QUBITS: usize = 12;

pub const SOFT_FIXED_ALPHA: f64 = 100.0;

/// `n! / (B!·(n−B)!)` through log-gamma, defined for real `B ∈ [0, n]`.
pub fn binomial_gamma(n: f64, b: f64) -> Result<f64> {
    if !(n.is_finite() && b.is_finite()) || n < 0.0 || b < 0.0 || b > n {
        return Err(Error::arg(format!("binomial arguments out of range: n = {n}, B = {b}")));
    }
    Ok((ln_gamma(n + 1.0) - ln_gamma(b + 1.0) - ln_gamma(n - b + 1.0)).exp())
}

/// Least-squares fit of `η̂(B) = −a·C(n, B) + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub n: usize,
    pub a: f64,
    pub c: f64,
    pub residual_rms: f64,
}

impl TrendFit {
    pub fn predict(&self, budget: f64) -> Result<f64> {
        Ok(-self.a * binomial_gamma(self.n as f64, budget)? + self.c)
    }
}

/// Fits `(B, η)` points; needs at least two distinct binomial values.
pub fn fit_binomial_trend(points: &[(f64, f64)], n: usize) -> Result<TrendFit> {
    if points.len() < 2 {
        return Err(Error::arg("trend fit needs at least two points"));
    }
    let mut xs = Vec::with_capacity(points.len());
    for &(b, eta) in points {
        if !eta.is_finite() {
            return Err(Error::arg("trend fit needs finite values"));
        }
        xs.push(binomial_gamma(n as f64, b)?);
    }
    let k = points.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if sxx <= 1e-12 * x_mean.abs().max(1.0).powi(2) {
        return Err(Error::arg("singular trend design: all binomial values are equal"));
    }
    let sxy: f64 = xs.iter().zip(points).map(|(x, p)| (x - x_mean) * (p.1 - y_mean)).sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let sse: f64 = xs
        .iter()
        .zip(points)
        .map(|(x, p)| (p.1 - (slope * x + intercept)).powi(2))
        .sum();
    Ok(TrendFit {
        n,
        a: -slope,
        c: intercept,
        residual_rms: (sse / k).sqrt(),
    })
}

/// Constraint handling chosen per run and resolved against the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeChoice {
    /// Soft penalty at the instance's `α_min`.
    SoftMin,
    /// Soft penalty with `α = 100`.
    #[serde(rename = "soft-100")]
    Soft100,
    DickeComplete,
    /// Ring mixer from a random weight-`B` basis state, redrawn per run.
    HammingRing,
}

impl SchemeChoice {
    pub const ALL: [SchemeChoice; 4] = [
        SchemeChoice::SoftMin,
        SchemeChoice::Soft100,
        SchemeChoice::DickeComplete,
        SchemeChoice::HammingRing,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeChoice::SoftMin => "soft-min",
            SchemeChoice::Soft100 => "soft-100",
            SchemeChoice::DickeComplete => "dicke-complete",
            SchemeChoice::HammingRing => "hamming-ring",
        }
    }

    pub fn resolve(&self, instance: &ProblemInstance, init_seed: u64) -> Result<ConstraintScheme> {
        Ok(match self {
            SchemeChoice::SoftMin => ConstraintScheme::Soft {
                alpha: alpha_min(instance)?,
            },
            SchemeChoice::Soft100 => ConstraintScheme::Soft {
                alpha: SOFT_FIXED_ALPHA,
            },
            SchemeChoice::DickeComplete => ConstraintScheme::HardDickeComplete,
            SchemeChoice::HammingRing => ConstraintScheme::HardHammingRing { init_seed },
        })
    }
}

impl fmt::Display for SchemeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeChoice::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown scheme `{s}`")))
    }
}

/// Backend without its per-run seed, which comes from [`RunSpec::seed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    Exact,
    Shots { shots: u64 },
}

impl BackendKind {
    pub fn shots() -> Self {
        BackendKind::Shots { shots: DEFAULT_SHOTS }
    }

    pub fn with_seed(&self, seed: u64) -> Backend {
        match *self {
            BackendKind::Exact => Backend::Exact,
            BackendKind::Shots { shots } => Backend::Shots { shots, seed },
        }
    }

    pub fn label(&self) -> String {
        match self {
            BackendKind::Exact => "exact".into(),
            BackendKind::Shots { shots } => format!("shots-{shots}"),
        }
    }
}

/// Everything needed to reproduce one optimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub instance: ProblemInstance,
    #[serde(default)]
    pub instance_index: usize,
    /// Seed the instance was generated from, if it was random.
    pub instance_seed: Option<u64>,
    pub scheme: SchemeChoice,
    pub p: usize,
    pub optimizer: OptimizerKind,
    pub backend: BackendKind,
    #[serde(default)]
    pub repeat: usize,
    /// Root of the start-point, shot, and initial-state seeds.
    pub seed: u64,
    pub budget: usize,
    pub trotter_eps: f64,
    #[serde(default)]
    pub layer_order: LayerOrder,
    #[serde(default)]
    pub ranking: RankingMode,
}

impl RunSpec {
    pub fn new(instance: ProblemInstance, scheme: SchemeChoice, p: usize, optimizer: OptimizerKind, seed: u64) -> Self {
        RunSpec {
            instance,
            instance_index: 0,
            instance_seed: None,
            scheme,
            p,
            optimizer,
            backend: BackendKind::Exact,
            repeat: 0,
            seed,
            budget: crate::optimizers::DEFAULT_BUDGET,
            trotter_eps: DEFAULT_TROTTER_EPS,
            layer_order: LayerOrder::default(),
            ranking: RankingMode::default(),
        }
    }

    /// Seeds the start point (and the draws of random search).
    pub fn start_seed(&self) -> u64 {
        derive_seed(self.seed, 0)
    }

    pub fn shot_seed(&self) -> u64 {
        derive_seed(self.seed, 1)
    }

    pub fn init_seed(&self) -> u64 {
        derive_seed(self.seed, 2)
    }

    pub fn start_point(&self) -> Vec<f64> {
        random_start(2 * self.p, self.start_seed())
    }

    pub fn resolved_scheme(&self) -> Result<ConstraintScheme> {
        self.scheme.resolve(&self.instance, self.init_seed())
    }

    pub fn ansatz(&self, scheme: ConstraintScheme) -> Result<AnsatzConfig> {
        Ok(AnsatzConfig::new(self.instance.n, self.instance.budget, scheme, self.p)?
            .with_trotter_eps(self.trotter_eps)?
            .with_layer_order(self.layer_order))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: RunSpec,
    pub resolved_scheme: ConstraintScheme,
    pub resolved_backend: Backend,
    pub best_params: Params,
    /// `M_p` as seen by the optimizer (a shot estimate on the shot backend).
    pub best_value: f64,
    pub evals_used: usize,
    pub terminated: Termination,
    /// Scored on the exact output distribution of the best parameters.
    pub quality: QualityReport,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn n(&self) -> usize {
        self.run.instance.n
    }

    pub fn budget(&self) -> usize {
        self.run.instance.budget
    }

    pub fn eta(&self) -> f64 {
        self.quality.eta
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Optimizes one cell and scores the best parameters.
pub fn execute_run(spec: &RunSpec) -> Result<RunRecord> {
    execute_run_with_trajectory(spec).map(|(record, _)| record)
}

/// [`execute_run`] that also hands back the full optimizer output.
pub fn execute_run_with_trajectory(spec: &RunSpec) -> Result<(RunRecord, OptResult)> {
    let started = Instant::now();
    let scheme = spec.resolved_scheme()?;
    let table = cost_table(&spec.instance, &scheme)?;
    let config = spec.ansatz(scheme)?;
    let backend = spec.backend.with_seed(spec.shot_seed());
    let mut objective = QaoaObjective::new(&config, &table, backend)?;
    let result = spec
        .optimizer
        .run(&mut objective, &spec.start_point(), spec.budget, spec.start_seed())?;
    let params = result.best_params()?;
    let state = evolve_ansatz(&config, &params, &table)?;
    let ranking = rank_solutions(&table, spec.ranking);
    let quality = QualityReport::evaluate(&probabilities(&state), result.best_value, &table, &ranking)?;
    let record = RunRecord {
        run: spec.clone(),
        resolved_scheme: scheme,
        resolved_backend: backend,
        best_params: params,
        best_value: result.best_value,
        evals_used: result.evals_used,
        terminated: result.terminated,
        quality,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    Ok((record, result))
}

/// Re-executes a record from its stored [`RunSpec`].
pub fn replay(record: &RunRecord) -> Result<RunRecord> {
    execute_run(&record.run)
}

/// Whether a replay reproduces the stored result (η within `tol`, same
/// parameters and evaluation count).
pub fn replay_matches(record: &RunRecord, tol: f64) -> Result<bool> {
    let again = replay(record)?;
    Ok(again.best_params == record.best_params
        && again.evals_used == record.evals_used
        && (again.quality.eta - record.quality.eta).abs() <= tol)
}

fn seed_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |acc, &k| derive_seed(acc, k))
}

fn check_size(n: usize, max_qubits: usize) -> Result<()> {
    if n < 2 || n > max_qubits {
        return Err(Error::arg(format!(
            "register size {n} outside the allowed range 2..={max_qubits}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_values: Vec<usize>,
    pub instances_per_point: usize,
    pub seed: u64,
    pub scheme: SchemeChoice,
    pub max_qubits: usize,
    /// Fixed risk appetite; `None` draws λ per instance.
    pub lambda: Option<f64>,
}

impl SweepConfig {
    pub fn new(n_values: Vec<usize>, instances_per_point: usize, seed: u64, scheme: SchemeChoice) -> Self {
        SweepConfig {
            n_values,
            instances_per_point,
            seed,
            scheme,
            max_qubits: MAX_SWEEP_QUBITS,
            lambda: None,
        }
    }
}

/// Depth-1 grid search on random instances for every `B` in `1..n`.
/// Records come back ordered by `(n, B, instance)`.
pub fn sweep_bn(cfg: &SweepConfig) -> Result<Vec<RunRecord>> {
    for &n in &cfg.n_values {
        check_size(n, cfg.max_qubits)?;
    }
    let mut specs = Vec::new();
    for &n in &cfg.n_values {
        for budget in 1..n {
            for i in 0..cfg.instances_per_point {
                let seed = seed_path(cfg.seed, &[n as u64, budget as u64, i as u64]);
                let inst_cfg = RandomInstanceConfig {
                    lambda: cfg.lambda,
                    ..RandomInstanceConfig::with_budget(budget)
                };
                let mut spec = RunSpec::new(
                    random_instance(n, seed, &inst_cfg)?,
                    cfg.scheme,
                    1,
                    OptimizerKind::Grid,
                    seed,
                );
                spec.instance_index = i;
                spec.instance_seed = Some(seed);
                spec.repeat = i;
                specs.push(spec);
            }
        }
    }
    specs.par_iter().map(execute_run).collect()
}

/// Mean η over the instances at one `(n, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    #[serde(rename = "B")]
    pub budget: usize,
    pub count: usize,
    pub mean_eta: f64,
    pub std_eta: f64,
    /// Standard error of the mean.
    pub std_err: f64,
}

pub fn summarize_sweep(records: &[RunRecord]) -> Vec<SweepPoint> {
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n(), r.budget())).or_default().push(r.eta());
    }
    groups
        .into_iter()
        .map(|((n, budget), etas)| {
            let (mean, std) = mean_std(&etas);
            SweepPoint {
                n,
                budget,
                count: etas.len(),
                mean_eta: mean,
                std_eta: std,
                std_err: std / (etas.len() as f64).sqrt(),
            }
        })
        .collect()
}

/// Points a trend fit is run on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendInput {
    /// One point per `B`: the mean η.
    #[default]
    Means,
    /// One point per record.
    PerInstance,
}

pub fn trend_points(records: &[RunRecord], n: usize, input: TrendInput) -> Vec<(f64, f64)> {
    match input {
        TrendInput::Means => summarize_sweep(records)
            .into_iter()
            .filter(|p| p.n == n)
            .map(|p| (p.budget as f64, p.mean_eta))
            .collect(),
        TrendInput::PerInstance => records
            .iter()
            .filter(|r| r.n() == n)
            .map(|r| (r.budget() as f64, r.eta()))
            .collect(),
    }
}

/// Sample mean and (n − 1) standard deviation; the deviation is 0 for a
/// single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    /// Instances with their generating seeds, if any.
    pub instances: Vec<(ProblemInstance, Option<u64>)>,
    pub schemes: Vec<SchemeChoice>,
    pub depths: Vec<usize>,
    pub optimizers: Vec<OptimizerKind>,
    pub repeats: usize,
    pub backends: Vec<BackendKind>,
    pub budget: usize,
    pub seed: u64,
    pub trotter_eps: f64,
    pub max_qubits: usize,
}

impl BenchmarkConfig {
    pub fn new(instances: Vec<(ProblemInstance, Option<u64>)>, seed: u64) -> Self {
        BenchmarkConfig {
            instances,
            schemes: vec![SchemeChoice::SoftMin],
            depths: vec![1],
            optimizers: vec![OptimizerKind::NelderMead],
            repeats: 10,
            backends: vec![BackendKind::Exact],
            budget: crate::optimizers::DEFAULT_BUDGET,
            seed,
            trotter_eps: DEFAULT_TROTTER_EPS,
            max_qubits: MAX_SWEEP_QUBITS,
        }
    }

    /// Every run of the cross product. Grid search only exists at depth 1,
    /// so grid cells at other depths are left out.
    pub fn specs(&self) -> Result<Vec<RunSpec>> {
        for (inst, _) in &self.instances {
            check_size(inst.n, self.max_qubits)?;
        }
        if self.depths.contains(&0) {
            return Err(Error::arg("depths must be at least 1"));
        }
        let mut specs = Vec::new();
        for (ii, (instance, instance_seed)) in self.instances.iter().enumerate() {
            for &scheme in &self.schemes {
                for &p in &self.depths {
                    for &optimizer in &self.optimizers {
                        if optimizer == OptimizerKind::Grid && p != 1 {
                            continue;
                        }
                        for &backend in &self.backends {
                            for repeat in 0..self.repeats {
                                let seed = seed_path(
                                    self.seed,
                                    &[
                                        ii as u64,
                                        scheme as u64,
                                        p as u64,
                                        optimizer as u64,
                                        backend_code(backend),
                                        repeat as u64,
                                    ],
                                );
                                let mut spec = RunSpec::new(instance.clone(), scheme, p, optimizer, seed);
                                spec.instance_index = ii;
                                spec.instance_seed = *instance_seed;
                                spec.backend = backend;
                                spec.repeat = repeat;
                                spec.budget = self.budget;
                                spec.trotter_eps = self.trotter_eps;
                                specs.push(spec);
                            }
                        }
                    }
                }
            }
        }
        Ok(specs)
    }
}

fn backend_code(backend: BackendKind) -> u64 {
    match backend {
        BackendKind::Exact => 0,
        BackendKind::Shots { shots } => shots.wrapping_add(1),
    }
}

/// η statistics across the repeats of one benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub instance_index: usize,
    pub n: usize,
    #[serde(rename = "B")]
    pub budget: usize,
    pub scheme: SchemeChoice,
    pub p: usize,
    pub optimizer: OptimizerKind,
    pub backend: BackendKind,
    pub repeats: usize,
    pub best_eta: f64,
    pub mean_eta: f64,
    pub std_eta: f64,
    pub max_evals_used: usize,
}

type CellKey = (usize, SchemeChoice, usize, OptimizerKind, BackendKind);

/// Groups records by cell (everything but the repeat index).
pub fn aggregate(records: &[RunRecord]) -> Vec<CellAggregate> {
    let mut groups: BTreeMap<CellKey, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.run.instance_index, r.run.scheme, r.run.p, r.run.optimizer, r.run.backend);
        groups.entry(key).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((instance_index, scheme, p, optimizer, backend), rs)| {
            let etas: Vec<f64> = rs.iter().map(|r| r.eta()).collect();
            let (mean, std) = mean_std(&etas);
            CellAggregate {
                instance_index,
                n: rs[0].n(),
                budget: rs[0].budget(),
                scheme,
                p,
                optimizer,
                backend,
                repeats: rs.len(),
                best_eta: etas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean_eta: mean,
                std_eta: std,
                max_evals_used: rs.iter().map(|r| r.evals_used).max().unwrap_or(0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutput {
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<CellAggregate>,
}

pub fn optimizer_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    let specs = cfg.specs()?;
    let records: Vec<RunRecord> = specs.par_iter().map(execute_run).collect::<Result<_>>()?;
    let aggregates = aggregate(&records);
    Ok(BenchmarkOutput { records, aggregates })
}

/// Best ansatz at one `(n, scheme, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub n: usize,
    pub scheme: SchemeChoice,
    pub p: usize,
    #[serde(rename = "W")]
    pub work: f64,
    pub eta: f64,
    /// `W` here is below the worst `W` of the same scheme at `n − 1`.
    pub crossing: bool,
}

/// Picks the lowest-`W` record per `(n, scheme, p)`; rows are sorted by key.
pub fn depth_scaling_report(records: &[RunRecord]) -> Vec<DepthRow> {
    let mut best: BTreeMap<(usize, SchemeChoice, usize), &RunRecord> = BTreeMap::new();
    for r in records {
        let key = (r.n(), r.run.scheme, r.run.p);
        let better = match best.get(&key) {
            None => true,
            Some(cur) => r.quality.work < cur.quality.work,
        };
        if better {
            best.insert(key, r);
        }
    }
    let mut worst: BTreeMap<(usize, SchemeChoice), f64> = BTreeMap::new();
    for (&(n, scheme, _), r) in &best {
        let w = worst.entry((n, scheme)).or_insert(f64::NEG_INFINITY);
        *w = w.max(r.quality.work);
    }
    best.into_iter()
        .map(|((n, scheme, p), r)| DepthRow {
            n,
            scheme,
            p,
            work: r.quality.work,
            eta: r.quality.eta,
            crossing: worst
                .get(&(n - 1, scheme))
                .is_some_and(|&w| r.quality.work < w),
        })
        .collect()
}

/// Shot-noise spread of η at fixed parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityReport {
    /// η of the exact output distribution.
    pub exact_eta: f64,
    pub etas: Vec<f64>,
    pub mean_eta: f64,
    pub std_eta: f64,
    /// `100·(η_k − mean)/mean` per repeat.
    pub percent_deviation: Vec<f64>,
    /// Multinomial prediction `sqrt(Var(rank)/shots) / (2^n − 1)`; zero on
    /// the exact backend.
    pub predicted_std: f64,
}

/// Re-measures η `repeats` times with shot seeds derived from `seed`.
pub fn variability_study(
    instance: &ProblemInstance,
    scheme: ConstraintScheme,
    params: &Params,
    backend: BackendKind,
    repeats: usize,
    seed: u64,
) -> Result<VariabilityReport> {
    if repeats == 0 {
        return Err(Error::arg("variability study needs at least one repeat"));
    }
    let table = cost_table(instance, &scheme)?;
    let config = AnsatzConfig::for_table(&table, params.depth())?;
    let state = evolve_ansatz(&config, params, &table)?;
    let ranking = rank_solutions(&table, RankingMode::TwoSet);
    let dist = probabilities(&state);
    let exact_work = wasserstein_work(&dist, &ranking)?;
    let exact_eta = ncwd(exact_work, table.n)?;

    let (etas, predicted_std) = match backend {
        BackendKind::Exact => (vec![exact_eta; repeats], 0.0),
        BackendKind::Shots { shots } => {
            if shots == 0 {
                return Err(Error::arg("shot backend needs at least one shot"));
            }
            let etas = (0..repeats)
                .map(|k| {
                    let counts = measure_counts(&state, shots, derive_seed(seed, k as u64))?;
                    ncwd(wasserstein_work_counts(&counts, &ranking)?, table.n)
                })
                .collect::<Result<Vec<_>>>()?;
            let var_rank: f64 = dist
                .iter()
                .zip(&ranking.rank_of)
                .map(|(p, &r)| p * (r as f64 - exact_work).powi(2))
                .sum();
            let predicted = (var_rank.max(0.0) / shots as f64).sqrt() / ranking.max_rank() as f64;
            (etas, predicted)
        }
    };
    let (mean, std) = mean_std(&etas);
    let percent_deviation = etas
        .iter()
        .map(|e| if mean == 0.0 { 0.0 } else { 100.0 * (e - mean) / mean })
        .collect();
    Ok(VariabilityReport {
        exact_eta,
        etas,
        mean_eta: mean,
        std_eta: std,
        percent_deviation,
        predicted_std,
    })
}

/// Appends records, one JSON object per line.
pub fn write_jsonl<W: Write>(mut out: W, records: &[RunRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line()?)?;
    }
    out.flush()?;
    Ok(())
}

/// Parses JSON lines; blank lines are skipped, errors carry 1-based lines.
pub fn read_jsonl(text: &str) -> Result<Vec<RunRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| Error::parse(i as u64 + 1, e.to_string()))
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    n: usize,
    #[serde(rename = "B")]
    budget: usize,
    lambda: f64,
    instance_index: usize,
    instance_seed: Option<u64>,
    scheme: &'a str,
    alpha: f64,
    p: usize,
    optimizer: &'a str,
    backend: String,
    repeat: usize,
    seed: u64,
    budget_evals: usize,
    evals_used: usize,
    converged: bool,
    best_value: f64,
    #[serde(rename = "W")]
    work: f64,
    eta: f64,
    r: Option<f64>,
    r_bounded: f64,
    wall_time_s: f64,
    gamma: String,
    beta: String,
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::arg(format!("csv export: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::arg(format!("csv export: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::arg(format!("csv export: {e}")))
}

/// One flat row per record.
pub fn records_to_csv(records: &[RunRecord]) -> Result<String> {
    to_csv(records.iter().map(|r| CsvRow {
        n: r.n(),
        budget: r.budget(),
        lambda: r.run.instance.lambda,
        instance_index: r.run.instance_index,
        instance_seed: r.run.instance_seed,
        scheme: r.run.scheme.name(),
        alpha: r.resolved_scheme.penalty(),
        p: r.run.p,
        optimizer: r.run.optimizer.name(),
        backend: r.run.backend.label(),
        repeat: r.run.repeat,
        seed: r.run.seed,
        budget_evals: r.run.budget,
        evals_used: r.evals_used,
        converged: r.terminated == Termination::Converged,
        best_value: r.best_value,
        work: r.quality.work,
        eta: r.quality.eta,
        r: r.quality.r,
        r_bounded: r.quality.r_bounded,
        wall_time_s: r.wall_time_s,
        gamma: join(&r.best_params.gamma),
        beta: join(&r.best_params.beta),
    }))
}

#[derive(Serialize)]
struct AggregateRow<'a> {
    instance_index: usize,
    n: usize,
    #[serde(rename = "B")]
    budget: usize,
    scheme: &'a str,
    p: usize,
    optimizer: &'a str,
    backend: String,
    repeats: usize,
    best_eta: f64,
    mean_eta: f64,
    std_eta: f64,
    max_evals_used: usize,
}

pub fn aggregates_to_csv(aggregates: &[CellAggregate]) -> Result<String> {
    to_csv(aggregates.iter().map(|a| AggregateRow {
        instance_index: a.instance_index,
        n: a.n,
        budget: a.budget,
        scheme: a.scheme.name(),
        p: a.p,
        optimizer: a.optimizer.name(),
        backend: a.backend.label(),
        repeats: a.repeats,
        best_eta: a.best_eta,
        mean_eta: a.mean_eta,
        std_eta: a.std_eta,
        max_evals_used: a.max_evals_used,
    }))
}

pub fn sweep_to_csv(points: &[SweepPoint]) -> Result<String> {
    to_csv(points)
}

pub fn depth_rows_to_csv(rows: &[DepthRow]) -> Result<String> {
    to_csv(rows)
}
