//! Budget-accounted black-box minimizers.
//!
//! Every objective call, finite-difference probes included, goes through a
//! [`BudgetedObjective`], which refuses calls beyond the budget and records
//! the full trajectory. Optimizers stop cleanly with
//! [`Termination::Budget`] when a call is refused and always report the best
//! point seen.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::CostTable;
use crate::error::{Error, Result};
use crate::simulator::{
    estimate_expectation, evolve_ansatz, exact_expectation, measure_counts, AnsatzConfig, Params,
    DEFAULT_SHOTS,
};

pub const DEFAULT_BUDGET: usize = 500;
const TAU: f64 = 2.0 * PI;

/// A scalar function of a parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;

    /// `eval_index` is the 0-based position of this call within the run.
    fn value(&mut self, x: &[f64], eval_index: usize) -> f64;
}

/// Adapts a closure into an [`Objective`].
pub struct FnObjective<F> {
    dim: usize,
    f: F,
}

impl<F: FnMut(&[f64]) -> f64> FnObjective<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnObjective { dim, f }
    }
}

impl<F: FnMut(&[f64]) -> f64> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&mut self, x: &[f64], _eval_index: usize) -> f64 {
        (self.f)(x)
    }
}

/// How one circuit evaluation estimates `⟨H_C⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Backend {
    Exact,
    /// Each evaluation draws `shots` samples with a seed derived from
    /// `(seed, eval_index)`.
    Shots { shots: u64, seed: u64 },
}

impl Backend {
    pub fn shots(seed: u64) -> Self {
        Backend::Shots {
            shots: DEFAULT_SHOTS,
            seed,
        }
    }
}

/// Mixes a run seed with a stream position (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `⟨H_C⟩(γ, β)` over the flat layout `[γ_1..γ_p, β_1..β_p]`.
pub struct QaoaObjective<'a> {
    config: &'a AnsatzConfig,
    table: &'a CostTable,
    backend: Backend,
}

impl<'a> QaoaObjective<'a> {
    pub fn new(config: &'a AnsatzConfig, table: &'a CostTable, backend: Backend) -> Result<Self> {
        evolve_ansatz(config, &Params::zeros(config.p), table)?;
        if let Backend::Shots { shots: 0, .. } = backend {
            return Err(Error::arg("shot backend needs at least one shot"));
        }
        Ok(QaoaObjective {
            config,
            table,
            backend,
        })
    }

    pub fn evaluate(&self, x: &[f64], eval_index: usize) -> Result<f64> {
        let params = Params::from_flat(x)?;
        let state = evolve_ansatz(self.config, &params, self.table)?;
        match self.backend {
            Backend::Exact => exact_expectation(&state, self.table),
            Backend::Shots { shots, seed } => {
                let counts = measure_counts(&state, shots, derive_seed(seed, eval_index as u64))?;
                estimate_expectation(&counts, self.table)
            }
        }
    }
}

impl Objective for QaoaObjective<'_> {
    fn dim(&self) -> usize {
        self.config.dim()
    }

    fn value(&mut self, x: &[f64], eval_index: usize) -> f64 {
        // Only non-finite angles can fail once construction succeeded.
        self.evaluate(x, eval_index).unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub value: f64,
}

/// Returned when a call would exceed the evaluation budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetExhausted;

pub struct BudgetedObjective<'a> {
    objective: &'a mut dyn Objective,
    budget: usize,
    trajectory: Vec<Evaluation>,
    best: Option<usize>,
}

impl<'a> BudgetedObjective<'a> {
    pub fn new(objective: &'a mut dyn Objective, budget: usize) -> Self {
        BudgetedObjective {
            objective,
            budget,
            trajectory: Vec::new(),
            best: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn eval_count(&self) -> usize {
        self.trajectory.len()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.trajectory.len()
    }

    pub fn evaluate(&mut self, x: &[f64]) -> Result<f64, BudgetExhausted> {
        if self.trajectory.len() >= self.budget {
            return Err(BudgetExhausted);
        }
        let value = self.objective.value(x, self.trajectory.len());
        self.trajectory.push(Evaluation {
            x: x.to_vec(),
            value,
        });
        let improved = match self.best {
            None => true,
            Some(b) => value < self.trajectory[b].value,
        };
        if improved {
            self.best = Some(self.trajectory.len() - 1);
        }
        Ok(value)
    }

    pub fn best(&self) -> Option<&Evaluation> {
        self.best.map(|b| &self.trajectory[b])
    }

    pub fn finish(self, terminated: Termination) -> Result<OptResult> {
        let best = self
            .best
            .map(|b| self.trajectory[b].clone())
            .ok_or_else(|| Error::arg("optimizer made no evaluations (budget 0?)"))?;
        Ok(OptResult {
            best_x: best.x,
            best_value: best.value,
            evals_used: self.trajectory.len(),
            trajectory: self.trajectory,
            terminated,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Converged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    /// Flat parameters; see [`Params::from_flat`] for the QAOA layout.
    pub best_x: Vec<f64>,
    pub best_value: f64,
    pub evals_used: usize,
    pub trajectory: Vec<Evaluation>,
    pub terminated: Termination,
}

impl OptResult {
    pub fn best_params(&self) -> Result<Params> {
        Params::from_flat(&self.best_x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

fn run_budgeted(
    objective: &mut dyn Objective,
    budget: usize,
    body: impl FnOnce(&mut BudgetedObjective<'_>) -> Result<Termination, BudgetExhausted>,
) -> Result<OptResult> {
    let mut obj = BudgetedObjective::new(objective, budget);
    let terminated = body(&mut obj).unwrap_or(Termination::Budget);
    obj.finish(terminated)
}

fn check_start(objective: &dyn Objective, x0: &[f64]) -> Result<()> {
    if x0.len() != objective.dim() {
        return Err(Error::LengthMismatch {
            expected: objective.dim(),
            got: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("starting point must be finite"));
    }
    Ok(())
}

/// Lattice for the depth-1 exhaustive scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub gamma_points: usize,
    pub beta_points: usize,
    pub gamma_max: f64,
    pub beta_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            gamma_points: 50,
            beta_points: 25,
            gamma_max: TAU,
            beta_max: PI,
        }
    }
}

impl GridSpec {
    pub fn points(&self) -> usize {
        self.gamma_points * self.beta_points
    }
}

/// Evaluates every lattice point `(γ_k, β_m) = (k·γmax/G, m·βmax/M)`, γ
/// outermost; ties keep the earliest point.
pub fn grid_search(objective: &mut dyn Objective, grid: &GridSpec) -> Result<OptResult> {
    if objective.dim() != 2 {
        return Err(Error::arg(format!(
            "grid search needs depth 1 (2 parameters), got {}",
            objective.dim()
        )));
    }
    if grid.points() == 0 {
        return Err(Error::arg("grid has no points"));
    }
    run_budgeted(objective, grid.points(), |obj| {
        for k in 0..grid.gamma_points {
            let gamma = grid.gamma_max * k as f64 / grid.gamma_points as f64;
            for m in 0..grid.beta_points {
                let beta = grid.beta_max * m as f64 / grid.beta_points as f64;
                obj.evaluate(&[gamma, beta])?;
            }
        }
        Ok(Termination::Converged)
    })
}

/// I.i.d. uniform points in `[0, upper)^dim` until the budget runs out.
pub fn random_search(objective: &mut dyn Objective, budget: usize, seed: u64, upper: f64) -> Result<OptResult> {
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(Error::arg("random search bound must be positive"));
    }
    let dim = objective.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_budgeted(objective, budget, |obj| loop {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..upper)).collect();
        obj.evaluate(&x)?;
    })
}

/// Uniform start point in `[0, 2π)^dim`.
pub fn random_start(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.random_range(0.0..TAU)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Initial vertex `i` is `x0 + step·(1 + |x0_i|)·e_i`.
    pub initial_step: f64,
    /// Stop once every vertex is within this (max-norm) of the best one.
    pub x_tol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            initial_step: 0.05,
            x_tol: 1e-8,
        }
    }
}

pub fn nelder_mead(
    objective: &mut dyn Objective,
    x0: &[f64],
    budget: usize,
    opts: &NelderMeadOptions,
) -> Result<OptResult> {
    check_start(objective, x0)?;
    let dim = x0.len();
    run_budgeted(objective, budget, |obj| {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
        simplex.push((x0.to_vec(), obj.evaluate(x0)?));
        for i in 0..dim {
            let mut v = x0.to_vec();
            v[i] += opts.initial_step * (1.0 + x0[i].abs());
            let f = obj.evaluate(&v)?;
            simplex.push((v, f));
        }
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[1..]
                .iter()
                .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread < opts.x_tol {
                return Ok(Termination::Converged);
            }

            let mut centroid = vec![0.0; dim];
            for (v, _) in &simplex[..dim] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / dim as f64;
                }
            }
            let (worst, f_worst) = simplex[dim].clone();
            let toward = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let f_best = simplex[0].1;
            let f_second = simplex[dim - 1].1;

            let xr = toward(opts.reflection);
            let fr = obj.evaluate(&xr)?;
            if fr < f_best {
                let xe = toward(opts.reflection * opts.expansion);
                let fe = obj.evaluate(&xe)?;
                simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < f_second {
                simplex[dim] = (xr, fr);
                continue;
            }
            let accepted = if fr < f_worst {
                let xc = toward(opts.reflection * opts.contraction);
                let fc = obj.evaluate(&xc)?;
                (fc <= fr).then_some((xc, fc))
            } else {
                let xcc = toward(-opts.contraction);
                let fcc = obj.evaluate(&xcc)?;
                (fcc < f_worst).then_some((xcc, fcc))
            };
            match accepted {
                Some(vertex) => simplex[dim] = vertex,
                None => {
                    let best = simplex[0].0.clone();
                    for vertex in simplex.iter_mut().skip(1) {
                        let v: Vec<f64> = best
                            .iter()
                            .zip(&vertex.0)
                            .map(|(b, x)| b + opts.shrink * (x - b))
                            .collect();
                        let f = obj.evaluate(&v)?;
                        *vertex = (v, f);
                    }
                }
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowellOptions {
    /// Golden-section stops when the bracket is narrower than
    /// `line_tol·(1 + |t|)`.
    pub line_tol: f64,
    /// First trial step of each line search.
    pub initial_step: f64,
    /// Relative decrease per cycle below which the run counts as converged.
    pub f_tol: f64,
    /// Replace the direction of largest decrease after each cycle. Turning
    /// this off gives plain cyclic coordinate descent.
    pub update_directions: bool,
}

impl Default for PowellOptions {
    fn default() -> Self {
        PowellOptions {
            line_tol: 1e-6,
            initial_step: 1.0,
            f_tol: 1e-10,
            update_directions: true,
        }
    }
}

const GOLDEN: f64 = 1.618_033_988_749_895;
const MAX_BRACKET_STEPS: usize = 60;

/// Minimizes `f(x + t·d)` over `t`; returns the best `(t, f)` seen, with
/// `t = 0` unless some probe strictly improved on `fx`.
fn line_search(
    obj: &mut BudgetedObjective<'_>,
    x: &[f64],
    fx: f64,
    d: &[f64],
    opts: &PowellOptions,
) -> Result<(f64, f64), BudgetExhausted> {
    let mut best = (0.0, fx);
    let mut probe = |obj: &mut BudgetedObjective<'_>, t: f64| -> Result<f64, BudgetExhausted> {
        let point: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + t * di).collect();
        let f = obj.evaluate(&point)?;
        if f < best.1 {
            best = (t, f);
        }
        Ok(f)
    };

    // Bracket a minimum: a → b downhill, then expand until f(c) ≥ f(b).
    let (mut a, mut fa) = (0.0, fx);
    let (mut b, mut fb) = (opts.initial_step, probe(obj, opts.initial_step)?);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GOLDEN * (b - a);
    let mut fc = probe(obj, c)?;
    let mut steps = 0;
    while fc < fb && steps < MAX_BRACKET_STEPS {
        (a, fa) = (b, fb);
        (b, fb) = (c, fc);
        c = b + GOLDEN * (b - a);
        fc = probe(obj, c)?;
        steps += 1;
    }
    let _ = fa;

    // Golden-section search on [lo, hi] around the interior point b.
    let (mut lo, mut hi) = if a < c { (a, c) } else { (c, a) };
    let (mut mid, mut fmid) = (b, fb);
    while hi - lo > opts.line_tol * (1.0 + mid.abs()) {
        let left_gap = mid - lo;
        let right_gap = hi - mid;
        let trial = if right_gap > left_gap {
            mid + (2.0 - GOLDEN) * right_gap
        } else {
            mid - (2.0 - GOLDEN) * left_gap
        };
        let ft = probe(obj, trial)?;
        if ft < fmid {
            if trial > mid {
                lo = mid;
            } else {
                hi = mid;
            }
            (mid, fmid) = (trial, ft);
        } else if trial > mid {
            hi = trial;
        } else {
            lo = trial;
        }
    }
    Ok(best)
}

/// Powell's conjugate-direction method from the coordinate axes.
pub fn powell(objective: &mut dyn Objective, x0: &[f64], budget: usize, opts: &PowellOptions) -> Result<OptResult> {
    check_start(objective, x0)?;
    let dim = x0.len();
    run_budgeted(objective, budget, |obj| {
        let mut dirs: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        let mut x = x0.to_vec();
        let mut fx = obj.evaluate(&x)?;
        loop {
            let (x_start, f_start) = (x.clone(), fx);
            let (mut biggest_drop, mut biggest_dir) = (0.0, 0);
            for (i, d) in dirs.iter().enumerate() {
                let (t, f) = line_search(obj, &x, fx, d, opts)?;
                if fx - f > biggest_drop {
                    biggest_drop = fx - f;
                    biggest_dir = i;
                }
                x.iter_mut().zip(d).for_each(|(xi, di)| *xi += t * di);
                fx = f;
            }
            if 2.0 * (f_start - fx) <= opts.f_tol * (f_start.abs() + fx.abs()) + 1e-300 {
                return Ok(Termination::Converged);
            }
            if !opts.update_directions {
                continue;
            }
            let shift: Vec<f64> = x.iter().zip(&x_start).map(|(a, b)| a - b).collect();
            let extrapolated: Vec<f64> = x.iter().zip(&shift).map(|(a, s)| a + s).collect();
            let f_ext = obj.evaluate(&extrapolated)?;
            if f_ext < f_start {
                let t = 2.0 * (f_start - 2.0 * fx + f_ext) * (f_start - fx - biggest_drop).powi(2)
                    - biggest_drop * (f_start - f_ext).powi(2);
                if t < 0.0 {
                    let (step, f) = line_search(obj, &x, fx, &shift, opts)?;
                    x.iter_mut().zip(&shift).for_each(|(xi, si)| *xi += step * si);
                    fx = f;
                    dirs.remove(biggest_dir);
                    dirs.push(shift);
                }
            }
        }
    })
}

/// Central differences `(f(x + h·e_i) − f(x − h·e_i)) / 2h`; spends
/// `2·dim` evaluations.
pub fn finite_diff_grad(obj: &mut BudgetedObjective<'_>, x: &[f64], h: f64) -> Result<Vec<f64>, BudgetExhausted> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = obj.evaluate(&probe)?;
        probe[i] = x[i] - h;
        let down = obj.evaluate(&probe)?;
        probe[i] = x[i];
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientOptions {
    pub learning_rate: f64,
    pub fd_step: f64,
}

impl Default for GradientOptions {
    fn default() -> Self {
        GradientOptions {
            learning_rate: 0.01,
            fd_step: 1e-3,
        }
    }
}

/// Plain gradient descent; each step costs `2·dim + 1` evaluations.
pub fn gradient_descent(
    objective: &mut dyn Objective,
    x0: &[f64],
    budget: usize,
    opts: &GradientOptions,
) -> Result<OptResult> {
    check_start(objective, x0)?;
    run_budgeted(objective, budget, |obj| {
        let mut x = x0.to_vec();
        loop {
            obj.evaluate(&x)?;
            let grad = finite_diff_grad(obj, &x, opts.fd_step)?;
            x.iter_mut()
                .zip(&grad)
                .for_each(|(xi, g)| *xi -= opts.learning_rate * g);
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamOptions {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub fd_step: f64,
}

impl Default for AdamOptions {
    fn default() -> Self {
        AdamOptions {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            fd_step: 1e-3,
        }
    }
}

/// Adam with bias-corrected moments over finite-difference gradients. The
/// update never needs `f(x)` itself, so a step costs only its `2·dim` probes.
pub fn adam(objective: &mut dyn Objective, x0: &[f64], budget: usize, opts: &AdamOptions) -> Result<OptResult> {
    check_start(objective, x0)?;
    let dim = x0.len();
    run_budgeted(objective, budget, |obj| {
        let mut x = x0.to_vec();
        let mut m = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        let mut step = 0;
        loop {
            let grad = finite_diff_grad(obj, &x, opts.fd_step)?;
            step += 1;
            let c1 = 1.0 - opts.beta1.powi(step);
            let c2 = 1.0 - opts.beta2.powi(step);
            for i in 0..dim {
                m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * grad[i];
                v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * grad[i] * grad[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                x[i] -= opts.learning_rate * m_hat / (v_hat.sqrt() + opts.eps);
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Grid,
    Random,
    NelderMead,
    Powell,
    Gd,
    Adam,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 6] = [
        OptimizerKind::Grid,
        OptimizerKind::Random,
        OptimizerKind::NelderMead,
        OptimizerKind::Powell,
        OptimizerKind::Gd,
        OptimizerKind::Adam,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Grid => "grid",
            OptimizerKind::Random => "random",
            OptimizerKind::NelderMead => "nelder-mead",
            OptimizerKind::Powell => "powell",
            OptimizerKind::Gd => "gd",
            OptimizerKind::Adam => "adam",
        }
    }

    /// Runs with default hyperparameters. `seed` drives random search; local
    /// methods start at `x0`. Grid search ignores both and the budget.
    pub fn run(&self, objective: &mut dyn Objective, x0: &[f64], budget: usize, seed: u64) -> Result<OptResult> {
        match self {
            OptimizerKind::Grid => grid_search(objective, &GridSpec::default()),
            OptimizerKind::Random => random_search(objective, budget, seed, TAU),
            OptimizerKind::NelderMead => nelder_mead(objective, x0, budget, &Default::default()),
            OptimizerKind::Powell => powell(objective, x0, budget, &Default::default()),
            OptimizerKind::Gd => gradient_descent(objective, x0, budget, &Default::default()),
            OptimizerKind::Adam => adam(objective, x0, budget, &Default::default()),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OptimizerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::arg(format!("unknown optimizer `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(c: f64) -> impl FnMut(&[f64]) -> f64 {
        move |x: &[f64]| (x[0] - c).powi(2)
    }

    #[test]
    fn budget_is_enforced() {
        let mut f = FnObjective::new(1, |x: &[f64]| x[0]);
        let mut obj = BudgetedObjective::new(&mut f, 2);
        assert!(obj.evaluate(&[1.0]).is_ok());
        assert!(obj.evaluate(&[0.5]).is_ok());
        assert_eq!(obj.evaluate(&[0.0]), Err(BudgetExhausted));
        let res = obj.finish(Termination::Budget).unwrap();
        assert_eq!(res.evals_used, 2);
        assert_eq!(res.best_x, vec![0.5]);
        let mut f = FnObjective::new(1, |x: &[f64]| x[0]);
        assert!(BudgetedObjective::new(&mut f, 0).finish(Termination::Budget).is_err());
    }

    #[test]
    fn grid_on_cosine() {
        let mut f = FnObjective::new(2, |x: &[f64]| x[0].cos());
        let res = grid_search(&mut f, &GridSpec::default()).unwrap();
        assert_eq!(res.evals_used, 1250);
        assert!((res.best_x[0] - PI).abs() < 1e-12);
        assert_eq!(res.best_x[1], 0.0);

        let mut flat = FnObjective::new(2, |_: &[f64]| 1.0);
        let res = grid_search(&mut flat, &GridSpec::default()).unwrap();
        assert_eq!(res.best_x, vec![0.0, 0.0]);

        let mut three = FnObjective::new(4, |_: &[f64]| 1.0);
        assert!(grid_search(&mut three, &GridSpec::default()).is_err());
    }

    #[test]
    fn random_search_prefix_property() {
        let mut f = FnObjective::new(2, |x: &[f64]| x[0] * x[1]);
        let one = random_search(&mut f, 1, 3, TAU).unwrap();
        assert_eq!(one.evals_used, 1);
        assert_eq!(one.best_x, one.trajectory[0].x);
        let mut last = f64::INFINITY;
        for budget in [1, 5, 20, 100] {
            let res = random_search(&mut f, budget, 3, TAU).unwrap();
            assert_eq!(res.trajectory[0], one.trajectory[0]);
            assert!(res.best_value <= last);
            assert!(res.trajectory.iter().all(|e| e.x.iter().all(|v| (0.0..TAU).contains(v))));
            last = res.best_value;
        }
    }

    #[test]
    fn nelder_mead_convex_and_constant() {
        let mut f = FnObjective::new(1, quad(1.0));
        let res = nelder_mead(&mut f, &[0.0], 100, &Default::default()).unwrap();
        assert!((res.best_x[0] - 1.0).abs() < 1e-3, "{:?}", res.best_x);
        assert!(res.evals_used <= 100);

        let mut flat = FnObjective::new(2, |_: &[f64]| 2.0);
        let res = nelder_mead(&mut flat, &[0.3, 0.7], 500, &Default::default()).unwrap();
        assert_eq!(res.terminated, Termination::Converged);
        assert_eq!(res.best_x, vec![0.3, 0.7]);
    }

    #[test]
    fn nelder_mead_rosenbrock_descends() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let mut f = FnObjective::new(2, rosen);
        let res = nelder_mead(&mut f, &[0.0, 0.0], 500, &Default::default()).unwrap();
        assert!(res.best_value < rosen(&[0.0, 0.0]));
        assert!(res.evals_used <= 500);
    }

    #[test]
    fn powell_separable_and_constant() {
        let centers = [1.5, -0.7, 3.2];
        let mut f = FnObjective::new(3, |x: &[f64]| {
            x.iter().zip(&centers).map(|(a, c)| (a - c).powi(2)).sum()
        });
        let res = powell(&mut f, &[0.0; 3], 500, &Default::default()).unwrap();
        for (a, c) in res.best_x.iter().zip(&centers) {
            assert!((a - c).abs() < 1e-4, "{:?}", res.best_x);
        }

        let mut flat = FnObjective::new(2, |_: &[f64]| -1.0);
        let res = powell(&mut flat, &[0.4, 0.1], 500, &Default::default()).unwrap();
        assert_eq!(res.terminated, Termination::Converged);
        assert_eq!(res.best_x, vec![0.4, 0.1]);
    }

    #[test]
    fn gradient_of_linear_and_constant() {
        let a = [0.5, -2.0, 3.0];
        let mut f = FnObjective::new(3, |x: &[f64]| x.iter().zip(&a).map(|(x, a)| x * a).sum());
        let mut obj = BudgetedObjective::new(&mut f, 6);
        let g = finite_diff_grad(&mut obj, &[0.1, 0.2, 0.3], 1e-3).unwrap();
        for (gi, ai) in g.iter().zip(&a) {
            assert!((gi - ai).abs() < 1e-9);
        }
        assert_eq!(obj.eval_count(), 6);
        assert!(finite_diff_grad(&mut obj, &[0.0; 3], 1e-3).is_err());

        let mut flat = FnObjective::new(2, |_: &[f64]| 4.0);
        let mut obj = BudgetedObjective::new(&mut flat, 10);
        assert_eq!(finite_diff_grad(&mut obj, &[1.0, 2.0], 1e-3).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_descent_behaviour() {
        let mut f = FnObjective::new(1, |x: &[f64]| x[0] * x[0]);
        let opts = GradientOptions {
            learning_rate: 0.1,
            ..Default::default()
        };
        let res = gradient_descent(&mut f, &[1.0], 60, &opts).unwrap();
        let iterates: Vec<f64> = res.trajectory.iter().step_by(3).map(|e| e.value).collect();
        assert!(iterates.windows(2).all(|w| w[1] < w[0]), "{iterates:?}");
        assert_eq!(res.terminated, Termination::Budget);

        let mut f = FnObjective::new(1, |x: &[f64]| x[0] * x[0]);
        let res = gradient_descent(&mut f, &[0.0], 30, &Default::default()).unwrap();
        assert!(res.trajectory.iter().step_by(3).all(|e| e.x == vec![0.0]));

        // Curvature 2 diverges for learning rates above 1.
        let mut f = FnObjective::new(1, |x: &[f64]| x[0] * x[0]);
        let opts = GradientOptions {
            learning_rate: 1.5,
            ..Default::default()
        };
        let res = gradient_descent(&mut f, &[1.0], 30, &opts).unwrap();
        let iterates: Vec<f64> = res.trajectory.iter().step_by(3).map(|e| e.value).collect();
        assert!(iterates.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(res.best_x, vec![1.0 - 1e-3]);
    }

    #[test]
    fn adam_behaviour() {
        let mut f = FnObjective::new(1, |x: &[f64]| x[0] * x[0]);
        let res = adam(&mut f, &[1.0], 300, &Default::default()).unwrap();
        assert!(res.best_x[0].abs() < 0.1, "{:?}", res.best_x);
        assert!(res.evals_used <= 300);

        let mut f = FnObjective::new(2, |x: &[f64]| 3.0 * x[0] - 0.2 * x[1]);
        let res = adam(&mut f, &[0.0, 0.0], 5, &Default::default()).unwrap();
        assert_eq!(res.evals_used, 5);
        // Evaluation 4 is the first probe around the updated point.
        let probe = &res.trajectory[4].x;
        assert!((probe[0] - 1e-3 + 0.01).abs() < 1e-8, "{probe:?}");
        assert!((probe[1] - 0.01).abs() < 1e-8, "{probe:?}");
    }

    #[test]
    fn optimizer_names_round_trip() {
        for k in OptimizerKind::ALL {
            assert_eq!(k.name().parse::<OptimizerKind>().unwrap(), k);
        }
        assert!("cobyla".parse::<OptimizerKind>().is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 9), derive_seed(5, 9));
    }
}
