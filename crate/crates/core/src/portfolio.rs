//! Buy/hold mean-variance portfolio problems.
//!
//! A [`ProblemInstance`] carries everything the binary Markowitz objective
//! needs: asset count, budget, risk appetite, expected returns and the return
//! covariance. Instances come either from historical close prices
//! ([`load_price_csv`] + [`estimate_mu_sigma`]) or from the seeded generator
//! [`random_instance`].

use chrono::NaiveDate;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

/// Close prices, one row per trading date and one column per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<Vec<f64>>,
}

impl PriceSeries {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn columns(&self) -> usize {
        self.tickers.len()
    }

    /// Keeps only the first `n` tickers, in order.
    pub fn truncate_tickers(&self, n: usize) -> Result<PriceSeries> {
        if n == 0 || n > self.columns() {
            return Err(Error::arg(format!(
                "cannot keep {n} of {} tickers",
                self.columns()
            )));
        }
        Ok(PriceSeries {
            tickers: self.tickers[..n].to_vec(),
            dates: self.dates.clone(),
            prices: self.prices.iter().map(|row| row[..n].to_vec()).collect(),
        })
    }
}

/// Parses `date,<ticker>,...` CSV text into a [`PriceSeries`].
///
/// Dates must be ISO `YYYY-MM-DD` and strictly increasing; every price must be
/// a finite positive number. Errors carry the offending 1-based line number.
pub fn load_price_csv(content: &str) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(content.as_bytes());

    let header = reader
        .headers()
        .map_err(|e| Error::parse(1, e.to_string()))?
        .clone();
    if header.is_empty() || !header[0].eq_ignore_ascii_case("date") {
        return Err(Error::parse(1, "header must start with `date`"));
    }
    let tickers: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if tickers.is_empty() {
        return Err(Error::parse(1, "header names no tickers"));
    }
    if let Some(blank) = tickers.iter().position(|t| t.is_empty()) {
        return Err(Error::parse(1, format!("ticker column {} is blank", blank + 1)));
    }

    let mut dates = Vec::new();
    let mut prices = Vec::new();
    let mut last_line = 1;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(last_line + 1, |p| p.line());
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map_or(last_line + 1, |p| p.line());
        last_line = line;
        if record.len() != tickers.len() + 1 {
            return Err(Error::parse(
                line,
                format!(
                    "malformed row: expected {} fields, found {}",
                    tickers.len() + 1,
                    record.len()
                ),
            ));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| Error::parse(line, format!("bad date `{}`: {e}", &record[0])))?;
        if let Some(prev) = dates.last() {
            if date <= *prev {
                return Err(Error::parse(line, format!("non-monotone date {date}")));
            }
        }
        let row = record
            .iter()
            .skip(1)
            .map(|field| {
                let value: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(line, format!("non-numeric price `{field}`")))?;
                if !value.is_finite() || value <= 0.0 {
                    return Err(Error::parse(line, format!("non-positive price {field}")));
                }
                Ok(value)
            })
            .collect::<Result<Vec<_>>>()?;
        dates.push(date);
        prices.push(row);
    }
    if dates.len() < 2 {
        return Err(Error::parse(
            last_line,
            format!("need at least 2 price rows, found {}", dates.len()),
        ));
    }
    Ok(PriceSeries {
        tickers,
        dates,
        prices,
    })
}

/// Mean simple returns and unbiased return covariance of a price series.
pub fn estimate_mu_sigma(series: &PriceSeries) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if series.rows() < 3 {
        return Err(Error::arg(format!(
            "covariance needs at least 3 price rows, got {}",
            series.rows()
        )));
    }
    let n = series.columns();
    let returns: Vec<Vec<f64>> = series
        .prices
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(now, prev)| now / prev - 1.0).collect())
        .collect();
    let samples = returns.len() as f64;

    let mut mu = vec![0.0; n];
    for r in &returns {
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v;
        }
    }
    mu.iter_mut().for_each(|m| *m /= samples);

    let mut sigma = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let s: f64 = returns
                .iter()
                .map(|r| (r[i] - mu[i]) * (r[j] - mu[j]))
                .sum::<f64>()
                / (samples - 1.0);
            sigma[i][j] = s;
            sigma[j][i] = s;
        }
    }
    Ok((mu, sigma))
}

/// A single buy/hold mean-variance problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct ProblemInstance {
    pub n: usize,
    #[serde(rename = "B")]
    pub budget: usize,
    pub lambda: f64,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawInstance {
    n: usize,
    #[serde(rename = "B")]
    budget: usize,
    lambda: f64,
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

impl TryFrom<RawInstance> for ProblemInstance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        let inst = ProblemInstance::new(raw.budget, raw.lambda, raw.mu, raw.sigma)?;
        if inst.n != raw.n {
            return Err(Error::InvalidInstance(format!(
                "declared n = {} but mu has {} entries",
                raw.n, inst.n
            )));
        }
        Ok(inst)
    }
}

impl ProblemInstance {
    pub fn new(budget: usize, lambda: f64, mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        let inst = ProblemInstance {
            n: mu.len(),
            budget,
            lambda,
            mu,
            sigma,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Builds an instance from historical prices.
    pub fn from_prices(series: &PriceSeries, budget: usize, lambda: f64) -> Result<Self> {
        let (mu, sigma) = estimate_mu_sigma(series)?;
        Self::new(budget, lambda, mu, sigma)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInstance(msg));
        let n = self.n;
        if n < 2 {
            return bad(format!("need at least 2 assets, got {n}"));
        }
        if self.mu.len() != n || self.sigma.len() != n || self.sigma.iter().any(|r| r.len() != n) {
            return bad(format!("mu/sigma dimensions disagree with n = {n}"));
        }
        if self.budget < 1 || self.budget > n - 1 {
            return bad(format!("budget {} outside 1..={}", self.budget, n - 1));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if self.mu.iter().any(|m| !m.is_finite()) {
            return bad("mu has non-finite entries".into());
        }
        if self.sigma.iter().flatten().any(|s| !s.is_finite()) {
            return bad("sigma has non-finite entries".into());
        }
        for i in 0..n {
            for j in 0..i {
                if (self.sigma[i][j] - self.sigma[j][i]).abs() > SYMMETRY_TOL {
                    return bad(format!("sigma not symmetric at ({i}, {j})"));
                }
            }
        }
        let min_eig = min_eigenvalue(&self.sigma);
        if min_eig < PSD_TOL {
            return bad(format!("sigma not positive semidefinite (min eigenvalue {min_eig:e})"));
        }
        Ok(())
    }

    /// Markowitz cost of the bitstring encoded by basis index `l`
    /// (asset `i` is bit `i`).
    pub fn cost_of_index(&self, l: usize) -> f64 {
        let mut risk = 0.0;
        let mut ret = 0.0;
        for i in (0..self.n).filter(|i| l >> i & 1 == 1) {
            ret += self.mu[i];
            for j in (0..self.n).filter(|j| l >> j & 1 == 1) {
                risk += self.sigma[i][j];
            }
        }
        (1.0 - self.lambda) * risk - self.lambda * ret
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub(crate) fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mat = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[i][j] + m[j][i]));
    SymmetricEigen::new(mat)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `(1 − λ)·xᵀΣx − λ·μᵀx` for a binary selection `x`.
pub fn markowitz_cost(instance: &ProblemInstance, x: &[bool]) -> Result<f64> {
    if x.len() != instance.n {
        return Err(Error::LengthMismatch {
            expected: instance.n,
            got: x.len(),
        });
    }
    let index = x
        .iter()
        .enumerate()
        .fold(0usize, |acc, (i, &bit)| acc | (usize::from(bit) << i));
    Ok(instance.cost_of_index(index))
}

/// Knobs for [`random_instance`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomInstanceConfig {
    /// Fixed budget; `None` picks [`hardest_budget`] for the asset count.
    pub budget: Option<usize>,
    /// Half-width of the uniform draw for the covariance factor entries.
    pub sigma_scale: f64,
    /// Half-width of the uniform draw for expected returns.
    pub mu_scale: f64,
    /// Fixed risk appetite; `None` draws it uniformly from `[0, 1]`.
    pub lambda: Option<f64>,
}

impl Default for RandomInstanceConfig {
    fn default() -> Self {
        RandomInstanceConfig {
            budget: None,
            sigma_scale: 0.1,
            mu_scale: 0.1,
            lambda: None,
        }
    }
}

impl RandomInstanceConfig {
    pub fn with_budget(budget: usize) -> Self {
        RandomInstanceConfig {
            budget: Some(budget),
            ..Default::default()
        }
    }
}

/// The budget with the lowest average solution quality at each size:
/// `n / 2` for even `n`, and 2, 3, 3, 4 for `n` = 3, 5, 7, 9.
pub fn hardest_budget(n: usize) -> usize {
    match n {
        3 => 2,
        5 => 3,
        7 => 3,
        9 => 4,
        _ => (n / 2).max(1),
    }
}

/// Seeded random instance: `Σ = A·Aᵀ / n` with uniform `A`, uniform `μ`.
///
/// All `μ_i` and all independent `Σ_ij` are distinct; a draw with a
/// collision is discarded and redrawn from the same stream.
pub fn random_instance(n: usize, seed: u64, cfg: &RandomInstanceConfig) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::arg(format!("random instances need n >= 2, got {n}")));
    }
    if !(cfg.sigma_scale > 0.0 && cfg.mu_scale > 0.0) {
        return Err(Error::arg("entry scales must be positive"));
    }
    let budget = cfg.budget.unwrap_or_else(|| hardest_budget(n));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let a: Vec<f64> = (0..n * n)
            .map(|_| rng.random_range(-cfg.sigma_scale..=cfg.sigma_scale))
            .collect();
        let mu: Vec<f64> = (0..n)
            .map(|_| rng.random_range(-cfg.mu_scale..=cfg.mu_scale))
            .collect();
        let lambda = match cfg.lambda {
            Some(l) => l,
            None => rng.random_range(0.0..=1.0),
        };
        let mut sigma = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = (0..n).map(|k| a[i * n + k] * a[j * n + k]).sum();
                sigma[i][j] = dot / n as f64;
                sigma[j][i] = sigma[i][j];
            }
        }
        let entries: Vec<f64> = (0..n).flat_map(|i| sigma[i][i..].to_vec()).collect();
        if has_duplicates(&mu) || has_duplicates(&entries) {
            continue;
        }
        return ProblemInstance::new(budget, lambda, mu, sigma);
    }
}

fn has_duplicates(values: &[f64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_csv() {
        let s = load_price_csv("date,A\n2021-04-01,1.0\n2021-04-02,2.0").unwrap();
        assert_eq!(s.tickers, vec!["A"]);
        assert_eq!(s.rows(), 2);
        assert_eq!(s.prices[1][0], 2.0);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let err = load_price_csv("date,A\n2021-04-01,-1.0\n2021-04-02,2.0").unwrap_err();
        assert!(err.to_string().contains("non-positive price"), "{err}");
        assert!(err.to_string().starts_with("line 2"), "{err}");

        let err = load_price_csv("date,A\n2021-04-01,1.0\n2021-04-02,abc").unwrap_err();
        assert!(err.to_string().starts_with("line 3"), "{err}");
        assert!(err.to_string().contains("non-numeric"), "{err}");

        let err = load_price_csv("date,A\n2021-04-02,1.0\n2021-04-01,2.0").unwrap_err();
        assert!(err.to_string().contains("non-monotone"), "{err}");

        let err = load_price_csv("date,A,B\n2021-04-01,1.0\n2021-04-02,2.0,3.0").unwrap_err();
        assert!(err.to_string().contains("malformed row"), "{err}");

        let err = load_price_csv("date,A\n2021-04-01,1.0").unwrap_err();
        assert!(err.to_string().contains("at least 2"), "{err}");

        assert!(load_price_csv("day,A\n2021-04-01,1.0\n2021-04-02,2.0").is_err());
        assert!(load_price_csv("").is_err());
    }

    #[test]
    fn constant_returns_have_zero_variance() {
        let s = load_price_csv("date,A\n2021-04-01,1\n2021-04-02,2\n2021-04-05,4").unwrap();
        let (mu, sigma) = estimate_mu_sigma(&s).unwrap();
        assert_eq!(mu, vec![1.0]);
        assert_eq!(sigma, vec![vec![0.0]]);
    }

    #[test]
    fn proportional_prices_are_perfectly_correlated() {
        let csv = "date,A,B\n2021-04-01,1,3\n2021-04-02,1.5,4.5\n2021-04-05,1.2,3.6\n2021-04-06,2,6";
        let (_, sigma) = estimate_mu_sigma(&load_price_csv(csv).unwrap()).unwrap();
        let corr = sigma[0][1] / (sigma[0][0] * sigma[1][1]).sqrt();
        assert!((corr - 1.0).abs() < 1e-12, "{corr}");
    }

    #[test]
    fn two_rows_cannot_estimate_covariance() {
        let s = load_price_csv("date,A\n2021-04-01,1\n2021-04-02,2").unwrap();
        assert!(estimate_mu_sigma(&s).is_err());
    }

    #[test]
    fn markowitz_limits() {
        let inst = ProblemInstance::new(1, 1.0, vec![0.1, 0.2], vec![vec![0.0; 2]; 2]).unwrap();
        assert!((markowitz_cost(&inst, &[true, true]).unwrap() + 0.3).abs() < 1e-15);
        assert_eq!(markowitz_cost(&inst, &[false, false]).unwrap(), 0.0);

        let eye = (0..3)
            .map(|i| (0..3).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        let inst = ProblemInstance::new(1, 0.0, vec![0.3, -0.2, 0.5], eye).unwrap();
        assert_eq!(markowitz_cost(&inst, &[true, false, true]).unwrap(), 2.0);
        assert!(matches!(
            markowitz_cost(&inst, &[true]),
            Err(Error::LengthMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn instance_validation() {
        let z = || vec![vec![0.0; 2]; 2];
        assert!(ProblemInstance::new(0, 0.5, vec![0.0; 2], z()).is_err());
        assert!(ProblemInstance::new(2, 0.5, vec![0.0; 2], z()).is_err());
        assert!(ProblemInstance::new(1, 1.5, vec![0.0; 2], z()).is_err());
        assert!(ProblemInstance::new(1, 0.5, vec![f64::NAN, 0.0], z()).is_err());
        let asym = vec![vec![1.0, 0.5], vec![0.4, 1.0]];
        assert!(ProblemInstance::new(1, 0.5, vec![0.0; 2], asym).is_err());
        let indefinite = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(ProblemInstance::new(1, 0.5, vec![0.0; 2], indefinite).is_err());
    }

    #[test]
    fn random_instances_are_deterministic_and_psd() {
        let cfg = RandomInstanceConfig::with_budget(2);
        let a = random_instance(4, 11, &cfg).unwrap();
        let b = random_instance(4, 11, &cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_instance(4, 12, &cfg).unwrap());
        assert!(random_instance(1, 0, &cfg).is_err());
        assert_eq!(random_instance(5, 0, &Default::default()).unwrap().budget, 3);
    }

    #[test]
    fn psd_failures_never_occur() {
        let cfg = RandomInstanceConfig::with_budget(2);
        let failures = (0..1000)
            .filter(|&seed| {
                let inst = random_instance(4, seed, &cfg).unwrap();
                min_eigenvalue(&inst.sigma) < PSD_TOL
            })
            .count();
        assert_eq!(failures, 0);
    }

    #[test]
    fn json_keeps_full_precision() {
        let inst = random_instance(3, 5, &RandomInstanceConfig::with_budget(1)).unwrap();
        let back = ProblemInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, back);
        let text = r#"{"n": 3, "B": 1, "lambda": 0.5, "mu": [0, 0], "sigma": [[0,0],[0,0]]}"#;
        assert!(ProblemInstance::from_json(text).is_err());
    }
}
