//! Domain types and the reduction of raw grouped measurements to the
//! sufficient statistics `(m_i, ȳ_i, sse)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::Probability;

/// Paired-difference measurements grouped by subject, in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    groups: Vec<(String, Vec<f64>)>,
}

impl GroupedSample {
    pub fn new(groups: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::validation(format!(
                "at least 2 subjects are required, got {}",
                groups.len()
            )));
        }
        for (id, values) in &groups {
            if values.is_empty() {
                return Err(Error::validation(format!("subject {id:?} has no measurements")));
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::validation(format!("subject {id:?} has non-finite value {v}")));
            }
        }
        Ok(GroupedSample { groups })
    }

    /// Groups `(subject, value)` records; records of one subject need not be adjacent.
    pub fn from_records<I, S>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
        let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
        for (id, value) in records {
            let id = id.into();
            match index.get(&id) {
                Some(&i) => groups[i].1.push(value),
                None => {
                    index.insert(id.clone(), groups.len());
                    groups.push((id, vec![value]));
                }
            }
        }
        GroupedSample::new(groups)
    }

    pub fn groups(&self) -> &[(String, Vec<f64>)] {
        &self.groups
    }

    /// Sum of squares of every measurement.
    pub fn sum_of_squares(&self) -> f64 {
        self.groups.iter().flat_map(|(_, v)| v).map(|y| y * y).sum()
    }
}

/// Sufficient statistics of the one-way random-effects model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    m: Vec<usize>,
    ybar: Vec<f64>,
    sse: f64,
}

impl SummaryStats {
    pub fn new(m: Vec<usize>, ybar: Vec<f64>, sse: f64) -> Result<Self> {
        if m.len() != ybar.len() {
            return Err(Error::validation(format!(
                "{} group sizes but {} group means",
                m.len(),
                ybar.len()
            )));
        }
        if m.len() < 2 {
            return Err(Error::validation(format!(
                "at least 2 subjects are required, got {}",
                m.len()
            )));
        }
        if let Some(i) = m.iter().position(|&mi| mi == 0) {
            return Err(Error::validation(format!("subject {} has group size 0", i + 1)));
        }
        if let Some(i) = ybar.iter().position(|y| !y.is_finite()) {
            return Err(Error::validation(format!("subject {} has a non-finite mean", i + 1)));
        }
        if m.iter().all(|&mi| mi == 1) {
            return Err(Error::validation(
                "no subject has repeated measurements (N - n = 0)",
            ));
        }
        if !(sse >= 0.0 && sse.is_finite()) {
            return Err(Error::validation(format!("sse must be finite and >= 0, got {sse}")));
        }
        Ok(SummaryStats { m, ybar, sse })
    }

    pub fn m(&self) -> &[usize] {
        &self.m
    }

    pub fn ybar(&self) -> &[f64] {
        &self.ybar
    }

    pub fn sse(&self) -> f64 {
        self.sse
    }

    /// Number of subjects.
    pub fn n(&self) -> usize {
        self.m.len()
    }

    /// Total number of measurements.
    pub fn total(&self) -> usize {
        self.m.iter().sum()
    }

    /// Degrees of freedom of `sse`.
    pub fn within_df(&self) -> usize {
        self.total() - self.n()
    }
}

/// Reduces raw data to `(m, ȳ, sse)`. Singleton subjects contribute nothing to `sse`.
pub fn summarize(raw: &GroupedSample) -> Result<SummaryStats> {
    let mut m = Vec::with_capacity(raw.groups.len());
    let mut ybar = Vec::with_capacity(raw.groups.len());
    let mut sse = 0.0;
    for (_, values) in &raw.groups {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        sse += values.iter().map(|y| (y - mean).powi(2)).sum::<f64>();
        m.push(values.len());
        ybar.push(mean);
    }
    SummaryStats::new(m, ybar, sse)
}

/// `(μ, σ_w², σ_b²)` of `Y_ij = μ + u_i + ε_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmmParams {
    pub mu: f64,
    pub sigma_w2: f64,
    pub sigma_b2: f64,
}

impl LmmParams {
    pub fn new(mu: f64, sigma_w2: f64, sigma_b2: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::domain(format!("mu must be finite, got {mu}")));
        }
        if !(sigma_w2 > 0.0 && sigma_w2.is_finite()) {
            return Err(Error::domain(format!("sigma_w^2 must be positive, got {sigma_w2}")));
        }
        if !(sigma_b2 >= 0.0 && sigma_b2.is_finite()) {
            return Err(Error::domain(format!("sigma_b^2 must be >= 0, got {sigma_b2}")));
        }
        Ok(LmmParams { mu, sigma_w2, sigma_b2 })
    }

    /// Parameters given as standard deviations.
    pub fn from_sd(mu: f64, sigma_w: f64, sigma_b: f64) -> Result<Self> {
        LmmParams::new(mu, sigma_w * sigma_w, sigma_b * sigma_b)
    }

    pub fn rms(&self) -> f64 {
        rms(self)
    }
}

/// Root mean square `ρ = √(μ² + σ_b² + σ_w²)`.
pub fn rms(params: &LmmParams) -> f64 {
    (params.mu * params.mu + params.sigma_b2 + params.sigma_w2).sqrt()
}

/// `H0: ρ ≥ ρ0` against `Ha: ρ < ρ0` at level `alpha`; CIs are `1 − alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Hypothesis {
    pub rho0: f64,
    pub alpha: f64,
}

impl Hypothesis {
    pub fn new(rho0: f64, alpha: f64) -> Result<Self> {
        if !(rho0 > 0.0 && rho0.is_finite()) {
            return Err(Error::domain(format!("rho0 must be positive, got {rho0}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Hypothesis { rho0, alpha })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    /// Generalized test with `Z` integrated out analytically.
    #[serde(rename = "GT")]
    Gt,
    /// Generalized test by plain Monte Carlo over `Z`.
    #[serde(rename = "GT-plain-MC")]
    GtPlain,
    #[serde(rename = "Z-score")]
    ZScore,
    #[serde(rename = "Z-Wald")]
    ZWald,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Gt, Method::GtPlain, Method::ZScore, Method::ZWald];

    pub fn label(self) -> &'static str {
        match self {
            Method::Gt => "GT",
            Method::GtPlain => "GT-plain-MC",
            Method::ZScore => "Z-score",
            Method::ZWald => "Z-Wald",
        }
    }

    pub fn is_generalized(self) -> bool {
        matches!(self, Method::Gt | Method::GtPlain)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "gt" => Ok(Method::Gt),
            "gtplain" | "gtplainmc" | "plain" => Ok(Method::GtPlain),
            "zscore" | "score" => Ok(Method::ZScore),
            "zwald" | "wald" => Ok(Method::ZWald),
            _ => Err(Error::domain(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: Method,
    pub p_value: Probability,
    /// Confidence interval for ρ.
    pub ci_rho: (f64, f64),
    /// Confidence interval for ρ², reported untruncated (Z methods only).
    pub ci_rho2: Option<(f64, f64)>,
    pub estimates: LmmParams,
    /// Monte Carlo size (generalized methods only).
    pub b: Option<usize>,
    pub seed: Option<u64>,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value.value() < alpha
    }

    pub fn covers(&self, rho: f64) -> bool {
        self.ci_rho.0 <= rho && rho <= self.ci_rho.1
    }
}
