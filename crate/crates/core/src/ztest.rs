//! Large-sample baselines on `R = Σ Y_ij² / N`.
//!
//! `E(R) = ρ²` and
//! `Var(R) = (2/N²) Σ_i [(σ_w² + m_iσ_b²)² + (m_i − 1)σ_w⁴ + 2m_i(σ_w² + m_iσ_b²)μ²]`.
//! The score test evaluates the variance under the null constraint
//! `μ² + σ_w² + σ_b² = ρ0²`; the Wald test at the unconstrained MLE.

use serde::{Deserialize, Serialize};

use crate::data::{Hypothesis, LmmParams, Method, SummaryStats, TestResult};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, fit_mle_null, fit_reml_null, scaled_null};
use crate::special::{normal_quantile_unchecked, phi, Probability};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZMoments {
    pub mean_r: f64,
    pub var_r: f64,
}

/// How the score test obtains parameters satisfying the null constraint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullVariance {
    /// Restricted-likelihood fit under the constraint. Reproduces the
    /// published oximetry analysis.
    #[default]
    Reml,
    /// Maximum-likelihood fit under the constraint.
    Ml,
    /// Unconstrained MLE rescaled onto the constraint surface.
    Scaled,
}

impl std::str::FromStr for NullVariance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "reml" | "constrained-reml" => Ok(NullVariance::Reml),
            "ml" | "constrained" | "constrained-ml" => Ok(NullVariance::Ml),
            "scaled" => Ok(NullVariance::Scaled),
            _ => Err(Error::domain(format!("unknown null-variance mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for NullVariance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NullVariance::Reml => "reml",
            NullVariance::Ml => "ml",
            NullVariance::Scaled => "scaled",
        })
    }
}

/// `ΣY²/N` reconstructed as `(sse + Σ m_i ȳ_i²)/N`.
pub fn r_statistic(summary: &SummaryStats) -> f64 {
    let between: f64 = summary
        .m()
        .iter()
        .zip(summary.ybar())
        .map(|(&m, &y)| m as f64 * y * y)
        .sum();
    (summary.sse() + between) / summary.total() as f64
}

pub fn z_moments(params: &LmmParams, m: &[usize]) -> ZMoments {
    let (w, b, mu2) = (params.sigma_w2, params.sigma_b2, params.mu * params.mu);
    let big_n: f64 = m.iter().sum::<usize>() as f64;
    let sum: f64 = m
        .iter()
        .map(|&mi| {
            let mi = mi as f64;
            let lead = w + mi * b;
            lead * lead + (mi - 1.0) * w * w + 2.0 * mi * lead * mu2
        })
        .sum();
    ZMoments {
        mean_r: mu2 + w + b,
        var_r: 2.0 * sum / (big_n * big_n),
    }
}

/// Parameters on the null surface used for the score variance.
pub fn null_params(summary: &SummaryStats, rho0: f64, mode: NullVariance) -> Result<LmmParams> {
    match mode {
        NullVariance::Reml => Ok(fit_reml_null(summary, rho0)?.params),
        NullVariance::Ml => Ok(fit_mle_null(summary, rho0)?.params),
        NullVariance::Scaled => scaled_null(summary, rho0),
    }
}

/// Score test with the default null-variance recipe.
pub fn z_score_test(summary: &SummaryStats, hyp: &Hypothesis) -> Result<TestResult> {
    z_score_test_with(summary, hyp, NullVariance::default())
}

/// Score test: `Z = (R − ρ0²)/√Var₀(R)`, `p = Φ(Z)`, and the CI for `ρ²` is
/// `R ± z_{1−α/2} √Var₀(R)`.
pub fn z_score_test_with(summary: &SummaryStats, hyp: &Hypothesis, mode: NullVariance) -> Result<TestResult> {
    let estimates = fit_mle(summary)?.params;
    let null = null_params(summary, hyp.rho0, mode)?;
    let var = z_moments(&null, summary.m()).var_r;
    z_result(Method::ZScore, summary, hyp, var, estimates)
}

/// Wald test: as the score test with `Var(R)` at the unconstrained MLE.
pub fn z_wald_test(summary: &SummaryStats, hyp: &Hypothesis) -> Result<TestResult> {
    let estimates = fit_mle(summary)?.params;
    let var = z_moments(&estimates, summary.m()).var_r;
    z_result(Method::ZWald, summary, hyp, var, estimates)
}

fn z_result(
    method: Method,
    summary: &SummaryStats,
    hyp: &Hypothesis,
    var_r: f64,
    estimates: LmmParams,
) -> Result<TestResult> {
    if !(var_r > 0.0 && var_r.is_finite()) {
        return Err(Error::Numerical(format!("Var(R) = {var_r} is not positive")));
    }
    let r = r_statistic(summary);
    let se = var_r.sqrt();
    let z = (r - hyp.rho0 * hyp.rho0) / se;
    let half = normal_quantile_unchecked(1.0 - hyp.alpha / 2.0) * se;
    let ci_rho2 = (r - half, r + half);
    Ok(TestResult {
        method,
        p_value: Probability::saturating(phi(z)),
        ci_rho: (ci_rho2.0.max(0.0).sqrt(), ci_rho2.1.max(0.0).sqrt()),
        ci_rho2: Some(ci_rho2),
        estimates,
        b: None,
        seed: None,
    })
}
