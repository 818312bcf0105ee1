//! Likelihood estimation of `(μ, σ_w², σ_b²)` from the sufficient statistics.
//!
//! With `γ = σ_b²/σ_w²` fixed, both `μ` and `σ_w²` have closed-form
//! maximizers, so the unconstrained fits reduce to a bounded search over
//! `ln γ` plus an exact evaluation of the `σ_b² = 0` boundary. The
//! null-constrained fits (`μ² + σ_w² + σ_b² = ρ0²`) nest two bounded searches
//! over `ln(σ_w² + σ_b²)` and `ln σ_w²`.

use serde::Serialize;

use crate::data::{LmmParams, SummaryStats};
use crate::error::{Error, Result};
use crate::optim::{minimize_scan, Minimum};

/// Which likelihood is maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Likelihood {
    Ml,
    /// Restricted likelihood: ML plus `ln Σ W_i`, `W_i = 1/(σ_b² + σ_w²/m_i)`.
    Reml,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub params: LmmParams,
    /// `−2 log L` (ML or REML, constant dropped) at `params`.
    pub neg2loglik: f64,
    pub converged: bool,
    /// `σ_b² = 0` at the optimum.
    pub boundary_sigma_b2: bool,
    pub likelihood: Likelihood,
}

/// `−2 log L` up to an additive constant:
/// `(N−n) ln σ_w² + sse/σ_w² + Σ [ln(σ_w² + m_i σ_b²) + m_i (ȳ_i − μ)²/(σ_w² + m_i σ_b²)]`.
pub fn neg2ll(summary: &SummaryStats, params: &LmmParams) -> Result<f64> {
    check_variances(params.sigma_w2, params.sigma_b2)?;
    Ok(neg2ll_raw(summary, params.mu, params.sigma_w2, params.sigma_b2))
}

/// Restricted `−2 log L`: [`neg2ll`] plus `ln Σ_i 1/(σ_b² + σ_w²/m_i)`.
pub fn neg2rll(summary: &SummaryStats, params: &LmmParams) -> Result<f64> {
    check_variances(params.sigma_w2, params.sigma_b2)?;
    Ok(neg2ll_raw(summary, params.mu, params.sigma_w2, params.sigma_b2)
        + sum_weights(summary, params.sigma_w2, params.sigma_b2).ln())
}

fn check_variances(sigma_w2: f64, sigma_b2: f64) -> Result<()> {
    if !(sigma_w2 > 0.0) {
        return Err(Error::domain(format!("sigma_w^2 must be positive, got {sigma_w2}")));
    }
    if !(sigma_b2 >= 0.0) {
        return Err(Error::domain(format!("sigma_b^2 must be >= 0, got {sigma_b2}")));
    }
    Ok(())
}

fn neg2ll_raw(summary: &SummaryStats, mu: f64, sigma_w2: f64, sigma_b2: f64) -> f64 {
    let within = summary.within_df() as f64 * sigma_w2.ln() + summary.sse() / sigma_w2;
    let between: f64 = summary
        .m()
        .iter()
        .zip(summary.ybar())
        .map(|(&m, &y)| {
            let m = m as f64;
            let v = sigma_w2 + m * sigma_b2;
            v.ln() + m * (y - mu).powi(2) / v
        })
        .sum();
    within + between
}

fn sum_weights(summary: &SummaryStats, sigma_w2: f64, sigma_b2: f64) -> f64 {
    summary
        .m()
        .iter()
        .map(|&m| 1.0 / (sigma_b2 + sigma_w2 / m as f64))
        .sum()
}

/// The `μ` minimizing `−2 log L` at fixed variances: `Σ W_i ȳ_i / Σ W_i`.
pub fn profile_mu(summary: &SummaryStats, sigma_w2: f64, sigma_b2: f64) -> f64 {
    let (num, den) = summary
        .m()
        .iter()
        .zip(summary.ybar())
        .fold((0.0, 0.0), |(num, den), (&m, &y)| {
            let w = 1.0 / (sigma_b2 + sigma_w2 / m as f64);
            (num + w * y, den + w)
        });
    num / den
}

// Search windows on the log scale; wide enough for any data that is not
// numerically degenerate.
const LOG_RATIO_RANGE: (f64, f64) = (-25.0, 25.0);
const LOG_SPAN: f64 = 30.0;
const SCAN_POINTS: usize = 61;
const LOG_XTOL: f64 = 1e-10;

/// Closed-form profile over `(μ, σ_w²)` at a fixed variance ratio `γ`.
struct RatioProfile {
    mu: f64,
    sigma_w2: f64,
    objective: f64,
}

fn ratio_profile(summary: &SummaryStats, gamma: f64, lik: Likelihood) -> RatioProfile {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut log_det = 0.0;
    for (&m, &y) in summary.m().iter().zip(summary.ybar()) {
        let m = m as f64;
        let v = 1.0 + m * gamma;
        num += m / v * y;
        den += m / v;
        log_det += v.ln();
    }
    let mu = num / den;
    let resid: f64 = summary
        .m()
        .iter()
        .zip(summary.ybar())
        .map(|(&m, &y)| {
            let m = m as f64;
            m * (y - mu).powi(2) / (1.0 + m * gamma)
        })
        .sum();
    let s = summary.sse() + resid;
    let big_n = summary.total() as f64;
    let (dof, extra) = match lik {
        Likelihood::Ml => (big_n, 0.0),
        Likelihood::Reml => (big_n - 1.0, den.ln()),
    };
    let sigma_w2 = s / dof;
    RatioProfile {
        mu,
        sigma_w2,
        objective: dof * sigma_w2.ln() + dof + log_det + extra,
    }
}

fn require_within_variation(summary: &SummaryStats) -> Result<()> {
    if summary.sse() > 0.0 {
        Ok(())
    } else {
        Err(Error::Degenerate(
            "sse = 0: the likelihood is unbounded as sigma_w^2 -> 0".into(),
        ))
    }
}

/// Unconstrained maximum-likelihood fit.
pub fn fit_mle(summary: &SummaryStats) -> Result<FitReport> {
    fit(summary, Likelihood::Ml)
}

/// Unconstrained restricted maximum-likelihood fit.
pub fn fit_reml(summary: &SummaryStats) -> Result<FitReport> {
    fit(summary, Likelihood::Reml)
}

pub fn fit(summary: &SummaryStats, lik: Likelihood) -> Result<FitReport> {
    require_within_variation(summary)?;
    let boundary = ratio_profile(summary, 0.0, lik);
    let interior = minimize_scan(
        |t| ratio_profile(summary, t.exp(), lik).objective,
        LOG_RATIO_RANGE.0,
        LOG_RATIO_RANGE.1,
        SCAN_POINTS,
        LOG_XTOL,
    );
    if boundary.objective <= interior.fx {
        let params = LmmParams::new(boundary.mu, boundary.sigma_w2, 0.0)?;
        return Ok(FitReport {
            params,
            neg2loglik: objective(summary, &params, lik),
            converged: true,
            boundary_sigma_b2: true,
            likelihood: lik,
        });
    }
    let gamma = interior.x.exp();
    let best = ratio_profile(summary, gamma, lik);
    let params = LmmParams::new(best.mu, best.sigma_w2, gamma * best.sigma_w2)?;
    if !interior.converged || interior.x >= LOG_RATIO_RANGE.1 {
        return Err(Error::NotConverged {
            iterations: SCAN_POINTS,
            best: params,
        });
    }
    Ok(FitReport {
        params,
        neg2loglik: objective(summary, &params, lik),
        converged: true,
        boundary_sigma_b2: false,
        likelihood: lik,
    })
}

fn objective(summary: &SummaryStats, params: &LmmParams, lik: Likelihood) -> f64 {
    let base = neg2ll_raw(summary, params.mu, params.sigma_w2, params.sigma_b2);
    match lik {
        Likelihood::Ml => base,
        Likelihood::Reml => base + sum_weights(summary, params.sigma_w2, params.sigma_b2).ln(),
    }
}

/// Maximum-likelihood fit under `μ² + σ_w² + σ_b² = ρ0²`.
pub fn fit_mle_null(summary: &SummaryStats, rho0: f64) -> Result<FitReport> {
    fit_null(summary, rho0, Likelihood::Ml)
}

/// Restricted-likelihood fit under `μ² + σ_w² + σ_b² = ρ0²`.
pub fn fit_reml_null(summary: &SummaryStats, rho0: f64) -> Result<FitReport> {
    fit_null(summary, rho0, Likelihood::Reml)
}

/// Constrained fit over `{σ_w² > 0, σ_b² ≥ 0, σ_w² + σ_b² ≤ ρ0²}` with
/// `μ = ±√(ρ0² − σ_w² − σ_b²)`, the sign taken from the unconstrained `μ̂`
/// (both signs tried when `μ̂` is numerically zero).
pub fn fit_null(summary: &SummaryStats, rho0: f64, lik: Likelihood) -> Result<FitReport> {
    if !(rho0 > 0.0 && rho0.is_finite()) {
        return Err(Error::domain(format!("rho0 must be positive, got {rho0}")));
    }
    require_within_variation(summary)?;
    let free = fit(summary, lik)?;
    let signs: &[f64] = if free.params.mu.abs() < 1e-12 {
        &[1.0, -1.0]
    } else if free.params.mu > 0.0 {
        &[1.0]
    } else {
        &[-1.0]
    };
    let rho2 = rho0 * rho0;
    let log_rho2 = rho2.ln();

    let mut best: Option<(FitReport, f64)> = None;
    for &sign in signs {
        let eval = |total: f64, sigma_w2: f64| {
            let params = LmmParams {
                mu: sign * (rho2 - total).max(0.0).sqrt(),
                sigma_w2,
                sigma_b2: (total - sigma_w2).max(0.0),
            };
            objective(summary, &params, lik)
        };
        // Inner: best split of a given total variance; ln σ_w² ∈ [ln t − span, ln t].
        let inner = |log_total: f64| -> Minimum {
            minimize_scan(
                |lw| eval(log_total.exp(), lw.min(log_total).exp()),
                log_total - LOG_SPAN,
                log_total,
                SCAN_POINTS,
                LOG_XTOL,
            )
        };
        let outer = minimize_scan(|lt| inner(lt).fx, log_rho2 - LOG_SPAN, log_rho2, SCAN_POINTS, LOG_XTOL);
        let log_total = outer.x.min(log_rho2);
        let split = inner(log_total);
        let total = log_total.exp();
        let sigma_w2 = split.x.min(log_total).exp();
        let params = LmmParams {
            mu: sign * (rho2 - total).max(0.0).sqrt(),
            sigma_w2,
            sigma_b2: (total - sigma_w2).max(0.0),
        };
        let converged = outer.converged && split.converged;
        let value = objective(summary, &params, lik);
        let report = FitReport {
            params,
            neg2loglik: value,
            converged,
            boundary_sigma_b2: params.sigma_b2 == 0.0,
            likelihood: lik,
        };
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((report, value));
        }
    }
    let (report, _) = best.expect("at least one sign is evaluated");
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: SCAN_POINTS,
            best: report.params,
        });
    }
    Ok(report)
}

/// Unconstrained ML estimates rescaled so that `μ² + σ_w² + σ_b² = ρ0²`.
pub fn scaled_null(summary: &SummaryStats, rho0: f64) -> Result<LmmParams> {
    if !(rho0 > 0.0 && rho0.is_finite()) {
        return Err(Error::domain(format!("rho0 must be positive, got {rho0}")));
    }
    let p = fit_mle(summary)?.params;
    let c = rho0 * rho0 / p.rms().powi(2);
    LmmParams::new(p.mu * c.sqrt(), p.sigma_w2 * c, p.sigma_b2 * c)
}
