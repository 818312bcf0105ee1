//! Generalized pivotal test and confidence interval for the RMS `ρ`.
//!
//! Each Monte Carlo draw simulates `SSE/σ_w² ~ χ²_{N−n}` and
//! `SSR ~ χ²_{n−1}`, giving the pivots
//!
//! ```text
//! Q_w = sse / χ²_{N−n}
//! Q_b = h(ȳ, Q_w, SSR)        (root of ssr_at(Q_b) = SSR, truncated at 0)
//! Q_μ = [ỹ − Z (Σ W̃_i)^{−1/2}]²,   W̃_i = 1/(Q_b + Q_w/m_i)
//! ```
//!
//! and `Q = Q_w + Q_b + Q_μ`. Given `(Q_w, Q_b)`, `(Σ W̃_i)·Q_μ` is noncentral
//! χ²₁ with noncentrality `ỹ² Σ W̃_i`, so the default path integrates `Z` out
//! exactly ([`conditional_exceed`]); [`gt_pvalue_plain`] keeps the literal
//! simulation of `Z` as a cross-check.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::{Hypothesis, Method, SummaryStats, TestResult};
use crate::error::{Error, Result};
use crate::estimation::fit_mle;
use crate::optim::brent_root;
use crate::rng::RandomStream;
use crate::special::{chisq, nc_chisq1_sf_unchecked, normal_quantile_unchecked, Probability};

/// Monte Carlo settings of the generalized test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GtConfig {
    /// Number of pivotal draws.
    pub b: usize,
    pub seed: u64,
    /// Probability-scale tolerance of the CI inversion.
    pub quantile_tol: f64,
    /// Worker threads; `None` runs on the ambient rayon pool. The output does
    /// not depend on this value.
    pub parallelism: Option<usize>,
}

impl Default for GtConfig {
    fn default() -> Self {
        GtConfig {
            b: 10_000,
            seed: 1,
            quantile_tol: 1e-8,
            parallelism: None,
        }
    }
}

impl GtConfig {
    pub fn new(b: usize, seed: u64) -> Self {
        GtConfig {
            b,
            seed,
            ..GtConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.b < 100 {
            return Err(Error::domain(format!("B must be at least 100, got {}", self.b)));
        }
        if !(self.quantile_tol > 0.0 && self.quantile_tol < 0.5) {
            return Err(Error::domain(format!("quantile tolerance {} out of range", self.quantile_tol)));
        }
        if self.parallelism == Some(0) {
            return Err(Error::domain("parallelism must be at least 1"));
        }
        Ok(())
    }
}

/// One realization of `(Q_w, Q_b)` with the constants of the conditional law of `Q_μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PivotalDraw {
    pub qw: f64,
    pub qb: f64,
    /// `qw + qb`.
    pub s: f64,
    /// `Σ_i W̃_i`.
    pub sum_wtilde: f64,
    /// `Σ_i W̃_i ȳ_i / Σ_i W̃_i`.
    pub ytilde: f64,
}

impl PivotalDraw {
    pub fn from_pivots(summary: &SummaryStats, qw: f64, qb: f64) -> Self {
        let (sum_w, sum_wy) = summary
            .m()
            .iter()
            .zip(summary.ybar())
            .fold((0.0, 0.0), |(sw, swy), (&m, &y)| {
                let w = 1.0 / (qb + qw / m as f64);
                (sw + w, swy + w * y)
            });
        PivotalDraw {
            qw,
            qb,
            s: qw + qb,
            sum_wtilde: sum_w,
            ytilde: sum_wy / sum_w,
        }
    }

    /// One realization of `Q` given an independent standard normal `z`.
    pub fn q_given(&self, z: f64) -> f64 {
        self.s + (self.ytilde - z / self.sum_wtilde.sqrt()).powi(2)
    }
}

/// Weighted between-subject sum of squares `Σ W_i (ȳ_i − Ȳ_W)²`,
/// `W_i = 1/(σ_b² + q_w/m_i)`.
pub fn ssr_at(sigma_b2: f64, ybar: &[f64], m: &[usize], qw: f64) -> f64 {
    let (sw, swy) = m.iter().zip(ybar).fold((0.0, 0.0), |(sw, swy), (&mi, &y)| {
        let w = 1.0 / (sigma_b2 + qw / mi as f64);
        (sw + w, swy + w * y)
    });
    let center = swy / sw;
    m.iter()
        .zip(ybar)
        .map(|(&mi, &y)| (y - center).powi(2) / (sigma_b2 + qw / mi as f64))
        .sum()
}

/// `ssr_at` and its derivative in `σ_b²`, `−Σ W_i² (ȳ_i − Ȳ_W)²`.
fn ssr_and_slope(sigma_b2: f64, ybar: &[f64], m: &[usize], qw: f64) -> (f64, f64) {
    let (sw, swy) = m.iter().zip(ybar).fold((0.0, 0.0), |(sw, swy), (&mi, &y)| {
        let w = 1.0 / (sigma_b2 + qw / mi as f64);
        (sw + w, swy + w * y)
    });
    let center = swy / sw;
    m.iter().zip(ybar).fold((0.0, 0.0), |(ssr, slope), (&mi, &y)| {
        let w = 1.0 / (sigma_b2 + qw / mi as f64);
        let r = w * (y - center).powi(2);
        (ssr + r, slope - r * w)
    })
}

const QB_RTOL: f64 = 1e-10;
const QB_NEWTON_STEPS: usize = 100;
const QB_MAX_DOUBLINGS: usize = 1100;

/// Inverts [`ssr_at`] in `σ_b²`: the `σ_b² ≥ 0` with `ssr_at(σ_b²) = ssr_target`,
/// or exactly 0 when the target is at or above `ssr_at(0)`. When all `ȳ_i`
/// coincide `ssr_at` vanishes identically and the answer is 0.
///
/// Newton steps on `1/ssr_at`, which is close to linear in `σ_b²`. An
/// overshoot or a stall hands over to bracketing plus Brent.
pub fn solve_qb(ybar: &[f64], m: &[usize], qw: f64, ssr_target: f64) -> Result<f64> {
    if !(qw > 0.0) {
        return Err(Error::domain(format!("q_w must be positive, got {qw}")));
    }
    if !(ssr_target >= 0.0) {
        return Err(Error::domain(format!("SSR target must be >= 0, got {ssr_target}")));
    }
    let (mut ssr, mut slope) = ssr_and_slope(0.0, ybar, m, qw);
    if ssr <= ssr_target {
        return Ok(0.0);
    }
    let mut x = 0.0;
    for _ in 0..QB_NEWTON_STEPS {
        let step = ssr * (ssr - ssr_target) / (ssr_target * -slope);
        let next = x + step;
        if !(next.is_finite() && step > 0.0) {
            break;
        }
        let (s_next, d_next) = ssr_and_slope(next, ybar, m, qw);
        if s_next < ssr_target {
            return brent_root(
                |b| ssr_at(b, ybar, m, qw) - ssr_target,
                x,
                next,
                ssr - ssr_target,
                s_next - ssr_target,
                0.0,
                QB_RTOL,
                200,
            );
        }
        x = next;
        ssr = s_next;
        slope = d_next;
        if step <= QB_RTOL * x || ssr == ssr_target {
            return Ok(x);
        }
    }
    bracket_and_solve(ybar, m, qw, ssr_target, x, ssr - ssr_target)
}

fn bracket_and_solve(ybar: &[f64], m: &[usize], qw: f64, ssr_target: f64, lo: f64, flo: f64) -> Result<f64> {
    let f = |b: f64| ssr_at(b, ybar, m, qw) - ssr_target;
    let (mut lo, mut flo) = (lo, flo);
    let mut hi = lo.max(0.5) * 2.0;
    let mut fhi = f(hi);
    let mut doublings = 0;
    while fhi > 0.0 {
        if doublings == QB_MAX_DOUBLINGS {
            return Err(Error::Numerical(format!(
                "no upper bracket for sigma_b^2 with SSR target {ssr_target}"
            )));
        }
        lo = hi;
        flo = fhi;
        hi *= 2.0;
        fhi = f(hi);
        doublings += 1;
    }
    brent_root(f, lo, hi, flo, fhi, 0.0, QB_RTOL, 200)
}

/// Chi-square laws of one summary, built once and reused for every draw.
#[derive(Debug, Clone)]
pub(crate) struct PivotalSampler<'a> {
    summary: &'a SummaryStats,
    within: ChiSquared<f64>,
    between: ChiSquared<f64>,
}

impl<'a> PivotalSampler<'a> {
    pub(crate) fn new(summary: &'a SummaryStats) -> Result<Self> {
        if !(summary.sse() > 0.0) {
            return Err(Error::Degenerate(
                "degenerate within-subject variance: sse = 0".into(),
            ));
        }
        Ok(PivotalSampler {
            summary,
            within: chisq(summary.within_df() as f64)?,
            between: chisq((summary.n() - 1) as f64)?,
        })
    }

    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PivotalDraw> {
        let qw = self.summary.sse() / self.within.sample(rng);
        let ssr = self.between.sample(rng);
        let qb = solve_qb(self.summary.ybar(), self.summary.m(), qw, ssr)?;
        Ok(PivotalDraw::from_pivots(self.summary, qw, qb))
    }
}

/// Draws `(Q_w, Q_b)`: `χ²_{N−n}` first, then `χ²_{n−1}`, from `rng`.
pub fn draw_pivotal<R: Rng + ?Sized>(summary: &SummaryStats, rng: &mut R) -> Result<PivotalDraw> {
    PivotalSampler::new(summary)?.draw(rng)
}

/// `P(Q ≥ q | Q_w, Q_b)`.
pub fn conditional_exceed(draw: &PivotalDraw, q: f64) -> Probability {
    Probability::saturating(exceed(draw, q))
}

#[inline]
fn exceed(draw: &PivotalDraw, q: f64) -> f64 {
    if q <= draw.s {
        return 1.0;
    }
    nc_chisq1_sf_unchecked(
        draw.sum_wtilde * (q - draw.s),
        draw.ytilde * draw.ytilde * draw.sum_wtilde,
    )
}

/// Runs `f(k)` for `k = 1..=b` and returns the results in index order.
pub(crate) fn map_indexed<T, F>(b: usize, parallelism: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let run = || (1..=b as u64).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match parallelism {
        None => run(),
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(run),
    }
}

/// `B` pivotal draws of one dataset; draw `k` uses substream `k` of the seed.
#[derive(Debug, Clone)]
pub struct PivotalSample {
    draws: Vec<PivotalDraw>,
    quantile_tol: f64,
}

impl PivotalSample {
    pub fn generate(summary: &SummaryStats, cfg: &GtConfig) -> Result<Self> {
        cfg.validate()?;
        Self::generate_from(summary, RandomStream::new(cfg.seed), cfg)
    }

    /// As [`generate`](Self::generate) with draw `k` on `root.substream(k)`.
    pub fn generate_from(summary: &SummaryStats, root: RandomStream, cfg: &GtConfig) -> Result<Self> {
        let sampler = PivotalSampler::new(summary)?;
        let draws = map_indexed(cfg.b, cfg.parallelism, |k| {
            sampler.draw(&mut root.substream(k).rng())
        })?;
        Ok(PivotalSample {
            draws,
            quantile_tol: cfg.quantile_tol,
        })
    }

    pub fn draws(&self) -> &[PivotalDraw] {
        &self.draws
    }

    /// Generalized p-value for `H0: ρ ≥ ρ0`: the mean of `P(Q ≥ ρ0² | draw)`.
    pub fn pvalue(&self, rho0: f64) -> Probability {
        let q = rho0 * rho0;
        let total: f64 = self.draws.iter().map(|d| exceed(d, q)).sum();
        Probability::saturating(total / self.draws.len() as f64)
    }

    /// Marginal CDF of `Q`, averaged over draws.
    pub fn cdf(&self, q: f64) -> f64 {
        let total: f64 = self.draws.iter().map(|d| exceed(d, q)).sum();
        1.0 - total / self.draws.len() as f64
    }

    /// Upper end of the search bracket for quantiles of `Q`.
    fn upper_bracket(&self) -> f64 {
        let max_s = self.draws.iter().map(|d| d.s).fold(0.0, f64::max);
        let max_y = self.draws.iter().map(|d| d.ytilde.abs()).fold(0.0, f64::max);
        let min_w = self.draws.iter().map(|d| d.sum_wtilde).fold(f64::INFINITY, f64::min);
        max_s + (max_y + 8.0 / min_w.sqrt()).powi(2)
    }

    /// Bracket for the `prob` quantile from a stratified pseudo-sample of `Q`:
    /// draw `k` is paired with a fixed normal score, and the bracket spans
    /// about four binomial standard errors of ranks around `prob`.
    fn quantile_bracket(&self, prob: f64) -> (f64, f64) {
        let b = self.draws.len();
        let stride = [7919usize, 7927, 7933].into_iter().find(|p| !b.is_multiple_of(*p)).unwrap_or(1);
        let mut q: Vec<f64> = self
            .draws
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let j = (k * stride) % b;
                d.q_given(normal_quantile_unchecked((j as f64 + 0.5) / b as f64))
            })
            .collect();
        let spread = (4.0 * (b as f64 * prob * (1.0 - prob)).sqrt()).ceil() as usize + 2;
        let centre = (prob * b as f64).ceil() as usize;
        let lo_rank = centre.saturating_sub(spread + 1);
        let hi_rank = (centre + spread).min(b - 1);
        let (_, &mut hi, _) = q.select_nth_unstable_by(hi_rank, f64::total_cmp);
        let (_, &mut lo, _) = q[..=hi_rank].select_nth_unstable_by(lo_rank, f64::total_cmp);
        (lo, hi)
    }

    /// The `q` with `cdf(q) = prob`.
    pub fn quantile(&self, prob: f64) -> Result<f64> {
        if !(prob > 0.0 && prob < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0, 1), got {prob}")));
        }
        let (mut lo, mut hi) = self.quantile_bracket(prob);
        let mut f_lo = self.cdf(lo) - prob;
        if f_lo >= 0.0 {
            lo = 0.0;
            f_lo = self.cdf(lo) - prob;
        }
        let mut f_hi = self.cdf(hi) - prob;
        if f_hi <= 0.0 {
            hi = self.upper_bracket();
            f_hi = self.cdf(hi) - prob;
        }
        if !(f_lo < 0.0 && f_hi > 0.0) {
            return Err(Error::Numerical(format!(
                "quantile {prob} not bracketed by [{lo}, {hi}] (F = {}, {})",
                f_lo + prob,
                f_hi + prob
            )));
        }
        let q = brent_root(|q| self.cdf(q) - prob, lo, hi, f_lo, f_hi, 0.0, 1e-10, 300)?;
        let miss = (self.cdf(q) - prob).abs();
        if miss > self.quantile_tol {
            return Err(Error::Numerical(format!(
                "quantile inversion missed level {prob} by {miss:e}"
            )));
        }
        Ok(q)
    }

    /// `1 − alpha` generalized CI for `ρ` by inverting the averaged conditional CDF.
    pub fn ci(&self, alpha: f64) -> Result<(f64, f64)> {
        check_alpha(alpha)?;
        let lo = self.quantile(alpha / 2.0)?;
        let hi = self.quantile(1.0 - alpha / 2.0)?;
        Ok((lo.sqrt(), hi.sqrt()))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// `B` realizations of `Q` with `Z` simulated explicitly.
#[derive(Debug, Clone)]
pub struct PlainSample {
    q: Vec<f64>,
}

impl PlainSample {
    pub fn generate(summary: &SummaryStats, cfg: &GtConfig) -> Result<Self> {
        cfg.validate()?;
        Self::generate_from(summary, RandomStream::new(cfg.seed), cfg)
    }

    /// Draw `k` consumes the same two chi-square variates as
    /// [`PivotalSample::generate_from`], then one standard normal.
    pub fn generate_from(summary: &SummaryStats, root: RandomStream, cfg: &GtConfig) -> Result<Self> {
        let sampler = PivotalSampler::new(summary)?;
        let q = map_indexed(cfg.b, cfg.parallelism, |k| {
            let mut rng = root.substream(k).rng();
            let draw = sampler.draw(&mut rng)?;
            let z: f64 = StandardNormal.sample(&mut rng);
            Ok(draw.q_given(z))
        })?;
        Ok(PlainSample { q })
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    /// `#{Q ≥ ρ0²} / B`.
    pub fn pvalue(&self, rho0: f64) -> Probability {
        let q0 = rho0 * rho0;
        let hits = self.q.iter().filter(|&&q| q >= q0).count();
        Probability::saturating(hits as f64 / self.q.len() as f64)
    }

    /// Order-statistic interval `[√Q_(⌈Bα/2⌉), √Q_(⌈B(1−α/2)⌉)]`.
    pub fn ci(&self, alpha: f64) -> Result<(f64, f64)> {
        check_alpha(alpha)?;
        let mut sorted = self.q.clone();
        sorted.sort_by(f64::total_cmp);
        let b = sorted.len() as f64;
        let pick = |level: f64| {
            let k = ((b * level).ceil() as usize).clamp(1, sorted.len());
            sorted[k - 1].sqrt()
        };
        Ok((pick(alpha / 2.0), pick(1.0 - alpha / 2.0)))
    }
}

/// Generalized test of `H0: ρ ≥ ρ0` with its `1 − alpha` generalized CI, both
/// from the same `B` draws with `Z` integrated out.
pub fn gt_pvalue(summary: &SummaryStats, hyp: &Hypothesis, cfg: &GtConfig) -> Result<TestResult> {
    let sample = PivotalSample::generate(summary, cfg)?;
    let ci = sample.ci(hyp.alpha)?;
    Ok(TestResult {
        method: Method::Gt,
        p_value: sample.pvalue(hyp.rho0),
        ci_rho: ci,
        ci_rho2: None,
        estimates: fit_mle(summary)?.params,
        b: Some(cfg.b),
        seed: Some(cfg.seed),
    })
}

/// Generalized test by plain Monte Carlo over `Z`, with the order-statistic CI.
pub fn gt_pvalue_plain(summary: &SummaryStats, hyp: &Hypothesis, cfg: &GtConfig) -> Result<TestResult> {
    let sample = PlainSample::generate(summary, cfg)?;
    Ok(TestResult {
        method: Method::GtPlain,
        p_value: sample.pvalue(hyp.rho0),
        ci_rho: sample.ci(hyp.alpha)?,
        ci_rho2: None,
        estimates: fit_mle(summary)?.params,
        b: Some(cfg.b),
        seed: Some(cfg.seed),
    })
}

/// `1 − alpha` generalized CI for `ρ`.
pub fn gt_ci(summary: &SummaryStats, alpha: f64, cfg: &GtConfig) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    PivotalSample::generate(summary, cfg)?.ci(alpha)
}
