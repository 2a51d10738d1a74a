//! Proper-scoring-rule estimators and deterministic forecast metrics: fair
//! and biased CRPS, the closed-form Gaussian CRPS, RMSE, and the
//! spread-skill ratio. All accumulation is in f64 to avoid cancellation
//! over large grids.

use crate::error::{Error, Result};

/// A Gaussian predictive distribution, used as the analytic CRPS oracle.
#[derive(Debug, Clone, Copy)]
pub struct GaussianForecast {
    pub mean: f64,
    pub std: f64,
}

impl GaussianForecast {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) || !mean.is_finite() || !std.is_finite() {
            return Err(Error::Config(format!(
                "GaussianForecast requires finite mean and std > 0, got ({mean}, {std})"
            )));
        }
        Ok(GaussianForecast { mean, std })
    }
}

/// An ensemble paired with its verifying observation at one (grid point,
/// variable).
#[derive(Debug, Clone)]
pub struct EnsembleSample {
    pub members: Vec<f64>,
    pub observation: f64,
}

impl EnsembleSample {
    pub fn new(members: Vec<f64>, observation: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Contract("ensemble needs at least one member".into()));
        }
        if !observation.is_finite() || members.iter().any(|m| !m.is_finite()) {
            return Err(Error::Numeric("non-finite ensemble member or observation".into()));
        }
        Ok(EnsembleSample { members, observation })
    }

    pub fn crps_fair(&self) -> Result<f64> {
        crps_fair(&self.members, self.observation)
    }
}

fn check_members(members: &[f64], observation: f64) -> Result<()> {
    if !observation.is_finite() || members.iter().any(|m| !m.is_finite()) {
        return Err(Error::Numeric("non-finite ensemble member or observation".into()));
    }
    Ok(())
}

/// Mean absolute member error and the full N^2 pairwise absolute spread sum.
fn mae_and_pair_sum(members: &[f64], observation: f64) -> (f64, f64) {
    let n = members.len();
    let mut mae = 0.0;
    for &m in members {
        mae += (m - observation).abs();
    }
    mae /= n as f64;
    let mut pair = 0.0;
    for &a in members {
        for &b in members {
            pair += (a - b).abs();
        }
    }
    (mae, pair)
}

/// Fair (unbiased-in-N) CRPS estimator:
/// (1/N) sum |x_n - x| - 1/(2N(N-1)) sum_n sum_n* |x_n - x_n*|.
///
/// Errors for N < 2; it never falls back to the biased form.
pub fn crps_fair(members: &[f64], observation: f64) -> Result<f64> {
    let n = members.len();
    if n < 2 {
        return Err(Error::Contract(
            "fair CRPS is undefined for a single member (1/(N-1) factor)".into(),
        ));
    }
    check_members(members, observation)?;
    let (mae, pair) = mae_and_pair_sum(members, observation);
    Ok(mae - pair / (2.0 * n as f64 * (n as f64 - 1.0)))
}

/// Biased CRPS estimator with the 1/(2N^2) spread coefficient. Defined for
/// N >= 1 (the spread term vanishes at N = 1).
pub fn crps_biased(members: &[f64], observation: f64) -> Result<f64> {
    let n = members.len();
    if n == 0 {
        return Err(Error::Contract("biased CRPS needs at least one member".into()));
    }
    check_members(members, observation)?;
    let (mae, pair) = mae_and_pair_sum(members, observation);
    Ok(mae - pair / (2.0 * (n * n) as f64))
}

/// Standard normal CDF via erf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Closed-form CRPS of a Gaussian forecast:
/// sigma * [ z(2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi) ],  z = (x - mu)/sigma.
pub fn crps_gaussian(forecast: GaussianForecast, observation: f64) -> Result<f64> {
    if !(forecast.std > 0.0) {
        return Err(Error::Config(format!("crps_gaussian needs std > 0, got {}", forecast.std)));
    }
    let z = (observation - forecast.mean) / forecast.std;
    Ok(forecast.std
        * (z * (2.0 * normal_cdf(z) - 1.0) + 2.0 * normal_pdf(z)
            - 1.0 / std::f64::consts::PI.sqrt()))
}

/// Subgradient of the fair CRPS wrt each member:
/// sign(x_n - x)/N - (1/(N(N-1))) sum_{n* != n} sign(x_n - x_n*),
/// with ties contributing 0.
pub fn crps_fair_gradient(members: &[f64], observation: f64) -> Result<Vec<f64>> {
    let n = members.len();
    if n < 2 {
        return Err(Error::Contract("fair CRPS gradient needs N >= 2".into()));
    }
    check_members(members, observation)?;
    let nf = n as f64;
    let mut grad = vec![0.0; n];
    for (i, &mi) in members.iter().enumerate() {
        let mut pair_sign = 0.0;
        for (j, &mj) in members.iter().enumerate() {
            if i != j {
                pair_sign += sign0(mi - mj);
            }
        }
        grad[i] = sign0(mi - observation) / nf - pair_sign / (nf * (nf - 1.0));
    }
    Ok(grad)
}

fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Root of the spatial mean of squared errors. Input is the per-grid-point
/// error of the ensemble mean (signed or not).
pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::Contract("rmse of an empty field".into()));
    }
    let mut acc = 0.0;
    for &e in errors {
        acc += e * e;
    }
    Ok((acc / errors.len() as f64).sqrt())
}

/// Spread-skill ratio outcome. `value` is +inf when the skill denominator
/// vanished; `zero_skill` records that the sentinel fired.
#[derive(Debug, Clone, Copy)]
pub struct SsrValue {
    pub value: f64,
    pub zero_skill: bool,
}

/// Spread-skill ratio:
/// sqrt( ((N+1)/N) * mean_grid(unbiased ensemble variance)
///       / mean_grid((ensemble mean - truth)^2) ).
///
/// The (N+1)/N factor makes SSR = 1 hold exactly in expectation for finite
/// N when the truth is exchangeable with the members; it can be disabled.
pub fn ssr(member_fields: &[&[f64]], truth: &[f64], finite_ensemble_correction: bool) -> Result<SsrValue> {
    let n = member_fields.len();
    if n < 2 {
        return Err(Error::Contract("ssr needs N >= 2 members".into()));
    }
    let cells = truth.len();
    if cells == 0 {
        return Err(Error::Contract("ssr of an empty field".into()));
    }
    for f in member_fields {
        if f.len() != cells {
            return Err(Error::Dim(format!(
                "ssr member field has {} cells, truth has {cells}",
                f.len()
            )));
        }
    }
    let nf = n as f64;
    let mut spread_sq = 0.0;
    let mut skill_sq = 0.0;
    for g in 0..cells {
        let mut mean = 0.0;
        for f in member_fields {
            mean += f[g];
        }
        mean /= nf;
        let mut var = 0.0;
        for f in member_fields {
            let d = f[g] - mean;
            var += d * d;
        }
        spread_sq += var / (nf - 1.0);
        let e = mean - truth[g];
        skill_sq += e * e;
    }
    spread_sq /= cells as f64;
    skill_sq /= cells as f64;
    if finite_ensemble_correction {
        spread_sq *= (nf + 1.0) / nf;
    }
    if skill_sq == 0.0 {
        return Ok(SsrValue { value: f64::INFINITY, zero_skill: true });
    }
    Ok(SsrValue { value: (spread_sq / skill_sq).sqrt(), zero_skill: false })
}

/// Mean fair CRPS of a member-major ensemble field against a truth field.
/// Accumulates per-cell scores in f64.
pub fn crps_fair_field(member_fields: &[&[f64]], truth: &[f64]) -> Result<f64> {
    let n = member_fields.len();
    if n < 2 {
        return Err(Error::Contract("fair CRPS field needs N >= 2".into()));
    }
    let cells = truth.len();
    let mut acc = 0.0;
    let mut column = vec![0.0; n];
    for g in 0..cells {
        for (i, f) in member_fields.iter().enumerate() {
            column[i] = f[g];
        }
        acc += crps_fair(&column, truth[g])?;
    }
    Ok(acc / cells as f64)
}
