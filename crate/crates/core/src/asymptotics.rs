//! Macroscopic drift, linear-noise fluctuations and aggregate output.
//!
//! Writing `N₁ = N·m + √N·s`, the leading order gives the deterministic drift
//! `dN₁/dt = −(λ+γ)N₁ + λN`. The next order is a linear Fokker–Planck equation
//! for the spread `s` with drift `−(λ+γ)s` and diffusion `½(b + d)/N`
//! evaluated on the drift, so `Var(s)` obeys
//! `dσ²/dt = −2(λ+γ)σ² + λ(1 − m) + γm`. For linear rates this variance
//! equation is exact, and its fixed point `λγ/(λ+γ)²` equals the binomial
//! variance `m*(1 − m*)`.

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::jump::BirthDeath;
use crate::master::ProbabilityVector;
use crate::model::CalibratedRates;

fn kappa(process: &BirthDeath) -> f64 {
    process.lambda + process.gamma
}

fn require_rates(what: &'static str, process: &BirthDeath) -> Result<()> {
    if process.is_degenerate() {
        return Err(Error::domain(what, "λ + γ must be positive"));
    }
    Ok(())
}

/// `dN₁/dt = −(λ+γ)N₁ + λN`.
pub fn macro_rhs(n1: f64, process: &BirthDeath) -> f64 {
    -kappa(process) * n1 + process.lambda * process.n as f64
}

/// `m* = λ/(λ+γ)`.
pub fn stationary_drift(process: &BirthDeath) -> Result<f64> {
    require_rates("stationary_drift", process)?;
    Ok(process.lambda / kappa(process))
}

/// `m(t) = m* + (m0 − m*)e^{−(λ+γ)t}`; constant when both rates vanish.
pub fn drift_solution(m0: f64, t: f64, process: &BirthDeath) -> f64 {
    match stationary_drift(process) {
        Ok(m_star) => m_star + (m0 - m_star) * (-kappa(process) * t).exp(),
        Err(_) => m0,
    }
}

/// Stationary variance of the intensive spread, `λγ/(λ+γ)²`.
pub fn spread_stationary_variance(process: &BirthDeath) -> Result<f64> {
    require_rates("spread_stationary_variance", process)?;
    let k = kappa(process);
    Ok(process.lambda * process.gamma / (k * k))
}

/// Spread variance at time `t` for a deterministic start at share `m0`:
/// `σ²(t) = σ*²(1 − e^{−2κt}) − (λ − γ)(m0 − m*)(e^{−κt} − e^{−2κt})/κ`.
pub fn spread_variance(m0: f64, t: f64, process: &BirthDeath) -> f64 {
    let Ok(var_star) = spread_stationary_variance(process) else {
        return 0.0;
    };
    let k = kappa(process);
    let m_star = process.lambda / k;
    let e1 = (-k * t).exp();
    let e2 = e1 * e1;
    let v =
        var_star * (1.0 - e2) - (process.lambda - process.gamma) * (m0 - m_star) * (e1 - e2) / k;
    v.max(0.0)
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Gaussian approximation of the occupation-number distribution at time `t`:
/// mean `N·m(t)`, variance `N·σ²(t)`, integrated over the unit cells
/// `[k − ½, k + ½]` and renormalized onto `{0, …, N}`.
pub fn gaussian_approximation(process: &BirthDeath, m0: f64, t: f64) -> Result<ProbabilityVector> {
    let n = process.n;
    if n < 10 {
        return Err(Error::domain(
            "gaussian_approximation",
            format!("needs N ≥ 10, got {n}"),
        ));
    }
    if !(0.0..=1.0).contains(&m0) || !(t >= 0.0) {
        return Err(Error::domain(
            "gaussian_approximation",
            format!("need m0 in [0,1] and t ≥ 0, got m0={m0}, t={t}"),
        ));
    }
    let nf = n as f64;
    let mean = nf * drift_solution(m0, t, process);
    let sd = (nf * spread_variance(m0, t, process)).sqrt();
    let mut p = vec![0.0; n + 1];
    if sd < 1e-12 {
        p[mean.round().clamp(0.0, nf) as usize] = 1.0;
    } else {
        for (k, pk) in p.iter_mut().enumerate() {
            let lo = (k as f64 - 0.5 - mean) / sd;
            let hi = (k as f64 + 0.5 - mean) / sd;
            *pk = std_normal_cdf(hi) - std_normal_cdf(lo);
        }
        let total: f64 = p.iter().sum();
        if !(total > 0.0) {
            p.iter_mut().for_each(|x| *x = 0.0);
            p[mean.round().clamp(0.0, nf) as usize] = 1.0;
        } else {
            p.iter_mut().for_each(|x| *x /= total);
        }
    }
    Ok(ProbabilityVector { p, t })
}

/// `Y = N₁/(r + 2cμ) + N₀/r`.
pub fn aggregate_output(n1: f64, n0: f64, r: f64, c: f64, mu: f64) -> f64 {
    n1 / (r + 2.0 * c * mu) + n0 / r
}

/// `Yᵉ = N[1/r − m*·2cμ/(r(r + 2cμ))]`.
pub fn stationary_output(n: usize, r: f64, c: f64, mu: f64, m_star: f64) -> f64 {
    n as f64 * (1.0 / r - m_star * 2.0 * c * mu / (r * (r + 2.0 * c * mu)))
}

/// Drift, spread variance and output along a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPath {
    pub grid: Vec<f64>,
    pub m: Vec<f64>,
    pub var_s: Vec<f64>,
    pub y: Vec<f64>,
}

impl MacroPath {
    pub fn compute(
        process: &BirthDeath,
        rates: &CalibratedRates,
        r: f64,
        c: f64,
        m0: f64,
        grid: &[f64],
    ) -> Self {
        let nf = process.n as f64;
        let m: Vec<f64> = grid
            .iter()
            .map(|&t| drift_solution(m0, t, process))
            .collect();
        let var_s = grid
            .iter()
            .map(|&t| spread_variance(m0, t, process))
            .collect();
        let y = m
            .iter()
            .map(|&mi| aggregate_output(nf * mi, nf * (1.0 - mi), r, c, rates.mu))
            .collect();
        MacroPath {
            grid: grid.to_vec(),
            m,
            var_s,
            y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    pub m_star: f64,
    pub var_star: f64,
    pub y_e: f64,
}

impl SteadyState {
    pub fn compute(process: &BirthDeath, rates: &CalibratedRates, r: f64, c: f64) -> Result<Self> {
        let m_star = stationary_drift(process)?;
        Ok(SteadyState {
            m_star,
            var_star: spread_stationary_variance(process)?,
            y_e: stationary_output(process.n, r, c, rates.mu, m_star),
        })
    }
}
