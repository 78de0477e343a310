//! Firm-level micro-model and the calibration pipeline.
//!
//! Firms produce with `q = 2√k`, sell at `P·u` where `u` is a uniform
//! multiplicative price shock, and pay a quadratic bankruptcy cost when they
//! fail. Two states are tracked: fragile firms (subscript 1, equity ratio
//! below the endogenous threshold `ā`) and robust firms (subscript 0). The
//! calibration turns the exogenous [`ModelParams`] into the intensive
//! birth/death parameters `λ = ζ(1−η)` and `γ = ιη` of the occupation-number
//! process.

use rand::Rng;

use crate::error::{Error, Result};

/// Support of the multiplicative price shock `ũ ~ U[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShockSupport {
    pub lo: f64,
    pub hi: f64,
}

impl Default for ShockSupport {
    fn default() -> Self {
        ShockSupport { lo: 0.75, hi: 1.25 }
    }
}

/// Damping applied to the fragile-output fixed-point iteration.
pub const FIXED_POINT_DAMPING: f64 = 0.5;
/// Iteration budget of the damped iteration before falling back to bisection.
pub const FIXED_POINT_MAX_ITER: usize = 10_000;
/// Residual tolerance of the fragile-output fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-12;

impl ShockSupport {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::domain(
                "shock support",
                format!("need finite shock_lo < shock_hi, got [{lo}, {hi}]"),
            ));
        }
        Ok(ShockSupport { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mean(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Clamp a raw shock threshold into the support.
    pub fn clip(&self, raw: f64) -> f64 {
        raw.clamp(self.lo, self.hi)
    }

    /// `P(ũ ≤ ū)` for an already clipped threshold; `2ū − 1.5` on the default support.
    pub fn failure_probability(&self, u_bar: f64) -> Result<f64> {
        if !(self.lo..=self.hi).contains(&u_bar) {
            return Err(Error::contract(
                "bankruptcy_probability",
                format!(
                    "threshold {u_bar} lies outside the shock support [{}, {}]; clip it first",
                    self.lo, self.hi
                ),
            ));
        }
        Ok(self.cdf_clipped(u_bar))
    }

    #[inline]
    fn cdf_clipped(&self, u_bar: f64) -> f64 {
        ((u_bar - self.lo) / self.width()).clamp(0.0, 1.0)
    }

    /// Minimum equity ratio of a fragile firm producing `q1` with zero failure
    /// probability: `r − 2·lo/q1` (`r − 1.5/q1` on the default support).
    pub fn equity_threshold(&self, r: f64, q1: f64) -> Result<f64> {
        if !(q1 > 0.0) {
            return Err(Error::domain(
                "equity_threshold",
                format!("fragile output must be positive, got {q1}"),
            ));
        }
        Ok(r - 2.0 * self.lo / q1)
    }

    /// Probability that a robust firm deteriorates (y → x).
    pub fn transition_zeta(&self, q0: f64, r: f64, a_bar: f64, a0: f64) -> Result<f64> {
        if !(q0 > 0.0) {
            return Err(Error::domain(
                "transition_zeta",
                format!("robust output must be positive, got {q0}"),
            ));
        }
        let u_zeta = self.clip(0.5 * q0 * (r + a_bar - a0));
        Ok(self.cdf_clipped(u_zeta))
    }

    /// Probability that a fragile firm recovers (x → y).
    pub fn transition_iota(&self, q1: f64, r: f64, a_bar: f64, a1: f64) -> Result<f64> {
        if !(q1 > 0.0) {
            return Err(Error::domain(
                "transition_iota",
                format!("fragile output must be positive, got {q1}"),
            ));
        }
        let u_iota = self.clip(0.5 * q1 * (r + a_bar - a1));
        Ok(1.0 - self.cdf_clipped(u_iota))
    }

    /// Draw one price shock.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.lo + self.width() * rng.random::<f64>()
    }

    /// Self-consistent optimal output of fragile firms.
    ///
    /// The optimal output `q1 = 1/(r + 2cμ)` depends on the failure
    /// probability, which in turn depends on output through the bankruptcy
    /// threshold `ū = (q1/2)(r − a1)`. The composed map `μ ↦ F(clip(ū(q1(μ))))`
    /// is continuous and nonincreasing on `[0, 1]`, so the fixed point is
    /// unique. A damped iteration is tried first; bisection on
    /// `μ − F(ū(μ))` takes over if it stalls.
    pub fn solve_fragile_output(&self, r: f64, c: f64, a1: f64) -> Result<FragileOutput> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::domain(
                "solve_fragile_output",
                format!("interest rate must be positive, got {r}"),
            ));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::domain(
                "solve_fragile_output",
                format!("bankruptcy-cost coefficient must be positive, got {c}"),
            ));
        }
        if !a1.is_finite() {
            return Err(Error::domain(
                "solve_fragile_output",
                format!("fragile equity ratio must be finite, got {a1}"),
            ));
        }

        let image = |mu: f64| {
            let q1 = 1.0 / (r + 2.0 * c * mu);
            self.cdf_clipped(self.clip(0.5 * q1 * (r - a1)))
        };
        let residual = |mu: f64| (mu - image(mu)).abs();

        let mut mu = 0.0;
        for it in 1..=FIXED_POINT_MAX_ITER {
            let next = (1.0 - FIXED_POINT_DAMPING) * mu + FIXED_POINT_DAMPING * image(mu);
            mu = next;
            if residual(mu) <= FIXED_POINT_TOL {
                return Ok(self.fragile_output(r, c, a1, mu, residual(mu), it, Method::Damped));
            }
        }

        // φ(0) ≤ 0 ≤ φ(1) always holds since the image lies in [0, 1].
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        let mut best = if residual(lo) <= residual(hi) { lo } else { hi };
        let mut iterations = 0;
        while iterations < 200 {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            if residual(mid) < residual(best) {
                best = mid;
            }
            if residual(best) <= FIXED_POINT_TOL || mid <= lo || mid >= hi {
                break;
            }
            if mid - image(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let res = residual(best);
        if res <= FIXED_POINT_TOL {
            Ok(self.fragile_output(
                r,
                c,
                a1,
                best,
                res,
                FIXED_POINT_MAX_ITER + iterations,
                Method::Bisection,
            ))
        } else {
            Err(Error::Convergence {
                what: "solve_fragile_output",
                iterations: FIXED_POINT_MAX_ITER + iterations,
                last: best,
                residual: res,
            })
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn fragile_output(
        &self,
        r: f64,
        c: f64,
        a1: f64,
        mu: f64,
        residual: f64,
        iterations: usize,
        method: Method,
    ) -> FragileOutput {
        let q1 = 1.0 / (r + 2.0 * c * mu);
        FragileOutput {
            q1,
            mu,
            u_bar: self.clip(0.5 * q1 * (r - a1)),
            residual,
            iterations,
            method,
        }
    }
}

/// Which branch of the fixed-point solver produced the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Damped,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FragileOutput {
    pub q1: f64,
    pub mu: f64,
    /// Clipped bankruptcy threshold.
    pub u_bar: f64,
    pub residual: f64,
    pub iterations: usize,
    pub method: Method,
}

/// Production technology `q = 2√k`.
pub fn production(k: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(Error::domain(
            "production",
            format!("capital must be ≥ 0, got {k}"),
        ));
    }
    Ok(2.0 * k.sqrt())
}

/// Capital needed to produce `q`: `q²/2`.
pub fn capital_demand(q: f64) -> Result<f64> {
    if !(q >= 0.0) {
        return Err(Error::domain(
            "capital_demand",
            format!("output must be ≥ 0, got {q}"),
        ));
    }
    Ok(0.5 * q * q)
}

pub fn profit(price: f64, u: f64, q: f64, r: f64, capital: f64) -> f64 {
    price * u * q - r * capital
}

pub fn bankruptcy_cost(c: f64, price: f64, u: f64, q: f64) -> f64 {
    let sales = price * u * q;
    c * sales * sales
}

/// Optimal output of robust firms, which face no failure risk.
pub fn robust_output(r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(
            "robust_output",
            format!("interest rate must be positive, got {r}"),
        ));
    }
    Ok(1.0 / r)
}

/// `(λ, γ) = (ζ(1−η), ιη)`.
pub fn intensive_rates(zeta: f64, iota: f64, eta: f64) -> (f64, f64) {
    (zeta * (1.0 - eta), iota * eta)
}

/// Exogenous description of the economy.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Number of firms, constant over time.
    pub n: usize,
    pub r: f64,
    pub c: f64,
    /// Equity ratio of robust firms.
    pub a0: f64,
    /// Equity ratio of fragile firms.
    pub a1: f64,
    /// A-priori probability of the fragile state.
    pub eta: f64,
    /// Reference price level.
    pub price: f64,
    pub shock: ShockSupport,
}

impl ModelParams {
    pub fn new(n: usize, r: f64, c: f64, a0: f64, a1: f64, eta: f64) -> Result<Self> {
        let params = ModelParams {
            n,
            r,
            c,
            a0,
            a1,
            eta,
            price: 1.0,
            shock: ShockSupport::default(),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::domain("N", "firm count must be at least 1"));
        }
        if !(self.r > 0.0) || !self.r.is_finite() {
            return Err(Error::domain(
                "r",
                format!("interest rate must be positive, got {}", self.r),
            ));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(Error::domain("c", format!("c out of (0,1): {}", self.c)));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(Error::domain(
                "eta",
                format!("eta out of [0,1]: {}", self.eta),
            ));
        }
        if !(self.price > 0.0) || !self.price.is_finite() {
            return Err(Error::domain(
                "P",
                format!("price must be positive, got {}", self.price),
            ));
        }
        if !self.a0.is_finite() || !self.a1.is_finite() {
            return Err(Error::domain("equity ratio", "a0 and a1 must be finite"));
        }
        ShockSupport::new(self.shock.lo, self.shock.hi)?;
        Ok(())
    }
}

/// Transition machinery derived from [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedRates {
    pub q1: f64,
    pub q0: f64,
    pub mu: f64,
    pub u_bar: f64,
    pub a_bar: f64,
    pub zeta: f64,
    pub iota: f64,
    pub lambda: f64,
    pub gamma: f64,
    /// Residual of the fragile-output fixed point.
    pub residual: f64,
}

impl CalibratedRates {
    /// Both intensive rates vanish: the occupation number never moves.
    pub fn is_degenerate(&self) -> bool {
        self.lambda + self.gamma <= 0.0
    }
}

/// Run the calibration pipeline: fragile fixed point, robust output,
/// equity threshold, transition probabilities, intensive rates.
pub fn calibrate(params: &ModelParams) -> Result<CalibratedRates> {
    params.validate()?;
    let shock = params.shock;
    let fragile = shock.solve_fragile_output(params.r, params.c, params.a1)?;
    let q0 = robust_output(params.r)?;
    let a_bar = shock.equity_threshold(params.r, fragile.q1)?;
    let zeta = shock.transition_zeta(q0, params.r, a_bar, params.a0)?;
    let iota = shock.transition_iota(fragile.q1, params.r, a_bar, params.a1)?;
    let (lambda, gamma) = intensive_rates(zeta, iota, params.eta);
    Ok(CalibratedRates {
        q1: fragile.q1,
        q0,
        mu: fragile.mu,
        u_bar: fragile.u_bar,
        a_bar,
        zeta,
        iota,
        lambda,
        gamma,
        residual: fragile.residual,
    })
}

/// One firm's realized accounts for a given output and shock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirmSnapshot {
    pub q: f64,
    pub k: f64,
    pub u: f64,
    pub pi: f64,
    pub bankruptcy_cost: f64,
}

impl FirmSnapshot {
    pub fn new(params: &ModelParams, q: f64, u: f64) -> Result<Self> {
        let k = capital_demand(q)?;
        Ok(FirmSnapshot {
            q,
            k,
            u,
            pi: profit(params.price, u, q, params.r, k),
            bankruptcy_cost: bankruptcy_cost(params.c, params.price, u, q),
        })
    }
}
