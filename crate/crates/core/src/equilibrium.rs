//! Statistical-equilibrium diagnostics of the two-state economy.
//!
//! Maximizing the Shannon entropy of the shares `(n₁, n₀)` subject to
//! normalization and a mean-output constraint `n₁y₁ + n₀y₀ = ȳ` gives a
//! closed-form inverse-uncertainty parameter `β`. Together with the outcome
//! gap `g = (y₀ − y₁)/2` it fixes the minimum of the potential
//! `U(n) = −2gn − H(n)/β`, which sits at the logistic share
//! `n* = e^{2βg}/(e^{2βg} + 1)`.
//!
//! Two printed relations do not agree with that logistic form and are
//! exposed as-is next to it, with a flag in the report:
//! [`gibbs_share_printed`] uses `e^{2βg} + e^{−2βg}` as the normalizer, and the
//! small-`β` conditional hazard is quoted as `2βm*` while
//! [`conditional_hazard`] tends to `βm*`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::CalibratedRates;
use crate::numfmt::format_sig;

/// Tolerance on the a-priori normalization `e^{βg} + e^{−βg} = N`, in `|βg|`.
pub const GIBBS_CONSTRAINT_TOL: f64 = 1e-9;

/// Closed-form MaxEnt `β = ln(−(y₁ − ȳ)/(y₀ − ȳ))/(y₁ − y₀)`.
pub fn maxent_beta(y0: f64, y1: f64, y_mean: f64) -> Result<f64> {
    if y0 == y1 {
        return Err(Error::domain(
            "maxent_beta",
            "y0 = y1: no uncertainty axis, β is undefined",
        ));
    }
    let (lo, hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
    if !(y_mean > lo && y_mean < hi) {
        return Err(Error::domain(
            "maxent_beta",
            format!(
                "mean output {} must lie strictly between {} and {}",
                format_sig(y_mean),
                format_sig(lo),
                format_sig(hi)
            ),
        ));
    }
    Ok((-(y1 - y_mean) / (y0 - y_mean)).ln() / (y1 - y0))
}

/// The same `β` written through the shares: `ln(n₀/n₁)/(y₁ − y₀)`.
pub fn maxent_beta_from_shares(n1: f64, y0: f64, y1: f64) -> Result<f64> {
    if y0 == y1 {
        return Err(Error::domain("maxent_beta", "y0 = y1: β is undefined"));
    }
    if !(n1 > 0.0 && n1 < 1.0) {
        return Err(Error::domain(
            "maxent_beta",
            format!("share {} must lie in (0,1)", format_sig(n1)),
        ));
    }
    Ok(((1.0 - n1) / n1).ln() / (y1 - y0))
}

/// `g = (y₀ − y₁)/2`.
pub fn outcome_gap(y0: f64, y1: f64) -> f64 {
    0.5 * (y0 - y1)
}

/// A-priori probabilities `(e^{βg}/N, e^{−βg}/N)`; valid only when
/// `e^{βg} + e^{−βg} = N`, i.e. `|βg| = arccosh(N/2)`.
pub fn gibbs_apriori(beta: f64, g: f64, n: usize) -> Result<(f64, f64)> {
    if n < 2 {
        return Err(Error::domain(
            "gibbs_apriori",
            format!("needs N ≥ 2, got {n}"),
        ));
    }
    let nf = n as f64;
    let x = beta * g;
    let required = (nf / 2.0).acosh();
    if (x.abs() - required).abs() > GIBBS_CONSTRAINT_TOL {
        return Err(Error::domain(
            "gibbs_apriori",
            format!(
                "normalization e^(βg) + e^(−βg) = N requires |βg| = {}, got {}",
                format_sig(required),
                format_sig(x.abs())
            ),
        ));
    }
    Ok((x.exp() / nf, (-x).exp() / nf))
}

/// `βg` satisfying the a-priori normalization for `N` firms, with the given sign.
pub fn gibbs_constraint_product(n: usize, positive: bool) -> f64 {
    let x = (n as f64 / 2.0).acosh();
    if positive {
        x
    } else {
        -x
    }
}

/// `H(n) = −n ln n − (1−n) ln(1−n)` with `0·ln 0 = 0`.
pub fn entropy_shares(n1: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(n1) + term(1.0 - n1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    pub value: f64,
    /// The share is 0 or 1 and the entropy term was dropped.
    pub at_boundary: bool,
}

/// `U(n) = −2gn − H(n)/β`.
pub fn potential(n: f64, beta: f64, g: f64) -> Result<PotentialValue> {
    if beta == 0.0 {
        return Err(Error::domain(
            "potential",
            "β = 0 gives the entropy infinite weight",
        ));
    }
    if !(0.0..=1.0).contains(&n) {
        return Err(Error::domain(
            "potential",
            format!("share {n} outside [0,1]"),
        ));
    }
    let at_boundary = n == 0.0 || n == 1.0;
    Ok(PotentialValue {
        value: -2.0 * g * n - entropy_shares(n) / beta,
        at_boundary,
    })
}

/// Logistic share `e^{2βg}/(e^{2βg} + 1)` where `U' = 0`.
pub fn potential_minimum(beta: f64, g: f64) -> f64 {
    let x = 2.0 * beta * g;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gibbs share `e^{2βg}/(e^{2βg} + e^{−2βg})` with the printed normalizer.
pub fn gibbs_share_printed(beta: f64, g: f64) -> f64 {
    // = 1/(1 + e^{−4βg})
    let x = 4.0 * beta * g;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `F(m) = 1/(1 + e^{−2βm})` and `h(m) = 2β·F(m)`.
pub fn hazard_cdf_and_rate(m: f64, beta: f64) -> (f64, f64) {
    let f = 1.0 / (1.0 + (-2.0 * beta * m).exp());
    (f, 2.0 * beta * f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalHazard {
    /// `2βm*/(1 + e^{−2βg})`.
    pub value: f64,
    /// The quoted small-β form `2βm*`.
    pub reference: f64,
    /// `value / reference`; tends to ½ as `β → 0`.
    pub ratio: f64,
}

pub fn conditional_hazard(beta: f64, g: f64, m_star: f64) -> ConditionalHazard {
    let denom = 1.0 + (-2.0 * beta * g).exp();
    let value = 2.0 * beta * m_star / denom;
    let reference = 2.0 * beta * m_star;
    let ratio = if reference != 0.0 {
        value / reference
    } else {
        1.0 / denom
    };
    ConditionalHazard {
        value,
        reference,
        ratio,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HazardDiagnostics {
    pub cdf: f64,
    pub rate: f64,
    pub conditional: ConditionalHazard,
}

/// Known disagreements and caveats attached to a report.
#[derive(Debug, Clone, PartialEq)]
pub enum Flag {
    /// `β` could not be estimated; every `β`-dependent field is absent.
    BetaUndefined(String),
    /// The printed Gibbs share differs from the logistic potential minimum.
    GibbsShareDisagrees { printed: f64, logistic: f64 },
    /// The conditional hazard does not match its quoted small-β value.
    HazardFactor { ratio: f64 },
    /// `β < 0`: hazard quantities have no hazard interpretation.
    NegativeBeta,
    /// The a-priori normalization `e^{βg} + e^{−βg} = N` fails for the MaxEnt `β`.
    GibbsConstraint { implied: f64, required: f64 },
    /// Per-period probabilities `μ, ζ, ι` are used as unit-time intensities.
    HazardReading,
}

impl Flag {
    pub fn describe(&self) -> String {
        match self {
            Flag::BetaUndefined(why) => format!("beta_undefined: {why}"),
            Flag::GibbsShareDisagrees { printed, logistic } => format!(
                "gibbs_share_disagrees: printed normalizer gives {}, logistic minimum gives {}",
                format_sig(*printed),
                format_sig(*logistic)
            ),
            Flag::HazardFactor { ratio } => format!(
                "hazard_factor: conditional hazard is {} times the quoted 2*beta*m_star",
                format_sig(*ratio)
            ),
            Flag::NegativeBeta => "negative_beta: hazard diagnostics assume beta >= 0".into(),
            Flag::GibbsConstraint { implied, required } => format!(
                "gibbs_constraint: |beta*g| = {} but the a-priori normalization needs {}",
                format_sig(*implied),
                format_sig(*required)
            ),
            Flag::HazardReading => {
                "hazard_reading: per-period probabilities mu, zeta, iota are read as unit-time intensities".into()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    /// Robust per-firm output.
    pub y0: f64,
    /// Fragile per-firm output.
    pub y1: f64,
    pub y_mean: f64,
    pub m_star: f64,
    pub beta: Option<f64>,
    pub g: f64,
    /// `e^{βg}/(e^{βg} + e^{−βg})`: the a-priori probability normalized by its
    /// own partition sum rather than by `N`.
    pub eta_gibbs: Option<f64>,
    pub n_star: Option<f64>,
    pub gibbs_share_printed: Option<f64>,
    pub potential_profile: Vec<(f64, f64)>,
    pub hazard: Option<HazardDiagnostics>,
    /// Entropy of the stationary shares `(m*, 1 − m*)`.
    pub entropy: f64,
    pub flags: Vec<Flag>,
}

/// Number of interior shares `i/(P+1)` in the potential profile.
pub const PROFILE_POINTS: usize = 99;

impl EquilibriumReport {
    /// Evaluate the diagnostics at the stationary fragile share `m_star`, with
    /// per-firm outputs `y₁ = q₁` and `y₀ = q₀`.
    pub fn compute(rates: &CalibratedRates, m_star: f64, n: usize) -> Self {
        let (y0, y1) = (rates.q0, rates.q1);
        let y_mean = m_star * y1 + (1.0 - m_star) * y0;
        let g = outcome_gap(y0, y1);
        let mut flags = vec![Flag::HazardReading];
        let mut report = EquilibriumReport {
            y0,
            y1,
            y_mean,
            m_star,
            beta: None,
            g,
            eta_gibbs: None,
            n_star: None,
            gibbs_share_printed: None,
            potential_profile: Vec::new(),
            hazard: None,
            entropy: entropy_shares(m_star.clamp(0.0, 1.0)),
            flags: Vec::new(),
        };

        let beta = match maxent_beta(y0, y1, y_mean) {
            Ok(b) => b,
            Err(e) => {
                flags.push(Flag::BetaUndefined(e.to_string()));
                report.flags = flags;
                return report;
            }
        };
        report.beta = Some(beta);
        let x = beta * g;
        report.eta_gibbs = Some(x.exp() / (x.exp() + (-x).exp()));
        let n_star = potential_minimum(beta, g);
        let printed = gibbs_share_printed(beta, g);
        report.n_star = Some(n_star);
        report.gibbs_share_printed = Some(printed);
        if (printed - n_star).abs() > 1e-9 {
            flags.push(Flag::GibbsShareDisagrees {
                printed,
                logistic: n_star,
            });
        }
        if n >= 2 {
            let required = (n as f64 / 2.0).acosh();
            if (x.abs() - required).abs() > GIBBS_CONSTRAINT_TOL {
                flags.push(Flag::GibbsConstraint {
                    implied: x.abs(),
                    required,
                });
            }
        }

        if beta != 0.0 {
            report.potential_profile = (1..=PROFILE_POINTS)
                .map(|i| {
                    let share = i as f64 / (PROFILE_POINTS + 1) as f64;
                    (share, -2.0 * g * share - entropy_shares(share) / beta)
                })
                .collect();
        }

        let (cdf, rate) = hazard_cdf_and_rate(m_star, beta);
        let conditional = conditional_hazard(beta, g, m_star);
        report.hazard = Some(HazardDiagnostics {
            cdf,
            rate,
            conditional,
        });
        if (conditional.ratio - 1.0).abs() > 1e-9 {
            flags.push(Flag::HazardFactor {
                ratio: conditional.ratio,
            });
        }
        if beta < 0.0 {
            flags.push(Flag::NegativeBeta);
        }
        report.flags = flags;
        report
    }

    /// `key = value` text block.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_sig).unwrap_or_else(|| "undefined".into());
        let mut s = String::new();
        let _ = writeln!(s, "[equilibrium]");
        let _ = writeln!(s, "y0 = {}", format_sig(self.y0));
        let _ = writeln!(s, "y1 = {}", format_sig(self.y1));
        let _ = writeln!(s, "y_mean = {}", format_sig(self.y_mean));
        let _ = writeln!(s, "m_star = {}", format_sig(self.m_star));
        let _ = writeln!(s, "beta = {}", opt(self.beta));
        let _ = writeln!(s, "g = {}", format_sig(self.g));
        let _ = writeln!(s, "eta_gibbs = {}", opt(self.eta_gibbs));
        let _ = writeln!(s, "n_star = {}", opt(self.n_star));
        let _ = writeln!(s, "gibbs_share_printed = {}", opt(self.gibbs_share_printed));
        let _ = writeln!(s, "entropy = {}", format_sig(self.entropy));
        let h = self.hazard;
        let _ = writeln!(s, "hazard_cdf = {}", opt(h.map(|h| h.cdf)));
        let _ = writeln!(s, "hazard_rate = {}", opt(h.map(|h| h.rate)));
        let _ = writeln!(
            s,
            "conditional_hazard = {}",
            opt(h.map(|h| h.conditional.value))
        );
        let _ = writeln!(
            s,
            "conditional_hazard_reference = {}",
            opt(h.map(|h| h.conditional.reference))
        );
        let _ = writeln!(
            s,
            "conditional_hazard_ratio = {}",
            opt(h.map(|h| h.conditional.ratio))
        );
        for f in &self.flags {
            let _ = writeln!(s, "flag = {}", f.describe());
        }
        s
    }

    /// `n,U` CSV of the potential profile.
    pub fn potential_csv(&self) -> String {
        let mut s = String::from("n,U\n");
        for &(n, u) in &self.potential_profile {
            let _ = writeln!(s, "{},{}", format_sig(n), format_sig(u));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const Y1: f64 = 0.607625;

    #[test]
    fn beta_examples() {
        assert!(maxent_beta(1.0, Y1, 0.5 * (1.0 + Y1)).unwrap().abs() < 1e-12);
        let y_mean = 0.4 * Y1 + 0.6;
        assert!((y_mean - 0.843050).abs() < 1e-6);
        let beta = maxent_beta(1.0, Y1, y_mean).unwrap();
        assert!((beta - 1.5f64.ln() / (Y1 - 1.0)).abs() < 1e-12);
        assert!((beta + 1.033364).abs() < 1e-5, "{beta}");
        assert!(maxent_beta(1.0, 1.0, 1.0).is_err());
        assert!(maxent_beta(1.0, Y1, 1.2).is_err());
        assert!(maxent_beta(1.0, Y1, 1.0).is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(outcome_gap(0.7, 0.7), 0.0);
        assert!((outcome_gap(1.0, Y1) - 0.196188).abs() < 1e-6);
        assert_eq!(outcome_gap(1.0, Y1), -outcome_gap(Y1, 1.0));
    }

    #[test]
    fn apriori_examples() {
        assert_eq!(gibbs_apriori(0.0, 0.3, 2).unwrap(), (0.5, 0.5));
        let x = gibbs_constraint_product(4, true);
        assert!((x - (2.0 + 3f64.sqrt()).ln()).abs() < 1e-12);
        assert!((x - 1.316958).abs() < 1e-6);
        let (eta, rest) = gibbs_apriori(x, 1.0, 4).unwrap();
        assert!((eta - 0.933013).abs() < 1e-6);
        assert!((eta + rest - 1.0).abs() < 1e-12);
        let err = gibbs_apriori(0.5, 1.0, 4).unwrap_err();
        assert!(err.to_string().contains("1.31695789692"), "{err}");
        assert!(gibbs_apriori(0.0, 0.0, 1).is_err());
    }

    #[test]
    fn potential_examples() {
        // g = 0: pure entropy, minimum at one half.
        let grid_min = |beta: f64, g: f64| {
            let mut best = (f64::INFINITY, 0.0);
            for i in 1..1_000_000 {
                let n = i as f64 * 1e-6;
                let u = potential(n, beta, g).unwrap().value;
                if u < best.0 {
                    best = (u, n);
                }
            }
            best.1
        };
        assert!((grid_min(2.0, 0.0) - 0.5).abs() <= 1e-6);
        // σ(0.392376) = 0.5968545...
        let n_star = grid_min(1.0, 0.196188);
        let logistic = 1.0 / (1.0 + (-0.392376f64).exp());
        assert!((n_star - logistic).abs() <= 1e-6, "{n_star}");
        assert!((potential_minimum(1.0, 0.196188) - 0.596855).abs() < 1e-6);

        assert!(potential(0.5, 0.0, 0.1).is_err());
        let edge = potential(1.0, 1.0, 0.2).unwrap();
        assert!(edge.at_boundary);
        assert!((edge.value + 0.4).abs() < 1e-15);
    }

    #[test]
    fn potential_is_convex_for_positive_beta() {
        let h = 1e-4;
        for &beta in &[0.1, 1.0, 10.0] {
            for i in 1..100 {
                let n = i as f64 / 100.0;
                let u = |x: f64| potential(x, beta, 0.3).unwrap().value;
                let second = (u(n + h * 0.5) - 2.0 * u(n) + u(n - h * 0.5)) / (0.25 * h * h);
                assert!(second > 0.0);
                // Analytic U'' = 1/(β n(1−n)).
                assert!((second - 1.0 / (beta * n * (1.0 - n))).abs() / second < 1e-3);
            }
        }
    }

    #[test]
    fn minimum_examples() {
        assert_eq!(potential_minimum(0.0, 0.3), 0.5);
        assert_eq!(potential_minimum(1e3, 1.0), 1.0);
        assert!(potential_minimum(-1e3, 1.0) < 1e-300);
        let beta = 1.5f64.ln() / (Y1 - 1.0);
        assert!((potential_minimum(beta, outcome_gap(1.0, Y1)) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn printed_share_examples() {
        assert_eq!(gibbs_share_printed(0.0, 1.0), 0.5);
        let s = gibbs_share_printed(-1.033364, 0.196188);
        assert!((s - 0.307692).abs() < 1e-6, "{s}");
        let direct = {
            let e = (2.0 * -1.033364 * 0.196188f64).exp();
            e / (e + 1.0 / e)
        };
        assert!((s - direct).abs() < 1e-15);
        assert!((s - potential_minimum(-1.033364, 0.196188)).abs() > 0.05);
        for &x in &[0.3, -0.5, 2.0] {
            assert!((gibbs_share_printed(x, 1.0) - potential_minimum(x, 1.0)).abs() > 1e-3);
        }
    }

    #[test]
    fn hazard_examples() {
        assert_eq!(hazard_cdf_and_rate(0.3, 0.0), (0.5, 0.0));
        let (f, h) = hazard_cdf_and_rate(0.0, 0.7);
        assert_eq!(f, 0.5);
        assert!((h - 0.7).abs() < 1e-15);
        let (f, h) = hazard_cdf_and_rate(0.5, 0.05);
        assert!((f - 0.512497).abs() < 1e-6);
        assert!((h - 0.051250).abs() < 1e-6);

        assert_eq!(conditional_hazard(0.0, 0.1, 0.5).value, 0.0);
        let c = conditional_hazard(0.05, 0.1, 0.5);
        assert!((c.value - 0.025125).abs() < 1e-6);
        let small = conditional_hazard(1e-6, 0.196188, 0.4);
        assert!((small.value / (1e-6 * 0.4) - 1.0).abs() < 1e-6);
        assert!((small.ratio - 0.5).abs() < 1e-6);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_shares(0.0), 0.0);
        assert_eq!(entropy_shares(1.0), 0.0);
        assert!((entropy_shares(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((entropy_shares(0.2) - entropy_shares(0.8)).abs() < 1e-15);
    }

    fn rates(q0: f64, q1: f64) -> CalibratedRates {
        CalibratedRates {
            q1,
            q0,
            mu: 0.3,
            u_bar: 0.9,
            a_bar: 0.0,
            zeta: 0.25,
            iota: 0.3,
            lambda: 0.15,
            gamma: 0.12,
            residual: 0.0,
        }
    }

    #[test]
    fn report_round_trip_and_flags() {
        let rep = EquilibriumReport::compute(&rates(1.0, Y1), 0.4, 100);
        let beta = rep.beta.unwrap();
        assert!((beta + 1.033364).abs() < 1e-5);
        assert!((rep.n_star.unwrap() - 0.4).abs() < 1e-12);
        assert!((rep.eta_gibbs.unwrap() - 0.4).abs() < 1e-12);
        assert!((rep.gibbs_share_printed.unwrap() - 0.307692).abs() < 1e-5);
        assert!(rep
            .flags
            .iter()
            .any(|f| matches!(f, Flag::GibbsShareDisagrees { .. })));
        assert!(rep
            .flags
            .iter()
            .any(|f| matches!(f, Flag::HazardFactor { .. })));
        assert!(rep.flags.contains(&Flag::NegativeBeta));
        assert!(rep
            .flags
            .iter()
            .any(|f| matches!(f, Flag::GibbsConstraint { .. })));
        assert_eq!(rep.potential_profile.len(), PROFILE_POINTS);
        let text = rep.to_text();
        assert!(text.contains("flag = gibbs_share_disagrees"));
        assert!(text.contains("flag = hazard_factor"));
        assert!(rep.potential_csv().starts_with("n,U\n0.01,"));
        assert!(rep.entropy >= 0.0 && rep.entropy <= std::f64::consts::LN_2);
    }

    #[test]
    fn report_degenerate_outputs() {
        let rep = EquilibriumReport::compute(&rates(1.0, 1.0), 0.4, 100);
        assert!(rep.beta.is_none());
        assert!(rep.potential_profile.is_empty());
        assert!(matches!(rep.flags[1], Flag::BetaUndefined(_)));
        assert!(rep.to_text().contains("beta = undefined"));
        let rep = EquilibriumReport::compute(&rates(1.0, 0.6), 1.0, 100);
        assert!(rep.beta.is_none());
    }

    proptest! {
        #[test]
        fn maxent_round_trip(n1 in 0.001f64..0.999, y0 in 0.1f64..5.0, dy in prop_oneof![-3.0f64..-1e-3, 1e-3f64..3.0]) {
            let y1 = y0 + dy;
            let y_mean = n1 * y1 + (1.0 - n1) * y0;
            let b1 = maxent_beta(y0, y1, y_mean).unwrap();
            let b2 = maxent_beta_from_shares(n1, y0, y1).unwrap();
            prop_assert!((b1 - b2).abs() <= 1e-12 * b1.abs().max(1.0));
            let back = potential_minimum(b1, outcome_gap(y0, y1));
            prop_assert!((back - n1).abs() <= 1e-12);
        }

        #[test]
        fn apriori_sums_to_one(n in 2usize..10_000, g in 0.01f64..5.0, positive in any::<bool>()) {
            let beta = gibbs_constraint_product(n, positive) / g;
            let (a, b) = gibbs_apriori(beta, g, n).unwrap();
            prop_assert!((a + b - 1.0).abs() <= 1e-12);
        }
    }
}
