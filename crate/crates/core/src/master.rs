//! Master equation on the full occupation-number distribution.
//!
//! `dp_k/dt = b(k−1)p_{k−1} + d(k+1)p_{k+1} − [b(k) + d(k)]p_k` on
//! `k ∈ {0, …, N}`. The boundary is handled by the rates themselves:
//! `b(N) = 0` and `d(0) = 0`, so no flux leaves the support and total
//! probability is conserved.

use crate::error::{Error, Result};
use crate::jump::BirthDeath;

/// Transient negative mass tolerated in a stored distribution.
pub const NEGATIVE_TOL: f64 = 1e-14;
/// Allowed deviation of the total mass from one.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Distribution over `{0, …, N}` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    pub p: Vec<f64>,
    pub t: f64,
}

impl ProbabilityVector {
    pub fn new(p: Vec<f64>, t: f64) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::domain(
                "ProbabilityVector",
                "need at least one state",
            ));
        }
        if let Some((k, &v)) = p.iter().enumerate().find(|(_, &v)| !(v >= -NEGATIVE_TOL)) {
            return Err(Error::domain(
                "ProbabilityVector",
                format!("entry {k} is {v}"),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::domain(
                "ProbabilityVector",
                format!("mass {total} is not 1"),
            ));
        }
        if !(t >= 0.0) {
            return Err(Error::domain(
                "ProbabilityVector",
                format!("negative time {t}"),
            ));
        }
        Ok(ProbabilityVector { p, t })
    }

    pub fn point_mass(n: usize, k: usize) -> Result<Self> {
        if k > n {
            return Err(Error::contract(
                "point_mass",
                format!("state {k} outside [0, {n}]"),
            ));
        }
        let mut p = vec![0.0; n + 1];
        p[k] = 1.0;
        Ok(ProbabilityVector { p, t: 0.0 })
    }

    pub fn uniform(n: usize) -> Self {
        ProbabilityVector {
            p: vec![1.0 / (n + 1) as f64; n + 1],
            t: 0.0,
        }
    }

    /// Largest occupation number `N`.
    pub fn n(&self) -> usize {
        self.p.len() - 1
    }

    pub fn moments(&self) -> (f64, f64) {
        moments(&self.p)
    }
}

/// `(Σ k·p_k, Σ k²·p_k − mean²)`.
pub fn moments(p: &[f64]) -> (f64, f64) {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, &pk) in p.iter().enumerate() {
        let k = k as f64;
        m1 += k * pk;
        m2 += k * k * pk;
    }
    (m1, (m2 - m1 * m1).max(0.0))
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn check_len(what: &'static str, p: &[f64], process: &BirthDeath) -> Result<()> {
    if p.len() != process.n + 1 {
        return Err(Error::contract(
            what,
            format!(
                "vector has {} entries, process needs {}",
                p.len(),
                process.n + 1
            ),
        ));
    }
    Ok(())
}

fn rhs_into(p: &[f64], process: &BirthDeath, out: &mut [f64]) {
    let n = process.n;
    for k in 0..=n {
        let mut v = -(process.birth(k) + process.death(k)) * p[k];
        if k > 0 {
            v += process.birth(k - 1) * p[k - 1];
        }
        if k < n {
            v += process.death(k + 1) * p[k + 1];
        }
        out[k] = v;
    }
}

/// Right-hand side of the master equation.
pub fn me_rhs(p: &[f64], process: &BirthDeath) -> Result<Vec<f64>> {
    check_len("me_rhs", p, process)?;
    let mut out = vec![0.0; p.len()];
    rhs_into(p, process, &mut out);
    Ok(out)
}

/// Right-hand side in shift-operator form `(L − 1)[d·p] + (L⁻¹ − 1)[b·p]`,
/// with `(L f)_k = f_{k+1}` and `(L⁻¹ f)_k = f_{k−1}` (zero outside the support).
pub fn lead_lag_rhs(p: &[f64], process: &BirthDeath) -> Result<Vec<f64>> {
    check_len("lead_lag_rhs", p, process)?;
    let n = process.n;
    let dp: Vec<f64> = (0..=n).map(|k| process.death(k) * p[k]).collect();
    let bp: Vec<f64> = (0..=n).map(|k| process.birth(k) * p[k]).collect();
    let lead = |f: &[f64], k: usize| if k < n { f[k + 1] } else { 0.0 };
    let lag = |f: &[f64], k: usize| if k > 0 { f[k - 1] } else { 0.0 };
    Ok((0..=n)
        .map(|k| (lead(&dp, k) - dp[k]) + (lag(&bp, k) - bp[k]))
        .collect())
}

/// Maximum absolute deviation between the two right-hand-side assemblies.
pub fn lead_lag_rhs_check(p: &[f64], process: &BirthDeath) -> Result<f64> {
    Ok(linf_distance(
        &me_rhs(p, process)?,
        &lead_lag_rhs(p, process)?,
    ))
}

/// Default step: one tenth of the inverse maximal exit rate.
pub fn default_dt(process: &BirthDeath) -> f64 {
    let rate = process.max_exit_rate();
    if rate > 0.0 {
        0.1 / rate
    } else {
        f64::INFINITY
    }
}

/// Conservation bookkeeping of one integration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegrationLog {
    pub steps: usize,
    /// Largest `|Σp − 1|` removed by per-step renormalization.
    pub max_norm_correction: f64,
    /// Largest `|Σ dp/dt|` seen at a stage evaluation.
    pub max_rhs_sum: f64,
    /// Smallest entry seen before output clamping.
    pub min_entry: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterPath {
    pub snapshots: Vec<ProbabilityVector>,
    pub log: IntegrationLog,
}

impl MasterPath {
    pub fn last(&self) -> &ProbabilityVector {
        self.snapshots.last().expect("at least one snapshot")
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    fn step(&mut self, p: &mut [f64], process: &BirthDeath, h: f64, log: &mut IntegrationLog) {
        rhs_into(p, process, &mut self.k1);
        log.max_rhs_sum = log.max_rhs_sum.max(self.k1.iter().sum::<f64>().abs());
        for (t, (&x, &k)) in self.tmp.iter_mut().zip(p.iter().zip(&self.k1)) {
            *t = x + 0.5 * h * k;
        }
        rhs_into(&self.tmp, process, &mut self.k2);
        for (t, (&x, &k)) in self.tmp.iter_mut().zip(p.iter().zip(&self.k2)) {
            *t = x + 0.5 * h * k;
        }
        rhs_into(&self.tmp, process, &mut self.k3);
        for (t, (&x, &k)) in self.tmp.iter_mut().zip(p.iter().zip(&self.k3)) {
            *t = x + h * k;
        }
        rhs_into(&self.tmp, process, &mut self.k4);
        for (i, x) in p.iter_mut().enumerate() {
            *x += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }

        let total: f64 = p.iter().sum();
        log.max_norm_correction = log.max_norm_correction.max((total - 1.0).abs());
        for x in p.iter_mut() {
            *x /= total;
        }
        log.min_entry = p.iter().copied().fold(log.min_entry, f64::min);
        log.steps += 1;
    }
}

fn clamped(p: &[f64], t: f64) -> ProbabilityVector {
    ProbabilityVector {
        p: p.iter().map(|&x| x.max(0.0)).collect(),
        t,
    }
}

/// Integrate the master equation with classical RK4 and record snapshots at
/// each of `sample_times` (nondecreasing, all `≥ p0.t`).
///
/// Each interval between samples is split into equal substeps no longer than
/// `dt`. The distribution is renormalized after every step.
pub fn integrate(
    p0: &ProbabilityVector,
    process: &BirthDeath,
    dt: f64,
    sample_times: &[f64],
) -> Result<MasterPath> {
    check_len("integrate", &p0.p, process)?;
    if !(dt > 0.0) {
        return Err(Error::Config(format!(
            "step size must be positive, got {dt}"
        )));
    }
    let rate = process.max_exit_rate();
    let stiffness = if rate > 0.0 { dt * rate } else { 0.0 };
    if !(stiffness < 1.0) {
        return Err(Error::Config(format!(
            "step size {dt} violates dt·max(b+d) < 1 (got {stiffness})"
        )));
    }
    let mut prev = p0.t;
    for &s in sample_times {
        if !(s >= prev) || !s.is_finite() {
            return Err(Error::contract(
                "integrate",
                format!("sample times must be finite, nondecreasing and ≥ {}", p0.t),
            ));
        }
        prev = s;
    }

    let mut log = IntegrationLog {
        min_entry: p0.p.iter().copied().fold(f64::INFINITY, f64::min),
        ..Default::default()
    };
    let mut p = p0.p.clone();
    let mut t = p0.t;
    let mut rk = Rk4::new(p.len());
    let mut snapshots = Vec::with_capacity(sample_times.len());
    for &target in sample_times {
        let span = target - t;
        if span > 0.0 {
            let substeps = if dt.is_finite() {
                (span / dt).ceil().max(1.0) as usize
            } else {
                1
            };
            let h = span / substeps as f64;
            for _ in 0..substeps {
                rk.step(&mut p, process, h, &mut log);
            }
        }
        t = target;
        snapshots.push(clamped(&p, t));
    }
    if snapshots.is_empty() {
        snapshots.push(p0.clone());
    }
    Ok(MasterPath { snapshots, log })
}

/// Integrate from `p0.t` to `t_end` and return only the final distribution.
pub fn integrate_to(
    p0: &ProbabilityVector,
    process: &BirthDeath,
    t_end: f64,
    dt: f64,
) -> Result<(ProbabilityVector, IntegrationLog)> {
    let path = integrate(p0, process, dt, &[t_end])?;
    let log = path.log;
    Ok((path.snapshots.into_iter().next().expect("one sample"), log))
}

/// Which end of the support absorbs all mass when one rate vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Absorbing {
    /// `γ = 0`: every firm ends up fragile.
    Top,
    /// `λ = 0`: every firm ends up robust.
    Bottom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub dist: ProbabilityVector,
    pub absorbing: Option<Absorbing>,
}

/// Stationary distribution from the detailed-balance recursion
/// `π_{k+1} = π_k·b(k)/d(k+1)`, evaluated in log space.
pub fn stationary_detailed_balance(process: &BirthDeath) -> Result<Stationary> {
    if process.is_degenerate() {
        return Err(Error::domain(
            "stationary_detailed_balance",
            "λ = γ = 0: every distribution is stationary",
        ));
    }
    let n = process.n;
    if process.gamma == 0.0 {
        return Ok(Stationary {
            dist: ProbabilityVector::point_mass(n, n)?,
            absorbing: Some(Absorbing::Top),
        });
    }
    if process.lambda == 0.0 {
        return Ok(Stationary {
            dist: ProbabilityVector::point_mass(n, 0)?,
            absorbing: Some(Absorbing::Bottom),
        });
    }
    let mut log_pi = Vec::with_capacity(n + 1);
    log_pi.push(0.0);
    for k in 0..n {
        let next = log_pi[k] + process.birth(k).ln() - process.death(k + 1).ln();
        log_pi.push(next);
    }
    let peak = log_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = log_pi.iter().map(|&l| (l - peak).exp()).collect();
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    Ok(Stationary {
        dist: ProbabilityVector { p, t: 0.0 },
        absorbing: None,
    })
}

/// Closed-form `Binomial(n, q)` probabilities via log-factorials.
pub fn binomial_pmf(n: usize, q: f64) -> Vec<f64> {
    if q <= 0.0 {
        let mut p = vec![0.0; n + 1];
        p[0] = 1.0;
        return p;
    }
    if q >= 1.0 {
        let mut p = vec![0.0; n + 1];
        p[n] = 1.0;
        return p;
    }
    let mut ln_fact = vec![0.0; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let (lq, lr) = (q.ln(), (1.0 - q).ln());
    (0..=n)
        .map(|k| {
            (ln_fact[n] - ln_fact[k] - ln_fact[n - k] + k as f64 * lq + (n - k) as f64 * lr).exp()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bd(n: usize, l: f64, g: f64) -> BirthDeath {
        BirthDeath::new(n, l, g).unwrap()
    }

    #[test]
    fn rhs_two_state() {
        let p = bd(1, 0.15, 0.12);
        let d = me_rhs(&[1.0, 0.0], &p).unwrap();
        assert_eq!(d, vec![-0.15, 0.15]);
        assert_eq!(lead_lag_rhs_check(&[1.0, 0.0], &p).unwrap(), 0.0);
    }

    #[test]
    fn rhs_vanishes_without_rates() {
        let p = bd(5, 0.0, 0.0);
        let v = ProbabilityVector::uniform(5);
        assert!(me_rhs(&v.p, &p).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rhs_rejects_wrong_length() {
        let p = bd(5, 0.1, 0.1);
        assert!(matches!(me_rhs(&[1.0], &p), Err(Error::Contract { .. })));
        assert!(lead_lag_rhs(&[0.5, 0.5], &p).is_err());
    }

    #[test]
    fn stationary_is_binomial() {
        let p = bd(100, 0.15, 0.12);
        let st = stationary_detailed_balance(&p).unwrap();
        assert!(st.absorbing.is_none());
        let bin = binomial_pmf(100, 5.0 / 9.0);
        assert!(linf_distance(&st.dist.p, &bin) <= 1e-12);
        let rhs = me_rhs(&st.dist.p, &p).unwrap();
        assert!(rhs.iter().all(|x| x.abs() <= 1e-13));
        let (m, v) = st.dist.moments();
        assert!((m - 100.0 * 5.0 / 9.0).abs() < 1e-9);
        assert!((v - 100.0 * 20.0 / 81.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_small_cases() {
        let st = stationary_detailed_balance(&bd(2, 0.3, 0.3)).unwrap();
        for (a, b) in st.dist.p.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        let (l, g) = (0.2, 0.7);
        let st = stationary_detailed_balance(&bd(1, l, g)).unwrap();
        assert!((st.dist.p[0] - g / (l + g)).abs() < 1e-15);
        assert!((st.dist.p[1] - l / (l + g)).abs() < 1e-15);

        let top = stationary_detailed_balance(&bd(4, 0.2, 0.0)).unwrap();
        assert_eq!(top.absorbing, Some(Absorbing::Top));
        assert_eq!(top.dist.p, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        let bottom = stationary_detailed_balance(&bd(4, 0.0, 0.2)).unwrap();
        assert_eq!(bottom.absorbing, Some(Absorbing::Bottom));
        assert_eq!(bottom.dist.p[0], 1.0);
        assert!(stationary_detailed_balance(&bd(4, 0.0, 0.0)).is_err());
    }

    #[test]
    fn stationary_large_n_does_not_overflow() {
        let p = bd(100_000, 0.15, 0.12);
        let st = stationary_detailed_balance(&p).unwrap();
        let (m, _) = st.dist.moments();
        assert!((m / 1e5 - 5.0 / 9.0).abs() < 1e-9);
    }

    #[test]
    fn moments_examples() {
        assert_eq!(
            moments(&ProbabilityVector::point_mass(10, 7).unwrap().p),
            (7.0, 0.0)
        );
        let (m, v) = moments(&ProbabilityVector::uniform(2).p);
        assert!((m - 1.0).abs() < 1e-15 && (v - 2.0 / 3.0).abs() < 1e-15);
        let (m, v) = moments(&binomial_pmf(100, 5.0 / 9.0));
        assert!((m - 55.5556).abs() < 1e-4 && (v - 24.6914).abs() < 1e-4);
    }

    #[test]
    fn zero_horizon_is_identity() {
        let p = bd(10, 0.1, 0.2);
        let p0 = ProbabilityVector::point_mass(10, 3).unwrap();
        let (out, log) = integrate_to(&p0, &p, 0.0, default_dt(&p)).unwrap();
        assert_eq!(out, p0);
        assert_eq!(log.steps, 0);
    }

    #[test]
    fn unstable_step_is_rejected() {
        let p = bd(100, 0.15, 0.12);
        let p0 = ProbabilityVector::point_mass(100, 0).unwrap();
        // max exit rate is 15
        assert!(matches!(
            integrate_to(&p0, &p, 1.0, 1.0 / 15.0),
            Err(Error::Config(_))
        ));
        assert!(integrate_to(&p0, &p, 1.0, 0.0).is_err());
        assert!(integrate_to(&p0, &p, 1.0, 0.9 / 15.0).is_ok());
    }

    #[test]
    fn mean_follows_macroscopic_solution() {
        // Linear rates close the mean equation exactly: d⟨k⟩/dt = −(λ+γ)⟨k⟩ + λN.
        let (l, g, n) = (0.15, 0.12, 100);
        let p = bd(n, l, g);
        let p0 = ProbabilityVector::point_mass(n, n).unwrap();
        let times: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let path = integrate(&p0, &p, default_dt(&p), &times).unwrap();
        let m_star = l / (l + g);
        for snap in &path.snapshots {
            let exact = m_star + (1.0 - m_star) * (-(l + g) * snap.t).exp();
            let (mean, _) = snap.moments();
            assert!((mean / n as f64 - exact).abs() < 1e-9, "t = {}", snap.t);
        }
        assert!(path.log.max_norm_correction <= NORMALIZATION_TOL);
        assert!(path.log.max_rhs_sum <= 1e-13);
        assert!(path.log.min_entry >= -1e-12);
    }

    #[test]
    fn default_dt_degenerate() {
        let p = bd(4, 0.0, 0.0);
        assert!(default_dt(&p).is_infinite());
        let p0 = ProbabilityVector::point_mass(4, 2).unwrap();
        let (out, _) = integrate_to(&p0, &p, 5.0, default_dt(&p)).unwrap();
        assert_eq!(out.p, p0.p);
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.5], 0.0).is_ok());
        assert!(ProbabilityVector::new(vec![0.5, 0.6], 0.0).is_err());
        assert!(ProbabilityVector::new(vec![1.1, -0.1], 0.0).is_err());
        assert!(ProbabilityVector::new(vec![], 0.0).is_err());
        assert!(ProbabilityVector::point_mass(3, 4).is_err());
    }

    fn arb_dist(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, n + 1).prop_map(|mut w| {
            let s: f64 = w.iter().sum::<f64>().max(1e-300);
            for x in &mut w {
                *x /= s;
            }
            w
        })
    }

    proptest! {
        #[test]
        fn rhs_conserves_mass(p in arb_dist(50), l in 0.0f64..2.0, g in 0.0f64..2.0) {
            let proc_ = bd(50, l, g);
            let rhs = me_rhs(&p, &proc_).unwrap();
            prop_assert!(rhs.iter().sum::<f64>().abs() <= 1e-13);
        }

        #[test]
        fn lead_lag_agrees(p in arb_dist(50), l in 0.0f64..2.0, g in 0.0f64..2.0) {
            let proc_ = bd(50, l, g);
            prop_assert!(lead_lag_rhs_check(&p, &proc_).unwrap() <= 1e-14);
        }

        #[test]
        fn mean_derivative_is_linear(p in arb_dist(30), l in 0.0f64..1.0, g in 0.0f64..1.0) {
            let proc_ = bd(30, l, g);
            let rhs = me_rhs(&p, &proc_).unwrap();
            let dmean: f64 = rhs.iter().enumerate().map(|(k, &v)| k as f64 * v).sum();
            let (mean, _) = moments(&p);
            let expected = -(l + g) * mean + l * 30.0;
            prop_assert!((dmean - expected).abs() <= 1e-12);
        }

        #[test]
        fn recursion_solves_stationarity(n in 1usize..200, l in 0.01f64..3.0, g in 0.01f64..3.0) {
            let proc_ = bd(n, l, g);
            let st = stationary_detailed_balance(&proc_).unwrap();
            let rhs = me_rhs(&st.dist.p, &proc_).unwrap();
            let scale = proc_.max_exit_rate().max(1.0);
            prop_assert!(rhs.iter().all(|x| x.abs() <= 1e-12 * scale));
            prop_assert!((st.dist.p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
