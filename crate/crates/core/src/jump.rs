//! Exact event-driven simulation of the occupation-number birth-death process.
//!
//! The fragile count `N₁` jumps up at rate `b(n) = λ(N − n)` and down at
//! rate `d(n) = γn`. Holding times are exponential with the total rate and
//! the jump direction is chosen proportionally to the two rates, so paths are
//! exact samples of the continuous-time chain. Bankruptcies are counted as a
//! separate point process of intensity `μ·N₁` that never changes `N₁`.
//!
//! # Seeds
//!
//! Each path owns a ChaCha8 generator seeded from a `u64`. Stream 0 drives
//! the jumps and stream 1 drives the failure counter, so the `N₁` path does
//! not depend on whether failures are tracked. In an ensemble, trajectory `i`
//! uses [`trajectory_seed`]`(master_seed, i)`.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::CalibratedRates;

/// Linear birth-death rates of the fragile count on `{0, …, N}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthDeath {
    pub n: usize,
    pub lambda: f64,
    pub gamma: f64,
}

impl BirthDeath {
    pub fn new(n: usize, lambda: f64, gamma: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::domain("BirthDeath", "need at least one firm"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) || !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::domain(
                "BirthDeath",
                format!("rates must be finite and nonnegative, got λ={lambda}, γ={gamma}"),
            ));
        }
        Ok(BirthDeath { n, lambda, gamma })
    }

    pub fn from_calibration(n: usize, rates: &CalibratedRates) -> Result<Self> {
        Self::new(n, rates.lambda, rates.gamma)
    }

    fn check(&self, what: &'static str, k: usize) -> Result<()> {
        if k > self.n {
            return Err(Error::contract(
                what,
                format!("occupation {k} outside [0, {}]", self.n),
            ));
        }
        Ok(())
    }

    pub fn birth_rate(&self, k: usize) -> Result<f64> {
        self.check("birth_rate", k)?;
        Ok(self.birth(k))
    }

    pub fn death_rate(&self, k: usize) -> Result<f64> {
        self.check("death_rate", k)?;
        Ok(self.death(k))
    }

    #[inline]
    pub(crate) fn birth(&self, k: usize) -> f64 {
        self.lambda * (self.n - k) as f64
    }

    #[inline]
    pub(crate) fn death(&self, k: usize) -> f64 {
        self.gamma * k as f64
    }

    /// `max_k [b(k) + d(k)]`; the exit rate is linear in `k`, so an endpoint.
    pub fn max_exit_rate(&self) -> f64 {
        (self.lambda * self.n as f64).max(self.gamma * self.n as f64)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lambda + self.gamma <= 0.0
    }
}

/// Birth-death rates plus the failure hazard used by the bankruptcy counter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpModel {
    pub process: BirthDeath,
    /// Per-firm failure intensity of fragile firms (the calibrated `μ`).
    pub failure_hazard: f64,
}

impl JumpModel {
    pub fn new(process: BirthDeath, failure_hazard: f64) -> Result<Self> {
        if !(failure_hazard >= 0.0 && failure_hazard.is_finite()) {
            return Err(Error::domain(
                "failure_hazard",
                format!("must be finite and nonnegative, got {failure_hazard}"),
            ));
        }
        Ok(JumpModel {
            process,
            failure_hazard,
        })
    }

    pub fn from_calibration(n: usize, rates: &CalibratedRates) -> Result<Self> {
        Self::new(BirthDeath::from_calibration(n, rates)?, rates.mu)
    }
}

/// One sample path of `N₁(t)` on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Event times, strictly increasing, all `≤ horizon`.
    pub times: Vec<f64>,
    /// `N₁` right after each event.
    pub values: Vec<usize>,
    pub initial: usize,
    pub horizon: f64,
    /// Bankruptcy events over the whole horizon.
    pub failures: u64,
    /// Set when `λ = γ = 0` and the path is constant.
    pub degenerate: bool,
}

impl Trajectory {
    /// Right-continuous value of the path at time `t`.
    pub fn value_at(&self, t: f64) -> usize {
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    pub fn final_value(&self) -> usize {
        self.values.last().copied().unwrap_or(self.initial)
    }

    /// Time average of `N₁` over `[from, to]`.
    pub fn time_average(&self, from: f64, to: f64) -> f64 {
        assert!(from < to, "empty averaging window");
        let mut acc = 0.0;
        let mut t = from;
        let mut k = self.value_at(from);
        let start = self.times.partition_point(|&s| s <= from);
        for (&s, &v) in self.times[start..].iter().zip(&self.values[start..]) {
            if s >= to {
                break;
            }
            acc += k as f64 * (s - t);
            t = s;
            k = v;
        }
        acc += k as f64 * (to - t);
        acc / (to - from)
    }
}

/// Derive the seed of trajectory `index` from the ensemble's master seed.
///
/// `splitmix64(master ⊕ splitmix64(index))`: distinct indices give
/// decorrelated seeds and the mapping is fixed across releases.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_run(model: &JumpModel, n1_0: usize, horizon: f64) -> Result<()> {
    if n1_0 > model.process.n {
        return Err(Error::contract(
            "simulate_trajectory",
            format!("initial occupation {n1_0} outside [0, {}]", model.process.n),
        ));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::domain(
            "horizon",
            format!("must be positive, got {horizon}"),
        ));
    }
    Ok(())
}

/// Walk one path, calling `on_event(t, n1)` after every jump. Returns the
/// failure count.
fn walk<F: FnMut(f64, usize)>(
    model: &JumpModel,
    n1_0: usize,
    horizon: f64,
    seed: u64,
    mut on_event: F,
) -> u64 {
    let process = &model.process;
    let mut jumps = ChaCha8Rng::seed_from_u64(seed);
    let mut bankrupt = ChaCha8Rng::seed_from_u64(seed);
    bankrupt.set_stream(1);

    let mut t = 0.0;
    let mut k = n1_0;
    let mut failures = 0u64;
    loop {
        let b = process.birth(k);
        let total = b + process.death(k);
        let next = if total > 0.0 {
            let u: f64 = jumps.sample(Open01);
            t + (-u.ln()) / total
        } else {
            f64::INFINITY
        };

        let exposure = model.failure_hazard * k as f64 * (next.min(horizon) - t);
        if exposure > 0.0 {
            // Poisson::new only fails for non-finite or non-positive means.
            let draw: f64 = Poisson::new(exposure)
                .expect("positive finite mean")
                .sample(&mut bankrupt);
            failures += draw as u64;
        }

        if next > horizon {
            return failures;
        }
        let pick: f64 = jumps.random();
        if pick * total < b {
            k += 1;
        } else {
            k -= 1;
        }
        t = next;
        on_event(t, k);
    }
}

/// Simulate one exact sample path of `N₁` on `[0, horizon]`.
pub fn simulate_trajectory(
    model: &JumpModel,
    n1_0: usize,
    horizon: f64,
    seed: u64,
) -> Result<Trajectory> {
    check_run(model, n1_0, horizon)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let failures = walk(model, n1_0, horizon, seed, |t, k| {
        times.push(t);
        values.push(k);
    });
    Ok(Trajectory {
        times,
        values,
        initial: n1_0,
        horizon,
        failures,
        degenerate: model.process.is_degenerate(),
    })
}

/// Per-time ensemble moments of the fragile share `n₁ = N₁/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    /// Sampling times `j·T/buckets`, `j = 0..=buckets`.
    pub grid: Vec<f64>,
    pub mean_n1: Vec<f64>,
    /// Population variance across runs.
    pub var_n1: Vec<f64>,
    pub runs: usize,
    /// Mean bankruptcies per unit time, per trajectory.
    pub failure_rate: f64,
    pub n: usize,
}

impl EnsembleStats {
    pub fn final_mean(&self) -> f64 {
        *self.mean_n1.last().expect("grid is never empty")
    }

    pub fn final_var(&self) -> f64 {
        *self.var_n1.last().expect("grid is never empty")
    }
}

#[derive(Clone)]
struct Sums {
    s1: Vec<u64>,
    s2: Vec<u128>,
    failures: u64,
}

impl Sums {
    fn new(len: usize) -> Self {
        Sums {
            s1: vec![0; len],
            s2: vec![0; len],
            failures: 0,
        }
    }

    fn merge(mut self, other: Sums) -> Sums {
        for (a, b) in self.s1.iter_mut().zip(&other.s1) {
            *a += b;
        }
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            *a += b;
        }
        self.failures += other.failures;
        self
    }
}

/// Simulate `runs` independent paths in parallel and reduce their grid samples.
///
/// Sums of `N₁` and `N₁²` are accumulated in integers, so the result does not
/// depend on how rayon schedules the trajectories.
pub fn run_ensemble(
    model: &JumpModel,
    n1_0: usize,
    horizon: f64,
    runs: usize,
    master_seed: u64,
    buckets: usize,
) -> Result<EnsembleStats> {
    check_run(model, n1_0, horizon)?;
    if runs < 1 {
        return Err(Error::domain("runs", "ensemble needs at least one run"));
    }
    if buckets < 1 {
        return Err(Error::domain("buckets", "need at least one bucket"));
    }
    let grid: Vec<f64> = (0..=buckets)
        .map(|j| horizon * j as f64 / buckets as f64)
        .collect();
    let len = grid.len();

    let sums = (0..runs as u64)
        .into_par_iter()
        .fold(
            || Sums::new(len),
            |mut acc, i| {
                let mut next = 0usize;
                let mut last = n1_0;
                let mut record = |upto: f64, k: usize, acc: &mut Sums, inclusive: bool| {
                    while next < len && (grid[next] < upto || (inclusive && grid[next] <= upto)) {
                        acc.s1[next] += k as u64;
                        acc.s2[next] += (k as u128) * (k as u128);
                        next += 1;
                    }
                };
                let failures = walk(
                    model,
                    n1_0,
                    horizon,
                    trajectory_seed(master_seed, i),
                    |t, k| {
                        record(t, last, &mut acc, false);
                        last = k;
                    },
                );
                record(horizon, last, &mut acc, true);
                acc.failures += failures;
                acc
            },
        )
        .reduce(|| Sums::new(len), Sums::merge);

    let r = runs as u128;
    let n = model.process.n as f64;
    let mean_n1 = sums
        .s1
        .iter()
        .map(|&s| s as f64 / (runs as f64 * n))
        .collect();
    let var_n1 = sums
        .s1
        .iter()
        .zip(&sums.s2)
        .map(|(&s1, &s2)| {
            // R·S2 − S1² ≥ 0 exactly (Cauchy–Schwarz on integers).
            let num = r * s2 - (s1 as u128) * (s1 as u128);
            num as f64 / ((runs as f64).powi(2) * n * n)
        })
        .collect();

    Ok(EnsembleStats {
        grid,
        mean_n1,
        var_n1,
        runs,
        failure_rate: sums.failures as f64 / (runs as f64 * horizon),
        n: model.process.n,
    })
}
