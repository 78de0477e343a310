//! Scenario configuration and the end-to-end pipeline.
//!
//! A scenario file is flat UTF-8 text with one `key = value` per line. `#`
//! starts a comment. Keys are exactly the field names below; unknown and
//! duplicate keys are rejected.
//!
//! | key           | type     | default   |
//! |---------------|----------|-----------|
//! | `N`           | integer  | required  |
//! | `r`           | real     | required  |
//! | `c`           | real     | required  |
//! | `a0`          | real     | required  |
//! | `a1`          | real     | required  |
//! | `eta`         | real     | required  |
//! | `P`           | real     | `1`       |
//! | `shock_lo`    | real     | `0.75`    |
//! | `shock_hi`    | real     | `1.25`    |
//! | `n1_0`        | integer  | required  |
//! | `horizon`     | real     | required  |
//! | `runs`        | integer  | required  |
//! | `buckets`     | integer  | `200`     |
//! | `dt_override` | real     | unset     |
//! | `seed`        | integer  | required  |
//! | `outputs`     | list     | `compare` |
//!
//! `outputs` is a comma-separated subset of `trajectory, ensemble, master,
//! macro, equilibrium, compare`.
//!
//! # Files
//!
//! Every run writes `summary.txt`. Depending on the outputs it also writes
//! `trajectory.csv` (`t,N1`), `ensemble.csv` (`t,mean_n1,var_n1`),
//! `master.csv` (`t,k,p`), `macro.csv` (`t,m,var_s,Y`), `equilibrium.txt`,
//! `potential.csv` (`n,U`) and `compare.csv`
//! (`t,ensemble_mean,master_mean,drift_mean,ensemble_var,master_var,gaussian_var`,
//! all in units of firms). Numbers use [`format_sig`]; lines end in `\n`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::Path;

use crate::asymptotics::{
    drift_solution, gaussian_approximation, spread_variance, MacroPath, SteadyState,
};
use crate::equilibrium::EquilibriumReport;
use crate::error::Error;
use crate::jump::{
    run_ensemble, simulate_trajectory, trajectory_seed, BirthDeath, EnsembleStats, JumpModel,
};
use crate::master::{
    binomial_pmf, default_dt, integrate, l1_distance, linf_distance, stationary_detailed_balance,
    MasterPath, ProbabilityVector,
};
use crate::model::{calibrate, CalibratedRates, ModelParams, ShockSupport};
use crate::numfmt::format_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Output {
    Trajectory,
    Ensemble,
    Master,
    Macro,
    Equilibrium,
    Compare,
}

impl Output {
    pub const ALL: [Output; 6] = [
        Output::Trajectory,
        Output::Ensemble,
        Output::Master,
        Output::Macro,
        Output::Equilibrium,
        Output::Compare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Output::Trajectory => "trajectory",
            Output::Ensemble => "ensemble",
            Output::Master => "master",
            Output::Macro => "macro",
            Output::Equilibrium => "equilibrium",
            Output::Compare => "compare",
        }
    }

    pub fn parse(s: &str) -> Option<Output> {
        Output::ALL.into_iter().find(|o| o.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub params: ModelParams,
    pub n1_0: usize,
    pub horizon: f64,
    pub runs: usize,
    pub buckets: usize,
    pub dt_override: Option<f64>,
    pub seed: u64,
    pub outputs: Vec<Output>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const KEYS: [&str; 16] = [
    "N",
    "r",
    "c",
    "a0",
    "a1",
    "eta",
    "P",
    "shock_lo",
    "shock_hi",
    "n1_0",
    "horizon",
    "runs",
    "buckets",
    "dt_override",
    "seed",
    "outputs",
];

struct Entries<'a> {
    map: HashMap<&'a str, (usize, &'a str)>,
}

impl<'a> Entries<'a> {
    fn err(&self, key: &str, message: String) -> ConfigError {
        ConfigError {
            line: self.map.get(key).map(|&(l, _)| l),
            key: Some(key.to_string()),
            message,
        }
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.map.get(key).map(|&(_, v)| v)
    }

    fn required(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.raw(key).ok_or_else(|| ConfigError {
            line: None,
            key: Some(key.to_string()),
            message: format!("missing required key `{key}`"),
        })
    }

    fn real(&self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        let raw = match (self.raw(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) => return Ok(d),
            (None, None) => self.required(key)?,
        };
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(
                key,
                format!("`{key}` expects a finite real number, got `{raw}`"),
            )),
        }
    }

    fn integer<T: std::str::FromStr>(
        &self,
        key: &str,
        default: Option<T>,
    ) -> Result<T, ConfigError> {
        let raw = match (self.raw(key), default) {
            (Some(v), _) => v,
            (None, Some(d)) => return Ok(d),
            (None, None) => self.required(key)?,
        };
        raw.parse::<T>().map_err(|_| {
            self.err(
                key,
                format!("`{key}` expects a nonnegative integer, got `{raw}`"),
            )
        })
    }
}

/// Parse a scenario from text.
pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut map: HashMap<&str, (usize, &str)> = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(lineno),
                key: None,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(ConfigError {
                line: Some(lineno),
                key: Some(key.to_string()),
                message: format!("unknown key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(ConfigError {
                line: Some(lineno),
                key: Some(key.to_string()),
                message: format!("`{key}` has no value"),
            });
        }
        if let Some(&(first, _)) = map.get(key) {
            return Err(ConfigError {
                line: Some(lineno),
                key: Some(key.to_string()),
                message: format!("duplicate key `{key}` (first set on line {first})"),
            });
        }
        map.insert(key, (lineno, value));
    }
    let e = Entries { map };

    let n: usize = e.integer("N", None)?;
    if n < 1 {
        return Err(e.err("N", "N must be at least 1".into()));
    }
    let r = e.real("r", None)?;
    if !(r > 0.0) {
        return Err(e.err("r", format!("r must be positive, got {r}")));
    }
    let c = e.real("c", None)?;
    if !(c > 0.0 && c < 1.0) {
        return Err(e.err("c", "c out of (0,1)".into()));
    }
    let a0 = e.real("a0", None)?;
    let a1 = e.real("a1", None)?;
    let eta = e.real("eta", None)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(e.err("eta", "eta out of [0,1]".into()));
    }
    let price = e.real("P", Some(1.0))?;
    if !(price > 0.0) {
        return Err(e.err("P", format!("P must be positive, got {price}")));
    }
    let defaults = ShockSupport::default();
    let lo = e.real("shock_lo", Some(defaults.lo))?;
    let hi = e.real("shock_hi", Some(defaults.hi))?;
    if !(lo < hi) {
        let key = if e.raw("shock_hi").is_some() {
            "shock_hi"
        } else {
            "shock_lo"
        };
        return Err(e.err(
            key,
            format!("shock_lo ({lo}) must be below shock_hi ({hi})"),
        ));
    }
    let n1_0: usize = e.integer("n1_0", None)?;
    if n1_0 > n {
        return Err(e.err("n1_0", format!("n1_0 out of [0, N] (N = {n})")));
    }
    let horizon = e.real("horizon", None)?;
    if !(horizon > 0.0) {
        return Err(e.err("horizon", "horizon must be positive".into()));
    }
    let runs: usize = e.integer("runs", None)?;
    if runs < 1 {
        return Err(e.err("runs", "runs must be at least 1".into()));
    }
    let buckets: usize = e.integer("buckets", Some(200))?;
    if buckets < 1 {
        return Err(e.err("buckets", "buckets must be at least 1".into()));
    }
    let dt_override = match e.raw("dt_override") {
        None => None,
        Some(_) => {
            let dt = e.real("dt_override", None)?;
            if !(dt > 0.0) {
                return Err(e.err("dt_override", "dt_override must be positive".into()));
            }
            Some(dt)
        }
    };
    let seed: u64 = e.integer("seed", None)?;
    let outputs = match e.raw("outputs") {
        None => vec![Output::Compare],
        Some(raw) => {
            let mut outs = Vec::new();
            for item in raw.split(',').map(str::trim) {
                let out = Output::parse(item)
                    .ok_or_else(|| e.err("outputs", format!("unknown output `{item}`")))?;
                if !outs.contains(&out) {
                    outs.push(out);
                }
            }
            outs
        }
    };

    Ok(ScenarioConfig {
        params: ModelParams {
            n,
            r,
            c,
            a0,
            a1,
            eta,
            price,
            shock: ShockSupport { lo, hi },
        },
        n1_0,
        horizon,
        runs,
        buckets,
        dt_override,
        seed,
        outputs,
    })
}

/// Read and parse a scenario file.
pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|err| ConfigError {
        line: None,
        key: None,
        message: format!("cannot read {}: {err}", path.display()),
    })?;
    parse_config_str(&text)
}

#[derive(Debug)]
pub enum ScenarioError {
    Config(ConfigError),
    /// Calibration or integration failed, or the calibrated rates are degenerate.
    Numeric(Error),
    Io(std::io::Error),
}

impl ScenarioError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) => 2,
            ScenarioError::Numeric(_) => 3,
            ScenarioError::Io(_) => 1,
        }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Config(e) => write!(f, "config error: {e}"),
            ScenarioError::Numeric(e) => write!(f, "numeric error: {e}"),
            ScenarioError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

impl From<ConfigError> for ScenarioError {
    fn from(e: ConfigError) -> Self {
        ScenarioError::Config(e)
    }
}

impl From<Error> for ScenarioError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => ScenarioError::Config(ConfigError {
                line: None,
                key: None,
                message: msg,
            }),
            other => ScenarioError::Numeric(other),
        }
    }
}

impl From<std::io::Error> for ScenarioError {
    fn from(e: std::io::Error) -> Self {
        ScenarioError::Io(e)
    }
}

/// One rendered output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Cross-layer comparison on the shared grid, in units of firms.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareReport {
    pub grid: Vec<f64>,
    pub ensemble_mean: Vec<f64>,
    pub master_mean: Vec<f64>,
    pub drift_mean: Vec<f64>,
    pub ensemble_var: Vec<f64>,
    pub master_var: Vec<f64>,
    pub gaussian_var: Vec<f64>,
    pub m_star: f64,
    /// L∞ distance of the detailed-balance recursion to the closed-form binomial.
    pub recursion_binomial_linf: f64,
    /// L∞ distance of the integrated distribution at the horizon to the binomial.
    pub master_binomial_linf: f64,
    /// L1 distance of the stationary Gaussian approximation to the recursion.
    pub gaussian_l1: Option<f64>,
    pub y_e: f64,
    pub beta: Option<f64>,
    pub n_star: Option<f64>,
}

impl CompareReport {
    fn to_csv(&self) -> String {
        let mut s = String::from(
            "t,ensemble_mean,master_mean,drift_mean,ensemble_var,master_var,gaussian_var\n",
        );
        for j in 0..self.grid.len() {
            let row = [
                self.grid[j],
                self.ensemble_mean[j],
                self.master_mean[j],
                self.drift_mean[j],
                self.ensemble_var[j],
                self.master_var[j],
                self.gaussian_var[j],
            ];
            let cells: Vec<String> = row.iter().map(|&x| format_sig(x)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// Everything a scenario run computed, before it is rendered to files.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub rates: CalibratedRates,
    pub dt: f64,
    pub ensemble: Option<EnsembleStats>,
    pub master: Option<MasterPath>,
    pub compare: Option<CompareReport>,
    pub equilibrium: Option<EquilibriumReport>,
    pub artifacts: Vec<Artifact>,
}

fn kv(s: &mut String, key: &str, value: f64) {
    let _ = writeln!(s, "{key} = {}", format_sig(value));
}

fn opt_kv(s: &mut String, key: &str, value: Option<f64>) {
    match value {
        Some(v) => kv(s, key, v),
        None => {
            let _ = writeln!(s, "{key} = undefined");
        }
    }
}

/// Calibration block as written at the top of `summary.txt`.
pub fn calibration_block(rates: &CalibratedRates) -> String {
    let mut s = String::from("[calibration]\n");
    kv(&mut s, "q0", rates.q0);
    kv(&mut s, "q1", rates.q1);
    kv(&mut s, "mu", rates.mu);
    kv(&mut s, "u_bar", rates.u_bar);
    kv(&mut s, "a_bar", rates.a_bar);
    kv(&mut s, "zeta", rates.zeta);
    kv(&mut s, "iota", rates.iota);
    kv(&mut s, "lambda", rates.lambda);
    kv(&mut s, "gamma", rates.gamma);
    kv(&mut s, "fixed_point_residual", rates.residual);
    s
}

fn grid(horizon: f64, buckets: usize) -> Vec<f64> {
    (0..=buckets)
        .map(|j| horizon * j as f64 / buckets as f64)
        .collect()
}

/// Run the pipeline in memory. Nothing touches the filesystem.
pub fn render_scenario(config: &ScenarioConfig) -> Result<ScenarioRun, ScenarioError> {
    let params = &config.params;
    let rates = calibrate(params)?;
    if rates.is_degenerate() {
        return Err(ScenarioError::Numeric(Error::domain(
            "calibration",
            format!(
                "degenerate rates λ = γ = 0 (ζ = {}, ι = {}, η = {}): the occupation number cannot move",
                format_sig(rates.zeta),
                format_sig(rates.iota),
                format_sig(params.eta)
            ),
        )));
    }
    let n = params.n;
    let nf = n as f64;
    let process = BirthDeath::from_calibration(n, &rates)?;
    let jump = JumpModel::from_calibration(n, &rates)?;
    let dt = config.dt_override.unwrap_or_else(|| default_dt(&process));
    let times = grid(config.horizon, config.buckets);
    let m0 = config.n1_0 as f64 / nf;
    let wants = |o: Output| config.outputs.contains(&o);

    let mut artifacts = Vec::new();
    let mut summary = calibration_block(&rates);
    summary.push_str("[scenario]\n");
    let _ = writeln!(summary, "N = {n}");
    let _ = writeln!(summary, "n1_0 = {}", config.n1_0);
    kv(&mut summary, "horizon", config.horizon);
    let _ = writeln!(summary, "runs = {}", config.runs);
    let _ = writeln!(summary, "buckets = {}", config.buckets);
    let _ = writeln!(summary, "seed = {}", config.seed);
    kv(&mut summary, "dt", dt);
    let names: Vec<&str> = config.outputs.iter().map(|o| o.name()).collect();
    let _ = writeln!(summary, "outputs = {}", names.join(","));

    if wants(Output::Trajectory) {
        let tr = simulate_trajectory(
            &jump,
            config.n1_0,
            config.horizon,
            trajectory_seed(config.seed, 0),
        )?;
        let mut csv = String::from("t,N1\n");
        let _ = writeln!(csv, "0,{}", tr.initial);
        for (&t, &v) in tr.times.iter().zip(&tr.values) {
            let _ = writeln!(csv, "{},{v}", format_sig(t));
        }
        artifacts.push(Artifact {
            name: "trajectory.csv".into(),
            contents: csv,
        });
        summary.push_str("[trajectory]\n");
        let _ = writeln!(summary, "events = {}", tr.times.len());
        let _ = writeln!(summary, "failures = {}", tr.failures);
        let _ = writeln!(summary, "final_N1 = {}", tr.final_value());
    }

    let ensemble = if wants(Output::Ensemble) || wants(Output::Compare) {
        Some(run_ensemble(
            &jump,
            config.n1_0,
            config.horizon,
            config.runs,
            config.seed,
            config.buckets,
        )?)
    } else {
        None
    };
    if let (true, Some(ens)) = (wants(Output::Ensemble), &ensemble) {
        let mut csv = String::from("t,mean_n1,var_n1\n");
        for j in 0..ens.grid.len() {
            let _ = writeln!(
                csv,
                "{},{},{}",
                format_sig(ens.grid[j]),
                format_sig(ens.mean_n1[j]),
                format_sig(ens.var_n1[j])
            );
        }
        artifacts.push(Artifact {
            name: "ensemble.csv".into(),
            contents: csv,
        });
    }
    if let Some(ens) = &ensemble {
        summary.push_str("[ensemble]\n");
        let _ = writeln!(summary, "runs = {}", ens.runs);
        kv(&mut summary, "final_mean_n1", ens.final_mean());
        kv(&mut summary, "final_var_n1", ens.final_var());
        kv(&mut summary, "failure_rate", ens.failure_rate);
    }

    let master = if wants(Output::Master) || wants(Output::Compare) {
        let p0 = ProbabilityVector::point_mass(n, config.n1_0)?;
        Some(integrate(&p0, &process, dt, &times)?)
    } else {
        None
    };
    if let (true, Some(path)) = (wants(Output::Master), &master) {
        let mut csv = String::from("t,k,p\n");
        for snap in &path.snapshots {
            let t = format_sig(snap.t);
            for (k, &p) in snap.p.iter().enumerate() {
                let _ = writeln!(csv, "{t},{k},{}", format_sig(p));
            }
        }
        artifacts.push(Artifact {
            name: "master.csv".into(),
            contents: csv,
        });
    }
    if let Some(path) = &master {
        summary.push_str("[master]\n");
        let _ = writeln!(summary, "steps = {}", path.log.steps);
        kv(
            &mut summary,
            "max_norm_correction",
            path.log.max_norm_correction,
        );
        kv(&mut summary, "max_rhs_sum", path.log.max_rhs_sum);
        kv(&mut summary, "min_entry", path.log.min_entry);
    }

    if wants(Output::Macro) {
        let path = MacroPath::compute(&process, &rates, params.r, params.c, m0, &times);
        let mut csv = String::from("t,m,var_s,Y\n");
        for j in 0..path.grid.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                format_sig(path.grid[j]),
                format_sig(path.m[j]),
                format_sig(path.var_s[j]),
                format_sig(path.y[j])
            );
        }
        artifacts.push(Artifact {
            name: "macro.csv".into(),
            contents: csv,
        });
    }

    let steady = SteadyState::compute(&process, &rates, params.r, params.c)?;
    let equilibrium = if wants(Output::Equilibrium) || wants(Output::Compare) {
        Some(EquilibriumReport::compute(&rates, steady.m_star, n))
    } else {
        None
    };
    if let (true, Some(eq)) = (wants(Output::Equilibrium), &equilibrium) {
        artifacts.push(Artifact {
            name: "equilibrium.txt".into(),
            contents: eq.to_text(),
        });
        artifacts.push(Artifact {
            name: "potential.csv".into(),
            contents: eq.potential_csv(),
        });
    }

    let compare = match (wants(Output::Compare), &ensemble, &master, &equilibrium) {
        (true, Some(ens), Some(path), Some(eq)) => {
            let stationary = stationary_detailed_balance(&process)?;
            let binomial = binomial_pmf(n, steady.m_star);
            let gaussian_l1 = if n >= 10 {
                let g = gaussian_approximation(&process, steady.m_star, f64::INFINITY)?;
                Some(l1_distance(&g.p, &stationary.dist.p))
            } else {
                None
            };
            let (master_mean, master_var): (Vec<f64>, Vec<f64>) =
                path.snapshots.iter().map(|s| s.moments()).unzip();
            let report = CompareReport {
                grid: times.clone(),
                ensemble_mean: ens.mean_n1.iter().map(|m| m * nf).collect(),
                master_mean,
                drift_mean: times
                    .iter()
                    .map(|&t| nf * drift_solution(m0, t, &process))
                    .collect(),
                ensemble_var: ens.var_n1.iter().map(|v| v * nf * nf).collect(),
                master_var,
                gaussian_var: times
                    .iter()
                    .map(|&t| nf * spread_variance(m0, t, &process))
                    .collect(),
                m_star: steady.m_star,
                recursion_binomial_linf: linf_distance(&stationary.dist.p, &binomial),
                master_binomial_linf: linf_distance(&path.last().p, &binomial),
                gaussian_l1,
                y_e: steady.y_e,
                beta: eq.beta,
                n_star: eq.n_star,
            };
            artifacts.push(Artifact {
                name: "compare.csv".into(),
                contents: report.to_csv(),
            });
            Some(report)
        }
        _ => None,
    };

    summary.push_str("[stationary]\n");
    kv(&mut summary, "m_star", steady.m_star);
    kv(&mut summary, "var_star", steady.var_star);
    kv(&mut summary, "Y_e", steady.y_e);
    if let Some(cmp) = &compare {
        kv(
            &mut summary,
            "binomial_linf_recursion",
            cmp.recursion_binomial_linf,
        );
        kv(
            &mut summary,
            "binomial_linf_master",
            cmp.master_binomial_linf,
        );
        opt_kv(&mut summary, "gaussian_l1", cmp.gaussian_l1);
    }
    if let Some(eq) = &equilibrium {
        opt_kv(&mut summary, "beta", eq.beta);
        opt_kv(&mut summary, "n_star", eq.n_star);
        for flag in &eq.flags {
            let _ = writeln!(summary, "flag = {}", flag.describe());
        }
    }
    artifacts.insert(
        0,
        Artifact {
            name: "summary.txt".into(),
            contents: summary,
        },
    );

    Ok(ScenarioRun {
        config: config.clone(),
        rates,
        dt,
        ensemble,
        master,
        compare,
        equilibrium,
        artifacts,
    })
}

/// Run the pipeline and write every artifact into `out_dir`. Files are only
/// written once all computations have succeeded.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<ScenarioRun, ScenarioError> {
    let run = render_scenario(config)?;
    std::fs::create_dir_all(out_dir)?;
    for artifact in &run.artifacts {
        std::fs::write(out_dir.join(&artifact.name), &artifact.contents)?;
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
N = 100
r = 1
c = 0.5
a0 = 0.5
a1 = -1
eta = 0.4
n1_0 = 50
horizon = 100
runs = 1000
seed = 42
";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.params.n, 100);
        assert_eq!(cfg.params.price, 1.0);
        assert_eq!(cfg.params.shock, ShockSupport::default());
        assert_eq!(cfg.buckets, 200);
        assert_eq!(cfg.dt_override, None);
        assert_eq!(cfg.outputs, vec![Output::Compare]);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.n1_0, 50);
    }

    #[test]
    fn comments_and_lists() {
        let text =
            format!("# header\n{MINIMAL}outputs = macro, compare # trailing\nbuckets = 10\n");
        let cfg = parse_config_str(&text).unwrap();
        assert_eq!(cfg.outputs, vec![Output::Macro, Output::Compare]);
        assert_eq!(cfg.buckets, 10);
    }

    #[test]
    fn invariant_errors_name_key_and_line() {
        let text = MINIMAL.replace("eta = 0.4", "eta = 1.5");
        let err = parse_config_str(&text).unwrap_err();
        assert_eq!(err.to_string(), "line 6: eta out of [0,1]");
        assert_eq!(err.key.as_deref(), Some("eta"));

        let err = parse_config_str(&MINIMAL.replace("n1_0 = 50", "n1_0 = 101")).unwrap_err();
        assert_eq!(err.line, Some(7));
        let err = parse_config_str(&MINIMAL.replace("c = 0.5", "c = 1")).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("c"));
    }

    #[test]
    fn strictness() {
        let err = parse_config_str(&format!("{MINIMAL}eta = 0.3\n")).unwrap_err();
        assert_eq!(err.line, Some(11));
        assert!(err.message.contains("duplicate key `eta`"), "{err}");
        assert!(err.message.contains("line 6"));

        let err = parse_config_str(&format!("{MINIMAL}sigma = 2\n")).unwrap_err();
        assert!(err.to_string().starts_with("line 11: unknown key `sigma`"));

        let err = parse_config_str(&MINIMAL.replace("runs = 1000", "runs = many")).unwrap_err();
        assert_eq!(err.line, Some(9));
        let err = parse_config_str(&MINIMAL.replace("N = 100", "N = 100.5")).unwrap_err();
        assert_eq!(err.line, Some(1));

        let err = parse_config_str(&MINIMAL.replace("seed = 42\n", "")).unwrap_err();
        assert!(err.message.contains("missing required key `seed`"));

        let err = parse_config_str(&format!("{MINIMAL}outputs = plots\n")).unwrap_err();
        assert!(err.message.contains("unknown output `plots`"));

        let err = parse_config_str(&format!("{MINIMAL}just text\n")).unwrap_err();
        assert_eq!(err.line, Some(11));

        let err = parse_config_str(&format!("{MINIMAL}shock_lo = 1.3\n")).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("shock_lo"));
    }

    #[test]
    fn degenerate_calibration_is_numeric_error() {
        // a0 large: ζ = 0; eta = 0 kills γ as well.
        let text = MINIMAL.replace("eta = 0.4", "eta = 0");
        let cfg = parse_config_str(&text).unwrap();
        let err = render_scenario(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("degenerate"));

        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        assert!(run_scenario(&cfg, &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn unstable_override_is_config_error() {
        let text = format!("{MINIMAL}dt_override = 10\noutputs = master\n");
        let cfg = parse_config_str(&text).unwrap();
        let err = render_scenario(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn macro_output_header() {
        let text = format!("{MINIMAL}outputs = macro\nbuckets = 4\n");
        let run = render_scenario(&parse_config_str(&text).unwrap()).unwrap();
        let names: Vec<&str> = run.artifacts.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(names, vec!["summary.txt", "macro.csv"]);
        let csv = &run.artifacts[1].contents;
        assert!(csv.starts_with("t,m,var_s,Y\n0,0.5,0,"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn summary_calibration_identity() {
        let run =
            render_scenario(&parse_config_str(&format!("{MINIMAL}outputs = macro\n")).unwrap())
                .unwrap();
        let summary = &run.artifacts[0].contents;
        let get = |key: &str| -> f64 {
            summary
                .lines()
                .find_map(|l| l.strip_prefix(&format!("{key} = ")))
                .unwrap()
                .parse()
                .unwrap()
        };
        let eta = 0.4;
        assert!((get("lambda") - get("zeta") * (1.0 - eta)).abs() < 1e-11);
        assert!((get("gamma") - get("iota") * eta).abs() < 1e-11);
        assert_eq!(run.rates.lambda, run.rates.zeta * (1.0 - eta));
    }
}
