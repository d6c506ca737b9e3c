//! Experiment orchestration: configuration with `CLI > file > defaults`
//! precedence, seeded parallel replication, CSV and JSON artifacts, and the
//! `validate` oracle suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{self, estimators};
use crate::engine::{self, PolicyKind, SimParams, TerminationReason};
use crate::error::{Result, SimError};
use crate::protocol::ConeChoiceModel;
use crate::rng::{purpose, RngTree};

/// Experiment kinds selectable from the command line or a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ExitTime,
    Velocity,
    AlohaBaseline,
    Validate,
    Sweep,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exit-time" => Ok(Self::ExitTime),
            "velocity" => Ok(Self::Velocity),
            "aloha-baseline" => Ok(Self::AlohaBaseline),
            "validate" => Ok(Self::Validate),
            "sweep" => Ok(Self::Sweep),
            other => Err(SimError::Config(format!(
                "unknown experiment '{other}' (expected exit-time, velocity, aloha-baseline, validate, or sweep)"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::ExitTime => "exit-time",
            Self::Velocity => "velocity",
            Self::AlohaBaseline => "aloha-baseline",
            Self::Validate => "validate",
            Self::Sweep => "sweep",
        }
    }

    /// Kind-specific defaults applied before file and CLI overrides.
    fn default_params(self) -> SimParams {
        let mut p = SimParams::default();
        match self {
            Self::Velocity => {
                p.window_x = 400.0;
                p.window_y = 400.0;
                p.horizon = 100_000;
                p.replications = 1;
            }
            Self::AlohaBaseline => {
                p.policy = PolicyKind::Aloha;
            }
            _ => {}
        }
        p
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub params: SimParams,
    pub out_dir: PathBuf,
    /// Worker threads; 0 lets the pool pick.
    pub jobs: usize,
    /// Sweep grid: parameter name -> values. Empty means a degenerate sweep.
    pub grid: BTreeMap<String, Vec<f64>>,
    /// Experiment run at each sweep grid point.
    pub sweep_kind: ExperimentKind,
}

/// Maximum number of grid points a sweep may expand to.
pub const SWEEP_CAP: usize = 256;

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .trim()
        .parse::<f64>()
        .map_err(|_| SimError::Config(format!("key '{key}': expected a number, got '{value}'")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .trim()
        .parse::<u64>()
        .map_err(|_| SimError::Config(format!("key '{key}': expected an integer, got '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(SimError::Config(format!("key '{key}': expected a boolean, got '{other}'"))),
    }
}

/// Applies one `key = value` pair to the parameter set. Unknown keys are
/// reported by name.
pub fn apply_param(params: &mut SimParams, key: &str, value: &str) -> Result<()> {
    match key {
        "lambda" | "intensity" => params.intensity = parse_f64(key, value)?,
        "alpha" => params.alpha = parse_f64(key, value)?,
        "mu" => params.mu = parse_f64(key, value)?,
        "beta" => params.beta = parse_f64(key, value)?,
        "gamma" => params.gamma = parse_f64(key, value)?,
        "noise" => params.noise = parse_f64(key, value)?,
        "avg_power" => params.avg_power = parse_f64(key, value)?,
        "epsilon" => params.epsilon = parse_f64(key, value)?,
        "cones" => params.cones = parse_u64(key, value)? as usize,
        "window_x" => params.window_x = parse_f64(key, value)?,
        "window_y" => params.window_y = parse_f64(key, value)?,
        "guard" => params.guard = parse_f64(key, value)?,
        "horizon" => params.horizon = parse_u64(key, value)?,
        "replications" => params.replications = parse_u64(key, value)?,
        "seed" => params.seed = parse_u64(key, value)?,
        "policy" => {
            params.policy = match value.trim() {
                "power_control" => PolicyKind::PowerControl,
                "aloha" => PolicyKind::Aloha,
                other => {
                    return Err(SimError::Config(format!(
                        "key 'policy': expected power_control or aloha, got '{other}'"
                    )))
                }
            }
        }
        "cone_mode" => {
            params.cone_mode = match value.trim() {
                "uniform_random" => ConeChoiceModel::UniformRandom,
                "worst_case" => ConeChoiceModel::WorstCase,
                other => {
                    return Err(SimError::Config(format!(
                        "key 'cone_mode': expected uniform_random or worst_case, got '{other}'"
                    )))
                }
            }
        }
        "stationary" => params.stationary = parse_bool(key, value)?,
        "aloha_power" => params.aloha_power = parse_f64(key, value)?,
        "aloha_prob" => params.aloha_prob = parse_f64(key, value)?,
        other => return Err(SimError::Config(format!("unknown parameter key '{other}'"))),
    }
    Ok(())
}

/// Parses a flat `key = value` config file. Lines starting with `#` and blank
/// lines are skipped.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(SimError::Config(format!(
                "{}:{}: expected 'key = value', got '{line}'",
                path.display(),
                lineno + 1
            )));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Builds a resolved config from the CLI inputs with precedence
/// `CLI > file > kind defaults`.
pub fn resolve_config(
    kind_flag: Option<&str>,
    config_path: Option<&Path>,
    sets: &[String],
    seed_flag: Option<u64>,
    out_dir: &Path,
    jobs_flag: Option<usize>,
) -> Result<ExperimentConfig> {
    let file_pairs = match config_path {
        Some(p) => parse_config_file(p)?,
        None => Vec::new(),
    };
    let file_kind = file_pairs
        .iter()
        .find(|(k, _)| k == "experiment")
        .map(|(_, v)| ExperimentKind::parse(v))
        .transpose()?;
    let kind = match kind_flag {
        Some(s) => ExperimentKind::parse(s)?,
        None => file_kind.ok_or_else(|| {
            SimError::Config("no experiment selected: pass --experiment or set it in the config file".into())
        })?,
    };

    let mut params = kind.default_params();
    let mut jobs = 0usize;
    let mut grid: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut sweep_kind = ExperimentKind::ExitTime;

    let mut apply = |params: &mut SimParams,
                     grid: &mut BTreeMap<String, Vec<f64>>,
                     jobs: &mut usize,
                     sweep_kind: &mut ExperimentKind,
                     key: &str,
                     value: &str|
     -> Result<()> {
        if key == "experiment" {
            return Ok(()); // consumed above
        }
        if key == "jobs" {
            *jobs = parse_u64(key, value)? as usize;
            return Ok(());
        }
        if key == "sweep_experiment" {
            let k = ExperimentKind::parse(value.trim())?;
            if !matches!(k, ExperimentKind::ExitTime | ExperimentKind::AlohaBaseline | ExperimentKind::Velocity) {
                return Err(SimError::Config(
                    "key 'sweep_experiment': only exit-time, aloha-baseline, or velocity can be swept".into(),
                ));
            }
            *sweep_kind = k;
            return Ok(());
        }
        if let Some(name) = key.strip_prefix("grid.") {
            if !matches!(name, "lambda" | "alpha" | "beta" | "gamma" | "m" | "cones" | "epsilon") {
                return Err(SimError::Config(format!(
                    "key '{key}': grid supports lambda, alpha, beta, gamma, m, epsilon"
                )));
            }
            let values = value
                .split(',')
                .map(|v| parse_f64(key, v))
                .collect::<Result<Vec<f64>>>()?;
            if values.is_empty() {
                return Err(SimError::Config(format!("key '{key}': empty grid axis")));
            }
            let name = if name == "m" { "cones" } else { name };
            grid.insert(name.to_string(), values);
            return Ok(());
        }
        apply_param(params, key, value)
    };

    for (k, v) in &file_pairs {
        apply(&mut params, &mut grid, &mut jobs, &mut sweep_kind, k, v)?;
    }
    for set in sets {
        let Some((k, v)) = set.split_once('=') else {
            return Err(SimError::Config(format!("--set expects key=value, got '{set}'")));
        };
        apply(&mut params, &mut grid, &mut jobs, &mut sweep_kind, k.trim(), v.trim())?;
    }
    if let Some(seed) = seed_flag {
        params.seed = seed;
    }
    if let Some(j) = jobs_flag {
        jobs = j;
    }

    Ok(ExperimentConfig {
        kind,
        params,
        out_dir: out_dir.to_path_buf(),
        jobs,
        grid,
        sweep_kind,
    })
}

// ---------------------------------------------------------------------------
// results

#[derive(Debug, Clone, Serialize)]
pub struct HillSweep {
    pub top5: Option<f64>,
    pub top10: Option<f64>,
    pub top20: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DelayStats {
    pub samples: usize,
    pub dead_ends: usize,
    pub mean: f64,
    pub median: f64,
    pub ci95_half_width: f64,
    pub censored_fraction: f64,
    /// Movement of the running mean over the final half of the samples.
    pub stabilization_relative_change: f64,
    /// Stabilized: relative change below 5% and censoring below 1e-3.
    pub stable: bool,
    pub hill: HillSweep,
}

#[derive(Debug, Clone, Serialize)]
pub struct VelocityStats {
    pub v_hat: f64,
    pub ci95: (f64, f64),
    pub hops: usize,
    pub total_slots: u64,
    pub termination: TerminationReason,
    pub mean_hop_progress: f64,
    pub mean_hop_delay: f64,
    /// Relative spread of d(t)/t over the final fifth of the trace.
    pub tail_fluctuation: f64,
    pub dead_end_replications: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_hat_enhanced: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enhanced_delay_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub enhanced_half_means_overlap: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub check_name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceBounds {
    pub truncation_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_delay_upper_bound: Option<f64>,
}

/// Machine-readable experiment summary written as `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ResultSummary {
    pub experiment: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub jobs: usize,
    pub warnings: Vec<String>,
    pub params: SimParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay: Option<DelayStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<VelocityStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<CheckRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_checks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_bounds: Option<ReferenceBounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_points: Option<usize>,
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)?;
    Ok(())
}

fn in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

// ---------------------------------------------------------------------------
// experiment drivers

fn delay_stats_from(outcomes: &[Option<engine::ExitOutcome>]) -> Result<DelayStats> {
    let dead_ends = outcomes.iter().filter(|o| o.is_none()).count();
    let samples: Vec<&engine::ExitOutcome> = outcomes.iter().flatten().collect();
    if samples.is_empty() {
        return Err(SimError::Model("no exit-time samples survived".into()));
    }
    let delays: Vec<f64> = samples.iter().map(|o| o.delay as f64).collect();
    let censored: Vec<bool> = samples.iter().map(|o| o.censored).collect();
    let stab = estimators::stabilization(&delays, &censored)?;
    let uncensored: Vec<f64> = delays
        .iter()
        .zip(&censored)
        .filter(|(_, &c)| !c)
        .map(|(&d, _)| d)
        .collect();
    let mut sorted = uncensored.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    let (_, half) = estimators::batch_means_ci(&uncensored, 20.min(uncensored.len() / 2))?;
    let hill = |frac: f64| estimators::hill_tail_index(&delays, frac).ok();
    Ok(DelayStats {
        samples: samples.len(),
        dead_ends,
        mean: stab.mean,
        median,
        ci95_half_width: half,
        censored_fraction: stab.censored_fraction,
        stabilization_relative_change: stab.relative_change,
        stable: stab.relative_change < 0.05 && stab.censored_fraction < 1e-3,
        hill: HillSweep { top5: hill(0.05), top10: hill(0.10), top20: hill(0.20) },
    })
}

fn exit_time_csv(outcomes: &[Option<engine::ExitOutcome>]) -> String {
    let mut csv = String::from("replication,phi_seed,T,censored\n");
    for outcome in outcomes.iter().flatten() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            outcome.replication, outcome.phi_fingerprint, outcome.delay, outcome.censored
        );
    }
    csv
}

/// Runs the exit-time experiment (power control or the ALOHA baseline) over
///`replications` parallel replications.
pub fn run_exit_time_experiment(
    params: &SimParams,
    jobs: usize,
) -> Result<Vec<Option<engine::ExitOutcome>>> {
    let tree = RngTree::new(params.seed);
    in_pool(jobs, || {
        (0..params.replications)
            .into_par_iter()
            .map(|rep| match engine::run_exit_time(params, &tree, rep) {
                Ok(outcome) => Ok(Some(outcome)),
                Err(SimError::EmptyCone) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()
    })?
}

fn run_exit_kind(config: &ExperimentConfig, summary: &mut ResultSummary) -> Result<Vec<String>> {
    let outcomes = run_exit_time_experiment(&config.params, config.jobs)?;
    summary.delay = Some(delay_stats_from(&outcomes)?);
    summary.reference_bounds = Some(ReferenceBounds {
        truncation_error: analysis::truncation_error(
            config.params.intensity,
            config.params.avg_power,
            config.params.mu,
            config.params.alpha,
            config.params.guard,
        ),
        mean_delay_upper_bound: if config.params.policy == PolicyKind::PowerControl {
            analysis::mean_delay_upper_bound(&config.params).ok()
        } else {
            None
        },
    });
    Ok(vec![("exit_time.csv".to_string(), exit_time_csv(&outcomes))]
        .into_iter()
        .map(|(name, contents)| {
            write_file(config, &name, &contents).map(|_| name)
        })
        .collect::<Result<Vec<_>>>()?)
}

fn write_file(config: &ExperimentConfig, name: &str, contents: &str) -> Result<()> {
    write_atomic(&config.out_dir.join(name), contents)
}

fn hops_csv(hops: &[engine::HopRecord]) -> String {
    let mut csv = String::from("i,R,theta,T,T_prime\n");
    for h in hops {
        let t_prime = h.delay_enhanced.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{},{}", h.index, h.distance, h.angle, h.delay, t_prime);
    }
    csv
}

fn velocity_csv(series: &[f64]) -> String {
    let mut csv = String::from("slot,d,d_over_t\n");
    for (i, &ratio) in series.iter().enumerate() {
        let t = (i + 1) as f64;
        let _ = writeln!(csv, "{},{},{}", i + 1, ratio * t, ratio);
    }
    csv
}

fn tail_fluctuation(series: &[f64]) -> f64 {
    let start = series.len() - series.len() / 5;
    let tail = &series[start.min(series.len() - 1)..];
    let mean = estimators::sample_mean(tail);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mean > 0.0 {
        (hi - lo) / mean
    } else {
        f64::INFINITY
    }
}

fn run_velocity_kind(config: &ExperimentConfig, summary: &mut ResultSummary) -> Result<()> {
    let params = &config.params;
    let tree = RngTree::new(params.seed);
    let paired = params.stationary;

    // all replications in parallel; the first one feeds the series artifacts
    let traces: Vec<(engine::PacketTrace, Option<engine::PacketTrace>)> = in_pool(config.jobs, || {
        (0..params.replications)
            .into_par_iter()
            .map(|rep| {
                if paired {
                    engine::run_paired_traversal(params, &tree, rep).map(|(p, e)| (p, Some(e)))
                } else {
                    engine::run_traversal(params, &tree, rep, false).map(|p| (p, None))
                }
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let dead_ends = traces
        .iter()
        .filter(|(p, _)| p.termination == TerminationReason::DeadEnd)
        .count();
    let (lead, lead_enhanced) = &traces[0];
    let estimate = engine::information_velocity(lead)?;

    let mut rng_boot = tree.stream(&[purpose::DIAGNOSTICS, u64::MAX]);
    let progress: Vec<f64> = lead.hops.iter().map(|h| h.distance * h.angle.cos()).collect();
    let delays: Vec<f64> = lead.hops.iter().map(|h| h.delay as f64).collect();
    let ci95 = estimators::bootstrap_ratio_ci(&progress, &delays, 2000, &mut rng_boot)?;

    let mut stats = VelocityStats {
        v_hat: estimate.v_hat,
        ci95,
        hops: lead.hops.len(),
        total_slots: lead.total_slots,
        termination: lead.termination,
        mean_hop_progress: estimators::sample_mean(&progress),
        mean_hop_delay: estimators::sample_mean(&delays),
        tail_fluctuation: tail_fluctuation(&estimate.series),
        dead_end_replications: dead_ends,
        v_hat_enhanced: None,
        enhanced_delay_violations: None,
        enhanced_half_means_overlap: None,
    };

    if let Some(enhanced) = lead_enhanced {
        let ve = engine::information_velocity(enhanced)?;
        stats.v_hat_enhanced = Some(ve.v_hat);
        let violations = lead
            .hops
            .iter()
            .filter(|h| h.delay_enhanced.map_or(false, |tp| tp < h.delay))
            .count();
        stats.enhanced_delay_violations = Some(violations);
        let enhanced_delays: Vec<f64> = enhanced.hops.iter().map(|h| h.delay as f64).collect();
        if enhanced_delays.len() >= 40 {
            let half = enhanced_delays.len() / 2;
            let (m1, h1) = estimators::batch_means_ci(&enhanced_delays[..half], 10)?;
            let (m2, h2) = estimators::batch_means_ci(&enhanced_delays[half..], 10)?;
            stats.enhanced_half_means_overlap = Some((m1 - m2).abs() <= h1 + h2);
        }
        write_file(config, "hops.csv", &hops_csv(&lead.hops))?;
    } else {
        write_file(config, "hops.csv", &hops_csv(&lead.hops))?;
    }

    write_file(config, "velocity.csv", &velocity_csv(&estimate.series))?;
    summary.velocity = Some(stats);
    summary.reference_bounds = Some(ReferenceBounds {
        truncation_error: analysis::truncation_error(
            params.intensity,
            params.avg_power,
            params.mu,
            params.alpha,
            params.guard,
        ),
        mean_delay_upper_bound: analysis::mean_delay_upper_bound(params).ok(),
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// validate

fn validation_csv(checks: &[CheckRow]) -> String {
    let mut csv = String::from("check_name,statistic,threshold,pass\n");
    for c in checks {
        let _ = writeln!(csv, "{},{},{},{}", c.check_name, c.statistic, c.threshold, c.pass);
    }
    csv
}

fn check(name: &str, statistic: f64, threshold: f64, pass: bool) -> CheckRow {
    CheckRow { check_name: name.to_string(), statistic, threshold, pass }
}

/// Desk-scale oracle suite: smaller sample sizes than the acceptance tests,
/// same oracles. Returns one row per check.
pub fn validate_suite(params: &SimParams, jobs: usize) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let tree = RngTree::new(params.seed);

    // nearest-neighbor-in-cone law
    {
        let mut small = *params;
        small.window_x = 20.0;
        small.window_y = 20.0;
        small.guard = 10.0;
        let window = small.centered_window()?;
        let partition = small.partition()?;
        let mut rng = tree.stream(&[purpose::DIAGNOSTICS, 1]);
        let mut dist = Vec::with_capacity(20_000);
        while dist.len() < 20_000 {
            let ps = crate::spatial::sample_ppp(small.intensity, window, &mut rng)?;
            let grid = crate::spatial::SpatialGrid::build(&ps, &partition);
            if let Some((_, d)) = grid.nearest_in_cone(
                &ps,
                crate::spatial::Point::new(0.0, 0.0),
                None,
                0,
                &partition,
            ) {
                dist.push(d);
            }
        }
        let ks = estimators::ks_statistic(&dist, |r| {
            analysis::nn_cone_cdf(r, small.intensity, small.cones)
        })?;
        rows.push(check("nn_cone_law_ks", ks, 0.02, ks < 0.02));
    }

    // Campbell integral against quadrature
    {
        let mut worst: f64 = 0.0;
        for alpha in [2.5f64, 3.0, 4.0, 6.0] {
            let closed = analysis::campbell_l_integral(alpha)?;
            let numeric = std::f64::consts::PI
                + 2.0 * std::f64::consts::PI
                    * analysis::adaptive_simpson(&|w: f64| w.powf(alpha - 3.0), 0.0, 1.0, 1e-12);
            worst = worst.max(((numeric - closed) / closed).abs());
        }
        rows.push(check("campbell_integral_rel_err", worst, 1e-6, worst < 1e-6));
    }

    // average power identity
    {
        let policy = params.power_control()?;
        let mut worst: f64 = 0.0;
        for i in 1..200 {
            let d = i as f64 * 0.05;
            let (power, prob) = policy.power_and_prob(d, params.alpha)?;
            worst = worst.max((prob * power - params.avg_power).abs() / params.avg_power);
        }
        rows.push(check("average_power_identity", worst, 1e-12, worst < 1e-12));
    }

    // conditional Laplace lower bound
    {
        let mc: Vec<engine::LaplaceMc> = in_pool(jobs, || {
            (0..10u64)
                .into_par_iter()
                .map(|rep| engine::worst_case_laplace_mc(params, &tree, rep, 2000))
                .collect::<Result<Vec<_>>>()
        })??;
        let violations = mc
            .iter()
            .filter(|s| s.mc_mean < s.product_bound - 3.0 * s.mc_se)
            .count();
        rows.push(check("laplace_lower_bound_violations", violations as f64, 0.5, violations == 0));
    }

    // geometric-tail constant on the textbook two-point configuration
    {
        let window = params.centered_window()?;
        let base = crate::spatial::PointSet {
            points: vec![crate::spatial::Point::new(0.6, 0.0)],
            intensity: params.intensity,
            window,
            tagged_index: None,
        };
        let ps = crate::spatial::palm_condition(&base, crate::spatial::Point::new(0.0, 0.0))?;
        let j = analysis::j_bound(&ps, crate::spatial::Point::new(0.6, 0.0), params)?;
        let inputs = analysis::BoundInputs::from_params(params);
        let expected = (1.0 - params.epsilon)
            * params.epsilon
            * (-params.mu * params.beta * params.noise / inputs.c).exp();
        let err = (j - expected).abs();
        rows.push(check("j_bound_two_point_example", err, 1e-12, err < 1e-12));
    }

    // Chernoff rate machinery
    {
        let xi = analysis::expected_hop_progress(params.intensity, params.cones);
        let z_half = analysis::chernoff_zeta(xi / 2.0, params.intensity, params.cones)?;
        let z_tenth = analysis::chernoff_zeta(xi / 10.0, params.intensity, params.cones)?;
        let inputs = analysis::BoundInputs::from_params(params);
        let g0 = -4.0 * (1.0 - inputs.c1).ln();
        let exists = (1..40).any(|i| {
            analysis::chernoff_zeta(xi * i as f64 / 40.0, params.intensity, params.cones)
                .map(|z| z > g0)
                .unwrap_or(false)
        });
        let ok = z_half >= 0.0 && z_tenth > z_half && exists;
        rows.push(check("chernoff_rate_properties", z_half, 0.0, ok));
    }

    // exit-time smoke run: censoring negligible and mean below the reference bound
    {
        let mut small = *params;
        small.replications = 300;
        let outcomes = run_exit_time_experiment(&small, jobs)?;
        let stats = delay_stats_from(&outcomes)?;
        let bound = analysis::mean_delay_upper_bound(&small)?;
        let ok = stats.censored_fraction < 0.05 && stats.mean < bound;
        rows.push(check("exit_time_mean_below_reference_bound", stats.mean, bound, ok));
    }

    // determinism of replicated runs
    {
        let mut small = *params;
        small.replications = 100;
        let a = run_exit_time_experiment(&small, jobs)?;
        let b = run_exit_time_experiment(&small, 2.max(jobs))?;
        let same = exit_time_csv(&a) == exit_time_csv(&b);
        rows.push(check("determinism_across_worker_counts", if same { 0.0 } else { 1.0 }, 0.5, same));
    }

    Ok(rows)
}

// ---------------------------------------------------------------------------
// sweep

fn grid_points(grid: &BTreeMap<String, Vec<f64>>) -> Result<Vec<Vec<(String, f64)>>> {
    let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (key, values) in grid {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for point in &points {
            for &v in values {
                let mut p = point.clone();
                p.push((key.clone(), v));
                next.push(p);
            }
        }
        points = next;
        if points.len() > SWEEP_CAP {
            return Err(SimError::Config(format!(
                "sweep grid expands to more than {SWEEP_CAP} points"
            )));
        }
    }
    Ok(points)
}

fn run_sweep(config: &ExperimentConfig, summary: &mut ResultSummary) -> Result<()> {
    let points = grid_points(&config.grid)?;
    let tree = RngTree::new(config.params.seed);
    let mut combined = String::from(
        "index,lambda,alpha,beta,gamma,cones,epsilon,mean_T,median_T,censored_fraction,rel_change,hill_top10,v_hat\n",
    );
    for (index, assignment) in points.iter().enumerate() {
        let mut point_params = config.params;
        for (key, value) in assignment {
            let key = if key == "lambda" { "lambda" } else { key };
            apply_param(&mut point_params, key, &value.to_string())?;
        }
        point_params.seed = tree.fingerprint(&[purpose::SWEEP, index as u64]);
        let sub_dir = config.out_dir.join(format!("point_{index:03}"));
        fs::create_dir_all(&sub_dir)?;
        let sub_config = ExperimentConfig {
            kind: config.sweep_kind,
            params: point_params,
            out_dir: sub_dir,
            jobs: config.jobs,
            grid: BTreeMap::new(),
            sweep_kind: config.sweep_kind,
        };
        let sub_summary = run(&sub_config)?;
        let (mean_t, median_t, cens, rel, hill) = sub_summary
            .delay
            .as_ref()
            .map(|d| {
                (
                    d.mean,
                    d.median,
                    d.censored_fraction,
                    d.stabilization_relative_change,
                    d.hill.top10.unwrap_or(f64::NAN),
                )
            })
            .unwrap_or((f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN));
        let v_hat = sub_summary.velocity.as_ref().map(|v| v.v_hat).unwrap_or(f64::NAN);
        let _ = writeln!(
            combined,
            "{index},{},{},{},{},{},{},{mean_t},{median_t},{cens},{rel},{hill},{v_hat}",
            point_params.intensity,
            point_params.alpha,
            point_params.beta,
            point_params.gamma,
            point_params.cones,
            point_params.epsilon,
        );
    }
    write_file(config, "sweep.csv", &combined)?;
    summary.sweep_points = Some(points.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// entry point

/// Runs an experiment end to end, writing artifacts into the output
/// directory. Returns the summary; `exit_code` maps it for the process.
pub fn run(config: &ExperimentConfig) -> Result<ResultSummary> {
    let warnings = config.params.validate()?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    fs::create_dir_all(&config.out_dir)?;

    let mut summary = ResultSummary {
        experiment: config.kind.name(),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.params.seed,
        jobs: config.jobs,
        warnings,
        params: config.params,
        delay: None,
        velocity: None,
        checks: None,
        failed_checks: None,
        reference_bounds: None,
        sweep_points: None,
    };

    match config.kind {
        ExperimentKind::ExitTime | ExperimentKind::AlohaBaseline => {
            run_exit_kind(config, &mut summary)?;
        }
        ExperimentKind::Velocity => {
            run_velocity_kind(config, &mut summary)?;
        }
        ExperimentKind::Validate => {
            let rows = validate_suite(&config.params, config.jobs)?;
            write_file(config, "validation.csv", &validation_csv(&rows))?;
            summary.failed_checks = Some(rows.iter().filter(|r| !r.pass).count());
            summary.checks = Some(rows);
        }
        ExperimentKind::Sweep => {
            run_sweep(config, &mut summary)?;
        }
    }

    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| SimError::Model(format!("summary serialization: {e}")))?;
    write_atomic(&config.out_dir.join("summary.json"), &json)?;
    Ok(summary)
}

/// Process exit code for a finished run: 2 when `validate` found failures,
/// otherwise 0.
pub fn exit_code(summary: &ResultSummary) -> i32 {
    match summary.failed_checks {
        Some(failed) if failed > 0 => 2,
        _ => 0,
    }
}
