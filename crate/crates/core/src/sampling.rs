//! Trajectory ensembles and sampling metrics.
//!
//! Roundtrip indices are 1-based: the record produced by the first roundtrip
//! has `k = 1`. A first-sampling time of `None` means the target never
//! appeared (the `∞` of the harmonic aggregation).

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};
use crate::ising::{self, enumerate_brute_force, enumerate_parallel_tempering, IsingProblem, LevelSet, SpinConfiguration, TemperingOptions};
use crate::machine::{derive_params, linear_threshold, Machine, StepStatus, UserParams};
use crate::noise::StreamNoise;

/// Sign patterns are packed into one machine word, so metrics need `n <= 64`.
pub const MAX_TRACKED_N: usize = 64;

/// Trajectories per scheduling chunk in [`run_until_covered`].
const CHUNK: usize = 64;

/// Per-roundtrip sign records of one trajectory, plus optional raw moments.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub n: usize,
    /// Bit `i` of entry `k - 1` is set iff `w_i(k) < 0`.
    pub signs: Vec<u64>,
    /// Row-major `[roundtrip][pulse]` homodyne values when requested.
    pub w: Option<Vec<f64>>,
    pub q_mean: Option<Vec<f64>>,
    pub q_var: Option<Vec<f64>>,
    /// Energy of each recorded sign configuration when requested.
    pub energies: Option<Vec<f64>>,
    /// Parameters after per-trajectory jitter.
    pub params: UserParams,
    /// Set when a no-crystal trajectory stopped early to avoid overflow.
    pub overflowed: bool,
}

impl TrajectoryRecord {
    pub fn roundtrips(&self) -> usize {
        self.signs.len()
    }

    pub fn config_at(&self, k: usize) -> SpinConfiguration {
        SpinConfiguration::from_bits(self.signs[k - 1], self.n)
    }
}

/// What to keep while running a trajectory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordOptions {
    pub raw: bool,
    pub energies: bool,
}

#[inline]
fn sign_bits(w: &[f64]) -> u64 {
    w.iter().enumerate().fold(0u64, |b, (i, &x)| b | (((x < 0.0) as u64) << i))
}

#[inline]
fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[inline]
fn canonical_bits(bits: u64, n: usize) -> u64 {
    if bits & 1 == 1 {
        !bits & mask(n)
    } else {
        bits
    }
}

fn config_bits(c: &SpinConfiguration) -> u64 {
    c.spins().iter().enumerate().fold(0u64, |b, (i, &s)| b | (((s < 0) as u64) << i))
}

/// Runs trajectory `index` of an ensemble for `t_sim` roundtrips.
///
/// Jitter and mean-field initial signs come from the setup stream; the
/// homodyne and feedback noise from the trajectory stream.
pub fn run_trajectory(problem: &IsingProblem, user: &UserParams, seed: u64, index: u64, t_sim: u64, opts: RecordOptions) -> Result<TrajectoryRecord> {
    let n = problem.n();
    if n > MAX_TRACKED_N {
        return Err(CimError::Budget { n, max: MAX_TRACKED_N });
    }
    let mut setup = StreamNoise::setup(seed, index);
    let params = user.jittered(setup.rng());
    let machine = Machine::new(derive_params(&params, problem.coupling_abs_sum())?, problem);
    let mut state = machine.initial_state(setup.rng());
    let mut noise = StreamNoise::trajectory(seed, index);
    let len = t_sim as usize;
    let mut signs = Vec::with_capacity(len);
    let mut raw = opts.raw.then(|| (Vec::with_capacity(len * n), Vec::with_capacity(len * n), Vec::with_capacity(len * n)));
    let mut energies = opts.energies.then(|| Vec::with_capacity(len));
    let mut w = vec![0.0; n];
    let mut overflowed = false;
    for _ in 0..t_sim {
        let status = machine.step(&mut state, &mut noise, &mut w)?;
        if status == StepStatus::Overflow {
            overflowed = true;
            break;
        }
        let bits = sign_bits(&w);
        signs.push(bits);
        if let Some((ws, qs, vs)) = raw.as_mut() {
            ws.extend_from_slice(&w);
            qs.extend(state.q_means());
            vs.extend(state.q_vars());
        }
        if let Some(es) = energies.as_mut() {
            es.push(ising::energy(problem, &SpinConfiguration::from_bits(bits, n))?);
        }
    }
    let (w, q_mean, q_var) = match raw {
        Some((a, b, c)) => (Some(a), Some(b), Some(c)),
        None => (None, None, None),
    };
    Ok(TrajectoryRecord { n, signs, w, q_mean, q_var, energies, params, overflowed })
}

/// Earliest 1-based roundtrip whose signs equal `target` or its global flip.
pub fn first_sampling_time(traj: &TrajectoryRecord, target: &SpinConfiguration) -> Option<u64> {
    if target.len() != traj.n {
        return None;
    }
    let key = canonical_bits(config_bits(target), traj.n);
    traj.signs.iter().position(|&b| canonical_bits(b, traj.n) == key).map(|k| k as u64 + 1)
}

/// Harmonic aggregation `1/T = (1/N) Σ 1/T_ℓ` with `1/∞ = 0`; `∞` if nothing was sampled.
pub fn required_sampling_time(times: &[Option<u64>]) -> f64 {
    if times.is_empty() {
        return f64::INFINITY;
    }
    let inv: f64 = times.iter().flatten().map(|&t| 1.0 / t as f64).sum();
    if inv == 0.0 {
        f64::INFINITY
    } else {
        times.len() as f64 / inv
    }
}

/// Lookup from canonical sign pattern to target index.
#[derive(Debug, Clone)]
pub struct TargetIndex {
    n: usize,
    configs: Vec<SpinConfiguration>,
    levels: Vec<usize>,
    energies: Vec<f64>,
    map: HashMap<u64, usize>,
}

impl TargetIndex {
    pub fn new(targets: &LevelSet, n: usize) -> Result<Self> {
        if targets.is_empty() {
            return Err(CimError::Domain("target level set is empty".into()));
        }
        if n > MAX_TRACKED_N {
            return Err(CimError::Budget { n, max: MAX_TRACKED_N });
        }
        let mut configs = Vec::new();
        let mut levels = Vec::new();
        let mut energies = Vec::new();
        let mut map = HashMap::new();
        for (l, level) in targets.levels.iter().enumerate() {
            for c in &level.configs {
                if c.len() != n {
                    return Err(CimError::SizeMismatch { expected: n, got: c.len() });
                }
                let c = c.canonical();
                if map.insert(config_bits(&c), configs.len()).is_none() {
                    configs.push(c);
                    levels.push(l);
                    energies.push(level.energy);
                }
            }
        }
        Ok(Self { n, configs, levels, energies, map })
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

/// Per-trajectory hits of every target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySummary {
    pub first_times: Vec<Option<u64>>,
    /// Occurrences of `[canonical, flipped]` sign patterns per target.
    pub counts: Vec<[u64; 2]>,
    pub overflowed: bool,
}

pub fn summarize(traj: &TrajectoryRecord, index: &TargetIndex) -> TrajectorySummary {
    let m = index.len();
    let mut first_times = vec![None; m];
    let mut counts = vec![[0u64; 2]; m];
    for (k, &b) in traj.signs.iter().enumerate() {
        let flipped = b & 1 == 1;
        if let Some(&t) = index.map.get(&canonical_bits(b, index.n)) {
            counts[t][flipped as usize] += 1;
            first_times[t].get_or_insert(k as u64 + 1);
        }
    }
    TrajectorySummary { first_times, counts, overflowed: traj.overflowed }
}

/// Ensemble settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_traj: usize,
    pub t_sim: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Never affects results.
    #[serde(skip)]
    pub workers: Option<usize>,
}

fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| CimError::Domain(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// First-sampling-time histogram with bins of `bin_width` roundtrips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u64,
    /// `counts[b]` covers roundtrips `b·bin_width + 1 ..= (b+1)·bin_width`.
    pub counts: Vec<u64>,
    /// Trajectories that never sampled the configuration.
    pub never: u64,
}

impl Histogram {
    fn build(times: &[Option<u64>], bin_width: u64, t_sim: u64) -> Self {
        let bins = t_sim.div_ceil(bin_width).max(1) as usize;
        let mut counts = vec![0u64; bins];
        let mut never = 0;
        for t in times {
            match t {
                Some(k) => counts[(((k - 1) / bin_width) as usize).min(bins - 1)] += 1,
                None => never += 1,
            }
        }
        Self { bin_width, counts, never }
    }

    /// Upper edge (in roundtrips) of the fullest bin, or `None` when empty.
    pub fn peak_roundtrip(&self) -> Option<u64> {
        let (b, &c) = self.counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        (c > 0).then(|| (b as u64 + 1) * self.bin_width)
    }
}

/// Statistics of one target configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigReport {
    pub config: SpinConfiguration,
    pub level: usize,
    pub energy: f64,
    /// Occurrences with either sign, over all trajectories and roundtrips.
    pub count: u64,
    /// Occurrences as listed (`+` first spin) and as its global flip.
    pub count_raw: [u64; 2],
    /// `null` encodes `∞`.
    pub t_samp: Option<f64>,
    pub first_times_histogram: Histogram,
}

/// Ensemble-level metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    /// `null` encodes `∞` for all optional times.
    pub t_all: Option<u64>,
    pub t_any: Option<u64>,
    pub max_t_samp: Option<f64>,
    pub n_traj: usize,
    pub t_sim: u64,
    pub seed: u64,
    pub n_conf: usize,
    pub overflowed_trajectories: usize,
    pub params: UserParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingReport {
    pub configs: Vec<ConfigReport>,
    pub ensemble: EnsembleReport,
}

impl SamplingReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn max_t_samp(&self) -> f64 {
        self.ensemble.max_t_samp.unwrap_or(f64::INFINITY)
    }

    /// Whether every target was sampled at least once.
    pub fn all_covered(&self) -> bool {
        self.configs.iter().all(|c| c.count > 0)
    }
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Index (1-based) of the first trajectory after which `pred(seen)` holds.
fn coverage_index(summaries: &[TrajectorySummary], m: usize, all: bool) -> Option<u64> {
    let mut seen = vec![false; m];
    let mut covered = 0;
    for (l, s) in summaries.iter().enumerate() {
        let mut any = false;
        for (t, ft) in s.first_times.iter().enumerate() {
            if ft.is_some() {
                any = true;
                if !seen[t] {
                    seen[t] = true;
                    covered += 1;
                }
            }
        }
        if (!all && any) || (all && covered == m) {
            return Some(l as u64 + 1);
        }
    }
    None
}

fn build_report(summaries: &[TrajectorySummary], index: &TargetIndex, user: &UserParams, cfg: &EnsembleConfig) -> SamplingReport {
    let m = index.len();
    let bin_width = (user.t_decay.round() as u64).max(1);
    let configs: Vec<ConfigReport> = (0..m)
        .map(|t| {
            let times: Vec<Option<u64>> = summaries.iter().map(|s| s.first_times[t]).collect();
            let count_raw = summaries.iter().fold([0u64; 2], |acc, s| [acc[0] + s.counts[t][0], acc[1] + s.counts[t][1]]);
            ConfigReport {
                config: index.configs[t].clone(),
                level: index.levels[t],
                energy: index.energies[t],
                count: count_raw[0] + count_raw[1],
                count_raw,
                t_samp: finite(required_sampling_time(&times)),
                first_times_histogram: Histogram::build(&times, bin_width, cfg.t_sim),
            }
        })
        .collect();
    let max_t_samp = configs
        .iter()
        .map(|c| c.t_samp.unwrap_or(f64::INFINITY))
        .fold(0.0f64, f64::max);
    let t_all = coverage_index(summaries, m, true).map(|i| i * cfg.t_sim);
    let t_any = coverage_index(summaries, m, false).map(|i| i * cfg.t_sim);
    SamplingReport {
        configs,
        ensemble: EnsembleReport {
            t_all,
            t_any,
            max_t_samp: finite(max_t_samp),
            n_traj: summaries.len(),
            t_sim: cfg.t_sim,
            seed: cfg.seed,
            n_conf: m,
            overflowed_trajectories: summaries.iter().filter(|s| s.overflowed).count(),
            params: *user,
        },
    }
}

/// Runs `n_traj` independent trajectories and aggregates sampling metrics over `targets`.
pub fn run_ensemble(problem: &IsingProblem, user: &UserParams, targets: &LevelSet, cfg: &EnsembleConfig) -> Result<SamplingReport> {
    let index = TargetIndex::new(targets, problem.n())?;
    derive_params(user, problem.coupling_abs_sum())?;
    let summaries = with_workers(cfg.workers, || {
        (0..cfg.n_traj as u64)
            .into_par_iter()
            .map(|l| run_trajectory(problem, user, cfg.seed, l, cfg.t_sim, RecordOptions::default()).map(|r| summarize(&r, &index)))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(build_report(&summaries, &index, user, cfg))
}

/// Runs trajectories in index order until all targets are covered or `max_traj` is reached.
///
/// Trajectories are scheduled in fixed-size chunks, so the result does not
/// depend on the worker count.
pub fn run_until_covered(problem: &IsingProblem, user: &UserParams, targets: &LevelSet, cfg: &EnsembleConfig) -> Result<SamplingReport> {
    let index = TargetIndex::new(targets, problem.n())?;
    derive_params(user, problem.coupling_abs_sum())?;
    let mut summaries: Vec<TrajectorySummary> = Vec::new();
    let mut seen = vec![false; index.len()];
    while summaries.len() < cfg.n_traj {
        let start = summaries.len() as u64;
        let end = (start + CHUNK as u64).min(cfg.n_traj as u64);
        let chunk = with_workers(cfg.workers, || {
            (start..end)
                .into_par_iter()
                .map(|l| run_trajectory(problem, user, cfg.seed, l, cfg.t_sim, RecordOptions::default()).map(|r| summarize(&r, &index)))
                .collect::<Result<Vec<_>>>()
        })??;
        for s in &chunk {
            for (t, ft) in s.first_times.iter().enumerate() {
                seen[t] |= ft.is_some();
            }
        }
        summaries.extend(chunk);
        if seen.iter().all(|&x| x) {
            break;
        }
    }
    Ok(build_report(&summaries, &index, user, cfg))
}

/// One grid point of a parameter scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub alpha_fb: f64,
    pub pump_r: f64,
    /// `null` encodes `∞`.
    pub max_t_samp: Option<f64>,
    pub lambda_max: f64,
    pub above_threshold: bool,
    pub all_covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub points: Vec<ScanPoint>,
    pub n_traj: usize,
    pub t_sim: u64,
    pub seed: u64,
    pub base: UserParams,
}

/// Max-over-targets `T_samp` on every `(alpha_fb, pump_r)` grid point, with the linear threshold.
pub fn parameter_scan(problem: &IsingProblem, alphas: &[f64], rs: &[f64], base: &UserParams, targets: &LevelSet, cfg: &EnsembleConfig) -> Result<ScanReport> {
    if alphas.is_empty() || rs.is_empty() {
        return Err(CimError::Domain("scan grid is empty".into()));
    }
    let mut points = Vec::with_capacity(alphas.len() * rs.len());
    for &pump_r in rs {
        for &alpha_fb in alphas {
            let u = UserParams { alpha_fb, pump_r, ..*base };
            let report = run_ensemble(problem, &u, targets, cfg)?;
            let th = linear_threshold(&derive_params(&u, problem.coupling_abs_sum())?, problem);
            points.push(ScanPoint {
                alpha_fb,
                pump_r,
                max_t_samp: report.ensemble.max_t_samp,
                lambda_max: th.lambda_max,
                above_threshold: th.above,
                all_covered: report.all_covered(),
            });
        }
    }
    Ok(ScanReport { points, n_traj: cfg.n_traj, t_sim: cfg.t_sim, seed: cfg.seed, base: *base })
}

/// Least-squares fit `ln y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub intercept: f64,
    pub slope: f64,
    /// `e^slope`: the growth factor per unit of `x`.
    pub base: f64,
}

/// Fits `ln y` against `x`; needs at least two points with distinct `x` and positive finite `y`.
pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0 && y.is_finite())
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(ExpFit { intercept: my - slope * mx, slope, base: slope.exp() })
}

/// Median treating `None` as `+∞`; `None` when the median itself is infinite.
pub fn median(values: &[Option<f64>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().map(|x| x.unwrap_or(f64::INFINITY)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = v.len();
    let m = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
    finite(m)
}

/// Wall-clock time of `roundtrips` roundtrips of `n` pulses at repetition rate `f_rep` (Hz).
pub fn wall_clock_seconds(roundtrips: f64, n: usize, f_rep: f64) -> f64 {
    roundtrips * n as f64 / f_rep
}

/// Settings for [`scaling_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingConfig {
    pub sizes: Vec<usize>,
    pub instances: usize,
    /// Roundtrips per trajectory; defaults to `50·T_decay` when `None`.
    pub t_sim: Option<u64>,
    /// Cap on trajectories per instance.
    pub max_traj: usize,
    pub seed: u64,
    #[serde(skip)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub n: usize,
    pub instance_seed: u64,
    pub n_conf: usize,
    pub t_all: Option<u64>,
    pub t_any: Option<u64>,
    /// `T_all` divided by the median `T_all` of its size.
    pub t_all_normalized: Option<f64>,
    pub oracle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub median_t_all: Option<f64>,
    pub median_t_any: Option<f64>,
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub instances: Vec<InstanceResult>,
    pub sizes: Vec<SizeSummary>,
    pub fit_t_all: Option<ExpFit>,
    pub fit_t_any: Option<ExpFit>,
    /// Power-law exponent of `T̃_all` against `N_conf` over all instances.
    pub normalized_vs_nconf_exponent: Option<f64>,
    pub t_sim: u64,
    pub params: UserParams,
    pub config: ScalingConfig,
}

/// Instance seed for instance `k` of size `n`.
pub fn instance_seed(master: u64, n: usize, k: usize) -> u64 {
    master.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((n as u64) << 32) ^ k as u64
}

/// Ground and first-excited levels from brute force when affordable, else tempering.
pub fn oracle_levels(problem: &IsingProblem, seed: u64) -> Result<(LevelSet, &'static str)> {
    if problem.n() <= ising::MAX_BRUTE_FORCE_N {
        Ok((enumerate_brute_force(problem, 2)?, "brute"))
    } else {
        let opts = TemperingOptions { seed, ..Default::default() };
        Ok((enumerate_parallel_tempering(problem, 2, &opts)?, "pt"))
    }
}

/// Median `T_all`/`T_any` versus `N` over random SK1 instances with exponential fits.
pub fn scaling_study(user: &UserParams, cfg: &ScalingConfig) -> Result<ScalingReport> {
    if cfg.sizes.len() < 3 {
        return Err(CimError::Domain("scaling study needs at least 3 sizes".into()));
    }
    let t_sim = cfg.t_sim.unwrap_or_else(|| (50.0 * user.t_decay).round().max(1.0) as u64);
    let mut instances = Vec::new();
    let mut sizes = Vec::new();
    for &n in &cfg.sizes {
        let mut skipped = Vec::new();
        let mut rows = Vec::new();
        for k in 0..cfg.instances {
            let iseed = instance_seed(cfg.seed, n, k);
            let problem = ising::generate_sk1(n, iseed)?;
            let (targets, oracle) = match oracle_levels(&problem, iseed) {
                Ok(x) => x,
                Err(e) => {
                    skipped.push(format!("instance {k}: {e}"));
                    continue;
                }
            };
            if targets.is_empty() {
                skipped.push(format!("instance {k}: oracle returned no levels"));
                continue;
            }
            let ecfg = EnsembleConfig { n_traj: cfg.max_traj, t_sim, seed: iseed, workers: cfg.workers };
            let report = run_until_covered(&problem, user, &targets, &ecfg)?;
            rows.push(InstanceResult {
                n,
                instance_seed: iseed,
                n_conf: targets.n_conf(),
                t_all: report.ensemble.t_all,
                t_any: report.ensemble.t_any,
                t_all_normalized: None,
                oracle: oracle.to_string(),
            });
        }
        let med_all = median(&rows.iter().map(|r| r.t_all.map(|t| t as f64)).collect::<Vec<_>>());
        let med_any = median(&rows.iter().map(|r| r.t_any.map(|t| t as f64)).collect::<Vec<_>>());
        if let Some(m) = med_all {
            for r in &mut rows {
                r.t_all_normalized = r.t_all.map(|t| t as f64 / m);
            }
        }
        sizes.push(SizeSummary { n, median_t_all: med_all, median_t_any: med_any, skipped });
        instances.extend(rows);
    }
    let xs: Vec<f64> = sizes.iter().map(|s| s.n as f64).collect();
    let fit = |f: fn(&SizeSummary) -> Option<f64>| {
        let ys: Vec<f64> = sizes.iter().map(|s| f(s).unwrap_or(f64::INFINITY)).collect();
        fit_exponential(&xs, &ys)
    };
    let fit_t_all = fit(|s| s.median_t_all);
    let fit_t_any = fit(|s| s.median_t_any);
    let (lx, ly): (Vec<f64>, Vec<f64>) = instances
        .iter()
        .filter_map(|r| r.t_all_normalized.map(|t| ((r.n_conf as f64).ln(), t)))
        .unzip();
    let normalized_vs_nconf_exponent = fit_exponential(&lx, &ly).map(|f| f.slope);
    Ok(ScalingReport {
        instances,
        sizes,
        fit_t_all,
        fit_t_any,
        normalized_vs_nconf_exponent,
        t_sim,
        params: *user,
        config: cfg.clone(),
    })
}

/// Writes trajectories as CSV with columns `trajectory,roundtrip,pulse,w,q_mean,q_var`.
pub fn write_trajectory_csv<W: Write>(out: &mut W, records: &[(u64, &TrajectoryRecord)]) -> Result<()> {
    writeln!(out, "trajectory,roundtrip,pulse,w,q_mean,q_var")?;
    for &(l, rec) in records {
        let (Some(w), Some(q), Some(v)) = (&rec.w, &rec.q_mean, &rec.q_var) else {
            return Err(CimError::Domain("trajectory was recorded without raw values".into()));
        };
        for k in 0..rec.roundtrips() {
            for i in 0..rec.n {
                let at = k * rec.n + i;
                writeln!(out, "{l},{},{i},{},{},{}", k + 1, w[at], q[at], v[at])?;
            }
        }
    }
    Ok(())
}
