//! Ising problems, SK1 instances, energies and low-energy enumeration oracles.
//!
//! Energies use the ordered-pair convention `E(σ) = -Σ_{i≠j} J_ij σ_i σ_j`,
//! i.e. twice the usual sum over unordered pairs.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};

/// Largest size accepted by [`enumerate_brute_force`].
pub const MAX_BRUTE_FORCE_N: usize = 24;

/// Relative tolerance used to decide whether two energies belong to one level.
const LEVEL_TOL: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    n: usize,
    couplings: Vec<(usize, usize, f64)>,
}

/// Symmetric, zero-diagonal coupling matrix given as a list of unordered pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProblemFile", into = "ProblemFile")]
pub struct IsingProblem {
    n: usize,
    couplings: Vec<(usize, usize, f64)>,
    dense: Vec<f64>,
}

impl TryFrom<ProblemFile> for IsingProblem {
    type Error = CimError;
    fn try_from(f: ProblemFile) -> Result<Self> {
        IsingProblem::new(f.n, f.couplings)
    }
}

impl From<IsingProblem> for ProblemFile {
    fn from(p: IsingProblem) -> Self {
        ProblemFile { n: p.n, couplings: p.couplings }
    }
}

impl IsingProblem {
    /// Validates `0 ≤ i < j < n`, finiteness and uniqueness of every pair.
    pub fn new(n: usize, couplings: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(CimError::InvalidProblem("n must be >= 1".into()));
        }
        let mut dense = vec![0.0; n * n];
        let mut seen = HashSet::with_capacity(couplings.len());
        for &(i, j, w) in &couplings {
            if i >= j || j >= n {
                return Err(CimError::InvalidProblem(format!("pair ({i}, {j}) must satisfy i < j < {n}")));
            }
            if !w.is_finite() {
                return Err(CimError::InvalidProblem(format!("coupling ({i}, {j}) is not finite")));
            }
            if !seen.insert((i, j)) {
                return Err(CimError::InvalidProblem(format!("duplicate pair ({i}, {j})")));
            }
            dense[i * n + j] = w;
            dense[j * n + i] = w;
        }
        Ok(Self { n, couplings, dense })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serializes")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> &[(usize, usize, f64)] {
        &self.couplings
    }

    /// `J_ij` (zero on the diagonal and for absent pairs).
    #[inline]
    pub fn j(&self, i: usize, k: usize) -> f64 {
        self.dense[i * self.n + k]
    }

    /// Row `i` of the dense coupling matrix.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.dense[i * self.n..(i + 1) * self.n]
    }

    /// `Σ_{i≠j} |J_ij|` over ordered pairs.
    pub fn coupling_abs_sum(&self) -> f64 {
        2.0 * self.couplings.iter().map(|c| c.2.abs()).sum::<f64>()
    }

    /// Root-mean-square coupling over the unordered pairs, 0 for `n = 1`.
    pub fn rms_coupling(&self) -> f64 {
        let pairs = self.n * (self.n - 1) / 2;
        if pairs == 0 {
            return 0.0;
        }
        (self.couplings.iter().map(|c| c.2 * c.2).sum::<f64>() / pairs as f64).sqrt()
    }

    /// `h_i = Σ_j J_ij σ_j` for all `i`.
    pub fn local_fields(&self, spins: &[i8]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(spins).map(|(w, &s)| w * s as f64).sum())
            .collect()
    }
}

/// A configuration of `±1` spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpinConfiguration {
    spins: Vec<i8>,
}

impl SpinConfiguration {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if spins.iter().any(|&s| s != 1 && s != -1) {
            return Err(CimError::Domain("spins must be +1 or -1".into()));
        }
        Ok(Self { spins })
    }

    /// Signs of `values`; an exact zero maps to `+1`.
    pub fn from_signs(values: &[f64]) -> Self {
        Self { spins: values.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect() }
    }

    /// Spin `i` is `-1` iff bit `i` of `bits` is set.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        Self { spins: (0..n).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect() }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn flipped(&self) -> Self {
        Self { spins: self.spins.iter().map(|s| -s).collect() }
    }

    /// Representative of the `±` pair with first spin `+1`.
    pub fn canonical(&self) -> Self {
        if self.spins.first() == Some(&-1) {
            self.flipped()
        } else {
            self.clone()
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.spins.first() != Some(&-1)
    }
}

impl fmt::Display for SpinConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.spins {
            f.write_str(if s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for SpinConfiguration {
    type Err = CimError;
    fn from_str(s: &str) -> Result<Self> {
        let spins = s
            .chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' | '−' => Ok(-1),
                other => Err(CimError::Domain(format!("invalid spin character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(Self { spins })
    }
}

impl Serialize for SpinConfiguration {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpinConfiguration {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `-Σ_{i≠j} J_ij σ_i σ_j`.
pub fn energy(p: &IsingProblem, s: &SpinConfiguration) -> Result<f64> {
    if s.len() != p.n {
        return Err(CimError::SizeMismatch { expected: p.n, got: s.len() });
    }
    Ok(energy_unchecked(p, &s.spins))
}

fn energy_unchecked(p: &IsingProblem, spins: &[i8]) -> f64 {
    -2.0 * p.couplings.iter().map(|&(i, j, w)| w * (spins[i] * spins[j]) as f64).sum::<f64>()
}

/// SK1 instance: every unordered pair gets `±1` with equal probability.
pub fn generate_sk1(n: usize, seed: u64) -> Result<IsingProblem> {
    if n < 2 {
        return Err(CimError::Domain(format!("SK1 instances need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut couplings = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            couplings.push((i, j, if rng.random::<bool>() { 1.0 } else { -1.0 }));
        }
    }
    IsingProblem::new(n, couplings)
}

/// One energy level and its canonical configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub energy: f64,
    pub configs: Vec<SpinConfiguration>,
}

/// The lowest energy levels of a problem, ground state first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LevelSet {
    pub levels: Vec<Level>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelSetFile {
    energies: Vec<f64>,
    levels: Vec<Level>,
}

impl Serialize for LevelSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LevelSetFile { energies: self.energies(), levels: self.levels.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LevelSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = LevelSetFile::deserialize(d)?;
        let set = LevelSet { levels: f.levels };
        if set.energies() != f.energies {
            return Err(serde::de::Error::custom("`energies` disagrees with `levels`"));
        }
        if set.levels.windows(2).any(|w| w[0].energy >= w[1].energy) {
            return Err(serde::de::Error::custom("level energies must be strictly increasing"));
        }
        Ok(set)
    }
}

impl LevelSet {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    /// All canonical configurations across levels, ground level first.
    pub fn configs(&self) -> Vec<SpinConfiguration> {
        self.levels.iter().flat_map(|l| l.configs.iter().cloned()).collect()
    }

    /// Number of canonical configurations across all levels.
    pub fn n_conf(&self) -> usize {
        self.levels.iter().map(|l| l.configs.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.n_conf() == 0
    }

    /// Keeps only the lowest `levels` levels.
    pub fn truncated(&self, levels: usize) -> Self {
        Self { levels: self.levels.iter().take(levels).cloned().collect() }
    }

    /// Checks every configuration against its level energy.
    pub fn verify(&self, p: &IsingProblem) -> Result<()> {
        for level in &self.levels {
            for c in &level.configs {
                let e = energy(p, c)?;
                if !same_level(e, level.energy) {
                    return Err(CimError::InvalidProblem(format!(
                        "config {c} has energy {e}, listed at {}",
                        level.energy
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("level set serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn same_level(a: f64, b: f64) -> bool {
    (a - b).abs() <= LEVEL_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Accumulates the lowest `max_levels` distinct energies and their canonical configurations.
struct LevelCollector {
    max_levels: usize,
    levels: Vec<(f64, Vec<u64>)>,
}

impl LevelCollector {
    fn new(max_levels: usize) -> Self {
        Self { max_levels, levels: Vec::with_capacity(max_levels + 1) }
    }

    /// Energies above this cannot enter the collection.
    #[inline]
    fn cutoff(&self) -> f64 {
        if self.levels.len() < self.max_levels {
            f64::INFINITY
        } else {
            self.levels.last().map_or(f64::INFINITY, |l| l.0)
        }
    }

    /// Inserts a canonical configuration; returns false if it was already present.
    fn offer(&mut self, e: f64, bits: u64) -> bool {
        let cutoff = self.cutoff();
        if e > cutoff && !same_level(e, cutoff) {
            return false;
        }
        match self.levels.iter().position(|l| same_level(l.0, e) || l.0 > e) {
            Some(k) if same_level(self.levels[k].0, e) => {
                let configs = &mut self.levels[k].1;
                if configs.contains(&bits) {
                    return false;
                }
                configs.push(bits);
            }
            Some(k) => self.levels.insert(k, (e, vec![bits])),
            None => self.levels.push((e, vec![bits])),
        }
        self.levels.truncate(self.max_levels);
        true
    }

    fn contains(&self, e: f64, bits: u64) -> bool {
        self.levels.iter().any(|l| same_level(l.0, e) && l.1.contains(&bits))
    }

    fn finish(self, p: &IsingProblem) -> LevelSet {
        let levels = self
            .levels
            .into_iter()
            .map(|(_, bits)| {
                let mut configs: Vec<SpinConfiguration> =
                    bits.iter().map(|&b| SpinConfiguration::from_bits(b, p.n)).collect();
                configs.sort();
                // report the exactly recomputed energy rather than the running sum
                let energy = energy_unchecked(p, configs[0].spins());
                Level { energy, configs }
            })
            .collect();
        LevelSet { levels }
    }
}

/// Exact lowest `levels` energy levels by Gray-code enumeration of the `2^(n-1)`
/// canonical configurations.
pub fn enumerate_brute_force(p: &IsingProblem, levels: usize) -> Result<LevelSet> {
    let n = p.n;
    if n > MAX_BRUTE_FORCE_N {
        return Err(CimError::Budget { n, max: MAX_BRUTE_FORCE_N });
    }
    if levels == 0 {
        return Ok(LevelSet::default());
    }
    let mut spins = vec![1i8; n];
    let mut fields = p.local_fields(&spins);
    let mut e = energy_unchecked(p, &spins);
    let mut bits = 0u64;
    let mut collector = LevelCollector::new(levels);
    collector.offer(e, 0);
    let total: u64 = 1 << (n - 1);
    for step in 1..total {
        // flip spin 1 + (index of lowest set bit), never spin 0
        let k = 1 + step.trailing_zeros() as usize;
        let s = spins[k] as f64;
        e += 4.0 * s * fields[k];
        let row = p.row(k);
        for (f, w) in fields.iter_mut().zip(row) {
            *f -= 2.0 * s * w;
        }
        spins[k] = -spins[k];
        bits ^= 1 << k;
        collector.offer(e, bits);
    }
    Ok(collector.finish(p))
}

/// Fraction of all `2^n` configurations whose energy is `<= e`.
pub fn spectrum_fraction_below(p: &IsingProblem, e: f64) -> Result<f64> {
    let n = p.n;
    if n > MAX_BRUTE_FORCE_N {
        return Err(CimError::Budget { n, max: MAX_BRUTE_FORCE_N });
    }
    let mut spins = vec![1i8; n];
    let mut fields = p.local_fields(&spins);
    let mut cur = energy_unchecked(p, &spins);
    let tol = LEVEL_TOL * e.abs().max(1.0);
    let mut count = (cur <= e + tol) as u64;
    let total: u64 = 1 << (n - 1);
    for step in 1..total {
        let k = 1 + step.trailing_zeros() as usize;
        let s = spins[k] as f64;
        cur += 4.0 * s * fields[k];
        for (f, w) in fields.iter_mut().zip(p.row(k)) {
            *f -= 2.0 * s * w;
        }
        spins[k] = -spins[k];
        count += (cur <= e + tol) as u64;
    }
    Ok(count as f64 / total as f64)
}

/// Settings for [`enumerate_parallel_tempering`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperingOptions {
    pub replicas: usize,
    pub sweeps: usize,
    /// Lowest and highest temperature before scaling by `rms(J)·√n`.
    pub t_min: f64,
    pub t_max: f64,
    pub seed: u64,
}

impl Default for TemperingOptions {
    fn default() -> Self {
        Self { replicas: 32, sweeps: 100_000, t_min: 0.3, t_max: 3.0, seed: 0 }
    }
}

/// Heuristic level set by replica-exchange Metropolis.
///
/// Every configuration ever visited at or below the running cutoff is collected,
/// so the result is a subset of the exact level set for the levels it reports.
/// Temperatures act on `-Σ_{i<j} J_ij σ_i σ_j` with the ladder scaled by
/// `rms(J)·√n`, which keeps acceptance rates roughly size independent.
pub fn enumerate_parallel_tempering(p: &IsingProblem, levels: usize, opts: &TemperingOptions) -> Result<LevelSet> {
    let n = p.n;
    if n < 2 {
        return Err(CimError::Domain(format!("parallel tempering needs n >= 2, got {n}")));
    }
    if n > 64 {
        return Err(CimError::Budget { n, max: 64 });
    }
    if opts.replicas == 0 || !(opts.t_min > 0.0 && opts.t_max >= opts.t_min) {
        return Err(CimError::Domain("tempering needs >= 1 replica and 0 < t_min <= t_max".into()));
    }
    if levels == 0 {
        return Ok(LevelSet::default());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = p.rms_coupling().max(f64::MIN_POSITIVE) * (n as f64).sqrt();
    let r = opts.replicas;
    let betas: Vec<f64> = (0..r)
        .map(|k| {
            let frac = if r == 1 { 0.0 } else { k as f64 / (r - 1) as f64 };
            1.0 / (scale * opts.t_min * (opts.t_max / opts.t_min).powf(frac))
        })
        .collect();

    struct Replica {
        spins: Vec<i8>,
        fields: Vec<f64>,
        energy: f64,
        bits: u64,
    }
    let mut reps: Vec<Replica> = (0..r)
        .map(|_| {
            let spins: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let fields = p.local_fields(&spins);
            let energy = energy_unchecked(p, &spins);
            let bits = spins.iter().enumerate().fold(0u64, |b, (i, &s)| b | (((s < 0) as u64) << i));
            Replica { spins, fields, energy, bits }
        })
        .collect();
    // replica at ladder slot k; exchanges permute this map instead of the states
    let mut slot: Vec<usize> = (0..r).collect();

    let mut collector = LevelCollector::new(levels);
    let canonical_bits = |bits: u64| if bits & 1 == 1 { !bits & mask(n) } else { bits };
    let record = |collector: &mut LevelCollector, e: f64, bits: u64| {
        let c = canonical_bits(bits);
        if e <= collector.cutoff() + LEVEL_TOL * e.abs().max(1.0) && !collector.contains(e, c) {
            let exact = energy_unchecked(p, SpinConfiguration::from_bits(c, n).spins());
            collector.offer(exact, c);
        }
    };
    for rep in &reps {
        record(&mut collector, rep.energy, rep.bits);
    }

    for sweep in 0..opts.sweeps {
        for (k, &beta) in betas.iter().enumerate() {
            let rep = &mut reps[slot[k]];
            for i in 0..n {
                let s = rep.spins[i] as f64;
                let de = 4.0 * s * rep.fields[i];
                // the ladder acts on the unordered-pair energy, half of `de`
                if de <= 0.0 || rng.random::<f64>() < (-0.5 * beta * de).exp() {
                    rep.energy += de;
                    for (f, w) in rep.fields.iter_mut().zip(p.row(i)) {
                        *f -= 2.0 * s * w;
                    }
                    rep.spins[i] = -rep.spins[i];
                    rep.bits ^= 1 << i;
                    if rep.energy <= collector.cutoff() + LEVEL_TOL * rep.energy.abs().max(1.0) {
                        let (e, b) = (rep.energy, rep.bits);
                        record(&mut collector, e, b);
                    }
                }
            }
        }
        let start = sweep % 2;
        let mut k = start;
        while k + 1 < r {
            let (a, b) = (slot[k], slot[k + 1]);
            let delta = 0.5 * (betas[k] - betas[k + 1]) * (reps[a].energy - reps[b].energy);
            if delta >= 0.0 || rng.random::<f64>() < delta.exp() {
                slot.swap(k, k + 1);
            }
            k += 2;
        }
    }
    Ok(collector.finish(p))
}

#[inline]
fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ferro(n: usize) -> IsingProblem {
        let mut c = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                c.push((i, j, 1.0));
            }
        }
        IsingProblem::new(n, c).unwrap()
    }

    fn cfg(s: &str) -> SpinConfiguration {
        s.parse().unwrap()
    }

    #[test]
    fn problem_validation() {
        assert!(IsingProblem::new(3, vec![(1, 0, 1.0)]).is_err());
        assert!(IsingProblem::new(3, vec![(0, 3, 1.0)]).is_err());
        assert!(IsingProblem::new(3, vec![(0, 1, 1.0), (0, 1, -1.0)]).is_err());
        assert!(IsingProblem::new(3, vec![(0, 1, f64::NAN)]).is_err());
        assert!(IsingProblem::from_json(r#"{"n": 2, "couplings": [[0, 1, -1]], "x": 1}"#).is_err());
        let p = IsingProblem::from_json(r#"{"n": 2, "couplings": [[0, 1, -1]]}"#).unwrap();
        assert_eq!(p.j(1, 0), -1.0);
        assert_eq!(IsingProblem::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn ferromagnet_energies() {
        let p = ferro(3);
        assert_eq!(energy(&p, &cfg("+++")).unwrap(), -6.0);
        assert_eq!(energy(&p, &cfg("++-")).unwrap(), 2.0);
        assert!(energy(&p, &cfg("++")).is_err());
    }

    #[test]
    fn energy_matches_ordered_pair_loop() {
        let p = generate_sk1(10, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let s: Vec<i8> = (0..10).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
            let mut oracle = 0.0;
            for i in 0..10 {
                for j in 0..10 {
                    if i != j {
                        oracle -= p.j(i, j) * (s[i] * s[j]) as f64;
                    }
                }
            }
            let c = SpinConfiguration::new(s).unwrap();
            assert_eq!(energy(&p, &c).unwrap(), oracle);
            assert_eq!(energy(&p, &c.flipped()).unwrap(), oracle);
        }
    }

    #[test]
    fn sk1_generation() {
        let p = generate_sk1(2, 11).unwrap();
        assert_eq!(p.couplings().len(), 1);
        assert!(p.couplings()[0].2.abs() == 1.0);
        assert_eq!(generate_sk1(16, 7).unwrap(), generate_sk1(16, 7).unwrap());
        assert_ne!(generate_sk1(16, 7).unwrap(), generate_sk1(16, 8).unwrap());
        assert!(generate_sk1(1, 0).is_err());
    }

    #[test]
    fn sk1_pair_frequency() {
        let pairs = 30 * 29 / 2;
        let mut plus = 0usize;
        let seeds = 10_000u64;
        for seed in 0..seeds {
            plus += generate_sk1(30, seed).unwrap().couplings().iter().filter(|c| c.2 > 0.0).count();
        }
        let f = plus as f64 / (pairs as u64 * seeds) as f64;
        assert!((0.49..=0.51).contains(&f), "frequency {f}");
    }

    #[test]
    fn brute_force_small_cases() {
        let set = enumerate_brute_force(&ferro(3), 2).unwrap();
        assert_eq!(set.energies(), vec![-6.0, 2.0]);
        assert_eq!(set.levels[0].configs, vec![cfg("+++")]);
        assert_eq!(set.levels[1].configs.len(), 3);
        let set = enumerate_brute_force(&ferro(2), 2).unwrap();
        assert_eq!(set.energies(), vec![-2.0, 2.0]);
        assert_eq!(set.levels[1].configs, vec![cfg("+-")]);
        assert!(matches!(enumerate_brute_force(&ferro(25), 1), Err(CimError::Budget { .. })));
    }

    #[test]
    fn brute_force_matches_naive_enumeration() {
        for seed in 0..5 {
            let p = generate_sk1(9, seed).unwrap();
            let set = enumerate_brute_force(&p, 3).unwrap();
            set.verify(&p).unwrap();
            let mut all: Vec<(f64, SpinConfiguration)> = (0..1u64 << 9)
                .map(|b| SpinConfiguration::from_bits(b, 9))
                .filter(|c| c.is_canonical())
                .map(|c| (energy(&p, &c).unwrap(), c))
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut distinct: Vec<f64> = all.iter().map(|x| x.0).collect();
            distinct.dedup();
            assert_eq!(set.energies(), distinct[..3].to_vec());
            for level in &set.levels {
                let mut expect: Vec<_> = all.iter().filter(|x| x.0 == level.energy).map(|x| x.1.clone()).collect();
                expect.sort();
                assert_eq!(level.configs, expect);
            }
        }
    }

    #[test]
    fn level_set_json_round_trip() {
        let set = enumerate_brute_force(&ferro(3), 2).unwrap();
        let json = set.to_json();
        assert!(json.contains("\"+++\""));
        assert_eq!(LevelSet::from_json(&json).unwrap(), set);
        assert!(LevelSet::from_json(r#"{"energies": [1.0], "levels": []}"#).is_err());
    }

    #[test]
    fn spectrum_fraction() {
        let p = ferro(3);
        assert_eq!(spectrum_fraction_below(&p, -6.0).unwrap(), 0.25);
        assert_eq!(spectrum_fraction_below(&p, 2.0).unwrap(), 1.0);
        assert_eq!(spectrum_fraction_below(&p, -7.0).unwrap(), 0.0);
    }

    #[test]
    fn tempering_agrees_with_brute_force() {
        let opts = TemperingOptions { sweeps: 20_000, ..Default::default() };
        assert_eq!(
            enumerate_parallel_tempering(&ferro(2), 2, &opts).unwrap(),
            enumerate_brute_force(&ferro(2), 2).unwrap()
        );
        for seed in 0..5 {
            let p = generate_sk1(14, 100 + seed).unwrap();
            let pt = enumerate_parallel_tempering(&p, 2, &TemperingOptions { seed, ..opts }).unwrap();
            pt.verify(&p).unwrap();
            assert_eq!(pt, enumerate_brute_force(&p, 2).unwrap(), "instance {seed}");
        }
    }
}
