//! Request generation from group-correlated Zipf preferences.
//!
//! Users are split into groups. Each group draws a random ranking of the
//! catalog and each member perturbs it with a few adjacent swaps, so users in
//! one group like similar, but not identical, files. Every cycle each user
//! requests one file: a Zipf-distributed rank mapped through the user's
//! ranking. With drift enabled, rankings and the exponent are redrawn every
//! `period` cycles.

use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::rng::{self, SimRng, Stream};
use crate::{Error, FileId, Result, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZipfParams {
    /// Skew `beta >= 0`.
    pub exponent: f64,
    /// Number of files `M >= 1`.
    pub catalog_size: usize,
}

/// Probability of the file at 1-based rank `k`.
pub fn zipf_pmf(k: usize, params: ZipfParams) -> Result<f64> {
    if k == 0 || k > params.catalog_size {
        return Err(Error::contract(format!(
            "rank {k} outside 1..={}",
            params.catalog_size
        )));
    }
    let norm: f64 = (1..=params.catalog_size)
        .map(|m| (m as f64).powf(-params.exponent))
        .sum();
    Ok((k as f64).powf(-params.exponent) / norm)
}

/// The whole pmf, indexed by 0-based rank.
pub fn zipf_table(params: ZipfParams) -> Vec<f64> {
    let weights: Vec<f64> = (1..=params.catalog_size)
        .map(|m| (m as f64).powf(-params.exponent))
        .collect();
    let norm: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / norm).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreferenceProfile {
    pub user: UserId,
    pub group: usize,
    /// `rank[k]` is the file at 0-based rank `k`; a permutation of the catalog.
    pub rank: Vec<FileId>,
}

/// Default number of adjacent swaps separating a user from its group: 5% of
/// the catalog, rounded up.
pub fn default_perturbation(catalog_size: usize) -> usize {
    (catalog_size * 5).div_ceil(100)
}

/// Uniform group assignment, independent of where users are.
pub fn assign_groups<R: Rng + ?Sized>(rng: &mut R, n_users: usize, n_groups: usize) -> Vec<usize> {
    (0..n_users)
        .map(|_| rng.random_range(0..n_groups))
        .collect()
}

/// Draws one base ranking per group and perturbs it per user with
/// `perturbation` random adjacent transpositions.
pub fn draw_profiles<R: Rng + ?Sized>(
    rng: &mut R,
    groups: &[usize],
    n_groups: usize,
    catalog_size: usize,
    perturbation: usize,
) -> (Vec<Vec<FileId>>, Vec<PreferenceProfile>) {
    let bases: Vec<Vec<FileId>> = (0..n_groups)
        .map(|_| {
            let mut perm: Vec<FileId> = (0..catalog_size).collect();
            perm.shuffle(rng);
            perm
        })
        .collect();
    let profiles = groups
        .iter()
        .enumerate()
        .map(|(user, &group)| {
            let mut rank = bases[group].clone();
            if catalog_size > 1 {
                for _ in 0..perturbation {
                    let i = rng.random_range(0..catalog_size - 1);
                    rank.swap(i, i + 1);
                }
            }
            PreferenceProfile { user, group, rank }
        })
        .collect();
    (bases, profiles)
}

/// Groups plus per-user profiles in one go.
pub fn build_profiles(
    seed: u64,
    n_users: usize,
    n_groups: usize,
    catalog_size: usize,
    perturbation: usize,
) -> Result<Vec<PreferenceProfile>> {
    if n_groups == 0 || catalog_size == 0 {
        return Err(Error::config("need at least one group and one file"));
    }
    let mut rng = rng::stream(seed, Stream::Profiles);
    let groups = assign_groups(&mut rng, n_users, n_groups);
    Ok(draw_profiles(&mut rng, &groups, n_groups, catalog_size, perturbation).1)
}

/// Rank sampler for one exponent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankSampler {
    index: WeightedIndex<f64>,
}

impl RankSampler {
    pub fn new(params: ZipfParams) -> Result<Self> {
        if !(params.exponent >= 0.0) || params.catalog_size == 0 {
            return Err(Error::config("Zipf needs beta >= 0 and M >= 1"));
        }
        let index = WeightedIndex::new(zipf_table(params))
            .map_err(|e| Error::config(format!("zipf table: {e}")))?;
        Ok(RankSampler { index })
    }

    /// 0-based rank.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// One request: draw a rank, map it through the user's ranking.
pub fn sample_request<R: Rng + ?Sized>(
    profile: &PreferenceProfile,
    sampler: &RankSampler,
    rng: &mut R,
) -> FileId {
    profile.rank[sampler.sample(rng)]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub enabled: bool,
    /// Cycles between popularity changes.
    pub period: u64,
    /// Exponent range for redrawn epochs.
    pub beta_min: f64,
    pub beta_max: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        DriftConfig {
            enabled: false,
            period: 10_000,
            beta_min: 1.1,
            beta_max: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadConfig {
    pub catalog_size: usize,
    pub beta: f64,
    pub n_groups: usize,
    /// Adjacent swaps per user; `None` means 5% of the catalog.
    pub perturbation: Option<usize>,
    pub drift: DriftConfig,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            catalog_size: 50,
            beta: 1.3,
            n_groups: 5,
            perturbation: None,
            drift: DriftConfig::default(),
        }
    }
}

impl WorkloadConfig {
    pub fn perturbation(&self) -> usize {
        self.perturbation
            .unwrap_or_else(|| default_perturbation(self.catalog_size))
    }
}

/// Popularity in force from `start_cycle` until the next change point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PopularityEpoch {
    pub index: usize,
    pub start_cycle: u64,
    pub beta: f64,
    pub group_base_ranks: Vec<Vec<FileId>>,
    pub profiles: Vec<PreferenceProfile>,
    sampler: RankSampler,
}

impl PopularityEpoch {
    fn draw<R: Rng + ?Sized>(
        rng: &mut R,
        cfg: &WorkloadConfig,
        groups: &[usize],
        index: usize,
        start_cycle: u64,
        beta: f64,
    ) -> Result<Self> {
        let (group_base_ranks, profiles) = draw_profiles(
            rng,
            groups,
            cfg.n_groups,
            cfg.catalog_size,
            cfg.perturbation(),
        );
        let sampler = RankSampler::new(ZipfParams {
            exponent: beta,
            catalog_size: cfg.catalog_size,
        })?;
        Ok(PopularityEpoch {
            index,
            start_cycle,
            beta,
            group_base_ranks,
            profiles,
            sampler,
        })
    }

    pub fn sampler(&self) -> &RankSampler {
        &self.sampler
    }
}

/// Metadata of a change point, for logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochInfo {
    pub index: usize,
    pub start_cycle: u64,
    pub beta: f64,
}

/// Stateful request generator. Its randomness is independent of everything
/// else in a run, so every caching policy sees the same trace for a seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Workload {
    cfg: WorkloadConfig,
    groups: Vec<usize>,
    epoch: PopularityEpoch,
    history: Vec<EpochInfo>,
    profile_rng: SimRng,
    request_rng: SimRng,
}

impl Workload {
    pub fn new(seed: u64, n_users: usize, cfg: &WorkloadConfig) -> Result<Self> {
        if cfg.n_groups == 0 || cfg.catalog_size == 0 {
            return Err(Error::config("need at least one group and one file"));
        }
        if cfg.drift.enabled
            && (cfg.drift.period == 0 || !(cfg.drift.beta_min <= cfg.drift.beta_max))
        {
            return Err(Error::config(
                "drift needs a positive period and beta_min <= beta_max",
            ));
        }
        let mut profile_rng = rng::stream(seed, Stream::Profiles);
        let groups = assign_groups(&mut profile_rng, n_users, cfg.n_groups);
        let beta = if cfg.drift.enabled {
            profile_rng.random_range(cfg.drift.beta_min..=cfg.drift.beta_max)
        } else {
            cfg.beta
        };
        let epoch = PopularityEpoch::draw(&mut profile_rng, cfg, &groups, 0, 0, beta)?;
        let history = vec![EpochInfo {
            index: 0,
            start_cycle: 0,
            beta,
        }];
        Ok(Workload {
            cfg: cfg.clone(),
            groups,
            epoch,
            history,
            profile_rng,
            request_rng: rng::stream(seed, Stream::Requests),
        })
    }

    pub fn config(&self) -> &WorkloadConfig {
        &self.cfg
    }

    pub fn epoch(&self) -> &PopularityEpoch {
        &self.epoch
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    /// Every epoch so far, including the current one.
    pub fn history(&self) -> &[EpochInfo] {
        &self.history
    }

    /// Starts a new epoch when drift is on and `cycle` is a positive multiple
    /// of the drift period. Returns whether popularity changed.
    pub fn advance_epoch(&mut self, cycle: u64) -> Result<bool> {
        let drift = &self.cfg.drift;
        if !drift.enabled
            || cycle == 0
            || !cycle.is_multiple_of(drift.period)
            || cycle == self.epoch.start_cycle
        {
            return Ok(false);
        }
        let beta = self
            .profile_rng
            .random_range(drift.beta_min..=drift.beta_max);
        let index = self.epoch.index + 1;
        self.epoch = PopularityEpoch::draw(
            &mut self.profile_rng,
            &self.cfg,
            &self.groups,
            index,
            cycle,
            beta,
        )?;
        self.history.push(EpochInfo {
            index,
            start_cycle: cycle,
            beta,
        });
        Ok(true)
    }

    /// One request per user for `cycle`.
    pub fn requests(&mut self, cycle: u64) -> Result<Vec<FileId>> {
        self.advance_epoch(cycle)?;
        let epoch = &self.epoch;
        Ok(epoch
            .profiles
            .iter()
            .map(|p| sample_request(p, &epoch.sampler, &mut self.request_rng))
            .collect())
    }
}

/// A recorded request stream, one row of `U` file ids per cycle.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RequestTrace {
    pub cycles: Vec<Vec<FileId>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    cycle: u64,
    user_id: UserId,
    file_id: FileId,
}

impl RequestTrace {
    pub fn record(workload: &mut Workload, n_cycles: u64) -> Result<Self> {
        let cycles = (0..n_cycles)
            .map(|t| workload.requests(t))
            .collect::<Result<_>>()?;
        Ok(RequestTrace { cycles })
    }

    pub fn n_users(&self) -> usize {
        self.cycles.first().map_or(0, Vec::len)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for (cycle, row) in self.cycles.iter().enumerate() {
            for (user_id, &file_id) in row.iter().enumerate() {
                w.serialize(TraceRow {
                    cycle: cycle as u64,
                    user_id,
                    file_id,
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `cycle,user_id,file_id` rows. Cycles must be contiguous from 0
    /// and every cycle must carry the same users.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut cycles: Vec<Vec<Option<FileId>>> = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize() {
            let row: TraceRow = row?;
            let c = row.cycle as usize;
            if c >= cycles.len() {
                cycles.resize(c + 1, Vec::new());
            }
            let users = &mut cycles[c];
            if row.user_id >= users.len() {
                users.resize(row.user_id + 1, None);
            }
            users[row.user_id] = Some(row.file_id);
        }
        let n_users = cycles.first().map_or(0, Vec::len);
        let cycles = cycles
            .into_iter()
            .enumerate()
            .map(|(c, users)| {
                if users.len() != n_users || users.iter().any(Option::is_none) {
                    return Err(Error::config(format!("trace cycle {c} is incomplete")));
                }
                Ok(users.into_iter().flatten().collect())
            })
            .collect::<Result<_>>()?;
        Ok(RequestTrace { cycles })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zipf(exponent: f64, catalog_size: usize) -> ZipfParams {
        ZipfParams {
            exponent,
            catalog_size,
        }
    }

    fn kendall_tau(a: &[FileId], b: &[FileId]) -> usize {
        let mut pos = vec![0; a.len()];
        for (k, &f) in b.iter().enumerate() {
            pos[f] = k;
        }
        let mapped: Vec<usize> = a.iter().map(|&f| pos[f]).collect();
        let mut inversions = 0;
        for i in 0..mapped.len() {
            for j in i + 1..mapped.len() {
                if mapped[i] > mapped[j] {
                    inversions += 1;
                }
            }
        }
        inversions
    }

    #[test]
    fn pmf_examples() {
        for m in [1, 7, 500] {
            for k in 1..=m {
                assert!((zipf_pmf(k, zipf(0.0, m)).unwrap() - 1.0 / m as f64).abs() < 1e-15);
            }
        }
        assert_eq!(zipf_pmf(1, zipf(2.0, 1)).unwrap(), 1.0);
        assert!((zipf_pmf(1, zipf(1.0, 2)).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(zipf_pmf(0, zipf(1.0, 2)).is_err());
        assert!(zipf_pmf(3, zipf(1.0, 2)).is_err());
    }

    #[test]
    fn pmf_normalized_and_decreasing() {
        for m in [1, 10, 500, 10_000] {
            for beta in [0.0, 0.5, 1.3, 3.0] {
                let table = zipf_table(zipf(beta, m));
                let sum: f64 = table.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "m={m} beta={beta}");
                if beta > 0.0 {
                    assert!(table.windows(2).all(|w| w[0] > w[1]));
                }
            }
        }
    }

    #[test]
    fn unperturbed_group_members_agree() {
        let profiles = build_profiles(3, 40, 5, 60, 0).unwrap();
        for a in &profiles {
            for b in &profiles {
                if a.group == b.group {
                    assert_eq!(a.rank, b.rank);
                }
            }
        }
    }

    #[test]
    fn groups_draw_independent_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (bases, _) = draw_profiles(&mut rng, &[0, 1], 2, 100, 0);
        assert_ne!(bases[0], bases[1]);
    }

    #[test]
    fn perturbation_bounded_by_swaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let groups = assign_groups(&mut rng, 30, 5);
        for s in [0, 1, 3, 25] {
            let (bases, profiles) = draw_profiles(&mut rng, &groups, 5, 50, s);
            for p in &profiles {
                let mut sorted = p.rank.clone();
                sorted.sort_unstable();
                assert_eq!(sorted, (0..50).collect::<Vec<_>>());
                assert!(kendall_tau(&p.rank, &bases[p.group]) <= s);
            }
        }
    }

    #[test]
    fn default_perturbation_is_five_percent() {
        assert_eq!(default_perturbation(500), 25);
        assert_eq!(default_perturbation(50), 3);
        assert_eq!(default_perturbation(2), 1);
    }

    #[test]
    fn steep_zipf_almost_always_top_rank() {
        let profile = PreferenceProfile {
            user: 0,
            group: 0,
            rank: vec![4, 2, 0, 1, 3],
        };
        let sampler = RankSampler::new(zipf(50.0, 5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let top = (0..10_000)
            .filter(|_| sample_request(&profile, &sampler, &mut rng) == 4)
            .count();
        assert!(top as f64 / 1e4 > 0.999);
    }

    #[test]
    fn empirical_top_rank_frequency() {
        let params = zipf(1.3, 500);
        let profile = PreferenceProfile {
            user: 0,
            group: 0,
            rank: (0..500).rev().collect(),
        };
        let sampler = RankSampler::new(params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 100_000;
        let mut hits = 0;
        for _ in 0..n {
            let f = sample_request(&profile, &sampler, &mut rng);
            assert!(f < 500);
            if f == 499 {
                hits += 1;
            }
        }
        let expected = zipf_pmf(1, params).unwrap();
        assert!((hits as f64 / n as f64 - expected).abs() < 0.02);
    }

    #[test]
    fn no_drift_means_one_epoch() {
        let cfg = WorkloadConfig::default();
        let mut w = Workload::new(1, 6, &cfg).unwrap();
        for t in 0..25_000 {
            assert!(!w.advance_epoch(t).unwrap());
        }
        assert_eq!(w.history().len(), 1);
    }

    #[test]
    fn drift_changes_on_period_boundaries() {
        let cfg = WorkloadConfig {
            drift: DriftConfig {
                enabled: true,
                ..DriftConfig::default()
            },
            ..WorkloadConfig::default()
        };
        let mut w = Workload::new(1, 6, &cfg).unwrap();
        let before = w.epoch().clone();
        assert!(!w.advance_epoch(9_999).unwrap());
        assert!(w.advance_epoch(10_000).unwrap());
        assert!(!w.advance_epoch(10_000).unwrap());
        let after = w.epoch();
        assert_eq!(after.start_cycle, 10_000);
        assert!((1.1..=1.5).contains(&after.beta));
        assert_ne!(before.group_base_ranks, after.group_base_ranks);
        assert_eq!(w.history().len(), 2);
    }

    #[test]
    fn same_seed_same_requests() {
        let cfg = WorkloadConfig::default();
        let a = RequestTrace::record(&mut Workload::new(5, 12, &cfg).unwrap(), 200).unwrap();
        let b = RequestTrace::record(&mut Workload::new(5, 12, &cfg).unwrap(), 200).unwrap();
        let c = RequestTrace::record(&mut Workload::new(6, 12, &cfg).unwrap(), 200).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn trace_csv_round_trip() {
        let cfg = WorkloadConfig::default();
        let trace = RequestTrace::record(&mut Workload::new(5, 4, &cfg).unwrap(), 30).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("cycle,user_id,file_id\n"));
        assert_eq!(RequestTrace::read_csv(&buf[..]).unwrap(), trace);
        let broken = "cycle,user_id,file_id\n0,0,1\n0,1,2\n1,0,3\n";
        assert!(RequestTrace::read_csv(broken.as_bytes()).is_err());
    }
}
