//! The per-cycle simulation loop shared by the learned and baseline policies.
//!
//! One cycle runs in a fixed order:
//!
//! 1. every user issues a request (from a workload or a recorded trace);
//! 2. requests are served from the current caches and the delay reduction is
//!    measured on a channel stream keyed by the cycle number, so every policy
//!    sees the same fading for the same cycle;
//! 3. each covering station records the request in its feature windows;
//! 4. the controller updates the caches. Baselines react to each request.
//!    The learned controller completes the previous transition with this
//!    cycle's delay reduction as reward, learns from it, and takes one action
//!    per station.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cache::{BaselinePolicy, CacheMatrix, CacheState};
use crate::channel::{ChannelParams, Rayleigh};
use crate::features::{FeatureWindows, WindowSizes};
use crate::marl::{ActorCritic, ActorInput, Agent, AgentStep, Hyperparams, SelectMode, Transition};
use crate::metrics::{cycle_delay_accounting, CycleOutcome};
use crate::rng::{self, SimRng, Stream};
use crate::topology::Topology;
use crate::workload::{EpochInfo, RequestTrace, Workload};
use crate::{Error, FileId, Result};

/// Policies that can drive the caches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Marl,
    Lru,
    Lfu,
    Fifo,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Marl,
        PolicyKind::Lru,
        PolicyKind::Lfu,
        PolicyKind::Fifo,
    ];

    pub fn baseline(self) -> Option<BaselinePolicy> {
        match self {
            PolicyKind::Marl => None,
            PolicyKind::Lru => Some(BaselinePolicy::Lru),
            PolicyKind::Lfu => Some(BaselinePolicy::Lfu),
            PolicyKind::Fifo => Some(BaselinePolicy::Fifo),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Marl => "marl",
            PolicyKind::Lru => "lru",
            PolicyKind::Lfu => "lfu",
            PolicyKind::Fifo => "fifo",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "marl" => Ok(PolicyKind::Marl),
            other => other.parse::<BaselinePolicy>().map(|b| match b {
                BaselinePolicy::Lru => PolicyKind::Lru,
                BaselinePolicy::Lfu => PolicyKind::Lfu,
                BaselinePolicy::Fifo => PolicyKind::Fifo,
            }),
        }
    }
}

/// Whether the learned controller explores and learns, or acts greedily with
/// frozen parameters. Baselines behave the same in both.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub capacity: usize,
    pub windows: WindowSizes,
    /// Divide window counts by the window size.
    pub normalize_features: bool,
    pub channel: ChannelParams,
    pub hyperparams: Hyperparams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            capacity: 5,
            windows: WindowSizes::default(),
            normalize_features: true,
            channel: ChannelParams::default(),
            hyperparams: Hyperparams::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum RequestSource {
    Workload(Workload),
    Trace {
        trace: RequestTrace,
        catalog_size: usize,
    },
}

impl RequestSource {
    pub fn catalog_size(&self) -> usize {
        match self {
            RequestSource::Workload(w) => w.config().catalog_size,
            RequestSource::Trace { catalog_size, .. } => *catalog_size,
        }
    }

    fn requests(&mut self, cycle: u64) -> Result<Vec<FileId>> {
        match self {
            RequestSource::Workload(w) => w.requests(cycle),
            RequestSource::Trace {
                trace,
                catalog_size,
            } => {
                let row = trace
                    .cycles
                    .get(cycle as usize)
                    .ok_or_else(|| Error::contract(format!("trace has no cycle {cycle}")))?;
                if let Some(&f) = row.iter().find(|&&f| f >= *catalog_size) {
                    return Err(Error::contract(format!(
                        "trace file {f} outside the catalog"
                    )));
                }
                Ok(row.clone())
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Controller {
    Baseline(BaselinePolicy),
    Marl(ActorCritic),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Pending {
    state: Vec<f64>,
    steps: Vec<AgentStep>,
}

/// What happened in one cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleRecord {
    pub cycle: u64,
    pub eta: f64,
    pub delta_d: f64,
    pub hits: usize,
    pub truncated: bool,
    /// Scaled reward handed to the previous transition (learned policy only).
    pub reward: Option<f64>,
    pub td_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Simulation {
    seed: u64,
    topology: Topology,
    config: SimConfig,
    source: RequestSource,
    caches: Vec<CacheState>,
    features: FeatureWindows,
    controller: Controller,
    policy_rng: SimRng,
    pending: Option<Pending>,
    cycle: u64,
}

impl Simulation {
    pub fn new(
        seed: u64,
        topology: Topology,
        source: RequestSource,
        policy: PolicyKind,
        config: &SimConfig,
    ) -> Result<Self> {
        config.channel.validate()?;
        let m = source.catalog_size();
        if config.capacity == 0 || config.capacity > m {
            return Err(Error::config(format!(
                "capacity {} outside 1..={m}",
                config.capacity
            )));
        }
        if let RequestSource::Trace { trace, .. } = &source {
            if trace.n_users() != topology.n_users() && !trace.cycles.is_empty() {
                return Err(Error::config(
                    "trace and topology disagree on the number of users",
                ));
            }
        }
        let n = topology.n_stations();
        let caches = (0..n)
            .map(|i| CacheState::new(i, config.capacity))
            .collect();
        let features = FeatureWindows::new(n, m, config.windows);
        let controller = match policy.baseline() {
            Some(b) => Controller::Baseline(b),
            None => {
                let hp = &config.hyperparams;
                hp.validate()?;
                let mut actor_rng = rng::stream(seed, Stream::ActorInit);
                let agents = (0..n)
                    .map(|i| {
                        Agent::new(
                            i,
                            topology.connectable_users(i),
                            config.capacity,
                            m,
                            hp,
                            &mut actor_rng,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut critic_rng = rng::stream(seed, Stream::CriticInit);
                Controller::Marl(ActorCritic::new(
                    hp.clone(),
                    agents,
                    3 * m * n,
                    &mut critic_rng,
                )?)
            }
        };
        Ok(Simulation {
            seed,
            topology,
            config: config.clone(),
            source,
            caches,
            features,
            controller,
            policy_rng: rng::stream(seed, Stream::Policy),
            pending: None,
            cycle: 0,
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn caches(&self) -> &[CacheState] {
        &self.caches
    }

    pub fn features(&self) -> &FeatureWindows {
        &self.features
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn actor_critic(&self) -> Option<&ActorCritic> {
        match &self.controller {
            Controller::Marl(ac) => Some(ac),
            Controller::Baseline(_) => None,
        }
    }

    pub fn workload(&self) -> Option<&Workload> {
        match &self.source {
            RequestSource::Workload(w) => Some(w),
            RequestSource::Trace { .. } => None,
        }
    }

    /// Popularity epochs seen so far; empty for trace replays.
    pub fn epochs(&self) -> &[EpochInfo] {
        match &self.source {
            RequestSource::Workload(w) => w.history(),
            RequestSource::Trace { .. } => &[],
        }
    }

    /// Runs one cycle and returns its outcome and summary.
    pub fn step_detailed(&mut self, mode: Mode) -> Result<(CycleOutcome, CycleRecord)> {
        let t = self.cycle;
        let requests = self.source.requests(t)?;
        if requests.len() != self.topology.n_users() {
            return Err(Error::contract("one request per user is required"));
        }
        let mut channel_rng = rng::stream(self.seed, Stream::Channel(t));
        let outcome = cycle_delay_accounting(
            &self.topology,
            &self.caches,
            &requests,
            &self.config.channel,
            t,
            &mut Rayleigh(&mut channel_rng),
        )?;
        let eta = outcome.eta()?;

        for (user, &file) in requests.iter().enumerate() {
            for station in self.topology.covering_stations(user) {
                self.features.record_request(station, file);
            }
        }

        let (reward, td_error) = match &mut self.controller {
            Controller::Baseline(policy) => {
                for (user, &file) in requests.iter().enumerate() {
                    for station in self.topology.covering_stations(user) {
                        self.caches[station].baseline_step(*policy, file, t);
                    }
                }
                (None, None)
            }
            Controller::Marl(ac) => {
                let normalize = self.config.normalize_features;
                warm_fill(&mut self.caches, ac, &requests, t);
                let state = self.features.global_state(normalize);
                let reward = ac.hyperparams.reward_scale * outcome.delta_d;
                let pending = self.pending.take();
                let td_error = match (mode, pending) {
                    (Mode::Train, Some(p)) => {
                        let tr = Transition {
                            state: p.state,
                            steps: p.steps,
                            reward,
                            next_state: state.clone(),
                        };
                        Some(ac.learn(&tr)?)
                    }
                    _ => None,
                };
                let select = match mode {
                    Mode::Train => SelectMode::Sample,
                    Mode::Eval => SelectMode::Greedy,
                };
                let temperature = ac.hyperparams.temperature;
                let mut steps = Vec::with_capacity(ac.agents.len());
                for agent in &ac.agents {
                    let input = ActorInput {
                        observation: self.features.observation(agent.station, normalize).values,
                        slots: self.caches[agent.station].files().collect(),
                        requests: agent.users.iter().map(|&u| requests[u]).collect(),
                    };
                    let (action, log_prob) =
                        agent.select_action(&input, select, temperature, &mut self.policy_rng)?;
                    self.caches[agent.station].apply_action(
                        agent.decode(action)?,
                        &input.requests,
                        t,
                    )?;
                    steps.push(AgentStep {
                        input,
                        action,
                        log_prob,
                    });
                }
                if mode == Mode::Train {
                    self.pending = Some(Pending { state, steps });
                }
                (Some(reward), td_error)
            }
        };

        let phi = CacheMatrix::from_caches(&self.caches, self.source.catalog_size());
        if !phi.within_capacity(self.config.capacity) {
            return Err(Error::contract(format!(
                "cache capacity exceeded at cycle {t}"
            )));
        }
        self.cycle += 1;
        let record = CycleRecord {
            cycle: t,
            eta,
            delta_d: outcome.delta_d,
            hits: outcome.hits(),
            truncated: outcome.truncated(),
            reward,
            td_error,
        };
        Ok((outcome, record))
    }

    pub fn step(&mut self, mode: Mode) -> Result<CycleRecord> {
        Ok(self.step_detailed(mode)?.1)
    }

    pub fn run(&mut self, n_cycles: u64, mode: Mode) -> Result<Vec<CycleRecord>> {
        (0..n_cycles).map(|_| self.step(mode)).collect()
    }

    /// Full state as JSON; loading it resumes the run exactly.
    pub fn to_checkpoint(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `state.json` plus one network file per actor and the critic.
    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("state.json"), self.to_checkpoint()?)?;
        if let Controller::Marl(ac) = &self.controller {
            for a in &ac.agents {
                std::fs::write(
                    dir.join(format!("actor_{}.json", a.station)),
                    a.network().to_checkpoint()?,
                )?;
            }
            std::fs::write(
                dir.join("critic.json"),
                ac.critic.network().to_checkpoint()?,
            )?;
        }
        Ok(())
    }

    pub fn load_checkpoint(dir: &Path) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read_to_string(dir.join("state.json"))?)
    }
}

/// Stations with free slots take in uncached requests of their own users
/// before acting, so the replacement actions operate on a full cache.
fn warm_fill(caches: &mut [CacheState], ac: &ActorCritic, requests: &[FileId], cycle: u64) {
    for agent in &ac.agents {
        let cache = &mut caches[agent.station];
        for &u in &agent.users {
            if cache.is_full() {
                break;
            }
            cache.insert(requests[u], cycle);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate_topology, TopologyConfig};
    use crate::workload::WorkloadConfig;

    fn sim(policy: PolicyKind, seed: u64) -> Simulation {
        let topo = generate_topology(seed, &TopologyConfig::default()).unwrap();
        let wl = Workload::new(seed, topo.n_users(), &WorkloadConfig::default()).unwrap();
        Simulation::new(
            seed,
            topo,
            RequestSource::Workload(wl),
            policy,
            &SimConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.to_string().parse::<PolicyKind>().unwrap(), p);
        }
        assert!("random".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn zero_cycles_leave_everything_untouched() {
        let mut s = sim(PolicyKind::Marl, 1);
        let before = s.actor_critic().unwrap().clone();
        assert!(s.run(0, Mode::Train).unwrap().is_empty());
        assert_eq!(s.actor_critic().unwrap(), &before);
    }

    #[test]
    fn training_log_is_finite_and_complete() {
        let mut s = sim(PolicyKind::Marl, 2);
        let log = s.run(60, Mode::Train).unwrap();
        assert_eq!(log.len(), 60);
        assert!(log
            .iter()
            .all(|r| r.eta.is_finite() && (0.0..=100.0).contains(&r.eta)));
        assert!(log[0].td_error.is_none());
        assert!(log[1..]
            .iter()
            .all(|r| r.td_error.is_some_and(f64::is_finite)));
        assert!(s.actor_critic().unwrap().all_finite());
        assert!(s.caches().iter().all(|c| c.len() <= c.capacity()));
    }

    #[test]
    fn eval_mode_freezes_parameters() {
        let mut s = sim(PolicyKind::Marl, 3);
        s.run(20, Mode::Train).unwrap();
        let before = s.actor_critic().unwrap().clone();
        let log = s.run(20, Mode::Eval).unwrap();
        assert!(log.iter().all(|r| r.td_error.is_none()));
        assert_eq!(s.actor_critic().unwrap(), &before);
    }

    #[test]
    fn reward_is_next_cycle_delay_reduction() {
        let mut s = sim(PolicyKind::Marl, 4);
        let scale = s.actor_critic().unwrap().hyperparams.reward_scale;
        for _ in 0..30 {
            let (outcome, rec) = s.step_detailed(Mode::Train).unwrap();
            assert_eq!(rec.reward, Some(scale * outcome.delta_d));
        }
    }

    #[test]
    fn same_seed_same_baseline_trajectory() {
        let mut a = sim(PolicyKind::Lfu, 5);
        let mut b = sim(PolicyKind::Lfu, 5);
        assert_eq!(
            a.run(100, Mode::Train).unwrap(),
            b.run(100, Mode::Train).unwrap()
        );
        assert_eq!(a.caches(), b.caches());
    }

    #[test]
    fn checkpoint_resume_is_exact() {
        let mut straight = sim(PolicyKind::Marl, 6);
        let full = straight.run(40, Mode::Train).unwrap();

        let mut first = sim(PolicyKind::Marl, 6);
        let mut head = first.run(25, Mode::Train).unwrap();
        let mut resumed = Simulation::from_checkpoint(&first.to_checkpoint().unwrap()).unwrap();
        head.extend(resumed.run(15, Mode::Train).unwrap());
        assert_eq!(head, full);
        assert_eq!(resumed.actor_critic(), straight.actor_critic());
    }

    #[test]
    fn trace_replay_matches_live_workload() {
        let seed = 7;
        let topo = generate_topology(seed, &TopologyConfig::default()).unwrap();
        let cfg = WorkloadConfig::default();
        let mut wl = Workload::new(seed, topo.n_users(), &cfg).unwrap();
        let trace = RequestTrace::record(&mut wl, 50).unwrap();
        let live = sim(PolicyKind::Lru, seed).run(50, Mode::Train).unwrap();
        let source = RequestSource::Trace {
            trace,
            catalog_size: cfg.catalog_size,
        };
        let mut replay =
            Simulation::new(seed, topo, source, PolicyKind::Lru, &SimConfig::default()).unwrap();
        assert_eq!(replay.run(50, Mode::Train).unwrap(), live);
        assert!(replay.step(Mode::Train).is_err());
    }
}
