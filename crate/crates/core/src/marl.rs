//! Decentralized actors, a centralized critic, and their TD-error updates.
//!
//! Each base station owns an actor that scores its `C * L + 1` caching
//! actions from its local observation. A single critic estimates `V(x)` over
//! the concatenated observations of all stations. After every cycle the
//! critic computes `delta = r + gamma V(x') - V(x)`, takes one semi-gradient
//! step on `delta^2`, and every actor ascends `alpha * delta * grad log pi`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cache::{action_space_size, decode_action, Action};
use crate::nn::{masked_softmax, Direction, ForwardTrace, Gradients, Mlp};
use crate::{Error, FileId, Result, StationId, UserId};

/// How an actor maps its observation to action logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActorArch {
    /// A small network `g` scores a file from its three window features.
    /// Replacing the file in slot `s` with the one requested by user `u`
    /// gets logit `g(request_u) - g(slot_s)`; the no-op gets 0.
    PerFile,
    /// A dense network from the whole observation to all logits.
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub gamma: f64,
    pub actor_rate: f64,
    pub critic_rate: f64,
    pub temperature: f64,
    /// Multiplier applied to the delay reduction before it is used as reward.
    pub reward_scale: f64,
    pub actor_arch: ActorArch,
    pub per_file_hidden: Vec<usize>,
    pub dense_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gamma: 0.95,
            actor_rate: 0.1,
            critic_rate: 1e-3,
            temperature: 1.0,
            reward_scale: 0.1,
            actor_arch: ActorArch::PerFile,
            per_file_hidden: vec![16, 8],
            dense_hidden: vec![128, 64],
            critic_hidden: vec![256, 128],
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!(
                "gamma {} outside (0, 1)",
                self.gamma
            )));
        }
        for (name, v) in [
            ("actor_rate", self.actor_rate),
            ("critic_rate", self.critic_rate),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(format!("{name} {v} outside [0, 1)")));
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature must be positive"));
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return Err(Error::config("reward_scale must be positive"));
        }
        Ok(())
    }
}

/// What one actor sees when it acts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorInput {
    /// `[short; medium; long]` window features, length `3 M`.
    pub observation: Vec<f64>,
    /// Cached files in slot order.
    pub slots: Vec<FileId>,
    /// Current request of each connectable user.
    pub requests: Vec<FileId>,
}

impl ActorInput {
    fn file_features(&self, file: FileId) -> [f64; 3] {
        let m = self.observation.len() / 3;
        [
            self.observation[file],
            self.observation[m + file],
            self.observation[2 * m + file],
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectMode {
    Sample,
    Greedy,
}

enum Traces {
    PerFile {
        slots: Vec<ForwardTrace>,
        requests: Vec<ForwardTrace>,
    },
    Dense(ForwardTrace),
}

/// Logits, validity mask and probabilities of one actor on one input.
pub struct PolicyEval {
    pub logits: Vec<f64>,
    pub mask: Vec<bool>,
    pub probs: Vec<f64>,
    traces: Traces,
}

impl PolicyEval {
    /// Highest-logit valid action; the lowest id wins ties.
    pub fn greedy(&self) -> usize {
        let mut best = 0;
        let mut best_logit = f64::NEG_INFINITY;
        for (id, (&l, &m)) in self.logits.iter().zip(&self.mask).enumerate() {
            if m && l > best_logit {
                best = id;
                best_logit = l;
            }
        }
        best
    }
}

/// The actor of one base station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub station: StationId,
    /// Connectable users in id order; request slot `u` refers to `users[u]`.
    pub users: Vec<UserId>,
    capacity: usize,
    catalog_size: usize,
    arch: ActorArch,
    net: Mlp,
}

impl Agent {
    /// Builds an actor with Xavier hidden layers and a zero output layer, so
    /// the initial policy is uniform over valid actions.
    pub fn new<R: Rng + ?Sized>(
        station: StationId,
        users: Vec<UserId>,
        capacity: usize,
        catalog_size: usize,
        hp: &Hyperparams,
        rng: &mut R,
    ) -> Result<Self> {
        if capacity == 0 || catalog_size == 0 {
            return Err(Error::config("capacity and catalog size must be positive"));
        }
        let n_actions = action_space_size(capacity, users.len());
        let sizes: Vec<usize> = match hp.actor_arch {
            ActorArch::PerFile => [3]
                .into_iter()
                .chain(hp.per_file_hidden.iter().copied())
                .chain([1])
                .collect(),
            ActorArch::Dense => [3 * catalog_size]
                .into_iter()
                .chain(hp.dense_hidden.iter().copied())
                .chain([n_actions])
                .collect(),
        };
        let mut net = Mlp::xavier(&sizes, rng)?;
        net.zero_output_layer();
        Ok(Agent {
            station,
            users,
            capacity,
            catalog_size,
            arch: hp.actor_arch,
            net,
        })
    }

    pub fn n_actions(&self) -> usize {
        action_space_size(self.capacity, self.users.len())
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn arch(&self) -> ActorArch {
        self.arch
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn decode(&self, id: usize) -> Result<Action> {
        decode_action(id, self.capacity, self.users.len())
    }

    fn check_input(&self, input: &ActorInput) -> Result<()> {
        if input.observation.len() != 3 * self.catalog_size {
            return Err(Error::contract(format!(
                "observation has length {}, expected {}",
                input.observation.len(),
                3 * self.catalog_size
            )));
        }
        if input.requests.len() != self.users.len() || input.slots.len() > self.capacity {
            return Err(Error::contract("actor input does not match the station"));
        }
        Ok(())
    }

    /// Replacements that would bring in an already cached file are masked;
    /// the no-op is always valid.
    fn mask(&self, input: &ActorInput) -> Vec<bool> {
        let l = self.users.len();
        let mut mask = vec![true; self.n_actions()];
        for s in 0..self.capacity {
            for (u, f) in input.requests.iter().enumerate() {
                if input.slots.contains(f) {
                    mask[1 + s * l + u] = false;
                }
            }
        }
        mask
    }

    pub fn evaluate(&self, input: &ActorInput, temperature: f64) -> Result<PolicyEval> {
        self.check_input(input)?;
        let mask = self.mask(input);
        let l = self.users.len();
        let (raw, traces) = match self.arch {
            ActorArch::PerFile => {
                let score = |f: FileId| self.net.forward_trace(&input.file_features(f));
                let slots = input
                    .slots
                    .iter()
                    .map(|&f| score(f))
                    .collect::<Result<Vec<_>>>()?;
                let requests = input
                    .requests
                    .iter()
                    .map(|&f| score(f))
                    .collect::<Result<Vec<_>>>()?;
                let mut raw = vec![0.0; self.n_actions()];
                for s in 0..self.capacity {
                    // A free slot scores 0.
                    let slot_score = slots.get(s).map_or(0.0, |t| t.output()[0]);
                    for (u, t) in requests.iter().enumerate() {
                        raw[1 + s * l + u] = t.output()[0] - slot_score;
                    }
                }
                (raw, Traces::PerFile { slots, requests })
            }
            ActorArch::Dense => {
                let t = self.net.forward_trace(&input.observation)?;
                (t.output().to_vec(), Traces::Dense(t))
            }
        };
        let logits: Vec<f64> = raw.iter().map(|v| v / temperature).collect();
        let probs = masked_softmax(&logits, &mask)?;
        Ok(PolicyEval {
            logits,
            mask,
            probs,
            traces,
        })
    }

    /// Picks an action id and returns it with its log-probability.
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        input: &ActorInput,
        mode: SelectMode,
        temperature: f64,
        rng: &mut R,
    ) -> Result<(usize, f64)> {
        let eval = self.evaluate(input, temperature)?;
        let id = match mode {
            SelectMode::Greedy => eval.greedy(),
            SelectMode::Sample => WeightedIndex::new(&eval.probs)
                .map_err(|e| Error::contract(format!("bad action distribution: {e}")))?
                .sample(rng),
        };
        Ok((id, eval.probs[id].ln()))
    }

    /// `grad log pi(action | input)` with respect to the actor parameters.
    pub fn log_prob_gradient(
        &self,
        input: &ActorInput,
        action: usize,
        temperature: f64,
    ) -> Result<Gradients> {
        let eval = self.evaluate(input, temperature)?;
        if action >= eval.probs.len() || !eval.mask[action] {
            return Err(Error::contract(format!(
                "action {action} is not valid here"
            )));
        }
        // d log pi / d logit_b = [b == a] - pi_b, then through the 1/temperature.
        let mut dlogit: Vec<f64> = eval.probs.iter().map(|p| -p / temperature).collect();
        dlogit[action] += 1.0 / temperature;

        let mut grads = Gradients::zeros_like(&self.net);
        match &eval.traces {
            Traces::PerFile { slots, requests } => {
                let l = self.users.len();
                let mut req_coef = vec![0.0; requests.len()];
                let mut slot_coef = vec![0.0; slots.len()];
                for s in 0..self.capacity {
                    for u in 0..l {
                        let d = dlogit[1 + s * l + u];
                        req_coef[u] += d;
                        if s < slots.len() {
                            slot_coef[s] -= d;
                        }
                    }
                }
                for (t, c) in requests
                    .iter()
                    .zip(&req_coef)
                    .chain(slots.iter().zip(&slot_coef))
                {
                    if *c != 0.0 {
                        self.net.backward_into(t, &[1.0], *c, &mut grads)?;
                    }
                }
            }
            Traces::Dense(t) => self.net.backward_into(t, &dlogit, 1.0, &mut grads)?,
        }
        Ok(grads)
    }

    /// `theta <- theta + rate * delta * grad log pi(action | input)`.
    pub fn actor_update(
        &mut self,
        input: &ActorInput,
        action: usize,
        delta: f64,
        rate: f64,
        temperature: f64,
    ) -> Result<()> {
        if delta == 0.0 || rate == 0.0 {
            return Ok(());
        }
        let mut g = self.log_prob_gradient(input, action, temperature)?;
        g.scale(delta);
        self.net.sgd_step(&g, rate, Direction::Ascend)
    }
}

/// The centralized value function `V(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub gamma: f64,
    net: Mlp,
}

impl Critic {
    /// Xavier hidden layers and a zero output layer, so `V` starts at 0.
    pub fn new<R: Rng + ?Sized>(state_len: usize, hp: &Hyperparams, rng: &mut R) -> Result<Self> {
        let sizes: Vec<usize> = [state_len]
            .into_iter()
            .chain(hp.critic_hidden.iter().copied())
            .chain([1])
            .collect();
        let mut net = Mlp::xavier(&sizes, rng)?;
        net.zero_output_layer();
        Ok(Critic {
            gamma: hp.gamma,
            net,
        })
    }

    pub fn from_network(net: Mlp, gamma: f64) -> Result<Self> {
        if net.output_len() != 1 {
            return Err(Error::config("critic network must have one output"));
        }
        Ok(Critic { gamma, net })
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        Ok(self.net.forward(state)?[0])
    }

    /// `r + gamma V(x') - V(x)`.
    pub fn td_error(&self, reward: f64, state: &[f64], next_state: &[f64]) -> Result<f64> {
        Ok(reward + self.gamma * self.value(next_state)? - self.value(state)?)
    }

    /// Semi-gradient of `delta^2` with the target held fixed: `-2 delta grad V(x)`.
    pub fn loss_gradient(
        &self,
        reward: f64,
        state: &[f64],
        next_state: &[f64],
    ) -> Result<(f64, Gradients)> {
        let target = reward + self.gamma * self.value(next_state)?;
        let trace = self.net.forward_trace(state)?;
        let delta = target - trace.output()[0];
        let g = self.net.backward(&trace, &[-2.0 * delta])?;
        Ok((delta, g))
    }

    /// One descent step on `delta^2`. Returns the TD error before the step.
    pub fn critic_update(
        &mut self,
        reward: f64,
        state: &[f64],
        next_state: &[f64],
        rate: f64,
    ) -> Result<f64> {
        let (delta, g) = self.loss_gradient(reward, state, next_state)?;
        if delta != 0.0 && rate != 0.0 {
            self.net.sgd_step(&g, rate, Direction::Descend)?;
        }
        Ok(delta)
    }
}

/// One actor's part of a transition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub input: ActorInput,
    pub action: usize,
    pub log_prob: f64,
}

/// `(x_t, {o_i, a_i}, r_t, x_{t+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub steps: Vec<AgentStep>,
    pub reward: f64,
    pub next_state: Vec<f64>,
}

/// All actors plus the critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActorCritic {
    pub hyperparams: Hyperparams,
    pub agents: Vec<Agent>,
    pub critic: Critic,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(
        hyperparams: Hyperparams,
        agents: Vec<Agent>,
        state_len: usize,
        critic_rng: &mut R,
    ) -> Result<Self> {
        hyperparams.validate()?;
        let critic = Critic::new(state_len, &hyperparams, critic_rng)?;
        Ok(ActorCritic {
            hyperparams,
            agents,
            critic,
        })
    }

    /// Computes `delta` with the current critic, updates the critic, then
    /// every actor with that same `delta`. Returns `delta`.
    pub fn learn(&mut self, t: &Transition) -> Result<f64> {
        if t.steps.len() != self.agents.len() {
            return Err(Error::contract("transition does not cover every agent"));
        }
        let hp = &self.hyperparams;
        let delta = self
            .critic
            .critic_update(t.reward, &t.state, &t.next_state, hp.critic_rate)?;
        for (agent, step) in self.agents.iter_mut().zip(&t.steps) {
            agent.actor_update(
                &step.input,
                step.action,
                delta,
                hp.actor_rate,
                hp.temperature,
            )?;
        }
        Ok(delta)
    }

    pub fn all_finite(&self) -> bool {
        self.critic.network().params().all(f64::is_finite)
            && self
                .agents
                .iter()
                .all(|a| a.network().params().all(f64::is_finite))
    }
}
