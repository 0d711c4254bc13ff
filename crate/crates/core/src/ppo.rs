//! Clipped-surrogate PPO with generalized advantage estimation.
//!
//! Defaults mirror the usual reference implementation (2048-step rollouts,
//! 10 epochs of 64-sample minibatches, Adam at 3e-4, clip 0.2, GAE 0.95).
//! Every model here is a function of a 16-valued state, so each minibatch
//! evaluates the model once per state and back-propagates once per visited
//! state with the per-sample upstream gradients summed.

use std::collections::VecDeque;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuits::NUM_STATES;
use crate::error::{Error, Result};
use crate::lake::{Action, LakeEnv, LakeModel, NUM_ACTIONS};
use crate::models::{Model, ModelOutput, ModelSpec, PolicyValueModel};

/// Trainer and environment settings. Loaded from flat `key = value` files;
/// absent keys keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub total_timesteps: usize,
    pub rollout_length: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub learning_rate: f64,
    pub adam_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantage: bool,
    /// Reward checkpoint spacing in environment steps.
    pub eval_interval: usize,
    /// Completed episodes averaged at each checkpoint.
    pub reward_window: usize,
    pub seed: u64,
    pub slip_prob: f64,
    pub max_episode_steps: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            total_timesteps: 50_000,
            rollout_length: 2048,
            minibatch_size: 64,
            epochs_per_update: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            learning_rate: 3e-4,
            adam_eps: 1e-5,
            value_coef: 0.5,
            entropy_coef: 0.0,
            max_grad_norm: 0.5,
            normalize_advantage: true,
            eval_interval: 1000,
            reward_window: 100,
            seed: 1,
            slip_prob: 0.2,
            max_episode_steps: 100,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("total_timesteps", self.total_timesteps),
            ("rollout_length", self.rollout_length),
            ("minibatch_size", self.minibatch_size),
            ("epochs_per_update", self.epochs_per_update),
            ("eval_interval", self.eval_interval),
            ("reward_window", self.reward_window),
            ("max_episode_steps", self.max_episode_steps),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.rollout_length.is_multiple_of(self.minibatch_size) {
            return Err(Error::Config(format!(
                "rollout_length {} not divisible by minibatch_size {}",
                self.rollout_length, self.minibatch_size
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Config("gamma must be in (0, 1], gae_lambda in [0, 1]".into()));
        }
        if !(self.clip_eps > 0.0) || !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err(Error::Config(
                "clip_eps, learning_rate and max_grad_norm must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.slip_prob) {
            return Err(Error::Config("slip_prob must be in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    /// Fully resolved config in the same `key = value` format.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn lake(&self) -> Result<LakeModel> {
        Ok(LakeModel::standard(self.slip_prob)?.with_max_episode_steps(self.max_episode_steps))
    }
}

/// One rollout of fixed length. `next_values[t]` is `V(s_{t+1})` for the
/// state actually reached, used for bootstrapping unless `dones[t]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Entered a hole or the goal.
    pub dones: Vec<bool>,
    /// Episode cut by the step budget.
    pub truncated: Vec<bool>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    fn push(&mut self, state: usize, action: usize, out: &ModelOutput) {
        self.states.push(state);
        self.actions.push(action);
        self.values.push(out.value);
        self.log_probs.push(out.log_prob(action));
    }
}

/// Fills `advantages` and `returns`:
/// `delta_t = r_t + gamma V(s_{t+1}) (1 - done_t) - V(s_t)`,
/// `A_t = delta_t + gamma lambda (1 - ended_t) A_{t+1}`, `R_t = A_t + V(s_t)`,
/// where an episode has ended at `t` if it terminated or was truncated.
pub fn compute_gae(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    let n = buffer.len();
    buffer.advantages = vec![0.0; n];
    buffer.returns = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let ended = buffer.dones[t] || buffer.truncated[t];
        let bootstrap = if buffer.dones[t] { 0.0 } else { buffer.next_values[t] };
        let delta = buffer.rewards[t] + gamma * bootstrap - buffer.values[t];
        let carry = if ended { 0.0 } else { next_adv };
        let adv = delta + gamma * lambda * carry;
        buffer.advantages[t] = adv;
        buffer.returns[t] = adv + buffer.values[t];
        next_adv = adv;
    }
}

/// Reward checkpoint: environment step and trailing mean episode return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardPoint {
    pub step: usize,
    pub reward: f64,
}

pub type RewardSeries = Vec<RewardPoint>;

/// Environment driver that persists across rollouts and records the reward
/// series.
pub struct RolloutCollector<'a> {
    env: LakeEnv<'a>,
    state: usize,
    episode_return: f64,
    window: VecDeque<f64>,
    window_size: usize,
    eval_interval: usize,
    horizon: usize,
    timesteps: usize,
    episodes: usize,
    series: RewardSeries,
}

impl<'a> RolloutCollector<'a> {
    pub fn new(lake: &'a LakeModel, config: &PpoConfig) -> Self {
        let mut env = LakeEnv::new(lake);
        let state = env.reset();
        Self {
            env,
            state,
            episode_return: 0.0,
            window: VecDeque::with_capacity(config.reward_window),
            window_size: config.reward_window,
            eval_interval: config.eval_interval,
            horizon: config.total_timesteps,
            timesteps: 0,
            episodes: 0,
            series: Vec::new(),
        }
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn episodes(&self) -> usize {
        self.episodes
    }

    pub fn series(&self) -> &RewardSeries {
        &self.series
    }

    pub fn into_series(self) -> RewardSeries {
        self.series
    }

    /// Mean return over up to the last `reward_window` completed episodes, 0
    /// before the first one completes.
    pub fn trailing_mean(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().sum::<f64>() / self.window.len() as f64
        }
    }

    /// Runs `rollout_length` steps with actions sampled from the model;
    /// episodes reset automatically.
    pub fn collect<R: Rng + ?Sized>(
        &mut self,
        model: &dyn PolicyValueModel,
        length: usize,
        rng: &mut R,
    ) -> Result<RolloutBuffer> {
        let outputs = model.forward_all()?;
        let mut buf = RolloutBuffer::default();
        for _ in 0..length {
            let out = &outputs[self.state];
            let action = sample_action(&out.action_probs, rng);
            buf.push(self.state, action, out);
            let step = self.env.step(Action::ALL[action], rng)?;
            self.episode_return += step.reward;
            buf.rewards.push(step.reward);
            buf.dones.push(step.done);
            buf.truncated.push(step.truncated);
            buf.next_values.push(if step.done { 0.0 } else { outputs[step.state].value });

            self.timesteps += 1;
            if step.done || step.truncated {
                self.finish_episode();
                self.state = self.env.reset();
            } else {
                self.state = step.state;
            }
            if self.timesteps.is_multiple_of(self.eval_interval) && self.timesteps <= self.horizon {
                self.series.push(RewardPoint {
                    step: self.timesteps,
                    reward: self.trailing_mean(),
                });
            }
        }
        Ok(buf)
    }

    fn finish_episode(&mut self) {
        if self.window.len() == self.window_size {
            self.window.pop_front();
        }
        self.window.push_back(self.episode_return);
        self.episode_return = 0.0;
        self.episodes += 1;
    }
}

pub fn sample_action<R: Rng + ?Sized>(probs: &[f64; NUM_ACTIONS], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    NUM_ACTIONS - 1
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Scales `grad` in place so its Euclidean norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / (norm + 1e-6);
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

/// Loss terms of one minibatch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Which loss terms contribute to the gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossTerms {
    pub policy: bool,
    pub value: bool,
}

impl LossTerms {
    pub const ALL: LossTerms = LossTerms {
        policy: true,
        value: true,
    };
}

/// Clipped surrogate for one sample: `min(rho A, clip(rho, 1-eps, 1+eps) A)`
/// and its derivative with respect to `rho`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> (f64, f64) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage)
    } else if ratio > 1.0 - clip_eps && ratio < 1.0 + clip_eps {
        (clipped, advantage)
    } else {
        (clipped, 0.0)
    }
}

/// Loss and parameter gradient over the samples `indices` of `buffer`, whose
/// advantages must already be in their final (possibly normalized) form.
pub fn minibatch_loss_and_grad(
    model: &dyn PolicyValueModel,
    buffer: &RolloutBuffer,
    indices: &[usize],
    config: &PpoConfig,
    terms: LossTerms,
) -> Result<(LossParts, Vec<f64>)> {
    let outputs = model.forward_all()?;
    let b = indices.len() as f64;
    let mut dlogits = [[0.0; NUM_ACTIONS]; NUM_STATES];
    let mut dvalue = [0.0; NUM_STATES];
    let mut touched = [false; NUM_STATES];
    let mut parts = LossParts::default();

    for &i in indices {
        let s = buffer.states[i];
        let a = buffer.actions[i];
        let out = &outputs[s];
        touched[s] = true;

        let log_ratio = out.log_prob(a) - buffer.log_probs[i];
        let ratio = log_ratio.exp();
        let adv = buffer.advantages[i];
        let (surrogate, dsurr_dratio) = clipped_surrogate(ratio, adv, config.clip_eps);
        parts.policy -= surrogate / b;
        parts.approx_kl += ((ratio - 1.0) - log_ratio) / b;
        if (ratio - 1.0).abs() > config.clip_eps {
            parts.clip_fraction += 1.0 / b;
        }

        let entropy = out.entropy();
        parts.entropy += entropy / b;

        let err = out.value - buffer.returns[i];
        parts.value += err * err / b;

        if terms.policy {
            // d(-surr)/dlogits = -dsurr/drho * rho * (onehot(a) - pi)
            let coeff = -dsurr_dratio * ratio / b;
            let lp = crate::models::log_softmax(&out.logits);
            for (k, d) in dlogits[s].iter_mut().enumerate() {
                let onehot = if k == a { 1.0 } else { 0.0 };
                *d += coeff * (onehot - out.action_probs[k]);
                // d(-c H)/dlogit_k = c p_k (log p_k + H)
                *d += config.entropy_coef * out.action_probs[k] * (lp[k] + entropy) / b;
            }
        }
        if terms.value {
            dvalue[s] += config.value_coef * 2.0 * err / b;
        }
    }
    parts.total = parts.policy + config.value_coef * parts.value - config.entropy_coef * parts.entropy;
    if !parts.total.is_finite() {
        return Err(Error::NonFiniteLoss {
            update: 0,
            detail: format!("{parts:?}"),
        });
    }

    let mut grad = vec![0.0; model.num_params()];
    for s in (0..NUM_STATES).filter(|&s| touched[s]) {
        let g = model.backward(s, &dlogits[s], dvalue[s])?;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    Ok((parts, grad))
}

/// Normalizes advantages to mean 0 and (population) std 1 when the spread is
/// non-zero.
pub fn normalize_advantages(buffer: &mut RolloutBuffer) {
    let n = buffer.advantages.len() as f64;
    if n < 2.0 {
        return;
    }
    let mean = buffer.advantages.iter().sum::<f64>() / n;
    let var = buffer.advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 0.0 {
        buffer.advantages.iter_mut().for_each(|a| *a = (*a - mean) / std);
    }
}

/// Mean diagnostics of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct UpdateStats {
    pub loss: LossParts,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// `epochs_per_update` passes of shuffled minibatches with Adam steps and
/// global gradient-norm clipping. Expects [`compute_gae`] to have run.
pub fn ppo_update<R: Rng + ?Sized>(
    model: &mut Model,
    buffer: &mut RolloutBuffer,
    config: &PpoConfig,
    optimizer: &mut Adam,
    rng: &mut R,
) -> Result<UpdateStats> {
    if buffer.advantages.len() != buffer.len() {
        return Err(Error::Config("advantages missing; run compute_gae first".into()));
    }
    if config.normalize_advantage {
        normalize_advantages(buffer);
    }
    let mut order: Vec<usize> = (0..buffer.len()).collect();
    let mut stats = UpdateStats::default();
    for _ in 0..config.epochs_per_update {
        order.shuffle(rng);
        for chunk in order.chunks(config.minibatch_size) {
            let (parts, mut grad) =
                minibatch_loss_and_grad(model, buffer, chunk, config, LossTerms::ALL)?;
            let norm = clip_grad_norm(&mut grad, config.max_grad_norm);
            if !norm.is_finite() {
                return Err(Error::NonFiniteLoss {
                    update: stats.minibatches,
                    detail: "gradient norm is not finite".into(),
                });
            }
            optimizer.step(model.params_mut(), &grad);
            stats.minibatches += 1;
            stats.grad_norm += norm;
            stats.loss.policy += parts.policy;
            stats.loss.value += parts.value;
            stats.loss.entropy += parts.entropy;
            stats.loss.total += parts.total;
            stats.loss.clip_fraction += parts.clip_fraction;
            stats.loss.approx_kl += parts.approx_kl;
        }
    }
    let k = stats.minibatches.max(1) as f64;
    stats.grad_norm /= k;
    stats.loss.policy /= k;
    stats.loss.value /= k;
    stats.loss.entropy /= k;
    stats.loss.total /= k;
    stats.loss.clip_fraction /= k;
    stats.loss.approx_kl /= k;
    Ok(stats)
}

/// Result of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub spec: ModelSpec,
    pub config: PpoConfig,
    pub series: RewardSeries,
    pub model: Model,
    pub episodes: usize,
    pub updates: usize,
}

/// Trains `spec` from a seeded initialization until `total_timesteps`
/// environment steps have been collected.
pub fn train(spec: ModelSpec, config: &PpoConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let lake = config.lake()?;
    let mut model = Model::init(spec, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut optimizer = Adam::new(model.num_params(), config.learning_rate, config.adam_eps);
    let mut collector = RolloutCollector::new(&lake, config);
    let mut updates = 0;
    while collector.timesteps() < config.total_timesteps {
        let mut buffer = collector.collect(&model, config.rollout_length, &mut rng)?;
        compute_gae(&mut buffer, config.gamma, config.gae_lambda);
        ppo_update(&mut model, &mut buffer, config, &mut optimizer, &mut rng).map_err(|e| match e {
            Error::NonFiniteLoss { detail, .. } => Error::NonFiniteLoss {
                update: updates,
                detail,
            },
            other => other,
        })?;
        updates += 1;
    }
    let episodes = collector.episodes();
    Ok(TrainOutcome {
        spec,
        config: config.clone(),
        series: collector.into_series(),
        model,
        episodes,
        updates,
    })
}

/// `step,reward` CSV with shortest round-trip float formatting.
pub fn rewards_csv(series: &[RewardPoint]) -> String {
    let mut out = String::from("step,reward\n");
    for p in series {
        out.push_str(&format!("{},{}\n", p.step, p.reward));
    }
    out
}

pub fn parse_rewards_csv(text: &str) -> Result<RewardSeries> {
    let mut lines = text.lines();
    match lines.next() {
        Some("step,reward") => {}
        other => return Err(Error::Config(format!("bad rewards.csv header {other:?}"))),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (s, r) = l
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("bad rewards.csv row {l:?}")))?;
            Ok(RewardPoint {
                step: s.trim().parse().map_err(|_| Error::Config(format!("bad step {s:?}")))?,
                reward: r.trim().parse().map_err(|_| Error::Config(format!("bad reward {r:?}")))?,
            })
        })
        .collect()
}

pub(crate) fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

impl TrainOutcome {
    /// Writes `config.snapshot`, `rewards.csv` and `checkpoint.json`.
    pub fn write_run_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_atomic(&dir.join("config.snapshot"), &self.config.snapshot())?;
        write_atomic(&dir.join("checkpoint.json"), &self.model.to_checkpoint().to_json())?;
        write_atomic(&dir.join("rewards.csv"), &rewards_csv(&self.series))?;
        Ok(())
    }
}
