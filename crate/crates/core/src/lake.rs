//! Slippery FrozenLake as an explicit tabular MDP.
//!
//! The agent moves in the intended direction with probability
//! `1 - slip_prob` and to each of the two orthogonal directions with
//! probability `slip_prob / 2`. Moves off the grid leave it in place. Holes
//! and the goal are absorbing; entering the goal pays 1, everything else 0.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAP: &str = "SFFF/FHFH/FFFH/HFFG";
pub const DEFAULT_SLIP: f64 = 0.2;
pub const DEFAULT_MAX_EPISODE_STEPS: usize = 100;
pub const NUM_ACTIONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tile {
    Start,
    Frozen,
    Hole,
    Goal,
}

impl Tile {
    fn from_char(c: char) -> Option<Self> {
        match c {
            'S' => Some(Tile::Start),
            'F' => Some(Tile::Frozen),
            'H' => Some(Tile::Hole),
            'G' => Some(Tile::Goal),
            _ => None,
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Tile::Hole | Tile::Goal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Left = 0,
    Down = 1,
    Right = 2,
    Up = 3,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [Action::Left, Action::Down, Action::Right, Action::Up];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// The two directions a slip can divert this action into.
    pub fn orthogonal(self) -> [Action; 2] {
        let i = self.index();
        [
            Self::ALL[(i + NUM_ACTIONS - 1) % NUM_ACTIONS],
            Self::ALL[(i + 1) % NUM_ACTIONS],
        ]
    }

    pub fn arrow(self) -> char {
        match self {
            Action::Left => '←',
            Action::Down => '↓',
            Action::Right => '→',
            Action::Up => '↑',
        }
    }
}

/// Rectangular tile grid, row-major; state index = `row * cols + col`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LakeMap {
    tiles: Vec<Tile>,
    rows: usize,
    cols: usize,
}

impl FromStr for LakeMap {
    type Err = Error;

    /// Rows separated by `/`, e.g. `SFFF/FHFH/FFFH/HFFG`.
    fn from_str(s: &str) -> Result<Self> {
        let rows: Vec<&str> = s.split('/').map(str::trim).collect();
        let cols = rows.first().map_or(0, |r| r.chars().count());
        if cols == 0 || rows.iter().any(|r| r.chars().count() != cols) {
            return Err(Error::MalformedMap(format!("ragged or empty rows in {s:?}")));
        }
        let tiles = rows
            .iter()
            .flat_map(|r| r.chars())
            .map(|c| Tile::from_char(c).ok_or_else(|| Error::MalformedMap(format!("bad tile {c:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let count = |t: Tile| tiles.iter().filter(|&&x| x == t).count();
        if count(Tile::Start) != 1 || count(Tile::Goal) != 1 {
            return Err(Error::MalformedMap(
                "map needs exactly one S and one G".into(),
            ));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            tiles,
        })
    }
}

impl fmt::Display for LakeMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            if r > 0 {
                f.write_str("/")?;
            }
            for c in 0..self.cols {
                let ch = match self.tiles[r * self.cols + c] {
                    Tile::Start => 'S',
                    Tile::Frozen => 'F',
                    Tile::Hole => 'H',
                    Tile::Goal => 'G',
                };
                write!(f, "{ch}")?;
            }
        }
        Ok(())
    }
}

impl LakeMap {
    pub fn num_states(&self) -> usize {
        self.tiles.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tile(&self, state: usize) -> Tile {
        self.tiles[state]
    }

    fn shift(&self, state: usize, dir: Action) -> usize {
        let (r, c) = (state / self.cols, state % self.cols);
        let (r, c) = match dir {
            Action::Left => (r, c.saturating_sub(1)),
            Action::Down => ((r + 1).min(self.rows - 1), c),
            Action::Right => (r, (c + 1).min(self.cols - 1)),
            Action::Up => (r.saturating_sub(1), c),
        };
        r * self.cols + c
    }
}

/// The MDP: tiles, slip probability and an explicit `P(s' | s, a)` table.
#[derive(Debug, Clone)]
pub struct LakeModel {
    map: LakeMap,
    slip_prob: f64,
    transition: Vec<f64>,
    pub max_episode_steps: usize,
    start: usize,
}

pub fn build_model(map: &LakeMap, slip_prob: f64) -> Result<LakeModel> {
    if !(0.0..1.0).contains(&slip_prob) {
        return Err(Error::Domain(format!(
            "slip probability {slip_prob} outside [0, 1)"
        )));
    }
    let n = map.num_states();
    let mut transition = vec![0.0; n * NUM_ACTIONS * n];
    for s in 0..n {
        for a in Action::ALL {
            let row = &mut transition[(s * NUM_ACTIONS + a.index()) * n..][..n];
            if map.tile(s).is_terminal() {
                row[s] = 1.0;
                continue;
            }
            row[map.shift(s, a)] += 1.0 - slip_prob;
            for o in a.orthogonal() {
                row[map.shift(s, o)] += slip_prob / 2.0;
            }
        }
    }
    let start = (0..n)
        .find(|&s| map.tile(s) == Tile::Start)
        .expect("validated map has a start");
    Ok(LakeModel {
        map: map.clone(),
        slip_prob,
        transition,
        max_episode_steps: DEFAULT_MAX_EPISODE_STEPS,
        start,
    })
}

impl LakeModel {
    /// The standard 4x4 map with the given slip probability.
    pub fn standard(slip_prob: f64) -> Result<Self> {
        build_model(&DEFAULT_MAP.parse()?, slip_prob)
    }

    pub fn with_max_episode_steps(mut self, steps: usize) -> Self {
        self.max_episode_steps = steps;
        self
    }

    pub fn map(&self) -> &LakeMap {
        &self.map
    }

    pub fn slip_prob(&self) -> f64 {
        self.slip_prob
    }

    pub fn num_states(&self) -> usize {
        self.map.num_states()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.map.tile(state).is_terminal()
    }

    /// Reward for entering `next`.
    pub fn reward(&self, next: usize) -> f64 {
        if self.map.tile(next) == Tile::Goal {
            1.0
        } else {
            0.0
        }
    }

    /// `P(. | state, action)`.
    pub fn transition_row(&self, state: usize, action: Action) -> &[f64] {
        let n = self.num_states();
        &self.transition[(state * NUM_ACTIONS + action.index()) * n..][..n]
    }

    /// Samples the successor of a non-terminal state.
    pub fn sample_next<R: Rng + ?Sized>(
        &self,
        state: usize,
        action: Action,
        rng: &mut R,
    ) -> Result<usize> {
        if state >= self.num_states() {
            return Err(Error::StateOutOfRange(state));
        }
        if self.is_terminal(state) {
            return Err(Error::EpisodeContract(format!(
                "stepping from terminal state {state}"
            )));
        }
        let row = self.transition_row(state, action);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = state;
        for (next, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            acc += p;
            last = next;
            if u < acc {
                return Ok(next);
            }
        }
        Ok(last)
    }
}

/// One environment transition as seen by the agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStep {
    /// State after the move.
    pub state: usize,
    pub action: Action,
    pub reward: f64,
    /// Entered a hole or the goal.
    pub done: bool,
    /// Hit the step budget without terminating.
    pub truncated: bool,
}

/// Episodic wrapper that tracks the current state and the step budget.
#[derive(Debug, Clone)]
pub struct LakeEnv<'a> {
    model: &'a LakeModel,
    state: usize,
    steps: usize,
    finished: bool,
}

impl<'a> LakeEnv<'a> {
    pub fn new(model: &'a LakeModel) -> Self {
        Self {
            model,
            state: model.start(),
            steps: 0,
            finished: false,
        }
    }

    pub fn model(&self) -> &'a LakeModel {
        self.model
    }

    pub fn reset(&mut self) -> usize {
        self.state = self.model.start();
        self.steps = 0;
        self.finished = false;
        self.state
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn step<R: Rng + ?Sized>(&mut self, action: Action, rng: &mut R) -> Result<EpisodeStep> {
        if self.finished {
            return Err(Error::EpisodeContract(
                "episode already ended; call reset".into(),
            ));
        }
        let next = self.model.sample_next(self.state, action, rng)?;
        self.steps += 1;
        self.state = next;
        let done = self.model.is_terminal(next);
        let truncated = !done && self.steps >= self.model.max_episode_steps;
        self.finished = done || truncated;
        Ok(EpisodeStep {
            state: next,
            action,
            reward: self.model.reward(next),
            done,
            truncated,
        })
    }
}

/// Stationary deterministic policy, one action per state.
pub type Policy = Vec<Action>;

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub values: Vec<f64>,
    pub policy: Policy,
    pub sweeps: usize,
    pub gamma: f64,
}

pub const VALUE_ITERATION_MAX_SWEEPS: usize = 1_000_000;

fn q_value(model: &LakeModel, values: &[f64], gamma: f64, s: usize, a: Action) -> f64 {
    model
        .transition_row(s, a)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(next, &p)| p * (model.reward(next) + gamma * values[next]))
        .sum()
}

/// Bellman optimality sweeps until the sup-norm change drops below `tol`.
///
/// With `gamma = 1` the values are optimal success probabilities over an
/// unbounded horizon; the greedy policy extracted in that case may idle on
/// ties, so use `gamma < 1` when the policy itself is needed.
pub fn value_iteration(model: &LakeModel, gamma: f64, tol: f64) -> Result<ValueSolution> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma {gamma} outside (0, 1]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance {tol} must be positive")));
    }
    let n = model.num_states();
    let mut values = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for sweep in 1..=VALUE_ITERATION_MAX_SWEEPS {
        residual = 0.0f64;
        for s in 0..n {
            next[s] = if model.is_terminal(s) {
                0.0
            } else {
                Action::ALL
                    .iter()
                    .map(|&a| q_value(model, &values, gamma, s, a))
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            residual = residual.max((next[s] - values[s]).abs());
        }
        std::mem::swap(&mut values, &mut next);
        if residual < tol {
            let policy = greedy_policy(model, &values, gamma);
            return Ok(ValueSolution {
                values,
                policy,
                sweeps: sweep,
                gamma,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: VALUE_ITERATION_MAX_SWEEPS,
        residual,
    })
}

/// First action attaining the maximal Q-value (ties within 1e-12 go to the
/// lower action index).
pub fn greedy_policy(model: &LakeModel, values: &[f64], gamma: f64) -> Policy {
    (0..model.num_states())
        .map(|s| {
            let mut best = (Action::Left, f64::NEG_INFINITY);
            for a in Action::ALL {
                let q = q_value(model, values, gamma, s, a);
                if q > best.1 + 1e-12 {
                    best = (a, q);
                }
            }
            best.0
        })
        .collect()
}

/// Exact probability of reaching the goal from every state when following
/// `policy` for at most `horizon` steps.
pub fn success_probability(model: &LakeModel, policy: &[Action], horizon: usize) -> Vec<f64> {
    let n = model.num_states();
    let mut p = vec![0.0; n];
    for _ in 0..horizon {
        p = (0..n)
            .map(|s| {
                if model.is_terminal(s) {
                    0.0
                } else {
                    q_value(model, &p, 1.0, s, policy[s])
                }
            })
            .collect();
    }
    p
}

/// Mean episode return of `policy` over `episodes` seeded rollouts, with the
/// model's step budget.
pub fn monte_carlo_mean_reward(
    model: &LakeModel,
    policy: &[Action],
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if episodes == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut env = LakeEnv::new(model);
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut s = env.reset();
        if model.is_terminal(s) {
            continue;
        }
        loop {
            let step = env.step(policy[s], &mut rng)?;
            total += step.reward;
            if step.done || step.truncated {
                break;
            }
            s = step.state;
        }
    }
    Ok(total / episodes as f64)
}

/// How the reward threshold is derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    /// Discount used to obtain the control policy.
    pub gamma: f64,
    pub episodes: usize,
    pub seed: u64,
    /// Fraction of the optimal mean reward that counts as solved.
    pub scale: f64,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            episodes: 1000,
            seed: 0,
            scale: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub policy: Policy,
    pub optimal_mean: f64,
    pub threshold: f64,
    pub options: ThresholdOptions,
}

pub fn reward_threshold(model: &LakeModel) -> Result<ThresholdReport> {
    reward_threshold_with(model, ThresholdOptions::default())
}

/// Rolls out the greedy policy of a discounted solve and scales its mean
/// episode reward.
pub fn reward_threshold_with(model: &LakeModel, options: ThresholdOptions) -> Result<ThresholdReport> {
    let solution = value_iteration(model, options.gamma, 1e-12)?;
    let optimal_mean =
        monte_carlo_mean_reward(model, &solution.policy, options.episodes, options.seed)?;
    Ok(ThresholdReport {
        policy: solution.policy,
        optimal_mean,
        threshold: options.scale * optimal_mean,
        options,
    })
}

/// Renders a policy as a grid of arrows; terminal tiles show their letter.
pub fn policy_grid(model: &LakeModel, policy: &[Action]) -> String {
    let map = model.map();
    let mut out = String::new();
    for r in 0..map.rows() {
        for c in 0..map.cols() {
            let s = r * map.cols() + c;
            let ch = match map.tile(s) {
                Tile::Hole => 'H',
                Tile::Goal => 'G',
                _ => policy[s].arrow(),
            };
            out.push(ch);
            if c + 1 < map.cols() {
                out.push(' ');
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn standard(slip: f64) -> LakeModel {
        LakeModel::standard(slip).unwrap()
    }

    #[test]
    fn map_round_trips_and_rejects_garbage() {
        let m: LakeMap = DEFAULT_MAP.parse().unwrap();
        assert_eq!(m.to_string(), DEFAULT_MAP);
        let holes: Vec<usize> = (0..16).filter(|&s| m.tile(s) == Tile::Hole).collect();
        assert_eq!(holes, vec![5, 7, 11, 12]);
        assert!("SFFF/FHF/FFFH/HFFG".parse::<LakeMap>().is_err());
        assert!("SFFF/FHFH/FFFH/HFFF".parse::<LakeMap>().is_err());
        assert!("SFFS/FHFH/FFFH/HFFG".parse::<LakeMap>().is_err());
        assert!("SFFX/FHFH/FFFH/HFFG".parse::<LakeMap>().is_err());
        assert!(build_model(&m, 1.0).is_err());
        assert!(build_model(&m, -0.1).is_err());
    }

    #[test]
    fn deterministic_rows() {
        let m = standard(0.0);
        let row = m.transition_row(0, Action::Right);
        assert_eq!(row[1], 1.0);
        assert_eq!(row.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn slip_rows_match_hand_derivation() {
        let m = standard(0.2);
        let row = m.transition_row(14, Action::Right);
        assert_abs_diff_eq!(row[15], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(row[10], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(row[14], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-12);

        let row = m.transition_row(9, Action::Up);
        assert_abs_diff_eq!(row[5], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(row[8], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(row[10], 0.1, epsilon = 1e-12);
    }

    #[test]
    fn rows_are_stochastic_with_expected_support() {
        let m = standard(0.2);
        let allowed = [0.0, 0.1, 0.2, 0.8, 0.9, 1.0];
        for s in 0..16 {
            for a in Action::ALL {
                let row = m.transition_row(s, a);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for &p in row {
                    assert!(
                        allowed.iter().any(|&q| (p - q).abs() < 1e-12),
                        "P({s},{a:?}) has {p}"
                    );
                }
            }
        }
        // Terminal rows are absorbing.
        for s in [5, 7, 11, 12, 15] {
            assert_eq!(m.transition_row(s, Action::Up)[s], 1.0);
        }
    }

    #[test]
    fn stepping_into_hole_and_goal() {
        let m = standard(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut env = LakeEnv::new(&m);
        let step = env.step(Action::Down, &mut rng).unwrap();
        assert_eq!(step.state, 4);
        let step = env.step(Action::Right, &mut rng).unwrap();
        assert_eq!((step.state, step.reward, step.done), (5, 0.0, true));
        assert!(matches!(
            env.step(Action::Right, &mut rng),
            Err(Error::EpisodeContract(_))
        ));

        env.reset();
        let path = [
            Action::Down,
            Action::Down,
            Action::Right,
            Action::Down,
            Action::Right,
            Action::Right,
        ];
        let mut last = None;
        for a in path {
            last = Some(env.step(a, &mut rng).unwrap());
        }
        let last = last.unwrap();
        assert_eq!((last.state, last.reward, last.done), (15, 1.0, true));
    }

    #[test]
    fn budget_truncates_wandering_episode() {
        let m = standard(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut env = LakeEnv::new(&m);
        for i in 1..=100 {
            let step = env.step(Action::Left, &mut rng).unwrap();
            assert_eq!(step.reward, 0.0);
            assert!(!step.done);
            assert_eq!(step.truncated, i == 100);
        }
        assert!(env.step(Action::Left, &mut rng).is_err());
    }

    #[test]
    fn sample_next_rejects_terminal_state() {
        let m = standard(0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(m.sample_next(5, Action::Left, &mut rng).is_err());
        assert!(m.sample_next(16, Action::Left, &mut rng).is_err());
    }

    #[test]
    fn deterministic_lake_is_solvable() {
        let sol = value_iteration(&standard(0.0), 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(sol.values[0], 1.0, epsilon = 1e-12);
        for s in [5, 7, 11, 12, 15] {
            assert_eq!(sol.values[s], 0.0);
        }
    }

    #[test]
    fn undiscounted_slippery_value() {
        // Frozen from an independent numpy value-iteration run.
        let sol = value_iteration(&standard(0.2), 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(sol.values[0], 0.996_927_803_3, epsilon = 1e-8);
        for s in [5, 7, 11, 12] {
            assert_eq!(sol.values[s], 0.0);
        }
    }

    #[test]
    fn discounted_policy_success_under_step_cap() {
        // Frozen from the same numpy oracle: greedy policy of the gamma=0.99
        // solve, exact success probability within 100 steps.
        let m = standard(0.2);
        let sol = value_iteration(&m, 0.99, 1e-12).unwrap();
        let p = success_probability(&m, &sol.policy, 100);
        assert_abs_diff_eq!(p[0], 0.856_882_141_9, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.values[0], 0.716_322_637_7, epsilon = 1e-8);
    }

    #[test]
    fn value_is_monotone_in_slip() {
        let v: Vec<f64> = [0.0, 0.1, 0.2, 2.0 / 3.0]
            .iter()
            .map(|&p| value_iteration(&standard(p), 1.0, 1e-12).unwrap().values[0])
            .collect();
        for w in v.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{v:?}");
        }
    }

    #[test]
    fn bad_gamma_is_rejected() {
        assert!(value_iteration(&standard(0.2), 0.0, 1e-9).is_err());
        assert!(value_iteration(&standard(0.2), 1.1, 1e-9).is_err());
    }

    #[test]
    fn threshold_examples() {
        let det = reward_threshold(&standard(0.0)).unwrap();
        assert_eq!(det.optimal_mean, 1.0);
        assert_abs_diff_eq!(det.threshold, 0.95, epsilon = 1e-12);

        let trapped: LakeMap = "SHHH/HHHH/HHHH/HHHG".parse().unwrap();
        let trapped = build_model(&trapped, 0.2).unwrap();
        assert_eq!(reward_threshold(&trapped).unwrap().threshold, 0.0);
    }

    #[test]
    fn policy_grid_has_arrows_and_letters() {
        let m = standard(0.2);
        let sol = value_iteration(&m, 0.99, 1e-12).unwrap();
        let grid = policy_grid(&m, &sol.policy);
        assert_eq!(grid.lines().count(), 4);
        assert!(grid.lines().last().unwrap().ends_with('G'));
    }
}
