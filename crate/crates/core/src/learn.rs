//! Tabular learning machinery and the exact dynamic-programming oracle.
//!
//! Reward convention: a finite MDP carries one reward per state, collected on
//! *entering* that state. Terminal states absorb and contribute no further
//! value, so
//!
//! ```text
//! V(s) = r(s)                                   s terminal
//! V(s) = r(s) + γ max_a Σ_s' P(s'|s,a) V(s')    otherwise
//! Q(s,a) = Σ_s' P(s'|s,a) V(s')
//! ```
//!
//! `Q` is exactly the fixed point of one-step Q-learning whose transition
//! reward is the entry reward of the next state.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::LearnerConfig;
use crate::error::{Error, Result};
use crate::perception::argmax;
use crate::seed;

/// Dense action-value table with per-entry visit counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    states: usize,
    actions: usize,
    values: Vec<f64>,
    visits: Vec<u32>,
}

impl QTable {
    pub fn new(states: usize, actions: usize) -> Result<Self> {
        if states == 0 || actions == 0 {
            return Err(Error::Empty("q-table dimension"));
        }
        Ok(QTable {
            states,
            actions,
            values: vec![0.0; states * actions],
            visits: vec![0; states * actions],
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    fn check(&self, state: usize, action: usize) -> Result<usize> {
        if state >= self.states {
            return Err(Error::out_of_range(
                "state index",
                state,
                format!("[0, {})", self.states),
            ));
        }
        if action >= self.actions {
            return Err(Error::out_of_range(
                "action index",
                action,
                format!("[0, {})", self.actions),
            ));
        }
        Ok(state * self.actions + action)
    }

    pub fn get(&self, state: usize, action: usize) -> Result<f64> {
        Ok(self.values[self.check(state, action)?])
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) -> Result<()> {
        let i = self.check(state, action)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn row(&self, state: usize) -> Result<&[f64]> {
        self.check(state, 0)?;
        Ok(&self.values[state * self.actions..(state + 1) * self.actions])
    }

    pub fn visits(&self, state: usize, action: usize) -> Result<u32> {
        Ok(self.visits[self.check(state, action)?])
    }

    /// Count one more visit to `(state, action)` and return the new count.
    pub fn visit(&mut self, state: usize, action: usize) -> Result<u32> {
        let i = self.check(state, action)?;
        self.visits[i] = self.visits[i].saturating_add(1);
        Ok(self.visits[i])
    }

    /// Greedy action; lowest index wins ties.
    pub fn greedy(&self, state: usize) -> Result<usize> {
        Ok(argmax(self.row(state)?))
    }

    pub fn max_value(&self, state: usize) -> Result<f64> {
        Ok(self.row(state)?.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Text form: `states actions` header, then one row of values per state.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.states, self.actions);
        for s in 0..self.states {
            let row: Vec<String> = self.values[s * self.actions..(s + 1) * self.actions]
                .iter()
                .map(|v| format!("{v:?}"))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    /// Parse [`to_text`](Self::to_text) output. Visit counts start at zero.
    pub fn from_text(text: &str, source: &str) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| err(1, format!("bad header: {e}")))?;
        let [states, actions] = dims[..] else {
            return Err(err(1, "header must be `states actions`".into()));
        };
        let mut table = QTable::new(states, actions)?;
        for s in 0..states {
            let (no, line) = lines
                .next()
                .ok_or_else(|| err(s + 2, format!("missing row {s}")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(no + 1, format!("bad number: {e}")))?;
            if row.len() != actions || row.iter().any(|v| !v.is_finite()) {
                return Err(err(no + 1, format!("expected {actions} finite values")));
            }
            table.values[s * actions..(s + 1) * actions].copy_from_slice(&row);
        }
        if let Some((no, _)) = lines.next() {
            return Err(err(no + 1, "trailing data".into()));
        }
        Ok(table)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string())
    }
}

/// One-step Q-learning:
/// `Q(s,a) += α (r + γ max_a' Q(s',a') (1 - done) - Q(s,a))`.
#[allow(clippy::too_many_arguments)]
pub fn q_update(
    table: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next_state: usize,
    done: bool,
    alpha: f64,
    gamma: f64,
) -> Result<()> {
    let i = table.check(state, action)?;
    let bootstrap = if done {
        table.check(next_state, 0)?;
        0.0
    } else {
        gamma * table.max_value(next_state)?
    };
    let current = table.values[i];
    table.values[i] = current + alpha * (reward + bootstrap - current);
    Ok(())
}

/// Visit-counting wrapper used by the loops: bumps the visit count and uses
/// the step size of `config`'s schedule.
pub fn learn_step(
    table: &mut QTable,
    config: &LearnerConfig,
    state: usize,
    action: usize,
    reward: f64,
    next_state: usize,
    done: bool,
) -> Result<()> {
    let visits = table.visit(state, action)?;
    q_update(
        table,
        state,
        action,
        reward,
        next_state,
        done,
        config.step_size(visits),
        config.gamma,
    )
}

/// ε-greedy choice over `row`: with probability ε a uniform draw over all
/// entries, otherwise the greedy (lowest-index) entry.
pub fn epsilon_greedy(row: &[f64], epsilon: f64, seed: u64) -> usize {
    let mut rng = seed::rng(seed);
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..row.len())
    } else {
        argmax(row)
    }
}

/// Explicit finite MDP with per-state entry rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMdp {
    pub states: usize,
    pub actions: usize,
    /// `P(s'|s,a)` at `(s * actions + a) * states + s'`.
    pub transitions: Vec<f64>,
    /// Reward collected on entering each state.
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
    pub start: usize,
}

impl FiniteMdp {
    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[(s * self.actions + a) * self.states + next]
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.actions + a) * self.states;
        &self.transitions[base..base + self.states]
    }

    pub fn validate(&self) -> Result<()> {
        if self.states == 0 || self.actions == 0 {
            return Err(Error::Empty("mdp"));
        }
        if self.transitions.len() != self.states * self.actions * self.states {
            return Err(Error::DimensionMismatch {
                context: "transition table",
                expected: self.states * self.actions * self.states,
                actual: self.transitions.len(),
            });
        }
        if self.rewards.len() != self.states || self.terminal.len() != self.states {
            return Err(Error::DimensionMismatch {
                context: "reward or terminal table",
                expected: self.states,
                actual: self.rewards.len().min(self.terminal.len()),
            });
        }
        if self.start >= self.states {
            return Err(Error::out_of_range("start state", self.start, "state range"));
        }
        for s in 0..self.states {
            for a in 0..self.actions {
                let row = self.row(s, a);
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
                    return Err(Error::NotStochastic {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }
        Ok(())
    }

    /// Sample a successor with a uniform draw `u` in [0, 1).
    pub fn sample_next(&self, s: usize, a: usize, u: f64) -> usize {
        let mut acc = 0.0;
        for (next, p) in self.row(s, a).iter().enumerate() {
            acc += p;
            if u < acc {
                return next;
            }
        }
        // Rounding left `u` just above the accumulated mass.
        self.row(s, a)
            .iter()
            .rposition(|&p| p > 0.0)
            .unwrap_or(self.states - 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration {
    pub values: Vec<f64>,
    /// `Q(s,a)` at `s * actions + a`.
    pub q_values: Vec<f64>,
    /// Greedy action per state, lowest index on ties.
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// Max-norm change of each sweep.
    pub deltas: Vec<f64>,
}

impl ValueIteration {
    pub fn q(&self, s: usize, a: usize) -> f64 {
        let actions = self.q_values.len() / self.values.len();
        self.q_values[s * actions + a]
    }
}

const MAX_SWEEPS: usize = 100_000;

/// Synchronous Bellman backups from `V = 0` until the max-norm change of a
/// sweep drops below `tolerance`.
pub fn value_iteration(mdp: &FiniteMdp, gamma: f64, tolerance: f64) -> Result<ValueIteration> {
    mdp.validate()?;
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::out_of_range("gamma", gamma, "[0, 1)"));
    }
    if !(tolerance > 0.0) {
        return Err(Error::out_of_range("tolerance", tolerance, "(0, inf)"));
    }
    let (n, m) = (mdp.states, mdp.actions);
    let mut values = vec![0.0; n];
    let mut q = vec![0.0; n * m];
    let mut deltas = Vec::new();
    loop {
        for s in 0..n {
            for a in 0..m {
                q[s * m + a] = mdp.row(s, a).iter().zip(&values).map(|(p, v)| p * v).sum();
            }
        }
        let next: Vec<f64> = (0..n)
            .map(|s| {
                if mdp.terminal[s] {
                    mdp.rewards[s]
                } else {
                    let best = q[s * m..(s + 1) * m]
                        .iter()
                        .copied()
                        .fold(f64::NEG_INFINITY, f64::max);
                    mdp.rewards[s] + gamma * best
                }
            })
            .collect();
        let delta = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        deltas.push(delta);
        if delta < tolerance || deltas.len() >= MAX_SWEEPS {
            break;
        }
    }
    for s in 0..n {
        for a in 0..m {
            q[s * m + a] = mdp.row(s, a).iter().zip(&values).map(|(p, v)| p * v).sum();
        }
    }
    let policy = (0..n)
        .map(|s| if mdp.terminal[s] { 0 } else { argmax(&q[s * m..(s + 1) * m]) })
        .collect();
    Ok(ValueIteration {
        values,
        q_values: q,
        policy,
        iterations: deltas.len(),
        deltas,
    })
}

/// The three-state, two-action fixture used by convergence tests.
///
/// ```text
/// state 0 (start)   a0: -> 2 w.p. 0.4, -> 1 w.p. 0.6
///                   a1: -> 1 w.p. 0.8, -> 0 w.p. 0.2
/// state 1           a0: -> 2 w.p. 1
///                   a1: -> 0 w.p. 1
/// state 2 (goal)    terminal
/// entry rewards     (-0.5, 0, 1)
/// ```
///
/// At γ = 0.9: `V = (0.346, 0.9, 1)`, optimal policy `(0, 0)`.
pub fn toy_mdp_fixture() -> FiniteMdp {
    #[rustfmt::skip]
    let transitions = vec![
        0.0, 0.6, 0.4,   0.2, 0.8, 0.0,
        0.0, 0.0, 1.0,   1.0, 0.0, 0.0,
        0.0, 0.0, 1.0,   0.0, 0.0, 1.0,
    ];
    FiniteMdp {
        states: 3,
        actions: 2,
        transitions,
        rewards: vec![-0.5, 0.0, 1.0],
        terminal: vec![false, false, true],
        start: 0,
    }
}

/// Run `episodes` of ε-greedy Q-learning directly on `mdp` from its start
/// state, capping each episode at `max_steps` (a capped episode bootstraps).
pub fn q_learning(
    mdp: &FiniteMdp,
    config: &LearnerConfig,
    episodes: usize,
    max_steps: usize,
    seed: u64,
) -> Result<QTable> {
    mdp.validate()?;
    config.validate()?;
    let mut table = QTable::new(mdp.states, mdp.actions)?;
    let mut rng = seed::rng(seed);
    for _ in 0..episodes {
        let mut s = mdp.start;
        for _ in 0..max_steps {
            let a = if rng.random::<f64>() < config.epsilon {
                rng.random_range(0..mdp.actions)
            } else {
                table.greedy(s)?
            };
            let next = mdp.sample_next(s, a, rng.random::<f64>());
            let done = mdp.terminal[next];
            learn_step(&mut table, config, s, a, mdp.rewards[next], next, done)?;
            s = next;
            if done {
                break;
            }
        }
    }
    Ok(table)
}
