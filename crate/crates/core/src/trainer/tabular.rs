//! Tabular Q-learning on a small deterministic chain, used to check that
//! potential-based shaping leaves the greedy policy unchanged.

use rand::Rng as _;

use crate::rng::{rng_from, Stream};

/// States `0..len`; the last one is an absorbing goal. Action 0 moves
/// left (staying put at 0), action 1 moves right. Every move costs 1;
/// staying at state 0 via "left" pays `rest_bonus` instead.
#[derive(Debug, Clone)]
pub struct ChainMdp {
    pub len: usize,
    pub rest_bonus: f64,
}

impl ChainMdp {
    pub fn five() -> Self {
        Self { len: 5, rest_bonus: -0.5 }
    }

    pub fn goal(&self) -> usize {
        self.len - 1
    }

    /// `(next state, reward)`.
    pub fn step(&self, s: usize, a: usize) -> (usize, f64) {
        match (s, a) {
            (0, 0) => (0, self.rest_bonus),
            (_, 0) => (s - 1, -1.0),
            _ => (s + 1, -1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TabularConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub episodes: usize,
    pub max_steps: usize,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self { gamma: 0.9, alpha: 0.2, epsilon: 0.3, episodes: 3000, max_steps: 50 }
    }
}

/// Q-learning from uniformly random start states. With `potential`, the
/// reward gains `γ φ(s') - φ(s)` (goal potential taken as 0). Returns the
/// learned table.
pub fn q_learning(mdp: &ChainMdp, cfg: &TabularConfig, potential: Option<&[f64]>, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = rng_from(seed, Stream::Exploration, 0);
    let mut q = vec![[0.0; 2]; mdp.len];
    let phi = |s: usize| match potential {
        Some(p) if s != mdp.goal() => p[s],
        _ => 0.0,
    };
    for _ in 0..cfg.episodes {
        let mut s = rng.gen_range(0..mdp.goal());
        for _ in 0..cfg.max_steps {
            let a = if rng.gen::<f64>() < cfg.epsilon { rng.gen_range(0..2) } else { greedy(&q[s]) };
            let (next, r) = mdp.step(s, a);
            let shaped = r + cfg.gamma * phi(next) - phi(s);
            let bootstrap = if next == mdp.goal() { 0.0 } else { q[next][0].max(q[next][1]) };
            q[s][a] += cfg.alpha * (shaped + cfg.gamma * bootstrap - q[s][a]);
            if next == mdp.goal() {
                break;
            }
            s = next;
        }
    }
    q
}

pub fn greedy(row: &[f64; 2]) -> usize {
    usize::from(row[1] > row[0])
}

/// Greedy action in each non-goal state.
pub fn greedy_policy(q: &[[f64; 2]]) -> Vec<usize> {
    q[..q.len() - 1].iter().map(greedy).collect()
}

/// Exact optimal policy by value iteration.
pub fn optimal_policy(mdp: &ChainMdp, gamma: f64) -> Vec<usize> {
    let mut v = vec![0.0; mdp.len];
    for _ in 0..10_000 {
        let mut next_v = v.clone();
        for s in 0..mdp.goal() {
            next_v[s] = (0..2)
                .map(|a| {
                    let (n, r) = mdp.step(s, a);
                    r + gamma * if n == mdp.goal() { 0.0 } else { v[n] }
                })
                .fold(f64::NEG_INFINITY, f64::max);
        }
        v = next_v;
    }
    (0..mdp.goal())
        .map(|s| {
            let q: Vec<f64> = (0..2)
                .map(|a| {
                    let (n, r) = mdp.step(s, a);
                    r + gamma * if n == mdp.goal() { 0.0 } else { v[n] }
                })
                .collect();
            usize::from(q[1] > q[0])
        })
        .collect()
}
