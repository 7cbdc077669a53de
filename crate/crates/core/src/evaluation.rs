//! Expected discounted utilities: exact (linear solve and determinant ratio)
//! and empirical (seeded rollouts).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{
    action_in, check_profile, fill_transition, initial_distribution_from, Action, GameSpec, MemoryOneStrategy,
};
use crate::io::fmt17;

/// Long-run discounted utility of every player.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub utilities: Vec<f64>,
}

/// Caches the per-game data needed to evaluate many profiles of the same game.
#[derive(Clone, Debug)]
pub struct Evaluator<'g> {
    game: &'g GameSpec,
    rewards: Vec<Vec<f64>>,
}

impl<'g> Evaluator<'g> {
    pub fn new(game: &'g GameSpec) -> Self {
        let rewards = (0..game.n()).map(|i| game.reward_vector(i)).collect();
        Evaluator { game, rewards }
    }

    pub fn game(&self) -> &'g GameSpec {
        self.game
    }

    pub fn rewards(&self, player: usize) -> &[f64] {
        &self.rewards[player]
    }

    /// `I - δM` as a dense matrix for the given action-1 probability vectors.
    pub(crate) fn resolvent_matrix(&self, probs: &[&[f64]]) -> DMatrix<f64> {
        let m = self.game.num_states();
        let delta = self.game.delta();
        let mut buf = vec![0.0; m * m];
        fill_transition(self.game.n(), probs, &mut buf);
        DMatrix::from_fn(m, m, |r, c| {
            let id = if r == c { 1.0 } else { 0.0 };
            id - delta * buf[r * m + c]
        })
    }

    /// Utilities of every player. `probs[k]` is player `k`'s action-1
    /// probability per state and `init[k]` its stage-0 probability.
    pub(crate) fn utilities_raw(&self, probs: &[&[f64]], init: &[f64]) -> Result<Vec<f64>> {
        let m = self.game.num_states();
        let delta = self.game.delta();
        let a = self.resolvent_matrix(probs);
        let v0 = DVector::from_vec(initial_distribution_from(init));
        // y = (I - δM)^{-T} v0, so U_i = (1-δ) y·S^i for every player at once.
        let y = a
            .transpose()
            .lu()
            .solve(&v0)
            .ok_or_else(|| singular_report(&self.resolvent_matrix(probs)))?;
        debug_assert_eq!(y.len(), m);
        Ok(self
            .rewards
            .iter()
            .map(|s| (1.0 - delta) * s.iter().zip(y.iter()).map(|(r, w)| r * w).sum::<f64>())
            .collect())
    }

    /// Discounted state values `x = (I - δM)^{-1} S` for each requested player.
    /// Row `s` of column `i` is the (unnormalized) value of starting in full state `s`.
    pub(crate) fn state_values(&self, probs: &[&[f64]], players: &[usize]) -> Result<DMatrix<f64>> {
        let m = self.game.num_states();
        let a = self.resolvent_matrix(probs);
        let rhs = DMatrix::from_fn(m, players.len(), |r, c| self.rewards[players[c]][r]);
        a.clone().lu().solve(&rhs).ok_or_else(|| singular_report(&a))
    }

    pub fn utilities(&self, strategies: &[MemoryOneStrategy]) -> Result<Vec<f64>> {
        check_profile(self.game, strategies)?;
        let probs: Vec<&[f64]> = strategies.iter().map(|s| s.probs()).collect();
        let init: Vec<f64> = strategies.iter().map(|s| s.init_prob()).collect();
        self.utilities_raw(&probs, &init)
    }
}

fn singular_report(a: &DMatrix<f64>) -> Error {
    let svd = a.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    Error::Numerical(format!(
        "I - δM is singular to working precision (condition estimate {:e})",
        max / min
    ))
}

/// `U_i = (1-δ) v(0) (I - δM)^{-1} S^i` for every player, via one LU solve.
pub fn analytic_utility(game: &GameSpec, strategies: &[MemoryOneStrategy]) -> Result<EvalResult> {
    Evaluator::new(game)
        .utilities(strategies)
        .map(|utilities| EvalResult { utilities })
}

/// Determinant-ratio form of `player`'s utility for profiles whose stage-0
/// mass sits on `(2,…,2)`.
///
/// `D` is the determinant of `δM - I` with its last column replaced by the
/// reward vector. By Cramer's rule `D / det(I - δM)` equals
/// `(-1)^(m-1)` times the last entry of `(I - δM)^{-1} S`, so the sign is
/// restored before scaling by `1 - δ`.
pub fn determinant_utility(game: &GameSpec, strategies: &[MemoryOneStrategy], player: usize) -> Result<f64> {
    check_profile(game, strategies)?;
    game.check_player(player)?;
    if let Some(i) = strategies.iter().position(|s| s.init_prob() != 0.0) {
        return Err(Error::Precondition(format!(
            "determinant form needs every stage-0 probability of action 1 to be 0 (player {} has {})",
            i + 1,
            strategies[i].init_prob()
        )));
    }
    let m = game.num_states();
    let delta = game.delta();
    let eval = Evaluator::new(game);
    let probs: Vec<&[f64]> = strategies.iter().map(|s| s.probs()).collect();
    let resolvent = eval.resolvent_matrix(&probs);
    let mut d = -resolvent.clone();
    for (r, &s) in eval.rewards(player).iter().enumerate() {
        d[(r, m - 1)] = s;
    }
    let numerator = d.lu().determinant();
    let denominator = resolvent.lu().determinant();
    if denominator == 0.0 || !denominator.is_finite() {
        return Err(Error::Numerical(format!(
            "det(I - δM) = {denominator} cannot be used as a denominator"
        )));
    }
    let sign = if (m - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * (1.0 - delta) * numerator / denominator)
}

/// One stage of a simulated play.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub stage: usize,
    pub profile: Vec<Action>,
    pub rewards: Vec<f64>,
}

/// A seeded realization of the repeated game over stages `0..=horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub seed: u64,
    pub records: Vec<TraceRecord>,
    /// `(1-δ) Σ_t δ^t r_i(t)` over the recorded stages.
    pub discounted_returns: Vec<f64>,
}

impl Trace {
    /// CSV with header `stage,action_p1,...,action_pn,reward_p1,...,reward_pn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.discounted_returns.len();
        let mut header = vec!["stage".to_string()];
        header.extend((1..=n).map(|i| format!("action_p{i}")));
        header.extend((1..=n).map(|i| format!("reward_p{i}")));
        writeln!(w, "{}", header.join(","))?;
        for rec in &self.records {
            let mut row = vec![rec.stage.to_string()];
            row.extend(rec.profile.iter().map(|a| a.number().to_string()));
            row.extend(rec.rewards.iter().map(|&r| fmt17(r)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Pre-extracted data for fast rollouts.
struct Rollout<'a> {
    n: usize,
    delta: f64,
    probs: Vec<&'a [f64]>,
    init: Vec<f64>,
    rewards: Vec<Vec<f64>>,
}

impl<'a> Rollout<'a> {
    fn new(game: &GameSpec, strategies: &'a [MemoryOneStrategy]) -> Result<Self> {
        check_profile(game, strategies)?;
        Ok(Rollout {
            n: game.n(),
            delta: game.delta(),
            probs: strategies.iter().map(|s| s.probs()).collect(),
            init: strategies.iter().map(|s| s.init_prob()).collect(),
            rewards: (0..game.n()).map(|i| game.reward_vector(i)).collect(),
        })
    }

    /// Draws the next zero-based full state given action-1 probabilities per player.
    fn draw(&self, rng: &mut ChaCha8Rng, p: impl Fn(usize) -> f64) -> usize {
        (0..self.n).fold(0usize, |state, k| {
            let u: f64 = rng.gen();
            (state << 1) | usize::from(u >= p(k))
        })
    }

    /// Visits stages `0..=horizon`, calling `visit(stage, state)`.
    fn run(&self, horizon: usize, seed: u64, mut visit: impl FnMut(usize, usize)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = self.draw(&mut rng, |k| self.init[k]);
        visit(0, state);
        for t in 1..=horizon {
            let prev = state;
            state = self.draw(&mut rng, |k| self.probs[k][prev]);
            visit(t, state);
        }
    }

    fn discounted_returns(&self, horizon: usize, seed: u64) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        let mut weight = 1.0 - self.delta;
        self.run(horizon, seed, |_, s| {
            for (a, r) in acc.iter_mut().zip(&self.rewards) {
                *a += weight * r[s];
            }
            weight *= self.delta;
        });
        acc
    }
}

/// Seeded simulation over stages `0..=horizon`. Identical inputs give a
/// bit-identical trace.
pub fn simulate(
    game: &GameSpec,
    strategies: &[MemoryOneStrategy],
    horizon: usize,
    seed: u64,
) -> Result<Trace> {
    if horizon < 1 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    let roll = Rollout::new(game, strategies)?;
    let n = game.n();
    let mut records = Vec::with_capacity(horizon + 1);
    roll.run(horizon, seed, |t, s| {
        records.push(TraceRecord {
            stage: t,
            profile: (0..n).map(|k| action_in(s, k, n)).collect(),
            rewards: roll.rewards.iter().map(|r| r[s]).collect(),
        })
    });
    let mut discounted_returns = vec![0.0; n];
    let mut weight = 1.0 - game.delta();
    for rec in &records {
        for (acc, r) in discounted_returns.iter_mut().zip(&rec.rewards) {
            *acc += weight * r;
        }
        weight *= game.delta();
    }
    Ok(Trace {
        seed,
        records,
        discounted_returns,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonteCarloResult {
    pub estimates: Vec<McEstimate>,
    /// `δ^(T+1) · max|r|`: bound on the bias from truncating at the horizon.
    pub truncation_bound: f64,
}

/// Mean and standard error of `replications` discounted returns. Replication
/// `r` uses seed `seed + r`; results are reduced in replication order.
pub fn monte_carlo_utility(
    game: &GameSpec,
    strategies: &[MemoryOneStrategy],
    horizon: usize,
    replications: usize,
    seed: u64,
) -> Result<MonteCarloResult> {
    if horizon < 1 {
        return Err(Error::Domain("horizon must be at least 1".into()));
    }
    if replications < 2 {
        return Err(Error::Domain("need at least 2 replications".into()));
    }
    let roll = Rollout::new(game, strategies)?;
    let returns: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| roll.discounted_returns(horizon, seed.wrapping_add(r)))
        .collect();
    let estimates = (0..game.n())
        .map(|i| {
            let xs: Vec<f64> = returns.iter().map(|r| r[i]).collect();
            summarize(&xs)
        })
        .collect();
    let truncation_bound = game.delta().powi(horizon as i32 + 1) * game.max_abs_payoff();
    Ok(MonteCarloResult {
        estimates,
        truncation_bound,
    })
}

fn summarize(xs: &[f64]) -> McEstimate {
    if xs.iter().all(|&x| x == xs[0]) {
        return McEstimate {
            mean: xs[0],
            stderr: 0.0,
        };
    }
    let count = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / count;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1.0);
    McEstimate {
        mean,
        stderr: (var / count).sqrt(),
    }
}
