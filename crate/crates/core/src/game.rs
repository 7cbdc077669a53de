//! Game definition, joint-action state space and the Markov chain induced by
//! a profile of memory-one strategies.
//!
//! Players are indexed from 0 in this API; player 0 is the leader. Full
//! states are the joint action profiles of the previous stage, numbered
//! `1..=2^n` in lexicographic order with player 0 as the most significant
//! digit, so `(1,…,1)` is state 1 and `(2,…,2)` is state `2^n`. Internally
//! the zero-based number `idx - 1` is used as a bit string in which a set bit
//! at position `n - 1 - k` means player `k` chose action 2.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest supported player count (`2^12`-state chains).
pub const MAX_PLAYERS: usize = 12;

/// Index of the leader.
pub const LEADER: usize = 0;

/// Tolerance used when checking that probability vectors sum to one.
#[cfg(test)]
const PROB_SUM_TOL: f64 = 1e-12;

/// One of the two stage actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    One,
    Two,
}

impl Action {
    pub fn from_number(a: u8) -> Result<Self> {
        match a {
            1 => Ok(Action::One),
            2 => Ok(Action::Two),
            other => Err(Error::Domain(format!("action must be 1 or 2, got {other}"))),
        }
    }

    pub fn number(self) -> u8 {
        match self {
            Action::One => 1,
            Action::Two => 2,
        }
    }
}

/// Number of full states for `n` players.
pub fn state_count(n: usize) -> usize {
    1usize << n
}

/// Action of `player` in the zero-based full state `state`.
#[inline]
pub(crate) fn action_in(state: usize, player: usize, n: usize) -> Action {
    if (state >> (n - 1 - player)) & 1 == 0 {
        Action::One
    } else {
        Action::Two
    }
}

/// Number of players other than `player` choosing action 1 in zero-based `state`.
#[inline]
pub(crate) fn others_count_in(state: usize, player: usize, n: usize) -> usize {
    let ones = n - (state.count_ones() as usize);
    match action_in(state, player, n) {
        Action::One => ones - 1,
        Action::Two => ones,
    }
}

/// A 1-based full-state index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateIndex(usize);

impl StateIndex {
    pub fn new(idx: usize, n: usize) -> Result<Self> {
        check_player_count(n)?;
        if idx == 0 || idx > state_count(n) {
            return Err(Error::Domain(format!(
                "state index {idx} outside 1..={} for n = {n}",
                state_count(n)
            )));
        }
        Ok(StateIndex(idx))
    }

    pub fn get(self) -> usize {
        self.0
    }

    pub fn zero_based(self) -> usize {
        self.0 - 1
    }
}

/// Decodes a 1-based state index into the joint action profile using the
/// closed-form map `a^k = ((⌈idx / 2^(n-k)⌉ + 1) mod 2) + 1`, k = 1..n.
pub fn decode_state(idx: usize, n: usize) -> Result<Vec<Action>> {
    let idx = StateIndex::new(idx, n)?.get();
    (1..=n)
        .map(|k| {
            let block = 1usize << (n - k);
            let a = ((idx.div_ceil(block) + 1) % 2) + 1;
            Action::from_number(a as u8)
        })
        .collect()
}

/// Inverse of [`decode_state`].
pub fn encode_state(profile: &[Action]) -> Result<usize> {
    let n = profile.len();
    check_player_count(n)?;
    let zero_based = profile.iter().fold(0usize, |acc, a| {
        (acc << 1)
            | match a {
                Action::One => 0,
                Action::Two => 1,
            }
    });
    Ok(zero_based + 1)
}

/// A player's view of a joint profile: its own action and how many of the
/// other players chose action 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ReducedState {
    pub own: Action,
    pub others_count: usize,
}

pub fn reduce_state(profile: &[Action], player: usize) -> Result<ReducedState> {
    if player >= profile.len() {
        return Err(Error::Domain(format!(
            "player {player} out of range for a {}-player profile",
            profile.len()
        )));
    }
    let others_count = profile
        .iter()
        .enumerate()
        .filter(|&(j, a)| j != player && *a == Action::One)
        .count();
    Ok(ReducedState {
        own: profile[player],
        others_count,
    })
}

/// Reduced payoff table of one player: `U_{a,k}` for own action `a` and
/// `k` other 1-selectors, stored with ascending `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct PayoffTable {
    action_one: Vec<f64>,
    action_two: Vec<f64>,
}

impl PayoffTable {
    pub fn new(action_one: Vec<f64>, action_two: Vec<f64>) -> Result<Self> {
        if action_one.len() != action_two.len() || action_one.is_empty() {
            return Err(Error::InvalidGame(format!(
                "payoff rows must have equal nonzero length, got {} and {}",
                action_one.len(),
                action_two.len()
            )));
        }
        if action_one.iter().chain(&action_two).any(|x| !x.is_finite()) {
            return Err(Error::InvalidGame(
                "payoff table contains a non-finite entry".into(),
            ));
        }
        Ok(PayoffTable {
            action_one,
            action_two,
        })
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        PayoffTable::new(vec![value; n], vec![value; n])
    }

    pub fn get(&self, own: Action, count: usize) -> f64 {
        match own {
            Action::One => self.action_one[count],
            Action::Two => self.action_two[count],
        }
    }

    pub fn row(&self, own: Action) -> &[f64] {
        match own {
            Action::One => &self.action_one,
            Action::Two => &self.action_two,
        }
    }

    pub fn columns(&self) -> usize {
        self.action_one.len()
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.action_one.iter().chain(&self.action_two).copied()
    }

    pub fn min(&self) -> f64 {
        self.entries().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.entries().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Entrywise `scale * U + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        let f = |row: &[f64]| row.iter().map(|x| scale * x + shift).collect::<Vec<_>>();
        PayoffTable::new(f(&self.action_one), f(&self.action_two))
    }
}

/// A discounted repeated game with two actions per player.
#[derive(Clone, Debug, PartialEq)]
pub struct GameSpec {
    delta: f64,
    tables: Vec<PayoffTable>,
    initial_probs: Vec<f64>,
}

fn check_player_count(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidGame(format!("need at least 2 players, got {n}")));
    }
    if n > MAX_PLAYERS {
        return Err(Error::Unsupported(format!(
            "{n} players exceeds the supported maximum of {MAX_PLAYERS}"
        )));
    }
    Ok(())
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("{what} = {p} is not a probability")));
    }
    Ok(())
}

impl GameSpec {
    pub fn new(delta: f64, tables: Vec<PayoffTable>, initial_probs: Vec<f64>) -> Result<Self> {
        let n = tables.len();
        check_player_count(n)?;
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidGame(format!(
                "discount factor {delta} outside [0, 1)"
            )));
        }
        if let Some((i, t)) = tables.iter().enumerate().find(|(_, t)| t.columns() != n) {
            return Err(Error::InvalidGame(format!(
                "table of player {} has {} columns, expected {n}",
                i + 1,
                t.columns()
            )));
        }
        if initial_probs.len() != n {
            return Err(Error::InvalidGame(format!(
                "expected {n} initial probabilities, got {}",
                initial_probs.len()
            )));
        }
        for (i, &p) in initial_probs.iter().enumerate() {
            check_probability(p, &format!("initial probability of player {}", i + 1))
                .map_err(|e| Error::InvalidGame(e.to_string()))?;
        }
        Ok(GameSpec {
            delta,
            tables,
            initial_probs,
        })
    }

    /// Same tables and discount, every player starting with action 2.
    pub fn with_zero_initial(delta: f64, tables: Vec<PayoffTable>) -> Result<Self> {
        let n = tables.len();
        GameSpec::new(delta, tables, vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.tables.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn num_states(&self) -> usize {
        state_count(self.n())
    }

    pub fn tables(&self) -> &[PayoffTable] {
        &self.tables
    }

    pub fn table(&self, player: usize) -> &PayoffTable {
        &self.tables[player]
    }

    pub fn initial_probs(&self) -> &[f64] {
        &self.initial_probs
    }

    pub fn with_initial_probs(&self, initial_probs: Vec<f64>) -> Result<Self> {
        GameSpec::new(self.delta, self.tables.clone(), initial_probs)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        GameSpec::new(delta, self.tables.clone(), self.initial_probs.clone())
    }

    pub fn with_tables(&self, tables: Vec<PayoffTable>) -> Result<Self> {
        GameSpec::new(self.delta, tables, self.initial_probs.clone())
    }

    /// Stage reward `S^i` of `player` over all full states, in state order.
    pub fn reward_vector(&self, player: usize) -> Vec<f64> {
        let n = self.n();
        let table = &self.tables[player];
        (0..self.num_states())
            .map(|s| table.get(action_in(s, player, n), others_count_in(s, player, n)))
            .collect()
    }

    /// True when every follower has the same payoff table.
    pub fn followers_identical(&self) -> bool {
        self.tables[1..].windows(2).all(|w| w[0] == w[1])
    }

    /// Largest absolute payoff over all tables.
    pub fn max_abs_payoff(&self) -> f64 {
        self.tables
            .iter()
            .flat_map(|t| t.entries())
            .fold(0.0, |acc, x| acc.max(x.abs()))
    }

    pub(crate) fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.n() {
            return Err(Error::Domain(format!(
                "player index {player} out of range for n = {}",
                self.n()
            )));
        }
        Ok(())
    }
}

/// Stage reward of `player` for a joint profile.
pub fn stage_reward(game: &GameSpec, profile: &[Action], player: usize) -> Result<f64> {
    if profile.len() != game.n() {
        return Err(Error::Domain(format!(
            "profile has {} entries, game has {} players",
            profile.len(),
            game.n()
        )));
    }
    let r = reduce_state(profile, player)?;
    Ok(game.table(player).get(r.own, r.others_count))
}

/// Probability of choosing action 1 after each full state, plus the stage-0
/// probability of action 1.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryOneStrategy {
    probs: Vec<f64>,
    init_prob: f64,
}

impl MemoryOneStrategy {
    pub fn new(probs: Vec<f64>, init_prob: f64) -> Result<Self> {
        let m = probs.len();
        if m < 4 || !m.is_power_of_two() {
            return Err(Error::Domain(format!(
                "strategy length {m} is not 2^n for n >= 2"
            )));
        }
        for (j, &p) in probs.iter().enumerate() {
            check_probability(p, &format!("probability at state {}", j + 1))?;
        }
        check_probability(init_prob, "initial probability")?;
        Ok(MemoryOneStrategy { probs, init_prob })
    }

    /// Plays action 1 with probability `p` after every state.
    pub fn constant(n: usize, p: f64, init_prob: f64) -> Result<Self> {
        check_player_count(n)?;
        MemoryOneStrategy::new(vec![p; state_count(n)], init_prob)
    }

    /// Lifts a strategy defined on `player`'s reduced states (own previous
    /// action, count of other 1-selectors) to the full state space by
    /// replication. `reduced[0][k]` is the probability after own action 1 and
    /// `k` other 1-selectors, `reduced[1][k]` after own action 2.
    pub fn from_reduced(n: usize, player: usize, reduced: [&[f64]; 2], init_prob: f64) -> Result<Self> {
        check_player_count(n)?;
        if player >= n || reduced.iter().any(|r| r.len() != n) {
            return Err(Error::Domain(format!(
                "reduced strategy must have two rows of {n} entries for a player below {n}"
            )));
        }
        let probs = (0..state_count(n))
            .map(|s| {
                let row = match action_in(s, player, n) {
                    Action::One => reduced[0],
                    Action::Two => reduced[1],
                };
                row[others_count_in(s, player, n)]
            })
            .collect();
        MemoryOneStrategy::new(probs, init_prob)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn init_prob(&self) -> f64 {
        self.init_prob
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn with_init_prob(&self, init_prob: f64) -> Result<Self> {
        MemoryOneStrategy::new(self.probs.clone(), init_prob)
    }

    /// True when every conditional probability and the stage-0 probability is 0 or 1.
    pub fn is_deterministic(&self) -> bool {
        self.probs
            .iter()
            .chain(std::iter::once(&self.init_prob))
            .all(|&p| p == 0.0 || p == 1.0)
    }
}

/// Checks that `strategies` is a full profile for `game`.
pub(crate) fn check_profile(game: &GameSpec, strategies: &[MemoryOneStrategy]) -> Result<()> {
    if strategies.len() != game.n() {
        return Err(Error::Domain(format!(
            "profile has {} strategies, game has {} players",
            strategies.len(),
            game.n()
        )));
    }
    let m = game.num_states();
    if let Some((i, s)) = strategies.iter().enumerate().find(|(_, s)| s.len() != m) {
        return Err(Error::Domain(format!(
            "strategy of player {} has {} entries, expected {m}",
            i + 1,
            s.len()
        )));
    }
    Ok(())
}

/// Writes the row-major `m × m` transition matrix for the given per-player
/// action-1 probability vectors into `out`.
pub(crate) fn fill_transition(n: usize, probs: &[&[f64]], out: &mut [f64]) {
    let m = state_count(n);
    debug_assert_eq!(out.len(), m * m);
    let mut factors = [[0.0f64; 2]; MAX_PLAYERS];
    for from in 0..m {
        for (k, p) in probs.iter().enumerate() {
            factors[k] = [p[from], 1.0 - p[from]];
        }
        let row = &mut out[from * m..(from + 1) * m];
        for (to, cell) in row.iter_mut().enumerate() {
            let mut prod = 1.0;
            for (k, f) in factors.iter().enumerate().take(n) {
                prod *= f[(to >> (n - 1 - k)) & 1];
            }
            *cell = prod;
        }
    }
}

/// Row-stochastic transition matrix `M`, entry `(j, i)` being the probability
/// of moving from full state `j` to full state `i` (both zero-based here).
pub fn build_transition_matrix(game: &GameSpec, strategies: &[MemoryOneStrategy]) -> Result<DMatrix<f64>> {
    check_profile(game, strategies)?;
    let n = game.n();
    let m = game.num_states();
    let probs: Vec<&[f64]> = strategies.iter().map(|s| s.probs()).collect();
    let mut buf = vec![0.0; m * m];
    fill_transition(n, &probs, &mut buf);
    Ok(DMatrix::from_row_slice(m, m, &buf))
}

/// Distribution of the stage-0 profile for independent stage-0 probabilities
/// of action 1.
pub fn initial_distribution_from(init_probs: &[f64]) -> Vec<f64> {
    let n = init_probs.len();
    (0..state_count(n))
        .map(|s| {
            (0..n)
                .map(|k| match action_in(s, k, n) {
                    Action::One => init_probs[k],
                    Action::Two => 1.0 - init_probs[k],
                })
                .product()
        })
        .collect()
}

/// Stage-0 distribution implied by the game's initial probabilities.
pub fn initial_distribution(game: &GameSpec) -> Vec<f64> {
    initial_distribution_from(game.initial_probs())
}

#[cfg(test)]
pub(crate) fn rows_stochastic(matrix: &DMatrix<f64>) -> bool {
    matrix
        .row_iter()
        .all(|r| (r.sum() - 1.0).abs() <= PROB_SUM_TOL && r.iter().all(|&x| x >= 0.0))
}
