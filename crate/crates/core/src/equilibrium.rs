//! Best responses, strong Stackelberg search and the equalizer-versus-SSE gap.
//!
//! Follower pure strategies are bit vectors over the full states; index `b`
//! encodes state 1 in its most significant bit, so ascending indices are
//! ascending binary order and index 0 always plays action 2. Pure followers
//! take their stage-0 probability from the game.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evaluation::Evaluator;
use crate::game::{action_in, state_count, Action, GameSpec, MemoryOneStrategy, LEADER};
use crate::zd::{equalizer_for_gamma, feasibility_region, synthesize_equalizer, EqualizerSpec, GammaBounds};

/// Largest player count for which pure strategies are enumerated.
pub const MAX_ENUM_PLAYERS: usize = 4;

/// Largest player count for joint follower enumeration and SSE search.
pub const MAX_SSE_PLAYERS: usize = 3;

/// Best-response ties are payoffs within this distance.
pub const BR_TIE_TOL: f64 = 1e-9;

/// Loosest tolerance tried when no exact mutual best response exists.
pub const MAX_RELAXED_TOL: f64 = 1e-6;

const JOINT_BUDGET: u64 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PureStrategy {
    index: u64,
    len: usize,
}

impl PureStrategy {
    pub fn new(index: u64, len: usize) -> Result<Self> {
        if len == 0 || len > 64 || (len < 64 && index >> len != 0) {
            return Err(Error::Domain(format!(
                "index {index} does not fit a pure strategy over {len} states"
            )));
        }
        Ok(PureStrategy { index, len })
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Action-1 indicator after zero-based full state `j`.
    pub fn bit(&self, j: usize) -> u8 {
        ((self.index >> (self.len - 1 - j)) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len).map(|j| self.bit(j)).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.len).map(|j| f64::from(self.bit(j))).collect()
    }

    pub fn to_strategy(&self, init_prob: f64) -> Result<MemoryOneStrategy> {
        MemoryOneStrategy::new(self.probs(), init_prob)
    }
}

fn pure_count(n: usize) -> Result<u64> {
    if n > MAX_ENUM_PLAYERS {
        return Err(Error::Unsupported(format!(
            "pure-strategy enumeration needs n <= {MAX_ENUM_PLAYERS}, got {n}; sample strategies instead"
        )));
    }
    Ok(1u64 << state_count(n))
}

/// All `2^(2^n)` pure strategies in ascending binary order.
pub fn enumerate_pure(n: usize) -> Result<impl Iterator<Item = PureStrategy>> {
    let count = pure_count(n)?;
    let m = state_count(n);
    Ok((0..count).map(move |index| PureStrategy { index, len: m }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestResponse {
    /// Pure strategies within [`BR_TIE_TOL`] of the best follower payoff.
    pub set: Vec<PureStrategy>,
    /// Member of `set` maximizing the leader's payoff, lowest index on ties.
    pub pick: PureStrategy,
    pub value: f64,
    pub leader_value: f64,
}

/// Pure best responses of `follower` when everyone else plays `profile`
/// (the follower's own entry is ignored).
pub fn best_response(
    game: &GameSpec,
    profile: &[MemoryOneStrategy],
    follower: usize,
) -> Result<BestResponse> {
    crate::game::check_profile(game, profile)?;
    if follower == LEADER || follower >= game.n() {
        return Err(Error::Domain(format!("{follower} is not a follower index")));
    }
    let eval = Evaluator::new(game);
    let init_j = game.initial_probs()[follower];
    let mut init: Vec<f64> = profile.iter().map(|s| s.init_prob()).collect();
    init[follower] = init_j;
    let values: Vec<(PureStrategy, f64, f64)> = enumerate_pure(game.n())?
        .map(|p| {
            let own = p.probs();
            let probs: Vec<&[f64]> = profile
                .iter()
                .enumerate()
                .map(|(k, s)| if k == follower { own.as_slice() } else { s.probs() })
                .collect();
            eval.utilities_raw(&probs, &init)
                .map(|u| (p, u[follower], u[LEADER]))
        })
        .collect::<Result<_>>()?;
    let best = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let set: Vec<_> = values
        .iter()
        .filter(|v| v.1 >= best - BR_TIE_TOL)
        .copied()
        .collect();
    let (pick, value, leader_value) = set
        .iter()
        .copied()
        .reduce(|a, b| if b.2 > a.2 { b } else { a })
        .expect("argmax set is nonempty");
    Ok(BestResponse {
        set: set.iter().map(|v| v.0).collect(),
        pick,
        value,
        leader_value,
    })
}

/// Optimal discounted payoff of `follower` against fixed opponents, by
/// policy iteration on the follower's Markov decision problem. Starts from
/// `start` (rounded to pure) and returns the value and an optimal pure policy.
pub(crate) fn follower_optimum(
    eval: &Evaluator,
    probs: &[&[f64]],
    init: &[f64],
    follower: usize,
    start: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let game = eval.game();
    let n = game.n();
    let m = game.num_states();
    let delta = game.delta();
    let mut policy: Vec<f64> = start.iter().map(|&p| if p >= 0.5 { 1.0 } else { 0.0 }).collect();
    // P_{-j}(s' | s) restricted to the follower's own next action
    let mut others = vec![0.0; m * m];
    for s in 0..m {
        for t in 0..m {
            let mut prod = 1.0;
            for (k, p) in probs.iter().enumerate() {
                if k == follower {
                    continue;
                }
                prod *= match action_in(t, k, n) {
                    Action::One => p[s],
                    Action::Two => 1.0 - p[s],
                };
            }
            others[s * m + t] = prod;
        }
    }
    let v0 = crate::game::initial_distribution_from(init);
    for _ in 0..(4 * m + 8) {
        let mut with_policy: Vec<&[f64]> = probs.to_vec();
        with_policy[follower] = &policy;
        let x = eval.state_values(&with_policy, &[follower])?;
        let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let mut changed = false;
        for s in 0..m {
            let (mut q1, mut q2) = (0.0, 0.0);
            for t in 0..m {
                let w = others[s * m + t] * x[(t, 0)];
                match action_in(t, follower, n) {
                    Action::One => q1 += w,
                    Action::Two => q2 += w,
                }
            }
            let tol = 1e-12 * scale;
            let next = if q1 > q2 + tol {
                1.0
            } else if q2 > q1 + tol {
                0.0
            } else {
                policy[s]
            };
            if next != policy[s] {
                policy[s] = next;
                changed = true;
            }
        }
        if !changed {
            let value = (1.0 - delta) * v0.iter().zip(x.iter()).map(|(a, b)| a * b).sum::<f64>();
            return Ok((value, policy));
        }
    }
    Err(Error::Numerical("policy iteration did not converge".into()))
}

/// Optimistic joint follower response to a leader strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct FollowerProfile {
    pub followers: Vec<PureStrategy>,
    /// Utilities of all players, leader first.
    pub utilities: Vec<f64>,
    /// Per follower: own utility minus the best pure deviation (≤ 0).
    pub certificate: Vec<f64>,
    /// Tie tolerance that produced a survivor.
    pub tolerance: f64,
    pub relaxed: bool,
}

impl FollowerProfile {
    pub fn strategies(&self, game: &GameSpec) -> Result<Vec<MemoryOneStrategy>> {
        self.followers
            .iter()
            .enumerate()
            .map(|(k, p)| p.to_strategy(game.initial_probs()[k + 1]))
            .collect()
    }
}

/// Precomputed pure strategy vectors for one player count.
struct PureTable {
    m: usize,
    count: usize,
    probs: Vec<f64>,
}

impl PureTable {
    fn new(n: usize) -> Result<Self> {
        let count = pure_count(n)? as usize;
        let m = state_count(n);
        let probs = enumerate_pure(n)?.flat_map(|p| p.probs()).collect();
        Ok(PureTable { m, count, probs })
    }

    fn get(&self, i: usize) -> &[f64] {
        &self.probs[i * self.m..(i + 1) * self.m]
    }
}

fn check_joint_budget(n: usize) -> Result<u64> {
    if n > MAX_SSE_PLAYERS {
        return Err(Error::Unsupported(format!(
            "joint follower enumeration supports n <= {MAX_SSE_PLAYERS}, got {n}"
        )));
    }
    let per = pure_count(n)?;
    let total = per.pow((n - 1) as u32);
    if total > JOINT_BUDGET {
        return Err(Error::Unsupported(format!(
            "{total} joint follower profiles exceed the enumeration budget"
        )));
    }
    Ok(total)
}

/// Utilities of every joint pure follower profile against `leader`,
/// row-major in the mixed-radix profile index (first follower most
/// significant).
fn joint_table(game: &GameSpec, leader: &MemoryOneStrategy, pures: &PureTable) -> Result<Vec<Vec<f64>>> {
    let n = game.n();
    let total = check_joint_budget(n)? as usize;
    let eval = Evaluator::new(game);
    let mut init = game.initial_probs().to_vec();
    init[LEADER] = leader.init_prob();
    (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut probs: Vec<&[f64]> = Vec::with_capacity(n);
            probs.push(leader.probs());
            let mut rest = idx;
            let mut digits = vec![0usize; n - 1];
            for d in digits.iter_mut().rev() {
                *d = rest % pures.count;
                rest /= pures.count;
            }
            probs.extend(digits.iter().map(|&d| pures.get(d)));
            eval.utilities_raw(&probs, &init)
        })
        .collect()
}

/// Optimistic follower response: among joint pure profiles in which every
/// follower is within tolerance of its best pure deviation, the one best for
/// the leader (lowest index on ties). The tolerance starts at
/// [`BR_TIE_TOL`] and is relaxed by decades up to [`MAX_RELAXED_TOL`].
pub fn follower_profile_br(game: &GameSpec, leader: &MemoryOneStrategy) -> Result<FollowerProfile> {
    let n = game.n();
    check_joint_budget(n)?;
    if leader.len() != game.num_states() {
        return Err(Error::Domain(
            "leader strategy length does not match the game".into(),
        ));
    }
    let pures = PureTable::new(n)?;
    let table = joint_table(game, leader, &pures)?;
    select_profile(n, &pures, &table)
}

fn select_profile(n: usize, pures: &PureTable, table: &[Vec<f64>]) -> Result<FollowerProfile> {
    let k = pures.count;
    let followers = n - 1;
    let stride = |j: usize| k.pow((followers - 1 - j) as u32);
    // best[j][idx with digit j zeroed] = best payoff of follower j given the others
    let best: Vec<Vec<f64>> = (0..followers)
        .map(|j| {
            let s = stride(j);
            let mut b = vec![f64::NEG_INFINITY; table.len()];
            for (idx, u) in table.iter().enumerate() {
                let key = idx - ((idx / s) % k) * s;
                b[key] = b[key].max(u[j + 1]);
            }
            b
        })
        .collect();
    let slack = |idx: usize, j: usize| {
        let s = stride(j);
        let key = idx - ((idx / s) % k) * s;
        table[idx][j + 1] - best[j][key]
    };
    let mut tol = BR_TIE_TOL;
    loop {
        let pick = (0..table.len())
            .filter(|&idx| (0..followers).all(|j| slack(idx, j) >= -tol))
            .reduce(|a, b| if table[b][LEADER] > table[a][LEADER] { b } else { a });
        if let Some(idx) = pick {
            let mut rest = idx;
            let mut chosen = vec![
                PureStrategy {
                    index: 0,
                    len: pures.m
                };
                followers
            ];
            for c in chosen.iter_mut().rev() {
                c.index = (rest % k) as u64;
                rest /= k;
            }
            return Ok(FollowerProfile {
                followers: chosen,
                utilities: table[idx].clone(),
                certificate: (0..followers).map(|j| slack(idx, j)).collect(),
                tolerance: tol,
                relaxed: tol > BR_TIE_TOL,
            });
        }
        tol *= 10.0;
        if tol > MAX_RELAXED_TOL * (1.0 + 1e-9) {
            return Err(Error::NoFollowerEquilibrium(MAX_RELAXED_TOL));
        }
    }
}

/// Leader payoff against its optimistic follower response.
pub fn leader_value(game: &GameSpec, leader: &MemoryOneStrategy) -> Result<f64> {
    Ok(follower_profile_br(game, leader)?.utilities[LEADER])
}

#[derive(Clone, Debug, PartialEq)]
pub struct SseOptions {
    /// Local-search starts: corners first, then quasi-random points.
    pub starts: usize,
    pub max_corner_starts: usize,
    /// Extra quasi-random points used only to discover follower profiles.
    pub screening: usize,
    /// Additional leader strategies used as warm starts.
    pub seeds: Vec<MemoryOneStrategy>,
    pub max_sweeps: usize,
    pub sweep_tol: f64,
    pub line_tol: f64,
    pub penalty: f64,
    /// Constraint slack allowed inside the search; below [`BR_TIE_TOL`] so
    /// that the searched profile stays in the tie set when re-certified.
    pub inner_tol: f64,
    /// Local searches per distinct follower profile.
    pub searches_per_profile: usize,
}

impl Default for SseOptions {
    fn default() -> Self {
        SseOptions {
            starts: 32,
            max_corner_starts: 16,
            screening: 32,
            seeds: Vec::new(),
            max_sweeps: 200,
            sweep_tol: 1e-10,
            line_tol: 1e-10,
            penalty: 1e6,
            inner_tol: 5e-10,
            searches_per_profile: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SseDiagnostics {
    pub starts: usize,
    pub candidate_profiles: usize,
    pub local_searches: usize,
    pub sweeps: usize,
    /// Always true: the value is the best found, not a certified optimum.
    pub best_found: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SseResult {
    pub leader: MemoryOneStrategy,
    pub followers: Vec<PureStrategy>,
    /// `U₁(leader, optimistic response(leader))`.
    pub leader_value: f64,
    pub certificate: Vec<f64>,
    pub relaxed: bool,
    pub diagnostics: SseDiagnostics,
}

/// Radical-inverse Halton point `i` (1-based) in `dim` dimensions.
fn halton(i: usize, dim: usize) -> Vec<f64> {
    const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    PRIMES[..dim]
        .iter()
        .map(|&b| {
            let (mut f, mut r, mut k) = (1.0, 0.0, i);
            while k > 0 {
                f /= b as f64;
                r += f * (k % b) as f64;
                k /= b;
            }
            r
        })
        .collect()
}

fn corner_starts(m: usize, limit: usize) -> Vec<Vec<f64>> {
    let total = 1usize << m;
    let corner = |c: usize| {
        (0..m)
            .map(|j| f64::from(((c >> (m - 1 - j)) & 1) as u8))
            .collect()
    };
    if total <= limit {
        return (0..total).map(corner).collect();
    }
    let mut rest: Vec<usize> = (1..total - 1).collect();
    rest.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    let mut picks = vec![0, total - 1];
    picks.extend(rest.into_iter().take(limit.saturating_sub(2)));
    picks.into_iter().map(corner).collect()
}

/// Penalized objective for a fixed follower profile.
struct Penalized<'a> {
    eval: Evaluator<'a>,
    followers: Vec<Vec<f64>>,
    init: Vec<f64>,
    penalty: f64,
    inner_tol: f64,
}

impl Penalized<'_> {
    /// Leader payoff and total constraint violation.
    fn parts(&self, leader: &[f64]) -> Result<(f64, f64)> {
        let mut probs: Vec<&[f64]> = vec![leader];
        probs.extend(self.followers.iter().map(|f| f.as_slice()));
        let u = self.eval.utilities_raw(&probs, &self.init)?;
        let mut violation = 0.0;
        for (j, f) in self.followers.iter().enumerate() {
            let (best, _) = follower_optimum(&self.eval, &probs, &self.init, j + 1, f)?;
            violation += (best - u[j + 1] - self.inner_tol).max(0.0);
        }
        Ok((u[LEADER], violation))
    }

    fn value(&self, leader: &[f64]) -> Result<f64> {
        let (u, viol) = self.parts(leader)?;
        Ok(u - self.penalty * viol)
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Coordinate ascent with a 9-point grid and golden-section refinement per
/// coordinate. Returns the final point and the number of sweeps.
fn coordinate_ascent(obj: &Penalized, mut x: Vec<f64>, opts: &SseOptions) -> Result<(Vec<f64>, f64, usize)> {
    let mut fx = obj.value(&x)?;
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let start = fx;
        for i in 0..x.len() {
            let eval_at = |t: f64, x: &mut Vec<f64>| -> Result<f64> {
                x[i] = t;
                obj.value(x)
            };
            let original = x[i];
            let (mut best_t, mut best_f) = (original, fx);
            for g in 0..=8 {
                let t = g as f64 / 8.0;
                let f = eval_at(t, &mut x)?;
                if f > best_f {
                    best_t = t;
                    best_f = f;
                }
            }
            let (mut a, mut b) = ((best_t - 0.125).max(0.0), (best_t + 0.125).min(1.0));
            let mut c = b - GOLDEN * (b - a);
            let mut d = a + GOLDEN * (b - a);
            let mut fc = eval_at(c, &mut x)?;
            let mut fd = eval_at(d, &mut x)?;
            while b - a > opts.line_tol {
                if fc >= fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - GOLDEN * (b - a);
                    fc = eval_at(c, &mut x)?;
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + GOLDEN * (b - a);
                    fd = eval_at(d, &mut x)?;
                }
            }
            for (t, f) in [(c, fc), (d, fd)] {
                if f > best_f {
                    best_t = t;
                    best_f = f;
                }
            }
            x[i] = best_t;
            fx = if best_t == original { fx } else { best_f };
        }
        if fx - start < opts.sweep_tol {
            break;
        }
    }
    Ok((x, fx, sweeps))
}

struct Candidate {
    value: f64,
    leader: Vec<f64>,
    profile: FollowerProfile,
}

/// Strong Stackelberg search for `n ≤ 3` with default options.
pub fn sse_solve(game: &GameSpec) -> Result<SseResult> {
    sse_solve_with(game, &SseOptions::default())
}

/// Heuristic strong Stackelberg search.
///
/// Follower profiles are discovered as the optimistic responses to the
/// start points (and extra screening points). For each distinct profile the
/// leader payoff is maximized from its best realizing starts, subject to
/// the followers' pure-deviation constraints handled by an exact penalty.
/// Every reported value is re-certified as the leader payoff against the
/// optimistic response to the final leader strategy.
pub fn sse_solve_with(game: &GameSpec, opts: &SseOptions) -> Result<SseResult> {
    let n = game.n();
    check_joint_budget(n)?;
    let m = game.num_states();
    let leader_init = game.initial_probs()[LEADER];

    let mut points = corner_starts(m, opts.max_corner_starts.min(opts.starts));
    let mut h = 1;
    while points.len() < opts.starts {
        points.push(halton(h, m));
        h += 1;
    }
    points.extend(opts.seeds.iter().map(|s| s.probs().to_vec()));
    let search_points = points.len();
    for _ in 0..opts.screening {
        points.push(halton(h, m));
        h += 1;
    }

    let pures = PureTable::new(n)?;
    let certify = |x: &[f64]| -> Result<Candidate> {
        let leader = MemoryOneStrategy::new(x.to_vec(), leader_init)?;
        let table = joint_table(game, &leader, &pures)?;
        let profile = select_profile(n, &pures, &table)?;
        Ok(Candidate {
            value: profile.utilities[LEADER],
            leader: x.to_vec(),
            profile,
        })
    };
    let found: Vec<Candidate> = points.iter().map(|p| certify(p)).collect::<Result<_>>()?;

    // distinct follower profiles, each with its best realizing points
    let mut groups: Vec<(Vec<PureStrategy>, Vec<usize>)> = Vec::new();
    for (i, c) in found.iter().enumerate() {
        match groups.iter_mut().find(|g| g.0 == c.profile.followers) {
            Some(g) => g.1.push(i),
            None => groups.push((c.profile.followers.clone(), vec![i])),
        }
    }
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for (g, (_, members)) in groups.iter_mut().enumerate() {
        members.sort_by(|&a, &b| found[b].value.total_cmp(&found[a].value).then(a.cmp(&b)));
        jobs.extend(members.iter().take(opts.searches_per_profile).map(|&i| (g, i)));
    }

    let outcomes: Vec<(Candidate, usize)> = jobs
        .par_iter()
        .map(|&(g, i)| {
            let followers: Vec<Vec<f64>> = groups[g].0.iter().map(|p| p.probs()).collect();
            let mut init = game.initial_probs().to_vec();
            init[LEADER] = leader_init;
            let obj = Penalized {
                eval: Evaluator::new(game),
                followers,
                init,
                penalty: opts.penalty,
                inner_tol: opts.inner_tol,
            };
            let (x, _, sweeps) = coordinate_ascent(&obj, found[i].leader.clone(), opts)?;
            Ok((certify(&x)?, sweeps))
        })
        .collect::<Result<_>>()?;

    let sweeps = outcomes.iter().map(|o| o.1).sum();
    let local_searches = outcomes.len();
    let best = found
        .into_iter()
        .chain(outcomes.into_iter().map(|o| o.0))
        .reduce(|a, b| if b.value > a.value { b } else { a })
        .ok_or_else(|| Error::Numerical("no start points".into()))?;
    Ok(SseResult {
        leader: MemoryOneStrategy::new(best.leader, leader_init)?,
        followers: best.profile.followers.clone(),
        leader_value: best.value,
        certificate: best.profile.certificate.clone(),
        relaxed: best.profile.relaxed,
        diagnostics: SseDiagnostics {
            starts: search_points,
            candidate_profiles: groups.len(),
            local_searches,
            sweeps,
            best_found: true,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Witness {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremeEqualizer {
    pub spec: EqualizerSpec,
    pub strategy: MemoryOneStrategy,
    pub response: FollowerProfile,
}

impl ExtremeEqualizer {
    pub fn leader_value(&self) -> f64 {
        self.response.utilities[LEADER]
    }
}

/// Best leader payoff over the two extreme equalizers, plus a `γ` sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ZdValue {
    pub zd_value: f64,
    pub witness: Witness,
    pub bounds: GammaBounds,
    pub plus: ExtremeEqualizer,
    pub minus: ExtremeEqualizer,
    /// `(γ, leader payoff)` on 33 evenly spaced points of `[Γ⁻, Γ⁺]`.
    pub sweep: Vec<(f64, f64)>,
    pub interior_beats_extremes: bool,
}

pub const GAMMA_SWEEP_POINTS: usize = 33;

fn extreme(game: &GameSpec, omega: &[f64], gamma: f64) -> Result<ExtremeEqualizer> {
    let spec = equalizer_for_gamma(game, omega, gamma, game.initial_probs()[LEADER])?;
    let strategy = synthesize_equalizer(game, &spec)?;
    let response = follower_profile_br(game, &strategy)?;
    Ok(ExtremeEqualizer {
        spec,
        strategy,
        response,
    })
}

/// Leader payoff of the extreme equalizers `π₁⁺` (at `Γ⁺`) and `π₁⁻` (at
/// `Γ⁻`) against optimistic follower responses; the larger is reported.
pub fn best_zd_value(game: &GameSpec, omega: &[f64]) -> Result<ZdValue> {
    let leader_init = game.initial_probs()[LEADER];
    let bounds = feasibility_region(game, omega, leader_init)?
        .bounds
        .ok_or(Error::NoEqualizer)?;
    let plus = extreme(game, omega, bounds.gamma_plus)?;
    let minus = extreme(game, omega, bounds.gamma_minus)?;
    let (zd_value, witness) = if plus.leader_value() >= minus.leader_value() {
        (plus.leader_value(), Witness::Plus)
    } else {
        (minus.leader_value(), Witness::Minus)
    };
    let width = bounds.gamma_plus - bounds.gamma_minus;
    let sweep: Vec<(f64, f64)> = (0..GAMMA_SWEEP_POINTS)
        .map(|i| {
            let gamma = match i {
                0 => bounds.gamma_minus,
                i if i == GAMMA_SWEEP_POINTS - 1 => bounds.gamma_plus,
                i => bounds.gamma_minus + width * i as f64 / (GAMMA_SWEEP_POINTS - 1) as f64,
            };
            let value = extreme(game, omega, gamma)?.leader_value();
            Ok((gamma, value))
        })
        .collect::<Result<_>>()?;
    let interior_beats_extremes = sweep[1..GAMMA_SWEEP_POINTS - 1]
        .iter()
        .any(|&(_, v)| v > zd_value + BR_TIE_TOL);
    Ok(ZdValue {
        zd_value,
        witness,
        bounds,
        plus,
        minus,
        sweep,
        interior_beats_extremes,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    pub sse: SseResult,
    pub zd: ZdValue,
    pub sse_value: f64,
    pub zd_value: f64,
    pub gap: f64,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct GapReportJson {
    sse_value: f64,
    zd_value: f64,
    gap: f64,
    gamma_minus: f64,
    gamma_plus: f64,
    witness: Witness,
    heuristic: bool,
}

impl GapReport {
    pub fn to_json(&self) -> Result<String> {
        let doc = GapReportJson {
            sse_value: self.sse_value,
            zd_value: self.zd_value,
            gap: self.gap,
            gamma_minus: self.zd.bounds.gamma_minus,
            gamma_plus: self.zd.bounds.gamma_plus,
            witness: self.zd.witness,
            heuristic: self.sse.diagnostics.best_found,
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }
}

/// `U₁^SSE - L` with the SSE search warm-started from both extreme equalizers.
pub fn gap_report(game: &GameSpec, omega: &[f64]) -> Result<GapReport> {
    gap_report_with(game, omega, &SseOptions::default())
}

pub fn gap_report_with(game: &GameSpec, omega: &[f64], opts: &SseOptions) -> Result<GapReport> {
    check_joint_budget(game.n())?;
    let mut warnings = Vec::new();
    if game.n() > 2 && !game.followers_identical() {
        warnings.push("follower tables differ; the equalizer bound assumes identical followers".into());
    }
    if game.initial_probs().iter().any(|&p| p != 0.0) {
        warnings.push("nonzero stage-0 probabilities; the determinant form does not apply".into());
    }
    let zd = best_zd_value(game, omega)?;
    let mut opts = opts.clone();
    opts.seeds.push(zd.plus.strategy.clone());
    opts.seeds.push(zd.minus.strategy.clone());
    let sse = sse_solve_with(game, &opts)?;
    let (sse_value, zd_value) = (sse.leader_value, zd.zd_value);
    Ok(GapReport {
        sse,
        zd,
        sse_value,
        zd_value,
        gap: sse_value - zd_value,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::analytic_utility;
    use crate::game::PayoffTable;
    use crate::zd::uniform_omega;
    use rand::Rng;

    fn random_game(rng: &mut ChaCha8Rng, n: usize) -> GameSpec {
        let tables = (0..n)
            .map(|_| {
                let row = |rng: &mut ChaCha8Rng| (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
                PayoffTable::new(row(rng), row(rng)).unwrap()
            })
            .collect();
        GameSpec::with_zero_initial(0.9, tables).unwrap()
    }

    fn random_leader(rng: &mut ChaCha8Rng, m: usize) -> MemoryOneStrategy {
        MemoryOneStrategy::new((0..m).map(|_| rng.gen()).collect(), 0.0).unwrap()
    }

    #[test]
    fn enumeration_order_and_counts() {
        assert_eq!(enumerate_pure(2).unwrap().count(), 16);
        assert_eq!(enumerate_pure(3).unwrap().count(), 256);
        let first = enumerate_pure(3).unwrap().next().unwrap();
        assert_eq!(first.bits(), vec![0; 8]);
        let v: Vec<_> = enumerate_pure(2).unwrap().collect();
        assert!(v.windows(2).all(|w| w[0].index() < w[1].index()));
        assert_eq!(v[1].bits(), vec![0, 0, 0, 1]);
        assert!(matches!(enumerate_pure(5), Err(Error::Unsupported(_))));
    }

    #[test]
    fn constant_follower_table_ties_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_game(&mut rng, 2);
        let g = g
            .with_tables(vec![g.table(0).clone(), PayoffTable::constant(2, 1.5).unwrap()])
            .unwrap();
        let leader = random_leader(&mut rng, 4);
        let br = best_response(&g, &[leader.clone(), leader.clone()], 1).unwrap();
        assert_eq!(br.set.len(), 16);
        let best_u1 = enumerate_pure(2)
            .unwrap()
            .map(|p| {
                let f = p.to_strategy(0.0).unwrap();
                analytic_utility(&g, &[leader.clone(), f]).unwrap().utilities[0]
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(br.leader_value, best_u1);
    }

    #[test]
    fn best_response_dominates_random_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let g = random_game(&mut rng, 2);
            let leader = random_leader(&mut rng, 4);
            let br = best_response(&g, &[leader.clone(), leader.clone()], 1).unwrap();
            for _ in 0..200 {
                let f = MemoryOneStrategy::new((0..4).map(|_| rng.gen()).collect(), 0.0).unwrap();
                let u = analytic_utility(&g, &[leader.clone(), f]).unwrap().utilities[1];
                assert!(br.value >= u - 1e-12);
            }
        }
    }

    #[test]
    fn policy_iteration_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 3] {
            for _ in 0..10 {
                let g = random_game(&mut rng, n);
                let m = g.num_states();
                let profile: Vec<_> = (0..n).map(|_| random_leader(&mut rng, m)).collect();
                let br = best_response(&g, &profile, 1).unwrap();
                let eval = Evaluator::new(&g);
                let probs: Vec<&[f64]> = profile.iter().map(|s| s.probs()).collect();
                let init = vec![0.0; n];
                let (v, policy) = follower_optimum(&eval, &probs, &init, 1, &vec![0.0; m]).unwrap();
                assert!((v - br.value).abs() < 1e-10, "{v} vs {}", br.value);
                let mut with: Vec<&[f64]> = probs.clone();
                with[1] = &policy;
                let u = eval.utilities_raw(&with, &init).unwrap();
                assert!((u[1] - v).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_player_profile_is_best_response_pick() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let g = random_game(&mut rng, 2);
            let leader = random_leader(&mut rng, 4);
            let p = follower_profile_br(&g, &leader).unwrap();
            let br = best_response(&g, &[leader.clone(), leader.clone()], 1).unwrap();
            assert_eq!(p.followers, vec![br.pick]);
            assert!(!p.relaxed);
            assert!(p.certificate[0] >= -BR_TIE_TOL);
        }
    }

    #[test]
    fn identical_followers_always_have_a_survivor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let g = random_game(&mut rng, 3);
            let t = g.table(1).clone();
            let g = g.with_tables(vec![g.table(0).clone(), t.clone(), t]).unwrap();
            let leader = random_leader(&mut rng, 8);
            let p = follower_profile_br(&g, &leader).unwrap();
            // certificate re-verified by exhaustive deviation
            let strategies = p.strategies(&g).unwrap();
            for j in 1..3 {
                let mut prof = vec![leader.clone()];
                prof.extend(strategies.iter().cloned());
                let br = best_response(&g, &prof, j).unwrap();
                assert!(p.utilities[j] >= br.value - p.tolerance);
            }
        }
    }

    #[test]
    fn constant_follower_tables_let_leader_choose() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_game(&mut rng, 3);
        let c = PayoffTable::constant(3, 0.7).unwrap();
        let g = g.with_tables(vec![g.table(0).clone(), c.clone(), c]).unwrap();
        let leader = random_leader(&mut rng, 8);
        let p = follower_profile_br(&g, &leader).unwrap();
        let pures = PureTable::new(3).unwrap();
        let table = joint_table(&g, &leader, &pures).unwrap();
        let best = table.iter().map(|u| u[0]).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(p.utilities[0], best);
    }

    #[test]
    fn sse_constant_leader_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_game(&mut rng, 2);
        let g = g
            .with_tables(vec![PayoffTable::constant(2, 2.25).unwrap(), g.table(1).clone()])
            .unwrap();
        let r = sse_solve(&g).unwrap();
        assert!((r.leader_value - 2.25).abs() < 1e-12);
        assert!(r.diagnostics.best_found);
    }

    #[test]
    fn sse_dominant_profile() {
        // (1,1) is best for both: own action 1 with the other at 1
        let t = PayoffTable::new(vec![0.5, 4.0], vec![0.0, 1.0]).unwrap();
        let g = GameSpec::with_zero_initial(0.9, vec![t.clone(), t]).unwrap();
        let r = sse_solve(&g).unwrap();
        // stage 0 is (2,2) under zero initial probabilities, so the value is
        // (1-δ)·U(2,0) + δ·U(1,1) when both switch to action 1 at once
        let expected = 0.1 * 0.0 + 0.9 * 4.0;
        assert!((r.leader_value - expected).abs() < 1e-9, "{}", r.leader_value);
        // only states (1,1) and (2,2) are ever visited
        let (l, f) = (r.leader.probs(), r.followers[0].bits());
        assert!(l[0] > 1.0 - 1e-9 && l[3] > 1.0 - 1e-9);
        assert_eq!((f[0], f[3]), (1, 1));
    }

    #[test]
    fn sse_beats_random_leaders() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2 {
            let g = random_game(&mut rng, 2);
            let r = sse_solve(&g).unwrap();
            for _ in 0..200 {
                let l = random_leader(&mut rng, 4);
                assert!(r.leader_value + 1e-6 >= leader_value(&g, &l).unwrap());
            }
        }
    }

    fn separated_game(rng: &mut ChaCha8Rng, n: usize) -> GameSpec {
        loop {
            let g = random_game(rng, n);
            let g = if n > 2 {
                let t = g.table(1).clone();
                g.with_tables(vec![g.table(0).clone(), t.clone(), t]).unwrap()
            } else {
                g
            };
            if !feasibility_region(&g, &uniform_omega(n), 0.0).unwrap().is_empty() {
                return g;
            }
        }
    }

    #[test]
    fn equalizer_makes_followers_indifferent() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = separated_game(&mut rng, 2);
        let z = best_zd_value(&g, &[1.0]).unwrap();
        let prof = [z.plus.strategy.clone(), z.plus.strategy.clone()];
        let br = best_response(&g, &prof, 1).unwrap();
        assert_eq!(br.set.len(), 16);
        assert!((br.value - z.bounds.gamma_plus).abs() <= 1e-8);
        assert!((z.plus.response.utilities[1] - z.bounds.gamma_plus).abs() <= 1e-8);
    }

    #[test]
    fn zd_value_matches_determinant_ratios() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let g = separated_game(&mut rng, 2);
        let z = best_zd_value(&g, &[1.0]).unwrap();
        let best = |s: &MemoryOneStrategy| {
            enumerate_pure(2)
                .unwrap()
                .map(|p| {
                    let f = p.to_strategy(0.0).unwrap();
                    crate::evaluation::determinant_utility(&g, &[s.clone(), f], 0).unwrap()
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let expected = best(&z.plus.strategy).max(best(&z.minus.strategy));
        assert!((z.zd_value - expected).abs() < 1e-9);
        assert_eq!(z.sweep.len(), GAMMA_SWEEP_POINTS);
    }

    #[test]
    fn gap_report_constant_leader_and_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = separated_game(&mut rng, 2);
        let g = g
            .with_tables(vec![PayoffTable::constant(2, -1.0).unwrap(), g.table(1).clone()])
            .unwrap();
        let r = gap_report(&g, &[1.0]).unwrap();
        assert!(r.gap.abs() < 1e-12);
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            [
                "gamma_minus",
                "gamma_plus",
                "gap",
                "heuristic",
                "sse_value",
                "witness",
                "zd_value"
            ]
        );
        assert_eq!(v["heuristic"], serde_json::Value::Bool(true));
    }

    #[test]
    fn gap_is_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..3 {
            let g = separated_game(&mut rng, 2);
            let r = gap_report(&g, &[1.0]).unwrap();
            assert!(r.gap >= -1e-6);
            assert!(r.sse.certificate.iter().all(|&c| c >= -BR_TIE_TOL));
        }
    }

    #[test]
    fn unsupported_sizes() {
        let t = PayoffTable::constant(4, 0.0).unwrap();
        let g = GameSpec::with_zero_initial(0.9, vec![t.clone(), t.clone(), t.clone(), t]).unwrap();
        assert!(matches!(sse_solve(&g), Err(Error::Unsupported(_))));
        let s = MemoryOneStrategy::constant(4, 0.5, 0.0).unwrap();
        assert!(matches!(follower_profile_br(&g, &s), Err(Error::Unsupported(_))));
    }
}
