//! Example games: public goods, snowdrift, their asymmetric variants,
//! security games and randomized instances.
//!
//! Tables are stored with ascending count columns: entry `k` of a row is
//! the payoff when `k` other players chose action 1. All generated games
//! start every player on action 2.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{GameSpec, PayoffTable};

/// Discount factor of the randomized UAV experiment.
pub const UAV_DELTA: f64 = 0.9;

const SHARE_SUM_TOL: f64 = 1e-12;

fn check_positive(x: f64, name: &str) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("{name} must be positive, got {x}")));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 players, got {n}")));
    }
    Ok(())
}

fn pgg_table(n: usize, share: f64, r: f64, c: f64) -> Result<PayoffTable> {
    let one = (0..n).map(|k| share * r * c * (k + 1) as f64 - c).collect();
    let two = (0..n).map(|k| share * r * c * k as f64).collect();
    PayoffTable::new(one, two)
}

fn snowdrift_table(n: usize, b: f64, c: f64) -> Result<PayoffTable> {
    let one = (0..n).map(|k| b - c / (k + 1) as f64).collect();
    let two = (0..n).map(|k| if k == 0 { 0.0 } else { b }).collect();
    PayoffTable::new(one, two)
}

/// Public goods game: `U_{1,k} = rc(k+1)/n - c`, `U_{2,k} = rck/n`.
pub fn gen_pgg(n: usize, r: f64, c: f64, delta: f64) -> Result<GameSpec> {
    check_n(n)?;
    check_positive(r, "r")?;
    check_positive(c, "c")?;
    let t = pgg_table(n, 1.0 / n as f64, r, c)?;
    GameSpec::with_zero_initial(delta, vec![t; n])
}

/// Snowdrift game: `U_{1,k} = b - c/(k+1)`, `U_{2,k} = b` for `k ≥ 1`, `U_{2,0} = 0`.
pub fn gen_snowdrift(n: usize, b: f64, c: f64, delta: f64) -> Result<GameSpec> {
    check_n(n)?;
    check_positive(b, "b")?;
    check_positive(c, "c")?;
    let t = snowdrift_table(n, b, c)?;
    GameSpec::with_zero_initial(delta, vec![t; n])
}

/// Public goods game with per-player share factors `a_i` summing to 1.
pub fn gen_async_pgg(a: &[f64], r: f64, c: f64, delta: f64) -> Result<GameSpec> {
    check_n(a.len())?;
    check_positive(r, "r")?;
    check_positive(c, "c")?;
    if a.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Domain("share factors must be nonnegative".into()));
    }
    let sum: f64 = a.iter().sum();
    if (sum - 1.0).abs() > SHARE_SUM_TOL {
        return Err(Error::Domain(format!("share factors sum to {sum}, expected 1")));
    }
    let n = a.len();
    let tables = a
        .iter()
        .map(|&ai| pgg_table(n, ai, r, c))
        .collect::<Result<_>>()?;
    GameSpec::with_zero_initial(delta, tables)
}

/// Snowdrift game with per-player benefits `b_i`.
pub fn gen_async_snowdrift(b: &[f64], c: f64, delta: f64) -> Result<GameSpec> {
    check_n(b.len())?;
    check_positive(c, "c")?;
    for &bi in b {
        check_positive(bi, "b_i")?;
    }
    let n = b.len();
    let tables = b
        .iter()
        .map(|&bi| snowdrift_table(n, bi, c))
        .collect::<Result<_>>()?;
    GameSpec::with_zero_initial(delta, tables)
}

/// `n` distinct uniform draws on `[0, 4)`, sorted ascending.
fn strictly_increasing(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| w[0] < w[1]) {
            return v;
        }
    }
}

/// Security game: the defender (player 0) gains from action 1 the more
/// attackers choose it and from action 2 the fewer do; attackers have the
/// reverse orderings.
pub fn gen_security(n: usize, seed: u64, delta: f64) -> Result<GameSpec> {
    check_n(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tables = (0..n)
        .map(|i| {
            let up = strictly_increasing(&mut rng, n);
            let mut down = strictly_increasing(&mut rng, n);
            down.reverse();
            if i == 0 {
                PayoffTable::new(up, down)
            } else {
                PayoffTable::new(down, up)
            }
        })
        .collect::<Result<_>>()?;
    GameSpec::with_zero_initial(delta, tables)
}

/// Per-player `(p, q)` draws of the UAV instance, fixed by the seed.
#[derive(Clone, Debug, PartialEq)]
pub struct UavDraws {
    /// `p[i] = [action-1 row, action-2 row]`, uniform on `[0, 4]`.
    pub p: Vec<[Vec<f64>; 2]>,
    /// Same layout, uniform on `[0, 1]`.
    pub q: Vec<[Vec<f64>; 2]>,
}

impl UavDraws {
    /// Draws the leader's table and either one table per follower or, when
    /// `shared_followers` is set, one table shared by all followers.
    pub fn new(n: usize, seed: u64, shared_followers: bool) -> Result<Self> {
        check_n(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut row = |hi: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(0.0..=hi)).collect() };
        let distinct = if shared_followers { 2 } else { n };
        let mut p = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for _ in 0..distinct {
            p.push([row(4.0), row(4.0)]);
            q.push([row(1.0), row(1.0)]);
        }
        while p.len() < n {
            p.push(p[1].clone());
            q.push(q[1].clone());
        }
        Ok(UavDraws { p, q })
    }

    /// Tables `p + q·θ²`.
    pub fn game(&self, theta: f64, delta: f64) -> Result<GameSpec> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Domain(format!("theta = {theta} outside [0, 1]")));
        }
        let t2 = theta * theta;
        let tables = self
            .p
            .iter()
            .zip(&self.q)
            .map(|(p, q)| {
                let f = |a: usize| p[a].iter().zip(&q[a]).map(|(p, q)| p + q * t2).collect();
                PayoffTable::new(f(0), f(1))
            })
            .collect::<Result<_>>()?;
        GameSpec::with_zero_initial(delta, tables)
    }
}

/// Randomized UAV game with independent tables for every player.
pub fn gen_uav_random(n: usize, theta: f64, seed: u64, delta: f64) -> Result<GameSpec> {
    UavDraws::new(n, seed, false)?.game(theta, delta)
}

/// Moving-target-defense game: the defender is paid more for covering the
/// attacked target than for missing it, and the attacker prefers the
/// target the defender does not cover.
pub fn gen_mtd_random(seed: u64, delta: f64) -> Result<GameSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> [f64; 4] { std::array::from_fn(|_| rng.gen_range(0.0..4.0)) };
    // entries: [U_{1,1}, U_{1,0}, U_{2,1}, U_{2,0}]
    let d = loop {
        let d = draw(&mut rng);
        if d[0].min(d[3]) > d[1].max(d[2]) {
            break d;
        }
    };
    let a = loop {
        let a = draw(&mut rng);
        if a[0] < a[1] && a[3] < a[2] {
            break a;
        }
    };
    let table = |e: [f64; 4]| PayoffTable::new(vec![e[1], e[0]], vec![e[3], e[2]]);
    GameSpec::with_zero_initial(delta, vec![table(d)?, table(a)?])
}

/// A scenario with all of its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioParams {
    Pgg {
        n: usize,
        r: f64,
        c: f64,
        delta: f64,
    },
    Snowdrift {
        n: usize,
        b: f64,
        c: f64,
        delta: f64,
    },
    AsyncPgg {
        a: Vec<f64>,
        r: f64,
        c: f64,
        delta: f64,
    },
    AsyncSnowdrift {
        b: Vec<f64>,
        c: f64,
        delta: f64,
    },
    Security {
        n: usize,
        seed: u64,
        delta: f64,
    },
    UavRandom {
        n: usize,
        theta: f64,
        seed: u64,
        delta: f64,
        shared_followers: bool,
    },
    MtdRandom {
        seed: u64,
        delta: f64,
    },
}

impl ScenarioParams {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioParams::Pgg { .. } => "pgg",
            ScenarioParams::Snowdrift { .. } => "snowdrift",
            ScenarioParams::AsyncPgg { .. } => "async_pgg",
            ScenarioParams::AsyncSnowdrift { .. } => "async_snowdrift",
            ScenarioParams::Security { .. } => "security",
            ScenarioParams::UavRandom { .. } => "uav_random",
            ScenarioParams::MtdRandom { .. } => "mtd_random",
        }
    }

    pub fn generate(&self) -> Result<GameSpec> {
        match self {
            ScenarioParams::Pgg { n, r, c, delta } => gen_pgg(*n, *r, *c, *delta),
            ScenarioParams::Snowdrift { n, b, c, delta } => gen_snowdrift(*n, *b, *c, *delta),
            ScenarioParams::AsyncPgg { a, r, c, delta } => gen_async_pgg(a, *r, *c, *delta),
            ScenarioParams::AsyncSnowdrift { b, c, delta } => gen_async_snowdrift(b, *c, *delta),
            ScenarioParams::Security { n, seed, delta } => gen_security(*n, *seed, *delta),
            ScenarioParams::UavRandom {
                n,
                theta,
                seed,
                delta,
                shared_followers,
            } => UavDraws::new(*n, *seed, *shared_followers)?.game(*theta, *delta),
            ScenarioParams::MtdRandom { seed, delta } => gen_mtd_random(*seed, *delta),
        }
    }
}
