//! Equalizer zero-determinant strategies for the leader.
//!
//! An equalizer with weights `ω` over the followers, target `γ` and scale
//! `φ` sets the leader's action-1 probability after full state `j` to
//!
//! ```text
//! p_j = [φ(γ - W_j) - (1-δ)π⁰ + π̂_j] / δ,    W_j = Σ_i ω_i S^i_j,
//! ```
//!
//! where `π⁰` is the leader's stage-0 probability of action 1 and `π̂_j` is 1
//! when the leader played action 1 in state `j`. Against any follower
//! profile this pins `Σ_i ω_i U_i` to `γ`. Substituting `(u, v) = (φ, φγ)`
//! turns `0 ≤ p_j ≤ 1` into two half-planes per state, so the admissible
//! parameters form a convex polygon.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evaluation::Evaluator;
use crate::game::{action_in, Action, GameSpec, MemoryOneStrategy, LEADER};

/// Probabilities within this distance of `[0, 1]` are clamped.
pub const CLAMP_TOL: f64 = 1e-9;

/// Parameters with `|φ|` below this are discarded.
pub const MIN_ABS_PHI: f64 = 1e-9;

const MAX_ABS_U: f64 = 1e9;
const MAX_ABS_V: f64 = 1e12;
const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct EqualizerSpec {
    omega: Vec<f64>,
    gamma: f64,
    phi: f64,
    leader_init: f64,
}

impl EqualizerSpec {
    pub fn new(omega: Vec<f64>, gamma: f64, phi: f64, leader_init: f64) -> Result<Self> {
        check_omega(&omega)?;
        if !gamma.is_finite() || !phi.is_finite() {
            return Err(Error::Domain("gamma and phi must be finite".into()));
        }
        if phi == 0.0 {
            return Err(Error::Domain("phi must be nonzero".into()));
        }
        if !(0.0..=1.0).contains(&leader_init) {
            return Err(Error::Domain(format!(
                "leader_init = {leader_init} is not a probability"
            )));
        }
        Ok(EqualizerSpec {
            omega,
            gamma,
            phi,
            leader_init,
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn leader_init(&self) -> f64 {
        self.leader_init
    }

    /// Two-player alias `β = -ω₂`; with the stored `ω₂ = 1` this is `-1`,
    /// and the enforced relation reads `U₂ = -γ/β = γ`.
    pub fn beta(&self) -> Option<f64> {
        match self.omega.as_slice() {
            [w] => Some(-w),
            _ => None,
        }
    }
}

fn check_omega(omega: &[f64]) -> Result<()> {
    if omega.is_empty() {
        return Err(Error::Domain("omega needs one weight per follower".into()));
    }
    if omega.iter().any(|w| !w.is_finite()) {
        return Err(Error::Domain("omega contains a non-finite weight".into()));
    }
    let sum: f64 = omega.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Domain(format!("omega sums to {sum}, expected 1")));
    }
    Ok(())
}

/// Equal weights over the `n - 1` followers.
pub fn uniform_omega(n: usize) -> Vec<f64> {
    vec![1.0 / (n - 1) as f64; n - 1]
}

/// `{(u, v) : cu·u + cv·v ≤ b}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub cu: f64,
    pub cv: f64,
    pub b: f64,
}

impl HalfPlane {
    fn slack(&self, u: f64, v: f64) -> f64 {
        self.cu * u + self.cv * v - self.b
    }

    fn scale(&self, u: f64, v: f64) -> f64 {
        1.0 + (self.cu * u).abs() + (self.cv * v).abs() + self.b.abs()
    }

    /// True when `(u, v)` satisfies the constraint up to a relative tolerance.
    pub fn contains(&self, u: f64, v: f64, rel_tol: f64) -> bool {
        self.slack(u, v) <= rel_tol * self.scale(u, v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vertex {
    pub u: f64,
    pub v: f64,
}

impl Vertex {
    pub fn gamma(&self) -> f64 {
        self.v / self.u
    }
}

/// Enforceable interval of `γ` with the `φ` values attaining each end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaBounds {
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    pub phi_minus: f64,
    pub phi_plus: f64,
}

/// Admissible `(u, v) = (φ, φγ)`: the constraints and the polygon they cut
/// out on each side of `u = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleRegion {
    pub constraints: Vec<HalfPlane>,
    pub positive: Vec<Vertex>,
    pub negative: Vec<Vertex>,
    pub bounds: Option<GammaBounds>,
}

impl FeasibleRegion {
    pub fn is_empty(&self) -> bool {
        self.bounds.is_none()
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Vertex> {
        self.positive.iter().chain(&self.negative)
    }

    pub fn gamma_interval(&self) -> Option<(f64, f64)> {
        self.bounds.map(|b| (b.gamma_minus, b.gamma_plus))
    }
}

/// `W_j = Σ_i ω_i S^i_j` over all full states.
pub fn weighted_follower_rewards(game: &GameSpec, omega: &[f64]) -> Result<Vec<f64>> {
    check_omega(omega)?;
    if omega.len() != game.n() - 1 {
        return Err(Error::Domain(format!(
            "omega has {} weights, game has {} followers",
            omega.len(),
            game.n() - 1
        )));
    }
    let mut w = vec![0.0; game.num_states()];
    for (i, &wi) in omega.iter().enumerate() {
        for (acc, s) in w.iter_mut().zip(game.reward_vector(i + 1)) {
            *acc += wi * s;
        }
    }
    Ok(w)
}

fn leader_indicator(game: &GameSpec) -> Vec<f64> {
    let n = game.n();
    (0..game.num_states())
        .map(|s| match action_in(s, LEADER, n) {
            Action::One => 1.0,
            Action::Two => 0.0,
        })
        .collect()
}

fn check_leader_init(leader_init: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&leader_init) {
        return Err(Error::Domain(format!(
            "leader_init = {leader_init} is not a probability"
        )));
    }
    Ok(())
}

/// The `2·2^n` half-planes of `0 ≤ p_j ≤ 1` in `(u, v)`, state by state:
/// `(1-δ)π⁰ - π̂_j ≤ v - u·W_j ≤ δ + (1-δ)π⁰ - π̂_j`.
pub fn region_constraints(game: &GameSpec, omega: &[f64], leader_init: f64) -> Result<Vec<HalfPlane>> {
    check_leader_init(leader_init)?;
    let w = weighted_follower_rewards(game, omega)?;
    let hat = leader_indicator(game);
    let delta = game.delta();
    let base = (1.0 - delta) * leader_init;
    Ok(w.iter()
        .zip(&hat)
        .flat_map(|(&wj, &h)| {
            [
                HalfPlane {
                    cu: wj,
                    cv: -1.0,
                    b: h - base,
                },
                HalfPlane {
                    cu: -wj,
                    cv: 1.0,
                    b: delta + base - h,
                },
            ]
        })
        .collect())
}

/// Intersection point of two constraint boundaries, by Cramer's rule.
fn intersect(a: &HalfPlane, b: &HalfPlane) -> Option<Vertex> {
    let det = a.cu * b.cv - a.cv * b.cu;
    let scale = (a.cu.abs() + a.cv.abs()) * (b.cu.abs() + b.cv.abs());
    if det.abs() <= 1e-15 * scale {
        return None;
    }
    Some(Vertex {
        u: (a.b * b.cv - a.cv * b.b) / det,
        v: (a.cu * b.b - a.b * b.cu) / det,
    })
}

/// A convex polygon stored as its cyclic sequence of edge lines; vertex `i`
/// is where edge `i - 1` meets edge `i`. Every vertex is therefore the exact
/// intersection of two original lines, with no accumulated clipping error.
struct EdgePolygon {
    edges: Vec<HalfPlane>,
}

impl EdgePolygon {
    fn rectangle(u_lo: f64, u_hi: f64, v_lo: f64, v_hi: f64) -> Self {
        // counter-clockwise: bottom, right, top, left
        EdgePolygon {
            edges: vec![
                HalfPlane {
                    cu: 0.0,
                    cv: -1.0,
                    b: -v_lo,
                },
                HalfPlane {
                    cu: 1.0,
                    cv: 0.0,
                    b: u_hi,
                },
                HalfPlane {
                    cu: 0.0,
                    cv: 1.0,
                    b: v_hi,
                },
                HalfPlane {
                    cu: -1.0,
                    cv: 0.0,
                    b: -u_lo,
                },
            ],
        }
    }

    fn vertices(&self) -> Vec<Option<Vertex>> {
        let k = self.edges.len();
        (0..k)
            .map(|i| intersect(&self.edges[(i + k - 1) % k], &self.edges[i]))
            .collect()
    }

    fn clip(&mut self, line: HalfPlane) {
        if self.edges.is_empty() {
            return;
        }
        let verts = self.vertices();
        let k = self.edges.len();
        let inside: Vec<bool> = verts
            .iter()
            .map(|v| v.is_some_and(|v| line.contains(v.u, v.v, 1e-12)))
            .collect();
        if inside.iter().all(|&x| x) {
            return;
        }
        if !inside.iter().any(|&x| x) {
            self.edges.clear();
            return;
        }
        let mut out = Vec::with_capacity(k + 1);
        for i in 0..k {
            // edge i runs from vertex i to vertex i + 1
            let (a, b) = (inside[i], inside[(i + 1) % k]);
            if a || b {
                out.push(self.edges[i]);
            }
            if a && !b {
                out.push(line);
            }
        }
        self.edges = out;
    }

    fn into_vertices(self) -> Vec<Vertex> {
        let mut out: Vec<Vertex> = Vec::new();
        for v in self.vertices().into_iter().flatten() {
            let dup = out.last().is_some_and(|p| {
                (p.u - v.u).abs() <= 1e-14 * (1.0 + v.u.abs())
                    && (p.v - v.v).abs() <= 1e-14 * (1.0 + v.v.abs())
            });
            if !dup {
                out.push(v);
            }
        }
        out
    }
}

fn clip_side(constraints: &[HalfPlane], positive: bool) -> Vec<Vertex> {
    let mut poly = if positive {
        EdgePolygon::rectangle(MIN_ABS_PHI, MAX_ABS_U, -MAX_ABS_V, MAX_ABS_V)
    } else {
        EdgePolygon::rectangle(-MAX_ABS_U, -MIN_ABS_PHI, -MAX_ABS_V, MAX_ABS_V)
    };
    for &c in constraints {
        poly.clip(c);
        if poly.edges.is_empty() {
            break;
        }
    }
    poly.into_vertices()
}

/// Polygon of admissible `(φ, φγ)` and the extreme enforceable values of
/// `γ = v/u`. `γ` is linear-fractional, hence monotone along each edge within
/// one sign of `u`, so its extremes are attained at vertices.
pub fn feasibility_region(game: &GameSpec, omega: &[f64], leader_init: f64) -> Result<FeasibleRegion> {
    let constraints = region_constraints(game, omega, leader_init)?;
    let positive = clip_side(&constraints, true);
    let negative = clip_side(&constraints, false);
    let mut bounds: Option<GammaBounds> = None;
    for v in positive.iter().chain(&negative) {
        let g = v.gamma();
        let b = bounds.get_or_insert(GammaBounds {
            gamma_minus: g,
            gamma_plus: g,
            phi_minus: v.u,
            phi_plus: v.u,
        });
        if g < b.gamma_minus {
            b.gamma_minus = g;
            b.phi_minus = v.u;
        }
        if g > b.gamma_plus {
            b.gamma_plus = g;
            b.phi_plus = v.u;
        }
    }
    Ok(FeasibleRegion {
        constraints,
        positive,
        negative,
        bounds,
    })
}

/// `[Γ⁻, Γ⁺]`, or `None` when no equalizer exists.
pub fn gamma_interval(game: &GameSpec, omega: &[f64], leader_init: f64) -> Result<Option<(f64, f64)>> {
    Ok(feasibility_region(game, omega, leader_init)?.gamma_interval())
}

/// Closed-form membership test for the two-player scale set: `φ` must not
/// exceed `min(x - y)/(1-δ)` and must reach
/// `max{|U²₁₁ - U²₁₀|/δ, |U²₂₁ - U²₂₀|/δ, max(x - y)/(1+δ)}`, with `x` ranging
/// over the follower's action-1 entries and `y` over its action-2 entries.
pub fn lambda_closed_form_check(game: &GameSpec, phi: f64) -> Result<bool> {
    if game.n() != 2 {
        return Err(Error::Domain(format!(
            "closed-form check is defined for two players, got {}",
            game.n()
        )));
    }
    let t = game.table(1);
    let delta = game.delta();
    let xs = t.row(Action::One);
    let ys = t.row(Action::Two);
    let diffs: Vec<f64> = xs.iter().flat_map(|x| ys.iter().map(move |y| x - y)).collect();
    let ratio = |a: f64, d: f64| if a == 0.0 { 0.0 } else { a / d };
    let min_diff = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let max_diff = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let upper = ratio(min_diff, 1.0 - delta);
    let lower = ratio((xs[1] - xs[0]).abs(), delta)
        .max(ratio((ys[1] - ys[0]).abs(), delta))
        .max(ratio(max_diff, 1.0 + delta));
    Ok(phi <= upper && phi >= lower)
}

/// Leader strategy of an equalizer. Entries more than [`CLAMP_TOL`] outside
/// `[0, 1]` are an error; smaller excursions are clamped.
pub fn synthesize_equalizer(game: &GameSpec, spec: &EqualizerSpec) -> Result<MemoryOneStrategy> {
    synthesize_equalizer_with(game, spec, CLAMP_TOL)
}

/// [`synthesize_equalizer`] with an explicit clamping tolerance.
pub fn synthesize_equalizer_with(
    game: &GameSpec,
    spec: &EqualizerSpec,
    clamp_tol: f64,
) -> Result<MemoryOneStrategy> {
    let delta = game.delta();
    if delta == 0.0 {
        return Err(Error::Domain("equalizers need a positive discount factor".into()));
    }
    let w = weighted_follower_rewards(game, spec.omega())?;
    let hat = leader_indicator(game);
    let base = (1.0 - delta) * spec.leader_init();
    let mut probs = Vec::with_capacity(w.len());
    for (j, (&wj, &h)) in w.iter().zip(&hat).enumerate() {
        let p = (spec.phi() * (spec.gamma() - wj) - base + h) / delta;
        if !(-clamp_tol..=1.0 + clamp_tol).contains(&p) {
            return Err(Error::Infeasible {
                state: j + 1,
                value: p,
            });
        }
        probs.push(p.clamp(0.0, 1.0));
    }
    MemoryOneStrategy::new(probs, spec.leader_init())
}

/// Equalizer enforcing `gamma`. At `Γ±` the witnessing vertex `φ` is used;
/// inside the interval `φ` is the midpoint of its feasible range.
pub fn equalizer_for_gamma(
    game: &GameSpec,
    omega: &[f64],
    gamma: f64,
    leader_init: f64,
) -> Result<EqualizerSpec> {
    let region = feasibility_region(game, omega, leader_init)?;
    let bounds = region.bounds.ok_or(Error::NoEqualizer)?;
    let spec = |phi| EqualizerSpec::new(omega.to_vec(), gamma, phi, leader_init);
    if gamma == bounds.gamma_plus {
        return spec(bounds.phi_plus);
    }
    if gamma == bounds.gamma_minus {
        return spec(bounds.phi_minus);
    }
    for positive in [true, false] {
        if let Some((lo, hi)) = phi_range(&region.constraints, gamma, positive) {
            return spec(0.5 * (lo + hi));
        }
    }
    Err(Error::GammaOutOfRange {
        gamma,
        lower: bounds.gamma_minus,
        upper: bounds.gamma_plus,
    })
}

/// Feasible `φ` for a fixed `γ` on one side of zero. Each constraint becomes
/// `(cu + cv·γ)·φ ≤ b`.
pub fn phi_range(constraints: &[HalfPlane], gamma: f64, positive: bool) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = if positive {
        (MIN_ABS_PHI, MAX_ABS_U)
    } else {
        (-MAX_ABS_U, -MIN_ABS_PHI)
    };
    for c in constraints {
        let a = c.cu + c.cv * gamma;
        let tol = 1e-12 * (1.0 + c.b.abs() + (c.cv * gamma).abs());
        if a.abs() <= f64::EPSILON * (c.cu.abs() + (c.cv * gamma).abs()) {
            if c.b < -tol {
                return None;
            }
            continue;
        }
        let bound = c.b / a;
        if a > 0.0 {
            hi = hi.min(bound);
        } else {
            lo = lo.max(bound);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Largest `|Σ_i ω_i U_i - γ|` over `trials` random follower profiles.
pub fn verify_enforcement(
    game: &GameSpec,
    spec: &EqualizerSpec,
    zd: &MemoryOneStrategy,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let n = game.n();
    let m = game.num_states();
    if spec.omega().len() != n - 1 {
        return Err(Error::Domain(
            "omega length does not match the follower count".into(),
        ));
    }
    if zd.len() != m {
        return Err(Error::Domain(
            "leader strategy length does not match the game".into(),
        ));
    }
    let eval = Evaluator::new(game);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut followers: Vec<Vec<f64>> = vec![vec![0.0; m]; n - 1];
    let mut init = vec![zd.init_prob(); n];
    for _ in 0..trials {
        for (k, f) in followers.iter_mut().enumerate() {
            f.iter_mut().for_each(|p| *p = rng.gen());
            init[k + 1] = rng.gen();
        }
        let mut probs: Vec<&[f64]> = vec![zd.probs()];
        probs.extend(followers.iter().map(|f| f.as_slice()));
        let u = eval.utilities_raw(&probs, &init)?;
        let weighted: f64 = spec.omega().iter().zip(&u[1..]).map(|(w, x)| w * x).sum();
        worst = worst.max((weighted - spec.gamma()).abs());
    }
    Ok(worst)
}
