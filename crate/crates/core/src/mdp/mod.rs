//! Tabular linear mixture MDP model.
//!
//! The transition kernel is an inner product of known signed basis measures
//! with an unknown parameter vector: `P(s'|s,a) = <phi(s'|s,a), theta*>`.
//! Transitions are time-homogeneous; rewards may be stage-dependent. This
//! module holds the model, its validity checks, trajectory sampling under
//! the true kernel, and the exact dynamic-programming oracles used to score
//! policies.

pub mod hard;
pub mod io;
pub mod random;

use rand::Rng;

use crate::error::{invalid, Result};

/// Finite linear mixture MDP: features `phi[s][a][s'] in R^d` plus the true
/// parameter `theta*`.
#[derive(Debug, Clone)]
pub struct LinearMixtureMdp {
    num_states: usize,
    num_actions: usize,
    dim: usize,
    horizon: usize,
    /// Flat `[s][a][s'][i]` basis-measure tensor.
    features: Vec<f64>,
    theta_star: Vec<f64>,
    norm_bound: f64,
    initial_state: usize,
}

impl LinearMixtureMdp {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        dim: usize,
        horizon: usize,
        features: Vec<f64>,
        theta_star: Vec<f64>,
        norm_bound: f64,
        initial_state: usize,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || dim == 0 || horizon == 0 {
            return Err(invalid("all of S, A, d, H must be >= 1"));
        }
        if features.len() != num_states * num_actions * num_states * dim {
            return Err(invalid(format!(
                "features length {} != S*A*S*d = {}",
                features.len(),
                num_states * num_actions * num_states * dim
            )));
        }
        if theta_star.len() != dim {
            return Err(invalid("theta_star length != d"));
        }
        if initial_state >= num_states {
            return Err(invalid("initial state out of range"));
        }
        if !(norm_bound > 0.0) {
            return Err(invalid("norm bound B must be positive"));
        }
        Ok(Self {
            num_states,
            num_actions,
            dim,
            horizon,
            features,
            theta_star,
            norm_bound,
            initial_state,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub fn theta_star(&self) -> &[f64] {
        self.theta_star.as_slice()
    }

    /// Same kernel, different episode length.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    /// The feature-only view handed to learners; it exposes no `theta*`.
    pub fn view(&self) -> FeatureView<'_> {
        FeatureView {
            num_states: self.num_states,
            num_actions: self.num_actions,
            dim: self.dim,
            horizon: self.horizon,
            initial_state: self.initial_state,
            norm_bound: self.norm_bound,
            features: &self.features,
        }
    }

    pub fn feature(&self, s: usize, a: usize, s_next: usize) -> &[f64] {
        self.view().feature(s, a, s_next)
    }

    /// `phi_V(s,a) = sum_{s'} phi(s'|s,a) V(s')`.
    pub fn phi_v(&self, s: usize, a: usize, v: &[f64]) -> Result<Vec<f64>> {
        if s >= self.num_states || a >= self.num_actions {
            return Err(invalid("state or action index out of range"));
        }
        if v.len() != self.num_states {
            return Err(invalid("value vector length != S"));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite value entry"));
        }
        let mut out = vec![0.0; self.dim];
        self.view().phi_v_into(s, a, v, &mut out);
        Ok(out)
    }

    /// True transition probability `<phi(s'|s,a), theta*>`.
    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        dot(self.feature(s, a, s_next), &self.theta_star)
    }

    /// Dense `[s][a][s']` table of true transition probabilities.
    pub fn transition_table(&self) -> Vec<f64> {
        let (ns, na) = (self.num_states, self.num_actions);
        let mut p = vec![0.0; ns * na * ns];
        for s in 0..ns {
            for a in 0..na {
                for sn in 0..ns {
                    p[(s * na + a) * ns + sn] = self.prob(s, a, sn);
                }
            }
        }
        p
    }

    /// Samples a successor state from the true kernel.
    pub fn sample_next(&self, s: usize, a: usize, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last_positive = s;
        for sn in 0..self.num_states {
            let p = self.prob(s, a, sn).max(0.0);
            if p > 0.0 {
                last_positive = sn;
            }
            acc += p;
            if u < acc {
                return sn;
            }
        }
        last_positive
    }
}

/// Borrowed feature tensor plus shape; the exploration phase works through
/// this view so the true parameter stays behind the sampler.
#[derive(Debug, Clone, Copy)]
pub struct FeatureView<'a> {
    pub num_states: usize,
    pub num_actions: usize,
    pub dim: usize,
    pub horizon: usize,
    pub initial_state: usize,
    pub norm_bound: f64,
    features: &'a [f64],
}

impl<'a> FeatureView<'a> {
    pub fn feature(&self, s: usize, a: usize, s_next: usize) -> &'a [f64] {
        let base = ((s * self.num_actions + a) * self.num_states + s_next) * self.dim;
        &self.features[base..base + self.dim]
    }

    /// Writes `phi_V(s,a)` into `out` without allocating.
    pub fn phi_v_into(&self, s: usize, a: usize, v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out[..d].fill(0.0);
        let row_base = (s * self.num_actions + a) * self.num_states * d;
        for (sn, &vs) in v.iter().enumerate() {
            if vs != 0.0 {
                let f = &self.features[row_base + sn * d..row_base + (sn + 1) * d];
                for i in 0..d {
                    out[i] += vs * f[i];
                }
            }
        }
    }
}

/// Stage-dependent deterministic policy: one action per `(h, s)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    horizon: usize,
    num_states: usize,
    actions: Vec<usize>,
}

impl Policy {
    pub fn new(horizon: usize, num_states: usize, actions: Vec<usize>) -> Result<Self> {
        if actions.len() != horizon * num_states {
            return Err(invalid("policy table length != H*S"));
        }
        Ok(Self {
            horizon,
            num_states,
            actions,
        })
    }

    pub fn uniform_action(horizon: usize, num_states: usize, action: usize) -> Self {
        Self {
            horizon,
            num_states,
            actions: vec![action; horizon * num_states],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    /// Action at stage `h` (0-based) in state `s`.
    pub fn at(&self, h: usize, s: usize) -> usize {
        self.actions[h * self.num_states + s]
    }

    pub fn set(&mut self, h: usize, s: usize, a: usize) {
        self.actions[h * self.num_states + s] = a;
    }

    pub fn table(&self) -> &[usize] {
        &self.actions
    }
}

/// Stage-dependent reward `r[h][s][a]` with entries in `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardFunction {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl RewardFunction {
    pub fn new(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != horizon * num_states * num_actions {
            return Err(invalid("reward table length != H*S*A"));
        }
        Ok(Self {
            horizon,
            num_states,
            num_actions,
            values,
        })
    }

    pub fn zero(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            horizon,
            num_states,
            num_actions,
            values: vec![0.0; horizon * num_states * num_actions],
        }
    }

    /// `1{h = h*, s = s*, a = a*}` — the indicator family member.
    pub fn indicator(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        h_star: usize,
        s_star: usize,
        a_star: usize,
    ) -> Self {
        let mut r = Self::zero(horizon, num_states, num_actions);
        r.values[(h_star * num_states + s_star) * num_actions + a_star] = 1.0;
        r
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[(h * self.num_states + s) * self.num_actions + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

/// A sampled episode: `H+1` states and `H` actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub episode: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// One violated model invariant, with its location and magnitude.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `sum_{s'} <phi(s'|s,a), theta*>` differs from 1.
    RowSum { s: usize, a: usize, sum: f64 },
    /// A single `<phi(s'|s,a), theta*>` leaves `[0, 1]`.
    ProbRange {
        s: usize,
        a: usize,
        s_next: usize,
        value: f64,
    },
    /// `||theta*||_2` exceeds the declared bound.
    ThetaNorm { norm: f64, bound: f64 },
    /// `||phi_V(s,a)||_2` exceeds 1 for some binary V.
    PhiNorm { s: usize, a: usize, norm: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::RowSum { s, a, sum } => {
                write!(
                    f,
                    "row (s={s}, a={a}) sums to {sum} (deficit {})",
                    1.0 - sum
                )
            }
            Violation::ProbRange {
                s,
                a,
                s_next,
                value,
            } => {
                write!(
                    f,
                    "probability (s={s}, a={a}, s'={s_next}) = {value} outside [0,1]"
                )
            }
            Violation::ThetaNorm { norm, bound } => {
                write!(f, "||theta*|| = {norm} exceeds B = {bound}")
            }
            Violation::PhiNorm { s, a, norm } => {
                write!(f, "||phi_V(s={s}, a={a})|| = {norm} exceeds 1")
            }
        }
    }
}

/// Outcome of [`validate`]: empty iff the instance satisfies the model.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

const ROW_SUM_TOL: f64 = 1e-10;
const PROB_RANGE_TOL: f64 = 1e-12;
const PHI_NORM_TOL: f64 = 1e-9;
/// Binary value vectors are enumerated exactly up to this many states; above
/// it the check falls back to random sampling.
const VERTEX_ENUM_MAX_STATES: usize = 20;
const VERTEX_SAMPLE_COUNT: usize = 10_000;

/// Checks probability validity, the parameter norm bound, and the feature
/// norm bound over binary value functions. Violations are report entries,
/// never failures. The maximum of the convex map `V -> ||phi_V||` over the
/// box `[0,1]^S` is attained at a vertex, so enumerating binary V is exact.
pub fn validate(mdp: &LinearMixtureMdp) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (ns, na) = (mdp.num_states, mdp.num_actions);

    for s in 0..ns {
        for a in 0..na {
            let mut sum = 0.0;
            for sn in 0..ns {
                let p = mdp.prob(s, a, sn);
                sum += p;
                if !(-PROB_RANGE_TOL..=1.0 + PROB_RANGE_TOL).contains(&p) {
                    report.violations.push(Violation::ProbRange {
                        s,
                        a,
                        s_next: sn,
                        value: p,
                    });
                }
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                report.violations.push(Violation::RowSum { s, a, sum });
            }
        }
    }

    let theta_norm = mdp.theta_star.iter().map(|x| x * x).sum::<f64>().sqrt();
    if theta_norm > mdp.norm_bound {
        report.violations.push(Violation::ThetaNorm {
            norm: theta_norm,
            bound: mdp.norm_bound,
        });
    }

    for s in 0..ns {
        for a in 0..na {
            let worst = if ns <= VERTEX_ENUM_MAX_STATES {
                max_phi_norm_vertices(mdp, s, a)
            } else {
                max_phi_norm_sampled(mdp, s, a)
            };
            if worst > 1.0 + PHI_NORM_TOL {
                report
                    .violations
                    .push(Violation::PhiNorm { s, a, norm: worst });
            }
        }
    }

    report
}

/// Gray-code walk over all binary V: each step toggles one state, so the
/// running feature sum is updated in O(d).
fn max_phi_norm_vertices(mdp: &LinearMixtureMdp, s: usize, a: usize) -> f64 {
    let ns = mdp.num_states;
    let d = mdp.dim;
    let mut acc = vec![0.0; d];
    let mut included = vec![false; ns];
    let mut worst = 0.0f64;
    let count: u64 = 1 << ns;
    for g in 1..count {
        let bit = g.trailing_zeros() as usize;
        let f = mdp.feature(s, a, bit);
        if included[bit] {
            for i in 0..d {
                acc[i] -= f[i];
            }
        } else {
            for i in 0..d {
                acc[i] += f[i];
            }
        }
        included[bit] = !included[bit];
        let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(norm);
    }
    worst
}

fn max_phi_norm_sampled(mdp: &LinearMixtureMdp, s: usize, a: usize) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x9e3779b97f4a7c15);
    let ns = mdp.num_states;
    let d = mdp.dim;
    let mut worst = 0.0f64;
    let mut acc = vec![0.0; d];
    for _ in 0..VERTEX_SAMPLE_COUNT {
        acc.fill(0.0);
        for sn in 0..ns {
            if rng.gen::<bool>() {
                let f = mdp.feature(s, a, sn);
                for i in 0..d {
                    acc[i] += f[i];
                }
            }
        }
        worst = worst.max(acc.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    worst
}

// ---------------------------------------------------------------------------
// Sampling and exact DP
// ---------------------------------------------------------------------------

/// Rolls one episode under the true kernel; deterministic given the RNG state.
pub fn sample_episode(
    mdp: &LinearMixtureMdp,
    policy: &Policy,
    episode: usize,
    rng: &mut impl Rng,
) -> Result<Trajectory> {
    if policy.horizon() != mdp.horizon || policy.num_states() != mdp.num_states {
        return Err(invalid("policy shape does not match the MDP"));
    }
    if policy.table().iter().any(|&a| a >= mdp.num_actions) {
        return Err(invalid("policy action index out of range"));
    }
    let mut states = Vec::with_capacity(mdp.horizon + 1);
    let mut actions = Vec::with_capacity(mdp.horizon);
    let mut s = mdp.initial_state;
    states.push(s);
    for h in 0..mdp.horizon {
        let a = policy.at(h, s);
        let sn = mdp.sample_next(s, a, rng);
        actions.push(a);
        states.push(sn);
        s = sn;
    }
    Ok(Trajectory {
        episode,
        states,
        actions,
    })
}

/// Exact `V_1^pi(s_1; r)` by backward induction under the true kernel.
pub fn policy_value(mdp: &LinearMixtureMdp, policy: &Policy, r: &RewardFunction) -> f64 {
    assert_eq!(r.horizon(), mdp.horizon);
    assert_eq!(policy.horizon(), mdp.horizon);
    let ns = mdp.num_states;
    let p = mdp.transition_table();
    let mut v_next = vec![0.0; ns];
    let mut v = vec![0.0; ns];
    for h in (0..mdp.horizon).rev() {
        for s in 0..ns {
            let a = policy.at(h, s);
            let row = &p[(s * mdp.num_actions + a) * ns..(s * mdp.num_actions + a + 1) * ns];
            let mut exp_v = 0.0;
            for sn in 0..ns {
                exp_v += row[sn] * v_next[sn];
            }
            v[s] = r.get(h, s, a) + exp_v;
        }
        std::mem::swap(&mut v, &mut v_next);
    }
    v_next[mdp.initial_state]
}

/// Exact `V_1^*(s_1; r)` and an optimal deterministic stage policy; ties go
/// to the smallest action index.
pub fn optimal_value_and_policy(mdp: &LinearMixtureMdp, r: &RewardFunction) -> (f64, Policy) {
    assert_eq!(r.horizon(), mdp.horizon);
    let ns = mdp.num_states;
    let na = mdp.num_actions;
    let p = mdp.transition_table();
    let mut v_next = vec![0.0; ns];
    let mut v = vec![0.0; ns];
    let mut policy = Policy::uniform_action(mdp.horizon, ns, 0);
    for h in (0..mdp.horizon).rev() {
        for s in 0..ns {
            let mut best_q = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..na {
                let row = &p[(s * na + a) * ns..(s * na + a + 1) * ns];
                let mut q = r.get(h, s, a);
                for sn in 0..ns {
                    q += row[sn] * v_next[sn];
                }
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            v[s] = best_q;
            policy.set(h, s, best_a);
        }
        std::mem::swap(&mut v, &mut v_next);
    }
    (v_next[mdp.initial_state], policy)
}

/// Transitions below this are treated as unreachable in the max-total-reward
/// DP; true zeros of the kernel stay zero, the tolerance only absorbs
/// floating-point residue in `<phi, theta*>`.
const REACHABILITY_TOL: f64 = 1e-12;

/// Maximum of `sum_h r_h(s_h, a_h)` over all positive-probability
/// trajectories — the membership test for the bounded-total-reward class.
pub fn max_total_reward(mdp: &LinearMixtureMdp, r: &RewardFunction) -> f64 {
    assert_eq!(r.horizon(), mdp.horizon);
    let ns = mdp.num_states;
    let na = mdp.num_actions;
    let p = mdp.transition_table();
    let mut v_next = vec![0.0; ns];
    let mut v = vec![0.0; ns];
    for h in (0..mdp.horizon).rev() {
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let row = &p[(s * na + a) * ns..(s * na + a + 1) * ns];
                let mut succ_best = 0.0f64;
                let mut any = false;
                for sn in 0..ns {
                    if row[sn] > REACHABILITY_TOL {
                        succ_best = if any {
                            succ_best.max(v_next[sn])
                        } else {
                            v_next[sn]
                        };
                        any = true;
                    }
                }
                let total = r.get(h, s, a) + if any { succ_best } else { 0.0 };
                best = best.max(total);
            }
            v[s] = best;
        }
        std::mem::swap(&mut v, &mut v_next);
    }
    v_next[mdp.initial_state]
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}
