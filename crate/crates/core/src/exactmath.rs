//! Exact enumeration of trajectory laws on finite instances, exact
//! moments, weighted norms, divergences, and the TV-conditioning bound.
//!
//! Enumeration materializes every trajectory with nonzero mass together
//! with its exact product probability; adaptive policies are evaluated on
//! each prefix. Probabilities are accumulated in the log domain so that
//! long horizons cannot underflow.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{BehaviorPolicy, EvaluationFunctional, Observation, ProblemInstance, Trajectory};
use crate::table::Table;

/// Default cap on the enumerated support size.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

/// One support point of the trajectory law.
#[derive(Debug, Clone)]
pub struct WeightedTrajectory {
    pub trajectory: Trajectory,
    pub probability: f64,
    pub log_probability: f64,
}

/// The full law of length-`horizon` trajectories of a finite instance.
#[derive(Debug, Clone)]
pub struct TrajectoryDistribution {
    entries: Vec<WeightedTrajectory>,
    horizon: usize,
}

impl TrajectoryDistribution {
    pub fn entries(&self) -> &[WeightedTrajectory] {
        &self.entries
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }

    /// Exact expectation of a trajectory statistic.
    pub fn expectation(&self, statistic: impl Fn(&Trajectory) -> f64) -> f64 {
        self.entries
            .iter()
            .map(|e| e.probability * statistic(&e.trajectory))
            .sum()
    }

    /// Exact expectation of a per-round statistic fed with the round's
    /// observation and its preceding history.
    pub fn round_expectation(
        &self,
        round: usize,
        statistic: impl Fn(&Observation, &[Observation]) -> f64,
    ) -> f64 {
        self.expectation(|t| statistic(&t.steps[round], t.prefix(round)))
    }

    /// Exact mean, variance, and MSE against `target` of a statistic.
    pub fn moments(
        &self,
        statistic: impl Fn(&Trajectory) -> f64,
        target: f64,
    ) -> ExactMoments {
        let mut mean = 0.0;
        let mut second = 0.0;
        let mut mse = 0.0;
        for e in &self.entries {
            let v = statistic(&e.trajectory);
            mean += e.probability * v;
            second += e.probability * v * v;
            mse += e.probability * (v - target) * (v - target);
        }
        ExactMoments {
            mean,
            variance: (second - mean * mean).max(0.0),
            mse,
        }
    }
}

/// Exact moments of a statistic under the enumerated law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactMoments {
    pub mean: f64,
    pub variance: f64,
    pub mse: f64,
}

/// Enumerate all length-`horizon` trajectories with nonzero mass.
///
/// Fails when `(|X||A||Y|)^horizon` exceeds `cap` (default
/// [`DEFAULT_ENUMERATION_CAP`]) or outcomes are Gaussian.
pub fn enumerate_trajectories(
    instance: &ProblemInstance,
    policy: &dyn BehaviorPolicy,
    horizon: usize,
    cap: Option<u128>,
) -> Result<TrajectoryDistribution> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    if !instance.is_enumerable() {
        return Err(Error::GaussianNotEnumerable);
    }
    let cap = cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    let (nx, na) = (instance.n_contexts(), instance.n_actions());
    let ny = instance.grid_kernel_row(0, 0)?.0.len();
    let per_round = (nx * na * ny) as u128;
    let mut size: u128 = 1;
    for _ in 0..horizon {
        size = size.saturating_mul(per_round);
        if size > cap {
            return Err(Error::EnumerationCap { size, cap });
        }
    }

    // Parallelize over the first round's outcome partition, then extend
    // each branch depth-first. Branch order is deterministic.
    let first_round = first_round_branches(instance, policy)?;
    let groups: Vec<Vec<WeightedTrajectory>> = first_round
        .into_par_iter()
        .map(|(obs, log_p)| {
            let mut entries = Vec::new();
            let mut prefix = vec![obs];
            extend_branches(instance, policy, horizon, &mut prefix, log_p, &mut entries);
            entries
        })
        .collect();
    let entries: Vec<WeightedTrajectory> = groups.into_iter().flatten().collect();
    Ok(TrajectoryDistribution { entries, horizon })
}

fn first_round_branches(
    instance: &ProblemInstance,
    policy: &dyn BehaviorPolicy,
) -> Result<Vec<(Observation, f64)>> {
    let mut branches = Vec::new();
    for x in 0..instance.n_contexts() {
        let px = instance.context_pmf()[x];
        if px <= 0.0 {
            continue;
        }
        let pmf = policy.pmf(x, &[]);
        for a in 0..instance.n_actions() {
            let pa = pmf[a];
            if pa <= 0.0 {
                continue;
            }
            let (grid, row) = instance.grid_kernel_row(x, a)?;
            for (y, (&py, &value)) in row.iter().zip(grid).enumerate() {
                if py <= 0.0 {
                    continue;
                }
                branches.push((
                    Observation {
                        context: x,
                        action: a,
                        outcome: value,
                        outcome_idx: Some(y),
                        propensity: pa,
                    },
                    px.ln() + pa.ln() + py.ln(),
                ));
            }
        }
    }
    Ok(branches)
}

fn extend_branches(
    instance: &ProblemInstance,
    policy: &dyn BehaviorPolicy,
    horizon: usize,
    prefix: &mut Vec<Observation>,
    log_p: f64,
    entries: &mut Vec<WeightedTrajectory>,
) {
    if prefix.len() == horizon {
        entries.push(WeightedTrajectory {
            trajectory: Trajectory {
                steps: prefix.clone(),
            },
            probability: log_p.exp(),
            log_probability: log_p,
        });
        return;
    }
    for x in 0..instance.n_contexts() {
        let px = instance.context_pmf()[x];
        if px <= 0.0 {
            continue;
        }
        let pmf = policy.pmf(x, prefix);
        for a in 0..instance.n_actions() {
            let pa = pmf[a];
            if pa <= 0.0 {
                continue;
            }
            let (grid, row) = instance
                .grid_kernel_row(x, a)
                .expect("enumerability checked on entry");
            for (y, (&py, &value)) in row.iter().zip(grid).enumerate() {
                if py <= 0.0 {
                    continue;
                }
                prefix.push(Observation {
                    context: x,
                    action: a,
                    outcome: value,
                    outcome_idx: Some(y),
                    propensity: pa,
                });
                extend_branches(
                    instance,
                    policy,
                    horizon,
                    prefix,
                    log_p + px.ln() + pa.ln() + py.ln(),
                    entries,
                );
                prefix.pop();
            }
        }
    }
}

/// Log-density of a recorded trajectory under a (possibly different)
/// instance and policy, re-deriving propensities from the prefix.
pub fn log_probability(
    instance: &ProblemInstance,
    policy: &dyn BehaviorPolicy,
    trajectory: &Trajectory,
) -> Result<f64> {
    let mut log_p = 0.0;
    for (i, obs) in trajectory.steps.iter().enumerate() {
        let px = instance.context_pmf()[obs.context];
        let pa = policy.pmf(obs.context, trajectory.prefix(i))[obs.action];
        let y = obs
            .outcome_idx
            .ok_or_else(|| Error::Evaluation("trajectory lacks grid outcome indices".into()))?;
        let (_, row) = instance.grid_kernel_row(obs.context, obs.action)?;
        let py = row[y];
        if px <= 0.0 || pa <= 0.0 || py <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        log_p += px.ln() + pa.ln() + py.ln();
    }
    Ok(log_p)
}

// ── Weighted norms and occupancy ────────────────────────────────────────

/// Squared `k`-th weighted norm of a fixed table:
/// `(1/k) Σ_{i≤k} E[g²(X_i,A_i) φ²(X_i,A_i) / π_i²]`.
pub fn weighted_l2_norm_sq(
    dist: &TrajectoryDistribution,
    g: &EvaluationFunctional,
    phi: &Table,
    k: usize,
) -> Result<f64> {
    if k == 0 || k > dist.horizon() {
        return Err(Error::Config(format!(
            "norm order {k} out of range for horizon {}",
            dist.horizon()
        )));
    }
    let mut total = 0.0;
    for i in 0..k {
        total += dist.round_expectation(i, |obs, _| {
            let gv = g.get(obs.context, obs.action);
            let pv = phi.get(obs.context, obs.action);
            gv * gv * pv * pv / (obs.propensity * obs.propensity)
        });
    }
    Ok(total / k as f64)
}

/// Per-pair occupancy moments `W(x,a) = (1/n) Σ_i E[w_i 1{(X_i,A_i)=(x,a)}]`
/// where the round weight is `g²/π_i²` (weighted) or `1` (plain).
///
/// For any fixed table `φ`, `Σ_{x,a} W(x,a) φ(x,a)²` equals the squared
/// `n`-th weighted norm (weighted case) or the average expected squared
/// value at the visited pair (plain case).
pub fn occupancy_weights(
    dist: &TrajectoryDistribution,
    g: Option<&EvaluationFunctional>,
    n_contexts: usize,
    n_actions: usize,
) -> Table {
    let mut w = Table::zeros(n_contexts, n_actions);
    let scale = 1.0 / dist.horizon() as f64;
    for e in dist.entries() {
        for obs in &e.trajectory.steps {
            let weight = match g {
                Some(g) => {
                    let gv = g.get(obs.context, obs.action);
                    gv * gv / (obs.propensity * obs.propensity)
                }
                None => 1.0,
            };
            let cur = w.get(obs.context, obs.action);
            w.set(obs.context, obs.action, cur + scale * e.probability * weight);
        }
    }
    w
}

/// Optimal variance `v*² = Var_{X~Ξ*}[⟨g(X,·), μ*(X,·)⟩] + ‖σ‖²_(n)`.
pub fn optimal_variance(
    dist: &TrajectoryDistribution,
    instance: &ProblemInstance,
    g: &EvaluationFunctional,
) -> Result<f64> {
    let mut mean = 0.0;
    let mut second = 0.0;
    for x in 0..instance.n_contexts() {
        let v = g.contract(x, instance.mean_outcome());
        let p = instance.context_pmf()[x];
        mean += p * v;
        second += p * v * v;
    }
    let context_var = (second - mean * mean).max(0.0);
    let noise = weighted_l2_norm_sq(dist, g, &instance.conditional_std(), dist.horizon())?;
    Ok(context_var + noise)
}

// ── Divergences ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    Kl,
    ChiSq,
    Tv,
}

/// Divergence between pmfs on a shared index set.
///
/// KL and χ² return `+∞` when `q` has a zero where `p` has mass;
/// `0 · log 0 = 0` by convention.
pub fn divergence(kind: DivergenceKind, p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension("pmf length mismatch".into()));
    }
    if p.iter().chain(q.iter()).any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidPmf("divergence inputs must be nonnegative".into()));
    }
    let value = match kind {
        DivergenceKind::Kl => {
            let mut acc = 0.0;
            for (&pi, &qi) in p.iter().zip(q) {
                if pi > 0.0 {
                    if qi <= 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    acc += pi * (pi / qi).ln();
                }
            }
            acc
        }
        DivergenceKind::ChiSq => {
            let mut acc = 0.0;
            for (&pi, &qi) in p.iter().zip(q) {
                if qi <= 0.0 {
                    if pi > 0.0 {
                        return Ok(f64::INFINITY);
                    }
                } else {
                    let d = pi - qi;
                    acc += d * d / qi;
                }
            }
            acc
        }
        DivergenceKind::Tv => 0.5 * p.iter().zip(q).map(|(&pi, &qi)| (pi - qi).abs()).sum::<f64>(),
    };
    Ok(value)
}

/// TV-conditioning certificate: conditioning two measures on events of
/// mass at least `1 - ε` moves their TV distance by at most `2ε`.
///
/// Returns `(gap, 2ε)` where `gap = |TV(μ|A, ν|B) − TV(μ, ν)|`, requiring
/// `ε ≤ 1/4`.
pub fn tv_conditioning_gap(
    mu: &[f64],
    nu: &[f64],
    event_a: &[bool],
    event_b: &[bool],
) -> Result<(f64, f64)> {
    if mu.len() != nu.len() || mu.len() != event_a.len() || mu.len() != event_b.len() {
        return Err(Error::Dimension("conditioning inputs must share length".into()));
    }
    let mass_a: f64 = mu.iter().zip(event_a).filter(|(_, &e)| e).map(|(&p, _)| p).sum();
    let mass_b: f64 = nu.iter().zip(event_b).filter(|(_, &e)| e).map(|(&p, _)| p).sum();
    let eps = 1.0 - mass_a.min(mass_b);
    if eps > 0.25 {
        return Err(Error::Precondition(format!(
            "event mass too small: ε = {eps} exceeds 1/4"
        )));
    }
    let cond_mu: Vec<f64> = mu
        .iter()
        .zip(event_a)
        .map(|(&p, &e)| if e { p / mass_a } else { 0.0 })
        .collect();
    let cond_nu: Vec<f64> = nu
        .iter()
        .zip(event_b)
        .map(|(&p, &e)| if e { p / mass_b } else { 0.0 })
        .collect();
    let tv_cond = divergence(DivergenceKind::Tv, &cond_mu, &cond_nu)?;
    let tv_base = divergence(DivergenceKind::Tv, mu, nu)?;
    let gap = (tv_cond - tv_base).abs();
    let bound = 2.0 * eps;
    if gap > bound + 1e-12 {
        return Err(Error::Evaluation(format!(
            "conditioning gap {gap} exceeds certificate {bound}"
        )));
    }
    Ok((gap, bound))
}
