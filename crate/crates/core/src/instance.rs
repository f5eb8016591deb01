//! Problem instances, evaluation functionals, behavior policies, and the
//! adaptive data-generation procedure.
//!
//! An instance couples a context distribution with an outcome kernel over
//! finite label sets. Outcomes are either a finite grid inside `[-L, L]`
//! (the enumerable case) or Gaussian per context-action pair (used only by
//! the lower-bound constructions and Monte Carlo sampling).

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_pmf, SeedStream};
use crate::table::{validate_pmf, Table};
use crate::tol;

// ── Outcome models ──────────────────────────────────────────────────────

/// Conditional outcome law per context-action pair.
#[derive(Debug, Clone)]
pub enum OutcomeModel {
    /// Finite grid of outcome values with a conditional pmf per pair.
    /// `kernel[(x * n_actions + a) * grid.len() + y]` is `γ(y | x, a)`.
    Grid { grid: Vec<f64>, kernel: Vec<f64> },
    /// Gaussian outcomes with per-pair mean and variance tables.
    Gaussian { mean: Table, variance: Table },
}

// ── Problem instance ────────────────────────────────────────────────────

/// Ground-truth problem instance: context distribution, outcome kernel,
/// and the derived mean-outcome and conditional-variance tables.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    contexts: Vec<String>,
    actions: Vec<String>,
    outcomes: OutcomeModel,
    magnitude_bound: f64,
    context_pmf: Vec<f64>,
    mean_outcome: Table,
    conditional_variance: Table,
}

impl ProblemInstance {
    /// Build a finite-grid instance and derive its moment tables.
    ///
    /// `kernel[x][a][y]` is the conditional pmf of grid value `y` given the
    /// pair `(x, a)`. The magnitude bound is `max |grid value|` unless a
    /// larger `bound` is supplied.
    pub fn from_grid(
        contexts: Vec<String>,
        actions: Vec<String>,
        grid: Vec<f64>,
        kernel: &[Vec<Vec<f64>>],
        context_pmf: Vec<f64>,
        bound: Option<f64>,
    ) -> Result<Self> {
        let (nx, na, ny) = (contexts.len(), actions.len(), grid.len());
        if nx == 0 || na == 0 || ny == 0 {
            return Err(Error::Config("empty context/action/outcome set".into()));
        }
        if context_pmf.len() != nx {
            return Err(Error::Dimension("context pmf length".into()));
        }
        validate_pmf(&context_pmf, "context pmf")?;
        if kernel.len() != nx {
            return Err(Error::Dimension("kernel context dimension".into()));
        }

        let grid_max = grid.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let magnitude_bound = match bound {
            Some(b) if b > 0.0 => {
                if grid_max > b + tol::PMF_SUM {
                    return Err(Error::Config(format!(
                        "grid value magnitude {grid_max} exceeds bound {b}"
                    )));
                }
                b
            }
            Some(_) => return Err(Error::Config("magnitude bound must be positive".into())),
            None => {
                if grid_max == 0.0 {
                    1.0
                } else {
                    grid_max
                }
            }
        };

        let mut flat = vec![0.0; nx * na * ny];
        let mut mean = Table::zeros(nx, na);
        let mut var = Table::zeros(nx, na);
        for x in 0..nx {
            if kernel[x].len() != na {
                return Err(Error::Dimension("kernel action dimension".into()));
            }
            for a in 0..na {
                let row = &kernel[x][a];
                if row.len() != ny {
                    return Err(Error::Dimension("kernel outcome dimension".into()));
                }
                validate_pmf(row, &format!("kernel({x},{a})"))?;
                let m: f64 = row.iter().zip(&grid).map(|(p, y)| p * y).sum();
                let v: f64 = row
                    .iter()
                    .zip(&grid)
                    .map(|(p, y)| p * (y - m) * (y - m))
                    .sum();
                mean.set(x, a, m);
                var.set(x, a, v.max(0.0));
                let base = (x * na + a) * ny;
                flat[base..base + ny].copy_from_slice(row);
            }
        }

        Ok(Self {
            contexts,
            actions,
            outcomes: OutcomeModel::Grid { grid, kernel: flat },
            magnitude_bound,
            context_pmf,
            mean_outcome: mean,
            conditional_variance: var,
        })
    }

    /// Build a Gaussian-outcome instance (Monte Carlo and lower-bound use
    /// only; the enumeration oracle rejects it).
    pub fn gaussian(
        contexts: Vec<String>,
        actions: Vec<String>,
        mean: Table,
        variance: Table,
        context_pmf: Vec<f64>,
        magnitude_bound: f64,
    ) -> Result<Self> {
        let (nx, na) = (contexts.len(), actions.len());
        if mean.n_contexts() != nx || mean.n_actions() != na || !mean.same_shape(&variance) {
            return Err(Error::Dimension("mean/variance table shape".into()));
        }
        if variance.values().iter().any(|&v| v < 0.0) {
            return Err(Error::Config("negative variance".into()));
        }
        if magnitude_bound <= 0.0 {
            return Err(Error::Config("magnitude bound must be positive".into()));
        }
        validate_pmf(&context_pmf, "context pmf")?;
        Ok(Self {
            contexts,
            actions,
            outcomes: OutcomeModel::Gaussian {
                mean: mean.clone(),
                variance: variance.clone(),
            },
            magnitude_bound,
            context_pmf,
            mean_outcome: mean,
            conditional_variance: variance,
        })
    }

    pub fn n_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn context_labels(&self) -> &[String] {
        &self.contexts
    }

    pub fn action_labels(&self) -> &[String] {
        &self.actions
    }

    pub fn context_pmf(&self) -> &[f64] {
        &self.context_pmf
    }

    pub fn outcomes(&self) -> &OutcomeModel {
        &self.outcomes
    }

    /// Outcome magnitude bound `L`.
    pub fn magnitude_bound(&self) -> f64 {
        self.magnitude_bound
    }

    /// Mean outcome table (the treatment effect).
    pub fn mean_outcome(&self) -> &Table {
        &self.mean_outcome
    }

    /// Conditional variance table.
    pub fn conditional_variance(&self) -> &Table {
        &self.conditional_variance
    }

    /// Conditional standard deviation table.
    pub fn conditional_std(&self) -> Table {
        self.conditional_variance.map(f64::sqrt)
    }

    pub fn is_enumerable(&self) -> bool {
        matches!(self.outcomes, OutcomeModel::Grid { .. })
    }

    /// Grid values and the kernel row for `(x, a)` on finite-grid instances.
    pub fn grid_kernel_row(&self, context: usize, action: usize) -> Result<(&[f64], &[f64])> {
        match &self.outcomes {
            OutcomeModel::Grid { grid, kernel } => {
                let ny = grid.len();
                let base = (context * self.n_actions() + action) * ny;
                Ok((grid, &kernel[base..base + ny]))
            }
            OutcomeModel::Gaussian { .. } => Err(Error::GaussianNotEnumerable),
        }
    }

    /// Clone with a different context pmf (used by tilted instances).
    pub fn with_context_pmf(&self, context_pmf: Vec<f64>) -> Result<Self> {
        if context_pmf.len() != self.n_contexts() {
            return Err(Error::Dimension("context pmf length".into()));
        }
        validate_pmf(&context_pmf, "context pmf")?;
        let mut out = self.clone();
        out.context_pmf = context_pmf;
        Ok(out)
    }
}

// ── Evaluation functionals ──────────────────────────────────────────────

/// Which specialization produced the evaluation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    /// Average treatment effect on a binary action set.
    Ate,
    /// Value of a fixed target policy.
    TargetPolicy,
    Custom,
}

/// Target evaluation function `g` over the context-action grid.
#[derive(Debug, Clone)]
pub struct EvaluationFunctional {
    pub kind: FunctionalKind,
    table: Table,
}

impl EvaluationFunctional {
    pub fn table(&self) -> &Table {
        &self.table
    }

    #[inline]
    pub fn get(&self, context: usize, action: usize) -> f64 {
        self.table.get(context, action)
    }

    /// `Σ_a g(x, a) · values(x, a)` for one context.
    pub fn contract(&self, context: usize, values: &Table) -> f64 {
        self.table.row_dot(context, values.row(context))
    }

    /// ATE functional: requires a binary action set and assigns
    /// `g(x, 0) = -1`, `g(x, 1) = +1`.
    pub fn ate(instance: &ProblemInstance) -> Result<Self> {
        if instance.n_actions() != 2 {
            return Err(Error::Config(format!(
                "ATE functional needs exactly 2 actions, got {}",
                instance.n_actions()
            )));
        }
        let mut table = Table::zeros(instance.n_contexts(), 2);
        for x in 0..instance.n_contexts() {
            table.set(x, 0, -1.0);
            table.set(x, 1, 1.0);
        }
        Ok(Self {
            kind: FunctionalKind::Ate,
            table,
        })
    }

    /// Target-policy functional: each context row of `target` must be a pmf.
    pub fn target_policy(instance: &ProblemInstance, target: Table) -> Result<Self> {
        if target.n_contexts() != instance.n_contexts()
            || target.n_actions() != instance.n_actions()
        {
            return Err(Error::Dimension("target policy table shape".into()));
        }
        for x in 0..target.n_contexts() {
            validate_pmf(target.row(x), &format!("target policy row {x}"))?;
        }
        Ok(Self {
            kind: FunctionalKind::TargetPolicy,
            table: target,
        })
    }

    /// Arbitrary evaluation table.
    pub fn custom(instance: &ProblemInstance, table: Table) -> Result<Self> {
        if table.n_contexts() != instance.n_contexts() || table.n_actions() != instance.n_actions()
        {
            return Err(Error::Dimension("evaluation table shape".into()));
        }
        Ok(Self {
            kind: FunctionalKind::Custom,
            table,
        })
    }
}

/// Off-policy value `τ* = Σ_x ξ*(x) Σ_a g(x, a) μ*(x, a)`.
pub fn off_policy_value(instance: &ProblemInstance, g: &EvaluationFunctional) -> Result<f64> {
    if g.table().n_contexts() != instance.n_contexts()
        || g.table().n_actions() != instance.n_actions()
    {
        return Err(Error::Dimension(
            "evaluation functional does not match instance".into(),
        ));
    }
    Ok((0..instance.n_contexts())
        .map(|x| instance.context_pmf[x] * g.contract(x, instance.mean_outcome()))
        .sum())
}

// ── Trajectories ────────────────────────────────────────────────────────

/// One observed round, with the realized propensity recorded at sampling
/// time. `outcome_idx` is the grid index for finite-grid instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub context: usize,
    pub action: usize,
    pub outcome: f64,
    pub outcome_idx: Option<usize>,
    pub propensity: f64,
}

/// Ordered observations of one adaptive experiment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub steps: Vec<Observation>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.steps.len()
    }

    /// Prefix of the first `i` rounds (the history before round `i + 1`).
    pub fn prefix(&self, rounds: usize) -> &[Observation] {
        &self.steps[..rounds]
    }

    /// CSV export with columns `i,x,a,y,pi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,x,a,y,pi\n");
        for (i, s) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                i + 1,
                s.context,
                s.action,
                s.outcome,
                s.propensity
            ));
        }
        out
    }
}

// ── Behavior policies ───────────────────────────────────────────────────

/// History-dependent action-sampling rule with known propensities.
///
/// `pmf` must return a strictly positive probability vector over actions
/// for every reachable `(context, history)` pair.
pub trait BehaviorPolicy: Send + Sync {
    /// Action pmf at the given context after the given history.
    fn pmf(&self, context: usize, history: &[Observation]) -> Vec<f64>;

    /// Certified positivity floor: every returned probability is `>= floor()`.
    fn floor(&self) -> f64;

    /// Per-round pmf tables when the policy ignores history, `None` for
    /// genuinely adaptive policies. Used for exact overlap scans.
    fn round_tables(&self, horizon: usize) -> Option<Vec<Table>>;
}

/// Fixed per-context action pmf, independent of round and history.
#[derive(Debug, Clone)]
pub struct MarkovTable {
    table: Table,
    floor: f64,
}

impl MarkovTable {
    pub fn new(table: Table) -> Result<Self> {
        let mut floor = f64::INFINITY;
        for x in 0..table.n_contexts() {
            validate_pmf(table.row(x), &format!("policy row {x}"))?;
            for &p in table.row(x) {
                floor = floor.min(p);
            }
        }
        if floor <= 0.0 {
            return Err(Error::Overlap("policy row contains a zero probability".into()));
        }
        Ok(Self { table, floor })
    }

    /// Uniform policy over the action set.
    pub fn uniform(n_contexts: usize, n_actions: usize) -> Self {
        let table = Table::constant(n_contexts, n_actions, 1.0 / n_actions as f64);
        Self {
            table,
            floor: 1.0 / n_actions as f64,
        }
    }

    pub fn table(&self) -> &Table {
        &self.table
    }
}

impl BehaviorPolicy for MarkovTable {
    fn pmf(&self, context: usize, _history: &[Observation]) -> Vec<f64> {
        self.table.row(context).to_vec()
    }

    fn floor(&self) -> f64 {
        self.floor
    }

    fn round_tables(&self, horizon: usize) -> Option<Vec<Table>> {
        Some(vec![self.table.clone(); horizon.max(1)])
    }
}

/// Epsilon-greedy over running empirical outcome means, with ties broken
/// by the lowest action index. The positivity floor is `epsilon / |A|`.
#[derive(Debug, Clone)]
pub struct EpsilonGreedyAdaptive {
    n_actions: usize,
    epsilon: f64,
}

impl EpsilonGreedyAdaptive {
    pub fn new(n_actions: usize, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) || epsilon == 0.0 {
            return Err(Error::Overlap(format!(
                "epsilon must lie in (0, 1], got {epsilon}"
            )));
        }
        Ok(Self { n_actions, epsilon })
    }

    /// Epsilon chosen so that the positivity floor equals `p_min`.
    pub fn with_floor(n_actions: usize, p_min: f64) -> Result<Self> {
        Self::new(n_actions, p_min * n_actions as f64)
    }

    fn greedy_action(&self, context: usize, history: &[Observation]) -> usize {
        let mut sums = vec![0.0; self.n_actions];
        let mut counts = vec![0usize; self.n_actions];
        for obs in history {
            if obs.context == context {
                sums[obs.action] += obs.outcome;
                counts[obs.action] += 1;
            }
        }
        let mut best = 0usize;
        let mut best_mean = f64::NEG_INFINITY;
        for a in 0..self.n_actions {
            let mean = if counts[a] > 0 {
                sums[a] / counts[a] as f64
            } else {
                0.0
            };
            if mean > best_mean {
                best_mean = mean;
                best = a;
            }
        }
        best
    }
}

impl BehaviorPolicy for EpsilonGreedyAdaptive {
    fn pmf(&self, context: usize, history: &[Observation]) -> Vec<f64> {
        let greedy = self.greedy_action(context, history);
        let base = self.epsilon / self.n_actions as f64;
        let mut pmf = vec![base; self.n_actions];
        pmf[greedy] += 1.0 - self.epsilon;
        pmf
    }

    fn floor(&self) -> f64 {
        self.epsilon / self.n_actions as f64
    }

    fn round_tables(&self, _horizon: usize) -> Option<Vec<Table>> {
        None
    }
}

/// Round-indexed policy tables clipped below at `p_min` and renormalized.
/// Rounds beyond the supplied schedule reuse the last table.
#[derive(Debug, Clone)]
pub struct ClippedSequential {
    tables: Vec<Table>,
    floor: f64,
}

impl ClippedSequential {
    pub fn new(raw_tables: Vec<Table>, p_min: f64) -> Result<Self> {
        if raw_tables.is_empty() {
            return Err(Error::Config("need at least one policy table".into()));
        }
        if p_min <= 0.0 {
            return Err(Error::Overlap("clipping floor must be positive".into()));
        }
        let mut tables = Vec::with_capacity(raw_tables.len());
        let mut floor = f64::INFINITY;
        for raw in &raw_tables {
            let mut clipped = raw.clone();
            for x in 0..clipped.n_contexts() {
                let row: Vec<f64> = clipped.row(x).iter().map(|&p| p.max(p_min)).collect();
                let sum: f64 = row.iter().sum();
                for (a, &p) in row.iter().enumerate() {
                    let v = p / sum;
                    clipped.set(x, a, v);
                    floor = floor.min(v);
                }
            }
            tables.push(clipped);
        }
        Ok(Self { tables, floor })
    }

    fn round_table(&self, round: usize) -> &Table {
        let idx = round.min(self.tables.len() - 1);
        &self.tables[idx]
    }
}

impl BehaviorPolicy for ClippedSequential {
    fn pmf(&self, context: usize, history: &[Observation]) -> Vec<f64> {
        self.round_table(history.len()).row(context).to_vec()
    }

    fn floor(&self) -> f64 {
        self.floor
    }

    fn round_tables(&self, horizon: usize) -> Option<Vec<Table>> {
        Some(
            (0..horizon.max(1))
                .map(|i| self.round_table(i).clone())
                .collect(),
        )
    }
}

// ── Sampling ────────────────────────────────────────────────────────────

/// Sample one trajectory with an externally managed generator.
pub fn sample_trajectory_with(
    instance: &ProblemInstance,
    policy: &dyn BehaviorPolicy,
    horizon: usize,
    rng: &mut ChaCha12Rng,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    let mut steps: Vec<Observation> = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let x = sample_pmf(rng, instance.context_pmf());
        let pmf = policy.pmf(x, &steps);
        validate_pmf(&pmf, "policy pmf")?;
        let a = sample_pmf(rng, &pmf);
        let (outcome, outcome_idx) = match instance.outcomes() {
            OutcomeModel::Grid { .. } => {
                let (grid, row) = instance.grid_kernel_row(x, a)?;
                let y = sample_pmf(rng, row);
                (grid[y], Some(y))
            }
            OutcomeModel::Gaussian { mean, variance } => {
                let z: f64 = StandardNormal.sample(rng);
                (mean.get(x, a) + variance.get(x, a).sqrt() * z, None)
            }
        };
        steps.push(Observation {
            context: x,
            action: a,
            outcome,
            outcome_idx,
            propensity: pmf[a],
        });
    }
    Ok(Trajectory { steps })
}

/// Sample one trajectory from a fixed seed (stream 0 of the seed).
pub fn sample_trajectory(
    instance: &ProblemInstance,
    policy: &dyn BehaviorPolicy,
    horizon: usize,
    seed: u64,
) -> Result<Trajectory> {
    let mut rng = SeedStream::new(seed).stream(0);
    sample_trajectory_with(instance, policy, horizon, &mut rng)
}

// ── Overlap ─────────────────────────────────────────────────────────────

/// Uniform bound `B` on `|g(x, a)| / π_i(x, hist; a)` over reachable
/// tuples with `g(x, a) ≠ 0`.
///
/// History-independent policies are scanned exactly; adaptive policies get
/// the certified bound `max |g| / floor`.
pub fn overlap_constant(
    instance: &ProblemInstance,
    policy: &dyn BehaviorPolicy,
    g: &EvaluationFunctional,
    horizon: usize,
) -> Result<f64> {
    if policy.floor() <= 0.0 {
        return Err(Error::Overlap("policy has no positivity floor".into()));
    }
    match policy.round_tables(horizon) {
        Some(tables) => {
            let mut b = 0.0_f64;
            for table in &tables {
                for x in 0..instance.n_contexts() {
                    if instance.context_pmf()[x] == 0.0 {
                        continue;
                    }
                    for a in 0..instance.n_actions() {
                        let gv = g.get(x, a);
                        if gv == 0.0 {
                            continue;
                        }
                        let p = table.get(x, a);
                        if p <= 0.0 {
                            return Err(Error::Overlap(format!(
                                "zero propensity at ({x}, {a}) where g is nonzero"
                            )));
                        }
                        b = b.max(gv.abs() / p);
                    }
                }
            }
            Ok(b)
        }
        None => Ok(g.table().max_abs() / policy.floor()),
    }
}

// ── Randomized test fixtures ────────────────────────────────────────────

/// Draw a strictly positive pmf of length `len` with floor `min_mass`.
pub fn random_pmf(rng: &mut impl Rng, len: usize, min_mass: f64) -> Vec<f64> {
    let mut weights: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w = min_mass + (1.0 - min_mass * len as f64) * (*w / sum);
    }
    weights
}

/// Random finite-grid instance at desk scale.
pub fn random_instance(
    rng: &mut impl Rng,
    n_contexts: usize,
    n_actions: usize,
    n_outcomes: usize,
    magnitude_bound: f64,
) -> ProblemInstance {
    let contexts = (0..n_contexts).map(|i| format!("x{i}")).collect();
    let actions = (0..n_actions).map(|i| format!("a{i}")).collect();
    let grid: Vec<f64> = if n_outcomes == 1 {
        vec![0.0]
    } else {
        (0..n_outcomes)
            .map(|i| magnitude_bound * (2.0 * i as f64 / (n_outcomes - 1) as f64 - 1.0))
            .collect()
    };
    let kernel: Vec<Vec<Vec<f64>>> = (0..n_contexts)
        .map(|_| {
            (0..n_actions)
                .map(|_| random_pmf(rng, n_outcomes, 0.05))
                .collect()
        })
        .collect();
    let context_pmf = random_pmf(rng, n_contexts, 0.05);
    ProblemInstance::from_grid(contexts, actions, grid, &kernel, context_pmf, Some(magnitude_bound))
        .expect("randomized instance is valid by construction")
}

/// Random Markov behavior policy with positivity floor `p_min`.
pub fn random_markov_policy(
    rng: &mut impl Rng,
    n_contexts: usize,
    n_actions: usize,
    p_min: f64,
) -> MarkovTable {
    let rows: Vec<Vec<f64>> = (0..n_contexts)
        .map(|_| random_pmf(rng, n_actions, p_min))
        .collect();
    MarkovTable::new(Table::from_rows(&rows).unwrap()).unwrap()
}

/// Random evaluation functional: ATE when the action set is binary and a
/// coin lands heads, otherwise a random target policy.
pub fn random_functional(rng: &mut impl Rng, instance: &ProblemInstance) -> EvaluationFunctional {
    if instance.n_actions() == 2 && rng.random::<f64>() < 0.5 {
        return EvaluationFunctional::ate(instance).unwrap();
    }
    let rows: Vec<Vec<f64>> = (0..instance.n_contexts())
        .map(|_| random_pmf(rng, instance.n_actions(), 0.02))
        .collect();
    EvaluationFunctional::target_policy(instance, Table::from_rows(&rows).unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn two_by_two() -> ProblemInstance {
        // Two contexts, two actions, outcomes {0, 1}.
        let kernel = vec![
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![vec![0.5, 0.5], vec![0.3, 0.7]],
        ];
        ProblemInstance::from_grid(
            vec!["x0".into(), "x1".into()],
            vec!["a0".into(), "a1".into()],
            vec![0.0, 1.0],
            &kernel,
            vec![0.4, 0.6],
            None,
        )
        .unwrap()
    }

    #[test]
    fn derived_moments_match_kernel() {
        let inst = two_by_two();
        assert!((inst.mean_outcome().get(0, 0) - 0.1).abs() < tol::EXACT_IDENTITY);
        assert!((inst.mean_outcome().get(0, 1) - 0.8).abs() < tol::EXACT_IDENTITY);
        // Bernoulli variance p(1-p).
        assert!((inst.conditional_variance().get(0, 0) - 0.09).abs() < tol::EXACT_IDENTITY);
        assert!((inst.conditional_variance().get(1, 0) - 0.25).abs() < tol::EXACT_IDENTITY);
    }

    #[test]
    fn ate_table_is_signed_indicator() {
        let inst = two_by_two();
        let g = EvaluationFunctional::ate(&inst).unwrap();
        for x in 0..2 {
            assert_eq!(g.get(x, 0), -1.0);
            assert_eq!(g.get(x, 1), 1.0);
        }
    }

    #[test]
    fn ate_requires_binary_actions() {
        let mut rng = SeedStream::new(1).stream(0);
        let inst = random_instance(&mut rng, 2, 3, 2, 1.0);
        assert!(EvaluationFunctional::ate(&inst).is_err());
    }

    #[test]
    fn non_pmf_target_rejected() {
        let inst = two_by_two();
        let bad = Table::from_rows(&[vec![0.3, 0.8], vec![0.5, 0.5]]).unwrap();
        assert!(EvaluationFunctional::target_policy(&inst, bad).is_err());
    }

    #[test]
    fn uniform_target_on_constant_effect_recovers_constant() {
        // μ* ≡ c and a target-policy g gives τ* = c.
        let kernel = vec![
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
        ];
        let inst = ProblemInstance::from_grid(
            vec!["x0".into(), "x1".into()],
            vec!["a0".into(), "a1".into()],
            vec![0.2, 0.8],
            &kernel,
            vec![0.3, 0.7],
            None,
        )
        .unwrap();
        let g = EvaluationFunctional::target_policy(
            &inst,
            Table::from_rows(&[vec![0.25, 0.75], vec![0.9, 0.1]]).unwrap(),
        )
        .unwrap();
        let tau = off_policy_value(&inst, &g).unwrap();
        assert!((tau - 0.5).abs() < tol::EXACT_IDENTITY);
    }

    #[test]
    fn telescoping_ate_value() {
        // μ*(x, 1) = 1, μ*(x, 0) = 0 for all x gives ATE τ* = 1.
        let kernel = vec![
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        ];
        let inst = ProblemInstance::from_grid(
            vec!["x0".into(), "x1".into()],
            vec!["a0".into(), "a1".into()],
            vec![0.0, 1.0],
            &kernel,
            vec![0.5, 0.5],
            None,
        )
        .unwrap();
        let g = EvaluationFunctional::ate(&inst).unwrap();
        assert!((off_policy_value(&inst, &g).unwrap() - 1.0).abs() < tol::EXACT_IDENTITY);
    }

    #[test]
    fn off_policy_value_is_linear_in_g() {
        let mut rng = SeedStream::new(11).stream(0);
        let inst = random_instance(&mut rng, 3, 2, 3, 1.0);
        let g1 = random_functional(&mut rng, &inst);
        let g2 = random_functional(&mut rng, &inst);
        let (alpha, beta) = (1.7, -0.4);
        let mixed_table = Table::from_flat(
            inst.n_contexts(),
            inst.n_actions(),
            g1.table()
                .values()
                .iter()
                .zip(g2.table().values())
                .map(|(u, v)| alpha * u + beta * v)
                .collect(),
        )
        .unwrap();
        let mixed = EvaluationFunctional::custom(&inst, mixed_table).unwrap();
        let lhs = off_policy_value(&inst, &mixed).unwrap();
        let rhs = alpha * off_policy_value(&inst, &g1).unwrap()
            + beta * off_policy_value(&inst, &g2).unwrap();
        assert!((lhs - rhs).abs() < tol::EXACT_IDENTITY);
    }

    #[test]
    fn deterministic_instance_has_unique_trajectory() {
        // Point-mass context, policy, and kernel.
        let kernel = vec![vec![vec![0.0, 1.0], vec![1.0, 0.0]]];
        let inst = ProblemInstance::from_grid(
            vec!["x0".into()],
            vec!["a0".into(), "a1".into()],
            vec![0.0, 1.0],
            &kernel,
            vec![1.0],
            None,
        )
        .unwrap();
        let policy = ClippedSequential::new(
            vec![Table::from_rows(&[vec![1.0, 0.0]]).unwrap()],
            1e-9,
        )
        .unwrap();
        let t1 = sample_trajectory(&inst, &policy, 3, 42).unwrap();
        let t2 = sample_trajectory(&inst, &policy, 3, 4242).unwrap();
        for s in &t1.steps {
            assert_eq!(s.context, 0);
            assert_eq!(s.action, 0);
            assert_eq!(s.outcome, 1.0);
        }
        // Policy clipping keeps a sliver on action 1, so propensities match
        // but are slightly under one.
        assert!(t1.steps[0].propensity > 1.0 - 1e-8);
        assert_eq!(
            t1.steps.iter().map(|s| (s.context, s.action)).collect::<Vec<_>>(),
            t2.steps.iter().map(|s| (s.context, s.action)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut rng = SeedStream::new(5).stream(0);
        let inst = random_instance(&mut rng, 2, 2, 2, 1.0);
        let policy = EpsilonGreedyAdaptive::new(2, 0.3).unwrap();
        let a = sample_trajectory(&inst, &policy, 6, 99).unwrap();
        let b = sample_trajectory(&inst, &policy, 6, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn markov_propensity_is_history_independent() {
        let mut rng = SeedStream::new(6).stream(0);
        let inst = random_instance(&mut rng, 2, 3, 2, 1.0);
        let policy = random_markov_policy(&mut rng, 2, 3, 0.1);
        let traj = sample_trajectory(&inst, &policy, 8, 1).unwrap();
        for s in &traj.steps {
            let fresh = policy.pmf(s.context, &[]);
            assert!((s.propensity - fresh[s.action]).abs() < tol::EXACT_IDENTITY);
        }
    }

    #[test]
    fn recorded_propensities_replay() {
        let mut rng = SeedStream::new(7).stream(0);
        let inst = random_instance(&mut rng, 2, 2, 2, 1.0);
        let policy = EpsilonGreedyAdaptive::new(2, 0.25).unwrap();
        let traj = sample_trajectory(&inst, &policy, 10, 3).unwrap();
        for (i, s) in traj.steps.iter().enumerate() {
            let pmf = policy.pmf(s.context, traj.prefix(i));
            assert!((s.propensity - pmf[s.action]).abs() < tol::EXACT_IDENTITY);
        }
    }

    #[test]
    fn empirical_context_frequencies_near_pmf() {
        let inst = two_by_two();
        let policy = MarkovTable::uniform(2, 2);
        let seeds = SeedStream::new(2024);
        let mut rng = seeds.stream(0);
        let draws = 100_000usize;
        let mut count0 = 0usize;
        for _ in 0..draws {
            let t = sample_trajectory_with(&inst, &policy, 1, &mut rng).unwrap();
            if t.steps[0].context == 0 {
                count0 += 1;
            }
        }
        let p = inst.context_pmf()[0];
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        let freq = count0 as f64 / draws as f64;
        assert!(
            (freq - p).abs() < tol::MC_SIGMAS * sigma,
            "freq {freq} vs pmf {p} (sigma {sigma})"
        );
    }

    #[test]
    fn overlap_uniform_two_actions() {
        let inst = two_by_two();
        let policy = MarkovTable::uniform(2, 2);
        let g = EvaluationFunctional::custom(&inst, Table::constant(2, 2, 1.0)).unwrap();
        let b = overlap_constant(&inst, &policy, &g, 4).unwrap();
        assert!((b - 2.0).abs() < tol::EXACT_IDENTITY);
    }

    #[test]
    fn overlap_adaptive_certified_bound() {
        let inst = two_by_two();
        let policy = EpsilonGreedyAdaptive::with_floor(2, 0.1).unwrap();
        let g = EvaluationFunctional::ate(&inst).unwrap();
        let b = overlap_constant(&inst, &policy, &g, 4).unwrap();
        assert!((b - 10.0).abs() < tol::EXACT_IDENTITY);
    }

    #[test]
    fn overlap_matches_brute_force_scan() {
        let mut rng = SeedStream::new(8).stream(0);
        let inst = random_instance(&mut rng, 3, 3, 2, 1.0);
        let policy = random_markov_policy(&mut rng, 3, 3, 0.05);
        let g = random_functional(&mut rng, &inst);
        let b = overlap_constant(&inst, &policy, &g, 5).unwrap();
        let mut brute = 0.0_f64;
        for x in 0..3 {
            for a in 0..3 {
                if g.get(x, a) != 0.0 {
                    brute = brute.max(g.get(x, a).abs() / policy.table().get(x, a));
                }
            }
        }
        assert!((b - brute).abs() < tol::EXACT_IDENTITY);
    }

    #[test]
    fn clipped_sequential_floor_and_rows() {
        let raw = Table::from_rows(&[vec![0.0, 1.0], vec![0.99, 0.01]]).unwrap();
        let policy = ClippedSequential::new(vec![raw], 0.1).unwrap();
        let pmf = policy.pmf(0, &[]);
        assert!(pmf.iter().all(|&p| p >= policy.floor()));
        assert!((pmf.iter().sum::<f64>() - 1.0).abs() < tol::PMF_SUM);
    }

    #[test]
    fn epsilon_greedy_prefers_better_arm() {
        let policy = EpsilonGreedyAdaptive::new(2, 0.2).unwrap();
        let history = vec![
            Observation {
                context: 0,
                action: 1,
                outcome: 1.0,
                outcome_idx: None,
                propensity: 0.5,
            },
            Observation {
                context: 0,
                action: 0,
                outcome: -1.0,
                outcome_idx: None,
                propensity: 0.5,
            },
        ];
        let pmf = policy.pmf(0, &history);
        assert!(pmf[1] > pmf[0]);
        // Ties (no data) break toward the lowest index.
        let fresh = policy.pmf(1, &history);
        assert!(fresh[0] > fresh[1]);
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let inst = two_by_two();
        let policy = MarkovTable::uniform(2, 2);
        let traj = sample_trajectory(&inst, &policy, 3, 0).unwrap();
        let csv = traj.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "i,x,a,y,pi");
        assert_eq!(lines.len(), 4);
    }
}
