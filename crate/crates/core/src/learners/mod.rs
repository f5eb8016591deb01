//! Online regression subroutines producing the outcome-model sequence,
//! with regret accounting against best-fixed-in-hindsight comparators.
//!
//! A learner plays the turn-based protocol: before round `i` it commits a
//! full outcome table from the first `i - 1` observations, then suffers a
//! squared loss at the visited pair. Two loss regimes are supported: the
//! propensity-weighted loss `g²/π² (y - μ(x,a))²` and the plain squared
//! loss `(y - μ(x,a))²` used with general function classes.

mod aggregating;
mod forecaster;
mod hindsight;
mod ogd;

pub use aggregating::{aggregating_prediction, aggregating_step, AggregatingLearner};
pub use forecaster::{
    generic_forecaster_predict, offset_rademacher_root_estimate, recursive_admissibility_violation,
    initial_condition_violation, ExpClassRelaxation, GenericForecasterLearner, Relaxation,
};
pub use hindsight::{
    best_in_hindsight, regret_of, weighted_approximation_error, ComparatorClass, HindsightSolution,
};
pub use ogd::{
    linear_loss_gradient, ogd_linear_step, ogd_tabular_step, tabular_loss_gradient, FeatureMap,
    LinearModel, OgdLinear, OgdTabular,
};

use crate::table::Table;

// ── Losses ──────────────────────────────────────────────────────────────

/// Which loss the environment charges the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    /// Propensity-weighted squared loss `g²/π² (y - μ(x,a))²`.
    Weighted,
    /// Plain squared loss `(y - μ(x,a))²`.
    Plain,
}

/// Round weight multiplying the squared residual.
#[inline]
pub fn loss_weight(mode: LossMode, propensity: f64, g_value: f64) -> f64 {
    match mode {
        LossMode::Weighted => (g_value * g_value) / (propensity * propensity),
        LossMode::Plain => 1.0,
    }
}

/// Squared loss of an outcome table at one observed round.
pub fn squared_loss(
    mode: LossMode,
    context: usize,
    action: usize,
    outcome: f64,
    propensity: f64,
    g_value: f64,
    mu: &Table,
) -> f64 {
    let r = outcome - mu.get(context, action);
    loss_weight(mode, propensity, g_value) * r * r
}

// ── Regret ledger ───────────────────────────────────────────────────────

/// One recorded round of the online protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRound {
    pub context: usize,
    pub action: usize,
    pub outcome: f64,
    pub propensity: f64,
    pub g_value: f64,
    /// Loss the learner's committed prediction suffered this round.
    pub loss: f64,
}

/// Realized losses plus the raw rounds enabling hindsight evaluation.
#[derive(Debug, Clone)]
pub struct RegretLedger {
    mode: LossMode,
    rounds: Vec<LedgerRound>,
}

impl RegretLedger {
    pub fn new(mode: LossMode) -> Self {
        Self {
            mode,
            rounds: Vec::new(),
        }
    }

    pub fn mode(&self) -> LossMode {
        self.mode
    }

    pub fn rounds(&self) -> &[LedgerRound] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn push(&mut self, round: LedgerRound) {
        self.rounds.push(round);
    }

    pub fn total_loss(&self) -> f64 {
        self.rounds.iter().map(|r| r.loss).sum()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rounds.iter().map(|r| r.loss).collect()
    }

    /// Weight of round `i` under this ledger's loss mode.
    pub fn weight(&self, i: usize) -> f64 {
        let r = &self.rounds[i];
        loss_weight(self.mode, r.propensity, r.g_value)
    }

    /// CSV trace with columns `i,loss,cum_loss,cum_hindsight`, where
    /// `cum_hindsight` is the best fixed comparator's loss over the first
    /// `i` rounds.
    pub fn trace_csv(
        &self,
        class: &ComparatorClass,
        n_contexts: usize,
        n_actions: usize,
    ) -> crate::Result<String> {
        let mut out = String::from("i,loss,cum_loss,cum_hindsight\n");
        let mut cum = 0.0;
        let mut prefix = RegretLedger::new(self.mode);
        for (i, r) in self.rounds.iter().enumerate() {
            cum += r.loss;
            prefix.push(*r);
            let hindsight = best_in_hindsight(&prefix, class, n_contexts, n_actions)?;
            out.push_str(&format!(
                "{},{},{},{}\n",
                i + 1,
                r.loss,
                cum,
                hindsight.total_loss
            ));
        }
        Ok(out)
    }
}

// ── Learner interface ───────────────────────────────────────────────────

/// Stateful online learner producing the outcome-model sequence.
///
/// `predict` must depend only on the rounds already passed to `update`:
/// the prediction for round `i` is committed before round `i` is seen.
pub trait OnlineLearner {
    /// The outcome table committed for the upcoming round.
    fn predict(&self) -> Table;

    /// Feed one observed round; records the realized loss first, then
    /// updates internal state.
    fn update(&mut self, context: usize, action: usize, outcome: f64, propensity: f64, g_value: f64);

    fn mode(&self) -> LossMode;

    fn ledger(&self) -> &RegretLedger;

    /// The comparator class this learner's regret is measured against.
    fn comparator(&self) -> ComparatorClass;
}

/// Learner frozen at a fixed outcome table; its regret comparator is the
/// singleton containing that table.
#[derive(Debug, Clone)]
pub struct FrozenLearner {
    table: Table,
    ledger: RegretLedger,
}

impl FrozenLearner {
    pub fn new(table: Table, mode: LossMode) -> Self {
        Self {
            table,
            ledger: RegretLedger::new(mode),
        }
    }
}

impl OnlineLearner for FrozenLearner {
    fn predict(&self) -> Table {
        self.table.clone()
    }

    fn update(&mut self, context: usize, action: usize, outcome: f64, propensity: f64, g_value: f64) {
        let loss = squared_loss(
            self.ledger.mode(),
            context,
            action,
            outcome,
            propensity,
            g_value,
            &self.table,
        );
        self.ledger.push(LedgerRound {
            context,
            action,
            outcome,
            propensity,
            g_value,
            loss,
        });
    }

    fn mode(&self) -> LossMode {
        self.ledger.mode()
    }

    fn ledger(&self) -> &RegretLedger {
        &self.ledger
    }

    fn comparator(&self) -> ComparatorClass {
        ComparatorClass::Finite(vec![self.table.clone()])
    }
}

// ── Learning-rate schedules ─────────────────────────────────────────────

/// Which theorem schedule a learner follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Tabular,
    Linear,
}

/// Theorem learning-rate schedules.
///
/// - tabular: `η_i = diam(F) / (4 L B² √i)` with
///   `diam(F) = sup{‖μ‖₂ : μ ∈ F}`;
/// - linear: `η_i = R / (B² (L + R) √i)`.
pub fn default_learning_rate(kind: RateKind, round: usize, l: f64, b: f64, diam_or_radius: f64) -> f64 {
    assert!(round >= 1, "rounds are 1-based");
    let sqrt_i = (round as f64).sqrt();
    match kind {
        RateKind::Tabular => diam_or_radius / (4.0 * l * b * b * sqrt_i),
        RateKind::Linear => diam_or_radius / (b * b * (l + diam_or_radius) * sqrt_i),
    }
}

/// Diameter of the box class `[-bound, bound]^{X × A}` under the
/// sup-of-norms convention: `bound · √(|X||A|)`.
pub fn box_diameter(bound: f64, n_contexts: usize, n_actions: usize) -> f64 {
    bound * ((n_contexts * n_actions) as f64).sqrt()
}

/// Per-round learning rates: the theorem schedules or a custom sequence
/// (its last entry is reused past the end).
#[derive(Debug, Clone)]
pub enum RateSchedule {
    TabularTheorem { l: f64, b: f64, diam: f64 },
    LinearTheorem { l: f64, b: f64, radius: f64 },
    Custom(Vec<f64>),
}

impl RateSchedule {
    pub fn rate(&self, round: usize) -> f64 {
        match self {
            RateSchedule::TabularTheorem { l, b, diam } => {
                default_learning_rate(RateKind::Tabular, round, *l, *b, *diam)
            }
            RateSchedule::LinearTheorem { l, b, radius } => {
                default_learning_rate(RateKind::Linear, round, *l, *b, *radius)
            }
            RateSchedule::Custom(rates) => {
                let idx = (round - 1).min(rates.len().saturating_sub(1));
                rates[idx]
            }
        }
    }
}
