//! Glue shared by the command-line verbs and the experiment harnesses:
//! model construction from a vocabulary and rules, fitting, scoring.

use thiserror::Error;

use crate::data::{SubsumptionRule, Triple, TripleStore, Vocabulary};
use crate::evaluation::{evaluate, EvalError, EvalReport, TieMode};
use crate::logic::{forward_closure, logical_hit1, strip_redundant, LogicError};
use crate::models::{init_params, ConstraintGraph, EmbeddingModel, ModelConfig, ModelError, ModelKind, Nonlinearity};
use crate::seed;
use crate::training::{train, LossTrace, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("tie violated by {0:e} after training")]
    TieViolated(f64),
}

/// Everything needed to fit one model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSpec {
    pub kind: ModelKind,
    pub phi: Nonlinearity,
    pub dim: usize,
    /// Tie relations along the rules passed to [`fit`].
    pub tie_rules: bool,
    pub training: TrainConfig,
}

impl FitSpec {
    pub fn new(kind: ModelKind, dim: usize, training: TrainConfig) -> Self {
        let phi = ModelConfig::new(kind, dim).phi;
        Self {
            kind,
            phi,
            dim,
            tie_rules: kind == ModelKind::SimplEPlus,
            training,
        }
    }
}

pub fn constraint_graph(vocab: &Vocabulary, rules: &[SubsumptionRule], tie: bool) -> Result<ConstraintGraph, ModelError> {
    if tie && !rules.is_empty() {
        ConstraintGraph::build(vocab.relation_names(), rules)
    } else {
        Ok(ConstraintGraph::empty(vocab.num_relations()))
    }
}

/// Initialises from the `init` sub-stream and trains on `store.train`.
pub fn fit(store: &TripleStore, rules: &[SubsumptionRule], spec: &FitSpec) -> Result<(EmbeddingModel, LossTrace), PipelineError> {
    let graph = constraint_graph(&store.vocab, rules, spec.tie_rules && spec.kind == ModelKind::SimplEPlus)?;
    let config = ModelConfig::new(spec.kind, spec.dim).with_phi(spec.phi);
    let mut rng = seed::substream(spec.training.seed, seed::INIT);
    let mut model = init_params(config, store.vocab.num_entities(), graph, &mut rng)?;
    let trace = train(&mut model, store, &spec.training)?;
    if !model.constraints().is_empty() {
        let v = model.max_tie_violation();
        if v > 0.0 {
            return Err(PipelineError::TieViolated(v));
        }
    }
    Ok((model, trace))
}

/// Fits and evaluates on `store.test`, filtering against every split.
pub fn fit_and_evaluate(
    store: &TripleStore,
    rules: &[SubsumptionRule],
    spec: &FitSpec,
    tie: TieMode,
) -> Result<(EmbeddingModel, LossTrace, EvalReport), PipelineError> {
    let (model, trace) = fit(store, rules, spec)?;
    let report = evaluate(&model, &store.test, store.known(), tie)?;
    Ok((model, trace, report))
}

/// Store whose train split has its rule-implied triples removed.
pub fn stripped(store: &TripleStore, rules: &[SubsumptionRule]) -> TripleStore {
    store.with_train(strip_redundant(&store.train, rules).kept)
}

/// Logical baseline: closure of `train` scored against `test`.
pub fn logical_baseline(train: &[Triple], rules: &[SubsumptionRule], test: &[Triple]) -> Result<f64, PipelineError> {
    Ok(logical_hit1(test, &forward_closure(train, rules))?)
}

