//! Executable checks of what the model families can and cannot represent:
//! two explicit SimplE+ constructions that realise any truth assignment, and
//! the sign-flip counterexample showing unconstrained models cannot guarantee
//! a subsumption ordering.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::data::{Direction, SubsumptionRule, Triple};
use crate::models::{
    score_parts, sigmoid, ConstraintGraph, EmbeddingModel, ModelConfig, ModelKind, Nonlinearity, Role,
};

/// Margin (in probability) a construction must achieve on every triple.
pub const MIN_MARGIN: f64 = 0.1;

/// A complete truth assignment: listed facts are true, every other triple
/// over the entity and relation ranges is false.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorldAssignment {
    pub entities: usize,
    pub relations: usize,
    pub true_facts: BTreeSet<Triple>,
}

impl WorldAssignment {
    /// Facts outside the ranges are rejected.
    pub fn new(entities: usize, relations: usize, facts: impl IntoIterator<Item = Triple>) -> Result<Self, AnalysisError> {
        if entities == 0 || relations == 0 {
            return Err(AnalysisError::EmptyWorld);
        }
        let true_facts: BTreeSet<Triple> = facts.into_iter().collect();
        if let Some(t) = true_facts
            .iter()
            .find(|t| t.head >= entities || t.tail >= entities || t.relation >= relations)
        {
            return Err(AnalysisError::FactOutOfRange(*t));
        }
        Ok(Self {
            entities,
            relations,
            true_facts,
        })
    }

    pub fn is_true(&self, t: &Triple) -> bool {
        self.true_facts.contains(t)
    }

    pub fn num_triples(&self) -> usize {
        self.entities * self.relations * self.entities
    }

    /// Every triple of the world in (head, relation, tail) order.
    pub fn all_triples(&self) -> impl Iterator<Item = Triple> + '_ {
        let (ne, nr) = (self.entities, self.relations);
        (0..ne).flat_map(move |h| (0..nr).flat_map(move |r| (0..ne).map(move |t| Triple::new(h, r, t))))
    }

    /// Uniform sizes in `1..=max`, then a uniform number of distinct facts
    /// (at most `max_facts`).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_entities: usize, max_relations: usize, max_facts: usize) -> Self {
        let entities = rng.random_range(1..=max_entities.max(1));
        let relations = rng.random_range(1..=max_relations.max(1));
        let total = entities * relations * entities;
        let n = rng.random_range(0..=max_facts.min(total));
        let facts = rand::seq::index::sample(rng, total, n).into_iter().map(|i| {
            let h = i / (relations * entities);
            let r = (i / entities) % relations;
            Triple::new(h, r, i % entities)
        });
        Self::new(entities, relations, facts).expect("sampled facts are in range")
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("world needs at least one entity and one relation")]
    EmptyWorld,
    #[error("fact {0:?} lies outside the world")]
    FactOutOfRange(Triple),
    #[error("trivial subsumption, no counterexample exists")]
    TrivialSubsumption,
    #[error("pair is not a witness: the conclusion scores below the premise")]
    NotAWitness,
    #[error("counterexample inapplicable to {0}: negated entities are not legal embeddings")]
    Inapplicable(ModelKind),
    #[error("counterexample needs a direct rule")]
    InverseRule,
    #[error("entity {0} out of range")]
    EntityOutOfRange(usize),
    #[error("relation {0} out of range")]
    RelationOutOfRange(usize),
}

/// Whether a construction applies the repairs or follows the printed proof
/// literally (kept to show why the repairs are needed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    #[default]
    Repaired,
    ProofLiteral,
}

fn empty_model(world: &WorldAssignment, dim: usize) -> EmbeddingModel {
    let config = ModelConfig::new(ModelKind::SimplEPlus, dim).with_phi(Nonlinearity::Relu);
    EmbeddingModel::zeros(config, world.entities, ConstraintGraph::empty(world.relations))
        .expect("dim is positive and there are no constraints")
}

/// Block layout of width `|E||R| + 1`. Block `i` belongs to relation `i`;
/// within it, position `j` belongs to head entity `j`. Tail rows carry a 2
/// wherever the corresponding fact is true, and a 1 at the last index so the
/// shared `-1` offset pushes false triples below zero.
pub fn construct_block_model(world: &WorldAssignment, variant: Variant) -> EmbeddingModel {
    let (ne, nr) = (world.entities, world.relations);
    let last = ne * nr;
    let mut m = empty_model(world, last + 1);
    for i in 0..nr {
        let row = m.relation_fwd.row_mut(i);
        row[i * ne..(i + 1) * ne].fill(1.0);
        row[last] = -1.0;
    }
    for j in 0..ne {
        let row = m.entity_head.row_mut(j);
        for (n, x) in row.iter_mut().enumerate() {
            if n % ne == j {
                *x = 1.0;
            }
        }
        row[last] = 1.0;
        if variant == Variant::Repaired {
            m.entity_tail.row_mut(j)[last] = 1.0;
        }
    }
    for f in &world.true_facts {
        m.entity_tail.row_mut(f.tail)[f.relation * ne + f.head] = 2.0;
    }
    m
}

/// Grows a model one fact at a time, one new coordinate per fact.
#[derive(Debug, Clone)]
pub struct IncrementalBuilder {
    model: EmbeddingModel,
    variant: Variant,
}

impl IncrementalBuilder {
    /// Width 1: entities 1, relations -1, so every triple scores -1.
    pub fn new(entities: usize, relations: usize, variant: Variant) -> Result<Self, AnalysisError> {
        let world = WorldAssignment::new(entities, relations, [])?;
        let mut model = empty_model(&world, 1);
        model.entity_head.as_mut_slice().fill(1.0);
        model.entity_tail.as_mut_slice().fill(1.0);
        model.relation_fwd.as_mut_slice().fill(-1.0);
        model.relation_bwd.as_mut_slice().fill(-1.0);
        Ok(Self { model, variant })
    }

    /// Appends a coordinate touching only `fact`'s forward term.
    pub fn add_fact(&mut self, fact: Triple) {
        let m = &mut self.model;
        // unhalved score before the update
        let q = 2.0 * m.score(&fact);
        for mat in [
            &mut m.entity_head,
            &mut m.entity_tail,
            &mut m.relation_fwd,
            &mut m.relation_bwd,
            &mut m.delta_fwd,
            &mut m.delta_bwd,
        ] {
            mat.push_zero_col();
        }
        m.dim += 1;
        let n = m.dim - 1;
        let c = match self.variant {
            Variant::Repaired => 1f64.max(1.0 - q),
            Variant::ProofLiteral => q + 1.0,
        };
        m.entity_head.row_mut(fact.head)[n] = 1.0;
        m.relation_fwd.row_mut(fact.relation)[n] = 1.0;
        m.entity_tail.row_mut(fact.tail)[n] = c;
    }

    pub fn model(&self) -> &EmbeddingModel {
        &self.model
    }

    pub fn into_model(self) -> EmbeddingModel {
        self.model
    }
}

/// Width `|facts| + 1`, built by adding the facts in order.
pub fn construct_incremental_model(world: &WorldAssignment, variant: Variant) -> EmbeddingModel {
    let mut b = IncrementalBuilder::new(world.entities, world.relations, variant).expect("world is non-empty");
    for f in &world.true_facts {
        b.add_fact(*f);
    }
    b.into_model()
}

/// Outcome of scoring every triple of a world.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldCheck {
    pub triples: usize,
    pub misclassified: Vec<Triple>,
    /// Smallest signed margin `p - 0.5` (true) or `0.5 - p` (false); negative
    /// or zero when something is misclassified.
    pub min_margin: f64,
    /// Smallest raw (pre-phi) entity coordinate.
    pub min_entity_value: f64,
}

impl WorldCheck {
    pub fn passes(&self, margin: f64) -> bool {
        self.misclassified.is_empty() && self.min_margin >= margin
    }
}

pub fn check_world(model: &EmbeddingModel, world: &WorldAssignment) -> WorldCheck {
    let scorer = model.scorer();
    let mut misclassified = Vec::new();
    let mut min_margin = f64::INFINITY;
    for t in world.all_triples() {
        let p = sigmoid(scorer.score(t.head, t.relation, t.tail));
        let margin = if world.is_true(&t) { p - 0.5 } else { 0.5 - p };
        if margin <= 0.0 {
            misclassified.push(t);
        }
        min_margin = min_margin.min(margin);
    }
    let min_entity_value = model
        .entity_head
        .as_slice()
        .iter()
        .chain(model.entity_tail.as_slice())
        .copied()
        .fold(f64::INFINITY, f64::min);
    WorldCheck {
        triples: world.num_triples(),
        misclassified,
        min_margin,
        min_entity_value,
    }
}

/// A new entity `a' = -a` and the probabilities certifying the violation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub head_role: Vec<f64>,
    pub tail_role: Vec<f64>,
    /// Probabilities of (a, s, b) and (a, r, b).
    pub witness: (f64, f64),
    /// Probabilities of (a', s, b) and (a', r, b).
    pub flipped: (f64, f64),
}

impl Counterexample {
    /// The conclusion is now strictly less likely than the premise.
    pub fn violates(&self) -> bool {
        self.flipped.0 < self.flipped.1
    }
}

/// Given `mu(a, s, b) > mu(a, r, b)` for a rule `r -> s`, negates `a` to get
/// an entity for which the ordering reverses. Only meaningful for families
/// whose entity space is closed under negation.
pub fn subsumption_counterexample(
    model: &EmbeddingModel,
    rule: &SubsumptionRule,
    a: usize,
    b: usize,
) -> Result<Counterexample, AnalysisError> {
    if model.kind == ModelKind::SimplEPlus {
        return Err(AnalysisError::Inapplicable(model.kind));
    }
    if rule.direction != Direction::Direct {
        return Err(AnalysisError::InverseRule);
    }
    for e in [a, b] {
        if e >= model.num_entities() {
            return Err(AnalysisError::EntityOutOfRange(e));
        }
    }
    for r in [rule.premise, rule.conclusion] {
        if r >= model.num_relations() {
            return Err(AnalysisError::RelationOutOfRange(r));
        }
    }
    let a_head = model.embed_entity(a, Role::Head);
    let a_tail = model.embed_entity(a, Role::Tail);
    let b_head = model.embed_entity(b, Role::Head);
    let b_tail = model.embed_entity(b, Role::Tail);
    let prob = |hh: &[f64], ht: &[f64], rel: usize| {
        let (rf, rb) = model.effective_relation(rel);
        sigmoid(score_parts(model.kind, hh, ht, &rf, &rb, &b_head, &b_tail))
    };
    let p_s = prob(&a_head, &a_tail, rule.conclusion);
    let p_r = prob(&a_head, &a_tail, rule.premise);
    if p_s == p_r {
        return Err(AnalysisError::TrivialSubsumption);
    }
    if p_s < p_r {
        return Err(AnalysisError::NotAWitness);
    }
    let head_role: Vec<f64> = a_head.iter().map(|x| -x).collect();
    let tail_role: Vec<f64> = a_tail.iter().map(|x| -x).collect();
    let flipped = (
        prob(&head_role, &tail_role, rule.conclusion),
        prob(&head_role, &tail_role, rule.premise),
    );
    Ok(Counterexample {
        head_role,
        tail_role,
        witness: (p_s, p_r),
        flipped,
    })
}
