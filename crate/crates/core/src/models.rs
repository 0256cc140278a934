//! Embedding storage and scoring for SimplE, SimplE+ and ComplEx.
//!
//! All three kinds share one parameter layout: two entity matrices and two
//! relation matrices of width `dim`. For SimplE/SimplE+ they hold the
//! head-role/tail-role entity vectors and the forward/backward relation
//! vectors; for ComplEx they hold real/imaginary parts.
//!
//! SimplE+ passes entity rows through a non-negative nonlinearity before
//! scoring and may tie a premise relation to its conclusion as
//! `r = s - relu(delta)`, which makes every score of `r` a lower bound of the
//! matching score of `s` whenever entity vectors are non-negative.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::data::{Direction, SubsumptionRule, Triple};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("vector lengths differ: {0}, {1}, {2}")]
    LengthMismatch(usize, usize, usize),
    #[error("embedding dimension must be at least 1")]
    ZeroDim,
    #[error("subsumption constraints require the simple-plus model, got {0}")]
    ConstraintsRequireSimplEPlus(ModelKind),
    #[error("rule references relation {0}, but the model has {1} relations")]
    RelationOutOfRange(usize, usize),
    #[error("unknown {what} `{value}`")]
    UnknownName { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ModelKind {
    SimplE,
    SimplEPlus,
    ComplEx,
}

impl ModelKind {
    pub fn token(self) -> &'static str {
        match self {
            ModelKind::SimplE => "simple",
            ModelKind::SimplEPlus => "simple-plus",
            ModelKind::ComplEx => "complex",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(ModelKind::SimplE),
            "simple-plus" | "simpleplus" => Ok(ModelKind::SimplEPlus),
            "complex" => Ok(ModelKind::ComplEx),
            _ => Err(ModelError::UnknownName {
                what: "model",
                value: s.to_owned(),
            }),
        }
    }
}

/// Element-wise map applied to raw entity parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Nonlinearity {
    Identity,
    Exponential,
    Logistic,
    Relu,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Identity => x,
            Nonlinearity::Exponential => x.exp(),
            Nonlinearity::Logistic => sigmoid(x),
            Nonlinearity::Relu => x.max(0.0),
        }
    }

    /// Derivative with respect to the raw input. The ReLU kink gets 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Nonlinearity::Identity => 1.0,
            Nonlinearity::Exponential => x.exp(),
            Nonlinearity::Logistic => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
            Nonlinearity::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Nonlinearity::Identity => "identity",
            Nonlinearity::Exponential => "exp",
            Nonlinearity::Logistic => "logistic",
            Nonlinearity::Relu => "relu",
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Nonlinearity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(Nonlinearity::Identity),
            "exp" | "exponential" => Ok(Nonlinearity::Exponential),
            "logistic" | "sigmoid" => Ok(Nonlinearity::Logistic),
            "relu" => Ok(Nonlinearity::Relu),
            _ => Err(ModelError::UnknownName {
                what: "nonlinearity",
                value: s.to_owned(),
            }),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Sum of the element-wise product of three vectors.
pub fn multilinear_product(x: &[f64], y: &[f64], z: &[f64]) -> Result<f64, ModelError> {
    if x.len() != y.len() || y.len() != z.len() {
        return Err(ModelError::LengthMismatch(x.len(), y.len(), z.len()));
    }
    Ok(trilinear(x, y, z))
}

#[inline]
pub(crate) fn trilinear(x: &[f64], y: &[f64], z: &[f64]) -> f64 {
    debug_assert!(x.len() == y.len() && y.len() == z.len());
    x.iter().zip(y).zip(z).map(|((a, b), c)| a * b * c).sum()
}

/// Pre-sigmoid score from explicit vectors.
///
/// For SimplE kinds the forward term pairs the head's head-role vector with
/// the tail's tail-role vector: `(<h_head, r_fwd, t_tail> + <t_head, r_bwd, h_tail>) / 2`.
/// For ComplEx the entity pair is (real, imaginary) and the result is
/// `Re(<h, r, conj(t)>)`.
#[inline]
pub fn score_parts(
    kind: ModelKind,
    h_head: &[f64],
    h_tail: &[f64],
    r_fwd: &[f64],
    r_bwd: &[f64],
    t_head: &[f64],
    t_tail: &[f64],
) -> f64 {
    match kind {
        ModelKind::SimplE | ModelKind::SimplEPlus => {
            0.5 * (trilinear(h_head, r_fwd, t_tail) + trilinear(t_head, r_bwd, h_tail))
        }
        ModelKind::ComplEx => complex_score(h_head, h_tail, r_fwd, r_bwd, t_head, t_tail),
    }
}

#[inline]
fn complex_score(h_re: &[f64], h_im: &[f64], r_re: &[f64], r_im: &[f64], t_re: &[f64], t_im: &[f64]) -> f64 {
    let mut acc = 0.0;
    for l in 0..h_re.len() {
        acc += h_re[l] * r_re[l] * t_re[l] + h_im[l] * r_re[l] * t_im[l] + h_re[l] * r_im[l] * t_im[l]
            - h_im[l] * r_im[l] * t_re[l];
    }
    acc
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Appends a zero column to every row.
    pub(crate) fn push_zero_col(&mut self) {
        let cols = self.cols + 1;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.push(0.0);
        }
        self.cols = cols;
        self.data = data;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Head,
    Tail,
}

/// How a constrained relation is derived from the relation it is tied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constraint {
    pub conclusion: usize,
    pub direction: Direction,
    /// Row of the delta matrices, or `None` for an exact tie (cycle member).
    pub delta: Option<usize>,
}

/// Premise -> conclusion ties derived from subsumption rules.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintGraph {
    edges: Vec<Option<Constraint>>,
    /// Relations ordered so that every conclusion precedes its premises.
    order: Vec<usize>,
    rules: Vec<SubsumptionRule>,
    unenforced: Vec<SubsumptionRule>,
    num_deltas: usize,
}

impl ConstraintGraph {
    pub fn empty(num_relations: usize) -> Self {
        Self {
            edges: vec![None; num_relations],
            order: (0..num_relations).collect(),
            rules: Vec::new(),
            unenforced: Vec::new(),
            num_deltas: 0,
        }
    }

    /// Builds the tie graph. A premise with several rules is tied through the
    /// first; cycles are collapsed onto their lexicographically smallest
    /// relation name, with the other members tied exactly (no delta).
    pub fn build(relation_names: &[String], rules: &[SubsumptionRule]) -> Result<Self, ModelError> {
        let n = relation_names.len();
        let mut edges: Vec<Option<Constraint>> = vec![None; n];
        let mut unenforced = Vec::new();
        for rule in rules {
            for id in [rule.premise, rule.conclusion] {
                if id >= n {
                    return Err(ModelError::RelationOutOfRange(id, n));
                }
            }
            if edges[rule.premise].is_some() {
                unenforced.push(*rule);
                continue;
            }
            edges[rule.premise] = Some(Constraint {
                conclusion: rule.conclusion,
                direction: rule.direction,
                delta: Some(0),
            });
        }

        // Out-degree is at most one, so every strongly connected component
        // with an edge inside it is a simple cycle reachable by walking.
        let mut state = vec![0u8; n]; // 0 unseen, 1 on current walk, 2 done
        for start in 0..n {
            let mut path = Vec::new();
            let mut cur = start;
            while state[cur] == 0 {
                state[cur] = 1;
                path.push(cur);
                match edges[cur] {
                    Some(c) => cur = c.conclusion,
                    None => break,
                }
            }
            if state[cur] == 1 && edges[cur].is_some() {
                let pos = path.iter().position(|&r| r == cur).expect("cycle start on path");
                let cycle = &path[pos..];
                let holder = *cycle
                    .iter()
                    .min_by(|&&a, &&b| relation_names[a].cmp(&relation_names[b]))
                    .expect("non-empty cycle");
                let dropped = edges[holder].take().expect("cycle edge");
                unenforced.push(SubsumptionRule {
                    premise: holder,
                    conclusion: dropped.conclusion,
                    direction: dropped.direction,
                });
                for &member in cycle {
                    if let Some(c) = edges[member].as_mut() {
                        c.delta = None;
                    }
                }
            }
            for r in path {
                state[r] = 2;
            }
        }

        let mut num_deltas = 0;
        for c in edges.iter_mut().flatten() {
            if c.delta.is_some() {
                c.delta = Some(num_deltas);
                num_deltas += 1;
            }
        }

        let mut depth = vec![usize::MAX; n];
        fn depth_of(r: usize, edges: &[Option<Constraint>], depth: &mut [usize]) -> usize {
            if depth[r] != usize::MAX {
                return depth[r];
            }
            let d = match edges[r] {
                Some(c) => depth_of(c.conclusion, edges, depth) + 1,
                None => 0,
            };
            depth[r] = d;
            d
        }
        for r in 0..n {
            depth_of(r, &edges, &mut depth);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&r| (depth[r], r));

        Ok(Self {
            edges,
            order,
            rules: rules.to_vec(),
            unenforced,
            num_deltas,
        })
    }

    pub fn num_relations(&self) -> usize {
        self.edges.len()
    }

    pub fn constraint(&self, relation: usize) -> Option<&Constraint> {
        self.edges[relation].as_ref()
    }

    /// Conclusions first, premises after.
    pub fn resolution_order(&self) -> &[usize] {
        &self.order
    }

    pub fn rules(&self) -> &[SubsumptionRule] {
        &self.rules
    }

    /// Rules that could not be expressed as a tie (second conclusion of a
    /// premise, or the edge dropped to break a cycle).
    pub fn unenforced(&self) -> &[SubsumptionRule] {
        &self.unenforced
    }

    pub fn num_deltas(&self) -> usize {
        self.num_deltas
    }

    pub fn is_empty(&self) -> bool {
        self.edges.iter().all(Option::is_none)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub dim: usize,
    pub phi: Nonlinearity,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, dim: usize) -> Self {
        let phi = match kind {
            ModelKind::SimplEPlus => Nonlinearity::Relu,
            _ => Nonlinearity::Identity,
        };
        Self { kind, dim, phi }
    }

    pub fn with_phi(mut self, phi: Nonlinearity) -> Self {
        self.phi = phi;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub kind: ModelKind,
    pub dim: usize,
    pub phi: Nonlinearity,
    pub entity_head: Matrix,
    pub entity_tail: Matrix,
    pub relation_fwd: Matrix,
    pub relation_bwd: Matrix,
    pub delta_fwd: Matrix,
    pub delta_bwd: Matrix,
    constraints: ConstraintGraph,
}

impl EmbeddingModel {
    /// All-zero parameters.
    pub fn zeros(
        config: ModelConfig,
        num_entities: usize,
        constraints: ConstraintGraph,
    ) -> Result<Self, ModelError> {
        if config.dim == 0 {
            return Err(ModelError::ZeroDim);
        }
        if !constraints.is_empty() && config.kind != ModelKind::SimplEPlus {
            return Err(ModelError::ConstraintsRequireSimplEPlus(config.kind));
        }
        let phi = if config.kind == ModelKind::SimplEPlus {
            config.phi
        } else {
            Nonlinearity::Identity
        };
        let k = config.dim;
        let nr = constraints.num_relations();
        let nd = constraints.num_deltas();
        Ok(Self {
            kind: config.kind,
            dim: k,
            phi,
            entity_head: Matrix::zeros(num_entities, k),
            entity_tail: Matrix::zeros(num_entities, k),
            relation_fwd: Matrix::zeros(nr, k),
            relation_bwd: Matrix::zeros(nr, k),
            delta_fwd: Matrix::zeros(nd, k),
            delta_bwd: Matrix::zeros(nd, k),
            constraints,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.entity_head.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_fwd.rows()
    }

    pub fn constraints(&self) -> &ConstraintGraph {
        &self.constraints
    }

    /// Entity vector as consumed by scoring (phi applied for SimplE+).
    pub fn embed_entity(&self, entity: usize, role: Role) -> Vec<f64> {
        let raw = match role {
            Role::Head => self.entity_head.row(entity),
            Role::Tail => self.entity_tail.row(entity),
        };
        raw.iter().map(|&x| self.phi.apply(x)).collect()
    }

    /// Effective (forward, backward) vectors of a relation, resolving its tie
    /// chain recursively.
    pub fn effective_relation(&self, relation: usize) -> (Vec<f64>, Vec<f64>) {
        match self.constraints.constraint(relation) {
            None => (
                self.relation_fwd.row(relation).to_vec(),
                self.relation_bwd.row(relation).to_vec(),
            ),
            Some(c) => {
                let (s_fwd, s_bwd) = self.effective_relation(c.conclusion);
                let (base_fwd, base_bwd) = match c.direction {
                    Direction::Direct => (s_fwd, s_bwd),
                    Direction::Inverse => (s_bwd, s_fwd),
                };
                match c.delta {
                    None => (base_fwd, base_bwd),
                    Some(d) => (
                        sub_relu(&base_fwd, self.delta_fwd.row(d)),
                        sub_relu(&base_bwd, self.delta_bwd.row(d)),
                    ),
                }
            }
        }
    }

    /// Effective relation vectors for every relation, computed in resolution
    /// order.
    pub fn effective_relations(&self) -> (Matrix, Matrix) {
        let k = self.dim;
        let mut fwd = self.relation_fwd.clone();
        let mut bwd = self.relation_bwd.clone();
        let mut buf_f = vec![0.0; k];
        let mut buf_b = vec![0.0; k];
        for &r in self.constraints.resolution_order() {
            let Some(c) = self.constraints.constraint(r) else {
                continue;
            };
            let (src_f, src_b) = match c.direction {
                Direction::Direct => (fwd.row(c.conclusion), bwd.row(c.conclusion)),
                Direction::Inverse => (bwd.row(c.conclusion), fwd.row(c.conclusion)),
            };
            buf_f.copy_from_slice(src_f);
            buf_b.copy_from_slice(src_b);
            if let Some(d) = c.delta {
                for (x, &dx) in buf_f.iter_mut().zip(self.delta_fwd.row(d)) {
                    *x -= relu(dx);
                }
                for (x, &dx) in buf_b.iter_mut().zip(self.delta_bwd.row(d)) {
                    *x -= relu(dx);
                }
            }
            fwd.row_mut(r).copy_from_slice(&buf_f);
            bwd.row_mut(r).copy_from_slice(&buf_b);
        }
        (fwd, bwd)
    }

    /// Immutable scoring snapshot with phi and ties pre-applied.
    pub fn scorer(&self) -> Scorer {
        let (rel_fwd, rel_bwd) = self.effective_relations();
        let phi = self.phi;
        let (ent_head, ent_tail) = if phi == Nonlinearity::Identity {
            (self.entity_head.clone(), self.entity_tail.clone())
        } else {
            (
                self.entity_head.map(|x| phi.apply(x)),
                self.entity_tail.map(|x| phi.apply(x)),
            )
        };
        Scorer {
            kind: self.kind,
            ent_head,
            ent_tail,
            rel_fwd,
            rel_bwd,
        }
    }

    /// Pre-sigmoid score of a triple.
    pub fn score(&self, triple: &Triple) -> f64 {
        let hh = self.embed_entity(triple.head, Role::Head);
        let ht = self.embed_entity(triple.head, Role::Tail);
        let th = self.embed_entity(triple.tail, Role::Head);
        let tt = self.embed_entity(triple.tail, Role::Tail);
        let (rf, rb) = self.effective_relation(triple.relation);
        score_parts(self.kind, &hh, &ht, &rf, &rb, &th, &tt)
    }

    pub fn probability(&self, triple: &Triple) -> f64 {
        sigmoid(self.score(triple))
    }

    /// Largest `effective r - effective s` entry over all Direct rules that
    /// are enforced by a tie. Non-positive for every parameter state.
    pub fn max_tie_violation(&self) -> f64 {
        let (fwd, bwd) = self.effective_relations();
        let mut worst = f64::NEG_INFINITY;
        for rule in self.constraints.rules() {
            if rule.direction != Direction::Direct || self.constraints.unenforced().contains(rule) {
                continue;
            }
            for m in [&fwd, &bwd] {
                for (a, b) in m.row(rule.premise).iter().zip(m.row(rule.conclusion)) {
                    worst = worst.max(a - b);
                }
            }
        }
        worst
    }
}

fn sub_relu(base: &[f64], delta: &[f64]) -> Vec<f64> {
    base.iter().zip(delta).map(|(b, d)| b - relu(*d)).collect()
}

/// Scoring snapshot: post-phi entity tables and effective relation tables.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub kind: ModelKind,
    pub ent_head: Matrix,
    pub ent_tail: Matrix,
    pub rel_fwd: Matrix,
    pub rel_bwd: Matrix,
}

impl Scorer {
    #[inline]
    pub fn score(&self, h: usize, r: usize, t: usize) -> f64 {
        score_parts(
            self.kind,
            self.ent_head.row(h),
            self.ent_tail.row(h),
            self.rel_fwd.row(r),
            self.rel_bwd.row(r),
            self.ent_head.row(t),
            self.ent_tail.row(t),
        )
    }

    pub fn num_entities(&self) -> usize {
        self.ent_head.rows()
    }

    /// Scores of `(h, r, e)` for every entity `e`.
    pub fn score_all_tails(&self, h: usize, r: usize) -> Vec<f64> {
        let (a, b) = self.side_weights(h, r, Role::Tail);
        self.project(&a, &b)
    }

    /// Scores of `(e, r, t)` for every entity `e`.
    pub fn score_all_heads(&self, r: usize, t: usize) -> Vec<f64> {
        let (a, b) = self.side_weights(t, r, Role::Head);
        self.project(&a, &b)
    }

    // The score is linear in the free entity's two rows, so each candidate
    // costs one pair of dot products: score = <a, e_head> + <b, e_tail>.
    fn side_weights(&self, fixed: usize, r: usize, free: Role) -> (Vec<f64>, Vec<f64>) {
        let k = self.rel_fwd.cols();
        let (xh, xt) = (self.ent_head.row(fixed), self.ent_tail.row(fixed));
        let (rf, rb) = (self.rel_fwd.row(r), self.rel_bwd.row(r));
        let mut a = vec![0.0; k];
        let mut b = vec![0.0; k];
        for l in 0..k {
            match (self.kind, free) {
                (ModelKind::ComplEx, Role::Tail) => {
                    // candidate tail (re, im): re * (hre rre - him rim) + im * (him rre + hre rim)
                    a[l] = xh[l] * rf[l] - xt[l] * rb[l];
                    b[l] = xt[l] * rf[l] + xh[l] * rb[l];
                }
                (ModelKind::ComplEx, Role::Head) => {
                    // candidate head (re, im): re * (rre tre + rim tim) + im * (rre tim - rim tre)
                    a[l] = rf[l] * xh[l] + rb[l] * xt[l];
                    b[l] = rf[l] * xt[l] - rb[l] * xh[l];
                }
                (_, Role::Tail) => {
                    // 0.5 * (<h_head, rf, t_tail> + <t_head, rb, h_tail>)
                    a[l] = 0.5 * rb[l] * xt[l];
                    b[l] = 0.5 * xh[l] * rf[l];
                }
                (_, Role::Head) => {
                    // 0.5 * (<h_head, rf, t_tail> + <t_head, rb, h_tail>)
                    a[l] = 0.5 * rf[l] * xt[l];
                    b[l] = 0.5 * xh[l] * rb[l];
                }
            }
        }
        (a, b)
    }

    fn project(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.num_entities())
            .map(|e| {
                let eh = self.ent_head.row(e);
                let et = self.ent_tail.row(e);
                let mut s = 0.0;
                for l in 0..a.len() {
                    s += a[l] * eh[l] + b[l] * et[l];
                }
                s
            })
            .collect()
    }
}

/// Draws raw parameters i.i.d. from N(0, 1/k); delta parameters start at 0.
pub fn init_params<R: Rng + ?Sized>(
    config: ModelConfig,
    num_entities: usize,
    constraints: ConstraintGraph,
    rng: &mut R,
) -> Result<EmbeddingModel, ModelError> {
    let mut model = EmbeddingModel::zeros(config, num_entities, constraints)?;
    let normal = Normal::new(0.0, 1.0 / (config.dim as f64).sqrt()).expect("finite std");
    for m in [
        &mut model.entity_head,
        &mut model.entity_tail,
        &mut model.relation_fwd,
        &mut model.relation_bwd,
    ] {
        for x in m.as_mut_slice() {
            *x = normal.sample(rng);
        }
    }
    Ok(model)
}

/// Relation names for tests and synthetic worlds that have no vocabulary.
pub fn placeholder_relation_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("r{i:04}")).collect()
}
