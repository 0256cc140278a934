//! Mini-batch contrastive training with an L2-regularized negative
//! log-likelihood.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::data::{Direction, Triple, TripleStore};
use crate::models::{sigmoid, EmbeddingModel, Matrix, ModelKind};
use crate::seed;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-12;
const ADAGRAD_FLOOR: f64 = 1e-8;
const MAX_CORRUPTION_RETRIES: usize = 16;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("model has {model} entities / {model_rel} relations but the store has {store} / {store_rel}")]
    ShapeMismatch {
        model: usize,
        model_rel: usize,
        store: usize,
        store_rel: usize,
    },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    AdaGrad,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::AdaGrad => "adagrad",
        })
    }
}

impl FromStr for Optimizer {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adagrad" => Ok(Optimizer::AdaGrad),
            _ => Err(format!("unknown optimizer `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub neg_ratio: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 100,
            neg_ratio: 1,
            learning_rate: 0.1,
            l2_lambda: 0.03,
            optimizer: Optimizer::AdaGrad,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.neg_ratio == 0 {
            return Err(TrainError::Config("batch_size and neg_ratio must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(TrainError::Config("l2_lambda must be non-negative".into()));
        }
        Ok(())
    }
}

/// Mean training loss per completed epoch (epochs numbered from 1).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossTrace {
    pub epochs: Vec<(usize, f64)>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.epochs.last().map(|&(_, l)| l)
    }

    /// First epoch whose loss is below `factor` times the final loss.
    pub fn first_epoch_below(&self, factor: f64) -> Option<usize> {
        let target = factor * self.last()?;
        self.epochs.iter().find(|&&(_, l)| l < target).map(|&(e, _)| e)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(out, "epoch,loss")?;
        }
        for (e, l) in &self.epochs {
            writeln!(out, "{e},{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledTriple {
    pub triple: Triple,
    /// +1 for observed triples, -1 for corruptions.
    pub label: f64,
}

/// Each positive followed by `neg_ratio` corruptions of it. A corruption
/// replaces the head or the tail (fair coin) with a uniform entity; draws
/// that reproduce the source triple are retried a bounded number of times.
pub fn negative_batch<R: Rng + ?Sized>(
    positives: &[Triple],
    neg_ratio: usize,
    num_entities: usize,
    rng: &mut R,
) -> Vec<LabeledTriple> {
    let mut batch = Vec::with_capacity(positives.len() * (neg_ratio + 1));
    for &pos in positives {
        batch.push(LabeledTriple {
            triple: pos,
            label: 1.0,
        });
        for _ in 0..neg_ratio {
            let corrupt_head = rng.random_bool(0.5);
            let mut neg = pos;
            for _ in 0..MAX_CORRUPTION_RETRIES {
                let e = rng.random_range(0..num_entities);
                if corrupt_head {
                    neg.head = e;
                } else {
                    neg.tail = e;
                }
                if neg != pos {
                    break;
                }
            }
            batch.push(LabeledTriple {
                triple: neg,
                label: -1.0,
            });
        }
    }
    batch
}

/// Gradient rows keyed by parameter row, kept in first-touch order.
#[derive(Debug, Clone, Default)]
pub struct SparseRows {
    dim: usize,
    slots: HashMap<usize, usize>,
    ids: Vec<usize>,
    data: Vec<f64>,
}

impl SparseRows {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    fn row_mut(&mut self, id: usize) -> &mut [f64] {
        let slot = match self.slots.get(&id) {
            Some(&s) => s,
            None => {
                let s = self.ids.len();
                self.slots.insert(id, s);
                self.ids.push(id);
                self.data.resize(self.data.len() + self.dim, 0.0);
                s
            }
        };
        &mut self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn get(&self, id: usize) -> Option<&[f64]> {
        self.slots
            .get(&id)
            .map(|&s| &self.data[s * self.dim..(s + 1) * self.dim])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.ids
            .iter()
            .enumerate()
            .map(move |(s, &id)| (id, &self.data[s * self.dim..(s + 1) * self.dim]))
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    EntityHead,
    EntityTail,
    RelationFwd,
    RelationBwd,
    DeltaFwd,
    DeltaBwd,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::EntityHead,
        Param::EntityTail,
        Param::RelationFwd,
        Param::RelationBwd,
        Param::DeltaFwd,
        Param::DeltaBwd,
    ];

    pub fn of(self, model: &EmbeddingModel) -> &Matrix {
        match self {
            Param::EntityHead => &model.entity_head,
            Param::EntityTail => &model.entity_tail,
            Param::RelationFwd => &model.relation_fwd,
            Param::RelationBwd => &model.relation_bwd,
            Param::DeltaFwd => &model.delta_fwd,
            Param::DeltaBwd => &model.delta_bwd,
        }
    }

    pub fn of_mut(self, model: &mut EmbeddingModel) -> &mut Matrix {
        match self {
            Param::EntityHead => &mut model.entity_head,
            Param::EntityTail => &mut model.entity_tail,
            Param::RelationFwd => &mut model.relation_fwd,
            Param::RelationBwd => &mut model.relation_bwd,
            Param::DeltaFwd => &mut model.delta_fwd,
            Param::DeltaBwd => &mut model.delta_bwd,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Gradients of the raw parameters touched by a batch.
#[derive(Debug, Clone)]
pub struct Gradients {
    rows: [SparseRows; 6],
}

impl Gradients {
    fn new(dim: usize) -> Self {
        Self {
            rows: std::array::from_fn(|_| SparseRows::new(dim)),
        }
    }

    pub fn param(&self, p: Param) -> &SparseRows {
        &self.rows[p.index()]
    }

    fn row_mut(&mut self, p: Param, id: usize) -> &mut [f64] {
        self.rows[p.index()].row_mut(id)
    }
}

#[derive(Debug, Clone)]
pub struct BatchLoss {
    /// `nll + regularizer`
    pub loss: f64,
    pub nll: f64,
    pub regularizer: f64,
    pub gradients: Gradients,
}

fn add_scaled(dst: &mut [f64], scale: f64, a: &[f64], b: &[f64]) {
    for l in 0..dst.len() {
        dst[l] += scale * a[l] * b[l];
    }
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Loss and gradients for one labeled batch.
///
/// Gradients reach raw entity rows through phi and reach the free relation
/// rows and delta rows through the tie graph. The entity ReLU kink has
/// derivative 0; delta rows use the right derivative at 0 because they start
/// there and are kept in `[0, inf)` by the optimizer.
pub fn batch_loss(model: &EmbeddingModel, batch: &[LabeledTriple], l2_lambda: f64) -> BatchLoss {
    let k = model.dim;
    let phi = model.phi;
    let (eff_fwd, eff_bwd) = model.effective_relations();
    let nr = model.num_relations();
    let mut grad_eff_fwd = Matrix::zeros(nr, k);
    let mut grad_eff_bwd = Matrix::zeros(nr, k);
    let mut rel_touched = vec![false; nr];
    let mut rel_count = vec![0usize; nr];
    let mut grads = Gradients::new(k);

    let mut nll = 0.0;
    let mut reg = 0.0;

    let post = |raw: &[f64]| -> Vec<f64> { raw.iter().map(|&x| phi.apply(x)).collect() };
    let mut d_hh = vec![0.0; k];
    let mut d_ht = vec![0.0; k];
    let mut d_th = vec![0.0; k];
    let mut d_tt = vec![0.0; k];

    for item in batch {
        let Triple { head, relation, tail } = item.triple;
        let hh_raw = model.entity_head.row(head);
        let ht_raw = model.entity_tail.row(head);
        let th_raw = model.entity_head.row(tail);
        let tt_raw = model.entity_tail.row(tail);
        let (hh, ht, th, tt) = (post(hh_raw), post(ht_raw), post(th_raw), post(tt_raw));
        let rf = eff_fwd.row(relation);
        let rb = eff_bwd.row(relation);

        let score = crate::models::score_parts(model.kind, &hh, &ht, rf, rb, &th, &tt);
        let p = sigmoid(score);
        let pc = p.clamp(EPS, 1.0 - EPS);
        let positive = item.label > 0.0;
        nll -= if positive { pc.ln() } else { (1.0 - pc).ln() };
        // d(-log sigma(s))/ds = sigma - 1 ; d(-log(1 - sigma(s)))/ds = sigma
        let g = if positive { p - 1.0 } else { p };

        d_hh.fill(0.0);
        d_ht.fill(0.0);
        d_th.fill(0.0);
        d_tt.fill(0.0);
        rel_touched[relation] = true;
        rel_count[relation] += 1;
        {
            let gf = grad_eff_fwd.row_mut(relation);
            let gb_ptr = &mut grad_eff_bwd;
            match model.kind {
                ModelKind::SimplE | ModelKind::SimplEPlus => {
                    let hg = 0.5 * g;
                    add_scaled(&mut d_hh, hg, rf, &tt);
                    add_scaled(&mut d_tt, hg, &hh, rf);
                    add_scaled(gf, hg, &hh, &tt);
                    add_scaled(&mut d_th, hg, rb, &ht);
                    add_scaled(&mut d_ht, hg, &th, rb);
                    add_scaled(gb_ptr.row_mut(relation), hg, &th, &ht);
                }
                ModelKind::ComplEx => {
                    // (hh, ht) = (Re h, Im h); (th, tt) = (Re t, Im t)
                    add_scaled(&mut d_hh, g, rf, &th);
                    add_scaled(&mut d_hh, g, rb, &tt);
                    add_scaled(&mut d_ht, g, rf, &tt);
                    add_scaled(&mut d_ht, -g, rb, &th);
                    add_scaled(gf, g, &hh, &th);
                    add_scaled(gf, g, &ht, &tt);
                    add_scaled(&mut d_th, g, &hh, rf);
                    add_scaled(&mut d_th, -g, &ht, rb);
                    add_scaled(&mut d_tt, g, &ht, rf);
                    add_scaled(&mut d_tt, g, &hh, rb);
                    let gb = gb_ptr.row_mut(relation);
                    add_scaled(gb, g, &hh, &tt);
                    add_scaled(gb, -g, &ht, &th);
                }
            }
        }

        for (param, id, raw, d) in [
            (Param::EntityHead, head, hh_raw, &d_hh),
            (Param::EntityTail, head, ht_raw, &d_ht),
            (Param::EntityHead, tail, th_raw, &d_th),
            (Param::EntityTail, tail, tt_raw, &d_tt),
        ] {
            reg += l2_lambda * sq_norm(raw);
            let out = grads.row_mut(param, id);
            for l in 0..k {
                out[l] += d[l] * phi.derivative(raw[l]) + 2.0 * l2_lambda * raw[l];
            }
        }
    }

    // Back-propagate effective-relation gradients through the tie graph,
    // premises before their conclusions.
    let graph = model.constraints();
    let order = graph.resolution_order();
    let mut buf_f = vec![0.0; k];
    let mut buf_b = vec![0.0; k];
    for &r in order.iter().rev() {
        if !rel_touched[r] && rel_count[r] == 0 {
            continue;
        }
        match graph.constraint(r) {
            None => {
                let touches = rel_count[r] as f64;
                let raw_f = model.relation_fwd.row(r);
                let raw_b = model.relation_bwd.row(r);
                reg += l2_lambda * touches * (sq_norm(raw_f) + sq_norm(raw_b));
                let out = grads.row_mut(Param::RelationFwd, r);
                for l in 0..k {
                    out[l] += grad_eff_fwd.row(r)[l] + 2.0 * l2_lambda * touches * raw_f[l];
                }
                let out = grads.row_mut(Param::RelationBwd, r);
                for l in 0..k {
                    out[l] += grad_eff_bwd.row(r)[l] + 2.0 * l2_lambda * touches * raw_b[l];
                }
            }
            Some(c) => {
                buf_f.copy_from_slice(grad_eff_fwd.row(r));
                buf_b.copy_from_slice(grad_eff_bwd.row(r));
                let touches = rel_count[r];
                if let Some(d) = c.delta {
                    let df = model.delta_fwd.row(d);
                    let db = model.delta_bwd.row(d);
                    let t = touches as f64;
                    reg += l2_lambda * t * (sq_norm(df) + sq_norm(db));
                    let out = grads.row_mut(Param::DeltaFwd, d);
                    for l in 0..k {
                        let mask = if df[l] >= 0.0 { 1.0 } else { 0.0 };
                        out[l] += -buf_f[l] * mask + 2.0 * l2_lambda * t * df[l];
                    }
                    let out = grads.row_mut(Param::DeltaBwd, d);
                    for l in 0..k {
                        let mask = if db[l] >= 0.0 { 1.0 } else { 0.0 };
                        out[l] += -buf_b[l] * mask + 2.0 * l2_lambda * t * db[l];
                    }
                }
                let s = c.conclusion;
                let (to_f, to_b) = match c.direction {
                    Direction::Direct => (&buf_f, &buf_b),
                    Direction::Inverse => (&buf_b, &buf_f),
                };
                for l in 0..k {
                    grad_eff_fwd.row_mut(s)[l] += to_f[l];
                    grad_eff_bwd.row_mut(s)[l] += to_b[l];
                }
                rel_touched[s] = true;
                // the conclusion's rows are "touched" once per use of the premise
                rel_count[s] += touches;
            }
        }
    }

    BatchLoss {
        loss: nll + reg,
        nll,
        regularizer: reg,
        gradients: grads,
    }
}

/// Accumulated squared gradients for AdaGrad.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: Optimizer,
    learning_rate: f64,
    accumulators: Vec<Matrix>,
}

impl OptimizerState {
    pub fn new(model: &EmbeddingModel, kind: Optimizer, learning_rate: f64) -> Self {
        let accumulators = match kind {
            Optimizer::AdaGrad => Param::ALL
                .iter()
                .map(|p| {
                    let m = p.of(model);
                    Matrix::zeros(m.rows(), m.cols())
                })
                .collect(),
            Optimizer::Sgd => Vec::new(),
        };
        Self {
            kind,
            learning_rate,
            accumulators,
        }
    }

    pub fn step(&mut self, model: &mut EmbeddingModel, grads: &Gradients) {
        let lr = self.learning_rate;
        for p in Param::ALL {
            let target = p.of_mut(model);
            for (id, g) in grads.param(p).iter() {
                let row = target.row_mut(id);
                match self.kind {
                    Optimizer::Sgd => {
                        for l in 0..g.len() {
                            row[l] -= lr * g[l];
                        }
                    }
                    Optimizer::AdaGrad => {
                        let acc = self.accumulators[p.index()].row_mut(id);
                        for l in 0..g.len() {
                            acc[l] += g[l] * g[l];
                            row[l] -= lr * g[l] / acc[l].sqrt().max(ADAGRAD_FLOOR);
                        }
                    }
                }
                if matches!(p, Param::DeltaFwd | Param::DeltaBwd) {
                    for x in row.iter_mut() {
                        *x = x.max(0.0);
                    }
                }
            }
        }
    }
}

/// Trains `model` on `store.train`. Shuffling and corruption draws come from
/// the `sampling` sub-stream of `config.seed`; negatives are fresh each epoch.
pub fn train(model: &mut EmbeddingModel, store: &TripleStore, config: &TrainConfig) -> Result<LossTrace, TrainError> {
    config.validate()?;
    if model.num_entities() != store.vocab.num_entities() || model.num_relations() != store.vocab.num_relations() {
        return Err(TrainError::ShapeMismatch {
            model: model.num_entities(),
            model_rel: model.num_relations(),
            store: store.vocab.num_entities(),
            store_rel: store.vocab.num_relations(),
        });
    }
    train_triples(model, &store.train, config)
}

pub fn train_triples(model: &mut EmbeddingModel, triples: &[Triple], config: &TrainConfig) -> Result<LossTrace, TrainError> {
    config.validate()?;
    let mut rng = seed::substream(config.seed, seed::SAMPLING);
    let mut opt = OptimizerState::new(model, config.optimizer, config.learning_rate);
    let mut order: Vec<usize> = (0..triples.len()).collect();
    let mut trace = LossTrace::default();
    let ne = model.num_entities();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let positives: Vec<Triple> = chunk.iter().map(|&i| triples[i]).collect();
            let batch = negative_batch(&positives, config.neg_ratio, ne, &mut rng);
            let out = batch_loss(model, &batch, config.l2_lambda);
            if !out.loss.is_finite() {
                return Err(TrainError::NonFinite { epoch, batch: b });
            }
            total += out.loss;
            opt.step(model, &out.gradients);
            debug_assert!(
                model.constraints().is_empty() || model.max_tie_violation() <= 0.0,
                "tie violated after update"
            );
        }
        let mean = if triples.is_empty() {
            0.0
        } else {
            total / triples.len() as f64
        };
        trace.epochs.push((epoch, mean));
    }
    Ok(trace)
}
