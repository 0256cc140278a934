//! Entity-ranking evaluation: raw and filtered MRR and hit@{1,3,10}.
//!
//! Each test triple is ranked twice, once against head corruptions and once
//! against tail corruptions, giving `2 |T|` rank observations. Ranking uses
//! pre-sigmoid scores since the sigmoid is strictly increasing.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::data::{Triple, Vocabulary};
use crate::models::{EmbeddingModel, Scorer};

pub const HIT_LEVELS: [usize; 3] = [1, 3, 10];

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("test set is empty")]
    EmptyTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Head => "head",
            Side::Tail => "tail",
        })
    }
}

/// How candidates scoring exactly like the true triple count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TieMode {
    /// Only strictly higher scores push the true triple down.
    Optimistic,
    /// Mean of the optimistic and pessimistic rank.
    Expected,
}

impl FromStr for TieMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "optimistic" => Ok(TieMode::Optimistic),
            "expected" => Ok(TieMode::Expected),
            _ => Err(format!("unknown tie mode `{s}`")),
        }
    }
}

impl fmt::Display for TieMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TieMode::Optimistic => "optimistic",
            TieMode::Expected => "expected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankRecord {
    pub triple: Triple,
    pub side: Side,
    pub raw: f64,
    pub filtered: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tie_mode: TieMode,
    pub mrr_raw: f64,
    pub mrr_filtered: f64,
    pub hits_raw: BTreeMap<usize, f64>,
    pub hits_filtered: BTreeMap<usize, f64>,
    #[serde(skip)]
    pub ranks: Vec<RankRecord>,
}

impl EvalReport {
    pub fn hit(&self, t: usize) -> f64 {
        self.hits_filtered[&t]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned text table in the layout `MRR Filter | MRR Raw | Hit@1 | Hit@3 | Hit@10`.
    pub fn to_table(&self, label: &str) -> String {
        let width = label.len().max(5);
        let mut s = format!(
            "{:<width$}  {:>10}  {:>7}  {:>6}  {:>6}  {:>6}\n",
            "model", "MRR Filter", "MRR Raw", "Hit@1", "Hit@3", "Hit@10"
        );
        s += &format!(
            "{:<width$}  {:>10.3}  {:>7.3}  {:>6.3}  {:>6.3}  {:>6.3}\n",
            label,
            self.mrr_filtered,
            self.mrr_raw,
            self.hit(1),
            self.hit(3),
            self.hit(10)
        );
        s
    }

    pub fn write_rank_csv<W: Write>(&self, mut out: W, vocab: &Vocabulary) -> std::io::Result<()> {
        writeln!(out, "h,r,t,side,raw_rank,filtered_rank")?;
        for rec in &self.ranks {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                vocab.entity_name(rec.triple.head),
                vocab.relation_name(rec.triple.relation),
                vocab.entity_name(rec.triple.tail),
                rec.side,
                rec.raw,
                rec.filtered
            )?;
        }
        Ok(())
    }
}

fn corrupt(triple: &Triple, side: Side, e: usize) -> Triple {
    match side {
        Side::Head => Triple::new(e, triple.relation, triple.tail),
        Side::Tail => Triple::new(triple.head, triple.relation, e),
    }
}

fn original(triple: &Triple, side: Side) -> usize {
    match side {
        Side::Head => triple.head,
        Side::Tail => triple.tail,
    }
}

fn rank_from_counts(greater: usize, equal: usize, tie: TieMode) -> f64 {
    match tie {
        TieMode::Optimistic => 1.0 + greater as f64,
        TieMode::Expected => 1.0 + greater as f64 + equal as f64 / 2.0,
    }
}

/// (raw, filtered) ranks of one side, from the scores of all candidates.
fn ranks_from_scores(
    scores: &[f64],
    triple: &Triple,
    side: Side,
    known: &HashSet<Triple>,
    tie: TieMode,
) -> (f64, f64) {
    let own = original(triple, side);
    let target = scores[own];
    let (mut gt, mut eq, mut gt_f, mut eq_f) = (0, 0, 0, 0);
    for (e, &s) in scores.iter().enumerate() {
        if e == own || !(s >= target) {
            continue;
        }
        let filtered_out = known.contains(&corrupt(triple, side, e));
        if s > target {
            gt += 1;
            if !filtered_out {
                gt_f += 1;
            }
        } else {
            eq += 1;
            if !filtered_out {
                eq_f += 1;
            }
        }
    }
    (rank_from_counts(gt, eq, tie), rank_from_counts(gt_f, eq_f, tie))
}

fn side_scores(scorer: &Scorer, triple: &Triple, side: Side) -> Vec<f64> {
    match side {
        Side::Head => scorer.score_all_heads(triple.relation, triple.tail),
        Side::Tail => scorer.score_all_tails(triple.head, triple.relation),
    }
}

/// Rank of `triple` among its corruptions on one side. In filtered mode,
/// candidates whose corrupted triple is in `known` are dropped first.
pub fn rank_triple(
    scorer: &Scorer,
    triple: &Triple,
    side: Side,
    filtered: bool,
    known: &HashSet<Triple>,
    tie: TieMode,
) -> f64 {
    let scores = side_scores(scorer, triple, side);
    let (raw, filt) = ranks_from_scores(&scores, triple, side, known, tie);
    if filtered {
        filt
    } else {
        raw
    }
}

/// Builds the report from already-computed rank records.
pub fn report_from_ranks(ranks: Vec<RankRecord>, tie_mode: TieMode) -> Result<EvalReport, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let n = ranks.len() as f64;
    let mrr_raw = ranks.iter().map(|r| 1.0 / r.raw).sum::<f64>() / n;
    let mrr_filtered = ranks.iter().map(|r| 1.0 / r.filtered).sum::<f64>() / n;
    let hits = |f: fn(&RankRecord) -> f64| -> BTreeMap<usize, f64> {
        HIT_LEVELS
            .iter()
            .map(|&t| (t, ranks.iter().filter(|r| f(r) <= t as f64).count() as f64 / n))
            .collect()
    };
    let hits_raw = hits(|r| r.raw);
    let hits_filtered = hits(|r| r.filtered);
    Ok(EvalReport {
        tie_mode,
        mrr_raw,
        mrr_filtered,
        hits_raw,
        hits_filtered,
        ranks,
    })
}

pub fn evaluate(
    model: &EmbeddingModel,
    test: &[Triple],
    known: &HashSet<Triple>,
    tie: TieMode,
) -> Result<EvalReport, EvalError> {
    evaluate_with(&model.scorer(), test, known, tie)
}

pub fn evaluate_with(
    scorer: &Scorer,
    test: &[Triple],
    known: &HashSet<Triple>,
    tie: TieMode,
) -> Result<EvalReport, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTest);
    }
    let mut ranks = Vec::with_capacity(2 * test.len());
    for triple in test {
        for side in [Side::Head, Side::Tail] {
            let scores = side_scores(scorer, triple, side);
            let (raw, filtered) = ranks_from_scores(&scores, triple, side, known, tie);
            ranks.push(RankRecord {
                triple: *triple,
                side,
                raw,
                filtered,
            });
        }
    }
    report_from_ranks(ranks, tie)
}
