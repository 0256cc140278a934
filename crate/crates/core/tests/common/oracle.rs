//! Independent re-computations shared by the oracle tests and the
//! acceptance harness. Each `*_case` returns `Err` describing the first
//! disagreement with the library.

use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use taxokg::data::{Direction, SubsumptionRule, Triple};
use taxokg::evaluation::{evaluate, Side, TieMode, HIT_LEVELS};
use taxokg::logic::forward_closure;
use taxokg::models::{ConstraintGraph, EmbeddingModel, ModelKind, Nonlinearity};
use taxokg::training::{batch_loss, LabeledTriple, Param};

use super::{random_model, sport_like_names, sport_like_rules};

pub const FD_STEP: f64 = 1e-5;
pub const FD_REL_TOL: f64 = 1e-4;

/// Rank by sorting every candidate: the true entity is placed first among its
/// ties (optimistic) or in the middle of them (expected).
pub fn oracle_rank(model: &EmbeddingModel, t: &Triple, side: Side, known: Option<&HashSet<Triple>>, tie: TieMode) -> f64 {
    let own = match side {
        Side::Head => t.head,
        Side::Tail => t.tail,
    };
    let mut cands: Vec<(f64, bool)> = Vec::new();
    for e in 0..model.num_entities() {
        let c = match side {
            Side::Head => Triple::new(e, t.relation, t.tail),
            Side::Tail => Triple::new(t.head, t.relation, e),
        };
        if e != own && known.is_some_and(|k| k.contains(&c)) {
            continue;
        }
        cands.push((model.score(&c), e == own));
    }
    // descending score, true entity ahead of equal scores; numeric compare
    // so that -0.0 and 0.0 tie
    cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(b.1.cmp(&a.1)));
    let pos = cands.iter().position(|c| c.1).unwrap() + 1;
    match tie {
        TieMode::Optimistic => pos as f64,
        TieMode::Expected => {
            let target = cands[pos - 1].0;
            let ties = cands.iter().filter(|c| c.0 == target).count() - 1;
            pos as f64 + ties as f64 / 2.0
        }
    }
}

fn quantize(m: &mut EmbeddingModel, rng: &mut ChaCha8Rng) {
    for mat in [&mut m.entity_head, &mut m.entity_tail, &mut m.relation_fwd, &mut m.relation_bwd] {
        for x in mat.as_mut_slice() {
            *x = [-1.0, 0.0, 1.0][rng.random_range(0..3)];
        }
    }
}

/// A random toy store with up to 50 entities; even cases use coarse values
/// that force plenty of exact ties.
pub fn ranking_case(case: usize, rng: &mut ChaCha8Rng) -> Result<(), String> {
    let ne = rng.random_range(3..=50);
    let nr = rng.random_range(1..=4);
    let kind = [ModelKind::SimplE, ModelKind::SimplEPlus, ModelKind::ComplEx][case % 3];
    let mut m = random_model(kind, Nonlinearity::Relu, ne, ConstraintGraph::empty(nr), 3, case as u64);
    if case.is_multiple_of(2) {
        quantize(&mut m, rng);
    }
    let triple = |rng: &mut ChaCha8Rng| Triple::new(rng.random_range(0..ne), rng.random_range(0..nr), rng.random_range(0..ne));
    let test: Vec<Triple> = (0..rng.random_range(1..20)).map(|_| triple(rng)).collect();
    let mut known: HashSet<Triple> = (0..rng.random_range(0..3 * ne)).map(|_| triple(rng)).collect();
    known.extend(test.iter().copied());
    for tie in [TieMode::Optimistic, TieMode::Expected] {
        let report = evaluate(&m, &test, &known, tie).map_err(|e| e.to_string())?;
        let mut raw = Vec::new();
        let mut filt = Vec::new();
        for t in &test {
            for side in [Side::Head, Side::Tail] {
                raw.push(oracle_rank(&m, t, side, None, tie));
                filt.push(oracle_rank(&m, t, side, Some(&known), tie));
            }
        }
        for (i, rec) in report.ranks.iter().enumerate() {
            if rec.raw != raw[i] || rec.filtered != filt[i] {
                return Err(format!(
                    "case {case} {tie}: rank {i} is ({}, {}), oracle ({}, {})",
                    rec.raw, rec.filtered, raw[i], filt[i]
                ));
            }
        }
        let n = raw.len() as f64;
        let mrr = |r: &[f64]| r.iter().map(|x| 1.0 / x).sum::<f64>() / n;
        if (report.mrr_raw - mrr(&raw)).abs() >= 1e-12 || (report.mrr_filtered - mrr(&filt)).abs() >= 1e-12 {
            return Err(format!("case {case} {tie}: MRR differs"));
        }
        for k in HIT_LEVELS {
            let hit = |r: &[f64]| r.iter().filter(|&&x| x <= k as f64).count() as f64 / n;
            if (report.hits_raw[&k] - hit(&raw)).abs() >= 1e-12 || (report.hits_filtered[&k] - hit(&filt)).abs() >= 1e-12 {
                return Err(format!("case {case} {tie}: hit@{k} differs"));
            }
        }
    }
    Ok(())
}

/// Keeps every raw value at least `gap` away from zero so ReLU kinks are not
/// straddled by the finite-difference step.
pub fn push_off_kinks(m: &mut EmbeddingModel, gap: f64) {
    for p in Param::ALL {
        for x in p.of_mut(m).as_mut_slice() {
            if x.abs() < gap {
                *x = if *x < 0.0 { -gap } else { gap };
            }
        }
    }
}

/// Compares one randomly chosen gradient coordinate with a central
/// difference. `Ok(None)` means the step would cross a kink and the point
/// was skipped; `Ok(Some(rel))` is the relative error.
pub fn gradient_case(point: u64, rng: &mut ChaCha8Rng) -> Result<Option<f64>, String> {
    let names = sport_like_names();
    let kind = [ModelKind::SimplE, ModelKind::SimplEPlus, ModelKind::ComplEx][(point % 3) as usize];
    let phi = [Nonlinearity::Relu, Nonlinearity::Exponential, Nonlinearity::Logistic][rng.random_range(0..3)];
    let graph = if kind == ModelKind::SimplEPlus && point.is_multiple_of(2) {
        ConstraintGraph::build(&names, &sport_like_rules()).unwrap()
    } else {
        ConstraintGraph::empty(names.len())
    };
    let ne = 6;
    let mut m = random_model(kind, phi, ne, graph, 4, 1000 + point);
    push_off_kinks(&mut m, 0.05);
    let batch: Vec<LabeledTriple> = (0..6)
        .map(|i| LabeledTriple {
            triple: Triple::new(rng.random_range(0..ne), rng.random_range(0..names.len()), rng.random_range(0..ne)),
            label: if i % 2 == 0 { 1.0 } else { -1.0 },
        })
        .collect();
    let lambda = rng.random_range(0.0..0.1);
    let out = batch_loss(&m, &batch, lambda);
    let mut coords = Vec::new();
    for p in Param::ALL {
        for (row, g) in out.gradients.param(p).iter() {
            for (col, &v) in g.iter().enumerate() {
                coords.push((p, row, col, v));
            }
        }
    }
    let &(p, row, col, analytic) = coords.choose(rng).unwrap();
    let idx = row * m.dim + col;
    let base = p.of(&m).as_slice()[idx];
    if (matches!(p, Param::DeltaFwd | Param::DeltaBwd) || phi == Nonlinearity::Relu)
        && (base + FD_STEP).signum() != (base - FD_STEP).signum()
    {
        return Ok(None);
    }
    let mut plus = m.clone();
    p.of_mut(&mut plus).as_mut_slice()[idx] = base + FD_STEP;
    let mut minus = m.clone();
    p.of_mut(&mut minus).as_mut_slice()[idx] = base - FD_STEP;
    let numeric = (batch_loss(&plus, &batch, lambda).loss - batch_loss(&minus, &batch, lambda).loss) / (2.0 * FD_STEP);
    let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
    if rel < FD_REL_TOL {
        Ok(Some(rel))
    } else {
        Err(format!(
            "point {point} {kind:?} {phi:?} {p:?}[{row},{col}]: analytic {analytic} numeric {numeric} rel {rel}"
        ))
    }
}

/// Apply every rule to every triple until nothing changes.
pub fn naive_closure(triples: &[Triple], rules: &[SubsumptionRule]) -> HashSet<Triple> {
    let mut set: HashSet<Triple> = triples.iter().copied().collect();
    loop {
        let mut added = Vec::new();
        for t in &set {
            for r in rules {
                if t.relation != r.premise {
                    continue;
                }
                let d = match r.direction {
                    Direction::Direct => Triple::new(t.head, r.conclusion, t.tail),
                    Direction::Inverse => Triple::new(t.tail, r.conclusion, t.head),
                };
                if !set.contains(&d) {
                    added.push(d);
                }
            }
        }
        if added.is_empty() {
            return set;
        }
        set.extend(added);
    }
}

/// Up to 100 random triples and a handful of random rules.
pub fn closure_case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let ne = rng.random_range(1..8);
    let nr = rng.random_range(1..6);
    let n = rng.random_range(0..=100);
    let triples: Vec<Triple> = (0..n)
        .map(|_| Triple::new(rng.random_range(0..ne), rng.random_range(0..nr), rng.random_range(0..ne)))
        .collect();
    let mut rules = Vec::new();
    for _ in 0..rng.random_range(0..8) {
        let (p, c) = (rng.random_range(0..nr), rng.random_range(0..nr));
        let r = if rng.random_bool(0.5) {
            SubsumptionRule::direct(p, c)
        } else {
            SubsumptionRule::inverse(p, c)
        };
        if !(p == c && r.direction == Direction::Direct) && !rules.contains(&r) {
            rules.push(r);
        }
    }
    let closure = forward_closure(&triples, &rules);
    if closure.members() != &naive_closure(&triples, &rules) {
        return Err(format!("closure of {n} triples under {rules:?} differs"));
    }
    if closure.len() != closure.members().len() {
        return Err("derived list has duplicates".into());
    }
    // every witness is a member and its rule really produces the triple
    for t in closure.new_triples() {
        let (src, rule) = closure.provenance[t];
        if !closure.contains(&src) || rule.apply(&src) != Some(*t) {
            return Err(format!("bad witness for {t:?}"));
        }
    }
    Ok(())
}
