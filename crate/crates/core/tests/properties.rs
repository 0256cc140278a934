mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taxokg::checkpoint::{Checkpoint, Format};
use taxokg::data::{parse_triple_file, subsample_train, write_triples, Direction, SubsumptionRule, Triple, TripleStore, Vocabulary};
use taxokg::evaluation::{evaluate, TieMode};
use taxokg::logic::{forward_closure, strip_redundant};
use taxokg::models::{score_parts, sigmoid, ConstraintGraph, EmbeddingModel, ModelKind, Nonlinearity, Role};
use taxokg::training::Param;

use common::{random_model, sport_like_names, sport_like_rules};

fn phi_strategy() -> impl Strategy<Value = Nonlinearity> {
    prop_oneof![
        Just(Nonlinearity::Relu),
        Just(Nonlinearity::Exponential),
        Just(Nonlinearity::Logistic)
    ]
}

fn nonneg_vec(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| rng.random_range(0.0..2.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// For every tied rule `r -> s`, any non-negative entity pair scores at
    /// least as high under `s` as under `r`, at any parameter values.
    #[test]
    fn subsumption_monotonicity(seed in any::<u64>(), phi in phi_strategy(), k in 1usize..12) {
        let names = sport_like_names();
        let rules = sport_like_rules();
        let graph = ConstraintGraph::build(&names, &rules).unwrap();
        let m = random_model(ModelKind::SimplEPlus, phi, 3, graph, k, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let tol = 1e-9 * k as f64;
        for _ in 0..1000 {
            let (hh, ht, th, tt) = (nonneg_vec(&mut rng, k), nonneg_vec(&mut rng, k), nonneg_vec(&mut rng, k), nonneg_vec(&mut rng, k));
            for rule in m.constraints().rules() {
                if m.constraints().unenforced().contains(rule) {
                    continue;
                }
                let (rf, rb) = m.effective_relation(rule.premise);
                let (sf, sb) = m.effective_relation(rule.conclusion);
                let premise = score_parts(m.kind, &hh, &ht, &rf, &rb, &th, &tt);
                let conclusion = match rule.direction {
                    Direction::Direct => score_parts(m.kind, &hh, &ht, &sf, &sb, &th, &tt),
                    // (h, r, t) implies (t, s, h)
                    Direction::Inverse => score_parts(m.kind, &th, &tt, &sf, &sb, &hh, &ht),
                };
                prop_assert!(conclusion >= premise - tol, "{rule:?}: {conclusion} < {premise}");
            }
        }
    }

    /// Negating the head's rows negates the score of unconstrained families.
    #[test]
    fn sign_flip(seed in any::<u64>(), complex in any::<bool>(), k in 1usize..10) {
        let kind = if complex { ModelKind::ComplEx } else { ModelKind::SimplE };
        let m = random_model(kind, Nonlinearity::Identity, 4, ConstraintGraph::empty(2), k, seed);
        for (h, r, t) in [(0, 0, 1), (1, 1, 2), (3, 0, 3)] {
            let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<_>>();
            let (rf, rb) = m.effective_relation(r);
            let hh = m.embed_entity(h, Role::Head);
            let ht = m.embed_entity(h, Role::Tail);
            let th = m.embed_entity(t, Role::Head);
            let tt = m.embed_entity(t, Role::Tail);
            let s = score_parts(kind, &hh, &ht, &rf, &rb, &th, &tt);
            let flipped = score_parts(kind, &neg(hh), &neg(ht), &rf, &rb, &th, &tt);
            // the same entity as head and tail flips twice
            if h == t {
                continue;
            }
            prop_assert_eq!(flipped, -s);
            prop_assert!((sigmoid(flipped) - (1.0 - sigmoid(s))).abs() < 1e-12);
        }
    }

    /// ReLU is the identity on non-negative values, so SimplE+ collapses to
    /// SimplE there.
    #[test]
    fn relu_on_nonnegative_equals_simple(seed in any::<u64>(), k in 1usize..10) {
        let mut plus = random_model(ModelKind::SimplEPlus, Nonlinearity::Relu, 5, ConstraintGraph::empty(3), k, seed);
        for x in plus.entity_head.as_mut_slice().iter_mut().chain(plus.entity_tail.as_mut_slice()) {
            *x = x.abs();
        }
        let mut simple = plus.clone();
        simple.kind = ModelKind::SimplE;
        simple.phi = Nonlinearity::Identity;
        for h in 0..5 {
            for r in 0..3 {
                for t in 0..5 {
                    let tr = Triple::new(h, r, t);
                    prop_assert_eq!(plus.score(&tr), simple.score(&tr));
                }
            }
        }
    }

    /// Rescaling every relation by a positive power of two rescales all
    /// scores exactly, so ranks do not move.
    #[test]
    fn positive_rescaling_keeps_ranks(seed in any::<u64>(), kind_ix in 0usize..3) {
        let kind = [ModelKind::SimplE, ModelKind::SimplEPlus, ModelKind::ComplEx][kind_ix];
        let m = random_model(kind, Nonlinearity::Relu, 12, ConstraintGraph::empty(2), 4, seed);
        let mut scaled = m.clone();
        for x in scaled.relation_fwd.as_mut_slice().iter_mut().chain(scaled.relation_bwd.as_mut_slice()) {
            *x *= 4.0;
        }
        let test: Vec<Triple> = (0..8).map(|i| Triple::new(i, i % 2, (i * 5) % 12)).collect();
        let known: HashSet<Triple> = test.iter().copied().collect();
        let a = evaluate(&m, &test, &known, TieMode::Expected).unwrap();
        let b = evaluate(&scaled, &test, &known, TieMode::Expected).unwrap();
        prop_assert_eq!(a.ranks, b.ranks);
    }

    /// Ranking by probability gives the same order as ranking by score.
    #[test]
    fn sigmoid_preserves_order(seed in any::<u64>()) {
        let m = random_model(ModelKind::SimplE, Nonlinearity::Identity, 10, ConstraintGraph::empty(1), 3, seed);
        let scores: Vec<f64> = (0..10).map(|e| m.score(&Triple::new(0, 0, e))).collect();
        for i in 0..10 {
            for j in 0..10 {
                if scores[i] > scores[j] {
                    prop_assert!(m.probability(&Triple::new(0, 0, i)) >= m.probability(&Triple::new(0, 0, j)));
                }
            }
        }
    }
}

fn triples_strategy(max: usize) -> impl Strategy<Value = Vec<Triple>> {
    prop::collection::vec((0usize..6, 0usize..4, 0usize..6).prop_map(|(h, r, t)| Triple::new(h, r, t)), 0..max)
}

fn rules_strategy() -> impl Strategy<Value = Vec<SubsumptionRule>> {
    prop::collection::vec((0usize..4, 0usize..4, any::<bool>()), 0..6).prop_map(|raw| {
        let mut out: Vec<SubsumptionRule> = Vec::new();
        for (p, c, inv) in raw {
            let r = if inv { SubsumptionRule::inverse(p, c) } else { SubsumptionRule::direct(p, c) };
            if !(p == c && !inv) && !out.contains(&r) {
                out.push(r);
            }
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn strip_covers_input_and_is_idempotent(train in triples_strategy(60), rules in rules_strategy()) {
        let out = strip_redundant(&train, &rules);
        prop_assert_eq!(out.kept.len() + out.removed.len(), train.len());
        let closure = forward_closure(&out.kept, &rules);
        for t in &train {
            prop_assert!(closure.contains(t));
        }
        // kept preserves input order
        let mut it = train.iter();
        for k in &out.kept {
            prop_assert!(it.any(|t| t == k));
        }
        let again = strip_redundant(&out.kept, &rules);
        prop_assert!(again.removed.is_empty());
        prop_assert_eq!(again.kept, out.kept);
    }

    #[test]
    fn closure_is_monotone(a in triples_strategy(40), extra in triples_strategy(20), rules in rules_strategy()) {
        let mut b = a.clone();
        b.extend(extra);
        let ca = forward_closure(&a, &rules);
        let cb = forward_closure(&b, &rules);
        prop_assert!(ca.members().is_subset(cb.members()));
        // closing again adds nothing
        let again = forward_closure(&ca.derived, &rules);
        prop_assert_eq!(again.members(), ca.members());
    }

    #[test]
    fn triple_files_round_trip(train in triples_strategy(50)) {
        let mut vocab = Vocabulary::new();
        for i in 0..6 {
            vocab.intern_entity(&format!("e{i}"));
        }
        for i in 0..4 {
            vocab.intern_relation(&format!("r{i}"));
        }
        let mut buf = Vec::new();
        write_triples(&mut buf, &train, &vocab).unwrap();
        let mut fresh = vocab.clone();
        let back = parse_triple_file(&buf[..], &mut fresh).unwrap();
        prop_assert_eq!(back, train);
        prop_assert_eq!(fresh, vocab);
    }

    #[test]
    fn subsample_size_and_membership(n in 1usize..80, f in 0.01f64..=1.0, seed in any::<u64>()) {
        let mut vocab = Vocabulary::new();
        let train: Vec<Triple> = (0..n)
            .map(|i| {
                let h = vocab.intern_entity(&format!("a{i}"));
                let r = vocab.intern_relation("r");
                let t = vocab.intern_entity(&format!("b{i}"));
                Triple::new(h, r, t)
            })
            .collect();
        let store = TripleStore::new(vocab, train.clone(), vec![], vec![]);
        let sub = subsample_train(&store, f, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(sub.train.len(), ((f * n as f64).ceil() as usize).min(n));
        let all: HashSet<Triple> = train.into_iter().collect();
        prop_assert!(sub.train.iter().all(|t| all.contains(t)));
    }
}

fn bits(m: &EmbeddingModel) -> Vec<u64> {
    Param::ALL.iter().flat_map(|p| p.of(m).as_slice().iter().map(|x| x.to_bits())).collect()
}

fn checkpoint_fixture(seed: u64, with_rules: bool) -> Checkpoint {
    let names = sport_like_names();
    let (kind, graph) = if with_rules {
        (ModelKind::SimplEPlus, ConstraintGraph::build(&names, &sport_like_rules()).unwrap())
    } else {
        (ModelKind::ComplEx, ConstraintGraph::empty(names.len()))
    };
    let mut m = random_model(kind, Nonlinearity::Logistic, 4, graph, 3, seed);
    // awkward values must survive the text format too
    let specials = [-0.0, 5e-324, 1e300, -1.0 / 3.0, f64::MIN_POSITIVE, 0.1 + 0.2];
    for (x, s) in m.entity_head.as_mut_slice().iter_mut().zip(specials) {
        *x = s;
    }
    let vocab = Vocabulary::from_names((0..4).map(|i| format!("ent_{i}")).collect(), names).unwrap();
    Checkpoint::new(vocab, m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn checkpoint_round_trip(seed in any::<u64>(), with_rules in any::<bool>(), binary in any::<bool>()) {
        let ckpt = checkpoint_fixture(seed, with_rules);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model");
        let format = if binary { Format::Binary } else { Format::Text };
        ckpt.save(&path, format).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        prop_assert_eq!(bits(&back.model), bits(&ckpt.model));
        prop_assert_eq!(&back.vocab, &ckpt.vocab);
        prop_assert_eq!(back.model.kind, ckpt.model.kind);
        prop_assert_eq!(back.model.phi, ckpt.model.phi);
        prop_assert_eq!(back.model.constraints(), ckpt.model.constraints());
        let t = Triple::new(1, 0, 2);
        prop_assert_eq!(back.model.score(&t).to_bits(), ckpt.model.score(&t).to_bits());
    }
}

#[test]
fn truncated_checkpoint_is_rejected() {
    let ckpt = checkpoint_fixture(1, true);
    let mut text = Vec::new();
    ckpt.write_text(&mut text).unwrap();
    let cut = &text[..text.len() / 2];
    assert!(Checkpoint::read_text(cut).is_err());
    let mut bin = Vec::new();
    ckpt.write_binary(&mut bin).unwrap();
    assert!(Checkpoint::read_binary(&bin[..bin.len() - 3]).is_err());
}
