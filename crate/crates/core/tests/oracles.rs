//! Independent re-computations compared against the library: brute-force
//! ranking, finite-difference gradients, naive rule closure, complex
//! arithmetic, and the corruption distribution.

mod common;

use std::collections::HashMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use taxokg::data::Triple;
use taxokg::models::{ConstraintGraph, ModelKind, Nonlinearity, Role};
use taxokg::training::negative_batch;

use common::oracle::{closure_case, gradient_case, ranking_case};
use common::random_model;

#[test]
fn ranking_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..30 {
        ranking_case(case, &mut rng).unwrap();
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut point = 0u64;
    while checked < 100 {
        point += 1;
        if gradient_case(point, &mut rng).unwrap().is_some() {
            checked += 1;
        }
    }
}

#[test]
fn closure_matches_repeated_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..60 {
        closure_case(&mut rng).unwrap();
    }
}

#[test]
fn complex_score_matches_complex_arithmetic() {
    for seed in 0..20 {
        let m = random_model(ModelKind::ComplEx, Nonlinearity::Identity, 5, ConstraintGraph::empty(3), 7, seed);
        let c = |re: &[f64], im: &[f64]| -> Vec<Complex64> {
            re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()
        };
        for h in 0..5 {
            for r in 0..3 {
                for t in 0..5 {
                    let hv = c(&m.embed_entity(h, Role::Head), &m.embed_entity(h, Role::Tail));
                    let tv = c(&m.embed_entity(t, Role::Head), &m.embed_entity(t, Role::Tail));
                    let (rf, rb) = m.effective_relation(r);
                    let rv = c(&rf, &rb);
                    let want: Complex64 = (0..7).map(|l| hv[l] * rv[l] * tv[l].conj()).sum();
                    let got = m.score(&Triple::new(h, r, t));
                    assert!((got - want.re).abs() < 1e-12, "{got} vs {}", want.re);
                }
            }
        }
    }
}

#[test]
fn corruption_side_is_a_fair_coin() {
    // with two entities each side has exactly one legal replacement
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let pos = vec![Triple::new(0, 0, 1); 4000];
    let batch = negative_batch(&pos, 1, 2, &mut rng);
    let heads = batch.iter().filter(|b| b.label < 0.0 && b.triple == Triple::new(1, 0, 1)).count() as f64;
    let tails = batch.iter().filter(|b| b.label < 0.0 && b.triple == Triple::new(0, 0, 0)).count() as f64;
    assert_eq!(heads + tails, 4000.0);
    let e = 2000.0;
    let chi2 = (heads - e).powi(2) / e + (tails - e).powi(2) / e;
    // df = 1, p = 0.001
    assert!(chi2 < 10.83, "chi2 {chi2}");
}

#[test]
fn replacement_entity_is_uniform_over_the_others() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let src = Triple::new(2, 0, 2);
    let batch = negative_batch(&vec![src; 5000], 1, 5, &mut rng);
    let mut counts: HashMap<usize, f64> = HashMap::new();
    for b in batch.iter().filter(|b| b.label < 0.0) {
        let e = if b.triple.head != src.head { b.triple.head } else { b.triple.tail };
        *counts.entry(e).or_default() += 1.0;
    }
    assert!(!counts.contains_key(&2));
    let e = 5000.0 / 4.0;
    let chi2: f64 = counts.values().map(|c| (c - e).powi(2) / e).sum();
    // df = 3, p = 0.001
    assert!(chi2 < 16.27, "chi2 {chi2}");
}
