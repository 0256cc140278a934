//! Shared fixtures: a small synthetic taxonomy-structured KG and random
//! models. The KG is generated, not a real dataset; tests use it to exercise
//! the pipeline end to end.
#![allow(dead_code)]

pub mod oracle;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use taxokg::data::{load_rules, SubsumptionRule, TripleStore};
use taxokg::models::{init_params, ConstraintGraph, EmbeddingModel, ModelConfig, ModelKind, Nonlinearity};

pub const RULES: &str = "captain_of\tdirect\tplays_for\n\
plays_for\tdirect\tmember_of\n\
coach_of\tdirect\tmember_of\n\
employs\tinverse\tmember_of\n\
member_of\tinverse\temploys\n";

pub struct SyntheticKg {
    pub train: Vec<[String; 3]>,
    pub test: Vec<[String; 3]>,
}

/// People attached to teams through a relation hierarchy; every implied
/// triple is materialised, then `test_share` of them is held out.
pub fn taxonomy_kg(seed: u64, people: usize, teams: usize, test_share: f64) -> SyntheticKg {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::new();
    let mut add = |h: &str, r: &str, t: &str| all.push([h.to_owned(), r.to_owned(), t.to_owned()]);
    for p in 0..people {
        let person = format!("person{p}");
        let team = format!("team{}", rng.random_range(0..teams));
        let role: f64 = rng.random();
        if role < 0.1 {
            add(&person, "coach_of", &team);
        } else {
            if role < 0.35 {
                add(&person, "captain_of", &team);
            }
            add(&person, "plays_for", &team);
        }
        add(&person, "member_of", &team);
        add(&team, "employs", &person);
    }
    all.shuffle(&mut rng);
    let n_test = ((all.len() as f64) * test_share).round() as usize;
    let test = all.split_off(all.len() - n_test);
    SyntheticKg { train: all, test }
}

fn write_triples(path: &Path, triples: &[[String; 3]]) {
    let text: String = triples.iter().map(|t| format!("{}\t{}\t{}\n", t[0], t[1], t[2])).collect();
    fs::write(path, text).unwrap();
}

pub struct KgFiles {
    pub train: PathBuf,
    pub test: PathBuf,
    pub rules: PathBuf,
}

pub fn write_kg(dir: &Path, kg: &SyntheticKg) -> KgFiles {
    let files = KgFiles {
        train: dir.join("train.txt"),
        test: dir.join("test.txt"),
        rules: dir.join("rules.txt"),
    };
    write_triples(&files.train, &kg.train);
    write_triples(&files.test, &kg.test);
    fs::write(&files.rules, RULES).unwrap();
    files
}

pub fn load_kg(files: &KgFiles) -> (TripleStore, Vec<SubsumptionRule>) {
    let mut store = TripleStore::load(&files.train, None, &files.test).unwrap();
    let rules = load_rules(&files.rules, &mut store.vocab).unwrap();
    (store, rules)
}

/// Relation names used by [`sport_like_rules`], in id order.
pub fn sport_like_names() -> Vec<String> {
    ["captain_of", "plays_for", "coach_of", "employs", "member_of"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

pub fn sport_like_rules() -> Vec<SubsumptionRule> {
    vec![
        SubsumptionRule::direct(0, 1),
        SubsumptionRule::direct(1, 4),
        SubsumptionRule::direct(2, 4),
        SubsumptionRule::inverse(3, 4),
        SubsumptionRule::inverse(4, 3),
    ]
}

pub fn random_model(kind: ModelKind, phi: Nonlinearity, ne: usize, graph: ConstraintGraph, dim: usize, seed: u64) -> EmbeddingModel {
    let cfg = ModelConfig::new(kind, dim).with_phi(phi);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = init_params(cfg, ne, graph, &mut rng).unwrap();
    for x in m.delta_fwd.as_mut_slice().iter_mut().chain(m.delta_bwd.as_mut_slice()) {
        *x = rng.random_range(-0.5..1.0);
    }
    m
}
