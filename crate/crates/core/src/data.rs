//! Triple and rule files, vocabularies and the membership index used for
//! filtered ranking.
//!
//! Triple files are `head<TAB>relation<TAB>tail` per line with no header.
//! Rule files are `premise<TAB>direct|inverse<TAB>conclusion` per line and
//! must be parsed after every triple split, since rules may only name
//! relations that already have an id.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::index;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown relation `{name}`")]
    UnknownRelation { line: usize, name: String },
    #[error("line {line}: unknown {what} `{name}`")]
    UnknownSymbol {
        line: usize,
        what: &'static str,
        name: String,
    },
    #[error("line {line}: duplicate rule")]
    DuplicateRule { line: usize },
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: Box<DataError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DataError {
    fn in_file(self, path: &Path) -> Self {
        DataError::File {
            path: path.display().to_string(),
            source: Box::new(self),
        }
    }
}

/// Bidirectional name/id maps for entities and relations.
///
/// Ids are dense and assigned in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, usize>,
    relation_ids: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary from explicit name lists, rejecting duplicates.
    pub fn from_names(entities: Vec<String>, relations: Vec<String>) -> Result<Self, String> {
        let mut vocab = Self::new();
        for name in entities {
            if vocab.entity_ids.contains_key(&name) {
                return Err(format!("duplicate entity name `{name}`"));
            }
            vocab.intern_entity(&name);
        }
        for name in relations {
            if vocab.relation_ids.contains_key(&name) {
                return Err(format!("duplicate relation name `{name}`"));
            }
            vocab.intern_relation(&name);
        }
        Ok(vocab)
    }

    pub fn intern_entity(&mut self, name: &str) -> usize {
        intern(&mut self.entity_names, &mut self.entity_ids, name)
    }

    pub fn intern_relation(&mut self, name: &str) -> usize {
        intern(&mut self.relation_names, &mut self.relation_ids, name)
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: usize) -> &str {
        &self.entity_names[id]
    }

    pub fn relation_name(&self, id: usize) -> &str {
        &self.relation_names[id]
    }

    pub fn entity_names(&self) -> &[String] {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &[String] {
        &self.relation_names
    }

    pub fn num_entities(&self) -> usize {
        self.entity_names.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relation_names.len()
    }
}

fn intern(names: &mut Vec<String>, ids: &mut HashMap<String, usize>, name: &str) -> usize {
    if let Some(&id) = ids.get(name) {
        return id;
    }
    let id = names.len();
    names.push(name.to_owned());
    ids.insert(name.to_owned(), id);
    id
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub const fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Direction {
    /// `(x, premise, y) -> (x, conclusion, y)`
    Direct,
    /// `(x, premise, y) -> (y, conclusion, x)`
    Inverse,
}

impl Direction {
    pub fn token(self) -> &'static str {
        match self {
            Direction::Direct => "direct",
            Direction::Inverse => "inverse",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SubsumptionRule {
    pub premise: usize,
    pub conclusion: usize,
    pub direction: Direction,
}

impl SubsumptionRule {
    pub fn direct(premise: usize, conclusion: usize) -> Self {
        Self {
            premise,
            conclusion,
            direction: Direction::Direct,
        }
    }

    pub fn inverse(premise: usize, conclusion: usize) -> Self {
        Self {
            premise,
            conclusion,
            direction: Direction::Inverse,
        }
    }

    /// The conclusion triple this rule derives from `triple`, if the rule
    /// applies to it.
    pub fn apply(&self, triple: &Triple) -> Option<Triple> {
        if triple.relation != self.premise {
            return None;
        }
        Some(match self.direction {
            Direction::Direct => Triple::new(triple.head, self.conclusion, triple.tail),
            Direction::Inverse => Triple::new(triple.tail, self.conclusion, triple.head),
        })
    }

    /// The premise triple that would yield `triple` under this rule.
    pub fn antecedent(&self, triple: &Triple) -> Option<Triple> {
        if triple.relation != self.conclusion {
            return None;
        }
        Some(match self.direction {
            Direction::Direct => Triple::new(triple.head, self.premise, triple.tail),
            Direction::Inverse => Triple::new(triple.tail, self.premise, triple.head),
        })
    }
}

/// Id-encoded splits plus the membership index over all of them.
#[derive(Debug, Clone)]
pub struct TripleStore {
    pub vocab: Vocabulary,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    known: HashSet<Triple>,
}

impl TripleStore {
    /// Assembles a store; duplicates inside a split are dropped (first
    /// occurrence wins).
    pub fn new(vocab: Vocabulary, train: Vec<Triple>, valid: Vec<Triple>, test: Vec<Triple>) -> Self {
        let train = dedup(train);
        let valid = dedup(valid);
        let test = dedup(test);
        let known = train.iter().chain(&valid).chain(&test).copied().collect();
        Self {
            vocab,
            train,
            valid,
            test,
            known,
        }
    }

    /// Reads the three splits in order (train, valid, test) so ids follow
    /// first appearance across them. A missing `valid` yields an empty split.
    pub fn load(train: &Path, valid: Option<&Path>, test: &Path) -> Result<Self, DataError> {
        let mut vocab = Vocabulary::new();
        let train_triples = read_triple_path(train, &mut vocab)?;
        let valid_triples = match valid {
            Some(p) => read_triple_path(p, &mut vocab)?,
            None => Vec::new(),
        };
        let test_triples = read_triple_path(test, &mut vocab)?;
        Ok(Self::new(vocab, train_triples, valid_triples, test_triples))
    }

    pub fn is_known(&self, triple: &Triple) -> bool {
        self.known.contains(triple)
    }

    pub fn known(&self) -> &HashSet<Triple> {
        &self.known
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            entities: self.vocab.num_entities(),
            relations: self.vocab.num_relations(),
            train: self.train.len(),
            valid: self.valid.len(),
            test: self.test.len(),
        }
    }

    /// Same store with `train` replaced; the membership index is kept from
    /// the original splits.
    pub fn with_train(&self, train: Vec<Triple>) -> Self {
        Self {
            vocab: self.vocab.clone(),
            train,
            valid: self.valid.clone(),
            test: self.test.clone(),
            known: self.known.clone(),
        }
    }
}

fn dedup(triples: Vec<Triple>) -> Vec<Triple> {
    let mut seen = HashSet::with_capacity(triples.len());
    triples.into_iter().filter(|t| seen.insert(*t)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

fn read_triple_path(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Triple>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::from(e).in_file(path))?;
    parse_triple_file(std::io::BufReader::new(file), vocab).map_err(|e| e.in_file(path))
}

pub fn read_rule_path(path: &Path, vocab: &Vocabulary) -> Result<Vec<SubsumptionRule>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::from(e).in_file(path))?;
    parse_rule_file(std::io::BufReader::new(file), vocab).map_err(|e| e.in_file(path))
}

/// Reads rules after interning every relation they mention, so rules may
/// name relations that no triple uses.
pub fn load_rules(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<SubsumptionRule>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::from(e).in_file(path))?;
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() == 3 && !fields[0].is_empty() && !fields[2].is_empty() {
            vocab.intern_relation(fields[0]);
            vocab.intern_relation(fields[2]);
        }
    }
    parse_rule_file(text.as_bytes(), vocab).map_err(|e| e.in_file(path))
}

/// Like [`parse_triple_file`] but against a fixed vocabulary: the first name
/// it does not know is an error.
pub fn parse_triples_with<R: BufRead>(reader: R, vocab: &Vocabulary) -> Result<Vec<Triple>, DataError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let [h, r, t] = split_fields(&line, lineno)?;
        let unknown = |what, name: &str| DataError::UnknownSymbol {
            line: lineno,
            what,
            name: name.to_owned(),
        };
        let head = vocab.entity_id(h).ok_or_else(|| unknown("entity", h))?;
        let relation = vocab.relation_id(r).ok_or_else(|| unknown("relation", r))?;
        let tail = vocab.entity_id(t).ok_or_else(|| unknown("entity", t))?;
        out.push(Triple::new(head, relation, tail));
    }
    Ok(out)
}

pub fn read_triples_with(path: &Path, vocab: &Vocabulary) -> Result<Vec<Triple>, DataError> {
    let file = std::fs::File::open(path).map_err(|e| DataError::from(e).in_file(path))?;
    parse_triples_with(std::io::BufReader::new(file), vocab).map_err(|e| e.in_file(path))
}

fn split_fields(line: &str, lineno: usize) -> Result<[&str; 3], DataError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 3 {
        return Err(DataError::Parse {
            line: lineno,
            message: format!("expected 3 tab-separated fields, found {}", fields.len()),
        });
    }
    for field in &fields {
        if field.is_empty() {
            return Err(DataError::Parse {
                line: lineno,
                message: "empty field".into(),
            });
        }
        if field.chars().any(char::is_whitespace) {
            return Err(DataError::Parse {
                line: lineno,
                message: format!("whitespace inside name `{field}`"),
            });
        }
    }
    Ok([fields[0], fields[1], fields[2]])
}

/// Parses one triple per non-empty line, interning new names into `vocab`.
pub fn parse_triple_file<R: BufRead>(reader: R, vocab: &mut Vocabulary) -> Result<Vec<Triple>, DataError> {
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let [h, r, t] = split_fields(&line, idx + 1)?;
        let head = vocab.intern_entity(h);
        let relation = vocab.intern_relation(r);
        let tail = vocab.intern_entity(t);
        triples.push(Triple::new(head, relation, tail));
    }
    Ok(triples)
}

pub fn parse_rule_file<R: BufRead>(reader: R, vocab: &Vocabulary) -> Result<Vec<SubsumptionRule>, DataError> {
    let mut rules = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let [p, d, c] = split_fields(&line, lineno)?;
        let lookup = |name: &str| {
            vocab.relation_id(name).ok_or_else(|| DataError::UnknownRelation {
                line: lineno,
                name: name.to_owned(),
            })
        };
        let premise = lookup(p)?;
        let conclusion = lookup(c)?;
        let direction = match d {
            "direct" => Direction::Direct,
            "inverse" => Direction::Inverse,
            other => {
                return Err(DataError::Parse {
                    line: lineno,
                    message: format!("direction must be `direct` or `inverse`, found `{other}`"),
                })
            }
        };
        if direction == Direction::Direct && premise == conclusion {
            return Err(DataError::Parse {
                line: lineno,
                message: format!("rule `{p}` -> `{c}` subsumes itself"),
            });
        }
        let rule = SubsumptionRule {
            premise,
            conclusion,
            direction,
        };
        if !seen.insert(rule) {
            return Err(DataError::DuplicateRule { line: lineno });
        }
        rules.push(rule);
    }
    Ok(rules)
}

pub fn write_triples<W: Write>(mut out: W, triples: &[Triple], vocab: &Vocabulary) -> std::io::Result<()> {
    for t in triples {
        writeln!(
            out,
            "{}\t{}\t{}",
            vocab.entity_name(t.head),
            vocab.relation_name(t.relation),
            vocab.entity_name(t.tail)
        )?;
    }
    Ok(())
}

pub fn write_rules<W: Write>(mut out: W, rules: &[SubsumptionRule], vocab: &Vocabulary) -> std::io::Result<()> {
    for r in rules {
        writeln!(
            out,
            "{}\t{}\t{}",
            vocab.relation_name(r.premise),
            r.direction,
            vocab.relation_name(r.conclusion)
        )?;
    }
    Ok(())
}

/// Uniform sample of `ceil(fraction * |train|)` training triples without
/// replacement, kept in file order. Valid/test and the membership index are
/// untouched.
pub fn subsample_train<R: Rng + ?Sized>(
    store: &TripleStore,
    fraction: f64,
    rng: &mut R,
) -> Result<TripleStore, DataError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DataError::InvalidFraction(fraction));
    }
    let n = store.train.len();
    let keep = ((fraction * n as f64).ceil() as usize).min(n);
    if keep == n {
        return Ok(store.with_train(store.train.clone()));
    }
    let mut picked = index::sample(rng, n, keep).into_vec();
    picked.sort_unstable();
    Ok(store.with_train(picked.into_iter().map(|i| store.train[i]).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn parse(text: &str) -> (Vec<Triple>, Vocabulary) {
        let mut vocab = Vocabulary::new();
        let triples = parse_triple_file(text.as_bytes(), &mut vocab).unwrap();
        (triples, vocab)
    }

    #[test]
    fn single_line() {
        let (triples, vocab) = parse("paris\tcapitalOf\tfrance\n");
        assert_eq!(triples, vec![Triple::new(0, 0, 1)]);
        assert_eq!(vocab.num_entities(), 2);
        assert_eq!(vocab.num_relations(), 1);
        assert_eq!(vocab.entity_name(1), "france");
    }

    #[test]
    fn blank_lines_and_crlf() {
        let (triples, _) = parse("a\tr\tb\r\n\r\n\nb\tr\tc\n");
        assert_eq!(triples.len(), 2);
    }

    #[test]
    fn wrong_field_count_cites_line() {
        let mut vocab = Vocabulary::new();
        let err = parse_triple_file("a\tr\tb\na\tr\n".as_bytes(), &mut vocab).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }), "{err}");
        let err = parse_triple_file("a\tr\tb\tc\n".as_bytes(), &mut vocab).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
    }

    #[test]
    fn empty_field_rejected() {
        let mut vocab = Vocabulary::new();
        let err = parse_triple_file("a\t\tb\n".as_bytes(), &mut vocab).unwrap_err();
        assert!(err.to_string().contains("empty field"));
    }

    #[test]
    fn whitespace_in_name_rejected() {
        let mut vocab = Vocabulary::new();
        assert!(parse_triple_file("new york\tin\tusa\n".as_bytes(), &mut vocab).is_err());
    }

    fn sport_vocab() -> Vocabulary {
        let mut v = Vocabulary::new();
        for r in [
            "AthleteLedSportsTeam",
            "AthletePlaysForTeam",
            "CoachesTeam",
            "OrganizationHiredPerson",
            "PersonBelongsToOrganization",
        ] {
            v.intern_relation(r);
        }
        v
    }

    const SPORT_RULES: &str = "AthleteLedSportsTeam\tdirect\tAthletePlaysForTeam\n\
        AthletePlaysForTeam\tdirect\tPersonBelongsToOrganization\n\
        CoachesTeam\tdirect\tPersonBelongsToOrganization\n\
        OrganizationHiredPerson\tinverse\tPersonBelongsToOrganization\n\
        PersonBelongsToOrganization\tinverse\tOrganizationHiredPerson\n";

    #[test]
    fn sport_rules() {
        let rules = parse_rule_file(SPORT_RULES.as_bytes(), &sport_vocab()).unwrap();
        assert_eq!(rules.len(), 5);
        assert_eq!(rules.iter().filter(|r| r.direction == Direction::Inverse).count(), 2);
    }

    #[test]
    fn location_rules() {
        let mut v = Vocabulary::new();
        for r in [
            "CapitalCityOfCountry",
            "CityLocatedInCountry",
            "CityLocatedInState",
            "StateHasCapital",
            "StateLocatedInCountry",
        ] {
            v.intern_relation(r);
        }
        let text = "CapitalCityOfCountry\tdirect\tCityLocatedInCountry\nStateHasCapital\tinverse\tCityLocatedInState\n";
        let rules = parse_rule_file(text.as_bytes(), &v).unwrap();
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[1], SubsumptionRule::inverse(3, 2));
    }

    #[test]
    fn empty_rule_file() {
        assert!(parse_rule_file("".as_bytes(), &sport_vocab()).unwrap().is_empty());
    }

    #[test]
    fn rule_errors() {
        let v = sport_vocab();
        let err = parse_rule_file("Nope\tdirect\tCoachesTeam\n".as_bytes(), &v).unwrap_err();
        assert!(err.to_string().contains("Nope"));
        let err = parse_rule_file("CoachesTeam\tsideways\tAthletePlaysForTeam\n".as_bytes(), &v).unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
        let dup = "CoachesTeam\tdirect\tAthletePlaysForTeam\nCoachesTeam\tdirect\tAthletePlaysForTeam\n";
        assert!(matches!(
            parse_rule_file(dup.as_bytes(), &v).unwrap_err(),
            DataError::DuplicateRule { line: 2 }
        ));
        assert!(parse_rule_file("CoachesTeam\tdirect\tCoachesTeam\n".as_bytes(), &v).is_err());
        // a self-inverse rule (symmetry) is allowed
        assert!(parse_rule_file("CoachesTeam\tinverse\tCoachesTeam\n".as_bytes(), &v).is_ok());
    }

    fn store_of(n: usize) -> TripleStore {
        let mut vocab = Vocabulary::new();
        vocab.intern_relation("r");
        let train = (0..n)
            .map(|i| {
                let h = vocab.intern_entity(&format!("e{i}"));
                let t = vocab.intern_entity(&format!("f{i}"));
                Triple::new(h, 0, t)
            })
            .collect();
        TripleStore::new(vocab, train, vec![], vec![])
    }

    #[test]
    fn subsample_counts_and_determinism() {
        let store = store_of(1312);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let full = subsample_train(&store, 1.0, &mut rng).unwrap();
        assert_eq!(full.train, store.train);
        let half = subsample_train(&store, 0.5, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(half.train.len(), 656);
        let again = subsample_train(&store, 0.5, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(half.train, again.train);
        assert_eq!(half.known(), store.known());
        assert_eq!(subsample_train(&store, 0.001, &mut rng).unwrap().train.len(), 2);
    }

    #[test]
    fn subsample_rejects_bad_fraction() {
        let store = store_of(4);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for f in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                subsample_train(&store, f, &mut rng),
                Err(DataError::InvalidFraction(_))
            ));
        }
    }

    #[test]
    fn store_dedups_within_split() {
        let mut vocab = Vocabulary::new();
        let (t, _) = {
            let t = parse_triple_file("a\tr\tb\na\tr\tb\n".as_bytes(), &mut vocab).unwrap();
            (t, ())
        };
        let store = TripleStore::new(vocab, t.clone(), vec![], t);
        assert_eq!(store.train.len(), 1);
        assert_eq!(store.test.len(), 1);
        assert!(store.is_known(&Triple::new(0, 0, 1)));
        assert!(!store.is_known(&Triple::new(1, 0, 0)));
    }
}
