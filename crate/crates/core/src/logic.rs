//! Rule-only inference: closure of a triple set under subsumption rules, the
//! logical hit@1 baseline, and removal of triples the rules already imply.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::data::{SubsumptionRule, Triple};

#[derive(Debug, Error, PartialEq)]
pub enum LogicError {
    #[error("test set is empty")]
    EmptyTest,
}

#[derive(Debug, Clone, Default)]
pub struct ClosureResult {
    /// Input triples first (input order), then derived ones in discovery order.
    pub derived: Vec<Triple>,
    members: HashSet<Triple>,
    /// One (source triple, rule) witness per newly derived triple.
    pub provenance: HashMap<Triple, (Triple, SubsumptionRule)>,
}

impl ClosureResult {
    pub fn contains(&self, t: &Triple) -> bool {
        self.members.contains(t)
    }

    pub fn len(&self) -> usize {
        self.derived.len()
    }

    pub fn is_empty(&self) -> bool {
        self.derived.is_empty()
    }

    pub fn members(&self) -> &HashSet<Triple> {
        &self.members
    }

    /// Triples not present in the input.
    pub fn new_triples(&self) -> impl Iterator<Item = &Triple> {
        self.derived.iter().filter(|t| self.provenance.contains_key(t))
    }
}

fn by_premise(rules: &[SubsumptionRule]) -> HashMap<usize, Vec<SubsumptionRule>> {
    let mut map: HashMap<usize, Vec<SubsumptionRule>> = HashMap::new();
    for r in rules {
        map.entry(r.premise).or_default().push(*r);
    }
    map
}

/// Least fixpoint of `triples` under the rules (worklist forward chaining).
pub fn forward_closure(triples: &[Triple], rules: &[SubsumptionRule]) -> ClosureResult {
    let index = by_premise(rules);
    let mut out = ClosureResult::default();
    let mut queue = VecDeque::new();
    for &t in triples {
        if out.members.insert(t) {
            out.derived.push(t);
            queue.push_back(t);
        }
    }
    while let Some(t) = queue.pop_front() {
        let Some(applicable) = index.get(&t.relation) else {
            continue;
        };
        for rule in applicable {
            let Some(next) = rule.apply(&t) else { continue };
            if out.members.insert(next) {
                out.derived.push(next);
                out.provenance.insert(next, (t, *rule));
                queue.push_back(next);
            }
        }
    }
    out
}

/// Fraction of test triples inside the closure; each counts as rank 1 on
/// both sides when present and as a miss otherwise.
pub fn logical_hit1(test: &[Triple], closure: &ClosureResult) -> Result<f64, LogicError> {
    if test.is_empty() {
        return Err(LogicError::EmptyTest);
    }
    let hits = test.iter().filter(|t| closure.contains(t)).count();
    Ok(hits as f64 / test.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StripResult {
    pub kept: Vec<Triple>,
    pub removed: Vec<Triple>,
}

/// Every triple from which `target` follows, `target` excluded.
fn antecedents(target: &Triple, by_conclusion: &HashMap<usize, Vec<SubsumptionRule>>) -> HashSet<Triple> {
    let mut seen = HashSet::new();
    let mut queue = VecDeque::from([*target]);
    while let Some(t) = queue.pop_front() {
        let Some(rules) = by_conclusion.get(&t.relation) else {
            continue;
        };
        for rule in rules {
            let Some(prev) = rule.antecedent(&t) else { continue };
            if prev != *target && seen.insert(prev) {
                queue.push_back(prev);
            }
        }
    }
    seen
}

/// Greedy redundancy removal in input order: a triple is dropped when it
/// follows from the triples still retained, itself excluded. The closure of
/// the result always covers the input.
pub fn strip_redundant(train: &[Triple], rules: &[SubsumptionRule]) -> StripResult {
    let mut by_conclusion: HashMap<usize, Vec<SubsumptionRule>> = HashMap::new();
    for r in rules {
        by_conclusion.entry(r.conclusion).or_default().push(*r);
    }
    let mut retained: HashMap<Triple, usize> = HashMap::new();
    for t in train {
        *retained.entry(*t).or_default() += 1;
    }
    let mut result = StripResult::default();
    for t in train {
        let count = retained[t];
        let duplicate = count > 1;
        let derivable = duplicate || antecedents(t, &by_conclusion).iter().any(|a| retained.contains_key(a));
        if derivable {
            if count == 1 {
                retained.remove(t);
            } else {
                retained.insert(*t, count - 1);
            }
            result.removed.push(*t);
        } else {
            result.kept.push(*t);
        }
    }
    result
}
