//! Binary-predicate Datalog evaluated as Boolean matrix contractions.

mod fixpoint;
mod parser;
mod plan;
mod verify;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kg::{Genealogy, Vocabulary};
use crate::tensor::SparseBoolMatrix;

pub use fixpoint::{
    fixpoint, semi_naive_fixpoint, ClosureProgram, ClosureTrace, Edb, Engine, ANCESTOR_PROGRAM,
    DEFAULT_MAX_ITERS,
};
pub use parser::{parse_program, parse_rule, Atom, Rule};
pub use plan::{compile, ContractionPlan, PlanStep};
pub use verify::{lineage_ids, verify, CheckResult, LineageIds, VerificationReport, VIOLATION_CAP};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub person: String,
    pub ancestors: Vec<String>,
    pub descendants: Vec<String>,
}

/// Lineage of `person` (looked up in `vocab`), reported by vocabulary name.
pub fn lineage(ancestor: &SparseBoolMatrix, vocab: &Vocabulary, person: &str) -> Result<Lineage> {
    let id = vocab.id("person", person)?;
    let ids = lineage_ids(ancestor, id)?;
    let names = |v: Vec<usize>| v.into_iter().map(|i| vocab.name(i).to_owned()).collect();
    Ok(Lineage {
        person: person.to_owned(),
        ancestors: names(ids.ancestors),
        descendants: names(ids.descendants),
    })
}

/// Lineage in a genealogy, accepting a person id or a unique display name;
/// results are display names.
pub fn genealogy_lineage(ancestor: &SparseBoolMatrix, g: &Genealogy, who: &str) -> Result<Lineage> {
    let id = g.resolve(who)?;
    let ids = lineage_ids(ancestor, id)?;
    let names = |v: Vec<usize>| v.into_iter().map(|i| g.names[i].clone()).collect();
    Ok(Lineage {
        person: g.persons.name(id).to_owned(),
        ancestors: names(ids.ancestors),
        descendants: names(ids.descendants),
    })
}
