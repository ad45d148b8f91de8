//! Parent→child graph from the BibleData person and relationship tables.
//!
//! A relationship row `(p1, label, p2)` reads "p1 is the `label` of p2".
//! `father`/`mother` rows give the edge p1→p2, `son`/`daughter` rows give
//! p2→p1. Every other label (spousal, tribal, sibling, ...) is ignored.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SparseBoolMatrix;

use super::Vocabulary;

/// Column names and labels; defaults follow the upstream CSV headers.
#[derive(Debug, Clone)]
pub struct GenealogySchema {
    pub person_id: String,
    pub person_name: String,
    pub rel_from: String,
    pub rel_type: String,
    pub rel_to: String,
    pub parent_labels: Vec<String>,
    pub child_labels: Vec<String>,
}

impl Default for GenealogySchema {
    fn default() -> Self {
        GenealogySchema {
            person_id: "person_id".into(),
            person_name: "person_name".into(),
            rel_from: "person_id_1".into(),
            rel_type: "relationship_type".into(),
            rel_to: "person_id_2".into(),
            parent_labels: vec!["father".into(), "mother".into()],
            child_labels: vec!["son".into(), "daughter".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenealogyStats {
    pub persons_in_file: usize,
    pub relationship_rows: usize,
    pub parent_child_rows: usize,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone)]
pub struct Genealogy {
    /// `parent[i, j]` iff person i is a parent of person j.
    pub parent: SparseBoolMatrix,
    /// Person ids of every node incident to an edge, in person-file order.
    pub persons: Vocabulary,
    /// Display name per node (same ordinals as `persons`).
    pub names: Vec<String>,
    pub stats: GenealogyStats,
}

impl Genealogy {
    /// Resolves a person by id, or by display name when that name is unique.
    pub fn resolve(&self, who: &str) -> Result<usize> {
        if let Some(i) = self.persons.get(who) {
            return Ok(i);
        }
        let matches: Vec<usize> = self
            .names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.as_str() == who)
            .map(|(i, _)| i)
            .collect();
        match matches.as_slice() {
            [one] => Ok(*one),
            [] => {
                let mut by_name = Vocabulary::new();
                for n in &self.names {
                    by_name.intern(n);
                }
                let mut suggestions = self.persons.suggest(who, 3);
                suggestions.extend(by_name.suggest(who, 3));
                suggestions.dedup();
                Err(Error::Unknown {
                    kind: "person",
                    name: who.to_owned(),
                    suggestions,
                })
            }
            many => Err(Error::Unknown {
                kind: "unambiguous person",
                name: who.to_owned(),
                suggestions: many.iter().map(|&i| self.persons.name(i).to_owned()).collect(),
            }),
        }
    }
}

pub fn load_genealogy(
    person_csv: impl AsRef<Path>,
    relationship_csv: impl AsRef<Path>,
    schema: &GenealogySchema,
) -> Result<Genealogy> {
    let pp = person_csv.as_ref();
    let rp = relationship_csv.as_ref();
    let persons = std::fs::File::open(pp).map_err(|e| Error::io(pp, e))?;
    let rels = std::fs::File::open(rp).map_err(|e| Error::io(rp, e))?;
    parse_genealogy(
        persons,
        &pp.display().to_string(),
        rels,
        &rp.display().to_string(),
        schema,
    )
}

fn column(headers: &csv::StringRecord, name: &str, path: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Schema {
        path: path.to_owned(),
        msg: format!("missing column `{name}`"),
    })
}

pub fn parse_genealogy<P: Read, R: Read>(
    persons: P,
    persons_origin: &str,
    relationships: R,
    rel_origin: &str,
    schema: &GenealogySchema,
) -> Result<Genealogy> {
    let csv_err = |path: &str| {
        let path = path.to_owned();
        move |source| Error::Csv {
            path: path.clone(),
            source,
        }
    };

    let mut pr = csv::ReaderBuilder::new().flexible(true).from_reader(persons);
    let headers = pr.headers().map_err(csv_err(persons_origin))?.clone();
    let id_col = column(&headers, &schema.person_id, persons_origin)?;
    let name_col = column(&headers, &schema.person_name, persons_origin)?;
    let mut person_order: Vec<(String, String)> = Vec::new();
    let mut known: HashSet<String> = HashSet::new();
    for rec in pr.records() {
        let rec = rec.map_err(csv_err(persons_origin))?;
        let id = rec.get(id_col).unwrap_or("").trim().to_owned();
        if id.is_empty() || !known.insert(id.clone()) {
            continue;
        }
        let name = rec.get(name_col).unwrap_or("").trim().to_owned();
        person_order.push((id, name));
    }

    let mut rr = csv::ReaderBuilder::new().flexible(true).from_reader(relationships);
    let headers = rr.headers().map_err(csv_err(rel_origin))?.clone();
    let from_col = column(&headers, &schema.rel_from, rel_origin)?;
    let type_col = column(&headers, &schema.rel_type, rel_origin)?;
    let to_col = column(&headers, &schema.rel_to, rel_origin)?;

    let mut stats = GenealogyStats {
        persons_in_file: person_order.len(),
        ..Default::default()
    };
    let mut edges: BTreeSet<(String, String)> = BTreeSet::new();
    let mut unknown: BTreeSet<String> = BTreeSet::new();
    for rec in rr.records() {
        let rec = rec.map_err(csv_err(rel_origin))?;
        stats.relationship_rows += 1;
        let label = rec.get(type_col).unwrap_or("").trim();
        let p1 = rec.get(from_col).unwrap_or("").trim();
        let p2 = rec.get(to_col).unwrap_or("").trim();
        let (parent, child) = if schema.parent_labels.iter().any(|l| l == label) {
            (p1, p2)
        } else if schema.child_labels.iter().any(|l| l == label) {
            (p2, p1)
        } else {
            continue;
        };
        stats.parent_child_rows += 1;
        for p in [parent, child] {
            if !known.contains(p) {
                unknown.insert(p.to_owned());
            }
        }
        if parent == child {
            return Err(Error::SelfLoop(parent.to_owned()));
        }
        edges.insert((parent.to_owned(), child.to_owned()));
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownPersons(unknown.into_iter().collect()));
    }

    let incident: HashSet<&str> = edges
        .iter()
        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
        .collect();
    let mut vocab = Vocabulary::new();
    let mut names = Vec::new();
    for (id, name) in &person_order {
        if incident.contains(id.as_str()) {
            vocab.intern(id);
            names.push(name.clone());
        }
    }
    let index: HashMap<&str, usize> = vocab
        .names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let n = vocab.len();
    let parent = SparseBoolMatrix::from_pairs(
        n,
        n,
        edges.iter().map(|(a, b)| (index[a.as_str()], index[b.as_str()])),
    )?;
    stats.nodes = n;
    stats.edges = parent.nnz();
    Ok(Genealogy {
        parent,
        persons: vocab,
        names,
        stats,
    })
}
