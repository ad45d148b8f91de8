//! Vocabularies, triple storage and dataset loaders.

mod countries;
mod genealogy;
mod tsv;

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SparseBoolMatrix;

pub use countries::{load_countries, load_countries_str, CapitalPolicy, IS_CAPITAL_OF, IS_LOCATED_IN};
pub use genealogy::{load_genealogy, parse_genealogy, Genealogy, GenealogySchema, GenealogyStats};
pub use tsv::{load_triples_tsv, load_tsv_files, parse_tsv, read_tsv_known, write_tsv, DatasetSplit};

/// Interned names with a stable ordinal per name, in first-insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(names: Vec<String>) -> Self {
        let mut v = Vocabulary::default();
        for n in names {
            v.intern(&n);
        }
        v
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.names
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i as usize;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), i as u32);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).map(|&i| i as usize)
    }

    /// Like [`get`](Self::get) but fails with near-miss suggestions.
    pub fn id(&self, kind: &'static str, name: &str) -> Result<usize> {
        self.get(name).ok_or_else(|| Error::Unknown {
            kind,
            name: name.to_owned(),
            suggestions: self.suggest(name, 3),
        })
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Closest names by edit distance.
    pub fn suggest(&self, name: &str, k: usize) -> Vec<String> {
        let lower = name.to_lowercase();
        let mut scored: Vec<(usize, usize)> = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (strsim::levenshtein(&lower, &n.to_lowercase()), i))
            .collect();
        scored.sort_unstable();
        scored
            .into_iter()
            .take(k)
            .map(|(_, i)| self.names[i].clone())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: u32,
    pub rel: u32,
    pub tail: u32,
}

impl Triple {
    pub fn new(head: usize, rel: usize, tail: usize) -> Self {
        Triple {
            head: head as u32,
            rel: rel as u32,
            tail: tail as u32,
        }
    }

    pub fn h(&self) -> usize {
        self.head as usize
    }

    pub fn r(&self) -> usize {
        self.rel as usize
    }

    pub fn t(&self) -> usize {
        self.tail as usize
    }
}

/// Facts over shared entity and relation vocabularies. Insertion order is kept;
/// duplicates are dropped.
#[derive(Debug, Clone)]
pub struct TripleStore {
    entities: Arc<Vocabulary>,
    relations: Arc<Vocabulary>,
    triples: Vec<Triple>,
    set: HashSet<Triple>,
}

impl TripleStore {
    pub fn new(entities: Arc<Vocabulary>, relations: Arc<Vocabulary>) -> Self {
        TripleStore {
            entities,
            relations,
            triples: Vec::new(),
            set: HashSet::new(),
        }
    }

    pub fn from_triples<I>(entities: Arc<Vocabulary>, relations: Arc<Vocabulary>, triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = Triple>,
    {
        let mut s = Self::new(entities, relations);
        for t in triples {
            s.insert(t)?;
        }
        Ok(s)
    }

    /// Builds vocabularies from string triples in first-appearance order.
    pub fn from_named<'a, I>(triples: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut ents = Vocabulary::new();
        let mut rels = Vocabulary::new();
        let ids: Vec<Triple> = triples
            .into_iter()
            .map(|(h, r, t)| {
                let h = ents.intern(h);
                let r = rels.intern(r);
                let t = ents.intern(t);
                Triple::new(h, r, t)
            })
            .collect();
        let mut s = Self::new(Arc::new(ents), Arc::new(rels));
        for t in ids {
            s.insert(t).expect("ids come from the vocabularies");
        }
        s
    }

    /// Up to `n_facts` distinct uniform random triples over entities `e0…`
    /// and relations `r0…` (all names interned, even if unused).
    pub fn random<R: rand::Rng + ?Sized>(n_entities: usize, n_relations: usize, n_facts: usize, rng: &mut R) -> Self {
        let vocab = |prefix: &str, n: usize| Arc::new(Vocabulary::from((0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>()));
        let mut s = Self::new(vocab("e", n_entities), vocab("r", n_relations));
        let cap = n_entities * n_entities * n_relations;
        while s.len() < n_facts.min(cap) {
            let t = Triple::new(
                rng.random_range(0..n_entities),
                rng.random_range(0..n_relations),
                rng.random_range(0..n_entities),
            );
            s.insert(t).expect("in range");
        }
        s
    }

    /// Returns false when the triple was already present.
    pub fn insert(&mut self, t: Triple) -> Result<bool> {
        for (what, id, size) in [
            ("head entity", t.h(), self.entities.len()),
            ("relation", t.r(), self.relations.len()),
            ("tail entity", t.t(), self.entities.len()),
        ] {
            if id >= size {
                return Err(Error::IndexOutOfRange {
                    what,
                    index: id,
                    size,
                });
            }
        }
        if self.set.insert(t) {
            self.triples.push(t);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.set.contains(t)
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entities(&self) -> &Vocabulary {
        &self.entities
    }

    pub fn relations(&self) -> &Vocabulary {
        &self.relations
    }

    pub fn entities_arc(&self) -> &Arc<Vocabulary> {
        &self.entities
    }

    pub fn relations_arc(&self) -> &Arc<Vocabulary> {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    /// A store over the same vocabularies holding the triples that pass `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(&Triple) -> bool) -> TripleStore {
        let triples: Vec<Triple> = self.triples.iter().copied().filter(|t| keep(t)).collect();
        TripleStore {
            entities: self.entities.clone(),
            relations: self.relations.clone(),
            set: triples.iter().copied().collect(),
            triples,
        }
    }

    pub fn named(&self, t: &Triple) -> (&str, &str, &str) {
        (
            self.entities.name(t.h()),
            self.relations.name(t.r()),
            self.entities.name(t.t()),
        )
    }

    /// `A_r[h, t] = 1` iff `(h, r, t)` is stored.
    pub fn adjacency(&self, rel: usize) -> Result<SparseBoolMatrix> {
        if rel >= self.relations.len() {
            return Err(Error::IndexOutOfRange {
                what: "relation",
                index: rel,
                size: self.relations.len(),
            });
        }
        let n = self.entities.len();
        SparseBoolMatrix::from_pairs(
            n,
            n,
            self.triples
                .iter()
                .filter(|t| t.r() == rel)
                .map(|t| (t.h(), t.t())),
        )
    }

    /// One adjacency per relation, built in a single pass.
    pub fn adjacencies(&self) -> Vec<SparseBoolMatrix> {
        let n = self.entities.len();
        let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.relations.len()];
        for t in &self.triples {
            pairs[t.r()].push((t.h(), t.t()));
        }
        pairs
            .into_iter()
            .map(|p| SparseBoolMatrix::from_pairs(n, n, p).expect("ids validated on insert"))
            .collect()
    }
}
