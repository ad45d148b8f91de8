use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::{Triple, TripleStore, Vocabulary};

/// Train/valid/test stores over one shared pair of vocabularies.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: TripleStore,
    pub valid: TripleStore,
    pub test: TripleStore,
    /// Triples dropped from a later split because an earlier split already held them.
    pub cross_split_duplicates: usize,
}

impl DatasetSplit {
    pub fn entities(&self) -> &Vocabulary {
        self.train.entities()
    }

    pub fn relations(&self) -> &Vocabulary {
        self.train.relations()
    }

    pub fn all_triples(&self) -> impl Iterator<Item = &Triple> {
        self.train
            .triples()
            .iter()
            .chain(self.valid.triples())
            .chain(self.test.triples())
    }

    /// Same splits with `train` swapped out (vocabularies must match).
    pub fn with_train(&self, train: TripleStore) -> DatasetSplit {
        assert!(Arc::ptr_eq(train.entities_arc(), self.train.entities_arc()));
        DatasetSplit {
            train,
            valid: self.valid.clone(),
            test: self.test.clone(),
            cross_split_duplicates: self.cross_split_duplicates,
        }
    }
}

/// Parses `head\trelation\ttail` lines, interning into the given vocabularies.
pub fn parse_tsv(
    text: &str,
    origin: &str,
    ents: &mut Vocabulary,
    rels: &mut Vocabulary,
) -> Result<Vec<Triple>> {
    parse_lines(text, origin, |name, is_rel| {
        Ok(if is_rel { rels.intern(name) } else { ents.intern(name) })
    })
}

/// Reads a TSV file whose names must all exist in the given vocabularies.
pub fn read_tsv_known(path: impl AsRef<Path>, ents: &Vocabulary, rels: &Vocabulary) -> Result<Vec<Triple>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lines(&text, &path.display().to_string(), |name, is_rel| {
        if is_rel {
            rels.id("relation", name)
        } else {
            ents.id("entity", name)
        }
    })
}

fn parse_lines(
    text: &str,
    origin: &str,
    mut lookup: impl FnMut(&str, bool) -> Result<usize>,
) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: origin.to_owned(),
                line: lineno + 1,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let h = lookup(fields[0], false)?;
        let r = lookup(fields[1], true)?;
        let t = lookup(fields[2], false)?;
        out.push(Triple::new(h, r, t));
    }
    Ok(out)
}

/// Loads any number of TSV files into stores sharing one vocabulary pair.
/// Vocabulary order is first appearance across the files in the given order.
pub fn load_tsv_files<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<TripleStore>> {
    if paths.is_empty() {
        return Err(Error::Config("no triple files given".into()));
    }
    let mut ents = Vocabulary::new();
    let mut rels = Vocabulary::new();
    let mut raw = Vec::with_capacity(paths.len());
    for p in paths {
        let p = p.as_ref();
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        raw.push(parse_tsv(&text, &p.display().to_string(), &mut ents, &mut rels)?);
    }
    let ents = Arc::new(ents);
    let rels = Arc::new(rels);
    raw.into_iter()
        .map(|ts| TripleStore::from_triples(ents.clone(), rels.clone(), ts))
        .collect()
}

pub fn load_triples_tsv(
    train: impl AsRef<Path>,
    valid: impl AsRef<Path>,
    test: impl AsRef<Path>,
) -> Result<DatasetSplit> {
    let mut stores = load_tsv_files(&[train.as_ref(), valid.as_ref(), test.as_ref()])?;
    let test = stores.pop().unwrap();
    let valid = stores.pop().unwrap();
    let train = stores.pop().unwrap();
    Ok(disjoint_split(train, valid, test))
}

fn disjoint_split(train: TripleStore, valid: TripleStore, test: TripleStore) -> DatasetSplit {
    let before = valid.len() + test.len();
    let valid = valid.filtered(|t| !train.contains(t));
    let test = test.filtered(|t| !train.contains(t) && !valid.contains(t));
    DatasetSplit {
        cross_split_duplicates: before - valid.len() - test.len(),
        train,
        valid,
        test,
    }
}

pub fn write_tsv(store: &TripleStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for t in store.triples() {
        let (h, r, tl) = store.named(t);
        writeln!(w, "{h}\t{r}\t{tl}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn toy_file_counts() {
        let mut e = Vocabulary::new();
        let mut r = Vocabulary::new();
        let ts = parse_tsv("a\tp\tb\nb\tp\tc\nc\tq\ta\n", "toy", &mut e, &mut r).unwrap();
        assert_eq!(ts.len(), 3);
        assert_eq!(e.len(), 3);
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let mut e = Vocabulary::new();
        let mut r = Vocabulary::new();
        let err = parse_tsv("a\tp\tb\na\tp\n", "f.txt", &mut e, &mut r).unwrap_err();
        assert_eq!(err.to_string(), "f.txt:2: expected 3 tab-separated fields, found 2");
    }

    #[test]
    fn duplicate_lines_collapse_and_splits_stay_disjoint() {
        let dir = tempfile::tempdir().unwrap();
        let w = |name: &str, body: &str| {
            let p = dir.path().join(name);
            fs::write(&p, body).unwrap();
            p
        };
        let train = w("train.txt", "a\tp\tb\na\tp\tb\nb\tp\tc\n");
        let valid = w("valid.txt", "c\tp\td\na\tp\tb\n");
        let test = w("test.txt", "d\tq\ta\n");
        let split = load_triples_tsv(&train, &valid, &test).unwrap();
        assert_eq!(split.train.len(), 2);
        assert_eq!(split.valid.len(), 1);
        assert_eq!(split.test.len(), 1);
        assert_eq!(split.cross_split_duplicates, 1);
        assert_eq!(split.entities().names(), ["a", "b", "c", "d"]);
        assert_eq!(split.relations().names(), ["p", "q"]);
        assert!(load_tsv_files::<&Path>(&[]).is_err());
    }

    proptest! {
        #[test]
        fn tsv_round_trip(triples in proptest::collection::vec((0u8..12, 0u8..4, 0u8..12), 1..60)) {
            let names: Vec<(String, String, String)> = triples
                .iter()
                .map(|(h, r, t)| (format!("e{h}"), format!("rel/{r}"), format!("e{t}")))
                .collect();
            let store = TripleStore::from_named(names.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())));
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.tsv");
            write_tsv(&store, &p).unwrap();
            let back = load_tsv_files(&[&p]).unwrap().pop().unwrap();
            prop_assert_eq!(back.entities(), store.entities());
            prop_assert_eq!(back.relations(), store.relations());
            prop_assert_eq!(back.triples(), store.triples());
        }
    }
}
