use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Triple, TripleStore, Vocabulary};
use crate::rng::{stream, RngSeed};

/// Candidates are deduplicated on the shortcut edge they would remove.
pub const DEDUP_RULE: &str = "a,r_direct,c";

/// `a -r1-> b -r2-> c`, where `(a, r_direct, c)` is the unique direct
/// edge from `a` to `c` in the original training set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompPath {
    pub a: u32,
    pub r1: u32,
    pub b: u32,
    pub r2: u32,
    pub c: u32,
    pub r_direct: u32,
}

impl CompPath {
    pub fn direct_edge(&self) -> Triple {
        Triple::new(self.a as usize, self.r_direct as usize, self.c as usize)
    }

    pub fn hops(&self) -> [Triple; 2] {
        [
            Triple::new(self.a as usize, self.r1 as usize, self.b as usize),
            Triple::new(self.b as usize, self.r2 as usize, self.c as usize),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchMeta {
    pub seed: u64,
    pub n_valid: usize,
    pub n_test: usize,
    /// Qualifying candidates before sampling.
    pub candidates: usize,
    pub dedup: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompBench {
    pub meta: BenchMeta,
    pub valid: Vec<CompPath>,
    pub test: Vec<CompPath>,
}

impl CompBench {
    /// Direct edges of every sampled path, in sampling order.
    pub fn removed_edges(&self) -> Vec<Triple> {
        self.valid.iter().chain(&self.test).map(CompPath::direct_edge).collect()
    }
}

/// One candidate per training edge `(a, r_direct, c)` that is the only
/// relation from `a` to `c` and is bypassed by some two-hop path through a
/// third entity; the witness is the smallest `(r1, b, r2)`.
fn candidates(train: &TripleStore) -> Vec<CompPath> {
    let mut between: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    let mut out: HashMap<u32, Vec<(u32, u32)>> = HashMap::new();
    for t in train.triples() {
        between.entry((t.head, t.tail)).or_default().push(t.rel);
        out.entry(t.head).or_default().push((t.rel, t.tail));
    }
    for v in between.values_mut() {
        v.sort_unstable();
    }
    for v in out.values_mut() {
        v.sort_unstable();
    }
    let mut direct: Vec<Triple> = train.triples().to_vec();
    direct.sort_unstable();
    direct
        .iter()
        .filter(|d| between[&(d.head, d.tail)].len() == 1)
        .filter_map(|d| {
            out[&d.head].iter().find_map(|&(r1, b)| {
                if b == d.head || b == d.tail {
                    return None;
                }
                let r2 = *between.get(&(b, d.tail))?.first()?;
                Some(CompPath {
                    a: d.head,
                    r1,
                    b,
                    r2,
                    c: d.tail,
                    r_direct: d.rel,
                })
            })
        })
        .collect()
}

/// Samples `n_valid` then `n_test` paths and removes their direct edges from
/// `train`. A candidate is skipped if one of its hops is an already removed
/// edge, or if its own direct edge is a hop of an accepted path, so every
/// accepted path stays intact in the reduced store.
pub fn build_comp_bench(
    train: &TripleStore,
    n_valid: usize,
    n_test: usize,
    seed: RngSeed,
) -> Result<(CompBench, TripleStore)> {
    let needed = n_valid + n_test;
    let mut pool = candidates(train);
    let found = pool.len();
    if found < needed {
        return Err(Error::InsufficientPaths { needed, found });
    }
    pool.shuffle(&mut seed.stream(stream::BENCH_SAMPLE));
    let mut removed: HashSet<Triple> = HashSet::new();
    let mut protected: HashSet<Triple> = HashSet::new();
    let mut accepted = Vec::with_capacity(needed);
    for p in pool {
        if accepted.len() == needed {
            break;
        }
        let hops = p.hops();
        if hops.iter().any(|h| removed.contains(h)) || protected.contains(&p.direct_edge()) {
            continue;
        }
        removed.insert(p.direct_edge());
        protected.extend(hops);
        accepted.push(p);
    }
    if accepted.len() < needed {
        return Err(Error::InsufficientPaths {
            needed,
            found: accepted.len(),
        });
    }
    let test = accepted.split_off(n_valid);
    let reduced = train.filtered(|t| !removed.contains(t));
    let bench = CompBench {
        meta: BenchMeta {
            seed: seed.0,
            n_valid,
            n_test,
            candidates: found,
            dedup: DEDUP_RULE.to_owned(),
        },
        valid: accepted,
        test,
    };
    Ok((bench, reduced))
}

#[derive(Serialize, Deserialize)]
struct PathRecord {
    a: String,
    r1: String,
    b: String,
    r2: String,
    c: String,
    r_direct: String,
    split: String,
}

#[derive(Serialize, Deserialize)]
struct MetaLine {
    meta: BenchMeta,
}

/// JSON lines: a `{"meta": …}` header, then one named path record per line.
pub fn write_bench(bench: &CompBench, entities: &Vocabulary, relations: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(fs::File::create(path).map_err(io)?);
    let line = serde_json::to_string(&MetaLine { meta: bench.meta.clone() }).expect("serializable");
    writeln!(w, "{line}").map_err(io)?;
    for (split, paths) in [("valid", &bench.valid), ("test", &bench.test)] {
        for p in paths {
            let e = |i: u32| entities.name(i as usize).to_owned();
            let r = |i: u32| relations.name(i as usize).to_owned();
            let rec = PathRecord {
                a: e(p.a),
                r1: r(p.r1),
                b: e(p.b),
                r2: r(p.r2),
                c: e(p.c),
                r_direct: r(p.r_direct),
                split: split.to_owned(),
            };
            writeln!(w, "{}", serde_json::to_string(&rec).expect("serializable")).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_bench(path: impl AsRef<Path>, entities: &Vocabulary, relations: &Vocabulary) -> Result<CompBench> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty benchmark file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let meta = serde_json::from_str::<MetaLine>(&header)
        .map_err(|e| parse_err(1, e.to_string()))?
        .meta;
    let mut bench = CompBench {
        meta,
        valid: Vec::new(),
        test: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PathRecord = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        let e = |n: &str| entities.id("entity", n).map(|v| v as u32);
        let r = |n: &str| relations.id("relation", n).map(|v| v as u32);
        let p = CompPath {
            a: e(&rec.a)?,
            r1: r(&rec.r1)?,
            b: e(&rec.b)?,
            r2: r(&rec.r2)?,
            c: e(&rec.c)?,
            r_direct: r(&rec.r_direct)?,
        };
        match rec.split.as_str() {
            "valid" => bench.valid.push(p),
            "test" => bench.test.push(p),
            other => return Err(parse_err(lineno, format!("unknown split `{other}`"))),
        }
    }
    Ok(bench)
}
