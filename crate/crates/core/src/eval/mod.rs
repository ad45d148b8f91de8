//! Filtered-ranking evaluation and the two-hop composition benchmark.

mod bench;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::Triple;

pub use bench::{build_comp_bench, read_bench, write_bench, BenchMeta, CompBench, CompPath, DEDUP_RULE};

/// Scores every entity as the missing end of `(h, r, ?)` or `(?, r, t)`.
pub trait LinkPredictor {
    fn num_entities(&self) -> usize;
    fn tail_scores(&self, h: usize, r: usize) -> Result<Vec<f64>>;
    fn head_scores(&self, t: usize, r: usize) -> Result<Vec<f64>>;
}

/// Scores every entity as the end of the path `a -r1-> ? -r2-> ?`.
pub trait PathPredictor {
    fn num_entities(&self) -> usize;
    fn compose_scores(&self, a: usize, r1: usize, r2: usize) -> Result<Vec<f64>>;
}

/// Known-true answers for every `(h, r, ?)` and `(?, r, t)` query.
#[derive(Debug, Clone, Default)]
pub struct FilterIndex {
    tails: HashMap<(u32, u32), Vec<u32>>,
    heads: HashMap<(u32, u32), Vec<u32>>,
}

impl FilterIndex {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut idx = FilterIndex::default();
        for t in triples {
            idx.tails.entry((t.head, t.rel)).or_default().push(t.tail);
            idx.heads.entry((t.rel, t.tail)).or_default().push(t.head);
        }
        for v in idx.tails.values_mut().chain(idx.heads.values_mut()) {
            v.sort_unstable();
            v.dedup();
        }
        idx
    }

    /// Sorted tails known for `(h, r, ?)`; empty when none.
    pub fn tails(&self, h: usize, r: usize) -> &[u32] {
        self.tails
            .get(&(h as u32, r as u32))
            .map_or(&[], Vec::as_slice)
    }

    /// Sorted heads known for `(?, r, t)`; empty when none.
    pub fn heads(&self, r: usize, t: usize) -> &[u32] {
        self.heads
            .get(&(r as u32, t as u32))
            .map_or(&[], Vec::as_slice)
    }
}

/// `1 + #{e ≠ target, e ∉ mask : scores[e] ≥ scores[target]}`.
///
/// Ties count against the target. The target is never masked, even when
/// listed in `mask`.
pub fn filtered_rank(scores: &[f64], target: usize, mask: &[u32]) -> Result<usize> {
    let Some(&st) = scores.get(target) else {
        return Err(Error::IndexOutOfRange {
            what: "target",
            index: target,
            size: scores.len(),
        });
    };
    if st.is_nan() {
        return Err(Error::NonFinite(format!("score of target {target}")));
    }
    let mut beaten = scores.iter().filter(|&&s| s >= st).count() - 1;
    let mut seen = mask.to_vec();
    seen.sort_unstable();
    seen.dedup();
    for &m in &seen {
        let m = m as usize;
        if m != target && scores.get(m).is_some_and(|&s| s >= st) {
            beaten -= 1;
        }
    }
    Ok(beaten + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub queries: usize,
}

impl Metrics {
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let n = ranks.len().max(1) as f64;
        let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
        Metrics {
            mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
            hits1: hits(1),
            hits3: hits(3),
            hits10: hits(10),
            queries: ranks.len(),
        }
    }

    /// `hits1 ≤ hits3 ≤ hits10` and `hits1 ≤ mrr`.
    pub fn is_ordered(&self) -> bool {
        self.hits1 <= self.hits3 && self.hits3 <= self.hits10 && self.hits1 <= self.mrr
    }
}

/// Filtered ranks, tail query then head query for each triple.
pub fn link_prediction_ranks(
    model: &impl LinkPredictor,
    triples: &[Triple],
    filter: &FilterIndex,
) -> Result<Vec<usize>> {
    let max_id = triples.iter().map(|t| t.h().max(t.t())).max();
    check_vocab(model.num_entities(), max_id)?;
    let mut ranks = Vec::with_capacity(2 * triples.len());
    for t in triples {
        let s = model.tail_scores(t.h(), t.r())?;
        ranks.push(filtered_rank(&s, t.t(), filter.tails(t.h(), t.r()))?);
        let s = model.head_scores(t.t(), t.r())?;
        ranks.push(filtered_rank(&s, t.h(), filter.heads(t.r(), t.t()))?);
    }
    Ok(ranks)
}

pub fn evaluate_lp(model: &impl LinkPredictor, triples: &[Triple], filter: &FilterIndex) -> Result<Metrics> {
    Ok(Metrics::from_ranks(&link_prediction_ranks(model, triples, filter)?))
}

/// Tail-direction metrics of `c` for every path, filtered by `(a, r_direct, ?)`.
pub fn evaluate_comp(model: &impl PathPredictor, paths: &[CompPath], filter: &FilterIndex) -> Result<Metrics> {
    let max_id = paths.iter().map(|p| p.a.max(p.b).max(p.c) as usize).max();
    check_vocab(model.num_entities(), max_id)?;
    let mut ranks = Vec::with_capacity(paths.len());
    for p in paths {
        let s = model.compose_scores(p.a as usize, p.r1 as usize, p.r2 as usize)?;
        ranks.push(filtered_rank(
            &s,
            p.c as usize,
            filter.tails(p.a as usize, p.r_direct as usize),
        )?);
    }
    Ok(Metrics::from_ranks(&ranks))
}

fn check_vocab(model_entities: usize, max_id: Option<usize>) -> Result<()> {
    if let Some(max_id) = max_id.filter(|&m| m >= model_entities) {
        return Err(Error::shape(
            "evaluate",
            format!("entity {max_id} outside a model of {model_entities} entities"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_examples() {
        assert_eq!(filtered_rank(&[0.1, 0.9, 0.3], 1, &[]).unwrap(), 1);
        assert_eq!(filtered_rank(&[0.9, 0.8, 0.7], 2, &[0]).unwrap(), 2);
        assert_eq!(filtered_rank(&[0.5; 7], 3, &[]).unwrap(), 7);
        assert_eq!(filtered_rank(&[0.9, 0.8], 1, &[1, 0, 0]).unwrap(), 1);
        assert!(filtered_rank(&[0.1], 1, &[]).is_err());
        assert!(filtered_rank(&[f64::NAN], 0, &[]).is_err());
    }

    #[test]
    fn metrics_from_ranks() {
        let m = Metrics::from_ranks(&[1, 2, 4, 20]);
        assert_eq!(m.queries, 4);
        assert_eq!(m.hits1, 0.25);
        assert_eq!(m.hits3, 0.5);
        assert_eq!(m.hits10, 0.75);
        assert!((m.mrr - (1.0 + 0.5 + 0.25 + 0.05) / 4.0).abs() < 1e-15);
        assert!(m.is_ordered());
    }

    #[test]
    fn filter_index_lookups() {
        let ts = [Triple::new(0, 0, 1), Triple::new(0, 0, 2), Triple::new(3, 0, 2)];
        let f = FilterIndex::from_triples(&ts);
        assert_eq!(f.tails(0, 0), &[1, 2]);
        assert_eq!(f.heads(0, 2), &[0, 3]);
        assert!(f.tails(5, 5).is_empty());
    }

    struct Memorizer {
        n: usize,
        facts: Vec<Triple>,
    }

    impl LinkPredictor for Memorizer {
        fn num_entities(&self) -> usize {
            self.n
        }
        fn tail_scores(&self, h: usize, r: usize) -> Result<Vec<f64>> {
            let mut s = vec![0.0; self.n];
            for f in self.facts.iter().filter(|f| f.h() == h && f.r() == r) {
                s[f.t()] = 1.0;
            }
            Ok(s)
        }
        fn head_scores(&self, t: usize, r: usize) -> Result<Vec<f64>> {
            let mut s = vec![0.0; self.n];
            for f in self.facts.iter().filter(|f| f.t() == t && f.r() == r) {
                s[f.h()] = 1.0;
            }
            Ok(s)
        }
    }

    #[test]
    fn memorizing_model_scores_perfectly() {
        let facts = vec![
            Triple::new(0, 0, 1),
            Triple::new(0, 0, 2),
            Triple::new(2, 1, 3),
            Triple::new(4, 1, 3),
        ];
        let f = FilterIndex::from_triples(&facts);
        let model = Memorizer { n: 5, facts: facts.clone() };
        let m = evaluate_lp(&model, &facts, &f).unwrap();
        assert_eq!(m.mrr, 1.0);
        assert_eq!(m.queries, 8);
        // without filtering, co-answers tie with the target
        let unfiltered = evaluate_lp(&model, &facts, &FilterIndex::default()).unwrap();
        assert!(unfiltered.mrr < 1.0);
        let small = Memorizer { n: 2, facts: facts.clone() };
        assert!(evaluate_lp(&small, &facts, &f).is_err());
    }
}
