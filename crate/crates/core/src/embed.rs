//! Entity embeddings with one learned `d × d` matrix per relation.
//!
//! A fact `(s, r, o)` is predicted as `v = E[s] · M[r]` and scored against
//! every entity by `v · E[o]`; training minimizes full-batch softmax
//! cross-entropy of the true object. Multi-hop queries chain the matrices:
//! `E[s] · M[r1] · M[r2] ⋯`.
//!
//! When `normalize_embeddings` is set, rows of `E` are rescaled to unit
//! length at construction and, under [`Normalization::AfterStep`], after
//! every optimizer step as well. The loss and its gradients are those of the
//! plain (un-normalized) forward pass.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Triple, TripleStore, Vocabulary};
use crate::optim::{Adam, AdamConfig};
use crate::rng::{stream, RngSeed};
use crate::tensor::{
    batched_transform, finite_diff_check, row_normalize_in_place, vec_matmul, vec_matmul_t, xavier_uniform,
    DenseMatrix, GradCheckOptions, GradCheckReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub dim: usize,
    /// Set from the experiment-level seed, never from a config section.
    #[serde(skip)]
    pub seed: RngSeed,
    pub normalize_embeddings: bool,
    pub normalization: Normalization,
}

/// When unit-length rescaling of `E` happens (if enabled at all).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// At construction and after every optimizer step.
    #[default]
    AfterStep,
    /// At construction only.
    InitOnly,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "after-step" => Ok(Normalization::AfterStep),
            "init-only" => Ok(Normalization::InitOnly),
            other => Err(Error::Config(format!(
                "unknown normalization `{other}` (expected after-step or init-only)"
            ))),
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            epochs: 500,
            dim: 64,
            seed: RngSeed::default(),
            normalize_embeddings: true,
            normalization: Normalization::AfterStep,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::Config("dim must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedModel {
    pub entities: Arc<Vocabulary>,
    pub relations: Arc<Vocabulary>,
    /// `num_entities × d`
    pub e: DenseMatrix,
    /// One `d × d` matrix per relation.
    pub m: Vec<DenseMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedGrads {
    pub e: DenseMatrix,
    pub m: Vec<DenseMatrix>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LossCurve(pub Vec<f64>);

impl LossCurve {
    pub fn first(&self) -> Option<f64> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<f64> {
        self.0.last().copied()
    }
}

impl EmbedModel {
    /// Xavier-uniform `E` and `M`, `E` rows optionally normalized.
    pub fn init(
        entities: Arc<Vocabulary>,
        relations: Arc<Vocabulary>,
        dim: usize,
        seed: RngSeed,
        normalize: bool,
    ) -> Self {
        let mut e = xavier_uniform(entities.len(), dim, &mut seed.stream(stream::ENTITY_INIT));
        if normalize {
            row_normalize_in_place(&mut e);
        }
        let mut rng = seed.stream(stream::RELATION_INIT);
        let m = (0..relations.len())
            .map(|_| xavier_uniform(dim, dim, &mut rng))
            .collect();
        EmbedModel {
            entities,
            relations,
            e,
            m,
        }
    }

    pub fn dim(&self) -> usize {
        self.e.cols()
    }

    pub fn num_entities(&self) -> usize {
        self.e.rows()
    }

    fn check_ids(&self, subj: &[usize], rels: &[usize]) -> Result<()> {
        if subj.len() != rels.len() {
            return Err(Error::shape(
                "forward",
                format!("{} subjects, {} relations", subj.len(), rels.len()),
            ));
        }
        if let Some(&s) = subj.iter().find(|&&s| s >= self.num_entities()) {
            return Err(Error::IndexOutOfRange {
                what: "entity",
                index: s,
                size: self.num_entities(),
            });
        }
        if let Some(&r) = rels.iter().find(|&&r| r >= self.m.len()) {
            return Err(Error::IndexOutOfRange {
                what: "relation",
                index: r,
                size: self.m.len(),
            });
        }
        Ok(())
    }

    /// Row `i` is `E[subj[i]] · M[rels[i]]`.
    pub fn forward(&self, subj: &[usize], rels: &[usize]) -> Result<DenseMatrix> {
        self.check_ids(subj, rels)?;
        let rows = self.e.select_rows(subj);
        let mats: Vec<&DenseMatrix> = rels.iter().map(|&r| &self.m[r]).collect();
        if mats.is_empty() {
            return Ok(DenseMatrix::zeros(0, self.dim()));
        }
        batched_transform(&rows, &mats)
    }

    /// `pred · Eᵀ`: every prediction against every entity.
    pub fn score_all(&self, pred: &DenseMatrix) -> Result<DenseMatrix> {
        pred.matmul_bt(&self.e)
    }

    /// Mean softmax cross-entropy of the true objects, with exact gradients.
    ///
    /// Facts are processed in sorted order, so the result does not depend on
    /// the order they are passed in.
    pub fn ce_loss_and_grads(&self, facts: &[Triple]) -> Result<(f64, EmbedGrads)> {
        if facts.is_empty() {
            return Err(Error::Config("empty fact set".into()));
        }
        let mut facts = facts.to_vec();
        facts.sort_unstable();
        let subj: Vec<usize> = facts.iter().map(Triple::h).collect();
        let rels: Vec<usize> = facts.iter().map(Triple::r).collect();
        if let Some(t) = facts.iter().find(|t| t.t() >= self.num_entities()) {
            return Err(Error::IndexOutOfRange {
                what: "entity",
                index: t.t(),
                size: self.num_entities(),
            });
        }
        let pred = self.forward(&subj, &rels)?;
        let mut g = self.score_all(&pred)?;
        let b = facts.len() as f64;
        let mut loss = 0.0;
        for (i, f) in facts.iter().enumerate() {
            let row = g.row_mut(i);
            let l = softmax_xent_in_place(row, f.t());
            if !l.is_finite() {
                return Err(Error::NonFinite(format!("loss of fact {i} {f:?}")));
            }
            loss += l;
            row.iter_mut().for_each(|x| *x /= b);
        }
        loss /= b;

        // g = dL/dscores (b × n)
        let d_pred = g.matmul(&self.e)?;
        let mut grad_e = g.t_matmul(&pred)?;
        let mut grad_m = vec![DenseMatrix::zeros(self.dim(), self.dim()); self.m.len()];
        for (i, (&s, &r)) in subj.iter().zip(&rels).enumerate() {
            let dv = d_pred.row(i);
            let es = self.e.row(s);
            let gm = &mut grad_m[r];
            for (a, &ea) in es.iter().enumerate() {
                if ea != 0.0 {
                    crate::tensor::axpy(ea, dv, gm.row_mut(a));
                }
            }
            let back = vec_matmul_t(dv, &self.m[r]);
            crate::tensor::axpy(1.0, &back, grad_e.row_mut(s));
        }
        Ok((
            loss,
            EmbedGrads {
                e: grad_e,
                m: grad_m,
            },
        ))
    }

    pub fn loss(&self, facts: &[Triple]) -> Result<f64> {
        // Loss only, same reduction order as ce_loss_and_grads.
        let mut facts = facts.to_vec();
        facts.sort_unstable();
        let subj: Vec<usize> = facts.iter().map(Triple::h).collect();
        let rels: Vec<usize> = facts.iter().map(Triple::r).collect();
        let mut scores = self.score_all(&self.forward(&subj, &rels)?)?;
        let total: f64 = facts
            .iter()
            .enumerate()
            .map(|(i, f)| softmax_xent_in_place(scores.row_mut(i), f.t()))
            .sum();
        Ok(total / facts.len() as f64)
    }

    /// Entities ranked by `(E[subj] · M[r1] ⋯ M[rn]) · E[o]`, best first;
    /// equal scores keep the lower ordinal first.
    pub fn compose_infer(&self, subj: usize, chain: &[usize]) -> Result<Vec<(usize, f64)>> {
        if chain.is_empty() {
            return Err(Error::Config("relation chain must not be empty".into()));
        }
        self.check_ids(&[subj], &chain[..1])?;
        if let Some(&r) = chain.iter().find(|&&r| r >= self.m.len()) {
            return Err(Error::IndexOutOfRange {
                what: "relation",
                index: r,
                size: self.m.len(),
            });
        }
        let mut v = self.e.row(subj).to_vec();
        for &r in chain {
            v = vec_matmul(&v, &self.m[r]);
        }
        Ok(rank_desc(vec_matmul_t(&v, &self.e)))
    }

    /// [`compose_infer`](Self::compose_infer) addressed by names.
    pub fn compose_infer_named(&self, subj: &str, chain: &[&str]) -> Result<Vec<(String, f64)>> {
        let s = self.entities.id("entity", subj)?;
        let rels = chain
            .iter()
            .map(|r| self.relations.id("relation", r))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .compose_infer(s, &rels)?
            .into_iter()
            .map(|(i, sc)| (self.entities.name(i).to_owned(), sc))
            .collect())
    }

    /// Central differences of [`loss`](Self::loss) against
    /// [`ce_loss_and_grads`](Self::ce_loss_and_grads), over `E` and every `M`.
    pub fn check_gradients(&self, facts: &[Triple], opts: GradCheckOptions) -> Result<GradCheckReport> {
        let (_, g) = self.ce_loss_and_grads(facts)?;
        let params: Vec<DenseMatrix> = std::iter::once(self.e.clone()).chain(self.m.iter().cloned()).collect();
        let analytic: Vec<DenseMatrix> = std::iter::once(g.e).chain(g.m).collect();
        let mut probe = self.clone();
        finite_diff_check(
            |p| {
                probe.e = p[0].clone();
                probe.m = p[1..].to_vec();
                probe.loss(facts).unwrap_or(f64::NAN)
            },
            &params,
            &analytic,
            opts,
        )
    }

    fn is_finite(&self) -> bool {
        self.e.is_finite() && self.m.iter().all(DenseMatrix::is_finite)
    }
}

/// Sorts `(index, score)` by score descending, index ascending on ties.
pub fn rank_desc(scores: Vec<f64>) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked
}

/// Replaces `row` with `softmax(row) − onehot(target)` and returns
/// `−log softmax(row)[target]`.
pub(crate) fn softmax_xent_in_place(row: &mut [f64], target: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let log_p = (row[target] / sum).ln();
    for x in row.iter_mut() {
        *x /= sum;
    }
    row[target] -= 1.0;
    -log_p
}

/// Full-batch Adam training on all facts of `store`.
pub fn train(store: &TripleStore, config: &TrainConfig) -> Result<(EmbedModel, LossCurve)> {
    train_with(store, config, |_, _| {})
}

/// [`train`] with a per-epoch callback `(epoch, loss)`.
pub fn train_with(
    store: &TripleStore,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(EmbedModel, LossCurve)> {
    config.validate()?;
    let mut model = EmbedModel::init(
        store.entities_arc().clone(),
        store.relations_arc().clone(),
        config.dim,
        config.seed,
        config.normalize_embeddings,
    );
    let facts = store.triples();
    let sizes = std::iter::once(model.e.as_slice().len())
        .chain(model.m.iter().map(|m| m.as_slice().len()));
    let mut opt = Adam::new(AdamConfig::adam(config.learning_rate), sizes);
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let (loss, grads) = match model.ce_loss_and_grads(facts) {
            Ok(x) => x,
            Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, loss: f64::NAN }),
            Err(e) => return Err(e),
        };
        curve.push(loss);
        on_epoch(epoch, loss);
        let mut params: Vec<&mut DenseMatrix> = std::iter::once(&mut model.e).chain(model.m.iter_mut()).collect();
        let grad_refs: Vec<&DenseMatrix> = std::iter::once(&grads.e).chain(grads.m.iter()).collect();
        opt.step(&mut params, &grad_refs);
        if config.normalize_embeddings && config.normalization == Normalization::AfterStep {
            row_normalize_in_place(&mut model.e);
        }
        if !model.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
    }
    Ok((model, LossCurve(curve)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_store() -> TripleStore {
        TripleStore::from_named([
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("c", "q", "d"),
            ("a", "q", "e"),
            ("e", "r", "a"),
            ("d", "q", "b"),
        ])
    }

    fn model_from(store: &TripleStore, dim: usize, seed: u64) -> EmbedModel {
        EmbedModel::init(
            store.entities_arc().clone(),
            store.relations_arc().clone(),
            dim,
            RngSeed(seed),
            false,
        )
    }

    #[test]
    fn identity_relation_returns_subject() {
        let s = toy_store();
        let mut m = model_from(&s, 4, 1);
        m.m[0] = DenseMatrix::identity(4);
        let out = m.forward(&[2], &[0]).unwrap();
        assert_eq!(out.row(0), m.e.row(2));
        let empty = m.forward(&[], &[]).unwrap();
        assert_eq!(empty.shape(), (0, 4));
        assert!(m.forward(&[9], &[0]).is_err());
        assert!(m.forward(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn forward_matches_dense_product() {
        let s = toy_store();
        let m = model_from(&s, 5, 2);
        let out = m.forward(&[3], &[1]).unwrap();
        let oracle = m.e.select_rows(&[3]).matmul(&m.m[1]).unwrap();
        assert_eq!(out, oracle);
    }

    #[test]
    fn score_all_by_hand() {
        let ents = Arc::new(Vocabulary::from(vec!["x".to_owned(), "y".to_owned(), "z".to_owned()]));
        let rels = Arc::new(Vocabulary::from(vec!["r".to_owned()]));
        let mut m = EmbedModel::init(ents, rels, 2, RngSeed(0), false);
        m.e = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]]).unwrap();
        let pred = DenseMatrix::from_rows(&[vec![2.0, -1.0], vec![0.6, 0.8]]).unwrap();
        let s = m.score_all(&pred).unwrap();
        assert_eq!(s.row(0), &[2.0, -1.0, 2.0 * 0.6 - 0.8]);
        // unit-norm prediction equal to an embedding is the argmax
        assert_eq!(rank_desc(s.row(1).to_vec())[0].0, 2);
        let orth = DenseMatrix::from_rows(&[vec![0.8, -0.6]]).unwrap();
        assert_eq!(m.score_all(&orth).unwrap().get(0, 2), 0.0);
    }

    #[test]
    fn single_entity_loss_is_zero() {
        let s = TripleStore::from_named([("a", "r", "a")]);
        let m = model_from(&s, 3, 4);
        let (loss, g) = m.ce_loss_and_grads(s.triples()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.e.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradients_match_central_differences() {
        let s = toy_store();
        for seed in 0..5 {
            let m = model_from(&s, 4, seed);
            let report = m.check_gradients(s.triples(), GradCheckOptions::default()).unwrap();
            assert!(report.max_relative_error < 1e-4, "seed {seed}: {report:?}");
            assert_eq!(report.per_block.len(), 1 + s.num_relations());
        }
    }

    #[test]
    fn loss_ignores_fact_order() {
        let s = toy_store();
        let m = model_from(&s, 6, 3);
        let mut rev = s.triples().to_vec();
        rev.reverse();
        let (a, ga) = m.ce_loss_and_grads(s.triples()).unwrap();
        let (b, gb) = m.ce_loss_and_grads(&rev).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(ga, gb);
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(train(&toy_store(), &cfg), Err(Error::Config(_))));
        let cfg = TrainConfig {
            learning_rate: -1.0,
            ..Default::default()
        };
        assert!(train(&toy_store(), &cfg).is_err());
    }

    #[test]
    fn toy_kg_is_memorized() {
        let s = TripleStore::from_named([
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("c", "r", "d"),
            ("d", "r", "e"),
            ("e", "r", "f"),
            ("a", "q", "f"),
            ("b", "q", "e"),
            ("c", "q", "a"),
            ("f", "q", "c"),
            ("d", "q", "b"),
        ]);
        let cfg = TrainConfig {
            epochs: 200,
            dim: 16,
            ..Default::default()
        };
        let (model, curve) = train(&s, &cfg).unwrap();
        assert_eq!(curve.0.len(), 200);
        for t in s.triples() {
            let ranked = model.compose_infer(t.h(), &[t.r()]).unwrap();
            assert_eq!(ranked[0].0, t.t(), "{:?}", s.named(t));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig {
            epochs: 20,
            dim: 8,
            ..Default::default()
        };
        let (a, ca) = train(&toy_store(), &cfg).unwrap();
        let (b, cb) = train(&toy_store(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }

    #[test]
    fn single_hop_chain_matches_forward_scoring() {
        let s = toy_store();
        let m = model_from(&s, 5, 9);
        let ranked = m.compose_infer(0, &[1]).unwrap();
        let scores = m.score_all(&m.forward(&[0], &[1]).unwrap()).unwrap();
        assert_eq!(ranked, rank_desc(scores.row(0).to_vec()));
    }
}
