//! Relation matrices built from the entity embeddings themselves:
//! `R_r = Êᵀ A_r Ê = Σ_{(h,t) ∈ r} ê_hᵀ ê_t`, where `Ê` is `E` with unit rows.
//!
//! Tail queries score `normalize(ê_h R_r) · Êᵀ`, head queries
//! `normalize(ê_t R_rᵀ) · Êᵀ`, and two-hop queries chain `R_{r1} R_{r2}`.
//! `E` is the only parameter; it receives gradient as query, as part of
//! every `R_r`, and as the scoring matrix.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::embed::softmax_xent_in_place;
use crate::error::{Error, Result};
use crate::eval::{evaluate_lp, FilterIndex, LinkPredictor, Metrics, PathPredictor};
use crate::kg::{DatasetSplit, Triple, TripleStore, Vocabulary};
use crate::optim::{clip_global_norm, Adam, AdamConfig};
use crate::rng::{stream, RngSeed};
use crate::tensor::{
    axpy, dot, finite_diff_check, normalize_slice, row_normalize, vec_matmul, vec_matmul_t, xavier_uniform,
    DenseMatrix, GradCheckOptions, GradCheckReport, SparseBoolMatrix, ROW_NORM_EPS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuperTrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub temperature: f64,
    pub clip_norm: f64,
    pub epochs: usize,
    pub validate_every: usize,
    pub dim: usize,
    /// Set from the experiment-level seed, never from a config section.
    #[serde(skip)]
    pub seed: RngSeed,
    /// Validate on a fixed seeded subset of this many triples instead of all.
    pub valid_sample: Option<usize>,
}

impl Default for SuperTrainConfig {
    fn default() -> Self {
        SuperTrainConfig {
            learning_rate: 5e-4,
            weight_decay: 1e-5,
            batch_size: 1024,
            temperature: 0.1,
            clip_norm: 1.0,
            epochs: 50,
            validate_every: 10,
            dim: 256,
            seed: RngSeed::default(),
            valid_sample: None,
        }
    }
}

impl SuperTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("temperature", self.temperature),
            ("clip_norm", self.clip_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("validate_every", self.validate_every),
            ("dim", self.dim),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionModel {
    pub entities: Arc<Vocabulary>,
    pub relations: Arc<Vocabulary>,
    /// Raw (unnormalized) parameters, `N × d`.
    pub e: DenseMatrix,
    /// Training facts the adjacencies were built from.
    facts: Vec<Triple>,
    adj: Vec<SparseBoolMatrix>,
    adj_t: Vec<SparseBoolMatrix>,
}

/// `Eᵀ A E` through the nonempty rows of `A` only.
pub fn superpose(e: &DenseMatrix, a: &SparseBoolMatrix) -> Result<DenseMatrix> {
    if a.rows() != e.rows() || a.cols() != e.rows() {
        return Err(Error::shape(
            "superpose",
            format!("adjacency {:?} with {} embeddings", a.shape(), e.rows()),
        ));
    }
    let (rows, ae) = compact_product(a, e);
    e.select_rows(&rows).t_matmul(&ae)
}

/// Nonempty rows of `A` and the matching rows of `A · X`.
fn compact_product(a: &SparseBoolMatrix, x: &DenseMatrix) -> (Vec<usize>, DenseMatrix) {
    let rows: Vec<usize> = a.nonempty_rows().collect();
    let mut out = DenseMatrix::zeros(rows.len(), x.cols());
    for (k, &r) in rows.iter().enumerate() {
        let dst = out.row_mut(k);
        for &c in a.row(r) {
            axpy(1.0, x.row(c as usize), dst);
        }
    }
    (rows, out)
}

impl SuperpositionModel {
    pub fn new(train: &TripleStore, dim: usize, seed: RngSeed) -> Self {
        let e = xavier_uniform(train.num_entities(), dim, &mut seed.stream(stream::ENTITY_INIT));
        Self::with_embeddings(train, e).expect("shape matches by construction")
    }

    pub fn with_embeddings(train: &TripleStore, e: DenseMatrix) -> Result<Self> {
        if e.rows() != train.num_entities() {
            return Err(Error::shape(
                "superposition model",
                format!("{} embeddings for {} entities", e.rows(), train.num_entities()),
            ));
        }
        let adj = train.adjacencies();
        let adj_t = adj.iter().map(SparseBoolMatrix::transpose).collect();
        Ok(SuperpositionModel {
            entities: train.entities_arc().clone(),
            relations: train.relations_arc().clone(),
            e,
            facts: train.triples().to_vec(),
            adj,
            adj_t,
        })
    }

    pub fn dim(&self) -> usize {
        self.e.cols()
    }

    pub fn num_entities(&self) -> usize {
        self.e.rows()
    }

    pub fn num_relations(&self) -> usize {
        self.adj.len()
    }

    pub fn facts(&self) -> &[Triple] {
        &self.facts
    }

    pub fn adjacency(&self, r: usize) -> &SparseBoolMatrix {
        &self.adj[r]
    }

    fn check_entity(&self, id: usize) -> Result<()> {
        if id >= self.num_entities() {
            return Err(Error::IndexOutOfRange {
                what: "entity",
                index: id,
                size: self.num_entities(),
            });
        }
        Ok(())
    }

    fn check_relation(&self, r: usize) -> Result<()> {
        if r >= self.num_relations() {
            return Err(Error::IndexOutOfRange {
                what: "relation",
                index: r,
                size: self.num_relations(),
            });
        }
        Ok(())
    }

    pub fn normalized_embeddings(&self) -> DenseMatrix {
        row_normalize(&self.e)
    }

    /// `R_r` over the row-normalized embeddings used by every forward pass.
    pub fn relation_matrix(&self, r: usize) -> Result<DenseMatrix> {
        self.check_relation(r)?;
        superpose(&self.normalized_embeddings(), &self.adj[r])
    }

    /// Snapshot with every `R_r` materialized, for repeated queries.
    pub fn scorer(&self) -> Scorer {
        let e_hat = self.normalized_embeddings();
        let r = self
            .adj
            .iter()
            .map(|a| superpose(&e_hat, a).expect("square adjacency"))
            .collect();
        Scorer { e_hat, r }
    }

    pub fn predict_tail(&self, h: usize, r: usize) -> Result<Vec<f64>> {
        self.check_entity(h)?;
        let rm = self.relation_matrix(r)?;
        let e_hat = self.normalized_embeddings();
        Ok(score_against(vec_matmul(e_hat.row(h), &rm), &e_hat))
    }

    pub fn predict_head(&self, t: usize, r: usize) -> Result<Vec<f64>> {
        self.check_entity(t)?;
        let rm = self.relation_matrix(r)?;
        let e_hat = self.normalized_embeddings();
        Ok(score_against(vec_matmul_t(e_hat.row(t), &rm), &e_hat))
    }

    pub fn compose_predict(&self, a: usize, r1: usize, r2: usize) -> Result<Vec<f64>> {
        self.check_entity(a)?;
        self.check_relation(r1)?;
        self.check_relation(r2)?;
        let e_hat = self.normalized_embeddings();
        let m1 = superpose(&e_hat, &self.adj[r1])?;
        let m2 = superpose(&e_hat, &self.adj[r2])?;
        let v = vec_matmul(&vec_matmul(e_hat.row(a), &m1), &m2);
        Ok(score_against(v, &e_hat))
    }

    /// Central differences of [`bidirectional_loss`](Self::bidirectional_loss)
    /// against the analytic gradient.
    pub fn check_gradients(&self, batch: &[Triple], temperature: f64, opts: GradCheckOptions) -> Result<GradCheckReport> {
        let (_, g) = self.bidirectional_loss_and_grads(batch, temperature)?;
        let mut probe = self.clone();
        finite_diff_check(
            |p| {
                probe.e = p[0].clone();
                probe.bidirectional_loss(batch, temperature).unwrap_or(f64::NAN)
            },
            &[self.e.clone()],
            &[g],
            opts,
        )
    }

    /// Mean over the batch of `(CE_tail + CE_head) / 2` at temperature `T`.
    pub fn bidirectional_loss(&self, batch: &[Triple], temperature: f64) -> Result<f64> {
        let mut total = 0.0;
        for f in batch {
            let mut tail = self.predict_tail(f.h(), f.r())?;
            let mut head = self.predict_head(f.t(), f.r())?;
            tail.iter_mut().chain(head.iter_mut()).for_each(|x| *x /= temperature);
            total += softmax_xent_in_place(&mut tail, f.t()) + softmax_xent_in_place(&mut head, f.h());
        }
        Ok(total / (2.0 * batch.len() as f64))
    }

    /// [`bidirectional_loss`](Self::bidirectional_loss) and its exact gradient
    /// with respect to the raw `E`.
    pub fn bidirectional_loss_and_grads(&self, batch: &[Triple], temperature: f64) -> Result<(f64, DenseMatrix)> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        if !(temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
        }
        for f in batch {
            self.check_entity(f.h().max(f.t()))?;
            self.check_relation(f.r())?;
        }
        let (n, d) = self.e.shape();
        let mut e_hat = self.e.clone();
        let norms: Vec<f64> = (0..n).map(|i| normalize_slice(e_hat.row_mut(i))).collect();

        let mut parts: BTreeMap<usize, RelParts> = BTreeMap::new();
        for f in batch {
            parts
                .entry(f.r())
                .or_insert_with(|| RelParts::build(&self.adj[f.r()], &self.adj_t[f.r()], &e_hat));
        }

        let mut grad_hat = DenseMatrix::zeros(n, d);
        let coef = 1.0 / (2.0 * batch.len() as f64 * temperature);
        let mut loss = 0.0;
        for (i, f) in batch.iter().enumerate() {
            let p = parts.get_mut(&f.r()).expect("built above");
            // tail query: u = ê_h R
            let u = vec_matmul(e_hat.row(f.h()), &p.r);
            let (l, du) = direction_backward(u, f.t(), &e_hat, temperature, coef, &mut grad_hat);
            axpy(1.0, &vec_matmul_t(&du, &p.r), grad_hat.row_mut(f.h()));
            add_outer(&mut p.d_r, e_hat.row(f.h()), &du);
            // head query: u = ê_t Rᵀ
            let u = vec_matmul_t(e_hat.row(f.t()), &p.r);
            let (l2, du) = direction_backward(u, f.h(), &e_hat, temperature, coef, &mut grad_hat);
            axpy(1.0, &vec_matmul(&du, &p.r), grad_hat.row_mut(f.t()));
            add_outer(&mut p.d_r, &du, e_hat.row(f.t()));
            let pair = l + l2;
            if !pair.is_finite() {
                return Err(Error::NonFinite(format!("loss of batch item {i} {f:?}")));
            }
            loss += pair;
        }
        loss /= 2.0 * batch.len() as f64;

        // R = Σ ê_hᵀ ê_t  ⇒  dê_h += (A Ê)[h] dRᵀ,  dê_t += (Aᵀ Ê)[t] dR
        for p in parts.values() {
            for (k, &h) in p.heads.iter().enumerate() {
                axpy(1.0, &vec_matmul_t(p.ae.row(k), &p.d_r), grad_hat.row_mut(h));
            }
            for (k, &t) in p.tails.iter().enumerate() {
                axpy(1.0, &vec_matmul(p.ate.row(k), &p.d_r), grad_hat.row_mut(t));
            }
        }

        for (i, &norm) in norms.iter().enumerate() {
            if norm >= ROW_NORM_EPS {
                let eh = e_hat.row(i);
                let g = grad_hat.row_mut(i);
                let proj = dot(eh, g);
                for (gj, &ej) in g.iter_mut().zip(eh) {
                    *gj = (*gj - ej * proj) / norm;
                }
            }
        }
        Ok((loss, grad_hat))
    }
}

struct RelParts {
    heads: Vec<usize>,
    ae: DenseMatrix,
    tails: Vec<usize>,
    ate: DenseMatrix,
    r: DenseMatrix,
    d_r: DenseMatrix,
}

impl RelParts {
    fn build(a: &SparseBoolMatrix, a_t: &SparseBoolMatrix, e_hat: &DenseMatrix) -> Self {
        let (heads, ae) = compact_product(a, e_hat);
        let (tails, ate) = compact_product(a_t, e_hat);
        let r = e_hat.select_rows(&heads).t_matmul(&ae).expect("matching rows");
        let d = e_hat.cols();
        RelParts {
            heads,
            ae,
            tails,
            ate,
            r,
            d_r: DenseMatrix::zeros(d, d),
        }
    }
}

/// `m += xᵀ y`
fn add_outer(m: &mut DenseMatrix, x: &[f64], y: &[f64]) {
    for (a, &xa) in x.iter().enumerate() {
        if xa != 0.0 {
            axpy(xa, y, m.row_mut(a));
        }
    }
}

/// Scores `normalize(u) · Êᵀ / T` against `target`, accumulates the scoring
/// gradient into `grad_hat`, and returns the loss and `dL/du`.
fn direction_backward(
    mut u: Vec<f64>,
    target: usize,
    e_hat: &DenseMatrix,
    temperature: f64,
    coef: f64,
    grad_hat: &mut DenseMatrix,
) -> (f64, Vec<f64>) {
    let norm = normalize_slice(&mut u);
    let v = u;
    let mut z = vec_matmul_t(&v, e_hat);
    z.iter_mut().for_each(|x| *x /= temperature);
    let loss = softmax_xent_in_place(&mut z, target);
    let mut dv = vec![0.0; v.len()];
    for (e, &g) in z.iter().enumerate() {
        if g != 0.0 {
            let g = g * coef;
            axpy(g, e_hat.row(e), &mut dv);
            axpy(g, &v, grad_hat.row_mut(e));
        }
    }
    if norm >= ROW_NORM_EPS {
        let proj = dot(&v, &dv);
        for (dj, &vj) in dv.iter_mut().zip(&v) {
            *dj = (*dj - vj * proj) / norm;
        }
    }
    (loss, dv)
}

fn score_against(mut v: Vec<f64>, e_hat: &DenseMatrix) -> Vec<f64> {
    normalize_slice(&mut v);
    vec_matmul_t(&v, e_hat)
}

/// Frozen `Ê` and all `R_r`.
#[derive(Debug, Clone)]
pub struct Scorer {
    pub e_hat: DenseMatrix,
    pub r: Vec<DenseMatrix>,
}

impl Scorer {
    fn check(&self, ent: usize, rels: &[usize]) -> Result<()> {
        if ent >= self.e_hat.rows() {
            return Err(Error::IndexOutOfRange {
                what: "entity",
                index: ent,
                size: self.e_hat.rows(),
            });
        }
        if let Some(&r) = rels.iter().find(|&&r| r >= self.r.len()) {
            return Err(Error::IndexOutOfRange {
                what: "relation",
                index: r,
                size: self.r.len(),
            });
        }
        Ok(())
    }
}

impl LinkPredictor for Scorer {
    fn num_entities(&self) -> usize {
        self.e_hat.rows()
    }

    fn tail_scores(&self, h: usize, r: usize) -> Result<Vec<f64>> {
        self.check(h, &[r])?;
        Ok(score_against(vec_matmul(self.e_hat.row(h), &self.r[r]), &self.e_hat))
    }

    fn head_scores(&self, t: usize, r: usize) -> Result<Vec<f64>> {
        self.check(t, &[r])?;
        Ok(score_against(vec_matmul_t(self.e_hat.row(t), &self.r[r]), &self.e_hat))
    }
}

impl PathPredictor for Scorer {
    fn num_entities(&self) -> usize {
        self.e_hat.rows()
    }

    fn compose_scores(&self, a: usize, r1: usize, r2: usize) -> Result<Vec<f64>> {
        self.check(a, &[r1, r2])?;
        let v = vec_matmul(&vec_matmul(self.e_hat.row(a), &self.r[r1]), &self.r[r2]);
        Ok(score_against(v, &self.e_hat))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub epoch: usize,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_loss: Vec<f64>,
    pub validation: Vec<ValidationPoint>,
    /// Epoch whose parameters were kept (the last one when nothing was validated).
    pub best_epoch: usize,
    pub valid_triples_used: usize,
    /// Largest global gradient norm seen after clipping, over all steps.
    pub max_clipped_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrainEvent {
    Epoch { epoch: usize, loss: f64 },
    Validated { epoch: usize, metrics: Metrics },
}

pub fn train_superposition(split: &DatasetSplit, config: &SuperTrainConfig) -> Result<(SuperpositionModel, TrainHistory)> {
    train_superposition_with(split, config, |_| {})
}

/// Mini-batch AdamW on `split.train` with validation on `split.valid`,
/// filtered against all three splits. The parameters with the best
/// validation MRR are returned; ties keep the earlier epoch.
pub fn train_superposition_with(
    split: &DatasetSplit,
    config: &SuperTrainConfig,
    mut on_event: impl FnMut(TrainEvent),
) -> Result<(SuperpositionModel, TrainHistory)> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let mut model = SuperpositionModel::new(&split.train, config.dim, config.seed);
    let filter = FilterIndex::from_triples(split.all_triples());
    let valid: Vec<Triple> = match config.valid_sample {
        Some(k) if k < split.valid.len() => {
            let mut rng = config.seed.stream(stream::VALID_SAMPLE);
            let mut idx = index::sample(&mut rng, split.valid.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| split.valid.triples()[i]).collect()
        }
        _ => split.valid.triples().to_vec(),
    };

    let mut opt = Adam::new(
        AdamConfig::adamw(config.learning_rate, config.weight_decay),
        [model.e.as_slice().len()],
    );
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut rng = config.seed.stream(stream::SHUFFLE);
    let mut history = TrainHistory {
        valid_triples_used: valid.len(),
        ..Default::default()
    };
    let mut best: Option<(f64, DenseMatrix)> = None;
    let train = split.train.triples();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Triple> = chunk.iter().map(|&i| train[i]).collect();
            let (loss, mut grad) = match model.bidirectional_loss_and_grads(&batch, config.temperature) {
                Err(Error::NonFinite(_)) => return Err(Error::Diverged { epoch, loss: f64::NAN }),
                other => other?,
            };
            total += loss * batch.len() as f64;
            clip_global_norm(&mut [&mut grad], config.clip_norm);
            history.max_clipped_norm = history.max_clipped_norm.max(grad.sum_squares().sqrt());
            opt.step(&mut [&mut model.e], &[&grad]);
            if !model.e.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
        }
        let epoch_loss = total / train.len() as f64;
        history.epoch_loss.push(epoch_loss);
        on_event(TrainEvent::Epoch { epoch, loss: epoch_loss });

        if epoch % config.validate_every == 0 && !valid.is_empty() {
            let metrics = evaluate_lp(&model.scorer(), &valid, &filter)?;
            on_event(TrainEvent::Validated { epoch, metrics });
            history.validation.push(ValidationPoint { epoch, metrics });
            if best.as_ref().is_none_or(|(mrr, _)| metrics.mrr > *mrr) {
                best = Some((metrics.mrr, model.e.clone()));
                history.best_epoch = epoch;
            }
        }
    }
    match best {
        Some((_, e)) => model.e = e,
        None => history.best_epoch = config.epochs,
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> TripleStore {
        TripleStore::from_named([
            ("a", "r", "b"),
            ("b", "r", "c"),
            ("c", "q", "d"),
            ("a", "q", "e"),
            ("e", "r", "a"),
            ("d", "q", "b"),
            ("f", "r", "f"),
            ("b", "q", "f"),
        ])
    }

    fn outer_sum(e: &DenseMatrix, store: &TripleStore, r: usize) -> DenseMatrix {
        let d = e.cols();
        let mut m = DenseMatrix::zeros(d, d);
        for t in store.triples().iter().filter(|t| t.r() == r) {
            for i in 0..d {
                for j in 0..d {
                    m.set(i, j, m.get(i, j) + e.get(t.h(), i) * e.get(t.t(), j));
                }
            }
        }
        m
    }

    /// Orthonormal embeddings: entity `i` is the `i`-th basis vector.
    fn basis_model(store: &TripleStore) -> SuperpositionModel {
        let n = store.num_entities();
        SuperpositionModel::with_embeddings(store, DenseMatrix::identity(n)).unwrap()
    }

    fn argmax(v: &[f64]) -> usize {
        crate::embed::rank_desc(v.to_vec())[0].0
    }

    #[test]
    fn superposition_identity() {
        let s = toy();
        let m = SuperpositionModel::new(&s, 5, RngSeed(3));
        for r in 0..s.num_relations() {
            let got = superpose(&m.e, m.adjacency(r)).unwrap();
            assert!(got.max_abs_diff(&outer_sum(&m.e, &s, r)) < 1e-10);
        }
        let one = TripleStore::from_named([("x", "r", "y")]);
        let m = SuperpositionModel::new(&one, 3, RngSeed(1));
        let r = superpose(&m.e, m.adjacency(0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(r.get(i, j), m.e.get(0, i) * m.e.get(1, j));
            }
        }
    }

    #[test]
    fn empty_relation_gives_zero_scores() {
        let mut s = toy();
        let mut rels = s.relations().clone();
        rels.intern("unused");
        s = TripleStore::from_triples(s.entities_arc().clone(), Arc::new(rels), s.triples().to_vec()).unwrap();
        let m = SuperpositionModel::new(&s, 4, RngSeed(0));
        assert_eq!(m.relation_matrix(2).unwrap(), DenseMatrix::zeros(4, 4));
        assert!(m.predict_tail(0, 2).unwrap().iter().all(|&x| x == 0.0));
        assert!(m.predict_head(0, 2).unwrap().iter().all(|&x| x == 0.0));
        assert!(m.compose_predict(0, 0, 2).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn orthonormal_closed_forms() {
        let s = TripleStore::from_named([("a", "r1", "b"), ("b", "r2", "c")]);
        let m = basis_model(&s);
        let [a, b, c] = ["a", "b", "c"].map(|n| s.entities().get(n).unwrap());
        assert_eq!(argmax(&m.predict_tail(a, 0).unwrap()), b);
        assert_eq!(argmax(&m.predict_head(b, 0).unwrap()), a);
        assert_eq!(argmax(&m.compose_predict(a, 0, 1).unwrap()), c);
    }

    #[test]
    fn predict_tail_is_normalized_projection() {
        let s = toy();
        let m = SuperpositionModel::new(&s, 6, RngSeed(8));
        let e_hat = m.normalized_embeddings();
        let rm = m.relation_matrix(1).unwrap();
        let mut v = vec_matmul(e_hat.row(2), &rm);
        normalize_slice(&mut v);
        assert_eq!(m.predict_tail(2, 1).unwrap(), vec_matmul_t(&v, &e_hat));
        let sc = m.scorer();
        assert_eq!(sc.tail_scores(2, 1).unwrap(), m.predict_tail(2, 1).unwrap());
        assert_eq!(sc.compose_scores(0, 0, 1).unwrap(), m.compose_predict(0, 0, 1).unwrap());
    }

    #[test]
    fn symmetric_relation_has_matching_directions() {
        let s = TripleStore::from_named([("a", "s", "b"), ("b", "s", "a"), ("b", "s", "c"), ("c", "s", "b")]);
        let m = SuperpositionModel::new(&s, 4, RngSeed(2));
        for x in 0..3 {
            let t = m.predict_tail(x, 0).unwrap();
            let h = m.predict_head(x, 0).unwrap();
            for (p, q) in t.iter().zip(&h) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chaining_is_associative() {
        let s = toy();
        let m = SuperpositionModel::new(&s, 8, RngSeed(4));
        let e_hat = m.normalized_embeddings();
        let (r1, r2) = (m.relation_matrix(0).unwrap(), m.relation_matrix(1).unwrap());
        let left = vec_matmul(&vec_matmul(e_hat.row(0), &r1), &r2);
        let right = vec_matmul(e_hat.row(0), &r1.matmul(&r2).unwrap());
        for (x, y) in left.iter().zip(&right) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let s = toy();
        let m = SuperpositionModel::new(&s, 5, RngSeed(6));
        for c in [0.5, 2.0] {
            let mut scaled = m.clone();
            scaled.e.scale(c);
            for h in 0..s.num_entities() {
                assert_eq!(
                    argmax(&m.predict_tail(h, 0).unwrap()),
                    argmax(&scaled.predict_tail(h, 0).unwrap())
                );
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let s = toy();
        assert_eq!(s.num_entities(), 6);
        for seed in 0..4 {
            let m = SuperpositionModel::new(&s, 4, RngSeed(seed));
            let (loss, _) = m.bidirectional_loss_and_grads(s.triples(), 0.5).unwrap();
            assert!((loss - m.bidirectional_loss(s.triples(), 0.5).unwrap()).abs() < 1e-12);
            let report = m.check_gradients(s.triples(), 0.5, GradCheckOptions::default()).unwrap();
            assert!(report.max_relative_error < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn high_temperature_flattens_to_uniform() {
        let s = toy();
        let m = SuperpositionModel::new(&s, 4, RngSeed(1));
        let loss = m.bidirectional_loss(s.triples(), 100.0).unwrap();
        let ln_n = (s.num_entities() as f64).ln();
        assert!((loss - ln_n).abs() / ln_n < 0.01, "{loss} vs {ln_n}");
    }

    #[test]
    fn self_fact_is_symmetric() {
        let s = TripleStore::from_named([("a", "r", "a"), ("a", "r", "b"), ("c", "q", "b")]);
        let m = SuperpositionModel::new(&s, 3, RngSeed(5));
        let f = s.triples()[0];
        let mut tail = m.predict_tail(f.h(), f.r()).unwrap();
        let mut head = m.predict_head(f.t(), f.r()).unwrap();
        let lt = softmax_xent_in_place(&mut tail, f.t());
        let lh = softmax_xent_in_place(&mut head, f.h());
        let single = m.bidirectional_loss(&[f], 1.0).unwrap();
        assert!((single - (lt + lh) / 2.0).abs() < 1e-12);
    }

    fn toy_split() -> DatasetSplit {
        let train = toy();
        let valid = TripleStore::from_triples(
            train.entities_arc().clone(),
            train.relations_arc().clone(),
            [Triple::new(0, 1, 2), Triple::new(3, 0, 4)],
        )
        .unwrap();
        DatasetSplit {
            test: valid.filtered(|_| false),
            valid,
            train,
            cross_split_duplicates: 0,
        }
    }

    #[test]
    fn training_clips_and_is_deterministic() {
        let cfg = SuperTrainConfig {
            dim: 6,
            batch_size: 3,
            epochs: 6,
            validate_every: 2,
            learning_rate: 0.01,
            ..Default::default()
        };
        let split = toy_split();
        let (a, ha) = train_superposition(&split, &cfg).unwrap();
        let (b, hb) = train_superposition(&split, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert_eq!(ha.validation.len(), 3);
        assert!(ha.max_clipped_norm <= cfg.clip_norm + 1e-9);
        let best = ha.validation.iter().map(|v| v.metrics.mrr).fold(f64::MIN, f64::max);
        let first_best = ha.validation.iter().find(|v| v.metrics.mrr == best).unwrap();
        assert_eq!(ha.best_epoch, first_best.epoch);
    }

    #[test]
    fn bad_configs_rejected() {
        for cfg in [
            SuperTrainConfig { temperature: 0.0, ..Default::default() },
            SuperTrainConfig { clip_norm: -1.0, ..Default::default() },
            SuperTrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }
}
