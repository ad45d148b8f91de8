//! Browser bindings: closure explorer, countries training, and chained
//! relation queries. Every export returns a JSON string.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use tensor_logic::datalog::{lineage, verify, ClosureProgram, Edb, ANCESTOR_PROGRAM};
use tensor_logic::embed::{train_with, EmbedModel, Normalization, TrainConfig};
use tensor_logic::experiment::zero_shot_table;
use tensor_logic::kg::{load_countries_str, CapitalPolicy, Vocabulary};
use tensor_logic::rng::RngSeed;
use tensor_logic::tensor::SparseBoolMatrix;

const COUNTRIES: &str = include_str!("../../../data/countries/countries.json");

/// Pairs shown in the closure listing.
const PAIR_LIMIT: usize = 500;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub fn default_program() -> String {
    ANCESTOR_PROGRAM.to_owned()
}

/// Closure of the graph given as one `from to` pair per line under
/// `program` (empty means the ancestor program).
#[wasm_bindgen]
pub fn closure(edges: &str, program: &str, engine: &str, focus: &str) -> Result<String, JsValue> {
    closure_json(edges, program, engine, focus).map(|v| v.to_string()).map_err(js_err)
}

pub fn closure_json(edges: &str, program: &str, engine: &str, focus: &str) -> Result<Value, String> {
    let program = if program.trim().is_empty() { ANCESTOR_PROGRAM } else { program };
    let program = ClosureProgram::parse(program).map_err(|e| e.to_string())?;
    let preds = program.edb_predicates();
    let [base] = preds.as_slice() else {
        return Err(format!("expected one base relation, the program reads {}", preds.join(", ")));
    };
    let engine = engine.parse().map_err(|e: tensor_logic::Error| e.to_string())?;

    let mut vocab = Vocabulary::new();
    let mut pairs = Vec::new();
    for (i, line) in edges.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty()).collect();
        let [a, b] = parts.as_slice() else {
            return Err(format!("line {}: expected two names, got `{line}`", i + 1));
        };
        pairs.push((vocab.intern(a), vocab.intern(b)));
    }
    let n = vocab.len();
    let base_m = SparseBoolMatrix::from_pairs(n, n, pairs).map_err(|e| e.to_string())?;
    let edb = Edb::from([(base.clone(), base_m.clone())]);
    let (closed, trace) = program.run(&edb, engine, 10_000).map_err(|e| e.to_string())?;
    let report = verify(&base_m, &closed).map_err(|e| e.to_string())?;
    let listed: Vec<[&str; 2]> = closed
        .iter()
        .take(PAIR_LIMIT)
        .map(|(a, b)| [vocab.name(a), vocab.name(b)])
        .collect();
    let focus = focus.trim();
    let focus = if focus.is_empty() {
        Value::Null
    } else {
        json!(lineage(&closed, &vocab, focus).map_err(|e| e.to_string())?)
    };
    Ok(json!({
        "nodes": n,
        "base_edges": base_m.nnz(),
        "closure_edges": closed.nnz(),
        "trace": trace,
        "verification": report,
        "pairs": listed,
        "truncated": closed.nnz() > PAIR_LIMIT,
        "focus": focus,
    }))
}

/// Relation-matrix model trained on the bundled countries facts.
#[wasm_bindgen]
pub struct GeoModel {
    model: EmbedModel,
    report: Value,
}

#[wasm_bindgen]
impl GeoModel {
    /// Trains and returns the model; `report()` holds the loss curve and
    /// the zero-shot table.
    #[wasm_bindgen(constructor)]
    pub fn new(epochs: usize, dim: usize, learning_rate: f64, seed: u32, init_only: bool) -> Result<GeoModel, JsValue> {
        Self::train(epochs, dim, learning_rate, seed as u64, init_only).map_err(js_err)
    }

    pub fn report(&self) -> String {
        self.report.to_string()
    }

    /// Ranks every entity for `subject` pushed through the comma-separated
    /// relation chain.
    pub fn query(&self, subject: &str, chain: &str, topk: usize) -> Result<String, JsValue> {
        self.query_json(subject, chain, topk).map(|v| v.to_string()).map_err(js_err)
    }

    pub fn entities(&self) -> String {
        json!(self.model.entities.names()).to_string()
    }
}

impl GeoModel {
    pub fn train(epochs: usize, dim: usize, learning_rate: f64, seed: u64, init_only: bool) -> Result<GeoModel, String> {
        let store = load_countries_str(COUNTRIES, "countries.json", CapitalPolicy::Primary).map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            learning_rate,
            epochs,
            dim,
            seed: RngSeed(seed),
            normalize_embeddings: true,
            normalization: if init_only { Normalization::InitOnly } else { Normalization::AfterStep },
        };
        let (model, curve) = train_with(&store, &cfg, |_, _| {}).map_err(|e| e.to_string())?;
        let queries = zero_shot_table(&model).map_err(|e| e.to_string())?;
        let report = json!({
            "facts": store.len(),
            "entities": store.num_entities(),
            "correct": queries.iter().filter(|q| q.correct).count(),
            "queries": queries,
            "loss_curve": curve.0,
        });
        Ok(GeoModel { model, report })
    }

    pub fn query_json(&self, subject: &str, chain: &str, topk: usize) -> Result<Value, String> {
        let chain: Vec<&str> = chain.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let ranked = self.model.compose_infer_named(subject, &chain).map_err(|e| e.to_string())?;
        Ok(json!(ranked
            .into_iter()
            .take(topk)
            .map(|(e, s)| json!({ "entity": e, "score": s }))
            .collect::<Vec<_>>()))
    }
}
