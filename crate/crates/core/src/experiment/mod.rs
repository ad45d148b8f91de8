//! End-to-end experiment runs with JSON reports.

mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::{save_embed, save_superposition};
use crate::datalog::{genealogy_lineage, verify, ClosureProgram, ClosureTrace, Edb, Engine, VerificationReport, ANCESTOR_PROGRAM};
use crate::embed::{train_with, EmbedModel};
use crate::error::{Error, Result};
use crate::eval::{
    build_comp_bench, evaluate_comp, evaluate_lp, read_bench, write_bench, BenchMeta, FilterIndex, Metrics,
};
use crate::kg::{
    load_countries, load_genealogy, load_triples_tsv, DatasetSplit, GenealogySchema, GenealogyStats, IS_CAPITAL_OF,
    IS_LOCATED_IN,
};
use crate::superposition::{train_superposition_with, TrainEvent, TrainHistory};

pub use config::{
    validate_config, BenchConfig, DataPaths, Exp1Config, ExperimentConfig, ExperimentId, DATA_DIR_ENV,
};

/// City → continent queries answered by chaining `is_capital_of` and `is_located_in`.
pub const ZERO_SHOT_QUERIES: [(&str, &str); 7] = [
    ("Tokyo", "Asia"),
    ("Berlin", "Europe"),
    ("Cairo", "Africa"),
    ("Lima", "Americas"),
    ("Canberra", "Oceania"),
    ("New Delhi", "Asia"),
    ("King Edward Point", "Antarctic"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub engine_version: String,
    pub config: ExperimentConfig,
    pub inputs: BTreeMap<String, InputFile>,
    pub result: ExperimentResult,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExperimentResult {
    Exp1(Exp1Result),
    Exp2(Exp2Result),
    Exp3a(Exp3aResult),
    Exp3b(Exp3bResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageSummary {
    pub query: String,
    pub person_id: String,
    pub ancestor_count: usize,
    pub descendant_count: usize,
    pub ancestors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Result {
    pub stats: GenealogyStats,
    pub engine: Engine,
    pub trace: ClosureTrace,
    pub closure_edges: usize,
    pub verification: VerificationReport,
    pub lineages: Vec<LineageSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroShotRow {
    pub subject: String,
    pub expected: String,
    pub predicted: String,
    pub correct: bool,
    pub top: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Result {
    pub facts: usize,
    pub entities: usize,
    pub relations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub loss_curve: Vec<f64>,
    pub queries: Vec<ZeroShotRow>,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub cross_split_duplicates: usize,
}

impl SplitStats {
    pub fn of(split: &DatasetSplit) -> Self {
        SplitStats {
            entities: split.entities().len(),
            relations: split.relations().len(),
            train: split.train.len(),
            valid: split.valid.len(),
            test: split.test.len(),
            cross_split_duplicates: split.cross_split_duplicates,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3aResult {
    pub dataset: SplitStats,
    pub history: TrainHistory,
    pub test: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3bResult {
    pub dataset: SplitStats,
    pub bench: BenchMeta,
    pub bench_reused: bool,
    pub removed_edges: usize,
    pub reduced_train: usize,
    pub history: TrainHistory,
    pub composition_valid: Metrics,
    pub composition_test: Metrics,
    /// Standard link prediction on the test split by the same model.
    pub direct_test: Metrics,
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Writes pretty JSON to a sibling temp file, then renames it into place.
pub fn write_json_atomic<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn run_experiment(config: ExperimentConfig) -> Result<RunReport> {
    run_experiment_with(config, &mut |_| {})
}

/// Validates `config`, runs the experiment, and writes `report.json` plus
/// any artifacts into the output directory.
pub fn run_experiment_with(config: ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<RunReport> {
    let config = config.validate()?;
    let started = Instant::now();
    let out = config.output_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let d = config.data.clone();
    let mut inputs = BTreeMap::new();
    let mut hash = |name: &str, p: &Option<PathBuf>| -> Result<()> {
        let path = p.clone().expect("resolved");
        let sha256 = sha256_file(&path).map_err(|e| e.in_stage("hash inputs"))?;
        inputs.insert(name.to_owned(), InputFile { path, sha256 });
        Ok(())
    };
    let result = match config.experiment {
        ExperimentId::Exp1 => {
            hash("persons", &d.persons)?;
            hash("relationships", &d.relationships)?;
            ExperimentResult::Exp1(run_exp1(&config, log)?)
        }
        ExperimentId::Exp2 => {
            hash("countries", &d.countries)?;
            ExperimentResult::Exp2(run_exp2(&config, log)?)
        }
        ExperimentId::Exp3a => {
            for (n, p) in [("train", &d.train), ("valid", &d.valid), ("test", &d.test)] {
                hash(n, p)?;
            }
            ExperimentResult::Exp3a(run_exp3a(&config, log)?)
        }
        ExperimentId::Exp3b => {
            for (n, p) in [("train", &d.train), ("valid", &d.valid), ("test", &d.test)] {
                hash(n, p)?;
            }
            if d.bench.is_some() {
                hash("bench", &d.bench)?;
            }
            ExperimentResult::Exp3b(run_exp3b(&config, log)?)
        }
    };
    let report = RunReport {
        engine_version: env!("CARGO_PKG_VERSION").to_owned(),
        config,
        inputs,
        result,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json_atomic(out.join("report.json"), &report).map_err(|e| e.in_stage("write report"))?;
    Ok(report)
}

fn run_exp1(config: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<Exp1Result> {
    let d = &config.data;
    let g = load_genealogy(
        d.persons.as_ref().unwrap(),
        d.relationships.as_ref().unwrap(),
        &GenealogySchema::default(),
    )
    .map_err(|e| e.in_stage("load genealogy"))?;
    log(&format!("genealogy: {} nodes, {} edges", g.stats.nodes, g.stats.edges));
    let program = ClosureProgram::parse(ANCESTOR_PROGRAM)?;
    let edb = Edb::from([("Parent".to_owned(), g.parent.clone())]);
    let (ancestor, trace) = program
        .run(&edb, config.exp1.engine, config.exp1.max_iters)
        .map_err(|e| e.in_stage("closure"))?;
    log(&format!(
        "closure: {} edges, last productive iteration {}",
        ancestor.nnz(),
        trace.last_productive_iteration
    ));
    let trace_path = config.output_dir.join("trace.jsonl");
    let mut buf = Vec::new();
    trace.write_jsonl(&mut buf).expect("writing to memory");
    fs::write(&trace_path, buf).map_err(|e| Error::io(&trace_path, e))?;
    let verification = verify(&g.parent, &ancestor)?;
    let lineages = config
        .exp1
        .lineage
        .iter()
        .map(|who| {
            let l = genealogy_lineage(&ancestor, &g, who)?;
            Ok(LineageSummary {
                query: who.clone(),
                person_id: l.person,
                ancestor_count: l.ancestors.len(),
                descendant_count: l.descendants.len(),
                ancestors: l.ancestors,
            })
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("lineage"))?;
    Ok(Exp1Result {
        stats: g.stats.clone(),
        engine: config.exp1.engine,
        closure_edges: ancestor.nnz(),
        trace,
        verification,
        lineages,
    })
}

/// Top-1 and top-3 answers of every zero-shot query.
pub fn zero_shot_table(model: &EmbedModel) -> Result<Vec<ZeroShotRow>> {
    ZERO_SHOT_QUERIES
        .iter()
        .map(|&(city, continent)| {
            let ranked = model.compose_infer_named(city, &[IS_CAPITAL_OF, IS_LOCATED_IN])?;
            Ok(ZeroShotRow {
                subject: city.to_owned(),
                expected: continent.to_owned(),
                predicted: ranked[0].0.clone(),
                correct: ranked[0].0 == continent,
                top: ranked.into_iter().take(3).collect(),
            })
        })
        .collect()
}

fn run_exp2(config: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<Exp2Result> {
    let store = load_countries(config.data.countries.as_ref().unwrap(), config.data.capital_policy)
        .map_err(|e| e.in_stage("load countries"))?;
    log(&format!("countries: {} facts, {} entities", store.len(), store.num_entities()));
    let (model, curve) = train_with(&store, &config.exp2, |epoch, loss| {
        if epoch == 1 || epoch % 100 == 0 {
            log(&format!("epoch {epoch}: loss {loss:.6}"));
        }
    })
    .map_err(|e| e.in_stage("train"))?;
    save_embed(&model, config.output_dir.join("model.ckpt"))?;
    let queries = zero_shot_table(&model).map_err(|e| e.in_stage("zero-shot queries"))?;
    Ok(Exp2Result {
        facts: store.len(),
        entities: store.num_entities(),
        relations: store.num_relations(),
        initial_loss: curve.first().unwrap_or(f64::NAN),
        final_loss: curve.last().unwrap_or(f64::NAN),
        correct: queries.iter().filter(|q| q.correct).count(),
        loss_curve: curve.0,
        queries,
    })
}

fn load_split(config: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<DatasetSplit> {
    let d = &config.data;
    let split = load_triples_tsv(d.train.as_ref().unwrap(), d.valid.as_ref().unwrap(), d.test.as_ref().unwrap())
        .map_err(|e| e.in_stage("load triples"))?;
    log(&format!(
        "triples: {} train, {} valid, {} test over {} entities, {} relations",
        split.train.len(),
        split.valid.len(),
        split.test.len(),
        split.entities().len(),
        split.relations().len()
    ));
    Ok(split)
}

fn progress(log: &mut dyn FnMut(&str)) -> impl FnMut(TrainEvent) + '_ {
    move |ev| match ev {
        TrainEvent::Epoch { epoch, loss } => log(&format!("epoch {epoch}: loss {loss:.6}")),
        TrainEvent::Validated { epoch, metrics } => {
            log(&format!("epoch {epoch}: validation MRR {:.4}", metrics.mrr))
        }
    }
}

fn run_exp3a(config: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<Exp3aResult> {
    let split = load_split(config, log)?;
    let (model, history) =
        train_superposition_with(&split, &config.exp3, progress(log)).map_err(|e| e.in_stage("train"))?;
    save_superposition(&model, config.output_dir.join("model.ckpt"))?;
    let filter = FilterIndex::from_triples(split.all_triples());
    let test = evaluate_lp(&model.scorer(), split.test.triples(), &filter).map_err(|e| e.in_stage("evaluate"))?;
    Ok(Exp3aResult {
        dataset: SplitStats::of(&split),
        history,
        test,
    })
}

fn run_exp3b(config: &ExperimentConfig, log: &mut dyn FnMut(&str)) -> Result<Exp3bResult> {
    let split = load_split(config, log)?;
    let (bench, reused) = match &config.data.bench {
        Some(p) => (
            read_bench(p, split.entities(), split.relations()).map_err(|e| e.in_stage("load benchmark"))?,
            true,
        ),
        None => {
            let (bench, _) = build_comp_bench(&split.train, config.bench.n_valid, config.bench.n_test, config.seed)
                .map_err(|e| e.in_stage("build benchmark"))?;
            write_bench(
                &bench,
                split.entities(),
                split.relations(),
                config.output_dir.join("bench.jsonl"),
            )?;
            (bench, false)
        }
    };
    let removed: std::collections::HashSet<_> = bench.removed_edges().into_iter().collect();
    let reduced = split.with_train(split.train.filtered(|t| !removed.contains(t)));
    log(&format!(
        "benchmark: {} + {} paths, reduced train {}",
        bench.valid.len(),
        bench.test.len(),
        reduced.train.len()
    ));
    let (model, history) =
        train_superposition_with(&reduced, &config.exp3, progress(log)).map_err(|e| e.in_stage("train"))?;
    save_superposition(&model, config.output_dir.join("model.ckpt"))?;
    // filtering uses the original splits, removed edges included
    let filter = FilterIndex::from_triples(split.all_triples());
    let scorer = model.scorer();
    let eval = |paths| evaluate_comp(&scorer, paths, &filter).map_err(|e| e.in_stage("evaluate composition"));
    Ok(Exp3bResult {
        dataset: SplitStats::of(&split),
        composition_valid: eval(&bench.valid)?,
        composition_test: eval(&bench.test)?,
        direct_test: evaluate_lp(&scorer, split.test.triples(), &filter).map_err(|e| e.in_stage("evaluate"))?,
        removed_edges: removed.len(),
        reduced_train: reduced.train.len(),
        bench: bench.meta,
        bench_reused: reused,
        history,
    })
}
