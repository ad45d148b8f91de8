use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use tensor_logic::checkpoint::{load_embed, load_superposition, save_embed, save_superposition};
use tensor_logic::datalog::{genealogy_lineage, verify, ClosureProgram, Edb, ANCESTOR_PROGRAM};
use tensor_logic::embed::{rank_desc, train_with, TrainConfig};
use tensor_logic::eval::{build_comp_bench, evaluate_comp, evaluate_lp, read_bench, write_bench, FilterIndex};
use tensor_logic::experiment::{
    run_experiment_with, sha256_file, write_json_atomic, zero_shot_table, DataPaths, ExperimentConfig,
};
use tensor_logic::kg::{
    load_countries, load_genealogy, load_triples_tsv, load_tsv_files, read_tsv_known, write_tsv, GenealogySchema,
    Triple, TripleStore,
};
use tensor_logic::rng::{stream, RngSeed};
use tensor_logic::superposition::{train_superposition_with, SuperTrainConfig, SuperpositionModel, TrainEvent};
use tensor_logic::tensor::GradCheckOptions;
use tensor_logic::Error;

use crate::*;

/// A core error, or a run that completed but failed its own check.
pub enum CliError {
    Core(Error),
    Failed(String),
}

impl CliError {
    pub fn is_validation(&self) -> bool {
        matches!(self, CliError::Core(e) if e.is_validation())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Closure(a) => closure(a),
        Command::TrainGeo(a) => train_geo(a),
        Command::InferGeo(a) => infer_geo(a),
        Command::TrainKg(a) => train_kg(a),
        Command::ComposePredict(a) => compose_predict(a),
        Command::EvalKg(a) => eval_kg(a),
        Command::BuildBench(a) => build_bench(a),
        Command::EvalComp(a) => eval_comp(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Run(a) => run(a),
    }
}

fn emit(report: &Value, report_out: Option<&Path>) -> Result<()> {
    if let Some(p) = report_out {
        write_json_atomic(p, report)?;
    }
    println!("{}", serde_json::to_string_pretty(report).expect("json value serializes"));
    Ok(())
}

fn defaults() -> DataPaths {
    DataPaths::default().resolved()
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::Config(msg.into()))
}

fn closure(a: ClosureArgs) -> Result<()> {
    let d = defaults();
    let persons = a.persons.unwrap_or_else(|| d.persons.unwrap());
    let relationships = a.relationships.unwrap_or_else(|| d.relationships.unwrap());
    let program_text = match &a.rule {
        None => ANCESTOR_PROGRAM.to_owned(),
        Some(r) if Path::new(r).is_file() => fs::read_to_string(r).map_err(|e| config_err(format!("{r}: {e}")))?,
        Some(r) => r.clone(),
    };
    let program = ClosureProgram::parse(&program_text)?;
    let edb_preds = program.edb_predicates();
    if edb_preds.len() != 1 {
        return Err(config_err(format!(
            "the genealogy supplies one base relation; the program reads {}",
            edb_preds.join(", ")
        )));
    }
    let g = load_genealogy(&persons, &relationships, &GenealogySchema::default())?;
    eprintln!("genealogy: {} nodes, {} edges", g.stats.nodes, g.stats.edges);
    let edb = Edb::from([(edb_preds[0].clone(), g.parent.clone())]);
    let (closure, trace) = program.run(&edb, a.engine, a.max_iters)?;
    eprintln!(
        "closure: {} edges after {} iterations",
        closure.nnz(),
        trace.zero_progress_iteration
    );
    if let Some(p) = &a.trace_out {
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).expect("writing to memory");
        fs::write(p, buf).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
    }
    let lineages = a
        .lineage
        .iter()
        .map(|who| {
            let l = genealogy_lineage(&closure, &g, who)?;
            let mut v = json!({
                "query": who,
                "person_id": l.person,
                "ancestor_count": l.ancestors.len(),
                "descendant_count": l.descendants.len(),
            });
            if a.full_lineage {
                v["ancestors"] = json!(l.ancestors);
                v["descendants"] = json!(l.descendants);
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    let verification = if a.verify { Some(verify(&g.parent, &closure)?) } else { None };
    let report = json!({
        "stats": g.stats,
        "engine": a.engine,
        "closure_edges": closure.nnz(),
        "trace": trace,
        "verification": verification,
        "lineages": lineages,
    });
    emit(&report, None)?;
    match verification {
        Some(v) if !v.passed() => Err(CliError::Failed("verification failed".into())),
        _ => Ok(()),
    }
}

fn train_geo(a: TrainGeoArgs) -> Result<()> {
    let path = a.countries.unwrap_or_else(|| defaults().countries.unwrap());
    let store = load_countries(&path, a.capital_policy.into())?;
    let cfg = TrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        dim: a.dim,
        seed: RngSeed(a.seed),
        normalize_embeddings: !a.no_normalize,
        normalization: a.normalization.into(),
    };
    eprintln!("countries: {} facts, {} entities", store.len(), store.num_entities());
    let (model, curve) = train_with(&store, &cfg, |epoch, loss| {
        if epoch == 1 || epoch % 100 == 0 {
            eprintln!("epoch {epoch}: loss {loss:.6}");
        }
    })?;
    save_embed(&model, &a.model_out)?;
    let queries = zero_shot_table(&model)?;
    let report = json!({
        "countries": { "path": path, "sha256": sha256_file(&path)? },
        "config": cfg,
        "seed": a.seed,
        "facts": store.len(),
        "entities": store.num_entities(),
        "relations": store.num_relations(),
        "initial_loss": curve.first(),
        "final_loss": curve.last(),
        "correct": queries.iter().filter(|q| q.correct).count(),
        "queries": queries,
        "loss_curve": curve.0,
        "model": a.model_out,
    });
    emit(&report, a.report_out.as_deref())
}

fn infer_geo(a: InferGeoArgs) -> Result<()> {
    let model = load_embed(&a.model)?;
    let chain: Vec<&str> = a.chain.iter().map(String::as_str).collect();
    let ranked = model.compose_infer_named(&a.subject, &chain)?;
    let top: Vec<Value> = ranked
        .into_iter()
        .take(a.topk)
        .map(|(name, score)| json!({ "entity": name, "score": score }))
        .collect();
    emit(&json!({ "subject": a.subject, "chain": a.chain, "top": top }), None)
}

fn split_paths(s: &SplitArgs) -> (PathBuf, PathBuf, PathBuf) {
    let d = defaults();
    (
        s.train.clone().unwrap_or_else(|| d.train.unwrap()),
        s.valid.clone().unwrap_or_else(|| d.valid.unwrap()),
        s.test.clone().unwrap_or_else(|| d.test.unwrap()),
    )
}

fn train_kg(a: TrainKgArgs) -> Result<()> {
    let (train, valid, test) = split_paths(&a.split);
    let split = load_triples_tsv(&train, &valid, &test)?;
    eprintln!(
        "triples: {} train, {} valid, {} test",
        split.train.len(),
        split.valid.len(),
        split.test.len()
    );
    let cfg = SuperTrainConfig {
        learning_rate: a.lr,
        weight_decay: a.wd,
        batch_size: a.batch,
        temperature: a.temp,
        clip_norm: a.clip,
        epochs: a.epochs,
        validate_every: a.validate_every,
        dim: a.dim,
        seed: RngSeed(a.seed),
        valid_sample: a.valid_sample,
    };
    cfg.validate()?;
    let (split_used, removed) = match &a.remove_edges {
        Some(p) => {
            let bench = read_bench(p, split.entities(), split.relations())?;
            let removed: HashSet<Triple> = bench.removed_edges().into_iter().collect();
            (split.with_train(split.train.filtered(|t| !removed.contains(t))), removed.len())
        }
        None => (split.clone(), 0),
    };
    let (model, history) = train_superposition_with(&split_used, &cfg, |ev| match ev {
        TrainEvent::Epoch { epoch, loss } => eprintln!("epoch {epoch}: loss {loss:.6}"),
        TrainEvent::Validated { epoch, metrics } => eprintln!("epoch {epoch}: validation MRR {:.4}", metrics.mrr),
    })?;
    save_superposition(&model, &a.model_out)?;
    let filter = FilterIndex::from_triples(split.all_triples());
    let test_metrics = evaluate_lp(&model.scorer(), split.test.triples(), &filter)?;
    let report = json!({
        "config": cfg,
        "seed": a.seed,
        "train_triples": split_used.train.len(),
        "removed_edges": removed,
        "history": history,
        "test": test_metrics,
        "model": a.model_out,
    });
    emit(&report, a.report_out.as_deref())
}

fn compose_predict(a: ComposePredictArgs) -> Result<()> {
    let model = load_superposition(&a.model)?;
    let h = model.entities.id("entity", &a.head)?;
    let r1 = model.relations.id("relation", &a.r1)?;
    let r2 = model.relations.id("relation", &a.r2)?;
    let top: Vec<Value> = rank_desc(model.compose_predict(h, r1, r2)?)
        .into_iter()
        .take(a.topk)
        .map(|(i, s)| json!({ "entity": model.entities.name(i), "score": s }))
        .collect();
    emit(&json!({ "head": a.head, "r1": a.r1, "r2": a.r2, "top": top }), None)
}

/// Triples of `paths` in the model's vocabulary.
fn known_triples(model: &SuperpositionModel, paths: &[PathBuf]) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for p in paths {
        out.extend(read_tsv_known(p, &model.entities, &model.relations)?);
    }
    Ok(out)
}

fn eval_kg(a: EvalKgArgs) -> Result<()> {
    let model = load_superposition(&a.model)?;
    let test = read_tsv_known(&a.test, &model.entities, &model.relations)?;
    let extra = known_triples(&model, &a.filter_splits)?;
    let filter = FilterIndex::from_triples(model.facts().iter().chain(&extra).chain(&test));
    let metrics = evaluate_lp(&model.scorer(), &test, &filter)?;
    let report = json!({
        "model": a.model,
        "test": { "path": a.test, "sha256": sha256_file(&a.test)? },
        "filter_splits": a.filter_splits,
        "metrics": metrics,
    });
    emit(&report, a.report_out.as_deref())
}

fn build_bench(a: BuildBenchArgs) -> Result<()> {
    let train = a.train.unwrap_or_else(|| defaults().train.unwrap());
    let store = load_tsv_files(&[&train])?.pop().expect("one store");
    let (bench, reduced) = build_comp_bench(&store, a.n_valid, a.n_test, RngSeed(a.seed))?;
    write_bench(&bench, store.entities(), store.relations(), &a.bench_out)?;
    if let Some(p) = &a.reduced_train_out {
        write_tsv(&reduced, p)?;
    }
    let report = json!({
        "train": { "path": train, "sha256": sha256_file(&train)? },
        "meta": bench.meta,
        "valid_paths": bench.valid.len(),
        "test_paths": bench.test.len(),
        "removed_edges": bench.removed_edges().len(),
        "reduced_train": reduced.len(),
        "bench": a.bench_out,
    });
    emit(&report, None)
}

fn eval_comp(a: EvalCompArgs) -> Result<()> {
    let model = load_superposition(&a.model)?;
    let bench = read_bench(&a.bench, &model.entities, &model.relations)?;
    let extra = known_triples(&model, &a.filter_splits)?;
    let removed = bench.removed_edges();
    let filter = FilterIndex::from_triples(model.facts().iter().chain(&extra).chain(&removed));
    let paths = if a.valid { &bench.valid } else { &bench.test };
    let metrics = evaluate_comp(&model.scorer(), paths, &filter)?;
    let report = json!({
        "model": a.model,
        "bench": { "path": a.bench, "sha256": sha256_file(&a.bench)? },
        "split": if a.valid { "valid" } else { "test" },
        "paths": paths.len(),
        "filter_splits": a.filter_splits,
        "metrics": metrics,
    });
    emit(&report, a.report_out.as_deref())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    if a.entities < 2 || a.dim == 0 || a.facts == 0 {
        return Err(config_err("gradcheck needs at least 2 entities, dim 1 and 1 fact"));
    }
    let seed = RngSeed(a.seed);
    let store = TripleStore::random(a.entities, 2, a.facts, &mut seed.stream(stream::GRADCHECK));
    let opts = GradCheckOptions {
        seed,
        ..GradCheckOptions::default()
    };
    let embed = tensor_logic::embed::EmbedModel::init(
        store.entities_arc().clone(),
        store.relations_arc().clone(),
        a.dim,
        seed,
        true,
    );
    let embed_report = embed.check_gradients(store.triples(), opts)?;
    let sup = SuperpositionModel::new(&store, a.dim, seed);
    let sup_report = sup.check_gradients(store.triples(), a.temp, opts)?;
    let passed = embed_report.max_relative_error <= a.tolerance && sup_report.max_relative_error <= a.tolerance;
    let report = json!({
        "seed": a.seed,
        "entities": a.entities,
        "dim": a.dim,
        "facts": store.len(),
        "tolerance": a.tolerance,
        "embed": embed_report,
        "superposition": sup_report,
        "passed": passed,
    });
    emit(&report, None)?;
    if passed {
        Ok(())
    } else {
        Err(CliError::Failed(format!("gradient check above tolerance {}", a.tolerance)))
    }
}

fn run(a: RunArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| config_err(format!("{}: {e}", a.config.display())))?;
    let mut cfg = ExperimentConfig::parse(&text, &a.config.display().to_string())?;
    if let Some(s) = a.seed {
        cfg.seed = RngSeed(s);
    }
    if let Some(o) = a.output_dir {
        cfg.output_dir = o;
    }
    if let Some(b) = a.bench {
        cfg.data.bench = Some(b);
    }
    let report = run_experiment_with(cfg, &mut |line| eprintln!("{line}"))?;
    let value = serde_json::to_value(&report).expect("report serializes");
    emit(&value, None)
}
