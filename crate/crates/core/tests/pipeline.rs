use std::fs;
use std::path::{Path, PathBuf};

use tensor_logic::experiment::{run_experiment, ExperimentConfig, ExperimentId, ExperimentResult, RunReport};
use tensor_logic::Error;

fn write_genealogy(dir: &Path) -> (PathBuf, PathBuf) {
    let persons = dir.join("persons.csv");
    let rels = dir.join("rels.csv");
    let mut p = String::from("person_id,person_name\n");
    let mut r = String::from("person_relationship_id,person_id_1,relationship_type,person_id_2\n");
    for (i, name) in ["Adam", "Seth", "Enosh", "Kenan", "Abram", "Isaac", "Lot"].iter().enumerate() {
        p.push_str(&format!("p{i},{name}\n"));
    }
    // Adam > Seth > Enosh > Kenan > Abram > Isaac, and Lot under Enosh
    for (k, (a, b)) in [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 6)].iter().enumerate() {
        r.push_str(&format!("{k},p{a},father,p{b}\n"));
    }
    fs::write(&persons, p).unwrap();
    fs::write(&rels, r).unwrap();
    (persons, rels)
}

/// Relations p(i, i+1), q(i, i+2) and s(i, i+3) on a line of `n` nodes;
/// every fifth p edge goes to valid or test.
fn write_line_kg(dir: &Path, n: usize) -> [PathBuf; 3] {
    let mut parts = [String::new(), String::new(), String::new()];
    for i in 0..n {
        for (rel, step) in [("p", 1), ("q", 2), ("s", 3)] {
            if i + step < n {
                let slot = match (rel, i % 10) {
                    ("p", 4) => 1,
                    ("p", 9) => 2,
                    _ => 0,
                };
                parts[slot].push_str(&format!("v{i}\t{rel}\tv{}\n", i + step));
            }
        }
    }
    let paths = ["train.txt", "valid.txt", "test.txt"].map(|f| dir.join(f));
    for (p, text) in paths.iter().zip(&parts) {
        fs::write(p, text).unwrap();
    }
    paths
}

fn kg_config(exp: ExperimentId, dir: &Path, out: &str) -> ExperimentConfig {
    let [train, valid, test] = write_line_kg(dir, 60);
    let mut c = ExperimentConfig::new(exp);
    c.data.train = Some(train);
    c.data.valid = Some(valid);
    c.data.test = Some(test);
    c.exp3.dim = 12;
    c.exp3.epochs = 4;
    c.exp3.validate_every = 2;
    c.exp3.batch_size = 64;
    c.exp3.learning_rate = 0.01;
    c.bench.n_valid = 5;
    c.bench.n_test = 5;
    c.output_dir = dir.join(out);
    c
}

fn strip_volatile(mut r: RunReport) -> RunReport {
    r.wall_clock_seconds = 0.0;
    r.config.output_dir = PathBuf::new();
    r
}

#[test]
fn exp1_on_a_small_genealogy() {
    let dir = tempfile::tempdir().unwrap();
    let (persons, rels) = write_genealogy(dir.path());
    let mut c = ExperimentConfig::new(ExperimentId::Exp1);
    c.data.persons = Some(persons);
    c.data.relationships = Some(rels);
    c.exp1.lineage = vec!["Adam".into(), "Abram".into()];
    c.output_dir = dir.path().join("out");
    let report = run_experiment(c).unwrap();
    let ExperimentResult::Exp1(r) = &report.result else { panic!() };
    assert_eq!(r.stats.nodes, 7);
    assert_eq!(r.stats.edges, 6);
    // 5 + 4 + 3 + 2 + 1 on the main line, plus Lot's 3 ancestors
    assert_eq!(r.closure_edges, 18);
    // length-2 paths: four on the main line, Seth > Lot
    assert_eq!(r.trace.new_edges.first(), Some(&5));
    assert_eq!(r.trace.last_productive_iteration, 4);
    assert_eq!(r.trace.zero_progress_iteration, 5);
    assert!(r.verification.acyclicity.passed && r.verification.closure.passed);
    assert_eq!(r.lineages[0].descendant_count, 6);
    assert_eq!(r.lineages[1].ancestors, ["Adam", "Seth", "Enosh", "Kenan"]);

    let trace = fs::read_to_string(dir.path().join("out/trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 5);
    let on_disk: RunReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(on_disk, report);
    assert_eq!(report.inputs["persons"].sha256.len(), 64);
}

#[test]
fn exp3a_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(kg_config(ExperimentId::Exp3a, dir.path(), "a")).unwrap();
    let b = run_experiment(kg_config(ExperimentId::Exp3a, dir.path(), "b")).unwrap();
    assert_eq!(strip_volatile(a.clone()), strip_volatile(b));
    let ExperimentResult::Exp3a(r) = &a.result else { panic!() };
    assert!(r.test.is_ordered());
    assert_eq!(r.history.validation.len(), 2);
    assert!(r.history.max_clipped_norm <= 1.0 + 1e-9);
    assert!(dir.path().join("a/model.ckpt").is_file());
}

#[test]
fn exp3b_bench_reuse_matches_fresh_build() {
    let dir = tempfile::tempdir().unwrap();
    let fresh = run_experiment(kg_config(ExperimentId::Exp3b, dir.path(), "fresh")).unwrap();
    let mut reuse_cfg = kg_config(ExperimentId::Exp3b, dir.path(), "reuse");
    reuse_cfg.data.bench = Some(dir.path().join("fresh/bench.jsonl"));
    let reused = run_experiment(reuse_cfg).unwrap();
    let (ExperimentResult::Exp3b(f), ExperimentResult::Exp3b(r)) = (&fresh.result, &reused.result) else {
        panic!()
    };
    assert!(!f.bench_reused && r.bench_reused);
    assert_eq!(f.composition_test, r.composition_test);
    assert_eq!(f.composition_valid, r.composition_valid);
    assert_eq!(f.reduced_train, r.reduced_train);
    assert_eq!(f.removed_edges, 10);
    assert_eq!(f.bench.dedup, "a,r_direct,c");
    assert!(!dir.path().join("reuse/bench.jsonl").exists());
}

#[test]
fn failures_carry_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = kg_config(ExperimentId::Exp3b, dir.path(), "out");
    c.bench.n_test = 10_000;
    let err = run_experiment(c).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "build benchmark", .. }), "{err}");
    assert!(err.to_string().starts_with("build benchmark: need"));

    let mut c = ExperimentConfig::new(ExperimentId::Exp1);
    c.data.persons = Some(dir.path().join("missing.csv"));
    assert!(run_experiment(c).unwrap_err().is_validation());
}

#[test]
fn shipped_configs_use_default_hyperparameters() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = fs::read_to_string(&path).unwrap();
        let c = ExperimentConfig::parse(&text, &path.display().to_string()).unwrap();
        assert_eq!(c.exp2, tensor_logic::embed::TrainConfig::default(), "{}", path.display());
        assert_eq!(c.exp3, tensor_logic::superposition::SuperTrainConfig::default(), "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 4);
}
