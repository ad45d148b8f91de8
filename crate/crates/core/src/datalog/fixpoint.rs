use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::SparseBoolMatrix;

use super::parser::{parse_program, Rule};
use super::plan::{compile, ContractionPlan};

pub const DEFAULT_MAX_ITERS: usize = 10_000;

pub const ANCESTOR_PROGRAM: &str = "\
Ancestor(x,y) :- Parent(x,y).
Ancestor(x,z) :- Ancestor(x,y), Parent(y,z).
";

/// Extensional relations by predicate name.
pub type Edb = HashMap<String, SparseBoolMatrix>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Naive,
    #[default]
    Seminaive,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Engine::Naive),
            "seminaive" | "semi-naive" => Ok(Engine::Seminaive),
            other => Err(Error::Config(format!(
                "unknown engine `{other}` (expected naive or seminaive)"
            ))),
        }
    }
}

/// Per-iteration record of a closure run. Iteration `t` (1-based) is the
/// `t`-th application of the recursive rule; the last entry is always 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosureTrace {
    pub base_edges: usize,
    pub new_edges: Vec<usize>,
    pub final_edges: usize,
    /// Last iteration that added at least one edge (0 when none did).
    pub last_productive_iteration: usize,
    /// Iteration at which no new edge appeared.
    pub zero_progress_iteration: usize,
}

impl ClosureTrace {
    fn new(base_edges: usize) -> Self {
        ClosureTrace {
            base_edges,
            new_edges: Vec::new(),
            final_edges: base_edges,
            last_productive_iteration: 0,
            zero_progress_iteration: 0,
        }
    }

    fn record(&mut self, added: usize) {
        self.new_edges.push(added);
        self.final_edges += added;
        let t = self.new_edges.len();
        if added > 0 {
            self.last_productive_iteration = t;
        } else {
            self.zero_progress_iteration = t;
        }
    }

    pub fn total_new_edges(&self) -> usize {
        self.new_edges.iter().sum()
    }

    /// One `{"iteration": t, "new_edges": n}` object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, n) in self.new_edges.iter().enumerate() {
            writeln!(w, "{}", serde_json::json!({"iteration": i + 1, "new_edges": n}))?;
        }
        Ok(())
    }
}

/// A base rule plus one recursive rule for the same head predicate.
#[derive(Debug, Clone)]
pub struct ClosureProgram {
    pub head: String,
    pub base: Rule,
    pub recursive: Rule,
    pub base_plan: ContractionPlan,
    pub recursive_plan: ContractionPlan,
}

impl ClosureProgram {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_rules(parse_program(text)?)
    }

    pub fn from_rules(rules: Vec<Rule>) -> Result<Self> {
        if rules.len() != 2 {
            return Err(Error::Rule(format!(
                "closure programs have one base rule and one recursive rule, got {} rules",
                rules.len()
            )));
        }
        let head = rules[0].head.predicate.clone();
        if rules[1].head.predicate != head {
            return Err(Error::Rule(format!(
                "rules define different predicates `{head}` and `{}`",
                rules[1].head.predicate
            )));
        }
        let (rec, base): (Vec<Rule>, Vec<Rule>) = rules.into_iter().partition(Rule::is_recursive);
        let (Some(recursive), Some(base)) = (rec.into_iter().next(), base.into_iter().next()) else {
            return Err(Error::Rule(
                "need exactly one base rule and one recursive rule".into(),
            ));
        };
        Ok(ClosureProgram {
            base_plan: compile(&base)?,
            recursive_plan: compile(&recursive)?,
            head,
            base,
            recursive,
        })
    }

    /// Extensional predicates the program reads.
    pub fn edb_predicates(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .base
            .body
            .iter()
            .chain(&self.recursive.body)
            .map(|a| a.predicate.clone())
            .filter(|p| *p != self.head)
            .collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn base_relation(&self, edb: &Edb) -> Result<SparseBoolMatrix> {
        self.base_plan.execute(|_, name| edb.get(name))
    }

    pub fn run(&self, edb: &Edb, engine: Engine, max_iters: usize) -> Result<(SparseBoolMatrix, ClosureTrace)> {
        let base = self.base_relation(edb)?;
        match engine {
            Engine::Naive => fixpoint(&base, &self.recursive_plan, edb, max_iters),
            Engine::Seminaive => semi_naive_fixpoint(&base, &self.recursive_plan, edb, max_iters),
        }
    }
}

fn check_base(base: &SparseBoolMatrix, max_iters: usize) -> Result<()> {
    if base.rows() != base.cols() {
        return Err(Error::shape("fixpoint", format!("base is {:?}", base.shape())));
    }
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    Ok(())
}

/// `A⁰ = base`, `Aᵗ⁺¹ = H(Aᵗ + rule(Aᵗ))` until an iteration adds nothing.
pub fn fixpoint(
    base: &SparseBoolMatrix,
    plan: &ContractionPlan,
    edb: &Edb,
    max_iters: usize,
) -> Result<(SparseBoolMatrix, ClosureTrace)> {
    check_base(base, max_iters)?;
    let mut current = base.clone();
    let mut trace = ClosureTrace::new(base.nnz());
    for _ in 0..max_iters {
        let derived = plan.execute(|_, name| {
            if name == plan.head {
                Some(&current)
            } else {
                edb.get(name)
            }
        })?;
        let next = current.union(&derived)?;
        let added = next.nnz() - current.nnz();
        trace.record(added);
        current = next;
        if added == 0 {
            return Ok((current, trace));
        }
    }
    Err(Error::NonConvergence { max_iters, trace })
}

/// Same result and trace as [`fixpoint`], but each round only joins facts
/// that are new since the previous round. For a body with several
/// occurrences of the head predicate, one occurrence at a time reads the
/// delta while the others read the full relation.
pub fn semi_naive_fixpoint(
    base: &SparseBoolMatrix,
    plan: &ContractionPlan,
    edb: &Edb,
    max_iters: usize,
) -> Result<(SparseBoolMatrix, ClosureTrace)> {
    check_base(base, max_iters)?;
    let recursive_atoms: Vec<usize> = plan.occurrences(&plan.head).collect();
    let mut current = base.clone();
    let mut delta = base.clone();
    let mut trace = ClosureTrace::new(base.nnz());
    for _ in 0..max_iters {
        let mut fresh = SparseBoolMatrix::empty(current.rows(), current.cols());
        for &delta_atom in &recursive_atoms {
            let derived = plan.execute(|atom, name| {
                if atom == delta_atom {
                    Some(&delta)
                } else if name == plan.head {
                    Some(&current)
                } else {
                    edb.get(name)
                }
            })?;
            fresh = fresh.union(&derived)?;
        }
        delta = fresh.difference(&current)?;
        trace.record(delta.nnz());
        if delta.is_empty() {
            return Ok((current, trace));
        }
        current = current.union(&delta)?;
    }
    Err(Error::NonConvergence { max_iters, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parent_edb(n: usize, pairs: &[(usize, usize)]) -> Edb {
        let p = SparseBoolMatrix::from_pairs(n, n, pairs.iter().copied()).unwrap();
        Edb::from([("Parent".to_owned(), p)])
    }

    #[test]
    fn chain_closure() {
        let prog = ClosureProgram::parse(ANCESTOR_PROGRAM).unwrap();
        let edb = parent_edb(4, &[(0, 1), (1, 2), (2, 3)]);
        for engine in [Engine::Naive, Engine::Seminaive] {
            let (a, trace) = prog.run(&edb, engine, DEFAULT_MAX_ITERS).unwrap();
            assert_eq!(a.nnz(), 6);
            assert_eq!(trace.new_edges, vec![2, 1, 0]);
            assert_eq!(trace.last_productive_iteration, 2);
            assert_eq!(trace.zero_progress_iteration, 3);
            assert_eq!(trace.final_edges, 6);
        }
    }

    #[test]
    fn edgeless_and_single_edge() {
        let prog = ClosureProgram::parse(ANCESTOR_PROGRAM).unwrap();
        let (a, trace) = prog.run(&parent_edb(3, &[]), Engine::Naive, 5).unwrap();
        assert!(a.is_empty());
        assert_eq!(trace.new_edges, vec![0]);
        assert_eq!(trace.last_productive_iteration, 0);

        let (a, trace) = prog.run(&parent_edb(2, &[(0, 1)]), Engine::Seminaive, 5).unwrap();
        assert_eq!(a.nnz(), 1);
        assert_eq!(trace.new_edges, vec![0]);
    }

    #[test]
    fn iteration_cap_carries_partial_trace() {
        let prog = ClosureProgram::parse(ANCESTOR_PROGRAM).unwrap();
        let edb = parent_edb(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        match prog.run(&edb, Engine::Naive, 2) {
            Err(Error::NonConvergence { max_iters: 2, trace }) => assert_eq!(trace.new_edges, vec![3, 2]),
            other => panic!("{other:?}"),
        }
        assert!(prog.run(&edb, Engine::Naive, 0).is_err());
    }

    #[test]
    fn nonlinear_rule_agrees_between_engines() {
        let prog = ClosureProgram::parse(
            "T(x,y) :- E(x,y).\nT(x,z) :- T(x,y), T(y,z).",
        )
        .unwrap();
        let e = SparseBoolMatrix::from_pairs(8, 8, (0..7).map(|i| (i, i + 1))).unwrap();
        let edb = Edb::from([("E".to_owned(), e)]);
        let naive = prog.run(&edb, Engine::Naive, 100).unwrap();
        let semi = prog.run(&edb, Engine::Seminaive, 100).unwrap();
        assert_eq!(naive, semi);
        assert_eq!(naive.0.nnz(), 28);
    }

    #[test]
    fn program_shape_is_validated() {
        assert!(ClosureProgram::parse("A(x,y) :- P(x,y).").is_err());
        assert!(ClosureProgram::parse("A(x,y) :- P(x,y).\nB(x,z) :- B(x,y), P(y,z).").is_err());
        assert!(ClosureProgram::parse("A(x,y) :- P(x,y).\nA(x,y) :- Q(x,y).").is_err());
        let p = ClosureProgram::parse(ANCESTOR_PROGRAM).unwrap();
        assert_eq!(p.edb_predicates(), ["Parent"]);
    }

    #[test]
    fn trace_jsonl() {
        let mut t = ClosureTrace::new(3);
        t.record(2);
        t.record(0);
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"iteration\":1,\"new_edges\":2}\n{\"iteration\":2,\"new_edges\":0}\n"
        );
    }
}
