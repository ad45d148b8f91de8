use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{bool_matmul_count, heaviside, SparseBoolMatrix};

/// Violating coordinates kept per check.
pub const VIOLATION_CAP: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckResult {
    pub passed: bool,
    pub violations: usize,
    pub examples: Vec<(usize, usize)>,
}

impl CheckResult {
    fn from_coords(coords: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut violations = 0;
        let mut examples = Vec::new();
        for c in coords {
            violations += 1;
            if examples.len() < VIOLATION_CAP {
                examples.push(c);
            }
        }
        CheckResult {
            passed: violations == 0,
            violations,
            examples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Every parent edge is an ancestor edge.
    pub containment: CheckResult,
    /// One more step `A × P` derives nothing outside `A`.
    pub closure: CheckResult,
    /// Nobody is their own ancestor.
    pub acyclicity: CheckResult,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.containment.passed && self.closure.passed && self.acyclicity.passed
    }
}

pub fn verify(parent: &SparseBoolMatrix, ancestor: &SparseBoolMatrix) -> Result<VerificationReport> {
    if parent.shape() != ancestor.shape() {
        return Err(Error::shape(
            "verify",
            format!("{:?} vs {:?}", parent.shape(), ancestor.shape()),
        ));
    }
    let containment =
        CheckResult::from_coords(parent.iter().filter(|&(r, c)| !ancestor.contains(r, c)));
    let step = heaviside(&bool_matmul_count(ancestor, parent)?);
    let closure = CheckResult::from_coords(step.iter().filter(|&(r, c)| !ancestor.contains(r, c)));
    let acyclicity = CheckResult::from_coords(ancestor.diagonal().into_iter().map(|i| (i, i)));
    Ok(VerificationReport {
        containment,
        closure,
        acyclicity,
    })
}

/// Ancestor and descendant ordinals of `node`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineageIds {
    pub ancestors: Vec<usize>,
    pub descendants: Vec<usize>,
}

/// Descendants are the row of `node`, ancestors its column.
pub fn lineage_ids(ancestor: &SparseBoolMatrix, node: usize) -> Result<LineageIds> {
    if node >= ancestor.rows() {
        return Err(Error::IndexOutOfRange {
            what: "node",
            index: node,
            size: ancestor.rows(),
        });
    }
    Ok(LineageIds {
        descendants: ancestor.row(node).iter().map(|&c| c as usize).collect(),
        ancestors: (0..ancestor.rows())
            .filter(|&r| ancestor.contains(r, node))
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datalog::{ClosureProgram, Edb, Engine, ANCESTOR_PROGRAM};

    fn closure_of(n: usize, pairs: &[(usize, usize)]) -> (SparseBoolMatrix, SparseBoolMatrix) {
        let p = SparseBoolMatrix::from_pairs(n, n, pairs.iter().copied()).unwrap();
        let edb = Edb::from([("Parent".to_owned(), p.clone())]);
        let (a, _) = ClosureProgram::parse(ANCESTOR_PROGRAM)
            .unwrap()
            .run(&edb, Engine::Seminaive, 100)
            .unwrap();
        (p, a)
    }

    #[test]
    fn closure_passes_all_checks() {
        let (p, a) = closure_of(5, &[(0, 1), (1, 2), (0, 3), (3, 4)]);
        assert!(verify(&p, &a).unwrap().passed());
    }

    #[test]
    fn planted_violations() {
        let (p, a) = closure_of(3, &[(0, 1), (1, 2)]);
        let missing = a.difference(&SparseBoolMatrix::from_pairs(3, 3, [(1, 2)]).unwrap()).unwrap();
        let r = verify(&p, &missing).unwrap();
        assert!(!r.containment.passed);
        assert_eq!(r.containment.violations, 1);
        assert_eq!(r.containment.examples, vec![(1, 2)]);

        let cyclic = a.union(&SparseBoolMatrix::from_pairs(3, 3, [(1, 1)]).unwrap()).unwrap();
        let r = verify(&p, &cyclic).unwrap();
        assert!(!r.acyclicity.passed);
        assert_eq!(r.acyclicity.examples, vec![(1, 1)]);

        let r = verify(&p, &p).unwrap();
        assert!(!r.closure.passed);
        assert_eq!(r.closure.examples, vec![(0, 2)]);
    }

    #[test]
    fn lineage_of_toy_chain() {
        let (_, a) = closure_of(2, &[(0, 1)]);
        let l = lineage_ids(&a, 1).unwrap();
        assert_eq!(l.ancestors, vec![0]);
        assert!(l.descendants.is_empty());
        assert!(lineage_ids(&a, 2).is_err());
    }
}
