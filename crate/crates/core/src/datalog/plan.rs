//! Compilation of chain rules to pairwise Boolean contractions.
//!
//! A body like `R(x,y), S(y,z), T(z,w)` under head `(x,w)` becomes the
//! left-to-right product `H(H(R·S)·T)`, each product summing the variable
//! shared by the accumulated result and the next atom. An atom whose
//! variables appear in the opposite order (`S(z,y)`) is transposed first.

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{bool_matmul_count, heaviside, SparseBoolMatrix};

use super::parser::Rule;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanStep {
    /// Index of the atom in the rule body.
    pub atom: usize,
    pub predicate: String,
    pub transpose: bool,
    /// Variable summed when this step joins the accumulated result; `None` for the first step.
    pub summed: Option<String>,
    /// Variables of the accumulated result after this step.
    pub output: (String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionPlan {
    pub head: String,
    pub output: (String, String),
    pub steps: Vec<PlanStep>,
}

impl fmt::Display for ContractionPlan {
    /// Einsum-style rendering, e.g. `Ancestor[xz] = H(Ancestor[xy] Parent[yz])`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}{}] = H(", self.head, self.output.0, self.output.1)?;
        let mut left = self.output.0.clone();
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            let t = if s.transpose { "ᵀ" } else { "" };
            write!(f, "{}{t}[{}{}]", s.predicate, left, s.output.1)?;
            left = s.output.1.clone();
        }
        write!(f, ")")
    }
}

impl ContractionPlan {
    /// Body positions that read `predicate`.
    pub fn occurrences<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.steps
            .iter()
            .filter(move |s| s.predicate == predicate)
            .map(|s| s.atom)
    }

    /// Runs the plan; `bind(atom, predicate)` supplies the matrix for each body atom.
    pub fn execute<'m, F>(&self, mut bind: F) -> Result<SparseBoolMatrix>
    where
        F: FnMut(usize, &str) -> Option<&'m SparseBoolMatrix>,
    {
        let mut acc: Option<SparseBoolMatrix> = None;
        for step in &self.steps {
            let m = bind(step.atom, &step.predicate).ok_or_else(|| {
                Error::Rule(format!("no relation bound for predicate `{}`", step.predicate))
            })?;
            let transposed;
            let m = if step.transpose {
                transposed = m.transpose();
                &transposed
            } else {
                m
            };
            acc = Some(match acc {
                None => m.clone(),
                Some(a) => heaviside(&bool_matmul_count(&a, m)?),
            });
        }
        Ok(acc.expect("plans have at least one step"))
    }
}

/// Orders the body into a chain from the head's first variable to its second.
pub fn compile(rule: &Rule) -> Result<ContractionPlan> {
    let [x, z] = &rule.head.args;
    if x == z {
        return Err(Error::Rule(format!(
            "unsupported pattern in `{rule}`: head repeats variable `{x}`"
        )));
    }
    for a in &rule.body {
        if a.args[0] == a.args[1] {
            return Err(Error::Rule(format!(
                "unsupported pattern in `{rule}`: `{a}` repeats a variable"
            )));
        }
    }

    let mut used = vec![false; rule.body.len()];
    let mut current = x.clone();
    let mut steps = Vec::with_capacity(rule.body.len());
    let mut visited = vec![x.clone()];
    while steps.len() < rule.body.len() {
        let next = (0..rule.body.len())
            .find(|&i| !used[i] && rule.body[i].args.contains(&current))
            .ok_or_else(|| {
                Error::Rule(format!(
                    "unsupported pattern in `{rule}`: body atoms do not form a chain from `{x}` to `{z}` \
                     (nothing continues from `{current}`)"
                ))
            })?;
        used[next] = true;
        let atom = &rule.body[next];
        let transpose = atom.args[1] == current;
        let other = if transpose { &atom.args[0] } else { &atom.args[1] };
        if visited.contains(other) {
            return Err(Error::Rule(format!(
                "unsupported pattern in `{rule}`: variable `{other}` closes a cycle"
            )));
        }
        visited.push(other.clone());
        steps.push(PlanStep {
            atom: next,
            predicate: atom.predicate.clone(),
            transpose,
            summed: if steps.is_empty() { None } else { Some(current.clone()) },
            output: (x.clone(), other.clone()),
        });
        current = other.clone();
    }
    if &current != z {
        return Err(Error::Rule(format!(
            "unsupported pattern in `{rule}`: chain from `{x}` ends at `{current}`, not `{z}`"
        )));
    }
    Ok(ContractionPlan {
        head: rule.head.predicate.clone(),
        output: (x.clone(), z.clone()),
        steps,
    })
}
