//! Thin adapter over the `microlp` simplex solver.

use microlp::{ComparisonOp, OptimizationDirection, Problem, Solution, Variable};

use crate::error::{Error, Result};

pub(crate) use microlp::ComparisonOp as Cmp;

pub(crate) struct Lp {
    problem: Problem,
}

impl Lp {
    pub fn minimize() -> Self {
        Lp {
            problem: Problem::new(OptimizationDirection::Minimize),
        }
    }

    pub fn maximize() -> Self {
        Lp {
            problem: Problem::new(OptimizationDirection::Maximize),
        }
    }

    pub fn var(&mut self, cost: f64, lo: f64, hi: f64) -> Variable {
        self.problem.add_var(cost, (lo, hi))
    }

    pub fn constraint(&mut self, terms: &[(Variable, f64)], op: ComparisonOp, rhs: f64) {
        self.problem.add_constraint(terms, op, rhs);
    }

    pub fn solve(self) -> Result<Solution> {
        match self.problem.solve() {
            Ok(s) => s
                .into_solution()
                .map_err(|_| Error::Lp("solver stopped without a solution".into())),
            Err(microlp::Error::Infeasible) => Err(Error::Infeasible),
            Err(e) => Err(Error::Lp(e.to_string())),
        }
    }
}
