//! Linear program description and the public LP entry point.

use crate::error::LpError;
use crate::simplex::{Simplex, WarmBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Sparse linear row `sum coeffs[i].1 * x[coeffs[i].0]  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Self {
        Self { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Signed slack: nonnegative iff the row holds at `x`.
    pub fn slack(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => self.rhs - act,
            Sense::Ge => act - self.rhs,
            Sense::Eq => -(act - self.rhs).abs(),
        }
    }
}

/// `minimize objective . x` subject to rows and `lower <= x <= upper`.
///
/// Bounds may be infinite; `lower[j] == upper[j]` fixes a variable.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpProblem {
    /// `n` nonnegative variables with zero cost and no rows.
    pub fn new(n: usize) -> Self {
        Self {
            objective: vec![0.0; n],
            constraints: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.constraints.push(Constraint::new(coeffs, sense, rhs));
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Malformed(format!(
                "bound vectors have lengths {}/{} for {} variables",
                self.lower.len(),
                self.upper.len(),
                n
            )));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::Malformed(format!(
                "objective coefficient {j} not finite"
            )));
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(LpError::Malformed(format!(
                    "variable {j} has bounds [{}, {}]",
                    self.lower[j], self.upper[j]
                )));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::Malformed(format!(
                    "variable {j} has an empty range"
                )));
            }
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n || !a.is_finite() {
                    return Err(LpError::Malformed(format!(
                        "row {i} has bad entry ({j}, {a})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest bound or row violation at `x` (zero when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for row in &self.constraints {
            worst = worst.max(-row.slack(x));
        }
        worst
    }
}

/// Solves `p` to an optimal basic solution.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    solve_with(p, &p.lower, &p.upper, &[])
}

/// Solves `p` with replaced bounds and extra rows appended.
pub(crate) fn solve_with(
    p: &LpProblem,
    lower: &[f64],
    upper: &[f64],
    extra: &[Constraint],
) -> Result<LpSolution, LpError> {
    solve_warm(p, lower, upper, extra, None).map(|(s, _)| s)
}

/// As [`solve_with`], starting from a previous basis when one is given.
/// Falls back to a cold start if the warm start breaks down numerically.
pub(crate) fn solve_warm(
    p: &LpProblem,
    lower: &[f64],
    upper: &[f64],
    extra: &[Constraint],
    warm: Option<&WarmBasis>,
) -> Result<(LpSolution, WarmBasis), LpError> {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(LpError::Infeasible(0.0));
    }
    let rows: Vec<&Constraint> = p.constraints.iter().chain(extra.iter()).collect();
    let n = p.num_vars();
    let mut spent = 0;
    if let Some(w) = warm {
        if let Some(mut simplex) = Simplex::new_warm(n, &rows, &p.objective, lower, upper, w) {
            match simplex.solve_warm() {
                Ok(()) => return Ok(finish(p, &simplex)),
                Err(LpError::Infeasible(v)) => return Err(LpError::Infeasible(v)),
                Err(_) => spent = simplex.iterations(),
            }
        }
    }
    let mut simplex = Simplex::new(n, &rows, &p.objective, lower, upper);
    match simplex.solve() {
        Ok(()) => {}
        Err(LpError::SingularBasis) => {
            spent += simplex.iterations();
            simplex = Simplex::new(n, &rows, &p.objective, lower, upper).conservative();
            simplex.solve()?;
        }
        Err(e) => return Err(e),
    }
    simplex.add_iterations(spent);
    Ok(finish(p, &simplex))
}

fn finish(p: &LpProblem, simplex: &Simplex) -> (LpSolution, WarmBasis) {
    let x = simplex.primal_values();
    let objective = p.objective_value(&x);
    (
        LpSolution {
            x,
            objective,
            iterations: simplex.iterations(),
        },
        simplex.export_basis(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        for _ in 0..200 {
            let n = rng.random_range(2..8);
            let mut p = LpProblem::new(n);
            p.upper = vec![1.0; n];
            p.objective = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            for _ in 0..rng.random_range(1..4) {
                let coeffs = (0..n).map(|j| (j, rng.random_range(-2.0..3.0))).collect();
                p.add_constraint(coeffs, Sense::Le, rng.random_range(0.5..3.0));
            }
            let (_, basis) = solve_warm(&p, &p.lower, &p.upper, &[], None).unwrap();
            let mut upper = p.upper.clone();
            upper[rng.random_range(0..n)] = 0.0;
            let mut lower = p.lower.clone();
            lower[rng.random_range(0..n)] = rng.random_range(0.0..1.0);
            let cut = Constraint::new(
                (0..n).map(|j| (j, rng.random_range(-1.0..2.0))).collect(),
                Sense::Le,
                1.0,
            );
            let extra = [cut];
            let cold = solve_with(&p, &lower, &upper, &extra);
            let warm = solve_warm(&p, &lower, &upper, &extra, Some(&basis));
            match (cold, warm) {
                (Ok(c), Ok((w, _))) => {
                    assert!(
                        (c.objective - w.objective).abs() < 1e-9,
                        "{} vs {}",
                        c.objective,
                        w.objective
                    );
                    checked += 1;
                }
                (Err(LpError::Infeasible(_)), Err(LpError::Infeasible(_))) => {}
                (c, w) => panic!("cold {c:?} warm {:?}", w.map(|(s, _)| s)),
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn single_lower_bound() {
        let mut p = LpProblem::new(1);
        p.objective[0] = 1.0;
        p.add_constraint(vec![(0, 1.0)], Sense::Ge, 3.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_edge() {
        let mut p = LpProblem::new(2);
        p.objective = vec![-1.0, -1.0];
        p.add_constraint(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective + 1.0).abs() < 1e-12);
        assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(1);
        p.add_constraint(vec![(0, 1.0)], Sense::Le, -1.0);
        assert!(matches!(solve_lp(&p), Err(LpError::Infeasible(_))));

        let mut q = LpProblem::new(1);
        q.objective[0] = -1.0;
        assert!(matches!(solve_lp(&q), Err(LpError::Unbounded(0))));
    }

    #[test]
    fn free_and_upper_bounded_variables() {
        // min x - y, x free with x >= -2 via a row, y <= 4
        let mut p = LpProblem::new(2);
        p.objective = vec![1.0, -1.0];
        p.lower = vec![f64::NEG_INFINITY, f64::NEG_INFINITY];
        p.upper = vec![f64::INFINITY, 4.0];
        p.add_constraint(vec![(0, 1.0)], Sense::Ge, -2.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] + 2.0).abs() < 1e-12);
        assert!((s.x[1] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn equality_rows_and_fixed_variables() {
        let mut p = LpProblem::new(3);
        p.objective = vec![1.0, 2.0, 3.0];
        p.upper = vec![1.0, 1.0, 0.0];
        p.add_constraint(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Eq, 1.5);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert_eq!(s.x[2], 0.0);
    }

    #[test]
    fn rejects_malformed() {
        let mut p = LpProblem::new(2);
        p.add_constraint(vec![(5, 1.0)], Sense::Le, 1.0);
        assert!(matches!(solve_lp(&p), Err(LpError::Malformed(_))));
        let mut q = LpProblem::new(1);
        q.lower[0] = 2.0;
        q.upper[0] = 1.0;
        assert!(matches!(solve_lp(&q), Err(LpError::Malformed(_))));
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's classic cycling instance under Dantzig pricing.
        let mut p = LpProblem::new(4);
        p.objective = vec![-0.75, 150.0, -0.02, 6.0];
        p.add_constraint(
            vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
            Sense::Le,
            0.0,
        );
        p.add_constraint(
            vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
            Sense::Le,
            0.0,
        );
        p.add_constraint(vec![(2, 1.0)], Sense::Le, 1.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective + 0.05).abs() < 1e-10);
    }
}
