//! Best-first branch-and-bound with lazy cuts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{LpError, MilpError};
use crate::lp::{solve_warm, Constraint, LpProblem};
use crate::simplex::WarmBasis;
use crate::{FEAS_TOL, INT_TOL};
use std::rc::Rc;

/// Lazy constraint hook called at integer-feasible LP points.
///
/// `separate` returns rows violated by `point` (empty means accept).
/// `separate_relaxed` may return globally valid rows violated by a
/// fractional LP point; it is called for a bounded number of rounds per node.
/// `propose` may turn any node's LP point into a candidate incumbent; the
/// solver checks it against rows, bounds, integrality and `separate`.
pub trait CutCallback {
    fn separate(&self, point: &[f64]) -> Vec<Constraint>;

    fn separate_relaxed(&self, _point: &[f64]) -> Vec<Constraint> {
        Vec::new()
    }

    fn propose(&self, _point: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Callback that never adds cuts.
pub struct NoCuts;

impl CutCallback for NoCuts {
    fn separate(&self, _point: &[f64]) -> Vec<Constraint> {
        Vec::new()
    }
}

impl<F> CutCallback for F
where
    F: Fn(&[f64]) -> Vec<Constraint>,
{
    fn separate(&self, point: &[f64]) -> Vec<Constraint> {
        self(point)
    }
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub lp: LpProblem,
    pub integer: Vec<bool>,
    /// Disjoint index sets whose members sum to one and are branched on as
    /// a block ("which member is hot") instead of one variable at a time.
    pub sos1_groups: Vec<Vec<usize>>,
    pub node_limit: usize,
    pub gap_tol: f64,
    /// Known feasible point, used as the starting incumbent if it passes
    /// the same checks as a callback proposal.
    pub warm_start: Option<Vec<f64>>,
    /// Rounds of `separate_relaxed` at the root and at every other node.
    pub relaxed_rounds: (usize, usize),
}

impl MilpModel {
    pub fn new(lp: LpProblem, integer: Vec<bool>) -> Self {
        Self {
            lp,
            integer,
            sos1_groups: Vec::new(),
            node_limit: 200_000,
            gap_tol: 1e-6,
            warm_start: None,
            relaxed_rounds: (0, 0),
        }
    }

    fn validate(&self) -> Result<(), MilpError> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        if self.integer.len() != n {
            return Err(MilpError::Malformed(format!(
                "integrality mask has length {} for {} variables",
                self.integer.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        for g in &self.sos1_groups {
            for &j in g {
                if j >= n || seen[j] {
                    return Err(MilpError::Malformed(format!(
                        "bad or repeated SOS1 member {j}"
                    )));
                }
                seen[j] = true;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MilpResult {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective: f64,
    /// Smallest LP bound among unexplored nodes at exit.
    pub best_bound: f64,
    pub nodes: usize,
    pub cuts_added: usize,
    pub lp_iterations: usize,
    /// Every cut accepted from the callback, in arrival order.
    pub cuts: Vec<Constraint>,
}

struct Node {
    bound: f64,
    id: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    warm: Option<Rc<WarmBasis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // BinaryHeap is a max-heap: invert so the lowest bound, then lowest id, pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

enum Branch {
    Sos(usize),
    Var(usize),
}

struct Search<'a, C: CutCallback + ?Sized> {
    model: &'a MilpModel,
    callback: &'a C,
    cuts: Vec<Constraint>,
    incumbent: Option<(Vec<f64>, f64)>,
    lp_iterations: usize,
}

impl<C: CutCallback + ?Sized> Search<'_, C> {
    fn is_integral(&self, x: &[f64]) -> bool {
        self.model
            .integer
            .iter()
            .zip(x)
            .all(|(&int, v)| !int || (v - v.round()).abs() <= INT_TOL)
    }

    fn snap(&self, x: &mut [f64]) {
        for (v, &int) in x.iter_mut().zip(&self.model.integer) {
            if int {
                *v = v.round();
            }
        }
    }

    fn satisfies_rows(&self, x: &[f64]) -> bool {
        let lp = &self.model.lp;
        let scale = |c: &Constraint| 1.0 + c.rhs.abs();
        lp.lower
            .iter()
            .zip(&lp.upper)
            .zip(x)
            .all(|((l, u), v)| *v >= l - FEAS_TOL && *v <= u + FEAS_TOL)
            && lp
                .constraints
                .iter()
                .all(|c| c.slack(x) >= -1e-7 * scale(c))
            && self.cuts.iter().all(|c| c.slack(x) >= -1e-7 * scale(c))
    }

    /// Installs `x` as incumbent if it is fully feasible and improving.
    fn offer(&mut self, mut x: Vec<f64>) {
        if x.len() != self.model.lp.num_vars() || !self.is_integral(&x) {
            return;
        }
        self.snap(&mut x);
        if !self.satisfies_rows(&x) || !self.callback.separate(&x).is_empty() {
            return;
        }
        let obj = self.model.lp.objective_value(&x);
        if self.incumbent.as_ref().is_none_or(|(_, best)| obj < *best) {
            self.incumbent = Some((x, obj));
        }
    }

    fn cutoff(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(f64::INFINITY, |(_, obj)| obj - self.model.gap_tol)
    }

    fn choose_branch(&self, x: &[f64]) -> Option<Branch> {
        let mut best: Option<(usize, f64)> = None;
        for (g, members) in self.model.sos1_groups.iter().enumerate() {
            let hot = members.iter().filter(|&&j| x[j] > INT_TOL).count();
            if hot <= 1 {
                continue;
            }
            let peak = members.iter().fold(0.0_f64, |a, &j| a.max(x[j]));
            let score = 1.0 - peak;
            if best.is_none_or(|(_, s)| score > s + 1e-12) {
                best = Some((g, score));
            }
        }
        if let Some((g, _)) = best {
            return Some(Branch::Sos(g));
        }
        let mut best: Option<(usize, f64)> = None;
        for (j, &int) in self.model.integer.iter().enumerate() {
            if !int {
                continue;
            }
            let frac = x[j] - x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist > INT_TOL && best.is_none_or(|(_, d)| dist > d + 1e-12) {
                best = Some((j, dist));
            }
        }
        best.map(|(j, _)| Branch::Var(j))
    }
}

/// Best-first branch-and-bound over `model` with lazy cuts from `callback`.
///
/// Cuts returned at an integer point are added to a global pool (valid at
/// every node) and the node is re-solved. A cut that does not separate the
/// point that produced it is discarded, so the loop cannot stall.
pub fn solve_milp<C: CutCallback + ?Sized>(
    model: &MilpModel,
    callback: &C,
) -> Result<MilpResult, MilpError> {
    model.validate()?;
    let mut search = Search {
        model,
        callback,
        cuts: Vec::new(),
        incumbent: None,
        lp_iterations: 0,
    };
    if let Some(ws) = &model.warm_start {
        search.offer(ws.clone());
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: next_id,
        lower: model.lp.lower.clone(),
        upper: model.lp.upper.clone(),
        warm: None,
    });
    next_id += 1;
    let mut nodes = 0usize;
    let mut status = MilpStatus::Optimal;

    while let Some(node) = heap.pop() {
        if node.bound >= search.cutoff() {
            continue;
        }
        if nodes >= model.node_limit {
            heap.push(node);
            status = MilpStatus::NodeLimit;
            break;
        }
        nodes += 1;

        let mut bound = node.bound;
        let mut branch_point: Option<Vec<f64>> = None;
        let mut relaxed_left = if node.id == 0 {
            model.relaxed_rounds.0
        } else {
            model.relaxed_rounds.1
        };
        let mut warm = node.warm.clone();
        loop {
            let sol = match solve_warm(
                &model.lp,
                &node.lower,
                &node.upper,
                &search.cuts,
                warm.as_deref(),
            ) {
                Ok((s, basis)) => {
                    warm = Some(Rc::new(basis));
                    s
                }
                Err(LpError::Infeasible(_)) => break,
                Err(e) => return Err(e.into()),
            };
            search.lp_iterations += sol.iterations;
            bound = bound.max(sol.objective);
            if bound >= search.cutoff() {
                break;
            }
            if let Some(p) = callback.propose(&sol.x) {
                search.offer(p);
                if bound >= search.cutoff() {
                    break;
                }
            }
            if !search.is_integral(&sol.x) {
                if relaxed_left > 0 {
                    relaxed_left -= 1;
                    let fresh: Vec<Constraint> = callback
                        .separate_relaxed(&sol.x)
                        .into_iter()
                        .filter(|c| c.slack(&sol.x) < -FEAS_TOL)
                        .collect();
                    if !fresh.is_empty() {
                        search.cuts.extend(fresh);
                        continue;
                    }
                }
                branch_point = Some(sol.x);
                break;
            }
            let mut x = sol.x;
            search.snap(&mut x);
            let fresh: Vec<Constraint> = callback
                .separate(&x)
                .into_iter()
                .filter(|c| c.slack(&x) < -FEAS_TOL)
                .collect();
            if fresh.is_empty() {
                search.offer(x);
                break;
            }
            search.cuts.extend(fresh);
        }

        let Some(x) = branch_point else { continue };
        match search.choose_branch(&x) {
            Some(Branch::Sos(g)) => {
                let free: Vec<usize> = model.sos1_groups[g]
                    .iter()
                    .copied()
                    .filter(|&j| node.upper[j] > 0.0)
                    .collect();
                let total: f64 = free.iter().map(|&j| x[j].max(0.0)).sum();
                let mut split = 0;
                let mut best_balance = f64::INFINITY;
                let mut prefix = 0.0;
                for t in 0..free.len().saturating_sub(1) {
                    prefix += x[free[t]].max(0.0);
                    let suffix = total - prefix;
                    if prefix > INT_TOL
                        && suffix > INT_TOL
                        && (prefix - suffix).abs() < best_balance
                    {
                        best_balance = (prefix - suffix).abs();
                        split = t;
                    }
                }
                let (head, tail) = free.split_at(split + 1);
                for zeroed in [tail, head] {
                    let mut upper = node.upper.clone();
                    for &j in zeroed {
                        upper[j] = 0.0;
                    }
                    heap.push(Node {
                        bound,
                        id: next_id,
                        lower: node.lower.clone(),
                        upper,
                        warm: warm.clone(),
                    });
                    next_id += 1;
                }
            }
            Some(Branch::Var(j)) => {
                let mut down_upper = node.upper.clone();
                down_upper[j] = x[j].floor();
                let mut up_lower = node.lower.clone();
                up_lower[j] = x[j].ceil();
                heap.push(Node {
                    bound,
                    id: next_id,
                    lower: node.lower.clone(),
                    upper: down_upper,
                    warm: warm.clone(),
                });
                heap.push(Node {
                    bound,
                    id: next_id + 1,
                    lower: up_lower,
                    upper: node.upper.clone(),
                    warm,
                });
                next_id += 2;
            }
            None => {}
        }
    }

    let best_bound = heap
        .iter()
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min)
        .min(search.incumbent.as_ref().map_or(f64::INFINITY, |(_, o)| *o));
    let (incumbent, objective) = match search.incumbent {
        Some((x, o)) => (Some(x), o),
        None => (None, f64::INFINITY),
    };
    if incumbent.is_none() && status == MilpStatus::Optimal {
        status = MilpStatus::Infeasible;
    }
    Ok(MilpResult {
        status,
        incumbent,
        objective,
        best_bound,
        nodes,
        cuts_added: search.cuts.len(),
        lp_iterations: search.lp_iterations,
        cuts: search.cuts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::{solve_lp, Sense};

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MilpModel {
        let n = values.len();
        let mut lp = LpProblem::new(n);
        lp.objective = values.iter().map(|v| -v).collect();
        lp.upper = vec![1.0; n];
        lp.add_constraint(
            weights.iter().copied().enumerate().collect(),
            Sense::Le,
            cap,
        );
        MilpModel::new(lp, vec![true; n])
    }

    #[test]
    fn knapsack_five_items_matches_enumeration() {
        let values = [10.0, 13.0, 7.0, 8.0, 4.0];
        let weights = [5.0, 7.0, 4.0, 5.0, 2.0];
        let cap = 13.0;
        let mut best = 0.0_f64;
        for mask in 0u32..32 {
            let (mut v, mut w) = (0.0, 0.0);
            for i in 0..5 {
                if mask >> i & 1 == 1 {
                    v += values[i];
                    w += weights[i];
                }
            }
            if w <= cap {
                best = best.max(v);
            }
        }
        let r = solve_milp(&knapsack(&values, &weights, cap), &NoCuts).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert!(
            (-r.objective - best).abs() < 1e-9,
            "{} vs {best}",
            -r.objective
        );
    }

    #[test]
    fn continuous_model_equals_lp() {
        let mut lp = LpProblem::new(3);
        lp.objective = vec![-1.0, -2.0, 0.5];
        lp.upper = vec![4.0, 3.0, 2.0];
        lp.add_constraint(vec![(0, 1.0), (1, 1.0), (2, -1.0)], Sense::Le, 5.0);
        lp.add_constraint(vec![(0, 1.0), (1, 3.0)], Sense::Le, 10.0);
        let direct = solve_lp(&lp).unwrap();
        let r = solve_milp(&MilpModel::new(lp, vec![false; 3]), &NoCuts).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert_eq!(r.nodes, 1);
        assert!((r.objective - direct.objective).abs() < 1e-12);
    }

    #[test]
    fn rejecting_callback_exhausts_binary_model() {
        let n = 3;
        let mut lp = LpProblem::new(n);
        lp.upper = vec![1.0; n];
        lp.objective = vec![1.0, -2.0, 0.5];
        let model = MilpModel::new(lp, vec![true; n]);
        // No-good cut: the point must change in at least one coordinate.
        let reject_all = |x: &[f64]| {
            let mut coeffs = Vec::new();
            let mut rhs = 1.0;
            for (j, v) in x.iter().enumerate() {
                if *v > 0.5 {
                    coeffs.push((j, -1.0));
                    rhs -= 1.0;
                } else {
                    coeffs.push((j, 1.0));
                }
            }
            vec![Constraint::new(coeffs, Sense::Ge, rhs)]
        };
        let r = solve_milp(&model, &reject_all).unwrap();
        assert_eq!(r.status, MilpStatus::Infeasible);
        assert_eq!(r.cuts_added, 8);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn sos1_groups_pick_cheapest_member() {
        // Two one-hot blocks with a coupling row; optimum found by enumeration.
        let mut lp = LpProblem::new(6);
        lp.objective = vec![3.0, 1.0, 2.0, 2.0, 5.0, 1.0];
        lp.upper = vec![1.0; 6];
        lp.add_constraint(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Eq, 1.0);
        lp.add_constraint(vec![(3, 1.0), (4, 1.0), (5, 1.0)], Sense::Eq, 1.0);
        lp.add_constraint(vec![(1, 1.0), (5, 1.0)], Sense::Le, 1.0);
        let mut model = MilpModel::new(lp, vec![true; 6]);
        model.sos1_groups = vec![vec![0, 1, 2], vec![3, 4, 5]];
        let r = solve_milp(&model, &NoCuts).unwrap();
        assert_eq!(r.status, MilpStatus::Optimal);
        assert!((r.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn node_limit_reports_incumbent() {
        let values = [10.0, 13.0, 7.0, 8.0, 4.0, 9.0, 6.0];
        let weights = [5.0, 7.0, 4.0, 5.0, 2.0, 6.0, 3.0];
        let mut m = knapsack(&values, &weights, 15.5);
        m.node_limit = 1;
        m.warm_start = Some(vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let r = solve_milp(&m, &NoCuts).unwrap();
        assert_eq!(r.status, MilpStatus::NodeLimit);
        assert!(r.incumbent.is_some());
        assert!(r.best_bound <= r.objective);
    }

    #[test]
    fn rejects_bad_mask() {
        let m = MilpModel::new(LpProblem::new(2), vec![true]);
        assert!(matches!(
            solve_milp(&m, &NoCuts),
            Err(MilpError::Malformed(_))
        ));
    }
}
