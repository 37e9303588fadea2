//! Dense bounded-variable primal simplex on an explicit tableau.
//!
//! Column layout: structurals `0..n`, one slack per row `n..n+m`, one
//! artificial per row `n+m..n+2m`. Every row reads `a.x + s (+ art) = b`;
//! slack bounds encode the row sense.

use nalgebra::DMatrix;

use crate::error::LpError;
use crate::lp::{Constraint, Sense};

const PIVOT_TOL: f64 = 1e-7;
/// Pivot threshold for the conservative retry after a singular basis.
const SAFE_PIVOT_TOL: f64 = 1e-5;
const OPT_TOL: f64 = 1e-10;
const PRIMAL_TOL: f64 = 1e-9;
const PHASE1_TOL: f64 = 1e-8;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_BEFORE_BLAND: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum State {
    Basic,
    Lower,
    Upper,
    Zero,
}

/// Column identity that survives appending rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Col {
    Struct(usize),
    Slack(usize),
    Art(usize),
}

/// Final basis of a solve, reusable as a dual-feasible start after bound
/// changes and appended rows.
#[derive(Debug, Clone)]
pub(crate) struct WarmBasis {
    basis: Vec<Col>,
    /// Nonbasic states of structurals followed by slacks.
    states: Vec<State>,
}

pub(crate) struct Simplex {
    m: usize,
    ncols: usize,
    n_struct: usize,
    a_ext: Vec<f64>,
    b: Vec<f64>,
    tab: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lo: Vec<f64>,
    up: Vec<f64>,
    cost: Vec<f64>,
    phase2_cost: Vec<f64>,
    dj: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    max_iterations: usize,
    pivot_tol: f64,
}

impl Simplex {
    pub(crate) fn new(
        n: usize,
        rows: &[&Constraint],
        objective: &[f64],
        lower: &[f64],
        upper: &[f64],
    ) -> Self {
        let m = rows.len();
        let ncols = n + 2 * m;
        let mut a_ext = vec![0.0; m * ncols];
        let mut b = vec![0.0; m];
        let mut lo = vec![0.0; ncols];
        let mut up = vec![0.0; ncols];
        lo[..n].copy_from_slice(lower);
        up[..n].copy_from_slice(upper);
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                a_ext[i * ncols + j] += a;
            }
            a_ext[i * ncols + n + i] = 1.0;
            b[i] = row.rhs;
            let (sl, su) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lo[n + i] = sl;
            up[n + i] = su;
        }
        let mut phase2_cost = vec![0.0; ncols];
        phase2_cost[..n].copy_from_slice(objective);

        let mut state = vec![State::Lower; ncols];
        for j in 0..n {
            state[j] = initial_state(lo[j], up[j]);
        }
        let mut s = Self {
            m,
            ncols,
            n_struct: n,
            a_ext,
            b,
            tab: vec![0.0; m * ncols],
            beta: vec![0.0; m],
            basis: vec![0; m],
            state,
            lo,
            up,
            cost: vec![0.0; ncols],
            phase2_cost,
            dj: vec![0.0; ncols],
            iterations: 0,
            since_refactor: 0,
            max_iterations: 50_000 + 50 * (m + ncols),
            pivot_tol: PIVOT_TOL,
        };
        s.initial_basis();
        s
    }

    fn col(&self, c: Col) -> usize {
        match c {
            Col::Struct(j) => j,
            Col::Slack(i) => self.n_struct + i,
            Col::Art(i) => self.n_struct + self.m + i,
        }
    }

    pub(crate) fn export_basis(&self) -> WarmBasis {
        let (n, m) = (self.n_struct, self.m);
        let basis = self
            .basis
            .iter()
            .map(|&j| {
                if j < n {
                    Col::Struct(j)
                } else if j < n + m {
                    Col::Slack(j - n)
                } else {
                    Col::Art(j - n - m)
                }
            })
            .collect();
        WarmBasis {
            basis,
            states: self.state[..n + m].to_vec(),
        }
    }

    /// Starts from `warm` (rows beyond those it knew get their slack basic).
    /// Returns `None` when the basis is unusable or not dual feasible.
    pub(crate) fn new_warm(
        n: usize,
        rows: &[&Constraint],
        objective: &[f64],
        lower: &[f64],
        upper: &[f64],
        warm: &WarmBasis,
    ) -> Option<Self> {
        let m_old = warm.basis.len();
        if warm.states.len() != n + m_old || rows.len() < m_old {
            return None;
        }
        let mut s = Self::new(n, rows, objective, lower, upper);
        let (m, ncols) = (s.m, s.ncols);
        for i in 0..m {
            let art = n + m + i;
            for r in 0..m {
                s.a_ext[r * ncols + art] = if r == i { 1.0 } else { 0.0 };
            }
            s.lo[art] = 0.0;
            s.up[art] = 0.0;
        }
        s.cost.copy_from_slice(&s.phase2_cost);
        for j in 0..n + m {
            s.state[j] = if j < n {
                warm.states[j]
            } else if j - n < m_old {
                warm.states[n + (j - n)]
            } else {
                State::Basic
            };
        }
        for j in n + m..ncols {
            s.state[j] = State::Lower;
        }
        let mut basis = Vec::with_capacity(m);
        for c in &warm.basis {
            basis.push(s.col(*c));
        }
        for i in m_old..m {
            basis.push(n + i);
        }
        for &j in &basis {
            s.state[j] = State::Basic;
        }
        if (0..ncols).filter(|&j| s.state[j] == State::Basic).count() != m {
            return None;
        }
        s.basis = basis;
        for j in 0..ncols {
            if s.state[j] == State::Basic {
                continue;
            }
            let (lo, up) = (s.lo[j], s.up[j]);
            s.state[j] = match s.state[j] {
                _ if lo == up => State::Lower,
                State::Lower if !lo.is_finite() => initial_state(lo, up),
                State::Upper if !up.is_finite() => initial_state(lo, up),
                State::Zero if lo.is_finite() || up.is_finite() => initial_state(lo, up),
                st => st,
            };
        }
        s.refactor().ok()?;
        let mut flipped = false;
        for j in 0..ncols {
            if s.state[j] == State::Basic || s.lo[j] == s.up[j] {
                continue;
            }
            let d = s.dj[j];
            match s.state[j] {
                State::Lower if d < -OPT_TOL => {
                    if !s.up[j].is_finite() {
                        return None;
                    }
                    s.state[j] = State::Upper;
                    flipped = true;
                }
                State::Upper if d > OPT_TOL => {
                    if !s.lo[j].is_finite() {
                        return None;
                    }
                    s.state[j] = State::Lower;
                    flipped = true;
                }
                State::Zero if d.abs() > OPT_TOL => return None,
                _ => {}
            }
        }
        if flipped {
            s.refactor().ok()?;
        }
        Some(s)
    }

    /// Dual simplex from a dual-feasible basis, then primal clean-up.
    pub(crate) fn solve_warm(&mut self) -> Result<(), LpError> {
        self.dual_run()?;
        self.run()?;
        for _ in 0..3 {
            self.refactor()?;
            if self.primal_violation() > PRIMAL_TOL {
                self.dual_run()?;
            }
            self.clamp_basics();
            if self.pricing(false).is_none() {
                return Ok(());
            }
            self.run()?;
        }
        Ok(())
    }

    fn primal_violation(&self) -> f64 {
        (0..self.m)
            .map(|i| {
                let bv = self.basis[i];
                (self.lo[bv] - self.beta[i])
                    .max(self.beta[i] - self.up[bv])
                    .max(0.0)
            })
            .fold(0.0, f64::max)
    }

    fn dual_run(&mut self) -> Result<(), LpError> {
        let ncols = self.ncols;
        let cap = self.iterations + 20 * (self.m + ncols) + 1000;
        loop {
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let bv = self.basis[i];
                let v = (self.lo[bv] - self.beta[i]).max(self.beta[i] - self.up[bv]);
                if v > PRIMAL_TOL && leave.is_none_or(|(_, w)| v > w) {
                    leave = Some((i, v));
                }
            }
            let Some((r, viol)) = leave else {
                return Ok(());
            };
            if self.iterations >= cap {
                return Err(LpError::IterationLimit(cap));
            }
            self.iterations += 1;
            let bv = self.basis[r];
            let to_lower = self.beta[r] < self.lo[bv];
            let target = if to_lower { self.lo[bv] } else { self.up[bv] };
            let delta = target - self.beta[r];

            let mut enter: Option<(usize, f64, f64)> = None;
            for j in 0..ncols {
                if self.state[j] == State::Basic || self.up[j] - self.lo[j] <= 0.0 {
                    continue;
                }
                let a = self.tab[r * ncols + j];
                if a.abs() <= self.pivot_tol {
                    continue;
                }
                // Moving x_j by dx changes x_B(r) by -a * dx.
                let dx_sign = -delta.signum() * a.signum();
                let ok = match self.state[j] {
                    State::Lower => dx_sign > 0.0,
                    State::Upper => dx_sign < 0.0,
                    State::Zero => true,
                    State::Basic => false,
                };
                if !ok {
                    continue;
                }
                let ratio = self.dj[j].abs() / a.abs();
                let better = match enter {
                    None => true,
                    Some((_, best, best_a)) => {
                        ratio < best - 1e-12 || (ratio <= best + 1e-12 && a.abs() > best_a)
                    }
                };
                if better {
                    enter = Some((j, ratio, a.abs()));
                }
            }
            let Some((j, _, _)) = enter else {
                return Err(LpError::Infeasible(viol));
            };
            let a = self.tab[r * ncols + j];
            let dx = -delta / a;
            let entering_value = self.value(j) + dx;
            for i in 0..self.m {
                let t = self.tab[i * ncols + j];
                if t != 0.0 {
                    self.beta[i] -= t * dx;
                }
            }
            self.pivot(r, j);
            self.state[bv] = if to_lower { State::Lower } else { State::Upper };
            self.basis[r] = j;
            self.state[j] = State::Basic;
            self.beta[r] = entering_value;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
        }
    }

    /// Larger pivot threshold and refactorization after every pivot.
    pub(crate) fn conservative(mut self) -> Self {
        self.pivot_tol = SAFE_PIVOT_TOL;
        self
    }

    pub(crate) fn add_iterations(&mut self, n: usize) {
        self.iterations += n;
    }

    pub(crate) fn iterations(&self) -> usize {
        self.iterations
    }

    fn value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lo[j],
            State::Upper => self.up[j],
            State::Zero => 0.0,
            State::Basic => {
                let r = self
                    .basis
                    .iter()
                    .position(|&c| c == j)
                    .expect("basic column in basis");
                self.beta[r]
            }
        }
    }

    /// Slack (or artificial where the slack cannot absorb the residual) basis.
    fn initial_basis(&mut self) {
        let (n, m, ncols) = (self.n_struct, self.m, self.ncols);
        for i in 0..m {
            let mut resid = self.b[i];
            for j in 0..n {
                let a = self.a_ext[i * ncols + j];
                if a != 0.0 {
                    resid -= a * self.value(j);
                }
            }
            let slack = n + i;
            let art = n + m + i;
            if resid >= self.lo[slack] - PRIMAL_TOL && resid <= self.up[slack] + PRIMAL_TOL {
                self.basis[i] = slack;
                self.state[slack] = State::Basic;
                self.beta[i] = resid;
                self.lo[art] = 0.0;
                self.up[art] = 0.0;
                self.state[art] = State::Lower;
                for j in 0..ncols {
                    self.tab[i * ncols + j] = self.a_ext[i * ncols + j];
                }
            } else {
                let target = resid.clamp(self.lo[slack], self.up[slack]);
                self.state[slack] = if target == self.lo[slack] {
                    State::Lower
                } else {
                    State::Upper
                };
                let sigma = if resid - target > 0.0 { 1.0 } else { -1.0 };
                self.a_ext[i * ncols + art] = sigma;
                self.lo[art] = 0.0;
                self.up[art] = f64::INFINITY;
                self.cost[art] = 1.0;
                self.basis[i] = art;
                self.state[art] = State::Basic;
                self.beta[i] = (resid - target).abs();
                for j in 0..ncols {
                    self.tab[i * ncols + j] = sigma * self.a_ext[i * ncols + j];
                }
            }
        }
        self.recompute_reduced_costs();
    }

    fn recompute_reduced_costs(&mut self) {
        let ncols = self.ncols;
        self.dj.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * ncols..(i + 1) * ncols];
                for (d, t) in self.dj.iter_mut().zip(row) {
                    *d -= cb * t;
                }
            }
        }
        for &j in &self.basis {
            self.dj[j] = 0.0;
        }
    }

    pub(crate) fn solve(&mut self) -> Result<(), LpError> {
        let n_art_basic = self
            .basis
            .iter()
            .filter(|&&j| j >= self.n_struct + self.m)
            .count();
        if n_art_basic > 0 {
            self.run()?;
            self.refactor()?;
            let infeas: f64 = (0..self.m)
                .filter(|&i| self.basis[i] >= self.n_struct + self.m)
                .map(|i| self.beta[i].abs())
                .sum();
            let scale = 1.0 + self.b.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if infeas > PHASE1_TOL * scale {
                return Err(LpError::Infeasible(infeas));
            }
            self.retire_artificials();
        }
        self.cost.copy_from_slice(&self.phase2_cost);
        self.recompute_reduced_costs();
        self.run()?;
        // Clean up drift and re-optimize if the fresh factorization disagrees.
        for _ in 0..3 {
            self.refactor()?;
            self.clamp_basics();
            if self.pricing(false).is_none() {
                return Ok(());
            }
            self.run()?;
        }
        Ok(())
    }

    fn retire_artificials(&mut self) {
        let first_art = self.n_struct + self.m;
        for j in first_art..self.ncols {
            self.lo[j] = 0.0;
            self.up[j] = 0.0;
            self.cost[j] = 0.0;
            if self.state[j] != State::Basic {
                self.state[j] = State::Lower;
            }
        }
        for r in 0..self.m {
            if self.basis[r] < first_art {
                continue;
            }
            let ncols = self.ncols;
            let candidate = (0..first_art)
                .filter(|&j| self.state[j] != State::Basic)
                .max_by(|&a, &b| {
                    self.tab[r * ncols + a]
                        .abs()
                        .partial_cmp(&self.tab[r * ncols + b].abs())
                        .unwrap()
                        .then(b.cmp(&a))
                });
            if let Some(j) = candidate {
                if self.tab[r * ncols + j].abs() > 1e-7 {
                    let entering_value = self.value(j);
                    let leaving = self.basis[r];
                    self.pivot(r, j);
                    self.state[leaving] = State::Lower;
                    self.basis[r] = j;
                    self.state[j] = State::Basic;
                    self.beta[r] = entering_value;
                }
            }
        }
    }

    /// Entering column and its direction of motion (+1 up, -1 down).
    fn pricing(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            if self.state[j] == State::Basic || self.up[j] - self.lo[j] <= 0.0 {
                continue;
            }
            let d = self.dj[j];
            let dir = match self.state[j] {
                State::Lower if d < -OPT_TOL => 1.0,
                State::Upper if d > OPT_TOL => -1.0,
                State::Zero if d < -OPT_TOL => 1.0,
                State::Zero if d > OPT_TOL => -1.0,
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            if d.abs() > best_score {
                best_score = d.abs();
                best = Some((j, dir));
            }
        }
        best
    }

    fn run(&mut self) -> Result<(), LpError> {
        let ncols = self.ncols;
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate > DEGENERATE_BEFORE_BLAND;
            let Some((j, dir)) = self.pricing(bland) else {
                return Ok(());
            };
            if self.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit(self.max_iterations));
            }
            self.iterations += 1;

            // Ratio test.
            let mut theta = self.up[j] - self.lo[j];
            if self.state[j] == State::Zero {
                theta = f64::INFINITY;
            }
            let mut limits: Vec<(usize, f64, f64)> = Vec::new();
            let mut tmin = f64::INFINITY;
            for i in 0..self.m {
                let alpha = dir * self.tab[i * ncols + j];
                if alpha.abs() <= self.pivot_tol {
                    continue;
                }
                let bv = self.basis[i];
                let t = if alpha > 0.0 {
                    if self.lo[bv].is_finite() {
                        (self.beta[i] - self.lo[bv]) / alpha
                    } else {
                        continue;
                    }
                } else if self.up[bv].is_finite() {
                    (self.up[bv] - self.beta[i]) / (-alpha)
                } else {
                    continue;
                };
                let t = t.max(0.0);
                tmin = tmin.min(t);
                limits.push((i, t, alpha));
            }
            let mut leave: Option<usize> = None;
            if tmin < theta {
                let tie = tmin + 1e-10 * (1.0 + tmin);
                let pick = limits.iter().filter(|&&(_, t, _)| t <= tie).min_by(|a, b| {
                    if bland {
                        self.basis[a.0].cmp(&self.basis[b.0])
                    } else {
                        b.2.abs()
                            .partial_cmp(&a.2.abs())
                            .unwrap()
                            .then(self.basis[a.0].cmp(&self.basis[b.0]))
                    }
                });
                if let Some(&(r, _, _)) = pick {
                    leave = Some(r);
                    theta = tmin;
                }
            }
            if !theta.is_finite() {
                return Err(LpError::Unbounded(j));
            }
            degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };

            let entering_value = self.value(j) + dir * theta;
            if theta != 0.0 {
                for i in 0..self.m {
                    let t = self.tab[i * ncols + j];
                    if t != 0.0 {
                        self.beta[i] -= dir * theta * t;
                    }
                }
            }
            match leave {
                None => {
                    self.state[j] = if dir > 0.0 {
                        State::Upper
                    } else {
                        State::Lower
                    };
                }
                Some(r) => {
                    let leaving = self.basis[r];
                    let alpha = dir * self.tab[r * ncols + j];
                    self.pivot(r, j);
                    self.state[leaving] = if alpha > 0.0 {
                        State::Lower
                    } else {
                        State::Upper
                    };
                    self.basis[r] = j;
                    self.state[j] = State::Basic;
                    self.beta[r] = entering_value;
                    self.since_refactor += 1;
                    if self.since_refactor >= REFACTOR_EVERY || self.pivot_tol > PIVOT_TOL {
                        self.refactor()?;
                        self.clamp_basics();
                    }
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let ncols = self.ncols;
        let piv = self.tab[r * ncols + j];
        let (before, rest) = self.tab.split_at_mut(r * ncols);
        let (prow, after) = rest.split_at_mut(ncols);
        for v in prow.iter_mut() {
            *v /= piv;
        }
        prow[j] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[j] = 0.0;
            }
        };
        before.chunks_mut(ncols).for_each(eliminate);
        after.chunks_mut(ncols).for_each(eliminate);
        let f = self.dj[j];
        if f != 0.0 {
            for (d, p) in self.dj.iter_mut().zip(prow.iter()) {
                *d -= f * p;
            }
        }
        self.dj[j] = 0.0;
    }

    /// Rebuilds the tableau, basic values and reduced costs from scratch.
    fn refactor(&mut self) -> Result<(), LpError> {
        let (m, ncols) = (self.m, self.ncols);
        self.since_refactor = 0;
        if m == 0 {
            self.recompute_reduced_costs();
            return Ok(());
        }
        let bmat = DMatrix::from_fn(m, m, |i, k| self.a_ext[i * ncols + self.basis[k]]);
        let lu = bmat.lu();
        let full = DMatrix::from_fn(m, ncols, |i, j| self.a_ext[i * ncols + j]);
        let tab = lu.solve(&full).ok_or(LpError::SingularBasis)?;
        let mut rhs = nalgebra::DVector::from_column_slice(&self.b);
        for j in 0..ncols {
            if self.state[j] == State::Basic {
                continue;
            }
            let v = self.value(j);
            if v != 0.0 {
                for i in 0..m {
                    rhs[i] -= self.a_ext[i * ncols + j] * v;
                }
            }
        }
        let beta = lu.solve(&rhs).ok_or(LpError::SingularBasis)?;
        if tab.iter().any(|v| !v.is_finite()) {
            return Err(LpError::SingularBasis);
        }
        for i in 0..m {
            for j in 0..ncols {
                self.tab[i * ncols + j] = tab[(i, j)];
            }
            self.beta[i] = beta[i];
        }
        self.recompute_reduced_costs();
        Ok(())
    }

    fn clamp_basics(&mut self) {
        for i in 0..self.m {
            let bv = self.basis[i];
            self.beta[i] = self.beta[i].clamp(self.lo[bv], self.up[bv]);
        }
    }

    pub(crate) fn primal_values(&self) -> Vec<f64> {
        let mut x: Vec<f64> = (0..self.n_struct)
            .map(|j| match self.state[j] {
                State::Lower => self.lo[j],
                State::Upper => self.up[j],
                State::Zero => 0.0,
                State::Basic => 0.0,
            })
            .collect();
        for (i, &bv) in self.basis.iter().enumerate() {
            if bv < self.n_struct {
                x[bv] = self.beta[i];
            }
        }
        x
    }
}

fn initial_state(lo: f64, up: f64) -> State {
    if lo.is_finite() {
        State::Lower
    } else if up.is_finite() {
        State::Upper
    } else {
        State::Zero
    }
}
