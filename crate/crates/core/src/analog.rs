//! Surface configuration by power minimization over the discrete codebook,
//! solved with outer approximation: a MILP in the one-hot variables plus
//! eigenvector cuts that approximate `Z(w, x, y) >= 0` from outside.
//!
//! ```text
//! minimize    w
//! subject to  Z = [ (w/K) I   I ]  >= 0,     G = P^-1/2 F F^H P^-1/2
//!                 [   I       G ]
//!             one-hot x per element, masked angles off,
//!             one-hot y per element pair, a.(x_p - x_p') = a.y
//! ```
//!
//! The optimum is `K * lambda_max(G^-1)` over the codebook. `G` is scaled
//! internally by a constant so the cut coefficients are O(1); all reported
//! values are in the original units.

use std::cell::RefCell;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use ris_milp::{solve_milp, Constraint, CutCallback, LpProblem, MilpModel, MilpStatus, Sense};

use crate::channel::{assemble_f, CMatrix, PhaseIndexMatrix};
use crate::codebook::{pair_index, whiten, CodebookVectors, PairGrams};
use crate::error::{Error, Result};

/// Eigenvalue threshold below which `Z` counts as infeasible.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct AnalogOptions {
    pub node_limit: usize,
    /// Add the row-balance equalities used under pure line of sight.
    pub los_mode: bool,
    /// Powers below `power_floor * max(p)` are raised to it before whitening.
    pub power_floor: f64,
    /// Most cuts generated per separation call.
    pub max_cuts: usize,
    /// Cut rounds at fractional LP points: at the root, and at other nodes.
    pub relaxed_rounds: (usize, usize),
    /// Record one trace row per separation call.
    pub trace: bool,
}

impl Default for AnalogOptions {
    fn default() -> Self {
        Self {
            node_limit: 50_000,
            los_mode: false,
            power_floor: 1e-4,
            max_cuts: 4,
            relaxed_rounds: (20, 0),
            trace: false,
        }
    }
}

/// `Tr((F~ F~^H)^-1)` with `F~ = P^-1/2 F`, i.e. the power needed to deliver
/// `p` through the ZF precoder of `F`.
pub fn objective_f(f: &CMatrix, p: &[f64]) -> Result<f64> {
    let ft = whiten(std::slice::from_ref(f), p)
        .pop()
        .expect("one matrix");
    trace_inverse(&(&ft * ft.adjoint()))
}

pub fn trace_inverse(g: &CMatrix) -> Result<f64> {
    let chol = g.clone().cholesky().ok_or(Error::Singular)?;
    let inv = chol.inverse();
    let t: f64 = (0..inv.nrows()).map(|i| inv[(i, i)].re).sum();
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(Error::Singular)
    }
}

/// `K * lambda_max(G^-1) = K / lambda_min(G)`: the smallest `w` with `Z >= 0`.
pub fn epigraph_value(g: &CMatrix) -> Result<f64> {
    let lmin = SymmetricEigen::new(g.clone()).eigenvalues.min();
    if lmin > 0.0 {
        Ok(g.nrows() as f64 / lmin)
    } else {
        Err(Error::Singular)
    }
}

/// `[[Re Z, -Im Z], [Im Z, Re Z]]`.
pub fn real_embedding(z: &CMatrix) -> DMatrix<f64> {
    let n = z.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = z[(i, j)];
            r[(i, j)] = v.re;
            r[(i + n, j + n)] = v.re;
            r[(i, j + n)] = -v.im;
            r[(i + n, j)] = v.im;
        }
    }
    r
}

/// Eigenpairs of the real embedding with eigenvalue below `-PSD_TOL`, most
/// negative first. The embedding doubles every eigenvalue; only one vector
/// per complex direction is kept.
pub fn negative_directions(z: &CMatrix, limit: usize) -> (f64, Vec<(f64, Vec<f64>)>) {
    let n = z.nrows();
    let r = real_embedding(z);
    let eig = SymmetricEigen::new(r.clone());
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lmin = eig.eigenvalues[order[0]];
    let mut kept: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut dirs: Vec<Vec<Complex64>> = Vec::new();
    for &i in &order {
        let lam = eig.eigenvalues[i];
        if lam >= -PSD_TOL || kept.len() >= limit {
            break;
        }
        let col = eig.eigenvectors.column(i);
        // The Rayleigh quotient, not the reported eigenvalue, decides: near
        // the boundary the two can differ in sign.
        if col.dot(&(&r * col)) >= -PSD_TOL {
            continue;
        }
        let u: Vec<f64> = col.iter().copied().collect();
        let zc: Vec<Complex64> = (0..n).map(|t| Complex64::new(u[t], u[t + n])).collect();
        let dup = dirs.iter().any(|d| {
            let ip: Complex64 = d.iter().zip(&zc).map(|(a, b)| a.conj() * b).sum();
            ip.norm() > 0.5
        });
        if !dup {
            dirs.push(zc);
            kept.push((lam, u));
        }
    }
    (lmin, kept)
}

#[derive(Debug, Clone)]
pub struct EigenCut {
    /// Real-embedding direction, length `4K`.
    pub u: Vec<f64>,
    /// `u^T Z u >= 0` as a linear row in the model variables.
    pub constraint: Constraint,
}

#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n_elements: usize,
    pub len: usize,
}

impl Layout {
    pub const W: usize = 0;

    pub fn x(&self, p: usize, i: usize) -> usize {
        1 + p * self.len + i
    }

    pub fn y(&self, pair: usize, i: usize) -> usize {
        1 + self.n_elements * self.len + pair * self.len + i
    }

    pub fn n_pairs(&self) -> usize {
        self.n_elements * self.n_elements.saturating_sub(1) / 2
    }

    pub fn num_vars(&self) -> usize {
        1 + (self.n_elements + self.n_pairs()) * self.len
    }
}

#[derive(Debug, Clone)]
pub struct AnalogBfModel {
    pub k_users: usize,
    pub n_r: usize,
    pub cb: CodebookVectors,
    pub layout: Layout,
    /// Grams of the whitened channel divided by `scale`.
    pub grams: PairGrams,
    pub scale: f64,
    /// Bounds on the scaled epigraph variable.
    pub w_bounds: (f64, f64),
    pub milp: MilpModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OaTraceRow {
    pub call: usize,
    pub lambda_min: f64,
    pub w: f64,
    pub trace_objective: f64,
    pub cuts: usize,
}

pub fn write_trace_csv(rows: &[OaTraceRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["call", "lambda_min", "w", "trace_objective", "cuts"])?;
    for r in rows {
        out.write_record(&[
            r.call.to_string(),
            format!("{:e}", r.lambda_min),
            format!("{:e}", r.w),
            format!("{:e}", r.trace_objective),
            r.cuts.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

impl AnalogBfModel {
    /// Builds the MILP for element matrices `H_p o Phi`, frozen powers and
    /// the incumbent configuration (used for the upper bound on `w` and as
    /// a warm start).
    pub fn build(
        elements: &[CMatrix],
        powers: &[f64],
        incumbent: &PhaseIndexMatrix,
        opts: &AnalogOptions,
    ) -> Result<Self> {
        let n = elements.len();
        if n == 0 || incumbent.m.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} element matrices, {} phases",
                n,
                incumbent.m.len()
            )));
        }
        let k = elements[0].nrows();
        if powers.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} powers for {k} users",
                powers.len()
            )));
        }
        if !powers.iter().any(|&p| p > 0.0) {
            return Err(Error::InvalidConfig("all powers are zero".into()));
        }
        let ht = whiten(elements, &floored_powers(powers, opts.power_floor));
        let norms: Vec<f64> = ht.iter().map(|h| h.norm()).collect();
        let mut grams = PairGrams::from_whitened(&ht);
        let fallback = norms.iter().map(|v| v * v).sum::<f64>() / (2.0 * k as f64);
        // Unit smallest eigenvalue at the incumbent keeps Z near the identity
        // scale in the directions that decide feasibility.
        let g_raw = direct_gram_from(&ht, incumbent);
        let scale = match SymmetricEigen::new(g_raw).eigenvalues.min() {
            l if l > 1e-12 * fallback => l,
            _ => fallback,
        };
        if !(scale > 0.0) {
            return Err(Error::Singular);
        }
        let inv = Complex64::new(1.0 / scale, 0.0);
        grams
            .diag
            .iter_mut()
            .chain(grams.cross.iter_mut())
            .for_each(|m| *m *= inv);

        let cb = CodebookVectors::new(incumbent.b_bits);
        let layout = Layout {
            n_elements: n,
            len: cb.len(),
        };
        let kf = k as f64;
        let w_lo = kf * kf / norms.iter().sum::<f64>().powi(2) * scale;

        let mut model = Self {
            k_users: k,
            n_r: incumbent.n_r,
            cb,
            layout,
            grams,
            scale,
            w_bounds: (w_lo, w_lo),
            milp: MilpModel::new(LpProblem::new(0), Vec::new()),
        };
        let g_inc = model.gram_for(incumbent);
        let w_hi = match epigraph_value(&g_inc) {
            Ok(w) => w * (1.0 + 1e-6),
            Err(_) => w_lo * 1e12,
        };
        model.w_bounds = (w_lo.min(w_hi), w_hi);
        model.milp = model.assemble_milp(opts, incumbent);
        Ok(model)
    }

    fn assemble_milp(&self, opts: &AnalogOptions, incumbent: &PhaseIndexMatrix) -> MilpModel {
        let lay = self.layout;
        let len = lay.len;
        let nv = lay.num_vars();
        let mut lp = LpProblem::new(nv);
        lp.objective[Layout::W] = 1.0;
        lp.lower[Layout::W] = self.w_bounds.0;
        lp.upper[Layout::W] = self.w_bounds.1;
        for j in 1..nv {
            lp.upper[j] = 1.0;
        }
        let mut groups = Vec::new();
        for p in 0..lay.n_elements {
            let block: Vec<usize> = (0..len).map(|i| lay.x(p, i)).collect();
            lp.add_constraint(block.iter().map(|&j| (j, 1.0)).collect(), Sense::Eq, 1.0);
            let masked: Vec<(usize, f64)> = (0..len)
                .filter(|&i| self.cb.e_mask[i] != 0.0)
                .map(|i| (lay.x(p, i), 1.0))
                .collect();
            lp.add_constraint(masked, Sense::Eq, 0.0);
            groups.push(block);
        }
        for p in 0..lay.n_elements {
            for p2 in p + 1..lay.n_elements {
                let pair = pair_index(p, p2, lay.n_elements);
                let block: Vec<usize> = (0..len).map(|i| lay.y(pair, i)).collect();
                lp.add_constraint(block.iter().map(|&j| (j, 1.0)).collect(), Sense::Eq, 1.0);
                // Angles are multiples of one step; link in step units.
                let mut link = Vec::with_capacity(3 * len);
                for i in 0..len {
                    let m = self.cb.slot_multiple(i) as f64;
                    if m != 0.0 {
                        link.push((lay.x(p, i), m));
                        link.push((lay.x(p2, i), -m));
                        link.push((lay.y(pair, i), -m));
                    }
                }
                lp.add_constraint(link, Sense::Eq, 0.0);
                groups.push(block);
            }
        }
        if opts.los_mode {
            let n_r = self.n_r;
            for l1 in 0..n_r.saturating_sub(1) {
                let mut row = Vec::new();
                for l2 in 0..n_r {
                    for i in 0..len {
                        let s = self.cb.s[i];
                        if s != 0.0 {
                            row.push((lay.x(l1 * n_r + l2, i), s));
                            row.push((lay.x((l1 + 1) * n_r + l2, i), -s));
                        }
                    }
                }
                if !row.is_empty() {
                    lp.add_constraint(row, Sense::Eq, 0.0);
                }
            }
        }
        let mut integer = vec![true; nv];
        integer[Layout::W] = false;
        let mut milp = MilpModel::new(lp, integer);
        milp.sos1_groups = groups;
        milp.node_limit = opts.node_limit;
        milp.relaxed_rounds = opts.relaxed_rounds;
        milp.gap_tol = 1e-8 * self.w_bounds.1;
        let warm = self.point_for(incumbent, self.w_bounds.1);
        if milp.lp.max_violation(&warm) <= 1e-9 {
            milp.warm_start = Some(warm);
        }
        milp
    }

    /// Model point for a configuration and scaled `w`.
    pub fn point_for(&self, phases: &PhaseIndexMatrix, w: f64) -> Vec<f64> {
        let lay = self.layout;
        let mut x = vec![0.0; lay.num_vars()];
        x[Layout::W] = w;
        for (p, &m) in phases.m.iter().enumerate() {
            x[lay.x(p, self.cb.slot(i64::from(m)))] = 1.0;
        }
        for p in 0..lay.n_elements {
            for p2 in p + 1..lay.n_elements {
                let d = i64::from(phases.m[p]) - i64::from(phases.m[p2]);
                x[lay.y(pair_index(p, p2, lay.n_elements), self.cb.slot(d))] = 1.0;
            }
        }
        x
    }

    pub fn decode(&self, point: &[f64]) -> Result<PhaseIndexMatrix> {
        let lay = self.layout;
        let mut m = Vec::with_capacity(lay.n_elements);
        for p in 0..lay.n_elements {
            let block: Vec<f64> = (0..lay.len).map(|i| point[lay.x(p, i)].round()).collect();
            m.push(
                self.cb
                    .decode_index(&crate::codebook::OneHotPhase { x: block })?,
            );
        }
        PhaseIndexMatrix::new(self.n_r, self.cb.b_bits, m)
    }

    /// Scaled Gram at an arbitrary (possibly fractional) point; affine in
    /// the binaries.
    pub fn gram_at(&self, point: &[f64]) -> CMatrix {
        let lay = self.layout;
        let cb = &self.cb;
        let dot =
            |base: usize, v: &[f64]| -> f64 { (0..lay.len).map(|i| point[base + i] * v[i]).sum() };
        let n = lay.n_elements;
        let sin: Vec<f64> = (0..n).map(|p| dot(lay.x(p, 0), &cb.s)).collect();
        let cos: Vec<f64> = (0..n).map(|p| dot(lay.x(p, 0), &cb.c)).collect();
        let mut g = CMatrix::zeros(self.k_users, self.k_users);
        for p in 0..n {
            g += &self.grams.diag[p] * Complex64::new((2.0 + 2.0 * sin[p]) / 4.0, 0.0);
        }
        for p in 0..n {
            for p2 in p + 1..n {
                let idx = pair_index(p, p2, n);
                let f = crate::codebook::pair_factor(
                    sin[p],
                    sin[p2],
                    cos[p],
                    cos[p2],
                    dot(lay.y(idx, 0), &cb.c),
                    dot(lay.y(idx, 0), &cb.s),
                ) / 4.0;
                let m = &self.grams.cross[idx] * f;
                g += &m + m.adjoint();
            }
        }
        g
    }

    /// Scaled Gram of a configuration.
    pub fn gram_for(&self, phases: &PhaseIndexMatrix) -> CMatrix {
        self.gram_at(&self.point_for(phases, 0.0))
    }

    /// `Z` at a point, in scaled units.
    pub fn z_at(&self, point: &[f64]) -> CMatrix {
        let k = self.k_users;
        let g = self.gram_at(point);
        let mut z = CMatrix::zeros(2 * k, 2 * k);
        let one = Complex64::new(1.0, 0.0);
        for i in 0..k {
            z[(i, i)] = Complex64::new(point[Layout::W] / k as f64, 0.0);
            z[(i, i + k)] = one;
            z[(i + k, i)] = one;
        }
        z.view_mut((k, k), (k, k)).copy_from(&g);
        z
    }

    /// Linear row for `u^T R(Z) u >= 0`.
    pub fn cut_for(&self, u: &[f64]) -> Constraint {
        let k = self.k_users;
        let n2 = 2 * k;
        let z: Vec<Complex64> = (0..n2).map(|t| Complex64::new(u[t], u[t + n2])).collect();
        let (z1, z2) = z.split_at(k);
        let lay = self.layout;
        let cb = &self.cb;
        let n = lay.n_elements;
        let quad = |a: &CMatrix| -> Complex64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..k {
                for j in 0..k {
                    acc += z2[i].conj() * a[(i, j)] * z2[j];
                }
            }
            acc
        };
        let mut coef = vec![0.0; lay.num_vars()];
        coef[Layout::W] = z1.iter().map(|v| v.norm_sqr()).sum::<f64>() / k as f64;
        let mut constant: f64 = 2.0
            * z1.iter()
                .zip(z2)
                .map(|(a, b)| (a.conj() * b).re)
                .sum::<f64>();
        for p in 0..n {
            let alpha = quad(&self.grams.diag[p]).re;
            constant += alpha / 2.0;
            for i in 0..lay.len {
                coef[lay.x(p, i)] += alpha * cb.s[i] / 2.0;
            }
        }
        for p in 0..n {
            for p2 in p + 1..n {
                let idx = pair_index(p, p2, n);
                let alpha = quad(&self.grams.cross[idx]);
                let (re, im) = (alpha.re, alpha.im);
                constant += re / 2.0;
                for i in 0..lay.len {
                    let (c, s) = (cb.c[i], cb.s[i]);
                    coef[lay.x(p, i)] += (re * s + im * c) / 2.0;
                    coef[lay.x(p2, i)] += (re * s - im * c) / 2.0;
                    coef[lay.y(idx, i)] += (re * c - im * s) / 2.0;
                }
            }
        }
        let coeffs = coef
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        Constraint::new(coeffs, Sense::Ge, -constant)
    }

    /// Cuts for the most negative directions of `Z` at `point`.
    pub fn eigen_separation(&self, point: &[f64], limit: usize) -> (f64, Vec<EigenCut>) {
        let (lmin, dirs) = negative_directions(&self.z_at(point), limit);
        let cuts = dirs
            .into_iter()
            .map(|(_, u)| EigenCut {
                constraint: self.cut_for(&u),
                u,
            })
            .collect();
        (lmin, cuts)
    }

    /// Rounds each phase block to its largest unmasked entry and pairs the
    /// configuration with its exact epigraph value.
    pub fn round_point(&self, point: &[f64]) -> Option<Vec<f64>> {
        let lay = self.layout;
        let mut m = Vec::with_capacity(lay.n_elements);
        for p in 0..lay.n_elements {
            let mut best = (self.cb.zero_slot(), f64::NEG_INFINITY);
            for i in self.cb.zero_slot()..lay.len {
                if point[lay.x(p, i)] > best.1 {
                    best = (i, point[lay.x(p, i)]);
                }
            }
            m.push(self.cb.slot_multiple(best.0) as u32);
        }
        let phases = PhaseIndexMatrix {
            n_r: self.n_r,
            b_bits: self.cb.b_bits,
            m,
        };
        let w = epigraph_value(&self.gram_for(&phases)).ok()? * (1.0 + 1e-9);
        if w > self.w_bounds.1 || w < self.w_bounds.0 {
            return None;
        }
        Some(self.point_for(&phases, w))
    }
}

struct Separator<'a> {
    model: &'a AnalogBfModel,
    limit: usize,
    trace: Option<RefCell<Vec<OaTraceRow>>>,
}

impl CutCallback for Separator<'_> {
    fn separate(&self, point: &[f64]) -> Vec<Constraint> {
        let (lmin, cuts) = self.model.eigen_separation(point, self.limit);
        if let Some(rows) = &self.trace {
            let mut rows = rows.borrow_mut();
            let call = rows.len();
            let g = self.model.gram_at(point);
            rows.push(OaTraceRow {
                call,
                lambda_min: lmin,
                w: point[Layout::W] / self.model.scale,
                trace_objective: trace_inverse(&g).map_or(f64::INFINITY, |t| t / self.model.scale),
                cuts: cuts.len(),
            });
        }
        cuts.into_iter().map(|c| c.constraint).collect()
    }

    fn separate_relaxed(&self, point: &[f64]) -> Vec<Constraint> {
        let (_, cuts) = self.model.eigen_separation(point, self.limit);
        cuts.into_iter().map(|c| c.constraint).collect()
    }

    fn propose(&self, point: &[f64]) -> Option<Vec<f64>> {
        self.model.round_point(point)
    }
}

#[derive(Debug, Clone)]
pub struct AnalogOutcome {
    pub phases: PhaseIndexMatrix,
    /// Epigraph variable at the optimum, original units.
    pub w_star: f64,
    /// `K * lambda_max(G^-1)` of the decoded configuration.
    pub epigraph: f64,
    /// `Tr(G^-1)` of the decoded configuration.
    pub trace_objective: f64,
    pub status: MilpStatus,
    pub nodes: usize,
    pub cuts: usize,
    pub lp_iterations: usize,
    pub trace: Vec<OaTraceRow>,
}

/// Outer-approximation analog step for frozen powers `p`.
pub fn algorithm2(
    elements: &[CMatrix],
    powers: &[f64],
    incumbent: &PhaseIndexMatrix,
    opts: &AnalogOptions,
) -> Result<AnalogOutcome> {
    let model = AnalogBfModel::build(elements, powers, incumbent, opts)?;
    let sep = Separator {
        model: &model,
        limit: opts.max_cuts,
        trace: opts.trace.then(RefCell::default),
    };
    let res = solve_milp(&model.milp, &sep)?;
    let trace = sep.trace.map(RefCell::into_inner).unwrap_or_default();
    let (phases, w_scaled) = match &res.incumbent {
        Some(x) => (model.decode(x)?, x[Layout::W]),
        None => (incumbent.clone(), model.w_bounds.1),
    };
    let g = model.gram_for(&phases);
    let epigraph = epigraph_value(&g).map_or(f64::INFINITY, |w| w / model.scale);
    let trace_objective = trace_inverse(&g).map_or(f64::INFINITY, |t| t / model.scale);
    Ok(AnalogOutcome {
        phases,
        w_star: w_scaled / model.scale,
        epigraph,
        trace_objective,
        status: res.status,
        nodes: res.nodes,
        cuts: res.cuts_added,
        lp_iterations: res.lp_iterations,
        trace,
    })
}

/// Powers with the switched-off users raised to `floor * max(p)`, so that
/// `P^-1/2` stays finite.
pub fn floored_powers(powers: &[f64], floor: f64) -> Vec<f64> {
    let pmax = powers.iter().cloned().fold(0.0, f64::max);
    powers.iter().map(|&p| p.max(floor * pmax)).collect()
}

/// Unscaled Gram `P^-1/2 F F^H P^-1/2` of a configuration, computed directly.
pub fn direct_gram(elements: &[CMatrix], powers: &[f64], phases: &PhaseIndexMatrix) -> CMatrix {
    direct_gram_from(&whiten(elements, powers), phases)
}

fn direct_gram_from(whitened: &[CMatrix], phases: &PhaseIndexMatrix) -> CMatrix {
    let ft = assemble_f(whitened, &phases.responses());
    &ft * ft.adjoint()
}
