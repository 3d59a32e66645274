//! Mode-space discretization of `T`: unknown profiles at the radial nodes
//! `s_0 = 1, …, s_{n-2}` (the value at `s = 0` is pinned to zero by decay),
//! collocation of the interior slots at `s_1, …, s_{n-2}` and the boundary
//! slots at `s = 1`.
//!
//! The flat operator is rotation invariant, so it acts block-diagonally with
//! one block per `(L, parity)`. Each block is a second-order ODE operator in
//! `s`; its coefficients are read off from `apply_t` acting on the probe
//! profiles `1, s, s²`, which the grid differentiates exactly.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::ops::{apply_dphi, apply_t};
use crate::error::{Error, Result};
use crate::field::{Discretization, ScalarField, SymTensorField};
use crate::geometry::{MetricState, ResidualVector};
use crate::harmonics::Harmonic;
use crate::modes::{
    analyze_shell, transform_from_modes, transform_to_modes, FieldKind, ModeKey, ModeSpectrum, Parity,
};
use crate::symmetry::{reflection_project, symmetry_deviation};

/// Unknown profile families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Var {
    /// Tensor profile `a, b, c, d` by slot index.
    Tensor(usize),
    Lapse,
}

/// Equation families: interior tensor/scalar rows and boundary rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Eqn {
    Interior(usize),
    InteriorScalar,
    Gauge(usize),
    Metric(usize),
    MeanCurvature,
}

fn vars(l: usize, parity: Parity) -> Vec<Var> {
    match parity {
        Parity::Even => {
            let mut v = vec![Var::Tensor(0)];
            if l >= 1 {
                v.push(Var::Tensor(1));
            }
            if l >= 2 {
                v.push(Var::Tensor(2));
            }
            v.push(Var::Tensor(3));
            v.push(Var::Lapse);
            v
        }
        Parity::Odd => {
            if l >= 2 {
                vec![Var::Tensor(1), Var::Tensor(2)]
            } else {
                vec![Var::Tensor(1)]
            }
        }
    }
}

fn interior_eqns(l: usize, parity: Parity) -> Vec<Eqn> {
    vars(l, parity)
        .into_iter()
        .map(|v| match v {
            Var::Tensor(k) => Eqn::Interior(k),
            Var::Lapse => Eqn::InteriorScalar,
        })
        .collect()
}

fn boundary_eqns(l: usize, parity: Parity) -> Vec<Eqn> {
    match parity {
        Parity::Even => {
            let mut e = vec![Eqn::Gauge(0)];
            if l >= 1 {
                e.push(Eqn::Gauge(1));
            }
            if l >= 2 {
                e.push(Eqn::Metric(2));
            }
            e.push(Eqn::Metric(3));
            e.push(Eqn::MeanCurvature);
            e
        }
        Parity::Odd => {
            let mut e = vec![Eqn::Gauge(1)];
            if l >= 2 {
                e.push(Eqn::Metric(2));
            }
            e
        }
    }
}

/// Ordered set of modes carried by the unknown vector.
#[derive(Debug, Clone)]
pub struct ModeLayout {
    pub disc: Discretization,
    pub keys: Vec<ModeKey>,
    offsets: Vec<usize>,
    len: usize,
}

impl ModeLayout {
    fn from_keys(disc: &Discretization, keys: Vec<ModeKey>) -> Self {
        let m = disc.grid.n_r() - 1;
        let mut offsets = Vec::with_capacity(keys.len());
        let mut len = 0;
        for k in &keys {
            offsets.push(len);
            len += vars(k.harmonic.l, k.parity).len() * m;
        }
        Self {
            disc: disc.clone(),
            keys,
            offsets,
            len,
        }
    }

    /// Every mode up to the grid truncation.
    pub fn full(disc: &Discretization) -> Self {
        let mut keys = Vec::new();
        for h in Harmonic::all(disc.grid.lmax()) {
            keys.push(ModeKey { harmonic: h, parity: Parity::Even });
            if h.l >= 1 {
                keys.push(ModeKey { harmonic: h, parity: Parity::Odd });
            }
        }
        Self::from_keys(disc, keys)
    }

    /// Modes whose fields are invariant under all coordinate reflections,
    /// detected by synthesizing each candidate and testing it.
    pub fn symmetric(disc: &Discretization) -> Self {
        let full = Self::full(disc);
        let keys = full
            .keys
            .par_iter()
            .copied()
            .filter(|key| {
                let mut sp = ModeSpectrum::new(FieldKind::Tensor, disc.grid.lmax(), disc.grid.n_r());
                let p = sp.entry(*key).expect("key within truncation");
                for k in 0..4 {
                    p.get_mut(k).iter_mut().for_each(|v| *v = 1.0);
                }
                let t: SymTensorField = transform_from_modes(&sp, disc).expect("consistent grid");
                symmetry_deviation(&t, disc).1 < 1e-10 * (1.0 + t.max_abs())
            })
            .collect();
        Self::from_keys(disc, keys)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn m(&self) -> usize {
        self.disc.grid.n_r() - 1
    }

    /// Mode coefficients of a state at the unknown nodes.
    pub fn pack_state(&self, state: &MetricState) -> Vec<f64> {
        let th = transform_to_modes(&state.theta);
        let ph = transform_to_modes(&state.lapse_pert);
        let m = self.m();
        let mut x = vec![0.0; self.len];
        for (ki, key) in self.keys.iter().enumerate() {
            for (vi, v) in vars(key.harmonic.l, key.parity).into_iter().enumerate() {
                let src = match v {
                    Var::Tensor(k) => th.get(*key).map(|p| p.get(k)),
                    Var::Lapse => ph.get(*key).map(|p| p.get(0)),
                };
                if let Some(src) = src {
                    let o = self.offsets[ki] + vi * m;
                    x[o..o + m].copy_from_slice(&src[..m]);
                }
            }
        }
        x
    }

    pub fn unpack(&self, x: &[f64]) -> MetricState {
        let (th, ph) = self.spectra(x);
        let theta: SymTensorField = transform_from_modes(&th, &self.disc).expect("layout matches grid");
        let lapse: ScalarField = transform_from_modes(&ph, &self.disc).expect("layout matches grid");
        MetricState {
            theta,
            lapse_pert: lapse,
        }
    }

    /// Mode spectra of `Θ` and of the lapse perturbation held in `x`. Every
    /// layout key gets an entry, zero or not.
    pub fn spectra(&self, x: &[f64]) -> (ModeSpectrum, ModeSpectrum) {
        let disc = &self.disc;
        let (lmax, n_r) = (disc.grid.lmax(), disc.grid.n_r());
        let m = self.m();
        let mut th = ModeSpectrum::new(FieldKind::Tensor, lmax, n_r);
        let mut ph = ModeSpectrum::new(FieldKind::Scalar, lmax, n_r);
        for (ki, key) in self.keys.iter().enumerate() {
            for (vi, v) in vars(key.harmonic.l, key.parity).into_iter().enumerate() {
                let o = self.offsets[ki] + vi * m;
                let dst = match v {
                    Var::Tensor(k) => th.entry(*key).expect("layout key").get_mut(k),
                    Var::Lapse => ph.entry(*key).expect("layout key").get_mut(0),
                };
                dst[..m].copy_from_slice(&x[o..o + m]);
            }
        }
        (th, ph)
    }

    /// Collocation rows of a residual: interior slots at `s_1 … s_{n-2}`
    /// scaled by `r²`, boundary slots at `s = 1`.
    pub fn project(&self, res: &ResidualVector) -> Vec<f64> {
        let disc = &self.disc;
        let n_ang = disc.grid.n_ang();
        let nodes = disc.grid.radial.nodes();
        let m = self.m();
        let tens = transform_to_modes(&res.interior_tensor);
        let scal = transform_to_modes(&res.interior_scalar);
        let gauge_c: Vec<&[f64]> = res.bdry_gauge.0.iter().map(|c| c.as_slice()).collect();
        let gauge = analyze_shell(FieldKind::OneForm, disc, &gauge_c);
        let z = vec![0.0; n_ang];
        let metric_c: Vec<&[f64]> = vec![
            &z,
            &z,
            &z,
            &res.bdry_metric.0[0],
            &res.bdry_metric.0[1],
            &res.bdry_metric.0[2],
        ];
        let metric = analyze_shell(FieldKind::Tensor, disc, &metric_c);
        let mean = analyze_shell(FieldKind::Scalar, disc, &[&res.bdry_meancurv.0]);
        let mut y = vec![0.0; self.len];
        for (ki, key) in self.keys.iter().enumerate() {
            let (l, parity) = (key.harmonic.l, key.parity);
            let mut o = self.offsets[ki];
            for e in interior_eqns(l, parity) {
                let prof = match e {
                    Eqn::Interior(k) => tens.get(*key).map(|p| p.get(k)),
                    _ => scal.get(*key).map(|p| p.get(0)),
                };
                if let Some(prof) = prof {
                    for i in 1..m {
                        y[o + i - 1] = prof[i] / (nodes[i] * nodes[i]);
                    }
                }
                o += m - 1;
            }
            for e in boundary_eqns(l, parity) {
                y[o] = match e {
                    Eqn::Gauge(k) => gauge.get(key).map_or(0.0, |c| c[k]),
                    Eqn::Metric(k) => metric.get(key).map_or(0.0, |c| c[k]),
                    _ => mean.get(key).map_or(0.0, |c| c[0]),
                };
                o += 1;
            }
        }
        y
    }

    fn segment(&self, ki: usize) -> std::ops::Range<usize> {
        let key = self.keys[ki];
        let len = vars(key.harmonic.l, key.parity).len() * self.m();
        self.offsets[ki]..self.offsets[ki] + len
    }
}

#[derive(Debug, Clone)]
pub struct Block {
    pub matrix: DMatrix<f64>,
    /// Generalized inverse of `matrix`, formed from the equilibrated block.
    pub pinv: DMatrix<f64>,
    /// Singular values of the equilibrated block, descending.
    pub singular_values: Vec<f64>,
    /// Number of singular values below the pseudo-inverse threshold.
    pub kernel_dim: usize,
}

/// Threshold (relative to the largest singular value of the equilibrated
/// block) below which a direction counts as null.
pub const PINV_THRESHOLD: f64 = 1e-8;

/// Rows scaled by `r²` near infinity and columns that enter only through
/// high derivatives make the raw blocks badly scaled, so that condition
/// numbers of `10⁹` appear for nonsingular blocks at moderate resolution.
/// Alternating row/column max-norm scaling removes that before the SVD.
fn block_from_matrix(matrix: DMatrix<f64>) -> Block {
    let (nr, nc) = matrix.shape();
    let mut dr = vec![1.0; nr];
    let mut dc = vec![1.0; nc];
    let mut a = matrix.clone();
    for _ in 0..4 {
        for i in 0..nr {
            let m = a.row(i).amax();
            if m > 0.0 {
                a.row_mut(i).scale_mut(1.0 / m);
                dr[i] /= m;
            }
        }
        for j in 0..nc {
            let m = a.column(j).amax();
            if m > 0.0 {
                a.column_mut(j).scale_mut(1.0 / m);
                dc[j] /= m;
            }
        }
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let cut = PINV_THRESHOLD * smax;
    let kernel_dim = svd.singular_values.iter().filter(|v| **v <= cut).count();
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut pinv = svd.pseudo_inverse(cut).expect("both factors computed");
    for i in 0..nc {
        pinv.row_mut(i).scale_mut(dc[i]);
    }
    for j in 0..nr {
        pinv.column_mut(j).scale_mut(dr[j]);
    }
    sv.sort_by(|a, b| b.total_cmp(a));
    Block {
        matrix,
        pinv,
        singular_values: sv,
        kernel_dim,
    }
}

/// Which linear operator a system discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearOperator {
    /// The operator with the simplified mean-curvature row.
    T,
    /// The differential of the residual map at the flat solution.
    DPhi,
}

impl LinearOperator {
    pub fn apply(self, theta: &SymTensorField, phi: &ScalarField) -> ResidualVector {
        match self {
            LinearOperator::T => apply_t(theta, phi),
            LinearOperator::DPhi => apply_dphi(theta, phi),
        }
    }
}

/// One block of the flat operator per `(L, parity)`.
#[derive(Debug, Clone)]
pub struct BlockSet {
    pub blocks: HashMap<(usize, Parity), Block>,
}

impl BlockSet {
    pub fn assemble(disc: &Discretization, op: LinearOperator) -> Self {
        let lmax = disc.grid.lmax();
        let n_r = disc.grid.n_r();
        let m = n_r - 1;
        let nodes = disc.grid.radial.nodes().to_vec();
        let probe_keys: Vec<ModeKey> = (0..=lmax)
            .map(|l| ModeKey::new(l, 1, Parity::Even))
            .chain((1..=lmax).map(|l| ModeKey::new(l, 1, Parity::Odd)))
            .collect();
        let layout = ModeLayout::from_keys(disc, probe_keys.clone());
        let var_kinds: Vec<(Parity, Var)> = [Var::Tensor(0), Var::Tensor(1), Var::Tensor(2), Var::Tensor(3), Var::Lapse]
            .into_iter()
            .map(|v| (Parity::Even, v))
            .chain([Var::Tensor(1), Var::Tensor(2)].into_iter().map(|v| (Parity::Odd, v)))
            .collect();
        // For each unknown family and probe power, the projected rows.
        let runs: Vec<((Parity, Var), [Vec<f64>; 3])> = var_kinds
            .par_iter()
            .map(|&(parity, var)| {
                let outs: [Vec<f64>; 3] = std::array::from_fn(|pw| {
                    let mut th = ModeSpectrum::new(FieldKind::Tensor, lmax, n_r);
                    let mut ph = ModeSpectrum::new(FieldKind::Scalar, lmax, n_r);
                    for key in probe_keys.iter().filter(|k| k.parity == parity) {
                        if !vars(key.harmonic.l, parity).contains(&var) {
                            continue;
                        }
                        let dst = match var {
                            Var::Tensor(k) => th.entry(*key).expect("probe key").get_mut(k),
                            Var::Lapse => ph.entry(*key).expect("probe key").get_mut(0),
                        };
                        for (v, s) in dst.iter_mut().zip(&nodes) {
                            *v = s.powi(pw as i32);
                        }
                    }
                    let theta: SymTensorField = transform_from_modes(&th, disc).expect("grid");
                    let lapse: ScalarField = transform_from_modes(&ph, disc).expect("grid");
                    layout.project(&op.apply(&theta, &lapse))
                });
                ((parity, var), outs)
            })
            .collect();
        let d1 = disc.grid.radial.d1();
        let d2 = disc.grid.radial.d2();
        let mut blocks = HashMap::new();
        for (ki, key) in probe_keys.iter().enumerate() {
            let (l, parity) = (key.harmonic.l, key.parity);
            let vs = vars(l, parity);
            let size = vs.len() * m;
            let mut mat = DMatrix::zeros(size, size);
            let seg = layout.segment(ki);
            // Row index within the segment -> radial node.
            let n_int = interior_eqns(l, parity).len();
            let row_node = |r: usize| if r < n_int * (m - 1) { r % (m - 1) + 1 } else { 0 };
            for (vi, var) in vs.iter().enumerate() {
                let outs = &runs.iter().find(|(k, _)| *k == (parity, *var)).expect("probe run").1;
                for r in 0..size {
                    let i = row_node(r);
                    let s = nodes[i];
                    let o0 = outs[0][seg.start + r];
                    let o1 = outs[1][seg.start + r];
                    let o2 = outs[2][seg.start + r];
                    let c0 = o0;
                    let c1 = o1 - c0 * s;
                    let c2 = 0.5 * (o2 - c0 * s * s - 2.0 * c1 * s);
                    for j in 0..m {
                        let mut v = c1 * d1[(i, j)] + c2 * d2[(i, j)];
                        if i == j {
                            v += c0;
                        }
                        mat[(r, vi * m + j)] = v;
                    }
                }
            }
            blocks.insert((l, parity), mat);
        }
        let blocks = blocks
            .into_par_iter()
            .map(|(k, mat)| (k, block_from_matrix(mat)))
            .collect();
        Self { blocks }
    }

    fn get(&self, key: &ModeKey) -> &Block {
        &self.blocks[&(key.harmonic.l, key.parity)]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearConfig {
    pub lin_tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for LinearConfig {
    fn default() -> Self {
        // The attainable relative residual on the collocation rows is about
        // 1e−10 at n_r = 48 (roundoff of the r²-scaled rows near infinity).
        Self {
            lin_tol: 1e-9,
            max_iter: 200,
            restart: 60,
        }
    }
}

/// A discretized flat operator on a set of modes, with its block
/// preconditioner.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub layout: ModeLayout,
    pub blocks: BlockSet,
    pub op: LinearOperator,
}

impl LinearSystem {
    pub fn new(layout: ModeLayout, op: LinearOperator) -> Self {
        let blocks = BlockSet::assemble(&layout.disc, op);
        Self { layout, blocks, op }
    }

    /// `T` on the reflection-invariant modes.
    pub fn symmetric(disc: &Discretization) -> Self {
        Self::new(ModeLayout::symmetric(disc), LinearOperator::T)
    }

    /// The operator evaluated on the grid and projected to collocation rows.
    pub fn apply_grid(&self, x: &[f64]) -> Vec<f64> {
        let st = self.layout.unpack(x);
        self.layout.project(&self.op.apply(&st.theta, &st.lapse_pert))
    }

    /// `T` through the assembled blocks.
    pub fn apply_blocks(&self, x: &[f64]) -> Vec<f64> {
        self.map_segments(x, |b| &b.matrix)
    }

    /// Minimum-norm block solve.
    pub fn solve_blocks(&self, y: &[f64]) -> Vec<f64> {
        self.map_segments(y, |b| &b.pinv)
    }

    fn map_segments(&self, x: &[f64], pick: impl Fn(&Block) -> &DMatrix<f64> + Sync) -> Vec<f64> {
        let parts: Vec<(std::ops::Range<usize>, Vec<f64>)> = (0..self.layout.keys.len())
            .into_par_iter()
            .map(|ki| {
                let seg = self.layout.segment(ki);
                let mat = pick(self.blocks.get(&self.layout.keys[ki]));
                let v = nalgebra::DVectorView::from_slice(&x[seg.clone()], seg.len());
                (seg, (mat * v).as_slice().to_vec())
            })
            .collect();
        let mut out = vec![0.0; x.len()];
        for (seg, v) in parts {
            out[seg].copy_from_slice(&v);
        }
        out
    }

    /// Total kernel dimension of the blocks in this layout.
    pub fn kernel_dim(&self) -> usize {
        self.layout.keys.iter().map(|k| self.blocks.get(k).kernel_dim).sum()
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub iterations: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Restarted GMRES for `A x = b` with right preconditioner `M ≈ A⁻¹`.
///
/// Besides the tolerance and the iteration cap, a restart cycle that fails
/// to halve the true residual ends the solve: at that point the Krylov
/// space is fitting roundoff of `A` rather than reducing the error.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return GmresOutcome {
            x,
            relative_residual: 0.0,
            iterations: 0,
        };
    }
    let mut iterations = 0;
    let mut previous = f64::INFINITY;
    loop {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        let stalled = beta > 0.5 * previous;
        previous = beta;
        if beta <= tol * bnorm || iterations >= max_iter || stalled {
            return GmresOutcome {
                x,
                relative_residual: beta / bnorm,
                iterations,
            };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && iterations < max_iter {
            let z = precond(&basis[k]);
            let mut w = apply(&z);
            let mut col = vec![0.0; k + 2];
            // Modified Gram–Schmidt, applied twice for stability.
            for _ in 0..2 {
                for (j, q) in basis.iter().enumerate() {
                    let d: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                    col[j] += d;
                    w.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
                }
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let den = col[k].hypot(col[k + 1]);
            let (c, s) = if den == 0.0 { (1.0, 0.0) } else { (col[k] / den, col[k + 1] / den) };
            col[k] = den;
            col[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[k]);
            g[k] *= c;
            h.push(col);
            iterations += 1;
            k += 1;
            if g[k].abs() <= tol * bnorm * 0.5 || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // Back substitution for the Krylov coefficients.
        let mut yk = vec![0.0; k];
        for i in (0..k).rev() {
            let mut v = g[i];
            for j in i + 1..k {
                v -= h[j][i] * yk[j];
            }
            yk[i] = v / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (j, c) in yk.iter().enumerate() {
            u.iter_mut().zip(&basis[j]).for_each(|(a, b)| *a += c * b);
        }
        let dx = precond(&u);
        x.iter_mut().zip(&dx).for_each(|(a, b)| *a += b);
    }
}

/// Solve `system.op(Θ, φ) = rhs` over the layout's modes after projecting
/// `rhs` onto the reflection-invariant subspace.
pub fn solve_linearized(
    rhs: &ResidualVector,
    system: &LinearSystem,
    cfg: LinearConfig,
) -> Result<(SymTensorField, ScalarField)> {
    let disc = &system.layout.disc;
    let sym = reflection_project(rhs, disc);
    let y = system.layout.project(&sym);
    let out = gmres(
        |x| system.apply_grid(x),
        |v| system.solve_blocks(v),
        &y,
        cfg.lin_tol * 0.1,
        cfg.max_iter,
        cfg.restart,
    );
    if out.relative_residual > cfg.lin_tol {
        return Err(Error::LeastSquares {
            residual: out.relative_residual,
            tol: cfg.lin_tol,
        });
    }
    let st = system.layout.unpack(&out.x);
    Ok((st.theta, st.lapse_pert))
}
