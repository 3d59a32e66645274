//! Curvature of perturbed flat metrics on the exterior of the unit ball and
//! the residual of the gauge-modified static system.
//!
//! All pointwise algebra works in Cartesian components, where the flat
//! connection is plain differentiation. Curvature is expressed through the
//! connection difference `D^k_ij = ½ g^{kl}(∂_i Θ_lj + ∂_j Θ_li − ∂_l Θ_ij)`,
//! so the flat background contributes exactly nothing.

use rayon::prelude::*;

use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::field::{
    rotate_sym, rotate_vec, sym_index, Discretization, OneFormField, ScalarField, SurfaceOneForm,
    SurfaceScalar, SurfaceTensor, SymTensorField, SYM_PAIRS,
};
use crate::modes::{transform_from_modes, FieldKind, ModeKey, ModeSpectrum, Parity};
use crate::spectral::{gradient, jet2};
use crate::symmetry::{symmetry_deviation, Reflect};

/// The unknown pair: `g̃ = g_o + Θ` and `f = 1 + φ_f`.
#[derive(Debug, Clone)]
pub struct MetricState {
    pub theta: SymTensorField,
    pub lapse_pert: ScalarField,
}

impl MetricState {
    pub fn flat(disc: &Discretization) -> Self {
        Self {
            theta: SymTensorField::zeros(disc),
            lapse_pert: ScalarField::zeros(disc),
        }
    }

    pub fn new(theta: SymTensorField, lapse_pert: ScalarField) -> Result<Self> {
        theta.disc.grid.ensure_same(&lapse_pert.disc.grid)?;
        Ok(Self { theta, lapse_pert })
    }

    pub fn disc(&self) -> &Discretization {
        &self.theta.disc
    }

    /// Positive definite metric and positive lapse at every node.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.disc().grid.len() {
            let t = self.theta.at(i);
            let g = [1.0 + t[0], t[1], t[2], 1.0 + t[3], t[4], 1.0 + t[5]];
            if !positive_definite(&g) {
                return Err(Error::DegenerateMetric(i));
            }
            if !(1.0 + self.lapse_pert.values[i] > 0.0) {
                return Err(Error::NonPositiveLapse(i));
            }
        }
        Ok(())
    }

    pub fn axpy(&mut self, c: f64, other: &MetricState) {
        self.theta.axpy(c, &other.theta);
        self.lapse_pert.axpy(c, &other.lapse_pert);
    }
}

fn positive_definite(g: &[f64; 6]) -> bool {
    let m1 = g[0];
    let m2 = g[0] * g[3] - g[1] * g[1];
    m1 > 0.0 && m2 > 0.0 && det3(g) > 0.0
}

fn det3<T: Scalar>(g: &[T; 6]) -> T {
    g[0] * (g[3] * g[5] - g[4] * g[4]) - g[1] * (g[1] * g[5] - g[4] * g[2])
        + g[2] * (g[1] * g[4] - g[3] * g[2])
}

fn inverse3<T: Scalar>(g: &[T; 6]) -> [T; 6] {
    let det = det3(g);
    [
        (g[3] * g[5] - g[4] * g[4]) / det,
        (g[2] * g[4] - g[1] * g[5]) / det,
        (g[1] * g[4] - g[2] * g[3]) / det,
        (g[0] * g[5] - g[2] * g[2]) / det,
        (g[1] * g[2] - g[0] * g[4]) / det,
        (g[0] * g[3] - g[1] * g[1]) / det,
    ]
}

/// Mean curvature and second fundamental form of the unit sphere in flat
/// space, with outward normal `ν = ∂_r`.
#[derive(Debug, Clone)]
pub struct BoundaryFrame {
    pub h_o: f64,
    pub pi_o: SurfaceTensor,
}

impl BoundaryFrame {
    pub fn unit_sphere(n_ang: usize) -> Self {
        Self {
            h_o: 2.0,
            pi_o: SurfaceTensor::round(n_ang),
        }
    }
}

/// Target boundary geometry: induced metric `σ` and mean curvature `h`.
#[derive(Debug, Clone)]
pub struct BoundaryData {
    pub disc: Discretization,
    pub sigma: SurfaceTensor,
    pub h: SurfaceScalar,
    pub symmetric: bool,
}

/// Tolerance for the reflection-invariance flag of boundary data.
pub const SYMMETRY_TOL: f64 = 1e-12;

impl BoundaryData {
    pub fn new(disc: &Discretization, sigma: SurfaceTensor, h: SurfaceScalar) -> Result<Self> {
        let n = disc.grid.n_ang();
        if sigma.0.iter().any(|c| c.len() != n) || h.0.len() != n {
            return Err(Error::GridMismatch);
        }
        for a in 0..n {
            let (tt, tp, pp) = (sigma.0[0][a], sigma.0[1][a], sigma.0[2][a]);
            if !(tt > 0.0 && tt * pp - tp * tp > 0.0) {
                return Err(Error::DegenerateMetric(a));
            }
        }
        let mut bd = Self {
            disc: disc.clone(),
            sigma,
            h,
            symmetric: false,
        };
        bd.symmetric = bd.symmetry_deviation().1 <= SYMMETRY_TOL;
        Ok(bd)
    }

    /// Round data: `σ = g_o|_{S²}`, `h = 2`.
    pub fn round(disc: &Discretization) -> Self {
        let n = disc.grid.n_ang();
        Self {
            disc: disc.clone(),
            sigma: SurfaceTensor::round(n),
            h: SurfaceScalar(vec![2.0; n]),
            symmetric: true,
        }
    }

    /// Round data plus mode perturbations. `sigma_modes` entries are
    /// `(L, M, parity, c, d)` in the surface basis `c Hess Y + d Y g` (odd:
    /// `c (Hess Y)*`); `h_modes` entries are `(L, M, value)`.
    pub fn from_modes(
        disc: &Discretization,
        sigma_modes: &[(usize, usize, Parity, f64, f64)],
        h_modes: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let n_ang = disc.grid.n_ang();
        let lmax = disc.grid.lmax();
        let mut tensor = ModeSpectrum::new(FieldKind::Tensor, lmax, disc.grid.n_r());
        for &(l, m, parity, c, d) in sigma_modes {
            if m == 0 || m > 2 * l + 1 {
                return Err(Error::ModeOutOfRange { l, m });
            }
            let p = tensor.entry(ModeKey::new(l, m, parity))?;
            p.c.iter_mut().for_each(|v| *v = c);
            if parity == Parity::Even {
                p.d.iter_mut().for_each(|v| *v = d);
            }
        }
        let mut scalar = ModeSpectrum::new(FieldKind::Scalar, lmax, disc.grid.n_r());
        for &(l, m, v) in h_modes {
            if m == 0 || m > 2 * l + 1 {
                return Err(Error::ModeOutOfRange { l, m });
            }
            scalar.entry(ModeKey::new(l, m, Parity::Even))?.a.iter_mut().for_each(|x| *x = v);
        }
        let t: SymTensorField = transform_from_modes(&tensor, disc)?;
        let s: ScalarField = transform_from_modes(&scalar, disc)?;
        let mut sigma = SurfaceTensor::round(n_ang);
        for a in 0..n_ang {
            sigma.0[0][a] += t.comps[3][a];
            sigma.0[1][a] += t.comps[4][a];
            sigma.0[2][a] += t.comps[5][a];
        }
        let h = SurfaceScalar((0..n_ang).map(|a| 2.0 + s.values[a]).collect());
        Self::new(disc, sigma, h)
    }

    /// Worst generator deviation of `(σ, h)` from reflection invariance.
    pub fn symmetry_deviation(&self) -> (&'static str, f64) {
        let (n1, d1) = symmetry_deviation(&self.sigma, &self.disc);
        let (n2, d2) = symmetry_deviation(&self.h, &self.disc);
        if d1 >= d2 {
            (n1, d1)
        } else {
            (n2, d2)
        }
    }

    pub fn ensure_symmetric(&self) -> Result<()> {
        let (name, dev) = self.symmetry_deviation();
        if dev > SYMMETRY_TOL {
            return Err(Error::NotSymmetric {
                reflection: name.to_string(),
                deviation: dev,
            });
        }
        Ok(())
    }
}

/// The five slots of the residual map.
#[derive(Debug, Clone)]
pub struct ResidualVector {
    pub interior_tensor: SymTensorField,
    pub interior_scalar: ScalarField,
    pub bdry_gauge: SurfaceOneForm,
    pub bdry_metric: SurfaceTensor,
    pub bdry_meancurv: SurfaceScalar,
}

impl ResidualVector {
    pub fn zeros(disc: &Discretization) -> Self {
        let n = disc.grid.n_ang();
        Self {
            interior_tensor: SymTensorField::zeros(disc),
            interior_scalar: ScalarField::zeros(disc),
            bdry_gauge: SurfaceOneForm::zeros(n),
            bdry_metric: SurfaceTensor::zeros(n),
            bdry_meancurv: SurfaceScalar::zeros(n),
        }
    }

    pub fn disc(&self) -> &Discretization {
        &self.interior_tensor.disc
    }

    /// Largest absolute entry per slot.
    pub fn slot_max(&self) -> [f64; 5] {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        [
            self.interior_tensor.max_abs(),
            self.interior_scalar.max_abs(),
            self.bdry_gauge.0.iter().map(|c| m(c)).fold(0.0, f64::max),
            self.bdry_metric.0.iter().map(|c| m(c)).fold(0.0, f64::max),
            m(&self.bdry_meancurv.0),
        ]
    }

    pub fn axpy(&mut self, c: f64, o: &ResidualVector) {
        self.interior_tensor.axpy(c, &o.interior_tensor);
        self.interior_scalar.axpy(c, &o.interior_scalar);
        self.bdry_gauge.add_scaled(c, &o.bdry_gauge);
        self.bdry_metric.add_scaled(c, &o.bdry_metric);
        self.bdry_meancurv.add_scaled(c, &o.bdry_meancurv);
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.interior_tensor = out.interior_tensor.scale(c);
        out.interior_scalar = out.interior_scalar.scale(c);
        out.bdry_gauge.scale_in_place(c);
        out.bdry_metric.scale_in_place(c);
        out.bdry_meancurv.scale_in_place(c);
        out
    }
}

impl Reflect for ResidualVector {
    fn reflect(&self, disc: &crate::field::DiscretizationData, flip: [bool; 3]) -> Self {
        Self {
            interior_tensor: self.interior_tensor.reflect(disc, flip),
            interior_scalar: self.interior_scalar.reflect(disc, flip),
            bdry_gauge: self.bdry_gauge.reflect(disc, flip),
            bdry_metric: self.bdry_metric.reflect(disc, flip),
            bdry_meancurv: self.bdry_meancurv.reflect(disc, flip),
        }
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        self.axpy(c, other);
    }
    fn scale_in_place(&mut self, c: f64) {
        *self = self.scale(c);
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        self.interior_tensor
            .max_abs_diff(&other.interior_tensor)
            .max(self.interior_scalar.max_abs_diff(&other.interior_scalar))
            .max(self.bdry_gauge.max_abs_diff(&other.bdry_gauge))
            .max(self.bdry_metric.max_abs_diff(&other.bdry_metric))
            .max(self.bdry_meancurv.max_abs_diff(&other.bdry_meancurv))
    }
}

/// Cartesian derivatives of `Θ` and of a scalar up to second order.
pub(crate) struct Jets {
    pub th: [Vec<f64>; 6],
    pub dth: [[Vec<f64>; 6]; 3],
    pub ddth: [[Vec<f64>; 6]; 6],
    pub ph: Vec<f64>,
    pub dph: [Vec<f64>; 3],
    pub ddph: [Vec<f64>; 6],
}

impl Jets {
    pub fn new(theta: &SymTensorField, phi: &ScalarField) -> Self {
        let disc = &theta.disc;
        let th = theta.to_cartesian();
        let per: Vec<([Vec<f64>; 3], [Vec<f64>; 6])> = th
            .par_iter()
            .chain(std::iter::once(&phi.values).collect::<Vec<_>>().into_par_iter())
            .map(|c| jet2(disc, c))
            .collect();
        let mut dth: [[Vec<f64>; 6]; 3] = Default::default();
        let mut ddth: [[Vec<f64>; 6]; 6] = Default::default();
        for c in 0..6 {
            for k in 0..3 {
                dth[k][c] = per[c].0[k].clone();
            }
            for kl in 0..6 {
                ddth[kl][c] = per[c].1[kl].clone();
            }
        }
        let (dph, ddph) = per[6].clone();
        Self {
            th,
            dth,
            ddth,
            ph: phi.values.clone(),
            dph,
            ddph,
        }
    }

    fn input<T: FromDual>(&self, tan: Option<&Jets>, i: usize) -> NodeInput<T> {
        let mk = |v: &Vec<f64>, t: Option<&Vec<f64>>| -> T {
            match t {
                None => T::cst(v[i]),
                Some(t) => T::from_dual(v[i], t[i]),
            }
        };
        NodeInput {
            th: std::array::from_fn(|c| mk(&self.th[c], tan.map(|t| &t.th[c]))),
            dth: std::array::from_fn(|k| {
                std::array::from_fn(|c| mk(&self.dth[k][c], tan.map(|t| &t.dth[k][c])))
            }),
            ddth: std::array::from_fn(|k| {
                std::array::from_fn(|c| mk(&self.ddth[k][c], tan.map(|t| &t.ddth[k][c])))
            }),
            ph: mk(&self.ph, tan.map(|t| &t.ph)),
            dph: std::array::from_fn(|k| mk(&self.dph[k], tan.map(|t| &t.dph[k]))),
            ddph: std::array::from_fn(|k| mk(&self.ddph[k], tan.map(|t| &t.ddph[k]))),
        }
    }
}

/// Build a scalar from a value and a tangent; plain numbers drop the tangent.
pub(crate) trait FromDual: Scalar {
    fn from_dual(v: f64, d: f64) -> Self;
}

impl FromDual for f64 {
    fn from_dual(v: f64, _: f64) -> Self {
        v
    }
}

impl FromDual for Dual {
    fn from_dual(v: f64, d: f64) -> Self {
        Dual::new(v, d)
    }
}

pub(crate) struct NodeInput<T> {
    th: [T; 6],
    dth: [[T; 6]; 3],
    ddth: [[T; 6]; 6],
    ph: T,
    dph: [T; 3],
    ddph: [T; 6],
}

/// Pointwise geometric quantities in Cartesian components.
#[derive(Clone, Copy)]
pub(crate) struct NodeGeometry<T> {
    pub ginv: [T; 6],
    /// `D^k_ij` at `[k][sym(i, j)]`.
    pub conn: [[T; 6]; 3],
    pub ric: [T; 6],
    pub hess: [T; 6],
    pub lap: T,
    pub omega: [T; 3],
    /// `(∇ω)_ij` (not symmetrized).
    pub nabla_omega: [[T; 3]; 3],
    pub slot1: [T; 6],
    pub scalar_curv: T,
    pub trace_nabla_omega: T,
}

fn sym<T: Copy>(a: &[T; 6], i: usize, j: usize) -> T {
    a[sym_index(i, j)]
}

fn node_geometry<T: Scalar>(inp: &NodeInput<T>) -> NodeGeometry<T> {
    let g: [T; 6] = std::array::from_fn(|c| {
        let (i, j) = SYM_PAIRS[c];
        if i == j {
            T::cst(1.0) + inp.th[c]
        } else {
            inp.th[c]
        }
    });
    let ginv = inverse3(&g);
    let dth = |k: usize, i: usize, j: usize| inp.dth[k][sym_index(i, j)];
    let ddth = |k: usize, l: usize, i: usize, j: usize| inp.ddth[sym_index(k, l)][sym_index(i, j)];

    // Lowered connection difference Γ_{l,ij} and its derivatives.
    let mut low = [[T::zero(); 6]; 3];
    let mut dlow = [[[T::zero(); 6]; 3]; 3];
    for l in 0..3 {
        for (c, &(i, j)) in SYM_PAIRS.iter().enumerate() {
            low[l][c] = (dth(i, l, j) + dth(j, l, i) - dth(l, i, j)).scale(0.5);
            for m in 0..3 {
                dlow[m][l][c] = (ddth(m, i, l, j) + ddth(m, j, l, i) - ddth(m, l, i, j)).scale(0.5);
            }
        }
    }
    let mut conn = [[T::zero(); 6]; 3];
    for k in 0..3 {
        for c in 0..6 {
            let mut v = T::zero();
            for l in 0..3 {
                v += sym(&ginv, k, l) * low[l][c];
            }
            conn[k][c] = v;
        }
    }
    // ∂_m g^{kl} = -g^{ka} ∂_m Θ_ab g^{bl}
    let mut dginv = [[T::zero(); 6]; 3];
    for m in 0..3 {
        for (c, &(k, l)) in SYM_PAIRS.iter().enumerate() {
            let mut v = T::zero();
            for a in 0..3 {
                for b in 0..3 {
                    v += sym(&ginv, k, a) * dth(m, a, b) * sym(&ginv, b, l);
                }
            }
            dginv[m][c] = -v;
        }
    }
    // ∂_m D^k_ij
    let mut dconn = [[[T::zero(); 6]; 3]; 3];
    for m in 0..3 {
        for k in 0..3 {
            for c in 0..6 {
                let mut v = T::zero();
                for l in 0..3 {
                    v += sym(&dginv[m], k, l) * low[l][c] + sym(&ginv, k, l) * dlow[m][l][c];
                }
                dconn[m][k][c] = v;
            }
        }
    }
    let cn = |k: usize, i: usize, j: usize| conn[k][sym_index(i, j)];
    let dcn = |m: usize, k: usize, i: usize, j: usize| dconn[m][k][sym_index(i, j)];
    let mut trace_conn = [T::zero(); 3];
    for (l, t) in trace_conn.iter_mut().enumerate() {
        for k in 0..3 {
            *t += cn(k, k, l);
        }
    }
    let mut ric_full = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut v = T::zero();
            for k in 0..3 {
                v += dcn(k, k, i, j) - dcn(j, k, k, i);
                v += trace_conn[k] * cn(k, i, j);
                for l in 0..3 {
                    v = v - cn(k, l, j) * cn(l, i, k);
                }
            }
            ric_full[i][j] = v;
        }
    }
    let ric: [T; 6] = std::array::from_fn(|c| {
        let (i, j) = SYM_PAIRS[c];
        (ric_full[i][j] + ric_full[j][i]).scale(0.5)
    });
    let hess: [T; 6] = std::array::from_fn(|c| {
        let (i, j) = SYM_PAIRS[c];
        let mut v = inp.ddph[c];
        for k in 0..3 {
            v = v - cn(k, i, j) * inp.dph[k];
        }
        v
    });
    let contract = |a: &[T; 6]| -> T {
        let mut v = T::zero();
        for (c, &(i, j)) in SYM_PAIRS.iter().enumerate() {
            let w = if i == j { 1.0 } else { 2.0 };
            v += (ginv[c] * a[c]).scale(w);
        }
        v
    };
    let lap = contract(&hess);
    let scalar_curv = contract(&ric);

    let tr_d = |k: usize| dth(k, 0, 0) + dth(k, 1, 1) + dth(k, 2, 2);
    let tr_dd = |k: usize, l: usize| ddth(k, l, 0, 0) + ddth(k, l, 1, 1) + ddth(k, l, 2, 2);
    let omega: [T; 3] = std::array::from_fn(|i| {
        let mut v = -tr_d(i).scale(0.5);
        for j in 0..3 {
            v += dth(j, i, j);
        }
        v
    });
    // ∂_k ω_i
    let domega: [[T; 3]; 3] = std::array::from_fn(|k| {
        std::array::from_fn(|i| {
            let mut v = -tr_dd(k, i).scale(0.5);
            for j in 0..3 {
                v += ddth(k, j, i, j);
            }
            v
        })
    });
    let nabla_omega: [[T; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut v = domega[i][j];
            for k in 0..3 {
                v = v - cn(k, i, j) * omega[k];
            }
            v
        })
    });
    let f = T::cst(1.0) + inp.ph;
    let slot1: [T; 6] = std::array::from_fn(|c| {
        let (i, j) = SYM_PAIRS[c];
        let s_nabla = (nabla_omega[i][j] + nabla_omega[j][i]).scale(0.5);
        f * ric[c] - hess[c] - f * s_nabla
    });
    let mut trace_nabla_omega = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            trace_nabla_omega += sym(&ginv, i, j) * nabla_omega[j][i];
        }
    }
    NodeGeometry {
        ginv,
        conn,
        ric,
        hess,
        lap,
        omega,
        nabla_omega,
        slot1,
        scalar_curv,
        trace_nabla_omega,
    }
}

/// Mean curvature of the level set `r = 1/s` through a node with unit
/// position `n`, for the metric encoded in `geo`.
fn node_mean_curvature<T: Scalar>(geo: &NodeGeometry<T>, n: [f64; 3], s: f64) -> T {
    let mut nn = T::zero();
    for k in 0..3 {
        for l in 0..3 {
            nn += sym(&geo.ginv, k, l).scale(n[k] * n[l]);
        }
    }
    let lambda = T::cst(1.0) / nn.sqrt();
    let nu: [T; 3] = std::array::from_fn(|i| {
        let mut v = T::zero();
        for j in 0..3 {
            v += sym(&geo.ginv, i, j).scale(n[j]);
        }
        lambda * v
    });
    let mut h = T::zero();
    for i in 0..3 {
        for j in 0..3 {
            let p = sym(&geo.ginv, i, j) - nu[i] * nu[j];
            let delta = if i == j { 1.0 } else { 0.0 };
            let mut k_ij = T::cst((delta - n[i] * n[j]) * s);
            for k in 0..3 {
                k_ij = k_ij - geo.conn[k][sym_index(i, j)].scale(n[k]);
            }
            h += p * k_ij;
        }
    }
    lambda * h
}

pub(crate) fn geometry_nodes<T: Scalar + FromDual>(val: &Jets, tan: Option<&Jets>) -> Vec<NodeGeometry<T>> {
    (0..val.ph.len())
        .into_par_iter()
        .map(|i| node_geometry(&val.input::<T>(tan, i)))
        .collect()
}

fn split_sym<T: Scalar>(disc: &Discretization, cart: impl Fn(usize) -> [T; 6]) -> (SymTensorField, SymTensorField) {
    let n_ang = disc.grid.n_ang();
    let mut v = SymTensorField::zeros(disc);
    let mut d = SymTensorField::zeros(disc);
    for i in 0..disc.grid.len() {
        let c = cart(i);
        let frame = &disc.frames[i % n_ang];
        v.set(i, rotate_sym(frame, &c.map(|x| x.value()), false));
        d.set(i, rotate_sym(frame, &c.map(|x| x.tangent()), false));
    }
    (v, d)
}

fn split_vec<T: Scalar>(disc: &Discretization, cart: impl Fn(usize) -> [T; 3]) -> (OneFormField, OneFormField) {
    let n_ang = disc.grid.n_ang();
    let mut v = OneFormField::zeros(disc);
    let mut d = OneFormField::zeros(disc);
    for i in 0..disc.grid.len() {
        let c = cart(i);
        let frame = &disc.frames[i % n_ang];
        v.set(i, rotate_vec(frame, &c.map(|x| x.value()), false));
        d.set(i, rotate_vec(frame, &c.map(|x| x.tangent()), false));
    }
    (v, d)
}

fn split_scalar<T: Scalar>(disc: &Discretization, f: impl Fn(usize) -> T) -> (ScalarField, ScalarField) {
    let n = disc.grid.len();
    let vals: Vec<T> = (0..n).map(f).collect();
    (
        ScalarField {
            disc: disc.clone(),
            values: vals.iter().map(|x| x.value()).collect(),
        },
        ScalarField {
            disc: disc.clone(),
            values: vals.iter().map(|x| x.tangent()).collect(),
        },
    )
}

fn residual_generic<T: Scalar + FromDual>(
    state: &MetricState,
    dir: Option<&MetricState>,
    bd: &BoundaryData,
) -> Result<(ResidualVector, ResidualVector)> {
    let disc = state.disc();
    disc.grid.angular.len();
    if !Discretization::ptr_eq(disc, &bd.disc) && !disc.grid.same_as(&bd.disc.grid) {
        return Err(Error::GridMismatch);
    }
    state.validate()?;
    let val = Jets::new(&state.theta, &state.lapse_pert);
    let tan = dir.map(|d| Jets::new(&d.theta, &d.lapse_pert));
    let geo = geometry_nodes::<T>(&val, tan.as_ref());
    let n_ang = disc.grid.n_ang();

    let (s1v, s1d) = split_sym(disc, |i| geo[i].slot1);
    let (s2v, s2d) = split_scalar(disc, |i| geo[i].lap);
    let (om_v, om_d) = split_vec(disc, |i| geo[i].omega);
    let s_bdry = disc.grid.radial.nodes()[0];
    let h: Vec<T> = (0..n_ang)
        .map(|a| node_mean_curvature(&geo[a], disc.frames[a][0], s_bdry))
        .collect();

    let surf_vec = |f: &OneFormField| SurfaceOneForm(std::array::from_fn(|k| f.comps[k][..n_ang].to_vec()));
    let mut metric_v = SurfaceTensor::zeros(n_ang);
    let mut metric_d = SurfaceTensor::zeros(n_ang);
    for a in 0..n_ang {
        for (k, c) in [3usize, 4, 5].into_iter().enumerate() {
            let round = if k == 1 { 0.0 } else { 1.0 };
            metric_v.0[k][a] = round + state.theta.comps[c][a] - bd.sigma.0[k][a];
            metric_d.0[k][a] = dir.map_or(0.0, |d| d.theta.comps[c][a]);
        }
    }
    let value = ResidualVector {
        interior_tensor: s1v,
        interior_scalar: s2v,
        bdry_gauge: surf_vec(&om_v),
        bdry_metric: metric_v,
        bdry_meancurv: SurfaceScalar((0..n_ang).map(|a| h[a].value() - bd.h.0[a]).collect()),
    };
    let tangent = ResidualVector {
        interior_tensor: s1d,
        interior_scalar: s2d,
        bdry_gauge: surf_vec(&om_d),
        bdry_metric: metric_d,
        bdry_meancurv: SurfaceScalar(h.iter().map(|x| x.tangent()).collect()),
    };
    Ok((value, tangent))
}

/// The residual `Φ(g̃, f, g)` of the modified static system.
pub fn static_residual(state: &MetricState, bd: &BoundaryData) -> Result<ResidualVector> {
    Ok(residual_generic::<f64>(state, None, bd)?.0)
}

/// `Φ` at `state` together with its exact directional derivative along `dir`.
pub fn static_residual_with_tangent(
    state: &MetricState,
    dir: &MetricState,
    bd: &BoundaryData,
) -> Result<(ResidualVector, ResidualVector)> {
    residual_generic::<Dual>(state, Some(dir), bd)
}

fn flat_geometry(state: &MetricState) -> Result<Vec<NodeGeometry<f64>>> {
    state.validate()?;
    let val = Jets::new(&state.theta, &state.lapse_pert);
    Ok(geometry_nodes::<f64>(&val, None))
}

/// Ricci tensor of `g̃` in the orthonormal spherical frame.
pub fn ricci(state: &MetricState) -> Result<SymTensorField> {
    let geo = flat_geometry(state)?;
    Ok(split_sym(state.disc(), |i| geo[i].ric).0)
}

/// `Hess_{g̃} u` and `Δ_{g̃} u`.
pub fn hessian_and_laplacian(u: &ScalarField, state: &MetricState) -> Result<(SymTensorField, ScalarField)> {
    let probe = MetricState::new(state.theta.clone(), u.clone())?;
    probe.theta_only_validate()?;
    let val = Jets::new(&probe.theta, &probe.lapse_pert);
    let geo = geometry_nodes::<f64>(&val, None);
    let hess = split_sym(state.disc(), |i| geo[i].hess).0;
    let lap = split_scalar(state.disc(), |i| geo[i].lap).0;
    Ok((hess, lap))
}

impl MetricState {
    fn theta_only_validate(&self) -> Result<()> {
        for i in 0..self.disc().grid.len() {
            let t = self.theta.at(i);
            let g = [1.0 + t[0], t[1], t[2], 1.0 + t[3], t[4], 1.0 + t[5]];
            if !positive_definite(&g) {
                return Err(Error::DegenerateMetric(i));
            }
        }
        Ok(())
    }
}

/// `ω = div_{g_o} g̃ − ½ d(tr_{g_o} g̃)`.
pub fn gauge_one_form(state: &MetricState) -> OneFormField {
    let disc = state.disc();
    let th = state.theta.to_cartesian();
    let d: Vec<[Vec<f64>; 3]> = th.par_iter().map(|c| gradient(disc, c)).collect();
    let n = disc.grid.len();
    let mut cart = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (i, out) in cart.iter_mut().enumerate() {
        for p in 0..n {
            let mut v = 0.0;
            for j in 0..3 {
                v += d[sym_index(i, j)][j][p];
            }
            let tr = d[0][i][p] + d[3][i][p] + d[5][i][p];
            out[p] = v - 0.5 * tr;
        }
    }
    OneFormField::from_cartesian(disc, &cart)
}

/// Mean curvature of the unit sphere in `g̃` with respect to the normal
/// pointing to infinity.
pub fn mean_curvature(state: &MetricState) -> Result<SurfaceScalar> {
    state.theta_only_validate()?;
    let disc = state.disc();
    let val = Jets::new(&state.theta, &state.lapse_pert);
    let n_ang = disc.grid.n_ang();
    let s = disc.grid.radial.nodes()[0];
    Ok(SurfaceScalar(
        (0..n_ang)
            .map(|a| node_mean_curvature(&node_geometry(&val.input::<f64>(None, a)), disc.frames[a][0], s))
            .collect(),
    ))
}

/// Quantities entering the reduction argument: scalar curvature `R(g̃)`,
/// the elliptic residual of `ω`, and the trace defect `R − g̃^{jk} ω_{j;k}`.
pub fn reduction_residual(state: &MetricState) -> Result<(ScalarField, OneFormField, ScalarField)> {
    let disc = state.disc();
    let geo = flat_geometry(state)?;
    let n = disc.grid.len();
    let val = Jets::new(&state.theta, &state.lapse_pert);
    // ∂_m (∇ω)_jk by differentiating the grid field of ∇ω.
    let nw: Vec<Vec<f64>> = (0..9)
        .map(|c| (0..n).map(|p| geo[p].nabla_omega[c / 3][c % 3]).collect())
        .collect();
    let dnw: Vec<[Vec<f64>; 3]> = nw.par_iter().map(|c| gradient(disc, c)).collect();
    let mut eq8 = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for p in 0..n {
        let g = &geo[p];
        let cn = |k: usize, i: usize, j: usize| g.conn[k][sym_index(i, j)];
        let gi = |i: usize, j: usize| g.ginv[sym_index(i, j)];
        let w = |j: usize, k: usize| g.nabla_omega[j][k];
        let f = 1.0 + val.ph[p];
        let grad_f: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| gi(i, j) * val.dph[j][p]).sum::<f64>() / f);
        let omega_up: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| gi(i, j) * g.omega[j]).sum());
        for k in 0..3 {
            let mut lap = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    // ∇_i (∇ω)_jk
                    let mut v = dnw[j * 3 + k][i][p];
                    for l in 0..3 {
                        v -= cn(l, i, j) * w(l, k) + cn(l, i, k) * w(j, l);
                    }
                    lap += gi(i, j) * v;
                }
            }
            let mut cross = 0.0;
            for i in 0..3 {
                cross += grad_f[i] * 0.5 * (w(i, k) + w(k, i));
            }
            let mut ric_w = 0.0;
            for j in 0..3 {
                ric_w += omega_up[j] * g.ric[sym_index(j, k)];
            }
            eq8[k][p] = lap + 2.0 * cross + ric_w;
        }
    }
    let r = split_scalar(disc, |i| geo[i].scalar_curv).0;
    let defect = split_scalar(disc, |i| geo[i].scalar_curv - geo[i].trace_nabla_omega).0;
    Ok((r, OneFormField::from_cartesian(disc, &eq8), defect))
}

/// Pointwise parts of the unmodified static equations: `f Ric − Hess f` and
/// `Δ f`, as fields.
pub fn static_defect(state: &MetricState) -> Result<(SymTensorField, ScalarField)> {
    let geo = flat_geometry(state)?;
    let disc = state.disc();
    let f = &state.lapse_pert.values;
    let t = split_sym(disc, |i| {
        let g = &geo[i];
        std::array::from_fn(|c| (1.0 + f[i]) * g.ric[c] - g.hess[c])
    })
    .0;
    let lap = split_scalar(disc, |i| geo[i].lap).0;
    Ok((t, lap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::standard;

    fn conformal_state(disc: &Discretization, m: f64) -> MetricState {
        let theta = SymTensorField::from_cartesian_fn(disc, |s, _| {
            let u = 1.0 + 0.5 * m * s;
            let c = u.powi(4) - 1.0;
            [c, 0.0, 0.0, c, 0.0, c]
        });
        MetricState::new(theta, ScalarField::zeros(disc)).unwrap()
    }

    #[test]
    fn flat_state_has_zero_residual_for_round_data() {
        let disc = standard(10, 4).unwrap();
        let st = MetricState::flat(&disc);
        let r = static_residual(&st, &BoundaryData::round(&disc)).unwrap();
        assert!(r.slot_max().iter().all(|v| *v < 1e-13), "{:?}", r.slot_max());
    }

    #[test]
    fn conformally_flat_ricci_matches_closed_form() {
        let disc = standard(24, 4).unwrap();
        let m = 0.1;
        let st = conformal_state(&disc, m);
        let ric = ricci(&st).unwrap();
        let n_ang = disc.grid.n_ang();
        for (ir, &s) in disc.grid.radial.nodes().iter().enumerate() {
            // w = 2 ln u; in frame components the radial derivatives are
            // w' = dw/dr, w'' = d²w/dr².
            let u = 1.0 + 0.5 * m * s;
            let up = -0.5 * m * s * s;
            let upp = m * s * s * s;
            let wp = 2.0 * up / u;
            let wpp = 2.0 * (upp / u - (up / u).powi(2));
            let lap_w = wpp + 2.0 * s * wp;
            let rr = -(wpp - wp * wp) - (lap_w + wp * wp);
            let tt = -(s * wp) - (lap_w + wp * wp);
            for a in 0..n_ang {
                let t = ric.at(ir * n_ang + a);
                assert!((t[0] - rr).abs() < 1e-9, "{} {}", t[0], rr);
                assert!((t[3] - tt).abs() < 1e-9 && (t[5] - tt).abs() < 1e-9);
                assert!(t[1].abs() < 1e-9 && t[2].abs() < 1e-9 && t[4].abs() < 1e-9);
            }
        }
        let (r, _, _) = reduction_residual(&st).unwrap();
        assert!(r.max_abs() < 1e-8);
    }

    #[test]
    fn gauge_form_of_conformal_metric() {
        let disc = standard(20, 4).unwrap();
        let m = 0.1;
        let st = conformal_state(&disc, m);
        let w = gauge_one_form(&st);
        for (ir, &s) in disc.grid.radial.nodes().iter().enumerate() {
            let u = 1.0 + 0.5 * m * s;
            let expect = m * u.powi(3) * s * s;
            for a in 0..disc.grid.n_ang() {
                let i = ir * disc.grid.n_ang() + a;
                assert!((w.comps[0][i] - expect).abs() < 1e-11);
                assert!(w.comps[1][i].abs() < 1e-11 && w.comps[2][i].abs() < 1e-11);
            }
        }
    }

    #[test]
    fn mean_curvature_of_homothety() {
        let disc = standard(8, 3).unwrap();
        let c: f64 = 1.3;
        let theta = SymTensorField::from_cartesian_fn(&disc, |_, _| {
            let v = c * c - 1.0;
            [v, 0.0, 0.0, v, 0.0, v]
        });
        let st = MetricState::new(theta, ScalarField::zeros(&disc)).unwrap();
        let h = mean_curvature(&st).unwrap();
        assert!(h.0.iter().all(|v| (v - 2.0 / c).abs() < 1e-13));
        let flat = mean_curvature(&MetricState::flat(&disc)).unwrap();
        assert!(flat.0.iter().all(|v| (v - 2.0).abs() < 1e-14));
    }

    #[test]
    fn hessian_of_inverse_radius() {
        let disc = standard(12, 3).unwrap();
        let u = ScalarField::from_fn(&disc, |s, _| s);
        let (hess, lap) = hessian_and_laplacian(&u, &MetricState::flat(&disc)).unwrap();
        for (ir, &s) in disc.grid.radial.nodes().iter().enumerate() {
            for a in 0..disc.grid.n_ang() {
                let i = ir * disc.grid.n_ang() + a;
                let t = hess.at(i);
                let s3 = s * s * s;
                assert!((t[0] - 2.0 * s3).abs() < 1e-12 && (t[3] + s3).abs() < 1e-12 && (t[5] + s3).abs() < 1e-12);
                assert!(lap.values[i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tangent_matches_central_difference() {
        let disc = standard(10, 3).unwrap();
        let st = conformal_state(&disc, 0.2);
        let dir = MetricState::new(
            SymTensorField::from_cartesian_fn(&disc, |s, x| {
                [s * x[0], s * s, 0.0, s * x[2] * x[2], s * x[1], s * s * x[0]]
            }),
            ScalarField::from_fn(&disc, |s, x| s * x[1] * x[1]),
        )
        .unwrap();
        let bd = BoundaryData::round(&disc);
        let (_, tan) = static_residual_with_tangent(&st, &dir, &bd).unwrap();
        let t = 1e-5;
        let mut plus = st.clone();
        plus.axpy(t, &dir);
        let mut minus = st.clone();
        minus.axpy(-t, &dir);
        let mut fd = static_residual(&plus, &bd).unwrap();
        fd.axpy(-1.0, &static_residual(&minus, &bd).unwrap());
        let fd = fd.scale(0.5 / t);
        let mut diff = fd.clone();
        diff.axpy(-1.0, &tan);
        let scale = tan.slot_max();
        for (k, d) in diff.slot_max().iter().enumerate() {
            assert!(*d < 1e-7 * (1.0 + scale[k]), "slot {k}: {d}");
        }
    }
}
