//! Regge–Wheeler decomposition of grid fields into even and odd parity
//! radial profiles.
//!
//! Profiles are stored frame-normalized so that they stay regular at `s = 0`.
//! For a symmetric tensor in the orthonormal frame:
//!
//! * even: `T_rr = a Y`, `T_rA = b ∇_A Y`, `T_AB = c Hess_AB Y + d Y δ_AB`
//! * odd: `T_rA = b (∇Y)*_A`, `T_AB = c (Hess Y)*_AB`
//!
//! where `∇` and `Hess` act on the unit sphere. 1-forms use the `a`, `b`
//! slots the same way and scalars use `a` only. [`RadialProfile::to_coordinate`]
//! converts to the coordinate-frame profiles in `r`, which carry extra powers
//! of `r` on the tangential parts.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::field::{Discretization, OneFormField, ScalarField, SymTensorField};
use crate::grid::RadialGrid;
use crate::harmonics::{Harmonic, HarmonicJet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            other => Err(Error::InvalidConfig(format!("unknown parity `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    OneForm,
    Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeKey {
    pub harmonic: Harmonic,
    pub parity: Parity,
}

impl ModeKey {
    pub fn new(l: usize, m: usize, parity: Parity) -> Self {
        Self {
            harmonic: Harmonic::new(l, m),
            parity,
        }
    }
}

/// Which of `a, b, c, d` a mode of this kind can carry.
pub fn allowed_profiles(kind: FieldKind, l: usize, parity: Parity) -> [bool; 4] {
    match (kind, parity) {
        (FieldKind::Scalar, Parity::Even) => [true, false, false, false],
        (FieldKind::Scalar, Parity::Odd) => [false; 4],
        (FieldKind::OneForm, Parity::Even) => [true, l >= 1, false, false],
        (FieldKind::OneForm, Parity::Odd) => [false, l >= 1, false, false],
        (FieldKind::Tensor, Parity::Even) => [true, l >= 1, l >= 2, true],
        (FieldKind::Tensor, Parity::Odd) => [false, l >= 1, l >= 2, false],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
}

impl RadialProfile {
    pub fn zeros(n_r: usize) -> Self {
        Self {
            a: vec![0.0; n_r],
            b: vec![0.0; n_r],
            c: vec![0.0; n_r],
            d: vec![0.0; n_r],
        }
    }

    pub fn get(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.a,
            1 => &self.b,
            2 => &self.c,
            _ => &self.d,
        }
    }

    pub fn get_mut(&mut self, k: usize) -> &mut Vec<f64> {
        match k {
            0 => &mut self.a,
            1 => &mut self.b,
            2 => &mut self.c,
            _ => &mut self.d,
        }
    }

    pub fn max_abs(&self) -> f64 {
        (0..4)
            .flat_map(|k| self.get(k).iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coordinate-frame profiles in `r`: `b_coord = r b`, and for odd
    /// tensors `c_coord = r² c`. Values at `s = 0` are the finite limits,
    /// obtained from `s`-derivatives.
    pub fn to_coordinate(&self, radial: &RadialGrid, kind: FieldKind, parity: Parity) -> Self {
        let mut out = self.clone();
        let nodes = radial.nodes();
        let last = radial.infinity_index();
        let d1 = radial.d1();
        let d2 = radial.d2();
        let row_dot = |m: &nalgebra::DMatrix<f64>, v: &[f64]| -> f64 {
            (0..v.len()).map(|j| m[(last, j)] * v[j]).sum()
        };
        for (i, &s) in nodes.iter().enumerate() {
            if i != last {
                out.b[i] = self.b[i] / s;
            }
        }
        out.b[last] = row_dot(d1, &self.b);
        if kind == FieldKind::Tensor && parity == Parity::Odd {
            for (i, &s) in nodes.iter().enumerate() {
                if i != last {
                    out.c[i] = self.c[i] / (s * s);
                }
            }
            out.c[last] = 0.5 * row_dot(d2, &self.c);
        }
        out
    }

    /// Inverse of [`Self::to_coordinate`] away from `s = 0`; the `s = 0`
    /// entries of the result are zero (decaying fields).
    pub fn from_coordinate(&self, radial: &RadialGrid, kind: FieldKind, parity: Parity) -> Self {
        let mut out = self.clone();
        let odd_tensor = kind == FieldKind::Tensor && parity == Parity::Odd;
        for (i, &s) in radial.nodes().iter().enumerate() {
            out.b[i] = self.b[i] * s;
            if odd_tensor {
                out.c[i] = self.c[i] * s * s;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ModeSpectrum {
    pub kind: FieldKind,
    pub lmax: usize,
    pub n_r: usize,
    pub modes: BTreeMap<ModeKey, RadialProfile>,
}

impl ModeSpectrum {
    pub fn new(kind: FieldKind, lmax: usize, n_r: usize) -> Self {
        Self {
            kind,
            lmax,
            n_r,
            modes: BTreeMap::new(),
        }
    }

    /// Mutable access to a profile, created as zeros when absent.
    pub fn entry(&mut self, key: ModeKey) -> Result<&mut RadialProfile> {
        if key.harmonic.l > self.lmax || key.harmonic.m == 0 || key.harmonic.m > 2 * key.harmonic.l + 1 {
            return Err(Error::ModeOutOfRange {
                l: key.harmonic.l,
                m: key.harmonic.m,
            });
        }
        let n_r = self.n_r;
        Ok(self.modes.entry(key).or_insert_with(|| RadialProfile::zeros(n_r)))
    }

    pub fn get(&self, key: ModeKey) -> Option<&RadialProfile> {
        self.modes.get(&key)
    }

    /// Largest profile magnitude over all modes.
    pub fn max_abs(&self) -> f64 {
        self.modes.values().fold(0.0, |m, p| m.max(p.max_abs()))
    }

    /// Drop modes whose profiles are all below `tol` in magnitude.
    pub fn prune(&mut self, tol: f64) {
        self.modes.retain(|_, p| p.max_abs() > tol);
    }
}

/// Fields that decompose into a [`ModeSpectrum`].
pub trait ModeField: Sized {
    const KIND: FieldKind;
    fn disc(&self) -> &Discretization;
    fn analyze(&self) -> ModeSpectrum;
    fn synthesize(spectrum: &ModeSpectrum, disc: &Discretization) -> Result<Self>;
}

pub fn transform_to_modes<F: ModeField>(field: &F) -> ModeSpectrum {
    field.analyze()
}

pub fn transform_from_modes<F: ModeField>(spectrum: &ModeSpectrum, disc: &Discretization) -> Result<F> {
    if spectrum.kind != F::KIND {
        return Err(Error::InvalidConfig("spectrum kind does not match field type".into()));
    }
    if spectrum.n_r != disc.grid.n_r() {
        return Err(Error::GridMismatch);
    }
    if spectrum.lmax > disc.grid.lmax() {
        return Err(Error::ModeOutOfRange {
            l: spectrum.lmax,
            m: 0,
        });
    }
    F::synthesize(spectrum, disc)
}

fn hess_tf_norm(l: usize) -> f64 {
    let l = l as f64;
    0.5 * (l - 1.0) * l * (l + 1.0) * (l + 2.0)
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn dot_sym2(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]
}

/// Project one shell's worth of frame components onto a harmonic.
/// `comps` holds `[rr, rθ, rφ, θθ, θφ, φφ]` (absent entries empty).
fn project_shell(
    kind: FieldKind,
    h: Harmonic,
    jets: &[HarmonicJet],
    weights: &[f64],
    comps: &[&[f64]],
) -> [[f64; 4]; 2] {
    let l = h.l;
    let norm = h.norm_sq();
    let ll = h.eigen();
    let mut even = [0.0; 4];
    let mut odd = [0.0; 4];
    let (mut ya, mut ge, mut go, mut tr, mut ce, mut co) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (a, jet) in jets.iter().enumerate() {
        let w = weights[a];
        ya += w * comps[0][a] * jet.y;
        if kind == FieldKind::Scalar {
            continue;
        }
        let v = [comps[1][a], comps[2][a]];
        ge += w * dot2(v, jet.grad);
        go += w * dot2(v, jet.grad_star());
        if kind == FieldKind::Tensor {
            let t = [comps[3][a], comps[4][a], comps[5][a]];
            tr += w * (t[0] + t[2]) * jet.y;
            ce += w * dot_sym2(t, jet.hess_tf());
            co += w * dot_sym2(t, jet.hess_star());
        }
    }
    even[0] = ya / norm;
    if kind != FieldKind::Scalar && l >= 1 {
        even[1] = ge / (ll * norm);
        odd[1] = go / (ll * norm);
    }
    if kind == FieldKind::Tensor {
        if l >= 2 {
            even[2] = ce / (hess_tf_norm(l) * norm);
            odd[2] = co / (hess_tf_norm(l) * norm);
        }
        even[3] = (tr / norm + ll * even[2]) / 2.0;
    }
    [even, odd]
}

fn analyze_components(
    kind: FieldKind,
    disc: &Discretization,
    comps: &[&[f64]],
) -> ModeSpectrum {
    use rayon::prelude::*;
    let grid = &disc.grid;
    let lmax = grid.lmax();
    let n_r = grid.n_r();
    let n_ang = grid.n_ang();
    let weights: Vec<f64> = (0..n_ang)
        .map(|a| grid.angular.weight(a / grid.angular.n_phi()))
        .collect();
    let harmonics: Vec<Harmonic> = Harmonic::all(lmax).collect();
    let per_mode: Vec<(Harmonic, RadialProfile, RadialProfile)> = harmonics
        .par_iter()
        .map(|&h| {
            let jets = disc.harmonics.jets(h);
            let mut even = RadialProfile::zeros(n_r);
            let mut odd = RadialProfile::zeros(n_r);
            for ir in 0..n_r {
                let shell: Vec<&[f64]> = comps
                    .iter()
                    .map(|c| &c[ir * n_ang..(ir + 1) * n_ang])
                    .collect();
                let [e, o] = project_shell(kind, h, jets, &weights, &shell);
                for k in 0..4 {
                    even.get_mut(k)[ir] = e[k];
                    odd.get_mut(k)[ir] = o[k];
                }
            }
            (h, even, odd)
        })
        .collect();
    let mut out = ModeSpectrum::new(kind, lmax, n_r);
    for (h, even, odd) in per_mode {
        out.modes.insert(
            ModeKey {
                harmonic: h,
                parity: Parity::Even,
            },
            even,
        );
        if kind != FieldKind::Scalar && h.l >= 1 {
            out.modes.insert(
                ModeKey {
                    harmonic: h,
                    parity: Parity::Odd,
                },
                odd,
            );
        }
    }
    out
}

/// Mode coefficients of a single shell of frame components (surface data or
/// one radial level), keyed like a [`ModeSpectrum`].
pub fn analyze_shell(kind: FieldKind, disc: &Discretization, comps: &[&[f64]]) -> BTreeMap<ModeKey, [f64; 4]> {
    let grid = &disc.grid;
    let weights: Vec<f64> = (0..grid.n_ang())
        .map(|a| grid.angular.weight(a / grid.angular.n_phi()))
        .collect();
    let mut out = BTreeMap::new();
    for h in Harmonic::all(grid.lmax()) {
        let [e, o] = project_shell(kind, h, disc.harmonics.jets(h), &weights, comps);
        out.insert(ModeKey { harmonic: h, parity: Parity::Even }, e);
        if kind != FieldKind::Scalar && h.l >= 1 {
            out.insert(ModeKey { harmonic: h, parity: Parity::Odd }, o);
        }
    }
    out
}

/// Synthesize frame components `[rr, rθ, rφ, θθ, θφ, φφ]` (scalars use the
/// first slot only).
fn synthesize_components(spectrum: &ModeSpectrum, disc: &Discretization) -> Vec<Vec<f64>> {
    let n_ang = disc.grid.n_ang();
    let n = disc.grid.len();
    let ncomp = match spectrum.kind {
        FieldKind::Scalar => 1,
        FieldKind::OneForm => 3,
        FieldKind::Tensor => 6,
    };
    let mut out = vec![vec![0.0; n]; ncomp];
    for (key, prof) in &spectrum.modes {
        let allowed = allowed_profiles(spectrum.kind, key.harmonic.l, key.parity);
        let jets = disc.harmonics.jets(key.harmonic);
        for ir in 0..disc.grid.n_r() {
            let p: [f64; 4] = std::array::from_fn(|k| if allowed[k] { prof.get(k)[ir] } else { 0.0 });
            if p.iter().all(|v| *v == 0.0) {
                continue;
            }
            for (a, jet) in jets.iter().enumerate() {
                let i = ir * n_ang + a;
                let (g, hs) = match key.parity {
                    Parity::Even => (jet.grad, jet.hess),
                    Parity::Odd => (jet.grad_star(), jet.hess_star()),
                };
                out[0][i] += p[0] * jet.y;
                if ncomp == 1 {
                    continue;
                }
                out[1][i] += p[1] * g[0];
                out[2][i] += p[1] * g[1];
                if ncomp == 6 {
                    out[3][i] += p[2] * hs[0] + p[3] * jet.y;
                    out[4][i] += p[2] * hs[1];
                    out[5][i] += p[2] * hs[2] + p[3] * jet.y;
                }
            }
        }
    }
    out
}

impl ModeField for ScalarField {
    const KIND: FieldKind = FieldKind::Scalar;
    fn disc(&self) -> &Discretization {
        &self.disc
    }
    fn analyze(&self) -> ModeSpectrum {
        analyze_components(FieldKind::Scalar, &self.disc, &[&self.values])
    }
    fn synthesize(spectrum: &ModeSpectrum, disc: &Discretization) -> Result<Self> {
        let mut c = synthesize_components(spectrum, disc);
        ScalarField::from_values(disc, c.remove(0))
    }
}

impl ModeField for OneFormField {
    const KIND: FieldKind = FieldKind::OneForm;
    fn disc(&self) -> &Discretization {
        &self.disc
    }
    fn analyze(&self) -> ModeSpectrum {
        let c: Vec<&[f64]> = self.comps.iter().map(|v| v.as_slice()).collect();
        analyze_components(FieldKind::OneForm, &self.disc, &c)
    }
    fn synthesize(spectrum: &ModeSpectrum, disc: &Discretization) -> Result<Self> {
        let c = synthesize_components(spectrum, disc);
        let mut out = OneFormField::zeros(disc);
        for (k, v) in c.into_iter().enumerate() {
            out.comps[k] = v;
        }
        Ok(out)
    }
}

impl ModeField for SymTensorField {
    const KIND: FieldKind = FieldKind::Tensor;
    fn disc(&self) -> &Discretization {
        &self.disc
    }
    fn analyze(&self) -> ModeSpectrum {
        let c: Vec<&[f64]> = self.comps.iter().map(|v| v.as_slice()).collect();
        analyze_components(FieldKind::Tensor, &self.disc, &c)
    }
    fn synthesize(spectrum: &ModeSpectrum, disc: &Discretization) -> Result<Self> {
        let c = synthesize_components(spectrum, disc);
        let mut out = SymTensorField::zeros(disc);
        for (k, v) in c.into_iter().enumerate() {
            out.comps[k] = v;
        }
        Ok(out)
    }
}
