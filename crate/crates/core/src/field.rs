//! Grid fields in the orthonormal spherical frame `(e_r, e_θ, e_φ)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::harmonics::HarmonicTable;
use crate::spectral::ScalarTransform;

/// Grid plus the precomputed tables every field operation needs.
#[derive(Debug)]
pub struct DiscretizationData {
    pub grid: Grid,
    pub harmonics: HarmonicTable,
    pub transform: ScalarTransform,
    /// Orthonormal frame `[e_r, e_θ, e_φ]` in Cartesian components per angular node.
    pub frames: Vec<[[f64; 3]; 3]>,
}

pub type Discretization = Arc<DiscretizationData>;

pub fn discretization(grid: Grid) -> Discretization {
    let harmonics = HarmonicTable::new(&grid.angular, grid.lmax());
    let transform = ScalarTransform::new(&grid.angular);
    let frames = (0..grid.n_ang())
        .map(|a| {
            let (c, s, p) = grid.angular.angles(a);
            [
                [s * p.cos(), s * p.sin(), c],
                [c * p.cos(), c * p.sin(), -s],
                [-p.sin(), p.cos(), 0.0],
            ]
        })
        .collect();
    Arc::new(DiscretizationData {
        grid,
        harmonics,
        transform,
        frames,
    })
}

/// Convenience constructor for the standard grid at a given resolution.
pub fn standard(n_r: usize, lmax: usize) -> Result<Discretization> {
    Ok(discretization(Grid::new(n_r, lmax)?))
}

/// Position of `(i, j)` among the six stored components of a symmetric
/// 3x3 tensor, ordered `00, 01, 02, 11, 12, 22`.
pub const fn sym_index(i: usize, j: usize) -> usize {
    const MAP: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    MAP[i][j]
}

pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Rotate a symmetric tensor between frames: `out_ij = R_ai R_bj t_ab`
/// (`to_cartesian = true`) or `out_ab = R_ai R_bj t_ij`.
pub fn rotate_sym(frame: &[[f64; 3]; 3], t: &[f64; 6], to_cartesian: bool) -> [f64; 6] {
    let full = |i: usize, j: usize| t[sym_index(i, j)];
    let mut out = [0.0; 6];
    for (k, &(i, j)) in SYM_PAIRS.iter().enumerate() {
        let mut v = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                v += if to_cartesian {
                    frame[a][i] * frame[b][j] * full(a, b)
                } else {
                    frame[i][a] * frame[j][b] * full(a, b)
                };
            }
        }
        out[k] = v;
    }
    out
}

pub fn rotate_vec(frame: &[[f64; 3]; 3], v: &[f64; 3], to_cartesian: bool) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        for a in 0..3 {
            *o += if to_cartesian {
                frame[a][i] * v[a]
            } else {
                frame[i][a] * v[a]
            };
        }
    }
    out
}

fn check_finite(values: &[f64]) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite field value at node {i}")));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    pub disc: Discretization,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(disc: &Discretization) -> Self {
        Self {
            disc: disc.clone(),
            values: vec![0.0; disc.grid.len()],
        }
    }

    pub fn from_values(disc: &Discretization, values: Vec<f64>) -> Result<Self> {
        if values.len() != disc.grid.len() {
            return Err(Error::GridMismatch);
        }
        check_finite(&values)?;
        Ok(Self {
            disc: disc.clone(),
            values,
        })
    }

    /// Sample `f(s, x)` where `x` is the unit position vector.
    pub fn from_fn(disc: &Discretization, f: impl Fn(f64, [f64; 3]) -> f64) -> Self {
        let n_ang = disc.grid.n_ang();
        let mut values = vec![0.0; disc.grid.len()];
        for (ir, &s) in disc.grid.radial.nodes().iter().enumerate() {
            for a in 0..n_ang {
                values[ir * n_ang + a] = f(s, disc.frames[a][0]);
            }
        }
        Self {
            disc: disc.clone(),
            values,
        }
    }

    pub fn shell(&self, ir: usize) -> &[f64] {
        let n = self.disc.grid.n_ang();
        &self.values[ir * n..(ir + 1) * n]
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            disc: self.disc.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn axpy(&mut self, c: f64, other: &ScalarField) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A 1-form with components `[ω(e_r), ω(e_θ), ω(e_φ)]`.
#[derive(Debug, Clone)]
pub struct OneFormField {
    pub disc: Discretization,
    pub comps: [Vec<f64>; 3],
}

impl OneFormField {
    pub fn zeros(disc: &Discretization) -> Self {
        let n = disc.grid.len();
        Self {
            disc: disc.clone(),
            comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]],
        }
    }

    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.comps[0][i], self.comps[1][i], self.comps[2][i]]
    }

    pub fn set(&mut self, i: usize, v: [f64; 3]) {
        for k in 0..3 {
            self.comps[k][i] = v[k];
        }
    }

    pub fn from_cartesian(disc: &Discretization, cart: &[Vec<f64>; 3]) -> Self {
        let mut out = Self::zeros(disc);
        let n_ang = disc.grid.n_ang();
        for i in 0..disc.grid.len() {
            let v = [cart[0][i], cart[1][i], cart[2][i]];
            out.set(i, rotate_vec(&disc.frames[i % n_ang], &v, false));
        }
        out
    }

    pub fn to_cartesian(&self) -> [Vec<f64>; 3] {
        let n = self.disc.grid.len();
        let n_ang = self.disc.grid.n_ang();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let v = rotate_vec(&self.disc.frames[i % n_ang], &self.at(i), true);
            for k in 0..3 {
                out[k][i] = v[k];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A symmetric 2-tensor with frame components `rr, rθ, rφ, θθ, θφ, φφ`.
#[derive(Debug, Clone)]
pub struct SymTensorField {
    pub disc: Discretization,
    pub comps: [Vec<f64>; 6],
}

impl SymTensorField {
    pub fn zeros(disc: &Discretization) -> Self {
        let n = disc.grid.len();
        Self {
            disc: disc.clone(),
            comps: std::array::from_fn(|_| vec![0.0; n]),
        }
    }

    pub fn at(&self, i: usize) -> [f64; 6] {
        std::array::from_fn(|k| self.comps[k][i])
    }

    pub fn set(&mut self, i: usize, v: [f64; 6]) {
        for k in 0..6 {
            self.comps[k][i] = v[k];
        }
    }

    /// Sample a tensor given by its Cartesian components as a function of
    /// `(s, unit position)`.
    pub fn from_cartesian_fn(disc: &Discretization, f: impl Fn(f64, [f64; 3]) -> [f64; 6]) -> Self {
        let mut out = Self::zeros(disc);
        let n_ang = disc.grid.n_ang();
        for (ir, &s) in disc.grid.radial.nodes().iter().enumerate() {
            for a in 0..n_ang {
                let frame = &disc.frames[a];
                let cart = f(s, frame[0]);
                out.set(ir * n_ang + a, rotate_sym(frame, &cart, false));
            }
        }
        out
    }

    pub fn from_cartesian(disc: &Discretization, cart: &[Vec<f64>; 6]) -> Self {
        let mut out = Self::zeros(disc);
        let n_ang = disc.grid.n_ang();
        for i in 0..disc.grid.len() {
            let t: [f64; 6] = std::array::from_fn(|k| cart[k][i]);
            out.set(i, rotate_sym(&disc.frames[i % n_ang], &t, false));
        }
        out
    }

    pub fn to_cartesian(&self) -> [Vec<f64>; 6] {
        let n = self.disc.grid.len();
        let n_ang = self.disc.grid.n_ang();
        let mut out: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
        for i in 0..n {
            let t = rotate_sym(&self.disc.frames[i % n_ang], &self.at(i), true);
            for k in 0..6 {
                out[k][i] = t[k];
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            disc: self.disc.clone(),
            comps: std::array::from_fn(|k| self.comps[k].iter().map(|v| c * v).collect()),
        }
    }

    pub fn axpy(&mut self, c: f64, other: &SymTensorField) {
        for k in 0..6 {
            for (a, b) in self.comps[k].iter_mut().zip(&other.comps[k]) {
                *a += c * b;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise frame norm squared `Σ_ab T_ab^2`.
    pub fn norm_sq_at(&self, i: usize) -> f64 {
        let t = self.at(i);
        t[0] * t[0] + t[3] * t[3] + t[5] * t[5] + 2.0 * (t[1] * t[1] + t[2] * t[2] + t[4] * t[4])
    }
}

/// A function on the boundary sphere, sampled on the angular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceScalar(pub Vec<f64>);

/// A 1-form along the boundary sphere with normal and tangential parts
/// `[ω(e_r), ω(e_θ), ω(e_φ)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceOneForm(pub [Vec<f64>; 3]);

/// A symmetric tangential 2-tensor on the sphere, `[θθ, θφ, φφ]` in the
/// orthonormal frame of the unit round sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTensor(pub [Vec<f64>; 3]);

impl SurfaceScalar {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }
}

impl SurfaceOneForm {
    pub fn zeros(n: usize) -> Self {
        Self([vec![0.0; n], vec![0.0; n], vec![0.0; n]])
    }
}

impl SurfaceTensor {
    pub fn zeros(n: usize) -> Self {
        Self([vec![0.0; n], vec![0.0; n], vec![0.0; n]])
    }

    /// The round metric `g_o|_{S²}`.
    pub fn round(n: usize) -> Self {
        Self([vec![1.0; n], vec![0.0; n], vec![1.0; n]])
    }
}
