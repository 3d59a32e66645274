//! The group of reflections through the three coordinate planes.
//!
//! A reflection `ι = diag(±1, ±1, ±1)` pulls back Cartesian components as
//! `(ι* T)_ij(x) = ι_i ι_j T_ij(ι x)`. Fields are converted to Cartesian
//! components, permuted over the (reflection-invariant) angular grid, signed
//! and converted back.

use crate::field::{
    rotate_sym, rotate_vec, Discretization, DiscretizationData, OneFormField, ScalarField,
    SurfaceOneForm, SurfaceScalar, SurfaceTensor, SymTensorField, SYM_PAIRS,
};

/// All eight group elements as axis flips, identity first.
pub fn group_elements() -> [[bool; 3]; 8] {
    std::array::from_fn(|k| [k & 1 != 0, k & 2 != 0, k & 4 != 0])
}

/// The three generating reflections, named by the plane they fix.
pub fn generators() -> [(&'static str, [bool; 3]); 3] {
    [
        ("x -> -x", [true, false, false]),
        ("y -> -y", [false, true, false]),
        ("z -> -z", [false, false, true]),
    ]
}

fn axis_sign(flip: [bool; 3], i: usize) -> f64 {
    if flip[i] {
        -1.0
    } else {
        1.0
    }
}

/// Node permutation induced by a reflection on a product grid with `n_r`
/// shells (`n_r = 1` for surface fields).
fn node_map(disc: &DiscretizationData, n_r: usize, flip: [bool; 3]) -> Vec<usize> {
    let n_ang = disc.grid.n_ang();
    let ang: Vec<usize> = (0..n_ang)
        .map(|a| disc.grid.angular.reflected_index(a, flip))
        .collect();
    (0..n_r * n_ang)
        .map(|i| (i / n_ang) * n_ang + ang[i % n_ang])
        .collect()
}

/// Pull back frame-component tensors stored as `[rr, rθ, rφ, θθ, θφ, φφ]`
/// arrays over `n_r` shells.
fn reflect_sym_comps(disc: &DiscretizationData, comps: &[Vec<f64>; 6], flip: [bool; 3]) -> [Vec<f64>; 6] {
    let n = comps[0].len();
    let n_ang = disc.grid.n_ang();
    let map = node_map(disc, n / n_ang, flip);
    let mut out: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; n]);
    for i in 0..n {
        let j = map[i];
        let src: [f64; 6] = std::array::from_fn(|k| comps[k][j]);
        let cart = rotate_sym(&disc.frames[j % n_ang], &src, true);
        let signed: [f64; 6] = std::array::from_fn(|k| {
            let (p, q) = SYM_PAIRS[k];
            axis_sign(flip, p) * axis_sign(flip, q) * cart[k]
        });
        let back = rotate_sym(&disc.frames[i % n_ang], &signed, false);
        for k in 0..6 {
            out[k][i] = back[k];
        }
    }
    out
}

fn reflect_vec_comps(disc: &DiscretizationData, comps: &[Vec<f64>; 3], flip: [bool; 3]) -> [Vec<f64>; 3] {
    let n = comps[0].len();
    let n_ang = disc.grid.n_ang();
    let map = node_map(disc, n / n_ang, flip);
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    for i in 0..n {
        let j = map[i];
        let src = [comps[0][j], comps[1][j], comps[2][j]];
        let cart = rotate_vec(&disc.frames[j % n_ang], &src, true);
        let signed: [f64; 3] = std::array::from_fn(|k| axis_sign(flip, k) * cart[k]);
        let back = rotate_vec(&disc.frames[i % n_ang], &signed, false);
        for k in 0..3 {
            out[k][i] = back[k];
        }
    }
    out
}

fn reflect_scalar_values(disc: &DiscretizationData, values: &[f64], flip: [bool; 3]) -> Vec<f64> {
    let map = node_map(disc, values.len() / disc.grid.n_ang(), flip);
    map.iter().map(|&j| values[j]).collect()
}

/// Pullback under the group and the linear operations needed to average.
pub trait Reflect: Clone {
    fn reflect(&self, disc: &DiscretizationData, flip: [bool; 3]) -> Self;
    fn add_scaled(&mut self, c: f64, other: &Self);
    fn scale_in_place(&mut self, c: f64);
    fn max_abs_diff(&self, other: &Self) -> f64;
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn axpy(a: &mut [f64], c: f64, b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += c * y;
    }
}

impl Reflect for ScalarField {
    fn reflect(&self, disc: &DiscretizationData, flip: [bool; 3]) -> Self {
        Self {
            disc: self.disc.clone(),
            values: reflect_scalar_values(disc, &self.values, flip),
        }
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        axpy(&mut self.values, c, &other.values);
    }
    fn scale_in_place(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        max_diff(&self.values, &other.values)
    }
}

impl Reflect for OneFormField {
    fn reflect(&self, disc: &DiscretizationData, flip: [bool; 3]) -> Self {
        Self {
            disc: self.disc.clone(),
            comps: reflect_vec_comps(disc, &self.comps, flip),
        }
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        for k in 0..3 {
            axpy(&mut self.comps[k], c, &other.comps[k]);
        }
    }
    fn scale_in_place(&mut self, c: f64) {
        self.comps.iter_mut().flatten().for_each(|v| *v *= c);
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..3).fold(0.0, |m, k| m.max(max_diff(&self.comps[k], &other.comps[k])))
    }
}

impl Reflect for SymTensorField {
    fn reflect(&self, disc: &DiscretizationData, flip: [bool; 3]) -> Self {
        Self {
            disc: self.disc.clone(),
            comps: reflect_sym_comps(disc, &self.comps, flip),
        }
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        for k in 0..6 {
            axpy(&mut self.comps[k], c, &other.comps[k]);
        }
    }
    fn scale_in_place(&mut self, c: f64) {
        self.comps.iter_mut().flatten().for_each(|v| *v *= c);
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..6).fold(0.0, |m, k| m.max(max_diff(&self.comps[k], &other.comps[k])))
    }
}

impl Reflect for SurfaceScalar {
    fn reflect(&self, disc: &DiscretizationData, flip: [bool; 3]) -> Self {
        Self(reflect_scalar_values(disc, &self.0, flip))
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        axpy(&mut self.0, c, &other.0);
    }
    fn scale_in_place(&mut self, c: f64) {
        self.0.iter_mut().for_each(|v| *v *= c);
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        max_diff(&self.0, &other.0)
    }
}

impl Reflect for SurfaceOneForm {
    fn reflect(&self, disc: &DiscretizationData, flip: [bool; 3]) -> Self {
        Self(reflect_vec_comps(disc, &self.0, flip))
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        for k in 0..3 {
            axpy(&mut self.0[k], c, &other.0[k]);
        }
    }
    fn scale_in_place(&mut self, c: f64) {
        self.0.iter_mut().flatten().for_each(|v| *v *= c);
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..3).fold(0.0, |m, k| m.max(max_diff(&self.0[k], &other.0[k])))
    }
}

impl Reflect for SurfaceTensor {
    fn reflect(&self, disc: &DiscretizationData, flip: [bool; 3]) -> Self {
        let n = self.0[0].len();
        let z = vec![0.0; n];
        let full = [
            z.clone(),
            z.clone(),
            z,
            self.0[0].clone(),
            self.0[1].clone(),
            self.0[2].clone(),
        ];
        let [_, _, _, tt, tp, pp] = reflect_sym_comps(disc, &full, flip);
        Self([tt, tp, pp])
    }
    fn add_scaled(&mut self, c: f64, other: &Self) {
        for k in 0..3 {
            axpy(&mut self.0[k], c, &other.0[k]);
        }
    }
    fn scale_in_place(&mut self, c: f64) {
        self.0.iter_mut().flatten().for_each(|v| *v *= c);
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..3).fold(0.0, |m, k| m.max(max_diff(&self.0[k], &other.0[k])))
    }
}

/// Average of the pullbacks over the whole group.
pub fn reflection_project<T: Reflect>(field: &T, disc: &Discretization) -> T {
    let mut acc = field.clone();
    for flip in group_elements().into_iter().skip(1) {
        acc.add_scaled(1.0, &field.reflect(disc, flip));
    }
    acc.scale_in_place(0.125);
    acc
}

/// Largest deviation `|ι* F − F|` over the generators, with the name of the
/// reflection attaining it.
pub fn symmetry_deviation<T: Reflect>(field: &T, disc: &Discretization) -> (&'static str, f64) {
    generators()
        .into_iter()
        .map(|(name, flip)| (name, field.reflect(disc, flip).max_abs_diff(field)))
        .fold(("none", 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::standard;

    #[test]
    fn projection_is_idempotent_and_fixes_invariant_fields() {
        let disc = standard(9, 4).unwrap();
        let t = SymTensorField::from_cartesian_fn(&disc, |s, x| {
            [s * x[0], s * x[1] * x[2], s * s, s * x[2], 0.2 * s, s * x[0] * x[1]]
        });
        let p = reflection_project(&t, &disc);
        let pp = reflection_project(&p, &disc);
        assert!(p.max_abs_diff(&pp) < 1e-13);
        assert!(symmetry_deviation(&p, &disc).1 < 1e-13);
        let inv = SymTensorField::from_cartesian_fn(&disc, |s, x| {
            [s * x[0] * x[0], 0.0, 0.0, s * x[1] * x[1], 0.0, s * s * x[2] * x[2]]
        });
        assert!(reflection_project(&inv, &disc).max_abs_diff(&inv) < 1e-13);
    }

    #[test]
    fn odd_scalars_and_forms_project_to_zero() {
        let disc = standard(8, 3).unwrap();
        let f = ScalarField::from_fn(&disc, |s, x| s * x[0]);
        assert!(reflection_project(&f, &disc).values.iter().all(|v| v.abs() < 1e-14));
        // dr is invariant, x dr is not
        let mut w = OneFormField::zeros(&disc);
        let n_ang = disc.grid.n_ang();
        for i in 0..disc.grid.len() {
            w.comps[0][i] = disc.frames[i % n_ang][0][2];
        }
        assert!(reflection_project(&w, &disc).max_abs() < 1e-14);
    }

    #[test]
    fn surface_tensor_round_metric_is_invariant() {
        let disc = standard(8, 3).unwrap();
        let n = disc.grid.n_ang();
        let g = SurfaceTensor::round(n);
        for flip in group_elements() {
            assert!(g.reflect(&disc, flip).max_abs_diff(&g) < 1e-14);
        }
    }
}
