use rayon::prelude::*;

use super::ops::volume_pairing;
use crate::field::{
    sym_index, Discretization, ScalarField, SurfaceOneForm, SurfaceScalar, SurfaceTensor, SymTensorField,
};
use crate::geometry::ResidualVector;
use crate::spectral::{gradient, jet2, radial_derivative};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CokernelKind {
    /// Built from `ξ_i = x_i / r` on the sphere, `i ∈ {0, 1, 2}`.
    Even(usize),
    Odd(usize),
}

/// A closed-form quintuple `(Υ, φ, η, τ, h)` annihilating the image of `T`.
#[derive(Debug, Clone)]
pub struct CokernelElement {
    pub kind: CokernelKind,
    pub upsilon: SymTensorField,
    pub phi: ScalarField,
    pub eta: SurfaceOneForm,
    /// Derived from `Υ` and `w` through the boundary relations; see [`tau_from_upsilon`].
    pub tau: SurfaceTensor,
    pub h: SurfaceScalar,
}

fn surface_integral(disc: &Discretization, f: impl Fn(usize) -> f64) -> f64 {
    let ang = &disc.grid.angular;
    (0..ang.len()).map(|a| ang.weight(a / ang.n_phi()) * f(a)).sum()
}

/// `(Υ|_Σ = w g)`: the trace average on the unit sphere.
fn w_of(upsilon: &SymTensorField, a: usize) -> f64 {
    0.5 * (upsilon.comps[3][a] + upsilon.comps[5][a])
}

/// Frame projection `e_A^i e_B^j X_ij` of a Cartesian 3×3 array onto the
/// tangent frame at angular node `a`, in the order `θθ, θφ, φφ`.
fn tangential(frame: &[[f64; 3]; 3], x: impl Fn(usize, usize) -> f64) -> [f64; 3] {
    let pr = |p: usize, q: usize| -> f64 {
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += frame[p][i] * frame[q][j] * x(i, j);
            }
        }
        v
    };
    [pr(1, 1), 0.5 * (pr(1, 2) + pr(2, 1)), pr(2, 2)]
}

/// `(S ∇_Σ v, div_Σ v)` for `v = Υ(n, ·)|_Σ`, computed from the ambient
/// derivative of the tangential field `V = Υ(n, ·) − Υ_nn n`.
fn surface_derivative_of_normal_part(upsilon: &SymTensorField) -> (Vec<[f64; 3]>, Vec<f64>) {
    let disc = &upsilon.disc;
    let n_ang = disc.grid.n_ang();
    let n = disc.grid.len();
    let cart = upsilon.to_cartesian();
    let mut v: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; n]);
    for p in 0..n {
        let nv = disc.frames[p % n_ang][0];
        let un: [f64; 3] = std::array::from_fn(|j| (0..3).map(|i| nv[i] * cart[sym_index(i, j)][p]).sum());
        let unn: f64 = (0..3).map(|j| un[j] * nv[j]).sum();
        for j in 0..3 {
            v[j][p] = un[j] - unn * nv[j];
        }
    }
    let dv: Vec<[Vec<f64>; 3]> = v.par_iter().map(|c| gradient(disc, c)).collect();
    let mut sym = Vec::with_capacity(n_ang);
    let mut div = Vec::with_capacity(n_ang);
    for a in 0..n_ang {
        let frame = &disc.frames[a];
        // dv[j][i] = ∂_i V_j
        let t = tangential(frame, |i, j| dv[j][i][a]);
        sym.push(t);
        div.push(t[0] + t[2]);
    }
    (sym, div)
}

/// `τ` from `−τ = w Π + S∇_Σ(Υ(n,·)) − ½ div_Σ(Υ(n,·)) g − ½ (∇_n Υ)|_Σ`.
/// The boundary terms here use the normal `n = ∂_r` pointing into the
/// exterior, for which the unit sphere has `Π = −g`.
pub fn tau_from_upsilon(upsilon: &SymTensorField) -> SurfaceTensor {
    let disc = &upsilon.disc;
    let n_ang = disc.grid.n_ang();
    let (sym, div) = surface_derivative_of_normal_part(upsilon);
    // (∇_n Υ)_AB = ∂_r Υ_AB = −∂_s Υ_AB at s = 1 (the frame is constant along rays).
    let dn: [Vec<f64>; 3] = std::array::from_fn(|k| {
        radial_derivative(disc, &upsilon.comps[3 + k])[..n_ang].iter().map(|v| -v).collect()
    });
    let mut tau = SurfaceTensor::zeros(n_ang);
    for a in 0..n_ang {
        let w = w_of(upsilon, a);
        let g = [1.0, 0.0, 1.0];
        for k in 0..3 {
            let minus_tau = -w * g[k] + sym[a][k] - 0.5 * div[a] * g[k] - 0.5 * dn[k][a];
            tau.0[k][a] = -minus_tau;
        }
    }
    tau
}

fn element(disc: &Discretization, kind: CokernelKind) -> CokernelElement {
    let n_ang = disc.grid.n_ang();
    let nodes = disc.grid.radial.nodes();
    let mut upsilon = SymTensorField::zeros(disc);
    let mut phi = ScalarField::zeros(disc);
    let mut eta = SurfaceOneForm::zeros(n_ang);
    let axis = match kind {
        CokernelKind::Even(i) | CokernelKind::Odd(i) => i,
    };
    for (ir, &s) in nodes.iter().enumerate() {
        for a in 0..n_ang {
            let f = &disc.frames[a];
            let xi = f[0][axis];
            let (gt, gp) = (f[1][axis], f[2][axis]);
            let i = ir * n_ang + a;
            match kind {
                CokernelKind::Even(_) => {
                    let s2 = s * s;
                    upsilon.set(i, [s2 * xi, s2 * gt, s2 * gp, -s2 * xi, 0.0, -s2 * xi]);
                    phi.values[i] = s2 * xi;
                    if ir == 0 {
                        eta.0[0][a] = -xi;
                        eta.0[1][a] = -gt;
                        eta.0[2][a] = -gp;
                    }
                }
                CokernelKind::Odd(_) => {
                    let s3 = s * s * s;
                    upsilon.set(i, [0.0, -s3 * gp, s3 * gt, 0.0, 0.0, 0.0]);
                    if ir == 0 {
                        eta.0[1][a] = gp;
                        eta.0[2][a] = -gt;
                    }
                }
            }
        }
    }
    let tau = tau_from_upsilon(&upsilon);
    let h = SurfaceScalar((0..n_ang).map(|a| w_of(&upsilon, a) + upsilon.comps[0][a]).collect());
    CokernelElement {
        kind,
        upsilon,
        phi,
        eta,
        tau,
        h,
    }
}

/// The three even and three odd closed-form elements, sampled on the grid.
pub fn cokernel_basis(disc: &Discretization) -> Vec<CokernelElement> {
    (0..3)
        .map(CokernelKind::Even)
        .chain((0..3).map(CokernelKind::Odd))
        .map(|k| element(disc, k))
        .collect()
}

const TENSOR_WEIGHTS: [f64; 6] = [1.0, 2.0, 2.0, 1.0, 2.0, 1.0];

/// `∫⟨Ψ, Υ⟩ + ∫ ψ φ + ∮ ⟨ζ, η⟩`.
pub fn pair_residual(res: &ResidualVector, ck: &CokernelElement) -> f64 {
    let disc = res.disc();
    let a: Vec<&[f64]> = res.interior_tensor.comps.iter().map(|c| c.as_slice()).collect();
    let b: Vec<&[f64]> = ck.upsilon.comps.iter().map(|c| c.as_slice()).collect();
    let interior = volume_pairing(disc, &a, &b, &TENSOR_WEIGHTS);
    let scalar = volume_pairing(disc, &[&res.interior_scalar.values], &[&ck.phi.values], &[1.0]);
    let gauge = surface_integral(disc, |i| (0..3).map(|k| res.bdry_gauge.0[k][i] * ck.eta.0[k][i]).sum());
    interior + scalar + gauge
}

/// The pairing including the metric and mean-curvature rows,
/// `+ ∮ ⟨Θ|_Σ, τ⟩ + ∮ (slot 5) h`.
pub fn full_pairing(res: &ResidualVector, ck: &CokernelElement) -> f64 {
    let disc = res.disc();
    let m = &res.bdry_metric.0;
    let metric = surface_integral(disc, |i| {
        m[0][i] * ck.tau.0[0][i] + 2.0 * m[1][i] * ck.tau.0[1][i] + m[2][i] * ck.tau.0[2][i]
    });
    let mean = surface_integral(disc, |i| res.bdry_meancurv.0[i] * ck.h.0[i]);
    pair_residual(res, ck) + metric + mean
}

/// Largest violations of the interior and boundary system characterising
/// cokernel elements.
#[derive(Debug, Clone, Copy)]
pub struct LemmaResiduals {
    pub laplace_upsilon: f64,
    pub laplace_phi: f64,
    pub phi_minus_unn: f64,
    pub normal_derivative: f64,
    pub divergence: f64,
    pub pure_trace: f64,
}

impl LemmaResiduals {
    pub fn max(&self) -> f64 {
        [
            self.laplace_upsilon,
            self.laplace_phi,
            self.phi_minus_unn,
            self.normal_derivative,
            self.divergence,
            self.pure_trace,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn lemma_residuals(ck: &CokernelElement) -> LemmaResiduals {
    let disc = &ck.upsilon.disc;
    let n_ang = disc.grid.n_ang();
    let n = disc.grid.len();
    let cart = ck.upsilon.to_cartesian();
    let jets: Vec<_> = cart.par_iter().map(|c| jet2(disc, c)).collect();
    let (_, ph_h) = jet2(disc, &ck.phi.values);
    let maxf = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, |m, v| m.max(v.abs()));
    // Interior equations are collocated on the open shells, as everywhere
    // else; Σ carries the boundary rows and s = 0 the decay condition.
    let interior = n_ang..n - n_ang;
    let laplace_upsilon = maxf(&mut (0..6).flat_map(|c| {
        let h = &jets[c].1;
        interior.clone().map(move |p| h[0][p] + h[3][p] + h[5][p])
    }));
    let laplace_phi = maxf(&mut interior.clone().map(|p| ph_h[0][p] + ph_h[3][p] + ph_h[5][p]));
    let phi_minus_unn = maxf(&mut (0..n_ang).map(|a| ck.phi.values[a] - ck.upsilon.comps[0][a]));
    let (_, div_v) = surface_derivative_of_normal_part(&ck.upsilon);
    let dphi = radial_derivative(disc, &ck.phi.values);
    let normal_derivative = maxf(&mut (0..n_ang).map(|a| -dphi[a] - div_v[a]));
    let divergence = maxf(&mut (0..n_ang).flat_map(|a| {
        let jets = &jets;
        (0..3).map(move |i| (0..3).map(|j| jets[sym_index(i, j)].0[j][a]).sum::<f64>())
    }));
    let pure_trace = maxf(&mut (0..n_ang).flat_map(|a| {
        let w = w_of(&ck.upsilon, a);
        [ck.upsilon.comps[3][a] - w, ck.upsilon.comps[4][a], ck.upsilon.comps[5][a] - w]
    }));
    LemmaResiduals {
        laplace_upsilon,
        laplace_phi,
        phi_minus_unn,
        normal_derivative,
        divergence,
        pure_trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::standard;

    #[test]
    fn elements_satisfy_the_adjoint_system() {
        let disc = standard(16, 4).unwrap();
        for ck in cokernel_basis(&disc) {
            let r = lemma_residuals(&ck);
            assert!(r.max() < 1e-10, "{:?}: {:?}", ck.kind, r);
            assert!(ck.h.0.iter().all(|v| v.abs() < 1e-14));
            let tau = ck.tau.0.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(tau < 1e-10, "{:?}: tau {tau}", ck.kind);
        }
    }

    #[test]
    fn even_and_odd_elements_are_orthogonal() {
        let disc = standard(16, 4).unwrap();
        let basis = cokernel_basis(&disc);
        let gram = |a: &CokernelElement, b: &CokernelElement| {
            let x: Vec<&[f64]> = a.upsilon.comps.iter().map(|c| c.as_slice()).collect();
            let y: Vec<&[f64]> = b.upsilon.comps.iter().map(|c| c.as_slice()).collect();
            volume_pairing(&disc, &x, &y, &TENSOR_WEIGHTS)
                + volume_pairing(&disc, &[&a.phi.values], &[&b.phi.values], &[1.0])
        };
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let g = gram(a, b);
                if i == j {
                    assert!(g > 0.1);
                } else {
                    assert!(g.abs() < 1e-12, "{i} {j} {g}");
                }
            }
        }
    }

    #[test]
    fn elements_annihilate_the_image() {
        use crate::linear::apply_t;
        let disc = standard(20, 4).unwrap();
        let th = SymTensorField::from_cartesian_fn(&disc, |s, x| {
            [s * x[0] + s * s, s * s * x[1] * x[2], 0.3 * s * x[2], s * x[1] * x[1], s * s * x[0], -s * x[2] * x[0]]
        });
        let ph = ScalarField::from_fn(&disc, |s, x| s * x[2] + s * s * x[0] * x[1]);
        let r = apply_t(&th, &ph);
        for ck in cokernel_basis(&disc) {
            assert!(full_pairing(&r, &ck).abs() < 1e-10, "{:?}", ck.kind);
        }
    }
}
