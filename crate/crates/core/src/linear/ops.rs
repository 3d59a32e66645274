use rayon::prelude::*;

use crate::field::{
    sym_index, Discretization, OneFormField, ScalarField, SurfaceOneForm, SurfaceScalar, SurfaceTensor,
    SymTensorField,
};
use crate::geometry::ResidualVector;
use crate::grid::gauss_legendre;
use crate::spectral::{jet2, radial_derivative};

struct FlatJets {
    /// `∂_k Θ_c` at `[k][c]`.
    dth: [[Vec<f64>; 6]; 3],
    /// Flat Laplacian of each Cartesian component.
    lap_th: [Vec<f64>; 6],
    ddph: [Vec<f64>; 6],
}

fn flat_jets(theta: &SymTensorField, phi: &ScalarField) -> FlatJets {
    let disc = &theta.disc;
    let mut arrays: Vec<Vec<f64>> = theta.to_cartesian().to_vec();
    arrays.push(phi.values.clone());
    let jets: Vec<_> = arrays.par_iter().map(|c| jet2(disc, c)).collect();
    let n = disc.grid.len();
    let lap = |h: &[Vec<f64>; 6]| -> Vec<f64> { (0..n).map(|i| h[0][i] + h[3][i] + h[5][i]).collect() };
    FlatJets {
        dth: std::array::from_fn(|k| std::array::from_fn(|c| jets[c].0[k].clone())),
        lap_th: std::array::from_fn(|c| lap(&jets[c].1)),
        ddph: jets[6].1.clone(),
    }
}

/// `div Θ − ½ d tr Θ` in Cartesian components.
fn flat_gauge(j: &FlatJets, n: usize) -> [Vec<f64>; 3] {
    std::array::from_fn(|i| {
        (0..n)
            .map(|p| {
                let div: f64 = (0..3).map(|k| j.dth[k][sym_index(i, k)][p]).sum();
                let tr = j.dth[i][0][p] + j.dth[i][3][p] + j.dth[i][5][p];
                div - 0.5 * tr
            })
            .collect()
    })
}

fn linear_residual(theta: &SymTensorField, phi: &ScalarField, full_boundary: bool) -> ResidualVector {
    let disc = &theta.disc;
    let n = disc.grid.len();
    let n_ang = disc.grid.n_ang();
    let j = flat_jets(theta, phi);

    let slot1: [Vec<f64>; 6] =
        std::array::from_fn(|c| (0..n).map(|p| -0.5 * j.lap_th[c][p] - j.ddph[c][p]).collect());
    let slot2: Vec<f64> = (0..n).map(|p| j.ddph[0][p] + j.ddph[3][p] + j.ddph[5][p]).collect();
    let omega = OneFormField::from_cartesian(disc, &flat_gauge(&j, n));

    // The normal points out of the exterior domain, n = −∂_r, so at s = 1
    // Θ_{nn;n} = ∂_s Θ_rr and ω_n = −ω_r.
    let d_rr = radial_derivative(disc, &theta.comps[0]);
    let h_o = 2.0;
    let mut slot5: Vec<f64> = (0..n_ang)
        .map(|a| -0.5 * d_rr[a] + 0.5 * h_o * theta.comps[0][a])
        .collect();
    if full_boundary {
        for (a, v) in slot5.iter_mut().enumerate() {
            *v += -(theta.comps[3][a] + theta.comps[5][a]) - omega.comps[0][a];
        }
    }
    ResidualVector {
        interior_tensor: SymTensorField::from_cartesian(disc, &slot1),
        interior_scalar: ScalarField {
            disc: disc.clone(),
            values: slot2,
        },
        bdry_gauge: SurfaceOneForm(std::array::from_fn(|k| omega.comps[k][..n_ang].to_vec())),
        bdry_metric: SurfaceTensor(std::array::from_fn(|k| theta.comps[3 + k][..n_ang].to_vec())),
        bdry_meancurv: SurfaceScalar(slot5),
    }
}

/// Differential of the residual map at the flat solution.
pub fn apply_dphi(theta: &SymTensorField, phi: &ScalarField) -> ResidualVector {
    linear_residual(theta, phi, true)
}

/// The operator with the simplified mean-curvature row
/// `−½ Θ_{nn;n} + ½ H_o Θ_nn`.
pub fn apply_t(theta: &SymTensorField, phi: &ScalarField) -> ResidualVector {
    linear_residual(theta, phi, false)
}

/// `∫ Σ_c w_c a_c b_c dV` over the exterior domain, with `dV = s⁻⁴ ds dΩ`.
/// Each factor is interpolated separately to Gauss–Legendre nodes in `s`, so
/// the product is integrated without aliasing.
pub fn volume_pairing(disc: &Discretization, a: &[&[f64]], b: &[&[f64]], weights: &[f64]) -> f64 {
    let grid = &disc.grid;
    let n_r = grid.n_r();
    let n_ang = grid.n_ang();
    let (x, w) = gauss_legendre(n_r + 2);
    let qs: Vec<f64> = x.iter().map(|t| 0.5 * (t + 1.0)).collect();
    let qw: Vec<f64> = w.iter().map(|v| 0.5 * v).collect();
    let interp = grid.radial.interpolation_matrix(&qs);
    let at = |c: &[f64], q: usize, ang: usize| -> f64 { (0..n_r).map(|ir| interp[(q, ir)] * c[ir * n_ang + ang]).sum() };
    (0..n_ang)
        .into_par_iter()
        .map(|ang| {
            let mut line = 0.0;
            for q in 0..qs.len() {
                let mut v = 0.0;
                for ((ca, cb), wc) in a.iter().zip(b).zip(weights) {
                    v += wc * at(ca, q, ang) * at(cb, q, ang);
                }
                line += qw[q] * v / qs[q].powi(4);
            }
            grid.angular.weight(ang / grid.angular.n_phi()) * line
        })
        .collect::<Vec<f64>>()
        // Summed in order so the result does not depend on the thread count.
        .iter()
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::standard;
    use crate::geometry::{static_residual_with_tangent, BoundaryData, MetricState};
    use crate::symmetry::Reflect;

    fn probe(disc: &Discretization) -> (SymTensorField, ScalarField) {
        let th = SymTensorField::from_cartesian_fn(disc, |s, x| {
            [
                s * x[0] + s * s,
                s * s * x[1] * x[2],
                0.3 * s * x[2],
                s * x[1] * x[1],
                s * s * x[0],
                -s * x[2] * x[0],
            ]
        });
        let ph = ScalarField::from_fn(disc, |s, x| s * x[2] + s * s * x[0] * x[1]);
        (th, ph)
    }

    #[test]
    fn matches_exact_tangent_of_residual_at_flat_state() {
        let disc = standard(12, 4).unwrap();
        let (th, ph) = probe(&disc);
        let lin = apply_dphi(&th, &ph);
        let dir = MetricState::new(th, ph).unwrap();
        let (_, tan) =
            static_residual_with_tangent(&MetricState::flat(&disc), &dir, &BoundaryData::round(&disc)).unwrap();
        assert!(lin.max_abs_diff(&tan) < 1e-10, "{}", lin.max_abs_diff(&tan));
    }

    #[test]
    fn boundary_rows_differ_by_trace_and_gauge() {
        let disc = standard(10, 4).unwrap();
        let (th, ph) = probe(&disc);
        let a = apply_dphi(&th, &ph);
        let b = apply_t(&th, &ph);
        for k in 0..disc.grid.n_ang() {
            let expect = -(th.comps[3][k] + th.comps[5][k]) - b.bdry_gauge.0[0][k];
            assert!((a.bdry_meancurv.0[k] - b.bdry_meancurv.0[k] - expect).abs() < 1e-13);
        }
        assert_eq!(a.interior_tensor.comps, b.interior_tensor.comps);
    }

    #[test]
    fn inverse_radius_lapse() {
        let disc = standard(12, 3).unwrap();
        let ph = ScalarField::from_fn(&disc, |s, _| s);
        let r = apply_t(&SymTensorField::zeros(&disc), &ph);
        assert!(r.interior_scalar.max_abs() < 1e-11);
        let m = r.slot_max();
        assert!(m[2] == 0.0 && m[3] == 0.0 && m[4] == 0.0);
        // −Hess(1/r) has rr component −2s³.
        for (ir, &s) in disc.grid.radial.nodes().iter().enumerate() {
            let t = r.interior_tensor.at(ir * disc.grid.n_ang());
            assert!((t[0] + 2.0 * s.powi(3)).abs() < 1e-11);
        }
    }

    #[test]
    fn pairing_integrates_inverse_powers() {
        // ∫_{r>1} r⁻⁶ dV = 4π/3
        let disc = standard(10, 2).unwrap();
        let f = ScalarField::from_fn(&disc, |s, _| s * s * s);
        let v = volume_pairing(&disc, &[&f.values], &[&f.values], &[1.0]);
        assert!((v - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-12);
    }
}
