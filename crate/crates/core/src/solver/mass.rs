use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::sym_index;
use crate::geometry::MetricState;
use crate::modes::{transform_to_modes, ModeKey, Parity};
use crate::spectral::gradient;

/// Largest accepted relative disagreement of the two mass extractions.
pub const MASS_SPREAD_TOL: f64 = 1e-3;
/// Coarsest radial grid on which the flux extrapolation is trusted.
pub const MIN_MASS_NR: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassEstimate {
    /// From the `r⁻¹` coefficient of the spherical mode of `Θ_rr`.
    pub mass: f64,
    /// From the flux integral, extrapolated to infinity.
    pub flux: f64,
}

impl MassEstimate {
    pub fn spread(&self) -> f64 {
        (self.mass - self.flux).abs()
    }

    pub fn is_consistent(&self) -> bool {
        self.spread() <= MASS_SPREAD_TOL * self.mass.abs().max(self.flux.abs()) + 1e-12
    }
}

/// `(1/16π) ∮ (∂_j g_ij − ∂_i g_jj) ν^i dA` on every shell `s ≤ ½`, then
/// polynomial extrapolation of the shell values to `s = 0`.
pub fn flux_mass(state: &MetricState) -> f64 {
    let disc = state.disc();
    let n_r = disc.grid.n_r();
    let n_ang = disc.grid.n_ang();
    let nodes = disc.grid.radial.nodes();
    let cart = state.theta.to_cartesian();
    let d: Vec<[Vec<f64>; 3]> = cart.iter().map(|c| gradient(disc, c)).collect();
    let shells: Vec<usize> = (1..n_r - 1).filter(|&ir| nodes[ir] <= 0.5).collect();
    let values: Vec<f64> = shells
        .iter()
        .map(|&ir| {
            let integrand: Vec<f64> = (0..n_ang)
                .map(|a| {
                    let p = ir * n_ang + a;
                    let nv = disc.frames[a][0];
                    (0..3)
                        .map(|i| {
                            let div: f64 = (0..3).map(|j| d[sym_index(i, j)][j][p]).sum();
                            let tr = d[0][i][p] + d[3][i][p] + d[5][i][p];
                            nv[i] * (div - tr)
                        })
                        .sum()
                })
                .collect();
            let s = nodes[ir];
            disc.grid.angular.integrate(&integrand) / (16.0 * PI * s * s)
        })
        .collect();
    // Lagrange extrapolation to s = 0.
    let xs: Vec<f64> = shells.iter().map(|&ir| nodes[ir]).collect();
    let mut total = 0.0;
    for (k, &xk) in xs.iter().enumerate() {
        let mut w = 1.0;
        for (j, &xj) in xs.iter().enumerate() {
            if j != k {
                w *= xj / (xj - xk);
            }
        }
        total += w * values[k];
    }
    total
}

/// ADM mass by two extractions. Returns an error carrying both values when
/// they disagree beyond [`MASS_SPREAD_TOL`] or the radial grid is too coarse
/// for the flux extrapolation.
pub fn adm_mass(state: &MetricState) -> Result<MassEstimate> {
    let disc = state.disc();
    let modes = transform_to_modes(&state.theta);
    let mass = match modes.get(ModeKey::new(0, 1, Parity::Even)) {
        // Θ_rr ~ 2m s at infinity for the spherical part.
        Some(p) => 0.5 * radial_derivative_at_infinity(disc, &p.a),
        None => 0.0,
    };
    let est = MassEstimate {
        mass,
        flux: flux_mass(state),
    };
    if disc.grid.n_r() < MIN_MASS_NR || !est.is_consistent() {
        return Err(Error::MassExtraction {
            mass: est.mass,
            flux: est.flux,
        });
    }
    Ok(est)
}

fn radial_derivative_at_infinity(disc: &crate::field::Discretization, profile: &[f64]) -> f64 {
    let n_r = disc.grid.n_r();
    let d1 = disc.grid.radial.d1();
    (0..n_r).map(|j| d1[(n_r - 1, j)] * profile[j]).sum()
}
