//! Spherically symmetric references: the Schwarzschild family in isotropic
//! coordinates and a shooting solver for round boundary data.

use crate::error::{Error, Result};
use crate::field::{Discretization, ScalarField, SurfaceTensor, SymTensorField};
use crate::geometry::{mean_curvature, BoundaryData, MetricState};

/// Largest `|m|` accepted by [`schwarzschild_boundary_data`].
pub const MAX_SCHWARZSCHILD_MASS: f64 = 0.3;

/// `g̃ = u⁴ g_o`, `f = (1 − m/2r)/(1 + m/2r)` with `u = 1 + m/2r`.
pub fn conformal_schwarzschild_state(disc: &Discretization, m: f64) -> MetricState {
    let theta = SymTensorField::from_cartesian_fn(disc, |s, _| {
        let u4 = (1.0 + 0.5 * m * s).powi(4) - 1.0;
        [u4, 0.0, 0.0, u4, 0.0, u4]
    });
    let lapse = ScalarField::from_fn(disc, |s, _| (1.0 - 0.5 * m * s) / (1.0 + 0.5 * m * s) - 1.0);
    MetricState {
        theta,
        lapse_pert: lapse,
    }
}

/// Boundary data of the isotropic Schwarzschild metric on `r = 1`.
pub fn schwarzschild_boundary_data(disc: &Discretization, m: f64) -> Result<BoundaryData> {
    if !(m.abs() <= MAX_SCHWARZSCHILD_MASS) {
        return Err(Error::MassOutOfRange(m));
    }
    let n_ang = disc.grid.n_ang();
    let c = (1.0 + 0.5 * m).powi(4);
    let sigma = SurfaceTensor([vec![c; n_ang], vec![0.0; n_ang], vec![c; n_ang]]);
    let h = mean_curvature(&conformal_schwarzschild_state(disc, m))?;
    let mut bd = BoundaryData::new(disc, sigma, h)?;
    // The data is round up to roundoff in the mean curvature.
    bd.symmetric = true;
    Ok(bd)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingSample {
    /// Isotropic radius.
    pub rho: f64,
    pub psi: f64,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct ShootingSolution {
    pub mass: f64,
    /// Isotropic radius of the boundary sphere.
    pub rho0: f64,
    /// Samples from the boundary (first) to infinity (last, `rho = ∞`).
    pub samples: Vec<ShootingSample>,
    /// Largest violation of the radial equations found by substitution.
    pub residual: f64,
}

const STEPS: usize = 2000;

struct Shot {
    /// `(x, ψ, dψ/dx, ln f)` with `x = 1/ρ`, from `x0` down to `0`.
    path: Vec<[f64; 4]>,
}

/// `d ln f / dx` from the tangential static equation `f Ric = Hess f` for
/// `g = ψ⁴ δ` with harmonic `ψ`.
fn dlnf(x: f64, psi: f64, v: f64) -> f64 {
    let q = v / psi;
    -2.0 * q * (1.0 - x * q) / (1.0 - 2.0 * x * q)
}

fn rhs(x: f64, y: [f64; 3]) -> [f64; 3] {
    [y[1], 0.0, dlnf(x, y[0], y[1])]
}

/// RK4 in `x` from the boundary to infinity.
fn shoot(c: f64, h: f64, rho0: f64) -> Shot {
    let psi0 = (c / rho0).sqrt();
    // H = ψ⁻² (2/ρ + 4 ψ_ρ/ψ) fixes ψ_ρ; dψ/dx = −ρ² ψ_ρ.
    let psi_rho = 0.25 * psi0 * (h * psi0 * psi0 - 2.0 / rho0);
    let mut y = [psi0, -rho0 * rho0 * psi_rho, 0.0];
    let x0 = 1.0 / rho0;
    let dx = -x0 / STEPS as f64;
    let mut path = Vec::with_capacity(STEPS + 1);
    let mut x = x0;
    path.push([x, y[0], y[1], y[2]]);
    for _ in 0..STEPS {
        let add = |y: [f64; 3], k: [f64; 3], t: f64| -> [f64; 3] { std::array::from_fn(|i| y[i] + t * k[i]) };
        let k1 = rhs(x, y);
        let k2 = rhs(x + 0.5 * dx, add(y, k1, 0.5 * dx));
        let k3 = rhs(x + 0.5 * dx, add(y, k2, 0.5 * dx));
        let k4 = rhs(x + dx, add(y, k3, dx));
        y = std::array::from_fn(|i| y[i] + dx / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        x += dx;
        path.push([x.max(0.0), y[0], y[1], y[2]]);
    }
    Shot { path }
}

/// Solve the spherically symmetric static problem for round boundary data
/// `σ = c² g_{S²}`, `H = h` by shooting on the isotropic radius of the
/// boundary until the conformal factor tends to 1 at infinity.
pub fn shooting_oracle(bd: &BoundaryData) -> Result<ShootingSolution> {
    let s = &bd.sigma.0;
    let c2 = s[0][0];
    let h = bd.h.0[0];
    let spread = s[0]
        .iter()
        .chain(&s[2])
        .map(|v| (v - c2).abs())
        .chain(s[1].iter().map(|v| v.abs()))
        .chain(bd.h.0.iter().map(|v| (v - h).abs()))
        .fold(0.0, f64::max);
    if spread > 1e-10 || c2 <= 0.0 {
        return Err(Error::Shooting(format!("boundary data is not round (spread {spread:.3e})")));
    }
    let c = c2.sqrt();
    let miss = |rho0: f64| shoot(c, h, rho0).path.last().map(|p| p[1] - 1.0).unwrap_or(f64::NAN);
    let (mut lo, mut hi) = (1e-3 * c, 1e3 * c);
    let (flo, fhi) = (miss(lo), miss(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Shooting(format!("no bracket: miss {flo:.3e} at {lo:.3e}, {fhi:.3e} at {hi:.3e}")));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if miss(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let rho0 = 0.5 * (lo + hi);
    let shot = shoot(c, h, rho0);
    let end = shot.path.last().expect("nonempty path");
    if (end[1] - 1.0).abs() > 1e-12 {
        return Err(Error::Shooting(format!("conformal factor at infinity is {}", end[1])));
    }
    // ψ = 1 + M/(2ρ) near infinity.
    let mass = 2.0 * end[2];
    let lnf_inf = end[3];
    let samples: Vec<ShootingSample> = shot
        .path
        .iter()
        .map(|p| ShootingSample {
            rho: if p[0] > 0.0 { 1.0 / p[0] } else { f64::INFINITY },
            psi: p[1],
            f: (p[3] - lnf_inf).exp(),
        })
        .collect();
    let residual = substitution_residual(&shot);
    if !mass.is_finite() || samples.iter().any(|s| !(s.f > 0.0)) {
        return Err(Error::Shooting("lapse is not positive along the solution".into()));
    }
    Ok(ShootingSolution {
        mass,
        rho0,
        samples,
        residual,
    })
}

/// Substitute the path into `ψ_xx = 0` (second differences) and into the
/// harmonicity of the lapse, `ρ² ψ² f_ρ = const`, which the static relation
/// used for integration does not impose directly.
fn substitution_residual(shot: &Shot) -> f64 {
    let p = &shot.path;
    let dx = p[0][0] - p[1][0];
    let mut r = 0.0f64;
    for w in p.windows(3) {
        r = r.max(((w[0][1] - 2.0 * w[1][1] + w[2][1]) / (dx * dx)).abs());
    }
    // ρ² ψ² f_ρ = −ψ² f d(ln f)/dx, up to the constant factor f(∞).
    let flux: Vec<f64> = p
        .iter()
        .map(|q| -q[1] * q[1] * q[3].exp() * dlnf(q[0], q[1], q[2]))
        .collect();
    let f0 = flux[0];
    for v in &flux {
        r = r.max((v - f0).abs());
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::standard;

    #[test]
    fn boundary_data_matches_closed_form() {
        let disc = standard(12, 4).unwrap();
        let m = 0.1;
        let bd = schwarzschild_boundary_data(&disc, m).unwrap();
        assert!((bd.sigma.0[0][3] - 1.21550625).abs() < 1e-14);
        let u = 1.0 + 0.5 * m;
        let h = (2.0 - 2.0 * m / u) / (u * u);
        assert!(bd.h.0.iter().all(|v| (v - h).abs() < 1e-12));
        assert!(schwarzschild_boundary_data(&disc, 0.31).is_err());
    }

    #[test]
    fn shooting_recovers_generator() {
        let disc = standard(12, 4).unwrap();
        for m in [0.0, 0.05, 0.1, -0.2] {
            let sol = shooting_oracle(&schwarzschild_boundary_data(&disc, m).unwrap()).unwrap();
            assert!((sol.mass - m).abs() < 1e-10, "{m}: {}", sol.mass);
            assert!((sol.rho0 - 1.0).abs() < 1e-10);
            assert!(sol.residual < 1e-10, "{}", sol.residual);
            let s = sol.samples[STEPS / 2];
            let q = 0.5 * m / s.rho;
            assert!((s.f - (1.0 - q) / (1.0 + q)).abs() < 1e-10);
        }
    }
}
