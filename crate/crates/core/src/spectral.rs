//! Spectral differentiation of scalar grid functions.
//!
//! Angular derivatives go through a separable spherical-harmonic transform
//! (Fourier in φ, Legendre in θ) that is exact for band-limited data up to
//! [`AngularGrid::transform_degree`]. Radial derivatives use the Chebyshev
//! differentiation matrix in `s`, with `∂_r = -s² ∂_s`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::field::Discretization;
use crate::grid::AngularGrid;
use crate::harmonics::legendre_table;

#[derive(Debug, Clone)]
pub struct ScalarTransform {
    degree: usize,
    n_theta: usize,
    n_phi: usize,
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
    // per ring j: S_l^m and dS_l^m/dθ at l (l+1)/2 + m
    leg: Vec<Vec<f64>>,
    dleg: Vec<Vec<f64>>,
    ring_weight: Vec<f64>,
    inv_sin: Vec<f64>,
}

impl ScalarTransform {
    pub fn new(angular: &AngularGrid) -> Self {
        let degree = angular.transform_degree();
        let n_theta = angular.n_theta();
        let n_phi = angular.n_phi();
        let mut cos_tab = vec![0.0; (degree + 1) * n_phi];
        let mut sin_tab = vec![0.0; (degree + 1) * n_phi];
        for m in 0..=degree {
            for (k, &p) in angular.phi().iter().enumerate() {
                cos_tab[m * n_phi + k] = (m as f64 * p).cos();
                sin_tab[m * n_phi + k] = (m as f64 * p).sin();
            }
        }
        let mut leg = Vec::with_capacity(n_theta);
        let mut dleg = Vec::with_capacity(n_theta);
        let mut inv_sin = Vec::with_capacity(n_theta);
        for &x in angular.cos_theta() {
            let (p, dp) = legendre_table(degree, x);
            leg.push(p);
            dleg.push(dp);
            inv_sin.push(1.0 / (1.0 - x * x).sqrt());
        }
        let ring_weight = (0..n_theta).map(|j| angular.weight(j)).collect();
        Self {
            degree,
            n_theta,
            n_phi,
            cos_tab,
            sin_tab,
            leg,
            dleg,
            ring_weight,
            inv_sin,
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Harmonic coefficients `(cos part, sin part)` indexed `l (l+1)/2 + m`.
    fn analyze(&self, shell: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let lt = self.degree;
        let size = (lt + 1) * (lt + 2) / 2;
        let mut cc = vec![0.0; size];
        let mut cs = vec![0.0; size];
        for j in 0..self.n_theta {
            let ring = &shell[j * self.n_phi..(j + 1) * self.n_phi];
            let w = self.ring_weight[j];
            for m in 0..=lt {
                let ct = &self.cos_tab[m * self.n_phi..(m + 1) * self.n_phi];
                let st = &self.sin_tab[m * self.n_phi..(m + 1) * self.n_phi];
                let mut a = 0.0;
                let mut b = 0.0;
                for k in 0..self.n_phi {
                    a += ring[k] * ct[k];
                    b += ring[k] * st[k];
                }
                a *= w;
                b *= w;
                for l in m..=lt {
                    let i = l * (l + 1) / 2 + m;
                    let norm = (2 * l + 1) as f64 / (4.0 * std::f64::consts::PI);
                    cc[i] += norm * self.leg[j][i] * a;
                    cs[i] += norm * self.leg[j][i] * b;
                }
            }
        }
        (cc, cs)
    }

    /// `(∂_θ f, ∂_φ f / sin θ)` on one shell.
    pub fn angular_gradient(&self, shell: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let lt = self.degree;
        let (cc, cs) = self.analyze(shell);
        let n = self.n_theta * self.n_phi;
        let mut ft = vec![0.0; n];
        let mut fp = vec![0.0; n];
        let mut gc = vec![0.0; lt + 1];
        let mut gs = vec![0.0; lt + 1];
        let mut hc = vec![0.0; lt + 1];
        let mut hs = vec![0.0; lt + 1];
        for j in 0..self.n_theta {
            for m in 0..=lt {
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for l in m..=lt {
                    let i = l * (l + 1) / 2 + m;
                    a += cc[i] * self.dleg[j][i];
                    b += cs[i] * self.dleg[j][i];
                    c += cc[i] * self.leg[j][i];
                    d += cs[i] * self.leg[j][i];
                }
                let f = m as f64 * self.inv_sin[j];
                gc[m] = a;
                gs[m] = b;
                hc[m] = c * f;
                hs[m] = d * f;
            }
            for k in 0..self.n_phi {
                let mut t = 0.0;
                let mut p = 0.0;
                for m in 0..=lt {
                    let co = self.cos_tab[m * self.n_phi + k];
                    let si = self.sin_tab[m * self.n_phi + k];
                    t += gc[m] * co + gs[m] * si;
                    p += hs[m] * co - hc[m] * si;
                }
                ft[j * self.n_phi + k] = t;
                fp[j * self.n_phi + k] = p;
            }
        }
        (ft, fp)
    }
}

/// Derivative in `s` along every radial line.
pub fn radial_derivative(disc: &Discretization, values: &[f64]) -> Vec<f64> {
    let n_r = disc.grid.n_r();
    let n_ang = disc.grid.n_ang();
    // Row-major (ir, a) data viewed as a column-major n_ang x n_r matrix.
    let m = DMatrix::from_column_slice(n_ang, n_r, values);
    let out = m * disc.grid.radial.d1().transpose();
    out.as_slice().to_vec()
}

/// Cartesian gradient `[∂_x f, ∂_y f, ∂_z f]` of a scalar grid function.
pub fn gradient(disc: &Discretization, values: &[f64]) -> [Vec<f64>; 3] {
    let n_ang = disc.grid.n_ang();
    let ds = radial_derivative(disc, values);
    let nodes = disc.grid.radial.nodes();
    let shells: Vec<[Vec<f64>; 3]> = values
        .par_chunks(n_ang)
        .zip(ds.par_chunks(n_ang))
        .zip(nodes.par_iter())
        .map(|((shell, dshell), &s)| {
            let (ft, fp) = disc.transform.angular_gradient(shell);
            let mut out = [vec![0.0; n_ang], vec![0.0; n_ang], vec![0.0; n_ang]];
            for a in 0..n_ang {
                let fr = -s * s * dshell[a];
                let frame = &disc.frames[a];
                for (i, o) in out.iter_mut().enumerate() {
                    o[a] = frame[0][i] * fr + s * (frame[1][i] * ft[a] + frame[2][i] * fp[a]);
                }
            }
            out
        })
        .collect();
    let n = disc.grid.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (ir, sh) in shells.into_iter().enumerate() {
        for i in 0..3 {
            out[i][ir * n_ang..(ir + 1) * n_ang].copy_from_slice(&sh[i]);
        }
    }
    out
}

/// First and second Cartesian derivatives: `(∂_i f, ∂_i ∂_j f)` with the
/// Hessian stored in symmetric order `xx, xy, xz, yy, yz, zz`.
pub fn jet2(disc: &Discretization, values: &[f64]) -> ([Vec<f64>; 3], [Vec<f64>; 6]) {
    let g = gradient(disc, values);
    let gx = gradient(disc, &g[0]);
    let gy = gradient(disc, &g[1]);
    let gz = gradient(disc, &g[2]);
    let n = values.len();
    let sym = |a: &[f64], b: &[f64]| -> Vec<f64> { (0..n).map(|i| 0.5 * (a[i] + b[i])).collect() };
    let h = [
        gx[0].clone(),
        sym(&gx[1], &gy[0]),
        sym(&gx[2], &gz[0]),
        gy[1].clone(),
        sym(&gy[2], &gz[1]),
        gz[2].clone(),
    ];
    (g, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{standard, ScalarField};

    #[test]
    fn gradient_of_polynomial_times_harmonic() {
        let disc = standard(16, 6).unwrap();
        // f = x z / r^4
        let f = ScalarField::from_fn(&disc, |s, x| s * s * x[0] * x[2]);
        let g = gradient(&disc, &f.values);
        let n_ang = disc.grid.n_ang();
        for (ir, &s) in disc.grid.radial.nodes().iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let r = 1.0 / s;
            for a in 0..n_ang {
                let u = disc.frames[a][0];
                let p = [r * u[0], r * u[1], r * u[2]];
                let r2 = r * r;
                // f = x z / r^4; ∂_i f = (δ_ix z + δ_iz x)/r^4 - 4 x z x_i / r^6
                let expect = [
                    p[2] / (r2 * r2) - 4.0 * p[0] * p[2] * p[0] / (r2 * r2 * r2),
                    -4.0 * p[0] * p[2] * p[1] / (r2 * r2 * r2),
                    p[0] / (r2 * r2) - 4.0 * p[0] * p[2] * p[2] / (r2 * r2 * r2),
                ];
                for i in 0..3 {
                    assert!((g[i][ir * n_ang + a] - expect[i]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn laplacian_of_inverse_radius_vanishes() {
        let disc = standard(12, 4).unwrap();
        let f = ScalarField::from_fn(&disc, |s, _| s);
        let (_, h) = jet2(&disc, &f.values);
        for i in 0..disc.grid.len() {
            assert!((h[0][i] + h[3][i] + h[5][i]).abs() < 1e-11);
        }
    }
}
