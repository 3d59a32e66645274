//! Collocation grids on the exterior domain.
//!
//! The radial direction uses the compactified coordinate `s = 1/r` sampled at
//! Chebyshev–Gauss–Lobatto nodes; node 0 is the boundary sphere (`s = 1`) and
//! the last node is spatial infinity (`s = 0`). Angles use Gauss–Legendre
//! nodes in `cos θ` and a uniform azimuthal grid offset by half a cell, so that
//! no node sits on a pole or on a coordinate plane.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest radial resolution accepted by [`RadialGrid::new`].
pub const MIN_RADIAL_NODES: usize = 8;

#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    bary: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
}

impl RadialGrid {
    pub fn new(n_r: usize) -> Result<Self> {
        if n_r < MIN_RADIAL_NODES {
            return Err(Error::InvalidGrid(format!(
                "n_r = {n_r} is below the minimum of {MIN_RADIAL_NODES}"
            )));
        }
        let n = n_r - 1;
        let mut nodes: Vec<f64> = (0..n_r)
            .map(|j| 0.5 * (1.0 + (PI * j as f64 / n as f64).cos()))
            .collect();
        nodes[0] = 1.0;
        nodes[n] = 0.0;
        // Symmetrize about s = 1/2 so the node set is exact under s -> 1 - s.
        for j in 0..n_r / 2 {
            let x = 0.5 * (PI * (n as f64 - 2.0 * j as f64) / (2.0 * n as f64)).sin();
            nodes[j] = 0.5 + x;
            nodes[n - j] = 0.5 - x;
        }
        if n_r % 2 == 1 {
            nodes[n / 2] = 0.5;
        }

        let mut bary = vec![1.0; n_r];
        for (j, w) in bary.iter_mut().enumerate() {
            if j % 2 == 1 {
                *w = -1.0;
            }
        }
        bary[0] *= 0.5;
        bary[n] *= 0.5;

        let mut d1 = DMatrix::zeros(n_r, n_r);
        for i in 0..n_r {
            let mut row_sum = 0.0;
            for j in 0..n_r {
                if i != j {
                    let v = bary[j] / bary[i] / (nodes[i] - nodes[j]);
                    d1[(i, j)] = v;
                    row_sum += v;
                }
            }
            d1[(i, i)] = -row_sum;
        }
        let d2 = &d1 * &d1;
        Ok(Self { nodes, bary, d1, d2 })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the boundary sphere `s = 1`.
    pub fn boundary_index(&self) -> usize {
        0
    }

    /// Index of spatial infinity `s = 0`.
    pub fn infinity_index(&self) -> usize {
        self.nodes.len() - 1
    }

    /// First derivative matrix with respect to `s`.
    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    /// Second derivative matrix with respect to `s`.
    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    /// Barycentric weights of the polynomial interpolant through the nodes
    /// evaluated at `s`: `p(s) = sum_j w_j(s) p_j`.
    pub fn interpolation_weights(&self, s: f64) -> Vec<f64> {
        let n = self.nodes.len();
        let mut out = vec![0.0; n];
        for j in 0..n {
            if (s - self.nodes[j]).abs() < 1e-15 {
                out[j] = 1.0;
                return out;
            }
        }
        let mut total = 0.0;
        for j in 0..n {
            let t = self.bary[j] / (s - self.nodes[j]);
            out[j] = t;
            total += t;
        }
        for v in &mut out {
            *v /= total;
        }
        out
    }

    /// Matrix mapping node values to values at `points`.
    pub fn interpolation_matrix(&self, points: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(points.len(), self.len());
        for (i, &p) in points.iter().enumerate() {
            for (j, w) in self.interpolation_weights(p).into_iter().enumerate() {
                m[(i, j)] = w;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    lmax: usize,
    cos_theta: Vec<f64>,
    theta_weights: Vec<f64>,
    phi: Vec<f64>,
}

impl AngularGrid {
    /// Default quadrature sized for degree-`lmax` mode content whose Cartesian
    /// components and their second derivatives stay resolved.
    pub fn for_lmax(lmax: usize) -> Result<Self> {
        let n_theta = (lmax + 6).next_multiple_of(2);
        Self::new(n_theta, 2 * n_theta, lmax)
    }

    pub fn new(n_theta: usize, n_phi: usize, lmax: usize) -> Result<Self> {
        if n_theta < lmax + 1 {
            return Err(Error::InvalidGrid(format!(
                "n_theta = {n_theta} must be at least lmax + 1 = {}",
                lmax + 1
            )));
        }
        if n_phi < 2 * lmax + 1 {
            return Err(Error::InvalidGrid(format!(
                "n_phi = {n_phi} must be at least 2 lmax + 1 = {}",
                2 * lmax + 1
            )));
        }
        if n_phi % 4 != 0 || n_theta % 2 != 0 {
            return Err(Error::InvalidGrid(
                "reflection symmetry needs an even n_theta and n_phi divisible by 4".into(),
            ));
        }
        let (cos_theta, theta_weights) = gauss_legendre(n_theta);
        let phi = (0..n_phi)
            .map(|k| (k as f64 + 0.5) * 2.0 * PI / n_phi as f64)
            .collect();
        Ok(Self {
            lmax,
            cos_theta,
            theta_weights,
            phi,
        })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn n_theta(&self) -> usize {
        self.cos_theta.len()
    }

    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Highest degree resolved exactly by the scalar transform on this grid.
    pub fn transform_degree(&self) -> usize {
        (self.n_theta() - 1).min((self.n_phi() - 1) / 2)
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Quadrature weight of angular node `(it, ip)` on the unit sphere.
    pub fn weight(&self, it: usize) -> f64 {
        self.theta_weights[it] * 2.0 * PI / self.n_phi() as f64
    }

    pub fn index(&self, it: usize, ip: usize) -> usize {
        it * self.n_phi() + ip
    }

    /// `(cos θ, sin θ, φ)` of the flat angular index.
    pub fn angles(&self, a: usize) -> (f64, f64, f64) {
        let it = a / self.n_phi();
        let ip = a % self.n_phi();
        let c = self.cos_theta[it];
        (c, (1.0 - c * c).sqrt(), self.phi[ip])
    }

    /// Integral over the unit sphere of a function sampled on the grid.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let mut total = 0.0;
        for it in 0..self.n_theta() {
            let w = self.weight(it);
            let row = &values[it * self.n_phi()..(it + 1) * self.n_phi()];
            total += w * row.iter().sum::<f64>();
        }
        total
    }

    /// Angular index of the image of node `a` under the reflection flipping
    /// the signs of the Cartesian axes selected by `flip`.
    pub fn reflected_index(&self, a: usize, flip: [bool; 3]) -> usize {
        let nt = self.n_theta();
        let np = self.n_phi();
        let mut it = a / np;
        let mut ip = a % np;
        if flip[2] {
            it = nt - 1 - it;
        }
        if flip[1] {
            ip = np - 1 - ip;
        }
        if flip[0] {
            // phi -> pi - phi
            ip = (np / 2 + np - 1 - ip) % np;
        }
        self.index(it, ip)
    }
}

/// Product grid over the exterior domain. Flat index `ir * n_ang + a`.
#[derive(Debug, Clone)]
pub struct Grid {
    pub radial: RadialGrid,
    pub angular: AngularGrid,
}

impl Grid {
    pub fn new(n_r: usize, lmax: usize) -> Result<Self> {
        Ok(Self {
            radial: RadialGrid::new(n_r)?,
            angular: AngularGrid::for_lmax(lmax)?,
        })
    }

    pub fn with_angular(n_r: usize, angular: AngularGrid) -> Result<Self> {
        Ok(Self {
            radial: RadialGrid::new(n_r)?,
            angular,
        })
    }

    pub fn n_r(&self) -> usize {
        self.radial.len()
    }

    pub fn n_ang(&self) -> usize {
        self.angular.len()
    }

    pub fn len(&self) -> usize {
        self.n_r() * self.n_ang()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lmax(&self) -> usize {
        self.angular.lmax()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.radial.nodes() == other.radial.nodes() && self.angular == other.angular
    }

    pub fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Gauss–Legendre nodes (ascending) and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        dp = if d != 0.0 { d } else { dp };
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Jacobi rule for `int_0^1 F(s) s^beta ds`, `beta > -1`.
///
/// Golub–Welsch on the Jacobi matrix of the weight `(1 + x)^beta` on
/// `[-1, 1]`, then mapped to `[0, 1]`.
pub fn gauss_jacobi_unit(n: usize, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(beta > -1.0, "Jacobi exponent must exceed -1");
    let alpha = 0.0;
    let ab = alpha + beta;
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        let a = if k == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / denom
        };
        j[(k, k)] = a;
        if k + 1 < n {
            let m = kf + 1.0;
            let t = 2.0 * m + ab;
            let b2 = 4.0 * m * (m + alpha) * (m + beta) * (m + ab) / (t * t * (t + 1.0) * (t - 1.0));
            let b = b2.sqrt();
            j[(k, k + 1)] = b;
            j[(k + 1, k)] = b;
        }
    }
    let eig = SymmetricEigen::new(j);
    let mu0 = 2f64.powf(ab + 1.0) / (beta + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let scale = 2f64.powf(-beta - 1.0);
    let nodes = pairs.iter().map(|p| 0.5 * (1.0 + p.0)).collect();
    let weights = pairs.iter().map(|p| p.1 * scale).collect();
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_endpoints_and_monotonicity() {
        let g = RadialGrid::new(48).unwrap();
        assert_eq!(g.nodes()[0], 1.0);
        assert_eq!(g.nodes()[47], 0.0);
        assert!(g.nodes().windows(2).all(|w| w[0] > w[1]));
        assert!(RadialGrid::new(7).is_err());
    }

    #[test]
    fn derivative_matrices_are_exact_on_polynomials() {
        let g = RadialGrid::new(24).unwrap();
        let s = g.nodes();
        let p: Vec<f64> = s.iter().map(|x| x.powi(7) - 3.0 * x * x + 0.5).collect();
        let dp = g.d1() * nalgebra::DVector::from_column_slice(&p);
        let d2p = g.d2() * nalgebra::DVector::from_column_slice(&p);
        for (i, x) in s.iter().enumerate() {
            assert!((dp[i] - (7.0 * x.powi(6) - 6.0 * x)).abs() < 1e-11);
            assert!((d2p[i] - (42.0 * x.powi(5) - 6.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let g = RadialGrid::new(16).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|x| x.powi(5) - x).collect();
        for &t in &[0.013, 0.37, 0.999] {
            let w = g.interpolation_weights(t);
            let v: f64 = w.iter().zip(&vals).map(|(a, b)| a * b).sum();
            assert!((v - (t.powi(5) - t)).abs() < 1e-13);
        }
    }

    #[test]
    fn gauss_legendre_integrates_degree_2n_minus_1() {
        let (x, w) = gauss_legendre(9);
        let total: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(16)).sum();
        assert!((total - 2.0 / 17.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_jacobi_handles_singular_weight() {
        let (s, w) = gauss_jacobi_unit(12, -0.5);
        // int_0^1 s^3 s^{-1/2} ds = 1/3.5
        let total: f64 = s.iter().zip(&w).map(|(s, w)| w * s.powi(3)).sum();
        assert!((total - 1.0 / 3.5).abs() < 1e-13, "{total}");
        let (s, w) = gauss_jacobi_unit(10, 0.0);
        let total: f64 = s.iter().zip(&w).map(|(s, w)| w * s.powi(4)).sum();
        assert!((total - 0.2).abs() < 1e-14);
    }

    #[test]
    fn angular_grid_invariants_and_reflections() {
        assert!(AngularGrid::new(8, 16, 8).is_err());
        assert!(AngularGrid::new(10, 16, 8).is_err());
        let g = AngularGrid::for_lmax(8).unwrap();
        let total: f64 = g.integrate(&vec![1.0; g.len()]);
        assert!((total - 4.0 * PI).abs() < 1e-13);
        for a in 0..g.len() {
            let (c, st, p) = g.angles(a);
            let x = [st * p.cos(), st * p.sin(), c];
            for flip in [[true, false, false], [false, true, false], [false, false, true]] {
                let b = g.reflected_index(a, flip);
                let (c2, st2, p2) = g.angles(b);
                let y = [st2 * p2.cos(), st2 * p2.sin(), c2];
                for k in 0..3 {
                    let expect = if flip[k] { -x[k] } else { x[k] };
                    assert!((y[k] - expect).abs() < 1e-13);
                }
            }
        }
    }
}
