//! Real spherical harmonics with Schmidt semi-normalization.
//!
//! `Y_L^M` are indexed by degree `L` and `M = 1..=2L+1`: `M = 1` is the zonal
//! harmonic, `M = 2k` carries `cos(kφ)` and `M = 2k+1` carries `sin(kφ)`.
//! With this normalization the degree-1 harmonics are exactly the coordinate
//! functions restricted to the sphere: `Y_1^1 = z`, `Y_1^2 = x`, `Y_1^3 = y`,
//! and `∫ (Y_L^M)^2 dΩ = 4π / (2L + 1)`.

use std::f64::consts::PI;

use crate::grid::AngularGrid;

/// A real harmonic `Y_L^M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Harmonic {
    pub l: usize,
    pub m: usize,
}

impl Harmonic {
    pub fn new(l: usize, m: usize) -> Self {
        debug_assert!(m >= 1 && m <= 2 * l + 1);
        Self { l, m }
    }

    /// Azimuthal order and whether the azimuthal factor is a sine.
    pub fn order(&self) -> (usize, bool) {
        if self.m == 1 {
            (0, false)
        } else {
            (self.m / 2, self.m % 2 == 1)
        }
    }

    pub fn from_order(l: usize, order: usize, sine: bool) -> Self {
        let m = if order == 0 {
            1
        } else if sine {
            2 * order + 1
        } else {
            2 * order
        };
        Self { l, m }
    }

    /// Flat position among all harmonics ordered by degree.
    pub fn flat(&self) -> usize {
        self.l * self.l + self.m - 1
    }

    pub fn count_up_to(lmax: usize) -> usize {
        (lmax + 1) * (lmax + 1)
    }

    pub fn all(lmax: usize) -> impl Iterator<Item = Harmonic> {
        (0..=lmax).flat_map(|l| (1..=2 * l + 1).map(move |m| Harmonic { l, m }))
    }

    /// `∫ (Y_L^M)^2 dΩ`.
    pub fn norm_sq(&self) -> f64 {
        4.0 * PI / (2 * self.l + 1) as f64
    }

    /// `L (L + 1)`, the negative eigenvalue of the sphere Laplacian.
    pub fn eigen(&self) -> f64 {
        (self.l * (self.l + 1)) as f64
    }

    /// Parities under `(x, y, z) -> (-x, y, z)`, `(x, -y, z)`, `(x, y, -z)`;
    /// `true` means the harmonic changes sign.
    pub fn reflection_odd(&self) -> [bool; 3] {
        let (k, sine) = self.order();
        let z_odd = (self.l + k) % 2 == 1;
        let y_odd = sine;
        // phi -> pi - phi multiplies cos(k phi) by (-1)^k and sin(k phi) by -(-1)^k
        let x_odd = if sine { k % 2 == 0 } else { k % 2 == 1 };
        [x_odd, y_odd, z_odd]
    }
}

/// Schmidt semi-normalized associated Legendre functions `S_l^m(cos θ)` and
/// their θ-derivatives for all `m <= l <= lmax`, stored at `l (l+1)/2 + m`.
pub fn legendre_table(lmax: usize, cos_theta: f64) -> (Vec<f64>, Vec<f64>) {
    let size = (lmax + 1) * (lmax + 2) / 2;
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let x = cos_theta;
    let st = (1.0 - x * x).sqrt();
    let mut p = vec![0.0; size];
    let mut dp = vec![0.0; size];
    p[0] = 1.0;
    for m in 1..=lmax {
        let f = if m == 1 { 1.0 } else { ((2 * m - 1) as f64 / (2 * m) as f64).sqrt() };
        p[idx(m, m)] = f * st * p[idx(m - 1, m - 1)];
    }
    for m in 0..=lmax {
        if m < lmax {
            p[idx(m + 1, m)] = ((2 * m + 1) as f64).sqrt() * x * p[idx(m, m)];
        }
        for l in m + 2..=lmax {
            let a = (2 * l - 1) as f64 * x * p[idx(l - 1, m)];
            let b = (((l - 1) * (l - 1) - m * m) as f64).sqrt() * p[idx(l - 2, m)];
            p[idx(l, m)] = (a - b) / ((l * l - m * m) as f64).sqrt();
        }
    }
    for l in 0..=lmax {
        for m in 0..=l {
            let lower = if l > m { p[idx(l - 1, m)] } else { 0.0 };
            let v = l as f64 * x * p[idx(l, m)] - ((l * l - m * m) as f64).sqrt() * lower;
            dp[idx(l, m)] = v / st;
        }
    }
    (p, dp)
}

/// Values of a harmonic and its derivatives at one angular node, all in the
/// orthonormal frame `(e_θ, e_φ)` of the unit sphere.
#[derive(Debug, Clone, Copy, Default)]
pub struct HarmonicJet {
    pub y: f64,
    /// Gradient `(∂_θ Y, ∂_φ Y / sin θ)`.
    pub grad: [f64; 2],
    /// Hessian `[θθ, θφ, φφ]`.
    pub hess: [f64; 3],
}

impl HarmonicJet {
    /// Gradient rotated by the parallel quarter-turn `ε`.
    pub fn grad_star(&self) -> [f64; 2] {
        EpsilonRotation::apply(self.grad)
    }

    /// `sym(ε ∘ Hess)`, trace free.
    pub fn hess_star(&self) -> [f64; 3] {
        EpsilonRotation::apply_sym(self.hess)
    }

    /// Trace-free part of the Hessian.
    pub fn hess_tf(&self) -> [f64; 3] {
        let half = 0.5 * (self.hess[0] + self.hess[2]);
        [self.hess[0] - half, self.hess[1], self.hess[2] - half]
    }
}

/// The (1,1) tensor on the round sphere rotating tangent vectors by a quarter
/// turn. In the orthonormal frame `(e_θ, e_φ)` its components are
/// `[[0, -1], [1, 0]]`, which in coordinates reads `ε^θ_θ = ε^φ_φ = 0`,
/// `ε^φ_θ = -1/sin θ`, `ε^θ_φ = sin θ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EpsilonRotation;

impl EpsilonRotation {
    /// Coordinate components `[ε^θ_θ, ε^φ_θ, ε^θ_φ, ε^φ_φ]` at polar angle θ.
    pub fn coordinate_components(theta: f64) -> [f64; 4] {
        [0.0, -1.0 / theta.sin(), theta.sin(), 0.0]
    }

    /// `(εv)_δ = ε^λ_δ v_λ` for a covector in the orthonormal frame.
    pub fn apply(v: [f64; 2]) -> [f64; 2] {
        [-v[1], v[0]]
    }

    /// `½(ε^λ_α T_λδ + ε^λ_δ T_λα)` for a symmetric tensor `[θθ, θφ, φφ]`.
    pub fn apply_sym(t: [f64; 3]) -> [f64; 3] {
        // E T with E = [[0,-1],[1,0]]: rows (-T_φθ, -T_φφ), (T_θθ, T_θφ)
        let et = [[-t[1], -t[2]], [t[0], t[1]]];
        [et[0][0], 0.5 * (et[0][1] + et[1][0]), et[1][1]]
    }
}

/// Harmonic jets for every `Y_L^M` with `L <= lmax` at every node of an
/// angular grid.
#[derive(Debug, Clone)]
pub struct HarmonicTable {
    lmax: usize,
    n_ang: usize,
    jets: Vec<HarmonicJet>,
}

impl HarmonicTable {
    pub fn new(angular: &AngularGrid, lmax: usize) -> Self {
        let n_ang = angular.len();
        let count = Harmonic::count_up_to(lmax);
        let mut jets = vec![HarmonicJet::default(); count * n_ang];
        for (it, &x) in angular.cos_theta().iter().enumerate() {
            let (p, dp) = legendre_table(lmax, x);
            let st = (1.0 - x * x).sqrt();
            let cot = x / st;
            for (ip, &phi) in angular.phi().iter().enumerate() {
                let a = angular.index(it, ip);
                for h in Harmonic::all(lmax) {
                    let (k, sine) = h.order();
                    let li = h.l * (h.l + 1) / 2 + k;
                    let s = p[li];
                    let ds = dp[li];
                    let kf = k as f64;
                    let (t, dt) = if sine {
                        ((kf * phi).sin(), kf * (kf * phi).cos())
                    } else {
                        ((kf * phi).cos(), -kf * (kf * phi).sin())
                    };
                    let ddt = -kf * kf * t;
                    let d2s = -cot * ds - (h.eigen() - kf * kf / (st * st)) * s;
                    jets[h.flat() * n_ang + a] = HarmonicJet {
                        y: s * t,
                        grad: [ds * t, s * dt / st],
                        hess: [
                            d2s * t,
                            (ds - cot * s) * dt / st,
                            s * ddt / (st * st) + cot * ds * t,
                        ],
                    };
                }
            }
        }
        Self { lmax, n_ang, jets }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn jets(&self, h: Harmonic) -> &[HarmonicJet] {
        let start = h.flat() * self.n_ang;
        &self.jets[start..start + self.n_ang]
    }
}
