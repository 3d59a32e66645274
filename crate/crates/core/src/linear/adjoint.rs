//! Radial ODE systems satisfied by mode components of cokernel elements,
//! discretized by Chebyshev collocation in `s` and searched for decaying null
//! vectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::modes::{FieldKind, Parity, RadialProfile};

/// Singular values below this fraction of the largest count as kernel.
pub const NULL_THRESHOLD: f64 = 1e-8;

/// Which profile slot (`a, b, c, d`) an unknown occupies, and the power `p` in
/// `u(r) = s^p F(s)` linking the coordinate profile `u` to the
/// frame-normalized unknown `F`.
#[derive(Debug, Clone, Copy)]
struct Unknown {
    slot: usize,
    power: i32,
}

/// A term `coef · u_f^{(order)}` in an equation, derivatives in `r`.
type Term = (usize, usize, f64);

#[derive(Debug, Clone)]
pub struct AdjointModeSystem {
    pub l: usize,
    pub parity: Parity,
    unknowns: Vec<Unknown>,
    /// Whether the free constant `c_o` (lapse amplitude) is an unknown.
    has_constant: bool,
}

const A: Unknown = Unknown { slot: 0, power: 0 };
const B: Unknown = Unknown { slot: 1, power: -1 };
const C_EVEN: Unknown = Unknown { slot: 2, power: 0 };
const C_ODD: Unknown = Unknown { slot: 2, power: -2 };
const D: Unknown = Unknown { slot: 3, power: 0 };

impl AdjointModeSystem {
    pub fn new(l: usize, parity: Parity) -> Result<Self> {
        let (unknowns, has_constant) = match (parity, l) {
            (Parity::Even, 0) => (vec![A, D], false),
            (Parity::Even, 1) => (vec![A, B, D], true),
            (Parity::Even, _) => (vec![A, B, C_EVEN, D], true),
            (Parity::Odd, 0) => {
                return Err(Error::InvalidConfig("odd parity needs L >= 1".into()));
            }
            (Parity::Odd, 1) => (vec![B], false),
            (Parity::Odd, _) => (vec![B, C_ODD], false),
        };
        Ok(Self {
            l,
            parity,
            unknowns,
            has_constant,
        })
    }

    /// Interior equations at radius `r`, one per unknown, as lists of terms
    /// indexing into `unknowns`.
    fn equations(&self, r: f64) -> Vec<Vec<Term>> {
        let l = self.l as f64;
        let lam = l * (l + 1.0);
        let (r1, r2, r3) = (1.0 / r, 1.0 / (r * r), 1.0 / (r * r * r));
        match (self.parity, self.l) {
            (Parity::Even, 0) => vec![
                vec![(0, 2, 1.0), (0, 1, 2.0 * r1), (0, 0, -4.0 * r2), (1, 0, 4.0 * r2)],
                vec![(1, 2, 1.0), (1, 1, 2.0 * r1), (0, 0, 2.0 * r2), (1, 0, -2.0 * r2)],
            ],
            (Parity::Even, 1) => vec![
                // a, b, d
                vec![(0, 2, r * r), (0, 1, 2.0 * r), (0, 0, -6.0), (2, 0, 4.0), (1, 0, 8.0 * r1)],
                vec![(1, 2, r), (1, 0, -6.0 * r1), (0, 0, 2.0), (2, 0, -2.0)],
                vec![(2, 2, r * r), (2, 1, 2.0 * r), (2, 0, -4.0), (0, 0, 2.0), (1, 0, -4.0 * r1)],
            ],
            (Parity::Even, _) => vec![
                // a, b, c, d
                vec![
                    (0, 2, 1.0),
                    (0, 1, 2.0 * r1),
                    (0, 0, -4.0 * r2 - lam * r2),
                    (3, 0, 4.0 * r2),
                    (1, 0, 4.0 * lam * r3),
                    (2, 0, -2.0 * lam * r2),
                ],
                vec![
                    (1, 2, 1.0),
                    (1, 0, -4.0 * r2 - lam * r2),
                    (0, 0, 2.0 * r1),
                    (3, 0, -2.0 * r1),
                    (2, 0, -2.0 * r1 + 2.0 * lam * r1),
                ],
                vec![
                    (2, 2, 1.0),
                    (2, 1, 2.0 * r1),
                    (2, 0, 2.0 * r2 - lam * r2),
                    (1, 0, 4.0 * r3),
                ],
                vec![
                    (3, 2, 1.0),
                    (3, 1, 2.0 * r1),
                    (3, 0, -2.0 * r2 - lam * r2),
                    (0, 0, 2.0 * r2),
                    (2, 0, 2.0 * lam * r2),
                ],
            ],
            (Parity::Odd, 1) => vec![vec![(0, 2, 1.0), (0, 0, -6.0 * r2)]],
            (Parity::Odd, _) => vec![
                // b, c
                vec![(0, 2, 1.0), (0, 0, -(4.0 + lam) * r2), (1, 0, (lam - 2.0) * r3)],
                vec![(1, 2, 1.0), (1, 1, -2.0 * r1), (1, 0, (4.0 - lam) * r2), (0, 0, 4.0 * r1)],
            ],
        }
    }

    /// Boundary rows at `r = 1`: terms plus the coefficient of `c_o`.
    fn boundary_rows(&self) -> Vec<(Vec<Term>, f64)> {
        let l = self.l as f64;
        let lam = l * (l + 1.0);
        match (self.parity, self.l) {
            (Parity::Even, 0) => vec![(vec![(0, 0, 1.0)], 0.0), (vec![(0, 1, 1.0), (1, 0, -2.0)], 0.0)],
            (Parity::Even, 1) => vec![
                (vec![(0, 0, -1.0)], 1.0),
                (vec![(1, 0, -1.0)], 1.0),
                (vec![(0, 1, 1.0), (0, 0, 2.0), (2, 0, -2.0), (1, 0, -2.0)], 0.0),
                (vec![(1, 1, 1.0), (1, 0, 2.0), (2, 0, 1.0)], 0.0),
            ],
            (Parity::Even, _) => vec![
                (vec![(0, 0, -1.0)], 1.0),
                (vec![(1, 0, -l)], 1.0),
                (vec![(0, 1, 1.0), (0, 0, 2.0), (3, 0, -2.0), (1, 0, -lam)], 0.0),
                (vec![(1, 1, 1.0), (1, 0, 2.0), (3, 0, 1.0)], 0.0),
                (vec![(2, 0, 1.0)], 0.0),
            ],
            (Parity::Odd, 1) => vec![(vec![(0, 1, 1.0), (0, 0, 2.0)], 0.0)],
            (Parity::Odd, _) => vec![(vec![(1, 0, 1.0)], 0.0), (vec![(0, 1, 1.0), (0, 0, 2.0)], 0.0)],
        }
    }

    fn n_cols(&self, n: usize) -> usize {
        self.unknowns.len() * n + usize::from(self.has_constant)
    }

    /// Add `coef · d^k u / dr^k` at node `i` to `row`.
    fn add_term(&self, radial: &RadialGrid, row: &mut [f64], i: usize, (f, order, coef): Term) {
        let n = radial.len();
        let s = radial.nodes()[i];
        let p = self.unknowns[f].power as f64;
        let sp = |k: i32| s.powf(p + k as f64);
        let (c0, c1, c2) = match order {
            0 => (sp(0), 0.0, 0.0),
            1 => (-p * sp(1), -sp(2), 0.0),
            _ => (p * (p + 1.0) * sp(2), (2.0 * p + 2.0) * sp(3), sp(4)),
        };
        let base = f * n;
        row[base + i] += coef * c0;
        if c1 != 0.0 || c2 != 0.0 {
            for j in 0..n {
                row[base + j] += coef * (c1 * radial.d1()[(i, j)] + c2 * radial.d2()[(i, j)]);
            }
        }
    }

    /// Square collocation matrix: interior equations at nodes `1..n-1`,
    /// decay at `s = 0`, boundary rows at `s = 1`. Rows are scaled to unit
    /// maximum.
    pub fn matrix(&self, radial: &RadialGrid) -> DMatrix<f64> {
        let n = radial.len();
        let cols = self.n_cols(n);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(cols);
        for i in 1..n - 1 {
            let r = 1.0 / radial.nodes()[i];
            for eq in self.equations(r) {
                let mut row = vec![0.0; cols];
                for t in eq {
                    self.add_term(radial, &mut row, i, t);
                }
                rows.push(row);
            }
        }
        for f in 0..self.unknowns.len() {
            let mut row = vec![0.0; cols];
            row[f * n + radial.infinity_index()] = 1.0;
            rows.push(row);
        }
        for (terms, constant) in self.boundary_rows() {
            let mut row = vec![0.0; cols];
            for t in terms {
                self.add_term(radial, &mut row, radial.boundary_index(), t);
            }
            if self.has_constant {
                row[cols - 1] = constant;
            }
            rows.push(row);
        }
        let mut m = DMatrix::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            let scale = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = v / scale;
            }
        }
        m
    }

    /// Unpack a null vector into coordinate profiles and `c_o`.
    fn unpack(&self, radial: &RadialGrid, v: &DVector<f64>) -> (RadialProfile, f64) {
        let n = radial.len();
        let mut frame = RadialProfile::zeros(n);
        for (f, u) in self.unknowns.iter().enumerate() {
            frame.get_mut(u.slot).copy_from_slice(&v.as_slice()[f * n..(f + 1) * n]);
        }
        let c_o = if self.has_constant { v[v.len() - 1] } else { 0.0 };
        (frame.to_coordinate(radial, FieldKind::Tensor, self.parity), c_o)
    }
}

#[derive(Debug, Clone)]
pub struct AdjointKernel {
    /// Coordinate profiles in `r`, normalized so that `b(1) = 1` whenever
    /// `b(1) ≠ 0`.
    pub profiles: Vec<RadialProfile>,
    /// Lapse amplitude `c_o` of each kernel element.
    pub lapse_amplitude: Vec<f64>,
    /// Singular values divided by the largest, ascending.
    pub relative_singular_values: Vec<f64>,
    /// Ratio between the smallest retained and largest discarded singular
    /// value (infinite when the kernel is trivial and the spectrum is clean).
    pub gap: f64,
}

impl AdjointKernel {
    pub fn dim(&self) -> usize {
        self.profiles.len()
    }
}

/// Decaying solutions of the adjoint mode system for degree `l`.
pub fn adjoint_kernel(l: usize, parity: Parity, radial: &RadialGrid) -> Result<AdjointKernel> {
    let sys = AdjointModeSystem::new(l, parity)?;
    let m = sys.matrix(radial);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("requested");
    let smax = svd.singular_values.max();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let rel: Vec<f64> = order.iter().map(|&i| svd.singular_values[i] / smax).collect();
    let dim = rel.iter().take_while(|v| **v < NULL_THRESHOLD).count();
    let gap = match dim {
        0 => rel[0] / NULL_THRESHOLD,
        k if k == rel.len() => 0.0,
        k => rel[k] / rel[k - 1].max(f64::MIN_POSITIVE),
    };
    // A singular value within a factor 100 of the threshold on either side
    // cannot be classified reliably.
    if rel.iter().any(|v| *v > NULL_THRESHOLD * 1e-2 && *v < NULL_THRESHOLD * 1e2) {
        return Err(Error::Resolution { gap });
    }
    let mut profiles = Vec::with_capacity(dim);
    let mut lapse_amplitude = Vec::with_capacity(dim);
    for &i in order.iter().take(dim) {
        let v = v_t.row(i).transpose();
        let (mut p, mut c_o) = sys.unpack(radial, &v);
        let b1 = p.b[radial.boundary_index()];
        let scale = if b1.abs() > 1e-12 { 1.0 / b1 } else { 1.0 / p.max_abs() };
        for k in 0..4 {
            p.get_mut(k).iter_mut().for_each(|x| *x *= scale);
        }
        c_o *= scale;
        profiles.push(p);
        lapse_amplitude.push(c_o);
    }
    Ok(AdjointKernel {
        profiles,
        lapse_amplitude,
        relative_singular_values: rel,
        gap,
    })
}
