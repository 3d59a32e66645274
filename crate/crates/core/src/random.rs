//! Seeded, band-limited random fields for tests and benchmarks.
//!
//! Every mode up to `lmax` receives a polynomial radial profile
//! `Σ_{k=k0}^{k0+3} c_k s^k`, so the fields are resolved exactly by the
//! spectral grid and decay at least like `s^{k0}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::{Discretization, OneFormField, ScalarField, SurfaceOneForm, SurfaceScalar, SurfaceTensor, SymTensorField};
use crate::geometry::{MetricState, ResidualVector};
use crate::harmonics::Harmonic;
use crate::modes::{allowed_profiles, transform_from_modes, FieldKind, ModeField, ModeKey, ModeSpectrum, Parity};
use crate::symmetry::reflection_project;

fn random_field<F: ModeField>(disc: &Discretization, kind: FieldKind, k0: i32, lmax: usize, rng: &mut ChaCha8Rng) -> F {
    let nodes = disc.grid.radial.nodes();
    let mut sp = ModeSpectrum::new(kind, disc.grid.lmax(), disc.grid.n_r());
    for h in Harmonic::all(lmax.min(disc.grid.lmax())) {
        for parity in [Parity::Even, Parity::Odd] {
            let allowed = allowed_profiles(kind, h.l, parity);
            if !allowed.iter().any(|x| *x) {
                continue;
            }
            let p = sp.entry(ModeKey { harmonic: h, parity }).expect("within truncation");
            for (k, _) in allowed.iter().enumerate().filter(|(_, a)| **a) {
                let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                for (v, s) in p.get_mut(k).iter_mut().zip(nodes) {
                    *v = (0..4).map(|j| c[j] * s.powi(k0 + j as i32)).sum();
                }
            }
        }
    }
    transform_from_modes(&sp, disc).expect("spectrum built on this grid")
}

/// Random decaying `(Θ, φ)` with modes up to `lmax` and `‖·‖_∞ ≈ amplitude`.
pub fn random_state(disc: &Discretization, lmax: usize, amplitude: f64, seed: u64) -> MetricState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: SymTensorField = random_field(disc, FieldKind::Tensor, 1, lmax, &mut rng);
    let phi: ScalarField = random_field(disc, FieldKind::Scalar, 1, lmax, &mut rng);
    let scale = amplitude / theta.max_abs().max(phi.max_abs()).max(f64::MIN_POSITIVE);
    MetricState {
        theta: theta.scale(scale),
        lapse_pert: phi.scale(scale),
    }
}

/// Random residual-space vector: interior slots decay like `r⁻³`, boundary
/// slots are band-limited surface fields.
pub fn random_residual(disc: &Discretization, lmax: usize, seed: u64) -> ResidualVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ang = disc.grid.n_ang();
    let interior_tensor: SymTensorField = random_field(disc, FieldKind::Tensor, 3, lmax, &mut rng);
    let interior_scalar: ScalarField = random_field(disc, FieldKind::Scalar, 3, lmax, &mut rng);
    let gauge: OneFormField = random_field(disc, FieldKind::OneForm, 0, lmax, &mut rng);
    let metric: SymTensorField = random_field(disc, FieldKind::Tensor, 0, lmax, &mut rng);
    let mean: ScalarField = random_field(disc, FieldKind::Scalar, 0, lmax, &mut rng);
    ResidualVector {
        interior_tensor,
        interior_scalar,
        bdry_gauge: SurfaceOneForm(std::array::from_fn(|k| gauge.comps[k][..n_ang].to_vec())),
        bdry_metric: SurfaceTensor(std::array::from_fn(|k| metric.comps[3 + k][..n_ang].to_vec())),
        bdry_meancurv: SurfaceScalar(mean.values[..n_ang].to_vec()),
    }
}

/// [`random_residual`] projected onto the reflection-invariant subspace.
pub fn random_symmetric_residual(disc: &Discretization, lmax: usize, seed: u64) -> ResidualVector {
    reflection_project(&random_residual(disc, lmax, seed), disc)
}

/// [`random_state`] projected onto the reflection-invariant subspace.
pub fn random_symmetric_state(disc: &Discretization, lmax: usize, amplitude: f64, seed: u64) -> MetricState {
    let st = random_state(disc, lmax, amplitude, seed);
    MetricState {
        theta: reflection_project(&st.theta, disc),
        lapse_pert: reflection_project(&st.lapse_pert, disc),
    }
}
