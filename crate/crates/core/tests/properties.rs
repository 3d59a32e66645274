use proptest::prelude::*;

use staticext::field::{standard, ScalarField};
use staticext::geometry::{hessian_and_laplacian, mean_curvature, ricci, MetricState};
use staticext::linear::apply_dphi;
use staticext::modes::transform_to_modes;
use staticext::norms::{weighted_norm, WeightedNormSpec};
use staticext::random::random_state;
use staticext::solver::{
    adm_mass, conformal_schwarzschild_state, newton_solve, schwarzschild_boundary_data, SolverConfig,
};
use staticext::symmetry::symmetry_deviation;

fn small(n_r: usize, lmax: usize) -> SolverConfig {
    SolverConfig {
        n_r,
        lmax,
        ..SolverConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn shell_products_match_mode_products(seed_u in 0u64..1000, seed_v in 1000u64..2000, shell in 1usize..11) {
        let disc = standard(12, 5).unwrap();
        let u = random_state(&disc, 5, 1.0, seed_u).lapse_pert;
        let v = random_state(&disc, 5, 1.0, seed_v).lapse_pert;
        let n = disc.grid.n_ang();
        let row = |f: &ScalarField| f.values[shell * n..(shell + 1) * n].to_vec();
        let (ur, vr) = (row(&u), row(&v));
        let prod: Vec<f64> = ur.iter().zip(&vr).map(|(a, b)| a * b).collect();
        let grid = disc.grid.angular.integrate(&prod);
        let (mu, mv) = (transform_to_modes(&u), transform_to_modes(&v));
        let mut modes = 0.0;
        let mut scale = 0.0;
        for (key, p) in &mu.modes {
            if let Some(q) = mv.get(*key) {
                modes += p.a[shell] * q.a[shell] * key.harmonic.norm_sq();
                scale += (p.a[shell] * q.a[shell]).abs() * key.harmonic.norm_sq();
            }
        }
        prop_assert!((grid - modes).abs() <= 1e-10 * scale.max(1e-300), "{grid} vs {modes}");
    }

    #[test]
    fn weighted_norm_is_homogeneous(seed in 0u64..1000, c in -1e3f64..1e3, k in 0usize..=2) {
        let disc = standard(12, 3).unwrap();
        let u = random_state(&disc, 3, 1.0, seed).lapse_pert;
        let mut cu = u.clone();
        cu.values.iter_mut().for_each(|x| *x *= c);
        let spec = WeightedNormSpec::new(k, -0.5).unwrap();
        let (a, b) = (weighted_norm(&cu, spec).unwrap(), weighted_norm(&u, spec).unwrap());
        prop_assert!((a - c.abs() * b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn scalar_slot_is_the_flat_laplacian(seed in 0u64..1000) {
        let disc = standard(14, 4).unwrap();
        let dir = random_state(&disc, 4, 1.0, seed);
        let lin = apply_dphi(&dir.theta, &dir.lapse_pert);
        let (_, lap) = hessian_and_laplacian(&dir.lapse_pert, &MetricState::flat(&disc)).unwrap();
        let n = disc.grid.n_ang();
        // Compare on the collocated (open) shells.
        let interior = n..(disc.grid.n_r() - 1) * n;
        let scale = lap.values[interior.clone()].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in interior {
            prop_assert!((lin.interior_scalar.values[i] - lap.values[i]).abs() <= 1e-12 * (1.0 + scale));
        }
    }
}

#[test]
fn flat_background_is_exact_at_every_resolution() {
    for (n_r, lmax) in [(8, 0), (16, 4), (32, 8), (48, 8)] {
        let flat = MetricState::flat(&standard(n_r, lmax).unwrap());
        assert!(ricci(&flat).unwrap().max_abs() <= 1e-12, "n_r = {n_r}");
        let h = mean_curvature(&flat).unwrap();
        assert!(h.0.iter().all(|v| (v - 2.0).abs() <= 1e-12), "n_r = {n_r}");
    }
}

#[test]
fn newton_converges_quadratically() {
    let cfg = small(24, 2);
    let disc = cfg.discretization().unwrap();
    for m in [0.05, 0.1] {
        let sol = newton_solve(&schwarzschild_boundary_data(&disc, m).unwrap(), &cfg).unwrap();
        let r = sol.diagnostics.residual_history();
        for w in r.windows(2) {
            if w[0] <= 1e-3 {
                // Below ~1e-11 the residual is at roundoff.
                assert!(w[1] <= (100.0 * w[0] * w[0]).max(1e-11), "m = {m}: {r:?}");
            }
        }
    }
}

#[test]
fn solution_and_closed_form_share_gauge_invariants() {
    let cfg = small(32, 2);
    let disc = cfg.discretization().unwrap();
    let m = 0.1;
    let sol = newton_solve(&schwarzschild_boundary_data(&disc, m).unwrap(), &cfg).unwrap();
    let exact = conformal_schwarzschild_state(&disc, m);
    assert!(symmetry_deviation(&sol.state.theta, &disc).1 <= 1e-12);
    assert!(symmetry_deviation(&sol.state.lapse_pert, &disc).1 <= 1e-12);

    let n = disc.grid.n_ang();
    let area = |st: &MetricState| -> f64 {
        let t = &st.theta.comps;
        let da: Vec<f64> = (0..n)
            .map(|j| ((1.0 + t[3][j]) * (1.0 + t[5][j]) - t[4][j] * t[4][j]).sqrt())
            .collect();
        disc.grid.angular.integrate(&da)
    };
    let total_h = |st: &MetricState| -> f64 {
        let t = &st.theta.comps;
        let h = mean_curvature(st).unwrap();
        let w: Vec<f64> = (0..n)
            .map(|j| h.0[j] * ((1.0 + t[3][j]) * (1.0 + t[5][j]) - t[4][j] * t[4][j]).sqrt())
            .collect();
        disc.grid.angular.integrate(&w)
    };
    let mass = |st: &MetricState| adm_mass(st).unwrap().mass;
    assert!((area(&sol.state) - area(&exact)).abs() <= 1e-4);
    assert!((total_h(&sol.state) - total_h(&exact)).abs() <= 1e-4);
    assert!((mass(&sol.state) - mass(&exact)).abs() <= 1e-4);
    // The two states differ by a radial diffeomorphism.
    let mut d = sol.state.theta.clone();
    d.axpy(-1.0, &exact.theta);
    assert!(d.max_abs() > 1e-3);
}
