//! End-to-end acceptance checks at production resolution (`n_r = 48`,
//! `lmax = 8`). Prints one line per criterion and exits nonzero if any
//! criterion fails.

use std::time::{Duration, Instant};

use staticext::field::{standard, Discretization};
use staticext::geometry::{BoundaryData, ResidualVector};
use staticext::linear::{
    adjoint_kernel, apply_t, cokernel_basis, finite_difference_check, lemma_residuals, pair_residual, solve_linearized,
    volume_pairing, CokernelElement, LinearConfig, LinearSystem,
};
use staticext::modes::Parity;
use staticext::random::{random_residual, random_state, random_symmetric_residual};
use staticext::solver::{newton_solve, schwarzschild_boundary_data, shooting_oracle, state_norm, SolverConfig, StaticSolution};

const N_R: usize = 48;
const LMAX: usize = 8;
const DELTA: f64 = -0.5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn disc() -> Discretization {
    standard(N_R, LMAX).expect("standard grid")
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn linearization_fidelity() -> Outcome {
    let disc = disc();
    let mut worst: [Option<f64>; 5] = [None; 5];
    for seed in 0..5 {
        let dir = random_state(&disc, LMAX, 1.0, seed);
        let rep = finite_difference_check(&dir, &[1e-2, 1e-3, 1e-4]).expect("valid metrics");
        for (w, o) in worst.iter_mut().zip(rep.orders()) {
            if let Some(o) = o {
                *w = Some(w.map_or(o, |w| w.min(o)));
            }
        }
    }
    let orders: Vec<String> = worst.iter().map(|o| o.map_or("exact".to_string(), |o| format!("{o:.2}"))).collect();
    Outcome {
        pass: worst.iter().all(|o| o.is_none_or(|o| o >= 1.8)),
        detail: format!("min fitted order per slot [{}]", orders.join(", ")),
    }
}

fn adjoint_regression() -> Outcome {
    let disc = disc();
    let radial = &disc.grid.radial;
    let s = radial.nodes();
    let mut dims = Vec::new();
    let mut ok = true;
    let mut even_dev = f64::NAN;
    let mut odd_dev = f64::NAN;
    for l in 0..=6 {
        for parity in [Parity::Even, Parity::Odd] {
            if l == 0 && parity == Parity::Odd {
                continue;
            }
            let k = match adjoint_kernel(l, parity, radial) {
                Ok(k) => k,
                Err(e) => {
                    dims.push(format!("L{l}{}:err({e})", tag(parity)));
                    ok = false;
                    continue;
                }
            };
            let expected = usize::from(l == 1);
            ok &= k.dim() == expected;
            dims.push(format!("L{l}{}:{}", tag(parity), k.dim()));
            if l == 1 && k.dim() == 1 {
                let p = &k.profiles[0];
                let dev = |got: &[f64], f: &dyn Fn(f64) -> f64| {
                    got.iter().zip(s).map(|(g, &x)| (g - f(x)).abs()).fold(0.0, f64::max)
                };
                if parity == Parity::Even {
                    even_dev = dev(&p.a, &|x| x * x)
                        .max(dev(&p.b, &|x| x))
                        .max(dev(&p.d, &|x| -x * x))
                        .max(dev(&p.c, &|_| 0.0));
                } else {
                    odd_dev = dev(&p.b, &|x| x * x).max(dev(&p.c, &|_| 0.0));
                }
            }
        }
    }
    ok &= even_dev <= 1e-8 && odd_dev <= 1e-8;
    Outcome {
        pass: ok,
        detail: format!("dims {}; L1 profile deviation even {even_dev:.1e} odd {odd_dev:.1e}", dims.join(" ")),
    }
}

fn tag(p: Parity) -> &'static str {
    match p {
        Parity::Even => "e",
        Parity::Odd => "o",
    }
}

const TENSOR_WEIGHTS: [f64; 6] = [1.0, 2.0, 2.0, 1.0, 2.0, 1.0];

fn element_norm(ck: &CokernelElement) -> f64 {
    let disc = &ck.upsilon.disc;
    let u: Vec<&[f64]> = ck.upsilon.comps.iter().map(|c| c.as_slice()).collect();
    let volume = volume_pairing(disc, &u, &u, &TENSOR_WEIGHTS)
        + volume_pairing(disc, &[&ck.phi.values], &[&ck.phi.values], &[1.0]);
    let ang = &disc.grid.angular;
    let surface: f64 = (0..ang.len())
        .map(|a| ang.weight(a / ang.n_phi()) * (0..3).map(|k| ck.eta.0[k][a].powi(2)).sum::<f64>())
        .sum();
    (volume + surface).sqrt()
}

fn cokernel_orthogonality() -> Outcome {
    let disc = disc();
    let basis = cokernel_basis(&disc);
    let norms: Vec<f64> = basis.iter().map(element_norm).collect();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let st = random_state(&disc, LMAX, 1.0, 100 + seed);
        let image = apply_t(&st.theta, &st.lapse_pert);
        let sn = state_norm(&st, DELTA);
        for (ck, cn) in basis.iter().zip(&norms) {
            worst = worst.max(pair_residual(&image, ck).abs() / (sn * cn));
        }
    }
    let lemma = basis.iter().map(|ck| lemma_residuals(ck).max()).fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-8 && lemma <= 1e-9,
        detail: format!("max normalized pairing {worst:.2e}; max lemma-system residual {lemma:.2e}"),
    }
}

fn symmetric_surjectivity() -> Outcome {
    let disc = disc();
    let system = LinearSystem::symmetric(&disc);
    let cfg = LinearConfig::default();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for seed in 0..20 {
        let rhs = random_symmetric_residual(&disc, LMAX, 200 + seed);
        let y = system.layout.project(&rhs);
        match solve_linearized(&rhs, &system, cfg) {
            Ok((theta, phi)) => {
                let got = system.layout.project(&apply_t(&theta, &phi));
                let r: Vec<f64> = got.iter().zip(&y).map(|(a, b)| a - b).collect();
                worst = worst.max(norm(&r) / norm(&y));
            }
            Err(_) => failures += 1,
        }
    }
    // A generic rhs pairs nontrivially with the cokernel.
    let basis = cokernel_basis(&disc);
    let rhs = random_residual(&disc, LMAX, 999);
    let rhs_norm = residual_pairing_norm(&rhs);
    let obstruction = basis
        .iter()
        .map(|ck| pair_residual(&rhs, ck).abs() / (rhs_norm * element_norm(ck)))
        .fold(0.0, f64::max);
    Outcome {
        pass: failures == 0 && worst <= 1e-8 && obstruction >= 1e-3,
        detail: format!(
            "max relative residual {worst:.2e} over 20 rhs ({failures} failed); non-symmetric obstruction {obstruction:.2e}"
        ),
    }
}

/// The norm dual to [`pair_residual`].
fn residual_pairing_norm(res: &ResidualVector) -> f64 {
    let disc = res.disc();
    let t: Vec<&[f64]> = res.interior_tensor.comps.iter().map(|c| c.as_slice()).collect();
    let volume = volume_pairing(disc, &t, &t, &TENSOR_WEIGHTS)
        + volume_pairing(disc, &[&res.interior_scalar.values], &[&res.interior_scalar.values], &[1.0]);
    let ang = &disc.grid.angular;
    let surface: f64 = (0..ang.len())
        .map(|a| ang.weight(a / ang.n_phi()) * (0..3).map(|k| res.bdry_gauge.0[k][a].powi(2)).sum::<f64>())
        .sum();
    (volume + surface).sqrt()
}

fn newton_iterations(sol: &StaticSolution) -> usize {
    sol.diagnostics.steps.len() - 1
}

fn final_residual(sol: &StaticSolution) -> f64 {
    sol.diagnostics.steps.last().map_or(f64::NAN, |s| s.residual)
}

fn flat_fixed_point(solutions: &mut Vec<(String, StaticSolution)>) -> Outcome {
    let disc = disc();
    match newton_solve(&BoundaryData::round(&disc), &SolverConfig::default()) {
        Ok(sol) => {
            let dev = sol.state.theta.max_abs().max(sol.state.lapse_pert.max_abs());
            let (it, res) = (newton_iterations(&sol), final_residual(&sol));
            solutions.push(("round".into(), sol));
            Outcome {
                pass: it <= 1 && res <= 1e-13 && dev <= 1e-13,
                detail: format!("{it} Newton steps, residual {res:.1e}, distance from flat {dev:.1e}"),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: format!("solve failed: {e}"),
        },
    }
}

fn schwarzschild_recovery(solutions: &mut Vec<(String, StaticSolution)>) -> Outcome {
    let disc = disc();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [0.05, 0.1, 0.2] {
        let t = Instant::now();
        let bd = schwarzschild_boundary_data(&disc, m).expect("mass in range");
        let oracle = shooting_oracle(&bd).expect("round data").mass;
        match newton_solve(&bd, &SolverConfig::default()) {
            Ok(sol) => {
                let elapsed = t.elapsed();
                let it = newton_iterations(&sol);
                let res = final_residual(&sol);
                let mass = sol.diagnostics.mass.map_or(f64::NAN, |e| e.mass);
                let rep = sol.diagnostics.report;
                let ok = it <= 8
                    && res <= 1e-10
                    && (mass - oracle).abs() <= 1e-4
                    && rep.static_defect <= 1e-8
                    && rep.scalar_curvature <= 1e-8
                    && rep.omega <= 1e-8
                    && elapsed <= Duration::from_secs(300);
                pass &= ok;
                parts.push(format!(
                    "m={m}: {it} steps, res {res:.1e}, |mass-oracle| {:.1e}, defect {:.1e}, R {:.1e}, omega {:.1e}, {:.0}s",
                    (mass - oracle).abs(),
                    rep.static_defect,
                    rep.scalar_curvature,
                    rep.omega,
                    elapsed.as_secs_f64()
                ));
                solutions.push((format!("m={m}"), sol));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("m={m}: {e}"));
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn nonspherical_extension(solutions: &mut Vec<(String, StaticSolution)>) -> Outcome {
    let disc = disc();
    let bd = BoundaryData::from_modes(&disc, &[(2, 1, Parity::Even, 0.0, 1e-3)], &[]).expect("valid data");
    match newton_solve(&bd, &SolverConfig::default()) {
        Ok(sol) => {
            let mismatch = sol.boundary_mismatch();
            let rep = sol.diagnostics.report;
            let pass = mismatch <= 1e-9 && rep.static_defect <= 1e-8 && rep.scalar_curvature <= 1e-8 && rep.omega <= 1e-8;
            let detail = format!(
                "{} steps, boundary mismatch {mismatch:.1e}, defect {:.1e}, R {:.1e}, omega {:.1e}",
                newton_iterations(&sol),
                rep.static_defect,
                rep.scalar_curvature,
                rep.omega
            );
            solutions.push(("L2".into(), sol));
            Outcome { pass, detail }
        }
        Err(e) => Outcome {
            pass: false,
            detail: format!("solve failed: {e}"),
        },
    }
}

fn reduction_shadow(solutions: &[(String, StaticSolution)]) -> Outcome {
    let mut pass = solutions.len() == 5;
    let mut parts = Vec::new();
    for (name, sol) in solutions {
        let rep = sol.diagnostics.report;
        let bound = 1e-8 * (1.0 + state_norm(&sol.state, DELTA));
        pass &= rep.omega <= bound && rep.trace_identity <= 1e-8;
        parts.push(format!("{name}: omega {:.1e} (bound {bound:.1e}), identity {:.1e}", rep.omega, rep.trace_identity));
    }
    Outcome {
        pass,
        detail: format!("{} solutions; {}", solutions.len(), parts.join("; ")),
    }
}

fn main() {
    let mut solutions = Vec::new();
    let checks: Vec<(&str, Option<Duration>, Box<dyn FnOnce(&mut Vec<(String, StaticSolution)>) -> Outcome>)> = vec![
        ("linearization fidelity", Some(Duration::from_secs(60)), Box::new(|_| linearization_fidelity())),
        ("adjoint mode kernels", Some(Duration::from_secs(30)), Box::new(|_| adjoint_regression())),
        ("cokernel orthogonality", None, Box::new(|_| cokernel_orthogonality())),
        ("symmetric surjectivity", None, Box::new(|_| symmetric_surjectivity())),
        ("flat fixed point", None, Box::new(flat_fixed_point)),
        ("schwarzschild recovery", None, Box::new(schwarzschild_recovery)),
        ("non-spherical extension", None, Box::new(nonspherical_extension)),
        ("reduction to static", None, Box::new(|s| reduction_shadow(s))),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in checks.into_iter().enumerate() {
        let t = Instant::now();
        let mut out = check(&mut solutions);
        let elapsed = t.elapsed();
        if let Some(b) = budget {
            if elapsed > b {
                out.pass = false;
                out.detail.push_str(&format!("; over time budget of {}s", b.as_secs()));
            }
        }
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {} [{verdict}] {name}: {} ({:.1}s)", i + 1, out.detail, elapsed.as_secs_f64());
        if !out.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
