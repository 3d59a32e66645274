//! Newton iteration for the modified static system, post hoc verification
//! of staticity, ADM mass extraction and spherically symmetric oracles.

mod mass;
mod oracle;
mod verify;

pub use mass::{adm_mass, flux_mass, MassEstimate, MASS_SPREAD_TOL, MIN_MASS_NR};
pub use oracle::{conformal_schwarzschild_state, schwarzschild_boundary_data, shooting_oracle, ShootingSolution};
pub use verify::{verify_static, StaticReport};
pub use oracle::MAX_SCHWARZSCHILD_MASS;

use crate::error::{Error, Result};
use crate::field::{standard, Discretization, SurfaceScalar, SurfaceTensor};
use crate::geometry::{mean_curvature, static_residual, static_residual_with_tangent, BoundaryData, MetricState, ResidualVector};
use crate::linear::{gmres, LinearOperator, LinearSystem, ModeLayout};
use crate::modes::ModeSpectrum;
use crate::norms::{rescaled_norm, surface_norm, WeightedNormSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub lmax: usize,
    pub n_r: usize,
    pub delta: f64,
    pub newton_tol: f64,
    pub lin_tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lmax: 8,
            n_r: 48,
            delta: -0.5,
            newton_tol: 1e-10,
            lin_tol: 1e-12,
            max_iter: 12,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        WeightedNormSpec::new(0, self.delta)?;
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.newton_tol > 0.0) {
            return bad("newton tolerance must be positive");
        }
        if !(self.lin_tol > 0.0 && self.lin_tol < 1.0) {
            return bad("linear tolerance must lie in (0, 1)");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping must lie in (0, 1]");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        Ok(())
    }

    pub fn discretization(&self) -> Result<Discretization> {
        standard(self.n_r, self.lmax)
    }
}

/// Tensor component weights of `|T|²` in an orthonormal frame.
pub(crate) const TENSOR_WEIGHTS: [f64; 6] = [1.0, 2.0, 2.0, 1.0, 2.0, 1.0];
pub(crate) const SURFACE_TENSOR_WEIGHTS: [f64; 3] = [1.0, 2.0, 1.0];

/// Slot norms of a residual: weighted `L²` norms with weight `δ − 2` for the
/// interior slots, evaluated on the collocation shells (the shell `s = 1`
/// carries the boundary rows instead), and surface `L²` norms for the
/// boundary slots.
pub fn residual_norms(res: &ResidualVector, delta: f64) -> [f64; 5] {
    let disc = res.disc();
    let t: Vec<&[f64]> = res.interior_tensor.comps.iter().map(|c| c.as_slice()).collect();
    let g: Vec<&[f64]> = res.bdry_gauge.0.iter().map(|c| c.as_slice()).collect();
    let m: Vec<&[f64]> = res.bdry_metric.0.iter().map(|c| c.as_slice()).collect();
    [
        rescaled_norm(disc, &t, &TENSOR_WEIGHTS, 2, delta, true),
        rescaled_norm(disc, &[&res.interior_scalar.values], &[1.0], 2, delta, true),
        surface_norm(disc, &g, &[1.0; 3]),
        surface_norm(disc, &m, &SURFACE_TENSOR_WEIGHTS),
        surface_norm(disc, &[&res.bdry_meancurv.0], &[1.0]),
    ]
}

/// `‖Θ‖_{0,δ}` and `‖φ‖_{0,δ}` combined.
pub fn state_norm(state: &MetricState, delta: f64) -> f64 {
    let disc = state.disc();
    let t: Vec<&[f64]> = state.theta.comps.iter().map(|c| c.as_slice()).collect();
    let a = rescaled_norm(disc, &t, &TENSOR_WEIGHTS, 0, delta, false);
    let b = rescaled_norm(disc, &[&state.lapse_pert.values], &[1.0], 0, delta, false);
    a.hypot(b)
}

#[derive(Debug, Clone)]
pub struct NewtonStep {
    /// Max over the slot norms.
    pub residual: f64,
    pub slots: [f64; 5],
    /// Weighted norm of `ω` over the exterior for the iterate.
    pub omega: f64,
    /// Krylov iterations and relative linear residual of the step that
    /// followed (zero for the final, converged iterate).
    pub gmres_iterations: usize,
    pub linear_residual: f64,
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub steps: Vec<NewtonStep>,
    /// Dimension of the discrete kernel of the linearization on the
    /// symmetric modes (0 means the returned state is locally unique).
    pub kernel_dim: usize,
    pub report: StaticReport,
    pub mass: Option<MassEstimate>,
    /// `‖ω‖ > 1e−8 (1 + ‖Θ‖)` after convergence.
    pub gauge_anomaly: bool,
}

impl Diagnostics {
    pub fn residual_history(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.residual).collect()
    }
}

#[derive(Debug, Clone)]
pub struct StaticSolution {
    /// Synthesized from `theta_modes` and `lapse_modes`.
    pub state: MetricState,
    pub theta_modes: ModeSpectrum,
    pub lapse_modes: ModeSpectrum,
    pub requested: BoundaryData,
    pub sigma_achieved: SurfaceTensor,
    pub h_achieved: SurfaceScalar,
    pub cfg: SolverConfig,
    pub diagnostics: Diagnostics,
}

impl StaticSolution {
    /// Largest pointwise deviation of the achieved boundary data from the
    /// requested data.
    pub fn boundary_mismatch(&self) -> f64 {
        let mut m = 0.0f64;
        for k in 0..3 {
            for (a, b) in self.sigma_achieved.0[k].iter().zip(&self.requested.sigma.0[k]) {
                m = m.max((a - b).abs());
            }
        }
        for (a, b) in self.h_achieved.0.iter().zip(&self.requested.h.0) {
            m = m.max((a - b).abs());
        }
        m
    }
}

const GMRES_MAX_ITER: usize = 300;
const GMRES_RESTART: usize = 40;

/// Threshold of the reduction check on `ω`.
pub const GAUGE_TOL: f64 = 1e-8;

/// Solve `Φ(g̃, f, g_o) = 0` for reflection-invariant boundary data, starting
/// from the flat state.
pub fn newton_solve(bd: &BoundaryData, cfg: &SolverConfig) -> Result<StaticSolution> {
    newton_solve_with(bd, cfg, |_| {})
}

/// [`newton_solve`], reporting each iterate's residual as soon as it is known
/// (the Krylov fields of the reported step are still zero at that point).
pub fn newton_solve_with(bd: &BoundaryData, cfg: &SolverConfig, mut on_step: impl FnMut(&NewtonStep)) -> Result<StaticSolution> {
    cfg.validate()?;
    let disc = bd.disc.clone();
    if disc.grid.n_r() != cfg.n_r || disc.grid.lmax() != cfg.lmax {
        return Err(Error::GridMismatch);
    }
    bd.ensure_symmetric()?;
    let system = LinearSystem::new(ModeLayout::symmetric(&disc), LinearOperator::DPhi);
    let layout = &system.layout;
    // The iterate lives in mode space and the state is its synthesis, so
    // the spectra handed back reproduce the state exactly.
    let mut x = vec![0.0; layout.len()];
    let mut state = MetricState::flat(&disc);
    let mut steps: Vec<NewtonStep> = Vec::new();
    loop {
        let res = static_residual(&state, bd)?;
        let slots = residual_norms(&res, cfg.delta);
        let residual = slots.iter().copied().fold(0.0, f64::max);
        let omega = verify::omega_norm(&state, cfg.delta);
        steps.push(NewtonStep {
            residual,
            slots,
            omega,
            gmres_iterations: 0,
            linear_residual: 0.0,
        });
        on_step(steps.last().expect("pushed above"));
        if !residual.is_finite() {
            break;
        }
        if residual <= cfg.newton_tol {
            let spectra = layout.spectra(&x);
            return Ok(finish(state, spectra, bd, cfg, steps, system.kernel_dim()));
        }
        if steps.len() >= cfg.max_iter {
            break;
        }
        let y = layout.project(&res);
        let jac = |x: &[f64]| -> Vec<f64> {
            let dir = layout.unpack(x);
            match static_residual_with_tangent(&state, &dir, bd) {
                Ok((_, t)) => layout.project(&t),
                Err(_) => vec![f64::NAN; x.len()],
            }
        };
        // Forcing term proportional to the residual keeps the outer
        // convergence quadratic without oversolving the early steps.
        let eta = cfg.lin_tol.max(residual.min(1e-4));
        let out = gmres(jac, |v| system.solve_blocks(v), &y, eta, GMRES_MAX_ITER, GMRES_RESTART);
        let last = steps.last_mut().expect("pushed above");
        last.gmres_iterations = out.iterations;
        last.linear_residual = out.relative_residual;
        x.iter_mut().zip(&out.x).for_each(|(a, d)| *a -= cfg.damping * d);
        state = layout.unpack(&x);
        if state.validate().is_err() {
            break;
        }
    }
    let history: Vec<f64> = steps.iter().map(|s| s.residual).collect();
    Err(Error::Diverged {
        iterations: steps.len(),
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

fn finish(state: MetricState, spectra: (ModeSpectrum, ModeSpectrum), bd: &BoundaryData, cfg: &SolverConfig, steps: Vec<NewtonStep>, kernel_dim: usize) -> StaticSolution {
    let n_ang = state.disc().grid.n_ang();
    let sigma_achieved = SurfaceTensor(std::array::from_fn(|k| {
        let round = [1.0, 0.0, 1.0][k];
        state.theta.comps[3 + k][..n_ang].iter().map(|v| round + v).collect()
    }));
    let h_achieved = mean_curvature(&state).expect("converged state is a valid metric");
    let report = verify_static(&state, cfg.delta);
    let mass = adm_mass(&state).ok();
    let gauge_anomaly = report.omega > GAUGE_TOL * (1.0 + state_norm(&state, cfg.delta));
    StaticSolution {
        state,
        theta_modes: spectra.0,
        lapse_modes: spectra.1,
        requested: bd.clone(),
        sigma_achieved,
        h_achieved,
        cfg: *cfg,
        diagnostics: Diagnostics {
            steps,
            kernel_dim,
            report,
            mass,
            gauge_anomaly,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::Parity;

    fn small() -> SolverConfig {
        SolverConfig {
            lmax: 4,
            n_r: 24,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn round_data_is_a_fixed_point() {
        let cfg = small();
        let disc = cfg.discretization().unwrap();
        let sol = newton_solve(&BoundaryData::round(&disc), &cfg).unwrap();
        assert_eq!(sol.diagnostics.steps.len(), 1);
        assert!(sol.diagnostics.steps[0].residual <= 1e-13);
        assert_eq!(sol.state.theta.max_abs(), 0.0);
        assert_eq!(sol.diagnostics.kernel_dim, 0);
    }

    #[test]
    fn schwarzschild_is_recovered_on_a_coarse_grid() {
        let cfg = small();
        let disc = cfg.discretization().unwrap();
        let m = 0.1;
        let bd = schwarzschild_boundary_data(&disc, m).unwrap();
        let sol = newton_solve(&bd, &cfg).unwrap();
        let d = &sol.diagnostics;
        assert!(d.steps.len() <= 9, "{:?}", d.residual_history());
        let mass = d.mass.expect("consistent mass");
        assert!((mass.mass - m).abs() < 1e-4, "{mass:?}");
        // The solution is the closed form up to a radial diffeomorphism
        // fixing Σ, so the boundary lapse is gauge independent.
        let f0 = (1.0 - 0.5 * m) / (1.0 + 0.5 * m) - 1.0;
        let n_ang = disc.grid.n_ang();
        let dev = sol.state.lapse_pert.values[..n_ang].iter().map(|v| (v - f0).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-6, "{dev}");
        assert!(sol.boundary_mismatch() < 1e-10);
        assert!(!d.gauge_anomaly);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = small();
        let disc = cfg.discretization().unwrap();
        let bd = BoundaryData::from_modes(&disc, &[(1, 2, Parity::Even, 0.0, 1e-3)], &[]).unwrap();
        assert!(matches!(newton_solve(&bd, &cfg), Err(Error::NotSymmetric { .. })));
        let other = standard(16, 4).unwrap();
        assert!(matches!(newton_solve(&BoundaryData::round(&other), &cfg), Err(Error::GridMismatch)));
        let bad = SolverConfig { damping: 0.0, ..cfg };
        assert!(matches!(newton_solve(&BoundaryData::round(&disc), &bad), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn iteration_cap_reports_history() {
        let cfg = SolverConfig { max_iter: 2, ..small() };
        let disc = cfg.discretization().unwrap();
        let bd = schwarzschild_boundary_data(&disc, 0.1).unwrap();
        match newton_solve(&bd, &cfg) {
            Err(Error::Diverged { iterations, history, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(history.len(), 2);
                assert!(history[1] < history[0]);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
