use crate::geometry::{gauge_one_form, reduction_residual, static_defect, MetricState};
use crate::norms::rescaled_norm;

use super::TENSOR_WEIGHTS;

/// Weighted norms of the unmodified static equations and of the gauge
/// quantities, over the whole exterior grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticReport {
    /// `‖f Ric − Hess f‖_{0,δ−2}`.
    pub static_defect: f64,
    /// `‖Δ f‖_{0,δ−2}`.
    pub laplace_f: f64,
    /// `‖R(g̃)‖_{0,δ−2}`.
    pub scalar_curvature: f64,
    /// `‖ω‖_{0,δ−1}`.
    pub omega: f64,
    /// `‖Δω + 2S(∇ω)(∇f/f, ·) + Ric(ω, ·)‖_{0,δ−3}`.
    pub omega_equation: f64,
    /// `‖R − g̃^{jk} ω_{j;k}‖_{0,δ−2}`.
    pub trace_identity: f64,
}

impl StaticReport {
    pub fn max(&self) -> f64 {
        [
            self.static_defect,
            self.laplace_f,
            self.scalar_curvature,
            self.omega,
            self.omega_equation,
            self.trace_identity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// The static-metric checks: defect, harmonic lapse, scalar flatness and
    /// vanishing gauge.
    pub fn is_static(&self, tol: f64) -> bool {
        self.static_defect <= tol && self.laplace_f <= tol && self.scalar_curvature <= tol && self.omega <= tol
    }
}

pub(crate) fn omega_norm(state: &MetricState, delta: f64) -> f64 {
    let w = gauge_one_form(state);
    let c: Vec<&[f64]> = w.comps.iter().map(|c| c.as_slice()).collect();
    rescaled_norm(state.disc(), &c, &[1.0; 3], 1, delta, false)
}

/// Evaluate the unmodified static equations and the reduction identities on
/// `state`. An invalid metric reports infinite defects.
pub fn verify_static(state: &MetricState, delta: f64) -> StaticReport {
    let disc = state.disc();
    let (Ok((defect, lap)), Ok((r, eq8, trace))) = (static_defect(state), reduction_residual(state)) else {
        return StaticReport {
            static_defect: f64::INFINITY,
            laplace_f: f64::INFINITY,
            scalar_curvature: f64::INFINITY,
            omega: f64::INFINITY,
            omega_equation: f64::INFINITY,
            trace_identity: f64::INFINITY,
        };
    };
    let t: Vec<&[f64]> = defect.comps.iter().map(|c| c.as_slice()).collect();
    let e: Vec<&[f64]> = eq8.comps.iter().map(|c| c.as_slice()).collect();
    StaticReport {
        static_defect: rescaled_norm(disc, &t, &TENSOR_WEIGHTS, 2, delta, false),
        laplace_f: rescaled_norm(disc, &[&lap.values], &[1.0], 2, delta, false),
        scalar_curvature: rescaled_norm(disc, &[&r.values], &[1.0], 2, delta, false),
        omega: omega_norm(state, delta),
        omega_equation: rescaled_norm(disc, &e, &[1.0; 3], 3, delta, false),
        trace_identity: rescaled_norm(disc, &[&trace.values], &[1.0], 2, delta, false),
    }
}
