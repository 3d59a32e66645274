//! Central finite differences of the residual map at the flat state against
//! the linearized operator.

use crate::error::Result;
use crate::geometry::{static_residual, BoundaryData, MetricState};

use super::ops::apply_dphi;

/// Slot errors below `FD_EXACT_FLOOR · (1 + |D′Φ slot|)` at every step are
/// roundoff: the slot is linear along the direction and has no truncation
/// error to fit.
pub const FD_EXACT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct FdReport {
    pub steps: Vec<f64>,
    /// `errors[k][slot]`: max-norm of `(Φ(+h) − Φ(−h))/2h − D′Φ` at `steps[k]`.
    pub errors: Vec<[f64; 5]>,
    /// Max-norm of each slot of `D′Φ` along the direction.
    pub scale: [f64; 5],
}

impl FdReport {
    /// Fitted order per slot, or `None` for a slot at roundoff throughout.
    /// Needs at least two steps.
    pub fn orders(&self) -> [Option<f64>; 5] {
        std::array::from_fn(|slot| {
            let es: Vec<f64> = self.errors.iter().map(|e| e[slot]).collect();
            if es.iter().all(|e| *e <= FD_EXACT_FLOOR * (1.0 + self.scale[slot])) {
                None
            } else {
                Some(fitted_order(&self.steps, &es))
            }
        })
    }

    pub fn passes(&self, min_order: f64) -> bool {
        self.orders().iter().all(|o| o.is_none_or(|o| o >= min_order))
    }
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_order(hs: &[f64], es: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Compare central differences of `Φ(·, round data)` about the flat state
/// along `dir` with `D′Φ_o(dir)`.
pub fn finite_difference_check(dir: &MetricState, steps: &[f64]) -> Result<FdReport> {
    let disc = dir.disc();
    let round = BoundaryData::round(disc);
    let flat = MetricState::flat(disc);
    let lin = apply_dphi(&dir.theta, &dir.lapse_pert);
    let mut errors = Vec::with_capacity(steps.len());
    for &h in steps {
        let mut plus = flat.clone();
        plus.axpy(h, dir);
        let mut minus = flat.clone();
        minus.axpy(-h, dir);
        let mut fd = static_residual(&plus, &round)?;
        fd.axpy(-1.0, &static_residual(&minus, &round)?);
        fd.axpy(-2.0 * h, &lin);
        errors.push(fd.slot_max().map(|e| e / (2.0 * h)));
    }
    Ok(FdReport {
        steps: steps.to_vec(),
        errors,
        scale: lin.slot_max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{standard, ScalarField, SymTensorField};
    use crate::random::random_state;

    #[test]
    fn second_order_on_random_directions() {
        let disc = standard(16, 4).unwrap();
        let rep = finite_difference_check(&random_state(&disc, 4, 1.0, 3), &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(rep.passes(1.8), "{:?}", rep.orders());
        // The metric slot is affine in the state.
        assert!(rep.orders()[3].is_none());
    }

    #[test]
    fn scalar_slot_is_exact_for_pure_lapse_directions() {
        let disc = standard(16, 4).unwrap();
        let dir = MetricState::new(SymTensorField::zeros(&disc), ScalarField::from_fn(&disc, |s, x| s * s * x[2] * x[2])).unwrap();
        let rep = finite_difference_check(&dir, &[1e-2, 1e-3]).unwrap();
        // Δ_o(1 + hφ) = hΔφ: only roundoff remains at every step.
        assert!(rep.orders()[1].is_none(), "{:?}", rep.errors);
        assert!(rep.errors.iter().all(|e| e[1] < 1e-10 * rep.scale[1]), "{:?}", rep.errors);
    }

    #[test]
    fn slope_of_exact_power() {
        let hs = [1e-1, 1e-2, 1e-3];
        let es: Vec<f64> = hs.iter().map(|h| 3.0 * h * h).collect();
        assert!((fitted_order(&hs, &es) - 2.0).abs() < 1e-12);
    }
}
