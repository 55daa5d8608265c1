//! Central finite-difference gradient checking.

use super::{Tape, Tensor, Var};
use crate::error::Result;

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Outcome of comparing analytic and numeric gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Entries smaller than this fraction of the largest gradient entry are
/// compared against the floor instead of their own magnitude, since central
/// differences carry absolute noise around `1e-11`.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares gradients of `f` at `inputs` against central differences.
///
/// `f` must build a scalar loss from fresh leaves of the given tensors; it is
/// re-run for every perturbed coordinate.
pub fn check<F>(inputs: &[Tensor], f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |ts: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ts.iter().map(|t| tape.leaf(t)).collect();
        let loss = f(&mut tape, &vars)?;
        Ok(tape.scalar(loss))
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t)).collect();
    let loss = f(&mut tape, &vars)?;
    tape.backward(loss)?;

    let mut analytic_all = Vec::new();
    let mut numeric_all = Vec::new();
    let mut work = inputs.to_vec();
    for (i, t) in inputs.iter().enumerate() {
        if !t.requires_grad {
            continue;
        }
        let zeros = vec![0.0; t.numel()];
        let analytic = tape.grad(vars[i]).unwrap_or(&zeros).to_vec();
        for j in 0..t.numel() {
            let orig = t.data()[j];
            work[i].data_mut()[j] = orig + FD_STEP;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - FD_STEP;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            numeric_all.push(numeric);
            analytic_all.push(analytic[j]);
        }
    }
    let scale = analytic_all.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (RELATIVE_FLOOR * scale).max(1e-8);
    let max_rel_error = analytic_all
        .iter()
        .zip(&numeric_all)
        .map(|(&a, &n)| relative_error(a, n, floor))
        .fold(0.0, f64::max);
    Ok(GradCheck {
        max_rel_error,
        checked: analytic_all.len(),
    })
}
