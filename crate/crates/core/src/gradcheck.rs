//! Central finite-difference gradient verification.
//!
//! The checker never touches the reverse-mode machinery except to read the
//! analytic gradients under test: expected values come from re-evaluating the
//! forward closure at perturbed inputs.

use crate::autodiff::{Tape, Var};
use crate::tensor::Tensor;

/// Settings for a finite-difference comparison.
pub struct GradCheck {
    /// Central-difference step.
    pub step: f64,
    /// Maximum allowed relative error.
    pub tol: f64,
    /// Magnitude floor for the relative-error denominator. Below this both
    /// values are within finite-difference noise of zero and agreement is
    /// judged absolutely.
    pub floor: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: 1e-5,
            tol: 1e-4,
            floor: 1e-3,
        }
    }
}

/// Relative error with a magnitude floor.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Central finite-difference gradient of `f` with respect to every entry of
/// every input tensor.
pub fn finite_diff(
    inputs: &[Tensor],
    mut f: impl FnMut(&[Tensor]) -> f64,
    step: f64,
) -> Vec<Tensor> {
    let mut grads = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let (rows, cols) = inputs[i].shape();
        let mut g = Tensor::zeros(rows, cols);
        for e in 0..rows * cols {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[e] += step;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[e] -= step;
            g.data_mut()[e] = (f(&plus) - f(&minus)) / (2.0 * step);
        }
        grads.push(g);
    }
    grads
}

/// Build the forward pass with `build`, differentiate its scalar output, and
/// compare the analytic gradient of every input leaf against central finite
/// differences. Panics with a located message on disagreement.
pub fn check_scalar_fn<F>(inputs: &[Tensor], build: F, settings: &GradCheck)
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let eval = |xs: &[Tensor]| -> f64 {
        let tape = Tape::new();
        let leaves: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        build(&tape, &leaves).scalar()
    };

    let tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let root = build(&tape, &leaves);
    let grads = tape.backward(root);

    let numeric = finite_diff(inputs, eval, settings.step);
    for (i, leaf) in leaves.iter().enumerate() {
        let analytic = grads.get_or_zeros(*leaf);
        compare(&analytic, &numeric[i], settings, &format!("input {i}"));
    }
}

/// Compare one analytic gradient tensor against its finite-difference
/// counterpart.
pub fn compare(analytic: &Tensor, numeric: &Tensor, settings: &GradCheck, what: &str) {
    assert_eq!(analytic.shape(), numeric.shape(), "gradcheck shape: {what}");
    for e in 0..analytic.len() {
        let a = analytic.data()[e];
        let n = numeric.data()[e];
        let err = rel_err(a, n, settings.floor);
        assert!(
            err <= settings.tol,
            "gradient mismatch at {what}[{e}]: analytic {a:.10e}, numeric {n:.10e}, rel {err:.3e}"
        );
    }
}
