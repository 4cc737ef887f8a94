//! Central finite-difference oracle for tape gradients.

use super::{DiffError, Tape, Tensor, Var};
use crate::scalar::Scalar;

/// `|a - b| / max(1, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamCheck {
    /// Position of the tensor in the `params` slice.
    pub index: usize,
    pub max_rel_error: f64,
    /// Flat element index where `max_rel_error` occurred.
    pub worst_element: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_error)
            .fold(0.0, f64::max)
    }
}

fn evaluate<S, F>(f: &F, params: &[Tensor<S>]) -> Result<f64, DiffError>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, &[Var]) -> Result<Var, DiffError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let root = f(&mut tape, &vars)?;
    Ok(tape.value(root).data()[0].as_f64())
}

/// Compares reverse-mode gradients of the scalar built by `f` against
/// central differences with step `h`, element by element.
pub fn check_gradients<S, F>(
    f: F,
    params: &[Tensor<S>],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport, DiffError>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, &[Var]) -> Result<Var, DiffError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let root = f(&mut tape, &vars)?;
    tape.backward(root)?;
    let analytic: Vec<Vec<f64>> = vars.iter().map(|&v| tape.grad_or_zeros(v).to_f64()).collect();

    let mut perturbed = params.to_vec();
    let mut checks = Vec::with_capacity(params.len());
    for (index, grads) in analytic.iter().enumerate() {
        let mut worst = ParamCheck {
            index,
            max_rel_error: 0.0,
            worst_element: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for (e, &g_ad) in grads.iter().enumerate() {
            let original = params[index].data()[e];
            perturbed[index].data_mut()[e] = S::of(original.as_f64() + h);
            let up = evaluate(&f, &perturbed)?;
            perturbed[index].data_mut()[e] = S::of(original.as_f64() - h);
            let down = evaluate(&f, &perturbed)?;
            perturbed[index].data_mut()[e] = original;
            let g_fd = (up - down) / (2.0 * h);
            let err = relative_error(g_ad, g_fd);
            if err > worst.max_rel_error || e == 0 {
                worst = ParamCheck {
                    index,
                    max_rel_error: err,
                    worst_element: e,
                    analytic: g_ad,
                    numeric: g_fd,
                };
            }
        }
        checks.push(worst);
    }
    let passed = checks.iter().all(|c| c.max_rel_error <= tol);
    Ok(GradCheckReport {
        params: checks,
        tolerance: tol,
        passed,
    })
}
