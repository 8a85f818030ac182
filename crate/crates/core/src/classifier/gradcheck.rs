use super::mlp::MlpModel;
use crate::Result;

/// Worst agreement between backpropagated and central-difference
/// gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

/// Compare every parameter's analytic gradient with
/// `(L(p + h) - L(p - h)) / 2h`. Relative error is
/// `|a - n| / max(|a|, |n|)`, or the absolute error when both are below
/// `1e-8`.
pub fn gradient_check(model: &MlpModel<f64>, x: &[f64], targets: &[f64], n: usize, h: f64) -> Result<GradCheck> {
    let analytic = model.loss_and_grad(x, targets, n)?.1.flatten();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *probe.params_mut().nth(i).expect("index in range");
        *probe.params_mut().nth(i).expect("index in range") = orig + h;
        let up = probe.loss_and_grad(x, targets, n)?.0;
        *probe.params_mut().nth(i).expect("index in range") = orig - h;
        let down = probe.loss_and_grad(x, targets, n)?.0;
        *probe.params_mut().nth(i).expect("index in range") = orig;
        let numeric = (up - down) / (2.0 * h);
        let scale = a.abs().max(numeric.abs());
        let err = if scale < 1e-8 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
        worst = worst.max(err);
    }
    Ok(GradCheck { max_rel_error: worst, checked: analytic.len() })
}
