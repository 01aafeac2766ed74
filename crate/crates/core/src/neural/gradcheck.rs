use super::params::Params;
use crate::error::{Error, Result};

/// Central-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Name and flat index of the worst parameter.
    pub worst: (String, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

fn relative_error(g: f64, n: f64) -> f64 {
    (g - n).abs() / g.abs().max(n.abs()).max(1e-8)
}

fn perturbed<P: Params>(params: &P, tensor: usize, index: usize, delta: f64) -> P {
    let mut p = params.clone();
    let mut k = 0;
    p.visit_mut(&mut |t| {
        if k == tensor {
            t.values_mut()[index] += delta;
        }
        k += 1;
    });
    p
}

/// Compares the reverse-mode gradient returned by `loss_and_grad` against
/// central differences for every scalar parameter.
pub fn grad_check<P, F>(params: &P, loss_and_grad: F) -> Result<GradCheckReport>
where
    P: Params,
    F: Fn(&P) -> Result<(f64, P)>,
{
    let (loss, analytic) = loss_and_grad(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {}", loss)));
    }
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (String::new(), 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (ti, (name, grad)) in analytic.named_tensors().into_iter().enumerate() {
        for (i, &g) in grad.values().iter().enumerate() {
            let (plus, _) = loss_and_grad(&perturbed(params, ti, i, FD_STEP))?;
            let (minus, _) = loss_and_grad(&perturbed(params, ti, i, -FD_STEP))?;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            if !g.is_finite() || !numeric.is_finite() {
                return Err(Error::NonFinite(format!("gradient of {}[{}]", name, i)));
            }
            let err = relative_error(g, numeric);
            if err > report.max_relative_error || report.checked == 0 {
                report.max_relative_error = err;
                report.worst = (name.clone(), i);
                report.analytic = g;
                report.numeric = numeric;
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
