//! Finite-difference verification of the analytic gradients.

use serde::Serialize;

use crate::model::{GradOptions, Model, ModelError, ModelParams};
use crate::par::Execution;
use crate::representation::ProgramTensor;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Largest relative error per parameter tensor.
    pub per_tensor: Vec<(String, f64)>,
    pub coordinates: usize,
    /// Coordinates whose central stencil straddled a kink (ReLU boundary,
    /// top-K or max-pool switch) and that agreed one-sidedly.
    pub refined: usize,
}

/// Coordinates whose central-difference error exceeds this are re-measured
/// with one-sided stencils.
const REFINE_ABOVE: f64 = 5e-5;

/// `|a - n| / max(|a| + |n|, floor)`; the floor keeps coordinates whose true
/// gradient is zero from dominating through rounding noise.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-7)
}

/// Compares `analytic` against central differences of the batch loss for
/// every coordinate of every parameter tensor. A coordinate that sits within
/// `2 * step` of a kink is also compared against one-sided differences.
pub fn compare_gradients(
    model: &Model,
    batch: &[&ProgramTensor],
    labels: &[f64],
    opts: &GradOptions,
    analytic: &ModelParams,
    step: f64,
) -> Result<GradCheckReport, ModelError> {
    let mut probe = model.clone();
    let expected: Vec<(String, Vec<f64>)> = analytic
        .named()
        .into_iter()
        .map(|(n, t)| (n, t.iter().copied().collect()))
        .collect();
    let mut per_tensor = Vec::with_capacity(expected.len());
    let mut coordinates = 0;
    let mut refined = 0;
    for (ti, (name, grads)) in expected.iter().enumerate() {
        let mut worst = 0.0f64;
        for (k, &a) in grads.iter().enumerate() {
            let original = nudge(&mut probe.params, ti, k, None);
            let mut at = |offset: f64| -> Result<f64, ModelError> {
                nudge(&mut probe.params, ti, k, Some(original + offset));
                probe.batch_loss(batch, labels, opts)
            };
            // five-point central stencil: O(h^4) truncation error
            let mut err = relative_error(
                a,
                (8.0 * (at(step)? - at(-step)?) - (at(2.0 * step)? - at(-2.0 * step)?)) / (12.0 * step),
            );
            if err > REFINE_ABOVE {
                // one-sided second-order stencils stay valid when the kink
                // lies on the other side
                let f0 = at(0.0)?;
                for h in [step, -step] {
                    let one_sided = (-3.0 * f0 + 4.0 * at(h)? - at(2.0 * h)?) / (2.0 * h);
                    err = err.min(relative_error(a, one_sided));
                }
                // kinks on both sides: shrink the stencil
                let h = step / 10.0;
                let central = (8.0 * (at(h)? - at(-h)?) - (at(2.0 * h)? - at(-2.0 * h)?)) / (12.0 * h);
                err = err.min(relative_error(a, central));
                if err <= REFINE_ABOVE {
                    refined += 1;
                }
            }
            nudge(&mut probe.params, ti, k, Some(original));
            worst = worst.max(err);
            coordinates += 1;
        }
        per_tensor.push((name.clone(), worst));
    }
    Ok(GradCheckReport {
        max_relative_error: per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max),
        per_tensor,
        coordinates,
        refined,
    })
}

/// Reads coordinate `k` of tensor `ti`, optionally overwriting it.
fn nudge(params: &mut ModelParams, ti: usize, k: usize, value: Option<f64>) -> f64 {
    let mut named = params.named_mut();
    let slot = named[ti].1.iter_mut().nth(k).expect("coordinate in range");
    let old = *slot;
    if let Some(v) = value {
        *slot = v;
    }
    old
}

/// Analytic gradient of the batch loss checked against central differences.
pub fn grad_check(
    model: &Model,
    batch: &[&ProgramTensor],
    labels: &[f64],
    opts: &GradOptions,
) -> Result<GradCheckReport, ModelError> {
    let g = model.batch_gradient(batch, labels, opts, Execution::Sequential)?;
    compare_gradients(model, batch, labels, opts, &g.grads, 1e-4)
}
