//! Central finite-difference gradient checking.
//!
//! Only forward evaluations of the loss are used, so the check is independent
//! of [`Encoder::backward`].

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{gradient, Encoder, EncoderParams, LossValue, Trace};
use crate::error::Result;

/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamCoord {
    Embedding { token: u32, dim: usize },
    Projection(usize),
    Bias(usize),
}

impl ParamCoord {
    pub fn all(p: &EncoderParams) -> Vec<ParamCoord> {
        let mut v: Vec<ParamCoord> = (0..p.vocab_size() as u32)
            .flat_map(|token| (0..p.d_e).map(move |dim| ParamCoord::Embedding { token, dim }))
            .collect();
        v.extend((0..p.projection.len()).map(ParamCoord::Projection));
        v.extend((0..p.bias.len()).map(ParamCoord::Bias));
        v
    }

    /// `n` random coordinates per tensor; embedding probes are restricted to
    /// `tokens` (rows the loss actually touches).
    pub fn sample<R: Rng + ?Sized>(
        p: &EncoderParams,
        tokens: &[u32],
        n: usize,
        rng: &mut R,
    ) -> Vec<ParamCoord> {
        let mut v = Vec::with_capacity(3 * n);
        for _ in 0..n {
            if let Some(&token) = tokens.choose(rng) {
                v.push(ParamCoord::Embedding {
                    token,
                    dim: rng.random_range(0..p.d_e),
                });
            }
            v.push(ParamCoord::Projection(
                rng.random_range(0..p.projection.len()),
            ));
            v.push(ParamCoord::Bias(rng.random_range(0..p.bias.len())));
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub coord: ParamCoord,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub loss: f64,
    pub probes: Vec<ProbeResult>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

fn loss_at<F>(encoder: &Encoder, loss: &F) -> Result<f64>
where
    F: Fn(&mut Trace<'_>) -> Result<LossValue>,
{
    let mut t = Trace::new(encoder);
    Ok(loss(&mut t)?.value)
}

/// Compares the analytic gradient of `loss` with `(f(p+h) − f(p−h)) / 2h` at
/// each coordinate in `coords`.
pub fn check_gradient<F>(
    encoder: &Encoder,
    loss: &F,
    coords: &[ParamCoord],
    step: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Trace<'_>) -> Result<LossValue>,
{
    let (value, grads) = gradient(encoder, loss)?;
    let mut probe = encoder.clone();
    let mut probes = Vec::with_capacity(coords.len());
    let mut max_rel_error = 0.0f64;
    for &coord in coords {
        let original = *probe.params.param_mut(coord);
        *probe.params.param_mut(coord) = original + step;
        let up = loss_at(&probe, loss)?;
        *probe.params.param_mut(coord) = original - step;
        let down = loss_at(&probe, loss)?;
        *probe.params.param_mut(coord) = original;

        let numeric = (up - down) / (2.0 * step);
        let analytic = grads.get(coord);
        let rel_error = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR);
        max_rel_error = max_rel_error.max(rel_error);
        probes.push(ProbeResult {
            coord,
            analytic,
            numeric,
            rel_error,
        });
    }
    Ok(GradCheckReport {
        loss: value,
        probes,
        max_rel_error,
    })
}
