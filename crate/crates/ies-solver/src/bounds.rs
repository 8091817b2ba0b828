//! Interval bound propagation through feedforward networks: sound
//! per-neuron pre-activation bounds from an input box.

use ies_core::mlp::{Activation, MlpSpec, MlpWeights};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("input box must be finite (component {0})")]
    UnboundedInput(usize),
    #[error("input box has lower > upper at component {0}")]
    EmptyBox(usize),
    #[error("box width {got} does not match network input width {want}")]
    WidthMismatch { got: usize, want: usize },
}

/// Elementwise pre-activation bounds per hidden layer, plus bounds on the
/// network outputs.
#[derive(Debug, Clone)]
pub struct ActivationBounds {
    /// (p_min, p_max) per hidden layer.
    pub pre: Vec<(Vec<f64>, Vec<f64>)>,
    pub out_lo: Vec<f64>,
    pub out_hi: Vec<f64>,
}

impl ActivationBounds {
    pub fn n_unstable(&self) -> usize {
        self.pre
            .iter()
            .flat_map(|(lo, hi)| lo.iter().zip(hi.iter()))
            .filter(|(lo, hi)| **lo < 0.0 && **hi > 0.0)
            .count()
    }
}

fn affine_interval(
    w_row: &[f64],
    b: f64,
    lo: &[f64],
    hi: &[f64],
) -> (f64, f64) {
    let mut p_lo = b;
    let mut p_hi = b;
    for ((w, l), h) in w_row.iter().zip(lo.iter()).zip(hi.iter()) {
        if *w >= 0.0 {
            p_lo += w * l;
            p_hi += w * h;
        } else {
            p_lo += w * h;
            p_hi += w * l;
        }
    }
    (p_lo, p_hi)
}

/// Propagates an input box through every affine layer and ReLU clamp.
/// Sound: any true pre-activation for inputs in the box lies inside the
/// returned intervals.
pub fn propagate_bounds(
    spec: &MlpSpec,
    weights: &MlpWeights,
    input_lo: &[f64],
    input_hi: &[f64],
) -> Result<ActivationBounds, BoundsError> {
    assert_eq!(
        spec.activation,
        Activation::Relu,
        "bound propagation targets ReLU networks"
    );
    if input_lo.len() != spec.n_inputs() {
        return Err(BoundsError::WidthMismatch {
            got: input_lo.len(),
            want: spec.n_inputs(),
        });
    }
    for i in 0..input_lo.len() {
        if !input_lo[i].is_finite() || !input_hi[i].is_finite() {
            return Err(BoundsError::UnboundedInput(i));
        }
        if input_lo[i] > input_hi[i] {
            return Err(BoundsError::EmptyBox(i));
        }
    }
    let mut lo = input_lo.to_vec();
    let mut hi = input_hi.to_vec();
    let mut pre = Vec::with_capacity(weights.hidden.len());
    for layer in &weights.hidden {
        let mut p_lo = Vec::with_capacity(layer.w.rows);
        let mut p_hi = Vec::with_capacity(layer.w.rows);
        for r in 0..layer.w.rows {
            let (a, b) = affine_interval(layer.w.row(r), layer.b[r], &lo, &hi);
            p_lo.push(a);
            p_hi.push(b);
        }
        lo = p_lo.iter().map(|v| v.max(0.0)).collect();
        hi = p_hi.iter().map(|v| v.max(0.0)).collect();
        pre.push((p_lo, p_hi));
    }
    let mut out_lo = Vec::with_capacity(weights.output.w.rows);
    let mut out_hi = Vec::with_capacity(weights.output.w.rows);
    for r in 0..weights.output.w.rows {
        let (a, b) = affine_interval(weights.output.w.row(r), weights.output.b[r], &lo, &hi);
        out_lo.push(a);
        out_hi.push(b);
    }
    Ok(ActivationBounds { pre, out_lo, out_hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ies_core::linalg::Mat;
    use ies_core::mlp::{forward_raw, ForwardTrace, Layer, MlpSpec, MlpWeights};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Spec whose flattened input layer has exactly `n_in >= 2` entries:
    /// one output-feedback slot plus `n_in - 1` input lags.
    fn spec(n_in: usize, neurons: Vec<usize>, n_out: usize) -> MlpSpec {
        assert!(n_in >= 2);
        MlpSpec {
            neurons,
            activation: Activation::Relu,
            d_o: 0,
            d_u: n_in - 2,
            d_z: 0,
            outputs: (0..n_out).map(|i| format!("o{i}")).collect(),
            inputs_cont: vec!["u".into()],
            disturbances: vec![],
            inputs_bin: vec![],
            linked: vec![],
        }
    }

    #[test]
    fn identity_layer_passes_box_through() {
        let s = spec(2, vec![1], 1);
        let weights = MlpWeights {
            hidden: vec![Layer {
                w: Mat::from_rows(&[vec![0.0, 1.0]]),
                b: vec![0.0],
            }],
            output: Layer {
                w: Mat::from_rows(&[vec![1.0]]),
                b: vec![0.0],
            },
        };
        let b = propagate_bounds(&s, &weights, &[0.0, -1.0], &[0.0, 2.0]).unwrap();
        assert_eq!(b.pre[0].0, vec![-1.0]);
        assert_eq!(b.pre[0].1, vec![2.0]);
    }

    #[test]
    fn hand_interval_arithmetic() {
        // W = [1, -1], b = 0, inputs each in [0, 1] -> P in [-1, 1].
        let s = spec(2, vec![1], 1);
        let weights = MlpWeights {
            hidden: vec![Layer {
                w: Mat::from_rows(&[vec![1.0, -1.0]]),
                b: vec![0.0],
            }],
            output: Layer {
                w: Mat::from_rows(&[vec![1.0]]),
                b: vec![0.0],
            },
        };
        let b = propagate_bounds(&s, &weights, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(b.pre[0].0, vec![-1.0]);
        assert_eq!(b.pre[0].1, vec![1.0]);
    }

    #[test]
    fn unbounded_box_rejected() {
        let s = spec(2, vec![1], 1);
        let weights = MlpWeights::zeros(&s);
        assert!(
            propagate_bounds(&s, &weights, &[f64::NEG_INFINITY, 0.0], &[1.0, 1.0]).is_err()
        );
    }

    /// Monte Carlo soundness: sampled pre-activations always inside the
    /// propagated intervals.
    #[test]
    fn sampled_preactivations_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for case in 0..20 {
            let n_in = rng.gen_range(2..6);
            let s = spec(n_in, vec![rng.gen_range(2..7), rng.gen_range(2..5)], 1);
            let weights = ies_core::train::init_weights(&s, case);
            let lo: Vec<f64> = (0..s.n_inputs()).map(|_| rng.gen_range(-1.0..0.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.1..2.0)).collect();
            let bounds = propagate_bounds(&s, &weights, &lo, &hi).unwrap();
            let mut trace = ForwardTrace::default();
            for _ in 0..500 {
                let x: Vec<f64> = lo
                    .iter()
                    .zip(hi.iter())
                    .map(|(l, h)| rng.gen_range(*l..=*h))
                    .collect();
                forward_raw(&s, &weights, &x, Some(&mut trace)).unwrap();
                for (li, (p_lo, p_hi)) in bounds.pre.iter().enumerate() {
                    for (j, p) in trace.pre[li].iter().enumerate() {
                        assert!(
                            *p >= p_lo[j] - 1e-9 && *p <= p_hi[j] + 1e-9,
                            "case {case}: layer {li} neuron {j}: {p} outside [{}, {}]",
                            p_lo[j],
                            p_hi[j]
                        );
                    }
                }
            }
        }
    }
}
