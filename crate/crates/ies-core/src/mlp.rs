//! Time-series multi-layer perceptrons.
//!
//! A network predicts a unit's outputs one step ahead from lagged outputs,
//! manipulated inputs, binary inputs, disturbances and linked inputs. The
//! input layer is the flattened lag window; hidden layers apply an affine
//! map followed by ReLU or Sigmoid; the output layer is affine.

use crate::linalg::Mat;
use crate::names::{TimeScale, UnitId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sigmoid inputs are clamped to this magnitude to avoid overflow.
pub const SIGMOID_CLAMP: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => {
                let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
                1.0 / (1.0 + (-x).exp())
            }
        }
    }

    /// Derivative expressed through the activation value `h = apply(x)`.
    #[inline]
    pub fn deriv_from_value(&self, x: f64, h: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => h * (1.0 - h),
        }
    }
}

/// Architecture and channel lists of one unit's time-series network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Hidden layer widths, input to output order.
    pub neurons: Vec<usize>,
    pub activation: Activation,
    /// Number of past output steps fed back (window length `d_o + 1`).
    pub d_o: usize,
    /// Number of past input/disturbance/linked steps (window length `d_u + 1`).
    pub d_u: usize,
    /// Number of past binary-input steps (window length `d_z + 1`).
    pub d_z: usize,
    pub outputs: Vec<String>,
    pub inputs_cont: Vec<String>,
    pub inputs_bin: Vec<String>,
    pub disturbances: Vec<String>,
    pub linked: Vec<String>,
}

impl MlpSpec {
    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Width of the flattened input layer.
    pub fn n_inputs(&self) -> usize {
        self.outputs.len() * (self.d_o + 1)
            + self.inputs_cont.len() * (self.d_u + 1)
            + self.inputs_bin.len() * (self.d_z + 1)
            + self.disturbances.len() * (self.d_u + 1)
            + self.linked.len() * (self.d_u + 1)
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.neurons.len()
    }

    /// Longest lag window over all channel groups.
    pub fn max_delay(&self) -> usize {
        self.d_o.max(self.d_u).max(self.d_z)
    }

    /// Offset of output channel `chan` at `lag` in the flattened input layer.
    pub fn out_index(&self, chan: usize, lag: usize) -> usize {
        debug_assert!(chan < self.outputs.len() && lag <= self.d_o);
        chan * (self.d_o + 1) + lag
    }

    /// Offset of continuous input channel `chan` at `lag`.
    pub fn cont_index(&self, chan: usize, lag: usize) -> usize {
        debug_assert!(chan < self.inputs_cont.len() && lag <= self.d_u);
        self.outputs.len() * (self.d_o + 1) + chan * (self.d_u + 1) + lag
    }

    pub fn bin_index(&self, chan: usize, lag: usize) -> usize {
        debug_assert!(chan < self.inputs_bin.len() && lag <= self.d_z);
        self.outputs.len() * (self.d_o + 1)
            + self.inputs_cont.len() * (self.d_u + 1)
            + chan * (self.d_z + 1)
            + lag
    }

    pub fn dist_index(&self, chan: usize, lag: usize) -> usize {
        debug_assert!(chan < self.disturbances.len() && lag <= self.d_u);
        self.outputs.len() * (self.d_o + 1)
            + self.inputs_cont.len() * (self.d_u + 1)
            + self.inputs_bin.len() * (self.d_z + 1)
            + chan * (self.d_u + 1)
            + lag
    }

    pub fn linked_index(&self, chan: usize, lag: usize) -> usize {
        debug_assert!(chan < self.linked.len() && lag <= self.d_u);
        self.outputs.len() * (self.d_o + 1)
            + self.inputs_cont.len() * (self.d_u + 1)
            + self.inputs_bin.len() * (self.d_z + 1)
            + self.disturbances.len() * (self.d_u + 1)
            + chan * (self.d_u + 1)
            + lag
    }
}

/// Structural parameters of the published presets for a unit at a scale.
///
/// Returns `None` for combinations that are computed from closed-form
/// physics instead of a trained network (cold storage at the slow and
/// fast scales).
pub fn table_preset(scale: TimeScale, unit: UnitId) -> Option<MlpSpec> {
    use crate::names::*;
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();

    // (neurons, d_o, d_u)
    let (neurons, d_o, d_u): (Vec<usize>, usize, usize) = match (scale, unit) {
        (TimeScale::Fast, UnitId::Pv) => (vec![15, 8], 0, 1),
        (TimeScale::Fast, UnitId::Fc) => (vec![23, 12], 3, 2),
        (TimeScale::Fast, UnitId::Ba) => (vec![20, 10], 1, 1),
        (TimeScale::Fast, UnitId::Ma) => (vec![32, 18], 3, 3),
        (TimeScale::Fast, UnitId::Ec) => (vec![25, 12], 3, 3),
        (TimeScale::Fast, UnitId::Pmp) => (vec![12, 8], 0, 1),
        (TimeScale::Fast, UnitId::Bd) => (vec![70, 40], 15, 15),
        (TimeScale::Fast, UnitId::Cs) => return None,
        (TimeScale::Slow, UnitId::Pv) => (vec![15, 8], 0, 1),
        (TimeScale::Slow, UnitId::Fc) => (vec![18, 10], 1, 2),
        (TimeScale::Slow, UnitId::Ba) => (vec![16, 8], 1, 1),
        (TimeScale::Slow, UnitId::Ma) => (vec![28, 14], 3, 3),
        (TimeScale::Slow, UnitId::Ec) => (vec![20, 10], 1, 2),
        (TimeScale::Slow, UnitId::Pmp) => (vec![12, 8], 0, 1),
        (TimeScale::Slow, UnitId::Bd) => (vec![60, 30], 9, 9),
        (TimeScale::Slow, UnitId::Cs) => return None,
        (TimeScale::LongTerm, UnitId::Pv) => (vec![4], 0, 1),
        (TimeScale::LongTerm, UnitId::Fc) => (vec![3], 0, 1),
        (TimeScale::LongTerm, UnitId::Ba) => (vec![4], 0, 1),
        (TimeScale::LongTerm, UnitId::Ma) => (vec![4], 0, 1),
        (TimeScale::LongTerm, UnitId::Ec) => (vec![5], 0, 1),
        (TimeScale::LongTerm, UnitId::Pmp) => (vec![5], 0, 1),
        (TimeScale::LongTerm, UnitId::Bd) => (vec![6], 1, 1),
        (TimeScale::LongTerm, UnitId::Cs) => (vec![3], 0, 1),
    };

    let activation = match scale {
        TimeScale::LongTerm => Activation::Relu,
        _ => Activation::Sigmoid,
    };

    // Channel lists follow the unit input-output tables: the full structure
    // at the slow/fast scales and the streamlined structure at 1 hour.
    let long = scale == TimeScale::LongTerm;
    let (outputs, cont, bin, dist, linked) = match unit {
        UnitId::Pv => (s(&[P_PV]), s(&[]), s(&[]), s(&[T_A, S_RA]), s(&[])),
        UnitId::Fc => (s(&[P_FC]), s(&[G_FF]), s(&[Z_FC]), s(&[]), s(&[])),
        UnitId::Ba => (s(&[P_BA, I_BA]), s(&[P_BAR]), s(&[]), s(&[]), s(&[])),
        UnitId::Ma => {
            if long {
                (s(&[P_MT, Q_AB]), s(&[G_FM]), s(&[Z_MA]), s(&[]), s(&[]))
            } else {
                (s(&[P_MT, T_AB]), s(&[G_FM, G_AB]), s(&[Z_MA]), s(&[]), s(&[T_REC]))
            }
        }
        UnitId::Ec => {
            if long {
                (s(&[P_CP, Q_EC]), s(&[N_EC]), s(&[Z_EC]), s(&[]), s(&[]))
            } else {
                (s(&[P_CP, T_EC]), s(&[N_EC, G_EC]), s(&[Z_EC]), s(&[]), s(&[T_REC]))
            }
        }
        UnitId::Pmp => (s(&[P_PMP]), s(&[]), s(&[]), s(&[]), s(&[G_ALL])),
        UnitId::Bd => {
            if long {
                (s(&[T_BR]), s(&[]), s(&[]), s(&[T_A, Q_O]), s(&[Q_SL]))
            } else {
                (s(&[T_RE, T_BR]), s(&[]), s(&[]), s(&[T_A, Q_O]), s(&[T_SL, G_SL]))
            }
        }
        UnitId::Cs => (s(&[Q_ST, G_ST]), s(&[G_STU]), s(&[Z_ST]), s(&[]), s(&[])),
    };

    Some(MlpSpec {
        neurons,
        activation,
        d_o,
        d_u,
        d_z: d_u,
        outputs,
        inputs_cont: cont,
        inputs_bin: bin,
        disturbances: dist,
        linked,
    })
}

/// One affine layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `rows = layer width`, `cols = previous width`.
    pub w: Mat,
    pub b: Vec<f64>,
}

/// Trained parameters: hidden layers followed by the affine output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub hidden: Vec<Layer>,
    pub output: Layer,
}

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("layer {layer}: expected {expected} inputs, got {got}")]
    ShapeMismatch {
        layer: usize,
        expected: usize,
        got: usize,
    },
    #[error("history buffers not full: {0} more steps required")]
    HistoryNotFull(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("nrmse undefined: actual series is constant")]
    ConstantActual,
    #[error("nrmse needs at least 2 points with equal lengths")]
    BadSeries,
}

impl MlpWeights {
    /// Validates layer shapes against `spec`.
    pub fn check_shapes(&self, spec: &MlpSpec) -> Result<(), MlpError> {
        let mut width = spec.n_inputs();
        for (i, layer) in self.hidden.iter().enumerate() {
            if layer.w.cols != width || layer.w.rows != spec.neurons[i] || layer.b.len() != layer.w.rows {
                return Err(MlpError::ShapeMismatch {
                    layer: i,
                    expected: width,
                    got: layer.w.cols,
                });
            }
            width = layer.w.rows;
        }
        if self.output.w.cols != width
            || self.output.w.rows != spec.n_outputs()
            || self.output.b.len() != spec.n_outputs()
        {
            return Err(MlpError::ShapeMismatch {
                layer: self.hidden.len(),
                expected: width,
                got: self.output.w.cols,
            });
        }
        Ok(())
    }

    pub fn zeros(spec: &MlpSpec) -> MlpWeights {
        let mut hidden = Vec::new();
        let mut width = spec.n_inputs();
        for &n in &spec.neurons {
            hidden.push(Layer {
                w: Mat::zeros(n, width),
                b: vec![0.0; n],
            });
            width = n;
        }
        MlpWeights {
            hidden,
            output: Layer {
                w: Mat::zeros(spec.n_outputs(), width),
                b: vec![0.0; spec.n_outputs()],
            },
        }
    }

    pub fn n_params(&self) -> usize {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.output))
            .map(|l| l.w.data.len() + l.b.len())
            .sum()
    }
}

/// Forward pass on an explicit flattened input vector.
///
/// Returns the network output; `trace`, when provided, receives the
/// pre-activation and activation vectors of every hidden layer (used by
/// backpropagation and Jacobians).
pub fn forward_raw(
    spec: &MlpSpec,
    weights: &MlpWeights,
    x: &[f64],
    mut trace: Option<&mut ForwardTrace>,
) -> Result<Vec<f64>, MlpError> {
    if x.len() != spec.n_inputs() {
        return Err(MlpError::ShapeMismatch {
            layer: 0,
            expected: spec.n_inputs(),
            got: x.len(),
        });
    }
    if let Some(t) = trace.as_deref_mut() {
        t.pre.clear();
        t.act.clear();
        t.input.clear();
        t.input.extend_from_slice(x);
    }
    let mut h: Vec<f64> = x.to_vec();
    for (i, layer) in weights.hidden.iter().enumerate() {
        if layer.w.cols != h.len() {
            return Err(MlpError::ShapeMismatch {
                layer: i,
                expected: layer.w.cols,
                got: h.len(),
            });
        }
        let mut p = layer.b.clone();
        for r in 0..layer.w.rows {
            let row = layer.w.row(r);
            let mut acc = 0.0;
            for (a, s) in row.iter().zip(h.iter()) {
                acc += a * s;
            }
            p[r] += acc;
        }
        let a: Vec<f64> = p.iter().map(|&v| spec.activation.apply(v)).collect();
        if let Some(t) = trace.as_deref_mut() {
            t.pre.push(p.clone());
            t.act.push(a.clone());
        }
        h = a;
    }
    if weights.output.w.cols != h.len() {
        return Err(MlpError::ShapeMismatch {
            layer: weights.hidden.len(),
            expected: weights.output.w.cols,
            got: h.len(),
        });
    }
    let mut o = weights.output.b.clone();
    for r in 0..weights.output.w.rows {
        let row = weights.output.w.row(r);
        let mut acc = 0.0;
        for (a, s) in row.iter().zip(h.iter()) {
            acc += a * s;
        }
        o[r] += acc;
    }
    Ok(o)
}

/// Layer-by-layer record of a forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    pub pre: Vec<Vec<f64>>,
    pub act: Vec<Vec<f64>>,
}

/// Jacobian of the network output with respect to the flattened input,
/// evaluated via one reverse sweep per output row.
pub fn jacobian_raw(spec: &MlpSpec, weights: &MlpWeights, x: &[f64]) -> Result<Mat, MlpError> {
    let mut trace = ForwardTrace::default();
    forward_raw(spec, weights, x, Some(&mut trace))?;
    let n_out = spec.n_outputs();
    let mut jac = Mat::zeros(n_out, x.len());
    for out in 0..n_out {
        // Seed with the output layer row, then walk hidden layers backwards.
        let mut g: Vec<f64> = weights.output.w.row(out).to_vec();
        for (li, layer) in weights.hidden.iter().enumerate().rev() {
            let pre = &trace.pre[li];
            let act = &trace.act[li];
            for (gi, (p, a)) in g.iter_mut().zip(pre.iter().zip(act.iter())) {
                *gi *= spec.activation.deriv_from_value(*p, *a);
            }
            let mut g_prev = vec![0.0; layer.w.cols];
            layer.w.matvec_t(&g, &mut g_prev);
            g = g_prev;
        }
        jac.row_mut(out).copy_from_slice(&g);
    }
    Ok(jac)
}

/// Lag window of one channel group, newest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lags {
    pub chans: usize,
    /// Number of stored time steps.
    pub depth: usize,
    /// `data[chan * depth + lag]`, lag 0 = newest.
    pub data: Vec<f64>,
}

impl Lags {
    pub fn new(chans: usize, depth: usize) -> Self {
        Lags {
            chans,
            depth,
            data: vec![0.0; chans * depth],
        }
    }

    pub fn fill_constant(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.chans);
        for c in 0..self.chans {
            for l in 0..self.depth {
                self.data[c * self.depth + l] = values[c];
            }
        }
    }

    /// Shifts every channel one step and stores `values` at lag 0.
    pub fn push(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.chans);
        if self.depth == 0 {
            return;
        }
        for c in 0..self.chans {
            let base = c * self.depth;
            for l in (1..self.depth).rev() {
                self.data[base + l] = self.data[base + l - 1];
            }
            self.data[base] = values[c];
        }
    }

    #[inline]
    pub fn get(&self, chan: usize, lag: usize) -> f64 {
        self.data[chan * self.depth + lag]
    }
}

/// Rolling state of one unit's network at time `k`.
///
/// Holds the output window `[o(k), …, o(k − d_o)]` and the windows of
/// *previously applied* inputs `[·(k−1), …, ·(k − d)]`; the current-step
/// inputs are passed explicitly to [`forward_step`] so that a controller
/// can evaluate candidate moves without mutating state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub out: Lags,
    pub cont: Lags,
    pub bin: Lags,
    pub dist: Lags,
    pub linked: Lags,
    filled: usize,
}

impl History {
    pub fn new(spec: &MlpSpec) -> Self {
        History {
            out: Lags::new(spec.outputs.len(), spec.d_o + 1),
            cont: Lags::new(spec.inputs_cont.len(), spec.d_u),
            bin: Lags::new(spec.inputs_bin.len(), spec.d_z),
            dist: Lags::new(spec.disturbances.len(), spec.d_u),
            linked: Lags::new(spec.linked.len(), spec.d_u),
            filled: 0,
        }
    }

    /// Fills every window with a constant snapshot, marking the buffer full.
    pub fn bootstrap(&mut self, o: &[f64], u: &[f64], z: &[f64], w: &[f64], v: &[f64]) {
        self.out.fill_constant(o);
        self.cont.fill_constant(u);
        self.bin.fill_constant(z);
        self.dist.fill_constant(w);
        self.linked.fill_constant(v);
        self.filled = usize::MAX;
    }

    pub fn is_full(&self, spec: &MlpSpec) -> bool {
        self.filled >= spec.max_delay() + 1
    }

    /// Records the inputs applied at time `k` and the measured/predicted
    /// output at `k+1`, advancing the buffer to time `k+1`.
    pub fn advance(&mut self, o_next: &[f64], u: &[f64], z: &[f64], w: &[f64], v: &[f64]) {
        self.cont.push(u);
        self.bin.push(z);
        self.dist.push(w);
        self.linked.push(v);
        self.out.push(o_next);
        self.filled = self.filled.saturating_add(1);
    }

    /// Flattened input-layer vector for the step from `k` to `k+1`,
    /// using explicit current-step inputs.
    pub fn input_vector(
        &self,
        spec: &MlpSpec,
        u: &[f64],
        z: &[f64],
        w: &[f64],
        v: &[f64],
    ) -> Vec<f64> {
        let mut x = vec![0.0; spec.n_inputs()];
        for c in 0..spec.outputs.len() {
            for l in 0..=spec.d_o {
                x[spec.out_index(c, l)] = self.out.get(c, l);
            }
        }
        for c in 0..spec.inputs_cont.len() {
            x[spec.cont_index(c, 0)] = u[c];
            for l in 1..=spec.d_u {
                x[spec.cont_index(c, l)] = self.cont.get(c, l - 1);
            }
        }
        for c in 0..spec.inputs_bin.len() {
            x[spec.bin_index(c, 0)] = z[c];
            for l in 1..=spec.d_z {
                x[spec.bin_index(c, l)] = self.bin.get(c, l - 1);
            }
        }
        for c in 0..spec.disturbances.len() {
            x[spec.dist_index(c, 0)] = w[c];
            for l in 1..=spec.d_u {
                x[spec.dist_index(c, l)] = self.dist.get(c, l - 1);
            }
        }
        for c in 0..spec.linked.len() {
            x[spec.linked_index(c, 0)] = v[c];
            for l in 1..=spec.d_u {
                x[spec.linked_index(c, l)] = self.linked.get(c, l - 1);
            }
        }
        x
    }
}

/// One-step prediction `o(k+1)` from the history at `k` and the inputs
/// applied at `k`. Pure: identical arguments give identical results.
pub fn forward_step(
    spec: &MlpSpec,
    weights: &MlpWeights,
    history: &History,
    u: &[f64],
    z: &[f64],
    w: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, MlpError> {
    if !history.is_full(spec) {
        return Err(MlpError::HistoryNotFull(
            (spec.max_delay() + 1).saturating_sub(history.filled),
        ));
    }
    let x = history.input_vector(spec, u, z, w, v);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MlpError::NonFinite("network input"));
    }
    forward_raw(spec, weights, &x, None)
}

/// Per-step exogenous signals for an autoregressive rollout.
#[derive(Debug, Clone, Default)]
pub struct Exogenous {
    pub u: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// Multi-step autoregressive prediction: each predicted output is pushed
/// back into the history, exactly as the scheduler and controllers roll
/// their models forward.
pub fn multistep_predict(
    spec: &MlpSpec,
    weights: &MlpWeights,
    initial: &History,
    exo: &Exogenous,
    n_steps: usize,
) -> Result<Vec<Vec<f64>>, MlpError> {
    assert!(exo.u.len() >= n_steps && exo.z.len() >= n_steps);
    assert!(exo.w.len() >= n_steps && exo.v.len() >= n_steps);
    let mut hist = initial.clone();
    let mut preds = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let o = forward_step(spec, weights, &hist, &exo.u[k], &exo.z[k], &exo.w[k], &exo.v[k])?;
        hist.advance(&o, &exo.u[k], &exo.z[k], &exo.w[k], &exo.v[k]);
        preds.push(o);
    }
    Ok(preds)
}

/// Root mean square error normalized by the range of the actual series.
pub fn nrmse(actual: &[f64], predicted: &[f64]) -> Result<f64, MlpError> {
    if actual.len() != predicted.len() || actual.len() < 2 {
        return Err(MlpError::BadSeries);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sq = 0.0;
    for (a, p) in actual.iter().zip(predicted.iter()) {
        lo = lo.min(*a);
        hi = hi.max(*a);
        let d = a - p;
        sq += d * d;
    }
    if !(hi > lo) {
        return Err(MlpError::ConstantActual);
    }
    Ok((sq / actual.len() as f64).sqrt() / (hi - lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::names::*;

    fn tiny_spec() -> MlpSpec {
        MlpSpec {
            neurons: vec![2],
            activation: Activation::Relu,
            d_o: 0,
            d_u: 0,
            d_z: 0,
            outputs: vec!["y".into()],
            inputs_cont: vec!["u".into()],
            inputs_bin: vec![],
            disturbances: vec![],
            linked: vec![],
        }
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let spec = tiny_spec();
        let weights = MlpWeights::zeros(&spec);
        let mut hist = History::new(&spec);
        hist.bootstrap(&[3.0], &[1.0], &[], &[], &[]);
        let o = forward_step(&spec, &weights, &hist, &[7.0], &[], &[], &[]).unwrap();
        assert_eq!(o, vec![0.0]);
    }

    #[test]
    fn relu_layer_reproduces_affine_map_on_positive_inputs() {
        // One 2x2 hidden layer with positive pre-activations behaves as W·h + b,
        // then an identity-like output layer reads it out.
        let spec = MlpSpec {
            neurons: vec![2],
            activation: Activation::Relu,
            d_o: 0,
            d_u: 0,
            d_z: 0,
            outputs: vec!["y1".into(), "y2".into()],
            inputs_cont: vec![],
            inputs_bin: vec![],
            disturbances: vec![],
            linked: vec![],
        };
        let w = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let weights = MlpWeights {
            hidden: vec![Layer {
                w: w.clone(),
                b: vec![0.5, 0.25],
            }],
            output: Layer {
                w: Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]),
                b: vec![0.0, 0.0],
            },
        };
        // Hand arithmetic: x = [1, 2] -> p = [1+4+0.5, 3+8+0.25] = [5.5, 11.25].
        let o = forward_raw(&spec, &weights, &[1.0, 2.0], None).unwrap();
        assert!((o[0] - 5.5).abs() < 1e-12);
        assert!((o[1] - 11.25).abs() < 1e-12);
    }

    #[test]
    fn forward_step_requires_full_history() {
        let spec = tiny_spec();
        let weights = MlpWeights::zeros(&spec);
        let hist = History::new(&spec);
        assert!(matches!(
            forward_step(&spec, &weights, &hist, &[0.0], &[], &[], &[]),
            Err(MlpError::HistoryNotFull(_))
        ));
    }

    #[test]
    fn shape_mismatch_reports_layer() {
        let spec = tiny_spec();
        let mut weights = MlpWeights::zeros(&spec);
        weights.hidden[0].w = Mat::zeros(2, 5);
        let err = weights.check_shapes(&spec).unwrap_err();
        match err {
            MlpError::ShapeMismatch { layer, .. } => assert_eq!(layer, 0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn single_step_multistep_equals_forward_step() {
        let spec = table_preset(TimeScale::LongTerm, UnitId::Fc).unwrap();
        let mut weights = MlpWeights::zeros(&spec);
        // Non-trivial deterministic weights.
        for (i, v) in weights.hidden[0].w.data.iter_mut().enumerate() {
            *v = ((i as f64) * 0.37).sin() * 0.5;
        }
        for (i, v) in weights.output.w.data.iter_mut().enumerate() {
            *v = 0.3 + i as f64 * 0.1;
        }
        let mut hist = History::new(&spec);
        hist.bootstrap(&[0.4], &[0.5], &[1.0], &[], &[]);
        let exo = Exogenous {
            u: vec![vec![0.6]],
            z: vec![vec![1.0]],
            w: vec![vec![]],
            v: vec![vec![]],
        };
        let direct = forward_step(&spec, &weights, &hist, &[0.6], &[1.0], &[], &[]).unwrap();
        let rolled = multistep_predict(&spec, &weights, &hist, &exo, 1).unwrap();
        assert_eq!(direct, rolled[0]);
    }

    #[test]
    fn nrmse_hand_values() {
        assert_eq!(nrmse(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = nrmse(&[0.0, 1.0], &[0.1, 1.1]).unwrap();
        assert!((v - 0.1).abs() < 1e-12);
        assert!(matches!(
            nrmse(&[1.0, 1.0], &[1.0, 1.0]),
            Err(MlpError::ConstantActual)
        ));
    }

    #[test]
    fn table_presets_match_published_structures() {
        let fc5 = table_preset(TimeScale::Fast, UnitId::Fc).unwrap();
        assert_eq!(fc5.neurons, vec![23, 12]);
        assert_eq!(fc5.d_o, 3);
        assert_eq!(fc5.d_u, 2);
        assert_eq!(fc5.activation, Activation::Sigmoid);

        let bd1h = table_preset(TimeScale::LongTerm, UnitId::Bd).unwrap();
        assert_eq!(bd1h.neurons, vec![6]);
        assert_eq!(bd1h.d_o, 1);
        assert_eq!(bd1h.activation, Activation::Relu);
        assert_eq!(bd1h.linked, vec![Q_SL.to_string()]);

        assert!(table_preset(TimeScale::Fast, UnitId::Cs).is_none());
        assert!(table_preset(TimeScale::Slow, UnitId::Cs).is_none());
        assert!(table_preset(TimeScale::LongTerm, UnitId::Cs).is_some());
    }
}
