//! Exact mixed-integer linear encoding of ReLU networks.
//!
//! Every unstable neuron contributes one continuous activation variable,
//! one binary and the four constraint families
//! `H >= P`, `H >= 0`, `H <= P - (1 - g) P_min`, `H <= g P_max`;
//! stably active neurons are substituted as affine expressions and stably
//! inactive ones as zero, so no binaries are emitted for them. Affine
//! layer equalities are folded into the expressions themselves.

use crate::bounds::ActivationBounds;
use crate::linprog::{MilpProblem, Sense};
use ies_core::mlp::{Activation, MlpSpec, MlpWeights};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("bounds cover {got} layers, network has {want}")]
    LayerMismatch { got: usize, want: usize },
    #[error("inconsistent bounds at layer {layer} neuron {neuron}: min {min} > max {max}")]
    BadBounds {
        layer: usize,
        neuron: usize,
        min: f64,
        max: f64,
    },
    #[error("input expressions: got {got}, network expects {want}")]
    InputMismatch { got: usize, want: usize },
    #[error("network activation must be ReLU")]
    NotRelu,
}

/// Sparse affine expression over MILP variables.
#[derive(Debug, Clone, Default)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Affine {
        Affine {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(idx: usize) -> Affine {
        Affine {
            terms: vec![(idx, 1.0)],
            constant: 0.0,
        }
    }

    pub fn scaled_var(idx: usize, s: f64) -> Affine {
        Affine {
            terms: vec![(idx, s)],
            constant: 0.0,
        }
    }

    /// self += s * other
    pub fn add_scaled(&mut self, other: &Affine, s: f64) {
        if s == 0.0 {
            return;
        }
        self.constant += s * other.constant;
        for (idx, c) in &other.terms {
            self.terms.push((*idx, s * c));
        }
    }

    /// Merges duplicate variable terms and drops exact zeros.
    pub fn compress(&mut self) {
        self.terms.sort_unstable_by_key(|(i, _)| *i);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (i, c) in self.terms.drain(..) {
            match out.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|(_, c)| *c != 0.0);
        self.terms = out;
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(i, c)| c * x[*i]).sum::<f64>()
    }
}

/// Result of encoding one network instance.
#[derive(Debug, Clone)]
pub struct ReluEncoding {
    /// Network outputs as affine expressions over MILP variables.
    pub outputs: Vec<Affine>,
    /// Binary variable indices introduced for unstable neurons.
    pub gammas: Vec<usize>,
    /// Per unstable neuron: activation variable, binary variable and the
    /// pre-activation expression, in forward evaluation order. Lets a
    /// primal heuristic complete a candidate point by a forward pass.
    pub neurons: Vec<(usize, usize, Affine)>,
    pub n_stable_active: usize,
    pub n_stable_inactive: usize,
    pub n_unstable: usize,
}

/// Adds a row `expr sense rhs_shift` to the problem, folding the affine
/// constant into the right-hand side.
pub fn add_affine_row(
    milp: &mut MilpProblem,
    name: impl Into<String>,
    mut expr: Affine,
    sense: Sense,
    rhs: f64,
) {
    expr.compress();
    milp.lp
        .add_row(name, expr.terms.clone(), sense, rhs - expr.constant);
}

/// Encodes one ReLU network evaluation into `milp`. The `inputs` are
/// affine expressions for the flattened input layer; returns the outputs
/// as affine expressions plus the introduced binaries.
pub fn encode_relu_network(
    milp: &mut MilpProblem,
    spec: &MlpSpec,
    weights: &MlpWeights,
    bounds: &ActivationBounds,
    inputs: &[Affine],
    prefix: &str,
) -> Result<ReluEncoding, EncodeError> {
    if spec.activation != Activation::Relu {
        return Err(EncodeError::NotRelu);
    }
    if inputs.len() != spec.n_inputs() {
        return Err(EncodeError::InputMismatch {
            got: inputs.len(),
            want: spec.n_inputs(),
        });
    }
    if bounds.pre.len() != weights.hidden.len() {
        return Err(EncodeError::LayerMismatch {
            got: bounds.pre.len(),
            want: weights.hidden.len(),
        });
    }

    let mut enc = ReluEncoding {
        outputs: Vec::new(),
        gammas: Vec::new(),
        neurons: Vec::new(),
        n_stable_active: 0,
        n_stable_inactive: 0,
        n_unstable: 0,
    };

    let mut h: Vec<Affine> = inputs.to_vec();
    for (li, layer) in weights.hidden.iter().enumerate() {
        let (p_lo, p_hi) = &bounds.pre[li];
        let mut next = Vec::with_capacity(layer.w.rows);
        for r in 0..layer.w.rows {
            let (lo, hi) = (p_lo[r], p_hi[r]);
            if lo > hi {
                return Err(EncodeError::BadBounds {
                    layer: li,
                    neuron: r,
                    min: lo,
                    max: hi,
                });
            }
            // Pre-activation as an affine expression.
            let mut p = Affine::constant(layer.b[r]);
            for (c, w) in layer.w.row(r).iter().enumerate() {
                p.add_scaled(&h[c], *w);
            }
            p.compress();
            if hi <= 0.0 {
                // Stably inactive.
                enc.n_stable_inactive += 1;
                next.push(Affine::constant(0.0));
            } else if lo >= 0.0 {
                // Stably active: the ReLU is the identity here.
                enc.n_stable_active += 1;
                next.push(p);
            } else {
                enc.n_unstable += 1;
                let hv = milp
                    .lp
                    .add_var(format!("{prefix}_h{li}_{r}"), 0.0, hi, 0.0);
                let gv = milp
                    .lp
                    .add_var(format!("{prefix}_g{li}_{r}"), 0.0, 1.0, 0.0);
                milp.binaries.push(gv);
                enc.gammas.push(gv);
                // H >= P  <=>  H - P >= 0.
                let mut e1 = Affine::var(hv);
                e1.add_scaled(&p, -1.0);
                add_affine_row(milp, format!("{prefix}_relu_ge_{li}_{r}"), e1, Sense::Ge, 0.0);
                // H <= P - (1 - g) P_min  <=>  H - P - g*P_min <= -P_min.
                let mut e2 = Affine::var(hv);
                e2.add_scaled(&p, -1.0);
                e2.add_scaled(&Affine::var(gv), -lo);
                add_affine_row(milp, format!("{prefix}_relu_lo_{li}_{r}"), e2, Sense::Le, -lo);
                // H <= g * P_max  <=>  H - g*P_max <= 0.
                let mut e3 = Affine::var(hv);
                e3.add_scaled(&Affine::var(gv), -hi);
                add_affine_row(milp, format!("{prefix}_relu_hi_{li}_{r}"), e3, Sense::Le, 0.0);
                enc.neurons.push((hv, gv, p.clone()));
                next.push(Affine::var(hv));
            }
        }
        h = next;
    }

    for r in 0..weights.output.w.rows {
        let mut o = Affine::constant(weights.output.b[r]);
        for (c, w) in weights.output.w.row(r).iter().enumerate() {
            o.add_scaled(&h[c], *w);
        }
        o.compress();
        enc.outputs.push(o);
    }
    Ok(enc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::propagate_bounds;
    use crate::branch_bound::{solve_milp, MilpConfig, MilpStatus};
    use crate::linprog::LinProgram;
    use ies_core::linalg::Mat;
    use ies_core::mlp::{Layer, MlpSpec};

    // Two input slots (output feedback + one input lag); the neuron reads
    // only the input slot.
    fn scalar_relu_spec() -> MlpSpec {
        MlpSpec {
            neurons: vec![1],
            activation: Activation::Relu,
            d_o: 0,
            d_u: 0,
            d_z: 0,
            outputs: vec!["o".into()],
            inputs_cont: vec!["u".into()],
            inputs_bin: vec![],
            disturbances: vec![],
            linked: vec![],
        }
    }

    fn scalar_relu_weights() -> MlpWeights {
        MlpWeights {
            hidden: vec![Layer {
                w: Mat::from_rows(&[vec![0.0, 1.0]]),
                b: vec![0.0],
            }],
            output: Layer {
                w: Mat::from_rows(&[vec![1.0]]),
                b: vec![0.0],
            },
        }
    }

    /// Substituting candidate (P, H, gamma) triples into the four
    /// constraint families of a scalar neuron with bounds [-1, 2].
    #[test]
    fn scalar_neuron_constraint_substitution() {
        let (lo, hi) = (-1.0f64, 2.0f64);
        let check = |p: f64, h: f64, g: f64| -> bool {
            h >= p && h >= 0.0 && h <= p - (1.0 - g) * lo && h <= g * hi
        };
        // (P = -0.5, H = 0, g = 0) satisfies all four.
        assert!(check(-0.5, 0.0, 0.0));
        // (P = -0.5, H = 0, g = 1) violates H <= P - 0 (0 <= -0.5 fails).
        assert!(!check(-0.5, 0.0, 1.0));
    }

    /// Enumerating gamma over a grid of fixed inputs: the only feasible H
    /// equals max(P, 0).
    #[test]
    fn feasible_activation_is_exactly_relu() {
        let spec = scalar_relu_spec();
        let weights = scalar_relu_weights();
        for p_fix in [-1.0, -0.5, 0.0, 1.0, 2.0] {
            let mut milp = MilpProblem {
                lp: LinProgram::new(0),
                binaries: vec![],
            };
            let x = milp.lp.add_var("x", p_fix, p_fix, 0.0);
            let bounds = propagate_bounds(&spec, &weights, &[0.0, -1.0], &[0.0, 2.0]).unwrap();
            let enc = encode_relu_network(
                &mut milp,
                &spec,
                &weights,
                &bounds,
                &[Affine::constant(0.0), Affine::var(x)],
                "n",
            )
            .unwrap();
            // Minimize then maximize the output: both must equal relu(p).
            let expect = p_fix.max(0.0);
            for sign in [1.0, -1.0] {
                let mut m = milp.clone();
                for (idx, c) in &enc.outputs[0].terms {
                    m.lp.objective[*idx] = sign * c;
                }
                m.lp.obj_offset = sign * enc.outputs[0].constant;
                let sol = solve_milp(&m, &MilpConfig::default(), None).unwrap();
                assert_eq!(sol.status, MilpStatus::Optimal);
                assert!(
                    (sign * sol.objective - expect).abs() < 1e-8,
                    "p={p_fix}: extreme {} vs relu {expect}",
                    sign * sol.objective
                );
            }
        }
    }

    /// All-nonnegative bounds collapse to affine substitution: no binaries.
    #[test]
    fn stably_active_network_emits_no_binaries() {
        let spec = scalar_relu_spec();
        let weights = scalar_relu_weights();
        let mut milp = MilpProblem {
            lp: LinProgram::new(0),
            binaries: vec![],
        };
        let x = milp.lp.add_var("x", 0.5, 2.0, 0.0);
        let bounds = propagate_bounds(&spec, &weights, &[0.0, 0.5], &[0.0, 2.0]).unwrap();
        let enc = encode_relu_network(
            &mut milp,
            &spec,
            &weights,
            &bounds,
            &[Affine::constant(0.0), Affine::var(x)],
            "n",
        )
        .unwrap();
        assert!(enc.gammas.is_empty());
        assert_eq!(enc.n_stable_active, 1);
        assert!(milp.binaries.is_empty());
    }
}
