//! Encoding exactness: for random trained-like ReLU networks and random
//! inputs in the bound box, the outputs feasible under the mixed-integer
//! encoding with inputs fixed coincide with the forward pass.

use ies_core::mlp::{forward_raw, Activation, MlpSpec};
use ies_core::train::init_weights;
use ies_solver::bounds::propagate_bounds;
use ies_solver::branch_bound::{solve_milp, MilpConfig, MilpStatus};
use ies_solver::linprog::{LinProgram, MilpProblem};
use ies_solver::relu_encode::{encode_relu_network, Affine};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_relu_spec(rng: &mut ChaCha8Rng) -> MlpSpec {
    let n_layers = rng.gen_range(1..=2);
    let neurons: Vec<usize> = (0..n_layers).map(|_| rng.gen_range(2..=8)).collect();
    let n_in = rng.gen_range(2..=5);
    MlpSpec {
        neurons,
        activation: Activation::Relu,
        d_o: 0,
        d_u: n_in - 1,
        d_z: 0,
        outputs: vec!["o".into()],
        inputs_cont: vec!["u".into()],
        inputs_bin: vec![],
        disturbances: vec![],
        linked: vec![],
    }
}

#[test]
fn encoding_matches_forward_pass_on_random_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xe4ac7);
    let cfg = MilpConfig::default();
    for net_idx in 0..20u64 {
        let spec = random_relu_spec(&mut rng);
        // Scaled weights so pre-activations straddle zero.
        let mut weights = init_weights(&spec, net_idx);
        for l in weights.hidden.iter_mut() {
            for v in l.w.data.iter_mut() {
                *v *= 3.0;
            }
            for b in l.b.iter_mut() {
                *b = rng.gen_range(-0.5..0.5);
            }
        }
        let n_in = spec.n_inputs();
        let lo: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..0.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.5..2.0)).collect();
        let bounds = propagate_bounds(&spec, &weights, &lo, &hi).unwrap();

        // Encode once with free input variables.
        let mut milp = MilpProblem {
            lp: LinProgram::new(0),
            binaries: vec![],
        };
        let in_vars: Vec<usize> = (0..n_in)
            .map(|i| milp.lp.add_var(format!("x{i}"), lo[i], hi[i], 0.0))
            .collect();
        let in_exprs: Vec<Affine> = in_vars.iter().map(|&v| Affine::var(v)).collect();
        let enc =
            encode_relu_network(&mut milp, &spec, &weights, &bounds, &in_exprs, "net").unwrap();

        for sample in 0..100 {
            let x: Vec<f64> = lo
                .iter()
                .zip(hi.iter())
                .map(|(l, h)| rng.gen_range(*l..=*h))
                .collect();
            let truth = forward_raw(&spec, &weights, &x, None).unwrap()[0];

            // Pin inputs and extremize the output in both directions: the
            // feasible output set must be the single forward-pass value.
            let mut m = milp.clone();
            for (i, &v) in in_vars.iter().enumerate() {
                m.lp.lower[v] = x[i];
                m.lp.upper[v] = x[i];
            }
            for sign in [1.0, -1.0] {
                for c in m.lp.objective.iter_mut() {
                    *c = 0.0;
                }
                for (idx, c) in &enc.outputs[0].terms {
                    m.lp.objective[*idx] = sign * c;
                }
                m.lp.obj_offset = sign * enc.outputs[0].constant;
                let sol = solve_milp(&m, &cfg, None).unwrap();
                assert_eq!(sol.status, MilpStatus::Optimal, "net {net_idx} sample {sample}");
                let extreme = sign * sol.objective;
                assert!(
                    (extreme - truth).abs() < 1e-6,
                    "net {net_idx} sample {sample}: encoding {extreme} vs forward {truth}"
                );
            }
        }
    }
}
