//! Excitation datasets: drives isolated units with pseudo-random
//! multi-level signals, records input-output series at each sampling
//! scale, adds measurement noise, scales and splits them for training.

use crate::linalg::Mat;
use crate::mlp::{table_preset, MlpSpec};
use crate::names::{TimeScale, UnitId};
use crate::plant::{self, units, PlantParams};
use crate::prms::{gen_binary_prms, gen_prms};
use crate::scale::MinMaxParams;
use crate::train::PairedData;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unit {0} has no trained network at scale {1}")]
    NotTrained(UnitId, TimeScale),
    #[error("plant error during excitation: {0}")]
    Plant(#[from] plant::PlantError),
    #[error("dataset not prepared (call prepare_sets first)")]
    NotPrepared,
    #[error("i/o error: {0}")]
    Io(String),
}

/// Contiguous split boundaries over the sample index range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIdx {
    pub train_end: usize,
    pub val_end: usize,
    pub n: usize,
}

impl SplitIdx {
    /// 70/20/10 contiguous split (plus/minus one sample from rounding).
    pub fn new(n: usize) -> SplitIdx {
        let train_end = (0.7 * n as f64).round() as usize;
        let val_end = train_end + (0.2 * n as f64).round() as usize;
        SplitIdx {
            train_end,
            val_end: val_end.min(n),
            n,
        }
    }

    pub fn train(&self) -> std::ops::Range<usize> {
        0..self.train_end
    }

    pub fn val(&self) -> std::ops::Range<usize> {
        self.train_end..self.val_end
    }

    pub fn test(&self) -> std::ops::Range<usize> {
        self.val_end..self.n
    }
}

/// Recorded input-output series of one unit at one sampling scale.
///
/// Input columns are ordered (continuous, binary, disturbance, linked),
/// matching the network spec's channel lists.
#[derive(Debug, Clone)]
pub struct UnitDataset {
    pub unit: UnitId,
    pub scale: TimeScale,
    pub dt: f64,
    pub seed: u64,
    pub spec: MlpSpec,
    /// Raw physical inputs (exact, never noised).
    pub inputs: Mat,
    /// Raw plant-truth outputs.
    pub outputs_clean: Mat,
    /// Outputs with measurement noise; present after `prepare_sets`.
    pub outputs_noisy: Option<Mat>,
    pub in_scaler: Option<MinMaxParams>,
    pub out_scaler: Option<MinMaxParams>,
    pub split: SplitIdx,
}

/// Published sample counts per scale, divided by the desk-scale divisor.
pub fn sample_count(scale: TimeScale, divisor: usize) -> usize {
    let full = match scale {
        TimeScale::Fast => 2_500_000,
        TimeScale::Slow => 800_000,
        TimeScale::LongTerm => 250_000,
    };
    (full / divisor.max(1)).max(100)
}

/// Excitation range of one named channel: 0.5x to 1.5x nominal, clipped
/// to physical limits; storage flow and battery command span their
/// symmetric physical ranges.
fn channel_range(name: &str, p: &PlantParams) -> (f64, f64) {
    use crate::names::*;
    match name {
        G_FF => (0.5 * p.fc.g_ff_nom, (1.5 * p.fc.g_ff_nom).min(p.u_range[0].hi)),
        G_FM => (0.5 * p.ma.g_fm_nom, (1.5 * p.ma.g_fm_nom).min(p.u_range[1].hi)),
        G_AB => (0.5 * p.g_ab_nom(), (1.5 * p.g_ab_nom()).min(p.u_range[2].hi)),
        N_EC => (0.5 * p.ec.n_nom, (1.5 * p.ec.n_nom).min(p.u_range[3].hi)),
        G_EC => (0.5 * p.g_ec_nom(), (1.5 * p.g_ec_nom()).min(p.u_range[4].hi)),
        G_STU => (0.0, 1.5),
        P_BAR => (-p.ba.p_max, p.ba.p_max),
        T_REC => (10.0, 14.0),
        G_ALL => (0.0, 1.5 * p.pmp.g_all_nom + 1.5),
        T_SL => (5.0, 10.0),
        G_SL => (0.5 * p.g_sl_nom(), 1.5 * p.g_sl_nom()),
        Q_SL => (0.0, 1.5 * 125.0),
        T_A => (15.0, 45.0),
        S_RA => (0.0, 900.0),
        P_D => (30.0, 90.0),
        Q_O => (0.5 * 95.0, 1.5 * 95.0),
        other => panic!("no excitation range for channel {other}"),
    }
}

/// Per-channel excitation signals for a unit at a scale.
pub struct Excitation {
    pub u: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

/// Ten-level PRMS per continuous channel, two-level per binary channel,
/// with hold durations uniform over one to five base intervals.
pub fn gen_excitation(
    spec: &MlpSpec,
    p: &PlantParams,
    n: usize,
    seed: u64,
) -> Excitation {
    let mut stream = 0u64;
    let mut next_seed = || {
        stream += 1;
        seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream)
    };
    let signal = |name: &str, s: u64| {
        let (lo, hi) = channel_range(name, p);
        gen_prms(10, lo, hi, n, 1..=5, s)
    };
    Excitation {
        u: spec.inputs_cont.iter().map(|c| signal(c, next_seed())).collect(),
        z: spec
            .inputs_bin
            .iter()
            .map(|_| gen_binary_prms(n, 2..=8, 0.8, next_seed()))
            .collect(),
        w: spec.disturbances.iter().map(|c| signal(c, next_seed())).collect(),
        v: spec.linked.iter().map(|c| signal(c, next_seed())).collect(),
    }
}

/// Drives one isolated unit with the excitation signals and records the
/// sampled inputs and plant-truth outputs.
pub fn excite_record(
    unit: UnitId,
    scale: TimeScale,
    p: &PlantParams,
    n_samples: usize,
    seed: u64,
) -> Result<UnitDataset, DatasetError> {
    let spec = table_preset(scale, unit).ok_or(DatasetError::NotTrained(unit, scale))?;
    let exc = gen_excitation(&spec, p, n_samples, seed);
    record_with_signals(unit, scale, p, &spec, &exc, seed)
}

/// Indices of the spec's output channels within the unit's full output list.
fn output_selection(unit: UnitId, spec: &MlpSpec) -> Vec<usize> {
    let names = units::output_names(unit);
    spec.outputs
        .iter()
        .map(|o| {
            names
                .iter()
                .position(|n| n == o)
                .unwrap_or_else(|| panic!("unit {unit} does not produce {o}"))
        })
        .collect()
}

/// Recording loop shared by `excite_record` and tests with custom signals.
pub fn record_with_signals(
    unit: UnitId,
    scale: TimeScale,
    p: &PlantParams,
    spec: &MlpSpec,
    exc: &Excitation,
    seed: u64,
) -> Result<UnitDataset, DatasetError> {
    let n = exc
        .u
        .iter()
        .chain(&exc.z)
        .chain(&exc.w)
        .chain(&exc.v)
        .map(|s| s.len())
        .min()
        .unwrap_or(0);
    let dt = scale.dt();
    let substep = units::excitation_substep(unit, p, dt);
    let sel = output_selection(unit, spec);

    let n_in = spec.inputs_cont.len() + spec.inputs_bin.len() + spec.disturbances.len() + spec.linked.len();
    let mut inputs = Mat::zeros(n, n_in);
    let mut outputs = Mat::zeros(n, sel.len());

    // Sample convention: row k holds the left-limit measurement o(k),
    // taken with the inputs of the preceding interval, before the new
    // inputs u(k) act over [k, k+1). Windows ending at k then predict
    // o(k+1), matching the one-step form used everywhere else.
    //
    // The streamlined 1-hour building takes delivered cooling power as its
    // linked input; it is realized through the physical supply pair by
    // holding the nominal flow and steering the supply temperature so the
    // delivered power tracks the command as the return water drifts.
    let q_sl_drive = unit == UnitId::Bd && scale == TimeScale::LongTerm;
    let mut st = units::nominal_state(unit, p);
    let mut inp_prev = units::nominal_inputs(unit, p);
    let mut inp = inp_prev.clone();
    for k in 0..n {
        let current = units::unit_outputs(&st, p, &inp_prev);
        for (j, &oi) in sel.iter().enumerate() {
            outputs.set(k, j, current[oi]);
        }
        for (c, sig) in exc.u.iter().enumerate() {
            inp.u[c] = sig[k];
        }
        for (c, sig) in exc.z.iter().enumerate() {
            inp.z[c] = sig[k];
        }
        for (c, sig) in exc.w.iter().enumerate() {
            inp.w[c] = sig[k];
        }
        if !q_sl_drive {
            for (c, sig) in exc.v.iter().enumerate() {
                inp.v[c] = sig[k];
            }
        }
        let row = inputs.row_mut(k);
        let mut at = 0;
        for sig in exc.u.iter() {
            row[at] = sig[k];
            at += 1;
        }
        for sig in exc.z.iter() {
            row[at] = sig[k];
            at += 1;
        }
        for sig in exc.w.iter() {
            row[at] = sig[k];
            at += 1;
        }
        for sig in exc.v.iter() {
            row[at] = sig[k];
            at += 1;
        }
        if q_sl_drive {
            let q_cmd = exc.v[0][k];
            let g_sl = p.g_sl_nom();
            // Re-aim the supply temperature every chunk so the delivered
            // cooling follows the command as t_re moves.
            let chunk = 60.0f64.min(dt);
            let n_chunks = (dt / chunk).round().max(1.0) as usize;
            for _ in 0..n_chunks {
                let t_re_now = st.x[1];
                inp.v[0] = t_re_now - q_cmd / (crate::plant::C_W * g_sl);
                inp.v[1] = g_sl;
                let (s, _, _) = units::unit_advance(&st, p, &inp, dt / n_chunks as f64, substep)?;
                st = s;
            }
        } else {
            let (s, _, _) = units::unit_advance(&st, p, &inp, dt, substep)?;
            st = s;
        }
        inp_prev = inp.clone();
    }

    Ok(UnitDataset {
        unit,
        scale,
        dt,
        seed,
        spec: spec.clone(),
        inputs,
        outputs_clean: outputs,
        outputs_noisy: None,
        in_scaler: None,
        out_scaler: None,
        split: SplitIdx::new(n),
    })
}

/// Adds zero-mean Gaussian noise (sigma = `noise_frac` of each output
/// column's amplitude) to the outputs and fits min-max scalers on the
/// training split only.
pub fn prepare_sets(raw: &mut UnitDataset, noise_frac: f64, seed: u64) {
    let n = raw.split.n;
    let n_out = raw.outputs_clean.cols;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0xda7a));

    // Column amplitudes over the full recording.
    let mut amp = vec![0.0; n_out];
    for c in 0..n_out {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in 0..n {
            let v = raw.outputs_clean.get(r, c);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        amp[c] = (hi - lo).max(0.0);
    }

    let mut noisy = raw.outputs_clean.clone();
    if noise_frac > 0.0 {
        for r in 0..n {
            for c in 0..n_out {
                let e = gaussian(&mut rng) * noise_frac * amp[c];
                noisy.set(r, c, noisy.get(r, c) + e);
            }
        }
    }

    // Scalers from the training split only; test columns may exceed [0, 1].
    let train = raw.split.train();
    let in_rows: Vec<&[f64]> = train.clone().map(|r| raw.inputs.row(r)).collect();
    let out_rows: Vec<&[f64]> = train.clone().map(|r| noisy.row(r)).collect();
    raw.in_scaler = Some(MinMaxParams::fit(&in_rows));
    raw.out_scaler = Some(MinMaxParams::fit(&out_rows));
    raw.outputs_noisy = Some(noisy);
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

impl UnitDataset {
    /// Scaled input row (allocates).
    fn scaled_input(&self, r: usize) -> Vec<f64> {
        let sc = self.in_scaler.as_ref().expect("prepared dataset");
        let mut row = self.inputs.row(r).to_vec();
        sc.scale_row(&mut row);
        row
    }

    fn scaled_output(&self, r: usize, noisy: bool) -> Vec<f64> {
        let sc = self.out_scaler.as_ref().expect("prepared dataset");
        let src = if noisy {
            self.outputs_noisy.as_ref().expect("prepared dataset")
        } else {
            &self.outputs_clean
        };
        let mut row = src.row(r).to_vec();
        sc.scale_row(&mut row);
        row
    }

    /// Offsets of the channel groups inside an input row.
    fn group_offsets(&self) -> (usize, usize, usize) {
        let s = &self.spec;
        let zu = s.inputs_cont.len();
        let wu = zu + s.inputs_bin.len();
        let vu = wu + s.disturbances.len();
        (zu, wu, vu)
    }

    /// Builds (flattened window, next output) pairs over a split range in
    /// scaled units, targeting noisy outputs.
    pub fn pairs(&self, range: std::ops::Range<usize>) -> Result<PairedData, DatasetError> {
        if self.outputs_noisy.is_none() {
            return Err(DatasetError::NotPrepared);
        }
        let s = &self.spec;
        let d_max = s.max_delay();
        let start = range.start + d_max;
        if start + 1 >= range.end {
            return Ok(PairedData {
                x: Mat::zeros(0, s.n_inputs()),
                y: Mat::zeros(0, s.n_outputs()),
            });
        }
        let count = range.end - 1 - start;
        let mut x = Mat::zeros(count, s.n_inputs());
        let mut y = Mat::zeros(count, s.n_outputs());
        let (zu, wu, vu) = self.group_offsets();

        for (i, t) in (start..range.end - 1).enumerate() {
            let row = x.row_mut(i);
            for c in 0..s.outputs.len() {
                for lag in 0..=s.d_o {
                    let o = self.scaled_output(t - lag, true);
                    row[s.out_index(c, lag)] = o[c];
                }
            }
            for lag in 0..=s.d_u {
                let u = self.scaled_input(t - lag);
                for c in 0..s.inputs_cont.len() {
                    row[s.cont_index(c, lag)] = u[c];
                }
                for c in 0..s.disturbances.len() {
                    row[s.dist_index(c, lag)] = u[wu + c];
                }
                for c in 0..s.linked.len() {
                    row[s.linked_index(c, lag)] = u[vu + c];
                }
            }
            for lag in 0..=s.d_z {
                let u = self.scaled_input(t - lag);
                for c in 0..s.inputs_bin.len() {
                    row[s.bin_index(c, lag)] = u[zu + c];
                }
            }
            let target = self.scaled_output(t + 1, true);
            y.row_mut(i).copy_from_slice(&target);
        }
        Ok(PairedData { x, y })
    }

    pub fn train_pairs(&self) -> Result<PairedData, DatasetError> {
        self.pairs(self.split.train())
    }

    pub fn val_pairs(&self) -> Result<PairedData, DatasetError> {
        self.pairs(self.split.val())
    }

    /// Scaled exact inputs (u, z, w, v groups) at a sample index.
    pub fn scaled_input_groups(&self, r: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let (zu, wu, vu) = self.group_offsets();
        let row = self.scaled_input(r);
        (
            row[..zu].to_vec(),
            row[zu..wu].to_vec(),
            row[wu..vu].to_vec(),
            row[vu..].to_vec(),
        )
    }

    /// Scaled plant-truth outputs at a sample index.
    pub fn scaled_clean_output(&self, r: usize) -> Vec<f64> {
        self.scaled_output(r, false)
    }

    /// Persists the recording as CSV plus a JSON sidecar.
    pub fn save(&self, dir: &std::path::Path) -> Result<(), DatasetError> {
        std::fs::create_dir_all(dir).map_err(|e| DatasetError::Io(e.to_string()))?;
        let base = format!("{}_{}", self.unit.key(), self.scale.key());
        let csv_path = dir.join(format!("{base}.csv"));
        let mut wtr = csv::Writer::from_path(&csv_path)
            .map_err(|e| DatasetError::Io(format!("{}: {e}", csv_path.display())))?;
        let s = &self.spec;
        let mut header: Vec<String> = Vec::new();
        header.extend(s.inputs_cont.iter().cloned());
        header.extend(s.inputs_bin.iter().cloned());
        header.extend(s.disturbances.iter().cloned());
        header.extend(s.linked.iter().cloned());
        for o in &s.outputs {
            header.push(format!("{o}_clean"));
        }
        if self.outputs_noisy.is_some() {
            for o in &s.outputs {
                header.push(format!("{o}_noisy"));
            }
        }
        wtr.write_record(&header).map_err(|e| DatasetError::Io(e.to_string()))?;
        for r in 0..self.split.n {
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            rec.extend(self.inputs.row(r).iter().map(|v| v.to_string()));
            rec.extend(self.outputs_clean.row(r).iter().map(|v| v.to_string()));
            if let Some(noisy) = &self.outputs_noisy {
                rec.extend(noisy.row(r).iter().map(|v| v.to_string()));
            }
            wtr.write_record(&rec).map_err(|e| DatasetError::Io(e.to_string()))?;
        }
        wtr.flush().map_err(|e| DatasetError::Io(e.to_string()))?;

        let sidecar = Sidecar {
            unit: self.unit,
            scale: self.scale,
            dt: self.dt,
            seed: self.seed,
            spec: self.spec.clone(),
            in_scaler: self.in_scaler.clone(),
            out_scaler: self.out_scaler.clone(),
            split: self.split,
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serialize");
        std::fs::write(dir.join(format!("{base}.json")), json)
            .map_err(|e| DatasetError::Io(e.to_string()))?;
        Ok(())
    }
}

/// JSON sidecar stored next to the CSV recording.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub unit: UnitId,
    pub scale: TimeScale,
    pub dt: f64,
    pub seed: u64,
    pub spec: MlpSpec,
    pub in_scaler: Option<MinMaxParams>,
    pub out_scaler: Option<MinMaxParams>,
    pub split: SplitIdx,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_are_70_20_10() {
        let s = SplitIdx::new(1000);
        assert_eq!(s.train().len(), 700);
        assert_eq!(s.val().len(), 200);
        assert_eq!(s.test().len(), 100);
    }

    #[test]
    fn sample_counts_follow_published_budget() {
        assert_eq!(sample_count(TimeScale::Fast, 100), 25_000);
        assert_eq!(sample_count(TimeScale::Slow, 100), 8_000);
        assert_eq!(sample_count(TimeScale::LongTerm, 100), 2_500);
    }

    #[test]
    fn same_seed_identical_recording() {
        let p = PlantParams::default();
        let a = excite_record(UnitId::Fc, TimeScale::Fast, &p, 200, 5).unwrap();
        let b = excite_record(UnitId::Fc, TimeScale::Fast, &p, 200, 5).unwrap();
        assert_eq!(a.inputs.data, b.inputs.data);
        assert_eq!(a.outputs_clean.data, b.outputs_clean.data);
    }

    #[test]
    fn constant_nominal_excitation_settles_to_table_values() {
        let p = PlantParams::default();
        let spec = table_preset(TimeScale::Fast, UnitId::Fc).unwrap();
        let n = 60;
        let exc = Excitation {
            u: vec![vec![p.fc.g_ff_nom; n]],
            z: vec![vec![1.0; n]],
            w: vec![],
            v: vec![],
        };
        let ds = record_with_signals(UnitId::Fc, TimeScale::Fast, &p, &spec, &exc, 0).unwrap();
        let last = ds.outputs_clean.get(n - 1, 0);
        assert!((last - 40.0).abs() / 40.0 < 0.01, "P_fc settled at {last}");
    }

    #[test]
    fn noise_std_matches_two_percent_of_amplitude() {
        let p = PlantParams::default();
        let spec = table_preset(TimeScale::Fast, UnitId::Fc).unwrap();
        // Deterministic square-wave output via binary z: amplitude is known.
        let n = 4000;
        let exc = Excitation {
            u: vec![gen_prms(10, 0.001, 0.003, n, 1..=5, 3)],
            z: vec![vec![1.0; n]],
            w: vec![],
            v: vec![],
        };
        let mut ds = record_with_signals(UnitId::Fc, TimeScale::Fast, &p, &spec, &exc, 0).unwrap();
        let clean = ds.outputs_clean.clone();
        prepare_sets(&mut ds, 0.02, 11);
        let noisy = ds.outputs_noisy.as_ref().unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for r in 0..n {
            lo = lo.min(clean.get(r, 0));
            hi = hi.max(clean.get(r, 0));
        }
        let amp = hi - lo;
        let mut var = 0.0;
        for r in 0..n {
            let d = noisy.get(r, 0) - clean.get(r, 0);
            var += d * d;
        }
        let std = (var / n as f64).sqrt();
        assert!(
            (std - 0.02 * amp).abs() / (0.02 * amp) < 0.05,
            "noise std {std} vs expected {}",
            0.02 * amp
        );
    }

    #[test]
    fn zero_noise_keeps_outputs_exact() {
        let p = PlantParams::default();
        let mut ds = excite_record(UnitId::Fc, TimeScale::Fast, &p, 300, 2).unwrap();
        prepare_sets(&mut ds, 0.0, 1);
        assert_eq!(
            ds.outputs_noisy.as_ref().unwrap().data,
            ds.outputs_clean.data
        );
    }

    #[test]
    fn scaled_training_columns_lie_in_unit_interval() {
        let p = PlantParams::default();
        let mut ds = excite_record(UnitId::Ma, TimeScale::Fast, &p, 500, 9).unwrap();
        prepare_sets(&mut ds, 0.02, 9);
        let pairs = ds.train_pairs().unwrap();
        for v in &pairs.x.data {
            assert!(*v >= -1e-9 && *v <= 1.0 + 1e-9, "scaled value {v} out of range");
        }
    }

    #[test]
    fn pairs_reconstruct_windows_consistently() {
        let p = PlantParams::default();
        let mut ds = excite_record(UnitId::Fc, TimeScale::Fast, &p, 120, 4).unwrap();
        prepare_sets(&mut ds, 0.0, 1);
        let pairs = ds.pairs(0..120).unwrap();
        let s = &ds.spec;
        // Hand-check one row: t = d_max + 3.
        let t = s.max_delay() + 3;
        let i = 3;
        let x = pairs.x.row(i);
        let o_t = ds.scaled_output(t, true);
        assert_eq!(x[s.out_index(0, 0)], o_t[0]);
        let (u_t, _, _, _) = ds.scaled_input_groups(t - 1);
        assert_eq!(x[s.cont_index(0, 1)], u_t[0]);
        let y = pairs.y.row(i);
        let o_next = ds.scaled_output(t + 1, true);
        assert_eq!(y[0], o_next[0]);
    }
}
