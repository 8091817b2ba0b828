//! Day-ahead scheduling over a 24-hour horizon.
//!
//! Builds one mixed-integer linear program that chains the long-term
//! hybrid predictor across the horizon: every unit network is encoded
//! exactly (big-M ReLU with interval bounds propagated step by step), the
//! storage capacity states integrate the commanded circulation through a
//! McCormick-linearized binary-times-flow product, and the electrical
//! balance, comfort band and actuation limits close the constraint set.
//! The same skeleton accepts the affine baseline model in place of the
//! network encodings.

use ies_core::hybrid::{o_layout, HybridNet, StorageState};
use ies_core::names::UnitId;
use ies_core::plant::params::DELTA_T_NOM;
use ies_core::plant::C_W;
use ies_core::scenario::ScenarioProfile;
use ies_solver::bounds::propagate_bounds;
use ies_solver::branch_bound::{solve_milp, MilpConfig, MilpStatus};
use ies_solver::linprog::{LinProgram, MilpProblem, Sense};
use ies_solver::relu_encode::{add_affine_row, encode_relu_network, Affine};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("forecasts cover {got} hours, horizon needs {want}")]
    ShortForecast { got: usize, want: usize },
    #[error("model must be assembled at the long-term scale")]
    WrongScale,
    #[error("infeasible configuration: {0}")]
    BadConfig(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// The long-term continuous input channels [G_ff, G_fm, N_ec, G_stu, P_bar]
/// with their gating binary (index into z).
pub const U_GATE: [Option<usize>; 5] = [Some(0), Some(1), Some(2), None, None];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub horizon: usize,
    /// Objective weights [alpha_1 .. alpha_5]; alpha_1 of zero means
    /// "normalize by the scenario's nominal daily revenue".
    pub alpha: [f64; 5],
    /// Customer comfort band on the building temperature, degC.
    pub comfort: (f64, f64),
    /// Optional symmetric tightening of the comfort band, degC.
    pub comfort_margin: f64,
    /// Physical bounds of u_l = [G_ff, G_fm, N_ec, G_stu, P_bar].
    pub u_min: [f64; 5],
    pub u_max: [f64; 5],
    /// Hourly rate bounds; entries at least the full span disable the rows.
    pub du_max: [f64; 5],
    /// Physical bounds per o_l channel, in `o_layout(LongTerm)` order.
    pub o_min: Vec<f64>,
    pub o_max: Vec<f64>,
    /// Storage capacity operating band.
    pub storage_band: (f64, f64),
    pub y_eb_max: f64,
    pub gap: f64,
    pub node_limit: usize,
    pub pivot_limit: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            horizon: 24,
            alpha: [0.0, 10.0, 10.0, 10.0, 10.0],
            comfort: (22.0, 25.0),
            comfort_margin: 0.0,
            u_min: [0.001, 0.00265, 1500.0, 0.0, -40.0],
            u_max: [0.003, 0.00795, 4500.0, 1.2, 40.0],
            du_max: [0.002, 0.0053, 3000.0, 1.2, 80.0],
            o_min: vec![
                0.0, 0.0, -40.0, -100.0, 0.0, 0.0, 0.0, 0.0, 0.0, 14.0, -28.0, -1.4,
            ],
            o_max: vec![
                70.0, 60.0, 40.0, 100.0, 120.0, 120.0, 30.0, 85.0, 35.0, 34.0, 28.0, 1.4,
            ],
            storage_band: (0.1, 0.9),
            y_eb_max: 300.0,
            gap: 1e-4,
            node_limit: 4000,
            pivot_limit: 6_000_000,
        }
    }
}

/// Measured state at the scheduling instant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongTermInit {
    /// Physical unit outputs in `output_channel_names(LongTerm, unit)` order.
    pub outputs: BTreeMap<UnitId, Vec<f64>>,
    pub u_prev: [f64; 5],
    pub z_prev: [f64; 4],
    pub storage: StorageState,
}

impl LongTermInit {
    /// Steady overnight condition: generation at nominal, storage at half.
    pub fn nominal(params: &ies_core::plant::PlantParams) -> LongTermInit {
        let mut outputs = BTreeMap::new();
        outputs.insert(UnitId::Pv, vec![0.0]);
        outputs.insert(UnitId::Fc, vec![40.0]);
        outputs.insert(UnitId::Ba, vec![0.0, 0.0]);
        outputs.insert(UnitId::Ma, vec![80.0, 75.0]);
        outputs.insert(UnitId::Ec, vec![12.6, 50.0]);
        outputs.insert(UnitId::Pmp, vec![13.9]);
        outputs.insert(UnitId::Bd, vec![24.0]);
        outputs.insert(UnitId::Cs, vec![0.0, 0.0]);
        LongTermInit {
            outputs,
            u_prev: [0.002, 0.0053, 3000.0, 0.0, 0.0],
            z_prev: [1.0, 1.0, 1.0, 1.0],
            storage: StorageState {
                c_soc: 0.5,
                c_sot: 0.5,
                c_sth: 0.5 * params.cs.m_st * 12.0,
                c_stc: 0.5 * params.cs.m_st * 7.0,
            },
        }
    }
}

/// Affine per-unit one-step output model used by the baseline scheduler:
/// `o = const + gain_z * z + gain_u . u + gain_w . w` in physical units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearEconModel {
    pub gain_z: Vec<f64>,
    /// Gating binary per channel (`usize::MAX` when ungated).
    pub z_of: Vec<usize>,
    pub gain_u: Vec<[f64; 5]>,
    pub gain_w: Vec<[f64; 4]>,
    pub constant: Vec<f64>,
}

/// Prediction source for the day-ahead builder.
pub enum DayAheadModel<'a> {
    Relu(&'a HybridNet),
    Linear(&'a LinearEconModel),
}

struct NeuronEntry {
    h_var: usize,
    g_var: usize,
    pre: Affine,
}

/// A built problem plus the registry needed for extraction and the
/// incumbent heuristic.
pub struct BuiltSchedule {
    pub milp: MilpProblem,
    pub horizon: usize,
    u_vars: Vec<[usize; 5]>,
    z_vars: Vec<[usize; 4]>,
    m_vars: Vec<usize>,
    eps_vars: Vec<[usize; 4]>,
    y_eb_vars: Vec<usize>,
    /// Physical-unit output expressions per predicted step, o_layout order.
    pub o_exprs: Vec<Vec<Affine>>,
    p_sl_exprs: Vec<Affine>,
    t_br_exprs: Vec<Affine>,
    c_soc_exprs: Vec<Affine>,
    c_sot_exprs: Vec<Affine>,
    neurons: Vec<NeuronEntry>,
    xi: Vec<f64>,
    config: ScheduleConfig,
}

/// The scheduler's solved plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchedulePlan {
    /// Hourly on/off and charge/discharge statuses.
    pub z: Vec<[f64; 4]>,
    /// Hourly baseline power commitment, kW.
    pub y_eb: Vec<f64>,
    /// Hourly storage references (C_soc, C_sot).
    pub c_es: Vec<[f64; 2]>,
    /// Hourly continuous inputs [G_ff, G_fm, N_ec, G_stu, P_bar].
    pub u: Vec<[f64; 5]>,
    /// Predicted delivered power per hour, kW.
    pub y1: Vec<f64>,
    /// Predicted building temperature per hour, degC.
    pub y2: Vec<f64>,
    pub objective: f64,
    pub gap: f64,
    pub gap_closed: bool,
    pub nodes: usize,
    pub pivots: usize,
    /// Total slack magnitude at the optimum, kW plus degC.
    pub slack_total: f64,
    pub solve_seconds: f64,
}

impl SchedulePlan {
    pub fn save_json(&self, path: &std::path::Path) -> Result<(), ScheduleError> {
        let text = serde_json::to_string_pretty(self).expect("plan serialize");
        std::fs::write(path, text)
            .map_err(|e| ScheduleError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load_json(path: &std::path::Path) -> Result<SchedulePlan, ScheduleError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScheduleError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ScheduleError::Io(format!("{}: {e}", path.display())))
    }

    /// Commanded signed storage circulation for one plan hour.
    pub fn g_st(&self, hour: usize) -> f64 {
        let h = hour.min(self.z.len() - 1);
        (2.0 * self.z[h][3] - 1.0) * self.u[h][3]
    }

    /// Streamlined storage cooling power at nominal temperatures.
    pub fn q_st(&self, hour: usize) -> f64 {
        self.g_st(hour) * C_W * DELTA_T_NOM
    }
}

fn interval_add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

fn unit_u_index(unit: UnitId) -> usize {
    match unit {
        UnitId::Fc => 0,
        UnitId::Ma => 1,
        UnitId::Ec => 2,
        UnitId::Cs => 3,
        UnitId::Ba => 4,
        _ => usize::MAX,
    }
}

fn unit_z_index(unit: UnitId) -> usize {
    match unit {
        UnitId::Fc => 0,
        UnitId::Ma => 1,
        UnitId::Ec => 2,
        UnitId::Cs => 3,
        _ => usize::MAX,
    }
}

/// Builds the day-ahead MILP from forecasts and the measured initial state.
pub fn build_day_ahead(
    model: &DayAheadModel<'_>,
    scenario: &ScenarioProfile,
    init: &LongTermInit,
    config: &ScheduleConfig,
) -> Result<BuiltSchedule, ScheduleError> {
    if let DayAheadModel::Relu(net) = model {
        if net.scale != ies_core::TimeScale::LongTerm {
            return Err(ScheduleError::WrongScale);
        }
    }
    let n = config.horizon;
    if scenario.w_forecast.len() < n.min(24) || scenario.xi_forecast.len() < n.min(24) {
        return Err(ScheduleError::ShortForecast {
            got: scenario.w_forecast.len().min(scenario.xi_forecast.len()),
            want: n,
        });
    }
    let layout = o_layout(ies_core::TimeScale::LongTerm);
    if config.o_min.len() != layout.len() || config.o_max.len() != layout.len() {
        return Err(ScheduleError::BadConfig(
            "output bound vectors must match the o layout".into(),
        ));
    }
    for j in 0..5 {
        if config.u_min[j] > config.u_max[j] {
            return Err(ScheduleError::BadConfig(format!("u bounds empty at {j}")));
        }
    }
    if config.comfort.0 + config.comfort_margin >= config.comfort.1 - config.comfort_margin {
        return Err(ScheduleError::BadConfig("comfort band empty".into()));
    }

    // alpha_1 defaults to one over the nominal daily revenue.
    let mut alpha = config.alpha;
    if alpha[0] == 0.0 {
        let nominal_rev: f64 = (0..n)
            .map(|i| (scenario.prices.p_se[i.min(23)] * 77.5 + scenario.prices.p_mg * 60.0) / 1000.0)
            .sum();
        alpha[0] = 1.0 / nominal_rev.max(1.0);
    }

    let params = match model {
        DayAheadModel::Relu(net) => net.params.clone(),
        DayAheadModel::Linear(_) => ies_core::plant::PlantParams::default(),
    };

    let mut milp = MilpProblem {
        lp: LinProgram::new(0),
        binaries: Vec::new(),
    };
    let mut u_vars: Vec<[usize; 5]> = Vec::new();
    let mut z_vars: Vec<[usize; 4]> = Vec::new();
    let mut m_vars: Vec<usize> = Vec::new();
    let mut eps_vars: Vec<[usize; 4]> = Vec::new();
    let mut y_eb_vars: Vec<usize> = Vec::new();
    let mut neurons: Vec<NeuronEntry> = Vec::new();

    for i in 0..n {
        let mut uv = [0usize; 5];
        for (j, name) in ["G_ff", "G_fm", "N_ec", "G_stu", "P_bar"].iter().enumerate() {
            let lo = if U_GATE[j].is_some() {
                config.u_min[j].min(0.0)
            } else {
                config.u_min[j]
            };
            uv[j] = milp.lp.add_var(format!("{name}_{i}"), lo, config.u_max[j], 0.0);
        }
        u_vars.push(uv);
        let mut zv = [0usize; 4];
        for (j, name) in ["z_fc", "z_ma", "z_ec", "z_st"].iter().enumerate() {
            zv[j] = milp.lp.add_var(format!("{name}_{i}"), 0.0, 1.0, 0.0);
            milp.binaries.push(zv[j]);
        }
        z_vars.push(zv);
        m_vars.push(milp.lp.add_var(format!("m_st_{i}"), 0.0, config.u_max[3], 0.0));
        let mut ev = [0usize; 4];
        for (j, name) in ["eps1", "eps2", "eps3", "eps4"].iter().enumerate() {
            ev[j] = milp
                .lp
                .add_var(format!("{name}_{i}"), 0.0, f64::INFINITY, alpha[j + 1]);
        }
        eps_vars.push(ev);
        y_eb_vars.push(milp.lp.add_var(format!("y_eb_{i}"), 0.0, config.y_eb_max, 0.0));
    }

    // Gating, rate and McCormick rows.
    for i in 0..n {
        for j in 0..5 {
            if let Some(zi) = U_GATE[j] {
                let u = u_vars[i][j];
                let z = z_vars[i][zi];
                milp.lp.add_row(
                    format!("gate_hi_u{j}_{i}"),
                    vec![(u, 1.0), (z, -config.u_max[j])],
                    Sense::Le,
                    0.0,
                );
                milp.lp.add_row(
                    format!("gate_lo_u{j}_{i}"),
                    vec![(u, 1.0), (z, -config.u_min[j])],
                    Sense::Ge,
                    0.0,
                );
            }
            let span = config.u_max[j] - config.u_min[j].min(0.0);
            if config.du_max[j] < span {
                let u = u_vars[i][j];
                if i == 0 {
                    milp.lp.add_row(
                        format!("rate_hi_u{j}_{i}"),
                        vec![(u, 1.0)],
                        Sense::Le,
                        init.u_prev[j] + config.du_max[j],
                    );
                    milp.lp.add_row(
                        format!("rate_lo_u{j}_{i}"),
                        vec![(u, 1.0)],
                        Sense::Ge,
                        init.u_prev[j] - config.du_max[j],
                    );
                } else {
                    let up = u_vars[i - 1][j];
                    milp.lp.add_row(
                        format!("rate_hi_u{j}_{i}"),
                        vec![(u, 1.0), (up, -1.0)],
                        Sense::Le,
                        config.du_max[j],
                    );
                    milp.lp.add_row(
                        format!("rate_lo_u{j}_{i}"),
                        vec![(u, 1.0), (up, -1.0)],
                        Sense::Ge,
                        -config.du_max[j],
                    );
                }
            }
        }
        let (m, z, g) = (m_vars[i], z_vars[i][3], u_vars[i][3]);
        let g_max = config.u_max[3];
        milp.lp
            .add_row(format!("mc_a_{i}"), vec![(m, 1.0), (z, -g_max)], Sense::Le, 0.0);
        milp.lp
            .add_row(format!("mc_b_{i}"), vec![(m, 1.0), (g, -1.0)], Sense::Le, 0.0);
        milp.lp.add_row(
            format!("mc_c_{i}"),
            vec![(m, 1.0), (g, -1.0), (z, -g_max)],
            Sense::Ge,
            -g_max,
        );
    }

    // Prediction chain tables: channel expressions and sound bounds,
    // index 0 holds the measured state.
    let find = |unit: UnitId, name: &str| -> usize {
        layout
            .iter()
            .position(|(u, nm)| *u == unit && *nm == name)
            .unwrap()
    };
    let i_pv = find(UnitId::Pv, "P_pv");
    let i_fc = find(UnitId::Fc, "P_fc");
    let i_ba = find(UnitId::Ba, "P_ba");
    let i_iba = find(UnitId::Ba, "I_ba");
    let i_mt = find(UnitId::Ma, "P_mt");
    let i_qab = find(UnitId::Ma, "Q_ab");
    let i_cp = find(UnitId::Ec, "P_cp");
    let i_qec = find(UnitId::Ec, "Q_ec");
    let i_pmp = find(UnitId::Pmp, "P_pmp");
    let i_tbr = find(UnitId::Bd, "t_br");
    let i_qst = find(UnitId::Cs, "Q_st");
    let i_gst = find(UnitId::Cs, "G_st");

    let mut chan_expr: Vec<Vec<Affine>> = Vec::with_capacity(n + 1);
    let mut chan_bounds: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n + 1);
    {
        let mut e0 = Vec::with_capacity(layout.len());
        let mut b0 = Vec::with_capacity(layout.len());
        for (unit, name) in &layout {
            let names =
                ies_core::hybrid::output_channel_names(ies_core::TimeScale::LongTerm, *unit);
            let idx = names.iter().position(|x| x == name).unwrap();
            let v = init.outputs[unit][idx];
            e0.push(Affine::constant(v));
            b0.push((v, v));
        }
        chan_expr.push(e0);
        chan_bounds.push(b0);
    }
    let mut c_soc_expr = Affine::constant(init.storage.c_soc);
    let mut c_sot_expr = Affine::constant(init.storage.c_sot);
    let mut p_sl_exprs = Vec::with_capacity(n);
    let mut t_br_exprs = Vec::with_capacity(n);
    let mut c_soc_exprs = Vec::with_capacity(n);
    let mut c_sot_exprs = Vec::with_capacity(n);
    let xi_vec: Vec<f64> = (0..n).map(|i| scenario.xi_forecast[i.min(23)]).collect();

    for i in 0..n {
        let w = scenario.w_forecast[i.min(23)];
        let xi = xi_vec[i];
        let u_bound: Vec<(f64, f64)> = (0..5)
            .map(|j| {
                let lo = if U_GATE[j].is_some() {
                    config.u_min[j].min(0.0)
                } else {
                    config.u_min[j]
                };
                (lo, config.u_max[j])
            })
            .collect();

        // Linked-value expressions at a given past step index.
        let g_all_at = |t: usize| -> (Affine, (f64, f64)) {
            let mut e = Affine::constant(0.0);
            e.add_scaled(&Affine::var(z_vars[t][1]), params.g_ab_nom());
            e.add_scaled(&Affine::var(z_vars[t][2]), params.g_ec_nom());
            e.add_scaled(&Affine::var(u_vars[t][3]), 1.0);
            (
                e,
                (0.0, params.g_ab_nom() + params.g_ec_nom() + config.u_max[3]),
            )
        };
        let q_sl_at = |t: usize, ce: &[Vec<Affine>], cb: &[Vec<(f64, f64)>]| {
            let mut e = ce[t][i_qab].clone();
            e.add_scaled(&ce[t][i_qec], 1.0);
            e.add_scaled(&ce[t][i_qst], 1.0);
            let b = interval_add(interval_add(cb[t][i_qab], cb[t][i_qec]), cb[t][i_qst]);
            (e, b)
        };

        let mut next_expr: Vec<Affine> = vec![Affine::default(); layout.len()];
        let mut next_bound: Vec<(f64, f64)> = vec![(0.0, 0.0); layout.len()];
        match model {
            DayAheadModel::Relu(net) => {
                for (unit, pred) in &net.units {
                    let spec = pred.spec();
                    let n_in = spec.n_inputs();
                    let mut x_expr = vec![Affine::default(); n_in];
                    let mut x_lo = vec![0.0; n_in];
                    let mut x_hi = vec![0.0; n_in];
                    let names = ies_core::hybrid::output_channel_names(
                        ies_core::TimeScale::LongTerm,
                        *unit,
                    );
                    let mut put = |col: usize,
                                   e_phys: Affine,
                                   b_phys: (f64, f64),
                                   slope: f64,
                                   a_min: f64,
                                   x_expr: &mut Vec<Affine>,
                                   x_lo: &mut Vec<f64>,
                                   x_hi: &mut Vec<f64>| {
                        let mut e = Affine::constant(-a_min * slope);
                        e.add_scaled(&e_phys, slope);
                        e.compress();
                        let (mut lo, mut hi) =
                            ((b_phys.0 - a_min) * slope, (b_phys.1 - a_min) * slope);
                        if lo > hi {
                            std::mem::swap(&mut lo, &mut hi);
                        }
                        x_expr[col] = e;
                        x_lo[col] = lo;
                        x_hi[col] = hi;
                    };
                    for c in 0..spec.outputs.len() {
                        let ch = find(*unit, names[c]);
                        let sc = pred.model.out_scaler.clone();
                        for lag in 0..=spec.d_o {
                            let col = spec.out_index(c, lag);
                            let t = if lag > i { 0 } else { i - lag };
                            put(
                                col,
                                chan_expr[t][ch].clone(),
                                chan_bounds[t][ch],
                                sc.slope(c),
                                sc.a_min[c],
                                &mut x_expr,
                                &mut x_lo,
                                &mut x_hi,
                            );
                        }
                    }
                    for c in 0..spec.inputs_cont.len() {
                        let uj = unit_u_index(*unit);
                        let col_s = pred.scaler_col(0, c);
                        let slope = pred.model.in_scaler.slope(col_s);
                        let a_min = pred.model.in_scaler.a_min[col_s];
                        for lag in 0..=spec.d_u {
                            let col = spec.cont_index(c, lag);
                            let (e, b) = if lag > i {
                                (
                                    Affine::constant(init.u_prev[uj]),
                                    (init.u_prev[uj], init.u_prev[uj]),
                                )
                            } else {
                                (Affine::var(u_vars[i - lag][uj]), u_bound[uj])
                            };
                            put(col, e, b, slope, a_min, &mut x_expr, &mut x_lo, &mut x_hi);
                        }
                    }
                    for c in 0..spec.inputs_bin.len() {
                        let zj = unit_z_index(*unit);
                        let col_s = pred.scaler_col(1, c);
                        let slope = pred.model.in_scaler.slope(col_s);
                        let a_min = pred.model.in_scaler.a_min[col_s];
                        for lag in 0..=spec.d_z {
                            let col = spec.bin_index(c, lag);
                            let (e, b) = if lag > i {
                                (
                                    Affine::constant(init.z_prev[zj]),
                                    (init.z_prev[zj], init.z_prev[zj]),
                                )
                            } else {
                                (Affine::var(z_vars[i - lag][zj]), (0.0, 1.0))
                            };
                            put(col, e, b, slope, a_min, &mut x_expr, &mut x_lo, &mut x_hi);
                        }
                    }
                    for c in 0..spec.disturbances.len() {
                        let wj = match (unit, c) {
                            (UnitId::Pv, 0) | (UnitId::Bd, 0) => 0,
                            (UnitId::Pv, 1) => 1,
                            (UnitId::Bd, 1) => 3,
                            _ => unreachable!(),
                        };
                        for lag in 0..=spec.d_u {
                            let col = spec.dist_index(c, lag);
                            let t = if lag > i { 0 } else { i - lag };
                            let val = scenario.w_forecast[t.min(23)][wj];
                            let s = pred.model.in_scaler.scale_value(pred.scaler_col(2, c), val);
                            x_expr[col] = Affine::constant(s);
                            x_lo[col] = s;
                            x_hi[col] = s;
                        }
                    }
                    for c in 0..spec.linked.len() {
                        let col_s = pred.scaler_col(3, c);
                        let slope = pred.model.in_scaler.slope(col_s);
                        let a_min = pred.model.in_scaler.a_min[col_s];
                        for lag in 0..=spec.d_u {
                            let col = spec.linked_index(c, lag);
                            let t = if lag > i { 0 } else { i - lag };
                            let (e, b) = match *unit {
                                UnitId::Pmp => {
                                    if lag > i {
                                        let v = init.z_prev[1] * params.g_ab_nom()
                                            + init.z_prev[2] * params.g_ec_nom()
                                            + init.u_prev[3];
                                        (Affine::constant(v), (v, v))
                                    } else {
                                        g_all_at(t)
                                    }
                                }
                                UnitId::Bd => q_sl_at(t, &chan_expr, &chan_bounds),
                                _ => unreachable!(),
                            };
                            put(col, e, b, slope, a_min, &mut x_expr, &mut x_lo, &mut x_hi);
                        }
                    }

                    let bounds = propagate_bounds(spec, &pred.model.weights, &x_lo, &x_hi)
                        .map_err(|e| ScheduleError::Solver(e.to_string()))?;
                    let enc = encode_relu_network(
                        &mut milp,
                        spec,
                        &pred.model.weights,
                        &bounds,
                        &x_expr,
                        &format!("{}_{}", unit.key(), i),
                    )
                    .map_err(|e| ScheduleError::Solver(e.to_string()))?;
                    for (h, g, pre) in &enc.neurons {
                        neurons.push(NeuronEntry {
                            h_var: *h,
                            g_var: *g,
                            pre: pre.clone(),
                        });
                    }
                    for (c, name) in names.iter().enumerate() {
                        let ch = find(*unit, name);
                        let sc = &pred.model.out_scaler;
                        let range = sc.a_max[c] - sc.a_min[c];
                        let mut e = Affine::constant(sc.a_min[c]);
                        e.add_scaled(&enc.outputs[c], range);
                        e.compress();
                        let lo_p = sc.unscale_value(c, bounds.out_lo[c]);
                        let hi_p = sc.unscale_value(c, bounds.out_hi[c]);
                        next_expr[ch] = e;
                        next_bound[ch] = (lo_p.min(hi_p), lo_p.max(hi_p));
                    }
                }
            }
            DayAheadModel::Linear(lin) => {
                for ch in 0..layout.len() {
                    let mut e = Affine::constant(lin.constant[ch]);
                    if lin.z_of[ch] != usize::MAX {
                        e.add_scaled(&Affine::var(z_vars[i][lin.z_of[ch]]), lin.gain_z[ch]);
                    }
                    for j in 0..5 {
                        if lin.gain_u[ch][j] != 0.0 {
                            e.add_scaled(&Affine::var(u_vars[i][j]), lin.gain_u[ch][j]);
                        }
                    }
                    for j in 0..4 {
                        e.constant += lin.gain_w[ch][j] * w[j];
                    }
                    let mut lo = e.constant;
                    let mut hi = e.constant;
                    if lin.z_of[ch] != usize::MAX {
                        let g = lin.gain_z[ch];
                        if g >= 0.0 {
                            hi += g;
                        } else {
                            lo += g;
                        }
                    }
                    for j in 0..5 {
                        let g = lin.gain_u[ch][j];
                        if g >= 0.0 {
                            lo += g * u_bound[j].0;
                            hi += g * u_bound[j].1;
                        } else {
                            lo += g * u_bound[j].1;
                            hi += g * u_bound[j].0;
                        }
                    }
                    next_expr[ch] = e;
                    next_bound[ch] = (lo, hi);
                }
            }
        }

        // Output bounds where the propagated intervals do not imply them.
        for ch in 0..layout.len() {
            let (lo_b, hi_b) = next_bound[ch];
            if lo_b < config.o_min[ch] - 1e-9 {
                add_affine_row(
                    &mut milp,
                    format!("obound_lo_{ch}_{i}"),
                    next_expr[ch].clone(),
                    Sense::Ge,
                    config.o_min[ch],
                );
            }
            if hi_b > config.o_max[ch] + 1e-9 {
                add_affine_row(
                    &mut milp,
                    format!("obound_hi_{ch}_{i}"),
                    next_expr[ch].clone(),
                    Sense::Le,
                    config.o_max[ch],
                );
            }
            next_bound[ch] = (lo_b.max(config.o_min[ch]), hi_b.min(config.o_max[ch]));
        }

        // Storage integrators with the commanded circulation.
        c_soc_expr.add_scaled(&next_expr[i_iba], -1.0 / (params.ba.c_eb * params.ba.eta_pb));
        c_soc_expr.compress();
        c_sot_expr.add_scaled(&Affine::var(m_vars[i]), -2.0 * 3600.0 / params.cs.m_st);
        c_sot_expr.add_scaled(&Affine::var(u_vars[i][3]), 3600.0 / params.cs.m_st);
        c_sot_expr.compress();
        for (nm, expr, lo, hi) in [
            ("soc", &c_soc_expr, config.storage_band.0, config.storage_band.1),
            ("sot", &c_sot_expr, config.storage_band.0, config.storage_band.1),
        ] {
            add_affine_row(&mut milp, format!("{nm}_lo_{i}"), expr.clone(), Sense::Ge, lo);
            add_affine_row(&mut milp, format!("{nm}_hi_{i}"), expr.clone(), Sense::Le, hi);
        }

        // Electrical balance with slacks.
        let p_sl_expr = {
            let mut e = next_expr[i_pv].clone();
            e.add_scaled(&next_expr[i_fc], 1.0);
            e.add_scaled(&next_expr[i_mt], 1.0);
            e.add_scaled(&next_expr[i_ba], 1.0);
            e.add_scaled(&next_expr[i_cp], -1.0);
            e.add_scaled(&next_expr[i_pmp], -1.0);
            e.constant -= w[2];
            e.compress();
            e
        };
        {
            let mut row = p_sl_expr.clone();
            row.add_scaled(&Affine::var(y_eb_vars[i]), -(1.0 + xi));
            row.add_scaled(&Affine::var(eps_vars[i][0]), -1.0);
            row.add_scaled(&Affine::var(eps_vars[i][1]), 1.0);
            add_affine_row(&mut milp, format!("balance_{i}"), row, Sense::Eq, 0.0);
        }

        // Comfort band with slacks.
        let t_br_expr = next_expr[i_tbr].clone();
        {
            let mut hi = t_br_expr.clone();
            hi.add_scaled(&Affine::var(eps_vars[i][2]), -1.0);
            add_affine_row(
                &mut milp,
                format!("comfort_hi_{i}"),
                hi,
                Sense::Le,
                config.comfort.1 - config.comfort_margin,
            );
            let mut lo = t_br_expr.clone();
            lo.add_scaled(&Affine::var(eps_vars[i][3]), 1.0);
            add_affine_row(
                &mut milp,
                format!("comfort_lo_{i}"),
                lo,
                Sense::Ge,
                config.comfort.0 + config.comfort_margin,
            );
        }

        // Economic objective terms (minimize negative revenue).
        let p_se = scenario.prices.p_se[i.min(23)] / 1000.0;
        let p_cm = scenario.prices.p_cm[i.min(23)] / 1000.0;
        let p_mg = scenario.prices.p_mg / 1000.0;
        let p_f = scenario.prices.p_f;
        for (idx, c) in &p_sl_expr.terms {
            milp.lp.objective[*idx] -= alpha[0] * p_se * c;
        }
        milp.lp.obj_offset -= alpha[0] * (p_se * p_sl_expr.constant + p_mg * w[2]);
        milp.lp.objective[y_eb_vars[i]] -= alpha[0] * p_cm * xi.abs();
        milp.lp.objective[u_vars[i][0]] += alpha[0] * p_f * 3600.0;
        milp.lp.objective[u_vars[i][1]] += alpha[0] * p_f * 3600.0;

        p_sl_exprs.push(p_sl_expr);
        t_br_exprs.push(t_br_expr);
        c_soc_exprs.push(c_soc_expr.clone());
        c_sot_exprs.push(c_sot_expr.clone());
        chan_expr.push(next_expr);
        chan_bounds.push(next_bound);
        let _ = i_gst;
    }

    milp.lp
        .validate()
        .map_err(|e| ScheduleError::Solver(e.to_string()))?;
    Ok(BuiltSchedule {
        milp,
        horizon: n,
        u_vars,
        z_vars,
        m_vars,
        eps_vars,
        y_eb_vars,
        o_exprs: chan_expr.split_off(1),
        p_sl_exprs,
        t_br_exprs,
        c_soc_exprs,
        c_sot_exprs,
        neurons,
        xi: xi_vec,
        config: config.clone(),
    })
}

impl BuiltSchedule {
    pub fn n_binaries(&self) -> usize {
        self.milp.binaries.len()
    }

    pub fn n_gammas(&self) -> usize {
        self.neurons.len()
    }

    /// Forward-completion incumbent heuristic: round the binaries, clip
    /// the continuous inputs into their gated boxes, run the encoded
    /// networks forward, and pick slack-optimal baseline commitments.
    fn heuristic_candidate(&self, relax: &[f64]) -> Option<Vec<f64>> {
        let cfg = &self.config;
        let mut x = relax.to_vec();
        for i in 0..self.horizon {
            for j in 0..4 {
                let z = self.z_vars[i][j];
                x[z] = if x[z] >= 0.5 { 1.0 } else { 0.0 };
            }
            for j in 0..5 {
                let u = self.u_vars[i][j];
                let (lo, hi) = match U_GATE[j] {
                    Some(zi) => {
                        if x[self.z_vars[i][zi]] >= 0.5 {
                            (cfg.u_min[j], cfg.u_max[j])
                        } else {
                            (0.0, 0.0)
                        }
                    }
                    None => (cfg.u_min[j], cfg.u_max[j]),
                };
                x[u] = x[u].clamp(lo, hi);
                let span = cfg.u_max[j] - cfg.u_min[j].min(0.0);
                if cfg.du_max[j] < span && i > 0 {
                    let prev = x[self.u_vars[i - 1][j]];
                    x[u] = x[u].clamp(prev - cfg.du_max[j], prev + cfg.du_max[j]);
                }
            }
            x[self.m_vars[i]] = x[self.z_vars[i][3]] * x[self.u_vars[i][3]];
        }
        // Forward pass through the encoded neurons (build order is forward).
        for nrn in &self.neurons {
            let p = nrn.pre.value(&x);
            x[nrn.g_var] = if p > 0.0 { 1.0 } else { 0.0 };
            x[nrn.h_var] = p.max(0.0);
        }
        for i in 0..self.horizon {
            let p_sl = self.p_sl_exprs[i].value(&x);
            let xi = self.xi[i];
            let y_eb = (p_sl / (1.0 + xi)).clamp(0.0, cfg.y_eb_max);
            x[self.y_eb_vars[i]] = y_eb;
            let dev = p_sl - (1.0 + xi) * y_eb;
            x[self.eps_vars[i][0]] = dev.max(0.0);
            x[self.eps_vars[i][1]] = (-dev).max(0.0);
            let t_br = self.t_br_exprs[i].value(&x);
            let hi = cfg.comfort.1 - cfg.comfort_margin;
            let lo = cfg.comfort.0 + cfg.comfort_margin;
            x[self.eps_vars[i][2]] = (t_br - hi).max(0.0);
            x[self.eps_vars[i][3]] = (lo - t_br).max(0.0);
        }
        Some(x)
    }

    fn extract_plan(
        &self,
        sol: &ies_solver::branch_bound::MilpSolution,
        secs: f64,
    ) -> SchedulePlan {
        let x = &sol.x;
        let n = self.horizon;
        let mut plan = SchedulePlan {
            z: Vec::with_capacity(n),
            y_eb: Vec::with_capacity(n),
            c_es: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            y1: Vec::with_capacity(n),
            y2: Vec::with_capacity(n),
            objective: sol.objective,
            gap: sol.gap,
            gap_closed: sol.status == MilpStatus::Optimal,
            nodes: sol.nodes,
            pivots: sol.pivots,
            slack_total: 0.0,
            solve_seconds: secs,
        };
        for i in 0..n {
            plan.z.push([
                x[self.z_vars[i][0]].round(),
                x[self.z_vars[i][1]].round(),
                x[self.z_vars[i][2]].round(),
                x[self.z_vars[i][3]].round(),
            ]);
            plan.y_eb.push(x[self.y_eb_vars[i]]);
            plan.c_es
                .push([self.c_soc_exprs[i].value(x), self.c_sot_exprs[i].value(x)]);
            plan.u.push([
                x[self.u_vars[i][0]],
                x[self.u_vars[i][1]],
                x[self.u_vars[i][2]],
                x[self.u_vars[i][3]],
                x[self.u_vars[i][4]],
            ]);
            plan.y1.push(self.p_sl_exprs[i].value(x));
            plan.y2.push(self.t_br_exprs[i].value(x));
            for e in self.eps_vars[i] {
                plan.slack_total += x[e];
            }
        }
        plan
    }

    /// Evaluates the predicted o trajectory at a solution point; used by
    /// the plan-replay consistency checks.
    pub fn o_trajectory(&self, x: &[f64]) -> Vec<Vec<f64>> {
        self.o_exprs
            .iter()
            .map(|step| step.iter().map(|e| e.value(x)).collect())
            .collect()
    }
}

/// Solves a built problem and extracts the plan.
pub fn solve_day_ahead(built: &BuiltSchedule) -> Result<(SchedulePlan, Vec<f64>), ScheduleError> {
    let cfg = MilpConfig {
        gap: built.config.gap,
        node_limit: built.config.node_limit,
        pivot_limit: built.config.pivot_limit,
        time_limit: None,
    };
    let started = std::time::Instant::now();
    let h = |relax: &[f64]| built.heuristic_candidate(relax);
    let sol =
        solve_milp(&built.milp, &cfg, Some(&h)).map_err(|e| ScheduleError::Solver(e.to_string()))?;
    match sol.status {
        MilpStatus::Optimal | MilpStatus::GapNotClosed => {
            let plan = built.extract_plan(&sol, started.elapsed().as_secs_f64());
            Ok((plan, sol.x))
        }
        MilpStatus::Infeasible => Err(ScheduleError::Solver("scheduling MILP infeasible".into())),
        MilpStatus::Unbounded => Err(ScheduleError::Solver("scheduling MILP unbounded".into())),
    }
}
