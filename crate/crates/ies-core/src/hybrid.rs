//! Physics-informed hybrid networks: per-unit predictors wired together
//! with the pipeline algebra and closed-form storage integrators, at the
//! long-term (1 h), slow (1 min) and fast (5 s) scales.
//!
//! Histories are kept in the networks' scaled input space; all public
//! inputs and outputs are physical.

use crate::mlp::{forward_raw, History, MlpError};
use crate::model_io::UnitModel;
use crate::names::{TimeScale, UnitId};
use crate::plant::params::C_W;
use crate::plant::PlantParams;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HybridError {
    #[error("missing unit weights for scale {scale}: {units:?}")]
    MissingUnits { scale: TimeScale, units: Vec<UnitId> },
    #[error("model for {unit} trained at {got}, expected {want}")]
    WrongScale {
        unit: UnitId,
        got: TimeScale,
        want: TimeScale,
    },
    #[error("partition views are defined for the slow and fast scales only")]
    UnsupportedScale,
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

/// One unit's trained network with scaling helpers.
#[derive(Debug, Clone)]
pub struct UnitPredictor {
    pub model: UnitModel,
}

impl UnitPredictor {
    pub fn spec(&self) -> &crate::mlp::MlpSpec {
        &self.model.spec
    }

    /// Column of the input scaler for (group, channel); groups are
    /// 0 = continuous, 1 = binary, 2 = disturbance, 3 = linked.
    pub fn scaler_col(&self, group: usize, chan: usize) -> usize {
        let s = &self.model.spec;
        match group {
            0 => chan,
            1 => s.inputs_cont.len() + chan,
            2 => s.inputs_cont.len() + s.inputs_bin.len() + chan,
            _ => s.inputs_cont.len() + s.inputs_bin.len() + s.disturbances.len() + chan,
        }
    }

    pub fn scale_group(&self, group: usize, phys: &[f64]) -> Vec<f64> {
        phys.iter()
            .enumerate()
            .map(|(c, v)| self.model.in_scaler.scale_value(self.scaler_col(group, c), *v))
            .collect()
    }

    pub fn scale_outputs(&self, phys: &[f64]) -> Vec<f64> {
        phys.iter()
            .enumerate()
            .map(|(c, v)| self.model.out_scaler.scale_value(c, *v))
            .collect()
    }

    pub fn unscale_outputs(&self, scaled: &[f64]) -> Vec<f64> {
        scaled
            .iter()
            .enumerate()
            .map(|(c, v)| self.model.out_scaler.unscale_value(c, *v))
            .collect()
    }

    /// One-step prediction in physical units from a scaled history.
    pub fn predict(
        &self,
        hist: &History,
        u: &[f64],
        z: &[f64],
        w: &[f64],
        v: &[f64],
    ) -> Result<Vec<f64>, MlpError> {
        let x = hist.input_vector(
            self.spec(),
            &self.scale_group(0, u),
            &self.scale_group(1, z),
            &self.scale_group(2, w),
            &self.scale_group(3, v),
        );
        let o_scaled = forward_raw(self.spec(), &self.model.weights, &x, None)?;
        Ok(self.unscale_outputs(&o_scaled))
    }
}

/// Storage capacity states carried by the hybrid nets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageState {
    pub c_soc: f64,
    pub c_sot: f64,
    pub c_sth: f64,
    pub c_stc: f64,
}

impl StorageState {
    pub fn tank_temps(&self, p: &PlantParams) -> (f64, f64) {
        let mass_hot = ((1.0 - self.c_sot) * p.cs.m_st).max(p.cs.min_mass);
        let mass_cold = (self.c_sot * p.cs.m_st).max(p.cs.min_mass);
        (self.c_sth / mass_hot, self.c_stc / mass_cold)
    }
}

/// A composed multi-unit predictor at one time scale.
#[derive(Debug, Clone)]
pub struct HybridNet {
    pub scale: TimeScale,
    pub units: BTreeMap<UnitId, UnitPredictor>,
    pub params: PlantParams,
}

/// Rolling prediction state of a hybrid net: per-unit scaled histories,
/// storage states and the mixing fallback memory.
#[derive(Debug, Clone)]
pub struct HybridState {
    pub histories: BTreeMap<UnitId, History>,
    pub storage: StorageState,
    pub last_t_rec: f64,
    pub last_t_slc: f64,
    /// Latest unit outputs in physical units.
    pub outputs: BTreeMap<UnitId, Vec<f64>>,
}

/// Trained units required at a scale.
pub fn trained_units(scale: TimeScale) -> Vec<UnitId> {
    match scale {
        TimeScale::LongTerm => UnitId::ALL.to_vec(),
        _ => UnitId::ALL
            .iter()
            .copied()
            .filter(|u| *u != UnitId::Cs)
            .collect(),
    }
}

/// Measurement layout of the trailing `o` block of the y vector:
/// (unit, channel name) per column.
pub fn o_layout(scale: TimeScale) -> Vec<(UnitId, &'static str)> {
    use crate::names::*;
    match scale {
        TimeScale::LongTerm => vec![
            (UnitId::Pv, P_PV),
            (UnitId::Fc, P_FC),
            (UnitId::Ba, P_BA),
            (UnitId::Ba, I_BA),
            (UnitId::Ma, P_MT),
            (UnitId::Ma, Q_AB),
            (UnitId::Ec, P_CP),
            (UnitId::Ec, Q_EC),
            (UnitId::Pmp, P_PMP),
            (UnitId::Bd, T_BR),
            (UnitId::Cs, Q_ST),
            (UnitId::Cs, G_ST),
        ],
        _ => vec![
            (UnitId::Pv, P_PV),
            (UnitId::Fc, P_FC),
            (UnitId::Ba, P_BA),
            (UnitId::Ba, I_BA),
            (UnitId::Ma, P_MT),
            (UnitId::Ma, T_AB),
            (UnitId::Ec, P_CP),
            (UnitId::Ec, T_EC),
            (UnitId::Pmp, P_PMP),
            (UnitId::Bd, T_RE),
            (UnitId::Bd, T_BR),
            (UnitId::Cs, T_CP),
            (UnitId::Cs, T_HP),
        ],
    }
}

/// Width of the full measurement vector y = [P_sl, t_br, C_soc, C_sot, o].
pub fn y_width(scale: TimeScale) -> usize {
    4 + o_layout(scale).len()
}

/// Output channel names of a unit at a scale (spec order).
pub fn output_channel_names(scale: TimeScale, unit: UnitId) -> Vec<&'static str> {
    use crate::names::*;
    match (scale, unit) {
        (TimeScale::LongTerm, UnitId::Ma) => vec![P_MT, Q_AB],
        (TimeScale::LongTerm, UnitId::Ec) => vec![P_CP, Q_EC],
        (TimeScale::LongTerm, UnitId::Bd) => vec![T_BR],
        (TimeScale::LongTerm, UnitId::Cs) => vec![Q_ST, G_ST],
        (_, UnitId::Ma) => vec![P_MT, T_AB],
        (_, UnitId::Ec) => vec![P_CP, T_EC],
        (_, UnitId::Bd) => vec![T_RE, T_BR],
        (_, UnitId::Cs) => vec![T_CP, T_HP, Q_ST, G_ST],
        (_, UnitId::Pv) => vec![P_PV],
        (_, UnitId::Fc) => vec![P_FC],
        (_, UnitId::Ba) => vec![P_BA, I_BA],
        (_, UnitId::Pmp) => vec![P_PMP],
    }
}

/// Linked-input values resolved by one hybrid step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HybridLinks {
    pub q_sl: f64,
    pub g_all: f64,
    pub g_sl: f64,
    pub g_st: f64,
    pub t_sl: f64,
    pub t_rec: f64,
    pub t_slc: f64,
    pub t_hp: f64,
    pub t_cp: f64,
    pub q_st: f64,
}

/// Composes the trained unit networks for a scale into one predictor.
pub fn assemble(
    scale: TimeScale,
    models: Vec<UnitModel>,
    params: PlantParams,
) -> Result<HybridNet, HybridError> {
    let mut units = BTreeMap::new();
    for m in models {
        if m.scale != scale {
            return Err(HybridError::WrongScale {
                unit: m.unit,
                got: m.scale,
                want: scale,
            });
        }
        units.insert(m.unit, UnitPredictor { model: m });
    }
    let missing: Vec<UnitId> = trained_units(scale)
        .into_iter()
        .filter(|u| !units.contains_key(u))
        .collect();
    if !missing.is_empty() {
        return Err(HybridError::MissingUnits {
            scale,
            units: missing,
        });
    }
    Ok(HybridNet {
        scale,
        units,
        params,
    })
}

impl HybridNet {
    pub fn dt(&self) -> f64 {
        self.scale.dt()
    }

    /// Per-unit slices of the system input vector. `u` is the 5-vector
    /// [G_ff, G_fm, N_ec, G_stu, P_bar] at the long-term scale and the
    /// 7-vector [G_ff, G_fm, G_ab, N_ec, G_ec, G_stu, P_bar] otherwise.
    pub fn unit_u(&self, unit: UnitId, u: &[f64]) -> Vec<f64> {
        let long = self.scale == TimeScale::LongTerm;
        match unit {
            UnitId::Fc => vec![u[0]],
            UnitId::Ma => {
                if long {
                    vec![u[1]]
                } else {
                    vec![u[1], u[2]]
                }
            }
            UnitId::Ec => {
                if long {
                    vec![u[2]]
                } else {
                    vec![u[3], u[4]]
                }
            }
            UnitId::Cs => {
                if long {
                    vec![u[3]]
                } else {
                    vec![u[5]]
                }
            }
            UnitId::Ba => {
                if long {
                    vec![u[4]]
                } else {
                    vec![u[6]]
                }
            }
            UnitId::Pv | UnitId::Pmp | UnitId::Bd => vec![],
        }
    }

    pub fn unit_z(&self, unit: UnitId, z: &[f64]) -> Vec<f64> {
        match unit {
            UnitId::Fc => vec![z[0]],
            UnitId::Ma => vec![z[1]],
            UnitId::Ec => vec![z[2]],
            UnitId::Cs => vec![z[3]],
            _ => vec![],
        }
    }

    pub fn unit_w(&self, unit: UnitId, w: &[f64]) -> Vec<f64> {
        match unit {
            UnitId::Pv => vec![w[0], w[1]],
            UnitId::Bd => vec![w[0], w[3]],
            _ => vec![],
        }
    }

    /// Commanded signed storage circulation at this scale.
    pub fn commanded_g_st(&self, u: &[f64], z: &[f64]) -> f64 {
        let g_stu = if self.scale == TimeScale::LongTerm { u[3] } else { u[5] };
        (2.0 * z[3] - 1.0) * g_stu
    }

    /// Physical gate shared with the plant: an empty cold tank cannot
    /// discharge and a full one cannot charge.
    fn gate_g_st(&self, g_st: f64, c_sot: f64) -> f64 {
        if (g_st > 0.0 && c_sot <= 0.0) || (g_st < 0.0 && c_sot >= 1.0) {
            0.0
        } else {
            g_st
        }
    }

    /// Resolves the linked inputs from current outputs and applied inputs.
    pub fn resolve_links(&self, state: &HybridState, u: &[f64], z: &[f64]) -> HybridLinks {
        let p = &self.params;
        if self.scale == TimeScale::LongTerm {
            // Streamlined 1-hour wiring: cooling powers sum directly and the
            // circulated flow uses nominal chiller flows gated by z.
            let ma = &state.outputs[&UnitId::Ma];
            let ec = &state.outputs[&UnitId::Ec];
            let cs = &state.outputs[&UnitId::Cs];
            let q_ab = ma[1];
            let q_ec = ec[1];
            let q_st = cs[0];
            let g_st = cs[1];
            HybridLinks {
                q_sl: q_ab + q_ec + q_st,
                g_all: z[1] * p.g_ab_nom() + z[2] * p.g_ec_nom() + u[3],
                g_st,
                q_st,
                ..Default::default()
            }
        } else {
            let (t_sth, t_stc) = state.storage.tank_temps(p);
            let g_ab = u[2];
            let g_ec = u[4];
            let g_st = self.commanded_g_st(u, z);
            let t_ab = state.outputs[&UnitId::Ma][1];
            let t_ec = state.outputs[&UnitId::Ec][1];
            let t_re = state.outputs[&UnitId::Bd][0];
            let g_chill = g_ab + g_ec;
            let g_sl = g_chill + g_st;
            let t_hp = z[3] * t_re + (1.0 - z[3]) * t_sth;
            let (t_rec, t_slc) = if g_chill > 1e-9 {
                (
                    (g_sl * t_re - g_st * t_hp) / g_chill,
                    (g_ab * t_ab + g_ec * t_ec) / g_chill,
                )
            } else {
                (state.last_t_rec, state.last_t_slc)
            };
            let t_cp = z[3] * t_stc + (1.0 - z[3]) * t_slc;
            let t_sl = if g_sl > 1e-9 {
                (g_ab * t_ab + g_ec * t_ec + g_st * t_cp) / g_sl
            } else {
                t_slc
            };
            let q_st = g_st * C_W * (t_hp - t_cp);
            HybridLinks {
                q_sl: g_sl.max(0.0) * C_W * (t_re - t_sl),
                g_all: g_ab + g_ec + u[5],
                g_sl,
                g_st,
                t_sl,
                t_rec,
                t_slc,
                t_hp,
                t_cp,
                q_st,
            }
        }
    }

    /// Linked-input channels of a unit from resolved links.
    pub fn unit_v(&self, unit: UnitId, links: &HybridLinks) -> Vec<f64> {
        match (self.scale, unit) {
            (TimeScale::LongTerm, UnitId::Pmp) => vec![links.g_all],
            (TimeScale::LongTerm, UnitId::Bd) => vec![links.q_sl],
            (TimeScale::LongTerm, _) => vec![],
            (_, UnitId::Ma) | (_, UnitId::Ec) => vec![links.t_rec],
            (_, UnitId::Pmp) => vec![links.g_all],
            (_, UnitId::Bd) => vec![links.t_sl, links.g_sl.max(0.0)],
            _ => vec![],
        }
    }

    /// Advances the composed predictor one step: evaluates every unit
    /// network, resolves the algebra, integrates the storage states and
    /// returns the measurement vector y(k+1) = [P_sl, t_br, C_soc, C_sot, o].
    pub fn hybrid_step(
        &self,
        state: &HybridState,
        u: &[f64],
        z: &[f64],
        w: &[f64],
    ) -> Result<(HybridState, Vec<f64>, HybridLinks), HybridError> {
        let links = self.resolve_links(state, u, z);
        let p = &self.params;
        let dt = self.dt();
        let mut next = state.clone();

        // Predict every trained unit one step ahead.
        let mut new_outputs: BTreeMap<UnitId, Vec<f64>> = BTreeMap::new();
        for (unit, pred) in &self.units {
            let uu = self.unit_u(*unit, u);
            let zz = self.unit_z(*unit, z);
            let ww = self.unit_w(*unit, w);
            let vv = self.unit_v(*unit, &links);
            let hist = &state.histories[unit];
            let o = pred.predict(hist, &uu, &zz, &ww, &vv)?;
            let h = next.histories.get_mut(unit).unwrap();
            h.advance(
                &pred.scale_outputs(&o),
                &pred.scale_group(0, &uu),
                &pred.scale_group(1, &zz),
                &pred.scale_group(2, &ww),
                &pred.scale_group(3, &vv),
            );
            new_outputs.insert(*unit, o);
        }

        // The capacity states always integrate the commanded, capacity-gated
        // circulation (closed-form storage physics); the trained 1-hour CS
        // network still supplies the reported Q_st/G_st output channels.
        let g_st_next = if self.scale == TimeScale::LongTerm {
            let commanded = self.gate_g_st(self.commanded_g_st(u, z), state.storage.c_sot);
            if commanded == 0.0 && self.commanded_g_st(u, z) != 0.0 {
                // Saturated tank: the physical outputs are zero too.
                let cs = new_outputs.get_mut(&UnitId::Cs).unwrap();
                cs[0] = 0.0;
                cs[1] = 0.0;
            }
            commanded
        } else {
            let (t_sth, t_stc) = state.storage.tank_temps(p);
            let t_re_next = new_outputs[&UnitId::Bd][0];
            let g_st = self.gate_g_st(self.commanded_g_st(u, z), state.storage.c_sot);
            let t_hp = z[3] * t_re_next + (1.0 - z[3]) * t_sth;
            // Chiller-side mixing for the next step uses the next-step
            // predicted outlet temperatures.
            let g_chill = u[2] + u[4];
            let t_slc_next = if g_chill > 1e-9 {
                (u[2] * new_outputs[&UnitId::Ma][1] + u[4] * new_outputs[&UnitId::Ec][1]) / g_chill
            } else {
                links.t_slc
            };
            let t_cp = z[3] * t_stc + (1.0 - z[3]) * t_slc_next;
            new_outputs.insert(
                UnitId::Cs,
                vec![t_cp, t_hp, g_st * C_W * (t_hp - t_cp), g_st],
            );
            g_st
        };

        // Storage integrators over this scale's interval, driven by the
        // predicted battery current and storage flow.
        let i_ba_next = new_outputs[&UnitId::Ba][1];
        next.storage.c_soc -= i_ba_next * dt / (3600.0 * p.ba.c_eb * p.ba.eta_pb);
        next.storage.c_sot -= g_st_next * dt / p.cs.m_st;
        next.storage.c_sth += g_st_next * links.t_hp * dt;
        next.storage.c_stc -= g_st_next * links.t_cp * dt;
        next.storage.c_soc = next.storage.c_soc.clamp(0.0, 1.0);
        next.storage.c_sot = next.storage.c_sot.clamp(0.0, 1.0);
        next.storage.c_sth = next.storage.c_sth.max(0.0);
        next.storage.c_stc = next.storage.c_stc.max(0.0);

        let g_chill_now = if self.scale == TimeScale::LongTerm {
            1.0
        } else {
            u[2] + u[4]
        };
        if links.t_rec.is_finite() && g_chill_now > 1e-9 {
            next.last_t_rec = links.t_rec;
            next.last_t_slc = links.t_slc;
        }

        // Assemble y(k+1).
        let p_d = w[2];
        let o_cols = o_layout(self.scale);
        let val = |unit: UnitId, name: &str| -> f64 {
            let names = output_channel_names(self.scale, unit);
            let idx = names.iter().position(|n| *n == name).unwrap();
            new_outputs[&unit][idx]
        };
        let p_sl = val(UnitId::Pv, crate::names::P_PV)
            + val(UnitId::Fc, crate::names::P_FC)
            + val(UnitId::Ma, crate::names::P_MT)
            + val(UnitId::Ba, crate::names::P_BA)
            - val(UnitId::Ec, crate::names::P_CP)
            - val(UnitId::Pmp, crate::names::P_PMP)
            - p_d;
        let mut y = Vec::with_capacity(4 + o_cols.len());
        y.push(p_sl);
        y.push(val(UnitId::Bd, crate::names::T_BR));
        y.push(next.storage.c_soc);
        y.push(next.storage.c_sot);
        for (unit, name) in &o_cols {
            y.push(val(*unit, name));
        }

        next.outputs = new_outputs;
        Ok((next, y, links))
    }

    /// Multi-step open-loop rollout under per-step exogenous inputs.
    pub fn rollout(
        &self,
        state: &HybridState,
        inputs: &[(Vec<f64>, Vec<f64>, Vec<f64>)],
    ) -> Result<Vec<Vec<f64>>, HybridError> {
        let mut st = state.clone();
        let mut ys = Vec::with_capacity(inputs.len());
        for (u, z, w) in inputs {
            let (s2, y, _) = self.hybrid_step(&st, u, z, w)?;
            st = s2;
            ys.push(y);
        }
        Ok(ys)
    }

    /// Bootstraps a prediction state by padding every history window with a
    /// constant snapshot (first measurement), per the history design rule.
    pub fn bootstrap_state(
        &self,
        outputs: &BTreeMap<UnitId, Vec<f64>>,
        u: &[f64],
        z: &[f64],
        w: &[f64],
        storage: StorageState,
    ) -> HybridState {
        let mut state = HybridState {
            histories: BTreeMap::new(),
            storage,
            last_t_rec: 12.0,
            last_t_slc: 7.0,
            outputs: outputs.clone(),
        };
        if self.scale != TimeScale::LongTerm && !state.outputs.contains_key(&UnitId::Cs) {
            let (t_sth, t_stc) = storage.tank_temps(&self.params);
            let t_re = outputs[&UnitId::Bd][0];
            let g_st = self.commanded_g_st(u, z);
            let t_hp = z[3] * t_re + (1.0 - z[3]) * t_sth;
            let t_cp = z[3] * t_stc + (1.0 - z[3]) * 7.0;
            state
                .outputs
                .insert(UnitId::Cs, vec![t_cp, t_hp, g_st * C_W * (t_hp - t_cp), g_st]);
        }
        let links = self.resolve_links(&state, u, z);
        let mut histories = BTreeMap::new();
        for (unit, pred) in &self.units {
            let mut h = History::new(pred.spec());
            h.bootstrap(
                &pred.scale_outputs(&state.outputs[unit]),
                &pred.scale_group(0, &self.unit_u(*unit, u)),
                &pred.scale_group(1, &self.unit_z(*unit, z)),
                &pred.scale_group(2, &self.unit_w(*unit, w)),
                &pred.scale_group(3, &self.unit_v(*unit, &links)),
            );
            histories.insert(*unit, h);
        }
        state.histories = histories;
        state
    }
}

/// Index maps splitting the outputs and continuous inputs into the
/// cooling-dominant (slow) and power-dominant (fast) subsystems.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionView {
    pub slow_units: Vec<UnitId>,
    pub fast_units: Vec<UnitId>,
    /// Indices into the 7-vector u for u_ss = [G_fm, G_ab, N_ec, G_ec, G_stu].
    pub u_slow_idx: Vec<usize>,
    /// Indices into the 7-vector u for u_sf = [G_ff, P_bar].
    pub u_fast_idx: Vec<usize>,
    /// Columns of the o block belonging to slow units.
    pub o_slow_idx: Vec<usize>,
    /// Columns of the o block belonging to fast units.
    pub o_fast_idx: Vec<usize>,
}

/// Splits a slow or fast hybrid net's measurement layout into the
/// cooling-dominant and power-dominant subsystems.
pub fn partition_views(net: &HybridNet) -> Result<PartitionView, HybridError> {
    if net.scale == TimeScale::LongTerm {
        return Err(HybridError::UnsupportedScale);
    }
    let slow_units = vec![UnitId::Ma, UnitId::Ec, UnitId::Pmp, UnitId::Bd, UnitId::Cs];
    let fast_units = vec![UnitId::Pv, UnitId::Fc, UnitId::Ba];
    let layout = o_layout(net.scale);
    let o_slow_idx: Vec<usize> = layout
        .iter()
        .enumerate()
        .filter(|(_, (u, _))| slow_units.contains(u))
        .map(|(i, _)| i)
        .collect();
    let o_fast_idx: Vec<usize> = layout
        .iter()
        .enumerate()
        .filter(|(_, (u, _))| fast_units.contains(u))
        .map(|(i, _)| i)
        .collect();
    Ok(PartitionView {
        slow_units,
        fast_units,
        u_slow_idx: vec![1, 2, 3, 4, 5],
        u_fast_idx: vec![0, 6],
        o_slow_idx,
        o_fast_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::{table_preset, MlpWeights};
    use crate::model_io::WEIGHTS_FORMAT_VERSION;
    use crate::scale::MinMaxParams;

    fn zero_model(scale: TimeScale, unit: UnitId) -> UnitModel {
        let spec = table_preset(scale, unit).unwrap();
        let weights = MlpWeights::zeros(&spec);
        let n_in = spec.inputs_cont.len()
            + spec.inputs_bin.len()
            + spec.disturbances.len()
            + spec.linked.len();
        let n_out = spec.outputs.len();
        UnitModel {
            format_version: WEIGHTS_FORMAT_VERSION,
            unit,
            scale,
            seed: 0,
            spec,
            weights,
            in_scaler: MinMaxParams {
                a_min: vec![0.0; n_in],
                a_max: vec![1.0; n_in],
                constant: vec![false; n_in],
            },
            out_scaler: MinMaxParams {
                a_min: vec![0.0; n_out],
                a_max: vec![1.0; n_out],
                constant: vec![false; n_out],
            },
        }
    }

    fn zero_net(scale: TimeScale) -> HybridNet {
        let models = trained_units(scale)
            .into_iter()
            .map(|u| zero_model(scale, u))
            .collect();
        assemble(scale, models, PlantParams::default()).unwrap()
    }

    fn zero_state(net: &HybridNet) -> HybridState {
        let mut outputs = BTreeMap::new();
        for u in trained_units(net.scale) {
            let n = output_channel_names(net.scale, u).len();
            outputs.insert(u, vec![0.0; n]);
        }
        let storage = StorageState {
            c_soc: 0.5,
            c_sot: 0.5,
            c_sth: 90_000.0,
            c_stc: 52_500.0,
        };
        let u = if net.scale == TimeScale::LongTerm {
            vec![0.0; 5]
        } else {
            vec![0.0; 7]
        };
        net.bootstrap_state(&outputs, &u, &[1.0; 4], &[30.0, 600.0, 60.0, 95.0], storage)
    }

    #[test]
    fn missing_units_are_listed() {
        let models = vec![zero_model(TimeScale::LongTerm, UnitId::Pv)];
        match assemble(TimeScale::LongTerm, models, PlantParams::default()) {
            Err(HybridError::MissingUnits { units, .. }) => {
                assert_eq!(units.len(), 7);
                assert!(units.contains(&UnitId::Cs));
            }
            other => panic!("expected missing units, got {other:?}"),
        }
    }

    #[test]
    fn long_term_q_sl_input_is_exact_sum_of_cooling_predictions() {
        let net = zero_net(TimeScale::LongTerm);
        let state = zero_state(&net);
        let u = vec![0.0; 5];
        let w = [30.0, 600.0, 60.0, 95.0];
        let links0 = net.resolve_links(&state, &u, &[0.0; 4]);
        assert_eq!(links0.q_sl, 0.0, "all-zero nets give zero cooling sum");
        let (state2, y, _) = net.hybrid_step(&state, &u, &[0.0; 4], &w).unwrap();
        let layout = o_layout(TimeScale::LongTerm);
        let idx = |unit: UnitId, name: &str| {
            4 + layout
                .iter()
                .position(|(uu, nn)| *uu == unit && *nn == name)
                .unwrap()
        };
        let q_sum = y[idx(UnitId::Ma, crate::names::Q_AB)]
            + y[idx(UnitId::Ec, crate::names::Q_EC)]
            + y[idx(UnitId::Cs, crate::names::Q_ST)];
        let links_next = net.resolve_links(&state2, &u, &[0.0; 4]);
        assert!((links_next.q_sl - q_sum).abs() < 1e-12);
    }

    #[test]
    fn zero_iba_prediction_keeps_soc() {
        let net = zero_net(TimeScale::LongTerm);
        let state = zero_state(&net);
        let (next, y, _) = net
            .hybrid_step(&state, &[0.0; 5], &[0.0; 4], &[30.0, 600.0, 60.0, 95.0])
            .unwrap();
        assert_eq!(next.storage.c_soc, state.storage.c_soc);
        assert_eq!(y[2], state.storage.c_soc);
    }

    #[test]
    fn partition_views_cover_everything() {
        let net = zero_net(TimeScale::Fast);
        let view = partition_views(&net).unwrap();
        let mut all: Vec<usize> = view
            .u_slow_idx
            .iter()
            .chain(view.u_fast_idx.iter())
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4, 5, 6]);
        let layout = o_layout(TimeScale::Fast);
        let mut o_all: Vec<usize> = view
            .o_slow_idx
            .iter()
            .chain(view.o_fast_idx.iter())
            .copied()
            .collect();
        o_all.sort_unstable();
        assert_eq!(o_all, (0..layout.len()).collect::<Vec<_>>());
        // o_ff covers exactly the PV, FC, BA columns.
        for i in &view.o_fast_idx {
            assert!(matches!(layout[*i].0, UnitId::Pv | UnitId::Fc | UnitId::Ba));
        }
        // Slow and fast nets share the same partition rule.
        let net_s = zero_net(TimeScale::Slow);
        let view_s = partition_views(&net_s).unwrap();
        assert_eq!(view_s.u_slow_idx, view.u_slow_idx);
        assert_eq!(view_s.slow_units, view.slow_units);
    }

    #[test]
    fn long_term_rejects_partition() {
        let net = zero_net(TimeScale::LongTerm);
        assert!(matches!(
            partition_views(&net),
            Err(HybridError::UnsupportedScale)
        ));
    }

    #[test]
    fn assembly_is_deterministic() {
        let net = zero_net(TimeScale::Slow);
        let state = zero_state(&net);
        let u = vec![0.001, 0.005, 3.0, 2800.0, 2.0, 0.5, 5.0];
        let a = net
            .hybrid_step(&state, &u, &[1.0; 4], &[28.0, 500.0, 55.0, 90.0])
            .unwrap();
        let b = net
            .hybrid_step(&state, &u, &[1.0; 4], &[28.0, 500.0, 55.0, 90.0])
            .unwrap();
        assert_eq!(a.1, b.1);
    }
}
