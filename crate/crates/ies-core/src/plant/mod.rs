//! Ground-truth multi-rate simulator of the eight operating units and the
//! pipeline/microgrid interconnections between them.
//!
//! The whole plant is one ODE: the pipeline algebra (mixing temperatures,
//! flows, delivered powers) is resolved inside the derivative so that the
//! fixed-step RK4 integration converges at full order for the coupled
//! system.

pub mod params;
pub mod probe;
pub mod units;

pub use params::{PlantParams, Range, C_W};
pub use probe::{probe_time_constants, ProbeResult};
pub use units::{unit_advance, unit_outputs, unit_step, UnitInputs, UnitState};

use crate::names::UnitId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("non-finite input for unit {unit}")]
    NonFiniteInput { unit: UnitId },
    #[error("step size {0} outside (0, 1] s")]
    BadDt(f64),
    #[error("macro step {0} s is not a positive multiple of the internal step {1} s")]
    BadMacroStep(f64, f64),
    #[error("probe response for {0} did not settle")]
    ProbeNotSettled(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Saturation and clamping flags raised during a step, consumed by the
/// controllers; stepping never fails on saturation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantFlags {
    pub c_soc_lo: bool,
    pub c_soc_hi: bool,
    pub c_sot_lo: bool,
    pub c_sot_hi: bool,
    pub input_clamped: bool,
    /// Supply flow went negative (storage charging exceeded chiller flow).
    pub supply_starved: bool,
}

impl PlantFlags {
    pub fn any_saturation(&self) -> bool {
        self.c_soc_lo || self.c_soc_hi || self.c_sot_lo || self.c_sot_hi
    }
}

/// Full plant state: all unit states plus storage capacities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub units: Vec<UnitState>,
    pub c_soc: f64,
    pub c_sot: f64,
    /// Hot tank heat capacity, kg*degC.
    pub c_sth: f64,
    /// Cold tank heat capacity, kg*degC.
    pub c_stc: f64,
    /// Seconds since midnight.
    pub clock: f64,
    /// Mixing fallback memory for t_rec/t_slc when both chiller flows stop.
    pub last_t_rec: f64,
    pub last_t_slc: f64,
    pub flags: PlantFlags,
}

impl PlantState {
    /// Plant at the nominal steady operating point.
    pub fn nominal(p: &PlantParams) -> PlantState {
        let units = UnitId::ALL
            .iter()
            .map(|&u| units::nominal_state(u, p))
            .collect();
        let c_sot = 0.5;
        PlantState {
            units,
            c_soc: 0.5,
            c_sot,
            c_sth: (1.0 - c_sot) * p.cs.m_st * 12.0,
            c_stc: c_sot * p.cs.m_st * 7.0,
            clock: 0.0,
            last_t_rec: 12.0,
            last_t_slc: 7.0,
            flags: PlantFlags::default(),
        }
    }

    pub fn unit(&self, id: UnitId) -> &UnitState {
        &self.units[UnitId::ALL.iter().position(|&u| u == id).unwrap()]
    }

    fn unit_mut(&mut self, id: UnitId) -> &mut UnitState {
        &mut self.units[UnitId::ALL.iter().position(|&u| u == id).unwrap()]
    }

    /// Stratified tank temperatures (hot, cold) inferred from heat capacities.
    pub fn tank_temps(&self, p: &PlantParams) -> (f64, f64) {
        let mass_hot = ((1.0 - self.c_sot) * p.cs.m_st).max(p.cs.min_mass);
        let mass_cold = (self.c_sot * p.cs.m_st).max(p.cs.min_mass);
        (self.c_sth / mass_hot, self.c_stc / mass_cold)
    }
}

/// Pipeline and microgrid interconnection values at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSet {
    pub g_sl: f64,
    pub g_all: f64,
    pub g_st: f64,
    pub t_rec: f64,
    pub t_slc: f64,
    pub t_sl: f64,
    pub t_hp: f64,
    pub t_cp: f64,
    pub p_sl: f64,
    pub q_sl: f64,
    pub q_ab: f64,
    pub q_ec: f64,
    pub q_st: f64,
}

/// Raw ingredients for the link algebra.
#[derive(Debug, Clone, Copy)]
pub struct LinkInputs {
    /// Chilled water flows, kg/s.
    pub g_ab: f64,
    pub g_ec: f64,
    /// Signed storage circulation flow (positive discharging).
    pub g_st: f64,
    /// Commanded storage flow magnitude.
    pub g_stu: f64,
    /// Discharge/charge switch.
    pub z_st: f64,
    /// Chiller outlet cooling states, kW.
    pub q_ab_state: f64,
    pub q_ec_state: f64,
    /// Building return water temperature, degC.
    pub t_re: f64,
    /// Tank temperatures (hot, cold), degC.
    pub t_sth: f64,
    pub t_stc: f64,
    /// Electrical powers, kW.
    pub p_pv: f64,
    pub p_fc: f64,
    pub p_mt: f64,
    pub p_ba: f64,
    pub p_cp: f64,
    pub p_pmp: f64,
    pub p_d: f64,
    /// Fallback mixing temperatures when both chiller flows stop.
    pub fallback_t_rec: f64,
    pub fallback_t_slc: f64,
}

const FLOW_EPS: f64 = 1e-9;

/// Resolves the water network and power balance from unit outputs and flows.
pub fn link_algebra(inp: &LinkInputs) -> LinkSet {
    let g_chill = inp.g_ab + inp.g_ec;
    let t_hp = inp.z_st * inp.t_re + (1.0 - inp.z_st) * inp.t_sth;
    let g_sl = g_chill + inp.g_st;

    let (t_rec, t_ab, t_ec, t_slc) = if g_chill > FLOW_EPS {
        let t_rec = (g_sl * inp.t_re - inp.g_st * t_hp) / g_chill;
        let t_ab = t_rec - inp.q_ab_state / (C_W * inp.g_ab.max(0.02));
        let t_ec = t_rec - inp.q_ec_state / (C_W * inp.g_ec.max(0.02));
        let t_slc = (inp.g_ab * t_ab + inp.g_ec * t_ec) / g_chill;
        (t_rec, t_ab, t_ec, t_slc)
    } else {
        // Both chiller flows stopped: hold the last defined mixing values.
        let t_rec = inp.fallback_t_rec;
        (t_rec, t_rec, t_rec, inp.fallback_t_slc)
    };

    let t_cp = inp.z_st * inp.t_stc + (1.0 - inp.z_st) * t_slc;
    let t_sl = if g_sl > FLOW_EPS {
        (inp.g_ab * t_ab + inp.g_ec * t_ec + inp.g_st * t_cp) / g_sl
    } else {
        t_slc
    };

    let q_ab = if g_chill > FLOW_EPS { inp.g_ab * C_W * (t_rec - t_ab) } else { 0.0 };
    let q_ec = if g_chill > FLOW_EPS { inp.g_ec * C_W * (t_rec - t_ec) } else { 0.0 };
    let q_st = inp.g_st * C_W * (t_hp - t_cp);
    let q_sl = g_sl.max(0.0) * C_W * (inp.t_re - t_sl);
    let g_all = inp.g_ab + inp.g_ec + inp.g_stu;
    let p_sl = inp.p_pv + inp.p_fc + inp.p_mt + inp.p_ba - inp.p_cp - inp.p_pmp - inp.p_d;

    LinkSet {
        g_sl,
        g_all,
        g_st: inp.g_st,
        t_rec,
        t_slc,
        t_sl,
        t_hp,
        t_cp,
        p_sl,
        q_sl,
        q_ab,
        q_ec,
        q_st,
    }
}

/// Closed-form storage update over `dt` seconds with constant rates,
/// saturating to valid ranges and raising boundary flags.
pub fn storage_integrate(
    state: &PlantState,
    p: &PlantParams,
    i_ba: f64,
    g_st: f64,
    t_hp: f64,
    t_cp: f64,
    dt: f64,
) -> PlantState {
    assert!(dt > 0.0, "storage_integrate needs dt > 0");
    let mut next = state.clone();
    next.c_soc -= i_ba * dt / (3600.0 * p.ba.c_eb * p.ba.eta_pb);
    next.c_sot -= g_st * dt / p.cs.m_st;
    next.c_sth += g_st * t_hp * dt;
    next.c_stc -= g_st * t_cp * dt;
    saturate_storage(&mut next);
    next
}

fn saturate_storage(st: &mut PlantState) {
    if st.c_soc < 0.0 {
        st.c_soc = 0.0;
        st.flags.c_soc_lo = true;
    } else if st.c_soc > 1.0 {
        st.c_soc = 1.0;
        st.flags.c_soc_hi = true;
    }
    if st.c_sot < 0.0 {
        st.c_sot = 0.0;
        st.flags.c_sot_lo = true;
    } else if st.c_sot > 1.0 {
        st.c_sot = 1.0;
        st.flags.c_sot_hi = true;
    }
    st.c_sth = st.c_sth.max(0.0);
    st.c_stc = st.c_stc.max(0.0);
}

/// System-level inputs of one macro step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantInputs {
    /// u = [G_ff, G_fm, G_ab, N_ec, G_ec, G_stu, P_bar].
    pub u: [f64; 7],
    /// z = [z_fc, z_ma, z_ec, z_st].
    pub z: [f64; 4],
    /// w = [t_a, S_ra, P_d, Q_o].
    pub w: [f64; 4],
}

impl PlantInputs {
    pub fn nominal(p: &PlantParams) -> PlantInputs {
        PlantInputs {
            u: p.u_nom,
            z: [1.0, 1.0, 1.0, 1.0],
            w: p.w_nom,
        }
    }
}

/// Outputs of one macro step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantOutputs {
    /// y = [P_sl, t_br].
    pub y: [f64; 2],
    /// All unit outputs concatenated in `UnitId::ALL` order.
    pub o: Vec<f64>,
    pub links: LinkSet,
    pub flags: PlantFlags,
}

/// Column names of the concatenated unit-output vector.
pub fn full_output_names() -> Vec<&'static str> {
    UnitId::ALL
        .iter()
        .flat_map(|&u| units::output_names(u).iter().copied())
        .collect()
}

// Fixed offsets of each unit's states in the packed vector, following
// UnitId::ALL order [Pv, Fc, Ba, Ma, Ec, Pmp, Cs, Bd].
const OFF_PV: usize = 0;
const OFF_FC: usize = 1;
const OFF_BA: usize = 2;
const OFF_MA: usize = 3;
const OFF_EC: usize = 5;
const OFF_PMP: usize = 7;
const OFF_CS: usize = 8;
const OFF_BD: usize = 9;
const OFF_STORAGE: usize = 11;

/// Number of ODE states (units plus the four storage states).
fn n_states() -> usize {
    OFF_STORAGE + 4
}

fn pack_state(st: &PlantState, x: &mut [f64]) {
    let mut at = 0;
    for us in &st.units {
        x[at..at + us.x.len()].copy_from_slice(&us.x);
        at += us.x.len();
    }
    x[at] = st.c_soc;
    x[at + 1] = st.c_sot;
    x[at + 2] = st.c_sth;
    x[at + 3] = st.c_stc;
}

/// The coupled plant derivative: resolves link algebra from the state
/// vector, then evaluates every unit ODE and the storage integrators.
fn plant_derivs(
    x: &[f64],
    p: &PlantParams,
    inp: &PlantInputs,
    fallback: (f64, f64),
    dx: &mut [f64],
) {
    let soc_at = OFF_STORAGE;
    let c_sot = x[soc_at + 1];
    let c_sth = x[soc_at + 2];
    let c_stc = x[soc_at + 3];

    let mass_hot = ((1.0 - c_sot) * p.cs.m_st).max(p.cs.min_mass);
    let mass_cold = (c_sot * p.cs.m_st).max(p.cs.min_mass);
    let t_sth = c_sth / mass_hot;
    let t_stc = c_stc / mass_cold;

    let links = link_algebra(&LinkInputs {
        g_ab: inp.u[2],
        g_ec: inp.u[4],
        g_st: x[OFF_CS],
        g_stu: inp.u[5],
        z_st: inp.z[3],
        q_ab_state: x[OFF_MA + 1],
        q_ec_state: x[OFF_EC + 1],
        t_re: x[OFF_BD + 1],
        t_sth,
        t_stc,
        p_pv: x[OFF_PV],
        p_fc: x[OFF_FC],
        p_mt: x[OFF_MA],
        p_ba: x[OFF_BA],
        p_cp: x[OFF_EC],
        p_pmp: x[OFF_PMP],
        p_d: inp.w[2],
        fallback_t_rec: fallback.0,
        fallback_t_slc: fallback.1,
    });

    // Inline unit derivatives (allocation-free; this runs four times per
    // internal substep).
    dx[OFF_PV] = (units::pv_power_ss(p, inp.w[0], inp.w[1]) - x[OFF_PV]) / p.pv.tau;
    dx[OFF_FC] = (inp.z[0] * units::fc_power_ss(p, inp.u[0]) - x[OFF_FC]) / p.fc.tau;
    dx[OFF_BA] = (inp.u[6] - x[OFF_BA]) / p.ba.tau;
    dx[OFF_MA] = (inp.z[1] * units::mt_power_ss(p, inp.u[1]) - x[OFF_MA]) / p.ma.tau_mt;
    dx[OFF_MA + 1] = (inp.z[1] * units::ab_cooling_ss(p, inp.u[1], inp.u[2], links.t_rec)
        - x[OFF_MA + 1])
        / p.ma.tau_ab;
    dx[OFF_EC] = (inp.z[2] * units::cp_power_ss(p, inp.u[3], links.t_rec) - x[OFF_EC]) / p.ec.tau_cp;
    dx[OFF_EC + 1] = (inp.z[2] * units::ec_cooling_ss(p, inp.u[3], inp.u[4], links.t_rec)
        - x[OFF_EC + 1])
        / p.ec.tau_q;
    dx[OFF_PMP] = (units::pmp_power_ss(p, links.g_all) - x[OFF_PMP]) / p.pmp.tau;
    {
        let mut commanded = (2.0 * inp.z[3] - 1.0) * inp.u[5];
        if (commanded > 0.0 && c_sot <= 0.0) || (commanded < 0.0 && c_sot >= 1.0) {
            commanded = 0.0;
        }
        dx[OFF_CS] = (commanded - x[OFF_CS]) / p.cs.tau_flow;
    }
    {
        let (t_sl, g_sl) = (links.t_sl, links.g_sl.max(0.0));
        let (t_a, q_o) = (inp.w[0], inp.w[3]);
        let t_br = x[OFF_BD];
        let q_fc = units::bd_fan_coil(p, t_br, t_sl, g_sl);
        dx[OFF_BD] = (q_o + p.bd.ua * (t_a - t_br) - q_fc) / p.bd.c_room;
        let t_re_ss = if g_sl > 1e-9 { t_sl + q_fc / (C_W * g_sl) } else { t_br };
        dx[OFF_BD + 1] = (t_re_ss - x[OFF_BD + 1]) / p.bd.tau_water;
    }

    let i_ba = units::ba_current(p, x[OFF_BA]);
    dx[soc_at] = -i_ba / (3600.0 * p.ba.c_eb * p.ba.eta_pb);
    dx[soc_at + 1] = -links.g_st / p.cs.m_st;
    dx[soc_at + 2] = links.g_st * links.t_hp;
    dx[soc_at + 3] = -links.g_st * links.t_cp;
}

/// Splits the system-level inputs and resolved links into one unit's
/// input-output table signals.
fn per_unit_inputs(
    unit: UnitId,
    p: &PlantParams,
    inp: &PlantInputs,
    links: &LinkSet,
    tank: (f64, f64, f64),
    t_re: f64,
) -> UnitInputs {
    let _ = p;
    match unit {
        UnitId::Pv => UnitInputs {
            w: vec![inp.w[0], inp.w[1]],
            ..Default::default()
        },
        UnitId::Fc => UnitInputs {
            u: vec![inp.u[0]],
            z: vec![inp.z[0]],
            ..Default::default()
        },
        UnitId::Ba => UnitInputs {
            u: vec![inp.u[6]],
            ..Default::default()
        },
        UnitId::Ma => UnitInputs {
            u: vec![inp.u[1], inp.u[2]],
            z: vec![inp.z[1]],
            v: vec![links.t_rec],
            ..Default::default()
        },
        UnitId::Ec => UnitInputs {
            u: vec![inp.u[3], inp.u[4]],
            z: vec![inp.z[2]],
            v: vec![links.t_rec],
            ..Default::default()
        },
        UnitId::Pmp => UnitInputs {
            v: vec![links.g_all],
            ..Default::default()
        },
        UnitId::Bd => UnitInputs {
            w: vec![inp.w[0], inp.w[3]],
            v: vec![links.t_sl, links.g_sl.max(0.0)],
            ..Default::default()
        },
        UnitId::Cs => UnitInputs {
            u: vec![inp.u[5]],
            z: vec![inp.z[3]],
            v: vec![links.t_slc, t_re],
            tank: Some(tank),
            ..Default::default()
        },
    }
}

/// Resolves the link set for the current state (no integration).
pub fn resolve_links(state: &PlantState, p: &PlantParams, inp: &PlantInputs) -> LinkSet {
    let (t_sth, t_stc) = state.tank_temps(p);
    link_algebra(&LinkInputs {
        g_ab: inp.u[2],
        g_ec: inp.u[4],
        g_st: state.unit(UnitId::Cs).x[0],
        g_stu: inp.u[5],
        z_st: inp.z[3],
        q_ab_state: state.unit(UnitId::Ma).x[1],
        q_ec_state: state.unit(UnitId::Ec).x[1],
        t_re: state.unit(UnitId::Bd).x[1],
        t_sth,
        t_stc,
        p_pv: state.unit(UnitId::Pv).x[0],
        p_fc: state.unit(UnitId::Fc).x[0],
        p_mt: state.unit(UnitId::Ma).x[0],
        p_ba: state.unit(UnitId::Ba).x[0],
        p_cp: state.unit(UnitId::Ec).x[0],
        p_pmp: state.unit(UnitId::Pmp).x[0],
        p_d: inp.w[2],
        fallback_t_rec: state.last_t_rec,
        fallback_t_slc: state.last_t_slc,
    })
}

/// Current unit outputs and system outputs without advancing time.
pub fn observe(state: &PlantState, p: &PlantParams, inp: &PlantInputs) -> PlantOutputs {
    let links = resolve_links(state, p, inp);
    let (t_sth, t_stc) = state.tank_temps(p);
    let mut o = Vec::with_capacity(17);
    for us in &state.units {
        let t_re = state.unit(UnitId::Bd).x[1];
        let ui = per_unit_inputs(us.unit, p, inp, &links, (t_sth, t_stc, state.c_sot), t_re);
        o.extend(units::unit_outputs(us, p, &ui));
    }
    let t_br = state.unit(UnitId::Bd).x[0];
    PlantOutputs {
        y: [links.p_sl, t_br],
        o,
        links,
        flags: state.flags,
    }
}

/// Advances the whole plant by `dt_macro` seconds using the internal
/// fixed-step RK4 integrator with zero-order-hold inputs.
///
/// `dt_macro` must be a positive multiple of the internal step.
pub fn plant_step(
    state: &PlantState,
    p: &PlantParams,
    inp_raw: &PlantInputs,
    dt_macro: f64,
) -> Result<(PlantState, PlantOutputs), PlantError> {
    let h = p.internal_dt;
    let steps = dt_macro / h;
    let n = steps.round();
    if !(dt_macro > 0.0) || (steps - n).abs() > 1e-9 || n < 1.0 {
        return Err(PlantError::BadMacroStep(dt_macro, h));
    }
    let n = n as usize;

    // Sanitize system inputs: reject non-finite, clamp out-of-range.
    let mut inp = *inp_raw;
    let mut clamped = false;
    for v in inp.u.iter().chain(inp.z.iter()).chain(inp.w.iter()) {
        if !v.is_finite() {
            return Err(PlantError::NonFiniteInput { unit: UnitId::Pv });
        }
    }
    for (i, v) in inp.u.iter_mut().enumerate() {
        let r = p.u_range[i];
        if !r.contains(*v) {
            *v = r.clamp(*v);
            clamped = true;
        }
    }
    for (i, v) in inp.w.iter_mut().enumerate() {
        let r = p.w_range[i];
        if !r.contains(*v) {
            *v = r.clamp(*v);
            clamped = true;
        }
    }
    for z in inp.z.iter_mut() {
        *z = if *z >= 0.5 { 1.0 } else { 0.0 };
    }

    let dim = n_states();
    let mut x = vec![0.0; dim];
    let mut st = state.clone();
    st.flags = PlantFlags {
        input_clamped: clamped,
        ..Default::default()
    };
    pack_state(&st, &mut x);

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut xt = vec![0.0; dim];

    for _ in 0..n {
        let fb = (st.last_t_rec, st.last_t_slc);
        plant_derivs(&x, p, &inp, fb, &mut k1);
        for i in 0..dim {
            xt[i] = x[i] + 0.5 * h * k1[i];
        }
        plant_derivs(&xt, p, &inp, fb, &mut k2);
        for i in 0..dim {
            xt[i] = x[i] + 0.5 * h * k2[i];
        }
        plant_derivs(&xt, p, &inp, fb, &mut k3);
        for i in 0..dim {
            xt[i] = x[i] + h * k3[i];
        }
        plant_derivs(&xt, p, &inp, fb, &mut k4);
        for i in 0..dim {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }

        unpack_into(&x, &mut st);
        saturate_storage(&mut st);
        apply_off_snap(&mut st, p, &inp, h);
        pack_state(&st, &mut x);

        // Refresh the mixing fallback memory while it is well defined.
        let links = resolve_links(&st, p, &inp);
        if inp.u[2] + inp.u[4] > FLOW_EPS {
            st.last_t_rec = links.t_rec;
            st.last_t_slc = links.t_slc;
        }
        if links.g_sl < -FLOW_EPS {
            st.flags.supply_starved = true;
        }
        st.clock += h;
    }

    let out = {
        let mut o = observe(&st, p, &inp);
        o.flags = st.flags;
        o
    };
    // Keep per-unit last_outputs in sync for downstream consumers.
    {
        let links = resolve_links(&st, p, &inp);
        let (t_sth, t_stc) = st.tank_temps(p);
        let c_sot = st.c_sot;
        for idx in 0..st.units.len() {
            let uid = st.units[idx].unit;
            let t_re = st.unit(UnitId::Bd).x[1];
            let ui = per_unit_inputs(uid, p, &inp, &links, (t_sth, t_stc, c_sot), t_re);
            let outs = units::unit_outputs(&st.units[idx], p, &ui);
            st.units[idx].last_outputs = outs;
        }
    }
    Ok((st, out))
}

fn unpack_into(x: &[f64], st: &mut PlantState) {
    let mut at = 0;
    for us in st.units.iter_mut() {
        let d = us.x.len();
        us.x.copy_from_slice(&x[at..at + d]);
        at += d;
    }
    st.c_soc = x[at];
    st.c_sot = x[at + 1];
    st.c_sth = x[at + 2];
    st.c_stc = x[at + 3];
}

fn apply_off_snap(st: &mut PlantState, p: &PlantParams, inp: &PlantInputs, dt: f64) {
    let snaps: [(UnitId, usize, f64, f64); 3] = [
        (UnitId::Fc, 0, inp.z[0], p.fc.tau),
        (UnitId::Ma, 1, inp.z[1], 0.0),
        (UnitId::Ec, 2, inp.z[2], 0.0),
    ];
    for (uid, _, z, _) in snaps {
        let taus: Vec<f64> = match uid {
            UnitId::Fc => vec![p.fc.tau],
            UnitId::Ma => vec![p.ma.tau_mt, p.ma.tau_ab],
            UnitId::Ec => vec![p.ec.tau_cp, p.ec.tau_q],
            _ => unreachable!(),
        };
        let us = st.unit_mut(uid);
        if z < 0.5 {
            us.off_time += dt;
            for (xi, tau) in us.x.iter_mut().zip(taus) {
                if us.off_time >= 5.0 * tau {
                    *xi = 0.0;
                }
            }
        } else {
            us.off_time = 0.0;
        }
    }
}
