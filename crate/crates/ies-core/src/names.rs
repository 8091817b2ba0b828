//! Shared vocabulary: operating units, signal names and time scales.
//!
//! Every dataset column, network channel and trace header uses these
//! constants so that the plant, the surrogates and the controllers all
//! agree on layout.

use serde::{Deserialize, Serialize};

/// The eight operating units of the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnitId {
    /// Photovoltaic array (MPPT).
    Pv,
    /// Fuel cell.
    Fc,
    /// Battery bank.
    Ba,
    /// Microturbine with downstream absorption chiller.
    Ma,
    /// Electric chiller.
    Ec,
    /// Circulation water pumps.
    Pmp,
    /// Cold storage (cold + hot water tanks).
    Cs,
    /// Building with fan-coil units.
    Bd,
}

impl UnitId {
    pub const ALL: [UnitId; 8] = [
        UnitId::Pv,
        UnitId::Fc,
        UnitId::Ba,
        UnitId::Ma,
        UnitId::Ec,
        UnitId::Pmp,
        UnitId::Cs,
        UnitId::Bd,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            UnitId::Pv => "pv",
            UnitId::Fc => "fc",
            UnitId::Ba => "ba",
            UnitId::Ma => "ma",
            UnitId::Ec => "ec",
            UnitId::Pmp => "pmp",
            UnitId::Cs => "cs",
            UnitId::Bd => "bd",
        }
    }

    pub fn parse(s: &str) -> Option<UnitId> {
        match s.to_ascii_lowercase().as_str() {
            "pv" => Some(UnitId::Pv),
            "fc" => Some(UnitId::Fc),
            "ba" => Some(UnitId::Ba),
            "ma" => Some(UnitId::Ma),
            "ec" => Some(UnitId::Ec),
            "pmp" => Some(UnitId::Pmp),
            "cs" => Some(UnitId::Cs),
            "bd" => Some(UnitId::Bd),
            _ => None,
        }
    }
}

impl std::fmt::Display for UnitId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// Sampling scale of a surrogate network or dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TimeScale {
    /// 1-hour discrete time, used by the day-ahead scheduler.
    LongTerm,
    /// 1-minute discrete time, used by the slow control agent.
    Slow,
    /// 5-second discrete time, used by the fast control agent.
    Fast,
}

impl TimeScale {
    pub const ALL: [TimeScale; 3] = [TimeScale::LongTerm, TimeScale::Slow, TimeScale::Fast];

    /// Sampling interval in seconds.
    pub fn dt(&self) -> f64 {
        match self {
            TimeScale::LongTerm => 3600.0,
            TimeScale::Slow => 60.0,
            TimeScale::Fast => 5.0,
        }
    }

    pub fn key(&self) -> &'static str {
        match self {
            TimeScale::LongTerm => "1h",
            TimeScale::Slow => "1min",
            TimeScale::Fast => "5s",
        }
    }

    pub fn parse(s: &str) -> Option<TimeScale> {
        match s {
            "1h" | "long_term" | "3600" => Some(TimeScale::LongTerm),
            "1min" | "slow" | "60" => Some(TimeScale::Slow),
            "5s" | "fast" | "5" => Some(TimeScale::Fast),
            _ => None,
        }
    }
}

impl std::fmt::Display for TimeScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

// Continuous manipulated inputs, system-wide order u = [G_ff, G_fm, G_ab, N_ec, G_ec, G_stu, P_bar].
pub const G_FF: &str = "G_ff";
pub const G_FM: &str = "G_fm";
pub const G_AB: &str = "G_ab";
pub const N_EC: &str = "N_ec";
pub const G_EC: &str = "G_ec";
pub const G_STU: &str = "G_stu";
pub const P_BAR: &str = "P_bar";
pub const U_NAMES: [&str; 7] = [G_FF, G_FM, G_AB, N_EC, G_EC, G_STU, P_BAR];

// Binary inputs z = [z_fc, z_ma, z_ec, z_st].
pub const Z_FC: &str = "z_fc";
pub const Z_MA: &str = "z_ma";
pub const Z_EC: &str = "z_ec";
pub const Z_ST: &str = "z_st";
pub const Z_NAMES: [&str; 4] = [Z_FC, Z_MA, Z_EC, Z_ST];

// Disturbances w = [t_a, S_ra, P_d, Q_o].
pub const T_A: &str = "t_a";
pub const S_RA: &str = "S_ra";
pub const P_D: &str = "P_d";
pub const Q_O: &str = "Q_o";
pub const W_NAMES: [&str; 4] = [T_A, S_RA, P_D, Q_O];

// Unit outputs and linked variables.
pub const P_PV: &str = "P_pv";
pub const P_FC: &str = "P_fc";
pub const P_BA: &str = "P_ba";
pub const I_BA: &str = "I_ba";
pub const P_MT: &str = "P_mt";
pub const T_AB: &str = "t_ab";
pub const Q_AB: &str = "Q_ab";
pub const P_CP: &str = "P_cp";
pub const T_EC: &str = "t_ec";
pub const Q_EC: &str = "Q_ec";
pub const P_PMP: &str = "P_pmp";
pub const T_RE: &str = "t_re";
pub const T_BR: &str = "t_br";
pub const T_CP: &str = "t_cp";
pub const T_HP: &str = "t_hp";
pub const Q_ST: &str = "Q_st";
pub const G_ST: &str = "G_st";
pub const C_SOC: &str = "C_soc";
pub const C_SOT: &str = "C_sot";
pub const P_SL: &str = "P_sl";
pub const Q_SL: &str = "Q_sl";
pub const G_ALL: &str = "G_all";
pub const G_SL: &str = "G_sl";
pub const T_SL: &str = "t_sl";
pub const T_REC: &str = "t_rec";
pub const T_SLC: &str = "t_slc";
