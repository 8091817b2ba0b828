//! Plant parameters: physical constants, static gain maps and time
//! constants for the eight operating units.

use serde::{Deserialize, Serialize};

/// Specific heat of water, kJ/(kg K).
pub const C_W: f64 = 4.186;

/// Nominal chilled/return water temperature difference, K.
pub const DELTA_T_NOM: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvParams {
    /// kW per (W/m^2) at the 25 degC cell reference.
    pub gain: f64,
    /// Power derating per K of ambient above 25 degC.
    pub temp_coeff: f64,
    /// High-irradiance droop coefficient.
    pub droop: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcParams {
    pub eta0: f64,
    /// Fuel lower heating value, kJ/kg.
    pub lhv: f64,
    pub g_ff_nom: f64,
    pub curvature: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaParams {
    pub p_mt_nom: f64,
    pub q_ab_nom: f64,
    pub g_fm_nom: f64,
    pub mt_curvature: f64,
    pub ab_curvature: f64,
    /// Cooling sensitivity to return water temperature, per K.
    pub ab_trec_coeff: f64,
    /// Cooling sensitivity to relative chilled water flow.
    pub ab_flow_coeff: f64,
    pub tau_mt: f64,
    pub tau_ab: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcParams {
    pub p_cp_nom: f64,
    pub n_nom: f64,
    pub cop_nom: f64,
    /// Quadratic speed term in compressor power.
    pub speed_curvature: f64,
    /// COP droop with relative speed.
    pub cop_droop: f64,
    /// COP sensitivity to return water temperature, per K.
    pub cop_trec_coeff: f64,
    /// Cooling sensitivity to relative chilled water flow.
    pub flow_coeff: f64,
    pub tau_cp: f64,
    pub tau_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaParams {
    /// Charge per cell, Ah.
    pub c_eb: f64,
    /// Parallel cell count.
    pub eta_pb: f64,
    /// DC bus voltage, V.
    pub v_bus: f64,
    /// Discharge conversion efficiency.
    pub eta_d: f64,
    /// Charge conversion efficiency.
    pub eta_c: f64,
    pub tau: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmpParams {
    pub p_nom: f64,
    pub g_all_nom: f64,
    /// Power-law exponent of pump power in total flow.
    pub exponent: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BdParams {
    /// Room thermal capacitance, kJ/K.
    pub c_room: f64,
    /// Envelope conductance, kW/K.
    pub ua: f64,
    /// Fan-coil effectiveness at nominal flow.
    pub eps_nom: f64,
    /// Effectiveness flow exponent (effectiveness ~ flow^-x).
    pub eps_flow_exp: f64,
    /// Water-side return temperature lag, s.
    pub tau_water: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsParams {
    /// Maximum stored water mass, kg.
    pub m_st: f64,
    /// Circulation flow actuation lag, s.
    pub tau_flow: f64,
    /// Tank mass below which stratified temperatures are no longer inferred.
    pub min_mass: f64,
}

/// Lower/upper clamps for one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }
}

/// All plant parameters. Loadable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub c_w: f64,
    pub internal_dt: f64,
    pub pv: PvParams,
    pub fc: FcParams,
    pub ma: MaParams,
    pub ec: EcParams,
    pub ba: BaParams,
    pub pmp: PmpParams,
    pub bd: BdParams,
    pub cs: CsParams,
    /// Clamp ranges for u = [G_ff, G_fm, G_ab, N_ec, G_ec, G_stu, P_bar].
    pub u_range: [Range; 7],
    /// Clamp ranges for w = [t_a, S_ra, P_d, Q_o].
    pub w_range: [Range; 4],
    /// Nominal continuous inputs.
    pub u_nom: [f64; 7],
    /// Nominal disturbances.
    pub w_nom: [f64; 4],
}

impl PlantParams {
    /// Nominal chilled water flows implied by the nominal cooling powers
    /// with the nominal 5 K temperature difference.
    pub fn g_ab_nom(&self) -> f64 {
        self.ma.q_ab_nom / (self.c_w * DELTA_T_NOM)
    }

    pub fn g_ec_nom(&self) -> f64 {
        self.ec.p_cp_nom * self.ec.cop_nom / (self.c_w * DELTA_T_NOM)
    }

    pub fn g_sl_nom(&self) -> f64 {
        self.g_ab_nom() + self.g_ec_nom()
    }

    pub fn load_json(path: &std::path::Path) -> Result<PlantParams, crate::plant::PlantError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::plant::PlantError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| crate::plant::PlantError::Io(format!("{}: {e}", path.display())))
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<(), crate::plant::PlantError> {
        let text = serde_json::to_string_pretty(self).expect("params serialize");
        std::fs::write(path, text)
            .map_err(|e| crate::plant::PlantError::Io(format!("{}: {e}", path.display())))
    }
}

impl Default for PlantParams {
    fn default() -> Self {
        let g_ab_nom = 75.0 / (C_W * DELTA_T_NOM);
        let g_ec_nom = 50.0 / (C_W * DELTA_T_NOM);
        let g_all_nom = g_ab_nom + g_ec_nom;
        PlantParams {
            c_w: C_W,
            internal_dt: 0.05,
            pv: PvParams {
                // 44 kW at 600 W/m^2 and 30 degC ambient.
                gain: 44.0 / (600.0 * (1.0 - 0.004 * 5.0)),
                temp_coeff: 0.004,
                droop: 0.05,
                tau: 0.1,
            },
            fc: FcParams {
                eta0: 0.4,
                lhv: 50_000.0,
                g_ff_nom: 0.002,
                curvature: 0.10,
                tau: 7.0,
            },
            ma: MaParams {
                p_mt_nom: 80.0,
                q_ab_nom: 75.0,
                g_fm_nom: 0.0053,
                mt_curvature: 0.10,
                ab_curvature: 0.08,
                ab_trec_coeff: 0.008,
                ab_flow_coeff: 0.05,
                tau_mt: 21.0,
                tau_ab: 155.0,
            },
            ec: EcParams {
                p_cp_nom: 12.6,
                n_nom: 3000.0,
                cop_nom: 50.0 / 12.6,
                speed_curvature: 0.15,
                cop_droop: 0.12,
                cop_trec_coeff: 0.01,
                flow_coeff: 0.03,
                tau_cp: 1.9,
                tau_q: 25.0,
            },
            ba: BaParams {
                c_eb: 40.0,
                eta_pb: 8.0,
                v_bus: 500.0,
                eta_d: 0.95,
                eta_c: 0.95,
                tau: 0.9,
                p_max: 40.0,
            },
            pmp: PmpParams {
                p_nom: 13.9,
                g_all_nom,
                exponent: 1.8,
                tau: 0.5,
            },
            bd: BdParams {
                // With eps = 5/17 the nominal balance sits exactly at
                // t_br = 24 degC, t_re = 12 degC for Q_o = 95 kW, t_a = 30 degC.
                c_room: 154_375.0,
                ua: 5.0,
                eps_nom: 5.0 / 17.0,
                eps_flow_exp: 0.15,
                tau_water: 120.0,
            },
            cs: CsParams {
                m_st: 15_000.0,
                tau_flow: 1.0,
                min_mass: 50.0,
            },
            u_range: [
                Range::new(0.0, 0.004),  // G_ff
                Range::new(0.0, 0.0106), // G_fm
                Range::new(0.0, 7.2),    // G_ab
                Range::new(0.0, 6000.0), // N_ec
                Range::new(0.0, 4.8),    // G_ec
                Range::new(0.0, 2.0),    // G_stu
                Range::new(-40.0, 40.0), // P_bar
            ],
            w_range: [
                Range::new(-30.0, 50.0), // t_a
                Range::new(0.0, 1200.0), // S_ra
                Range::new(0.0, 200.0),  // P_d
                Range::new(0.0, 250.0),  // Q_o
            ],
            u_nom: [0.002, 0.0053, g_ab_nom, 3000.0, g_ec_nom, 0.0, 0.0],
            w_nom: [30.0, 600.0, 60.0, 95.0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_nominal_flows_match_cooling_powers() {
        let p = PlantParams::default();
        // Q = G * C_w * 5 recovers the nominal cooling powers.
        assert!((p.g_ab_nom() * C_W * 5.0 - 75.0).abs() < 1e-12);
        assert!((p.g_ec_nom() * C_W * 5.0 - 50.0).abs() < 1e-12);
        assert!((p.g_sl_nom() * C_W * 5.0 - 125.0).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let p = PlantParams::default();
        let text = serde_json::to_string(&p).unwrap();
        let q: PlantParams = serde_json::from_str(&text).unwrap();
        assert_eq!(p, q);
    }
}
