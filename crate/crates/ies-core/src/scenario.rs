//! Day-ahead forecast and intraday real-time profiles for disturbances,
//! prices and the grid regulation coefficient.
//!
//! Forecast curves are parametric raised-cosine shapes; real-time series
//! perturb the interpolated forecasts with clipped Gaussian noise. All
//! outputs are fully determined by (template, cap, seed).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MINUTES_PER_DAY: usize = 1440;
pub const HOURS_PER_DAY: usize = 24;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown template '{0}'; available: {1}")]
    UnknownTemplate(String, String),
    #[error("amplitude {0} outside [0, 0.5]")]
    BadAmplitude(f64),
    #[error("capacity {0} outside [0, 0.3]")]
    BadCap(f64),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Template {
    /// Hot summer operating day with a midday irradiance peak and
    /// double-hump electric demand.
    SummerDay,
    /// Milder day with lower cooling loads and flatter prices.
    MildDay,
}

impl Template {
    pub const ALL: [Template; 2] = [Template::SummerDay, Template::MildDay];

    pub fn key(&self) -> &'static str {
        match self {
            Template::SummerDay => "summer-day",
            Template::MildDay => "mild-day",
        }
    }

    pub fn parse(s: &str) -> Result<Template, ScenarioError> {
        Template::ALL
            .iter()
            .find(|t| t.key() == s)
            .copied()
            .ok_or_else(|| {
                let avail = Template::ALL
                    .iter()
                    .map(|t| t.key())
                    .collect::<Vec<_>>()
                    .join(", ");
                ScenarioError::UnknownTemplate(s.to_string(), avail)
            })
    }
}

/// Price data, CAD-denominated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSet {
    /// Microgrid sale price, CAD/MWh.
    pub p_mg: f64,
    /// Hourly wholesale price, CAD/MWh.
    pub p_se: Vec<f64>,
    /// Fuel price, CAD/kg.
    pub p_f: f64,
    /// Grid-response subsidy, CAD/MWh (1.5x wholesale).
    pub p_cm: Vec<f64>,
    /// Shortfall penalty, CAD/MWh (1.5x wholesale).
    pub p_pn: Vec<f64>,
}

/// One generated operating day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioProfile {
    pub template: Template,
    pub seed: u64,
    /// Regulation capacity fraction in [0, 0.3].
    pub cap: f64,
    /// Hourly forecast of w = [t_a, S_ra, P_d, Q_o]; 24 rows.
    pub w_forecast: Vec<[f64; 4]>,
    /// Minute-resolution real-time w; 1440 rows.
    pub w_realtime: Vec<[f64; 4]>,
    /// Hourly forecast regulation coefficient.
    pub xi_forecast: Vec<f64>,
    /// Minute-resolution real-time regulation coefficient.
    pub xi_realtime: Vec<f64>,
    pub prices: PriceSet,
}

/// Raised cosine bump centered at `c` hours with half-width `w` hours.
fn bump(t: f64, c: f64, w: f64) -> f64 {
    let d = (t - c).abs();
    if d >= w {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * d / w).cos())
    }
}

fn forecast_shapes(template: Template, hour: f64) -> [f64; 4] {
    match template {
        Template::SummerDay => [
            22.0 + 10.0 * bump(hour, 14.0, 9.0),
            850.0 * bump(hour, 13.0, 7.0),
            45.0 + 25.0 * bump(hour, 10.5, 4.5) + 30.0 * bump(hour, 19.0, 4.0),
            60.0 + 55.0 * bump(hour, 15.0, 7.0) + 15.0 * bump(hour, 9.0, 3.0),
        ],
        Template::MildDay => [
            18.0 + 7.0 * bump(hour, 14.0, 9.0),
            700.0 * bump(hour, 13.0, 7.5),
            42.0 + 20.0 * bump(hour, 10.0, 4.5) + 24.0 * bump(hour, 19.5, 4.0),
            45.0 + 40.0 * bump(hour, 15.0, 7.5),
        ],
    }
}

fn wholesale_shape(template: Template, hour: f64) -> f64 {
    match template {
        Template::SummerDay => 25.0 + 95.0 * bump(hour, 11.0, 5.0) + 140.0 * bump(hour, 18.5, 4.5),
        Template::MildDay => 22.0 + 70.0 * bump(hour, 11.0, 5.5) + 100.0 * bump(hour, 18.5, 5.0),
    }
}

/// Hourly day-ahead forecast curves and prices for a template.
pub fn gen_daily_profiles(template: Template, _seed: u64) -> (Vec<[f64; 4]>, PriceSet) {
    let w: Vec<[f64; 4]> = (0..HOURS_PER_DAY)
        .map(|h| forecast_shapes(template, h as f64))
        .collect();
    let p_se: Vec<f64> = (0..HOURS_PER_DAY)
        .map(|h| wholesale_shape(template, h as f64))
        .collect();
    let p_cm: Vec<f64> = p_se.iter().map(|p| 1.5 * p).collect();
    let p_pn = p_cm.clone();
    (
        w,
        PriceSet {
            p_mg: 80.0,
            p_se,
            p_f: 0.2,
            p_cm,
            p_pn,
        },
    )
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller with a guard against log(0).
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Linear interpolation of an hourly forecast at fractional hour `t`.
fn interp_hourly(forecast: &[f64], t: f64) -> f64 {
    let h0 = (t.floor() as usize).min(forecast.len() - 1);
    let h1 = (h0 + 1).min(forecast.len() - 1);
    let frac = t - h0 as f64;
    forecast[h0] * (1.0 - frac) + forecast[h1] * frac
}

/// Minute-resolution multiplicative perturbation of an hourly forecast.
///
/// Each minute sample is the interpolated forecast times `1 + e`, where `e`
/// is zero-mean Gaussian with `2 sigma = amplitude`, clipped at three sigma.
pub fn perturb_realtime(
    forecast: &[f64],
    amplitude: f64,
    seed: u64,
) -> Result<Vec<f64>, ScenarioError> {
    if !(0.0..=0.5).contains(&amplitude) {
        return Err(ScenarioError::BadAmplitude(amplitude));
    }
    let sigma = amplitude / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(MINUTES_PER_DAY);
    for m in 0..MINUTES_PER_DAY {
        let base = interp_hourly(forecast, m as f64 / 60.0);
        let e = (gaussian(&mut rng) * sigma).clamp(-3.0 * sigma, 3.0 * sigma);
        out.push(base * (1.0 + e));
    }
    Ok(out)
}

/// Hourly forecast regulation coefficient within the capacity band and the
/// minute-resolution real-time coefficient distributed around it.
pub fn gen_regulation(cap: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>), ScenarioError> {
    if !(0.0..=0.3).contains(&cap) {
        return Err(ScenarioError::BadCap(cap));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if cap == 0.0 {
        return Ok((vec![0.0; HOURS_PER_DAY], vec![0.0; MINUTES_PER_DAY]));
    }
    // Smooth hourly day-ahead curve: moving average of uniform draws.
    let raw: Vec<f64> = (0..HOURS_PER_DAY + 2)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let forecast: Vec<f64> = (0..HOURS_PER_DAY)
        .map(|h| {
            let avg = (raw[h] + raw[h + 1] + raw[h + 2]) / 3.0;
            (avg * 1.3 * cap).clamp(-cap, cap)
        })
        .collect();
    let sigma = 0.15 * cap;
    let realtime: Vec<f64> = (0..MINUTES_PER_DAY)
        .map(|m| {
            let base = forecast[m / 60];
            let e = (gaussian(&mut rng) * sigma).clamp(-3.0 * sigma, 3.0 * sigma);
            (base + e).clamp(-cap, cap)
        })
        .collect();
    Ok((forecast, realtime))
}

/// Generates a full scenario for one operating day.
pub fn generate(
    template: Template,
    cap: f64,
    amplitude: f64,
    seed: u64,
) -> Result<ScenarioProfile, ScenarioError> {
    let (w_forecast, prices) = gen_daily_profiles(template, seed);
    let mut w_realtime = vec![[0.0; 4]; MINUTES_PER_DAY];
    for col in 0..4 {
        let series: Vec<f64> = w_forecast.iter().map(|r| r[col]).collect();
        let rt = perturb_realtime(&series, amplitude, seed.wrapping_add(1 + col as u64))?;
        for (m, v) in rt.into_iter().enumerate() {
            // Physical floors: irradiance and loads cannot go negative.
            w_realtime[m][col] = if col >= 1 { v.max(0.0) } else { v };
        }
    }
    let (xi_forecast, xi_realtime) = gen_regulation(cap, seed.wrapping_add(17))?;
    Ok(ScenarioProfile {
        template,
        seed,
        cap,
        w_forecast,
        w_realtime,
        xi_forecast,
        xi_realtime,
        prices,
    })
}

impl ScenarioProfile {
    /// Real-time disturbances at a clock time (zero-order hold per minute).
    pub fn w_at(&self, clock_s: f64) -> [f64; 4] {
        let m = ((clock_s / 60.0).floor() as usize).min(MINUTES_PER_DAY - 1);
        self.w_realtime[m]
    }

    /// Real-time regulation coefficient at a clock time.
    pub fn xi_at(&self, clock_s: f64) -> f64 {
        let m = ((clock_s / 60.0).floor() as usize).min(MINUTES_PER_DAY - 1);
        self.xi_realtime[m]
    }

    pub fn hour_of(clock_s: f64) -> usize {
        ((clock_s / 3600.0).floor() as usize).min(HOURS_PER_DAY - 1)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<(), ScenarioError> {
        let text = serde_json::to_string_pretty(self).expect("scenario serialize");
        std::fs::write(path, text).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load_json(path: &std::path::Path) -> Result<ScenarioProfile, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))
    }

    /// Writes the real-time series as CSV (clock, w, xi).
    pub fn export_csv(&self, path: &std::path::Path) -> Result<(), ScenarioError> {
        let mut wtr = csv::Writer::from_path(path)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        wtr.write_record(["minute", "t_a", "S_ra", "P_d", "Q_o", "xi"])
            .map_err(|e| ScenarioError::Io(e.to_string()))?;
        for m in 0..MINUTES_PER_DAY {
            let w = self.w_realtime[m];
            let rec = [
                m.to_string(),
                w[0].to_string(),
                w[1].to_string(),
                w[2].to_string(),
                w[3].to_string(),
                self.xi_realtime[m].to_string(),
            ];
            wtr.write_record(&rec)
                .map_err(|e| ScenarioError::Io(e.to_string()))?;
        }
        wtr.flush().map_err(|e| ScenarioError::Io(e.to_string()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prices_match_policy_values() {
        let (_, prices) = gen_daily_profiles(Template::SummerDay, 1);
        assert_eq!(prices.p_f, 0.2);
        assert_eq!(prices.p_mg, 80.0);
        for (cm, se) in prices.p_cm.iter().zip(prices.p_se.iter()) {
            assert!((cm - 1.5 * se).abs() < 1e-12);
        }
        for (pn, se) in prices.p_pn.iter().zip(prices.p_se.iter()) {
            assert!((pn - 1.5 * se).abs() < 1e-12);
        }
    }

    #[test]
    fn night_irradiance_is_zero() {
        let (w, _) = gen_daily_profiles(Template::SummerDay, 1);
        assert_eq!(w[2][1], 0.0, "S_ra at 02:00");
        assert_eq!(w[23][1], 0.0, "S_ra at 23:00");
        let sc = generate(Template::SummerDay, 0.2, 0.08, 3).unwrap();
        for m in 0..120 {
            assert_eq!(sc.w_realtime[m][1], 0.0);
        }
        for row in &sc.w_realtime {
            assert!(row[1] >= 0.0);
        }
    }

    #[test]
    fn zero_amplitude_is_pure_interpolation() {
        let f: Vec<f64> = (0..24).map(|h| h as f64).collect();
        let rt = perturb_realtime(&f, 0.0, 5).unwrap();
        assert_eq!(rt.len(), MINUTES_PER_DAY);
        assert!((rt[90] - 1.5).abs() < 1e-12);
        assert!((rt[0] - 0.0).abs() < 1e-12);
    }

    /// Monte Carlo over 1e5 draws: at least 95% of ratio samples inside
    /// the +/- amplitude band when amplitude = 0.08.
    #[test]
    fn amplitude_band_contains_95_percent() {
        let f = vec![100.0; 24];
        let mut inside = 0usize;
        let mut total = 0usize;
        for seed in 0..70 {
            let rt = perturb_realtime(&f, 0.08, seed).unwrap();
            for v in rt {
                let ratio = v / 100.0;
                if (0.92..=1.08).contains(&ratio) {
                    inside += 1;
                }
                total += 1;
            }
        }
        assert!(total >= 100_000);
        let frac = inside as f64 / total as f64;
        assert!(frac >= 0.95, "only {frac} inside band");
    }

    #[test]
    fn same_seed_identical_series() {
        let a = generate(Template::SummerDay, 0.2, 0.08, 42).unwrap();
        let b = generate(Template::SummerDay, 0.2, 0.08, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regulation_capacity_respected() {
        let (f, rt) = gen_regulation(0.2, 9).unwrap();
        assert!(f.iter().all(|x| x.abs() <= 0.2));
        assert!(rt.iter().all(|x| x.abs() <= 0.2));
        let (f0, rt0) = gen_regulation(0.0, 9).unwrap();
        assert!(f0.iter().all(|x| *x == 0.0));
        assert!(rt0.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn hourly_means_stay_near_forecast() {
        let sc = generate(Template::SummerDay, 0.2, 0.08, 7).unwrap();
        for h in 0..24 {
            let fc = sc.w_forecast[h][2]; // P_d
            let mean: f64 =
                (0..60).map(|m| sc.w_realtime[h * 60 + m][2]).sum::<f64>() / 60.0;
            // Interpolation drifts toward the next hour; allow the band plus drift.
            let next = sc.w_forecast[(h + 1).min(23)][2];
            let lo = fc.min(next) * 0.92;
            let hi = fc.max(next) * 1.08;
            assert!(
                mean >= lo && mean <= hi,
                "hour {h}: mean {mean} outside [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn unknown_template_lists_available() {
        let err = Template::parse("nope").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("summer-day") && msg.contains("mild-day"));
    }
}
