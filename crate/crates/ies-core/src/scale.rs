//! Min-max feature scaling fitted on training data only.

use serde::{Deserialize, Serialize};

/// Per-column scaler parameters mapping `[a_min, a_max]` onto `[0, 1]`.
///
/// Columns that are constant on the fitting range are flagged and scale
/// to zero; the inverse maps them back to the constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxParams {
    pub a_min: Vec<f64>,
    pub a_max: Vec<f64>,
    pub constant: Vec<bool>,
}

impl MinMaxParams {
    /// Fits column ranges over `rows` (each row one sample).
    pub fn fit(rows: &[&[f64]]) -> MinMaxParams {
        assert!(!rows.is_empty(), "cannot fit a scaler on no data");
        let cols = rows[0].len();
        let mut a_min = vec![f64::INFINITY; cols];
        let mut a_max = vec![f64::NEG_INFINITY; cols];
        for row in rows {
            for (c, v) in row.iter().enumerate() {
                a_min[c] = a_min[c].min(*v);
                a_max[c] = a_max[c].max(*v);
            }
        }
        let constant = a_min
            .iter()
            .zip(a_max.iter())
            .map(|(lo, hi)| !(hi > lo))
            .collect();
        MinMaxParams { a_min, a_max, constant }
    }

    pub fn n_cols(&self) -> usize {
        self.a_min.len()
    }

    #[inline]
    pub fn scale_value(&self, col: usize, v: f64) -> f64 {
        if self.constant[col] {
            0.0
        } else {
            (v - self.a_min[col]) / (self.a_max[col] - self.a_min[col])
        }
    }

    #[inline]
    pub fn unscale_value(&self, col: usize, s: f64) -> f64 {
        if self.constant[col] {
            self.a_min[col]
        } else {
            s * (self.a_max[col] - self.a_min[col]) + self.a_min[col]
        }
    }

    pub fn scale_row(&self, row: &mut [f64]) {
        for (c, v) in row.iter_mut().enumerate() {
            *v = self.scale_value(c, *v);
        }
    }

    pub fn unscale_row(&self, row: &mut [f64]) {
        for (c, v) in row.iter_mut().enumerate() {
            *v = self.unscale_value(c, *v);
        }
    }

    /// Slope of the scaled value with respect to the physical value.
    #[inline]
    pub fn slope(&self, col: usize) -> f64 {
        if self.constant[col] {
            0.0
        } else {
            1.0 / (self.a_max[col] - self.a_min[col])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        let p = MinMaxParams {
            a_min: vec![0.0],
            a_max: vec![10.0],
            constant: vec![false],
        };
        assert_eq!(p.scale_value(0, 5.0), 0.5);
        assert_eq!(p.scale_value(0, 0.0), 0.0);
        assert_eq!(p.scale_value(0, 10.0), 1.0);
    }

    #[test]
    fn constant_column_flagged_and_scaled_to_zero() {
        let rows: Vec<Vec<f64>> = vec![vec![3.0, 1.0], vec![3.0, 2.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let p = MinMaxParams::fit(&refs);
        assert!(p.constant[0] && !p.constant[1]);
        assert_eq!(p.scale_value(0, 3.0), 0.0);
        assert_eq!(p.unscale_value(0, 0.0), 3.0);
    }

    proptest! {
        /// Round trip scale∘invert recovers inputs to 1e-12.
        #[test]
        fn roundtrip(vals in proptest::collection::vec(-1e3f64..1e3, 8)) {
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
            let p = MinMaxParams { a_min: vec![lo], a_max: vec![hi], constant: vec![false] };
            for v in vals {
                let r = p.unscale_value(0, p.scale_value(0, v));
                prop_assert!((r - v).abs() < 1e-12 * v.abs().max(1.0));
            }
        }
    }
}
