//! Linear and mixed-integer linear program descriptions, plus a plain-text
//! dump/load format for debugging.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    fn token(&self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

/// One linear constraint with sparse coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub name: String,
}

/// Minimization linear program with bounded variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct LinProgram {
    pub n_vars: usize,
    /// Objective coefficients (minimize).
    pub objective: Vec<f64>,
    pub obj_offset: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
    pub var_names: Vec<String>,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("variable index {idx} out of range ({n} vars) in row {row}")]
    BadIndex { idx: usize, n: usize, row: String },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("lower bound above upper bound for variable {0}")]
    EmptyBound(usize),
    #[error("binary variable {0} must have bounds within [0, 1]")]
    BadBinary(usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl LinProgram {
    pub fn new(n_vars: usize) -> LinProgram {
        LinProgram {
            n_vars,
            objective: vec![0.0; n_vars],
            obj_offset: 0.0,
            lower: vec![f64::NEG_INFINITY; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
            var_names: (0..n_vars).map(|i| format!("x{i}")).collect(),
        }
    }

    /// Appends a variable, returning its index.
    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> usize {
        let idx = self.n_vars;
        self.n_vars += 1;
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(name.into());
        idx
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        self.rows.push(Row {
            coeffs,
            sense,
            rhs,
            name: name.into(),
        });
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.n_vars
            || self.lower.len() != self.n_vars
            || self.upper.len() != self.n_vars
        {
            return Err(LpError::NonFinite("inconsistent dimensions".into()));
        }
        for (i, c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::NonFinite(format!("objective[{i}]")));
            }
        }
        for i in 0..self.n_vars {
            if self.lower[i] > self.upper[i] {
                return Err(LpError::EmptyBound(i));
            }
            if self.lower[i].is_nan() || self.upper[i].is_nan() {
                return Err(LpError::NonFinite(format!("bounds[{i}]")));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of {}", row.name)));
            }
            for (idx, c) in &row.coeffs {
                if *idx >= self.n_vars {
                    return Err(LpError::BadIndex {
                        idx: *idx,
                        n: self.n_vars,
                        row: row.name.clone(),
                    });
                }
                if !c.is_finite() {
                    return Err(LpError::NonFinite(format!("coefficient in {}", row.name)));
                }
            }
        }
        Ok(())
    }

    /// Objective value of a candidate point (including the offset).
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.obj_offset
            + self
                .objective
                .iter()
                .zip(x.iter())
                .map(|(c, v)| c * v)
                .sum::<f64>()
    }

    /// Largest violation of bounds and rows at a candidate point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for i in 0..self.n_vars {
            v = v.max(self.lower[i] - x[i]).max(x[i] - self.upper[i]);
        }
        for row in &self.rows {
            let a: f64 = row.coeffs.iter().map(|(i, c)| c * x[*i]).sum();
            match row.sense {
                Sense::Le => v = v.max(a - row.rhs),
                Sense::Ge => v = v.max(row.rhs - a),
                Sense::Eq => v = v.max((a - row.rhs).abs()),
            }
        }
        v
    }
}

/// A linear program with a set of binary variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MilpProblem {
    pub lp: LinProgram,
    pub binaries: Vec<usize>,
}

impl MilpProblem {
    pub fn validate(&self) -> Result<(), LpError> {
        self.lp.validate()?;
        for &b in &self.binaries {
            if b >= self.lp.n_vars {
                return Err(LpError::BadIndex {
                    idx: b,
                    n: self.lp.n_vars,
                    row: "binaries".into(),
                });
            }
            if self.lp.lower[b] < -1e-9 || self.lp.upper[b] > 1.0 + 1e-9 {
                return Err(LpError::BadBinary(b));
            }
        }
        Ok(())
    }

    /// Plain-text dump: one `min` line, `var` lines, `row` lines and a
    /// `bin` line. Numbers round-trip exactly through their shortest
    /// representation.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        s.push_str("# milp v1\n");
        s.push_str(&format!("min offset {}\n", self.lp.obj_offset));
        for i in 0..self.lp.n_vars {
            s.push_str(&format!(
                "var {} {} {} {}\n",
                self.lp.var_names[i], self.lp.lower[i], self.lp.upper[i], self.lp.objective[i]
            ));
        }
        for row in &self.lp.rows {
            s.push_str(&format!("row {} {} {}", row.name, row.sense.token(), row.rhs));
            for (idx, c) in &row.coeffs {
                s.push_str(&format!(" {idx}:{c}"));
            }
            s.push('\n');
        }
        if !self.binaries.is_empty() {
            s.push_str("bin");
            for b in &self.binaries {
                s.push_str(&format!(" {b}"));
            }
            s.push('\n');
        }
        s
    }

    /// Parses the `dump` format. Tolerates unknown trailing lines starting
    /// with '#'.
    pub fn load(text: &str) -> Result<MilpProblem, LpError> {
        let mut lp = LinProgram::new(0);
        let mut binaries = Vec::new();
        let parse_f = |s: &str, line: usize| -> Result<f64, LpError> {
            match s {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => s.parse::<f64>().map_err(|e| LpError::Parse {
                    line,
                    msg: format!("bad number '{s}': {e}"),
                }),
            }
        };
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            match it.next() {
                Some("min") => {
                    let _kw = it.next();
                    if let Some(v) = it.next() {
                        lp.obj_offset = parse_f(v, ln)?;
                    }
                }
                Some("var") => {
                    let name = it.next().ok_or(LpError::Parse {
                        line: ln,
                        msg: "missing var name".into(),
                    })?;
                    let lo = parse_f(it.next().unwrap_or("?"), ln)?;
                    let hi = parse_f(it.next().unwrap_or("?"), ln)?;
                    let cost = parse_f(it.next().unwrap_or("?"), ln)?;
                    lp.add_var(name.to_string(), lo, hi, cost);
                }
                Some("row") => {
                    let name = it
                        .next()
                        .ok_or(LpError::Parse {
                            line: ln,
                            msg: "missing row name".into(),
                        })?
                        .to_string();
                    let sense = match it.next() {
                        Some("<=") => Sense::Le,
                        Some("=") => Sense::Eq,
                        Some(">=") => Sense::Ge,
                        other => {
                            return Err(LpError::Parse {
                                line: ln,
                                msg: format!("bad sense {other:?}"),
                            })
                        }
                    };
                    let rhs = parse_f(it.next().unwrap_or("?"), ln)?;
                    let mut coeffs = Vec::new();
                    for tok in it {
                        let (i, c) = tok.split_once(':').ok_or(LpError::Parse {
                            line: ln,
                            msg: format!("bad coefficient '{tok}'"),
                        })?;
                        let idx: usize = i.parse().map_err(|e| LpError::Parse {
                            line: ln,
                            msg: format!("bad index '{i}': {e}"),
                        })?;
                        coeffs.push((idx, parse_f(c, ln)?));
                    }
                    lp.add_row(name, coeffs, sense, rhs);
                }
                Some("bin") => {
                    for tok in it {
                        binaries.push(tok.parse::<usize>().map_err(|e| LpError::Parse {
                            line: ln,
                            msg: format!("bad binary index '{tok}': {e}"),
                        })?);
                    }
                }
                Some(other) => {
                    return Err(LpError::Parse {
                        line: ln,
                        msg: format!("unknown directive '{other}'"),
                    })
                }
                None => {}
            }
        }
        let milp = MilpProblem { lp, binaries };
        milp.validate()?;
        Ok(milp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MilpProblem {
        let mut lp = LinProgram::new(0);
        let x = lp.add_var("x", 0.0, 10.0, -1.0);
        let y = lp.add_var("y", -1.0, f64::INFINITY, 2.5);
        lp.add_row("r0", vec![(x, 1.0), (y, -2.0)], Sense::Le, 4.0);
        lp.add_row("r1", vec![(x, 3.0)], Sense::Eq, 6.0);
        MilpProblem {
            lp,
            binaries: vec![],
        }
    }

    #[test]
    fn dump_load_roundtrip() {
        let m = sample();
        let text = m.dump();
        let m2 = MilpProblem::load(&text).unwrap();
        assert_eq!(m, m2);
    }

    #[test]
    fn load_rejects_bad_index() {
        let text = "var x 0 1 0\nrow r <= 1 5:1.0\n";
        assert!(MilpProblem::load(text).is_err());
    }

    #[test]
    fn validate_catches_empty_bounds() {
        let mut lp = LinProgram::new(0);
        lp.add_var("x", 1.0, 0.0, 0.0);
        assert!(matches!(lp.validate(), Err(LpError::EmptyBound(0))));
    }

    #[test]
    fn violation_measures_all_constraint_kinds() {
        let m = sample();
        // x=2, y=-1: row r1 gives 6-6=0, r0 gives 2+2=4 <= 4 ok.
        assert!(m.lp.max_violation(&[2.0, -1.0]) < 1e-12);
        // x=0 violates r1 by 6.
        assert!((m.lp.max_violation(&[0.0, 0.0]) - 6.0).abs() < 1e-12);
    }
}
