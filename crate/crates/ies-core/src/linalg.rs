//! Minimal dense row-major matrix used by the networks and solvers.

use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            y[r] = acc;
        }
    }

    /// y = A^T x
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        y.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..self.rows {
            let row = self.row(r);
            let s = x[r];
            if s == 0.0 {
                continue;
            }
            for (yc, a) in y.iter_mut().zip(row.iter()) {
                *yc += s * a;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Solves A x = b for dense square A by LU with partial pivoting.
///
/// Returns `None` when the matrix is numerically singular.
pub fn lu_solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(a.rows, a.cols, "square system expected");
    let n = a.rows;
    assert_eq!(b.len(), n);
    let mut lu = a.data.clone();
    let mut x: Vec<f64> = b.to_vec();
    let mut piv: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // Partial pivot.
        let mut p = k;
        let mut pmax = lu[piv[k] * n + k].abs();
        for r in (k + 1)..n {
            let v = lu[piv[r] * n + k].abs();
            if v > pmax {
                pmax = v;
                p = r;
            }
        }
        if pmax < 1e-300 {
            return None;
        }
        piv.swap(k, p);
        let pk = piv[k];
        let pivot = lu[pk * n + k];
        for r in (k + 1)..n {
            let pr = piv[r];
            let m = lu[pr * n + k] / pivot;
            lu[pr * n + k] = m;
            if m != 0.0 {
                for c in (k + 1)..n {
                    lu[pr * n + c] -= m * lu[pk * n + c];
                }
            }
        }
    }
    // Forward substitution on permuted rows.
    let mut y = vec![0.0; n];
    for r in 0..n {
        let mut acc = x[piv[r]];
        for c in 0..r {
            acc -= lu[piv[r] * n + c] * y[c];
        }
        y[r] = acc;
    }
    // Back substitution.
    for r in (0..n).rev() {
        let mut acc = y[r];
        for c in (r + 1)..n {
            acc -= lu[piv[r] * n + c] * x[c];
        }
        let d = lu[piv[r] * n + r];
        if d.abs() < 1e-300 {
            return None;
        }
        x[r] = acc / d;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_and_transpose() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let mut y = vec![0.0; 3];
        a.matvec(&[1.0, -1.0], &mut y);
        assert_eq!(y, vec![-1.0, -1.0, -1.0]);
        let mut z = vec![0.0; 2];
        a.matvec_t(&[1.0, 0.0, 1.0], &mut z);
        assert_eq!(z, vec![6.0, 8.0]);
    }

    #[test]
    fn lu_solves_random_system() {
        let a = Mat::from_rows(&[
            vec![4.0, -2.0, 1.0],
            vec![-2.0, 4.0, -2.0],
            vec![1.0, -2.0, 4.0],
        ]);
        let x_true = [1.0, 2.0, 3.0];
        let mut b = vec![0.0; 3];
        a.matvec(&x_true, &mut b);
        let x = lu_solve(&a, &b).unwrap();
        for (xi, ti) in x.iter().zip(x_true.iter()) {
            assert!((xi - ti).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_reports_singular() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(lu_solve(&a, &[1.0, 2.0]).is_none());
    }
}
