//! Dense row-major matrices of f64 plus the small set of kernels the rest of
//! the crate is built on. Every constructor and kernel rejects non-finite
//! values, so a `Tensor2` that exists is finite everywhere.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "tensor data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        let t = Tensor2 { rows, cols, data };
        t.ensure_finite()?;
        Ok(t)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Tensor2::from_vec(1, 1, vec![v])
    }

    /// Column vector from a slice, one row per entry.
    pub fn column(values: &[f64]) -> Result<Self> {
        Tensor2::from_vec(values.len(), 1, values.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Copy of the tensor restricted to rows `[start, start+count)`.
    pub fn slice_rows(&self, start: usize, count: usize) -> Result<Tensor2> {
        if start + count > self.rows {
            return Err(Error::invalid(format!(
                "row slice {}..{} out of range for {} rows",
                start,
                start + count,
                self.rows
            )));
        }
        Ok(Tensor2 {
            rows: count,
            cols: self.cols,
            data: self.data[start * self.cols..(start + count) * self.cols].to_vec(),
        })
    }

    /// Copy of the selected rows, in the order given.
    pub fn take_rows(&self, idx: &[usize]) -> Result<Tensor2> {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::invalid(format!(
                    "row index {} out of range for {} rows",
                    i, self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Tensor2 {
            rows: idx.len(),
            cols: self.cols,
            data,
        })
    }

    /// Stack `self` on top of `other` (same column count).
    pub fn vstack(&self, other: &Tensor2) -> Result<Tensor2> {
        if self.cols != other.cols {
            return Err(Error::invalid("vstack requires equal column counts"));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Tensor2 {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn ensure_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::numeric(format!(
                "non-finite value in {}x{} tensor",
                self.rows, self.cols
            )))
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

fn check_same_shape(a: &Tensor2, b: &Tensor2, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::invalid(format!(
            "{} requires equal shapes, got {}x{} and {}x{}",
            what, a.rows, a.cols, b.rows, b.cols
        )));
    }
    Ok(())
}

/// a (n x k) times b (k x m), optionally transposing either operand first.
pub fn matmul_ex(a: &Tensor2, ta: bool, b: &Tensor2, tb: bool) -> Result<Tensor2> {
    let (m, ka) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
    let (kb, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
    if ka != kb {
        return Err(Error::invalid(format!(
            "matmul inner dimensions differ: {} vs {}",
            ka, kb
        )));
    }
    let (rsa, csa) = if ta {
        (1isize, a.cols as isize)
    } else {
        (a.cols as isize, 1isize)
    };
    let (rsb, csb) = if tb {
        (1isize, b.cols as isize)
    } else {
        (b.cols as isize, 1isize)
    };
    let mut out = Tensor2::zeros(m, n);
    if m > 0 && n > 0 && ka > 0 {
        unsafe {
            matrixmultiply::dgemm(
                m,
                ka,
                n,
                1.0,
                a.data.as_ptr(),
                rsa,
                csa,
                b.data.as_ptr(),
                rsb,
                csb,
                0.0,
                out.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    out.ensure_finite()?;
    Ok(out)
}

pub fn matmul(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    matmul_ex(a, false, b, false)
}

/// Add a 1 x m row vector to every row of a n x m matrix.
pub fn add_row(a: &Tensor2, row: &Tensor2) -> Result<Tensor2> {
    if row.rows != 1 || row.cols != a.cols {
        return Err(Error::invalid(format!(
            "row broadcast requires 1x{}, got {}x{}",
            a.cols, row.rows, row.cols
        )));
    }
    let mut out = a.clone();
    for r in 0..a.rows {
        let base = r * a.cols;
        for c in 0..a.cols {
            out.data[base + c] += row.data[c];
        }
    }
    out.ensure_finite()?;
    Ok(out)
}

pub fn add(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_same_shape(a, b, "add")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Tensor2::from_vec(a.rows, a.cols, data)
}

pub fn sub(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_same_shape(a, b, "sub")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
    Tensor2::from_vec(a.rows, a.cols, data)
}

pub fn mul_elem(a: &Tensor2, b: &Tensor2) -> Result<Tensor2> {
    check_same_shape(a, b, "elementwise multiply")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Tensor2::from_vec(a.rows, a.cols, data)
}

pub fn scale(a: &Tensor2, s: f64) -> Result<Tensor2> {
    Tensor2::from_vec(a.rows, a.cols, a.data.iter().map(|x| x * s).collect())
}

pub fn add_scalar(a: &Tensor2, s: f64) -> Result<Tensor2> {
    Tensor2::from_vec(a.rows, a.cols, a.data.iter().map(|x| x + s).collect())
}

pub fn map(a: &Tensor2, f: impl Fn(f64) -> f64) -> Result<Tensor2> {
    Tensor2::from_vec(a.rows, a.cols, a.data.iter().map(|&x| f(x)).collect())
}

pub fn mean_all(a: &Tensor2) -> Result<Tensor2> {
    if a.is_empty() {
        return Err(Error::invalid("mean of an empty tensor"));
    }
    Tensor2::scalar(a.data.iter().sum::<f64>() / a.len() as f64)
}

/// Squared Euclidean distances between the rows of x (n x d) and the rows of
/// c (k x d), as an n x k matrix. Uses the expansion
/// |x - c|^2 = |x|^2 + |c|^2 - 2 x.c so the dominant cost is one matmul;
/// results are clamped at zero against cancellation.
pub fn pairwise_sqdist(x: &Tensor2, c: &Tensor2) -> Result<Tensor2> {
    if x.cols != c.cols {
        return Err(Error::invalid(format!(
            "pairwise distances need equal widths, got {} and {}",
            x.cols, c.cols
        )));
    }
    let mut out = matmul_ex(x, false, c, true)?;
    let xs: Vec<f64> = (0..x.rows)
        .map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>())
        .collect();
    let cs: Vec<f64> = (0..c.rows)
        .map(|j| c.row(j).iter().map(|v| v * v).sum::<f64>())
        .collect();
    for i in 0..x.rows {
        let base = i * c.rows;
        for j in 0..c.rows {
            out.data[base + j] = (xs[i] + cs[j] - 2.0 * out.data[base + j]).max(0.0);
        }
    }
    out.ensure_finite()?;
    Ok(out)
}

/// Gaussian kernel responses exp(-d2_ij / (2 w_j^2)) where the widths are
/// stored as logs in a 1 x k row.
pub fn rbf_kernel(d2: &Tensor2, log_widths: &Tensor2) -> Result<Tensor2> {
    if log_widths.rows != 1 || log_widths.cols != d2.cols {
        return Err(Error::invalid(format!(
            "log-width row must be 1x{}, got {}x{}",
            d2.cols, log_widths.rows, log_widths.cols
        )));
    }
    let inv_two_s2: Vec<f64> = log_widths
        .data
        .iter()
        .map(|l| 0.5 * (-2.0 * l).exp())
        .collect();
    let mut out = d2.clone();
    for i in 0..d2.rows {
        let base = i * d2.cols;
        for j in 0..d2.cols {
            out.data[base + j] = (-d2.data[base + j] * inv_two_s2[j]).exp();
        }
    }
    out.ensure_finite()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length_and_finiteness() {
        assert!(Tensor2::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Tensor2::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Tensor2::from_vec(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn matmul_small_case() {
        let a = Tensor2::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor2::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_transposed_variants_agree_with_plain() {
        let a = Tensor2::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 4.0, -1.0]).unwrap();
        let b = Tensor2::from_vec(2, 3, vec![2.0, 1.0, 0.0, -3.0, 5.0, 2.0]).unwrap();
        // a (2x3) @ b^T (3x2)
        let nt = matmul_ex(&a, false, &b, true).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let manual: f64 = (0..3).map(|k| a.get(i, k) * b.get(j, k)).sum();
                assert!((nt.get(i, j) - manual).abs() < 1e-12);
            }
        }
        // a^T (3x2) @ b (2x3)
        let tn = matmul_ex(&a, true, &b, false).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let manual: f64 = (0..2).map(|k| a.get(k, i) * b.get(k, j)).sum();
                assert!((tn.get(i, j) - manual).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_mismatch_is_invalid() {
        let a = Tensor2::zeros(2, 3);
        let b = Tensor2::zeros(2, 3);
        assert!(matches!(matmul(&a, &b), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pairwise_sqdist_matches_direct_computation() {
        let x = Tensor2::from_vec(2, 3, vec![1.0, 0.0, -1.0, 2.0, 2.0, 2.0]).unwrap();
        let c = Tensor2::from_vec(2, 3, vec![0.0, 0.0, 0.0, 1.0, 2.0, 3.0]).unwrap();
        let d2 = pairwise_sqdist(&x, &c).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let direct: f64 = (0..3)
                    .map(|k| (x.get(i, k) - c.get(j, k)).powi(2))
                    .sum();
                assert!((d2.get(i, j) - direct).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pairwise_sqdist_never_negative() {
        // Nearly identical rows can go slightly negative under the expansion
        // without the clamp.
        let x = Tensor2::from_vec(1, 2, vec![1.0 + 1e-16, 2.0]).unwrap();
        let c = Tensor2::from_vec(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(pairwise_sqdist(&x, &c).unwrap().get(0, 0) >= 0.0);
    }

    #[test]
    fn rbf_kernel_at_zero_distance_is_one() {
        let d2 = Tensor2::zeros(3, 2);
        let lw = Tensor2::from_vec(1, 2, vec![0.0, 1.5]).unwrap();
        let k = rbf_kernel(&d2, &lw).unwrap();
        assert!(k.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn add_row_broadcasts() {
        let a = Tensor2::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = Tensor2::from_vec(1, 2, vec![10.0, 20.0]).unwrap();
        assert_eq!(add_row(&a, &r).unwrap().data(), &[11.0, 22.0, 13.0, 24.0]);
    }

    #[test]
    fn take_rows_and_vstack_roundtrip() {
        let a = Tensor2::from_vec(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let top = a.take_rows(&[0]).unwrap();
        let rest = a.take_rows(&[1, 2]).unwrap();
        assert_eq!(top.vstack(&rest).unwrap(), a);
    }
}
