//! Compressed-row matrices, a banded LDLᵀ factorization (real or complex
//! symmetric), and preconditioned conjugate gradients.

use std::io::Write;

use num_complex::Complex64;
use num_traits::NumAssign;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds an n×n matrix from (row, col, value) triplets; duplicates are
    /// summed in input order.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            // stable sort keeps the summation order of duplicates deterministic
            r.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < r.len() {
                let j = r[k].0;
                let mut s = 0.0;
                while k < r.len() && r[k].0 == j {
                    s += r[k].1;
                    k += 1;
                }
                col_idx.push(j);
                vals.push(s);
            }
            row_ptr.push(col_idx.len());
        }
        Csr {
            n,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), &t)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// xᵀ A x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        crate::quadrature::accurate_sum((0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()))
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// max |i − j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// a·self + b·other (same dimension).
    pub fn linear_combination(&self, a: f64, other: &Csr, b: f64) -> Csr {
        let mut t = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            t.extend(self.row(i).map(|(j, v)| (i, j, a * v)));
            t.extend(other.row(i).map(|(j, v)| (i, j, b * v)));
        }
        Csr::from_triplets(self.n, &t)
    }

    /// self + diag(d).
    pub fn add_diagonal(&self, d: &[f64]) -> Csr {
        self.linear_combination(1.0, &Csr::from_diagonal(d), 1.0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// MatrixMarket coordinate format, values with 17 significant digits.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.n, self.n, self.nnz())?;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }
}

/// Field types the banded factorization works over.
pub trait BandScalar: NumAssign + Copy + Send + Sync + std::fmt::Debug {
    fn from_real(x: f64) -> Self;
    fn modulus(self) -> f64;
}

impl BandScalar for f64 {
    fn from_real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl BandScalar for Complex64 {
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// LDLᵀ factorization of a symmetric band matrix without pivoting. Suitable
/// for SPD matrices and for complex symmetric matrices with SPD real part.
#[derive(Debug, Clone)]
pub struct BandLdl<T> {
    n: usize,
    b: usize,
    // row i holds L[i][i-b..i] at l[i*b .. i*b + b] (index k ↔ column i-b+k)
    l: Vec<T>,
    d: Vec<T>,
}

impl<T: BandScalar> BandLdl<T> {
    /// Factorizes the symmetric matrix whose lower band entries are produced by
    /// `entry(i, j)` for i − b ≤ j ≤ i.
    pub fn factor_with(n: usize, b: usize, entry: impl Fn(usize, usize) -> T) -> Result<Self> {
        let mut l = vec![T::zero(); n * b];
        let mut d = vec![T::zero(); n];
        let mut t = vec![T::zero(); b];
        let mut scale: f64 = 0.0;
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let off = lo + b - i; // first used slot in row i
            for j in lo..i {
                let mut s = entry(i, j);
                // Σ_{k=lo}^{j-1} t_k L_jk ; row j starts at column j-b ≤ lo
                let jrow = &l[j * b..j * b + b];
                for k in lo..j {
                    s -= t[k + b - i] * jrow[k + b - j];
                }
                t[j + b - i] = s;
            }
            let mut dii = entry(i, i);
            for j in lo..i {
                let lij = t[j + b - i] / d[j];
                dii -= t[j + b - i] * lij;
                l[i * b + (j + b - i)] = lij;
            }
            for slot in t.iter_mut().take(off) {
                *slot = T::zero();
            }
            scale = scale.max(entry(i, i).modulus());
            if dii.modulus() <= 1e-14 * scale || !dii.modulus().is_finite() {
                return Err(Error::Solver {
                    reason: format!("zero pivot in banded LDLᵀ at row {i}"),
                    residual: f64::NAN,
                });
            }
            d[i] = dii;
        }
        Ok(BandLdl { n, b, l, d })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place.
    pub fn solve_in_place(&self, x: &mut [T]) {
        let (n, b) = (self.n, self.b);
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let row = &self.l[i * b..i * b + b];
            let mut s = x[i];
            for j in lo..i {
                s -= row[j + b - i] * x[j];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            let xi = x[i];
            let lo = i.saturating_sub(b);
            let row = &self.l[i * b..i * b + b];
            for j in lo..i {
                x[j] -= row[j + b - i] * xi;
            }
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

impl BandLdl<f64> {
    /// Factorizes a symmetric CSR matrix.
    pub fn factor(a: &Csr) -> Result<Self> {
        let b = a.bandwidth();
        Self::factor_with(a.n, b, |i, j| a.get(i, j))
    }
}

/// Outcome of a CG solve.
#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD `a`.
pub fn cg(a: &Csr, rhs: &[f64], rel_tol: f64, max_iter: usize) -> Result<CgResult> {
    let n = a.n;
    let dinv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let bnorm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgResult {
            x,
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut res = 1.0;
    for it in 0..max_iter {
        a.matvec_into(&p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = r.iter().map(|v| v * v).sum::<f64>().sqrt() / bnorm;
        if res <= rel_tol {
            return Ok(CgResult {
                x,
                iterations: it + 1,
                relative_residual: res,
            });
        }
        for k in 0..n {
            z[k] = r[k] * dinv[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::Solver {
        reason: format!("conjugate gradients did not converge in {max_iter} iterations"),
        residual: res,
    })
}

/// ‖a x − b‖ / ‖b‖.
pub fn relative_residual(a: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let num: f64 = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
