//! Dense column-major design matrices and Householder QR least squares.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot below which a column is treated as linearly dependent.
pub const PIVOT_TOL: f64 = 1e-12;

/// How the columns of a design were standardized, if at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    None,
    /// Mean 0, sample standard deviation (divisor n-1) equal to 1.
    Sample,
    /// Mean 0, (1/n) Σ x² = 1.
    Population,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    n: usize,
    p: usize,
    /// Column-major entries.
    data: Vec<f64>,
    standardization: Standardization,
}

impl DesignMatrix {
    pub fn from_col_major(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::Domain(format!(
                "design needs {} entries for {n}x{p}, got {}",
                n * p,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design has non-finite entries".into()));
        }
        Ok(Self { n, p, data, standardization: Standardization::None })
    }

    /// Build from row-major entries.
    pub fn from_row_major(n: usize, p: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != n * p {
            return Err(Error::Domain(format!("design needs {} entries, got {}", n * p, rows.len())));
        }
        let mut data = vec![0.0; n * p];
        for i in 0..n {
            for j in 0..p {
                data[j * n + i] = rows[i * p + j];
            }
        }
        Self::from_col_major(n, p, data)
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let p = cols.len();
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::Domain("columns differ in length".into()));
        }
        Self::from_col_major(n, p, cols.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self { n, p: n, data, standardization: Standardization::None }
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.n + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p).map(|j| self.get(i, j)).collect()
    }

    pub fn standardization(&self) -> Standardization {
        self.standardization
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization != Standardization::None
    }

    /// Center every column and scale it to unit spread under `mode`.
    /// Returns the original column means and scales.
    pub fn standardize(&mut self, mode: Standardization) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let divisor = match mode {
            Standardization::None => return Ok((vec![0.0; self.p], vec![1.0; self.p])),
            Standardization::Sample => n as f64 - 1.0,
            Standardization::Population => n as f64,
        };
        if divisor <= 0.0 {
            return Err(Error::Degenerate("cannot standardize a single row".into()));
        }
        let mut means = Vec::with_capacity(self.p);
        let mut scales = Vec::with_capacity(self.p);
        for j in 0..self.p {
            let col = &mut self.data[j * n..(j + 1) * n];
            let mean = col.iter().sum::<f64>() / n as f64;
            col.iter_mut().for_each(|v| *v -= mean);
            let scale = (col.iter().map(|v| v * v).sum::<f64>() / divisor).sqrt();
            if scale == 0.0 {
                return Err(Error::Degenerate(format!("column {j} is constant")));
            }
            col.iter_mut().for_each(|v| *v /= scale);
            means.push(mean);
            scales.push(scale);
        }
        self.standardization = mode;
        Ok((means, scales))
    }

    /// Rows picked by `idx` (repeats allowed), in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut data = Vec::with_capacity(m * self.p);
        for j in 0..self.p {
            let col = self.col(j);
            data.extend(idx.iter().map(|&i| col[i]));
        }
        Self { n: m, p: self.p, data, standardization: Standardization::None }
    }

    /// Columns picked by `idx`, in that order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.n * idx.len());
        for &j in idx {
            data.extend_from_slice(self.col(j));
        }
        Self { n: self.n, p: idx.len(), data, standardization: self.standardization }
    }

    /// `X β`.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        assert_eq!(beta.len(), self.p, "coefficient length");
        let mut out = vec![0.0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                for (o, x) in out.iter_mut().zip(self.col(j)) {
                    *o += b * x;
                }
            }
        }
        out
    }

    /// `X' v`.
    pub fn t_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "vector length");
        (0..self.p).map(|j| dot(self.col(j), v)).collect()
    }

    /// `X' X` as a dense symmetric p×p matrix (row-major = column-major).
    pub fn gram(&self) -> Vec<f64> {
        let p = self.p;
        let mut g = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let v = dot(self.col(a), self.col(b));
                g[a * p + b] = v;
                g[b * p + a] = v;
            }
        }
        g
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Householder QR factorization of a full-column-rank design.
#[derive(Clone, Debug)]
pub struct Qr {
    n: usize,
    p: usize,
    /// Householder vectors below the diagonal, strict upper triangle of R above.
    qr: Vec<f64>,
    rdiag: Vec<f64>,
}

impl Qr {
    pub fn new(x: &DesignMatrix) -> Result<Self> {
        let (n, p) = (x.n, x.p);
        if p > n {
            return Err(Error::RankDeficient { column: n, pivot: 0.0 });
        }
        let mut qr = x.data.clone();
        let mut rdiag = vec![0.0; p];
        for k in 0..p {
            let orig_norm = x.col(k).iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut nrm = qr[k * n + k..(k + 1) * n].iter().fold(0.0_f64, |acc, v| acc.hypot(*v));
            if orig_norm == 0.0 || nrm / orig_norm < PIVOT_TOL {
                let pivot = if orig_norm == 0.0 { 0.0 } else { nrm / orig_norm };
                return Err(Error::RankDeficient { column: k, pivot });
            }
            if qr[k * n + k] < 0.0 {
                nrm = -nrm;
            }
            for i in k..n {
                qr[k * n + i] /= nrm;
            }
            qr[k * n + k] += 1.0;
            for j in k + 1..p {
                let mut s = 0.0;
                for i in k..n {
                    s += qr[k * n + i] * qr[j * n + i];
                }
                s = -s / qr[k * n + k];
                for i in k..n {
                    qr[j * n + i] += s * qr[k * n + i];
                }
            }
            rdiag[k] = -nrm;
        }
        Ok(Self { n, p, qr, rdiag })
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.rdiag[i]
        } else {
            self.qr[j * self.n + i]
        }
    }

    /// `Q' y` (first p entries are the rotated projection).
    fn qt_apply(&self, y: &mut [f64]) {
        let n = self.n;
        for k in 0..self.p {
            let hk = &self.qr[k * n..(k + 1) * n];
            let mut s = 0.0;
            for i in k..n {
                s += hk[i] * y[i];
            }
            s = -s / hk[k];
            for i in k..n {
                y[i] += s * hk[i];
            }
        }
    }

    /// Least-squares coefficients for response `y`.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n {
            return Err(Error::Domain(format!("response has {} rows, design {}", y.len(), self.n)));
        }
        let mut z = y.to_vec();
        self.qt_apply(&mut z);
        z.truncate(self.p);
        Ok(self.r_solve(&z))
    }

    /// `R v`, so that `‖R v‖² = v' X'X v`.
    pub fn r_mul(&self, v: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|i| (i..self.p).map(|j| self.r(i, j) * v[j]).sum())
            .collect()
    }

    /// `R⁻¹ v` by back substitution.
    pub fn r_solve(&self, v: &[f64]) -> Vec<f64> {
        let mut x = v.to_vec();
        for i in (0..self.p).rev() {
            let mut s = x[i];
            for j in i + 1..self.p {
                s -= self.r(i, j) * x[j];
            }
            x[i] = s / self.rdiag[i];
        }
        x
    }

    /// `R⁻ᵀ v` by forward substitution.
    pub fn rt_solve(&self, v: &[f64]) -> Vec<f64> {
        let mut x = v.to_vec();
        for i in 0..self.p {
            let mut s = x[i];
            for j in 0..i {
                s -= self.r(j, i) * x[j];
            }
            x[i] = s / self.rdiag[i];
        }
        x
    }

    /// Column `j` of `(X'X)⁻¹`.
    pub fn xtx_inv_col(&self, j: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.p];
        e[j] = 1.0;
        self.r_solve(&self.rt_solve(&e))
    }

    /// `v' X'X v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.r_mul(v).iter().map(|a| a * a).sum()
    }
}

/// Unique minimizer of `‖y − Xβ‖²` via Householder QR.
pub fn least_squares(x: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    Qr::new(x)?.solve(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathkit::rng::RngStream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_design(n: usize, p: usize, seed: u64) -> DesignMatrix {
        let mut rng = RngStream::new(seed).rng();
        let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
        DesignMatrix::from_col_major(n, p, data).unwrap()
    }

    /// Pseudo-inverse oracle via one-sided Jacobi SVD: β = V Σ⁻¹ U' y.
    fn pinv_solve(x: &DesignMatrix, y: &[f64]) -> Vec<f64> {
        let (n, p) = (x.nrows(), x.ncols());
        let mut u: Vec<Vec<f64>> = (0..p).map(|j| x.col(j).to_vec()).collect();
        let mut v: Vec<Vec<f64>> = (0..p).map(|j| (0..p).map(|i| f64::from(u8::from(i == j))).collect()).collect();
        for _ in 0..100 {
            let mut off = 0.0_f64;
            for a in 0..p {
                for b in a + 1..p {
                    let alpha: f64 = u[a].iter().map(|t| t * t).sum();
                    let beta: f64 = u[b].iter().map(|t| t * t).sum();
                    let gamma: f64 = (0..n).map(|i| u[a][i] * u[b][i]).sum();
                    off = off.max(gamma.abs() / (alpha * beta).sqrt());
                    if gamma == 0.0 {
                        continue;
                    }
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..n {
                        let (ua, ub) = (u[a][i], u[b][i]);
                        u[a][i] = c * ua - s * ub;
                        u[b][i] = s * ua + c * ub;
                    }
                    for i in 0..p {
                        let (va, vb) = (v[a][i], v[b][i]);
                        v[a][i] = c * va - s * vb;
                        v[b][i] = s * va + c * vb;
                    }
                }
            }
            if off < 1e-15 {
                break;
            }
        }
        let mut beta = vec![0.0; p];
        for k in 0..p {
            let sigma2: f64 = u[k].iter().map(|t| t * t).sum();
            let coef = dot(&u[k], y) / sigma2;
            for i in 0..p {
                beta[i] += coef * v[k][i];
            }
        }
        beta
    }

    #[test]
    fn identity_design() {
        let b = least_squares(&DesignMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        for (got, want) in b.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn matches_pseudo_inverse() {
        for seed in 0..5 {
            let x = random_design(10, 3, seed);
            let mut rng = RngStream::new(100 + seed).rng();
            let y: Vec<f64> = (0..10).map(|_| rng.sample(StandardNormal)).collect();
            let b = least_squares(&x, &y).unwrap();
            let oracle = pinv_solve(&x, &y);
            for (a, o) in b.iter().zip(&oracle) {
                assert!((a - o).abs() < 1e-8, "{a} vs {o}");
            }
        }
    }

    #[test]
    fn duplicated_column_is_rank_deficient() {
        let x = random_design(10, 3, 1);
        let dup = DesignMatrix::from_columns(&[x.col(0).to_vec(), x.col(1).to_vec(), x.col(0).to_vec()]).unwrap();
        assert!(matches!(least_squares(&dup, &[0.0; 10]), Err(Error::RankDeficient { column: 2, .. })));
        let wide = random_design(3, 4, 2);
        assert!(matches!(Qr::new(&wide), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn normal_equation_residual_small() {
        let x = random_design(200, 60, 3);
        let mut rng = RngStream::new(4).rng();
        let y: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let b = least_squares(&x, &y).unwrap();
        let fitted = x.mul_vec(&b);
        let r: Vec<f64> = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
        let ne = x.t_mul_vec(&r);
        let xty = x.t_mul_vec(&y);
        let scale = xty.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(ne.iter().all(|v| v.abs() <= 1e-8 * scale));
    }

    #[test]
    fn r_factor_reproduces_gram() {
        let x = random_design(30, 5, 6);
        let qr = Qr::new(&x).unwrap();
        let g = x.gram();
        let v = [0.3, -1.0, 2.0, 0.5, -0.7];
        let quad: f64 = (0..5).map(|a| (0..5).map(|b| v[a] * g[a * 5 + b] * v[b]).sum::<f64>()).sum();
        assert!((qr.quad_form(&v) - quad).abs() < 1e-9 * quad);
        // (X'X)⁻¹ column times X'X gives a unit vector.
        let c = qr.xtx_inv_col(2);
        for a in 0..5 {
            let e: f64 = (0..5).map(|b| g[a * 5 + b] * c[b]).sum();
            assert!((e - f64::from(u8::from(a == 2))).abs() < 1e-10);
        }
    }

    #[test]
    fn standardize_sample_and_population() {
        let mut x = random_design(50, 4, 8);
        x.standardize(Standardization::Sample).unwrap();
        for j in 0..4 {
            let c = x.col(j);
            let mean = c.iter().sum::<f64>() / 50.0;
            let var = c.iter().map(|v| v * v).sum::<f64>() / 49.0;
            assert!(mean.abs() < 1e-10 && (var.sqrt() - 1.0).abs() < 1e-10);
        }
        let mut x = random_design(50, 4, 9);
        x.standardize(Standardization::Population).unwrap();
        let c = x.col(0);
        assert!((c.iter().map(|v| v * v).sum::<f64>() / 50.0 - 1.0).abs() < 1e-10);
        assert!(x.is_standardized());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn column_permutation_invariance(seed in 0u64..10_000, perm_seed in 0u64..10_000) {
            let (n, p) = (25, 6);
            let x = random_design(n, p, seed);
            let mut rng = RngStream::new(perm_seed).rng();
            let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut perm: Vec<usize> = (0..p).collect();
            for i in (1..p).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let b = least_squares(&x, &y).unwrap();
            let bp = least_squares(&x.select_columns(&perm), &y).unwrap();
            for (k, &j) in perm.iter().enumerate() {
                prop_assert!((bp[k] - b[j]).abs() < 1e-8);
            }
        }
    }
}
