//! Small sparse/banded linear algebra: a CSR matrix for assembled stencil
//! operators and a banded LU with partial pivoting for the solves. Natural
//! node ordering keeps every system we factor banded.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row entry lists; duplicate columns within a row are summed
    /// and columns are sorted.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows.into_iter() {
            row.sort_by_key(|&(c, _)| c);
            let start = indices.len();
            for (c, v) in row {
                debug_assert!(c < cols);
                if indices.len() > start && *indices.last().unwrap() == c {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            rows: indptr.len() - 1,
            cols,
            indptr,
            indices,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[r]..self.indptr[r + 1];
        self.indices[range.clone()]
            .iter()
            .copied()
            .zip(self.data[range].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    /// `A^T y`.
    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr == 0.0 {
                continue;
            }
            for (c, v) in self.row(r) {
                out[c] += v * yr;
            }
        }
        out
    }

    /// Column-wise sums of `|A_rc| * |y_r|`; the magnitude of the terms that
    /// cancel in `A^T y`.
    pub fn tr_abs_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            for (c, v) in self.row(r) {
                out[c] += (v * yr).abs();
            }
        }
        out
    }

    /// Largest `|i - j|` over stored entries of `A^T D A`.
    pub fn normal_bandwidth(&self) -> usize {
        (0..self.rows)
            .map(|r| {
                let mut it = self.row(r).map(|(c, _)| c);
                match it.next() {
                    Some(first) => it.last().unwrap_or(first) - first,
                    None => 0,
                }
            })
            .max()
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        out
    }
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals. Storage keeps
/// `kl` extra super-diagonals for the fill produced by row pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// `A^T D A` for a CSR `A` and diagonal `D`, accumulated row by row.
    pub fn normal_from(a: &CsrMatrix, diag: &[f64]) -> Self {
        let bw = a.normal_bandwidth();
        let mut m = Self::zeros(a.cols(), bw, bw);
        m.add_normal(a, diag, 1.0);
        m
    }

    /// `self += scale * A^T D A`.
    pub fn add_normal(&mut self, a: &CsrMatrix, diag: &[f64], scale: f64) {
        for r in 0..a.rows() {
            let d = diag[r] * scale;
            if d == 0.0 {
                continue;
            }
            for (ci, vi) in a.row(r) {
                for (cj, vj) in a.row(r) {
                    self.add(ci, cj, d * vi * vj);
                }
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        let mut col = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for (j, c) in col.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *c += self.get(i, j).abs();
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }

    /// LU factorisation with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let reach = ku + kl;
        let mut perm = vec![0usize; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in k + 1..=last {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { column: k });
            }
            perm[k] = p;
            let cmax = (k + reach).min(n - 1);
            if p != k {
                for c in k..=cmax {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for r in k + 1..=last {
                let s = self.slot(r, k);
                let l = self.data[s] / pivot;
                self.data[s] = l;
                if l == 0.0 {
                    continue;
                }
                for c in k + 1..=cmax {
                    let u = self.data[self.slot(k, c)];
                    if u != 0.0 {
                        let t = self.slot(r, c);
                        self.data[t] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { m: self, perm })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    perm: Vec<usize>,
}

impl BandLu {
    pub fn size(&self) -> usize {
        self.m.n
    }

    fn upper_reach(&self, k: usize) -> usize {
        (k + self.m.ku + self.m.kl).min(self.m.n - 1)
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl) = (self.m.n, self.m.kl);
        let d = &self.m.data;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.perm[k]);
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    x[r] -= d[self.m.slot(r, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for c in k + 1..=self.upper_reach(k) {
                s -= d[self.m.slot(k, c)] * x[c];
            }
            x[k] = s / d[self.m.slot(k, k)];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl) = (self.m.n, self.m.kl);
        let d = &self.m.data;
        let mut x = b.to_vec();
        // U^T y = b
        for k in 0..n {
            let mut s = x[k];
            for i in k.saturating_sub(self.m.ku + kl)..k {
                if k <= self.upper_reach(i) {
                    s -= d[self.m.slot(i, k)] * x[i];
                }
            }
            x[k] = s / d[self.m.slot(k, k)];
        }
        // L^T z = y, then undo the row swaps
        for k in (0..n).rev() {
            let mut s = x[k];
            for r in k + 1..=(k + kl).min(n - 1) {
                s -= d[self.m.slot(r, k)] * x[r];
            }
            x[k] = s;
            x.swap(k, self.perm[k]);
        }
        x
    }

    /// Ratio of the largest to the smallest pivot magnitude.
    pub fn pivot_ratio(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for k in 0..self.m.n {
            let v = self.m.data[self.m.slot(k, k)].abs();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi / lo
    }

    /// Hager/Higham estimate of `||A^-1||_1`.
    pub fn inverse_norm1_estimate(&self) -> f64 {
        let n = self.m.n;
        let mut x = vec![1.0 / n as f64; n];
        let mut est = 0.0;
        for _ in 0..5 {
            let y = self.solve(&x);
            let norm: f64 = y.iter().map(|v| v.abs()).sum();
            if norm <= est {
                break;
            }
            est = norm;
            let xi: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
            let z = self.solve_transpose(&xi);
            let (jmax, zmax) = z
                .iter()
                .enumerate()
                .fold((0, 0.0_f64), |acc, (j, v)| if v.abs() > acc.1 { (j, v.abs()) } else { acc });
            let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
            if zmax <= ztx {
                break;
            }
            x = vec![0.0; n];
            x[jmax] = 1.0;
        }
        est
    }
}

/// 1-norm condition number estimate of a banded matrix.
pub fn condition_estimate(a: &BandMatrix, lu: &BandLu) -> f64 {
    let est = a.norm1() * lu.inverse_norm1_estimate();
    est.max(lu.pivot_ratio())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> BandMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut m = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                m.add(i, j, rng.random::<f64>() - 0.5);
            }
        }
        m
    }

    #[test]
    fn lu_solves_and_transpose_solves_nonsymmetric_band() {
        for (n, kl, ku) in [(1, 0, 0), (7, 1, 2), (40, 3, 1), (60, 5, 5)] {
            let a = random_band(n, kl, ku, n as u64);
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let b = a.mul_vec(&x);
            let lu = a.clone().factor().unwrap();
            let y = lu.solve(&b);
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() < 1e-8, "{n} {kl} {ku}");
            }
            // A^T x via dense transpose
            let mut bt = vec![0.0; n];
            for i in 0..n {
                for (j, btj) in bt.iter_mut().enumerate() {
                    *btj += a.get(i, j) * x[i];
                }
            }
            let yt = lu.solve_transpose(&bt);
            for (u, v) in x.iter().zip(&yt) {
                assert!((u - v).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 1.0);
        assert!(matches!(a.factor(), Err(Error::Singular { column: 1 })));
    }

    #[test]
    fn condition_estimate_of_scaled_identity_and_laplacian() {
        let mut a = BandMatrix::zeros(10, 0, 0);
        for i in 0..10 {
            a.add(i, i, if i == 3 { 1e-6 } else { 1.0 });
        }
        let lu = a.clone().factor().unwrap();
        assert!((condition_estimate(&a, &lu) - 1e6).abs() < 1.0);

        let n = 50;
        let mut l = BandMatrix::zeros(n, 1, 1);
        for i in 0..n {
            l.add(i, i, 2.0);
            if i > 0 {
                l.add(i, i - 1, -1.0);
                l.add(i - 1, i, -1.0);
            }
        }
        let lu = l.clone().factor().unwrap();
        // exact 1-norm condition number of tridiag(-1,2,-1) grows like n^2 / 2
        let c = condition_estimate(&l, &lu);
        assert!(c > 0.3 * (n * n) as f64 && c < 2.0 * (n * n) as f64, "{c}");
    }

    #[test]
    fn csr_products_match_dense() {
        let a = CsrMatrix::from_rows(
            4,
            vec![vec![(0, 1.0), (2, 2.0), (0, 0.5)], vec![], vec![(3, -1.0), (1, 4.0)]],
        );
        assert_eq!(a.rows(), 3);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0, 1.0]), vec![3.5, 0.0, 3.0]);
        assert_eq!(a.tr_mul_vec(&[1.0, 2.0, 3.0]), vec![1.5, 12.0, 2.0, -3.0]);
        let n = BandMatrix::normal_from(&a, &[1.0, 1.0, 2.0]);
        let dense = a.to_dense();
        for i in 0..4 {
            for j in 0..4 {
                let e: f64 = (0..3).map(|r| dense[r][i] * dense[r][j] * [1.0, 1.0, 2.0][r]).sum();
                assert_eq!(n.get(i, j), e);
            }
        }
    }
}
