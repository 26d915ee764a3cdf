//! Dense real linear algebra shared by the LP engine and the polytope machinery.
//!
//! Everything here is small and dense on purpose: carrier spaces in this crate
//! have dimension at most a few dozen, so `Vec<f64>`-backed matrices with
//! Gaussian elimination beat any sparse or decomposition-heavy approach.

/// Pivot threshold for rank decisions, scaled by the largest entry of the row
/// under consideration.
pub(crate) const PIVOT_EPS: f64 = 1e-11;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Kronecker product of two vectors; the right factor index runs fastest.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(cols: &[Vec<f64>]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(r, c);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), r, "ragged columns");
            for (i, &v) in col.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec shape");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * out.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn kron(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == 0.0 {
                    continue;
                }
                for p in 0..other.rows {
                    for q in 0..other.cols {
                        out.set(i * other.rows + p, j * other.cols + q, a * other.get(p, q));
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add_matrix(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Rank via Gaussian elimination with partial pivoting.
    pub fn rank(&self) -> usize {
        let mut a = self.clone();
        let mut rank = 0;
        let mut col = 0;
        while rank < a.rows && col < a.cols {
            let (pivot_row, pivot_val) = (rank..a.rows)
                .map(|i| (i, a.get(i, col).abs()))
                .fold((rank, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            if pivot_val <= PIVOT_EPS * scale {
                col += 1;
                continue;
            }
            a.swap_rows(rank, pivot_row);
            for i in (rank + 1)..a.rows {
                let f = a.get(i, col) / a.get(rank, col);
                for j in col..a.cols {
                    let v = a.get(i, j) - f * a.get(rank, j);
                    a.set(i, j, v);
                }
            }
            rank += 1;
            col += 1;
        }
        rank
    }

    fn swap_rows(&mut self, i: usize, k: usize) {
        if i == k {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(i * self.cols + j, k * self.cols + j);
        }
    }

    /// Solve the square system `self * x = b` by Gaussian elimination with
    /// partial pivoting. `None` when the matrix is singular at working precision.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        assert_eq!(self.rows, self.cols, "solve wants a square matrix");
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut rhs = b.to_vec();
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, val) = (k..n)
                .map(|i| (i, a.get(i, k).abs()))
                .fold((k, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if val <= PIVOT_EPS * scale {
                return None;
            }
            a.swap_rows(k, p);
            rhs.swap(k, p);
            perm.swap(k, p);
            for i in (k + 1)..n {
                let f = a.get(i, k) / a.get(k, k);
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    let v = a.get(i, j) - f * a.get(k, j);
                    a.set(i, j, v);
                }
                rhs[i] -= f * rhs[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = rhs[i];
            for j in (i + 1)..n {
                s -= a.get(i, j) * x[j];
            }
            x[i] = s / a.get(i, i);
        }
        Some(x)
    }

    pub fn inverse(&self) -> Option<Matrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut out = Matrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = self.solve(&e)?;
            for i in 0..n {
                out.set(i, j, col[i]);
            }
        }
        Some(out)
    }

    /// Orthonormal-free nullspace basis via reduced row echelon form.
    pub fn nullspace(&self) -> Vec<Vec<f64>> {
        let mut a = self.clone();
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let mut pivot_cols = Vec::new();
        let mut r = 0;
        for c in 0..a.cols {
            if r == a.rows {
                break;
            }
            let (p, val) = (r..a.rows)
                .map(|i| (i, a.get(i, c).abs()))
                .fold((r, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if val <= PIVOT_EPS * scale {
                continue;
            }
            a.swap_rows(r, p);
            let pv = a.get(r, c);
            for j in 0..a.cols {
                let v = a.get(r, j) / pv;
                a.set(r, j, v);
            }
            for i in 0..a.rows {
                if i == r {
                    continue;
                }
                let f = a.get(i, c);
                if f == 0.0 {
                    continue;
                }
                for j in 0..a.cols {
                    let v = a.get(i, j) - f * a.get(r, j);
                    a.set(i, j, v);
                }
            }
            pivot_cols.push(c);
            r += 1;
        }
        let free_cols: Vec<usize> = (0..a.cols).filter(|c| !pivot_cols.contains(c)).collect();
        let mut basis = Vec::new();
        for &f in &free_cols {
            let mut v = vec![0.0; a.cols];
            v[f] = 1.0;
            for (row, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -a.get(row, f);
            }
            basis.push(v);
        }
        basis
    }
}

/// Solve `L * points = images` for the matrix `L`, where `points` and `images`
/// list corresponding columns. Uses a column basis of `points` and reports the
/// worst-case residual over all columns, which is nonzero exactly when no
/// linear map is consistent with the requested images.
pub fn linear_extension(points: &Matrix, images: &Matrix) -> (Matrix, f64) {
    assert_eq!(points.cols(), images.cols(), "column count mismatch");
    let d = points.rows();
    // Greedy column basis.
    let mut basis_idx: Vec<usize> = Vec::new();
    let mut chosen: Vec<Vec<f64>> = Vec::new();
    for j in 0..points.cols() {
        if basis_idx.len() == d {
            break;
        }
        let mut cand = chosen.clone();
        cand.push(points.column(j));
        if Matrix::from_cols(&cand).rank() == cand.len() {
            chosen = cand;
            basis_idx.push(j);
        }
    }
    assert_eq!(basis_idx.len(), d, "points do not span the carrier");
    let p_b = Matrix::from_cols(&chosen);
    let q_b = Matrix::from_cols(
        &basis_idx
            .iter()
            .map(|&j| images.column(j))
            .collect::<Vec<_>>(),
    );
    let p_inv = p_b.inverse().expect("basis is invertible by construction");
    let l = q_b.matmul(&p_inv);
    let recon = l.matmul(points);
    let mut residual = 0.0f64;
    for j in 0..points.cols() {
        residual = residual.max(linf_distance(&recon.column(j), &images.column(j)));
    }
    (l, residual)
}

/// Visit every k-subset of `0..n` in lexicographic order.
pub fn for_each_combination<F: FnMut(&[usize])>(n: usize, k: usize, mut f: F) {
    if k > n {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k as isize - 1;
        while i >= 0 && idx[i as usize] == i as usize + n - k {
            i -= 1;
        }
        if i < 0 {
            return;
        }
        let i = i as usize;
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Number of k-subsets of an n-set, saturating at `usize::MAX`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}
