//! Small dense linear algebra: square matrices and a growable Cholesky factor.

/// Dense row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = f(i, j);
            }
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mean_diagonal(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (0..self.n).map(|i| self.get(i, i)).sum::<f64>() / self.n as f64
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Lower-triangular Cholesky factor stored packed by rows, so that a new
/// row can be appended in O(n^2) when a point is added to the data set.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    packed: Vec<f64>,
}

#[inline]
fn offset(i: usize) -> usize {
    i * (i + 1) / 2
}

impl Cholesky {
    /// Factor `a + shift * I`. Returns `None` if a pivot is not strictly positive.
    pub fn factor(a: &Matrix, shift: f64) -> Option<Self> {
        let n = a.size();
        let mut packed = vec![0.0; offset(n)];
        for i in 0..n {
            let oi = offset(i);
            for j in 0..=i {
                let oj = offset(j);
                let mut s = a.get(i, j);
                if i == j {
                    s += shift;
                }
                let (ri, rj) = (&packed[oi..oi + j], &packed[oj..oj + j]);
                s -= ri.iter().zip(rj).map(|(p, q)| p * q).sum::<f64>();
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return None;
                    }
                    packed[oi + i] = s.sqrt();
                } else {
                    packed[oi + j] = s / packed[oj + j];
                }
            }
        }
        Some(Self { n, packed })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.packed[offset(i) + j]
        }
    }

    /// Solve `L y = b` in place.
    pub fn forward_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let o = offset(i);
            let row = &self.packed[o..o + i];
            let s: f64 = row.iter().zip(&b[..i]).map(|(l, y)| l * y).sum();
            b[i] = (b[i] - s) / self.packed[o + i];
        }
    }

    /// Solve `L^T x = y` in place.
    pub fn backward_in_place(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.n);
        for i in (0..self.n).rev() {
            let o = offset(i);
            y[i] /= self.packed[o + i];
            let xi = y[i];
            for (yj, l) in y[..i].iter_mut().zip(&self.packed[o..o + i]) {
                *yj -= l * xi;
            }
        }
    }

    /// Solve `(L L^T) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_in_place(&mut x);
        self.backward_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.packed[offset(i) + i].ln()).sum::<f64>()
    }

    /// Append one row/column. `cross` holds the new off-diagonal entries of the
    /// factored matrix and `diag` the new diagonal entry (shift included).
    /// Returns `false`, leaving `self` untouched, if the extension is not
    /// positive definite.
    pub fn extend(&mut self, cross: &[f64], diag: f64) -> bool {
        debug_assert_eq!(cross.len(), self.n);
        let mut l = cross.to_vec();
        self.forward_in_place(&mut l);
        let d2 = diag - l.iter().map(|v| v * v).sum::<f64>();
        if !(d2 > 0.0) || !d2.is_finite() {
            return false;
        }
        self.packed.extend_from_slice(&l);
        self.packed.push(d2.sqrt());
        self.n += 1;
        true
    }

    /// Reconstruct `L L^T`.
    pub fn reconstruct(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| {
            (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k)).sum()
        })
    }
}
