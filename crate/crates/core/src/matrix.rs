//! Dense complex matrices on small truncated Hilbert spaces.
//!
//! Everything here is row-major and square. Dimensions stay below ~100
//! (2 qubit levels times a truncated Fock ladder), so dense storage and
//! simple kernels beat any sparse machinery. The multiply kernel skips
//! zero entries of the left factor, which makes products with ladder
//! operators cost O(n^2).

use num_complex::Complex64;

use crate::error::CoreError;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Square complex matrix, row-major dense.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    /// Outer product |u><v| of two kets.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        assert_eq!(u.len(), v.len());
        Self::from_fn(u.len(), |i, j| u[i] * v[j].conj())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn check_same_dim(&self, other: &CMatrix) -> Result<(), CoreError> {
        if self.dim != other.dim {
            return Err(CoreError::ShapeMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }

    pub fn fill_zero(&mut self) {
        self.data.fill(ZERO);
    }

    pub fn copy_from(&mut self, src: &CMatrix) {
        debug_assert_eq!(self.dim, src.dim);
        self.data.copy_from_slice(&src.data);
    }

    /// self += s * m
    pub fn add_scaled_assign(&mut self, m: &CMatrix, s: Complex64) {
        debug_assert_eq!(self.dim, m.dim);
        for (d, &v) in self.data.iter_mut().zip(&m.data) {
            *d += s * v;
        }
    }

    /// self += s * m^dagger
    pub fn add_adjoint_scaled_assign(&mut self, m: &CMatrix, s: Complex64) {
        debug_assert_eq!(self.dim, m.dim);
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                self.data[i * n + j] += s * m.data[j * n + i].conj();
            }
        }
    }

    pub fn scale_assign(&mut self, s: Complex64) {
        for d in self.data.iter_mut() {
            *d *= s;
        }
    }

    pub fn scaled(&self, s: Complex64) -> CMatrix {
        let mut m = self.clone();
        m.scale_assign(s);
        m
    }

    pub fn adjoint_into(&self, dst: &mut CMatrix) {
        debug_assert_eq!(self.dim, dst.dim);
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                dst.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
    }

    pub fn adjoint(&self) -> CMatrix {
        let mut dst = CMatrix::zeros(self.dim);
        self.adjoint_into(&mut dst);
        dst
    }

    /// dst = a * b. Zero entries of `a` are skipped, so keep sparse factors
    /// on the left (use adjoint identities for right-sparse products).
    pub fn mul_into(dst: &mut CMatrix, a: &CMatrix, b: &CMatrix) {
        debug_assert_eq!(a.dim, b.dim);
        debug_assert_eq!(a.dim, dst.dim);
        let n = a.dim;
        dst.data.fill(ZERO);
        for i in 0..n {
            let arow = &a.data[i * n..(i + 1) * n];
            let (dst_rows, _) = dst.data.split_at_mut((i + 1) * n);
            let drow = &mut dst_rows[i * n..];
            for (k, &aik) in arow.iter().enumerate() {
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                let brow = &b.data[k * n..(k + 1) * n];
                for (d, &bkj) in drow.iter_mut().zip(brow) {
                    *d += aik * bkj;
                }
            }
        }
    }

    pub fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let mut dst = CMatrix::zeros(a.dim);
        Self::mul_into(&mut dst, a, b);
        dst
    }

    /// Kronecker product; the left factor index is the major one.
    pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
        let (p, q) = (a.dim, b.dim);
        let n = p * q;
        let mut m = CMatrix::zeros(n);
        for i in 0..p {
            for j in 0..p {
                let aij = a.get(i, j);
                if aij.re == 0.0 && aij.im == 0.0 {
                    continue;
                }
                for k in 0..q {
                    for l in 0..q {
                        m.set(i * q + k, j * q + l, aij * b.get(k, l));
                    }
                }
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// tr(a * b) without forming the product.
    pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
        debug_assert_eq!(a.dim, b.dim);
        let n = a.dim;
        let mut t = ZERO;
        for i in 0..n {
            for k in 0..n {
                let aik = a.data[i * n + k];
                if aik.re == 0.0 && aik.im == 0.0 {
                    continue;
                }
                t += aik * b.data[k * n + i];
            }
        }
        t
    }

    /// In-place (M + M^dagger)/2.
    pub fn hermitize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in i..n {
                let s = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = s;
                self.data[j * n + i] = s.conj();
            }
        }
    }

    /// max |M_ij - conj(M_ji)|, the entrywise deviation from Hermiticity.
    pub fn herm_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn to_na(&self) -> nalgebra::DMatrix<Complex64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn eigvalsh(&self) -> Vec<f64> {
        let se = nalgebra::SymmetricEigen::new(self.to_na());
        let mut v: Vec<f64> = se.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// Eigendecomposition of a Hermitian matrix. Returns eigenvalues and a
    /// matrix whose k-th column is the k-th eigenvector.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let se = nalgebra::SymmetricEigen::new(self.to_na());
        let vals: Vec<f64> = se.eigenvalues.iter().copied().collect();
        let n = self.dim;
        let vecs = CMatrix::from_fn(n, |i, k| se.eigenvectors[(i, k)]);
        (vals, vecs)
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        let mut m = self.clone();
        m.add_scaled_assign(rhs, ONE);
        m
    }
}

impl std::ops::Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        let mut m = self.clone();
        m.add_scaled_assign(rhs, -ONE);
        m
    }
}

impl std::ops::Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix::mul(self, rhs)
    }
}

impl std::ops::Mul<Complex64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, s: Complex64) -> CMatrix {
        self.scaled(s)
    }
}

impl std::ops::Mul<f64> for &CMatrix {
    type Output = CMatrix;
    fn mul(self, s: f64) -> CMatrix {
        self.scaled(Complex64::new(s, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mul_matches_manual_product() {
        let a = CMatrix::from_fn(2, |i, j| c((i + 1) as f64, j as f64));
        let b = CMatrix::from_fn(2, |i, j| c(j as f64 - 1.0, i as f64));
        let p = CMatrix::mul(&a, &b);
        for i in 0..2 {
            for j in 0..2 {
                let want = a.get(i, 0) * b.get(0, j) + a.get(i, 1) * b.get(1, j);
                assert_abs_diff_eq!(p.get(i, j).re, want.re, epsilon = 1e-14);
                assert_abs_diff_eq!(p.get(i, j).im, want.im, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn adjoint_add_identity() {
        let a = CMatrix::from_fn(3, |i, j| c(i as f64, (j * j) as f64 - 1.0));
        let mut s = CMatrix::zeros(3);
        s.add_scaled_assign(&a, ONE);
        s.add_adjoint_scaled_assign(&a, ONE);
        assert!(s.herm_defect() < 1e-15);
        let direct = &a + &a.adjoint();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.get(i, j) - direct.get(i, j)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn trace_of_product_consistent() {
        let a = CMatrix::from_fn(4, |i, j| c((i * j) as f64, i as f64 - j as f64));
        let b = CMatrix::from_fn(4, |i, j| c(1.0 / (1.0 + i as f64 + j as f64), 0.3));
        let direct = CMatrix::mul(&a, &b).trace();
        let fast = CMatrix::trace_of_product(&a, &b);
        assert!((direct - fast).norm() < 1e-12);
    }

    #[test]
    fn kron_is_left_major() {
        let a = CMatrix::from_fn(2, |i, j| c((2 * i + j) as f64, 0.0));
        let b = CMatrix::identity(3);
        let k = CMatrix::kron(&a, &b);
        assert_eq!(k.dim(), 6);
        // block (i,j) of the product is a_ij * I3
        assert_abs_diff_eq!(k.get(0, 3).re, a.get(0, 1).re);
        assert_abs_diff_eq!(k.get(4, 1).re, a.get(1, 0).re);
        assert_abs_diff_eq!(k.get(4, 2).re, 0.0);
    }

    #[test]
    fn hermitian_eigendecomposition_reconstructs() {
        // Hermitian matrix with complex off-diagonals.
        let mut m = CMatrix::zeros(4);
        for i in 0..4 {
            m.set(i, i, c(i as f64 - 1.5, 0.0));
            for j in (i + 1)..4 {
                let v = c(0.3 * (i + j) as f64, 0.1 * (j as f64 - i as f64));
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        let (vals, vecs) = m.eigh();
        // residual || M v - lambda v || per eigenpair
        for k in 0..4 {
            for i in 0..4 {
                let mut mv = ZERO;
                for j in 0..4 {
                    mv += m.get(i, j) * vecs.get(j, k);
                }
                let r = (mv - vals[k] * vecs.get(i, k)).norm();
                assert!(r < 1e-10, "residual {r} for pair {k}");
            }
        }
        let tr: f64 = (0..4).map(|i| m.get(i, i).re).sum();
        let sum: f64 = vals.iter().sum();
        assert_abs_diff_eq!(tr, sum, epsilon = 1e-10);

        let sorted = m.eigvalsh();
        assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    }
}
