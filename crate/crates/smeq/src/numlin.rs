//! Dense complex linear algebra: subspaces under the Frobenius inner product,
//! null spaces, Hermitian functional calculus.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const DEFAULT_TOL: f64 = 1e-9;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Matrix unit e_{ij} of size r×c.
pub fn unit(r: usize, c: usize, i: usize, j: usize) -> CMat {
    let mut m = CMat::zeros(r, c);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

pub fn fnorm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius inner product trace(a* b).
pub fn hs(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn trace(m: &CMat) -> C64 {
    m.diagonal().iter().sum()
}

/// Column-major vectorization.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec(v: &[C64], rows: usize, cols: usize) -> CMat {
    CMat::from_column_slice(rows, cols, v)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Largest singular value.
pub fn opnorm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> CMat {
    CMat::from_fn(r, c, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let g = random_matrix(rng, d, d);
    (&g + g.adjoint()) * c(0.5)
}

/// Random real combination of the given matrices.
pub fn random_combination<R: Rng>(rng: &mut R, mats: &[CMat]) -> Option<CMat> {
    let first = mats.first()?;
    let mut acc = CMat::zeros(first.nrows(), first.ncols());
    for m in mats {
        acc += m * c(rng.sample::<f64, _>(StandardNormal));
    }
    Some(acc)
}

/// A subspace of r×c matrices with an orthonormal basis stored as the columns
/// of `basis` (each column a vectorized matrix).
#[derive(Debug, Clone)]
pub struct Subspace {
    pub rows: usize,
    pub cols: usize,
    pub basis: CMat,
}

impl Subspace {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Subspace { rows, cols, basis: CMat::zeros(rows * cols, 0) }
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Subspace { rows, cols, basis: eye(rows * cols) }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn vdim(&self) -> usize {
        self.rows * self.cols
    }

    /// The i-th basis element as a matrix.
    pub fn elem(&self, i: usize) -> CMat {
        unvec(self.basis.column(i).as_slice(), self.rows, self.cols)
    }

    pub fn elems(&self) -> Vec<CMat> {
        (0..self.dim()).map(|i| self.elem(i)).collect()
    }

    pub fn coords(&self, m: &CMat) -> CVec {
        self.basis.ad_mul(&vec_of(m))
    }

    /// Coordinates of many matrices at once, one column each.
    pub fn coords_many(&self, ms: &[CMat]) -> CMat {
        if ms.is_empty() {
            return CMat::zeros(self.dim(), 0);
        }
        self.basis.ad_mul(&stack_columns(ms))
    }

    pub fn from_coords(&self, x: &CVec) -> CMat {
        let v = &self.basis * x;
        unvec(v.as_slice(), self.rows, self.cols)
    }

    pub fn project(&self, m: &CMat) -> CMat {
        self.from_coords(&self.coords(m))
    }

    /// Distance from m to the subspace.
    pub fn residual(&self, m: &CMat) -> f64 {
        fnorm(&(m - self.project(m)))
    }

    pub fn contains(&self, m: &CMat, tol: f64) -> bool {
        self.residual(m) <= tol * fnorm(m).max(1.0)
    }

    /// Extend with more matrices, dropping dependent ones.
    pub fn extended(&self, more: &[CMat], tol: f64) -> Result<Subspace> {
        let mut out = self.clone();
        out.extend_in_place(more, tol)?;
        Ok(out)
    }

    /// Gram-Schmidt (twice) of `more` against the current basis, blocked
    /// against the existing columns. Returns how many vectors were added.
    pub fn extend_in_place(&mut self, more: &[CMat], tol: f64) -> Result<usize> {
        let scale = more.iter().map(fnorm).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(0);
        }
        for m in more {
            if m.nrows() != self.rows || m.ncols() != self.cols {
                return Err(Error::InputShape(format!(
                    "expected {}x{}, got {}x{}",
                    self.rows,
                    self.cols,
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let mut v = stack_columns(more);
        if self.dim() > 0 {
            for _ in 0..2 {
                let coef = self.basis.ad_mul(&v);
                v -= &self.basis * coef;
            }
        }
        let mut fresh: Vec<CVec> = Vec::new();
        for j in 0..v.ncols() {
            let mut w = v.column(j).into_owned();
            for _ in 0..2 {
                for q in &fresh {
                    let coef = q.dotc(&w);
                    w.axpy(-coef, q, C64::new(1.0, 0.0));
                }
            }
            let n = w.norm();
            if n > tol * scale {
                fresh.push(w / c(n));
            }
        }
        let added = fresh.len();
        if added > 0 {
            let old = self.basis.ncols();
            let mut basis = CMat::zeros(self.vdim(), old + added);
            basis.columns_mut(0, old).copy_from(&self.basis);
            for (i, q) in fresh.iter().enumerate() {
                basis.column_mut(old + i).copy_from(q);
            }
            self.basis = basis;
        }
        Ok(added)
    }

    /// Largest distance of a basis vector of one subspace to the other, both ways.
    pub fn distance(&self, other: &Subspace) -> f64 {
        if self.vdim() != other.vdim() {
            return f64::INFINITY;
        }
        if self.dim() != other.dim() {
            return 1.0;
        }
        let a = (0..self.dim()).map(|i| other.residual(&self.elem(i))).fold(0.0, f64::max);
        let b = (0..other.dim()).map(|i| self.residual(&other.elem(i))).fold(0.0, f64::max);
        a.max(b)
    }
}

pub fn stack_columns(ms: &[CMat]) -> CMat {
    let n = ms[0].len();
    let mut out = CMat::zeros(n, ms.len());
    for (j, m) in ms.iter().enumerate() {
        out.column_mut(j).copy_from_slice(m.as_slice());
    }
    out
}

pub fn orthonormalize(spanning: &[CMat], tol: f64) -> Result<Subspace> {
    match spanning.first() {
        None => Ok(Subspace::zero(0, 0)),
        Some(m) => {
            let mut s = Subspace::zero(m.nrows(), m.ncols());
            s.extend_in_place(spanning, tol)?;
            Ok(s)
        }
    }
}

/// Right singular vectors of `l` with singular value ≤ tol·σ_max, as columns.
pub fn null_space_vectors(l: &CMat, tol: f64) -> CMat {
    let n = l.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let m = if l.nrows() >= n {
        l.clone()
    } else {
        let mut p = CMat::zeros(n, n);
        p.rows_mut(0, l.nrows()).copy_from(l);
        p
    };
    // QR first keeps the SVD square when l is tall.
    let r = if m.nrows() > 2 * n { m.qr().r() } else { m };
    let svd = r.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thresh = tol * smax;
    let mut cols = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || *s <= thresh {
            cols.push(vt.row(i).adjoint());
        }
    }
    // Rows missing from a thin SVD are null directions too.
    if vt.nrows() < n {
        let mut rows: Vec<CVec> = (0..vt.nrows()).map(|i| vt.row(i).adjoint()).collect();
        for k in 0..n {
            let mut v = CVec::zeros(n);
            v[k] = c(1.0);
            for q in &rows {
                let coef = q.dotc(&v);
                v.axpy(-coef, q, c(1.0));
            }
            let nv = v.norm();
            if nv > 1e-8 {
                let v = v / c(nv);
                rows.push(v.clone());
                cols.push(v);
            }
            if rows.len() == n {
                break;
            }
        }
    }
    if cols.is_empty() {
        CMat::zeros(n, 0)
    } else {
        CMat::from_columns(&cols)
    }
}

/// Null space of a linear map given by its matrix, as a subspace of column vectors.
pub fn null_space(l: &CMat, tol: f64) -> Result<Subspace> {
    if l.nrows() != l.ncols() {
        return Err(Error::InputShape(format!("null_space needs a square map, got {}x{}", l.nrows(), l.ncols())));
    }
    let basis = null_space_vectors(l, tol);
    Ok(Subspace { rows: l.ncols(), cols: 1, basis })
}

fn hermitian_eigen(h: &CMat, tol: f64) -> Result<SymmetricEigen<C64, nalgebra::Dyn>> {
    if h.nrows() != h.ncols() {
        return Err(Error::InputShape("expected a square matrix".into()));
    }
    let asym = fnorm(&(h - h.adjoint()));
    if asym > tol.max(1e-12) * fnorm(h).max(1.0) * 1e3 {
        return Err(Error::InputShape(format!("matrix not Hermitian (defect {asym:.3e})")));
    }
    let sym = (h + h.adjoint()) * c(0.5);
    Ok(SymmetricEigen::new(sym))
}

fn spectral(h: &CMat, tol: f64, f: impl Fn(f64) -> f64, invert: bool) -> Result<CMat> {
    let eig = hermitian_eigen(h, tol)?;
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if invert && (lmax <= 0.0 || lmin <= tol * lmax) {
        return Err(Error::NearSingular(format!("eigenvalues in [{lmin:.3e}, {lmax:.3e}]")));
    }
    let d = CVec::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| c(f(l.max(0.0)))));
    let u = &eig.eigenvectors;
    Ok(u * CMat::from_diagonal(&d) * u.adjoint())
}

/// K = H^{-1/2} for Hermitian positive definite H.
pub fn psd_inv_sqrt(h: &CMat, tol: f64) -> Result<CMat> {
    spectral(h, tol, |l| 1.0 / l.sqrt(), true)
}

pub fn psd_sqrt(h: &CMat, tol: f64) -> Result<CMat> {
    spectral(h, tol, f64::sqrt, false)
}

pub fn psd_inv(h: &CMat, tol: f64) -> Result<CMat> {
    spectral(h, tol, |l| 1.0 / l, true)
}

/// Minimal-norm least-squares solution of a·x = b, with the relative residual.
pub fn lstsq(a: &CMat, b: &CMat, tol: f64) -> (CMat, f64) {
    if a.ncols() == 0 {
        return (CMat::zeros(0, b.ncols()), if fnorm(b) > 0.0 { 1.0 } else { 0.0 });
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let x = svd.solve(b, tol * smax).unwrap_or_else(|_| CMat::zeros(a.ncols(), b.ncols()));
    let res = fnorm(&(a * &x - b)) / fnorm(b).max(1e-300);
    (x, res)
}

pub fn rank(a: &CMat, tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = a.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol * smax).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_multiples_collapse() {
        let s = orthonormalize(&[eye(2), eye(2) * c(2.0)], DEFAULT_TOL).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn orthogonal_units_stay() {
        let s = orthonormalize(&[unit(2, 2, 0, 0), unit(2, 2, 1, 1)], DEFAULT_TOL).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(hs(&s.elem(0), &s.elem(1)).norm() < 1e-14);
    }

    #[test]
    fn gram_schmidt_by_hand() {
        // e11, e11+e12: second residual is e12.
        let e11 = unit(2, 2, 0, 0);
        let e12 = unit(2, 2, 0, 1);
        let s = orthonormalize(&[e11.clone(), &e11 + &e12], DEFAULT_TOL).unwrap();
        assert_eq!(s.dim(), 2);
        assert!(fnorm(&(s.elem(0) - &e11)) < 1e-14);
        assert!(fnorm(&(s.elem(1) - &e12)) < 1e-14);
    }

    #[test]
    fn shape_mismatch() {
        let r = orthonormalize(&[eye(2), eye(3)], DEFAULT_TOL);
        assert!(matches!(r, Err(Error::InputShape(_))));
        assert_eq!(orthonormalize(&[], DEFAULT_TOL).unwrap().dim(), 0);
    }

    #[test]
    fn null_space_examples() {
        assert_eq!(null_space(&zeros(4, 4), DEFAULT_TOL).unwrap().dim(), 4);
        assert_eq!(null_space(&eye(4), DEFAULT_TOL).unwrap().dim(), 0);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(1.0), c(0.0), c(0.0)]));
        let n = null_space(&d, DEFAULT_TOL).unwrap();
        assert_eq!(n.dim(), 2);
        for i in 0..2 {
            let v = n.basis.column(i);
            assert!(v[0].norm() < 1e-12 && v[1].norm() < 1e-12);
        }
    }

    #[test]
    fn null_space_of_wide_and_tall() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 2, 5);
        let v = null_space_vectors(&a, DEFAULT_TOL);
        assert_eq!(v.ncols(), 3);
        assert!(fnorm(&(&a * &v)) < 1e-10);
        let b = random_matrix(&mut rng, 30, 3);
        let b = CMat::from_fn(30, 4, |i, j| if j < 3 { b[(i, j)] } else { b[(i, 0)] - b[(i, 2)] });
        let w = null_space_vectors(&b, DEFAULT_TOL);
        assert_eq!(w.ncols(), 1);
        assert!(fnorm(&(&b * &w)) < 1e-10);
    }

    #[test]
    fn inv_sqrt_examples() {
        assert!(fnorm(&(psd_inv_sqrt(&eye(3), DEFAULT_TOL).unwrap() - eye(3))) < 1e-14);
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(4.0), c(1.0)]));
        let k = psd_inv_sqrt(&d, DEFAULT_TOL).unwrap();
        let want = CMat::from_diagonal(&CVec::from_vec(vec![c(0.5), c(1.0)]));
        assert!(fnorm(&(k - want)) < 1e-14);
        // [2 1;1 2] has eigenvalues 3, 1 on (1,1)/√2, (1,-1)/√2.
        let h = CMat::from_row_slice(2, 2, &[c(2.0), c(1.0), c(1.0), c(2.0)]);
        let k = psd_inv_sqrt(&h, DEFAULT_TOL).unwrap();
        let a = (1.0 / 3f64.sqrt() + 1.0) / 2.0;
        let b = (1.0 / 3f64.sqrt() - 1.0) / 2.0;
        let want = CMat::from_row_slice(2, 2, &[c(a), c(b), c(b), c(a)]);
        assert!(fnorm(&(&k - want)) < 1e-14);
        assert!(fnorm(&(&k * &h * &k - eye(2))) < 1e-13);
    }

    #[test]
    fn inv_sqrt_rejects_singular() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0), c(0.0)]));
        assert!(matches!(psd_inv_sqrt(&d, DEFAULT_TOL), Err(Error::NearSingular(_))));
    }

    #[test]
    fn least_squares_min_norm() {
        let a = CMat::from_row_slice(1, 2, &[c(1.0), c(1.0)]);
        let b = CMat::from_row_slice(1, 1, &[c(2.0)]);
        let (x, res) = lstsq(&a, &b, DEFAULT_TOL);
        assert!(res < 1e-14);
        assert!((x[(0, 0)] - c(1.0)).norm() < 1e-14 && (x[(1, 0)] - c(1.0)).norm() < 1e-14);
    }
}
