//! Hilbert bimodules in corner form: a subspace of d_l×d_r matrices with a
//! left algebra in M_{d_l} and a right algebra in M_{d_r}. The inner products
//! are the matrix products x·y* and x*·y, i.e. the off-diagonal corner of the
//! linking algebra [[L, X], [X*, R]].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::condexp::CondExpectation;
use crate::error::{Error, Result};
use crate::exec;
use crate::fdalg::MatrixAlgebra;
use crate::numlin::{c, eye, fnorm, lstsq, opnorm, orthonormalize, psd_inv_sqrt, stack_columns, CMat, CVec, Subspace};
use crate::report::Findings;

#[derive(Debug, Clone)]
pub struct CornerBimodule {
    pub left: MatrixAlgebra,
    pub right: MatrixAlgebra,
    pub space: Subspace,
}

impl CornerBimodule {
    pub fn new(left: MatrixAlgebra, right: MatrixAlgebra, spanning: &[CMat], tol: f64) -> Result<Self> {
        let space = if spanning.is_empty() {
            Subspace::zero(left.d, right.d)
        } else {
            orthonormalize(spanning, tol)?
        };
        if space.rows != left.d || space.cols != right.d {
            return Err(Error::InputShape(format!(
                "bimodule elements are {}x{}, algebras act on {} and {}",
                space.rows, space.cols, left.d, right.d
            )));
        }
        Ok(CornerBimodule { left, right, space })
    }

    /// An algebra as a bimodule over itself.
    pub fn identity(a: &MatrixAlgebra) -> Self {
        CornerBimodule { left: a.clone(), right: a.clone(), space: a.span.clone() }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn basis(&self) -> Vec<CMat> {
        self.space.elems()
    }

    pub fn coords(&self, x: &CMat) -> CVec {
        self.space.coords(x)
    }

    pub fn elem(&self, v: &CVec) -> CMat {
        self.space.from_coords(v)
    }

    pub fn contains(&self, x: &CMat, tol: f64) -> bool {
        self.space.contains(x, tol)
    }

    pub fn random_elem(&self, rng: &mut ChaCha8Rng) -> CMat {
        let v = CVec::from_fn(self.dim(), |_, _| {
            use rand::Rng;
            use rand_distr::StandardNormal;
            crate::numlin::C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        self.elem(&v)
    }

    pub fn left_ip(x: &CMat, y: &CMat) -> CMat {
        x * y.adjoint()
    }

    pub fn right_ip(x: &CMat, y: &CMat) -> CMat {
        x.adjoint() * y
    }

    /// X̃ = {x*}: left and right swapped. Basis adjoints keep coordinates
    /// conjugate to those of X.
    pub fn dual(&self) -> CornerBimodule {
        let adj: Vec<CMat> = self.basis().iter().map(|x| x.adjoint()).collect();
        let basis = if adj.is_empty() {
            CMat::zeros(self.right.d * self.left.d, 0)
        } else {
            stack_columns(&adj)
        };
        CornerBimodule {
            left: self.right.clone(),
            right: self.left.clone(),
            space: Subspace { rows: self.right.d, cols: self.left.d, basis },
        }
    }

    /// Sub-bimodule with smaller algebras and a subspace.
    pub fn sub(&self, left: MatrixAlgebra, right: MatrixAlgebra, spanning: &[CMat], tol: f64) -> Result<Self> {
        CornerBimodule::new(left, right, spanning, tol)
    }

    /// Linking algebra [[L, X], [X*, R]] in M_{d_l+d_r} with its corner projections.
    pub fn linking(&self) -> (MatrixAlgebra, CMat, CMat) {
        let (dl, dr) = (self.left.d, self.right.d);
        let n = dl + dr;
        let place = |m: &CMat, r0: usize, c0: usize| {
            let mut out = CMat::zeros(n, n);
            out.view_mut((r0, c0), (m.nrows(), m.ncols())).copy_from(m);
            out
        };
        let mut cols = Vec::new();
        for a in self.left.basis() {
            cols.push(place(&a, 0, 0));
        }
        for x in self.basis() {
            cols.push(place(&x, 0, dl));
            cols.push(place(&x.adjoint(), dl, 0));
        }
        for b in self.right.basis() {
            cols.push(place(&b, dl, dl));
        }
        let span = Subspace { rows: n, cols: n, basis: stack_columns(&cols) };
        let e = place(&eye(dl), 0, 0);
        let f = place(&eye(dr), dl, dl);
        let mut gens: Vec<CMat> = self.left.gens.iter().map(|g| place(g, 0, 0)).collect();
        gens.extend(self.right.gens.iter().map(|g| place(g, dl, dl)));
        gens.push(e.clone());
        let lin = MatrixAlgebra { d: n, span, gens };
        let gens = if lin.gens.len() <= 4 && !self.left.gens.is_empty() && !self.right.gens.is_empty() {
            let mut g = lin.gens.clone();
            if let Some(x) = self.basis().first() {
                g.push(place(x, 0, dl) + place(&x.adjoint(), dl, 0));
            }
            g
        } else {
            vec![]
        };
        (MatrixAlgebra { gens, ..lin }, e, f)
    }
}

/// Inner products land in the algebras, are compatible, and the actions preserve X.
pub fn check_structure(x: &CornerBimodule, tol_rel: f64) -> Findings {
    let _ = tol_rel;
    let mut f = Findings::new();
    let basis = x.basis();
    for a in &basis {
        for b in &basis {
            let l = CornerBimodule::left_ip(a, b);
            let r = CornerBimodule::right_ip(a, b);
            f.record("left_ip_in_left", x.left.span.residual(&l));
            f.record("right_ip_in_right", x.right.span.residual(&r));
        }
    }
    let sample: Vec<&CMat> = basis.iter().take(6).collect();
    for a in &sample {
        for b in &sample {
            for z in &sample {
                let lhs = CornerBimodule::left_ip(a, b) * *z;
                let rhs = *a * CornerBimodule::right_ip(b, z);
                f.record("ip_compatibility", fnorm(&(lhs - rhs)));
            }
        }
    }
    for xx in &sample {
        for a in x.left.basis().iter().take(16) {
            f.record("left_action", x.space.residual(&(a * *xx)));
        }
        for b in x.right.basis().iter().take(16) {
            f.record("right_action", x.space.residual(&(*xx * b)));
        }
    }
    f
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub left_span_dim: usize,
    pub left_dim: usize,
    pub right_span_dim: usize,
    pub right_dim: usize,
    pub structure: Findings,
}

impl EquivalenceReport {
    pub fn full(&self) -> bool {
        self.left_span_dim == self.left_dim && self.right_span_dim == self.right_dim
    }
}

/// span{x y*} and span{x* y} over a pair of modules.
pub fn ip_spans(x: &CornerBimodule, y: &CornerBimodule, tol: f64) -> Result<(Subspace, Subspace)> {
    let (xb, yb) = (x.basis(), y.basis());
    let mut l = Subspace::zero(x.left.d, y.left.d);
    let mut r = Subspace::zero(x.right.d, y.right.d);
    for a in &xb {
        let ls: Vec<CMat> = yb.iter().map(|b| CornerBimodule::left_ip(a, b)).collect();
        let rs: Vec<CMat> = yb.iter().map(|b| CornerBimodule::right_ip(a, b)).collect();
        l.extend_in_place(&ls, tol)?;
        r.extend_in_place(&rs, tol)?;
    }
    Ok((l, r))
}

pub fn check_equivalence(x: &CornerBimodule, tol: f64) -> Result<EquivalenceReport> {
    let (l, r) = if x.dim() == 0 {
        (Subspace::zero(x.left.d, x.left.d), Subspace::zero(x.right.d, x.right.d))
    } else {
        ip_spans(x, x, tol)?
    };
    Ok(EquivalenceReport {
        left_span_dim: l.dim(),
        left_dim: x.left.dim(),
        right_span_dim: r.dim(),
        right_dim: x.right.dim(),
        structure: check_structure(x, tol),
    })
}

/// A linear map E^X: Y → X on coordinates (dim X × dim Y), with the algebra
/// expectations it should be compatible with.
#[derive(Debug, Clone)]
pub struct BimoduleExpectation {
    pub big: CornerBimodule,
    pub small: CornerBimodule,
    pub action: CMat,
    pub left_exp: CondExpectation,
    pub right_exp: CondExpectation,
}

impl BimoduleExpectation {
    pub fn apply(&self, y: &CMat) -> CMat {
        self.small.elem(&(&self.action * self.big.coords(y)))
    }

    /// Action matrix from a function on Y.
    pub fn from_fn(
        big: CornerBimodule,
        small: CornerBimodule,
        left_exp: CondExpectation,
        right_exp: CondExpectation,
        f: impl Fn(&CMat) -> CMat + Sync + Send,
    ) -> Self {
        let cols: Vec<CVec> = exec::map(&big.basis(), |y| small.coords(&f(y)));
        let action = if cols.is_empty() { CMat::zeros(small.dim(), 0) } else { CMat::from_columns(&cols) };
        BimoduleExpectation { big, small, action, left_exp, right_exp }
    }
}

/// Max violation of each of the six axioms, the derived identity, the norm
/// bound and idempotence.
pub fn check_bimodule_expectation(e: &BimoduleExpectation, samples: usize, seed: u64) -> Findings {
    let mut f = Findings::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |m: CMat| {
        let n = fnorm(&m);
        if n > 0.0 { m / c(n) } else { m }
    };
    let mut ys = e.big.basis();
    ys.truncate(24);
    for _ in 0..samples {
        ys.push(unit(e.big.random_elem(&mut rng)));
    }
    let mut xs = e.small.basis();
    xs.truncate(12);
    let cs = crate::condexp::sample_elems(&e.left_exp.source, 2, seed ^ 1);
    let cs: Vec<CMat> = cs.into_iter().rev().take(10).collect();
    let ds = crate::condexp::sample_elems(&e.right_exp.source, 2, seed ^ 2);
    let ds: Vec<CMat> = ds.into_iter().rev().take(10).collect();
    let as_: Vec<CMat> = e.left_exp.target.basis().into_iter().take(8).collect();
    let bs: Vec<CMat> = e.right_exp.target.basis().into_iter().take(8).collect();
    for x in &xs {
        f.record("idempotent", fnorm(&(e.apply(x) - x)));
        for cc in &cs {
            f.record("axiom1_left_c", fnorm(&(e.apply(&(cc * x)) - e.left_exp.apply(cc) * x)));
        }
        for d in &ds {
            f.record("axiom4_right_d", fnorm(&(e.apply(&(x * d)) - x * e.right_exp.apply(d))));
        }
    }
    let per: Vec<Findings> = exec::map(&ys, |y| {
        let mut g = Findings::new();
        let ey = e.apply(y);
        g.record("range", e.small.space.residual(&ey));
        for a in &as_ {
            g.record("axiom2_left_a", fnorm(&(e.apply(&(a * y)) - a * &ey)));
        }
        for b in &bs {
            g.record("axiom5_right_b", fnorm(&(e.apply(&(y * b)) - &ey * b)));
        }
        for x in &xs {
            let l = e.left_exp.apply(&CornerBimodule::left_ip(y, x));
            g.record("axiom3_left_ip", fnorm(&(l - CornerBimodule::left_ip(&ey, x))));
            let l2 = e.left_exp.apply(&CornerBimodule::left_ip(x, y));
            g.record("derived_left_ip", fnorm(&(l2 - CornerBimodule::left_ip(x, &ey))));
            let r = e.right_exp.apply(&CornerBimodule::right_ip(y, x));
            g.record("axiom6_right_ip", fnorm(&(r - CornerBimodule::right_ip(&ey, x))));
        }
        let ny = opnorm(y);
        if ny > 0.0 {
            g.record("norm_one", (opnorm(&ey) / ny - 1.0).max(0.0));
        }
        g
    });
    for g in per {
        f.merge("", &g);
    }
    f
}

/// Frame {x_i} ⊂ X with Σ x_i x_i* = 1 (so Σ x_i·⟨x_i, y⟩ = y for every y),
/// grown greedily from the basis and normalized by T^{-1/2}.
pub fn right_frame(x: &CornerBimodule, tol: f64) -> Result<Vec<CMat>> {
    frame_generic(&x.basis(), x.left.d, |s| s * s.adjoint(), |t, s| t * s, tol)
}

/// Frame {x_i} ⊂ X with Σ x_i* x_i = 1.
pub fn left_frame(x: &CornerBimodule, tol: f64) -> Result<Vec<CMat>> {
    frame_generic(&x.basis(), x.right.d, |s| s.adjoint() * s, |t, s| s * t, tol)
}

fn frame_generic(
    basis: &[CMat],
    d: usize,
    gram: impl Fn(&CMat) -> CMat,
    act: impl Fn(&CMat, &CMat) -> CMat,
    tol: f64,
) -> Result<Vec<CMat>> {
    let mut t = CMat::zeros(d, d);
    let mut chosen = Vec::new();
    for s in basis {
        t += gram(s);
        chosen.push(s.clone());
        if let Ok(k) = psd_inv_sqrt(&t, 1e-8) {
            let frame: Vec<CMat> = chosen.iter().map(|s| act(&k, s)).collect();
            let mut sum = CMat::zeros(d, d);
            for x in &frame {
                sum += gram(x);
            }
            if fnorm(&(sum - eye(d))) <= 1e-8 * (d as f64).sqrt() {
                return Ok(frame);
            }
        }
    }
    let _ = tol;
    Err(Error::FrameNotFound("inner products of the module do not reach the unit".into()))
}

/// E^X: Y → X with ⟨E^X(y), x⟩ = E^B(⟨y, x⟩) for x ∈ X, by solving
/// Σ_k m_k x_j* x_k = E^B(x_j* y) over j.
pub fn right_expectation_from(
    e_b: &CondExpectation,
    y: &CornerBimodule,
    x: &CornerBimodule,
    tol: f64,
) -> Result<CMat> {
    right_frame(x, tol)?;
    let xb = x.basis();
    let yb = y.basis();
    let blocks: Vec<CMat> = xb
        .iter()
        .map(|xk| stack_columns(&xb.iter().map(|xj| xj.adjoint() * xk).collect::<Vec<_>>()))
        .collect();
    // Rows: (j, entry); columns: k.
    let dr2 = x.right.d * x.right.d;
    let nx = xb.len();
    let mut sys = CMat::zeros(nx * dr2, nx);
    for (k, blk) in blocks.iter().enumerate() {
        for j in 0..nx {
            sys.view_mut((j * dr2, k), (dr2, 1)).copy_from(&blk.column(j));
        }
    }
    if crate::numlin::rank(&sys, tol) < nx {
        return Err(Error::RankDeficient("right inner products of X are degenerate".into()));
    }
    let rhs_cols: Vec<CVec> = exec::map(&yb, |yy| {
        let mut v = CVec::zeros(nx * dr2);
        for (j, xj) in xb.iter().enumerate() {
            let r = e_b.apply(&(xj.adjoint() * yy));
            v.rows_mut(j * dr2, dr2).copy_from(&crate::numlin::vec_of(&r));
        }
        v
    });
    let rhs = CMat::from_columns(&rhs_cols);
    let (sol, res) = lstsq(&sys, &rhs, tol);
    if res > 1e-8 {
        return Err(Error::RankDeficient(format!("defining relation is inconsistent (residual {res:.3e})")));
    }
    Ok(sol)
}

/// Left-handed analogue through the dual bimodule: E^A(y x*) = E^X(y) x*.
pub fn left_expectation_from(
    e_a: &CondExpectation,
    y: &CornerBimodule,
    x: &CornerBimodule,
    tol: f64,
) -> Result<CMat> {
    let m = right_expectation_from(e_a, &y.dual(), &x.dual(), tol)?;
    Ok(m.map(|z| z.conj()))
}

/// E^A: C → A from E^A(c)·x = E^X(c·x) for x ∈ X.
pub fn induced_left_expectation(
    action: &CMat,
    y: &CornerBimodule,
    x: &CornerBimodule,
    a: &MatrixAlgebra,
    c_alg: &MatrixAlgebra,
    tol: f64,
) -> Result<CondExpectation> {
    let ex = |v: &CMat| x.elem(&(action * y.coords(v)));
    let ab = a.basis();
    let xb = x.basis();
    let cols: Vec<CMat> = ab.iter().map(|ak| stack_columns(&xb.iter().map(|xj| ak * xj).collect::<Vec<_>>())).collect();
    let n = xb.len() * x.space.vdim();
    let mut sys = CMat::zeros(n, ab.len());
    for (k, m) in cols.iter().enumerate() {
        sys.column_mut(k).copy_from(&CVec::from_column_slice(m.as_slice()));
    }
    if crate::numlin::rank(&sys, tol) < ab.len() {
        return Err(Error::RankDeficient("A does not act faithfully on X".into()));
    }
    let rhs_cols: Vec<CVec> = exec::map(&c_alg.basis(), |cc| {
        let imgs: Vec<CMat> = xb.iter().map(|xj| ex(&(cc * xj))).collect();
        CVec::from_column_slice(stack_columns(&imgs).as_slice())
    });
    let rhs = CMat::from_columns(&rhs_cols);
    let (sol, res) = lstsq(&sys, &rhs, tol);
    if res > 1e-8 {
        return Err(Error::RankDeficient(format!("defining relation is inconsistent (residual {res:.3e})")));
    }
    let e = CondExpectation::from_action(c_alg.clone(), a.clone(), sol, tol);
    let f = crate::condexp::verify_expectation(&e, 4, 0);
    if !f.passes(1e-8) {
        let (name, v) = f.worst().unwrap();
        return Err(Error::AxiomViolation(format!("induced expectation: {name} = {v:.3e}")));
    }
    e.with_quasi_basis(0)
}

/// X ⊗_B Z realized as span{x z}; `gram_rank` is the rank of the Gram matrix
/// of the elementary tensors, which must match the span dimension.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub module: CornerBimodule,
    pub gram_rank: usize,
    pub pairs: usize,
}

pub fn interior_tensor(x: &CornerBimodule, z: &CornerBimodule, tol: f64) -> Result<Tensor> {
    if x.right.d != z.left.d {
        return Err(Error::InputShape("right algebra of X must act where Z's left algebra acts".into()));
    }
    let prods: Vec<CMat> = x.basis().iter().flat_map(|a| z.basis().into_iter().map(move |b| a * b)).collect();
    let module = CornerBimodule::new(x.left.clone(), z.right.clone(), &prods, tol)?;
    let gram_rank = if prods.is_empty() {
        0
    } else {
        // tr((x z)*(x' z')) = tr(z* ⟨x, x'⟩_B z').
        let v = stack_columns(&prods);
        let g = v.adjoint() * &v;
        let eig = nalgebra::SymmetricEigen::new((&g + g.adjoint()) * c(0.5));
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        eig.eigenvalues.iter().filter(|&&l| l > tol * tol * lmax.max(1e-300) * 1e2 && l > 1e-14 * lmax).count()
    };
    Ok(Tensor { module, gram_rank, pairs: prods.len() })
}

/// θ_{x,y}(z) = x·⟨y, z⟩ as operators on the coordinates of Y.
#[derive(Debug, Clone)]
pub struct RankOne {
    pub c: MatrixAlgebra,
    pub a: MatrixAlgebra,
    pub frame: Vec<CMat>,
}

pub fn theta(y: &CornerBimodule, a: &CMat, b: &CMat) -> CMat {
    let ab = a * b.adjoint();
    let imgs: Vec<CMat> = y.basis().iter().map(|z| &ab * z).collect();
    y.space.coords_many(&imgs)
}

pub fn rank_one_algebra(y: &CornerBimodule, x: &CornerBimodule, tol: f64) -> Result<RankOne> {
    let frame = right_frame(x, tol)?;
    let yb = y.basis();
    let xb = x.basis();
    let mut cs = Vec::new();
    for a in &yb {
        for b in &yb {
            cs.push(theta(y, a, b));
        }
    }
    let mut as_ = Vec::new();
    for a in &xb {
        for b in &xb {
            as_.push(theta(y, a, b));
        }
    }
    let n = yb.len();
    let c_span = orthonormalize(&cs, tol)?;
    let a_span = orthonormalize(&as_, tol)?;
    let c_alg = crate::fdalg::generate_algebra(n, &c_span.elems(), tol)?;
    let a_alg = MatrixAlgebra { d: n, span: a_span, gens: vec![] };
    let closed = crate::fdalg::generate_algebra(n, &a_alg.basis(), tol)?;
    if closed.dim() != a_alg.dim() {
        return Err(Error::NotSubalgebra("span of θ over X is not closed".into()));
    }
    let mut unit = CMat::zeros(n, n);
    for f in &frame {
        unit += theta(y, f, f);
    }
    if fnorm(&(unit - eye(n))) > 1e-8 * (n as f64).sqrt() {
        return Err(Error::FrameNotFound("Σ θ_{x_i,x_i} is not the identity".into()));
    }
    Ok(RankOne { c: c_alg, a: closed, frame })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condexp::trace_expectation;
    use crate::numlin::{kron, unit, DEFAULT_TOL as T};

    fn corner_m4() -> CornerBimodule {
        // e = diag(1,1,0,0), f = diag(0,0,1,1) in M_4: eM_4f ≅ M_2.
        CornerBimodule::new(MatrixAlgebra::full(2), MatrixAlgebra::full(2), &MatrixAlgebra::full(2).basis(), T).unwrap()
    }

    #[test]
    fn corner_of_simple_is_full() {
        let r = check_equivalence(&corner_m4(), T).unwrap();
        assert!(r.full());
        assert!(r.structure.passes(1e-12));
        let (l, e, f) = corner_m4().linking();
        assert_eq!(l.dim(), 16);
        assert!(fnorm(&(e + f - eye(4))) < 1e-15);
    }

    #[test]
    fn zero_module_not_full() {
        let z = CornerBimodule::new(MatrixAlgebra::full(2), MatrixAlgebra::full(2), &[], T).unwrap();
        assert!(!check_equivalence(&z, T).unwrap().full());
    }

    #[test]
    fn dual_swaps() {
        let x = CornerBimodule::new(
            MatrixAlgebra::full(2),
            MatrixAlgebra::scalars(1),
            &[unit(2, 1, 0, 0), unit(2, 1, 1, 0)],
            T,
        )
        .unwrap();
        let dd = x.dual().dual();
        assert!(dd.space.distance(&x.space) < 1e-14);
        let (a, b) = (x.basis()[0].clone(), x.basis()[1].clone());
        let lhs = CornerBimodule::left_ip(&a.adjoint(), &b.adjoint());
        assert!(fnorm(&(lhs - CornerBimodule::right_ip(&a, &b))) < 1e-15);
    }

    #[test]
    fn identity_expectation_passes() {
        let m2 = MatrixAlgebra::full(2);
        let x = CornerBimodule::identity(&m2);
        let e = trace_expectation(&m2, &m2, T).unwrap();
        let be = BimoduleExpectation::from_fn(x.clone(), x, e.clone(), e, |y| y.clone());
        let f = check_bimodule_expectation(&be, 4, 0);
        assert!(f.max() < 1e-13, "{f:?}");
    }

    #[test]
    fn zero_map_fails_axiom_one() {
        let m2 = MatrixAlgebra::full(2);
        let x = CornerBimodule::identity(&m2);
        let e = trace_expectation(&m2, &m2, T).unwrap();
        let be = BimoduleExpectation::from_fn(x.clone(), x, e.clone(), e, |y| y * c(0.0));
        assert!(check_bimodule_expectation(&be, 2, 0).get("axiom1_left_c").unwrap() > 0.1);
    }

    #[test]
    fn right_expectation_of_trace() {
        let m2 = MatrixAlgebra::full(2);
        let s = MatrixAlgebra::scalars(2);
        let y = CornerBimodule::identity(&m2);
        let x = CornerBimodule::new(s.clone(), s.clone(), &[eye(2)], T).unwrap();
        let eb = trace_expectation(&m2, &s, T).unwrap();
        let m = right_expectation_from(&eb, &y, &x, T).unwrap();
        for yy in y.basis() {
            let got = x.elem(&(&m * y.coords(&yy)));
            assert!(fnorm(&(got - eb.apply(&yy))) < 1e-12);
        }
        let ml = left_expectation_from(&eb, &y, &x, T).unwrap();
        assert!(fnorm(&(ml - &m)) < 1e-12);
        let ea = induced_left_expectation(&m, &y, &x, &s, &m2, T).unwrap();
        assert!(fnorm(&(ea.action - eb.action)) < 1e-12);
    }

    #[test]
    fn tensor_with_unit_absorbs() {
        let x = corner_m4();
        let b = CornerBimodule::identity(&MatrixAlgebra::full(2));
        let t = interior_tensor(&x, &b, T).unwrap();
        assert_eq!(t.module.dim(), x.dim());
        assert_eq!(t.gram_rank, x.dim());
    }

    #[test]
    fn rank_one_of_algebra_is_left_multiplication() {
        let d2 = crate::fdalg::generate_algebra(2, &[unit(2, 2, 0, 0)], T).unwrap();
        let y = CornerBimodule::identity(&d2);
        let r = rank_one_algebra(&y, &y, T).unwrap();
        assert_eq!(r.c.dim(), 2);
        assert_eq!(r.a.dim(), 2);
        let amp = crate::fdalg::amplify(&MatrixAlgebra::scalars(2), 2);
        let yy = CornerBimodule::identity(&amp);
        let sub = CornerBimodule::new(amp.clone(), amp.clone(), &[kron(&eye(2), &eye(2))], T);
        assert!(sub.is_ok());
        assert!(rank_one_algebra(&yy, &yy, T).is_ok());
    }
}
