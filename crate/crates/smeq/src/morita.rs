//! Strong Morita equivalence of unital inclusions A ⊂ C and B ⊂ D through a
//! C–D equivalence bimodule Y and an A–B sub-bimodule X.

use crate::bimodule::{ip_spans, left_frame, BimoduleExpectation, CornerBimodule};
use crate::condexp::{
    amplified_apply, compress_expectation, index_of, verify_expectation, CondExpectation, Compression,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::fdalg::{amplify, ideal_span, MatrixAlgebra};
use crate::numlin::{c, eye, fnorm, unit, CMat, CVec, Subspace};
use crate::report::Findings;

#[derive(Debug, Clone)]
pub struct MoritaPair {
    pub a: MatrixAlgebra,
    pub c: MatrixAlgebra,
    pub b: MatrixAlgebra,
    pub d: MatrixAlgebra,
    pub y: CornerBimodule,
    pub x: CornerBimodule,
}

impl MoritaPair {
    pub fn new(y: CornerBimodule, x: CornerBimodule) -> Self {
        MoritaPair { a: x.left.clone(), c: y.left.clone(), b: x.right.clone(), d: y.right.clone(), y, x }
    }

    /// A ⊂ C against itself with Y = C and X = A.
    pub fn self_pair(a: &MatrixAlgebra, c_alg: &MatrixAlgebra) -> Self {
        MoritaPair::new(CornerBimodule::identity(c_alg), CornerBimodule::identity(a))
    }

    /// The mirrored pair B ⊂ D against A ⊂ C through Ỹ and X̃.
    pub fn dual(&self) -> Self {
        MoritaPair::new(self.y.dual(), self.x.dual())
    }

    /// Frame x_i ∈ X with Σ ⟨x_i, x_i⟩_B = 1.
    pub fn frame(&self, tol: f64) -> Result<Vec<CMat>> {
        left_frame(&self.x, tol)
    }
}

/// The corner partner of E: C → A given n and a full projection p ∈ M_n(A):
/// B = pM_n(A)p, D = pM_n(C)p, Y = (1⊗f)M_n(C)p, X = (1⊗f)M_n(A)p, all
/// compressed by an isometry onto the range of p.
#[derive(Debug, Clone)]
pub struct CornerPartner {
    pub pair: MoritaPair,
    pub compression: Compression,
}

impl CornerPartner {
    /// R·M·V where R picks the first block row.
    pub fn corner(&self, m: &CMat) -> CMat {
        let d = self.pair.c.d;
        m.rows(0, d) * &self.compression.v
    }

    /// E^X(y) = R (E^A ⊗ id)(R* y V*) V.
    pub fn direct_expectation(&self, e_a: &CondExpectation, y: &CMat) -> CMat {
        let comp = &self.compression;
        let d = self.pair.c.d;
        let nd = comp.n * d;
        let mut big = CMat::zeros(nd, nd);
        big.rows_mut(0, d).copy_from(&(y * comp.v.adjoint()));
        self.corner(&amplified_apply(e_a, comp.n, &big))
    }
}

pub fn corner_partner(e_a: &CondExpectation, n: usize, p: &CMat) -> Result<CornerPartner> {
    let tol = e_a.tol;
    let comp = compress_expectation(e_a, n, p)?;
    let d = e_a.source.d;
    let v = &comp.v;
    let row = |m: &CMat| m.rows(0, d) * v;
    let ys: Vec<CMat> = comp.amplified_source.basis().iter().map(row).collect();
    let xs: Vec<CMat> = comp.amplified_target.basis().iter().map(row).collect();
    let y = CornerBimodule::new(e_a.source.clone(), comp.e.source.clone(), &ys, tol)?;
    let x = CornerBimodule::new(e_a.target.clone(), comp.e.target.clone(), &xs, tol)?;
    Ok(CornerPartner { pair: MoritaPair::new(y, x), compression: comp })
}

fn span_mismatch(s: &Subspace, alg: &MatrixAlgebra) -> f64 {
    if s.dim() != alg.dim() {
        return 1.0;
    }
    s.distance(&alg.span)
}

/// Definition-level conditions of a strong Morita equivalence of inclusions.
pub fn check_pair(m: &MoritaPair, tol: f64) -> Result<Findings> {
    let mut f = Findings::new();
    f.merge("Y.", &crate::bimodule::check_structure(&m.y, tol));
    f.merge("X.", &crate::bimodule::check_structure(&m.x, tol));
    for x in m.x.basis() {
        f.record("X_in_Y", m.y.space.residual(&x));
    }
    for a in m.a.basis() {
        f.record("A_in_C", m.c.span.residual(&a));
    }
    for b in m.b.basis() {
        f.record("B_in_D", m.d.span.residual(&b));
    }
    let (lxx, rxx) = ip_spans(&m.x, &m.x, tol)?;
    let (lyx, ryx) = ip_spans(&m.y, &m.x, tol)?;
    f.record("span_left_XX_is_A", span_mismatch(&lxx, &m.a));
    f.record("span_right_XX_is_B", span_mismatch(&rxx, &m.b));
    f.record("span_left_YX_is_C", span_mismatch(&lyx, &m.c));
    f.record("span_right_YX_is_D", span_mismatch(&ryx, &m.d));
    let frame = m.frame(tol)?;
    let mut s = CMat::zeros(m.b.d, m.b.d);
    for x in &frame {
        s += x.adjoint() * x;
    }
    f.record("frame_identity", fnorm(&(s - eye(m.b.d))));
    Ok(f)
}

/// Frame x_1..x_n stacked as a column of blocks; p = [x_i x_j*].
#[derive(Debug, Clone)]
pub struct StandardForm {
    pub n: usize,
    pub xv: CMat,
    pub p: CMat,
    d_left: usize,
}

impl StandardForm {
    pub fn psi_d(&self, d: &CMat) -> CMat {
        &self.xv * d * self.xv.adjoint()
    }

    pub fn psi_d_inv(&self, m: &CMat) -> CMat {
        self.xv.adjoint() * m * &self.xv
    }

    /// First block row [y x_j*]_j.
    pub fn psi_y(&self, y: &CMat) -> CMat {
        y * self.xv.adjoint()
    }

    pub fn psi_y_inv(&self, r: &CMat) -> CMat {
        r * &self.xv
    }

    /// The row embedded as the first block row of an n×n block matrix.
    pub fn row_to_block(&self, r: &CMat) -> CMat {
        let nd = self.n * self.d_left;
        let mut m = CMat::zeros(nd, nd);
        m.rows_mut(0, self.d_left).copy_from(r);
        m
    }
}

pub fn standard_form(m: &MoritaPair, tol: f64) -> Result<StandardForm> {
    let frame = m.frame(tol)?;
    let n = frame.len();
    let dl = m.c.d;
    let mut xv = CMat::zeros(n * dl, m.d.d);
    for (i, x) in frame.iter().enumerate() {
        xv.rows_mut(i * dl, dl).copy_from(x);
    }
    let p = &xv * xv.adjoint();
    Ok(StandardForm { n, xv, p, d_left: dl })
}

/// Invariants of the Ψ maps on bases and random triples.
pub fn check_standard_form(m: &MoritaPair, sf: &StandardForm, tol: f64) -> Result<Findings> {
    let mut f = Findings::new();
    let an = amplify(&m.a, sf.n);
    let cn = amplify(&m.c, sf.n);
    f.record("p_projection", fnorm(&(&sf.p * &sf.p - &sf.p)).max(fnorm(&(&sf.p - sf.p.adjoint()))));
    f.record("p_in_MnA", an.span.residual(&sf.p));
    let full = ideal_span(&sf.p, &an, tol)?.dim() == an.dim();
    f.record("p_full", if full { 0.0 } else { 1.0 });
    let bb = m.b.basis();
    let db = m.d.basis();
    for b in &bb {
        let pb = sf.psi_d(b);
        f.record("psi_b_range", an.span.residual(&pb));
        f.record("psi_b_corner", fnorm(&(&sf.p * &pb * &sf.p - &pb)));
    }
    for (i, d1) in db.iter().enumerate().take(8) {
        let p1 = sf.psi_d(d1);
        f.record("psi_d_range", cn.span.residual(&p1));
        f.record("psi_d_roundtrip", fnorm(&(sf.psi_d_inv(&p1) - d1)));
        for d2 in db.iter().skip(i).take(8) {
            f.record("psi_d_multiplicative", fnorm(&(sf.psi_d(&(d1 * d2)) - &p1 * sf.psi_d(d2))));
        }
        f.record("psi_d_star", fnorm(&(sf.psi_d(&d1.adjoint()) - p1.adjoint())));
    }
    // Ψ_X is onto the first row of M_n(A)p.
    let rows: Vec<CMat> = an.basis().iter().map(|a| (a * &sf.p).rows(0, m.c.d).into_owned()).collect();
    let target = crate::numlin::orthonormalize(&rows, tol)?;
    f.record("psi_x_bijective", if target.dim() == m.x.dim() { 0.0 } else { 1.0 });
    let xb = m.x.basis();
    for x in &xb {
        let px = sf.psi_y(x);
        f.record("psi_x_range", target.residual(&px));
    }
    for y in m.y.basis() {
        f.record("psi_y_roundtrip", fnorm(&(sf.psi_y_inv(&sf.psi_y(&y)) - &y)));
    }
    for x1 in xb.iter().take(6) {
        for x2 in xb.iter().take(6) {
            let lhs = sf.psi_y(x1).adjoint() * sf.psi_y(x2);
            f.record("psi_x_inner_product", fnorm(&(lhs - sf.psi_d(&(x1.adjoint() * x2)))));
            let lhs = sf.psi_y(x1) * sf.psi_y(x2).adjoint();
            f.record("psi_x_left_inner_product", fnorm(&(lhs - x1 * x2.adjoint())));
        }
    }
    for x in xb.iter().take(4) {
        for a in m.a.basis().iter().take(4) {
            for b in bb.iter().take(4) {
                let lhs = sf.psi_y(&(a * x * b));
                let rhs = a * sf.psi_y(x) * sf.psi_d(b);
                f.record("psi_x_bimodule", fnorm(&(lhs - rhs)));
            }
        }
    }
    Ok(f)
}

/// E^B = Ψ_D⁻¹∘E_p∘Ψ_D and E^X = Ψ_Y⁻¹∘F∘Ψ_Y with
/// F((1⊗f)x p) = (1⊗f)(E^A⊗id)(x)p.
pub fn transport_expectation(m: &MoritaPair, e_a: &CondExpectation, tol: f64) -> Result<(CondExpectation, BimoduleExpectation)> {
    let sf = standard_form(m, tol)?;
    let e_a = e_a.clone().ensure_quasi_basis()?;
    let n = sf.n;
    let eb_of = |d: &CMat| sf.psi_d_inv(&amplified_apply(&e_a, n, &sf.psi_d(d)));
    let cols: Vec<CVec> = exec::map(&m.d.basis(), |d| m.b.coords(&eb_of(d)));
    let action = CMat::from_columns(&cols);
    let e_b = CondExpectation::from_action(m.d.clone(), m.b.clone(), action, tol).with_quasi_basis(0)?;
    let ex = BimoduleExpectation::from_fn(m.y.clone(), m.x.clone(), e_a.clone(), e_b.clone(), |y| {
        let blk = sf.row_to_block(&sf.psi_y(y));
        let img = amplified_apply(&e_a, n, &blk) * &sf.p;
        sf.psi_y_inv(&img.rows(0, m.c.d).into_owned())
    });
    Ok((e_b, ex))
}

/// Linking algebras L_X ⊂ L_Y in M_{d_C + d_D} with corner projections.
#[derive(Debug, Clone)]
pub struct Linking {
    pub l_y: MatrixAlgebra,
    pub l_x: MatrixAlgebra,
    pub p: CMat,
    pub q: CMat,
    pub dl: usize,
    pub dr: usize,
}

impl Linking {
    pub fn block(&self, m: &CMat, i: usize, j: usize) -> CMat {
        let (r0, nr) = if i == 0 { (0, self.dl) } else { (self.dl, self.dr) };
        let (c0, nc) = if j == 0 { (0, self.dl) } else { (self.dl, self.dr) };
        m.view((r0, c0), (nr, nc)).into_owned()
    }

    pub fn assemble(&self, c11: &CMat, c12: &CMat, c21: &CMat, c22: &CMat) -> CMat {
        let n = self.dl + self.dr;
        let mut m = CMat::zeros(n, n);
        m.view_mut((0, 0), (self.dl, self.dl)).copy_from(c11);
        m.view_mut((0, self.dl), (self.dl, self.dr)).copy_from(c12);
        m.view_mut((self.dl, 0), (self.dr, self.dl)).copy_from(c21);
        m.view_mut((self.dl, self.dl), (self.dr, self.dr)).copy_from(c22);
        m
    }

    pub fn diag(&self, a: &CMat, b: &CMat) -> CMat {
        self.assemble(a, &CMat::zeros(self.dl, self.dr), &CMat::zeros(self.dr, self.dl), b)
    }
}

pub fn linking_algebra(m: &MoritaPair) -> Linking {
    let (l_y, p, q) = m.y.linking();
    let (l_x, _, _) = m.x.linking();
    Linking { l_y, l_x, p, q, dl: m.c.d, dr: m.d.d }
}

/// Corner identifications and fullness of p and q in both linking algebras.
pub fn check_linking(m: &MoritaPair, lk: &Linking, tol: f64) -> Result<Findings> {
    let mut f = Findings::new();
    f.record("p_plus_q", fnorm(&(&lk.p + &lk.q - eye(lk.dl + lk.dr))));
    let corner_dim = |alg: &MatrixAlgebra, i: usize, j: usize| -> Result<usize> {
        let blocks: Vec<CMat> = alg.basis().iter().map(|x| lk.block(x, i, j)).collect();
        Ok(crate::numlin::orthonormalize(&blocks, tol)?.dim())
    };
    let want = [
        (corner_dim(&lk.l_x, 0, 0)?, m.a.dim()),
        (corner_dim(&lk.l_x, 1, 1)?, m.b.dim()),
        (corner_dim(&lk.l_x, 0, 1)?, m.x.dim()),
        (corner_dim(&lk.l_y, 0, 0)?, m.c.dim()),
        (corner_dim(&lk.l_y, 1, 1)?, m.d.dim()),
        (corner_dim(&lk.l_y, 0, 1)?, m.y.dim()),
    ];
    let bad = want.iter().filter(|(a, b)| a != b).count();
    f.record("corners", bad as f64);
    f.record("dim_L_X", (lk.l_x.dim() as f64 - (m.a.dim() + m.b.dim() + 2 * m.x.dim()) as f64).abs());
    for (name, alg) in [("K", &lk.l_x), ("L", &lk.l_y)] {
        for (pn, proj) in [("p", &lk.p), ("q", &lk.q)] {
            let full = ideal_span(proj, alg, tol)?.dim() == alg.dim();
            f.record(&format!("{name}{pn}{name}_full"), if full { 0.0 } else { 1.0 });
        }
    }
    let closed = crate::fdalg::generate_algebra(lk.l_x.d, &lk.l_x.basis(), tol)?;
    f.record("L_X_closed", (closed.dim() as f64 - lk.l_x.dim() as f64).abs());
    Ok(f)
}

/// E^{L_X}([c x; ỹ d]) = [E^A(c) E^X(x); E^X(y)~ E^B(d)], with quasi-basis
/// {(diag(u_i/√m, v_j/√n), diag(u_i'/√m, v_j'/√n))} over all n·m index pairs.
pub fn linking_expectation(lk: &Linking, ex: &BimoduleExpectation, tol: f64) -> Result<CondExpectation> {
    let e_a = &ex.left_exp;
    let e_b = &ex.right_exp;
    let apply = |t: &CMat| {
        let c11 = e_a.apply(&lk.block(t, 0, 0));
        let c12 = ex.apply(&lk.block(t, 0, 1));
        let c21 = ex.apply(&lk.block(t, 1, 0).adjoint()).adjoint();
        let c22 = e_b.apply(&lk.block(t, 1, 1));
        lk.assemble(&c11, &c12, &c21, &c22)
    };
    let cols: Vec<CVec> = exec::map(&lk.l_y.basis(), |t| lk.l_x.coords(&apply(t)));
    let action = CMat::from_columns(&cols);
    let mut e = CondExpectation::from_action(lk.l_y.clone(), lk.l_x.clone(), action, tol);
    let qa = e_a.quasi_basis.as_ref().ok_or_else(|| Error::NearSingular("E^A has no quasi-basis".into()))?;
    let qb = e_b.quasi_basis.as_ref().ok_or_else(|| Error::NearSingular("E^B has no quasi-basis".into()))?;
    let (n, mm) = (qa.len() as f64, qb.len() as f64);
    let mut pairs = Vec::with_capacity(qa.len() * qb.len());
    for (u, u2) in qa {
        for (v, v2) in qb {
            pairs.push((
                lk.diag(&(u / c(mm.sqrt())), &(v / c(n.sqrt()))),
                lk.diag(&(u2 / c(mm.sqrt())), &(v2 / c(n.sqrt()))),
            ));
        }
    }
    e.index = Some(index_of(&pairs, lk.dl + lk.dr));
    e.quasi_basis = Some(pairs);
    Ok(e)
}

/// Corollary-level checks on E^{L_X}.
pub fn check_linking_expectation(lk: &Linking, ex: &BimoduleExpectation, el: &CondExpectation, seed: u64) -> Findings {
    let mut f = verify_expectation(el, 4, seed);
    let ia = ex.left_exp.index.clone().unwrap_or_else(|| eye(lk.dl));
    let ib = ex.right_exp.index.clone().unwrap_or_else(|| eye(lk.dr));
    if let Some(ind) = &el.index {
        f.record("index_block_diagonal", fnorm(&(ind - lk.diag(&ia, &ib))));
    }
    for c1 in ex.left_exp.source.basis() {
        let t = lk.diag(&c1, &CMat::zeros(lk.dr, lk.dr));
        f.record("restricts_to_E_A", fnorm(&(lk.block(&el.apply(&t), 0, 0) - ex.left_exp.apply(&c1))));
    }
    let count = el.quasi_basis.as_ref().map_or(0, |q| q.len());
    let want = ex.left_exp.quasi_basis.as_ref().map_or(0, |q| q.len()) * ex.right_exp.quasi_basis.as_ref().map_or(0, |q| q.len());
    f.record("quasi_basis_count", (count as f64 - want as f64).abs());
    f
}

/// y = Σ E^X(y v_j) v_j' = Σ u_i E^X(u_i' y) and Ind_A·y = y·Ind_B over the basis of Y.
pub fn exchange_identities_check(ex: &BimoduleExpectation) -> Findings {
    let mut f = Findings::new();
    let qa = ex.left_exp.quasi_basis.clone().unwrap_or_default();
    let qb = ex.right_exp.quasi_basis.clone().unwrap_or_default();
    let ia = ex.left_exp.index.clone().unwrap_or_else(|| index_of(&qa, ex.left_exp.source.d));
    let ib = ex.right_exp.index.clone().unwrap_or_else(|| index_of(&qb, ex.right_exp.source.d));
    let per: Vec<(f64, f64, f64)> = exec::map(&ex.big.basis(), |y| {
        let mut r = CMat::zeros(y.nrows(), y.ncols());
        for (v, v2) in &qb {
            r += ex.apply(&(y * v)) * v2;
        }
        let mut l = CMat::zeros(y.nrows(), y.ncols());
        for (u, u2) in &qa {
            l += u * ex.apply(&(u2 * y));
        }
        (fnorm(&(r - y)), fnorm(&(l - y)), fnorm(&(&ia * y - y * &ib)))
    });
    for (r, l, i) in per {
        f.record("exchange_right", r);
        f.record("exchange_left", l);
        f.record("exchange_index", i);
    }
    f
}

/// Y₁ ⊗ Y₂ and X₁ ⊗ X₂ for pairs sharing the middle inclusion.
pub fn compose(m1: &MoritaPair, m2: &MoritaPair, tol: f64) -> Result<(MoritaPair, crate::bimodule::Tensor, crate::bimodule::Tensor)> {
    let ty = crate::bimodule::interior_tensor(&m1.y, &m2.y, tol)?;
    let tx = crate::bimodule::interior_tensor(&m1.x, &m2.x, tol)?;
    let pair = MoritaPair::new(ty.module.clone(), tx.module.clone());
    Ok((pair, ty, tx))
}

/// f₁₁ ⊗ 1 in M_n(M_d) with the outer index first.
pub fn corner_unit(n: usize, d: usize) -> CMat {
    crate::numlin::kron(&unit(n, n, 0, 0), &eye(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condexp::trace_expectation;
    use crate::numlin::DEFAULT_TOL as T;

    fn s1() -> CondExpectation {
        trace_expectation(&MatrixAlgebra::full(2), &MatrixAlgebra::scalars(2), T).unwrap().with_quasi_basis(0).unwrap()
    }

    #[test]
    fn self_pair_is_trivial() {
        let m2 = MatrixAlgebra::full(2);
        let m = MoritaPair::self_pair(&m2, &m2);
        let sf = standard_form(&m, T).unwrap();
        assert!(sf.n >= 1);
        assert!(check_standard_form(&m, &sf, T).unwrap().passes(1e-10));
        let e = trace_expectation(&m2, &m2, T).unwrap();
        let (eb, ex) = transport_expectation(&m, &e, T).unwrap();
        assert!(fnorm(&(eb.action - e.action)) < 1e-10);
        assert!(fnorm(&(ex.action - eye(4))) < 1e-10);
    }

    #[test]
    fn s1_corner_pair() {
        let e = s1();
        let cp = corner_partner(&e, 2, &corner_unit(2, 2)).unwrap();
        let m = &cp.pair;
        assert!(check_pair(m, T).unwrap().passes(1e-9));
        let sf = standard_form(m, T).unwrap();
        assert!(check_standard_form(m, &sf, T).unwrap().passes(1e-9));
        let (eb, ex) = transport_expectation(m, &e, T).unwrap();
        assert!(verify_expectation(&eb, 4, 0).passes(1e-9));
        assert!(crate::bimodule::check_bimodule_expectation(&ex, 4, 0).passes(1e-9));
        // Transported E^B agrees with the compression.
        assert!(fnorm(&(&eb.action - &cp.compression.e.action)) < 1e-9);
        for y in m.y.basis() {
            assert!(fnorm(&(ex.apply(&y) - cp.direct_expectation(&e, &y))) < 1e-9);
        }
        let ind = eb.index.clone().unwrap();
        assert!(fnorm(&(ind - cp.compression.index_formula(&e.index.clone().unwrap()))) < 1e-8);
        let lk = linking_algebra(m);
        assert!(check_linking(m, &lk, T).unwrap().passes(1e-9));
        let el = linking_expectation(&lk, &ex, T).unwrap();
        let f = check_linking_expectation(&lk, &ex, &el, 1);
        assert!(f.passes(1e-8), "{f:?}");
        assert!(exchange_identities_check(&ex).passes(1e-8));
    }

    #[test]
    fn transport_round_trip_through_dual() {
        let e = s1();
        let cp = corner_partner(&e, 2, &corner_unit(2, 2)).unwrap();
        let (eb, _) = transport_expectation(&cp.pair, &e, T).unwrap();
        let back = cp.pair.dual();
        let (ea2, _) = transport_expectation(&back, &eb, T).unwrap();
        assert!(fnorm(&(ea2.action - &e.action)) < 1e-8);
    }

    #[test]
    fn composition_with_dual_is_equivalence() {
        let e = s1();
        let cp = corner_partner(&e, 2, &corner_unit(2, 2)).unwrap();
        let (m, ty, _) = compose(&cp.pair, &cp.pair.dual(), T).unwrap();
        assert_eq!(ty.gram_rank, ty.module.dim());
        assert!(check_pair(&m, T).unwrap().passes(1e-9));
    }
}
