//! Upward and downward basic constructions of a bimodule expectation.
//!
//! The upward construction is realized inside the basic construction of the
//! linking expectation E^{L_X}: L_Y → L_X.  With P = λ(1⊕0) and Q = λ(0⊕1),
//! the corners of (L_Y)₁ are C₁, D₁ and Y₁, the corner of the dual
//! expectation is E^Y, and φ(y) is the corner of λ(y).  Everything is then
//! compressed to the ranges of P and Q.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bimodule::{check_bimodule_expectation, ip_spans, BimoduleExpectation, CornerBimodule};
use crate::condexp::{
    basic_construction, basic_construction_skeleton, downward_data, dual_apply, dual_expectation, index_of,
    verify_expectation, BasicConstruction, CondExpectation, Downward,
};
use crate::error::{Error, Result};
use crate::exec;
use crate::fdalg::{block_structure, commuting_part_general, compress, range_isometry, MatrixAlgebra};
use crate::morita::{check_pair, linking_algebra, linking_expectation, Linking, MoritaPair};
use crate::numlin::{c, eye, fnorm, null_space_vectors, orthonormalize, psd_sqrt, rank, stack_columns, CMat, CVec, Subspace};
use crate::report::Findings;

const MAX_PAIRS: usize = 256;

#[derive(Debug, Clone)]
pub struct Upward {
    pub base: BimoduleExpectation,
    /// C ⊂ C₁ and D ⊂ D₁ through Y₁ ⊃ φ(Y).
    pub pair: MoritaPair,
    pub linking: Linking,
    pub e_l: CondExpectation,
    pub bc: BasicConstruction,
    pub e_l1: CondExpectation,
    pub vp: CMat,
    pub vq: CMat,
    pub e_a: CMat,
    pub e_b: CMat,
    pub e_c: CondExpectation,
    pub e_d: CondExpectation,
    pub e_y: BimoduleExpectation,
    phi_inv: CMat,
}

impl Upward {
    pub fn hat(&self, i: usize, j: usize, m: &CMat) -> CMat {
        let lk = &self.linking;
        let z = |r, c| CMat::zeros(r, c);
        let (dl, dr) = (lk.dl, lk.dr);
        match (i, j) {
            (0, 0) => lk.assemble(m, &z(dl, dr), &z(dr, dl), &z(dr, dr)),
            (0, 1) => lk.assemble(&z(dl, dl), m, &z(dr, dl), &z(dr, dr)),
            (1, 0) => lk.assemble(&z(dl, dl), &z(dl, dr), m, &z(dr, dr)),
            _ => lk.assemble(&z(dl, dl), &z(dl, dr), &z(dr, dl), m),
        }
    }

    fn v(&self, i: usize) -> &CMat {
        if i == 0 {
            &self.vp
        } else {
            &self.vq
        }
    }

    /// V_i* t V_j.
    pub fn corner(&self, t: &CMat, i: usize, j: usize) -> CMat {
        self.v(i).adjoint() * t * self.v(j)
    }

    /// V_i t V_j*.
    pub fn lift(&self, t: &CMat, i: usize, j: usize) -> CMat {
        self.v(i) * t * self.v(j).adjoint()
    }

    pub fn phi(&self, y: &CMat) -> CMat {
        self.corner(&self.bc.lambda(&self.hat(0, 1, y)), 0, 1)
    }

    pub fn phi_c(&self, x: &CMat) -> CMat {
        self.corner(&self.bc.lambda(&self.hat(0, 0, x)), 0, 0)
    }

    pub fn phi_d(&self, x: &CMat) -> CMat {
        self.corner(&self.bc.lambda(&self.hat(1, 1, x)), 1, 1)
    }

    /// The y ∈ Y with φ(y) = t, for t ∈ φ(Y).
    pub fn phi_inverse(&self, t: &CMat) -> CMat {
        self.base.big.elem(&(&self.phi_inv * self.pair.x.coords(t)))
    }

    /// ℓ ∈ L_Y with λ(ℓ) = t.
    fn unlambda(&self, t: &CMat) -> CMat {
        let one = eye(self.linking.dl + self.linking.dr);
        self.bc.unxi(&(t * self.bc.xi(&one)))
    }
}

fn corner_quasi_basis(up: &Upward, exp: &CondExpectation, side: usize) -> Result<Vec<(CMat, CMat)>> {
    let qb = exp.quasi_basis.as_ref().ok_or_else(|| Error::NearSingular("no quasi-basis".into()))?;
    let ind = exp.index.clone().ok_or_else(|| Error::NearSingular("no index".into()))?;
    let s = psd_sqrt(&((&ind + ind.adjoint()) * c(0.5)), 1e-14)?;
    let ls = up.bc.lambda(&up.hat(side, side, &s));
    let e = &up.bc.jones;
    Ok(qb
        .iter()
        .map(|(u, v)| {
            let a = up.bc.lambda(&up.hat(side, side, u)) * e * &ls;
            let b = &ls * e * up.bc.lambda(&up.hat(side, side, v));
            (up.corner(&a, side, side), up.corner(&b, side, side))
        })
        .collect())
}

pub fn upward(m: &MoritaPair, ex: &BimoduleExpectation, seed: u64) -> Result<Upward> {
    let tol = ex.left_exp.tol;
    let mut ex = ex.clone();
    ex.left_exp = ex.left_exp.clone().ensure_quasi_basis()?;
    ex.right_exp = ex.right_exp.clone().ensure_quasi_basis()?;
    let lk = linking_algebra(m);
    let e_l = linking_expectation(&lk, &ex, tol)?;
    let bc = basic_construction(&e_l, seed)?;
    let e_l1 = dual_expectation(&bc, seed)?;
    let vp = range_isometry(&bc.lambda(&lk.p), tol)?;
    let vq = range_isometry(&bc.lambda(&lk.q), tol)?;
    let c1 = compress(&bc.c1, &vp, tol)?;
    let d1 = compress(&bc.c1, &vq, tol)?;
    let lc = compress(&bc.lambda_c, &vp, tol)?;
    let ld = compress(&bc.lambda_c, &vq, tol)?;
    let placeholder = CondExpectation::from_action(
        MatrixAlgebra::scalars(1),
        MatrixAlgebra::scalars(1),
        CMat::identity(1, 1),
        tol,
    );
    let mut up = Upward {
        base: ex.clone(),
        pair: m.clone(),
        e_a: vp.adjoint() * &bc.jones * &vp,
        e_b: vq.adjoint() * &bc.jones * &vq,
        linking: lk,
        e_l,
        bc,
        e_l1,
        vp,
        vq,
        e_c: placeholder.clone(),
        e_d: placeholder,
        e_y: ex.clone(),
        phi_inv: CMat::zeros(0, 0),
    };
    let y1_span: Vec<CMat> = up.bc.c1.basis().iter().map(|t| up.corner(t, 0, 1)).collect();
    let y1 = CornerBimodule::new(c1.clone(), d1.clone(), &y1_span, tol)?;
    let phis: Vec<CMat> = m.y.basis().iter().map(|y| up.phi(y)).collect();
    let phi_y = CornerBimodule::new(lc.clone(), ld.clone(), &phis, tol)?;
    if phi_y.dim() != m.y.dim() {
        return Err(Error::RankDeficient("φ is not injective".into()));
    }
    let pm = CMat::from_columns(&phis.iter().map(|t| phi_y.coords(t)).collect::<Vec<_>>());
    up.phi_inv = pm.try_inverse().ok_or_else(|| Error::NearSingular("φ is not invertible onto its range".into()))?;

    let corner_exp = |up: &Upward, src: &MatrixAlgebra, tgt: &MatrixAlgebra, side: usize| {
        let cols: Vec<CVec> = exec::map(&src.basis(), |x| {
            tgt.coords(&up.corner(&up.e_l1.apply(&up.lift(x, side, side)), side, side))
        });
        CondExpectation::from_action(src.clone(), tgt.clone(), CMat::from_columns(&cols), tol)
    };
    let mut e_c = corner_exp(&up, &c1, &lc, 0);
    let qc = corner_quasi_basis(&up, &ex.left_exp, 0)?;
    e_c.index = Some(index_of(&qc, c1.d));
    e_c.quasi_basis = Some(qc);
    let mut e_d = corner_exp(&up, &d1, &ld, 1);
    let qd = corner_quasi_basis(&up, &ex.right_exp, 1)?;
    e_d.index = Some(index_of(&qd, d1.d));
    e_d.quasi_basis = Some(qd);
    let e_y = {
        let upr = &up;
        BimoduleExpectation::from_fn(y1.clone(), phi_y.clone(), e_c.clone(), e_d.clone(), |t| {
            upr.corner(&upr.e_l1.apply(&upr.lift(t, 0, 1)), 0, 1)
        })
    };
    up.e_c = e_c;
    up.e_d = e_d;
    up.e_y = e_y;
    up.pair = MoritaPair::new(y1, phi_y);
    Ok(up)
}

fn pairs_of<T>(xs: &[T]) -> Vec<(&T, &T)> {
    let mut out = Vec::new();
    for a in xs {
        for b in xs {
            out.push((a, b));
        }
    }
    if out.len() > MAX_PAIRS {
        let step = out.len().div_ceil(MAX_PAIRS);
        out = out.into_iter().step_by(step).collect();
    }
    out
}

/// φ for the quasi-bases attached with the given seeds:
/// Σ λ(u_i) e λ(E^X(u_i* y v_j)) e λ(v_j*).
pub fn phi_by_formula(up: &Upward, y: &CMat, seed_a: u64, seed_b: u64) -> Result<CMat> {
    let qa = up.base.left_exp.frame_quasi_basis(seed_a)?;
    let qb = up.base.right_exp.frame_quasi_basis(seed_b)?;
    let mut acc = CMat::zeros(up.vp.ncols(), up.vq.ncols());
    for (u, u2) in &qa {
        let left = up.phi_c(u) * &up.e_a;
        for (v, v2) in &qb {
            let x = up.base.apply(&(u2 * y * v));
            acc += &left * up.phi(&x) * &up.e_b * up.phi_d(v2);
        }
    }
    Ok(acc)
}

pub fn check_upward(up: &Upward, seed: u64) -> Result<Findings> {
    let tol = up.base.left_exp.tol;
    let mut f = Findings::new();
    let y = &up.base.big;
    let yb = y.basis();
    for (a, b) in pairs_of(&yb) {
        let (pa, pb) = (up.phi(a), up.phi(b));
        f.record("phi_left_ip", fnorm(&(&pa * pb.adjoint() - up.phi_c(&(a * b.adjoint())))));
        f.record("phi_right_ip", fnorm(&(pa.adjoint() * &pb - up.phi_d(&(a.adjoint() * b)))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b);
    for _ in 0..6 {
        let cc = up.base.left_exp.source.random_elem(&mut rng);
        let dd = up.base.right_exp.source.random_elem(&mut rng);
        let yy = y.random_elem(&mut rng);
        let lhs = up.phi(&(&cc * &yy * &dd));
        f.record("phi_actions", fnorm(&(lhs - up.phi_c(&cc) * up.phi(&yy) * up.phi_d(&dd))));
    }
    f.merge("pair.", &check_pair(&up.pair, tol)?);
    for yy in &yb {
        let p = up.phi(yy);
        f.record("EY_fixes_phi_Y", fnorm(&(up.e_y.apply(&p) - &p)));
        let lhs = &up.e_a * &p * &up.e_b;
        let rhs = up.phi(&up.base.apply(yy)) * &up.e_b;
        f.record("jones_compression", fnorm(&(lhs - rhs)));
        let s1 = phi_by_formula(up, yy, 0, 0)?;
        let s2 = phi_by_formula(up, yy, seed.wrapping_add(1), seed.wrapping_add(2))?;
        f.record("phi_formula", fnorm(&(&s1 - &p)));
        f.record("phi_quasi_basis_independent", fnorm(&(&s1 - &s2)));
    }
    let ind_a_inv = up.base.left_exp.index_inverse()?;
    for x in up.base.small.basis() {
        let lhs = up.e_y.apply(&(up.phi(&x) * &up.e_b));
        f.record("EY_on_jones", fnorm(&(lhs - up.phi(&(&ind_a_inv * &x)))));
    }
    f.merge("EC.", &verify_expectation(&up.e_c, 4, seed));
    f.merge("ED.", &verify_expectation(&up.e_d, 4, seed));
    f.merge("EY.", &check_bimodule_expectation(&up.e_y, 4, seed));
    let direct_a = basic_construction(&up.base.left_exp, seed)?;
    let direct_b = basic_construction(&up.base.right_exp, seed)?;
    f.record("C1_dim_matches_direct", (direct_a.c1.dim() as f64 - up.pair.c.dim() as f64).abs());
    f.record("D1_dim_matches_direct", (direct_b.c1.dim() as f64 - up.pair.d.dim() as f64).abs());
    let same = isomorphic(&direct_a.c1, &up.pair.c, seed)? && isomorphic(&direct_b.c1, &up.pair.d, seed)?;
    f.record("corner_blocks_match_direct", if same { 0.0 } else { 1.0 });
    Ok(f)
}

/// Same block sizes, ignoring multiplicities of the representation.
pub fn isomorphic(a: &MatrixAlgebra, b: &MatrixAlgebra, seed: u64) -> Result<bool> {
    let sizes = |x: &MatrixAlgebra| -> Result<Vec<usize>> {
        let mut k: Vec<usize> = block_structure(x, 1e-9, seed)?.blocks.iter().map(|b| b.k).collect();
        k.sort_unstable();
        Ok(k)
    };
    Ok(sizes(a)? == sizes(b)?)
}

/// θ: W → Y₁ with F^Y = E^Y∘θ.
#[derive(Debug, Clone)]
pub struct Theta {
    /// Coordinates of θ(w_k) in Y₁, one column per basis element of W.
    pub matrix: CMat,
    pub findings: Findings,
}

/// Condition (*): F^Y(e_A φ(y) e_B) = φ(Ind(E^A)⁻¹ E^X(y)), as a max violation.
pub fn star_condition(up: &Upward, f_y: &(dyn Fn(&CMat) -> CMat + Sync)) -> Result<f64> {
    let ind_inv = up.base.left_exp.index_inverse()?;
    let mut worst: f64 = 0.0;
    for y in up.base.big.basis() {
        let lhs = f_y(&(&up.e_a * up.phi(&y) * &up.e_b));
        let rhs = up.phi(&(&ind_inv * up.base.apply(&y)));
        worst = worst.max(fnorm(&(lhs - rhs)));
    }
    Ok(worst)
}

pub fn uniqueness_iso(up: &Upward, w: &CornerBimodule, f_y: &(dyn Fn(&CMat) -> CMat + Sync), seed: u64) -> Result<Theta> {
    let e_a = &up.base.left_exp;
    let ind = e_a.index.clone().ok_or_else(|| Error::NearSingular("no index".into()))?;
    if !e_a.index_in_target() {
        return Err(Error::IndexNotInSubalgebra);
    }
    let star = star_condition(up, f_y)?;
    if star > 1e-8 {
        return Err(Error::StarCondition(star));
    }
    let qa = e_a.quasi_basis.clone().unwrap_or_default();
    let qb = up.base.right_exp.quasi_basis.clone().unwrap_or_default();
    let left: Vec<(CMat, CMat)> = qa.iter().map(|(u, u2)| (up.phi_c(&(&ind * u)) * &up.e_a, &up.e_a * up.phi_c(u2))).collect();
    let right: Vec<(CMat, CMat)> = qb.iter().map(|(v, v2)| (up.phi_d(v) * &up.e_b, &up.e_b * up.phi_d(v2))).collect();
    let theta = |t: &CMat| -> CMat {
        let mut acc = CMat::zeros(t.nrows(), t.ncols());
        for (lo, li) in &left {
            for (ri, ro) in &right {
                let x = up.base.apply(&up.phi_inverse(&f_y(&(li * t * ri))));
                acc += lo * up.phi(&x) * ro;
            }
        }
        acc
    };
    let y1 = &up.pair.y;
    let wb = w.basis();
    let images: Vec<CMat> = exec::map(&wb, |t| theta(t));
    let matrix = CMat::from_columns(&images.iter().map(|t| y1.coords(t)).collect::<Vec<_>>());
    let mut f = Findings::new();
    for t in &images {
        f.record("theta_in_Y1", y1.space.residual(t));
    }
    let r = rank(&matrix, 1e-9);
    f.record("theta_bijective", if r == w.dim() && r == y1.dim() { 0.0 } else { 1.0 });
    let idx: Vec<usize> = (0..wb.len()).collect();
    for (&i, &j) in pairs_of(&idx) {
        let l = &images[i] * images[j].adjoint() - &wb[i] * wb[j].adjoint();
        let rr = images[i].adjoint() * &images[j] - wb[i].adjoint() * &wb[j];
        f.record("theta_left_ip", fnorm(&l));
        f.record("theta_right_ip", fnorm(&rr));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e7a);
    let cs = &up.pair.x.left;
    let ds = &up.pair.x.right;
    for _ in 0..4 {
        let t = w.random_elem(&mut rng);
        let g = cs.random_elem(&mut rng) * &up.e_a * cs.random_elem(&mut rng);
        f.record("theta_left_module", fnorm(&(theta(&(&g * &t)) - &g * theta(&t))));
        let h = ds.random_elem(&mut rng) * &up.e_b * ds.random_elem(&mut rng);
        f.record("theta_right_module", fnorm(&(theta(&(&t * &h)) - theta(&t) * &h)));
    }
    for _ in 0..20 {
        let t = w.random_elem(&mut rng);
        f.record("F_equals_EY_theta", fnorm(&(f_y(&t) - up.e_y.apply(&theta(&t)))));
    }
    Ok(Theta { matrix, findings: f })
}

/// Outcome of the level-two comparison with p·M_k(X)·q and p·M_k(Y)·q.
#[derive(Debug, Clone)]
pub struct Duality {
    pub k: usize,
    pub dim_y1: usize,
    pub dim_pmxq: usize,
    pub dim_y2: usize,
    pub dim_pmyq: usize,
    pub findings: Findings,
}

fn padded(qb: &[(CMat, CMat)], k: usize) -> Vec<CMat> {
    let d = qb[0].0.nrows();
    let mut out: Vec<CMat> = qb.iter().map(|(u, _)| u.clone()).collect();
    out.resize(k, CMat::zeros(d, d));
    out
}

fn block_matrix(k: usize, r: usize, cdim: usize, f: impl Fn(usize, usize) -> CMat) -> CMat {
    let mut m = CMat::zeros(k * r, k * cdim);
    for i in 0..k {
        for j in 0..k {
            m.view_mut((i * r, j * cdim), (r, cdim)).copy_from(&f(i, j));
        }
    }
    m
}

fn sandwich_span(p: &CMat, q: &CMat, k: usize, xs: &[CMat], tol: f64) -> Result<Subspace> {
    let mut span = Vec::new();
    for i in 0..k {
        for j in 0..k {
            for x in xs {
                let e = block_matrix(k, x.nrows(), x.ncols(), |a, b| if a == i && b == j { x.clone() } else { CMat::zeros(x.nrows(), x.ncols()) });
                span.push(p * e * q);
            }
        }
    }
    orthonormalize(&span, tol)
}

/// Grows span{gen(rng)} until a batch of generic elements adds nothing.
fn random_span(rows: usize, cols: usize, tol: f64, seed: u64, cap: usize, gen: impl Fn(&mut ChaCha8Rng) -> CMat) -> Result<Subspace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut span = Subspace::zero(rows, cols);
    let mut quiet = 0;
    let mut rounds = 0;
    while quiet < 1 {
        rounds += 1;
        if rounds > cap {
            return Err(Error::NonStabilizing(rounds));
        }
        let batch: Vec<CMat> = (0..16).map(|_| gen(&mut rng)).collect();
        if span.extend_in_place(&batch, tol)? == 0 {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }
    Ok(span)
}

pub fn duality_check(up: &Upward, seed: u64, samples: usize) -> Result<Duality> {
    let tol = up.base.left_exp.tol;
    let e_a = &up.base.left_exp;
    let e_b = &up.base.right_exp;
    if !e_a.index_in_target() {
        return Err(Error::IndexNotInSubalgebra);
    }
    let qa = e_a.quasi_basis.clone().unwrap_or_default();
    let qb = e_b.quasi_basis.clone().unwrap_or_default();
    let k = qa.len().max(qb.len());
    let us = padded(&qa, k);
    let vs = padded(&qb, k);
    let (dl, dr) = (up.linking.dl, up.linking.dr);
    let p = block_matrix(k, dl, dl, |i, j| e_a.apply(&(us[i].adjoint() * &us[j])));
    let q = block_matrix(k, dr, dr, |i, j| e_b.apply(&(vs[i].adjoint() * &vs[j])));
    let mut f = Findings::new();
    f.record("p_projection", fnorm(&(&p * &p - &p)).max(fnorm(&(&p - p.adjoint()))));
    f.record("q_projection", fnorm(&(&q * &q - &q)).max(fnorm(&(&q - q.adjoint()))));

    let bc = &up.bc;
    let xi_u: Vec<CVec> = us.iter().map(|u| bc.xi(&up.hat(0, 0, u))).collect();
    let xi_v: Vec<CVec> = vs.iter().map(|v| bc.xi(&up.hat(1, 1, v))).collect();
    let lk = &up.linking;
    // Φ̄ on Y₁ and Ψ on C₁, D₁, all acting on L²(L_Y).
    let phibar = |t: &CMat| {
        let cols: Vec<CMat> = xi_v.iter().map(|xv| lk.block(&bc.unxi(&(t * xv)), 0, 1)).collect();
        block_matrix(k, dl, dr, |i, j| up.base.apply(&(us[i].adjoint() * &cols[j])))
    };
    let psi_c = |s: &CMat| {
        let cols: Vec<CMat> = xi_u.iter().map(|xu| lk.block(&bc.unxi(&(s * xu)), 0, 0)).collect();
        block_matrix(k, dl, dl, |i, j| e_a.apply(&(us[i].adjoint() * &cols[j])))
    };
    let psi_d = |s: &CMat| {
        let cols: Vec<CMat> = xi_v.iter().map(|xv| lk.block(&bc.unxi(&(s * xv)), 1, 1)).collect();
        block_matrix(k, dr, dr, |i, j| e_b.apply(&(vs[i].adjoint() * &cols[j])))
    };
    let pmxq = sandwich_span(&p, &q, k, &up.base.small.basis(), tol)?;
    let pmyq = sandwich_span(&p, &q, k, &up.base.big.basis(), tol)?;
    let y1: Vec<CMat> = up.pair.y.basis().iter().map(|t| up.lift(t, 0, 1)).collect();
    let images: Vec<CMat> = exec::map(&y1, |t| phibar(t));
    for im in &images {
        f.record("phibar_range", pmxq.residual(im));
    }
    let r = rank(&stack_columns(&images), 1e-9);
    f.record("phibar_injective", if r == y1.len() { 0.0 } else { 1.0 });
    f.record("dim_Y1_vs_pMkXq", (y1.len() as f64 - pmxq.dim() as f64).abs());
    let idx: Vec<usize> = (0..y1.len()).collect();
    for (&i, &j) in pairs_of(&idx).iter().take(64) {
        let l = &images[i] * images[j].adjoint() - psi_c(&(&y1[i] * y1[j].adjoint()));
        let rr = images[i].adjoint() * &images[j] - psi_d(&(y1[i].adjoint() * &y1[j]));
        f.record("phibar_left_ip", fnorm(&l));
        f.record("phibar_right_ip", fnorm(&rr));
    }

    // Second level of the linking tower.
    let bc2 = basic_construction_skeleton(&up.e_l1)?;
    let p1 = bc.lambda(&lk.p);
    let q1 = bc.lambda(&lk.q);
    let p2 = bc2.lambda(&p1);
    let q2 = bc2.lambda(&q1);
    let ind_a = e_a.index.clone().unwrap();
    let ind_b = e_b.index.clone().unwrap();
    let sa = bc.lambda(&up.hat(0, 0, &psd_sqrt(&((&ind_a + ind_a.adjoint()) * c(0.5)), 1e-14)?));
    let sb = bc.lambda(&up.hat(1, 1, &psd_sqrt(&((&ind_b + ind_b.adjoint()) * c(0.5)), 1e-14)?));
    let ws: Vec<CMat> = us.iter().map(|u| bc.lambda(&up.hat(0, 0, u)) * &bc.jones * &sa).collect();
    let zs: Vec<CMat> = vs.iter().map(|v| bc.lambda(&up.hat(1, 1, v)) * &bc.jones * &sb).collect();
    let xi_z: Vec<CVec> = zs.iter().map(|z| bc2.xi(z)).collect();
    let e_y_l = |s: &CMat| lk.block(&up.unlambda(&up.e_l1.apply(s)), 0, 1);
    let phibar1 = |t: &CMat| {
        let cols: Vec<CMat> = xi_z.iter().map(|xz| &p1 * bc2.unxi(&(t * xz)) * &q1).collect();
        block_matrix(k, dl, dr, |i, j| e_y_l(&(ws[i].adjoint() * &cols[j])))
    };
    let c1 = &bc.c1;
    let y2_elem = |rng: &mut ChaCha8Rng| {
        let s = c1.random_elem(rng);
        let t = c1.random_elem(rng);
        &p2 * bc2.lambda(&s) * &bc2.jones * bc2.lambda(&t) * &q2
    };
    let n2 = bc2.module_dim;
    let y2 = random_span(n2, n2, tol, seed ^ 0x42, n2 * n2, y2_elem)?;
    f.record("dim_Y2_vs_pMkYq", (y2.dim() as f64 - pmyq.dim() as f64).abs());
    let y2_images: Vec<CMat> = exec::map(&y2.elems(), |t| phibar1(t));
    let r2 = rank(&stack_columns(&y2_images), 1e-9);
    f.record("phibar1_injective", if r2 == y2.dim() { 0.0 } else { 1.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd0a1);
    let ex_entrywise = |m: &CMat| {
        block_matrix(k, dl, dr, |i, j| up.base.apply(&m.view((i * dl, j * dr), (dl, dr)).into_owned()))
    };
    let ts: Vec<CMat> = (0..samples)
        .map(|_| {
            let mut t = CMat::zeros(n2, n2);
            for _ in 0..3 {
                t += y2_elem(&mut rng);
            }
            t
        })
        .collect();
    let viol: Vec<(f64, f64)> = exec::map(&ts, |t| -> (f64, f64) {
        let lhs_in = phibar1(t);
        let lhs = ex_entrywise(&lhs_in);
        let rhs = match dual_apply(&bc2, t) {
            Ok(s) => phibar(&s),
            Err(_) => return (f64::INFINITY, f64::INFINITY),
        };
        (fnorm(&(lhs - rhs)), pmyq.residual(&lhs_in))
    });
    for (v, r) in viol {
        f.record("commuting_identity", v);
        f.record("phibar1_range", r);
    }
    Ok(Duality { k, dim_y1: y1.len(), dim_pmxq: pmxq.dim(), dim_y2: y2.dim(), dim_pmyq: pmyq.dim(), findings: f })
}

#[derive(Debug, Clone)]
pub struct DownwardData {
    pub left: Downward,
    pub right: Downward,
    pub z: CornerBimodule,
    pub e_z: BimoduleExpectation,
    pub findings: Findings,
}

/// Z = {x ∈ X : p·x = x·q} and E^Z(x) = Ind(E^A)·E^X(p·x·q).  With `rebuild`,
/// the upward construction of (X ⊃ Z) is compared with (Y ⊃ X).
pub fn downward(m: &MoritaPair, ex: &BimoduleExpectation, p: &CMat, q: &CMat, seed: u64, rebuild: bool) -> Result<DownwardData> {
    let tol = ex.left_exp.tol;
    let e_a = ex.left_exp.clone().ensure_quasi_basis()?;
    let e_b = ex.right_exp.clone().ensure_quasi_basis()?;
    let left = downward_data(&e_a, p, seed)?;
    let right = downward_data(&e_b, q, seed)?;
    let xb = m.x.basis();
    let cols: Vec<CMat> = xb.iter().map(|x| p * x - x * q).collect();
    let null = null_space_vectors(&stack_columns(&cols), tol);
    let zs: Vec<CMat> = (0..null.ncols()).map(|j| m.x.elem(&null.column(j).into_owned())).collect();
    if zs.is_empty() {
        return Err(Error::BadProjection("p·x = x·q has only the zero solution".into()));
    }
    let z = CornerBimodule::new(left.p_alg.clone(), right.p_alg.clone(), &zs, tol)?;
    let ind_a = e_a.index.clone().unwrap();
    let ind_b = e_b.index.clone().unwrap();
    let e_z = BimoduleExpectation::from_fn(m.x.clone(), z.clone(), left.ep.clone(), right.ep.clone(), |x| {
        &ind_a * ex.apply(&(p * x * q))
    });
    let mut f = Findings::new();
    for zz in z.basis() {
        f.record("Z_membership", fnorm(&(p * &zz - &zz * q)));
        f.record("EZ_fixes_Z", fnorm(&(e_z.apply(&zz) - &zz)));
    }
    for x in &xb {
        let a = e_z.apply(x);
        f.record("EZ_right_form", fnorm(&(&a - ex.apply(&(p * x * q)) * &ind_b)));
        f.record("EZ_range", z.space.residual(&a));
    }
    let (lzz, _) = ip_spans(&z, &z, tol)?;
    f.record("left_ip_Z_spans_P", if lzz.dim() == left.p_alg.dim() { lzz.distance(&left.p_alg.span) } else { 1.0 });
    let pair = MoritaPair::new(m.x.clone(), z.clone());
    f.merge("pair.", &check_pair(&pair, tol)?);
    f.merge("EZ.", &check_bimodule_expectation(&e_z, 4, seed));
    f.merge("P.", &left.findings);
    f.merge("Q.", &right.findings);
    let eq = |a: bool| if a { 0.0 } else { 1.0 };
    f.record("rebuilt_blocks_C", eq(left.blocks_original == left.blocks_rebuilt));
    f.record("rebuilt_blocks_D", eq(right.blocks_original == right.blocks_rebuilt));
    f.record("rebuilt_inclusion_C", eq(left.inclusion_original == left.inclusion_rebuilt));
    f.record("rebuilt_inclusion_D", eq(right.inclusion_original == right.inclusion_rebuilt));
    if rebuild {
        let up = upward(&pair, &e_z, seed)?;
        f.record("rebuilt_dim_Y", (up.pair.y.dim() as f64 - m.y.dim() as f64).abs());
        f.record("rebuilt_dim_X", (up.pair.x.dim() as f64 - m.x.dim() as f64).abs());
        f.record("rebuilt_blocks_C1", eq(isomorphic(&up.pair.c, &m.c, seed)?));
        f.record("rebuilt_blocks_D1", eq(isomorphic(&up.pair.d, &m.d, seed)?));
    }
    Ok(DownwardData { left, right, z, e_z, findings: f })
}

/// Z' = {y : e_A φ(y) = φ(y) e_B} equals X; the downward construction for
/// (C ⊂ C₁, D ⊂ D₁) at (e_A, e_B) gives back E^X; A = {a ∈ C : e_A a = a e_A}.
pub fn updown_relation_check(up: &Upward, seed: u64) -> Result<Findings> {
    let tol = up.base.left_exp.tol;
    let mut f = Findings::new();
    let y = &up.base.big;
    let yb = y.basis();
    let cols: Vec<CMat> = yb.iter().map(|yy| {
        let t = up.phi(yy);
        &up.e_a * &t - &t * &up.e_b
    }).collect();
    let null = null_space_vectors(&stack_columns(&cols), tol);
    let zs: Vec<CMat> = (0..null.ncols()).map(|j| y.elem(&null.column(j).into_owned())).collect();
    let zsp = if zs.is_empty() { Subspace::zero(y.space.rows, y.space.cols) } else { orthonormalize(&zs, tol)? };
    let x = &up.base.small;
    f.record("Z_equals_X", if zsp.dim() == x.dim() { zsp.distance(&x.space) } else { 1.0 });

    let ind_inv = up.base.left_exp.index_inverse()?;
    f.record("EC_of_jones", fnorm(&(up.e_c.apply(&up.e_a) - up.phi_c(&ind_inv))));
    let dd = downward(&up.pair, &up.e_y, &up.e_a, &up.e_b, seed, false)?;
    for yy in &yb {
        let lhs = dd.e_z.apply(&up.phi(yy));
        f.record("downward_recovers_EX", fnorm(&(lhs - up.phi(&up.base.apply(yy)))));
    }
    let phx: Vec<CMat> = x.basis().iter().map(|xx| up.phi(xx)).collect();
    let phx = orthonormalize(&phx, tol)?;
    f.record("downward_Z_is_phi_X", if dd.z.dim() == phx.dim() { dd.z.space.distance(&phx) } else { 1.0 });
    let lc = &up.pair.x.left;
    let comm = commuting_part_general(&[up.e_a.clone()], lc, tol);
    let la: Vec<CMat> = up.base.left_exp.target.basis().iter().map(|a| up.phi_c(a)).collect();
    let la = orthonormalize(&la, tol)?;
    f.record("A_is_commutant_of_jones", if comm.dim() == la.dim() { comm.span.distance(&la) } else { 1.0 });
    Ok(f)
}

/// A ⊂ B with E: B → A of index in A, against λ₁(B₁) ⊂ B₂ through the tower
/// of E: Y = {λ₁(z)V : z ∈ B₁} and X = {λ₁(θ(x))V : x ∈ B} with
/// θ(x) = Ind^{1/2} x f, where V is the range isometry of f₁.  The right
/// algebras are B and A acting on the range of f₁.
#[derive(Debug, Clone)]
pub struct TowerBimodule {
    pub pair: MoritaPair,
    /// The second dual expectation B₂ → λ₁(B₁).
    pub e_a: CondExpectation,
    /// E carried to the range of f₁.
    pub e_b: CondExpectation,
    /// E^X from ⟨G(y), x⟩ = E(⟨y, x⟩).
    pub g: BimoduleExpectation,
    pub findings: Findings,
}

pub fn tower_bimodule(e: &CondExpectation, seed: u64) -> Result<TowerBimodule> {
    let tol = e.tol;
    let e = e.clone().ensure_quasi_basis()?;
    if !e.index_in_target() {
        return Err(Error::IndexNotInSubalgebra);
    }
    let ind = e.index.clone().expect("quasi-basis attached");
    let t = crate::paragroup::build_tower(&e, 2, crate::paragroup::DEFAULT_CAP, seed)?;
    let (bc0, bc1) = (&t.steps[0], &t.steps[1]);
    let v = range_isometry(&bc1.jones, tol)?;
    let down = |b: &CMat| v.adjoint() * bc1.lambda(&bc0.lambda(b)) * &v;
    let b_alg = e.source.map_through(v.ncols(), down, tol)?;
    let a_alg = e.target.map_through(v.ncols(), down, tol)?;
    let mb = b_alg.span.coords_many(&e.source.basis().iter().map(down).collect::<Vec<_>>());
    let ma = a_alg.span.coords_many(&e.target.basis().iter().map(down).collect::<Vec<_>>());
    let mb_inv = mb.try_inverse().ok_or_else(|| Error::NearSingular("B does not act faithfully on the range of f₁".into()))?;
    let e_b = CondExpectation::from_action(b_alg.clone(), a_alg.clone(), &ma * &e.action * mb_inv, tol).ensure_quasi_basis()?;
    let e_a = t.expectations[2].clone();

    let ys: Vec<CMat> = t.levels[1].basis().iter().map(|z| bc1.lambda(z) * &v).collect();
    let y = CornerBimodule::new(t.levels[2].clone(), b_alg, &ys, tol)?;
    let s = psd_sqrt(&ind, 1e-14)?;
    let s_inv = crate::numlin::psd_inv_sqrt(&ind, 1e-14)?;
    let f = &bc0.jones;
    let theta = |x: &CMat| bc0.lambda(&(&s * x)) * f;
    let bb = e.source.basis();
    let xs: Vec<CMat> = bb.iter().map(|x| bc1.lambda(&theta(x)) * &v).collect();
    let x = CornerBimodule::new(bc1.lambda_c.clone(), a_alg, &xs, tol)?;
    let pair = MoritaPair::new(y.clone(), x.clone());
    let action = crate::bimodule::right_expectation_from(&e_b, &y, &x, tol)?;
    let g = BimoduleExpectation { big: y, small: x, action, left_exp: e_a.clone(), right_exp: e_b.clone() };

    let mut fd = Findings::new();
    let tx: Vec<CMat> = bb.iter().map(|x| bc1.lambda(&theta(x)) * &v).collect();
    for (i, xi) in bb.iter().enumerate() {
        for (j, yj) in bb.iter().enumerate() {
            let gy = g.apply(&(bc1.lambda(&(bc0.lambda(xi) * f * bc0.lambda(yj))) * &v));
            let want = bc1.lambda(&theta(&(&s_inv * xi * e.apply(yj)))) * &v;
            fd.record("G_formula", fnorm(&(gy - want)));
            fd.record("theta_right_ip", fnorm(&(tx[i].adjoint() * &tx[j] - down(&e.apply(&(xi.adjoint() * yj))))));
            let left = &tx[i] * tx[j].adjoint();
            fd.record("theta_left_ip", fnorm(&(left - bc1.lambda(&(bc0.lambda(xi) * f * bc0.lambda(&yj.adjoint()))))));
        }
    }
    Ok(TowerBimodule { pair, e_a, e_b, g, findings: fd })
}
