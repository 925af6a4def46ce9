//! Conditional expectations of index-finite type, quasi-bases, Watatani
//! indices, compression to corners, Jones basic construction and its dual
//! expectation, and the downward construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::fdalg::{
    amplify, block_structure, check_projection, check_square, commuting_part_general, compress,
    ideal_span, inclusion_matrix_from, range_isometry, MatrixAlgebra,
};
use crate::numlin::{
    c, eye, fnorm, kron, lstsq, psd_inv, psd_inv_sqrt, psd_sqrt, random_matrix, stack_columns,
    vec_of, CMat, CVec, Subspace, C64,
};
use crate::report::Findings;

/// E: C → A stored on algebra coordinates (`action` is dim A × dim C).
/// `state` is a faithful state φ on C with φ∘E = φ, written as the
/// coordinates of its Frobenius-dual density.
#[derive(Debug, Clone)]
pub struct CondExpectation {
    pub source: MatrixAlgebra,
    pub target: MatrixAlgebra,
    pub action: CMat,
    pub state: CVec,
    pub quasi_basis: Option<Vec<(CMat, CMat)>>,
    pub index: Option<CMat>,
    pub tol: f64,
}

impl CondExpectation {
    pub fn from_action(source: MatrixAlgebra, target: MatrixAlgebra, action: CMat, tol: f64) -> Self {
        let mut e = CondExpectation {
            state: CVec::zeros(source.dim()),
            source,
            target,
            action,
            quasi_basis: None,
            index: None,
            tol,
        };
        e.state = e.pull_state(&trace_state(&e.target));
        e
    }

    /// State on the source given a state on the target: ψ ↦ ψ∘E.
    pub fn pull_state(&self, target_state: &CVec) -> CVec {
        self.action.adjoint() * target_state
    }

    pub fn with_target_state(mut self, target_state: &CVec) -> Self {
        self.state = self.pull_state(target_state);
        self
    }

    pub fn apply(&self, x: &CMat) -> CMat {
        self.target.elem(&(&self.action * self.source.coords(x)))
    }

    pub fn phi(&self, x: &CMat) -> C64 {
        self.state.dotc(&self.source.coords(x))
    }

    /// Gφ_{jk} = φ(b_j* b_k).
    pub fn gram_phi(&self) -> CMat {
        let rho = self.source.elem(&self.state);
        let basis = self.source.basis();
        let moved: Vec<CMat> = basis.iter().map(|b| b * rho.adjoint()).collect();
        let g = self.source.span.basis.ad_mul(&stack_columns(&moved));
        (&g + g.adjoint()) * c(0.5)
    }

    pub fn index_inverse(&self) -> Result<CMat> {
        let ind = self.index.as_ref().ok_or_else(|| Error::NearSingular("no index attached".into()))?;
        psd_inv(&((ind + ind.adjoint()) * c(0.5)), 1e-12)
    }

    /// Parseval-frame quasi-basis. Seed 0 uses the orthonormal basis of C,
    /// other seeds a random invertible mixing of it.
    pub fn frame_quasi_basis(&self, seed: u64) -> Result<Vec<(CMat, CMat)>> {
        let basis = self.source.basis();
        let n = basis.len();
        let spanning: Vec<CMat> = if seed == 0 {
            basis.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_matrix(&mut rng, n, n);
            (0..n)
                .map(|k| {
                    let mut s = CMat::zeros(self.source.d, self.source.d);
                    for (j, b) in basis.iter().enumerate() {
                        s += b * g[(j, k)];
                    }
                    s
                })
                .collect()
        };
        let cols: Vec<CVec> = exec::map(&basis, |x| {
            let mut acc = CMat::zeros(self.source.d, self.source.d);
            for s in &spanning {
                acc += s * self.apply(&(s.adjoint() * x));
            }
            self.source.coords(&acc)
        });
        let s_op = CMat::from_columns(&cols);
        let g = self.gram_phi();
        let k = psd_sqrt(&g, 1e-14)?;
        let kinv = psd_inv_sqrt(&g, 1e-14)?;
        let s_phi = &k * &s_op * &kinv;
        let s_phi = (&s_phi + s_phi.adjoint()) * c(0.5);
        let r_phi = psd_inv_sqrt(&s_phi, self.tol)
            .map_err(|e| Error::NearSingular(format!("frame operator is singular: {e}")))?;
        let r = &kinv * r_phi * &k;
        Ok(spanning
            .iter()
            .map(|s| {
                let u = self.source.elem(&(&r * self.source.coords(s)));
                let v = u.adjoint();
                (u, v)
            })
            .collect())
    }

    /// Attach a frame quasi-basis and the index Σ u_i v_i.
    pub fn with_quasi_basis(mut self, seed: u64) -> Result<Self> {
        let qb = self.frame_quasi_basis(seed)?;
        self.index = Some(index_of(&qb, self.source.d));
        self.quasi_basis = Some(qb);
        Ok(self)
    }

    pub fn ensure_quasi_basis(self) -> Result<Self> {
        if self.quasi_basis.is_some() {
            Ok(self)
        } else {
            self.with_quasi_basis(0)
        }
    }

    pub fn index_in_target(&self) -> bool {
        self.index.as_ref().is_some_and(|i| self.target.contains(i, self.tol * 1e3))
    }
}

pub fn index_of(qb: &[(CMat, CMat)], d: usize) -> CMat {
    let mut ind = CMat::zeros(d, d);
    for (u, v) in qb {
        ind += u * v;
    }
    ind
}

/// Normalized ambient trace on an algebra, as a state vector.
pub fn trace_state(a: &MatrixAlgebra) -> CVec {
    a.coords(&(eye(a.d) / c(a.d as f64)))
}

fn check_unital_inclusion(c_alg: &MatrixAlgebra, a: &MatrixAlgebra, tol: f64) -> Result<()> {
    if c_alg.d != a.d || !a.is_subalgebra_of(c_alg, tol * 1e2) {
        return Err(Error::NotSubalgebra("A is not contained in C".into()));
    }
    if !a.contains(&eye(a.d), tol * 1e2) || !c_alg.contains(&eye(a.d), tol * 1e2) {
        return Err(Error::NotSubalgebra("inclusion is not unital".into()));
    }
    Ok(())
}

/// Orthogonal projection of C onto A for the normalized ambient trace.
pub fn trace_expectation(c_alg: &MatrixAlgebra, a: &MatrixAlgebra, tol: f64) -> Result<CondExpectation> {
    check_unital_inclusion(c_alg, a, tol)?;
    let action = a.span.basis.ad_mul(&c_alg.span.basis);
    Ok(CondExpectation::from_action(c_alg.clone(), a.clone(), action, tol))
}

/// Expectation given as a d²×d² matrix on column-major vectorized matrices.
pub fn from_ambient_matrix(c_alg: &MatrixAlgebra, a: &MatrixAlgebra, m: &CMat, tol: f64) -> Result<CondExpectation> {
    check_unital_inclusion(c_alg, a, tol)?;
    let d2 = c_alg.d * c_alg.d;
    if m.nrows() != d2 || m.ncols() != d2 {
        return Err(Error::InputShape(format!("expectation matrix must be {d2}x{d2}")));
    }
    let img = m * &c_alg.span.basis;
    let action = a.span.basis.ad_mul(&img);
    let off = fnorm(&(&img - &a.span.basis * &action));
    if off > 1e-8 * fnorm(&img).max(1.0) {
        return Err(Error::AxiomViolation(format!("map does not land in A (residual {off:.3e})")));
    }
    let e = CondExpectation::from_action(c_alg.clone(), a.clone(), action, tol);
    let f = verify_expectation(&e, 10, 0);
    if !f.passes(1e-8) {
        let (name, v) = f.worst().unwrap();
        return Err(Error::AxiomViolation(format!("{name} violated by {v:.3e}")));
    }
    Ok(e)
}

fn unit_norm(x: CMat) -> CMat {
    let n = fnorm(&x);
    if n > 0.0 {
        x / c(n)
    } else {
        x
    }
}

/// Basis elements plus random unit-norm elements.
pub fn sample_elems(a: &MatrixAlgebra, random: usize, seed: u64) -> Vec<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = a.basis();
    for _ in 0..random {
        v.push(unit_norm(a.random_elem(&mut rng)));
    }
    v
}

/// Max violations of Σ u_i E(v_i x) = x and Σ E(x u_i) v_i = x.
pub fn quasi_basis_violation(e: &CondExpectation, qb: &[(CMat, CMat)], xs: &[CMat]) -> (f64, f64) {
    let per: Vec<(f64, f64)> = exec::map(xs, |x| {
        let d = e.source.d;
        let mut l = CMat::zeros(d, d);
        let mut r = CMat::zeros(d, d);
        for (u, v) in qb {
            l += u * e.apply(&(v * x));
            r += e.apply(&(x * u)) * v;
        }
        let s = fnorm(x).max(1e-300);
        (fnorm(&(l - x)) / s, fnorm(&(r - x)) / s)
    });
    per.iter().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

/// Max violation per expectation axiom on unit-norm inputs.
pub fn verify_expectation(e: &CondExpectation, samples: usize, seed: u64) -> Findings {
    let mut f = Findings::new();
    let xs = sample_elems(&e.source, samples, seed);
    let as_ = sample_elems(&e.target, samples.min(4), seed.wrapping_add(1));
    let d = e.source.d;
    let unit = fnorm(&(e.apply(&eye(d)) - eye(d))) / (d as f64).sqrt();
    f.record("unital", unit);
    for a in &as_ {
        f.record("fixes_target", fnorm(&(e.apply(a) - a)));
    }
    for x in &xs {
        let ex = e.apply(x);
        f.record("adjoint", fnorm(&(e.apply(&x.adjoint()) - ex.adjoint())));
        let xx = x.adjoint() * x;
        let y = e.apply(&xx);
        let h = (&y + y.adjoint()) * c(0.5);
        let lmin = nalgebra::SymmetricEigen::new(h).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        f.record("positive", (-lmin).max(0.0) / fnorm(&xx).max(1e-300));
    }
    let triples_full = e.target.dim() * e.target.dim() * e.source.dim() <= 4096;
    let (la, lx): (Vec<CMat>, Vec<CMat>) = if triples_full {
        (e.target.basis(), e.source.basis())
    } else {
        (as_.clone(), xs.clone())
    };
    let worst = exec::map(&lx, |x| {
        let mut m: f64 = 0.0;
        let ex = e.apply(x);
        for a in &la {
            for b in &la {
                let lhs = e.apply(&(a * x * b));
                m = m.max(fnorm(&(lhs - a * &ex * b)));
            }
        }
        m
    });
    f.record("bimodule", worst.into_iter().fold(0.0, f64::max));
    if let Some(qb) = &e.quasi_basis {
        let (l, r) = quasi_basis_violation(e, qb, &xs);
        f.record("quasi_basis_left", l);
        f.record("quasi_basis_right", r);
        let ind = index_of(qb, d);
        if let Some(stored) = &e.index {
            f.record("index_sum", fnorm(&(&ind - stored)) / fnorm(stored).max(1.0));
        }
        let s = fnorm(&ind).max(1.0);
        let central = xs.iter().map(|x| fnorm(&(&ind * x - x * &ind)) / s).fold(0.0, f64::max);
        f.record("index_central", central);
    }
    f
}

/// Index computed from two quasi-bases; returns it with the discrepancy.
pub fn watatani_index(e: &CondExpectation, seed: u64) -> Result<(CMat, f64)> {
    let q1 = e.frame_quasi_basis(0)?;
    let q2 = e.frame_quasi_basis(seed.max(1))?;
    let i1 = index_of(&q1, e.source.d);
    let i2 = index_of(&q2, e.source.d);
    let diff = fnorm(&(&i1 - &i2));
    Ok((i1, diff))
}

/// (E ⊗ id) on M_n(C), outer index first.
pub fn amplified_apply(e: &CondExpectation, n: usize, x: &CMat) -> CMat {
    let d = e.source.d;
    let mut out = CMat::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            let blk = x.view((i * d, j * d), (d, d)).into_owned();
            out.view_mut((i * d, j * d), (d, d)).copy_from(&e.apply(&blk));
        }
    }
    out
}

/// E_p on V*·p·M_n(C)·p·V, with the quasi-basis built from fullness witnesses.
#[derive(Debug, Clone)]
pub struct Compression {
    pub e: CondExpectation,
    pub n: usize,
    pub p: CMat,
    pub v: CMat,
    pub amplified_target: MatrixAlgebra,
    pub amplified_source: MatrixAlgebra,
    pub witnesses: Vec<(CMat, CMat)>,
}

impl Compression {
    pub fn expand(&self, x: &CMat) -> CMat {
        &self.v * x * self.v.adjoint()
    }

    pub fn shrink(&self, x: &CMat) -> CMat {
        self.v.adjoint() * x * &self.v
    }

    /// (Ind ⊗ I_n)p, compressed.
    pub fn index_formula(&self, base_index: &CMat) -> CMat {
        self.shrink(&(kron(&eye(self.n), base_index) * &self.p))
    }
}

/// Minimal-norm (a_j, b_j) with Σ a_j p b_j = 1 over the basis of `a`.
pub fn fullness_witnesses(p: &CMat, a: &MatrixAlgebra, tol: f64) -> Result<Vec<(CMat, CMat)>> {
    let basis = a.basis();
    let mut prods = Vec::with_capacity(basis.len() * basis.len());
    for x in &basis {
        let xp = x * p;
        for y in &basis {
            prods.push(&xp * y);
        }
    }
    let m = stack_columns(&prods);
    let target = CMat::from_column_slice(a.d * a.d, 1, vec_of(&eye(a.d)).as_slice());
    let (coef, res) = lstsq(&m, &target, tol);
    if res > 1e-8 {
        return Err(Error::NotFull(format!("no fullness witnesses (residual {res:.3e})")));
    }
    let k = basis.len();
    let mut out = Vec::new();
    for (al, x) in basis.iter().enumerate() {
        let mut b = CMat::zeros(a.d, a.d);
        for (be, y) in basis.iter().enumerate() {
            b += y * coef[(al * k + be, 0)];
        }
        if fnorm(&b) > 1e-12 {
            out.push((x.clone(), b));
        }
    }
    Ok(out)
}

pub fn compress_expectation(e: &CondExpectation, n: usize, p: &CMat) -> Result<Compression> {
    let tol = e.tol;
    let e = e.clone().ensure_quasi_basis()?;
    let an = amplify(&e.target, n);
    let cn = amplify(&e.source, n);
    check_square(an.d, p)?;
    check_projection(p, tol)?;
    if !an.contains(p, tol * 1e3) {
        return Err(Error::NotProjection("p is not in M_n(A)".into()));
    }
    if ideal_span(p, &an, tol)?.dim() != an.dim() {
        return Err(Error::NotFull("p is not full in M_n(A)".into()));
    }
    let v = range_isometry(p, tol)?;
    let ap = compress(&an, &v, tol)?;
    let cp = compress(&cn, &v, tol)?;
    let vs = v.adjoint();
    let cols: Vec<CVec> = exec::map(&cp.basis(), |x| {
        let big = &v * x * &vs;
        ap.coords(&(&vs * amplified_apply(&e, n, &big) * &v))
    });
    let action = if cols.is_empty() { CMat::zeros(ap.dim(), 0) } else { CMat::from_columns(&cols) };
    let witnesses = fullness_witnesses(p, &an, tol)?;
    let idn = eye(n);
    let mut qb = Vec::new();
    for (u, w) in e.quasi_basis.as_ref().unwrap() {
        let uu = kron(&idn, u);
        let ww = kron(&idn, w);
        for (aj, bj) in &witnesses {
            qb.push((&vs * p * &uu * aj * p * &v, &vs * p * bj * &ww * p * &v));
        }
    }
    let mut ep = CondExpectation::from_action(cp, ap, action, tol);
    ep.index = Some(index_of(&qb, ep.source.d));
    ep.quasi_basis = Some(qb);
    Ok(Compression { e: ep, n, p: p.clone(), v, amplified_target: an, amplified_source: cn, witnesses })
}

/// Jones basic construction of E: C → A on L²(C, φ), in φ-orthonormal
/// coordinates ξ(x) = Gφ^{1/2}·coords(x).
#[derive(Debug, Clone)]
pub struct BasicConstruction {
    pub e: CondExpectation,
    pub c1: MatrixAlgebra,
    pub jones: CMat,
    pub lambda_c: MatrixAlgebra,
    pub lambda_a: MatrixAlgebra,
    pub module_dim: usize,
    k_half: CMat,
    k_inv_half: CMat,
}

impl BasicConstruction {
    pub fn lambda(&self, x: &CMat) -> CMat {
        let prods: Vec<CMat> = self.e.source.basis().iter().map(|b| x * b).collect();
        let l = self.e.source.span.coords_many(&prods);
        &self.k_half * l * &self.k_inv_half
    }

    pub fn xi(&self, x: &CMat) -> CVec {
        &self.k_half * self.e.source.coords(x)
    }

    pub fn unxi(&self, v: &CVec) -> CMat {
        self.e.source.elem(&(&self.k_inv_half * v))
    }
}

pub fn basic_construction(e: &CondExpectation, seed: u64) -> Result<BasicConstruction> {
    let mut bc = basic_construction_skeleton(e)?;
    generate_c1(&mut bc, seed)?;
    Ok(bc)
}

/// λ, the Jones projection and λ(C), λ(A) only; `c1` is left as the zero
/// subspace until [`generate_c1`] runs.
pub fn basic_construction_skeleton(e: &CondExpectation) -> Result<BasicConstruction> {
    let e = e.clone().ensure_quasi_basis()?;
    let m = e.source.dim();
    let g = e.gram_phi();
    let k_half = psd_sqrt(&g, 1e-14)?;
    let k_inv_half = psd_inv_sqrt(&g, 1e-14)?;
    let mut bc = BasicConstruction {
        c1: MatrixAlgebra { d: m, span: Subspace::zero(m, m), gens: Vec::new() },
        jones: CMat::zeros(m, m),
        lambda_c: MatrixAlgebra::scalars(m),
        lambda_a: MatrixAlgebra::scalars(m),
        module_dim: m,
        e,
        k_half,
        k_inv_half,
    };
    let e = &bc.e;
    let j = e.source.span.coords_many(&e.target.basis());
    let pe = j * &e.action;
    let jones = &bc.k_half * pe * &bc.k_inv_half;
    let jones = (&jones + jones.adjoint()) * c(0.5);
    let lam_basis: Vec<CMat> = exec::map(&e.source.basis(), |b| bc.lambda(b));
    let tol = e.tol;
    let lambda_c = MatrixAlgebra {
        d: m,
        span: crate::numlin::orthonormalize(&lam_basis, tol)?,
        gens: e.source.gens.iter().map(|g| bc.lambda(g)).collect(),
    };
    let lambda_a = MatrixAlgebra {
        d: m,
        span: crate::numlin::orthonormalize(&e.target.basis().iter().map(|a| bc.lambda(a)).collect::<Vec<_>>(), tol)?,
        gens: e.target.gens.iter().map(|g| bc.lambda(g)).collect(),
    };
    bc.jones = jones;
    bc.lambda_c = lambda_c;
    bc.lambda_a = lambda_a;
    Ok(bc)
}

/// C₁ = span{λ(x) e λ(y)}, grown from random products until two batches in a
/// row add nothing, then spot-checked for closure.
pub fn generate_c1(bc: &mut BasicConstruction, seed: u64) -> Result<()> {
    let m = bc.module_dim;
    let tol = bc.e.tol;
    let jones = bc.jones.clone();
    let lambda_c = &bc.lambda_c;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbc);
    let mut span = Subspace::zero(m, m);
    span.extend_in_place(&[jones.clone()], tol)?;
    let mut quiet = 0;
    let batch = 6;
    let mut rounds = 0;
    // A batch of generic products adding nothing means the span is closed;
    // the closure check below confirms it.
    while quiet < 1 {
        rounds += 1;
        if rounds > m * m + 2 {
            return Err(Error::NonStabilizing(rounds));
        }
        let le: Vec<CMat> = (0..batch).map(|_| lambda_c.random_elem(&mut rng) * &jones).collect();
        let ey: Vec<CMat> = (0..batch).map(|_| &jones * lambda_c.random_elem(&mut rng)).collect();
        let prods: Vec<CMat> = exec::map(&le, |x| ey.iter().map(|y| x * y).collect::<Vec<_>>())
            .into_iter()
            .flatten()
            .collect();
        if span.extend_in_place(&prods, tol)? == 0 {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }
    let mut gens: Vec<CMat> = lambda_c.gens.clone();
    if gens.is_empty() {
        gens = lambda_c.hermitian_basis(tol);
    }
    gens.push(jones.clone());
    let c1 = MatrixAlgebra { d: m, span, gens };
    // Closure: generators and products of random elements stay in the span.
    let x = c1.random_elem(&mut rng);
    let y = c1.random_elem(&mut rng);
    let scale = fnorm(&x) * fnorm(&y);
    let mut worst = c1.span.residual(&(&x * &y)) / scale;
    for g in lambda_c.basis().iter().chain(std::iter::once(&jones)) {
        worst = worst.max(c1.span.residual(g) / fnorm(g).max(1.0));
    }
    if worst > 1e-8 {
        return Err(Error::InconsistentSpan(worst));
    }
    bc.c1 = c1;
    Ok(())
}

/// Jones-relation and commutation violations of a basic construction.
pub fn check_basic_construction(bc: &BasicConstruction) -> Findings {
    let mut f = Findings::new();
    let e = &bc.jones;
    f.record("jones_projection", fnorm(&(e * e - e)).max(fnorm(&(e - e.adjoint()))));
    for x in bc.e.source.basis() {
        let lx = bc.lambda(&x);
        let lhs = e * lx * e;
        let rhs = bc.lambda(&bc.e.apply(&x)) * e;
        f.record("jones_relation", fnorm(&(lhs - rhs)));
    }
    for a in bc.e.target.basis() {
        let la = bc.lambda(&a);
        f.record("jones_commutes_target", fnorm(&(&la * e - e * &la)));
    }
    f
}

fn dual_apply_with(bc: &BasicConstruction, qb: &[(CMat, CMat)], ind_inv: &CMat, t: &CMat) -> CMat {
    let d = bc.e.source.d;
    let mut z = CMat::zeros(d, d);
    for (u, v) in qb {
        z += bc.unxi(&(t * bc.xi(u))) * v;
    }
    ind_inv * z
}

/// The element c ∈ C with E^C(t) = λ(c), evaluated without C₁.
pub fn dual_apply(bc: &BasicConstruction, t: &CMat) -> Result<CMat> {
    let qb = bc.e.quasi_basis.as_ref().ok_or_else(|| Error::NearSingular("no quasi-basis".into()))?;
    let ind_inv = bc.e.index_inverse()?;
    Ok(dual_apply_with(bc, qb, &ind_inv, t))
}

/// E^C: C₁ → λ(C) with E^C(λ(x) e λ(y)) = λ(Ind⁻¹ x y); quasi-basis
/// {(λ(u_i) e λ(Ind^{1/2}), λ(Ind^{1/2}) e λ(v_i))}.
pub fn dual_expectation(bc: &BasicConstruction, seed: u64) -> Result<CondExpectation> {
    let e = &bc.e;
    let tol = e.tol;
    let qb = e.quasi_basis.as_ref().expect("basic construction attaches a quasi-basis");
    let ind = e.index.clone().expect("index attached");
    let ind_inv = e.index_inverse()?;
    let apply_dual = |t: &CMat| dual_apply_with(bc, qb, &ind_inv, t);
    let to_lc = bc.lambda_c.span.coords_many(&e.source.basis().iter().map(|b| bc.lambda(b)).collect::<Vec<_>>());
    let cols: Vec<CVec> = exec::map(&bc.c1.basis(), |t| &to_lc * e.source.coords(&apply_dual(t)));
    let action = CMat::from_columns(&cols);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd0a1);
    let mut worst: f64 = 0.0;
    for _ in 0..8 {
        let x = e.source.random_elem(&mut rng);
        let y = e.source.random_elem(&mut rng);
        let t = bc.lambda(&x) * &bc.jones * bc.lambda(&y);
        let got = bc.lambda_c.elem(&(&action * bc.c1.coords(&t)));
        let want = bc.lambda(&(&ind_inv * &x * &y));
        worst = worst.max(fnorm(&(got - &want)) / fnorm(&want).max(1e-300));
    }
    if worst > 1e-8 {
        return Err(Error::InconsistentSpan(worst));
    }
    let lc_inv = to_lc.clone().try_inverse().ok_or_else(|| Error::NearSingular("λ is not injective".into()))?;
    let target_state = lc_inv.adjoint() * &e.state;
    let mut dual = CondExpectation::from_action(bc.c1.clone(), bc.lambda_c.clone(), action, tol)
        .with_target_state(&target_state);
    let s = psd_sqrt(&((&ind + ind.adjoint()) * c(0.5)), 1e-14)?;
    let ls = bc.lambda(&s);
    let pairs: Vec<(CMat, CMat)> = qb
        .iter()
        .map(|(u, v)| (bc.lambda(u) * &bc.jones * &ls, &ls * &bc.jones * bc.lambda(v)))
        .collect();
    dual.index = Some(index_of(&pairs, bc.module_dim));
    dual.quasi_basis = Some(pairs);
    Ok(dual)
}

/// P = {p}'∩A and E^P(a) = Ind·E(pap).
#[derive(Debug, Clone)]
pub struct Downward {
    pub p_alg: MatrixAlgebra,
    pub ep: CondExpectation,
    pub findings: Findings,
    /// Block sizes of C and of the rebuilt basic construction of P ⊂ A.
    pub blocks_original: Vec<crate::fdalg::Block>,
    pub blocks_rebuilt: Vec<crate::fdalg::Block>,
    pub inclusion_original: crate::fdalg::InclusionMatrix,
    pub inclusion_rebuilt: crate::fdalg::InclusionMatrix,
}

pub fn check_downward_projection(e: &CondExpectation, p: &CMat) -> Result<CMat> {
    let tol = e.tol;
    check_square(e.source.d, p)?;
    check_projection(p, tol).map_err(|_| Error::BadProjection("p is not a projection".into()))?;
    if !e.source.contains(p, tol * 1e3) {
        return Err(Error::BadProjection("p is not in C".into()));
    }
    let ind = e.index.as_ref().ok_or_else(|| Error::NearSingular("no index".into()))?;
    if !e.target.contains(ind, tol * 1e3) {
        return Err(Error::IndexNotInSubalgebra);
    }
    let ind_inv = e.index_inverse()?;
    let dev = fnorm(&(e.apply(p) - &ind_inv));
    if dev > 1e-8 * fnorm(&ind_inv).max(1.0) {
        return Err(Error::BadProjection(format!("E(p) differs from Ind⁻¹ by {dev:.3e}")));
    }
    if ideal_span(p, &e.source, tol)?.dim() != e.source.dim() {
        return Err(Error::NotFull("p is not full in C".into()));
    }
    Ok(ind.clone())
}

pub fn downward_data(e: &CondExpectation, p: &CMat, seed: u64) -> Result<Downward> {
    let e = e.clone().ensure_quasi_basis()?;
    let ind = check_downward_projection(&e, p)?;
    let tol = e.tol;
    let a = &e.target;
    let mut p_alg = commuting_part_general(&[p.clone()], a, tol);
    let pg = p_alg.hermitian_basis(tol);
    if pg.len() <= 4 {
        p_alg.gens = pg;
    }
    let ep_of = |x: &CMat| &ind * e.apply(&(p * x * p));
    let cols: Vec<CVec> = a.basis().iter().map(|x| p_alg.coords(&ep_of(x))).collect();
    let action = CMat::from_columns(&cols);
    let ep = CondExpectation::from_action(a.clone(), p_alg.clone(), action, tol);
    let mut findings = Findings::new();
    for x in a.basis() {
        let epx = ep_of(&x);
        findings.record("downward_range", p_alg.span.residual(&epx));
        findings.record("downward_compression", fnorm(&(p * &x * p - &epx * p)));
    }
    for y in p_alg.basis() {
        findings.record("downward_commutes", fnorm(&(p * &y - &y * p)));
    }
    let ep = ep.with_quasi_basis(0)?;
    findings.merge("downward_expectation.", &verify_expectation(&ep, 4, seed));
    let bc = basic_construction(&ep, seed)?;
    let s_c = block_structure(&e.source, tol, seed)?;
    let s_a = block_structure(a, tol, seed.wrapping_add(1))?;
    let s_c1 = block_structure(&bc.c1, tol, seed.wrapping_add(2))?;
    let s_la = block_structure(&bc.lambda_c, tol, seed.wrapping_add(3))?;
    Ok(Downward {
        p_alg,
        ep,
        findings,
        inclusion_original: inclusion_matrix_from(&s_a, &s_c)?,
        inclusion_rebuilt: inclusion_matrix_from(&s_la, &s_c1)?,
        blocks_original: s_c.blocks,
        blocks_rebuilt: s_c1.blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdalg::generate_algebra;
    use crate::numlin::{unit, DEFAULT_TOL as T};

    fn d2() -> MatrixAlgebra {
        generate_algebra(2, &[unit(2, 2, 0, 0)], T).unwrap()
    }

    #[test]
    fn trace_onto_scalars() {
        let e = trace_expectation(&MatrixAlgebra::full(2), &MatrixAlgebra::scalars(2), T).unwrap();
        let x = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(5.0)]);
        assert!(fnorm(&(e.apply(&x) - eye(2) * c(3.0))) < 1e-14);
        assert!(verify_expectation(&e, 5, 1).passes(1e-12));
    }

    #[test]
    fn pinching() {
        let e = trace_expectation(&MatrixAlgebra::full(2), &d2(), T).unwrap();
        let x = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(5.0)]);
        let want = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(5.0)]);
        assert!(fnorm(&(e.apply(&x) - want)) < 1e-14);
    }

    #[test]
    fn identity_expectation_is_exact() {
        let m2 = MatrixAlgebra::full(2);
        let e = trace_expectation(&m2, &m2, T).unwrap().with_quasi_basis(0).unwrap();
        let f = verify_expectation(&e, 5, 2);
        assert!(f.get("bimodule").unwrap() < 1e-14);
        assert!(fnorm(&(e.index.unwrap() - eye(2))) < 1e-12);
    }

    #[test]
    fn transpose_is_not_an_expectation() {
        let m2 = MatrixAlgebra::full(2);
        let mut t = CMat::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                t[(j * 2 + i, i * 2 + j)] = c(1.0);
            }
        }
        let e = CondExpectation::from_action(m2.clone(), m2.clone(), m2.span.basis.adjoint() * t * &m2.span.basis, T);
        assert!(verify_expectation(&e, 4, 0).get("bimodule").unwrap() > 0.1);
        assert!(matches!(from_ambient_matrix(&m2, &m2, &{
            let mut t = CMat::zeros(4, 4);
            for i in 0..2 { for j in 0..2 { t[(j * 2 + i, i * 2 + j)] = c(1.0); } }
            t
        }, T), Err(Error::AxiomViolation(_))));
    }

    #[test]
    fn indices_match_hand_values() {
        let m2 = MatrixAlgebra::full(2);
        let e = trace_expectation(&m2, &MatrixAlgebra::scalars(2), T).unwrap();
        let qb = e.frame_quasi_basis(0).unwrap();
        assert_eq!(qb.len(), 4);
        // Oracle: Σ u E(u* x) evaluated on the matrix units directly.
        let units: Vec<CMat> = (0..4).map(|k| unit(2, 2, k / 2, k % 2)).collect();
        let (l, r) = quasi_basis_violation(&e, &qb, &units);
        assert!(l < 1e-12 && r < 1e-12);
        let (ind, diff) = watatani_index(&e, 7).unwrap();
        assert!(fnorm(&(ind - eye(2) * c(4.0))) < 1e-10 && diff < 1e-10);
        let e2 = trace_expectation(&m2, &d2(), T).unwrap();
        let (ind2, _) = watatani_index(&e2, 7).unwrap();
        assert!(fnorm(&(ind2 - eye(2) * c(2.0))) < 1e-10);
        // The hand pairs {(e11,e11),(e12,e21),(e21,e12),(e22,e22)} also work.
        let hand = vec![
            (unit(2, 2, 0, 0), unit(2, 2, 0, 0)),
            (unit(2, 2, 0, 1), unit(2, 2, 1, 0)),
            (unit(2, 2, 1, 0), unit(2, 2, 0, 1)),
            (unit(2, 2, 1, 1), unit(2, 2, 1, 1)),
        ];
        let (l, r) = quasi_basis_violation(&e2, &hand, &units);
        assert!(l < 1e-14 && r < 1e-14);
    }

    #[test]
    fn compression_index() {
        let e = trace_expectation(&MatrixAlgebra::full(2), &MatrixAlgebra::scalars(2), T).unwrap();
        let p = kron(&unit(2, 2, 0, 0), &eye(2));
        let comp = compress_expectation(&e, 2, &p).unwrap();
        let ind = comp.e.index.clone().unwrap();
        assert!(fnorm(&(&ind - eye(2) * c(4.0))) < 1e-10);
        let fresh = comp.e.clone().with_quasi_basis(3).unwrap().index.unwrap();
        assert!(fnorm(&(fresh - &ind)) < 1e-8);
        assert!(verify_expectation(&comp.e, 4, 1).passes(1e-9));
    }

    #[test]
    fn basic_construction_scalars_in_m2() {
        let e = trace_expectation(&MatrixAlgebra::full(2), &MatrixAlgebra::scalars(2), T).unwrap();
        let bc = basic_construction(&e, 1).unwrap();
        assert_eq!(bc.c1.dim(), 16);
        assert!(check_basic_construction(&bc).passes(1e-10));
        let dual = dual_expectation(&bc, 1).unwrap();
        assert!(verify_expectation(&dual, 4, 3).passes(1e-9));
        // E^C(e) = Ind⁻¹ = 1/4.
        assert!(fnorm(&(dual.apply(&bc.jones) - eye(4) * c(0.25))) < 1e-10);
        let ind = dual.index.clone().unwrap();
        assert!(fnorm(&(ind - eye(4) * c(4.0))) < 1e-9);
    }

    #[test]
    fn basic_construction_pinching_and_trivial() {
        let e = trace_expectation(&MatrixAlgebra::full(2), &d2(), T).unwrap();
        let bc = basic_construction(&e, 1).unwrap();
        assert_eq!(bc.c1.dim(), 8);
        let m2 = MatrixAlgebra::full(2);
        let id = trace_expectation(&m2, &m2, T).unwrap();
        let bc = basic_construction(&id, 1).unwrap();
        assert!(fnorm(&(&bc.jones - eye(4))) < 1e-12);
        assert_eq!(bc.c1.dim(), 4);
    }

    #[test]
    fn downward_recovers_scalars() {
        let e = trace_expectation(&MatrixAlgebra::full(2), &MatrixAlgebra::scalars(2), T).unwrap();
        let bc = basic_construction(&e, 1).unwrap();
        let dual = dual_expectation(&bc, 1).unwrap();
        let dw = downward_data(&dual, &bc.jones, 2).unwrap();
        assert_eq!(dw.p_alg.dim(), 1);
        assert!(dw.findings.passes(1e-9), "{:?}", dw.findings);
        assert_eq!(dw.blocks_original, dw.blocks_rebuilt);
        assert_eq!(dw.inclusion_original, dw.inclusion_rebuilt);
    }

    #[test]
    fn downward_rejects_bad_projection() {
        let e = trace_expectation(&MatrixAlgebra::full(2), &MatrixAlgebra::scalars(2), T).unwrap()
            .with_quasi_basis(0).unwrap();
        let r = downward_data(&e, &unit(2, 2, 0, 0), 0);
        assert!(matches!(r, Err(Error::BadProjection(_))));
    }
}
