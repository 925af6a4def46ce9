//! Finite-dimensional C*-algebras as unital *-subalgebras of M_d.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::numlin::{c, eye, fnorm, kron, null_space_vectors, trace, unit, CMat, Subspace, C64};

/// A unital *-subalgebra of M_d. `gens` is an optional small generating set,
/// used to keep commutant computations cheap.
#[derive(Debug, Clone)]
pub struct MatrixAlgebra {
    pub d: usize,
    pub span: Subspace,
    pub gens: Vec<CMat>,
}

impl MatrixAlgebra {
    pub fn full(d: usize) -> Self {
        let gens = (0..d.saturating_sub(1)).map(|i| unit(d, d, i, i + 1)).collect();
        MatrixAlgebra { d, span: Subspace::full(d, d), gens }
    }

    pub fn scalars(d: usize) -> Self {
        let mut span = Subspace::zero(d, d);
        span.extend_in_place(&[eye(d)], 1e-12).expect("shape");
        MatrixAlgebra { d, span, gens: vec![] }
    }

    pub fn diagonal(d: usize) -> Self {
        let units: Vec<CMat> = (0..d).map(|i| unit(d, d, i, i)).collect();
        let mut span = Subspace::zero(d, d);
        span.extend_in_place(&units, 1e-12).expect("shape");
        let gen = CMat::from_fn(d, d, |i, j| if i == j { c(i as f64) } else { c(0.0) });
        MatrixAlgebra { d, span, gens: vec![gen] }
    }

    pub fn dim(&self) -> usize {
        self.span.dim()
    }

    pub fn basis(&self) -> Vec<CMat> {
        self.span.elems()
    }

    pub fn contains(&self, x: &CMat, tol: f64) -> bool {
        x.nrows() == self.d && x.ncols() == self.d && self.span.contains(x, tol)
    }

    pub fn coords(&self, x: &CMat) -> crate::numlin::CVec {
        self.span.coords(x)
    }

    pub fn elem(&self, x: &crate::numlin::CVec) -> CMat {
        self.span.from_coords(x)
    }

    /// Seeded random element with Gaussian coordinates.
    pub fn random_elem<R: Rng>(&self, rng: &mut R) -> CMat {
        let x = crate::numlin::CVec::from_fn(self.dim(), |_, _| {
            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
        });
        self.elem(&x)
    }

    pub fn random_hermitian<R: Rng>(&self, rng: &mut R) -> CMat {
        let x = self.random_elem(rng);
        (&x + x.adjoint()) * c(0.5)
    }

    /// Hermitian spanning set (b + b*, i(b − b*)), orthonormalized.
    pub fn hermitian_basis(&self, tol: f64) -> Vec<CMat> {
        let mut herm = Vec::with_capacity(2 * self.dim());
        for b in self.basis() {
            herm.push(&b + b.adjoint());
            herm.push((&b - b.adjoint()) * C64::new(0.0, 1.0));
        }
        let s = crate::numlin::orthonormalize(&herm, tol).expect("shape");
        s.elems().into_iter().map(|h| (&h + h.adjoint()) * c(0.5)).collect()
    }

    /// Constraint set whose commutant equals the commutant of the algebra.
    fn commutation_witnesses(&self, seed: u64, extra: usize) -> Vec<CMat> {
        if self.dim() <= 8 {
            return self.basis();
        }
        if !self.gens.is_empty() && self.gens.len() <= 4 && extra == 0 {
            return star_closed(&self.gens);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de);
        (0..2 + extra).map(|_| self.random_hermitian(&mut rng)).collect()
    }

    /// Elements known to generate the algebra, for verification.
    fn generating_checks(&self) -> Vec<CMat> {
        if !self.gens.is_empty() && self.gens.len() <= 8 {
            star_closed(&self.gens)
        } else {
            self.basis()
        }
    }

    pub fn is_subalgebra_of(&self, other: &MatrixAlgebra, tol: f64) -> bool {
        if self.d != other.d {
            return false;
        }
        if self.dim() == 0 {
            return true;
        }
        // Orthonormal basis elements have unit norm, so one batched projection suffices.
        let b = &self.span.basis;
        let r = b - &other.span.basis * other.span.basis.ad_mul(b);
        r.column_iter().all(|col| col.norm() <= tol)
    }

    /// Image under a *-homomorphism given on elements; generators follow along.
    pub fn map_through(&self, d: usize, f: impl Fn(&CMat) -> CMat, tol: f64) -> Result<MatrixAlgebra> {
        let imgs: Vec<CMat> = self.basis().iter().map(&f).collect();
        let mut span = Subspace::zero(d, d);
        span.extend_in_place(&imgs, tol)?;
        let gens = self.gens.iter().map(&f).collect();
        Ok(MatrixAlgebra { d, span, gens })
    }
}

fn star_closed(gens: &[CMat]) -> Vec<CMat> {
    let mut out = Vec::with_capacity(2 * gens.len());
    for g in gens {
        out.push(g.clone());
        if fnorm(&(g - g.adjoint())) > 1e-12 * fnorm(g).max(1.0) {
            out.push(g.adjoint());
        }
    }
    out
}

pub fn check_square(d: usize, m: &CMat) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::InputShape(format!("expected {d}x{d}, got {}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

/// Smallest *-subalgebra of M_d containing the generators and the identity.
pub fn generate_algebra(d: usize, generators: &[CMat], tol: f64) -> Result<MatrixAlgebra> {
    for g in generators {
        check_square(d, g)?;
    }
    let mut words: Vec<CMat> = Vec::new();
    for g in generators {
        words.push(g.clone());
        words.push(g.adjoint());
    }
    let mut span = Subspace::zero(d, d);
    span.extend_in_place(&[eye(d)], tol)?;
    span.extend_in_place(&words, tol)?;
    let mut frontier = span.dim();
    let mut rounds = 0;
    loop {
        rounds += 1;
        if rounds > d * d + 1 {
            return Err(Error::NonStabilizing(d * d));
        }
        let basis = span.elems();
        let start = basis.len() - frontier;
        let fresh = &basis[start..];
        let prods: Vec<CMat> = exec::map(fresh, |b| words.iter().map(|w| b * w).collect::<Vec<_>>())
            .into_iter()
            .flatten()
            .collect();
        let added = span.extend_in_place(&prods, tol)?;
        if added == 0 {
            break;
        }
        frontier = added;
    }
    let gens = generators.iter().map(|g| (g + g.adjoint()) * c(0.5))
        .chain(generators.iter().map(|g| (g - g.adjoint()) * C64::new(0.0, -0.5)))
        .filter(|h| fnorm(h) > tol)
        .collect();
    Ok(MatrixAlgebra { d, span, gens })
}

/// {x ∈ ambient : xs = sx for s ∈ S}.
pub fn commutant(s: &MatrixAlgebra, ambient: &MatrixAlgebra, tol: f64) -> Result<MatrixAlgebra> {
    commutant_seeded(s, ambient, tol, 0)
}

pub fn commutant_seeded(s: &MatrixAlgebra, ambient: &MatrixAlgebra, tol: f64, seed: u64) -> Result<MatrixAlgebra> {
    if !s.is_subalgebra_of(ambient, tol.max(1e-9) * 10.0) {
        return Err(Error::NotSubalgebra("commutant: S is not contained in the ambient algebra".into()));
    }
    let checks = s.generating_checks();
    for attempt in 0..3 {
        let witnesses = s.commutation_witnesses(seed.wrapping_add(attempt as u64), attempt);
        let result = commuting_part(&witnesses, ambient, tol);
        let ok = result.basis().iter().all(|x| {
            checks.iter().all(|g| fnorm(&(x * g - g * x)) <= 1e3 * tol * fnorm(g).max(1.0))
        });
        if ok {
            return Ok(result);
        }
    }
    Err(Error::NotSubalgebra("commutant: random witnesses failed to generate S".into()))
}

/// {x ∈ ambient : xt = tx for t in the set}. Each commutator of an ambient
/// basis element with t must lie in the ambient algebra, which holds when the
/// set is inside it; otherwise pass the set through [`commuting_part_general`].
pub fn commuting_part(set: &[CMat], ambient: &MatrixAlgebra, tol: f64) -> MatrixAlgebra {
    let set: Vec<CMat> = set.iter().filter(|t| !is_scalar(t, tol)).cloned().collect();
    if set.is_empty() {
        return ambient.clone();
    }
    let set = &set[..];
    let amb_basis = ambient.basis();
    let k = amb_basis.len();
    let blocks: Vec<CMat> = exec::map(set, |t| {
        let comms: Vec<CMat> = amb_basis.iter().map(|b| t * b - b * t).collect();
        ambient.span.coords_many(&comms)
    });
    solve_commuting(&negligible_dropped(blocks, set, tol), ambient, k, tol)
}

/// Same as [`commuting_part`] for sets not contained in the ambient algebra.
pub fn commuting_part_general(set: &[CMat], ambient: &MatrixAlgebra, tol: f64) -> MatrixAlgebra {
    let amb_basis = ambient.basis();
    let k = amb_basis.len();
    let blocks: Vec<CMat> = exec::map(set, |t| {
        let comms: Vec<CMat> = amb_basis.iter().map(|b| t * b - b * t).collect();
        crate::numlin::stack_columns(&comms)
    });
    solve_commuting(&negligible_dropped(blocks, set, tol), ambient, k, tol)
}

fn is_scalar(t: &CMat, tol: f64) -> bool {
    let d = t.nrows();
    let s = crate::numlin::trace(t) / c(d as f64);
    fnorm(&(t - eye(d) * s)) <= tol * fnorm(t)
}

/// Commutator blocks that are rounding noise relative to their element would
/// otherwise dominate a relative rank cut.
fn negligible_dropped(blocks: Vec<CMat>, set: &[CMat], tol: f64) -> Vec<CMat> {
    blocks
        .into_iter()
        .zip(set)
        .filter(|(b, t)| fnorm(b) > tol * fnorm(t))
        .map(|(b, _)| b)
        .collect()
}

fn solve_commuting(blocks: &[CMat], ambient: &MatrixAlgebra, k: usize, tol: f64) -> MatrixAlgebra {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut stacked = CMat::zeros(rows, k);
    let mut at = 0;
    for b in blocks {
        stacked.rows_mut(at, b.nrows()).copy_from(b);
        at += b.nrows();
    }
    let null = if k == 0 {
        CMat::zeros(0, 0)
    } else if rows == 0 || fnorm(&stacked) == 0.0 {
        eye(k)
    } else {
        null_space_vectors(&stacked, tol)
    };
    let basis = &ambient.span.basis * &null;
    let span = Subspace { rows: ambient.d, cols: ambient.d, basis };
    MatrixAlgebra { d: ambient.d, span, gens: vec![] }
}

pub fn center(a: &MatrixAlgebra, tol: f64) -> Result<MatrixAlgebra> {
    let checks = a.generating_checks();
    for attempt in 0..3 {
        let result = commuting_part(&a.commutation_witnesses(attempt as u64, attempt), a, tol);
        let ok = result.basis().iter().all(|x| {
            checks.iter().all(|g| fnorm(&(x * g - g * x)) <= 1e3 * tol * fnorm(g).max(1.0))
        });
        if ok {
            return Ok(result);
        }
    }
    Err(Error::NotSubalgebra("center: random witnesses failed to generate A".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, PartialOrd, Ord)]
pub struct Block {
    /// Size of the simple summand M_k.
    pub k: usize,
    /// Multiplicity of the summand in the ambient M_d.
    pub m: usize,
}

#[derive(Debug, Clone)]
pub struct BlockStructure {
    pub blocks: Vec<Block>,
    pub projections: Vec<CMat>,
}

impl BlockStructure {
    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.k).collect()
    }

    pub fn algebra_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.k * b.k).sum()
    }
}

pub fn round_integer(x: f64, what: &str) -> Result<usize> {
    let r = x.round();
    if (x - r).abs() > 1e-6 || r < 0.0 {
        return Err(Error::AxiomViolation(format!("{what} = {x} is not an integer")));
    }
    Ok(r as usize)
}

const BLOCK_RETRIES: usize = 5;

/// Minimal central projections and block sizes.
pub fn block_structure(a: &MatrixAlgebra, tol: f64, seed: u64) -> Result<BlockStructure> {
    let z = center(a, tol)?;
    let herm = z.hermitian_basis(tol);
    let nz = z.dim();
    let d = a.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut projections = None;
    for _ in 0..BLOCK_RETRIES {
        let h = crate::numlin::random_combination(&mut rng, &herm).unwrap_or_else(|| eye(d));
        let eig = nalgebra::SymmetricEigen::new((&h + h.adjoint()) * c(0.5));
        let mut idx: Vec<usize> = (0..d).collect();
        idx.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
        let spread = eig.eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max).max(1e-300);
        let gap_tol = 1e-6 * spread;
        let mut clusters: Vec<Vec<usize>> = vec![];
        let mut min_gap = f64::INFINITY;
        let mut last = f64::NEG_INFINITY;
        for &i in &idx {
            let l = eig.eigenvalues[i];
            if clusters.is_empty() || l - last > gap_tol {
                if !clusters.is_empty() {
                    min_gap = min_gap.min(l - last);
                }
                clusters.push(vec![i]);
            } else {
                clusters.last_mut().unwrap().push(i);
            }
            last = l;
        }
        if clusters.len() != nz || min_gap < 1e-4 * spread {
            continue;
        }
        let ps: Vec<CMat> = clusters
            .iter()
            .map(|cl| {
                let mut p = CMat::zeros(d, d);
                for &i in cl {
                    let v = eig.eigenvectors.column(i);
                    p += &v * v.adjoint();
                }
                p
            })
            .collect();
        projections = Some(ps);
        break;
    }
    let ps = projections.ok_or(Error::DegenerateSpectrum(BLOCK_RETRIES))?;
    let mut gram = CMat::zeros(d, d);
    for b in a.basis() {
        gram += b.adjoint() * b;
    }
    let mut entries: Vec<(Block, f64, Vec<f64>, CMat)> = Vec::new();
    for p in ps {
        // dim(Ap) = Σ_b tr(b*b p) over an orthonormal basis.
        let dim_ap: f64 = gram.iter().zip(p.transpose().iter()).map(|(g, q)| (g * q).re).sum();
        let kk = round_integer(dim_ap.max(0.0).sqrt(), "block size")?;
        if kk == 0 {
            return Err(Error::AxiomViolation("empty block".into()));
        }
        let tr = trace(&p).re;
        let m = round_integer(tr / kk as f64, "block multiplicity")?;
        let key: Vec<f64> = p.iter().flat_map(|z| [round6(z.re), round6(z.im)]).collect();
        entries.push((Block { k: kk, m }, round6(tr), key, p));
    }
    entries.sort_by(|x, y| {
        x.0.k
            .cmp(&y.0.k)
            .then(x.1.partial_cmp(&y.1).unwrap())
            .then_with(|| {
                // The transpose vector so that traces against e_ij are compared.
                y.2.partial_cmp(&x.2).unwrap()
            })
    });
    Ok(BlockStructure {
        blocks: entries.iter().map(|e| e.0).collect(),
        projections: entries.into_iter().map(|e| e.3).collect(),
    })
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub type InclusionMatrix = Vec<Vec<usize>>;

/// Multiplicity of each block of `a` inside each block of `b`.
pub fn inclusion_matrix_from(sa: &BlockStructure, sb: &BlockStructure) -> Result<InclusionMatrix> {
    let mut out = vec![vec![0; sb.blocks.len()]; sa.blocks.len()];
    for (i, (pa, ba)) in sa.projections.iter().zip(&sa.blocks).enumerate() {
        for (j, (qb, bb)) in sb.projections.iter().zip(&sb.blocks).enumerate() {
            let t = trace(&(pa * qb)).re;
            out[i][j] = round_integer(t / (ba.k * bb.m) as f64, "inclusion multiplicity")?;
        }
    }
    Ok(out)
}

pub fn inclusion_matrix(a: &MatrixAlgebra, b: &MatrixAlgebra, tol: f64, seed: u64) -> Result<InclusionMatrix> {
    if !a.is_subalgebra_of(b, tol * 10.0) {
        return Err(Error::NotSubalgebra("inclusion_matrix: A is not contained in B".into()));
    }
    let sa = block_structure(a, tol, seed)?;
    let sb = block_structure(b, tol, seed.wrapping_add(1))?;
    inclusion_matrix_from(&sa, &sb)
}

pub fn check_projection(p: &CMat, tol: f64) -> Result<()> {
    let s = fnorm(p).max(1.0);
    if fnorm(&(p - p.adjoint())) > tol * s * 1e2 || fnorm(&(p * p - p)) > tol * s * 1e2 {
        return Err(Error::NotProjection("p is not a self-adjoint idempotent".into()));
    }
    Ok(())
}

/// True iff span{a·p·b} = A.
pub fn is_full_projection(p: &CMat, a: &MatrixAlgebra, tol: f64) -> Result<bool> {
    check_square(a.d, p)?;
    check_projection(p, tol)?;
    if !a.contains(p, tol * 1e2) {
        return Err(Error::NotProjection("p is not in the algebra".into()));
    }
    Ok(ideal_span(p, a, tol)?.dim() == a.dim())
}

/// span{a·p·b : a, b ∈ A}.
pub fn ideal_span(p: &CMat, a: &MatrixAlgebra, tol: f64) -> Result<Subspace> {
    let basis = a.basis();
    let right = crate::numlin::orthonormalize(&basis.iter().map(|b| p * b).collect::<Vec<_>>(), tol)?;
    let right = right.elems();
    let mut span = Subspace::zero(a.d, a.d);
    for x in &basis {
        let prods: Vec<CMat> = right.iter().map(|r| x * r).collect();
        span.extend_in_place(&prods, tol)?;
        if span.dim() == a.dim() {
            break;
        }
    }
    Ok(span)
}

/// M_n(A) inside M_{n·d}, with the outer matrix index first.
pub fn amplify(a: &MatrixAlgebra, n: usize) -> MatrixAlgebra {
    if n == 1 {
        return a.clone();
    }
    let basis = a.basis();
    let mut cols = Vec::with_capacity(n * n * basis.len());
    for i in 0..n {
        for j in 0..n {
            let f = unit(n, n, i, j);
            for b in &basis {
                cols.push(kron(&f, b));
            }
        }
    }
    let basis = crate::numlin::stack_columns(&cols);
    let d = n * a.d;
    let mut gens: Vec<CMat> = a.gens.iter().map(|g| kron(&eye(n), g)).collect();
    for i in 0..n - 1 {
        let f = unit(n, n, i, i + 1);
        gens.push(kron(&(&f + f.adjoint()), &eye(a.d)));
        gens.push(kron(&((&f - f.adjoint()) * C64::new(0.0, 1.0)), &eye(a.d)));
    }
    if a.gens.is_empty() && a.dim() > 1 {
        gens.extend(a.hermitian_basis(1e-12).iter().map(|h| kron(&eye(n), h)));
    }
    MatrixAlgebra { d, span: Subspace { rows: d, cols: d, basis }, gens }
}

/// Unital algebra V*·S·V for S ⊆ M_d and an isometry V onto range(p), p ∈ S.
pub fn compress(a: &MatrixAlgebra, v: &CMat, tol: f64) -> Result<MatrixAlgebra> {
    let vs = v.adjoint();
    let imgs: Vec<CMat> = a.basis().iter().map(|b| &vs * b * v).collect();
    let r = v.ncols();
    let span = crate::numlin::orthonormalize(&imgs, tol)?;
    let span = if span.dim() == 0 { Subspace::zero(r, r) } else { span };
    let out = MatrixAlgebra { d: r, span, gens: vec![] };
    let gens = out.hermitian_basis(tol);
    let gens = if gens.len() <= 4 { gens } else { vec![] };
    Ok(MatrixAlgebra { gens, ..out })
}

/// Isometry whose range is the range of the projection p.
pub fn range_isometry(p: &CMat, tol: f64) -> Result<CMat> {
    check_projection(p, tol)?;
    let eig = nalgebra::SymmetricEigen::new((p + p.adjoint()) * c(0.5));
    let cols: Vec<_> = (0..p.nrows())
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        return Err(Error::NotProjection("zero projection".into()));
    }
    let mut v = CMat::from_columns(&cols);
    // Fix the phase of each column so the result does not depend on the eigensolver.
    for mut col in v.column_iter_mut() {
        if let Some(z) = col.iter().find(|z| z.norm() > 1e-8).copied() {
            col *= z.conj() / c(z.norm());
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numlin::DEFAULT_TOL as T;

    fn diag2() -> MatrixAlgebra {
        generate_algebra(2, &[CMat::from_diagonal(&crate::numlin::CVec::from_vec(vec![c(1.0), c(-1.0)]))], T).unwrap()
    }

    #[test]
    fn generate_examples() {
        assert_eq!(generate_algebra(2, &[], T).unwrap().dim(), 1);
        assert_eq!(generate_algebra(2, &[unit(2, 2, 0, 1)], T).unwrap().dim(), 4);
        assert_eq!(diag2().dim(), 2);
    }

    #[test]
    fn commutant_examples() {
        let m2 = MatrixAlgebra::full(2);
        assert_eq!(commutant(&m2, &m2, T).unwrap().dim(), 1);
        assert_eq!(commutant(&MatrixAlgebra::scalars(2), &m2, T).unwrap().dim(), 4);
        let dc = commutant(&diag2(), &m2, T).unwrap();
        assert_eq!(dc.dim(), 2);
        assert!(dc.basis().iter().all(|x| x[(0, 1)].norm() < 1e-12 && x[(1, 0)].norm() < 1e-12));
        assert!(matches!(commutant(&m2, &diag2(), T), Err(Error::NotSubalgebra(_))));
    }

    #[test]
    fn block_examples() {
        let b = block_structure(&MatrixAlgebra::full(2), T, 1).unwrap();
        assert_eq!(b.blocks, vec![Block { k: 2, m: 1 }]);
        let b = block_structure(&diag2(), T, 1).unwrap();
        assert_eq!(b.blocks, vec![Block { k: 1, m: 1 }, Block { k: 1, m: 1 }]);
        let b = block_structure(&MatrixAlgebra::scalars(4), T, 1).unwrap();
        assert_eq!(b.blocks, vec![Block { k: 1, m: 4 }]);
    }

    #[test]
    fn inclusion_examples() {
        let m2 = MatrixAlgebra::full(2);
        assert_eq!(inclusion_matrix(&m2, &m2, T, 3).unwrap(), vec![vec![1]]);
        assert_eq!(inclusion_matrix(&MatrixAlgebra::scalars(2), &m2, T, 3).unwrap(), vec![vec![2]]);
        assert_eq!(inclusion_matrix(&diag2(), &m2, T, 3).unwrap(), vec![vec![1], vec![1]]);
    }

    #[test]
    fn fullness_examples() {
        let m2 = MatrixAlgebra::full(2);
        assert!(is_full_projection(&eye(2), &diag2(), T).unwrap());
        assert!(is_full_projection(&unit(2, 2, 0, 0), &m2, T).unwrap());
        assert!(!is_full_projection(&unit(2, 2, 0, 0), &diag2(), T).unwrap());
        let not_proj = unit(2, 2, 0, 1);
        assert!(matches!(is_full_projection(&not_proj, &m2, T), Err(Error::NotProjection(_))));
    }

    #[test]
    fn amplify_examples() {
        let s = MatrixAlgebra::scalars(2);
        assert_eq!(amplify(&s, 1).dim(), 1);
        let a = amplify(&s, 2);
        assert_eq!((a.dim(), a.d), (4, 4));
        assert_eq!(amplify(&MatrixAlgebra::full(2), 2).dim(), 16);
        let z = center(&a, T).unwrap();
        assert_eq!(z.dim(), 1);
    }
}
