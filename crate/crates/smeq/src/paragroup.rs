//! Jones towers, relative commutants A′ ∩ Cₙ and their Bratteli data.

use serde::Serialize;

use crate::condexp::{basic_construction, dual_expectation, BasicConstruction, CondExpectation};
use crate::error::{Error, Result};
use crate::fdalg::{
    amplify, block_structure, commutant, compress, inclusion_matrix_from, is_full_projection, range_isometry, Block,
    BlockStructure, InclusionMatrix, MatrixAlgebra,
};
use crate::numlin::{eye, fnorm, rank, stack_columns, CMat};
use crate::report::Findings;

pub const DEFAULT_DEPTH: usize = 3;
/// Largest d² of a level's ambient matrix space.
pub const DEFAULT_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub struct TowerData {
    /// C₀ ⊂ C₁ ⊂ … each in its own ambient M_{dim C_{n−1}}.
    pub levels: Vec<MatrixAlgebra>,
    /// E₀ = E, then the dual expectation Cₙ → λ(C_{n−1}).
    pub expectations: Vec<CondExpectation>,
    /// Jones projection of level n at index n−1.
    pub jones: Vec<CMat>,
    /// The construction producing level n at index n−1; its λ embeds C_{n−1}.
    pub steps: Vec<BasicConstruction>,
}

impl TowerData {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    /// Image of x ∈ C_from in C_to.
    pub fn embed(&self, x: &CMat, from: usize, to: usize) -> CMat {
        let mut y = x.clone();
        for bc in &self.steps[from..to] {
            y = bc.lambda(&y);
        }
        y
    }

    pub fn embed_algebra(&self, a: &MatrixAlgebra, from: usize, to: usize, tol: f64) -> Result<MatrixAlgebra> {
        if from == to {
            return Ok(a.clone());
        }
        a.map_through(self.levels[to].d, |x| self.embed(x, from, to), tol)
    }
}

/// Builds as many levels as the cap allows; the error, if any, says why it
/// stopped early.
pub fn build_tower_partial(e: &CondExpectation, depth: usize, cap: usize, seed: u64) -> (TowerData, Option<Error>) {
    let mut t = TowerData { levels: vec![e.source.clone()], expectations: vec![], jones: vec![], steps: vec![] };
    let mut cur = match e.clone().ensure_quasi_basis() {
        Ok(x) => x,
        Err(err) => return (t, Some(err)),
    };
    t.expectations.push(cur.clone());
    for n in 1..=depth {
        let next_ambient = cur.source.dim();
        if next_ambient * next_ambient > cap {
            return (t, Some(Error::SizeCap(format!("level {n} needs ambient {next_ambient}, cap is {cap} vector dims"))));
        }
        let step = basic_construction(&cur, seed.wrapping_add(n as u64)).and_then(|bc| {
            let dual = dual_expectation(&bc, seed.wrapping_add(n as u64))?;
            Ok((bc, dual))
        });
        match step {
            Ok((bc, dual)) => {
                t.levels.push(bc.c1.clone());
                t.jones.push(bc.jones.clone());
                t.steps.push(bc);
                t.expectations.push(dual.clone());
                cur = dual;
            }
            Err(err) => return (t, Some(err)),
        }
    }
    (t, None)
}

pub fn build_tower(e: &CondExpectation, depth: usize, cap: usize, seed: u64) -> Result<TowerData> {
    if depth == 0 {
        return Err(Error::InputShape("tower depth must be at least 1".into()));
    }
    match build_tower_partial(e, depth, cap, seed) {
        (t, None) => Ok(t),
        (_, Some(err)) => Err(err),
    }
}

/// Jones relations in the top level, constancy of the index, and the basic
/// construction relations of every step.
pub fn check_tower(t: &TowerData) -> Findings {
    let mut f = Findings::new();
    let top = t.depth();
    for (n, bc) in t.steps.iter().enumerate() {
        f.merge(&format!("level{}.", n + 1), &crate::condexp::check_basic_construction(bc));
    }
    for n in 1..t.expectations.len() {
        if let (Some(prev), Some(cur)) = (&t.expectations[n - 1].index, &t.expectations[n].index) {
            f.record("index_constant", fnorm(&(t.embed(prev, n - 1, n) - cur)));
        }
    }
    let es: Vec<CMat> = (0..top).map(|i| t.embed(&t.jones[i], i + 1, top)).collect();
    let ind0 = t.expectations[0].index.clone();
    let scalar = ind0.as_ref().and_then(|ind| {
        let s = crate::numlin::trace(ind) / crate::numlin::c(ind.nrows() as f64);
        (fnorm(&(ind - eye(ind.nrows()) * s)) < 1e-9 * fnorm(ind)).then_some(s)
    });
    for i in 0..es.len() {
        for j in 0..es.len() {
            if i.abs_diff(j) >= 2 {
                f.record("jones_far_commute", fnorm(&(&es[i] * &es[j] - &es[j] * &es[i])));
            }
            if i.abs_diff(j) == 1 {
                if let Some(s) = scalar {
                    let lhs = &es[i] * &es[j] * &es[i];
                    f.record("jones_temperley_lieb", fnorm(&(lhs - &es[i] / s)));
                }
            }
        }
    }
    f
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ParagroupData {
    pub rc_dims: Vec<usize>,
    pub blocks: Vec<Vec<Block>>,
    /// Inclusion matrix of level n into level n+1.
    pub bratteli: Vec<InclusionMatrix>,
}

impl ParagroupData {
    pub fn depth(&self) -> usize {
        self.rc_dims.len().saturating_sub(1)
    }
}

/// A′ ∩ Cₙ for every level, with block sizes and inclusion matrices.
pub fn relative_commutants(a: &MatrixAlgebra, t: &TowerData, tol: f64, seed: u64) -> Result<ParagroupData> {
    if !a.is_subalgebra_of(&t.levels[0], tol * 10.0) {
        return Err(Error::NotSubalgebra("A is not inside C₀".into()));
    }
    let mut rcs = Vec::new();
    let mut structs: Vec<BlockStructure> = Vec::new();
    for n in 0..t.levels.len() {
        let an = t.embed_algebra(a, 0, n, tol)?;
        let rc = commutant(&an, &t.levels[n], tol)?;
        structs.push(block_structure(&rc, tol, seed.wrapping_add(n as u64))?);
        rcs.push(rc);
    }
    let mut bratteli = Vec::new();
    for n in 0..rcs.len().saturating_sub(1) {
        let lifted = BlockStructure {
            blocks: structs[n].blocks.clone(),
            projections: structs[n].projections.iter().map(|p| t.embed(p, n, n + 1)).collect(),
        };
        bratteli.push(inclusion_matrix_from(&lifted, &structs[n + 1])?);
    }
    Ok(ParagroupData {
        rc_dims: rcs.iter().map(|r| r.dim()).collect(),
        blocks: structs.into_iter().map(|s| s.blocks).collect(),
        bratteli,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Verdict {
    pub equal: bool,
    /// First level where no matching exists.
    pub first_difference: Option<usize>,
    pub reason: String,
    /// Per level, block i of the first datum corresponds to block perm[i] of the second.
    pub permutations: Vec<Vec<usize>>,
}

fn permutations_respecting(ka: &[usize], kb: &[usize]) -> Vec<Vec<usize>> {
    let n = ka.len();
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn rec(i: usize, ka: &[usize], kb: &[usize], cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if i == ka.len() {
            out.push(cur.clone());
            return;
        }
        for j in 0..kb.len() {
            if !used[j] && kb[j] == ka[i] {
                used[j] = true;
                cur.push(j);
                rec(i + 1, ka, kb, cur, used, out);
                cur.pop();
                used[j] = false;
            }
        }
    }
    rec(0, ka, kb, &mut cur, &mut used, &mut out);
    out
}

fn ks(bs: &[Block]) -> Vec<usize> {
    bs.iter().map(|b| b.k).collect()
}

/// Equality of the Bratteli data up to per-level block permutations.
pub fn compare_paragroups(p1: &ParagroupData, p2: &ParagroupData) -> Verdict {
    let fail = |level: usize, reason: String| Verdict { equal: false, first_difference: Some(level), reason, permutations: vec![] };
    if p1.rc_dims.len() != p2.rc_dims.len() {
        return fail(0, format!("depths differ: {} vs {}", p1.depth(), p2.depth()));
    }
    for (n, (a, b)) in p1.rc_dims.iter().zip(&p2.rc_dims).enumerate() {
        if a != b {
            return fail(n, format!("relative commutant dimensions differ at level {n}: {a} vs {b}"));
        }
        let (mut ka, mut kb) = (ks(&p1.blocks[n]), ks(&p2.blocks[n]));
        ka.sort_unstable();
        kb.sort_unstable();
        if ka != kb {
            return fail(n, format!("block sizes differ at level {n}: {ka:?} vs {kb:?}"));
        }
    }
    // Depth-first search over per-level permutations.
    fn search(n: usize, p1: &ParagroupData, p2: &ParagroupData, chosen: &mut Vec<Vec<usize>>, deepest: &mut usize) -> bool {
        if n == p1.rc_dims.len() {
            return true;
        }
        *deepest = (*deepest).max(n);
        for perm in permutations_respecting(&ks(&p1.blocks[n]), &ks(&p2.blocks[n])) {
            let ok = n == 0 || {
                let prev = &chosen[n - 1];
                let (m1, m2) = (&p1.bratteli[n - 1], &p2.bratteli[n - 1]);
                m1.iter().enumerate().all(|(i, row)| row.iter().enumerate().all(|(j, &v)| m2[prev[i]][perm[j]] == v))
            };
            if ok {
                chosen.push(perm);
                if search(n + 1, p1, p2, chosen, deepest) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
    let mut chosen = Vec::new();
    let mut deepest = 0;
    if search(0, p1, p2, &mut chosen, &mut deepest) {
        Verdict { equal: true, first_difference: None, reason: "isomorphic".into(), permutations: chosen }
    } else {
        fail(deepest, format!("no block matching makes the inclusion matrices agree at level {deepest}"))
    }
}

/// x ↦ V*xV from M_n(A)′ ∩ M_n(C) to (pM_n(A)p)′ ∩ pM_n(C)p.
#[derive(Debug, Clone)]
pub struct CornerIso {
    pub dim_domain: usize,
    pub dim_target: usize,
    pub findings: Findings,
}

pub fn commutant_corner_iso(a: &MatrixAlgebra, c_alg: &MatrixAlgebra, n: usize, p: &CMat, tol: f64) -> Result<CornerIso> {
    let an = amplify(a, n);
    let cn = amplify(c_alg, n);
    if !is_full_projection(p, &an, tol)? {
        return Err(Error::NotFull("p is not full in M_n(A)".into()));
    }
    let dom = commutant(&an, &cn, tol)?;
    let v = range_isometry(p, tol)?;
    let b = compress(&an, &v, tol)?;
    let d = compress(&cn, &v, tol)?;
    let target = commutant(&b, &d, tol)?;
    let pi = |x: &CMat| v.adjoint() * x * &v;
    let basis = dom.basis();
    let images: Vec<CMat> = basis.iter().map(pi).collect();
    let mut f = Findings::new();
    for im in &images {
        f.record("range", target.span.residual(im));
    }
    let r = if images.is_empty() { 0 } else { rank(&stack_columns(&images), 1e-9) };
    f.record("injective", if r == dom.dim() { 0.0 } else { 1.0 });
    f.record("surjective", if r == target.dim() { 0.0 } else { 1.0 });
    for (i, x) in basis.iter().enumerate() {
        f.record("star", fnorm(&(pi(&x.adjoint()) - images[i].adjoint())));
        for (j, y) in basis.iter().enumerate() {
            f.record("multiplicative", fnorm(&(pi(&(x * y)) - &images[i] * &images[j])));
        }
    }
    Ok(CornerIso { dim_domain: dom.dim(), dim_target: target.dim(), findings: f })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condexp::trace_expectation;
    use crate::fdalg::generate_algebra;
    use crate::numlin::{unit, DEFAULT_TOL as T};

    fn s1() -> CondExpectation {
        trace_expectation(&MatrixAlgebra::full(2), &MatrixAlgebra::scalars(2), T).unwrap()
    }

    #[test]
    fn s1_tower_dims() {
        let t = build_tower(&s1(), 2, DEFAULT_CAP, 0).unwrap();
        let dims: Vec<usize> = t.levels.iter().map(|l| l.dim()).collect();
        assert_eq!(dims, vec![4, 16, 64]);
        assert!(check_tower(&t).passes(1e-9), "{:?}", check_tower(&t).worst());
        let pg = relative_commutants(&MatrixAlgebra::scalars(2), &t, T, 0).unwrap();
        assert_eq!(pg.rc_dims, vec![4, 16, 64]);
        assert_eq!(pg.bratteli[0], vec![vec![2]]);
        let v = compare_paragroups(&pg, &pg);
        assert!(v.equal);
        assert_eq!(v.permutations, vec![vec![0], vec![0], vec![0]]);
    }

    #[test]
    fn s2_relative_commutant_and_mismatch() {
        let d2 = generate_algebra(2, &[unit(2, 2, 0, 0)], T).unwrap();
        let e = trace_expectation(&MatrixAlgebra::full(2), &d2, T).unwrap();
        let t = build_tower(&e, 1, DEFAULT_CAP, 0).unwrap();
        let pg2 = relative_commutants(&d2, &t, T, 0).unwrap();
        assert_eq!(pg2.rc_dims[0], 2);
        let t1 = build_tower(&s1(), 1, DEFAULT_CAP, 0).unwrap();
        let pg1 = relative_commutants(&MatrixAlgebra::scalars(2), &t1, T, 0).unwrap();
        let v = compare_paragroups(&pg1, &pg2);
        assert!(!v.equal);
        assert_eq!(v.first_difference, Some(0));
    }

    #[test]
    fn size_cap_keeps_partial_levels() {
        let (t, err) = build_tower_partial(&s1(), 3, 256, 0);
        assert!(matches!(err, Some(Error::SizeCap(_))));
        assert_eq!(t.levels.len(), 3);
    }

    #[test]
    fn corner_iso_identity_and_s1() {
        let m2 = MatrixAlgebra::full(2);
        let sc = MatrixAlgebra::scalars(2);
        let id = commutant_corner_iso(&sc, &m2, 1, &eye(2), T).unwrap();
        assert!(id.findings.passes(1e-9));
        let p = crate::morita::corner_unit(2, 2);
        let iso = commutant_corner_iso(&sc, &m2, 2, &p, T).unwrap();
        assert_eq!(iso.dim_domain, iso.dim_target);
        assert!(iso.findings.passes(1e-9), "{:?}", iso.findings.worst());
        let d2 = generate_algebra(2, &[unit(2, 2, 0, 0)], T).unwrap();
        let bad = unit(2, 2, 0, 0);
        assert!(matches!(commutant_corner_iso(&d2, &m2, 1, &bad, T), Err(Error::NotFull(_))));
    }
}
