//! Property tests on randomly conjugated block algebras ⊕ M_k ⊗ 1_m, whose
//! dimensions and block data are known in closed form.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smeq::condexp::{index_of, trace_expectation, verify_expectation};
use smeq::fdalg::{block_structure, center, commutant, generate_algebra, Block, MatrixAlgebra};
use smeq::numlin::{eye, fnorm, kron, random_matrix, unit, CMat};
use smeq::paragroup::{compare_paragroups, ParagroupData};
use smeq::pipeline::run_scenario;
use smeq::scenario::Scenario;

const T: f64 = 1e-9;
const CHECK: f64 = 1e-8;

/// Block lists (k, m) with Σ k·m ≤ 4.
fn blocks() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((1usize..=2, 1usize..=2), 1..=3).prop_filter("fits in M_4", |bs| {
        let d: usize = bs.iter().map(|(k, m)| k * m).sum();
        (2..=4).contains(&d)
    })
}

/// Generators of U(⊕ M_k ⊗ 1_m)U* for a random unitary U.
fn conjugated(bs: &[(usize, usize)], seed: u64) -> (usize, Vec<CMat>) {
    let d: usize = bs.iter().map(|(k, m)| k * m).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = random_matrix(&mut rng, d, d).qr().q();
    let mut gens = Vec::new();
    let mut off = 0;
    for &(k, m) in bs {
        for i in 0..k {
            for j in 0..k {
                let local = kron(&unit(k, k, i, j), &eye(m));
                let mut g = CMat::zeros(d, d);
                g.view_mut((off, off), (k * m, k * m)).copy_from(&local);
                gens.push(&u * g * u.adjoint());
            }
        }
        off += k * m;
    }
    (d, gens)
}

fn sorted_blocks(bs: &[(usize, usize)]) -> Vec<Block> {
    let mut v: Vec<Block> = bs.iter().map(|&(k, m)| Block { k, m }).collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn generated_algebra_matches_block_data(bs in blocks(), seed in 0u64..1000) {
        let (d, gens) = conjugated(&bs, seed);
        let a = generate_algebra(d, &gens, T).unwrap();
        prop_assert_eq!(a.dim(), bs.iter().map(|(k, _)| k * k).sum::<usize>());
        let mut found = block_structure(&a, T, seed).unwrap().blocks;
        found.sort();
        prop_assert_eq!(found, sorted_blocks(&bs));
        prop_assert_eq!(center(&a, T).unwrap().dim(), bs.len());
        for x in a.basis() {
            prop_assert!(a.contains(&x.adjoint(), 1e-8));
            for y in a.basis() {
                prop_assert!(a.contains(&(&x * &y), 1e-8));
            }
        }
    }

    #[test]
    fn commutant_swaps_sizes_and_multiplicities(bs in blocks(), seed in 0u64..1000) {
        let (d, gens) = conjugated(&bs, seed);
        let a = generate_algebra(d, &gens, T).unwrap();
        let full = MatrixAlgebra::full(d);
        let ac = commutant(&a, &full, T).unwrap();
        prop_assert_eq!(ac.dim(), bs.iter().map(|(_, m)| m * m).sum::<usize>());
        let acc = commutant(&ac, &full, T).unwrap();
        prop_assert_eq!(acc.dim(), a.dim());
        prop_assert!(a.is_subalgebra_of(&acc, 1e-8) && acc.is_subalgebra_of(&a, 1e-8));
    }

    #[test]
    fn trace_expectation_axioms_and_central_index(bs in blocks(), seed in 0u64..1000) {
        let (d, gens) = conjugated(&bs, seed);
        let a = generate_algebra(d, &gens, T).unwrap();
        let e = trace_expectation(&MatrixAlgebra::full(d), &a, T).unwrap().with_quasi_basis(seed).unwrap();
        let f = verify_expectation(&e, 8, seed);
        prop_assert!(f.passes(CHECK), "{:?}", f.worst());
        let ind = index_of(e.quasi_basis.as_ref().unwrap(), d);
        // Ind acts as d·m/k on the block of size k·m, so Tr Ind = d·Σ m².
        let expected: f64 = bs.iter().map(|&(_, m)| (d * m * m) as f64).sum();
        prop_assert!((ind.trace().re - expected).abs() < 1e-8 * expected, "{} vs {expected}", ind.trace().re);
        let comm = commutant(&a, &MatrixAlgebra::full(d), T).unwrap();
        prop_assert!(comm.contains(&ind, 1e-8) && a.contains(&ind, 1e-8));
    }

    #[test]
    fn paragroup_comparison_ignores_block_order(levels in prop::collection::vec(prop::collection::vec((1usize..4, 1usize..4), 1..4), 1..4), rot in 0usize..3) {
        let blocks: Vec<Vec<Block>> = levels.iter().map(|l| l.iter().map(|&(k, m)| Block { k, m }).collect()).collect();
        let bratteli: Vec<Vec<Vec<usize>>> = (0..blocks.len() - 1)
            .map(|n| (0..blocks[n].len()).map(|i| (0..blocks[n + 1].len()).map(|j| (i + 2 * j) % 3).collect()).collect())
            .collect();
        let rc_dims = blocks.iter().map(|l| l.iter().map(|b| b.k * b.k).sum()).collect();
        let p = ParagroupData { rc_dims, blocks, bratteli };
        // Rotate every level's blocks and conjugate the inclusion matrices to match.
        let perms: Vec<Vec<usize>> = p.blocks.iter().map(|l| (0..l.len()).map(|i| (i + rot) % l.len()).collect()).collect();
        let mut q = p.clone();
        for (n, perm) in perms.iter().enumerate() {
            for (i, &pi) in perm.iter().enumerate() {
                q.blocks[n][pi] = p.blocks[n][i];
            }
        }
        for n in 0..p.bratteli.len() {
            for i in 0..perms[n].len() {
                for j in 0..perms[n + 1].len() {
                    q.bratteli[n][perms[n][i]][perms[n + 1][j]] = p.bratteli[n][i][j];
                }
            }
        }
        let v = compare_paragroups(&p, &q);
        prop_assert!(v.equal, "{}", v.reason);
        let w = compare_paragroups(&q, &p);
        prop_assert!(w.equal, "{}", w.reason);
        let mut r = q.clone();
        r.rc_dims[0] += 1;
        prop_assert_eq!(compare_paragroups(&p, &r).first_difference, Some(0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 3, ..ProptestConfig::default() })]

    #[test]
    fn pipeline_passes_for_any_seed(seed in 1u64..u64::MAX) {
        let mut sc = Scenario::load("s2_pinching_d2").unwrap();
        sc.seed = seed;
        let out = run_scenario(&sc, None);
        let failed: Vec<_> = out.report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        prop_assert!(failed.is_empty(), "{:?}", failed);
    }
}

#[test]
fn identity_has_unit_index() {
    let d = 3;
    let full = MatrixAlgebra::full(d);
    let e = trace_expectation(&full, &full, T).unwrap().with_quasi_basis(0).unwrap();
    let ind = index_of(e.quasi_basis.as_ref().unwrap(), d);
    assert!(fnorm(&(ind - eye(d))) < CHECK);
}
