//! Acceptance run over the built-in scenarios: one PASS/FAIL line per
//! criterion, non-zero exit status if any criterion fails.

use smeq::numlin::{c, eye, fnorm, unit, CMat};
use smeq::paragroup::compare_paragroups;
use smeq::pipeline::{build, run_scenario, Outcome};
use smeq::report::Report;
use smeq::scenario::Scenario;

/// Every violation below is compared against this.
const TOL: f64 = 1e-8;

struct Verdict {
    ok: bool,
    detail: String,
}

/// Worst violation over checks starting with any prefix; fails when a prefix
/// matches nothing, so a silently skipped stage cannot pass.
fn worst(r: &Report, prefixes: &[&str]) -> Verdict {
    let mut max: f64 = 0.0;
    let mut at = String::new();
    for p in prefixes {
        let hits: Vec<_> = r.checks.iter().filter(|c| c.name.starts_with(p)).collect();
        if hits.is_empty() {
            return Verdict { ok: false, detail: format!("{}: no check named {p}*", r.scenario) };
        }
        for c in hits {
            if c.violation > max || at.is_empty() {
                max = max.max(c.violation);
                at = format!("{} {}", r.scenario, c.name);
            }
        }
    }
    Verdict { ok: max <= TOL, detail: format!("max violation {max:.2e} ({at})") }
}

fn exact(r: &Report, names: &[&str]) -> Verdict {
    for n in names {
        match r.get(n) {
            Some(c) if c.violation == 0.0 => {}
            Some(c) => return Verdict { ok: false, detail: format!("{} {n} = {}", r.scenario, c.violation) },
            None => return Verdict { ok: false, detail: format!("{}: no check {n}", r.scenario) },
        }
    }
    Verdict { ok: true, detail: format!("{} exact", names.join(", ")) }
}

fn all(vs: Vec<Verdict>) -> Verdict {
    let ok = vs.iter().all(|v| v.ok);
    let detail = vs.into_iter().filter(|v| !ok || v.ok).map(|v| v.detail).collect::<Vec<_>>().join("; ");
    Verdict { ok, detail }
}

fn load(name: &str) -> Scenario {
    Scenario::load(name).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn run(sc: &Scenario, filter: Option<&str>) -> Outcome {
    let t = std::time::Instant::now();
    let o = run_scenario(sc, filter);
    eprintln!("  ran {} ({} checks) in {:.1} s", sc.name, o.report.checks.len(), t.elapsed().as_secs_f64());
    o
}

/// Index of E against an explicit quasi-basis: the matrix-unit basis
/// {(√n e_ij, √n e_ji)} for the trace onto scalars, and {1, σ_x} for the
/// pinching of M₂.
fn index_oracles(s1: &Scenario, s2: &Scenario) -> Verdict {
    let n = s1.ambient_dim;
    let mut ind1 = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let u = unit(n, n, i, j);
            ind1 += &u * u.adjoint() * c(n as f64);
        }
    }
    let sx = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    let ind2 = eye(2) + &sx * sx.adjoint();
    let (b1, _) = build(s1).expect("s1 builds");
    let (b2, _) = build(s2).expect("s2 builds");
    let d1 = fnorm(&(b1.base.index.clone().unwrap() - &ind1));
    let d2 = fnorm(&(b2.base.index.clone().unwrap() - &ind2));
    let scalar1 = fnorm(&(&ind1 - eye(n) * c((n * n) as f64)));
    Verdict {
        ok: d1 <= TOL && d2 <= TOL && scalar1 == 0.0,
        detail: format!("Ind(s1) = {}·1 off by {d1:.1e}, Ind(s2) = 2·1 off by {d2:.1e}", n * n),
    }
}

fn main() {
    let t0 = std::time::Instant::now();
    let (s1, s2, s3, s4) = (load("s1_trace_m2"), load("s2_pinching_d2"), load("s3_corner_s1"), load("s4_tower_bimodule"));
    let o1 = run(&s1, None);
    let o2 = run(&s2, None);
    let o3 = run(&s3, None);
    let o4 = run(&s4, Some("quasi_basis"));
    let (r1, r2, r3, r4) = (&o1.report, &o2.report, &o3.report, &o4.report);

    let mut lines: Vec<(&str, Verdict)> = Vec::new();

    lines.push((
        "quasi-basis identity on S1-S4, index oracles",
        all(vec![
            worst(r1, &["quasi_basis."]),
            worst(r2, &["quasi_basis."]),
            worst(r3, &["quasi_basis.", "quasi_basis.EB."]),
            worst(r4, &["quasi_basis.EA.", "quasi_basis.EB.", "quasi_basis.right", "quasi_basis.left"]),
            index_oracles(&s1, &s2),
        ]),
    ));
    lines.push(("compression index formula on S3", worst(r3, &["transport.index_formula", "transport.index_transported"])));
    lines.push(("transported E^B and E^X axioms on S1/S3", worst(r3, &["transport.EB.", "transport.EX.", "transport.EX_matches_corner"])));
    lines.push((
        "linking expectation, block-diagonal index",
        all(vec![worst(r1, &["linking."]), worst(r3, &["linking.", "linking.E.index_block_diagonal"])]),
    ));
    lines.push(("exchange identities", all(vec![worst(r1, &["exchange."]), worst(r2, &["exchange."]), worst(r3, &["exchange."])])));
    lines.push((
        "upward construction on S1",
        worst(r1, &["upward.EY.", "upward.phi_quasi_basis_independent", "upward.jones_compression", "upward.EC.", "upward.ED."]),
    ));
    lines.push((
        "uniqueness: theta = id, F^Y = E^Y theta, (*) enforced",
        all(vec![
            worst(r1, &["uniqueness.theta_identity", "uniqueness.composed", "uniqueness.F_equals_EY_theta"]),
            exact(r1, &["uniqueness.star_violation_detected"]),
        ]),
    ));
    lines.push((
        "duality commuting identity, dim Y2 = dim pM_k(Y)q on S1",
        all(vec![worst(r1, &["duality.commuting_identity", "duality."]), exact(r1, &["duality.dim_Y2_vs_pMkYq"])]),
    ));
    lines.push((
        "downward: Z = X, rebuilt block structures",
        all(vec![
            worst(r1, &["updown.Z_equals_X", "updown."]),
            worst(r2, &["downward."]),
            exact(
                r2,
                &[
                    "downward.rebuilt_blocks_C",
                    "downward.rebuilt_blocks_D",
                    "downward.rebuilt_inclusion_C",
                    "downward.rebuilt_inclusion_D",
                    "downward.rebuilt_blocks_C1",
                    "downward.rebuilt_blocks_D1",
                    "downward.rebuilt_dim_Y",
                    "downward.rebuilt_dim_X",
                ],
            ),
        ]),
    ));
    lines.push(("paragroup invariance (S1,S3), difference (S1,S2) at level 0", {
        match (&o1.artifacts.right, &o3.artifacts.right, &o2.artifacts.right) {
            (Some(p1), Some(p3), Some(p2)) => {
                let same = compare_paragroups(p1, p3);
                let diff = compare_paragroups(p1, p2);
                let deep = p1.rc_dims.len() == 4;
                let ok = deep && p1.rc_dims == p3.rc_dims && same.equal && !diff.equal && diff.first_difference == Some(0);
                let inner = exact(r3, &["paragroup.equivalent", "paragroup.rc_dims_equal"]);
                Verdict {
                    ok: ok && inner.ok,
                    detail: format!(
                        "rc dims {:?} vs {:?}: {}; s1 vs s2: {} at level {:?}; {}",
                        p1.rc_dims, p3.rc_dims, same.reason, diff.reason, diff.first_difference, inner.detail
                    ),
                }
            }
            _ => Verdict { ok: false, detail: "paragroup data missing".into() },
        }
    }));
    lines.push(("determinism of the machine report", {
        let again = run(&s2, None);
        let s1_again = run(&s1, Some("upward"));
        let s1_first = run(&s1, Some("upward"));
        let same2 = again.report.to_json() == o2.report.to_json();
        let same1 = s1_again.report.to_json() == s1_first.report.to_json();
        Verdict { ok: same1 && same2, detail: format!("s2 full report identical: {same2}; s1 upward report identical: {same1}") }
    }));

    let mut failed = 0;
    for (i, (name, v)) in lines.iter().enumerate() {
        println!("criterion {:>2} [{}] {name}: {}", i + 1, if v.ok { "PASS" } else { "FAIL" }, v.detail);
        if !v.ok {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed in {:.1} s", lines.len() - failed, lines.len(), t0.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
