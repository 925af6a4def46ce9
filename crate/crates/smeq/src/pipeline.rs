//! The verification pipeline behind `smeq verify`, and Bratteli export.
//!
//! Stages run in order (build, pair, transport, linking, upward, uniqueness,
//! duality, updown, downward, paragroup); each contributes checks named
//! `stage.identity`.  A module error becomes a failed check named after the
//! stage, and stages depending on it are reported as not run.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bimodule::{check_bimodule_expectation, BimoduleExpectation};
use crate::condexp::{from_ambient_matrix, index_of, quasi_basis_violation, trace_expectation, verify_expectation, CondExpectation};
use crate::error::{Error, Result};
use crate::fdalg::{generate_algebra, MatrixAlgebra};
use crate::morita::{
    check_linking, check_linking_expectation, check_pair, check_standard_form, corner_partner, exchange_identities_check,
    linking_algebra, linking_expectation, standard_form, transport_expectation, CornerPartner, MoritaPair,
};
use crate::numlin::{c, eye, fnorm, CMat};
use crate::paragroup::{
    build_tower_partial, check_tower, commutant_corner_iso, compare_paragroups, relative_commutants, ParagroupData, Verdict,
    DEFAULT_CAP,
};
use crate::report::{Check, Findings, Report};
use crate::scenario::{AlgebraSpec, Construction, ExpectationSpec, Scenario};
use crate::towers::{check_upward, duality_check, downward, tower_bimodule, uniqueness_iso, updown_relation_check, upward, Upward};

/// Threshold for every violation in the report.
pub const CHECK_TOL: f64 = 1e-8;
/// Random elements for the sampled identities.
pub const SAMPLES: usize = 20;

pub const STAGES: &[&str] =
    &["build", "pair", "transport", "linking", "upward", "uniqueness", "duality", "updown", "downward", "paragroup"];

fn prefixes(stage: &str) -> &'static [&'static str] {
    match stage {
        "build" => &["build", "quasi_basis"],
        "pair" => &["pair"],
        "transport" => &["transport"],
        "linking" => &["linking", "exchange"],
        "upward" => &["upward"],
        "uniqueness" => &["uniqueness"],
        "duality" => &["duality"],
        "updown" => &["updown"],
        "downward" => &["downward"],
        "paragroup" => &["paragroup"],
        _ => &[],
    }
}

fn deps(stage: &str) -> &'static [&'static str] {
    match stage {
        "pair" | "paragroup" => &["build"],
        "transport" => &["pair"],
        "linking" | "upward" | "downward" => &["transport"],
        "uniqueness" | "duality" | "updown" => &["upward"],
        _ => &[],
    }
}

fn selected(stage: &str, filter: Option<&str>) -> bool {
    match filter {
        None => true,
        Some(f) => prefixes(stage).iter().any(|p| p.starts_with(f) || f.starts_with(p)),
    }
}

fn needed(stage: &str, filter: Option<&str>) -> bool {
    selected(stage, filter) || STAGES.iter().any(|s| deps(s).contains(&stage) && needed(s, filter))
}

fn matches_filter(name: &str, filter: Option<&str>) -> bool {
    filter.is_none_or(|f| name.starts_with(f))
}

/// The inclusions and expectations every later stage works on.
#[derive(Debug, Clone)]
pub struct Built {
    /// The inclusion written in the scenario.
    pub base: CondExpectation,
    /// E^A: C → A, the left side of the pair.
    pub e_a: CondExpectation,
    /// E^B: D → B, the right side of the pair.
    pub e_b: CondExpectation,
    pub pair: MoritaPair,
    pub corner: Option<CornerPartner>,
    /// E^X when the construction supplies it.
    pub given_ex: Option<BimoduleExpectation>,
    pub self_pair: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub left: Option<ParagroupData>,
    pub right: Option<ParagroupData>,
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub artifacts: Artifacts,
}

struct Recorder {
    report: Report,
}

impl Recorder {
    fn push(&mut self, name: String, violation: f64, detail: String, ms: f64) {
        let violation = if violation.is_nan() { f64::INFINITY } else { violation };
        self.report.push(Check { name, violation, tol: CHECK_TOL, passed: violation <= CHECK_TOL, detail, elapsed_ms: ms });
    }

    fn findings(&mut self, prefix: &str, f: &Findings, ms: f64) {
        for (n, v) in &f.items {
            self.push(format!("{prefix}{n}"), *v, String::new(), ms);
        }
    }

    fn error(&mut self, stage: &str, e: &Error, ms: f64) {
        self.push(stage.to_string(), f64::INFINITY, e.to_string(), ms);
    }
}

fn flag(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        1.0
    }
}

fn make_algebra(spec: &AlgebraSpec, d: usize, tol: f64) -> Result<MatrixAlgebra> {
    match spec {
        AlgebraSpec::Full => Ok(MatrixAlgebra::full(d)),
        AlgebraSpec::Scalars => Ok(MatrixAlgebra::scalars(d)),
        AlgebraSpec::Diagonal => Ok(MatrixAlgebra::diagonal(d)),
        AlgebraSpec::Generated(g) => generate_algebra(d, g, tol),
    }
}

fn qb_findings(prefix: &str, e: &CondExpectation, f: &mut Findings) {
    let qb = e.quasi_basis.as_ref().expect("quasi-basis attached");
    let (l, r) = quasi_basis_violation(e, qb, &e.source.basis());
    f.record(&format!("{prefix}right"), l);
    f.record(&format!("{prefix}left"), r);
    if let Some(ind) = &e.index {
        let central = e.source.basis().iter().map(|x| fnorm(&(ind * x - x * ind))).fold(0.0, f64::max);
        f.record(&format!("{prefix}index_central"), central);
    }
}

pub fn build(sc: &Scenario) -> Result<(Built, Findings)> {
    let (d, tol, seed) = (sc.ambient_dim, sc.tol, sc.seed);
    let c_alg = make_algebra(&sc.generators_c, d, tol)?;
    let a = make_algebra(&sc.generators_a, d, tol)?;
    let base = match &sc.expectation {
        ExpectationSpec::Trace => trace_expectation(&c_alg, &a, tol)?,
        ExpectationSpec::Matrix(m) => from_ambient_matrix(&c_alg, &a, m, tol)?,
    }
    .with_quasi_basis(seed)?;
    let mut f = Findings::new();
    f.merge("build.E.", &verify_expectation(&base, SAMPLES, seed));
    qb_findings("quasi_basis.", &base, &mut f);
    let built = match (sc.construction, &sc.morita) {
        (Construction::Direct, None) => Built {
            e_a: base.clone(),
            e_b: base.clone(),
            pair: MoritaPair::self_pair(&a, &c_alg),
            corner: None,
            given_ex: None,
            self_pair: true,
            base,
        },
        (Construction::Direct, Some((n, p))) => {
            let cp = corner_partner(&base, *n, p)?;
            let e_b = cp.compression.e.clone().with_quasi_basis(seed)?;
            qb_findings("quasi_basis.EB.", &e_b, &mut f);
            Built { e_a: base.clone(), e_b, pair: cp.pair.clone(), corner: Some(cp), given_ex: None, self_pair: false, base }
        }
        (Construction::TowerBimodule, _) => {
            let tb = tower_bimodule(&base, seed)?;
            f.merge("build.tower.", &tb.findings);
            qb_findings("quasi_basis.EA.", &tb.e_a, &mut f);
            qb_findings("quasi_basis.EB.", &tb.e_b, &mut f);
            f.merge("build.G.", &check_bimodule_expectation(&tb.g, SAMPLES, seed));
            Built { e_a: tb.e_a, e_b: tb.e_b, pair: tb.pair, corner: None, given_ex: Some(tb.g), self_pair: false, base }
        }
    };
    Ok((built, f))
}

fn pair_stage(b: &Built, sc: &Scenario) -> Result<Findings> {
    let mut f = check_pair(&b.pair, sc.tol)?;
    let sf = standard_form(&b.pair, sc.tol)?;
    f.merge("standard_form.", &check_standard_form(&b.pair, &sf, sc.tol)?);
    Ok(f)
}

fn transport_stage(b: &Built, sc: &Scenario) -> Result<(BimoduleExpectation, Findings)> {
    let (eb, ex) = transport_expectation(&b.pair, &b.e_a, sc.tol)?;
    let mut f = Findings::new();
    f.merge("EB.", &verify_expectation(&eb, SAMPLES, sc.seed));
    f.merge("EX.", &check_bimodule_expectation(&ex, SAMPLES, sc.seed));
    f.record("EB_matches_given", fnorm(&(&eb.action - &b.e_b.action)));
    if let Some(cp) = &b.corner {
        let base_ind = b.base.index.clone().expect("quasi-basis attached");
        let formula = cp.compression.index_formula(&base_ind);
        let fresh = cp.compression.e.clone().with_quasi_basis(sc.seed.wrapping_add(17))?;
        let fresh_ind = index_of(fresh.quasi_basis.as_ref().unwrap(), fresh.source.d);
        f.record("index_formula", fnorm(&(&fresh_ind - &formula)));
        f.record("index_transported", fnorm(&(eb.index.clone().unwrap() - &formula)));
        for y in b.pair.y.basis() {
            f.record("EX_matches_corner", fnorm(&(ex.apply(&y) - cp.direct_expectation(&b.base, &y))));
        }
    }
    let ex = match &b.given_ex {
        Some(g) => {
            f.record("EX_matches_given", fnorm(&(&ex.action - &g.action)));
            g.clone()
        }
        None => ex,
    };
    let ex = BimoduleExpectation { left_exp: b.e_a.clone(), right_exp: b.e_b.clone(), ..ex };
    Ok((ex, f))
}

fn linking_stage(b: &Built, ex: &BimoduleExpectation, sc: &Scenario) -> Result<Findings> {
    let lk = linking_algebra(&b.pair);
    let mut f = Findings::new();
    f.merge("linking.", &check_linking(&b.pair, &lk, sc.tol)?);
    let el = linking_expectation(&lk, ex, sc.tol)?;
    f.merge("linking.E.", &check_linking_expectation(&lk, ex, &el, sc.seed));
    f.merge("exchange.", &exchange_identities_check(ex));
    Ok(f)
}

fn uniqueness_stage(up: &Upward, sc: &Scenario) -> Result<Findings> {
    let w = up.pair.y.clone();
    let ey = |t: &CMat| up.e_y.apply(t);
    let th = uniqueness_iso(up, &w, &ey, sc.seed)?;
    let mut f = th.findings.clone();
    f.record("theta_identity", fnorm(&(&th.matrix - eye(w.dim()))));
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x7e7a);
    for _ in 0..SAMPLES {
        let x = w.random_elem(&mut rng);
        let tx = up.pair.y.elem(&(&th.matrix * w.coords(&x)));
        f.record("composed", fnorm(&(up.e_y.apply(&tx) - ey(&x))) / fnorm(&x).max(1e-300));
    }
    let twice = |t: &CMat| up.e_y.apply(t) * c(2.0);
    f.record("star_violation_detected", flag(matches!(uniqueness_iso(up, &w, &twice, sc.seed), Err(Error::StarCondition(_)))));
    Ok(f)
}

fn tower_side(
    rec: &mut Recorder,
    label: &str,
    e: &CondExpectation,
    a: &MatrixAlgebra,
    sc: &Scenario,
) -> Option<ParagroupData> {
    let t0 = Instant::now();
    let (t, err) = build_tower_partial(e, sc.depth, DEFAULT_CAP, sc.seed);
    let ms = t0.elapsed().as_secs_f64() * 1e3;
    if let Some(err) = &err {
        rec.error(&format!("paragroup.{label}_tower"), err, ms);
    }
    rec.findings(&format!("paragroup.{label}_tower."), &check_tower(&t), ms);
    match relative_commutants(a, &t, sc.tol, sc.seed) {
        Ok(pg) => Some(pg),
        Err(e) => {
            rec.error(&format!("paragroup.{label}_commutants"), &e, t0.elapsed().as_secs_f64() * 1e3);
            None
        }
    }
}

fn paragroup_stage(rec: &mut Recorder, b: &Built, sc: &Scenario, art: &mut Artifacts) {
    let t0 = Instant::now();
    let left = tower_side(rec, "left", &b.e_a, &b.pair.a, sc);
    let right = if b.self_pair { left.clone() } else { tower_side(rec, "right", &b.e_b, &b.pair.b, sc) };
    if let (Some(l), Some(r)) = (&left, &right) {
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        rec.push("paragroup.rc_dims_equal".into(), flag(l.rc_dims == r.rc_dims), format!("{:?} vs {:?}", l.rc_dims, r.rc_dims), ms);
        let v = compare_paragroups(l, r);
        rec.push("paragroup.equivalent".into(), flag(v.equal), v.reason.clone(), ms);
        art.verdict = Some(v);
    }
    if let (Some(cp), Some((n, p))) = (&b.corner, &sc.morita) {
        let t1 = Instant::now();
        match commutant_corner_iso(&b.pair.a, &b.pair.c, *n, p, sc.tol) {
            Ok(iso) => {
                let ms = t1.elapsed().as_secs_f64() * 1e3;
                rec.findings("paragroup.corner_iso.", &iso.findings, ms);
                rec.push(
                    "paragroup.corner_iso.dims".into(),
                    flag(iso.dim_domain == iso.dim_target),
                    format!("{} vs {}", iso.dim_domain, iso.dim_target),
                    ms,
                );
            }
            Err(e) => rec.error("paragroup.corner_iso", &e, t1.elapsed().as_secs_f64() * 1e3),
        }
        let _ = cp;
    }
    art.left = left;
    art.right = right;
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t0 = Instant::now();
    let r = f();
    (r, t0.elapsed().as_secs_f64() * 1e3)
}

/// Runs the selected stages; `filter` keeps checks whose name starts with it.
pub fn run_scenario(sc: &Scenario, filter: Option<&str>) -> Outcome {
    let mut rec = Recorder { report: Report::new(&sc.name, sc.seed) };
    let mut art = Artifacts::default();
    let want = |s: &str| needed(s, filter);
    let skip = |rec: &mut Recorder, stage: &str, because: &str| {
        rec.push(stage.to_string(), f64::INFINITY, format!("not run: {because} failed"), 0.0);
    };

    let built = if want("build") {
        let (r, ms) = timed(|| build(sc));
        match r {
            Ok((b, f)) => {
                rec.findings("", &f, ms);
                Some(b)
            }
            Err(e) => {
                rec.error("build", &e, ms);
                None
            }
        }
    } else {
        None
    };

    let mut pair_ok = false;
    if want("pair") {
        match &built {
            Some(b) => {
                let (r, ms) = timed(|| pair_stage(b, sc));
                match r {
                    Ok(f) => {
                        rec.findings("pair.", &f, ms);
                        pair_ok = true;
                    }
                    Err(e) => {
                        rec.error("pair", &e, ms);
                    }
                }
            }
            None => skip(&mut rec, "pair", "build"),
        }
    }

    let mut ex = None;
    if want("transport") {
        match (&built, pair_ok) {
            (Some(b), true) => {
                let (r, ms) = timed(|| transport_stage(b, sc));
                match r {
                    Ok((e, f)) => {
                        rec.findings("transport.", &f, ms);
                        ex = Some(e);
                    }
                    Err(e) => {
                        rec.error("transport", &e, ms);
                    }
                }
            }
            _ => skip(&mut rec, "transport", "pair"),
        }
    }

    if want("linking") && selected("linking", filter) {
        match (&built, &ex) {
            (Some(b), Some(ex)) => {
                let (r, ms) = timed(|| linking_stage(b, ex, sc));
                match r {
                    Ok(f) => rec.findings("", &f, ms),
                    Err(e) => rec.error("linking", &e, ms),
                }
            }
            _ => skip(&mut rec, "linking", "transport"),
        }
    }

    let mut up = None;
    if want("upward") {
        match (&built, &ex) {
            (Some(b), Some(ex)) => {
                let (r, ms) = timed(|| upward(&b.pair, ex, sc.seed).and_then(|u| check_upward(&u, sc.seed).map(|f| (u, f))));
                match r {
                    Ok((u, f)) => {
                        if selected("upward", filter) {
                            rec.findings("upward.", &f, ms);
                        }
                        up = Some(u);
                    }
                    Err(e) => {
                        rec.error("upward", &e, ms);
                    }
                }
            }
            _ => skip(&mut rec, "upward", "transport"),
        }
    }

    for stage in ["uniqueness", "duality", "updown"] {
        if !selected(stage, filter) || (stage == "duality" && !sc.duality) {
            continue;
        }
        let Some(u) = &up else {
            skip(&mut rec, stage, "upward");
            continue;
        };
        let (r, ms) = timed(|| match stage {
            "uniqueness" => uniqueness_stage(u, sc),
            "duality" => duality_check(u, sc.seed, SAMPLES).map(|d| d.findings),
            _ => updown_relation_check(u, sc.seed),
        });
        match r {
            Ok(f) => rec.findings(&format!("{stage}."), &f, ms),
            Err(e) => rec.error(stage, &e, ms),
        }
    }

    if let (Some((p, q)), true) = (&sc.downward, selected("downward", filter)) {
        match (&built, &ex) {
            (Some(b), Some(ex)) => {
                let (r, ms) = timed(|| downward(&b.pair, ex, p, q, sc.seed, true));
                match r {
                    Ok(dd) => rec.findings("downward.", &dd.findings, ms),
                    Err(e) => rec.error("downward", &e, ms),
                }
            }
            _ => skip(&mut rec, "downward", "transport"),
        }
    }

    if selected("paragroup", filter) {
        match &built {
            Some(b) => paragroup_stage(&mut rec, b, sc, &mut art),
            None => skip(&mut rec, "paragroup", "build"),
        }
    }

    rec.report.checks.retain(|c| matches_filter(&c.name, filter) || c.detail.starts_with("not run"));
    Outcome { report: rec.report, artifacts: art }
}

/// Paragroup data of B ⊂ D, the right side of the scenario's pair.  For a
/// scenario without a partner this is the written inclusion itself.
pub fn subject_paragroup(sc: &Scenario) -> Result<ParagroupData> {
    let (b, _) = build(sc)?;
    let (t, err) = build_tower_partial(&b.e_b, sc.depth, DEFAULT_CAP, sc.seed);
    if let Some(e) = err {
        return Err(e);
    }
    relative_commutants(&b.pair.b, &t, sc.tol, sc.seed)
}

fn dot_body(out: &mut String, pg: &ParagroupData, tag: &str, indent: &str) {
    for (n, blocks) in pg.blocks.iter().enumerate() {
        out.push_str(&format!("{indent}{{ rank=same;"));
        for (i, b) in blocks.iter().enumerate() {
            out.push_str(&format!(" {tag}_{n}_{i} [label=\"{k}×{k} ({m})\"];", k = b.k, m = b.m));
        }
        out.push_str(" }\n");
    }
    for (n, mat) in pg.bratteli.iter().enumerate() {
        for (i, row) in mat.iter().enumerate() {
            for (j, &mult) in row.iter().enumerate() {
                if mult > 0 {
                    out.push_str(&format!("{indent}{tag}_{n}_{i} -> {tag}_{}_{j} [label=\"{mult}\"];\n", n + 1));
                }
            }
        }
    }
}

/// DOT digraph with one rank per level and edges labeled by multiplicity.
pub fn bratteli_dot(pg: Option<&ParagroupData>, name: &str) -> String {
    let mut out = format!("digraph \"{name}\" {{\n  rankdir=TB;\n");
    if let Some(pg) = pg {
        dot_body(&mut out, pg, "n", "  ");
    }
    out.push_str("}\n");
    out
}

/// Both diagrams as clusters of one graph, after a verdict comment.
pub fn compare_dot(a: &ParagroupData, name_a: &str, b: &ParagroupData, name_b: &str, v: &Verdict) -> String {
    let mut out = format!("// verdict: {} ({})\ndigraph compare {{\n  rankdir=TB;\n", if v.equal { "equivalent" } else { "different" }, v.reason);
    for (pg, name, tag) in [(a, name_a, "a"), (b, name_b, "b")] {
        out.push_str(&format!("  subgraph cluster_{tag} {{\n    label=\"{name}\";\n"));
        dot_body(&mut out, pg, tag, "    ");
        out.push_str("  }\n");
    }
    out.push_str("}\n");
    out
}
