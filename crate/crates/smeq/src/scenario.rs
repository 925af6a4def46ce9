//! Scenario documents (TOML) and the built-in library.
//!
//! Complex entries are `[re, im]` pairs or plain reals; matrices are lists of
//! rows.

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::numlin::{CMat, C64, DEFAULT_TOL};
use crate::paragroup::DEFAULT_DEPTH;

#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraSpec {
    Full,
    Scalars,
    Diagonal,
    /// The unital *-algebra generated by the matrices.
    Generated(Vec<CMat>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExpectationSpec {
    Trace,
    /// d²×d² matrix acting on column-major vectorized elements.
    Matrix(CMat),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    /// The inclusion against itself, or against its corner when `morita` is set.
    Direct,
    /// A ⊂ B against B₁ ⊂ B₂ through the Jones tower of E.
    TowerBimodule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub ambient_dim: usize,
    pub generators_a: AlgebraSpec,
    pub generators_c: AlgebraSpec,
    pub expectation: ExpectationSpec,
    /// n and a full projection p ∈ M_n(A) for the corner partner.
    pub morita: Option<(usize, CMat)>,
    /// p ∈ C and q ∈ D for the downward construction.
    pub downward: Option<(CMat, CMat)>,
    pub construction: Construction,
    pub duality: bool,
    pub depth: usize,
    pub tol: f64,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Re(f64),
    Complex([f64; 2]),
}

type RawMatrix = Vec<Vec<Entry>>;

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAlgebra {
    Named(String),
    Generators(Vec<RawMatrix>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawExpectation {
    Named(String),
    Matrix(RawMatrix),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMorita {
    n: usize,
    p: Spanned<RawMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDownward {
    p: Spanned<RawMatrix>,
    q: Spanned<RawMatrix>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    ambient_dim: Spanned<usize>,
    #[serde(rename = "generators_A")]
    generators_a: Option<Spanned<RawAlgebra>>,
    #[serde(rename = "generators_C")]
    generators_c: Option<Spanned<RawAlgebra>>,
    expectation: Option<Spanned<RawExpectation>>,
    morita: Option<RawMorita>,
    downward: Option<RawDownward>,
    construction: Option<Spanned<String>>,
    duality: Option<bool>,
    depth: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn parse_error(text: &str, offset: usize, msg: impl Into<String>) -> Error {
    let (line, col) = line_col(text, offset);
    Error::Parse { line, col, msg: msg.into() }
}

fn matrix(text: &str, offset: usize, raw: &RawMatrix, rows: Option<usize>, what: &str) -> Result<CMat> {
    let r = raw.len();
    let c = raw.first().map_or(0, |row| row.len());
    if r == 0 || raw.iter().any(|row| row.len() != c) {
        return Err(parse_error(text, offset, format!("{what}: rows must be non-empty and of equal length")));
    }
    if r != c {
        return Err(parse_error(text, offset, format!("{what}: expected a square matrix, got {r}x{c}")));
    }
    if let Some(d) = rows {
        if r != d {
            return Err(parse_error(text, offset, format!("{what}: expected {d}x{d}, got {r}x{c}")));
        }
    }
    Ok(CMat::from_fn(r, c, |i, j| match raw[i][j] {
        Entry::Re(x) => C64::new(x, 0.0),
        Entry::Complex([re, im]) => C64::new(re, im),
    }))
}

fn algebra(text: &str, raw: &Option<Spanned<RawAlgebra>>, d: usize, default: AlgebraSpec, what: &str) -> Result<AlgebraSpec> {
    let Some(sp) = raw else { return Ok(default) };
    let off = sp.span().start;
    match sp.get_ref() {
        RawAlgebra::Named(s) => match s.as_str() {
            "full" => Ok(AlgebraSpec::Full),
            "scalars" => Ok(AlgebraSpec::Scalars),
            "diagonal" => Ok(AlgebraSpec::Diagonal),
            other => Err(parse_error(text, off, format!("{what}: unknown algebra \"{other}\""))),
        },
        RawAlgebra::Generators(ms) => {
            let gens = ms.iter().map(|m| matrix(text, off, m, Some(d), what)).collect::<Result<Vec<_>>>()?;
            Ok(if gens.is_empty() { AlgebraSpec::Scalars } else { AlgebraSpec::Generated(gens) })
        }
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let off = e.span().map_or(0, |s| s.start);
            parse_error(text, off, e.message().to_string())
        })?;
        let d = *raw.ambient_dim.get_ref();
        if d == 0 {
            return Err(parse_error(text, raw.ambient_dim.span().start, "ambient_dim must be positive"));
        }
        let generators_a = algebra(text, &raw.generators_a, d, AlgebraSpec::Scalars, "generators_A")?;
        let generators_c = algebra(text, &raw.generators_c, d, AlgebraSpec::Full, "generators_C")?;
        let expectation = match &raw.expectation {
            None => ExpectationSpec::Trace,
            Some(sp) => match sp.get_ref() {
                RawExpectation::Named(s) if s == "trace" => ExpectationSpec::Trace,
                RawExpectation::Named(s) => {
                    return Err(parse_error(text, sp.span().start, format!("expectation: unknown kind \"{s}\"")))
                }
                RawExpectation::Matrix(m) => ExpectationSpec::Matrix(matrix(text, sp.span().start, m, Some(d * d), "expectation")?),
            },
        };
        let construction = match &raw.construction {
            None => Construction::Direct,
            Some(sp) => match sp.get_ref().as_str() {
                "direct" => Construction::Direct,
                "tower_bimodule" => Construction::TowerBimodule,
                other => return Err(parse_error(text, sp.span().start, format!("construction: unknown kind \"{other}\""))),
            },
        };
        let morita = match &raw.morita {
            None => None,
            Some(m) => {
                if construction == Construction::TowerBimodule {
                    return Err(parse_error(text, m.p.span().start, "morita cannot be combined with tower_bimodule"));
                }
                if m.n == 0 {
                    return Err(parse_error(text, m.p.span().start, "morita.n must be positive"));
                }
                Some((m.n, matrix(text, m.p.span().start, m.p.get_ref(), Some(m.n * d), "morita.p")?))
            }
        };
        let downward = match &raw.downward {
            None => None,
            Some(w) => Some((
                matrix(text, w.p.span().start, w.p.get_ref(), None, "downward.p")?,
                matrix(text, w.q.span().start, w.q.get_ref(), None, "downward.q")?,
            )),
        };
        let tol = raw.tol.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0 && tol < 1e-2) {
            return Err(parse_error(text, 0, format!("tol must lie in (0, 1e-2), got {tol}")));
        }
        Ok(Scenario {
            name: raw.name,
            ambient_dim: d,
            generators_a,
            generators_c,
            expectation,
            morita,
            downward,
            construction,
            duality: raw.duality.unwrap_or(true),
            depth: raw.depth.unwrap_or(DEFAULT_DEPTH),
            tol,
            seed: raw.seed.unwrap_or(0),
        })
    }

    /// A file path, or the name of a built-in scenario.
    pub fn load(path_or_name: &str) -> Result<Scenario> {
        let path = std::path::Path::new(path_or_name);
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{path_or_name}: {e}")))?;
            return Scenario::parse(&text);
        }
        match builtin(path_or_name) {
            Some(b) => Scenario::parse(b.text),
            None => Err(Error::Io(format!("{path_or_name}: no such file or built-in scenario"))),
        }
    }
}

pub struct Builtin {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const BUILTINS: &[Builtin] = &[
    Builtin {
        name: "s1_trace_m2",
        summary: "scalars ⊂ M₂ with the trace-preserving expectation (index 4)",
        text: include_str!("../../../scenarios/s1_trace_m2.toml"),
    },
    Builtin {
        name: "s2_pinching_d2",
        summary: "diagonal D₂ ⊂ M₂ with the pinching (index 2), downward at p = q = |+⟩⟨+|",
        text: include_str!("../../../scenarios/s2_pinching_d2.toml"),
    },
    Builtin {
        name: "s3_corner_s1",
        summary: "the corner partner of s1 for n = 2, p = f₁₁ ⊗ 1",
        text: include_str!("../../../scenarios/s3_corner_s1.toml"),
    },
    Builtin {
        name: "s4_tower_bimodule",
        summary: "D₂ ⊂ M₂ against B₁ ⊂ B₂ of its Jones tower, with E^X = G",
        text: include_str!("../../../scenarios/s4_tower_bimodule.toml"),
    },
];

pub fn builtin(name: &str) -> Option<&'static Builtin> {
    BUILTINS.iter().find(|b| b.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_parse() {
        for b in BUILTINS {
            let s = Scenario::parse(b.text).unwrap_or_else(|e| panic!("{}: {e}", b.name));
            assert_eq!(s.name, b.name);
        }
    }

    #[test]
    fn complex_and_real_entries() {
        let s = Scenario::parse("name = \"x\"\nambient_dim = 2\ngenerators_A = [[[1, [0, 1]], [0, 0]]]\n").unwrap();
        match s.generators_a {
            AlgebraSpec::Generated(g) => assert_eq!(g[0][(0, 1)], C64::new(0.0, 1.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn errors_carry_positions() {
        let e = Scenario::parse("name = \"x\"\nambient_dim = 2\ngenerators_A = [[[1, 0]]]\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = Scenario::parse("name = \"x\"\nambient_dim = 2\nbogus = 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = Scenario::parse("name = \"x\"\nambient_dim = \n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e:?}");
    }
}
