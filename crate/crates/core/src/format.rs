//! JSON problem and result files.
//!
//! A problem file lists the instance the way the direct API does:
//!
//! ```text
//! { "version": 1, "n": 2, "m": 3, "nb": 2,
//!   "c": [1, 0], "h": [-1, 0, 0],
//!   "bl": ["-inf", "-inf"], "bu": ["inf", "inf"],
//!   "G": { "rows": [1, 2], "cols": [0, 1], "vals": [1, 1] },
//!   "mGzero": 0, "mGnonnegative": 0, "socG": [3], "expG": 0, "dual_expG": 0 }
//! ```
//!
//! Rows are laid out zero, nonnegative, second-order, exponential, dual
//! exponential, then the optional `rsocG` blocks. Variables past `nb` need a
//! `primal_cones` list of `{"kind", "dim"}` entries.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::engine::{Method, SolveResult, SolverOptions};
use crate::error::{Result, SolverError};
use crate::linalg::SparseMatrix;
use crate::model::{ConeKind, ConeSpec, ConicProblem};

pub const FORMAT_VERSION: u32 = 1;

const KNOWN_KEYS: [&str; 17] = [
    "version",
    "n",
    "m",
    "nb",
    "c",
    "h",
    "bl",
    "bu",
    "G",
    "mGzero",
    "mGnonnegative",
    "socG",
    "expG",
    "dual_expG",
    "rsocG",
    "primal_cones",
    "name",
];

/// A bound that serializes infinities as `"inf"` and `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bound(f64);

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Bound {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Bound(v)),
            Raw::Str(s) => match s.as_str() {
                "inf" | "+inf" => Ok(Bound(f64::INFINITY)),
                "-inf" => Ok(Bound(f64::NEG_INFINITY)),
                _ => Err(serde::de::Error::custom(format!("bad bound {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PrimalBlock {
    kind: String,
    dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ProblemFile {
    #[serde(default = "default_version")]
    version: u32,
    n: usize,
    m: usize,
    nb: usize,
    c: Vec<f64>,
    h: Vec<f64>,
    bl: Vec<Bound>,
    bu: Vec<Bound>,
    #[serde(default)]
    G: Triplets,
    #[serde(default)]
    mGzero: usize,
    #[serde(default)]
    mGnonnegative: usize,
    #[serde(default)]
    socG: Vec<usize>,
    #[serde(default)]
    expG: usize,
    #[serde(default)]
    dual_expG: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    rsocG: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    primal_cones: Vec<PrimalBlock>,
}

fn default_version() -> u32 {
    FORMAT_VERSION
}

fn parse_error(msg: impl Into<String>) -> SolverError {
    SolverError::Parse(msg.into())
}

fn kind_from_name(name: &str) -> Option<ConeKind> {
    [
        ConeKind::Zero,
        ConeKind::NonNeg,
        ConeKind::SecondOrder,
        ConeKind::RotatedSecondOrder,
        ConeKind::Exponential,
        ConeKind::DualExponential,
    ]
    .into_iter()
    .find(|k| k.name() == name)
}

fn identity(name: &str, lhs: usize, rhs: usize) -> Result<()> {
    if lhs != rhs {
        return Err(parse_error(format!("{name} does not hold: {lhs} != {rhs}")));
    }
    Ok(())
}

impl ProblemFile {
    fn into_problem(self) -> Result<ConicProblem> {
        if self.version != FORMAT_VERSION {
            return Err(parse_error(format!("unsupported format version {}", self.version)));
        }
        identity("len(c) = n", self.c.len(), self.n)?;
        identity("len(h) = m", self.h.len(), self.m)?;
        identity("len(bl) = nb", self.bl.len(), self.nb)?;
        identity("len(bu) = nb", self.bu.len(), self.nb)?;
        let row_total = self.mGzero
            + self.mGnonnegative
            + self.socG.iter().sum::<usize>()
            + 3 * self.expG
            + 3 * self.dual_expG
            + self.rsocG.iter().sum::<usize>();
        identity(
            "mGzero + mGnonnegative + sum(socG) + 3 expG + 3 dual_expG + sum(rsocG) = m",
            row_total,
            self.m,
        )?;
        if self.nb > self.n {
            return Err(parse_error(format!("nb <= n does not hold: {} > {}", self.nb, self.n)));
        }
        let primal_total: usize = self.primal_cones.iter().map(|b| b.dim).sum();
        identity("nb + sum(primal_cones dims) = n", self.nb + primal_total, self.n)?;
        identity("len(G.cols) = len(G.rows)", self.G.cols.len(), self.G.rows.len())?;
        identity("len(G.vals) = len(G.rows)", self.G.vals.len(), self.G.rows.len())?;

        let mut dual_cones = Vec::new();
        if self.mGzero > 0 {
            dual_cones.push(ConeSpec::zero(self.mGzero));
        }
        if self.mGnonnegative > 0 {
            dual_cones.push(ConeSpec::nonneg(self.mGnonnegative));
        }
        for &d in &self.socG {
            dual_cones.push(ConeSpec::soc(d).map_err(|e| parse_error(format!("socG: {e}")))?);
        }
        dual_cones.extend((0..self.expG).map(|_| ConeSpec::exp()));
        dual_cones.extend((0..self.dual_expG).map(|_| ConeSpec::dual_exp()));
        for &d in &self.rsocG {
            dual_cones.push(ConeSpec::rsoc(d).map_err(|e| parse_error(format!("rsocG: {e}")))?);
        }
        let primal_cones = self
            .primal_cones
            .iter()
            .map(|b| {
                let kind = kind_from_name(&b.kind)
                    .ok_or_else(|| parse_error(format!("unknown primal cone kind {:?}", b.kind)))?;
                ConeSpec::new(kind, b.dim).map_err(|e| parse_error(format!("primal_cones: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;

        let triplets = self
            .G
            .rows
            .iter()
            .zip(&self.G.cols)
            .zip(&self.G.vals)
            .map(|((&i, &j), &v)| (i, j, v));
        let g = SparseMatrix::from_triplets(self.m, self.n, triplets)
            .map_err(|e| parse_error(format!("G: {e}")))?;
        ConicProblem::new(
            self.c,
            g,
            self.h,
            self.bl.into_iter().map(|b| b.0).collect(),
            self.bu.into_iter().map(|b| b.0).collect(),
            primal_cones,
            dual_cones,
        )
        .map_err(|e| parse_error(e.to_string()))
    }

    fn from_problem(p: &ConicProblem) -> Result<Self> {
        if !p.has_canonical_row_layout() {
            return Err(SolverError::InvalidInput(
                "row blocks are not in zero, nonneg, soc, exp, dual_exp, rsoc order".into(),
            ));
        }
        if p.primal_cones().iter().chain(p.dual_cones()).any(|c| c.scale.iter().any(|&s| s != 1.0)) {
            return Err(SolverError::InvalidInput("scaled cone blocks cannot be written".into()));
        }
        let dims = |k: ConeKind| -> Vec<usize> {
            p.dual_cones().iter().filter(|c| c.kind == k).map(|c| c.dim).collect()
        };
        let triplets = p.g().triplets();
        Ok(ProblemFile {
            version: FORMAT_VERSION,
            n: p.num_vars(),
            m: p.num_rows(),
            nb: p.num_box_vars(),
            c: p.c().to_vec(),
            h: p.h().to_vec(),
            bl: p.lower().iter().map(|&v| Bound(v)).collect(),
            bu: p.upper().iter().map(|&v| Bound(v)).collect(),
            G: Triplets {
                rows: triplets.iter().map(|t| t.0).collect(),
                cols: triplets.iter().map(|t| t.1).collect(),
                vals: triplets.iter().map(|t| t.2).collect(),
            },
            mGzero: dims(ConeKind::Zero).iter().sum(),
            mGnonnegative: dims(ConeKind::NonNeg).iter().sum(),
            socG: dims(ConeKind::SecondOrder),
            expG: dims(ConeKind::Exponential).len(),
            dual_expG: dims(ConeKind::DualExponential).len(),
            rsocG: dims(ConeKind::RotatedSecondOrder),
            primal_cones: p
                .primal_cones()
                .iter()
                .map(|c| PrimalBlock {
                    kind: c.kind.name().to_string(),
                    dim: c.dim,
                })
                .collect(),
        })
    }
}

/// Parses a problem from JSON text. Unknown top-level keys are logged and ignored.
pub fn parse_problem_str(text: &str) -> Result<ConicProblem> {
    let value: Value = serde_json::from_str(text).map_err(|e| parse_error(e.to_string()))?;
    let Value::Object(map) = &value else {
        return Err(parse_error("problem file must be a JSON object"));
    };
    for key in map.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            log::warn!("ignoring unknown key {key:?} in problem file");
        }
    }
    let file: ProblemFile = serde_json::from_value(value).map_err(|e| parse_error(e.to_string()))?;
    file.into_problem()
}

pub fn parse_problem(path: &Path) -> Result<ConicProblem> {
    let text = std::fs::read_to_string(path)?;
    parse_problem_str(&text)
}

/// Writes a problem as pretty-printed JSON. Floats use the shortest
/// representation that parses back to the same value.
pub fn serialize_problem(p: &ConicProblem) -> Result<String> {
    let file = ProblemFile::from_problem(p)?;
    serde_json::to_string_pretty(&file).map_err(|e| SolverError::InvalidInput(e.to_string()))
}

pub fn write_problem(p: &ConicProblem, path: &Path) -> Result<()> {
    std::fs::write(path, serialize_problem(p)? + "\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionsEcho {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub time_limit: f64,
    pub max_iter: Option<usize>,
    pub method: String,
    pub use_preconditioner: bool,
    pub use_adaptive_restart: bool,
    pub use_kkt_restart: bool,
    pub kkt_restart_freq: usize,
    pub use_duality_gap_restart: bool,
    pub duality_gap_restart_freq: usize,
    pub print_freq: usize,
    pub verbose: u8,
}

impl From<&SolverOptions> for OptionsEcho {
    fn from(o: &SolverOptions) -> Self {
        OptionsEcho {
            rel_tol: o.rel_tol,
            abs_tol: o.abs_tol,
            time_limit: o.time_limit,
            max_iter: o.max_iter,
            method: match o.method {
                Method::Average => "average",
                Method::Halpern => "halpern",
            }
            .to_string(),
            use_preconditioner: o.use_preconditioner,
            use_adaptive_restart: o.use_adaptive_restart,
            use_kkt_restart: o.use_kkt_restart,
            kkt_restart_freq: o.kkt_restart_freq,
            use_duality_gap_restart: o.use_duality_gap_restart,
            duality_gap_restart_freq: o.duality_gap_restart_freq,
            print_freq: o.print_freq,
            verbose: o.verbose,
        }
    }
}

/// Contents of a result file. Non-finite numbers are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ResultFile {
    pub exit_code: i32,
    pub exit_status: String,
    pub pObj: Option<f64>,
    pub dObj: Option<f64>,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_time_sec: Option<f64>,
    pub primal: Vec<Option<f64>>,
    pub dual: Vec<Option<f64>>,
    pub slack: Vec<Option<f64>>,
    pub options: OptionsEcho,
    /// Solver counters that do not depend on wall time.
    pub stats: BTreeMap<String, f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn finite_vec(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|&x| finite(x)).collect()
}

impl ResultFile {
    /// Builds the file contents. `with_timing = false` drops the wall-clock
    /// field so that repeated runs produce identical bytes.
    pub fn new(result: &SolveResult, options: &SolverOptions, with_timing: bool) -> Self {
        let s = &result.stats;
        let stats = BTreeMap::from([
            ("restarts".to_string(), s.restarts as f64),
            ("line_search_rejections".to_string(), s.line_search_rejections as f64),
            ("kkt_fallbacks".to_string(), s.kkt_fallbacks as f64),
            ("matvecs_g".to_string(), (s.matvecs.pdhg_g + s.matvecs.aux_g) as f64),
            ("matvecs_gt".to_string(), (s.matvecs.pdhg_gt + s.matvecs.aux_gt) as f64),
            ("final_eta".to_string(), s.final_eta),
            ("final_omega".to_string(), s.final_omega),
        ]);
        ResultFile {
            exit_code: result.exit.code(),
            exit_status: result.exit.status().to_string(),
            pObj: finite(result.primal_obj),
            dObj: finite(result.dual_obj),
            iterations: s.iterations,
            solve_time_sec: with_timing.then_some(s.solve_time_sec),
            primal: finite_vec(&result.x),
            dual: finite_vec(&result.y),
            slack: finite_vec(&result.slack),
            options: options.into(),
            stats,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result file serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| parse_error(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"n": 1, "m": 0, "nb": 1, "c": [-1], "h": [], "bl": [0], "bu": [1],
            "G": {"rows": [], "cols": [], "vals": []},
            "mGzero": 0, "mGnonnegative": 0, "socG": [], "expG": 0, "dual_expG": 0}"#
    }

    #[test]
    fn minimal_box_lp() {
        let p = parse_problem_str(minimal()).unwrap();
        assert_eq!(p.num_vars(), 1);
        assert_eq!(p.num_rows(), 0);
        assert_eq!(p.lower(), &[0.0]);
        assert_eq!(p.upper(), &[1.0]);
        assert!(p.dual_cones().is_empty());
    }

    #[test]
    fn soc_layout_follows_block_order() {
        let text = r#"{"n": 1, "m": 9, "nb": 1, "c": [0], "h": [0,0,0,0,0,0,0,0,0],
            "bl": ["-inf"], "bu": ["inf"], "G": {"rows": [], "cols": [], "vals": []},
            "mGzero": 1, "mGnonnegative": 1, "socG": [3, 4], "expG": 0, "dual_expG": 0}"#;
        let p = parse_problem_str(text).unwrap();
        let kinds: Vec<(ConeKind, usize)> = p.dual_cones().iter().map(|c| (c.kind, c.dim)).collect();
        assert_eq!(
            kinds,
            vec![
                (ConeKind::Zero, 1),
                (ConeKind::NonNeg, 1),
                (ConeKind::SecondOrder, 3),
                (ConeKind::SecondOrder, 4)
            ]
        );
        assert_eq!(p.lower(), &[f64::NEG_INFINITY]);
    }

    #[test]
    fn dimension_errors_name_the_identity() {
        let text = minimal().replace("\"m\": 0", "\"m\": 2");
        let err = parse_problem_str(&text).unwrap_err().to_string();
        assert!(err.contains("len(h) = m"), "{err}");
        let text = minimal().replace("\"bl\": [0]", "\"bl\": [0, 0]");
        let err = parse_problem_str(&text).unwrap_err().to_string();
        assert!(err.contains("len(bl) = nb"), "{err}");
        let text = minimal().replace("\"h\": []", "\"h\": [1]").replace("\"m\": 0", "\"m\": 1");
        let err = parse_problem_str(&text).unwrap_err().to_string();
        assert!(err.contains("sum(socG)"), "{err}");
        let text = minimal().replace("\"nb\": 1", "\"nb\": 0").replace("\"bl\": [0], \"bu\": [1]", "\"bl\": [], \"bu\": []");
        let err = parse_problem_str(&text).unwrap_err().to_string();
        assert!(err.contains("primal_cones"), "{err}");
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let text = minimal().replacen('{', "{\"comment\": \"hi\", ", 1);
        assert!(parse_problem_str(&text).is_ok());
    }

    #[test]
    fn bad_bound_string_rejected() {
        let text = minimal().replace("\"bu\": [1]", "\"bu\": [\"huge\"]");
        assert!(matches!(parse_problem_str(&text), Err(SolverError::Parse(_))));
    }

    #[test]
    fn round_trip_with_every_block_kind() {
        let g = SparseMatrix::from_triplets(
            16,
            5,
            [(0, 0, 0.1), (3, 1, -1.0 / 3.0), (7, 2, 1e-300), (15, 4, 2.5e17), (10, 3, -0.0)],
        )
        .unwrap();
        let p = ConicProblem::new(
            vec![1.0 / 7.0, -2.0, 0.0, 1e-17, 3.0],
            g,
            (0..16).map(|i| (i as f64).sqrt()).collect(),
            vec![f64::NEG_INFINITY, -1.5],
            vec![0.3, f64::INFINITY],
            vec![ConeSpec::nonneg(1), ConeSpec::soc(2).unwrap()],
            vec![
                ConeSpec::zero(1),
                ConeSpec::nonneg(2),
                ConeSpec::soc(3).unwrap(),
                ConeSpec::exp(),
                ConeSpec::dual_exp(),
                ConeSpec::rsoc(4).unwrap(),
            ],
        )
        .unwrap();
        let text = serialize_problem(&p).unwrap();
        assert!(text.contains("\"-inf\""));
        let q = parse_problem_str(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(serialize_problem(&q).unwrap(), text);
    }

    #[test]
    fn non_canonical_layout_not_written() {
        let p = ConicProblem::new(
            vec![0.0],
            SparseMatrix::zeros(2, 1),
            vec![0.0, 0.0],
            vec![0.0],
            vec![1.0],
            vec![],
            vec![ConeSpec::nonneg(1), ConeSpec::zero(1)],
        )
        .unwrap();
        assert!(serialize_problem(&p).is_err());
    }
}
