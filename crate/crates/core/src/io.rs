//! Problem files and Matrix Market payloads.
//!
//! A problem file is JSON:
//!
//! ```json
//! {
//!   "form": "splitting",
//!   "A": [[1.0, 0.0], [0.0, 1.0]],
//!   "f": {"kind": "quad_affine", "C": [[1.0, 2.0]], "d": [0.5]},
//!   "g": {"kind": "l1", "mu": 0.1, "dim": 2}
//! }
//! ```
//!
//! General-form files add `"B"` and `"b"`. Any matrix may be given inline as
//! nested row arrays or as `{"mtx": "relative/path.mtx"}`, resolved against
//! the directory of the JSON file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{Form, ProblemInstance};
use crate::prox::ProxFunction;
use crate::serde_arrays::array2::from_rows;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixPayload {
    Inline(Vec<Vec<f64>>),
    MatrixMarket { mtx: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxSpec {
    Zero {
        dim: usize,
    },
    L1 {
        mu: f64,
        dim: usize,
    },
    QuadAffine {
        #[serde(rename = "C")]
        c: MatrixPayload,
        d: Vec<f64>,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub form: Form,
    #[serde(rename = "A")]
    pub a: MatrixPayload,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b_matrix: Option<MatrixPayload>,
    #[serde(rename = "b", default, skip_serializing_if = "Option::is_none")]
    pub rhs: Option<Vec<f64>>,
    pub f: ProxSpec,
    pub g: ProxSpec,
}

/// Where matrices go when a problem is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixStorage {
    Inline,
    /// Sibling `.mtx` files named `<stem>.<field>.mtx`.
    MatrixMarket,
}

fn rows_of(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

struct Writer<'a> {
    storage: MatrixStorage,
    dir: &'a Path,
    stem: &'a str,
}

impl Writer<'_> {
    fn matrix(&self, field: &str, m: &Array2<f64>) -> Result<MatrixPayload> {
        match self.storage {
            MatrixStorage::Inline => Ok(MatrixPayload::Inline(rows_of(m))),
            MatrixStorage::MatrixMarket => {
                let name = format!("{}.{field}.mtx", self.stem);
                write_mtx(&self.dir.join(&name), m)?;
                Ok(MatrixPayload::MatrixMarket { mtx: name })
            }
        }
    }

    fn prox(&self, field: &str, f: &ProxFunction) -> Result<ProxSpec> {
        Ok(match f {
            ProxFunction::Zero { dim } => ProxSpec::Zero { dim: *dim },
            ProxFunction::L1(l) => ProxSpec::L1 {
                mu: l.mu(),
                dim: f.dim(),
            },
            ProxFunction::QuadAffine(q) => ProxSpec::QuadAffine {
                c: self.matrix(&format!("{field}.C"), q.c())?,
                d: q.d().to_vec(),
            },
            ProxFunction::Box(b) => ProxSpec::Box {
                lo: b.lo().to_vec(),
                hi: b.hi().to_vec(),
            },
            ProxFunction::Custom(_) => {
                return Err(Error::Format(format!(
                    "function `{field}` is a custom operator and cannot be serialized"
                )))
            }
        })
    }

    fn problem(&self, p: &ProblemInstance) -> Result<ProblemFile> {
        Ok(ProblemFile {
            form: p.form(),
            a: self.matrix("A", p.a())?,
            b_matrix: p.b_matrix().map(|b| self.matrix("B", b)).transpose()?,
            rhs: p.rhs().map(|b| b.to_vec()),
            f: self.prox("f", p.f())?,
            g: self.prox("g", p.g())?,
        })
    }
}

/// Inline JSON form of a problem.
pub fn to_problem_file(p: &ProblemInstance) -> Result<ProblemFile> {
    Writer {
        storage: MatrixStorage::Inline,
        dir: Path::new("."),
        stem: "",
    }
    .problem(p)
}

pub fn problem_to_string(p: &ProblemInstance) -> Result<String> {
    Ok(serde_json::to_string_pretty(&to_problem_file(p)?)?)
}

pub fn write_problem(path: &Path, p: &ProblemInstance, storage: MatrixStorage) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("problem")
        .to_string();
    let file = Writer {
        storage,
        dir,
        stem: &stem,
    }
    .problem(p)?;
    let text = serde_json::to_string_pretty(&file)?;
    fs::write(path, text + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

struct Reader<'a> {
    base: &'a Path,
}

impl Reader<'_> {
    fn matrix(&self, field: &str, m: &MatrixPayload) -> Result<Array2<f64>> {
        match m {
            MatrixPayload::Inline(rows) => {
                from_rows(rows.clone()).map_err(|e| Error::Format(format!("{field}: {e}")))
            }
            MatrixPayload::MatrixMarket { mtx } => read_mtx(&self.base.join(mtx)),
        }
    }

    fn prox(&self, field: &str, spec: &ProxSpec) -> Result<ProxFunction> {
        match spec {
            ProxSpec::Zero { dim } => Ok(ProxFunction::zero(*dim)),
            ProxSpec::L1 { mu, dim } => ProxFunction::l1(*mu, *dim),
            ProxSpec::QuadAffine { c, d } => ProxFunction::quad_affine(
                self.matrix(&format!("{field}.C"), c)?,
                Array1::from(d.clone()),
            ),
            ProxSpec::Box { lo, hi } => {
                ProxFunction::boxed(Array1::from(lo.clone()), Array1::from(hi.clone()))
            }
        }
    }

    fn problem(&self, file: &ProblemFile) -> Result<ProblemInstance> {
        let f = self.prox("f", &file.f)?;
        let g = self.prox("g", &file.g)?;
        let a = self.matrix("A", &file.a)?;
        match (file.form, &file.b_matrix, &file.rhs) {
            (Form::Splitting, None, None) => ProblemInstance::splitting(f, g, a),
            (Form::Splitting, _, _) => Err(Error::Format(
                "splitting-form problems must not carry \"B\" or \"b\"".into(),
            )),
            (Form::General, Some(b), Some(rhs)) => {
                ProblemInstance::general(f, g, a, self.matrix("B", b)?, Array1::from(rhs.clone()))
            }
            (Form::General, _, _) => Err(Error::Format(
                "general-form problems need both \"B\" and \"b\"".into(),
            )),
        }
    }
}

/// Parses a problem; `.mtx` references are resolved against `base_dir`.
pub fn problem_from_str(text: &str, base_dir: &Path) -> Result<ProblemInstance> {
    let file: ProblemFile = serde_json::from_str(text)?;
    Reader { base: base_dir }.problem(&file)
}

pub fn read_problem(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base: PathBuf = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    problem_from_str(&text, &base)
}

/// Dense `array real general` Matrix Market text (column-major values).
pub fn mtx_to_string(m: &Array2<f64>) -> String {
    let (r, c) = m.dim();
    let mut out = String::from("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{r} {c}");
    for j in 0..c {
        for i in 0..r {
            // `{:?}` prints the shortest representation that round-trips
            let _ = writeln!(out, "{:?}", m[[i, j]]);
        }
    }
    out
}

pub fn write_mtx(path: &Path, m: &Array2<f64>) -> Result<()> {
    fs::write(path, mtx_to_string(m)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_mtx(path: &Path) -> Result<Array2<f64>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_mtx(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Reads `array` or `coordinate` real matrices (`general` or `symmetric`).
pub fn parse_mtx(text: &str) -> Result<Array2<f64>> {
    let bad = |msg: String| Error::Format(msg);
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| bad("empty Matrix Market file".into()))?;
    let fields: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(bad(format!("unrecognized Matrix Market header `{header}`")));
    }
    let (layout, field, symmetry) = (&fields[2], &fields[3], &fields[4]);
    if field != "real" && field != "integer" && field != "double" {
        return Err(bad(format!("unsupported field `{field}`")));
    }
    let symmetric = match symmetry.as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(bad(format!("unsupported symmetry `{other}`"))),
    };
    let mut body = lines
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('%'));
    let size_line = body.next().ok_or_else(|| bad("missing size line".into()))?;
    let size: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| bad(format!("bad size line `{size_line}`")))
        })
        .collect::<Result<_>>()?;
    let num = |t: &str| -> Result<f64> { t.parse().map_err(|_| bad(format!("bad number `{t}`"))) };

    match (layout.as_str(), size.as_slice()) {
        ("array", &[r, c]) => {
            let mut m = Array2::<f64>::zeros((r, c));
            let mut vals = body.flat_map(str::split_whitespace);
            for j in 0..c {
                let start = if symmetric { j } else { 0 };
                for i in start..r {
                    let tok = vals
                        .next()
                        .ok_or_else(|| bad("too few array entries".into()))?;
                    m[[i, j]] = num(tok)?;
                    if symmetric {
                        m[[j, i]] = m[[i, j]];
                    }
                }
            }
            if vals.next().is_some() {
                return Err(bad("too many array entries".into()));
            }
            Ok(m)
        }
        ("coordinate", &[r, c, nnz]) => {
            let mut m = Array2::<f64>::zeros((r, c));
            let mut count = 0;
            for line in body {
                let t: Vec<&str> = line.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(bad(format!("bad coordinate entry `{line}`")));
                }
                let i: usize = t[0]
                    .parse()
                    .map_err(|_| bad(format!("bad row index `{}`", t[0])))?;
                let j: usize = t[1]
                    .parse()
                    .map_err(|_| bad(format!("bad column index `{}`", t[1])))?;
                if i == 0 || j == 0 || i > r || j > c {
                    return Err(bad(format!("entry ({i}, {j}) outside a {r}x{c} matrix")));
                }
                let v = num(t[2])?;
                m[[i - 1, j - 1]] += v;
                if symmetric && i != j {
                    m[[j - 1, i - 1]] += v;
                }
                count += 1;
            }
            if count != nnz {
                return Err(bad(format!("expected {nnz} entries, found {count}")));
            }
            Ok(m)
        }
        _ => Err(bad(format!(
            "size line `{size_line}` does not match layout `{layout}`"
        ))),
    }
}
