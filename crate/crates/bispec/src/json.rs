//! JSON documents. Complex numbers are `[re, im]` pairs and matrices are
//! stored row-major. Maps use sorted keys, so equal inputs serialize to
//! identical bytes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use bispec_core::band::{MarchStep, Weight};
use bispec_core::moments::{MomentBlocks, Triple};
use bispec_core::recovery::{RecoveryReport, StepReport};
use bispec_core::signal::{RepSpec, Signal};
use bispec_core::{c64, CMat, C64};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let mut data = Vec::with_capacity(m.len());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                data.push(pair(m[(r, c)]));
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> std::result::Result<CMat, String> {
        if self.data.len() != self.rows * self.cols {
            return Err(format!(
                "matrix declares {}x{} but holds {} entries",
                self.rows,
                self.cols,
                self.data.len()
            ));
        }
        Ok(CMat::from_row_iterator(
            self.rows,
            self.cols,
            self.data.iter().map(|&[re, im]| c64(re, im)),
        ))
    }
}

pub fn pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandJson {
    pub l: usize,
    pub block: MatrixJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalJson {
    pub format_version: u32,
    pub bands: Vec<BandJson>,
}

impl SignalJson {
    pub fn from_signal(f: &Signal) -> Self {
        SignalJson {
            format_version: FORMAT_VERSION,
            bands: f
                .iter()
                .map(|(l, a)| BandJson {
                    l,
                    block: MatrixJson::from_matrix(a),
                })
                .collect(),
        }
    }

    pub fn to_signal(&self) -> std::result::Result<Signal, String> {
        check_version(self.format_version)?;
        let spec = RepSpec::new(self.bands.iter().map(|b| (b.l, b.block.cols)).collect())
            .map_err(|e| e.to_string())?;
        let blocks = self
            .bands
            .iter()
            .map(|b| b.block.to_matrix())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Signal::new(spec, blocks).map_err(|e| e.to_string())
    }
}

fn check_version(v: u32) -> std::result::Result<(), String> {
    if v == FORMAT_VERSION {
        Ok(())
    } else {
        Err(format!(
            "unsupported format_version {v} (expected {FORMAT_VERSION})"
        ))
    }
}

pub fn triple_key(t: Triple) -> String {
    format!("{},{},{}", t.0, t.1, t.2)
}

pub fn parse_key<const N: usize>(key: &str) -> Option<[usize; N]> {
    let parts: Vec<usize> = key
        .split(',')
        .map(|s| s.trim().parse().ok())
        .collect::<Option<_>>()?;
    parts.try_into().ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsJson {
    pub format_version: u32,
    pub m1: Vec<[f64; 2]>,
    /// Keyed by `l`.
    pub m2: BTreeMap<String, MatrixJson>,
    /// Keyed by `"l1,l2,l3"`.
    pub m3: BTreeMap<String, MatrixJson>,
}

impl MomentsJson {
    pub fn from_moments(m: &MomentBlocks) -> Self {
        MomentsJson {
            format_version: FORMAT_VERSION,
            m1: m.m1.iter().map(|&z| pair(z)).collect(),
            m2: m
                .m2
                .iter()
                .map(|(l, g)| (l.to_string(), MatrixJson::from_matrix(g)))
                .collect(),
            m3: m
                .m3
                .iter()
                .map(|(&t, b)| (triple_key(t), MatrixJson::from_matrix(b)))
                .collect(),
        }
    }

    pub fn to_moments(&self) -> std::result::Result<MomentBlocks, String> {
        check_version(self.format_version)?;
        let mut out = MomentBlocks {
            m1: self.m1.iter().map(|&[re, im]| c64(re, im)).collect(),
            ..Default::default()
        };
        for (k, v) in &self.m2 {
            let [l] = parse_key::<1>(k).ok_or_else(|| format!("bad m2 key {k:?}"))?;
            out.m2.insert(l, v.to_matrix()?);
        }
        for (k, v) in &self.m3 {
            let [a, b, c] = parse_key::<3>(k).ok_or_else(|| format!("bad m3 key {k:?}"))?;
            out.m3.insert((a, b, c), v.to_matrix()?);
        }
        Ok(out)
    }
}

/// Bispectrum blocks keyed by `"l1,l2"`.
pub fn bispectrum_json(b: &BTreeMap<(usize, usize), CMat>) -> BTreeMap<String, MatrixJson> {
    b.iter()
        .map(|(&(l1, l2), m)| (format!("{l1},{l2}"), MatrixJson::from_matrix(m)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarchStepJson {
    pub left: Vec<i64>,
    pub right: Vec<i64>,
    pub target: Vec<i64>,
    pub co_targets: Vec<Vec<i64>>,
    pub justification: String,
    pub prerequisites: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub right_decomposition: Vec<Vec<i64>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub target_decomposition: Vec<Vec<i64>>,
}

fn coords(w: &Weight) -> Vec<i64> {
    w.coords().to_vec()
}

impl MarchStepJson {
    pub fn from_step(s: &MarchStep) -> Self {
        MarchStepJson {
            left: coords(&s.left),
            right: coords(&s.right),
            target: coords(&s.target),
            co_targets: s.co_targets.iter().map(coords).collect(),
            justification: s.justification.name().to_string(),
            prerequisites: s.prerequisites.clone(),
            right_decomposition: s.right_decomposition.iter().map(coords).collect(),
            target_decomposition: s.target_decomposition.iter().map(coords).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepJson {
    pub ell: usize,
    pub residual: f64,
    pub rank: usize,
    pub rows: usize,
    pub condition: f64,
}

impl From<&StepReport> for StepJson {
    fn from(s: &StepReport) -> Self {
        StepJson {
            ell: s.ell,
            residual: s.residual,
            rank: s.rank,
            rows: s.rows,
            condition: s.condition,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignJson {
    pub choice: String,
    pub winner_residual: f64,
    pub loser_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub structure: String,
    pub gram_eigenvalues: [f64; 3],
    pub unitary_residual: Option<f64>,
    pub sign: SignJson,
    pub steps: Vec<StepJson>,
    pub moment_residual: f64,
    /// Quaternion `[w, x, y, z]` of the registering rotation.
    pub align: Option<[f64; 4]>,
    pub rel_error: Option<f64>,
    pub recovered: SignalJson,
}

impl ReportJson {
    pub fn from_report(r: &RecoveryReport) -> Self {
        ReportJson {
            structure: r.structure.name().to_string(),
            gram_eigenvalues: r.gram_eigenvalues,
            unitary_residual: r.unitary_residual,
            sign: SignJson {
                choice: r.sign.choice.symbol().to_string(),
                winner_residual: r.sign.winner_residual,
                loser_residual: r.sign.loser_residual,
            },
            steps: r.steps.iter().map(StepJson::from).collect(),
            moment_residual: r.moment_residual,
            align: r.align.map(|g| g.quaternion()),
            rel_error: r.rel_error,
            recovered: SignalJson::from_signal(&r.recovered),
        }
    }
}

/// Pretty JSON followed by a newline.
pub fn to_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes `value` to `path`, or to stdout when `path` is `None`.
pub fn emit<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let bytes = to_bytes(value)?;
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(&bytes)
                .map_err(|e| CliError::io("<stdout>", e))?;
            out.flush().map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

pub fn read<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
