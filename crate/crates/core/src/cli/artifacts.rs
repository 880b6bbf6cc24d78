//! Serializable mirrors of the pipeline artifacts, the content-hash cache,
//! and the CSV exports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::complex::IntMat;
use crate::connections::{ConnectionData, FlowLine};
use crate::critical::{CriticalPoint, CriticalSet};
use crate::flow::{Direction, Terminal, Trajectory};
use crate::geometry::DeckWord;
use crate::geometry::TangentFrame;

use super::CliError;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPointJson {
    pub id: usize,
    pub location: Vec<f64>,
    pub value: f64,
    pub index: usize,
    pub eigenvalues: Vec<f64>,
    pub unstable_frame: Vec<Vec<f64>>,
    pub stable_frame: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalSetJson {
    pub merge_tol: f64,
    pub points: Vec<CriticalPointJson>,
}

impl CriticalSetJson {
    pub fn from_set(cs: &CriticalSet) -> Self {
        CriticalSetJson {
            merge_tol: cs.merge_tol,
            points: cs
                .points
                .iter()
                .map(|p| CriticalPointJson {
                    id: p.id,
                    location: p.location.as_slice().to_vec(),
                    value: p.value,
                    index: p.index,
                    eigenvalues: p.eigenvalues.clone(),
                    unstable_frame: p
                        .unstable_frame
                        .vectors
                        .iter()
                        .map(|v| v.as_slice().to_vec())
                        .collect(),
                    stable_frame: p
                        .stable_frame
                        .vectors
                        .iter()
                        .map(|v| v.as_slice().to_vec())
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn into_set(self) -> CriticalSet {
        let points = self
            .points
            .into_iter()
            .map(|p| {
                let location = DVector::from_vec(p.location);
                CriticalPoint {
                    id: p.id,
                    value: p.value,
                    index: p.index,
                    eigenvalues: p.eigenvalues,
                    unstable_frame: TangentFrame {
                        base: location.clone(),
                        vectors: p
                            .unstable_frame
                            .into_iter()
                            .map(DVector::from_vec)
                            .collect(),
                        orientation_sign: 1,
                    },
                    stable_frame: TangentFrame {
                        base: location.clone(),
                        vectors: p.stable_frame.into_iter().map(DVector::from_vec).collect(),
                        orientation_sign: 1,
                    },
                    location,
                }
            })
            .collect();
        CriticalSet {
            points,
            merge_tol: self.merge_tol,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowLineJson {
    pub from: usize,
    pub to: usize,
    pub sign: i64,
    pub deck: Vec<i64>,
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionDataJson {
    pub lines: Vec<FlowLineJson>,
    pub warnings: Vec<String>,
}

impl ConnectionDataJson {
    pub fn from_data(data: &ConnectionData) -> Self {
        ConnectionDataJson {
            lines: data
                .all_lines()
                .map(|l| FlowLineJson {
                    from: l.from,
                    to: l.to,
                    sign: l.sign,
                    deck: l.deck.exponents.clone(),
                    times: l.representative.times.clone(),
                    points: l
                        .representative
                        .points
                        .iter()
                        .map(|p| p.as_slice().to_vec())
                        .collect(),
                })
                .collect(),
            warnings: data.warnings.clone(),
        }
    }

    pub fn into_data(self) -> ConnectionData {
        let mut data = ConnectionData {
            warnings: self.warnings,
            ..ConnectionData::default()
        };
        for l in self.lines {
            let duration = *l.times.last().unwrap_or(&0.0);
            let line = FlowLine {
                from: l.from,
                to: l.to,
                sign: l.sign,
                deck: DeckWord {
                    exponents: l.deck,
                },
                representative: Trajectory {
                    direction: Direction::Forward,
                    times: l.times,
                    points: l.points.into_iter().map(DVector::from_vec).collect(),
                    status: Terminal::Converged {
                        id: l.to,
                        time: duration,
                    },
                },
            };
            data.lines.entry((line.to, line.from)).or_default().push(line);
        }
        data
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub degree: usize,
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<i64>>,
}

impl MatrixJson {
    pub fn from_mat(degree: usize, m: &IntMat) -> Self {
        MatrixJson {
            degree,
            rows: m.rows,
            cols: m.cols,
            entries: (0..m.rows)
                .map(|i| (0..m.cols).map(|j| m[(i, j)]).collect())
                .collect(),
        }
    }
}

/// Content-addressed JSON cache under `out/cache`.
pub struct Cache {
    dir: PathBuf,
    enabled: bool,
}

impl Cache {
    pub fn new(out_dir: &Path, enabled: bool) -> Result<Self, CliError> {
        let dir = out_dir.join("cache");
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Cache { dir, enabled })
    }

    fn path(&self, stage: &str, key: u64) -> PathBuf {
        self.dir.join(format!("{stage}-{key:016x}.json"))
    }

    pub fn load<T: for<'de> Deserialize<'de>>(&self, stage: &str, key: u64) -> Option<T> {
        if !self.enabled {
            return None;
        }
        let text = std::fs::read_to_string(self.path(stage, key)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn store<T: Serialize>(&self, stage: &str, key: u64, value: &T) -> Result<(), CliError> {
        let path = self.path(stage, key);
        let text = serde_json::to_string(value)
            .map_err(|e| CliError::Io(format!("cache serialization: {e}")))?;
        std::fs::write(&path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

/// Hash of the serialized config sections that feed a stage, salted with the
/// crate version.
pub fn stage_key(sections: &[&dyn erased_ser::ErasedSer]) -> u64 {
    let mut buf = Vec::new();
    buf.extend_from_slice(CODE_VERSION.as_bytes());
    for s in sections {
        buf.extend_from_slice(s.to_json().as_bytes());
    }
    fnv1a64(&buf)
}

/// Object-safe serialization helper for hashing heterogeneous sections.
pub mod erased_ser {
    pub trait ErasedSer {
        fn to_json(&self) -> String;
    }

    impl<T: serde::Serialize> ErasedSer for T {
        fn to_json(&self) -> String {
            serde_json::to_string(self).expect("config sections serialize")
        }
    }
}

/// Flow-line CSV: per line a `from,to,sign` row followed by `t,x1..xN` rows,
/// blocks separated by blank lines.
pub fn write_flow_lines_csv(path: &Path, data: &ConnectionData) -> Result<(), CliError> {
    let mut out = String::from("# block format: from,to,sign then rows t,x1..xN\n");
    for line in data.all_lines() {
        out.push_str(&format!("{},{},{}\n", line.from, line.to, line.sign));
        for (t, p) in line
            .representative
            .times
            .iter()
            .zip(&line.representative.points)
        {
            out.push_str(&format!("{t}"));
            for c in p.iter() {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Plain trajectory format: `t,x1..xN` rows, one blank-line-separated block
/// per connecting-orbit representative.
pub fn write_trajectories_csv(path: &Path, data: &ConnectionData) -> Result<(), CliError> {
    let mut out = String::from("# t,x1..xN per block (one block per connecting orbit)\n");
    for line in data.all_lines() {
        for (t, p) in line
            .representative
            .times
            .iter()
            .zip(&line.representative.points)
        {
            out.push_str(&format!("{t}"));
            for c in p.iter() {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Invariant-manifold point clouds: rows `id,role,x1..xN`.
pub fn write_clouds_csv(
    path: &Path,
    clouds: &BTreeMap<(usize, &'static str), Vec<DVector<f64>>>,
) -> Result<(), CliError> {
    let mut out = String::from("# id,role,x1..xN\n");
    for ((id, role), points) in clouds {
        for p in points {
            out.push_str(&format!("{id},{role}"));
            for c in p.iter() {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}
