//! File formats: theories, channels, partitions, programming instances and
//! game reports.
//!
//! Floats are serialized with the shortest decimal representation that parses
//! back to the identical bit pattern, so a save/load round trip is exact.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{make_channel, Channel, ChannelError};
use crate::linalg::Matrix;
use crate::lp::Tolerances;
use crate::polygon::GameReport;
use crate::programming::{Program, ProgrammingError, ProgrammingInstance};
use crate::space::{make_state_space, SpaceError, StateSpace};
use crate::structure::{Partition, StructureError};
use std::sync::Arc;

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("field `{field}`: {problem}")]
    Field { field: String, problem: String },
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Programming(#[from] ProgrammingError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TheoryFile {
    pub name: String,
    pub dim: usize,
    pub extreme_points: Vec<Vec<f64>>,
    pub unit_effect: Vec<f64>,
}

impl TheoryFile {
    pub fn from_space(space: &StateSpace) -> Self {
        TheoryFile {
            name: space.name().to_string(),
            dim: space.dim(),
            extreme_points: space.extreme_points().to_vec(),
            unit_effect: space.unit_effect().to_vec(),
        }
    }

    pub fn into_space(self, tol: Tolerances) -> Result<StateSpace, JsonError> {
        if self.unit_effect.len() != self.dim {
            return Err(JsonError::Field {
                field: "unit_effect".into(),
                problem: format!(
                    "has {} entries, dim is {}",
                    self.unit_effect.len(),
                    self.dim
                ),
            });
        }
        for (i, p) in self.extreme_points.iter().enumerate() {
            if p.len() != self.dim {
                return Err(JsonError::Field {
                    field: format!("extreme_points[{i}]"),
                    problem: format!("has {} entries, dim is {}", p.len(), self.dim),
                });
            }
        }
        Ok(make_state_space(
            self.name,
            self.extreme_points,
            self.unit_effect,
            tol,
        )?)
    }
}

pub fn space_to_json(space: &StateSpace) -> String {
    serde_json::to_string_pretty(&TheoryFile::from_space(space)).expect("serializable")
}

pub fn space_from_json(text: &str, tol: Tolerances) -> Result<StateSpace, JsonError> {
    let file: TheoryFile = serde_json::from_str(text)?;
    file.into_space(tol)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChannelFile {
    pub source: String,
    pub target: String,
    pub matrix: Vec<Vec<f64>>,
}

impl ChannelFile {
    pub fn from_channel(c: &Channel) -> Self {
        ChannelFile {
            source: c.source().name().to_string(),
            target: c.target().name().to_string(),
            matrix: c.matrix().to_rows(),
        }
    }

    /// Rebuilds the channel against explicitly supplied endpoint spaces; the
    /// stored names are checked against them.
    pub fn into_channel(
        self,
        source: &Arc<StateSpace>,
        target: &Arc<StateSpace>,
    ) -> Result<Channel, JsonError> {
        if self.source != source.name() {
            return Err(JsonError::Field {
                field: "source".into(),
                problem: format!("file says `{}`, given `{}`", self.source, source.name()),
            });
        }
        if self.target != target.name() {
            return Err(JsonError::Field {
                field: "target".into(),
                problem: format!("file says `{}`, given `{}`", self.target, target.name()),
            });
        }
        Ok(make_channel(
            Matrix::from_rows(self.matrix),
            source,
            target,
        )?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PartitionFile {
    pub space: String,
    pub blocks: Vec<Vec<usize>>,
}

impl PartitionFile {
    pub fn from_partition(p: &Partition) -> Self {
        PartitionFile {
            space: p.space().name().to_string(),
            blocks: p.blocks().to_vec(),
        }
    }

    pub fn into_partition(self, space: Arc<StateSpace>) -> Result<Partition, JsonError> {
        if self.space != space.name() {
            return Err(JsonError::Field {
                field: "space".into(),
                problem: format!("file says `{}`, given `{}`", self.space, space.name()),
            });
        }
        Ok(Partition::new(space, self.blocks)?)
    }
}

/// One program entry: the apparatus extreme point used as the program and the
/// matrix of the dynamics it implements on the system.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProgramFile {
    pub state_index: usize,
    pub dynamics: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceFile {
    pub system: TheoryFile,
    pub apparatus: TheoryFile,
    pub matrix: Vec<Vec<f64>>,
    pub programs: Vec<ProgramFile>,
}

impl InstanceFile {
    pub fn from_instance(inst: &ProgrammingInstance) -> Result<Self, JsonError> {
        let app = inst.apparatus();
        let eps = app.tolerances().eps_eq();
        let programs = inst
            .programs()
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let state_index = app
                    .extreme_points()
                    .iter()
                    .position(|v| crate::linalg::linf_distance(v, p.state.coords()) <= eps)
                    .ok_or_else(|| JsonError::Field {
                        field: format!("programs[{i}].state_index"),
                        problem: "program state is not an apparatus extreme point".into(),
                    })?;
                Ok(ProgramFile {
                    state_index,
                    dynamics: p.dynamics.matrix().to_rows(),
                })
            })
            .collect::<Result<Vec<_>, JsonError>>()?;
        Ok(InstanceFile {
            system: TheoryFile::from_space(inst.system()),
            apparatus: TheoryFile::from_space(inst.apparatus()),
            matrix: inst.total_channel().matrix().to_rows(),
            programs,
        })
    }

    pub fn into_instance(self, tol: Tolerances) -> Result<ProgrammingInstance, JsonError> {
        let system = Arc::new(self.system.into_space(tol)?);
        let apparatus = Arc::new(self.apparatus.into_space(tol)?);
        let composite = crate::tensor::min_tensor(&system, &apparatus).map_err(JsonError::Space)?;
        let total = make_channel(
            Matrix::from_rows(self.matrix),
            composite.space(),
            composite.space(),
        )?;
        let programs = self
            .programs
            .into_iter()
            .enumerate()
            .map(|(i, pf)| {
                if pf.state_index >= apparatus.num_extreme() {
                    return Err(JsonError::Field {
                        field: format!("programs[{i}].state_index"),
                        problem: format!(
                            "index {} out of range ({} extreme points)",
                            pf.state_index,
                            apparatus.num_extreme()
                        ),
                    });
                }
                let dynamics = make_channel(Matrix::from_rows(pf.dynamics), &system, &system)?;
                Ok(Program {
                    state: apparatus.extreme_state(pf.state_index),
                    dynamics,
                })
            })
            .collect::<Result<Vec<_>, JsonError>>()?;
        Ok(ProgrammingInstance::new(
            system, apparatus, total, programs,
        )?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GameRow {
    pub sides: usize,
    pub system: usize,
    pub lp_value: f64,
    pub closed_form: f64,
    pub baseline: f64,
    pub achieved: f64,
    pub verdict: String,
}

impl GameRow {
    pub fn from_report(r: &GameReport) -> Self {
        GameRow {
            sides: r.sides,
            system: r.system,
            lp_value: r.lp_value,
            closed_form: r.closed_form,
            baseline: r.baseline,
            achieved: r.achieved,
            verdict: if r.passed() { "PASS" } else { "FAIL" }.to_string(),
        }
    }

    pub const TSV_HEADER: &'static str = "M\tN\tlp_value\tclosed_form\tbaseline\tverdict";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.sides,
            self.system,
            format_float(self.lp_value),
            format_float(self.closed_form),
            format_float(self.baseline),
            self.verdict
        )
    }
}

/// Nine significant decimals, trailing zeros trimmed (but at least one
/// decimal digit), for table output.
pub fn format_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x }; // normalize -0.0
    let mut s = format!("{x:.9}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.push('0');
    }
    s
}
