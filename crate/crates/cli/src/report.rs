//! Pose report written by `detect` and `pose`.
//!
//! The payload depends only on the inputs, so repeated runs produce identical
//! bytes. Run information lives in the separate `metadata` block and never
//! includes clocks or host details.

use std::collections::BTreeMap;

use headpose::constellation::Constellation;
use headpose::peaks::Peak;
use headpose::pose::{PoseAngles, PoseSolution, ShiftVector};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoseReport {
    pub schema_version: u32,
    pub constellation: Vec<FeaturePoint>,
    pub solutions: Vec<SolutionReport>,
    pub selected: usize,
    pub angles_deg: PoseAngles,
    pub shift_vector: ShiftReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection: Option<DetectionReport>,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeaturePoint {
    pub feature: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrianglePoints {
    #[serde(rename = "M")]
    pub m: [f64; 3],
    #[serde(rename = "L")]
    pub l: [f64; 3],
    #[serde(rename = "R")]
    pub r: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionReport {
    /// Depths of `M`, `L`, `R`.
    pub depths: [f64; 3],
    pub points: TrianglePoints,
    pub normal: [f64; 3],
    pub residual: f64,
    pub angles_deg: PoseAngles,
}

impl From<&PoseSolution> for SolutionReport {
    fn from(s: &PoseSolution) -> Self {
        Self {
            depths: s.depths,
            points: TrianglePoints { m: s.m, l: s.l, r: s.r },
            normal: s.normal,
            residual: s.residual,
            angles_deg: s.angles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub s: [f64; 2],
    pub near_frontal: bool,
}

impl From<&ShiftVector> for ShiftReport {
    fn from(v: &ShiftVector) -> Self {
        Self { s: [v.s.0, v.s.1], near_frontal: v.near_frontal }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub edge_points: usize,
    pub dropped_zero_normal: usize,
    pub features: Vec<FeatureReport>,
    pub rank: f64,
    pub density: f64,
    pub scale: f64,
    pub candidate_indices: Vec<usize>,
}

impl DetectionReport {
    pub fn new(
        edge_points: usize,
        dropped_zero_normal: usize,
        features: Vec<FeatureReport>,
        best: &Constellation,
    ) -> Self {
        Self {
            edge_points,
            dropped_zero_normal,
            features,
            rank: best.rank,
            density: best.density,
            scale: best.scale,
            candidate_indices: best.candidate_indices.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureReport {
    pub name: String,
    pub radius: usize,
    pub peaks: Vec<PeakReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakReport {
    pub x: usize,
    pub y: usize,
    pub score: f64,
    pub distance: f64,
}

impl From<&Peak> for PeakReport {
    fn from(p: &Peak) -> Self {
        Self { x: p.x, y: p.y, score: p.score, distance: p.raw_distance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: BTreeMap<String, String>,
}

impl Metadata {
    pub fn new(command: &'static str) -> Self {
        Self { tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), command, inputs: BTreeMap::new() }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }
}

impl PoseReport {
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}
