//! The canonical 709-feature registry: OpenFace-style column names grouped
//! into the seven ablation feature sets.
//!
//! Group sizes are load-bearing (FAU 35, gaze 8, eye landmarks 280, head pose
//! 6, rigidity 40, 2D landmarks 136, 3D landmarks 204; total 709) and are
//! asserted at construction.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Action units with an intensity (`_r`) column.
const AU_INTENSITY: [u8; 17] = [1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 45];
/// Action units with a presence (`_c`) column; AU28 has presence only.
const AU_PRESENCE: [u8; 18] = [
    1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 28, 45,
];

/// The seven feature sets of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Fau,
    Gaze,
    EyeLandmarks,
    HeadPose,
    Rigidity,
    Landmarks2d,
    Landmarks3d,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 7] = [
        FeatureSet::Fau,
        FeatureSet::Gaze,
        FeatureSet::EyeLandmarks,
        FeatureSet::HeadPose,
        FeatureSet::Rigidity,
        FeatureSet::Landmarks2d,
        FeatureSet::Landmarks3d,
    ];

    /// Expected member count for the set.
    pub fn size(self) -> usize {
        match self {
            FeatureSet::Fau => 35,
            FeatureSet::Gaze => 8,
            FeatureSet::EyeLandmarks => 280,
            FeatureSet::HeadPose => 6,
            FeatureSet::Rigidity => 40,
            FeatureSet::Landmarks2d => 136,
            FeatureSet::Landmarks3d => 204,
        }
    }

    /// Human-readable name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            FeatureSet::Fau => "Facial Action Units",
            FeatureSet::Gaze => "Gaze",
            FeatureSet::EyeLandmarks => "Eye Landmarks",
            FeatureSet::HeadPose => "Head Pose",
            FeatureSet::Rigidity => "Rigidity Parameters",
            FeatureSet::Landmarks2d => "2D Landmarks",
            FeatureSet::Landmarks3d => "3D Landmarks",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fau" | "action_units" | "facial_action_units" => Ok(FeatureSet::Fau),
            "gaze" => Ok(FeatureSet::Gaze),
            "eye_landmarks" | "eye" => Ok(FeatureSet::EyeLandmarks),
            "head_pose" | "pose" => Ok(FeatureSet::HeadPose),
            "rigidity" | "rigidity_parameters" => Ok(FeatureSet::Rigidity),
            "landmarks_2d" | "2d_landmarks" | "2d" => Ok(FeatureSet::Landmarks2d),
            "landmarks_3d" | "3d_landmarks" | "3d" => Ok(FeatureSet::Landmarks3d),
            other => Err(Error::InvalidArgument(format!(
                "unknown feature set `{other}` (expected one of: fau, gaze, eye_landmarks, head_pose, rigidity, landmarks_2d, landmarks_3d)"
            ))),
        }
    }

    /// Stable identifier used in CLI flags and report keys.
    pub fn key(self) -> &'static str {
        match self {
            FeatureSet::Fau => "fau",
            FeatureSet::Gaze => "gaze",
            FeatureSet::EyeLandmarks => "eye_landmarks",
            FeatureSet::HeadPose => "head_pose",
            FeatureSet::Rigidity => "rigidity",
            FeatureSet::Landmarks2d => "landmarks_2d",
            FeatureSet::Landmarks3d => "landmarks_3d",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Ordered list of the 709 trainable feature names with group tags.
#[derive(Debug, Clone)]
pub struct FeatureRegistry {
    names: Vec<String>,
    groups: Vec<FeatureSet>,
    index_by_name: HashMap<String, usize>,
}

pub const TRAINABLE_FEATURE_COUNT: usize = 709;

impl FeatureRegistry {
    /// Build the canonical registry. Panics if the hard-coded group layout
    /// ever drifts from the documented sizes.
    pub fn standard() -> Self {
        let mut names: Vec<String> = Vec::with_capacity(TRAINABLE_FEATURE_COUNT);
        let mut groups: Vec<FeatureSet> = Vec::with_capacity(TRAINABLE_FEATURE_COUNT);
        let push = |name: String, set: FeatureSet, names: &mut Vec<String>, groups: &mut Vec<FeatureSet>| {
            names.push(name);
            groups.push(set);
        };

        for au in AU_INTENSITY {
            push(format!("AU{au:02}_r"), FeatureSet::Fau, &mut names, &mut groups);
        }
        for au in AU_PRESENCE {
            push(format!("AU{au:02}_c"), FeatureSet::Fau, &mut names, &mut groups);
        }

        for eye in 0..2 {
            for axis in ["x", "y", "z"] {
                push(format!("gaze_{eye}_{axis}"), FeatureSet::Gaze, &mut names, &mut groups);
            }
        }
        push("gaze_angle_x".into(), FeatureSet::Gaze, &mut names, &mut groups);
        push("gaze_angle_y".into(), FeatureSet::Gaze, &mut names, &mut groups);

        for axis in ["x", "y", "X", "Y", "Z"] {
            for i in 0..56 {
                push(
                    format!("eye_lmk_{axis}_{i}"),
                    FeatureSet::EyeLandmarks,
                    &mut names,
                    &mut groups,
                );
            }
        }

        for name in ["pose_Tx", "pose_Ty", "pose_Tz", "pose_Rx", "pose_Ry", "pose_Rz"] {
            push(name.into(), FeatureSet::HeadPose, &mut names, &mut groups);
        }

        for name in ["p_scale", "p_rx", "p_ry", "p_rz", "p_tx", "p_ty"] {
            push(name.into(), FeatureSet::Rigidity, &mut names, &mut groups);
        }
        for i in 0..34 {
            push(format!("p_{i}"), FeatureSet::Rigidity, &mut names, &mut groups);
        }

        for axis in ["x", "y"] {
            for i in 0..68 {
                push(format!("{axis}_{i}"), FeatureSet::Landmarks2d, &mut names, &mut groups);
            }
        }

        for axis in ["X", "Y", "Z"] {
            for i in 0..68 {
                push(format!("{axis}_{i}"), FeatureSet::Landmarks3d, &mut names, &mut groups);
            }
        }

        let index_by_name: HashMap<String, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        assert_eq!(index_by_name.len(), names.len(), "duplicate feature name");

        let registry = Self {
            names,
            groups,
            index_by_name,
        };
        for set in FeatureSet::ALL {
            assert_eq!(
                registry.group_indices(set).len(),
                set.size(),
                "group {set} size drifted"
            );
        }
        assert_eq!(registry.len(), TRAINABLE_FEATURE_COUNT);
        registry
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.names[index]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn group_of(&self, index: usize) -> FeatureSet {
        self.groups[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index_by_name.get(name).copied()
    }

    /// Registry-order indices of one feature set.
    pub fn group_indices(&self, set: FeatureSet) -> Vec<usize> {
        self.groups
            .iter()
            .enumerate()
            .filter_map(|(i, &g)| (g == set).then_some(i))
            .collect()
    }

    /// Write the `name,group,index` reference CSV.
    pub fn write_reference_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "name,group,index")?;
        for (i, name) in self.names.iter().enumerate() {
            writeln!(out, "{},{},{}", name, self.groups[i], i)?;
        }
        Ok(())
    }
}

impl Default for FeatureRegistry {
    fn default() -> Self {
        Self::standard()
    }
}
