//! Versioned JSON files. Every file is an object with an integer `version`
//! field next to its payload; lengths are in meters.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::constraints::SceneObject;
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, PoseEncoder};
use crate::motion::{BodyModel, BodyModelData, Frame, MotionSequence};
use crate::numeric::arr3;
use crate::optimizer::OptimReport;
use crate::planner::TrajectoryPlan;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct EnvelopeOut<'a, T> {
    version: u32,
    #[serde(flatten)]
    payload: &'a T,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: Option<u32>,
}

/// Parse `text` as a versioned document. `context` names the document in
/// errors.
pub fn from_json<T: DeserializeOwned>(context: &str, text: &str) -> Result<T> {
    let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::parse(context, &e))?;
    match probe.version {
        Some(FORMAT_VERSION) => {}
        Some(found) => {
            return Err(Error::VersionMismatch {
                context: context.into(),
                found,
                expected: FORMAT_VERSION,
            })
        }
        None => {
            return Err(Error::Parse {
                context: context.into(),
                line: 1,
                column: 1,
                message: "missing field `version`".into(),
            })
        }
    }
    serde_json::from_str(text).map_err(|e| Error::parse(context, &e))
}

/// Pretty-printed versioned document, newline-terminated.
pub fn to_json<T: Serialize>(payload: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&EnvelopeOut {
        version: FORMAT_VERSION,
        payload,
    })
    .map_err(|e| Error::InvalidConfig(format!("cannot serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    from_json(&path.display().to_string(), &read_text(path)?)
}

pub fn save<T: Serialize>(path: &Path, payload: &T) -> Result<()> {
    write_text(path, &to_json(payload)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectData {
    pub name: String,
    pub points: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
}

impl From<&SceneObject> for ObjectData {
    fn from(o: &SceneObject) -> Self {
        ObjectData {
            name: o.name.clone(),
            points: o.points().iter().map(arr3).collect(),
            normals: o.normals().iter().map(arr3).collect(),
        }
    }
}

impl ObjectData {
    pub fn build(self) -> Result<SceneObject> {
        SceneObject::new(self.name, self.points, self.normals)
    }
}

/// A static scene and the task to perform in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub instruction: String,
    /// Root translation at the first frame.
    pub start: [f64; 3],
    /// Root translation the offline planner heads for.
    pub goal: [f64; 3],
    pub fps: f64,
    pub objects: Vec<SceneObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneData {
    instruction: String,
    start: [f64; 3],
    goal: [f64; 3],
    fps: f64,
    objects: Vec<ObjectData>,
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Self> {
        let data: SceneData = from_json("scene", text)?;
        if !(data.fps.is_finite() && data.fps > 0.0) {
            return Err(Error::InvalidConfig(format!("scene fps must be > 0, got {}", data.fps)));
        }
        Ok(Scene {
            instruction: data.instruction,
            start: data.start,
            goal: data.goal,
            fps: data.fps,
            objects: data.objects.into_iter().map(ObjectData::build).collect::<Result<_>>()?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(&SceneData {
            instruction: self.instruction.clone(),
            start: self.start,
            goal: self.goal,
            fps: self.fps,
            objects: self.objects.iter().map(ObjectData::from).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?).map_err(|e| with_path(e, path))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_text(path, &self.to_json()?)
    }

    /// A 1.2 m x 0.6 m desk ahead of a standing figure.
    pub fn desk(points: usize, seed: u64) -> Result<Self> {
        Ok(Scene {
            instruction: "walk to the other side of the desk".into(),
            start: [0.0, 0.0, 0.0],
            goal: [0.0, 2.4, 0.0],
            fps: 20.0,
            objects: vec![SceneObject::box_surface(
                "desk",
                [-0.6, 0.9, 0.0],
                [0.6, 1.5, 0.75],
                points,
                seed,
            )?],
        })
    }
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse {
            line,
            column,
            message,
            ..
        } => Error::Parse {
            context: path.display().to_string(),
            line,
            column,
            message,
        },
        Error::VersionMismatch { found, expected, .. } => Error::VersionMismatch {
            context: path.display().to_string(),
            found,
            expected,
        },
        other => other,
    }
}

#[derive(Serialize, Deserialize)]
struct MotionData {
    fps: f64,
    frames: Vec<Frame>,
}

pub fn motion_from_json(text: &str) -> Result<MotionSequence> {
    let data: MotionData = from_json("motion", text)?;
    MotionSequence::new(data.fps, data.frames)
}

pub fn motion_to_json(motion: &MotionSequence) -> Result<String> {
    to_json(motion)
}

pub fn load_motion(path: &Path) -> Result<MotionSequence> {
    motion_from_json(&read_text(path)?).map_err(|e| with_path(e, path))
}

pub fn load_body(path: &Path) -> Result<BodyModel> {
    let data: BodyModelData = load(path)?;
    BodyModel::new(data)
}

pub fn load_plan(path: &Path) -> Result<TrajectoryPlan> {
    let plan: TrajectoryPlan = load(path)?;
    plan.validate()?;
    Ok(plan)
}

pub fn load_encoder(path: &Path) -> Result<PoseEncoder> {
    let enc: PoseEncoder = load(path)?;
    enc.validate()?;
    Ok(enc)
}

pub fn load_report(path: &Path) -> Result<OptimReport> {
    load(path)
}

pub fn load_metrics(path: &Path) -> Result<MetricReport> {
    load(path)
}
