//! Text CSV persistence for reference motions: a header naming all 22
//! coordinate columns plus time, one row per frame, 17 significant digits so
//! values round-trip bit-exactly.

use super::{MotionError, ReferenceFrame, ReferenceMotion};
use crate::sim::NQ;
use std::fs;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

const POSITION_COLUMNS: [&str; NQ] = [
    "pelvis_x_m",
    "pelvis_z_m",
    "pelvis_pitch_rad",
    "left_hip_rad",
    "left_knee_rad",
    "left_ankle_rad",
    "right_hip_rad",
    "right_knee_rad",
    "right_ankle_rad",
    "left_shin_spring_rad",
    "right_shin_spring_rad",
];

const VELOCITY_COLUMNS: [&str; NQ] = [
    "pelvis_vx_mps",
    "pelvis_vz_mps",
    "pelvis_pitch_radps",
    "left_hip_radps",
    "left_knee_radps",
    "left_ankle_radps",
    "right_hip_radps",
    "right_knee_radps",
    "right_ankle_radps",
    "left_shin_spring_radps",
    "right_shin_spring_radps",
];

#[derive(Debug, Error)]
pub enum ReferenceIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Motion(#[from] MotionError),
}

fn header() -> String {
    let mut cols = vec!["time_s".to_string()];
    cols.extend(POSITION_COLUMNS.iter().map(|s| s.to_string()));
    cols.extend(VELOCITY_COLUMNS.iter().map(|s| s.to_string()));
    cols.join(",")
}

/// Write a motion to CSV. Numbers use scientific notation with 17
/// significant digits, enough for exact f64 round-trips.
pub fn save_csv(motion: &ReferenceMotion, path: &Path) -> Result<(), ReferenceIoError> {
    let io_err = |source| ReferenceIoError::Io { path: path.display().to_string(), source };
    let mut out = String::new();
    out.push_str(&header());
    out.push('\n');
    for (i, frame) in motion.frames().iter().enumerate() {
        let t = i as f64 * motion.frame_dt();
        let mut row = Vec::with_capacity(1 + 2 * NQ);
        row.push(format!("{t:.16e}"));
        for v in frame.pose.iter().chain(frame.vel.iter()) {
            row.push(format!("{v:.16e}"));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)
}

/// Read a motion written by [`save_csv`].
pub fn load_csv(path: &Path) -> Result<ReferenceMotion, ReferenceIoError> {
    let io_err = |source| ReferenceIoError::Io { path: path.display().to_string(), source };
    let text = fs::read_to_string(path).map_err(io_err)?;
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(ReferenceIoError::Parse {
        line: 1,
        message: "empty file".to_string(),
    })?;
    if first.trim() != header() {
        return Err(ReferenceIoError::Parse {
            line: 1,
            message: format!("unexpected header: {first}"),
        });
    }
    let mut times = Vec::new();
    let mut frames = Vec::new();
    for (idx, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + 2 * NQ {
            return Err(ReferenceIoError::Parse {
                line: idx + 1,
                message: format!("expected {} fields, got {}", 1 + 2 * NQ, fields.len()),
            });
        }
        let mut values = [0.0_f64; 1 + 2 * NQ];
        for (k, field) in fields.iter().enumerate() {
            values[k] = field.parse().map_err(|e| ReferenceIoError::Parse {
                line: idx + 1,
                message: format!("field {k} ({field:?}): {e}"),
            })?;
        }
        times.push(values[0]);
        let mut frame = ReferenceFrame::zero();
        frame.pose.copy_from_slice(&values[1..1 + NQ]);
        frame.vel.copy_from_slice(&values[1 + NQ..]);
        frames.push(frame);
    }
    if frames.len() < 2 {
        return Err(ReferenceIoError::Parse {
            line: times.len() + 1,
            message: "motion needs at least 2 frames".to_string(),
        });
    }
    let frame_dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    Ok(ReferenceMotion::new(frames, frame_dt)?)
}
