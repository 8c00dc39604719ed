//! Text file formats for motion features and joint sequences.
//!
//! Both formats are one JSON header line followed by one whitespace-separated
//! row of numbers per frame:
//!
//! ```text
//! {"kind":"motion","d":12,"fps":20.0,"joint_count":22,"frame_count":2}
//! 0.0 0.0 0.0 0.5 ...
//! 0.1 0.0 0.0 0.4 ...
//! ```
//!
//! Joint files use `"kind":"joints"` and carry `joint_count * 3` values per
//! row plus a `warmup` count of leading frames to leave out of metrics.
//! Numbers are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{JointSequence, MotionSequence, DEFAULT_JOINT_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Header {
    Motion {
        d: usize,
        fps: f64,
        joint_count: usize,
        frame_count: usize,
    },
    Joints {
        joint_count: usize,
        fps: f64,
        frame_count: usize,
        #[serde(default)]
        warmup: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionFile {
    pub sequence: MotionSequence,
    pub joint_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointsFile {
    pub joints: JointSequence,
    pub fps: f64,
    pub warmup: usize,
}

impl JointsFile {
    /// Frames after the warm-up prefix.
    pub fn steady(&self) -> JointSequence {
        self.joints.tail_from(self.warmup)
    }
}

fn write_row(out: &mut String, row: &[f64]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").expect("writing to a String");
    }
    out.push('\n');
}

fn header_line(h: &Header) -> String {
    let mut s = serde_json::to_string(h).expect("header serializes");
    s.push('\n');
    s
}

pub fn format_motion(seq: &MotionSequence, joint_count: usize) -> String {
    let mut out = header_line(&Header::Motion {
        d: seq.width(),
        fps: seq.fps(),
        joint_count,
        frame_count: seq.len(),
    });
    for frame in seq.frames() {
        write_row(&mut out, frame);
    }
    out
}

pub fn format_joints(joints: &JointSequence, fps: f64, warmup: usize) -> String {
    let mut out = header_line(&Header::Joints {
        joint_count: joints.joint_count(),
        fps,
        frame_count: joints.len(),
        warmup,
    });
    for frame in joints.frames() {
        write_row(&mut out, frame);
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

struct Parsed {
    header: Header,
    rows: Vec<f64>,
}

fn parse<R: Read>(reader: R) -> Result<Parsed> {
    let mut lines = BufReader::new(reader).lines();
    let first = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header line"))??;
    let header: Header =
        serde_json::from_str(first.trim()).map_err(|e| parse_err(1, format!("bad header: {e}")))?;
    let (width, expected) = match &header {
        Header::Motion { d, frame_count, .. } => (*d, *frame_count),
        Header::Joints {
            joint_count,
            frame_count,
            ..
        } => (joint_count * 3, *frame_count),
    };
    let mut rows = Vec::with_capacity(width * expected);
    let mut frames = 0;
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let before = rows.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, format!("not a number: `{tok}`")))?;
            if !v.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value `{tok}`")));
            }
            rows.push(v);
        }
        let got = rows.len() - before;
        if got != width {
            return Err(parse_err(
                lineno,
                format!("expected {width} values, found {got}"),
            ));
        }
        frames += 1;
    }
    if frames != expected {
        return Err(parse_err(
            frames + 2,
            format!("header declares {expected} frames, found {frames}"),
        ));
    }
    Ok(Parsed { header, rows })
}

pub fn read_motion<R: Read>(reader: R) -> Result<MotionFile> {
    let parsed = parse(reader)?;
    match parsed.header {
        Header::Motion {
            d,
            fps,
            joint_count,
            ..
        } => Ok(MotionFile {
            sequence: MotionSequence::from_flat(d, fps, parsed.rows)
                .map_err(|e| parse_err(1, e.to_string()))?,
            joint_count,
        }),
        Header::Joints { .. } => Err(parse_err(1, "expected a motion file, found joints")),
    }
}

pub fn read_joints<R: Read>(reader: R) -> Result<JointsFile> {
    let parsed = parse(reader)?;
    match parsed.header {
        Header::Joints {
            joint_count,
            fps,
            warmup,
            ..
        } => Ok(JointsFile {
            joints: JointSequence::from_flat(joint_count, parsed.rows)
                .map_err(|e| parse_err(1, e.to_string()))?,
            fps,
            warmup,
        }),
        Header::Motion { .. } => Err(parse_err(1, "expected a joints file, found motion")),
    }
}

pub fn load_motion(path: impl AsRef<Path>) -> Result<MotionFile> {
    read_motion(fs::File::open(path)?)
}

pub fn load_joints(path: impl AsRef<Path>) -> Result<JointsFile> {
    read_joints(fs::File::open(path)?)
}

pub fn save_motion(path: impl AsRef<Path>, seq: &MotionSequence) -> Result<()> {
    fs::File::create(path)?.write_all(format_motion(seq, DEFAULT_JOINT_COUNT).as_bytes())?;
    Ok(())
}

pub fn save_joints(path: impl AsRef<Path>, file: &JointsFile) -> Result<()> {
    fs::File::create(path)?
        .write_all(format_joints(&file.joints, file.fps, file.warmup).as_bytes())?;
    Ok(())
}
