//! Wire messages.
//!
//! Every message is one JSON object on its own line, discriminated by a
//! `"type"` field. Numbers use shortest round-trip formatting.
//!
//! ```text
//! > {"type":"hello","config":{"style":"neutral"}}
//! < {"type":"hello","config":{"session":1,...}}
//! > {"type":"frame","t":0,"values":[0.0,0.9,0.0,...]}
//! < {"type":"joints","t0":0,"frames":[[[0.0,0.9,0.0],...],...]}
//! < {"type":"stats","stride_latency_ms":0.5,"emitted":60,...}
//! > {"type":"style","name":"heavy"}
//! > {"type":"end"}
//! < {"type":"end","summary":{...}}
//! ```

use motion_stream::backend::BackendSpec;
use motion_stream::motion::JointSequence;
use motion_stream::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Session parameters. Clients send the fields they want to override; the
/// server answers with the fully resolved set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelloConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendSpec>,
    /// Initial style name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub styles: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_width: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub joint_count: Option<usize>,
}

/// Closing report of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub session: u64,
    pub frames_in: usize,
    pub frames_out: usize,
    pub strides: usize,
    pub warmup_frames: usize,
    pub mean_stride_latency_ms: f64,
    pub max_stride_latency_ms: f64,
    /// Pooled jitter of the emitted joints after warm-up; absent with fewer
    /// than three such frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Message {
    Hello {
        #[serde(default)]
        config: HelloConfig,
    },
    Frame {
        t: u64,
        values: Vec<f64>,
    },
    /// Switch by catalog name or to a raw embedding; exactly one is set.
    Style {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vec: Option<Vec<f64>>,
    },
    Joints {
        t0: usize,
        frames: Vec<Vec<[f64; 3]>>,
    },
    Stats {
        /// Arrival of the stride-completing frame to emission; absent on
        /// acknowledgements that complete no stride.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stride_latency_ms: Option<f64>,
        emitted: usize,
        buffer_len: usize,
        queue_depth: usize,
        /// Time the emitted stride spent waiting for its frames.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        buffering_ms: Option<f64>,
        style: String,
    },
    Error {
        code: String,
        detail: String,
    },
    End {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summary: Option<Summary>,
    },
}

impl Message {
    pub fn parse(line: &str) -> Result<Self, ServiceError> {
        serde_json::from_str(line).map_err(|e| ServiceError::BadMessage(e.to_string()))
    }

    /// The message as one line, without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages serialize")
    }

    pub fn error(e: &ServiceError) -> Self {
        Message::Error {
            code: e.code().into(),
            detail: e.to_string(),
        }
    }

    pub fn joints(t0: usize, joints: &JointSequence) -> Self {
        let frames = joints
            .frames()
            .map(|f| f.chunks_exact(3).map(|p| [p[0], p[1], p[2]]).collect())
            .collect();
        Message::Joints { t0, frames }
    }
}
