use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use motion_stream::backend::{BackendRegistry, BackendSpec, MotionBackend, StyleEmbedding};
use motion_stream::metrics::JitterAccumulator;
use motion_stream::motion::{MotionSequence, DEFAULT_FPS};
use motion_stream::pipeline::{PipelineConfig, PipelineState};

use crate::clock::Clock;
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::protocol::{HelloConfig, Message, Summary};

pub type SessionId = u64;

/// Fully resolved parameters of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub pipeline: PipelineConfig,
    pub backend: BackendSpec,
    pub styles: BTreeMap<String, StyleEmbedding>,
    pub initial_style: String,
}

#[derive(Debug)]
struct Session {
    id: SessionId,
    state: PipelineState,
    styles: BTreeMap<String, StyleEmbedding>,
    style_name: String,
    last_t: Option<u64>,
    /// Arrival of the oldest frame not yet covered by an emitted stride.
    waiting_since: Option<Duration>,
    latency_sum: f64,
    latency_max: f64,
    latency_count: usize,
    jitter: JitterAccumulator,
}

impl Session {
    fn stats(&self, latency: Option<f64>, buffering: Option<f64>, queue_depth: usize) -> Message {
        Message::Stats {
            stride_latency_ms: latency,
            emitted: self.state.emitted(),
            buffer_len: self.state.buffer().len(),
            queue_depth,
            buffering_ms: buffering,
            style: self.style_name.clone(),
        }
    }

    fn summary(&self) -> Summary {
        Summary {
            session: self.id,
            frames_in: self.state.frames_in(),
            frames_out: self.state.emitted(),
            strides: self.state.strides(),
            warmup_frames: self.state.warmup_emitted(),
            mean_stride_latency_ms: if self.latency_count == 0 {
                0.0
            } else {
                self.latency_sum / self.latency_count as f64
            },
            max_stride_latency_ms: self.latency_max,
            jitter: self.jitter.jitter(),
        }
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Session table. Safe to share between connection threads; each session is
/// locked independently, so distinct sessions run in parallel.
#[derive(Debug)]
pub struct Service {
    config: ServiceConfig,
    registry: BackendRegistry,
    clock: Arc<dyn Clock>,
    sessions: Mutex<BTreeMap<SessionId, Arc<Mutex<Session>>>>,
    next_id: AtomicU64,
}

impl Service {
    pub fn new(config: ServiceConfig, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        Self::with_registry(config, clock, BackendRegistry::default())
    }

    pub fn with_registry(
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
        registry: BackendRegistry,
    ) -> Result<Self, ServiceError> {
        config.check()?;
        Ok(Self {
            config,
            registry,
            clock,
            sessions: Mutex::new(BTreeMap::new()),
            next_id: AtomicU64::new(1),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn open_sessions(&self) -> Vec<SessionId> {
        self.table().keys().copied().collect()
    }

    fn table(&self) -> std::sync::MutexGuard<'_, BTreeMap<SessionId, Arc<Mutex<Session>>>> {
        self.sessions.lock().expect("session table poisoned")
    }

    fn session(&self, id: SessionId) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.table()
            .get(&id)
            .cloned()
            .ok_or(ServiceError::UnknownSession(id))
    }

    fn resolve_with(
        &self,
        hello: &HelloConfig,
    ) -> Result<(SessionConfig, Arc<dyn MotionBackend>), ServiceError> {
        let backend_spec = hello
            .backend
            .clone()
            .unwrap_or_else(|| self.config.backend.clone());
        let backend = self.registry.build(&backend_spec)?;
        let styles = self.config.catalog(backend.descriptor().style_dim)?;
        let initial_style = hello
            .style
            .clone()
            .unwrap_or_else(|| self.config.initial_style().to_string());
        let config = SessionConfig {
            pipeline: hello
                .pipeline
                .clone()
                .unwrap_or_else(|| self.config.pipeline.clone()),
            backend: backend_spec,
            styles,
            initial_style,
        };
        Ok((config, backend))
    }

    /// Fills unset hello fields from the service defaults.
    pub fn resolve(&self, hello: &HelloConfig) -> Result<SessionConfig, ServiceError> {
        self.resolve_with(hello).map(|(c, _)| c)
    }

    pub fn open_session(&self, config: SessionConfig) -> Result<SessionId, ServiceError> {
        let backend = self.registry.build(&config.backend)?;
        self.open_with(config, backend)
    }

    /// Opens a session from a client hello and returns the acknowledgement.
    pub fn open_hello(
        &self,
        hello: &HelloConfig,
    ) -> Result<(SessionId, HelloConfig), ServiceError> {
        let (config, backend) = self.resolve_with(hello)?;
        let desc = backend.descriptor().clone();
        let ack = HelloConfig {
            session: None,
            pipeline: Some(config.pipeline.clone()),
            backend: Some(config.backend.clone()),
            style: Some(config.initial_style.clone()),
            styles: config.styles.keys().cloned().collect(),
            frame_width: Some(desc.frame_width),
            joint_count: Some(desc.joint_count),
        };
        let id = self.open_with(config, backend)?;
        Ok((
            id,
            HelloConfig {
                session: Some(id),
                ..ack
            },
        ))
    }

    fn open_with(
        &self,
        config: SessionConfig,
        backend: Arc<dyn MotionBackend>,
    ) -> Result<SessionId, ServiceError> {
        if config.styles.is_empty() {
            return Err(ServiceError::BadConfig("style catalog is empty".into()));
        }
        let style = config
            .styles
            .get(&config.initial_style)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownStyle(config.initial_style.clone()))?;
        let state = PipelineState::new(config.pipeline, backend, style)?;
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let session = Session {
            id,
            state,
            styles: config.styles,
            style_name: config.initial_style,
            last_t: None,
            waiting_since: None,
            latency_sum: 0.0,
            latency_max: 0.0,
            latency_count: 0,
            jitter: JitterAccumulator::new(),
        };
        self.table().insert(id, Arc::new(Mutex::new(session)));
        Ok(id)
    }

    /// Feeds one frame that arrived at `arrival` (clock time). Returns a
    /// `joints` and a `stats` message if it completed a stride.
    pub fn handle_frame(
        &self,
        id: SessionId,
        t: u64,
        values: &[f64],
        arrival: Duration,
        queue_depth: usize,
    ) -> Result<Vec<Message>, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().expect("session poisoned");
        let d = s.state.backend().descriptor().frame_width;
        if values.len() != d {
            return Err(ServiceError::BadFrame(format!(
                "expected {d} values, got {}",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(ServiceError::BadFrame("non-finite value".into()));
        }
        if let Some(last) = s.last_t {
            if t <= last {
                return Err(ServiceError::OutOfOrder { t, last });
            }
        }
        let frame = MotionSequence::from_flat(d, DEFAULT_FPS, values.to_vec())?;
        let em = s.state.push_frames(&frame)?;
        s.last_t = Some(t);
        let waiting_since = *s.waiting_since.get_or_insert(arrival);
        if em.is_empty() {
            return Ok(Vec::new());
        }
        s.jitter.extend(&em.joints.tail_from(em.warmup_frames));
        let joints = Message::joints(em.start, &em.joints);
        let latency = ms(self.clock.now().saturating_sub(arrival));
        let buffering = ms(arrival.saturating_sub(waiting_since));
        s.waiting_since = None;
        s.latency_sum += latency;
        s.latency_max = s.latency_max.max(latency);
        s.latency_count += 1;
        Ok(vec![
            joints,
            s.stats(Some(latency), Some(buffering), queue_depth),
        ])
    }

    /// Switches style by catalog name or raw vector; acknowledged with stats.
    pub fn handle_style(
        &self,
        id: SessionId,
        name: Option<&str>,
        vec: Option<&[f64]>,
        queue_depth: usize,
    ) -> Result<Message, ServiceError> {
        let session = self.session(id)?;
        let mut s = session.lock().expect("session poisoned");
        let (label, style) = match (name, vec) {
            (Some(name), None) => {
                let style = s
                    .styles
                    .get(name)
                    .cloned()
                    .ok_or_else(|| ServiceError::UnknownStyle(name.to_string()))?;
                (name.to_string(), style)
            }
            (None, Some(v)) => {
                let style = StyleEmbedding::new(v.to_vec())
                    .map_err(|e| ServiceError::BadStyle(e.to_string()))?;
                ("custom".to_string(), style)
            }
            _ => {
                return Err(ServiceError::BadStyle(
                    "give exactly one of `name` or `vec`".into(),
                ))
            }
        };
        s.state
            .set_style(style)
            .map_err(|e| ServiceError::BadStyle(e.to_string()))?;
        s.style_name = label;
        Ok(s.stats(None, None, queue_depth))
    }

    pub fn stats(&self, id: SessionId, queue_depth: usize) -> Result<Message, ServiceError> {
        let session = self.session(id)?;
        let s = session.lock().expect("session poisoned");
        Ok(s.stats(None, None, queue_depth))
    }

    /// Ends a session. Frames that have not completed a stride are dropped.
    pub fn close_session(&self, id: SessionId) -> Result<Summary, ServiceError> {
        let session = self
            .table()
            .remove(&id)
            .ok_or(ServiceError::UnknownSession(id))?;
        let s = session.lock().expect("session poisoned");
        Ok(s.summary())
    }
}
