//! Session lifecycle: issue a challenge, accept one answer, keep the verdict.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use iritrack_core::decision::{evaluate, FaceBoxTrace, Reason, Verdict};
use iritrack_core::iris::{track_frames, Frame, IrisError, RoiPlan};
use iritrack_core::pattern::{generate_pattern, slipper_schedule, PatternConfig, PatternError};
use iritrack_core::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::config::EngineConfig;
use crate::session::{Session, SessionState, TransitionError};
use crate::store::{Locked, SessionStore, StoreError};

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> f64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> f64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64() * 1000.0)
            .unwrap_or(0.0)
    }
}

/// A clock that only moves when told to.
#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(ms: f64) -> Self {
        Self(AtomicU64::new(ms.to_bits()))
    }

    pub fn set(&self, ms: f64) {
        self.0.store(ms.to_bits(), Ordering::SeqCst);
    }

    pub fn advance(&self, ms: f64) {
        self.set(self.now_ms() + ms);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::SeqCst))
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no session {0}")]
    NotFound(Uuid),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Generation(String),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Store(StoreError),
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => ServiceError::NotFound(id),
            other => ServiceError::Store(other),
        }
    }
}

impl From<TransitionError> for ServiceError {
    fn from(e: TransitionError) -> Self {
        ServiceError::Conflict(e.to_string())
    }
}

/// Body of `POST /sessions`; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreateSession {
    pub seed: Option<u64>,
    /// Replaces the configured pattern parameters for this session.
    pub pattern: Option<PatternConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitTrajectory {
    pub trajectory: Trajectory,
    #[serde(default)]
    pub face_trace: Option<FaceBoxTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodedFrame {
    pub t_ms: f64,
    /// Binary PGM (P5) bytes, standard base64.
    pub pgm_base64: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmitFrames {
    pub frames: Vec<EncodedFrame>,
    pub roi: RoiPlan,
    #[serde(default)]
    pub face_trace: Option<FaceBoxTrace>,
}

impl SubmitFrames {
    pub fn encode(frames: &[Frame], roi: RoiPlan, face_trace: Option<FaceBoxTrace>) -> Self {
        Self {
            frames: frames
                .iter()
                .map(|f| EncodedFrame {
                    t_ms: f.t_ms,
                    pgm_base64: STANDARD.encode(f.to_pgm()),
                })
                .collect(),
            roi,
            face_trace,
        }
    }

    pub fn decode(&self) -> Result<Vec<Frame>, ServiceError> {
        self.frames
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let bytes = STANDARD
                    .decode(&e.pgm_base64)
                    .map_err(|err| ServiceError::Validation(format!("frame {i}: bad base64: {err}")))?;
                Frame::from_pgm(&bytes, e.t_ms).map_err(|err| ServiceError::Validation(format!("frame {i}: {err}")))
            })
            .collect()
    }
}

enum Evidence {
    Trace(Trajectory, Option<FaceBoxTrace>),
    Starved(Verdict),
}

pub struct LivenessService {
    store: SessionStore,
    config: EngineConfig,
    clock: Arc<dyn Clock>,
}

impl LivenessService {
    pub fn new(store: SessionStore, config: EngineConfig, clock: Arc<dyn Clock>) -> Self {
        Self { store, config, clock }
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<Session, ServiceError> {
        let pattern_cfg = req.pattern.as_ref().unwrap_or(&self.config.pattern);
        pattern_cfg
            .validate()
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let seed = req.seed.unwrap_or_else(rand::random);
        let pattern = generate_pattern(pattern_cfg, seed).map_err(|e| match e {
            PatternError::GenerationFailed { .. } => ServiceError::Generation(e.to_string()),
            other => ServiceError::Validation(other.to_string()),
        })?;
        let schedule = slipper_schedule(&pattern, self.config.session.frame_interval_ms)
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        let session = Session::new(
            Uuid::new_v4(),
            pattern,
            schedule,
            self.clock.now_ms(),
            self.config.session.grace_ms,
        );
        self.store.insert(&session)?;
        Ok(session)
    }

    /// The stored session, expired first if its deadline has passed
    /// unanswered.
    pub fn get_session(&self, id: Uuid) -> Result<Session, ServiceError> {
        let now = self.clock.now_ms();
        self.store.with_session(id, |locked| {
            if locked.session.state == SessionState::Issued && locked.session.is_past_deadline(now) {
                locked.session.expire()?;
                locked.save()?;
            }
            Ok(locked.session.clone())
        })
    }

    pub fn submit_trajectory(&self, id: Uuid, req: SubmitTrajectory) -> Result<Verdict, ServiceError> {
        self.submit(id, || Ok(Evidence::Trace(req.trajectory, req.face_trace)))
    }

    pub fn submit_frames(&self, id: Uuid, req: &SubmitFrames) -> Result<Verdict, ServiceError> {
        self.submit(id, || {
            let frames = req.decode()?;
            match track_frames(&frames, &req.roi, &self.config.tracking) {
                Ok(points) => {
                    let traj = Trajectory::new(points).map_err(|e| ServiceError::Validation(e.to_string()))?;
                    Ok(Evidence::Trace(traj, req.face_trace.clone()))
                }
                Err(IrisError::InsufficientEvidence { have, need }) => Ok(Evidence::Starved(Verdict::reject(
                    Reason::InsufficientEvidence,
                    format!("{have} usable frames, need {need}"),
                ))),
                Err(e) => Err(ServiceError::Validation(e.to_string())),
            }
        })
    }

    fn submit(
        &self,
        id: Uuid,
        evidence: impl FnOnce() -> Result<Evidence, ServiceError>,
    ) -> Result<Verdict, ServiceError> {
        let now = self.clock.now_ms();
        self.store.with_session(id, |locked| match locked.session.state {
            SessionState::Decided => Ok(locked.session.verdict.clone().expect("decided sessions carry a verdict")),
            SessionState::Expired => Ok(expired_verdict(&locked.session, now)),
            SessionState::Submitted => Err(ServiceError::Conflict(format!(
                "session {id} is already being evaluated"
            ))),
            SessionState::Issued if locked.session.is_past_deadline(now) => {
                locked.session.expire()?;
                locked.save()?;
                Ok(expired_verdict(&locked.session, now))
            }
            SessionState::Issued => {
                let evidence = evidence()?;
                self.decide(locked, evidence)
            }
        })
    }

    fn decide(&self, locked: &mut Locked<'_>, evidence: Evidence) -> Result<Verdict, ServiceError> {
        locked.session.submit()?;
        locked.save()?;
        let verdict = match evidence {
            Evidence::Trace(traj, face) => {
                let v = evaluate(&locked.session.pattern, &traj, face.as_ref(), None, &self.config.decision);
                locked.session.trajectory = Some(traj);
                locked.session.face_trace = face;
                v
            }
            Evidence::Starved(v) => v,
        };
        locked.session.decide(verdict.clone())?;
        locked.save()?;
        Ok(verdict)
    }
}

fn expired_verdict(session: &Session, now_ms: f64) -> Verdict {
    Verdict::reject(
        Reason::Timeout,
        format!(
            "session expired: answered {:.0} ms after the deadline",
            (now_ms - session.deadline_ms).max(0.0)
        ),
    )
}
