use std::fmt;

use iritrack_core::decision::{FaceBoxTrace, Verdict};
use iritrack_core::pattern::{Pattern, SlipperSchedule};
use iritrack_core::trajectory::Trajectory;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    Issued,
    Submitted,
    Decided,
    Expired,
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SessionState::Issued => "issued",
            SessionState::Submitted => "submitted",
            SessionState::Decided => "decided",
            SessionState::Expired => "expired",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("session cannot move from {from} to {to}")]
pub struct TransitionError {
    pub from: SessionState,
    pub to: SessionState,
}

/// One issued challenge and, once answered, its outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: Uuid,
    pub pattern: Pattern,
    pub schedule: SlipperSchedule,
    /// Wall-clock issue time, ms since the Unix epoch.
    pub issued_at_ms: f64,
    pub deadline_ms: f64,
    pub state: SessionState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Trajectory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_trace: Option<FaceBoxTrace>,
}

impl Session {
    pub fn new(id: Uuid, pattern: Pattern, schedule: SlipperSchedule, issued_at_ms: f64, grace_ms: f64) -> Self {
        let deadline_ms = issued_at_ms + schedule.total_duration_ms + grace_ms;
        Self {
            id,
            pattern,
            schedule,
            issued_at_ms,
            deadline_ms,
            state: SessionState::Issued,
            verdict: None,
            trajectory: None,
            face_trace: None,
        }
    }

    pub fn is_past_deadline(&self, now_ms: f64) -> bool {
        now_ms > self.deadline_ms
    }

    fn transition(&mut self, to: SessionState) -> Result<(), TransitionError> {
        use SessionState::*;
        match (self.state, to) {
            (Issued, Submitted) | (Submitted, Decided) | (Issued, Expired) => {
                self.state = to;
                Ok(())
            }
            (from, to) => Err(TransitionError { from, to }),
        }
    }

    /// Claims the session for evaluation.
    pub fn submit(&mut self) -> Result<(), TransitionError> {
        self.transition(SessionState::Submitted)
    }

    /// Records the verdict of a claimed session.
    pub fn decide(&mut self, verdict: Verdict) -> Result<(), TransitionError> {
        self.transition(SessionState::Decided)?;
        self.verdict = Some(verdict);
        Ok(())
    }

    pub fn expire(&mut self) -> Result<(), TransitionError> {
        self.transition(SessionState::Expired)
    }
}
