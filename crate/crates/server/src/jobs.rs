//! In-memory registry of stage jobs.

use std::collections::HashMap;
use std::sync::RwLock;

use serde::Serialize;
use studio_core::orchestrator::{Stage, StageResult};
use uuid::Uuid;

use crate::api::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

/// A stage running in the background. `done` carries the result,
/// `failed` carries the error.
#[derive(Debug, Clone, Serialize)]
pub struct JobHandle {
    pub job_id: Uuid,
    pub session_id: String,
    pub stage: Stage,
    pub status: JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ApiError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<StageResult>,
}

#[derive(Debug, Default)]
pub struct JobRegistry {
    jobs: RwLock<HashMap<Uuid, JobHandle>>,
}

impl JobRegistry {
    pub fn create(&self, session_id: &str, stage: Stage) -> JobHandle {
        let job = JobHandle {
            job_id: Uuid::new_v4(),
            session_id: session_id.to_owned(),
            stage,
            status: JobStatus::Pending,
            error: None,
            result: None,
        };
        self.jobs.write().unwrap().insert(job.job_id, job.clone());
        job
    }

    pub fn get(&self, id: Uuid) -> Option<JobHandle> {
        self.jobs.read().unwrap().get(&id).cloned()
    }

    fn update(&self, id: Uuid, f: impl FnOnce(&mut JobHandle)) {
        if let Some(job) = self.jobs.write().unwrap().get_mut(&id) {
            f(job);
        }
    }

    pub fn mark_running(&self, id: Uuid) {
        self.update(id, |j| j.status = JobStatus::Running);
    }

    pub fn finish(&self, id: Uuid, outcome: Result<StageResult, ApiError>) {
        self.update(id, |j| match outcome {
            Ok(result) => {
                j.status = JobStatus::Done;
                j.result = Some(result);
            }
            Err(error) => {
                j.status = JobStatus::Failed;
                j.error = Some(error);
            }
        });
    }
}
