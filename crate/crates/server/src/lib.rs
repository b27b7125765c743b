//! HTTP service over the studio pipeline.
//!
//! Long stages answer `202` with a [`jobs::JobHandle`]; clients poll
//! `GET /jobs/{job_id}` until it is `done` or `failed`. `GET /spec` describes
//! the routes and the session state machine.

pub mod api;
pub mod config;
pub mod jobs;

pub use api::{router, AppState};
pub use config::ServerConfig;
