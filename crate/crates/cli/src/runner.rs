//! `studio run`: scenario files in, report out.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use studio_core::orchestrator::{
    Backends, BackendOverrides, Orchestrator, OrchestratorError, PipelineConfig, Scenario,
};

use crate::report::ReportRow;
use crate::{exit_code_for, CliError};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub input: PathBuf,
    pub artifact_root: PathBuf,
    /// Backend keys from the command line; these win over scenario files.
    pub backends: BackendOverrides,
    pub jobs: usize,
    /// Replaces every scenario's seed.
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct Failure {
    pub scenario: String,
    pub error: OrchestratorError,
}

#[derive(Debug, Default)]
pub struct RunSummary {
    /// One row per successful scenario, in input order.
    pub rows: Vec<ReportRow>,
    pub failures: Vec<Failure>,
}

impl RunSummary {
    pub fn exit_code(&self) -> u8 {
        self.failures.iter().map(|f| exit_code_for(f.error.kind())).max().unwrap_or(0)
    }
}

/// A single file, or every `*.json` below a directory in path order.
pub fn collect_scenarios(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if input.is_file() {
        return Ok(vec![input.to_owned()]);
    }
    if !input.is_dir() {
        return Err(CliError::Invalid(format!("{} does not exist", input.display())));
    }
    let mut found = Vec::new();
    let mut pending = vec![input.to_owned()];
    while let Some(dir) = pending.pop() {
        let entries = std::fs::read_dir(&dir)
            .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", dir.display())))?;
        for entry in entries {
            let path = entry.map_err(|e| CliError::Invalid(e.to_string()))?.path();
            if path.is_dir() {
                pending.push(path);
            } else if path.extension().is_some_and(|e| e == "json") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

fn merge(scenario: &mut Scenario, flags: &BackendOverrides) {
    let b = scenario.backends.get_or_insert_with(BackendOverrides::default);
    let pick = |slot: &mut Option<String>, flag: &Option<String>| {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    };
    pick(&mut b.generation, &flags.generation);
    pick(&mut b.inpaint, &flags.inpaint);
    pick(&mut b.segmenter, &flags.segmenter);
    pick(&mut b.refiner, &flags.refiner);
    pick(&mut b.embedder, &flags.embedder);
}

/// Parses and checks every scenario first, then runs them all.
///
/// Nothing runs if any file fails to parse or names an unknown backend.
pub fn run(options: &RunOptions) -> Result<RunSummary, CliError> {
    let base = PipelineConfig { artifact_root: options.artifact_root.clone(), ..Default::default() };
    let mut scenarios = Vec::new();
    for path in collect_scenarios(&options.input)? {
        let mut scenario =
            Scenario::load(&path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        merge(&mut scenario, &options.backends);
        if let Some(seed) = options.seed {
            scenario.seed = seed;
        }
        Backends::resolve(&scenario.effective_config(&base))
            .map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        scenarios.push(scenario);
    }

    let orchestrator = Orchestrator::from_config(base)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let outcomes: Vec<_> = pool.install(|| scenarios.par_iter().map(|s| orchestrator.run_scenario(s)).collect());

    let mut summary = RunSummary::default();
    for (scenario, outcome) in scenarios.iter().zip(outcomes) {
        match outcome {
            Ok(o) => summary.rows.push(ReportRow::from(&o)),
            Err(error) => summary.failures.push(Failure { scenario: scenario.display_name().to_owned(), error }),
        }
    }
    Ok(summary)
}
