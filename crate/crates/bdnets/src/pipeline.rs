//! Pipeline orchestration: build, verify, export.

use std::path::PathBuf;

use crate::assembly::Construction;
use crate::config::RunConfig;
use crate::export;
use crate::verify::{self, Report};
use crate::Error;

pub struct PipelineOutcome {
    pub construction: Construction,
    pub report: Report,
    pub out_dir: PathBuf,
    pub written: Vec<String>,
}

impl PipelineOutcome {
    pub fn all_pass(&self) -> bool {
        self.report.all_pass()
    }
}

/// Builds the construction, runs the selected suites inside a worker pool of
/// the configured size, and writes every artifact. An empty suite selection
/// is a build-only run (exports are still written).
pub fn run_pipeline(cfg: &RunConfig, out_dir_override: Option<PathBuf>) -> Result<PipelineOutcome, Error> {
    let construction = Construction::build(&cfg.system, cfg.params.clone())?;
    let report = run_suites(&construction, cfg)?;
    let out_dir = out_dir_override.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let written = export::write_all(&out_dir, &construction, &report)?;
    Ok(PipelineOutcome { construction, report, out_dir, written })
}

/// Runs the selected suites without touching the filesystem.
pub fn run_suites(construction: &Construction, cfg: &RunConfig) -> Result<Report, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    pool.install(|| verify::run(construction, &cfg.verify_params(), &cfg.suites))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn build_only_run_writes_exports() {
        let cfg = parse_config(
            r#"
[system]
stages = [1, 2]
extension = "zero"
lambda_bar = 2
[run]
suites = []
"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_pipeline(&cfg, Some(dir.path().to_path_buf())).unwrap();
        assert!(outcome.all_pass());
        assert!(outcome.report.checks.is_empty());
        assert!(outcome.written.contains(&"blocks.txt".to_string()));
        assert!(dir.path().join("order.txt").exists());
    }
}
