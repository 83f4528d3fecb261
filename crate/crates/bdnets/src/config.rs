//! Run configuration: the system description plus caps, sampling knobs and
//! output options, parsed from a single structured text file.
//!
//! Rationals are written as `p` or `p/q` strings and parsed exactly; no
//! floating point notation is accepted anywhere.

use serde::Deserialize;

use crate::assembly::BuildParams;
use crate::system::{ExtensionSpec, StepRows, SystemSpec};
use crate::verify::{SuiteSelection, VerifyParams};
use crate::{parse_q, Error, Q};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    system: SystemSection,
    #[serde(default)]
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    stages: Vec<u32>,
    extension: String,
    #[serde(default)]
    steps: Vec<StepSection>,
    lambda_bar: u32,
    n_max: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepSection {
    stage: usize,
    rows: Vec<RowSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowSection {
    gamma: u32,
    coeffs: Vec<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    build_stages: Option<usize>,
    top_shell: Option<bool>,
    max_block: Option<u64>,
    a: Option<String>,
    grid_step: Option<String>,
    seed: Option<u64>,
    molecule_samples: Option<usize>,
    pair_samples: Option<usize>,
    prefix_indices: Option<usize>,
    molecule_support: Option<usize>,
    compat_cap: Option<usize>,
    out_dir: Option<String>,
    suites: Option<Vec<String>>,
    workers: Option<usize>,
}

/// Fully resolved configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub system: SystemSpec,
    pub params: BuildParams,
    pub a: Q,
    pub grid_step: Q,
    pub seed: u64,
    pub molecule_samples: usize,
    pub pair_samples: usize,
    pub prefix_indices: usize,
    pub molecule_support: usize,
    pub compat_cap: usize,
    pub out_dir: String,
    pub suites: SuiteSelection,
    pub workers: usize,
}

impl RunConfig {
    pub fn verify_params(&self) -> VerifyParams {
        VerifyParams {
            a: self.a.clone(),
            grid_step: self.grid_step.clone(),
            seed: self.seed,
            molecule_samples: self.molecule_samples,
            pair_samples: self.pair_samples,
            prefix_indices: self.prefix_indices,
            molecule_support: self.molecule_support,
            compat_cap: self.compat_cap,
            max_block: self.params.max_block,
        }
    }
}

/// Parses and resolves a configuration document. Parse failures carry the
/// line/column diagnostics of the underlying reader.
pub fn parse_config(text: &str) -> Result<RunConfig, Error> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let extension = match file.system.extension.as_str() {
        "zero" => {
            if !file.system.steps.is_empty() {
                return Err(Error::Config("preset `zero` does not take explicit steps".into()));
            }
            ExtensionSpec::Zero
        }
        "affine" => {
            if !file.system.steps.is_empty() {
                return Err(Error::Config("preset `affine` does not take explicit steps".into()));
            }
            ExtensionSpec::Affine
        }
        "explicit" => ExtensionSpec::Explicit(
            file.system
                .steps
                .iter()
                .map(|s| {
                    let rows = s
                        .rows
                        .iter()
                        .map(|r| {
                            let coeffs = r
                                .coeffs
                                .iter()
                                .map(|c| {
                                    parse_q(c).map_err(|_| {
                                        Error::Config(format!(
                                            "system.steps stage {} gamma {}: `{c}` is not an exact rational",
                                            s.stage, r.gamma
                                        ))
                                    })
                                })
                                .collect::<Result<Vec<_>, _>>()?;
                            Ok((r.gamma, coeffs))
                        })
                        .collect::<Result<Vec<_>, Error>>()?;
                    Ok(StepRows { stage: s.stage, rows })
                })
                .collect::<Result<Vec<_>, Error>>()?,
        ),
        other => {
            return Err(Error::Config(format!(
                "system.extension must be `zero`, `affine` or `explicit`, got `{other}`"
            )))
        }
    };

    let system = SystemSpec {
        stage_sizes: file.system.stages.clone(),
        lambda_bar: file.system.lambda_bar,
        extension,
        n_max: file.system.n_max,
    };
    let n_stages = system.stage_sizes.len();

    let run = file.run;
    let n_cap = run.build_stages.unwrap_or(n_stages);
    if n_cap == 0 || n_cap > n_stages {
        return Err(Error::Config(format!(
            "run.build_stages = {n_cap} must lie in 1..={n_stages}"
        )));
    }
    let max_block = run.max_block.unwrap_or(1_000_000);
    if max_block == 0 {
        return Err(Error::Config("run.max_block must be positive".into()));
    }
    let a = match &run.a {
        Some(text) => parse_q(text)
            .map_err(|_| Error::Config(format!("run.a: `{text}` is not an exact rational")))?,
        None => crate::q_int(2),
    };
    let grid_step = match &run.grid_step {
        Some(text) => parse_q(text).map_err(|_| {
            Error::Config(format!("run.grid_step: `{text}` is not an exact rational"))
        })?,
        None => crate::q_int(1),
    };
    if !num_traits::Signed::is_positive(&grid_step) {
        return Err(Error::Config("run.grid_step must be positive".into()));
    }
    let suites = SuiteSelection::parse(&run.suites.unwrap_or_else(|| vec!["all".into()]))?;
    let workers = run.workers.unwrap_or(1);
    if workers == 0 {
        return Err(Error::Config("run.workers must be positive".into()));
    }

    Ok(RunConfig {
        system,
        params: BuildParams {
            n_cap,
            top_shell: run.top_shell.unwrap_or(false),
            max_block,
        },
        a,
        grid_step,
        seed: run.seed.unwrap_or(1),
        molecule_samples: run.molecule_samples.unwrap_or(60),
        pair_samples: run.pair_samples.unwrap_or(20),
        prefix_indices: run.prefix_indices.unwrap_or(12),
        molecule_support: run.molecule_support.unwrap_or(5),
        compat_cap: run.compat_cap.unwrap_or(8192),
        out_dir: run.out_dir.unwrap_or_else(|| "out".into()),
        suites,
        workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::q_ratio;

    const P0: &str = r#"
[system]
stages = [1, 2, 3]
extension = "zero"
lambda_bar = 2
n_max = 3

[run]
build_stages = 2
a = "2"
seed = 7
"#;

    #[test]
    fn parses_the_reference_config() {
        let cfg = parse_config(P0).unwrap();
        assert_eq!(cfg.system.stage_sizes, vec![1, 2, 3]);
        assert_eq!(cfg.params.n_cap, 2);
        assert!(!cfg.params.top_shell);
        assert_eq!(cfg.a, crate::q_int(2));
        assert_eq!(cfg.seed, 7);
        assert!(cfg.suites.wants("free"));
    }

    #[test]
    fn parses_explicit_rows_exactly() {
        let text = r#"
[system]
stages = [2, 3]
extension = "explicit"
lambda_bar = 2
[[system.steps]]
stage = 1
rows = [{ gamma = 2, coeffs = ["1/2", "-3/4"] }]
"#;
        let cfg = parse_config(text).unwrap();
        match &cfg.system.extension {
            ExtensionSpec::Explicit(steps) => {
                assert_eq!(steps.len(), 1);
                assert_eq!(steps[0].rows[0].1, vec![q_ratio(1, 2), q_ratio(-3, 4)]);
            }
            other => panic!("expected explicit extension, got {other:?}"),
        }
    }

    #[test]
    fn rejects_inexact_and_malformed_input() {
        let float = P0.replace("a = \"2\"", "a = \"2.5\"");
        assert!(parse_config(&float).is_err());
        let bad_suite = P0.replace("seed = 7", "suites = [\"bogus\"]");
        assert!(parse_config(&bad_suite).is_err());
        let bad_stage = P0.replace("build_stages = 2", "build_stages = 9");
        assert!(parse_config(&bad_stage).is_err());
        let unknown = P0.replace("seed = 7", "sneed = 7");
        let err = parse_config(&unknown).unwrap_err();
        assert!(err.to_string().contains("sneed"));
    }

    #[test]
    fn empty_suites_mean_build_only() {
        let text = P0.replace("seed = 7", "suites = []");
        let cfg = parse_config(&text).unwrap();
        assert!(cfg.suites.is_empty());
        assert!(!cfg.suites.wants("system"));
    }
}
