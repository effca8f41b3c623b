use std::path::Path;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::experiments::run_experiment;
use crate::report::SuiteReport;
use crate::spec::{ExperimentSpec, SuiteConfig};

/// Runs every experiment on a pool of `workers` threads. Artifacts go to
/// `<out>/<name>/`; reports are written afterwards, one at a time.
pub fn run_suite(config: &SuiteConfig, workers: usize, out: Option<&Path>) -> Result<SuiteReport> {
    let specs = unique_names(&config.experiments);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| LabError::Config(format!("cannot start {workers} workers: {e}")))?;
    let reports = pool.install(|| {
        specs
            .par_iter()
            .map(|spec| {
                let dir = out.map(|o| o.join(spec.display_name()));
                run_experiment(spec, dir.as_deref())
            })
            .collect::<Vec<_>>()
    });
    let suite = SuiteReport::from_reports(reports);
    if let Some(dir) = out {
        for r in &suite.reports {
            r.write(dir)?;
        }
        suite.write(dir)?;
    }
    Ok(suite)
}

/// Suffixes repeated display names with their position.
fn unique_names(specs: &[ExperimentSpec]) -> Vec<ExperimentSpec> {
    let names: Vec<String> = specs.iter().map(ExperimentSpec::display_name).collect();
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut s = s.clone();
            if names.iter().filter(|n| **n == names[i]).count() > 1 {
                s.name = Some(format!("{}_{i}", names[i]));
            }
            s
        })
        .collect()
}
