//! Replicated generate/fit/rotate/KS pipelines.
//!
//! The first experiment fits the correct model to data from each generator;
//! the second fits the logistic model to every generator. Each (generator,
//! group size) cell runs `replications` independent pipelines and collects
//! the KS statistics into an empirical distribution function sample.
//!
//! Replications are embarrassingly parallel: each owns the RNG stream
//! addressed by `(master_seed, generator, m, replication, attempt)`, and
//! results reduce in replication order, so output is bit-identical for any
//! worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mle::{fit_mle, FitResult};
use crate::model::ModelSpec;
use crate::process::{KSResult, RotatedProcess};
use crate::rng::RngFactory;
use crate::sample::generate_sample;

/// Replications that fail (singular information) are redrawn from a fresh
/// stream at most this many times before the error propagates.
const MAX_ATTEMPTS: u32 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Fit each generator's own family.
    CorrectFit,
    /// Fit the logistic family to every generator.
    LogisticFit,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub total_trials: usize,
    pub m_values: Vec<usize>,
    pub replications: usize,
    pub grid_points: usize,
    pub master_seed: u64,
    pub experiment: ExperimentKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            total_trials: 96,
            m_values: vec![1, 2, 3],
            replications: 5000,
            grid_points: 100,
            master_seed: 0,
            experiment: ExperimentKind::CorrectFit,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() {
            return Err(Error::InvalidConfig("no group sizes requested".into()));
        }
        for &m in &self.m_values {
            if !(1..=3).contains(&m) {
                return Err(Error::InvalidConfig(format!(
                    "group size {m} unsupported (must be 1, 2 or 3)"
                )));
            }
            if !self.total_trials.is_multiple_of(m) {
                return Err(Error::InvalidConfig(format!(
                    "total trials {} not divisible by group size {m}",
                    self.total_trials
                )));
            }
        }
        if self.total_trials == 0 || self.replications == 0 || self.grid_points == 0 {
            return Err(Error::InvalidConfig(
                "trials, replications and grid points must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Sorted KS statistics of one (generator, fitted, m) cell.
#[derive(Clone, Debug)]
pub struct EDFSample {
    pub generator: String,
    pub fitted: String,
    pub m: usize,
    /// Sorted ascending, one value per replication.
    pub values: Vec<f64>,
    /// Replications whose MLE landed on an interval endpoint.
    pub boundary_count: usize,
}

impl EDFSample {
    pub fn new(
        generator: impl Into<String>,
        fitted: impl Into<String>,
        m: usize,
        mut values: Vec<f64>,
        boundary_count: usize,
    ) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            generator: generator.into(),
            fitted: fitted.into(),
            m,
            values,
            boundary_count,
        }
    }

    /// Right-continuous EDF: the fraction of values at most `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        let count = self.values.partition_point(|&v| v <= t);
        count as f64 / self.values.len() as f64
    }
}

/// Free-function form of [`EDFSample::evaluate`].
pub fn edf_evaluate(edf: &EDFSample, t: f64) -> f64 {
    edf.evaluate(t)
}

/// One experiment cell with its failure accounting.
#[derive(Clone, Debug)]
pub struct CellOutcome {
    pub sample: EDFSample,
    /// Replications that had to be redrawn after a failure.
    pub resamples: usize,
    /// Total subgroups flagged degenerate across replications.
    pub degenerate_groups: u64,
}

/// Result of one generate/fit/rotate/KS pipeline.
#[derive(Clone, Debug)]
pub struct Replication {
    pub ks: KSResult,
    pub fit: FitResult,
    pub degenerate_groups: u64,
}

/// Run a single pipeline: draw a sample from `generator` at its true
/// parameter, fit `fitted` by maximum likelihood, rotate and take the KS
/// statistic.
pub fn run_replication(
    generator: &ModelSpec,
    fitted: &ModelSpec,
    n: usize,
    m: usize,
    grid_points: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<Replication> {
    let sample = generate_sample(generator, generator.theta0(), n, m, rng)?;
    let fit = fit_mle(fitted, &sample)?;
    let process = RotatedProcess::new(fitted, &sample, fit.theta_hat)?;
    Ok(Replication {
        ks: process.ks(grid_points),
        fit,
        degenerate_groups: process.degenerate_groups(),
    })
}

/// Run the experiment over every (group size, generator) cell.
///
/// Failed replications are resampled from a fresh stream with their counts
/// surfaced; a cell aborts when failures exceed 1% of its replications.
pub fn run_experiment(
    config: &ExperimentConfig,
    models: &[ModelSpec],
) -> Result<Vec<CellOutcome>> {
    config.validate()?;
    if models.is_empty() {
        return Err(Error::InvalidConfig("no generator models".into()));
    }
    let factory = RngFactory::new(config.master_seed);
    let logistic = ModelSpec::logistic();
    let mut cells = Vec::new();
    for &m in &config.m_values {
        let n = config.total_trials / m;
        for (g_idx, generator) in models.iter().enumerate() {
            let fitted = match config.experiment {
                ExperimentKind::CorrectFit => generator,
                ExperimentKind::LogisticFit => &logistic,
            };
            let reps: Vec<Result<(f64, bool, u32, u64)>> = (0..config.replications)
                .into_par_iter()
                .map(|rep| {
                    let mut attempt = 0u32;
                    loop {
                        let mut rng =
                            factory.replication(g_idx as u32, m as u32, rep as u32, attempt);
                        match run_replication(generator, fitted, n, m, config.grid_points, &mut rng)
                        {
                            Ok(r) => {
                                return Ok((
                                    r.ks.ks,
                                    r.fit.at_boundary,
                                    attempt,
                                    r.degenerate_groups,
                                ))
                            }
                            Err(
                                Error::SingularInformation { .. } | Error::Estimation { .. },
                            ) if attempt < MAX_ATTEMPTS => attempt += 1,
                            Err(e) => return Err(e),
                        }
                    }
                })
                .collect();

            let mut values = Vec::with_capacity(config.replications);
            let mut boundary_count = 0usize;
            let mut resamples = 0usize;
            let mut degenerate_groups = 0u64;
            for rep in reps {
                let (ks, at_boundary, attempts, degenerate) = rep?;
                values.push(ks);
                boundary_count += usize::from(at_boundary);
                resamples += attempts as usize;
                degenerate_groups += degenerate;
            }
            if resamples * 100 > config.replications {
                return Err(Error::TooManyFailures {
                    cell: format!("{} m={m}", generator.name()),
                    failures: resamples,
                    replications: config.replications,
                });
            }
            cells.push(CellOutcome {
                sample: EDFSample::new(
                    generator.name(),
                    fitted.name(),
                    m,
                    values,
                    boundary_count,
                ),
                resamples,
                degenerate_groups,
            });
        }
    }
    Ok(cells)
}
