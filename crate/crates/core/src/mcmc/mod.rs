//! Posterior sampling with the accuracies integrated out.
//!
//! Each sweep visits every group palindromically: assignments, weights,
//! components, `K`, then the same in reverse. Components move by ARMS along
//! the ray through the origin and then around the arc at fixed radius.
//! `K` moves by birth and death of empty components. Accuracies are drawn
//! from their conditionals only when a sample is stored.

mod arms;
pub mod diagnostics;
mod kernels;

use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Hyperparams, LatentState};
use crate::random::rng_for;

pub use arms::{arms_step, ArmsOutcome};
pub use diagnostics::{batch_means, rhat, BatchMeans};
pub use kernels::{
    init_state, log_joint, log_joint_group, resample_p, sample_assignment, sample_weights,
    GroupData, Kernel,
};

/// Run-length and tuning settings of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_samples: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub ars_max_points: usize,
    pub k_max: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_samples: 10_000,
            burn_in: 1_000,
            thin: 1,
            seed: 0,
            ars_max_points: 40,
            k_max: 50,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 || self.k_max == 0 || self.ars_max_points == 0 {
            return Err(Error::InvalidArgument(format!(
                "thin, k_max and ars_max_points must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Number of samples a run stores.
    pub fn stored(&self) -> usize {
        self.n_samples / self.thin
    }
}

/// Acceptance counts accumulated over a chain.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub birth_proposed: u64,
    pub birth_accepted: u64,
    pub death_proposed: u64,
    pub death_accepted: u64,
    pub arms_steps: u64,
    pub arms_moved: u64,
    pub fallback_steps: u64,
    pub fallback_accepted: u64,
}

fn rate(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl MoveStats {
    pub fn birth_rate(&self) -> Option<f64> {
        rate(self.birth_accepted, self.birth_proposed)
    }

    pub fn death_rate(&self) -> Option<f64> {
        rate(self.death_accepted, self.death_proposed)
    }

    /// Fraction of `K` proposals, births and deaths together, accepted.
    pub fn k_move_rate(&self) -> Option<f64> {
        rate(
            self.birth_accepted + self.death_accepted,
            self.birth_proposed + self.death_proposed,
        )
    }

    /// Fraction of ARMS draws whose Metropolis step moved.
    pub fn arms_rate(&self) -> Option<f64> {
        rate(self.arms_moved, self.arms_steps)
    }

    pub fn fallback_rate(&self) -> Option<f64> {
        rate(self.fallback_accepted, self.fallback_steps)
    }
}

/// Summary of a finished chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub moves: MoveStats,
    /// Batch means of the post burn-in log-joint trace.
    pub log_joint: Option<BatchMeans>,
}

/// One stored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// One-based sweep index counted from the end of burn-in.
    pub sweep: usize,
    pub state: LatentState,
    pub log_joint: f64,
}

/// The output of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub hyper: Hyperparams,
    pub config: ChainConfig,
    pub dataset: Dataset,
    pub samples: Vec<Sample>,
    /// Log-joint after every sweep, burn-in included.
    pub trace: Vec<f64>,
    pub diagnostics: ChainDiagnostics,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Runs one chain on generator stream 0.
pub fn run_chain(dataset: &Dataset, hyper: &Hyperparams, config: &ChainConfig) -> Result<SampleSet> {
    run_chain_on_stream(dataset, hyper, config, 0)
}

/// Runs one chain on the given stream of `config.seed`.
pub fn run_chain_on_stream(
    dataset: &Dataset,
    hyper: &Hyperparams,
    config: &ChainConfig,
    stream: u64,
) -> Result<SampleSet> {
    hyper.validate()?;
    config.validate()?;
    let mut rng = rng_for(config.seed, stream);
    let mut kernel = Kernel::new(hyper, config);
    let mut state = init_state(dataset, &mut rng);
    let mut trace = Vec::with_capacity(config.burn_in + config.n_samples);
    let mut samples = Vec::with_capacity(config.stored());
    for _ in 0..config.burn_in {
        kernel.sweep(&mut state, dataset, &mut rng);
        trace.push(log_joint(&state, dataset, hyper));
    }
    for i in 1..=config.n_samples {
        kernel.sweep(&mut state, dataset, &mut rng);
        let lj = log_joint(&state, dataset, hyper);
        trace.push(lj);
        if i % config.thin == 0 {
            resample_p(&mut state, dataset, &mut rng);
            samples.push(Sample {
                sweep: i,
                state: state.clone(),
                log_joint: lj,
            });
        }
    }
    let diagnostics = ChainDiagnostics {
        moves: kernel.stats,
        log_joint: batch_means(&trace[config.burn_in..]),
    };
    Ok(SampleSet {
        hyper: *hyper,
        config: *config,
        dataset: dataset.clone(),
        samples,
        trace,
        diagnostics,
    })
}

/// Runs `chains` chains concurrently, chain `c` on stream `c`.
pub fn run_chains(
    dataset: &Dataset,
    hyper: &Hyperparams,
    config: &ChainConfig,
    chains: usize,
) -> Result<Vec<SampleSet>> {
    thread::scope(|scope| {
        let handles: Vec<_> = (0..chains as u64)
            .map(|c| scope.spawn(move || run_chain_on_stream(dataset, hyper, config, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain thread panicked"))
            .collect()
    })
}

/// R-hat of the post burn-in log-joint traces.
pub fn log_joint_rhat(sets: &[SampleSet]) -> Option<f64> {
    let traces: Vec<&[f64]> = sets
        .iter()
        .map(|s| &s.trace[s.config.burn_in.min(s.trace.len())..])
        .collect();
    rhat(&traces)
}
