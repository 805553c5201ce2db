//! Protocol simulation: single trials, tallies of the five score configurations,
//! and sample collectors for distribution tests.
//!
//! Every trial draws from its own ChaCha8 stream seeded by `(master_seed, index)`,
//! and batches are merged in index order, so a tally is a pure function of its
//! configuration whatever executor runs it.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analytics::SchemeParams;
use crate::channel::{ChannelParams, ModulationParams};
use crate::exec::Executor;
use crate::numerics::gaussian_cdf;
use crate::reconciliation::{generate_codebook, mod1, threshold, Decision, EmpiricalM, OutcomeCase, Scorer, Table};
use crate::{Error, Result};

/// How Alice's block `x` is chosen in each trial.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TrialMode {
    /// Fresh Gaussian `x` every trial.
    FreeM,
    /// Fresh Gaussian direction, rescaled so that `sum x^2 / sigma_X^2 = m`.
    FixedM(f64),
    /// The same `x` in every trial.
    FixedX(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialConfig {
    pub trials: u64,
    pub master_seed: u64,
    pub scheme: SchemeParams,
    pub n: usize,
    pub channel: ChannelParams,
    pub modulation: ModulationParams,
    pub mode: TrialMode,
    /// Reuse one table (seeded by `master_seed`) for every trial. Experimental;
    /// the protocol proper draws a fresh table per symbol.
    pub reuse_table: bool,
}

impl TrialConfig {
    /// Resolves the blocklength from the scheme and validates the mode.
    pub fn new(
        trials: u64,
        master_seed: u64,
        scheme: SchemeParams,
        channel: ChannelParams,
        modulation: ModulationParams,
        mode: TrialMode,
    ) -> Result<Self> {
        if trials < 1 {
            return Err(Error::invalid("trials", "must be at least 1"));
        }
        let n = scheme.blocklength(channel, modulation)?;
        match &mode {
            TrialMode::FixedM(m) if !(*m > 0.0 && m.is_finite()) => {
                return Err(Error::invalid("m", "fixed energy must be positive"));
            }
            TrialMode::FixedX(x) if x.len() != n => {
                return Err(Error::invalid("x", "fixed block length differs from n"));
            }
            _ => {}
        }
        if scheme.q > u32::MAX as u64 {
            return Err(Error::invalid("q", "simulation supports q up to 2^32 - 1"));
        }
        Ok(TrialConfig {
            trials,
            master_seed,
            scheme,
            n,
            channel,
            modulation,
            mode,
            reuse_table: false,
        })
    }

    pub fn with_reused_table(mut self) -> Self {
        self.reuse_table = true;
        self
    }

    fn q(&self) -> usize {
        self.scheme.q as usize
    }
}

/// Seed of trial `index` under `master`; also used as that trial's table seed.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    z = (z ^ (z >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    z ^ (z >> 33)
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize, sd: f64) -> Vec<f64> {
    (0..len).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Alice's block for one trial.
fn draw_x(rng: &mut ChaCha8Rng, config: &TrialConfig) -> Vec<f64> {
    let sd = libm::sqrt(config.modulation.sigma_x2());
    match &config.mode {
        TrialMode::FreeM => gaussian_vec(rng, config.n, sd),
        TrialMode::FixedM(m) => {
            let mut x = gaussian_vec(rng, config.n, sd);
            let current = EmpiricalM::from_x(&x, config.modulation).value();
            let scale = libm::sqrt(m / current);
            x.iter_mut().for_each(|v| *v *= scale);
            x
        }
        TrialMode::FixedX(x) => x.clone(),
    }
}

/// Bob's outcome `y = sqrt(T) x + noise`, noise variance `sigma_{Y|X}^2`.
fn draw_y(rng: &mut ChaCha8Rng, x: &[f64], scorer: &Scorer, transmission: f64) -> Vec<f64> {
    let sqrt_t = libm::sqrt(transmission);
    let sd = libm::sqrt(scorer.variances().sigma_y_given_x2);
    x.iter()
        .map(|&xi| sqrt_t * xi + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Result of one simulated block.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialOutcome {
    pub decision: Decision,
    pub case: OutcomeCase,
    /// Bob's secret row.
    pub u: usize,
    pub m: f64,
}

/// Work buffers reused across the trials of one batch.
struct Workspace {
    scorer: Scorer,
    w: Vec<f64>,
}

impl Workspace {
    fn new(config: &TrialConfig) -> Result<Self> {
        Ok(Workspace {
            scorer: Scorer::new(config.channel, config.modulation)?,
            w: vec![0.0; config.n],
        })
    }
}

/// One full round: Alice's block, Bob's measurement, a fresh table, masking,
/// scoring of every row and the threshold decision.
pub fn run_trial(seed: u64, config: &TrialConfig) -> Result<TrialOutcome> {
    let mut ws = Workspace::new(config)?;
    trial_in(seed, config, &mut ws)
}

fn trial_in(seed: u64, config: &TrialConfig, ws: &mut Workspace) -> Result<TrialOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = config.q();
    let x = draw_x(&mut rng, config);
    let y = draw_y(&mut rng, &x, &ws.scorer, config.channel.transmission());
    let u = rng.random_range(0..q);
    let table_seed = if config.reuse_table { config.master_seed } else { seed };
    let table = generate_codebook(table_seed, q, config.n)?;

    let sigma_y = ws.scorer.variances().sigma_y();
    table.row_into(u, &mut ws.w);
    let c: Vec<f64> = y
        .iter()
        .zip(&ws.w)
        .map(|(&yi, &wi)| mod1(gaussian_cdf(yi, sigma_y) + wi))
        .collect();

    let m = EmpiricalM::from_x(&x, config.modulation);
    let theta = threshold(m, config.n, config.scheme.alpha, config.channel, config.modulation)?.theta;
    let kx = ws.scorer.centered(&x);

    let true_below = ws.scorer.score_row_below(&kx, &ws.w, &c, theta).is_some();
    let mut others = 0usize;
    let mut other_row = 0usize;
    for row in (0..q).filter(|&r| r != u) {
        table.row_into(row, &mut ws.w);
        if ws.scorer.score_row_below(&kx, &ws.w, &c, theta).is_some() {
            others += 1;
            other_row = row;
            // two competitors settle the case whatever the remaining rows do
            if others >= 2 {
                break;
            }
        }
    }
    let case = OutcomeCase::from_counts(true_below, others);
    let decision = match case {
        OutcomeCase::TrueAccept => Decision::Accept(u),
        OutcomeCase::FalseAccept => Decision::Accept(other_row),
        _ => Decision::Reject,
    };
    Ok(TrialOutcome {
        decision,
        case,
        u,
        m: m.value(),
    })
}

/// Counts of the five score configurations plus the accepted index pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialTally {
    /// Indexed by [`OutcomeCase::index`].
    pub counts: [u64; 5],
    /// `(Alice's decoded row, Bob's row)` for every accepted trial, in trial order.
    pub accepted: Vec<(u32, u32)>,
}

/// A rate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn binomial(successes: u64, total: u64) -> Self {
        if total == 0 {
            return Estimate {
                value: 0.0,
                std_error: 0.0,
            };
        }
        let p = successes as f64 / total as f64;
        Estimate {
            value: p,
            std_error: libm::sqrt(p * (1.0 - p) / total as f64),
        }
    }

    /// `(value - expected) / std_error`, using the expected value's own binomial
    /// spread when the sample shows no variation.
    pub fn z_score(&self, expected: f64, total: u64) -> f64 {
        let se = if self.std_error > 0.0 {
            self.std_error
        } else {
            libm::sqrt(expected * (1.0 - expected) / total as f64)
        };
        if se == 0.0 {
            return if self.value == expected { 0.0 } else { f64::INFINITY };
        }
        (self.value - expected) / se
    }
}

impl TrialTally {
    pub fn record(&mut self, outcome: &TrialOutcome) {
        self.counts[outcome.case.index()] += 1;
        if let Decision::Accept(hat) = outcome.decision {
            self.accepted.push((hat as u32, outcome.u as u32));
        }
    }

    /// Appends `other`; merging partial tallies in trial order reproduces the
    /// sequential tally exactly.
    pub fn merge(&mut self, other: TrialTally) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.accepted.extend(other.accepted);
    }

    pub fn trials(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, case: OutcomeCase) -> u64 {
        self.counts[case.index()]
    }

    pub fn p_ta(&self) -> Estimate {
        Estimate::binomial(self.count(OutcomeCase::TrueAccept), self.trials())
    }

    pub fn p_fa(&self) -> Estimate {
        Estimate::binomial(self.count(OutcomeCase::FalseAccept), self.trials())
    }

    pub fn p_acc(&self) -> Estimate {
        Estimate::binomial(
            self.count(OutcomeCase::TrueAccept) + self.count(OutcomeCase::FalseAccept),
            self.trials(),
        )
    }

    /// False accepts among accepts.
    pub fn ser(&self) -> Estimate {
        let acc = self.count(OutcomeCase::TrueAccept) + self.count(OutcomeCase::FalseAccept);
        Estimate::binomial(self.count(OutcomeCase::FalseAccept), acc)
    }

    /// Fraction of trials in each case.
    pub fn frequencies(&self) -> [f64; 5] {
        let total = self.trials().max(1) as f64;
        self.counts.map(|c| c as f64 / total)
    }
}

/// Trials handed to one executor task.
const CHUNK: u64 = 256;

/// Runs `config.trials` trials and merges them in index order.
pub fn run_batch<E: Executor>(config: &TrialConfig, executor: &E) -> Result<TrialTally> {
    let starts: Vec<u64> = (0..config.trials).step_by(CHUNK as usize).collect();
    let parts = executor.map(&starts, |&start| -> Result<TrialTally> {
        let mut ws = Workspace::new(config)?;
        let mut tally = TrialTally::default();
        for index in start..(start + CHUNK).min(config.trials) {
            let outcome = trial_in(trial_seed(config.master_seed, index), config, &mut ws)?;
            tally.record(&outcome);
        }
        Ok(tally)
    });
    let mut total = TrialTally::default();
    for part in parts {
        total.merge(part?);
    }
    Ok(total)
}

/// Which row's score [`score_samples`] collects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ScoreKind {
    /// `S_u / sigma_{Y|X}^2` with `x` fixed and Bob's noise redrawn.
    TrueCodeword,
    /// `S_l / sigma_Y^2` for one `l != u` with `x`, `y`, `u` fixed and the table redrawn.
    WrongCodeword,
}

/// Normalized score samples for distribution tests, together with the `m` of the
/// fixed block they were drawn at.
///
/// Needs a fixed-energy or fixed-block mode; the block is drawn once from the
/// master seed.
pub fn score_samples<E: Executor>(
    config: &TrialConfig,
    kind: ScoreKind,
    samples: usize,
    executor: &E,
) -> Result<(Vec<f64>, f64)> {
    if matches!(config.mode, TrialMode::FreeM) {
        return Err(Error::invalid("mode", "score samples need a fixed m or a fixed x"));
    }
    let scorer = Scorer::new(config.channel, config.modulation)?;
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.master_seed, u64::MAX));
    let x = draw_x(&mut rng, config);
    let y_fixed = draw_y(&mut rng, &x, &scorer, config.channel.transmission());
    let q = config.q();
    let u = rng.random_range(0..q);
    let wrong = (u + 1) % q;
    let m = EmpiricalM::from_x(&x, config.modulation).value();
    let kx = scorer.centered(&x);
    let var = scorer.variances();
    let sigma_y = var.sigma_y();

    let indices: Vec<u64> = (0..samples as u64).collect();
    let out = executor.map(&indices, |&i| -> Result<f64> {
        let seed = trial_seed(config.master_seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = generate_codebook(seed, q, config.n)?;
        let mut w = vec![0.0; config.n];
        let y = match kind {
            ScoreKind::TrueCodeword => draw_y(&mut rng, &x, &scorer, config.channel.transmission()),
            ScoreKind::WrongCodeword => y_fixed.clone(),
        };
        table.row_into(u, &mut w);
        let c: Vec<f64> = y
            .iter()
            .zip(&w)
            .map(|(&yi, &wi)| mod1(gaussian_cdf(yi, sigma_y) + wi))
            .collect();
        Ok(match kind {
            ScoreKind::TrueCodeword => scorer.score_row(&kx, &w, &c) / var.sigma_y_given_x2,
            ScoreKind::WrongCodeword => {
                table.row_into(wrong, &mut w);
                scorer.score_row(&kx, &w, &c) / var.sigma_y2
            }
        })
    });
    let values = out.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok((values, m))
}

/// Table used when collecting masked values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSource {
    /// A fresh pseudorandom table per block, as in the protocol.
    Fresh,
    /// All-zero table, so the announced values are `F_Y(y)` itself.
    Zero,
}

/// Bob's announced values `c` over `blocks` simulated blocks with his row fixed
/// at `u`, flattened in block order.
pub fn collect_masked<E: Executor>(
    config: &TrialConfig,
    u: usize,
    blocks: usize,
    mask: MaskSource,
    executor: &E,
) -> Result<Vec<f64>> {
    if u >= config.q() {
        return Err(Error::invalid("u", "row index out of range"));
    }
    let scorer = Scorer::new(config.channel, config.modulation)?;
    let sigma_y = scorer.variances().sigma_y();
    let indices: Vec<u64> = (0..blocks as u64).collect();
    let parts = executor.map(&indices, |&i| -> Result<Vec<f64>> {
        let seed = trial_seed(config.master_seed, i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = draw_x(&mut rng, config);
        let y = draw_y(&mut rng, &x, &scorer, config.channel.transmission());
        let mut w = vec![0.0; config.n];
        if mask == MaskSource::Fresh {
            generate_codebook(seed, config.q(), config.n)?.row_into(u, &mut w);
        }
        Ok(y.iter()
            .zip(&w)
            .map(|(&yi, &wi)| mod1(gaussian_cdf(yi, sigma_y) + wi))
            .collect())
    });
    let mut out = Vec::with_capacity(blocks * config.n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Concatenated binary representations of accepted indices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AcceptedBits {
    /// Alice's bits, most significant bit of each index first.
    pub bits: Vec<bool>,
    pub bit_errors: usize,
    pub symbol_errors: usize,
    pub ber: f64,
}

/// Bits needed to write an index below `q`.
pub fn bits_per_symbol(q: u64) -> u32 {
    64 - (q - 1).leading_zeros()
}

/// Alice's raw key from the first `blocks` accepted symbols, and its bit error
/// rate against Bob's indices.
pub fn accumulate_accepted(tally: &TrialTally, blocks: usize, q: u64) -> Result<AcceptedBits> {
    if tally.accepted.len() < blocks {
        return Err(Error::InsufficientAccepts {
            available: tally.accepted.len(),
            required: blocks,
        });
    }
    let width = bits_per_symbol(q);
    let mut bits = Vec::with_capacity(blocks * width as usize);
    let mut bit_errors = 0usize;
    let mut symbol_errors = 0usize;
    for &(hat, u) in &tally.accepted[..blocks] {
        for b in (0..width).rev() {
            bits.push((hat >> b) & 1 == 1);
        }
        bit_errors += (hat ^ u).count_ones() as usize;
        symbol_errors += usize::from(hat != u);
    }
    let total = bits.len();
    Ok(AcceptedBits {
        bits,
        bit_errors,
        symbol_errors,
        ber: if total == 0 {
            0.0
        } else {
            bit_errors as f64 / total as f64
        },
    })
}
