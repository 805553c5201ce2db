//! Codebooks, Bob's masking, Alice's scores and the accept/reject rule.
//!
//! Row indices are 0-based throughout: a codebook of size `q` has rows `0..q`.

use alloc::vec;
use alloc::vec::Vec;

use crate::channel::{derived_variances, ChannelParams, DerivedVariances, ModulationParams};
use crate::numerics::{gaussian_cdf, std_normal_quantile};
use crate::{Error, Result};

/// Anything that can serve as the `q x n` table of uniform entries.
pub trait Table {
    fn rows(&self) -> usize;
    fn len(&self) -> usize;
    fn entry(&self, row: usize, col: usize) -> f64;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn row_into(&self, row: usize, out: &mut [f64]) {
        for (col, slot) in out.iter_mut().enumerate() {
            *slot = self.entry(row, col);
        }
    }
}

/// Pseudorandom codebook generated on demand from a seed.
///
/// Entry `(row, col)` is a pure function of `(seed, row, col)`, so any subset of
/// rows can be produced independently and in any order. The generator is a
/// counter hash (splitmix64 finalizer applied twice) and is not cryptographic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Codebook {
    q: usize,
    n: usize,
    seed: u64,
}

pub fn generate_codebook(seed: u64, q: usize, n: usize) -> Result<Codebook> {
    if q < 2 {
        return Err(Error::invalid("q", "codebook needs at least two rows"));
    }
    if n < 1 {
        return Err(Error::invalid("n", "rows must be nonempty"));
    }
    Ok(Codebook { q, n, seed })
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform double in `[0, 1)` with 53 random bits.
#[inline]
pub(crate) fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

impl Codebook {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Copy of the whole table, for inspection or export.
    pub fn materialize(&self) -> ExplicitTable {
        let mut entries = vec![0.0; self.q * self.n];
        for (row, chunk) in entries.chunks_mut(self.n).enumerate() {
            self.row_into(row, chunk);
        }
        ExplicitTable {
            q: self.q,
            n: self.n,
            entries,
        }
    }

    #[inline]
    fn row_key(&self, row: usize) -> u64 {
        mix64(self.seed ^ mix64((row as u64).wrapping_add(0x9e37_79b9_7f4a_7c15)))
    }
}

impl Table for Codebook {
    fn rows(&self) -> usize {
        self.q
    }

    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn entry(&self, row: usize, col: usize) -> f64 {
        let key = self.row_key(row);
        unit_from_bits(mix64(
            key.wrapping_add((col as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        ))
    }

    fn row_into(&self, row: usize, out: &mut [f64]) {
        let key = self.row_key(row);
        let mut ctr = key;
        for slot in out.iter_mut() {
            ctr = ctr.wrapping_add(0x9e37_79b9_7f4a_7c15);
            *slot = unit_from_bits(mix64(ctr));
        }
    }
}

/// A table given entry by entry, mostly for forcing particular codewords in tests.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExplicitTable {
    q: usize,
    n: usize,
    entries: Vec<f64>,
}

impl ExplicitTable {
    /// `entries` is row-major and must hold `q * n` values in `[0, 1)`.
    pub fn new(q: usize, n: usize, entries: Vec<f64>) -> Result<Self> {
        if q < 1 || n < 1 || entries.len() != q * n {
            return Err(Error::invalid("entries", "expected q * n values"));
        }
        if entries.iter().any(|w| !(0.0..1.0).contains(w)) {
            return Err(Error::invalid("entries", "values must lie in [0, 1)"));
        }
        Ok(ExplicitTable { q, n, entries })
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }
}

impl Table for ExplicitTable {
    fn rows(&self) -> usize {
        self.q
    }

    fn len(&self) -> usize {
        self.n
    }

    #[inline]
    fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    fn row_into(&self, row: usize, out: &mut [f64]) {
        out.copy_from_slice(self.row(row));
    }
}

/// Fractional part, well defined for any finite input.
#[inline]
pub fn mod1(v: f64) -> f64 {
    let f = v - libm::floor(v);
    // v slightly below an integer can round up to exactly 1
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// What Bob announces: `c_i = F_Y(y_i) + w_{u,i} mod 1`. The secret row `u` is kept
/// alongside for simulation bookkeeping and never enters Alice's computation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncodedMessage {
    pub c: Vec<f64>,
    pub u: usize,
}

pub fn encode<T: Table + ?Sized>(y: &[f64], table: &T, u: usize, sigma_y: f64) -> Result<EncodedMessage> {
    check_shape(y.len(), table)?;
    if u >= table.rows() {
        return Err(Error::invalid("u", "row index out of range"));
    }
    if !(sigma_y > 0.0) {
        return Err(Error::invalid("sigma_y", "must be positive"));
    }
    let mut c = vec![0.0; y.len()];
    table.row_into(u, &mut c);
    for (ci, &yi) in c.iter_mut().zip(y) {
        *ci = mod1(gaussian_cdf(yi, sigma_y) + *ci);
    }
    Ok(EncodedMessage { c, u })
}

fn check_shape<T: Table + ?Sized>(len: usize, table: &T) -> Result<()> {
    if len != table.len() {
        return Err(Error::invalid("n", "vector length differs from table row length"));
    }
    Ok(())
}

/// The mod-1 argument is kept this far from 0 and 1 before inverting the CDF.
pub const SATURATION_GUARD: f64 = 1e-15;

/// Alice's per-row score
/// `S_l = sum_i (F_Y^-1(c_i - w_{l,i} mod 1) - k x_i)^2` with
/// `k = sigma_Y^2 / (sqrt(T) sigma_X^2)`.
///
/// A small score means row `l` is a likely match. The score is a monotone
/// transform of the likelihood ratio between "row `l` was used" and "it was not".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scorer {
    k: f64,
    sigma_y: f64,
    variances: DerivedVariances,
}

impl Scorer {
    pub fn new(ch: ChannelParams, modulation: ModulationParams) -> Result<Self> {
        let signal = ch.transmission() * modulation.sigma_x2();
        if !(signal > 0.0) {
            return Err(Error::DegenerateChannel);
        }
        let variances = derived_variances(ch, modulation);
        Ok(Scorer {
            k: variances.sigma_y2 / (libm::sqrt(ch.transmission()) * modulation.sigma_x2()),
            sigma_y: variances.sigma_y(),
            variances,
        })
    }

    /// Multiplier on `x_i` inside the score.
    pub fn centering(&self) -> f64 {
        self.k
    }

    pub fn variances(&self) -> DerivedVariances {
        self.variances
    }

    /// `k x`, the vector every row is compared against.
    pub fn centered(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&xi| self.k * xi).collect()
    }

    /// Bob's value implied by mask entry `wi`.
    #[inline]
    fn unmask(&self, ci: f64, wi: f64) -> f64 {
        let p = mod1(ci - wi).clamp(SATURATION_GUARD, 1.0 - SATURATION_GUARD);
        self.sigma_y * std_normal_quantile(p)
    }

    /// Score of one row against a precomputed [`Scorer::centered`] vector.
    pub fn score_centered<T: Table + ?Sized>(&self, kx: &[f64], table: &T, c: &[f64], row: usize) -> f64 {
        let mut w = vec![0.0; c.len()];
        table.row_into(row, &mut w);
        self.score_row(kx, &w, c)
    }

    /// Score from an explicit row of table entries.
    #[inline]
    pub fn score_row(&self, kx: &[f64], w: &[f64], c: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((&ci, &wi), &kxi) in c.iter().zip(w).zip(kx) {
            let e = self.unmask(ci, wi) - kxi;
            s += e * e;
        }
        s
    }

    /// Like [`Scorer::score_row`] but gives up as soon as the partial sum reaches
    /// `theta`: returns `Some(score)` only if the full score is below `theta`.
    #[inline]
    pub fn score_row_below(&self, kx: &[f64], w: &[f64], c: &[f64], theta: f64) -> Option<f64> {
        let mut s = 0.0;
        for ((&ci, &wi), &kxi) in c.iter().zip(w).zip(kx) {
            let e = self.unmask(ci, wi) - kxi;
            s += e * e;
            if s >= theta {
                return None;
            }
        }
        Some(s)
    }

    pub fn score<T: Table + ?Sized>(&self, x: &[f64], table: &T, c: &[f64], row: usize) -> Result<f64> {
        check_shape(x.len(), table)?;
        check_shape(c.len(), table)?;
        if row >= table.rows() {
            return Err(Error::invalid("row", "row index out of range"));
        }
        Ok(self.score_centered(&self.centered(x), table, c, row))
    }

    /// Scores of every row.
    pub fn scores<T: Table + ?Sized>(&self, x: &[f64], table: &T, c: &[f64]) -> Result<ScoreSet> {
        check_shape(x.len(), table)?;
        check_shape(c.len(), table)?;
        let kx = self.centered(x);
        let mut w = vec![0.0; c.len()];
        let scores = (0..table.rows())
            .map(|row| {
                table.row_into(row, &mut w);
                self.score_row(&kx, &w, c)
            })
            .collect();
        Ok(ScoreSet { scores })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreSet {
    pub scores: Vec<f64>,
}

impl ScoreSet {
    /// Rows sorted by ascending score (best match first).
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.scores.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(a.cmp(&b)));
        idx
    }
}

/// Alice's normalized block energy `m = sum x_i^2 / sigma_X^2`; chi-square with
/// `n` degrees of freedom over random `x`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalM(f64);

impl EmpiricalM {
    pub fn new(m: f64) -> Result<Self> {
        if !(m >= 0.0) || !m.is_finite() {
            return Err(Error::invalid("m", "must be nonnegative and finite"));
        }
        Ok(EmpiricalM(m))
    }

    pub fn from_x(x: &[f64], modulation: ModulationParams) -> Self {
        EmpiricalM(x.iter().map(|v| v * v).sum::<f64>() / modulation.sigma_x2())
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Noncentralities of the normalized scores at energy `m`: `(lambda1, lambda0)` for
/// the true row and for any other row.
///
/// `lambda1 = m sigma_{Y|X}^2 / (T sigma_X^2)` and `lambda0 = m sigma_Y^2 / (T sigma_X^2)`.
pub fn noncentralities(m: EmpiricalM, ch: ChannelParams, modulation: ModulationParams) -> Result<(f64, f64)> {
    let signal = ch.transmission() * modulation.sigma_x2();
    if !(signal > 0.0) {
        return Err(Error::DegenerateChannel);
    }
    let v = derived_variances(ch, modulation);
    Ok((m.0 * v.sigma_y_given_x2 / signal, m.0 * v.sigma_y2 / signal))
}

/// Acceptance threshold on the scores.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Threshold {
    pub theta: f64,
}

impl Threshold {
    /// With `theta <= 0` no score can fall below it and every block is rejected.
    pub fn is_degenerate(&self) -> bool {
        !(self.theta > 0.0)
    }
}

/// `theta = sigma_{Y|X}^2 (n + lambda1(m)) + n alpha`.
///
/// The first term is the mean of the true row's score given `m`, so `alpha` is an
/// offset per sample around where the true score is expected to land.
pub fn threshold(
    m: EmpiricalM,
    n: usize,
    alpha: f64,
    ch: ChannelParams,
    modulation: ModulationParams,
) -> Result<Threshold> {
    let (lambda1, _) = noncentralities(m, ch, modulation)?;
    let v = derived_variances(ch, modulation);
    let n = n as f64;
    Ok(Threshold {
        theta: v.sigma_y_given_x2 * (n + lambda1) + n * alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Decision {
    Accept(usize),
    Reject,
}

/// Accept row `l` iff it is the only one with `S_l < theta` (ties count as above).
pub fn decide(scores: &[f64], theta: f64) -> Decision {
    let mut found = None;
    for (row, &s) in scores.iter().enumerate() {
        if s < theta {
            if found.is_some() {
                return Decision::Reject;
            }
            found = Some(row);
        }
    }
    found.map_or(Decision::Reject, Decision::Accept)
}

/// Score configurations relative to the true row `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum OutcomeCase {
    /// Only the true row is below threshold.
    TrueAccept,
    /// The true row is above and exactly one other row is below.
    FalseAccept,
    /// The true row is above and two or more others are below.
    RejectCrowded,
    /// Nothing is below threshold.
    RejectEmpty,
    /// The true row is below together with at least one other.
    RejectAmbiguous,
}

impl OutcomeCase {
    pub const ALL: [OutcomeCase; 5] = [
        OutcomeCase::TrueAccept,
        OutcomeCase::FalseAccept,
        OutcomeCase::RejectCrowded,
        OutcomeCase::RejectEmpty,
        OutcomeCase::RejectAmbiguous,
    ];

    /// Case number 1 to 5 in the order listed above.
    pub fn id(self) -> u8 {
        self as u8 + 1
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_counts(true_below: bool, others_below: usize) -> Self {
        match (true_below, others_below) {
            (true, 0) => OutcomeCase::TrueAccept,
            (true, _) => OutcomeCase::RejectAmbiguous,
            (false, 0) => OutcomeCase::RejectEmpty,
            (false, 1) => OutcomeCase::FalseAccept,
            (false, _) => OutcomeCase::RejectCrowded,
        }
    }

    pub fn is_accept(self) -> bool {
        matches!(self, OutcomeCase::TrueAccept | OutcomeCase::FalseAccept)
    }
}

/// Case of a full score vector against the ground-truth row.
pub fn classify_outcome(scores: &[f64], theta: f64, u: usize) -> OutcomeCase {
    let true_below = scores[u] < theta;
    let others = scores
        .iter()
        .enumerate()
        .filter(|&(row, &s)| row != u && s < theta)
        .count();
    OutcomeCase::from_counts(true_below, others)
}
