//! Search for the operating point `(alpha, gamma, sigma_X^2)` that maximizes the
//! analytic key ratio at fixed `(T, q)`, plus landscapes and distance sweeps.
//!
//! The search is a grid scan followed by a Nelder-Mead polish from the best cell.
//! The landscape has a steep cliff next to its maximum, so a purely local method
//! started far away tends to stall on the cliff edge.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::analytics::{RateEngine, RatePrediction, SchemeParams};
use crate::channel::{
    default_excess_noise, distance_to_transmission, max_dw, plob_cv, ChannelParams, ModulationParams,
    DEFAULT_EXCESS_NOISE_RATIO,
};
use crate::exec::Executor;
use crate::{Error, Result};

/// Evenly spaced points, linear or logarithmic.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub log: bool,
}

impl Range {
    pub fn linear(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        Self::checked(Range {
            lo,
            hi,
            steps,
            log: false,
        })
    }

    pub fn logarithmic(lo: f64, hi: f64, steps: usize) -> Result<Self> {
        if !(lo > 0.0) {
            return Err(Error::invalid("range", "log-spaced range needs lo > 0"));
        }
        Self::checked(Range {
            lo,
            hi,
            steps,
            log: true,
        })
    }

    /// Linear range with a given spacing; `hi` is included when it falls on the grid.
    pub fn stepped(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::invalid("range", "step must be positive"));
        }
        let steps = libm::floor((hi - lo) / step + 1e-9) as usize + 1;
        Self::linear(lo, lo + (steps - 1) as f64 * step, steps)
    }

    /// A single point.
    pub fn point(v: f64) -> Result<Self> {
        Self::linear(v, v, 1)
    }

    fn checked(r: Range) -> Result<Self> {
        if r.steps < 1 || !r.lo.is_finite() || !r.hi.is_finite() || r.hi < r.lo {
            return Err(Error::invalid("range", "needs lo <= hi and at least one step"));
        }
        if r.steps == 1 && r.lo != r.hi {
            return Err(Error::invalid("range", "a single step needs lo == hi"));
        }
        Ok(r)
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return alloc::vec![self.lo];
        }
        let (a, b) = if self.log {
            (libm::log10(self.lo), libm::log10(self.hi))
        } else {
            (self.lo, self.hi)
        };
        (0..self.steps)
            .map(|i| {
                let v = a + (b - a) * i as f64 / (self.steps - 1) as f64;
                if self.log {
                    libm::pow(10.0, v)
                } else {
                    v
                }
            })
            .collect()
    }

    /// Spacing in the range's own coordinate (decades for log ranges).
    pub fn spacing(&self) -> f64 {
        if self.steps == 1 {
            return 0.0;
        }
        let (a, b) = self.coords();
        (b - a) / (self.steps - 1) as f64
    }

    /// Same span with twice the density.
    pub fn refined(&self) -> Self {
        Range {
            steps: if self.steps == 1 { 1 } else { 2 * self.steps - 1 },
            ..*self
        }
    }

    fn coords(&self) -> (f64, f64) {
        if self.log {
            (libm::log10(self.lo), libm::log10(self.hi))
        } else {
            (self.lo, self.hi)
        }
    }
}

/// How the excess noise follows the candidate modulation variance.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NoiseRule {
    /// `xi = ratio * sigma_X^2`, recomputed per candidate.
    Proportional(f64),
    Fixed(f64),
}

impl NoiseRule {
    pub fn excess_noise(&self, sigma_x2: f64) -> f64 {
        match *self {
            NoiseRule::Proportional(r) if r == DEFAULT_EXCESS_NOISE_RATIO => default_excess_noise(sigma_x2),
            NoiseRule::Proportional(r) => r * sigma_x2,
            NoiseRule::Fixed(xi) => xi,
        }
    }
}

impl Default for NoiseRule {
    fn default() -> Self {
        NoiseRule::Proportional(DEFAULT_EXCESS_NOISE_RATIO)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchSpace {
    pub alpha: Range,
    pub gamma: Range,
    /// Log-spaced.
    pub sigma_x2: Range,
    pub noise: NoiseRule,
}

impl SearchSpace {
    pub fn new(alpha: Range, gamma: Range, sigma_x2: Range, noise: NoiseRule) -> Result<Self> {
        if !(gamma.lo > 0.0) {
            return Err(Error::invalid("gamma", "lower end must be positive"));
        }
        if !(sigma_x2.lo > 0.0) {
            return Err(Error::invalid("sigma_x2", "lower end must be positive"));
        }
        Ok(SearchSpace {
            alpha,
            gamma,
            sigma_x2,
            noise,
        })
    }

    /// alpha in [-1.5, 0.5] and gamma in [0.8, 2.2], both in steps of 0.05, and
    /// sigma_X^2 at 20 points per decade over two decades either side of `0.1 / T`.
    pub fn standard(transmission: f64) -> Result<Self> {
        Self::around(transmission, 0.05, 20)
    }

    /// The standard span at steps of 0.1 and 5 points per decade. About 1/40 of
    /// the work, and the local polish recovers the resolution.
    pub fn coarse(transmission: f64) -> Result<Self> {
        Self::around(transmission, 0.1, 5)
    }

    fn around(transmission: f64, step: f64, per_decade: usize) -> Result<Self> {
        if !(transmission > 0.0 && transmission <= 1.0) {
            return Err(Error::Domain {
                what: "transmission",
                value: transmission,
            });
        }
        let centre = 0.1 / transmission;
        Self::new(
            Range::stepped(-1.5, 0.5, step)?,
            Range::stepped(0.8, 2.2, step)?,
            Range::logarithmic(centre * 1e-2, centre * 1e2, 4 * per_decade + 1)?,
            NoiseRule::default(),
        )
    }

    pub fn refined(&self) -> Self {
        SearchSpace {
            alpha: self.alpha.refined(),
            gamma: self.gamma.refined(),
            sigma_x2: self.sigma_x2.refined(),
            noise: self.noise,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.steps * self.gamma.steps * self.sigma_x2.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All grid points, sigma_X^2 slowest and alpha fastest.
    pub fn candidates(&self) -> Vec<Candidate> {
        let (a, g, s) = (self.alpha.values(), self.gamma.values(), self.sigma_x2.values());
        let mut out = Vec::with_capacity(self.len());
        for &sigma_x2 in &s {
            for &gamma in &g {
                for &alpha in &a {
                    out.push(Candidate { alpha, gamma, sigma_x2 });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Candidate {
    pub alpha: f64,
    pub gamma: f64,
    pub sigma_x2: f64,
}

/// A candidate with its full rate prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub candidate: Candidate,
    pub excess_noise: f64,
    pub prediction: RatePrediction,
}

impl Evaluation {
    #[inline]
    pub fn skr(&self) -> f64 {
        self.prediction.skr
    }

    /// Higher key ratio first; ties go to the smaller `(alpha, gamma, sigma_X^2)`
    /// so the winner never depends on evaluation order.
    pub fn rank(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.candidate, &other.candidate);
        self.skr()
            .total_cmp(&other.skr())
            .then_with(|| b.alpha.total_cmp(&a.alpha))
            .then_with(|| b.gamma.total_cmp(&a.gamma))
            .then_with(|| b.sigma_x2.total_cmp(&a.sigma_x2))
    }
}

/// Analytic key ratio at one candidate.
pub fn evaluate(
    engine: &RateEngine,
    transmission: f64,
    q: u64,
    candidate: Candidate,
    noise: NoiseRule,
) -> Result<Evaluation> {
    let modulation = ModulationParams::new(candidate.sigma_x2)?;
    let xi = noise.excess_noise(candidate.sigma_x2);
    let channel = ChannelParams::new(transmission, xi)?;
    let scheme = SchemeParams::new(q, candidate.gamma, candidate.alpha)?;
    Ok(Evaluation {
        candidate,
        excess_noise: xi,
        prediction: engine.secret_key_ratio(&scheme, channel, modulation)?,
    })
}

fn evaluate_all<E: Executor>(
    engine: &RateEngine,
    transmission: f64,
    q: u64,
    candidates: &[Candidate],
    noise: NoiseRule,
    executor: &E,
) -> Result<Vec<Evaluation>> {
    executor
        .map(candidates, |&c| evaluate(engine, transmission, q, c, noise))
        .into_iter()
        .collect()
}

/// Key ratio over an `alpha x gamma` grid at fixed `sigma_X^2`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Landscape {
    pub transmission: f64,
    pub q: u64,
    pub sigma_x2: f64,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Row-major by gamma: `cells[g * alphas.len() + a]`. Negative ratios are kept.
    pub cells: Vec<Evaluation>,
}

impl Landscape {
    pub fn at(&self, gamma_index: usize, alpha_index: usize) -> &Evaluation {
        &self.cells[gamma_index * self.alphas.len() + alpha_index]
    }

    pub fn best(&self) -> &Evaluation {
        self.cells
            .iter()
            .max_by(|a, b| a.rank(b))
            .expect("a landscape has at least one cell")
    }
}

pub fn landscape<E: Executor>(
    engine: &RateEngine,
    transmission: f64,
    q: u64,
    sigma_x2: f64,
    alpha: Range,
    gamma: Range,
    noise: NoiseRule,
    executor: &E,
) -> Result<Landscape> {
    let space = SearchSpace::new(alpha, gamma, Range::logarithmic(sigma_x2, sigma_x2, 1)?, noise)?;
    let cells = evaluate_all(engine, transmission, q, &space.candidates(), noise, executor)?;
    Ok(Landscape {
        transmission,
        q,
        sigma_x2,
        alphas: alpha.values(),
        gammas: gamma.values(),
        cells,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Optimum {
    pub transmission: f64,
    pub q: u64,
    pub best: Evaluation,
    /// Best grid cell before the local polish.
    pub grid_best: Evaluation,
    pub grid_points: usize,
    pub polish_evaluations: usize,
    /// No evaluated point had a positive key ratio.
    pub all_negative: bool,
}

/// Relative key-ratio tolerance that stops the polish.
pub const POLISH_TOLERANCE: f64 = 1e-4;
const POLISH_MAX_EVALUATIONS: usize = 800;

/// Grid scan over `space`, then restarted Nelder-Mead in
/// `(alpha, gamma, log10 sigma_X^2)` from the best cell, confined to the space's box.
pub fn optimize<E: Executor>(
    engine: &RateEngine,
    transmission: f64,
    q: u64,
    space: &SearchSpace,
    executor: &E,
) -> Result<Optimum> {
    let grid = evaluate_all(engine, transmission, q, &space.candidates(), space.noise, executor)?;
    let grid_best = *grid.iter().max_by(|a, b| a.rank(b)).expect("search space is nonempty");
    let mut all_negative = grid.iter().all(|e| !(e.skr() > 0.0));

    let (best, polish_evaluations) = polish(engine, transmission, q, space, grid_best)?;
    all_negative &= !(best.skr() > 0.0);
    Ok(Optimum {
        transmission,
        q,
        best,
        grid_best,
        grid_points: grid.len(),
        polish_evaluations,
        all_negative,
    })
}

fn polish(
    engine: &RateEngine,
    transmission: f64,
    q: u64,
    space: &SearchSpace,
    start: Evaluation,
) -> Result<(Evaluation, usize)> {
    let ranges = [space.alpha, space.gamma, space.sigma_x2];
    let to_point = |c: &Candidate| [c.alpha, c.gamma, libm::log10(c.sigma_x2)];
    let clamp = |p: [f64; 3]| -> [f64; 3] {
        let mut out = p;
        for (v, r) in out.iter_mut().zip(&ranges) {
            let (lo, hi) = r.coords();
            *v = v.clamp(lo, hi);
        }
        out
    };
    let evaluations = core::cell::Cell::new(0usize);
    let eval_at = |p: [f64; 3]| -> Result<Evaluation> {
        evaluations.set(evaluations.get() + 1);
        let c = Candidate {
            alpha: p[0],
            gamma: p[1],
            sigma_x2: libm::pow(10.0, p[2]),
        };
        evaluate(engine, transmission, q, c, space.noise)
    };

    let pass = |start: Evaluation| -> Result<Evaluation> {
        let x0 = to_point(&start.candidate);
        let mut simplex: Vec<([f64; 3], Evaluation)> = alloc::vec![(x0, start)];
        for (d, r) in ranges.iter().enumerate() {
            let h = if r.spacing() > 0.0 { 0.5 * r.spacing() } else { 0.0 };
            if h == 0.0 {
                continue;
            }
            let mut p = x0;
            p[d] += h;
            if p[d] > r.coords().1 {
                p[d] = x0[d] - h;
            }
            simplex.push((p, eval_at(p)?));
        }
        if simplex.len() < 2 {
            return Ok(start);
        }
        let k = simplex.len();
        let mut best_seen = start;

        while evaluations.get() < POLISH_MAX_EVALUATIONS {
            // best first
            simplex.sort_by(|a, b| b.1.rank(&a.1));
            if simplex[0].1.rank(&best_seen) == Ordering::Greater {
                best_seen = simplex[0].1;
            }
            let (hi, lo) = (simplex[0].1.skr(), simplex[k - 1].1.skr());
            if libm::fabs(hi - lo) <= POLISH_TOLERANCE * libm::fabs(hi) {
                break;
            }
            let mut centroid = [0.0; 3];
            for (p, _) in &simplex[..k - 1] {
                for d in 0..3 {
                    centroid[d] += p[d] / (k - 1) as f64;
                }
            }
            let worst = simplex[k - 1];
            let along = |t: f64| -> [f64; 3] {
                let mut p = [0.0; 3];
                for d in 0..3 {
                    p[d] = centroid[d] + t * (worst.0[d] - centroid[d]);
                }
                clamp(p)
            };
            let xr = along(-1.0);
            let er = eval_at(xr)?;
            if er.rank(&simplex[0].1) == Ordering::Greater {
                let xe = along(-2.0);
                let ee = eval_at(xe)?;
                simplex[k - 1] = if ee.rank(&er) == Ordering::Greater {
                    (xe, ee)
                } else {
                    (xr, er)
                };
            } else if er.rank(&simplex[k - 2].1) == Ordering::Greater {
                simplex[k - 1] = (xr, er);
            } else {
                let (xc, ec) = if er.rank(&worst.1) == Ordering::Greater {
                    let x = along(-0.5);
                    (x, eval_at(x)?)
                } else {
                    let x = along(0.5);
                    (x, eval_at(x)?)
                };
                if ec.rank(&worst.1) == Ordering::Greater {
                    simplex[k - 1] = (xc, ec);
                } else {
                    // shrink toward the best vertex
                    let b = simplex[0].0;
                    for item in simplex.iter_mut().skip(1) {
                        let mut p = [0.0; 3];
                        for d in 0..3 {
                            p[d] = b[d] + 0.5 * (item.0[d] - b[d]);
                        }
                        *item = (p, eval_at(p)?);
                    }
                }
            }
        }
        for (_, e) in &simplex {
            if e.rank(&best_seen) == Ordering::Greater {
                best_seen = *e;
            }
        }
        Ok(best_seen)
    };

    // The optimum often sits against a blocklength cliff where the simplex
    // collapses early, so restart from the best point until a pass stops helping.
    let mut best = start;
    loop {
        let next = pass(best)?;
        let gain = next.skr() - best.skr();
        let improved = next.rank(&best) == Ordering::Greater;
        if improved {
            best = next;
        }
        if !improved || gain <= POLISH_TOLERANCE * libm::fabs(best.skr()) || evaluations.get() >= POLISH_MAX_EVALUATIONS
        {
            break;
        }
    }
    Ok((best, evaluations.get()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub distance_km: f64,
    pub transmission: f64,
    pub optimum: Optimum,
    pub plob: f64,
    pub max_dw: f64,
}

/// Optimizes at each distance and attaches the two reference bounds.
/// `space_for` supplies the search space for a given transmission.
pub fn distance_sweep<E: Executor>(
    engine: &RateEngine,
    distances_km: &[f64],
    q: u64,
    space_for: impl Fn(f64) -> Result<SearchSpace>,
    executor: &E,
) -> Result<Vec<SweepRow>> {
    distances_km
        .iter()
        .map(|&d| {
            let t = distance_to_transmission(d)?;
            let optimum = optimize(engine, t, q, &space_for(t)?, executor)?;
            Ok(SweepRow {
                distance_km: d,
                transmission: t,
                optimum,
                plob: plob_cv(t)?,
                max_dw: max_dw(t)?,
            })
        })
        .collect()
}
