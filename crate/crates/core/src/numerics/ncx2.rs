//! Noncentral chi-square distribution and the generalized Marcum Q-function.
//!
//! Both tails are Poisson mixtures of central chi-square tails,
//!
//! ```text
//! F(z)     = sum_k Pois(k; lambda/2) * P(dof/2 + k, z/2)
//! 1 - F(z) = sum_k Pois(k; lambda/2) * Q(dof/2 + k, z/2)
//! ```
//!
//! Neighbouring orders are linked by `P(a+1, x) = P(a, x) - x^a e^-x / Gamma(a+1)`.
//! The lower tail is summed downwards in `k` (where that recurrence only adds) and the
//! upper tail upwards, each starting from one direct incomplete-gamma evaluation just
//! outside the bulk of the Poisson weights. Weights and central tails are carried in
//! scaled form so anchors that underflow in linear space are still usable.

use crate::{Error, Result};

use super::gamma::{ln_step, regularized_gamma};

/// Terms below this fraction of the running sum are dropped once the sum is
/// past its peak.
const REL_EPS: f64 = 1e-17;
const RESCALE_AT: f64 = 1e200;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoncentralChi2 {
    dof: f64,
    noncentrality: f64,
}

impl NoncentralChi2 {
    /// `dof` is usually an integer block length, but any positive value is accepted
    /// so that Marcum Q of arbitrary real order maps onto it.
    pub fn new(dof: f64, noncentrality: f64) -> Result<Self> {
        if !(dof > 0.0) || !dof.is_finite() {
            return Err(Error::invalid("dof", "must be positive and finite"));
        }
        if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
            return Err(Error::invalid("noncentrality", "must be nonnegative and finite"));
        }
        Ok(NoncentralChi2 { dof, noncentrality })
    }

    pub fn dof(&self) -> f64 {
        self.dof
    }

    pub fn noncentrality(&self) -> f64 {
        self.noncentrality
    }

    pub fn mean(&self) -> f64 {
        self.dof + self.noncentrality
    }

    pub fn variance(&self) -> f64 {
        2.0 * self.dof + 4.0 * self.noncentrality
    }

    /// `Pr[Z <= z]`, accurate in relative terms even deep in the lower tail.
    pub fn cdf(&self, z: f64) -> f64 {
        if !(z > 0.0) {
            return 0.0;
        }
        if z == f64::INFINITY {
            return 1.0;
        }
        let a0 = 0.5 * self.dof;
        let x = 0.5 * z;
        let mu = 0.5 * self.noncentrality;
        if mu == 0.0 {
            return regularized_gamma(a0, x).p;
        }
        lower_tail_sum(a0, x, mu)
    }

    /// `Pr[Z > z]`, accurate in relative terms even deep in the upper tail.
    pub fn sf(&self, z: f64) -> f64 {
        if !(z > 0.0) {
            return 1.0;
        }
        if z == f64::INFINITY {
            return 0.0;
        }
        let a0 = 0.5 * self.dof;
        let x = 0.5 * z;
        let mu = 0.5 * self.noncentrality;
        if mu == 0.0 {
            return regularized_gamma(a0, x).q;
        }
        upper_tail_sum(a0, x, mu)
    }
}

/// Generalized Marcum Q-function `Q_order(a, b)`.
///
/// Equals the upper tail at `b^2` of a noncentral chi-square with `2 * order`
/// degrees of freedom and noncentrality `a^2`.
pub fn marcum_q(order: f64, a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain {
            what: "marcum_q a",
            value: a,
        });
    }
    if !(b >= 0.0) {
        return Err(Error::Domain {
            what: "marcum_q b",
            value: b,
        });
    }
    Ok(NoncentralChi2::new(2.0 * order, a * a)?.sf(b * b))
}

/// Half-width of the Poisson window used to place the anchor, in units of its
/// standard deviation; the weight mass outside is far below 1e-17 of the mode.
fn poisson_reach(mu: f64) -> f64 {
    libm::ceil(12.0 * libm::sqrt(mu) + 30.0)
}

#[inline]
fn ln_poisson(k: f64, mu: f64) -> f64 {
    ln_step(k, mu)
}

fn lower_tail_sum(a0: f64, x: f64, mu: f64) -> f64 {
    let mode = libm::floor(mu);
    let mut k = mode + poisson_reach(mu);
    let mut a = a0 + k;

    // In units of e^scale, with the Poisson weight relative to the anchor folded
    // in: u = w * P(a, x), e = w * step(a - 1, x).
    let anchor = regularized_gamma(a, x);
    let mut acc = Scaled::new(
        anchor.ln_p + ln_poisson(k, mu),
        libm::exp(ln_step(a - 1.0, x) - anchor.ln_p),
    );
    loop {
        acc.add_term();
        if k == 0.0 || (k < mode && acc.converged()) {
            break;
        }
        a -= 1.0;
        let dw = k / mu;
        acc.u = (acc.u + acc.e) * dw;
        acc.e *= a / x * dw;
        k -= 1.0;
        acc.rebalance();
    }
    acc.total().min(1.0)
}

fn upper_tail_sum(a0: f64, x: f64, mu: f64) -> f64 {
    let mode = libm::floor(mu);
    let mut k = libm::fmax(0.0, mode - poisson_reach(mu));
    let mut a = a0 + k;

    // u = w * Q(a, x), e = w * step(a, x), same conventions as the lower tail.
    let anchor = regularized_gamma(a, x);
    let mut acc = Scaled::new(anchor.ln_q + ln_poisson(k, mu), libm::exp(ln_step(a, x) - anchor.ln_q));
    loop {
        acc.add_term();
        if k > mode && acc.converged() {
            break;
        }
        a += 1.0;
        k += 1.0;
        let dw = mu / k;
        acc.u = (acc.u + acc.e) * dw;
        acc.e *= x / a * dw;
        acc.rebalance();
        if acc.u == 0.0 && acc.e == 0.0 {
            break;
        }
    }
    acc.total().min(1.0)
}

/// Running mixture sum kept near unit magnitude with an explicit log scale.
struct Scaled {
    scale: f64,
    u: f64,
    e: f64,
    sum: f64,
    prev: f64,
}

impl Scaled {
    fn new(scale: f64, e: f64) -> Self {
        Scaled {
            scale,
            u: 1.0,
            e,
            sum: 0.0,
            prev: f64::INFINITY,
        }
    }

    #[inline]
    fn add_term(&mut self) {
        self.sum += self.u;
    }

    /// Past the peak and the latest term no longer matters.
    #[inline]
    fn converged(&mut self) -> bool {
        let done = self.u < self.prev && self.u < self.sum * REL_EPS;
        self.prev = self.u;
        done
    }

    #[inline]
    fn rebalance(&mut self) {
        if self.u > RESCALE_AT {
            self.shift(1.0 / RESCALE_AT, libm::log(RESCALE_AT));
        } else if self.u < 1.0 / RESCALE_AT && self.sum < 1e100 {
            self.shift(RESCALE_AT, -libm::log(RESCALE_AT));
        }
    }

    fn shift(&mut self, factor: f64, ln_factor: f64) {
        self.u *= factor;
        self.e *= factor;
        self.sum *= factor;
        self.prev *= factor;
        self.scale += ln_factor;
    }

    fn total(&self) -> f64 {
        if self.sum == 0.0 {
            return 0.0;
        }
        libm::exp(self.scale + libm::log(self.sum))
    }
}
