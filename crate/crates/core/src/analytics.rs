//! Closed-form accept probabilities, symbol error rate and secret key ratio.
//!
//! Given Alice's block energy `m`, the normalized true-row score is noncentral
//! chi-square with noncentrality `lambda1(m)` and every other row is an independent
//! noncentral chi-square with `lambda0(m)`. Everything else follows by counting
//! how many rows land below the threshold, then averaging over `m ~ chi2(n)`.

use crate::channel::{
    derived_variances, devetak_winter, leakage_ey, mutual_info_xy, plob_cv, ChannelParams, ModulationParams,
};
use crate::numerics::{binary_entropy, ChiSquareAverager, GaussLegendre, NoncentralChi2, LOG2_E, M_AVERAGE_NODES};
use crate::reconciliation::{noncentralities, threshold, EmpiricalM};
use crate::{Error, Result};

/// The designer's knobs: codebook size, rate relative to capacity and threshold
/// offset. The blocklength follows from them unless pinned.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SchemeParams {
    pub q: u64,
    pub gamma: f64,
    pub alpha: f64,
    pub pinned_n: Option<usize>,
}

impl SchemeParams {
    pub fn new(q: u64, gamma: f64, alpha: f64) -> Result<Self> {
        if q < 2 {
            return Err(Error::invalid("q", "must be at least 2"));
        }
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid("gamma", "must be positive and finite"));
        }
        if !alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite"));
        }
        Ok(SchemeParams {
            q,
            gamma,
            alpha,
            pinned_n: None,
        })
    }

    /// Fixes the blocklength instead of deriving it from `gamma`.
    pub fn with_n(mut self, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        self.pinned_n = Some(n);
        Ok(self)
    }

    #[inline]
    pub fn log2_q(&self) -> f64 {
        libm::log2(self.q as f64)
    }

    pub fn blocklength(&self, ch: ChannelParams, modulation: ModulationParams) -> Result<usize> {
        match self.pinned_n {
            Some(n) => Ok(n),
            None => blocklength(self.q, self.gamma, ch, modulation),
        }
    }
}

/// `n = ceil(log2 q / (gamma I(X;Y)))`, at least 1.
///
/// Rounding up keeps the realized code rate `log2 q / n` at or below
/// `gamma I(X;Y)`. A relative slack of 1e-9 stops an exact integer from being
/// pushed to the next one by rounding noise.
pub fn blocklength(q: u64, gamma: f64, ch: ChannelParams, modulation: ModulationParams) -> Result<usize> {
    let rate = gamma * mutual_info_xy(ch, modulation);
    if !(rate > 0.0) {
        return Err(Error::invalid("gamma", "gamma * I(X;Y) must be positive"));
    }
    let exact = libm::log2(q as f64) / rate;
    let n = libm::ceil(exact * (1.0 - 1e-9));
    if !(n < 1e9) {
        return Err(Error::invalid("gamma", "blocklength is unreasonably large"));
    }
    Ok((n as usize).max(1))
}

/// Probability that the true row's score is not below the threshold.
pub fn pi1(m: EmpiricalM, n: usize, alpha: f64, ch: ChannelParams, modulation: ModulationParams) -> Result<f64> {
    Ok(Tails::at(m, n, alpha, ch, modulation)?.pi1)
}

/// Probability that a given wrong row's score is below the threshold.
pub fn pi0(m: EmpiricalM, n: usize, alpha: f64, ch: ChannelParams, modulation: ModulationParams) -> Result<f64> {
    Ok(Tails::at(m, n, alpha, ch, modulation)?.pi0)
}

struct Tails {
    pi1: f64,
    pi0: f64,
}

impl Tails {
    fn at(m: EmpiricalM, n: usize, alpha: f64, ch: ChannelParams, modulation: ModulationParams) -> Result<Self> {
        if n < 1 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        let th = threshold(m, n, alpha, ch, modulation)?;
        if th.is_degenerate() {
            return Ok(Tails { pi1: 1.0, pi0: 0.0 });
        }
        let (l1, l0) = noncentralities(m, ch, modulation)?;
        let v = derived_variances(ch, modulation);
        let dof = n as f64;
        Ok(Tails {
            pi1: NoncentralChi2::new(dof, l1)?.sf(th.theta / v.sigma_y_given_x2),
            pi0: NoncentralChi2::new(dof, l0)?.cdf(th.theta / v.sigma_y2),
        })
    }
}

/// Rates conditioned on one value of `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionalRates {
    pub pi1: f64,
    pub pi0: f64,
    pub p_ta: f64,
    pub p_fa: f64,
    pub p_acc: f64,
    pub ser: f64,
    /// No block is ever accepted here, so `ser` is a placeholder 0.
    pub degenerate: bool,
}

/// `P_TA = (1 - pi1)(1 - pi0)^(q-1)` and `P_FA = (q - 1) pi1 pi0 (1 - pi0)^(q-2)`.
pub fn rates_from_tails(pi1: f64, pi0: f64, q: u64) -> ConditionalRates {
    let qm1 = (q - 1) as f64;
    // log1p keeps (1 - pi0)^(q-1) accurate for q up to 2^20 and beyond
    let ln_keep = libm::log1p(-pi0);
    let p_ta = (1.0 - pi1) * libm::exp(qm1 * ln_keep);
    let p_fa = if pi0 > 0.0 && pi1 > 0.0 {
        libm::exp(libm::log(qm1) + libm::log(pi1) + libm::log(pi0) + (qm1 - 1.0) * ln_keep)
    } else {
        0.0
    };
    let p_acc = p_ta + p_fa;
    let degenerate = !(p_acc > 0.0);
    ConditionalRates {
        pi1,
        pi0,
        p_ta,
        p_fa,
        p_acc,
        ser: if degenerate { 0.0 } else { p_fa / p_acc },
        degenerate,
    }
}

pub fn conditional_rates(
    m: EmpiricalM,
    n: usize,
    scheme: &SchemeParams,
    ch: ChannelParams,
    modulation: ModulationParams,
) -> Result<ConditionalRates> {
    let t = Tails::at(m, n, scheme.alpha, ch, modulation)?;
    Ok(rates_from_tails(t.pi1, t.pi0, scheme.q))
}

/// Everything the rate calculation produces at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatePrediction {
    pub n: usize,
    /// Realized code rate `log2 q / n` in bits per channel use.
    pub code_rate: f64,
    /// `code_rate / I(X;Y)`, equal to `gamma` up to the rounding of `n`.
    pub gamma_effective: f64,
    pub p_ta_av: f64,
    pub p_fa_av: f64,
    pub p_acc_av: f64,
    /// Average of the conditional symbol error rate over `m`.
    pub ser_av: f64,
    /// Bit error rate of the accepted indices, half the symbol error rate.
    pub ber: f64,
    pub i_xy: f64,
    pub i_ey: f64,
    pub devetak_winter: f64,
    pub plob: f64,
    /// Secret key ratio in bits per channel use.
    pub skr: f64,
}

impl RatePrediction {
    /// Upper bound implied by the scheme: every accepted block carries at most
    /// `gamma I(X;Y)` bits per channel use.
    pub fn rate_ceiling(&self, gamma: f64) -> f64 {
        gamma * self.i_xy * self.p_acc_av
    }
}

/// Evaluator holding the quadrature rule so repeated predictions do not rebuild it.
#[derive(Debug, Clone)]
pub struct RateEngine {
    rule: GaussLegendre,
}

impl Default for RateEngine {
    fn default() -> Self {
        Self::new(M_AVERAGE_NODES)
    }
}

impl RateEngine {
    pub fn new(nodes: usize) -> Self {
        RateEngine {
            rule: GaussLegendre::new(nodes),
        }
    }

    pub fn averager(&self, n: usize) -> ChiSquareAverager {
        ChiSquareAverager::new(n as u32, &self.rule)
    }

    /// Secret key ratio
    /// `R = P_acc [ (log2 q / n)(1 - h(SER/2)) - I(Y;E) ]`,
    /// with `P_acc` and `SER` averaged over `m`.
    ///
    /// `log2 q / n` is the rate that is actually realized; it equals `gamma I(X;Y)`
    /// whenever `n` comes out integral.
    pub fn secret_key_ratio(
        &self,
        scheme: &SchemeParams,
        ch: ChannelParams,
        modulation: ModulationParams,
    ) -> Result<RatePrediction> {
        let n = scheme.blocklength(ch, modulation)?;
        let avg = self.averager(n);
        let mut acc = [0.0f64; 3];
        for &(m, w) in avg.points() {
            let r = conditional_rates(EmpiricalM::new(m)?, n, scheme, ch, modulation)?;
            acc[0] += w * r.p_ta;
            acc[1] += w * r.p_fa;
            acc[2] += w * r.ser;
        }
        let [p_ta_av, p_fa_av, ser_av] = acc;
        let i_xy = mutual_info_xy(ch, modulation);
        let i_ey = leakage_ey(ch, modulation)?.leakage_bits;
        let code_rate = scheme.log2_q() / n as f64;
        let ber = 0.5 * ser_av.clamp(0.0, 1.0);
        let p_acc_av = p_ta_av + p_fa_av;
        let skr = p_acc_av * (code_rate * (1.0 - binary_entropy(ber)?) - i_ey);
        Ok(RatePrediction {
            n,
            code_rate,
            gamma_effective: code_rate / i_xy,
            p_ta_av,
            p_fa_av,
            p_acc_av,
            ser_av,
            ber,
            i_xy,
            i_ey,
            devetak_winter: devetak_winter(ch, modulation)?,
            plob: plob_cv(ch.transmission())?,
            skr,
        })
    }
}

/// [`RateEngine::secret_key_ratio`] with a fresh default engine.
pub fn secret_key_ratio(
    scheme: &SchemeParams,
    ch: ChannelParams,
    modulation: ModulationParams,
) -> Result<RatePrediction> {
    RateEngine::default().secret_key_ratio(scheme, ch, modulation)
}

/// First-order form of the key ratio for `T sigma_X^2 << 1`:
/// `P_acc T log2(e) sigma_X^2 [gamma (1 - h(SER/2)) - sigma_X^2 ln(1 + 1/sigma_X^2)]`.
pub fn skr_small_t(p_acc: f64, ser: f64, gamma: f64, transmission: f64, sigma_x2: f64) -> Result<f64> {
    let h = binary_entropy(0.5 * ser)?;
    Ok(p_acc * transmission * LOG2_E * sigma_x2 * (gamma * (1.0 - h) - sigma_x2 * libm::log1p(1.0 / sigma_x2)))
}

/// Key ratio of a generic scheme that succeeds with probability `1 - p_fail`
/// and reconciles at efficiency `beta`: `(1 - p_fail)(beta I(X;Y) - I(Y;E))`.
pub fn skr_decoupled_beta(beta: f64, p_fail: f64, ch: ChannelParams, modulation: ModulationParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_fail) {
        return Err(Error::Domain {
            what: "p_fail",
            value: p_fail,
        });
    }
    let i_ey = leakage_ey(ch, modulation)?.leakage_bits;
    Ok((1.0 - p_fail) * (beta * mutual_info_xy(ch, modulation) - i_ey))
}

/// Final key length in bits after concatenating `blocks` accepted indices of
/// `log2 q` bits each, error-correcting them at the Shannon limit and removing
/// Eve's information about the `blocks * n / p_acc` pulses spent on average.
pub fn final_key_length(blocks: u64, prediction: &RatePrediction, log2_q: f64) -> Result<f64> {
    let per_block = log2_q * (1.0 - binary_entropy(prediction.ber)?) - prediction.n as f64 * prediction.i_ey;
    Ok(blocks as f64 * per_block)
}

/// Expected number of pulses needed to collect `blocks` accepted blocks.
pub fn pulses_for_blocks(blocks: u64, prediction: &RatePrediction) -> f64 {
    blocks as f64 * prediction.n as f64 / prediction.p_acc_av
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;

    fn row(t: f64, s: f64) -> (ChannelParams, ModulationParams) {
        let m = ModulationParams::new(s).unwrap();
        (ChannelParams::with_default_noise(t, m).unwrap(), m)
    }

    #[test]
    fn blocklength_examples() {
        let (ch, m) = row(1e-3, 134.0);
        assert_eq!(blocklength(1024, 1.45, ch, m).unwrap(), 41);
        let (ch, m) = row(1e-6, 1.2e5);
        let n = blocklength(1024, 1.45, ch, m).unwrap();
        assert!((44..=46).contains(&n), "{n}");
        // doubling the mutual information halves n
        let i = mutual_info_xy(ch, m);
        let n1 = libm::log2(1024.0) / (1.0 * i);
        let n2 = libm::log2(1024.0) / (2.0 * i);
        assert!((n1 / n2 - 2.0).abs() < 1e-12);
        assert_eq!(
            SchemeParams::new(1024, 1.45, -0.55)
                .unwrap()
                .with_n(41)
                .unwrap()
                .blocklength(ch, m)
                .unwrap(),
            41
        );
    }

    #[test]
    fn rates_from_tails_examples() {
        let r = rates_from_tails(0.0, 0.0, 1024);
        assert_eq!((r.p_ta, r.p_fa, r.ser), (1.0, 0.0, 0.0));
        let r = rates_from_tails(1.0, 0.3, 16);
        assert_eq!(r.p_ta, 0.0);
        assert!((r.ser - 1.0).abs() < 1e-15);
        let r = rates_from_tails(0.5, 0.5, 2);
        assert!((r.p_ta - 0.25).abs() < 1e-15);
        assert!((r.p_fa - 0.25).abs() < 1e-15);
        assert!((r.ser - 0.5).abs() < 1e-15);
        let r = rates_from_tails(1.0, 0.0, 8);
        assert!(r.degenerate && r.ser == 0.0);
    }

    #[test]
    fn tails_at_extreme_thresholds() {
        let (ch, m) = row(1e-3, 134.0);
        let em = EmpiricalM::new(41.0).unwrap();
        assert_eq!(pi1(em, 41, -1e6, ch, m).unwrap(), 1.0);
        assert_eq!(pi0(em, 41, -1e6, ch, m).unwrap(), 0.0);
        assert!(pi1(em, 41, 1e4, ch, m).unwrap() < 1e-300);
        assert!((pi0(em, 41, 1e4, ch, m).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_sweep_is_monotone() {
        let (ch, m) = row(1e-3, 134.0);
        let em = EmpiricalM::new(38.5).unwrap();
        let mut last = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..100 {
            let alpha = -1.5 + 2.0 * k as f64 / 99.0;
            let p1 = pi1(em, 41, alpha, ch, m).unwrap();
            let p0 = pi0(em, 41, alpha, ch, m).unwrap();
            assert!(p1 <= last.0 && p0 >= last.1);
            last = (p1, p0);
        }
    }

    #[test]
    fn reference_point() {
        // T = 1e-3, q = 2^10, alpha = -0.55, gamma = 1.45, sigma_x^2 = 134
        let (ch, m) = row(1e-3, 134.0);
        let scheme = SchemeParams::new(1024, 1.45, -0.55).unwrap();
        let p = secret_key_ratio(&scheme, ch, m).unwrap();
        assert_eq!(p.n, 41);
        assert!(((p.p_ta_av - 0.038) / 0.038).abs() < 0.15, "{}", p.p_ta_av);
        assert!(((p.p_fa_av - 0.0013) / 0.0013).abs() < 0.15, "{}", p.p_fa_av);
        assert!(((p.ser_av - 0.049) / 0.049).abs() < 0.15, "{}", p.ser_av);
        assert!(((p.skr - 0.00095) / 0.00095).abs() < 0.15, "{}", p.skr);
        assert!(p.skr <= p.rate_ceiling(scheme.gamma));
        assert!(p.devetak_winter < p.skr);
    }

    #[test]
    fn low_gamma_is_negative() {
        let (ch, m) = row(1e-3, 134.0);
        let scheme = SchemeParams::new(1024, 0.3, -0.55).unwrap();
        assert!(secret_key_ratio(&scheme, ch, m).unwrap().skr < 0.0);
    }

    #[test]
    fn small_t_form_tracks_full_form() {
        // same P_acc and SER in both, zero excess noise, T sigma^2 = 0.05
        let m = ModulationParams::new(50.0).unwrap();
        let ch = ChannelParams::new(1e-3, 0.0).unwrap();
        let (p_acc, ser, gamma) = (0.04, 0.05, 1.4);
        let full = p_acc
            * (gamma * (1.0 - binary_entropy(ser / 2.0).unwrap()) * mutual_info_xy(ch, m)
                - leakage_ey(ch, m).unwrap().leakage_bits);
        let approx = skr_small_t(p_acc, ser, gamma, 1e-3, 50.0).unwrap();
        assert!(((approx - full) / full).abs() < 0.1, "{full} {approx}");
    }

    #[test]
    fn decoupled_rate() {
        let (ch, m) = (
            ChannelParams::new(1e-4, 0.0).unwrap(),
            ModulationParams::new(40.0).unwrap(),
        );
        let dw = devetak_winter(ch, m).unwrap();
        assert!((skr_decoupled_beta(1.0, 0.0, ch, m).unwrap() - dw).abs() < 1e-10 * dw);
        assert_eq!(skr_decoupled_beta(1.3, 1.0, ch, m).unwrap(), 0.0);
        assert!(skr_decoupled_beta(1.0, 1.5, ch, m).is_err());
        let (x, _) = crate::channel::f_beta_max(0.95).unwrap();
        let ch = ChannelParams::new(1e-3, 0.0).unwrap();
        let r = skr_decoupled_beta(0.95, 0.0, ch, ModulationParams::new(x).unwrap()).unwrap();
        assert!(r > 0.0 && r < crate::channel::max_dw(1e-3).unwrap());
    }

    #[test]
    fn key_bookkeeping() {
        let (ch, m) = row(1e-3, 134.0);
        let scheme = SchemeParams::new(1024, 1.45, -0.55).unwrap();
        let p = secret_key_ratio(&scheme, ch, m).unwrap();
        let blocks = 1_000_000;
        let ratio = final_key_length(blocks, &p, 10.0).unwrap() / pulses_for_blocks(blocks, &p);
        assert!((ratio - p.skr).abs() < 1e-12);
    }
}
