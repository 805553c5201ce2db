//! The lossy Gaussian channel and the rate bounds it implies.
//!
//! Units follow the shot-noise convention where vacuum noise per quadrature has
//! variance 1/2. Bob receives `y = sqrt(T) x + N_shot + N_exc` with
//! `Var N_shot = 1/2` and `Var N_exc = T xi / 2`.

use crate::numerics::{golden_section_max, thermal_entropy_g, LOG2_E};
use crate::{Error, Result};

/// Excess noise as a fraction of the modulation variance, used when the caller
/// does not give one (phase noise grows with laser power).
pub const DEFAULT_EXCESS_NOISE_RATIO: f64 = 0.01;

/// Fibre loss used to convert distance to transmission.
pub const FIBRE_LOSS_DB_PER_KM: f64 = 0.22;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChannelParams {
    transmission: f64,
    excess_noise: f64,
}

impl ChannelParams {
    pub fn new(transmission: f64, excess_noise: f64) -> Result<Self> {
        if !(transmission > 0.0 && transmission <= 1.0) {
            return Err(Error::invalid("transmission", "must lie in (0, 1]"));
        }
        if !(excess_noise >= 0.0) || !excess_noise.is_finite() {
            return Err(Error::invalid("excess_noise", "must be nonnegative and finite"));
        }
        Ok(ChannelParams {
            transmission,
            excess_noise,
        })
    }

    /// Channel with the default excess noise `0.01 * sigma_x2`.
    pub fn with_default_noise(transmission: f64, modulation: ModulationParams) -> Result<Self> {
        Self::new(transmission, default_excess_noise(modulation.sigma_x2()))
    }

    #[inline]
    pub fn transmission(&self) -> f64 {
        self.transmission
    }

    #[inline]
    pub fn excess_noise(&self) -> f64 {
        self.excess_noise
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModulationParams {
    sigma_x2: f64,
}

impl ModulationParams {
    pub fn new(sigma_x2: f64) -> Result<Self> {
        if !(sigma_x2 > 0.0) || !sigma_x2.is_finite() {
            return Err(Error::invalid("sigma_x2", "must be positive and finite"));
        }
        Ok(ModulationParams { sigma_x2 })
    }

    #[inline]
    pub fn sigma_x2(&self) -> f64 {
        self.sigma_x2
    }
}

pub fn default_excess_noise(sigma_x2: f64) -> f64 {
    DEFAULT_EXCESS_NOISE_RATIO * sigma_x2
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivedVariances {
    pub sigma_y2: f64,
    pub sigma_y_given_x2: f64,
}

impl DerivedVariances {
    /// The part of Bob's variance carried by the signal, `T sigma_x2`.
    #[inline]
    pub fn signal(&self) -> f64 {
        self.sigma_y2 - self.sigma_y_given_x2
    }

    #[inline]
    pub fn sigma_y(&self) -> f64 {
        libm::sqrt(self.sigma_y2)
    }
}

pub fn derived_variances(ch: ChannelParams, modulation: ModulationParams) -> DerivedVariances {
    let t = ch.transmission;
    let noise = 0.5 + 0.5 * t * ch.excess_noise;
    DerivedVariances {
        sigma_y2: t * modulation.sigma_x2 + noise,
        sigma_y_given_x2: noise,
    }
}

/// `I(X;Y) = 1/2 log2(1 + T sigma_x2 / sigma_{Y|X}^2)` in bits per symbol.
pub fn mutual_info_xy(ch: ChannelParams, modulation: ModulationParams) -> f64 {
    let v = derived_variances(ch, modulation);
    let snr = ch.transmission * modulation.sigma_x2 / v.sigma_y_given_x2;
    0.5 * libm::log1p(snr) * LOG2_E
}

/// Symplectic spectrum behind Eve's information about Bob's outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LeakageDecomposition {
    pub v: f64,
    pub delta: f64,
    pub d: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    /// `I(Y;E)` in bits per symbol.
    pub leakage_bits: f64,
}

/// Squared eigenvalues more than this below 1 mean the parameters are unphysical;
/// anything between that and 1 is rounding noise and is treated as vacuum.
const VACUUM_REJECT: f64 = 1e-6;

fn physical_nu(nu2: f64) -> Result<f64> {
    if nu2 < 1.0 - VACUUM_REJECT || nu2.is_nan() {
        return Err(Error::NonPhysical(nu2));
    }
    Ok(if nu2 < 1.0 { 1.0 } else { libm::sqrt(nu2) })
}

/// `g((nu - 1)/2)` with the argument formed as `(nu^2 - 1) / (2 (nu + 1))`,
/// which keeps digits when `nu` is barely above 1.
fn eigen_entropy(nu: f64, nu_sq_minus_one: f64) -> Result<f64> {
    let x = if nu_sq_minus_one <= 0.0 {
        0.0
    } else {
        nu_sq_minus_one / (2.0 * (nu + 1.0))
    };
    thermal_entropy_g(x)
}

/// Eve's information about Bob's homodyne outcome, `S(E) - S(E|Y)`.
///
/// Squared eigenvalues just below 1 are clamped to the vacuum value; anything more
/// than 1e-6 below it yields [`Error::NonPhysical`].
pub fn leakage_ey(ch: ChannelParams, modulation: ModulationParams) -> Result<LeakageDecomposition> {
    let t = ch.transmission;
    let var = derived_variances(ch, modulation);
    let v = 1.0 + 2.0 * modulation.sigma_x2;
    let s = 2.0 * var.sigma_y2;
    let v2m1 = 4.0 * modulation.sigma_x2 * (1.0 + modulation.sigma_x2); // V^2 - 1
    let delta = v * v + s * s - 2.0 * t * v2m1;
    let b = v * s - t * v2m1;
    let d = b * b;
    let sqrt_d = b.abs();

    // Delta^2 - 4D = (Delta - 2 sqrt D)(Delta + 2 sqrt D); for b >= 0 the first
    // factor is exactly (V - s)^2, which avoids cancelling two huge numbers.
    let lower = if b >= 0.0 {
        (v - s) * (v - s)
    } else {
        delta - 2.0 * sqrt_d
    };
    let disc = lower * (delta + 2.0 * sqrt_d);
    if disc < 0.0 && disc < -VACUUM_REJECT * delta * delta {
        return Err(Error::NonPhysical(disc));
    }
    let nu1_sq = 0.5 * (delta + libm::sqrt(libm::fmax(disc, 0.0)));
    let nu2_sq = if nu1_sq > 0.0 { d / nu1_sq } else { 0.0 };
    let nu3_sq = v * (v - t * v2m1 / s);

    let nu1 = physical_nu(nu1_sq)?;
    let nu2 = physical_nu(nu2_sq)?;
    let nu3 = physical_nu(nu3_sq)?;

    // nu3^2 - 1 = V^2 - 1 - T V (V^2 - 1)/s = (V^2 - 1)(1 - T V / s)
    let nu3_m1 = v2m1 * (1.0 - t * v / s);
    let leak = eigen_entropy(nu1, nu1_sq - 1.0)? + eigen_entropy(nu2, nu2_sq - 1.0)? - eigen_entropy(nu3, nu3_m1)?;
    Ok(LeakageDecomposition {
        v,
        delta,
        d,
        nu1,
        nu2,
        nu3,
        leakage_bits: leak,
    })
}

/// One-way reverse-reconciliation rate `I(X;Y) - I(Y;E)`; negative when Eve
/// knows more than Alice.
pub fn devetak_winter(ch: ChannelParams, modulation: ModulationParams) -> Result<f64> {
    if ch.excess_noise == 0.0 {
        return Ok(pure_loss_dw(ch.transmission, modulation.sigma_x2));
    }
    Ok(mutual_info_xy(ch, modulation) - leakage_ey(ch, modulation)?.leakage_bits)
}

/// `x ln(1 + 1/x) - 1`, by its series for large `x`.
fn entropy_tail(x: f64) -> f64 {
    if x < 8.0 {
        return x * libm::log1p(1.0 / x) - 1.0;
    }
    let r = -1.0 / x;
    let (mut power, mut sum) = (r, 0.0);
    for j in 1..40 {
        let term = power / (j + 1) as f64;
        sum += term;
        if libm::fabs(term) < 1e-18 * libm::fabs(sum) {
            break;
        }
        power *= r;
    }
    sum
}

/// Without excess noise Eve's mode is thermal with variance `V_E = T + (1 - T) V`
/// and the conditional eigenvalue is `sqrt(V V_E / s)`. Expanding the entropies
/// leaves only terms of order `T` and `1/sigma^2`, so the plateau at small `T`
/// keeps its digits instead of cancelling two values of size `log2 sigma^2`.
fn pure_loss_dw(t: f64, sigma_x2: f64) -> f64 {
    let v = 1.0 + 2.0 * sigma_x2;
    let v_e = 1.0 + 2.0 * (1.0 - t) * sigma_x2;
    let s = 1.0 + 2.0 * t * sigma_x2;
    let nu3 = libm::sqrt(v * v_e / s);
    let (x1, x3) = ((1.0 - t) * sigma_x2, 0.5 * (nu3 - 1.0));
    // h(x) = x ln(1 + 1/x), with h(0) = 0
    let h_gap = match (x1 > 0.0, x3 > 0.0) {
        (true, true) => entropy_tail(x3) - entropy_tail(x1),
        (true, false) => -1.0 - entropy_tail(x1),
        (false, true) => 1.0 + entropy_tail(x3),
        (false, false) => 0.0,
    };
    let nats = -0.5 * libm::log1p(-2.0 * t * sigma_x2 / v) - libm::log1p(1.0 / v_e) + libm::log1p(1.0 / nu3) + h_gap;
    nats * LOG2_E
}

/// Best Devetak-Winter value over the modulation variance at zero excess noise,
/// searched on `log10 sigma_x2` in `[-4, 8]`. Returns `(sigma_x2, rate)`.
pub fn max_dw_point(transmission: f64) -> Result<(f64, f64)> {
    let ch = ChannelParams::new(transmission, 0.0)?;
    let objective = |log_s: f64| {
        let m = ModulationParams {
            sigma_x2: libm::pow(10.0, log_s),
        };
        devetak_winter(ch, m).unwrap_or(f64::NEG_INFINITY)
    };
    let (best, rate) = golden_section_max(objective, -4.0, 8.0, 1e-6);
    Ok((libm::pow(10.0, best), rate))
}

pub fn max_dw(transmission: f64) -> Result<f64> {
    max_dw_point(transmission).map(|p| p.1)
}

/// Repeaterless bound `-log2(1 - T)`; infinite at `T = 1`.
pub fn plob_cv(transmission: f64) -> Result<f64> {
    if !(transmission > 0.0 && transmission <= 1.0) {
        return Err(Error::invalid("transmission", "must lie in (0, 1]"));
    }
    if transmission == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-libm::log1p(-transmission) * LOG2_E)
}

/// `f_beta(x) = 2x [beta - x ln(1 + 1/x)]`.
///
/// For small `T` and zero excess noise, `beta I(X;Y) - I(Y;E)` is close to
/// `(T/2) log2(e) f_beta(sigma_x2)`.
pub fn f_beta(beta: f64, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain {
            what: "f_beta argument",
            value: x,
        });
    }
    Ok(2.0 * x * (beta - x * libm::log1p(1.0 / x)))
}

/// Maximizer of `f_beta` for `0 < beta < 1`, as `(x, f_beta(x))`.
///
/// For `beta >= 1` the function has no finite maximizer.
pub fn f_beta_max(beta: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::invalid("beta", "must lie in (0, 1)"));
    }
    let (ln_x, value) = golden_section_max(
        |ln_x| f_beta(beta, libm::exp(ln_x)).unwrap_or(f64::NEG_INFINITY),
        -20.0,
        20.0,
        1e-10,
    );
    Ok((libm::exp(ln_x), value))
}

pub fn distance_to_transmission(d_km: f64) -> Result<f64> {
    if !(d_km >= 0.0) {
        return Err(Error::Domain {
            what: "distance",
            value: d_km,
        });
    }
    Ok(libm::pow(10.0, -FIBRE_LOSS_DB_PER_KM * d_km / 10.0))
}

pub fn transmission_to_distance(transmission: f64) -> Result<f64> {
    if !(transmission > 0.0 && transmission <= 1.0) {
        return Err(Error::invalid("transmission", "must lie in (0, 1]"));
    }
    Ok(-10.0 * libm::log10(transmission) / FIBRE_LOSS_DB_PER_KM)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn point(t: f64, xi: f64, s: f64) -> (ChannelParams, ModulationParams) {
        (ChannelParams::new(t, xi).unwrap(), ModulationParams::new(s).unwrap())
    }

    #[test]
    fn variances() {
        let (ch, m) = point(1.0, 0.0, 1e-300);
        let v = derived_variances(ch, m);
        assert_eq!(v.sigma_y2, 0.5);
        assert_eq!(v.sigma_y_given_x2, 0.5);

        let (ch, m) = point(0.1, 0.009, 0.9);
        let v = derived_variances(ch, m);
        assert!((v.sigma_y2 - 0.59045).abs() < 1e-12);
        assert!((v.sigma_y_given_x2 - 0.50045).abs() < 1e-12);

        let (ch, m) = point(1e-3, 1.34, 134.0);
        assert!((derived_variances(ch, m).sigma_y_given_x2 - 0.50067).abs() < 1e-12);
    }

    #[test]
    fn default_noise_rule() {
        let m = ModulationParams::new(134.0).unwrap();
        let ch = ChannelParams::with_default_noise(1e-3, m).unwrap();
        assert!((ch.excess_noise() - 1.34).abs() < 1e-12);
    }

    // (T, xi, sigma_x2, I(X;Y), I(Y;E), nu1, nu2, nu3) from a 50-digit evaluation.
    const LEAK_ORACLE: &[(f64, f64, f64, f64, f64, f64, f64, f64)] = &[
        (
            1e-3,
            1.34,
            134.0,
            0.171_073_318_912_762_8,
            0.178_392_353_861_893_45,
            268.732_001_331_389,
            1.001_341_331_388_99,
            238.801_978_971_683,
        ),
        (
            0.1,
            0.009,
            0.9,
            0.119_294_479_600_036_76,
            0.081_262_819_286_459_295,
            2.620_044_739_705_14,
            1.000_944_739_705_14,
            2.493_629_108_192_21,
        ),
        (
            0.5,
            0.0,
            2.0,
            0.792_481_250_360_578_1,
            0.447_627_888_292_401_9,
            3.0,
            1.0,
            2.236_067_977_5,
        ),
    ];

    #[test]
    fn leakage_matches_oracle() {
        for &(t, xi, s, i_xy, i_ey, n1, n2, n3) in LEAK_ORACLE {
            let (ch, m) = point(t, xi, s);
            let l = leakage_ey(ch, m).unwrap();
            assert!(rel(mutual_info_xy(ch, m), i_xy) < 1e-12, "I T={t}");
            assert!(rel(l.leakage_bits, i_ey) < 1e-9, "leak T={t}: {}", l.leakage_bits);
            assert!(rel(l.nu1, n1) < 1e-11);
            assert!(rel(l.nu2, n2) < 1e-11);
            assert!(rel(l.nu3, n3) < 1e-10);
        }
        let (ch, m) = point(1e-6, 1200.0, 1.2e5);
        assert!(rel(leakage_ey(ch, m).unwrap().leakage_bits, 0.162_289_513_718_887_01) < 1e-8);
        assert!(rel(mutual_info_xy(ch, m), 0.155_002_702_920_193_59) < 1e-12);
    }

    #[test]
    fn devetak_winter_values() {
        let (ch, m) = point(1e-3, 1.34, 134.0);
        let dw = devetak_winter(ch, m).unwrap();
        assert!((dw - -0.007_319_034_949_130_646_8).abs() < 1e-10);
        let (ch, m) = point(0.1, 0.009, 0.9);
        assert!((devetak_winter(ch, m).unwrap() - 0.038_031_660_313_577_468).abs() < 1e-10);
    }

    #[test]
    fn blocked_channel_leaks_nothing() {
        let (ch, m) = point(1e-12, 0.0, 50.0);
        let l = leakage_ey(ch, m).unwrap();
        assert!(l.leakage_bits.abs() < 1e-8);
        assert!(mutual_info_xy(ch, m) < 1e-9);
        assert!(devetak_winter(ch, m).unwrap().abs() < 1e-8);
    }

    #[test]
    fn small_t_approximations() {
        // mutual information ~ T sigma^2 log2 e within 10% at T sigma^2 <= 0.1
        for &(t, s) in &[(1e-3, 100.0), (1e-3, 10.0), (1e-6, 5e4)] {
            let (ch, m) = point(t, 0.0, s);
            let approx = t * s * LOG2_E;
            assert!(rel(mutual_info_xy(ch, m), approx) < 0.1);
        }
        // leakage ~ T sigma^2 log2 e * sigma^2 ln((1 + sigma^2)/sigma^2), 15% at T sigma^2 = 0.05
        let (ch, m) = point(1e-3, 0.0, 50.0);
        let approx = 0.05 * LOG2_E * 50.0 * libm::log(51.0 / 50.0);
        assert!(rel(leakage_ey(ch, m).unwrap().leakage_bits, approx) < 0.15);
    }

    #[test]
    fn max_dw_values() {
        assert!(rel(max_dw(1e-3).unwrap(), 7.213e-4) < 0.02);
        assert!(rel(max_dw(1e-6).unwrap(), 7.213e-7) < 0.02);
        let mut last = 0.0;
        for &t in &[1e-8, 1e-6, 1e-4, 1e-3, 1e-2, 0.1, 0.3] {
            let v = max_dw(t).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn plob_values() {
        assert_eq!(plob_cv(0.5).unwrap(), 1.0);
        assert!((plob_cv(1e-6).unwrap() - 1.4427e-6).abs() < 1e-10);
        assert!((plob_cv(1e-3).unwrap() - 1.4434e-3).abs() < 1e-7);
        assert_eq!(plob_cv(1.0).unwrap(), f64::INFINITY);
        for &t in &[1e-8, 1e-6, 1e-3, 0.1, 0.5, 0.9] {
            assert!(plob_cv(t).unwrap() > max_dw(t).unwrap());
        }
    }

    #[test]
    fn f_beta_shape() {
        assert!((f_beta(1.0, 1e6).unwrap() - 1.0).abs() < 1e-3);
        assert!(f_beta(0.5, 10.0).unwrap() < 0.0);
        let (x, _) = f_beta_max(0.95).unwrap();
        assert!((x - 1.855_8).abs() < 1e-3, "{x}");
        assert!(f_beta_max(1.0).is_err());
    }

    #[test]
    fn distances() {
        assert_eq!(distance_to_transmission(0.0).unwrap(), 1.0);
        assert!(rel(distance_to_transmission(136.0).unwrap(), 1.018_591e-3) < 1e-6);
        assert!(rel(distance_to_transmission(273.0).unwrap(), 9.862_79e-7) < 1e-5);
        // the nominal 10^-3 and 10^-6 points are within 2% of these distances
        assert!(rel(distance_to_transmission(136.0).unwrap(), 1e-3) < 0.02);
        assert!(rel(distance_to_transmission(273.0).unwrap(), 1e-6) < 0.02);
        assert!((transmission_to_distance(1e-3).unwrap() - 136.363_636).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ChannelParams::new(0.0, 0.0).is_err());
        assert!(ChannelParams::new(1.1, 0.0).is_err());
        assert!(ChannelParams::new(0.5, -1.0).is_err());
        assert!(ModulationParams::new(0.0).is_err());
        assert!(f_beta(1.0, 0.0).is_err());
    }

    #[test]
    fn pure_loss_matches_eigenvalue_route() {
        for &t in &[0.9, 0.1, 1e-2, 1e-3] {
            for &s in &[0.05, 0.7, 3.0, 40.0, 500.0] {
                let (ch, m) = point(t, 0.0, s);
                let general = mutual_info_xy(ch, m) - leakage_ey(ch, m).unwrap().leakage_bits;
                let fast = devetak_winter(ch, m).unwrap();
                assert!(
                    (fast - general).abs() <= 1e-12 + 1e-9 * general.abs(),
                    "T={t} s={s}: {fast} vs {general}"
                );
            }
        }
        // far plateau: approaches T log2(e) / 2 from below
        let (ch, m) = point(1e-8, 0.0, 1e6);
        let dw = devetak_winter(ch, m).unwrap();
        assert!(dw < 0.5e-8 * LOG2_E && rel(dw, 0.5e-8 * LOG2_E) < 1e-5);
    }
}
