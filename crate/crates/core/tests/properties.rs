use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rcad_core::analytics::{conditional_rates, pi0, pi1, RateEngine, SchemeParams};
use rcad_core::channel::{
    derived_variances, devetak_winter, f_beta, leakage_ey, max_dw, mutual_info_xy, plob_cv, ChannelParams,
    ModulationParams,
};
use rcad_core::numerics::{gaussian_cdf, gaussian_cdf_inv, marcum_q, NoncentralChi2, LOG2_E};
use rcad_core::reconciliation::{generate_codebook, mod1, EmpiricalM, Scorer, Table};

fn link(t: f64, s: f64) -> (ChannelParams, ModulationParams) {
    let m = ModulationParams::new(s).unwrap();
    (ChannelParams::with_default_noise(t, m).unwrap(), m)
}

#[test]
fn ncx2_cdf_monotone_on_grid() {
    // 10 x 10 x 10 points: dof, noncentrality, z
    for &dof in &[1.0, 2.0, 5.0, 10.0, 20.0, 41.0, 64.0, 100.0, 300.0, 1000.0] {
        for &z_rel in &[0.2, 0.5, 0.8, 0.9, 1.0, 1.1, 1.3, 1.6, 2.0, 3.0] {
            let mut prev = f64::INFINITY;
            for &lam in &[0.0, 0.5, 1.0, 5.0, 10.0, 40.0, 100.0, 400.0, 1000.0, 5000.0] {
                let z = z_rel * (dof + 40.0);
                let c = NoncentralChi2::new(dof, lam).unwrap().cdf(z);
                assert!(
                    c <= prev * (1.0 + 1e-12) + 1e-300,
                    "noncentrality dof={dof} z={z} lam={lam}"
                );
                prev = c;
            }
        }
        for &lam in &[0.0, 3.0, 50.0, 900.0] {
            let d = NoncentralChi2::new(dof, lam).unwrap();
            let mut prev = 0.0;
            for i in 0..=60 {
                let z = (dof + lam) * 3.0 * i as f64 / 60.0;
                let c = d.cdf(z);
                assert!(c >= prev * (1.0 - 1e-12), "z dof={dof} lam={lam} z={z}");
                prev = c;
            }
        }
    }
}

#[test]
fn ncx2_sample_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mu = [0.5, -1.0, 2.0, 0.0, 1.5, -0.3, 0.7, 1.1];
    let k = mu.len() as f64;
    let lam: f64 = mu.iter().map(|m| m * m).sum();
    let draws = 100_000;
    let z: Vec<f64> = (0..draws)
        .map(|_| {
            mu.iter()
                .map(|m| {
                    let v = m + rng.sample::<f64, _>(StandardNormal);
                    v * v
                })
                .sum()
        })
        .collect();
    let mean = z.iter().sum::<f64>() / draws as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let (m_true, v_true) = (k + lam, 2.0 * k + 4.0 * lam);
    let mu4 = 48.0 * (k + 4.0 * lam) + 3.0 * v_true * v_true;
    assert!(
        (mean - m_true).abs() < 3.0 * (v_true / draws as f64).sqrt(),
        "{mean} vs {m_true}"
    );
    assert!(
        (var - v_true).abs() < 3.0 * ((mu4 - v_true * v_true) / draws as f64).sqrt(),
        "{var} vs {v_true}"
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn marcum_complements_ncx2(nu in 0.5f64..60.0, a in 0.0f64..40.0, b in 0.0f64..50.0) {
        let q = marcum_q(nu, a, b).unwrap();
        let c = NoncentralChi2::new(2.0 * nu, a * a).unwrap().cdf(b * b);
        prop_assert!((q + c - 1.0).abs() <= 1e-12, "q={} c={}", q, c);
    }

    #[test]
    fn scores_ignore_integer_shifts(seed in any::<u64>(), shift in -5i32..5) {
        let (ch, m) = link(1e-3, 134.0);
        let scorer = Scorer::new(ch, m).unwrap();
        let table = generate_codebook(seed, 8, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..6).map(|_| 11.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let c: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let kx = scorer.centered(&x);
        let mut w = vec![0.0; 6];
        for row in 0..8 {
            table.row_into(row, &mut w);
            let base = scorer.score_row(&kx, &w, &c);
            let c_shift: Vec<f64> = c.iter().map(|v| v + shift as f64).collect();
            let w_shift: Vec<f64> = w.iter().map(|v| v - 2.0 * shift as f64).collect();
            let shifted = scorer.score_row(&kx, &w_shift, &c_shift);
            prop_assert!((base - shifted).abs() <= 1e-9 * base.max(1.0));
        }
        prop_assert_eq!(mod1(0.25 + shift as f64), 0.25);
    }

    #[test]
    fn derived_variance_gap(t in 1e-9f64..1.0, s in 1e-3f64..1e8) {
        let (ch, m) = link(t, s);
        let d = derived_variances(ch, m);
        prop_assert!(d.sigma_y2 > d.sigma_y_given_x2);
        prop_assert!(((d.sigma_y2 - d.sigma_y_given_x2) - t * s).abs() <= 1e-12 * d.sigma_y2);
    }

    #[test]
    fn plob_above_max_dw(log_t in -9.0f64..-0.01) {
        let t = 10f64.powf(log_t);
        prop_assert!(plob_cv(t).unwrap() > max_dw(t).unwrap());
    }

    #[test]
    fn tails_monotone_in_alpha(t_exp in 1u32..7, s_scale in 0.05f64..0.3, n in 10usize..80, m_rel in 0.7f64..1.3) {
        let t = 10f64.powi(-(t_exp as i32));
        let (ch, md) = link(t, s_scale / t);
        let m = EmpiricalM::new(m_rel * n as f64).unwrap();
        let (mut p1, mut p0) = (f64::INFINITY, 0.0);
        for i in 0..100 {
            let alpha = -1.5 + 2.0 * i as f64 / 99.0;
            let a1 = pi1(m, n, alpha, ch, md).unwrap();
            let a0 = pi0(m, n, alpha, ch, md).unwrap();
            prop_assert!(a1 <= p1 * (1.0 + 1e-12) + 1e-300);
            prop_assert!(a0 >= p0 * (1.0 - 1e-12));
            p1 = a1;
            p0 = a0;
        }
    }

    #[test]
    fn accept_probabilities_and_ser_identity(q_exp in 1u32..21, alpha in -1.5f64..0.5, gamma in 0.8f64..2.2) {
        let (ch, m) = link(1e-3, 134.0);
        let scheme = SchemeParams::new(1u64 << q_exp, gamma, alpha).unwrap();
        let n = scheme.blocklength(ch, m).unwrap();
        for &(mm, _) in RateEngine::default().averager(n).points() {
            let r = conditional_rates(EmpiricalM::new(mm).unwrap(), n, &scheme, ch, m).unwrap();
            prop_assert!(r.p_ta >= 0.0 && r.p_fa >= 0.0);
            prop_assert!(r.p_ta + r.p_fa <= 1.0 + 1e-12);
            if r.p_acc > 1e-300 {
                prop_assert!((r.ser * (r.p_ta + r.p_fa) - r.p_fa).abs() <= 1e-12 * r.p_fa.max(1e-300));
            }
        }
    }
}

#[test]
fn gaussian_quantile_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        // log-uniform in the tails, uniform in the middle
        let p: f64 = match rng.random_range(0..3) {
            0 => 10f64.powf(rng.random_range(-12.0..-1.0)),
            1 => 1.0 - 10f64.powf(rng.random_range(-12.0..-1.0)),
            _ => rng.random_range(1e-12..1.0 - 1e-12),
        };
        let sigma = rng.random_range(0.1..1e4);
        let y = gaussian_cdf_inv(p, sigma).unwrap();
        let back = gaussian_cdf(y, sigma);
        let tail = p.min(1.0 - p);
        assert!((back - p).abs() <= 1e-9 * tail, "p={p} back={back}");
    }
}

#[test]
fn devetak_winter_unimodal_in_modulation() {
    for &t in &[0.1, 1e-2, 1e-3, 1e-6, 1e-8] {
        let vals: Vec<f64> = (0..=160)
            .map(|i| {
                let s = 10f64.powf(-2.0 + 8.0 * i as f64 / 160.0);
                let m = ModulationParams::new(s).unwrap();
                devetak_winter(ChannelParams::new(t, 0.0).unwrap(), m).unwrap()
            })
            .collect();
        let signs: Vec<bool> = vals.windows(2).map(|w| w[1] > w[0]).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert!(changes <= 1, "T={t}: {changes} slope sign changes");
    }
}

#[test]
fn small_transmission_rate_approximation() {
    for &t in &[1e-4, 1e-6] {
        for &ts in &[0.002, 0.01, 0.05, 0.1] {
            let s = ts / t;
            let m = ModulationParams::new(s).unwrap();
            let ch = ChannelParams::new(t, 0.0).unwrap();
            for &beta in &[0.9, 1.0, 1.2] {
                let exact = beta * mutual_info_xy(ch, m) - leakage_ey(ch, m).unwrap().leakage_bits;
                let approx = 0.5 * t * LOG2_E * f_beta(beta, s).unwrap();
                assert!(
                    ((approx - exact) / exact).abs() <= 0.1,
                    "T={t} Ts={ts} beta={beta}: {approx} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn small_transmission_key_ratio_form() {
    // Bracketed rate terms of the full and first-order key ratio, with the same
    // acceptance statistics, at T sigma^2 = 0.05 and no excess noise.
    use rcad_core::analytics::skr_small_t;
    use rcad_core::numerics::binary_entropy;
    for &t in &[1e-4, 1e-6] {
        let s = 0.05 / t;
        let m = ModulationParams::new(s).unwrap();
        let ch = ChannelParams::new(t, 0.0).unwrap();
        let (p_acc, ser, gamma) = (0.04, 0.05, 1.45);
        let full = p_acc
            * (gamma * mutual_info_xy(ch, m) * (1.0 - binary_entropy(ser / 2.0).unwrap())
                - leakage_ey(ch, m).unwrap().leakage_bits);
        let first = skr_small_t(p_acc, ser, gamma, t, s).unwrap();
        assert!(((first - full) / full).abs() <= 0.1, "T={t}: {first} vs {full}");
    }
}
