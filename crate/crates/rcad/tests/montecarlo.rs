mod common;

use rcad::Parallel;
use rcad_core::analytics::{RateEngine, SchemeParams};
use rcad_core::channel::{ChannelParams, ModulationParams};
use rcad_core::montecarlo::{
    accumulate_accepted, run_batch, score_samples, ScoreKind, TrialConfig, TrialMode, TrialTally,
};
use rcad_core::numerics::NoncentralChi2;

use common::{decoupling_test, ks_one_sample};

fn anchor(mode: TrialMode, trials: u64, seed: u64) -> TrialConfig {
    let m = ModulationParams::new(134.0).unwrap();
    let ch = ChannelParams::with_default_noise(1e-3, m).unwrap();
    TrialConfig::new(trials, seed, SchemeParams::new(1024, 1.45, -0.55).unwrap(), ch, m, mode).unwrap()
}

#[test]
fn noiseless_channel_accepts_truth() {
    let m = ModulationParams::new(400.0).unwrap();
    let ch = ChannelParams::new(1.0, 0.0).unwrap();
    // the derived blocklength here is 2, far too short to separate 1024 rows
    let scheme = SchemeParams::new(1024, 1.45, 2.0).unwrap().with_n(16).unwrap();
    let config = TrialConfig::new(100, 5, scheme, ch, m, TrialMode::FreeM).unwrap();
    let tally = run_batch(&config, &Parallel::new(None).unwrap()).unwrap();
    assert!(tally.counts[0] >= 99, "{:?}", tally.counts);
}

#[test]
fn hopeless_threshold_rejects_everything() {
    let m = ModulationParams::new(134.0).unwrap();
    let ch = ChannelParams::with_default_noise(1e-3, m).unwrap();
    let scheme = SchemeParams::new(1024, 1.45, -99.0).unwrap();
    let config = TrialConfig::new(500, 5, scheme, ch, m, TrialMode::FreeM).unwrap();
    let tally = run_batch(&config, &Parallel::new(None).unwrap()).unwrap();
    assert_eq!(tally.p_acc().value, 0.0);
    assert_eq!(tally.trials(), 500);
}

#[test]
fn tallies_ignore_thread_count() {
    let config = anchor(TrialMode::FreeM, 10_000, 123);
    let one = run_batch(&config, &Parallel::new(Some(1)).unwrap()).unwrap();
    let eight = run_batch(&config, &Parallel::new(Some(8)).unwrap()).unwrap();
    assert_eq!(one, eight);
    assert_eq!(one, run_batch(&config, &Parallel::new(Some(3)).unwrap()).unwrap());
    let f = one.frequencies();
    assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn zero_signal_scores_are_central() {
    let n = 41;
    let config = anchor(TrialMode::FixedX(vec![0.0; n]), 1, 8);
    let exec = Parallel::new(None).unwrap();
    let central = NoncentralChi2::new(n as f64, 0.0).unwrap();
    for kind in [ScoreKind::TrueCodeword, ScoreKind::WrongCodeword] {
        let (s, m) = score_samples(&config, kind, 5000, &exec).unwrap();
        assert_eq!(m, 0.0);
        let (_, p) = ks_one_sample(&s, |z| central.cdf(z));
        assert!(p > 0.01, "{kind:?}: p = {p}");
    }
}

#[test]
fn masked_values_uniform_with_zero_table() {
    let config = anchor(TrialMode::FreeM, 1, 31);
    let r = decoupling_test(&config, 100_000, 0, 1023, &Parallel::new(None).unwrap());
    assert!(r.uniformity_p > 0.001, "{r:?}");
    assert!(r.zero_mask_p > 0.001, "{r:?}");
    assert!(r.two_sample_p > 0.01, "{r:?}");
}

/// Free block energy at the tabulated operating point: empirical rates against
/// the energy-averaged prediction, then the bit error rate of the first 10^4 accepts.
#[test]
fn free_energy_rates_and_bit_errors() {
    let config = anchor(TrialMode::FreeM, 280_000, 2024);
    let tally: TrialTally = run_batch(&config, &Parallel::new(None).unwrap()).unwrap();
    let p = RateEngine::default()
        .secret_key_ratio(&config.scheme, config.channel, config.modulation)
        .unwrap();
    let z_ta = tally.p_ta().z_score(p.p_ta_av, tally.trials());
    let z_fa = tally.p_fa().z_score(p.p_fa_av, tally.trials());
    assert!(z_ta.abs() < 3.0 && z_fa.abs() < 3.0, "z_ta {z_ta}, z_fa {z_fa}");

    let blocks = 10_000;
    let bits = accumulate_accepted(&tally, blocks, 1024).unwrap();
    assert_eq!(bits.bits.len(), blocks * 10);
    // per-symbol error fractions carry the within-symbol correlation
    let fractions: Vec<f64> = tally.accepted[..blocks]
        .iter()
        .map(|&(u, u_hat)| (u ^ u_hat).count_ones() as f64 / 10.0)
        .collect();
    let mean = fractions.iter().sum::<f64>() / blocks as f64;
    let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (blocks - 1) as f64;
    assert!((mean - bits.ber).abs() < 1e-15);
    assert!(accumulate_accepted(&tally, tally.accepted.len() + 1, 1024).is_err());
    let se = (var / blocks as f64).sqrt();
    // symbol errors in the accepted stream occur at P_FA / P_acc of the averaged rates
    let pooled = p.p_fa_av / p.p_acc_av / 2.0;
    assert!(
        (bits.ber - pooled).abs() < 3.0 * se,
        "BER {} vs pooled {pooled}",
        bits.ber
    );
    // the m-averaged SER used in the key rate
    let target = p.ser_av / 2.0;
    assert!(
        (bits.ber - target).abs() < 3.0 * se,
        "BER {} vs averaged SER / 2 = {target}",
        bits.ber
    );
}
