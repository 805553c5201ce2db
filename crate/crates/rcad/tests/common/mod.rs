//! Goodness-of-fit statistics and shared checks for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rcad_core::channel::{derived_variances, ChannelParams, ModulationParams};
use rcad_core::exec::Executor;
use rcad_core::montecarlo::{collect_masked, MaskSource, TrialConfig};
use rcad_core::reconciliation::{encode, generate_codebook, mod1, Scorer, Table};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS statistic and asymptotic p-value.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    (d, kolmogorov_sf(n.sqrt() * d))
}

/// Two-sample KS statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    (d, kolmogorov_sf(ne.sqrt() * d))
}

/// Pearson chi-square test of uniformity on [0, 1) with equal bins.
pub fn chi_square_uniform(values: &[f64], bins: usize) -> (f64, f64) {
    let mut counts = vec![0u64; bins];
    for &v in values {
        counts[((v * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let expected = values.len() as f64 / bins as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = ChiSquared::new((bins - 1) as f64).unwrap().sf(stat);
    (stat, p)
}

#[derive(Debug, Clone)]
pub struct DecouplingReport {
    /// Pooled uniformity of all announced values with Bob's row at `u_a`.
    pub uniformity_p: f64,
    /// Uniformity per block coordinate.
    pub coordinate_p: Vec<f64>,
    /// Two-sample KS between the values for `u_a` and `u_b`.
    pub two_sample_p: f64,
    /// Uniformity with an all-zero table.
    pub zero_mask_p: f64,
}

/// Uniformity of the announced values and their independence from Bob's row.
pub fn decoupling_test<E: Executor>(
    config: &TrialConfig,
    samples: usize,
    u_a: usize,
    u_b: usize,
    executor: &E,
) -> DecouplingReport {
    let blocks = samples.div_ceil(config.n);
    let a = collect_masked(config, u_a, blocks, MaskSource::Fresh, executor).unwrap();
    let mut other = config.clone();
    other.master_seed = config.master_seed.wrapping_add(0x5151);
    let b = collect_masked(&other, u_b, blocks, MaskSource::Fresh, executor).unwrap();
    let zero = collect_masked(config, u_a, blocks, MaskSource::Zero, executor).unwrap();
    let (a, b, zero) = (&a[..samples], &b[..samples], &zero[..samples]);
    let coordinate_p = (0..config.n)
        .map(|i| {
            let col: Vec<f64> = a.iter().skip(i).step_by(config.n).copied().collect();
            chi_square_uniform(&col, 100).1
        })
        .collect();
    DecouplingReport {
        uniformity_p: chi_square_uniform(a, 100).1,
        coordinate_p,
        two_sample_p: ks_two_sample(a, b).1,
        zero_mask_p: chi_square_uniform(zero, 100).1,
    }
}

/// Log posterior of each row, computed straight from the Gaussian densities:
/// `sum_i ln f(y_i | x_i) - ln f(y_i)` with `y_i` unmasked under that row.
pub fn log_posteriors<T: Table>(x: &[f64], c: &[f64], table: &T, ch: ChannelParams, m: ModulationParams) -> Vec<f64> {
    let v = derived_variances(ch, m);
    let fy = Normal::new(0.0, v.sigma_y2.sqrt()).unwrap();
    let st = ch.transmission().sqrt();
    let cond_sd = v.sigma_y_given_x2.sqrt();
    let ln_normal = |y: f64, mean: f64, sd: f64| -0.5 * ((y - mean) / sd).powi(2) - sd.ln();
    let mut w = vec![0.0; x.len()];
    (0..table.rows())
        .map(|row| {
            table.row_into(row, &mut w);
            x.iter()
                .zip(c)
                .zip(&w)
                .map(|((&xi, &ci), &wi)| {
                    let y = fy.inverse_cdf(mod1(ci - wi));
                    ln_normal(y, st * xi, cond_sd) - ln_normal(y, 0.0, v.sigma_y2.sqrt())
                })
                .sum()
        })
        .collect()
}

/// Checks one random small instance: ascending scores and descending posteriors
/// must give the same order, up to near-ties.
pub fn neyman_pearson_instance(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=8usize);
    let q = rng.random_range(2..=16usize);
    let t = 10f64.powf(rng.random_range(-6.0..-0.5));
    let s = rng.random_range(0.02..0.5) / t;
    let m = ModulationParams::new(s).unwrap();
    let ch = ChannelParams::with_default_noise(t, m).unwrap();
    let v = derived_variances(ch, m);
    let x: Vec<f64> = (0..n)
        .map(|_| s.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&xi| t.sqrt() * xi + v.sigma_y_given_x2.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let table = generate_codebook(rng.random(), q, n).unwrap();
    let u = rng.random_range(0..q);
    let msg = encode(&y, &table, u, v.sigma_y()).map_err(|e| e.to_string())?;
    let scores = Scorer::new(ch, m)
        .unwrap()
        .scores(&x, &table, &msg.c)
        .map_err(|e| e.to_string())?;
    let post = log_posteriors(&x, &msg.c, &table, ch, m);
    let order = scores.ranking();
    for pair in order.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let tie = (scores.scores[a] - scores.scores[b]).abs() <= 1e-9 * scores.scores[b].abs().max(1.0);
        if !tie && post[a] < post[b] - 1e-9 * post[b].abs().max(1.0) {
            return Err(format!(
                "seed {seed}: rows {a},{b} scores {} < {} but log posteriors {} < {}",
                scores.scores[a], scores.scores[b], post[a], post[b]
            ));
        }
    }
    Ok(())
}
