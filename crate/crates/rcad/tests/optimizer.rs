use rcad::Parallel;
use rcad_core::analytics::RateEngine;
use rcad_core::optimizer::{optimize, Optimum, SearchSpace};

fn best(t: f64, q: u64) -> Optimum {
    let engine = RateEngine::default();
    optimize(
        &engine,
        t,
        q,
        &SearchSpace::coarse(t).unwrap(),
        &Parallel::new(None).unwrap(),
    )
    .unwrap()
}

#[test]
fn optimum_at_1e_3() {
    let o = best(1e-3, 1024);
    assert!(!o.all_negative);
    assert!(o.best.skr() >= 0.0009, "{}", o.best.skr());
    assert!(o.best.skr() >= o.grid_best.skr());
}

#[test]
fn optimum_at_1e_6() {
    let o = best(1e-6, 1024);
    assert!(o.best.skr() >= 0.00085, "{}", o.best.skr());
    let s = o.best.candidate.sigma_x2;
    assert!(
        s >= 1.2e5 / 2.0 && s <= 1.2e5 * 2.0,
        "sigma_X^2* = {s:.4e} (n = {})",
        o.best.prediction.n
    );
}

#[test]
fn optimum_at_1e_1_small_alphabet() {
    let o = best(1e-1, 32);
    assert!(o.best.skr() >= 0.0044, "{}", o.best.skr());
}
