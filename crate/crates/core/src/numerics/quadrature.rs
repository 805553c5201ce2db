use alloc::vec::Vec;

use super::gamma::ln_gamma;

/// Node count used for averaging over Alice's block energy.
pub const M_AVERAGE_NODES: usize = 512;

/// Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = Vec::with_capacity(order);
        let mut weights = Vec::with_capacity(order);
        let n = order as f64;
        for i in 0..order {
            // Newton from the usual cosine guess; roots come out in descending order.
            let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(order, x);
            if d != 0.0 {
                dp = d;
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Integral of `f` over `[lo, hi]`.
    pub fn integrate(&self, lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if order == 0 {
        return (1.0, 0.0);
    }
    let n = order as f64;
    (p1, n * (x * p1 - p0) / (x * x - 1.0))
}

/// Expectation over `m ~ chi-square(dof)` by a fixed quadrature rule.
///
/// The window is `[max(0, n - 12 sqrt(2n)), n + 12 sqrt(2n) + 60]`, integrated in
/// `t = sqrt(m)` so the density is smooth at the origin even for small `n`.
/// Weights are normalized by the captured mass and nodes whose weight is below
/// 1e-19 of the total are dropped.
#[derive(Debug, Clone)]
pub struct ChiSquareAverager {
    dof: u32,
    points: Vec<(f64, f64)>,
}

impl ChiSquareAverager {
    pub fn new(dof: u32, rule: &GaussLegendre) -> Self {
        assert!(dof >= 1, "chi-square needs at least one degree of freedom");
        let n = dof as f64;
        let spread = 12.0 * libm::sqrt(2.0 * n);
        let lo = libm::sqrt(libm::fmax(0.0, n - spread));
        let hi = libm::sqrt(n + spread + 60.0);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        // density of t = sqrt(m): 2 t^(n-1) e^(-t^2/2) / (2^(n/2) Gamma(n/2))
        let ln_norm = core::f64::consts::LN_2 - 0.5 * n * core::f64::consts::LN_2 - ln_gamma(0.5 * n);
        let mut points: Vec<(f64, f64)> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| {
                let t = mid + half * x;
                let ln_density = ln_norm + (n - 1.0) * libm::log(t) - 0.5 * t * t;
                (t * t, w * half * libm::exp(ln_density))
            })
            .collect();
        let mass: f64 = points.iter().map(|p| p.1).sum();
        let floor = mass * 1e-19;
        points.retain(|p| p.1 > floor);
        let kept: f64 = points.iter().map(|p| p.1).sum();
        for p in &mut points {
            p.1 /= kept;
        }
        ChiSquareAverager { dof, points }
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }

    /// `(m, weight)` pairs; weights sum to one.
    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn average(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.points.iter().map(|&(m, w)| w * f(m)).sum()
    }
}

/// `E[f(m)]` for `m ~ chi-square(dof)` with the default 512-node rule.
pub fn average_over_m(f: impl FnMut(f64) -> f64, dof: u32) -> f64 {
    ChiSquareAverager::new(dof, &GaussLegendre::new(M_AVERAGE_NODES)).average(f)
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
///
/// Stops when the bracket is narrower than `rel_tol * max(|x|, 1)`. Returns the
/// best point seen and its value.
pub fn golden_section_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..500 {
        if (b - a).abs() <= rel_tol * libm::fmax(c.abs(), 1.0) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
