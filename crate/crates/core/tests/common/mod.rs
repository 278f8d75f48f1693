//! Reference computations shared by integration tests.

#![allow(dead_code)]

fn log_density(mean: f64, var: f64, x: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
        return left + right + (left + right - whole) / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) + adaptive(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive(&f, a, b, fa, fm, fb, whole, eps, 60)
}

/// `KL(P || Q)` in nats by quadrature in the standardized variable of `P`.
pub fn kl_by_quadrature(mp: f64, vp: f64, mq: f64, vq: f64) -> f64 {
    let sp = vp.sqrt();
    integrate(
        |t| {
            let x = mp + sp * t;
            let lp = log_density(mp, vp, x);
            (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt() * (lp - log_density(mq, vq, x))
        },
        -40.0,
        40.0,
        1e-12,
    )
}

/// Deterministic `(mean_p, var_p, mean_q, var_q)` tuples with variance
/// ratios in `[0.1, 10]`.
pub fn kl_parameter_sets(count: usize, seed: u64) -> Vec<(f64, f64, f64, f64)> {
    let mut state = seed;
    let mut uniform = |lo: f64, hi: f64| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        lo + (hi - lo) * (state >> 11) as f64 / (1u64 << 53) as f64
    };
    (0..count)
        .map(|_| {
            let (mp, mq) = (uniform(-50.0, 50.0), uniform(-50.0, 50.0));
            let vp = uniform(0.1, 100.0);
            (mp, vp, mq, vp * uniform(0.1, 10.0))
        })
        .collect()
}
