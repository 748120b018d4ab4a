//! One-dimensional quadrature helpers.

/// Adaptive Simpson integration of `f` over `[a, b]` to relative tolerance
/// `rel_tol` (with an absolute floor of `rel_tol * 1e-3`).
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let eps = (rel_tol * whole.abs()).max(rel_tol * 1e-3);
    simpson_step(&f, a, b, fa, fm, fb, whole, eps, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }
}

/// Fourth-order composite rule for samples `g[0..=m]` on a uniform grid of
/// step `h`: Simpson over an even number of intervals, closed with the 3/8
/// rule when `m` is odd. A single interval falls back to the trapezoid.
pub fn composite_uniform(g: &[f64], h: f64) -> f64 {
    let m = g.len().saturating_sub(1);
    match m {
        0 => 0.0,
        1 => 0.5 * h * (g[0] + g[1]),
        2 => h / 3.0 * (g[0] + 4.0 * g[1] + g[2]),
        3 => 3.0 * h / 8.0 * (g[0] + 3.0 * g[1] + 3.0 * g[2] + g[3]),
        _ => {
            let even = if m.is_multiple_of(2) { m } else { m - 3 };
            let mut s = g[0] + g[even];
            for (i, v) in g.iter().enumerate().take(even).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = h / 3.0 * s;
            if even < m {
                total +=
                    3.0 * h / 8.0 * (g[even] + 3.0 * g[even + 1] + 3.0 * g[even + 2] + g[even + 3]);
            }
            total
        }
    }
}

/// Running integrals `[int_0^{x_0}, int_0^{x_1}, ...]` of uniform samples,
/// each computed with [`composite_uniform`].
pub fn cumulative_uniform(g: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(g.len());
    // prefix of the even-index Simpson sums
    let mut simpson_prefix = vec![0.0; g.len()];
    for m in 0..g.len() {
        if m >= 2 && m % 2 == 0 {
            simpson_prefix[m] =
                simpson_prefix[m - 2] + h / 3.0 * (g[m - 2] + 4.0 * g[m - 1] + g[m]);
        }
        let value = match m {
            0 => 0.0,
            1 => 0.5 * h * (g[0] + g[1]),
            _ if m % 2 == 0 => simpson_prefix[m],
            _ => {
                simpson_prefix[m - 3]
                    + 3.0 * h / 8.0 * (g[m - 3] + 3.0 * g[m - 2] + 3.0 * g[m - 1] + g[m])
            }
        };
        out.push(value);
    }
    out
}
