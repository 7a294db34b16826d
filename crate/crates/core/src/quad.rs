//! Quadrature and interpolation primitives used by the field caches and
//! the analytic phase integrals.

use crate::error::{Error, Result};

/// Composite Simpson integral of `f` over `[a, b]` with `n` panels
/// (`n` even).
pub(crate) fn composite_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    debug_assert!(n >= 2 && n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Composite Simpson with panel doubling until two successive estimates
/// agree to `rel_tol` (relative to the larger magnitude, with an absolute
/// floor for integrals near zero).
pub(crate) fn simpson_to_tolerance(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<f64> {
    if b < a {
        return simpson_to_tolerance(f, b, a, rel_tol).map(|v| -v);
    }
    if b == a {
        return Ok(0.0);
    }
    // For integrands that nearly cancel, pure relative agreement of the
    // signed value is unattainable in f64; the L1 mass sets the floor.
    let l1 = composite_simpson(&|t| f(t).abs(), a, b, 256);
    let mut n = 16usize;
    let mut prev = composite_simpson(f, a, b, n);
    for _ in 0..24 {
        n *= 2;
        let next = composite_simpson(f, a, b, n);
        let scale = next.abs().max(prev.abs()).max(l1.abs()).max(1e-300);
        if (next - prev).abs() <= rel_tol * scale {
            if !next.is_finite() {
                return Err(Error::numerical(format!(
                    "simpson quadrature produced a non-finite value on [{a}, {b}]"
                )));
            }
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::numerical(format!(
        "simpson quadrature did not reach rel_tol={rel_tol} on [{a}, {b}] after {n} panels; \
         last estimate {prev}"
    )))
}

/// Cumulative integral of a smooth function sampled on a uniform grid.
///
/// Holds `F(t_j) = ∫₀^{t_j} g` at nodes `t_j = j·h` and answers queries in
/// between with 4-point Lagrange interpolation. Node values are built with
/// per-cell Simpson rules (even nodes) and the 3-point half-panel rule
/// (odd nodes), so each cell is exact through cubics.
#[derive(Debug, Clone)]
pub(crate) struct CumulativeGrid {
    step: f64,
    values: Vec<f64>,
}

impl CumulativeGrid {
    /// Integrate `g` from 0 to `t_max` on nodes spaced `step` apart.
    pub(crate) fn build(g: &dyn Fn(f64) -> f64, t_max: f64, step: f64) -> Self {
        let n_cells = ((t_max / step).ceil() as usize).max(2);
        let samples: Vec<f64> = (0..=n_cells).map(|j| g(j as f64 * step)).collect();
        Self::from_samples(&samples, step)
    }

    /// Same construction, but from pre-evaluated samples `g(j·step)`.
    pub(crate) fn from_samples(samples: &[f64], step: f64) -> Self {
        debug_assert!(samples.len() >= 3);
        let n = samples.len() - 1;
        let mut values = vec![0.0; n + 1];
        let mut m = 0;
        // Walk even pairs with Simpson; fill the intermediate odd node with
        // the half-panel Newton-Cotes rule over the same three samples.
        while m + 2 <= n {
            let (g0, g1, g2) = (samples[m], samples[m + 1], samples[m + 2]);
            values[m + 1] = values[m] + step / 12.0 * (5.0 * g0 + 8.0 * g1 - g2);
            values[m + 2] = values[m] + step / 3.0 * (g0 + 4.0 * g1 + g2);
            m += 2;
        }
        if m + 1 == n {
            // Odd cell count: close the last cell with the mirrored rule.
            let (g0, g1, g2) = (samples[n - 2], samples[n - 1], samples[n]);
            values[n] = values[n - 1] + step / 12.0 * (-g0 + 8.0 * g1 + 5.0 * g2);
        }
        CumulativeGrid {
            step,
            values,
        }
    }

    pub(crate) fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    pub(crate) fn node_values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn step(&self) -> f64 {
        self.step
    }

    /// Interpolated value of the cumulative integral at `t ∈ [0, t_max]`.
    pub(crate) fn at(&self, t: f64) -> Result<f64> {
        interp_cubic_uniform(&self.values, self.step, t)
    }
}

/// 4-point Lagrange (cubic) interpolation on a uniform grid starting at 0.
pub(crate) fn interp_cubic_uniform(values: &[f64], step: f64, t: f64) -> Result<f64> {
    let n = values.len();
    debug_assert!(n >= 4);
    let t_max = (n - 1) as f64 * step;
    if !(0.0..=t_max * (1.0 + 1e-12) + 1e-300).contains(&t) {
        return Err(Error::range(format!(
            "t = {t} outside cached grid [0, {t_max}]"
        )));
    }
    let t = t.min(t_max);
    // Center the stencil on the cell containing t.
    let cell = ((t / step) as usize).min(n - 2);
    let i0 = cell.saturating_sub(1).min(n - 4);
    let u = t / step - i0 as f64; // in [0, 3]
    let mut acc = 0.0;
    for (k, &v) in values[i0..i0 + 4].iter().enumerate() {
        let mut w = 1.0;
        for j in 0..4 {
            if j != k {
                w *= (u - j as f64) / (k as f64 - j as f64);
            }
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Linear interpolation on an arbitrary strictly increasing grid.
pub(crate) fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> Result<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    let last = *xs.last().expect("non-empty grid");
    if x < xs[0] || x > last {
        return Err(Error::range(format!(
            "t = {x} outside grid [{}, {last}]",
            xs[0]
        )));
    }
    let idx = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => return Ok(ys[i]),
        Err(i) => i,
    };
    let (x0, x1) = (xs[idx - 1], xs[idx]);
    let w = (x - x0) / (x1 - x0);
    Ok(ys[idx - 1] * (1.0 - w) + ys[idx] * w)
}

/// Deterministic pairwise summation of `f(i)` for `i ∈ [lo, hi)`.
///
/// The reduction tree depends only on the index range, never on thread
/// count or evaluation order, so ensemble statistics are bit-reproducible.
pub(crate) fn pairwise_sum(lo: usize, hi: usize, f: &dyn Fn(usize) -> f64) -> f64 {
    let n = hi - lo;
    if n <= 16 {
        let mut acc = 0.0;
        for i in lo..hi {
            acc += f(i);
        }
        return acc;
    }
    let mid = lo + n / 2;
    pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f)
}
