//! Gaussian white-noise realizations and Monte Carlo flux averaging.
//!
//! White noise η(t) is never represented pointwise; the flux closed form
//! consumes only its integrals, so a realization is the pair of sampled
//! paths `f̃(t) = ∫₀ᵗ η` (Brownian, increment variance 2D·dt) and
//! `Φ̃(t) = ∫₀ᵗ f̃` (integrated Brownian). Path `i` of an ensemble draws
//! from ChaCha stream `i` of the run seed, so ensembles fan out across
//! threads without shared state, and every reduction walks a fixed
//! pairwise tree — results are bit-reproducible for a given seed
//! regardless of worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::analytic::{flux_from_integrals, FluxSeries, PacketSpec};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::quad::{interp_linear, pairwise_sum};

/// Noise intensity, path resolution, and the reproducibility seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    d: f64,
    dt: f64,
    seed: u64,
}

impl NoiseSpec {
    pub fn new(d: f64, dt: f64, seed: u64) -> Result<Self> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::usage(format!("noise intensity must be ≥ 0, got {d}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::usage(format!("path time step must be > 0, got {dt}")));
        }
        Ok(NoiseSpec { d, dt, seed })
    }

    pub fn intensity(&self) -> f64 {
        self.d
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_intensity(mut self, d: f64) -> Result<Self> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::usage(format!("noise intensity must be ≥ 0, got {d}")));
        }
        self.d = d;
        Ok(self)
    }
}

/// How `Φ̃` is advanced along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathSampling {
    /// Trapezoidal cumulative integration of the sampled `f̃`.
    #[default]
    Trapezoid,
    /// Joint sampling of the Brownian and integrated-Brownian increments
    /// from their exact 2×2 covariance
    /// (`Var[Δf̃] = 2D·dt`, `Var[ΔΦ̃] = 2D·dt³/3`, `Cov = D·dt²`).
    ExactIncrements,
}

/// One sampled realization of `(f̃, Φ̃)` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    times: Vec<f64>,
    f_tilde: Vec<f64>,
    phi_tilde: Vec<f64>,
}

impl NoisePath {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn f_tilde(&self) -> &[f64] {
        &self.f_tilde
    }

    pub fn phi_tilde(&self) -> &[f64] {
        &self.phi_tilde
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Stochastic momentum `f̃(t)`, linearly interpolated between nodes.
    pub fn f_at(&self, t: f64) -> Result<f64> {
        interp_linear(&self.times, &self.f_tilde, t)
    }

    /// Stochastic displacement `Φ̃(t)`, linearly interpolated between nodes.
    pub fn phi_at(&self, t: f64) -> Result<f64> {
        interp_linear(&self.times, &self.phi_tilde, t)
    }

    /// Piecewise-constant noise field `η̂(t) = Δf̃/Δt` on the path cells;
    /// this is the field a grid solver is driven with to reproduce the
    /// realization.
    pub fn noise_rate_at(&self, t: f64) -> Result<f64> {
        let last = self.t_max();
        if t < 0.0 || t > last {
            return Err(Error::range(format!("t = {t} outside path range [0, {last}]")));
        }
        let dt = self.times[1] - self.times[0];
        let cell = ((t / dt) as usize).min(self.times.len() - 2);
        Ok((self.f_tilde[cell + 1] - self.f_tilde[cell]) / dt)
    }
}

/// Sample path `index` of the ensemble defined by `spec`, covering at
/// least `[0, t_max]`, with the default (trapezoid) integration of `Φ̃`.
///
/// Identical `(seed, index)` gives a bit-identical path.
pub fn sample_path(spec: &NoiseSpec, t_max: f64, index: u64) -> Result<NoisePath> {
    sample_path_mode(spec, t_max, index, PathSampling::Trapezoid)
}

/// [`sample_path`] with an explicit `Φ̃` sampling mode.
pub fn sample_path_mode(
    spec: &NoiseSpec,
    t_max: f64,
    index: u64,
    mode: PathSampling,
) -> Result<NoisePath> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::usage(format!("t_max must be positive, got {t_max}")));
    }
    let dt = spec.dt;
    let steps = ((t_max / dt - 1e-9).ceil() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index);

    let mut times = Vec::with_capacity(steps + 1);
    let mut f_tilde = Vec::with_capacity(steps + 1);
    let mut phi_tilde = Vec::with_capacity(steps + 1);
    times.push(0.0);
    f_tilde.push(0.0);
    phi_tilde.push(0.0);

    let sd_f = (2.0 * spec.d * dt).sqrt();
    match mode {
        PathSampling::Trapezoid => {
            for i in 0..steps {
                let z: f64 = StandardNormal.sample(&mut rng);
                let f_prev = f_tilde[i];
                let f_next = f_prev + sd_f * z;
                f_tilde.push(f_next);
                phi_tilde.push(phi_tilde[i] + 0.5 * (f_prev + f_next) * dt);
                times.push((i + 1) as f64 * dt);
            }
        }
        PathSampling::ExactIncrements => {
            // Conditional decomposition of (Δf̃, ∫ increment of Φ̃):
            // Cov/sd_f = √(D/2)·dt^{3/2}, residual variance D·dt³/6.
            let c_proj = (0.5 * spec.d).sqrt() * dt * dt.sqrt();
            let c_resid = (spec.d * dt * dt * dt / 6.0).sqrt();
            for i in 0..steps {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let f_prev = f_tilde[i];
                f_tilde.push(f_prev + sd_f * z1);
                let integral = f_prev * dt + c_proj * z1 + c_resid * z2;
                phi_tilde.push(phi_tilde[i] + integral);
                times.push((i + 1) as f64 * dt);
            }
        }
    }
    Ok(NoisePath {
        times,
        f_tilde,
        phi_tilde,
    })
}

/// The flux of a single noise realization: the deterministic closed form
/// with `f → f₀ + f̃`, `Φ → Φ₀ + Φ̃`.
pub fn realization_flux(
    x_obs: f64,
    t_grid: &[f64],
    packet: &PacketSpec,
    field: &Field,
    path: &NoisePath,
) -> Result<FluxSeries> {
    let values = t_grid
        .iter()
        .map(|&t| {
            let f = field.momentum_gain(t)? + path.f_at(t)?;
            let phi = field.displacement(t)? + path.phi_at(t)?;
            Ok(flux_from_integrals(x_obs, t, packet.sigma(), f, phi))
        })
        .collect::<Result<Vec<_>>>()?;
    FluxSeries::new(x_obs, t_grid.to_vec(), values)
}

/// Per-time-sample ensemble mean and standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: usize,
}

/// Column-wise mean and standard error over path-major rows, reduced with
/// the deterministic pairwise tree.
pub(crate) fn column_stats(rows: &[Vec<f64>]) -> EnsembleStats {
    let n = rows.len();
    assert!(n >= 2, "ensemble statistics need at least two rows");
    let m = rows[0].len();
    let inv_n = 1.0 / n as f64;
    let mut mean = vec![0.0; m];
    let mut stderr = vec![0.0; m];
    for j in 0..m {
        let mu = pairwise_sum(0, n, &|i| rows[i][j]) * inv_n;
        let ss = pairwise_sum(0, n, &|i| {
            let d = rows[i][j] - mu;
            d * d
        });
        mean[j] = mu;
        stderr[j] = (ss / (n as f64 * (n - 1) as f64)).sqrt();
    }
    EnsembleStats { mean, stderr, n }
}

/// Monte Carlo estimate of the noise-averaged flux over `n_paths`
/// independent realizations, with per-sample standard errors.
pub fn ensemble_flux(
    x_obs: f64,
    t_grid: &[f64],
    packet: &PacketSpec,
    field: &Field,
    spec: &NoiseSpec,
    n_paths: usize,
) -> Result<FluxSeries> {
    ensemble_flux_mode(x_obs, t_grid, packet, field, spec, n_paths, PathSampling::Trapezoid)
}

/// [`ensemble_flux`] with an explicit path-sampling mode.
pub fn ensemble_flux_mode(
    x_obs: f64,
    t_grid: &[f64],
    packet: &PacketSpec,
    field: &Field,
    spec: &NoiseSpec,
    n_paths: usize,
    mode: PathSampling,
) -> Result<FluxSeries> {
    if n_paths < 2 {
        return Err(Error::usage("ensemble_flux needs n_paths ≥ 2"));
    }
    if t_grid.is_empty() {
        return Err(Error::usage("empty time grid"));
    }
    let t_max = *t_grid.last().unwrap();
    // Deterministic integrals are shared by every realization.
    let f0: Vec<f64> = t_grid
        .iter()
        .map(|&t| field.momentum_gain(t))
        .collect::<Result<_>>()?;
    let phi0: Vec<f64> = t_grid
        .iter()
        .map(|&t| field.displacement(t))
        .collect::<Result<_>>()?;
    let sigma = packet.sigma();

    let rows: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let path = sample_path_mode(spec, t_max, i, mode)?;
            t_grid
                .iter()
                .enumerate()
                .map(|(j, &t)| {
                    let f = f0[j] + path.f_at(t)?;
                    let phi = phi0[j] + path.phi_at(t)?;
                    Ok(flux_from_integrals(x_obs, t, sigma, f, phi))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let stats = column_stats(&rows);
    FluxSeries::new(x_obs, t_grid.to_vec(), stats.mean)?.with_stderr(stats.stderr)
}

/// One empirical two-time moment `⟨f̃(t₁)f̃(t₂)⟩` next to its theory value.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMomentRow {
    pub t1: f64,
    pub t2: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `2D·min(t₁, t₂)`
    pub theory: f64,
}

/// One empirical `⟨Φ̃²(t)⟩` next to its theory value.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSqRow {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `2D·t³/3`
    pub theory: f64,
}

/// One empirical `⟨Φ̃(t)f̃(t)⟩` next to both candidate coefficients; the
/// ensemble adjudicates between them.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiFRow {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `D·t²` — the direct integral of the covariance.
    pub theory_direct: f64,
    /// `2D·t²` — the candidate matching `d⟨Φ̃²⟩/dt`.
    pub theory_double: f64,
}

/// Empirical covariance structure of an ensemble against theory.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub n_paths: usize,
    pub ff: Vec<PairMomentRow>,
    pub phi_sq: Vec<PhiSqRow>,
    pub phi_f: Vec<PhiFRow>,
    /// Fitted log-log slope of Var[Φ̃(t)] over the slope grid (theory: 3).
    pub var_phi_slope: f64,
}

/// Estimate the noise-path covariance structure over `n_paths`
/// realizations at the given probe times.
pub fn covariance_report(
    spec: &NoiseSpec,
    t_max: f64,
    n_paths: usize,
    probe_times: &[f64],
    mode: PathSampling,
) -> Result<CovarianceReport> {
    if n_paths < 100 {
        return Err(Error::usage("covariance_report needs n_paths ≥ 100"));
    }
    if probe_times.is_empty() {
        return Err(Error::usage("covariance_report needs probe times"));
    }
    if probe_times.iter().any(|&t| t <= 0.0 || t > t_max) {
        return Err(Error::range("probe times must lie in (0, t_max]".to_string()));
    }
    let p = probe_times.len();
    // Log-spaced grid for the Var[Φ̃] growth-exponent fit.
    let slope_points = 12;
    let (slope_lo, slope_hi) = (1.0_f64.min(t_max / 4.0), t_max.min(50.0));
    let slope_times: Vec<f64> = (0..slope_points)
        .map(|i| {
            slope_lo * (slope_hi / slope_lo).powf(i as f64 / (slope_points - 1) as f64)
        })
        .collect();

    // Per path: f̃ and Φ̃ at probes, then every product the report needs.
    let rows: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>> {
            let path = sample_path_mode(spec, t_max, i, mode)?;
            let f: Vec<f64> = probe_times
                .iter()
                .map(|&t| path.f_at(t))
                .collect::<Result<_>>()?;
            let phi: Vec<f64> = probe_times
                .iter()
                .map(|&t| path.phi_at(t))
                .collect::<Result<_>>()?;
            let mut row = Vec::with_capacity(p * p + 2 * p + slope_points);
            for a in 0..p {
                for b in 0..p {
                    row.push(f[a] * f[b]);
                }
            }
            for a in 0..p {
                row.push(phi[a] * phi[a]);
            }
            for a in 0..p {
                row.push(phi[a] * f[a]);
            }
            for &t in &slope_times {
                let v = path.phi_at(t)?;
                row.push(v * v);
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let stats = column_stats(&rows);
    let d = spec.d;
    let mut ff = Vec::with_capacity(p * p);
    for a in 0..p {
        for b in 0..p {
            let idx = a * p + b;
            ff.push(PairMomentRow {
                t1: probe_times[a],
                t2: probe_times[b],
                estimate: stats.mean[idx],
                stderr: stats.stderr[idx],
                theory: 2.0 * d * probe_times[a].min(probe_times[b]),
            });
        }
    }
    let phi_sq: Vec<PhiSqRow> = (0..p)
        .map(|a| {
            let idx = p * p + a;
            let t = probe_times[a];
            PhiSqRow {
                t,
                estimate: stats.mean[idx],
                stderr: stats.stderr[idx],
                theory: 2.0 * d * t * t * t / 3.0,
            }
        })
        .collect();
    let phi_f: Vec<PhiFRow> = (0..p)
        .map(|a| {
            let idx = p * p + p + a;
            let t = probe_times[a];
            PhiFRow {
                t,
                estimate: stats.mean[idx],
                stderr: stats.stderr[idx],
                theory_direct: d * t * t,
                theory_double: 2.0 * d * t * t,
            }
        })
        .collect();

    // Least-squares slope of ln Var[Φ̃] against ln t.
    let base = p * p + 2 * p;
    let var_phi_slope = if d > 0.0 {
        let pts: Vec<(f64, f64)> = slope_times
            .iter()
            .enumerate()
            .map(|(i, &t)| (t.ln(), stats.mean[base + i].ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        (n * sxy - sx * sy) / (n * sxx - sx * sx)
    } else {
        f64::NAN
    };

    Ok(CovarianceReport {
        n_paths,
        ff,
        phi_sq,
        phi_f,
        var_phi_slope,
    })
}
