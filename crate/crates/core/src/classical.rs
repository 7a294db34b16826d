//! Classical stochastic-trajectory counterpart: Euler–Maruyama ensembles
//! for `dy = E(t)dt + dW`, `dx = y dt` with `dW ~ Normal(0, 2D·dt)`.
//!
//! Sign convention: the quantum equation carries the potential `−E(t)x`,
//! so the force on the packet centre is `+E(t)`; the classical drift uses
//! the same sign so both routes describe the same motion. Noise leaves the
//! mean trajectory unchanged and pumps kinetic energy at the constant
//! rate D on top of the work done by the deterministic field.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::quad::pairwise_sum;
use crate::stochastic::NoiseSpec;

/// Position and velocity samples of `n` trajectories on a shared grid.
#[derive(Debug, Clone)]
pub struct ClassicalEnsemble {
    times: Vec<f64>,
    /// Trajectory-major: `x[i][j]` is trajectory i at `times[j]`.
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    dt: f64,
}

impl ClassicalEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn stat(&self, value: impl Fn(usize, usize) -> f64 + Sync) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let m = self.times.len();
        let mut mean = vec![0.0; m];
        let mut stderr = vec![0.0; m];
        for j in 0..m {
            let mu = pairwise_sum(0, n, &|i| value(i, j)) / n as f64;
            let ss = pairwise_sum(0, n, &|i| {
                let d = value(i, j) - mu;
                d * d
            });
            mean[j] = mu;
            stderr[j] = (ss / (n as f64 * (n - 1) as f64)).sqrt();
        }
        (mean, stderr)
    }

    /// Ensemble mean of x with standard errors.
    pub fn mean_x(&self) -> (Vec<f64>, Vec<f64>) {
        self.stat(|i, j| self.x[i][j])
    }

    /// Ensemble mean of y with standard errors.
    pub fn mean_y(&self) -> (Vec<f64>, Vec<f64>) {
        self.stat(|i, j| self.y[i][j])
    }

    /// Ensemble variance of y per time (biased n-divisor is fine at these n).
    pub fn var_y(&self) -> Vec<f64> {
        let n = self.n();
        let (mean, _) = self.mean_y();
        (0..self.times.len())
            .map(|j| {
                pairwise_sum(0, n, &|i| {
                    let d = self.y[i][j] - mean[j];
                    d * d
                }) / n as f64
            })
            .collect()
    }

    /// Ensemble mean of the kinetic energy `y²/2` with standard errors.
    pub fn mean_kinetic(&self) -> (Vec<f64>, Vec<f64>) {
        self.stat(|i, j| 0.5 * self.y[i][j] * self.y[i][j])
    }

    /// Per-trajectory central-difference rate of `y²/2`, averaged with
    /// standard errors; row j corresponds to interior time `times[j+1]`.
    pub fn kinetic_rate(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.times.len();
        assert!(m >= 3, "rate needs at least three samples");
        let rates: Vec<Vec<f64>> = self
            .y
            .iter()
            .map(|row| {
                (1..m - 1)
                    .map(|j| {
                        let h = self.times[j + 1] - self.times[j - 1];
                        (row[j + 1] * row[j + 1] - row[j - 1] * row[j - 1]) / (2.0 * h)
                    })
                    .collect()
            })
            .collect();
        let n = rates.len();
        let cols = m - 2;
        let mut mean = vec![0.0; cols];
        let mut stderr = vec![0.0; cols];
        for j in 0..cols {
            let mu = pairwise_sum(0, n, &|i| rates[i][j]) / n as f64;
            let ss = pairwise_sum(0, n, &|i| {
                let d = rates[i][j] - mu;
                d * d
            });
            mean[j] = mu;
            stderr[j] = (ss / (n as f64 * (n - 1) as f64)).sqrt();
        }
        let interior = self.times[1..m - 1].to_vec();
        (interior, mean, stderr)
    }
}

/// Euler–Maruyama simulation of `n` trajectories from x(0) = y(0) = 0,
/// recorded at `sample_times` (strictly increasing, starting after 0).
///
/// Trajectory i draws from ChaCha stream i of the seed, as in the quantum
/// Monte Carlo module.
pub fn simulate(
    field: &Field,
    spec: &NoiseSpec,
    sample_times: &[f64],
    n: usize,
) -> Result<ClassicalEnsemble> {
    if n < 1 {
        return Err(Error::usage("need at least one trajectory"));
    }
    if sample_times.is_empty() || sample_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::usage("sample times must be strictly increasing"));
    }
    if sample_times[0] < 0.0 {
        return Err(Error::domain("sample times must be nonnegative"));
    }
    let dt = spec.dt();
    let t_max = *sample_times.last().unwrap();
    let steps = ((t_max / dt - 1e-9).ceil() as usize).max(1);
    // Precompute the drift impulses once; they are shared by every
    // trajectory.
    let drift: Vec<f64> = (0..steps)
        .map(|i| field.field_at(i as f64 * dt).map(|e| e * dt))
        .collect::<Result<_>>()?;
    let sd = (2.0 * spec.intensity() * dt).sqrt();

    let paths: Vec<(Vec<f64>, Vec<f64>)> = (0..n as u64)
        .into_par_iter()
        .map(|traj| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed());
            rng.set_stream(traj);
            let mut xs = Vec::with_capacity(sample_times.len());
            let mut ys = Vec::with_capacity(sample_times.len());
            let mut x = 0.0f64;
            let mut y = 0.0f64;
            let mut next_sample = 0usize;
            let mut record = |t_node: f64, x: f64, y: f64, next: &mut usize| {
                while *next < sample_times.len() && sample_times[*next] <= t_node + 1e-12 {
                    xs.push(x);
                    ys.push(y);
                    *next += 1;
                }
            };
            record(0.0, x, y, &mut next_sample);
            for (i, &impulse) in drift.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut rng);
                x += y * dt;
                y += impulse + sd * z;
                record((i + 1) as f64 * dt, x, y, &mut next_sample);
            }
            // Grid roundoff may leave the last sample unrecorded.
            while xs.len() < sample_times.len() {
                xs.push(x);
                ys.push(y);
            }
            (xs, ys)
        })
        .collect();

    let (x, y) = paths.into_iter().unzip();
    Ok(ClassicalEnsemble {
        times: sample_times.to_vec(),
        x,
        y,
        dt,
    })
}

/// One row of the kinetic-energy budget comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRateRow {
    pub t: f64,
    pub empirical: f64,
    pub stderr: f64,
    /// `E(t)·⟨y(t)⟩ + D`
    pub theory: f64,
}

/// Energy-rate report of an ensemble against the Furutsu–Novikov budget.
#[derive(Debug, Clone)]
pub struct EnergyRateReport {
    pub rows: Vec<EnergyRateRow>,
    /// Largest |empirical − theory| in standard-error units.
    pub max_abs_z: f64,
    /// Least-squares slope of `⟨y²/2⟩ − f(t)²/2` against t: the noise
    /// pumping rate, which should equal D.
    pub fitted_pumping_rate: f64,
}

/// Compare the empirical kinetic-energy rate with `E·⟨y⟩ + D` per time,
/// and fit the noise-only pumping rate over the whole grid.
pub fn energy_rate_report(
    ensemble: &ClassicalEnsemble,
    field: &Field,
    d: f64,
) -> Result<EnergyRateReport> {
    if ensemble.n() < 100 {
        return Err(Error::usage("energy_rate_report needs n ≥ 100"));
    }
    let (mean_y, _) = ensemble.mean_y();
    let (interior, rate, rate_se) = ensemble.kinetic_rate();
    let mut rows = Vec::with_capacity(interior.len());
    let mut max_abs_z = 0.0f64;
    for (j, &t) in interior.iter().enumerate() {
        let theory = field.field_at(t)? * mean_y[j + 1] + d;
        let z = if rate_se[j] > 0.0 {
            (rate[j] - theory).abs() / rate_se[j]
        } else {
            0.0
        };
        max_abs_z = max_abs_z.max(z);
        rows.push(EnergyRateRow {
            t,
            empirical: rate[j],
            stderr: rate_se[j],
            theory,
        });
    }

    // Pumping-rate fit: subtract the deterministic kinetic energy f²/2 and
    // regress the remainder on t.
    let (kin, _) = ensemble.mean_kinetic();
    let mut pts = Vec::with_capacity(ensemble.times().len());
    for (j, &t) in ensemble.times().iter().enumerate() {
        let f = field.momentum_gain(t)?;
        pts.push((t, kin[j] - 0.5 * f * f));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let fitted_pumping_rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);

    Ok(EnergyRateReport {
        rows,
        max_abs_z,
        fitted_pumping_rate,
    })
}

/// One row of the quantum/classical centre comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosscheckRow {
    pub t: f64,
    pub classical_mean_x: f64,
    pub stderr: f64,
    /// Deterministic packet centre Φ(t), which the noise average leaves
    /// unchanged.
    pub quantum_centre: f64,
    pub within_tolerance: bool,
}

/// Report comparing the classical ensemble-mean trajectory with the
/// (noise-independent) quantum packet centre.
#[derive(Debug, Clone)]
pub struct CrosscheckReport {
    pub rows: Vec<CrosscheckRow>,
    pub all_within: bool,
}

/// Compare `⟨x(t)⟩` of a classical ensemble with Φ(t).
///
/// The tolerance at each time is `3·SE + 0.6·dt·|f(t)|`; the second term
/// bounds the left-endpoint Euler–Maruyama drift error of the position
/// Riemann sum.
pub fn quantum_classical_crosscheck(
    field: &Field,
    spec: &NoiseSpec,
    sample_times: &[f64],
    n: usize,
) -> Result<CrosscheckReport> {
    let ensemble = simulate(field, spec, sample_times, n)?;
    let (mean_x, se_x) = ensemble.mean_x();
    let mut rows = Vec::with_capacity(sample_times.len());
    let mut all_within = true;
    for (j, &t) in sample_times.iter().enumerate() {
        let phi = field.displacement(t)?;
        let tol = 3.0 * se_x[j] + 0.6 * ensemble.dt() * field.momentum_gain(t)?.abs() + 1e-12;
        let within = (mean_x[j] - phi).abs() <= tol;
        all_within &= within;
        rows.push(CrosscheckRow {
            t,
            classical_mean_x: mean_x[j],
            stderr: se_x[j],
            quantum_centre: phi,
            within_tolerance: within,
        });
    }
    Ok(CrosscheckReport { rows, all_within })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FieldModel;
    use approx::assert_abs_diff_eq;

    fn grid(t_max: f64, n: usize) -> Vec<f64> {
        (1..=n).map(|i| t_max * i as f64 / n as f64).collect()
    }

    #[test]
    fn deterministic_limit_matches_constant_field_solution() {
        let field = Field::prepare(FieldModel::Constant { amplitude: 0.3 }, 60.0).unwrap();
        let spec = NoiseSpec::new(0.0, 0.01, 1).unwrap();
        let times = grid(10.0, 20);
        let ens = simulate(&field, &spec, &times, 4).unwrap();
        let (mean_x, _) = ens.mean_x();
        let (mean_y, _) = ens.mean_y();
        for (j, &t) in times.iter().enumerate() {
            // y is exact for a constant drift; x carries the O(dt)
            // left-endpoint Riemann error ≤ E·t·dt/2.
            assert_abs_diff_eq!(mean_y[j], 0.3 * t, epsilon = 1e-12);
            let x_tol = 0.3 * t * 0.01 * 0.55 + 1e-12;
            assert_abs_diff_eq!(mean_x[j], 0.15 * t * t, epsilon = x_tol);
        }
    }

    #[test]
    fn mean_trajectory_unaffected_by_noise() {
        let field = Field::prepare(FieldModel::Constant { amplitude: 0.3 }, 60.0).unwrap();
        let times = grid(20.0, 20);
        let noisy = simulate(
            &field,
            &NoiseSpec::new(0.05, 0.05, 42).unwrap(),
            &times,
            10_000,
        )
        .unwrap();
        let quiet = simulate(&field, &NoiseSpec::new(0.0, 0.05, 42).unwrap(), &times, 4).unwrap();
        let (mx_noisy, se) = noisy.mean_x();
        let (mx_quiet, _) = quiet.mean_x();
        for j in 0..times.len() {
            assert!(
                (mx_noisy[j] - mx_quiet[j]).abs() <= 3.0 * se[j],
                "t = {}: |Δ⟨x⟩| = {} > 3·SE = {}",
                times[j],
                (mx_noisy[j] - mx_quiet[j]).abs(),
                3.0 * se[j]
            );
        }
    }

    #[test]
    fn velocity_variance_is_brownian() {
        let field = Field::prepare(FieldModel::Zero, 60.0).unwrap();
        let spec = NoiseSpec::new(0.05, 0.05, 7).unwrap();
        let times = grid(20.0, 10);
        let ens = simulate(&field, &spec, &times, 10_000).unwrap();
        let var = ens.var_y();
        for (j, &t) in times.iter().enumerate() {
            let theory = 2.0 * 0.05 * t;
            let se = theory * (2.0 / ens.n() as f64).sqrt();
            assert_abs_diff_eq!(var[j], theory, epsilon = 3.5 * se);
        }
    }

    #[test]
    fn zero_field_kinetic_energy_grows_at_rate_d() {
        let field = Field::prepare(FieldModel::Zero, 60.0).unwrap();
        let spec = NoiseSpec::new(0.05, 0.05, 11).unwrap();
        let times = grid(50.0, 50);
        let ens = simulate(&field, &spec, &times, 10_000).unwrap();
        let report = energy_rate_report(&ens, &field, 0.05).unwrap();
        assert!(
            (report.fitted_pumping_rate / 0.05 - 1.0).abs() < 0.05,
            "fitted rate {}",
            report.fitted_pumping_rate
        );
        // Pointwise, the central-difference rate has to agree with the
        // constant theory rate within statistics.
        assert!(report.max_abs_z < 4.0, "max z = {}", report.max_abs_z);
    }

    #[test]
    fn noiseless_rate_is_field_work_only() {
        let field = Field::prepare(FieldModel::Constant { amplitude: 0.3 }, 60.0).unwrap();
        let spec = NoiseSpec::new(0.0, 0.01, 3).unwrap();
        let times = grid(10.0, 40);
        let ens = simulate(&field, &spec, &times, 200).unwrap();
        let report = energy_rate_report(&ens, &field, 0.0).unwrap();
        for row in &report.rows {
            // Central differences of the exact deterministic solution: the
            // discrepancy is O(dt) from the EM velocity lattice, far below
            // the theory scale here.
            assert_abs_diff_eq!(row.empirical, row.theory, epsilon = 2e-2 * row.theory.abs().max(0.01));
        }
    }

    #[test]
    fn constant_field_rate_budget_with_noise() {
        let field = Field::prepare(FieldModel::Constant { amplitude: 0.3 }, 60.0).unwrap();
        let spec = NoiseSpec::new(0.01, 0.05, 19).unwrap();
        let times = grid(20.0, 20);
        let ens = simulate(&field, &spec, &times, 10_000).unwrap();
        let report = energy_rate_report(&ens, &field, 0.01).unwrap();
        // Theory rate = 0.3·(0.3t) + 0.01.
        assert!(report.max_abs_z < 4.0, "max z = {}", report.max_abs_z);
    }

    #[test]
    fn crosscheck_centres_agree_for_all_fields() {
        let spec = NoiseSpec::new(0.05, 0.05, 23).unwrap();
        let times = grid(20.0, 20);
        for model in [
            FieldModel::Zero,
            FieldModel::Constant { amplitude: 0.3 },
            FieldModel::FemtoPulse {
                amplitude: 0.1,
                omega: 0.114,
            },
        ] {
            let field = Field::prepare(model, 30.0).unwrap();
            let report = quantum_classical_crosscheck(&field, &spec, &times, 4000).unwrap();
            assert!(report.all_within, "centres diverged: {:?}", report.rows.iter().find(|r| !r.within_tolerance));
        }
    }

    #[test]
    fn ensemble_reproducible_across_thread_counts() {
        let field = Field::prepare(FieldModel::Constant { amplitude: 0.3 }, 30.0).unwrap();
        let spec = NoiseSpec::new(0.02, 0.05, 5).unwrap();
        let times = grid(10.0, 10);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| simulate(&field, &spec, &times, 500).unwrap().mean_x())
        };
        assert_eq!(run(1), run(8));
    }

    #[test]
    fn halving_dt_leaves_rates_within_statistics() {
        let field = Field::prepare(FieldModel::Zero, 60.0).unwrap();
        let times = grid(20.0, 20);
        let coarse = simulate(
            &field,
            &NoiseSpec::new(0.05, 0.05, 31).unwrap(),
            &times,
            4000,
        )
        .unwrap();
        let fine = simulate(
            &field,
            &NoiseSpec::new(0.05, 0.025, 31).unwrap(),
            &times,
            4000,
        )
        .unwrap();
        let ra = energy_rate_report(&coarse, &field, 0.05).unwrap();
        let rb = energy_rate_report(&fine, &field, 0.05).unwrap();
        for (a, b) in ra.rows.iter().zip(rb.rows.iter()) {
            let combined = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            assert!(
                (a.empirical - b.empirical).abs() <= 3.5 * combined,
                "t = {}: rates {} vs {}",
                a.t,
                a.empirical,
                b.empirical
            );
        }
    }

    #[test]
    fn argument_validation() {
        let field = Field::prepare(FieldModel::Zero, 10.0).unwrap();
        let spec = NoiseSpec::new(0.05, 0.05, 0).unwrap();
        assert!(simulate(&field, &spec, &[1.0, 0.5], 10).is_err());
        assert!(simulate(&field, &spec, &[1.0], 0).is_err());
        let times = grid(5.0, 10);
        let small = simulate(&field, &spec, &times, 10).unwrap();
        assert!(energy_rate_report(&small, &field, 0.05).is_err());
    }
}
