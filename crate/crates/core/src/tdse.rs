//! Split-operator spectral integration of the dimensionless Schrödinger
//! equation `i ∂ψ/∂t = −(1/2)∂²ψ/∂x² − E(t)xψ` and direct flux
//! extraction `j = Im(ψ*ψₓ)`.
//!
//! One step is Strang-split: a half potential phase `exp(+i·E·x·dt/2)`
//! (the potential is −E·x, hence the plus sign), a full kinetic factor
//! `exp(−i·k²·dt/2)` applied in Fourier space, and the second half phase.
//! The driving field is evaluated once per step at the midpoint
//! `t + dt/2`, which keeps the scheme second order for time-dependent
//! fields. Both factors are unit modulus, so the evolution is unitary to
//! rounding.
//!
//! The spatial representation is periodic. A run is trustworthy while the
//! amplitude at the domain edges stays negligible; the propagator tracks
//! the largest edge amplitude seen and can optionally fail the run when
//! it crosses a threshold.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::analytic::{FluxSeries, PacketSpec};
use crate::error::{Error, Result};
use crate::fields::Field;
use crate::quad::interp_cubic_uniform;

/// Spatial discretization and time step of a propagation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    pub dt: f64,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n: usize, dt: f64) -> Result<Self> {
        if !(x_max > x_min) {
            return Err(Error::usage(format!(
                "grid needs x_max > x_min, got [{x_min}, {x_max}]"
            )));
        }
        if n < 256 || !n.is_power_of_two() {
            return Err(Error::usage(format!(
                "grid size must be a power of two ≥ 256, got {n}"
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::usage(format!("time step must be positive, got {dt}")));
        }
        Ok(GridSpec { x_min, x_max, n, dt })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n as f64
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Grid nodes; the right endpoint is the periodic wrap, not a node.
    pub fn xs(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n).map(|j| self.x_min + j as f64 * dx).collect()
    }

    /// Pick a domain that keeps the packet centre ± 10 widths at least 50
    /// units away from both edges for the whole run, and a resolution
    /// whose momentum cutoff clears the field-driven momentum with margin.
    pub fn suggest(field: &Field, packet: &PacketSpec, t_max: f64, dt: f64) -> Result<Self> {
        let sigma = packet.sigma();
        let scan = 512;
        let mut phi_lo = 0.0f64;
        let mut phi_hi = 0.0f64;
        let mut f_abs = 0.0f64;
        for i in 0..=scan {
            let t = t_max * i as f64 / scan as f64;
            let phi = field.displacement(t)?;
            let width = (sigma * sigma + t * t / (sigma * sigma)).sqrt();
            phi_lo = phi_lo.min(phi - 10.0 * width);
            phi_hi = phi_hi.max(phi + 10.0 * width);
            f_abs = f_abs.max(field.momentum_gain(t)?.abs());
        }
        let x_min = phi_lo - 50.0;
        let x_max = phi_hi + 50.0;
        let k_need = f_abs + 6.0 / sigma + packet.k0().abs();
        let dx_max = PI / (1.5 * k_need.max(1.0));
        let mut n = ((x_max - x_min) / dx_max).ceil() as usize;
        n = n.next_power_of_two().clamp(1024, 1 << 21);
        GridSpec::new(x_min, x_max, n, dt)
    }
}

/// Complex wavefunction samples on a grid at time `t`.
#[derive(Debug, Clone)]
pub struct WaveState {
    grid: GridSpec,
    values: Vec<Complex64>,
    t: f64,
}

impl WaveState {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Discrete norm `Σ|ψ|²·Δx`.
    pub fn norm(&self) -> f64 {
        let dx = self.grid.dx();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
    }

    /// Largest amplitude on the two domain edges.
    pub fn boundary_amplitude(&self) -> f64 {
        self.values[0]
            .norm()
            .max(self.values[self.values.len() - 1].norm())
    }
}

/// Normalized Gaussian packet `(σ√π)^(−1/2)·exp(−x²/2σ²)` at t = 0.
pub fn init_gaussian(grid: &GridSpec, packet: &PacketSpec) -> Result<WaveState> {
    let sigma = packet.sigma();
    if grid.x_min > -8.0 * sigma || grid.x_max < 8.0 * sigma {
        return Err(Error::usage(format!(
            "grid [{}, {}] too narrow for a packet of width {sigma}; need ±8σ",
            grid.x_min, grid.x_max
        )));
    }
    let amp = (sigma * PI.sqrt()).sqrt().recip();
    let mut values: Vec<Complex64> = grid
        .xs()
        .iter()
        .map(|&x| Complex64::new(amp * (-x * x / (2.0 * sigma * sigma)).exp(), 0.0))
        .collect();
    let norm: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.dx();
    let scale = norm.sqrt().recip();
    for v in &mut values {
        *v *= scale;
    }
    Ok(WaveState {
        grid: *grid,
        values,
        t: 0.0,
    })
}

/// Expectation values of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observables {
    pub norm: f64,
    pub x_mean: f64,
    pub k_mean: f64,
    /// `⟨k²⟩/2`
    pub kinetic: f64,
}

/// What to do with the edge-amplitude diagnostic during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCheck {
    /// Record the maximum edge amplitude, never fail.
    Monitor,
    /// Fail the run as a numerical error once the edge amplitude exceeds
    /// the threshold.
    Enforce(f64),
}

/// Result of a sampled propagation run.
#[derive(Debug, Clone)]
pub struct FluxRun {
    pub series: FluxSeries,
    pub final_norm: f64,
    pub max_boundary_amplitude: f64,
}

/// Owns the FFT plans and phase tables for one grid.
///
/// A propagator and the state it evolves belong to one run at a time;
/// independent runs build their own (construction is cheap next to
/// propagation).
pub struct Propagator {
    grid: GridSpec,
    xs: Vec<f64>,
    ks: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    /// Kinetic factor for the standard step, with the 1/n inverse-FFT
    /// normalization folded in.
    kinetic_phase: Vec<Complex64>,
    half_potential: Vec<Complex64>,
    spectral: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.n);
        let ifft = planner.plan_fft_inverse(grid.n);
        let dk = 2.0 * PI / grid.length();
        let n = grid.n;
        let ks: Vec<f64> = (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
                m * dk
            })
            .collect();
        let inv_n = 1.0 / n as f64;
        let kinetic_phase: Vec<Complex64> = ks
            .iter()
            .map(|&k| Complex64::from_polar(inv_n, -0.5 * k * k * grid.dt))
            .collect();
        let scratch_len = fft
            .get_inplace_scratch_len()
            .max(ifft.get_inplace_scratch_len());
        Propagator {
            grid,
            xs: grid.xs(),
            ks,
            fft,
            ifft,
            kinetic_phase,
            half_potential: vec![Complex64::new(0.0, 0.0); n],
            spectral: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn check_state(&self, state: &WaveState) -> Result<()> {
        if state.grid != self.grid {
            return Err(Error::usage(
                "state grid does not match the propagator grid",
            ));
        }
        Ok(())
    }

    /// Advance the state by one standard step, reading the field at the
    /// step midpoint.
    pub fn step<F: Fn(f64) -> f64>(&mut self, state: &mut WaveState, field: &F) -> Result<()> {
        let dt = self.grid.dt;
        self.step_with(state, field, dt, true)?;
        Ok(())
    }

    /// Advance by an arbitrary `dt` (used for landing exactly on sample
    /// times); phase tables for non-standard steps are built on the fly.
    pub fn step_by<F: Fn(f64) -> f64>(
        &mut self,
        state: &mut WaveState,
        field: &F,
        dt: f64,
    ) -> Result<()> {
        self.step_with(state, field, dt, false)
    }

    fn step_with<F: Fn(f64) -> f64>(
        &mut self,
        state: &mut WaveState,
        field: &F,
        dt: f64,
        standard: bool,
    ) -> Result<()> {
        self.check_state(state)?;
        let e_mid = field(state.t + 0.5 * dt);
        if !e_mid.is_finite() {
            return Err(Error::numerical(format!(
                "field evaluated to {e_mid} at t = {}",
                state.t + 0.5 * dt
            )));
        }
        // Potential −E·x gives the phase exp(+i·E·x·dt/2) per half step.
        let c = 0.5 * e_mid * dt;
        for (p, &x) in self.half_potential.iter_mut().zip(self.xs.iter()) {
            *p = Complex64::from_polar(1.0, c * x);
        }
        for (v, p) in state.values.iter_mut().zip(self.half_potential.iter()) {
            *v *= p;
        }
        self.fft
            .process_with_scratch(&mut state.values, &mut self.scratch);
        if standard {
            for (v, k) in state.values.iter_mut().zip(self.kinetic_phase.iter()) {
                *v *= k;
            }
        } else {
            let inv_n = 1.0 / self.grid.n as f64;
            for (v, &k) in state.values.iter_mut().zip(self.ks.iter()) {
                *v *= Complex64::from_polar(inv_n, -0.5 * k * k * dt);
            }
        }
        self.ifft
            .process_with_scratch(&mut state.values, &mut self.scratch);
        for (v, p) in state.values.iter_mut().zip(self.half_potential.iter()) {
            *v *= p;
        }
        state.t += dt;
        Ok(())
    }

    /// Advance the state to `t_target` with standard steps plus one short
    /// landing step.
    pub fn evolve_to<F: Fn(f64) -> f64>(
        &mut self,
        state: &mut WaveState,
        field: &F,
        t_target: f64,
    ) -> Result<()> {
        self.check_state(state)?;
        if t_target < state.t - 1e-12 {
            return Err(Error::usage(format!(
                "cannot evolve backwards from {} to {t_target}",
                state.t
            )));
        }
        let dt = self.grid.dt;
        let remaining = t_target - state.t;
        let full_steps = (remaining / dt + 1e-9).floor() as u64;
        let t0 = state.t;
        for i in 0..full_steps {
            // Anchor the clock to the step index so 10⁵ steps do not
            // accumulate addition drift.
            state.t = t0 + i as f64 * dt;
            self.step(state, field)?;
        }
        state.t = t0 + full_steps as f64 * dt;
        let rest = t_target - state.t;
        if rest > 1e-12 {
            self.step_by(state, field, rest)?;
        }
        state.t = t_target;
        Ok(())
    }

    /// Spectral spatial derivative of ψ into the internal buffer, then
    /// `j(x) = Im(ψ* ψₓ)` interpolated cubically at `x_obs`.
    pub fn flux_at(&mut self, state: &WaveState, x_obs: f64) -> Result<f64> {
        self.check_state(state)?;
        let dx = self.grid.dx();
        let last_node = self.grid.x_max - dx;
        if x_obs < self.grid.x_min || x_obs > last_node {
            return Err(Error::range(format!(
                "x_obs = {x_obs} outside grid nodes [{}, {last_node}]",
                self.grid.x_min
            )));
        }
        self.spectral.copy_from_slice(&state.values);
        self.fft
            .process_with_scratch(&mut self.spectral, &mut self.scratch);
        let inv_n = 1.0 / self.grid.n as f64;
        for (v, &k) in self.spectral.iter_mut().zip(self.ks.iter()) {
            *v *= Complex64::new(0.0, k * inv_n);
        }
        self.ifft
            .process_with_scratch(&mut self.spectral, &mut self.scratch);
        let flux: Vec<f64> = state
            .values
            .iter()
            .zip(self.spectral.iter())
            .map(|(psi, dpsi)| (psi.conj() * dpsi).im)
            .collect();
        interp_cubic_uniform(&flux, dx, x_obs - self.grid.x_min)
    }

    /// Norm and the first spatial/spectral moments.
    pub fn observables(&mut self, state: &WaveState) -> Result<Observables> {
        self.check_state(state)?;
        let dx = self.grid.dx();
        let mut norm = 0.0;
        let mut x_mean = 0.0;
        for (v, &x) in state.values.iter().zip(self.xs.iter()) {
            let w = v.norm_sqr();
            norm += w;
            x_mean += w * x;
        }
        x_mean /= norm;
        norm *= dx;

        self.spectral.copy_from_slice(&state.values);
        self.fft
            .process_with_scratch(&mut self.spectral, &mut self.scratch);
        let mut k_norm = 0.0;
        let mut k_mean = 0.0;
        let mut k_sq = 0.0;
        for (v, &k) in self.spectral.iter().zip(self.ks.iter()) {
            let w = v.norm_sqr();
            k_norm += w;
            k_mean += w * k;
            k_sq += w * k * k;
        }
        Ok(Observables {
            norm,
            x_mean,
            k_mean: k_mean / k_norm,
            kinetic: 0.5 * k_sq / k_norm,
        })
    }

    /// Evolve from the state's current time, sampling the flux at `x_obs`
    /// at each requested time.
    pub fn flux_series<F: Fn(f64) -> f64>(
        &mut self,
        state: &mut WaveState,
        field: &F,
        sample_times: &[f64],
        x_obs: f64,
        boundary: BoundaryCheck,
    ) -> Result<FluxRun> {
        if sample_times.is_empty() {
            return Err(Error::usage("no sample times given"));
        }
        let mut values = Vec::with_capacity(sample_times.len());
        let mut max_edge = state.boundary_amplitude();
        for &t in sample_times {
            self.evolve_to(state, field, t)?;
            let edge = state.boundary_amplitude();
            max_edge = max_edge.max(edge);
            if let BoundaryCheck::Enforce(threshold) = boundary {
                if edge > threshold {
                    return Err(Error::numerical(format!(
                        "edge amplitude {edge:.3e} exceeded {threshold:.3e} at t = {t}; \
                         the periodic domain no longer contains the packet"
                    )));
                }
            }
            values.push(self.flux_at(state, x_obs)?);
        }
        let series = FluxSeries::new(x_obs, sample_times.to_vec(), values)?;
        Ok(FluxRun {
            series,
            final_norm: state.norm(),
            max_boundary_amplitude: max_edge,
        })
    }

    /// Rows `(x, Re ψ, Im ψ, |ψ|², j)` for a snapshot dump.
    pub fn snapshot(&mut self, state: &WaveState) -> Result<Vec<[f64; 5]>> {
        self.check_state(state)?;
        self.spectral.copy_from_slice(&state.values);
        self.fft
            .process_with_scratch(&mut self.spectral, &mut self.scratch);
        let inv_n = 1.0 / self.grid.n as f64;
        for (v, &k) in self.spectral.iter_mut().zip(self.ks.iter()) {
            *v *= Complex64::new(0.0, k * inv_n);
        }
        self.ifft
            .process_with_scratch(&mut self.spectral, &mut self.scratch);
        Ok(state
            .values
            .iter()
            .zip(self.spectral.iter())
            .zip(self.xs.iter())
            .map(|((psi, dpsi), &x)| {
                [x, psi.re, psi.im, psi.norm_sqr(), (psi.conj() * dpsi).im]
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::gaussian_flux;
    use crate::fields::FieldModel;
    use crate::stochastic::{sample_path, realization_flux, NoiseSpec};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn packet() -> PacketSpec {
        PacketSpec::new(1.0).unwrap()
    }

    fn free_grid(dt: f64) -> GridSpec {
        GridSpec::new(-40.0, 40.0, 512, dt).unwrap()
    }

    /// Exact free evolution of the σ-width packet:
    /// ψ(x,t) = π^(−1/4)·√(σ/(σ²+it))·exp(−x²/(2(σ²+it))).
    fn exact_free(x: f64, t: f64, sigma: f64) -> Complex64 {
        let denom = Complex64::new(sigma * sigma, t);
        let pref = (Complex64::new(sigma, 0.0) / denom).sqrt() * PI.powf(-0.25);
        pref * (-x * x / (2.0 * denom)).exp()
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(1.0, -1.0, 512, 0.01).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 300, 0.01).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 128, 0.01).is_err());
        assert!(GridSpec::new(-1.0, 1.0, 512, 0.0).is_err());
    }

    #[test]
    fn init_gaussian_amplitude_norm_and_moments() {
        let grid = free_grid(1e-3);
        let state = init_gaussian(&grid, &packet()).unwrap();
        // x = 0 is node n/2 for a symmetric domain.
        let mid = state.values()[grid.n / 2];
        assert_relative_eq!(mid.re, PI.powf(-0.25), max_relative = 1e-12);
        assert_abs_diff_eq!(mid.im, 0.0);
        assert_abs_diff_eq!(state.norm(), 1.0, epsilon = 1e-12);
        let mut prop = Propagator::new(grid);
        let obs = prop.observables(&state).unwrap();
        assert_abs_diff_eq!(obs.x_mean, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(obs.k_mean, 0.0, epsilon = 1e-12);
        assert_relative_eq!(obs.kinetic, 0.25, max_relative = 1e-10);
    }

    #[test]
    fn init_gaussian_rejects_narrow_grid() {
        let grid = GridSpec::new(-5.0, 5.0, 256, 1e-3).unwrap();
        assert!(init_gaussian(&grid, &packet()).is_err());
    }

    #[test]
    fn free_packet_matches_exact_dispersion() {
        let grid = free_grid(1e-3);
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        let field = |_: f64| 0.0;
        prop.evolve_to(&mut state, &field, 5.0).unwrap();
        let dx = grid.dx();
        let mut err_sq = 0.0;
        for (v, x) in state.values().iter().zip(grid.xs()) {
            err_sq += (v - exact_free(x, 5.0, 1.0)).norm_sqr() * dx;
        }
        assert!(err_sq.sqrt() < 1e-8, "L² error {}", err_sq.sqrt());
        // Density width: σ² + t²/σ² = 26 at t = 5.
        let obs = prop.observables(&state).unwrap();
        assert_abs_diff_eq!(obs.norm, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(obs.x_mean, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn norm_stays_unit_over_many_steps() {
        let grid = free_grid(1e-3);
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        let field = |t: f64| 0.05 * (0.5 * t).sin();
        for _ in 0..10_000 {
            prop.step(&mut state, &field).unwrap();
        }
        assert_abs_diff_eq!(state.norm(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn ehrenfest_constant_field() {
        let grid = GridSpec::new(-80.0, 100.0, 2048, 1e-3).unwrap();
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        let field = |_: f64| 0.3;
        prop.evolve_to(&mut state, &field, 10.0).unwrap();
        let obs = prop.observables(&state).unwrap();
        // ⟨x⟩ = Φ(10) = 0.15·100, ⟨k⟩ = f(10) = 3.
        assert_abs_diff_eq!(obs.x_mean, 15.0, epsilon = 1e-6);
        assert_abs_diff_eq!(obs.k_mean, 3.0, epsilon = 1e-8);
    }

    #[test]
    fn ehrenfest_pulse_field() {
        let model = FieldModel::FemtoPulse {
            amplitude: 0.1,
            omega: 0.114,
        };
        let field = Field::prepare(model, 20.0).unwrap();
        let grid = free_grid(1e-3);
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        let supplier = field.supplier();
        prop.evolve_to(&mut state, &supplier, 10.0).unwrap();
        let obs = prop.observables(&state).unwrap();
        assert_abs_diff_eq!(obs.x_mean, field.displacement(10.0).unwrap(), epsilon = 1e-6);
        assert_abs_diff_eq!(obs.k_mean, field.momentum_gain(10.0).unwrap(), epsilon = 1e-6);
    }

    #[test]
    fn flux_vanishes_for_real_initial_state_and_at_symmetry_point() {
        let grid = free_grid(1e-3);
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        assert!(prop.flux_at(&state, 3.7).unwrap().abs() < 1e-12);
        let field = |_: f64| 0.0;
        prop.evolve_to(&mut state, &field, 3.0).unwrap();
        assert!(prop.flux_at(&state, 0.0).unwrap().abs() < 1e-10);
        assert!(prop.flux_at(&state, 60.0).is_err());
    }

    #[test]
    fn strang_splitting_is_second_order() {
        // With a time-dependent field the midpoint sampling of E(t) leaves
        // an O(dt²) error; halving dt must cut it by ≈4.
        let model = FieldModel::FemtoPulse {
            amplitude: 0.1,
            omega: 0.114,
        };
        let field = Field::prepare(model, 40.0).unwrap();
        let supplier = field.supplier();
        let run = |dt: f64| {
            let grid = GridSpec::new(-40.0, 40.0, 512, dt).unwrap();
            let mut prop = Propagator::new(grid);
            let mut state = init_gaussian(&grid, &packet()).unwrap();
            prop.evolve_to(&mut state, &supplier, 20.0).unwrap();
            state
        };
        // dt small enough that no grid mode is stroboscopically resonant
        // (k²·dt/2 < π at the grid cutoff); larger steps excite the usual
        // split-step resonance artifacts and break clean scaling.
        let reference = run(0.00125);
        let err = |state: &WaveState| {
            let dx = state.grid().dx();
            state
                .values()
                .iter()
                .zip(reference.values())
                .map(|(a, b)| (a - b).norm_sqr() * dx)
                .sum::<f64>()
                .sqrt()
        };
        let e1 = err(&run(0.01));
        let e2 = err(&run(0.005));
        let ratio = e1 / e2;
        assert!(
            (3.0..5.5).contains(&ratio),
            "expected ≈4x error reduction, got {ratio} (e1 = {e1}, e2 = {e2})"
        );
    }

    #[test]
    fn constant_field_flux_tracks_analytic_form() {
        // Shortened version of the oracle comparison (full run lives in the
        // acceptance suite).
        let model = FieldModel::Constant { amplitude: 0.3 };
        let field = Field::prepare(model, 40.0).unwrap();
        let grid = GridSpec::new(-150.0, 250.0, 4096, 5e-3).unwrap();
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        let supplier = field.supplier();
        let times: Vec<f64> = (1..=60).map(|i| i as f64 * 0.5).collect();
        let run = prop
            .flux_series(&mut state, &supplier, &times, 20.0, BoundaryCheck::Monitor)
            .unwrap();
        let mut max_err = 0.0f64;
        for (i, &t) in times.iter().enumerate() {
            let exact = gaussian_flux(20.0, t, &packet(), &field).unwrap();
            max_err = max_err.max((run.series.values()[i] - exact).abs());
        }
        assert!(max_err < 1e-3, "max |j_tdse − j_analytic| = {max_err}");
        assert_abs_diff_eq!(run.final_norm, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn noise_driven_run_reproduces_realization_flux() {
        // The grid solver driven by E(t) + η̂(t) (piecewise-constant path
        // increments) must agree with the closed form evaluated on the
        // same path.
        let model = FieldModel::Constant { amplitude: 0.3 };
        let field = Field::prepare(model, 40.0).unwrap();
        let spec = NoiseSpec::new(0.01, 0.05, 42).unwrap();
        let path = sample_path(&spec, 30.0, 0).unwrap();
        let grid = GridSpec::new(-150.0, 350.0, 4096, 5e-3).unwrap();
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        let det = field.supplier();
        let noisy = |t: f64| det(t) + path.noise_rate_at(t).unwrap();
        let times: Vec<f64> = (1..=30).map(|i| i as f64).collect();
        let run = prop
            .flux_series(&mut state, &noisy, &times, 20.0, BoundaryCheck::Monitor)
            .unwrap();
        let closed = realization_flux(20.0, &times, &packet(), &field, &path).unwrap();
        for i in 0..times.len() {
            assert_abs_diff_eq!(
                run.series.values()[i],
                closed.values()[i],
                epsilon = 1e-2
            );
        }
    }

    #[test]
    fn boundary_enforcement_trips_when_packet_escapes() {
        let model = FieldModel::Constant { amplitude: 0.3 };
        let field = Field::prepare(model, 200.0).unwrap();
        // Domain far too small: the packet reaches the right edge quickly.
        let grid = GridSpec::new(-20.0, 30.0, 512, 5e-3).unwrap();
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        let supplier = field.supplier();
        let times: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let err = prop
            .flux_series(
                &mut state,
                &supplier,
                &times,
                5.0,
                BoundaryCheck::Enforce(1e-12),
            )
            .unwrap_err();
        assert!(matches!(err, Error::Numerical(_)), "got {err:?}");
    }

    #[test]
    fn suggested_grid_contains_drive_and_passes_enforcement() {
        let model = FieldModel::FemtoPulse {
            amplitude: 0.1,
            omega: 0.114,
        };
        let field = Field::prepare(model, 60.0).unwrap();
        let grid = GridSpec::suggest(&field, &packet(), 50.0, 5e-3).unwrap();
        let mut prop = Propagator::new(grid);
        let mut state = init_gaussian(&grid, &packet()).unwrap();
        let supplier = field.supplier();
        let times: Vec<f64> = (1..=10).map(|i| i as f64 * 5.0).collect();
        let run = prop
            .flux_series(
                &mut state,
                &supplier,
                &times,
                20.0,
                BoundaryCheck::Enforce(1e-12),
            )
            .unwrap();
        assert!(run.max_boundary_amplitude < 1e-12);
    }
}

