//! Deterministic electric-field models, their first and second time
//! integrals, and conversion between physical and dimensionless units.
//!
//! Every model exposes the driving field `E(t)`, the momentum gained from
//! it `f(t) = ∫₀ᵗ E`, the corresponding displacement `Φ(t) = ∫₀ᵗ f`, and
//! `∫₀ᵗ f²` (needed by the momentum-space phase). Smooth models cache the
//! integrals on a dense grid at construction so later queries are pure
//! reads; a prepared [`Field`] is therefore safe to share across threads.

use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quad::{simpson_to_tolerance, CumulativeGrid};

/// Relative tolerance used by the quadrature cross-checks.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Node spacing of the dense integral caches, in dimensionless time.
pub const CACHE_STEP: f64 = 1e-3;

/// Physical constants of the unit framework a [`UnitSystem`] lives in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant.
    pub hbar: f64,
    /// Particle mass.
    pub mass: f64,
    /// Elementary charge.
    pub charge: f64,
}

impl PhysicalConstants {
    /// Hartree atomic units: ħ = mₑ = e = 1.
    pub fn atomic() -> Self {
        PhysicalConstants {
            hbar: 1.0,
            mass: 1.0,
            charge: 1.0,
        }
    }

    /// SI values (CODATA 2018) for an electron.
    pub fn si_electron() -> Self {
        PhysicalConstants {
            hbar: 1.054_571_817e-34,
            mass: 9.109_383_7015e-31,
            charge: 1.602_176_634e-19,
        }
    }
}

/// Length/time/field scales that map physical quantities onto the
/// dimensionless equations of motion.
///
/// There is a single free parameter: choosing the length scale `x0` fixes
/// `tau0 = m·x0²/ħ` (so that `x0²/tau0 = ħ/m` holds by construction) and
/// the field scale `e0 = ħ/(q·x0·tau0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitSystem {
    x0: f64,
    tau0: f64,
    e0: f64,
}

/// The quantity kinds [`UnitSystem::convert`] understands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Length,
    Time,
    Field,
    Flux,
}

/// Conversion direction for [`UnitSystem::convert`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToDimensionless,
    ToPhysical,
}

impl UnitSystem {
    /// Build the unit system from a length scale expressed in the given
    /// constant framework.
    pub fn from_length(x0: f64, constants: PhysicalConstants) -> Result<Self> {
        if !(x0 > 0.0) || !x0.is_finite() {
            return Err(Error::usage(format!("length scale must be positive, got {x0}")));
        }
        let tau0 = constants.mass * x0 * x0 / constants.hbar;
        let e0 = constants.hbar / (constants.charge * x0 * tau0);
        Ok(UnitSystem { x0, tau0, e0 })
    }

    /// The default system: Hartree atomic units with x0 = 1 a.u.
    pub fn hartree_atomic() -> Self {
        UnitSystem {
            x0: 1.0,
            tau0: 1.0,
            e0: 1.0,
        }
    }

    pub fn length_scale(&self) -> f64 {
        self.x0
    }

    pub fn time_scale(&self) -> f64 {
        self.tau0
    }

    pub fn field_scale(&self) -> f64 {
        self.e0
    }

    /// Scale factor that multiplies a dimensionless value to give the
    /// physical one.
    ///
    /// Flux here is a 1D probability current (probability per unit time),
    /// so its physical scale is `1/tau0`: the spatial normalisation of
    /// |ψ|² absorbs one power of `x0`, leaving `j_phys = j_dimless / tau0`.
    fn physical_scale(&self, kind: Quantity) -> f64 {
        match kind {
            Quantity::Length => self.x0,
            Quantity::Time => self.tau0,
            Quantity::Field => self.e0,
            Quantity::Flux => 1.0 / self.tau0,
        }
    }

    pub fn convert(&self, kind: Quantity, value: f64, direction: Direction) -> f64 {
        let scale = self.physical_scale(kind);
        match direction {
            Direction::ToPhysical => value * scale,
            Direction::ToDimensionless => value / scale,
        }
    }
}

/// A deterministic driving field `E(t)` in dimensionless units.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    /// No field.
    Zero,
    /// A constant field of the given dimensionless amplitude.
    Constant { amplitude: f64 },
    /// An ultrashort pulse `E₀·exp(−5(ωt/2π − 1)⁴)·sin(ωt)`.
    FemtoPulse { amplitude: f64, omega: f64 },
    /// Samples on a strictly increasing grid starting at t = 0, evaluated
    /// with linear interpolation.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl FieldModel {
    /// Short tag used by config files and output columns.
    pub fn tag(&self) -> &'static str {
        match self {
            FieldModel::Zero => "zero",
            FieldModel::Constant { .. } => "constant",
            FieldModel::FemtoPulse { .. } => "femto",
            FieldModel::Tabulated { .. } => "tabulated",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            FieldModel::Zero => Ok(()),
            FieldModel::Constant { amplitude } => {
                if amplitude.is_finite() {
                    Ok(())
                } else {
                    Err(Error::usage("constant field amplitude must be finite"))
                }
            }
            FieldModel::FemtoPulse { amplitude, omega } => {
                if !amplitude.is_finite() {
                    return Err(Error::usage("pulse amplitude must be finite"));
                }
                if !(*omega > 0.0) {
                    return Err(Error::usage(format!(
                        "pulse frequency must be positive, got {omega}"
                    )));
                }
                Ok(())
            }
            FieldModel::Tabulated { times, values } => {
                if times.len() != values.len() {
                    return Err(Error::usage("tabulated grid and values differ in length"));
                }
                if times.len() < 2 {
                    return Err(Error::usage("tabulated field needs at least two samples"));
                }
                if times[0] != 0.0 {
                    return Err(Error::usage(format!(
                        "tabulated grid must start at t = 0, got {}",
                        times[0]
                    )));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::usage("tabulated grid must be strictly increasing"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::usage("tabulated field values must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Load a tabulated model from a two-column text file: time and field
    /// per line, whitespace-separated, `#` starts a comment.
    pub fn tabulated_from_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line?;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut cols = body.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.ok_or_else(|| {
                    Error::usage(format!(
                        "{}:{}: expected two columns (time, field)",
                        path.display(),
                        lineno + 1
                    ))
                })?
                .parse::<f64>()
                .map_err(|_| {
                    Error::usage(format!(
                        "{}:{}: not a number in (time, field) pair",
                        path.display(),
                        lineno + 1
                    ))
                })
            };
            times.push(parse(cols.next())?);
            values.push(parse(cols.next())?);
            if cols.next().is_some() {
                return Err(Error::usage(format!(
                    "{}:{}: more than two columns",
                    path.display(),
                    lineno + 1
                )));
            }
        }
        let model = FieldModel::Tabulated { times, values };
        model.validate()?;
        Ok(model)
    }
}

fn femto_value(amplitude: f64, omega: f64, t: f64) -> f64 {
    let u = omega * t / (2.0 * std::f64::consts::PI) - 1.0;
    amplitude * (-5.0 * u.powi(4)).exp() * (omega * t).sin()
}

#[derive(Debug, Clone)]
enum Repr {
    /// Zero or constant field: every integral is closed-form.
    Closed { amplitude: f64 },
    /// Smooth field with dense cumulative caches up to a horizon.
    Cached {
        f: CumulativeGrid,
        phi: CumulativeGrid,
        f_sq: CumulativeGrid,
    },
    /// Piecewise-linear field with exact per-cell integrals.
    Tabulated(TabulatedRepr),
}

#[derive(Debug, Clone)]
struct TabulatedRepr {
    times: Vec<f64>,
    values: Vec<f64>,
    /// f(tᵢ), exact for the linear interpolant (trapezoid on the native grid).
    f_nodes: Vec<f64>,
    /// Φ(tᵢ), exact per-cell integration of the piecewise-quadratic f.
    phi_nodes: Vec<f64>,
    /// ∫₀^{tᵢ} f², exact via 3-point Gauss on each cell.
    f_sq_nodes: Vec<f64>,
}

/// 3-point Gauss-Legendre quadrature on [a, b]; exact through degree 5.
fn gauss3(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let r = (3.0f64 / 5.0).sqrt();
    h * (5.0 * g(c - h * r) + 8.0 * g(c) + 5.0 * g(c + h * r)) / 9.0
}

impl TabulatedRepr {
    fn build(times: &[f64], values: &[f64]) -> Self {
        let n = times.len();
        let mut f_nodes = vec![0.0; n];
        let mut phi_nodes = vec![0.0; n];
        let mut f_sq_nodes = vec![0.0; n];
        for i in 0..n - 1 {
            let dt = times[i + 1] - times[i];
            let (e0, e1) = (values[i], values[i + 1]);
            f_nodes[i + 1] = f_nodes[i] + 0.5 * (e0 + e1) * dt;
            phi_nodes[i + 1] =
                phi_nodes[i] + f_nodes[i] * dt + e0 * dt * dt / 2.0 + (e1 - e0) * dt * dt / 6.0;
            let (fi, ti) = (f_nodes[i], times[i]);
            let f_local = move |s: f64| {
                let u = s - ti;
                let f = fi + e0 * u + (e1 - e0) * u * u / (2.0 * dt);
                f * f
            };
            f_sq_nodes[i + 1] = f_sq_nodes[i] + gauss3(f_local, times[i], times[i + 1]);
        }
        TabulatedRepr {
            times: times.to_vec(),
            values: values.to_vec(),
            f_nodes,
            phi_nodes,
            f_sq_nodes,
        }
    }

    /// Index of the cell containing `t`, with `t` already range-checked.
    fn cell(&self, t: f64) -> usize {
        match self
            .times
            .binary_search_by(|v| v.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.times.len() - 2),
            Err(i) => i - 1,
        }
    }

    fn check_range(&self, t: f64) -> Result<()> {
        let last = *self.times.last().unwrap();
        if t > last {
            return Err(Error::range(format!(
                "t = {t} beyond the last tabulated node {last}"
            )));
        }
        Ok(())
    }

    fn field_at(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        let i = self.cell(t);
        let dt = self.times[i + 1] - self.times[i];
        let w = (t - self.times[i]) / dt;
        Ok(self.values[i] * (1.0 - w) + self.values[i + 1] * w)
    }

    fn momentum_gain(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        let i = self.cell(t);
        let u = t - self.times[i];
        let dt = self.times[i + 1] - self.times[i];
        let (e0, e1) = (self.values[i], self.values[i + 1]);
        Ok(self.f_nodes[i] + e0 * u + (e1 - e0) * u * u / (2.0 * dt))
    }

    fn displacement(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        let i = self.cell(t);
        let u = t - self.times[i];
        let dt = self.times[i + 1] - self.times[i];
        let (e0, e1) = (self.values[i], self.values[i + 1]);
        Ok(self.phi_nodes[i]
            + self.f_nodes[i] * u
            + e0 * u * u / 2.0
            + (e1 - e0) * u * u * u / (6.0 * dt))
    }

    fn momentum_sq_integral(&self, t: f64) -> Result<f64> {
        self.check_range(t)?;
        let i = self.cell(t);
        let dt = self.times[i + 1] - self.times[i];
        let (e0, e1) = (self.values[i], self.values[i + 1]);
        let (fi, ti) = (self.f_nodes[i], self.times[i]);
        let f_local = move |s: f64| {
            let u = s - ti;
            let f = fi + e0 * u + (e1 - e0) * u * u / (2.0 * dt);
            f * f
        };
        Ok(self.f_sq_nodes[i] + gauss3(f_local, self.times[i], t))
    }
}

/// A [`FieldModel`] prepared for evaluation: integral caches are built
/// eagerly at construction, after which every query is a pure read.
#[derive(Debug, Clone)]
pub struct Field {
    model: FieldModel,
    repr: Repr,
    horizon: Option<f64>,
}

impl Field {
    /// Validate the model and build its integral caches.
    ///
    /// `t_horizon` bounds the time range later queries may use; it is
    /// ignored by closed-form models and capped by the grid of tabulated
    /// ones.
    pub fn prepare(model: FieldModel, t_horizon: f64) -> Result<Self> {
        model.validate()?;
        if !(t_horizon > 0.0) || !t_horizon.is_finite() {
            return Err(Error::usage(format!(
                "field horizon must be positive and finite, got {t_horizon}"
            )));
        }
        let (repr, horizon) = match &model {
            FieldModel::Zero => (Repr::Closed { amplitude: 0.0 }, None),
            FieldModel::Constant { amplitude } => (Repr::Closed { amplitude: *amplitude }, None),
            FieldModel::FemtoPulse { amplitude, omega } => {
                let (a, w) = (*amplitude, *omega);
                let e = move |t: f64| femto_value(a, w, t);
                let f = CumulativeGrid::build(&e, t_horizon, CACHE_STEP);
                let f_vals = f.node_values().to_vec();
                let phi = CumulativeGrid::from_samples(&f_vals, f.step());
                let sq: Vec<f64> = f_vals.iter().map(|v| v * v).collect();
                let f_sq = CumulativeGrid::from_samples(&sq, f.step());
                let horizon = f.t_max();
                (Repr::Cached { f, phi, f_sq }, Some(horizon))
            }
            FieldModel::Tabulated { times, values } => {
                let repr = TabulatedRepr::build(times, values);
                let horizon = *times.last().unwrap();
                (Repr::Tabulated(repr), Some(horizon))
            }
        };
        Ok(Field {
            model,
            repr,
            horizon,
        })
    }

    pub fn model(&self) -> &FieldModel {
        &self.model
    }

    /// Largest time the prepared caches cover; `None` when every t ≥ 0 is
    /// valid (closed-form models).
    pub fn horizon(&self) -> Option<f64> {
        self.horizon
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::domain(format!("time must be nonnegative, got {t}")));
        }
        Ok(())
    }

    /// The driving field `E(t)`.
    pub fn field_at(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        match &self.repr {
            Repr::Closed { amplitude } => Ok(*amplitude),
            Repr::Cached { .. } => {
                let FieldModel::FemtoPulse { amplitude, omega } = self.model else {
                    unreachable!()
                };
                if let Some(h) = self.horizon {
                    if t > h {
                        return Err(Error::range(format!(
                            "t = {t} beyond prepared horizon {h}"
                        )));
                    }
                }
                Ok(femto_value(amplitude, omega, t))
            }
            Repr::Tabulated(tab) => tab.field_at(t),
        }
    }

    /// Momentum gained from the field, `f(t) = ∫₀ᵗ E`.
    pub fn momentum_gain(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        match &self.repr {
            Repr::Closed { amplitude } => Ok(amplitude * t),
            Repr::Cached { f, .. } => f.at(t),
            Repr::Tabulated(tab) => tab.momentum_gain(t),
        }
    }

    /// Displacement driven by the field, `Φ(t) = ∫₀ᵗ f`.
    pub fn displacement(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        match &self.repr {
            Repr::Closed { amplitude } => Ok(amplitude * t * t / 2.0),
            Repr::Cached { phi, .. } => phi.at(t),
            Repr::Tabulated(tab) => tab.displacement(t),
        }
    }

    /// `∫₀ᵗ f(t')² dt'`, the quadratic part of the momentum-space phase.
    pub fn momentum_sq_integral(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        match &self.repr {
            Repr::Closed { amplitude } => Ok(amplitude * amplitude * t * t * t / 3.0),
            Repr::Cached { f_sq, .. } => f_sq.at(t),
            Repr::Tabulated(tab) => tab.momentum_sq_integral(t),
        }
    }

    /// Upper bound on |E(t)|.
    pub fn max_abs_field(&self) -> f64 {
        match &self.model {
            FieldModel::Zero => 0.0,
            FieldModel::Constant { amplitude } => amplitude.abs(),
            FieldModel::FemtoPulse { amplitude, .. } => amplitude.abs(),
            FieldModel::Tabulated { values, .. } => {
                values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
            }
        }
    }

    /// Infallible field supplier for propagation loops.
    ///
    /// The caller must have checked that the whole propagation window lies
    /// within [`Field::horizon`].
    pub fn supplier(&self) -> impl Fn(f64) -> f64 + '_ {
        move |t| {
            self.field_at(t)
                .expect("field queried outside its prepared horizon")
        }
    }

    /// Cross-check a closed-form or cached integral against direct
    /// quadrature of the field; used by the validation suite.
    pub fn quadrature_check(&self, t: f64) -> Result<f64> {
        let e = |s: f64| self.field_at(s).unwrap_or(0.0);
        simpson_to_tolerance(&e, 0.0, t, QUAD_REL_TOL)
    }
}
