//! Outer functions `O_h = exp(u_h + i v_h)` built from boundary modulus data.
//!
//! `u_h` and `v_h` are discrete Poisson and conjugate-Poisson integrals of
//! `log h` over a uniform grid, normalized so that `v_h(0) = 0`. Evaluation is
//! refused closer to the circle than four grid spacings, where the Poisson
//! kernel is no longer resolved.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::boundary::{check_log_integrability, BoundaryError, BoundaryFunction, LogIntegrability};
use crate::quadrature::{
    chord, circular_convolve, fourier_coefficients, pairwise_sum, pairwise_sum_complex, QuadratureError,
    UniformAngularGrid,
};

/// Points must satisfy `1 - |z| ≥ CLEARANCE_SPACINGS · 2π/N`.
pub const CLEARANCE_SPACINGS: f64 = 4.0;

/// Largest tolerated `ρ^{-n}` when dividing out the extraction radius.
const MAX_AMPLIFICATION: f64 = 1e10;
/// Coefficients below this fraction of the largest one are treated as noise.
const NOISE_FRACTION: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum OuterError {
    #[error("|z| = {modulus} is too close to the circle for {n} log-grid nodes; need at least {required_n}")]
    Clearance { modulus: f64, n: usize, required_n: usize },
    #[error("log h is not integrable: {0}")]
    NotLogIntegrable(String),
    #[error("h vanishes at the base angle {0}")]
    ZeroAtBase(f64),
    #[error("extraction radius {0} outside the admissible range")]
    Radius(f64),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Smallest power-of-two grid whose clearance rule admits `1 - |z| = gap`.
pub fn required_grid_size(gap: f64) -> usize {
    let n = (CLEARANCE_SPACINGS * 2.0 * PI / gap).ceil().max(8.0);
    if n > (1u64 << 52) as f64 {
        usize::MAX
    } else {
        (n as usize).next_power_of_two()
    }
}

/// The kernel `Q(e^{iφ}, z)` with `∂v_h/∂θ (z) = (1/2π)∫ Q(e^{iφ}, z) log h(φ) dφ`.
pub fn kernel_q(phi: f64, z: Complex64) -> f64 {
    let r = z.norm();
    let theta = z.arg();
    let c2 = chord(theta, phi).powi(2);
    let d2 = (Complex64::from_polar(1.0, phi) - z).norm_sqr();
    r * (2.0 * (1.0 - r).powi(2) - c2 * (1.0 + r * r)) / (d2 * d2)
}

fn herglotz(phi: f64, z: Complex64) -> Complex64 {
    let w = Complex64::from_polar(1.0, phi);
    (w + z) / (w - z)
}

/// Values of `O_h` and its ingredients on a full circle `|z| = ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleSamples {
    pub radius: f64,
    /// Angular nodes of the samples.
    pub grid: UniformAngularGrid,
    /// `u_h + i v_h`.
    pub log_outer: Vec<Complex64>,
    /// `∂v_h/∂θ`.
    pub dv_dtheta: Vec<f64>,
}

impl CircleSamples {
    pub fn outer(&self) -> Vec<Complex64> {
        self.log_outer.iter().map(|g| g.exp()).collect()
    }

    /// Every `stride`-th sample starting at `start`, as `(angles, O_h values)`.
    pub fn subsample(&self, start: usize, stride: usize) -> (Vec<f64>, Vec<Complex64>) {
        (start..self.grid.len())
            .step_by(stride)
            .map(|j| (self.grid.node(j), self.log_outer[j].exp()))
            .unzip()
    }
}

/// Evaluator of `u_h`, `v_h`, `O_h` and `∂v_h/∂θ` inside the disk.
#[derive(Debug, Clone)]
pub struct OuterFunction {
    h: BoundaryFunction,
    grid: UniformAngularGrid,
    log_h: Vec<f64>,
    mean_log: f64,
}

impl OuterFunction {
    /// Samples `log h` on `n_log` half-offset nodes. `n_log` must be a power
    /// of two.
    pub fn new(h: &BoundaryFunction, n_log: usize) -> Result<Self, OuterError> {
        let grid = UniformAngularGrid::with_offset(n_log, 0.5)?;
        let report = check_log_integrability(h)?;
        if report.status == LogIntegrability::Fail {
            let at = report
                .zero_arc
                .map(|(a, b)| format!("h vanishes on [{a}, {b}]"))
                .unwrap_or_else(|| "integral of log h diverges".into());
            return Err(OuterError::NotLogIntegrable(at));
        }
        let mut log_h = Vec::with_capacity(n_log);
        for (j, t) in grid.nodes().into_iter().enumerate() {
            let v = h.log_eval(t);
            if !v.is_finite() {
                return Err(QuadratureError::NonFiniteSample { index: j, theta: t, value: v }.into());
            }
            log_h.push(v);
        }
        let mean_log = pairwise_sum(&log_h) / n_log as f64;
        Ok(Self {
            h: h.clone(),
            grid,
            log_h,
            mean_log,
        })
    }

    pub fn boundary(&self) -> &BoundaryFunction {
        &self.h
    }

    pub fn grid(&self) -> &UniformAngularGrid {
        &self.grid
    }

    pub fn log_samples(&self) -> &[f64] {
        &self.log_h
    }

    /// Smallest admissible `1 - |z|`.
    pub fn min_clearance(&self) -> f64 {
        CLEARANCE_SPACINGS * self.grid.spacing()
    }

    /// Largest admissible radius.
    pub fn max_radius(&self) -> f64 {
        1.0 - self.min_clearance()
    }

    fn check_clearance(&self, modulus: f64) -> Result<(), OuterError> {
        // tiny relative slack so that radii computed as 1 - k·spacing are accepted
        if 1.0 - modulus < self.min_clearance() * (1.0 - 1e-12) {
            return Err(OuterError::Clearance {
                modulus,
                n: self.grid.len(),
                required_n: required_grid_size(1.0 - modulus),
            });
        }
        Ok(())
    }

    /// `u_h(z) + i v_h(z)`.
    pub fn log_outer(&self, z: Complex64) -> Result<Complex64, OuterError> {
        self.check_clearance(z.norm())?;
        if z.norm() == 0.0 {
            return Ok(Complex64::new(self.mean_log, 0.0));
        }
        let terms: Vec<Complex64> = self
            .log_h
            .iter()
            .enumerate()
            .map(|(j, l)| herglotz(self.grid.node(j), z) * l)
            .collect();
        Ok(pairwise_sum_complex(&terms) / self.grid.len() as f64)
    }

    pub fn poisson_log(&self, z: Complex64) -> Result<f64, OuterError> {
        Ok(self.log_outer(z)?.re)
    }

    pub fn conjugate_log(&self, z: Complex64) -> Result<f64, OuterError> {
        Ok(self.log_outer(z)?.im)
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64, OuterError> {
        Ok(self.log_outer(z)?.exp())
    }

    /// `|O_h(0)| = exp(mean of log h)`.
    pub fn value_at_origin(&self) -> f64 {
        self.mean_log.exp()
    }

    /// `∂v_h/∂θ` at `z = re^{iθ}`, written as `(1/N) Σ_j Q_j (log h(φ_j) - log h(θ))`.
    pub fn dv_dtheta(&self, z: Complex64) -> Result<f64, OuterError> {
        self.check_clearance(z.norm())?;
        if z.norm() == 0.0 {
            return Ok(0.0);
        }
        let theta = z.arg();
        let base = self.h.log_eval(theta);
        if !base.is_finite() {
            return Err(OuterError::ZeroAtBase(theta));
        }
        let terms: Vec<f64> = self
            .log_h
            .iter()
            .enumerate()
            .map(|(j, l)| kernel_q(self.grid.node(j), z) * (l - base))
            .collect();
        Ok(pairwise_sum(&terms) / self.grid.len() as f64)
    }

    /// `u_h + i v_h` and `∂v_h/∂θ` on the circle `|z| = ρ` at the nodes of the
    /// log grid shifted by `offset` spacings, via FFT convolution.
    pub fn circle(&self, radius: f64, offset: f64) -> Result<CircleSamples, OuterError> {
        if !(0.0..1.0).contains(&radius) {
            return Err(OuterError::Radius(radius));
        }
        self.check_clearance(radius)?;
        let n = self.grid.len();
        let eval_grid = UniformAngularGrid::with_offset(n, offset)?;
        // φ_j - θ_m = (j - m + s_φ - s_θ)Δ; store the kernel at index (m - j) mod n
        let ds = self.grid.offset() - eval_grid.offset();
        let spacing = self.grid.spacing();
        let mut herg = vec![Complex64::new(0.0, 0.0); n];
        let mut q = vec![Complex64::new(0.0, 0.0); n];
        for d in 0..n {
            let diff = (-(d as f64) + ds) * spacing;
            let z = Complex64::new(radius, 0.0);
            herg[d] = herglotz(diff, z);
            q[d] = Complex64::new(kernel_q(diff, z), 0.0);
        }
        let q_mass = pairwise_sum(&q.iter().map(|c| c.re).collect::<Vec<_>>());
        let logs: Vec<Complex64> = self.log_h.iter().map(|&l| Complex64::new(l, 0.0)).collect();
        let scale = 1.0 / n as f64;
        let log_outer: Vec<Complex64> = circular_convolve(&logs, &herg).into_iter().map(|c| c * scale).collect();
        let qconv = circular_convolve(&logs, &q);
        let mut dv = Vec::with_capacity(n);
        for (m, c) in qconv.iter().enumerate() {
            let theta = eval_grid.node(m);
            let base = self.h.log_eval(theta);
            // ∫Q = 0; subtracting log h(θ)·ΣQ removes the discrete residual of
            // that cancellation when h(θ) is available
            let correction = if base.is_finite() { base * q_mass } else { 0.0 };
            dv.push((c.re - correction) * scale);
        }
        Ok(CircleSamples {
            radius,
            grid: eval_grid,
            log_outer,
            dv_dtheta: dv,
        })
    }

    /// Taylor coefficients `f̂(0..=n_max)` from samples on `|z| = ρ`.
    ///
    /// The index range is capped where `ρ^{-n}` would exceed `1e10` or the
    /// Nyquist limit of the log grid; `capped` records that.
    pub fn taylor_coefficients(&self, n_max: usize, radius: f64) -> Result<TaylorSeries, OuterError> {
        if !(radius > 0.0 && radius <= self.max_radius()) {
            return Err(OuterError::Radius(radius));
        }
        let raw = self.circle_coefficients(radius)?;
        let cap = reliable_range(radius).min(self.grid.len() / 2 - 1);
        let n_eff = n_max.min(cap);
        if n_eff < n_max {
            log::warn!("taylor extraction at radius {radius}: n_max {n_max} capped to {n_eff}");
        }
        let coeffs: Vec<Complex64> = (0..=n_eff).map(|k| raw[k] / radius.powi(k as i32)).collect();
        Ok(TaylorSeries {
            truncation_error: tail_estimate(&coeffs),
            coefficients: coeffs,
            radius: Some(radius),
            capped: n_eff < n_max,
        })
    }

    /// Taylor coefficients up to `n_max`, each taken from the smallest radius
    /// of the ladder `0.5, 0.75, 0.9, 0.97, ρ_max` at which it is both above
    /// the noise floor and inside the reliable amplification range.
    pub fn taylor_series(&self, n_max: usize) -> Result<TaylorSeries, OuterError> {
        let rho_max = self.max_radius();
        let mut ladder: Vec<f64> = [0.5, 0.75, 0.9, 0.97].into_iter().filter(|&r| r < rho_max).collect();
        ladder.push(rho_max);
        let n_eff = n_max.min(self.grid.len() / 2 - 1);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n_eff + 1];
        let mut assigned = vec![false; n_eff + 1];
        let mut used_radius = ladder[0];
        for &rho in &ladder {
            let raw = self.circle_coefficients(rho)?;
            let floor = NOISE_FRACTION * raw.iter().map(|c| c.norm()).fold(0.0, f64::max);
            let cap = reliable_range(rho);
            let last = rho == *ladder.last().expect("ladder is non-empty");
            for k in 0..=n_eff {
                if assigned[k] || (k > cap && !last) {
                    continue;
                }
                if raw[k].norm() > floor || last {
                    coeffs[k] = raw[k] / rho.powi(k as i32);
                    assigned[k] = true;
                    used_radius = used_radius.max(rho);
                }
            }
            if assigned.iter().all(|&a| a) {
                break;
            }
        }
        if n_eff < n_max {
            log::warn!("taylor series: n_max {n_max} capped to {n_eff} by the log grid");
        }
        Ok(TaylorSeries {
            truncation_error: tail_estimate(&coeffs),
            coefficients: coeffs,
            radius: Some(used_radius),
            capped: n_eff < n_max,
        })
    }

    /// Non-negative Fourier coefficients of `θ ↦ O_h(ρe^{iθ})`.
    fn circle_coefficients(&self, radius: f64) -> Result<Vec<Complex64>, OuterError> {
        let samples = self.circle(radius, 0.0)?;
        let fc = fourier_coefficients(&samples.outer(), &samples.grid)?;
        Ok((0..=(self.grid.len() / 2) as i64).map(|k| fc.get(k)).collect())
    }
}

fn reliable_range(radius: f64) -> usize {
    if radius <= 0.0 {
        return 0;
    }
    let per = -radius.ln();
    if per <= 0.0 {
        usize::MAX
    } else {
        (MAX_AMPLIFICATION.ln() / per).floor() as usize
    }
}

/// ℓ² mass of the last quarter of the coefficients, a proxy for what the
/// truncated tail still carries.
fn tail_estimate(coeffs: &[Complex64]) -> f64 {
    let start = coeffs.len() - coeffs.len() / 4;
    pairwise_sum(&coeffs[start..].iter().map(|c| c.norm_sqr()).collect::<Vec<_>>()).sqrt()
}

/// Taylor coefficients `f̂(0), f̂(1), …` with the radius they were read at.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorSeries {
    pub coefficients: Vec<Complex64>,
    /// Extraction radius; `None` for exactly known series.
    pub radius: Option<f64>,
    pub truncation_error: f64,
    pub capped: bool,
}

impl TaylorSeries {
    pub fn exact(coefficients: Vec<Complex64>) -> Self {
        Self {
            coefficients,
            radius: None,
            truncation_error: 0.0,
            capped: false,
        }
    }

    pub fn from_real(coefficients: &[f64]) -> Self {
        Self::exact(coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// `z^n`.
    pub fn monomial(n: usize) -> Self {
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[n] = Complex64::new(1.0, 0.0);
        Self::exact(c)
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Highest index with a non-zero coefficient.
    pub fn degree(&self) -> usize {
        self.coefficients.iter().rposition(|c| c.norm() != 0.0).unwrap_or(0)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coefficients
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Coefficients of `f′`.
    pub fn derivative(&self) -> Vec<Complex64> {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(n, c)| c * n as f64)
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("series serializes")
    }
}

impl Serialize for TaylorSeries {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coefficients.iter().map(|c| [c.re, c.im]).collect();
        let mut s = serializer.serialize_struct("TaylorSeries", 4)?;
        s.serialize_field("coefficients", &pairs)?;
        s.serialize_field("rho", &self.radius)?;
        s.serialize_field("truncation_error", &self.truncation_error)?;
        s.serialize_field("capped", &self.capped)?;
        s.end()
    }
}
