//! Boundary functionals of Carleson type: `N_α`, `𝒞_α`, the log-oscillation
//! averages `a`, `ã`, the canonical scale `μ_h`, the terms `n_α`, `ñ_α`, and
//! the two-sided decomposition of `‖O_h‖²_{D_α}` they add up to.
//!
//! Double integrals live on the staggered tensor grid of [`crate::energy`]:
//! `θ_k = -π + (k + 1/8)Δ`, `φ_j = -π + (j + 5/8)Δ`, so the chord between
//! `θ_k` and `φ_j` depends only on `(j - k) mod n`. Single-point averages for
//! closed-form `h` have an adaptive engine that resolves arbitrarily small
//! scales, which the `h_β` family needs near `θ = 0⁺`.
//!
//! Everything that depends on `h` only through ratios `h(θ)/h(φ)` (the
//! sublevel sets, `a`, `ã`, `μ_h`) is computed from the unscaled shape, so it
//! is bit-for-bit unchanged under `h → c·h`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::boundary::{BoundaryError, BoundaryFunction};
use crate::energy::{
    energy_parseval_exact, outer_series, parseval_partial, BoundaryTrace, EnergyError, PHI_OFFSET, THETA_OFFSET,
};
use crate::outer::{OuterError, OuterFunction};
use crate::quadrature::{adaptive_1d_with, chord, pairwise_sum, AdaptiveOptions, QuadratureError};
use crate::report::{fmt_f64, Quantity};
use crate::thresholds::{classify_hbeta, Functional, ThresholdError, Verdict};

pub const DELTA_MIN: f64 = 1e-6;
pub const DELTAS_PER_DECADE: usize = 64;
/// Growth factor per grid doubling that counts as divergence.
pub const DOUBLING_FACTOR: f64 = 1.5;
/// Constant of the interior lower bound `|O_h(re^{iθ})| ≥ e^{-41} h(θ)`.
pub const LOWER_BOUND_EXPONENT: f64 = -41.0;

#[derive(Debug, Error)]
pub enum CarlesonError {
    #[error("weight exponent alpha = {0} outside [0, 1)")]
    Alpha(f64),
    #[error("kernel arguments must be positive, got ({0}, {1})")]
    KernelArgument(f64, f64),
    #[error("h is zero or not finite at theta = {0}")]
    ZeroAt(f64),
    #[error("lambda must lie in (0, 2]; got {value} at node {index}")]
    Lambda { index: usize, value: f64 },
    #[error("lambda has {got} values for a {n}-node grid")]
    LambdaShape { got: usize, n: usize },
    #[error("invalid delta grid: {0}")]
    DeltaGrid(String),
    #[error("grid size {0} must be a power of two of at least 64")]
    GridSize(usize),
    #[error("{0} is flagged infinite")]
    Infinite(&'static str),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Outer(#[from] OuterError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Threshold(#[from] ThresholdError),
}

fn check_alpha(alpha: f64) -> Result<(), CarlesonError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(CarlesonError::Alpha(alpha));
    }
    Ok(())
}

/// Which of the three cases of the elementary estimate a pair `(a, b)` is in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Comparable,
    /// `a ≥ 2b`
    Upper,
    /// `a ≤ b/2`
    Lower,
}

/// `(a² - b²) log(a/b)`, written as `(a-b)(a+b)(log a - log b)` so that it is
/// exactly symmetric and never negative.
pub fn logequiv_kernel(a: f64, b: f64) -> Result<(f64, Regime), CarlesonError> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(CarlesonError::KernelArgument(a, b));
    }
    let regime = if a >= 2.0 * b {
        Regime::Upper
    } else if a <= 0.5 * b {
        Regime::Lower
    } else {
        Regime::Comparable
    };
    Ok((kernel_unchecked(a, b, a.ln(), b.ln()), regime))
}

fn kernel_unchecked(a: f64, b: f64, la: f64, lb: f64) -> f64 {
    ((a - b) * (a + b) * (la - lb)).max(0.0)
}

/// Log-spaced scan grid `δ_min·10^{i/m}` up to `δ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaGrid {
    pub delta_min: f64,
    pub per_decade: usize,
}

impl Default for DeltaGrid {
    fn default() -> Self {
        Self {
            delta_min: DELTA_MIN,
            per_decade: DELTAS_PER_DECADE,
        }
    }
}

impl DeltaGrid {
    pub fn new(delta_min: f64, per_decade: usize) -> Result<Self, CarlesonError> {
        if !(delta_min > 0.0 && delta_min < 1.0) || per_decade == 0 {
            return Err(CarlesonError::DeltaGrid(format!(
                "delta_min = {delta_min}, {per_decade} points per decade"
            )));
        }
        Ok(Self { delta_min, per_decade })
    }

    pub fn values(&self) -> Vec<f64> {
        let decades = -self.delta_min.log10();
        let count = (decades * self.per_decade as f64).ceil() as usize;
        let mut out: Vec<f64> = (0..count)
            .map(|i| self.delta_min * 10f64.powf(i as f64 / self.per_decade as f64))
            .take_while(|&d| d < 1.0)
            .collect();
        out.push(1.0);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaSource {
    User,
    Mu,
    Constant,
}

impl fmt::Display for LambdaSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LambdaSource::User => "user",
            LambdaSource::Mu => "mu_h",
            LambdaSource::Constant => "constant",
        };
        f.write_str(s)
    }
}

/// Values of `λ` at the `θ`-nodes of an `n`-grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaFunction {
    pub values: Vec<f64>,
    pub source: LambdaSource,
}

impl LambdaFunction {
    pub fn new(values: Vec<f64>, source: LambdaSource) -> Result<Self, CarlesonError> {
        if let Some(index) = values.iter().position(|v| !(*v > 0.0 && *v <= 2.0)) {
            return Err(CarlesonError::Lambda {
                index,
                value: values[index],
            });
        }
        Ok(Self { values, source })
    }

    pub fn constant(n: usize, value: f64) -> Result<Self, CarlesonError> {
        Self::new(vec![value; n], LambdaSource::Constant)
    }

    pub fn from_mu(profile: &MuProfile) -> Self {
        Self {
            values: profile.mu.clone(),
            source: LambdaSource::Mu,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// How `λ` is chosen in a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaChoice {
    /// `λ = μ_h`, recomputed on every grid.
    Mu(DeltaGrid),
    Constant(f64),
    /// Per-node values on the finest grid; coarser grids take every
    /// `2^k`-th value.
    User(Vec<f64>),
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Mu(DeltaGrid::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationAverages {
    pub theta: f64,
    pub lambda: f64,
    /// `(1/2π)∫_{lower, chord ≥ λ} log(h(θ)/h(φ))/chord² dφ`
    pub a: f64,
    /// `(1/2π)∫_{lower, chord ≤ λ} log(h(θ)/h(φ)) dφ`
    pub a_tilde: f64,
}

impl OscillationAverages {
    fn violates(&self) -> bool {
        self.lambda * self.a > 2.0 || self.a_tilde / self.lambda > 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuProfile {
    pub n: usize,
    pub delta_grid: DeltaGrid,
    pub theta: Vec<f64>,
    pub mu: Vec<f64>,
    /// Nodes where the constraint already fails at `δ_min`; `μ` is reported
    /// as `δ_min` there.
    pub floor_hit: Vec<bool>,
}

impl MuProfile {
    pub fn floor_hits(&self) -> usize {
        self.floor_hit.iter().filter(|&&f| f).count()
    }

    pub fn is_identically_one(&self) -> bool {
        self.mu.iter().all(|&m| m == 1.0)
    }

    /// The points `z_h(θ) = (1 - μ_h(θ))e^{iθ}`.
    pub fn z_points(&self) -> Vec<Complex64> {
        self.theta
            .iter()
            .zip(&self.mu)
            .map(|(&t, &m)| Complex64::from_polar(1.0 - m, t))
            .collect()
    }

    /// `theta,mu,floor_flag` rows with a header line.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["theta", "mu", "floor_flag"])?;
        for k in 0..self.n {
            w.write_record([
                fmt_f64(self.theta[k]),
                fmt_f64(self.mu[k]),
                u8::from(self.floor_hit[k]).to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Compensated running sum, for the prefix sums of the `μ_h` scan.
#[derive(Debug, Clone, Copy, Default)]
struct RunningSum {
    sum: f64,
    carry: f64,
}

impl RunningSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `h` sampled on the staggered `n`-grid, with the pairwise chord table.
#[derive(Debug, Clone)]
pub struct CarlesonGrid {
    n: usize,
    spacing: f64,
    theta: Vec<f64>,
    h_theta: Vec<f64>,
    h_phi: Vec<f64>,
    u_theta: Vec<f64>,
    u_phi: Vec<f64>,
    l_theta: Vec<f64>,
    l_phi: Vec<f64>,
    /// Chord between `θ_k` and `φ_{k+d}`.
    chords: Vec<f64>,
    /// Differences `d` sorted by increasing chord.
    order: Vec<usize>,
}

impl CarlesonGrid {
    pub fn new(h: &BoundaryFunction, n: usize) -> Result<Self, CarlesonError> {
        let tg = BoundaryTrace::theta_grid(n)?;
        let pg = BoundaryTrace::phi_grid(n)?;
        let shape = h.unscaled();
        let theta = tg.nodes();
        let phi = pg.nodes();
        let sample = |nodes: &[f64]| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CarlesonError> {
            let mut hv = Vec::with_capacity(n);
            let mut uv = Vec::with_capacity(n);
            let mut lv = Vec::with_capacity(n);
            for &t in nodes {
                let u = shape.eval(t);
                let l = shape.log_eval(t);
                if !(u > 0.0 && u.is_finite() && l.is_finite()) {
                    return Err(CarlesonError::ZeroAt(t));
                }
                hv.push(h.eval(t));
                uv.push(u);
                lv.push(l);
            }
            Ok((hv, uv, lv))
        };
        let (h_theta, u_theta, l_theta) = sample(&theta)?;
        let (h_phi, u_phi, l_phi) = sample(&phi)?;
        let spacing = tg.spacing();
        let chords: Vec<f64> = (0..n)
            .map(|d| chord(0.0, (d as f64 + PHI_OFFSET - THETA_OFFSET) * spacing))
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| chords[x].total_cmp(&chords[y]).then(x.cmp(&y)));
        Ok(Self {
            n,
            spacing,
            theta,
            h_theta,
            h_phi,
            u_theta,
            u_phi,
            l_theta,
            l_phi,
            chords,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta
    }

    pub fn h_theta(&self) -> &[f64] {
        &self.h_theta
    }

    /// `h(φ_j) ≤ h(θ_k)/2`.
    fn is_lower(&self, k: usize, j: usize) -> bool {
        self.u_phi[j] <= 0.5 * self.u_theta[k]
    }

    /// Whether any node pair lies in the sublevel relation.
    pub fn has_lower_pairs(&self) -> bool {
        let min_phi = self.u_phi.iter().copied().fold(f64::INFINITY, f64::min);
        self.u_theta.iter().any(|&u| min_phi <= 0.5 * u)
    }

    fn kernel_powers(&self, exponent: f64) -> Vec<f64> {
        self.chords.iter().map(|c| c.powf(exponent)).collect()
    }

    fn double_sum<F>(&self, alpha: f64, term: F) -> f64
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let kernel = self.kernel_powers(alpha - 2.0);
        let n = self.n;
        let rows: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                let terms: Vec<f64> = (0..n).map(|j| term(k, j) * kernel[(j + n - k) % n]).collect();
                pairwise_sum(&terms)
            })
            .collect();
        pairwise_sum(&rows) * self.spacing * self.spacing
    }

    /// `∬ |h(φ) - h(θ)|²/chord^{2-α}`.
    pub fn big_n(&self, alpha: f64) -> f64 {
        self.double_sum(alpha, |k, j| (self.h_phi[j] - self.h_theta[k]).powi(2))
    }

    /// `∬ (h²(φ) - h²(θ)) log(h(φ)/h(θ))/chord^{2-α}`.
    pub fn c_alpha(&self, alpha: f64) -> f64 {
        self.double_sum(alpha, |k, j| {
            kernel_unchecked(self.h_phi[j], self.h_theta[k], self.l_phi[j], self.l_theta[k])
        })
    }

    /// `(chord, log(h(θ_k)/h(φ)))` over the sublevel set, by increasing chord.
    fn lower_entries(&self, k: usize) -> Vec<(f64, f64)> {
        self.order
            .iter()
            .filter_map(|&d| {
                let j = (k + d) % self.n;
                self.is_lower(k, j)
                    .then(|| (self.chords[d], self.l_theta[k] - self.l_phi[j]))
            })
            .collect()
    }

    pub fn averages(&self, k: usize, lambda: f64) -> OscillationAverages {
        let entries = self.lower_entries(k);
        let far: Vec<f64> = entries.iter().filter(|e| e.0 >= lambda).map(|(c, w)| w / (c * c)).collect();
        let near: Vec<f64> = entries.iter().filter(|e| e.0 <= lambda).map(|e| e.1).collect();
        let scale = self.spacing / (2.0 * PI);
        OscillationAverages {
            theta: self.theta[k],
            lambda,
            a: scale * pairwise_sum(&far),
            a_tilde: scale * pairwise_sum(&near),
        }
    }

    /// `μ_h(θ_k)` by an increasing scan over `deltas`; `(μ, floor_hit)`.
    fn mu_at(&self, k: usize, deltas: &[f64]) -> (f64, bool) {
        let entries = self.lower_entries(k);
        if entries.is_empty() {
            return (1.0, false);
        }
        let m = entries.len();
        let mut prefix = Vec::with_capacity(m + 1);
        let mut acc = RunningSum::default();
        prefix.push(0.0);
        for e in &entries {
            acc.add(e.1);
            prefix.push(acc.value());
        }
        let mut suffix = vec![0.0; m + 1];
        let mut acc = RunningSum::default();
        for i in (0..m).rev() {
            let (c, w) = entries[i];
            acc.add(w / (c * c));
            suffix[i] = acc.value();
        }
        let scale = self.spacing / (2.0 * PI);
        let (mut le, mut lt) = (0usize, 0usize);
        for (i, &delta) in deltas.iter().enumerate() {
            while le < m && entries[le].0 <= delta {
                le += 1;
            }
            while lt < m && entries[lt].0 < delta {
                lt += 1;
            }
            let avg = OscillationAverages {
                theta: self.theta[k],
                lambda: delta,
                a: scale * suffix[lt],
                a_tilde: scale * prefix[le],
            };
            if avg.violates() {
                return if i == 0 { (deltas[0], true) } else { (deltas[i - 1], false) };
            }
        }
        (1.0, false)
    }

    pub fn mu_profile(&self, grid: &DeltaGrid) -> MuProfile {
        let deltas = grid.values();
        let (mu, floor_hit): (Vec<f64>, Vec<bool>) =
            (0..self.n).into_par_iter().map(|k| self.mu_at(k, &deltas)).unzip();
        MuProfile {
            n: self.n,
            delta_grid: *grid,
            theta: self.theta.clone(),
            mu,
            floor_hit,
        }
    }

    /// `(n_α, ñ_α)` at the given per-node `λ`.
    pub fn n_alphas(&self, lambda: &[f64], alpha: f64) -> Result<(f64, f64), CarlesonError> {
        check_alpha(alpha)?;
        if lambda.len() != self.n {
            return Err(CarlesonError::LambdaShape {
                got: lambda.len(),
                n: self.n,
            });
        }
        let kernel = self.kernel_powers(alpha - 2.0);
        let n = self.n;
        let rows: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|k| {
                let lam = lambda[k];
                let mut far = Vec::new();
                let mut near = Vec::new();
                for j in 0..n {
                    if !self.is_lower(k, j) {
                        continue;
                    }
                    let d = (j + n - k) % n;
                    let c = self.chords[d];
                    let w = self.l_theta[k] - self.l_phi[j];
                    if c >= lam {
                        far.push(w / (c * c));
                    }
                    if c <= lam {
                        near.push(w * kernel[d]);
                    }
                }
                let h2 = self.h_theta[k] * self.h_theta[k];
                // 2π·a = Δ·Σ_far
                let big_a = self.spacing * pairwise_sum(&far);
                (h2 * big_a.powf(1.0 - alpha), h2 * self.spacing * pairwise_sum(&near))
            })
            .collect();
        let (na, nt): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
        Ok((pairwise_sum(&na) * self.spacing, pairwise_sum(&nt) * self.spacing))
    }
}

/// Single-point averages for closed-form `h`, resolving scales far below any
/// grid spacing: the sublevel set is cut at its level crossings, at the
/// jumps of `h` and at geometric points around them.
#[derive(Debug, Clone)]
pub struct PointAverager {
    shape: BoundaryFunction,
    theta: f64,
    u_theta: f64,
    l_theta: f64,
    cuts: Vec<f64>,
}

impl PointAverager {
    pub fn new(h: &BoundaryFunction, theta: f64) -> Result<Self, CarlesonError> {
        let shape = h.unscaled();
        let u_theta = shape.eval(theta);
        let l_theta = shape.log_eval(theta);
        if !(u_theta > 0.0 && u_theta.is_finite() && l_theta.is_finite()) {
            return Err(CarlesonError::ZeroAt(theta));
        }
        let (lo, hi) = (theta - PI, theta + PI);
        let mut specials = vec![theta];
        for b in shape.breakpoints() {
            for p in [b - 2.0 * PI, b, b + 2.0 * PI] {
                if p > lo && p < hi {
                    specials.push(p);
                }
            }
        }
        // finest scale: distance from θ to the nearest jump, or |θ| itself
        let mut scale: f64 = 1.0;
        for &s in &specials[1..] {
            let d = (s - theta).abs();
            if d > 0.0 {
                scale = scale.min(d);
            }
        }
        if theta != 0.0 {
            scale = scale.min(theta.abs());
        }
        let depth = ((PI / (1e-3 * scale.max(1e-300))).log2().ceil() as usize).min(1100);
        let mut cuts: Vec<f64> = Vec::new();
        for &s in &specials {
            cuts.push(s);
            for k in 1..=depth {
                let step = PI * 0.5f64.powi(k as i32);
                cuts.push(s - step);
                cuts.push(s + step);
            }
        }
        let uniform = 4096;
        let mut samples: Vec<f64> = (0..=uniform)
            .map(|i| lo + (hi - lo) * i as f64 / uniform as f64)
            .chain(cuts.iter().copied())
            .filter(|&p| p >= lo && p <= hi)
            .collect();
        samples.sort_by(f64::total_cmp);
        samples.dedup();
        let target = 0.5 * u_theta;
        let g = |p: f64| shape.eval(p) - target;
        let mut crossings = Vec::new();
        let mut prev = (samples[0], g(samples[0]));
        for &p in &samples[1..] {
            let gp = g(p);
            if (prev.1 <= 0.0) != (gp <= 0.0) {
                let (mut a, mut b) = (prev.0, p);
                let low_at_a = prev.1 <= 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if !(mid > a && mid < b) {
                        break;
                    }
                    if (g(mid) <= 0.0) == low_at_a {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                crossings.push(a);
                crossings.push(b);
            }
            prev = (p, gp);
        }
        cuts.extend(crossings);
        cuts.retain(|&p| p > lo && p < hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        Ok(Self {
            shape,
            theta,
            u_theta,
            l_theta,
            cuts,
        })
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: F, extra: &[f64]) -> Result<f64, CarlesonError> {
        let mut cuts = self.cuts.clone();
        cuts.extend_from_slice(extra);
        let res = adaptive_1d_with(
            f,
            self.theta - PI,
            self.theta + PI,
            &cuts,
            &AdaptiveOptions::with_rel_tol(1e-10),
        )?;
        if res.converged || res.error_estimate <= 1e-6 * res.value.abs() {
            Ok(res.value)
        } else {
            Err(QuadratureError::Unconverged {
                value: res.value,
                error: res.error_estimate,
                panels: res.panels,
            }
            .into())
        }
    }

    pub fn averages(&self, lambda: f64) -> Result<OscillationAverages, CarlesonError> {
        let reach = if lambda >= 2.0 { PI } else { 2.0 * (0.5 * lambda).asin() };
        let extra = [self.theta - reach, self.theta + reach];
        let lower_log = |p: f64| -> Option<f64> {
            let u = self.shape.eval(p);
            (u <= 0.5 * self.u_theta).then(|| self.l_theta - self.shape.log_eval(p))
        };
        let near = self.integrate(
            |p| {
                if (p - self.theta).abs() <= reach {
                    lower_log(p).unwrap_or(0.0)
                } else {
                    0.0
                }
            },
            &extra,
        )?;
        let far = if lambda >= 2.0 {
            0.0
        } else {
            self.integrate(
                |p| {
                    let t = p - self.theta;
                    if t.abs() >= reach {
                        let c = 2.0 * (0.5 * t).sin().abs();
                        lower_log(p).map_or(0.0, |w| w / (c * c))
                    } else {
                        0.0
                    }
                },
                &extra,
            )?
        };
        Ok(OscillationAverages {
            theta: self.theta,
            lambda,
            a: far / (2.0 * PI),
            a_tilde: near / (2.0 * PI),
        })
    }

    /// `μ_h(θ)` by an increasing scan; `(μ, floor_hit)`.
    pub fn mu(&self, grid: &DeltaGrid) -> Result<(f64, bool), CarlesonError> {
        let deltas = grid.values();
        for (i, &d) in deltas.iter().enumerate() {
            if self.averages(d)?.violates() {
                return Ok(if i == 0 { (deltas[0], true) } else { (deltas[i - 1], false) });
            }
        }
        Ok((1.0, false))
    }
}

/// `a` and `ã` at a single point, by adaptive quadrature.
pub fn oscillation_averages(h: &BoundaryFunction, lambda: f64, theta: f64) -> Result<OscillationAverages, CarlesonError> {
    if !(lambda > 0.0) {
        return Err(CarlesonError::Lambda { index: 0, value: lambda });
    }
    PointAverager::new(h, theta)?.averages(lambda)
}

pub fn mu_profile(h: &BoundaryFunction, n: usize, grid: &DeltaGrid) -> Result<MuProfile, CarlesonError> {
    Ok(CarlesonGrid::new(h, n)?.mu_profile(grid))
}

/// How the finiteness of a quantity was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlagMethod {
    /// Reduced-integrand classifier of the `h_β` family.
    Classifier,
    /// Growth under successive grid doublings.
    Doubling,
}

/// Infinite when each of two successive refinements multiplies the value by
/// at least [`DOUBLING_FACTOR`].
pub fn doubling_flags_divergence(values: [f64; 3]) -> bool {
    let [a, b, c] = values;
    a > 0.0 && b >= DOUBLING_FACTOR * a && c >= DOUBLING_FACTOR * b
}

/// Status from the `h_β` classifier when `h` is `h_β` with the same `α`,
/// otherwise from grid doubling.
fn decide(
    h: &BoundaryFunction,
    alpha: f64,
    functional: Functional,
    values: [f64; 3],
) -> Result<(Quantity, FlagMethod), CarlesonError> {
    let value = values[2];
    if let Some(p) = h.hbeta_params() {
        if (p.alpha - alpha).abs() < 1e-12 {
            match classify_hbeta(functional, p.alpha, p.beta)?.verdict {
                Verdict::Divergent => return Ok((Quantity::infinite(), FlagMethod::Classifier)),
                Verdict::Convergent => return Ok((Quantity::finite(value), FlagMethod::Classifier)),
                Verdict::Inconclusive => {}
            }
        }
    }
    let q = if doubling_flags_divergence(values) {
        Quantity::infinite()
    } else {
        Quantity::finite(value)
    };
    Ok((q, FlagMethod::Doubling))
}

fn refinement_sizes(n: usize) -> Result<[usize; 3], CarlesonError> {
    if n < 64 || !n.is_power_of_two() {
        return Err(CarlesonError::GridSize(n));
    }
    Ok([n / 4, n / 2, n])
}

fn on_refinements<F>(h: &BoundaryFunction, n: usize, f: F) -> Result<[f64; 3], CarlesonError>
where
    F: Fn(&CarlesonGrid) -> Result<f64, CarlesonError>,
{
    let mut out = [0.0; 3];
    for (slot, m) in out.iter_mut().zip(refinement_sizes(n)?) {
        *slot = f(&CarlesonGrid::new(h, m)?)?;
    }
    Ok(out)
}

/// `N_α(h)` on the `n`-grid (no prefactor), flagged by refinement.
pub fn big_n_alpha(h: &BoundaryFunction, alpha: f64, n: usize) -> Result<Quantity, CarlesonError> {
    check_alpha(alpha)?;
    let values = on_refinements(h, n, |g| Ok(g.big_n(alpha)))?;
    Ok(decide(h, alpha, Functional::N, values)?.0)
}

/// `𝒞_α(h)` on the `n`-grid (no prefactor), flagged by refinement.
pub fn c_alpha(h: &BoundaryFunction, alpha: f64, n: usize) -> Result<Quantity, CarlesonError> {
    check_alpha(alpha)?;
    let values = on_refinements(h, n, |g| Ok(g.c_alpha(alpha)))?;
    Ok(decide(h, alpha, Functional::C, values)?.0)
}

fn lambda_on(choice: &LambdaChoice, grid: &CarlesonGrid, finest: usize) -> Result<(Vec<f64>, usize), CarlesonError> {
    let m = grid.len();
    match choice {
        LambdaChoice::Mu(dg) => {
            let p = grid.mu_profile(dg);
            let hits = p.floor_hits();
            Ok((p.mu, hits))
        }
        LambdaChoice::Constant(c) => Ok((LambdaFunction::constant(m, *c)?.values, 0)),
        LambdaChoice::User(v) => {
            if v.len() != finest {
                return Err(CarlesonError::LambdaShape { got: v.len(), n: finest });
            }
            let stride = finest / m;
            let vals: Vec<f64> = (0..m).map(|k| v[k * stride]).collect();
            Ok((LambdaFunction::new(vals, LambdaSource::User)?.values, 0))
        }
    }
}

/// `(n_α, ñ_α)` at `λ`, flagged by refinement.
pub fn n_alphas(
    h: &BoundaryFunction,
    lambda: &LambdaChoice,
    alpha: f64,
    n: usize,
) -> Result<(Quantity, Quantity), CarlesonError> {
    check_alpha(alpha)?;
    let mut na = [0.0; 3];
    let mut nt = [0.0; 3];
    for (i, m) in refinement_sizes(n)?.into_iter().enumerate() {
        let g = CarlesonGrid::new(h, m)?;
        let (lam, _) = lambda_on(lambda, &g, n)?;
        (na[i], nt[i]) = g.n_alphas(&lam, alpha)?;
    }
    Ok((
        decide(h, alpha, Functional::D, na)?.0,
        decide(h, alpha, Functional::D, nt)?.0,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CarlesonDecomposition {
    pub alpha: f64,
    pub boundary: String,
    pub n: usize,
    pub norm_sq: Quantity,
    pub big_n: Quantity,
    pub n_alpha: Quantity,
    pub n_tilde: Quantity,
    /// `‖h‖₂² + N_α + n_α + ñ_α`
    pub rhs: Quantity,
    /// `|O_h(0)|²`
    pub origin_sq: f64,
    pub d_alpha: Quantity,
    /// `‖O_h‖²_{D_α} = |O_h(0)|² + D_α(O_h)`
    pub lhs: Quantity,
    /// `rhs/lhs` when both are finite.
    pub ratio: Option<f64>,
    pub lambda: LambdaSource,
    pub mu_floor_hits: usize,
    pub flag_methods: BTreeMap<String, FlagMethod>,
    pub finiteness_agree: bool,
}

/// Both sides of the two-sided estimate at `λ` (by default `λ = μ_h`):
/// functionals on the staggered `n`-grid, refinement checks on `n/4` and
/// `n/2`, and the energy from the Taylor series of `O_h` on `4n` log nodes.
pub fn theorem_decomposition(
    h: &BoundaryFunction,
    alpha: f64,
    n: usize,
    lambda: &LambdaChoice,
) -> Result<CarlesonDecomposition, CarlesonError> {
    check_alpha(alpha)?;
    let sizes = refinement_sizes(n)?;
    let mut big_n = [0.0; 3];
    let mut na = [0.0; 3];
    let mut nt = [0.0; 3];
    let mut floor_hits = 0;
    for (i, m) in sizes.into_iter().enumerate() {
        let g = CarlesonGrid::new(h, m)?;
        big_n[i] = g.big_n(alpha);
        let (lam, hits) = lambda_on(lambda, &g, n)?;
        (na[i], nt[i]) = g.n_alphas(&lam, alpha)?;
        floor_hits = hits;
    }
    let mut flag_methods = BTreeMap::new();
    let (big_n, m) = decide(h, alpha, Functional::N, big_n)?;
    flag_methods.insert("big_n".to_string(), m);
    let (n_alpha, m) = decide(h, alpha, Functional::D, na)?;
    flag_methods.insert("n_alpha".to_string(), m);
    let (n_tilde, m) = decide(h, alpha, Functional::D, nt)?;
    flag_methods.insert("n_tilde".to_string(), m);
    let norm_sq = Quantity::finite(h.norm_sq()?);
    let rhs = norm_sq.add(big_n).add(n_alpha).add(n_tilde);

    // O_{ch} = c·O_h: take the series of the unit-scale shape so that the
    // radius selection of the coefficient extraction cannot depend on c
    let shape = h.unscaled();
    let c2 = h.scale() * h.scale();
    let outer = OuterFunction::new(&shape, 4 * n)?;
    let series = outer_series(&outer)?;
    let origin = match shape.closed_outer(Complex64::new(0.0, 0.0)) {
        Some(v) => v.norm(),
        None => outer.value_at_origin(),
    };
    let origin_sq = c2 * origin * origin;
    let len = series.len();
    let partials = [
        c2 * parseval_partial(&series, alpha, (len / 4).max(1)),
        c2 * parseval_partial(&series, alpha, (len / 2).max(1)),
        c2 * energy_parseval_exact(&series, alpha)?,
    ];
    let (d_alpha, m) = decide(h, alpha, Functional::D, partials)?;
    flag_methods.insert("d_alpha".to_string(), m);
    let lhs = Quantity::finite(origin_sq).add(d_alpha);
    let ratio = (lhs.is_finite() && rhs.is_finite() && lhs.value > 0.0).then(|| rhs.value / lhs.value);
    Ok(CarlesonDecomposition {
        alpha,
        boundary: h.to_string(),
        n,
        norm_sq,
        big_n,
        n_alpha,
        n_tilde,
        rhs,
        origin_sq,
        d_alpha,
        lhs,
        ratio,
        lambda: match lambda {
            LambdaChoice::Mu(_) => LambdaSource::Mu,
            LambdaChoice::Constant(_) => LambdaSource::Constant,
            LambdaChoice::User(_) => LambdaSource::User,
        },
        mu_floor_hits: floor_hits,
        flag_methods,
        finiteness_agree: lhs.is_infinite() == rhs.is_infinite(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// `D(O_h)` from the Taylor series.
    pub lhs: f64,
    /// `(1/4π²)·𝒞₀(h)` on the staggered grid.
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Both sides of Carleson's formula `D(O_h) = (1/4π²)𝒞₀(h)`.
pub fn carleson_identity_check(h: &BoundaryFunction, n: usize) -> Result<IdentityCheck, CarlesonError> {
    let outer = OuterFunction::new(h, 4 * n)?;
    let series = outer_series(&outer)?;
    let lhs = energy_parseval_exact(&series, 0.0)?;
    let c0 = c_alpha(h, 0.0, n)?;
    if c0.is_infinite() {
        return Err(CarlesonError::Infinite("C_0(h)"));
    }
    let rhs = c0.value / (4.0 * PI * PI);
    let scale = lhs.abs().max(rhs.abs());
    let relative_gap = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    Ok(IdentityCheck { lhs, rhs, relative_gap })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundCheck {
    pub min_ratio: f64,
    pub theta_at_min: f64,
    pub radius_at_min: f64,
    pub bound: f64,
    pub nodes_checked: usize,
    /// Nodes whose range `[1 - μ_h, 1)` lies entirely inside the clearance
    /// band of the outer-function grid.
    pub nodes_skipped: usize,
    pub radii: usize,
}

impl LowerBoundCheck {
    pub fn holds(&self) -> bool {
        self.min_ratio >= self.bound
    }
}

/// `min |O_h(re^{iθ})|/h(θ)` over the profile nodes and sampled radii
/// `r ≥ 1 - μ_h(θ)` that respect the clearance rule.
pub fn check_lower_bound_outer(h: &BoundaryFunction, profile: &MuProfile) -> Result<LowerBoundCheck, CarlesonError> {
    let n = profile.n;
    let outer = OuterFunction::new(h, 4 * n)?;
    let gap_min = outer.min_clearance();
    let count = 24;
    // gaps 1 - r from the clearance up to 1, geometrically
    let radii: Vec<f64> = (0..count)
        .map(|i| {
            let gap = gap_min * (1.0 / gap_min).powf(i as f64 / (count - 1) as f64);
            (1.0 - gap).max(0.0)
        })
        .collect();
    let n_log = outer.grid().len();
    let pos = THETA_OFFSET * (n_log / n) as f64;
    let stride = n_log / n;
    let per_radius = radii
        .par_iter()
        .map(|&r| -> Result<Vec<f64>, CarlesonError> {
            let c = outer.circle(r, pos.fract())?;
            let (_, vals) = c.subsample(pos.floor() as usize, stride);
            Ok(vals.iter().map(|v| v.norm()).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = LowerBoundCheck {
        min_ratio: f64::INFINITY,
        theta_at_min: f64::NAN,
        radius_at_min: f64::NAN,
        bound: LOWER_BOUND_EXPONENT.exp(),
        nodes_checked: 0,
        nodes_skipped: 0,
        radii: count,
    };
    for k in 0..n {
        let theta = profile.theta[k];
        let hk = h.eval(theta);
        let r_min = 1.0 - profile.mu[k];
        let mut any = false;
        for (i, &r) in radii.iter().enumerate() {
            if r < r_min {
                continue;
            }
            any = true;
            let ratio = per_radius[i][k] / hk;
            if ratio < out.min_ratio {
                out.min_ratio = ratio;
                out.theta_at_min = theta;
                out.radius_at_min = r;
            }
        }
        if any {
            out.nodes_checked += 1;
        } else {
            out.nodes_skipped += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DauglasCheck {
    /// `∫ h² μ_h^{α-1}`
    pub numerator: f64,
    pub d_alpha: f64,
    pub norm_sq: f64,
    pub ratio: f64,
}

/// `∫ h²(θ) μ_h(θ)^{α-1} dθ / (D_α(O_h) + ‖h‖₂²)`.
pub fn check_dauglas_bound(h: &BoundaryFunction, alpha: f64, profile: &MuProfile) -> Result<DauglasCheck, CarlesonError> {
    check_alpha(alpha)?;
    let spacing = 2.0 * PI / profile.n as f64;
    let terms: Vec<f64> = profile
        .theta
        .iter()
        .zip(&profile.mu)
        .map(|(&t, &m)| h.eval(t).powi(2) * m.powf(alpha - 1.0))
        .collect();
    let numerator = spacing * pairwise_sum(&terms);
    let outer = OuterFunction::new(h, 4 * profile.n)?;
    let d_alpha = energy_parseval_exact(&outer_series(&outer)?, alpha)?;
    let norm_sq = h.norm_sq()?;
    Ok(DauglasCheck {
        numerator,
        d_alpha,
        norm_sq,
        ratio: numerator / (d_alpha + norm_sq),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::TrigPolynomial;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn step() -> BoundaryFunction {
        BoundaryFunction::step(1.0, 4.0).unwrap()
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(logequiv_kernel(1.5, 1.5).unwrap(), (0.0, Regime::Comparable));
        let (v, r) = logequiv_kernel(2.0, 1.0).unwrap();
        assert_relative_eq!(v, 3.0 * 2f64.ln(), max_relative = 1e-15);
        assert_eq!(r, Regime::Upper);
        assert_eq!(logequiv_kernel(1.0, 2.0).unwrap().1, Regime::Lower);
        assert!(logequiv_kernel(0.0, 1.0).is_err());
        assert!(logequiv_kernel(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn kernel_symmetric_and_nonnegative(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            let (x, _) = logequiv_kernel(a, b).unwrap();
            let (y, _) = logequiv_kernel(b, a).unwrap();
            prop_assert!(x >= 0.0);
            prop_assert_eq!(x, y);
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn functionals_nonnegative(c1 in -1.5f64..1.5, s2 in -1.0f64..1.0, alpha in 0.0f64..0.95) {
            let h = BoundaryFunction::exp_trig(TrigPolynomial::from_flat(&[0.0, c1, 0.0, 0.0, s2]));
            let g = CarlesonGrid::new(&h, 64).unwrap();
            prop_assert!(g.big_n(alpha) >= 0.0);
            prop_assert!(g.c_alpha(alpha) >= 0.0);
            let mu = g.mu_profile(&DeltaGrid::default());
            prop_assert!(mu.mu.iter().all(|&m| m > 0.0 && m <= 1.0));
            let (na, nt) = g.n_alphas(&mu.mu, alpha).unwrap();
            prop_assert!(na >= 0.0 && nt >= 0.0);
            // vanishing exactly when no node pair is 2-separated
            prop_assert_eq!(na == 0.0 && nt == 0.0, !g.has_lower_pairs());
            if !g.has_lower_pairs() {
                prop_assert!(mu.is_identically_one());
            }
        }
    }

    #[test]
    fn constant_boundary_vanishes() {
        let h = BoundaryFunction::constant(2.5).unwrap();
        let g = CarlesonGrid::new(&h, 128).unwrap();
        assert_eq!(g.big_n(0.5), 0.0);
        assert_eq!(g.c_alpha(0.5), 0.0);
        let mu = g.mu_profile(&DeltaGrid::default());
        assert!(mu.is_identically_one());
        assert_eq!(g.n_alphas(&mu.mu, 0.5).unwrap(), (0.0, 0.0));
        let avg = g.averages(3, 0.1);
        assert_eq!((avg.a, avg.a_tilde), (0.0, 0.0));
        let avg = oscillation_averages(&h, 0.1, 0.4).unwrap();
        assert_eq!((avg.a, avg.a_tilde), (0.0, 0.0));
    }

    #[test]
    fn small_oscillation_vanishes() {
        for h in [
            BoundaryFunction::sin_bump(0.3).unwrap(),
            BoundaryFunction::exp_trig(TrigPolynomial::from_flat(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1])),
        ] {
            for alpha in [0.1, 0.5] {
                let (na, nt) = n_alphas(&h, &LambdaChoice::default(), alpha, 256).unwrap();
                assert_eq!((na.value, nt.value), (0.0, 0.0));
                assert!(mu_profile(&h, 256, &DeltaGrid::default()).unwrap().is_identically_one());
            }
        }
    }

    /// `a`, `ã` for the two-level step written out on its explicit arcs: for
    /// `θ ∈ (0, π)` the sublevel set is `(-π, 0]` with log ratio `log 4`.
    fn step_oracle(theta: f64, lambda: f64) -> (f64, f64) {
        let reach = if lambda >= 2.0 { PI } else { 2.0 * (0.5 * lambda).asin() };
        let dist = |p: f64| {
            let t = (p - theta).abs();
            t.min(2.0 * PI - t)
        };
        let cuts = [theta - reach, theta + reach - 2.0 * PI, theta - PI];
        let opts = AdaptiveOptions::with_rel_tol(1e-13);
        let near = adaptive_1d_with(|p| if dist(p) <= reach { 4f64.ln() } else { 0.0 }, -PI, 0.0, &cuts, &opts)
            .unwrap()
            .value;
        let far = adaptive_1d_with(
            |p| {
                let t = dist(p);
                if t >= reach {
                    4f64.ln() / (2.0 * (0.5 * t).sin()).powi(2)
                } else {
                    0.0
                }
            },
            -PI,
            0.0,
            &cuts,
            &opts,
        )
        .unwrap()
        .value;
        (far / (2.0 * PI), near / (2.0 * PI))
    }

    #[test]
    fn step_averages_match_arc_oracle() {
        let h = step();
        let n = 4096;
        let g = CarlesonGrid::new(&h, n).unwrap();
        for lambda in [0.5, 1.8] {
            let (a, at) = step_oracle(PI / 2.0, lambda);
            let adaptive = oscillation_averages(&h, lambda, PI / 2.0).unwrap();
            assert_relative_eq!(adaptive.a, a, max_relative = 1e-9);
            assert_relative_eq!(adaptive.a_tilde, at, max_relative = 1e-9, epsilon = 1e-14);
            // the node nearest π/2; the grid rule is first order at the arc ends
            let k = n / 2 + n / 4;
            let (a, at) = step_oracle(g.theta_nodes()[k], lambda);
            let grid = g.averages(k, lambda);
            assert_relative_eq!(grid.a, a, max_relative = 2e-3);
            assert_relative_eq!(grid.a_tilde, at, max_relative = 2e-3, epsilon = 1e-14);
        }
        assert_eq!(step_oracle(PI / 2.0, 0.5).1, 0.0);
    }

    #[test]
    fn far_set_empty_for_large_lambda() {
        let h = step();
        let avg = oscillation_averages(&h, 2.0, 1.0).unwrap();
        assert_eq!(avg.a, 0.0);
        assert!(avg.a_tilde > 0.0);
        let g = CarlesonGrid::new(&h, 256).unwrap();
        assert_eq!(g.averages(200, 2.0).a, 0.0);
    }

    #[test]
    fn step_n_alphas_match_arc_oracle() {
        let (alpha, lambda): (f64, f64) = (0.5, 0.5);
        let reach = 2.0 * (0.5 * lambda).asin();
        let log4 = 4f64.ln();
        let opts = AdaptiveOptions::with_rel_tol(1e-11);
        // inner far integral over φ ∈ (-π, 0) at θ ∈ (0, π)
        let inner = |theta: f64| -> f64 {
            let dist = |p: f64| {
                let t = theta - p;
                t.min(2.0 * PI - t)
            };
            let cuts = [theta - reach, theta + reach - 2.0 * PI, theta - PI];
            adaptive_1d_with(
                |p| {
                    let t = dist(p);
                    let c = 2.0 * (0.5 * t).sin();
                    if t >= reach {
                        log4 / (c * c)
                    } else {
                        0.0
                    }
                },
                -PI,
                0.0,
                &cuts,
                &opts,
            )
            .unwrap()
            .value
        };
        let outer_cuts = [reach, PI - reach];
        let n_oracle = adaptive_1d_with(|t| 16.0 * inner(t).powf(1.0 - alpha), 0.0, PI, &outer_cuts, &opts)
            .unwrap()
            .value;
        // Near part: for θ ∈ (0, π) the near sublevel arc has distances
        // (θ, reach) and (π-θ, reach); Fubini turns 16∫∫ into
        // 32·log 4·∫_0^reach u·chord(u)^{α-2} du.
        let nt_oracle = 32.0
            * log4
            * adaptive_1d_with(
                |u| u * (2.0 * (0.5 * u).sin()).powf(alpha - 2.0),
                0.0,
                reach,
                &[],
                &AdaptiveOptions::with_rel_tol(1e-12),
            )
            .unwrap()
            .value;
        let mut errors = Vec::new();
        for n in [1024, 4096] {
            let g = CarlesonGrid::new(&step(), n).unwrap();
            let lam = LambdaFunction::constant(n, lambda).unwrap();
            let (na, nt) = g.n_alphas(&lam.values, alpha).unwrap();
            errors.push(((na / n_oracle - 1.0).abs(), (nt / nt_oracle - 1.0).abs()));
        }
        let (en, et) = errors[1];
        assert!(en < 5e-3, "n_alpha relative error {en}");
        assert!(et < 2e-2, "n_tilde relative error {et}");
        assert!(errors[1].0 < errors[0].0 && errors[1].1 < errors[0].1);
    }

    #[test]
    fn hbeta_mu_below_theta_at_tiny_angles() {
        let h = BoundaryFunction::hbeta(0.5, 1.0).unwrap();
        for (theta, dmin) in [(1e-40, 1e-50), (1e-60, 1e-70)] {
            let p = PointAverager::new(&h, theta).unwrap();
            let at_theta = p.averages(theta).unwrap();
            assert!(theta * at_theta.a > 2.0, "θ·a = {}", theta * at_theta.a);
            let (mu, floor) = p.mu(&DeltaGrid::new(dmin, 64).unwrap()).unwrap();
            assert!(!floor);
            assert!(mu <= theta, "mu = {mu} at theta = {theta}");
        }
    }

    #[test]
    fn floor_is_flagged_not_zero() {
        // next to a jump of log-height L the near average is ã/δ ≈ L/2π, so a
        // jump by 1e8 violates the constraint at every scale
        let h = BoundaryFunction::step(1.0, 1e8).unwrap();
        let p = PointAverager::new(&h, 1e-9).unwrap();
        let (mu, floor) = p.mu(&DeltaGrid::default()).unwrap();
        assert!(floor);
        assert_eq!(mu, DELTA_MIN);
    }

    #[test]
    fn mu_profile_csv() {
        let h = BoundaryFunction::step(1.0, 1e8).unwrap();
        let p = mu_profile(&h, 64, &DeltaGrid::default()).unwrap();
        let csv = p.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("theta,mu,floor_flag"));
        assert_eq!(csv.lines().count(), 65);
        assert!(p.mu.iter().any(|&m| m < 1.0));
        assert_eq!(p.z_points().len(), 64);
    }

    #[test]
    fn scale_behavior() {
        let h = BoundaryFunction::exp_trig(TrigPolynomial::from_flat(&[0.0, 1.2, 0.3]));
        let alpha = 0.25;
        let base = theorem_decomposition(&h, alpha, 128, &LambdaChoice::default()).unwrap();
        let g = CarlesonGrid::new(&h, 128).unwrap();
        let mu = g.mu_profile(&DeltaGrid::default());
        let c_base = g.c_alpha(alpha);
        for c in [0.1, 7.0] {
            let hc = h.scaled(c);
            let gc = CarlesonGrid::new(&hc, 128).unwrap();
            assert_eq!(gc.mu_profile(&DeltaGrid::default()).mu, mu.mu);
            assert_eq!(gc.averages(5, 0.3), g.averages(5, 0.3));
            assert_relative_eq!(gc.c_alpha(alpha), c * c * c_base, max_relative = 1e-12);
            let d = theorem_decomposition(&hc, alpha, 128, &LambdaChoice::default()).unwrap();
            for (x, y) in [
                (d.norm_sq.value, base.norm_sq.value),
                (d.big_n.value, base.big_n.value),
                (d.n_alpha.value, base.n_alpha.value),
                (d.n_tilde.value, base.n_tilde.value),
                (d.lhs.value, base.lhs.value),
            ] {
                assert_relative_eq!(x, c * c * y, max_relative = 1e-10);
            }
            assert_relative_eq!(d.ratio.unwrap(), base.ratio.unwrap(), max_relative = 1e-10);
        }
        assert!(base.n_alpha.value > 0.0);
    }

    #[test]
    fn rotation_behavior() {
        let n = 128;
        let h = BoundaryFunction::exp_trig(TrigPolynomial::from_flat(&[0.0, 1.0, 0.0, 0.4]));
        let shift = 5;
        let hr = h.rotated(shift as f64 * 2.0 * PI / n as f64);
        let g = CarlesonGrid::new(&h, n).unwrap();
        let gr = CarlesonGrid::new(&hr, n).unwrap();
        let mu = g.mu_profile(&DeltaGrid::default());
        let mur = gr.mu_profile(&DeltaGrid::default());
        for k in 0..n {
            assert_eq!(mur.mu[(k + shift) % n], mu.mu[k]);
        }
        let a = theorem_decomposition(&h, 0.5, n, &LambdaChoice::default()).unwrap();
        let b = theorem_decomposition(&hr, 0.5, n, &LambdaChoice::default()).unwrap();
        for (x, y) in [
            (a.big_n.value, b.big_n.value),
            (a.n_alpha.value, b.n_alpha.value),
            (a.n_tilde.value, b.n_tilde.value),
            (a.norm_sq.value, b.norm_sq.value),
            (a.lhs.value, b.lhs.value),
            (g.c_alpha(0.5), gr.c_alpha(0.5)),
        ] {
            assert_relative_eq!(x, y, max_relative = 1e-10);
        }
    }

    #[test]
    fn hbeta_finiteness() {
        let n = 256;
        let f = |a, b| BoundaryFunction::hbeta(a, b).unwrap();
        assert!(big_n_alpha(&f(0.5, 0.8), 0.5, n).unwrap().is_finite());
        assert!(big_n_alpha(&f(0.5, 0.3), 0.5, n).unwrap().is_infinite());
        assert!(c_alpha(&f(0.5, 1.2), 0.5, n).unwrap().is_finite());
        assert!(c_alpha(&f(0.5, 0.9), 0.5, n).unwrap().is_infinite());
        let d = theorem_decomposition(&f(0.5, 0.9), 0.5, n, &LambdaChoice::default()).unwrap();
        assert!(d.lhs.is_finite() && d.rhs.is_finite() && d.ratio.is_some());
        let d = theorem_decomposition(&f(0.5, 0.6), 0.5, n, &LambdaChoice::default()).unwrap();
        assert!(d.lhs.is_infinite() && d.rhs.is_infinite() && d.ratio.is_none());
        assert!(d.finiteness_agree);
    }

    #[test]
    fn doubling_rule() {
        assert!(doubling_flags_divergence([1.0, 1.5, 2.25]));
        assert!(!doubling_flags_divergence([1.0, 1.5, 2.0]));
        assert!(!doubling_flags_divergence([0.0, 0.0, 0.0]));
    }

    #[test]
    fn carleson_identity() {
        let chk = carleson_identity_check(&BoundaryFunction::from_spec("poly:1+z/2").unwrap(), 1024).unwrap();
        assert_relative_eq!(chk.lhs, 0.25, max_relative = 1e-12);
        assert!(chk.relative_gap < 0.01, "{chk:?}");
        // e^{0.2z}: Σ n (0.2ⁿ/n!)²
        let mut series = 0.0;
        let mut c: f64 = 1.0;
        for k in 1..40 {
            c *= 0.2 / k as f64;
            series += k as f64 * c * c;
        }
        let h = BoundaryFunction::exp_trig(TrigPolynomial::from_flat(&[0.0, 0.2]));
        let chk = carleson_identity_check(&h, 1024).unwrap();
        assert_relative_eq!(chk.lhs, series, max_relative = 1e-10);
        assert_relative_eq!(chk.rhs, series, max_relative = 0.01);
        let chk = carleson_identity_check(&BoundaryFunction::constant(3.0).unwrap(), 256).unwrap();
        assert_eq!((chk.lhs, chk.rhs, chk.relative_gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn n0_bounded_by_dirichlet_energy() {
        for h in [
            BoundaryFunction::exp_cos(),
            BoundaryFunction::sin_bump(0.5).unwrap(),
            BoundaryFunction::from_spec("poly:1+z/2").unwrap(),
        ] {
            let n0 = big_n_alpha(&h, 0.0, 512).unwrap().value;
            let d = carleson_identity_check(&h, 512).unwrap().lhs;
            assert!(n0 <= 4.0 * PI * PI * d * (1.0 + 1e-6), "{h}: {n0} vs {d}");
        }
    }

    #[test]
    fn constant_decomposition() {
        let c = 1.7;
        let d = theorem_decomposition(&BoundaryFunction::constant(c).unwrap(), 0.5, 64, &LambdaChoice::default())
            .unwrap();
        assert_relative_eq!(d.lhs.value, c * c, max_relative = 1e-14);
        assert_relative_eq!(d.rhs.value, 2.0 * PI * c * c, max_relative = 1e-14);
        assert_eq!((d.big_n.value, d.n_alpha.value, d.n_tilde.value), (0.0, 0.0, 0.0));
        assert_relative_eq!(d.ratio.unwrap(), 2.0 * PI, max_relative = 1e-13);
        let json = serde_json::to_value(&d).unwrap();
        assert!(json.get("ratio").is_some());
        assert_eq!(json["lambda"], "mu");
    }

    #[test]
    fn lambda_validation() {
        assert!(LambdaFunction::constant(4, 0.0).is_err());
        assert!(LambdaFunction::constant(4, 2.5).is_err());
        assert!(LambdaFunction::constant(4, 2.0).is_ok());
        let g = CarlesonGrid::new(&step(), 64).unwrap();
        assert!(g.n_alphas(&[0.5; 32], 0.5).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        let n = 256;
        let h = BoundaryFunction::constant(2.0).unwrap();
        let chk = check_lower_bound_outer(&h, &mu_profile(&h, n, &DeltaGrid::default()).unwrap()).unwrap();
        assert_relative_eq!(chk.min_ratio, 1.0, max_relative = 1e-12);
        let h = BoundaryFunction::sin_bump(0.3).unwrap();
        let chk = check_lower_bound_outer(&h, &mu_profile(&h, n, &DeltaGrid::default()).unwrap()).unwrap();
        assert!(chk.min_ratio >= 0.5 && chk.nodes_skipped == 0, "{chk:?}");
        let h = BoundaryFunction::hbeta(0.5, 1.0).unwrap();
        let chk = check_lower_bound_outer(&h, &mu_profile(&h, n, &DeltaGrid::default()).unwrap()).unwrap();
        assert!(chk.holds() && chk.nodes_checked > 0, "{chk:?}");
    }

    #[test]
    fn dauglas_examples() {
        let n = 256;
        let h = BoundaryFunction::constant(1.3).unwrap();
        let chk = check_dauglas_bound(&h, 0.5, &mu_profile(&h, n, &DeltaGrid::default()).unwrap()).unwrap();
        assert!(chk.ratio <= 1.0 + 1e-12, "{chk:?}");
        let h = BoundaryFunction::sin_bump(0.3).unwrap();
        let chk = check_dauglas_bound(&h, 0.5, &mu_profile(&h, n, &DeltaGrid::default()).unwrap()).unwrap();
        assert!(chk.ratio.is_finite() && chk.ratio > 0.0);
    }

    #[test]
    fn delta_grid_values() {
        let v = DeltaGrid::default().values();
        assert_eq!(v.len(), 385);
        assert_eq!(v[0], 1e-6);
        assert_eq!(*v.last().unwrap(), 1.0);
        assert!(v.windows(2).all(|w| w[0] < w[1]));
        assert!(DeltaGrid::new(0.0, 64).is_err());
    }
}
