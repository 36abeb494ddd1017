//! Shared numerical kernels: periodic trapezoid sums on the circle, adaptive
//! Gauss-Kronrod integration, radial integration against `α(1-r)^{α-1} dr`,
//! and discrete Fourier analysis on uniform angular grids.
//!
//! Every reduction in this module goes through [`pairwise_sum`], which adds in
//! a fixed index-ascending tree order. Results are therefore bit-reproducible
//! regardless of how callers parallelise the work that produces the summands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("grid size {0} must be a power of two and at least 8")]
    InvalidGridSize(usize),
    #[error("non-finite sample {value} at node {index} (theta = {theta})")]
    NonFiniteSample { index: usize, theta: f64, value: f64 },
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
    #[error("radial weight exponent {0} must lie in (0, 1)")]
    InvalidAlpha(f64),
    #[error("adaptive integration did not converge: value {value}, error estimate {error} after {panels} panels")]
    Unconverged { value: f64, error: f64, panels: usize },
}

/// Uniform grid on the circle with nodes `θ_j = -π + (j + offset)·2π/n`.
///
/// `offset` is measured in units of the spacing and lies in `[0, 1)`. The
/// default grid (offset 0) contains `-π` and `0`; shifted grids are used to
/// stagger double integrals and to avoid singular points of boundary data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformAngularGrid {
    n: usize,
    offset: f64,
}

impl UniformAngularGrid {
    pub fn new(n: usize) -> Result<Self, QuadratureError> {
        Self::with_offset(n, 0.0)
    }

    pub fn with_offset(n: usize, offset: f64) -> Result<Self, QuadratureError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(QuadratureError::InvalidGridSize(n));
        }
        Ok(Self {
            n,
            offset: offset.rem_euclid(1.0),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -PI + (j as f64 + self.offset) * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// The same grid shifted by `shift` spacings.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            n: self.n,
            offset: (self.offset + shift).rem_euclid(1.0),
        }
    }

    /// A grid with `factor` times as many nodes that contains every node of
    /// this grid.
    pub fn refined(&self, factor: usize) -> Result<Self, QuadratureError> {
        Self::with_offset(self.n * factor, self.offset * factor as f64)
    }
}

/// Sum in a fixed, index-ascending pairwise tree.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().fold(0.0, |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn pairwise_sum_complex(values: &[Complex64]) -> Complex64 {
    const BLOCK: usize = 8;
    if values.len() <= BLOCK {
        return values.iter().fold(Complex64::new(0.0, 0.0), |acc, v| acc + v);
    }
    let mid = values.len() / 2;
    pairwise_sum_complex(&values[..mid]) + pairwise_sum_complex(&values[mid..])
}

/// `(2π/n) Σ_j f(θ_j)`.
pub fn periodic_trapezoid<F>(f: F, grid: &UniformAngularGrid) -> Result<f64, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    let mut samples = Vec::with_capacity(grid.len());
    for j in 0..grid.len() {
        let theta = grid.node(j);
        let value = f(theta);
        if !value.is_finite() {
            return Err(QuadratureError::NonFiniteSample {
                index: j,
                theta,
                value,
            });
        }
        samples.push(value);
    }
    Ok(pairwise_sum(&samples) * grid.spacing())
}

/// Chord length `|e^{iθ} - e^{iφ}|`.
pub fn chord(theta: f64, phi: f64) -> f64 {
    2.0 * (0.5 * (theta - phi)).sin().abs()
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[k] * pair;
        if k % 2 == 1 {
            gauss += WG[k / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-300,
            max_panels: 1 << 15,
        }
    }
}

impl AdaptiveOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

/// Outcome of an adaptive integration. `converged == false` means the panel
/// cap (or the floating point resolution of the interval) was hit before the
/// error target; callers decide whether the value is still usable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
    pub panels: usize,
}

impl AdaptiveResult {
    pub fn checked(self) -> Result<f64, QuadratureError> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(QuadratureError::Unconverged {
                value: self.value,
                error: self.error_estimate,
                panels: self.panels,
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

struct ByError(usize, f64);

impl PartialEq for ByError {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for ByError {}
impl PartialOrd for ByError {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for ByError {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties broken by index so the refinement sequence is deterministic
        self.1
            .total_cmp(&other.1)
            .then_with(|| other.0.cmp(&self.0))
    }
}

/// Adaptive bisection with a G7/K15 pair, relative tolerance `tol`.
pub fn adaptive_1d<F>(f: F, a: f64, b: f64, tol: f64) -> Result<AdaptiveResult, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    adaptive_1d_with(f, a, b, &[], &AdaptiveOptions::with_rel_tol(tol))
}

/// Adaptive integration over `[a, b]` with initial breakpoints.
///
/// Breakpoints outside `(a, b)` are ignored. The integrand is never evaluated
/// at `a`, `b`, or a breakpoint, so integrable endpoint singularities are fine.
pub fn adaptive_1d_with<F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &AdaptiveOptions,
) -> Result<AdaptiveResult, QuadratureError>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(QuadratureError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(AdaptiveResult {
            value: 0.0,
            error_estimate: 0.0,
            converged: true,
            panels: 0,
        });
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut panels: Vec<Panel> = Vec::new();
    let mut heap = BinaryHeap::new();
    for w in edges.windows(2) {
        let (value, error) = gauss_kronrod_15(&f, w[0], w[1]);
        heap.push(ByError(panels.len(), error));
        panels.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let mut converged = false;
    loop {
        let total: f64 = pairwise_sum(&panels.iter().map(|p| p.value).collect::<Vec<_>>());
        let err: f64 = pairwise_sum(&panels.iter().map(|p| p.error).collect::<Vec<_>>());
        if !total.is_finite() || !err.is_finite() {
            break;
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            converged = true;
            break;
        }
        if panels.len() >= opts.max_panels {
            break;
        }
        let Some(ByError(idx, _)) = heap.pop() else {
            break;
        };
        let p = panels[idx];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) || (p.b - p.a) <= 4.0 * f64::EPSILON * p.a.abs().max(p.b.abs()) {
            // interval exhausted at double precision
            break;
        }
        let (lv, le) = gauss_kronrod_15(&f, p.a, mid);
        let (rv, re) = gauss_kronrod_15(&f, mid, p.b);
        panels[idx] = Panel {
            a: p.a,
            b: mid,
            value: lv,
            error: le,
        };
        heap.push(ByError(idx, le));
        heap.push(ByError(panels.len(), re));
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: rv,
            error: re,
        });
    }

    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = pairwise_sum(&panels.iter().map(|p| p.value).collect::<Vec<_>>());
    let error_estimate = pairwise_sum(&panels.iter().map(|p| p.error).collect::<Vec<_>>());
    Ok(AdaptiveResult {
        value,
        error_estimate,
        converged: converged && value.is_finite(),
        panels: panels.len(),
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = (order + 1) / 2;
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// `∫_0^1 g(r) α(1-r)^{α-1} dr` through the substitution `t = (1-r)^α`,
/// which turns the weighted measure into `dt` on `[0, 1]`.
pub fn radial_weighted<G>(g: G, alpha: f64) -> Result<f64, QuadratureError>
where
    G: Fn(f64) -> f64,
{
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(QuadratureError::InvalidAlpha(alpha));
    }
    let inv = 1.0 / alpha;
    let res = adaptive_1d_with(
        |t| g(1.0 - t.powf(inv)),
        0.0,
        1.0,
        &[],
        &AdaptiveOptions {
            rel_tol: 1e-13,
            abs_tol: 1e-300,
            max_panels: 1 << 15,
        },
    )?;
    res.checked()
}

/// Fixed composite Gauss-Legendre rule for `α(1-r)^{α-1} dr`, written in the
/// variable `t = (1-r)^α` on `[t_lo, 1]`.
///
/// Panels are graded geometrically toward `t_lo` (the `r → 1` end). With
/// `t_lo = 0` the weights sum to one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialRule {
    pub alpha: f64,
    pub t_lo: f64,
    pub t_nodes: Vec<f64>,
    pub r_nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl RadialRule {
    pub fn new(alpha: f64, t_lo: f64, panels: usize, order: usize) -> Result<Self, QuadratureError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(QuadratureError::InvalidAlpha(alpha));
        }
        if !(0.0..1.0).contains(&t_lo) {
            return Err(QuadratureError::InvalidInterval { a: t_lo, b: 1.0 });
        }
        let (x, w) = gauss_legendre(order);
        let mut edges = vec![t_lo];
        for k in (0..panels).rev() {
            edges.push(t_lo + (1.0 - t_lo) * 0.5f64.powi(k as i32));
        }
        let mut t_nodes = Vec::new();
        let mut weights = Vec::new();
        for e in edges.windows(2) {
            let c = 0.5 * (e[0] + e[1]);
            let h = 0.5 * (e[1] - e[0]);
            for (xi, wi) in x.iter().zip(&w) {
                t_nodes.push(c + h * xi);
                weights.push(h * wi);
            }
        }
        let r_nodes = t_nodes.iter().map(|t| 1.0 - t.powf(1.0 / alpha)).collect();
        Ok(Self {
            alpha,
            t_lo,
            t_nodes,
            r_nodes,
            weights,
        })
    }

    pub fn integrate_samples(&self, samples: &[f64]) -> f64 {
        let terms: Vec<f64> = samples.iter().zip(&self.weights).map(|(s, w)| s * w).collect();
        pairwise_sum(&terms)
    }
}

/// Largest `1 - r` cutoff the rule must respect translated into `t`.
pub fn radial_t_cutoff(alpha: f64, min_clearance: f64) -> f64 {
    min_clearance.powf(alpha)
}

/// Fourier coefficients `c_k = (1/n) Σ_j s_j e^{-ikθ_j}` of samples on a
/// uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    grid: UniformAngularGrid,
    raw: Vec<Complex64>,
}

impl FourierCoefficients {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coefficient of `e^{ikθ}` for `|k| ≤ n/2`. The two Nyquist indices
    /// `±n/2` alias the same bin and differ only by their phase convention.
    pub fn get(&self, k: i64) -> Complex64 {
        let n = self.grid.len() as i64;
        assert!(k.abs() <= n / 2, "coefficient index {k} outside |k| <= {}", n / 2);
        let bin = k.rem_euclid(n) as usize;
        // θ_j = -π + (j + s)Δ, so e^{-ikθ_j} = e^{ik(π - sΔ)} e^{-2πijk/n}
        let phase = k as f64 * (PI - self.grid.offset() * self.grid.spacing());
        self.raw[bin] * Complex64::from_polar(1.0, phase)
    }

    /// Band-limited trigonometric interpolant at `θ`, with the Nyquist term split
    /// evenly between `±n/2`.
    pub fn evaluate(&self, theta: f64) -> Complex64 {
        let half = self.grid.len() as i64 / 2;
        let mut terms = Vec::with_capacity(self.grid.len() + 1);
        for k in -half..=half {
            let mut term = self.get(k) * Complex64::from_polar(1.0, k as f64 * theta);
            if k.abs() == half {
                term *= 0.5;
            }
            terms.push(term);
        }
        pairwise_sum_complex(&terms)
    }
}

pub fn fourier_coefficients(
    samples: &[Complex64],
    grid: &UniformAngularGrid,
) -> Result<FourierCoefficients, QuadratureError> {
    if samples.len() != grid.len() {
        return Err(QuadratureError::InvalidGridSize(samples.len()));
    }
    if let Some((index, s)) = samples.iter().enumerate().find(|(_, s)| !(s.re.is_finite() && s.im.is_finite())) {
        return Err(QuadratureError::NonFiniteSample {
            index,
            theta: grid.node(index),
            value: if s.re.is_finite() { s.im } else { s.re },
        });
    }
    let mut buf = samples.to_vec();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    let scale = 1.0 / grid.len() as f64;
    for c in buf.iter_mut() {
        *c *= scale;
    }
    Ok(FourierCoefficients { grid: *grid, raw: buf })
}

/// Circular convolution `out_m = Σ_j a_j b_{(m-j) mod n}` via FFT.
pub fn circular_convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fa = a.to_vec();
    let mut fb = b.to_vec();
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let scale = 1.0 / n as f64;
    fa.iter().map(|c| c * scale).collect()
}
