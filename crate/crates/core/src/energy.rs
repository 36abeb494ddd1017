//! The weighted Dirichlet energy
//! `D_α(f) = (1/π)∫_𝔻 |f′|² (1-|z|)^α dA` along independent routes: area
//! quadrature, the exact Parseval sum, boundary double integrals of Douglas
//! type, and the slice and Cauchy–Riemann forms that only see `|f|` and
//! `∂v/∂θ`.
//!
//! At `α = 0` the area, Parseval and Douglas values are equal. For `α > 0`
//! the Douglas, slice and Cauchy–Riemann routes are only comparable to `D_α`,
//! so reports carry their ratios rather than asserting equality.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::boundary::BoundaryFunction;
use crate::outer::{OuterError, OuterFunction, TaylorSeries};
use crate::quadrature::{
    adaptive_1d_with, chord, pairwise_sum, radial_weighted, AdaptiveOptions, QuadratureError, RadialRule,
    UniformAngularGrid,
};
use crate::report::Quantity;

/// Offsets (in grid spacings) of the two node sets of the staggered tensor
/// grid. Their difference is half a spacing, so `θ - φ` never vanishes.
pub const THETA_OFFSET: f64 = 0.125;
pub const PHI_OFFSET: f64 = 0.625;

/// Series tails heavier than this (relative to the ℓ² norm of the
/// coefficients) flag the area route as unconverged.
const SERIES_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("weight exponent alpha = {0} outside the admissible range")]
    Alpha(f64),
    #[error("slice radius {0} outside [0, 1)")]
    Radius(f64),
    #[error("non-finite trace value at node {0}")]
    NonFiniteTrace(usize),
    #[error("trace sets have {theta} and {phi} nodes")]
    TraceShape { theta: usize, phi: usize },
    #[error(transparent)]
    Outer(#[from] OuterError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

fn check_alpha(alpha: f64) -> Result<(), EnergyError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(EnergyError::Alpha(alpha));
    }
    Ok(())
}

/// `B(n, b)` for integer `n ≥ 1` by `B(1, b) = 1/b`, `B(a+1, b) = B(a, b)·a/(a+b)`.
pub fn beta_int(n: usize, b: f64) -> f64 {
    let mut v = 1.0 / b;
    for a in 1..n {
        v *= a as f64 / (a as f64 + b);
    }
    v
}

/// `w_n = n²·2B(2n, α+1)`, the exact weight of `|f̂(n)|²` in `D_α`, for
/// `n = 0..len`.
pub fn parseval_weights(len: usize, alpha: f64) -> Vec<f64> {
    let b = alpha + 1.0;
    let mut out = Vec::with_capacity(len);
    if len == 0 {
        return out;
    }
    out.push(0.0);
    // B(2n, b) advanced two steps at a time
    let mut beta = 1.0 / b * (1.0 / (1.0 + b)); // B(2, b)
    for n in 1..len {
        if n > 1 {
            let a = (2 * n - 2) as f64;
            beta *= a / (a + b) * (a + 1.0) / (a + 1.0 + b);
        }
        out.push((n * n) as f64 * 2.0 * beta);
    }
    out
}

/// `Σ_{n≥1} n²|f̂(n)|²·2B(2n, α+1)`.
pub fn energy_parseval_exact(series: &TaylorSeries, alpha: f64) -> Result<f64, EnergyError> {
    check_alpha(alpha)?;
    Ok(parseval_partial(series, alpha, series.len()))
}

/// The exact Parseval sum over the first `len` coefficients.
pub fn parseval_partial(series: &TaylorSeries, alpha: f64, len: usize) -> f64 {
    let len = len.min(series.len());
    let w = parseval_weights(len, alpha);
    let terms: Vec<f64> = series.coefficients[..len]
        .iter()
        .zip(&w)
        .map(|(c, w)| c.norm_sqr() * w)
        .collect();
    pairwise_sum(&terms)
}

/// `Σ_{n≥1} |f̂(n)|² (1+n)^{1-α}`, comparable to but not equal to `D_α`.
/// Defined for `0 ≤ α ≤ 1`.
pub fn energy_parseval_equiv(series: &TaylorSeries, alpha: f64) -> Result<f64, EnergyError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EnergyError::Alpha(alpha));
    }
    let terms: Vec<f64> = series
        .coefficients
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, c)| c.norm_sqr() * (1.0 + n as f64).powf(1.0 - alpha))
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `(1/π)∫_𝔻 |f′|²(1-|z|)^α dA` by an angular trapezoid rule (exact for the
/// series' degree) times adaptive radial quadrature. Flagged unconverged
/// when the series tail or the radial quadrature is not under control.
pub fn energy_area(series: &TaylorSeries, alpha: f64) -> Result<Quantity, EnergyError> {
    check_alpha(alpha)?;
    let deriv = series.derivative();
    if deriv.iter().all(|c| c.norm() == 0.0) {
        return Ok(Quantity::finite(0.0));
    }
    let m = (2 * deriv.len()).next_power_of_two().max(8);
    let fft = FftPlanner::new().plan_fft_inverse(m);
    // mean of |f′(re^{iθ})|² over the circle
    let ring = |r: f64| -> f64 {
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let mut rk = 1.0;
        for (k, c) in deriv.iter().enumerate() {
            buf[k] = c * rk;
            rk *= r;
            if rk == 0.0 {
                break;
            }
        }
        fft.process(&mut buf);
        pairwise_sum(&buf.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()) / m as f64
    };
    // (1/π)·2π·∫ ring(r) (1-r)^α r dr
    let res = adaptive_1d_with(
        |r| 2.0 * ring(r) * (1.0 - r).powf(alpha) * r,
        0.0,
        1.0,
        &[0.5, 0.9, 0.99],
        &AdaptiveOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_panels: 1 << 12,
        },
    )?;
    let norm = pairwise_sum(&series.coefficients.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>()).sqrt();
    if res.converged && series.truncation_error <= SERIES_TOLERANCE * norm {
        Ok(Quantity::finite(res.value))
    } else {
        Ok(Quantity::unconverged(res.value))
    }
}

/// Boundary values of `f` on the two node sets of the staggered `n`-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub n: usize,
    /// `f` at `θ_k = -π + (k + 1/8)·2π/n`.
    pub theta: Vec<Complex64>,
    /// `f` at `φ_k = -π + (k + 5/8)·2π/n`.
    pub phi: Vec<Complex64>,
    /// Radius the trace was read at; `None` for exact boundary values.
    pub radius: Option<f64>,
}

impl BoundaryTrace {
    pub fn theta_grid(n: usize) -> Result<UniformAngularGrid, QuadratureError> {
        UniformAngularGrid::with_offset(n, THETA_OFFSET)
    }

    pub fn phi_grid(n: usize) -> Result<UniformAngularGrid, QuadratureError> {
        UniformAngularGrid::with_offset(n, PHI_OFFSET)
    }

    /// Exact boundary values of a function defined on the closed disk.
    pub fn from_fn<F: Fn(Complex64) -> Complex64>(n: usize, f: F) -> Result<Self, EnergyError> {
        let tg = Self::theta_grid(n)?;
        let pg = Self::phi_grid(n)?;
        let eval = |g: &UniformAngularGrid| g.nodes().iter().map(|&t| f(Complex64::from_polar(1.0, t))).collect();
        Self {
            n,
            theta: eval(&tg),
            phi: eval(&pg),
            radius: None,
        }
        .validated()
    }

    pub fn from_series(series: &TaylorSeries, n: usize) -> Result<Self, EnergyError> {
        Self::from_fn(n, |z| series.eval(z))
    }

    /// Boundary values of `O_h`: exact when the outer function has a closed
    /// form, otherwise the trace on `|z| = 1 - 8/n`.
    pub fn from_outer(outer: &OuterFunction, n: usize) -> Result<Self, EnergyError> {
        let h = outer.boundary();
        if h.has_closed_outer() {
            return Self::from_fn(n, |z| h.closed_outer(z).expect("closed form checked"));
        }
        let radius = 1.0 - 8.0 / n as f64;
        let n_log = outer.grid().len();
        if n_log < n {
            return Err(EnergyError::TraceShape { theta: n, phi: n_log });
        }
        let q = (n_log / n) as f64;
        let read = |offset: f64| -> Result<Vec<Complex64>, EnergyError> {
            // θ = -π + (k + offset)·2π/n = -π + (kq + offset·q)·2π/n_log
            let pos = offset * q;
            let samples = outer.circle(radius, pos.fract())?;
            let start = pos.floor() as usize;
            Ok(samples.subsample(start, n_log / n).1)
        };
        Self {
            n,
            theta: read(THETA_OFFSET)?,
            phi: read(PHI_OFFSET)?,
            radius: Some(radius),
        }
        .validated()
    }

    fn validated(self) -> Result<Self, EnergyError> {
        if self.theta.len() != self.n || self.phi.len() != self.n {
            return Err(EnergyError::TraceShape {
                theta: self.theta.len(),
                phi: self.phi.len(),
            });
        }
        if let Some(j) = self
            .theta
            .iter()
            .chain(&self.phi)
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(EnergyError::NonFiniteTrace(j));
        }
        Ok(self)
    }
}

/// `∬ |f(θ) - f(φ)|² / |e^{iφ} - e^{iθ}|^{2-α} dθ dφ` on the staggered grid,
/// without any prefactor.
pub fn douglas_double_integral(trace: &BoundaryTrace, alpha: f64) -> Result<f64, EnergyError> {
    check_alpha(alpha)?;
    let n = trace.n;
    let spacing = 2.0 * PI / n as f64;
    // φ_j - θ_k = (j - k + 1/2)·spacing
    let kernel: Vec<f64> = (0..n)
        .map(|d| chord(0.0, (d as f64 + PHI_OFFSET - THETA_OFFSET) * spacing).powf(alpha - 2.0))
        .collect();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let fk = trace.theta[k];
            let terms: Vec<f64> = (0..n)
                .map(|j| (fk - trace.phi[j]).norm_sqr() * kernel[(j + n - k) % n])
                .collect();
            pairwise_sum(&terms)
        })
        .collect();
    Ok(pairwise_sum(&rows) * spacing * spacing)
}

/// Douglas route: `(1/4π²)·∬…` at `α = 0` (equal to `D(f)`), the bare
/// double integral for `α > 0` (only comparable to `D_α`).
pub fn energy_douglas(trace: &BoundaryTrace, alpha: f64) -> Result<f64, EnergyError> {
    let raw = douglas_double_integral(trace, alpha)?;
    Ok(if alpha == 0.0 { raw / (4.0 * PI * PI) } else { raw })
}

/// `D(f_r) = Σ n r^{2n} |f̂(n)|²`.
pub fn slice_energy_sum(series: &TaylorSeries, r: f64) -> Result<f64, EnergyError> {
    if !(0.0..1.0).contains(&r) {
        return Err(EnergyError::Radius(r));
    }
    Ok(slice_sum_unchecked(series, r))
}

// also used at r = 1, which the radial substitution can round onto
fn slice_sum_unchecked(series: &TaylorSeries, r: f64) -> f64 {
    let r2 = r * r;
    let mut p = 1.0;
    let terms: Vec<f64> = series
        .coefficients
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, c)| {
            p *= r2;
            n as f64 * p * c.norm_sqr()
        })
        .collect();
    pairwise_sum(&terms)
}

/// `D(f_r) = (1/2π)∫ |O_h(re^{iθ})|² ∂_θ v_h(re^{iθ}) dθ`, which uses only the
/// modulus data through `O_h` and the angular derivative of `v_h`.
pub fn slice_energy_cr(outer: &OuterFunction, r: f64) -> Result<f64, EnergyError> {
    if !(0.0..1.0).contains(&r) {
        return Err(EnergyError::Radius(r));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let c = outer.circle(r, 0.0)?;
    let terms: Vec<f64> = c
        .log_outer
        .iter()
        .zip(&c.dv_dtheta)
        .map(|(g, dv)| (2.0 * g.re).exp() * dv)
        .collect();
    Ok(pairwise_sum(&terms) / c.grid.len() as f64)
}

/// `α ∫_0^1 D(f_r)(1-r)^{α-1} dr/r`.
pub fn energy_slice_route(series: &TaylorSeries, alpha: f64) -> Result<f64, EnergyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EnergyError::Alpha(alpha));
    }
    // D(f_r)/r = Σ n r^{2n-1}|f̂(n)|², which extends by 0 to r = 0
    let g = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        slice_sum_unchecked(series, r.min(1.0)) / r
    };
    Ok(radial_weighted(g, alpha)?)
}

/// Value of the Cauchy–Riemann area route with its truncation record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrArea {
    pub value: f64,
    /// Mass of `α(1-r)^{α-1}dr` beyond the clearance radius, replaced by the
    /// slice value at that radius.
    pub truncated_mass: f64,
    pub clearance_radius: f64,
    pub radial_nodes: usize,
}

/// `(1/2π)∫_𝔻 |O_h|² ∂_θ v_h dA_α` with `dA_α = α(1-r)^{α-1} dr dθ`.
///
/// The integrand changes sign; no absolute values are taken. Radii beyond
/// the outer function's clearance limit are dropped and their measure is
/// charged to the outermost admissible slice.
pub fn energy_cr_area(outer: &OuterFunction, alpha: f64) -> Result<CrArea, EnergyError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(EnergyError::Alpha(alpha));
    }
    let r_c = outer.max_radius();
    let t_c = (1.0 - r_c).powf(alpha);
    let rule = RadialRule::new(alpha, t_c, 12, 10)?;
    let slices: Vec<f64> = rule
        .r_nodes
        .par_iter()
        .map(|&r| slice_energy_cr(outer, r.max(0.0)))
        .collect::<Result<_, _>>()?;
    let body = rule.integrate_samples(&slices);
    let tail = t_c * slice_energy_cr(outer, r_c)?;
    Ok(CrArea {
        value: body + tail,
        truncated_mass: t_c,
        clearance_radius: r_c,
        radial_nodes: rule.r_nodes.len(),
    })
}

/// Angular and radial resolution behind an [`EnergyReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridInfo {
    pub angular_n: usize,
    pub log_grid_n: usize,
    pub series_terms: usize,
    pub series_rho: Option<f64>,
    pub series_truncation_error: f64,
    pub trace_rho: Option<f64>,
    pub radial_nodes: Option<usize>,
    pub cr_truncated_mass: Option<f64>,
}

/// All routes for one `(h, α)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub alpha: f64,
    pub boundary: String,
    pub routes: BTreeMap<String, Quantity>,
    /// `a/b` for every ordered pair of routes with a non-zero denominator.
    pub ratios: BTreeMap<String, Option<f64>>,
    pub grid: GridInfo,
}

/// Taylor series of `O_h`: exact for polynomial closed forms, otherwise read
/// off circles inside the disk.
pub fn outer_series(outer: &OuterFunction) -> Result<TaylorSeries, EnergyError> {
    if let Some(c) = outer.boundary().closed_outer_coefficients() {
        return Ok(TaylorSeries::exact(c));
    }
    Ok(outer.taylor_series(outer.grid().len() / 2 - 1)?)
}

/// Every route for `h` at weight `α` on an `n`-point angular grid (the outer
/// function uses `4n` log nodes).
pub fn energy_report(h: &BoundaryFunction, alpha: f64, n: usize) -> Result<EnergyReport, EnergyError> {
    check_alpha(alpha)?;
    let outer = OuterFunction::new(h, 4 * n)?;
    let series = outer_series(&outer)?;
    let trace = BoundaryTrace::from_outer(&outer, n)?;

    let mut routes = BTreeMap::new();
    routes.insert("area".to_string(), energy_area(&series, alpha)?);
    routes.insert(
        "parseval_exact".to_string(),
        Quantity::finite(energy_parseval_exact(&series, alpha)?),
    );
    routes.insert(
        "parseval_equiv".to_string(),
        Quantity::finite(energy_parseval_equiv(&series, alpha)?),
    );
    routes.insert("douglas".to_string(), Quantity::finite(energy_douglas(&trace, alpha)?));
    let mut radial_nodes = None;
    let mut cr_truncated_mass = None;
    if alpha > 0.0 {
        routes.insert(
            "slice_route".to_string(),
            Quantity::finite(energy_slice_route(&series, alpha)?),
        );
        let cr = energy_cr_area(&outer, alpha)?;
        routes.insert("cr_area".to_string(), Quantity::finite(cr.value));
        radial_nodes = Some(cr.radial_nodes);
        cr_truncated_mass = Some(cr.truncated_mass);
    }

    let mut ratios = BTreeMap::new();
    for (a, qa) in &routes {
        for (b, qb) in &routes {
            if a != b {
                let r = qa.value / qb.value;
                ratios.insert(format!("{a}/{b}"), r.is_finite().then_some(r));
            }
        }
    }
    Ok(EnergyReport {
        alpha,
        boundary: h.to_string(),
        routes,
        ratios,
        grid: GridInfo {
            angular_n: n,
            log_grid_n: outer.grid().len(),
            series_terms: series.len(),
            series_rho: series.radius,
            series_truncation_error: series.truncation_error,
            trace_rho: trace.radius,
            radial_nodes,
            cr_truncated_mass,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::function::gamma::gamma;

    use crate::boundary::TrigPolynomial;

    fn beta_oracle(a: f64, b: f64) -> f64 {
        gamma(a) * gamma(b) / gamma(a + b)
    }

    fn exp_series(x: f64, len: usize) -> TaylorSeries {
        let mut c = Vec::with_capacity(len);
        let mut t = 1.0;
        for n in 0..len {
            if n > 0 {
                t *= x / n as f64;
            }
            c.push(t);
        }
        TaylorSeries::from_real(&c)
    }

    fn random_poly(rng: &mut ChaCha8Rng, degree: usize) -> TaylorSeries {
        TaylorSeries::exact(
            (0..=degree)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
    }

    #[test]
    fn beta_recurrence_matches_gamma() {
        for b in [1.0, 1.1, 1.5, 1.9] {
            for n in [1usize, 2, 5, 17] {
                assert_relative_eq!(beta_int(n, b), beta_oracle(n as f64, b), max_relative = 1e-12);
            }
        }
        let w = parseval_weights(40, 0.3);
        for (n, wn) in w.iter().enumerate().skip(1) {
            let oracle = (n * n) as f64 * 2.0 * beta_oracle(2.0 * n as f64, 1.3);
            assert_relative_eq!(*wn, oracle, max_relative = 1e-11);
            assert_relative_eq!(*wn, (n * n) as f64 * 2.0 * beta_int(2 * n, 1.3), max_relative = 1e-12);
        }
    }

    #[test]
    fn parseval_examples() {
        for n in 1..6 {
            assert_relative_eq!(
                energy_parseval_exact(&TaylorSeries::monomial(n), 0.0).unwrap(),
                n as f64,
                max_relative = 1e-14
            );
        }
        assert_relative_eq!(
            energy_parseval_exact(&TaylorSeries::monomial(1), 0.5).unwrap(),
            8.0 / 15.0,
            max_relative = 1e-14
        );
        // Σ n/(n!)² = I₁(2)
        let i1_2: f64 = (0..30).map(|k| 1.0 / (gamma(k as f64 + 1.0) * gamma(k as f64 + 2.0))).sum();
        assert_relative_eq!(
            energy_parseval_exact(&exp_series(1.0, 40), 0.0).unwrap(),
            i1_2,
            max_relative = 1e-13
        );
        assert!((i1_2 - 1.590637).abs() < 1e-6);
    }

    #[test]
    fn parseval_equiv_examples() {
        let z = TaylorSeries::monomial(1);
        assert_relative_eq!(energy_parseval_equiv(&z, 0.0).unwrap(), 2.0);
        assert_relative_eq!(energy_parseval_equiv(&z, 1.0).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let d = rng.gen_range(1..=16);
            let p = random_poly(&mut rng, d);
            for alpha in [0.0, 0.5] {
                let r = energy_parseval_equiv(&p, alpha).unwrap() / energy_parseval_exact(&p, alpha).unwrap();
                assert!((0.25..=4.0).contains(&r), "ratio {r}");
            }
        }
    }

    #[test]
    fn area_examples() {
        let z = TaylorSeries::monomial(1);
        assert_relative_eq!(energy_area(&z, 0.0).unwrap().value, 1.0, max_relative = 1e-10);
        let v = energy_area(&z, 0.5).unwrap();
        assert!(v.is_finite());
        assert_relative_eq!(v.value, 2.0 * beta_oracle(2.0, 1.5), max_relative = 1e-9);
        assert_relative_eq!(v.value, 8.0 / 15.0, max_relative = 1e-9);
        assert_eq!(energy_area(&TaylorSeries::from_real(&[3.0]), 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn area_matches_parseval_on_polynomials() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..5 {
            let p = random_poly(&mut rng, 8);
            for alpha in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9] {
                let a = energy_area(&p, alpha).unwrap().value;
                let e = energy_parseval_exact(&p, alpha).unwrap();
                assert_relative_eq!(a, e, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn douglas_examples() {
        let z = BoundaryTrace::from_series(&TaylorSeries::monomial(1), 64).unwrap();
        assert_relative_eq!(energy_douglas(&z, 0.0).unwrap(), 1.0, max_relative = 1e-12);
        let z2 = BoundaryTrace::from_series(&TaylorSeries::monomial(2), 64).unwrap();
        assert_relative_eq!(energy_douglas(&z2, 0.0).unwrap(), 2.0, max_relative = 1e-12);
        let c = BoundaryTrace::from_series(&TaylorSeries::from_real(&[2.0]), 64).unwrap();
        assert_eq!(energy_douglas(&c, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn exactness_cluster_alpha_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let d = rng.gen_range(1..=8);
            let p = random_poly(&mut rng, d);
            let e = energy_parseval_exact(&p, 0.0).unwrap();
            let a = energy_area(&p, 0.0).unwrap().value;
            let d = energy_douglas(&BoundaryTrace::from_series(&p, 256).unwrap(), 0.0).unwrap();
            assert_relative_eq!(a, e, max_relative = 5e-3);
            assert_relative_eq!(d, e, max_relative = 5e-3);
        }
    }

    #[test]
    fn slice_examples() {
        let f = TaylorSeries::from_real(&[1.0, 0.5]);
        assert_relative_eq!(slice_energy_sum(&f, 0.8).unwrap(), 0.16, max_relative = 1e-14);
        assert_eq!(slice_energy_sum(&f, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            slice_energy_sum(&TaylorSeries::monomial(1), 0.9).unwrap(),
            0.81,
            max_relative = 1e-14
        );

        let c = OuterFunction::new(&BoundaryFunction::constant(2.0).unwrap(), 256).unwrap();
        assert!(slice_energy_cr(&c, 0.5).unwrap().abs() < 1e-13);
        let p = OuterFunction::new(&BoundaryFunction::from_spec("poly:1+z/2").unwrap(), 512).unwrap();
        assert_relative_eq!(slice_energy_cr(&p, 0.8).unwrap(), 0.16, max_relative = 1e-9);
        // Σ n (0.25)ⁿ/(n!)² for O_h = e^z
        let e = OuterFunction::new(&BoundaryFunction::exp_cos(), 256).unwrap();
        let oracle: f64 = (1..30).map(|n| n as f64 * 0.25f64.powi(n) / gamma(n as f64 + 1.0).powi(2)).sum();
        assert_relative_eq!(slice_energy_cr(&e, 0.5).unwrap(), oracle, max_relative = 1e-10);
    }

    #[test]
    fn slice_cr_equals_slice_sum_on_corpus() {
        for h in [
            BoundaryFunction::exp_cos(),
            BoundaryFunction::sin_bump(0.3).unwrap(),
            BoundaryFunction::exp_trig(TrigPolynomial::from_flat(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1])),
        ] {
            let o = OuterFunction::new(&h, 1024).unwrap();
            let s = outer_series(&o).unwrap();
            for r in [0.3, 0.6, 0.9] {
                let a = slice_energy_cr(&o, r).unwrap();
                let b = slice_energy_sum(&s, r).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn slice_route_closed_form() {
        let z = TaylorSeries::monomial(1);
        for alpha in [0.1, 0.5, 0.9] {
            let v = energy_slice_route(&z, alpha).unwrap();
            assert_relative_eq!(v, 1.0 / (alpha + 1.0), max_relative = 1e-10);
            let exact = energy_parseval_exact(&z, alpha).unwrap();
            assert_relative_eq!(v / exact, (alpha + 2.0) / 2.0, max_relative = 1e-10);
        }
        // α → 0⁺ recovers D(z) = 1
        assert!((energy_slice_route(&z, 1e-6).unwrap() - 1.0).abs() < 1e-5);
        assert_eq!(energy_slice_route(&TaylorSeries::from_real(&[1.0]), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn cr_area_cases() {
        let c = OuterFunction::new(&BoundaryFunction::constant(3.0).unwrap(), 512).unwrap();
        assert!(energy_cr_area(&c, 0.5).unwrap().value.abs() < 1e-12);
        let h = BoundaryFunction::from_spec("poly:1+z/2").unwrap();
        let o = OuterFunction::new(&h, 1024).unwrap();
        let cr = energy_cr_area(&o, 0.5).unwrap();
        let area = energy_area(&outer_series(&o).unwrap(), 0.5).unwrap().value;
        let r = cr.value / area;
        assert!((0.25..=4.0).contains(&r), "ratio {r}");
        assert!(cr.truncated_mass > 0.0);
    }

    #[test]
    fn monotone_in_alpha_and_bands() {
        let corpus = [
            BoundaryFunction::exp_cos(),
            BoundaryFunction::sin_bump(0.5).unwrap(),
            BoundaryFunction::from_spec("poly:1+z/2").unwrap(),
            BoundaryFunction::step(1.0, 4.0).unwrap(),
        ];
        for h in &corpus {
            let o = OuterFunction::new(h, 2048).unwrap();
            let s = outer_series(&o).unwrap();
            let mut prev = f64::INFINITY;
            for alpha in [0.0, 0.25, 0.5, 0.75] {
                let d = energy_parseval_exact(&s, alpha).unwrap();
                assert!(d <= prev * (1.0 + 1e-12), "{h}: not monotone at {alpha}");
                prev = d;
            }
            for alpha in [0.1, 0.5, 0.9] {
                let area = energy_parseval_exact(&s, alpha).unwrap();
                let sr = energy_slice_route(&s, alpha).unwrap() / area;
                let cr = energy_cr_area(&o, alpha).unwrap().value / area;
                assert!((1.0 / 16.0..=16.0).contains(&sr), "{h} α={alpha}: slice ratio {sr}");
                assert!((1.0 / 16.0..=16.0).contains(&cr), "{h} α={alpha}: cr ratio {cr}");
                assert!(cr > 0.0);
            }
        }
    }

    #[test]
    fn report_structure() {
        let h = BoundaryFunction::from_spec("poly:1+z/2").unwrap();
        let r = energy_report(&h, 0.0, 128).unwrap();
        for key in ["area", "parseval_exact", "douglas"] {
            assert!((r.routes[key].value - 0.25).abs() < 1e-6, "{key}: {}", r.routes[key].value);
        }
        assert!(!r.routes.contains_key("cr_area"));
        let r = energy_report(&BoundaryFunction::constant(2.0).unwrap(), 0.5, 64).unwrap();
        for q in r.routes.values() {
            assert!(q.value.abs() < 1e-12);
        }
    }

    #[test]
    fn traces_from_computed_outer_match_closed_form() {
        let h = BoundaryFunction::sin_bump(0.4).unwrap();
        let o = OuterFunction::new(&h, 1024).unwrap();
        let t = BoundaryTrace::from_outer(&o, 256).unwrap();
        let rho = t.radius.unwrap();
        let tg = BoundaryTrace::theta_grid(256).unwrap();
        let pg = BoundaryTrace::phi_grid(256).unwrap();
        for k in [0usize, 31, 200] {
            let zt = Complex64::from_polar(rho, tg.node(k));
            let zp = Complex64::from_polar(rho, pg.node(k));
            assert!((t.theta[k] - o.eval(zt).unwrap()).norm() < 1e-12);
            assert!((t.phi[k] - o.eval(zp).unwrap()).norm() < 1e-12);
        }
    }
}
