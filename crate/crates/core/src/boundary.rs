//! Boundary modulus data `h ≥ 0` on the circle.
//!
//! A [`BoundaryFunction`] is either one of the closed-form families used by the
//! test corpus or a vector of samples on a [`UniformAngularGrid`]. Angles are
//! identified with `(-π, π]`.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{adaptive_1d_with, periodic_trapezoid, AdaptiveOptions, QuadratureError, UniformAngularGrid};

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("negative or non-finite boundary value {value} at theta = {theta}")]
    Negative { theta: f64, value: f64 },
    #[error("h vanishes at the reference angle {0}")]
    ZeroAtReference(f64),
    #[error("cannot parse boundary spec `{spec}`: {reason}")]
    Spec { spec: String, reason: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Map an angle into `(-π, π]`, leaving in-range values untouched.
pub fn wrap_angle(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        PI
    } else {
        y
    }
}

/// Real trigonometric polynomial `a₀ + Σ_k (a_k cos kθ + b_k sin kθ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrigPolynomial {
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPolynomial {
    /// Flat list `a₀, a₁, b₁, a₂, b₂, …`.
    pub fn from_flat(coeffs: &[f64]) -> Self {
        let constant = coeffs.first().copied().unwrap_or(0.0);
        let rest = coeffs.get(1..).unwrap_or(&[]);
        let cos = rest.iter().step_by(2).copied().collect::<Vec<_>>();
        let mut sin = rest.iter().skip(1).step_by(2).copied().collect::<Vec<_>>();
        sin.resize(cos.len(), 0.0);
        Self { constant, cos, sin }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = vec![self.constant];
        for (a, b) in self.cos.iter().zip(&self.sin) {
            out.push(*a);
            out.push(*b);
        }
        out
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let mut s = self.constant;
        for (k, (a, b)) in self.cos.iter().zip(&self.sin).enumerate() {
            let kt = (k + 1) as f64 * theta;
            s += a * kt.cos() + b * kt.sin();
        }
        s
    }

    /// Taylor coefficients of the analytic `g` with `Re g = p` on the circle and
    /// `Im g(0) = 0`.
    pub fn analytic_coefficients(&self) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(self.constant, 0.0)];
        g.extend(self.cos.iter().zip(&self.sin).map(|(a, b)| Complex64::new(*a, -*b)));
        g
    }

    fn sup_abs_bound(&self) -> f64 {
        self.constant.abs() + self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum::<f64>()
    }
}

/// Parameters of `h_β(θ) = θ^{-α/2} log^{-β}(γ/θ)` on `(0, π]`, constant
/// `c₀ = h_β(π)/2` on `(-π, 0)`, with `γ = π e^{2β/α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HBetaParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub c0: f64,
}

impl HBetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, BoundaryError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(BoundaryError::Parameter(format!("h_beta needs 0 < alpha < 1, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(BoundaryError::Parameter(format!("h_beta needs beta > 0, got {beta}")));
        }
        let gamma = PI * (2.0 * beta / alpha).exp();
        let at_pi = PI.powf(-0.5 * alpha) * (2.0 * beta / alpha).powf(-beta);
        Ok(Self {
            alpha,
            beta,
            gamma,
            c0: 0.5 * at_pi,
        })
    }

    pub fn log_gamma(&self) -> f64 {
        PI.ln() + 2.0 * self.beta / self.alpha
    }

    /// `log h_β(θ)` on `(0, π]`, computed without forming `θ^{-α/2}`.
    pub fn log_value_positive(&self, theta: f64) -> f64 {
        let s = self.log_gamma() - theta.ln();
        -0.5 * self.alpha * theta.ln() - self.beta * s.ln()
    }

    /// `log h_β` at `θ = γ e^{-s}`, valid for any `s ≥ log(γ/π)`.
    pub fn log_value_at_depth(&self, s: f64) -> f64 {
        -0.5 * self.alpha * (self.log_gamma() - s) - self.beta * s.ln()
    }

    pub fn value(&self, theta: f64) -> f64 {
        if theta > 0.0 {
            self.log_value_positive(theta).exp()
        } else if theta < 0.0 {
            self.c0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledBoundary {
    pub grid: UniformAngularGrid,
    pub values: Vec<f64>,
}

impl SampledBoundary {
    /// Periodic linear interpolation.
    pub fn interpolate(&self, theta: f64) -> f64 {
        let n = self.grid.len();
        let x = (theta + PI) / self.grid.spacing() - self.grid.offset();
        // grid nodes themselves return their sample exactly
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 {
            return self.values[(nearest as i64).rem_euclid(n as i64) as usize];
        }
        let j = x.floor();
        let frac = x - j;
        let i0 = (j as i64).rem_euclid(n as i64) as usize;
        let i1 = (i0 + 1) % n;
        (1.0 - frac) * self.values[i0] + frac * self.values[i1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Constant { value: f64 },
    ExpTrig { exponent: TrigPolynomial },
    /// `h = |p(e^{iθ})|` for a polynomial `p`.
    Polynomial { coefficients: Vec<Complex64> },
    SinBump { amplitude: f64 },
    Step { lo: f64, hi: f64 },
    HBeta { params: HBetaParams },
    Sampled { data: SampledBoundary },
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match self {
            Shape::Constant { value } => write!(f, "const:{value}"),
            Shape::ExpTrig { exponent } => write!(f, "exp-trig:{}", join(&exponent.to_flat())),
            Shape::Polynomial { coefficients } => {
                let re: Vec<f64> = coefficients.iter().map(|c| c.re).collect();
                write!(f, "poly:{}", join(&re))
            }
            Shape::SinBump { amplitude } => write!(f, "sin-bump:{amplitude}"),
            Shape::Step { lo, hi } => write!(f, "step:{lo},{hi}"),
            Shape::HBeta { params } => write!(f, "hbeta:{},{}", params.alpha, params.beta),
            Shape::Sampled { data } => write!(f, "sampled:{}", data.grid.len()),
        }
    }
}

/// Log-integrability status of `h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogIntegrability {
    Proved,
    NumericPass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogIntegrabilityReport {
    pub status: LogIntegrability,
    /// Estimate of `∫_{-π}^{π} log h`; `-∞` on failure.
    pub integral: f64,
    /// Arc `[start, end]` where `h` vanishes, when that is the failure cause.
    pub zero_arc: Option<(f64, f64)>,
}

/// Boundary modulus `θ ↦ scale · shape(θ - shift)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryFunction {
    shape: Shape,
    scale: f64,
    shift: f64,
    outer_closed_form: bool,
}

impl fmt::Display for BoundaryFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.shape)?;
        if self.scale != 1.0 {
            write!(f, " x{}", self.scale)?;
        }
        if self.shift != 0.0 {
            write!(f, " @{}", self.shift)?;
        }
        Ok(())
    }
}

impl BoundaryFunction {
    fn from_shape(shape: Shape) -> Self {
        let outer_closed_form = match &shape {
            Shape::Constant { .. } | Shape::ExpTrig { .. } => true,
            Shape::Polynomial { coefficients } => polynomial_zero_free_on_disk(coefficients),
            _ => false,
        };
        Self {
            shape,
            scale: 1.0,
            shift: 0.0,
            outer_closed_form,
        }
    }

    pub fn constant(c: f64) -> Result<Self, BoundaryError> {
        if !(c >= 0.0 && c.is_finite()) {
            return Err(BoundaryError::Negative { theta: 0.0, value: c });
        }
        Ok(Self::from_shape(Shape::Constant { value: c }))
    }

    /// `h = e^{p}` for a real trigonometric polynomial `p`.
    pub fn exp_trig(exponent: TrigPolynomial) -> Self {
        Self::from_shape(Shape::ExpTrig { exponent })
    }

    /// `h = e^{cos θ}`, whose outer function is `e^z`.
    pub fn exp_cos() -> Self {
        Self::exp_trig(TrigPolynomial::from_flat(&[0.0, 1.0, 0.0]))
    }

    pub fn polynomial_modulus(coefficients: Vec<Complex64>) -> Result<Self, BoundaryError> {
        if coefficients.iter().all(|c| c.norm() == 0.0) {
            return Err(BoundaryError::Parameter("zero polynomial".into()));
        }
        if coefficients.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(BoundaryError::Parameter("non-finite polynomial coefficient".into()));
        }
        Ok(Self::from_shape(Shape::Polynomial { coefficients }))
    }

    /// `h = 1 + a sin θ`, `|a| ≤ 1`.
    pub fn sin_bump(amplitude: f64) -> Result<Self, BoundaryError> {
        if !(amplitude.abs() <= 1.0) {
            return Err(BoundaryError::Parameter(format!(
                "sin-bump amplitude {amplitude} makes h negative"
            )));
        }
        Ok(Self::from_shape(Shape::SinBump { amplitude }))
    }

    /// `lo` on `(-π, 0]`, `hi` on `(0, π]`.
    pub fn step(lo: f64, hi: f64) -> Result<Self, BoundaryError> {
        for v in [lo, hi] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(BoundaryError::Negative { theta: 0.0, value: v });
            }
        }
        Ok(Self::from_shape(Shape::Step { lo, hi }))
    }

    pub fn hbeta(alpha: f64, beta: f64) -> Result<Self, BoundaryError> {
        Ok(Self::from_shape(Shape::HBeta {
            params: HBetaParams::new(alpha, beta)?,
        }))
    }

    pub fn sampled(grid: UniformAngularGrid, values: Vec<f64>) -> Result<Self, BoundaryError> {
        if values.len() != grid.len() {
            return Err(BoundaryError::Parameter(format!(
                "{} samples for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some((j, &v)) = values.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(BoundaryError::Negative {
                theta: grid.node(j),
                value: v,
            });
        }
        Ok(Self::from_shape(Shape::Sampled {
            data: SampledBoundary { grid, values },
        }))
    }

    /// Samples of `self` on `grid`, as a sampled boundary function.
    pub fn resample(&self, grid: &UniformAngularGrid) -> Result<Self, BoundaryError> {
        Self::sampled(*grid, grid.nodes().iter().map(|&t| self.eval(t)).collect())
    }

    /// `c · h`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        out
    }

    /// `θ ↦ h(θ - θ₀)`.
    pub fn rotated(&self, theta0: f64) -> Self {
        let mut out = self.clone();
        out.shift = wrap_angle(out.shift + theta0);
        out
    }

    /// The same function with the scale factor removed; quantities that only
    /// depend on ratios `h(θ)/h(φ)` are computed on it.
    pub fn unscaled(&self) -> Self {
        Self {
            scale: 1.0,
            ..self.clone()
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn hbeta_params(&self) -> Option<&HBetaParams> {
        match &self.shape {
            Shape::HBeta { params } => Some(params),
            _ => None,
        }
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self.shape, Shape::Sampled { .. })
    }

    pub fn sample_grid(&self) -> Option<&UniformAngularGrid> {
        match &self.shape {
            Shape::Sampled { data } => Some(&data.grid),
            _ => None,
        }
    }

    fn local(&self, theta: f64) -> f64 {
        if self.shift == 0.0 {
            wrap_angle(theta)
        } else {
            wrap_angle(wrap_angle(theta) - self.shift)
        }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let t = self.local(theta);
        let v = match &self.shape {
            Shape::Constant { value } => *value,
            Shape::ExpTrig { exponent } => exponent.eval(t).exp(),
            Shape::Polynomial { coefficients } => eval_poly(coefficients, Complex64::from_polar(1.0, t)).norm(),
            Shape::SinBump { amplitude } => 1.0 + amplitude * t.sin(),
            Shape::Step { lo, hi } => {
                if t > 0.0 {
                    *hi
                } else {
                    *lo
                }
            }
            Shape::HBeta { params } => params.value(t),
            Shape::Sampled { data } => data.interpolate(t),
        };
        self.scale * v
    }

    /// `log h(θ)`, evaluated in log form where the family allows it.
    pub fn log_eval(&self, theta: f64) -> f64 {
        let t = self.local(theta);
        let v = match &self.shape {
            Shape::ExpTrig { exponent } => exponent.eval(t),
            Shape::HBeta { params } if t > 0.0 => params.log_value_positive(t),
            _ => return self.eval(theta).ln(),
        };
        self.scale.ln() + v
    }

    /// Points in `(-π, π)` where `h` jumps or blows up.
    pub fn breakpoints(&self) -> Vec<f64> {
        let local: &[f64] = match &self.shape {
            Shape::Step { .. } => &[0.0, PI],
            Shape::HBeta { .. } => &[0.0, PI],
            _ => &[],
        };
        let mut out: Vec<f64> = local
            .iter()
            .map(|&p| wrap_angle(p + self.shift))
            .filter(|&p| p > -PI && p < PI)
            .collect();
        out.sort_by(f64::total_cmp);
        out
    }

    /// The outer function with modulus `h`, when it has a closed form.
    pub fn closed_outer(&self, z: Complex64) -> Option<Complex64> {
        if !self.outer_closed_form {
            return None;
        }
        let w = z * Complex64::from_polar(1.0, -self.shift);
        let v = match &self.shape {
            Shape::Constant { value } => Complex64::new(*value, 0.0),
            Shape::ExpTrig { exponent } => eval_poly(&exponent.analytic_coefficients(), w).exp(),
            Shape::Polynomial { coefficients } => {
                let p0 = coefficients[0];
                eval_poly(coefficients, w) * (p0.conj() / p0.norm())
            }
            _ => return None,
        };
        Some(v * self.scale)
    }

    /// Taylor coefficients of the closed-form outer function when it is a
    /// polynomial (constant and polynomial-modulus families).
    pub fn closed_outer_coefficients(&self) -> Option<Vec<Complex64>> {
        if !self.outer_closed_form {
            return None;
        }
        let base: Vec<Complex64> = match &self.shape {
            Shape::Constant { value } => vec![Complex64::new(*value, 0.0)],
            Shape::Polynomial { coefficients } => {
                let p0 = coefficients[0];
                let unit = p0.conj() / p0.norm();
                coefficients.iter().map(|c| c * unit).collect()
            }
            _ => return None,
        };
        Some(
            base.iter()
                .enumerate()
                .map(|(k, c)| c * Complex64::from_polar(self.scale, -(k as f64) * self.shift))
                .collect(),
        )
    }

    pub fn has_closed_outer(&self) -> bool {
        self.outer_closed_form
    }

    /// `‖h‖₂² = ∫_{-π}^{π} h² dθ`.
    pub fn norm_sq(&self) -> Result<f64, BoundaryError> {
        match &self.shape {
            Shape::Sampled { data } => Ok(periodic_trapezoid(|t| self.eval(t).powi(2), &data.grid)?),
            Shape::Constant { value } => Ok(2.0 * PI * (value * self.scale).powi(2)),
            _ => {
                let res = adaptive_1d_with(
                    |t| self.eval(t).powi(2),
                    -PI,
                    PI,
                    &self.breakpoints(),
                    &AdaptiveOptions::with_rel_tol(1e-11),
                )?;
                Ok(res.value)
            }
        }
    }

    pub fn to_csv(&self, grid: &UniformAngularGrid) -> Result<String, BoundaryError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["theta", "value"]).map_err(|e| BoundaryError::Csv(e.to_string()))?;
        for t in grid.nodes() {
            w.write_record([format!("{t:.16e}"), format!("{:.16e}", self.eval(t))])
                .map_err(|e| BoundaryError::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| BoundaryError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parse `theta,value` rows (one header line) on a uniform power-of-two grid.
    pub fn from_csv(text: &str) -> Result<Self, BoundaryError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut thetas = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| BoundaryError::Csv(e.to_string()))?;
            if rec.len() != 2 {
                return Err(BoundaryError::Csv(format!("expected 2 columns, found {}", rec.len())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| BoundaryError::Csv(format!("`{s}`: {e}")))
            };
            thetas.push(parse(&rec[0])?);
            values.push(parse(&rec[1])?);
        }
        let n = thetas.len();
        if n < 8 || !n.is_power_of_two() {
            return Err(BoundaryError::Csv(format!("{n} rows; need a power of two >= 8")));
        }
        let spacing = 2.0 * PI / n as f64;
        let offset = (thetas[0] + PI) / spacing;
        if !(-1e-9..1.0).contains(&offset) {
            return Err(BoundaryError::Csv(format!("first angle {} outside [-pi, -pi + spacing)", thetas[0])));
        }
        // snap the offset so that grids written by `to_csv` are reproduced exactly
        let snapped = (offset * 1048576.0).round() / 1048576.0;
        let grid = UniformAngularGrid::with_offset(n, snapped.max(0.0))?;
        for (j, &t) in thetas.iter().enumerate() {
            if (t - grid.node(j)).abs() > 1e-9 {
                return Err(BoundaryError::Csv(format!("row {j}: angle {t} is not on a uniform grid")));
            }
        }
        Self::sampled(grid, values)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, BoundaryError> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    /// Parse a builtin spec: `const:c`, `poly:<coeffs or expression>`, `expcos`,
    /// `exp-trig:a0,a1,b1,…`, `sin-bump:a`, `step:lo,hi`, `hbeta:α,β`,
    /// `csv:<path>`.
    pub fn from_spec(spec: &str) -> Result<Self, BoundaryError> {
        let err = |reason: &str| BoundaryError::Spec {
            spec: spec.to_string(),
            reason: reason.to_string(),
        };
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), a.trim()),
            None => (spec.trim(), ""),
        };
        let numbers = |n_expected: Option<usize>| -> Result<Vec<f64>, BoundaryError> {
            let v = args
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<f64>().map_err(|e| err(&e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            match n_expected {
                Some(k) if v.len() != k => Err(err(&format!("expected {k} numbers"))),
                _ => Ok(v),
            }
        };
        match name {
            "const" => Self::constant(numbers(Some(1))?[0]),
            "expcos" => Ok(Self::exp_cos()),
            "exp-trig" => Ok(Self::exp_trig(TrigPolynomial::from_flat(&numbers(None)?))),
            "sin-bump" => Self::sin_bump(numbers(Some(1))?[0]),
            "step" => {
                let v = numbers(Some(2))?;
                Self::step(v[0], v[1])
            }
            "hbeta" => {
                let v = numbers(Some(2))?;
                Self::hbeta(v[0], v[1])
            }
            "poly" => {
                let coeffs = if args.contains('z') {
                    parse_polynomial_expression(args).map_err(|r| err(&r))?
                } else {
                    numbers(None)?
                };
                if coeffs.is_empty() {
                    return Err(err("empty polynomial"));
                }
                Self::polynomial_modulus(coeffs.into_iter().map(|c| Complex64::new(c, 0.0)).collect())
            }
            "csv" => Self::from_csv_path(Path::new(args)),
            _ => Err(err("unknown boundary family")),
        }
    }
}

pub fn eval_poly(coefficients: &[Complex64], z: Complex64) -> Complex64 {
    coefficients.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Winding number of `p` around the unit circle is zero (no zeros in the
/// closed disk, up to sampling resolution).
fn polynomial_zero_free_on_disk(coefficients: &[Complex64]) -> bool {
    let n = 4096;
    let mut total = 0.0;
    let mut prev = eval_poly(coefficients, Complex64::new(1.0, 0.0));
    let mut min_mod = prev.norm();
    for j in 1..=n {
        let z = Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64);
        let cur = eval_poly(coefficients, z);
        min_mod = min_mod.min(cur.norm());
        total += (cur / prev).arg();
        prev = cur;
    }
    let scale = coefficients.iter().map(|c| c.norm()).sum::<f64>();
    min_mod > 1e-9 * scale && (total / (2.0 * PI)).round() == 0.0
}

/// Parse expressions such as `1+z/2`, `1 - 0.5z^2`, `3*z^4/2`.
fn parse_polynomial_expression(expr: &str) -> Result<Vec<f64>, String> {
    let cleaned: String = expr.chars().filter(|c| !c.is_whitespace()).collect();
    let mut terms = Vec::new();
    let mut start = 0;
    let bytes = cleaned.as_bytes();
    for i in 1..bytes.len() {
        if (bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'e' && bytes[i - 1] != b'E' && bytes[i - 1] != b'^' {
            terms.push(&cleaned[start..i]);
            start = i;
        }
    }
    terms.push(&cleaned[start..]);

    let mut coeffs: Vec<f64> = Vec::new();
    for raw in terms.into_iter().filter(|t| !t.is_empty()) {
        let (sign, body) = match raw.as_bytes()[0] {
            b'-' => (-1.0, &raw[1..]),
            b'+' => (1.0, &raw[1..]),
            _ => (1.0, raw),
        };
        let (body, divisor) = match body.split_once('/') {
            Some((b, d)) => (b, d.parse::<f64>().map_err(|e| format!("divisor `{d}`: {e}"))?),
            None => (body, 1.0),
        };
        let (coef, power) = match body.find('z') {
            Some(pos) => {
                let c = body[..pos].trim_end_matches('*');
                let c = if c.is_empty() {
                    1.0
                } else {
                    c.parse::<f64>().map_err(|e| format!("coefficient `{c}`: {e}"))?
                };
                let rest = &body[pos + 1..];
                let p = if rest.is_empty() {
                    1
                } else if let Some(e) = rest.strip_prefix('^') {
                    e.parse::<usize>().map_err(|e2| format!("exponent `{e}`: {e2}"))?
                } else {
                    return Err(format!("unexpected `{rest}` after z"));
                };
                (c, p)
            }
            None => (body.parse::<f64>().map_err(|e| format!("constant `{body}`: {e}"))?, 0),
        };
        if coeffs.len() <= power {
            coeffs.resize(power + 1, 0.0);
        }
        coeffs[power] += sign * coef / divisor;
    }
    Ok(coeffs)
}

/// `∫ log h` with a pass/fail verdict.
pub fn check_log_integrability(h: &BoundaryFunction) -> Result<LogIntegrabilityReport, BoundaryError> {
    let fail = |arc: Option<(f64, f64)>| LogIntegrabilityReport {
        status: LogIntegrability::Fail,
        integral: f64::NEG_INFINITY,
        zero_arc: arc,
    };
    if h.scale == 0.0 {
        return Ok(fail(Some((-PI, PI))));
    }
    match h.shape() {
        Shape::Sampled { data } => {
            let n = data.grid.len();
            if let Some(first) = data.values.iter().position(|&v| v == 0.0) {
                let mut last = first;
                while last + 1 < n && data.values[last + 1] == 0.0 {
                    last += 1;
                }
                return Ok(fail(Some((data.grid.node(first), data.grid.node(last)))));
            }
            let integral = periodic_trapezoid(|t| h.log_eval(t), &data.grid)?;
            Ok(LogIntegrabilityReport {
                status: LogIntegrability::NumericPass,
                integral,
                zero_arc: None,
            })
        }
        Shape::Constant { value } if *value == 0.0 => Ok(fail(Some((-PI, PI)))),
        Shape::Step { lo, hi } if *lo == 0.0 || *hi == 0.0 => {
            let arc = if *lo == 0.0 { (-PI, 0.0) } else { (0.0, PI) };
            Ok(fail(Some((wrap_angle(arc.0 + h.shift), wrap_angle(arc.1 + h.shift)))))
        }
        shape => {
            let res = adaptive_1d_with(
                |t| h.log_eval(t),
                -PI,
                PI,
                &h.breakpoints(),
                &AdaptiveOptions::with_rel_tol(1e-9),
            )?;
            let status = match shape {
                Shape::ExpTrig { exponent } if exponent.sup_abs_bound().is_finite() => LogIntegrability::Proved,
                // log|p| is integrable for any non-zero polynomial; sin-bump with
                // |a| ≤ 1 has at most a quadratic zero
                Shape::Polynomial { .. } | Shape::SinBump { .. } | Shape::Constant { .. } => LogIntegrability::Proved,
                Shape::Step { .. } | Shape::HBeta { .. } => LogIntegrability::Proved,
                _ if res.converged && res.value.is_finite() => LogIntegrability::NumericPass,
                _ => LogIntegrability::Fail,
            };
            Ok(LogIntegrabilityReport {
                status,
                integral: res.value,
                zero_arc: None,
            })
        }
    }
}

/// Partition of grid nodes by 2-comparability with `h(θ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelMasks {
    pub theta: f64,
    pub ratio: f64,
    /// `h(θ)/c < h(φ) < c·h(θ)`.
    pub comparable: Vec<usize>,
    /// `h(φ) ≥ c·h(θ)`.
    pub upper: Vec<usize>,
    /// `h(φ) ≤ h(θ)/c`.
    pub lower: Vec<usize>,
}

pub fn level_masks(
    h: &BoundaryFunction,
    theta: f64,
    grid: &UniformAngularGrid,
) -> Result<LevelMasks, BoundaryError> {
    level_masks_with_ratio(h, theta, grid, 2.0)
}

pub fn level_masks_with_ratio(
    h: &BoundaryFunction,
    theta: f64,
    grid: &UniformAngularGrid,
    ratio: f64,
) -> Result<LevelMasks, BoundaryError> {
    if !(ratio > 1.0) {
        return Err(BoundaryError::Parameter(format!("comparability ratio {ratio} must exceed 1")));
    }
    let ht = h.eval(theta);
    if !(ht > 0.0) {
        return Err(BoundaryError::ZeroAtReference(theta));
    }
    let mut masks = LevelMasks {
        theta,
        ratio,
        comparable: Vec::new(),
        upper: Vec::new(),
        lower: Vec::new(),
    };
    for (j, phi) in grid.nodes().into_iter().enumerate() {
        let hp = h.eval(phi);
        if hp >= ratio * ht {
            masks.upper.push(j);
        } else if hp <= ht / ratio {
            masks.lower.push(j);
        } else {
            masks.comparable.push(j);
        }
    }
    Ok(masks)
}
