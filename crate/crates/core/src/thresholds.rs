//! Convergence thresholds of the `h_β` family.
//!
//! Each boundary functional reduces near `θ = 0⁺` to a one-dimensional
//! integrand whose tail behaves like `1/(θ log^p(γ/θ))`. Everything here is
//! computed in the depth variable `s = log(γ/θ)`, where `dθ/θ = -ds` and the
//! tail becomes `∫ s^{-p} ds`; `θ` itself is never formed, so depths far
//! beyond the double-precision range of `θ` are reachable.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::boundary::{BoundaryError, HBetaParams};
use crate::quadrature::{adaptive_1d_with, AdaptiveOptions, QuadratureError};
use crate::report::fmt_f64;

/// Largest depth `s = log(γ/θ)` the truncated integrals accept.
pub const MAX_DEPTH: f64 = 1e6;
/// Default number of depth doublings.
pub const DEFAULT_DEPTH: usize = 6;
/// Classifier thresholds on the increment ratios.
pub const CONVERGENT_MAX_RATIO: f64 = 0.9;
pub const DIVERGENT_MIN_RATIO: f64 = 0.98;
/// Distance in `β` from a threshold below which a verdict is not expected to
/// be robust.
pub const BETA_MARGIN: f64 = 0.15;

#[derive(Debug, Error)]
pub enum ThresholdError {
    #[error("depth {depth} exceeds the quadrature budget (max depth s = {max})")]
    TooDeep { depth: f64, max: f64 },
    #[error("cutoff epsilon = {0} must lie in (0, pi/2]")]
    Epsilon(f64),
    #[error("classifier needs at least 4 doublings, got {0}")]
    Depth(usize),
    #[error("unknown functional `{0}` (expected N, D or C)")]
    UnknownFunctional(String),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// The three boundary functionals whose finiteness separates on `h_β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Functional {
    /// `N_α(h_β)`, finite iff `β > 1/2`.
    N,
    /// `D_α(O_{h_β})` through `n_α`, finite iff `β > 1 - α/2`.
    D,
    /// `C_α(h_β)`, finite iff `β > 1`.
    C,
}

impl Functional {
    pub const ALL: [Functional; 3] = [Functional::N, Functional::D, Functional::C];

    /// Critical `β`: the functional is finite exactly for `β` above it.
    pub fn threshold(self, alpha: f64) -> f64 {
        match self {
            Functional::N => 0.5,
            Functional::D => 1.0 - 0.5 * alpha,
            Functional::C => 1.0,
        }
    }

    /// Effective log-exponent `p` of the reduced tail `s^{-p}`.
    pub fn exponent(self, alpha: f64, beta: f64) -> f64 {
        match self {
            Functional::N => 2.0 * beta,
            Functional::D => 2.0 * beta - 1.0 + alpha,
            Functional::C => 2.0 * beta - 1.0,
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Functional::N => "N",
            Functional::D => "D",
            Functional::C => "C",
        };
        f.write_str(s)
    }
}

impl FromStr for Functional {
    type Err = ThresholdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "N" | "n" => Ok(Functional::N),
            "D" | "d" => Ok(Functional::D),
            "C" | "c" => Ok(Functional::C),
            other => Err(ThresholdError::UnknownFunctional(other.to_string())),
        }
    }
}

/// Dominant one-dimensional integrand of a functional on `h_β`:
///
/// * N: `(h_β(θ) - c₀)² θ^{α-1}`
/// * D: `h_β²(θ) (log(h_β(θ)/c₀)/θ)^{1-α}`
/// * C: `h_β²(θ) log(h_β(θ)/c₀) θ^{α-1}`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReducedIntegrand {
    pub functional: Functional,
    pub params: HBetaParams,
    pub p: f64,
}

impl ReducedIntegrand {
    pub fn new(functional: Functional, alpha: f64, beta: f64) -> Result<Self, ThresholdError> {
        let params = HBetaParams::new(alpha, beta)?;
        Ok(Self {
            functional,
            params,
            p: functional.exponent(alpha, beta),
        })
    }

    /// `log(h_β/c₀)` at depth `s`; at least `log 2` on `(0, π)`.
    fn log_ratio(&self, s: f64) -> f64 {
        self.params.log_value_at_depth(s) - self.params.c0.ln()
    }

    /// Log of `θ·integrand(θ)` at `θ = γe^{-s}`, i.e. of the integrand in the
    /// depth variable. Here `h_β² θ^α = s^{-2β}`.
    pub fn log_depth_integrand(&self, s: f64) -> f64 {
        let base = -2.0 * self.params.beta * s.ln();
        let lr = self.log_ratio(s);
        match self.functional {
            // (h - c₀)² θ^α = s^{-2β}(1 - c₀/h)²
            Functional::N => base + 2.0 * (-(-lr).exp()).ln_1p(),
            Functional::D => base + (1.0 - self.params.alpha) * lr.ln(),
            Functional::C => base + lr.ln(),
        }
    }

    /// The integrand in `θ` on `(0, π/2]`.
    pub fn eval(&self, theta: f64) -> f64 {
        let s = self.params.log_gamma() - theta.ln();
        (self.log_depth_integrand(s) - theta.ln()).exp()
    }
}

/// Either a reduced `h_β` integrand or the pure model `1/(θ log^p(γ/θ))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailIntegrand {
    Reduced(ReducedIntegrand),
    PureModel { p: f64, gamma: f64 },
}

impl TailIntegrand {
    pub fn pure(p: f64, gamma: f64) -> Self {
        TailIntegrand::PureModel { p, gamma }
    }

    pub fn log_gamma(&self) -> f64 {
        match self {
            TailIntegrand::Reduced(r) => r.params.log_gamma(),
            TailIntegrand::PureModel { gamma, .. } => gamma.ln(),
        }
    }

    pub fn p(&self) -> f64 {
        match self {
            TailIntegrand::Reduced(r) => r.p,
            TailIntegrand::PureModel { p, .. } => *p,
        }
    }

    /// Depth of the fixed outer cutoff `θ = π/2`.
    pub fn outer_depth(&self) -> f64 {
        self.log_gamma() - (0.5 * PI).ln()
    }

    /// The integrand as a function of `θ ∈ (0, π/2]`.
    pub fn eval_theta(&self, theta: f64) -> f64 {
        match self {
            TailIntegrand::Reduced(r) => r.eval(theta),
            TailIntegrand::PureModel { p, gamma } => 1.0 / (theta * (gamma / theta).ln().powf(*p)),
        }
    }

    fn depth_integrand(&self, s: f64) -> f64 {
        match self {
            TailIntegrand::Reduced(r) => r.log_depth_integrand(s).exp(),
            TailIntegrand::PureModel { p, .. } => s.powf(-p),
        }
    }

    /// `∫ F(s) ds` over `[s_a, s_b]`: closed form for pure models, adaptive
    /// quadrature otherwise.
    pub fn depth_integral(&self, s_a: f64, s_b: f64) -> Result<f64, ThresholdError> {
        for d in [s_a, s_b] {
            if !(d <= MAX_DEPTH) {
                return Err(ThresholdError::TooDeep { depth: d, max: MAX_DEPTH });
            }
        }
        if s_b <= s_a {
            return Ok(0.0);
        }
        if let TailIntegrand::PureModel { p, .. } = self {
            return Ok(if (*p - 1.0).abs() < 1e-15 {
                (s_b / s_a).ln()
            } else {
                (s_b.powf(1.0 - p) - s_a.powf(1.0 - p)) / (1.0 - p)
            });
        }
        // geometric breakpoints keep panels proportional to s
        let mut cuts = Vec::new();
        let mut c = s_a * 2.0;
        while c < s_b {
            cuts.push(c);
            c *= 2.0;
        }
        let res = adaptive_1d_with(
            |s| self.depth_integrand(s),
            s_a,
            s_b,
            &cuts,
            &AdaptiveOptions::with_rel_tol(1e-12),
        )?;
        Ok(res.checked()?)
    }
}

/// `∫_ε^{π/2} integrand dθ`, evaluated as a depth integral.
pub fn truncated_integral(integrand: &TailIntegrand, epsilon: f64) -> Result<f64, ThresholdError> {
    if !(epsilon > 0.0 && epsilon <= 0.5 * PI) {
        return Err(ThresholdError::Epsilon(epsilon));
    }
    let s_b = integrand.log_gamma() - epsilon.ln();
    integrand.depth_integral(integrand.outer_depth(), s_b)
}

/// `∫_ε^{π/2} integrand dθ` by adaptive quadrature directly in `θ`, with
/// geometric breakpoints toward `ε`; a check on the depth-variable route.
pub fn truncated_integral_in_theta(integrand: &TailIntegrand, epsilon: f64) -> Result<f64, ThresholdError> {
    if !(epsilon > 0.0 && epsilon <= 0.5 * PI) {
        return Err(ThresholdError::Epsilon(epsilon));
    }
    let mut cuts = Vec::new();
    let mut c = 0.5 * PI;
    while c > epsilon {
        cuts.push(c);
        c *= 0.25;
    }
    let res = adaptive_1d_with(
        |t| integrand.eval_theta(t),
        epsilon,
        0.5 * PI,
        &cuts,
        &AdaptiveOptions::with_rel_tol(1e-12),
    )?;
    Ok(res.checked()?)
}

/// `∫_{γe^{-depth}}^{π/2} integrand dθ` for cutoffs below the `f64` range.
pub fn truncated_integral_at_depth(integrand: &TailIntegrand, depth: f64) -> Result<f64, ThresholdError> {
    integrand.depth_integral(integrand.outer_depth(), depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceVerdict {
    pub verdict: Verdict,
    /// Depths `L_k = L₀·2^k`, `k = 0..=K`.
    pub depths: Vec<f64>,
    /// `Δ_k = I(L_{k+1}) - I(L_k)`.
    pub increments: Vec<f64>,
    /// `ρ_k = Δ_{k+1}/Δ_k`.
    pub ratios: Vec<f64>,
    /// Index of the first ratio the verdict is based on; earlier ratios still
    /// carry the pre-asymptotic regime and are reported only.
    pub first_tested: usize,
    pub diagnostic: Option<String>,
}

/// Classify `∫_0 integrand dθ` as convergent or divergent from the ratios of
/// successive dyadic depth increments. For an exact `s^{-p}` tail every ratio
/// is `2^{1-p}`.
pub fn classify_convergence(integrand: &TailIntegrand, depth: usize) -> Result<ConvergenceVerdict, ThresholdError> {
    if depth < 4 {
        return Err(ThresholdError::Depth(depth));
    }
    // L₀ = log(γ/(π/4))
    let l0 = integrand.log_gamma() - (0.25 * PI).ln();
    let depths: Vec<f64> = (0..=depth).map(|k| l0 * 2f64.powi(k as i32)).collect();
    let increments = depths
        .windows(2)
        .map(|w| integrand.depth_integral(w[0], w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let first_tested = ratios.len() - ratios.len().div_ceil(2);
    let mut out = ConvergenceVerdict {
        verdict: Verdict::Inconclusive,
        depths,
        increments,
        ratios,
        first_tested,
        diagnostic: None,
    };
    if let Some(k) = out.increments.iter().position(|d| !(d.is_finite() && *d > 1e-300)) {
        out.diagnostic = Some(format!(
            "increment {k} = {:e} is at or below the floating-point noise floor",
            out.increments[k]
        ));
        return Ok(out);
    }
    let tested = &out.ratios[first_tested..];
    if tested.iter().all(|&r| r <= CONVERGENT_MAX_RATIO) {
        out.verdict = Verdict::Convergent;
    } else if tested.iter().all(|&r| r >= DIVERGENT_MIN_RATIO) {
        out.verdict = Verdict::Divergent;
    } else {
        out.diagnostic = Some(format!(
            "tested ratios {tested:?} straddle the band ({CONVERGENT_MAX_RATIO}, {DIVERGENT_MIN_RATIO})"
        ));
    }
    Ok(out)
}

/// Verdict for a functional of `h_β` with the same `α` in the weight and in
/// the family.
pub fn classify_hbeta(functional: Functional, alpha: f64, beta: f64) -> Result<ConvergenceVerdict, ThresholdError> {
    classify_convergence(
        &TailIntegrand::Reduced(ReducedIntegrand::new(functional, alpha, beta)?),
        DEFAULT_DEPTH,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub quantity: Functional,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub verdict: Verdict,
    pub expected: Verdict,
    pub agree: bool,
    /// Whether `β` keeps the classifier margin from this row's threshold.
    pub within_margin: bool,
    pub ratios: Vec<f64>,
}

/// One row per `(functional, β)`, with the verdict expected from the closed
/// thresholds `β > 1/2`, `β > 1 - α/2`, `β > 1`.
pub fn threshold_table(
    alpha: f64,
    betas: &[f64],
    functionals: &[Functional],
    depth: usize,
) -> Result<Vec<ThresholdRow>, ThresholdError> {
    let cases: Vec<(Functional, f64)> = functionals
        .iter()
        .flat_map(|&f| betas.iter().map(move |&b| (f, b)))
        .collect();
    cases
        .par_iter()
        .map(|&(functional, beta)| {
            let integrand = ReducedIntegrand::new(functional, alpha, beta)?;
            let v = classify_convergence(&TailIntegrand::Reduced(integrand), depth)?;
            let threshold = functional.threshold(alpha);
            let expected = if beta > threshold {
                Verdict::Convergent
            } else {
                Verdict::Divergent
            };
            Ok(ThresholdRow {
                quantity: functional,
                alpha,
                beta,
                p: integrand.p,
                verdict: v.verdict,
                expected,
                agree: v.verdict == expected,
                within_margin: (beta - threshold).abs() >= BETA_MARGIN - 1e-9,
                ratios: v.ratios,
            })
        })
        .collect()
}

/// `quantity,alpha,beta,verdict,expected,agree` rows with a header line.
pub fn table_to_csv(rows: &[ThresholdRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["quantity", "alpha", "beta", "verdict", "expected", "agree"])?;
    for r in rows {
        w.write_record([
            r.quantity.to_string(),
            fmt_f64(r.alpha),
            fmt_f64(r.beta),
            r.verdict.to_string(),
            r.expected.to_string(),
            r.agree.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponents() {
        assert_eq!(ReducedIntegrand::new(Functional::N, 0.5, 0.75).unwrap().p, 1.5);
        assert_eq!(ReducedIntegrand::new(Functional::D, 0.5, 0.75).unwrap().p, 1.0);
        assert_eq!(ReducedIntegrand::new(Functional::C, 0.5, 1.5).unwrap().p, 2.0);
    }

    #[test]
    fn reduced_integrands_match_theta_forms() {
        // direct evaluation of the three displayed integrands in θ
        for (a, b) in [(0.5, 0.8), (0.3, 1.2)] {
            let p = HBetaParams::new(a, b).unwrap();
            for t in [1e-8f64, 1e-3, 0.2, 1.5] {
                let h = p.value(t);
                let c0 = p.c0;
                let n = (h - c0).powi(2) * t.powf(a - 1.0);
                let d = h * h * ((h / c0).ln() / t).powf(1.0 - a);
                let c = h * h * (h / c0).ln() * t.powf(a - 1.0);
                for (f, oracle) in [(Functional::N, n), (Functional::D, d), (Functional::C, c)] {
                    let got = ReducedIntegrand::new(f, a, b).unwrap().eval(t);
                    assert_relative_eq!(got, oracle, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn integrands_positive_and_decreasing_in_depth() {
        for f in Functional::ALL {
            let r = ReducedIntegrand::new(f, 0.5, 0.9).unwrap();
            let mut prev = f64::INFINITY;
            let mut s = r.params.log_gamma() - (0.5 * PI).ln();
            while s < 1e4 {
                let v = r.log_depth_integrand(s);
                assert!(v.is_finite() && v < prev, "{f} at s={s}");
                prev = v;
                s *= 1.3;
            }
        }
    }

    #[test]
    fn pure_model_closed_form() {
        let gamma = PI * 4f64.exp();
        let m = TailIntegrand::pure(2.0, gamma);
        let eps = 1e-4;
        let oracle = 1.0 / (gamma / (0.5 * PI)).ln() - 1.0 / (gamma / eps).ln();
        assert_relative_eq!(truncated_integral(&m, eps).unwrap(), oracle, max_relative = 1e-13);
        assert_eq!(truncated_integral(&m, 0.5 * PI).unwrap(), 0.0);
        for (p, eps) in [(0.5, 1e-3), (1.0, 1e-30), (3.0, 1e-100)] {
            let m = TailIntegrand::pure(p, gamma);
            let closed = truncated_integral(&m, eps).unwrap();
            assert_relative_eq!(truncated_integral_in_theta(&m, eps).unwrap(), closed, max_relative = 1e-10);
        }
        assert!(truncated_integral(&m, 0.0).is_err());
    }

    #[test]
    fn reduced_truncation_matches_theta_quadrature() {
        // oracle: integrate the θ form directly on [ε, π/2] with geometric cuts
        let r = ReducedIntegrand::new(Functional::C, 0.5, 1.3).unwrap();
        let eps = 1e-6;
        let cuts: Vec<f64> = (1..14).map(|k| eps * 3f64.powi(k)).filter(|&c| c < 0.5 * PI).collect();
        let oracle = adaptive_1d_with(|t| r.eval(t), eps, 0.5 * PI, &cuts, &AdaptiveOptions::with_rel_tol(1e-12))
            .unwrap()
            .value;
        let got = truncated_integral(&TailIntegrand::Reduced(r), eps).unwrap();
        assert_relative_eq!(got, oracle, max_relative = 1e-9);
    }

    #[test]
    fn truncation_monotone_and_depth_limit() {
        let m = TailIntegrand::Reduced(ReducedIntegrand::new(Functional::N, 0.5, 0.8).unwrap());
        let mut prev = 0.0;
        for e in [1.0, 1e-2, 1e-5, 1e-20, 1e-100, 1e-300] {
            let v = truncated_integral(&m, e).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(matches!(
            truncated_integral_at_depth(&m, 2.0 * MAX_DEPTH),
            Err(ThresholdError::TooDeep { .. })
        ));
    }

    #[test]
    fn classifier_pure_models() {
        let gamma = PI * 4f64.exp();
        for (p, expected) in [
            (0.5, Verdict::Divergent),
            (0.8, Verdict::Divergent),
            (1.0, Verdict::Divergent),
            (1.3, Verdict::Convergent),
            (2.0, Verdict::Convergent),
            (3.0, Verdict::Convergent),
        ] {
            let v = classify_convergence(&TailIntegrand::pure(p, gamma), 6).unwrap();
            assert_eq!(v.verdict, expected, "p = {p}: {:?}", v.ratios);
            for r in &v.ratios {
                assert_relative_eq!(*r, 2f64.powf(1.0 - p), max_relative = 1e-9);
            }
        }
        assert!(classify_convergence(&TailIntegrand::pure(2.0, gamma), 3).is_err());
    }

    #[test]
    fn theorem_examples() {
        let rows = threshold_table(0.5, &[0.3, 0.8], &[Functional::N], 6).unwrap();
        assert_eq!(rows[0].verdict, Verdict::Divergent);
        assert_eq!(rows[1].verdict, Verdict::Convergent);
        let rows = threshold_table(0.5, &[0.6, 0.9], &[Functional::D], 6).unwrap();
        assert_eq!(rows[0].verdict, Verdict::Divergent);
        assert_eq!(rows[1].verdict, Verdict::Convergent);
        let rows = threshold_table(0.5, &[0.8, 1.3], &[Functional::C], 6).unwrap();
        assert_eq!(rows[0].verdict, Verdict::Divergent);
        assert_eq!(rows[1].verdict, Verdict::Convergent);
        assert!(rows.iter().all(|r| r.agree && r.within_margin));
    }

    #[test]
    fn separation_triple() {
        let rows = threshold_table(0.5, &[0.9], &Functional::ALL, 6).unwrap();
        let v: Vec<Verdict> = rows.iter().map(|r| r.verdict).collect();
        assert_eq!(v, vec![Verdict::Convergent, Verdict::Convergent, Verdict::Divergent]);
    }

    #[test]
    fn verdicts_monotone_in_beta() {
        let betas: Vec<f64> = (1..=30).map(|k| 0.1 * k as f64).collect();
        for alpha in [0.2, 0.5, 0.8] {
            for f in Functional::ALL {
                let rows = threshold_table(alpha, &betas, &[f], 6).unwrap();
                let first_conv = rows.iter().position(|r| r.verdict == Verdict::Convergent);
                if let Some(k) = first_conv {
                    assert!(
                        rows[k..].iter().all(|r| r.verdict != Verdict::Divergent),
                        "{f} at alpha {alpha}: {:?}",
                        rows.iter().map(|r| r.verdict).collect::<Vec<_>>()
                    );
                }
                // inside the margin a verdict is never the wrong one; small α
                // slows the approach of ρ_k to 2^{1-p}, which can leave a row
                // Inconclusive at depth 6
                for r in rows.iter().filter(|r| r.within_margin) {
                    assert!(
                        r.agree || r.verdict == Verdict::Inconclusive,
                        "{f} alpha {alpha} beta {}: {:?}",
                        r.beta,
                        r.ratios
                    );
                    if alpha == 0.5 {
                        assert!(r.agree, "{f} beta {}: {:?}", r.beta, r.ratios);
                    }
                }
            }
        }
    }

    #[test]
    fn csv_output() {
        let rows = threshold_table(0.5, &[0.3], &[Functional::N], 6).unwrap();
        let csv = table_to_csv(&rows).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("quantity,alpha,beta,verdict,expected,agree"));
        assert!(lines.next().unwrap().starts_with("N,5.0000000000000000e-1,"));
    }
}
