//! The acceptance suite: ten numerical criteria with tolerances and runtime
//! budgets, shared by the `acceptance` test target and `dirlab selftest`.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::boundary::{BoundaryFunction, TrigPolynomial};
use crate::carleson::{
    carleson_identity_check, check_dauglas_bound, check_lower_bound_outer, mu_profile, n_alphas,
    theorem_decomposition, DeltaGrid, LambdaChoice,
};
use crate::corpus::{equivalence_corpus, random_polynomial, smooth_corpus};
use crate::energy::{
    douglas_double_integral, energy_area, energy_douglas, energy_parseval_exact, outer_series, slice_energy_cr,
    slice_energy_sum, BoundaryTrace,
};
use crate::outer::{OuterFunction, TaylorSeries};
use crate::thresholds::{
    classify_convergence, threshold_table, truncated_integral, truncated_integral_in_theta, Functional,
    TailIntegrand, Verdict,
};

/// Deliberate defects for checking that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Drop the `1/4π²` prefactor of the Douglas formula.
    DouglasPrefactor,
}

impl std::str::FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "douglas-prefactor" => Ok(Fault::DouglasPrefactor),
            other => Err(format!("unknown fault `{other}` (known: douglas-prefactor)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceOptions {
    /// Halve the grids where the criterion allows it.
    pub quick: bool,
    pub fault: Option<Fault>,
    /// Seed of the random polynomial corpus.
    pub seed: u64,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self {
            quick: false,
            fault: None,
            seed: 20240611,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
    pub budget_s: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{:>2}] {} ({:.2} s of {:.0} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_s,
            self.budget_s,
            self.detail
        )
    }
}

pub const CRITERIA: [(usize, &str, f64); 10] = [
    (1, "Douglas exactness", 20.0),
    (2, "Carleson identity", 20.0),
    (3, "cross-route exactness", 10.0),
    (4, "slice identity", 10.0),
    (5, "vanishing for small oscillation", 5.0),
    (6, "threshold trichotomy", 10.0),
    (7, "equivalence band", 60.0),
    (8, "interior lower bound", 20.0),
    (9, "weighted mu bound", 20.0),
    (10, "classifier calibration", 5.0),
];

type Outcome = Result<(bool, String), Box<dyn std::error::Error + Send + Sync>>;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

fn douglas(opts: &AcceptanceOptions) -> Outcome {
    let n = if opts.quick { 512 } else { 1024 };
    let mut worst: f64 = 0.0;
    for k in 1..=8 {
        let trace = BoundaryTrace::from_series(&TaylorSeries::monomial(k), n)?;
        let value = match opts.fault {
            Some(Fault::DouglasPrefactor) => douglas_double_integral(&trace, 0.0)?,
            None => energy_douglas(&trace, 0.0)?,
        };
        worst = worst.max(rel(value, k as f64));
    }
    Ok((worst <= 5e-3, format!("max relative error {worst:.3e} over z^1..z^8 on {n}^2 (tol 5e-3)")))
}

fn carleson_identity(opts: &AcceptanceOptions) -> Outcome {
    let n = if opts.quick { 512 } else { 1024 };
    let poly = BoundaryFunction::from_spec("poly:1+z/2")?;
    let a = carleson_identity_check(&poly, n)?;
    // D(e^{0.2z}) = Σ k (0.2^k/k!)²
    let mut series = 0.0;
    let mut c = 1.0;
    for k in 1..40 {
        c *= 0.2 / k as f64;
        series += k as f64 * c * c;
    }
    let e = carleson_identity_check(&BoundaryFunction::exp_trig(TrigPolynomial::from_flat(&[0.0, 0.2])), n)?;
    let errs = [rel(a.lhs, 0.25), rel(a.rhs, 0.25), rel(e.lhs, series), rel(e.rhs, series)];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok((
        worst <= 0.01,
        format!(
            "|1+z/2|: {:.6} vs {:.6}; e^(0.2cos): {:.7} vs {:.7} (series {series:.7}); max rel {worst:.2e} (tol 1e-2)",
            a.lhs, a.rhs, e.lhs, e.rhs
        ),
    ))
}

fn cross_route(opts: &AcceptanceOptions) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let polys: Vec<Vec<Complex64>> = (0..10).map(|_| random_polynomial(&mut rng, 8)).collect();
    let mut worst: f64 = 0.0;
    let mut unconverged = 0;
    for p in &polys {
        let s = TaylorSeries::exact(p.clone());
        for alpha in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let area = energy_area(&s, alpha)?;
            if !area.is_finite() {
                unconverged += 1;
            }
            worst = worst.max(rel(area.value, energy_parseval_exact(&s, alpha)?));
        }
    }
    let d = energy_area(&TaylorSeries::monomial(1), 0.5)?.value;
    let z_err = rel(d, 8.0 / 15.0);
    Ok((
        worst <= 1e-6 && z_err <= 1e-6 && unconverged == 0,
        format!("max area/Parseval rel {worst:.2e}; D_0.5(z) rel {z_err:.2e} (tol 1e-6)"),
    ))
}

fn slice_identity(_opts: &AcceptanceOptions) -> Outcome {
    let corpus = smooth_corpus();
    let errs = corpus
        .par_iter()
        .map(|h| -> Result<f64, Box<dyn std::error::Error + Send + Sync>> {
            let o = OuterFunction::new(h, 1024)?;
            let s = outer_series(&o)?;
            let mut w: f64 = 0.0;
            for r in [0.3, 0.6, 0.9] {
                w = w.max(rel(slice_energy_cr(&o, r)?, slice_energy_sum(&s, r)?));
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let worst = errs.iter().copied().fold(0.0, f64::max);
    Ok((
        worst <= 1e-6,
        format!("max rel {worst:.2e} over {} functions at r = 0.3, 0.6, 0.9 (tol 1e-6)", corpus.len()),
    ))
}

fn vanishing(opts: &AcceptanceOptions) -> Outcome {
    let n = if opts.quick { 128 } else { 256 };
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [
        BoundaryFunction::sin_bump(0.3)?,
        BoundaryFunction::exp_trig(TrigPolynomial::from_flat(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1])),
    ] {
        let mu = mu_profile(&h, n, &DeltaGrid::default())?;
        for alpha in [0.1, 0.5] {
            let (na, nt) = n_alphas(&h, &LambdaChoice::default(), alpha, n)?;
            ok &= na.value == 0.0 && nt.value == 0.0;
            parts.push(format!("{h} a={alpha}: ({}, {})", na.value, nt.value));
        }
        ok &= mu.is_identically_one();
    }
    Ok((ok, format!("{}; mu identically 1: {ok}", parts.join("; "))))
}

fn trichotomy(_opts: &AcceptanceOptions) -> Outcome {
    let cases = [
        (Functional::N, 0.3, Verdict::Divergent),
        (Functional::N, 0.8, Verdict::Convergent),
        (Functional::D, 0.6, Verdict::Divergent),
        (Functional::D, 0.9, Verdict::Convergent),
        (Functional::C, 0.8, Verdict::Divergent),
        (Functional::C, 1.3, Verdict::Convergent),
        // separation triple
        (Functional::N, 0.9, Verdict::Convergent),
        (Functional::D, 0.9, Verdict::Convergent),
        (Functional::C, 0.9, Verdict::Divergent),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (f, beta, expected) in cases {
        let row = &threshold_table(0.5, &[beta], &[f], 6)?[0];
        ok &= row.verdict == expected;
        parts.push(format!("{f}({beta})={:?}", row.verdict));
    }
    Ok((ok, parts.join(" ")))
}

fn equivalence(opts: &AcceptanceOptions) -> Outcome {
    let n = if opts.quick { 128 } else { 256 };
    let cases: Vec<(f64, BoundaryFunction)> = [0.1, 0.25, 0.5]
        .into_iter()
        .flat_map(|a| equivalence_corpus(a).into_iter().map(move |h| (a, h)))
        .collect();
    let results = cases
        .par_iter()
        .map(|(alpha, h)| -> Result<(f64, f64, bool, String), Box<dyn std::error::Error + Send + Sync>> {
            let d = theorem_decomposition(h, *alpha, n, &LambdaChoice::default())?;
            let d7 = theorem_decomposition(&h.scaled(7.0), *alpha, n, &LambdaChoice::default())?;
            let agree = d.finiteness_agree && d7.finiteness_agree && d.lhs.status == d7.lhs.status;
            let (r, scale_err) = match (d.ratio, d7.ratio) {
                (Some(a), Some(b)) => (a, rel(a, b)),
                (None, None) => (f64::NAN, 0.0),
                _ => (f64::NAN, f64::INFINITY),
            };
            Ok((r, scale_err, agree, format!("{h}@{alpha}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut ok = true;
    let (mut lo, mut hi, mut worst_scale) = (f64::INFINITY, 0.0f64, 0.0f64);
    let mut bad = Vec::new();
    for (r, s, agree, name) in &results {
        let in_band = r.is_nan() || (1e-3..=1e3).contains(r);
        if r.is_finite() {
            lo = lo.min(*r);
            hi = hi.max(*r);
        }
        worst_scale = worst_scale.max(*s);
        if !(in_band && *s <= 1e-8 && *agree) {
            ok = false;
            bad.push(name.clone());
        }
    }
    Ok((
        ok,
        format!(
            "{} cases; ratio range [{lo:.3e}, {hi:.3e}] (band [1e-3, 1e3]); max scale drift {worst_scale:.1e} (tol 1e-8){}",
            results.len(),
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join(", ")) }
        ),
    ))
}

fn lower_bound(opts: &AcceptanceOptions) -> Outcome {
    let n = if opts.quick { 128 } else { 256 };
    let smooth = smooth_corpus();
    let mut all: Vec<(bool, BoundaryFunction)> = smooth.into_iter().map(|h| (true, h)).collect();
    all.extend(equivalence_corpus(0.5).into_iter().map(|h| (false, h)));
    let res = all
        .par_iter()
        .map(|(smooth, h)| -> Result<(bool, f64, bool), Box<dyn std::error::Error + Send + Sync>> {
            let chk = check_lower_bound_outer(h, &mu_profile(h, n, &DeltaGrid::default())?)?;
            Ok((*smooth, chk.min_ratio, chk.holds()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let all_min = res.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let smooth_min = res.iter().filter(|r| r.0).map(|r| r.1).fold(f64::INFINITY, f64::min);
    let ok = res.iter().all(|r| r.2) && smooth_min >= 0.1;
    Ok((
        ok,
        format!("min ratio {all_min:.4} over {} functions (bound e^-41); smooth minimum {smooth_min:.4} (need >= 0.1)", res.len()),
    ))
}

fn mu_bound(opts: &AcceptanceOptions) -> Outcome {
    let n = if opts.quick { 128 } else { 256 };
    let corpus = smooth_corpus();
    let ratios = corpus
        .par_iter()
        .map(|h| -> Result<Vec<f64>, Box<dyn std::error::Error + Send + Sync>> {
            let mu = mu_profile(h, n, &DeltaGrid::default())?;
            [0.1, 0.5, 0.9]
                .into_iter()
                .map(|a| Ok(check_dauglas_bound(h, a, &mu)?.ratio))
                .collect()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let worst = ratios.iter().flatten().copied().fold(0.0, f64::max);
    Ok((
        worst <= 100.0 && ratios.iter().flatten().all(|r| r.is_finite()),
        format!("max ratio {worst:.4} over {} functions at alpha 0.1, 0.5, 0.9 (bound 100)", corpus.len()),
    ))
}

fn calibration(_opts: &AcceptanceOptions) -> Outcome {
    let gamma = PI * 4f64.exp();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for p in [0.5, 0.8, 1.0, 1.3, 2.0, 3.0] {
        let m = TailIntegrand::pure(p, gamma);
        let v = classify_convergence(&m, 6)?;
        let expected = if p > 1.0 { Verdict::Convergent } else { Verdict::Divergent };
        ok &= v.verdict == expected;
        parts.push(format!("p={p}:{:?}", v.verdict));
        for eps in [1e-3, 1e-12, 1e-60] {
            worst = worst.max(rel(truncated_integral_in_theta(&m, eps)?, truncated_integral(&m, eps)?));
        }
    }
    Ok((
        ok && worst <= 1e-8,
        format!("{}; max quadrature vs antiderivative rel {worst:.2e} (tol 1e-8)", parts.join(" ")),
    ))
}

/// Run one criterion by number (1–10).
pub fn run_criterion(id: usize, opts: &AcceptanceOptions) -> CriterionResult {
    let (_, name, budget_s) = CRITERIA[id - 1];
    let start = Instant::now();
    let outcome = match id {
        1 => douglas(opts),
        2 => carleson_identity(opts),
        3 => cross_route(opts),
        4 => slice_identity(opts),
        5 => vanishing(opts),
        6 => trichotomy(opts),
        7 => equivalence(opts),
        8 => lower_bound(opts),
        9 => mu_bound(opts),
        10 => calibration(opts),
        _ => unreachable!("criteria are numbered 1 to 10"),
    };
    let elapsed_s = start.elapsed().as_secs_f64();
    let (ok, detail) = match outcome {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    let over = elapsed_s > budget_s;
    CriterionResult {
        id,
        name,
        passed: ok && !over,
        detail: if over {
            format!("{detail}; runtime budget exceeded")
        } else {
            detail
        },
        elapsed_s,
        budget_s,
    }
}

pub fn run_all(opts: &AcceptanceOptions) -> Vec<CriterionResult> {
    (1..=CRITERIA.len()).map(|id| run_criterion(id, opts)).collect()
}
