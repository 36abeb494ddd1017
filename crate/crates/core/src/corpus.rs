//! Fixed boundary-function corpora shared by tests, the acceptance suite and
//! the command line.

use num_complex::Complex64;
use rand::Rng;

use crate::boundary::{BoundaryFunction, TrigPolynomial};

fn exp_trig(flat: &[f64]) -> BoundaryFunction {
    BoundaryFunction::exp_trig(TrigPolynomial::from_flat(flat))
}

/// Smooth, strictly positive boundary moduli.
pub fn smooth_corpus() -> Vec<BoundaryFunction> {
    vec![
        BoundaryFunction::exp_cos(),
        BoundaryFunction::sin_bump(0.3).expect("valid amplitude"),
        exp_trig(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1]),
        BoundaryFunction::from_spec("poly:1+z/2").expect("valid spec"),
        exp_trig(&[0.0, 0.5, 0.0, 0.0, 0.3]),
        BoundaryFunction::sin_bump(0.6).expect("valid amplitude"),
    ]
}

/// Ten members: exp-trig family, a two-level step, a sine bump, `|1 + z/2|`,
/// and two `h_β` cases that are finite at weight `alpha` (the family
/// parameter is tied to the weight).
pub fn equivalence_corpus(alpha: f64) -> Vec<BoundaryFunction> {
    vec![
        BoundaryFunction::exp_cos(),
        exp_trig(&[0.0, 0.0, 0.0, 0.0, 0.5]),
        exp_trig(&[0.0, 1.5, 0.0, 0.0, 0.0, 0.0, 0.5]),
        exp_trig(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1]),
        exp_trig(&[0.0, 2.0]),
        BoundaryFunction::step(1.0, 4.0).expect("positive levels"),
        BoundaryFunction::sin_bump(0.5).expect("valid amplitude"),
        BoundaryFunction::from_spec("poly:1+z/2").expect("valid spec"),
        BoundaryFunction::hbeta(alpha, 1.2).expect("valid parameters"),
        BoundaryFunction::hbeta(alpha, 1.6).expect("valid parameters"),
    ]
}

/// Random polynomial of degree at most `max_degree`, coefficients uniform in
/// the square `[-1, 1]²`.
pub fn random_polynomial<R: Rng>(rng: &mut R, max_degree: usize) -> Vec<Complex64> {
    let degree = rng.gen_range(0..=max_degree);
    (0..=degree)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{check_log_integrability, LogIntegrability};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn corpora_are_admissible() {
        for h in smooth_corpus().iter().chain(&equivalence_corpus(0.25)) {
            assert_ne!(check_log_integrability(h).unwrap().status, LogIntegrability::Fail, "{h}");
        }
        assert_eq!(equivalence_corpus(0.1).len(), 10);
    }

    #[test]
    fn random_polynomials_are_seeded() {
        let a = random_polynomial(&mut ChaCha8Rng::seed_from_u64(7), 8);
        let b = random_polynomial(&mut ChaCha8Rng::seed_from_u64(7), 8);
        assert_eq!(a, b);
        assert!(a.len() <= 9);
    }
}
