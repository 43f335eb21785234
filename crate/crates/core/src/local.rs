//! Non-archimedean local height integrals and zeta helpers.
//!
//! The local height on the compactification is `max(1,|x|_p,|y|_p,|z|_p)^s`,
//! so every integral here decomposes over valuation shells: the set of
//! elements of exact absolute value `p^v`. Untwisted integrals telescope into
//! geometric series with closed tails; character-twisted integrals terminate
//! after finitely many shells because a full shell sum against a nontrivial
//! additive character vanishes. Two independent evaluation routes are kept
//! side by side (strata Euler factor, shell sums) together with the closed
//! form `(1-p^{-s})/(1-p^{3-s})`, and the test suite pins all three against
//! each other.

use std::collections::BTreeSet;

use num::complex::Complex64;
use num::rational::Rational64;
use num::Zero;
use thiserror::Error;

use crate::geometry::GeometryDescriptor;

/// A complex evaluation parameter, kept as a plain (re, im) pair so that it
/// can be parsed from and serialized to CLI text losslessly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub re: f64,
    pub im: f64,
}

impl EvalPoint {
    pub fn new(re: f64, im: f64) -> Self {
        EvalPoint { re, im }
    }

    pub fn real(re: f64) -> Self {
        EvalPoint { re, im: 0.0 }
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Parses `5`, `4.5`, `5+0.7i`, `5-0.7i`, or `0.7i`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err("empty evaluation point".into());
        }
        if let Some(body) = t.strip_suffix('i') {
            // Find the sign splitting the real part from the imaginary part,
            // skipping a leading sign and exponent signs like `1e-3`.
            let bytes = body.as_bytes();
            let mut split = None;
            for i in (1..bytes.len()).rev() {
                let c = bytes[i] as char;
                if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E') {
                    split = Some(i);
                    break;
                }
            }
            match split {
                Some(i) => {
                    let re: f64 = body[..i].parse().map_err(|_| format!("bad real part in {text:?}"))?;
                    let imtext = &body[i..];
                    let im: f64 = if imtext == "+" {
                        1.0
                    } else if imtext == "-" {
                        -1.0
                    } else {
                        imtext.parse().map_err(|_| format!("bad imaginary part in {text:?}"))?
                    };
                    Ok(EvalPoint::new(re, im))
                }
                None => {
                    let im: f64 = if body.is_empty() {
                        1.0
                    } else {
                        body.parse().map_err(|_| format!("bad imaginary part in {text:?}"))?
                    };
                    Ok(EvalPoint::new(0.0, im))
                }
            }
        } else {
            let re: f64 = t.parse().map_err(|_| format!("bad evaluation point {text:?}"))?;
            Ok(EvalPoint::real(re))
        }
    }
}

impl From<f64> for EvalPoint {
    fn from(re: f64) -> Self {
        EvalPoint::real(re)
    }
}

/// A vector `s = (s_α)` of evaluation parameters, keyed by component name.
#[derive(Debug, Clone, PartialEq)]
pub struct SVector(pub std::collections::BTreeMap<String, EvalPoint>);

impl SVector {
    /// The constant vector assigning `s` to every component of `geom`.
    pub fn broadcast(geom: &GeometryDescriptor, s: EvalPoint) -> Self {
        SVector(
            geom.components
                .iter()
                .map(|c| (c.name.clone(), s))
                .collect(),
        )
    }
}

/// The character `g(x,z,y) ↦ ψ₁(a₁x + a₂y)` on the abelianization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EtaCharacter {
    pub a1: i64,
    pub a2: i64,
}

impl EtaCharacter {
    pub fn new(a1: i64, a2: i64) -> Result<Self, LocalError> {
        if a1 == 0 && a2 == 0 {
            return Err(LocalError::TrivialCharacter);
        }
        Ok(EtaCharacter { a1, a2 })
    }

    /// Primes at which the twisted factor differs from `1 - p^{-s}`:
    /// the primes dividing either nonzero coefficient.
    pub fn bad_primes(&self) -> BTreeSet<u64> {
        let mut out = BTreeSet::new();
        for &a in [self.a1, self.a2].iter() {
            if a != 0 {
                out.extend(prime_factors(a.unsigned_abs()));
            }
        }
        out
    }
}

/// The central character `z ↦ ψ₁(az)` with `a` a nonzero rational whose
/// denominator divides the level `nK`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PsiCharacter {
    pub a: Rational64,
    pub nk: u64,
}

impl PsiCharacter {
    pub fn new(a: Rational64, nk: u64) -> Result<Self, LocalError> {
        if a.is_zero() {
            return Err(LocalError::TrivialCharacter);
        }
        if nk == 0 {
            return Err(LocalError::DomainError("level nK must be positive".into()));
        }
        if !(a * Rational64::from_integer(nk as i64)).is_integer() {
            return Err(LocalError::DomainError(format!(
                "denominator of a = {a} must divide nK = {nk}"
            )));
        }
        Ok(PsiCharacter { a, nk })
    }

    /// Primes `p` with `|nK²·a|_p ≠ 1`, i.e. dividing `nK` or the numerator
    /// of `a`. At every other prime the twisted factor collapses to
    /// `1 - p^{-s}` and the local fixed-vector multiplicity is 1.
    pub fn bad_primes(&self) -> BTreeSet<u64> {
        let mut out = prime_factors(self.nk);
        out.extend(prime_factors(self.a.numer().unsigned_abs()));
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LocalError {
    #[error("evaluation point outside the convergence domain: {0}")]
    DomainError(String),
    #[error("{0} is not a prime")]
    PrimeError(u64),
    #[error("character is trivial; use the untwisted integral instead")]
    TrivialCharacter,
    #[error("evaluation at a pole")]
    PoleError,
}

/// `p^e` for complex `e`, with a direct `powi` path for small real integer
/// exponents so that rational values stay free of `exp`/`ln` rounding.
pub(crate) fn p_pow(p: f64, e: Complex64) -> Complex64 {
    if e.im == 0.0 && e.re.fract() == 0.0 && e.re.abs() <= 63.0 {
        return Complex64::new(p.powi(e.re as i32), 0.0);
    }
    (e * p.ln()).exp()
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for q in [2u64, 3, 5] {
        if n == q {
            return true;
        }
        if n % q == 0 {
            return false;
        }
    }
    let mut d = 7u64;
    let steps = [4u64, 2, 4, 2, 4, 6, 2, 6];
    let mut i = 0;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += steps[i % steps.len()];
        i += 1;
    }
    true
}

pub(crate) fn prime_factors(mut n: u64) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            out.insert(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.insert(n);
    }
    out
}

/// Exact `v_p(n)` for nonzero `n`.
pub(crate) fn vp_int(p: u64, n: i64) -> i64 {
    debug_assert!(n != 0);
    let mut n = n.unsigned_abs();
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// Exact `v_p` of a nonzero rational.
pub(crate) fn vp_rational(p: u64, q: Rational64) -> i64 {
    vp_int(p, *q.numer()) - vp_int(p, *q.denom())
}

fn require_prime(p: u64) -> Result<(), LocalError> {
    if is_prime(p) {
        Ok(())
    } else {
        Err(LocalError::PrimeError(p))
    }
}

/// The strata form of the local height integral:
/// `p^{-dim} Σ_A #D⁰_A(F_p) Π_{α∈A} (p-1)/(p^{s_α-κ_α+1}-1)`.
///
/// Count polynomials are evaluated exactly at `p`; the result is complex
/// because the `s_α` may be.
pub fn euler_factor_strata(
    geom: &GeometryDescriptor,
    s: &SVector,
    p: u64,
) -> Result<Complex64, LocalError> {
    require_prime(p)?;
    let pf = p as f64;
    for c in &geom.components {
        let sa = s
            .0
            .get(&c.name)
            .ok_or_else(|| LocalError::DomainError(format!("missing s-coordinate for {}", c.name)))?;
        if sa.re <= (c.kappa - 1) as f64 {
            return Err(LocalError::DomainError(format!(
                "Re(s_{}) = {} must exceed kappa - 1 = {}",
                c.name,
                sa.re,
                c.kappa - 1
            )));
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for stratum in &geom.strata {
        let count = GeometryDescriptor::eval_poly(&stratum.count_poly, p) as f64;
        let mut term = Complex64::new(count, 0.0);
        for name in &stratum.subset {
            let comp = geom
                .components
                .iter()
                .find(|c| &c.name == name)
                .expect("validated subset member");
            let sa = s.0[name].as_complex();
            let denom = p_pow(pf, sa - (comp.kappa - 1) as f64) - 1.0;
            term *= (pf - 1.0) / denom;
        }
        total += term;
    }
    Ok(total * pf.powi(-(geom.dim as i32)))
}

/// Closed form of the local height integral on the P³ compactification:
/// `(1-p^{-s})/(1-p^{3-s})` for `Re(s) > 3`.
pub fn local_height_integral_p3(p: u64, s: EvalPoint) -> Result<Complex64, LocalError> {
    require_prime(p)?;
    if s.re <= 3.0 {
        return Err(LocalError::DomainError(format!(
            "Re(s) = {} must exceed 3",
            s.re
        )));
    }
    let pf = p as f64;
    let sc = s.as_complex();
    Ok((1.0 - p_pow(pf, -sc)) / (1.0 - p_pow(pf, 3.0 - sc)))
}

/// Valuation-shell evaluation of the same integral: `K` explicit shells of
/// measure `p^{3v} - p^{3v-3}` plus the exact geometric tail. Independent of
/// the closed form and of the strata formula; must agree with both.
pub fn shell_oracle_untwisted(p: u64, s: EvalPoint, k_shells: u32) -> Result<Complex64, LocalError> {
    require_prime(p)?;
    if s.re <= 3.0 {
        return Err(LocalError::DomainError(format!(
            "Re(s) = {} must exceed 3",
            s.re
        )));
    }
    let pf = p as f64;
    let sc = s.as_complex();
    let mut total = Complex64::new(1.0, 0.0);
    for v in 1..=k_shells as i32 {
        let measure = pf.powi(3 * v) - pf.powi(3 * v - 3);
        total += measure * p_pow(pf, -sc * v as f64);
    }
    let tail = (1.0 - pf.powi(-3)) * p_pow(pf, (3.0 - sc) * (k_shells as f64 + 1.0))
        / (1.0 - p_pow(pf, 3.0 - sc));
    Ok(total + tail)
}

/// Per-shell weight of one coordinate integral against `ψ₁(c·t)`, where
/// `m = v_p(c)` (`m = i64::MAX` encodes an untwisted coordinate). Shell 0 is
/// the unit ball. A shell of radius `p^v` carries measure `p^{v-1}(p-1)`; the
/// character is trivial on it for `v ≤ m`, sums to `-p^m` at `v = m+1`, and
/// kills the shell beyond.
fn shell_weight(p: f64, m: i64, v: u32) -> f64 {
    if v == 0 {
        return if m >= 0 { 1.0 } else { 0.0 };
    }
    let v = v as i64;
    if v <= m {
        p.powi((v - 1) as i32) * (p - 1.0)
    } else if v == m + 1 && m >= 0 {
        -p.powi(m as i32)
    } else {
        0.0
    }
}

fn coeff_valuation(p: u64, coeff: i64) -> i64 {
    if coeff == 0 {
        i64::MAX
    } else {
        vp_int(p, coeff)
    }
}

/// Smallest shell depth past which every profile weight vanishes for `η`.
pub fn eta_shell_depth(p: u64, eta: &EtaCharacter) -> u32 {
    let mut m = 0i64;
    for &a in [eta.a1, eta.a2].iter() {
        if a != 0 {
            m = m.max(vp_int(p, a));
        }
    }
    (m + 1) as u32
}

/// Smallest shell depth past which every profile weight vanishes for `ψ`.
pub fn psi_shell_depth(p: u64, psi: &PsiCharacter) -> u32 {
    (vp_rational(p, psi.a).max(0) + 1) as u32
}

fn profile_sum(p: u64, ms: &[i64], s: Complex64, depth: u32) -> Complex64 {
    let pf = p as f64;
    let heights: Vec<Complex64> = (0..=depth)
        .map(|v| p_pow(pf, -s * v as f64))
        .collect();
    let weights: Vec<Vec<f64>> = ms
        .iter()
        .map(|&m| (0..=depth).map(|v| shell_weight(pf, m, v)).collect())
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    match weights.len() {
        3 => {
            for vx in 0..=depth {
                for vy in 0..=depth {
                    let wxy = weights[0][vx as usize] * weights[1][vy as usize];
                    if wxy == 0.0 {
                        continue;
                    }
                    for vz in 0..=depth {
                        let w = wxy * weights[2][vz as usize];
                        if w != 0.0 {
                            total += w * heights[vx.max(vy).max(vz) as usize];
                        }
                    }
                }
            }
        }
        2 => {
            for vy in 0..=depth {
                for vz in 0..=depth {
                    let w = weights[0][vy as usize] * weights[1][vz as usize];
                    if w != 0.0 {
                        total += w * heights[vy.max(vz) as usize];
                    }
                }
            }
        }
        _ => unreachable!("profiles are over two or three coordinates"),
    }
    total
}

/// `∫_{G(Q_p)} max(1,|x|_p,|y|_p,|z|_p)^{-s} ψ̄₁(a₁x+a₂y) dg`, evaluated as a
/// finite triple shell sum. Equals `1 - p^{-s}` whenever `p` divides neither
/// nonzero coefficient.
pub fn twisted_local_factor_eta(
    p: u64,
    eta: &EtaCharacter,
    s: EvalPoint,
) -> Result<Complex64, LocalError> {
    let depth = eta_shell_depth(p, eta);
    twisted_local_factor_eta_with_depth(p, eta, s, depth)
}

/// Same integral with an explicit shell depth; any depth at least
/// [`eta_shell_depth`] gives the same value, which the tests enforce.
pub fn twisted_local_factor_eta_with_depth(
    p: u64,
    eta: &EtaCharacter,
    s: EvalPoint,
    depth: u32,
) -> Result<Complex64, LocalError> {
    require_prime(p)?;
    if eta.a1 == 0 && eta.a2 == 0 {
        return Err(LocalError::TrivialCharacter);
    }
    if s.re <= 3.0 {
        return Err(LocalError::DomainError(format!(
            "Re(s) = {} must exceed 3",
            s.re
        )));
    }
    let ms = [
        coeff_valuation(p, eta.a1),
        coeff_valuation(p, eta.a2),
        i64::MAX,
    ];
    Ok(profile_sum(p, &ms, s.as_complex(), depth))
}

/// `∫_{U(Q_p)} max(1,|y|_p,|z|_p)^{-s} ψ̄_a(z) du` as a finite double shell
/// sum. Equals `1 - p^{-s}` for every prime outside [`PsiCharacter::bad_primes`].
pub fn twisted_local_factor_psi(
    p: u64,
    psi: &PsiCharacter,
    s: EvalPoint,
) -> Result<Complex64, LocalError> {
    let depth = psi_shell_depth(p, psi);
    twisted_local_factor_psi_with_depth(p, psi, s, depth)
}

/// Same integral with an explicit shell depth, for stability checks.
pub fn twisted_local_factor_psi_with_depth(
    p: u64,
    psi: &PsiCharacter,
    s: EvalPoint,
    depth: u32,
) -> Result<Complex64, LocalError> {
    require_prime(p)?;
    if psi.a.is_zero() {
        return Err(LocalError::TrivialCharacter);
    }
    if s.re <= 2.0 {
        return Err(LocalError::DomainError(format!(
            "Re(s) = {} must exceed 2",
            s.re
        )));
    }
    let ms = [i64::MAX, vp_rational(p, psi.a)];
    Ok(profile_sum(p, &ms, s.as_complex(), depth))
}

/// A single Euler factor `ζ_p(s) = (1 - p^{-s})^{-1}`.
pub fn zeta_p(p: u64, s: EvalPoint) -> Result<Complex64, LocalError> {
    require_prime(p)?;
    let denom = 1.0 - p_pow(p as f64, -s.as_complex());
    if denom.norm() < 1e-14 {
        return Err(LocalError::DomainError(format!(
            "1 - {p}^(-s) vanishes at s = {}+{}i",
            s.re, s.im
        )));
    }
    Ok(denom.inv())
}

const EULER_MACLAURIN_TERMS: usize = 50;

/// Bernoulli corrections `B_{2k}/(2k)!` for `k = 1..=6`.
const BERNOULLI_OVER_FACTORIAL: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30_240.0,
    -1.0 / 1_209_600.0,
    1.0 / 47_900_160.0,
    -691.0 / 1_307_674_368_000.0,
];

pub(crate) fn riemann_zeta_with_terms(s: EvalPoint, n_terms: usize) -> Result<Complex64, LocalError> {
    let sc = s.as_complex();
    if (sc - 1.0).norm() < 1e-13 {
        return Err(LocalError::PoleError);
    }
    if s.re <= 0.5 {
        return Err(LocalError::DomainError(format!(
            "Re(s) = {} must exceed 0.5",
            s.re
        )));
    }
    let n = n_terms as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 1..n_terms {
        sum += (-sc * (k as f64).ln()).exp();
    }
    let n_to_minus_s = (-sc * n.ln()).exp();
    sum += n_to_minus_s * n / (sc - 1.0);
    sum += n_to_minus_s * 0.5;
    // Euler-Maclaurin corrections: B_{2k}/(2k)! * s(s+1)...(s+2k-2) * N^{-s-2k+1}.
    let mut rising = sc;
    let mut power = n_to_minus_s / n;
    for (k, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        sum += *coeff * rising * power;
        if k + 1 < BERNOULLI_OVER_FACTORIAL.len() {
            let j = 2 * (k + 1) as i32;
            rising *= (sc + (j - 1) as f64) * (sc + j as f64);
            power /= n * n;
        }
    }
    Ok(sum)
}

/// `ζ(s)` by Euler-Maclaurin summation: 50 direct terms plus Bernoulli
/// corrections through `B₁₂`. Relative error below `1e-12` for
/// `Re(s) ≥ 1.001`; usable (with decaying accuracy) down to `Re(s) > 0.5`.
pub fn riemann_zeta(s: EvalPoint) -> Result<Complex64, LocalError> {
    riemann_zeta_with_terms(s, EULER_MACLAURIN_TERMS)
}

/// The incomplete zeta function `ζ^S(s) = ζ(s)·Π_{p∈S}(1-p^{-s})`, the Euler
/// product over primes outside `S`.
pub fn partial_zeta(s_primes: &BTreeSet<u64>, s: EvalPoint) -> Result<Complex64, LocalError> {
    for &p in s_primes {
        require_prime(p)?;
    }
    let mut out = riemann_zeta(s)?;
    let sc = s.as_complex();
    for &p in s_primes {
        out *= 1.0 - p_pow(p as f64, -sc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{validate, GeometryDescriptor};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn p3() -> GeometryDescriptor {
        let geom = GeometryDescriptor::from_json_str(include_str!("../../../p3.json")).unwrap();
        validate(&geom).unwrap();
        geom
    }

    fn rel_err(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn closed_form_value_at_2_5() {
        // Oracle: exact rational 31/24 for p = 2, s = 5.
        let want = 31.0 / 24.0;
        let got = local_height_integral_p3(2, EvalPoint::real(5.0)).unwrap();
        assert_relative_eq!(got.re, want, max_relative = 1e-15);
        assert_eq!(got.im, 0.0);
    }

    #[test]
    fn closed_form_value_at_2_4() {
        // Oracle: (1 - 1/16)/(1 - 1/2) = 15/8.
        let got = local_height_integral_p3(2, EvalPoint::real(4.0)).unwrap();
        assert_relative_eq!(got.re, 15.0 / 8.0, max_relative = 1e-15);
    }

    #[test]
    fn strata_factor_matches_oracle_values() {
        let geom = p3();
        let got = euler_factor_strata(&geom, &SVector::broadcast(&geom, EvalPoint::real(5.0)), 2)
            .unwrap();
        assert_relative_eq!(got.re, 31.0 / 24.0, max_relative = 1e-13);

        let got = euler_factor_strata(&geom, &SVector::broadcast(&geom, EvalPoint::real(4.5)), 3)
            .unwrap();
        let want = (1.0 - 3f64.powf(-4.5)) / (1.0 - 3f64.powf(-1.5));
        assert_relative_eq!(got.re, want, max_relative = 1e-12);
    }

    #[test]
    fn strata_factor_tends_to_one() {
        let geom = p3();
        for p in [2u64, 3, 11] {
            let got =
                euler_factor_strata(&geom, &SVector::broadcast(&geom, EvalPoint::real(80.0)), p)
                    .unwrap();
            assert_relative_eq!(got.re, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn triple_agreement_including_complex() {
        let geom = p3();
        let points = [
            EvalPoint::real(4.5),
            EvalPoint::real(5.0),
            EvalPoint::real(6.0),
            EvalPoint::new(5.0, 0.7),
        ];
        for p in [2u64, 3, 5, 7, 11] {
            for &s in &points {
                let closed = local_height_integral_p3(p, s).unwrap();
                let strata =
                    euler_factor_strata(&geom, &SVector::broadcast(&geom, s), p).unwrap();
                for k in [1u32, 2, 4, 7] {
                    let shells = shell_oracle_untwisted(p, s, k).unwrap();
                    assert!(
                        rel_err(shells, closed) < 1e-12,
                        "shell vs closed at p={p}, s={s:?}, K={k}"
                    );
                }
                assert!(
                    rel_err(strata, closed) < 1e-12,
                    "strata vs closed at p={p}, s={s:?}"
                );
            }
        }
    }

    #[test]
    fn shell_oracle_allows_zero_shells() {
        let got = shell_oracle_untwisted(2, EvalPoint::real(5.0), 0).unwrap();
        assert_relative_eq!(got.re, 31.0 / 24.0, max_relative = 1e-14);
    }

    #[test]
    fn domain_errors_at_the_boundary() {
        assert!(matches!(
            local_height_integral_p3(2, EvalPoint::real(3.0)),
            Err(LocalError::DomainError(_))
        ));
        let geom = p3();
        assert!(matches!(
            euler_factor_strata(&geom, &SVector::broadcast(&geom, EvalPoint::real(3.0)), 2),
            Err(LocalError::DomainError(_))
        ));
        assert!(matches!(
            local_height_integral_p3(4, EvalPoint::real(5.0)),
            Err(LocalError::PrimeError(4))
        ));
    }

    #[test]
    fn eta_good_prime_values() {
        // At a prime dividing neither coefficient the factor is 1 - p^{-s}.
        let eta = EtaCharacter::new(1, 0).unwrap();
        let got = twisted_local_factor_eta(3, &eta, EvalPoint::real(5.0)).unwrap();
        assert_relative_eq!(got.re, 242.0 / 243.0, max_relative = 1e-14);
        assert!(got.im.abs() < 1e-16);

        let eta = EtaCharacter::new(2, 3).unwrap();
        let got = twisted_local_factor_eta(5, &eta, EvalPoint::real(6.0)).unwrap();
        assert_relative_eq!(got.re, 1.0 - 5f64.powi(-6), max_relative = 1e-14);
    }

    #[test]
    fn eta_bad_prime_is_depth_stable() {
        let eta = EtaCharacter::new(2, 0).unwrap();
        let s = EvalPoint::real(5.0);
        let base = twisted_local_factor_eta(2, &eta, s).unwrap();
        for extra in 1..=4 {
            let deeper =
                twisted_local_factor_eta_with_depth(2, &eta, s, eta_shell_depth(2, &eta) + extra)
                    .unwrap();
            assert!(rel_err(deeper, base) < 1e-14, "depth +{extra}");
        }
    }

    #[test]
    fn eta_majorized_by_untwisted_integral() {
        for (a1, a2) in [(1i64, 0i64), (2, 0), (4, 6), (3, 9)] {
            let eta = EtaCharacter::new(a1, a2).unwrap();
            for p in [2u64, 3] {
                for sigma in [3.5, 4.0, 5.0, 6.0] {
                    let s = EvalPoint::real(sigma);
                    let tw = twisted_local_factor_eta(p, &eta, s).unwrap();
                    let untw = shell_oracle_untwisted(p, s, 6).unwrap();
                    assert!(
                        tw.norm() <= untw.re + 1e-12,
                        "|twisted| at p={p}, s={sigma}, eta=({a1},{a2})"
                    );
                }
            }
        }
    }

    #[test]
    fn psi_good_prime_values() {
        let psi = PsiCharacter::new(Rational64::from_integer(1), 1).unwrap();
        let got = twisted_local_factor_psi(3, &psi, EvalPoint::real(5.0)).unwrap();
        assert_relative_eq!(got.re, 242.0 / 243.0, max_relative = 1e-14);

        let psi = PsiCharacter::new(Rational64::from_integer(2), 1).unwrap();
        let got = twisted_local_factor_psi(7, &psi, EvalPoint::real(4.0)).unwrap();
        assert_relative_eq!(got.re, 1.0 - 7f64.powi(-4), max_relative = 1e-14);
    }

    #[test]
    fn psi_bad_prime_is_depth_stable() {
        let psi = PsiCharacter::new(Rational64::from_integer(2), 1).unwrap();
        let s = EvalPoint::real(5.0);
        let base = twisted_local_factor_psi(2, &psi, s).unwrap();
        let expected = {
            // Exact double-shell sum: 1 + (p^2-1)p^{-s} - p^{2-2s} at p=2, s=5.
            1.0 + 3.0 / 32.0 - 4.0 / 1024.0
        };
        assert_relative_eq!(base.re, expected, max_relative = 1e-14);
        for extra in 1..=4 {
            let deeper =
                twisted_local_factor_psi_with_depth(2, &psi, s, psi_shell_depth(2, &psi) + extra)
                    .unwrap();
            assert!(rel_err(deeper, base) < 1e-14);
        }
    }

    #[test]
    fn psi_with_rational_coefficient() {
        // a = 1/2 at p = 2: the character is nontrivial on every ball, so the
        // whole integral collapses to zero.
        let psi = PsiCharacter::new(Rational64::new(1, 2), 2).unwrap();
        let got = twisted_local_factor_psi(2, &psi, EvalPoint::real(5.0)).unwrap();
        assert!(got.norm() < 1e-15);
        // ...while p = 3 stays a good prime.
        let got = twisted_local_factor_psi(3, &psi, EvalPoint::real(5.0)).unwrap();
        assert_relative_eq!(got.re, 1.0 - 3f64.powi(-5), max_relative = 1e-14);
    }

    #[test]
    fn character_constructors_reject_bad_data() {
        assert!(matches!(
            EtaCharacter::new(0, 0),
            Err(LocalError::TrivialCharacter)
        ));
        assert!(matches!(
            PsiCharacter::new(Rational64::zero(), 1),
            Err(LocalError::TrivialCharacter)
        ));
        assert!(matches!(
            PsiCharacter::new(Rational64::new(1, 3), 2),
            Err(LocalError::DomainError(_))
        ));
    }

    #[test]
    fn bad_prime_sets() {
        let eta = EtaCharacter::new(12, 0).unwrap();
        assert_eq!(eta.bad_primes(), [2u64, 3].into_iter().collect());
        let psi = PsiCharacter::new(Rational64::new(1, 2), 2).unwrap();
        assert_eq!(psi.bad_primes(), [2u64].into_iter().collect());
        let psi = PsiCharacter::new(Rational64::from_integer(6), 1).unwrap();
        assert_eq!(psi.bad_primes(), [2u64, 3].into_iter().collect());
    }

    #[test]
    fn zeta_p_values() {
        assert_relative_eq!(
            zeta_p(2, EvalPoint::real(2.0)).unwrap().re,
            4.0 / 3.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            zeta_p(3, EvalPoint::real(1.0)).unwrap().re,
            3.0 / 2.0,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            zeta_p(2, EvalPoint::new(4.0, 0.0)).unwrap().re,
            16.0 / 15.0,
            max_relative = 1e-15
        );
    }

    #[test]
    fn riemann_zeta_even_integer_oracles() {
        // Closed forms pi^2/6, pi^4/90, pi^6/945 are the oracles.
        let cases = [
            (2.0, PI * PI / 6.0),
            (4.0, PI.powi(4) / 90.0),
            (6.0, PI.powi(6) / 945.0),
        ];
        for (s, want) in cases {
            let got = riemann_zeta(EvalPoint::real(s)).unwrap();
            assert!(
                (got.re - want).abs() / want < 1e-12,
                "zeta({s}) = {} want {want}",
                got.re
            );
            assert_eq!(got.im, 0.0);
        }
    }

    #[test]
    fn riemann_zeta_truncation_consistency() {
        // Doubling the direct-sum length must not move the value: the
        // Bernoulli tail already carries the accuracy.
        for s in [
            EvalPoint::real(1.001),
            EvalPoint::real(1.5),
            EvalPoint::new(5.0, 0.7),
            EvalPoint::new(2.0, 14.0),
        ] {
            let a = riemann_zeta_with_terms(s, 50).unwrap();
            let b = riemann_zeta_with_terms(s, 120).unwrap();
            assert!(rel_err(a, b) < 1e-12, "s = {s:?}: {a} vs {b}");
        }
    }

    #[test]
    fn riemann_zeta_near_one() {
        // zeta(1+eps) = 1/eps + gamma + O(eps); check against the expansion.
        let eps = 1e-3;
        let got = riemann_zeta(EvalPoint::real(1.0 + eps)).unwrap().re;
        let euler_gamma = 0.577_215_664_901_532_9;
        assert!((got - (1.0 / eps + euler_gamma)).abs() < 1e-3, "got {got}");
    }

    #[test]
    fn riemann_zeta_pole_and_domain() {
        assert!(matches!(
            riemann_zeta(EvalPoint::real(1.0)),
            Err(LocalError::PoleError)
        ));
        assert!(matches!(
            riemann_zeta(EvalPoint::real(0.3)),
            Err(LocalError::DomainError(_))
        ));
    }

    #[test]
    fn partial_zeta_values() {
        let empty = BTreeSet::new();
        let z4 = riemann_zeta(EvalPoint::real(4.0)).unwrap();
        assert_eq!(partial_zeta(&empty, EvalPoint::real(4.0)).unwrap(), z4);

        let s2: BTreeSet<u64> = [2].into_iter().collect();
        let got = partial_zeta(&s2, EvalPoint::real(2.0)).unwrap();
        assert_relative_eq!(got.re, PI * PI / 6.0 * 0.75, max_relative = 1e-12);

        let s23: BTreeSet<u64> = [2, 3].into_iter().collect();
        let got = partial_zeta(&s23, EvalPoint::real(4.0)).unwrap();
        assert_relative_eq!(
            got.re,
            PI.powi(4) / 90.0 * (15.0 / 16.0) * (80.0 / 81.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn eval_point_parsing() {
        assert_eq!(EvalPoint::parse("5").unwrap(), EvalPoint::real(5.0));
        assert_eq!(EvalPoint::parse("4.5").unwrap(), EvalPoint::real(4.5));
        assert_eq!(EvalPoint::parse("5+0.7i").unwrap(), EvalPoint::new(5.0, 0.7));
        assert_eq!(EvalPoint::parse("5-0.7i").unwrap(), EvalPoint::new(5.0, -0.7));
        assert_eq!(EvalPoint::parse("0.7i").unwrap(), EvalPoint::new(0.0, 0.7));
        assert_eq!(EvalPoint::parse("1e-3+2e-4i").unwrap(), EvalPoint::new(1e-3, 2e-4));
        assert!(EvalPoint::parse("").is_err());
        assert!(EvalPoint::parse("abc").is_err());
    }

    #[test]
    fn primality_and_valuations() {
        assert!(is_prime(2) && is_prime(97) && is_prime(7919));
        assert!(!is_prime(1) && !is_prime(91) && !is_prime(100_000));
        assert_eq!(prime_factors(360), [2u64, 3, 5].into_iter().collect());
        assert_eq!(vp_int(2, 48), 4);
        assert_eq!(vp_rational(2, Rational64::new(1, 2)), -1);
        assert_eq!(vp_rational(3, Rational64::new(9, 2)), 2);
    }
}
