//! Cross-checks between the three routes to the local factors (strata count,
//! shell sums, closed form) and the structural properties of the twisted
//! variants: collapse at good primes, depth stability, and majorization by
//! the untwisted factor.

use std::collections::BTreeSet;

use heisenberg_zeta::geometry::{validate, GeometryDescriptor};
use heisenberg_zeta::local::{
    self, EtaCharacter, EvalPoint, PsiCharacter, SVector,
};
use num::complex::Complex64;
use num::rational::Rational64;
use proptest::prelude::*;

const PRIMES: [u64; 6] = [2, 3, 5, 7, 11, 13];

fn shipped() -> GeometryDescriptor {
    let geom = GeometryDescriptor::from_json_str(include_str!("../../../p3.json")).unwrap();
    validate(&geom).unwrap();
    geom
}

fn closed_form(p: u64, s: Complex64) -> Complex64 {
    let pf = p as f64;
    let pow = |e: Complex64| Complex64::from_polar((e.re * pf.ln()).exp(), e.im * pf.ln());
    (1.0 - pow(-s)) / (1.0 - pow(Complex64::new(3.0, 0.0) - s))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn three_routes_agree_at_random_points(
        p_idx in 0usize..PRIMES.len(),
        sigma in 4.2f64..9.0,
        tau in -3.0f64..3.0,
    ) {
        let geom = shipped();
        let p = PRIMES[p_idx];
        let s = EvalPoint::new(sigma, tau);
        let sv = SVector::broadcast(&geom, s);
        let strata = local::euler_factor_strata(&geom, &sv, p).unwrap();
        let shells = local::shell_oracle_untwisted(p, s, 7).unwrap();
        let exact = closed_form(p, s.as_complex());
        prop_assert!((strata - exact).norm() <= 1e-10 * exact.norm());
        prop_assert!((shells - exact).norm() <= 1e-10 * exact.norm());
    }

    #[test]
    fn good_primes_collapse_for_eta(
        p_idx in 0usize..PRIMES.len(),
        a1 in 1i64..=50,
        a2 in 0i64..=50,
        sigma in 4.2f64..8.0,
    ) {
        let p = PRIMES[p_idx];
        let eta = EtaCharacter::new(a1, a2).unwrap();
        prop_assume!(!eta.bad_primes().contains(&p));
        let s = EvalPoint::real(sigma);
        let got = local::twisted_local_factor_eta(p, &eta, s).unwrap();
        let want = Complex64::new(1.0 - (p as f64).powf(-sigma), 0.0);
        prop_assert!((got - want).norm() <= 1e-12);
    }

    #[test]
    fn good_primes_collapse_for_psi(
        p_idx in 0usize..PRIMES.len(),
        num in 1i64..=30,
        den in 1i64..=10,
        level_mult in 1u64..=6,
        sigma in 4.2f64..8.0,
    ) {
        let p = PRIMES[p_idx];
        let a = Rational64::new(num, den);
        // The level must absorb the reduced denominator of a.
        let nk = a.denom().unsigned_abs() * level_mult;
        let psi = PsiCharacter::new(a, nk).unwrap();
        prop_assume!(!psi.bad_primes().contains(&p));
        let s = EvalPoint::real(sigma);
        let got = local::twisted_local_factor_psi(p, &psi, s).unwrap();
        let want = Complex64::new(1.0 - (p as f64).powf(-sigma), 0.0);
        prop_assert!((got - want).norm() <= 1e-12);
    }

    #[test]
    fn deeper_shells_leave_twisted_values_fixed(
        p_idx in 0usize..4,
        a1 in 1i64..=16,
        a2 in 0i64..=16,
        sigma in 4.2f64..8.0,
    ) {
        let p = PRIMES[p_idx];
        let eta = EtaCharacter::new(a1, a2).unwrap();
        let s = EvalPoint::real(sigma);
        let depth = local::eta_shell_depth(p, &eta);
        let base = local::twisted_local_factor_eta_with_depth(p, &eta, s, depth).unwrap();
        let deep = local::twisted_local_factor_eta_with_depth(p, &eta, s, depth + 3).unwrap();
        prop_assert!((deep - base).norm() <= 1e-12);
    }

    #[test]
    fn twisted_factors_are_majorized_by_untwisted_shells(
        p_idx in 0usize..4,
        a1 in 1i64..=16,
        a2 in 0i64..=16,
        sigma in 4.2f64..8.0,
    ) {
        let p = PRIMES[p_idx];
        let eta = EtaCharacter::new(a1, a2).unwrap();
        let s = EvalPoint::real(sigma);
        let depth = local::eta_shell_depth(p, &eta).max(4);
        let twisted = local::twisted_local_factor_eta_with_depth(p, &eta, s, depth).unwrap();
        let untwisted = local::shell_oracle_untwisted(p, s, depth).unwrap();
        prop_assert!(twisted.norm() <= untwisted.re * (1.0 + 1e-12));
    }

    #[test]
    fn partial_zeta_matches_the_pruned_series(
        sigma in 5.0f64..8.0,
        use_two in any::<bool>(),
        use_three in any::<bool>(),
    ) {
        let mut skip = BTreeSet::new();
        if use_two { skip.insert(2u64); }
        if use_three { skip.insert(3u64); }
        let s = EvalPoint::real(sigma);
        let got = local::partial_zeta(&skip, s).unwrap();
        let mut series = 0.0f64;
        for n in (1u64..=20_000).rev() {
            if skip.iter().any(|&p| n % p == 0) { continue; }
            series += (n as f64).powf(-sigma);
        }
        prop_assert!((got.re - series).abs() <= 1e-12 + got.re.abs() * 1e-12);
        prop_assert!(got.im.abs() <= 1e-15);
    }
}

#[test]
fn known_twisted_values_at_small_primes() {
    let s = EvalPoint::real(5.0);
    let eta = EtaCharacter::new(1, 1).unwrap();
    let v = local::twisted_local_factor_eta(3, &eta, s).unwrap();
    // 242/243 = 1 - 3^-5, the good-prime value.
    assert!((v.re - 242.0 / 243.0).abs() <= 1e-12);
    assert!(v.im.abs() <= 1e-14);

    let psi = PsiCharacter::new(Rational64::from_integer(1), 1).unwrap();
    let w = local::twisted_local_factor_psi(2, &psi, s).unwrap();
    let untwisted = local::shell_oracle_untwisted(2, s, 8).unwrap();
    assert!(w.norm() <= untwisted.re);
}

#[test]
fn strata_factor_at_the_reference_point() {
    // 31/24 at p=2, s=5 for the shipped geometry.
    let geom = shipped();
    let sv = SVector::broadcast(&geom, EvalPoint::real(5.0));
    let v = local::euler_factor_strata(&geom, &sv, 2).unwrap();
    assert!((v.re - 31.0 / 24.0).abs() <= 1e-13, "{}", v.re);
    assert!(v.im.abs() <= 1e-15);
}

#[test]
fn composite_moduli_are_rejected() {
    let eta = EtaCharacter::new(1, 0).unwrap();
    assert!(local::twisted_local_factor_eta(4, &eta, EvalPoint::real(5.0)).is_err());
    assert!(local::shell_oracle_untwisted(6, EvalPoint::real(5.0), 4).is_err());
}
