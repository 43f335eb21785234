//! Oscillator-representation spectra.
//!
//! For a nonzero central parameter `a` the oscillator Laplacian
//! `Δ φ = φ″ - (2πax)²φ` has eigenfunctions `φ_n = c_n e^{-π|a|x²} h_n(x)`
//! with eigenvalues `λ_n = -2π(2n+1)|a|`. The polynomials `h_n` are kept as
//! exact coefficient tables in `x` whose entries are rational multiples of
//! powers of `u = π|a|`; floating-point `π` enters only at evaluation time,
//! so parity and the Rodrigues recursion can be checked as exact identities.
//! The module also tracks the dimensions of level-`nK` fixed vectors and the
//! convergent majorant that certifies the spectral remainder term.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Mutex, OnceLock};

use num::rational::{BigRational, Rational64};
use num::traits::ToPrimitive;
use num::{BigInt, One, Signed, Zero};
use thiserror::Error;

use crate::local::{is_prime, vp_int, vp_rational};

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("invalid oscillator character: {0}")]
    InvalidCharacter(String),
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("parameters give a divergent series: {0}")]
    DivergentParameters(String),
    #[error("requested tolerance not met: {0}")]
    ToleranceNotMet(String),
}

/// Central character `z ↦ e^{2πiaz}` together with the level `nK`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OscillatorCharacter {
    pub a: Rational64,
    pub nk: u64,
}

impl OscillatorCharacter {
    pub fn new(a: Rational64, nk: u64) -> Result<Self, SpectralError> {
        if a.is_zero() {
            return Err(SpectralError::InvalidCharacter(
                "central parameter a must be nonzero".into(),
            ));
        }
        if nk == 0 {
            return Err(SpectralError::InvalidCharacter(
                "level nK must be positive".into(),
            ));
        }
        Ok(OscillatorCharacter { a, nk })
    }

    /// `u = π|a|`, the scale constant of the Gaussian factor.
    fn u(&self) -> f64 {
        std::f64::consts::PI * self.a.abs().to_f64().expect("rational fits in f64")
    }
}

/// A character together with an energy level `n ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpectralIndex {
    pub character: OscillatorCharacter,
    pub n: u32,
}

impl SpectralIndex {
    pub fn new(character: OscillatorCharacter, n: u32) -> Self {
        SpectralIndex { character, n }
    }
}

/// Polynomial in `x` whose coefficients are exact rationals times powers of
/// the formal symbol `u` (standing for `π|a|`); the key is `(x-power,
/// u-power)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct XuPoly {
    terms: BTreeMap<(u32, u32), BigRational>,
}

impl XuPoly {
    fn one() -> Self {
        let mut terms = BTreeMap::new();
        terms.insert((0, 0), BigRational::one());
        XuPoly { terms }
    }

    fn insert_add(&mut self, key: (u32, u32), value: BigRational) {
        let entry = self.terms.entry(key).or_insert_with(BigRational::zero);
        *entry += value;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    fn derivative_x(&self) -> Self {
        let mut out = XuPoly::default();
        for (&(k, e), c) in &self.terms {
            if k > 0 {
                out.insert_add((k - 1, e), c * BigRational::from_integer(BigInt::from(k)));
            }
        }
        out
    }

    /// Multiplication by `4·u·x`.
    fn mul_4ux(&self) -> Self {
        let mut out = XuPoly::default();
        for (&(k, e), c) in &self.terms {
            out.insert_add((k + 1, e + 1), c * BigRational::from_integer(BigInt::from(4)));
        }
        out
    }

    fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&key, c) in &other.terms {
            out.insert_add(key, -c.clone());
        }
        out
    }

    #[cfg(test)]
    fn neg(&self) -> Self {
        let mut out = XuPoly::default();
        for (&key, c) in &self.terms {
            out.insert_add(key, -c.clone());
        }
        out
    }

    fn eval(&self, u: f64, x: f64) -> f64 {
        let mut acc = 0.0;
        for (&(k, e), c) in &self.terms {
            acc += c.to_f64().expect("coefficient fits in f64")
                * u.powi(e as i32)
                * x.powi(k as i32);
        }
        acc
    }
}

static HERMITE: OnceLock<Mutex<Vec<XuPoly>>> = OnceLock::new();

/// Runs `f` on the exact coefficient table of `h_n`, extending the shared
/// tower `h_{n+1} = 4ux·h_n - h_n′` on first use.
fn with_hermite<R>(n: u32, f: impl FnOnce(&XuPoly) -> R) -> R {
    let cell = HERMITE.get_or_init(|| Mutex::new(vec![XuPoly::one()]));
    let mut tower = cell.lock().expect("hermite cache poisoned");
    while tower.len() <= n as usize {
        let next = {
            let last = tower.last().expect("tower is never empty");
            last.mul_4ux().sub(&last.derivative_x())
        };
        tower.push(next);
    }
    f(&tower[n as usize])
}

/// Evaluates the oscillator polynomial `h_n` at `x`: exact coefficients with
/// `u = π|a|` substituted last. Panics if `a = 0`.
pub fn hermite_h(n: u32, a: Rational64, x: f64) -> f64 {
    assert!(!a.is_zero(), "central parameter a must be nonzero");
    let u = std::f64::consts::PI * a.abs().to_f64().expect("rational fits in f64");
    with_hermite(n, |h| h.eval(u, x))
}

/// Oscillator eigenvalue `λ_n = -2π(2n+1)|a|`.
pub fn eigenvalue(idx: &SpectralIndex) -> f64 {
    let abs_a = idx.character.a.abs().to_f64().expect("rational fits in f64");
    -2.0 * std::f64::consts::PI * (2 * idx.n + 1) as f64 * abs_a
}

/// Eigenvalue of the full invariant Laplacian, `λ_n - 4π²a²`.
pub fn full_laplacian_eigenvalue(idx: &SpectralIndex) -> f64 {
    let a = idx.character.a.to_f64().expect("rational fits in f64");
    eigenvalue(idx) - 4.0 * std::f64::consts::PI.powi(2) * a * a
}

static NORMALIZATION: OnceLock<Mutex<HashMap<(u32, Rational64), f64>>> = OnceLock::new();

/// Positive constant `c_n` with `∫ (c_n e^{-ux²} h_n)² dx = 1`, computed by
/// quadrature once per `(n, a)` and cached.
fn normalization_constant(idx: &SpectralIndex) -> Result<f64, SpectralError> {
    let key = (idx.n, idx.character.a);
    let cell = NORMALIZATION.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&c) = cell.lock().expect("cache poisoned").get(&key) {
        return Ok(c);
    }
    let u = idx.character.u();
    let abs_a = idx.character.a.abs().to_f64().expect("rational fits in f64");
    let x_max = 8.0 / abs_a.sqrt();
    let n = idx.n;
    let integrand = |x: f64| {
        let raw = with_hermite(n, |h| h.eval(u, x)) * (-u * x * x).exp();
        raw * raw
    };
    let map_err = |e: crate::arch::ArchError| SpectralError::ToleranceNotMet(e.to_string());
    // Cheap fixed-panel scan to size the integral, then one adaptive pass at
    // a relative target.
    let mut rough = 0.0;
    let panels = 64;
    let step = 2.0 * x_max / panels as f64;
    for i in 0..panels {
        let lo = -x_max + i as f64 * step;
        rough += crate::arch::gl8(&|x| num::complex::Complex64::new(integrand(x), 0.0), lo, lo + step).re;
    }
    let tol = 1e-12 * rough.abs().max(1e-30);
    let (norm_sq, _, _) =
        crate::arch::adaptive_simpson_real(&integrand, -x_max, x_max, tol, 2_000_000)
            .map_err(map_err)?;
    if !(norm_sq.is_finite() && norm_sq > 0.0) {
        return Err(SpectralError::ToleranceNotMet(
            "normalization integral did not converge".into(),
        ));
    }
    let c = 1.0 / norm_sq.sqrt();
    cell.lock().expect("cache poisoned").insert(key, c);
    Ok(c)
}

/// Normalized eigenfunction `φ_n(x) = c_n e^{-π|a|x²} h_n(x)`.
///
/// Beyond `|x| > 8/√|a|` the value is clamped to 0; the discarded magnitude
/// is below `e^{-64π} ≈ 1e-87` times a polynomial factor, i.e. under `1e-70`
/// for every level tabulated here.
pub fn eigenfunction(idx: &SpectralIndex, x: f64) -> Result<f64, SpectralError> {
    let abs_a = idx.character.a.abs().to_f64().expect("rational fits in f64");
    if x.abs() > 8.0 / abs_a.sqrt() {
        return Ok(0.0);
    }
    let c = normalization_constant(idx)?;
    let u = idx.character.u();
    Ok(c * (-u * x * x).exp() * with_hermite(idx.n, |h| h.eval(u, x)))
}

/// Maximal relative eigen-equation defect over the grid:
/// `max |φ″ - (2πax)²φ - λφ| / max |λφ|`, with `φ″` evaluated analytically
/// through the derivative polynomials of the stored coefficient table.
/// Expects every grid point inside `[-5/√|a|, 5/√|a|]`.
pub fn oscillator_residual(idx: &SpectralIndex, x_grid: &[f64]) -> f64 {
    let abs_a = idx.character.a.abs().to_f64().expect("rational fits in f64");
    let reach = 5.0 / abs_a.sqrt();
    assert!(
        x_grid.iter().all(|x| x.abs() <= reach),
        "grid extends beyond the supported window"
    );
    let u = idx.character.u();
    let lambda = eigenvalue(idx);
    let (h, h1, h2) = with_hermite(idx.n, |h| (h.clone(), h.derivative_x(), h.derivative_x().derivative_x()));
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for &x in x_grid {
        let g = (-u * x * x).exp();
        let hv = h.eval(u, x);
        let phi = g * hv;
        // (e^{-ux²}h)″ = e^{-ux²}(h″ - 4uxh′ + (4u²x² - 2u)h).
        let phi2 = g * (h2.eval(u, x) - 4.0 * u * x * h1.eval(u, x)
            + (4.0 * u * u * x * x - 2.0 * u) * hv);
        let defect = phi2 - (4.0 * u * u * x * x) * phi - lambda * phi;
        worst = worst.max(defect.abs());
        scale = scale.max((lambda * phi).abs());
    }
    if scale == 0.0 {
        return worst;
    }
    worst / scale
}

/// Dimension of the level-`nK` fixed subspace for the character `a`:
/// `nK²·|a|` when `a·nK` is a nonzero integer, zero otherwise.
pub fn multiplicity_global(a: Rational64, nk: u64) -> u64 {
    assert!(nk >= 1, "level nK must be positive");
    if a.is_zero() {
        return 0;
    }
    let scaled = a * Rational64::from_integer(nk as i64);
    if !scaled.is_integer() {
        return 0;
    }
    let m = (nk as i128) * (scaled.to_integer().unsigned_abs() as i128);
    u64::try_from(m).expect("multiplicity fits in u64")
}

/// Local fixed-vector dimension at `p`: `1` when `nK²·a` is a `p`-adic unit,
/// otherwise the `p`-part of `nK²·a`. Requires `p^{np}·nK` and `nK²·a` to be
/// `p`-adic integers.
pub fn multiplicity_local(
    p: u64,
    a: Rational64,
    np: i64,
    nk: u64,
) -> Result<u64, SpectralError> {
    if !is_prime(p) {
        return Err(SpectralError::HypothesisViolated(format!(
            "{p} is not prime"
        )));
    }
    if a.is_zero() {
        return Err(SpectralError::HypothesisViolated(
            "central parameter a must be nonzero".into(),
        ));
    }
    if nk == 0 {
        return Err(SpectralError::HypothesisViolated(
            "level nK must be positive".into(),
        ));
    }
    let vnk = vp_int(p, nk as i64);
    if np + vnk < 0 {
        return Err(SpectralError::HypothesisViolated(format!(
            "p^np · nK has negative {p}-adic valuation {}",
            np + vnk
        )));
    }
    let e = 2 * vnk + vp_rational(p, a);
    if e < 0 {
        return Err(SpectralError::HypothesisViolated(format!(
            "nK²·a has negative {p}-adic valuation {e}"
        )));
    }
    let mut out: u64 = 1;
    for _ in 0..e {
        out = out.checked_mul(p).expect("p-part fits in u64");
    }
    Ok(out)
}

/// Certified upper bound for a spectral remainder series, split into the
/// finite double sum and its analytic tail bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MajorantValue {
    /// Exact finite part: characters with `|a·nK| ≤ a_max·nK`, levels `n ≤ n_max`.
    pub finite: f64,
    /// Integral-comparison bound for everything outside the finite window.
    pub tail_bound: f64,
    /// `finite + tail_bound`, a rigorous majorant of the full series.
    pub total: f64,
}

/// Majorant of the weighted spectral sum
/// `Σ_a multiplicity_global(a)·Σ_n |full_laplacian_eigenvalue(n,a)|^{-(m-mprime)}`
/// over admissible characters `a ∈ (1/nK)ℤ`, with integral-comparison tail
/// bounds in both the character and the level direction. Converges exactly
/// when `m - mprime ≥ 2`.
pub fn z2_majorant(
    m: i64,
    mprime: i64,
    a_max: u64,
    n_max: u64,
    nk: u64,
) -> Result<MajorantValue, SpectralError> {
    if nk == 0 || a_max == 0 {
        return Err(SpectralError::DivergentParameters(
            "a_max and nK must be positive".into(),
        ));
    }
    let p = m - mprime;
    if p < 2 {
        return Err(SpectralError::DivergentParameters(format!(
            "m - mprime = {p} < 2 gives a divergent character sum"
        )));
    }
    let pw = p as i32;
    let pf = p as f64;
    let pi = std::f64::consts::PI;
    let j_max = a_max
        .checked_mul(nk)
        .expect("a_max·nK fits in u64");
    let mut finite = 0.0;
    let mut tail_n = 0.0;
    for j in 1..=j_max {
        let a = j as f64 / nk as f64;
        let mult = (nk * j) as f64;
        let mut level_sum = 0.0;
        for n in 0..=n_max {
            let lam = 2.0 * pi * (2 * n + 1) as f64 * a + 4.0 * pi * pi * a * a;
            level_sum += lam.powi(-pw);
        }
        // Levels above n_max, bounded by the integral of the decreasing term.
        let w0 = 2.0 * pi * (2 * n_max + 1) as f64 * a + 4.0 * pi * pi * a * a;
        let n_tail = w0.powf(1.0 - pf) / (4.0 * pi * a * (pf - 1.0));
        // Factor 2 for the characters ±a.
        finite += 2.0 * mult * level_sum;
        tail_n += 2.0 * mult * n_tail;
    }
    // Characters beyond |a| = a_max: term-wise bound 2π(2n+1)a + 4π²a² ≥ 4π²a²,
    // then integral comparison of the resulting decreasing functions of j.
    let jf = j_max as f64;
    let nkf = nk as f64;
    let four_pi_sq = 4.0 * pi * pi;
    let piece_levels = nkf.powf(1.0 + 2.0 * pf) * four_pi_sq.powf(-pf) * jf.powf(2.0 - 2.0 * pf)
        / (2.0 * pf - 2.0);
    let piece_tail = nkf * nkf / (4.0 * pi * (pf - 1.0))
        * (four_pi_sq / (nkf * nkf)).powf(1.0 - pf)
        * jf.powf(3.0 - 2.0 * pf)
        / (2.0 * pf - 3.0);
    let tail_a = 2.0 * (piece_levels + piece_tail);
    let tail_bound = tail_n + tail_a;
    Ok(MajorantValue {
        finite,
        tail_bound,
        total: finite + tail_bound,
    })
}
