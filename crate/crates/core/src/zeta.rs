//! Assembly of the height zeta function.
//!
//! The spectral decomposition splits the zeta series into the trivial part
//! `Z₀`, the abelian character sum `Z₁`, and an infinite-dimensional
//! remainder `Z₂`. Here `Z₀` is an Euler product times the radial
//! archimedean integral, `Z₁` is summed over twisted characters with a
//! conservative truncation bound, and the direct point sum provides the
//! left-hand side, so that `z_direct ≈ z0 + z1 + Z₂` can be probed
//! numerically. `Z₂` itself is never evaluated term by term; only its
//! convergence majorant is reported for context.
//!
//! All reductions run in a fixed order (or in exactly-associative integer
//! arithmetic), so reports are byte-identical for every thread count.

use std::collections::BTreeMap;

use num::complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{self, ArchError, QuadratureConfig};
use crate::local::{self, EtaCharacter, EvalPoint, LocalError};
use crate::points;
use crate::spectral::{self, SpectralError};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Error)]
pub enum ZetaError {
    #[error("evaluation point outside the supported domain: {0}")]
    DomainError(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Local(#[from] LocalError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// A complex number in the fixed `{re, im}` wire format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

/// Consistency report for the decomposition `Z = Z₀ + Z₁ + Z₂` at one
/// evaluation point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZetaReport {
    pub s: ComplexValue,
    pub z0: ComplexValue,
    pub z1: ComplexValue,
    pub z1_truncation_bound: f64,
    pub z_direct: ComplexValue,
    pub z_direct_tail_bound: f64,
    /// `z_direct + tail midpoint - z0 - z1`: everything the explicit parts do
    /// not account for, chiefly the untracked `Z₂` term.
    pub residual: ComplexValue,
    /// Convergence majorant of the remainder series at the documented
    /// default parameters (m = 4, mprime = 2, a_max = n_max = 64, nK = 1);
    /// an upper bound for a different weighting of the same spectrum, not
    /// for `|Z₂(s)|` itself.
    pub majorant_note: f64,
    /// The residual target has no externally pinned value; the comparison is
    /// an engineering check, and this flag says so in the serialized output.
    pub exploratory: bool,
}

/// Trivial-spectrum part `ζ(s-3)/ζ(s) · (radial archimedean integral)`,
/// convergent for `Re(s) > 4`.
pub fn z0(s: EvalPoint) -> Result<Complex64, ZetaError> {
    if s.re <= 4.0 {
        return Err(ZetaError::DomainError(format!(
            "Re(s) = {} must exceed 4",
            s.re
        )));
    }
    let num = local::riemann_zeta(EvalPoint::new(s.re - 3.0, s.im))?;
    let den = local::riemann_zeta(s)?;
    let radial = arch::radial_height_integral(s, &QuadratureConfig::default())?;
    Ok(num / den * radial.value)
}

fn eta_term(s: EvalPoint, a1: i64, a2: i64, fourier: Complex64) -> Result<Complex64, ZetaError> {
    let eta = EtaCharacter::new(a1, a2)?;
    let bad = eta.bad_primes();
    let mut finite = Complex64::new(1.0, 0.0) / local::partial_zeta(&bad, s)?;
    for &p in &bad {
        finite *= local::twisted_local_factor_eta(p, &eta, s)?;
    }
    Ok(finite * fourier)
}

/// Abelian character sum over `0 < max(|a₁|,|a₂|) ≤ a_max`, returned with a
/// conservative truncation bound: the first discarded shell is extrapolated
/// from the decay of the last two computed shells and multiplied by 16, then
/// the geometric remainder is summed.
pub fn z1(s: EvalPoint, a_max: i64) -> Result<(Complex64, f64), ZetaError> {
    if s.re <= 4.0 {
        return Err(ZetaError::DomainError(format!(
            "Re(s) = {} must exceed 4",
            s.re
        )));
    }
    if a_max < 1 {
        return Err(ZetaError::DomainError(format!(
            "a_max = {a_max} must be at least 1"
        )));
    }
    // The archimedean factor depends only on a₁² + a₂²; evaluate each
    // distinct frequency once (in parallel when available), keyed in sorted
    // order so the result is independent of scheduling.
    let mut rho_sq: Vec<i64> = Vec::new();
    for a1 in -a_max..=a_max {
        for a2 in -a_max..=a_max {
            if (a1, a2) != (0, 0) {
                rho_sq.push(a1 * a1 + a2 * a2);
            }
        }
    }
    rho_sq.sort_unstable();
    rho_sq.dedup();
    let cfg = QuadratureConfig::default();
    let eval_fourier = |&r2: &i64| -> Result<(i64, Complex64), ZetaError> {
        // Any decomposition of r2 gives the same integral; (a1, a2) enters
        // only through the norm.
        let f = arch::fourier_height_integral_rho(s, (r2 as f64).sqrt(), &cfg)?;
        Ok((r2, f.value))
    };
    #[cfg(feature = "parallel")]
    let computed: Vec<Result<(i64, Complex64), ZetaError>> =
        rho_sq.par_iter().map(eval_fourier).collect();
    #[cfg(not(feature = "parallel"))]
    let computed: Vec<Result<(i64, Complex64), ZetaError>> =
        rho_sq.iter().map(eval_fourier).collect();
    let mut fourier_by_norm: BTreeMap<i64, Complex64> = BTreeMap::new();
    for item in computed {
        let (r2, f) = item?;
        fourier_by_norm.insert(r2, f);
    }
    // Fixed lexicographic summation order for byte-stable totals.
    let mut total = Complex64::new(0.0, 0.0);
    let mut shell_mass = vec![0.0f64; (a_max + 1) as usize];
    for a1 in -a_max..=a_max {
        for a2 in -a_max..=a_max {
            if (a1, a2) == (0, 0) {
                continue;
            }
            let f = fourier_by_norm[&(a1 * a1 + a2 * a2)];
            let term = eta_term(s, a1, a2, f)?;
            total += term;
            let shell = a1.abs().max(a2.abs()) as usize;
            shell_mass[shell] += term.norm();
        }
    }
    let last = shell_mass[a_max as usize];
    let prev = if a_max >= 2 {
        shell_mass[(a_max - 1) as usize]
    } else {
        0.0
    };
    let ratio = if prev > 0.0 && last > 0.0 {
        (last / prev).clamp(1e-6, 0.8)
    } else {
        0.5
    };
    let truncation = 16.0 * last * ratio / (1.0 - ratio);
    Ok((total, truncation))
}

/// Direct height series `Σ_γ H(γ)^{-s}` over all points with `H ≤ B`,
/// evaluated through the primitive-norm histogram, plus the counting-based
/// tail bound `2.5·(90/π²)·B^{4-Re(s)}·Re(s)/(Re(s)-4)`.
pub fn z_direct(s: EvalPoint, bound: f64) -> Result<(Complex64, f64), ZetaError> {
    if s.re < 5.0 {
        return Err(ZetaError::DomainError(format!(
            "Re(s) = {} is below the safety margin Re(s) >= 5",
            s.re
        )));
    }
    if !(1.0..=3000.0).contains(&bound) {
        return Err(ZetaError::DomainError(format!(
            "bound B = {bound} outside the supported range [1, 3000]"
        )));
    }
    let hist = points::primitive_norm_histogram(bound);
    let sc = s.as_complex();
    let half_s = -sc / 2.0;
    // Chunked reduction with a fixed chunk size and in-order final fold:
    // identical results for any thread count.
    const CHUNK: usize = 4096;
    let chunk_sum = |c: usize| -> Complex64 {
        let lo = (c * CHUNK).max(1);
        let hi = ((c + 1) * CHUNK).min(hist.len());
        let mut acc = Complex64::new(0.0, 0.0);
        for n in lo..hi {
            if hist[n] != 0 {
                acc += hist[n] as f64 * arch::real_pow(n as f64, half_s);
            }
        }
        acc
    };
    let n_chunks = hist.len().div_ceil(CHUNK);
    #[cfg(feature = "parallel")]
    let partials: Vec<Complex64> = (0..n_chunks).into_par_iter().map(chunk_sum).collect();
    #[cfg(not(feature = "parallel"))]
    let partials: Vec<Complex64> = (0..n_chunks).map(chunk_sum).collect();
    let mut total = Complex64::new(0.0, 0.0);
    for part in partials {
        total += part;
    }
    let sigma = s.re;
    let tail = 2.5 * (90.0 / std::f64::consts::PI.powi(2))
        * bound.powf(4.0 - sigma)
        * sigma
        / (sigma - 4.0);
    Ok((total, tail))
}

/// Least-squares fit of `n = c·x` through the origin; returns `(c, std_err)`.
///
/// The quoted error is the larger of the usual regression standard error and
/// the spread between this fit and the plain mean of the ratios `n/x`. The
/// ratio mean weighs small samples more, so the spread picks up the
/// subleading growth term that a pure `c·x` model leaves in the residuals;
/// without it the error bar understates how much the estimate drifts when
/// the sample window moves.
fn fit_through_origin(samples: &[(f64, f64)]) -> (f64, f64) {
    let sxx: f64 = samples.iter().map(|&(x, _)| x * x).sum();
    let sxy: f64 = samples.iter().map(|&(x, n)| x * n).sum();
    let c = sxy / sxx;
    let dof = samples.len().saturating_sub(1).max(1) as f64;
    let ss_res: f64 = samples
        .iter()
        .map(|&(x, n)| {
            let e = n - c * x;
            e * e
        })
        .sum();
    let var_c = ss_res / dof / sxx;
    let ratio_mean: f64 =
        samples.iter().map(|&(x, n)| n / x).sum::<f64>() / samples.len() as f64;
    (c, var_c.sqrt().max((c - ratio_mean).abs()))
}

fn check_bounds_list(bounds: &[f64]) -> Result<(), ZetaError> {
    if bounds.len() < 3 {
        return Err(ZetaError::InsufficientData(format!(
            "need at least 3 bounds, got {}",
            bounds.len()
        )));
    }
    if bounds.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ZetaError::InsufficientData(
            "bounds must be strictly increasing".into(),
        ));
    }
    if bounds[0] < 1.0 {
        return Err(ZetaError::InsufficientData(
            "bounds must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Residue of the zeta function at its rightmost pole, recovered from point
/// counts: fit `N(B) = C·B⁴` and return `4·C` together with the standard
/// error of the fit (scaled by the same factor 4).
pub fn residue_estimate_detailed(bounds: &[f64]) -> Result<(f64, f64), ZetaError> {
    check_bounds_list(bounds)?;
    let samples: Vec<(f64, f64)> = bounds
        .iter()
        .map(|&b| (b.powi(4), points::count_fast(b) as f64))
        .collect();
    let (c, se) = fit_through_origin(&samples);
    Ok((4.0 * c, 4.0 * se))
}

/// The residue estimate alone; see [`residue_estimate_detailed`].
pub fn residue_estimate(bounds: &[f64]) -> Result<f64, ZetaError> {
    residue_estimate_detailed(bounds).map(|(r, _)| r)
}

/// Default remainder-majorant parameters quoted in every report.
pub const MAJORANT_DEFAULTS: (i64, i64, u64, u64, u64) = (4, 2, 64, 64, 1);

/// Full consistency report at `(s, B, a_max)`: all decomposition pieces,
/// their bounds, and the unexplained residual.
pub fn report(s: EvalPoint, bound: f64, a_max: i64) -> Result<ZetaReport, ZetaError> {
    if s.re < 5.0 {
        return Err(ZetaError::DomainError(format!(
            "Re(s) = {} is below the safety margin Re(s) >= 5",
            s.re
        )));
    }
    let (direct, tail) = z_direct(s, bound)?;
    let z0_val = z0(s)?;
    let (z1_val, z1_bound) = z1(s, a_max)?;
    let residual = direct + Complex64::new(tail / 2.0, 0.0) - z0_val - z1_val;
    let (m, mprime, am, nm, nk) = MAJORANT_DEFAULTS;
    let majorant = spectral::z2_majorant(m, mprime, am, nm, nk)?;
    debug_assert!(tail >= 0.0 && z1_bound >= 0.0);
    Ok(ZetaReport {
        s: ComplexValue { re: s.re, im: s.im },
        z0: z0_val.into(),
        z1: z1_val.into(),
        z1_truncation_bound: z1_bound,
        z_direct: direct.into(),
        z_direct_tail_bound: tail,
        residual: residual.into(),
        majorant_note: majorant.total,
        exploratory: true,
    })
}
