//! Picard-lattice arithmetic on a boundary-stratification descriptor.
//!
//! The compactification is described by data only: a list of boundary
//! components `D_α` with anticanonical coefficients `κ_α` (so that
//! `-K_X = Σ κ_α D_α`), and for each subset `A` of components the number of
//! `F_p`-points of the locally closed stratum `D⁰_A` as a polynomial in `p`.
//! The Picard group is the free lattice on the `[D_α]` and the effective cone
//! is the simplicial cone they span, so the invariants of a line bundle class
//! `L = Σ l_α D_α` in the interior of the cone reduce to lattice arithmetic:
//!
//! * `a(L) = max_α κ_α / l_α`,
//! * `b(L) = #{α : κ_α = a(L)·l_α}`,
//! * `c(L) = Π 1/l_α` over the maximizing α.
//!
//! Everything in this module is exact rational arithmetic; no floating point.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use num::{BigInt, BigRational, One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// An irreducible boundary divisor with its coefficient in `-K_X`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    pub name: String,
    /// Coefficient `κ_α` of this component in `-K_X`; always at least 2.
    pub kappa: i64,
}

/// The `F_p`-point count of one locally closed stratum `D⁰_A`.
///
/// `count_poly[i]` multiplies `p^i`; the empty subset denotes the open orbit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumCount {
    pub subset: BTreeSet<String>,
    pub count_poly: Vec<i64>,
}

/// Full descriptor of a stratified boundary, the input to the local
/// Euler-factor formula and the invariant computations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeometryDescriptor {
    pub dim: u32,
    pub components: Vec<BoundaryComponent>,
    pub strata: Vec<StratumCount>,
    /// Optional total `#X(F_p)`; when present the strata must sum to it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_poly: Option<Vec<i64>>,
}

/// A line bundle class `Σ l_α D_α` with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineBundleClass {
    pub coeffs: BTreeMap<String, BigRational>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("open stratum invalid: {0}")]
    MissingOpenStratum(String),
    #[error("component {name}: kappa = {kappa} but every boundary coefficient must be >= 2")]
    KappaTooSmall { name: String, kappa: i64 },
    #[error("unknown or missing component {0}")]
    UnknownComponent(String),
    #[error("strata point counts do not sum to total_poly (coefficient of p^{0} differs)")]
    TotalMismatch(usize),
    #[error("stratum {0:?} has an all-zero count polynomial; omit empty strata instead")]
    EmptyStratum(BTreeSet<String>),
    #[error("bundle class is not in the interior of the effective cone (l_{0} <= 0)")]
    NotInInterior(String),
}

impl GeometryDescriptor {
    pub fn from_json_str(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
        Self::from_json_str(&text)
    }

    pub fn component_names(&self) -> BTreeSet<String> {
        self.components.iter().map(|c| c.name.clone()).collect()
    }

    /// Evaluates one count polynomial at the integer `p`, exactly.
    pub fn eval_poly(poly: &[i64], p: u64) -> i128 {
        let mut acc: i128 = 0;
        for &c in poly.iter().rev() {
            acc = acc * p as i128 + c as i128;
        }
        acc
    }
}

impl LineBundleClass {
    /// The constant class `t·Σ D_α`, one coefficient per component.
    pub fn scalar(geom: &GeometryDescriptor, t: BigRational) -> Self {
        let coeffs = geom
            .components
            .iter()
            .map(|c| (c.name.clone(), t.clone()))
            .collect();
        LineBundleClass { coeffs }
    }

    pub fn from_pairs<I: IntoIterator<Item = (String, BigRational)>>(pairs: I) -> Self {
        LineBundleClass {
            coeffs: pairs.into_iter().collect(),
        }
    }

    /// The anticanonical class `Σ κ_α D_α` of the descriptor.
    pub fn anticanonical(geom: &GeometryDescriptor) -> Self {
        let coeffs = geom
            .components
            .iter()
            .map(|c| (c.name.clone(), BigRational::from(BigInt::from(c.kappa))))
            .collect();
        LineBundleClass { coeffs }
    }

    pub fn scale(&self, t: &BigRational) -> Self {
        LineBundleClass {
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, v)| (k.clone(), v * t))
                .collect(),
        }
    }
}

/// Checks every structural invariant of a descriptor.
///
/// Required: all `κ_α >= 2`; every stratum subset references declared
/// components; exactly one stratum has the empty subset and its count
/// polynomial equals `p^dim`; no stratum has an all-zero polynomial; when
/// `total_poly` is given the strata sum to it coefficientwise.
pub fn validate(geom: &GeometryDescriptor) -> Result<(), GeometryError> {
    for c in &geom.components {
        if c.kappa < 2 {
            return Err(GeometryError::KappaTooSmall {
                name: c.name.clone(),
                kappa: c.kappa,
            });
        }
    }
    let names = geom.component_names();
    let mut open_seen = false;
    for st in &geom.strata {
        for member in &st.subset {
            if !names.contains(member) {
                return Err(GeometryError::UnknownComponent(member.clone()));
            }
        }
        if st.count_poly.iter().all(|&c| c == 0) {
            return Err(GeometryError::EmptyStratum(st.subset.clone()));
        }
        if st.subset.is_empty() {
            if open_seen {
                return Err(GeometryError::MissingOpenStratum(
                    "more than one stratum with empty subset".into(),
                ));
            }
            open_seen = true;
            let mut expected = vec![0i64; geom.dim as usize + 1];
            expected[geom.dim as usize] = 1;
            let mut got = st.count_poly.clone();
            got.resize(expected.len().max(got.len()), 0);
            let mut want = expected.clone();
            want.resize(got.len(), 0);
            if got != want {
                return Err(GeometryError::MissingOpenStratum(format!(
                    "open stratum count must be p^{}, found {:?}",
                    geom.dim, st.count_poly
                )));
            }
        }
    }
    if !open_seen {
        return Err(GeometryError::MissingOpenStratum(
            "no stratum with empty subset".into(),
        ));
    }
    if let Some(total) = &geom.total_poly {
        let width = total
            .len()
            .max(geom.strata.iter().map(|s| s.count_poly.len()).max().unwrap_or(0));
        let mut sum = vec![0i64; width];
        for st in &geom.strata {
            for (i, &c) in st.count_poly.iter().enumerate() {
                sum[i] += c;
            }
        }
        for i in 0..width {
            let want = total.get(i).copied().unwrap_or(0);
            if sum[i] != want {
                return Err(GeometryError::TotalMismatch(i));
            }
        }
    }
    Ok(())
}

fn matched_coeffs<'a>(
    geom: &'a GeometryDescriptor,
    l: &'a LineBundleClass,
) -> Result<Vec<(&'a BoundaryComponent, &'a BigRational)>, GeometryError> {
    for name in l.coeffs.keys() {
        if !geom.components.iter().any(|c| &c.name == name) {
            return Err(GeometryError::UnknownComponent(name.clone()));
        }
    }
    geom.components
        .iter()
        .map(|c| {
            l.coeffs
                .get(&c.name)
                .map(|v| (c, v))
                .ok_or_else(|| GeometryError::UnknownComponent(c.name.clone()))
        })
        .collect()
}

/// True iff every coefficient `l_α` is strictly positive, i.e. the class lies
/// in the interior of the simplicial effective cone.
pub fn effective_interior(
    geom: &GeometryDescriptor,
    l: &LineBundleClass,
) -> Result<bool, GeometryError> {
    let pairs = matched_coeffs(geom, l)?;
    Ok(pairs.iter().all(|(_, v)| v.is_positive()))
}

fn interior_pairs<'a>(
    geom: &'a GeometryDescriptor,
    l: &'a LineBundleClass,
) -> Result<Vec<(&'a BoundaryComponent, &'a BigRational)>, GeometryError> {
    let pairs = matched_coeffs(geom, l)?;
    if let Some((c, _)) = pairs.iter().find(|(_, v)| !v.is_positive()) {
        return Err(GeometryError::NotInInterior(c.name.clone()));
    }
    Ok(pairs)
}

/// `a(L) = max_α κ_α / l_α`, exact.
pub fn a_invariant(
    geom: &GeometryDescriptor,
    l: &LineBundleClass,
) -> Result<BigRational, GeometryError> {
    let pairs = interior_pairs(geom, l)?;
    let mut best: Option<BigRational> = None;
    for (c, v) in pairs {
        let ratio = BigRational::from(BigInt::from(c.kappa)) / v;
        best = Some(match best {
            Some(b) if b >= ratio => b,
            _ => ratio,
        });
    }
    Ok(best.expect("descriptor has at least one component"))
}

/// `b(L)`: the number of components attaining the maximum in `a(L)`.
pub fn b_invariant(geom: &GeometryDescriptor, l: &LineBundleClass) -> Result<u32, GeometryError> {
    let a = a_invariant(geom, l)?;
    let pairs = interior_pairs(geom, l)?;
    let count = pairs
        .iter()
        .filter(|(c, v)| BigRational::from(BigInt::from(c.kappa)) == &a * *v)
        .count();
    Ok(count as u32)
}

/// `c(L) = Π 1/l_α` over the maximizing components.
pub fn c_invariant(
    geom: &GeometryDescriptor,
    l: &LineBundleClass,
) -> Result<BigRational, GeometryError> {
    let a = a_invariant(geom, l)?;
    let pairs = interior_pairs(geom, l)?;
    let mut prod = BigRational::one();
    for (c, v) in pairs {
        if BigRational::from(BigInt::from(c.kappa)) == &a * v {
            prod /= v;
        }
    }
    Ok(prod)
}

/// Renders a rational as `n` when integral and `n/d` otherwise.
pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Parses `n`, `-n`, or `n/d` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let numer: BigInt = n.trim().parse().map_err(|_| format!("bad numerator {n:?}"))?;
        let denom: BigInt = d.trim().parse().map_err(|_| format!("bad denominator {d:?}"))?;
        if denom.is_zero() {
            return Err("zero denominator".into());
        }
        Ok(BigRational::new(numer, denom))
    } else {
        let numer: BigInt = t.parse().map_err(|_| format!("bad rational {t:?}"))?;
        Ok(BigRational::from(numer))
    }
}
