//! Height zeta function toolkit for the Heisenberg group compactified in P³.
//!
//! The crate computes and cross-checks the concrete quantities that appear in
//! the analysis of rational points of bounded height on this compactification:
//!
//! * [`geometry`]: Picard-lattice arithmetic on a boundary-stratification
//!   descriptor, effective-cone membership, and the invariants `a(L)`, `b(L)`,
//!   `c(L)` in exact rational arithmetic.
//! * [`local`]: non-archimedean local height integrals, namely the strata
//!   Euler factor, exact valuation-shell oracles, character-twisted factors,
//!   and Riemann zeta helpers.
//! * [`arch`]: archimedean height integrals, namely the radial integral, its
//!   Fourier-twisted variants, and closed-form gamma cross-checks.
//! * [`points`]: exact rational points of the group, their heights, and fast
//!   counting `N(B)` by Möbius inversion over the lattice ball.
//! * [`spectral`]: the oscillator representation, with Hermite eigenfunctions,
//!   harmonic-oscillator eigenvalues, fixed-vector multiplicities, and the
//!   majorant series for the infinite-dimensional spectral remainder.
//! * [`zeta`]: assembly of the height zeta function from the main term `Z₀`,
//!   the abelian character sum `Z₁`, the direct point sum, and residue
//!   estimation.
//! * [`cli`]: a single binary (`hzeta`) exposing every operation with
//!   machine-readable JSON/CSV output, plus `reproduce` runners for the
//!   acceptance checks.
//!
//! With the default `parallel` feature the counting and assembly kernels run
//! data-parallel on rayon; building with `--no-default-features` selects the
//! sequential fallback. Results are byte-identical either way: integer
//! reductions are order-independent and floating-point reductions are always
//! performed in a fixed deterministic order.

pub mod arch;
pub mod cli;
pub mod geometry;
pub mod local;
pub mod points;
pub mod spectral;
pub mod zeta;
