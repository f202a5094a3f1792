//! Problem parameters and exponent arithmetic for the focusing fourth-order
//! nonlinear Schrödinger equation
//!
//! ```text
//!     i ∂ₜu − Δ²u + μ Δu = −|u|^α u,    u(0) = u₀ ∈ H²(ℝᴺ),  μ ≥ 0.
//! ```
//!
//! The scaling u ↦ λ^{4/α} u(λ⁴t, λx) fixes the critical Sobolev index
//! γ_c = N/2 − 4/α: the problem is mass-critical at α = 8/N (γ_c = 0),
//! energy-critical at α = 8/(N−4) for N ≥ 5 (γ_c = 2), and intercritical in
//! between. The mass/energy interpolation exponent
//! σ_c = (8 − (N−4)α)/(Nα − 8) weights the conserved mass in the sharp
//! scattering/blow-up thresholds, and a family of Lebesgue exponents indexes
//! the space-time (Strichartz-type) norms in which scattering is measured.
//! This module holds all of that arithmetic; it does no grid work.

use crate::scalar::Real;
use thiserror::Error;

/// Errors from parameter derivation and exponent construction.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("spatial dimension must be >= 1, got {0}")]
    BadDimension(u32),
    #[error("nonlinearity power alpha must be > 0, got {0}")]
    BadAlpha(f64),
    #[error("dispersion coefficient mu must be >= 0, got {0}")]
    BadMu(f64),
    #[error("operation requires the intercritical regime, got {0:?} at (N={1}, alpha={2})")]
    NotIntercritical(RegimeTag, u32, f64),
}

/// The supremal admissible power 8/(N−4), or +∞ when N ≤ 4.
///
/// Represented by an explicit marker so comparisons against it can never
/// silently misbehave the way a large sentinel float would.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaStar<T: Real> {
    Finite(T),
    Infinite,
}

impl<T: Real> AlphaStar<T> {
    /// True when `alpha` lies strictly below this bound.
    pub fn admits(&self, alpha: T) -> bool {
        match self {
            AlphaStar::Finite(a) => alpha < *a,
            AlphaStar::Infinite => true,
        }
    }

    /// The finite value, if any.
    pub fn finite(&self) -> Option<T> {
        match self {
            AlphaStar::Finite(a) => Some(*a),
            AlphaStar::Infinite => None,
        }
    }
}

/// Problem parameters (N, μ, α) with the derived criticality indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params<T: Real = f64> {
    /// Spatial dimension N ≥ 1.
    pub n: u32,
    /// Coefficient μ ≥ 0 of the Laplacian term.
    pub mu: T,
    /// Nonlinearity power α > 0.
    pub alpha: T,
    /// Critical Sobolev index γ_c = N/2 − 4/α.
    pub gamma_c: T,
    /// Interpolation exponent σ_c = (8 − (N−4)α)/(Nα − 8); undefined on the
    /// mass-critical line Nα = 8.
    pub sigma_c: Option<T>,
    /// Supremal power α* = 8/(N−4) for N ≥ 5, +∞ otherwise.
    pub alpha_star: AlphaStar<T>,
}

/// Criticality classification of (N, α).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeTag {
    /// α = 8/N: the scaling preserves mass.
    MassCritical,
    /// 8/N < α < α*: between the two conserved-quantity scalings.
    Intercritical,
    /// N ≥ 5 and α = 8/(N−4): the scaling preserves the Ḣ² energy norm.
    EnergyCritical,
    /// Outside the range covered by the sharp dichotomy theory.
    OutOfTheory,
}

/// Regime tag plus the extra hypothesis flags the dichotomy theorems use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Regime {
    pub tag: RegimeTag,
    /// In the intercritical range, whether additionally α ≤ 8 (required by
    /// the finite-time blow-up theorem).
    pub alpha_le_8: bool,
}

/// The Lebesgue-exponent family indexing the scattering space-time norms.
///
/// The first four (q̄, r̄, k̄, m̄) are valid throughout the intercritical
/// range. The auxiliary ā = 4(α+2)/((N−2)α − 4) only defines a Lebesgue
/// exponent where (N−2)α > 4 (it is negative e.g. for N = 2), so it is
/// optional; b̄ and l̄ are always valid intercritically.
///
/// The family's domain is N ≥ 2: in dimension one b̄ = 2(α+2)/(10+3α)
/// never exceeds 1 on the intercritical range, so no member of the family
/// indexes a Lebesgue norm there.
#[derive(Debug, Clone, Copy)]
pub struct ExponentSet<T: Real = f64> {
    /// q̄ = 8(α+2)/(Nα) — time exponent of the admissible pair.
    pub q_bar: T,
    /// r̄ = α+2 — space exponent of the admissible pair.
    pub r_bar: T,
    /// k̄ = 4α(α+2)/(8 − (N−4)α).
    pub k_bar: T,
    /// m̄ = 4α(α+2)/(Nα² + (N−4)α − 8).
    pub m_bar: T,
    /// ā = 4(α+2)/((N−2)α − 4), only where the denominator is positive.
    pub a_bar: Option<T>,
    /// b̄ = 2N(α+2)/(2(N+4) − (N−4)α).
    pub b_bar: T,
    /// l̄ = 2Nα(α+2)/(Nα² + 4(N−2)α − 16).
    pub l_bar: T,
}

/// Derives the full parameter record from (N, μ, α).
///
/// Rejects μ < 0 (outside the scattering theory's scope) and α ≤ 0.
pub fn derive_params<T: Real>(n: u32, mu: T, alpha: T) -> Result<Params<T>, ModelError> {
    if n < 1 {
        return Err(ModelError::BadDimension(n));
    }
    if !(alpha > T::zero()) {
        return Err(ModelError::BadAlpha(alpha.to_f64().unwrap_or(f64::NAN)));
    }
    if !(mu >= T::zero()) {
        return Err(ModelError::BadMu(mu.to_f64().unwrap_or(f64::NAN)));
    }
    let nf = T::of_usize(n as usize);
    let four = T::of(4.0);
    let eight = T::of(8.0);
    let gamma_c = nf / T::of(2.0) - four / alpha;
    let n_alpha = nf * alpha;
    let sigma_c = if n_alpha == eight {
        None
    } else {
        Some((eight - (nf - four) * alpha) / (n_alpha - eight))
    };
    let alpha_star = if n >= 5 {
        AlphaStar::Finite(eight / (nf - four))
    } else {
        AlphaStar::Infinite
    };
    Ok(Params {
        n,
        mu,
        alpha,
        gamma_c,
        sigma_c,
        alpha_star,
    })
}

/// Classifies (N, α) into the criticality regime.
///
/// Every input gets a tag; `OutOfTheory` covers α below the mass-critical
/// power or at/above the energy-critical one without equality there.
pub fn classify_regime<T: Real>(p: &Params<T>) -> Regime {
    let nf = T::of_usize(p.n as usize);
    let eight = T::of(8.0);
    let mass_critical_alpha = eight / nf;
    let alpha_le_8 = p.alpha <= eight;
    let tag = if p.alpha == mass_critical_alpha {
        RegimeTag::MassCritical
    } else if p.alpha > mass_critical_alpha && p.alpha_star.admits(p.alpha) {
        RegimeTag::Intercritical
    } else if p.alpha_star.finite() == Some(p.alpha) {
        RegimeTag::EnergyCritical
    } else {
        RegimeTag::OutOfTheory
    };
    Regime { tag, alpha_le_8 }
}

/// Tests the fourth-order admissibility relation 4/q + N/r = N/2 with the
/// dimension-dependent range of r.
///
/// `q` and `r` may be `+∞` (the relation degrades gracefully: 4/∞ = 0).
/// Range of r: [2, 2N/(N−4)] for N ≥ 5; [2, ∞) for N = 4 (∞ excluded);
/// [2, ∞] for N ≤ 3 (∞ included). Tolerance 1e-12 absolute on the scaling
/// relation — the exponents of interest are exact rationals.
pub fn is_biharmonic_admissible<T: Real>(q: T, r: T, n: u32) -> bool {
    let two = T::of(2.0);
    let nf = T::of_usize(n as usize);
    if !(q >= T::one()) || !(r >= two) {
        return false;
    }
    // Range check on r.
    if n >= 5 {
        let r_max = two * nf / (nf - T::of(4.0));
        if r > r_max {
            return false;
        }
    } else if n == 4 && r.is_infinite() {
        return false;
    }
    let lhs = T::of(4.0) / q + nf / r;
    (lhs - nf / two).abs() <= T::of(1e-12)
}

/// Builds the scattering exponent family for an intercritical parameter set.
///
/// Fails outside the intercritical range, where the denominators vanish or
/// change sign and the family stops indexing meaningful norms, and in
/// dimension one, where b̄ ≤ 1 for every intercritical power.
pub fn scattering_exponents<T: Real>(p: &Params<T>) -> Result<ExponentSet<T>, ModelError> {
    let regime = classify_regime(p);
    if regime.tag != RegimeTag::Intercritical {
        return Err(ModelError::NotIntercritical(
            regime.tag,
            p.n,
            p.alpha.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if p.n < 2 {
        return Err(ModelError::BadDimension(p.n));
    }
    let nf = T::of_usize(p.n as usize);
    let a = p.alpha;
    let two = T::of(2.0);
    let four = T::of(4.0);
    let eight = T::of(8.0);
    let ap2 = a + two;

    let q_bar = eight * ap2 / (nf * a);
    let r_bar = ap2;
    let k_bar = four * a * ap2 / (eight - (nf - four) * a);
    let m_bar = four * a * ap2 / (nf * a * a + (nf - four) * a - eight);
    let a_den = (nf - two) * a - four;
    let a_bar = if a_den > T::zero() {
        Some(four * ap2 / a_den)
    } else {
        None
    };
    let b_bar = two * nf * ap2 / (two * (nf + four) - (nf - four) * a);
    let l_bar = two * nf * a * ap2 / (nf * a * a + four * (nf - two) * a - T::of(16.0));

    let set = ExponentSet {
        q_bar,
        r_bar,
        k_bar,
        m_bar,
        a_bar,
        b_bar,
        l_bar,
    };
    debug_assert!(exponent_invariants_hold(&set, p.n), "exponent invariants");
    Ok(set)
}

/// Checks the three structural invariants of an [`ExponentSet`]:
/// the admissibility of (q̄, r̄), the non-admissible-pair relation
/// 1/k̄ + 1/m̄ = 2/q̄, and positivity (> 1) of the always-valid exponents.
pub fn exponent_invariants_hold<T: Real>(e: &ExponentSet<T>, n: u32) -> bool {
    let one = T::one();
    let tol = T::of(1e-12);
    let admissible = is_biharmonic_admissible(e.q_bar, e.r_bar, n);
    let km_relation =
        (one / e.k_bar + one / e.m_bar - T::of(2.0) / e.q_bar).abs() <= tol;
    let positive = e.q_bar > one
        && e.r_bar > one
        && e.k_bar > one
        && e.m_bar > one
        && e.b_bar > one
        && e.l_bar > one;
    admissible && km_relation && positive
}
