//! Scalar functionals, the localized virial weight, and the cutoff.
//!
//! The conserved and monitored quantities of the flow:
//!
//! ```text
//!   M(u)   = ∫|u|²                                   (mass)
//!   E_μ(u) = ½‖Δu‖² + (μ/2)‖∇u‖² − 1/(α+2)∫|u|^{α+2}  (energy, focusing sign)
//!   K_μ(u) = ‖Δu‖² + (μ/2)‖∇u‖² − Nα/(4(α+2))∫|u|^{α+2}
//! ```
//!
//! K_μ is the virial rate with weight |x|² up to the factor 16; its strict
//! negativity along a trajectory certifies blow-up. The Weinstein quotient
//! J(u) = ∫|u|^{α+2} / (‖Δu‖^{Nα/4}‖u‖^{(8−(N−4)α)/4}) is maximized by the
//! ground state, and its maximum is the sharp interpolation constant behind
//! the scattering/blow-up thresholds.
//!
//! The localized virial weight is φ_R(r) = R²θ(r/R) where θ″ = ζ is 2 on
//! [0,1], tapers smoothly to 0 on [1,2] through a C⁴ polynomial step, and
//! vanishes beyond 2. Then φ_R = r² for r ≤ R, 0 ≤ φ″_R ≤ 2 everywhere,
//! and all derivatives of order ≥ 2 vanish beyond 2R while φ′_R saturates
//! at the constant R·∫₀²ζ = 3R (so ‖∇φ_R‖_∞ ≲ R). θ is C⁶, so the triple
//! Laplacian Δ³φ_R demanded by the virial rate exists classically; every
//! derivative here is evaluated from closed-form polynomials, never by
//! numerical differentiation.
//!
//! The virial quantity and its exact time derivative along the flow:
//!
//! ```text
//!   M_φ(u)  = 2∫ φ′ Im(ū ∂_r u) dx
//!   d/dt M_φ = ∫Δ³φ|u|² − 2∫Δ²φ|∂_r u|²
//!            + 8∫[φ″|∂²_r u|² + (N−1)(φ′/r)|∂_r u|²/r²]
//!            − 4∫(Δφ)″|∂_r u|² + 4μ∫φ″|∂_r u|² − μ∫Δ²φ|u|²
//!            − 2α/(α+2)∫Δφ|u|^{α+2}
//! ```
//!
//! which collapses to 16·K_μ(u) when φ = |x|² on the support of u.

use crate::model::Params;
use crate::radial_grid::{Grid, RadialField};
use crate::scalar::{Cplx, Real};
use std::sync::Arc;
use thiserror::Error;

/// Errors from functional evaluation and weight construction.
#[derive(Debug, Error, PartialEq)]
pub enum FunctionalsError {
    #[error("quotient undefined for the zero field")]
    ZeroField,
    #[error("weight scale {r_scale} needs 2R < R_max = {r_max}")]
    WeightTooLarge { r_scale: f64, r_max: f64 },
    #[error("cutoff scale {r_scale} must satisfy 0 < R <= R_max = {r_max}")]
    CutoffTooLarge { r_scale: f64, r_max: f64 },
}

/// Scalar observables recorded along a trajectory.
#[derive(Debug, Clone, Copy)]
pub struct Observables<T: Real = f64> {
    pub t: T,
    pub mass: T,
    pub energy: T,
    pub k_mu: T,
    pub k_0: T,
    /// ∫|u|^{α+2} (the norm to the power α+2, not the norm itself).
    pub l_alpha2: T,
    pub delta_l2: T,
    pub grad_l2: T,
    pub m_phi_r: T,
    pub m_rate: T,
}

/// The shared integrals every functional is built from, restricted to the
/// first `limit` nodes (pass `grid.m` for the full domain; sponged runs
/// restrict their conservation monitors to the interior).
struct CoreSums<T: Real> {
    mass: T,
    grad2: T,
    delta2: T,
    /// ∫|u|^{α+2}
    p_alpha2: T,
}

fn core_sums<T: Real>(p: &Params<T>, u: &RadialField<T>, limit: usize) -> CoreSums<T> {
    let g = u.grid();
    let m = g.m;
    assert!(limit <= m, "interior limit exceeds grid");
    let mut du = vec![Cplx::new(T::zero(), T::zero()); m];
    let mut lu = du.clone();
    g.radial_derivative(&u.values, &mut du);
    g.apply_laplacian(&u.values, &mut lu);
    let half_p = (p.alpha + T::of(2.0)) * T::of(0.5);
    let mut mass = T::zero();
    let mut grad2 = T::zero();
    let mut delta2 = T::zero();
    let mut p_alpha2 = T::zero();
    for j in 0..limit {
        let wj = g.w[j];
        let a2 = u.values[j].norm_sqr();
        mass += wj * a2;
        grad2 += wj * du[j].norm_sqr();
        delta2 += wj * lu[j].norm_sqr();
        p_alpha2 += wj * a2.powf(half_p);
    }
    CoreSums {
        mass,
        grad2,
        delta2,
        p_alpha2,
    }
}

/// Mass M(u) = ∫|u|².
pub fn mass<T: Real>(u: &RadialField<T>) -> T {
    u.grid().integrate_abs2(&u.values)
}

/// Energy E_μ(u) = ½‖Δu‖² + (μ/2)‖∇u‖² − 1/(α+2)∫|u|^{α+2}.
pub fn energy<T: Real>(p: &Params<T>, u: &RadialField<T>) -> T {
    let s = core_sums(p, u, u.grid().m);
    energy_from_sums(p, &s)
}

fn energy_from_sums<T: Real>(p: &Params<T>, s: &CoreSums<T>) -> T {
    let half = T::of(0.5);
    half * s.delta2 + half * p.mu * s.grad2 - s.p_alpha2 / (p.alpha + T::of(2.0))
}

fn k_from_sums<T: Real>(p: &Params<T>, s: &CoreSums<T>, with_mu: bool) -> T {
    let nf = T::of_usize(p.n as usize);
    let coeff = nf * p.alpha / (T::of(4.0) * (p.alpha + T::of(2.0)));
    let mu_term = if with_mu {
        T::of(0.5) * p.mu * s.grad2
    } else {
        T::zero()
    };
    s.delta2 + mu_term - coeff * s.p_alpha2
}

/// K_μ(u) = ‖Δu‖² + (μ/2)‖∇u‖² − Nα/(4(α+2))∫|u|^{α+2};
/// `with_mu = false` gives the μ = 0 instance K₀.
pub fn k_functional<T: Real>(p: &Params<T>, u: &RadialField<T>, with_mu: bool) -> T {
    let s = core_sums(p, u, u.grid().m);
    k_from_sums(p, &s, with_mu)
}

/// The Weinstein/Gagliardo–Nirenberg quotient
/// J(u) = ∫|u|^{α+2} / (‖Δu‖^{Nα/4} ‖u‖^{(8−(N−4)α)/4}).
pub fn gn_quotient<T: Real>(p: &Params<T>, u: &RadialField<T>) -> Result<T, FunctionalsError> {
    let s = core_sums(p, u, u.grid().m);
    if s.mass == T::zero() {
        return Err(FunctionalsError::ZeroField);
    }
    let nf = T::of_usize(p.n as usize);
    let four = T::of(4.0);
    let e_delta = nf * p.alpha / four; // exponent of ‖Δu‖
    let e_l2 = (T::of(8.0) - (nf - four) * p.alpha) / four; // exponent of ‖u‖
    let denom = s.delta2.sqrt().powf(e_delta) * s.mass.sqrt().powf(e_l2);
    Ok(s.p_alpha2 / denom)
}

// --- smoothstep polynomial family ------------------------------------------

/// Coefficients (ascending powers) of the C⁴ polynomial step S on [0,1]:
/// S(0)=0, S(1)=1, S′..S⁗ vanish at both ends, S′ = 630x⁴(1−x)⁴ ≥ 0.
const STEP_COEFFS: [f64; 10] = [
    0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0,
];

fn poly_eval<T: Real>(coeffs: &[f64], x: T) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, &c| acc * x + T::of(c))
}

fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    (1..coeffs.len()).map(|k| coeffs[k] * k as f64).collect()
}

fn poly_antiderivative(coeffs: &[f64]) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(coeffs.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64))
        .collect()
}

/// Evaluates the C⁴ step S at `x` (clamped to [0,1]).
pub fn smoothstep<T: Real>(x: T) -> T {
    let xc = x.max(T::zero()).min(T::one());
    poly_eval(&STEP_COEFFS, xc)
}

// --- localized virial weight ------------------------------------------------

/// The localized virial weight φ_R = R²θ(r/R) with every radial derivative
/// the rate formula needs, all sampled from closed forms on the grid.
pub struct Weight<T: Real = f64> {
    grid: Arc<Grid<T>>,
    /// Localization scale R (φ_R = r² for r ≤ R).
    pub r_scale: T,
    /// φ_R(r_j).
    pub phi: Vec<T>,
    /// φ′_R.
    pub dphi: Vec<T>,
    /// φ″_R ∈ [0, 2].
    pub d2phi: Vec<T>,
    /// φ′_R/r, evaluated analytically per branch (finite at the origin).
    pub dphi_over_r: Vec<T>,
    /// Δφ_R ∈ [0, 2N].
    pub lap_phi: Vec<T>,
    /// (Δφ_R)″.
    pub lap_phi_d2: Vec<T>,
    /// Δ²φ_R.
    pub bilap_phi: Vec<T>,
    /// Δ³φ_R.
    pub trilap_phi: Vec<T>,
}

/// Smooth radial cutoff χ_R: 1 on r ≤ R/2, 0 on r ≥ R, C⁴ in between.
pub struct Cutoff<T: Real = f64> {
    grid: Arc<Grid<T>>,
    /// Outer scale R.
    pub r_scale: T,
    /// χ_R(r_j) ∈ [0, 1].
    pub chi: Vec<T>,
}

/// Jet of the radial Laplacian: given derivatives f⁽⁰⁾..f⁽ᴸ⁻¹⁾ of a radial
/// function at r > 0, returns derivatives (Δf)⁽⁰⁾..(Δf)⁽ᴸ⁻³⁾ using
/// Δf = f″ + (N−1) f′/r and the Leibniz expansion of dʲ/drʲ (f′/r).
fn jet_radial_laplacian<T: Real>(f: &[T], r: T, n: u32) -> Vec<T> {
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    const FACT: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];
    let out_len = f.len() - 2;
    debug_assert!(out_len <= 5);
    let nm1 = T::of_usize(n as usize - 1);
    let mut g = Vec::with_capacity(out_len);
    for j in 0..out_len {
        let mut sum = T::zero();
        let mut r_pow = r; // r^{i+1}
        for i in 0..=j {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let c = T::of(sign * BINOM[j][i] * FACT[i]);
            sum += c * f[j + 1 - i] / r_pow;
            r_pow *= r;
        }
        g.push(f[j + 2] + nm1 * sum);
    }
    g
}

/// Builds φ_R and its derivative samples; requires 2R < R_max so the
/// transition region lies inside the domain.
pub fn make_weight<T: Real>(
    grid: &Arc<Grid<T>>,
    r_scale: T,
) -> Result<Weight<T>, FunctionalsError> {
    if !(r_scale > T::zero()) || T::of(2.0) * r_scale >= grid.r_max {
        return Err(FunctionalsError::WeightTooLarge {
            r_scale: r_scale.to_f64().unwrap_or(f64::NAN),
            r_max: grid.r_max.to_f64().unwrap_or(f64::NAN),
        });
    }
    // Polynomial tables: S and its derivatives, P = ∫S, P₂ = ∫P.
    let s0 = STEP_COEFFS.to_vec();
    let s1 = poly_derivative(&s0);
    let s2 = poly_derivative(&s1);
    let s3 = poly_derivative(&s2);
    let s4 = poly_derivative(&s3);
    let p1 = poly_antiderivative(&s0);
    let p2 = poly_antiderivative(&p1);
    let p2_at_1 = poly_eval::<T>(&p2, T::one());

    let m = grid.m;
    let two = T::of(2.0);
    let three = T::of(3.0);
    let mut wgt = Weight {
        grid: grid.clone(),
        r_scale,
        phi: vec![T::zero(); m],
        dphi: vec![T::zero(); m],
        d2phi: vec![T::zero(); m],
        dphi_over_r: vec![T::zero(); m],
        lap_phi: vec![T::zero(); m],
        lap_phi_d2: vec![T::zero(); m],
        bilap_phi: vec![T::zero(); m],
        trilap_phi: vec![T::zero(); m],
    };
    for j in 0..m {
        let r = grid.r[j];
        let s = r / r_scale;
        // θ jet in the similarity variable s, orders 0..6.
        let (theta, dphi_over_r_theta): ([T; 7], T) = if s <= T::one() {
            (
                [
                    s * s,
                    two * s,
                    two,
                    T::zero(),
                    T::zero(),
                    T::zero(),
                    T::zero(),
                ],
                two,
            )
        } else {
            // On [1,2] set t = 2−s (clamped at 0 so the same closed form
            // covers s ≥ 2, where every polynomial term vanishes).
            let t = (two - s).max(T::zero());
            let th0 = three * s - two - two * p2_at_1 + two * poly_eval(&p2, t);
            let th1 = three - two * poly_eval(&p1, t);
            let th2 = two * poly_eval(&s0, t);
            let th3 = -two * poly_eval(&s1, t);
            let th4 = two * poly_eval(&s2, t);
            let th5 = -two * poly_eval(&s3, t);
            let th6 = two * poly_eval(&s4, t);
            ([th0, th1, th2, th3, th4, th5, th6], th1 / s)
        };
        // φ⁽ᵏ⁾(r) = R^{2−k} θ⁽ᵏ⁾(s).
        let mut phi_jet = [T::zero(); 7];
        let mut scale = r_scale * r_scale;
        for k in 0..7 {
            phi_jet[k] = scale * theta[k];
            scale /= r_scale;
        }
        let lap_jet = jet_radial_laplacian(&phi_jet, r, grid.n);
        let bilap_jet = jet_radial_laplacian(&lap_jet, r, grid.n);
        let trilap_jet = jet_radial_laplacian(&bilap_jet, r, grid.n);
        wgt.phi[j] = phi_jet[0];
        wgt.dphi[j] = phi_jet[1];
        wgt.d2phi[j] = phi_jet[2];
        wgt.dphi_over_r[j] = dphi_over_r_theta;
        wgt.lap_phi[j] = lap_jet[0];
        wgt.lap_phi_d2[j] = lap_jet[2];
        wgt.bilap_phi[j] = bilap_jet[0];
        wgt.trilap_phi[j] = trilap_jet[0];
    }
    Ok(wgt)
}

/// The un-localized weight φ = r² on the whole grid.
///
/// With it the rate formula collapses to exactly 16·K_μ(u) — the same
/// discrete quadratures appear on both sides — which makes this weight the
/// reference point for validating the localized one.
pub fn unbounded_weight<T: Real>(grid: &Arc<Grid<T>>) -> Weight<T> {
    let m = grid.m;
    let two = T::of(2.0);
    let two_n = T::of_usize(2 * grid.n as usize);
    let mut wgt = Weight {
        grid: grid.clone(),
        r_scale: T::infinity(),
        phi: Vec::with_capacity(m),
        dphi: Vec::with_capacity(m),
        d2phi: vec![two; m],
        dphi_over_r: vec![two; m],
        lap_phi: vec![two_n; m],
        lap_phi_d2: vec![T::zero(); m],
        bilap_phi: vec![T::zero(); m],
        trilap_phi: vec![T::zero(); m],
    };
    for &r in &grid.r {
        wgt.phi.push(r * r);
        wgt.dphi.push(two * r);
    }
    wgt
}

impl<T: Real> Weight<T> {
    /// The grid the weight is sampled on.
    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }
}

impl<T: Real> Cutoff<T> {
    /// The grid the cutoff is sampled on.
    pub fn grid(&self) -> &Arc<Grid<T>> {
        &self.grid
    }
}

/// The localized virial quantity M_φ(u) = 2∫ φ′ Im(ū ∂_r u) dx.
pub fn virial_m<T: Real>(w: &Weight<T>, u: &RadialField<T>) -> T {
    let g = u.grid();
    assert!(Arc::ptr_eq(g, &w.grid), "weight and field on different grids");
    let mut du = vec![Cplx::new(T::zero(), T::zero()); g.m];
    g.radial_derivative(&u.values, &mut du);
    let mut acc = T::zero();
    for j in 0..g.m {
        let im = (u.values[j].conj() * du[j]).im;
        acc += g.w[j] * w.dphi[j] * im;
    }
    T::of(2.0) * acc
}

/// The exact time derivative of M_φ along the flow (the virial rate),
/// evaluated from the field at one instant.
pub fn virial_rate<T: Real>(p: &Params<T>, w: &Weight<T>, u: &RadialField<T>) -> T {
    let g = u.grid();
    assert!(Arc::ptr_eq(g, &w.grid), "weight and field on different grids");
    assert_eq!(g.n, p.n, "parameter dimension differs from grid dimension");
    let m = g.m;
    let mut du = vec![Cplx::new(T::zero(), T::zero()); m];
    let mut d2u = du.clone();
    g.radial_derivative(&u.values, &mut du);
    g.radial_second_derivative(&u.values, &mut d2u);
    let nm1 = T::of_usize(p.n as usize - 1);
    let two = T::of(2.0);
    let four = T::of(4.0);
    let eight = T::of(8.0);
    let nonlin_coeff = two * p.alpha / (p.alpha + two);
    let half_p = (p.alpha + two) * T::of(0.5);
    let mut acc = T::zero();
    for j in 0..m {
        let a2 = u.values[j].norm_sqr();
        let g2 = du[j].norm_sqr();
        let h2 = d2u[j].norm_sqr();
        let r = g.r[j];
        let term = w.trilap_phi[j] * a2 - two * w.bilap_phi[j] * g2
            + eight * (w.d2phi[j] * h2 + nm1 * w.dphi_over_r[j] / (r * r) * g2)
            - four * w.lap_phi_d2[j] * g2
            + four * p.mu * w.d2phi[j] * g2
            - p.mu * w.bilap_phi[j] * a2
            - nonlin_coeff * w.lap_phi[j] * a2.powf(half_p);
        acc += g.w[j] * term;
    }
    acc
}

/// Builds the smooth cutoff χ_R (identity inside r = R/2, zero outside R).
pub fn make_cutoff<T: Real>(
    grid: &Arc<Grid<T>>,
    r_scale: T,
) -> Result<Cutoff<T>, FunctionalsError> {
    if !(r_scale > T::zero()) || r_scale > grid.r_max {
        return Err(FunctionalsError::CutoffTooLarge {
            r_scale: r_scale.to_f64().unwrap_or(f64::NAN),
            r_max: grid.r_max.to_f64().unwrap_or(f64::NAN),
        });
    }
    let half_r = r_scale * T::of(0.5);
    let chi = grid
        .r
        .iter()
        .map(|&r| smoothstep((r_scale - r) / half_r))
        .collect();
    Ok(Cutoff {
        grid: grid.clone(),
        r_scale,
        chi,
    })
}

/// The two ingredients of the cutoff-coercivity certificate.
#[derive(Debug, Clone, Copy)]
pub struct CoercivityParts<T: Real = f64> {
    /// K₀(χ_R u).
    pub k0_cut: T,
    /// ∫|χ_R u|^{α+2}.
    pub lalpha2_cut: T,
}

/// Evaluates K₀(χ_R u) and ∫|χ_R u|^{α+2}, so callers can measure an
/// empirical coercivity constant ν with K₀(χ_R u) ≥ ν ∫|χ_R u|^{α+2}.
pub fn cutoff_coercivity<T: Real>(
    p: &Params<T>,
    c: &Cutoff<T>,
    u: &RadialField<T>,
) -> CoercivityParts<T> {
    let g = u.grid();
    assert!(Arc::ptr_eq(g, &c.grid), "cutoff and field on different grids");
    let cut_values: Vec<Cplx<T>> = u
        .values
        .iter()
        .zip(&c.chi)
        .map(|(&z, &chi)| z * chi)
        .collect();
    let cut = RadialField::new(g.clone(), cut_values).expect("cut field inherits validity");
    let s = core_sums(p, &cut, g.m);
    CoercivityParts {
        k0_cut: k_from_sums(p, &s, false),
        lalpha2_cut: s.p_alpha2,
    }
}

/// Evaluates the full observable record at time `t`, with integrals
/// restricted to the first `limit` nodes (`grid.m` for the whole domain).
pub fn observe<T: Real>(
    p: &Params<T>,
    w: &Weight<T>,
    u: &RadialField<T>,
    t: T,
    limit: usize,
) -> Observables<T> {
    let s = core_sums(p, u, limit);
    Observables {
        t,
        mass: s.mass,
        energy: energy_from_sums(p, &s),
        k_mu: k_from_sums(p, &s, true),
        k_0: k_from_sums(p, &s, false),
        l_alpha2: s.p_alpha2,
        delta_l2: s.delta2.sqrt(),
        grad_l2: s.grad2.sqrt(),
        m_phi_r: virial_m(w, u),
        m_rate: virial_rate(p, w, u),
    }
}

/// Energy with integrals restricted to the first `limit` nodes; the cheap
/// per-step drift monitor of the adaptive integrator.
pub fn energy_limited<T: Real>(p: &Params<T>, u: &RadialField<T>, limit: usize) -> T {
    let s = core_sums(p, u, limit);
    energy_from_sums(p, &s)
}

/// Mass with integrals restricted to the first `limit` nodes.
pub fn mass_limited<T: Real>(u: &RadialField<T>, limit: usize) -> T {
    let g = u.grid();
    assert!(limit <= g.m);
    let mut acc = T::zero();
    for j in 0..limit {
        acc += g.w[j] * u.values[j].norm_sqr();
    }
    acc
}
