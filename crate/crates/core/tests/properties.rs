//! Randomized structural checks: exact algebraic identities between the
//! discrete functionals, exponent-family relations, operator linearity,
//! virial-weight bounds, classifier flip semantics, and checkpoint
//! round-trips. Every assertion here is an identity of the discrete
//! objects themselves, so the tolerances are at roundoff scale.

use std::sync::Arc;

use bnls_core::diagnostics::{single_flip, Prediction};
use bnls_core::dynamics::{checkpoint_load, checkpoint_save};
use bnls_core::functionals::{self, make_weight, smoothstep};
use bnls_core::model::{
    classify_regime, derive_params, exponent_invariants_hold, is_biharmonic_admissible,
    scattering_exponents, AlphaStar, ModelError, RegimeTag,
};
use bnls_core::radial_grid::{Grid, RadialField};
use bnls_core::Cplx;
use proptest::prelude::*;

// --- shared strategies -------------------------------------------------------

/// Complex nodal values in the unit box, as (re, im) pairs.
fn field_values(m: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m)
}

fn build_field(grid: &Arc<Grid<f64>>, vals: &[(f64, f64)]) -> RadialField<f64> {
    let values: Vec<Cplx<f64>> = vals.iter().map(|&(re, im)| Cplx::new(re, im)).collect();
    RadialField::new(grid.clone(), values).expect("field matches grid")
}

/// An intercritical (n, alpha) pair in the exponent family's domain N ≥ 2:
/// alpha strictly between the mass-critical power 8/N and the
/// energy-critical ceiling.
fn intercritical_pair() -> impl Strategy<Value = (u32, f64)> {
    (2u32..=8, 1e-3f64..0.999).prop_map(|(n, t)| {
        let nf = n as f64;
        let lo = 8.0 / nf * (1.0 + 1e-6);
        let hi = if n >= 5 {
            8.0 / (nf - 4.0) * (1.0 - 1e-6)
        } else {
            24.0
        };
        (n, lo * (1.0 - t) + hi * t)
    })
}

// --- functional identities ---------------------------------------------------

proptest! {
    /// K_mu is an exact linear combination of the energy and the two
    /// quadratic norms: K_mu = (Nα/4)E − ((Nα−8)/8)‖Δu‖² − ((Nα−4)μ/8)‖∇u‖².
    /// This holds for arbitrary grid functions because all four quantities
    /// are built from the same discrete quadratures.
    #[test]
    fn k_functional_is_combination_of_energy_and_norms(
        n in 1u32..=6,
        mu in 0.0f64..2.0,
        alpha in 0.5f64..10.0,
        vals in field_values(96),
    ) {
        let p = derive_params(n, mu, alpha).unwrap();
        let grid = Grid::new(n, 96, 10.0).unwrap();
        let u = build_field(&grid, &vals);

        let e = functionals::energy(&p, &u);
        let k_mu = functionals::k_functional(&p, &u, true);
        let k_0 = functionals::k_functional(&p, &u, false);
        let norms = grid.norms(&u, alpha + 2.0);
        let d2 = norms.delta_l2 * norms.delta_l2;
        let g2 = norms.grad_l2 * norms.grad_l2;

        let na = n as f64 * alpha;
        let t1 = na / 4.0 * e;
        let t2 = (na - 8.0) / 8.0 * d2;
        let t3 = (na - 4.0) * mu / 8.0 * g2;
        let scale = k_mu.abs() + t1.abs() + t2.abs() + t3.abs() + 1e-300;
        prop_assert!(
            (k_mu - (t1 - t2 - t3)).abs() <= 1e-12 * scale,
            "K_mu identity violated: K={k_mu}, rhs={}",
            t1 - t2 - t3
        );

        // The μ-flag drops exactly the (μ/2)‖∇u‖² term.
        let mu_term = 0.5 * mu * g2;
        prop_assert!((k_mu - k_0 - mu_term).abs() <= 1e-12 * (k_mu.abs() + k_0.abs() + mu_term + 1e-300));
    }

    /// The Weinstein quotient is invariant under complex rescaling
    /// u → λe^{iθ}u, while the mass scales exactly quadratically.
    #[test]
    fn quotient_is_amplitude_and_phase_invariant(
        n in 1u32..=4,
        alpha in 1.0f64..9.0,
        lambda in 1e-3f64..1e3,
        theta in 0.0f64..std::f64::consts::TAU,
        vals in field_values(64),
    ) {
        let p = derive_params(n, 0.3, alpha).unwrap();
        let grid = Grid::new(n, 64, 10.0).unwrap();
        let u = build_field(&grid, &vals);
        prop_assume!(functionals::mass(&u) > 1e-6);

        let j_u = functionals::gn_quotient(&p, &u).unwrap();
        let v = u.scaled(Cplx::from_polar(lambda, theta));
        let j_v = functionals::gn_quotient(&p, &v).unwrap();
        prop_assert!(
            (j_u - j_v).abs() <= 1e-9 * j_u.abs(),
            "quotient not scale invariant: {j_u} vs {j_v}"
        );

        let m_u = functionals::mass(&u);
        let m_v = functionals::mass(&v);
        prop_assert!((m_v - lambda * lambda * m_u).abs() <= 1e-12 * m_v.abs());
    }

    /// The observable record agrees with the standalone functionals —
    /// same quadratures, same restriction, norms stored as norms.
    #[test]
    fn observable_record_matches_standalone_functionals(
        n in 1u32..=3,
        mu in 0.0f64..1.5,
        alpha in 1.0f64..9.0,
        vals in field_values(80),
    ) {
        let p = derive_params(n, mu, alpha).unwrap();
        let grid = Grid::new(n, 80, 12.0).unwrap();
        let u = build_field(&grid, &vals);
        let w = make_weight(&grid, 3.0).unwrap();

        let row = functionals::observe(&p, &w, &u, 0.25, grid.m);
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (a.abs() + b.abs() + 1e-300);
        prop_assert!(rel(row.mass, functionals::mass(&u)));
        prop_assert!(rel(row.energy, functionals::energy(&p, &u)));
        prop_assert!(rel(row.k_mu, functionals::k_functional(&p, &u, true)));
        prop_assert!(rel(row.k_0, functionals::k_functional(&p, &u, false)));
        let norms = grid.norms(&u, alpha + 2.0);
        prop_assert!(rel(row.delta_l2, norms.delta_l2));
        prop_assert!(rel(row.grad_l2, norms.grad_l2));
        prop_assert!(rel(row.m_phi_r, functionals::virial_m(&w, &u)));
        prop_assert!(rel(row.m_rate, functionals::virial_rate(&p, &w, &u)));

        // Full-domain restriction coincides with the global functionals.
        prop_assert!(rel(functionals::energy_limited(&p, &u, grid.m), row.energy));
        prop_assert!(rel(functionals::mass_limited(&u, grid.m), row.mass));
    }

    /// Interior-restricted mass is nondecreasing in the restriction limit.
    #[test]
    fn restricted_mass_is_monotone_in_the_limit(
        vals in field_values(64),
        split in 0usize..=64,
    ) {
        let grid = Grid::new(2, 64, 8.0).unwrap();
        let u = build_field(&grid, &vals);
        let inner = functionals::mass_limited(&u, split);
        let outer = functionals::mass_limited(&u, 64);
        prop_assert!(inner <= outer * (1.0 + 1e-15) + 1e-300);
    }
}

// --- exponent family ---------------------------------------------------------

proptest! {
    /// Throughout the intercritical band the exponent family exists, obeys
    /// the admissibility relation 4/q̄ + N/r̄ = N/2 and the pairing
    /// 1/k̄ + 1/m̄ = 2/q̄, and the auxiliary ā exists exactly where
    /// (N−2)α > 4. The derived indices also satisfy γ_c(σ_c + 1) = 2.
    #[test]
    fn exponent_family_satisfies_scaling_relations((n, alpha) in intercritical_pair()) {
        let p = derive_params(n, 0.7, alpha).unwrap();
        prop_assert_eq!(classify_regime(&p).tag, RegimeTag::Intercritical);

        let e = scattering_exponents(&p).unwrap();
        prop_assert!(exponent_invariants_hold(&e, n));
        prop_assert!(is_biharmonic_admissible(e.q_bar, e.r_bar, n));

        let nf = n as f64;
        prop_assert!((4.0 / e.q_bar + nf / e.r_bar - nf / 2.0).abs() <= 1e-12);
        prop_assert!((1.0 / e.k_bar + 1.0 / e.m_bar - 2.0 / e.q_bar).abs() <= 1e-12);
        prop_assert_eq!(e.a_bar.is_some(), (nf - 2.0) * alpha > 4.0);

        // Index algebra: γ_c ∈ (0, 2) and σ_c = (2 − γ_c)/γ_c.
        prop_assert!(p.gamma_c > 0.0 && p.gamma_c < 2.0);
        let sigma = p.sigma_c.expect("intercritical index exists");
        prop_assert!(sigma > 0.0);
        prop_assert!((p.gamma_c * (sigma + 1.0) - 2.0).abs() <= 1e-12);
    }

    /// Parameter derivation is total on the admitted inputs and reproduces
    /// the closed-form indices.
    #[test]
    fn derived_indices_match_closed_forms(
        n in 1u32..=8,
        mu in 0.0f64..3.0,
        alpha in 0.1f64..30.0,
    ) {
        let p = derive_params(n, mu, alpha).unwrap();
        let nf = n as f64;
        prop_assert!((p.gamma_c - (nf / 2.0 - 4.0 / alpha)).abs() <= 1e-12 * (1.0 + p.gamma_c.abs()));
        match p.sigma_c {
            None => prop_assert!(nf * alpha == 8.0),
            Some(s) => {
                let expected = (8.0 - (nf - 4.0) * alpha) / (nf * alpha - 8.0);
                prop_assert!((s - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
            }
        }
        match p.alpha_star {
            AlphaStar::Infinite => prop_assert!(n <= 4),
            AlphaStar::Finite(a) => {
                prop_assert!(n >= 5);
                prop_assert!((a - 8.0 / (nf - 4.0)).abs() <= 1e-14);
                prop_assert_eq!(p.alpha_star.admits(alpha), alpha < a);
            }
        }
    }
}

#[test]
fn parameter_derivation_rejects_out_of_scope_inputs() {
    assert!(matches!(
        derive_params::<f64>(0, 0.0, 8.0),
        Err(ModelError::BadDimension(0))
    ));
    assert!(matches!(
        derive_params::<f64>(2, 0.0, 0.0),
        Err(ModelError::BadAlpha(_))
    ));
    assert!(matches!(
        derive_params::<f64>(2, -0.1, 8.0),
        Err(ModelError::BadMu(_))
    ));
    // Mass-critical inputs have no scattering index.
    let p = derive_params::<f64>(4, 0.0, 2.0).unwrap();
    assert_eq!(p.sigma_c, None);
    assert!(scattering_exponents(&p).is_err());
    // Dimension one is outside the exponent family's domain even when the
    // power is intercritical (b̄ ≤ 1 there).
    let p1 = derive_params::<f64>(1, 0.0, 9.0).unwrap();
    assert_eq!(classify_regime(&p1).tag, RegimeTag::Intercritical);
    assert!(matches!(
        scattering_exponents(&p1),
        Err(ModelError::BadDimension(1))
    ));
}

// --- discrete operators ------------------------------------------------------

proptest! {
    /// The discrete Laplacian is linear over complex scalars.
    #[test]
    fn laplacian_is_complex_linear(
        n in 1u32..=3,
        u_vals in field_values(64),
        v_vals in field_values(64),
        a in (-2.0f64..2.0, -2.0f64..2.0),
        b in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let grid = Grid::new(n, 64, 10.0).unwrap();
        let a = Cplx::new(a.0, a.1);
        let b = Cplx::new(b.0, b.1);
        let u: Vec<Cplx<f64>> = u_vals.iter().map(|&(re, im)| Cplx::new(re, im)).collect();
        let v: Vec<Cplx<f64>> = v_vals.iter().map(|&(re, im)| Cplx::new(re, im)).collect();
        let combo: Vec<Cplx<f64>> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();

        let mut lu = vec![Cplx::new(0.0, 0.0); 64];
        let mut lv = lu.clone();
        let mut lc = lu.clone();
        grid.apply_laplacian(&u, &mut lu);
        grid.apply_laplacian(&v, &mut lv);
        grid.apply_laplacian(&combo, &mut lc);

        let scale = lc.iter().map(|z| z.norm()).fold(1.0f64, f64::max)
            / (a.norm() + b.norm() + 1.0);
        for j in 0..64 {
            let expect = a * lu[j] + b * lv[j];
            prop_assert!(
                (lc[j] - expect).norm() <= 1e-11 * (scale * (a.norm() + b.norm()) + 1.0),
                "linearity broken at node {j}"
            );
        }
    }

    /// The Laplacian stencil reproduces Δ(c₀ + c₂r²) = 2Nc₂ exactly at
    /// every node except the Dirichlet-truncated outer row.
    #[test]
    fn laplacian_is_exact_on_quadratics(
        n in 1u32..=5,
        c0 in -2.0f64..2.0,
        c2 in -2.0f64..2.0,
    ) {
        let grid = Grid::new(n, 96, 12.0).unwrap();
        let u = RadialField::from_real_fn(grid.clone(), |r| c0 + c2 * r * r);
        let mut lu = vec![Cplx::new(0.0, 0.0); 96];
        grid.apply_laplacian(&u.values, &mut lu);
        let expect = 2.0 * n as f64 * c2;
        let tol = 1e-8 * (1.0 + c0.abs() + c2.abs() * 144.0);
        for j in 0..95 {
            prop_assert!(
                (lu[j].re - expect).abs() <= tol && lu[j].im.abs() <= tol,
                "node {j}: got {}, expected {expect}",
                lu[j].re
            );
        }
    }
}

// --- virial weight -----------------------------------------------------------

proptest! {
    /// The localized weight keeps the structural bounds the virial
    /// machinery relies on: 0 ≤ φ″ ≤ 2, 0 ≤ φ′/r ≤ 2, 0 ≤ Δφ ≤ 2N,
    /// equality branch φ = r² in the core, and a flat tail φ′ = 3R.
    #[test]
    fn virial_weight_obeys_structural_bounds(
        n in 1u32..=6,
        m in 64usize..192,
        frac in 0.05f64..0.45,
        r_max in 8.0f64..40.0,
    ) {
        let grid = Grid::new(n, m, r_max).unwrap();
        let r_scale = frac * r_max;
        let w = make_weight(&grid, r_scale).unwrap();
        let tol = 1e-10;
        let two_n = 2.0 * n as f64;
        for j in 0..m {
            let r = grid.r[j];
            prop_assert!(w.d2phi[j] >= -tol && w.d2phi[j] <= 2.0 + tol);
            prop_assert!(w.dphi[j] >= -tol);
            prop_assert!(w.dphi_over_r[j] >= -tol && w.dphi_over_r[j] <= 2.0 + tol);
            prop_assert!(w.lap_phi[j] >= -tol * two_n && w.lap_phi[j] <= two_n * (1.0 + 1e-12));
            if r <= r_scale {
                prop_assert!((w.phi[j] - r * r).abs() <= 1e-12 * r * r);
                prop_assert!((w.dphi[j] - 2.0 * r).abs() <= 1e-12 * (1.0 + 2.0 * r));
                prop_assert!((w.d2phi[j] - 2.0).abs() <= 1e-12);
                prop_assert!((w.lap_phi[j] - two_n).abs() <= 1e-12 * two_n);
            }
            if r >= 2.0 * r_scale {
                prop_assert!(w.d2phi[j].abs() <= 1e-9);
                prop_assert!((w.dphi[j] - 3.0 * r_scale).abs() <= 1e-9 * r_scale);
            }
        }
    }
}

#[test]
fn weight_rejects_transition_region_outside_domain() {
    let grid = Grid::new(2, 64, 10.0).unwrap();
    assert!(make_weight(&grid, 5.0).is_err()); // 2R = r_max exactly
    assert!(make_weight(&grid, 0.0).is_err());
    assert!(make_weight(&grid, 4.9).is_ok());
}

proptest! {
    /// The C⁴ step is a clamped, monotone, symmetric sigmoid.
    #[test]
    fn smoothstep_is_clamped_monotone_symmetric(
        x in -1.0f64..2.0,
        pair in (0.0f64..1.0, 0.0f64..1.0),
    ) {
        let clamped = x.clamp(0.0, 1.0);
        prop_assert_eq!(smoothstep(x), smoothstep(clamped));
        prop_assert!(smoothstep(0.0) == 0.0 && smoothstep(1.0) == 1.0);
        let (lo, hi) = if pair.0 <= pair.1 { (pair.0, pair.1) } else { (pair.1, pair.0) };
        prop_assert!(smoothstep(lo) <= smoothstep(hi) + 1e-15);
        prop_assert!((smoothstep(pair.0) + smoothstep(1.0 - pair.0) - 1.0).abs() <= 1e-12);
    }
}

// --- classifier flip semantics ------------------------------------------------

proptest! {
    /// `single_flip` agrees with the naive reference: restrict to decisive
    /// verdicts, require both kinds present, and forbid any scatter after
    /// the first blow-up.
    #[test]
    fn single_flip_matches_reference_model(codes in proptest::collection::vec(0u8..4, 0..12)) {
        let seq: Vec<Prediction> = codes
            .iter()
            .map(|c| match c {
                0 => Prediction::Scatter,
                1 => Prediction::BlowUp,
                2 => Prediction::OnThresholdForbidden,
                _ => Prediction::OutOfTheory,
            })
            .collect();
        let decisive: Vec<&Prediction> = seq
            .iter()
            .filter(|p| matches!(p, Prediction::Scatter | Prediction::BlowUp))
            .collect();
        let reference = decisive.iter().any(|p| matches!(**p, Prediction::Scatter))
            && decisive.iter().any(|p| matches!(**p, Prediction::BlowUp))
            && decisive
                .windows(2)
                .all(|w| !(matches!(w[0], Prediction::BlowUp) && matches!(w[1], Prediction::Scatter)));
        prop_assert_eq!(single_flip(&seq), reference);
    }
}

// --- checkpoint round-trip ----------------------------------------------------

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    /// Save → load reproduces parameters, grid shape, time stamp, and every
    /// nodal value bit for bit.
    #[test]
    fn checkpoint_roundtrip_preserves_every_bit(
        n in 1u32..=6,
        mu in 0.0f64..2.0,
        alpha in 0.5f64..10.0,
        m in 8usize..48,
        r_max in 4.0f64..40.0,
        t in -10.0f64..1e3,
        seed_vals in field_values(48),
    ) {
        let p = derive_params(n, mu, alpha).unwrap();
        let grid = Grid::new(n, m, r_max).unwrap();
        let u = build_field(&grid, &seed_vals[..m]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.cpt");

        checkpoint_save(&path, &p, t, &u).unwrap();
        let (g2, p2, t2, u2) = checkpoint_load::<f64>(&path).unwrap();

        prop_assert_eq!(g2.n, n);
        prop_assert_eq!(g2.m, m);
        prop_assert_eq!(g2.r_max.to_bits(), r_max.to_bits());
        prop_assert_eq!(p2, p);
        prop_assert_eq!(t2.to_bits(), t.to_bits());
        for (a, b) in u.values.iter().zip(&u2.values) {
            prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
            prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
}
