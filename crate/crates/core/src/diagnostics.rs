//! Verdicts and run certificates for the sharp scattering/blow-up dichotomy.
//!
//! The scale-invariant quantities governing radial data u₀ are
//!
//! ```text
//!   ℰ(u₀) = E_μ(u₀)·M(u₀)^{σc},    𝒢(u₀) = ‖Δu₀‖·M(u₀)^{σc/2},
//! ```
//!
//! compared against the ground-state thresholds E_thr and G_thr. Below the
//! energy threshold the gradient side of the dichotomy decides the fate:
//! 𝒢 < G_thr propagates globally and scatters, 𝒢 > G_thr (with α ≤ 8 in the
//! intercritical range) blows up in finite time, and 𝒢 = G_thr is excluded
//! outright — [`classify`] names that verdict `OnThresholdForbidden`.
//! Everything outside those hypotheses is reported as `OutOfTheory` rather
//! than guessed at.
//!
//! The quantitative certificates all consume a recorded [`Trajectory`]:
//!
//! * [`blowup_certificate`] — the below-threshold coercivity bound: with
//!   θ = 1 − ℰ/E_thr, every recorded K_μ must stay below −0.95·δ where
//!   δ = ((Nα−8)/8)·θ·‖ΔQ‖²·(M(Q)/M(u₀))^{σc}, and ‖Δu(t)‖ must never drop
//!   below 0.9·‖Δu₀‖.
//! * [`blowup_ode_witness`] — integrates the virial comparison ODE
//!   z′ ≥ A⁴z⁴ forward from the first sign change of the localized virial
//!   and checks the detected blow-up time against the resulting finite
//!   upper bound.
//! * [`morawetz_ratio`] — prefix-window averages of ∫|u|^{α+2} scaled by
//!   T^{1/3}: bounded ratios are the discrete trace of the space-time
//!   Morawetz bound.
//! * [`virial_consistency`] — cross-checks the recorded virial derivative
//!   against a finite difference of the virial itself and against 16·K_μ.
//! * [`scattering_certificate`] / [`dispersive_decay_fit`] /
//!   [`coercivity_scan`] — decay of the potential energy, the space-time
//!   criterion norm, interior mass evacuation, sign of the cutoff
//!   functional, and the t^{−N/4} sup-norm decay law.

use crate::dynamics::{Event, Stepper, Trajectory};
use crate::functionals;
use crate::ground_state::Thresholds;
use crate::model::{classify_regime, scattering_exponents, Params, RegimeTag};
use crate::radial_grid::RadialField;
use crate::scalar::{Cplx, Real};
use thiserror::Error;

/// Errors from the classification and certificate builders.
#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("the sharp dichotomy covers only the intercritical and energy-critical regimes")]
    UnsupportedRegime,
    #[error("the trajectory holds no recorded observables")]
    EmptyTrajectory,
    #[error("the threshold band fraction must be positive and small")]
    BadBand,
}

/// The four possible verdicts for initial data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    /// Below both thresholds: global existence and scattering.
    Scatter,
    /// Below the energy threshold, above the gradient threshold, α ≤ 8
    /// intercritical: finite-time blow-up.
    BlowUp,
    /// Below the energy threshold *on* the gradient threshold — a state the
    /// theory excludes entirely.
    OnThresholdForbidden,
    /// The hypotheses of neither theorem hold.
    OutOfTheory,
}

/// The verdict together with the scale-invariant quantities behind it.
#[derive(Debug, Clone, Copy)]
pub struct Classification<T: Real = f64> {
    pub prediction: Prediction,
    /// M(u₀).
    pub mass: T,
    /// E_μ(u₀).
    pub energy: T,
    /// ℰ(u₀) = E_μ·M^{σc}.
    pub energy_invariant: T,
    /// 𝒢(u₀) = ‖Δu₀‖·M^{σc/2}.
    pub gradient_invariant: T,
    /// E_thr − ℰ (positive means below the energy threshold).
    pub energy_margin: T,
    /// G_thr − 𝒢 (positive means on the scattering side).
    pub gradient_margin: T,
}

/// Classifies initial data against the ground-state thresholds.
///
/// `band_fraction` sets the relative width of the forbidden band around the
/// gradient threshold (the sphere itself, thickened to numerical width).
pub fn classify<T: Real>(
    p: &Params<T>,
    thr: &Thresholds<T>,
    u0: &RadialField<T>,
    band_fraction: T,
) -> Result<Classification<T>, DiagnosticsError> {
    if !(band_fraction > T::zero()) || !(band_fraction < T::one()) {
        return Err(DiagnosticsError::BadBand);
    }
    let regime = classify_regime(p);
    let sigma_c = match (regime.tag, p.sigma_c) {
        (RegimeTag::Intercritical, Some(s)) | (RegimeTag::EnergyCritical, Some(s)) => s,
        _ => return Err(DiagnosticsError::UnsupportedRegime),
    };
    let mass = functionals::mass(u0);
    let energy = functionals::energy(p, u0);
    let grid = u0.grid();
    let mut scratch = vec![Cplx::new(T::zero(), T::zero()); grid.m];
    grid.apply_laplacian(&u0.values, &mut scratch);
    let delta_l2 = grid.integrate_abs2(&scratch).sqrt();
    let energy_invariant = energy * mass.powf(sigma_c);
    let gradient_invariant = delta_l2 * mass.powf(sigma_c * T::of(0.5));
    let energy_margin = thr.e_thr - energy_invariant;
    let gradient_margin = thr.g_thr - gradient_invariant;

    let below_energy = energy_margin > T::zero();
    let on_band = gradient_margin.abs() <= band_fraction * thr.g_thr;
    let blowup_theory_applies = regime.tag == RegimeTag::Intercritical && regime.alpha_le_8;
    let prediction = if below_energy && on_band {
        Prediction::OnThresholdForbidden
    } else if below_energy && gradient_margin > T::zero() {
        Prediction::Scatter
    } else if below_energy && gradient_margin < T::zero() && blowup_theory_applies {
        Prediction::BlowUp
    } else {
        Prediction::OutOfTheory
    };
    Ok(Classification {
        prediction,
        mass,
        energy,
        energy_invariant,
        gradient_invariant,
        energy_margin,
        gradient_margin,
    })
}

/// Checks that Scatter/BlowUp verdicts flip exactly once along a parameter
/// sweep: both sides occur, and no Scatter follows the first BlowUp.
/// Verdicts outside the dichotomy (`OutOfTheory`, forbidden band) are
/// ignored — the theorems impose nothing at those points.
pub fn single_flip(predictions: &[Prediction]) -> bool {
    let seq: Vec<Prediction> = predictions
        .iter()
        .copied()
        .filter(|p| matches!(p, Prediction::Scatter | Prediction::BlowUp))
        .collect();
    let scatters = seq.iter().filter(|p| **p == Prediction::Scatter).count();
    let blowups = seq.len() - scatters;
    scatters > 0 && blowups > 0 && seq[..scatters].iter().all(|p| *p == Prediction::Scatter)
}

// --- blow-up certificates ---------------------------------------------------

/// The uniform-coercivity certificate for a below-threshold blow-up run.
#[derive(Debug, Clone, Copy)]
pub struct BlowupCertificate<T: Real = f64> {
    /// θ = 1 − ℰ(u₀)/E_thr (positive below the threshold).
    pub theta: T,
    /// δ = ((Nα−8)/8)·θ·‖ΔQ‖²·(M(Q)/M(u₀))^{σc}.
    pub delta: T,
    /// max over recorded t of K_μ(u(t)).
    pub kmu_ceiling: T,
    /// Whether θ > 0 and the ceiling stays below −0.95·δ.
    pub ceiling_ok: bool,
    /// min over recorded t of ‖Δu(t)‖/‖Δu₀‖.
    pub min_delta_ratio: T,
    /// Whether the curvature norm never fell below 0.9 of its initial value.
    pub monotone_ok: bool,
    /// Detection time, when the run ended in detected blow-up.
    pub detected_at: Option<T>,
}

/// Builds the δ-certificate from a recorded trajectory.
pub fn blowup_certificate<T: Real>(
    p: &Params<T>,
    thr: &Thresholds<T>,
    traj: &Trajectory<T>,
) -> Result<BlowupCertificate<T>, DiagnosticsError> {
    let sigma_c = p.sigma_c.ok_or(DiagnosticsError::UnsupportedRegime)?;
    let rows = &traj.observables;
    let first = rows.first().ok_or(DiagnosticsError::EmptyTrajectory)?;
    let n_alpha = T::of_usize(p.n as usize) * p.alpha;
    let theta = T::one() - first.energy * first.mass.powf(sigma_c) / thr.e_thr;
    let delta = (n_alpha - T::of(8.0)) / T::of(8.0)
        * theta
        * thr.profile_delta_sq
        * (thr.profile_mass / first.mass).powf(sigma_c);
    let kmu_ceiling = rows
        .iter()
        .map(|o| o.k_mu)
        .fold(T::neg_infinity(), |a, b| a.max(b));
    let min_delta_ratio = rows
        .iter()
        .map(|o| o.delta_l2 / first.delta_l2)
        .fold(T::infinity(), |a, b| a.min(b));
    let detected_at = match traj.event {
        Event::BlowUpDetected(t) => Some(t),
        _ => None,
    };
    Ok(BlowupCertificate {
        theta,
        delta,
        kmu_ceiling,
        ceiling_ok: theta > T::zero() && kmu_ceiling <= -T::of(0.95) * delta,
        min_delta_ratio,
        monotone_ok: min_delta_ratio >= T::of(0.9),
        detected_at,
    })
}

/// The finite-time bound extracted from the virial comparison ODE.
#[derive(Debug, Clone, Copy)]
pub struct OdeWitness<T: Real = f64> {
    /// First recorded time with M_φ < 0.
    pub t_negative: T,
    /// The upper bound on the blow-up time implied by z′ ≥ A⁴z⁴.
    pub t_star: T,
    /// The integrator's detection time.
    pub detected_at: T,
    /// Whether detection happened no later than 1.1·t_star.
    pub witnessed: bool,
}

/// Derives a finite blow-up-time bound from the recorded virial series.
///
/// After the first sample t₀ with M_φ < 0, set z(t) = ∫_{t₀}^t M_φ⁴ and, for
/// each later sample t₁, take the largest constant A⁴ with z′ ≥ A⁴z⁴ on
/// [t₁, end] (a suffix minimum of M_φ⁴/z⁴). Each choice yields the bound
/// t₁ + 1/(3A⁴z(t₁)³); the witness reports the tightest one. Returns `None`
/// when M_φ never turns negative or the run did not end in detection.
pub fn blowup_ode_witness<T: Real>(traj: &Trajectory<T>) -> Option<OdeWitness<T>> {
    let detected_at = match traj.event {
        Event::BlowUpDetected(t) => t,
        _ => return None,
    };
    let rows = &traj.observables;
    let i0 = rows.iter().position(|o| o.m_phi_r < T::zero())?;
    let tail = &rows[i0..];
    if tail.len() < 3 {
        return None;
    }
    // z = cumulative trapezoid of M⁴ from t₀.
    let m4: Vec<T> = tail.iter().map(|o| o.m_phi_r.powi(4)).collect();
    let ts: Vec<T> = tail.iter().map(|o| o.t).collect();
    let mut z = Vec::with_capacity(tail.len());
    z.push(T::zero());
    for i in 1..tail.len() {
        let dz = (m4[i] + m4[i - 1]) * (ts[i] - ts[i - 1]) * T::of(0.5);
        z.push(z[i - 1] + dz);
    }
    // Suffix minimum of z′/z⁴ (defined where z > 0).
    let mut suffix_min = vec![T::infinity(); tail.len()];
    let mut acc = T::infinity();
    for i in (0..tail.len()).rev() {
        if z[i] > T::zero() {
            acc = acc.min(m4[i] / z[i].powi(4));
        }
        suffix_min[i] = acc;
    }
    let mut t_star = T::infinity();
    for i in 1..tail.len() {
        if z[i] > T::zero() && suffix_min[i].is_finite() && suffix_min[i] > T::zero() {
            let bound = ts[i] + T::one() / (T::of(3.0) * suffix_min[i] * z[i].powi(3));
            t_star = t_star.min(bound);
        }
    }
    if !t_star.is_finite() {
        return None;
    }
    Some(OdeWitness {
        t_negative: ts[0],
        t_star,
        detected_at,
        witnessed: detected_at <= T::of(1.1) * t_star,
    })
}

// --- space-time bounds -------------------------------------------------------

/// Prefix-window Morawetz quantities and their spread.
#[derive(Debug, Clone)]
pub struct MorawetzReport<T: Real = f64> {
    /// (T_w, ∫₀^{T_w} ∫|u|^{α+2} dx dt / T_w^{1/3}) per requested window.
    pub window_values: Vec<(T, T)>,
    /// max/min of the window values.
    pub ratio: T,
    /// ratio < 3.
    pub bounded: bool,
}

/// Integral of the piecewise-linear interpolant of (ts, ys) from ts[0] to
/// `t_end` (which must not exceed the last sample).
fn trapezoid_prefix<T: Real>(ts: &[T], ys: &[T], t_end: T) -> T {
    let mut acc = T::zero();
    for i in 1..ts.len() {
        if ts[i] <= t_end {
            acc += (ys[i] + ys[i - 1]) * (ts[i] - ts[i - 1]) * T::of(0.5);
            if ts[i] == t_end {
                break;
            }
        } else {
            let dt = t_end - ts[i - 1];
            if dt > T::zero() {
                let frac = dt / (ts[i] - ts[i - 1]);
                let y_end = ys[i - 1] + (ys[i] - ys[i - 1]) * frac;
                acc += (y_end + ys[i - 1]) * dt * T::of(0.5);
            }
            break;
        }
    }
    acc
}

/// Computes prefix-window Morawetz averages from the recorded rows.
///
/// Windows extending past the recorded horizon are dropped; `None` when
/// fewer than two windows fit or fewer than two rows exist.
pub fn morawetz_ratio<T: Real>(traj: &Trajectory<T>, windows: &[T]) -> Option<MorawetzReport<T>> {
    let rows = &traj.observables;
    if rows.len() < 2 {
        return None;
    }
    let ts: Vec<T> = rows.iter().map(|o| o.t).collect();
    let ls: Vec<T> = rows.iter().map(|o| o.l_alpha2).collect();
    let t_end = *ts.last().unwrap();
    let third = T::one() / T::of(3.0);
    let mut window_values = Vec::new();
    for &tw in windows {
        if tw > T::zero() && tw <= t_end * (T::one() + T::of(1e-9)) {
            let s = trapezoid_prefix(&ts, &ls, tw.min(t_end));
            window_values.push((tw, s / tw.powf(third)));
        }
    }
    if window_values.len() < 2 {
        return None;
    }
    let max = window_values
        .iter()
        .map(|&(_, v)| v)
        .fold(T::neg_infinity(), |a, b| a.max(b));
    let min = window_values
        .iter()
        .map(|&(_, v)| v)
        .fold(T::infinity(), |a, b| a.min(b));
    let ratio = max / min;
    Some(MorawetzReport {
        window_values,
        ratio,
        bounded: ratio < T::of(3.0),
    })
}

/// Consistency of the recorded virial series.
#[derive(Debug, Clone, Copy)]
pub struct VirialReport<T: Real = f64> {
    /// max |d/dt M_φ (finite difference) − recorded rate| / scale.
    pub max_fd_error: T,
    /// max |recorded rate − 16·K_μ| / scale.
    pub max_identity_error: T,
    /// The normalization: max(max_t |rate|, 16·K-magnitude of the data).
    pub scale: T,
    /// Both errors below 1%.
    pub consistent: bool,
}

/// Cross-checks the virial derivative three ways: recorded rate vs a finite
/// difference of M_φ, and recorded rate vs 16·K_μ (exact while the solution
/// stays inside the weight's quadratic core).
///
/// Errors are normalized by the trajectory's virial-rate scale — the larger
/// of max|rate| and the absolute-value version of 16·K_μ at t = 0 — so runs
/// whose rate is identically zero (standing waves) are judged against the
/// natural magnitude rather than 0/0.
pub fn virial_consistency<T: Real>(p: &Params<T>, traj: &Trajectory<T>) -> Option<VirialReport<T>> {
    let rows = &traj.observables;
    if rows.len() < 3 {
        return None;
    }
    let first = &rows[0];
    let n_alpha = T::of_usize(p.n as usize) * p.alpha;
    let k_magnitude = first.delta_l2 * first.delta_l2
        + p.mu * T::of(0.5) * first.grad_l2 * first.grad_l2
        + n_alpha / (T::of(4.0) * (p.alpha + T::of(2.0))) * first.l_alpha2;
    let max_rate = rows
        .iter()
        .map(|o| o.m_rate.abs())
        .fold(T::zero(), |a, b| a.max(b));
    let scale = max_rate.max(T::of(16.0) * k_magnitude).max(T::eps());

    let mut max_fd_error = T::zero();
    for i in 1..rows.len() - 1 {
        let d1 = rows[i].t - rows[i - 1].t;
        let d0 = rows[i + 1].t - rows[i].t;
        if !(d0 > T::zero()) || !(d1 > T::zero()) {
            continue;
        }
        // Three-point derivative, exact on quadratics in t.
        let a = d1 / (d0 * (d0 + d1));
        let b = (d0 - d1) / (d0 * d1);
        let c = d0 / (d1 * (d0 + d1));
        let fd = a * rows[i + 1].m_phi_r + b * rows[i].m_phi_r - c * rows[i - 1].m_phi_r;
        max_fd_error = max_fd_error.max((fd - rows[i].m_rate).abs() / scale);
    }
    let mut max_identity_error = T::zero();
    for o in rows {
        max_identity_error = max_identity_error.max((o.m_rate - T::of(16.0) * o.k_mu).abs() / scale);
    }
    let one_percent = T::of(0.01);
    Some(VirialReport {
        max_fd_error,
        max_identity_error,
        scale,
        consistent: max_fd_error < one_percent && max_identity_error < one_percent,
    })
}

// --- scattering certificates --------------------------------------------------

/// Quantitative evidence that a run is on the scattering side.
#[derive(Debug, Clone, Copy)]
pub struct ScatteringCertificate<T: Real = f64> {
    /// L(0) / min_t L(t) with L = ∫|u|^{α+2}: collapse of the potential
    /// energy under dispersion.
    pub decay_factor: T,
    /// decay_factor ≥ 5.
    pub decay_ok: bool,
    /// ‖u‖_{L^{k̄}([0,T]; L^{r̄})} from the recorded rows.
    pub criterion_norm: T,
    /// Fraction of the criterion-norm integral contributed by the last
    /// quarter of the horizon (saturation indicator).
    pub tail_fraction: T,
    /// min over snapshots of the mass fraction inside the probe ball.
    pub ball_mass_fraction: Option<T>,
    /// min over snapshots of ν = K₀(χu)/∫|χu|^{α+2} at the probe cutoff.
    pub coercivity_min: Option<T>,
}

/// Builds the scattering certificate from rows and (optionally) snapshots.
pub fn scattering_certificate<T: Real>(
    p: &Params<T>,
    traj: &Trajectory<T>,
    ball_radius: T,
    cutoff_radius: T,
) -> Result<ScatteringCertificate<T>, DiagnosticsError> {
    let exps = scattering_exponents(p).map_err(|_| DiagnosticsError::UnsupportedRegime)?;
    let rows = &traj.observables;
    if rows.len() < 2 {
        return Err(DiagnosticsError::EmptyTrajectory);
    }
    let l0 = rows[0].l_alpha2;
    let l_min = rows
        .iter()
        .map(|o| o.l_alpha2)
        .fold(T::infinity(), |a, b| a.min(b))
        .max(T::of(1e-300));
    let decay_factor = l0 / l_min;

    // ‖u(t)‖_{r̄}^{k̄} = L(t)^{k̄/r̄} since r̄ = α+2.
    let power = exps.k_bar / exps.r_bar;
    let ts: Vec<T> = rows.iter().map(|o| o.t).collect();
    let integrand: Vec<T> = rows.iter().map(|o| o.l_alpha2.powf(power)).collect();
    let t_end = *ts.last().unwrap();
    let total = trapezoid_prefix(&ts, &integrand, t_end);
    let head = trapezoid_prefix(&ts, &integrand, t_end * T::of(0.75));
    let criterion_norm = total.powf(T::one() / exps.k_bar);
    let tail_fraction = if total > T::zero() {
        (total - head) / total
    } else {
        T::zero()
    };

    let mut ball_mass_fraction = None;
    let mut coercivity_min = None;
    if !traj.snapshots.is_empty() {
        let grid = traj.snapshots[0].1.grid();
        let limit = grid
            .r
            .iter()
            .position(|&r| r >= ball_radius)
            .unwrap_or(grid.m);
        let mut frac_min = T::infinity();
        for (_, u) in &traj.snapshots {
            let total_mass = functionals::mass(u);
            if total_mass > T::zero() {
                frac_min = frac_min.min(functionals::mass_limited(u, limit) / total_mass);
            }
        }
        if frac_min.is_finite() {
            ball_mass_fraction = Some(frac_min);
        }
        if let Ok(cut) = functionals::make_cutoff(grid, cutoff_radius) {
            let mut nu_min = T::infinity();
            let mut saw_any = false;
            for (_, u) in &traj.snapshots {
                let parts = functionals::cutoff_coercivity(p, &cut, u);
                if parts.lalpha2_cut > T::zero() && parts.lalpha2_cut.is_finite() {
                    nu_min = nu_min.min(parts.k0_cut / parts.lalpha2_cut);
                    saw_any = true;
                }
            }
            if saw_any {
                coercivity_min = Some(nu_min);
            }
        }
    }
    Ok(ScatteringCertificate {
        decay_factor,
        decay_ok: decay_factor >= T::of(5.0),
        criterion_norm,
        tail_fraction,
        ball_mass_fraction,
        coercivity_min,
    })
}

/// Minimum of ν = K₀(χ_R u)/∫|χ_R u|^{α+2} over the snapshots, for each
/// probe radius (skipping snapshots where the cutoff field vanishes).
pub fn coercivity_scan<T: Real>(
    p: &Params<T>,
    snapshots: &[(T, RadialField<T>)],
    radii: &[T],
) -> Vec<(T, Option<T>)> {
    let mut out = Vec::with_capacity(radii.len());
    for &radius in radii {
        let mut nu_min = T::infinity();
        let mut saw_any = false;
        if let Some((_, u0)) = snapshots.first() {
            if let Ok(cut) = functionals::make_cutoff(u0.grid(), radius) {
                for (_, u) in snapshots {
                    let parts = functionals::cutoff_coercivity(p, &cut, u);
                    if parts.lalpha2_cut > T::zero() && parts.lalpha2_cut.is_finite() {
                        nu_min = nu_min.min(parts.k0_cut / parts.lalpha2_cut);
                        saw_any = true;
                    }
                }
            }
        }
        out.push((radius, if saw_any { Some(nu_min) } else { None }));
    }
    out
}

/// Free-profile Cauchy data: distances between backward-propagated states.
#[derive(Debug, Clone)]
pub struct CauchyReport<T: Real = f64> {
    /// The snapshot times actually used.
    pub times: Vec<T>,
    /// ‖v_{k+1} − v_k‖_{H²} / ‖v_0‖_{H²} between consecutive free profiles
    /// v_k = e^{+i t_k L} u(t_k).
    pub distances: Vec<T>,
    /// Whether the distances strictly decrease (Cauchy trend).
    pub contracting: bool,
}

/// Propagates snapshots at the requested times backward under the *linear*
/// flow and measures how fast the resulting free profiles converge —
/// the constructive trace of scattering. `None` if any requested time has
/// no matching snapshot or fewer than two times are given.
pub fn scattering_profiles_cauchy<T: Real>(
    p: &Params<T>,
    traj: &Trajectory<T>,
    times: &[T],
    dt: T,
) -> Option<CauchyReport<T>> {
    if times.len() < 2 || traj.snapshots.is_empty() || !(dt > T::zero()) {
        return None;
    }
    let grid = traj.snapshots[0].1.grid().clone();
    let mut stepper = Stepper::new(grid.clone(), p, true);
    let mut profiles = Vec::with_capacity(times.len());
    let mut used_times = Vec::with_capacity(times.len());
    let mut scratch = Vec::new();
    for &target in times {
        let (t_snap, u_snap) = traj
            .snapshots
            .iter()
            .min_by(|a, b| {
                (a.0 - target)
                    .abs()
                    .partial_cmp(&(b.0 - target).abs())
                    .unwrap()
            })
            .unwrap();
        if (*t_snap - target).abs() > dt * T::of(0.51) {
            return None;
        }
        let n_steps = (*t_snap / dt).round().to_f64().unwrap_or(0.0) as usize;
        if n_steps == 0 {
            return None;
        }
        let dt_back = -*t_snap / T::of_usize(n_steps);
        let mut v = u_snap.values.clone();
        for _ in 0..n_steps {
            stepper.step(&mut v, dt_back, &mut scratch).ok()?;
        }
        profiles.push(v);
        used_times.push(*t_snap);
    }
    let h2 = |v: &[Cplx<T>]| {
        let mut lap = vec![Cplx::new(T::zero(), T::zero()); grid.m];
        grid.apply_laplacian(v, &mut lap);
        (grid.integrate_abs2(v) + grid.integrate_abs2(&lap)).sqrt()
    };
    let norm0 = h2(&profiles[0]).max(T::eps());
    let mut distances = Vec::with_capacity(profiles.len() - 1);
    for k in 0..profiles.len() - 1 {
        let diff: Vec<Cplx<T>> = profiles[k + 1]
            .iter()
            .zip(&profiles[k])
            .map(|(&a, &b)| a - b)
            .collect();
        distances.push(h2(&diff) / norm0);
    }
    let contracting = distances.windows(2).all(|w| w[1] < w[0]);
    Some(CauchyReport {
        times: used_times,
        distances,
        contracting,
    })
}

/// Least-squares fit of the sup-norm decay law sup|u(t)| ~ t^{slope}.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit<T: Real = f64> {
    /// Fitted log-log slope.
    pub slope: T,
    /// The dispersive prediction −N/4.
    pub target: T,
    /// Number of snapshots in the fit window.
    pub n_points: usize,
    /// |slope − target| ≤ 0.1·|target|.
    pub within: bool,
}

/// Fits log sup|u| against log t over snapshots in the window [t_lo, t_hi].
///
/// The stationary-phase prediction for the free biharmonic group is
/// sup|u| ~ t^{−N/4}; with μ > 0 that law holds in the quartic-dominated
/// window t ≪ 1/μ² (late times cross over to the t^{−N/2} second-order
/// rate), so the window must be chosen accordingly. `None` with fewer than
/// three usable snapshots.
pub fn dispersive_decay_fit<T: Real>(
    p: &Params<T>,
    traj: &Trajectory<T>,
    t_lo: T,
    t_hi: T,
) -> Option<DecayFit<T>> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (t, u) in &traj.snapshots {
        if *t >= t_lo && *t <= t_hi && *t > T::zero() {
            let sup = u
                .values
                .iter()
                .map(|z| z.norm_sqr())
                .fold(T::zero(), |a, b| a.max(b))
                .sqrt();
            if sup > T::zero() {
                xs.push(t.ln());
                ys.push(sup.ln());
            }
        }
    }
    if xs.len() < 3 {
        return None;
    }
    let nf = T::of_usize(xs.len());
    let x_mean = xs.iter().copied().sum::<T>() / nf;
    let y_mean = ys.iter().copied().sum::<T>() / nf;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for i in 0..xs.len() {
        sxy += (xs[i] - x_mean) * (ys[i] - y_mean);
        sxx += (xs[i] - x_mean) * (xs[i] - x_mean);
    }
    let slope = sxy / sxx;
    let target = -T::of_usize(p.n as usize) / T::of(4.0);
    Some(DecayFit {
        slope,
        target,
        n_points: xs.len(),
        within: (slope - target).abs() <= T::of(0.1) * target.abs(),
    })
}
