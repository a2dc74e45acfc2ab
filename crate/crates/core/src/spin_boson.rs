//! Pure-dephasing qubit coupled to a bosonic bath, with and without
//! bang-bang pi pulses about x.
//!
//! Units: hbar = 1, temperatures are given as `kT / (hbar omega_c)`. The bath
//! is traced out analytically, so a run at time `t` only needs the decoherence
//! exponent
//!
//! ```text
//! Gamma(t) = 2 int_0^inf dw D(w)/w^2 coth(w / 2kT) |f(w, t)|^2
//! ```
//!
//! where `f` is the filter function of the (sign-alternating) free evolution
//! segments. Without pulses `|f|^2 = 2 (1 - cos wt)`.
//!
//! Pulse model: dephasing flips sign at each pulse midpoint (instantaneous
//! idealisation for the bath), while the qubit rotation itself proceeds
//! linearly through the pulse window, reaching pi at its end.

use std::f64::consts::PI;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::channel::{compose, AffineChannel, DEFAULT_INJECTIVITY_TOL};
use crate::error::{Error, Result};
use crate::estimation::{solve_optimal_observable, variance};
use crate::quadrature;
use crate::su_basis::{BlochVector, GeneratorBasis, ObservableRepr, StructureConstants};
use crate::linalg::{RMatrix, RVector};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
/// Initial upper cutoff is `max(CUTOFF_FACTOR * omega_c, CUTOFF_FACTOR / t)`
/// times `1 + CUTOFF_GUARD`, doubled until the tail bound is small enough.
const CUTOFF_FACTOR: f64 = 40.0;
const CUTOFF_GUARD: f64 = 0.25;
const MAX_INTERVALS: usize = 50_000;
const MAX_CUTOFF_DOUBLINGS: usize = 12;

pub const PULSE_MODEL: &str =
    "pi_x pulses: dephasing sign flip at pulse midpoint (instantaneous for the bath), rotation linear in time across the pulse window";

#[derive(Debug, Clone, Copy)]
pub enum SpectralDensity {
    /// `D(w) = w e^{-w/omega_c} / 4`.
    Ohmic,
    /// Caller-supplied `D(w, omega_c)`. The tail bound assumes it decays at
    /// least as fast as the ohmic form.
    Custom(fn(f64, f64) -> f64),
}

#[derive(Debug, Clone, Copy)]
pub struct BathSpec {
    pub omega_c: f64,
    /// `kT / (hbar omega_c)`; zero means the `coth -> 1` limit.
    pub temperature: f64,
    pub density: SpectralDensity,
}

impl BathSpec {
    pub fn new(omega_c: f64, temperature: f64) -> Result<Self> {
        if !(omega_c > 0.0 && omega_c.is_finite()) {
            return Err(Error::InvalidParameter(format!("omega_c must be > 0, got {omega_c}")));
        }
        if !(temperature >= 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "temperature must be >= 0, got {temperature}"
            )));
        }
        Ok(Self {
            omega_c,
            temperature,
            density: SpectralDensity::Ohmic,
        })
    }

    pub fn spectral_density(&self, w: f64) -> f64 {
        match self.density {
            SpectralDensity::Ohmic => 0.25 * w * (-w / self.omega_c).exp(),
            SpectralDensity::Custom(d) => d(w, self.omega_c),
        }
    }

    fn kt(&self) -> f64 {
        self.temperature * self.omega_c
    }

    /// `coth(w / 2kT)`.
    pub fn thermal_factor(&self, w: f64) -> f64 {
        let kt = self.kt();
        if kt == 0.0 {
            1.0
        } else {
            1.0 / (w / (2.0 * kt)).tanh()
        }
    }

    /// `2 D(w) coth(w/2kT) / w^2`, the weight multiplying `|f|^2`.
    fn weight(&self, w: f64) -> f64 {
        2.0 * self.spectral_density(w) * self.thermal_factor(w) / (w * w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSequence {
    pub delta_t: f64,
    pub tau: f64,
    pub count: usize,
}

impl PulseSequence {
    pub fn new(delta_t: f64, tau: f64, count: usize) -> Result<Self> {
        if !(delta_t > 0.0 && delta_t.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta_t must be > 0, got {delta_t}")));
        }
        if !(0.0..delta_t).contains(&tau) {
            return Err(Error::InvalidParameter(format!(
                "pulse duration must satisfy 0 <= tau < delta_t, got tau = {tau}"
            )));
        }
        Ok(Self { delta_t, tau, count })
    }

    /// Start of pulse `k` (1-based): `k delta_t + (k - 1) tau`.
    pub fn start(&self, k: usize) -> f64 {
        k as f64 * self.delta_t + (k as f64 - 1.0) * self.tau
    }

    pub fn end(&self, k: usize) -> f64 {
        self.start(k) + self.tau
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.start(k) + 0.5 * self.tau
    }

    /// Midpoints strictly before `t`: where the dephasing sign flips.
    pub fn flips_before(&self, t: f64) -> Vec<f64> {
        (1..=self.count)
            .map(|k| self.midpoint(k))
            .take_while(|&m| m < t)
            .collect()
    }

    /// Completed pulses at `t` and the rotation angle of a pulse in progress.
    pub fn rotation_state(&self, t: f64) -> (usize, f64) {
        let mut completed = 0;
        for k in 1..=self.count {
            let (s, e) = (self.start(k), self.end(k));
            if t >= e {
                completed += 1;
            } else if t > s {
                return (completed, PI * (t - s) / self.tau);
            } else {
                break;
            }
        }
        (completed, 0.0)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Integrates `weight(w) * filter(w)` on `[0, inf)`; `filter_max` bounds the
/// filter so the truncated tail can be controlled.
fn decoherence_integral<F: Fn(f64) -> f64>(
    bath: &BathSpec,
    t: f64,
    filter: F,
    filter_max: f64,
    rel_tol: f64,
) -> Result<f64> {
    let wc = bath.omega_c;
    let integrand = |w: f64| {
        if w == 0.0 {
            0.0
        } else {
            bath.weight(w) * filter(w)
        }
    };
    let panel = wc.min(PI / t);
    let mut cutoff = (CUTOFF_FACTOR * wc).max(CUTOFF_FACTOR / t) * (1.0 + CUTOFF_GUARD);
    for _ in 0..MAX_CUTOFF_DOUBLINGS {
        let panels = (cutoff / panel).ceil() as usize;
        let breakpoints: Vec<f64> = (0..=panels)
            .map(|i| (i as f64 * panel).min(cutoff))
            .collect();
        let r = quadrature::integrate(integrand, &breakpoints, 0.0, rel_tol, MAX_INTERVALS.max(4 * panels));
        if !r.converged {
            return Err(Error::QuadratureAccuracy {
                estimate: r.value,
                error: r.error,
                target: rel_tol * r.value.abs(),
            });
        }
        let tail = bath.weight(cutoff) * filter_max * wc;
        if tail <= 0.1 * rel_tol * r.value.abs() {
            return Ok(r.value);
        }
        cutoff *= 2.0;
    }
    Err(Error::QuadratureAccuracy {
        estimate: f64::NAN,
        error: f64::INFINITY,
        target: rel_tol,
    })
}

/// Pulse-free decoherence exponent
/// `Gamma_0(t) = 4 int D(w) (1 - cos wt)/w^2 coth(w/2kT) dw`.
pub fn gamma0(t: f64, bath: &BathSpec, rel_tol: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    // 2 (1 - cos wt) = 4 sin^2(wt/2), written without cancellation
    decoherence_integral(
        bath,
        t,
        |w| {
            let s = (0.5 * w * t).sin();
            4.0 * s * s
        },
        4.0,
        rel_tol,
    )
}

/// `|f(w)|^2` for segment boundaries `0 = b_0 < ... < b_m = t` with signs
/// `(-1)^k` on segment k.
fn filter_power(w: f64, boundaries: &[f64]) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (k, pair) in boundaries.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        // e^{iwb} - e^{iwa} = 2i sin(w(b-a)/2) e^{iw(a+b)/2}
        let amp = 2.0 * (0.5 * w * (b - a)).sin();
        let (s, c) = (0.5 * w * (a + b)).sin_cos();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        re -= sign * amp * s;
        im += sign * amp * c;
    }
    re * re + im * im
}

/// Decoherence exponent under a pi-pulse sequence, from the filter function
/// of the sign-alternating segments between pulse midpoints.
pub fn pulsed_gamma(t: f64, seq: &PulseSequence, bath: &BathSpec, rel_tol: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let mut boundaries = vec![0.0];
    boundaries.extend(seq.flips_before(t));
    boundaries.push(t);
    let segments = (boundaries.len() - 1) as f64;
    decoherence_integral(
        bath,
        t,
        |w| filter_power(w, &boundaries),
        4.0 * segments * segments,
        rel_tol,
    )
}

/// `gamma0` or `pulsed_gamma` depending on `seq`.
pub fn decoherence(t: f64, seq: Option<&PulseSequence>, bath: &BathSpec, rel_tol: f64) -> Result<f64> {
    match seq {
        Some(s) => pulsed_gamma(t, s, bath, rel_tol),
        None => gamma0(t, bath, rel_tol),
    }
}

/// `A(t) = diag(e^-Gamma0, e^-Gamma0, 1)`, `c = 0`.
pub fn dephasing_channel(t: f64, bath: &BathSpec, rel_tol: f64) -> Result<AffineChannel> {
    Ok(AffineChannel::qubit_dephasing(gamma0(t, bath, rel_tol)?))
}

/// Polar angle of the optimal measurement without pulses:
/// `tan theta(t) = e^{Gamma0(t)} tan theta_obs`. Written with `atan2`, so any
/// `theta_obs` maps to the branch continuous from `theta(0) = theta_obs`
/// (up to the `[0, pi]` polar range).
pub fn optimal_angle_free(t: f64, theta_obs: f64, bath: &BathSpec, rel_tol: f64) -> Result<f64> {
    let g = gamma0(t, bath, rel_tol)?;
    Ok((g.exp() * theta_obs.sin()).atan2(theta_obs.cos()))
}

/// Bloch rotation about x by `angle`. Whole multiples of pi are written out
/// exactly so the y-z mixing is identically zero between pulses.
fn bloch_x_rotation(completed: usize, partial: f64) -> RMatrix {
    let sign = if completed.is_multiple_of(2) { 1.0 } else { -1.0 };
    let flips = RMatrix::from_diagonal(&DVector::from_vec(vec![1.0, sign, sign]));
    if partial == 0.0 {
        return flips;
    }
    let (s, c) = partial.sin_cos();
    let r = RMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c]);
    r * flips
}

fn pulsed_channel_from_gamma(t: f64, seq: &PulseSequence, gamma: f64) -> Result<AffineChannel> {
    let (completed, partial) = seq.rotation_state(t);
    let rot = AffineChannel::new(2, bloch_x_rotation(completed, partial), RVector::zeros(3))?;
    compose(&rot, &AffineChannel::qubit_dephasing(gamma))
}

/// Channel at time `t` under the pulse sequence, composed segment by segment:
/// dephasing increments between pulse midpoints interleaved with pi_x
/// rotations, and a partial rotation if a pulse is in progress.
pub fn pulsed_channel(t: f64, seq: &PulseSequence, bath: &BathSpec, rel_tol: f64) -> Result<AffineChannel> {
    check_time(t)?;
    let (completed, partial) = seq.rotation_state(t);
    let pi_pulse = AffineChannel::new(2, bloch_x_rotation(1, 0.0), RVector::zeros(3))?;
    let mut channel = AffineChannel::identity(2);
    let mut previous = 0.0;
    for k in 1..=completed {
        let g = pulsed_gamma(seq.midpoint(k), seq, bath, rel_tol)?;
        channel = compose(&AffineChannel::qubit_dephasing(g - previous), &channel)?;
        channel = compose(&pi_pulse, &channel)?;
        previous = g;
    }
    let total = pulsed_gamma(t, seq, bath, rel_tol)?;
    channel = compose(&AffineChannel::qubit_dephasing(total - previous), &channel)?;
    if partial != 0.0 {
        let rot = AffineChannel::new(2, bloch_x_rotation(0, partial), RVector::zeros(3))?;
        channel = compose(&rot, &channel)?;
    }
    Ok(channel)
}

/// The paper's observable family `sin(theta_obs) sigma_x + cos(theta_obs) sigma_z`.
pub fn tilted_observable(theta_obs: f64) -> ObservableRepr {
    ObservableRepr::new(0.0, vec![theta_obs.sin(), 0.0, theta_obs.cos()])
}

/// Spherical angles `(theta, phi)` of a Bloch direction.
pub fn direction_angles(y: &RVector) -> (f64, f64) {
    let rho = (y[0] * y[0] + y[1] * y[1]).sqrt();
    let theta = rho.atan2(y[2]);
    // + 0.0 turns -0.0 into +0.0
    let phi = y[1].atan2(y[0]) + 0.0;
    (theta, phi)
}

fn channel_at(t: f64, seq: Option<&PulseSequence>, gamma: f64) -> Result<AffineChannel> {
    match seq {
        Some(s) => pulsed_channel_from_gamma(t, s, gamma),
        None => Ok(AffineChannel::qubit_dephasing(gamma)),
    }
}

/// Direction `n(t)` of the optimal measurement for the tilted observable.
pub fn measurement_direction(
    t: f64,
    theta_obs: f64,
    seq: Option<&PulseSequence>,
    bath: &BathSpec,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    let gamma = decoherence(t, seq, bath, rel_tol)?;
    let channel = channel_at(t, seq, gamma)?;
    let sol = solve_optimal_observable(&channel, &tilted_observable(theta_obs), DEFAULT_INJECTIVITY_TOL)?;
    Ok(direction_angles(&sol.y.x))
}

#[derive(Debug, Clone)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub gamma: f64,
    pub a: RMatrix,
    pub c: RVector,
    pub theta: f64,
    pub phi: f64,
    /// `1 / Var_{E(rho; t)}(Y(t))`.
    pub j: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectoryOptions {
    pub rel_tol: f64,
    pub injectivity_tol: f64,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            rel_tol: DEFAULT_REL_TOL,
            injectivity_tol: DEFAULT_INJECTIVITY_TOL,
        }
    }
}

/// Evaluates every grid point independently (in parallel); the output order
/// follows `grid`.
pub fn trajectory(
    grid: &[f64],
    theta_obs: f64,
    rho0: &BlochVector,
    seq: Option<&PulseSequence>,
    bath: &BathSpec,
    opts: TrajectoryOptions,
) -> Result<Trajectory> {
    let basis = GeneratorBasis::new(2)?;
    basis.bloch_to_state(rho0, true)?;
    let sc = StructureConstants::new(&basis);
    let obs = tilted_observable(theta_obs);
    let points = grid
        .par_iter()
        .map(|&t| {
            check_time(t)?;
            let gamma = decoherence(t, seq, bath, opts.rel_tol)?;
            let channel = channel_at(t, seq, gamma)?;
            let sol = solve_optimal_observable(&channel, &obs, opts.injectivity_tol)?;
            let (theta, phi) = direction_angles(&sol.y.x);
            let s = channel.apply_bloch(rho0)?;
            let j = 1.0 / variance(&sol.y, &s, &sc)?;
            Ok(TrajectoryPoint {
                t,
                gamma,
                a: channel.a().clone(),
                c: channel.c().clone(),
                theta,
                phi,
                j,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::unitary_channel;
    use crate::channel::x_rotation;
    use crate::linalg::max_abs_real;

    fn bath(temp: f64) -> BathSpec {
        BathSpec::new(1.0, temp).unwrap()
    }

    #[test]
    fn gamma_zero_at_origin_and_rejects_negative_time() {
        assert_eq!(gamma0(0.0, &bath(10.0), 1e-8).unwrap(), 0.0);
        assert!(gamma0(-1.0, &bath(1.0), 1e-8).is_err());
    }

    #[test]
    fn zero_temperature_closed_form() {
        let b = bath(0.0);
        for &t in &[0.01, 0.5, 1.0, 3.0, 7.5, 20.0] {
            let g = gamma0(t, &b, 1e-10).unwrap();
            let want = 0.5 * (1.0 + t * t).ln();
            assert!(((g - want) / want).abs() < 1e-8, "t={t}: {g} vs {want}");
        }
    }

    #[test]
    fn pulse_sequence_timing() {
        let seq = PulseSequence::new(0.3, 0.015, 3).unwrap();
        assert!((seq.start(1) - 0.3).abs() < 1e-15);
        assert!((seq.start(2) - 0.615).abs() < 1e-15);
        assert!((seq.end(2) - 0.63).abs() < 1e-15);
        assert_eq!(seq.rotation_state(0.2), (0, 0.0));
        let (done, part) = seq.rotation_state(0.3075);
        assert_eq!(done, 0);
        assert!((part - PI / 2.0).abs() < 1e-9);
        assert_eq!(seq.rotation_state(0.4).0, 1);
        assert_eq!(seq.rotation_state(5.0), (3, 0.0));
        assert_eq!(seq.flips_before(0.5).len(), 1);
        assert!(PulseSequence::new(0.3, 0.3, 1).is_err());
        assert!(PulseSequence::new(-1.0, 0.0, 1).is_err());
    }

    #[test]
    fn zero_pulses_match_free_decay() {
        let b = bath(10.0);
        let seq = PulseSequence::new(0.3, 0.015, 0).unwrap();
        for &t in &[0.1, 1.0, 4.0] {
            let free = gamma0(t, &b, 1e-8).unwrap();
            let pulsed = pulsed_gamma(t, &seq, &b, 1e-8).unwrap();
            assert!(((free - pulsed) / free).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn echo_reduces_dephasing() {
        let b = bath(1.0);
        let t = 1.0;
        let seq = PulseSequence::new(0.5, 0.0, 1).unwrap();
        let echo = pulsed_gamma(t, &seq, &b, 1e-8).unwrap();
        let free = gamma0(t, &b, 1e-8).unwrap();
        assert!(echo < free, "{echo} vs {free}");
    }

    #[test]
    fn filter_reduces_to_free_form() {
        let t = 1.7;
        for &w in &[0.01, 0.3, 2.0, 11.0] {
            let f = filter_power(w, &[0.0, t]);
            assert!((f - 2.0 * (1.0 - (w * t).cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn dephasing_channel_shape() {
        let b = bath(1.0);
        let ch = dephasing_channel(0.0, &b, 1e-8).unwrap();
        assert_eq!(ch.a(), &RMatrix::identity(3, 3));
        let ch = dephasing_channel(2.0, &b, 1e-8).unwrap();
        assert_eq!(ch.c().norm(), 0.0);
        assert_eq!(ch.a()[(2, 2)], 1.0);
        assert!(ch.injective());
        // large exponent flips the injectivity flag
        assert!(!AffineChannel::qubit_dephasing(25.0).injective());
    }

    #[test]
    fn free_angle_limits() {
        let b = bath(10.0);
        assert_eq!(optimal_angle_free(3.0, 0.0, &b, 1e-8).unwrap(), 0.0);
        let t_obs = 0.3;
        assert!((optimal_angle_free(0.0, t_obs, &b, 1e-8).unwrap() - t_obs).abs() < 1e-15);
        let late = optimal_angle_free(40.0, t_obs, &b, 1e-8).unwrap();
        assert!((late - PI / 2.0).abs() < 1e-6);
    }

    #[test]
    fn pulsed_channel_matches_closed_form_and_rotation() {
        let b = bath(10.0);
        let seq = PulseSequence::new(0.3, 0.015, 4).unwrap();
        let basis = GeneratorBasis::new(2).unwrap();
        let pi_x = unitary_channel(x_rotation(PI), &basis).unwrap().affine;
        for &t in &[0.2, 0.31, 0.4, 0.62, 1.1] {
            let composed = pulsed_channel(t, &seq, &b, 1e-9).unwrap();
            let g = pulsed_gamma(t, &seq, &b, 1e-9).unwrap();
            let direct = pulsed_channel_from_gamma(t, &seq, g).unwrap();
            assert!(max_abs_real(&(composed.a() - direct.a())) < 1e-9, "t={t}");
            assert!(composed.max_singular_value() <= 1.0 + 1e-9);
        }
        // before the first pulse: plain dephasing
        let early = pulsed_channel(0.2, &seq, &b, 1e-9).unwrap();
        let free = dephasing_channel(0.2, &b, 1e-9).unwrap();
        assert!(max_abs_real(&(early.a() - free.a())) < 1e-12);
        // just after the first pulse: pi_x times dephasing
        let t = seq.end(1) + 1e-6;
        let after = pulsed_channel(t, &seq, &b, 1e-9).unwrap();
        let g = pulsed_gamma(t, &seq, &b, 1e-9).unwrap();
        let want = pi_x.a() * AffineChannel::qubit_dephasing(g).a();
        assert!(max_abs_real(&(after.a() - want)) < 1e-12);
        // a partial rotation matches the unitary construction
        let mid = seq.start(1) + 0.3 * seq.tau;
        let (_, partial) = seq.rotation_state(mid);
        let r = unitary_channel(x_rotation(partial), &basis).unwrap().affine;
        assert!(max_abs_real(&(bloch_x_rotation(0, partial) - r.a())) < 1e-14);
    }

    #[test]
    fn free_direction_follows_tan_law() {
        let b = bath(10.0);
        let t_obs = 0.25 * PI;
        for &t in &[0.0, 0.1, 0.3, 0.6] {
            let (theta, phi) = measurement_direction(t, t_obs, None, &b, 1e-8).unwrap();
            let want = optimal_angle_free(t, t_obs, &b, 1e-8).unwrap();
            assert!((theta - want).abs() < 1e-10);
            assert_eq!(phi, 0.0);
        }
    }

    #[test]
    fn phi_moves_during_pulse() {
        let b = bath(10.0);
        let seq = PulseSequence::new(0.3, 0.015, 2).unwrap();
        let (_, phi) = measurement_direction(seq.midpoint(1), 0.25 * PI, Some(&seq), &b, 1e-8).unwrap();
        assert!(phi.abs() > 0.1);
        let (_, phi) = measurement_direction(0.1, 0.25 * PI, Some(&seq), &b, 1e-8).unwrap();
        assert_eq!(phi, 0.0);
    }

    #[test]
    fn trajectory_sigma_z_is_untouched() {
        let b = bath(10.0);
        let grid: Vec<f64> = (0..20).map(|i| 0.03 * i as f64).collect();
        let tr = trajectory(&grid, 0.0, &BlochVector::zeros(3), None, &b, TrajectoryOptions::default()).unwrap();
        for p in &tr.points {
            assert!((p.j - 1.0).abs() < 1e-14);
            assert_eq!(p.theta, 0.0);
        }
    }

    #[test]
    fn trajectory_rejects_invalid_state() {
        let b = bath(1.0);
        let bad = BlochVector::new(vec![0.0, 0.0, 2.0]);
        assert!(trajectory(&[0.0], 0.3, &bad, None, &b, TrajectoryOptions::default()).is_err());
    }
}
