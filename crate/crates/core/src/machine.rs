//! Machine parametrization and the per-roundtrip pipeline.
//!
//! One roundtrip processes every pulse through input facet loss, the crystal
//! (against a fresh coherent pump), output facet loss and the outcoupler with
//! homodyne detection. Once all pulses are measured, the feedback signal
//! `v_i = J₀ Σ_j J_ij w_j` is injected into each pulse's q quadrature (see
//! [`MachineParams::feedback`] for the sign).

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crystal::{self, CrystalState};
use crate::error::{CimError, Result};
use crate::gaussian::{self, GaussianMode, ModeSelector};
use crate::integrate::rk4;
use crate::ising::IsingProblem;
use crate::noise::NoiseSource;

/// Nonlinear strength cap `(ετ)² ≤ 10⁻²`.
pub const MAX_EPS_TAU_SQ: f64 = 1e-2;

/// Means beyond this magnitude terminate a no-crystal trajectory.
pub const OVERFLOW_LIMIT: f64 = 1e100;

/// Initial mean-field amplitude magnitude.
pub const MEAN_FIELD_SEED_AMPLITUDE: f64 = 1e-3;

/// Model used for each pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Full Gaussian-state model with the nonlinear crystal.
    #[default]
    Gaussian,
    /// Gaussian states with the crystal removed: linear dynamics only.
    #[serde(alias = "coherent-state", alias = "coherent_state")]
    Coherent,
    /// Classical amplitudes in rescaled units with optional feedback noise.
    #[serde(alias = "mean-field", alias = "mean_field")]
    Meanfield,
}

impl FromStr for Mode {
    type Err = CimError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Mode::Gaussian),
            "coherent" | "coherent-state" | "coherent_state" => Ok(Mode::Coherent),
            "meanfield" | "mean-field" | "mean_field" => Ok(Mode::Meanfield),
            other => Err(CimError::Domain(format!(
                "unknown mode {other:?}, expected gaussian, coherent or meanfield"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Gaussian => "gaussian",
            Mode::Coherent => "coherent",
            Mode::Meanfield => "meanfield",
        })
    }
}

/// Per-trajectory perturbation scales: `x → x + scale·z` with `z ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    #[serde(default)]
    pub alpha_fb: f64,
    #[serde(default)]
    pub pump_r: f64,
}

/// User-facing machine parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserParams {
    /// Roundtrips for the intracavity power to decay by `1/e²`.
    pub t_decay: f64,
    /// Fraction of the roundtrip attenuation that goes to the measured outcoupler.
    pub eta_esc: f64,
    /// Pump amplitude relative to threshold; may be zero or negative.
    pub pump_r: f64,
    /// Steady-state photon number at `pump_r = 2`.
    pub n_sat: f64,
    /// Dimensionless feedback gain.
    pub alpha_fb: f64,
    #[serde(default)]
    pub mode: Mode,
    /// Feedback-noise standard deviation, mean-field mode only.
    #[serde(default)]
    pub sigma_fb: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<Jitter>,
}

impl UserParams {
    /// Operating point of the N=16 sampling experiments.
    pub fn fig4() -> Self {
        Self {
            t_decay: 4.0,
            eta_esc: 0.2,
            pump_r: 0.8,
            n_sat: 200.0,
            alpha_fb: 5.0,
            mode: Mode::Gaussian,
            sigma_fb: 0.0,
            jitter: None,
        }
    }

    /// Parameters of the finesse-convergence comparison (`t_decay` varies).
    pub fn fig3(t_decay: f64) -> Self {
        Self { t_decay, eta_esc: 0.5, pump_r: 0.9, alpha_fb: 5.0, ..Self::fig4() }
    }

    /// Table row labelled "Positive pump" (numeric columns taken literally).
    pub fn table_positive_pump() -> Self {
        Self {
            t_decay: 4.0,
            eta_esc: 0.2,
            pump_r: -0.8,
            alpha_fb: 40.0,
            jitter: Some(Jitter { alpha_fb: 10.0, pump_r: 0.08 }),
            ..Self::fig4()
        }
    }

    /// Table row labelled "No pump".
    pub fn table_no_pump() -> Self {
        Self {
            t_decay: 4.0,
            eta_esc: 0.5,
            pump_r: 0.0,
            alpha_fb: 30.0,
            jitter: Some(Jitter { alpha_fb: 5.0, pump_r: 0.0 }),
            ..Self::fig4()
        }
    }

    /// Table row labelled "Negative pump" (numeric columns taken literally).
    pub fn table_negative_pump() -> Self {
        Self {
            t_decay: 1.0,
            eta_esc: 0.5,
            pump_r: 0.8,
            alpha_fb: 4.0,
            jitter: Some(Jitter { alpha_fb: 0.6, pump_r: 0.05 }),
            ..Self::fig4()
        }
    }

    /// Table row labelled "No nonlinearity".
    pub fn table_no_nonlinearity() -> Self {
        Self {
            t_decay: 2.0,
            eta_esc: 0.5,
            pump_r: 0.0,
            alpha_fb: 10.0,
            mode: Mode::Coherent,
            jitter: Some(Jitter { alpha_fb: 2.0, pump_r: 0.0 }),
            ..Self::fig4()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(CimError::Domain(what.to_string()));
        if !(self.t_decay > 0.0 && self.t_decay.is_finite()) {
            return bad("t_decay must be a positive finite number");
        }
        if !(self.eta_esc > 0.0 && self.eta_esc <= 1.0) {
            return bad("eta_esc must lie in (0, 1]");
        }
        if !(self.n_sat > 0.0 && self.n_sat.is_finite()) {
            return bad("n_sat must be a positive finite number");
        }
        if !(self.sigma_fb >= 0.0 && self.sigma_fb.is_finite()) {
            return bad("sigma_fb must be >= 0");
        }
        if !self.pump_r.is_finite() || !self.alpha_fb.is_finite() {
            return bad("pump_r and alpha_fb must be finite");
        }
        if let Some(j) = self.jitter {
            if !(j.alpha_fb >= 0.0 && j.pump_r >= 0.0 && j.alpha_fb.is_finite() && j.pump_r.is_finite()) {
                return bad("jitter scales must be finite and >= 0");
            }
        }
        Ok(())
    }

    /// Draws one trajectory's perturbed parameters.
    ///
    /// Jittered values are clamped so that `|pump_r| < 2` and `alpha_fb > 0`.
    pub fn jittered<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let Some(j) = self.jitter else { return *self };
        let z_alpha: f64 = rng.sample(rand_distr::StandardNormal);
        let z_r: f64 = rng.sample(rand_distr::StandardNormal);
        let mut out = *self;
        if j.alpha_fb > 0.0 {
            out.alpha_fb = (self.alpha_fb + j.alpha_fb * z_alpha).max(1e-9);
        }
        if j.pump_r > 0.0 {
            out.pump_r = (self.pump_r + j.pump_r * z_r).clamp(-1.999, 1.999);
        }
        out.jitter = None;
        out
    }
}

/// Physical parameters derived from [`UserParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    pub mode: Mode,
    pub t_decay: f64,
    /// Per-facet field loss amplitude.
    pub r_loss: f64,
    /// Outcoupler field amplitude.
    pub r_out: f64,
    /// Dimensionless nonlinear strength `ετ_nl`.
    pub eps_tau: f64,
    pub beta_th: f64,
    pub beta: f64,
    /// Signed feedback gain `J₀`.
    pub j0: f64,
    /// Saturation photon number after the strength cap is applied.
    pub n_sat_eff: f64,
    pub sigma_fb: f64,
}

/// Inverts the parametrization for a problem with `Σ_{i≠j}|J_ij| = coupling_abs_sum`.
pub fn derive_params(u: &UserParams, coupling_abs_sum: f64) -> Result<MachineParams> {
    u.validate()?;
    let decay = (-2.0 / u.t_decay).exp();
    let big_r_out = u.eta_esc * (1.0 - decay);
    if big_r_out >= 1.0 {
        return Err(CimError::InfeasibleOutcoupling(big_r_out));
    }
    let big_r_loss = 1.0 - decay / (1.0 - big_r_out);
    let r_loss = (1.0 - (1.0 - big_r_loss).sqrt()).max(0.0).sqrt();
    let r_out = big_r_out.sqrt();

    let (eps_tau, beta_th, n_sat_eff) = if u.mode == Mode::Coherent {
        (0.0, 0.0, u.n_sat)
    } else {
        let raw = 8.0 / (u.n_sat * u.t_decay);
        let (eps_sq, n_sat_eff) = if raw > MAX_EPS_TAU_SQ {
            (MAX_EPS_TAU_SQ, 8.0 / (MAX_EPS_TAU_SQ * u.t_decay))
        } else {
            (raw, u.n_sat)
        };
        let eps_tau = eps_sq.sqrt();
        (eps_tau, SQRT_2 / (eps_tau * u.t_decay), n_sat_eff)
    };
    let j0 = if coupling_abs_sum > 0.0 {
        -u.alpha_fb / (u.t_decay.sqrt() * coupling_abs_sum.sqrt())
    } else {
        0.0
    };
    Ok(MachineParams {
        mode: u.mode,
        t_decay: u.t_decay,
        r_loss,
        r_out,
        eps_tau,
        beta_th,
        beta: u.pump_r * beta_th,
        j0,
        n_sat_eff,
        sigma_fb: u.sigma_fb,
    })
}

impl MachineParams {
    /// Small-signal one-pass crystal gain `e^{βετ/√2}`.
    pub fn crystal_gain(&self) -> f64 {
        (self.beta * self.eps_tau * FRAC_1_SQRT_2).exp()
    }

    /// Mean attenuation from the two facets and the outcoupler, without feedback.
    pub fn attenuation(&self) -> f64 {
        (1.0 - self.r_loss * self.r_loss) * (1.0 - self.r_out * self.r_out).sqrt()
    }

    /// Conversion factor `√(g/κ)` from physical to mean-field amplitudes.
    pub fn mean_field_scale(&self) -> f64 {
        self.eps_tau / (SQRT_2 * self.r_out)
    }

    /// q-displacement injected into a pulse with coupling row `row` given the records `w`.
    ///
    /// The feedback signal `vᵢ = J₀ Σⱼ J_ij wⱼ` enters through a weak injection
    /// beamsplitter, whose `-r` arm makes the net shift `-vᵢ`. With `J₀ < 0` this
    /// pulls the signs towards low `-Σ J_ij σᵢ σⱼ`.
    #[inline]
    pub fn feedback(&self, row: &[f64], w: &[f64]) -> f64 {
        -self.j0 * dot(row, w)
    }
}

/// Eigen-decomposition summary of the linearized q-mean map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// Largest eigenvalue of the one-roundtrip small-signal map.
    pub lambda_max: f64,
    pub above: bool,
}

/// Linearized one-roundtrip map `M = G(1 - r_loss²)[√(1 - r_out²) I - r_out J₀ J]`.
///
/// `M` shares eigenvectors with `J`, so `λ_max` follows from the extreme eigenvalues of `J`.
pub fn linear_threshold(params: &MachineParams, problem: &IsingProblem) -> Threshold {
    let n = problem.n();
    let j = DMatrix::from_fn(n, n, |a, b| problem.j(a, b));
    let eig = SymmetricEigen::new(j).eigenvalues;
    let t_out = (1.0 - params.r_out * params.r_out).sqrt();
    let pre = params.crystal_gain() * (1.0 - params.r_loss * params.r_loss);
    let lambda_max = eig
        .iter()
        .map(|&l| pre * (t_out - params.r_out * params.j0 * l))
        .fold(f64::NEG_INFINITY, f64::max);
    Threshold { lambda_max, above: lambda_max > 1.0 }
}

/// Per-pulse state of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub enum Pulses {
    Gaussian(Vec<GaussianMode>),
    /// Rescaled classical amplitudes `q̃ᵢ`.
    MeanField(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MachineState {
    pub pulses: Pulses,
    /// Roundtrips completed so far.
    pub k: u64,
}

impl MachineState {
    /// Empty cavity: every pulse in vacuum.
    pub fn vacuum(n: usize) -> Self {
        Self { pulses: Pulses::Gaussian(vec![GaussianMode::vacuum(); n]), k: 0 }
    }

    /// Mean-field start `q̃ᵢ = σᵢ·10⁻³` with uniform random signs.
    pub fn mean_field_seeded<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let amps = (0..n)
            .map(|_| if rng.random::<bool>() { MEAN_FIELD_SEED_AMPLITUDE } else { -MEAN_FIELD_SEED_AMPLITUDE })
            .collect();
        Self { pulses: Pulses::MeanField(amps), k: 0 }
    }

    pub fn n(&self) -> usize {
        match &self.pulses {
            Pulses::Gaussian(p) => p.len(),
            Pulses::MeanField(a) => a.len(),
        }
    }

    /// q-means in the units of the active model.
    pub fn q_means(&self) -> Vec<f64> {
        match &self.pulses {
            Pulses::Gaussian(p) => p.iter().map(|m| m.q()).collect(),
            Pulses::MeanField(a) => a.clone(),
        }
    }

    /// q-variances (zero for mean-field amplitudes).
    pub fn q_vars(&self) -> Vec<f64> {
        match &self.pulses {
            Pulses::Gaussian(p) => p.iter().map(|m| m.var_q()).collect(),
            Pulses::MeanField(a) => vec![0.0; a.len()],
        }
    }
}

/// Outcome of a roundtrip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Continue,
    /// A mean exceeded [`OVERFLOW_LIMIT`]; the trajectory should stop.
    Overflow,
}

/// A parametrized machine bound to one problem.
#[derive(Debug, Clone)]
pub struct Machine<'a> {
    pub params: MachineParams,
    pub problem: &'a IsingProblem,
    pub crystal_steps: usize,
}

impl<'a> Machine<'a> {
    pub fn new(params: MachineParams, problem: &'a IsingProblem) -> Self {
        Self { params, problem, crystal_steps: crystal::DEFAULT_STEPS }
    }

    /// Fresh state for the active mode; `rng` is only used for mean-field signs.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> MachineState {
        match self.params.mode {
            Mode::Meanfield => MachineState::mean_field_seeded(self.problem.n(), rng),
            _ => MachineState::vacuum(self.problem.n()),
        }
    }

    /// Advances `state` by one roundtrip, writing the homodyne record into `w`.
    ///
    /// Draws exactly one standard normal per pulse, in pulse order.
    pub fn step<S: NoiseSource + ?Sized>(&self, state: &mut MachineState, noise: &mut S, w: &mut [f64]) -> Result<StepStatus> {
        let n = self.problem.n();
        if state.n() != n || w.len() != n {
            return Err(CimError::SizeMismatch { expected: n, got: state.n().min(w.len()) });
        }
        let status = match &mut state.pulses {
            Pulses::Gaussian(pulses) => self.gaussian_step(pulses, noise, w)?,
            Pulses::MeanField(amps) => self.mean_field_step(amps, noise, w)?,
        };
        state.k += 1;
        Ok(status)
    }

    fn gaussian_step<S: NoiseSource + ?Sized>(&self, pulses: &mut [GaussianMode], noise: &mut S, w: &mut [f64]) -> Result<StepStatus> {
        let p = &self.params;
        let with_crystal = p.mode == Mode::Gaussian && p.eps_tau > 0.0;
        for (pulse, wi) in pulses.iter_mut().zip(w.iter_mut()) {
            let mut a = facet_loss(pulse, p.r_loss)?;
            if with_crystal {
                a = crystal::propagate_reduced(&CrystalState::from_signal(&a, p.beta), p.eps_tau, self.crystal_steps)?
                    .signal();
            }
            a = facet_loss(&a, p.r_loss)?;
            let joint = gaussian::mix_with_vacuum(&a, p.r_out)?;
            let out = gaussian::homodyne_q(&joint, ModeSelector::B, noise.standard_normal())?;
            *pulse = out.conditioned;
            *wi = out.value;
        }
        let mut overflow = false;
        for (i, pulse) in pulses.iter_mut().enumerate() {
            *pulse = gaussian::displace(pulse, Vector2::new(p.feedback(self.problem.row(i), w), 0.0));
            if !(pulse.q().abs() <= OVERFLOW_LIMIT) || !pulse.is_finite() {
                overflow = true;
            }
        }
        if overflow {
            if p.mode == Mode::Coherent {
                return Ok(StepStatus::Overflow);
            }
            return Err(CimError::Divergence("pulse mean left the representable range".into()));
        }
        Ok(StepStatus::Continue)
    }

    fn mean_field_step<S: NoiseSource + ?Sized>(&self, amps: &mut [f64], noise: &mut S, w: &mut [f64]) -> Result<StepStatus> {
        let p = &self.params;
        let t_loss = (1.0 - p.r_loss * p.r_loss).sqrt();
        let t_out = (1.0 - p.r_out * p.r_out).sqrt();
        let scale = p.mean_field_scale();
        // rescaled crystal: dx̃/dσ = u x̃, du/dσ = -x̃²/2 for σ ∈ [0, √2 r_out]
        let span = SQRT_2 * p.r_out;
        let u0 = scale * p.beta * FRAC_1_SQRT_2;
        for (q, wi) in amps.iter_mut().zip(w.iter_mut()) {
            let mut x = *q * t_loss;
            if p.eps_tau > 0.0 {
                let y = rk4([x * FRAC_1_SQRT_2, u0], span, self.crystal_steps, |y| [y[1] * y[0], -0.5 * y[0] * y[0]])
                    .ok_or_else(|| CimError::Divergence("mean-field crystal step".into()))?;
                x = y[0] * SQRT_2;
            }
            x *= t_loss;
            *wi = p.r_out * x;
            *q = x * t_out;
        }
        // noisy record used only for feedback; `w` keeps the clean amplitudes
        let fb: Vec<f64> = w.iter().map(|&wj| wj + p.sigma_fb * noise.standard_normal()).collect();
        for (i, q) in amps.iter_mut().enumerate() {
            *q += p.feedback(self.problem.row(i), &fb);
            if !q.is_finite() {
                return Err(CimError::Divergence("mean-field amplitude left the representable range".into()));
            }
        }
        Ok(StepStatus::Continue)
    }

    /// Functional form of [`Machine::step`] returning the new state and the record.
    pub fn roundtrip<S: NoiseSource + ?Sized>(&self, state: &MachineState, noise: &mut S) -> Result<(MachineState, Vec<f64>, StepStatus)> {
        let mut next = state.clone();
        let mut w = vec![0.0; self.problem.n()];
        let status = self.step(&mut next, noise, &mut w)?;
        Ok((next, w, status))
    }
}

/// Beamsplitter with vacuum followed by tracing out the environment.
fn facet_loss(a: &GaussianMode, r: f64) -> Result<GaussianMode> {
    Ok(gaussian::partial_trace(&gaussian::mix_with_vacuum(a, r)?, ModeSelector::A))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::generate_sk1;
    use crate::noise::{Negated, Silent, StreamNoise};
    use approx::assert_relative_eq;

    fn user(t_decay: f64, eta_esc: f64, n_sat: f64, pump_r: f64, alpha_fb: f64) -> UserParams {
        UserParams { t_decay, eta_esc, n_sat, pump_r, alpha_fb, mode: Mode::Gaussian, sigma_fb: 0.0, jitter: None }
    }

    #[test]
    fn derived_parameter_values() {
        let m = derive_params(&user(4.0, 0.5, 200.0, 0.8, 0.0), 1.0).unwrap();
        // independent closed forms
        let decay = (-0.5f64).exp();
        let big_r_out = 0.5 * (1.0 - decay);
        let big_r_loss = 1.0 - decay / (1.0 - big_r_out);
        assert_relative_eq!(m.r_out * m.r_out, big_r_out, epsilon = 1e-14);
        assert_relative_eq!(big_r_out, 0.19673, epsilon = 1e-5);
        assert_relative_eq!(big_r_loss, 0.24492, epsilon = 1e-5);
        let rl2 = m.r_loss * m.r_loss;
        assert_relative_eq!(1.0 - (1.0 - rl2).powi(2), big_r_loss, epsilon = 1e-14);
        assert_relative_eq!(rl2, 0.13105, epsilon = 1e-4);
        assert_relative_eq!(m.eps_tau, 0.1, epsilon = 1e-14);
        assert_relative_eq!(m.beta_th, 3.53553, epsilon = 1e-5);
        assert_relative_eq!(m.beta, 2.82843, epsilon = 1e-5);
        assert_eq!(m.n_sat_eff, 200.0);

        let m = derive_params(&user(4.0, 0.5, 800.0, 0.8, 0.0), 1.0).unwrap();
        assert_relative_eq!(m.eps_tau, 0.05, epsilon = 1e-14);

        let m = derive_params(&user(1.0, 0.5, 200.0, 0.8, 0.0), 1.0).unwrap();
        assert_relative_eq!(m.eps_tau, 0.1, epsilon = 1e-14);
        assert_relative_eq!(m.beta_th, 10.0 * SQRT_2, epsilon = 1e-12);
        assert_relative_eq!(m.n_sat_eff, 800.0, epsilon = 1e-12);

        assert_eq!(derive_params(&user(4.0, 0.5, 200.0, 0.0, 0.0), 1.0).unwrap().beta, 0.0);
    }

    #[test]
    fn feedback_gain_sign_and_scale() {
        let m = derive_params(&user(4.0, 0.2, 200.0, 0.8, 5.0), 240.0).unwrap();
        assert_relative_eq!(m.j0, -5.0 / (2.0 * 240f64.sqrt()), epsilon = 1e-14);
        let m = derive_params(&user(4.0, 0.2, 200.0, 0.8, -1.0), 240.0).unwrap();
        assert!(m.j0 > 0.0);
    }

    #[test]
    fn validation() {
        assert!(derive_params(&user(0.0, 0.5, 200.0, 0.8, 5.0), 1.0).is_err());
        assert!(derive_params(&user(4.0, 0.0, 200.0, 0.8, 5.0), 1.0).is_err());
        assert!(derive_params(&user(4.0, 1.5, 200.0, 0.8, 5.0), 1.0).is_err());
        assert!(derive_params(&user(4.0, 0.5, -1.0, 0.8, 5.0), 1.0).is_err());
        assert!("quantum".parse::<Mode>().is_err());
        assert_eq!("coherent-state".parse::<Mode>().unwrap(), Mode::Coherent);
        let json = r#"{"t_decay":4,"eta_esc":0.2,"pump_r":0.8,"n_sat":200,"alpha_fb":5,"mode":"mean-field"}"#;
        let u: UserParams = serde_json::from_str(json).unwrap();
        assert_eq!(u.mode, Mode::Meanfield);
        assert!(serde_json::from_str::<UserParams>(&json.replace("mean-field", "bogus")).is_err());
    }

    #[test]
    fn jitter_clamps() {
        let mut rng = StreamNoise::setup(1, 0);
        let mut u = UserParams::table_negative_pump();
        u.jitter = Some(Jitter { alpha_fb: 100.0, pump_r: 100.0 });
        for _ in 0..200 {
            let j = u.jittered(rng.rng());
            assert!(j.alpha_fb > 0.0 && j.pump_r.abs() < 2.0);
            assert!(j.jitter.is_none());
        }
        let plain = UserParams::fig4();
        assert_eq!(plain.jittered(rng.rng()), plain);
    }

    #[test]
    fn threshold_exact_at_unit_pump() {
        let p = generate_sk1(8, 1).unwrap();
        for t in [4.0, 16.0, 64.0] {
            let m = derive_params(&user(t, 0.5, 200.0, 1.0, 0.0), p.coupling_abs_sum()).unwrap();
            assert_relative_eq!(linear_threshold(&m, &p).lambda_max, 1.0, epsilon = 1e-12);
            assert_relative_eq!(m.crystal_gain() * m.attenuation(), 1.0, epsilon = 1e-12);
        }
        let m = derive_params(&user(4.0, 0.5, 200.0, 0.5, 0.0), p.coupling_abs_sum()).unwrap();
        assert!(!linear_threshold(&m, &p).above);
        let m = derive_params(&UserParams::fig4(), p.coupling_abs_sum()).unwrap();
        assert!(linear_threshold(&m, &p).above);
    }

    #[test]
    fn vacuum_is_stationary_without_pump_or_feedback() {
        let p = generate_sk1(4, 2).unwrap();
        let m = derive_params(&user(4.0, 0.5, 200.0, 0.0, 0.0), p.coupling_abs_sum()).unwrap();
        let machine = Machine::new(m, &p);
        let mut state = MachineState::vacuum(4);
        let mut noise = StreamNoise::trajectory(3, 0);
        let mut w = vec![0.0; 4];
        let mut sum = 0.0;
        let mut sq = 0.0;
        let rounds = 5000;
        for _ in 0..rounds {
            machine.step(&mut state, &mut noise, &mut w).unwrap();
            for (pulse, &wi) in state.q_means().iter().zip(&w) {
                assert!(pulse.abs() < 1e-12);
                sum += wi;
                sq += wi * wi;
            }
        }
        if let Pulses::Gaussian(ps) = &state.pulses {
            for pulse in ps {
                assert_relative_eq!(pulse.var_q(), 0.5, epsilon = 1e-12);
                assert_relative_eq!(pulse.var_p(), 0.5, epsilon = 1e-12);
            }
        }
        let count = (rounds * 4) as f64;
        let mean = sum / count;
        let var = sq / count - mean * mean;
        assert!(mean.abs() < 5.0 * (0.5 / count).sqrt());
        assert!((var - 0.5).abs() < 0.03);
    }

    #[test]
    fn negated_noise_negates_trajectory() {
        let p = generate_sk1(6, 4).unwrap();
        let m = derive_params(&UserParams::fig4(), p.coupling_abs_sum()).unwrap();
        let machine = Machine::new(m, &p);
        let mut a = MachineState::vacuum(6);
        let mut b = MachineState::vacuum(6);
        let mut na = StreamNoise::trajectory(8, 1);
        let mut nb = Negated(StreamNoise::trajectory(8, 1));
        let (mut wa, mut wb) = (vec![0.0; 6], vec![0.0; 6]);
        for _ in 0..200 {
            machine.step(&mut a, &mut na, &mut wa).unwrap();
            machine.step(&mut b, &mut nb, &mut wb).unwrap();
            for i in 0..6 {
                assert_eq!(wa[i], -wb[i]);
            }
            for (x, y) in a.q_means().iter().zip(b.q_means()) {
                assert_eq!(*x, -y);
            }
            assert_eq!(a.q_vars(), b.q_vars());
        }
    }

    #[test]
    fn small_signal_balance_at_threshold() {
        let p = IsingProblem::new(1, vec![]).unwrap();
        for t in [4.0, 16.0, 64.0] {
            let m = derive_params(&user(t, 0.5, 200.0, 1.0, 0.0), 0.0).unwrap();
            let machine = Machine::new(m, &p);
            let state = MachineState { pulses: Pulses::Gaussian(vec![GaussianMode::coherent(1e-6, 0.0)]), k: 0 };
            let (next, _, _) = machine.roundtrip(&state, &mut Silent).unwrap();
            let ratio = next.q_means()[0] / 1e-6;
            assert!((ratio - 1.0).abs() <= 1e-3, "T = {t}: ratio {ratio}");
        }
    }

    #[test]
    fn coherent_mode_linear_dynamics() {
        let p = generate_sk1(4, 5).unwrap();
        let mut u = user(4.0, 0.5, 200.0, 0.8, 0.0);
        u.mode = Mode::Coherent;
        let m = derive_params(&u, p.coupling_abs_sum()).unwrap();
        assert_eq!(m.eps_tau, 0.0);
        let machine = Machine::new(m, &p);
        // two different mean initializations reach the same covariance
        let mut a = MachineState {
            pulses: Pulses::Gaussian(vec![GaussianMode::coherent(3.0, 0.0); 4]),
            k: 0,
        };
        let mut b = MachineState::vacuum(4);
        let mut w = vec![0.0; 4];
        for _ in 0..200 {
            machine.step(&mut a, &mut StreamNoise::new(1, 0), &mut w).unwrap();
            machine.step(&mut b, &mut StreamNoise::new(2, 0), &mut w).unwrap();
        }
        assert_eq!(a.q_vars(), b.q_vars());
        assert!(a.q_means().iter().all(|q| q.abs() < 10.0));

        // strong feedback drives the linear system above threshold
        let mut u = UserParams::table_no_nonlinearity();
        u.jitter = None;
        u.alpha_fb = 200.0;
        let m = derive_params(&u, p.coupling_abs_sum()).unwrap();
        assert!(linear_threshold(&m, &p).above);
        let machine = Machine::new(m, &p);
        let mut s = MachineState::vacuum(4);
        let mut noise = StreamNoise::new(3, 0);
        let mut norms = Vec::new();
        let mut status = StepStatus::Continue;
        for _ in 0..2000 {
            status = machine.step(&mut s, &mut noise, &mut w).unwrap();
            norms.push(s.q_means().iter().map(|q| q * q).sum::<f64>().sqrt());
            if status == StepStatus::Overflow {
                break;
            }
        }
        assert_eq!(status, StepStatus::Overflow);
        let k = norms.len();
        assert!(norms[k - 2] > 10.0 * norms[k - 40]);
    }

    #[test]
    fn mean_field_fixed_point() {
        let p = IsingProblem::new(2, vec![(0, 1, 1.0)]).unwrap();
        let mut u = user(64.0, 0.5, 200.0, 2.0, 0.0);
        u.mode = Mode::Meanfield;
        let m = derive_params(&u, p.coupling_abs_sum()).unwrap();
        let machine = Machine::new(m, &p);
        let mut s = MachineState { pulses: Pulses::MeanField(vec![1e-3, -1e-3]), k: 0 };
        let mut w = vec![0.0; 2];
        for _ in 0..64 * 60 {
            machine.step(&mut s, &mut Silent, &mut w).unwrap();
        }
        // 2(p - κ - γ)/κ with the high-finesse rates p = 2, κ = η, γ = 1 - η
        let target = 2.0 * (2.0 - 1.0) / 0.5;
        for q in s.q_means() {
            assert!((q * q / target - 1.0).abs() < 0.01, "q̃² = {}", q * q);
        }
        let again = {
            let mut s2 = MachineState { pulses: Pulses::MeanField(vec![1e-3, -1e-3]), k: 0 };
            for _ in 0..64 * 60 {
                machine.step(&mut s2, &mut StreamNoise::new(0, 0), &mut w).unwrap();
            }
            s2
        };
        assert_eq!(again.q_means(), s.q_means());
    }
}
