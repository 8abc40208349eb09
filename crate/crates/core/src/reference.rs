//! Continuous-time reference models for high-finesse validation.
//!
//! The Gaussian SDE is integrated with Euler–Maruyama in the Itô sense. Time
//! is measured in whatever unit the rates are expressed in; [`ContTimeParams::high_finesse`]
//! uses decay times, so one discrete roundtrip corresponds to `1/T_decay`.

use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};
use crate::ising::IsingProblem;
use crate::machine::{derive_params, Machine, MachineParams, MachineState, Mode, UserParams};
use crate::noise::{NoiseSource, Replay, StreamNoise};

/// Fine integration step in decay times.
pub const FINE_DT: f64 = 1.0 / 256.0;

/// Rates of the continuous-time model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContTimeParams {
    /// Intrinsic loss rate.
    pub gamma: f64,
    /// Outcoupling rate.
    pub kappa: f64,
    /// Pump rate.
    pub p: f64,
    /// Nonlinear rate.
    pub g: f64,
    /// Feedback coupling rate `-J₀ r_out/Δt`, positive when the feedback lowers the Ising energy.
    pub lambda: f64,
    /// Integration step.
    pub dt: f64,
}

impl ContTimeParams {
    /// Rates for a roundtrip of duration `dt_roundtrip`; the integration step is set to it too.
    pub fn from_discrete(m: &MachineParams, dt_roundtrip: f64) -> Self {
        Self {
            gamma: m.r_loss * m.r_loss / dt_roundtrip,
            kappa: m.r_out * m.r_out / (2.0 * dt_roundtrip),
            p: m.beta * m.eps_tau / (std::f64::consts::SQRT_2 * dt_roundtrip),
            g: m.eps_tau * m.eps_tau / (4.0 * dt_roundtrip),
            lambda: -m.j0 * m.r_out / dt_roundtrip,
            dt: dt_roundtrip,
        }
    }

    /// `T_decay → ∞` limit of [`ContTimeParams::from_discrete`] in decay-time units.
    pub fn high_finesse(u: &UserParams, coupling_abs_sum: f64, dt: f64) -> Self {
        let lambda = if coupling_abs_sum > 0.0 {
            u.alpha_fb * (2.0 * u.eta_esc).sqrt() / coupling_abs_sum.sqrt()
        } else {
            0.0
        };
        Self {
            gamma: 1.0 - u.eta_esc,
            kappa: u.eta_esc,
            p: u.pump_r,
            g: 2.0 / u.n_sat,
            lambda,
            dt,
        }
    }

    /// True when the Gaussian closure is questionable (`g` not small against `κ + γ`).
    pub fn gaussian_validity_warning(&self) -> bool {
        self.g > 0.1 * (self.kappa + self.gamma)
    }

    /// Deterministic fixed point `⟨q⟩² = 2(p - κ - γ)/g` of an uncoupled pulse, if it exists.
    pub fn fixed_point_sq(&self) -> Option<f64> {
        let net = self.p - self.kappa - self.gamma;
        (net > 0.0 && self.g > 0.0).then(|| 2.0 * net / self.g)
    }
}

/// Which moment equations to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdeVariant {
    /// Keeps only the g-terms that can grow with the mean amplitude.
    Simplified,
    /// Retains every g-scaled term and tracks the p-variance.
    Exact,
}

/// Moments of all pulses at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeSample {
    pub t: f64,
    pub q: Vec<f64>,
    pub var_q: Vec<f64>,
}

/// Euler–Maruyama state of the continuous-time Gaussian model.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeState {
    pub q: Vec<f64>,
    pub var_q: Vec<f64>,
    pub var_p: Vec<f64>,
}

impl SdeState {
    pub fn vacuum(n: usize) -> Self {
        Self { q: vec![0.0; n], var_q: vec![0.5; n], var_p: vec![0.5; n] }
    }
}

/// One Euler–Maruyama step; `z` holds the `N(0, 1)` increments for each pulse.
pub fn sde_step(state: &mut SdeState, problem: &IsingProblem, c: &ContTimeParams, variant: SdeVariant, z: &[f64]) -> Result<()> {
    let n = problem.n();
    let dt = c.dt;
    let sdt = dt.sqrt();
    let net = c.p - c.kappa - c.gamma;
    let fb_noise = if c.kappa > 0.0 { c.lambda / (2.0 * c.kappa.sqrt()) } else { 0.0 };
    let mut dq = vec![0.0; n];
    for (i, d) in dq.iter_mut().enumerate() {
        let row = problem.row(i);
        let q = state.q[i];
        let v = state.var_q[i];
        let coupled: f64 = row.iter().zip(&state.q).map(|(j, x)| j * x).sum();
        let noise_sum: f64 = row.iter().zip(z).map(|(j, x)| j * x).sum();
        let mut drift = net * q - 0.5 * c.g * q * q * q + c.lambda * coupled;
        if variant == SdeVariant::Exact {
            drift -= 0.5 * c.g * q * (3.0 * v + state.var_p[i] - 2.0);
        }
        *d = drift * dt + (2.0 * c.kappa.sqrt() * (v - 0.5) * z[i] + fb_noise * noise_sum) * sdt;
    }
    for i in 0..n {
        let q = state.q[i];
        let v = state.var_q[i];
        let vp = state.var_p[i];
        let q2 = q * q;
        let (dv, dvp) = match variant {
            SdeVariant::Simplified => (
                2.0 * c.p * v - 2.0 * (c.gamma + c.kappa) * (v - 0.5)
                    - 4.0 * c.kappa * (v - 0.5).powi(2)
                    - 2.0 * c.g * q2 * (1.5 * v - 0.5),
                0.0,
            ),
            SdeVariant::Exact => {
                let dv = 2.0 * net * v - 4.0 * c.kappa * (v - 0.5).powi(2) + c.kappa + c.gamma
                    - 3.0 * c.g * q2 * v
                    + c.g * q2
                    - c.g * (3.0 * v * (v + vp / 3.0 - 1.0) - vp + 1.0);
                // two-photon loss on p with n = (Vq+Vp-1)/2 and m = (Vq-Vp)/2; no backaction on p
                let nn = 0.5 * (v + vp - 1.0);
                let mm = 0.5 * (v - vp);
                let dvp = -2.0 * c.p * vp - 2.0 * (c.kappa + c.gamma) * (vp - 0.5)
                    + c.g * (q2 * (1.0 - vp) - 4.0 * nn * nn - 2.0 * mm * mm + 6.0 * nn * mm + mm);
                (dv, dvp)
            }
        };
        state.q[i] = q + dq[i];
        state.var_q[i] = v + dv * dt;
        state.var_p[i] = vp + dvp * dt;
        if !state.q[i].is_finite() || !(state.var_q[i] > 0.0) || !(state.var_p[i] > 0.0) {
            return Err(CimError::Divergence(format!(
                "continuous-time pulse {i}: q = {}, var_q = {}, var_p = {}",
                state.q[i], state.var_q[i], state.var_p[i]
            )));
        }
    }
    Ok(())
}

/// Integrates from vacuum for `steps` steps, sampling every `sample_every` steps (and at t = 0).
pub fn integrate_gaussian_sde<S: NoiseSource + ?Sized>(
    problem: &IsingProblem,
    c: &ContTimeParams,
    steps: usize,
    sample_every: usize,
    noise: &mut S,
    variant: SdeVariant,
) -> Result<Vec<SdeSample>> {
    let n = problem.n();
    let every = sample_every.max(1);
    let mut state = SdeState::vacuum(n);
    let mut z = vec![0.0; n];
    let mut out = vec![SdeSample { t: 0.0, q: state.q.clone(), var_q: state.var_q.clone() }];
    for s in 1..=steps {
        z.iter_mut().for_each(|x| *x = noise.standard_normal());
        sde_step(&mut state, problem, c, variant, &z)?;
        if s % every == 0 {
            out.push(SdeSample { t: s as f64 * c.dt, q: state.q.clone(), var_q: state.var_q.clone() });
        }
    }
    Ok(out)
}

/// Forward-Euler integration of the noiseless mean-field limit
/// `dq̃/dt = (p - κ - γ)q̃ - (κ/2)q̃³ + λ Σ_j J_ij q̃_j`.
pub fn integrate_mean_field_ode(problem: &IsingProblem, c: &ContTimeParams, q0: &[f64], steps: usize) -> Result<Vec<f64>> {
    let net = c.p - c.kappa - c.gamma;
    let mut q = q0.to_vec();
    let mut next = q.clone();
    for _ in 0..steps {
        for (i, nx) in next.iter_mut().enumerate() {
            let coupled: f64 = problem.row(i).iter().zip(&q).map(|(j, x)| j * x).sum();
            *nx = q[i] + c.dt * (net * q[i] - 0.5 * c.kappa * q[i].powi(3) + c.lambda * coupled);
        }
        std::mem::swap(&mut q, &mut next);
        if q.iter().any(|x| !x.is_finite()) {
            return Err(CimError::Divergence("mean-field ODE".into()));
        }
    }
    Ok(q)
}

/// `V(q) = -Σ_i [(p-κ-γ)q_i²/2 - g q_i⁴/8 + (λ/2) Σ_j J_ij q_i q_j]`.
pub fn landscape_potential(q: &[f64], c: &ContTimeParams, problem: &IsingProblem) -> Result<f64> {
    if q.len() != problem.n() {
        return Err(CimError::SizeMismatch { expected: problem.n(), got: q.len() });
    }
    let net = c.p - c.kappa - c.gamma;
    let mut v = 0.0;
    for (i, &qi) in q.iter().enumerate() {
        let coupled: f64 = problem.row(i).iter().zip(q).map(|(j, x)| j * x).sum();
        v -= 0.5 * net * qi * qi - 0.125 * c.g * qi.powi(4) + 0.5 * c.lambda * qi * coupled;
    }
    Ok(v)
}

/// RMS deviation of one finesse from the continuous-time reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub t_decay: f64,
    pub rms: f64,
}

/// Runs discrete trajectories at each finesse and the continuous reference on one noise path.
///
/// The path has `FINE_DT` resolution over `horizon` decay times. A discrete roundtrip at
/// `T_decay` spans `m = 256/T_decay` fine steps, and its draw is the normalized sum
/// `(1/√m) Σ z` of those steps. Deviations of ⟨qᵢ⟩ are compared at every roundtrip
/// boundary over the common horizon. `base` supplies everything except `t_decay`.
pub fn convergence_compare(
    problem: &IsingProblem,
    base: &UserParams,
    t_decays: &[f64],
    seed: u64,
    horizon: f64,
    silent: bool,
) -> Result<Vec<ConvergencePoint>> {
    let n = problem.n();
    let fine_per_unit = (1.0 / FINE_DT).round() as usize;
    let total = (horizon * fine_per_unit as f64).round() as usize;
    let path: Vec<f64> = if silent {
        vec![0.0; total * n]
    } else {
        let mut s = StreamNoise::new(seed, 0);
        (0..total * n).map(|_| s.standard_normal()).collect()
    };

    let reference_params = ContTimeParams::high_finesse(base, problem.coupling_abs_sum(), FINE_DT);
    let mut reference = SdeState::vacuum(n);
    let mut ref_q = Vec::with_capacity(total + 1);
    ref_q.push(reference.q.clone());
    for s in 0..total {
        sde_step(&mut reference, problem, &reference_params, SdeVariant::Simplified, &path[s * n..(s + 1) * n])?;
        ref_q.push(reference.q.clone());
    }

    let mut out = Vec::with_capacity(t_decays.len());
    for &t in t_decays {
        let m_exact = fine_per_unit as f64 / t;
        let m = m_exact.round() as usize;
        if m == 0 || (m as f64 - m_exact).abs() > 1e-9 {
            return Err(CimError::Domain(format!("T_decay = {t} must divide {fine_per_unit}")));
        }
        let u = UserParams { t_decay: t, mode: Mode::Gaussian, jitter: None, ..*base };
        let params = derive_params(&u, problem.coupling_abs_sum())?;
        let machine = Machine::new(params, problem);
        let rounds = total / m;
        let norm = 1.0 / (m as f64).sqrt();
        let mut draws = Vec::with_capacity(rounds * n);
        for k in 0..rounds {
            for i in 0..n {
                let sum: f64 = (0..m).map(|s| path[(k * m + s) * n + i]).sum();
                draws.push(sum * norm);
            }
        }
        let mut noise = Replay::new(draws);
        let mut state = MachineState::vacuum(n);
        let mut w = vec![0.0; n];
        let mut sq = 0.0;
        for k in 1..=rounds {
            machine.step(&mut state, &mut noise, &mut w)?;
            let r = &ref_q[k * m];
            sq += state.q_means().iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        out.push(ConvergencePoint { t_decay: t, rms: (sq / (rounds * n) as f64).sqrt() });
    }
    Ok(out)
}
