//! Signal–pump propagation through the χ⁽²⁾ crystal as Gaussian-moment ODEs.
//!
//! Integration runs in scaled quadratures `x = q/√2`, `y = p/√2` where the
//! vacuum variance is 1/4. The only parameter is the dimensionless strength
//! `ετ_nl`; the pump enters through its initial q-displacement `β`.
//!
//! Two systems are provided. [`propagate_reduced`] is the 8-variable system
//! valid when y-means and x–y correlations vanish; it is the production path.
//! [`propagate_full`] closes the Heisenberg equations over all 4 means and the
//! full 4x4 covariance and is used to check the reduced system.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{CimError, Result};
use crate::gaussian::{GaussianMode, JointGaussianState};
use crate::integrate::rk4;

/// RK4 steps used by the roundtrip pipeline.
pub const DEFAULT_STEPS: usize = 16;

/// Upper bound on `ετ_nl` accepted by the parametrization.
pub const MAX_STRENGTH: f64 = 0.1;

/// Reduced signal–pump moments, all in x/y units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalState {
    pub mx_s: f64,
    pub mx_b: f64,
    pub vxx_s: f64,
    pub vyy_s: f64,
    pub vxx_b: f64,
    pub vyy_b: f64,
    /// `Cov(x_b, x_s)`
    pub cxx: f64,
    /// `Cov(y_b, y_s)`
    pub cyy: f64,
}

impl CrystalState {
    /// Crystal input for a signal pulse and a fresh coherent pump with q-mean `beta`.
    ///
    /// Only the q-mean and the diagonal of the signal covariance are read; the
    /// reduced system assumes the rest vanish.
    pub fn from_signal(signal: &GaussianMode, beta: f64) -> Self {
        Self {
            mx_s: signal.q() / std::f64::consts::SQRT_2,
            mx_b: beta / std::f64::consts::SQRT_2,
            vxx_s: 0.5 * signal.var_q(),
            vyy_s: 0.5 * signal.var_p(),
            vxx_b: 0.25,
            vyy_b: 0.25,
            cxx: 0.0,
            cyy: 0.0,
        }
    }

    /// Signal marginal in q/p units (pump traced out).
    pub fn signal(&self) -> GaussianMode {
        GaussianMode {
            mean: Vector2::new(std::f64::consts::SQRT_2 * self.mx_s, 0.0),
            cov: Matrix2::new(2.0 * self.vxx_s, 0.0, 0.0, 2.0 * self.vyy_s),
        }
    }

    /// Manley–Rowe quantity `<n_b> + <n_s>/2`.
    pub fn manley_rowe(&self) -> f64 {
        let n_s = self.mx_s * self.mx_s + self.vxx_s + self.vyy_s - 0.5;
        let n_b = self.mx_b * self.mx_b + self.vxx_b + self.vyy_b - 0.5;
        n_b + 0.5 * n_s
    }

    fn to_array(self) -> [f64; 8] {
        [self.mx_s, self.mx_b, self.vxx_s, self.vyy_s, self.vxx_b, self.vyy_b, self.cxx, self.cyy]
    }

    fn from_array(a: [f64; 8]) -> Self {
        Self {
            mx_s: a[0],
            mx_b: a[1],
            vxx_s: a[2],
            vyy_s: a[3],
            vxx_b: a[4],
            vyy_b: a[5],
            cxx: a[6],
            cyy: a[7],
        }
    }
}

fn reduced_rhs(y: &[f64; 8]) -> [f64; 8] {
    let [mx, mb, vxs, vys, vxb, vyb, cxx, cyy] = *y;
    [
        mb * mx + cxx + cyy,
        -0.5 * mx * mx - 0.5 * (vxs - vys),
        2.0 * mb * vxs + 2.0 * mx * cxx,
        -2.0 * mb * vys + 2.0 * mx * cyy,
        -2.0 * mx * cxx,
        -2.0 * mx * cyy,
        mx * (vxb - vxs) + mb * cxx,
        mx * (vyb - vys) - mb * cyy,
    ]
}

fn check_args(strength: f64, steps: usize) -> Result<()> {
    if !(strength >= 0.0) || !strength.is_finite() {
        return Err(CimError::Domain(format!("crystal strength {strength} must be >= 0")));
    }
    if steps == 0 {
        return Err(CimError::Domain("crystal steps must be >= 1".into()));
    }
    Ok(())
}

/// Integrates the reduced moment equations over `ετ ∈ [0, strength]`.
pub fn propagate_reduced(input: &CrystalState, strength: f64, steps: usize) -> Result<CrystalState> {
    check_args(strength, steps)?;
    if strength == 0.0 {
        return Ok(*input);
    }
    rk4(input.to_array(), strength, steps, reduced_rhs)
        .map(CrystalState::from_array)
        .ok_or_else(|| CimError::Divergence(format!("reduced crystal EOMs at strength {strength}")))
}

/// All first and second moments of the signal–pump pair, ordered `(x_s, y_s, x_b, y_b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullCrystalState {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl FullCrystalState {
    /// Input for arbitrary (possibly y-displaced) signal and pump modes, in q/p units.
    pub fn from_modes(signal: &GaussianMode, pump: &GaussianMode) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut cov = Matrix4::zeros();
        cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&(signal.cov * 0.5));
        cov.fixed_view_mut::<2, 2>(2, 2).copy_from(&(pump.cov * 0.5));
        Self {
            mean: Vector4::new(signal.mean[0] * s, signal.mean[1] * s, pump.mean[0] * s, pump.mean[1] * s),
            cov,
        }
    }

    pub fn from_reduced(r: &CrystalState) -> Self {
        #[rustfmt::skip]
        let cov = Matrix4::new(
            r.vxx_s, 0.0,     r.cxx,   0.0,
            0.0,     r.vyy_s, 0.0,     r.cyy,
            r.cxx,   0.0,     r.vxx_b, 0.0,
            0.0,     r.cyy,   0.0,     r.vyy_b,
        );
        Self { mean: Vector4::new(r.mx_s, 0.0, r.mx_b, 0.0), cov }
    }

    /// Projects onto the reduced variables, dropping the y-sector moments.
    pub fn to_reduced(&self) -> CrystalState {
        CrystalState {
            mx_s: self.mean[0],
            mx_b: self.mean[2],
            vxx_s: self.cov[(0, 0)],
            vyy_s: self.cov[(1, 1)],
            vxx_b: self.cov[(2, 2)],
            vyy_b: self.cov[(3, 3)],
            cxx: self.cov[(0, 2)],
            cyy: self.cov[(1, 3)],
        }
    }

    /// Largest magnitude among the moments that vanish on the reduced manifold.
    pub fn off_manifold(&self) -> f64 {
        let c = &self.cov;
        [self.mean[1], self.mean[3], c[(0, 1)], c[(2, 3)], c[(0, 3)], c[(1, 2)]]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Joint signal (mode a) and pump (mode b) state in q/p units.
    pub fn joint(&self) -> JointGaussianState {
        JointGaussianState::from_moments(&(self.mean * std::f64::consts::SQRT_2), &(self.cov * 2.0))
    }

    pub fn manley_rowe(&self) -> f64 {
        let m = &self.mean;
        let c = &self.cov;
        let n_s = m[0] * m[0] + m[1] * m[1] + c[(0, 0)] + c[(1, 1)] - 0.5;
        let n_b = m[2] * m[2] + m[3] * m[3] + c[(2, 2)] + c[(3, 3)] - 0.5;
        n_b + 0.5 * n_s
    }

    fn to_array(self) -> [f64; 14] {
        let m = self.mean;
        let c = self.cov;
        let mut a = [0.0; 14];
        a[..4].copy_from_slice(m.as_slice());
        let mut k = 4;
        for i in 0..4 {
            for j in i..4 {
                a[k] = c[(i, j)];
                k += 1;
            }
        }
        a
    }

    fn from_array(a: &[f64; 14]) -> Self {
        let mean = Vector4::new(a[0], a[1], a[2], a[3]);
        let mut cov = Matrix4::zeros();
        let mut k = 4;
        for i in 0..4 {
            for j in i..4 {
                cov[(i, j)] = a[k];
                cov[(j, i)] = a[k];
                k += 1;
            }
        }
        Self { mean, cov }
    }
}

/// Gaussian closure of `dx_s = x_b x_s + y_b y_s`, `dy_s = y_b x_s - x_b y_s`,
/// `dx_b = -(x_s² - y_s²)/2`, `dy_b = -x_s y_s`.
///
/// For a quadratic flow `f`, zero third cumulants give
/// `dμ = f(μ) + ½ tr(∇²f C)` and `dC = J C + C Jᵀ` with `J = ∇f(μ)`.
fn full_rhs(a: &[f64; 14]) -> [f64; 14] {
    let s = FullCrystalState::from_array(a);
    let [xs, ys, xb, yb] = [s.mean[0], s.mean[1], s.mean[2], s.mean[3]];
    let c = &s.cov;
    let dmean = Vector4::new(
        xb * xs + yb * ys + c[(0, 2)] + c[(1, 3)],
        yb * xs - xb * ys + c[(0, 3)] - c[(1, 2)],
        -0.5 * (xs * xs - ys * ys) - 0.5 * (c[(0, 0)] - c[(1, 1)]),
        -xs * ys - c[(0, 1)],
    );
    #[rustfmt::skip]
    let jac = Matrix4::new(
        xb,  yb,  xs,  ys,
        yb, -xb, -ys,  xs,
        -xs, ys,  0.0, 0.0,
        -ys, -xs, 0.0, 0.0,
    );
    let jc = jac * c;
    let dcov = jc + jc.transpose();
    FullCrystalState { mean: dmean, cov: dcov }.to_array()
}

/// Integrates the full 14-moment system over `ετ ∈ [0, strength]`.
pub fn propagate_full(input: &FullCrystalState, strength: f64, steps: usize) -> Result<FullCrystalState> {
    check_args(strength, steps)?;
    if strength == 0.0 {
        return Ok(*input);
    }
    rk4(input.to_array(), strength, steps, full_rhs)
        .map(|a| FullCrystalState::from_array(&a))
        .ok_or_else(|| CimError::Divergence(format!("full crystal EOMs at strength {strength}")))
}

/// First-order Picard map of the crystal for the signal q-mean and q-variance.
///
/// Inputs and outputs are in q/p units. Valid for `strength² ≪ 1`.
pub fn picard_map(mean_q: f64, var_q: f64, var_p: f64, beta: f64, strength: f64) -> (f64, f64) {
    let s = strength;
    let s2 = s * s;
    let g = beta * s / std::f64::consts::SQRT_2;
    let mean = mean_q + g * mean_q
        - s2 / 8.0 * mean_q.powi(3)
        - s2 / 8.0 * mean_q * (3.0 * var_q + var_p - 2.0);
    let var = var_q + 2.0 * g * var_q - 0.75 * s2 * mean_q * mean_q * var_q + 0.25 * s2 * mean_q * mean_q
        - 0.25 * s2 * var_q * (var_q - var_p);
    (mean, var)
}

/// Crystal step on a signal pulse with a fresh coherent pump `(beta, 0)`; pump traced out.
pub fn propagate_signal(signal: &GaussianMode, beta: f64, strength: f64, steps: usize) -> Result<GaussianMode> {
    let out = propagate_reduced(&CrystalState::from_signal(signal, beta), strength, steps)?;
    Ok(out.signal())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const BETA: f64 = 2.0 * std::f64::consts::SQRT_2;

    fn vacuum_signal(q: f64) -> CrystalState {
        CrystalState::from_signal(&GaussianMode::coherent(q, 0.0), BETA)
    }

    #[test]
    fn zero_strength_is_identity() {
        let s = vacuum_signal(0.7);
        assert_eq!(propagate_reduced(&s, 0.0, 16).unwrap(), s);
        let f = FullCrystalState::from_reduced(&s);
        assert_eq!(propagate_full(&f, 0.0, 16).unwrap(), f);
    }

    #[test]
    fn rejects_bad_arguments() {
        let s = vacuum_signal(0.0);
        assert!(propagate_reduced(&s, -0.1, 16).is_err());
        assert!(propagate_reduced(&s, 0.1, 0).is_err());
    }

    #[test]
    fn undepleted_pump_gain() {
        let mut s = vacuum_signal(1e-6);
        assert_relative_eq!(s.mx_b, 2.0, epsilon = 1e-12);
        let out = propagate_reduced(&s, 0.1, 64).unwrap();
        assert_relative_eq!(out.mx_s / s.mx_s, 0.2f64.exp(), max_relative = 1e-3);
        assert_relative_eq!(out.vxx_s, 0.25 * 0.4f64.exp(), max_relative = 1e-3);

        // with depletion switched off by hand the gain is exactly exponential
        s.mx_s = 1.0;
        let frozen = rk4(s.to_array(), 0.1, 64, |y| {
            let mut d = reduced_rhs(y);
            d[1] = 0.0;
            d[4] = 0.0;
            d[5] = 0.0;
            d[6] = 0.0;
            d[7] = 0.0;
            d[0] = y[1] * y[0];
            d[2] = 2.0 * y[1] * y[2];
            d[3] = -2.0 * y[1] * y[3];
            d
        })
        .unwrap();
        assert_relative_eq!(frozen[0], 0.2f64.exp(), max_relative = 1e-10);
        assert_relative_eq!(frozen[2], 0.25 * 0.4f64.exp(), max_relative = 1e-10);
    }

    #[test]
    fn picard_hand_value() {
        let (m, v) = picard_map(1.0, 0.5, 0.5, BETA, 0.1);
        assert_relative_eq!(m, 1.19875, epsilon = 1e-9);
        // 0.5 + 0.2 - 0.00375 + 0.0025 - 0
        assert_relative_eq!(v, 0.69875, epsilon = 1e-9);
        assert_eq!(picard_map(1.3, 0.7, 0.4, BETA, 0.0), (1.3, 0.7));
    }

    #[test]
    fn picard_close_to_ode() {
        // the map truncates the linear gain e^g at 1 + g; the gap is dominated by g²/2
        let out = propagate_reduced(&vacuum_signal(1.0), 0.1, 16).unwrap().signal();
        let (m, _) = picard_map(1.0, 0.5, 0.5, BETA, 0.1);
        let g = BETA * 0.1 / std::f64::consts::SQRT_2;
        let gap = out.q() - m;
        assert!((gap - 0.5 * g * g).abs() < 0.1 * 0.5 * g * g, "gap {gap}");
    }

    #[test]
    fn mixed_signal_after_crystal() {
        let f = FullCrystalState::from_modes(&GaussianMode::coherent(1.0, 0.0), &GaussianMode::coherent(BETA, 0.0));
        let out = propagate_full(&f, 0.1, 16).unwrap();
        let signal = crate::gaussian::partial_trace(&out.joint(), crate::gaussian::ModeSelector::A);
        assert!(signal.det() > 0.25 + 1e-6, "det {}", signal.det());
        assert!(out.joint().is_physical(1e-12));
    }

    #[test]
    fn parity_symmetry() {
        let s = vacuum_signal(0.9);
        let mut neg = s;
        neg.mx_s = -s.mx_s;
        let a = propagate_reduced(&s, 0.1, 16).unwrap();
        let b = propagate_reduced(&neg, 0.1, 16).unwrap();
        assert_eq!(a.mx_s, -b.mx_s);
        assert_eq!(a.vxx_s, b.vxx_s);
        assert_eq!(a.vyy_s, b.vyy_s);
        assert_eq!(a.mx_b, b.mx_b);
        assert_eq!(a.cxx, -b.cxx);
    }

    #[test]
    fn step_doubling() {
        let check = |s: CrystalState, tol: f64| {
            let a = propagate_reduced(&s, 0.1, 16).unwrap().to_array();
            let b = propagate_reduced(&s, 0.1, 32).unwrap().to_array();
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= tol * x.abs().max(0.25), "{x} vs {y}");
            }
        };
        check(CrystalState::from_signal(&GaussianMode::coherent(1.0, 0.0), 1.0), 1e-10);
        // at the operating pump the 16-step truncation error is ~(0.1·2·mx_b/16)^5
        check(vacuum_signal(1.0), 1e-8);
    }
}
