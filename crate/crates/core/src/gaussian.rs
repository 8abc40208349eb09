//! Single- and two-mode Gaussian states in the (q, p) quadrature convention.
//!
//! Quadratures obey `[q, p] = i`, so the vacuum covariance is `diag(1/2, 1/2)`
//! and a valid single-mode covariance satisfies `det(cov) >= 1/4`.
//!
//! Every operation here is a pure value transformation. Randomness enters only
//! through explicit standard-normal arguments.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{CimError, Result};

/// Variance of each vacuum quadrature.
pub const VACUUM_VARIANCE: f64 = 0.5;

/// Smallest measured variance the homodyne update will divide by.
pub const MIN_MEASURED_VARIANCE: f64 = 1e-12;

/// Picks one mode out of a [`JointGaussianState`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeSelector {
    A,
    B,
}

impl ModeSelector {
    pub fn other(self) -> Self {
        match self {
            ModeSelector::A => ModeSelector::B,
            ModeSelector::B => ModeSelector::A,
        }
    }
}

/// Gaussian state of one optical mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMode {
    pub mean: Vector2<f64>,
    pub cov: Matrix2<f64>,
}

impl GaussianMode {
    /// Builds a mode, checking symmetry, finiteness and the uncertainty bound.
    pub fn new(mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<Self> {
        let mode = Self { mean, cov };
        if (cov[(0, 1)] - cov[(1, 0)]).abs() > 1e-12 * (1.0 + cov.abs().max()) {
            return Err(CimError::Domain("covariance is not symmetric".into()));
        }
        if !mode.is_finite() {
            return Err(CimError::Domain("non-finite moments".into()));
        }
        if !mode.is_physical(1e-12) {
            return Err(CimError::Domain(format!(
                "covariance violates the uncertainty bound: det = {}",
                cov.determinant()
            )));
        }
        Ok(mode)
    }

    pub fn vacuum() -> Self {
        Self::coherent(0.0, 0.0)
    }

    /// Coherent state with quadrature means `(q, p)`.
    pub fn coherent(q: f64, p: f64) -> Self {
        Self {
            mean: Vector2::new(q, p),
            cov: Matrix2::from_diagonal_element(VACUUM_VARIANCE),
        }
    }

    pub fn q(&self) -> f64 {
        self.mean[0]
    }

    pub fn var_q(&self) -> f64 {
        self.cov[(0, 0)]
    }

    pub fn var_p(&self) -> f64 {
        self.cov[(1, 1)]
    }

    pub fn det(&self) -> f64 {
        self.cov.determinant()
    }

    /// Purity `1 / (2 sqrt(det cov))`; equals one for pure states.
    pub fn purity(&self) -> f64 {
        0.5 / self.det().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().chain(self.cov.iter()).all(|v| v.is_finite())
    }

    /// `cov + (i/2) Ω >= 0`, checked as positive diagonal plus `det >= 1/4 - tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.cov[(0, 0)] > 0.0 && self.cov[(1, 1)] > 0.0 && self.det() >= 0.25 - tol
    }
}

/// Two-mode Gaussian state `(a, b)` with cross-covariance block `cross = Cov(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointGaussianState {
    pub mean_a: Vector2<f64>,
    pub mean_b: Vector2<f64>,
    pub cov_a: Matrix2<f64>,
    pub cov_b: Matrix2<f64>,
    pub cross: Matrix2<f64>,
}

impl JointGaussianState {
    pub fn mean4(&self) -> Vector4<f64> {
        Vector4::new(self.mean_a[0], self.mean_a[1], self.mean_b[0], self.mean_b[1])
    }

    /// Assembled 4x4 covariance in `(q_a, p_a, q_b, p_b)` order.
    pub fn cov4(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.cov_a);
        m.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.cov_b);
        m.fixed_view_mut::<2, 2>(0, 2).copy_from(&self.cross);
        m.fixed_view_mut::<2, 2>(2, 0).copy_from(&self.cross.transpose());
        m
    }

    /// Splits a 4-vector mean and 4x4 covariance into blocks, re-symmetrizing.
    pub fn from_moments(mean: &Vector4<f64>, cov: &Matrix4<f64>) -> Self {
        let cov = (cov + cov.transpose()) * 0.5;
        Self {
            mean_a: Vector2::new(mean[0], mean[1]),
            mean_b: Vector2::new(mean[2], mean[3]),
            cov_a: cov.fixed_view::<2, 2>(0, 0).into_owned(),
            cov_b: cov.fixed_view::<2, 2>(2, 2).into_owned(),
            cross: cov.fixed_view::<2, 2>(0, 2).into_owned(),
        }
    }

    pub fn marginal(&self, which: ModeSelector) -> GaussianMode {
        match which {
            ModeSelector::A => GaussianMode { mean: self.mean_a, cov: self.cov_a },
            ModeSelector::B => GaussianMode { mean: self.mean_b, cov: self.cov_b },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mean4().iter().chain(self.cov4().iter()).all(|v| v.is_finite())
    }

    /// Smaller symplectic eigenvalue of the 4x4 covariance.
    ///
    /// The state is physical iff the covariance is positive definite and this
    /// value is at least 1/2.
    pub fn min_symplectic_eigenvalue(&self) -> f64 {
        let delta = self.cov_a.determinant() + self.cov_b.determinant() + 2.0 * self.cross.determinant();
        let det = self.cov4().determinant();
        let disc = (delta * delta - 4.0 * det).max(0.0);
        ((delta - disc.sqrt()) * 0.5).max(0.0).sqrt()
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.marginal(ModeSelector::A).is_physical(tol)
            && self.marginal(ModeSelector::B).is_physical(tol)
            && self.min_symplectic_eigenvalue() >= 0.5 - tol
    }
}

/// Product state `a ⊗ b`.
pub fn tensor(a: &GaussianMode, b: &GaussianMode) -> JointGaussianState {
    JointGaussianState {
        mean_a: a.mean,
        mean_b: b.mean,
        cov_a: a.cov,
        cov_b: b.cov,
        cross: Matrix2::zeros(),
    }
}

/// Marginal of the kept mode.
pub fn partial_trace(j: &JointGaussianState, keep: ModeSelector) -> GaussianMode {
    j.marginal(keep)
}

/// Beamsplitter with field-exchange amplitude `r`:
/// `a' = t a - r b`, `b' = r a + t b` with `t = sqrt(1 - r^2)`, applied to both quadratures.
pub fn apply_beamsplitter(j: &JointGaussianState, r: f64) -> Result<JointGaussianState> {
    if !(0.0..=1.0).contains(&r) {
        return Err(CimError::Domain(format!("beamsplitter amplitude {r} outside [0, 1]")));
    }
    let t = (1.0 - r * r).sqrt();
    #[rustfmt::skip]
    let s = Matrix4::new(
        t,   0.0, -r,  0.0,
        0.0, t,   0.0, -r,
        r,   0.0, t,   0.0,
        0.0, r,   0.0, t,
    );
    let mean = s * j.mean4();
    let cov = s * j.cov4() * s.transpose();
    Ok(JointGaussianState::from_moments(&mean, &cov))
}

/// Mixes `a` with a vacuum ancilla at amplitude `r`, returning the joint state.
pub fn mix_with_vacuum(a: &GaussianMode, r: f64) -> Result<JointGaussianState> {
    apply_beamsplitter(&tensor(a, &GaussianMode::vacuum()), r)
}

/// Coherent displacement of the mean; the covariance is untouched.
pub fn displace(a: &GaussianMode, alpha: Vector2<f64>) -> GaussianMode {
    GaussianMode { mean: a.mean + alpha, cov: a.cov }
}

/// Record of a q-quadrature homodyne measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneOutcome {
    /// Measured value `w`.
    pub value: f64,
    /// Conditional state of the retained mode.
    pub conditioned: GaussianMode,
}

/// Measures the q quadrature of `measured`, drawing `w = mu_q + sqrt(var_q) * noise`,
/// and returns the conditioned state of the other mode.
pub fn homodyne_q(j: &JointGaussianState, measured: ModeSelector, noise: f64) -> Result<HomodyneOutcome> {
    let m = j.marginal(measured);
    let var = m.var_q();
    if !(var >= MIN_MEASURED_VARIANCE) {
        return Err(CimError::Degenerate(var));
    }
    condition_on_q(j, measured, m.q() + var.sqrt() * noise)
}

/// Conditions the retained mode on the q-homodyne result `value` of `measured`.
pub fn condition_on_q(j: &JointGaussianState, measured: ModeSelector, value: f64) -> Result<HomodyneOutcome> {
    let m = j.marginal(measured);
    let var = m.var_q();
    if !(var >= MIN_MEASURED_VARIANCE) {
        return Err(CimError::Degenerate(var));
    }
    // v_q: covariance of the retained quadratures with the measured q.
    let (kept, v_q) = match measured {
        ModeSelector::B => (j.marginal(ModeSelector::A), j.cross.column(0).into_owned()),
        ModeSelector::A => (j.marginal(ModeSelector::B), j.cross.row(0).transpose()),
    };
    let mean = kept.mean + v_q * ((value - m.q()) / var);
    let mut cov = kept.cov - v_q * v_q.transpose() / var;
    cov = (cov + cov.transpose()) * 0.5;
    Ok(HomodyneOutcome { value, conditioned: GaussianMode { mean, cov } })
}
