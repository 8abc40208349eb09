//! Fixed-step classical Runge–Kutta for small autonomous systems.

/// Integrates `dy/dt = f(y)` from 0 to `span` with `steps` RK4 steps.
///
/// Returns `None` as soon as a non-finite component appears.
pub fn rk4<const N: usize, F>(y0: [f64; N], span: f64, steps: usize, f: F) -> Option<[f64; N]>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    let h = span / steps as f64;
    let mut y = y0;
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, 0.5 * h, &k1));
        let k3 = f(&axpy(&y, 0.5 * h, &k2));
        let k4 = f(&axpy(&y, h, &k3));
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    Some(y)
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], a: f64, k: &[f64; N]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        out[i] += a * k[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let y = rk4([1.0], 1.0, 64, |y| [y[0]]).unwrap();
        assert!((y[0] - 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn harmonic_oscillator_fourth_order() {
        let err = |steps| {
            let y = rk4([1.0, 0.0], 2.0, steps, |y| [y[1], -y[0]]).unwrap();
            (y[0] - 2f64.cos()).abs()
        };
        let ratio = err(20) / err(40);
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }

    #[test]
    fn blowup_is_reported() {
        assert!(rk4([1.0], 10.0, 10, |y| [y[0] * y[0] * 1e300]).is_none());
    }
}
