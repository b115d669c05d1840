//! Central finite differences.

use crate::scalar::Real;

/// `(f(x + eps e_i) - f(x - eps e_i)) / 2 eps` for every coordinate.
pub fn numeric_gradient<T: Real>(mut f: impl FnMut(&[T]) -> T, x: &[T], eps: T) -> Vec<T> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let up = f(&probe);
            probe[i] = orig - eps;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (T::lit(2.0) * eps)
        })
        .collect()
}

/// `max_i |a_i - n_i| / max(1e-8, max_i (|a_i| + |n_i|))`.
pub fn relative_error<T: Real>(analytic: &[T], numeric: &[T]) -> T {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths");
    let (mut diff, mut mag) = (T::zero(), T::zero());
    for (&a, &n) in analytic.iter().zip(numeric) {
        diff = diff.max((a - n).abs());
        mag = mag.max(a.abs() + n.abs());
    }
    diff / mag.max(T::lit(1e-8))
}

/// Relative error between `analytic` and the central-difference gradient of `f` at `x`.
pub fn gradient_check<T: Real>(f: impl FnMut(&[T]) -> T, x: &[T], analytic: &[T], eps: T) -> T {
    relative_error(analytic, &numeric_gradient(f, x, eps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1];
        let x = [1.5, -2.0];
        let analytic = [2.0 * 1.5 + 3.0 * -2.0, 3.0 * 1.5];
        assert!(gradient_check(f, &x, &analytic, 1e-5) < 1e-9);
        assert!(gradient_check(f, &x, &[0.0, 4.5], 1e-5) > 0.1);
    }

    #[test]
    fn all_zero_gradients_are_exact() {
        assert_eq!(relative_error(&[0.0f64, 0.0], &[0.0, 0.0]), 0.0);
    }
}
