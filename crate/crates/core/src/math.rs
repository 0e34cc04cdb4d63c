//! Scalar helpers shared by the gate and the ordinal head.

/// Sigmoid arguments are clamped to this magnitude before exponentiation.
pub const SIGMOID_CLAMP: f64 = 500.0;

/// Logistic sigmoid `1 / (1 + exp(-x))`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(σ(x), σ(-x))`, each computed without cancellation.
#[inline]
pub fn sigmoid_pair(x: f64) -> (f64, f64) {
    let x = x.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
    let e = (-x.abs()).exp();
    let big = 1.0 / (1.0 + e);
    let small = e / (1.0 + e);
    if x >= 0.0 {
        (big, small)
    } else {
        (small, big)
    }
}

/// `σ'(x) = σ(x) σ(-x)`.
#[inline]
pub fn sigmoid_prime(x: f64) -> f64 {
    let (a, b) = sigmoid_pair(x);
    a * b
}

/// `w · (1, z)` with the bias stored first in `w`.
#[inline]
pub fn affine(w: &[f64], z: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), z.len() + 1);
    w[0] + w[1..].iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 || xs.iter().all(|x| *x == xs[0]) {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(1e6), 1.0);
        assert_eq!(sigmoid(-1e6), sigmoid(-500.0));
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pair_is_complementary() {
        for x in [-30.0, -1.0, 0.0, 0.3, 20.0, 45.0] {
            let (a, b) = sigmoid_pair(x);
            assert!((a + b - 1.0).abs() < 1e-15);
            assert_eq!(a, sigmoid(x));
        }
        // the small side keeps full relative precision
        let (_, b) = sigmoid_pair(40.0);
        assert!((b / (-40.0f64).exp() - 1.0).abs() < 1e-12);
        assert!((sigmoid_prime(0.0) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn std_of_constant_is_zero() {
        assert_eq!(std_dev(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(std_dev(&[1.0]), 0.0);
    }
}
