//! Scalar entire functions that appear in spectral sums, evaluated without
//! cancellation near the origin.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::scalar::Real;

const SERIES_TERMS: usize = 24;

/// `(eˣ − 1)/x`, equal to 1 at the origin.
pub fn phi1<T: Real>(x: Complex<T>) -> Complex<T> {
    if x.norm() < T::lit(0.5) {
        series(x, 1)
    } else {
        (x.exp() - Complex::one()) / x
    }
}

/// `(eˣ − 1 − x)/x²`, equal to ½ at the origin.
pub fn phi2<T: Real>(x: Complex<T>) -> Complex<T> {
    if x.norm() < T::one() {
        series(x, 2)
    } else {
        (x.exp() - Complex::one() - x) / (x * x)
    }
}

/// `Σ_{k≥0} xᵏ/(k+offset)!`
fn series<T: Real>(x: Complex<T>, offset: usize) -> Complex<T> {
    let mut fact = T::one();
    for k in 2..=offset {
        fact *= T::lit(k as f64);
    }
    let mut term = Complex::new(T::one() / fact, T::zero());
    let mut sum = Complex::<T>::zero();
    for k in 0..SERIES_TERMS {
        sum += term;
        term = term * x / T::lit((k + offset + 1) as f64);
    }
    sum
}

/// `(e^{t a} − e^{t b})/(a − b)`, with the confluent limit `t e^{t b}`.
pub fn divided_exp<T: Real>(t: T, a: Complex<T>, b: Complex<T>) -> Complex<T> {
    (b * t).exp() * phi1((a - b) * t) * t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn match_direct_formula_away_from_zero() {
        for &x in &[Complex::new(0.3, 0.2), Complex::new(-2.0, 1.0), Complex::new(0.49, 0.0), Complex::new(5.0, -3.0)] {
            let d1 = (x.exp() - 1.0) / x;
            let d2 = (x.exp() - 1.0 - x) / (x * x);
            assert!((phi1(x) - d1).norm() < 1e-13 * d1.norm());
            assert!((phi2(x) - d2).norm() < 1e-12 * d2.norm());
        }
    }

    #[test]
    fn limits_at_origin() {
        assert!((phi1(Complex::<f64>::new(0.0, 0.0)) - 1.0).norm() < 1e-16);
        assert!((phi2(Complex::<f64>::new(0.0, 0.0)) - 0.5).norm() < 1e-16);
        let tiny = Complex::<f64>::new(1e-12, 0.0);
        assert!((phi1(tiny) - (1.0 + 5e-13)).norm() < 1e-16);
    }

    #[test]
    fn divided_difference_confluent() {
        let b = Complex::<f64>::new(-0.5, 0.1);
        let v = divided_exp(2.0, b, b);
        assert!((v - 2.0 * (b * 2.0).exp()).norm() < 1e-15);
        let a = Complex::<f64>::new(-1.0, 0.0);
        let direct = ((a * 2.0).exp() - (b * 2.0).exp()) / (a - b);
        assert!((divided_exp(2.0, a, b) - direct).norm() < 1e-14);
    }
}
