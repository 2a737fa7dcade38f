//! Special functions behind the Pólya-Gamma augmentation.
//!
//! Only the first moment and the Laplace transform of the Pólya-Gamma
//! distribution are needed by the coordinate-ascent updates, so there is no
//! density or sampler here.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Below this |c| the Pólya-Gamma mean switches to its Taylor series.
const PG_SERIES_THRESHOLD: f64 = 1e-6;

/// Logistic sigmoid `e^z / (1 + e^z)`, branching on the sign of `z` so that
/// neither tail overflows.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log s(z)`, finite for every finite `z`.
pub fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// `log cosh(x)` without overflow.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// Mean of `PG(b, c)`: `(b / 2c) tanh(c / 2)`, with the limit `b / 4` near zero.
pub fn pg_mean(b: f64, c: f64) -> Result<f64> {
    if b.is_nan() || b <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Pólya-Gamma shape must be positive, got {b}"
        )));
    }
    Ok(b * pg_mean_unit(c))
}

/// Mean of `PG(1, c)`.
#[inline]
pub fn pg_mean_unit(c: f64) -> f64 {
    let c = c.abs();
    if c < PG_SERIES_THRESHOLD {
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}

/// Laplace transform of `PG(1, 0)` evaluated at `z^2 / 2`, i.e. `1 / cosh(z / 2)`.
pub fn pg_laplace(z: f64) -> f64 {
    let a = 0.5 * z.abs();
    let e = (-2.0 * a).exp();
    2.0 * (-a).exp() / (1.0 + e)
}

/// Exponent of the sigmoid factorisation, `z/2 - z^2 ω / 2 - log 2`.
pub fn h(omega: f64, z: f64) -> Result<f64> {
    if omega < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "Pólya-Gamma variable must be non-negative, got {omega}"
        )));
    }
    Ok(0.5 * z - 0.5 * z * z * omega - LN_2)
}

/// Digamma function ψ(x) for x > 0.
///
/// Shifts the argument above 6 with ψ(x) = ψ(x + 1) - 1/x and then applies
/// the asymptotic expansion in 1/x².
pub fn digamma(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "digamma requires a positive argument, got {x}"
        )));
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    // Bernoulli-number coefficients B_2k / 2k.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0 - inv2 * (1.0 / 132.0 - inv2 * 691.0 / 32760.0)))));
    Ok(acc + x.ln() - 0.5 / x - series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigmoid_basics() {
        assert_eq!(sigmoid(0.0), 0.5);
        for z in [-30.0, -2.5, 0.1, 7.0] {
            assert_relative_eq!(sigmoid(z) + sigmoid(-z), 1.0, epsilon = 1e-15);
        }
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(log_sigmoid(-800.0).is_finite());
        assert_relative_eq!(log_sigmoid(-800.0), -800.0, epsilon = 1e-12);
        assert_relative_eq!(log_sigmoid(1.3), sigmoid(1.3).ln(), epsilon = 1e-15);
        assert!(sigmoid(f64::NAN).is_nan());
    }

    #[test]
    fn pg_mean_values() {
        assert_eq!(pg_mean(1.0, 0.0).unwrap(), 0.25);
        // tanh(1) to 20 digits: 0.76159415595576488812
        assert_relative_eq!(
            pg_mean(1.0, 2.0).unwrap(),
            0.761_594_155_955_764_9 / 4.0,
            epsilon = 1e-15
        );
        assert_eq!(pg_mean(1.0, 3.7).unwrap(), pg_mean(1.0, -3.7).unwrap());
        assert!(pg_mean(0.0, 1.0).is_err());
        assert!(pg_mean(-1.0, 1.0).is_err());
        // continuity across the series threshold
        let a = pg_mean_unit(0.999_999e-6);
        let b = pg_mean_unit(1.000_001e-6);
        assert!((a - b).abs() < 1e-14);
        // tanh(50) rounds to 1, so the exact value 0.005(1 - 2e^-100) is 0.005 in f64
        assert!(pg_mean_unit(100.0) <= 0.005);
    }

    #[test]
    fn pg_mean_decreasing_in_abs_c() {
        let mut prev = pg_mean_unit(0.0);
        for k in 1..2000 {
            let c = k as f64 * 0.01;
            let cur = pg_mean_unit(c);
            assert!(cur < prev, "not decreasing at c={c}");
            prev = cur;
        }
    }

    #[test]
    fn laplace_identity_on_grid() {
        for k in 0..=100 {
            let z = -10.0 + 0.2 * k as f64;
            let lhs = 0.5 * (0.5 * z).exp() * pg_laplace(z);
            assert!((lhs - sigmoid(z)).abs() < 1e-12, "z={z}");
        }
        assert_eq!(pg_laplace(0.0), 1.0);
        // 1/cosh(1.5), cosh(1.5) = 2.35240961524324732
        assert_relative_eq!(
            pg_laplace(3.0),
            1.0 / 2.352_409_615_243_247,
            epsilon = 1e-15
        );
        assert!(pg_laplace(1e3) >= 0.0 && pg_laplace(1e3).is_finite());
    }

    #[test]
    fn h_values() {
        assert_relative_eq!(h(0.0, 0.0).unwrap(), -LN_2);
        assert_relative_eq!(h(17.0, 0.0).unwrap(), -LN_2);
        assert_relative_eq!(h(0.25, 2.0).unwrap(), 1.0 - 0.5 - LN_2, epsilon = 1e-15);
        assert!(h(-0.1, 1.0).is_err());
    }

    #[test]
    fn digamma_values() {
        const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-12);
        // ψ(1/2) = -γ - 2 ln 2
        assert!((digamma(0.5).unwrap() + EULER_GAMMA + 2.0 * LN_2).abs() < 1e-12);
        assert!((digamma(1e6).unwrap() - 1e6f64.ln()).abs() < 1e-6);
        assert!(digamma(0.0).is_err());
        for x in [1e-3, 0.37, 2.0, 5.9, 6.0, 13.5, 250.0] {
            let d = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!((d - 1.0 / x).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn log_cosh_matches_direct() {
        for x in [-5.0, -0.3, 0.0, 0.7, 12.0] {
            assert_relative_eq!(log_cosh(x), f64::cosh(x).ln(), epsilon = 1e-14);
        }
        assert!(log_cosh(1e3).is_finite());
    }

    proptest::proptest! {
        #[test]
        fn finite_on_documented_domains(z in -1e3f64..1e3, w in 0.0f64..1e3) {
            proptest::prop_assert!(sigmoid(z).is_finite());
            proptest::prop_assert!(log_sigmoid(z).is_finite());
            proptest::prop_assert!(pg_laplace(z).is_finite());
            let m = pg_mean_unit(z);
            proptest::prop_assert!(m > 0.0 && m <= 0.25);
            proptest::prop_assert!(h(w, z).unwrap().is_finite());
        }
    }
}
