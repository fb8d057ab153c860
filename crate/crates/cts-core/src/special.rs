//! Special functions used by the significance tests.
//!
//! The regularized incomplete beta function gives the exact Student-t
//! tail probability for Pearson coefficients; no approximation tables.

/// Natural log of the gamma function (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(z: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 3e-16;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value for a Pearson coefficient `r` over `n` paired samples,
/// via the exact Student-t distribution with n - 2 degrees of freedom.
pub fn pearson_p_value(r: f64, n: usize) -> f64 {
    assert!(n >= 3, "p-value needs at least 3 samples");
    let df = (n - 2) as f64;
    let r2 = (r * r).min(1.0);
    if 1.0 - r2 <= 0.0 {
        return 0.0;
    }
    // p = I_{df/(df+t^2)}(df/2, 1/2) with t^2 = r^2 df / (1 - r^2).
    let t2 = r2 * df / (1.0 - r2);
    reg_inc_beta(df / 2.0, 0.5, df / (df + t2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ln_gamma_known_values() {
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(2.0), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ln_gamma(5.0), 24.0_f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            ln_gamma(0.5),
            0.5 * std::f64::consts::PI.ln(),
            epsilon = 1e-13
        );
    }

    #[test]
    fn inc_beta_endpoints_and_symmetry() {
        assert_eq!(reg_inc_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(reg_inc_beta(2.0, 3.0, 1.0), 1.0);
        for &(a, b, x) in &[(2.0, 3.0, 0.3), (0.5, 9.5, 0.1), (4.0, 0.5, 0.8)] {
            let lhs = reg_inc_beta(a, b, x);
            let rhs = 1.0 - reg_inc_beta(b, a, 1.0 - x);
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-13);
        }
        // I_x(1, 1) = x.
        assert_abs_diff_eq!(reg_inc_beta(1.0, 1.0, 0.42), 0.42, epsilon = 1e-14);
    }

    #[test]
    fn matches_statrs_student_t() {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        for &(r, n) in &[
            (0.1, 10usize),
            (-0.448, 21),
            (0.7, 8),
            (-0.9, 30),
            (0.25, 100),
            (0.0, 5),
        ] {
            let df = (n - 2) as f64;
            let t = r * (df / (1.0 - r * r)).sqrt();
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            let expected = 2.0 * (1.0 - dist.cdf(t.abs()));
            assert_abs_diff_eq!(pearson_p_value(r, n), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn paper_scale_p_value_spot_check() {
        // r = -0.448 over 21 samples sits just inside the 5% level.
        let p = pearson_p_value(-0.448, 21);
        assert!(p > 0.03 && p < 0.05, "p = {p}");
    }
}
