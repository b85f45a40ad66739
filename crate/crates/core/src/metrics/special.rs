//! Log-gamma, the regularized incomplete beta function and the distributions
//! built on it (Beta, Student's t).

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=30.0).contains(&x) {
        // Exact factorial keeps integer shapes (e.g. the uniform prior) exact.
        return (2..x as u32).map(f64::from).product::<f64>().ln();
    }
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // The continued fraction converges fast for x < (a+1)/(a+b+2).
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    ln_front.exp() * beta_continued_fraction(a, b, x) / a
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let mut c = 1.0;
    let mut d = 1.0 - (a + b) * x / (a + 1.0);
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut f = d;
    for m in 1..=500 {
        let m = m as f64;
        let even = m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
        d = 1.0 + even * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + even / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        f *= d * c;

        let odd = -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
        d = 1.0 + odd * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + odd / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        f *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    f
}

pub fn beta_cdf(a: f64, b: f64, x: f64) -> f64 {
    regularized_incomplete_beta(a, b, x)
}

pub fn beta_pdf(a: f64, b: f64, x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    // x^(a-1) with a == 1 is 1 even at x == 0.
    let log_term = |exp: f64, base: f64| if exp == 0.0 { 0.0 } else { exp * base.ln() };
    (log_term(a - 1.0, x) + log_term(b - 1.0, 1.0 - x) - ln_beta(a, b)).exp()
}

/// Tolerance of [`beta_quantile`] on x.
pub const QUANTILE_TOLERANCE: f64 = 1e-9;

/// Inverse Beta CDF by bisection.
pub fn beta_quantile(a: f64, b: f64, q: f64) -> f64 {
    assert!(q > 0.0 && q < 1.0, "quantile level must lie in (0, 1), got {q}");
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > QUANTILE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if beta_cdf(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_integers() {
        let mut fact = 1.0_f64;
        for n in 1..15 {
            assert!((ln_gamma(n as f64) - fact.ln()).abs() < 1e-10, "n = {n}");
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn integer_shape_closed_forms() {
        // I_x(a, 1) = x^a and I_x(1, b) = 1 - (1-x)^b.
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            assert!((beta_cdf(17.0, 1.0, x) - x.powi(17)).abs() < 1e-12);
            assert!((beta_cdf(1.0, 17.0, x) - (1.0 - (1.0 - x).powi(17))).abs() < 1e-12);
        }
        assert!((beta_cdf(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn quantiles() {
        assert!((beta_quantile(17.0, 1.0, 0.10) - 0.1_f64.powf(1.0 / 17.0)).abs() < 1e-8);
        assert!((beta_quantile(1.0, 17.0, 0.90) - (1.0 - 0.1_f64.powf(1.0 / 17.0))).abs() < 1e-8);
        // Value from an external implementation.
        assert!((beta_quantile(6.0, 12.0, 0.10) - 0.19716145886056685).abs() < 1e-8);
    }

    #[test]
    fn pdf_endpoints() {
        assert!((beta_pdf(17.0, 1.0, 1.0) - 17.0).abs() < 1e-9);
        assert!((beta_pdf(1.0, 17.0, 0.0) - 17.0).abs() < 1e-9);
        assert_eq!(beta_pdf(1.0, 1.0, 0.0), 1.0);
        assert_eq!(beta_pdf(2.0, 2.0, 0.0), 0.0);
    }

    #[test]
    fn t_distribution() {
        // df = 1 is Cauchy: P(|T| > 1) = 0.5.
        assert!((student_t_two_sided(1.0, 1.0) - 0.5).abs() < 1e-12);
        assert_eq!(student_t_two_sided(0.0, 5.0), 1.0);
        // Spearman example: rho = 0.9487, n = 4.
        let rho: f64 = 0.9486832980505139;
        let t = rho * (2.0 / (1.0 - rho * rho)).sqrt();
        assert!((student_t_two_sided(t, 2.0) - 0.05131670194948612).abs() < 1e-9);
    }
}
