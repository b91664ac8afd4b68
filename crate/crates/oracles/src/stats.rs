//! Textbook paired t-test with the tail probability obtained by numerically
//! integrating the Student-t density, plus reference PGR and agreement.

use crate::{OracleError, OracleResult};

/// Lanczos approximation (g = 7, n = 9) of ln Gamma for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
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
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn t_density(s: f64, nu: f64) -> f64 {
    let log_c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln();
    (log_c - (nu + 1.0) / 2.0 * (1.0 + s * s / nu).ln()).exp()
}

/// Composite Simpson's rule with `panels` (even) panels.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

/// Two-sided tail `P(|T| >= |t|)` for `nu` degrees of freedom.
pub fn t_two_sided(t: f64, nu: f64) -> f64 {
    let t = t.abs();
    if t == 0.0 {
        return 1.0;
    }
    let f = |s: f64| t_density(s, nu);
    // 2000 panels per unit of t keeps the h^4 error far below 1e-12.
    let panels = 2 * (1000.0 * t.min(400.0)).ceil() as usize;
    let body = simpson(&f, 0.0, t.min(400.0), panels);
    (1.0 - 2.0 * body).clamp(0.0, 1.0)
}

/// `(t, p)` of the paired two-sided t-test on `a - b`.
pub fn reference_t(a: &[f64], b: &[f64]) -> Result<OracleResult<(f64, f64)>, OracleError> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(OracleError::BadInput(format!("lengths {} and {}", a.len(), b.len())));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let ss: f64 = d.iter().map(|v| (v - mean) * (v - mean)).sum();
    if ss == 0.0 {
        return Err(OracleError::ZeroVariance);
    }
    let sd = (ss / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    Ok(OracleResult {
        value: (t, t_two_sided(t, n - 1.0)),
        method: "textbook paired t with quadrature tail",
    })
}

/// PGR written as one minus the remaining gap share.
pub fn reference_pgr(p_weak: f64, p_ws: f64, p_strong: f64) -> Option<f64> {
    if p_strong == p_weak {
        return None;
    }
    Some(1.0 - (p_strong - p_ws) / (p_strong - p_weak))
}

pub fn reference_agreement(a: &[usize], b: &[usize]) -> f64 {
    let mut same = 0usize;
    for i in 0..a.len() {
        if a[i] == b[i] {
            same += 1;
        }
    }
    same as f64 / a.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_pair() {
        let r = reference_t(&[1.0, -1.0], &[0.0, 0.0]).unwrap().value;
        assert_eq!(r, (0.0, 1.0));
    }

    #[test]
    fn constant_differences_rejected() {
        assert_eq!(reference_t(&[1.0, 2.0], &[0.0, 1.0]), Err(OracleError::ZeroVariance));
    }

    #[test]
    fn cauchy_tail() {
        // nu = 1: P(|T| > 1) = 1/2.
        assert!((t_two_sided(1.0, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn normal_limit() {
        // Large nu approaches the normal: P(|Z| > 1.96) ~ 0.05.
        assert!((t_two_sided(1.959_963_984_540_054, 1e7) - 0.05).abs() < 1e-6);
    }

    #[test]
    fn gamma_values() {
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }
}
