use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub df: usize,
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t))
}

/// Paired two-sided t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(LabError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(LabError::InvalidArgument("paired t-test needs at least 2 pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 || !var.is_finite() {
        return Err(LabError::DegenerateTest);
    }
    let t = mean / (var / n).sqrt();
    let df = diffs.len() - 1;
    Ok(TTest {
        t,
        p: student_t_two_sided_p(t, df as f64),
        df,
    })
}

/// One-sided sign test that `b` tends to exceed `a`; ties are dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
    pub p: f64,
}

pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    if a.len() != b.len() {
        return Err(LabError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let wins = a.iter().zip(b).filter(|(x, y)| y > x).count();
    let losses = a.iter().zip(b).filter(|(x, y)| y < x).count();
    let ties = a.len() - wins - losses;
    let n = wins + losses;
    let p = if n == 0 {
        1.0
    } else {
        // ln C(n, k) accumulated incrementally keeps this exact enough for any n we use.
        let ln_half_n = n as f64 * 0.5f64.ln();
        let mut ln_c = 0.0;
        let mut tail = 0.0;
        for k in 0..=n {
            if k > 0 {
                ln_c += ((n - k + 1) as f64).ln() - (k as f64).ln();
            }
            if k >= wins {
                tail += (ln_c + ln_half_n).exp();
            }
        }
        tail.min(1.0)
    };
    Ok(SignTest { wins, losses, ties, p })
}
