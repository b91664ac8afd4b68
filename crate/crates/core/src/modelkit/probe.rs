use crate::error::{LabError, Result};
use crate::rng::{rng_for, shuffle};

const PROBE_NEWTON_STEPS: usize = 50;
const PROBE_L2: f64 = 1e-4;

/// Held-out accuracy of a logistic-regression probe predicting `concept`
/// from `activations`.
///
/// Each class is split 80/20 after a seeded shuffle. When a class is too
/// small to contribute to the held-out side the probe is scored on its
/// training examples instead of failing.
pub fn fit_linear_probe(activations: &[Vec<f64>], concept: &[u8], seed: u64) -> Result<f64> {
    if activations.len() != concept.len() {
        return Err(LabError::LengthMismatch {
            left: activations.len(),
            right: concept.len(),
        });
    }
    let positives = concept.iter().filter(|&&c| c == 1).count();
    if positives == 0 || positives == concept.len() {
        return Err(LabError::SingleClass { needed: 1 });
    }
    let d = activations[0].len();
    if activations.iter().any(|a| a.len() != d) {
        return Err(LabError::InvalidArgument("ragged activation rows".into()));
    }

    let mut rng = rng_for(seed, "probe/split");
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for class in [0u8, 1] {
        let mut members: Vec<usize> = (0..concept.len()).filter(|&i| concept[i] == class).collect();
        shuffle(&mut members, &mut rng);
        let n_train = ((0.8 * members.len() as f64).ceil() as usize).max(1);
        test.extend_from_slice(&members[n_train..]);
        train.extend_from_slice(&members[..n_train]);
    }
    if test.is_empty() {
        test = train.clone();
    }

    // Standardize with training statistics.
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in &train {
        mean.iter_mut().zip(&activations[i]).for_each(|(m, v)| *m += v / n);
    }
    let mut sd = vec![0.0; d];
    for &i in &train {
        for j in 0..d {
            sd[j] += (activations[i][j] - mean[j]).powi(2) / n;
        }
    }
    sd.iter_mut().for_each(|s| *s = if *s > 1e-24 { s.sqrt() } else { 1.0 });
    let z = |i: usize| -> Vec<f64> { (0..d).map(|j| (activations[i][j] - mean[j]) / sd[j]).collect() };
    let xs: Vec<Vec<f64>> = (0..activations.len()).map(z).collect();

    // Regularized logistic regression by damped Newton steps; the last
    // coordinate of `theta` is the unpenalized bias.
    let rows: Vec<Vec<f64>> = train.iter().map(|&i| xs[i].iter().cloned().chain([1.0]).collect()).collect();
    let labels: Vec<f64> = train.iter().map(|&i| f64::from(concept[i])).collect();
    let objective = |theta: &[f64]| -> f64 {
        let data: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(r, y)| {
                let s = dot(theta, r);
                // log(1 + e^s) - y s, computed stably.
                s.max(0.0) + (-s.abs()).exp().ln_1p() - y * s
            })
            .sum::<f64>()
            / n;
        data + 0.5 * PROBE_L2 * theta[..d].iter().map(|v| v * v).sum::<f64>()
    };
    let mut theta = vec![0.0; d + 1];
    for _ in 0..PROBE_NEWTON_STEPS {
        let mut grad = vec![0.0; d + 1];
        let mut hess = vec![vec![0.0; d + 1]; d + 1];
        for (r, y) in rows.iter().zip(&labels) {
            let p = logistic(dot(&theta, r));
            let wgt = p * (1.0 - p) / n;
            for j in 0..=d {
                grad[j] += (p - y) * r[j] / n;
                for k in 0..=j {
                    hess[j][k] += wgt * r[j] * r[k];
                }
            }
        }
        for j in 0..=d {
            if j < d {
                grad[j] += PROBE_L2 * theta[j];
                hess[j][j] += PROBE_L2;
            } else {
                hess[j][j] += 1e-12;
            }
            for k in 0..j {
                hess[k][j] = hess[j][k];
            }
        }
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() < 1e-10 {
            break;
        }
        let step = solve_spd(hess, &grad);
        let current = objective(&theta);
        let mut t = 1.0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            if objective(&cand) <= current || t < 1e-8 {
                theta = cand;
                break;
            }
            t *= 0.5;
        }
    }
    let (w, b) = (&theta[..d], theta[d]);
    let correct = test
        .iter()
        .filter(|&&i| {
            let s = b + w.iter().zip(&xs[i]).map(|(a, x)| a * x).sum::<f64>();
            u8::from(s > 0.0) == concept[i]
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
fn solve_spd(mut a: Vec<Vec<f64>>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    for j in 0..n {
        let mut diag = a[j][j];
        for k in 0..j {
            diag -= a[j][k] * a[j][k];
        }
        let l = diag.max(1e-300).sqrt();
        a[j][j] = l;
        for i in j + 1..n {
            let mut v = a[i][j];
            for k in 0..j {
                v -= a[i][k] * a[j][k];
            }
            a[i][j] = v / l;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i][k] * y[k];
        }
        y[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k][i] * y[k];
        }
        y[i] /= a[i][i];
    }
    y
}
