//! Central finite differences.

/// `(f(p + eps e_i) - f(p - eps e_i)) / (2 eps)` for each requested coordinate.
pub fn finite_diff_grad(loss: &dyn Fn(&[f64]) -> f64, params: &[f64], coords: &[usize], eps: f64) -> Vec<f64> {
    let mut p = params.to_vec();
    coords
        .iter()
        .map(|&i| {
            let orig = p[i];
            p[i] = orig + eps;
            let up = loss(&p);
            p[i] = orig - eps;
            let down = loss(&p);
            p[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let f = |p: &[f64]| 3.0 * p[0] - 2.0 * p[1] + 0.5;
        let g = finite_diff_grad(&f, &[0.3, -1.1], &[0, 1], 1e-3);
        assert!((g[0] - 3.0).abs() < 1e-10 && (g[1] + 2.0).abs() < 1e-10);
    }

    #[test]
    fn error_is_second_order() {
        // f = sin, exact derivative cos; halving eps should cut the error ~4x.
        let f = |p: &[f64]| p[0].sin();
        let x = 0.7f64;
        let err = |eps: f64| (finite_diff_grad(&f, &[x], &[0], eps)[0] - x.cos()).abs();
        let ratio = err(1e-2) / err(5e-3);
        assert!((ratio - 4.0).abs() < 0.05, "{ratio}");
    }
}
