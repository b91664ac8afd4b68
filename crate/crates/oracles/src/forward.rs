//! Straight-line re-evaluation of a tanh MLP from its flat parameters.
//!
//! Layout per layer: an `out x in` row-major weight block, then `out`
//! biases. Hidden layers use tanh; the last layer feeds a softmax.

/// Outputs of every layer: hidden activations, then raw logits.
pub fn mlp_layers(params: &[f64], widths: &[usize], x: &[f64]) -> Vec<Vec<f64>> {
    assert_eq!(x.len(), widths[0], "input width");
    let mut h = x.to_vec();
    let mut out = Vec::new();
    let mut off = 0;
    let layers = widths.len() - 1;
    for l in 0..layers {
        let (n_in, n_out) = (widths[l], widths[l + 1]);
        let mut next = vec![0.0; n_out];
        for o in 0..n_out {
            let mut acc = params[off + n_in * n_out + o];
            for i in 0..n_in {
                acc += params[off + o * n_in + i] * h[i];
            }
            next[o] = if l + 1 < layers { acc.tanh() } else { acc };
        }
        off += n_in * n_out + n_out;
        out.push(next.clone());
        h = next;
    }
    assert_eq!(off, params.len(), "parameter count");
    out
}

pub fn mlp_forward(params: &[f64], widths: &[usize], x: &[f64]) -> Vec<f64> {
    let logits = mlp_layers(params, widths, x).pop().expect("at least one layer");
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_give_uniform() {
        let p = mlp_forward(&[0.0; 2 * 3 + 2], &[3, 2], &[1.0, -2.0, 0.5]);
        assert_eq!(p, vec![0.5, 0.5]);
    }
}
