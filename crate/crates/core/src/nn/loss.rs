use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped to at least this before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

fn check(probs: &Tensor<impl Real>, labels: &[usize]) -> Result<usize> {
    let s = probs.shape();
    if s.len() != 2 || s[0] != labels.len() || labels.is_empty() {
        return Err(Error::Shape(format!(
            "cross entropy over {s:?} probabilities with {} labels",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= s[1]) {
        return Err(Error::InvalidArgument(format!(
            "label index {bad} out of range for {} classes",
            s[1]
        )));
    }
    Ok(s[1])
}

/// Mean over the batch of `-ln p[true class]`.
pub fn cross_entropy<T: Real>(probs: &Tensor<T>, labels: &[usize]) -> Result<f64> {
    let c = check(probs, labels)?;
    let total: f64 = probs
        .data()
        .chunks_exact(c)
        .zip(labels)
        .map(|(row, &l)| -row[l].as_f64().max(PROB_FLOOR).ln())
        .sum();
    Ok(total / labels.len() as f64)
}

/// Gradient of the mean cross entropy w.r.t. the logits feeding the softmax: `(p - y) / N`.
pub fn softmax_cross_entropy_backward<T: Real>(probs: &Tensor<T>, labels: &[usize]) -> Result<Tensor<T>> {
    let c = check(probs, labels)?;
    let inv_n = T::of(1.0 / labels.len() as f64);
    let mut g = probs.clone();
    for (row, &l) in g.data_mut().chunks_exact_mut(c).zip(labels) {
        row[l] -= T::one();
        row.iter_mut().for_each(|v| *v *= inv_n);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_uniform() {
        let p = Tensor::from_vec(&[2, 3], vec![1.0f64, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(cross_entropy(&p, &[0, 2]).unwrap() < 1e-11);
        let u = Tensor::filled(&[4, 3], 1.0f64 / 3.0);
        assert!((cross_entropy(&u, &[0, 1, 2, 0]).unwrap() - 3f64.ln()).abs() < 1e-12);
        assert!((3f64.ln() - 1.0986).abs() < 1e-4);
    }

    #[test]
    fn invalid_label() {
        let p = Tensor::filled(&[1, 3], 1.0f32 / 3.0);
        assert!(matches!(cross_entropy(&p, &[3]), Err(Error::InvalidArgument(_))));
    }
}
