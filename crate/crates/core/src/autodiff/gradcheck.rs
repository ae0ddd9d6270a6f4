//! Central finite differences, used to check tape gradients.

use super::Tensor;

/// Central-difference gradient of `f` with respect to every entry of every
/// parameter tensor.
pub fn central_difference<F>(f: F, params: &[Tensor], step: f64) -> Vec<Tensor>
where
    F: Fn(&[Tensor]) -> f64,
{
    let mut work = params.to_vec();
    params
        .iter()
        .enumerate()
        .map(|(p, tensor)| {
            let mut grad = Tensor::zeros(tensor.shape());
            for i in 0..tensor.len() {
                let orig = tensor.data()[i];
                work[p].data_mut()[i] = orig + step;
                let up = f(&work);
                work[p].data_mut()[i] = orig - step;
                let down = f(&work);
                work[p].data_mut()[i] = orig;
                grad.data_mut()[i] = (up - down) / (2.0 * step);
            }
            grad
        })
        .collect()
}

/// `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂)`; zero when both vanish.
pub fn relative_error(a: &Tensor, b: &Tensor) -> f64 {
    let norm = |t: &[f64]| t.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    let scale = norm(a.data()).max(norm(b.data()));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
