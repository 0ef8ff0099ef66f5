mod common;

use common::{all_layer_errors, network_grad_error, random_tensor, rel_err, small_network, GRAD_EPS, GRAD_FLOOR};
use ecgscalo::nn::{cross_entropy, softmax_cross_entropy_backward, softmax_rows, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn every_layer_matches_finite_differences_f64() {
    for (name, err) in all_layer_errors::<f64>(1) {
        println!("f64 {name}: {err:.3e}");
        assert!(err < 1e-6, "{name}: {err:e}");
    }
}

#[test]
fn every_layer_matches_finite_differences_f32() {
    for (name, err) in all_layer_errors::<f32>(2) {
        println!("f32 {name}: {err:.3e}");
        assert!(err < 1e-3, "{name}: {err:e}");
    }
}

#[test]
fn whole_network_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels = [0, 2, 1, 2];
    let x: Tensor<f64> = random_tensor(&[4, 8, 8, 2], &mut rng);
    let like = small_network::<f64>(4);
    let err64 = network_grad_error(&like, &x, &labels, &like, GRAD_EPS, GRAD_FLOOR);
    let err32 = network_grad_error(
        &small_network::<f32>(4),
        &x.cast::<f32>(),
        &labels,
        &like,
        GRAD_EPS,
        GRAD_FLOOR,
    );
    println!("network f64 {err64:.3e} f32 {err32:.3e}");
    assert!(err64 < 1e-6);
    assert!(err32 < 1e-3);
}

#[test]
fn fused_softmax_cross_entropy_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let z: Tensor<f64> = random_tensor(&[6, 3], &mut rng);
    let labels: Vec<usize> = (0..6).map(|_| rng.gen_range(0..3)).collect();
    let g = softmax_cross_entropy_backward(&softmax_rows(&z), &labels).unwrap();
    let h = 1e-6;
    for i in 0..z.len() {
        let mut hi = z.clone();
        hi.data_mut()[i] += h;
        let mut lo = z.clone();
        lo.data_mut()[i] -= h;
        let n = (cross_entropy(&softmax_rows(&hi), &labels).unwrap()
            - cross_entropy(&softmax_rows(&lo), &labels).unwrap())
            / (2.0 * h);
        assert!(rel_err(g.data()[i], n, GRAD_FLOOR) < 1e-6, "entry {i}");
    }
}
