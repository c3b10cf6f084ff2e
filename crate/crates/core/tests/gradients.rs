use fedte_core::nn::{Batch, InputShape, Layer, ModelSpec, Network, ParamVector};
use fedte_core::penalty::PenaltyTerm;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random small architecture with at most 200 parameters.
fn random_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    loop {
        let side = rng.random_range(3..=6);
        let input = InputShape::new(rng.random_range(1..=2), side, side);
        let mut layers = Vec::new();
        let mut spatial = side;
        if rng.random_bool(0.7) {
            let kernel = rng.random_range(1..=3.min(spatial));
            layers.push(Layer::Conv {
                out_channels: rng.random_range(1..=3),
                kernel,
                relu: rng.random_bool(0.8),
            });
            spatial = spatial - kernel + 1;
        }
        if spatial >= 2 && rng.random_bool(0.5) {
            layers.push(Layer::MaxPool { size: 2, stride: 2 });
        }
        if rng.random_bool(0.5) {
            layers.push(Layer::Dense {
                units: rng.random_range(2..=5),
                relu: true,
            });
        }
        layers.push(Layer::Dense {
            units: rng.random_range(2..=4),
            relu: false,
        });
        let spec = ModelSpec::new(input, layers).unwrap();
        if spec.param_count() <= 200 {
            return spec;
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn objective(net: &Network<f64>, batch: &Batch<f64>, penalty: &PenaltyTerm<f64>) -> f64 {
    net.loss_and_grad(batch, penalty).unwrap().0
}

/// Relative error `|a - n| / max(|a|, |n|)` of the analytic gradient `a`
/// against central differences `n`, in the Euclidean norm.
fn check(seed: u64, which: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = random_spec(&mut rng);
    let p = spec.param_count();
    let params: ParamVector<f64> = uniform(&mut rng, p, -1.0, 1.0).into();
    let b = rng.random_range(1..=3);
    let inputs = uniform(&mut rng, b * spec.input().volume(), 0.0, 1.0);
    let labels = (0..b).map(|_| rng.random_range(0..spec.classes())).collect();
    let batch = Batch::new(inputs, labels, spec.input()).unwrap();
    let target: ParamVector<f64> = uniform(&mut rng, p, -1.0, 1.0).into();
    let alpha = rng.random_range(0.01..2.0);
    let penalty = match which {
        0 => PenaltyTerm::None,
        1 => PenaltyTerm::prox(alpha, target).unwrap(),
        _ => PenaltyTerm::fisher_diag(alpha, target, uniform(&mut rng, p, 0.0, 3.0).into()).unwrap(),
    };

    let mut net = Network::with_params(spec, params.clone()).unwrap();
    let analytic = net.loss_and_grad(&batch, &penalty).unwrap().1;
    let h = 1e-6;
    let mut numeric = vec![0.0; p];
    for i in 0..p {
        let mut plus = params.clone();
        plus[i] += h;
        net.set_params(plus).unwrap();
        let fp = objective(&net, &batch, &penalty);
        let mut minus = params.clone();
        minus[i] -= h;
        net.set_params(minus).unwrap();
        let fm = objective(&net, &batch, &penalty);
        numeric[i] = (fp - fm) / (2.0 * h);
    }
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(&numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn data_loss_gradient_matches_finite_differences(seed in any::<u64>()) {
        prop_assert!(check(seed, 0) < 1e-4);
    }

    #[test]
    fn prox_objective_gradient_matches_finite_differences(seed in any::<u64>()) {
        prop_assert!(check(seed, 1) < 1e-4);
    }

    #[test]
    fn fisher_objective_gradient_matches_finite_differences(seed in any::<u64>()) {
        prop_assert!(check(seed, 2) < 1e-4);
    }
}
