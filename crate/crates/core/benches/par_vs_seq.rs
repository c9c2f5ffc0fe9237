//! Compares the data-parallel core against the sequential fallback.
//!
//! Build once with the default `parallel` feature and once without it to
//! compare the two compiled code paths:
//!
//! ```text
//! cargo bench -p qpoly-core
//! cargo bench -p qpoly-core --no-default-features
//! ```
//!
//! With the feature enabled, each workload is additionally pinned to a
//! one-thread rayon pool so a single run already shows the scheduling
//! overhead versus multi-thread speedup on the host.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qpoly_core::activations::ActivationKind;
use qpoly_core::nn::{compute_gradients, conv_forward, CnnConfig, CnnModel};
use qpoly_core::qcpn::{gen_dataset, qcpn_loss_grads, HybridQcpn, RegressionSet, Target};
use qpoly_core::tensor::Tensor;

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

fn random_images(seed: u64, batch: usize, h: usize, w: usize) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(
        vec![batch, h, w],
        (0..batch * h * w).map(|_| rng.gen_range(0.0..1.0)).collect(),
    )
    .unwrap()
}

/// Run `f` in the given execution mode: the current (possibly parallel)
/// scheduler, or a one-thread rayon pool when the feature is enabled.
fn run_modes<F: Fn() + Sync>(c: &mut Criterion, name: &str, f: F) {
    c.bench_function(&format!("{name}/{MODE}"), |b| b.iter(&f));
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        c.bench_function(&format!("{name}/one-thread-pool"), |b| {
            b.iter(|| pool.install(&f))
        });
    }
}

fn bench_conv_forward(c: &mut Criterion) {
    let model = CnnModel::new(CnnConfig::standard(ActivationKind::Af3), 1).unwrap();
    let images = random_images(2, 32, 28, 28);
    run_modes(c, "conv_forward_32x28x28", || {
        conv_forward(&model, &images).unwrap();
    });
}

fn bench_compute_gradients(c: &mut Criterion) {
    let model = CnnModel::new(CnnConfig::standard(ActivationKind::Af3), 3).unwrap();
    let images = random_images(4, 32, 28, 28);
    let labels: Vec<u8> = (0..32).map(|i| (i % 10) as u8).collect();
    run_modes(c, "cnn_gradients_batch32", || {
        compute_gradients(&model, &images, &labels).unwrap();
    });
}

fn bench_qcpn_loss_grads(c: &mut Criterion) {
    let (train, _): (RegressionSet, RegressionSet) =
        gen_dataset(Target::P5, 2000, 10, Target::P5.default_domain(), 5).unwrap();
    let model = HybridQcpn::new(1, 12, 2, 6).unwrap();
    let idx: Vec<usize> = (0..train.len()).collect();
    run_modes(c, "qcpn_loss_grads_2000", || {
        qcpn_loss_grads(&model, &train, &idx).unwrap();
    });
}

fn config() -> Criterion {
    Criterion::default().sample_size(10)
}

criterion_group! {
    name = benches;
    config = config();
    targets = bench_conv_forward, bench_compute_gradients, bench_qcpn_loss_grads
}
criterion_main!(benches);
