//! Temporary diagnostics; deleted before shipping.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::f64::consts::PI;
use survanchor::clusterlib::{fit_mixture, k_sweep, EmOptions, MixtureKind, MixtureModel};
use survanchor::coxnet::mlp::FinalActivation;
use survanchor::coxnet::{train_model, TrainConfig};
use survanchor::data::{
    generate_synthetic, make_splits, SplitRole, SyntheticSpec, DEFAULT_CLASS_MEANS,
};

#[test]
#[ignore]
fn debug_violin_knee() {
    for seed in 0..20u64 {
        let base = 4000 + seed;
        let spec = SyntheticSpec {
            n: 800,
            dim: 10,
            class_means: DEFAULT_CLASS_MEANS[..4].to_vec(),
            time_variance: 1e-3,
            center_radius: 5.0,
            feature_spread: 1.0,
            censor_quantile: 0.9,
            seed: base,
        };
        let (dataset, labels) = generate_synthetic(&spec).unwrap();
        let plan = make_splits(dataset.n, [0.42, 0.14, 0.40, 0.04], base ^ 0x5eed).unwrap();
        let config = TrainConfig {
            batch_sizes: vec![64],
            learning_rates: vec![0.01],
            layer_counts: vec![1],
            embed_dims: vec![5],
            max_epochs: 30,
            patience: 30,
            final_activation: FinalActivation::UnitNorm,
            seed: base,
        };
        let output = train_model(&dataset, &plan, &config).unwrap();
        let anchor_rows = plan.indices(SplitRole::AnchorEstimation);
        let bundle = output
            .model
            .build_bundle(&dataset, &anchor_rows, "anchor_estimation");
        let (times, events) = bundle.labels().unwrap();
        let (times, events) = (times.to_vec(), events.to_vec());
        let opts = EmOptions {
            max_iter: 300,
            tol: 1e-6,
            seed: base,
        };
        let report = k_sweep(
            &bundle.embeddings,
            &times,
            &events,
            MixtureKind::Vmf,
            2,
            5,
            &opts,
        )
        .unwrap();
        let psis: Vec<(usize, f64, bool)> = report
            .entries
            .iter()
            .map(|e| (e.k, e.psi, e.converged))
            .collect();
        // Cluster composition at k=4: group counts and event counts.
        let fit = fit_mixture(&bundle.embeddings, 4, MixtureKind::Vmf, &opts).unwrap();
        let mut purity = Vec::new();
        for c in 0..4 {
            let mut counts = [0usize; 4];
            let mut ev = 0usize;
            for (pos, &a) in fit.assignments.iter().enumerate() {
                if a == c {
                    counts[labels[anchor_rows[pos]]] += 1;
                    ev += events[pos] as usize;
                }
            }
            purity.push(format!("g{counts:?}e{ev}"));
        }
        let k4_pairs: Vec<String> = report
            .entries
            .iter()
            .find(|e| e.k == 4)
            .map(|e| e.pairwise_p.iter().map(|p| format!("{p:.1e}")).collect())
            .unwrap_or_default();
        eprintln!("  k4 pairwise {k4_pairs:?}");
        let ok = psis.iter().all(|&(k, psi, _)| {
            if k <= 4 {
                psi < 1e-4
            } else {
                psi > 0.01
            }
        });
        eprintln!(
            "seed {seed}: {} psis {:?} k4 purity {:?} val_c {:.3}",
            if ok { "OK  " } else { "FAIL" },
            psis.iter()
                .map(|(k, p, c)| format!("k{k}={p:.2e}{}", if *c { "" } else { "!" }))
                .collect::<Vec<_>>(),
            purity,
            output.model.val_concordance,
        );
    }
}

#[test]
#[ignore]
fn debug_gaussian_recovery() {
    for seed in 0..20u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(3100 + seed);
        let dim = 5;
        let mut truth = vec![0.0; dim];
        truth[0] = 3.0;
        let normal = |rng: &mut ChaCha20Rng| -> f64 {
            let u1: f64 = rng.random_range(1e-12..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
        };
        let mut data = Vec::with_capacity(400);
        for sign in [1.0, -1.0] {
            for _ in 0..200 {
                let row: Vec<f64> = (0..dim)
                    .map(|j| sign * truth[j] + normal(&mut rng))
                    .collect();
                data.push(row);
            }
        }
        let opts = EmOptions {
            max_iter: 500,
            tol: 1e-6,
            seed: 3100 + seed,
        };
        let fit = match fit_mixture(&data, 2, MixtureKind::Gaussian, &opts) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("seed {seed}: fit error {e}");
                continue;
            }
        };
        let MixtureModel::Gaussian(components) = &fit.model else {
            unreachable!()
        };
        let neg_truth: Vec<f64> = truth.iter().map(|v| -v).collect();
        let dist = |a: &[f64], b: &[f64]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        let direct = dist(&components[0].mean, &truth).max(dist(&components[1].mean, &neg_truth));
        let swapped = dist(&components[0].mean, &neg_truth).max(dist(&components[1].mean, &truth));
        eprintln!(
            "seed {seed}: err {:.4} converged {} iters {} weights {:.3}/{:.3} m0[0] {:.3} m1[0] {:.3}",
            direct.min(swapped),
            fit.converged,
            fit.iterations,
            match &fit.model { MixtureModel::Gaussian(c) => c[0].weight, _ => 0.0 },
            match &fit.model { MixtureModel::Gaussian(c) => c[1].weight, _ => 0.0 },
            components[0].mean[0],
            components[1].mean[0],
        );
    }
}
