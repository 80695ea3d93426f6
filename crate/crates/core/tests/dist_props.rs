mod common;

use std::ops::Range;
use std::sync::Mutex;

use common::{dominant_system, rng};
use gabp_core::dist::{
    allreduce_sum, make_partition, run_distributed, solve_distributed, train_distributed, AllreduceGroup,
    DistConfig, ExecutionMode, MatrixRows, RowSource,
};
use gabp_core::gabp::run_broadcast;
use gabp_core::kernels::RowBlock;
use gabp_core::svm::{predict, LoadingMode, TrainConfig};
use gabp_core::synth::two_gaussians;
use gabp_core::{GabpProblem, KernelSpec, Result, Variant};
use proptest::prelude::*;
use rand::Rng;

/// Wraps a source and records every range requested.
struct Recording<'a> {
    inner: MatrixRows<'a>,
    requests: Mutex<Vec<Range<usize>>>,
}

impl RowSource for Recording<'_> {
    fn order(&self) -> usize {
        self.inner.order()
    }

    fn rows(&self, range: Range<usize>) -> Result<RowBlock> {
        self.requests.lock().unwrap().push(range.clone());
        self.inner.rows(range)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_covers_rows_once(n in 1usize..500, p in 1usize..64) {
        prop_assume!(p <= n);
        let part = make_partition(n, p).unwrap();
        let mut next = 0;
        for r in &part.ranges {
            prop_assert_eq!(r.start, next);
            prop_assert!(r.len() == n / p || r.len() == n / p + 1);
            next = r.end;
        }
        prop_assert_eq!(next, n);
    }

    #[test]
    fn any_worker_count_reproduces_single_process_bits(seed in any::<u64>(), n in 2usize..60, p in 1usize..9, threaded in any::<bool>()) {
        prop_assume!(p <= n);
        let (w, b) = dominant_system(seed, n);
        let problem = GabpProblem::new(w, b).unwrap().with_variant(Variant::Broadcast).with_epsilon(1e-9);
        let reference = run_broadcast(&problem).unwrap();
        let mode = if threaded { ExecutionMode::Threaded } else { ExecutionMode::Serial };
        let run = solve_distributed(&problem, p, mode).unwrap();
        prop_assert_eq!(&run.solution, &reference);
        for means in &run.worker_means {
            prop_assert_eq!(means, &reference.means);
        }
        prop_assert_eq!(run.telemetry.len(), reference.iterations_used);
        for t in &run.telemetry {
            prop_assert_eq!(t.reduced_scalars, 2 * n);
        }
    }

    #[test]
    fn workers_only_touch_their_rows(seed in any::<u64>(), n in 2usize..40, p in 1usize..6) {
        prop_assume!(p <= n);
        let (w, b) = dominant_system(seed, n);
        let source = Recording { inner: MatrixRows(&w), requests: Mutex::new(Vec::new()) };
        let mut config = DistConfig::new(p);
        config.power_iters = Some(10);
        run_distributed(&source, &b, &config).unwrap();
        let mut requested = source.requests.into_inner().unwrap();
        requested.sort_by_key(|r| r.start);
        prop_assert_eq!(requested, make_partition(n, p).unwrap().ranges);
    }

    #[test]
    fn threaded_allreduce_is_bitwise_repeatable(seed in any::<u64>(), p in 1usize..6, len in 1usize..50) {
        let mut r = rng(seed);
        let parts: Vec<Vec<f64>> = (0..p)
            .map(|_| (0..len).map(|_| r.gen_range(-1e6..1e6) * r.gen_range(-1e-6..1e6)).collect())
            .collect();
        let expected = allreduce_sum(&parts).unwrap();
        let group = AllreduceGroup::new(p);
        let results: Vec<Vec<f64>> = std::thread::scope(|s| {
            let hs: Vec<_> = parts
                .iter()
                .enumerate()
                .map(|(rank, v)| {
                    let group = &group;
                    s.spawn(move || (0..3).map(|_| group.sum(rank, v).unwrap()).last().unwrap())
                })
                .collect();
            hs.into_iter().map(|h| h.join().unwrap()).collect()
        });
        for got in results {
            prop_assert_eq!(got.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                expected.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }
}

#[test]
fn distributed_training_matches_single_process() {
    let pts = two_gaussians(&mut rng(5), 120, 4, 1.5);
    let mut config = TrainConfig::new(KernelSpec::rbf(1.0, 1.0 / 120.0).unwrap());
    config.loading = LoadingMode::EnforceDominance;
    config.cost_c = 1.0 / 120.0;
    let single = gabp_core::svm::train(&pts, &config).unwrap();
    for p in [1, 3, 8] {
        let (model, run) = train_distributed(&pts, &config, p, ExecutionMode::Threaded).unwrap();
        assert_eq!(model.weights, single.weights);
        assert_eq!(model.diagnostics, single.diagnostics);
        assert!(run.telemetry.iter().all(|t| t.reduced_scalars == 240));
        assert_eq!(
            predict(&model, &pts).unwrap().labels,
            predict(&single, &pts).unwrap().labels
        );
    }
}
