mod common;

use gabp_core::kernels::{assemble_kernel_rows, kernel_eval, kernel_matrix};
use gabp_core::{KernelFamily, KernelSpec, SamplePoint, Vector};
use proptest::prelude::*;

fn arb_point(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-5.0f64..5.0, dim).prop_map(|v| Vector::new(v).unwrap())
}

fn arb_family() -> impl Strategy<Value = KernelFamily> {
    prop_oneof![
        Just(KernelFamily::Linear),
        (0.01f64..5.0).prop_map(|gamma| KernelFamily::Rbf { gamma }),
        (1u32..4, 0.0f64..2.0).prop_map(|(degree, coef0)| KernelFamily::Polynomial { degree, coef0 }),
    ]
}

proptest! {
    #[test]
    fn kernel_is_symmetric(
        (a, b) in (1usize..6).prop_flat_map(|d| (arb_point(d), arb_point(d))),
        fam in arb_family(),
        bias in 0.0f64..2.0,
    ) {
        let k = KernelSpec::new(fam, bias).unwrap();
        prop_assert_eq!(kernel_eval(&k, &a, &b).unwrap(), kernel_eval(&k, &b, &a).unwrap());
    }

    #[test]
    fn bias_is_feature_augmentation(a in prop::collection::vec(-5.0f64..5.0, 3), b in prop::collection::vec(-5.0f64..5.0, 3), bias in 0.0f64..3.0) {
        let k = KernelSpec::linear(bias).unwrap();
        let direct = kernel_eval(&k, &Vector::new(a.clone()).unwrap(), &Vector::new(b.clone()).unwrap()).unwrap();
        let mut aa = a.clone();
        aa.push(bias);
        let mut bb = b.clone();
        bb.push(bias);
        let plain = KernelSpec::linear(0.0).unwrap();
        let augmented = kernel_eval(&plain, &Vector::new(aa).unwrap(), &Vector::new(bb).unwrap()).unwrap();
        prop_assert!((direct - augmented).abs() <= 1e-12 * (1.0 + direct.abs()));
    }

    #[test]
    fn row_blocks_concatenate_to_matrix(n in 1usize..20, cut in 0usize..20, gamma in 0.1f64..3.0, seed in any::<u64>()) {
        let cut = cut.min(n);
        let pts = gabp_core::synth::two_gaussians(&mut common::rng(seed), n, 2, 1.0);
        let k = KernelSpec::rbf(gamma, 0.5).unwrap();
        let full = kernel_matrix(&k, &pts).unwrap();
        let top = assemble_kernel_rows(&k, &pts, 0..cut).unwrap();
        let bottom = assemble_kernel_rows(&k, &pts, cut..n).unwrap();
        let mut joined = top.entries.clone();
        joined.extend_from_slice(&bottom.entries);
        prop_assert_eq!(joined.as_slice(), full.as_row_major());
    }
}

#[test]
fn rbf_gram_is_positive_definite() {
    let pts: Vec<SamplePoint> = (0..15)
        .map(|i| SamplePoint::labeled(vec![i as f64 * 0.37, (i * i) as f64 * 0.01], 1.0).unwrap())
        .collect();
    let k = kernel_matrix(&KernelSpec::rbf(1.0, 0.0).unwrap(), &pts).unwrap();
    assert!(gabp_core::numerics::direct_solve(&k, &Vector::ones(15)).is_ok());
}
