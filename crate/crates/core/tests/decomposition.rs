use latentfactor::decomposition::{
    all_orthogonality_deviation, hosvd, mean_center, orthonormality_deviation, relative_error,
    slice_energies, RANK_TOLERANCE,
};
use latentfactor::tensor::{mode_product, unfold, DenseTensor, Matrix};
use latentfactor::Error;
use proptest::prelude::*;

fn lcg_tensor(shape: Vec<usize>, seed: u64) -> DenseTensor {
    let mut state = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    DenseTensor::from_fn(shape, |_| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    })
    .unwrap()
}

fn shape5() -> impl Strategy<Value = Vec<usize>> {
    (1usize..24, 1usize..5, 1usize..5, 1usize..4, 1usize..3)
        .prop_map(|(d, p, e, i, r)| vec![d, p, e, i, r])
}

/// Mean over every cell, computed with explicit loops.
fn mean_oracle(t: &DenseTensor) -> Vec<f64> {
    let d = t.shape()[0];
    let cells = t.len() / d;
    (0..d)
        .map(|k| (0..cells).map(|c| t.data()[k + d * c]).sum::<f64>() / cells as f64)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn recomposition_is_exact(shape in shape5(), seed in any::<u64>()) {
        let t = lcg_tensor(shape, seed);
        let h = hosvd(&t).unwrap();
        prop_assert!(relative_error(&h.recompose().unwrap(), &t).unwrap() < 1e-10);
        for u in h.factors() {
            prop_assert!(orthonormality_deviation(u) < 1e-10);
        }
        prop_assert!(all_orthogonality_deviation(h.core()) < 1e-10);
    }

    #[test]
    fn singular_values_match_an_independent_svd(shape in shape5(), seed in any::<u64>()) {
        let t = lcg_tensor(shape, seed);
        let h = hosvd(&t).unwrap();
        let (centered, _) = mean_center(&t).unwrap();
        let scale = centered.frobenius_norm().max(1.0);
        for mode in 1..=5 {
            let mut reference: Vec<f64> = unfold(&centered, mode).unwrap().singular_values().iter().copied().collect();
            reference.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let got = &h.singular_values()[mode - 1];
            prop_assert!(got.windows(2).all(|w| w[0] >= w[1]));
            for (k, s) in got.iter().enumerate() {
                prop_assert!(*s >= 0.0);
                let r = reference.get(k).copied().unwrap_or(0.0);
                prop_assert!((s - r).abs() < 1e-9 * scale, "mode {} σ{}: {} vs {}", mode, k, s, r);
            }
            // Core slice energies along each mode are the squared singular values.
            let energy = slice_energies(h.core(), mode).unwrap();
            for (e, s) in energy.iter().zip(got) {
                prop_assert!((e - s * s).abs() < 1e-9 * scale * scale);
            }
        }
    }

    #[test]
    fn mean_is_the_cell_average(shape in shape5(), seed in any::<u64>()) {
        let t = lcg_tensor(shape, seed);
        let (centered, mean) = mean_center(&t).unwrap();
        let oracle = mean_oracle(&t);
        for (a, b) in mean.iter().zip(&oracle) {
            prop_assert!((a - b).abs() < 1e-14);
        }
        for v in mean_oracle(&centered) {
            prop_assert!(v.abs() < 1e-13);
        }
    }

    #[test]
    fn truncation_is_a_projection(seed in any::<u64>(), mode in 2usize..=5) {
        let t = lcg_tensor(vec![10, 4, 3, 4, 2], seed);
        let h = hosvd(&t).unwrap();
        let full = h.factor(mode).ncols();
        let keep = 1 + (seed as usize % full);
        let tr = h.truncate_factor(mode, keep).unwrap();
        prop_assert_eq!(tr.factor(mode).ncols(), keep);
        // Independent path: project the centered data onto the kept columns.
        let (centered, _) = mean_center(&t).unwrap();
        let mut s = centered;
        for m in 1..=5 {
            s = mode_product(&s, &tr.factor(m).transpose(), m).unwrap();
        }
        prop_assert!(relative_error(tr.core(), &s).unwrap() < 1e-10);
    }
}

#[test]
fn random_tensors_up_to_full_size() {
    for (k, shape) in [
        vec![64, 6, 6, 5, 2],
        vec![64, 5, 6, 5, 2],
        vec![33, 6, 2, 5, 2],
        vec![7, 6, 6, 5, 2],
    ]
    .into_iter()
    .enumerate()
    {
        let t = lcg_tensor(shape.clone(), k as u64);
        let h = hosvd(&t).unwrap();
        assert!(
            relative_error(&h.recompose().unwrap(), &t).unwrap() < 1e-8,
            "{shape:?}"
        );
        assert!(all_orthogonality_deviation(h.core()) < 1e-8);
        assert!(h
            .factors()
            .iter()
            .all(|u| orthonormality_deviation(u) < 1e-8));
    }
}

#[test]
fn tall_latent_mode_keeps_economy_factor() {
    // D = 40 > P·E·I·R = 12: U₁ has at most 12 columns.
    let t = lcg_tensor(vec![40, 2, 3, 2, 1], 3);
    let h = hosvd(&t).unwrap();
    assert_eq!(h.factor(1).nrows(), 40);
    assert_eq!(h.factor(1).ncols(), 12);
    assert_eq!(h.core().shape(), &[12, 2, 3, 2, 1]);
    assert!(relative_error(&h.recompose().unwrap(), &t).unwrap() < 1e-10);
    // Centering removes one dimension from the column space.
    assert_eq!(h.numerical_rank()[0], 11);
}

#[test]
fn rank_deficiency_is_flagged() {
    // Identical persons: every row of the person unfolding is the same, so
    // it has rank 1.
    let base = lcg_tensor(vec![6, 1, 3, 2, 2], 8);
    let t = DenseTensor::from_fn(vec![6, 4, 3, 2, 2], |i| {
        base.get(&[i[0], 0, i[2], i[3], i[4]])
    })
    .unwrap();
    let h = hosvd(&t).unwrap();
    assert_eq!(h.numerical_rank()[1], 1);
    let sv = &h.singular_values()[1];
    assert!(sv[1..].iter().all(|s| *s <= RANK_TOLERANCE * sv[0]));
    assert!(relative_error(&h.recompose().unwrap(), &t).unwrap() < 1e-12);
    assert!(!h.is_degenerate());
}

#[test]
fn constant_tensor_is_degenerate() {
    let t = DenseTensor::from_fn(vec![3, 2, 2, 2, 2], |i| i[0] as f64 + 0.5).unwrap();
    let h = hosvd(&t).unwrap();
    assert!(h.is_degenerate());
    assert_eq!(h.core().frobenius_norm(), 0.0);
    assert_eq!(relative_error(&h.recompose().unwrap(), &t).unwrap(), 0.0);
}

#[test]
fn invalid_inputs() {
    let t = lcg_tensor(vec![3, 2, 2], 1);
    assert!(matches!(hosvd(&t), Err(Error::InvalidShape(_))));
    let mut data = lcg_tensor(vec![3, 2, 2, 2, 2], 1).into_data();
    data[5] = f64::NAN;
    let t = DenseTensor::new(vec![3, 2, 2, 2, 2], data).unwrap();
    assert!(matches!(hosvd(&t), Err(Error::NonFinite(_))));
    let h = hosvd(&lcg_tensor(vec![3, 2, 2, 2, 2], 2)).unwrap();
    assert!(matches!(
        h.truncate_factor(4, 0),
        Err(Error::RankOutOfRange { .. })
    ));
    assert!(matches!(
        h.truncate_factor(4, 3),
        Err(Error::RankOutOfRange { .. })
    ));
    assert!(matches!(
        h.truncate_factor(6, 1),
        Err(Error::ModeOutOfRange { .. })
    ));
}

#[test]
fn factor_signs_are_canonical() {
    let h = hosvd(&lcg_tensor(vec![8, 3, 3, 3, 2], 11)).unwrap();
    for u in h.factors() {
        for col in u.column_iter() {
            let (best, _) = col.iter().enumerate().fold((0, -1.0), |acc, (i, v)| {
                if v.abs() > acc.1 {
                    (i, v.abs())
                } else {
                    acc
                }
            });
            assert!(col[best] >= 0.0);
        }
    }
    // Deterministic: the same input gives bitwise the same factors.
    let again = hosvd(&lcg_tensor(vec![8, 3, 3, 3, 2], 11)).unwrap();
    assert_eq!(h.factors(), again.factors());
    let _: &Matrix = h.factor(1);
}
