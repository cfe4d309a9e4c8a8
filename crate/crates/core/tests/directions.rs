use latentfactor::dataset::{
    generate_synthetic, AxisLabels, LatentDataset, LatentLayout, SyntheticSpec,
};
use latentfactor::decomposition::ROTATION_MODE;
use latentfactor::directions::{
    all_directions, apply_edit, direction_orthogonality_report, expression_direction,
    rotation_direction, rotation_parameter, DirectionKind, EditRequest, SemanticDirection, YAW,
};
use latentfactor::pipeline::{fit, Fit};
use latentfactor::tensor::{DenseTensor, Matrix};
use latentfactor::Error;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b) / (a.norm() * b.norm())
}

fn fitted(ds: &LatentDataset) -> Fit {
    fit(ds).unwrap()
}

/// `w = base + person_p + i·c_e + s(r)·d_rot` where `c_e` are orthogonal
/// offsets centered across expressions and `d_rot` lives on other
/// coordinates, so every cosine is known exactly.
fn orthogonal_grid(
    p: usize,
    e: usize,
    i: usize,
) -> (LatentDataset, Vec<DVector<f64>>, DVector<f64>) {
    let d = 32;
    let unit = |k: usize| DVector::from_fn(d, |j, _| if j == k { 1.0 } else { 0.0 });
    let d_e: Vec<DVector<f64>> = (0..e).map(|k| unit(k) * 2.0).collect();
    let c_e = centered(&d_e);
    let d_rot = unit(10) * 1.5;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = DVector::from_fn(d, |j, _| if j >= 20 { rng.gen::<f64>() } else { 0.0 });
    let persons: Vec<DVector<f64>> = (0..p)
        .map(|k| {
            DVector::from_fn(d, |j, _| {
                if j >= 20 {
                    (j * (k + 1)) as f64 * 0.01
                } else {
                    0.0
                }
            })
        })
        .collect();
    let t = DenseTensor::from_fn(vec![d, p, e, i, 2], |idx| {
        let sign = if idx[4] == 0 { 1.0 } else { -1.0 };
        base[idx[0]]
            + persons[idx[1]][idx[0]]
            + idx[3] as f64 * c_e[idx[2]][idx[0]]
            + sign * d_rot[idx[0]]
    })
    .unwrap();
    let ds =
        LatentDataset::new(t, AxisLabels::for_grid(p, e, i, 2), LatentLayout::flat(d)).unwrap();
    (ds, d_e, d_rot)
}

fn centered(offsets: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mean = offsets
        .iter()
        .fold(DVector::zeros(offsets[0].len()), |a, v| a + v)
        / offsets.len() as f64;
    offsets.iter().map(|v| v - &mean).collect()
}

#[test]
fn planted_offsets_are_recovered() {
    for (seed, dims) in [
        (1, [64, 5, 6, 5, 2]),
        (2, [40, 4, 3, 4, 2]),
        (3, [128, 6, 6, 5, 2]),
    ] {
        let (ds, truth) = generate_synthetic(&SyntheticSpec::new(dims, seed)).unwrap();
        let f = fitted(&ds);
        let dirs = f.directions().unwrap();
        assert_eq!(dirs.len(), dims[2] + 1);
        for (e, d) in truth.expression_offsets.iter().enumerate() {
            let c = cosine(dirs[e].vector(), d);
            assert!(c > 0.99, "{dims:?} expression {e}: cosine {c}");
        }
        let yaw = dirs.last().unwrap();
        assert_eq!(yaw.name(), YAW);
        let c = cosine(yaw.vector(), &truth.rotation_offset);
        // Positive strength moves toward the first rotation, which carries +d_rot.
        assert!(c > 0.99, "{dims:?} yaw cosine {c}");
    }
}

#[test]
fn orthogonal_offsets_give_known_cosines() {
    let (ds, d_e, d_rot) = orthogonal_grid(3, 4, 4);
    let f = fitted(&ds);
    let dirs = f.directions().unwrap();
    let c_e = centered(&d_e);
    for e in 0..4 {
        assert!(cosine(dirs[e].vector(), &c_e[e]) > 1.0 - 1e-9);
    }
    assert!(cosine(dirs[4].vector(), &d_rot) > 1.0 - 1e-9);
    let report = direction_orthogonality_report(&dirs).unwrap();
    // Centering equal-norm orthogonal offsets leaves pairwise cosine −1/(E−1).
    for a in 0..4 {
        for b in 0..4 {
            let expected = if a == b { 1.0 } else { -1.0 / 3.0 };
            assert!((report[(a, b)] - expected).abs() < 1e-9);
        }
        assert!(report[(a, 4)].abs() < 0.05);
        assert_eq!(report[(a, 4)], report[(4, a)]);
    }
}

#[test]
fn identical_expressions_give_identical_directions() {
    let (ds, _) =
        generate_synthetic(&SyntheticSpec::new([24, 4, 4, 3, 2], 5).with_noise(0.1)).unwrap();
    let src = ds.latents();
    let t = DenseTensor::from_fn(src.shape().to_vec(), |i| {
        let mut j = i.to_vec();
        if j[2] == 1 {
            j[2] = 0;
        }
        src.get(&j)
    })
    .unwrap();
    let ds = LatentDataset::new(t, ds.labels().clone(), ds.layout()).unwrap();
    let f = fitted(&ds);
    let a = expression_direction(&f.truncated, &f.model, 0).unwrap();
    let b = expression_direction(&f.truncated, &f.model, 1).unwrap();
    assert!((a.vector() - b.vector()).amax() < 1e-8 * a.vector().amax());
}

#[test]
fn directions_scale_with_the_data() {
    let (ds, _) =
        generate_synthetic(&SyntheticSpec::new([24, 3, 4, 3, 2], 6).with_noise(0.1)).unwrap();
    let f = fitted(&ds);
    let base = f.directions().unwrap();
    for alpha in [2.5, -0.5] {
        let scaled = DenseTensor::new(
            ds.latents().shape().to_vec(),
            ds.latents().data().iter().map(|v| v * alpha).collect(),
        )
        .unwrap();
        let ds2 = LatentDataset::new(scaled, ds.labels().clone(), ds.layout()).unwrap();
        let dirs = fitted(&ds2).directions().unwrap();
        for (a, b) in base.iter().zip(&dirs) {
            let expected = a.vector() * alpha;
            assert!(
                (b.vector() - &expected).amax() < 1e-9 * expected.amax(),
                "{} alpha {alpha}",
                a.name()
            );
        }
    }
}

#[test]
fn swapping_rotations_negates_yaw() {
    let (ds, _) =
        generate_synthetic(&SyntheticSpec::new([24, 3, 4, 3, 2], 7).with_noise(0.1)).unwrap();
    let src = ds.latents();
    let t = DenseTensor::from_fn(src.shape().to_vec(), |i| {
        let mut j = i.to_vec();
        j[4] = 1 - j[4];
        src.get(&j)
    })
    .unwrap();
    let mut labels = ds.labels().clone();
    labels.rotations.reverse();
    let swapped = LatentDataset::new(t, labels, ds.layout()).unwrap();
    let a = fitted(&ds);
    let b = fitted(&swapped);
    let ya = rotation_direction(&a.truncated, &a.model).unwrap();
    let yb = rotation_direction(&b.truncated, &b.model).unwrap();
    assert!((ya.vector() + yb.vector()).amax() < 1e-9 * ya.vector().amax());
    // Edits agree: +β on one model equals −β on the other.
    let w = DVector::from_element(24, 0.3);
    let ea = apply_edit(&EditRequest {
        latent: &w,
        direction: &ya,
        strength: 1.7,
    })
    .unwrap();
    let eb = apply_edit(&EditRequest {
        latent: &w,
        direction: &yb,
        strength: -1.7,
    })
    .unwrap();
    assert!((ea - eb).amax() < 1e-9);
}

#[test]
fn rotation_parameter_has_unit_norm() {
    let (ds, _) =
        generate_synthetic(&SyntheticSpec::new([16, 3, 3, 3, 2], 8).with_noise(0.2)).unwrap();
    let m = fitted(&ds).model;
    let q = rotation_parameter(m.factor(ROTATION_MODE).unwrap()).unwrap();
    assert!((q.norm() - 1.0).abs() < 1e-10);
    for theta in [0.1f64, 1.0, 2.5, -0.7] {
        let (s, c) = theta.sin_cos();
        let u = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!((rotation_parameter(&u).unwrap().norm() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn yaw_requires_two_rotations() {
    let (ds, _) =
        generate_synthetic(&SyntheticSpec::new([16, 3, 3, 3, 3], 9).with_noise(0.1)).unwrap();
    let f = fitted(&ds);
    assert!(matches!(
        rotation_direction(&f.truncated, &f.model),
        Err(Error::Unsupported(_))
    ));
    // Expression directions still exist; yaw is skipped.
    let dirs = all_directions(&f.truncated, &f.model).unwrap();
    assert_eq!(dirs.len(), 3);
    assert!(dirs.iter().all(|d| d.kind() == DirectionKind::Expression));
    assert!(matches!(
        expression_direction(&f.truncated, &f.model, 3),
        Err(Error::IndexOutOfRange { .. })
    ));
}

#[test]
fn degenerate_model_yields_no_direction() {
    let t = DenseTensor::from_fn(vec![4, 2, 2, 2, 2], |i| i[0] as f64).unwrap();
    let ds =
        LatentDataset::new(t, AxisLabels::for_grid(2, 2, 2, 2), LatentLayout::flat(4)).unwrap();
    let f = fitted(&ds);
    assert!(matches!(
        expression_direction(&f.truncated, &f.model, 0),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn directions_carry_the_model_fingerprint() {
    let (ds, _) =
        generate_synthetic(&SyntheticSpec::new([16, 3, 3, 3, 2], 10).with_noise(0.1)).unwrap();
    let f = fitted(&ds);
    let fp = latentfactor::container::model_fingerprint(&f.model);
    assert!(f
        .directions()
        .unwrap()
        .iter()
        .all(|d| d.model_fingerprint() == fp));
    let (ds2, _) =
        generate_synthetic(&SyntheticSpec::new([16, 3, 3, 3, 2], 11).with_noise(0.1)).unwrap();
    assert_ne!(
        latentfactor::container::model_fingerprint(&fitted(&ds2).model),
        fp
    );
}

fn random_direction(rng: &mut ChaCha8Rng, d: usize) -> SemanticDirection {
    let v = DVector::from_fn(d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    SemanticDirection::new("r", DirectionKind::Expression, v, 0).unwrap()
}

#[test]
fn edit_algebra_on_random_latents() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let d = rng.gen_range(1..64);
        let w = DVector::from_fn(d, |_, _| rng.gen::<f64>() * 10.0 - 5.0);
        let dir = random_direction(&mut rng, d);
        let (s1, s2) = (rng.gen::<f64>() * 6.0 - 3.0, rng.gen::<f64>() * 6.0 - 3.0);
        let edit = |w: &DVector<f64>, s: f64| {
            apply_edit(&EditRequest {
                latent: w,
                direction: &dir,
                strength: s,
            })
            .unwrap()
        };
        let same = edit(&w, 0.0);
        assert!(same
            .iter()
            .zip(w.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        let back = edit(&edit(&w, s1), -s1);
        assert!((back - &w).amax() < 1e-12);
        let twice = edit(&edit(&w, s1), s2);
        let once = edit(&w, s1 + s2);
        assert!((twice - once).amax() < 1e-12);
    }
}

proptest! {
    #[test]
    fn one_direction_serves_every_latent(seed in any::<u64>(), s in -4.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dir = random_direction(&mut rng, 16);
        for _ in 0..8 {
            let w = DVector::from_fn(16, |_, _| rng.gen::<f64>());
            let edited = apply_edit(&EditRequest { latent: &w, direction: &dir, strength: s }).unwrap();
            let by_hand = DVector::from_fn(16, |i, _| w[i] + s * dir.vector()[i]);
            prop_assert!(edited.iter().zip(by_hand.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
