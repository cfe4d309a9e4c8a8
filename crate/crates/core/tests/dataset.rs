use latentfactor::container::{write_container, Record};
use latentfactor::dataset::{
    generate_synthetic, load_bu3dfe_layout, load_dataset, validate_bu3dfe, AxisLabels, GridLayout,
    LatentDataset, LatentLayout, SyntheticSpec, BU3DFE_EXPRESSIONS,
};
use latentfactor::decomposition::{hosvd, relative_error};
use latentfactor::tensor::DenseTensor;
use latentfactor::Error;

#[test]
fn generator_is_deterministic_per_seed() {
    let spec = SyntheticSpec::new([16, 3, 6, 5, 2], 42).with_noise(0.1);
    let (a, ta) = generate_synthetic(&spec).unwrap();
    let (b, tb) = generate_synthetic(&spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let (c, _) =
        generate_synthetic(&SyntheticSpec::new([16, 3, 6, 5, 2], 43).with_noise(0.1)).unwrap();
    assert_ne!(a.latents().data(), c.latents().data());
}

#[test]
fn generator_follows_its_planted_formula() {
    let spec = SyntheticSpec::new([5, 2, 3, 4, 2], 7);
    let (ds, t) = generate_synthetic(&spec).unwrap();
    // Centered expression offsets.
    let sum = t
        .expression_offsets
        .iter()
        .fold(nalgebra::DVector::zeros(5), |a, v| a + v);
    assert!(sum.norm() < 1e-12);
    assert_eq!(t.rotation_signs, vec![1.0, -1.0]);
    for (cell, fiber) in ds.cells() {
        let [p, e, i, r] = cell;
        for (k, &value) in fiber.iter().enumerate() {
            let expected = t.base[k]
                + t.person_offsets[p][k]
                + t.intensity_ramp[i] * t.expression_offsets[e][k]
                + t.rotation_signs[r] * t.rotation_offset[k];
            assert!((value - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn noiseless_synthetic_data_recomposes_exactly() {
    for (dims, seed) in [
        ([16, 4, 6, 5, 2], 0),
        ([64, 3, 6, 5, 2], 1),
        ([9, 2, 2, 3, 1], 2),
    ] {
        let (ds, _) = generate_synthetic(&SyntheticSpec::new(dims, seed)).unwrap();
        let h = hosvd(ds.latents()).unwrap();
        assert!(relative_error(&h.recompose().unwrap(), ds.latents()).unwrap() < 1e-8);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(
        generate_synthetic(&SyntheticSpec::new([4, 0, 2, 2, 2], 0)),
        Err(Error::InvalidConfig(_))
    ));
    assert!(generate_synthetic(&SyntheticSpec::new([4, 2, 2, 2, 2], 0).with_noise(-1.0)).is_err());
    let mut spec = SyntheticSpec::new([4, 2, 2, 3, 2], 0);
    spec.intensity_ramp = Some(vec![0.0, 1.0]);
    assert!(generate_synthetic(&spec).is_err());
}

fn bu3dfe_dataset(d: usize, p: usize) -> LatentDataset {
    generate_synthetic(&SyntheticSpec::new([d, p, 6, 5, 2], 3))
        .unwrap()
        .0
}

#[test]
fn full_size_bu3dfe_grid_is_accepted() {
    // Validation depends only on the grid axes, so a small D suffices for
    // the full 100-person layout.
    let ds = bu3dfe_dataset(4, 100);
    validate_bu3dfe(&ds).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.ltc");
    write_container(&Record::Dataset(ds.clone()), &path).unwrap();
    let loaded = load_bu3dfe_layout(&path).unwrap();
    assert_eq!(loaded.dims(), [4, 100, 6, 5, 2]);
    assert_eq!(
        loaded.labels().expressions,
        BU3DFE_EXPRESSIONS.map(String::from).to_vec()
    );
}

#[test]
fn wrong_rotation_count_is_rejected() {
    let (ds, _) = generate_synthetic(&SyntheticSpec::new([4, 3, 6, 5, 3], 0)).unwrap();
    let err = validate_bu3dfe(&ds).unwrap_err();
    assert!(matches!(err, Error::Layout(_)));
    assert!(err.to_string().contains("rotation"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r3.ltc");
    write_container(&Record::Dataset(ds), &path).unwrap();
    assert!(matches!(load_bu3dfe_layout(&path), Err(Error::Layout(_))));
    assert!(load_dataset(&path, GridLayout::Any).is_ok());
}

#[test]
fn permuted_labels_are_rejected_by_name() {
    let ds = bu3dfe_dataset(4, 2);
    let mut labels = ds.labels().clone();
    labels.expressions.swap(0, 3);
    let swapped = LatentDataset::new(ds.latents().clone(), labels.clone(), ds.layout()).unwrap();
    let err = validate_bu3dfe(&swapped).unwrap_err().to_string();
    assert!(err.contains(&labels.expressions[0]), "{err}");
    assert!(err.contains(BU3DFE_EXPRESSIONS[0]), "{err}");

    let mut labels = ds.labels().clone();
    labels.intensities.reverse();
    let reversed = LatentDataset::new(ds.latents().clone(), labels, ds.layout()).unwrap();
    let err = validate_bu3dfe(&reversed).unwrap_err().to_string();
    assert!(err.contains("intensity") && err.contains("\"4\""), "{err}");
}

#[test]
fn dataset_invariants() {
    let t = DenseTensor::zeros(vec![4, 2, 2, 2, 2]).unwrap();
    assert!(matches!(
        LatentDataset::new(
            t.clone(),
            AxisLabels::numbered(2, 2, 2, 3),
            LatentLayout::flat(4)
        ),
        Err(Error::Layout(_))
    ));
    assert!(matches!(
        LatentDataset::new(
            t.clone(),
            AxisLabels::numbered(2, 2, 2, 2),
            LatentLayout::flat(5)
        ),
        Err(Error::Layout(_))
    ));
    let mut data = t.into_data();
    data[3] = f64::INFINITY;
    let t = DenseTensor::new(vec![4, 2, 2, 2, 2], data).unwrap();
    assert!(matches!(
        LatentDataset::new(t, AxisLabels::numbered(2, 2, 2, 2), LatentLayout::flat(4)),
        Err(Error::NonFinite(_))
    ));
}

#[test]
fn layout_is_inferred_from_dimension() {
    assert_eq!(LatentLayout::infer(18 * 512).num_style_vectors, 18);
    assert_eq!(LatentLayout::infer(18 * 512).style_dim, 512);
    assert_eq!(LatentLayout::infer(7).dim(), 7);
}

#[test]
fn holding_out_a_person_partitions_the_data() {
    let ds = bu3dfe_dataset(6, 4);
    let (kept, held) = ds.hold_out_person(2).unwrap();
    assert_eq!(kept.dims(), [6, 3, 6, 5, 2]);
    assert_eq!(held.dims(), [6, 1, 6, 5, 2]);
    assert_eq!(held.labels().persons, vec![ds.labels().persons[2].clone()]);
    assert!(!kept.labels().persons.contains(&ds.labels().persons[2]));
    for (cell, fiber) in held.cells() {
        let orig = ds.latent([2, cell[1], cell[2], cell[3]]).unwrap();
        assert_eq!(fiber, orig.as_slice());
    }
    for (cell, fiber) in kept.cells() {
        let p = if cell[0] >= 2 { cell[0] + 1 } else { cell[0] };
        assert_eq!(
            fiber,
            ds.latent([p, cell[1], cell[2], cell[3]])
                .unwrap()
                .as_slice()
        );
    }
    assert!(ds.hold_out_person(4).is_err());
    let (single, _) = generate_synthetic(&SyntheticSpec::new([3, 1, 2, 2, 2], 0)).unwrap();
    assert!(single.hold_out_person(0).is_err());
}

#[test]
fn labels_resolve_by_name_or_index() {
    let ds = bu3dfe_dataset(3, 2);
    let l = ds.labels();
    assert_eq!(l.resolve(3, BU3DFE_EXPRESSIONS[4]).unwrap(), 4);
    assert_eq!(l.resolve(5, "right").unwrap(), 1);
    assert_eq!(l.resolve(4, "3").unwrap(), 3);
    assert!(matches!(l.resolve(3, "boredom"), Err(Error::Layout(_))));
    assert!(l.resolve(6, "x").is_err());
}

#[test]
fn batch_names_follow_cells() {
    let ds = bu3dfe_dataset(3, 2);
    let b = ds.to_batch();
    assert_eq!(b.len(), 2 * 6 * 5 * 2);
    assert_eq!(
        b.names[0],
        format!("person000/{}/0/left", BU3DFE_EXPRESSIONS[0])
    );
    assert_eq!(
        b.latents[1].as_slice(),
        ds.latent([1, 0, 0, 0]).unwrap().as_slice()
    );
}
