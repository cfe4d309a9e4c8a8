use latentfactor::container::{
    decode, encode, read_container, write_container, write_container_with, ContainerError,
    Precision, Record, RecordKind, MAGIC, VERSION,
};
use latentfactor::dataset::{
    generate_synthetic, AxisLabels, LatentBatch, LatentDataset, LatentLayout, SyntheticSpec,
};
use latentfactor::tensor::DenseTensor;
use latentfactor::{fit, Error};
use nalgebra::DVector;
use proptest::prelude::*;

fn fitted(seed: u64) -> latentfactor::Fit {
    let (ds, _) =
        generate_synthetic(&SyntheticSpec::new([12, 3, 6, 5, 2], seed).with_noise(0.01)).unwrap();
    fit(&ds).unwrap()
}

fn sample_records() -> Vec<Record> {
    let (ds, _) = generate_synthetic(&SyntheticSpec::new([8, 2, 3, 2, 2], 5)).unwrap();
    let f = fitted(1);
    let dir = f.directions().unwrap().remove(0);
    vec![
        Record::Dataset(ds.clone()),
        Record::Model(f.model.clone()),
        Record::Direction(dir),
        Record::Latents(ds.to_batch()),
    ]
}

fn is_container_err(e: &Error, pred: impl Fn(&ContainerError) -> bool) -> bool {
    matches!(e, Error::Container(c) if pred(c))
}

/// Every value of a record, in encoding order.
fn values(r: &Record) -> Vec<f64> {
    match r {
        Record::Dataset(d) => d.latents().data().to_vec(),
        Record::Model(m) => {
            let mut v = m.mean_latent().as_slice().to_vec();
            v.extend_from_slice(m.core().data());
            for u in m.factors() {
                v.extend_from_slice(u.as_slice());
            }
            v
        }
        Record::Direction(d) => d.vector().as_slice().to_vec(),
        Record::Latents(b) => b.latents.iter().flat_map(|w| w.iter().copied()).collect(),
    }
}

#[test]
fn header_layout() {
    for r in sample_records() {
        let bytes = encode(&r, r.default_precision());
        assert_eq!(&bytes[..4], &MAGIC);
        assert_eq!(bytes[4], VERSION);
        assert_eq!(bytes[5], r.kind() as u8);
        assert_eq!(bytes[6], r.default_precision() as u8);
        assert_eq!(bytes[7], 0);
        let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 16 + n + 8);
    }
    assert_eq!(RecordKind::Dataset as u8, 1);
    assert_eq!(RecordKind::Model as u8, 2);
    assert_eq!(RecordKind::Direction as u8, 3);
    assert_eq!(RecordKind::Latents as u8, 4);
}

#[test]
fn full_precision_round_trip_is_bitwise() {
    for r in sample_records() {
        let back = decode(&encode(&r, Precision::F64)).unwrap();
        assert_eq!(back.kind(), r.kind());
        let (a, b) = (values(&r), values(&back));
        assert_eq!(a.len(), b.len());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(back, r);
    }
}

#[test]
fn single_precision_round_trip_is_bitwise_after_rounding() {
    for r in sample_records() {
        let back = decode(&encode(&r, Precision::F32)).unwrap();
        for (x, y) in values(&r).iter().zip(values(&back)) {
            assert_eq!(((*x as f32) as f64).to_bits(), y.to_bits());
        }
        // A second pass is lossless.
        let again = decode(&encode(&back, Precision::F32)).unwrap();
        assert_eq!(again, back);
    }
}

#[test]
fn encoding_is_deterministic() {
    for (a, b) in sample_records().iter().zip(sample_records()) {
        assert_eq!(encode(a, Precision::F64), encode(&b, Precision::F64));
    }
}

#[test]
fn files_round_trip_at_default_precision() {
    let dir = tempfile::tempdir().unwrap();
    for (k, r) in sample_records().into_iter().enumerate() {
        let path = dir.path().join(format!("r{k}.ltc"));
        write_container(&r, &path).unwrap();
        let back = read_container(&path).unwrap();
        if r.default_precision() == Precision::F64 {
            assert_eq!(back, r);
        } else {
            assert_eq!(decode(&encode(&r, Precision::F32)).unwrap(), back);
        }
        write_container_with(&r, &path, Precision::F64).unwrap();
        assert_eq!(read_container(&path).unwrap(), r);
    }
    let missing = dir.path().join("absent.ltc");
    assert!(matches!(read_container(&missing), Err(Error::Io { .. })));
}

#[test]
fn corrupted_checksum_is_rejected() {
    for r in sample_records() {
        let mut bytes = encode(&r, Precision::F64);
        let n = bytes.len();
        bytes[n - 1] ^= 0x01;
        let err = decode(&bytes).unwrap_err();
        assert!(
            is_container_err(&err, |c| matches!(
                c,
                ContainerError::ChecksumMismatch { .. }
            )),
            "{err}"
        );
    }
}

#[test]
fn every_single_byte_flip_is_rejected() {
    let r = &sample_records()[2];
    let bytes = encode(r, Precision::F64);
    for pos in 0..bytes.len() {
        for bit in [0x01u8, 0x80] {
            let mut b = bytes.clone();
            b[pos] ^= bit;
            assert!(
                decode(&b).is_err(),
                "flip of bit {bit:#x} at byte {pos} accepted"
            );
        }
    }
}

#[test]
fn truncation_is_rejected() {
    let r = &sample_records()[0];
    let bytes = encode(r, Precision::F32);
    for len in [0, 2, 4, 15, 16, 17, bytes.len() / 2, bytes.len() - 1] {
        let err = decode(&bytes[..len]).unwrap_err();
        assert!(
            is_container_err(&err, |c| matches!(c, ContainerError::Truncated { .. })),
            "length {len}: {err}"
        );
    }
    let mut longer = bytes.clone();
    longer.push(0);
    assert!(decode(&longer).is_err());
}

#[test]
fn bad_magic_and_version_are_rejected() {
    let r = &sample_records()[3];
    let mut bytes = encode(r, Precision::F32);
    bytes[0] = b'X';
    assert!(is_container_err(
        &decode(&bytes).unwrap_err(),
        |c| matches!(c, ContainerError::BadMagic)
    ));

    let mut bytes = encode(r, Precision::F32);
    bytes[4] = 2;
    let err = decode(&bytes).unwrap_err();
    assert!(is_container_err(&err, |c| matches!(
        c,
        ContainerError::VersionMismatch { found: 2 }
    )));
    assert!(err.to_string().contains("version 2"));
}

#[test]
fn unknown_kind_and_value_type_are_rejected_even_with_valid_checksum() {
    use std::hash::Hasher;
    let r = &sample_records()[2];
    for (pos, val) in [(5usize, 9u8), (6, 7)] {
        let mut bytes = encode(r, Precision::F64);
        bytes[pos] = val;
        let end = bytes.len() - 8;
        let mut h = fnv::FnvHasher::default();
        h.write(&bytes[..end]);
        let sum = h.finish().to_le_bytes();
        bytes[end..].copy_from_slice(&sum);
        let err = decode(&bytes).unwrap_err();
        assert!(
            is_container_err(&err, |c| matches!(
                c,
                ContainerError::UnknownKind(_) | ContainerError::UnknownValueType(_)
            )),
            "{err}"
        );
    }
}

fn small_dataset(shape: [usize; 5], data: Vec<f64>) -> LatentDataset {
    let [d, p, e, i, r] = shape;
    LatentDataset::new(
        DenseTensor::new(shape.to_vec(), data).unwrap(),
        AxisLabels::numbered(p, e, i, r),
        LatentLayout::flat(d),
    )
    .unwrap()
}

fn dataset_strategy() -> impl Strategy<Value = LatentDataset> {
    (1usize..6, 1usize..3, 1usize..3, 1usize..3, 1usize..3).prop_flat_map(|(d, p, e, i, r)| {
        prop::collection::vec(-1e6f64..1e6, d * p * e * i * r)
            .prop_map(move |data| small_dataset([d, p, e, i, r], data))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn datasets_round_trip(ds in dataset_strategy()) {
        let r = Record::Dataset(ds);
        prop_assert_eq!(&decode(&encode(&r, Precision::F64)).unwrap(), &r);
        let back = decode(&encode(&r, Precision::F32)).unwrap();
        for (x, y) in values(&r).iter().zip(values(&back)) {
            prop_assert_eq!(((*x as f32) as f64).to_bits(), y.to_bits());
        }
    }

    #[test]
    fn latent_batches_round_trip(
        d in 1usize..8,
        rows in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 8), 0..5),
        name in "[a-z/:_0-9]{0,12}",
    ) {
        let latents: Vec<_> = rows.iter().map(|r| DVector::from_column_slice(&r[..d])).collect();
        let names = (0..latents.len()).map(|k| format!("{name}{k}")).collect();
        let r = Record::Latents(LatentBatch::new(names, latents, LatentLayout::flat(d)).unwrap());
        prop_assert_eq!(&decode(&encode(&r, Precision::F64)).unwrap(), &r);
    }

    #[test]
    fn any_corruption_of_a_dataset_is_detected(ds in dataset_strategy(), pos in any::<prop::sample::Index>(), bit in 0u8..8) {
        let mut bytes = encode(&Record::Dataset(ds), Precision::F32);
        let p = pos.index(bytes.len());
        bytes[p] ^= 1 << bit;
        prop_assert!(decode(&bytes).is_err());
    }
}
