mod common;

use std::fs;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use shiftconv::tensorio::{
    format::{decode_tensor, encode_tensor},
    from_fixed_point, load_model, load_tensor, save_model, save_tensor, to_fixed_point, FloatTensor, StoredTensor,
};
use shiftconv::Error;

#[test]
fn random_models_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..200 {
        let model = common::random_model(&mut rng);
        let path = dir.path().join(format!("m{i}"));
        save_model(&model, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), model);
    }
}

#[test]
fn random_tensors_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dir = tempfile::tempdir().unwrap();
    for i in 0..200 {
        let t = common::random_stored_tensor(&mut rng);
        let path = dir.path().join(format!("t{i}.shct"));
        save_tensor(&path, &t).unwrap();
        let back = load_tensor(&path).unwrap();
        if let (StoredTensor::Float(a), StoredTensor::Float(b)) = (&t, &back) {
            assert!(common::bits_equal(a.data(), b.data()));
        }
        assert_eq!(back, t);
    }
}

#[test]
fn corrupted_tensor_files() {
    let t: StoredTensor = FloatTensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5]).unwrap().into();
    let bytes = encode_tensor(&t);
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_tensor(&bad), Err(Error::BadMagic)));
    assert!(matches!(decode_tensor(&bytes[..bytes.len() - 1]), Err(Error::TruncatedPayload { .. })));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(decode_tensor(&bad), Err(Error::UnsupportedVersion(9))));
    assert!(matches!(decode_tensor(&bytes[..3]), Err(Error::BadMagic | Error::TruncatedPayload { .. })));
}

#[test]
fn corrupted_model_directories() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let dir = tempfile::tempdir().unwrap();
    let model = loop {
        let m = common::random_model(&mut rng);
        if m.config().is_some() && matches!(m.layers()[0].weights, shiftconv::tensorio::LayerWeights::Quantized(_)) {
            break m;
        }
    };
    let max = model.config().unwrap().max_index();
    save_model(&model, dir.path()).unwrap();

    let idx = dir.path().join("layer0.idx");
    let good = fs::read(&idx).unwrap();
    fs::write(&idx, &good[1..]).unwrap();
    assert!(matches!(load_model(dir.path()), Err(Error::BlobLengthMismatch { .. })));
    let mut bad = good.clone();
    bad[0] = (max + 1) as u8;
    fs::write(&idx, &bad).unwrap();
    assert!(matches!(load_model(dir.path()), Err(Error::IndexOutOfRange { .. })));
    fs::write(&idx, &good).unwrap();

    let manifest = dir.path().join("model.json");
    let text = fs::read_to_string(&manifest).unwrap();
    fs::write(&manifest, text.replace("\"version\": 1", "\"version\": 7")).unwrap();
    assert!(matches!(load_model(dir.path()), Err(Error::UnsupportedVersion(7))));
    fs::write(&manifest, "{ not json").unwrap();
    assert!(matches!(load_model(dir.path()), Err(Error::MalformedManifest(_))));
    fs::write(&manifest, &text).unwrap();
    assert_eq!(load_model(dir.path()).unwrap(), model);
}

#[test]
fn fixed_point_examples_from_the_rule() {
    let ft = |v: Vec<f64>| FloatTensor::new(vec![v.len()], v).unwrap();
    let t = to_fixed_point(&ft(vec![0.3]), 8).unwrap();
    assert_eq!((t.exponent(), t.data()), (-8, &[77i16][..]));
    let back = from_fixed_point(&shiftconv::tensorio::FixedPointTensor::new(vec![3], vec![64, 0, -32], 8, -7).unwrap());
    assert_eq!(back.data(), &[0.5, 0.0, -0.25]);
}

fn float_tensor() -> impl Strategy<Value = FloatTensor> {
    (prop::collection::vec(-1e4f64..1e4, 1..48), -30i32..30).prop_map(|(v, e)| {
        let s = 2f64.powi(e);
        FloatTensor::new(vec![v.len()], v.into_iter().map(|x| x * s).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(3000))]

    #[test]
    fn conversion_is_idempotent(t in float_tensor(), bits in 3u32..=16) {
        let a = to_fixed_point(&t, bits).unwrap();
        let b = to_fixed_point(&from_fixed_point(&a), bits).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn error_bounded_by_half_step(t in float_tensor(), bits in 2u32..=16) {
        let f = to_fixed_point(&t, bits).unwrap();
        let hi = (1i32 << (bits - 1)) - 1;
        let half = 2f64.powi(f.exponent() - 1);
        let back = from_fixed_point(&f);
        for ((orig, got), &s) in t.data().iter().zip(back.data()).zip(f.data()) {
            prop_assert!((s as i32).abs() <= hi + 1);
            if (s as i32) != hi && (s as i32) != -hi - 1 {
                prop_assert!((orig - got).abs() <= half, "{} -> {}", orig, got);
            }
        }
    }

    #[test]
    fn encoded_tensors_decode_exactly(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = common::random_stored_tensor(&mut rng);
        prop_assert_eq!(decode_tensor(&encode_tensor(&t)).unwrap(), t);
    }
}
