use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use shiftconv::codebook::{CodebookConfig, QuantizedWeightTensor};
use shiftconv::tensorio::{load_tensor, save_model, save_tensor, FixedPointTensor, FloatTensor, Layer, LayerSpec, LayerWeights, Model, StoredTensor};

fn shiftconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftconv")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn synth(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let model = dir.join("float");
    let inputs = dir.join("inputs.shct");
    let o = shiftconv(&["synth", "--seed", "5", "--out", p(&model), "--inputs", "3", "--inputs-out", p(&inputs)]);
    assert!(o.status.success(), "{}", stderr(&o));
    (model, inputs)
}

#[test]
fn quantize_round_trips_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (float, _) = synth(dir.path());
    let out = dir.path().join("q");
    let o = shiftconv(&["quantize", "--model", p(&float), "--out", p(&out), "--shifts", "2", "--bits", "4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("layer ")).count(), 3);
    let model = shiftconv::tensorio::load_model(&out).unwrap();
    assert_eq!(model.config(), Some(CodebookConfig::new(2, 4).unwrap()));
    let again = dir.path().join("q2");
    save_model(&model, &again).unwrap();
    assert_eq!(shiftconv::tensorio::load_model(&again).unwrap(), model);
}

#[test]
fn quantize_rejects_one_bit() {
    let dir = tempfile::tempdir().unwrap();
    let (float, _) = synth(dir.path());
    let o = shiftconv(&["quantize", "--model", p(&float), "--out", p(&dir.path().join("q")), "--shifts", "2", "--bits", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unsupported bit-width"), "{}", stderr(&o));
}

#[test]
fn quantize_all_zero_layer() {
    let dir = tempfile::tempdir().unwrap();
    let spec = LayerSpec::new("zero", 2, 2, (1, 1), (3, 3), 1, 0).unwrap();
    let layer = Layer {
        weights: LayerWeights::Float(FloatTensor::zeros(spec.weight_dims().to_vec()).unwrap()),
        bias: Some(vec![0.0, 0.0]),
        spec,
    };
    let float = dir.path().join("zero");
    save_model(&Model::new(None, vec![layer]).unwrap(), &float).unwrap();
    let o = shiftconv(&["quantize", "--model", p(&float), "--out", p(&dir.path().join("q"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("layer zero distortion=0e0 scale=0e0"), "{}", stdout(&o));
}

fn toy_model(dir: &Path) -> std::path::PathBuf {
    let spec = LayerSpec::new("toy", 1, 1, (1, 1), (1, 1), 1, 0).unwrap();
    let config = CodebookConfig::new(2, 4).unwrap();
    let q = QuantizedWeightTensor::from_parts(vec![1, 1, 1, 1], vec![1, -2], 1.0, config).unwrap();
    let model = Model::new(Some(config), vec![Layer { spec, weights: LayerWeights::Quantized(q), bias: Some(vec![0.25]) }]).unwrap();
    let path = dir.join("toy");
    save_model(&model, &path).unwrap();
    path
}

#[test]
fn infer_toy_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = toy_model(dir.path());
    let input = dir.path().join("x.shct");
    save_tensor(&input, &FixedPointTensor::new(vec![1, 1, 1], vec![64], 8, -7).unwrap().into()).unwrap();
    let (a, b) = (dir.path().join("a.shct"), dir.path().join("b.shct"));
    for out in [&a, &b] {
        let o = shiftconv(&["infer", "--model", p(&model), "--input", p(&input), "--out", p(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("datapath_multiplies=0"));
    }
    match load_tensor(&a).unwrap() {
        StoredTensor::Float(t) => assert_eq!(t.data(), &[0.625]),
        other => panic!("{other:?}"),
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let oracle = dir.path().join("o.shct");
    let o = shiftconv(&["infer", "--model", p(&model), "--input", p(&input), "--out", p(&oracle), "--float-oracle"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&oracle).unwrap());
}

#[test]
fn infer_shape_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let model = toy_model(dir.path());
    let input = dir.path().join("x.shct");
    save_tensor(&input, &FloatTensor::zeros(vec![2, 1, 1]).unwrap().into()).unwrap();
    let o = shiftconv(&["infer", "--model", p(&model), "--input", p(&input), "--out", p(&dir.path().join("y"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("shape mismatch"));
}

#[test]
fn compare_reports_exact_equivalence() {
    let dir = tempfile::tempdir().unwrap();
    let (float, inputs) = synth(dir.path());
    let q = dir.path().join("q");
    assert!(shiftconv(&["quantize", "--model", p(&float), "--out", p(&q), "-N", "3"]).status.success());
    let hist = dir.path().join("div.txt");
    let args = [
        "compare", "--model", p(&q), "--input", p(&inputs), "--random", "4", "--seed", "9", "--float-model", p(&float),
        "--hist-out", p(&hist), "--workers", "2",
    ];
    let o = shiftconv(&args);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("inputs 7"));
    assert!(text.contains("max_abs_error 0e0"));
    assert!(text.contains("equivalence exact"));
    assert!(text.contains("total shifts="));
    assert!(text.lines().any(|l| l.starts_with("total") && l.contains("datapath_multiplies=0")));
    assert_eq!(fs::read_to_string(&hist).unwrap().lines().count(), 101);
    // deterministic report
    assert_eq!(stdout(&shiftconv(&args)), text);
}

#[test]
fn compare_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (float, _) = synth(dir.path());
    let q = dir.path().join("q");
    assert!(shiftconv(&["quantize", "--model", p(&float), "--out", p(&q)]).status.success());

    let o = shiftconv(&["compare", "--model", p(&q)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no inputs"));

    let o = shiftconv(&["compare", "--model", p(&q), "--random", "2"]);
    assert_eq!(o.status.code(), Some(1), "random inputs need a seed");

    let blob = q.join("layer1.idx");
    let bytes = fs::read(&blob).unwrap();
    fs::write(&blob, &bytes[..bytes.len() - 3]).unwrap();
    let o = shiftconv(&["compare", "--model", p(&q), "--random", "1", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("blob-length-mismatch"), "{}", stderr(&o));
}

#[test]
fn analyze_tables() {
    let o = shiftconv(&["analyze", "--layers", &data("single-layer.layers"), "--shifts", "2", "--bits", "4"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("speedup: 1152.0x"), "{}", stdout(&o));

    let o = shiftconv(&["analyze", "--layers", &data("squeezenet-v1.1.layers")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("TOTAL"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.layers");
    fs::write(&bad, "conv 1 2 3 3 8 8 1 1\nconv2 1 2 3\n").unwrap();
    let o = shiftconv(&["analyze", "--layers", p(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.layers:2:"), "{}", stderr(&o));
}

#[test]
fn hist_of_tensor_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("w.shct");
    save_tensor(&t, &FloatTensor::new(vec![3], vec![0.5, 0.5, -0.5]).unwrap().into()).unwrap();
    let o = shiftconv(&["hist", "--tensor", p(&t), "--bins", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "-0.500000 1\n0.500000 2\n");

    let (float, _) = synth(dir.path());
    let out = dir.path().join("h.txt");
    let o = shiftconv(&["hist", "--model", p(&float), "--layer", "conv2", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "samples 576\n");
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 101);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(shiftconv(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(shiftconv(&["infer"]).status.code(), Some(1));
    assert_eq!(shiftconv(&["--help"]).status.code(), Some(0));
}
