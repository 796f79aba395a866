//! `shiftconv` command-line front end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::analyzer::{divergence_of, load_layer_file, network_cost, output_divergence, DivergenceOptions, Histogram, DEFAULT_BINS};
use crate::codebook::{dequantize_tensor, empirical_distortion, CodebookConfig};
use crate::engine::{run_network, run_network_fixed, EngineOptions, ExecPath, NetworkOptions, NetworkRun, OpCounts};
use crate::error::{Error, Result};
use crate::synth;
use crate::tensorio::{load_model, load_tensor, save_model, save_tensor, FloatTensor, LayerWeights, Model, StoredTensor};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "shiftconv", version, about = "Multiplierless CNN inference with power-of-two weight codebooks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize a float model into codeword indices.
    Quantize(QuantizeArgs),
    /// Run a model on one input tensor.
    Infer(InferArgs),
    /// Check the shift engine against the float reference on dequantized weights.
    Compare(CompareArgs),
    /// Print the cycle-count table for a layer file.
    Analyze(AnalyzeArgs),
    /// Histogram of normalized weights or tensor values.
    Hist(HistArgs),
    /// Write a seeded random float model and inputs.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, Args)]
pub struct CodebookArgs {
    /// Number of quantization stages.
    #[arg(long = "shifts", short = 'N', default_value_t = 2)]
    pub shifts: u32,
    /// Codeword index width in bits.
    #[arg(long = "bits", short = 'B', default_value_t = 4)]
    pub bits: u32,
}

impl CodebookArgs {
    fn config(&self) -> Result<CodebookConfig> {
        CodebookConfig::new(self.shifts, self.bits)
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct RunArgs {
    /// Keep inter-layer activations in floating point.
    #[arg(long)]
    pub no_requant: bool,
    /// Skip ReLU between layers.
    #[arg(long)]
    pub no_relu: bool,
    /// Engine worker threads (0 = all cores).
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Print per-layer wall-clock time.
    #[arg(long)]
    pub timing: bool,
}

impl RunArgs {
    fn options(&self, oracle: bool) -> NetworkOptions {
        let engine = if self.workers == 0 { EngineOptions::all_cores() } else { EngineOptions::with_workers(self.workers) };
        NetworkOptions { relu: !self.no_relu, requantize: !self.no_requant, oracle, engine }
    }
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    /// Float model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub codebook: CodebookArgs,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Input tensor file, rank 3 (channels, height, width).
    #[arg(long)]
    pub input: PathBuf,
    /// Output tensor file.
    #[arg(long)]
    pub out: PathBuf,
    /// Run quantized layers through the float reference instead of the shift engine.
    #[arg(long)]
    pub float_oracle: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Quantized model directory.
    #[arg(long)]
    pub model: PathBuf,
    /// Input tensor files; rank-4 files hold a batch.
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,
    /// Additionally draw this many uniform random inputs.
    #[arg(long, requires = "seed")]
    pub random: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Float model to measure quantization divergence against.
    #[arg(long)]
    pub float_model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Write the divergence histogram here.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Layer file: one conv layer per line.
    #[arg(long)]
    pub layers: PathBuf,
    #[command(flatten)]
    pub codebook: CodebookArgs,
}

#[derive(Debug, Args)]
pub struct HistArgs {
    /// Model directory (quantized layers are dequantized first).
    #[arg(long, conflicts_with = "tensor", required_unless_present = "tensor")]
    pub model: Option<PathBuf>,
    /// Tensor file.
    #[arg(long)]
    pub tensor: Option<PathBuf>,
    /// Restrict to one layer of the model.
    #[arg(long, requires = "model")]
    pub layer: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Output text file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write this many random inputs as one rank-4 tensor.
    #[arg(long, requires = "inputs_out")]
    pub inputs: Option<usize>,
    #[arg(long)]
    pub inputs_out: Option<PathBuf>,
}

/// Exit status for a library error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidBits(_) => EXIT_USAGE,
        Error::Domain(_) | Error::InputWidthExceeded(_) | Error::AccumulatorOverflow { .. } => EXIT_NUMERIC,
        _ => EXIT_IO,
    }
}

/// Failure of a command: a library error or a numerical check that did not hold.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(Error),
    Numeric(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Lib(e) => exit_code(e),
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Per-layer record of a shift-engine run.
#[derive(Debug, Clone)]
pub struct LayerReport {
    pub name: String,
    pub path: ExecPath,
    pub elapsed: Duration,
    pub counts: OpCounts,
}

/// Counters and error summary printed by `infer` and `compare`.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub layers: Vec<LayerReport>,
    pub max_abs_error: Option<f64>,
    pub exit_status: u8,
}

impl RunReport {
    fn absorb(&mut self, run: &NetworkRun) {
        if self.layers.is_empty() {
            self.layers = run
                .layers
                .iter()
                .map(|l| LayerReport { name: l.name.clone(), path: l.path, elapsed: l.elapsed, counts: l.counts })
                .collect();
        } else {
            for (r, l) in self.layers.iter_mut().zip(&run.layers) {
                r.elapsed += l.elapsed;
                r.counts += l.counts;
            }
        }
    }

    pub fn totals(&self) -> OpCounts {
        let mut t = OpCounts::default();
        for l in &self.layers {
            t += l.counts;
        }
        t
    }

    pub fn to_text(&self, timing: bool) -> String {
        let mut out = String::new();
        for l in &self.layers {
            let path = match l.path {
                ExecPath::Shift => "shift",
                ExecPath::Reference => "reference",
            };
            let c = l.counts;
            let _ = write!(
                out,
                "layer {} [{}] shifts={} sign_flips={} adds={} datapath_multiplies={} finalize_multiplies={}",
                l.name, path, c.shifts, c.sign_flips, c.adds, c.datapath_multiplies, c.finalize_multiplies
            );
            if timing {
                let _ = write!(out, " time_ms={:.3}", l.elapsed.as_secs_f64() * 1e3);
            }
            out.push('\n');
        }
        let t = self.totals();
        let _ = writeln!(
            out,
            "total shifts={} sign_flips={} adds={} datapath_multiplies={} finalize_multiplies={}",
            t.shifts, t.sign_flips, t.adds, t.datapath_multiplies, t.finalize_multiplies
        );
        if let Some(e) = self.max_abs_error {
            let _ = writeln!(out, "max_abs_error {e:e}");
        }
        let _ = writeln!(out, "status {}", self.exit_status);
        out
    }
}

/// Parses `args` and runs the command, writing reports to `stdout`.
/// Returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let rendered = e.render().to_string();
            let _ = if code == EXIT_OK { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match execute(&cli.command) {
        Ok((text, code)) => {
            let _ = stdout.write_all(text.as_bytes());
            code
        }
        Err(f) => {
            let _ = writeln!(stderr, "error: {f}");
            f.code()
        }
    }
}

fn execute(command: &Command) -> std::result::Result<(String, u8), Failure> {
    match command {
        Command::Quantize(a) => cmd_quantize(a).map(|s| (s, EXIT_OK)),
        Command::Infer(a) => cmd_infer(a).map(|s| (s, EXIT_OK)),
        Command::Compare(a) => cmd_compare(a),
        Command::Analyze(a) => cmd_analyze(a).map(|s| (s, EXIT_OK)),
        Command::Hist(a) => cmd_hist(a).map(|s| (s, EXIT_OK)),
        Command::Synth(a) => cmd_synth(a).map(|s| (s, EXIT_OK)),
    }
}

fn float_weights(w: &LayerWeights) -> FloatTensor {
    match w {
        LayerWeights::Float(t) => t.clone(),
        LayerWeights::Quantized(q) => dequantize_tensor(q),
    }
}

pub fn cmd_quantize(a: &QuantizeArgs) -> std::result::Result<String, Failure> {
    let config = a.codebook.config()?;
    let model = load_model(&a.model)?;
    let quantized = model.quantize(config)?;
    let mut out = format!("codebook shifts={} bits={} combinations={}\n", config.stages(), config.bits(), config.combinations());
    for (src, dst) in model.layers().iter().zip(quantized.layers()) {
        let w = float_weights(&src.weights);
        let distortion = empirical_distortion(&w, config)?;
        let scale = match &dst.weights {
            LayerWeights::Quantized(q) => q.scale(),
            LayerWeights::Float(_) => unreachable!("quantize yields quantized layers"),
        };
        let _ = writeln!(out, "layer {} distortion={distortion:e} scale={scale:e}", src.spec.name);
    }
    save_model(&quantized, &a.out)?;
    Ok(out)
}

pub fn cmd_infer(a: &InferArgs) -> std::result::Result<String, Failure> {
    let model = load_model(&a.model)?;
    let options = a.run.options(a.float_oracle);
    let run = match load_tensor(&a.input)? {
        StoredTensor::Float(x) => run_network(&model, &x, &options)?,
        StoredTensor::Fixed(x) => run_network_fixed(&model, &x, &options)?,
    };
    let mut report = RunReport::default();
    report.absorb(&run);
    check_multiplies(&report)?;
    save_tensor(&a.out, &StoredTensor::Float(run.output))?;
    Ok(report.to_text(a.run.timing))
}

fn check_multiplies(report: &RunReport) -> std::result::Result<(), Failure> {
    let m = report.totals().datapath_multiplies;
    if m != 0 {
        return Err(Failure::Numeric(format!("shift engine used {m} datapath multiplies")));
    }
    Ok(())
}

fn split_batch(t: StoredTensor, expected: [usize; 3]) -> Result<Vec<FloatTensor>> {
    let t = match t {
        StoredTensor::Float(t) => t,
        StoredTensor::Fixed(t) => crate::tensorio::from_fixed_point(&t),
    };
    match t.dims().len() {
        3 => Ok(vec![t]),
        4 => {
            let per: [usize; 3] = [t.dims()[1], t.dims()[2], t.dims()[3]];
            if per != expected {
                return Err(Error::ShapeMismatch(format!("batch items {per:?}, model expects {expected:?}")));
            }
            let len = per.iter().product::<usize>();
            t.data().chunks(len).map(|c| FloatTensor::new(per.to_vec(), c.to_vec())).collect()
        }
        _ => Err(Error::ShapeMismatch(format!("input rank {}, expected 3 or 4", t.dims().len()))),
    }
}

pub fn cmd_compare(a: &CompareArgs) -> std::result::Result<(String, u8), Failure> {
    let model = load_model(&a.model)?;
    if model.config().is_none() {
        return Err(Failure::Usage("compare needs a quantized model; run `shiftconv quantize` first".into()));
    }
    let mut inputs = Vec::new();
    for path in &a.inputs {
        inputs.extend(split_batch(load_tensor(path)?, model.input_dims())?);
    }
    if let (Some(count), Some(seed)) = (a.random, a.seed) {
        let mut rng = synth::rng(seed);
        inputs.extend((0..count).map(|_| synth::random_input(model.input_dims(), &mut rng)));
    }
    if inputs.is_empty() {
        return Err(Error::NoInputs.into());
    }

    let shift_opts = a.run.options(false);
    let oracle_opts = a.run.options(true);
    let mut report = RunReport::default();
    let mut pairs = Vec::with_capacity(inputs.len());
    for x in &inputs {
        let shift = run_network(&model, x, &shift_opts)?;
        let oracle = run_network(&model, x, &oracle_opts)?;
        report.absorb(&shift);
        pairs.push((shift.output, oracle.output));
    }
    check_multiplies(&report)?;
    let div = divergence_of(&pairs, a.bins, None)?;
    report.max_abs_error = Some(div.max_abs);
    let exact = pairs.iter().all(|(s, o)| s.data().iter().zip(o.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    report.exit_status = if exact { EXIT_OK } else { EXIT_NUMERIC };

    let mut out = format!("inputs {}\n", inputs.len());
    out.push_str(&report.to_text(a.run.timing));
    let _ = writeln!(out, "equivalence {}", if exact { "exact" } else { "VIOLATED" });
    let _ = writeln!(out, "shift_vs_oracle mean={:e} variance={:e}", div.mean, div.variance);

    let mut hist = div.histogram;
    if let Some(path) = &a.float_model {
        let float = load_model(path)?;
        let opts = DivergenceOptions { a: shift_opts, b: NetworkOptions { oracle: true, ..shift_opts }, bins: a.bins, half_range: None };
        let fd = output_divergence(&model, &float, &inputs, &opts)?;
        let _ = writeln!(
            out,
            "quantized_vs_float mean={:e} std={:e} max_abs={:e}",
            fd.mean,
            fd.std_dev(),
            fd.max_abs
        );
        hist = fd.histogram;
    }
    if let Some(path) = &a.hist_out {
        write_text(path, &hist.to_text())?;
    }
    Ok((out, report.exit_status))
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> std::result::Result<String, Failure> {
    let config = a.codebook.config()?;
    let records = load_layer_file(&a.layers)?;
    let table = network_cost(&records, config);
    Ok(format!(
        "codebook shifts={} bits={} combinations={}\n{}",
        config.stages(),
        config.bits(),
        config.combinations(),
        table.to_text()
    ))
}

fn normalized(w: &FloatTensor) -> impl Iterator<Item = f64> + '_ {
    let scale = w.max_abs();
    w.data().iter().map(move |v| if scale == 0.0 { 0.0 } else { v / scale })
}

pub fn cmd_hist(a: &HistArgs) -> std::result::Result<String, Failure> {
    let mut hist = Histogram::uniform(-1.0, 1.0, a.bins)?;
    if let Some(dir) = &a.model {
        let model = load_model(dir)?;
        let mut matched = false;
        for layer in model.layers() {
            if a.layer.as_deref().is_some_and(|name| name != layer.spec.name) {
                continue;
            }
            matched = true;
            hist.extend(normalized(&float_weights(&layer.weights)));
        }
        if !matched {
            return Err(Failure::Usage(format!("no layer named {}", a.layer.as_deref().unwrap_or_default())));
        }
    } else if let Some(path) = &a.tensor {
        let t = match load_tensor(path)? {
            StoredTensor::Float(t) => t,
            StoredTensor::Fixed(t) => crate::tensorio::from_fixed_point(&t),
        };
        if t.is_empty() {
            return Err(Error::EmptyTensor.into());
        }
        hist.extend(normalized(&t));
    }
    let text = hist.to_text();
    match &a.out {
        Some(path) => {
            write_text(path, &text)?;
            Ok(format!("samples {}\n", hist.total()))
        }
        None => Ok(text),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> std::result::Result<String, Failure> {
    let mut rng = synth::rng(a.seed);
    let model: Model = synth::random_float_model(synth::DEMO_INPUT, &synth::DEMO_LAYERS, &mut rng)?;
    save_model(&model, &a.out)?;
    let mut out = format!("model {} layers, input {:?}\n", model.layers().len(), model.input_dims());
    if let (Some(count), Some(path)) = (a.inputs, &a.inputs_out) {
        if count == 0 {
            return Err(Failure::Usage("--inputs must be at least 1".into()));
        }
        let mut data = Vec::new();
        for _ in 0..count {
            data.extend(synth::random_input(model.input_dims(), &mut rng).into_data());
        }
        let [c, h, w] = model.input_dims();
        save_tensor(path, &StoredTensor::Float(FloatTensor::new(vec![count, c, h, w], data)?))?;
        let _ = writeln!(out, "inputs {count}");
    }
    Ok(out)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
