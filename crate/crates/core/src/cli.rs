//! `fptm` command-line interface.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::booleanize::Descriptor;
use crate::dataset::{fashion_mnist_paths, load_idx, load_imdb_dir, BitDataset};
use crate::error::{Error, Result};
use crate::heuristics::{suggest_s, suggest_t};
use crate::infer::{naive, PackedModel, ThroughputReport};
use crate::model::{Mode, Model, INITIAL_STATE};
use crate::presets::PresetInput;
use crate::session::{self, lookup_preset, ConfigOverrides, DEFAULT_SEED};
use crate::train::{EpochReport, FalseLiteralAction};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fptm", version, about = "Fuzzy-Pattern Tsetlin Machine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a booleanizer and write packed train/test containers.
    #[command(subcommand)]
    Booleanize(BooleanizeCommand),
    /// Train a model on a packed container.
    Train(TrainArgs),
    /// Report accuracy of a model on a packed container.
    Eval(EvalArgs),
    /// Write predicted labels, one per line.
    Predict(PredictArgs),
    /// Measure batch inference throughput.
    Bench(BenchArgs),
    /// Suggest T (and optionally S) for a configuration.
    Suggest(SuggestArgs),
}

#[derive(Debug, Subcommand)]
enum BooleanizeCommand {
    /// n-gram presence features from an aclImdb directory.
    Text(TextArgs),
    /// Convolution + thermometer features from Fashion-MNIST IDX files.
    Image(ImageArgs),
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: Option<PathBuf>,
    /// Where to write the fitted booleanizer (embed it with `train --descriptor`).
    #[arg(long)]
    descriptor_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TextArgs {
    #[arg(long)]
    imdb_dir: PathBuf,
    /// Take booleanizer sizes from a preset.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    words: Option<usize>,
    #[arg(long)]
    ngram: Option<usize>,
    #[arg(long)]
    features: Option<usize>,
    /// Keep only this many reviews per split, evenly spread over the sorted files.
    #[arg(long)]
    subset: Option<usize>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct ImageArgs {
    /// Directory holding the Fashion-MNIST IDX files (raw or .gz).
    #[arg(long)]
    fmnist_dir: PathBuf,
    #[arg(long, default_value_t = 4)]
    bits_per_map: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct HyperArgs {
    /// Named configuration; explicit flags override its values.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    clauses: Option<u32>,
    /// Vote threshold; defaults to the suggested value.
    #[arg(long)]
    t: Option<u32>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    l: Option<u32>,
    #[arg(long)]
    lf: Option<u32>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    hyper: HyperArgs,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value = "decrement")]
    false_literal_action: FalseLiteralAction,
    /// Starting automaton state; 127 sits one step below inclusion.
    #[arg(long, default_value_t = INITIAL_STATE)]
    initial_state: u8,
    /// Booleanizer descriptor to embed in the model.
    #[arg(long)]
    descriptor: Option<PathBuf>,
    /// Also write the per-epoch CSV log here.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Do not print per-epoch lines.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Packed container input.
    #[arg(long, conflicts_with_all = ["text", "idx_images"])]
    data: Option<PathBuf>,
    /// Raw text documents, one per line; needs a text descriptor in the model.
    #[arg(long, conflicts_with = "idx_images")]
    text: Option<PathBuf>,
    /// Raw IDX image file; needs an image descriptor in the model.
    #[arg(long)]
    idx_images: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, conflicts_with = "random")]
    data: Option<PathBuf>,
    /// Benchmark on this many seeded random samples instead of a container.
    #[arg(long)]
    random: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Also time the unpacked per-literal baseline.
    #[arg(long)]
    naive: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SuggestArgs {
    #[arg(long)]
    mode: Mode,
    #[arg(long)]
    clauses: u32,
    #[arg(long)]
    lf: u32,
    /// Tuned S of a standard Tsetlin Machine on the same task.
    #[arg(long)]
    s_tm: Option<f64>,
}

/// Parses `args` (program name first) and runs the subcommand, returning the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::InvalidHyperparameters(_) => EXIT_USAGE,
                _ => EXIT_RUNTIME,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Booleanize(BooleanizeCommand::Text(a)) => booleanize_text(a),
        Command::Booleanize(BooleanizeCommand::Image(a)) => booleanize_image(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Bench(a) => bench(a),
        Command::Suggest(a) => suggest(a),
    }
}

fn spread(n: usize, keep: usize) -> Vec<usize> {
    let keep = keep.min(n);
    (0..keep).map(|k| k * n / keep).collect()
}

fn write_outputs(out: &OutputArgs, descriptor: &Descriptor, train: &BitDataset, test: Option<&BitDataset>) -> Result<()> {
    train.write_container(&out.train_out)?;
    if let (Some(path), Some(test)) = (&out.test_out, test) {
        test.write_container(path)?;
    }
    if let Some(path) = &out.descriptor_out {
        descriptor.save(path)?;
    }
    println!(
        "features={} train_samples={} test_samples={}",
        train.features(),
        train.len(),
        test.map_or(0, BitDataset::len)
    );
    Ok(())
}

fn booleanize_text(a: TextArgs) -> Result<()> {
    let (mut words, mut ngram, mut features) = (None, None, None);
    if let Some(name) = &a.preset {
        match lookup_preset(name)?.input {
            PresetInput::Text { vocab_size, max_ngram, features: f } => {
                (words, ngram, features) = (Some(vocab_size), Some(max_ngram), Some(f));
            }
            PresetInput::Image { .. } => {
                return Err(Error::InvalidArgument(format!("preset `{name}` is not a text preset")))
            }
        }
    }
    let words = a.words.or(words).ok_or_else(|| Error::InvalidArgument("--words is required".into()))?;
    let ngram = a.ngram.or(ngram).ok_or_else(|| Error::InvalidArgument("--ngram is required".into()))?;
    let features = a.features.or(features).ok_or_else(|| Error::InvalidArgument("--features is required".into()))?;

    let mut corpus = load_imdb_dir(&a.imdb_dir)?;
    if let Some(keep) = a.subset {
        corpus.train = corpus.train.subset(&spread(corpus.train.len(), keep));
        corpus.test = corpus.test.subset(&spread(corpus.test.len(), keep));
    }
    let (descriptor, train, test) = session::booleanize_text(&corpus.train, Some(&corpus.test), words, ngram, features)?;
    write_outputs(&a.out, &descriptor, &train, test.as_ref())
}

fn booleanize_image(a: ImageArgs) -> Result<()> {
    let (img, lab) = fashion_mnist_paths(&a.fmnist_dir, "train")?;
    let train = load_idx(img, lab)?;
    let test = match fashion_mnist_paths(&a.fmnist_dir, "test") {
        Ok((img, lab)) => Some(load_idx(img, lab)?),
        Err(_) if a.out.test_out.is_none() => None,
        Err(e) => return Err(e),
    };
    let (descriptor, train, test) = session::booleanize_images(&train, test.as_ref(), a.bits_per_map)?;
    write_outputs(&a.out, &descriptor, &train, test.as_ref())
}

fn train(a: TrainArgs) -> Result<()> {
    let h = a.hyper;
    let config = ConfigOverrides {
        preset: h.preset,
        mode: h.mode,
        clauses: h.clauses,
        t: h.t,
        s: h.s,
        l: h.l,
        lf: h.lf,
        epochs: h.epochs,
        seed: Some(a.seed),
        threads: Some(a.threads),
        false_literal_action: Some(a.false_literal_action),
        initial_state: Some(a.initial_state),
    }
    .resolve()?;
    let train = BitDataset::read_container(&a.train)?;
    let test = a.test.as_ref().map(BitDataset::read_container).transpose()?;
    let descriptor = a.descriptor.as_ref().map(Descriptor::load).transpose()?.unwrap_or_default();

    let mut log = a.log.as_ref().map(fs::File::create).transpose()?;
    if let Some(f) = log.as_mut() {
        writeln!(f, "{}", EpochReport::CSV_HEADER)?;
    }
    if !a.quiet {
        println!("{}", EpochReport::CSV_HEADER);
    }
    let mut log_error = None;
    let (model, _) = session::train(&config, &train, test.as_ref(), descriptor, |r| {
        if !a.quiet {
            println!("{}", r.csv_line());
        }
        if let Some(f) = log.as_mut() {
            if let Err(e) = writeln!(f, "{}", r.csv_line()) {
                log_error.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = log_error {
        return Err(e.into());
    }
    model.save(&a.model)?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let data = BitDataset::read_container(&a.data)?;
    let accuracy = PackedModel::from_model(&model).accuracy(&data, a.threads)?;
    println!("accuracy={accuracy:.6} samples={}", data.len());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let packed = PackedModel::from_model(&model);
    let labels: Vec<u32> = if let Some(path) = &a.data {
        packed.predict_batch(&BitDataset::read_container(path)?, a.threads)?
    } else if let Some(path) = &a.text {
        let Descriptor::Text(t) = &model.descriptor else {
            return Err(Error::InvalidArgument("model has no text booleanizer".into()));
        };
        fs::read_to_string(path)?
            .lines()
            .map(|doc| packed.predict(t.transform(doc).view()).map(|c| c as u32))
            .collect::<Result<_>>()?
    } else if let Some(path) = &a.idx_images {
        let Descriptor::Image(b) = &model.descriptor else {
            return Err(Error::InvalidArgument("model has no image booleanizer".into()));
        };
        let (_, rows, cols, pixels) = crate::dataset::parse_idx_images(&fs::read(path)?)?;
        if (rows, cols) != (b.rows(), b.cols()) {
            return Err(Error::InvalidArgument(format!(
                "images are {rows}x{cols}, booleanizer expects {}x{}",
                b.rows(),
                b.cols()
            )));
        }
        pixels
            .chunks_exact(rows * cols)
            .map(|img| packed.predict(b.transform(img)?.view()).map(|c| c as u32))
            .collect::<Result<_>>()?
    } else {
        return Err(Error::InvalidArgument("one of --data, --text or --idx-images is required".into()));
    };
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    match &a.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let data = match (&a.data, a.random) {
        (Some(path), _) => BitDataset::read_container(path)?,
        (None, Some(n)) => session::random_dataset(model.features(), n, model.classes(), a.density, a.seed),
        (None, None) => return Err(Error::InvalidArgument("one of --data or --random is required".into())),
    };
    let packed = PackedModel::from_model(&model);
    let (_, report) = packed.benchmark(&data, a.threads, a.reps)?;
    println!("{}", ThroughputReport::CSV_HEADER);
    println!("{}", report.csv_line());
    if a.naive {
        let unpacked = naive::unpack(&data);
        let baseline = naive::benchmark(&model, &unpacked, a.reps);
        println!("{}", baseline.csv_line());
        println!(
            "speedup={:.2}",
            report.predictions_per_second / baseline.predictions_per_second
        );
    }
    Ok(())
}

fn suggest(a: SuggestArgs) -> Result<()> {
    let s = suggest_t(a.clauses, a.lf, a.mode)?;
    println!("T={} range=[{},{}]", s.t, s.t_range.0, s.t_range.1);
    if let Some(s_tm) = a.s_tm {
        println!("S={}", suggest_s(s_tm)?);
    }
    for note in &s.notes {
        println!("note: {note}");
    }
    Ok(())
}
