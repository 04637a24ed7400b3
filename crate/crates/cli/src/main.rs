use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde::Serialize;

use fibercrypt::channel::{CameraSpec, Channel, ChannelSpec};
use fibercrypt::dataset::{
    character_classes, generate_dataset, read_manifest, single_mode_classes,
    Dataset, DatasetKind,
};
use fibercrypt::fiber::{solve_lp_modes, FiberSpec};
use fibercrypt::nn::{features, raw_crosstalk, split_dataset, train, ConfusionMatrix, Mlp, TrainConfig};
use fibercrypt::pgm::GrayImage;
use fibercrypt::pipeline::{render, send_image, send_text, RenderStage, StrainSchedule, TransmissionMode};

const DIGITS: &[u8] = b"0123456789";

#[derive(Parser, Debug)]
#[command(version, about = "Simulated OAM transmission through a strained few-mode fiber")]
struct Cli {
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    /// ℓ = −10…+10, one class per charge.
    Single,
    /// ℓ = +1…+8, the bit-by-bit alphabet.
    Bits,
    /// Characters '0'…'9' as mode superpositions.
    Digits,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CrosstalkMode {
    Raw,
    Nn,
}

#[derive(clap::Args, Debug)]
struct FiberArgs {
    #[arg(long, default_value_t = 5.0)]
    core_radius_um: f64,
    #[arg(long, default_value_t = 0.1)]
    na: f64,
    #[arg(long, default_value_t = 633.0)]
    wavelength_nm: f64,
    #[arg(long, default_value_t = 1.0)]
    length_m: f64,
    #[arg(long, default_value_t = 1.457)]
    n_core: f64,
}

impl FiberArgs {
    fn spec(&self) -> Result<FiberSpec<f64>> {
        Ok(FiberSpec::new(
            self.core_radius_um * 1e-6,
            self.na,
            self.wavelength_nm * 1e-9,
            self.length_m,
            self.n_core,
        )?)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve and print the guided LP modes.
    FiberModes {
        #[command(flatten)]
        fiber: FiberArgs,
        /// Directory for modes.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a labelled frame dataset over the displacement sweep.
    DatasetGen {
        #[arg(long, value_enum, default_value = "single")]
        kind: Kind,
        #[arg(long, default_value_t = 0.1)]
        step_mm: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the classifier on a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 64)]
        hidden: usize,
        #[arg(long, default_value_t = 1000)]
        epochs: usize,
        #[arg(long, default_value_t = 6)]
        patience: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for model.json, training_log.json, confusion.csv, report.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-talk matrix: raw modal projection or trained-classifier confusion.
    Crosstalk {
        #[arg(long, value_enum)]
        mode: CrosstalkMode,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Channel seed when no dataset is given.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        step_mm: f64,
        /// Also write a grayscale heatmap.
        #[arg(long)]
        heatmap: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Send a text message through the channel and decode it.
    SendText {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "This is my first message!")]
        message: String,
        #[arg(long, default_value = "bitwise")]
        mode: TransmissionMode,
        #[arg(long, default_value = "random")]
        strain: StrainSchedule,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Send a binary PGM image pixel by pixel and rebuild it.
    SendImage {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value = "random")]
        strain: StrainSchedule,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an intensity frame before or after the fiber.
    Render {
        /// Comma-separated LG charges, e.g. "10" or "3,4,8".
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "symbol")]
        charges: Vec<i32>,
        /// A character whose alphabet superposition is rendered.
        #[arg(long)]
        symbol: Option<char>,
        #[arg(long, default_value = "input")]
        stage: RenderStage,
        #[arg(long, default_value_t = 0.0)]
        d_mm: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output PGM file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dump the 63 block features of every dataset frame as CSV.
    Features {
        #[arg(long)]
        dataset: PathBuf,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_channel(seed: u64) -> Result<Channel<f64>> {
    let spec = ChannelSpec::new(FiberSpec::reference(), seed);
    let camera = CameraSpec::for_fiber(&spec.fiber);
    Ok(Channel::new(spec, camera)?)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn load_model(path: &Path) -> Result<Mlp<f64>> {
    Mlp::load(path).with_context(|| format!("cannot load model {}", path.display()))
}

/// The channel a model's training frames came from.
fn model_channel(model: &Mlp<f64>) -> Result<Channel<f64>> {
    let Some(origin) = model.origin else {
        bail!("model does not record the channel it was trained on");
    };
    Ok(Channel::new(origin.channel, origin.camera)?)
}

#[derive(Serialize)]
struct ModeRow {
    l: i32,
    p: u32,
    beta: f64,
    u: f64,
    w: f64,
}

#[derive(Serialize)]
struct ModesReport {
    v_number: f64,
    modes: Vec<ModeRow>,
}

fn fiber_modes(fiber: &FiberArgs, out: Option<&Path>) -> Result<()> {
    let spec = fiber.spec()?;
    let v = spec.v_number()?;
    let modes = solve_lp_modes(&spec)?;
    println!("V = {v:.4}, {} guided modes", modes.len());
    println!("{:>4} {:>3} {:>16} {:>10} {:>10}", "l", "p", "beta (rad/m)", "u", "w");
    for m in &modes {
        println!("{:>4} {:>3} {:>16.6e} {:>10.6} {:>10.6}", m.l, m.p, m.beta, m.u, m.w);
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        let report = ModesReport {
            v_number: v,
            modes: modes
                .iter()
                .map(|m| ModeRow { l: m.l, p: m.p, beta: m.beta, u: m.u, w: m.w })
                .collect(),
        };
        write_json(&dir.join("modes.json"), &report)?;
    }
    Ok(())
}

fn dataset_gen(kind: Kind, step_mm: f64, seed: u64, out: &Path) -> Result<()> {
    let channel = default_channel(seed)?;
    let (dkind, classes) = match kind {
        Kind::Single => (DatasetKind::SingleMode, single_mode_classes(-10..=10)),
        Kind::Bits => (DatasetKind::SingleMode, single_mode_classes(1..=8)),
        Kind::Digits => (DatasetKind::Superposition, character_classes(DIGITS)?),
    };
    let t = Instant::now();
    let data = generate_dataset(&channel, dkind, classes, step_mm)?;
    info!("generated {} frames in {:.1?}", data.frames.len(), t.elapsed());
    data.write(out)
        .with_context(|| format!("cannot write dataset to {}", out.display()))?;
    println!(
        "{} classes × {} frames written to {}",
        data.manifest.classes.len(),
        data.frames.len() / data.manifest.classes.len(),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct TrainReport<'a> {
    test_accuracy: f64,
    test_mean_diagonal: f64,
    summary: &'a fibercrypt::nn::TrainSummary,
    confusion: &'a ConfusionMatrix,
}

fn load_features(dir: &Path) -> Result<(Dataset<f64>, Vec<Vec<f64>>)> {
    let data = Dataset::<f64>::read(dir)
        .with_context(|| format!("cannot load dataset {}", dir.display()))?;
    let xs = features(&data.frames)?;
    Ok((data, xs))
}

fn train_cmd(dataset: &Path, cfg: TrainConfig, out: &Path) -> Result<()> {
    let (data, xs) = load_features(dataset)?;
    let labels = data.manifest.labels();
    let t = Instant::now();
    let mut trained = train::train(&xs, &labels, data.manifest.class_names(), &cfg)?;
    eprintln!("training took {:.1?}", t.elapsed());
    trained.model.origin = Some(data.manifest.origin());
    let test_x: Vec<_> = trained.split.test.iter().map(|&i| xs[i].clone()).collect();
    let test_y: Vec<_> = trained.split.test.iter().map(|&i| labels[i]).collect();
    let cm = ConfusionMatrix::evaluate(&trained.model, &test_x, &test_y)?;
    create_dir(out)?;
    trained.model.save(&out.join("model.json"))?;
    write_json(&out.join("training_log.json"), &trained.log)?;
    write_text(&out.join("confusion.csv"), &cm.normalized().to_csv())?;
    let summary = trained.model.training.as_ref().expect("set by training");
    let report = TrainReport {
        test_accuracy: cm.accuracy(),
        test_mean_diagonal: cm.mean_diagonal(),
        summary,
        confusion: &cm,
    };
    write_json(&out.join("report.json"), &report)?;
    println!(
        "test accuracy {:.4}, mean diagonal {:.4}, {} epochs ({:?})",
        report.test_accuracy, report.test_mean_diagonal, summary.epochs, summary.stop
    );
    Ok(())
}

#[derive(Serialize)]
struct CrosstalkReport<'a> {
    mode: &'static str,
    mean_diagonal: f64,
    matrix: &'a fibercrypt::nn::LabeledMatrix,
}

fn crosstalk(
    mode: CrosstalkMode,
    dataset: Option<&Path>,
    model: Option<&Path>,
    seed: u64,
    step_mm: f64,
    heatmap: bool,
    out: &Path,
) -> Result<()> {
    let (name, matrix) = match mode {
        CrosstalkMode::Raw => {
            let (channel, classes, step) = match dataset {
                Some(dir) => {
                    let m = read_manifest::<f64>(dir)?;
                    (Channel::new(m.channel, m.camera)?, m.classes, m.step_mm)
                }
                None => (default_channel(seed)?, single_mode_classes(-10..=10), step_mm),
            };
            let receivers = classes
                .iter()
                .map(|c| match c.charges.as_slice() {
                    [l] => Ok(*l),
                    _ => bail!("raw cross-talk needs single-mode classes, {:?} is a superposition", c.name),
                })
                .collect::<Result<Vec<_>>>()?;
            ("raw", raw_crosstalk(&channel, &classes, &receivers, step)?)
        }
        CrosstalkMode::Nn => {
            let (Some(dir), Some(model_path)) = (dataset, model) else {
                bail!("--mode nn needs --dataset and --model");
            };
            let model = load_model(model_path)?;
            let (data, xs) = load_features(dir)?;
            if model.class_names != data.manifest.class_names() {
                bail!("model classes {:?} do not match the dataset", model.class_names);
            }
            let labels = data.manifest.labels();
            // evaluate on the held-out part when the model records its split
            let idx: Vec<usize> = match &model.training {
                Some(t) => split_dataset(&labels, model.shape.classes, t.config.fractions, t.config.seed)?.test,
                None => (0..labels.len()).collect(),
            };
            let tx: Vec<_> = idx.iter().map(|&i| xs[i].clone()).collect();
            let ty: Vec<_> = idx.iter().map(|&i| labels[i]).collect();
            ("nn", ConfusionMatrix::evaluate(&model, &tx, &ty)?.normalized())
        }
    };
    create_dir(out)?;
    write_text(&out.join(format!("crosstalk_{name}.csv")), &matrix.to_csv())?;
    write_json(
        &out.join(format!("crosstalk_{name}.json")),
        &CrosstalkReport { mode: name, mean_diagonal: matrix.mean_diagonal(), matrix: &matrix },
    )?;
    if heatmap {
        matrix.heatmap(16).write(&out.join(format!("crosstalk_{name}.pgm")))?;
    }
    println!("{name} cross-talk mean diagonal {:.4}", matrix.mean_diagonal());
    Ok(())
}

fn send_text_cmd(
    model: &Path,
    message: &str,
    mode: TransmissionMode,
    strain: StrainSchedule,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let model = load_model(model)?;
    let channel = model_channel(&model)?;
    let t = Instant::now();
    let report = send_text(&channel, &model, message.as_bytes(), mode, strain, seed)?;
    eprintln!("transmission took {:.1?}", t.elapsed());
    create_dir(out)?;
    write_json(&out.join("report.json"), &report)?;
    println!("sent:    {message}");
    println!("decoded: {}", report.decoded_text.as_deref().unwrap_or_default());
    match report.mse {
        Some(mse) => println!("MSE {mse}"),
        None => println!("MSE undefined (empty message)"),
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(())
}

fn send_image_cmd(model: &Path, image: &Path, strain: StrainSchedule, seed: u64, out: &Path) -> Result<()> {
    let model = load_model(model)?;
    let channel = model_channel(&model)?;
    let img = GrayImage::read(image).with_context(|| format!("cannot read {}", image.display()))?;
    let t = Instant::now();
    let (decoded, report) = send_image(&channel, &model, &img, strain, seed)?;
    eprintln!("transmission took {:.1?}", t.elapsed());
    for w in &report.warnings {
        log::warn!("{w}");
    }
    create_dir(out)?;
    decoded.write(&out.join("decoded.pgm"))?;
    write_json(&out.join("report.json"), &report)?;
    println!(
        "{}×{} image, MSE {}",
        img.width,
        img.height,
        report.mse.map_or("undefined".into(), |m| m.to_string())
    );
    Ok(())
}

fn render_cmd(
    charges: &[i32],
    symbol: Option<char>,
    stage: RenderStage,
    d_mm: f64,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let charges = match symbol {
        Some(c) if c.is_ascii() => fibercrypt::codec::char_to_charges(c as u8),
        Some(c) => bail!("{c:?} is not an ASCII character"),
        None => charges.to_vec(),
    };
    if charges.is_empty() {
        bail!("nothing to render: give --charges or a non-null --symbol");
    }
    let channel = default_channel(seed)?;
    let img = render(&channel, &charges, stage, d_mm, seed)?;
    img.write(out)?;
    println!("{}×{} frame written to {}", img.width, img.height, out.display());
    Ok(())
}

fn features_cmd(dataset: &Path, out: &Path) -> Result<()> {
    let (_, xs) = load_features(dataset)?;
    let mut csv = (0..xs.first().map_or(0, Vec::len))
        .map(|i| format!("f{i}"))
        .collect::<Vec<_>>()
        .join(",");
    csv.push('\n');
    for x in &xs {
        csv.push_str(&x.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    write_text(out, &csv)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FiberModes { fiber, out } => fiber_modes(&fiber, out.as_deref()),
        Command::DatasetGen { kind, step_mm, seed, out } => dataset_gen(kind, step_mm, seed, &out),
        Command::Train { dataset, hidden, epochs, patience, seed, out } => {
            let mut cfg = TrainConfig { hidden, seed, ..Default::default() };
            cfg.scg.max_epochs = epochs;
            cfg.scg.patience = patience;
            train_cmd(&dataset, cfg, &out)
        }
        Command::Crosstalk { mode, dataset, model, seed, step_mm, heatmap, out } => crosstalk(
            mode,
            dataset.as_deref(),
            model.as_deref(),
            seed,
            step_mm,
            heatmap,
            &out,
        ),
        Command::SendText { model, message, mode, strain, seed, out } => {
            send_text_cmd(&model, &message, mode, strain, seed, &out)
        }
        Command::SendImage { model, image, strain, seed, out } => {
            send_image_cmd(&model, &image, strain, seed, &out)
        }
        Command::Render { charges, symbol, stage, d_mm, seed, out } => {
            render_cmd(&charges, symbol, stage, d_mm, seed, &out)
        }
        Command::Features { dataset, out } => features_cmd(&dataset, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if cli.verbose {
        "info"
    } else {
        "warn"
    }))
    .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
