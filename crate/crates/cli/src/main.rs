//! `edmol`: density, point clouds, token encoding, training, generation and
//! evaluation from the command line.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 internal invariant
//! violation.

mod config;

use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edmol_core::chem::{parse_smiles, read_sdf, write_sdf, write_smiles, Molecule};
use edmol_core::density::{
    compute_density, read_grid, sample_point_cloud, write_grid, FormFactorMode, LabeledPointCloud,
};
use edmol_core::encoding::{cloud_lattice, encode_cloud, encode_molecule, EncodedSequence};
use edmol_core::fsmiles::{detokenize, prepare_for_tokens, token_string, tokenize};
use edmol_core::generate::{complete_molecules, generate, sidecar_json, Status};
use edmol_core::geom::Lattice;
use edmol_core::metrics::recovery_and_diversity;
use edmol_core::model::{load_checkpoint, save_checkpoint, train, EncodedExample, ModelError};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "edmol", version, about = "Electron-density-conditioned 3D molecule generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calculated electron density of the first SDF record, written as a grid file.
    Density(DensityArgs),
    /// Labeled point cloud sampled from a density grid.
    Pointcloud(PointcloudArgs),
    /// Token, lattice and geometry encoding of the first SDF record.
    Encode(EncodeArgs),
    /// Prints the fragment-SMILES tokens of a SMILES string.
    Tokenize(TokenizeArgs),
    /// Prints the SMILES of an encoded sequence.
    Detokenize(DetokenizeArgs),
    /// Density, point cloud and encoding for every SDF record, as a training directory.
    Prepare(PrepareArgs),
    /// Trains a model on a prepared directory.
    Train(TrainArgs),
    /// Generates molecules conditioned on a point cloud.
    Generate(GenerateArgs),
    /// Fingerprint similarity report of generated molecules against references.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormFactor {
    ConstantZ,
    Gaussian,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration JSON; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DensityArgs {
    /// Input SDF; only the first record is used.
    #[arg(long = "in")]
    input: PathBuf,
    /// Resolution cutoff in Å [default: 3.5, or the config value].
    #[arg(long)]
    d_min: Option<f64>,
    /// Atomic scattering factor model [default: constant-z, or the config value].
    #[arg(long, value_enum)]
    form_factor: Option<FormFactor>,
    /// Cell padding in Å [default: 4.0, or the config value].
    #[arg(long)]
    padding: Option<f64>,
    /// Output grid file.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct PointcloudArgs {
    /// Density grid file.
    #[arg(long)]
    grid: PathBuf,
    /// SDF of the molecule the grid was computed from, used for labels.
    #[arg(long)]
    mol: PathBuf,
    /// Number of points.
    #[arg(long, default_value_t = 199)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Resolution the grid was computed at, recorded in the output [default: 3.5].
    #[arg(long, default_value_t = 3.5)]
    d_min: f64,
    /// Output point-cloud JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    /// Input SDF; only the first record is used.
    #[arg(long)]
    sdf: PathBuf,
    /// Point cloud whose centroid anchors the lattice; the molecule's own
    /// centroid is used without it.
    #[arg(long)]
    pointcloud: Option<PathBuf>,
    /// Output JSON; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct TokenizeArgs {
    #[arg(long)]
    smiles: String,
}

#[derive(Args)]
struct DetokenizeArgs {
    /// Encoded sequence JSON.
    #[arg(long = "in")]
    input: PathBuf,
}

#[derive(Args)]
struct PrepareArgs {
    /// Input SDF with one record per molecule.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory; record i becomes NNNN.cloud.json and NNNN.seq.json.
    #[arg(long)]
    out: PathBuf,
    /// Base seed; record i samples its cloud with seed + i [default: config seed, 0].
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory written by `prepare`.
    #[arg(long)]
    data: PathBuf,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// CSV file receiving "step,loss" rows.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Initialization and shuffling seed [default: config seed, 0].
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct GenerateArgs {
    /// Checkpoint written by `train`; its shapes must match the config's model.
    #[arg(long)]
    ckpt: PathBuf,
    /// Conditioning point-cloud JSON.
    #[arg(long)]
    pointcloud: PathBuf,
    /// Number of rollouts [default: 10, or the config value].
    #[arg(long)]
    n: Option<usize>,
    /// Sampling temperature [default: 0.7, or the config value].
    #[arg(long)]
    temperature: Option<f64>,
    /// Rollout i uses seed + i [default: config seed, 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Output SDF of complete molecules.
    #[arg(long)]
    out: PathBuf,
    /// Per-rollout JSON record [default: the output path with .json appended].
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArg,
}

#[derive(Args)]
struct EvalArgs {
    /// Generated molecules (SDF).
    #[arg(long)]
    gen: PathBuf,
    /// Reference actives, one SMILES per line.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Output report JSON; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Internal(String),
}

type Result<T> = std::result::Result<T, Failure>;

fn input<E: Display>(context: impl Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(input(path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(input(path.display()))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    match &arg.config {
        None => Ok(RunConfig::default()),
        Some(p) => RunConfig::from_json(&read(p)?).map_err(input(p.display())),
    }
}

fn first_record(path: &Path) -> Result<Molecule> {
    read_sdf(&read(path)?)
        .map_err(input(path.display()))?
        .into_iter()
        .next()
        .ok_or_else(|| Failure::Input(format!("{}: no records", path.display())))
}

fn read_cloud(path: &Path) -> Result<LabeledPointCloud> {
    LabeledPointCloud::from_json(&read(path)?).map_err(input(path.display()))
}

fn model_failure(e: ModelError) -> Failure {
    match e {
        ModelError::NonFinite(_) => Failure::Internal(e.to_string()),
        other => Failure::Input(other.to_string()),
    }
}

fn cmd_density(a: DensityArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?.density;
    if let Some(d) = a.d_min {
        cfg.d_min = d;
    }
    if let Some(p) = a.padding {
        cfg.padding = p;
    }
    if let Some(f) = a.form_factor {
        cfg.form_factor.mode = match f {
            FormFactor::ConstantZ => FormFactorMode::ConstantZ,
            FormFactor::Gaussian => FormFactorMode::Gaussian,
        };
    }
    let mol = first_record(&a.input)?;
    let (sf, grid) = compute_density(&mol, &cfg).map_err(input("density"))?;
    write(&a.out, &write_grid(&grid))?;
    let [nx, ny, nz] = grid.dims;
    println!("miller_indices {}", sf.entries.len());
    println!("grid {nx}x{ny}x{nz}");
    println!("integrated_electrons {:.6} expected {}", grid.integral(), mol.electron_count());
    Ok(())
}

fn cmd_pointcloud(a: PointcloudArgs) -> Result<()> {
    let grid = read_grid(&read(&a.grid)?).map_err(input(a.grid.display()))?;
    let mol = first_record(&a.mol)?;
    let cloud = sample_point_cloud(&grid, &mol, a.n, a.d_min, a.seed).map_err(input("point cloud"))?;
    write(&a.out, &cloud.to_json())
}

fn cmd_encode(a: EncodeArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let mol = first_record(&a.sdf)?;
    let lattice = match &a.pointcloud {
        Some(p) => cloud_lattice(&read_cloud(p)?, cfg.discretization),
        None => Lattice::centered_on(cfg.discretization, &prepare_for_tokens(&mol).0.positions()),
    };
    let enc = encode_molecule(&mol, &lattice).map_err(input(a.sdf.display()))?;
    if enc.clamped > 0 {
        eprintln!("warning: {} atom coordinates clamped to the lattice range", enc.clamped);
    }
    emit(a.out.as_deref(), &enc.sequence.to_json())
}

fn cmd_tokenize(a: TokenizeArgs) -> Result<()> {
    let mol = parse_smiles(&a.smiles).map_err(input("SMILES"))?;
    let events = tokenize(&prepare_for_tokens(&mol).0).map_err(input("tokenize"))?;
    println!("{}", token_string(&events));
    Ok(())
}

fn cmd_detokenize(a: DetokenizeArgs) -> Result<()> {
    let seq = EncodedSequence::from_json(&read(&a.input)?).map_err(input(a.input.display()))?;
    let events = seq.events().map_err(input(a.input.display()))?;
    let mol = detokenize(&events).map_err(input("detokenize"))?;
    println!("{}", write_smiles(&mol));
    Ok(())
}

fn cmd_prepare(a: PrepareArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let mols = read_sdf(&read(&a.input)?).map_err(input(a.input.display()))?;
    fs::create_dir_all(&a.out).map_err(input(a.out.display()))?;
    let mut written = 0;
    for (i, mol) in mols.iter().enumerate() {
        let prepared = compute_density(mol, &cfg.density)
            .and_then(|(_, grid)| {
                sample_point_cloud(&grid, mol, cfg.density.n_points, cfg.density.d_min, seed.wrapping_add(i as u64))
            })
            .map_err(|e| e.to_string())
            .and_then(|cloud| {
                let lattice = cloud_lattice(&cloud, cfg.discretization);
                let enc = encode_molecule(mol, &lattice).map_err(|e| e.to_string())?;
                Ok((cloud, enc))
            });
        match prepared {
            Ok((cloud, enc)) => {
                write(&a.out.join(format!("{i:04}.cloud.json")), &cloud.to_json())?;
                write(&a.out.join(format!("{i:04}.seq.json")), &enc.sequence.to_json())?;
                written += 1;
            }
            Err(e) => eprintln!("skipping record {i} ({}): {e}", mol.name),
        }
    }
    println!("prepared {written} of {} records", mols.len());
    Ok(())
}

fn load_dataset(dir: &Path, cfg: &RunConfig) -> Result<Vec<EncodedExample>> {
    let mut seqs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(input(dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".seq.json"))
        .collect();
    seqs.sort();
    let mut out = Vec::with_capacity(seqs.len());
    for seq_path in seqs {
        let name = seq_path.to_string_lossy().replace(".seq.json", ".cloud.json");
        let cloud = read_cloud(Path::new(&name))?;
        let seq = EncodedSequence::from_json(&read(&seq_path)?).map_err(input(seq_path.display()))?;
        let points = encode_cloud(&cloud, &cloud_lattice(&cloud, cfg.discretization));
        out.push(EncodedExample::new(&points, &seq));
    }
    if out.is_empty() {
        return Err(Failure::Input(format!("{}: no *.seq.json files", dir.display())));
    }
    Ok(out)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let seed = a.seed.unwrap_or(cfg.seed);
    let data = load_dataset(&a.data, &cfg)?;
    let mut log = match &a.log {
        Some(p) => {
            let mut f = fs::File::create(p).map_err(input(p.display()))?;
            writeln!(f, "step,loss").map_err(input(p.display()))?;
            Some((f, p.clone()))
        }
        None => None,
    };
    let mut io_error = None;
    let every = cfg.train.checkpoint_every;
    let (params, history) = train(&data, &cfg.model, &cfg.train, seed, &mut |s, p| {
        if let Some((f, path)) = log.as_mut() {
            if let Err(e) = writeln!(f, "{},{}", s.step, s.loss) {
                io_error.get_or_insert(Failure::Input(format!("{}: {e}", path.display())));
            }
        }
        if s.step % 100 == 0 {
            eprintln!("step {} loss {:.4} lr {:.3e}", s.step, s.loss, s.lr);
        }
        if every > 0 && s.step % every == 0 {
            if let Err(e) = save_checkpoint(p, &a.out) {
                io_error.get_or_insert(Failure::Input(format!("{}: {e}", a.out.display())));
            }
        }
    })
    .map_err(model_failure)?;
    if let Some(e) = io_error {
        return Err(e);
    }
    save_checkpoint(&params, &a.out).map_err(input(a.out.display()))?;
    if let Some(last) = history.steps.last() {
        println!("trained {} steps, final loss {:.6}", last.step, last.loss);
    }
    Ok(())
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let params = load_checkpoint(&a.ckpt, &cfg.model).map_err(input(a.ckpt.display()))?;
    let cloud = read_cloud(&a.pointcloud)?;
    let mut gen = cfg.generation_config();
    if let Some(n) = a.n {
        gen.n_samples = n;
    }
    if let Some(t) = a.temperature {
        gen.temperature = t;
    }
    if let Some(s) = a.seed {
        gen.seed = s;
    }
    let results = generate(&cloud, &cfg.discretization, &params, &gen).map_err(input("generate"))?;
    write(&a.out, &write_sdf(&complete_molecules(&results)))?;
    let sidecar = a.sidecar.unwrap_or_else(|| PathBuf::from(format!("{}.json", a.out.display())));
    write(&sidecar, &sidecar_json(&results))?;
    let count = |s| results.iter().filter(|r| r.status == s).count();
    println!(
        "complete {} truncated {} invalid {}",
        count(Status::Complete),
        count(Status::Truncated),
        count(Status::Invalid)
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let gen = read_sdf(&read(&a.gen)?).map_err(input(a.gen.display()))?;
    let refs = read(&a.reference)?
        .lines()
        .enumerate()
        .filter_map(|(i, l)| l.split_whitespace().next().map(|s| (i, s.to_string())))
        .map(|(i, s)| parse_smiles(&s).map_err(input(format!("{} line {}", a.reference.display(), i + 1))))
        .collect::<Result<Vec<Molecule>>>()?;
    let report = recovery_and_diversity(&gen, &refs).map_err(input("eval"))?;
    emit(a.out.as_deref(), &format!("{}\n", report.to_json()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Density(a) => cmd_density(a),
        Command::Pointcloud(a) => cmd_pointcloud(a),
        Command::Encode(a) => cmd_encode(a),
        Command::Tokenize(a) => cmd_tokenize(a),
        Command::Detokenize(a) => cmd_detokenize(a),
        Command::Prepare(a) => cmd_prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Generate(a) => cmd_generate(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(Failure::Input(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(3)
        }
        Err(_) => ExitCode::from(3),
    }
}
