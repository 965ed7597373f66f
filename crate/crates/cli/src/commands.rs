//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use qdest::artifacts::{
    load_adjacency, load_dump, load_grid, load_sequences, save_adjacency, save_dump, save_grid,
    save_sequences,
};
use qdest::checkpoint::Checkpoint;
use qdest::config::ModelConfig;
use qdest::data::{
    build_sequences, generate_synthetic_city, ingest_pois, ingest_trips, occupied_cells,
    split_by_taxi, DatasetSplit, SyntheticSpec, SYNTH_CELL_M,
};
use qdest::geo::{boc_table, build_adjacency, build_grid};
use qdest::gradcheck;
use qdest::prediction::{eds, rmse};
use qdest::train::{ablate, evaluate_with_rows, train, CityContext};
use qdest::{Error, GeoPoint, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic city: trips, POIs, and a matching config.
    Synth(SynthArgs),
    /// Build grid, adjacency, and sequence artifacts from raw inputs.
    Preprocess(PreprocessArgs),
    /// Train a model on preprocessed artifacts.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split, or score a prediction dump.
    Evaluate(EvaluateArgs),
    /// Run the four-configuration component ablation.
    Ablate(AblateArgs),
    /// Verify every gradient path against independent oracles.
    Gradcheck(GradcheckArgs),
    /// Dump the parameterized circuits as ordered gate lists.
    CircuitDump(CircuitDumpArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    #[arg(long, default_value_t = 20)]
    taxis: usize,
    #[arg(long, default_value_t = 100)]
    trips: usize,
    #[arg(long, default_value_t = 5)]
    categories: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    trips: PathBuf,
    #[arg(long)]
    pois: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory holding grid.json, adjacency.json, sequences.json.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Override the configured epoch count.
    #[arg(long)]
    epochs: Option<usize>,
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(
        long,
        required_unless_present = "score_dump",
        conflicts_with = "score_dump"
    )]
    checkpoint: Option<PathBuf>,
    #[arg(
        long,
        required_unless_present = "score_dump",
        conflicts_with = "score_dump"
    )]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    split: SplitName,
    /// Write per-sample predictions to this file.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Score an existing prediction dump instead of running a model.
    #[arg(long)]
    score_dump: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Random angle draws per circuit family.
    #[arg(long, default_value_t = 25)]
    draws: usize,
    /// Corrupt one gradient on purpose; the run must then fail.
    #[arg(long, hide = true)]
    break_gradient: bool,
}

#[derive(Debug, Args)]
pub struct CircuitDumpArgs {
    #[arg(long)]
    config: PathBuf,
    /// Read angle parameters from this checkpoint instead of a fresh
    /// initialization.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::CircuitDump(args) => cmd_circuit_dump(args),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Data(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents)
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", path.display())))
}

fn read_config(path: &Path) -> Result<ModelConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    ModelConfig::from_json_str(&text)
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        seed: args.seed,
        n_rows: args.rows,
        n_cols: args.cols,
        n_taxis: args.taxis,
        trips_per_taxi: args.trips,
        k_poi: args.categories,
    };
    let (grid, pois, trips) = generate_synthetic_city(&spec)?;
    ensure_dir(&args.out)?;

    let mut trips_csv =
        String::from("taxi_id,pickup_time,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat\n");
    for t in &trips {
        trips_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.taxi_id,
            t.pickup_time
                .to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            t.pickup.lon,
            t.pickup.lat,
            t.dropoff.lon,
            t.dropoff.lat
        ));
    }
    write_file(&args.out.join("trips.csv"), &trips_csv)?;

    let mut pois_csv = String::from("lon,lat,category_id\n");
    for p in &pois {
        pois_csv.push_str(&format!(
            "{},{},{}\n",
            p.location.lon, p.location.lat, p.category
        ));
    }
    write_file(&args.out.join("pois.csv"), &pois_csv)?;

    let mut config = ModelConfig::default();
    config.grid.bbox = grid.bbox;
    config.grid.cell_size_m = SYNTH_CELL_M;
    config.data.k_poi = spec.k_poi;
    config.train.seed = spec.seed;
    write_file(&args.out.join("config.json"), &config.to_json_string()?)?;

    println!(
        "synth: taxis={} trips={} pois={} grid={}x{} out={}",
        spec.n_taxis,
        trips.len(),
        pois.len(),
        grid.n_rows,
        grid.n_cols,
        args.out.display()
    );
    Ok(())
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<()> {
    let config = read_config(&args.config)?;
    let (trips, trip_report) = ingest_trips(&args.trips)?;
    let (pois, poi_report) = ingest_pois(&args.pois)?;

    let grid = build_grid(config.grid.bbox, config.grid.cell_size_m)?;
    let boc = boc_table(&pois, &grid, config.data.k_poi)?;
    let sequences = build_sequences(
        &trips,
        &grid,
        &boc,
        config.data.gap_hours,
        config.data.seq_len,
        config.data.one_per_segment,
    )?;
    let occupied = occupied_cells(&trips, &grid);
    if occupied.is_empty() {
        return Err(Error::Data(
            "no trips fall inside the configured bounding box".into(),
        ));
    }
    let adjacency = build_adjacency(&grid, &occupied, config.grid.tau_km)?;

    ensure_dir(&args.out)?;
    save_grid(&args.out.join("grid.json"), &grid)?;
    save_adjacency(
        &args.out.join("adjacency.json"),
        &occupied,
        config.grid.tau_km,
        &adjacency,
    )?;
    save_sequences(&args.out.join("sequences.json"), &sequences)?;

    if trip_report.skipped > 0 || poi_report.skipped > 0 {
        log::warn!(
            "skipped rows: trips={} pois={}",
            trip_report.skipped,
            poi_report.skipped
        );
    }
    println!(
        "preprocess: trajectories={} sequences={} grids={} pois={}",
        trip_report.parsed,
        sequences.len(),
        occupied.len(),
        poi_report.parsed
    );
    Ok(())
}

struct LoadedData {
    split: DatasetSplit,
    ctx: CityContext,
}

fn load_data(config: &ModelConfig, dir: &Path) -> Result<LoadedData> {
    let grid = load_grid(&dir.join("grid.json"))?;
    let (occupied, _tau, adjacency) = load_adjacency(&dir.join("adjacency.json"))?;
    let sequences = load_sequences(&dir.join("sequences.json"))?;
    let split = split_by_taxi(&sequences, config.data.split_fractions, config.train.seed)?;
    let taxi_ids: Vec<u64> = sequences.iter().map(|s| s.taxi_id).collect();
    let ctx = CityContext::new(grid, occupied, &adjacency, taxi_ids)?;
    Ok(LoadedData { split, ctx })
}

fn apply_overrides(config: &mut ModelConfig, epochs: Option<usize>, seed: Option<u64>) {
    if let Some(epochs) = epochs {
        config.train.epochs = epochs;
    }
    if let Some(seed) = seed {
        config.train.seed = seed;
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = read_config(&args.config)?;
    apply_overrides(&mut config, args.epochs, args.seed);
    let data = load_data(&config, &args.data)?;

    let (checkpoint, report) = train(&config, &data.split, &data.ctx)?;

    ensure_dir(&args.out)?;
    write_file(
        &args.out.join("checkpoint.json"),
        &checkpoint.to_json_string()?,
    )?;
    let report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Data(format!("report encode: {e}")))?;
    write_file(&args.out.join("report.json"), &report_json)?;
    write_file(&args.out.join("curves.csv"), &report.curves_csv())?;

    log::info!("wall clock: {:.1}s", report.wall_clock_secs);
    let last = report.epochs.last();
    println!(
        "train: epochs={} best_epoch={} initial_val_eds_km={:.6} final_val_eds_km={}",
        report.epochs.len(),
        report
            .best_epoch
            .map_or("none".to_string(), |e| e.to_string()),
        report.initial_val_eds_km,
        last.map_or("n/a".to_string(), |e| format!("{:.6}", e.val_eds_km)),
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    if let Some(dump_path) = &args.score_dump {
        let rows = load_dump(dump_path)?;
        if rows.is_empty() {
            return Err(Error::Data("prediction dump has no rows".into()));
        }
        let preds: Vec<GeoPoint> = rows.iter().map(|r| r.pred).collect();
        let truths: Vec<GeoPoint> = rows.iter().map(|r| r.truth).collect();
        let eds_km = eds(&preds, &truths)?;
        let rmse_km = rmse(&preds, &truths)?;
        match args.format {
            OutputFormat::Json => println!(
                "{}",
                serde_json::json!({"eds_km": eds_km, "rmse_km": rmse_km, "samples": rows.len()})
            ),
            _ => println!(
                "evaluate: samples={} eds_km={eds_km:.6} rmse_km={rmse_km:.6}",
                rows.len()
            ),
        }
        return Ok(());
    }

    let checkpoint_path = args.checkpoint.as_ref().expect("clap enforces presence");
    let data_dir = args.data.as_ref().expect("clap enforces presence");
    let text = fs::read_to_string(checkpoint_path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", checkpoint_path.display())))?;
    let checkpoint = Checkpoint::from_json_str(&text)?;
    let (model, params) = checkpoint.restore()?;
    let data = load_data(&model.config, data_dir)?;

    let (sequences, id_base) = match args.split {
        SplitName::Train => (&data.split.train, 0),
        SplitName::Val => (&data.split.val, data.split.train.len()),
        SplitName::Test => (
            &data.split.test,
            data.split.train.len() + data.split.val.len(),
        ),
    };
    let samples = data.ctx.encode(sequences, id_base)?;
    let (metrics, rows) = evaluate_with_rows(&model, &params, &data.ctx, &samples)?;
    if let Some(dump) = &args.dump {
        save_dump(dump, &rows)?;
    }
    match args.format {
        OutputFormat::Json => println!(
            "{}",
            serde_json::to_string(&metrics)
                .map_err(|e| Error::Data(format!("metrics encode: {e}")))?
        ),
        _ => println!(
            "evaluate: samples={} eds_km={:.6} rmse_km={:.6} top1_accuracy={:.4} mean_loss={:.6}",
            samples.len(),
            metrics.eds_km,
            metrics.rmse_km,
            metrics.top1_accuracy,
            metrics.mean_loss
        ),
    }
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let mut config = read_config(&args.config)?;
    apply_overrides(&mut config, args.epochs, args.seed);
    let data = load_data(&config, &args.data)?;

    let table = ablate(&config, &data.split, &data.ctx)?;
    ensure_dir(&args.out)?;
    write_file(&args.out.join("ablation.csv"), &table.to_csv())?;
    let json = serde_json::to_string_pretty(&table)
        .map_err(|e| Error::Data(format!("ablation encode: {e}")))?;
    write_file(&args.out.join("ablation.json"), &json)?;

    match args.format {
        OutputFormat::Json => println!("{json}"),
        _ => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let checks = gradcheck::run_all(args.seed, args.draws, args.break_gradient)?;
    let mut failed = false;
    for check in &checks {
        let status = if check.passed() { "PASS" } else { "FAIL" };
        println!(
            "{status} {name}: max_rel_err={err:.3e} tolerance={tol:.0e}",
            name = check.name,
            err = check.max_err,
            tol = check.tolerance
        );
        failed |= !check.passed();
    }
    if failed {
        return Err(Error::Numeric(
            "gradient check violated its tolerance".into(),
        ));
    }
    Ok(())
}

fn cmd_circuit_dump(args: CircuitDumpArgs) -> Result<()> {
    let (model, params) = if let Some(ckpt_path) = &args.checkpoint {
        let text = fs::read_to_string(ckpt_path)
            .map_err(|e| Error::Data(format!("cannot read {}: {e}", ckpt_path.display())))?;
        Checkpoint::from_json_str(&text)?.restore()?
    } else {
        let config = read_config(&args.config)?;
        // Placeholder dimensions: circuit structure depends only on the
        // architecture, parameters come from the seeded initialization.
        let model = qdest::model::Model::new(
            config,
            qdest::model::ModelDims {
                n_nodes: 1,
                n_taxis: 1,
            },
        )?;
        let params = model.init_params();
        (model, params)
    };

    let arch = &model.config.arch;
    let n = arch.n_qubits;
    // Data-dependent slots (angle encodings) dump as zero; learned
    // rotation and coupling parameters dump at their stored values.
    let mut qgcn_angles = vec![0.0; n];
    for l in 0..arch.qgcn_layers {
        qgcn_angles.extend(
            params
                .get(&format!("qgcn.{l}.rot"))
                .expect("rot param")
                .data(),
        );
        qgcn_angles.extend(
            params
                .get(&format!("qgcn.{l}.ent"))
                .expect("ent param")
                .data(),
        );
    }
    let mut qpool_angles = vec![0.0; n];
    for l in 0..arch.qpool_layers {
        qpool_angles.extend(
            params
                .get(&format!("qpool.{l}.phi"))
                .expect("phi param")
                .data(),
        );
    }

    ensure_dir(&args.out)?;
    let qgcn = model.qgcn_circuit().dump(&qgcn_angles)?;
    let qpool = model.qpool_circuit().dump(&qpool_angles)?;
    write_file(&args.out.join("qgcn_circuit.json"), &qgcn.to_string())?;
    write_file(&args.out.join("qpool_circuit.json"), &qpool.to_string())?;
    println!(
        "circuit-dump: qgcn_gates={} qpool_gates={} out={}",
        qgcn["gates"].as_array().map_or(0, Vec::len),
        qpool["gates"].as_array().map_or(0, Vec::len),
        args.out.display()
    );
    Ok(())
}
