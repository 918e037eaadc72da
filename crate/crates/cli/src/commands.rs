use crate::error::{io, usage, CliError, Result};
use crate::manifest::RunManifest;
use crate::{write_atomic, GenDataArgs, ModelArgs, ReportArgs, SweepArgs, TrainArgs};
use serde::Serialize;
use std::path::{Path, PathBuf};
use thc_core::data::{
    compute_normalization_stats, encode_record, generate_cohort, load_cohort, save_cohort,
    CohortConfig, PatientRecord,
};
use thc_core::entropy::Alpha;
use thc_core::experiment::{
    format_report, parse_alpha_list, parse_grid, parse_sweep_csv, run_sweep, ReportFormat,
    SweepConfig,
};
use thc_core::net::{self, checkpoint, LossWeights, Model, ModelConfig, Sample, TrainConfig};

pub const CHECKPOINT_FILE: &str = "model.thcm";
pub const TRACE_FILE: &str = "trace.csv";
pub const STATS_FILE: &str = "normalization.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_MD: &str = "sweep.md";

fn parse_size(text: &str) -> Result<[usize; 3]> {
    let dims: Vec<usize> = text
        .split('x')
        .map(|d| d.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("bad --size {text:?}; expected H, HxW or HxWxC")))?;
    match dims[..] {
        [h] => Ok([h, h, 1]),
        [h, w] => Ok([h, w, 1]),
        [h, w, c] => Ok([h, w, c]),
        _ => Err(usage(format!("bad --size {text:?}; expected H, HxW or HxWxC"))),
    }
}

fn parse_widths(text: &str, flag: &str) -> Result<Vec<usize>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|w| w.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| usage(format!("bad --{flag} {text:?}; expected comma-separated integers")))
}

fn alpha(value: f64) -> Result<Alpha> {
    Alpha::new(value).map_err(usage)
}

pub fn gen_data(args: &GenDataArgs) -> Result<()> {
    let mut config = CohortConfig::preset(&args.preset)?;
    config.seed = args.seed;
    if let Some(n) = args.n {
        config.n_patients = n;
    }
    if let Some(size) = &args.size {
        config.image_shape = parse_size(size)?;
    }
    if let Some(s) = args.signal {
        config.signal_strength = s;
    }
    if let Some(p) = args.label_noise {
        config.label_noise = p;
    }
    config.validate()?;
    let records = generate_cohort(&config)?;
    let written = save_cohort(&records, &args.out)?;
    log::info!("wrote {} patients to {}", records.len(), args.out.display());
    let seeds = vec![config.seed];
    let manifest = RunManifest::new("gen-data", config, seeds, &args.out, &written);
    println!("{}", manifest.write(&args.out)?.display());
    Ok(())
}

fn load(dir: &Path) -> Result<Vec<PatientRecord>> {
    load_cohort(dir).map_err(|e| io(format!("cannot load cohort {}: {e}", dir.display())))
}

fn apply_model_args(a: &ModelArgs, model: &mut ModelConfig, train: &mut TrainConfig) -> Result<()> {
    if let Some(v) = a.epochs {
        train.epochs = v;
    }
    if let Some(v) = a.batch_size {
        train.batch_size = v;
    }
    if let Some(v) = a.lr {
        train.learning_rate = v;
    }
    if let Some(v) = &a.loss {
        train.loss = v.clone();
    }
    if let Some(v) = &a.optimizer {
        train.optimizer = v.clone();
    }
    if let Some(v) = &a.channels {
        model.channels_per_level = parse_widths(v, "channels")?;
        model.encoder_levels = model.channels_per_level.len();
    }
    if let Some(v) = &a.dense {
        model.dense_widths = parse_widths(v, "dense")?;
    }
    if a.rec_weight.is_some() || a.pred_weight.is_some() {
        train.loss_weights = LossWeights::new(
            a.rec_weight.unwrap_or(train.loss_weights.rec),
            a.pred_weight.unwrap_or(train.loss_weights.pred),
        );
    }
    Ok(())
}

fn volume_shape(records: &[PatientRecord]) -> Result<[usize; 3]> {
    let shape = records[0].volume.shape();
    if let Some(r) = records.iter().find(|r| r.volume.shape() != shape) {
        return Err(io(format!("{} has volume shape {:?}, expected {shape:?}", r.id, r.volume.shape())));
    }
    Ok([shape[0], shape[1], shape[2]])
}

#[derive(Debug, Serialize)]
struct TrainRun {
    data: String,
    model: ModelConfig,
    train: TrainConfig,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let mut model = ModelConfig {
        seed: args.seed,
        ..ModelConfig::default()
    };
    let mut train = TrainConfig {
        alpha: alpha(args.alpha)?,
        seed: args.seed,
        ..TrainConfig::default()
    };
    apply_model_args(&args.model, &mut model, &mut train)?;
    train.validate()?;
    let records = load(&args.data)?;
    model.input_shape = volume_shape(&records)?;
    model.validate()?;

    let stats = compute_normalization_stats(records.iter().map(|r| &r.quantitative))?;
    let samples: Vec<Sample> = records
        .iter()
        .map(|r| Sample {
            volume: r.volume.clone(),
            clinical: encode_record(r, &stats).into_data(),
            label: r.recurrence,
        })
        .collect();
    let outcome = net::train(Model::build(model.clone())?, &samples, &train)?;

    std::fs::create_dir_all(&args.out)?;
    let ckpt = args.out.join(CHECKPOINT_FILE);
    write_atomic(&ckpt, &checkpoint::encode(&outcome.model)?)?;
    let trace = args.out.join(TRACE_FILE);
    let mut buf = Vec::new();
    net::train::write_trace_csv(&outcome.trace, &mut buf)?;
    write_atomic(&trace, &buf)?;
    let stats_path = args.out.join(STATS_FILE);
    let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    write_atomic(&stats_path, json.as_bytes())?;

    let run = TrainRun {
        data: args.data.to_string_lossy().into_owned(),
        model,
        train,
    };
    let seeds = vec![args.seed];
    let manifest = RunManifest::new("train", run, seeds, &args.out, &[ckpt, trace, stats_path]);
    println!("{}", manifest.write(&args.out)?.display());
    Ok(())
}

fn resolve_sweep(args: &SweepArgs) -> Result<SweepConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| io(format!("cannot read {}: {e}", path.display())))?;
            SweepConfig::from_toml_str(&text)?
        }
        None => SweepConfig::default(),
    };
    if let Some(g) = &args.grid {
        config.alpha_grid = parse_grid(g)?;
    }
    if let Some(list) = &args.alphas {
        config.alpha_grid = parse_alpha_list(list)?;
    }
    if let Some(d) = &args.data {
        config.data = Some(d.clone());
    }
    if let Some(t) = &args.test {
        config.test = t.clone();
    }
    if let Some(k) = args.k {
        config.k = k;
    }
    if let Some(s) = args.seed {
        config.base_seed = s;
    }
    apply_model_args(&args.model, &mut config.model, &mut config.train)?;
    if args.parallel_folds == 0 {
        return Err(usage("--parallel-folds must be at least 1"));
    }
    Ok(config)
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let mut config = resolve_sweep(args)?;
    let data: PathBuf = config
        .data
        .clone()
        .ok_or_else(|| usage("no cohort given: pass --data or set `data` in the config"))?;
    // catch grid and flag mistakes before touching the data
    config.validate()?;
    let records = load(&data)?;
    config.model.input_shape = volume_shape(&records)?;
    let outcome = run_sweep(&config, &records, args.parallel_folds)?;

    std::fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join(SWEEP_CSV);
    write_atomic(&csv_path, format_report(&outcome.rows, ReportFormat::Csv).as_bytes())?;
    let markdown = format_report(&outcome.rows, ReportFormat::Markdown);
    let md_path = args.out.join(SWEEP_MD);
    write_atomic(&md_path, markdown.as_bytes())?;
    let seeds = (0..config.k)
        .map(|f| thc_core::experiment::folds::fold_seed(config.base_seed, f))
        .collect();
    let manifest = RunManifest::new("sweep", config, seeds, &args.out, &[csv_path, md_path]);
    manifest.write(&args.out)?;
    print!("{markdown}");
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let format: ReportFormat = args.format.parse().map_err(usage)?;
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| io(format!("cannot read {}: {e}", args.input.display())))?;
    let rows = parse_sweep_csv(&text).map_err(|e| -> CliError { e.into() })?;
    let rendered = format_report(&rows, format);
    match &args.out {
        Some(path) => write_atomic(path, rendered.as_bytes())?,
        None => print!("{rendered}"),
    }
    Ok(())
}
