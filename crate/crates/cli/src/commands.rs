use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use percep::distance::{ImageMetric, L2Metric, MetricConfig, SsimMetric, Weighting};
use percep::eval::{
    afc_score, decode_image, jnd_score, load_manifest, qa_test, write_blur_datasets, write_image,
    Manifest,
};
use percep::model_io::{gen_fixture, load_model};
use percep::perception::{
    probe_layer, read_scores_csv, select_subset, write_curves_csv, write_scores_csv,
    ChannelSubset, ContrastSensitivity, CsfModel, SelectMode,
};
use percep::stimuli::{oriented_grating, radial_grating};
use percep::NetworkModel;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{pick, require, GridOverrides, MetricKind, RunConfig, SubsetMode};
use crate::{Cli, CliError, Command, GridArgs, ModelArgs, SubsetArgs};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = pick(&cli.threads, &cfg.threads) {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::GenFixture {
            seed,
            out,
            datasets,
        } => gen_fixture_cmd(
            pick(&seed, &cfg.seed).unwrap_or(0),
            &require(pick(&out, &cfg.out), "out")?,
            datasets,
        ),
        Command::DumpStimuli {
            out,
            size,
            orientation_cpd,
            grid,
        } => dump_stimuli(
            &require(pick(&out, &cfg.out), "out")?,
            size,
            orientation_cpd,
            &grid_overrides(&grid, &cfg),
        ),
        Command::Probe { model, grid, out } => {
            let (model, tap) = open_model(&model, &cfg)?;
            probe(
                &model,
                &tap,
                &grid_overrides(&grid, &cfg),
                &require(pick(&out, &cfg.out), "out")?,
            )
        }
        Command::Select {
            scores,
            mode,
            percent,
            out,
        } => {
            let subset = subset_from_scores(
                &require(pick(&scores, &cfg.scores), "scores")?,
                require(pick(&mode, &cfg.mode), "mode")?,
                pick(&percent, &cfg.percent),
            )?;
            emit(pick(&out, &cfg.out).as_deref(), &to_json(&subset)?)
        }
        Command::Distance {
            model,
            subset,
            grid,
            metric,
            pairs,
            out,
            images,
        } => {
            let metric = build_metric(
                pick(&metric, &cfg.metric).unwrap_or(MetricKind::Perceptual),
                &model,
                &subset,
                &grid,
                &cfg,
            )?;
            match pairs {
                Some(p) => distance_batch(metric.metric.as_ref(), &p, out.as_deref()),
                None if images.len() == 2 => {
                    let d = metric
                        .metric
                        .distance(&decode_image(&images[0])?, &decode_image(&images[1])?)?;
                    println!("{d}");
                    Ok(())
                }
                None => Err(CliError::Usage(
                    "give two images or --pairs <csv>".into(),
                )),
            }
        }
        Command::Evaluate {
            protocol,
            manifest,
            metric,
            model,
            subset,
            grid,
            out,
        } => {
            let protocol = require(pick(&protocol, &cfg.protocol), "protocol")?;
            let manifest = load_manifest(
                require(pick(&manifest, &cfg.manifest), "manifest")?,
                protocol,
            )?;
            let metric = build_metric(
                pick(&metric, &cfg.metric).unwrap_or(MetricKind::Perceptual),
                &model,
                &subset,
                &grid,
                &cfg,
            )?;
            evaluate(&manifest, &metric, pick(&out, &cfg.out).as_deref())
        }
    }
}

fn grid_overrides(grid: &GridArgs, cfg: &RunConfig) -> GridOverrides {
    GridOverrides {
        ppd: pick(&grid.ppd, &cfg.ppd),
        contrast: pick(&grid.contrast, &cfg.contrast),
        frequencies: pick(&grid.frequencies, &cfg.frequencies),
        orientations: pick(&grid.orientations, &cfg.orientations),
    }
}

/// Loads the model; the weights default to `weights.bin` beside the
/// manifest and the tap to the model's only tap.
fn open_model(args: &ModelArgs, cfg: &RunConfig) -> Result<(Arc<NetworkModel>, String)> {
    let manifest = require(pick(&args.model, &cfg.model), "model")?;
    let weights = pick(&args.weights, &cfg.weights).unwrap_or_else(|| {
        manifest
            .parent()
            .unwrap_or(Path::new(""))
            .join("weights.bin")
    });
    let model = load_model(&manifest, &weights)?;
    let tap = match pick(&args.tap, &cfg.tap) {
        Some(t) => t,
        None => match model.tap_names().as_slice() {
            [only] => only.clone(),
            names => {
                return Err(CliError::Usage(format!(
                    "--tap is required; available taps: {}",
                    names.join(", ")
                )))
            }
        },
    };
    // Fail early, listing the available taps, if the name is wrong.
    let input = model.input();
    model.tap_shape(&tap, input.height, input.width)?;
    Ok((Arc::new(model), tap))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(percep::Error::from)?;
    s.push('\n');
    Ok(s)
}

/// Writes `text` to `path`, or to stdout when no path is given.
fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes())
                .and_then(|_| w.flush())
                .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_fixture_cmd(seed: u64, out: &Path, datasets: bool) -> Result<()> {
    let files = gen_fixture(seed, out)?;
    println!("model    {}", files.manifest.display());
    println!("weights  {}", files.weights.display());
    if datasets {
        let sets = write_blur_datasets(out.join("datasets"), seed)?;
        println!("qa       {}", sets.qa.display());
        println!("jnd      {}", sets.jnd.display());
        println!("2afc     {}", sets.afc.display());
    }
    Ok(())
}

fn dump_stimuli(out: &Path, size: usize, orientation_cpd: Option<f64>, overrides: &GridOverrides) -> Result<()> {
    let grid = overrides.build(1, size, size)?;
    let cpd = match orientation_cpd {
        Some(c) => c,
        None => CsfModel::default().peak_frequency(grid.geometry.nyquist_cpd(), 0.01)?,
    };
    for sub in ["frequency", "orientation"] {
        fs::create_dir_all(out.join(sub))
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
    }
    let mut index = csv::Writer::from_writer(create(&out.join("index.csv"))?);
    index
        .write_record(["sweep", "value", "cpd", "path"])
        .map_err(percep::Error::from)?;
    for &f in &grid.frequencies {
        let rel = format!("frequency/f{f:06.2}.pgm");
        write_image(out.join(&rel), &radial_grating(f, &grid)?)?;
        index
            .write_record(["frequency", &f.to_string(), &f.to_string(), &rel])
            .map_err(percep::Error::from)?;
    }
    for &t in &grid.orientations {
        let rel = format!("orientation/o{t:05.1}.pgm");
        write_image(out.join(&rel), &oriented_grating(t, cpd, &grid)?)?;
        index
            .write_record(["orientation", &t.to_string(), &cpd.to_string(), &rel])
            .map_err(percep::Error::from)?;
    }
    index
        .flush()
        .map_err(|e| CliError::Usage(format!("cannot write index: {e}")))?;
    println!(
        "{} frequency and {} orientation stimuli in {}",
        grid.frequencies.len(),
        grid.orientations.len(),
        out.display()
    );
    Ok(())
}

fn probe(model: &NetworkModel, tap: &str, overrides: &GridOverrides, out: &Path) -> Result<()> {
    let input = model.input();
    let grid = overrides.build(input.channels, input.height, input.width)?;
    let scores = probe_layer(model, tap, &grid, &CsfModel::default())?;
    write_scores_csv(&scores.scores, create(out)?)?;
    write_curves_csv(tap, "cpd", &scores.frequency, create(&out.with_extension("freq.csv"))?)?;
    write_curves_csv(
        tap,
        "orientation_deg",
        &scores.orientation,
        create(&out.with_extension("orient.csv"))?,
    )?;
    println!(
        "probe: scored {} channels of '{tap}' (orientation sweep at {:.2} cpd) -> {}",
        scores.width(),
        scores.orientation_cpd,
        out.display()
    );
    Ok(())
}

fn subset_from_scores(path: &Path, mode: SubsetMode, percent: Option<f64>) -> Result<ChannelSubset> {
    let file = File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let scores = read_scores_csv(file)?;
    let layer = scores[0].layer.clone();
    let pe: Vec<f64> = scores.iter().map(|s| s.pe).collect();
    subset_from_pe(&layer, &pe, mode, percent)
}

fn subset_from_pe(layer: &str, pe: &[f64], mode: SubsetMode, percent: Option<f64>) -> Result<ChannelSubset> {
    Ok(match mode {
        SubsetMode::Full => ChannelSubset::full(layer, pe.len()),
        SubsetMode::PeWeighted => ChannelSubset::pe_weighted(layer, pe)?,
        SubsetMode::High => select_subset(layer, pe, SelectMode::High, require(percent, "percent")?)?,
        SubsetMode::Low => select_subset(layer, pe, SelectMode::Low, require(percent, "percent")?)?,
    })
}

/// A metric plus what is needed to describe it in reports.
pub struct BuiltMetric {
    pub kind: MetricKind,
    pub metric: Box<dyn ImageMetric>,
    pub model: Option<String>,
    pub tap: Option<String>,
    pub subset: Option<ChannelSubset>,
    pub weighting: Option<Weighting>,
}

fn build_metric(
    kind: MetricKind,
    model_args: &ModelArgs,
    subset_args: &SubsetArgs,
    grid: &GridArgs,
    cfg: &RunConfig,
) -> Result<BuiltMetric> {
    let baseline = |metric: Box<dyn ImageMetric>| BuiltMetric {
        kind,
        metric,
        model: None,
        tap: None,
        subset: None,
        weighting: None,
    };
    match kind {
        MetricKind::L2 => return Ok(baseline(Box::new(L2Metric))),
        MetricKind::Ssim => return Ok(baseline(Box::new(SsimMetric))),
        MetricKind::Perceptual => {}
    }
    let (model, tap) = open_model(model_args, cfg)?;
    let mode = pick(&subset_args.mode, &cfg.mode);
    let percent = pick(&subset_args.percent, &cfg.percent);
    let subset = if let Some(p) = pick(&subset_args.subset, &cfg.subset) {
        let text = fs::read_to_string(&p)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
        let subset: ChannelSubset = serde_json::from_str(&text).map_err(percep::Error::from)?;
        subset.validate()?;
        subset
    } else if let Some(p) = pick(&subset_args.scores, &cfg.scores) {
        subset_from_scores(&p, mode.unwrap_or(SubsetMode::Full), percent)?
    } else {
        match mode.unwrap_or(SubsetMode::Full) {
            SubsetMode::Full => {
                let input = model.input();
                let [width, _, _] = model.tap_shape(&tap, input.height, input.width)?;
                ChannelSubset::full(tap.clone(), width)
            }
            m => {
                // No scores given: probe inline.
                let input = model.input();
                let grid = grid_overrides(grid, cfg).build(input.channels, input.height, input.width)?;
                let scores = probe_layer(&model, &tap, &grid, &CsfModel::default())?;
                subset_from_pe(&tap, &scores.pe(), m, percent)?
            }
        }
    };
    let weighting = pick(&subset_args.weighting, &cfg.weighting).unwrap_or_default();
    let name = model.name().to_string();
    let config = MetricConfig::new(model, tap.clone(), subset.clone(), weighting)?;
    Ok(BuiltMetric {
        kind,
        metric: Box::new(config),
        model: Some(name),
        tap: Some(tap),
        subset: Some(subset),
        weighting: Some(weighting),
    })
}

#[derive(Deserialize)]
struct PairRow {
    image1: PathBuf,
    image2: PathBuf,
}

fn distance_batch(metric: &dyn ImageMetric, pairs: &Path, out: Option<&Path>) -> Result<()> {
    let base = pairs.parent().unwrap_or(Path::new("")).to_path_buf();
    let file = File::open(pairs)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", pairs.display())))?;
    let rows: Vec<PairRow> = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file)
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(percep::Error::from)?;
    if rows.is_empty() {
        return Err(percep::Error::EmptyInput(format!("{} has no pairs", pairs.display())).into());
    }
    let distances = rows
        .par_iter()
        .map(|r| {
            metric.distance(
                &decode_image(base.join(&r.image1))?,
                &decode_image(base.join(&r.image2))?,
            )
        })
        .collect::<percep::Result<Vec<f64>>>()?;
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["image1", "image2", "distance"])
        .map_err(percep::Error::from)?;
    for (r, d) in rows.iter().zip(&distances) {
        w.write_record([
            r.image1.display().to_string(),
            r.image2.display().to_string(),
            d.to_string(),
        ])
        .map_err(percep::Error::from)?;
    }
    w.flush()
        .map_err(|e| CliError::Usage(format!("cannot write distances: {e}")))
}

fn evaluate(manifest: &Manifest, metric: &BuiltMetric, out: Option<&Path>) -> Result<()> {
    let m = metric.metric.as_ref();
    let protocol = manifest.protocol();
    let (statistics, per_record, summary) = match manifest {
        Manifest::Qa(records) => {
            let r = qa_test(m, records)?;
            let s = &r.statistics;
            let summary = format!("srocc {:.4} lcc {:.4} rmse {:.4}", s.srocc, s.lcc, s.rmse);
            (json!(r.statistics), json!(r.distances), summary)
        }
        Manifest::Jnd(records) => {
            let r = jnd_score(m, records)?;
            let summary = format!("score {:.2}%", r.score);
            (
                json!({ "score": r.score, "threshold": r.threshold }),
                json!(r.distances),
                summary,
            )
        }
        Manifest::Afc(records) => {
            let r = afc_score(m, records)?;
            let summary = format!("score {:.4}", r.score);
            (json!({ "score": r.score }), json!(r.credits), summary)
        }
    };
    let subset_label = metric
        .subset
        .as_ref()
        .map(|s| s.kind.to_string())
        .unwrap_or_else(|| "-".into());
    let report = json!({
        "protocol": protocol,
        "metric": metric.kind.name(),
        "model": metric.model,
        "tap": metric.tap,
        "subset": metric.subset,
        "weighting": metric.weighting,
        "records": manifest.len(),
        "statistics": statistics,
        "per_record": per_record,
    });
    emit(out, &to_json(&report)?)?;
    let line = format!(
        "{protocol} {} {subset_label} ({} records): {summary}",
        metric.kind.name(),
        manifest.len()
    );
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    Ok(())
}
