use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use glycast::bayesnet::{ArcStrengthTable, BayesianNetworkModel, CptRecord, NetworkJson};
use glycast::dataset::write_clinical;
use glycast::evaluate::{
    derive_seed, evaluate_subjects, run_ablation, BstsForecaster, EvaluationReport, Forecaster, NoiselessForecaster,
};
use glycast::pipeline::{assemble_subjects, learn_network, load_cohort, preprocess_cohort, Cohort, EvalSubject, Preprocessed};
use glycast::preprocess::{write_exclusions, DiscreteDataset, Variable};
use glycast::similarity::Selection;
use glycast::synth::{gen_dataset, write_dataset, CLINICAL_FILE, GL_TABLE_FILE, SERIES_DIR};
use rayon::prelude::*;

use crate::config::{horizon_steps, Overrides, RunConfig};
use crate::manifest::{validate_outputs, RunManifest};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Synth,
    Preprocess,
    Learn,
    Forecast,
    Evaluate,
    Ablate,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Preprocess => "preprocess",
            Command::Learn => "learn",
            Command::Forecast => "forecast",
            Command::Evaluate => "evaluate",
            Command::Ablate => "ablate",
        }
    }
}

/// Files a stage read and wrote.
#[derive(Default)]
struct Io {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Io {
    fn create(&mut self, path: PathBuf) -> Result<BufWriter<File>> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        }
        let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        self.outputs.push(path);
        Ok(BufWriter::new(f))
    }

    fn write_text(&mut self, path: PathBuf, text: &str) -> Result<()> {
        let mut w = self.create(path)?;
        w.write_all(text.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    fn write_json<T: serde::Serialize>(&mut self, path: PathBuf, value: &T) -> Result<()> {
        let mut w = self.create(path)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Runs one command and appends its manifest. Errors carry the offending
/// file or config key.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> Result<RunManifest> {
    let start = Instant::now();
    let cfg = RunConfig::load(config_path, overrides)?;
    let mut io = Io {
        inputs: vec![config_path.to_path_buf()],
        outputs: Vec::new(),
    };
    match command {
        Command::Synth => synth(&cfg, &mut io)?,
        Command::Preprocess => preprocess(&cfg, &mut io)?,
        Command::Learn => learn(&cfg, &mut io)?,
        Command::Forecast => forecast(&cfg, &mut io)?,
        Command::Evaluate => evaluate(&cfg, &mut io)?,
        Command::Ablate => ablate(&cfg, &mut io)?,
    }
    validate_outputs(&io.outputs)?;
    let manifest = RunManifest {
        command: command.as_str().into(),
        config: config_path.to_path_buf(),
        inputs: io.inputs,
        outputs: io.outputs,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    manifest.append(&cfg.out_dir())?;
    Ok(manifest)
}

fn synth(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let dir = cfg.data_dir();
    let data = gen_dataset(&cfg.synth)?;
    write_dataset(&data, &dir)?;
    io.outputs.push(dir.join(CLINICAL_FILE));
    io.outputs.push(dir.join(GL_TABLE_FILE));
    for s in &data.cgm.series {
        io.outputs.push(dir.join(SERIES_DIR).join(format!("{}.csv", s.subject_id)));
    }
    log::info!("wrote {} subjects to {}", data.cgm.series.len(), dir.display());
    Ok(())
}

fn load(cfg: &RunConfig, io: &mut Io) -> Result<(Cohort, Preprocessed)> {
    let dir = cfg.data_dir();
    if !dir.is_dir() {
        bail!("dataset directory {} does not exist", dir.display());
    }
    let cohort = load_cohort(&dir)?;
    io.inputs.push(dir);
    let pre = preprocess_cohort(&cohort, cfg.preprocess.n_bins)?;
    Ok((cohort, pre))
}

fn preprocess(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let (cohort, pre) = load(cfg, io)?;
    let dir = cfg.out_dir().join("preprocess");
    write_clinical(&pre.records, io.create(dir.join("clinical_clean.csv"))?)?;
    pre.encoded.write_csv(io.create(dir.join("encoded.csv"))?)?;
    pre.encoded.write_sidecar(io.create(dir.join("encoded_variables.json"))?)?;
    let exclusions = dir.join("exclusions.jsonl");
    write_exclusions(&pre.exclusions, io.create(exclusions.clone())?)?;
    // An empty log is a valid output.
    io.outputs.retain(|p| *p != exclusions || !pre.exclusions.is_empty());
    for (id, reg) in &pre.regressors {
        reg.write_csv(&cohort.series[id], io.create(dir.join("regressors").join(format!("{id}.csv")))?)?;
    }
    log::info!(
        "kept {} records, excluded {}, encoded {} variables",
        pre.records.len(),
        pre.exclusions.len(),
        pre.encoded.n_vars()
    );
    Ok(())
}

fn open(path: &Path, io: &mut Io) -> Result<BufReader<File>> {
    let f = File::open(path).with_context(|| format!("cannot open input file {}", path.display()))?;
    io.inputs.push(path.to_path_buf());
    Ok(BufReader::new(f))
}

fn learning_data(cfg: &RunConfig, io: &mut Io) -> Result<DiscreteDataset> {
    match &cfg.paths.encoded {
        Some(path) => {
            let sidecar: Option<Vec<Variable>> = match &cfg.paths.sidecar {
                Some(s) => {
                    let r = open(s, io)?;
                    Some(serde_json::from_reader(r).with_context(|| format!("invalid sidecar {}", s.display()))?)
                }
                None => None,
            };
            let r = open(path, io)?;
            DiscreteDataset::read_csv(r, sidecar).with_context(|| format!("invalid encoded dataset {}", path.display()))
        }
        None => Ok(load(cfg, io)?.1.encoded),
    }
}

fn write_strengths(table: &ArcStrengthTable, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["from", "to", "strength"])?;
    for ((i, j), s) in table.ranked() {
        w.write_record([table.nodes[i].as_str(), table.nodes[j].as_str(), &s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn learn(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let data = learning_data(cfg, io)?;
    let (model, strengths) = learn_network(&data, &cfg.learn)?;
    let dir = cfg.out_dir().join("learn");
    NetworkJson::from_model(&model).write(io.create(dir.join("network.json"))?)?;
    write_strengths(&strengths, io.create(dir.join("strengths.csv"))?)?;
    io.write_json(dir.join("cpts.json"), &CptRecord::from_model(&model))?;
    io.write_json(dir.join("model.json"), &model)?;
    log::info!("learned {} arcs over {} nodes", model.dag.n_arcs(), model.dag.n_nodes());
    Ok(())
}

fn network(cfg: &RunConfig, pre: &Preprocessed, io: &mut Io) -> Result<BayesianNetworkModel> {
    match &cfg.paths.model {
        Some(path) => {
            let r = open(path, io)?;
            serde_json::from_reader(r).with_context(|| format!("invalid model file {}", path.display()))
        }
        None => Ok(learn_network(&pre.encoded, &cfg.learn)?.0),
    }
}

/// Testers with their similar subjects, restricted to `cfg.subjects`.
fn subjects(cfg: &RunConfig, io: &mut Io) -> Result<(Vec<EvalSubject>, Vec<Selection>)> {
    let (cohort, pre) = load(cfg, io)?;
    let model = network(cfg, &pre, io)?;
    let (mut subjects, mut selections) = assemble_subjects(&cohort, &pre, &model, cfg.eval.m)?;
    if let Some(wanted) = &cfg.subjects {
        if let Some(missing) = wanted.iter().find(|id| !subjects.iter().any(|s| s.subject_id() == id.as_str())) {
            bail!("subject {missing} has no usable series and clinical record");
        }
        let keep: Vec<bool> = subjects.iter().map(|s| wanted.iter().any(|w| w == s.subject_id())).collect();
        let mut k = keep.iter();
        subjects.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        selections.retain(|_| *k.next().unwrap());
    }
    if subjects.is_empty() {
        bail!("no subject has both a series and a clinical record");
    }
    Ok((subjects, selections))
}

fn forecast(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let h = horizon_steps(cfg.forecast.horizon_minutes)?;
    let (subjects, _) = subjects(cfg, io)?;
    let mut bsts = cfg.eval.bsts();
    bsts.max_horizon = bsts.max_horizon.max(h);
    let forecaster: Box<dyn Forecaster> = if cfg.forecast.noiseless {
        Box::new(NoiselessForecaster {
            config: bsts,
            phi: cfg.forecast.phi,
            window: cfg.eval.window,
        })
    } else {
        Box::new(BstsForecaster::new(bsts))
    };
    let results: Vec<_> = subjects
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> Result<_> {
            let split = cfg.eval.checked_split(s.subject_id(), s.target.series.len())?;
            let anchors = split.anchors(h);
            let rf = forecaster.rolling(s, split.fit, &anchors, h, derive_seed(cfg.seed, i as u64))?;
            Ok((s, rf))
        })
        .collect::<Result<_>>()?;
    let dir = cfg.out_dir().join("forecast");
    for (s, rf) in results {
        let path = dir.join(format!("{}_ph{}.csv", s.subject_id(), cfg.forecast.horizon_minutes));
        let mut w = csv::Writer::from_writer(io.create(path)?);
        w.write_record(["timestamp", "point", "lower95", "upper95"])?;
        for (k, &a) in rf.anchors.iter().enumerate() {
            w.write_record([
                s.target.series.timestamp(a + h).to_rfc3339(),
                rf.mean[k][h - 1].to_string(),
                rf.lower95[k][h - 1].to_string(),
                rf.upper95[k][h - 1].to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn evaluate(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let (subjects, selections) = subjects(cfg, io)?;
    let reports = evaluate_subjects(&cfg.eval, &subjects, cfg.seed)?;
    let report = EvaluationReport::new(reports, &cfg.eval.horizons);
    let dir = cfg.out_dir().join("evaluate");
    report.write_json(io.create(dir.join("metrics.json"))?)?;
    io.write_text(dir.join("metrics.txt"), &report.to_text())?;
    io.write_text(dir.join("ranges.txt"), &report.ranges_text())?;
    report.write_confusion_csv(io.create(dir.join("confusion.csv"))?)?;
    io.write_json(dir.join("selections.json"), &selections)?;
    print!("{}", report.to_text());
    Ok(())
}

fn ablate(cfg: &RunConfig, io: &mut Io) -> Result<()> {
    let (subjects, _) = subjects(cfg, io)?;
    let table = run_ablation(&cfg.eval, &cfg.ablate.removals, &subjects, cfg.seed)?;
    let dir = cfg.out_dir().join("ablate");
    io.write_text(dir.join("ablation.txt"), &table.to_text())?;
    io.write_json(dir.join("ablation.json"), &table)?;
    print!("{}", table.to_text());
    Ok(())
}
