use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mpa_core::bounds::{bound_report, BoundInputs, Reference};
use mpa_core::experiment::lemmas::LemmaInstance;
use mpa_core::experiment::{run_suite, task_pairs, SuiteSpec, SyntheticTaskSuite};
use mpa_core::io::{read_inputs_file, read_labels_file, read_pairs_file, write_inputs_file, write_pairs_file};
use mpa_core::model_file::{load_model, save_model};
use mpa_core::transfer::{run_transfer, AssumptionReport, MarginPoint, MpaSummary, DEFAULT_GAMMA_GRID};
use mpa_core::{
    compute_mpa, empirical_joint, fit_majority_predictor, make_dummy_source, mpa_hits, Architecture, Error, ErrorCount,
    PairedLabelDataset, Result, Setting, TrainConfig, TransferTask,
};

/// What a command produced: output file names (relative to the out-dir),
/// the files it read, and its resolved configuration.
pub struct RunRecord {
    pub outputs: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub resolved: serde_json::Value,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<String> {
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(name.to_string())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MpaReport {
    pub mpa: f64,
    pub hits: usize,
    pub n: usize,
    #[serde(rename = "m_S")]
    pub m_s: usize,
    #[serde(rename = "m_T")]
    pub m_t: usize,
    pub mapping: Vec<usize>,
}

pub fn score(
    labels: &Path,
    dummy: Option<(&Path, &Path)>,
    num_source: Option<usize>,
    num_target: Option<usize>,
    out_dir: &Path,
) -> Result<RunRecord> {
    let mut inputs = vec![labels.to_path_buf()];
    let data: PairedLabelDataset = match dummy {
        None => read_pairs_file(labels, num_source, num_target)?,
        Some((model, x)) => {
            inputs.extend([model.to_path_buf(), x.to_path_buf()]);
            let (net, _) = load_model(model)?;
            let targets = read_labels_file(labels)?;
            let m_t = num_target.unwrap_or_else(|| targets.iter().max().map_or(0, |m| m + 1));
            make_dummy_source(&net, &read_inputs_file(x)?, &targets, m_t)?
        }
    };
    let predictor = fit_majority_predictor(&empirical_joint(&data));
    let report = MpaReport {
        mpa: compute_mpa(&data),
        hits: mpa_hits(&data),
        n: data.len(),
        m_s: data.num_source(),
        m_t: data.num_target(),
        mapping: predictor.mapping().to_vec(),
    };
    fs::create_dir_all(out_dir)?;
    Ok(RunRecord {
        outputs: vec![write_json(out_dir, "mpa.json", &report)?],
        inputs,
        resolved: serde_json::json!({
            "dummy": dummy.is_some(),
            "num_source": data.num_source(),
            "num_target": data.num_target(),
        }),
    })
}

/// Synthetic Gaussian-mixture data for a transfer run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticData {
    pub seed: u64,
    pub dim: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub num_source: usize,
    pub num_target: usize,
    pub alpha: f64,
    pub separation: f64,
}

impl Default for SyntheticData {
    fn default() -> Self {
        let d = LemmaInstance::default();
        SyntheticData {
            seed: d.seed,
            dim: d.dim,
            n_source: d.n_source,
            n_target: d.n_target,
            num_source: d.num_source,
            num_target: d.num_target,
            alpha: d.alpha,
            separation: d.separation,
        }
    }
}

/// CSV data for a transfer run; relative paths resolve against the config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    pub source_inputs: PathBuf,
    pub source_labels: PathBuf,
    #[serde(default)]
    pub target_inputs: Option<PathBuf>,
    pub target_labels: PathBuf,
    #[serde(default)]
    pub num_source: Option<usize>,
    #[serde(default)]
    pub num_target: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub setting: Option<Setting>,
    pub synthetic: Option<SyntheticData>,
    pub files: Option<DataFiles>,
    /// Hidden widths of the default ReLU network; ignored when `architecture` is set.
    pub hidden: Vec<usize>,
    pub split_index: usize,
    pub architecture: Option<Architecture>,
    pub train: TrainConfig,
    pub gamma_grid: Vec<f64>,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            setting: None,
            synthetic: None,
            files: None,
            hidden: vec![32, 16],
            split_index: 2,
            architecture: None,
            train: TrainConfig::default(),
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
        }
    }
}

fn max_label(labels: &[usize]) -> usize {
    labels.iter().max().map_or(0, |m| m + 1)
}

fn load_task(cfg: &TransferConfig, base: &Path, inputs: &mut Vec<PathBuf>) -> Result<TransferTask> {
    match (&cfg.synthetic, &cfg.files) {
        (Some(s), None) => {
            let instance = LemmaInstance {
                seed: s.seed,
                dim: s.dim,
                n_source: s.n_source,
                n_target: s.n_target,
                num_source: s.num_source,
                num_target: s.num_target,
                alpha: s.alpha,
                separation: s.separation,
                ..LemmaInstance::default()
            };
            instance.build_task(cfg.setting.unwrap_or(Setting::SharedInputs))
        }
        (None, Some(f)) => {
            let mut read = |p: &Path| {
                let p = base.join(p);
                inputs.push(p.clone());
                p
            };
            let source_inputs = read_inputs_file(read(&f.source_inputs))?;
            let source_labels = read_labels_file(read(&f.source_labels))?;
            let target_inputs = f
                .target_inputs
                .as_ref()
                .map(|p| read_inputs_file(read(p)))
                .transpose()?;
            let target_labels = read_labels_file(read(&f.target_labels))?;
            let setting = if target_inputs.is_some() {
                Setting::DifferentInputs
            } else {
                Setting::SharedInputs
            };
            if cfg.setting.is_some_and(|s| s != setting) {
                return Err(Error::InvalidParameter(
                    "`setting` disagrees with the presence of `target_inputs`".into(),
                ));
            }
            Ok(TransferTask {
                num_source: f.num_source.unwrap_or_else(|| max_label(&source_labels)),
                num_target: f.num_target.unwrap_or_else(|| max_label(&target_labels)),
                source_inputs,
                source_labels,
                target_inputs,
                target_labels,
            })
        }
        _ => Err(Error::InvalidParameter(
            "transfer config needs exactly one of `synthetic` or `files`".into(),
        )),
    }
}

/// Per-run numbers written to `metrics.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub setting: Setting,
    pub source_sample_size: usize,
    pub target_sample_size: usize,
    pub source_errors: ErrorCount,
    pub target_errors: ErrorCount,
    pub mpa: MpaSummary,
    pub margin: Vec<MarginPoint>,
}

pub fn transfer(
    config: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
    gamma_grid: Option<&[f64]>,
    out_dir: &Path,
) -> Result<RunRecord> {
    let mut cfg: TransferConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.train.seed = seed;
        if let Some(s) = cfg.synthetic.as_mut() {
            s.seed = seed;
        }
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    if let Some(g) = gamma_grid {
        cfg.gamma_grid = g.to_vec();
    }
    let mut inputs = vec![config.to_path_buf()];
    let base = config.parent().unwrap_or(Path::new("."));
    let task = load_task(&cfg, base, &mut inputs)?;
    let arch = match &cfg.architecture {
        Some(a) => a.clone(),
        None => Architecture::mlp(
            task.source_inputs.ncols(),
            &cfg.hidden,
            cfg.split_index,
            task.num_source,
        ),
    };
    if arch.input_dim != task.source_inputs.ncols() {
        return Err(Error::ShapeMismatch {
            context: "architecture input dimension",
            expected: arch.input_dim,
            found: task.source_inputs.ncols(),
        });
    }
    cfg.architecture = Some(arch.clone());
    let outcome = run_transfer(&task, &arch, &cfg.train, &cfg.gamma_grid)?;

    fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::new();
    for (name, net, init) in [
        ("source_model.json", &outcome.source_model, &outcome.source_init),
        ("target_model.json", &outcome.target_model, &outcome.target_init),
    ] {
        save_model(out_dir.join(name), net, Some(init))?;
        outputs.push(name.to_string());
    }
    save_model(out_dir.join("candidate_model.json"), &outcome.candidate_model, None)?;
    outputs.push("candidate_model.json".into());
    let metrics = Metrics {
        setting: outcome.setting,
        source_sample_size: task.source_inputs.nrows(),
        target_sample_size: outcome.target_sample_size(),
        source_errors: outcome.source_errors,
        target_errors: outcome.target_errors,
        mpa: outcome.mpa.clone(),
        margin: outcome.margin.clone(),
    };
    outputs.push(write_json(out_dir, "metrics.json", &metrics)?);
    outputs.push(write_json(out_dir, "assumption.json", &outcome.assumption)?);
    write_inputs_file(out_dir.join("target_inputs.csv"), task.target_inputs())?;
    outputs.push("target_inputs.csv".into());
    Ok(RunRecord {
        outputs,
        inputs,
        resolved: serde_json::to_value(&cfg)?,
    })
}

pub fn bounds(run_dir: &Path, gamma: Option<f64>, delta: f64, ref_zero: bool, out_dir: &Path) -> Result<RunRecord> {
    let files = [
        "target_model.json",
        "metrics.json",
        "assumption.json",
        "target_inputs.csv",
    ];
    let inputs: Vec<PathBuf> = files.iter().map(|f| run_dir.join(f)).collect();
    let (net, init) = load_model(&inputs[0])?;
    let init =
        init.ok_or_else(|| Error::InvalidParameter("target_model.json has no recorded initial weights".into()))?;
    let metrics: Metrics = read_json(&inputs[1])?;
    let assumption: AssumptionReport = read_json(&inputs[2])?;
    let x = read_inputs_file(&inputs[3])?;
    let gamma = gamma.unwrap_or(assumption.gamma_bar);
    let run = BoundInputs {
        setting: metrics.setting,
        target_model: &net,
        target_init: &init,
        source_errors: metrics.source_errors,
        mpa: metrics.mpa.value,
        sample_size: metrics.target_sample_size,
        gamma_bar: assumption.gamma_bar,
    };
    let reference = if ref_zero { Reference::Zero } else { Reference::Init };
    let report = bound_report(&run, &x, delta, gamma, reference)?;
    fs::create_dir_all(out_dir)?;
    Ok(RunRecord {
        outputs: vec![write_json(out_dir, "bound_report.json", &report)?],
        inputs,
        resolved: serde_json::json!({ "gamma": gamma, "delta": delta, "reference": reference }),
    })
}

pub fn correlate(
    suite: &Path,
    seed: Option<u64>,
    epochs: Option<usize>,
    emit_tasks: bool,
    out_dir: &Path,
) -> Result<RunRecord> {
    let mut spec: SuiteSpec = read_json(suite)?;
    if let Some(s) = seed {
        spec.seeds = vec![s];
    }
    if let Some(e) = epochs {
        spec.train.epochs = e;
    }
    let result = run_suite(&spec)?;
    fs::create_dir_all(out_dir)?;
    let mut outputs = vec![write_json(out_dir, "correlation.json", &result)?];

    let mut csv = String::from("seed,task,alpha,mpa,heldout_accuracy\n");
    for run in &result.runs {
        for t in &run.tasks {
            csv.push_str(&format!(
                "{},{},{:?},{:?},{:?}\n",
                run.seed, t.task, t.alpha, t.mpa, t.heldout_accuracy
            ));
        }
    }
    fs::write(out_dir.join("pairs.csv"), csv)?;
    outputs.push("pairs.csv".into());

    if emit_tasks {
        fs::create_dir_all(out_dir.join("tasks"))?;
        for &s in &spec.seeds {
            let generated = SyntheticTaskSuite::generate(&spec, s)?;
            for i in 0..generated.tasks.len() {
                let name = format!("tasks/seed{s}_task{i:02}.csv");
                write_pairs_file(out_dir.join(&name), &task_pairs(&generated, i)?)?;
                outputs.push(name);
            }
        }
    }
    Ok(RunRecord {
        outputs,
        inputs: vec![suite.to_path_buf()],
        resolved: serde_json::to_value(&spec)?,
    })
}
