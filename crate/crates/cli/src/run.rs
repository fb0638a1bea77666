use std::fs;
use std::path::{Path, PathBuf};

use overlapscope::dataset::{
    compose_overlap_dataset, load_external, overlap_frames, render_groups, singles_from_frames, split_by_group,
    write_split, PhantomFrame,
};
use overlapscope::eval::{accuracy_vs_n, sliding_heatmap, write_roc_csv, write_sweep_csv, SweepConfig, SweepRow};
use overlapscope::nn::{
    build_model, load_weights, save_weights, train, write_history_csv, ArchitectureSpec, Ensemble, Optimizer,
    TrainConfig,
};
use overlapscope::noise::{equal_rates, poisson_oracle, OracleStats};
use overlapscope::optics::DesignDocument;
use overlapscope::phantom::{read_annotations_csv, write_annotations_csv, AnnotationRecord, PhantomSpec};
use overlapscope::rng::derive_seed;
use overlapscope::{pnm, Error, PatchGrid, SensorModel, Split};
use serde::{Deserialize, Serialize};

use crate::args::*;

pub const TOOL: &str = "overlapscope";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// How a run ended when it did not succeed.
#[derive(Debug)]
pub enum Failure {
    /// Malformed input or configuration: exit code 2.
    Usage { kind: String, message: String },
    /// The run completed its checks and they failed, or a domain error: exit code 1.
    Domain { kind: String, message: String },
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage { .. } => 2,
            Failure::Domain { .. } => 1,
        }
    }

    pub fn line(&self) -> String {
        let (kind, message) = match self {
            Failure::Usage { kind, message } | Failure::Domain { kind, message } => (kind, message),
        };
        format!("error: kind={kind} message={}", message.replace(['\n', '\r'], " "))
    }

    fn usage(kind: &str, message: impl Into<String>) -> Self {
        Failure::Usage { kind: kind.into(), message: message.into() }
    }

    fn domain(kind: &str, message: impl Into<String>) -> Self {
        Failure::Domain { kind: kind.into(), message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = e.kind();
        match e {
            Error::InvalidArgument(_) | Error::Json(_) | Error::Load { .. } => Failure::usage(kind, e.to_string()),
            _ => Failure::domain(kind, e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

type Outcome = Result<(), Failure>;

/// Contents of `run.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool: String,
    pub version: String,
    pub command: Command,
}

fn absolute(p: &Path) -> Result<PathBuf, Failure> {
    std::path::absolute(p).map_err(Failure::from)
}

/// Make every path in the command absolute so that the recorded run does not
/// depend on the working directory.
pub fn resolve(mut cmd: Command) -> Result<Command, Failure> {
    match &mut cmd {
        Command::Design(a) => {
            if let Some(c) = &mut a.config {
                *c = absolute(c)?;
            }
        }
        Command::Train(a) => a.dataset = absolute(&a.dataset)?,
        Command::Heatmap(a) => {
            a.input = absolute(&a.input)?;
            for w in &mut a.weights {
                *w = absolute(w)?;
            }
            if let Some(p) = &mut a.annotations {
                *p = absolute(p)?;
            }
        }
        _ => {}
    }
    if let Some(out) = cmd.out_dir_mut() {
        *out = absolute(out)?;
    }
    Ok(cmd)
}

pub fn execute(cmd: Command) -> Outcome {
    if let Command::Rerun(r) = cmd {
        return rerun(&r);
    }
    let cmd = resolve(cmd)?;
    let out = cmd.clone().out_dir_mut().cloned().expect("runnable command has an output directory");
    fs::create_dir_all(&out)?;
    let record = RunRecord { tool: TOOL.into(), version: VERSION.into(), command: cmd.clone() };
    write_json(&out.join("run.json"), &record)?;
    match cmd {
        Command::Design(a) => design(&a, &out),
        Command::Phantom(a) => phantom(&a, &out),
        Command::Overlap(a) => overlap(&a, &out),
        Command::Oracle(a) => oracle(&a, &out),
        Command::Train(a) => train_cmd(&a, &out),
        Command::Sweep(a) => sweep(&a, &out),
        Command::Heatmap(a) => heatmap(&a, &out),
        Command::Rerun(_) => unreachable!("handled above"),
    }
}

fn rerun(r: &RerunArgs) -> Outcome {
    let text = fs::read_to_string(&r.run_json)
        .map_err(|e| Failure::usage("load", format!("{}: {e}", r.run_json.display())))?;
    let mut record: RunRecord = serde_json::from_str(&text)
        .map_err(|e| Failure::usage("json", format!("{}: {e}", r.run_json.display())))?;
    if record.tool != TOOL {
        return Err(Failure::usage("invalid-argument", format!("run.json was written by {}", record.tool)));
    }
    if let (Some(dir), Some(slot)) = (&r.out_dir, record.command.out_dir_mut()) {
        *slot = dir.clone();
    }
    execute(record.command)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Outcome {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn sensor(s: &SensorArgs) -> Result<SensorModel, Failure> {
    let model = SensorModel::with_noise(s.n_bit, s.well_depth);
    model.validate()?;
    Ok(model)
}

fn phantom_template(shape: &PhantomShapeArgs, s: &SensorArgs, sparsity_patch: Option<usize>) -> PhantomSpec {
    let mut spec = PhantomSpec {
        frame_size: shape.frame_size,
        n_bit: s.n_bit,
        well_depth: Some(s.well_depth),
        ..PhantomSpec::default()
    };
    spec.targets.count = shape.targets;
    if let Some(p) = sparsity_patch {
        spec.sparsity_patch = p;
    }
    spec
}

fn grid(p: &PatchArgs) -> PatchGrid {
    PatchGrid::new(p.patch_size, p.inner_fraction, p.stride)
}

fn train_config(t: &TrainerArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        optimizer: match t.optimizer {
            OptimizerArg::Adam => Optimizer::Adam,
            OptimizerArg::SgdMomentum => Optimizer::SgdMomentum,
        },
        learning_rate: t.lr,
        batch_size: t.batch_size,
        epochs: t.epochs,
        seed,
        augment: !t.no_augment,
        ..TrainConfig::default()
    }
}

fn design(a: &DesignArgs, out: &Path) -> Outcome {
    let mut doc = match &a.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).map_err(|e| Failure::usage("load", format!("{}: {e}", path.display())))?;
            serde_json::from_str::<DesignDocument>(&text)
                .map_err(|e| Failure::usage("json", format!("{}: {e}", path.display())))?
        }
        None => DesignDocument::prototype(),
    };
    if let Some(n) = a.n {
        doc.design.n = n;
    }
    if let Some(b) = a.n_bit {
        doc.sensor.n_bit = b;
    }
    if let Some(v) = a.well_depth {
        doc.sensor.v = v;
    }
    let report = doc.report();
    write_json(&out.join("report.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    if report.is_feasible() {
        Ok(())
    } else {
        let text: Vec<String> = report.violations.iter().map(|v| format!("{}: {}", v.name, v.detail)).collect();
        Err(Failure::domain("design-violation", text.join("; ")))
    }
}

fn annotation_records(frame_id: &str, f: &[overlapscope::phantom::Annotation]) -> Vec<AnnotationRecord> {
    f.iter()
        .map(|a| AnnotationRecord { frame_id: frame_id.into(), x: a.x, y: a.y, radius: a.radius, class: a.class })
        .collect()
}

fn phantom(a: &PhantomArgs, out: &Path) -> Outcome {
    if a.n == 0 {
        return Err(Failure::usage("invalid-argument", "--n must be at least 1"));
    }
    let s = sensor(&a.sensor)?;
    let groups: Vec<u32> = (0..a.shape.frames).collect();
    let frames = render_groups(&phantom_template(&a.shape, &a.sensor, None), &groups, a.seed)?;
    let dir = out.join("frames");
    fs::create_dir_all(&dir)?;
    let mut records = Vec::new();
    for f in &frames {
        pnm::write(dir.join(format!("{}.pgm", f.frame_id)), &f.frame)?;
        records.extend(annotation_records(&f.frame_id, &f.annotations));
    }
    write_annotations_csv(fs::File::create(out.join("annotations.csv"))?, &records)?;

    if a.n > 1 {
        let dir = out.join("overlapped");
        fs::create_dir_all(&dir)?;
        let mut records = Vec::new();
        for (i, chunk) in frames.chunks_exact(a.n).enumerate() {
            let refs: Vec<&PhantomFrame> = chunk.iter().collect();
            let (frame, ann) = overlap_frames(&refs, &s, derive_seed(a.seed, &[i as u64]))?;
            let id = format!("n{}_{i:04}", a.n);
            pnm::write(dir.join(format!("{id}.pgm")), &frame)?;
            records.extend(annotation_records(&id, &ann));
        }
        write_annotations_csv(fs::File::create(out.join("overlapped_annotations.csv"))?, &records)?;
    }
    eprintln!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}

fn overlap(a: &OverlapArgs, out: &Path) -> Outcome {
    let s = sensor(&a.sensor)?;
    let g = grid(&a.patch);
    let groups: Vec<u32> = (0..a.shape.frames).collect();
    let template = phantom_template(&a.shape, &a.sensor, Some(a.patch.patch_size.max(1)));
    let frames = render_groups(&template, &groups, a.seed)?;
    let singles = singles_from_frames(&frames, &g)?;
    let fractions = [a.split[0], a.split[1], a.split[2]];
    let parts = split_by_group(singles, fractions, derive_seed(a.seed, &[1]))?;
    for (i, split) in Split::ALL.into_iter().enumerate() {
        let pool = parts.get(split);
        if pool.is_empty() {
            continue;
        }
        let count = if split == Split::Train { a.per_class } else { a.val_per_class };
        let composed = compose_overlap_dataset(pool, a.n, count, &s, derive_seed(a.seed, &[2, i as u64]))?;
        write_split(out, split, &composed, a.patch.inner_fraction, Some(a.n), a.seed)?;
        eprintln!("{}: {} examples", split.as_str(), composed.len());
    }
    Ok(())
}

fn oracle(a: &OracleArgs, out: &Path) -> Outcome {
    let ns = match a.n {
        Some(n) => vec![n],
        None => a.n_list.clone(),
    };
    let mut results: Vec<OracleStats> = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        for (j, &lambda) in a.lambda_list.iter().enumerate() {
            if n == 0 {
                return Err(Failure::usage("invalid-argument", "overlap numbers must be at least 1"));
            }
            let seed = derive_seed(a.seed, &[i as u64, j as u64]);
            results.push(poisson_oracle(&equal_rates(lambda, n), a.trials, seed)?);
        }
    }
    write_json(&out.join("oracle.json"), &results)?;
    println!("{}", serde_json::to_string_pretty(&results).map_err(Error::from)?);
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.within(a.mean_tol, a.var_tol))
        .map(|r| format!("n={} lambda={}: mean err {:.4}, var err {:.4}", r.n, r.lambda_total, r.mean_error(), r.var_error()))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::domain("tolerance", failed.join("; ")))
    }
}

fn train_cmd(a: &TrainArgs, out: &Path) -> Outcome {
    let train_set = load_external(&a.dataset.join("train.json"))?;
    let val_set = load_external(&a.dataset.join("val.json"))?;
    let first = train_set.first().ok_or_else(|| Failure::usage("invalid-argument", "training set is empty"))?;
    let arch = ArchitectureSpec::standard(first.pixels.width(), first.pixels.channels());
    let model = build_model(&arch, derive_seed(a.seed, &[0]))?;
    let outcome = train(model, &train_set, &val_set, &train_config(&a.trainer, derive_seed(a.seed, &[1])))?;
    save_weights(&out.join("weights.bin"), &outcome.model)?;
    write_history_csv(&out.join("history.csv"), &outcome.history)?;
    eprintln!("best epoch {} of {}", outcome.best_epoch, outcome.history.len());
    Ok(())
}

fn sweep(a: &SweepArgs, out: &Path) -> Outcome {
    let s = sensor(&a.sensor)?;
    let groups: Vec<u32> = (0..a.shape.frames).collect();
    let template = phantom_template(&a.shape, &a.sensor, Some(a.patch.patch_size.max(1)));
    let frames = render_groups(&template, &groups, a.seed)?;
    let singles = singles_from_frames(&frames, &grid(&a.patch))?;
    let tf = a.train_fraction;
    let parts = split_by_group(singles, [tf, 1.0 - tf, 0.0], derive_seed(a.seed, &[1]))?;
    let cfg = SweepConfig {
        arch: ArchitectureSpec::standard(a.patch.patch_size, 1),
        train: train_config(&a.trainer, 0),
        sensor: s,
        train_per_class: a.per_class,
        val_per_class: a.val_per_class,
        ensemble_size: a.ensemble,
    };
    let entries = accuracy_vs_n(&parts.train, &parts.val, &a.n_list, &cfg, derive_seed(a.seed, &[2]))?;

    for dir in ["roc", "models", "history"] {
        fs::create_dir_all(out.join(dir))?;
    }
    let rows: Vec<SweepRow> = entries.iter().map(|e| e.row).collect();
    write_sweep_csv(fs::File::create(out.join("sweep.csv"))?, &rows)?;
    for e in &entries {
        let n = e.row.n;
        write_roc_csv(fs::File::create(out.join("roc").join(format!("n{n}.csv")))?, &e.roc)?;
        for (k, (m, h)) in e.ensemble.models().iter().zip(&e.histories).enumerate() {
            save_weights(&out.join("models").join(format!("n{n}_m{k}.bin")), m)?;
            write_history_csv(&out.join("history").join(format!("n{n}_m{k}.csv")), h)?;
        }
        eprintln!("n={n}: train_acc {:.4} val_acc {:.4} auc {:.4}", e.row.train_acc, e.row.val_acc, e.row.auc);
    }
    Ok(())
}

fn heatmap(a: &HeatmapArgs, out: &Path) -> Outcome {
    let models = a.weights.iter().map(|p| load_weights(p)).collect::<Result<Vec<_>, _>>()?;
    let ensemble = Ensemble::new(models)?;
    let frame = pnm::read(&a.input)?;
    let window = ensemble.models()[0].arch.input_size;
    let map = sliding_heatmap(&ensemble, &frame, window, a.step)?;
    map.write(out, "heatmap")?;
    if let Some(path) = &a.annotations {
        let records = read_annotations_csv(fs::File::open(path)?)?;
        let ann: Vec<_> = records
            .into_iter()
            .filter(|r| a.frame_id.as_ref().is_none_or(|id| *id == r.frame_id))
            .map(|r| overlapscope::phantom::Annotation { x: r.x, y: r.y, radius: r.radius, class: r.class })
            .collect();
        let rate = map.hit_rate(&ann, a.threshold);
        write_json(&out.join("hits.json"), &rate)?;
        println!("{}", serde_json::to_string(&rate).map_err(Error::from)?);
    }
    eprintln!("heatmap {}x{} written to {}", map.cols, map.rows, out.display());
    Ok(())
}
