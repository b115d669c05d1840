use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{runtime, CliError, Command, Common, Settings};
use crate::dataset::{
    apply_class_mapping, cache_key, featurize_object, load_checkpoint, load_part_graph, save_checkpoint,
    save_part_graph, scan_modelnet_layout, Checkpoint, ClassMapping, DatasetManifest, FeatureCache,
    SerializedPartGraph, Split,
};
use crate::features::{FeatureConfig, LrfMode};
use crate::gnn::{ModelConfig, ModelParams, Pooling};
use crate::gradsuite::run_gradient_suite;
use crate::mesh::{load_mesh, write_off, LoadOptions, MeshFormat};
use crate::pipeline::{sample_graph, PreparedMesh};
use crate::rng::{derive_seed, SeededRng};
use crate::sampler::SamplerConfig;
use crate::train::{
    drop_parts, evaluate_with_config, generate_synthetic_dataset, majority_class_baseline, train, LabeledGraph,
    Metrics, OptimizerKind, RotationMode, SynthConfig, TrainConfig, SYNTH_CLASSES,
};

const CLASSES_FILE: &str = "classes.txt";
const GRAPH_EXT: &str = "graph";

const SAMPLING_DEFAULTS: [(&str, &str); 8] = [
    ("threshold", "6.283185307179586"),
    ("threshold-scale", "1"),
    ("max-parts", "32"),
    ("points", "250"),
    ("lrf", "pca"),
    ("no-angle-feature", "false"),
    ("seed", "0"),
    ("smoothing-passes", "1"),
];

fn settings(
    command: &str,
    common: &Common,
    defaults: &[(&'static str, &str)],
    flags: &[(&'static str, Option<String>)],
    out: &mut dyn Write,
) -> Result<Settings, CliError> {
    let s = Settings::resolve(defaults, common.config.as_deref(), flags)?;
    let _ = write!(out, "{}", s.render(command));
    Ok(s)
}

fn with_sampling(extra: &[(&'static str, &'static str)]) -> Vec<(&'static str, &'static str)> {
    extra.iter().copied().chain(SAMPLING_DEFAULTS).collect()
}

fn sampling_configs(s: &Settings) -> Result<(SamplerConfig<f64>, FeatureConfig, usize), CliError> {
    let seed = s.get("seed")?;
    let sampler = SamplerConfig {
        angle_threshold: s.get("threshold")?,
        threshold_scale: s.get("threshold-scale")?,
        max_parts: s.get("max-parts")?,
        seed,
        area_weighted_centers: false,
    };
    sampler.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let features = FeatureConfig {
        n_points: s.get("points")?,
        lrf_mode: s.get::<LrfMode>("lrf")?,
        include_angle: !s.get::<bool>("no-angle-feature")?,
        seed,
    };
    features.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((sampler, features, s.get("smoothing-passes")?))
}

fn mesh_format(path: &Path) -> Result<MeshFormat, CliError> {
    path.extension()
        .and_then(|e| e.to_str())
        .and_then(MeshFormat::from_extension)
        .ok_or_else(|| CliError::Runtime(format!("{}: unknown mesh extension (expected .off or .ply)", path.display())))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub(super) fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Synth {
            common,
            out: out_dir,
            per_class,
            test_per_class,
            seed,
            rotation,
            cut_probability,
            resolution,
            scale_min,
            scale_max,
        } => {
            let defaults = [
                ("out", ""),
                ("per-class", "100"),
                ("test-per-class", "40"),
                ("seed", "0"),
                ("rotation", "z"),
                ("cut-probability", "0"),
                ("resolution", "8"),
                ("scale-min", "0.2"),
                ("scale-max", "5"),
            ];
            let flags = [
                ("out", out_dir),
                ("per-class", per_class),
                ("test-per-class", test_per_class),
                ("seed", seed),
                ("rotation", rotation),
                ("cut-probability", cut_probability),
                ("resolution", resolution),
                ("scale-min", scale_min),
                ("scale-max", scale_max),
            ];
            let s = settings("synth", &common, &defaults, &flags, out)?;
            synth(&s, out)
        }
        Command::Sample {
            common,
            input,
            out: out_path,
            label,
            sampling,
        } => {
            let defaults = with_sampling(&[("input", ""), ("out", ""), ("label", "0")]);
            let mut flags = vec![("input", input), ("out", out_path), ("label", label)];
            flags.extend(sampling.pairs());
            let s = settings("sample", &common, &defaults, &flags, out)?;
            sample(&s, out, err)
        }
        Command::Featurize {
            common,
            dataset,
            out: out_dir,
            mapping,
            jobs,
            cache,
            sampling,
        } => {
            let defaults = with_sampling(&[("dataset", ""), ("out", ""), ("mapping", ""), ("jobs", "1"), ("cache", "")]);
            let mut flags = vec![
                ("dataset", dataset),
                ("out", out_dir),
                ("mapping", mapping),
                ("jobs", jobs),
                ("cache", cache),
            ];
            flags.extend(sampling.pairs());
            let s = settings("featurize", &common, &defaults, &flags, out)?;
            featurize_dataset(&s, out, err)
        }
        Command::Train {
            common,
            data,
            out: out_path,
            log,
            disconnect,
            pooling,
            epochs,
            lr,
            batch,
            seed,
            optimizer,
            model,
            stop_train_acc,
            stop_val_acc,
            threshold_scale_eval,
        } => {
            let defaults = [
                ("data", ""),
                ("out", ""),
                ("log", ""),
                ("disconnect", "0"),
                ("pooling", "maxpool"),
                ("epochs", "50"),
                ("lr", "0.001"),
                ("batch", "8"),
                ("seed", "0"),
                ("optimizer", "adam"),
                ("model", "standard"),
                ("stop-train-acc", ""),
                ("stop-val-acc", ""),
                ("threshold-scale-eval", "1"),
            ];
            let flags = [
                ("data", data),
                ("out", out_path),
                ("log", log),
                ("disconnect", disconnect),
                ("pooling", pooling),
                ("epochs", epochs),
                ("lr", lr),
                ("batch", batch),
                ("seed", seed),
                ("optimizer", optimizer),
                ("model", model),
                ("stop-train-acc", stop_train_acc),
                ("stop-val-acc", stop_val_acc),
                ("threshold-scale-eval", threshold_scale_eval),
            ];
            let s = settings("train", &common, &defaults, &flags, out)?;
            train_command(&s, out)
        }
        Command::Eval {
            common,
            data,
            checkpoint,
            split,
            occlude,
            occlude_seed,
            threshold_scale_eval,
            baseline,
            metrics_out,
        } => {
            let defaults = [
                ("data", ""),
                ("checkpoint", ""),
                ("split", "test"),
                ("occlude", "0"),
                ("occlude-seed", "0"),
                ("threshold-scale-eval", ""),
                ("baseline", "false"),
                ("metrics-out", ""),
            ];
            let flags = [
                ("data", data),
                ("checkpoint", checkpoint),
                ("split", split),
                ("occlude", occlude),
                ("occlude-seed", occlude_seed),
                ("threshold-scale-eval", threshold_scale_eval),
                ("baseline", super::flag(baseline)),
                ("metrics-out", metrics_out),
            ];
            let s = settings("eval", &common, &defaults, &flags, out)?;
            eval_command(&s, out)
        }
        Command::Gradcheck { common, seed } => {
            let s = settings("gradcheck", &common, &[("seed", "0")], &[("seed", seed)], out)?;
            gradcheck(&s, out)
        }
        Command::Inspect { common, input, sampling } => {
            let defaults = with_sampling(&[("input", "")]);
            let mut flags = vec![("input", input)];
            flags.extend(sampling.pairs());
            let s = settings("inspect", &common, &defaults, &flags, out)?;
            inspect(&s, out)
        }
    }
}

fn synth(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let root = PathBuf::from(s.required("out")?);
    let seed: u64 = s.get("seed")?;
    let (lo, hi): (f64, f64) = (s.get("scale-min")?, s.get("scale-max")?);
    if !(lo > 0.0 && hi >= lo) {
        return Err(CliError::Usage("scale range must satisfy 0 < scale-min <= scale-max".into()));
    }
    let base = SynthConfig {
        n_per_class: 0,
        seed,
        rotation: s.get::<RotationMode>("rotation")?,
        scale_range: (lo, hi),
        cut_probability: s.get("cut-probability")?,
        resolution: s.get("resolution")?,
    };
    for (split, count, tag) in [(Split::Train, s.get::<usize>("per-class")?, 0), (Split::Test, s.get("test-per-class")?, 1)] {
        let cfg = SynthConfig {
            n_per_class: count,
            seed: derive_seed(seed, tag),
            ..base.clone()
        };
        for class in SYNTH_CLASSES {
            let dir = root.join(class).join(split.as_str());
            fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        }
        let objects = generate_synthetic_dataset::<f64>(&cfg);
        for o in &objects {
            let path = root
                .join(SYNTH_CLASSES[o.label])
                .join(split.as_str())
                .join(format!("{}.off", o.name));
            write_file(&path, &write_off(&o.mesh))?;
        }
        let _ = writeln!(out, "{}\t{} meshes", split.as_str(), objects.len());
    }
    Ok(())
}

fn sample(s: &Settings, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let input = PathBuf::from(s.required("input")?);
    let (sampler, features, passes) = sampling_configs(s)?;
    let bytes = read(&input)?;
    let g = featurize_object(&bytes, mesh_format(&input)?, &stem(&input), s.get("label")?, &sampler, &features, passes)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", input.display())))?;
    if g.graph.parts.is_empty() {
        let _ = writeln!(err, "warning: {}: no parts sampled", input.display());
    }
    let _ = writeln!(out, "parts\t{}\nedges\t{}", g.graph.n_nodes(), g.graph.edges.len());
    if let Some(path) = s.optional("out") {
        write_file(Path::new(&path), &save_part_graph(&g))?;
    }
    Ok(())
}

fn featurize_dataset(s: &Settings, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let root = PathBuf::from(s.required("dataset")?);
    let out_dir = PathBuf::from(s.required("out")?);
    let jobs: usize = s.get("jobs")?;
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    let (sampler, features, passes) = sampling_configs(s)?;
    let mut manifest = scan_modelnet_layout(&root).map_err(runtime)?;
    if let Some(path) = s.optional("mapping") {
        let mapping = ClassMapping::parse(&read_text(Path::new(&path))?).map_err(runtime)?;
        manifest = apply_class_mapping(&manifest, &mapping).map_err(runtime)?;
    }
    let cache = s.optional("cache").map(FeatureCache::new).transpose().map_err(runtime)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(runtime)?;
    let results: Vec<Result<SerializedPartGraph<f64>, CliError>> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|entry| {
                let path = manifest.root.join(&entry.path);
                let bytes = read(&path)?;
                let id = DatasetManifest::object_id(entry);
                let key = cache_key(&bytes, &sampler, &features, passes);
                if let Some(c) = &cache {
                    if let Some(mut g) = c.get::<f64>(&key).map_err(runtime)? {
                        g.object_id = id;
                        g.label = entry.label;
                        return Ok(g);
                    }
                }
                let g = featurize_object(&bytes, mesh_format(&path)?, &id, entry.label, &sampler, &features, passes)
                    .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
                if let Some(c) = &cache {
                    c.put(&key, &g).map_err(runtime)?;
                }
                Ok(g)
            })
            .collect()
    });
    let mut counts = [0usize; 3];
    for (entry, result) in manifest.entries.iter().zip(results) {
        let g = result?;
        if g.graph.parts.is_empty() {
            let _ = writeln!(err, "warning: {}: no parts sampled", g.object_id);
        }
        let rel = entry.path.with_extension(GRAPH_EXT);
        let rel: PathBuf = rel.components().filter(|c| c.as_os_str() != entry.split.as_str()).collect();
        write_file(&out_dir.join(entry.split.as_str()).join(rel), &save_part_graph(&g))?;
        counts[entry.split as usize] += 1;
    }
    write_file(&out_dir.join(CLASSES_FILE), &(manifest.class_names.join("\n") + "\n"))?;
    let _ = writeln!(
        out,
        "classes\t{}\ntrain\t{}\nval\t{}\ntest\t{}",
        manifest.class_names.len(),
        counts[0],
        counts[1],
        counts[2]
    );
    Ok(())
}

fn graph_files(dir: &Path, acc: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut items: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    items.sort();
    for p in items {
        if p.is_dir() {
            graph_files(&p, acc)?;
        } else if p.extension().is_some_and(|e| e == GRAPH_EXT) {
            acc.push(p);
        }
    }
    Ok(())
}

/// Every graph under `dir`, in sorted path order.
fn load_graphs(dir: &Path) -> Result<Vec<SerializedPartGraph<f64>>, CliError> {
    let mut files = Vec::new();
    graph_files(dir, &mut files)?;
    files
        .iter()
        .map(|p| load_part_graph(&read_text(p)?).map_err(|e| CliError::Runtime(format!("{}: {e}", p.display()))))
        .collect()
}

fn class_names(root: &Path) -> Result<Vec<String>, CliError> {
    Ok(read_text(&root.join(CLASSES_FILE))?
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn model_preset(name: &str, n_classes: usize) -> Result<ModelConfig, CliError> {
    match name {
        "standard" => Ok(ModelConfig::standard(n_classes)),
        "small" => Ok(ModelConfig {
            encoder_widths: vec![16, 16, 32, 64],
            reduce_widths: vec![64, 32],
            gat_heads: 4,
            gat_head_widths: vec![8, 8, 16, 16],
            classifier_widths: vec![32, 64],
            ..ModelConfig::standard(n_classes)
        }),
        "toy" => Ok(ModelConfig::toy(n_classes, Pooling::MaxPool)),
        other => Err(CliError::Usage(format!("unknown model `{other}` (expected standard, small or toy)"))),
    }
}

fn train_command(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let root = PathBuf::from(s.required("data")?);
    let ckpt_path = PathBuf::from(s.required("out")?);
    let classes = class_names(&root)?;
    let train_set = load_graphs(&root.join(Split::Train.as_str()))?;
    let val_dir = root.join(Split::Val.as_str());
    let val_set = if val_dir.is_dir() { load_graphs(&val_dir)? } else { Vec::new() };
    let first = train_set
        .first()
        .ok_or_else(|| CliError::Runtime(format!("{}: no training graphs", root.display())))?;
    if let Some(g) = train_set.iter().chain(&val_set).find(|g| g.features != first.features) {
        return Err(CliError::Runtime(format!("{}: feature config differs from {}", g.object_id, first.object_id)));
    }
    let pooling: Pooling = s.get("pooling")?;
    let stop_at = match (s.optional_parse::<f64>("stop-train-acc")?, s.optional_parse::<f64>("stop-val-acc")?) {
        (None, None) => None,
        (a, b) => Some((a.unwrap_or(0.0), b.unwrap_or(0.0))),
    };
    let cfg = TrainConfig {
        optimizer: s.get::<OptimizerKind>("optimizer")?,
        learning_rate: s.get("lr")?,
        batch_size: s.get("batch")?,
        epochs: s.get("epochs")?,
        disconnect_rate: s.get("disconnect")?,
        seed: s.get("seed")?,
        lrf_mode: first.features.lrf_mode,
        include_angle: first.features.include_angle,
        pooling,
        threshold_scale_eval: s.get("threshold-scale-eval")?,
        class_threshold_scale: Default::default(),
        stop_at,
    };
    cfg.validate().map_err(CliError::Usage)?;
    let model_cfg = ModelConfig {
        in_features: first.features.n_columns(),
        pooling,
        max_parts: first.sampler.max_parts,
        ..model_preset(s.raw("model"), classes.len())?
    };
    let params = ModelParams::init(&model_cfg, cfg.seed).map_err(runtime)?;
    let train_graphs: Vec<LabeledGraph<f64>> = train_set.into_iter().map(|g| g.into_labeled()).collect();
    let val_graphs: Vec<LabeledGraph<f64>> = val_set.into_iter().map(|g| g.into_labeled()).collect();
    let mut log_text = String::from("epoch\tloss\ttrain_acc\tval_acc\n");
    let _ = write!(out, "{log_text}");
    let outcome = train(params, &train_graphs, &val_graphs, &cfg, |e| {
        let _ = writeln!(out, "{e}");
        log_text.push_str(&format!("{e}\n"));
    })
    .map_err(runtime)?;
    write_file(
        &ckpt_path,
        &save_checkpoint(&Checkpoint {
            params: outcome.params,
            train: cfg,
        }),
    )?;
    if let Some(path) = s.optional("log") {
        write_file(Path::new(&path), &log_text)?;
    }
    Ok(())
}

pub(crate) fn render_metrics(m: &Metrics, classes: &[String]) -> String {
    let mut s = format!("accuracy\t{:.6}\nclass_accuracy\t{:.6}\nconfusion", m.accuracy, m.class_accuracy);
    for c in classes {
        s.push('\t');
        s.push_str(c);
    }
    s.push('\n');
    for (c, row) in classes.iter().zip(&m.confusion) {
        s.push_str(c);
        for v in row {
            s.push_str(&format!("\t{v}"));
        }
        s.push('\n');
    }
    s
}

fn eval_command(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let root = PathBuf::from(s.required("data")?);
    let ckpt_path = PathBuf::from(s.required("checkpoint")?);
    let split: Split = s.get("split")?;
    let occlude: f64 = s.get("occlude")?;
    if !(0.0..1.0).contains(&occlude) {
        return Err(CliError::Usage("--occlude must be in [0, 1)".into()));
    }
    let classes = class_names(&root)?;
    let ckpt = load_checkpoint::<f64>(&read_text(&ckpt_path)?)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", ckpt_path.display())))?;
    let n_classes = ckpt.params.config.n_classes;
    if n_classes != classes.len() {
        return Err(CliError::Runtime(format!(
            "shape mismatch: checkpoint classifies {n_classes} classes, dataset lists {}",
            classes.len()
        )));
    }
    let mut cfg = ckpt.train.clone();
    if let Some(scale) = s.optional_parse::<f64>("threshold-scale-eval")? {
        cfg.threshold_scale_eval = scale;
    }
    let occlude_seed: u64 = s.get("occlude-seed")?;
    let graphs: Vec<LabeledGraph<f64>> = load_graphs(&root.join(split.as_str()))?
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut l = g.into_labeled();
            if occlude > 0.0 {
                let mut rng = SeededRng::derived(occlude_seed, &[i as u64]);
                l.graph = drop_parts(&l.graph, occlude, &mut rng);
            }
            l
        })
        .collect();
    let metrics = evaluate_with_config(&ckpt.params, &graphs, &cfg).map_err(runtime)?;
    let mut text = render_metrics(&metrics, &classes);
    if s.get::<bool>("baseline")? {
        let train_labels: Vec<usize> = load_graphs(&root.join(Split::Train.as_str()))?
            .iter()
            .map(|g| g.label)
            .collect();
        let labels: Vec<usize> = graphs.iter().map(|g| g.label).collect();
        let b = majority_class_baseline(&train_labels, &labels, n_classes);
        text.push_str(&format!("baseline_accuracy\t{:.6}\nbaseline_class_accuracy\t{:.6}\n", b.accuracy, b.class_accuracy));
    }
    let _ = write!(out, "{text}");
    if let Some(path) = s.optional("metrics-out") {
        write_file(Path::new(&path), &text)?;
    }
    Ok(())
}

fn gradcheck(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let reports = run_gradient_suite(s.get("seed")?);
    let _ = writeln!(out, "check\tmax_rel_error\ttolerance\tstatus");
    for r in &reports {
        let status = if r.passed() { "ok" } else { "FAIL" };
        let _ = writeln!(out, "{}\t{:.3e}\t{:.0e}\t{status}", r.name, r.max_rel_error, r.tolerance);
    }
    match reports.iter().filter(|r| !r.passed()).count() {
        0 => Ok(()),
        n => Err(CliError::Runtime(format!("{n} gradient checks failed"))),
    }
}

fn inspect(s: &Settings, out: &mut dyn Write) -> Result<(), CliError> {
    let input = PathBuf::from(s.required("input")?);
    let (sampler, _, passes) = sampling_configs(s)?;
    let mesh = load_mesh::<f64>(&read(&input)?, mesh_format(&input)?, &LoadOptions::default())
        .map_err(|e| CliError::Runtime(format!("{}: {e}", input.display())))?;
    let report = mesh.load_report();
    let _ = writeln!(
        out,
        "vertices\t{}\ntriangles\t{}\ndropped_degenerate\t{}\nnon_manifold_edges\t{}\ntriangulated_polygons\t{}",
        mesh.vertices().len(),
        mesh.n_triangles(),
        report.dropped_degenerate,
        report.non_manifold_edges,
        report.triangulated_polygons
    );
    let prepared = PreparedMesh::new(mesh, passes).map_err(runtime)?;
    let graph = sample_graph(&prepared, &sampler).map_err(runtime)?;
    let _ = writeln!(out, "parts\t{}\nedges\t{}", graph.parts.len(), graph.edges.len());
    let _ = writeln!(out, "part\tcenter\ttriangles\taccumulated_angle\tdegree");
    for (i, p) in graph.parts.iter().enumerate() {
        let degree = graph.edges.iter().filter(|&&(a, b)| a == i || b == i).count();
        let _ = writeln!(
            out,
            "{i}\t{}\t{}\t{:.6}\t{degree}",
            p.center_triangle,
            p.triangles.len(),
            p.accumulated_angle
        );
    }
    Ok(())
}
