//! Pipeline CLI: synthetic data generation, per-stage runs, training, and
//! abnormality evaluation. Exit codes: 0 success, 2 usage error, 3 data
//! error, 4 numerical failure.

mod flags;

use actionprop::error::Error;
use actionprop::features::assemble_feature_stack;
use actionprop::flow::estimate_flow_pair;
use actionprop::io;
use actionprop::pipeline::{self, BoxSource, PipelineConfig};
use actionprop::synth;
use clap::{Parser, Subcommand};
use flags::{FlowFlags, ProposalFlags, RunFlags};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "actionprop", version, about = "Action region proposals and abnormality detection for frame sequences")]
struct Cli {
    /// JSON pipeline configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded synthetic datasets with ground truth.
    SynthData {
        /// squares | actions | abnormal
        #[arg(long, default_value = "squares")]
        kind: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Sequences to generate (squares kind) or per action (actions kind).
        #[arg(long, default_value_t = 20)]
        sequences: usize,
        #[arg(long, default_value_t = 4)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        side: usize,
        /// Camera speed range "lo,hi" in px/frame (squares kind).
        #[arg(long)]
        camera: Option<String>,
    },
    /// Estimate forward/backward flow for every consecutive frame pair.
    ExtractFlow {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flow: FlowFlags,
    },
    /// Compute feature stacks; optionally dump named channels as PGMs.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Channel to dump (repeatable).
        #[arg(long = "dump-channel")]
        dump_channels: Vec<String>,
        #[command(flatten)]
        flow: FlowFlags,
    },
    /// Train the boundary forest on a synthetic square dataset.
    TrainBoundary {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Patch sampling stride during extraction.
        #[arg(long, default_value_t = 8)]
        sample_stride: usize,
        #[command(flatten)]
        flow: FlowFlags,
    },
    /// Predict soft boundary maps for a sequence.
    PredictBoundary {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        flow: FlowFlags,
    },
    /// Score, suppress, and select action region proposals.
    Propose {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory of precomputed boundary maps (else computed in-pipeline
        /// with --forest).
        #[arg(long)]
        boundary_dir: Option<PathBuf>,
        #[arg(long)]
        forest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        proposal: ProposalFlags,
        #[command(flatten)]
        flow: FlowFlags,
    },
    /// Train the action classifier on a labeled suite.
    TrainAction {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// proposals | truth | fullframe
        #[arg(long, default_value = "proposals")]
        boxes: String,
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        flow: FlowFlags,
        #[command(flatten)]
        proposal: ProposalFlags,
    },
    /// Classify a sequence and write its action distribution.
    Classify {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        flow: FlowFlags,
        #[command(flatten)]
        proposal: ProposalFlags,
    },
    /// Learn the scene-action prior (and builtin scene centroids).
    LearnPrior {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },

    /// Run the full pipeline and decide abnormality for one sequence.
    DetectAbnormal {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        flow: FlowFlags,
        #[command(flatten)]
        proposal: ProposalFlags,
    },
    /// Evaluate abnormality decisions over a truth-labeled suite.
    EvaluateAbnormal {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        flow: FlowFlags,
        #[command(flatten)]
        proposal: ProposalFlags,
    },
    /// Run the full pipeline (flow to decision where configured).
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunFlags,
        #[command(flatten)]
        flow: FlowFlags,
        #[command(flatten)]
        proposal: ProposalFlags,
    },
}

fn main() {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            std::process::exit(e.exit_code());
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<PipelineConfig, Error> {
    match path {
        Some(p) => PipelineConfig::from_file(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let mut config = load_config(&cli.config)?;
    match cli.command {
        Command::SynthData { kind, seed, out, sequences, frames, side, camera } => {
            synth_data(&kind, seed, &out, sequences, frames, side, camera.as_deref())
        }
        Command::ExtractFlow { manifest, out, flow } => {
            flow.apply(&mut config.flow)?;
            extract_flow(&config, &manifest, &out)
        }
        Command::Features { manifest, out, dump_channels, flow } => {
            flow.apply(&mut config.flow)?;
            features(&config, &manifest, &out, &dump_channels)
        }
        Command::TrainBoundary { data, out, sample_stride, flow } => {
            flow.apply(&mut config.flow)?;
            let dataset = pipeline::load_square_dataset(&data)?;
            let forest = pipeline::train_boundary(&config, &dataset, sample_stride, &out)?;
            println!(
                "trained {} trees on {} feature channels -> {}",
                forest.trees.len(),
                forest.channel_count,
                out.display()
            );
            Ok(())
        }
        Command::PredictBoundary { manifest, forest, out, flow } => {
            flow.apply(&mut config.flow)?;
            config.models.boundary_forest = Some(forest);
            let artifacts = pipeline::run_pipeline(&config, &manifest, &out)?;
            println!("boundary maps in {}", artifacts.out_dir.join("boundary").display());
            Ok(())
        }
        Command::Propose { manifest, boundary_dir, forest, out, proposal, flow } => {
            flow.apply(&mut config.flow)?;
            proposal.apply(&mut config.proposal)?;
            if let Some(f) = forest {
                config.models.boundary_forest = Some(f);
            }
            propose(&config, &manifest, boundary_dir.as_deref(), &out)
        }
        Command::TrainAction { suite, out, boxes, run, flow, proposal } => {
            run.apply(&mut config)?;
            flow.apply(&mut config.flow)?;
            proposal.apply(&mut config.proposal)?;
            let source = match boxes.as_str() {
                "proposals" => BoxSource::Proposals,
                "truth" => BoxSource::Truth,
                "fullframe" => BoxSource::FullFrame,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown box source {other} (proposals|truth|fullframe)"
                    )))
                }
            };
            let scratch = out
                .parent()
                .unwrap_or(std::path::Path::new("."))
                .join("train-action-scratch");
            pipeline::train_action(&config, &suite, source, &scratch, &out)?;
            println!("action model -> {}", out.display());
            Ok(())
        }
        Command::Classify { manifest, out, run, flow, proposal } => {
            run.apply(&mut config)?;
            flow.apply(&mut config.flow)?;
            proposal.apply(&mut config.proposal)?;
            let artifacts = pipeline::run_pipeline(&config, &manifest, &out)?;
            match artifacts.action_distribution {
                Some(dist) => {
                    let labels = config.vocabulary.action_table()?;
                    let top = dist.argmax();
                    println!(
                        "action: {} (p = {:.4}); distribution in {}",
                        labels.name(top),
                        dist.get(top),
                        out.join("distributions/action.json").display()
                    );
                    Ok(())
                }
                None => Err(Error::InvalidConfig(
                    "classification needs an action provider (model or file dir)".into(),
                )),
            }
        }
        Command::LearnPrior { suite, out, run } => {
            run.apply(&mut config)?;
            let table = pipeline::learn_prior(&config, &suite, &out)?;
            println!(
                "prior over {} actions x {} scenes -> {}",
                table.action_count(),
                table.scene_count(),
                out.join("scene_prior.json").display()
            );
            Ok(())
        }
        Command::DetectAbnormal { manifest, out, threshold, run, flow, proposal } => {
            run.apply(&mut config)?;
            flow.apply(&mut config.flow)?;
            proposal.apply(&mut config.proposal)?;
            if let Some(t) = threshold {
                config.abnormality.threshold = t;
            }
            let artifacts = pipeline::run_pipeline(&config, &manifest, &out)?;
            match artifacts.decision {
                Some(d) => {
                    println!(
                        "abd_index = {:.4} (threshold {}): {}",
                        d.abd_index,
                        d.threshold,
                        if d.abnormal { "ABNORMAL" } else { "normal" }
                    );
                    Ok(())
                }
                None => Err(Error::InvalidConfig(
                    "decision needs action + scene providers and models.scene_prior".into(),
                )),
            }
        }
        Command::EvaluateAbnormal { suite, out, threshold, run, flow, proposal } => {
            run.apply(&mut config)?;
            flow.apply(&mut config.flow)?;
            proposal.apply(&mut config.proposal)?;
            if let Some(t) = threshold {
                config.abnormality.threshold = t;
            }
            let (rate, records) = pipeline::evaluate_abnormal(&config, &suite, &out)?;
            println!("success rate {:.4} over {} sequences", rate, records.len());
            Ok(())
        }
        Command::Run { manifest, out, run, flow, proposal } => {
            run.apply(&mut config)?;
            flow.apply(&mut config.flow)?;
            proposal.apply(&mut config.proposal)?;
            let artifacts = pipeline::run_pipeline(&config, &manifest, &out)?;
            println!("artifacts in {}", artifacts.out_dir.display());
            if let Some(d) = artifacts.decision {
                println!(
                    "abd_index = {:.4}: {}",
                    d.abd_index,
                    if d.abnormal { "ABNORMAL" } else { "normal" }
                );
            }
            Ok(())
        }
    }
}

fn synth_data(
    kind: &str,
    seed: u64,
    out: &PathBuf,
    sequences: usize,
    frames: usize,
    side: usize,
    camera: Option<&str>,
) -> Result<(), Error> {
    match kind {
        "squares" => {
            let camera_speed = match camera {
                Some(spec) => {
                    let parts: Vec<&str> = spec.split(',').collect();
                    if parts.len() != 2 {
                        return Err(Error::InvalidConfig("camera range must be lo,hi".into()));
                    }
                    let lo = parts[0].parse::<f32>().map_err(|e| {
                        Error::InvalidConfig(format!("camera range: {e}"))
                    })?;
                    let hi = parts[1].parse::<f32>().map_err(|e| {
                        Error::InvalidConfig(format!("camera range: {e}"))
                    })?;
                    (lo, hi)
                }
                None => (0.0, 0.0),
            };
            let cfg = synth::TrainingSetConfig {
                sequences,
                frames_per_sequence: frames,
                width: side,
                height: side,
                camera_speed,
                ..synth::TrainingSetConfig::default()
            };
            let set = synth::generate_training_set(&cfg, seed)?;
            pipeline::save_square_dataset(out, &set)?;
            println!("{} square sequences -> {}", set.len(), out.display());
        }
        "actions" => {
            let cfg = synth::SuiteConfig {
                width: side,
                height: side,
                frames,
                ..synth::SuiteConfig::default()
            };
            let actions = synth::action_catalog();
            let scenes = synth::scene_catalog();
            let mut count = 0;
            for action in &actions {
                for i in 0..sequences {
                    let s = synth::action_sequence(
                        action,
                        synth::BackgroundKind::HomeScene,
                        &cfg,
                        seed.wrapping_add((action.id * 1000 + i) as u64),
                    )?;
                    let dir = out.join(format!("{}_{i:03}", action.name));
                    io::save_sequence(
                        &dir,
                        "frame",
                        &s.sequence,
                        Some(&s.boxes),
                        Some(action.name),
                        s.scene_id.map(|id| scenes[id].name),
                        None,
                    )?;
                    count += 1;
                }
            }
            println!("{count} action sequences -> {}", out.display());
        }
        "abnormal" => {
            let cfg = synth::SuiteConfig {
                width: side,
                height: side,
                frames,
                ..synth::SuiteConfig::default()
            };
            let scenes = synth::scene_catalog();
            let actions = synth::action_catalog();
            let suite = synth::abnormality_suite(&cfg, sequences, seed)?;
            for (i, s) in suite.train.iter().enumerate() {
                let dir = out.join("train").join(format!(
                    "{}_{i:03}",
                    actions[s.action_id].name
                ));
                io::save_sequence(
                    &dir,
                    "frame",
                    &s.sequence,
                    Some(&s.boxes),
                    Some(actions[s.action_id].name),
                    s.scene_id.map(|id| scenes[id].name),
                    None,
                )?;
            }
            for (i, (s, truth)) in suite.test.iter().enumerate() {
                let dir = out.join("test").join(format!(
                    "{}_in_{}_{i:03}",
                    actions[s.action_id].name,
                    scenes[s.scene_id.unwrap()].name
                ));
                io::save_sequence(
                    &dir,
                    "frame",
                    &s.sequence,
                    Some(&s.boxes),
                    Some(actions[s.action_id].name),
                    s.scene_id.map(|id| scenes[id].name),
                    Some(*truth),
                )?;
            }
            println!(
                "{} train + {} test sequences -> {}",
                suite.train.len(),
                suite.test.len(),
                out.display()
            );
        }
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown dataset kind {other} (squares|actions|abnormal)"
            )))
        }
    }
    Ok(())
}

fn extract_flow(
    config: &PipelineConfig,
    manifest: &PathBuf,
    out: &PathBuf,
) -> Result<(), Error> {
    let manifest = io::SequenceManifest::from_file(manifest)?;
    let sequence = io::load_sequence(&manifest)?;
    sequence.require_pairs()?;
    std::fs::create_dir_all(out)?;
    let frames = sequence.frames();
    for t in 0..frames.len() - 1 {
        let (fwd, bwd) = estimate_flow_pair(&frames[t], &frames[t + 1], &config.flow)?;
        io::write_flow_file(&fwd, &out.join(format!("{t:04}_fwd.flo")))?;
        io::write_flow_file(&bwd, &out.join(format!("{t:04}_bwd.flo")))?;
    }
    println!("{} flow pairs -> {}", frames.len() - 1, out.display());
    Ok(())
}

fn features(
    config: &PipelineConfig,
    manifest: &PathBuf,
    out: &PathBuf,
    dump_channels: &[String],
) -> Result<(), Error> {
    let manifest = io::SequenceManifest::from_file(manifest)?;
    let sequence = io::load_sequence(&manifest)?;
    sequence.require_pairs()?;
    std::fs::create_dir_all(out)?;
    let frames = sequence.frames();
    for t in 0..frames.len() - 1 {
        let (fwd, bwd) = estimate_flow_pair(&frames[t], &frames[t + 1], &config.flow)?;
        let stack = assemble_feature_stack(&frames[t], &frames[t + 1], &fwd, &bwd)?;
        if t == 0 {
            println!(
                "{} channels ({} spatial + {} temporal)",
                stack.combined.channel_count(),
                stack.spatial.channel_count(),
                stack.temporal.channel_count()
            );
        }
        for name in dump_channels {
            let plane = stack.combined.by_name(name).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown channel {name}; available: {}",
                    stack.combined.names().join(", ")
                ))
            })?;
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for v in plane.data() {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
            let range = if hi > lo { hi - lo } else { 1.0 };
            let mut normalized = plane.clone();
            for v in normalized.data_mut() {
                *v = (*v - lo) / range;
            }
            let map = actionprop::forest::BoundaryMap::new(normalized)?;
            io::write_boundary_map_file(&map, &out.join(format!("{t:04}_{name}.pgm")))?;
        }
    }
    Ok(())
}

fn propose(
    config: &PipelineConfig,
    manifest_path: &PathBuf,
    boundary_dir: Option<&std::path::Path>,
    out: &PathBuf,
) -> Result<(), Error> {
    match boundary_dir {
        None => {
            let artifacts = pipeline::run_pipeline(config, manifest_path, out)?;
            println!(
                "proposals -> {} (selected boxes for {} frames)",
                out.join("proposals").display(),
                artifacts.selected_boxes.len()
            );
            Ok(())
        }
        Some(dir) => {
            // externally supplied boundary maps bypass the forest
            use actionprop::proposal::{nms, score_boxes, select_action_region, sort_boxes};
            std::fs::create_dir_all(out)?;
            let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("pgm"))
                .collect();
            entries.sort();
            if entries.is_empty() {
                return Err(Error::MissingFile(dir.join("*.pgm")));
            }
            let mut records = Vec::new();
            for (t, path) in entries.iter().enumerate() {
                let map = io::read_boundary_map_file(path)?;
                let mut all = score_boxes(&map, &config.proposal)?;
                sort_boxes(&mut all);
                let kept = nms(&all, config.proposal.nms_iou);
                let confident: Vec<_> = kept
                    .into_iter()
                    .filter(|b| b.score >= config.proposal.min_score)
                    .collect();
                let region = select_action_region(&confident, config.proposal.top_k);
                for b in &region.boxes {
                    records.push(io::ProposalRecord::new(t, b));
                }
            }
            let file = std::fs::File::create(out.join("topk.jsonl"))?;
            io::write_proposals(&records, std::io::BufWriter::new(file))?;
            println!("{} proposals -> {}", records.len(), out.join("topk.jsonl").display());
            Ok(())
        }
    }
}
