//! Command-line pipeline: annotation consensus, interaction-type
//! quantization, predictor fitting, prediction, evaluation, and the four
//! downstream applications. Every command is deterministic given its
//! inputs and the --seed flag; identical invocations produce byte-identical
//! outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use interactee::apps::{
    bleu, prime_detections_with, rank_importance, retarget, retrieve_captions, tokenize,
    CaptionedExample, Detection, PrimingRule,
};
use interactee::consensus::{consensus_box, AnnotationSet, DEFAULT_BANDWIDTH_FRACTION};
use interactee::error::{Error, Result};
use interactee::eval::{
    evaluate, near_person_baseline, random_baseline_rng, EvalRecord, EvalReport,
};
use interactee::features::DescriptorVector;
use interactee::geometry::{
    denormalize_to_box, normalize_localization, BoundingBox, LocalizationParams, PersonInstance,
};
use interactee::io::{
    load_dataset, load_knn_model, load_mdn, save_dataset, save_knn_model, save_mdn,
    save_quantizer, Dataset, DescriptorStore,
};
use interactee::knn::{rasterize_box_votes, KnnModel, DEFAULT_K};
use interactee::mdn::{mdn_forward, mdn_init, mdn_predict, train, MdnNetwork, TrainConfig};
use interactee::quantize::{assign_type, fit_quantizer, type_distribution, TypeStats};

#[derive(Parser)]
#[command(
    name = "interactee",
    version,
    about = "Predict the location and scale of a person's interactee"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse annotator boxes into consensus ground truth
    Consensus(ConsensusArgs),
    /// Fit the 10x4 interaction-type codebook and report type statistics
    Quantize(QuantizeArgs),
    /// Fit the nearest-neighbor predictor
    FitKnn(FitKnnArgs),
    /// Train the mixture density network predictor
    TrainMdn(TrainMdnArgs),
    /// Predict interactee boxes with a fitted model
    Predict(PredictArgs),
    /// Score predictions against ground truth, with baselines
    Evaluate(EvaluateArgs),
    /// Filter a detection list by the predicted interactee region
    Prime(PrimeArgs),
    /// Interactee-aware seam-carving retarget of a PNG
    Retarget(RetargetArgs),
    /// Rank scene objects by overlap with the predicted interactee
    Importance(ImportanceArgs),
    /// Retrieve sentences for a query from a captioned database
    Caption(CaptionArgs),
    /// BLEU-score a file of candidate sentences against references
    Bleu(BleuArgs),
}

#[derive(Args)]
struct ConsensusArgs {
    /// Dataset JSON with annotator_boxes
    #[arg(long)]
    input: PathBuf,
    /// Output dataset JSON with gt_interactee filled in
    #[arg(long)]
    output: PathBuf,
    /// Mean-shift bandwidth as a fraction of the image diagonal
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH_FRACTION)]
    bandwidth_fraction: f64,
    /// Absolute bandwidth in pixels (overrides the fraction)
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Args)]
struct QuantizeArgs {
    /// Dataset JSON with gt_interactee
    #[arg(long)]
    input: PathBuf,
    /// Output codebook JSON
    #[arg(long)]
    codebook: PathBuf,
    /// Optional output JSON with per-type distributions and assignments
    #[arg(long)]
    distributions: Option<PathBuf>,
    /// k-means seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitKnnArgs {
    /// Dataset JSON with gt_interactee and descriptor_ref
    #[arg(long)]
    input: PathBuf,
    /// Descriptor store file
    #[arg(long)]
    store: PathBuf,
    /// Neighbor count
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Output model JSON
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct TrainMdnArgs {
    /// Dataset JSON with gt_interactee and descriptor_ref
    #[arg(long)]
    input: PathBuf,
    /// Descriptor store file
    #[arg(long)]
    store: PathBuf,
    /// Hidden layer widths, comma separated
    #[arg(long, default_value = "64")]
    hidden: String,
    /// Mixture component count
    #[arg(long, default_value_t = 5)]
    components: usize,
    #[arg(long, default_value_t = 10_000)]
    iterations: usize,
    #[arg(long, default_value_t = 0.001)]
    learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-3)]
    sigma_floor: f64,
    /// Output network JSON
    #[arg(long)]
    output: PathBuf,
    /// Optional per-iteration loss history JSON
    #[arg(long)]
    loss_history: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON produced by fit-knn or train-mdn
    #[arg(long)]
    model: PathBuf,
    /// Model kind: knn or mdn
    #[arg(long)]
    kind: String,
    /// Dataset JSON naming the query persons (descriptor_ref required)
    #[arg(long)]
    input: PathBuf,
    /// Descriptor store file
    #[arg(long)]
    store: PathBuf,
    /// Output predictions JSON
    #[arg(long)]
    output: PathBuf,
    /// Directory for per-person heatmap PGMs
    #[arg(long)]
    heatmap_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    grid_w: usize,
    #[arg(long, default_value_t = 64)]
    grid_h: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset JSON with gt_interactee
    #[arg(long)]
    input: PathBuf,
    /// Predictions JSON from `predict`
    #[arg(long)]
    predictions: PathBuf,
    /// Output report JSON (method plus Near Person and Random baselines)
    #[arg(long)]
    output: PathBuf,
    /// Optional per-example CSV for the method predictions
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Seed for the Random baseline
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct PrimeArgs {
    /// Detections JSON
    #[arg(long)]
    detections: PathBuf,
    /// Predicted interactee box as "x,y,w,h"
    #[arg(long, value_name = "X,Y,W,H")]
    r#box: Option<String>,
    /// Predictions JSON to take the box from
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Image id within --predictions
    #[arg(long)]
    image_id: Option<String>,
    /// Person index within --predictions
    #[arg(long, default_value_t = 0)]
    person_index: usize,
    /// Inside rule: center or iou
    #[arg(long, default_value = "center")]
    rule: String,
    /// IOU threshold when --rule iou
    #[arg(long, default_value_t = 0.5)]
    iou_threshold: f64,
    /// Output detections JSON
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct RetargetArgs {
    /// Input PNG
    #[arg(long)]
    input: PathBuf,
    /// Output PNG
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    target_width: usize,
    #[arg(long)]
    target_height: usize,
    /// Protected box "x,y,w,h"; repeat for several boxes
    #[arg(long, value_name = "X,Y,W,H")]
    protect: Vec<String>,
}

#[derive(Args)]
struct ImportanceArgs {
    /// Dataset JSON with scene_objects
    #[arg(long)]
    input: PathBuf,
    /// Predictions JSON from `predict`
    #[arg(long)]
    predictions: PathBuf,
    /// Output rankings JSON
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct CaptionArgs {
    /// Database dataset JSON with captions, gt_interactee, descriptor_ref
    #[arg(long)]
    input: PathBuf,
    /// Descriptor store file
    #[arg(long)]
    store: PathBuf,
    /// Store row key of the query descriptor
    #[arg(long)]
    query_key: String,
    /// Query localization parameters "dx,dy,a" (e.g. a predicted box)
    #[arg(long, value_name = "DX,DY,A")]
    query_params: String,
    /// How many neighbor images to adopt sentences from
    #[arg(long, default_value_t = interactee::apps::caption::DEFAULT_K_S)]
    k_s: usize,
    /// Output sentences JSON
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct BleuArgs {
    /// Candidate sentences, one per line
    #[arg(long)]
    candidates: PathBuf,
    /// References, one line per candidate; multiple references tab-separated
    #[arg(long)]
    references: PathBuf,
    #[arg(long, default_value_t = 4)]
    max_n: usize,
    /// Output scores JSON
    #[arg(long)]
    output: PathBuf,
}

// Shared file shapes.

#[derive(Serialize, Deserialize)]
struct PredictionsFile {
    version: u32,
    predictions: Vec<PredictionEntry>,
}

#[derive(Serialize, Deserialize)]
struct PredictionEntry {
    image_id: String,
    person_index: usize,
    params: [f64; 3],
    bbox: BoundingBox,
}

/// Detection list; a null score stands for negative infinity, which JSON
/// cannot represent directly.
#[derive(Serialize, Deserialize)]
struct DetectionsFile {
    version: u32,
    detections: Vec<DetectionRecord>,
}

#[derive(Serialize, Deserialize)]
struct DetectionRecord {
    bbox: BoundingBox,
    score: Option<f64>,
    category: String,
}

impl DetectionRecord {
    fn to_detection(&self) -> Detection {
        Detection {
            bbox: self.bbox,
            score: self.score.unwrap_or(f64::NEG_INFINITY),
            category: self.category.clone(),
        }
    }

    fn from_detection(d: &Detection) -> Self {
        DetectionRecord {
            bbox: d.bbox,
            score: if d.score == f64::NEG_INFINITY {
                None
            } else {
                Some(d.score)
            },
            category: d.category.clone(),
        }
    }
}

fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn parse_csv_floats(text: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let parts: std::result::Result<Vec<f64>, _> =
        text.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match parts {
        Ok(v) if v.len() == expected => Ok(v),
        _ => Err(Error::validation(
            what,
            format!("expected {expected} comma-separated numbers, got {text:?}"),
        )),
    }
}

fn parse_box_arg(text: &str, what: &str) -> Result<BoundingBox> {
    let v = parse_csv_floats(text, 4, what)?;
    if v[2] <= 0.0 || v[3] <= 0.0 {
        return Err(Error::validation(what, "box width and height must be positive"));
    }
    Ok(BoundingBox::new(v[0], v[1], v[2], v[3]))
}

fn load_dataset_warned(path: &Path) -> Result<Dataset> {
    let (dataset, warnings) = load_dataset(path)?;
    if warnings > 0 {
        eprintln!(
            "warning: clamped {warnings} box(es) to image bounds in {}",
            path.display()
        );
    }
    Ok(dataset)
}

/// Training rows: (store key, descriptor, normalized ground truth), in
/// dataset order, for persons carrying both a descriptor_ref and a GT box.
fn collect_training(
    dataset: &Dataset,
    store: &DescriptorStore,
) -> Result<Vec<(String, DescriptorVector, LocalizationParams)>> {
    dataset.validate_descriptor_refs(store)?;
    let mut rows = Vec::new();
    for img in &dataset.images {
        for p in &img.persons {
            if let (Some(key), Some(gt)) = (&p.descriptor_ref, &p.gt_interactee) {
                let descriptor = store.get(key).expect("validated above");
                rows.push((
                    key.clone(),
                    descriptor,
                    normalize_localization(&p.person_box, gt),
                ));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(
            "no persons with both descriptor_ref and gt_interactee",
        ));
    }
    Ok(rows)
}

fn person_instance(img: &interactee::io::ImageEntry, person_box: BoundingBox) -> PersonInstance {
    PersonInstance {
        image_id: img.image_id.clone(),
        person_box,
        image_width: img.width,
        image_height: img.height,
    }
}

fn run_consensus(args: &ConsensusArgs) -> Result<()> {
    let mut dataset = load_dataset_warned(&args.input)?;
    let mut fused = 0usize;
    for img in &mut dataset.images {
        let diagonal = (img.width * img.width + img.height * img.height).sqrt();
        let bandwidth = args.bandwidth.unwrap_or(args.bandwidth_fraction * diagonal);
        for (pi, person) in img.persons.iter_mut().enumerate() {
            if let Some(boxes) = &person.annotator_boxes {
                if boxes.is_empty() {
                    continue;
                }
                let set = AnnotationSet {
                    image_id: img.image_id.clone(),
                    person_index: pi,
                    boxes: boxes.clone(),
                };
                person.gt_interactee = Some(consensus_box(&set, bandwidth));
                fused += 1;
            }
        }
    }
    if fused == 0 {
        return Err(Error::EmptyInput("no persons with annotator_boxes"));
    }
    save_dataset(&args.output, &dataset)?;
    eprintln!("consensus: fused {fused} annotation set(s)");
    Ok(())
}

#[derive(Serialize)]
struct DistributionsFile {
    version: u32,
    types: Vec<TypeStats>,
    assignments: Vec<AssignmentEntry>,
}

#[derive(Serialize)]
struct AssignmentEntry {
    image_id: String,
    person_index: usize,
    type_id: usize,
}

fn run_quantize(args: &QuantizeArgs) -> Result<()> {
    let dataset = load_dataset_warned(&args.input)?;
    let mut params = Vec::new();
    let mut who = Vec::new();
    for img in &dataset.images {
        for (pi, p) in img.persons.iter().enumerate() {
            if let Some(gt) = &p.gt_interactee {
                params.push(normalize_localization(&p.person_box, gt));
                who.push((img.image_id.clone(), pi, p.interactee_category.clone()));
            }
        }
    }
    if params.is_empty() {
        return Err(Error::EmptyInput("no persons with gt_interactee"));
    }
    let quantizer = fit_quantizer(&params, args.seed)?;
    save_quantizer(&args.codebook, &quantizer)?;

    if let Some(path) = &args.distributions {
        let mut labeled = Vec::new();
        let mut assignments = Vec::new();
        for (y, (image_id, person_index, category)) in params.iter().zip(&who) {
            let t = assign_type(&quantizer, y);
            assignments.push(AssignmentEntry {
                image_id: image_id.clone(),
                person_index: *person_index,
                type_id: t.type_id,
            });
            if let Some(label) = category {
                labeled.push((t, label.clone()));
            }
        }
        write_json_file(
            path,
            &DistributionsFile {
                version: 1,
                types: type_distribution(&labeled),
                assignments,
            },
        )?;
    }
    eprintln!("quantize: fitted on {} example(s)", params.len());
    Ok(())
}

fn run_fit_knn(args: &FitKnnArgs) -> Result<()> {
    let dataset = load_dataset_warned(&args.input)?;
    let store = DescriptorStore::load(&args.store)?;
    let rows = collect_training(&dataset, &store)?;
    let keys: Vec<String> = rows.iter().map(|(k, _, _)| k.clone()).collect();
    let training: Vec<(DescriptorVector, LocalizationParams)> =
        rows.into_iter().map(|(_, d, y)| (d, y)).collect();
    let model = KnnModel::fit(training, args.k)?;
    save_knn_model(
        &args.output,
        &model,
        &args.store.display().to_string(),
        &keys,
    )?;
    eprintln!("fit-knn: stored {} example(s), k = {}", model.len(), model.k());
    Ok(())
}

#[derive(Serialize)]
struct LossHistoryFile {
    version: u32,
    losses: Vec<f64>,
}

fn run_train_mdn(args: &TrainMdnArgs) -> Result<()> {
    let dataset = load_dataset_warned(&args.input)?;
    let store = DescriptorStore::load(&args.store)?;
    let rows = collect_training(&dataset, &store)?;
    let examples: Vec<(Vec<f64>, LocalizationParams)> = rows
        .iter()
        .map(|(_, d, y)| (d.values().to_vec(), *y))
        .collect();

    let hidden: Vec<usize> = args
        .hidden
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::validation("--hidden", format!("bad layer list {:?}", args.hidden)))?;
    let input_dim = examples[0].0.len();
    let mut net = mdn_init(input_dim, &hidden, args.components, args.seed);
    let cfg = TrainConfig {
        iterations: args.iterations,
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        seed: args.seed,
        sigma_floor: args.sigma_floor,
    };
    let history = train(&mut net, &examples, &cfg)?;
    save_mdn(&args.output, &net)?;
    if let Some(path) = &args.loss_history {
        write_json_file(
            path,
            &LossHistoryFile {
                version: 1,
                losses: history.clone(),
            },
        )?;
    }
    eprintln!(
        "train-mdn: {} example(s), final loss {:.6}",
        examples.len(),
        history.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

enum ModelKind {
    Knn(KnnModel),
    Mdn(MdnNetwork),
}

fn run_predict(args: &PredictArgs) -> Result<()> {
    let dataset = load_dataset_warned(&args.input)?;
    let store = DescriptorStore::load(&args.store)?;
    dataset.validate_descriptor_refs(&store)?;

    let model = match args.kind.as_str() {
        "knn" => ModelKind::Knn(load_knn_model(&args.model)?.into_model(&store)?),
        "mdn" => ModelKind::Mdn(load_mdn(&args.model)?),
        other => {
            return Err(Error::validation(
                "--kind",
                format!("expected knn or mdn, got {other:?}"),
            ))
        }
    };
    if let Some(dir) = &args.heatmap_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut predictions = Vec::new();
    for img in &dataset.images {
        for (pi, p) in img.persons.iter().enumerate() {
            let Some(key) = &p.descriptor_ref else {
                continue;
            };
            let descriptor = store.get(key).expect("validated above");
            let person = person_instance(img, p.person_box);
            let (params, bbox, votes) = match &model {
                ModelKind::Knn(knn) => {
                    let (params, neighbors) = knn.predict(&descriptor)?;
                    let votes: Vec<(BoundingBox, f64)> = neighbors
                        .iter()
                        .filter(|n| knn.training()[n.index].1.a > 0.0)
                        .map(|n| {
                            (
                                denormalize_to_box(&knn.training()[n.index].1, &p.person_box),
                                n.weight,
                            )
                        })
                        .collect();
                    (params, denormalize_to_box(&params, &p.person_box), votes)
                }
                ModelKind::Mdn(net) => {
                    let (params, bbox) = mdn_predict(net, descriptor.values(), &person)?;
                    let gmm = mdn_forward(net, descriptor.values())?;
                    let votes: Vec<(BoundingBox, f64)> = gmm
                        .weights
                        .iter()
                        .zip(&gmm.means)
                        .filter(|(_, mu)| mu[2] > 0.0)
                        .map(|(&w, mu)| {
                            (
                                denormalize_to_box(
                                    &LocalizationParams::new(mu[0], mu[1], mu[2]),
                                    &p.person_box,
                                ),
                                w,
                            )
                        })
                        .collect();
                    (params, bbox, votes)
                }
            };
            if let Some(dir) = &args.heatmap_dir {
                let grid = rasterize_box_votes(&votes, &person, args.grid_w, args.grid_h);
                let name = format!("{}_{pi}.pgm", img.image_id.replace('/', "_"));
                interactee::io::pgm::write_pgm(&dir.join(name), &grid)?;
            }
            predictions.push(PredictionEntry {
                image_id: img.image_id.clone(),
                person_index: pi,
                params: params.as_array(),
                bbox,
            });
        }
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput("no persons with descriptor_ref"));
    }
    write_json_file(
        &args.output,
        &PredictionsFile {
            version: 1,
            predictions,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct EvaluationFile {
    version: u32,
    method: EvalReport,
    near_person: EvalReport,
    random: EvalReport,
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let dataset = load_dataset_warned(&args.input)?;
    let preds: PredictionsFile = read_json_file(&args.predictions)?;
    let mut by_key: BTreeMap<(String, usize), BoundingBox> = BTreeMap::new();
    for p in &preds.predictions {
        by_key.insert((p.image_id.clone(), p.person_index), p.bbox);
    }

    let mut method = Vec::new();
    let mut near = Vec::new();
    let mut random = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    for img in &dataset.images {
        for (pi, p) in img.persons.iter().enumerate() {
            let Some(gt) = &p.gt_interactee else { continue };
            let Some(&predicted) = by_key.get(&(img.image_id.clone(), pi)) else {
                return Err(Error::validation(
                    format!("predictions for {}#{pi}", img.image_id),
                    "ground-truth person has no prediction entry",
                ));
            };
            let person = person_instance(img, p.person_box);
            let record = |predicted| EvalRecord {
                image_id: img.image_id.clone(),
                person_box: p.person_box,
                gt_interactee: *gt,
                predicted,
            };
            method.push(record(predicted));
            near.push(record(near_person_baseline(&person)));
            random.push(record(random_baseline_rng(&person, &mut rng)));
        }
    }
    let method = evaluate(&method)?;
    if let Some(path) = &args.csv {
        std::fs::write(path, method.to_csv())?;
    }
    write_json_file(
        &args.output,
        &EvaluationFile {
            version: 1,
            method,
            near_person: evaluate(&near)?,
            random: evaluate(&random)?,
        },
    )?;
    Ok(())
}

fn run_prime(args: &PrimeArgs) -> Result<()> {
    let file: DetectionsFile = read_json_file(&args.detections)?;
    let predicted = match (&args.r#box, &args.predictions) {
        (Some(text), None) => parse_box_arg(text, "--box")?,
        (None, Some(path)) => {
            let image_id = args.image_id.as_ref().ok_or_else(|| {
                Error::validation("--image-id", "required together with --predictions")
            })?;
            let preds: PredictionsFile = read_json_file(path)?;
            preds
                .predictions
                .iter()
                .find(|p| &p.image_id == image_id && p.person_index == args.person_index)
                .map(|p| p.bbox)
                .ok_or_else(|| {
                    Error::validation(
                        "--image-id/--person-index",
                        format!("no prediction for {image_id}#{}", args.person_index),
                    )
                })?
        }
        _ => {
            return Err(Error::validation(
                "--box/--predictions",
                "provide exactly one source for the predicted box",
            ))
        }
    };
    let rule = match args.rule.as_str() {
        "center" => PrimingRule::CenterInside,
        "iou" => PrimingRule::IouAtLeast(args.iou_threshold),
        other => {
            return Err(Error::validation(
                "--rule",
                format!("expected center or iou, got {other:?}"),
            ))
        }
    };
    let detections: Vec<Detection> = file.detections.iter().map(|d| d.to_detection()).collect();
    let primed = prime_detections_with(&detections, &predicted, rule);
    write_json_file(
        &args.output,
        &DetectionsFile {
            version: 1,
            detections: primed.iter().map(DetectionRecord::from_detection).collect(),
        },
    )?;
    Ok(())
}

fn run_retarget(args: &RetargetArgs) -> Result<()> {
    let image = interactee::io::png::load_png(&args.input)?;
    let mut protected = Vec::new();
    for text in &args.protect {
        protected.push(parse_box_arg(text, "--protect")?);
    }
    let out = retarget(&image, args.target_width, args.target_height, &protected)?;
    interactee::io::png::save_png(&args.output, &out)?;
    Ok(())
}

#[derive(Serialize)]
struct RankingsFile {
    version: u32,
    rankings: Vec<RankingEntry>,
}

#[derive(Serialize)]
struct RankingEntry {
    image_id: String,
    person_index: usize,
    ranked: Vec<RankedObject>,
}

#[derive(Serialize)]
struct RankedObject {
    object_id: String,
    category: String,
    score: f64,
}

fn run_importance(args: &ImportanceArgs) -> Result<()> {
    let dataset = load_dataset_warned(&args.input)?;
    let preds: PredictionsFile = read_json_file(&args.predictions)?;
    let mut by_key: BTreeMap<(String, usize), BoundingBox> = BTreeMap::new();
    for p in &preds.predictions {
        by_key.insert((p.image_id.clone(), p.person_index), p.bbox);
    }

    let mut rankings = Vec::new();
    for img in &dataset.images {
        for (pi, p) in img.persons.iter().enumerate() {
            let Some(objects) = &p.scene_objects else { continue };
            if objects.is_empty() {
                continue;
            }
            let Some(&predicted) = by_key.get(&(img.image_id.clone(), pi)) else {
                continue;
            };
            let ranked = rank_importance(objects, &predicted)?;
            rankings.push(RankingEntry {
                image_id: img.image_id.clone(),
                person_index: pi,
                ranked: ranked
                    .into_iter()
                    .map(|(o, score)| RankedObject {
                        object_id: o.object_id,
                        category: o.category,
                        score,
                    })
                    .collect(),
            });
        }
    }
    if rankings.is_empty() {
        return Err(Error::EmptyInput(
            "no persons with both scene_objects and a prediction",
        ));
    }
    write_json_file(
        &args.output,
        &RankingsFile {
            version: 1,
            rankings,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct SentencesFile {
    version: u32,
    sentences: Vec<Vec<String>>,
    joined: Vec<String>,
}

fn run_caption(args: &CaptionArgs) -> Result<()> {
    let dataset = load_dataset_warned(&args.input)?;
    let store = DescriptorStore::load(&args.store)?;
    dataset.validate_descriptor_refs(&store)?;

    let mut db = Vec::new();
    for img in &dataset.images {
        for p in &img.persons {
            let (Some(key), Some(gt), Some(captions)) =
                (&p.descriptor_ref, &p.gt_interactee, &p.captions)
            else {
                continue;
            };
            if captions.is_empty() {
                continue;
            }
            db.push(CaptionedExample {
                descriptor: store.get(key).expect("validated above"),
                params: normalize_localization(&p.person_box, gt),
                sentences: captions.iter().map(|c| tokenize(c)).collect(),
            });
        }
    }
    if db.is_empty() {
        return Err(Error::EmptyInput(
            "no persons with descriptor_ref, gt_interactee, and captions",
        ));
    }

    let query_descriptor = store.get(&args.query_key).ok_or_else(|| {
        Error::validation("--query-key", format!("key {:?} not in store", args.query_key))
    })?;
    let qp = parse_csv_floats(&args.query_params, 3, "--query-params")?;
    let query_params = LocalizationParams::new(qp[0], qp[1], qp[2]);

    let sentences = retrieve_captions(&query_descriptor, &query_params, &db, args.k_s)?;
    let joined = sentences.iter().map(|s| s.join(" ")).collect();
    write_json_file(
        &args.output,
        &SentencesFile {
            version: 1,
            sentences,
            joined,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct BleuFile {
    version: u32,
    per_sentence: Vec<BleuEntry>,
    mean_combined: f64,
}

#[derive(Serialize)]
struct BleuEntry {
    per_n: Vec<f64>,
    combined: f64,
    brevity_penalty: f64,
}

fn run_bleu(args: &BleuArgs) -> Result<()> {
    let candidates = std::fs::read_to_string(&args.candidates)?;
    let references = std::fs::read_to_string(&args.references)?;
    let cand_lines: Vec<&str> = candidates.lines().collect();
    let ref_lines: Vec<&str> = references.lines().collect();
    if cand_lines.len() != ref_lines.len() {
        return Err(Error::validation(
            "--candidates/--references",
            format!(
                "line counts differ: {} vs {}",
                cand_lines.len(),
                ref_lines.len()
            ),
        ));
    }
    if cand_lines.is_empty() {
        return Err(Error::EmptyInput("candidate file"));
    }

    let mut per_sentence = Vec::with_capacity(cand_lines.len());
    let mut total = 0.0;
    for (cand, refs) in cand_lines.iter().zip(&ref_lines) {
        let candidate = tokenize(cand);
        let reference_lists: Vec<Vec<String>> = refs.split('\t').map(tokenize).collect();
        let score = bleu(&candidate, &reference_lists, args.max_n);
        total += score.combined;
        per_sentence.push(BleuEntry {
            per_n: score.per_n,
            combined: score.combined,
            brevity_penalty: score.brevity_penalty,
        });
    }
    write_json_file(
        &args.output,
        &BleuFile {
            version: 1,
            mean_combined: total / per_sentence.len() as f64,
            per_sentence,
        },
    )?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Consensus(args) => run_consensus(args),
        Command::Quantize(args) => run_quantize(args),
        Command::FitKnn(args) => run_fit_knn(args),
        Command::TrainMdn(args) => run_train_mdn(args),
        Command::Predict(args) => run_predict(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Prime(args) => run_prime(args),
        Command::Retarget(args) => run_retarget(args),
        Command::Importance(args) => run_importance(args),
        Command::Caption(args) => run_caption(args),
        Command::Bleu(args) => run_bleu(args),
    }
}

fn main() -> ExitCode {
    // clap exits with code 2 on usage errors by itself.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
