//! Experiment pipeline behind the subcommands: dataset generation,
//! training, the attack x metric evaluation grid, sweeps and
//! aggregation.
//!
//! Determinism is load-bearing everywhere here: every random choice is
//! seeded by [`derive_seed`] from the config seed plus structural tags,
//! iteration uses sorted orders only, and floats are printed with
//! [`fmt_sig17`], so two runs of the same binary on the same config
//! produce byte-identical result trees.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lens_core::attack::{
    lens_objective_attack, mass_center_attack, random_sign, topk_attack, universal_random,
    AttackConfig, AttackResult,
};
use lens_core::attribution::compute_attribution;
use lens_core::dataset::{generate_digit_dataset, DatasetManifest};
use lens_core::diversity::{lens_prec_at_k_div, lens_recall_at_k_div, topk_div_intersection};
use lens_core::io::fmt_sig17;
use lens_core::map::{AttributionMap, ImageTensor};
use lens_core::metrics::{
    kendall_tau, lens_kendall, lens_prec_at_k, lens_recall_at_k, lens_spearman, spearman_rho,
    topk_intersection,
};
use lens_core::model::{
    init_network, load_network, save_network, train, PgdTraining, ToyNetwork, TrainConfig,
};
use lens_core::CoreError;

use crate::config::{AttackKind, ExperimentConfig, MetricKind, Regime};
use crate::error::{CliError, CliResult};

// Structural tags for seed derivation; never reordered.
const TAG_MODEL: u64 = 1;
const TAG_TRAIN: u64 = 2;
const TAG_SAMPLE: u64 = 3;
const TAG_ATTACK: u64 = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes the base seed with structural tags (regime index, image
/// index, ...) into an independent stream seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix(base);
    for t in tags {
        acc = splitmix(acc ^ splitmix(*t));
    }
    acc
}

struct LoadedImage {
    id: String,
    image: ImageTensor,
    label: usize,
    /// Position in the manifest; part of per-image seed derivation so
    /// the stream does not depend on which subset was sampled.
    index: u64,
}

fn load_dataset(cfg: &ExperimentConfig) -> CliResult<Vec<LoadedImage>> {
    let manifest_path = cfg.dataset_dir.join("manifest.csv");
    let manifest = DatasetManifest::load(&manifest_path)
        .map_err(|e| CliError::Data(format!("{e} (generate a dataset with `lens gen-data`)")))?;
    let mut images = Vec::with_capacity(manifest.len());
    for (i, entry) in manifest.entries().iter().enumerate() {
        let image = manifest.load_image(entry).map_err(|e| CliError::Data(e.to_string()))?;
        images.push(LoadedImage {
            id: entry.id.clone(),
            image,
            label: entry.label,
            index: i as u64,
        });
    }
    let (h, w) = (images[0].image.height(), images[0].image.width());
    for img in &images {
        if img.image.height() != h || img.image.width() != w {
            return Err(CliError::Data(format!(
                "image {} is {}x{}, expected {}x{}",
                img.id,
                img.image.height(),
                img.image.width(),
                h,
                w
            )));
        }
    }
    images.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(images)
}

/// Samples `cfg.sample_count` images without replacement (partial
/// Fisher-Yates on the sorted list), returning them sorted by id.
fn sample_images<'a>(all: &'a [LoadedImage], cfg: &ExperimentConfig) -> Vec<&'a LoadedImage> {
    let n = all.len();
    let count = cfg.sample_count.unwrap_or(n).min(n);
    if count == n {
        return all.iter().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[TAG_SAMPLE]));
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut chosen: Vec<&LoadedImage> = idx[..count].iter().map(|&i| &all[i]).collect();
    chosen.sort_by(|a, b| a.id.cmp(&b.id));
    chosen
}

fn model_path(cfg: &ExperimentConfig, regime: Regime) -> PathBuf {
    cfg.model_dir.join(format!("model_{}.toynet", regime.id()))
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.out_dir.display())))
}

fn write_text(path: &PathBuf, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn write_echo(cfg: &ExperimentConfig) -> CliResult<()> {
    write_text(&cfg.out_dir.join("config_echo.txt"), &cfg.echo())
}

/// `gen-data`: materialise the built-in glyph dataset.
pub fn cmd_gen_data(cfg: &ExperimentConfig) -> CliResult<String> {
    let manifest = generate_digit_dataset(&cfg.dataset_dir, cfg.dataset_samples, cfg.seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(format!(
        "wrote {} images ({} classes) to {}",
        manifest.len(),
        manifest.n_classes(),
        cfg.dataset_dir.display()
    ))
}

/// `train`: fit one checkpoint per configured regime, all from the
/// same initialisation.
pub fn cmd_train(cfg: &ExperimentConfig) -> CliResult<String> {
    let data = load_dataset(cfg)?;
    ensure_out_dir(cfg)?;
    let images: Vec<ImageTensor> = data.iter().map(|d| d.image.clone()).collect();
    let labels: Vec<usize> = data.iter().map(|d| d.label).collect();
    let n_classes = labels.iter().max().expect("non-empty") + 1;
    let mut dims = vec![images[0].len()];
    dims.extend(&cfg.hidden_dims);
    dims.push(n_classes);

    let mut lines = Vec::new();
    let mut csv = String::from("regime,final_loss,train_accuracy\n");
    for (ridx, regime) in cfg.regimes.iter().enumerate() {
        let mut net = init_network(&dims, cfg.activation, derive_seed(cfg.seed, &[TAG_MODEL]))
            .map_err(CliError::from)?;
        let tc = TrainConfig {
            epochs: cfg.train_epochs,
            batch_size: cfg.train_batch,
            learning_rate: cfg.train_lr,
            seed: derive_seed(cfg.seed, &[TAG_TRAIN, ridx as u64]),
            pgd: match regime {
                Regime::Natural => None,
                Regime::Pgd => Some(PgdTraining {
                    epsilon: cfg.pgd_epsilon,
                    steps: cfg.pgd_steps,
                    step_size: cfg.pgd_step_size,
                }),
            },
        };
        let report = train(&mut net, &images, &labels, &tc).map_err(|e| match e {
            CoreError::Model(m) if m.contains("diverged") => CliError::Numeric(m),
            other => CliError::from(other),
        })?;
        let path = model_path(cfg, *regime);
        save_network(&path, &net).map_err(CliError::from)?;
        csv.push_str(&format!(
            "{},{},{}\n",
            regime.id(),
            fmt_sig17(report.final_loss),
            fmt_sig17(report.train_accuracy)
        ));
        lines.push(format!(
            "{}: train accuracy {:.4}, final loss {:.4} -> {}",
            regime.id(),
            report.train_accuracy,
            report.final_loss,
            path.display()
        ));
    }
    write_text(&cfg.out_dir.join("training.csv"), &csv)?;
    write_echo(cfg)?;
    Ok(lines.join("\n"))
}

/// Row-level failure codes written to the `errors.csv` sidecar.
type RowValue = Result<f64, &'static str>;

struct RecordRow {
    image_id: String,
    attack_idx: usize,
    metric: MetricKind,
    k: usize,
    w: usize,
    eps_idx: usize,
    value: RowValue,
}

struct SummaryRow {
    image_id: String,
    attack_idx: usize,
    eps_idx: usize,
    delta_linf: f64,
    preserved: bool,
    chosen_iteration: i64,
}

/// One line of `aggregates.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub regime: Regime,
    pub attack: AttackKind,
    pub metric: MetricKind,
    pub k: usize,
    pub w: usize,
    pub epsilon: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

struct RegimeOutput {
    regime: Regime,
    records: Vec<RecordRow>,
    summaries: Vec<SummaryRow>,
}

/// `(k, w)` grid of a metric under this config, in emission order.
fn metric_combos(metric: MetricKind, cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    match metric {
        MetricKind::TopK | MetricKind::TopKDiv => {
            cfg.k_values.iter().map(|&k| (k, 0)).collect()
        }
        MetricKind::LensPrec
        | MetricKind::LensRecall
        | MetricKind::LensPrecDiv
        | MetricKind::LensRecallDiv => {
            let mut v = Vec::with_capacity(cfg.k_values.len() * cfg.w_values.len());
            for &k in &cfg.k_values {
                for &w in &cfg.w_values {
                    v.push((k, w));
                }
            }
            v
        }
        // Correlations have no top-k parameter; k = 0 marks that.
        MetricKind::Spearman | MetricKind::Kendall => vec![(0, 0)],
        MetricKind::LensSpearman | MetricKind::LensKendall => {
            cfg.w_values.iter().map(|&w| (0, w)).collect()
        }
    }
}

/// Computes one metric value; row-level failures (degenerate inputs)
/// come back as codes, anything unexpected is fatal.
fn metric_value(
    metric: MetricKind,
    a: &AttributionMap,
    b: &AttributionMap,
    k: usize,
    w: usize,
    w_div: usize,
) -> CliResult<RowValue> {
    let r = match metric {
        MetricKind::TopK => topk_intersection(a, b, k),
        MetricKind::LensPrec => lens_prec_at_k(a, b, k, w),
        MetricKind::LensRecall => lens_recall_at_k(a, b, k, w),
        MetricKind::TopKDiv => topk_div_intersection(a, b, k, w_div),
        MetricKind::LensPrecDiv => lens_prec_at_k_div(a, b, k, w, w_div),
        MetricKind::LensRecallDiv => lens_recall_at_k_div(a, b, k, w, w_div),
        MetricKind::Spearman => spearman_rho(a, b),
        MetricKind::Kendall => kendall_tau(a, b),
        MetricKind::LensSpearman => lens_spearman(a, b, w),
        MetricKind::LensKendall => lens_kendall(a, b, w),
    };
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(CoreError::DiversityShortfall { .. }) => Ok(Err("diversity_shortfall")),
        Err(CoreError::UndefinedCorrelation(_)) => Ok(Err("undefined_correlation")),
        Err(e) => Err(CliError::from(e)),
    }
}

/// Runs one non-universal attack; degenerate per-image failures (for
/// example a vanishing saliency map) become row codes.
fn run_single_attack(
    kind: AttackKind,
    net: &ToyNetwork,
    img: &ImageTensor,
    cfg: &ExperimentConfig,
    acfg: &AttackConfig,
) -> CliResult<Result<AttackResult, &'static str>> {
    let r = match kind {
        AttackKind::RandomSign => random_sign(net, img, acfg),
        AttackKind::TopK => topk_attack(net, img, cfg.attack_t, acfg),
        AttackKind::MassCenter => mass_center_attack(net, img, acfg),
        AttackKind::LensObjective => {
            lens_objective_attack(net, img, cfg.attack_t, cfg.attack_w, acfg)
        }
        AttackKind::UniversalRandom => unreachable!("universal attack handled by caller"),
    };
    match r {
        Ok(res) => Ok(Ok(res)),
        Err(CoreError::Attack(_)) => Ok(Err("attack_failed")),
        Err(e) => Err(CliError::from(e)),
    }
}

fn attribution_of(
    net: &ToyNetwork,
    img: &ImageTensor,
    class: usize,
    cfg: &ExperimentConfig,
) -> CliResult<AttributionMap> {
    let a = compute_attribution(net, img, class, cfg.attribution).map_err(CliError::from)?;
    Ok(if cfg.rank_abs { a.abs() } else { a })
}

/// The attack x epsilon x metric grid over every configured regime.
fn run_grid(
    cfg: &ExperimentConfig,
    metrics: &[MetricKind],
) -> CliResult<(Vec<RegimeOutput>, Vec<AggregateRow>)> {
    let all = load_dataset(cfg)?;
    let sampled = sample_images(&all, cfg);
    let pixels = sampled[0].image.len();
    let max_k = cfg.k_values.iter().max().copied().unwrap_or(1);
    if metrics.iter().any(|m| !matches!(m, MetricKind::Spearman | MetricKind::Kendall))
        && max_k > pixels
    {
        return Err(CliError::Config(format!(
            "k_values go up to {max_k} but images have only {pixels} pixels"
        )));
    }
    if cfg.attack_t > pixels {
        return Err(CliError::Config(format!(
            "attack_t = {} exceeds the {pixels}-pixel grid",
            cfg.attack_t
        )));
    }

    // Aggregation cell: (regime, attack, metric order, k, w, epsilon) indices.
    type CellKey = (usize, usize, usize, usize, usize, usize);
    let mut outputs = Vec::new();
    let mut agg_values: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();

    for (ridx, &regime) in cfg.regimes.iter().enumerate() {
        let path = model_path(cfg, regime);
        let net = load_network(&path).map_err(|e| {
            CliError::Data(format!("{e} (run `lens train` first to create checkpoints)"))
        })?;
        if net.input_dim() != pixels {
            return Err(CliError::Data(format!(
                "checkpoint {} expects {} inputs, images have {pixels} pixels",
                path.display(),
                net.input_dim()
            )));
        }

        // Original prediction and attribution, once per image.
        let mut originals = Vec::with_capacity(sampled.len());
        for li in &sampled {
            let pred = net.predict(li.image.values()).map_err(CliError::from)?;
            let a = attribution_of(&net, &li.image, pred, cfg)?;
            originals.push((pred, a));
        }

        let mut records = Vec::new();
        let mut summaries = Vec::new();

        for (aidx, &attack) in cfg.attacks.iter().enumerate() {
            for (eidx, &eps) in cfg.epsilon_values.iter().enumerate() {
                let results: Vec<Result<AttackResult, &'static str>> =
                    if attack == AttackKind::UniversalRandom {
                        let acfg = AttackConfig {
                            epsilon: eps,
                            step_size: cfg.attack_step_size,
                            steps: cfg.attack_steps,
                            restarts: cfg.attack_restarts,
                            seed: derive_seed(
                                cfg.seed,
                                &[TAG_ATTACK, ridx as u64, aidx as u64, eidx as u64],
                            ),
                        };
                        let imgs: Vec<ImageTensor> =
                            sampled.iter().map(|li| li.image.clone()).collect();
                        universal_random(&net, &imgs, &acfg)
                            .map_err(CliError::from)?
                            .into_iter()
                            .map(Ok)
                            .collect()
                    } else {
                        let mut v = Vec::with_capacity(sampled.len());
                        for li in &sampled {
                            let acfg = AttackConfig {
                                epsilon: eps,
                                step_size: cfg.attack_step_size,
                                steps: cfg.attack_steps,
                                restarts: cfg.attack_restarts,
                                seed: derive_seed(
                                    cfg.seed,
                                    &[TAG_ATTACK, ridx as u64, aidx as u64, eidx as u64, li.index],
                                ),
                            };
                            v.push(run_single_attack(attack, &net, &li.image, cfg, &acfg)?);
                        }
                        v
                    };

                for ((li, (pred0, a_orig)), outcome) in
                    sampled.iter().zip(&originals).zip(results)
                {
                    let row_code: Option<&'static str>;
                    let mut a_pert: Option<AttributionMap> = None;
                    match &outcome {
                        Err(code) => {
                            row_code = Some(code);
                            summaries.push(SummaryRow {
                                image_id: li.id.clone(),
                                attack_idx: aidx,
                                eps_idx: eidx,
                                delta_linf: 0.0,
                                preserved: false,
                                chosen_iteration: -1,
                            });
                        }
                        Ok(res) => {
                            summaries.push(SummaryRow {
                                image_id: li.id.clone(),
                                attack_idx: aidx,
                                eps_idx: eidx,
                                delta_linf: res.delta_linf(&li.image),
                                preserved: res.prediction_preserved,
                                chosen_iteration: res
                                    .chosen_iteration
                                    .map_or(-1, |i| i as i64),
                            });
                            if res.prediction_preserved {
                                row_code = None;
                                a_pert =
                                    Some(attribution_of(&net, &res.perturbed, *pred0, cfg)?);
                            } else {
                                row_code = Some("prediction_flipped");
                            }
                        }
                    }

                    for &metric in metrics {
                        for (k, w) in metric_combos(metric, cfg) {
                            let value: RowValue = match (&row_code, &a_pert) {
                                (Some(code), _) => Err(code),
                                (None, Some(b)) => {
                                    metric_value(metric, a_orig, b, k, w, cfg.w_div)?
                                }
                                (None, None) => unreachable!("preserved result has a map"),
                            };
                            if let Ok(v) = value {
                                agg_values
                                    .entry((
                                        ridx,
                                        aidx,
                                        metric.order_index(),
                                        k,
                                        w,
                                        eidx,
                                    ))
                                    .or_default()
                                    .push(v);
                            }
                            records.push(RecordRow {
                                image_id: li.id.clone(),
                                attack_idx: aidx,
                                metric,
                                k,
                                w,
                                eps_idx: eidx,
                                value,
                            });
                        }
                    }
                }
            }
        }

        records.sort_by(|a, b| {
            (&a.image_id, a.attack_idx, a.metric.order_index(), a.k, a.w, a.eps_idx).cmp(&(
                &b.image_id,
                b.attack_idx,
                b.metric.order_index(),
                b.k,
                b.w,
                b.eps_idx,
            ))
        });
        summaries.sort_by(|a, b| {
            (&a.image_id, a.attack_idx, a.eps_idx).cmp(&(&b.image_id, b.attack_idx, b.eps_idx))
        });
        outputs.push(RegimeOutput { regime, records, summaries });
    }

    let mut aggregates = Vec::with_capacity(agg_values.len());
    for ((ridx, aidx, midx, k, w, eidx), values) in agg_values {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        aggregates.push(AggregateRow {
            regime: cfg.regimes[ridx],
            attack: cfg.attacks[aidx],
            metric: MetricKind::REPORT_ORDER[midx],
            k,
            w,
            epsilon: cfg.epsilon_values[eidx],
            mean,
            std: var.sqrt(),
            n,
        });
    }
    Ok((outputs, aggregates))
}

pub const RECORDS_HEADER: &str = "image_id,attack_id,metric,k,w,epsilon,value";
pub const SUMMARY_HEADER: &str =
    "image_id,attack_id,epsilon,delta_linf,prediction_preserved,chosen_iteration";
pub const ERRORS_HEADER: &str = "image_id,attack_id,metric,k,w,epsilon,code";
pub const AGGREGATES_HEADER: &str = "regime,attack_id,metric,k,w,epsilon,mean,std,n";

fn render_records(rows: &[RecordRow], cfg: &ExperimentConfig) -> String {
    let mut s = String::from(RECORDS_HEADER);
    s.push('\n');
    for r in rows {
        let value = match &r.value {
            Ok(v) => fmt_sig17(*v),
            Err(_) => "NA".to_string(),
        };
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.image_id,
            cfg.attacks[r.attack_idx].id(),
            r.metric.id(),
            r.k,
            r.w,
            fmt_sig17(cfg.epsilon_values[r.eps_idx]),
            value
        ));
    }
    s
}

fn render_errors(rows: &[RecordRow], cfg: &ExperimentConfig) -> String {
    let mut s = String::from(ERRORS_HEADER);
    s.push('\n');
    for r in rows {
        if let Err(code) = &r.value {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.image_id,
                cfg.attacks[r.attack_idx].id(),
                r.metric.id(),
                r.k,
                r.w,
                fmt_sig17(cfg.epsilon_values[r.eps_idx]),
                code
            ));
        }
    }
    s
}

fn render_summaries(rows: &[SummaryRow], cfg: &ExperimentConfig) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.image_id,
            cfg.attacks[r.attack_idx].id(),
            fmt_sig17(cfg.epsilon_values[r.eps_idx]),
            fmt_sig17(r.delta_linf),
            r.preserved,
            r.chosen_iteration
        ));
    }
    s
}

fn render_aggregates(rows: &[AggregateRow]) -> String {
    let mut s = String::from(AGGREGATES_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.regime.id(),
            r.attack.id(),
            r.metric.id(),
            r.k,
            r.w,
            fmt_sig17(r.epsilon),
            fmt_sig17(r.mean),
            fmt_sig17(r.std),
            r.n
        ));
    }
    s
}

/// `evaluate`: the full grid, with per-image records, attack
/// summaries, error sidecars and aggregates.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> CliResult<String> {
    let (outputs, aggregates) = run_grid(cfg, &cfg.metrics)?;
    ensure_out_dir(cfg)?;
    let mut lines = Vec::new();
    for out in &outputs {
        let rid = out.regime.id();
        write_text(
            &cfg.out_dir.join(format!("records_{rid}.csv")),
            &render_records(&out.records, cfg),
        )?;
        write_text(
            &cfg.out_dir.join(format!("attacks_{rid}.csv")),
            &render_summaries(&out.summaries, cfg),
        )?;
        write_text(
            &cfg.out_dir.join(format!("errors_{rid}.csv")),
            &render_errors(&out.records, cfg),
        )?;
        let failed = out.records.iter().filter(|r| r.value.is_err()).count();
        lines.push(format!(
            "{rid}: {} metric records ({} flagged) over {} attack runs",
            out.records.len(),
            failed,
            out.summaries.len()
        ));
    }
    write_text(&cfg.out_dir.join("aggregates.csv"), &render_aggregates(&aggregates))?;
    write_echo(cfg)?;
    Ok(lines.join("\n"))
}

const SWEEP_W_METRICS: [MetricKind; 4] = [
    MetricKind::LensRecall,
    MetricKind::LensPrec,
    MetricKind::LensSpearman,
    MetricKind::LensKendall,
];

const SWEEP_K_METRICS: [MetricKind; 6] = [
    MetricKind::TopK,
    MetricKind::LensRecall,
    MetricKind::LensPrec,
    MetricKind::TopKDiv,
    MetricKind::LensRecallDiv,
    MetricKind::LensPrecDiv,
];

/// `sweep-w`: window-tolerant metrics across the configured `w_values`
/// grid, aggregates only.
pub fn cmd_sweep_w(cfg: &ExperimentConfig) -> CliResult<String> {
    let (_, aggregates) = run_grid(cfg, &SWEEP_W_METRICS)?;
    ensure_out_dir(cfg)?;
    write_text(&cfg.out_dir.join("sweep_w.csv"), &render_aggregates(&aggregates))?;
    write_echo(cfg)?;
    Ok(format!("{} aggregate rows over w = {:?}", aggregates.len(), cfg.w_values))
}

/// `sweep-k`: set-based metrics across the configured `k_values` grid,
/// aggregates only.
pub fn cmd_sweep_k(cfg: &ExperimentConfig) -> CliResult<String> {
    let (_, aggregates) = run_grid(cfg, &SWEEP_K_METRICS)?;
    ensure_out_dir(cfg)?;
    write_text(&cfg.out_dir.join("sweep_k.csv"), &render_aggregates(&aggregates))?;
    write_echo(cfg)?;
    Ok(format!("{} aggregate rows over k = {:?}", aggregates.len(), cfg.k_values))
}
