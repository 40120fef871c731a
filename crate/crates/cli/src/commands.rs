//! Command implementations shared by the binary and the integration tests.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use placerec_core::eval::{default_thresholds, modality_report, pr_curve, ModalityShare, PrCurve};
use placerec_core::features::{
    extract_all, extract_with_stats, DescriptorConfig, ExternalFeatures, FramePair,
};
use placerec_core::geo::{build_ground_truth, GpsTrack, GroundTruth};
use placerec_core::matching::{extract_weights, match_all};
use placerec_core::model::ScenarioLabels;
use placerec_core::solver::solve;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::{load_external, load_run, IngestSummary};
use crate::manifest::DatasetManifest;
use crate::model_file::ModelFile;
use crate::plots;
use crate::synth::{generate, SynthOptions};

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn load_externals(paths: &[PathBuf]) -> Result<Vec<ExternalFeatures>> {
    paths.iter().map(|p| load_external(p)).collect()
}

pub fn cmd_synth(opts: &SynthOptions, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    generate(opts, out_dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub summary: IngestSummary,
    pub width: usize,
    pub height: usize,
    pub gps_samples: usize,
}

/// Full ingestion pass over one run: decode, pair, downsample, GPS-check.
pub fn cmd_ingest(
    manifest_path: &Path,
    frame_range: Option<Range<usize>>,
    config: &RunConfig,
) -> Result<IngestReport> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let (pairs, track, summary) = load_run(
        &manifest,
        frame_range,
        (config.downsample_width, config.downsample_height),
    )?;
    let first = &pairs[0].intensity;
    Ok(IngestReport {
        summary,
        width: first.width,
        height: first.height,
        gps_samples: track.samples().len(),
    })
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model_path: PathBuf,
    pub model: ModelFile,
}

/// Trains on one run per scenario and persists the model plus its
/// objective trace and modality report.
pub fn cmd_train(
    manifest_paths: &[PathBuf],
    external_paths: &[PathBuf],
    frame_range: Option<Range<usize>>,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<TrainOutcome> {
    if manifest_paths.len() < 2 {
        return Err(CliError::Validation(
            "training needs at least two scenario runs (one manifest each)".into(),
        ));
    }
    ensure_dir(out_dir)?;
    let externals = load_externals(external_paths)?;

    let mut descriptor = DescriptorConfig::default();
    for e in &externals {
        if !descriptor.external.iter().any(|s| s.name == e.name) {
            descriptor.external.push(placerec_core::features::ExternalSpec {
                name: e.name.clone(),
                dim: e.dim,
            });
        }
    }

    let mut all_pairs: Vec<FramePair> = Vec::new();
    let mut assignments: Vec<usize> = Vec::new();
    let mut scenario_names: Vec<String> = Vec::new();
    for path in manifest_paths {
        let manifest = DatasetManifest::load(path)?;
        let label = manifest.scenario_label();
        let scenario = match scenario_names.iter().position(|n| n == &label) {
            Some(i) => i,
            None => {
                scenario_names.push(label);
                scenario_names.len() - 1
            }
        };
        let (pairs, _, _) = load_run(
            &manifest,
            frame_range.clone(),
            (config.downsample_width, config.downsample_height),
        )?;
        assignments.extend(std::iter::repeat(scenario).take(pairs.len()));
        all_pairs.extend(pairs);
    }
    if scenario_names.len() < 2 {
        return Err(CliError::Validation(
            "training needs at least two distinct scenarios; all manifests share one label".into(),
        ));
    }

    let (a, stats) = extract_all(&all_pairs, &descriptor, &externals)?;
    let b = ScenarioLabels::from_assignments(&assignments, scenario_names.clone())?;
    let result = solve(&a, &b, &config.hyperparams(), &config.solver_config())?;

    let model = ModelFile {
        config: config.clone(),
        descriptor,
        scenario_names,
        stats,
        weights: result.w,
        iterations: result.iterations,
        converged: result.converged,
        final_objective: *result.objective_trace.last().unwrap_or(&f64::NAN),
    };
    let model_path = out_dir.join("model.txt");
    model.save(&model_path)?;

    let mut trace = String::from("iteration,objective\n");
    for (i, f) in result.objective_trace.iter().enumerate() {
        let _ = writeln!(trace, "{i},{f}");
    }
    plots::write_text(&out_dir.join("trace.csv"), &trace)?;

    let report = modality_report(&extract_weights(&model.weights)?)?;
    plots::write_text(&out_dir.join("modality_report.csv"), &plots::modality_csv(&report))?;
    plots::write_text(&out_dir.join("modality_report.svg"), &plots::modality_svg(&report))?;

    Ok(TrainOutcome { model_path, model })
}

#[derive(Debug)]
pub struct MatchOutcome {
    pub weighted: PrCurve,
    pub baseline: PrCurve,
    pub top1_recall: f64,
    pub report: Vec<ModalityShare>,
}

fn ingest_features(
    manifest_path: &Path,
    model: &ModelFile,
    externals: &[ExternalFeatures],
    frame_range: Option<Range<usize>>,
) -> Result<(placerec_core::FeatureMatrix, Vec<f64>, GpsTrack)> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let (pairs, track, _) = load_run(
        &manifest,
        frame_range,
        (model.config.downsample_width, model.config.downsample_height),
    )?;
    let times: Vec<f64> = pairs.iter().map(|p| p.timestamp()).collect();
    let features = extract_with_stats(&pairs, &model.descriptor, externals, &model.stats)?;
    if &features.layout != model.layout() {
        return Err(CliError::Validation(format!(
            "{}: frame geometry yields a different feature layout than the model was trained on",
            manifest_path.display()
        )));
    }
    Ok((features, times, track))
}

fn matrix_csv<T: std::fmt::Display>(
    header: &str,
    query_ids: &[String],
    template_ids: &[String],
    rows: &[Vec<T>],
) -> String {
    let mut out = String::new();
    if !header.is_empty() {
        out.push_str(header);
        out.push('\n');
    }
    out.push_str("query_id");
    for id in template_ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (id, row) in query_ids.iter().zip(rows) {
        out.push_str(id);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Scores queries against templates with a trained model, evaluates both
/// the weighted and the equal-weight baseline PR curves against GPS ground
/// truth, and writes all artifacts under `out_dir`.
pub fn cmd_match(
    model_path: &Path,
    templates_path: &Path,
    queries_path: &Path,
    external_paths: &[PathBuf],
    frame_range: Option<Range<usize>>,
    threshold: f64,
    radius_m: f64,
    out_dir: &Path,
) -> Result<MatchOutcome> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Validation(format!("threshold {threshold} must be in [0, 1]")));
    }
    ensure_dir(out_dir)?;
    let model = ModelFile::load(model_path)?;
    let externals = load_externals(external_paths)?;
    let (templates, template_times, template_track) =
        ingest_features(templates_path, &model, &externals, frame_range.clone())?;
    let (queries, query_times, query_track) =
        ingest_features(queries_path, &model, &externals, frame_range)?;

    let gt = build_ground_truth(&query_times, &template_times, &query_track, &template_track, radius_m)?;
    let weights = extract_weights(&model.weights)?;
    let match_report = match_all(&queries, &templates, &weights, threshold, Some(&gt))?;

    let thresholds = default_thresholds();
    let weighted = pr_curve(&match_report.scores, &gt, &thresholds)?;
    let baseline = pr_curve(&match_report.baseline_scores, &gt, &thresholds)?;
    let top1_recall = match_report.top1_recall().unwrap_or(0.0);
    let report = modality_report(&weights)?;

    write_match_artifacts(
        out_dir,
        &model,
        &match_report,
        &gt,
        &weighted,
        &baseline,
        top1_recall,
        &report,
        &queries.image_ids,
        &templates.image_ids,
    )?;
    Ok(MatchOutcome { weighted, baseline, top1_recall, report })
}

#[allow(clippy::too_many_arguments)]
fn write_match_artifacts(
    out_dir: &Path,
    model: &ModelFile,
    match_report: &placerec_core::matching::MatchReport,
    gt: &GroundTruth,
    weighted: &PrCurve,
    baseline: &PrCurve,
    top1_recall: f64,
    report: &[ModalityShare],
    query_ids: &[String],
    template_ids: &[String],
) -> Result<()> {
    plots::write_text(
        &out_dir.join("scores.csv"),
        &matrix_csv("", query_ids, template_ids, &match_report.scores),
    )?;
    plots::write_text(
        &out_dir.join("baseline_scores.csv"),
        &matrix_csv("", query_ids, template_ids, &match_report.baseline_scores),
    )?;
    let gt_rows: Vec<Vec<u8>> = gt
        .same_place
        .iter()
        .map(|r| r.iter().map(|&b| u8::from(b)).collect())
        .collect();
    plots::write_text(
        &out_dir.join("gt.csv"),
        &matrix_csv(&format!("# radius_m {}", gt.radius_m), query_ids, template_ids, &gt_rows),
    )?;
    plots::write_text(&out_dir.join("curve.csv"), &plots::curve_csv(weighted))?;
    plots::write_text(&out_dir.join("baseline_curve.csv"), &plots::curve_csv(baseline))?;
    plots::write_text(
        &out_dir.join("curve.svg"),
        &plots::curve_svg(&[("weighted", weighted), ("baseline", baseline)]),
    )?;
    plots::write_text(&out_dir.join("modality_report.csv"), &plots::modality_csv(report))?;
    plots::write_text(&out_dir.join("modality_report.svg"), &plots::modality_svg(report))?;

    let mut matches = String::from("query_id,template_id,score,accepted,same_place\n");
    for q in &match_report.queries {
        if let Some(top) = q.ranked.first() {
            let _ = writeln!(
                matches,
                "{},{},{},{},{}",
                q.query_id,
                top.template_id,
                top.score,
                u8::from(top.accepted),
                top.same_place.map_or(-1i8, i8::from)
            );
        }
    }
    plots::write_text(&out_dir.join("matches.csv"), &matches)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "weighted_auc {}", weighted.auc);
    let _ = writeln!(summary, "baseline_auc {}", baseline.auc);
    let _ = writeln!(summary, "top1_recall {}", top1_recall);
    let _ = writeln!(summary, "threshold {}", match_report.threshold);
    let _ = writeln!(summary, "radius_m {}", gt.radius_m);
    let _ = writeln!(summary, "queries {}", query_ids.len());
    let _ = writeln!(summary, "templates {}", template_ids.len());
    summary.push_str("config\n");
    summary.push_str(&model.config.to_text());
    summary.push_str("end_config\n");
    plots::write_text(&out_dir.join("summary.txt"), &summary)
}

fn parse_matrix_csv(path: &Path) -> Result<(Option<f64>, Vec<String>, Vec<Vec<f64>>)> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut radius = None;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# radius_m ") {
            radius = rest.trim().parse().ok();
            continue;
        }
        if line.starts_with("query_id") {
            continue;
        }
        let mut fields = line.split(',');
        ids.push(fields.next().unwrap_or_default().to_string());
        let row: Vec<f64> = fields
            .map(|v| {
                v.trim().parse().map_err(|_| {
                    CliError::Validation(format!("{}: bad value '{v}'", path.display()))
                })
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    Ok((radius, ids, rows))
}

/// Re-evaluates PR curves from persisted score and ground-truth matrices.
pub fn cmd_eval(scores_path: &Path, gt_path: &Path, out_dir: &Path) -> Result<PrCurve> {
    ensure_dir(out_dir)?;
    let (_, _, scores) = parse_matrix_csv(scores_path)?;
    let (radius, _, gt_rows) = parse_matrix_csv(gt_path)?;
    let gt = GroundTruth {
        same_place: gt_rows
            .iter()
            .map(|r| r.iter().map(|&v| v != 0.0).collect())
            .collect(),
        radius_m: radius.unwrap_or(50.0),
    };
    let curve = pr_curve(&scores, &gt, &default_thresholds())?;
    plots::write_text(&out_dir.join("curve.csv"), &plots::curve_csv(&curve))?;
    plots::write_text(&out_dir.join("curve.svg"), &plots::curve_svg(&[("scores", &curve)]))?;
    Ok(curve)
}

/// Prints (and optionally writes) the modality-importance report of a
/// trained model.
pub fn cmd_report(model_path: &Path, out_dir: Option<&Path>) -> Result<Vec<ModalityShare>> {
    let model = ModelFile::load(model_path)?;
    let report = modality_report(&extract_weights(&model.weights)?)?;
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        plots::write_text(&dir.join("modality_report.csv"), &plots::modality_csv(&report))?;
        plots::write_text(&dir.join("modality_report.svg"), &plots::modality_svg(&report))?;
    }
    Ok(report)
}
