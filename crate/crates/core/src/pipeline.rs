//! Manifest-driven batch operations behind the command-line subcommands.
//!
//! Frames are processed in parallel on the current rayon pool and collected
//! in manifest order. A frame whose inputs are missing or inconsistent is
//! recorded as skipped; everything else in the run still completes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{bin_and_correlate, collect_pairs, Pair};
use crate::constants::{
    ASSIGN_THRESHOLD, BAND_WIDTH, CORRELATION_BINS, COVERAGE_THRESHOLD, DICE_SMOOTH, FRAGMENT_MIN_FILL,
    PROB_THRESHOLD, WINDOW,
};
use crate::constants::ConstantsEcho;
use crate::curation::{filter_fragments, group_to_instances, remove_redundant, InstanceBox, MaskEntry, MaskSet};
use crate::error::{Error, Result};
use crate::evalmap::{
    evaluate as run_evaluator, nonref_metrics, normalized_discrepancy, pseudo_gt_map, Branch,
    DiscrepancyConfig, EvaluatorInput, OracleEvaluator,
};
use crate::fusion::{fuse_frame, BlurConfig};
use crate::image::{binarize_prob, ensure_same_dims, AlphaMatte, Dims, EvalMap, ProbMap, SegMask};
use crate::io::boxes::load_boxes;
use crate::io::raster::{load_alpha, load_binary, load_prob, load_rgb, save_alpha, save_binary, save_plane_pfm, save_prob, save_rgb};
use crate::io::{FrameEntry, FrameRecord, LoadedManifest, PrecomputedEvaluator, RunReport, SkippedFrame};
use crate::losses::{eval_guidance_loss, matting_total_loss, mqe_total_loss, FocalConfig, LossFrame, MattingLossConfig};
use crate::metrics::{frame_report, mad, sequence_report};
use crate::sampler::{dropout_augment, plan_window, reference_boundary, DropoutSpec};

/// Where error probability maps come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluatorKind {
    /// Manifest probability paths, then the precomputed directory, then the
    /// ground-truth oracle.
    #[default]
    Auto,
    Oracle,
    Precomputed,
}

impl std::str::FromStr for EvaluatorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(EvaluatorKind::Auto),
            "oracle" => Ok(EvaluatorKind::Oracle),
            "precomputed" => Ok(EvaluatorKind::Precomputed),
            other => Err(format!("unknown evaluator `{other}` (auto, oracle, precomputed)")),
        }
    }
}

/// Effective parameters of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub discrepancy: DiscrepancyConfig,
    pub threshold: f64,
    pub blur: BlurConfig,
    pub band_width: usize,
    pub focal: FocalConfig,
    pub dice_smooth: f64,
    pub loss: MattingLossConfig,
    pub window: usize,
    pub n_refs: usize,
    pub dropout: DropoutSpec,
    pub seed: u64,
    pub coverage: f64,
    pub assign_threshold: f64,
    pub fragment_min_fill: f64,
    pub bins: usize,
    pub evaluator: EvaluatorKind,
    pub prob_dir: Option<PathBuf>,
    pub boxes: Option<PathBuf>,
}

pub const DEFAULT_N_REFS: usize = 2;

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            discrepancy: DiscrepancyConfig::default(),
            threshold: PROB_THRESHOLD,
            blur: BlurConfig::default(),
            band_width: BAND_WIDTH,
            focal: FocalConfig::default(),
            dice_smooth: DICE_SMOOTH,
            loss: MattingLossConfig::default(),
            window: WINDOW,
            n_refs: DEFAULT_N_REFS,
            dropout: DropoutSpec::with_seed(0),
            seed: 0,
            coverage: COVERAGE_THRESHOLD,
            assign_threshold: ASSIGN_THRESHOLD,
            fragment_min_fill: FRAGMENT_MIN_FILL,
            bins: CORRELATION_BINS,
            evaluator: EvaluatorKind::Auto,
            prob_dir: None,
            boxes: None,
        }
    }
}

impl PipelineConfig {
    /// Config block written into every report.
    pub fn echo(&self) -> Value {
        json!({
            "defaults": ConstantsEcho::default(),
            "effective": self,
        })
    }
}

pub struct Run<'a> {
    pub manifest: &'a LoadedManifest,
    pub config: &'a PipelineConfig,
    pub out_dir: &'a Path,
}

fn missing(frame: &FrameRecord, what: &str) -> Error {
    Error::MissingInput {
        frame: frame.frame_id.clone(),
        what: what.to_string(),
    }
}

fn required<'f>(frame: &FrameRecord, path: &'f Option<PathBuf>, what: &str) -> Result<&'f Path> {
    path.as_deref().ok_or_else(|| missing(frame, what))
}

fn prediction(frame: &FrameRecord) -> Result<AlphaMatte> {
    load_alpha(frame.prediction().ok_or_else(|| missing(frame, "pred_path or alpha_v_path"))?)
}

/// Error text with its causes, `outer: inner`.
fn describe(e: &Error) -> String {
    let mut text = e.to_string();
    let mut cause = std::error::Error::source(e);
    while let Some(c) = cause {
        text.push_str(": ");
        text.push_str(&c.to_string());
        cause = c.source();
    }
    text
}

fn file_name(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

impl Run<'_> {
    fn frames(&self) -> &[FrameRecord] {
        &self.manifest.manifest.frames
    }

    fn out(&self, frame_id: &str, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{frame_id}.{suffix}"))
    }

    fn report(&self, command: &str) -> RunReport {
        let mut r = RunReport::new(command, self.config.echo());
        r.warnings.extend(self.manifest.warnings.iter().cloned());
        r
    }

    fn prepare_out(&self) -> Result<()> {
        fs::create_dir_all(self.out_dir).map_err(|e| Error::io(self.out_dir, e))
    }

    /// Runs `f` on every frame in parallel and returns results in manifest
    /// order; failures become skipped entries.
    fn per_frame<T: Send>(
        &self,
        report: &mut RunReport,
        f: impl Fn(usize, &FrameRecord) -> Result<T> + Sync + Send,
    ) -> Vec<(usize, T)> {
        let results: Vec<Result<T>> = self
            .frames()
            .par_iter()
            .enumerate()
            .map(|(i, frame)| f(i, frame))
            .collect();
        let mut kept = Vec::new();
        for (i, res) in results.into_iter().enumerate() {
            match res {
                Ok(v) => kept.push((i, v)),
                Err(e) => {
                    let id = &self.frames()[i].frame_id;
                    let reason = describe(&e);
                    warn!("frame {id} skipped: {reason}");
                    report.skipped.push(SkippedFrame {
                        frame_id: id.clone(),
                        reason,
                    });
                }
            }
        }
        kept
    }

    /// Error probability map of `alpha` for `branch`, plus where it came from.
    fn probability(
        &self,
        frame: &FrameRecord,
        branch: Branch,
        alpha: &AlphaMatte,
        seg: Option<&SegMask>,
        gt: Option<&AlphaMatte>,
    ) -> Result<(ProbMap, &'static str)> {
        let listed = match branch {
            Branch::Video => &frame.prob_v_path,
            Branch::Image => &frame.prob_i_path,
            Branch::Single => &frame.prob_path,
        };
        let input = EvaluatorInput {
            frame_id: &frame.frame_id,
            branch,
            rgb: None,
            alpha,
            seg,
            gt,
        };
        let oracle = || {
            let ev = OracleEvaluator {
                config: self.config.discrepancy,
            };
            run_evaluator(&ev, &input).map(|p| (p, "oracle"))
        };
        let external = || -> Option<Result<(ProbMap, &'static str)>> {
            if let Some(path) = listed {
                return Some(load_prob(path).and_then(|p| {
                    ensure_same_dims(alpha, &p)?;
                    Ok((p, "manifest"))
                }));
            }
            let dir = self.config.prob_dir.as_ref()?;
            let ev = PrecomputedEvaluator::new(dir);
            Some(run_evaluator(&ev, &input).map(|p| (p, "precomputed")))
        };
        match self.config.evaluator {
            EvaluatorKind::Oracle => oracle(),
            EvaluatorKind::Precomputed => external().unwrap_or_else(|| {
                Err(missing(frame, &format!("{} probability map (no manifest path or --prob-dir)", branch.tag())))
            }),
            EvaluatorKind::Auto => external().unwrap_or_else(oracle),
        }
    }
}

pub fn evaluate(run: &Run<'_>) -> Result<RunReport> {
    let mut report = run.report("evaluate");
    let rows = run.per_frame(&mut report, |_, frame| {
        let pred = prediction(frame)?;
        let gt = load_alpha(required(frame, &frame.gt_path, "gt_path")?)?;
        let m = frame_report(&pred, &gt)?;
        let entry = FrameEntry::new(&frame.frame_id)
            .metric("mad", m.mad)
            .metric("mse", m.mse)
            .metric("grad", m.grad)
            .metric("conn", m.conn);
        Ok((entry, pred, gt))
    });
    let (mut preds, mut gts) = (Vec::new(), Vec::new());
    for (_, (entry, pred, gt)) in rows {
        report.frames.push(entry);
        preds.push(pred);
        gts.push(gt);
    }
    if !preds.is_empty() {
        if report.is_partial() {
            report
                .warnings
                .push("dtSSD omitted: skipped frames break the sequence".into());
        } else if preds.len() >= 2 {
            let seq = sequence_report(&preds, &gts)?;
            report.sequence.insert("dtssd".into(), json!(seq.dtssd));
        } else {
            report.warnings.push("dtSSD needs at least two frames".into());
        }
    }
    report.recompute_aggregates();
    Ok(report)
}

pub fn pseudo_gt(run: &Run<'_>) -> Result<RunReport> {
    run.prepare_out()?;
    let cfg = &run.config.discrepancy;
    let mut report = run.report("pseudo-gt");
    let rows = run.per_frame(&mut report, |_, frame| {
        let pred = prediction(frame)?;
        let gt = load_alpha(required(frame, &frame.gt_path, "gt_path")?)?;
        let grid = normalized_discrepancy(&pred, &gt, cfg)?;
        let eval = pseudo_gt_map(&pred, &gt, cfg)?;
        let prob = ProbMap::new(grid.broadcast(grid.scores.as_deref().unwrap_or_default()))?;
        let eval_path = run.out(&frame.frame_id, "eval.png");
        let prob_path = run.out(&frame.frame_id, "prob.pfm");
        save_binary(&eval_path, &eval)?;
        save_prob(&prob_path, &prob)?;
        let scores = grid.scores.clone().unwrap_or_default();
        let unreliable = scores.iter().filter(|&&s| s >= cfg.delta).count();
        let mut entry = FrameEntry::new(&frame.frame_id)
            .metric("reliable_fraction", eval.count_ones() as f64 / eval.pixel_count() as f64)
            .metric("unreliable_cells", unreliable as f64);
        entry.details = json!({
            "cell_scores": scores,
            "eval": file_name(&eval_path),
            "prob": file_name(&prob_path),
        });
        Ok(entry)
    });
    report.frames.extend(rows.into_iter().map(|(_, e)| e));
    report.recompute_aggregates();
    Ok(report)
}

/// Dual-branch fusion of every frame.
pub fn fuse(run: &Run<'_>) -> Result<RunReport> {
    run.prepare_out()?;
    let cfg = run.config;
    let mut report = run.report("fuse");
    let rows = run.per_frame(&mut report, |_, frame| {
        let alpha_v = load_alpha(required(frame, &frame.alpha_v_path, "alpha_v_path")?)?;
        let seg = frame.seg_path.as_deref().map(load_binary).transpose()?;
        let (alpha_i, i_source) = match (&frame.alpha_i_path, &seg) {
            (Some(p), _) => (load_alpha(p)?, "alpha_i"),
            (None, Some(s)) => (s.to_alpha(), "seg_mask"),
            (None, None) => return Err(missing(frame, "alpha_i_path or seg_path")),
        };
        ensure_same_dims(&alpha_v, &alpha_i)?;
        let gt = frame.gt_path.as_deref().map(load_alpha).transpose()?;
        let (prob_v, src_v) = run.probability(frame, Branch::Video, &alpha_v, seg.as_ref(), gt.as_ref())?;
        let (prob_i, src_i) = run.probability(frame, Branch::Image, &alpha_i, seg.as_ref(), gt.as_ref())?;
        let eval_v = binarize_prob(&prob_v, cfg.threshold)?;
        let eval_i = binarize_prob(&prob_i, cfg.threshold)?;
        let fused = fuse_frame(&alpha_v, &alpha_i, &eval_v, &eval_i, cfg.blur)?;

        let alpha_path = run.out(&frame.frame_id, "alpha.pfm");
        let eval_path = run.out(&frame.frame_id, "eval.png");
        let soft_path = run.out(&frame.frame_id, "soft_mask.pfm");
        save_alpha(&alpha_path, &fused.alpha)?;
        save_binary(&eval_path, &fused.eval)?;
        save_plane_pfm(&soft_path, &fused.soft_mask)?;

        let (nonref_seg, seg_source) = match &seg {
            Some(s) => (s.clone(), "seg_path"),
            None => (
                SegMask::from_fn(fused.alpha.height(), fused.alpha.width(), |r, c| {
                    fused.alpha.plane()[(r, c)] >= 0.5
                }),
                "fused_alpha",
            ),
        };
        let nr = nonref_metrics(&fused.eval, &nonref_seg, cfg.band_width)?;
        let total = fused.stats.total as f64;
        let mut entry = FrameEntry::new(&frame.frame_id)
            .metric("image_dominated_fraction", fused.stats.image_dominated as f64 / total)
            .metric("fusion_region_fraction", fused.stats.fusion_region as f64 / total)
            .metric("err", nr.err)
            .metric("mer", nr.mer)
            .metric("ber", nr.ber);
        if let Some(gt) = &gt {
            entry = entry
                .metric("mad_v", mad(&alpha_v, gt, None)?)
                .metric("mad_i", mad(&alpha_i, gt, None)?)
                .metric("mad_fused", mad(&fused.alpha, gt, None)?);
        }
        entry.details = json!({
            "stats": fused.stats,
            "alpha_i_source": i_source,
            "prob_sources": {"v": src_v, "i": src_i},
            "nonref_seg_source": seg_source,
            "nonref_warnings": nr.warnings,
            "outputs": {
                "alpha": file_name(&alpha_path),
                "eval": file_name(&eval_path),
                "soft_mask": file_name(&soft_path),
            },
        });
        Ok(entry)
    });
    report.frames.extend(rows.into_iter().map(|(_, e)| e));
    report.recompute_aggregates();
    Ok(report)
}

/// Evaluation map of a frame's prediction: the listed map, else the
/// binarized evaluator output.
fn frame_eval(run: &Run<'_>, frame: &FrameRecord, gt: Option<&AlphaMatte>) -> Result<(EvalMap, &'static str)> {
    if let Some(p) = &frame.eval_path {
        return Ok((load_binary(p)?, "manifest"));
    }
    let pred = prediction(frame)?;
    let (prob, src) = run.probability(frame, Branch::Single, &pred, None, gt)?;
    Ok((binarize_prob(&prob, run.config.threshold)?, src))
}

pub fn nonref(run: &Run<'_>) -> Result<RunReport> {
    let mut report = run.report("nonref");
    let rows = run.per_frame(&mut report, |_, frame| {
        let seg: SegMask = load_binary(required(frame, &frame.seg_path, "seg_path")?)?;
        let gt = frame.gt_path.as_deref().map(load_alpha).transpose()?;
        let (eval, src) = frame_eval(run, frame, gt.as_ref())?;
        let nr = nonref_metrics(&eval, &seg, run.config.band_width)?;
        let mut entry = FrameEntry::new(&frame.frame_id)
            .metric("err", nr.err)
            .metric("mer", nr.mer)
            .metric("ber", nr.ber);
        entry.details = json!({"eval_source": src, "warnings": nr.warnings});
        Ok(entry)
    });
    report.frames.extend(rows.into_iter().map(|(_, e)| e));
    report.recompute_aggregates();
    Ok(report)
}

struct LossInputs {
    pred: AlphaMatte,
    gt: AlphaMatte,
    reliable: EvalMap,
    p0: Option<ProbMap>,
}

/// Masked matting objective over the manifest as one window, plus the
/// evaluator objective for frames that carry a probability map.
pub fn loss(run: &Run<'_>) -> Result<RunReport> {
    let cfg = run.config;
    let mut report = run.report("loss");
    let rows = run.per_frame(&mut report, |_, frame| {
        let pred = prediction(frame)?;
        let gt = load_alpha(required(frame, &frame.gt_path, "gt_path")?)?;
        let reliable = match &frame.eval_path {
            Some(p) => load_binary(p)?,
            None => pseudo_gt_map(&pred, &gt, &cfg.discrepancy)?,
        };
        ensure_same_dims(&pred, &reliable)?;
        let p0 = match (&frame.prob_path, &cfg.prob_dir) {
            (Some(p), _) => Some(load_prob(p)?),
            (None, Some(dir)) => PrecomputedEvaluator::new(dir)
                .path_for(&frame.frame_id, Branch::Single)
                .map(|p| load_prob(&p))
                .transpose()?,
            (None, None) => None,
        };
        if let Some(p) = &p0 {
            ensure_same_dims(&pred, p)?;
        }
        Ok(LossInputs { pred, gt, reliable, p0 })
    });
    if rows.is_empty() {
        report.recompute_aggregates();
        return Ok(report);
    }
    if report.is_partial() {
        report
            .warnings
            .push("temporal term computed over the frames that loaded; skipped frames break adjacency".into());
    }
    let plane_of: Vec<_> = rows.iter().map(|(_, x)| (x.pred.plane().clone(), x.gt.plane().clone())).collect();
    let frames: Vec<LossFrame<'_>> = rows
        .iter()
        .zip(&plane_of)
        .map(|((_, x), (p, g))| LossFrame {
            pred: p,
            gt: g,
            reliable: &x.reliable,
            p0: x.p0.as_ref(),
        })
        .collect();
    let total = matting_total_loss(&frames, cfg.loss)?;
    for ((i, x), (p, g)) in rows.iter().zip(&plane_of) {
        let frame = &run.frames()[*i];
        let l1 = crate::losses::masked_l1(p, g, &x.reliable, cfg.loss.epsilon)?;
        let lap = crate::losses::masked_laplacian_loss(p, g, &x.reliable, cfg.loss.levels, cfg.loss.epsilon)?;
        let mut entry = FrameEntry::new(&frame.frame_id)
            .metric("l1", l1.value)
            .metric("lap", lap.value);
        if let Some(p0) = &x.p0 {
            // The evaluator objective scores the reliable-class probability.
            let reliable_prob = p0.plane().map(|v| 1.0 - v);
            let mqe = mqe_total_loss(&reliable_prob, &x.reliable, cfg.focal, cfg.dice_smooth)?;
            entry = entry
                .metric("eval_guidance", eval_guidance_loss(p0).value)
                .metric("mqe", mqe.value);
        }
        report.frames.push(entry);
    }
    report.sequence.insert(
        "matting_total".into(),
        json!({
            "value": total.value,
            "l1": total.l1,
            "lap": total.lap,
            "tc": total.tc,
            "eval": total.eval,
            "frames": frames.len(),
        }),
    );
    report.recompute_aggregates();
    Ok(report)
}

/// Reference-frame sampling with dropout; writes the augmented references
/// and a replayable patch log.
pub fn augment(run: &Run<'_>) -> Result<RunReport> {
    run.prepare_out()?;
    let cfg = run.config;
    let mut report = run.report("augment");
    let n = run.frames().len();
    if n == 0 {
        report.recompute_aggregates();
        return Ok(report);
    }
    let plan = plan_window(n, cfg.window, cfg.n_refs, cfg.seed)?;
    let spec = DropoutSpec {
        seed: cfg.seed,
        ..cfg.dropout
    };
    let refs = plan.reference_indices.clone();
    let rows = run.per_frame(&mut report, |i, frame| {
        if !refs.contains(&i) {
            return Ok(None);
        }
        let rgb = load_rgb(&frame.rgb_path)?;
        let alpha_path = frame
            .gt_path
            .as_deref()
            .or(frame.prediction())
            .ok_or_else(|| missing(frame, "gt_path, pred_path or alpha_v_path"))?;
        let alpha = load_alpha(alpha_path)?;
        let boundary = reference_boundary(&alpha);
        let out = dropout_augment(&rgb, &alpha, &boundary, &spec, i as u64)?;
        let rgb_path = run.out(&frame.frame_id, "rgb.png");
        let a_path = run.out(&frame.frame_id, "alpha.pfm");
        save_rgb(&rgb_path, &out.rgb)?;
        save_alpha(&a_path, &out.alpha)?;
        let mut entry = FrameEntry::new(&frame.frame_id)
            .metric("patches", out.patches.len() as f64)
            .metric("drawn_boundary", out.drawn_boundary as f64)
            .metric("drawn_nonboundary", out.drawn_nonboundary as f64);
        let log = json!({
            "frame_id": frame.frame_id,
            "frame_index": i,
            "patches": out.patches,
            "drawn_boundary": out.drawn_boundary,
            "drawn_nonboundary": out.drawn_nonboundary,
            "warnings": out.warnings,
            "outputs": {"rgb": file_name(&rgb_path), "alpha": file_name(&a_path)},
        });
        entry.details = log.clone();
        Ok(Some((entry, log)))
    });
    let mut logs = Vec::new();
    for (_, row) in rows {
        if let Some((entry, log)) = row {
            report.frames.push(entry);
            logs.push(log);
        }
    }
    let window_ids: Vec<&str> = plan.window_indices.iter().map(|&i| run.frames()[i].frame_id.as_str()).collect();
    let ref_ids: Vec<&str> = refs.iter().map(|&i| run.frames()[i].frame_id.as_str()).collect();
    let patch_log = json!({
        "seed": cfg.seed,
        "spec": spec,
        "plan": plan,
        "window_frame_ids": window_ids,
        "reference_frame_ids": ref_ids,
        "frames": logs,
    });
    let log_path = run.out_dir.join("patch_log.json");
    let mut text = serde_json::to_string_pretty(&patch_log)?;
    text.push('\n');
    fs::write(&log_path, text).map_err(|e| Error::io(&log_path, e))?;
    report.sequence.insert("plan".into(), serde_json::to_value(&plan)?);
    report.sequence.insert("patch_log".into(), json!(file_name(&log_path)));
    report.recompute_aggregates();
    Ok(report)
}

fn safe_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Redundancy removal, instance grouping and fragment filtering per frame.
pub fn curate_masks(run: &Run<'_>) -> Result<RunReport> {
    run.prepare_out()?;
    let cfg = run.config;
    let boxes: BTreeMap<String, Vec<InstanceBox>> = match &cfg.boxes {
        Some(p) => load_boxes(p)?,
        None => BTreeMap::new(),
    };
    let mut report = run.report("curate-masks");
    if cfg.boxes.is_none() {
        report
            .warnings
            .push("no --boxes file: only redundancy removal is performed".into());
    }
    let rows = run.per_frame(&mut report, |_, frame| {
        let entries = frame
            .masks
            .iter()
            .map(|m| {
                Ok(MaskEntry {
                    id: m.id.clone(),
                    source: m.source,
                    mask: load_binary(&m.path)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let set = MaskSet::new(entries)?;
        let kept = remove_redundant(&set, cfg.coverage);
        let kept_ids: Vec<String> = kept.ids().iter().map(|s| s.to_string()).collect();
        let removed: Vec<&str> = set.ids().into_iter().filter(|id| !kept_ids.iter().any(|k| k == id)).collect();
        let mut entry = FrameEntry::new(&frame.frame_id)
            .metric("masks_in", set.len() as f64)
            .metric("masks_kept", kept.len() as f64);
        let mut details = json!({"kept": kept_ids, "removed_redundant": removed});
        if cfg.boxes.is_some() {
            let frame_boxes = boxes.get(&frame.frame_id).map(Vec::as_slice).unwrap_or_default();
            let grouping = group_to_instances(&kept, frame_boxes, cfg.assign_threshold)?;
            let (instances, fragments) = filter_fragments(grouping.instances, frame_boxes, cfg.fragment_min_fill);
            let mut written = Vec::new();
            for inst in &instances {
                let path = run.out(&frame.frame_id, &format!("{}.mask.png", safe_stem(&inst.instance_id)));
                save_binary(&path, &inst.mask)?;
                written.push(json!({
                    "instance_id": inst.instance_id,
                    "members": inst.member_ids,
                    "area": inst.mask.count_ones(),
                    "file": file_name(&path),
                }));
            }
            entry = entry
                .metric("instances", instances.len() as f64)
                .metric("discarded", grouping.discarded.len() as f64)
                .metric("fragments", fragments.len() as f64);
            details["instances"] = json!(written);
            details["discarded"] = json!(grouping.discarded);
            details["fragments"] = json!(fragments.iter().map(|f| &f.instance_id).collect::<Vec<_>>());
        }
        entry.details = details;
        Ok(entry)
    });
    report.frames.extend(rows.into_iter().map(|(_, e)| e));
    report.recompute_aggregates();
    Ok(report)
}

/// Evaluator output against normalized ground-truth discrepancy, binned.
pub fn analyze(run: &Run<'_>) -> Result<RunReport> {
    run.prepare_out()?;
    let cfg = run.config;
    let mut report = run.report("analyze");
    let rows = run.per_frame(&mut report, |_, frame| {
        let pred = prediction(frame)?;
        let gt = load_alpha(required(frame, &frame.gt_path, "gt_path")?)?;
        let grid = normalized_discrepancy(&pred, &gt, &cfg.discrepancy)?;
        let (p0, src) = run.probability(frame, Branch::Single, &pred, None, Some(&gt))?;
        let pairs = collect_pairs(&p0, &grid)?;
        let mut entry = FrameEntry::new(&frame.frame_id).metric("pairs", pairs.len() as f64);
        entry.details = json!({"prob_source": src});
        Ok((entry, pairs))
    });
    let mut all: Vec<Pair> = Vec::new();
    for (_, (entry, pairs)) in rows {
        report.frames.push(entry);
        all.extend(pairs);
    }
    let binned = bin_and_correlate(&all, cfg.bins)?;
    let csv_path = run.out_dir.join("correlation.csv");
    let json_path = run.out_dir.join("correlation.json");
    fs::write(&csv_path, binned.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    let mut text = serde_json::to_string_pretty(&binned)?;
    text.push('\n');
    fs::write(&json_path, text).map_err(|e| Error::io(&json_path, e))?;
    report.sequence.insert("pearson_r".into(), json!(binned.pearson_r));
    if let Some(reason) = &binned.null_reason {
        report.sequence.insert("null_reason".into(), json!(reason));
    }
    report.sequence.insert("total_pairs".into(), json!(binned.total_pairs));
    report
        .sequence
        .insert("outputs".into(), json!([file_name(&csv_path), file_name(&json_path)]));
    info!("analyze: {} pairs, r = {:?}", binned.total_pairs, binned.pearson_r);
    report.recompute_aggregates();
    Ok(report)
}
