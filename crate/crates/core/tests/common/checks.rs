//! Library-level acceptance checks. Each returns a one-line summary on
//! success and the first counterexample on failure.

use matteval::analysis::{bin_and_correlate, collect_pairs, pearson, Pair};
use matteval::curation::{group_to_instances, remove_redundant, InstanceBox, MaskEntry, MaskSet, MaskSource};
use matteval::evalmap::{make_patch_grid, normalized_discrepancy, oracle_prob_map, pseudo_gt_map, DiscrepancyConfig};
use matteval::fusion::{fuse_frame, BlurConfig};
use matteval::image::{binarize_prob, EvalMap, Plane, ProbMap, SegMask};
use matteval::losses::{
    dice_loss, eval_guidance_loss, laplacian_pyramid, focal_loss, masked_l1, masked_laplacian_loss, masked_tc_loss,
    matting_total_loss, mqe_total_loss, FocalConfig, LossFrame, MattingLossConfig,
};
use matteval::metrics::{conn_metric, dtssd, grad_metric, mad, mse};
use matteval::sampler::plan_window;
use rand::Rng;

use super::*;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($t:tt)*) => {
        if !$cond {
            return Err(format!($($t)*));
        }
    };
}

// ---- metrics --------------------------------------------------------------

pub fn metric_oracles() -> Check {
    let mut rng = rng(0x6d65);
    for case in 0..1000 {
        let (h, w) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let p = random_matte(&mut rng, h, w);
        let g = random_matte(&mut rng, h, w);
        let got = mad(&p, &g, None).unwrap();
        let want = oracle_mad(p.as_slice(), g.as_slice());
        ensure!(rel_close(got, want, 1e-9), "mad case {case}: {got} vs {want}");
        let got = mse(&p, &g, None).unwrap();
        let want = oracle_mse(p.as_slice(), g.as_slice());
        ensure!(rel_close(got, want, 1e-9), "mse case {case}: {got} vs {want}");

        let t = rng.random_range(2..=5);
        let ps: Vec<_> = (0..t).map(|_| random_matte(&mut rng, h, w)).collect();
        let gs: Vec<_> = (0..t).map(|_| random_matte(&mut rng, h, w)).collect();
        let got = dtssd(&ps, &gs, None).unwrap();
        let want = oracle_dtssd(
            &ps.iter().map(|m| m.as_slice().to_vec()).collect::<Vec<_>>(),
            &gs.iter().map(|m| m.as_slice().to_vec()).collect::<Vec<_>>(),
        );
        ensure!(rel_close(got, want, 1e-9), "dtssd case {case}: {got} vs {want}");
    }
    for case in 0..200 {
        // Half the cases on a lattice so threshold ties and plateaus occur.
        let (p, g) = if case % 2 == 0 {
            (random_plane(&mut rng, 6, 6), random_plane(&mut rng, 6, 6))
        } else {
            (lattice_plane(&mut rng, 6, 6, 10), lattice_plane(&mut rng, 6, 6, 10))
        };
        let (p, g) = (matte(p), matte(g));
        let got = conn_metric(&p, &g).unwrap();
        let want = oracle_conn(p.as_slice(), g.as_slice(), 6, 6);
        ensure!(got == want, "conn case {case}: {got} vs {want}");
    }
    for case in 0..100 {
        let p = random_matte(&mut rng, 8, 8);
        let g = random_matte(&mut rng, 8, 8);
        let got = grad_metric(&p, &g).unwrap();
        let want = oracle_grad(p.as_slice(), g.as_slice(), 8, 8);
        ensure!(rel_close(got, want, 1e-9), "grad case {case}: {got} vs {want}");
    }
    Ok("1000 mad/mse/dtssd, 200 conn, 100 grad instances agree".into())
}

// ---- pseudo ground truth --------------------------------------------------

fn unreliable_cells(eval: &EvalMap, h: usize, w: usize) -> usize {
    let grid = make_patch_grid(h, w, 7, 7).unwrap();
    grid.cells
        .iter()
        .filter(|c| !eval.get(c.top, c.left))
        .count()
}

pub fn pseudo_gt_identities() -> Check {
    let cfg = DiscrepancyConfig::default();
    let mut rng = rng(0x7067);
    for case in 0..1000 {
        let (h, w) = (rng.random_range(7..=24), rng.random_range(7..=24));
        let g = random_matte(&mut rng, h, w);
        // Mix smooth perturbations with independent noise.
        let p = if case % 2 == 0 {
            random_matte(&mut rng, h, w)
        } else {
            let amp = rng.random::<f64>();
            matte(Plane::from_fn(h, w, |r, c| {
                (g.plane()[(r, c)] + amp * (((r * 7 + c * 3) % 11) as f64 / 11.0 - 0.5)).clamp(0.0, 1.0)
            }))
        };
        let via_prob = binarize_prob(&oracle_prob_map(&p, &g, &cfg).unwrap(), cfg.delta).unwrap();
        let direct = pseudo_gt_map(&p, &g, &cfg).unwrap();
        ensure!(via_prob == direct, "case {case} ({h}x{w}): binarized oracle differs from pseudo-GT");

        let same = pseudo_gt_map(&g, &g, &cfg).unwrap();
        ensure!(same.count_ones() == h * w, "case {case}: pred == gt left unreliable pixels");

        let grid = make_patch_grid(h, w, 7, 7).unwrap();
        let cell = grid.cells[rng.random_range(0..grid.cells.len())];
        let corrupted = matte(Plane::from_fn(h, w, |r, c| {
            let v = g.plane()[(r, c)];
            if cell.contains(r, c) {
                1.0 - v
            } else {
                v
            }
        }));
        if corrupted == g {
            continue;
        }
        let map = pseudo_gt_map(&corrupted, &g, &cfg).unwrap();
        let bad = unreliable_cells(&map, h, w);
        ensure!(bad == 1, "case {case}: single corrupted cell gave {bad} unreliable cells");
        ensure!(!map.get(cell.top, cell.left), "case {case}: the corrupted cell is marked reliable");
    }
    Ok("1000 fuzzed pairs: binarize/pseudo-GT agree, identity all-reliable, one corrupted cell".into())
}

// ---- fusion ---------------------------------------------------------------

fn cellwise_eval(rng: &mut ChaCha8Rng, h: usize, w: usize, p: f64) -> EvalMap {
    let grid = make_patch_grid(h, w, 7, 7).unwrap();
    let flags: Vec<f64> = (0..grid.cells.len()).map(|_| f64::from(u8::from(rng.random_bool(p)))).collect();
    let plane = grid.broadcast(&flags);
    EvalMap::from_fn(h, w, |r, c| plane[(r, c)] == 1.0)
}

/// Video branch wrong on cells `a`, image branch wrong on cells `b`, by the
/// same amount; the two sets are at least one cell apart.
fn complementary_toy(rng: &mut ChaCha8Rng) -> (AlphaMatte, AlphaMatte, AlphaMatte, Vec<usize>, usize) {
    let side = rng.random_range(7..=12);
    let (h, w) = (7 * side, 7 * side);
    let gt = matte(Plane::from_fn(h, w, |_, _| 0.25 + 0.5 * rng.random::<f64>()));
    let k = rng.random_range(1..=3);
    let mut a: Vec<(usize, usize)> = Vec::new();
    let mut b: Vec<(usize, usize)> = Vec::new();
    let far = |x: (usize, usize), set: &[(usize, usize)]| {
        set.iter().all(|y| x.0.abs_diff(y.0).max(x.1.abs_diff(y.1)) >= 2)
    };
    while a.len() < k || b.len() < k {
        let cell = (rng.random_range(0..7), rng.random_range(0..7));
        if a.contains(&cell) || b.contains(&cell) {
            continue;
        }
        if a.len() < k && far(cell, &b) {
            a.push(cell);
        } else if b.len() < k && far(cell, &a) {
            b.push(cell);
        }
    }
    let offset = 0.2;
    let shift = |cells: &[(usize, usize)]| {
        matte(Plane::from_fn(h, w, |r, c| {
            let v = gt.plane()[(r, c)];
            if cells.contains(&(r / side, c / side)) {
                v + offset
            } else {
                v
            }
        }))
    };
    let av = shift(&a);
    let ai = shift(&b);
    let centers = a.iter().map(|&(r, c)| (r * side + side / 2) * w + c * side + side / 2).collect();
    (gt, av, ai, centers, side)
}

pub fn fusion_properties() -> Check {
    let cfg = DiscrepancyConfig::default();
    let blur = BlurConfig::default();
    let mut rng = rng(0x6675);
    for case in 0..500 {
        let (h, w) = (rng.random_range(7..=40), rng.random_range(7..=40));
        let av = random_matte(&mut rng, h, w);
        let ai = random_matte(&mut rng, h, w);
        let ev = cellwise_eval(&mut rng, h, w, 0.6);
        let ei = cellwise_eval(&mut rng, h, w, 0.6);
        let out = fuse_frame(&av, &ai, &ev, &ei, blur).unwrap();
        for i in 0..h * w {
            let (v, im, f) = (av.as_slice()[i], ai.as_slice()[i], out.alpha.as_slice()[i]);
            ensure!(
                f >= v.min(im) && f <= v.max(im),
                "case {case}: pixel {i} fused {f} outside [{v}, {im}]"
            );
            let (rv, ri, ru) = (ev.as_slice()[i], ei.as_slice()[i], out.eval.as_slice()[i]);
            ensure!(ru == (rv | ri), "case {case}: pixel {i} fused eval is not the union");
        }
        let same = fuse_frame(&av, &av, &ev, &ei, blur).unwrap();
        ensure!(same.alpha == av, "case {case}: agreeing branches changed the alpha");

        // Marking more image-branch pixels reliable never loses reliability.
        let more = ei.zip_with(&cellwise_eval(&mut rng, h, w, 0.3), |a, b| a || b).unwrap();
        let out_more = fuse_frame(&av, &ai, &ev, &more, blur).unwrap();
        for i in 0..h * w {
            ensure!(
                out_more.eval.as_slice()[i] >= out.eval.as_slice()[i],
                "case {case}: union lost pixel {i} when reliability grew"
            );
        }

        let (gt, tv, ti, centers, _) = complementary_toy(&mut rng);
        let ev = pseudo_gt_map(&tv, &gt, &cfg).unwrap();
        let ei = pseudo_gt_map(&ti, &gt, &cfg).unwrap();
        let fused = fuse_frame(&tv, &ti, &ev, &ei, blur).unwrap();
        let (mv, mi) = (mad(&tv, &gt, None).unwrap(), mad(&ti, &gt, None).unwrap());
        let mf = mad(&fused.alpha, &gt, None).unwrap();
        ensure!(
            mf <= mv.min(mi) + 1e-6,
            "case {case}: complementary toy fused MAD {mf} > min({mv}, {mi})"
        );
        for &c in &centers {
            ensure!(
                fused.soft_mask.as_slice()[c] > 0.5,
                "case {case}: soft mask {} at a corrupted video cell centre",
                fused.soft_mask.as_slice()[c]
            );
        }
    }
    Ok("500 cases: range, idempotence, union monotonicity, complementary toy".into())
}

// ---- gradients ------------------------------------------------------------

const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-4;

fn probability_plane(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Plane {
    Plane::from_fn(h, w, |_, _| 0.05 + 0.9 * rng.random::<f64>())
}

/// `gt` plus an offset bounded away from zero so no coordinate sits on the
/// kink of `|x|`.
fn offset_pred(rng: &mut ChaCha8Rng, gt: &Plane) -> Plane {
    Plane::from_fn(gt.height(), gt.width(), |r, c| {
        let g = gt[(r, c)];
        let d = 0.01 + 0.2 * rng.random::<f64>();
        if rng.random_bool(0.5) {
            g + d
        } else {
            g - d
        }
    })
}

pub fn gradient_checks() -> Check {
    let (h, w) = (16, 16);
    let mut rng = rng(0x6764);
    let mut report = Vec::new();
    let mut record = |name: &str, worst: f64| -> Result<(), String> {
        if worst > FD_TOL {
            return Err(format!("{name}: worst relative error {worst:e}"));
        }
        report.push(format!("{name} {worst:.1e}"));
        Ok(())
    };
    let eps = 1e-6;
    let gt = random_plane(&mut rng, h, w);
    let pred = offset_pred(&mut rng, &gt);
    let r: EvalMap = random_binary(&mut rng, h, w, 0.7);
    let coords = random_coords(&mut rng, 100, h * w);

    let g = masked_l1(&pred, &gt, &r, eps).unwrap().grad.unwrap();
    record(
        "masked_l1",
        fd_check(|x| masked_l1(x, &gt, &r, eps).unwrap().value, &pred, &g, &coords, FD_STEP),
    )?;

    let g = masked_laplacian_loss(&pred, &gt, &r, 5, eps).unwrap().grad.unwrap();
    record(
        "masked_laplacian",
        fd_check(
            |x| masked_laplacian_loss(x, &gt, &r, 5, eps).unwrap().value,
            &pred,
            &g,
            &coords,
            FD_STEP,
        ),
    )?;

    let prev = random_plane(&mut rng, h, w);
    let gt_prev = random_plane(&mut rng, h, w);
    let r_prev: EvalMap = random_binary(&mut rng, h, w, 0.7);
    let tc = |a: &Plane, b: &Plane| masked_tc_loss(a, b, &gt, &gt_prev, &r, &r_prev, eps).unwrap();
    let g = tc(&pred, &prev).grad.unwrap();
    record("masked_tc", fd_check(|x| tc(x, &prev).value, &pred, &g, &coords, FD_STEP))?;
    record(
        "masked_tc(prev)",
        fd_check(|x| tc(&pred, x).value, &prev, &g.map(|v| -v), &coords, FD_STEP),
    )?;

    let p = probability_plane(&mut rng, h, w);
    let y: EvalMap = random_binary(&mut rng, h, w, 0.5);
    let focal = FocalConfig::default();
    let g = focal_loss(&p, &y, focal).unwrap().grad.unwrap();
    record("focal", fd_check(|x| focal_loss(x, &y, focal).unwrap().value, &p, &g, &coords, FD_STEP))?;
    let g = dice_loss(&p, &y, 1.0).unwrap().grad.unwrap();
    record("dice", fd_check(|x| dice_loss(x, &y, 1.0).unwrap().value, &p, &g, &coords, FD_STEP))?;
    let g = mqe_total_loss(&p, &y, focal, 1.0).unwrap().grad.unwrap();
    record(
        "mqe_total",
        fd_check(|x| mqe_total_loss(x, &y, focal, 1.0).unwrap().value, &p, &g, &coords, FD_STEP),
    )?;

    let guide = |x: &Plane| eval_guidance_loss(&ProbMap::new(x.clone()).unwrap());
    let g = guide(&p).grad.unwrap();
    record("eval_guidance", fd_check(|x| guide(x).value, &p, &g, &coords, FD_STEP))?;

    // Three-frame window; the middle frame collects both temporal terms.
    let gts: Vec<Plane> = (0..3).map(|_| random_plane(&mut rng, h, w)).collect();
    let preds: Vec<Plane> = gts.iter().map(|g| offset_pred(&mut rng, g)).collect();
    let masks: Vec<EvalMap> = (0..3).map(|_| random_binary(&mut rng, h, w, 0.7)).collect();
    let p0s: Vec<ProbMap> = (0..3).map(|_| ProbMap::new(probability_plane(&mut rng, h, w)).unwrap()).collect();
    let cfg = MattingLossConfig::default();
    let total = |preds: &[Plane], p0s: &[ProbMap]| {
        let frames: Vec<LossFrame> = (0..3)
            .map(|t| LossFrame {
                pred: &preds[t],
                gt: &gts[t],
                reliable: &masks[t],
                p0: Some(&p0s[t]),
            })
            .collect();
        matting_total_loss(&frames, cfg).unwrap()
    };
    let base = total(&preds, &p0s);
    let g = &base.pred_grads[1];
    record(
        "matting_total(pred)",
        fd_check(
            |x| {
                let mut ps = preds.clone();
                ps[1] = x.clone();
                total(&ps, &p0s).value
            },
            &preds[1],
            g,
            &coords,
            FD_STEP,
        ),
    )?;
    let g = base.p0_grads[0].as_ref().unwrap();
    record(
        "matting_total(p0)",
        fd_check(
            |x| {
                let mut qs = p0s.clone();
                qs[0] = ProbMap::new(x.clone()).unwrap();
                total(&preds, &qs).value
            },
            p0s[0].plane(),
            g,
            &coords,
            FD_STEP,
        ),
    )?;
    Ok(format!("16x16, 100 coords each: {}", report.join(", ")))
}

pub fn pyramid_checks() -> Check {
    let mut rng = rng(0x7079);
    for &(h, w) in &[(16, 16), (23, 37), (64, 48), (31, 31)] {
        let x = random_plane(&mut rng, h, w);
        let y = random_plane(&mut rng, h, w);
        let px = laplacian_pyramid(&x, 5).unwrap();
        let back = px.reconstruct();
        let err = x
            .as_slice()
            .iter()
            .zip(back.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        ensure!(err <= 1e-6, "{h}x{w}: reconstruction error {err:e}");

        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo = x.zip_map(&y, |u, v| a * u + b * v).unwrap();
        let pc = laplacian_pyramid(&combo, 5).unwrap();
        let py = laplacian_pyramid(&y, 5).unwrap();
        for s in 0..pc.levels() {
            for i in 0..pc.bands[s].as_slice().len() {
                let want = a * px.bands[s].as_slice()[i] + b * py.bands[s].as_slice()[i];
                let got = pc.bands[s].as_slice()[i];
                ensure!((got - want).abs() <= 1e-9, "{h}x{w} level {s}: linearity off by {:e}", got - want);
            }
        }
    }
    Ok("reconstruction within 1e-6, linearity within 1e-9".into())
}

// ---- sampler --------------------------------------------------------------

pub fn sampler_uniformity() -> Check {
    let (len, window, n_refs, draws) = (20usize, 8usize, 2usize, 100_000u64);
    let starts = len - window + 1;
    let mut start_hits = vec![0u64; starts];
    let mut window_hits = vec![0u64; len];
    let mut ref_hits = vec![0u64; len];
    for seed in 0..draws {
        let plan = plan_window(len, window, n_refs, seed).map_err(|e| e.to_string())?;
        start_hits[plan.window_indices[0]] += 1;
        for &i in &plan.window_indices {
            window_hits[i] += 1;
        }
        for &i in &plan.reference_indices {
            ensure!(!plan.window_indices.contains(&i), "seed {seed}: reference {i} inside the window");
            ref_hits[i] += 1;
        }
    }
    // Exact marginals by enumerating every start.
    let outside = (len - window) as f64;
    let mut p_window = vec![0.0; len];
    let mut p_ref = vec![0.0; len];
    for s in 0..starts {
        for i in 0..len {
            if (s..s + window).contains(&i) {
                p_window[i] += 1.0 / starts as f64;
            } else {
                p_ref[i] += n_refs as f64 / outside / starts as f64;
            }
        }
    }
    let n = draws as f64;
    let within = |name: &str, i: usize, hits: u64, p: f64| -> Result<(), String> {
        let sigma = (n * p * (1.0 - p)).sqrt();
        let dev = (hits as f64 - n * p).abs();
        if dev > 3.0 * sigma {
            return Err(format!("{name}[{i}]: {hits} hits, expected {:.1} ± {:.1}", n * p, 3.0 * sigma));
        }
        Ok(())
    };
    for (i, &h) in start_hits.iter().enumerate() {
        within("start", i, h, 1.0 / starts as f64)?;
    }
    for i in 0..len {
        within("window", i, window_hits[i], p_window[i])?;
        within("reference", i, ref_hits[i], p_ref[i])?;
    }
    Ok(format!("{draws} draws within 3 sigma of the exact marginals"))
}

// ---- curation -------------------------------------------------------------

fn rect(h: usize, w: usize, top: usize, left: usize, mh: usize, mw: usize) -> SegMask {
    SegMask::from_fn(h, w, |r, c| r >= top && r < top + mh && c >= left && c < left + mw)
}

fn entry(id: &str, mask: SegMask) -> MaskEntry {
    MaskEntry {
        id: id.into(),
        source: MaskSource::Automatic,
        mask,
    }
}

pub fn curation_checks() -> Check {
    let (h, w) = (40, 40);
    let chain = MaskSet::new(vec![
        entry("a", rect(h, w, 10, 10, 5, 5)),
        entry("b", rect(h, w, 8, 8, 10, 10)),
        entry("c", rect(h, w, 5, 5, 20, 20)),
    ])
    .unwrap();
    let kept = remove_redundant(&chain, 0.9);
    ensure!(kept.ids() == vec!["c"], "chain resolved to {:?}", kept.ids());

    let mut rng = rng(0x6375);
    for case in 0..200 {
        let n = rng.random_range(1..=8);
        let entries = (0..n)
            .map(|k| {
                let (mh, mw) = (rng.random_range(1..=20), rng.random_range(1..=20));
                let (top, left) = (rng.random_range(0..=h - mh), rng.random_range(0..=w - mw));
                entry(&format!("m{k}"), rect(h, w, top, left, mh, mw))
            })
            .collect();
        let set = MaskSet::new(entries).unwrap();
        let once = remove_redundant(&set, 0.9);
        let twice = remove_redundant(&once, 0.9);
        ensure!(once == twice, "case {case}: not idempotent, {:?} then {:?}", once.ids(), twice.ids());
    }

    // Head and torso of one person, plus a mask outside every box.
    let person = InstanceBox {
        id: "person".into(),
        x: 10.0,
        y: 2.0,
        w: 14.0,
        h: 36.0,
    };
    let set = MaskSet::new(vec![
        entry("head", rect(h, w, 3, 13, 8, 8)),
        entry("torso", rect(h, w, 12, 11, 20, 12)),
        entry("stray", rect(h, w, 30, 30, 6, 6)),
    ])
    .unwrap();
    let grouping = group_to_instances(&set, &[person], 0.5).unwrap();
    ensure!(grouping.instances.len() == 1, "{} instances", grouping.instances.len());
    let inst = &grouping.instances[0];
    ensure!(inst.member_ids == vec!["head", "torso"], "members {:?}", inst.member_ids);
    ensure!(inst.mask.count_ones() == 64 + 240, "merged area {}", inst.mask.count_ones());
    ensure!(grouping.discarded == vec!["stray"], "discarded {:?}", grouping.discarded);
    Ok("chain -> {c}, idempotent on 200 random sets, head+torso merged, stray discarded".into())
}

// ---- analysis -------------------------------------------------------------

pub fn analysis_checks() -> Check {
    let cfg = DiscrepancyConfig::default();
    let mut rng = rng(0x616e);
    let mut all = Vec::new();
    for case in 0..100 {
        let (h, w) = (rng.random_range(7..=40), rng.random_range(7..=40));
        let g = random_matte(&mut rng, h, w);
        let p = random_matte(&mut rng, h, w);
        let grid = normalized_discrepancy(&p, &g, &cfg).unwrap();
        let p0 = oracle_prob_map(&p, &g, &cfg).unwrap();
        let pairs = collect_pairs(&p0, &grid).unwrap();
        let r = pearson(&pairs).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(r == 1.0, "case {case}: r = {r:.17}");
        all.extend(pairs);
    }
    let binned = bin_and_correlate(&all, 30).unwrap();
    let counted: usize = binned.bins.iter().map(|b| b.count).sum();
    ensure!(binned.bins.len() == 30, "{} bins", binned.bins.len());
    ensure!(counted == all.len() && binned.total_pairs == all.len(), "bins hold {counted} of {}", all.len());
    ensure!(binned.pearson_r == Some(1.0), "pooled r = {:?}", binned.pearson_r);

    let flat: Vec<Pair> = (0..50).map(|k| Pair { gt: k as f64 / 49.0, pred: 0.3 }).collect();
    let d = bin_and_correlate(&flat, 30).unwrap();
    ensure!(d.pearson_r.is_none() && d.null_reason.is_some(), "constant predictions gave {:?}", d.pearson_r);
    let flat: Vec<Pair> = (0..50).map(|k| Pair { gt: 0.5, pred: k as f64 / 49.0 }).collect();
    let d = bin_and_correlate(&flat, 30).unwrap();
    ensure!(d.pearson_r.is_none(), "constant ground truth gave {:?}", d.pearson_r);
    Ok(format!("r = 1 exactly on 100 oracle frames, {} pairs binned, null r on flat input", all.len()))
}
