//! Reference implementations and fixtures shared by the integration tests
//! and the acceptance runner. Oracles are written from the formulas, not from
//! the library code: dense loops, union-find labelling, explicit 2-D kernels.
#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use matteval::image::{AlphaMatte, BinaryMap, Plane, RgbFrame, SegMask};
use matteval::io::raster::{save_alpha, save_binary, save_rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod checks;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_plane(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Plane {
    Plane::from_fn(h, w, |_, _| rng.random::<f64>())
}

/// Values on a coarse lattice so thresholds and ties actually occur.
pub fn lattice_plane(rng: &mut ChaCha8Rng, h: usize, w: usize, steps: u32) -> Plane {
    Plane::from_fn(h, w, |_, _| rng.random_range(0..=steps) as f64 / steps as f64)
}

pub fn matte(p: Plane) -> AlphaMatte {
    AlphaMatte::new(p).expect("values in [0, 1]")
}

pub fn random_matte(rng: &mut ChaCha8Rng, h: usize, w: usize) -> AlphaMatte {
    matte(random_plane(rng, h, w))
}

pub fn random_binary<K>(rng: &mut ChaCha8Rng, h: usize, w: usize, p: f64) -> BinaryMap<K> {
    BinaryMap::from_fn(h, w, |_, _| rng.random_bool(p))
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale || a == b
}

// ---- metric oracles -------------------------------------------------------

pub fn oracle_mad(p: &[f64], g: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - g[i]).abs();
    }
    1000.0 * s / p.len() as f64
}

pub fn oracle_mse(p: &[f64], g: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - g[i]) * (p[i] - g[i]);
    }
    1000.0 * s / p.len() as f64
}

pub fn oracle_dtssd(p: &[Vec<f64>], g: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for t in 1..p.len() {
        let n = p[t].len();
        let mut s = 0.0;
        for i in 0..n {
            let d = (p[t][i] - p[t - 1][i]) - (g[t][i] - g[t - 1][i]);
            s += d * d;
        }
        total += (s / n as f64).sqrt();
    }
    100.0 * total / (p.len() - 1) as f64
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Largest 4-connected component by union-find; ties go to the component
/// holding the smallest row-major index.
pub fn oracle_largest_component(set: &[bool], h: usize, w: usize) -> Vec<bool> {
    let mut parent: Vec<usize> = (0..set.len()).collect();
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if !set[i] {
                continue;
            }
            for j in [(c + 1 < w).then(|| i + 1), (r + 1 < h).then(|| i + w)].into_iter().flatten() {
                if set[j] {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut size = vec![0usize; set.len()];
    let mut first = vec![usize::MAX; set.len()];
    for i in 0..set.len() {
        if set[i] {
            let root = find(&mut parent, i);
            size[root] += 1;
            first[root] = first[root].min(i);
        }
    }
    let best = (0..set.len())
        .filter(|&i| size[i] > 0)
        .max_by(|&a, &b| size[a].cmp(&size[b]).then(first[b].cmp(&first[a])));
    match best {
        None => vec![false; set.len()],
        Some(root) => (0..set.len()).map(|i| set[i] && find(&mut parent, i) == root).collect(),
    }
}

/// Connectivity error from the definition: every threshold, every pixel.
pub fn oracle_conn(p: &[f64], g: &[f64], h: usize, w: usize) -> f64 {
    let mut l = vec![0.0; p.len()];
    for k in 1..=10 {
        let theta = k as f64 / 10.0;
        let set: Vec<bool> = (0..p.len()).map(|i| p[i] >= theta && g[i] >= theta).collect();
        let omega = oracle_largest_component(&set, h, w);
        for i in 0..p.len() {
            if omega[i] {
                l[i] = theta;
            }
        }
    }
    let phi = |d: f64| if d >= 0.15 { 1.0 - d } else { 1.0 };
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (phi(p[i] - l[i]) - phi(g[i] - l[i])).abs();
    }
    s / p.len() as f64 * 1000.0
}

pub fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Gradient magnitude by dense 2-D convolution with explicit outer-product
/// kernels.
pub fn oracle_gradient_magnitude(img: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let g: Vec<f64> = (-r..=r).map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let gs: f64 = g.iter().sum();
    let g: Vec<f64> = g.iter().map(|v| v / gs).collect();
    let d: Vec<f64> = (-r..=r).zip(&g).map(|(x, v)| -(x as f64) / (sigma * sigma) * v).collect();
    let size = (2 * r + 1) as usize;
    let mut kx = vec![0.0; size * size];
    let mut ky = vec![0.0; size * size];
    for a in 0..size {
        for b in 0..size {
            kx[a * size + b] = g[a] * d[b];
            ky[a * size + b] = d[a] * g[b];
        }
    }
    let mut out = vec![0.0; h * w];
    for row in 0..h {
        for col in 0..w {
            let (mut gx, mut gy) = (0.0, 0.0);
            for a in 0..size {
                for b in 0..size {
                    let rr = mirror(row as isize - (a as isize - r), h);
                    let cc = mirror(col as isize - (b as isize - r), w);
                    let v = img[rr * w + cc];
                    gx += kx[a * size + b] * v;
                    gy += ky[a * size + b] * v;
                }
            }
            out[row * w + col] = (gx * gx + gy * gy).sqrt();
        }
    }
    out
}

pub fn oracle_grad(p: &[f64], g: &[f64], h: usize, w: usize) -> f64 {
    let gp = oracle_gradient_magnitude(p, h, w, 1.4);
    let gg = oracle_gradient_magnitude(g, h, w, 1.4);
    let mut s = 0.0;
    for i in 0..gp.len() {
        s += (gp[i] - gg[i]) * (gp[i] - gg[i]);
    }
    1000.0 * s / gp.len() as f64
}

// ---- finite differences ---------------------------------------------------

/// Compares `grad` against central differences of `f` at `coords`.
/// Returns the worst relative error.
pub fn fd_check(f: impl Fn(&Plane) -> f64, x: &Plane, grad: &Plane, coords: &[usize], step: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for &i in coords {
        let mut plus = x.clone();
        plus.as_mut_slice()[i] += step;
        let mut minus = x.clone();
        minus.as_mut_slice()[i] -= step;
        let numeric = (f(&plus) - f(&minus)) / (2.0 * step);
        let analytic = grad.as_slice()[i];
        let scale = numeric.abs().max(analytic.abs()).max(1e-6);
        worst = worst.max((numeric - analytic).abs() / scale);
    }
    worst
}

pub fn random_coords(rng: &mut ChaCha8Rng, n: usize, len: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..len)).collect()
}

// ---- synthetic sequence ---------------------------------------------------

pub struct Sequence {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub frame_ids: Vec<String>,
}

/// Soft-edged disc drifting to the right, one cell per frame of each branch
/// corrupted on disjoint grid cells.
pub fn synthetic_gt(h: usize, w: usize, t: usize) -> AlphaMatte {
    let (cy, cx) = (h as f64 * 0.5, w as f64 * 0.35 + 2.0 * t as f64);
    let radius = h as f64 * 0.3;
    matte(Plane::from_fn(h, w, |r, c| {
        let d = ((r as f64 + 0.5 - cy).powi(2) + (c as f64 + 0.5 - cx).powi(2)).sqrt();
        (radius + 2.0 - d).clamp(0.0, 4.0) / 4.0
    }))
}

fn corrupt(alpha: &AlphaMatte, top: usize, left: usize, side: usize) -> AlphaMatte {
    let h = alpha.height();
    let w = alpha.width();
    matte(Plane::from_fn(h, w, |r, c| {
        let v = alpha.plane()[(r, c)];
        if r >= top && r < top + side && c >= left && c < left + side {
            1.0 - v
        } else {
            v
        }
    }))
}

pub fn write_synthetic_sequence(dir: &Path, frames: usize, h: usize, w: usize) -> Sequence {
    fs::create_dir_all(dir).unwrap();
    let cell = h / 7;
    let mut records = Vec::new();
    let mut ids = Vec::new();
    for t in 0..frames {
        let id = format!("frame_{t:03}");
        let gt = synthetic_gt(h, w, t);
        // Video branch wrong on a cell near the top left, image branch near
        // the bottom right; the two never touch.
        let alpha_v = corrupt(&gt, cell, cell, cell);
        let alpha_i = corrupt(&gt, 5 * cell, 5 * cell, cell);
        let seg = SegMask::from_fn(h, w, |r, c| gt.plane()[(r, c)] >= 0.5);
        let rgb = RgbFrame::new(
            h,
            w,
            gt.as_slice()
                .iter()
                .map(|&a| [0.9 * a + 0.1 * (1.0 - a), 0.4 * a + 0.6 * (1.0 - a), 0.2 * a + 0.3 * (1.0 - a)])
                .collect(),
        )
        .unwrap();
        let p = |name: &str| dir.join(format!("{id}.{name}"));
        save_rgb(&p("rgb.png"), &rgb).unwrap();
        save_alpha(&p("gt.pfm"), &gt).unwrap();
        save_alpha(&p("v.pfm"), &alpha_v).unwrap();
        save_alpha(&p("i.pfm"), &alpha_i).unwrap();
        save_binary(&p("seg.png"), &seg).unwrap();
        records.push(serde_json::json!({
            "frame_id": id,
            "rgb_path": format!("{id}.rgb.png"),
            "gt_path": format!("{id}.gt.pfm"),
            "alpha_v_path": format!("{id}.v.pfm"),
            "alpha_i_path": format!("{id}.i.pfm"),
            "seg_path": format!("{id}.seg.png"),
        }));
        ids.push(id);
    }
    let manifest = dir.join("manifest.json");
    let body = serde_json::json!({"version": 1, "defaults": {"grid": "7x7"}, "frames": records});
    fs::write(&manifest, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    Sequence {
        dir: dir.to_path_buf(),
        manifest,
        frame_ids: ids,
    }
}
