//! Acceptance suite: one line per criterion, all run even if one fails.
//!
//! Each criterion compares library or CLI output against an independent
//! oracle written here (brute force, exact integer arithmetic, sorting).

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reefmap::analytics::{connected_components, longest_axis, Connectivity};
use reefmap::annotate::{argmax_label, coarse_labels, normalize_raster, quantile_stats, QuantileStats};
use reefmap::dataset::{self, DatasetRound, TrainingHyperparams};
use reefmap::ingest::{PointPrediction, PointPredictionSet};
use reefmap::metrics::{confusion_matrix, iou_per_class, mean_iou, pixel_accuracy, EvalReport};
use reefmap::rasterize::{delaunay_triangulate, interpolate_points, rasterize_set};
use reefmap::synth::{synth_scene, SynthParams};
use reefmap::{ClassCatalog, Grid, Labels, Probabilities, UNLABELED};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || format!("{what} took {:.2} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

// ── 1 ───────────────────────────────────────────────────────────────────────

fn mean_iou_tables() -> Outcome {
    let rows: [(&str, [Option<f64>; 5], f64); 6] = [
        ("Coarse", [Some(0.5109), Some(0.2087), Some(0.2877), Some(0.4201), Some(0.8854)], 0.4625),
        ("Coarse Refined", [Some(0.4676), Some(0.1532), Some(0.3721), Some(0.4078), Some(0.9285)], 0.4658),
        ("Coarse Self-Distilled", [Some(0.5175), Some(0.2114), Some(0.3395), Some(0.4190), Some(0.8852)], 0.4745),
        ("Coarse Refined + Distilled", [Some(0.5282), Some(0.2313), Some(0.4095), Some(0.4111), Some(0.9249)], 0.5010),
        ("Trou d'eau", [Some(0.2354), Some(0.3623), Some(0.3295), Some(0.3707), Some(0.9484)], 0.4493),
        ("Saint-Leu", [Some(0.5641), None, Some(0.4318), Some(0.4242), Some(0.8972)], 0.5793),
    ];
    for (name, ious, printed) in rows {
        let m = mean_iou(&ious).map_err(|e| e.to_string())?;
        check((m - printed).abs() <= 1e-4, || format!("{name}: {m} vs printed {printed}"))?;
    }
    Ok("4 method rows and 2 zone rows within 1e-4".into())
}

// ── 2 ───────────────────────────────────────────────────────────────────────

type P = (i64, i64);

fn cross_f(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull (monotone chain) of float points.
fn hull_f(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    let mut h: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = h.len();
        let seq: Vec<(f64, f64)> = if pass == 0 { p.clone() } else { p.iter().rev().copied().collect() };
        for q in seq {
            while h.len() >= start + 2 && cross_f(h[h.len() - 2], h[h.len() - 1], q) <= 0.0 {
                h.pop();
            }
            h.push(q);
        }
        h.pop();
    }
    h
}

/// Signed distance-like margin: min over hull edges of the edge-normal offset.
fn hull_margin(hull: &[(f64, f64)], q: (f64, f64)) -> f64 {
    (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            cross_f(a, b, q) / (b.0 - a.0).hypot(b.1 - a.1)
        })
        .fold(f64::INFINITY, f64::min)
}

fn interpolation_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = Grid::new(0.0, 128.0, 1.0, 128, 128).unwrap();
    let mut checked = 0usize;
    for field in 0..20 {
        let (a, b, c) = (rng.random_range(10.0..20.0), rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03));
        let f = |x: f64, y: f64| a + b * x + c * y;
        let pts: Vec<(f64, f64)> =
            (0..200).map(|_| (rng.random_range(0.0..128.0), rng.random_range(0.0..128.0))).collect();
        let vals: Vec<f64> = pts.iter().map(|&(x, y)| f(x, y)).collect();
        let r = interpolate_points(&pts, &vals, &grid).map_err(|e| e.to_string())?;
        let hull = hull_f(&pts);
        for row in 0..128 {
            for col in 0..128 {
                let (x, y) = grid.pixel_center(col, row);
                let v = r.get(col, row);
                let m = hull_margin(&hull, (x, y));
                if m > 1e-9 {
                    check(!v.is_nan(), || format!("field {field}: ({col},{row}) inside hull but NoData"))?;
                } else if m < -1e-9 {
                    check(v.is_nan(), || format!("field {field}: ({col},{row}) outside hull but {v}"))?;
                }
                if !v.is_nan() {
                    let want = f(x, y);
                    check(((v - want) / want).abs() <= 1e-9, || format!("field {field}: ({col},{row}) {v} vs {want}"))?;
                    checked += 1;
                }
            }
        }
    }
    within(start.elapsed(), 5.0, "interpolation suite")?;
    Ok(format!("{checked} in-hull pixels over 20 fields, {:.2} s", start.elapsed().as_secs_f64()))
}

// ── 3 ───────────────────────────────────────────────────────────────────────

/// Exact in-circle sign for integer points: > 0 when d is strictly inside
/// the circle through counter-clockwise a, b, c.
fn incircle_exact(a: P, b: P, c: P, d: P) -> i128 {
    let row = |p: P| {
        let (x, y) = ((p.0 - d.0) as i128, (p.1 - d.1) as i128);
        (x, y, x * x + y * y)
    };
    let (ax, ay, a2) = row(a);
    let (bx, by, b2) = row(b);
    let (cx, cy, c2) = row(c);
    ax * (by * c2 - b2 * cy) - ay * (bx * c2 - b2 * cx) + a2 * (bx * cy - by * cx)
}

fn orient_exact(a: P, b: P, c: P) -> i128 {
    (b.0 - a.0) as i128 * (c.1 - a.1) as i128 - (b.1 - a.1) as i128 * (c.0 - a.0) as i128
}

fn delaunay_validity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for set in 0..50 {
        let n = rng.random_range(3..=200);
        // coarse lattices for half the sets to force cocircular/collinear configurations
        let range = if set % 2 == 0 { 1_000_000 } else { 12 };
        let mut ipts: Vec<P> = (0..n).map(|_| (rng.random_range(0..range), rng.random_range(0..range))).collect();
        ipts.push((0, 0));
        ipts.push((range, 0));
        ipts.push((0, range));
        let pts: Vec<(f64, f64)> = ipts.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
        let tri = delaunay_triangulate(&pts).map_err(|e| format!("set {set}: {e}"))?;
        let verts: Vec<P> = tri.vertices().iter().map(|&(x, y)| (x as i64, y as i64)).collect();
        let unique: BTreeSet<P> = ipts.iter().copied().collect();
        check(verts.len() == unique.len(), || {
            format!("set {set}: {} vertices for {} unique points", verts.len(), unique.len())
        })?;
        // Euler: a full triangulation has 2n - 2 - h triangles (h = hull vertices incl. collinear)
        let on_hull = verts
            .iter()
            .filter(|&&v| {
                let h = hull_f(&pts);
                hull_margin(&h, (v.0 as f64, v.1 as f64)).abs() < 1e-9
            })
            .count();
        check(tri.triangles().len() == 2 * verts.len() - 2 - on_hull, || {
            format!("set {set}: {} triangles, expected {}", tri.triangles().len(), 2 * verts.len() - 2 - on_hull)
        })?;
        for (t, &[a, b, c]) in tri.triangles().iter().enumerate() {
            let (pa, pb, pc) = (verts[a], verts[b], verts[c]);
            check(orient_exact(pa, pb, pc) > 0, || format!("set {set}: triangle {t} not counter-clockwise"))?;
            for (i, &q) in verts.iter().enumerate() {
                if i != a && i != b && i != c {
                    check(incircle_exact(pa, pb, pc, q) <= 0, || {
                        format!("set {set}: vertex {i} strictly inside circumcircle of triangle {t}")
                    })?;
                }
            }
        }
    }
    within(start.elapsed(), 10.0, "Delaunay suite")?;
    Ok(format!("50 sets, exact integer in-circle oracle, {:.2} s", start.elapsed().as_secs_f64()))
}

// ── 4 ───────────────────────────────────────────────────────────────────────

fn sorted_percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[lo];
    }
    sorted[lo] + (sorted[lo + 1] - sorted[lo]) * (h - lo as f64)
}

fn quantile_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for set in 0..100 {
        let n = if set % 10 == 0 { 100_000 } else { rng.random_range(1..=20_000) };
        let ties = set % 3 == 0;
        let values: Vec<f64> =
            (0..n).map(|_| if ties { rng.random_range(0..20) as f64 / 20.0 } else { rng.random::<f64>() }).collect();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let (pl, ph) =
            if set % 4 == 0 { (rng.random_range(0.0..0.5), rng.random_range(0.5..1.0)) } else { (0.01, 0.99) };
        let s = quantile_stats(&values, 0, pl, ph).map_err(|e| e.to_string())?;
        let (wl, wh) = (sorted_percentile(&sorted, pl), sorted_percentile(&sorted, ph));
        check(s.q_low == wl && s.q_high == wh, || {
            format!("set {set} (n={n}): ({}, {}) vs ({wl}, {wh})", s.q_low, s.q_high)
        })?;
    }
    Ok("100 sets up to n = 10^5, bit-exact".into())
}

// ── 5 ───────────────────────────────────────────────────────────────────────

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cat = ClassCatalog::default_five();
    let grid = Grid::new(0.0, 64.0, 1.0, 64, 64).unwrap();
    for pair in 0..100 {
        let draw = |rng: &mut ChaCha8Rng| if rng.random_bool(0.1) { UNLABELED } else { rng.random_range(0..5u8) };
        let t: Vec<u8> = (0..4096).map(|_| draw(&mut rng)).collect();
        let p: Vec<u8> = (0..4096).map(|_| draw(&mut rng)).collect();
        let mut tally = [[0u64; 5]; 5];
        let mut spill = 0u64;
        for (&a, &b) in t.iter().zip(&p) {
            match (a, b) {
                (UNLABELED, _) => {}
                (a, UNLABELED) => {
                    let _ = a;
                    spill += 1
                }
                (a, b) => tally[a as usize][b as usize] += 1,
            }
        }
        let truth = Labels::new(grid.clone(), t).unwrap();
        let pred = Labels::new(grid.clone(), p).unwrap();
        let c = confusion_matrix(&truth, &pred, &cat).map_err(|e| e.to_string())?;
        for (i, row) in tally.iter().enumerate() {
            check(c.row(i) == row, || format!("pair {pair}: row {i} {:?} vs {row:?}", c.row(i)))?;
        }
        check(c.unpredicted_pixels() == spill, || format!("pair {pair}: spill"))?;
        let total: u64 = tally.iter().flatten().sum();
        let diag: u64 = (0..5).map(|i| tally[i][i]).sum();
        check(pixel_accuracy(&c).unwrap() == diag as f64 / total as f64, || format!("pair {pair}: accuracy"))?;
        let ious = iou_per_class(&c);
        for k in 0..5 {
            let tp = tally[k][k];
            let fp: u64 = (0..5).filter(|&i| i != k).map(|i| tally[i][k]).sum();
            let fn_: u64 = (0..5).filter(|&j| j != k).map(|j| tally[k][j]).sum();
            let want = (tp + fp + fn_ > 0).then(|| tp as f64 / (tp + fp + fn_) as f64);
            check(ious[k] == want, || format!("pair {pair}: IoU class {k} {:?} vs {want:?}", ious[k]))?;
        }
    }
    Ok("100 random 64x64 pairs, integer-exact".into())
}

// ── 6 ───────────────────────────────────────────────────────────────────────

fn normalization_and_argmax() -> Outcome {
    let g = Grid::new(0.0, 1.0, 1.0, 5, 1).unwrap();
    let stats = QuantileStats { class_id: 0, q_low: 0.1, q_high: 0.9, sample_count: 100 };
    let r = Probabilities::new(g.clone(), 0, vec![0.1, 0.9, 0.0, 1.0, f64::NAN]).unwrap();
    let n = normalize_raster(&r, &stats, 1e-6).map_err(|e| e.to_string())?;
    let v = n.values();
    check(v[0] == 0.0, || format!("p = q_low -> {}", v[0]))?;
    check((v[1] - 0.8 / 0.800001).abs() < 1e-12 && v[1] < 1.0, || format!("p = q_high -> {}", v[1]))?;
    check(v[2] == 0.0 && v[3] == 1.0, || format!("clipping -> {}, {}", v[2], v[3]))?;
    check(v[4].is_nan(), || "NoData must pass through".into())?;

    let flat = QuantileStats { class_id: 0, q_low: 0.4, q_high: 0.4, sample_count: 10 };
    let r = Probabilities::new(g.clone(), 0, vec![0.4, 0.4, 0.3, 0.5, 0.4]).unwrap();
    let n = normalize_raster(&r, &flat, 1e-6).map_err(|e| e.to_string())?;
    check(n.values().iter().all(|x| x.is_finite()), || "constant class produced non-finite values".into())?;
    check(n.values() == [0.0, 0.0, 0.0, 1.0, 0.0], || format!("constant class -> {:?}", n.values()))?;

    let nan = f64::NAN;
    let pixels = [
        ([0.2, 0.7, 0.1, 0.0, 0.0], 1u8),
        ([0.5, 0.5, 0.1, 0.0, 0.0], 0),
        ([nan; 5], UNLABELED),
        ([nan, 0.3, nan, 0.3, 0.1], 1),
        ([0.0; 5], 0),
    ];
    let rasters: Vec<Probabilities> =
        (0..5).map(|c| Probabilities::new(g.clone(), c, pixels.iter().map(|(p, _)| p[c]).collect()).unwrap()).collect();
    let labels = argmax_label(&rasters, 5).map_err(|e| e.to_string())?;
    let want: Vec<u8> = pixels.iter().map(|(_, l)| *l).collect();
    check(labels.labels == want, || format!("argmax {:?} vs {want:?}", labels.labels))?;
    Ok("anchors, clipping, constant class, tie rule, all-NoData".into())
}

// ── 7 ───────────────────────────────────────────────────────────────────────

fn flood_fill(mask: &[bool], w: usize, h: usize) -> Vec<Vec<(u32, u32)>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = q.pop_front() {
            let (c, r) = ((i % w) as i64, (i / w) as i64);
            comp.push((c as u32, r as u32));
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (cc, rr) = (c + dc, r + dr);
                    if cc < 0 || rr < 0 || cc >= w as i64 || rr >= h as i64 {
                        continue;
                    }
                    let j = rr as usize * w + cc as usize;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        q.push_back(j);
                    }
                }
            }
        }
        comp.sort_by_key(|&(c, r)| (r, c));
        out.push(comp);
    }
    out
}

fn brute_length(pixels: &[(u32, u32)], s: f64) -> f64 {
    let mut best = 0.0f64;
    for a in pixels {
        for b in pixels {
            best = best.max((a.0 as f64 - b.0 as f64).hypot(a.1 as f64 - b.1 as f64));
        }
    }
    best * s + s
}

fn components_and_lengths() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cat = ClassCatalog::default_six();
    for m in 0..200 {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let density = rng.random_range(0.2..0.7);
        let labels: Vec<u8> =
            (0..w * h).map(|_| if rng.random_bool(density) { 5 } else { rng.random_range(0..5) }).collect();
        let mask: Vec<bool> = labels.iter().map(|&l| l == 5).collect();
        let r = Labels::new(Grid::new(0.0, h as f64, 0.01, w, h).unwrap(), labels).unwrap();
        let oracle = flood_fill(&mask, w, h);
        let got = connected_components(&r, &cat, 5, Connectivity::Eight, 1).map_err(|e| e.to_string())?;
        let got_sets: BTreeSet<Vec<(u32, u32)>> = got.iter().map(|i| i.pixels.clone()).collect();
        let want_sets: BTreeSet<Vec<(u32, u32)>> = oracle.iter().cloned().collect();
        check(got_sets == want_sets, || format!("mask {m}: component sets differ"))?;
        let firsts: Vec<(u32, u32)> = got.iter().map(|i| (i.pixels[0].1, i.pixels[0].0)).collect();
        check(firsts.windows(2).all(|p| p[0] < p[1]), || format!("mask {m}: not ordered by first pixel"))?;
        let kept = connected_components(&r, &cat, 5, Connectivity::Eight, 4).map_err(|e| e.to_string())?;
        check(kept.len() == oracle.iter().filter(|c| c.len() >= 4).count(), || format!("mask {m}: speckle filter"))?;
        for i in &got {
            let want = brute_length(&i.pixels, 0.01);
            check((i.length_m - want).abs() < 1e-12, || format!("mask {m}: length {} vs {want}", i.length_m))?;
            // translation and 90° rotation invariance
            let shifted: Vec<(u32, u32)> = i.pixels.iter().map(|&(c, r)| (c + 37, r + 11)).collect();
            let rotated: Vec<(u32, u32)> = i.pixels.iter().map(|&(c, r)| (h as u32 - 1 - r, c)).collect();
            let l = longest_axis(&i.pixels, 0.01).unwrap();
            check(longest_axis(&shifted, 0.01).unwrap() == l, || format!("mask {m}: translation changed length"))?;
            check(longest_axis(&rotated, 0.01).unwrap() == l, || format!("mask {m}: rotation changed length"))?;
            check(l >= 0.01, || "length below one spacing".into())?;
        }
    }
    // filled ellipses with known major axis
    let s = 0.01;
    for e in 0..40 {
        let semi_a = rng.random_range(5.0..40.0);
        let semi_b = rng.random_range(2.0..semi_a);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let (cx, cy) = (rng.random_range(45.0..55.0), rng.random_range(45.0..55.0));
        let pixels: Vec<(u32, u32)> = (0..100u32)
            .flat_map(|r| (0..100u32).map(move |c| (c, r)))
            .filter(|&(c, r)| {
                let (dx, dy) = (c as f64 + 0.5 - cx, r as f64 + 0.5 - cy);
                let (u, v) = (dx * theta.cos() + dy * theta.sin(), -dx * theta.sin() + dy * theta.cos());
                (u / semi_a).powi(2) + (v / semi_b).powi(2) <= 1.0
            })
            .collect();
        let major = 2.0 * semi_a * s;
        let l = longest_axis(&pixels, s).unwrap();
        check((l - major).abs() <= 2.0 * s, || format!("ellipse {e}: length {l} vs major axis {major}"))?;
    }
    Ok("200 masks vs flood fill, invariances, 40 ellipses within 2 spacings".into())
}

// ── 8 ───────────────────────────────────────────────────────────────────────

/// Accuracy of coarse labels against truth, skipping the 1-cell band around
/// truth class boundaries and pixels left unlabeled (outside the hull).
fn interior_accuracy(truth: &Labels, pred: &Labels) -> f64 {
    let (w, h) = (truth.width(), truth.height());
    let (mut ok, mut n) = (0u64, 0u64);
    for r in 0..h {
        for c in 0..w {
            let t = truth.get(c, r);
            let p = pred.get(c, r);
            if p == UNLABELED {
                continue;
            }
            let band = (r.saturating_sub(1)..=(r + 1).min(h - 1))
                .any(|rr| (c.saturating_sub(1)..=(c + 1).min(w - 1)).any(|cc| truth.get(cc, rr) != t));
            if band {
                continue;
            }
            n += 1;
            ok += u64::from(p == t);
        }
    }
    ok as f64 / n as f64
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let cat = ClassCatalog::default_five();
    let run = |seed: u64, sigma: f64| -> Result<f64, String> {
        let s = synth_scene::<f64>(&SynthParams::new(seed, 50.0, 0.5, 0.3, sigma), &cat).map_err(|e| e.to_string())?;
        let (labels, _) =
            coarse_labels(&s.survey_points, &s.ground_truth.grid, 0.01, 0.99, 1e-6).map_err(|e| e.to_string())?;
        Ok(interior_accuracy(&s.ground_truth, &labels))
    };
    let base = run(8, 0.0)?;
    check(base >= 0.95, || format!("sigma 0 accuracy {base:.4} < 0.95"))?;
    let sigmas = [0.0, 0.2, 0.35, 0.5];
    let mut means = Vec::new();
    for &sigma in &sigmas {
        let accs = (0..10).map(|seed| run(100 + seed, sigma)).collect::<Result<Vec<_>, _>>()?;
        means.push(accs.iter().sum::<f64>() / accs.len() as f64);
    }
    check(means.windows(2).all(|m| m[1] <= m[0]), || format!("mean accuracy not non-increasing in sigma: {means:?}"))?;
    within(start.elapsed(), 60.0, "end-to-end suite")?;
    let curve: Vec<String> = sigmas.iter().zip(&means).map(|(s, m)| format!("{s}:{m:.4}")).collect();
    Ok(format!("sigma 0 accuracy {base:.4}; mean by sigma {}; {:.1} s", curve.join(" "), start.elapsed().as_secs_f64()))
}

// ── 9 ───────────────────────────────────────────────────────────────────────

fn files_under(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn distillation_round_trip() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let cat = ClassCatalog::default_five();
    let scene = synth_scene::<f64>(&SynthParams::new(9, 30.0, 0.5, 0.3, 0.0), &cat).map_err(|e| e.to_string())?;
    let r0 = DatasetRound::initial(&scene.ground_truth, &cat, 32, 0.5, 10).map_err(|e| e.to_string())?;
    let h = TrainingHyperparams::default();
    dataset::write_round(root, &r0, &h).map_err(|e| e.to_string())?;
    let masks = dataset::mock_segment(&r0.patches, &cat, 0.0, 1).map_err(|e| e.to_string())?;
    dataset::write_masks(root, 0, &masks).map_err(|e| e.to_string())?;
    let m0 = dataset::read_manifest::<f64>(root, 0).map_err(|e| e.to_string())?;
    let read_back = dataset::read_masks::<f64>(root, 0).map_err(|e| e.to_string())?;
    let r1 = dataset::distill_round(&m0, &read_back).map_err(|e| e.to_string())?;
    dataset::write_round(root, &r1, &h).map_err(|e| e.to_string())?;

    check(r1.patches == r0.patches, || "round 1 annotations differ from round 0".into())?;
    let mut a = r0.manifest.clone();
    let mut b = r1.manifest.clone();
    a.round = 0;
    b.round = 0;
    a.parent = None;
    b.parent = None;
    check(a == b, || "manifests differ beyond round/parent".into())?;
    dataset::verify_chain(root).map_err(|e| format!("clean chain failed: {e}"))?;

    let referenced: Vec<_> = files_under(root).into_iter().filter(|p| !p.ends_with("train_config.json")).collect();
    for p in &referenced {
        let original = fs::read(p).unwrap();
        let mut flipped = original.clone();
        let at = original.len() / 2;
        flipped[at] ^= 0x01;
        fs::write(p, &flipped).unwrap();
        let verdict = dataset::verify_chain(root);
        fs::write(p, &original).unwrap();
        check(verdict.is_err(), || format!("flipping a byte of {} went unnoticed", p.display()))?;
    }
    dataset::verify_chain(root).map_err(|e| format!("restored chain failed: {e}"))?;
    Ok(format!(
        "{} tiles; fixed point holds; {} referenced files each tamper-evident",
        r0.manifest.tiles.len(),
        referenced.len()
    ))
}

// ── 10 ──────────────────────────────────────────────────────────────────────

fn reefmap(workdir: &Path, workers: usize, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_reefmap"))
        .args(args)
        .arg("--workers")
        .arg(workers.to_string())
        .env("REEF_WORKDIR", workdir)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("reefmap {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn chain(workdir: &Path, workers: usize) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let w = workdir.to_str().unwrap();
    let p = |rel: &str| format!("{w}/{rel}");
    reefmap(workdir, workers, &["synth", "--seed", "11", "--extent", "40", "--noise", "0.1"])?;
    reefmap(workdir, workers, &["ingest", "--input", &p("run/synth/points.csv")])?;
    reefmap(workdir, workers, &["spacing"])?;
    reefmap(workdir, workers, &["rasterize"])?;
    reefmap(workdir, workers, &["normalize"])?;
    reefmap(workdir, workers, &["label"])?;
    reefmap(workdir, workers, &["upsample", "--reference", &p("run/synth/truth.grf")])?;
    reefmap(workdir, workers, &["evaluate", "--truth", &p("run/synth/truth.grf"), "--zone", "synthetic"])?;
    reefmap(workdir, workers, &["analyze", "--points", &p("run/ingest/points.csv")])?;
    reefmap(workdir, workers, &["tile", "--tile-size", "32"])?;
    reefmap(workdir, workers, &["distill", "mock", "--noise", "0.05", "--seed", "3"])?;
    reefmap(workdir, workers, &["distill", "next"])?;
    reefmap(workdir, workers, &["distill", "verify"])?;
    reefmap(workdir, workers, &["report"])?;
    let run = workdir.join("run");
    Ok(files_under(&run)
        .into_iter()
        .map(|f| (f.strip_prefix(&run).unwrap().to_string_lossy().into_owned(), fs::read(&f).unwrap()))
        .collect())
}

fn determinism_and_performance() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (w1, w4) = (tmp.path().join("w1"), tmp.path().join("w4"));
    fs::create_dir_all(&w1).unwrap();
    fs::create_dir_all(&w4).unwrap();
    let one = chain(&w1, 1)?;
    let four = chain(&w4, 4)?;
    check(one.keys().eq(four.keys()), || "different file sets for --workers 1 and 4".into())?;
    for (name, bytes) in &one {
        check(&four[name] == bytes, || format!("{name} differs between --workers 1 and 4"))?;
    }

    // 8192² evaluation
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 8192;
    let grid = Grid::new(0.0, n as f64, 1.0, n, n).unwrap();
    let mut t = vec![0u8; n * n];
    rng.fill(&mut t[..]);
    let p: Vec<u8> = t.iter().map(|&x| x % 6).collect();
    let t: Vec<u8> = t.iter().map(|&x| (x >> 3) % 6).collect();
    let cat = ClassCatalog::default_six();
    let truth = Labels::new(grid.clone(), t).unwrap();
    let pred = Labels::new(grid, p).unwrap();
    let start = Instant::now();
    let counts = confusion_matrix(&truth, &pred, &cat).map_err(|e| e.to_string())?;
    let report = EvalReport::from_counts("perf", &counts).map_err(|e| e.to_string())?;
    let eval_time = start.elapsed();
    check(counts.evaluated_pixels == (n * n) as u64, || "pixel count".into())?;
    let _ = report;
    within(eval_time, 2.0, "8192x8192 evaluation")?;

    // 10⁵ points, 5 classes, 2048² grid
    let cat5 = ClassCatalog::default_five();
    let points: Vec<PointPrediction<f64>> = (0..100_000u64)
        .map(|i| {
            let probs: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            PointPrediction {
                session_id: "s".into(),
                seq: i,
                x: rng.random_range(0.0..2048.0),
                y: rng.random_range(0.0..2048.0),
                probs,
            }
        })
        .collect();
    let set = PointPredictionSet::from_points(cat5, points).map_err(|e| e.to_string())?;
    let grid = Grid::new(0.0, 2048.0, 1.0, 2048, 2048).unwrap();
    let start = Instant::now();
    let rasters = rasterize_set(&set, &grid).map_err(|e| e.to_string())?;
    let raster_time = start.elapsed();
    check(rasters.len() == 5, || "class count".into())?;
    within(raster_time, 5.0, "rasterizing 10^5 points onto 4 MP")?;
    Ok(format!(
        "{} files identical for workers 1/4; eval 8192² {:.2} s; 10^5 pts x 5 classes -> 2048² {:.2} s",
        one.len(),
        eval_time.as_secs_f64(),
        raster_time.as_secs_f64()
    ))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("mean IoU reproduces the printed table rows", mean_iou_tables),
        ("linear interpolation is exact on affine fields", interpolation_exactness),
        ("triangulation satisfies the empty-circumcircle property", delaunay_validity),
        ("percentiles match a sort-based oracle", quantile_oracle),
        ("confusion, accuracy and IoU match brute-force tallies", metrics_oracle),
        ("normalization and argmax unit anchors", normalization_and_argmax),
        ("components, lengths and ellipse axes", components_and_lengths),
        ("synthetic end-to-end accuracy", end_to_end),
        ("distillation round-trip and tamper evidence", distillation_round_trip),
        ("determinism across workers and performance", determinism_and_performance),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
