//! Farthest pair of lattice points via convex hull and rotating calipers.
//! All arithmetic is on integers, so the result is exact.

type P = (i64, i64);

fn cross(o: P, a: P, b: P) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn dist2(a: P, b: P) -> i64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    dx * dx + dy * dy
}

/// Counter-clockwise hull without collinear points (monotone chain).
pub(crate) fn convex_hull(points: &[(u32, u32)]) -> Vec<P> {
    let mut pts: Vec<P> = points.iter().map(|&(x, y)| (x as i64, y as i64)).collect();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<P> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &P>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Squared diameter of a point set, in lattice units.
pub(crate) fn diameter2(points: &[(u32, u32)]) -> i64 {
    let h = convex_hull(points);
    let n = h.len();
    match n {
        0 | 1 => 0,
        2 => dist2(h[0], h[1]),
        _ => {
            let mut best = 0;
            let mut j = 1;
            for i in 0..n {
                let ni = (i + 1) % n;
                while cross(h[i], h[ni], h[(j + 1) % n]) > cross(h[i], h[ni], h[j]) {
                    j = (j + 1) % n;
                }
                best = best.max(dist2(h[i], h[j])).max(dist2(h[ni], h[j]));
            }
            best
        }
    }
}
