//! Sweep-line Delaunay triangulation with exact predicates.
//!
//! Points are sorted lexicographically and inserted in that order, so every
//! new point lies outside the current hull. Each insertion stitches a fan of
//! triangles onto the visible hull edges and restores the empty-circumcircle
//! property with Lawson flips. Cocircular configurations are never flipped,
//! which makes the output a function of the sorted point set alone.

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

const EMPTY: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct Triangulation<T: Scalar> {
    /// Unique input points in lexicographic `(x, y)` order.
    vertices: Vec<(T, T)>,
    /// Input index each vertex came from (first occurrence of a duplicate).
    source_index: Vec<usize>,
    /// Counter-clockwise vertex triples.
    triangles: Vec<[usize; 3]>,
    /// Hull vertices, counter-clockwise.
    hull: Vec<usize>,
}

impl<T: Scalar> Triangulation<T> {
    pub fn vertices(&self) -> &[(T, T)] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn source_index(&self) -> &[usize] {
        &self.source_index
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn hull(&self) -> &[usize] {
        &self.hull
    }

    /// Picks the per-vertex values out of a per-input-point list.
    pub fn vertex_values<V: Copy>(&self, per_point: &[V]) -> Result<Vec<V>> {
        let needed = self.source_index.iter().max().map_or(0, |m| m + 1);
        if per_point.len() < needed {
            return Err(Error::LengthMismatch { expected: needed, got: per_point.len() });
        }
        Ok(self.source_index.iter().map(|&i| per_point[i]).collect())
    }

    #[inline]
    pub(crate) fn coord(&self, v: usize) -> Coord<f64> {
        let (x, y) = self.vertices[v];
        Coord { x: x.to_f64_lossy(), y: y.to_f64_lossy() }
    }
}

/// Delaunay triangulation of `points`; exact duplicates collapse onto their first occurrence.
pub fn delaunay_triangulate<T: Scalar>(points: &[(T, T)]) -> Result<Triangulation<T>> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints { needed: 3, got: points.len() });
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::BadParameters("point coordinates must be finite".into()));
    }

    let mut order: Vec<usize> = (0..points.len()).collect();
    // stable: the first occurrence of a duplicate stays first in its run
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.0.to_f64_lossy().total_cmp(&pb.0.to_f64_lossy()).then(pa.1.to_f64_lossy().total_cmp(&pb.1.to_f64_lossy()))
    });
    order.dedup_by(|b, a| points[*a] == points[*b]);

    let vertices: Vec<(T, T)> = order.iter().map(|&i| points[i]).collect();
    let coords: Vec<Coord<f64>> =
        vertices.iter().map(|&(x, y)| Coord { x: x.to_f64_lossy(), y: y.to_f64_lossy() }).collect();
    if coords.len() < 3 {
        return Err(Error::AllCollinear);
    }

    let mut sweep = Sweep::new(coords);
    sweep.run()?;
    let hull = sweep.hull_sequence();
    let triangles = sweep.triangles.chunks_exact(3).map(|t| [t[0], t[1], t[2]]).collect();
    Ok(Triangulation { vertices, source_index: order, triangles, hull })
}

struct Sweep {
    pts: Vec<Coord<f64>>,
    triangles: Vec<usize>,
    halfedges: Vec<usize>,
    hull_next: Vec<usize>,
    hull_prev: Vec<usize>,
    /// Halfedge `v -> hull_next[v]` for hull vertices.
    hull_tri: Vec<usize>,
    hull_start: usize,
    stack: Vec<usize>,
}

impl Sweep {
    fn new(pts: Vec<Coord<f64>>) -> Self {
        let n = pts.len();
        Sweep {
            pts,
            triangles: Vec::with_capacity(6 * n),
            halfedges: Vec::with_capacity(6 * n),
            hull_next: vec![EMPTY; n],
            hull_prev: vec![EMPTY; n],
            hull_tri: vec![EMPTY; n],
            hull_start: 0,
            stack: Vec::new(),
        }
    }

    #[inline]
    fn orient(&self, a: usize, b: usize, c: usize) -> f64 {
        orient2d(self.pts[a], self.pts[b], self.pts[c])
    }

    fn link(&mut self, a: usize, b: usize) {
        self.halfedges[a] = b;
        if b != EMPTY {
            self.halfedges[b] = a;
        }
    }

    fn add_triangle(&mut self, i0: usize, i1: usize, i2: usize, a: usize, b: usize, c: usize) -> usize {
        let t = self.triangles.len();
        self.triangles.extend_from_slice(&[i0, i1, i2]);
        self.halfedges.extend_from_slice(&[EMPTY, EMPTY, EMPTY]);
        self.link(t, a);
        self.link(t + 1, b);
        self.link(t + 2, c);
        t
    }

    fn run(&mut self) -> Result<()> {
        let n = self.pts.len();
        let k = (2..n).find(|&k| self.orient(0, 1, k) != 0.0).ok_or(Error::AllCollinear)?;
        self.seed_fan(k);
        for i in k + 1..n {
            self.insert(i);
        }
        Ok(())
    }

    /// Triangulates the collinear prefix `0..k` against the first off-line point `k`.
    fn seed_fan(&mut self, k: usize) {
        let left = self.orient(0, 1, k) > 0.0;
        let mut prev_shared = EMPTY;
        for j in 0..k - 1 {
            let t = if left {
                // (p_j, p_j+1, p_k); edge p_j -> p_j+1 is on the hull
                let t = self.add_triangle(j, j + 1, k, EMPTY, EMPTY, prev_shared);
                prev_shared = t + 1;
                self.hull_tri[j] = t;
                t
            } else {
                // (p_j+1, p_j, p_k); edge p_j+1 -> p_j is on the hull
                let t = self.add_triangle(j + 1, j, k, EMPTY, prev_shared, EMPTY);
                prev_shared = t + 2;
                self.hull_tri[j + 1] = t;
                t
            };
            if j == 0 {
                if left {
                    self.hull_tri[k] = t + 2;
                } else {
                    self.hull_tri[0] = t + 1;
                }
            }
            if j == k - 2 {
                if left {
                    self.hull_tri[k - 1] = t + 1;
                } else {
                    self.hull_tri[k] = t + 2;
                }
            }
        }
        let cycle: Vec<usize> = if left {
            (0..=k).collect()
        } else {
            std::iter::once(0).chain(std::iter::once(k)).chain((1..k).rev()).collect()
        };
        for (w, &v) in cycle.iter().enumerate() {
            let nx = cycle[(w + 1) % cycle.len()];
            self.hull_next[v] = nx;
            self.hull_prev[nx] = v;
        }
        self.hull_start = k;
    }

    fn insert(&mut self, i: usize) {
        let start = i - 1;
        let visible = |s: &Self, a: usize| s.orient(a, s.hull_next[a], i) < 0.0;
        let mut e = if visible(self, start) {
            start
        } else if visible(self, self.hull_prev[start]) {
            self.hull_prev[start]
        } else {
            let mut v = self.hull_next[start];
            while !visible(self, v) {
                v = self.hull_next[v];
                assert!(v != start, "point outside the hull sees no hull edge");
            }
            v
        };

        let t = self.add_triangle(e, i, self.hull_next[e], EMPTY, EMPTY, self.hull_tri[e]);
        self.hull_tri[i] = self.legalize(t + 2);
        self.hull_tri[e] = t;

        let mut nv = self.hull_next[e];
        loop {
            let q = self.hull_next[nv];
            if self.orient(nv, q, i) >= 0.0 {
                break;
            }
            let t = self.add_triangle(nv, i, q, self.hull_tri[i], EMPTY, self.hull_tri[nv]);
            self.hull_tri[i] = self.legalize(t + 2);
            self.hull_next[nv] = EMPTY;
            self.hull_tri[nv] = EMPTY;
            nv = q;
        }

        loop {
            let q = self.hull_prev[e];
            if self.orient(q, e, i) >= 0.0 {
                break;
            }
            let t = self.add_triangle(q, i, e, EMPTY, self.hull_tri[e], self.hull_tri[q]);
            self.legalize(t + 2);
            self.hull_tri[q] = t;
            self.hull_next[e] = EMPTY;
            self.hull_tri[e] = EMPTY;
            e = q;
        }

        self.hull_start = e;
        self.hull_prev[i] = e;
        self.hull_next[e] = i;
        self.hull_prev[nv] = i;
        self.hull_next[i] = nv;
    }

    /// Flips edges until every triangle touched is locally Delaunay.
    /// Returns the halfedge that ends up opposite the starting edge's apex.
    fn legalize(&mut self, mut a: usize) -> usize {
        let mut ar;
        loop {
            let b = self.halfedges[a];
            let a0 = a - a % 3;
            ar = a0 + (a + 2) % 3;
            if b == EMPTY {
                match self.stack.pop() {
                    Some(x) => {
                        a = x;
                        continue;
                    }
                    None => break,
                }
            }
            let b0 = b - b % 3;
            let al = a0 + (a + 1) % 3;
            let bl = b0 + (b + 2) % 3;
            let p0 = self.triangles[ar];
            let pr = self.triangles[a];
            let pl = self.triangles[al];
            let p1 = self.triangles[bl];
            let illegal = incircle(self.pts[p0], self.pts[pr], self.pts[pl], self.pts[p1]) > 0.0;
            if illegal {
                self.triangles[a] = p1;
                self.triangles[b] = p0;
                let hbl = self.halfedges[bl];
                if hbl == EMPTY {
                    self.retarget_hull_edge(bl, a);
                }
                self.link(a, hbl);
                let har = self.halfedges[ar];
                self.link(b, har);
                self.link(ar, bl);
                let br = b0 + (b + 1) % 3;
                self.stack.push(br);
            } else {
                match self.stack.pop() {
                    Some(x) => a = x,
                    None => break,
                }
            }
        }
        ar
    }

    fn retarget_hull_edge(&mut self, from: usize, to: usize) {
        let mut e = self.hull_start;
        for _ in 0..self.pts.len() {
            if self.hull_tri[e] == from {
                self.hull_tri[e] = to;
                return;
            }
            e = self.hull_prev[e];
            if e == self.hull_start || e == EMPTY {
                break;
            }
        }
        if let Some(slot) = self.hull_tri.iter_mut().find(|h| **h == from) {
            *slot = to;
        }
    }

    fn hull_sequence(&self) -> Vec<usize> {
        let mut out = vec![self.hull_start];
        let mut v = self.hull_next[self.hull_start];
        while v != self.hull_start {
            out.push(v);
            v = self.hull_next[v];
        }
        // start from the lexicographically smallest vertex
        let min = out.iter().enumerate().min_by_key(|(_, v)| **v).map_or(0, |(i, _)| i);
        out.rotate_left(min);
        out
    }
}
