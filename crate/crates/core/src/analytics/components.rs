use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::LabelRaster;
use crate::scalar::Scalar;

const BLOCK_ROWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            _ => Err(Error::BadParameters(format!("connectivity must be 4 or 8, got {n}"))),
        }
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    /// Links the larger root under the smaller so roots are canonical.
    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// First pass over one block of rows: provisional labels (1-based, 0 = not
/// in the set) and the equivalences found inside the block.
fn label_block(mask: &[bool], width: usize, rows: usize, conn: Connectivity) -> (Vec<u32>, Vec<u32>) {
    let mut labels = vec![0u32; width * rows];
    let mut uf = UnionFind { parent: vec![0] };
    for r in 0..rows {
        for c in 0..width {
            let i = r * width + c;
            if !mask[i] {
                continue;
            }
            let mut neighbours = [0u32; 4];
            let mut k = 0;
            if c > 0 && labels[i - 1] != 0 {
                neighbours[k] = labels[i - 1];
                k += 1;
            }
            if r > 0 {
                let up = i - width;
                if labels[up] != 0 {
                    neighbours[k] = labels[up];
                    k += 1;
                }
                if conn == Connectivity::Eight {
                    if c > 0 && labels[up - 1] != 0 {
                        neighbours[k] = labels[up - 1];
                        k += 1;
                    }
                    if c + 1 < width && labels[up + 1] != 0 {
                        neighbours[k] = labels[up + 1];
                        k += 1;
                    }
                }
            }
            if k == 0 {
                let id = uf.parent.len() as u32;
                uf.parent.push(id);
                labels[i] = id;
            } else {
                let first = neighbours[0];
                labels[i] = first;
                for &n in &neighbours[1..k] {
                    uf.union(first, n);
                }
            }
        }
    }
    (labels, uf.parent)
}

/// Pixel sets `(col, row)` of the maximal connected components of `class`,
/// each listed in raster order, components ordered by their first pixel.
pub(crate) fn component_pixels<T: Scalar>(
    labels: &LabelRaster<T>,
    class: u8,
    conn: Connectivity,
) -> Vec<Vec<(u32, u32)>> {
    let width = labels.width();
    let height = labels.height();
    if width == 0 || height == 0 {
        return Vec::new();
    }
    let mask: Vec<bool> = labels.labels.par_iter().map(|&l| l == class).collect();
    let blocks: Vec<(Vec<u32>, Vec<u32>)> =
        mask.par_chunks(width * BLOCK_ROWS).map(|chunk| label_block(chunk, width, chunk.len() / width, conn)).collect();

    // stitch block-local label spaces into one
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut parent = vec![0u32];
    for (_, local) in &blocks {
        let off = parent.len() as u32 - 1;
        offsets.push(off);
        parent.extend(local[1..].iter().map(|&p| p + off));
    }
    let mut uf = UnionFind { parent };
    let global = |b: usize, l: u32| if l == 0 { 0 } else { l + offsets[b] };
    for b in 1..blocks.len() {
        let above = &blocks[b - 1].0;
        let last = &above[above.len() - width..];
        let first = &blocks[b].0[..width];
        for (c, &f) in first.iter().enumerate() {
            let here = global(b, f);
            if here == 0 {
                continue;
            }
            let lo = if conn == Connectivity::Eight { c.saturating_sub(1) } else { c };
            let hi = if conn == Connectivity::Eight { (c + 1).min(width - 1) } else { c };
            for &l in &last[lo..=hi] {
                let there = global(b - 1, l);
                if there != 0 {
                    uf.union(here, there);
                }
            }
        }
    }

    // second pass: group pixels by root in order of first appearance
    let mut slot = vec![u32::MAX; uf.parent.len()];
    let mut out: Vec<Vec<(u32, u32)>> = Vec::new();
    for (b, (block, _)) in blocks.iter().enumerate() {
        let row0 = b * BLOCK_ROWS;
        for (i, &l) in block.iter().enumerate() {
            if l == 0 {
                continue;
            }
            let root = uf.find(global(b, l)) as usize;
            if slot[root] == u32::MAX {
                slot[root] = out.len() as u32;
                out.push(Vec::new());
            }
            out[slot[root] as usize].push(((i % width) as u32, (row0 + i / width) as u32));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn raster(rows: &[&str]) -> LabelRaster<f64> {
        let h = rows.len();
        let w = rows[0].len();
        let labels = rows.iter().flat_map(|r| r.bytes().map(|b| if b == b'#' { 1 } else { 0 })).collect();
        LabelRaster::new(GridSpec::new(0.0, h as f64, 1.0, w, h).unwrap(), labels).unwrap()
    }

    #[test]
    fn diagonal_touch() {
        let r = raster(&["#.", ".#"]);
        assert_eq!(component_pixels(&r, 1, Connectivity::Eight).len(), 1);
        assert_eq!(component_pixels(&r, 1, Connectivity::Four).len(), 2);
    }

    #[test]
    fn u_shape_merges_late() {
        let r = raster(&["#.#", "#.#", "###"]);
        let c = component_pixels(&r, 1, Connectivity::Four);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 7);
        assert_eq!(c[0][0], (0, 0));
    }

    #[test]
    fn spans_block_boundary() {
        // vertical line crossing several blocks, plus a diagonal step at a boundary
        let h = BLOCK_ROWS * 3;
        let labels = (0..h * 4)
            .map(|i| {
                let (c, r) = (i % 4, i / 4);
                u8::from((r < BLOCK_ROWS && c == 1) || (r >= BLOCK_ROWS && c == 2))
            })
            .collect();
        let r = LabelRaster::new(GridSpec::new(0.0, h as f64, 1.0, 4, h).unwrap(), labels).unwrap();
        assert_eq!(component_pixels(&r, 1, Connectivity::Eight).len(), 1);
        assert_eq!(component_pixels(&r, 1, Connectivity::Four).len(), 2);
    }
}
