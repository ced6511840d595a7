use crate::config::Connectivity;
use crate::error::Result;
use crate::raster::LabelMap;

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let gp = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the older label as root.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Already-visited neighbors in raster order.
fn causal_offsets(conn: Connectivity) -> &'static [(isize, isize)] {
    match conn {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    }
}

/// Two-pass union-find labeling. Pixels are linked when `same(a, b)` holds
/// for their values; pixels with `skip(value)` get region 0. Regions are
/// numbered from 1 in order of first encounter in raster order.
fn two_pass(
    values: &[u32],
    w: usize,
    h: usize,
    conn: Connectivity,
    skip: impl Fn(u32) -> bool,
    same: impl Fn(u32, u32) -> bool,
) -> (Vec<u32>, usize) {
    const NONE: u32 = u32::MAX;
    let mut uf = UnionFind::new();
    let mut prov = vec![NONE; w * h];
    for v in 0..h {
        for u in 0..w {
            let i = v * w + u;
            let a = values[i];
            if skip(a) {
                continue;
            }
            let mut label = NONE;
            for &(dx, dy) in causal_offsets(conn) {
                let (x, y) = (u as isize + dx, v as isize + dy);
                if x < 0 || y < 0 || x >= w as isize {
                    continue;
                }
                let j = y as usize * w + x as usize;
                if prov[j] == NONE || !same(a, values[j]) {
                    continue;
                }
                if label == NONE {
                    label = prov[j];
                } else {
                    uf.union(label, prov[j]);
                }
            }
            prov[i] = if label == NONE { uf.make() } else { label };
        }
    }
    let mut remap = vec![0u32; uf.parent.len()];
    let mut next = 0u32;
    let out = prov
        .iter()
        .map(|&p| {
            if p == NONE {
                return 0;
            }
            let r = uf.find(p) as usize;
            if remap[r] == 0 {
                next += 1;
                remap[r] = next;
            }
            remap[r]
        })
        .collect();
    (out, next as usize)
}

/// Splits a label raster into connected regions of equal value (every value,
/// including 0, forms regions), numbered `1..` in raster order.
pub fn label_regions(values: &[u32], w: usize, h: usize, conn: Connectivity) -> Vec<u32> {
    two_pass(values, w, h, conn, |_| false, |a, b| a == b).0
}

/// Connected components of the nonzero pixels of `mask`, numbered `1..=n`
/// in order of first encounter in raster order. Returns the labels and `n`.
pub fn connected_components(mask: &LabelMap, conn: Connectivity) -> Result<(LabelMap, usize)> {
    let (w, h) = mask.dims();
    let (labels, n) = two_pass(mask.labels(), w, h, conn, |a| a == 0, |_, _| true);
    Ok((LabelMap::new(w, h, labels)?, n))
}

/// Breadth-first flood fill with the same numbering as [`label_regions`].
#[cfg(test)]
pub(crate) fn flood_fill_regions(
    values: &[u32],
    w: usize,
    h: usize,
    conn: Connectivity,
) -> Vec<u32> {
    let mut out = vec![0u32; w * h];
    let mut next = 0;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..w * h {
        if out[start] != 0 {
            continue;
        }
        next += 1;
        out[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (u, v) = ((i % w) as isize, (i / w) as isize);
            for &(dx, dy) in conn.offsets() {
                let (x, y) = (u + dx, v + dy);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
                    continue;
                }
                let j = y as usize * w + x as usize;
                if out[j] == 0 && values[j] == values[start] {
                    out[j] = next;
                    queue.push_back(j);
                }
            }
        }
    }
    out
}
