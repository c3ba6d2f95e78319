//! Ungerboeck-style set partitioning of a finite point set.
//!
//! Each split divides a subset into two equal halves so that the smaller of
//! the two intra-subset minimum distances is as large as possible. Subsets of
//! up to 16 points are split by exhaustive search; larger ones by a greedy
//! Kruskal pass that puts the closest pairs on opposite sides. The half that
//! contains the lowest point index always receives bit 0.

use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Point, Result};

const EXHAUSTIVE_LIMIT: usize = 16;
const REL_TOL: f64 = 1e-9;

/// Returns, for every point, its partition label: bit `l` of the label is the
/// side taken at level `l` of the partition chain.
pub fn set_partition_labels(points: &[Point]) -> Result<Vec<usize>> {
    let n = points.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Codebook(alloc::format!(
            "set partitioning needs a power-of-two point count, got {n}"
        )));
    }
    let mut labels = vec![0usize; n];
    let all: Vec<usize> = (0..n).collect();
    split_recursive(points, &all, 0, &mut labels)?;
    Ok(labels)
}

fn split_recursive(points: &[Point], subset: &[usize], level: usize, labels: &mut [usize]) -> Result<()> {
    if subset.len() < 2 {
        return Ok(());
    }
    let (zero, one) = split(points, subset)?;
    for &i in &one {
        labels[i] |= 1 << level;
    }
    split_recursive(points, &zero, level + 1, labels)?;
    split_recursive(points, &one, level + 1, labels)
}

/// Minimum pairwise squared distance inside `subset` (infinite for < 2 points).
pub fn min_distance_sqr(points: &[Point], subset: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            best = best.min(points[i].dist_sqr(points[j]));
        }
    }
    best
}

fn split(points: &[Point], subset: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    if subset.len() <= EXHAUSTIVE_LIMIT {
        Ok(split_exhaustive(points, subset))
    } else {
        split_kruskal(points, subset)
    }
}

/// Score of a split: (min intra distance, minus number of pairs at that distance).
fn split_score(points: &[Point], a: &[usize], b: &[usize]) -> (f64, i64) {
    let d = min_distance_sqr(points, a).min(min_distance_sqr(points, b));
    let count = |s: &[usize]| {
        let mut c = 0i64;
        for (x, &i) in s.iter().enumerate() {
            for &j in &s[x + 1..] {
                if points[i].dist_sqr(points[j]) <= d * (1.0 + REL_TOL) {
                    c += 1;
                }
            }
        }
        c
    };
    (d, -(count(a) + count(b)))
}

fn better(a: (f64, i64), b: (f64, i64)) -> bool {
    if a.0 > b.0 * (1.0 + REL_TOL) {
        return true;
    }
    if a.0 < b.0 * (1.0 - REL_TOL) {
        return false;
    }
    a.1 > b.1
}

fn split_exhaustive(points: &[Point], subset: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let half = n / 2;
    // Enumerate half-size subsets that contain the lowest index, in
    // lexicographic order of the chosen positions.
    let mut choose: Vec<usize> = (0..half).collect();
    let mut best: Option<((f64, i64), Vec<usize>)> = None;
    loop {
        let zero: Vec<usize> = choose.iter().map(|&p| sorted[p]).collect();
        let one: Vec<usize> = (0..n)
            .filter(|p| !choose.contains(p))
            .map(|p| sorted[p])
            .collect();
        let score = split_score(points, &zero, &one);
        match &best {
            Some((s, _)) if !better(score, *s) => {}
            _ => best = Some((score, choose.clone())),
        }
        // advance combination, keeping position 0 fixed
        let mut i = half;
        loop {
            if i <= 1 {
                let chosen = best.map(|(_, c)| c).unwrap_or_default();
                let zero = chosen.iter().map(|&p| sorted[p]).collect();
                let one = (0..n).filter(|p| !chosen.contains(p)).map(|p| sorted[p]).collect();
                return (zero, one);
            }
            i -= 1;
            if choose[i] < n - half + i {
                choose[i] += 1;
                for j in i + 1..half {
                    choose[j] = choose[j - 1] + 1;
                }
                break;
            }
        }
    }
}

struct ParityUnionFind {
    parent: Vec<usize>,
    parity: Vec<u8>,
}

impl ParityUnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            parity: vec![0; n],
        }
    }

    /// Root and parity of `x` relative to its root.
    fn find(&mut self, x: usize) -> (usize, u8) {
        let mut path = Vec::new();
        let mut cur = x;
        while self.parent[cur] != cur {
            path.push(cur);
            cur = self.parent[cur];
        }
        let root = cur;
        // compress, accumulating parity from the top down
        let mut acc = 0u8;
        for &node in path.iter().rev() {
            acc ^= self.parity[node];
            self.parity[node] = acc;
            self.parent[node] = root;
        }
        (root, if path.is_empty() { 0 } else { self.parity[x] })
    }

    /// Requests opposite sides for `a` and `b`; returns false on conflict.
    fn separate(&mut self, a: usize, b: usize) -> bool {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return pa != pb;
        }
        let (root, child) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[child] = root;
        self.parity[child] = pa ^ pb ^ 1;
        true
    }
}

fn split_kruskal(points: &[Point], subset: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut edges: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            edges.push((points[sorted[a]].dist_sqr(points[sorted[b]]), a, b));
        }
    }
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut uf = ParityUnionFind::new(n);
    let mut roots: BTreeSet<usize> = (0..n).collect();
    for &(_, a, b) in &edges {
        let (ra, _) = uf.find(a);
        let (rb, _) = uf.find(b);
        if ra != rb {
            uf.separate(a, b);
            roots.remove(&ra.max(rb));
            if roots.len() == 1 {
                break;
            }
        }
    }
    let (_, p0) = uf.find(0);
    let mut zero = Vec::with_capacity(n / 2);
    let mut one = Vec::with_capacity(n / 2);
    for (pos, &idx) in sorted.iter().enumerate() {
        let (_, p) = uf.find(pos);
        if p == p0 {
            zero.push(idx);
        } else {
            one.push(idx);
        }
    }
    if zero.len() != one.len() {
        return Err(Error::Codebook(
            "greedy set partition produced unequal halves".to_string(),
        ));
    }
    Ok((zero, one))
}
