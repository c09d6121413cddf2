//! Cluster labeling under `L^d` adjacency and the crossing events built on it.
//!
//! Cells touching only at a corner are never connected; in `d = 2` this is
//! plain nearest-neighbour connectivity.

use std::collections::{BTreeMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::index::{adjacency_offsets, cube_edges, BoundarySelector, BoxShape, LatticeCell};
use crate::models::grid::{CellSet, Grid, DENSE_LIMIT};

/// Disjoint-set forest with path halving and union by size.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(len: usize) -> Self {
        UnionFind { parent: (0..len as u32).collect(), size: vec![1; len] }
    }

    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        true
    }
}

/// Offsets of `L^d` neighbours that come later in linear order.
fn forward_offsets(dim: u32) -> Vec<Vec<i64>> {
    adjacency_offsets(dim)
        .into_iter()
        .filter(|o| o.iter().rev().find(|&&x| x != 0) == Some(&1))
        .collect()
}

#[inline]
fn shifted(coords: &[u64], off: &[i64], side: u64, out: &mut [u64]) -> bool {
    for ((o, &c), &d) in out.iter_mut().zip(coords).zip(off) {
        let v = c as i64 + d;
        if v < 0 || v as u64 >= side {
            return false;
        }
        *o = v as u64;
    }
    true
}

/// Cluster label of every occupied cell.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterLabels {
    pub shape: BoxShape,
    /// Occupied cells in increasing linear order.
    pub cells: Vec<u64>,
    /// `labels[i]` is the smallest linear index in the cluster of `cells[i]`.
    pub labels: Vec<u64>,
    pub sizes: BTreeMap<u64, usize>,
}

impl ClusterLabels {
    pub fn label_of(&self, cell: u64) -> Option<u64> {
        self.cells.binary_search(&cell).ok().map(|i| self.labels[i])
    }

    pub fn cluster_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn members(&self, label: u64) -> Vec<u64> {
        self.cells
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l == label)
            .map(|(&c, _)| c)
            .collect()
    }

    pub fn largest(&self) -> usize {
        self.sizes.values().copied().max().unwrap_or(0)
    }
}

/// Labels the occupied cells of `set`.
pub fn label_cells(set: &CellSet) -> ClusterLabels {
    let shape = set.shape();
    let cells = set.to_vec();
    let offsets = forward_offsets(shape.dim);
    let mut uf = UnionFind::new(cells.len());
    let d = shape.dim as usize;
    let mut coords = vec![0u64; d];
    let mut nb = vec![0u64; d];

    // Dense position lookup when affordable, binary search otherwise.
    let dense_map: Option<Vec<u32>> = (shape.total() <= 1 << 24).then(|| {
        let mut map = vec![u32::MAX; shape.total() as usize];
        for (i, &c) in cells.iter().enumerate() {
            map[c as usize] = i as u32;
        }
        map
    });
    let position = |idx: u64| -> Option<u32> {
        match &dense_map {
            Some(map) => Some(map[idx as usize]).filter(|&p| p != u32::MAX),
            None => cells.binary_search(&idx).ok().map(|p| p as u32),
        }
    };

    for (i, &c) in cells.iter().enumerate() {
        shape.coords_into(c, &mut coords);
        for off in &offsets {
            if shifted(&coords, off, shape.side, &mut nb) {
                if let Some(j) = position(shape.linear(&nb)) {
                    uf.union(i as u32, j);
                }
            }
        }
    }

    let mut root_label: Vec<u64> = vec![u64::MAX; cells.len()];
    let mut labels = Vec::with_capacity(cells.len());
    let mut sizes = BTreeMap::new();
    for (i, &c) in cells.iter().enumerate() {
        let r = uf.find(i as u32) as usize;
        if root_label[r] == u64::MAX {
            root_label[r] = c;
        }
        labels.push(root_label[r]);
        *sizes.entry(root_label[r]).or_insert(0) += 1;
    }
    ClusterLabels { shape, cells, labels, sizes }
}

pub fn label_clusters(g: &Grid) -> ClusterLabels {
    label_cells(g.cells())
}

/// Depth-first search inside the box region `lo..hi` (per axis, half-open)
/// from the open cells on its low face along `axis`; true once a cell on the
/// high face is reached.
pub fn crossing_in_region<S, F>(shape: BoxShape, lo: &[u64], hi: &[u64], axis: usize, sources: S, open: F) -> bool
where
    S: IntoIterator<Item = Vec<u64>>,
    F: Fn(&[u64]) -> bool,
{
    let d = shape.dim as usize;
    if lo.iter().zip(hi).any(|(l, h)| l >= h) {
        return false;
    }
    let region = BoxShape::new(0, shape.dim);
    let extents: Vec<u64> = lo.iter().zip(hi).map(|(l, h)| h - l).collect();
    let volume: u128 = extents.iter().map(|&e| e as u128).product();
    let local = |c: &[u64]| -> u64 {
        c.iter().zip(lo).zip(&extents).rev().fold(0u64, |acc, ((&x, &l), &e)| acc * e + (x - l))
    };
    let _ = region;
    let mut dense_seen = (volume <= DENSE_LIMIT).then(|| vec![0u64; (volume as usize).div_ceil(64)]);
    let mut sparse_seen: HashSet<u64> = HashSet::new();
    let mut visit = |c: &[u64]| -> bool {
        let key = local(c);
        match dense_seen.as_mut() {
            Some(bits) => {
                let (w, b) = ((key >> 6) as usize, key & 63);
                let fresh = bits[w] >> b & 1 == 0;
                bits[w] |= 1 << b;
                fresh
            }
            None => sparse_seen.insert(key),
        }
    };
    let target = hi[axis] - 1;
    let offsets = adjacency_offsets(shape.dim);
    let mut stack: Vec<u64> = Vec::new();
    let mut cur = vec![0u64; d];
    let mut nb = vec![0u64; d];
    let inside = |c: &[u64]| c.iter().zip(lo).zip(hi).all(|((&x, &l), &h)| x >= l && x < h);

    for src in sources {
        if src[axis] != lo[axis] || !inside(&src) || !open(&src) || !visit(&src) {
            continue;
        }
        stack.extend_from_slice(&src);
        while !stack.is_empty() {
            let at = stack.len() - d;
            cur.copy_from_slice(&stack[at..]);
            stack.truncate(at);
            if cur[axis] == target {
                return true;
            }
            for off in &offsets {
                if shifted(&cur, off, shape.side, &mut nb) && inside(&nb) && open(&nb) && visit(&nb) {
                    stack.extend_from_slice(&nb);
                }
            }
        }
    }
    false
}

/// Whether an occupied cluster of `set` touches both faces orthogonal to `axis`.
pub fn set_crosses(set: &CellSet, axis: usize) -> bool {
    let shape = set.shape();
    let d = shape.dim as usize;
    let lo = vec![0u64; d];
    let hi = vec![shape.side; d];
    let sources = set
        .iter()
        .map(|c| shape.coords(c))
        .take_while(|c| axis != d - 1 || c[axis] == 0)
        .filter(|c| c[axis] == 0);
    crossing_in_region(shape, &lo, &hi, axis, sources, |c| set.contains(shape.linear(c)))
}

/// Whether the level-`n` cells of `g` connect the face `x_axis = 0` to
/// `x_axis = 1` (axes numbered from 0).
pub fn crosses(g: &Grid, axis: usize) -> Result<bool> {
    if axis >= g.dim() as usize {
        return param(format!("axis {axis} outside 0..{}", g.dim()));
    }
    Ok(set_crosses(g.cells(), axis))
}

/// Axis-aligned box in `[0, 1]^d` and the axis along which it must be crossed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StripSpec {
    pub lo: Vec<Ratio<u64>>,
    pub hi: Vec<Ratio<u64>>,
    pub axis: usize,
}

impl StripSpec {
    /// Integer cell bounds `lo..hi` at a grid of the given side.
    pub fn cell_bounds(&self, side: u64, dim: u32) -> Result<(Vec<u64>, Vec<u64>)> {
        if self.lo.len() != dim as usize || self.hi.len() != dim as usize || self.axis >= dim as usize {
            return param(format!("strip does not describe a {dim}-dimensional box"));
        }
        let one = Ratio::from_integer(1u64);
        let scale = |r: &Ratio<u64>| -> Result<u64> {
            let v = r * side;
            if !v.is_integer() {
                return param(format!("strip boundary {r} is not a multiple of 1/{side}"));
            }
            Ok(v.to_integer())
        };
        let mut lo = Vec::with_capacity(dim as usize);
        let mut hi = Vec::with_capacity(dim as usize);
        for (l, h) in self.lo.iter().zip(&self.hi) {
            if l >= h || *h > one {
                return param(format!("strip side [{l}, {h}] is not a sub-interval of [0, 1]"));
            }
            lo.push(scale(l)?);
            hi.push(scale(h)?);
        }
        Ok((lo, hi))
    }
}

/// An occupied chain inside the strip joining its two faces orthogonal to
/// the strip's axis.
pub fn strip_crossing(g: &Grid, s: &StripSpec) -> Result<bool> {
    let (lo, hi) = s.cell_bounds(g.side(), g.dim())?;
    let set = g.cells();
    let shape = set.shape();
    let sources = set.iter().map(|c| shape.coords(c)).filter(|c| c[s.axis] == lo[s.axis]);
    Ok(crossing_in_region(shape, &lo, &hi, s.axis, sources, |c| set.contains(shape.linear(c))))
}

/// The strips `H_1, H_2` (crossed horizontally) and `V_1, V_2` (crossed
/// vertically) of width `1/(4 n_x)` around `x` that fit inside the unit square.
pub fn gamma_strips(x: &[Ratio<u64>; 2], n_x: u64) -> Result<Vec<StripSpec>> {
    if n_x == 0 {
        return param("n_x must be positive");
    }
    let one = Ratio::from_integer(1u64);
    let zero = Ratio::from_integer(0u64);
    if x.iter().any(|c| *c > one) {
        return param(format!("point ({}, {}) outside the unit square", x[0], x[1]));
    }
    let w = Ratio::new(1, 4 * n_x);
    let mut strips = Vec::new();
    // Horizontal strips vary the second coordinate, vertical the first.
    for (axis, fixed) in [(0usize, 1usize), (1, 0)] {
        let c = x[fixed];
        let mut push = |lo_c: Ratio<u64>, hi_c: Ratio<u64>| {
            let mut lo = vec![zero; 2];
            let mut hi = vec![one; 2];
            lo[fixed] = lo_c;
            hi[fixed] = hi_c;
            strips.push(StripSpec { lo, hi, axis });
        };
        if c >= w {
            push(c - w, c);
        }
        if c + w <= one {
            push(c, c + w);
        }
    }
    Ok(strips)
}

/// Every strip of [`gamma_strips`] is crossed the long way.
pub fn gamma_event(g: &Grid, x: &[Ratio<u64>; 2], n_x: u64) -> Result<bool> {
    if g.dim() != 2 {
        return Err(Error::UnsupportedDimension { required: 2, actual: g.dim() });
    }
    let strips = gamma_strips(x, n_x)?;
    for s in &strips {
        s.cell_bounds(g.side(), 2)?;
    }
    for s in &strips {
        if !strip_crossing(g, s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Some single black cluster meets every edge of the box in at least `u`
/// cells and meets every target set.
///
/// Each target must be non-empty and lie within one edge of the box.
pub fn edge_cluster_event(black: &CellSet, u: usize, targets: &[Vec<LatticeCell>]) -> Result<bool> {
    let shape = black.shape();
    let edges = cube_edges(shape.dim);
    for (r, t) in targets.iter().enumerate() {
        if t.is_empty() {
            return param(format!("target set {r} is empty"));
        }
        if t.iter().any(|c| c.side != shape.side || c.coords.len() != shape.dim as usize) {
            return param(format!("target set {r} has cells outside the box"));
        }
        if !edges.iter().any(|e| t.iter().all(|c| e.contains(&c.coords, shape.side))) {
            return param(format!("target set {r} is not contained in a single edge"));
        }
    }
    let labels = label_cells(black);
    let edge_cells: Vec<Vec<u64>> = edges
        .iter()
        .map(|e| {
            e.cells_in_box(shape.side, shape.dim)
                .expect("edges of the box are valid")
                .iter()
                .map(LatticeCell::linear)
                .collect()
        })
        .collect();
    'cluster: for &label in labels.sizes.keys() {
        for cells in &edge_cells {
            let hits = cells.iter().filter(|&&c| labels.label_of(c) == Some(label)).count();
            if hits < u {
                continue 'cluster;
            }
        }
        for t in targets {
            if !t.iter().any(|c| labels.label_of(c.linear()) == Some(label)) {
                continue 'cluster;
            }
        }
        return Ok(true);
    }
    Ok(false)
}

/// Level-`n` proxy for the split of the retained measure into isolated cells
/// and cells of larger clusters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterMeasure {
    pub singleton_cells: u64,
    pub multi_cells: u64,
    /// `N^(dn)`.
    pub total_cells: u128,
    pub singleton_measure: f64,
    pub multi_measure: f64,
}

pub fn cluster_measure_stats(g: &Grid) -> ClusterMeasure {
    let labels = label_clusters(g);
    let singleton_cells = labels.sizes.values().filter(|&&s| s == 1).count() as u64;
    let multi_cells = labels.cells.len() as u64 - singleton_cells;
    let total_cells = g.shape().total();
    ClusterMeasure {
        singleton_cells,
        multi_cells,
        total_cells,
        singleton_measure: singleton_cells as f64 / total_cells as f64,
        multi_measure: multi_cells as f64 / total_cells as f64,
    }
}

/// Convenience: the low or high face of `axis` as a boundary selector.
pub fn face(axis: usize, high: bool) -> BoundarySelector {
    BoundarySelector::Face { axis, high }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::sample::sample_mfp;

    fn grid(base: u32, dim: u32, n: u32, cells: &[&[u64]]) -> Grid {
        let cells: Vec<Vec<u64>> = cells.iter().map(|c| c.to_vec()).collect();
        Grid::from_coords(base, dim, n, &cells).unwrap()
    }

    #[test]
    fn labeling_examples() {
        let full = Grid::full(2, 2, 1).unwrap();
        let l = label_clusters(&full);
        assert_eq!(l.cluster_count(), 1);
        assert_eq!(l.sizes[&0], 4);

        let diag = grid(2, 2, 1, &[&[0, 0], &[1, 1]]);
        let l = label_clusters(&diag);
        assert_eq!(l.cluster_count(), 2);
        assert!(l.sizes.values().all(|&s| s == 1));

        let diag3 = grid(2, 3, 1, &[&[0, 0, 0], &[1, 1, 0]]);
        let l = label_clusters(&diag3);
        assert_eq!(l.cluster_count(), 1);
        assert_eq!(l.largest(), 2);

        let corner3 = grid(2, 3, 1, &[&[0, 0, 0], &[1, 1, 1]]);
        assert_eq!(label_clusters(&corner3).cluster_count(), 2);
    }

    #[test]
    fn labels_are_smallest_member() {
        // Two clusters in a 4x4 grid: an L shape and a single cell.
        let g = grid(2, 2, 2, &[&[1, 0], &[1, 1], &[0, 1], &[3, 3]]);
        let l = label_clusters(&g);
        let shape = g.shape();
        assert_eq!(l.label_of(shape.linear(&[0, 1])), Some(shape.linear(&[1, 0])));
        assert_eq!(l.label_of(shape.linear(&[3, 3])), Some(15));
        assert_eq!(l.label_of(shape.linear(&[2, 2])), None);
    }

    #[test]
    fn crossing_examples() {
        assert!(crosses(&Grid::full(3, 2, 2).unwrap(), 0).unwrap());
        let bottom = grid(2, 2, 1, &[&[0, 0], &[1, 0]]);
        assert!(crosses(&bottom, 0).unwrap());
        assert!(!crosses(&bottom, 1).unwrap());
        let diag = grid(2, 2, 1, &[&[0, 0], &[1, 1]]);
        assert!(!crosses(&diag, 0).unwrap());
        assert!(!crosses(&diag, 1).unwrap());
        assert!(!crosses(&Grid::empty(2, 2, 2).unwrap(), 0).unwrap());
        assert!(crosses(&bottom, 2).is_err());
    }

    #[test]
    fn crossing_last_axis_in_3d() {
        let column = grid(2, 3, 2, &[&[1, 2, 0], &[1, 2, 1], &[1, 2, 2], &[1, 2, 3]]);
        assert!(crosses(&column, 2).unwrap());
        assert!(!crosses(&column, 0).unwrap());
    }

    fn half(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    #[test]
    fn strip_examples() {
        let bottom_half = StripSpec { lo: vec![half(0, 1), half(0, 1)], hi: vec![half(1, 1), half(1, 2)], axis: 0 };
        let row = grid(2, 2, 2, &[&[0, 0], &[1, 0], &[2, 0], &[3, 0]]);
        assert!(strip_crossing(&row, &bottom_half).unwrap());
        assert!(strip_crossing(&Grid::full(2, 2, 2).unwrap(), &bottom_half).unwrap());
        assert!(!strip_crossing(&Grid::empty(2, 2, 2).unwrap(), &bottom_half).unwrap());
        // The top row lies outside the bottom half.
        let top = grid(2, 2, 2, &[&[0, 3], &[1, 3], &[2, 3], &[3, 3]]);
        assert!(!strip_crossing(&top, &bottom_half).unwrap());

        let third = StripSpec { lo: vec![half(0, 1), half(0, 1)], hi: vec![half(1, 1), half(1, 3)], axis: 0 };
        assert!(strip_crossing(&row, &third).is_err());
    }

    #[test]
    fn gamma_examples() {
        let x = [half(1, 2), half(1, 2)];
        assert_eq!(gamma_strips(&x, 1).unwrap().len(), 4);
        assert!(gamma_event(&Grid::full(2, 2, 3).unwrap(), &x, 1).unwrap());
        assert!(!gamma_event(&Grid::empty(2, 2, 3).unwrap(), &x, 1).unwrap());

        // Middle horizontal band rows 2..6 and vertical band columns 2..6 of an 8x8 grid.
        let mut cells = Vec::new();
        for a in 0..8u64 {
            for b in 2..6u64 {
                cells.push(vec![a, b]);
                cells.push(vec![b, a]);
            }
        }
        let bands = Grid::from_coords(2, 2, 3, &cells).unwrap();
        assert!(gamma_event(&bands, &x, 1).unwrap());

        // Near the boundary only one strip per direction fits.
        assert_eq!(gamma_strips(&[half(0, 1), half(1, 1)], 1).unwrap().len(), 2);

        let g3 = Grid::full(2, 3, 1).unwrap();
        assert!(matches!(gamma_event(&g3, &x, 1), Err(Error::UnsupportedDimension { .. })));
        // Width 1/4 is not representable on a 3^n grid.
        assert!(gamma_event(&Grid::full(3, 2, 2).unwrap(), &x, 1).is_err());
    }

    fn box_cells(side: u64, cells: impl Iterator<Item = Vec<u64>>) -> CellSet {
        let shape = BoxShape::new(side, 2);
        CellSet::from_unsorted(shape, cells.map(|c| shape.linear(&c)).collect())
    }

    #[test]
    fn edge_cluster_examples() {
        let all = CellSet::full(BoxShape::new(3, 2));
        let corners: Vec<Vec<LatticeCell>> = [[0, 0], [2, 0], [0, 2], [2, 2]]
            .iter()
            .map(|c| vec![LatticeCell::new(c.to_vec(), 3).unwrap()])
            .collect();
        assert!(edge_cluster_event(&all, 1, &corners).unwrap());
        assert!(!edge_cluster_event(&CellSet::empty(BoxShape::new(3, 2)), 1, &[]).unwrap());

        let ring = box_cells(3, (0..9).map(|i| vec![i % 3, i / 3]).filter(|c| c != &vec![1, 1]));
        assert!(edge_cluster_event(&ring, 3, &[]).unwrap());
        assert!(!edge_cluster_event(&ring, 4, &[]).unwrap());

        let centre = vec![vec![LatticeCell::new(vec![1, 1], 3).unwrap()]];
        assert!(edge_cluster_event(&all, 1, &centre).is_err());
        assert!(edge_cluster_event(&all, 1, &[vec![]]).is_err());
    }

    #[test]
    fn measure_examples() {
        let m = cluster_measure_stats(&Grid::full(2, 2, 2).unwrap());
        assert_eq!((m.singleton_measure, m.multi_measure), (0.0, 1.0));
        let m = cluster_measure_stats(&grid(2, 2, 1, &[&[0, 0], &[1, 1]]));
        assert_eq!((m.singleton_measure, m.multi_measure), (0.5, 0.0));
        let m = cluster_measure_stats(&Grid::empty(2, 2, 3).unwrap());
        assert_eq!((m.singleton_cells, m.multi_cells), (0, 0));
    }

    /// Independent 4-neighbour flood fill for d = 2.
    fn flood_components(side: usize, open: &[bool]) -> Vec<Option<usize>> {
        let mut comp = vec![None; side * side];
        let mut next = 0;
        for start in 0..side * side {
            if !open[start] || comp[start].is_some() {
                continue;
            }
            let mut queue = std::collections::VecDeque::from([start]);
            comp[start] = Some(next);
            while let Some(c) = queue.pop_front() {
                let (x, y) = (c % side, c / side);
                let mut nbrs = Vec::new();
                if x > 0 { nbrs.push(c - 1); }
                if x + 1 < side { nbrs.push(c + 1); }
                if y > 0 { nbrs.push(c - side); }
                if y + 1 < side { nbrs.push(c + side); }
                for nb in nbrs {
                    if open[nb] && comp[nb].is_none() {
                        comp[nb] = Some(next);
                        queue.push_back(nb);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    #[test]
    fn agrees_with_flood_fill() {
        for seed in 0..40u64 {
            let p = 0.4 + 0.01 * seed as f64;
            let g = sample_mfp(p.min(0.95).sqrt().sqrt().sqrt(), 2, 2, 6, seed).unwrap();
            let side = g.side() as usize;
            let open: Vec<bool> = (0..side * side).map(|i| g.cells().contains(i as u64)).collect();
            let comp = flood_components(side, &open);
            let labels = label_clusters(&g);
            for (i, &a) in labels.cells.iter().enumerate() {
                for (j, &b) in labels.cells.iter().enumerate().skip(i + 1).step_by(7) {
                    let same_uf = labels.labels[i] == labels.labels[j];
                    assert_eq!(same_uf, comp[a as usize] == comp[b as usize]);
                }
            }
            let nclusters = comp.iter().flatten().collect::<HashSet<_>>().len();
            assert_eq!(nclusters, labels.cluster_count());
            let left_right = (0..side).any(|y| {
                comp[y * side].is_some_and(|c| (0..side).any(|y2| comp[y2 * side + side - 1] == Some(c)))
            });
            assert_eq!(left_right, crosses(&g, 0).unwrap());
        }
    }
}
