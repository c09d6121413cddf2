use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::index::{checked_side, BoxShape};
use crate::models::spec::Model;

/// Above this many cells a level is stored as a sorted index list.
pub const DENSE_LIMIT: u128 = 1 << 26;

/// Occupied cells of one level, addressed by linear index.
#[derive(Clone, Debug)]
pub enum CellSet {
    /// One bit per cell of the level.
    Dense { shape: BoxShape, words: Vec<u64>, count: usize },
    /// Sorted, deduplicated linear indices.
    Sparse { shape: BoxShape, cells: Vec<u64> },
}

impl CellSet {
    pub fn empty(shape: BoxShape) -> Self {
        Self::from_sorted(shape, Vec::new())
    }

    /// `cells` must be sorted and free of duplicates.
    pub fn from_sorted(shape: BoxShape, cells: Vec<u64>) -> Self {
        debug_assert!(cells.windows(2).all(|w| w[0] < w[1]));
        let total = shape.total();
        if total <= DENSE_LIMIT {
            let mut words = vec![0u64; (total as usize).div_ceil(64)];
            for &c in &cells {
                words[(c >> 6) as usize] |= 1 << (c & 63);
            }
            CellSet::Dense { shape, words, count: cells.len() }
        } else {
            CellSet::Sparse { shape, cells }
        }
    }

    pub fn from_unsorted(shape: BoxShape, mut cells: Vec<u64>) -> Self {
        cells.sort_unstable();
        cells.dedup();
        Self::from_sorted(shape, cells)
    }

    pub fn full(shape: BoxShape) -> Self {
        let total = shape.total() as u64;
        Self::from_sorted(shape, (0..total).collect())
    }

    pub fn shape(&self) -> BoxShape {
        match self {
            CellSet::Dense { shape, .. } | CellSet::Sparse { shape, .. } => *shape,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            CellSet::Dense { count, .. } => *count,
            CellSet::Sparse { cells, .. } => cells.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, idx: u64) -> bool {
        match self {
            CellSet::Dense { shape, words, .. } => {
                (idx as u128) < shape.total() && words[(idx >> 6) as usize] >> (idx & 63) & 1 == 1
            }
            CellSet::Sparse { cells, .. } => cells.binary_search(&idx).is_ok(),
        }
    }

    pub fn contains_coords(&self, coords: &[u64]) -> bool {
        let shape = self.shape();
        coords.iter().all(|&c| c < shape.side) && self.contains(shape.linear(coords))
    }

    /// Linear indices in increasing order.
    pub fn iter(&self) -> CellIter<'_> {
        match self {
            CellSet::Dense { words, .. } => CellIter::Dense { words, word: 0, bits: words.first().copied().unwrap_or(0) },
            CellSet::Sparse { cells, .. } => CellIter::Sparse(cells.iter()),
        }
    }

    pub fn to_vec(&self) -> Vec<u64> {
        self.iter().collect()
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.shape() == other.shape() && self.iter().all(|c| other.contains(c))
    }
}

impl PartialEq for CellSet {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.len() == other.len() && self.iter().eq(other.iter())
    }
}

impl Eq for CellSet {}

pub enum CellIter<'a> {
    Dense { words: &'a [u64], word: usize, bits: u64 },
    Sparse(std::slice::Iter<'a, u64>),
}

impl Iterator for CellIter<'_> {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        match self {
            CellIter::Dense { words, word, bits } => loop {
                if *bits != 0 {
                    let tz = bits.trailing_zeros() as u64;
                    *bits &= *bits - 1;
                    return Some((*word as u64) * 64 + tz);
                }
                *word += 1;
                *bits = *words.get(*word)?;
            },
            CellIter::Sparse(it) => it.next().copied(),
        }
    }
}

/// Retained cubes of a sampled (or supplied) realization down to level `n`.
///
/// `levels[m - 1]` holds the retained level-`m` cubes when the tree is
/// stored; otherwise `levels` holds only level `n`. Level 0 (the unit cube)
/// is always retained.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    base: u32,
    dim: u32,
    depth: u32,
    model: Model,
    seed: u64,
    levels: Vec<CellSet>,
    tree: bool,
}

/// Shape of the level-`level` grid.
pub fn level_shape(base: u32, dim: u32, level: u32) -> Result<BoxShape> {
    let side = checked_side(base, level)?;
    let shape = BoxShape::new(side, dim);
    if shape.total() > u64::MAX as u128 {
        return param(format!("level-{level} grid with N={base}, d={dim} has too many cells"));
    }
    Ok(shape)
}

impl Grid {
    /// A grid with its full retained tree. `levels[m-1]` lists level-`m` cells.
    pub fn with_tree(base: u32, dim: u32, model: Model, seed: u64, levels: Vec<Vec<u64>>) -> Result<Self> {
        let depth = levels.len() as u32;
        if depth == 0 {
            return param("a grid needs at least one level");
        }
        model.validate(base, dim)?;
        let mut sets = Vec::with_capacity(levels.len());
        for (m, cells) in levels.into_iter().enumerate() {
            let shape = level_shape(base, dim, m as u32 + 1)?;
            if let Some(bad) = cells.iter().find(|&&c| c as u128 >= shape.total()) {
                return param(format!("cell index {bad} outside level {}", m + 1));
            }
            sets.push(CellSet::from_unsorted(shape, cells));
        }
        let grid = Grid { base, dim, depth, model, seed, levels: sets, tree: true };
        if !grid.tree_consistent() {
            return param("retained cube without a retained parent");
        }
        Ok(grid)
    }

    /// A level-`depth` grid from explicit cell coordinates, without a tree.
    pub fn from_coords(base: u32, dim: u32, depth: u32, cells: &[Vec<u64>]) -> Result<Self> {
        crate::index::check_geometry(base, dim)?;
        if depth == 0 {
            return param("grid depth must be at least 1");
        }
        let shape = level_shape(base, dim, depth)?;
        let mut idx = Vec::with_capacity(cells.len());
        for c in cells {
            if c.len() != dim as usize || c.iter().any(|&x| x >= shape.side) {
                return param(format!("cell {c:?} outside the level-{depth} grid"));
            }
            idx.push(shape.linear(c));
        }
        Ok(Grid {
            base,
            dim,
            depth,
            model: Model::Explicit,
            seed: 0,
            levels: vec![CellSet::from_unsorted(shape, idx)],
            tree: false,
        })
    }

    pub fn full(base: u32, dim: u32, depth: u32) -> Result<Self> {
        crate::index::check_geometry(base, dim)?;
        if depth == 0 {
            return param("grid depth must be at least 1");
        }
        let levels = (1..=depth)
            .map(|m| Ok(CellSet::full(level_shape(base, dim, m)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Grid { base, dim, depth, model: Model::Explicit, seed: 0, levels, tree: true })
    }

    pub fn empty(base: u32, dim: u32, depth: u32) -> Result<Self> {
        crate::index::check_geometry(base, dim)?;
        if depth == 0 {
            return param("grid depth must be at least 1");
        }
        let levels = (1..=depth)
            .map(|m| Ok(CellSet::empty(level_shape(base, dim, m)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Grid { base, dim, depth, model: Model::Explicit, seed: 0, levels, tree: true })
    }

    pub(crate) fn from_sets(
        base: u32,
        dim: u32,
        depth: u32,
        model: Model,
        seed: u64,
        levels: Vec<CellSet>,
        tree: bool,
    ) -> Self {
        debug_assert_eq!(levels.len(), if tree { depth as usize } else { 1 });
        Grid { base, dim, depth, model, seed, levels, tree }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    /// Level `n` of the discretization.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn has_tree(&self) -> bool {
        self.tree
    }

    /// Side `N^n` of the level-`n` grid.
    pub fn side(&self) -> u64 {
        self.cells().shape().side
    }

    pub fn shape(&self) -> BoxShape {
        self.cells().shape()
    }

    /// Retained level-`n` cells.
    pub fn cells(&self) -> &CellSet {
        self.levels.last().expect("grid has a level")
    }

    /// Retained level-`m` cells, `1 <= m <= n`.
    pub fn level(&self, m: u32) -> Result<&CellSet> {
        if m == 0 || m > self.depth {
            return param(format!("level {m} outside 1..={}", self.depth));
        }
        if m == self.depth {
            return Ok(self.cells());
        }
        if !self.tree {
            return Err(Error::MissingTree);
        }
        Ok(&self.levels[m as usize - 1])
    }

    /// Number of retained level-`m` cubes, with `Z_0 = 1`.
    pub fn count_at(&self, m: u32) -> Result<usize> {
        if m == 0 {
            return Ok(1);
        }
        self.level(m).map(CellSet::len)
    }

    pub fn stored_levels(&self) -> &[CellSet] {
        &self.levels
    }

    /// Fraction of the unit cube covered at level `n`.
    pub fn measure(&self) -> f64 {
        self.cells().len() as f64 / self.shape().total() as f64
    }

    /// Every retained cube's parent is retained.
    pub fn tree_consistent(&self) -> bool {
        if !self.tree {
            return true;
        }
        let base = self.base as u64;
        self.levels.windows(2).all(|w| {
            let (parents, children) = (&w[0], &w[1]);
            let (ps, cs) = (parents.shape(), children.shape());
            let mut coords = vec![0u64; self.dim as usize];
            children.iter().all(|c| {
                cs.coords_into(c, &mut coords);
                coords.iter_mut().for_each(|x| *x /= base);
                parents.contains(ps.linear(&coords))
            })
        })
    }

    /// Cellwise containment of the level-`n` slices.
    pub fn is_subset_of(&self, other: &Grid) -> bool {
        self.cells().is_subset_of(other.cells())
    }

    /// A copy without the stored tree.
    pub fn without_tree(&self) -> Grid {
        Grid {
            levels: vec![self.cells().clone()],
            tree: false,
            ..self.clone()
        }
    }
}

/// Geometry header shared by the serialized forms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    #[serde(rename = "N")]
    pub base: u32,
    pub d: u32,
    pub n: u32,
    pub model: Model,
    pub seed: u64,
}

impl Grid {
    pub fn header(&self) -> GridHeader {
        GridHeader { base: self.base, d: self.dim, n: self.depth, model: self.model.clone(), seed: self.seed }
    }
}
