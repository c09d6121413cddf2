//! Samplers for the four models.
//!
//! Each retained cube draws its children from uniforms keyed by its own
//! address, so for a fixed seed:
//! - MFP and fat retain child `(I, j)` iff `cube_uniform(seed, (I, j), 0) < p`
//!   (resp. `p_{|I|+1}`); raising `p` can only add cubes.
//! - the k-model and GFP shuffle `J^d` with streams `1..N^d` of the parent
//!   and keep a prefix of the shuffled ranks; raising `k` can only add cubes.
//! - GFP draws its child count by inverse CDF from stream 0 of the parent.

use crate::error::{param, Result};
use crate::index::{tuple_from_rank, BoxShape, CubeIndex};
use crate::models::grid::{level_shape, CellSet, Grid};
use crate::models::spec::{children_per_cube, GeneratorSpec, Model, RetentionSchedule};
use crate::rng::{child_key, key_of, root_key, shuffled_ranks, stream_uniform};

/// Deterministic uniform in `[0, 1)` for cube `i` and draw `stream`.
pub fn cube_uniform(seed: u64, i: &CubeIndex, stream: u32) -> f64 {
    stream_uniform(key_of(seed, i), stream)
}

/// Child placement tables for one `(N, d)`.
pub(crate) struct Expander {
    base: u64,
    dim: usize,
    pub children: u32,
    tuples: Vec<Vec<u64>>,
}

impl Expander {
    pub fn new(base: u32, dim: u32) -> Result<Self> {
        crate::index::check_geometry(base, dim)?;
        let children = children_per_cube(base, dim)?;
        let tuples = (0..children)
            .map(|r| tuple_from_rank(r, base, dim).into_iter().map(u64::from).collect())
            .collect();
        Ok(Expander { base: base as u64, dim: dim as usize, children, tuples })
    }

    /// Linear index, in the child level, of the child with tuple rank `rank`.
    #[inline]
    pub fn child_linear(&self, parent: &[u64], rank: u32, child_shape: BoxShape) -> u64 {
        let t = &self.tuples[rank as usize];
        let mut lin = 0u64;
        for c in (0..self.dim).rev() {
            lin = lin * child_shape.side + parent[c] * self.base + t[c];
        }
        lin
    }
}

/// Grows a retained tree level by level. `choose(m, key, out)` receives the
/// level `m` and key of a retained parent and pushes the tuple ranks of its
/// retained children.
pub(crate) fn grow<F>(base: u32, dim: u32, depth: u32, seed: u64, mut choose: F) -> Result<Vec<CellSet>>
where
    F: FnMut(u32, u64, &mut Vec<u32>),
{
    if depth == 0 {
        return param("depth n must be at least 1");
    }
    let ex = Expander::new(base, dim)?;
    let mut frontier: Vec<(u64, u64)> = vec![(0, root_key(seed, base, dim))];
    let mut levels = Vec::with_capacity(depth as usize);
    let mut parent = vec![0u64; dim as usize];
    let mut ranks = Vec::with_capacity(ex.children as usize);
    for m in 0..depth {
        let pshape = level_shape(base, dim, m)?;
        let cshape = level_shape(base, dim, m + 1)?;
        let mut next = Vec::new();
        for &(lin, key) in &frontier {
            pshape.coords_into(lin, &mut parent);
            ranks.clear();
            choose(m, key, &mut ranks);
            for &r in &ranks {
                next.push((ex.child_linear(&parent, r, cshape), child_key(key, r)));
            }
        }
        next.sort_unstable_by_key(|x| x.0);
        levels.push(CellSet::from_sorted(cshape, next.iter().map(|x| x.0).collect()));
        frontier = next;
    }
    Ok(levels)
}

fn finish(base: u32, dim: u32, depth: u32, model: Model, seed: u64, levels: Vec<CellSet>) -> Grid {
    Grid::from_sets(base, dim, depth, model, seed, levels, true)
}

pub fn sample_mfp(p: f64, base: u32, dim: u32, depth: u32, seed: u64) -> Result<Grid> {
    let model = Model::Mfp { p };
    model.validate(base, dim)?;
    let children = children_per_cube(base, dim)?;
    let levels = grow(base, dim, depth, seed, |_, key, out| {
        out.extend((0..children).filter(|&r| stream_uniform(child_key(key, r), 0) < p));
    })?;
    Ok(finish(base, dim, depth, model, seed, levels))
}

pub fn sample_fat(schedule: &RetentionSchedule, base: u32, dim: u32, depth: u32, seed: u64) -> Result<Grid> {
    let model = Model::Fat { schedule: schedule.clone() };
    model.validate(base, dim)?;
    let children = children_per_cube(base, dim)?;
    let probs: Vec<f64> = (1..=depth).map(|m| schedule.p(m)).collect();
    let levels = grow(base, dim, depth, seed, |m, key, out| {
        let p = probs[m as usize];
        out.extend((0..children).filter(|&r| stream_uniform(child_key(key, r), 0) < p));
    })?;
    Ok(finish(base, dim, depth, model, seed, levels))
}

pub fn sample_k(k: u32, base: u32, dim: u32, depth: u32, seed: u64) -> Result<Grid> {
    let model = Model::K { k };
    model.validate(base, dim)?;
    let children = children_per_cube(base, dim)?;
    let mut perm = Vec::with_capacity(children as usize);
    let levels = grow(base, dim, depth, seed, |_, key, out| {
        shuffled_ranks(key, children, &mut perm);
        out.extend_from_slice(&perm[..k as usize]);
    })?;
    Ok(finish(base, dim, depth, model, seed, levels))
}

pub fn sample_gfp(generator: &GeneratorSpec, base: u32, dim: u32, depth: u32, seed: u64) -> Result<Grid> {
    let model = Model::Gfp { generator: generator.clone() };
    model.validate(base, dim)?;
    let children = children_per_cube(base, dim)?;
    let counts = generator.sampler(children);
    let mut perm = Vec::with_capacity(children as usize);
    let levels = grow(base, dim, depth, seed, |_, key, out| {
        let y = counts.draw(stream_uniform(key, 0));
        shuffled_ranks(key, children, &mut perm);
        out.extend_from_slice(&perm[..y as usize]);
    })?;
    Ok(finish(base, dim, depth, model, seed, levels))
}

/// Samples any model that has a sampler.
pub fn sample_model(model: &Model, base: u32, dim: u32, depth: u32, seed: u64) -> Result<Grid> {
    match model {
        Model::Mfp { p } => sample_mfp(*p, base, dim, depth, seed),
        Model::K { k } => sample_k(*k, base, dim, depth, seed),
        Model::Gfp { generator } => sample_gfp(generator, base, dim, depth, seed),
        Model::Fat { schedule } => sample_fat(schedule, base, dim, depth, seed),
        Model::Truncated { p0, k, m_trunc } => {
            crate::goodness::coupled_domination_sample(*p0, *k, base, dim, depth, *m_trunc, seed)
                .map(|(a, _)| a)
        }
        Model::Explicit => param("explicit grids cannot be sampled"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::BoxShape;

    #[test]
    fn certain_retention_and_discard() {
        let full = sample_mfp(1.0, 2, 2, 3, 9).unwrap();
        assert_eq!(full.cells().len(), 64);
        let none = sample_mfp(0.0, 2, 2, 3, 9).unwrap();
        assert!(none.cells().is_empty());
        let k_full = sample_k(4, 2, 2, 3, 9).unwrap();
        assert_eq!(k_full.cells().len(), 64);
        let fat_full = sample_fat(&RetentionSchedule::constant(1.0), 3, 2, 2, 1).unwrap();
        assert_eq!(fat_full.cells().len(), 81);
        let pmf_full = sample_gfp(&GeneratorSpec::Pmf(vec![0.0, 0.0, 0.0, 0.0, 1.0]), 2, 2, 2, 5).unwrap();
        assert_eq!(pmf_full.cells().len(), 16);
    }

    #[test]
    fn single_lineage() {
        for seed in 0..20 {
            let g = sample_k(1, 2, 2, 3, seed).unwrap();
            assert_eq!(g.cells().len(), 1);
            assert!(g.tree_consistent());
        }
    }

    #[test]
    fn constant_generator_equals_k_model() {
        for seed in 0..20 {
            let a = sample_k(3, 2, 2, 4, seed).unwrap();
            let b = sample_gfp(&GeneratorSpec::Constant(3), 2, 2, 4, seed).unwrap();
            assert_eq!(a.stored_levels(), b.stored_levels());
        }
    }

    #[test]
    fn constant_schedule_equals_mfp() {
        for seed in 0..20 {
            let a = sample_mfp(0.6, 3, 2, 3, seed).unwrap();
            let b = sample_fat(&RetentionSchedule::constant(0.6), 3, 2, 3, seed).unwrap();
            assert_eq!(a.stored_levels(), b.stored_levels());
        }
    }

    #[test]
    fn k_out_of_range() {
        assert!(sample_k(0, 2, 2, 1, 0).is_err());
        assert!(sample_k(5, 2, 2, 1, 0).is_err());
        assert!(sample_mfp(0.5, 2, 2, 0, 0).is_err());
    }

    #[test]
    fn child_linear_matches_coords() {
        let ex = Expander::new(3, 2).unwrap();
        let shape = BoxShape::new(9, 2);
        // parent (1, 2), tuple rank 5 = (1, 2) -> child (4, 8)
        assert_eq!(ex.child_linear(&[1, 2], 5, shape), shape.linear(&[4, 8]));
    }

    #[test]
    fn sampler_matches_cube_uniform() {
        // The sampler's per-child uniform is cube_uniform at the child address.
        let g = sample_mfp(0.5, 2, 2, 2, 77).unwrap();
        for lin in 0..16u64 {
            let coords = g.shape().coords(lin);
            let idx = CubeIndex::from_cell(2, 2, 2, &coords).unwrap();
            let parent = idx.parent().unwrap();
            let expect = cube_uniform(77, &parent, 0) < 0.5 && cube_uniform(77, &idx, 0) < 0.5;
            assert_eq!(g.cells().contains(lin), expect);
        }
    }
}
