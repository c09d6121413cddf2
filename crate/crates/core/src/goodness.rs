//! The m-good recursions, the `(n, u)`-goodness procedure and the coupled
//! sampler dominating the k-model by truncated Mandelbrot percolation.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::connectivity::UnionFind;
use crate::error::{param, Error, Result};
use crate::exact::{binomial_pmf_exact, binomial_tail_exact, to_f64};
use crate::index::{adjacency_offsets, cube_edges, tuple_from_rank, BoxShape, CubeIndex};
use crate::models::grid::{level_shape, Grid};
use crate::models::sample::{grow, sample_k};
use crate::models::spec::{children_per_cube, exact_f64, CountSampler, GeneratorSpec, Model};
use crate::rng::{shuffled_ranks, stream_uniform};

/// `P(E_0), ..., P(E_m)` (or `P(F_0), ..., P(F_m)`) with the parameters used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodRecursionResult {
    pub values: Vec<f64>,
    /// `p0` for the Mandelbrot recursion, absent for a generator.
    pub p0: Option<f64>,
    pub generator: Option<GeneratorSpec>,
    pub k: u32,
    #[serde(rename = "N")]
    pub base: u32,
    pub d: u32,
}

impl GoodRecursionResult {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("recursion has at least one term")
    }
}

fn check_k(k: u32, children: u32) -> Result<()> {
    if k == 0 || k > children {
        return param(format!("k = {k} outside 1..={children}"));
    }
    Ok(())
}

/// `P(E_0) = P(Bin(N^d, p0) >= k)`, `P(E_{m+1}) = P(Bin(N^d, p0 P(E_m)) >= k)`.
///
/// Each tail is summed exactly over rationals from the exact binary values of
/// `p0` and the previous term, then rounded once.
pub fn good_probability(p0: f64, k: u32, base: u32, dim: u32, m: u32) -> Result<GoodRecursionResult> {
    crate::index::check_geometry(base, dim)?;
    let children = children_per_cube(base, dim)?;
    check_k(k, children)?;
    if !(0.0..=1.0).contains(&p0) {
        return param(format!("p0 = {p0} outside [0, 1]"));
    }
    let p0_exact = exact_f64(p0);
    let mut values = Vec::with_capacity(m as usize + 1);
    let mut q = BigRational::one();
    for _ in 0..=m {
        let e = to_f64(&binomial_tail_exact(children, &(&p0_exact * &q), k));
        values.push(e);
        q = exact_f64(e);
    }
    Ok(GoodRecursionResult { values, p0: Some(p0), generator: None, k, base, d: dim })
}

/// `P(F_0) = P(Y >= k)`, `P(F_{m+1}) = sum_y P(Bin(y, P(F_m)) >= k) P(Y = y)`.
pub fn good_probability_gfp(gen: &GeneratorSpec, k: u32, base: u32, dim: u32, m: u32) -> Result<GoodRecursionResult> {
    crate::index::check_geometry(base, dim)?;
    let children = children_per_cube(base, dim)?;
    check_k(k, children)?;
    gen.validate(children)?;
    let pmf = gen.pmf_exact(children);
    let mut values = Vec::with_capacity(m as usize + 1);
    let mut q = BigRational::one();
    for _ in 0..=m {
        let mut sum = BigRational::zero();
        for (y, w) in pmf.iter().enumerate() {
            if !w.is_zero() && y as u32 >= k {
                sum += w * binomial_tail_exact(y as u32, &q, k);
            }
        }
        let f = to_f64(&sum);
        values.push(f);
        q = exact_f64(f);
    }
    Ok(GoodRecursionResult { values, p0: None, generator: Some(gen.clone()), k, base, d: dim })
}

/// Largest `m` such that the unit cube of `g` is m-good for threshold `k`,
/// or `-1` if it is not 0-good. Only levels `1..=n` are observed, so the
/// answer is exact for `m <= n - 1` and saturates at `n - 1`.
pub fn good_depth(g: &Grid, k: u32) -> Result<i64> {
    if !g.has_tree() {
        return Err(Error::MissingTree);
    }
    let children = children_per_cube(g.base(), g.dim())?;
    check_k(k, children)?;
    let shapes: Vec<BoxShape> = (0..=g.depth()).map(|m| level_shape(g.base(), g.dim(), m)).collect::<Result<_>>()?;
    let tuples: Vec<Vec<u64>> = (0..children)
        .map(|r| tuple_from_rank(r, g.base(), g.dim()).into_iter().map(u64::from).collect())
        .collect();
    depth_below(g, &shapes, &tuples, k as usize, 0, &vec![0; g.dim() as usize])
}

/// `h` of a retained cube: `-1` with fewer than `k` retained children,
/// otherwise `max(0, 1 + (k-th largest child h))`; level-`n` cubes have `-1`.
fn depth_below(g: &Grid, shapes: &[BoxShape], tuples: &[Vec<u64>], k: usize, level: u32, coords: &[u64]) -> Result<i64> {
    if level == g.depth() {
        return Ok(-1);
    }
    let base = g.base() as u64;
    let set = g.level(level + 1)?;
    let mut hs = Vec::new();
    let mut child = vec![0u64; coords.len()];
    for t in tuples {
        for ((c, &p), &x) in child.iter_mut().zip(coords).zip(t) {
            *c = p * base + x;
        }
        if set.contains(shapes[level as usize + 1].linear(&child)) {
            hs.push(depth_below(g, shapes, tuples, k, level + 1, &child)?);
        }
    }
    if hs.len() < k {
        return Ok(-1);
    }
    hs.sort_unstable_by(|a, b| b.cmp(a));
    Ok((hs[k - 1] + 1).max(0))
}

/// Outcome of the `(n, u)`-goodness procedure.
///
/// Only retained cubes are recorded: a cube below level `n` that is not
/// retained has no retained children and is never good, and every level-`n`
/// cube is good.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoodnessMap {
    pub base: u32,
    pub dim: u32,
    pub depth: u32,
    pub u: u32,
    /// `levels[m]` maps the linear index of each retained level-`m` cube,
    /// `m < n`, to its witness set (linear indices at level `m + 1`) when good.
    pub levels: Vec<BTreeMap<u64, Option<Vec<u64>>>>,
    /// Retained cubes in the order they were decided.
    pub examined: usize,
}

impl GoodnessMap {
    pub fn unit_good(&self) -> bool {
        matches!(self.levels[0].get(&0), Some(Some(_)))
    }

    pub fn is_good_at(&self, level: u32, linear: u64) -> bool {
        if level >= self.depth {
            return true;
        }
        matches!(self.levels[level as usize].get(&linear), Some(Some(_)))
    }

    pub fn is_good(&self, i: &CubeIndex) -> bool {
        let shape = BoxShape::new((self.base as u64).pow(i.level()), self.dim);
        self.is_good_at(i.level(), shape.linear(&i.cell_coords()))
    }

    /// The chosen witness set, as child indices, when `i` is good and below level `n`.
    pub fn witness(&self, i: &CubeIndex) -> Option<Vec<CubeIndex>> {
        if i.level() >= self.depth {
            return None;
        }
        let shape = BoxShape::new((self.base as u64).pow(i.level()), self.dim);
        let cells = self.levels[i.level() as usize].get(&shape.linear(&i.cell_coords()))?.as_ref()?;
        let cshape = BoxShape::new(shape.side * self.base as u64, self.dim);
        Some(
            cells
                .iter()
                .map(|&c| CubeIndex::from_cell(self.base, self.dim, i.level() + 1, &cshape.coords(c)).expect("cell in range"))
                .collect(),
        )
    }

    /// Good cubes at `level < n`; `None` at level `n`, where every retained
    /// cube is good and the map keeps no record.
    pub fn good_count(&self, level: u32) -> Option<usize> {
        let decided = self.levels.get(level as usize)?;
        Some(decided.values().filter(|w| w.is_some()).count())
    }
}

struct Procedure<'a> {
    g: &'a Grid,
    u: usize,
    base: u64,
    d: usize,
    children: u32,
    tuples: Vec<Vec<u64>>,
    local: BoxShape,
    local_offsets: Vec<Vec<i64>>,
    edges: Vec<crate::index::BoundarySelector>,
    offsets: Vec<Vec<i64>>,
    levels: Vec<BTreeMap<u64, Option<Vec<u64>>>>,
    order: Vec<(u32, u64)>,
}

impl Procedure<'_> {
    fn retained(&self, level: u32, lin: u64) -> Result<bool> {
        Ok(level == 0 || self.g.level(level)?.contains(lin))
    }

    /// Decides cube `(level, lin)` after all of its descendants, which is
    /// exactly the examination order restricted to one subtree.
    fn visit(&mut self, level: u32, lin: u64) -> Result<()> {
        let n = self.g.depth();
        let pshape = level_shape(self.g.base(), self.g.dim(), level)?;
        let cshape = level_shape(self.g.base(), self.g.dim(), level + 1)?;
        let parent = pshape.coords(lin);
        let mut good_children: Vec<(u32, u64)> = Vec::new();
        for rank in 0..self.children {
            let child = self.child_coords(&parent, rank);
            let clin = cshape.linear(&child);
            if !self.retained(level + 1, clin)? {
                continue;
            }
            if level + 1 < n {
                self.visit(level + 1, clin)?;
            }
            let good = level + 1 == n || matches!(self.levels[level as usize + 1].get(&clin), Some(Some(_)));
            if good {
                good_children.push((rank, clin));
            }
        }
        let witness = self.choose_witness(level, &parent, &good_children, pshape, cshape);
        self.levels[level as usize].insert(lin, witness);
        self.order.push((level, lin));
        Ok(())
    }

    fn child_coords(&self, parent: &[u64], rank: u32) -> Vec<u64> {
        parent.iter().zip(&self.tuples[rank as usize]).map(|(&p, &t)| p * self.base + t).collect()
    }

    fn choose_witness(
        &self,
        level: u32,
        parent: &[u64],
        good: &[(u32, u64)],
        pshape: BoxShape,
        cshape: BoxShape,
    ) -> Option<Vec<u64>> {
        // Edge-connected components of D(I) in local coordinates.
        let local_coords: Vec<Vec<u64>> =
            good.iter().map(|&(r, _)| self.tuples[r as usize].clone()).collect();
        let mut slot = vec![usize::MAX; self.local.total() as usize];
        for (i, c) in local_coords.iter().enumerate() {
            slot[self.local.linear(c) as usize] = i;
        }
        let mut uf = UnionFind::new(good.len());
        let mut nb = vec![0u64; self.d];
        for (i, c) in local_coords.iter().enumerate() {
            for off in &self.local_offsets {
                if shift(c, off, self.local.side, &mut nb) {
                    let j = slot[self.local.linear(&nb) as usize];
                    if j != usize::MAX {
                        uf.union(i as u32, j as u32);
                    }
                }
            }
        }
        let mut components: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for i in 0..good.len() {
            components.entry(uf.find(i as u32)).or_default().push(i);
        }
        let mut candidates: Vec<Vec<usize>> = components.into_values().collect();
        // Smallest minimal member first; members are already increasing.
        candidates.sort_by_key(|c| good[c[0]].1);
        for c in candidates.iter_mut() {
            c.sort_by_key(|&i| good[i].1);
        }

        // Earlier-decided good neighbours at this level with their witnesses.
        let mut earlier: Vec<&Vec<u64>> = Vec::new();
        if level > 0 {
            let mut nb = vec![0u64; self.d];
            for off in &self.offsets {
                if shift(parent, off, pshape.side, &mut nb) {
                    if let Some(Some(w)) = self.levels[level as usize].get(&pshape.linear(&nb)) {
                        earlier.push(w);
                    }
                }
            }
        }

        candidates.into_iter().find_map(|comp| {
            let on_every_edge = self.edges.iter().all(|e| {
                comp.iter().filter(|&&i| e.contains(&local_coords[i], self.local.side)).count() >= self.u
            });
            if !on_every_edge {
                return None;
            }
            let members: Vec<u64> = comp.iter().map(|&i| good[i].1).collect();
            let joined = earlier.iter().all(|w| touches(w, &members, cshape, &self.offsets));
            joined.then_some(members)
        })
    }
}

#[inline]
fn shift(coords: &[u64], off: &[i64], side: u64, out: &mut [u64]) -> bool {
    for ((o, &c), &d) in out.iter_mut().zip(coords).zip(off) {
        let v = c as i64 + d;
        if v < 0 || v as u64 >= side {
            return false;
        }
        *o = v as u64;
    }
    true
}

/// Some cell of `a` is `L^d`-adjacent to some cell of `b` (both sorted).
fn touches(a: &[u64], b: &[u64], shape: BoxShape, offsets: &[Vec<i64>]) -> bool {
    let mut nb = vec![0u64; shape.dim as usize];
    a.iter().any(|&x| {
        let c = shape.coords(x);
        offsets
            .iter()
            .any(|off| shift(&c, off, shape.side, &mut nb) && b.binary_search(&shape.linear(&nb)).is_ok())
    })
}

/// Runs the `(n, u)`-goodness procedure on the retained tree of `g`.
///
/// Cubes are decided in increasing examination order. The witness of a good
/// cube is the first edge-connected component of its retained good children,
/// ordered by smallest member, that meets every edge of the cube in at least
/// `u` children and touches the witness of every earlier good neighbour.
pub fn check_nu_good(g: &Grid, u: u32) -> Result<GoodnessMap> {
    Ok(run_procedure(g, u)?.0)
}

fn run_procedure(g: &Grid, u: u32) -> Result<(GoodnessMap, Vec<(u32, u64)>)> {
    if !g.has_tree() {
        return Err(Error::MissingTree);
    }
    if u == 0 {
        return param("u must be positive");
    }
    let (base, dim) = (g.base(), g.dim());
    let children = children_per_cube(base, dim)?;
    let mut p = Procedure {
        g,
        u: u as usize,
        base: base as u64,
        d: dim as usize,
        children,
        tuples: (0..children)
            .map(|r| {
                // Tuple digits are most-significant first; cell axis 0 is the first digit.
                tuple_from_rank(r, base, dim).into_iter().map(u64::from).collect()
            })
            .collect(),
        local: BoxShape::new(base as u64, dim),
        local_offsets: adjacency_offsets(dim),
        edges: cube_edges(dim),
        offsets: adjacency_offsets(dim),
        levels: vec![BTreeMap::new(); g.depth() as usize],
        order: Vec::new(),
    };
    p.visit(0, 0)?;
    let examined = p.order.len();
    let map = GoodnessMap { base, dim, depth: g.depth(), u, levels: p.levels, examined };
    Ok((map, p.order))
}

/// Decision order of the retained cubes below level `n`, as cube indices.
pub fn examination_sequence(g: &Grid, u: u32) -> Result<Vec<CubeIndex>> {
    let (_, order) = run_procedure(g, u)?;
    order
        .into_iter()
        .map(|(m, lin)| {
            let shape = level_shape(g.base(), g.dim(), m)?;
            CubeIndex::from_cell(g.base(), g.dim(), m, &shape.coords(lin))
        })
        .collect()
}

/// Law of the child count of the truncated dominating process: the number of
/// `(m - 1)`-good level-1 cubes given that the unit cube is m-good, i.e.
/// `Bin(N^d, p0 P(E_{m-1}))` conditioned on being at least `k`
/// (`P(E_{-1}) = 1`). Index `y` holds `P(count = y)`.
pub fn truncated_count_pmf(p0: f64, k: u32, base: u32, dim: u32, m_trunc: u32) -> Result<Vec<f64>> {
    let children = children_per_cube(base, dim)?;
    let q = if m_trunc == 0 {
        1.0
    } else {
        good_probability(p0, k, base, dim, m_trunc - 1)?.last()
    };
    check_k(k, children)?;
    let pmf = binomial_pmf_exact(children, &(exact_f64(p0) * exact_f64(q)));
    let tail = pmf.iter().skip(k as usize).fold(BigRational::zero(), |a, b| a + b);
    if tail.is_zero() {
        return param(format!("P(E_{m_trunc}) = 0 for p0 = {p0}, k = {k}: nothing to condition on"));
    }
    Ok(pmf
        .into_iter()
        .enumerate()
        .map(|(y, w)| if (y as u32) < k { 0.0 } else { to_f64(&(w / &tail)) })
        .collect())
}

/// Coupled pair `(A, B)` with `B ⊆ A`.
///
/// Every retained cube of `A` draws a child count `l` from
/// [`truncated_count_pmf`] (stream 0 of its key) and keeps the first `l`
/// ranks of its key's uniform shuffle; `B` keeps the first `k` ranks of the
/// same shuffle. Since keys depend only on the address, `B` equals
/// `sample_k(k, N, d, n, seed)` and is a k-model realization.
pub fn coupled_domination_sample(
    p0: f64,
    k: u32,
    base: u32,
    dim: u32,
    depth: u32,
    m_trunc: u32,
    seed: u64,
) -> Result<(Grid, Grid)> {
    let model = Model::Truncated { p0, k, m_trunc };
    model.validate(base, dim)?;
    let children = children_per_cube(base, dim)?;
    let counts = CountSampler::new(&truncated_count_pmf(p0, k, base, dim, m_trunc)?);
    let mut perm = Vec::with_capacity(children as usize);
    let levels = grow(base, dim, depth, seed, |_, key, out| {
        let l = counts.draw(stream_uniform(key, 0)).max(k);
        shuffled_ranks(key, children, &mut perm);
        out.extend_from_slice(&perm[..l as usize]);
    })?;
    let a = Grid::from_sets(base, dim, depth, model, seed, levels, true);
    let b = sample_k(k, base, dim, depth, seed)?;
    Ok((a, b))
}
