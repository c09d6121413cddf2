//! Cube addresses, their exact geometry, the examination order on cube
//! indices, and the `L^d` lattice adjacency used everywhere else.
//!
//! A cube index is a sequence of digit tuples `i_1, ..., i_n`, each tuple an
//! element of `{0, ..., N-1}^d`. Tuples are ranked lexicographically with the
//! first coordinate most significant, so for `N = d = 2` the tuple order is
//! `(0,0) < (0,1) < (1,0) < (1,1)`.
//!
//! Lattice cells use 0-based coordinates in `{0, ..., side-1}^d`. Their linear
//! ("row-major") index puts axis 0 fastest: `x_0 + side * x_1 + side^2 * x_2 + ...`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Address of a level-`n` cube: `n` digit tuples over `{0, ..., N-1}^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CubeIndex {
    base: u32,
    dim: u32,
    /// Flattened tuples, `dim` entries per level.
    digits: Vec<u32>,
}

impl CubeIndex {
    /// The unit cube `C(∅)`.
    pub fn root(base: u32, dim: u32) -> Result<Self> {
        check_geometry(base, dim)?;
        Ok(CubeIndex { base, dim, digits: Vec::new() })
    }

    pub fn from_tuples<T: AsRef<[u32]>>(base: u32, dim: u32, tuples: &[T]) -> Result<Self> {
        let mut idx = Self::root(base, dim)?;
        for t in tuples {
            idx = idx.child(t.as_ref())?;
        }
        Ok(idx)
    }

    /// The level-`level` cube containing lattice cell `coords` of the
    /// `N^level` grid.
    pub fn from_cell(base: u32, dim: u32, level: u32, coords: &[u64]) -> Result<Self> {
        check_geometry(base, dim)?;
        if coords.len() != dim as usize {
            return param(format!("cell has {} coordinates, expected {dim}", coords.len()));
        }
        let side = checked_side(base, level)?;
        if coords.iter().any(|&c| c >= side) {
            return param(format!("cell {coords:?} outside level-{level} grid of side {side}"));
        }
        let mut digits = vec![0u32; (level * dim) as usize];
        for (c, &x) in coords.iter().enumerate() {
            let mut rest = x;
            for j in (0..level as usize).rev() {
                digits[j * dim as usize + c] = (rest % base as u64) as u32;
                rest /= base as u64;
            }
        }
        Ok(CubeIndex { base, dim, digits })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn level(&self) -> u32 {
        (self.digits.len() / self.dim as usize) as u32
    }

    pub fn is_root(&self) -> bool {
        self.digits.is_empty()
    }

    /// Digit tuple `i_j`, with `j` counted from 1 as in the address.
    pub fn tuple(&self, j: u32) -> &[u32] {
        assert!(j >= 1 && j <= self.level(), "tuple {j} out of range");
        let d = self.dim as usize;
        &self.digits[(j as usize - 1) * d..j as usize * d]
    }

    pub fn tuples(&self) -> impl Iterator<Item = &[u32]> {
        self.digits.chunks(self.dim as usize)
    }

    /// Rank of each tuple under the tuple order.
    pub fn tuple_ranks(&self) -> impl Iterator<Item = u32> + '_ {
        self.tuples().map(move |t| tuple_rank(t, self.base))
    }

    pub fn child(&self, tuple: &[u32]) -> Result<Self> {
        if tuple.len() != self.dim as usize {
            return param(format!("digit tuple {tuple:?} does not have {} entries", self.dim));
        }
        if let Some(&bad) = tuple.iter().find(|&&t| t >= self.base) {
            return param(format!("digit {bad} outside 0..{}", self.base));
        }
        let mut digits = self.digits.clone();
        digits.extend_from_slice(tuple);
        Ok(CubeIndex { base: self.base, dim: self.dim, digits })
    }

    pub fn parent(&self) -> Option<Self> {
        if self.is_root() {
            return None;
        }
        let mut digits = self.digits.clone();
        digits.truncate(digits.len() - self.dim as usize);
        Some(CubeIndex { base: self.base, dim: self.dim, digits })
    }

    /// Integer coordinates of this cube in the level-`n` grid of side `N^n`.
    pub fn cell_coords(&self) -> Vec<u64> {
        let d = self.dim as usize;
        let mut coords = vec![0u64; d];
        for t in self.tuples() {
            for (c, &digit) in t.iter().enumerate() {
                coords[c] = coords[c] * self.base as u64 + digit as u64;
            }
        }
        coords
    }
}

impl fmt::Display for CubeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_root() {
            return f.write_str("∅");
        }
        f.write_str("(")?;
        for (j, t) in self.tuples().enumerate() {
            if j > 0 {
                f.write_str(",")?;
            }
            let parts: Vec<String> = t.iter().map(u32::to_string).collect();
            write!(f, "({})", parts.join(","))?;
        }
        f.write_str(")")
    }
}

/// Rank of a digit tuple in `{0, ..., N-1}^d`, lexicographic with the first
/// coordinate most significant.
pub fn tuple_rank(tuple: &[u32], base: u32) -> u32 {
    tuple.iter().fold(0, |acc, &t| acc * base + t)
}

/// Inverse of [`tuple_rank`].
pub fn tuple_from_rank(rank: u32, base: u32, dim: u32) -> Vec<u32> {
    let mut out = vec![0u32; dim as usize];
    let mut rest = rank;
    for slot in out.iter_mut().rev() {
        *slot = rest % base;
        rest /= base;
    }
    out
}

/// Total order on cube indices used to examine cubes.
///
/// The first differing tuple decides; when one index is a prefix of the other
/// the longer (deeper) one is smaller. So children precede their parent and
/// the unit cube is the largest index of all.
pub fn compare_indices(a: &CubeIndex, b: &CubeIndex) -> Result<Ordering> {
    if a.base != b.base || a.dim != b.dim {
        return param(format!(
            "cannot compare indices over (N={}, d={}) and (N={}, d={})",
            a.base, a.dim, b.base, b.dim
        ));
    }
    Ok(order_same_geometry(a, b))
}

fn order_same_geometry(a: &CubeIndex, b: &CubeIndex) -> Ordering {
    for (ta, tb) in a.tuples().zip(b.tuples()) {
        match tuple_rank(ta, a.base).cmp(&tuple_rank(tb, b.base)) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    // Common prefix: deeper is smaller.
    b.level().cmp(&a.level())
}

impl PartialOrd for CubeIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Indices of different `(N, d)` are ordered by `(N, d)` first so that `Ord`
/// stays total; within one geometry this is [`compare_indices`].
impl Ord for CubeIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.base, self.dim)
            .cmp(&(other.base, other.dim))
            .then_with(|| order_same_geometry(self, other))
    }
}

/// Exact corner and side length of `C(I)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeGeometry {
    pub corner: Vec<BigRational>,
    pub side: BigRational,
}

impl CubeGeometry {
    /// True when this closed cube lies inside `outer`.
    pub fn is_within(&self, outer: &CubeGeometry) -> bool {
        self.corner.iter().zip(&outer.corner).all(|(c, oc)| {
            c >= oc && (c + &self.side) <= (oc + &outer.side)
        })
    }
}

pub fn cube_geometry(i: &CubeIndex) -> CubeGeometry {
    let denom = BigInt::from(i.base).pow(i.level());
    let corner = i
        .cell_coords()
        .into_iter()
        .map(|num| BigRational::new(BigInt::from(num), denom.clone()))
        .collect();
    CubeGeometry { corner, side: BigRational::new(BigInt::one(), denom) }
}

/// A vertex of a finite box `{0, ..., side-1}^d` of the lattice `L^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeCell {
    pub coords: Vec<u64>,
    pub side: u64,
}

impl LatticeCell {
    pub fn new(coords: Vec<u64>, side: u64) -> Result<Self> {
        if side == 0 {
            return param("box side must be positive");
        }
        if coords.iter().any(|&c| c >= side) {
            return param(format!("cell {coords:?} outside box of side {side}"));
        }
        Ok(LatticeCell { coords, side })
    }

    pub fn linear(&self) -> u64 {
        BoxShape::new(self.side, self.coords.len() as u32).linear(&self.coords)
    }
}

/// `L^d` adjacency: distinct, every coordinate differs by at most one, and at
/// least one coordinate agrees. Cells touching only at a corner are not
/// adjacent.
pub fn adjacent(u: &LatticeCell, v: &LatticeCell) -> bool {
    if u.coords.len() != v.coords.len() || u.coords == v.coords {
        return false;
    }
    let close = u.coords.iter().zip(&v.coords).all(|(a, b)| a.abs_diff(*b) <= 1);
    let shares = u.coords.iter().zip(&v.coords).any(|(a, b)| a == b);
    close && shares
}

/// Offsets `δ ∈ {-1,0,1}^d` with `δ ≠ 0` and at least one zero entry.
pub fn adjacency_offsets(dim: u32) -> Vec<Vec<i64>> {
    let d = dim as usize;
    let total = 3usize.pow(dim);
    let mut out = Vec::new();
    for code in 0..total {
        let mut rest = code;
        let mut off = vec![0i64; d];
        for slot in off.iter_mut() {
            *slot = (rest % 3) as i64 - 1;
            rest /= 3;
        }
        let zeros = off.iter().filter(|&&o| o == 0).count();
        if zeros > 0 && zeros < d {
            out.push(off);
        }
    }
    out
}

/// Geometry of a box `{0, ..., side-1}^d` with the axis-0-fastest linear index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoxShape {
    pub side: u64,
    pub dim: u32,
}

impl BoxShape {
    pub fn new(side: u64, dim: u32) -> Self {
        BoxShape { side, dim }
    }

    pub fn total(&self) -> u128 {
        (self.side as u128).pow(self.dim)
    }

    pub fn linear(&self, coords: &[u64]) -> u64 {
        coords.iter().rev().fold(0u64, |acc, &c| acc * self.side + c)
    }

    pub fn coords_into(&self, mut idx: u64, out: &mut [u64]) {
        for slot in out.iter_mut() {
            *slot = idx % self.side;
            idx /= self.side;
        }
    }

    pub fn coords(&self, idx: u64) -> Vec<u64> {
        let mut out = vec![0; self.dim as usize];
        self.coords_into(idx, &mut out);
        out
    }

    /// Stride of `axis` in the linear index.
    pub fn stride(&self, axis: usize) -> u64 {
        self.side.pow(axis as u32)
    }
}

/// Which part of the unit cube's boundary to select.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundarySelector {
    /// The face `x_axis = 0` (`high == false`) or `x_axis = 1`.
    Face { axis: usize, high: bool },
    /// The edge `L_r(a)`: coordinate `axis` varies, every other coordinate `i`
    /// is pinned to `anchor[i] ∈ {0, 1}`. `anchor[axis]` is ignored.
    Edge { axis: usize, anchor: Vec<u8> },
}

/// Every edge `L_r(a)` of the unit cube, each listed once (`d * 2^(d-1)` edges).
pub fn cube_edges(dim: u32) -> Vec<BoundarySelector> {
    let d = dim as usize;
    let mut out = Vec::new();
    for axis in 0..d {
        for code in 0..(1usize << d) {
            if code >> axis & 1 == 1 {
                continue;
            }
            let anchor = (0..d).map(|i| (code >> i & 1) as u8).collect();
            out.push(BoundarySelector::Edge { axis, anchor });
        }
    }
    out
}

impl BoundarySelector {
    fn validate(&self, dim: u32) -> Result<()> {
        match self {
            BoundarySelector::Face { axis, .. } if *axis >= dim as usize => {
                param(format!("face axis {axis} outside 0..{dim}"))
            }
            BoundarySelector::Edge { axis, anchor } => {
                if *axis >= dim as usize {
                    return param(format!("edge axis {axis} outside 0..{dim}"));
                }
                if anchor.len() != dim as usize || anchor.iter().any(|&a| a > 1) {
                    return param(format!("edge anchor {anchor:?} is not a 0/1 vector of length {dim}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Whether a cell of a box with the given side touches this boundary part.
    pub fn contains(&self, coords: &[u64], side: u64) -> bool {
        let last = side - 1;
        match self {
            BoundarySelector::Face { axis, high } => coords[*axis] == if *high { last } else { 0 },
            BoundarySelector::Edge { axis, anchor } => coords
                .iter()
                .enumerate()
                .all(|(i, &c)| i == *axis || c == anchor[i] as u64 * last),
        }
    }

    /// Cells of a box of `side` on this boundary part, in linear-index order.
    pub fn cells_in_box(&self, side: u64, dim: u32) -> Result<Vec<LatticeCell>> {
        self.validate(dim)?;
        let shape = BoxShape::new(side, dim);
        let last = side - 1;
        let d = dim as usize;
        // Free axes range over the whole side; pinned axes are fixed.
        let pinned: Vec<Option<u64>> = (0..d)
            .map(|i| match self {
                BoundarySelector::Face { axis, high } => {
                    (i == *axis).then_some(if *high { last } else { 0 })
                }
                BoundarySelector::Edge { axis, anchor } => {
                    (i != *axis).then_some(anchor[i] as u64 * last)
                }
            })
            .collect();
        let free: Vec<usize> = (0..d).filter(|&i| pinned[i].is_none()).collect();
        let count = (side as u128).pow(free.len() as u32);
        let mut out = Vec::with_capacity(count as usize);
        for code in 0..count {
            let mut rest = code;
            let mut coords: Vec<u64> = pinned.iter().map(|p| p.unwrap_or(0)).collect();
            for &i in &free {
                coords[i] = (rest % side as u128) as u64;
                rest /= side as u128;
            }
            out.push(coords);
        }
        out.sort_by_key(|c| shape.linear(c));
        Ok(out.into_iter().map(|coords| LatticeCell { coords, side }).collect())
    }
}

/// Level-`n` cells whose closed cubes meet the selected face or edge of the
/// unit cube.
pub fn boundary_cells(
    level: u32,
    base: u32,
    dim: u32,
    selector: &BoundarySelector,
) -> Result<Vec<LatticeCell>> {
    check_geometry(base, dim)?;
    let side = checked_side(base, level)?;
    selector.cells_in_box(side, dim)
}

pub(crate) fn check_geometry(base: u32, dim: u32) -> Result<()> {
    if base < 2 {
        return param(format!("N must be at least 2, got {base}"));
    }
    if dim < 2 {
        return param(format!("d must be at least 2, got {dim}"));
    }
    Ok(())
}

/// `N^level`, rejecting values that do not fit in a `u64`.
pub(crate) fn checked_side(base: u32, level: u32) -> Result<u64> {
    (base as u64)
        .checked_pow(level)
        .map_or_else(|| param(format!("N^n = {base}^{level} overflows")), Ok)
}

/// `num / den` as a `BigRational`; test helper.
#[cfg(test)]
pub(crate) fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
