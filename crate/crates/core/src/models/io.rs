//! Grid serialization.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! magic    6 bytes  "FPGRID"
//! version  u16      1
//! N, d, n  u32 x3
//! tag      u8       model tag (0 explicit, 1 mfp, 2 k, 3 gfp, 4 fat, 5 truncated)
//! flags    u8       bit 0: every level 1..=n stored (tree), else level n only
//! seed     u64
//! params   u32 length + UTF-8 JSON of the model descriptor
//! levels   for each stored level, in increasing level order:
//!            u64 run count, then that many LEB128 run lengths
//! ```
//!
//! A level is the boolean stream of its cells in linear-index order (axis 0
//! fastest). Runs alternate absent/present starting with an absent run, which
//! may be empty; the run lengths sum to the number of cells in the level.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::grid::{level_shape, CellSet, Grid, GridHeader};
use crate::models::spec::Model;

pub const MAGIC: &[u8; 6] = b"FPGRID";
pub const FORMAT_VERSION: u16 = 1;

fn runs_of(set: &CellSet) -> Vec<u64> {
    let total = set.shape().total() as u64;
    let mut runs = Vec::new();
    let mut pos = 0u64;
    let mut present = 0u64;
    for c in set.iter() {
        if c == pos && present > 0 {
            present += 1;
        } else {
            if present > 0 {
                runs.push(present);
            }
            runs.push(c - pos);
            present = 1;
        }
        pos = c + 1;
    }
    if present > 0 {
        runs.push(present);
    }
    if pos < total || runs.is_empty() {
        runs.push(total - pos);
    }
    runs
}

fn write_varint<W: Write>(w: &mut W, mut v: u64) -> Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            w.write_all(&[byte])?;
            return Ok(());
        }
        w.write_all(&[byte | 0x80])?;
    }
}

fn read_varint<R: Read>(r: &mut R) -> Result<u64> {
    let mut v = 0u64;
    for shift in (0..64).step_by(7) {
        let byte = read_array::<1, _>(r)?[0];
        v |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
    }
    Err(Error::Format("varint longer than 64 bits".into()))
}

fn read_array<const L: usize, R: Read>(r: &mut R) -> Result<[u8; L]> {
    let mut buf = [0u8; L];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated input: {e}")))?;
    Ok(buf)
}

pub fn write_grid<W: Write>(grid: &Grid, w: &mut W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for v in [grid.base(), grid.dim(), grid.depth()] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[grid.model().tag(), grid.has_tree() as u8])?;
    w.write_all(&grid.seed().to_le_bytes())?;
    let params = serde_json::to_vec(grid.model())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    w.write_all(&params)?;
    for level in grid.stored_levels() {
        let runs = runs_of(level);
        w.write_all(&(runs.len() as u64).to_le_bytes())?;
        for r in runs {
            write_varint(w, r)?;
        }
    }
    Ok(())
}

pub fn to_bytes(grid: &Grid) -> Vec<u8> {
    let mut out = Vec::new();
    write_grid(grid, &mut out).expect("writing to memory");
    out
}

pub fn read_grid<R: Read>(r: &mut R) -> Result<Grid> {
    if &read_array::<6, _>(r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_array(r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let base = u32::from_le_bytes(read_array(r)?);
    let dim = u32::from_le_bytes(read_array(r)?);
    let depth = u32::from_le_bytes(read_array(r)?);
    let [tag, flags] = read_array::<2, _>(r)?;
    let seed = u64::from_le_bytes(read_array(r)?);
    let plen = u32::from_le_bytes(read_array(r)?) as usize;
    let mut params = vec![0u8; plen];
    r.read_exact(&mut params)
        .map_err(|e| Error::Format(format!("truncated model parameters: {e}")))?;
    let model: Model = serde_json::from_slice(&params)?;
    if model.tag() != tag {
        return Err(Error::Format(format!("model tag {tag} does not match parameters `{}`", model.name())));
    }
    crate::index::check_geometry(base, dim)?;
    if depth == 0 {
        return Err(Error::Format("depth 0".into()));
    }
    let tree = flags & 1 == 1;
    let stored: Vec<u32> = if tree { (1..=depth).collect() } else { vec![depth] };
    let mut levels = Vec::with_capacity(stored.len());
    for m in stored {
        let shape = level_shape(base, dim, m)?;
        let total = shape.total() as u64;
        let nruns = u64::from_le_bytes(read_array(r)?);
        let mut cells = Vec::new();
        let mut pos = 0u64;
        for i in 0..nruns {
            let len = read_varint(r)?;
            let end = pos
                .checked_add(len)
                .filter(|&e| e <= total)
                .ok_or_else(|| Error::Format(format!("runs of level {m} overflow its {total} cells")))?;
            if i % 2 == 1 {
                cells.extend(pos..end);
            }
            pos = end;
        }
        if pos != total {
            return Err(Error::Format(format!("runs of level {m} cover {pos} of {total} cells")));
        }
        levels.push(CellSet::from_sorted(shape, cells));
    }
    let grid = Grid::from_sets(base, dim, depth, model, seed, levels, tree);
    if !grid.tree_consistent() {
        return Err(Error::Format("stored tree is inconsistent".into()));
    }
    Ok(grid)
}

pub fn from_bytes(mut bytes: &[u8]) -> Result<Grid> {
    read_grid(&mut bytes)
}

/// Human-readable form: header plus explicit cell coordinates per level.
#[derive(Debug, Serialize, Deserialize)]
pub struct GridJson {
    pub format: String,
    pub version: u16,
    #[serde(flatten)]
    pub header: GridHeader,
    pub tree: bool,
    pub levels: Vec<LevelJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LevelJson {
    pub level: u32,
    pub cells: Vec<Vec<u64>>,
}

pub fn to_json(grid: &Grid) -> GridJson {
    let first = if grid.has_tree() { 1 } else { grid.depth() };
    let levels = grid
        .stored_levels()
        .iter()
        .zip(first..)
        .map(|(set, level)| LevelJson {
            level,
            cells: set.iter().map(|c| set.shape().coords(c)).collect(),
        })
        .collect();
    GridJson {
        format: "fracperc-grid".into(),
        version: FORMAT_VERSION,
        header: grid.header(),
        tree: grid.has_tree(),
        levels,
    }
}

pub fn from_json(doc: &GridJson) -> Result<Grid> {
    let h = &doc.header;
    if doc.tree {
        let mut levels = Vec::with_capacity(doc.levels.len());
        for (m, lvl) in doc.levels.iter().enumerate() {
            let shape = level_shape(h.base, h.d, m as u32 + 1)?;
            levels.push(lvl.cells.iter().map(|c| shape.linear(c)).collect());
        }
        Grid::with_tree(h.base, h.d, h.model.clone(), h.seed, levels)
    } else {
        let cells = doc.levels.last().map(|l| l.cells.clone()).unwrap_or_default();
        let g = Grid::from_coords(h.base, h.d, h.n, &cells)?;
        Ok(Grid::from_sets(h.base, h.d, h.n, h.model.clone(), h.seed, g.stored_levels().to_vec(), false))
    }
}
