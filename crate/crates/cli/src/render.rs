//! Binary portable pixmap (P6) rendering of planar realizations.

use fracperc_core::connectivity::label_cells;
use fracperc_core::rng::mix64;
use fracperc_core::Grid;

use crate::CliError;

/// Largest image side rendered.
pub const MAX_SIDE: u64 = 8192;

pub const DARK: [u8; 3] = [0x20, 0x20, 0x20];
pub const LIGHT: [u8; 3] = [0xF0, 0xF0, 0xF0];

/// Colour of cluster `label`; channels stay in `0x20..0xC0` so every cluster
/// contrasts with the light background.
fn cluster_colour(label: u64) -> [u8; 3] {
    let h = mix64(label ^ 0xC0FF_EE00_D15E_A5E5);
    let ch = |shift: u32| 0x20 + ((h >> shift) & 0xFF) as u8 % 0xA0;
    [ch(0), ch(8), ch(16)]
}

/// One pixel per level-`n` cell, `N^n` on each side. Row 0 of the image is
/// the top row, i.e. the largest second coordinate.
pub fn render_ppm(g: &Grid, colour_clusters: bool) -> Result<Vec<u8>, CliError> {
    if g.dim() != 2 {
        return Err(CliError::Usage("render requires d=2".into()));
    }
    let side = g.side();
    if side > MAX_SIDE {
        return Err(CliError::Usage(format!("image side {side} exceeds {MAX_SIDE}")));
    }
    let cells = g.cells();
    let labels = colour_clusters.then(|| label_cells(cells));
    let header = format!("P6\n{side} {side}\n255\n");
    let mut out = Vec::with_capacity(header.len() + 3 * (side * side) as usize);
    out.extend_from_slice(header.as_bytes());
    for row in 0..side {
        let y = side - 1 - row;
        for x in 0..side {
            let idx = x + side * y;
            let px = if !cells.contains(idx) {
                LIGHT
            } else if let Some(l) = &labels {
                l.label_of(idx).map_or(DARK, cluster_colour)
            } else {
                DARK
            };
            out.extend_from_slice(&px);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixels(bytes: &[u8]) -> &[u8] {
        let mut newlines = 0;
        let start = bytes.iter().position(|&b| {
            newlines += (b == b'\n') as u32;
            newlines == 3
        });
        &bytes[start.unwrap() + 1..]
    }

    #[test]
    fn full_and_empty() {
        let full = render_ppm(&Grid::full(2, 2, 3).unwrap(), false).unwrap();
        assert!(full.starts_with(b"P6\n8 8\n255\n"));
        let px = pixels(&full);
        assert_eq!(px.len(), 8 * 8 * 3);
        assert!(px.iter().all(|&b| b == 0x20));
        let empty = render_ppm(&Grid::empty(3, 2, 2).unwrap(), true).unwrap();
        assert!(pixels(&empty).iter().all(|&b| b == 0xF0));
    }

    #[test]
    fn orientation_and_guard() {
        // Single cell at (0, 0): bottom-left pixel.
        let g = Grid::from_coords(2, 2, 1, &[vec![0, 0]]).unwrap();
        let px = pixels(&render_ppm(&g, false).unwrap()).to_vec();
        assert_eq!(&px[6..9], &DARK);
        assert_eq!(&px[0..3], &LIGHT);
        let cube = Grid::full(2, 3, 1).unwrap();
        assert!(matches!(render_ppm(&cube, false), Err(CliError::Usage(m)) if m == "render requires d=2"));
    }

    #[test]
    fn clusters_share_colours() {
        let g = Grid::from_coords(4, 2, 1, &[vec![0, 0], vec![1, 0], vec![3, 3]]).unwrap();
        let a = render_ppm(&g, true).unwrap();
        assert_eq!(a, render_ppm(&g, true).unwrap());
        let px = pixels(&a);
        let at = |x: usize, y: usize| &px[3 * (x + 4 * (3 - y))..3 * (x + 4 * (3 - y)) + 3];
        assert_eq!(at(0, 0), at(1, 0));
        assert_ne!(at(0, 0), at(3, 3));
    }
}
