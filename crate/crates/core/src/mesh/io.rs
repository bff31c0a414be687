//! Plain-text mesh format:
//!
//! ```text
//! polymesh v1 <family> <nv> <nc>
//! x y boundary_flag        (nv lines)
//! k i1 ... ik              (nc lines, counterclockwise)
//! ```

use super::{MeshFamily, Point2, PolygonalMesh};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

impl PolygonalMesh {
    /// Serializes with 17 significant digits so reading back is bit-exact.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "polymesh v1 {} {} {}",
            self.family(),
            self.num_vertices(),
            self.num_cells()
        )
        .unwrap();
        for (p, &b) in self.vertices().iter().zip(self.boundary_vertex_flags()) {
            writeln!(s, "{:.16e} {:.16e} {}", p.x, p.y, u8::from(b)).unwrap();
        }
        for cell in self.cells() {
            write!(s, "{}", cell.len()).unwrap();
            for v in cell {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let perr = |line: usize, msg: String| Error::Parse { line, msg };

        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 || h[0] != "polymesh" || h[1] != "v1" {
            return Err(perr(hl, format!("bad header '{header}'")));
        }
        let family: MeshFamily = h[2].parse().map_err(|e: Error| perr(hl, e.to_string()))?;
        let nv: usize = h[3].parse().map_err(|_| perr(hl, format!("bad vertex count '{}'", h[3])))?;
        let nc: usize = h[4].parse().map_err(|_| perr(hl, format!("bad cell count '{}'", h[4])))?;

        let mut vertices = Vec::with_capacity(nv);
        let mut flags = Vec::with_capacity(nv);
        for k in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| perr(hl, format!("file ends after {k} of {nv} vertices")))?;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 3 {
                return Err(perr(ln, format!("vertex record needs 3 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| perr(ln, format!("bad number '{s}'")));
            vertices.push(Point2::new(num(f[0])?, num(f[1])?));
            flags.push(match f[2] {
                "0" => false,
                "1" => true,
                other => return Err(perr(ln, format!("bad boundary flag '{other}'"))),
            });
        }
        let mut cells = Vec::with_capacity(nc);
        for k in 0..nc {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| perr(hl, format!("file ends after {k} of {nc} cells")))?;
            let f: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|_| perr(ln, format!("bad index '{s}'"))))
                .collect::<Result<_>>()?;
            if f.is_empty() || f[0] + 1 != f.len() {
                return Err(perr(ln, format!("cell {k}: vertex count does not match record")));
            }
            cells.push(f[1..].to_vec());
        }
        if let Some((ln, _)) = lines.next() {
            return Err(perr(ln, "trailing data after last cell".into()));
        }
        let mesh = PolygonalMesh::new(family, vertices, cells)?;
        if let Some(v) = (0..nv).find(|&v| flags[v] != mesh.is_boundary_vertex(v)) {
            return Err(Error::Validation(format!(
                "boundary flag of vertex {v} disagrees with the connectivity"
            )));
        }
        Ok(mesh)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_text(&text)
    }
}
