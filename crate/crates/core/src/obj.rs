//! Wavefront OBJ export and a strict triangle-only reader.
//!
//! Export writes `v x y z` lines in fixed notation with nine significant
//! digits followed by `f a b c` lines (1-based), both in storage order.
//! Output depends only on the mesh, never on locale.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::{Mesh, Vertex};

#[derive(Debug, Error)]
pub enum ObjError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NotTriangle { line: usize, count: usize },
}

/// Formats `x` in fixed notation with nine significant digits.
pub fn format_coord(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        // also folds -0 into 0
        return if x.is_finite() {
            "0".to_string()
        } else {
            format!("{x}")
        };
    }
    // exponent after rounding to 9 significant digits
    let sci = format!("{x:.8e}");
    let exp: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .expect("scientific formatting has an exponent");
    let decimals = (8 - exp).clamp(0, 40) as usize;
    let s = format!("{x:.decimals$}");
    if s.trim_start_matches('-')
        .trim_start_matches(['0', '.'])
        .is_empty()
    {
        "0".to_string()
    } else {
        s
    }
}

pub fn export_obj<W: Write>(mesh: &Mesh, sink: &mut W) -> io::Result<()> {
    for v in mesh.vertices() {
        let [x, y, z] = v.position.map(format_coord);
        writeln!(sink, "v {x} {y} {z}")?;
    }
    for f in mesh.faces() {
        writeln!(sink, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Positions and triangles read back from an OBJ file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObjData {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl ObjData {
    /// Turns the data into a [`Mesh`]. OBJ carries no growth directions, so
    /// every vertex gets +z.
    pub fn into_mesh(self) -> Result<Mesh, crate::mesh::MeshError> {
        let vertices = self
            .positions
            .into_iter()
            .map(|position| Vertex {
                position,
                growth_dir: [0.0, 0.0, 1.0],
            })
            .collect();
        Mesh::from_parts(vertices, self.faces)
    }
}

fn parse_index(tok: &str, n_vertices: usize, line: usize) -> Result<usize, ObjError> {
    // accept "i", "i/t", "i/t/n", "i//n"
    let head = tok.split('/').next().unwrap_or("");
    let raw: i64 = head.parse().map_err(|_| ObjError::Parse {
        line,
        message: format!("bad vertex index {tok:?}"),
    })?;
    let idx = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        n_vertices as i64 + raw
    } else {
        -1
    };
    if idx < 0 || idx as usize >= n_vertices {
        return Err(ObjError::Parse {
            line,
            message: format!("vertex index {raw} out of range ({n_vertices} vertices so far)"),
        });
    }
    Ok(idx as usize)
}

/// Reads `v` and `f` records; other record types are ignored. Faces with
/// anything other than three corners are rejected.
pub fn read_obj<R: BufRead>(reader: R) -> Result<ObjData, ObjError> {
    let mut data = ObjData::default();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let coords: Vec<f64> = toks
                    .take(3)
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| ObjError::Parse {
                        line: line_no,
                        message: format!("bad coordinate: {e}"),
                    })?;
                let [x, y, z] = coords[..] else {
                    return Err(ObjError::Parse {
                        line: line_no,
                        message: "vertex needs three coordinates".into(),
                    });
                };
                data.positions.push([x, y, z]);
            }
            Some("f") => {
                let idx: Vec<usize> = toks
                    .map(|t| parse_index(t, data.positions.len(), line_no))
                    .collect::<Result<_, _>>()?;
                let [a, b, c] = idx[..] else {
                    return Err(ObjError::NotTriangle {
                        line: line_no,
                        count: idx.len(),
                    });
                };
                data.faces.push([a, b, c]);
            }
            _ => {}
        }
    }
    Ok(data)
}
