//! Tree-canopy fitness.
//!
//! The mesh is rasterized into a max-height map over a square domain. Each
//! covered cell contributes `cell_area / (1 + exp(10 − h))` to the canopy
//! integral; uncovered cells contribute nothing. Fitness is the integral
//! divided by `1000 + vertex count`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::mesh::Mesh;

/// Height at which the logistic weight is ½.
pub const CANOPY_HEIGHT: f64 = 10.0;
/// Constant added to the vertex count in the fitness denominator.
pub const VERTEX_PENALTY_OFFSET: f64 = 1000.0;

/// Barycentric slack so that cell centers on a projected edge count as inside.
const EDGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    /// The domain is `[-half_extent, half_extent]²`.
    pub half_extent: f64,
    pub resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_extent: 20.0,
            resolution: 128,
        }
    }
}

impl GridConfig {
    pub fn cell_size(&self) -> f64 {
        2.0 * self.half_extent / self.resolution as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        -self.half_extent + (i as f64 + 0.5) * self.cell_size()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightGrid {
    config: GridConfig,
    /// Row-major by y, `None` where no triangle covers the cell center.
    heights: Vec<Option<f64>>,
}

impl HeightGrid {
    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn resolution(&self) -> usize {
        self.config.resolution
    }

    /// Height at column `i` (x) and row `j` (y).
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.heights[j * self.config.resolution + i]
    }

    pub fn heights(&self) -> &[Option<f64>] {
        &self.heights
    }

    pub fn covered_cells(&self) -> usize {
        self.heights.iter().filter(|h| h.is_some()).count()
    }

    pub fn canopy_integral(&self) -> f64 {
        let area = self.config.cell_size().powi(2);
        self.heights
            .iter()
            .flatten()
            .map(|&h| area * canopy_weight(h))
            .sum()
    }

    /// 16-bit binary PGM. Heights map linearly from [0, max height] onto
    /// [0, 65535]; uncovered cells and negative heights are 0. The first
    /// row is the largest y.
    pub fn write_pgm<W: Write>(&self, sink: &mut W) -> io::Result<()> {
        let r = self.config.resolution;
        let z_max = self.heights.iter().flatten().copied().fold(0.0, f64::max);
        let scale = if z_max > 0.0 { 65535.0 / z_max } else { 0.0 };
        write!(sink, "P5\n{r} {r}\n65535\n")?;
        let mut row = Vec::with_capacity(2 * r);
        for j in (0..r).rev() {
            row.clear();
            for i in 0..r {
                let h = self.get(i, j).unwrap_or(0.0).max(0.0);
                let v = (h * scale).round().clamp(0.0, 65535.0) as u16;
                row.extend_from_slice(&v.to_be_bytes());
            }
            sink.write_all(&row)?;
        }
        Ok(())
    }
}

/// `1 / (1 + exp(10 − h))`.
pub fn canopy_weight(h: f64) -> f64 {
    1.0 / (1.0 + (CANOPY_HEIGHT - h).exp())
}

/// Maximum interpolated z of all triangles over each cell center.
pub fn rasterize_heightmap(mesh: &Mesh, config: &GridConfig) -> HeightGrid {
    assert!(config.resolution >= 8, "resolution must be at least 8");
    let r = config.resolution;
    let cell = config.cell_size();
    let mut heights: Vec<Option<f64>> = vec![None; r * r];

    // first and last cell index whose center lies in [lo, hi]
    let span = |lo: f64, hi: f64| -> Option<(usize, usize)> {
        let first = ((lo + config.half_extent) / cell - 0.5).ceil().max(0.0);
        let last = ((hi + config.half_extent) / cell - 0.5)
            .floor()
            .min(r as f64 - 1.0);
        (first <= last).then_some((first as usize, last as usize))
    };

    for face in mesh.faces() {
        let [a, b, c] = face.map(|v| mesh.vertex(v).position);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        if det == 0.0 || !det.is_finite() {
            // vertical in projection
            continue;
        }
        let (x_lo, x_hi) = (a[0].min(b[0]).min(c[0]), a[0].max(b[0]).max(c[0]));
        let (y_lo, y_hi) = (a[1].min(b[1]).min(c[1]), a[1].max(b[1]).max(c[1]));
        let (Some((i0, i1)), Some((j0, j1))) = (span(x_lo, x_hi), span(y_lo, y_hi)) else {
            continue;
        };
        for j in j0..=j1 {
            let y = config.cell_center(j);
            for i in i0..=i1 {
                let x = config.cell_center(i);
                let l1 = ((x - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (y - a[1])) / det;
                let l2 = ((b[0] - a[0]) * (y - a[1]) - (x - a[0]) * (b[1] - a[1])) / det;
                let l0 = 1.0 - l1 - l2;
                if l0 < -EDGE_EPS || l1 < -EDGE_EPS || l2 < -EDGE_EPS {
                    continue;
                }
                let z = a[2] + l1 * (b[2] - a[2]) + l2 * (c[2] - a[2]);
                let slot = &mut heights[j * r + i];
                *slot = Some(slot.map_or(z, |h| h.max(z)));
            }
        }
    }
    HeightGrid {
        config: *config,
        heights,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub canopy_integral: f64,
    pub vertex_count: usize,
    pub fitness: f64,
    /// Vertices whose xy position lies outside the grid domain.
    pub vertices_outside: usize,
}

impl FitnessReport {
    pub const CSV_HEADER: &'static str = "canopy_integral,vertex_count,fitness,vertices_outside";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.canopy_integral, self.vertex_count, self.fitness, self.vertices_outside
        )
    }
}

pub fn fitness_from_integral(canopy_integral: f64, vertex_count: usize) -> f64 {
    canopy_integral / (VERTEX_PENALTY_OFFSET + vertex_count as f64)
}

pub fn canopy_fitness(mesh: &Mesh, config: &GridConfig) -> FitnessReport {
    let grid = rasterize_heightmap(mesh, config);
    let canopy_integral = grid.canopy_integral();
    let l = config.half_extent;
    let vertices_outside = mesh
        .vertices()
        .iter()
        .filter(|v| !(v.position[0].abs() <= l && v.position[1].abs() <= l))
        .count();
    FitnessReport {
        canopy_integral,
        vertex_count: mesh.vertex_count(),
        fitness: fitness_from_integral(canopy_integral, mesh.vertex_count()),
        vertices_outside,
    }
}
