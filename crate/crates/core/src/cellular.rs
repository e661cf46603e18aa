//! Per-vertex state exchange.
//!
//! Each vertex carries an output vector of width N. One synchronous update
//! builds every vertex's 3N input from the frozen previous outputs and runs
//! the shared network on it:
//!
//! * `input[3j]`     own previous output j
//! * `input[3j + 1]` mean of neighbors' output j
//! * `input[3j + 2]` population standard deviation of neighbors' output j
//!
//! and then the last four slots are overwritten with the growth direction
//! (x, y, z) and the vertex height.
//!
//! Neighbor values are sorted before they are aggregated, so results are
//! bit-identical under any relabeling of the vertices.

use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::{Mesh, MeshError};
use crate::neuralnet::{NetError, Network, Scratch};

/// Number of input slots taken over by geometry.
pub const GEOMETRY_INPUTS: usize = 4;

/// Vertex counts at or above this evaluate in parallel.
const PARALLEL_THRESHOLD: usize = 1024;

#[derive(Debug, Error)]
pub enum CellError {
    #[error("dispersion of an empty list")]
    EmptyList,
    #[error("vertex {0} has no neighbors")]
    Isolated(usize),
    #[error("state has {state} vertices, mesh has {mesh}")]
    VertexCount { state: usize, mesh: usize },
    #[error("network takes {inputs} inputs and gives {outputs} outputs; need 3 × {width} inputs and {width} outputs")]
    NetworkShape {
        inputs: usize,
        outputs: usize,
        width: usize,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Output vectors of every vertex, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    width: usize,
    outputs: Vec<f64>,
}

impl CellState {
    /// `n_vertices` rows of `value`.
    pub fn uniform(n_vertices: usize, width: usize, value: f64) -> Self {
        CellState {
            width,
            outputs: vec![value; n_vertices * width],
        }
    }

    /// Every output at 0.5, the neutral value.
    pub fn neutral(n_vertices: usize, width: usize) -> Self {
        Self::uniform(n_vertices, width, 0.5)
    }

    pub fn from_rows(width: usize, rows: &[Vec<f64>]) -> Self {
        assert!(rows.iter().all(|r| r.len() == width), "row width mismatch");
        CellState {
            width,
            outputs: rows.concat(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.outputs.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn output(&self, i: usize) -> &[f64] {
        &self.outputs[i * self.width..(i + 1) * self.width]
    }

    pub fn push(&mut self, output: &[f64]) {
        assert_eq!(output.len(), self.width);
        self.outputs.extend_from_slice(output);
    }

    /// Component-wise mean of the given rows.
    pub fn mean_of(&self, rows: &[usize]) -> Vec<f64> {
        let n = rows.len() as f64;
        (0..self.width)
            .map(|j| rows.iter().map(|&r| self.output(r)[j]).sum::<f64>() / n)
            .collect()
    }

    /// Row `i` moves to row `perm[i]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        let mut out = self.clone();
        for (old, &new) in perm.iter().enumerate() {
            out.outputs[new * self.width..(new + 1) * self.width].copy_from_slice(self.output(old));
        }
        out
    }
}

/// Mean and population standard deviation. Sorts `values` in place, which
/// makes both results independent of the original order.
fn mean_and_dispersion(values: &mut [f64]) -> (f64, f64) {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population standard deviation, `sqrt(mean((x - mean(x))²))`.
pub fn dispersion(values: &[f64]) -> Result<f64, CellError> {
    if values.is_empty() {
        return Err(CellError::EmptyList);
    }
    let mut v = values.to_vec();
    Ok(mean_and_dispersion(&mut v).1)
}

fn fill_input(
    state: &CellState,
    mesh: &Mesh,
    i: usize,
    neighbors: &[usize],
    gather: &mut Vec<f64>,
    input: &mut [f64],
) -> Result<(), CellError> {
    if neighbors.is_empty() {
        return Err(CellError::Isolated(i));
    }
    let own = state.output(i);
    for j in 0..state.width {
        gather.clear();
        gather.extend(neighbors.iter().map(|&n| state.output(n)[j]));
        let (mean, disp) = mean_and_dispersion(gather);
        input[3 * j] = own[j];
        input[3 * j + 1] = mean;
        input[3 * j + 2] = disp;
    }
    let v = mesh.vertex(i);
    let tail = input.len() - GEOMETRY_INPUTS;
    input[tail..tail + 3].copy_from_slice(&v.growth_dir);
    input[tail + 3] = v.position[2];
    Ok(())
}

/// The 3N input vector of vertex `i`.
pub fn assemble_input(state: &CellState, mesh: &Mesh, i: usize) -> Result<Vec<f64>, CellError> {
    check_counts(state, mesh)?;
    let neighbors = mesh.neighbors(i)?;
    let mut input = vec![0.0; 3 * state.width];
    if input.len() < GEOMETRY_INPUTS {
        return Err(CellError::NetworkShape {
            inputs: input.len(),
            outputs: state.width,
            width: state.width,
        });
    }
    fill_input(state, mesh, i, &neighbors, &mut Vec::new(), &mut input)?;
    Ok(input)
}

fn check_counts(state: &CellState, mesh: &Mesh) -> Result<(), CellError> {
    if state.len() != mesh.vertex_count() {
        return Err(CellError::VertexCount {
            state: state.len(),
            mesh: mesh.vertex_count(),
        });
    }
    Ok(())
}

/// Checks that `net` maps 3N inputs to N outputs for state width N.
pub fn check_network(net: &Network, width: usize) -> Result<(), CellError> {
    let arch = net.architecture();
    if arch.inputs() != 3 * width || arch.outputs() != width || 3 * width < GEOMETRY_INPUTS {
        return Err(CellError::NetworkShape {
            inputs: arch.inputs(),
            outputs: arch.outputs(),
            width,
        });
    }
    Ok(())
}

/// One synchronous update: every new output is computed from the old state
/// only. The input state is left untouched.
pub fn step_outputs(state: &CellState, mesh: &Mesh, net: &Network) -> Result<CellState, CellError> {
    check_counts(state, mesh)?;
    check_network(net, state.width)?;
    let width = state.width;
    let neighbors = mesh.neighbor_table();
    let mut next = CellState::neutral(state.len(), width);

    let update = |(i, row): (usize, &mut [f64]),
                  (gather, input, scratch): &mut (Vec<f64>, Vec<f64>, Scratch)|
     -> Result<(), CellError> {
        fill_input(state, mesh, i, neighbors.get(i), gather, input)?;
        row.copy_from_slice(net.evaluate_into(input, scratch)?);
        Ok(())
    };
    let init = || (Vec::new(), vec![0.0; 3 * width], Scratch::default());

    if state.len() >= PARALLEL_THRESHOLD {
        next.outputs
            .par_chunks_mut(width)
            .enumerate()
            .try_for_each_init(init, |buf, item| update(item, buf))?;
    } else {
        let mut buf = init();
        for item in next.outputs.chunks_mut(width).enumerate() {
            update(item, &mut buf)?;
        }
    }
    Ok(next)
}
