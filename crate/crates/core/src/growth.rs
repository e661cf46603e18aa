//! The growth timestep and the multi-step driver.
//!
//! One step runs, in order: the synchronous output update, vertex
//! displacement along each growth direction, a face-split pass and an
//! edge-flip pass. Both topology passes work from a snapshot taken when the
//! pass starts, so nothing created during a pass is revisited in it.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cellular::{self, CellError, CellState};
use crate::geom::{self, Vec3};
use crate::mesh::{FlipRules, Mesh, MeshError};
use crate::neuralnet::{Genome, NetError, Network};

/// Split-direction sums shorter than this fall back to the face normal.
const BLEND_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GrowthError {
    #[error("invalid growth config: {0}")]
    Config(String),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Net(#[from] NetError),
}

/// Which output channels steer growth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channels {
    /// Displacement along the growth direction.
    pub movement: usize,
    /// Modulates the face-split area threshold.
    pub split: usize,
    /// Weights parent growth directions for split-created vertices.
    pub blend: usize,
}

impl Default for Channels {
    fn default() -> Self {
        Channels {
            movement: 0,
            split: 1,
            blend: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub n_steps: usize,
    /// Nominal displacement scale k₀.
    pub base_step: f64,
    /// Cap on any single vertex displacement per step.
    pub max_step: f64,
    /// Split threshold A₀ at neutral split output.
    pub split_area_base: f64,
    /// Strength c of the exponential threshold modulation.
    pub split_modulation: f64,
    pub flip_angle_cos: f64,
    pub min_valence: usize,
    pub max_vertices: usize,
    pub channels: Channels,
}

/// Mean face area of the seed icosahedron.
pub fn seed_mean_face_area() -> f64 {
    let m = Mesh::icosahedron();
    (0..m.face_count())
        .map(|f| m.face_area(f).expect("face in range"))
        .sum::<f64>()
        / m.face_count() as f64
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            n_steps: 200,
            base_step: 0.3,
            max_step: 0.1,
            split_area_base: 2.0 * seed_mean_face_area(),
            split_modulation: 2.0,
            flip_angle_cos: 40f64.to_radians().cos(),
            min_valence: 5,
            max_vertices: 20_000,
            channels: Channels::default(),
        }
    }
}

impl GrowthConfig {
    pub fn flip_rules(&self) -> FlipRules {
        FlipRules {
            min_normal_cos: self.flip_angle_cos,
            min_valence: self.min_valence,
        }
    }

    /// Checks ranges and that the channels fit an output width of `width`.
    pub fn check(&self, width: usize) -> Result<(), GrowthError> {
        let positive = [
            ("base_step", self.base_step),
            ("max_step", self.max_step),
            ("split_area_base", self.split_area_base),
            ("split_modulation", self.split_modulation),
            ("flip_angle_cos", self.flip_angle_cos),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(GrowthError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.min_valence == 0 || self.max_vertices == 0 {
            return Err(GrowthError::Config(
                "min_valence and max_vertices must be positive".into(),
            ));
        }
        let Channels {
            movement,
            split,
            blend,
        } = self.channels;
        if movement == split || split == blend || movement == blend {
            return Err(GrowthError::Config(
                "growth channels must be distinct".into(),
            ));
        }
        if movement.max(split).max(blend) >= width {
            return Err(GrowthError::Config(format!(
                "growth channels {:?} do not fit {width} outputs",
                self.channels
            )));
        }
        Ok(())
    }
}

/// The seed mesh and its neutral state for outputs of width `width`.
pub fn make_seed(width: usize) -> (Mesh, CellState) {
    let mesh = Mesh::icosahedron();
    let state = CellState::neutral(mesh.vertex_count(), width);
    (mesh, state)
}

/// Per-vertex displacement for the current outputs.
///
/// The raw magnitude is `s = max(0, w_move − ½)`. The scale is `k₀` unless
/// that would move some vertex farther than `max_step`, in which case it
/// shrinks so the largest move is exactly `max_step`.
pub fn compute_displacements(mesh: &Mesh, state: &CellState, config: &GrowthConfig) -> Vec<Vec3> {
    let ch = config.channels.movement;
    let raw: Vec<f64> = (0..mesh.vertex_count())
        .map(|i| (state.output(i)[ch] - 0.5).max(0.0))
        .collect();
    let peak = raw.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return vec![[0.0; 3]; raw.len()];
    }
    let k = if config.base_step * peak <= config.max_step {
        config.base_step
    } else {
        config.max_step / peak
    };
    raw.iter()
        .zip(mesh.vertices())
        .map(|(&s, v)| {
            if s == 0.0 {
                [0.0; 3]
            } else {
                geom::scale(v.growth_dir, k * s)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SplitOutcome {
    pub splits: usize,
    /// The vertex cap stopped at least one split.
    pub capped: bool,
}

/// Area a face must exceed to split: `A₀ · exp(c · (mean split output − ½))`.
pub fn split_threshold(mesh: &Mesh, state: &CellState, f: usize, config: &GrowthConfig) -> f64 {
    let ch = config.channels.split;
    let mean = mesh
        .face(f)
        .iter()
        .map(|&v| state.output(v)[ch])
        .sum::<f64>()
        / 3.0;
    config.split_area_base * (config.split_modulation * (mean - 0.5)).exp()
}

/// Direction for a vertex created by splitting face `f`:
/// `normalize(n + Σ w_blend · h)` over the three corners, or the face
/// normal if that sum vanishes.
pub fn split_direction(
    mesh: &Mesh,
    state: &CellState,
    f: usize,
    config: &GrowthConfig,
) -> Result<Vec3, MeshError> {
    let n = mesh.face_normal(f)?;
    let ch = config.channels.blend;
    let sum = mesh.face(f).iter().fold(n, |acc, &p| {
        geom::add(
            acc,
            geom::scale(mesh.vertex(p).growth_dir, state.output(p)[ch]),
        )
    });
    Ok(geom::normalize(sum, BLEND_EPS).unwrap_or(n))
}

/// Splits every face (present when the pass starts) whose area exceeds its
/// threshold. New vertices take the mean output of their three parents.
pub fn split_pass(mesh: &mut Mesh, state: &mut CellState, config: &GrowthConfig) -> SplitOutcome {
    let mut out = SplitOutcome::default();
    for f in 0..mesh.face_count() {
        let area = mesh.face_area(f).expect("face in range");
        if !(area > split_threshold(mesh, state, f, config)) {
            continue;
        }
        if mesh.vertex_count() >= config.max_vertices {
            out.capped = true;
            break;
        }
        // degenerate faces have no normal and are skipped
        let Ok(dir) = split_direction(mesh, state, f, config) else {
            continue;
        };
        let output = state.mean_of(&mesh.face(f));
        if mesh.split_face(f, dir).is_ok() {
            state.push(&output);
            out.splits += 1;
        }
    }
    out
}

/// Tries every edge present when the pass starts, in sorted order.
pub fn flip_pass(mesh: &mut Mesh, config: &GrowthConfig) -> usize {
    let rules = config.flip_rules();
    let mut flips = 0;
    for edge in mesh.sorted_edges() {
        // an earlier flip in this pass may have removed it
        if mesh.edge_faces(edge).is_none() {
            continue;
        }
        if mesh.try_flip_edge(edge, &rules).expect("edge exists") {
            flips += 1;
        }
    }
    flips
}

/// Counters for one completed step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub vertices: usize,
    pub faces: usize,
    pub splits: usize,
    pub flips: usize,
    pub max_displacement: f64,
    pub total_displacement: f64,
    pub capped: bool,
}

/// Advances `mesh` and `state` by one timestep.
pub fn step(
    mesh: &mut Mesh,
    state: &mut CellState,
    net: &Network,
    config: &GrowthConfig,
) -> Result<StepRecord, GrowthError> {
    *state = cellular::step_outputs(state, mesh, net)?;

    let mut max_displacement: f64 = 0.0;
    let mut total_displacement = 0.0;
    for (i, d) in compute_displacements(mesh, state, config)
        .into_iter()
        .enumerate()
    {
        if d == [0.0; 3] {
            continue;
        }
        let len = geom::norm(d);
        max_displacement = max_displacement.max(len);
        total_displacement += len;
        mesh.displace(i, d);
    }

    let split = split_pass(mesh, state, config);
    let flips = flip_pass(mesh, config);
    Ok(StepRecord {
        step: 0,
        vertices: mesh.vertex_count(),
        faces: mesh.face_count(),
        splits: split.splits,
        flips,
        max_displacement,
        total_displacement,
        capped: split.capped,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: Vec<StepRecord>,
}

impl RunStats {
    pub fn total_displacement(&self) -> f64 {
        self.steps.iter().map(|s| s.total_displacement).sum()
    }

    pub fn total_splits(&self) -> usize {
        self.steps.iter().map(|s| s.splits).sum()
    }

    pub fn total_flips(&self) -> usize {
        self.steps.iter().map(|s| s.flips).sum()
    }

    /// Whether the vertex cap was hit at any step.
    pub fn capped(&self) -> bool {
        self.steps.iter().any(|s| s.capped)
    }

    pub const CSV_HEADER: &'static str = "step,vertices,faces,splits,flips,max_displacement";

    pub fn write_csv<W: Write>(&self, sink: &mut W) -> io::Result<()> {
        writeln!(sink, "{}", Self::CSV_HEADER)?;
        for s in &self.steps {
            writeln!(
                sink,
                "{},{},{},{},{},{}",
                s.step, s.vertices, s.faces, s.splits, s.flips, s.max_displacement
            )?;
        }
        Ok(())
    }
}

/// A growing mesh together with its cell state and network.
#[derive(Debug, Clone)]
pub struct Simulation {
    mesh: Mesh,
    state: CellState,
    net: Network,
    config: GrowthConfig,
    steps_done: usize,
}

impl Simulation {
    /// Seed mesh with neutral outputs, driven by `genome`.
    pub fn new(genome: &Genome, config: GrowthConfig) -> Result<Self, GrowthError> {
        let net = Network::realize(genome)?;
        let width = net.architecture().outputs();
        let (mesh, state) = make_seed(width);
        Self::from_parts(mesh, state, net, config)
    }

    pub fn from_parts(
        mesh: Mesh,
        state: CellState,
        net: Network,
        config: GrowthConfig,
    ) -> Result<Self, GrowthError> {
        cellular::check_network(&net, state.width())?;
        config.check(state.width())?;
        Ok(Simulation {
            mesh,
            state,
            net,
            config,
            steps_done: 0,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn state(&self) -> &CellState {
        &self.state
    }

    pub fn config(&self) -> &GrowthConfig {
        &self.config
    }

    pub fn step(&mut self) -> Result<StepRecord, GrowthError> {
        let mut rec = step(&mut self.mesh, &mut self.state, &self.net, &self.config)?;
        self.steps_done += 1;
        rec.step = self.steps_done;
        Ok(rec)
    }

    /// Runs the configured number of steps, calling `observe` after each.
    pub fn run_with<F>(mut self, mut observe: F) -> Result<(Mesh, RunStats), GrowthError>
    where
        F: FnMut(&StepRecord, &Mesh, &CellState),
    {
        let mut stats = RunStats::default();
        for _ in 0..self.config.n_steps {
            let rec = self.step()?;
            observe(&rec, &self.mesh, &self.state);
            stats.steps.push(rec);
        }
        Ok((self.mesh, stats))
    }

    pub fn run(self) -> Result<(Mesh, RunStats), GrowthError> {
        self.run_with(|_, _, _| {})
    }
}

/// Grows the seed mesh for `config.n_steps` steps under `genome`.
pub fn grow(genome: &Genome, config: &GrowthConfig) -> Result<(Mesh, RunStats), GrowthError> {
    Simulation::new(genome, config.clone())?.run()
}
