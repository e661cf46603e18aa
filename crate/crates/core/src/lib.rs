//! Grows triangle meshes from a genome.
//!
//! Every vertex of a mesh runs the same small feed-forward network. Each
//! timestep a vertex reads its own previous outputs together with the mean
//! and spread of its neighbors' outputs, and the new outputs decide how far
//! it moves along its growth direction, when the faces around it split, and
//! which way new vertices grow. Edge flips keep the triangulation tidy.
//!
//! ```
//! use morphogen::{grow, Architecture, Genome, GrowthConfig, Mesh};
//!
//! let genome = Genome::zeros(Architecture::default());
//! let config = GrowthConfig { n_steps: 10, ..GrowthConfig::default() };
//! let (mesh, _stats) = grow(&genome, &config).unwrap();
//! // an all-zero genome never moves the seed
//! assert_eq!(mesh, Mesh::icosahedron());
//! ```
//!
//! [`evolve`] runs a genetic algorithm over genomes, scored by default with
//! the canopy heuristic in [`fitness`].

pub mod cellular;
pub mod evolve;
pub mod fitness;
pub mod geom;
pub mod growth;
pub mod mesh;
pub mod neuralnet;
pub mod obj;

pub use cellular::{assemble_input, dispersion, step_outputs, CellError, CellState};
pub use evolve::{
    crossover, mutate, run_ga, run_ga_with, write_history_csv, EvolveError, GaConfig, GaOutcome,
    GenerationRecord,
};
pub use fitness::{canopy_fitness, rasterize_heightmap, FitnessReport, GridConfig, HeightGrid};
pub use geom::Vec3;
pub use growth::{
    compute_displacements, flip_pass, grow, split_pass, step, Channels, GrowthConfig, GrowthError,
    RunStats, Simulation, StepRecord,
};
pub use mesh::{Edge, FlipRules, Mesh, MeshError, NeighborTable, Vertex, Violation};
pub use neuralnet::{Architecture, Genome, NetError, Network};
pub use obj::{export_obj, read_obj, ObjData, ObjError};
