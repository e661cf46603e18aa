use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use log::{info, warn};
use morphogen::{
    export_obj, grow, rasterize_heightmap, read_obj, run_ga, write_history_csv, Architecture,
    Genome, Mesh, RunStats,
};
use rayon::prelude::*;

use crate::failure::{Classify, Failure};
use crate::manifest::{now, RunManifest};
use crate::settings::{ConfigFile, Settings};

type Outcome = Result<(), Failure>;

/// Flag, else config-file key, else nothing.
fn pick<T>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>, Failure>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.flag(key).input(),
    }
}

fn write_file(
    path: &Path,
    fill: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Outcome {
    let file = File::create(path)
        .with_context(|| format!("creating {}", path.display()))
        .runtime()?;
    let mut sink = BufWriter::new(file);
    fill(&mut sink)
        .and_then(|_| sink.flush())
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

fn write_mesh(path: &Path, mesh: &Mesh) -> Outcome {
    write_file(path, |w| export_obj(mesh, w))
}

fn write_stats(path: &Path, stats: &RunStats) -> Outcome {
    write_file(path, |w| stats.write_csv(w))
}

/// `dir/name.ext` becomes `dir/name.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn worker_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    if workers == Some(0) {
        return Err(Failure::Input(anyhow!("--workers must be at least 1")));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .runtime()
}

fn check_settings(settings: &Settings, width: usize) -> Outcome {
    settings.growth.check(width).input()?;
    if settings.grid.resolution < 8 || !(settings.grid.half_extent > 0.0) {
        return Err(Failure::Input(anyhow!(
            "grid needs resolution >= 8 and a positive half_extent"
        )));
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct GrowArgs {
    /// Genome JSON file to grow.
    pub genome: Option<PathBuf>,
    /// Grow the random genome for --seed instead of a file.
    #[arg(long)]
    pub random: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of growth steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Output mesh (default mesh.obj).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-step statistics CSV (default: next to the mesh).
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Also write the canopy heightmap as a 16-bit PGM.
    #[arg(long)]
    pub debug_heightmap: Option<PathBuf>,
}

pub fn grow_cmd(args: GrowArgs, file: &ConfigFile) -> Outcome {
    let started = now();
    let mut settings = file.resolve().input()?;
    if let Some(steps) = pick(args.steps, file, "steps")? {
        settings.growth.n_steps = steps;
    }
    let random = args.random || file.flag::<bool>("random").input()?.unwrap_or(false);
    let genome_path = pick(args.genome, file, "genome")?;
    let seed = pick(args.seed, file, "seed")?;
    let out = pick(args.out, file, "out")?.unwrap_or_else(|| PathBuf::from("mesh.obj"));
    let stats_path = pick(args.stats, file, "stats")?.unwrap_or_else(|| sibling(&out, "stats.csv"));
    let heightmap = pick(args.debug_heightmap, file, "debug-heightmap")?;

    let genome = match (&genome_path, random) {
        (Some(_), true) => {
            return Err(Failure::Usage(anyhow!(
                "give a genome file or --random, not both"
            )))
        }
        (None, false) => return Err(Failure::Usage(anyhow!("give a genome file or --random"))),
        (Some(path), false) => Genome::read(path)
            .with_context(|| format!("genome {}", path.display()))
            .input()?,
        (None, true) => Genome::from_seed(Architecture::default(), seed.unwrap_or(0)),
    };
    check_settings(&settings, genome.architecture().outputs())?;

    info!("growing for {} steps", settings.growth.n_steps);
    let (mesh, stats) = grow(&genome, &settings.growth).runtime()?;
    info!(
        "{} vertices, {} faces",
        mesh.vertex_count(),
        mesh.face_count()
    );
    write_mesh(&out, &mesh)?;
    write_stats(&stats_path, &stats)?;

    let mut manifest = RunManifest::new("grow", settings.clone(), started);
    manifest.seed = if random {
        Some(seed.unwrap_or(0))
    } else {
        None
    };
    manifest
        .flag("random", random)
        .flag("steps", settings.growth.n_steps)
        .flag("out", &out)
        .flag("stats", &stats_path);
    if let Some(path) = &genome_path {
        manifest.flag("genome", path);
        manifest.inputs.push(path.clone());
    }
    if random {
        manifest.flag("seed", seed.unwrap_or(0));
    }
    manifest.outputs.extend([out.clone(), stats_path.clone()]);
    if let Some(path) = &heightmap {
        let grid = rasterize_heightmap(&mesh, &settings.grid);
        write_file(path, |w| grid.write_pgm(w))?;
        manifest.flag("debug-heightmap", path);
        manifest.outputs.push(path.clone());
    }
    manifest.write(&sibling(&out, "manifest.json")).runtime()
}

#[derive(Debug, Args)]
pub struct GalleryArgs {
    /// Number of genomes (default 250).
    #[arg(long)]
    pub count: Option<usize>,
    /// Seed of the first genome; the rest follow sequentially.
    #[arg(long)]
    pub seed_base: Option<u64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

pub const SUMMARY_HEADER: &str = "seed,vertices,faces,grew";

pub fn gallery_cmd(args: GalleryArgs, file: &ConfigFile) -> Outcome {
    let started = now();
    let mut settings = file.resolve().input()?;
    if let Some(steps) = pick(args.steps, file, "steps")? {
        settings.growth.n_steps = steps;
    }
    let count = pick(args.count, file, "count")?.unwrap_or(250);
    let seed_base = pick(args.seed_base, file, "seed-base")?.unwrap_or(0);
    let workers = pick(args.workers, file, "workers")?;
    let out_dir = pick(args.out_dir, file, "out-dir")?
        .ok_or_else(|| anyhow!("--out-dir is required"))
        .usage()?;
    let arch = Architecture::default();
    check_settings(&settings, arch.outputs())?;
    let seeds: Vec<u64> = (0..count as u64)
        .map(|k| {
            seed_base
                .checked_add(k)
                .ok_or_else(|| anyhow!("seed overflow"))
        })
        .collect::<anyhow::Result<_>>()
        .input()?;

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .runtime()?;
    let pool = worker_pool(workers)?;
    let rows: Vec<(u64, usize, usize)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let genome = Genome::from_seed(arch.clone(), seed);
                let (mesh, stats) = grow(&genome, &settings.growth).runtime()?;
                let stem = out_dir.join(format!("seed_{seed:05}"));
                write_mesh(&stem.with_extension("obj"), &mesh)?;
                write_stats(&stem.with_extension("stats.csv"), &stats)?;
                Ok((seed, mesh.vertex_count(), mesh.face_count()))
            })
            .collect::<Result<_, Failure>>()
    })?;

    let mut manifest = RunManifest::new("gallery", settings.clone(), started);
    manifest.seed = Some(seed_base);
    manifest
        .flag("count", count)
        .flag("seed-base", seed_base)
        .flag("steps", settings.growth.n_steps)
        .flag("out-dir", &out_dir);
    let summary = out_dir.join("summary.csv");
    write_file(&summary, |w| {
        writeln!(w, "{SUMMARY_HEADER}")?;
        for &(seed, v, f) in &rows {
            writeln!(w, "{seed},{v},{f},{}", v > 12)?;
        }
        Ok(())
    })?;
    for &(seed, v, _) in &rows {
        info!("seed {seed}: {v} vertices");
        manifest
            .outputs
            .push(out_dir.join(format!("seed_{seed:05}.obj")));
    }
    let grew = rows.iter().filter(|r| r.1 > 12).count();
    info!("{grew} of {} genomes grew", rows.len());
    manifest.outputs.push(summary);
    manifest.write(&out_dir.join("manifest.json")).runtime()
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Population size.
    #[arg(long)]
    pub pop: Option<usize>,
    #[arg(long)]
    pub generations: Option<usize>,
    /// Master seed of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Growth steps per evaluation.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
}

pub fn evolve_cmd(args: EvolveArgs, file: &ConfigFile) -> Outcome {
    let started = now();
    let mut settings = file.resolve().input()?;
    if let Some(steps) = pick(args.steps, file, "steps")? {
        settings.growth.n_steps = steps;
    }
    if let Some(pop) = pick(args.pop, file, "pop")? {
        settings.ga.population_size = pop;
    }
    if let Some(g) = pick(args.generations, file, "generations")? {
        settings.ga.generations = g;
    }
    if let Some(seed) = pick(args.seed, file, "seed")? {
        settings.ga.master_seed = seed;
    }
    let workers = pick(args.workers, file, "workers")?;
    let out_dir = pick(args.out_dir, file, "out-dir")?
        .ok_or_else(|| anyhow!("--out-dir is required"))
        .usage()?;
    check_settings(&settings, Architecture::default().outputs())?;
    settings.ga.check().input()?;

    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .runtime()?;
    let pool = worker_pool(workers)?;
    let mut outputs = Vec::new();
    let mut write_error = None;
    let outcome = pool
        .install(|| {
            run_ga(&settings.ga, &settings.growth, &settings.grid, |rec| {
                info!(
                    "generation {}: best {:.6e} mean {:.6e} worst {:.6e}",
                    rec.generation, rec.best, rec.mean, rec.worst
                );
                let path = out_dir.join(format!("generation_{:03}.genome.json", rec.generation));
                match rec.best_genome.write(&path) {
                    Ok(()) => outputs.push(path),
                    Err(e) => {
                        warn!("could not write {}: {e}", path.display());
                        write_error.get_or_insert(anyhow!("writing {}: {e}", path.display()));
                    }
                }
            })
        })
        .runtime()?;
    if let Some(e) = write_error {
        return Err(Failure::Runtime(e));
    }

    let history = out_dir.join("history.csv");
    write_file(&history, |w| write_history_csv(&outcome.history, w))?;
    let best_genome = out_dir.join("best.genome.json");
    outcome.best.write(&best_genome).runtime()?;
    let (mesh, stats) = grow(&outcome.best, &settings.growth).runtime()?;
    let best_obj = out_dir.join("best.obj");
    write_mesh(&best_obj, &mesh)?;
    let best_stats = out_dir.join("best.stats.csv");
    write_stats(&best_stats, &stats)?;
    info!("best fitness {:.6e}", outcome.best_fitness);

    let mut manifest = RunManifest::new("evolve", settings.clone(), started);
    manifest.seed = Some(settings.ga.master_seed);
    manifest
        .flag("pop", settings.ga.population_size)
        .flag("generations", settings.ga.generations)
        .flag("seed", settings.ga.master_seed)
        .flag("steps", settings.growth.n_steps)
        .flag("out-dir", &out_dir);
    manifest.outputs = outputs;
    manifest
        .outputs
        .extend([history, best_genome, best_obj, best_stats]);
    manifest.write(&out_dir.join("manifest.json")).runtime()
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// An `.obj` mesh or a `.json` genome.
    pub path: PathBuf,
}

pub fn validate_cmd(args: ValidateArgs) -> Outcome {
    let path = &args.path;
    let is_genome = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_genome {
        let genome = Genome::read(path)
            .with_context(|| format!("genome {}", path.display()))
            .input()?;
        println!(
            "{}: genome ok, layer_sizes {:?}, {} params",
            path.display(),
            genome.architecture().layer_sizes(),
            genome.params().len()
        );
        return Ok(());
    }

    let file = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .input()?;
    let mesh = read_obj(BufReader::new(file))
        .map_err(anyhow::Error::from)
        .and_then(|data| data.into_mesh().map_err(anyhow::Error::from))
        .with_context(|| format!("mesh {}", path.display()))
        .input()?;
    let violations = mesh.validate();
    for v in &violations {
        println!("{v}");
    }
    if violations.is_empty() {
        println!(
            "{}: mesh ok, {} vertices, {} faces, euler characteristic {}",
            path.display(),
            mesh.vertex_count(),
            mesh.face_count(),
            mesh.euler_characteristic()
        );
        Ok(())
    } else {
        Err(Failure::Input(anyhow!(
            "{}: {} violation(s)",
            path.display(),
            violations.len()
        )))
    }
}
