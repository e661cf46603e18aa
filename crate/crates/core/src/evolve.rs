//! Genetic algorithm over genomes.
//!
//! Generation 0 is random. Every later generation keeps the `elite_count`
//! best genomes unchanged and fills the remaining slots by tournament
//! selection, optional uniform crossover and mutation. Each slot of each
//! generation draws from its own ChaCha stream derived from
//! `(master_seed, generation, slot)`, so results do not depend on the order
//! in which individuals are evaluated.

use std::io::{self, Write};

use log::warn;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::{canopy_fitness, GridConfig};
use crate::growth::{grow, GrowthConfig};
use crate::mesh::Mesh;
use crate::neuralnet::{Architecture, Genome, NetError, INIT_RANGE};

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid GA config: {0}")]
    Config(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub elite_count: usize,
    /// Per-parameter probability of a Gaussian perturbation.
    pub mutation_rate: f64,
    pub mutation_sigma: f64,
    /// Per-parameter probability of a fresh uniform draw.
    pub reset_rate: f64,
    pub crossover_rate: f64,
    pub master_seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 50,
            generations: 20,
            tournament_size: 3,
            elite_count: 1,
            mutation_rate: 0.05,
            mutation_sigma: 0.2,
            reset_rate: 0.005,
            crossover_rate: 0.5,
            master_seed: 0,
        }
    }
}

impl GaConfig {
    pub fn check(&self) -> Result<(), EvolveError> {
        let err = |m: String| Err(EvolveError::Config(m));
        for (name, v) in [
            ("mutation_rate", self.mutation_rate),
            ("reset_rate", self.reset_rate),
            ("crossover_rate", self.crossover_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.mutation_rate + self.reset_rate > 1.0 {
            return err("mutation_rate + reset_rate must not exceed 1".into());
        }
        if !(self.mutation_sigma >= 0.0 && self.mutation_sigma.is_finite()) {
            return err(format!(
                "mutation_sigma must be non-negative, got {}",
                self.mutation_sigma
            ));
        }
        if self.population_size == 0 {
            return err("population_size must be positive".into());
        }
        if self.elite_count >= self.population_size {
            return err(format!(
                "elite_count {} must be below population_size {}",
                self.elite_count, self.population_size
            ));
        }
        if self.tournament_size == 0 {
            return err("tournament_size must be at least 1".into());
        }
        Ok(())
    }
}

/// RNG stream for one slot of one generation.
pub fn slot_rng(master_seed: u64, generation: usize, slot: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((generation as u64) << 32) | slot as u64);
    rng
}

/// Each parameter independently: reset uniformly on [-2, 2] with
/// probability `reset_rate`, otherwise perturbed by N(0, σ²) with
/// probability `mutation_rate`, otherwise kept.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, cfg: &GaConfig, rng: &mut R) -> Genome {
    let params = genome
        .params()
        .iter()
        .map(|&p| {
            let u: f64 = rng.random();
            if u < cfg.reset_rate {
                rng.random_range(-INIT_RANGE..=INIT_RANGE)
            } else if u < cfg.reset_rate + cfg.mutation_rate {
                let z: f64 = rng.sample(StandardNormal);
                p + cfg.mutation_sigma * z
            } else {
                p
            }
        })
        .collect();
    genome.with_params(params).expect("same length, finite")
}

/// Uniform crossover: each parameter from `a` or `b` with probability ½.
pub fn crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    rng: &mut R,
) -> Result<Genome, EvolveError> {
    if a.architecture() != b.architecture() {
        return Err(NetError::ArchitectureMismatch(
            a.architecture().layer_sizes().to_vec(),
            b.architecture().layer_sizes().to_vec(),
        )
        .into());
    }
    let params = a
        .params()
        .iter()
        .zip(b.params())
        .map(|(&x, &y)| if rng.random_bool(0.5) { x } else { y })
        .collect();
    Ok(a.with_params(params)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub worst: f64,
    pub best_genome: Genome,
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Genome,
    pub best_fitness: f64,
    pub history: Vec<GenerationRecord>,
}

pub const HISTORY_CSV_HEADER: &str = "generation,best,mean,worst";

pub fn write_history_csv<W: Write>(history: &[GenerationRecord], sink: &mut W) -> io::Result<()> {
    writeln!(sink, "{HISTORY_CSV_HEADER}")?;
    for r in history {
        writeln!(sink, "{},{},{},{}", r.generation, r.best, r.mean, r.worst)?;
    }
    Ok(())
}

/// Grows `genome` and scores the result. A failed growth scores 0.
pub fn evaluate_genome<F>(genome: &Genome, growth: &GrowthConfig, fitness: &F) -> f64
where
    F: Fn(&Mesh) -> f64,
{
    match grow(genome, growth) {
        Ok((mesh, _)) => {
            let f = fitness(&mesh);
            if f.is_finite() {
                f
            } else {
                warn!("non-finite fitness {f}, scoring 0");
                0.0
            }
        }
        Err(e) => {
            warn!("growth failed ({e}), scoring 0");
            0.0
        }
    }
}

/// Index of the fittest entry; ties go to the lower index.
fn argmax(fitness: &[f64], candidates: impl IntoIterator<Item = usize>) -> usize {
    candidates
        .into_iter()
        .reduce(|best, i| if fitness[i] > fitness[best] { i } else { best })
        .expect("at least one candidate")
}

fn tournament<R: Rng + ?Sized>(fitness: &[f64], size: usize, rng: &mut R) -> usize {
    let picks: Vec<usize> = (0..size)
        .map(|_| rng.random_range(0..fitness.len()))
        .collect();
    // ties by index, not by draw order
    picks
        .into_iter()
        .reduce(|best, i| {
            if fitness[i] > fitness[best] || (fitness[i] == fitness[best] && i < best) {
                i
            } else {
                best
            }
        })
        .expect("tournament size at least 1")
}

/// Runs the GA with an arbitrary fitness function. `on_generation` sees
/// every record as soon as its generation has been scored.
pub fn run_ga_with<F, C>(
    ga: &GaConfig,
    growth: &GrowthConfig,
    fitness: F,
    mut on_generation: C,
) -> Result<GaOutcome, EvolveError>
where
    F: Fn(&Mesh) -> f64 + Sync,
    C: FnMut(&GenerationRecord),
{
    ga.check()?;
    let arch = Architecture::default();
    let pop_size = ga.population_size;
    let mut population: Vec<Genome> = (0..pop_size)
        .map(|slot| Genome::random(arch.clone(), &mut slot_rng(ga.master_seed, 0, slot)))
        .collect();
    // elites carry their score forward; growth is deterministic
    let mut known: Vec<Option<f64>> = vec![None; pop_size];
    let mut history = Vec::with_capacity(ga.generations + 1);

    for generation in 0..=ga.generations {
        let scores: Vec<f64> = population
            .par_iter()
            .zip(known.par_iter())
            .map(|(g, k)| k.unwrap_or_else(|| evaluate_genome(g, growth, &fitness)))
            .collect();

        let best_idx = argmax(&scores, 0..pop_size);
        let best = scores[best_idx];
        let worst = scores.iter().copied().fold(f64::INFINITY, f64::min);
        // rounding in the sum can push the mean of equal scores past them
        let mean = (scores.iter().sum::<f64>() / pop_size as f64).clamp(worst, best);
        let record = GenerationRecord {
            generation,
            best,
            mean,
            worst,
            best_genome: population[best_idx].clone(),
        };
        on_generation(&record);
        history.push(record);
        if generation == ga.generations {
            break;
        }

        let mut ranking: Vec<usize> = (0..pop_size).collect();
        ranking.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));

        let mut next = Vec::with_capacity(pop_size);
        let mut next_known = Vec::with_capacity(pop_size);
        for &i in &ranking[..ga.elite_count] {
            next.push(population[i].clone());
            next_known.push(Some(scores[i]));
        }
        for slot in ga.elite_count..pop_size {
            let mut rng = slot_rng(ga.master_seed, generation + 1, slot);
            let first = &population[tournament(&scores, ga.tournament_size, &mut rng)];
            let child = if rng.random::<f64>() < ga.crossover_rate {
                let second = &population[tournament(&scores, ga.tournament_size, &mut rng)];
                crossover(first, second, &mut rng)?
            } else {
                first.clone()
            };
            next.push(mutate(&child, ga, &mut rng));
            next_known.push(None);
        }
        population = next;
        known = next_known;
    }

    let best_rec = &history[argmax(
        &history.iter().map(|r| r.best).collect::<Vec<_>>(),
        0..history.len(),
    )];
    Ok(GaOutcome {
        best: best_rec.best_genome.clone(),
        best_fitness: best_rec.best,
        history,
    })
}

/// Runs the GA against the canopy heuristic.
pub fn run_ga<C>(
    ga: &GaConfig,
    growth: &GrowthConfig,
    grid: &GridConfig,
    on_generation: C,
) -> Result<GaOutcome, EvolveError>
where
    C: FnMut(&GenerationRecord),
{
    run_ga_with(
        ga,
        growth,
        |m| canopy_fitness(m, grid).fitness,
        on_generation,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_genome(seed: u64) -> Genome {
        Genome::random(Architecture::default(), &mut slot_rng(seed, 99, 0))
    }

    #[test]
    fn mutation_identity_cases() {
        let g = sample_genome(1);
        let mut rng = slot_rng(0, 0, 0);
        let off = GaConfig {
            mutation_rate: 0.0,
            reset_rate: 0.0,
            ..GaConfig::default()
        };
        assert_eq!(mutate(&g, &off, &mut rng), g);
        let zero_width = GaConfig {
            mutation_rate: 1.0,
            mutation_sigma: 0.0,
            reset_rate: 0.0,
            ..GaConfig::default()
        };
        assert_eq!(mutate(&g, &zero_width, &mut rng), g);
    }

    #[test]
    fn mutation_rate_statistics() {
        // changed count per genome ~ Binomial(1845, 0.055)
        let g = sample_genome(2);
        let cfg = GaConfig::default();
        let mut rng = slot_rng(7, 0, 0);
        let trials = 1000;
        let total: usize = (0..trials)
            .map(|_| {
                let m = mutate(&g, &cfg, &mut rng);
                m.params()
                    .iter()
                    .zip(g.params())
                    .filter(|(a, b)| a != b)
                    .count()
            })
            .sum();
        let p = cfg.mutation_rate + cfg.reset_rate;
        let n = g.params().len() as f64;
        let mean = total as f64 / trials as f64;
        let sigma_of_mean = (n * p * (1.0 - p) / trials as f64).sqrt();
        assert!(
            (mean - n * p).abs() < 3.0 * sigma_of_mean,
            "mean {mean} vs {}",
            n * p
        );
    }

    #[test]
    fn mutation_keeps_architecture() {
        let g = sample_genome(3);
        let m = mutate(
            &g,
            &GaConfig {
                reset_rate: 0.5,
                ..GaConfig::default()
            },
            &mut slot_rng(1, 1, 1),
        );
        assert_eq!(m.architecture(), g.architecture());
        assert_eq!(m.params().len(), g.params().len());
        assert!(m.params().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn crossover_properties() {
        let a = sample_genome(4);
        let b = sample_genome(5);
        let mut rng = slot_rng(3, 0, 0);
        assert_eq!(crossover(&a, &a, &mut rng).unwrap(), a);
        let c = crossover(&a, &b, &mut rng).unwrap();
        for ((x, y), z) in a.params().iter().zip(b.params()).zip(c.params()) {
            assert!(z == x || z == y);
        }
        let other = Genome::zeros(Architecture::new(vec![6, 2]).unwrap());
        assert!(crossover(&a, &other, &mut rng).is_err());
    }

    #[test]
    fn crossover_locus_frequency() {
        let arch = Architecture::new(vec![3, 2]).unwrap(); // 8 loci
        let a = Genome::new(arch.clone(), vec![1.0; 8]).unwrap();
        let b = Genome::new(arch, vec![-1.0; 8]).unwrap();
        let mut rng = slot_rng(11, 0, 0);
        let mut from_a = [0usize; 8];
        let trials = 10_000;
        for _ in 0..trials {
            let c = crossover(&a, &b, &mut rng).unwrap();
            for (k, &p) in c.params().iter().enumerate() {
                from_a[k] += (p == 1.0) as usize;
            }
        }
        for count in from_a {
            let f = count as f64 / trials as f64;
            assert!((f - 0.5).abs() < 0.02, "{f}");
        }
    }

    #[test]
    fn config_checks() {
        assert!(GaConfig::default().check().is_ok());
        assert!(GaConfig {
            elite_count: 50,
            ..GaConfig::default()
        }
        .check()
        .is_err());
        assert!(GaConfig {
            tournament_size: 0,
            ..GaConfig::default()
        }
        .check()
        .is_err());
        assert!(GaConfig {
            crossover_rate: 1.5,
            ..GaConfig::default()
        }
        .check()
        .is_err());
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let draw = |g, s| slot_rng(5, g, s).random::<u64>();
        assert_eq!(draw(1, 2), draw(1, 2));
        assert_ne!(draw(1, 2), draw(2, 1));
        assert_ne!(draw(0, 0), draw(0, 1));
    }

    #[test]
    fn tournament_prefers_fitter_and_lower_index() {
        let scores = [0.1, 0.9, 0.9, 0.3];
        let mut rng = slot_rng(0, 0, 0);
        for _ in 0..50 {
            let w = tournament(&scores, 4, &mut rng);
            assert!(scores[w] >= 0.3);
        }
        assert_eq!(argmax(&scores, 0..4), 1);
    }

    /// A cheap stand-in fitness keeps these runs fast: reward the highest
    /// vertex.
    fn tallness(m: &Mesh) -> f64 {
        m.vertices()
            .iter()
            .map(|v| v.position[2])
            .fold(f64::MIN, f64::max)
    }

    fn small_growth() -> GrowthConfig {
        GrowthConfig {
            n_steps: 15,
            ..GrowthConfig::default()
        }
    }

    #[test]
    fn zero_generations_returns_initial_best() {
        let ga = GaConfig {
            population_size: 6,
            generations: 0,
            master_seed: 3,
            ..GaConfig::default()
        };
        let out = run_ga_with(&ga, &small_growth(), tallness, |_| {}).unwrap();
        assert_eq!(out.history.len(), 1);
        let initial: Vec<f64> = (0..6)
            .map(|s| {
                let g = Genome::random(Architecture::default(), &mut slot_rng(3, 0, s));
                evaluate_genome(&g, &small_growth(), &tallness)
            })
            .collect();
        let best = initial.iter().copied().fold(f64::MIN, f64::max);
        assert_eq!(out.best_fitness, best);
    }

    #[test]
    fn elitism_and_determinism() {
        let ga = GaConfig {
            population_size: 8,
            generations: 4,
            master_seed: 9,
            ..GaConfig::default()
        };
        let mut seen = Vec::new();
        let a = run_ga_with(&ga, &small_growth(), tallness, |r| seen.push(r.generation)).unwrap();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
        for w in a.history.windows(2) {
            assert!(w[1].best >= w[0].best);
        }
        for r in &a.history {
            assert!(r.best >= r.mean && r.mean >= r.worst);
        }
        let b = run_ga_with(&ga, &small_growth(), tallness, |_| {}).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best, b.best);
    }
}
