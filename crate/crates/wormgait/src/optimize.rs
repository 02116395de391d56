//! Robust multi-objective gait optimization: NSGA-II over stroke and
//! frequency with margin-shifted switching, plus the price-of-robustness
//! margin scan used to pick the margin.
//!
//! Determinism contract: the RNG is owned by the sequential genetic phase;
//! fitness evaluations are pure and may run in parallel, collected in
//! population order, so a fixed seed reproduces runs bit for bit.

use crate::actuation::ActuationParams;
use crate::energy::{gait_metrics, power_series, EnergyParams, GaitMetrics, STANDARD_GRAVITY};
use crate::error::{Error, Result};
use crate::hybrid::{simulate, HybridState, MarginSetting};
use crate::model::{GaitBounds, GaitParams, RobotParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::HashMap;

/// The model bundle a gait is evaluated against.
#[derive(Debug, Clone, Copy)]
pub struct Models {
    pub robot: RobotParams,
    pub act: ActuationParams,
    pub energy: EnergyParams,
    pub gravity: f64,
}

impl Models {
    pub fn identified() -> Self {
        Models {
            robot: RobotParams::identified(),
            act: ActuationParams::identified(),
            energy: EnergyParams::identified(),
            gravity: STANDARD_GRAVITY,
        }
    }
}

/// NSGA-II and simulation settings.
#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-variable mutation probability; 1 / n_vars by default.
    pub mutation_prob: f64,
    pub eta_crossover: f64,
    pub eta_mutation: f64,
    pub seed: u64,
    pub bounds: GaitBounds,
    pub margin: MarginSetting,
    pub n_cycles: usize,
    pub dt: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            population: 64,
            generations: 60,
            crossover_prob: 0.9,
            mutation_prob: 0.5,
            eta_crossover: 15.0,
            eta_mutation: 20.0,
            seed: 42,
            bounds: GaitBounds::default(),
            margin: MarginSetting::nominal(),
            n_cycles: 5,
            dt: 2e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 4 || self.population % 2 != 0 {
            return Err(Error::Config(format!(
                "population must be even and at least 4, got {}",
                self.population
            )));
        }
        if self.generations == 0 {
            return Err(Error::Config("generations must be at least 1".into()));
        }
        for (name, p) in [
            ("crossover_prob", self.crossover_prob),
            ("mutation_prob", self.mutation_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.bounds.s_min >= self.bounds.s_max || self.bounds.f_min >= self.bounds.f_max {
            return Err(Error::Config("gait bounds are empty".into()));
        }
        if self.n_cycles < 5 {
            return Err(Error::Config(
                "evaluation protocol needs at least five cycles".into(),
            ));
        }
        Ok(())
    }
}

/// Runs the full pipeline for one gait and derives its metrics.
pub fn evaluate_gait(
    gait: &GaitParams,
    models: &Models,
    margin: &MarginSetting,
    n_cycles: usize,
    dt: f64,
) -> Result<GaitMetrics> {
    let init = HybridState::centered_start(&models.robot);
    let trace = simulate(gait, &models.robot, &models.act, margin, n_cycles, dt, &init)?;
    let power = power_series(&trace, &models.energy);
    gait_metrics(&trace, &power, gait, &models.robot, models.gravity)
}

/// Memoizing parallel evaluator keyed by the gait and margin quantized to
/// 1e-6, so duplicated individuals are never re-simulated.
pub struct CachedEvaluator {
    pub models: Models,
    pub n_cycles: usize,
    pub dt: f64,
    cache: HashMap<(i64, i64, i64), GaitMetrics>,
    evaluations: usize,
}

fn quantize(v: f64) -> i64 {
    (v / 1e-6).round() as i64
}

impl CachedEvaluator {
    pub fn new(models: Models, n_cycles: usize, dt: f64) -> Self {
        CachedEvaluator {
            models,
            n_cycles,
            dt,
            cache: HashMap::new(),
            evaluations: 0,
        }
    }

    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    fn key(gait: &GaitParams, margin: &MarginSetting) -> (i64, i64, i64) {
        (
            quantize(gait.stroke_s),
            quantize(gait.freq_f),
            quantize(margin.delta_m),
        )
    }

    /// Evaluates a batch, hitting the cache first and simulating misses in
    /// parallel.
    pub fn metrics_batch(
        &mut self,
        gaits: &[GaitParams],
        margin: &MarginSetting,
    ) -> Result<Vec<GaitMetrics>> {
        let mut missing: Vec<(i64, i64, i64)> = Vec::new();
        let mut missing_gaits: Vec<GaitParams> = Vec::new();
        for g in gaits {
            let key = Self::key(g, margin);
            if !self.cache.contains_key(&key) && !missing.contains(&key) {
                missing.push(key);
                missing_gaits.push(*g);
            }
        }
        let models = self.models;
        let (n_cycles, dt) = (self.n_cycles, self.dt);
        let fresh: Vec<Result<GaitMetrics>> = missing_gaits
            .par_iter()
            .map(|g| evaluate_gait(g, &models, margin, n_cycles, dt))
            .collect();
        for (key, res) in missing.into_iter().zip(fresh) {
            self.cache.insert(key, res?);
            self.evaluations += 1;
        }
        Ok(gaits
            .iter()
            .map(|g| self.cache[&Self::key(g, margin)])
            .collect())
    }
}

/// One NSGA-II individual: genes, minimization objectives and the ranking
/// data of the last sort.
#[derive(Debug, Clone, Copy)]
pub struct Individual {
    pub genes: [f64; 2],
    pub objectives: [f64; 2],
    pub rank: usize,
    pub crowding: f64,
}

/// A point of the returned Pareto front with its metrics.
#[derive(Debug, Clone, Copy)]
pub struct ParetoPoint {
    pub gait: GaitParams,
    pub metrics: GaitMetrics,
    pub rank: usize,
    pub crowding: f64,
}

/// Result of one NSGA-II run.
#[derive(Debug, Clone)]
pub struct Nsga2Run {
    /// Final first front, sorted by ascending speed objective.
    pub front: Vec<Individual>,
    /// Rank-1 hypervolume of the retained population per generation, against
    /// [`HV_REFERENCE`].
    pub hv_history: Vec<f64>,
}

/// Fixed reference point for hypervolume tracking in objective space
/// `(-avg_speed, avg_power)`.
pub const HV_REFERENCE: [f64; 2] = [0.05, 50.0];

/// `a` dominates `b` in the minimization sense.
fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Fast non-dominated sort; assigns ranks in place and returns the fronts as
/// index lists.
fn non_dominated_sort(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    let mut fronts: Vec<Vec<usize>> = vec![Vec::new()];

    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if dominates(&pop[i].objectives, &pop[j].objectives) {
                dominated_by[i].push(j);
            } else if dominates(&pop[j].objectives, &pop[i].objectives) {
                domination_count[i] += 1;
            }
        }
        if domination_count[i] == 0 {
            pop[i].rank = 0;
            fronts[0].push(i);
        }
    }

    let mut k = 0;
    while !fronts[k].is_empty() {
        let mut next = Vec::new();
        for &i in &fronts[k] {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    pop[j].rank = k + 1;
                    next.push(j);
                }
            }
        }
        k += 1;
        fronts.push(next);
    }
    fronts.pop();
    fronts
}

/// Crowding distance within one front (indices into `pop`).
fn assign_crowding(pop: &mut [Individual], front: &[usize]) {
    for &i in front {
        pop[i].crowding = 0.0;
    }
    let m = front.len();
    if m <= 2 {
        for &i in front {
            pop[i].crowding = f64::INFINITY;
        }
        return;
    }
    for obj in 0..2 {
        let mut order: Vec<usize> = front.to_vec();
        order.sort_by(|&a, &b| pop[a].objectives[obj].total_cmp(&pop[b].objectives[obj]));
        let lo = pop[order[0]].objectives[obj];
        let hi = pop[order[m - 1]].objectives[obj];
        pop[order[0]].crowding = f64::INFINITY;
        pop[order[m - 1]].crowding = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..m - 1 {
            let delta = (pop[order[w + 1]].objectives[obj] - pop[order[w - 1]].objectives[obj])
                / range;
            pop[order[w]].crowding += delta;
        }
    }
}

/// Crowded-comparison binary tournament.
fn tournament(pop: &[Individual], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    if pop[a].rank < pop[b].rank {
        a
    } else if pop[b].rank < pop[a].rank {
        b
    } else if pop[a].crowding > pop[b].crowding {
        a
    } else {
        b
    }
}

/// Simulated binary crossover on one variable pair.
fn sbx_pair(p1: f64, p2: f64, eta: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u: f64 = rng.gen();
    let beta = if u <= 0.5 {
        (2.0 * u).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
    };
    (
        0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2),
        0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2),
    )
}

/// Bounded polynomial mutation of one variable.
fn polynomial_mutation(x: f64, lo: f64, hi: f64, eta: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    let range = hi - lo;
    let d1 = (x - lo) / range;
    let d2 = (hi - x) / range;
    let dq = if u < 0.5 {
        let b = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
        b.powf(1.0 / (eta + 1.0)) - 1.0
    } else {
        let b = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
        1.0 - b.powf(1.0 / (eta + 1.0))
    };
    x + dq * range
}

/// Rank-1 hypervolume against a reference point, 2-D sweep. Points not
/// dominating the reference contribute nothing.
pub fn hypervolume_2d(objectives: &[[f64; 2]], reference: &[f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = objectives
        .iter()
        .filter(|o| o[0] < reference[0] && o[1] < reference[1])
        .copied()
        .collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut hv = 0.0;
    let mut prev_y = reference[1];
    for p in pts {
        if p[1] < prev_y {
            hv += (reference[0] - p[0]) * (prev_y - p[1]);
            prev_y = p[1];
        }
    }
    hv
}

/// The genetic engine, generic over the batch objective so test problems and
/// the real models share one code path. The evaluator receives the whole
/// offspring batch and returns minimization objective pairs in order.
pub fn nsga2_run<F>(config: &OptimizerConfig, mut batch_objective: F) -> Result<Nsga2Run>
where
    F: FnMut(&[GaitParams]) -> Result<Vec<[f64; 2]>>,
{
    config.validate()?;
    let n = config.population;
    let b = config.bounds;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let clamp = |g: &mut [f64; 2]| {
        g[0] = g[0].clamp(b.s_min, b.s_max);
        g[1] = g[1].clamp(b.f_min, b.f_max);
    };

    // initial population, uniform in the box
    let mut genes: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            [
                rng.gen_range(b.s_min..=b.s_max),
                rng.gen_range(b.f_min..=b.f_max),
            ]
        })
        .collect();
    let gaits: Vec<GaitParams> = genes.iter().map(|g| GaitParams::new(g[0], g[1])).collect();
    let objectives = batch_objective(&gaits)?;
    let mut pop: Vec<Individual> = genes
        .drain(..)
        .zip(objectives)
        .map(|(genes, objectives)| Individual {
            genes,
            objectives,
            rank: 0,
            crowding: 0.0,
        })
        .collect();

    let fronts = non_dominated_sort(&mut pop);
    for front in &fronts {
        assign_crowding(&mut pop, front);
    }
    let mut hv_history = Vec::with_capacity(config.generations + 1);
    let front_objs: Vec<[f64; 2]> = fronts[0].iter().map(|&i| pop[i].objectives).collect();
    hv_history.push(hypervolume_2d(&front_objs, &HV_REFERENCE));

    for _gen in 0..config.generations {
        // variation: binary tournament, SBX, polynomial mutation
        let mut offspring_genes: Vec<[f64; 2]> = Vec::with_capacity(n);
        for _ in 0..n / 2 {
            let p1 = pop[tournament(&pop, &mut rng)].genes;
            let p2 = pop[tournament(&pop, &mut rng)].genes;
            let mut c1 = p1;
            let mut c2 = p2;
            if rng.gen::<f64>() < config.crossover_prob {
                for v in 0..2 {
                    if rng.gen::<f64>() < 0.5 {
                        let (a, b_) = sbx_pair(p1[v], p2[v], config.eta_crossover, &mut rng);
                        c1[v] = a;
                        c2[v] = b_;
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                let (lo, hi) = ((b.s_min, b.f_min), (b.s_max, b.f_max));
                if rng.gen::<f64>() < config.mutation_prob {
                    child[0] = polynomial_mutation(
                        child[0].clamp(lo.0, hi.0),
                        lo.0,
                        hi.0,
                        config.eta_mutation,
                        &mut rng,
                    );
                }
                if rng.gen::<f64>() < config.mutation_prob {
                    child[1] = polynomial_mutation(
                        child[1].clamp(lo.1, hi.1),
                        lo.1,
                        hi.1,
                        config.eta_mutation,
                        &mut rng,
                    );
                }
                clamp(child);
            }
            offspring_genes.push(c1);
            offspring_genes.push(c2);
        }

        let gaits: Vec<GaitParams> = offspring_genes
            .iter()
            .map(|g| GaitParams::new(g[0], g[1]))
            .collect();
        let objectives = batch_objective(&gaits)?;
        for (genes, objectives) in offspring_genes.into_iter().zip(objectives) {
            pop.push(Individual {
                genes,
                objectives,
                rank: 0,
                crowding: 0.0,
            });
        }

        // elitist environmental selection over parents + offspring
        let fronts = non_dominated_sort(&mut pop);
        for front in &fronts {
            assign_crowding(&mut pop, front);
        }
        let mut keep: Vec<usize> = Vec::with_capacity(n);
        for front in &fronts {
            if keep.len() + front.len() <= n {
                keep.extend_from_slice(front);
            } else {
                let mut rest: Vec<usize> = front.clone();
                // most isolated first; stable index order breaks ties
                rest.sort_by(|&x, &y| pop[y].crowding.total_cmp(&pop[x].crowding).then(x.cmp(&y)));
                rest.truncate(n - keep.len());
                keep.extend(rest);
            }
            if keep.len() == n {
                break;
            }
        }
        let mut next: Vec<Individual> = keep.into_iter().map(|i| pop[i]).collect();
        std::mem::swap(&mut pop, &mut next);

        let fronts = non_dominated_sort(&mut pop);
        for front in &fronts {
            assign_crowding(&mut pop, front);
        }
        let front_objs: Vec<[f64; 2]> = fronts[0].iter().map(|&i| pop[i].objectives).collect();
        hv_history.push(hypervolume_2d(&front_objs, &HV_REFERENCE));
    }

    let mut front: Vec<Individual> = pop.into_iter().filter(|ind| ind.rank == 0).collect();
    front.sort_by(|a, b| {
        a.objectives[0]
            .total_cmp(&b.objectives[0])
            .then(a.objectives[1].total_cmp(&b.objectives[1]))
            .then(a.genes[0].total_cmp(&b.genes[0]))
            .then(a.genes[1].total_cmp(&b.genes[1]))
    });
    front.dedup_by(|a, b| a.genes == b.genes);
    Ok(Nsga2Run { front, hv_history })
}

/// Result of a gait optimization against the real models.
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub front: Vec<ParetoPoint>,
    pub hv_history: Vec<f64>,
    pub evaluations: usize,
}

/// NSGA-II against the real pipeline, with caching and parallel evaluation.
pub fn nsga2_optimize(config: &OptimizerConfig, models: &Models) -> Result<OptimizeOutcome> {
    let mut evaluator = CachedEvaluator::new(*models, config.n_cycles, config.dt);
    let run = nsga2_with_evaluator(config, &mut evaluator)?;
    Ok(OptimizeOutcome {
        front: run.0,
        hv_history: run.1,
        evaluations: evaluator.evaluations(),
    })
}

/// Same as [`nsga2_optimize`] but reusing a caller-owned evaluation cache
/// (the margin scan shares one across all margins).
pub fn nsga2_with_evaluator(
    config: &OptimizerConfig,
    evaluator: &mut CachedEvaluator,
) -> Result<(Vec<ParetoPoint>, Vec<f64>)> {
    let margin = config.margin;
    let run = nsga2_run(config, |gaits| {
        let metrics = evaluator.metrics_batch(gaits, &margin)?;
        Ok(metrics
            .iter()
            .map(|m| [-m.avg_speed, m.avg_power])
            .collect())
    })?;
    let front = run
        .front
        .iter()
        .map(|ind| {
            let gait = GaitParams::new(ind.genes[0], ind.genes[1]);
            let metrics = evaluator
                .metrics_batch(std::slice::from_ref(&gait), &margin)?
                .remove(0);
            Ok(ParetoPoint {
                gait,
                metrics,
                rank: ind.rank,
                crowding: ind.crowding,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((front, run.hv_history))
}

/// One margin-scan sample.
#[derive(Debug, Clone, Copy)]
pub struct MarginScanEntry {
    pub delta_m: f64,
    /// Minimum finite cost of transport over the front, `+inf` when nothing
    /// moves.
    pub optimal_cot: f64,
    /// Same minimum under the energy-per-distance definition.
    pub optimal_jpm: f64,
    /// Gait attaining the optimal cost, if any.
    pub best_gait: Option<GaitParams>,
    pub best_speed: f64,
    pub best_power: f64,
}

/// Price-of-robustness scan output.
#[derive(Debug, Clone)]
pub struct MarginScanResult {
    pub entries: Vec<MarginScanEntry>,
    /// Largest margin before the first optimal-cost jump beyond the
    /// detection factor; `None` when the curve never jumps.
    pub cliff: Option<f64>,
    pub cliff_factor: f64,
}

/// Largest grid value before the first consecutive ratio exceeding `factor`.
pub fn detect_cliff(grid: &[f64], cots: &[f64], factor: f64) -> Option<f64> {
    for i in 0..cots.len().saturating_sub(1) {
        let a = cots[i];
        let b = cots[i + 1];
        if a.is_finite() && a > 0.0 && (b / a > factor || (b.is_infinite() && a.is_finite())) {
            return Some(grid[i]);
        }
    }
    None
}

/// Runs the robust optimization for every margin in the (strictly
/// increasing) grid and selects the cliff margin.
pub fn margin_scan(
    grid: &[f64],
    config: &OptimizerConfig,
    models: &Models,
    cliff_factor: f64,
) -> Result<MarginScanResult> {
    if grid.is_empty() {
        return Err(Error::Config("margin grid is empty".into()));
    }
    if grid[0] < 0.0 {
        return Err(Error::Config("margins must be nonnegative".into()));
    }
    for w in grid.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Config(format!(
                "margin grid must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if !(cliff_factor > 1.0) {
        return Err(Error::Config(format!(
            "cliff factor must exceed 1, got {cliff_factor}"
        )));
    }

    let mut evaluator = CachedEvaluator::new(*models, config.n_cycles, config.dt);
    let mut entries = Vec::with_capacity(grid.len());
    for &delta_m in grid {
        let mut cfg = config.clone();
        cfg.margin = MarginSetting::new(delta_m)?;
        let (front, _) = nsga2_with_evaluator(&cfg, &mut evaluator)?;
        let mut best: Option<&ParetoPoint> = None;
        for p in &front {
            if p.metrics.cot.is_finite() {
                if best.map_or(true, |b| p.metrics.cot < b.metrics.cot) {
                    best = Some(p);
                }
            }
        }
        entries.push(match best {
            Some(p) => MarginScanEntry {
                delta_m,
                optimal_cot: p.metrics.cot,
                optimal_jpm: p.metrics.energy_per_distance,
                best_gait: Some(p.gait),
                best_speed: p.metrics.avg_speed,
                best_power: p.metrics.avg_power,
            },
            None => MarginScanEntry {
                delta_m,
                optimal_cot: f64::INFINITY,
                optimal_jpm: f64::INFINITY,
                best_gait: None,
                best_speed: 0.0,
                best_power: f64::NAN,
            },
        });
    }

    let cots: Vec<f64> = entries.iter().map(|e| e.optimal_cot).collect();
    let cliff = detect_cliff(grid, &cots, cliff_factor);
    Ok(MarginScanResult {
        entries,
        cliff,
        cliff_factor,
    })
}

/// The three gaits reported from a front: minimum power, an intermediate
/// cruising point (minimum cost of transport, ties broken toward the median
/// speed) and maximum speed.
pub fn select_representative_points(
    front: &[ParetoPoint],
) -> Result<(ParetoPoint, ParetoPoint, ParetoPoint)> {
    if front.is_empty() {
        return Err(Error::EmptyFront);
    }
    let min_power = front
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            a.metrics
                .avg_power
                .total_cmp(&b.metrics.avg_power)
                .then(i.cmp(j))
        })
        .unwrap()
        .1;
    let max_speed = front
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| {
            a.metrics
                .avg_speed
                .total_cmp(&b.metrics.avg_speed)
                .then(j.cmp(i))
        })
        .unwrap()
        .1;

    let mut speeds: Vec<f64> = front.iter().map(|p| p.metrics.avg_speed).collect();
    speeds.sort_by(f64::total_cmp);
    let median = if speeds.len() % 2 == 1 {
        speeds[speeds.len() / 2]
    } else {
        0.5 * (speeds[speeds.len() / 2 - 1] + speeds[speeds.len() / 2])
    };
    let cruising = front
        .iter()
        .min_by(|a, b| {
            a.metrics.cot.total_cmp(&b.metrics.cot).then(
                (a.metrics.avg_speed - median)
                    .abs()
                    .total_cmp(&(b.metrics.avg_speed - median).abs()),
            )
        })
        .unwrap();

    Ok((*min_power, *cruising, *max_speed))
}
