//! Synthetic datasets of `(context, optimal decision, true cost)` triples,
//! feature normalization, splitting and JSON serialization.
//!
//! Costs follow the polynomial-kernel generator common in predict-then-optimize
//! benchmarks: a fixed random 0/1 matrix `B` maps a context to
//! `((<B_j, z>/sqrt(d) + 3)^degree + 1) * eps_j` with multiplicative noise
//! `eps_j ~ U[1 - noise, 1 + noise]`. Contexts are drawn from `N(0, I)` and
//! rescaled so the largest norm is one before costs are computed.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{build_grid_sp, build_knapsack, build_perfect_matching};
use crate::numerics::{norm, Mat};
use crate::problem::{Portfolio, Problem, ProblemSpec};
use crate::tol;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionSample {
    pub z: Vec<f64>,
    pub x_star: Vec<f64>,
    /// User-facing true cost, when known.
    pub c_star: Option<Vec<f64>>,
}

/// Problem family and its size parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    SpGrid { grid_size: usize },
    Knapsack { items: usize },
    Portfolio { assets: usize, gamma: f64 },
    PerfectMatching { grid_size: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub family: Family,
    pub features: usize,
    pub degree: u32,
    /// Multiplicative noise half-width for LP families, additive noise
    /// standard deviation for the portfolio.
    pub noise: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    /// 5x5 directed grid, 6 features, degree 4, noise 0.25.
    pub fn sp_synth(seed: u64) -> Self {
        Self {
            family: Family::SpGrid { grid_size: 5 },
            features: 6,
            degree: 4,
            noise: 0.25,
            seed,
        }
    }

    /// 10 items, 5 features, degree 2, noise 0.25.
    pub fn knapsack(seed: u64) -> Self {
        Self {
            family: Family::Knapsack { items: 10 },
            features: 5,
            degree: 2,
            noise: 0.25,
            seed,
        }
    }

    /// 10 assets, 5 features, `gamma = 0.1`, noise 0.1.
    pub fn portfolio(seed: u64) -> Self {
        Self {
            family: Family::Portfolio { assets: 10, gamma: 0.1 },
            features: 5,
            degree: 1,
            noise: 0.1,
            seed,
        }
    }

    /// 4x4 grid matching, 5 features, degree 4, noise 0.25.
    pub fn perfect_matching(seed: u64) -> Self {
        Self {
            family: Family::PerfectMatching { grid_size: 4 },
            features: 5,
            degree: 4,
            noise: 0.25,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.features == 0 {
            return Err(Error::InvalidInput("features must be >= 1".into()));
        }
        if self.degree == 0 {
            return Err(Error::InvalidInput("degree must be >= 1".into()));
        }
        let noise_ok = match self.family {
            Family::Portfolio { .. } => self.noise >= 0.0,
            _ => (0.0..1.0).contains(&self.noise),
        };
        if !(noise_ok && self.noise.is_finite()) {
            return Err(Error::InvalidInput(format!("noise out of range: {}", self.noise)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub problem: Problem,
    pub samples: Vec<DecisionSample>,
    /// Raw-feature norm that maps to 1; raw contexts are divided by it.
    pub feature_scale: f64,
    /// Sizes of the splits this dataset was generated alongside.
    pub split_sizes: Vec<usize>,
    pub generator: Option<GeneratorConfig>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    schema: u64,
    problem: ProblemSpec,
    feature_scale: f64,
    #[serde(default)]
    split_sizes: Vec<usize>,
    samples: Vec<DecisionSample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<GeneratorConfig>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn features(&self) -> usize {
        self.samples.first().map_or(0, |s| s.z.len())
    }

    /// `N x d` context matrix.
    pub fn feature_matrix(&self) -> Mat {
        let d = self.features();
        Mat::from_fn(self.len(), d, |i, j| self.samples[i].z[j])
    }

    pub fn has_costs(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| s.c_star.is_some())
    }

    /// Checks every invariant, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        if !(self.feature_scale > 0.0 && self.feature_scale.is_finite()) {
            return Err(field_error(
                "feature_scale",
                format!("must be positive, got {}", self.feature_scale),
            ));
        }
        if self.samples.is_empty() {
            return Err(field_error("samples", "dataset has no samples".into()));
        }
        let d = self.features();
        let m = self.problem.dim();
        for (i, s) in self.samples.iter().enumerate() {
            let at = |name: &str| format!("samples[{i}].{name}");
            if s.z.len() != d || d == 0 {
                return Err(field_error(&at("z"), format!("expected length {d}, got {}", s.z.len())));
            }
            if !s.z.iter().all(|v| v.is_finite()) {
                return Err(field_error(&at("z"), "non-finite entry".into()));
            }
            if norm(&s.z) > 1.0 + 1e-9 {
                return Err(field_error(&at("z"), format!("norm {} exceeds 1", norm(&s.z))));
            }
            if s.x_star.len() != m {
                return Err(field_error(
                    &at("x_star"),
                    format!("expected length {m}, got {}", s.x_star.len()),
                ));
            }
            if !s.x_star.iter().all(|v| v.is_finite()) {
                return Err(field_error(&at("x_star"), "non-finite entry".into()));
            }
            let residual = self.problem.feasibility_residual(&s.x_star)?;
            if residual > tol::DECISION_FEASIBILITY {
                return Err(field_error(
                    &at("x_star"),
                    format!("infeasible (residual {residual:e})"),
                ));
            }
            if let Some(c) = &s.c_star {
                if c.len() != m || !c.iter().all(|v| v.is_finite()) {
                    return Err(field_error(&at("c_star"), format!("expected {m} finite entries")));
                }
                let gap = optimality_gap(&self.problem, c, &s.x_star).map_err(|e| e.at_sample(i))?;
                if gap > tol::DECISION_FEASIBILITY {
                    return Err(field_error(
                        &at("c_star"),
                        format!("x_star is not optimal (gap {gap:e})"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            schema: SCHEMA_VERSION,
            problem: self.problem.to_spec(),
            feature_scale: self.feature_scale,
            split_sizes: self.split_sizes.clone(),
            samples: self.samples.clone(),
            generator: self.generator.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let schema = value
            .get("schema")
            .ok_or_else(|| field_error("schema", "missing".into()))?
            .as_u64()
            .ok_or_else(|| field_error("schema", "must be an unsigned integer".into()))?;
        if schema != SCHEMA_VERSION {
            return Err(Error::SchemaVersion(schema));
        }
        let file: DatasetFile = serde_json::from_value(value)?;
        let problem = Problem::from_spec(&file.problem).map_err(|e| field_error("problem", e.to_string()))?;
        let ds = Dataset {
            problem,
            samples: file.samples,
            feature_scale: file.feature_scale,
            split_sizes: file.split_sizes,
            generator: file.generator,
        };
        ds.validate()?;
        Ok(ds)
    }
}

fn field_error(field: &str, message: String) -> Error {
    Error::Validation {
        field: field.to_string(),
        message,
    }
}

/// Relative objective gap of `x` against a fresh solve for the user cost `c`.
pub fn optimality_gap(problem: &Problem, user_cost: &[f64], x: &[f64]) -> Result<f64> {
    let c = problem.model_cost(user_cost);
    let x_hat = problem.decide(&c)?;
    let best = problem.objective(&c, &x_hat);
    let gap = problem.objective(&c, x) - best;
    Ok(gap / best.abs().max(1.0))
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ds.to_json()?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    Dataset::from_json(&fs::read_to_string(path)?)
}

/// Generates `n` samples.
pub fn generate(cfg: &GeneratorConfig, n: usize) -> Result<Dataset> {
    let mut parts = generate_splits(cfg, &[n])?;
    Ok(parts.remove(0))
}

/// Generates `sizes.iter().sum()` samples from one seeded stream and cuts
/// them into consecutive splits. All splits share the problem, the random
/// cost map and the feature scale.
pub fn generate_splits(cfg: &GeneratorConfig, sizes: &[usize]) -> Result<Vec<Dataset>> {
    cfg.validate()?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidInput("every split needs at least one sample".into()));
    }
    let n: usize = sizes.iter().sum();
    let d = cfg.features;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let (problem, cost_map) = match &cfg.family {
        Family::SpGrid { grid_size } => {
            let inst = build_grid_sp(*grid_size)?;
            let m = inst.m();
            (Problem::Lp(inst), CostMap::polynomial(&mut rng, m, m, d))
        }
        Family::PerfectMatching { grid_size } => {
            let inst = build_perfect_matching(*grid_size)?;
            let m = inst.m();
            (Problem::Lp(inst), CostMap::polynomial(&mut rng, m, m, d))
        }
        Family::Knapsack { items } => {
            if *items == 0 {
                return Err(Error::InvalidInput("knapsack needs at least one item".into()));
            }
            let weight_dist = Uniform::new_inclusive(3.0, 8.0).expect("valid range");
            let weights: Vec<f64> = (0..*items)
                .map(|_| (weight_dist.sample(&mut rng) * 10.0_f64).round() / 10.0)
                .collect();
            let capacity = (0.4 * weights.iter().sum::<f64>() * 10.0).round() / 10.0;
            let inst = build_knapsack(&weights, capacity)?;
            let m = inst.m();
            (Problem::Lp(inst), CostMap::polynomial(&mut rng, *items, m, d))
        }
        Family::Portfolio { assets, gamma } => {
            if *assets < 2 {
                return Err(Error::InvalidInput("portfolio needs at least two assets".into()));
            }
            let m = *assets;
            let f = Mat::from_fn(m, m, |_, _| rng.sample(StandardNormal));
            let mut q = f.gram().scaled(1.0 / m as f64);
            for j in 0..m {
                q[(j, j)] += 0.01;
            }
            let q = q.symmetrized();
            let w = Mat::from_fn(m, d, |_, _| rng.sample(StandardNormal));
            (Problem::Portfolio(Portfolio::new(q, *gamma)?), CostMap::Linear { w })
        }
    };

    let raw: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let feature_scale = raw
        .iter()
        .map(|z| norm(z))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let contexts: Vec<Vec<f64>> = raw
        .iter()
        .map(|z| z.iter().map(|v| v / feature_scale).collect())
        .collect();

    let mut samples = Vec::with_capacity(n);
    for (i, (z, raw_z)) in contexts.into_iter().zip(&raw).enumerate() {
        let c_star = cost_map.sample(&mut rng, raw_z, cfg);
        let x_star = problem
            .decide(&problem.model_cost(&c_star))
            .map_err(|e| e.at_sample(i))?;
        samples.push(DecisionSample {
            z,
            x_star,
            c_star: Some(c_star),
        });
    }

    let mut out = Vec::with_capacity(sizes.len());
    let mut rest = samples.into_iter();
    for &size in sizes {
        out.push(Dataset {
            problem: problem.clone(),
            samples: rest.by_ref().take(size).collect(),
            feature_scale,
            split_sizes: sizes.to_vec(),
            generator: Some(cfg.clone()),
        });
    }
    Ok(out)
}

/// Shortest path on the 5x5 grid with `n` samples.
pub fn gen_sp_synth(n: usize, seed: u64, degree: u32) -> Result<Dataset> {
    generate(
        &GeneratorConfig {
            degree,
            ..GeneratorConfig::sp_synth(seed)
        },
        n,
    )
}

/// Fractional knapsack with 10 items and `n` samples.
pub fn gen_knapsack(n: usize, seed: u64, degree: u32) -> Result<Dataset> {
    generate(
        &GeneratorConfig {
            degree,
            ..GeneratorConfig::knapsack(seed)
        },
        n,
    )
}

/// Portfolio over `m` assets with `n` samples.
pub fn gen_portfolio(n: usize, seed: u64, m: usize, gamma: f64) -> Result<Dataset> {
    generate(
        &GeneratorConfig {
            family: Family::Portfolio { assets: m, gamma },
            ..GeneratorConfig::portfolio(seed)
        },
        n,
    )
}

/// Perfect matching on the 4x4 grid with `n` samples.
pub fn gen_perfect_matching(n: usize, seed: u64, degree: u32) -> Result<Dataset> {
    generate(
        &GeneratorConfig {
            degree,
            ..GeneratorConfig::perfect_matching(seed)
        },
        n,
    )
}

enum CostMap {
    /// Polynomial kernel on the first `active` coordinates, zero on the rest.
    Polynomial { b: Mat, active: usize, m: usize },
    /// `c = W z / sqrt(d) + noise * xi` with `xi ~ N(0, I)`.
    Linear { w: Mat },
}

impl CostMap {
    fn polynomial(rng: &mut ChaCha8Rng, active: usize, m: usize, d: usize) -> Self {
        let coin = Bernoulli::new(0.5).expect("valid probability");
        let b = Mat::from_fn(active, d, |_, _| {
            let keep = coin.sample(rng);
            let g: f64 = rng.sample(StandardNormal);
            if keep {
                g
            } else {
                0.0
            }
        });
        CostMap::Polynomial { b, active, m }
    }

    fn sample(&self, rng: &mut ChaCha8Rng, z: &[f64], cfg: &GeneratorConfig) -> Vec<f64> {
        match self {
            CostMap::Polynomial { b, active, m } => {
                let root_d = (z.len() as f64).sqrt();
                let proj = b.matvec(z).expect("feature length");
                let mut c = vec![0.0; *m];
                for j in 0..*active {
                    let eps = if cfg.noise > 0.0 {
                        rng.random_range(1.0 - cfg.noise..=1.0 + cfg.noise)
                    } else {
                        1.0
                    };
                    c[j] = ((proj[j] / root_d + 3.0).powi(cfg.degree as i32) + 1.0) * eps;
                }
                c
            }
            CostMap::Linear { w } => {
                let root_d = (z.len() as f64).sqrt();
                let mut c = w.matvec(z).expect("feature length");
                for v in &mut c {
                    let xi: f64 = rng.sample(StandardNormal);
                    *v = *v / root_d + cfg.noise * xi;
                }
                c
            }
        }
    }
}
