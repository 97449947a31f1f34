//! Monte Carlo random walks on `Γ_1`, a stochastic cross-check of the exact solves.
//!
//! Each sample draws from its own ChaCha stream keyed by `(seed, sample index)`, and sums
//! are accumulated in integers, so the result is independent of the thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::topology::{build_level_graph, GasketParams, LevelGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WalkTarget {
    /// Walk from `q_0`; success if it comes back to `q_0` before `q_1` or `q_2`.
    ReturnProb,
    /// Number of steps from `q_1` until the first visit to `q_2`.
    HittingTime,
}

impl WalkTarget {
    pub fn name(self) -> &'static str {
        match self {
            WalkTarget::ReturnProb => "return-prob",
            WalkTarget::HittingTime => "hitting-time",
        }
    }
}

impl fmt::Display for WalkTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WalkTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "return-prob" => Ok(WalkTarget::ReturnProb),
            "hitting-time" => Ok(WalkTarget::HittingTime),
            _ => Err(Error::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkStats {
    pub estimate: f64,
    pub standard_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl WalkStats {
    /// Distance from `exact` in units of the standard error.
    pub fn z_score(&self, exact: f64) -> f64 {
        (self.estimate - exact).abs() / self.standard_error
    }
}

fn step(g: &LevelGraph, x: usize, rng: &mut ChaCha8Rng) -> usize {
    let nbrs = g.neighbors(x);
    nbrs[rng.random_range(0..nbrs.len())]
}

fn sample(g: &LevelGraph, target: WalkTarget, rng: &mut ChaCha8Rng) -> u64 {
    match target {
        WalkTarget::ReturnProb => {
            let mut x = step(g, 0, rng);
            while !g.is_boundary(x) {
                x = step(g, x, rng);
            }
            u64::from(x == 0)
        }
        WalkTarget::HittingTime => {
            let mut x = 1;
            let mut steps = 0u64;
            while x != 2 {
                x = step(g, x, rng);
                steps += 1;
            }
            steps
        }
    }
}

pub fn monte_carlo_walk(params: &GasketParams, target: WalkTarget, samples: u64, seed: u64) -> Result<WalkStats> {
    if samples < 2 {
        return Err(Error::domain("monte carlo walk needs at least 2 samples"));
    }
    let g = build_level_graph(params, 1)?;
    let (sum, sum_sq) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let v = u128::from(sample(&g, target, &mut rng));
            (v, v * v)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mean = sum as f64 / n;
    let var = (sum_sq as f64 - (sum as f64) * mean) / (n - 1.0);
    Ok(WalkStats {
        estimate: mean,
        standard_error: (var.max(0.0) / n).sqrt(),
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::gasket_params;

    #[test]
    fn deterministic_per_seed() {
        let p = gasket_params(2).unwrap();
        let a = monte_carlo_walk(&p, WalkTarget::ReturnProb, 5000, 7).unwrap();
        let b = monte_carlo_walk(&p, WalkTarget::ReturnProb, 5000, 7).unwrap();
        assert_eq!(a, b);
        let c = monte_carlo_walk(&p, WalkTarget::ReturnProb, 5000, 8).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let p = gasket_params(2).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo_walk(&p, WalkTarget::HittingTime, 4000, 3).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn small_runs_near_exact() {
        let p = gasket_params(2).unwrap();
        let ret = monte_carlo_walk(&p, WalkTarget::ReturnProb, 40_000, 11).unwrap();
        assert!(ret.z_score(0.4) < 5.0, "{ret:?}");
        let hit = monte_carlo_walk(&p, WalkTarget::HittingTime, 40_000, 11).unwrap();
        assert!(hit.z_score(10.0) < 5.0, "{hit:?}");
    }

    #[test]
    fn target_names() {
        assert_eq!("hitting-time".parse::<WalkTarget>().unwrap(), WalkTarget::HittingTime);
        assert!("mixing".parse::<WalkTarget>().is_err());
    }
}
