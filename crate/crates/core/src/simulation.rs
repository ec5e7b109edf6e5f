//! Monte Carlo oracle for the confirmation model.
//!
//! Each detection vector is `n` Bernoulli(p_miss) misses run through the
//! confirmation logic; the correlated mode replaces the IID draws with a
//! two-state Markov chain of the same stationary miss probability and
//! lag-1 autocorrelation `rho`.
//!
//! Trials are split into fixed-size blocks, each with its own
//! counter-derived RNG stream, so the estimate is bit-identical whether the
//! blocks run sequentially or on any number of rayon workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::detection::binomial_tail_geq;
use crate::error::{Error, Result};
use crate::probability::check_unit_interval;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const BLOCK_SIZE: u64 = 1 << 16;

/// Simulation parameters. `rho = 0` is the IID case.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub x_min: usize,
    pub p_miss: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default)]
    pub rho: f64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        check_unit_interval("p_miss", self.p_miss)?;
        if self.n == 0 || self.x_min > self.n {
            return Err(Error::Config(format!(
                "need 0 < n and x_min <= n, got n = {}, x_min = {}",
                self.n, self.x_min
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho = {} outside [0,1)", self.rho)));
        }
        let chain = MarkovChain::new(self.p_miss, self.rho)?;
        let _ = chain;
        Ok(())
    }
}

/// Estimate of P(T=0) with its sampling uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimResult {
    pub estimate: f64,
    pub standard_error: f64,
    pub trials: u64,
    pub failures: u64,
    pub seed: u64,
    /// Exact (Clopper-Pearson) 95% interval, reported for rare-event runs
    /// with fewer than 100 observed failures.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_ci95: Option<(f64, f64)>,
}

/// Two-state miss/hit chain with stationary miss probability `p_miss` and
/// lag-1 autocorrelation `rho`.
#[derive(Debug, Clone, Copy)]
struct MarkovChain {
    p_miss: f64,
    /// P(miss -> miss)
    miss_to_miss: f64,
    /// P(hit -> miss)
    hit_to_miss: f64,
}

impl MarkovChain {
    fn new(p_miss: f64, rho: f64) -> Result<Self> {
        let miss_to_miss = p_miss + rho * (1.0 - p_miss);
        let hit_to_miss = p_miss * (1.0 - rho);
        for (name, p) in [("P(miss->miss)", miss_to_miss), ("P(hit->miss)", hit_to_miss)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} = {p} outside [0,1]")));
            }
        }
        Ok(MarkovChain { p_miss, miss_to_miss, hit_to_miss })
    }

    /// Miss probability for the next frame given the previous state (None at
    /// the first frame: stationary draw).
    fn miss_prob(&self, prev_miss: Option<bool>) -> f64 {
        match prev_miss {
            None => self.p_miss,
            Some(true) => self.miss_to_miss,
            Some(false) => self.hit_to_miss,
        }
    }
}

/// IID Bernoulli simulation; requires `rho = 0`.
pub fn simulate_iid(config: &SimConfig) -> Result<SimResult> {
    if config.rho != 0.0 {
        return Err(Error::Config(format!("simulate_iid requires rho = 0, got {}", config.rho)));
    }
    simulate_markov(config)
}

/// Correlated-chain simulation (reduces to IID draws at `rho = 0` with an
/// identical random stream).
pub fn simulate_markov(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let chain = MarkovChain::new(config.p_miss, config.rho)?;
    let threshold = config.n - config.x_min + 1; // misses that force rejection

    let blocks = config.trials.div_ceil(BLOCK_SIZE);
    let block_ids: Vec<u64> = (0..blocks).collect();
    let failures: u64 = run_blocks(&block_ids, |block| {
        run_block(config, chain, threshold, block)
    });

    let trials = config.trials as f64;
    let estimate = failures as f64 / trials;
    Ok(SimResult {
        estimate,
        standard_error: (estimate * (1.0 - estimate) / trials).sqrt(),
        trials: config.trials,
        failures,
        seed: config.seed,
        exact_ci95: if failures < 100 {
            Some(clopper_pearson(failures, config.trials, 0.95))
        } else {
            None
        },
    })
}

fn run_block(config: &SimConfig, chain: MarkovChain, threshold: usize, block: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(block + 1);
    let first = block * BLOCK_SIZE;
    let count = BLOCK_SIZE.min(config.trials - first);
    let mut failures = 0u64;
    for _ in 0..count {
        let mut misses = 0usize;
        let mut prev: Option<bool> = None;
        for _ in 0..config.n {
            let miss = rng.gen::<f64>() < chain.miss_prob(prev);
            misses += usize::from(miss);
            prev = Some(miss);
        }
        failures += u64::from(misses >= threshold);
    }
    failures
}

#[cfg(feature = "parallel")]
fn run_blocks(blocks: &[u64], f: impl Fn(u64) -> u64 + Sync) -> u64 {
    blocks.par_iter().map(|&b| f(b)).sum()
}

#[cfg(not(feature = "parallel"))]
fn run_blocks(blocks: &[u64], f: impl Fn(u64) -> u64) -> u64 {
    blocks.iter().map(|&b| f(b)).sum()
}

/// Sequential block execution, exposed so the bench suite can compare it
/// against the parallel path. Produces the same failure count.
pub fn run_blocks_sequential(config: &SimConfig) -> Result<u64> {
    config.validate()?;
    let chain = MarkovChain::new(config.p_miss, config.rho)?;
    let threshold = config.n - config.x_min + 1;
    Ok((0..config.trials.div_ceil(BLOCK_SIZE))
        .map(|b| run_block(config, chain, threshold, b))
        .sum())
}

/// Exact P(T=0) under the correlated chain by enumerating all 2^n state
/// paths. Intended for sensitivity reports and as a cross-check at small n.
pub fn exact_reject_probability_markov(
    n: usize,
    x_min: usize,
    p_miss: f64,
    rho: f64,
) -> Result<f64> {
    if n == 0 || n > 24 || x_min > n {
        return Err(Error::Config(format!("need 0 < n <= 24 and x_min <= n, got n = {n}")));
    }
    check_unit_interval("p_miss", p_miss)?;
    let chain = MarkovChain::new(p_miss, rho)?;
    let threshold = n - x_min + 1;
    let mut total = 0.0;
    for path in 0u32..(1 << n) {
        let mut prob = 1.0;
        let mut misses = 0usize;
        let mut prev: Option<bool> = None;
        for frame in 0..n {
            let miss = path >> frame & 1 == 1;
            let pm = chain.miss_prob(prev);
            prob *= if miss { pm } else { 1.0 - pm };
            misses += usize::from(miss);
            prev = Some(miss);
        }
        if misses >= threshold {
            total += prob;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Analytic P(T=0) for the IID case, for convenience in reports.
pub fn analytic_reject_probability(n: usize, x_min: usize, p_miss: f64) -> Result<f64> {
    let y_min = n - x_min + 1;
    if y_min > n {
        return Ok(0.0);
    }
    binomial_tail_geq(n, y_min, p_miss)
}

/// P(X <= k) for X ~ Binomial(t, p), summed in log space. Only used for
/// small k against very large t, where the tail sum from 0..=k is cheap.
fn binom_cdf_le(k: u64, t: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return f64::from(k == t);
    }
    let tf = t as f64;
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    let mut cdf = 0.0;
    for i in 0..=k {
        let fi = i as f64;
        let ln_term = ln_gamma(tf + 1.0) - ln_gamma(fi + 1.0) - ln_gamma(tf - fi + 1.0)
            + fi * lp
            + (tf - fi) * lq;
        cdf += ln_term.exp();
    }
    cdf.clamp(0.0, 1.0)
}

/// Clopper-Pearson exact binomial interval for `k` successes in `t` trials,
/// by bisection on the binomial CDF (monotone in p).
fn clopper_pearson(k: u64, t: u64, confidence: f64) -> (f64, f64) {
    let half_alpha = (1.0 - confidence) / 2.0;
    let bisect = |target_holds: &dyn Fn(f64) -> bool| {
        // largest p for which the predicate holds; predicate is monotone
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if target_holds(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let lower = if k == 0 {
        0.0
    } else {
        // largest p with P(X >= k | p) <= alpha/2
        bisect(&|p| 1.0 - binom_cdf_le(k - 1, t, p) <= half_alpha)
    };
    let upper = if k == t {
        1.0
    } else {
        // crossing point where P(X <= k | p) falls to alpha/2
        bisect(&|p| binom_cdf_le(k, t, p) > half_alpha)
    };
    (lower, upper)
}
