//! Classical testers for the gap group testing problem and the exact
//! distribution distances behind the classical lower bound.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::instances::{stream_rng, OverridePolicy, RelaxedOracle, SetOracle, Side};
use crate::subset;

/// Outcome of one tester run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TesterReport {
    pub decision: Side,
    pub queries: u64,
    pub seed: u64,
}

/// Inclusion probability of the sampling tester, `1/k` (and `1/2` for `k = 1`).
pub fn sampling_probability(k: usize) -> f64 {
    1.0 / k.max(2) as f64
}

/// Midpoint of `1 - (1-p)^k` and `1 - (1-p)^{k+d}`.
pub fn sampling_threshold(k: usize, d: usize) -> f64 {
    let q = 1.0 - sampling_probability(k);
    let lo = 1.0 - q.powi(k as i32);
    let hi = 1.0 - q.powi((k + d) as i32);
    (lo + hi) / 2.0
}

/// `⌈48 (1 + (k/d)²)⌉`.
pub fn default_repetitions(k: usize, d: usize) -> usize {
    let r = k as f64 / d as f64;
    (48.0 * (1.0 + r * r)).ceil() as usize
}

fn random_set<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> u64 {
    (0..n).filter(|_| rng.random_bool(p)).fold(0u64, |m, j| m | 1 << j)
}

/// Queries i.i.d. random sets and declares "large" iff the fraction of
/// positive answers exceeds [`sampling_threshold`].
pub fn sampling_tester<O: SetOracle + ?Sized>(oracle: &O, k: usize, d: usize, repetitions: usize, seed: u64) -> Result<TesterReport> {
    if k == 0 || d == 0 || repetitions == 0 {
        return invalid("need k, d, repetitions >= 1");
    }
    let mut rng = stream_rng(seed, 0);
    let p = sampling_probability(k);
    let start = oracle.queries();
    let hits = (0..repetitions).filter(|_| oracle.query(random_set(oracle.n(), p, &mut rng))).count();
    let decision = if hits as f64 / repetitions as f64 > sampling_threshold(k, d) { Side::Large } else { Side::Small };
    Ok(TesterReport { decision, queries: oracle.queries() - start, seed })
}

/// Failed split attempts before a set goes inactive: `⌈10 log₂ max(k, 2)⌉`.
pub fn split_budget(k: usize) -> u64 {
    (10.0 * (k.max(2) as f64).log2()).ceil() as u64
}

/// Query bound `4k · budget + 1` (at most `2k` steps of `budget` two-query attempts).
pub fn partition_query_bound(k: usize) -> u64 {
    4 * k as u64 * split_budget(k) + 1
}

/// Random-halving partition tester; never answers "large" on the small side.
pub fn partition_tester<O: SetOracle + ?Sized>(oracle: &O, k: usize, seed: u64) -> Result<TesterReport> {
    if k == 0 {
        return invalid("need k >= 1");
    }
    let start = oracle.queries();
    let done = |decision| TesterReport { decision, queries: oracle.queries() - start, seed };
    let full = subset::full(oracle.n());
    if !oracle.query(full) {
        return Ok(done(Side::Small));
    }
    let mut rng = stream_rng(seed, 0);
    let budget = split_budget(k);
    let mut active = vec![full];
    let mut inactive = 0usize;
    while let Some(s) = active.pop() {
        let mut split = None;
        for _ in 0..budget {
            let s1 = subset::elements(s).into_iter().filter(|_| rng.random_bool(0.5)).fold(0u64, |m, j| m | 1 << (j - 1));
            let s2 = s & !s1;
            if oracle.query(s1) && oracle.query(s2) {
                split = Some((s1, s2));
                break;
            }
        }
        match split {
            Some((a, b)) => {
                active.push(a);
                active.push(b);
                if active.len() + inactive > k {
                    return Ok(done(Side::Large));
                }
            }
            None => inactive += 1,
        }
    }
    Ok(done(Side::Small))
}

/// Which tester a harness run uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tester {
    Sampling,
    Partition,
}

/// Summary of a Monte-Carlo sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub errors: usize,
    pub error_rate: f64,
    pub mean_queries: f64,
    pub max_queries: u64,
}

/// Runs `trials` independent instances, each with a hidden set of the side's
/// size drawn from the trial's own stream.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(tester: Tester, n: usize, k: usize, d: usize, side: Side, policy: OverridePolicy, trials: usize, seed: u64) -> Result<MonteCarloSummary> {
    if k == 0 || d == 0 || k + d > n || n > 64 || trials == 0 {
        return invalid("need 1 <= k, 1 <= d, k + d <= n <= 64, trials >= 1");
    }
    let size = if side == Side::Small { k } else { k + d };
    let mut errors = 0;
    let mut total = 0u64;
    let mut max_q = 0u64;
    let reps = default_repetitions(k, d);
    for trial in 0..trials as u64 {
        let mut rng = stream_rng(seed, 2 * trial);
        let mut elems: Vec<usize> = (1..=n).collect();
        elems.shuffle(&mut rng);
        let a = subset::from_elements(&elems[..size]);
        let oracle = RelaxedOracle::new(n, k, d, side, a, policy, rng.random())?;
        let run_seed = seed ^ (2 * trial + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let rep = match tester {
            Tester::Sampling => sampling_tester(&oracle, k, d, reps, run_seed)?,
            Tester::Partition => partition_tester(&oracle, k, run_seed)?,
        };
        errors += (rep.decision != side) as usize;
        total += rep.queries;
        max_q = max_q.max(rep.queries);
    }
    Ok(MonteCarloSummary { trials, errors, error_rate: errors as f64 / trials as f64, mean_queries: total as f64 / trials as f64, max_queries: max_q })
}

fn binom_big(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::from(1u32);
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// `P[𝓗_n(k, m) = i]` for `i = 0..=m`: `C(k,i) C(n-k,m-i) / C(n,m)`.
pub fn hypergeom_pmf(n: u64, k: u64, m: u64) -> Result<Vec<BigRational>> {
    if k > n || m > n {
        return invalid("need k, m <= n");
    }
    let den = binom_big(n, m);
    Ok((0..=m).map(|i| BigRational::new(binom_big(k, i) * binom_big(n - k, m - i), den.clone())).collect())
}

/// Exact `TV(𝓗_n(k, m), 𝓗_n(k+d, m))`.
pub fn hypergeom_tv(n: u64, k: u64, d: u64, m: u64) -> Result<BigRational> {
    if k + d > n {
        return invalid("need k + d <= n");
    }
    let p = hypergeom_pmf(n, k, m)?;
    let q = hypergeom_pmf(n, k + d, m)?;
    let sum = p.iter().zip(&q).fold(BigRational::zero(), |acc, (a, b)| acc + (a - b).abs());
    Ok(sum / BigRational::from_integer(BigInt::from(2)))
}

/// Sample size `⌊min(n/4, n(k+d)/d²)⌋` used by the lower-bound argument.
pub fn lower_bound_sample_size(n: u64, k: u64, d: u64) -> u64 {
    (n / 4).min(n * (k + d) / (d * d))
}

/// Checks `TV ≤ 0.95` at the lower-bound sample size over `n ≤ n_max`,
/// `1 ≤ d ≤ k ≤ k_max`, `k + d ≤ n`. Returns the number of points within the
/// bound and the points above it as `(n, k, d, tv)`.
pub fn lower_bound_grid_check(n_max: u64, k_max: u64) -> Result<(usize, Vec<(u64, u64, u64, f64)>)> {
    let bound = BigRational::new(95.into(), 100.into());
    let mut within = 0;
    let mut above = Vec::new();
    for n in 2..=n_max {
        for k in 1..=k_max {
            for d in 1..=k {
                if k + d > n {
                    continue;
                }
                let tv = hypergeom_tv(n, k, d, lower_bound_sample_size(n, k, d))?;
                if tv <= bound {
                    within += 1;
                } else {
                    above.push((n, k, d, num_traits::ToPrimitive::to_f64(&tv).unwrap_or(1.0)));
                }
            }
        }
    }
    Ok((within, above))
}

fn binom_pmf(n: usize, p: f64) -> Vec<f64> {
    let mut v = vec![0.0; n + 1];
    v[0] = 1.0;
    for m in 1..=n {
        for i in (1..=m).rev() {
            v[i] = v[i] * (1.0 - p) + v[i - 1] * p;
        }
        v[0] *= 1.0 - p;
    }
    v
}

/// `(TV, Kolmogorov)` distances between `ℬ(k, p)` and `ℬ(k+d, p)`.
pub fn binom_tv_kolmogorov(k: usize, d: usize, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 1.0) || k == 0 || d == 0 {
        return invalid("need 0 < p < 1 and k, d >= 1");
    }
    let a = binom_pmf(k, p);
    let b = binom_pmf(k + d, p);
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let tv = (0..=k + d).map(|i| (at(&a, i) - at(&b, i)).abs()).sum::<f64>() / 2.0;
    let mut ta = 0.0;
    let mut tb = 0.0;
    let mut kol: f64 = 0.0;
    for l in (0..=k + d).rev() {
        ta += at(&a, l);
        tb += at(&b, l);
        kol = kol.max((tb - ta).abs());
    }
    Ok((tv, kol))
}
