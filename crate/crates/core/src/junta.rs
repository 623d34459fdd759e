//! Quantum junta testing: the influence tester, testers of the first and
//! second kind, and the combined verdict, all with exact probabilities.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::boolfn::BooleanFunction;
use crate::error::{invalid, Error, Result};
use crate::instances::{stream_rng, Side};
use crate::qcore::{haar_reflection, reflectionized_amplitude, UnitaryOp};
use crate::qggt::{QggtConfig, QggtPlan};
use crate::scalar::{binom, cr, Complex};
use crate::subset;

/// Independent copies OR-ed together by the influence tester.
pub const OR_COPIES: u32 = 9;
/// The second-kind tester accepts iff the inner acceptance probability is at most this.
pub const SECOND_KIND_THRESHOLD: f64 = 0.8;
/// Monte-Carlo trials for the second kind when exact enumeration is too large.
pub const DEFAULT_SECOND_KIND_TRIALS: usize = 200;
/// Largest `n` for which the second kind enumerates every `V`.
pub const EXACT_SECOND_KIND_MAX_N: usize = 20;
/// Largest dimension of an explicit influence-tester circuit.
pub const MAX_CIRCUIT_DIM: usize = 1024;

/// Amplified influence test on a fixed set `V`.
///
/// One copy draws a round count `r` uniformly from `0..rounds`, runs `r`
/// Grover iterates on the state that marks `f(x) ≠ f(y)` (with `y` resampled
/// on `V`) and measures; the tester accepts if any of `copies` copies marks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceTester {
    pub v: u64,
    pub delta: f64,
    pub rounds: usize,
    pub copies: u32,
}

impl InfluenceTester {
    pub fn new(v: u64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return invalid("delta must lie in (0, 1]");
        }
        let th = (delta / 2.0).sqrt().asin();
        let rounds = (FRAC_PI_4 / th).ceil() as usize;
        Ok(Self { v, delta, rounds, copies: OR_COPIES })
    }

    /// Marking probability before amplification.
    pub fn base_probability(inf: f64) -> f64 {
        inf.clamp(0.0, 1.0) / 2.0
    }

    /// `(1/M) Σ_{r<M} sin²((2r+1)θ) = 1/2 - sin(4Mθ)/(4M sin 2θ)` with `θ = asin √(Inf/2)`.
    pub fn single_copy_probability(&self, inf: f64) -> f64 {
        let th = Self::base_probability(inf).sqrt().asin();
        if th == 0.0 {
            return 0.0;
        }
        let m = self.rounds as f64;
        (0.5 - (4.0 * m * th).sin() / (4.0 * m * (2.0 * th).sin())).clamp(0.0, 1.0)
    }

    pub fn acceptance_probability(&self, inf: f64) -> f64 {
        1.0 - (1.0 - self.single_copy_probability(inf)).powi(self.copies as i32)
    }

    /// `sin²((2M+1)θ)`: a single copy with the round count fixed to `M`.
    pub fn fixed_round_probability(&self, inf: f64) -> f64 {
        crate::qcore::amplified_probability(Self::base_probability(inf), self.rounds)
    }

    /// Worst-case calls to `f`: two per marking step and two for the final check.
    pub fn max_queries(&self) -> u64 {
        u64::from(self.copies) * 2 * self.rounds as u64
    }
}

/// Exact figures of one influence test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    pub tester: InfluenceTester,
    pub influence: f64,
    pub base_probability: f64,
    pub single_copy_probability: f64,
    pub acceptance_probability: f64,
    pub max_queries: u64,
}

/// Single-copy circuit on registers `R ⊗ X ⊗ Y` (`R` outermost): `R` holds the
/// round count, `X` the input and `Y` the fresh values of the `V` coordinates.
#[derive(Clone, Debug)]
pub struct InfluenceCircuit {
    pub rounds: usize,
    /// `dim X ⊗ Y`.
    pub inner_dim: usize,
    /// Uniform superposition on `X ⊗ Y`.
    pub prep: UnitaryOp<f64>,
    pub op: UnitaryOp<f64>,
    marked: Vec<bool>,
}

impl InfluenceCircuit {
    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Whether a basis state of `R ⊗ X ⊗ Y` has `f(x) ≠ f(y)`.
    pub fn marked(&self, idx: usize) -> bool {
        self.marked[idx % self.inner_dim]
    }

    /// Probability of measuring a marked state after `op` on `|0⟩`.
    pub fn marking_probability(&self) -> f64 {
        let mut e0 = vec![cr(0.0); self.dim()];
        e0[0] = cr(1.0);
        let out = self.op.apply(&e0).expect("dimensions agree");
        out.iter().enumerate().filter(|(i, _)| self.marked(*i)).map(|(_, z)| z.norm_sqr()).sum()
    }
}

fn deposit(bits: u64, mask: u64) -> u64 {
    let mut out = 0;
    for (i, j) in subset::elements(mask).into_iter().enumerate() {
        out |= (bits >> i & 1) << (j - 1);
    }
    out
}

fn walsh_hadamard(bits: usize) -> DMatrix<Complex<f64>> {
    let dim = 1usize << bits;
    let s = (dim as f64).sqrt().recip();
    DMatrix::from_fn(dim, dim, |i, j| cr(if (i & j).count_ones() % 2 == 0 { s } else { -s }))
}

/// Real orthogonal matrix sending `e₀` to the uniform vector.
fn uniform_prep(dim: usize) -> DMatrix<Complex<f64>> {
    let u = (dim as f64).sqrt().recip();
    let mut v = vec![-u; dim];
    v[0] += 1.0;
    let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut m = DMatrix::<Complex<f64>>::identity(dim, dim);
    if nrm > 1e-15 {
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] -= cr(2.0 * v[i] * v[j] / (nrm * nrm));
            }
        }
    }
    m
}

/// Explicit single-copy circuit, if its dimension is at most [`MAX_CIRCUIT_DIM`].
pub fn influence_circuit(f: &BooleanFunction, v: u64, delta: f64) -> Result<Option<InfluenceCircuit>> {
    let n = f.n();
    check_subset(n, v)?;
    let tester = InfluenceTester::new(v, delta)?;
    let m = subset::size(v);
    let inner_dim = 1usize << (n + m);
    let dim = tester.rounds * inner_dim;
    if dim > MAX_CIRCUIT_DIM {
        return Ok(None);
    }
    let marked: Vec<bool> = (0..inner_dim)
        .map(|w| {
            let x = (w >> m) as u64;
            let y = (x & !v) | deposit((w & ((1 << m) - 1)) as u64, v);
            f.bit(x) != f.bit(y)
        })
        .collect();
    let h = walsh_hadamard(n + m);
    let s_chi = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(inner_dim, marked.iter().map(|&b| cr(if b { -1.0 } else { 1.0 }))));
    let mut neg_s0 = -DMatrix::<Complex<f64>>::identity(inner_dim, inner_dim);
    neg_s0[(0, 0)] = cr(1.0);
    let q = &h * neg_s0 * &h * s_chi;
    let mut powers = Vec::with_capacity(tester.rounds);
    let mut cur = DMatrix::<Complex<f64>>::identity(inner_dim, inner_dim);
    for _ in 0..tester.rounds {
        powers.push(cur.clone());
        cur = &q * cur;
    }
    let prep_r = uniform_prep(tester.rounds).kronecker(&DMatrix::<Complex<f64>>::identity(inner_dim, inner_dim));
    let op = UnitaryOp::Sequence(vec![
        UnitaryOp::Dense(prep_r),
        UnitaryOp::Blocks { target: inner_dim, blocks: vec![h.clone(); tester.rounds] },
        UnitaryOp::Blocks { target: inner_dim, blocks: powers },
    ]);
    Ok(Some(InfluenceCircuit { rounds: tester.rounds, inner_dim, prep: UnitaryOp::Dense(h), op, marked }))
}

/// Exact acceptance figures, plus the single-copy circuit when it is small.
pub fn influence_tester(f: &BooleanFunction, v: u64, delta: f64) -> Result<(InfluenceReport, Option<InfluenceCircuit>)> {
    check_subset(f.n(), v)?;
    let tester = InfluenceTester::new(v, delta)?;
    let inf: f64 = f.influence(v);
    let report = InfluenceReport {
        tester,
        influence: inf,
        base_probability: InfluenceTester::base_probability(inf),
        single_copy_probability: tester.single_copy_probability(inf),
        acceptance_probability: tester.acceptance_probability(inf),
        max_queries: tester.max_queries(),
    };
    Ok((report, influence_circuit(f, v, delta)?))
}

fn check_subset(n: usize, v: u64) -> Result<()> {
    if v & !subset::full(n) != 0 {
        return invalid("V must be a subset of [n]");
    }
    Ok(())
}

/// How the first-kind tester realizes its group-testing oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JuntaMode {
    /// `-I` if `Inf_S ≥ δ`, `+I` if `Inf_S = 0`, a seeded random reflection otherwise.
    Ideal,
    /// Majority-reduced influence tester with uncompute, reflectionized and
    /// compressed to its two-dimensional invariant block.
    CompressedCircuit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JuntaConfig {
    pub qggt: QggtConfig,
    pub seed: u64,
    /// Majority copies in compressed-circuit mode; `⌈10 ln(k/ε)⌉` if unset.
    pub majority_copies: Option<usize>,
    pub second_kind_trials: usize,
    /// Repetitions (majority vote) of every subtester.
    pub repeats: usize,
}

impl Default for JuntaConfig {
    fn default() -> Self {
        Self { qggt: QggtConfig::default(), seed: 0, majority_copies: None, second_kind_trials: DEFAULT_SECOND_KIND_TRIALS, repeats: 3 }
    }
}

/// `⌊log₂(200k)⌋`.
pub fn max_level(k: usize) -> u32 {
    (200 * k as u64).ilog2()
}

/// `ε / (2^{ℓ+3} log₂(400k))`.
pub fn first_kind_delta(k: usize, eps: f64, level: u32) -> f64 {
    eps / (2f64.powi(level as i32 + 3) * (400.0 * k as f64).log2())
}

/// `ε / (4k)`.
pub fn second_kind_delta(k: usize, eps: f64) -> f64 {
    eps / (4.0 * k as f64)
}

/// `⌈10 ln(k/ε)⌉`, at least 1.
pub fn default_majority_copies(k: usize, eps: f64) -> usize {
    ((10.0 * (k as f64 / eps).ln()).ceil() as usize).max(1)
}

/// `Pr[Bin(r, p) > r/2]`.
pub fn majority_probability(p: f64, r: usize) -> f64 {
    (r / 2 + 1..=r).map(|j| binom::<f64>(r as i64, j as i64) * p.powi(j as i32) * (1.0 - p).powi((r - j) as i32)).sum::<f64>().clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubtesterKind {
    First,
    Second,
}

/// Result of one subtester.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubtesterOutcome {
    pub kind: SubtesterKind,
    pub level: Option<u32>,
    pub delta: f64,
    /// Acceptance probability of a single run.
    pub acceptance_probability: f64,
    /// Acceptance probability of the majority over the configured repetitions.
    pub boosted_probability: f64,
    /// Majority outcome of a single run.
    pub accept: bool,
    /// The level needs more than `n` variables and always accepts.
    pub vacuous: bool,
    /// Promise met by the ideal oracle; `None` when it falls outside both.
    pub promise: Option<Side>,
    /// Second kind: `E_V[accept]` of the inner influence test.
    pub inner_probability: Option<f64>,
    /// False when the inner probability was estimated by sampling.
    pub exact: bool,
    pub queries: u64,
}

/// Majority-of-`r` acceptance for a single-run acceptance `p`.
pub fn boosted(p: f64, repeats: usize) -> f64 {
    if repeats <= 1 {
        return p;
    }
    majority_probability(p, repeats)
}

fn validate(k: usize, eps: f64) -> Result<()> {
    if k == 0 {
        return invalid("k must be positive");
    }
    if !(eps > 0.0 && eps < 1.0) {
        return invalid("eps must lie in (0, 1)");
    }
    Ok(())
}

fn level_seed(seed: u64, level: u32) -> u64 {
    seed ^ (u64::from(level) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// `⟨0|O_{f,S}|0⟩` on `[n]` for the chosen mode.
pub fn first_kind_amplitudes(f: &BooleanFunction, k: usize, eps: f64, level: u32, mode: JuntaMode, cfg: &JuntaConfig) -> Result<Vec<f64>> {
    let delta = first_kind_delta(k, eps, level);
    let infl = f.fourier::<f64>().all_set_influences();
    let relevant = f.relevant_variables();
    let seed = level_seed(cfg.seed, level);
    Ok(match mode {
        JuntaMode::Ideal => (0..infl.len() as u64)
            .map(|s| {
                if s & relevant == 0 {
                    1.0
                } else if infl[s as usize] >= delta {
                    -1.0
                } else {
                    haar_reflection::<f64, _>(2, &mut stream_rng(seed, s))[(0, 0)].re
                }
            })
            .collect(),
        JuntaMode::CompressedCircuit => {
            let r = cfg.majority_copies.unwrap_or_else(|| default_majority_copies(k, eps));
            let tester = InfluenceTester::new(0, delta)?;
            infl.iter()
                .map(|&inf| {
                    let a = 1.0 - 2.0 * majority_probability(tester.acceptance_probability(inf), r);
                    reflectionized_amplitude(cr(a))
                })
                .collect()
        }
    })
}

/// Two-dimensional reflection with `⟨0|O|0⟩ = a`.
pub fn compressed_block(a: f64) -> DMatrix<Complex<f64>> {
    let b = (1.0 - a * a).max(0.0).sqrt();
    DMatrix::from_row_slice(2, 2, &[cr(a), cr(b), cr(b), cr(-a)])
}

/// Which promise the ideal oracle at threshold `δ` meets, if any.
pub fn ideal_promise(f: &BooleanFunction, k: usize, d: usize, delta: f64) -> Option<Side> {
    if subset::size(f.relevant_variables()) <= k {
        return Some(Side::Small);
    }
    let heavy = f.fourier::<f64>().variable_influences().iter().filter(|&&x| x >= delta).count();
    (heavy >= k + d).then_some(Side::Large)
}

/// Tester of the first kind at level `ℓ` (`d = 2^ℓ`).
pub fn first_kind_tester(f: &BooleanFunction, k: usize, eps: f64, level: u32, mode: JuntaMode, cfg: &JuntaConfig) -> Result<SubtesterOutcome> {
    validate(k, eps)?;
    if level > max_level(k) {
        return invalid(format!("level must be at most {}", max_level(k)));
    }
    let n = f.n();
    let d = 1usize << level;
    let delta = first_kind_delta(k, eps, level);
    let mut out = SubtesterOutcome {
        kind: SubtesterKind::First,
        level: Some(level),
        delta,
        acceptance_probability: 1.0,
        boosted_probability: 1.0,
        accept: true,
        vacuous: true,
        promise: None,
        inner_probability: None,
        exact: true,
        queries: 0,
    };
    if k + d > n {
        return Ok(out);
    }
    out.vacuous = false;
    out.promise = ideal_promise(f, k, d, delta);
    let plan = QggtPlan::<f64>::new(n, k, d, &cfg.qggt)?;
    let amps = first_kind_amplitudes(f, k, eps, level, mode, cfg)?;
    let mask = subset::full(n);
    let padded: Vec<f64> = (0..1u64 << plan.padded_n()).map(|s| if s == 0 { -1.0 } else { amps[(s & mask) as usize] }).collect();
    let outcome = plan.outcome(&padded)?;
    let per_call = InfluenceTester::new(0, delta)?.max_queries();
    let per_call = match mode {
        JuntaMode::Ideal => per_call,
        // Majority copies, each run forward and backward, and the two oracle uses of the reflectionizer.
        JuntaMode::CompressedCircuit => 4 * cfg.majority_copies.unwrap_or_else(|| default_majority_copies(k, eps)) as u64 * per_call,
    };
    out.acceptance_probability = outcome.acceptance_probability;
    out.boosted_probability = boosted(outcome.acceptance_probability, cfg.repeats);
    out.accept = outcome.accept;
    out.queries = outcome.queries * per_call * cfg.repeats.max(1) as u64;
    Ok(out)
}

/// `E_V[accept]` with `V ∋ i` independently with probability `1/k`; exact for
/// `n ≤` [`EXACT_SECOND_KIND_MAX_N`], otherwise averaged over `trials` sampled `V`.
pub fn second_kind_inner_probability(f: &BooleanFunction, k: usize, eps: f64, trials: usize, seed: u64) -> Result<(f64, bool)> {
    validate(k, eps)?;
    let n = f.n();
    let p = 1.0 / k as f64;
    let tester = InfluenceTester::new(0, second_kind_delta(k, eps))?;
    if n <= EXACT_SECOND_KIND_MAX_N {
        let infl = f.fourier::<f64>().all_set_influences();
        let total = infl
            .iter()
            .enumerate()
            .map(|(v, &inf)| {
                let m = (v as u64).count_ones() as i32;
                p.powi(m) * (1.0 - p).powi(n as i32 - m) * tester.acceptance_probability(inf)
            })
            .sum::<f64>();
        return Ok((total.clamp(0.0, 1.0), true));
    }
    if trials == 0 {
        return invalid("at least one trial is needed");
    }
    let spec = f.fourier::<f64>();
    let mut rng = stream_rng(seed, u64::MAX);
    let mut acc = 0.0;
    for _ in 0..trials {
        let v = (0..n).filter(|_| rng.random_bool(p)).fold(0u64, |m, j| m | 1 << j);
        acc += tester.acceptance_probability(spec.influence(v));
    }
    Ok((acc / trials as f64, false))
}

/// Tester of the second kind (`k ≥ 2`).
pub fn second_kind_tester(f: &BooleanFunction, k: usize, eps: f64, trials: usize, seed: u64) -> Result<SubtesterOutcome> {
    if k < 2 {
        return invalid("the second-kind tester needs k >= 2");
    }
    let (inner, exact) = second_kind_inner_probability(f, k, eps, trials, seed)?;
    let accept = inner <= SECOND_KIND_THRESHOLD;
    let delta = second_kind_delta(k, eps);
    let p = if accept { 1.0 } else { 0.0 };
    let per_v = InfluenceTester::new(0, delta)?.max_queries();
    Ok(SubtesterOutcome {
        kind: SubtesterKind::Second,
        level: None,
        delta,
        acceptance_probability: p,
        boosted_probability: p,
        accept,
        vacuous: false,
        promise: None,
        inner_probability: Some(inner),
        exact,
        queries: per_v * trials.max(1) as u64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JuntaDecision {
    Junta,
    Far,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JuntaVerdict {
    pub decision: JuntaDecision,
    /// Probability that every repeated subtester accepts.
    pub acceptance_probability: f64,
    pub first_kind: Vec<SubtesterOutcome>,
    pub second_kind: SubtesterOutcome,
    pub queries: u64,
}

/// All `⌊log₂ 200k⌋ + 2` subtesters; junta iff each accepts.
pub fn junta_test(f: &BooleanFunction, k: usize, eps: f64, mode: JuntaMode, cfg: &JuntaConfig) -> Result<JuntaVerdict> {
    validate(k, eps)?;
    if k < 2 {
        return invalid("junta testing needs k >= 2");
    }
    let first_kind = (0..=max_level(k)).map(|l| first_kind_tester(f, k, eps, l, mode, cfg)).collect::<Result<Vec<_>>>()?;
    let mut second_kind = second_kind_tester(f, k, eps, cfg.second_kind_trials, cfg.seed)?;
    second_kind.boosted_probability = boosted(second_kind.acceptance_probability, cfg.repeats);
    let all = first_kind.iter().chain(std::iter::once(&second_kind));
    let accept = all.clone().all(|o| o.accept);
    let acceptance_probability = all.clone().map(|o| o.boosted_probability).product();
    let queries = all.map(|o| o.queries).sum();
    Ok(JuntaVerdict {
        decision: if accept { JuntaDecision::Junta } else { JuntaDecision::Far },
        acceptance_probability,
        first_kind,
        second_kind,
        queries,
    })
}

/// Which non-junta cases hold for `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Levels `ℓ` with at least `k + 2^ℓ` variables of influence `≥ ε/(2^{ℓ+3} log₂ 400k)`.
    pub first_kind_levels: Vec<u32>,
    /// `Σ_{j=k+1}^{200k} Inf_(j) ≤ ε/2` over influences sorted non-increasingly.
    pub second_kind: bool,
    pub tail_weight: f64,
    /// `Some(true)` when the distance to the nearest `k`-junta was checked exactly.
    pub certified: Option<bool>,
}

impl Classification {
    pub fn is_covered(&self) -> bool {
        self.second_kind || !self.first_kind_levels.is_empty()
    }
}

/// Evaluates the non-junta cases. Fails if `f` is certified to be closer than `ε`
/// to a `k`-junta; `certified` is `None` when the distance was too costly to compute.
pub fn classify_nonjunta(f: &BooleanFunction, k: usize, eps: f64) -> Result<Classification> {
    validate(k, eps)?;
    let certified = match f.distance_to_k_junta(k) {
        Ok(dist) => {
            let dist: f64 = num_traits::ToPrimitive::to_f64(&dist).unwrap_or(0.0);
            if dist < eps {
                return Err(Error::Precondition(format!("f is within {dist} of a {k}-junta")));
            }
            Some(true)
        }
        Err(Error::TooLarge(_)) => None,
        Err(e) => return Err(e),
    };
    let mut inf = f.fourier::<f64>().variable_influences();
    let first_kind_levels = (0..=max_level(k))
        .filter(|&l| {
            let delta = first_kind_delta(k, eps, l);
            inf.iter().filter(|&&x| x >= delta).count() >= k + (1usize << l)
        })
        .collect();
    inf.sort_by(|a, b| b.total_cmp(a));
    let tail_weight: f64 = inf.iter().skip(k).take((200 * k).saturating_sub(k)).sum();
    Ok(Classification { first_kind_levels, second_kind: tail_weight <= eps / 2.0, tail_weight, certified })
}
