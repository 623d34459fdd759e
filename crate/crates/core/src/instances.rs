//! Oracles and function families: intersection oracles, relaxed gap oracles,
//! quantum block oracles, juntas and addressing functions.

use std::cell::Cell;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::boolfn::BooleanFunction;
use crate::error::{invalid, Result};
use crate::qcore::{haar_reflection, haar_unitary};
use crate::scalar::{cr, Complex, Real};
use crate::subset;

/// Largest universe for which block oracles are materialized.
pub const MAX_BLOCK_N: usize = 16;

/// Query access to a set function `2^[n] → {0,1}` with a query counter.
pub trait SetOracle {
    fn n(&self) -> usize;
    fn query(&self, s: u64) -> bool;
    fn queries(&self) -> u64;
    fn reset_queries(&self);
}

/// `Intersects_A(S) = [S ∩ A ≠ ∅]`.
#[derive(Clone, Debug)]
pub struct IntersectionOracle {
    n: usize,
    a: u64,
    counter: Cell<u64>,
}

impl IntersectionOracle {
    pub fn new(n: usize, a: u64) -> Result<Self> {
        if n > 64 || a & !subset::full(n) != 0 {
            return invalid("hidden set must be a subset of [n]");
        }
        Ok(Self { n, a, counter: Cell::new(0) })
    }

    pub fn hidden(&self) -> u64 {
        self.a
    }
}

impl SetOracle for IntersectionOracle {
    fn n(&self) -> usize {
        self.n
    }
    fn query(&self, s: u64) -> bool {
        self.counter.set(self.counter.get() + 1);
        s & self.a != 0
    }
    fn queries(&self) -> u64 {
        self.counter.get()
    }
    fn reset_queries(&self) {
        self.counter.set(0)
    }
}

/// Which promise the hidden set satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `|A| = k`; `S ∩ A = ∅` forces answer 0.
    Small,
    /// `|A| = k + d`; `S ∩ A ≠ ∅` forces answer 1.
    Large,
}

/// Answers on the unconstrained queries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverridePolicy {
    Zeros,
    Ones,
    /// A fixed pseudo-random bit per query set, derived from the seed.
    SeededRandom,
    /// `Intersects_A`.
    Exact,
}

/// Deterministic pseudo-random generator for the pair `(seed, s)`.
pub fn stream_rng(seed: u64, s: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s);
    rng
}

/// Relaxed intersection oracle of the gap problem.
#[derive(Clone, Debug)]
pub struct RelaxedOracle {
    n: usize,
    k: usize,
    d: usize,
    side: Side,
    a: u64,
    policy: OverridePolicy,
    seed: u64,
    counter: Cell<u64>,
}

impl RelaxedOracle {
    pub fn new(n: usize, k: usize, d: usize, side: Side, a: u64, policy: OverridePolicy, seed: u64) -> Result<Self> {
        if n == 0 || n > 64 {
            return invalid("n must be in 1..=64");
        }
        if a & !subset::full(n) != 0 {
            return invalid("hidden set must be a subset of [n]");
        }
        let want = match side {
            Side::Small => k,
            Side::Large => k + d,
        };
        if subset::size(a) != want {
            return invalid(format!("hidden set has size {}, the {side:?} side needs {want}", subset::size(a)));
        }
        Ok(Self { n, k, d, side, a, policy, seed, counter: Cell::new(0) })
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn side(&self) -> Side {
        self.side
    }
    pub fn hidden(&self) -> u64 {
        self.a
    }
    pub fn policy(&self) -> OverridePolicy {
        self.policy
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The forced answer on `s`, if the promise constrains it.
    pub fn forced(&self, s: u64) -> Option<bool> {
        match self.side {
            Side::Small if s & self.a == 0 => Some(false),
            Side::Large if s & self.a != 0 => Some(true),
            _ => None,
        }
    }

    /// Answer without touching the counter.
    pub fn value(&self, s: u64) -> bool {
        self.forced(s).unwrap_or_else(|| match self.policy {
            OverridePolicy::Zeros => false,
            OverridePolicy::Ones => true,
            OverridePolicy::Exact => s & self.a != 0,
            OverridePolicy::SeededRandom => stream_rng(self.seed, s).random::<bool>(),
        })
    }

    pub fn descriptor(&self) -> InstanceDescriptor {
        InstanceDescriptor::Relaxed {
            n: self.n,
            k: self.k,
            d: self.d,
            side: self.side,
            hidden: subset::elements(self.a),
            policy: self.policy,
            seed: self.seed,
        }
    }
}

impl SetOracle for RelaxedOracle {
    fn n(&self) -> usize {
        self.n
    }
    fn query(&self, s: u64) -> bool {
        self.counter.set(self.counter.get() + 1);
        self.value(s)
    }
    fn queries(&self) -> u64 {
        self.counter.get()
    }
    fn reset_queries(&self) {
        self.counter.set(0)
    }
}

/// How blocks on unconstrained query sets are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IrrelevantMode {
    /// `(-1)^{f(S)} I` on a one-dimensional workspace.
    PhaseFaithful,
    /// Haar-random reflection `I - 2vv*` on a two-dimensional workspace.
    RandomReflection,
    /// Haar-random unitary on the declared workspace.
    RandomUnitary,
}

impl IrrelevantMode {
    pub const ALL: [IrrelevantMode; 3] = [Self::PhaseFaithful, Self::RandomReflection, Self::RandomUnitary];
}

/// Block-diagonal oracle `O_f = ⊕_S O_{f,S}` on registers `I ⊗ W`.
#[derive(Clone, Debug)]
pub struct BlockOracle<T: Real> {
    n: usize,
    wdim: usize,
    blocks: Vec<DMatrix<Complex<T>>>,
    side: Side,
    a: u64,
    /// Per query set: whether the promise fixes the block's action on `|0⟩`.
    forced: Vec<bool>,
    reflection: bool,
}

impl<T: Real> BlockOracle<T> {
    /// Builds an oracle from explicit blocks, checking the promise and unitarity.
    pub fn from_blocks(n: usize, side: Side, a: u64, blocks: Vec<DMatrix<Complex<T>>>, reflection: bool) -> Result<Self> {
        if n > MAX_BLOCK_N || blocks.len() != 1 << n {
            return invalid("need one block per subset of [n]");
        }
        let wdim = blocks.first().map_or(1, |b| b.nrows());
        if blocks.iter().any(|b| b.nrows() != wdim || b.ncols() != wdim) {
            return invalid("blocks must be square with a common dimension");
        }
        let forced = (0..1u64 << n)
            .map(|s| match side {
                Side::Small => s & a == 0,
                Side::Large => s & a != 0,
            })
            .collect();
        let o = Self { n, wdim, blocks, side, a, forced, reflection };
        if !o.promise_holds(T::of(1e-9)) {
            return invalid("blocks violate the promise");
        }
        Ok(o)
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn wdim(&self) -> usize {
        self.wdim
    }
    pub fn side(&self) -> Side {
        self.side
    }
    pub fn hidden(&self) -> u64 {
        self.a
    }
    pub fn is_reflection(&self) -> bool {
        self.reflection
    }
    pub fn block(&self, s: u64) -> &DMatrix<Complex<T>> {
        &self.blocks[s as usize]
    }
    pub fn is_forced(&self, s: u64) -> bool {
        self.forced[s as usize]
    }

    /// `⟨0|O_{f,S}|0⟩`.
    pub fn amplitude(&self, s: u64) -> Complex<T> {
        self.blocks[s as usize][(0, 0)]
    }

    /// Checks `O_{f,S}|0⟩ = ±|0⟩` on every constrained `S` and unitarity of every block.
    pub fn promise_holds(&self, tol: T) -> bool {
        let sign = match self.side {
            Side::Small => T::one(),
            Side::Large => -T::one(),
        };
        self.blocks.iter().enumerate().all(|(s, b)| {
            let unit = crate::qcore::unitarity_residual(b) < tol;
            let fixed = !self.forced[s] || (0..self.wdim).all(|i| crate::scalar::norm_sqr(&(b[(i, 0)] - cr(if i == 0 { sign } else { T::zero() }))).sqrt() < tol);
            unit && fixed
        })
    }

    /// Same promise data with every block transformed.
    pub fn map_blocks(&self, wdim: usize, f: impl Fn(&DMatrix<Complex<T>>) -> DMatrix<Complex<T>>, reflection: bool) -> Self {
        Self {
            n: self.n,
            wdim,
            blocks: self.blocks.iter().map(f).collect(),
            side: self.side,
            a: self.a,
            forced: self.forced.clone(),
            reflection,
        }
    }

    /// The full operator on `I ⊗ W`, with `-I` on the `|∅⟩` branch.
    pub fn to_unitary(&self) -> crate::qcore::UnitaryOp<T> {
        let mut blocks = self.blocks.clone();
        blocks[0] = -DMatrix::identity(self.wdim, self.wdim);
        crate::qcore::UnitaryOp::Blocks { target: self.wdim, blocks }
    }
}

/// Quantizes a relaxed oracle: constrained blocks are `±I`, the rest follow `mode`.
///
/// `wdim` is the workspace dimension for [`IrrelevantMode::RandomUnitary`]
/// (the other modes fix it to 1 and 2).
pub fn make_block_oracle<T: Real>(relaxed: &RelaxedOracle, mode: IrrelevantMode, seed: u64, wdim: usize) -> Result<BlockOracle<T>> {
    let n = relaxed.n();
    if n > MAX_BLOCK_N {
        return invalid(format!("block oracles limited to n <= {MAX_BLOCK_N}"));
    }
    let w = match mode {
        IrrelevantMode::PhaseFaithful => 1,
        IrrelevantMode::RandomReflection => 2,
        IrrelevantMode::RandomUnitary => wdim.max(1),
    };
    let sign_id = |neg: bool| {
        let m = DMatrix::<Complex<T>>::identity(w, w);
        if neg { -m } else { m }
    };
    let blocks = (0..1u64 << n)
        .map(|s| match (relaxed.forced(s), mode) {
            (Some(v), _) => sign_id(v),
            (None, IrrelevantMode::PhaseFaithful) => sign_id(relaxed.value(s)),
            (None, IrrelevantMode::RandomReflection) => haar_reflection(w, &mut stream_rng(seed, s)),
            (None, IrrelevantMode::RandomUnitary) => haar_unitary(w, &mut stream_rng(seed, s)),
        })
        .collect();
    let reflection = mode != IrrelevantMode::RandomUnitary;
    BlockOracle::from_blocks(n, relaxed.side(), relaxed.hidden(), blocks, reflection)
}

/// `f(y z) = (-1)^{y_{g(z)}}`: `y` occupies the low `n_addr` bits, the address
/// `z` the high `log₂ m` bits. `g[i]` is the (1-based) image of address `i`.
pub fn addressing_function(g: &[usize], n_addr: usize) -> Result<BooleanFunction> {
    let m = g.len();
    if m == 0 || !m.is_power_of_two() {
        return invalid("the address domain size must be a power of two");
    }
    if g.iter().any(|&v| v == 0 || v > n_addr) {
        return invalid("addresses must map into [n_addr]");
    }
    let bits = m.trailing_zeros() as usize;
    BooleanFunction::from_predicate(n_addr + bits, |x| {
        let z = (x >> n_addr) as usize;
        x >> (g[z] - 1) & 1 == 1
    })
}

/// `f(x) = core(x restricted to positions)`.
pub fn random_k_junta(n: usize, core: &BooleanFunction, positions: u64) -> Result<BooleanFunction> {
    if positions & !subset::full(n) != 0 || subset::size(positions) != core.n() {
        return invalid("positions must be a subset of [n] of size equal to the core arity");
    }
    BooleanFunction::from_predicate(n, |x| core.bit(subset::extract(x, positions)) == 1)
}

/// Uniformly random function on `k` bits.
pub fn random_function<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<BooleanFunction> {
    BooleanFunction::from_bits(k, (0..1usize << k).map(|_| rng.random_range(0..2u8)).collect())
}

/// Serializable record of how an instance was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceDescriptor {
    Relaxed { n: usize, k: usize, d: usize, side: Side, hidden: Vec<usize>, policy: OverridePolicy, seed: u64 },
    Block { n: usize, k: usize, d: usize, side: Side, hidden: Vec<usize>, mode: IrrelevantMode, wdim: usize, seed: u64 },
    Junta { n: usize, positions: Vec<usize>, core_table: String },
    Addressing { n_addr: usize, g: Vec<usize> },
    TruthTable { table: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{apply_block_oracle, reflectionize, RegisterLayout, StateVector};
    use num_traits::Zero;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    #[test]
    fn relaxed_examples() {
        let o = RelaxedOracle::new(3, 1, 1, Side::Small, 0b001, OverridePolicy::Ones, 0).unwrap();
        assert!(!o.query(0b010));
        assert!(o.query(0b001));
        assert_eq!(o.queries(), 2);
        let o = RelaxedOracle::new(4, 2, 2, Side::Large, 0b1111, OverridePolicy::Zeros, 0).unwrap();
        assert!((1..16).all(|s| o.value(s)));
        assert!(RelaxedOracle::new(4, 2, 2, Side::Large, 0b0111, OverridePolicy::Zeros, 0).is_err());
    }

    #[test]
    fn exact_override_is_intersection() {
        for n in 1..=10 {
            for a in [0u64, 1, subset::full(n), subset::full(n) & 0b1010101010] {
                let k = subset::size(a);
                let ix = IntersectionOracle::new(n, a).unwrap();
                for side in [Side::Small, Side::Large] {
                    let (kk, dd) = if side == Side::Small { (k, 1) } else if k > 0 { (k - 1, 1) } else { continue };
                    let o = RelaxedOracle::new(n, kk, dd, side, a, OverridePolicy::Exact, 9).unwrap();
                    assert!((0..1u64 << n).all(|s| o.query(s) == ix.query(s)));
                }
            }
        }
    }

    #[test]
    fn seeded_random_override_is_a_fixed_function() {
        let o = RelaxedOracle::new(8, 2, 2, Side::Small, 0b11, OverridePolicy::SeededRandom, 42).unwrap();
        let first: Vec<bool> = (0..256).map(|s| o.value(s)).collect();
        let again: Vec<bool> = (0..256).map(|s| o.value(s)).collect();
        assert_eq!(first, again);
        assert!(first.iter().any(|&b| b) && first.iter().any(|&b| !b));
    }

    #[test]
    fn block_oracles_conform_in_every_mode() {
        for n in 1..=8usize {
            let k = n.div_ceil(2).min(3);
            let d = 1;
            for side in [Side::Small, Side::Large] {
                let size = if side == Side::Small { k } else { k + d };
                if size > n {
                    continue;
                }
                let a = subset::full(size) << (n - size);
                let rel = RelaxedOracle::new(n, k, d, side, a, OverridePolicy::SeededRandom, 5).unwrap();
                for mode in IrrelevantMode::ALL {
                    let o = make_block_oracle::<f64>(&rel, mode, 11, 3).unwrap();
                    assert!(o.promise_holds(1e-10));
                    let r = reflectionize(&o);
                    assert!(r.promise_holds(1e-10));
                    for s in 0..1u64 << n {
                        let b = r.block(s);
                        let sq = b * b - DMatrix::identity(b.nrows(), b.nrows());
                        assert!(sq.norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn block_oracle_application() {
        let rel = RelaxedOracle::new(3, 1, 1, Side::Small, 0b001, OverridePolicy::SeededRandom, 3).unwrap();
        let o = make_block_oracle::<f64>(&rel, IrrelevantMode::PhaseFaithful, 0, 1).unwrap();
        let layout = RegisterLayout::new(&[("I", 8), ("W", 1)]).unwrap();
        let amp = cr(1.0 / 8f64.sqrt());
        let psi = StateVector::from_amplitudes(layout.clone(), vec![amp; 8]).unwrap();
        let out = apply_block_oracle(&psi, &o).unwrap();
        for s in 0..8u64 {
            let want = if s == 0 { -amp } else if rel.value(s) { -amp } else { amp };
            assert!((out.amplitudes()[s as usize] - want).norm() < 1e-15);
        }
        let u = make_block_oracle::<f64>(&rel, IrrelevantMode::RandomUnitary, 4, 3).unwrap();
        let layout = RegisterLayout::new(&[("I", 8), ("W", 3)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let st = StateVector::from_amplitudes(layout.clone(), crate::qcore::haar_state(24, &mut rng)).unwrap();
        let out = apply_block_oracle(&st, &u).unwrap();
        assert!((out.norm() - 1.0).abs() < 1e-10);
        let r = reflectionize(&u);
        let layout = RegisterLayout::new(&[("I", 8), ("W", 4)]).unwrap();
        let st = StateVector::from_amplitudes(layout, crate::qcore::haar_state(32, &mut rng)).unwrap();
        let twice = apply_block_oracle(&apply_block_oracle(&st, &r).unwrap(), &r).unwrap();
        let diff: f64 = twice.amplitudes().iter().zip(st.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-10);
        let full = u.to_unitary().apply(st.amplitudes().get(..24).unwrap()).unwrap();
        assert!(full.iter().any(|z| !z.is_zero()));
    }

    #[test]
    fn addressing_examples() {
        let f = addressing_function(&[1, 1], 2).unwrap();
        assert_eq!(f.relevant_variables(), 0b001);
        let f = addressing_function(&[1, 2], 2).unwrap();
        // Brute-force flip test over the 8 inputs.
        let rel = (0..3).filter(|&j| (0..8u64).any(|x| f.bit(x) != f.bit(x ^ 1 << j))).count();
        assert_eq!(rel, 3);
        assert!(addressing_function(&[1, 2, 1], 2).is_err());
    }

    #[test]
    fn addressing_junta_bound_exhaustive() {
        // g: [4] → [3]; image size ℓ ⇒ (ℓ + 2)-junta.
        for code in 0..81usize {
            let g: Vec<usize> = (0..4).map(|i| code / 3usize.pow(i as u32) % 3 + 1).collect();
            let mut img = g.clone();
            img.sort();
            img.dedup();
            let f = addressing_function(&g, 3).unwrap();
            assert_eq!(f.n(), 5);
            assert_eq!(f.distance_to_k_junta(img.len() + 2).unwrap(), num_rational::BigRational::zero());
        }
    }

    #[test]
    fn junta_examples() {
        let core = BooleanFunction::parity(2, 0b11).unwrap();
        let f = random_k_junta(4, &core, 0b0101).unwrap();
        let inf = f.fourier::<f64>().variable_influences();
        assert_eq!(inf, vec![1.0, 0.0, 1.0, 0.0]);
        let c = BooleanFunction::constant(2, 1).unwrap();
        assert_eq!(random_k_junta(4, &c, 0b11).unwrap().relevant_variables(), 0);
        assert!(random_k_junta(4, &core, 0b111).is_err());
    }

    proptest! {
        #[test]
        fn juntas_have_zero_distance(seed in any::<u64>(), n in 2usize..=5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.random_range(1..=n);
            let pos = subset::of_size(n, k);
            let positions = pos[rng.random_range(0..pos.len())];
            let core = random_function(k, &mut rng).unwrap();
            let f = random_k_junta(n, &core, positions).unwrap();
            prop_assert!(f.relevant_variables() & !positions == 0);
            prop_assert_eq!(f.distance_to_k_junta(k).unwrap(), num_rational::BigRational::zero());
        }
    }
}
