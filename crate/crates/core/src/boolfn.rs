//! Exact Fourier analysis of Boolean functions `f: {0,1}^n -> {+1,-1}`.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{invalid, Error, Result};
use crate::scalar::{binom_u128, Real};
use crate::subset;

/// Largest arity stored as a dense truth table.
pub const MAX_ARITY: usize = 24;

/// Work-unit guard for [`BooleanFunction::distance_to_k_junta`].
pub const DISTANCE_WORK_LIMIT: u128 = 100_000_000;

/// Truth table of a `{+1,-1}`-valued function.
///
/// Entry `i` stores the bit `b` with `f(x_i) = (-1)^b`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanFunction {
    n: usize,
    bits: Vec<u8>,
}

impl BooleanFunction {
    /// Builds a function from its bit table (`0` for `+1`, `1` for `-1`).
    pub fn from_bits(n: usize, bits: Vec<u8>) -> Result<Self> {
        if n > MAX_ARITY {
            return Err(Error::TooLarge(format!("arity {n} exceeds {MAX_ARITY}")));
        }
        if bits.len() != 1usize << n {
            return invalid(format!("table length {} is not 2^{n}", bits.len()));
        }
        if bits.iter().any(|&b| b > 1) {
            return invalid("table entries must be 0 or 1");
        }
        Ok(Self { n, bits })
    }

    /// Builds a function from a predicate that is `true` where `f = -1`.
    pub fn from_predicate(n: usize, neg: impl Fn(u64) -> bool) -> Result<Self> {
        if n > MAX_ARITY {
            return Err(Error::TooLarge(format!("arity {n} exceeds {MAX_ARITY}")));
        }
        let bits = (0..1u64 << n).map(|x| neg(x) as u8).collect();
        Ok(Self { n, bits })
    }

    /// Constant function with the given sign.
    pub fn constant(n: usize, sign: i8) -> Result<Self> {
        Self::from_predicate(n, |_| sign < 0)
    }

    /// The character `chi_S(x) = (-1)^{|S ∩ x|}`.
    pub fn parity(n: usize, s: u64) -> Result<Self> {
        Self::from_predicate(n, |x| (x & s).count_ones() % 2 == 1)
    }

    /// AND of the variables in `s`, in the `±1` convention (`-1` iff all are 1).
    pub fn and(n: usize, s: u64) -> Result<Self> {
        Self::from_predicate(n, |x| x & s == s)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Bit `b` with `f(x) = (-1)^b`.
    pub fn bit(&self, x: u64) -> u8 {
        self.bits[x as usize]
    }

    /// `f(x)` as `±1`.
    pub fn sign(&self, x: u64) -> i8 {
        1 - 2 * self.bits[x as usize] as i8
    }

    /// Truth-table file contents: `n=<n>` then the bit string.
    pub fn to_table_string(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        s.extend(self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }));
        s.push('\n');
        s
    }

    /// Parses the truth-table file format.
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty truth table".into()))?;
        let n: usize = head
            .strip_prefix("n=")
            .ok_or_else(|| Error::Parse(format!("expected `n=<int>`, got `{head}`")))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad arity: {e}")))?;
        let body = lines.next().unwrap_or("");
        if lines.next().is_some() {
            return Err(Error::Parse("trailing content after the table".into()));
        }
        let bits = body
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::Parse(format!("unexpected character `{other}`"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bits(n, bits)
    }

    /// Fourier spectrum by the in-place fast Walsh–Hadamard transform.
    pub fn fourier<T: Real>(&self) -> FourierSpectrum<T> {
        let mut coeffs: Vec<T> = self.bits.iter().map(|&b| if b == 0 { T::one() } else { -T::one() }).collect();
        fwht(&mut coeffs);
        let scale = T::one() / T::count(1u64 << self.n);
        for c in coeffs.iter_mut() {
            *c *= scale;
        }
        FourierSpectrum { n: self.n, coeffs }
    }

    /// Influence `Inf_S(f)`.
    pub fn influence<T: Real>(&self, s: u64) -> T {
        self.fourier::<T>().influence(s)
    }

    /// Variables `j` with some `x` such that `f(x) != f(x ⊕ e_j)`, as a mask.
    pub fn relevant_variables(&self) -> u64 {
        let mut mask = 0u64;
        for j in 0..self.n {
            let bit = 1u64 << j;
            if (0..self.bits.len() as u64).any(|x| x & bit == 0 && self.bits[x as usize] != self.bits[(x | bit) as usize]) {
                mask |= bit;
            }
        }
        mask
    }

    /// Exact normalized Hamming distance to the nearest `k`-junta.
    ///
    /// For each window `W` of `k` coordinates the best junta on `W` takes the
    /// majority sign on every coset of the free coordinates (ties go to `+1`).
    pub fn distance_to_k_junta(&self, k: usize) -> Result<BigRational> {
        let n = self.n;
        if k > n {
            return invalid(format!("k = {k} exceeds n = {n}"));
        }
        let work = binom_u128(n as u64, k as u64) * (1u128 << n);
        if work > DISTANCE_WORK_LIMIT {
            return Err(Error::TooLarge(format!("C({n},{k})·2^{n} = {work} work units")));
        }
        let mut best = u64::MAX;
        let mut counts = vec![[0u64; 2]; 1 << k];
        for w in subset::of_size(n, k) {
            counts.iter_mut().for_each(|c| *c = [0, 0]);
            for (x, &b) in self.bits.iter().enumerate() {
                counts[subset::extract(x as u64, w) as usize][b as usize] += 1;
            }
            let dist: u64 = counts.iter().map(|c| c[0].min(c[1])).sum();
            best = best.min(dist);
        }
        Ok(BigRational::new(BigInt::from(best), BigInt::from(1u64 << n)))
    }
}

/// In-place unnormalized Walsh–Hadamard transform; length must be a power of two.
pub fn fwht<T: Real>(a: &mut [T]) {
    let len = a.len();
    debug_assert!(len.is_power_of_two());
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for i in block..block + h {
                let (u, v) = (a[i], a[i + h]);
                a[i] = u + v;
                a[i + h] = u - v;
            }
        }
        h *= 2;
    }
}

/// Fourier coefficients `f̂(S) = 2^{-n} Σ_x f(x) (-1)^{S·x}`, indexed by mask.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSpectrum<T> {
    n: usize,
    coeffs: Vec<T>,
}

impl<T: Real> FourierSpectrum<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, s: u64) -> T {
        self.coeffs[s as usize]
    }

    /// `Σ_S f̂(S)^2` (equals 1 for Boolean sources).
    pub fn total_weight(&self) -> T {
        self.coeffs.iter().fold(T::zero(), |acc, &c| acc + c * c)
    }

    /// Inverse transform back to function values.
    pub fn inverse(&self) -> Vec<T> {
        let mut v = self.coeffs.clone();
        fwht(&mut v);
        v
    }

    /// `Inf_S = Σ_{T ∩ S ≠ ∅} f̂(T)^2`.
    pub fn influence(&self, s: u64) -> T {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(t, _)| *t as u64 & s != 0)
            .fold(T::zero(), |acc, (_, &c)| acc + c * c)
    }

    /// Single-variable influences `Inf_j` for `j = 1..n` (index `j - 1`).
    pub fn variable_influences(&self) -> Vec<T> {
        let mut inf = vec![T::zero(); self.n];
        for (t, &c) in self.coeffs.iter().enumerate() {
            let w = c * c;
            for (j, slot) in inf.iter_mut().enumerate() {
                if t >> j & 1 == 1 {
                    *slot += w;
                }
            }
        }
        inf
    }

    /// `Inf_V` for every mask `V`, via a subset-sum transform.
    ///
    /// Sets that avoid every coordinate carrying Fourier mass get exactly zero.
    pub fn all_set_influences(&self) -> Vec<T> {
        let len = self.coeffs.len();
        let mut g: Vec<T> = self.coeffs.iter().map(|&c| c * c).collect();
        let total = g.iter().fold(T::zero(), |a, &b| a + b);
        let mut support = 0u64;
        for (t, &c) in self.coeffs.iter().enumerate() {
            if c != T::zero() {
                support |= t as u64;
            }
        }
        for j in 0..self.n {
            let bit = 1usize << j;
            for u in 0..len {
                if u & bit != 0 {
                    let lower = g[u ^ bit];
                    g[u] += lower;
                }
            }
        }
        let full = len - 1;
        (0..len)
            .map(|v| {
                if v as u64 & support == 0 {
                    T::zero()
                } else {
                    let x = total - g[full ^ v];
                    if x < T::zero() {
                        T::zero()
                    } else {
                        x
                    }
                }
            })
            .collect()
    }

    /// Variables (0-based) sorted by non-increasing influence, ties by index.
    pub fn influence_order(&self) -> Vec<usize> {
        let inf = self.variable_influences();
        let mut order: Vec<usize> = (0..self.n).collect();
        // Influences are sums of squares of dyadic-ish values; a 1e-12 grid
        // keeps numerically equal influences tied so the index decides.
        let key = |j: usize| -> i64 { -(inf[j].as_f64() * 1e12).round() as i64 };
        order.sort_by_key(|&j| (key(j), j));
        order
    }

    /// Per-variable `SubInf_j` (index `j - 1`) with the top `prefix` positions of
    /// `order` zeroed.
    ///
    /// For a variable at position `p >= prefix`, `SubInf_j` collects `f̂(T)^2`
    /// over the `T` whose members at positions `prefix..=p` are exactly `{j}`,
    /// i.e. `j` is the first post-prefix member of `T`.
    pub fn sub_influences_with_prefix(&self, prefix: usize, order: &[usize]) -> Result<Vec<T>> {
        check_order(self.n, order)?;
        let mut out = vec![T::zero(); self.n];
        for (t, &c) in self.coeffs.iter().enumerate() {
            if t == 0 || c == T::zero() {
                continue;
            }
            if let Some(&j) = order.iter().skip(prefix).find(|&&j| t >> j & 1 == 1) {
                out[j] += c * c;
            }
        }
        Ok(out)
    }

    /// `SubInf_S = Σ_{j ∈ S} SubInf_j` with prefix length `200k`.
    pub fn sub_influence(&self, s: u64, k: usize, order: &[usize]) -> Result<T> {
        if k == 0 {
            return invalid("sub_influence needs k >= 1");
        }
        self.sub_influence_with_prefix(s, 200 * k, order)
    }

    /// `SubInf_S` with an explicit prefix length.
    pub fn sub_influence_with_prefix(&self, s: u64, prefix: usize, order: &[usize]) -> Result<T> {
        let per = self.sub_influences_with_prefix(prefix, order)?;
        Ok(subset::elements(s).into_iter().fold(T::zero(), |acc, j| acc + per[j - 1]))
    }
}

fn check_order(n: usize, order: &[usize]) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return invalid("order must list every variable once");
    }
    for &j in order {
        if j >= n || seen[j] {
            return invalid("order must be a permutation of 0..n");
        }
        seen[j] = true;
    }
    Ok(())
}
