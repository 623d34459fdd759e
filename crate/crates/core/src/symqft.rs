//! Fourier transform over the permutation module `M^n = span{|A⟩ : A ⊆ [n]}`.
//!
//! Basis vectors `e_ℓ(t, x)` of the Gelfand–Tsetlin basis are indexed by a
//! size `ℓ`, a partition parameter `t` (shape `(n-t, t)`) and a binary string
//! `x` of length `n` with exactly `t` ones whose every prefix of length `m`
//! has at most `⌊m/2⌋` ones. Bit `m - 1` of the integer `x` is the branching
//! choice taken at stage `m` (1 = the `t`-incrementing branch).

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use num_traits::Zero;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::subset;

/// Largest `n` accepted by the streaming transform.
pub const MAX_QFT_N: usize = 22;
/// Largest `n` for the explicit matrix.
pub const MAX_MATRIX_N: usize = 12;

/// Index `(t, ℓ, x)` of a Gelfand–Tsetlin basis vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GtIndex {
    pub t: usize,
    pub l: usize,
    pub x: u64,
}

/// Whether `x` is a valid branching string of length `n` with `t` ones.
pub fn is_valid_string(n: usize, t: usize, x: u64) -> bool {
    if x >> n != 0 || x.count_ones() as usize != t {
        return false;
    }
    prefix_ok(x, n)
}

fn prefix_ok(x: u64, len: usize) -> bool {
    let mut ones = 0;
    for m in 1..=len {
        ones += (x >> (m - 1) & 1) as usize;
        if ones > m / 2 {
            return false;
        }
    }
    true
}

/// All valid strings for `(n, t)` in increasing integer order.
pub fn valid_strings(n: usize, t: usize) -> Vec<u64> {
    subset::of_size(n, t).into_iter().filter(|&x| prefix_ok(x, n)).collect()
}

/// Every valid `(t, ℓ, x)` in lexicographic order of `t`, then `ℓ`, then `x`.
pub fn enumeration(n: usize) -> Vec<GtIndex> {
    let mut out = Vec::with_capacity(1 << n);
    for t in 0..=n / 2 {
        let xs = valid_strings(n, t);
        for l in t..=n - t {
            out.extend(xs.iter().map(|&x| GtIndex { t, l, x }));
        }
    }
    out
}

/// Expands `({a₁}-{b₁}) ⊗ ⋯ ⊗ ({a_t}-{b_t}) ⊗ Σ_{|A| = ℓ-t} A` in the subset basis.
///
/// `a` and `b` hold 1-based elements; `⊗` is disjoint union.
pub fn specht_vector<T: Real>(n: usize, l: usize, a: &[usize], b: &[usize]) -> Result<Vec<T>> {
    let t = a.len();
    if b.len() != t {
        return invalid("a and b must have the same length");
    }
    if l > n || t > l.min(n - l) {
        return invalid(format!("need t <= min(ℓ, n-ℓ), got t={t}, ℓ={l}, n={n}"));
    }
    let mut used = 0u64;
    for &e in a.iter().chain(b) {
        if e == 0 || e > n || used >> (e - 1) & 1 == 1 {
            return invalid("a and b must be disjoint sequences of distinct elements of [n]");
        }
        used |= 1 << (e - 1);
    }
    let rest = subset::full(n) & !used;
    let rest_elems = subset::elements(rest);
    let mut v = vec![T::zero(); 1 << n];
    let fills: Vec<u64> = subset::of_size(rest_elems.len(), l - t)
        .into_iter()
        .map(|m| subset::elements(m).iter().fold(0u64, |acc, &i| acc | 1 << (rest_elems[i - 1] - 1)))
        .collect();
    for choice in 0..1u64 << t {
        let mut core = 0u64;
        for i in 0..t {
            let e = if choice >> i & 1 == 0 { a[i] } else { b[i] };
            core |= 1 << (e - 1);
        }
        let sign = if choice.count_ones() % 2 == 0 { T::one() } else { -T::one() };
        for &f in &fills {
            v[(core | f) as usize] += sign;
        }
    }
    Ok(v)
}

/// Explicit Gelfand–Tsetlin basis of `M^n`, built by the branching recursion.
#[derive(Clone, Debug)]
pub struct GtBasis<T> {
    pub n: usize,
    pub vectors: BTreeMap<GtIndex, Vec<T>>,
}

/// Rotation coefficients `(√((m-ℓ-t)/(m-2t)), √((ℓ-t)/(m-2t)))` at stage `m`.
fn branch_coeffs<T: Real>(m: usize, t: usize, l: usize) -> (T, T) {
    let den = (m - 2 * t) as f64;
    let c0 = ((m as f64 - l as f64 - t as f64) / den).max(0.0).sqrt();
    let c1 = ((l as f64 - t as f64) / den).max(0.0).sqrt();
    (T::of(c0), T::of(c1))
}

/// Builds `{e^n_ℓ(t, x)}` from `e^0_0(0, "") = ∅` by the two-term recursion.
pub fn gt_basis<T: Real>(n: usize) -> Result<GtBasis<T>> {
    if n > MAX_MATRIX_N {
        return Err(Error::TooLarge(format!("explicit basis limited to n <= {MAX_MATRIX_N}")));
    }
    let mut cur: BTreeMap<GtIndex, Vec<T>> = BTreeMap::new();
    cur.insert(GtIndex { t: 0, l: 0, x: 0 }, vec![T::one()]);
    for m in 1..=n {
        let half = 1usize << (m - 1);
        let lift = |v: &Vec<T>, with_m: bool| -> Vec<T> {
            let mut out = vec![T::zero(); 2 * half];
            let off = if with_m { half } else { 0 };
            out[off..off + half].copy_from_slice(v);
            out
        };
        let mut next = BTreeMap::new();
        for t in 0..=(m - 1) / 2 {
            for x in valid_strings(m - 1, t) {
                // Branch x_m = 0 keeps t; branch x_m = 1 raises it.
                for l in t..=m - t {
                    let (c0, c1) = branch_coeffs::<T>(m, t, l);
                    let keep = cur.get(&GtIndex { t, l, x });
                    let add = if l >= 1 { cur.get(&GtIndex { t, l: l - 1, x }) } else { None };
                    let mut v0 = vec![T::zero(); 2 * half];
                    let mut v1 = vec![T::zero(); 2 * half];
                    if let Some(k) = keep {
                        let k = lift(k, false);
                        axpy(&mut v0, c0, &k);
                        axpy(&mut v1, c1, &k);
                    }
                    if let Some(a) = add {
                        let a = lift(a, true);
                        axpy(&mut v0, c1, &a);
                        axpy(&mut v1, -c0, &a);
                    }
                    next.insert(GtIndex { t, l, x }, v0);
                    if t + 1 <= l && l + t < m && 2 * (t + 1) <= m {
                        next.insert(GtIndex { t: t + 1, l, x: x | 1 << (m - 1) }, v1);
                    }
                }
            }
        }
        cur = next;
    }
    Ok(GtBasis { n, vectors: cur })
}

fn axpy<T: Real>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Values the transform can act on: real or complex amplitudes over `T`.
pub trait Amplitude<T>: Copy + Zero + Add<Output = Self> + Sub<Output = Self> + Mul<T, Output = Self> + Send + Sync {}
impl<T, V> Amplitude<T> for V where V: Copy + Zero + Add<Output = V> + Sub<Output = V> + Mul<T, Output = V> + Send + Sync {}

/// Amplitudes in the transform's working layout: slot `x·(n+1) + ℓ` holds the
/// coefficient of `e_ℓ(|x|, x)`.
#[derive(Clone, Debug)]
pub struct Fibers<V> {
    n: usize,
    data: Vec<V>,
}

impl<V: Copy> Fibers<V> {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficients over `ℓ = 0..=n` for the string `x` (only `t..=n-t` are meaningful).
    pub fn fiber(&self, x: u64) -> &[V] {
        let s = self.n + 1;
        &self.data[x as usize * s..(x as usize + 1) * s]
    }

    pub fn fiber_mut(&mut self, x: u64) -> &mut [V] {
        let s = self.n + 1;
        &mut self.data[x as usize * s..(x as usize + 1) * s]
    }
}

/// Streaming transform `F: |t⟩|ℓ⟩|x⟩ ↦ |e_ℓ(t, x)⟩`.
///
/// The state is kept as a dense array over (register word, running total
/// `ℓ + |consumed A bits|`); the total is conserved by every stage, so each
/// stage is an in-place sweep of 2×2 butterflies.
#[derive(Clone, Debug)]
pub struct SymQft<T> {
    n: usize,
    /// `prefixes[len]` lists `(p, popcount p)` for valid prefixes of length `len`.
    prefixes: Vec<Vec<(usize, usize)>>,
    /// `coef[(m·(n+1) + t)·(n+1) + ℓ]`.
    coef: Vec<(T, T)>,
    order: Vec<GtIndex>,
    /// Valid strings of length `n` with their `t`.
    strings: Vec<(u64, usize)>,
}

impl<T: Real> SymQft<T> {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_QFT_N {
            return invalid(format!("n must be in 1..={MAX_QFT_N}"));
        }
        let mut prefixes = Vec::with_capacity(n + 1);
        for len in 0..=n {
            let v: Vec<(usize, usize)> = (0..1usize << len)
                .filter(|&p| prefix_ok(p as u64, len))
                .map(|p| (p, p.count_ones() as usize))
                .collect();
            prefixes.push(v);
        }
        let s = n + 1;
        let mut coef = vec![(T::zero(), T::zero()); s * s * s];
        for m in 1..=n {
            for t in 0..=(m - 1) / 2 {
                for l in t..=m - t {
                    coef[(m * s + t) * s + l] = branch_coeffs::<T>(m, t, l);
                }
            }
        }
        let strings = prefixes[n].iter().map(|&(p, t)| (p as u64, t)).collect();
        let order = if n <= MAX_MATRIX_N + 4 { enumeration(n) } else { Vec::new() };
        Ok(Self { n, prefixes, coef, order, strings })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// The `(t, ℓ, x)` enumeration used by [`Self::forward`] and [`Self::inverse`].
    pub fn order(&self) -> &[GtIndex] {
        &self.order
    }

    /// Valid strings of length `n` with their `t`.
    pub fn strings(&self) -> &[(u64, usize)] {
        &self.strings
    }

    fn stage<V: Amplitude<T>>(&self, data: &mut [V], m: usize) {
        let n = self.n;
        let s = n + 1;
        let bit = 1usize << (m - 1);
        for suffix in 0..1usize << (n - m) {
            let sp = suffix.count_ones() as usize;
            let high = suffix << m;
            for &(p, t) in &self.prefixes[m - 1] {
                let lo = (p | high) * s;
                let hi = (p | bit | high) * s;
                let row = (m * s + t) * s;
                for l in t..=m - t {
                    let (c0, c1) = self.coef[row + l];
                    let i0 = lo + l + sp;
                    let i1 = hi + l + sp;
                    let a = data[i0];
                    let b = data[i1];
                    data[i0] = a * c0 + b * c1;
                    data[i1] = a * c1 - b * c0;
                }
            }
        }
    }

    /// Runs the stages `n, n-1, …, 1` on a working array and returns subset amplitudes.
    pub fn forward_from_fibers<V: Amplitude<T>>(&self, mut fibers: Fibers<V>) -> Vec<V> {
        for m in (1..=self.n).rev() {
            self.stage(&mut fibers.data, m);
        }
        let s = self.n + 1;
        (0..self.dim()).map(|a| fibers.data[a * s + a.count_ones() as usize]).collect()
    }

    /// Inverse transform into the working layout.
    pub fn inverse_to_fibers<V: Amplitude<T>>(&self, subsets: &[V]) -> Result<Fibers<V>> {
        if subsets.len() != self.dim() {
            return invalid(format!("expected {} amplitudes, got {}", self.dim(), subsets.len()));
        }
        let s = self.n + 1;
        let mut data = vec![V::zero(); self.dim() * s];
        for (a, &v) in subsets.iter().enumerate() {
            data[a * s + a.count_ones() as usize] = v;
        }
        for m in 1..=self.n {
            self.stage(&mut data, m);
        }
        Ok(Fibers { n: self.n, data })
    }

    /// Empty working array.
    pub fn zero_fibers<V: Amplitude<T>>(&self) -> Fibers<V> {
        Fibers { n: self.n, data: vec![V::zero(); self.dim() * (self.n + 1)] }
    }

    /// `F` applied to a vector given in [`Self::order`].
    pub fn forward<V: Amplitude<T>>(&self, input: &[V]) -> Result<Vec<V>> {
        if input.len() != self.dim() || self.order.len() != self.dim() {
            return invalid("input length must be 2^n (and n small enough to enumerate)");
        }
        let mut f = self.zero_fibers();
        for (idx, &v) in self.order.iter().zip(input) {
            f.fiber_mut(idx.x)[idx.l] = v;
        }
        Ok(self.forward_from_fibers(f))
    }

    /// `F` applied to a sparse list of basis coefficients; rejects invalid indices.
    pub fn forward_sparse<V: Amplitude<T>>(&self, entries: &[(GtIndex, V)]) -> Result<Vec<V>> {
        let mut f = self.zero_fibers();
        for &(idx, v) in entries {
            if !is_valid_string(self.n, idx.t, idx.x) || idx.l < idx.t || idx.l + idx.t > self.n {
                return invalid(format!("invalid basis index {idx:?}"));
            }
            let slot = &mut f.fiber_mut(idx.x)[idx.l];
            *slot = *slot + v;
        }
        Ok(self.forward_from_fibers(f))
    }

    /// `F⁻¹` applied to subset amplitudes, returned in [`Self::order`].
    pub fn inverse<V: Amplitude<T>>(&self, subsets: &[V]) -> Result<Vec<V>> {
        if self.order.len() != self.dim() {
            return invalid("n too large to enumerate");
        }
        let f = self.inverse_to_fibers(subsets)?;
        Ok(self.order.iter().map(|idx| f.fiber(idx.x)[idx.l]).collect())
    }
}

/// Dense `2^n × 2^n` matrix of `F` (row = subset mask, column = position in the
/// enumeration), stored column-major.
pub fn qft_matrix<T: Real>(n: usize) -> Result<nalgebra::DMatrix<T>> {
    if n > MAX_MATRIX_N {
        return Err(Error::TooLarge(format!("qft_matrix limited to n <= {MAX_MATRIX_N}")));
    }
    let plan = SymQft::<T>::new(n)?;
    let dim = plan.dim();
    let mut m = nalgebra::DMatrix::<T>::zeros(dim, dim);
    for (col, idx) in plan.order().iter().enumerate() {
        let v = plan.forward_sparse(&[(*idx, T::one())])?;
        for (row, &x) in v.iter().enumerate() {
            m[(row, col)] = x;
        }
    }
    Ok(m)
}

/// Orthonormal basis (as columns) of `span{v_ℓ(t, a, b)}`, grown greedily from
/// pairings until the rank reaches `C(n,t) - C(n,t-1)`.
pub fn specht_span<T: Real>(n: usize, l: usize, t: usize) -> Result<Vec<Vec<T>>> {
    if t > l.min(n - l) {
        return invalid("t exceeds min(ℓ, n-ℓ)");
    }
    let target = (crate::scalar::binom_u128(n as u64, t as u64) - if t > 0 { crate::scalar::binom_u128(n as u64, t as u64 - 1) } else { 0 }) as usize;
    let mut basis: Vec<Vec<T>> = Vec::new();
    let tol = T::of(1e-8);
    let mut pairs = Vec::new();
    visit_pairings(n, t, &mut pairs, &mut |a: &[usize], b: &[usize]| {
        if basis.len() == target {
            return false;
        }
        let mut v = specht_vector::<T>(n, l, a, b).expect("valid pairing");
        for _ in 0..2 {
            for q in &basis {
                let d = dot(q, &v);
                axpy(&mut v, -d, q);
            }
        }
        let nrm = dot(&v, &v).sqrt();
        if nrm > tol {
            v.iter_mut().for_each(|x| *x /= nrm);
            basis.push(v);
        }
        true
    });
    Ok(basis)
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Calls `f(a, b)` for sequences with `a_i < b_i`, `a` increasing, all disjoint;
/// stops early when `f` returns false.
fn visit_pairings(n: usize, t: usize, pairs: &mut Vec<(usize, usize)>, f: &mut dyn FnMut(&[usize], &[usize]) -> bool) -> bool {
    if pairs.len() == t {
        let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        return f(&a, &b);
    }
    let start = pairs.last().map_or(1, |p| p.0 + 1);
    for a in start..=n {
        if pairs.iter().any(|p| p.0 == a || p.1 == a) {
            continue;
        }
        for b in a + 1..=n {
            if pairs.iter().any(|p| p.0 == b || p.1 == b) {
                continue;
            }
            pairs.push((a, b));
            let go = visit_pairings(n, t, pairs, f);
            pairs.pop();
            if !go {
                return false;
            }
        }
    }
    true
}

/// Largest distance from a vector to its projection on an orthonormal set.
pub fn span_residual<T: Real>(basis: &[Vec<T>], v: &[T]) -> T {
    let mut r = v.to_vec();
    for q in basis {
        let d = dot(q, &r);
        axpy(&mut r, -d, q);
    }
    dot(&r, &r).sqrt()
}

/// Largest violation of the branching identities relating the streaming
/// columns at `n` to those at `n - 1`, over every `(t, ℓ, x)`.
pub fn branching_residual(n: usize) -> Result<f64> {
    if n < 2 {
        return invalid("branching identities need n >= 2");
    }
    let big = SymQft::<f64>::new(n)?;
    let small = SymQft::<f64>::new(n - 1)?;
    let half = 1usize << (n - 1);
    let col = |q: &SymQft<f64>, t, l, x| q.forward_sparse(&[(GtIndex { t, l, x }, 1.0)]);
    let mut worst = 0.0f64;
    for t in 0..=(n - 1) / 2 {
        for x in valid_strings(n - 1, t) {
            for l in t..=n - t {
                let (c0, c1) = branch_coeffs::<f64>(n, t, l);
                let keep = if l + t < n { Some(col(&small, t, l, x)?) } else { None };
                let add = if l > t { Some(col(&small, t, l - 1, x)?) } else { None };
                let mut want0 = vec![0.0; 2 * half];
                let mut want1 = vec![0.0; 2 * half];
                if let Some(k) = &keep {
                    axpy(&mut want0[..half], c0, k);
                    axpy(&mut want1[..half], c1, k);
                }
                if let Some(a) = &add {
                    axpy(&mut want0[half..], c1, a);
                    axpy(&mut want1[half..], -c0, a);
                }
                let got0 = col(&big, t, l, x)?;
                worst = worst.max(max_diff(&got0, &want0));
                if l > t && l + t < n {
                    let got1 = col(&big, t + 1, l, x | 1 << (n - 1))?;
                    worst = worst.max(max_diff(&got1, &want1));
                }
            }
        }
    }
    Ok(worst)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Max-entry residual of `FᵀF - I`.
pub fn unitarity_residual(n: usize) -> Result<f64> {
    let f = qft_matrix::<f64>(n)?;
    let dim = f.ncols();
    Ok((f.transpose() * &f - nalgebra::DMatrix::<f64>::identity(dim, dim)).abs().max())
}

/// Largest distance from a column `e_ℓ(t, x)` of `F` to the span of the
/// Specht vectors `v_ℓ(t, a, b)`.
pub fn specht_residual(n: usize) -> Result<f64> {
    let plan = SymQft::<f64>::new(n)?;
    let mut worst = 0.0f64;
    for t in 0..=n / 2 {
        let xs = valid_strings(n, t);
        for l in t..=n - t {
            let span = specht_span::<f64>(n, l, t)?;
            for &x in &xs {
                let v = plan.forward_sparse(&[(GtIndex { t, l, x }, 1.0)])?;
                worst = worst.max(span_residual(&span, &v));
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::binom_u128;
    use nalgebra::DMatrix;

    fn norm(v: &[f64]) -> f64 {
        dot(v, v).sqrt()
    }

    #[test]
    fn branching_identities_hold() {
        for n in 2..=8 {
            assert!(branching_residual(n).unwrap() < 1e-10, "n={n}");
        }
    }

    #[test]
    fn columns_lie_in_specht_spans() {
        for n in 1..=7 {
            assert!(specht_residual(n).unwrap() < 1e-9, "n={n}");
        }
        assert!(unitarity_residual(8).unwrap() < 1e-9);
    }

    #[test]
    fn specht_vector_examples() {
        let v = specht_vector::<f64>(2, 1, &[1], &[2]).unwrap();
        assert_eq!(v, vec![0.0, 1.0, -1.0, 0.0]);
        let w = specht_vector::<f64>(3, 1, &[], &[]).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        assert!((norm(&w) - 3f64.sqrt()).abs() < 1e-15);
        assert!(specht_vector::<f64>(4, 2, &[1, 2], &[2, 3]).is_err());
        assert!(specht_vector::<f64>(4, 1, &[1, 2], &[3, 4]).is_err());
        assert_eq!(specht_span::<f64>(4, 2, 2).unwrap().len(), 2);
    }

    #[test]
    fn specht_norms() {
        for n in 2..=7 {
            for l in 0..=n {
                for t in 0..=l.min(n - l) {
                    let a: Vec<usize> = (1..=t).collect();
                    let b: Vec<usize> = (t + 1..=2 * t).collect();
                    let v = specht_vector::<f64>(n, l, &a, &b).unwrap();
                    let expect = ((1u64 << t) as f64 * binom_u128((n - 2 * t) as u64, (l - t) as u64) as f64).sqrt();
                    assert!((norm(&v) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn valid_string_counts() {
        for n in 1..=14usize {
            for t in 0..=n / 2 {
                let want = binom_u128(n as u64, t as u64) - if t > 0 { binom_u128(n as u64, t as u64 - 1) } else { 0 };
                assert_eq!(valid_strings(n, t).len() as u128, want, "n={n} t={t}");
            }
            assert_eq!(enumeration(n.min(12)).len(), 1 << n.min(12));
        }
    }

    #[test]
    fn gt_basis_examples() {
        let b = gt_basis::<f64>(2).unwrap();
        let h = 0.5f64.sqrt();
        let e = &b.vectors[&GtIndex { t: 0, l: 1, x: 0 }];
        assert!((e[1] - h).abs() < 1e-15 && (e[2] - h).abs() < 1e-15);
        let e = &b.vectors[&GtIndex { t: 1, l: 1, x: 0b10 }];
        assert!((e[1] - h).abs() < 1e-15 && (e[2] + h).abs() < 1e-15);
        for n in 1..=6 {
            let b = gt_basis::<f64>(n).unwrap();
            let e = &b.vectors[&GtIndex { t: 0, l: 0, x: 0 }];
            assert_eq!(e[0], 1.0);
            assert_eq!(b.vectors.len(), 1 << n);
        }
    }

    #[test]
    fn gt_basis_is_orthonormal() {
        for n in 1..=6 {
            let b = gt_basis::<f64>(n).unwrap();
            let vs: Vec<&Vec<f64>> = b.vectors.values().collect();
            for i in 0..vs.len() {
                for j in 0..vs.len() {
                    let d = dot(vs[i], vs[j]);
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn qft_matrix_n1_is_identity() {
        let m = qft_matrix::<f64>(1).unwrap();
        assert_eq!(m, DMatrix::identity(2, 2));
        let plan = SymQft::<f64>::new(1).unwrap();
        assert_eq!(plan.order(), &[GtIndex { t: 0, l: 0, x: 0 }, GtIndex { t: 0, l: 1, x: 0 }]);
    }

    #[test]
    fn streaming_columns_match_recursion() {
        for n in 1..=7 {
            let plan = SymQft::<f64>::new(n).unwrap();
            let basis = gt_basis::<f64>(n).unwrap();
            for (idx, e) in &basis.vectors {
                let col = plan.forward_sparse(&[(*idx, 1.0)]).unwrap();
                let diff: f64 = col.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                assert!(diff < 1e-12, "n={n} {idx:?}");
            }
        }
    }

    #[test]
    fn forward_examples() {
        for n in 1..=8 {
            let plan = SymQft::<f64>::new(n).unwrap();
            let full = plan.forward_sparse(&[(GtIndex { t: 0, l: n, x: 0 }, 1.0)]).unwrap();
            assert!((full[(1 << n) - 1] - 1.0).abs() < 1e-12);
            if n >= 2 {
                let v = plan.forward_sparse(&[(GtIndex { t: 1, l: 1, x: 1 << (n - 1) }, 1.0)]).unwrap();
                // Normalized Σ_{i<n} ({i} - {n}).
                let mut want = vec![0.0; 1 << n];
                for i in 1..n {
                    want[1 << (i - 1)] += 1.0;
                    want[1 << (n - 1)] -= 1.0;
                }
                let nw = norm(&want);
                for (a, b) in v.iter().zip(&want) {
                    assert!((a - b / nw).abs() < 1e-12);
                }
            }
        }
        let plan = SymQft::<f64>::new(3).unwrap();
        assert!(plan.forward_sparse(&[(GtIndex { t: 1, l: 1, x: 0b001 }, 1.0)]).is_err());
    }

    #[test]
    fn round_trip_on_basis_inputs() {
        for n in 1..=10 {
            let plan = SymQft::<f64>::new(n).unwrap();
            for a in 0..1usize << n {
                let mut v = vec![0.0; 1 << n];
                v[a] = 1.0;
                let back = plan.forward(&plan.inverse(&v).unwrap()).unwrap();
                for (i, &x) in back.iter().enumerate() {
                    assert!((x - v[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn f32_transform_is_unitary_to_single_precision() {
        let m = qft_matrix::<f32>(6).unwrap();
        let r = (m.transpose() * &m - DMatrix::<f32>::identity(64, 64)).abs().max();
        assert!(r < 1e-5);
    }

    #[test]
    fn synchronization_across_sizes() {
        // Coefficients of normalized v_ℓ(t,a,b) in {e_ℓ(t,x)}_x do not depend on ℓ.
        for n in 2..=6 {
            let basis = gt_basis::<f64>(n).unwrap();
            for t in 1..=n / 2 {
                let a: Vec<usize> = (0..t).map(|i| 2 * i + 1).collect();
                let b: Vec<usize> = (0..t).map(|i| n - i).collect();
                if a.iter().any(|x| b.contains(x)) {
                    continue;
                }
                let xs = valid_strings(n, t);
                let mut reference: Option<Vec<f64>> = None;
                for l in t..=n - t {
                    let v = specht_vector::<f64>(n, l, &a, &b).unwrap();
                    let nv = norm(&v);
                    let coeffs: Vec<f64> = xs.iter().map(|&x| dot(&basis.vectors[&GtIndex { t, l, x }], &v) / nv).collect();
                    match &reference {
                        None => reference = Some(coeffs),
                        Some(r) => {
                            for (p, q) in r.iter().zip(&coeffs) {
                                assert!((p - q).abs() < 1e-9, "n={n} t={t} l={l}");
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn permutations_act_only_on_fibers() {
        // F⁻¹ P_π F is block diagonal in (t, x) and acts only on ℓ... up to the
        // basis within S(t); so it preserves t and ℓ and mixes x only.
        for n in 2..=6 {
            let f = qft_matrix::<f64>(n).unwrap();
            let order = enumeration(n);
            let perms: Vec<Vec<usize>> = vec![(0..n).rev().collect(), (1..n).chain(0..1).collect()];
            for pi in perms {
                let dim = 1usize << n;
                let mut p = DMatrix::<f64>::zeros(dim, dim);
                for s in 0..dim {
                    let img = (0..n).filter(|&j| s >> j & 1 == 1).fold(0usize, |m, j| m | 1 << pi[j]);
                    p[(img, s)] = 1.0;
                }
                let g = f.transpose() * p * &f;
                for (r, ir) in order.iter().enumerate() {
                    for (c, ic) in order.iter().enumerate() {
                        if ir.t != ic.t || ir.l != ic.l {
                            assert!(g[(r, c)].abs() < 1e-9);
                        }
                    }
                }
                // Same x-block action for every ℓ.
                for t in 0..=n / 2 {
                    let xs = valid_strings(n, t);
                    let pos = |l: usize, x: u64| order.iter().position(|i| i.t == t && i.l == l && i.x == x).unwrap();
                    for l in t + 1..=n - t {
                        for &x in &xs {
                            for &y in &xs {
                                let d = g[(pos(l, x), pos(l, y))] - g[(pos(t, x), pos(t, y))];
                                assert!(d.abs() < 1e-9);
                            }
                        }
                    }
                }
            }
        }
    }
}
