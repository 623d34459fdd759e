//! Dual-adversary solutions: the rank-one solution for exact gap group
//! testing, the AND example, generic feasibility checks and composition.

use std::collections::HashMap;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{invalid, Error, Result};
use crate::scalar::{binom, Real};
use crate::subset;

/// Factored solution `X_S = ψψ*` with `ψ[A] = α_s` on small `A` missing `S`
/// and `ψ[B] = β_s` on large `B` meeting `S` once, `s = |S|`.
#[derive(Clone, Debug)]
pub struct GgtSolution<T> {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    /// `alpha[s-1] = α_s` for `s = 1..=n-k-d+1`.
    pub alpha: Vec<T>,
    pub beta: Vec<T>,
    /// Objective value `W`.
    pub objective: T,
}

/// Builds the balanced solution for `(n, k, d)`.
pub fn build_ggt_solution<T: Real>(n: usize, k: usize, d: usize) -> Result<GgtSolution<T>> {
    if k == 0 || d == 0 || n < k + d {
        return invalid("need k, d >= 1 and n >= k + d");
    }
    let (n_, k_, d_) = (n as i64, k as i64, d as i64);
    let smax = n - k - d + 1;
    let mut alpha = Vec::with_capacity(smax);
    let mut beta = Vec::with_capacity(smax);
    let mut w = T::zero();
    for s in 1..=smax as i64 {
        let p = T::one() / (T::count((n - k) as u64) * binom::<T>(n_ - k_ - 1, s - 1));
        let a = binom::<T>(n_ - k_, s);
        let b = T::count((k + d) as u64) * binom::<T>(n_ - k_ - d_, s - 1);
        let al = (p * (b / a).sqrt()).sqrt();
        let be = (p * (a / b).sqrt()).sqrt();
        w += a * al * al;
        alpha.push(al);
        beta.push(be);
    }
    Ok(GgtSolution { n, k, d, alpha, beta, objective: w })
}

impl<T: Real> GgtSolution<T> {
    pub fn max_size(&self) -> usize {
        self.alpha.len()
    }

    /// Largest `|α_s β_s (n-k) C(n-k-1, s-1) - 1|`.
    pub fn product_residual(&self) -> T {
        let (n, k) = (self.n as i64, self.k as i64);
        (1..=self.max_size())
            .map(|s| (self.alpha[s - 1] * self.beta[s - 1] * T::count((n - k) as u64) * binom::<T>(n - k - 1, s as i64 - 1) - T::one()).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Largest `|C(n-k,s) α_s² - (k+d) C(n-k-d,s-1) β_s²|`.
    pub fn balance_residual(&self) -> T {
        let (n, k, d) = (self.n as i64, self.k as i64, self.d as i64);
        (1..=self.max_size())
            .map(|s| {
                let (al, be) = (self.alpha[s - 1], self.beta[s - 1]);
                let lhs = binom::<T>(n - k, s as i64) * al * al;
                let rhs = T::count((k + d) as u64) * binom::<T>(n - k - d, s as i64 - 1) * be * be;
                (lhs - rhs).abs()
            })
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// `Σ_s (k+d) C(n-k-d, s-1) β_s²`, the diagonal on the large side.
    pub fn large_side_objective(&self) -> T {
        let (n, k, d) = (self.n as i64, self.k as i64, self.d as i64);
        (1..=self.max_size()).fold(T::zero(), |acc, s| {
            let be = self.beta[s - 1];
            acc + T::count((k + d) as u64) * binom::<T>(n - k - d, s as i64 - 1) * be * be
        })
    }

    /// `max_ℓ |Σ_s α_s β_s ℓ C(n-k-ℓ, s-1) - 1|` over `ℓ = |B \ A|`.
    pub fn feasibility_residual(&self) -> T {
        let (n, k, d) = (self.n, self.k, self.d);
        let mut worst = T::zero();
        for l in d..=(k + d).min(n - k) {
            let mut sum = T::zero();
            for s in 1..=self.max_size() {
                sum += self.alpha[s - 1] * self.beta[s - 1] * T::count(l as u64) * binom::<T>((n - k - l) as i64, s as i64 - 1);
            }
            worst = worst.max((sum - T::one()).abs());
        }
        worst
    }

    /// `ψ_S[A]` for an input `A` (as a mask).
    pub fn psi(&self, s: u64, a: u64) -> T {
        let size = subset::size(s);
        if size == 0 || size > self.max_size() {
            return T::zero();
        }
        let na = subset::size(a);
        if na == self.k && s & a == 0 {
            self.alpha[size - 1]
        } else if na == self.k + self.d && subset::size(s & a) == 1 {
            self.beta[size - 1]
        } else {
            T::zero()
        }
    }

    /// The same residual by summing `X_S[A, B]` over all `S`, `A`, `B`.
    pub fn feasibility_residual_literal(&self) -> Result<T> {
        if self.n > 10 {
            return Err(Error::TooLarge("literal feasibility sweep limited to n <= 10".into()));
        }
        let xs = subset::of_size(self.n, self.k);
        let ys = subset::of_size(self.n, self.k + self.d);
        let mut worst = T::zero();
        for &a in &xs {
            for &b in &ys {
                let mut sum = T::zero();
                for s in 0..1u64 << self.n {
                    if (s & a == 0) != (s & b == 0) {
                        sum += self.psi(s, a) * self.psi(s, b);
                    }
                }
                worst = worst.max((sum - T::one()).abs());
            }
        }
        Ok(worst)
    }

    /// Materializes the solution with one variable per `S ⊆ [n]` and one input
    /// per `A` with `|A| ∈ {k, k+d}`; the variable `S` reads `[S ∩ A ≠ ∅]`.
    pub fn to_generic(&self) -> Result<GenericSolution<T>> {
        if self.n > 8 {
            return Err(Error::TooLarge("explicit solution limited to n <= 8".into()));
        }
        let mut sets = subset::of_size(self.n, self.k);
        let small = sets.len();
        sets.extend(subset::of_size(self.n, self.k + self.d));
        let inputs: Vec<Vec<u8>> = sets.iter().map(|&a| (0..1u64 << self.n).map(|s| (s & a != 0) as u8).collect()).collect();
        let outputs = (0..sets.len()).map(|i| (i >= small) as u8).collect();
        let matrices = (0..1u64 << self.n)
            .map(|s| {
                let v: Vec<T> = sets.iter().map(|&a| self.psi(s, a)).collect();
                DMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j])
            })
            .collect();
        GenericSolution::new(inputs, outputs, matrices)
    }
}

/// `T(a, b) = Σ_{i=0}^{a} a(a-1)⋯(a-i+1) / (b(b-1)⋯(b-i+1))`, exactly.
pub fn t_sum(a: u64, b: u64) -> Result<BigRational> {
    if a > b {
        return invalid("need a <= b");
    }
    let mut term = BigRational::one();
    let mut total = BigRational::one();
    for i in 0..a {
        term = term * BigRational::new(BigInt::from(a - i), BigInt::from(b - i));
        total += &term;
    }
    Ok(total)
}

/// `(b + 1) / (b - a + 1)`.
pub fn t_closed(a: u64, b: u64) -> Result<BigRational> {
    if a > b {
        return invalid("need a <= b");
    }
    Ok(BigRational::new(BigInt::from(b + 1), BigInt::from(b - a + 1)))
}

/// Explicit solution `{X_j}` over a finite domain of bit strings.
#[derive(Clone, Debug)]
pub struct GenericSolution<T> {
    pub inputs: Vec<Vec<u8>>,
    pub outputs: Vec<u8>,
    /// One `|D| × |D|` matrix per variable.
    pub matrices: Vec<DMatrix<T>>,
}

impl<T: Real> GenericSolution<T> {
    pub fn new(inputs: Vec<Vec<u8>>, outputs: Vec<u8>, matrices: Vec<DMatrix<T>>) -> Result<Self> {
        let m = inputs.len();
        if outputs.len() != m {
            return invalid("one output per input required");
        }
        let vars = inputs.first().map_or(0, |x| x.len());
        if inputs.iter().any(|x| x.len() != vars) || matrices.len() != vars {
            return invalid("one matrix per variable and equal-length inputs required");
        }
        if matrices.iter().any(|x| x.nrows() != m || x.ncols() != m) {
            return invalid("matrices must be indexed by the domain");
        }
        Ok(Self { inputs, outputs, matrices })
    }

    pub fn num_vars(&self) -> usize {
        self.matrices.len()
    }

    pub fn domain_size(&self) -> usize {
        self.inputs.len()
    }

    /// `Σ_j X_j[x, x]` per input.
    pub fn diagonal_sums(&self) -> Vec<T> {
        (0..self.domain_size()).map(|x| self.matrices.iter().fold(T::zero(), |acc, m| acc + m[(x, x)])).collect()
    }

    pub fn objective(&self) -> T {
        self.diagonal_sums().into_iter().fold(T::zero(), |a, b| a.max(b))
    }

    /// `max |Σ_{j: x_j ≠ y_j} X_j[x, y] - 1|` over pairs with different outputs.
    pub fn feasibility_residual(&self) -> T {
        let mut worst = T::zero();
        for x in 0..self.domain_size() {
            for y in 0..self.domain_size() {
                if self.outputs[x] == self.outputs[y] {
                    continue;
                }
                let sum = (0..self.num_vars())
                    .filter(|&j| self.inputs[x][j] != self.inputs[y][j])
                    .fold(T::zero(), |acc, j| acc + self.matrices[j][(x, y)]);
                worst = worst.max((sum - T::one()).abs());
            }
        }
        worst
    }

    /// Residual of the strengthened condition: `X_j[x, y] = 0` when `x_j = y_j`
    /// and `Σ_j X_j[x, y] = 1`, over pairs with different outputs.
    pub fn strong_condition_residual(&self) -> T {
        let mut worst = T::zero();
        for x in 0..self.domain_size() {
            for y in 0..self.domain_size() {
                if self.outputs[x] == self.outputs[y] {
                    continue;
                }
                let mut sum = T::zero();
                for j in 0..self.num_vars() {
                    let v = self.matrices[j][(x, y)];
                    sum += v;
                    if self.inputs[x][j] == self.inputs[y][j] {
                        worst = worst.max(v.abs());
                    }
                }
                worst = worst.max((sum - T::one()).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue over all `X_j`; NaN if a decomposition breaks down.
    pub fn min_eigenvalue(&self) -> T {
        let mut best = T::max_value().unwrap_or(T::one());
        for m in &self.matrices {
            let sym = (m + m.transpose()).scale(T::of(0.5));
            // Zero rows only add zero eigenvalues, and the dense solver can
            // return non-finite values on very sparse inputs.
            let support: Vec<usize> = (0..sym.nrows()).filter(|&i| sym.row(i).iter().any(|x| !x.is_zero())).collect();
            if support.len() < sym.nrows() {
                best = best.min(T::zero());
            }
            if support.is_empty() {
                continue;
            }
            let sub = sym.select_rows(&support).select_columns(&support);
            let eig = nalgebra::SymmetricEigen::new(sub).eigenvalues;
            if eig.iter().any(|x| !x.is_finite()) {
                return <T as num_traits::FromPrimitive>::from_f64(f64::NAN).unwrap_or(-T::one());
            }
            best = eig.iter().copied().fold(best, |a, b| a.min(b));
        }
        best
    }

    /// Variable `j` is irrelevant for input `x` iff `X_j[x, x] = 0`.
    pub fn is_irrelevant(&self, x: usize, j: usize) -> bool {
        self.matrices[j][(x, x)] == T::zero()
    }

    /// Pairs with different outputs lacking a variable that is relevant to both
    /// and differs between them.
    pub fn consistency_violations(&self) -> usize {
        let mut bad = 0;
        for x in 0..self.domain_size() {
            for y in x + 1..self.domain_size() {
                if self.outputs[x] == self.outputs[y] {
                    continue;
                }
                let ok = (0..self.num_vars()).any(|j| self.inputs[x][j] != self.inputs[y][j] && !self.is_irrelevant(x, j) && !self.is_irrelevant(y, j));
                bad += (!ok) as usize;
            }
        }
        bad
    }
}

/// The solution `X_j = ψ_jψ_j*` for AND on `{z : |z| ≥ n-1}`, with the
/// all-ones input first followed by the input with a zero in position `j`.
pub fn and_example_solution<T: Real>(n: usize) -> Result<GenericSolution<T>> {
    if n == 0 {
        return invalid("n must be positive");
    }
    let mut inputs = vec![vec![1u8; n]];
    for j in 0..n {
        let mut z = vec![1u8; n];
        z[j] = 0;
        inputs.push(z);
    }
    let outputs = (0..=n).map(|i| (i == 0) as u8).collect();
    let nn = T::count(n as u64);
    let (lo, hi) = (T::one() / nn.sqrt(), nn.sqrt());
    let matrices = (0..n)
        .map(|j| {
            // Entries of ψ_jψ_j* written directly: n^{-1/2}, 1 and n^{1/2}.
            let mut m = DMatrix::zeros(n + 1, n + 1);
            m[(0, 0)] = lo;
            m[(0, j + 1)] = T::one();
            m[(j + 1, 0)] = T::one();
            m[(j + 1, j + 1)] = hi;
            m
        })
        .collect();
    GenericSolution::new(inputs, outputs, matrices)
}

/// Diagonal sums of the AND solution as exact multiples of `√n`.
///
/// `X_j[z, z]` is `n^{-1/2} = (1/n)√n` on the all-ones input and `√n` on the
/// input with its zero at `j`; the returned coefficients are exact.
pub fn and_diagonal_sqrt_coefficients(n: usize) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); n + 1];
    for j in 0..n {
        out[0] += BigRational::new(BigInt::one(), BigInt::from(n));
        out[j + 1] += BigRational::one();
    }
    out
}

/// The one-bit identity with `X = [[1, 1], [1, 1]]`.
pub fn identity_solution<T: Real>() -> GenericSolution<T> {
    GenericSolution { inputs: vec![vec![0], vec![1]], outputs: vec![0, 1], matrices: vec![DMatrix::from_element(2, 2, T::one())] }
}

/// Hadamard product of each `X_j` with the pattern that keeps `X_j[x, y]` iff
/// (`F(x) = F(y)` and `x_j = y_j`) or (`F(x) ≠ F(y)` and `x_j ≠ y_j`).
pub fn normalize_condition<T: Real>(sol: &GenericSolution<T>) -> Result<GenericSolution<T>> {
    if sol.feasibility_residual() > T::of(1e-9) {
        return Err(Error::Precondition("input solution is not feasible".into()));
    }
    let m = sol.domain_size();
    let matrices = sol
        .matrices
        .iter()
        .enumerate()
        .map(|(j, x)| {
            DMatrix::from_fn(m, m, |a, b| {
                let same_out = sol.outputs[a] == sol.outputs[b];
                let same_bit = sol.inputs[a][j] == sol.inputs[b][j];
                if same_out == same_bit { x[(a, b)] } else { T::zero() }
            })
        })
        .collect();
    GenericSolution::new(sol.inputs.clone(), sol.outputs.clone(), matrices)
}

/// Row cap for composed domains.
pub const MAX_COMPOSED_ROWS: usize = 4096;

/// Composition `F ∘ (G_1, …, G_N)` with irrelevant variables: an input is a
/// concatenation of inner strings whose values match some `z` on the relevant
/// variables of `z`; inner strings on irrelevant variables are arbitrary.
pub fn compose_solutions<T: Real>(f: &GenericSolution<T>, g: &[GenericSolution<T>]) -> Result<GenericSolution<T>> {
    if g.len() != f.num_vars() {
        return invalid("one inner solution per outer variable required");
    }
    if f.strong_condition_residual() > T::of(1e-9) {
        return Err(Error::Precondition("outer solution must satisfy the strengthened condition".into()));
    }
    let widths: Vec<usize> = g.iter().map(|s| s.inputs.first().map_or(0, |x| x.len())).collect();
    if widths.iter().any(|&w| w > 16) {
        return Err(Error::TooLarge("inner inputs limited to 16 bits".into()));
    }
    let mut rows: Vec<(Vec<u8>, usize, Vec<Option<usize>>)> = Vec::new();
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
    for (zi, z) in f.inputs.iter().enumerate() {
        // Choices per outer variable: (inner string, its index in G_j's domain).
        let choices: Vec<Vec<(Vec<u8>, Option<usize>)>> = (0..f.num_vars())
            .map(|j| {
                if f.is_irrelevant(zi, j) {
                    (0..1u32 << widths[j])
                        .map(|bits| {
                            let s: Vec<u8> = (0..widths[j]).map(|b| (bits >> b & 1) as u8).collect();
                            let idx = g[j].inputs.iter().position(|u| *u == s);
                            (s, idx)
                        })
                        .collect()
                } else {
                    (0..g[j].domain_size()).filter(|&u| g[j].outputs[u] == z[j]).map(|u| (g[j].inputs[u].clone(), Some(u))).collect()
                }
            })
            .collect();
        let total: usize = choices.iter().map(|c| c.len()).product();
        if rows.len() + total > MAX_COMPOSED_ROWS {
            return Err(Error::TooLarge(format!("composed domain exceeds {MAX_COMPOSED_ROWS} rows")));
        }
        for mut code in 0..total {
            let mut x = Vec::new();
            let mut idx = Vec::with_capacity(choices.len());
            for c in &choices {
                let (s, u) = &c[code % c.len()];
                code /= c.len();
                x.extend_from_slice(s);
                idx.push(*u);
            }
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(x.clone()) {
                e.insert(rows.len());
                rows.push((x, zi, idx));
            }
        }
    }
    let m = rows.len();
    let mut matrices = Vec::new();
    for j in 0..f.num_vars() {
        for i in 0..widths[j] {
            let inner = &g[j].matrices[i];
            matrices.push(DMatrix::from_fn(m, m, |a, b| {
                let (_, za, ia) = &rows[a];
                let (_, zb, ib) = &rows[b];
                match (ia[j], ib[j]) {
                    (Some(u), Some(v)) => f.matrices[j][(*za, *zb)] * inner[(u, v)],
                    _ => T::zero(),
                }
            }));
        }
    }
    let outputs = rows.iter().map(|r| f.outputs[r.1]).collect();
    let inputs = rows.into_iter().map(|r| r.0).collect();
    GenericSolution::new(inputs, outputs, matrices)
}

/// Relation between negative and positive inputs for the unweighted adversary.
#[derive(Clone, Debug)]
pub struct Relation {
    pub negatives: Vec<Vec<u8>>,
    pub positives: Vec<Vec<u8>>,
    /// `(negative index, positive index)`.
    pub pairs: Vec<(usize, usize)>,
}

/// Degrees of a relation and the resulting bound `√(m m′ / (ℓ ℓ′))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnweightedStats {
    pub m: usize,
    pub m_prime: usize,
    pub l: usize,
    pub l_prime: usize,
    pub value: f64,
}

/// `m`, `m′`: least number of partners of a negative / positive input;
/// `ℓ`, `ℓ′`: largest number of partners differing in one fixed variable.
pub fn unweighted_adversary_value(rel: &Relation) -> Result<UnweightedStats> {
    if rel.pairs.is_empty() {
        return invalid("relation is empty");
    }
    let vars = rel.negatives.first().or(rel.positives.first()).map_or(0, |x| x.len());
    let mut deg_x = vec![0usize; rel.negatives.len()];
    let mut deg_y = vec![0usize; rel.positives.len()];
    let mut var_x = vec![vec![0usize; vars]; rel.negatives.len()];
    let mut var_y = vec![vec![0usize; vars]; rel.positives.len()];
    for &(x, y) in &rel.pairs {
        deg_x[x] += 1;
        deg_y[y] += 1;
        for j in 0..vars {
            if rel.negatives[x][j] != rel.positives[y][j] {
                var_x[x][j] += 1;
                var_y[y][j] += 1;
            }
        }
    }
    let m = *deg_x.iter().min().expect("nonempty");
    let m_prime = *deg_y.iter().min().expect("nonempty");
    let l = var_x.iter().flatten().copied().max().unwrap_or(0);
    let l_prime = var_y.iter().flatten().copied().max().unwrap_or(0);
    if l == 0 || l_prime == 0 {
        return invalid("related inputs must differ somewhere");
    }
    let value = ((m * m_prime) as f64 / (l * l_prime) as f64).sqrt();
    Ok(UnweightedStats { m, m_prime, l, l_prime, value })
}

/// All `k`-subsets related to `[n]`, with one variable per nonempty `S`.
pub fn all_k_sets_relation(n: usize, k: usize) -> Result<Relation> {
    if k >= n || n > 12 {
        return invalid("need k < n <= 12");
    }
    let encode = |a: u64| -> Vec<u8> { (1..1u64 << n).map(|s| (s & a != 0) as u8).collect() };
    let negatives: Vec<Vec<u8>> = subset::of_size(n, k).into_iter().map(encode).collect();
    let positives = vec![encode(subset::full(n))];
    let pairs = (0..negatives.len()).map(|i| (i, 0)).collect();
    Ok(Relation { negatives, positives, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::binom_u128;
    use proptest::prelude::*;

    #[test]
    fn ggt_invariants_on_grid() {
        for n in 2..=16 {
            for k in 1..n {
                for d in 1..=n - k {
                    let s = build_ggt_solution::<f64>(n, k, d).unwrap();
                    assert!(s.alpha.iter().chain(&s.beta).all(|&x| x > 0.0));
                    assert!(s.product_residual() < 1e-12);
                    assert!(s.balance_residual() < 1e-12);
                    assert!(s.feasibility_residual() < 1e-9);
                    assert!((s.objective - s.large_side_objective()).abs() < 1e-12);
                    assert!(s.objective / (1.0 + k as f64 / d as f64).sqrt() <= 10.0);
                }
            }
        }
        assert!(build_ggt_solution::<f64>(3, 2, 2).is_err());
    }

    #[test]
    fn t_helper_examples() {
        assert_eq!(t_sum(2, 3).unwrap(), BigRational::from_integer(2.into()));
        assert_eq!(t_closed(2, 3).unwrap(), BigRational::from_integer(2.into()));
        for b in 0..12 {
            for a in 0..=b {
                assert_eq!(t_sum(a, b).unwrap(), t_closed(a, b).unwrap());
            }
        }
    }

    #[test]
    fn literal_feasibility_examples() {
        let s = build_ggt_solution::<f64>(4, 1, 1).unwrap();
        assert!(s.feasibility_residual_literal().unwrap() < 1e-12);
        for (n, k, d) in [(2, 1, 1), (5, 2, 3), (5, 1, 4), (6, 3, 3)] {
            let s = build_ggt_solution::<f64>(n, k, d).unwrap();
            assert_eq!(s.max_size(), n - k - d + 1);
            assert!(s.feasibility_residual_literal().unwrap() < 1e-12);
        }
        let s = build_ggt_solution::<f64>(8, 2, 2).unwrap();
        assert!(s.objective / 2f64.sqrt() <= 10.0);
    }

    #[test]
    fn ggt_generic_structure() {
        for (n, k, d) in [(3, 1, 1), (4, 1, 2), (5, 2, 1)] {
            let s = build_ggt_solution::<f64>(n, k, d).unwrap();
            let g = s.to_generic().unwrap();
            assert!(g.feasibility_residual() < 1e-12);
            assert!(g.strong_condition_residual() < 1e-12);
            assert!(g.min_eigenvalue() >= -1e-9);
            assert_eq!(g.consistency_violations(), 0);
            let diag = g.diagonal_sums();
            assert!(diag.iter().all(|&v| (v - s.objective).abs() < 1e-12));
            // Irrelevance pattern on the small side.
            let small = subset::of_size(n, k);
            for (i, &a) in small.iter().enumerate() {
                for sv in 0..1u64 << n {
                    let size = subset::size(sv);
                    if sv & a != 0 {
                        assert!(g.is_irrelevant(i, sv as usize));
                    } else if (1..=s.max_size()).contains(&size) {
                        assert!(!g.is_irrelevant(i, sv as usize));
                    }
                }
            }
        }
    }

    #[test]
    fn and_example() {
        for n in 1..=8 {
            let s = and_example_solution::<f64>(n).unwrap();
            assert!(s.feasibility_residual() < 1e-12);
            assert!(s.diagonal_sums().iter().all(|&v| (v - (n as f64).sqrt()).abs() < 1e-12));
            assert!(and_diagonal_sqrt_coefficients(n).iter().all(|c| c.is_one()));
            assert!(s.min_eigenvalue() >= -1e-12);
            assert_eq!(s.consistency_violations(), 0);
        }
        let s = and_example_solution::<f64>(4).unwrap();
        assert!((s.diagonal_sums()[0] - 2.0).abs() < 1e-15);
        // z = 0111: irrelevant variables are exactly those with z_j = 1.
        for j in 0..4 {
            assert_eq!(s.is_irrelevant(1, j), s.inputs[1][j] == 1);
        }
    }

    #[test]
    fn normalize_examples() {
        let and2 = and_example_solution::<f64>(2).unwrap();
        let norm = normalize_condition(&and2).unwrap();
        assert!(norm.strong_condition_residual() < 1e-15);
        assert!(norm.min_eigenvalue() >= -1e-10);
        for j in 0..2 {
            for x in 0..3 {
                assert_eq!(norm.matrices[j][(x, x)], and2.matrices[j][(x, x)]);
            }
        }
        let ggt = build_ggt_solution::<f64>(3, 1, 1).unwrap().to_generic().unwrap();
        let big = build_ggt_solution::<f64>(8, 2, 2).unwrap().to_generic().unwrap();
        assert!(big.min_eigenvalue().abs() < 1e-9);
        let again = normalize_condition(&ggt).unwrap();
        for (a, b) in again.matrices.iter().zip(&ggt.matrices) {
            assert!((a - b).abs().max() < 1e-12);
        }
        let mut bad = and2.clone();
        bad.matrices[0][(0, 1)] = 5.0;
        assert!(normalize_condition(&bad).is_err());
    }

    #[test]
    fn compose_with_identities() {
        let f = normalize_condition(&and_example_solution::<f64>(2).unwrap()).unwrap();
        let ids = vec![identity_solution::<f64>(); 2];
        let c = compose_solutions(&f, &ids).unwrap();
        assert!(c.feasibility_residual() < 1e-9);
        assert!(c.min_eigenvalue() >= -1e-10);
        assert!((c.objective() - 2f64.sqrt()).abs() < 1e-12);
        // Rows are copies of outer inputs.
        for a in 0..c.domain_size() {
            for b in 0..c.domain_size() {
                let za = f.inputs.iter().position(|z| {
                    (0..2).all(|j| f.is_irrelevant(f.inputs.iter().position(|w| w == z).unwrap(), j) || z[j] == c.inputs[a][j])
                });
                let zb = f.inputs.iter().position(|z| {
                    (0..2).all(|j| f.is_irrelevant(f.inputs.iter().position(|w| w == z).unwrap(), j) || z[j] == c.inputs[b][j])
                });
                let (za, zb) = (za.unwrap(), zb.unwrap());
                for j in 0..2 {
                    assert!((c.matrices[j][(a, b)] - f.matrices[j][(za, zb)]).abs() < 1e-15 || f.is_irrelevant(za, j) || f.is_irrelevant(zb, j));
                }
            }
        }
        let ggt = build_ggt_solution::<f64>(3, 1, 1).unwrap().to_generic().unwrap();
        let ids = vec![identity_solution::<f64>(); ggt.num_vars()];
        let c = compose_solutions(&ggt, &ids).unwrap();
        assert!(c.feasibility_residual() < 1e-9);
        assert!(c.min_eigenvalue() >= -1e-10);
        assert!(c.objective() <= ggt.objective() + 1e-9);
        assert!(compose_solutions(&f, &ids[..1]).is_err());
        assert!(compose_solutions(&and_example_solution::<f64>(2).unwrap(), &ids[..2]).is_ok());
        // 11 and 01 agree on the second variable, so a weight there breaks the condition.
        let mut bad = and_example_solution::<f64>(2).unwrap();
        bad.matrices[1][(0, 1)] = 0.5;
        bad.matrices[1][(1, 0)] = 0.5;
        assert!(compose_solutions(&bad, &ids[..2]).is_err());
    }

    #[test]
    fn compose_and_of_ands() {
        let outer = normalize_condition(&and_example_solution::<f64>(2).unwrap()).unwrap();
        let inner = normalize_condition(&and_example_solution::<f64>(2).unwrap()).unwrap();
        let c = compose_solutions(&outer, &[inner.clone(), inner.clone()]).unwrap();
        assert!(c.feasibility_residual() < 1e-9);
        assert!(c.min_eigenvalue() >= -1e-10);
        assert!(c.objective() <= outer.objective() * inner.objective() + 1e-9);
        assert_eq!(c.consistency_violations(), 0);
    }

    #[test]
    fn unweighted_examples() {
        let r = unweighted_adversary_value(&all_k_sets_relation(3, 1).unwrap()).unwrap();
        assert!((r.value - 1.5f64.sqrt()).abs() < 1e-12);
        let single = Relation { negatives: vec![vec![0, 1]], positives: vec![vec![1, 1]], pairs: vec![(0, 0)] };
        assert_eq!(unweighted_adversary_value(&single).unwrap().value, 1.0);
        // Brute-force degrees for n = 4, k = 2.
        let rel = all_k_sets_relation(4, 2).unwrap();
        let st = unweighted_adversary_value(&rel).unwrap();
        let mut lp = 0;
        for s in 1..16u64 {
            lp = lp.max(subset::of_size(4, 2).iter().filter(|&&a| a & s == 0).count());
        }
        assert_eq!((st.m, st.m_prime, st.l, st.l_prime), (1, 6, 1, lp));
        assert!((st.value - (binom_u128(4, 2) as f64 / binom_u128(3, 2) as f64).sqrt()).abs() < 1e-9);
        assert!(unweighted_adversary_value(&Relation { negatives: vec![], positives: vec![], pairs: vec![] }).is_err());
    }

    proptest! {
        #[test]
        fn random_psd_solutions_stay_psd_after_normalization(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            // Scale the AND solution's factors and add a PSD term on same-output pairs.
            let n = rng.random_range(2..=5usize);
            let mut s = and_example_solution::<f64>(n).unwrap();
            for j in 0..n {
                let v: Vec<f64> = (0..=n).map(|x| if x > 0 && x != j + 1 { rng.random_range(-1.0..1.0) } else { 0.0 }).collect();
                let extra = DMatrix::from_fn(n + 1, n + 1, |a, b| v[a] * v[b]);
                s.matrices[j] += extra;
            }
            prop_assert!(s.feasibility_residual() < 1e-12);
            let norm = normalize_condition(&s).unwrap();
            prop_assert!(norm.min_eigenvalue() >= -1e-10);
            prop_assert!(norm.strong_condition_residual() < 1e-12);
        }
    }
}
