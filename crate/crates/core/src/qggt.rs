//! The reflection `R_Λ`, its block structure in the Fourier basis, and the
//! phase-estimation algorithm for the quantum gap group testing problem.
//!
//! Acceptance probabilities are exact. `U = O_f R_Λ` is a product of two
//! reflections, so its action on `|∅⟩` is fixed by the compression
//! `G = Q* O_f Q` of the oracle to `im Λ ⊗ |0⟩_W` (Jordan's lemma): an
//! eigenvalue `g` of `G` contributes the phases `±acos g`, and the part of
//! `|∅⟩` outside all these planes has phase 0.

use nalgebra::{DMatrix, DVector};

use crate::adversary::build_ggt_solution;
use crate::error::{invalid, Error, Result};
use crate::instances::{BlockOracle, Side};
use crate::qcore::{fejer_kernel, phase_distance};
use crate::scalar::{binom, cr, norm_sqr, Complex, Real};
use crate::subset;
use crate::symqft::{GtIndex, SymQft};

/// Coefficients `α_0, …, α_{n-k}` of `ψ_T = Σ_ℓ α_ℓ Σ_{B ⊆ T, |B| = ℓ} |B⟩`.
#[derive(Clone, Debug)]
pub struct LambdaSpec<T> {
    pub n: usize,
    pub k: usize,
    pub alpha: Vec<T>,
}

impl<T: Real> LambdaSpec<T> {
    pub fn new(n: usize, k: usize, alpha: Vec<T>) -> Result<Self> {
        if n <= 2 * k {
            return invalid("need n > 2k (pad with dummy elements)");
        }
        if alpha.len() != n - k + 1 {
            return invalid(format!("need {} coefficients", n - k + 1));
        }
        Ok(Self { n, k, alpha })
    }

    /// The instantiation used by the algorithm: `α_0 = 1` and
    /// `α_s = γ α_s^{adv}` with `γ = C₁√W`, for the universe padded to `n > 2k`.
    pub fn for_ggt(n: usize, k: usize, d: usize, c1: T) -> Result<(Self, T)> {
        let n = padded_n(n, k);
        let sol = build_ggt_solution::<T>(n, k, d)?;
        let gamma = c1 * sol.objective.sqrt();
        let mut alpha = vec![T::zero(); n - k + 1];
        alpha[0] = T::one();
        for (s, a) in sol.alpha.iter().enumerate() {
            alpha[s + 1] = gamma * *a;
        }
        Ok((Self::new(n, k, alpha)?, sol.objective))
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    /// `ψ_T` in the subset basis.
    pub fn psi(&self, t: u64) -> Vec<T> {
        let mut v = vec![T::zero(); self.dim()];
        let mut b = t;
        loop {
            let l = subset::size(b);
            if l <= self.n - self.k {
                v[b as usize] = self.alpha[l];
            }
            if b == 0 {
                break;
            }
            b = (b - 1) & t;
        }
        v
    }
}

/// Smallest universe size `> 2k` containing `[n]`.
pub fn padded_n(n: usize, k: usize) -> usize {
    n.max(2 * k + 1)
}

/// `w_t[ℓ] = α_ℓ C(n-ℓ-t, k-t) √C(n-2t, ℓ-t)` for `ℓ = t..=n-t` (zero past
/// `n-k`), together with its normalization (zero stays zero).
pub fn build_w<T: Real>(spec: &LambdaSpec<T>, t: usize) -> Result<(Vec<T>, Vec<T>)> {
    let (n, k) = (spec.n, spec.k);
    if t > k {
        return invalid("need t <= k");
    }
    let w: Vec<T> = (t..=n - t)
        .map(|l| {
            if l > n - k {
                T::zero()
            } else {
                spec.alpha[l] * binom::<T>((n - l - t) as i64, (k - t) as i64) * binom::<T>((n - 2 * t) as i64, (l - t) as i64).sqrt()
            }
        })
        .collect();
    let norm = w.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    let wt = if norm > T::zero() { w.iter().map(|&x| x / norm).collect() } else { vec![T::zero(); w.len()] };
    Ok((w, wt))
}

/// Orthonormal basis (as columns) of `span{ψ_T : |T| = n-k}` by SVD, with
/// numerical rank at relative tolerance `1e-9`.
pub fn lambda_basis_bruteforce<T: Real>(spec: &LambdaSpec<T>) -> Result<DMatrix<T>> {
    if spec.n > 12 {
        return Err(Error::TooLarge("brute-force Λ limited to n <= 12".into()));
    }
    let ts: Vec<u64> = subset::of_size(spec.n, spec.n - spec.k);
    let mut psi = DMatrix::<T>::zeros(spec.dim(), ts.len());
    for (j, &t) in ts.iter().enumerate() {
        psi.set_column(j, &DVector::from_vec(spec.psi(t)));
    }
    let svd = psi.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let keep: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] > smax * T::of(1e-9)).collect();
    Ok(DMatrix::from_fn(spec.dim(), keep.len(), |r, c| u[(r, keep[c])]))
}

/// The orthogonal projector onto `span{ψ_T}`.
pub fn lambda_bruteforce<T: Real>(spec: &LambdaSpec<T>) -> Result<DMatrix<T>> {
    let q = lambda_basis_bruteforce(spec)?;
    Ok(&q * q.transpose())
}

/// Orthonormal basis of `im Λ` from the block structure: columns
/// `F(w̃_t ⊗ e_x)` for every `t ≤ k` with `w_t ≠ 0` and every valid `x`.
pub fn lambda_basis<T: Real>(spec: &LambdaSpec<T>, qft: &SymQft<T>) -> Result<DMatrix<T>> {
    if qft.n() != spec.n {
        return invalid("transform size does not match Λ");
    }
    let ws: Vec<Vec<T>> = (0..=spec.k).map(|t| build_w(spec, t).map(|w| w.1)).collect::<Result<_>>()?;
    let mut cols = Vec::new();
    for &(x, t) in qft.strings() {
        if t > spec.k || ws[t].iter().all(|&v| v == T::zero()) {
            continue;
        }
        let entries: Vec<(GtIndex, T)> = ws[t].iter().enumerate().map(|(i, &v)| (GtIndex { t, l: t + i, x }, v)).collect();
        cols.push(qft.forward_sparse(&entries)?);
    }
    let mut q = DMatrix::<T>::zeros(spec.dim(), cols.len());
    for (j, col) in cols.into_iter().enumerate() {
        q.set_column(j, &DVector::from_vec(col));
    }
    Ok(q)
}

/// `‖F⁻¹ Λ F - ⊕_t (w̃_t w̃_t*) ⊗ I‖_F` with `Λ` from [`lambda_bruteforce`].
pub fn block_law_residual<T: Real>(spec: &LambdaSpec<T>) -> Result<T> {
    let qft = SymQft::<T>::new(spec.n)?;
    let q = lambda_basis_bruteforce(spec)?;
    let dim = spec.dim();
    let mut b = DMatrix::<T>::zeros(dim, q.ncols());
    for j in 0..q.ncols() {
        let col: Vec<T> = q.column(j).iter().copied().collect();
        b.set_column(j, &DVector::from_vec(qft.inverse(&col)?));
    }
    let mut m = &b * b.transpose();
    let ws: Vec<Vec<T>> = (0..=spec.k).map(|t| build_w(spec, t).map(|w| w.1)).collect::<Result<_>>()?;
    let order = qft.order();
    for (p, ip) in order.iter().enumerate() {
        if ip.t > spec.k {
            continue;
        }
        for (q_, iq) in order.iter().enumerate() {
            if iq.t == ip.t && iq.x == ip.x {
                m[(p, q_)] -= ws[ip.t][ip.l - ip.t] * ws[ip.t][iq.l - ip.t];
            }
        }
    }
    Ok(m.norm())
}

/// How [`reflect_lambda`] implements the per-`t` reflection about `w̃_t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReflectMode {
    /// Project onto `w̃_t` and reflect.
    Direct,
    /// Conjugate the reflection about `|t⟩` by the walk `U_t: |t⟩ ↦ w̃_t`.
    Walk,
}

/// Givens rotations of the walk `U_t`: `(cos, sin)` for `ℓ = t..n-k-1`
/// rotating `(|ℓ⟩, |ℓ+1⟩)`, then a final sign on `|n-k⟩`.
///
/// `c_ℓ` follows the ratio recurrence and `R` is the remaining weight; both
/// are dropped once the walk ends.
pub fn walk_rotations<T: Real>(spec: &LambdaSpec<T>, t: usize) -> Result<Option<(Vec<(T, T)>, T)>> {
    let (n, k) = (spec.n, spec.k);
    let (w, _) = build_w(spec, t)?;
    let norm = w.iter().fold(T::zero(), |a, &x| a + x * x).sqrt();
    if norm == T::zero() {
        return Ok(None);
    }
    let tiny = T::eps() * T::of(16.0);
    let mut c_l = binom::<T>((n - 2 * t) as i64, (k - t) as i64) / norm;
    let mut r = T::one();
    let mut rots = Vec::with_capacity(n - k - t);
    for l in t..n - k {
        let amp = spec.alpha[l] * c_l;
        let r_next = (r - amp * amp).max(T::zero());
        if r <= tiny {
            rots.push((T::one(), T::zero()));
        } else {
            let sr = r.sqrt();
            rots.push((amp / sr, r_next.sqrt() / sr));
        }
        r = r_next;
        let num = T::count((n - l - k) as u64);
        let den = (T::count((n - l - t) as u64) * T::count((l + 1 - t) as u64)).sqrt();
        c_l = c_l * num / den;
    }
    let last = spec.alpha[n - k] * c_l;
    let sign = if r <= tiny || last >= T::zero() { T::one() } else { -T::one() };
    Ok(Some((rots, sign)))
}

/// `R_Λ = 2Λ - I` on the subset register, through the inverse transform, a
/// reflection per Fourier fiber, and the forward transform.
pub fn reflect_lambda<T: Real>(state: &[Complex<T>], spec: &LambdaSpec<T>, mode: ReflectMode, qft: &SymQft<T>) -> Result<Vec<Complex<T>>> {
    if state.len() != spec.dim() || qft.n() != spec.n {
        return invalid("state must live on the 2^n-dimensional subset register");
    }
    let mut fib = qft.inverse_to_fibers(state)?;
    let n = spec.n;
    let mut direct = Vec::new();
    let mut walks = Vec::new();
    for t in 0..=spec.k {
        match mode {
            ReflectMode::Direct => direct.push(build_w(spec, t)?.1),
            ReflectMode::Walk => walks.push(walk_rotations(spec, t)?),
        }
    }
    for &(x, t) in qft.strings() {
        let f = &mut fib.fiber_mut(x)[t..=n - t];
        if t > spec.k {
            f.iter_mut().for_each(|v| *v = -*v);
            continue;
        }
        match mode {
            ReflectMode::Direct => {
                let w = &direct[t];
                let proj = f.iter().zip(w).fold(cr(T::zero()), |acc, (&v, &wi)| acc + v * wi);
                for (v, &wi) in f.iter_mut().zip(w) {
                    *v = proj * (wi + wi) - *v;
                }
            }
            ReflectMode::Walk => match &walks[t] {
                None => f.iter_mut().for_each(|v| *v = -*v),
                Some((rots, sign)) => {
                    let last = rots.len();
                    // U_t⁻¹
                    f[last] = f[last] * *sign;
                    for (i, &(cs, sn)) in rots.iter().enumerate().rev() {
                        let (a, b) = (f[i], f[i + 1]);
                        f[i] = a * cs + b * sn;
                        f[i + 1] = b * cs - a * sn;
                    }
                    // 2|t⟩⟨t| - I
                    for v in f.iter_mut().skip(1) {
                        *v = -*v;
                    }
                    // U_t
                    for (i, &(cs, sn)) in rots.iter().enumerate() {
                        let (a, b) = (f[i], f[i + 1]);
                        f[i] = a * cs - b * sn;
                        f[i + 1] = a * sn + b * cs;
                    }
                    f[last] = f[last] * *sign;
                }
            },
        }
    }
    Ok(qft.forward_from_fibers(fib))
}

/// Algorithm constants. `a = ⌈log₂(2π C W)⌉ + pad` unless fixed explicitly.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QggtConfig {
    pub c1: f64,
    pub c: f64,
    pub pad_bits: u32,
    pub bits: Option<u32>,
}

impl Default for QggtConfig {
    fn default() -> Self {
        Self { c1: 8.0, c: 64.0, pad_bits: 3, bits: None }
    }
}

impl QggtConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c > 0.0) {
            return invalid("C1 and C must be positive");
        }
        if let Some(a) = self.bits {
            if a == 0 || a > 24 {
                return invalid("ancilla bits must be in 1..=24");
            }
        }
        Ok(())
    }

    /// `δ = 1/(C W)`.
    pub fn delta(&self, w: f64) -> f64 {
        1.0 / (self.c * w)
    }

    pub fn ancilla_bits(&self, w: f64) -> u32 {
        self.bits.unwrap_or_else(|| (std::f64::consts::TAU * self.c * w).log2().ceil() as u32 + self.pad_bits)
    }
}

/// Pads an oracle to `n_pad ≥ n` elements; a query ignores its dummy part.
pub fn pad_oracle<T: Real>(oracle: &BlockOracle<T>, n_pad: usize) -> Result<BlockOracle<T>> {
    let n = oracle.n();
    if n_pad < n {
        return invalid("cannot shrink the universe");
    }
    if n_pad == n {
        return Ok(oracle.clone());
    }
    let mask = subset::full(n);
    let blocks = (0..1u64 << n_pad).map(|s| oracle.block(s & mask).clone()).collect();
    BlockOracle::from_blocks(n_pad, oracle.side(), oracle.hidden(), blocks, oracle.is_reflection())
}

/// `⟨0|O_{f,S}|0⟩` per query set, with `-1` on `∅`. Fails unless `O_f` is a
/// reflection, in which case the amplitudes are real.
pub fn oracle_amplitudes<T: Real>(oracle: &BlockOracle<T>) -> Result<Vec<T>> {
    if !oracle.is_reflection() {
        return Err(Error::Precondition("oracle must be a reflection (reflectionize it first)".into()));
    }
    Ok((0..1u64 << oracle.n()).map(|s| if s == 0 { -T::one() } else { oracle.amplitude(s).re }).collect())
}

/// Prepared `Λ` data for one `(n, k, d)` and configuration.
#[derive(Clone, Debug)]
pub struct QggtPlan<T: Real> {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub spec: LambdaSpec<T>,
    pub objective: T,
    pub delta: T,
    pub bits: u32,
    basis: DMatrix<T>,
}

impl<T: Real> QggtPlan<T> {
    pub fn new(n: usize, k: usize, d: usize, cfg: &QggtConfig) -> Result<Self> {
        cfg.validate()?;
        let (spec, w) = LambdaSpec::for_ggt(n, k, d, T::of(cfg.c1))?;
        if spec.n > 16 {
            return Err(Error::TooLarge("exact simulation limited to n <= 16".into()));
        }
        let qft = SymQft::new(spec.n)?;
        let basis = lambda_basis(&spec, &qft)?;
        let bits = cfg.ancilla_bits(w.as_f64());
        if bits > 24 {
            return Err(Error::TooLarge("too many ancilla bits".into()));
        }
        Ok(Self { n, k, d, spec, objective: w, delta: T::of(cfg.delta(w.as_f64())), bits, basis })
    }

    pub fn padded_n(&self) -> usize {
        self.spec.n
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthonormal basis of `im Λ` in the subset basis.
    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    /// Spectral measure `{(phase, weight)}` of `|∅⟩ ⊗ |0⟩_W` under `U = O_f R_Λ`,
    /// given the amplitudes `⟨0|O_{f,S}|0⟩` on the padded universe.
    pub fn spectral_measure(&self, amps: &[T]) -> Result<Vec<(T, T)>> {
        if amps.len() != self.spec.dim() {
            return invalid("one amplitude per padded query set required");
        }
        let q = &self.basis;
        let mut y = q.clone();
        for (r, &a) in amps.iter().enumerate() {
            y.row_mut(r).scale_mut(a);
        }
        let g = q.transpose() * y;
        let g = (&g + g.transpose()).scale(T::of(0.5));
        let eig = nalgebra::SymmetricEigen::new(g);
        let c0 = eig.eigenvectors.transpose() * q.row(0).transpose();
        let mut measure = Vec::with_capacity(2 * c0.len() + 1);
        let mut total = T::zero();
        let tol = T::of(1e-12);
        for (i, &gi) in eig.eigenvalues.iter().enumerate() {
            let gi = gi.min(T::one()).max(-T::one());
            let ci = c0[i];
            if T::one() - gi <= tol {
                continue;
            }
            let w = (ci * ci * T::of(2.0) / (T::one() - gi)).min(T::one());
            if w <= T::zero() {
                continue;
            }
            let th = gi.acos();
            measure.push((th, w / T::of(2.0)));
            measure.push((T::two_pi() - th, w / T::of(2.0)));
            total += w;
        }
        measure.push((T::zero(), (T::one() - total).max(T::zero())));
        Ok(measure)
    }

    /// Probability that the phase estimate lies within `δ` of 0.
    pub fn reject_probability(&self, measure: &[(T, T)]) -> T {
        let n = 1u64 << self.bits;
        let step = T::two_pi() / T::count(n);
        let reach = (self.delta / step).floor().to_u64().unwrap_or(0).min(n / 2);
        let mut js: Vec<u64> = (0..=reach).collect();
        js.extend((1..=reach).map(|j| n - j));
        js.retain(|&j| phase_distance(step * T::count(j)) <= self.delta);
        js.dedup();
        measure
            .iter()
            .map(|&(ph, w)| w * js.iter().fold(T::zero(), |acc, &j| acc + fejer_kernel(ph - step * T::count(j), self.bits)))
            .fold(T::zero(), |a, b| a + b)
    }

    /// Runs the algorithm on a reflection oracle over the original `[n]`.
    pub fn run(&self, oracle: &BlockOracle<T>) -> Result<QggtOutcome> {
        if oracle.n() != self.n {
            return invalid("oracle size does not match the plan");
        }
        let padded = pad_oracle(oracle, self.padded_n())?;
        self.outcome(&oracle_amplitudes(&padded)?)
    }

    /// Exact acceptance probability from the amplitudes `⟨0|O_{f,S}|0⟩` of a
    /// reflection oracle on the padded universe (`-1` on `∅`).
    pub fn acceptance_from_amplitudes(&self, amps: &[T]) -> Result<T> {
        let measure = self.spectral_measure(amps)?;
        Ok((T::one() - self.reject_probability(&measure)).max(T::zero()).min(T::one()))
    }

    /// [`QggtOutcome`] for the given amplitudes.
    pub fn outcome(&self, amps: &[T]) -> Result<QggtOutcome> {
        let p = self.acceptance_from_amplitudes(amps)?.as_f64();
        Ok(QggtOutcome {
            accept: p > 0.5,
            acceptance_probability: p,
            queries: (1u64 << self.bits) - 1,
            bits: self.bits,
            delta: self.delta.as_f64(),
            objective: self.objective.as_f64(),
        })
    }

    /// The eigenvector `u = γ|∅⟩ - Σ_s β_s Σ_{|S|=s, |S∩B|=1} |S⟩` for a large set `B`.
    pub fn witness(&self, b: u64) -> Result<Vec<T>> {
        if subset::size(b) != self.k + self.d || b >> self.padded_n() != 0 {
            return invalid("witness needs a set of size k + d");
        }
        let sol = build_ggt_solution::<T>(self.padded_n(), self.k, self.d)?;
        let gamma = self.spec.alpha[1] / sol.alpha[0];
        let mut u = vec![T::zero(); self.spec.dim()];
        u[0] = gamma;
        for s in 1..u.len() as u64 {
            let size = subset::size(s);
            if size <= sol.max_size() && subset::size(s & b) == 1 {
                u[s as usize] = -sol.beta[size - 1];
            }
        }
        Ok(u)
    }

    /// `‖U u - u‖ / ‖u‖` on `I ⊗ W`, with `R_Λ = 2Λ - I` on `I ⊗ |0⟩` and `-I` elsewhere.
    pub fn witness_residual(&self, oracle: &BlockOracle<T>) -> Result<T> {
        if oracle.side() != Side::Large {
            return invalid("witness exists on the large side");
        }
        let padded = pad_oracle(oracle, self.padded_n())?;
        let u = self.witness(oracle.hidden())?;
        let q = &self.basis;
        let uv = DVector::from_column_slice(&u);
        let r = (q * (q.transpose() * &uv)).scale(T::of(2.0)) - &uv;
        let wd = padded.wdim();
        let mut err = T::zero();
        for s in 0..u.len() {
            for w in 0..wd {
                let o = if s == 0 {
                    if w == 0 { -cr(T::one()) } else { cr(T::zero()) }
                } else {
                    padded.block(s as u64)[(w, 0)]
                };
                let target = if w == 0 { cr(u[s]) } else { cr(T::zero()) };
                err += norm_sqr(&(o * r[s] - target));
            }
        }
        Ok(err.sqrt() / uv.norm())
    }

    /// Small side: `(‖P_{2δ}|∅⟩‖, δ‖ψ_A‖)` from the exact spectral measure.
    pub fn small_side_gap(&self, oracle: &BlockOracle<T>) -> Result<(T, T)> {
        if oracle.side() != Side::Small {
            return invalid("gap bound applies on the small side");
        }
        let padded = pad_oracle(oracle, self.padded_n())?;
        let measure = self.spectral_measure(&oracle_amplitudes(&padded)?)?;
        let two_delta = self.delta * T::of(2.0);
        let mass = measure.iter().filter(|m| phase_distance(m.0) <= two_delta).fold(T::zero(), |a, m| a + m.1);
        let psi_norm = (T::one() + self.psi_norm_sqr(oracle.hidden())).sqrt();
        Ok((mass.sqrt(), self.delta * psi_norm))
    }

    fn psi_norm_sqr(&self, a: u64) -> T {
        let t = subset::full(self.padded_n()) & !a;
        self.spec.psi(t).iter().skip(1).fold(T::zero(), |acc, &v| acc + v * v)
    }

    /// Dense `U = O_f R_Λ` on `I ⊗ W` of the padded instance, for cross-checks.
    pub fn dense_operator(&self, oracle: &BlockOracle<T>) -> Result<DMatrix<Complex<T>>> {
        let padded = pad_oracle(oracle, self.padded_n())?;
        let blocks = (0..1u64 << self.padded_n()).map(|s| padded.block(s).clone()).collect::<Vec<_>>();
        self.dense_operator_from_blocks(&blocks)
    }

    /// Dense `U` from explicit blocks on the padded universe (the `∅` block is
    /// replaced by `-I`); the blocks need not satisfy any promise.
    pub fn dense_operator_from_blocks(&self, blocks: &[DMatrix<Complex<T>>]) -> Result<DMatrix<Complex<T>>> {
        if blocks.len() != self.spec.dim() {
            return invalid("one block per padded query set required");
        }
        let wd = blocks[0].nrows();
        let dim = self.spec.dim() * wd;
        if dim > 4096 {
            return Err(Error::TooLarge("dense operator limited to dimension 4096".into()));
        }
        let q = &self.basis;
        let lam = q * q.transpose();
        let mut r = DMatrix::<Complex<T>>::identity(dim, dim).scale(-T::one());
        for i in 0..self.spec.dim() {
            for j in 0..self.spec.dim() {
                r[(i * wd, j * wd)] += cr(lam[(i, j)] * T::of(2.0));
            }
        }
        let mut bl = blocks.to_vec();
        bl[0] = -DMatrix::identity(wd, wd);
        let o = crate::qcore::UnitaryOp::Blocks { target: wd, blocks: bl }.to_dense();
        Ok(o * r)
    }
}

/// Result of one run.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QggtOutcome {
    /// Majority outcome: accept (declare the small side) iff the acceptance probability exceeds 1/2.
    pub accept: bool,
    pub acceptance_probability: f64,
    /// Oracle calls made by phase estimation, `2^a - 1`.
    pub queries: u64,
    pub bits: u32,
    pub delta: f64,
    pub objective: f64,
}

/// Plans and runs the algorithm on a reflection oracle.
pub fn qggt_run<T: Real>(oracle: &BlockOracle<T>, k: usize, d: usize, cfg: &QggtConfig) -> Result<QggtOutcome> {
    QggtPlan::<T>::new(oracle.n(), k, d, cfg)?.run(oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{make_block_oracle, IrrelevantMode, OverridePolicy, RelaxedOracle};
    use crate::qcore::{phase_estimation, reflectionize, spectral_gap_check, UnitaryOp};
    use crate::symqft::specht_vector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spec(n: usize, k: usize, rng: &mut ChaCha8Rng) -> LambdaSpec<f64> {
        let alpha = (0..=n - k).map(|_| rng.random_range(-2.0..2.0)).collect();
        LambdaSpec::new(n, k, alpha).unwrap()
    }

    fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex<f64>> {
        crate::qcore::haar_state(dim, rng)
    }

    fn dist(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
        a.iter().zip(b).map(|(x, y)| norm_sqr(&(x - y))).sum::<f64>().sqrt()
    }

    fn oracle(n: usize, k: usize, d: usize, side: Side, a: u64, mode: IrrelevantMode, seed: u64) -> BlockOracle<f64> {
        let r = RelaxedOracle::new(n, k, d, side, a, OverridePolicy::SeededRandom, seed).unwrap();
        let o = make_block_oracle::<f64>(&r, mode, seed, 2).unwrap();
        if o.is_reflection() { o } else { reflectionize(&o) }
    }

    #[test]
    fn w_examples() {
        let spec = LambdaSpec::new(4, 1, vec![1.0; 4]).unwrap();
        let (w, wt) = build_w(&spec, 0).unwrap();
        let expect = [4.0, 6.0, 2.0 * 6f64.sqrt(), 2.0, 0.0];
        assert_eq!(w.len(), 5);
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((wt.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        let (w1, _) = build_w(&spec, 1).unwrap();
        for (i, v) in w1.iter().enumerate().take(3) {
            assert!((v - binom::<f64>(2, i as i64).sqrt()).abs() < 1e-12);
        }
        let zero = LambdaSpec::new(5, 2, vec![0.0; 4]).unwrap();
        assert!(build_w(&zero, 1).unwrap().1.iter().all(|&v| v == 0.0));
        assert!(build_w(&spec, 2).is_err());
        assert!(LambdaSpec::new(4, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn bruteforce_ranks() {
        let mut only0 = vec![0.0f64; 5];
        only0[0] = 1.0;
        let lam = lambda_bruteforce(&LambdaSpec::new(6, 2, only0).unwrap()).unwrap();
        assert!((lam.trace() - 1.0).abs() < 1e-9);
        assert!((lam[(0, 0)] - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = random_spec(6, 2, &mut rng);
        assert_eq!(lambda_basis_bruteforce(&spec).unwrap().ncols(), 15);
        let qft = SymQft::new(6).unwrap();
        assert_eq!(lambda_basis(&spec, &qft).unwrap().ncols(), 15);
    }

    #[test]
    fn block_law_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=8 {
            for k in 0..=4 {
                if n <= 2 * k {
                    continue;
                }
                for _ in 0..3 {
                    let spec = random_spec(n, k, &mut rng);
                    assert!(block_law_residual(&spec).unwrap() < 1e-9, "n={n} k={k}");
                }
            }
        }
    }

    #[test]
    fn lambda_decompose_vector_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, k) in [(5, 2), (7, 3), (6, 1)] {
            let spec = random_spec(n, k, &mut rng);
            for t in 0..=k {
                let a: Vec<usize> = (1..=t).collect();
                let b: Vec<usize> = (t + 1..=2 * t).collect();
                let v = specht_vector::<f64>(n, n - k, &a, &b).unwrap();
                let mut lhs = vec![0.0; 1 << n];
                for (tset, &coef) in v.iter().enumerate() {
                    if coef != 0.0 {
                        for (x, y) in lhs.iter_mut().zip(spec.psi(tset as u64)) {
                            *x += coef * y;
                        }
                    }
                }
                let mut rhs = vec![0.0; 1 << n];
                for l in t..=n - k {
                    let c = spec.alpha[l] * binom::<f64>((n - l - t) as i64, (k - t) as i64);
                    for (x, y) in rhs.iter_mut().zip(specht_vector::<f64>(n, l, &a, &b).unwrap()) {
                        *x += c * y;
                    }
                }
                let err = lhs.iter().zip(&rhs).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(err < 1e-9, "n={n} k={k} t={t}");
            }
        }
    }

    #[test]
    fn reflection_modes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 3..=9 {
            let qft = SymQft::new(n).unwrap();
            for _ in 0..5 {
                let k = rng.random_range(0..=(n - 1) / 2);
                let spec = random_spec(n, k, &mut rng);
                let psi = random_state(1 << n, &mut rng);
                let d = reflect_lambda(&psi, &spec, ReflectMode::Direct, &qft).unwrap();
                let w = reflect_lambda(&psi, &spec, ReflectMode::Walk, &qft).unwrap();
                assert!(dist(&d, &w) < 1e-8);
                let back = reflect_lambda(&d, &spec, ReflectMode::Walk, &qft).unwrap();
                assert!(dist(&back, &psi) < 1e-9);
                // Against the brute-force projector.
                let lam = lambda_bruteforce(&spec).unwrap();
                let pv = DVector::from_column_slice(&psi);
                let lc = lam.map(cr);
                let bf = (&lc * &pv).scale(2.0) - &pv;
                assert!(dist(bf.as_slice(), &d) < 1e-9);
            }
        }
    }

    #[test]
    fn reflection_fixes_psi_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let spec = random_spec(7, 2, &mut rng);
        let qft = SymQft::new(7).unwrap();
        for t in subset::of_size(7, 5) {
            let psi: Vec<Complex<f64>> = spec.psi(t).into_iter().map(cr).collect();
            for mode in [ReflectMode::Direct, ReflectMode::Walk] {
                assert!(dist(&reflect_lambda(&psi, &spec, mode, &qft).unwrap(), &psi) < 1e-9);
            }
        }
        // A zero tail in α exercises the early end of the walk.
        let spec = LambdaSpec::new(7, 2, vec![1.0, 0.5, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let psi = random_state(128, &mut rng);
        let d = reflect_lambda(&psi, &spec, ReflectMode::Direct, &qft).unwrap();
        let w = reflect_lambda(&psi, &spec, ReflectMode::Walk, &qft).unwrap();
        assert!(dist(&d, &w) < 1e-9);
    }

    #[test]
    fn witness_is_fixed_by_u() {
        let cfg = QggtConfig::default();
        for (n, k, d) in [(4, 1, 1), (5, 2, 1), (6, 1, 3), (3, 2, 1)] {
            let plan = QggtPlan::<f64>::new(n, k, d, &cfg).unwrap();
            let qft = SymQft::new(plan.padded_n()).unwrap();
            for b in subset::of_size(n, k + d) {
                for mode in IrrelevantMode::ALL {
                    let o = oracle(n, k, d, Side::Large, b, mode, b ^ 17);
                    assert!(plan.witness_residual(&o).unwrap() < 1e-9);
                }
                let u = plan.witness(b).unwrap();
                let uc: Vec<Complex<f64>> = u.iter().map(|&x| cr(x)).collect();
                let r = reflect_lambda(&uc, &plan.spec, ReflectMode::Walk, &qft).unwrap();
                assert!(dist(&r, &uc.iter().map(|z| -z).collect::<Vec<_>>()) < 1e-9);
                let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                assert!(u[0] / norm >= 1.0 / (1.0 + 1.0 / (cfg.c1 * cfg.c1)).sqrt() - 1e-12);
            }
        }
    }

    #[test]
    fn small_side_gap_bound() {
        let cfg = QggtConfig::default();
        for (n, k, d) in [(4, 1, 1), (5, 2, 2), (6, 1, 2)] {
            let plan = QggtPlan::<f64>::new(n, k, d, &cfg).unwrap();
            for a in subset::of_size(n, k) {
                for mode in IrrelevantMode::ALL {
                    let o = oracle(n, k, d, Side::Small, a, mode, a + 5);
                    let (lhs, rhs) = plan.small_side_gap(&o).unwrap();
                    assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}");
                    let expect = (1.0 + cfg.c1 * cfg.c1 * plan.objective * plan.objective).sqrt() * plan.delta;
                    assert!((rhs - expect).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn dense_gap_lemma_on_small_side() {
        let cfg = QggtConfig::default();
        let (n, k, d) = (4, 1, 1);
        let plan = QggtPlan::<f64>::new(n, k, d, &cfg).unwrap();
        let o = oracle(n, k, d, Side::Small, 0b0100, IrrelevantMode::RandomReflection, 3);
        let wd = o.wdim();
        let dim = plan.spec.dim() * wd;
        let q = plan.basis();
        let lam = q * q.transpose();
        let mut p1 = DMatrix::<Complex<f64>>::identity(dim, dim);
        for i in 0..plan.spec.dim() {
            for j in 0..plan.spec.dim() {
                p1[(i * wd, j * wd)] -= cr(lam[(i, j)]);
            }
        }
        let od = o.to_unitary().to_dense();
        let p2 = (DMatrix::identity(dim, dim) - od).scale(0.5);
        let t = subset::full(n) & !0b0100;
        let mut w = vec![cr(0.0); dim];
        for (s, v) in plan.spec.psi(t).into_iter().enumerate() {
            w[s * wd] = cr(v);
        }
        let chk = spectral_gap_check(&p1, &p2, &w, 2.0 * plan.delta).unwrap();
        assert!(chk.pass);
        let (lhs, _) = plan.small_side_gap(&o).unwrap();
        assert!((lhs - chk.lhs).abs() < 1e-7);
    }

    #[test]
    fn engine_matches_dense_phase_estimation() {
        let cfg = QggtConfig { bits: Some(7), ..QggtConfig::default() };
        for (n, k, d) in [(3, 1, 1), (4, 1, 2), (4, 2, 1)] {
            let plan = QggtPlan::<f64>::new(n, k, d, &cfg).unwrap();
            for side in [Side::Small, Side::Large] {
                let size = if side == Side::Small { k } else { k + d };
                let a = subset::of_size(n, size)[0];
                for mode in IrrelevantMode::ALL {
                    let o = oracle(n, k, d, side, a, mode, 99);
                    let u = UnitaryOp::Dense(plan.dense_operator(&o).unwrap());
                    let mut init = vec![cr(0.0); u.dim()];
                    init[0] = cr(1.0);
                    let dense = phase_estimation(&u, &init, plan.bits).unwrap();
                    let step = std::f64::consts::TAU / dense.len() as f64;
                    let rej: f64 = dense.iter().enumerate().filter(|(j, _)| phase_distance(step * *j as f64) <= plan.delta).map(|x| x.1).sum();
                    let padded = pad_oracle(&o, plan.padded_n()).unwrap();
                    let m = plan.spectral_measure(&oracle_amplitudes(&padded).unwrap()).unwrap();
                    assert!((m.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-9);
                    assert!((plan.reject_probability(&m) - rej).abs() < 1e-8, "n={n} k={k} d={d} {side:?} {mode:?}");
                }
            }
        }
    }

    #[test]
    fn run_small_grid() {
        let cfg = QggtConfig::default();
        for n in 2..=6 {
            for k in 1..=2 {
                for d in 1..=2 {
                    if k + d > n {
                        continue;
                    }
                    let plan = QggtPlan::<f64>::new(n, k, d, &cfg).unwrap();
                    for (side, size) in [(Side::Small, k), (Side::Large, k + d)] {
                        for a in subset::of_size(n, size) {
                            for mode in IrrelevantMode::ALL {
                                let out = plan.run(&oracle(n, k, d, side, a, mode, a * 31 + 1)).unwrap();
                                let correct = if side == Side::Small { out.acceptance_probability } else { 1.0 - out.acceptance_probability };
                                assert!(correct >= 2.0 / 3.0, "n={n} k={k} d={d} {side:?} {mode:?}: {correct}");
                                assert_eq!(out.accept, side == Side::Small);
                                assert_eq!(out.queries, (1 << out.bits) - 1);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_non_reflections() {
        let r = RelaxedOracle::new(4, 1, 1, Side::Small, 1, OverridePolicy::Exact, 0).unwrap();
        let o = make_block_oracle::<f64>(&r, IrrelevantMode::RandomUnitary, 1, 2).unwrap();
        assert!(qggt_run(&o, 1, 1, &QggtConfig::default()).is_err());
        assert!(qggt_run(&reflectionize(&o), 1, 1, &QggtConfig::default()).is_ok());
    }
}
