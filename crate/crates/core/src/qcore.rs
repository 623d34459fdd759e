//! Exact state-vector simulation: registers, unitaries, block oracles,
//! amplitude amplification, phase estimation and the effective spectral gap.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::instances::BlockOracle;
use crate::scalar::{c, cr, norm_sqr, Complex, Real};

/// Default cap on the total dimension of a layout.
pub const MAX_DIM: usize = 1 << 24;

/// Ordered named registers; the last register varies fastest in the flat index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    regs: Vec<(String, usize)>,
}

impl RegisterLayout {
    pub fn new(regs: &[(&str, usize)]) -> Result<Self> {
        Self::with_cap(regs, MAX_DIM)
    }

    pub fn with_cap(regs: &[(&str, usize)], cap: usize) -> Result<Self> {
        let mut dim: usize = 1;
        for (i, (name, d)) in regs.iter().enumerate() {
            if *d == 0 {
                return invalid(format!("register {name} has dimension 0"));
            }
            if regs[..i].iter().any(|(m, _)| m == name) {
                return invalid(format!("duplicate register name {name}"));
            }
            dim = dim.checked_mul(*d).filter(|&x| x <= cap).ok_or_else(|| Error::TooLarge(format!("layout dimension exceeds {cap}")))?;
        }
        Ok(Self { regs: regs.iter().map(|(n, d)| (n.to_string(), *d)).collect() })
    }

    pub fn dim(&self) -> usize {
        self.regs.iter().map(|r| r.1).product()
    }

    pub fn names(&self) -> Vec<&str> {
        self.regs.iter().map(|r| r.0.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.regs.iter().position(|r| r.0 == name)
    }

    pub fn register_dim(&self, name: &str) -> Result<usize> {
        self.position(name).map(|p| self.regs[p].1).ok_or_else(|| Error::InvalidParameter(format!("no register {name}")))
    }

    /// Flat-index step of register `pos`.
    pub fn stride(&self, pos: usize) -> usize {
        self.regs[pos + 1..].iter().map(|r| r.1).product()
    }

    /// Flat index of a tuple of register values.
    pub fn index(&self, values: &[usize]) -> Result<usize> {
        if values.len() != self.regs.len() {
            return invalid("one value per register required");
        }
        let mut idx = 0;
        for (v, (name, d)) in values.iter().zip(&self.regs) {
            if v >= d {
                return invalid(format!("value {v} out of range for register {name}"));
            }
            idx = idx * d + v;
        }
        Ok(idx)
    }

    pub fn decode(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.regs.len()];
        for (i, (_, d)) in self.regs.iter().enumerate().rev() {
            out[i] = index % d;
            index /= d;
        }
        out
    }
}

/// Dense amplitudes over a register layout.
#[derive(Clone, Debug)]
pub struct StateVector<T: Real> {
    layout: RegisterLayout,
    amps: Vec<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn basis(layout: RegisterLayout, index: usize) -> Result<Self> {
        if index >= layout.dim() {
            return invalid("basis index out of range");
        }
        let mut amps = vec![Complex::new(T::zero(), T::zero()); layout.dim()];
        amps[index] = cr(T::one());
        Ok(Self { layout, amps })
    }

    pub fn from_amplitudes(layout: RegisterLayout, amps: Vec<Complex<T>>) -> Result<Self> {
        if amps.len() != layout.dim() {
            return invalid(format!("expected {} amplitudes, got {}", layout.dim(), amps.len()));
        }
        Ok(Self { layout, amps })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex<T>> {
        self.amps
    }

    pub fn norm(&self) -> T {
        self.amps.iter().map(norm_sqr).fold(T::zero(), |a, b| a + b).sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        inner(&self.amps, &other.amps)
    }

    pub fn apply(&self, op: &UnitaryOp<T>) -> Result<Self> {
        Ok(Self { layout: self.layout.clone(), amps: op.apply(&self.amps)? })
    }

    /// Total probability of the basis states selected by `pred`.
    pub fn probability(&self, pred: impl Fn(usize) -> bool) -> T {
        self.amps.iter().enumerate().filter(|(i, _)| pred(*i)).map(|(_, a)| norm_sqr(a)).fold(T::zero(), |a, b| a + b)
    }
}

pub(crate) fn inner<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
    a.iter().zip(b).fold(cr(T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

/// A unitary in one of a few structured forms.
#[derive(Clone, Debug)]
pub enum UnitaryOp<T: Real> {
    Dense(DMatrix<Complex<T>>),
    Diagonal(Vec<Complex<T>>),
    /// Block diagonal: flat index `c·target + w`, block `c` acts on `w`.
    Blocks { target: usize, blocks: Vec<DMatrix<Complex<T>>> },
    /// Applied first to last.
    Sequence(Vec<UnitaryOp<T>>),
}

impl<T: Real> UnitaryOp<T> {
    pub fn identity(dim: usize) -> Self {
        Self::Diagonal(vec![cr(T::one()); dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dense(m) => m.nrows(),
            Self::Diagonal(d) => d.len(),
            Self::Blocks { target, blocks } => target * blocks.len(),
            Self::Sequence(ops) => ops.first().map_or(0, |o| o.dim()),
        }
    }

    pub fn apply(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if v.len() != self.dim() {
            return invalid(format!("operator of dimension {} applied to vector of length {}", self.dim(), v.len()));
        }
        Ok(match self {
            Self::Dense(m) => (m * DVector::from_column_slice(v)).as_slice().to_vec(),
            Self::Diagonal(d) => v.iter().zip(d).map(|(x, y)| x * y).collect(),
            Self::Blocks { target, blocks } => {
                let mut out = Vec::with_capacity(v.len());
                for (b, chunk) in blocks.iter().zip(v.chunks(*target)) {
                    out.extend_from_slice((b * DVector::from_column_slice(chunk)).as_slice());
                }
                out
            }
            Self::Sequence(ops) => {
                let mut cur = v.to_vec();
                for op in ops {
                    cur = op.apply(&cur)?;
                }
                cur
            }
        })
    }

    pub fn inverse(&self) -> Self {
        match self {
            Self::Dense(m) => Self::Dense(m.adjoint()),
            Self::Diagonal(d) => Self::Diagonal(d.iter().map(|x| x.conj()).collect()),
            Self::Blocks { target, blocks } => Self::Blocks { target: *target, blocks: blocks.iter().map(|b| b.adjoint()).collect() },
            Self::Sequence(ops) => Self::Sequence(ops.iter().rev().map(|o| o.inverse()).collect()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex<T>> {
        let n = self.dim();
        match self {
            Self::Dense(m) => m.clone(),
            Self::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Self::Blocks { target, blocks } => {
                let mut m = DMatrix::zeros(n, n);
                for (i, b) in blocks.iter().enumerate() {
                    m.view_mut((i * target, i * target), (*target, *target)).copy_from(b);
                }
                m
            }
            Self::Sequence(ops) => ops.iter().fold(DMatrix::identity(n, n), |acc, o| o.to_dense() * acc),
        }
    }

    /// Largest entry of `|U†U - I|`.
    pub fn unitarity_residual(&self) -> T {
        unitarity_residual(&self.to_dense())
    }

    /// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ U` with the control as the outer index.
    pub fn controlled(&self) -> Self {
        let n = self.dim();
        Self::Blocks { target: n, blocks: vec![DMatrix::identity(n, n), self.to_dense()] }
    }

    /// `self` followed by `next`.
    pub fn then(self, next: Self) -> Self {
        match self {
            Self::Sequence(mut ops) => {
                ops.push(next);
                Self::Sequence(ops)
            }
            first => Self::Sequence(vec![first, next]),
        }
    }
}

pub fn unitarity_residual<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    let n = m.nrows();
    if m.ncols() != n {
        return T::max_value().unwrap_or(T::one());
    }
    let r = m.adjoint() * m - DMatrix::<Complex<T>>::identity(n, n);
    r.iter().map(|z| norm_sqr(z).sqrt()).fold(T::zero(), |a, b| a.max(b))
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c(T::of(re), T::of(im))
}

/// Haar-random unit vector.
pub fn haar_state<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<Complex<T>> {
    let v: Vec<Complex<T>> = (0..dim).map(|_| gaussian(rng)).collect();
    let nrm = v.iter().map(norm_sqr).fold(T::zero(), |a, b| a + b).sqrt();
    v.into_iter().map(|x| x.unscale(nrm)).collect()
}

/// Haar-random unitary by QR of a Gaussian matrix with the phases of `R`'s diagonal removed.
pub fn haar_unitary<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex<T>> {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian::<T, R>(rng));
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..dim {
        let d = r[(j, j)];
        let m = norm_sqr(&d).sqrt();
        let ph = if m > T::zero() { d.unscale(m) } else { cr(T::one()) };
        for i in 0..dim {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// `I - 2vv*` for a Haar-random unit `v`.
pub fn haar_reflection<T: Real, R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<Complex<T>> {
    let v = DVector::from_vec(haar_state::<T, R>(dim, rng));
    DMatrix::identity(dim, dim) - (&v * v.adjoint()).scale(T::of(2.0))
}

/// Orthogonal projector onto a Haar-random subspace of the given rank.
pub fn random_projector<T: Real, R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DMatrix<Complex<T>> {
    let u = haar_unitary::<T, R>(dim, rng);
    let q = u.columns(0, rank.min(dim)).into_owned();
    &q * q.adjoint()
}

/// Eigenphases in `[0, 2π)` and orthonormal eigenvectors (as columns) of a unitary.
#[derive(Clone, Debug)]
pub struct UnitaryEigen<T: Real> {
    pub phases: Vec<T>,
    pub vectors: DMatrix<Complex<T>>,
}

/// Diagonalizes a unitary through the Hermitian matrix `(U+U†)/2 + μ(U-U†)/(2i)`,
/// whose eigenvalues `cos φ + μ sin φ` separate distinct phases for generic `μ`.
pub fn eig_unitary<T: Real>(u: &DMatrix<Complex<T>>) -> Result<UnitaryEigen<T>> {
    let n = u.nrows();
    if u.ncols() != n {
        return invalid("matrix must be square");
    }
    let tol = T::eps().sqrt() * T::of(10.0);
    let ud = u.adjoint();
    for mu in [0.577_350_269_189_625_8, 0.318_309_886_183_790_7, 1.414_213_562_373_095, 0.271_828_182_845_904_5] {
        let herm = (u + &ud).scale(T::of(0.5)) + (u - &ud) * c(T::zero(), -T::of(0.5 * mu));
        let herm = (&herm + herm.adjoint()).scale(T::of(0.5));
        let eig = nalgebra::SymmetricEigen::new(herm);
        let vecs = eig.eigenvectors;
        let mut phases = Vec::with_capacity(n);
        let mut ok = true;
        for j in 0..n {
            let v = vecs.column(j);
            let uv = u * v;
            let lam = v.dotc(&uv);
            let mut ph = lam.im.atan2(lam.re);
            if ph < T::zero() {
                ph += T::two_pi();
            }
            if ph >= T::two_pi() {
                ph -= T::two_pi();
            }
            let e = c(ph.cos(), ph.sin());
            let res = (uv - v * e).iter().map(|z| norm_sqr(z).sqrt()).fold(T::zero(), |a, b| a.max(b));
            if res > tol {
                ok = false;
                break;
            }
            phases.push(ph);
        }
        if ok {
            return Ok(UnitaryEigen { phases, vectors: vecs });
        }
    }
    Err(Error::Precondition("eigendecomposition did not converge to a unitary spectrum".into()))
}

/// Reduces an angle to `(-π, π]`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let two_pi = T::two_pi();
    let mut t = theta % two_pi;
    if t > T::pi() {
        t -= two_pi;
    }
    if t <= -T::pi() {
        t += two_pi;
    }
    t
}

/// Phase distance from 0, `min(φ, 2π - φ)` for `φ ∈ [0, 2π)`.
pub fn phase_distance<T: Real>(phi: T) -> T {
    wrap_angle(phi).abs()
}

/// Probability that `a`-bit phase estimation reports `j` for an eigenphase `φ`
/// when `θ = φ - 2πj/2^a`: `sin²(Nθ/2) / (N² sin²(θ/2))`.
pub fn fejer_kernel<T: Real>(theta: T, a: u32) -> T {
    let n = T::count(1u64 << a);
    let th = wrap_angle(theta);
    let s = (th / T::of(2.0)).sin();
    if s == T::zero() {
        return T::one();
    }
    let num = (n * th / T::of(2.0)).sin();
    (num * num) / (n * n * s * s)
}

/// Outcome distribution of `a`-bit phase estimation for a spectral measure
/// `{(φ_i, w_i)}`.
pub fn phase_distribution<T: Real>(measure: &[(T, T)], a: u32) -> Vec<T> {
    let n = 1usize << a;
    let step = T::two_pi() / T::count(n as u64);
    (0..n)
        .map(|j| {
            let g = step * T::count(j as u64);
            measure.iter().fold(T::zero(), |acc, &(ph, w)| acc + w * fejer_kernel(ph - g, a))
        })
        .collect()
}

/// Exact outcome distribution of `a`-bit phase estimation on `U` from `initial`.
pub fn phase_estimation<T: Real>(u: &UnitaryOp<T>, initial: &[Complex<T>], a: u32) -> Result<Vec<T>> {
    if a == 0 || a > 24 {
        return invalid("ancilla bits must be in 1..=24");
    }
    let m = u.to_dense();
    if m.nrows() != initial.len() {
        return invalid("initial state dimension mismatch");
    }
    if unitarity_residual(&m) >= T::of(1e-8) {
        return Err(Error::Precondition("operator is not unitary".into()));
    }
    let eig = eig_unitary(&m)?;
    let psi = DVector::from_column_slice(initial);
    let measure: Vec<(T, T)> = (0..m.nrows()).map(|j| (eig.phases[j], norm_sqr(&eig.vectors.column(j).dotc(&psi)))).collect();
    Ok(phase_distribution(&measure, a))
}

/// Phase estimation by accumulating `N⁻¹ Σ_x e^{-2πijx/N} U^x ψ` for every `j`;
/// only applies `U`, so it works with any structured operator.
pub fn phase_estimation_by_powers<T: Real>(u: &UnitaryOp<T>, initial: &[Complex<T>], a: u32) -> Result<Vec<T>> {
    if a == 0 || a > 12 {
        return invalid("ancilla bits must be in 1..=12 for the power-accumulation mode");
    }
    let n = 1usize << a;
    let mut acc = vec![vec![cr(T::zero()); initial.len()]; n];
    let mut cur = initial.to_vec();
    let step = T::two_pi() / T::count(n as u64);
    for x in 0..n {
        for (j, slot) in acc.iter_mut().enumerate() {
            let ang = -step * T::count(((j * x) % n) as u64);
            let ph = c(ang.cos(), ang.sin());
            for (s, v) in slot.iter_mut().zip(&cur) {
                *s += v * ph;
            }
        }
        if x + 1 < n {
            cur = u.apply(&cur)?;
        }
    }
    let nn = T::count(n as u64);
    Ok(acc.iter().map(|v| v.iter().map(norm_sqr).fold(T::zero(), |a, b| a + b) / (nn * nn)).collect())
}

/// Literal textbook circuit: `a` ancilla qubits, Hadamards, controlled
/// `U^{2^i}`, inverse Fourier transform on the ancillas, then measurement.
pub fn phase_estimation_circuit<T: Real>(u: &UnitaryOp<T>, initial: &[Complex<T>], a: u32) -> Result<Vec<T>> {
    let d = u.dim();
    if a == 0 || (1usize << a) * d > 4096 {
        return invalid("literal circuit limited to 2^a · dim <= 4096");
    }
    let names: Vec<String> = (0..a).rev().map(|i| format!("E{i}")).collect();
    let mut regs: Vec<(&str, usize)> = names.iter().map(|s| (s.as_str(), 2)).collect();
    regs.push(("S", d));
    let layout = RegisterLayout::new(&regs)?;
    let dim = layout.dim();
    let n = 1usize << a;
    let mut amps = vec![cr(T::zero()); dim];
    amps[..d].copy_from_slice(initial);
    let mut state = StateVector::from_amplitudes(layout.clone(), amps)?;
    let h = T::of(std::f64::consts::FRAC_1_SQRT_2);
    let base = u.to_dense();
    for i in 0..a {
        let stride = layout.stride(layout.position(&format!("E{i}")).expect("ancilla"));
        let mut m = DMatrix::<Complex<T>>::zeros(dim, dim);
        for col in 0..dim {
            let bit = col / stride % 2;
            let other = if bit == 0 { col + stride } else { col - stride };
            m[(col, col)] = cr(if bit == 0 { h } else { -h });
            m[(other, col)] = cr(h);
        }
        state = state.apply(&UnitaryOp::Dense(m))?;
    }
    let mut power = base.clone();
    for i in 0..a {
        let stride = layout.stride(layout.position(&format!("E{i}")).expect("ancilla"));
        let mut m = DMatrix::<Complex<T>>::zeros(dim, dim);
        for blk in 0..dim / d {
            let off = blk * d;
            if off / stride % 2 == 1 {
                m.view_mut((off, off), (d, d)).copy_from(&power);
            } else {
                m.view_mut((off, off), (d, d)).fill_with_identity();
            }
        }
        state = state.apply(&UnitaryOp::Dense(m))?;
        power = &power * &power;
    }
    // Inverse Fourier transform on the ancilla value x = Σ b_i 2^i.
    let nn = T::count(n as u64);
    let mut finv = DMatrix::<Complex<T>>::zeros(n, n);
    for j in 0..n {
        for x in 0..n {
            let ang = -T::two_pi() * T::count(((j * x) % n) as u64) / nn;
            finv[(j, x)] = c(ang.cos(), ang.sin()).unscale(nn.sqrt());
        }
    }
    let full = finv.kronecker(&DMatrix::<Complex<T>>::identity(d, d));
    state = state.apply(&UnitaryOp::Dense(full))?;
    let amps = state.amplitudes();
    Ok((0..n).map(|j| amps[j * d..(j + 1) * d].iter().map(norm_sqr).fold(T::zero(), |a, b| a + b)).collect())
}

/// `rounds` Grover iterates `Q = -A S₀ A⁻¹ S_χ` after `A`.
pub fn amplitude_amplify<T: Real>(a: &UnitaryOp<T>, marked: &dyn Fn(usize) -> bool, rounds: usize) -> UnitaryOp<T> {
    let dim = a.dim();
    let s_chi = UnitaryOp::Diagonal((0..dim).map(|i| cr(if marked(i) { -T::one() } else { T::one() })).collect());
    // -S₀ = 2|0⟩⟨0| - I absorbs the global sign.
    let neg_s0 = UnitaryOp::Diagonal((0..dim).map(|i| cr(if i == 0 { T::one() } else { -T::one() })).collect());
    let inv = a.inverse();
    let mut ops = vec![a.clone()];
    for _ in 0..rounds {
        ops.extend([s_chi.clone(), inv.clone(), neg_s0.clone(), a.clone()]);
    }
    UnitaryOp::Sequence(ops)
}

/// `sin²((2r+1)·asin √p)`.
pub fn amplified_probability<T: Real>(p: T, rounds: usize) -> T {
    let th = p.max(T::zero()).min(T::one()).sqrt().asin();
    let s = (T::count(2 * rounds as u64 + 1) * th).sin();
    s * s
}

/// Outcome of the effective-spectral-gap check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub pass: bool,
}

fn projector_residual<T: Real>(p: &DMatrix<Complex<T>>) -> T {
    let sq = p * p - p;
    let herm = p - p.adjoint();
    sq.iter().chain(herm.iter()).map(|z| norm_sqr(z).sqrt()).fold(T::zero(), |a, b| a.max(b))
}

/// Compares `‖P_δ Π₂ w‖` against `(δ/2)‖w‖`, where `P_δ` projects onto the
/// eigenvectors of `(2Π₂ - I)(2Π₁ - I)` with phase in `[-δ, δ]`.
pub fn spectral_gap_check<T: Real>(p1: &DMatrix<Complex<T>>, p2: &DMatrix<Complex<T>>, w: &[Complex<T>], delta: T) -> Result<GapCheck<T>> {
    let n = p1.nrows();
    if p1.shape() != (n, n) || p2.shape() != (n, n) || w.len() != n {
        return invalid("dimension mismatch");
    }
    let tol = T::of(1e-9);
    if projector_residual(p1) > tol || projector_residual(p2) > tol {
        return Err(Error::Precondition("inputs must be orthogonal projectors".into()));
    }
    let wv = DVector::from_column_slice(w);
    let wn = wv.norm();
    if (p1 * &wv).norm() > tol * wn.max(T::one()) {
        return Err(Error::Precondition("w must lie in the kernel of the first projector".into()));
    }
    if delta < T::zero() {
        return invalid("delta must be non-negative");
    }
    let id = DMatrix::<Complex<T>>::identity(n, n);
    let r1 = p1.scale(T::of(2.0)) - &id;
    let r2 = p2.scale(T::of(2.0)) - &id;
    let eig = eig_unitary(&(r2 * r1))?;
    let x = p2 * &wv;
    let mut acc = T::zero();
    for (j, &ph) in eig.phases.iter().enumerate() {
        if phase_distance(ph) <= delta + tol {
            acc += norm_sqr(&eig.vectors.column(j).dotc(&x));
        }
    }
    let lhs = acc.sqrt();
    let rhs = delta / T::of(2.0) * wn;
    Ok(GapCheck { lhs, rhs, pass: lhs <= rhs + tol })
}

/// Applies `O_f = ⊕_S O_{f,S}` on registers `I` and `W`, with `-I` on the
/// `|∅⟩ = |0⟩` branch of `I`.
pub fn apply_block_oracle<T: Real>(state: &StateVector<T>, oracle: &BlockOracle<T>) -> Result<StateVector<T>> {
    let layout = state.layout();
    let pi = layout.position("I").ok_or_else(|| Error::InvalidParameter("layout needs register I".into()))?;
    let pw = layout.position("W").ok_or_else(|| Error::InvalidParameter("layout needs register W".into()))?;
    if layout.register_dim("I")? != 1 << oracle.n() || layout.register_dim("W")? != oracle.wdim() {
        return invalid("register dimensions do not match the oracle");
    }
    let sw = layout.stride(pw);
    let wd = oracle.wdim();
    let mut out = state.amplitudes().to_vec();
    let mut buf = DVector::<Complex<T>>::zeros(wd);
    for idx in 0..layout.dim() {
        let vals = layout.decode(idx);
        if vals[pw] != 0 {
            continue;
        }
        let s = vals[pi];
        for w in 0..wd {
            buf[w] = out[idx + w * sw];
        }
        let res = if s == 0 { -buf.clone() } else { oracle.block(s as u64) * &buf };
        for w in 0..wd {
            out[idx + w * sw] = res[w];
        }
    }
    StateVector::from_amplitudes(layout.clone(), out)
}

/// `V⁻¹ Ô⁻¹ R₊ Ô V` on the workspace extended by one basis state `|new⟩`,
/// where `Ô = O ⊕ 1`, `V` maps `|0⟩ ↦ |+⟩ = (|0⟩ + |new⟩)/√2` and `R₊ = 2|+⟩⟨+| - I`.
pub fn reflectionize_block<T: Real>(o: &DMatrix<Complex<T>>) -> DMatrix<Complex<T>> {
    let w = o.nrows();
    let d = w + 1;
    let h = T::of(std::f64::consts::FRAC_1_SQRT_2);
    let mut v = DMatrix::<Complex<T>>::identity(d, d);
    v[(0, 0)] = cr(h);
    v[(0, w)] = cr(h);
    v[(w, 0)] = cr(h);
    v[(w, w)] = cr(-h);
    let mut ohat = DMatrix::<Complex<T>>::identity(d, d);
    ohat.view_mut((0, 0), (w, w)).copy_from(o);
    let mut plus = DVector::<Complex<T>>::zeros(d);
    plus[0] = cr(h);
    plus[w] = cr(h);
    let rplus = (&plus * plus.adjoint()).scale(T::of(2.0)) - DMatrix::identity(d, d);
    let ov = &ohat * &v;
    ov.adjoint() * rplus * ov
}

/// Blockwise [`reflectionize_block`]; the promise is preserved.
pub fn reflectionize<T: Real>(oracle: &BlockOracle<T>) -> BlockOracle<T> {
    oracle.map_blocks(oracle.wdim() + 1, |b| reflectionize_block(b), true)
}

/// `⟨0|O'|0⟩ = |1 + ⟨0|O|0⟩|²/2 - 1` for the reflectionized block.
pub fn reflectionized_amplitude<T: Real>(a: Complex<T>) -> T {
    norm_sqr(&(a + cr(T::one()))) / T::of(2.0) - T::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cd(x: f64) -> Complex<f64> {
        cr(x)
    }

    fn max_abs(v: &[f64], w: &[f64]) -> f64 {
        v.iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn layout_indexing() {
        let l = RegisterLayout::new(&[("A", 3), ("B", 2), ("C", 5)]).unwrap();
        assert_eq!(l.dim(), 30);
        let i = l.index(&[2, 1, 4]).unwrap();
        assert_eq!(i, 2 * 10 + 5 + 4);
        assert_eq!(l.decode(i), vec![2, 1, 4]);
        assert_eq!(l.stride(0), 10);
        assert!(RegisterLayout::new(&[("A", 2), ("A", 2)]).is_err());
        assert!(RegisterLayout::with_cap(&[("A", 1 << 13), ("B", 1 << 12)], MAX_DIM).is_err());
    }

    #[test]
    fn haar_samples_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..=8 {
            let u = haar_unitary::<f64, _>(d, &mut rng);
            assert!(unitarity_residual(&u) < 1e-10);
            let r = haar_reflection::<f64, _>(d, &mut rng);
            assert!(unitarity_residual(&r) < 1e-10);
            assert!((&r * &r - DMatrix::identity(d, d)).norm() < 1e-10);
        }
    }

    #[test]
    fn eigen_reconstructs_random_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for d in [1, 2, 5, 16] {
            let u = haar_unitary::<f64, _>(d, &mut rng);
            let e = eig_unitary(&u).unwrap();
            let diag = DMatrix::from_diagonal(&DVector::from_iterator(d, e.phases.iter().map(|p| c(p.cos(), p.sin()))));
            let rec = &e.vectors * diag * e.vectors.adjoint();
            assert!((rec - u).norm() < 1e-9);
        }
        // Degenerate spectrum with conjugate pairs.
        let u = DMatrix::from_diagonal(&DVector::from_vec(vec![c(0.0, 1.0), c(0.0, -1.0), c(0.0, 1.0), cd(-1.0)]));
        let e = eig_unitary(&u).unwrap();
        let mut ph = e.phases.clone();
        ph.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let want = [std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, std::f64::consts::PI, 1.5 * std::f64::consts::PI];
        assert!(max_abs(&ph, &want) < 1e-12);
    }

    #[test]
    fn phase_estimation_examples() {
        let p = phase_estimation(&UnitaryOp::<f64>::identity(3), &[cd(0.6), cd(0.8), cd(0.0)], 4).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        let ph = std::f64::consts::TAU * 3.0 / 8.0;
        let u = UnitaryOp::Diagonal(vec![c(ph.cos(), ph.sin()); 2]);
        let p = phase_estimation(&u, &[cd(1.0), cd(0.0)], 3).unwrap();
        assert!((p[3] - 1.0).abs() < 1e-12);
        let phi = std::f64::consts::TAU * 0.3;
        let u = UnitaryOp::Diagonal(vec![cd(1.0), c(phi.cos(), phi.sin())]);
        let p = phase_estimation(&u, &[cd(0.0), cd(1.0)], 4).unwrap();
        let argmax = (0..16).max_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap()).unwrap();
        assert_eq!(argmax, 5);
        assert!(p[4] + p[5] >= 8.0 / std::f64::consts::PI.powi(2));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let bad = UnitaryOp::Dense(DMatrix::from_element(2, 2, cd(1.0)));
        assert!(phase_estimation(&bad, &[cd(1.0), cd(0.0)], 2).is_err());
    }

    #[test]
    fn phase_estimation_matches_literal_circuit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, a) in [(1, 1), (2, 3), (4, 2), (8, 4), (16, 4), (3, 4)] {
            let u = UnitaryOp::Dense(haar_unitary::<f64, _>(d, &mut rng));
            let psi = haar_state::<f64, _>(d, &mut rng);
            let exact = phase_estimation(&u, &psi, a).unwrap();
            let lit = phase_estimation_circuit(&u, &psi, a).unwrap();
            let pw = phase_estimation_by_powers(&u, &psi, a).unwrap();
            assert!(max_abs(&exact, &lit) < 1e-9, "d={d} a={a}");
            assert!(max_abs(&exact, &pw) < 1e-9);
            assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn amplification_examples() {
        // A prepares cos θ|0⟩ + sin θ|1⟩ with marked = {1}.
        let prep = |p: f64| {
            let (s, c0) = (p.sqrt(), (1.0 - p).sqrt());
            UnitaryOp::Dense(DMatrix::from_row_slice(2, 2, &[cd(c0), cd(-s), cd(s), cd(c0)]))
        };
        let marked = |i: usize| i == 1;
        let start = StateVector::basis(RegisterLayout::new(&[("X", 2)]).unwrap(), 0).unwrap();
        for r in 0..6 {
            let q = amplitude_amplify(&prep(0.0), &marked, r);
            assert_eq!(start.apply(&q).unwrap().probability(marked), 0.0);
            let q = amplitude_amplify(&prep(1.0), &marked, r);
            assert!((start.apply(&q).unwrap().probability(marked) - 1.0).abs() < 1e-12);
        }
        let p = (std::f64::consts::PI / 10.0).sin().powi(2);
        let q = amplitude_amplify(&prep(p), &marked, 2);
        assert!((start.apply(&q).unwrap().probability(marked) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn amplification_matches_closed_form_grid() {
        let marked = |i: usize| i % 3 == 1;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let start = StateVector::basis(RegisterLayout::new(&[("X", 6)]).unwrap(), 0).unwrap();
        for _ in 0..10 {
            let a = UnitaryOp::Dense(haar_unitary::<f64, _>(6, &mut rng));
            let p = start.apply(&a).unwrap().probability(marked);
            for r in 0..8 {
                let got = start.apply(&amplitude_amplify(&a, &marked, r)).unwrap();
                assert!((got.norm() - 1.0).abs() < 1e-10);
                assert!((got.probability(marked) - amplified_probability(p, r)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gap_check_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_projector::<f64, _>(6, 3, &mut rng);
        let id = DMatrix::<Complex<f64>>::identity(6, 6);
        let w: Vec<Complex<f64>> = ((&id - &p) * DVector::from_vec(haar_state::<f64, _>(6, &mut rng))).as_slice().to_vec();
        let g = spectral_gap_check(&p, &p, &w, 0.3).unwrap();
        assert!(g.lhs < 1e-12 && g.pass);
        let p2 = random_projector::<f64, _>(6, 2, &mut rng);
        let g = spectral_gap_check(&p, &p2, &w, 0.0).unwrap();
        assert!(g.lhs < 1e-9 && g.pass);
        assert!(spectral_gap_check(&p, &p2, &haar_state::<f64, _>(6, &mut rng), 0.1).is_err());
    }

    #[test]
    fn gap_lemma_random_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..60 {
            let d = rng.random_range(2..=24);
            let p1 = random_projector::<f64, _>(d, rng.random_range(0..=d), &mut rng);
            let p2 = random_projector::<f64, _>(d, rng.random_range(0..=d), &mut rng);
            let id = DMatrix::<Complex<f64>>::identity(d, d);
            let w: Vec<Complex<f64>> = ((&id - &p1) * DVector::from_vec(haar_state::<f64, _>(d, &mut rng))).as_slice().to_vec();
            let delta = rng.random_range(0.0..1.0);
            assert!(spectral_gap_check(&p1, &p2, &w, delta).unwrap().pass);
        }
    }

    #[test]
    fn reflectionize_examples() {
        let m = DMatrix::<Complex<f64>>::identity(2, 2);
        let r = reflectionize_block(&m);
        assert!((r[(0, 0)] - cd(1.0)).norm() < 1e-12);
        let r = reflectionize_block(&(-m));
        assert!((r[(0, 0)] + cd(1.0)).norm() < 1e-12);
        let s = reflectionize_block(&DMatrix::from_element(1, 1, cd(-1.0)));
        assert!((s - DMatrix::from_diagonal(&DVector::from_vec(vec![cd(-1.0), cd(1.0)]))).norm() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 1..=5 {
            let u = haar_unitary::<f64, _>(d, &mut rng);
            let r = reflectionize_block(&u);
            assert!((&r * &r - DMatrix::identity(d + 1, d + 1)).norm() < 1e-10);
            let e = eig_unitary(&r).unwrap();
            for ph in e.phases {
                assert!(phase_distance(ph).min((ph - std::f64::consts::PI).abs()) < 1e-8);
            }
            assert!((r[(0, 0)].re - reflectionized_amplitude(u[(0, 0)])).abs() < 1e-12);
            assert!(r[(0, 0)].im.abs() < 1e-12);
        }
    }

    #[test]
    fn fejer_kernel_limits() {
        assert_eq!(fejer_kernel(0.0f64, 5), 1.0);
        assert!((fejer_kernel(std::f64::consts::TAU, 5) - 1.0).abs() < 1e-12);
        assert!(fejer_kernel(std::f64::consts::TAU / 32.0, 5) < 1e-20);
        let m: Vec<(f64, f64)> = vec![(1.234, 0.5), (5.0, 0.5)];
        assert!((phase_distribution(&m, 6).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
