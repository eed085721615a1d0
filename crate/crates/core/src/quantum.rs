//! Dense small-dimension quantum numerics: states, density operators, the
//! measurement channels used by the extractor constructions, distances and
//! entropies. Everything here is eigenvalue-exact at the dimensions the
//! laboratory runs at (total state dimension <= 2^12, density matrices up to
//! 128 x 128), so these routines serve as the oracle layer for every bound
//! checked elsewhere in the crate.

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = nalgebra::Complex<f64>;

/// Norm / probability-sum tolerance.
pub const NORM_TOL: f64 = 1e-12;
/// Trace tolerance for density operators; inputs within this of unit trace
/// are renormalized, anything further off is rejected.
pub const TRACE_TOL: f64 = 1e-10;
/// Eigenvalues of nominally PSD matrices above -EIG_CLAMP are clamped to 0.
pub const EIG_CLAMP: f64 = 1e-10;
/// Relative cutoff for generalized inverses: eigenvalues below this times
/// the largest eigenvalue count as zero.
pub const GEN_INV_REL: f64 = 1e-12;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Probability vector with exact total-variation and entropy queries.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(mut probs: Vec<f64>) -> Result<Distribution> {
        let mut sum = 0.0;
        for p in probs.iter_mut() {
            if *p < 0.0 {
                if *p < -NORM_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "negative probability {p:.3e}"
                    )));
                }
                *p = 0.0;
            }
            sum += *p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(Distribution { probs })
    }

    pub fn uniform(n: usize) -> Distribution {
        Distribution {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Distribution {
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Distribution { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Total variation distance to another distribution of the same length.
    pub fn tv(&self, other: &Distribution) -> f64 {
        assert_eq!(self.len(), other.len(), "distribution length mismatch");
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn tv_uniform(&self) -> f64 {
        let u = 1.0 / self.len() as f64;
        0.5 * self.probs.iter().map(|p| (p - u).abs()).sum::<f64>()
    }

    /// Shannon entropy in bits.
    pub fn shannon(&self) -> f64 {
        shannon(&self.probs)
    }

    /// Min-entropy in bits.
    pub fn hmin(&self) -> f64 {
        -self.probs.iter().cloned().fold(0.0_f64, f64::max).log2()
    }
}

pub fn shannon(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

/// Binary entropy h(p).
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidParameter(format!("bad dims {dims:?}")));
    }
    Ok(dims.iter().product())
}

/// Pure state over a tensor-factored dimension list. The first factor is the
/// most significant in the flat index: for dims [dA, dB] the basis label is
/// a * dB + b.
#[derive(Clone, Debug)]
pub struct StateVector {
    dims: Vec<usize>,
    amps: DVector<C64>,
}

impl StateVector {
    pub fn new(dims: Vec<usize>, amps: DVector<C64>) -> Result<StateVector> {
        let total = check_dims(&dims)?;
        if amps.len() != total {
            return Err(Error::DimensionMismatch(format!(
                "{} amplitudes for dims {:?}",
                amps.len(),
                dims
            )));
        }
        let norm = amps.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "state norm {norm} is not 1"
            )));
        }
        let amps = amps.map(|z| z / norm);
        Ok(StateVector { dims, amps })
    }

    pub fn basis_state(dims: Vec<usize>, index: usize) -> Result<StateVector> {
        let total = check_dims(&dims)?;
        if index >= total {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range {total}"
            )));
        }
        let mut amps = DVector::from_element(total, c(0.0));
        amps[index] = c(1.0);
        Ok(StateVector { dims, amps })
    }

    pub fn uniform_superposition(dims: Vec<usize>) -> Result<StateVector> {
        let total = check_dims(&dims)?;
        let a = c(1.0 / (total as f64).sqrt());
        Ok(StateVector {
            dims,
            amps: DVector::from_element(total, a),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &DVector<C64> {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut DVector<C64> {
        &mut self.amps
    }

    /// Same amplitudes under a different tensor factorization.
    pub fn reshaped(&self, dims: Vec<usize>) -> Result<StateVector> {
        let total = check_dims(&dims)?;
        if total != self.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot reshape dim {} into {:?}",
                self.total_dim(),
                dims
            )));
        }
        Ok(StateVector {
            dims,
            amps: self.amps.clone(),
        })
    }

    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.dotc(&other.amps)
    }

    /// Outcome distribution of a computational-basis measurement on the
    /// selected tensor factors (marginal over the rest).
    pub fn measure_marginal(&self, keep: &[usize]) -> Result<Distribution> {
        let st = strides(&self.dims);
        let keep_dims = gather_dims(&self.dims, keep)?;
        let out_len: usize = keep_dims.iter().product();
        let mut probs = vec![0.0; out_len];
        for (flat, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            probs[marginal_index(flat, &self.dims, &st, keep)] += p;
        }
        Distribution::new(probs)
    }

    pub fn to_density(&self) -> DensityOperator {
        let mat = &self.amps * self.amps.adjoint();
        DensityOperator {
            dims: self.dims.clone(),
            mat,
        }
    }
}

fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

fn gather_dims(dims: &[usize], keep: &[usize]) -> Result<Vec<usize>> {
    if keep.is_empty() {
        return Err(Error::InvalidParameter("no subsystems selected".into()));
    }
    let mut out = Vec::with_capacity(keep.len());
    for &k in keep {
        if k >= dims.len() {
            return Err(Error::InvalidParameter(format!(
                "subsystem index {k} out of range for {} factors",
                dims.len()
            )));
        }
        out.push(dims[k]);
    }
    Ok(out)
}

fn marginal_index(flat: usize, dims: &[usize], strides: &[usize], keep: &[usize]) -> usize {
    let mut out = 0;
    for &k in keep {
        out = out * dims[k] + (flat / strides[k]) % dims[k];
    }
    out
}

/// Hermitian PSD trace-1 matrix over a tensor-factored dimension list.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    dims: Vec<usize>,
    mat: DMatrix<C64>,
}

impl DensityOperator {
    /// Validates Hermiticity and trace; renormalizes a trace within
    /// [`TRACE_TOL`] of 1 and rejects anything further off. Positivity is
    /// checked where operations rely on it.
    pub fn new(dims: Vec<usize>, mat: DMatrix<C64>) -> Result<DensityOperator> {
        let total = check_dims(&dims)?;
        if mat.nrows() != total || mat.ncols() != total {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix for dims {:?}",
                mat.nrows(),
                mat.ncols(),
                dims
            )));
        }
        let herm_dev = (&mat - mat.adjoint()).norm() / (mat.norm() + 1.0);
        if herm_dev > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "matrix is not Hermitian (relative deviation {herm_dev:.3e})"
            )));
        }
        let tr = mat.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidParameter(format!(
                "trace {} is not 1 within {TRACE_TOL:e}",
                tr.re
            )));
        }
        let mat = mat.map(|z| z / tr.re);
        Ok(DensityOperator { dims, mat })
    }

    pub(crate) fn from_raw(dims: Vec<usize>, mat: DMatrix<C64>) -> DensityOperator {
        DensityOperator { dims, mat }
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> DensityOperator {
        let total: usize = dims.iter().product();
        DensityOperator {
            dims,
            mat: DMatrix::identity(total, total).map(|z: C64| z / c(total as f64)),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total_dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn reshaped(&self, dims: Vec<usize>) -> Result<DensityOperator> {
        let total = check_dims(&dims)?;
        if total != self.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot reshape dim {} into {:?}",
                self.total_dim(),
                dims
            )));
        }
        Ok(DensityOperator {
            dims,
            mat: self.mat.clone(),
        })
    }

    /// rho_A tensor rho_B.
    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityOperator {
            dims,
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Standard partial trace keeping the listed factors (in their original
    /// order).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        let keep_dims = gather_dims(&self.dims, keep)?;
        let st = strides(&self.dims);
        let traced: Vec<usize> = (0..self.dims.len()).filter(|i| !keep.contains(i)).collect();
        let out_len: usize = keep_dims.iter().product();
        let traced_len: usize = traced.iter().map(|&i| self.dims[i]).product();
        let kept_strides = strides(&keep_dims);
        let mut out = DMatrix::from_element(out_len, out_len, c(0.0));
        for ki in 0..out_len {
            for kj in 0..out_len {
                let mut acc = C64::new(0.0, 0.0);
                for t in 0..traced_len {
                    let fi = embed_index(ki, t, keep, &traced, &self.dims, &st, &kept_strides);
                    let fj = embed_index(kj, t, keep, &traced, &self.dims, &st, &kept_strides);
                    acc += self.mat[(fi, fj)];
                }
                out[(ki, kj)] = acc;
            }
        }
        Ok(DensityOperator {
            dims: keep_dims,
            mat: out,
        })
    }

    /// Outcome distribution of a computational-basis measurement on the
    /// selected factors.
    pub fn measure_marginal(&self, keep: &[usize]) -> Result<Distribution> {
        let keep_dims = gather_dims(&self.dims, keep)?;
        let st = strides(&self.dims);
        let out_len: usize = keep_dims.iter().product();
        let mut probs = vec![0.0; out_len];
        for flat in 0..self.total_dim() {
            probs[marginal_index(flat, &self.dims, &st, keep)] += self.mat[(flat, flat)].re;
        }
        Distribution::new(probs)
    }

    /// Minimum eigenvalue; cheap PSD check for oracles that need it.
    pub fn min_eigenvalue(&self) -> f64 {
        herm_eigenvalues(&self.mat)
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

#[allow(clippy::too_many_arguments)]
fn embed_index(
    kept_flat: usize,
    traced_flat: usize,
    keep: &[usize],
    traced: &[usize],
    dims: &[usize],
    st: &[usize],
    kept_strides: &[usize],
) -> usize {
    let mut full = 0;
    for (pos, &k) in keep.iter().enumerate() {
        let idx = (kept_flat / kept_strides[pos]) % dims[k];
        full += idx * st[k];
    }
    let mut rem = traced_flat;
    for &t in traced.iter().rev() {
        full += (rem % dims[t]) * st[t];
        rem /= dims[t];
    }
    full
}

/// Measurement map T: measure A = A1 A2 in the computational basis, keep the
/// (classical) A1 outcome, discard A2. Input dims must factor as
/// dA1 * dA2 * dE; the output is classical on A1 with dims [dA1, dE].
pub fn meas_map_t(
    rho: &DensityOperator,
    d_a1: usize,
    d_a2: usize,
    d_e: usize,
) -> Result<DensityOperator> {
    if rho.total_dim() != d_a1 * d_a2 * d_e {
        return Err(Error::DimensionMismatch(format!(
            "total dim {} does not factor as {d_a1}*{d_a2}*{d_e}",
            rho.total_dim()
        )));
    }
    let m = &rho.mat;
    let out_len = d_a1 * d_e;
    let mut out = DMatrix::from_element(out_len, out_len, c(0.0));
    for a1 in 0..d_a1 {
        for e1 in 0..d_e {
            for e2 in 0..d_e {
                let mut acc = C64::new(0.0, 0.0);
                for a2 in 0..d_a2 {
                    let base = (a1 * d_a2 + a2) * d_e;
                    acc += m[(base + e1, base + e2)];
                }
                out[(a1 * d_e + e1, a1 * d_e + e2)] = acc;
            }
        }
    }
    Ok(DensityOperator {
        dims: vec![d_a1, d_e],
        mat: out,
    })
}

/// Conjugate a density operator on its leading factor: (U x 1_E) rho (..)^dag
/// where U is d_a x d_a and rho has total dimension d_a * d_e.
pub fn conjugate_on_first(rho: &DensityOperator, u: &DMatrix<C64>) -> Result<DensityOperator> {
    let d_a = u.nrows();
    let total = rho.total_dim();
    if !total.is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!(
            "dim {total} not divisible by operator dim {d_a}"
        )));
    }
    let d_e = total / d_a;
    let big = u.kronecker(&DMatrix::identity(d_e, d_e));
    let mat = &big * &rho.mat * big.adjoint();
    Ok(DensityOperator {
        dims: rho.dims.clone(),
        mat,
    })
}

fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).map(|z| z / c(2.0))
}

fn herm_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    hermitize(m)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .collect()
}

fn herm_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = hermitize(m).symmetric_eigen();
    (
        eig.eigenvalues.iter().cloned().collect(),
        eig.eigenvectors,
    )
}

/// Apply f to the eigenvalues of a Hermitian matrix.
fn herm_apply(m: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let (vals, vecs) = herm_eigen(m);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| c(f(v))),
    ));
    &vecs * d * vecs.adjoint()
}

fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    herm_apply(m, |v| if v > 0.0 { v.sqrt() } else { 0.0 })
}

/// 1/2 ||a - b||_1 via Hermitian eigendecomposition.
pub fn trace_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.total_dim() != b.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between dims {} and {}",
            a.total_dim(),
            b.total_dim()
        )));
    }
    Ok(0.5 * trace_norm(&(&a.mat - &b.mat)))
}

/// ||m||_1 for Hermitian m.
pub fn trace_norm(m: &DMatrix<C64>) -> f64 {
    herm_eigenvalues(m).iter().map(|v| v.abs()).sum()
}

/// Uhlmann fidelity F(a, b) = || sqrt(a) sqrt(b) ||_1.
pub fn fidelity(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.total_dim() != b.total_dim() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity between dims {} and {}",
            a.total_dim(),
            b.total_dim()
        )));
    }
    let sa = psd_sqrt(&a.mat);
    let inner = &sa * &b.mat * &sa;
    let f = herm_eigenvalues(&inner)
        .iter()
        .map(|&v| if v > 0.0 { v.sqrt() } else { 0.0 })
        .sum::<f64>();
    Ok(f.min(1.0))
}

/// Purified distance P = sqrt(1 - F^2) for normalized states.
pub fn purified_distance(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    let f = fidelity(a, b)?;
    Ok((1.0 - f * f).max(0.0).sqrt())
}

/// Generalized inverse power sigma^exponent, treating eigenvalues below
/// [`GEN_INV_REL`] times the largest as zero.
fn gen_inv_pow(sigma: &DMatrix<C64>, exponent: f64) -> Result<DMatrix<C64>> {
    let (vals, vecs) = herm_eigen(sigma);
    let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    if vals.iter().any(|&v| v < -EIG_CLAMP) {
        return Err(Error::NotPositiveSemidefinite(
            vals.iter().cloned().fold(f64::INFINITY, f64::min),
        ));
    }
    let cut = GEN_INV_REL * vmax;
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        vals.len(),
        vals.iter()
            .map(|&v| if v > cut { c(v.powf(exponent)) } else { c(0.0) }),
    ));
    Ok(&vecs * d * vecs.adjoint())
}

fn check_cond_input(rho: &DensityOperator, sigma: &DensityOperator, d_a: usize) -> Result<usize> {
    let total = rho.total_dim();
    if d_a == 0 || !total.is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!(
            "dim {total} does not split off an A factor of dim {d_a}"
        )));
    }
    let d_e = total / d_a;
    if sigma.total_dim() != d_e {
        return Err(Error::DimensionMismatch(format!(
            "conditioning state has dim {}, expected {d_e}",
            sigma.total_dim()
        )));
    }
    let min = rho.min_eigenvalue();
    if min < -EIG_CLAMP {
        return Err(Error::NotPositiveSemidefinite(min));
    }
    Ok(d_e)
}

/// Relative conditional min-entropy
/// Hmin(A|E)_{rho|sigma} = -log lmax((1 x s^{-1/2}) rho (1 x s^{-1/2})).
///
/// At sigma = rho_E this is a certified lower bound on Hmin(A|E)_rho.
pub fn hmin_rel(rho: &DensityOperator, sigma: &DensityOperator, d_a: usize) -> Result<f64> {
    check_cond_input(rho, sigma, d_a)?;
    let s = gen_inv_pow(&sigma.mat, -0.5)?;
    let w = DMatrix::identity(d_a, d_a).kronecker(&s);
    let m = &w * &rho.mat * &w;
    let lmax = herm_eigenvalues(&m).into_iter().fold(0.0_f64, f64::max);
    Ok(-lmax.log2())
}

/// Conditional collision entropy
/// H2(A|E)_{rho|sigma} = -log tr[((1 x s^{-1/4}) rho (1 x s^{-1/4}))^2].
pub fn h2_rel(rho: &DensityOperator, sigma: &DensityOperator, d_a: usize) -> Result<f64> {
    check_cond_input(rho, sigma, d_a)?;
    let s = gen_inv_pow(&sigma.mat, -0.25)?;
    let w = DMatrix::identity(d_a, d_a).kronecker(&s);
    let m = &w * &rho.mat * &w;
    let tr2: f64 = m.iter().map(|z| z.norm_sqr()).sum();
    Ok(-tr2.log2())
}

/// Von Neumann entropy in bits.
pub fn von_neumann(rho: &DensityOperator) -> f64 {
    herm_eigenvalues(&rho.mat)
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

/// H(A|E) = H(AE) - H(E) for rho with total dimension d_a * d_e.
pub fn von_neumann_cond(rho: &DensityOperator, d_a: usize) -> Result<f64> {
    let total = rho.total_dim();
    if d_a == 0 || !total.is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!(
            "dim {total} does not split off an A factor of dim {d_a}"
        )));
    }
    let d_e = total / d_a;
    let re = rho.reshaped(vec![d_a, d_e])?;
    let rho_e = re.partial_trace(&[1])?;
    Ok(von_neumann(rho) - von_neumann(&rho_e))
}

/// Nearest orthonormal set to a family of unit vectors, via the polar part
/// U V^dag of the SVD of the column matrix. Errors on rank-deficient input.
pub fn orthogonalize(vectors: &[DVector<C64>]) -> Result<Vec<DVector<C64>>> {
    let s = vectors.len();
    if s == 0 {
        return Ok(Vec::new());
    }
    let d = vectors[0].len();
    if s > d {
        return Err(Error::InvalidParameter(format!(
            "{s} vectors in dimension {d} cannot be orthogonalized"
        )));
    }
    if vectors.iter().any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch("ragged vector family".into()));
    }
    let x = DMatrix::from_fn(d, s, |i, j| vectors[j][i]);
    let svd = x.svd(true, true);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smin < 1e-10 {
        return Err(Error::RankDeficient(smin));
    }
    let y = svd.u.as_ref().unwrap() * svd.v_t.as_ref().unwrap();
    Ok((0..s).map(|j| y.column(j).into_owned()).collect())
}

fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-random pure state: normalized complex Gaussian vector.
pub fn haar_state(dims: Vec<usize>, rng: &mut impl Rng) -> StateVector {
    let total: usize = dims.iter().product();
    let mut amps = DVector::from_fn(total, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let norm = amps.norm();
    amps /= c(norm);
    StateVector { dims, amps }
}

/// Haar-random unitary: QR of a Ginibre matrix with the R-diagonal phases
/// fixed so the distribution is exactly invariant.
pub fn haar_unitary(d: usize, rng: &mut impl Rng) -> DMatrix<C64> {
    let g = ginibre(d, d, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / c(rjj.norm())
        } else {
            c(1.0)
        };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random mixed state: normalized Wishart G G^dag with the given number of
/// Ginibre columns (rank). rank = total dim gives the Hilbert-Schmidt
/// ensemble.
pub fn random_density(dims: Vec<usize>, rank: usize, rng: &mut impl Rng) -> DensityOperator {
    let total: usize = dims.iter().product();
    let g = ginibre(total, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator {
        dims,
        mat: m.map(|z| z / c(tr)),
    }
}

/// Swap operator F on d x d, F |a b> = |b a>.
pub fn swap_operator(d: usize) -> DMatrix<C64> {
    let mut f = DMatrix::from_element(d * d, d * d, c(0.0));
    for a in 0..d {
        for b in 0..d {
            f[(a * d + b, b * d + a)] = c(1.0);
        }
    }
    f
}
