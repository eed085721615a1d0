//! Mutually unbiased basis ensembles: exact constructions from binary field
//! arithmetic, approximate constructions from Hadamard patterns, and the
//! verification oracles for their defining and 2-design properties.
//!
//! A member unitary is either a staged circuit on qubits (local gates, a
//! Z4 diagonal phase, bit permutations) or a dense matrix. The staged form
//! applies in O(d n) amplitude operations per stage, never O(d^2); the
//! counters returned by [`Member::apply_counted`] make that checkable.
//!
//! Qubit indexing: qubit 0 is the most significant bit of the computational
//! basis label, so a register split "first m qubits / rest" matches the
//! head/tail split of [`crate::extractor::BitPermutation`].

use crate::extractor::BitPermutation;
use crate::gf::FieldCtx;
use crate::quantum::{StateVector, C64};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Single-qubit basis-change gates available in local stages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalGate {
    /// Identity.
    I,
    /// Hadamard.
    H,
    /// diag(1, i) H: the third basis of the exact single-qubit triple.
    DHad,
    /// (1/sqrt 2) [[1, i], [i, 1]]: the third basis of the qudit triple used
    /// by the bitwise extractor and the erasure protocol.
    V2,
}

impl LocalGate {
    /// 2x2 matrix of the gate.
    pub fn matrix(self) -> DMatrix<C64> {
        let s = FRAC_1_SQRT_2;
        match self {
            LocalGate::I => DMatrix::identity(2, 2),
            LocalGate::H => DMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)]),
            LocalGate::DHad => {
                DMatrix::from_row_slice(2, 2, &[c(s), c(s), C64::new(0.0, s), C64::new(0.0, -s)])
            }
            LocalGate::V2 => {
                DMatrix::from_row_slice(2, 2, &[c(s), C64::new(0.0, s), C64::new(0.0, s), c(s)])
            }
        }
    }
}

/// One stage of a staged unitary, acting on a window of qubits starting at
/// `offset` (counted from the most significant qubit).
#[derive(Clone, Debug)]
pub struct Stage {
    pub offset: usize,
    pub kind: StageKind,
}

#[derive(Clone, Debug)]
pub enum StageKind {
    /// One gate per qubit in the window.
    Local(Vec<LocalGate>),
    /// Z4-valued diagonal phase v -> i^{T(v)} with T given by the alpha
    /// vector of the quadratic form; `exps` caches the i-exponent per window
    /// label so application is O(d).
    Phase { alpha: Vec<u8>, exps: Vec<u8> },
    /// Permutation of the window's computational labels, with forward and
    /// inverse lookup tables cached.
    Perm {
        perm: BitPermutation,
        table: Vec<u32>,
        inv_table: Vec<u32>,
    },
}

/// Operation counts of one staged application; the performance invariant is
/// that these grow like d * n, not d^2.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCount {
    /// 2x2 gate applications (each touching two amplitudes).
    pub butterflies: u64,
    /// Scalar phase multiplications.
    pub phase_mults: u64,
    /// Amplitude moves from permutation or dense stages.
    pub moves: u64,
}

impl OpCount {
    pub fn total(&self) -> u64 {
        self.butterflies + self.phase_mults + self.moves
    }
}

/// The quadratic form T_u(v) = v^T N_u v mod 4 in its convolution form over
/// the alpha vector: T(v) = sum_z (sum_{x<=z} v_x v_{z-x}) alpha(z) mod 4.
pub fn quadratic_form_t(alpha: &[u8], v: u64) -> u8 {
    let n = alpha.len().div_ceil(2);
    let mut total = 0u32;
    for (z, &a) in alpha.iter().enumerate() {
        if a == 0 {
            continue;
        }
        let mut conv = 0u32;
        let lo = z.saturating_sub(n - 1);
        for x in lo..=z.min(n - 1) {
            conv += (((v >> x) & 1) * ((v >> (z - x)) & 1)) as u32;
        }
        total += conv * a as u32;
    }
    (total % 4) as u8
}

/// Alpha vector of the quadratic form from the field multiplication table:
/// alpha_u(z) = sum_l u_l m_l(z) (integer sum, stored mod 4), where
/// theta^z = sum_l m_l(z) theta^l in GF(2^n) with theta = X. The table entry
/// N_u(x, y) depends only on x + y, which is what makes the vector form
/// possible.
pub fn mub_alpha_vector(ctx: &FieldCtx, u: u64) -> Vec<u8> {
    let n = ctx.degree() as usize;
    let mut alpha = Vec::with_capacity(2 * n - 1);
    for z in 0..(2 * n - 1) {
        // coefficients of X^z mod the modulus polynomial
        let mut p = 1u64 << z;
        let modulus = ctx.modulus();
        while p >> ctx.degree() != 0 {
            let dp = 63 - p.leading_zeros();
            p ^= modulus << (dp - ctx.degree());
        }
        let mut s = 0u32;
        for l in 0..n {
            s += (((u >> l) & 1) * ((p >> l) & 1)) as u32;
        }
        alpha.push((s % 4) as u8);
    }
    alpha
}

impl Stage {
    pub fn local(offset: usize, gates: Vec<LocalGate>) -> Stage {
        Stage {
            offset,
            kind: StageKind::Local(gates),
        }
    }

    /// Diagonal phase stage from an alpha vector of length 2w - 1.
    pub fn phase(offset: usize, alpha: Vec<u8>) -> Result<Stage> {
        if alpha.len() % 2 != 1 {
            return Err(Error::InvalidParameter(format!(
                "alpha vector length {} is not 2w - 1",
                alpha.len()
            )));
        }
        let w = alpha.len().div_ceil(2);
        let exps = (0..(1u64 << w))
            .map(|v| quadratic_form_t(&alpha, v))
            .collect();
        Ok(Stage {
            offset,
            kind: StageKind::Phase { alpha, exps },
        })
    }

    /// Permutation stage; the window width is the permutation's bit width.
    pub fn perm(offset: usize, perm: BitPermutation) -> Result<Stage> {
        let w = perm.n_bits();
        if w > 16 {
            return Err(Error::InvalidParameter(format!(
                "dense application of a {w}-bit permutation stage is out of scope"
            )));
        }
        let table: Vec<u32> = (0..(1u64 << w)).map(|x| perm.forward(x) as u32).collect();
        let mut inv_table = vec![0u32; table.len()];
        for (x, &y) in table.iter().enumerate() {
            inv_table[y as usize] = x as u32;
        }
        Ok(Stage {
            offset,
            kind: StageKind::Perm {
                perm,
                table,
                inv_table,
            },
        })
    }

    fn width(&self) -> usize {
        match &self.kind {
            StageKind::Local(g) => g.len(),
            StageKind::Phase { alpha, .. } => alpha.len().div_ceil(2),
            StageKind::Perm { perm, .. } => perm.n_bits() as usize,
        }
    }
}

/// Symbolic unitary on n qubits: a sequence of stages applied in order.
#[derive(Clone, Debug)]
pub struct UnitarySpec {
    n_qubits: usize,
    stages: Vec<Stage>,
}

impl UnitarySpec {
    pub fn new(n_qubits: usize, stages: Vec<Stage>) -> Result<UnitarySpec> {
        for st in &stages {
            if st.offset + st.width() > n_qubits {
                return Err(Error::DimensionMismatch(format!(
                    "stage window {}..{} exceeds {} qubits",
                    st.offset,
                    st.offset + st.width(),
                    n_qubits
                )));
            }
        }
        Ok(UnitarySpec { n_qubits, stages })
    }

    pub fn identity(n_qubits: usize) -> UnitarySpec {
        UnitarySpec {
            n_qubits,
            stages: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Concatenation: self followed by other.
    pub fn then(&self, other: &UnitarySpec) -> Result<UnitarySpec> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch(
                "stage concatenation across different widths".into(),
            ));
        }
        let mut stages = self.stages.clone();
        stages.extend(other.stages.iter().cloned());
        Ok(UnitarySpec {
            n_qubits: self.n_qubits,
            stages,
        })
    }

    /// Embed a spec on fewer qubits at a window offset.
    pub fn embedded(&self, n_qubits: usize, offset: usize) -> Result<UnitarySpec> {
        if offset + self.n_qubits > n_qubits {
            return Err(Error::DimensionMismatch("embedding window overflow".into()));
        }
        let stages = self
            .stages
            .iter()
            .map(|s| Stage {
                offset: s.offset + offset,
                kind: s.kind.clone(),
            })
            .collect();
        Ok(UnitarySpec { n_qubits, stages })
    }

    fn apply_stages(&self, amps: &mut [C64], adjoint: bool, ops: &mut OpCount) {
        let n = self.n_qubits;
        let d = amps.len();
        let order: Vec<&Stage> = if adjoint {
            self.stages.iter().rev().collect()
        } else {
            self.stages.iter().collect()
        };
        for st in order {
            match &st.kind {
                StageKind::Local(gates) => {
                    for (i, &g) in gates.iter().enumerate() {
                        if g == LocalGate::I {
                            continue;
                        }
                        let m = if adjoint {
                            g.matrix().adjoint()
                        } else {
                            g.matrix()
                        };
                        let bit = n - 1 - (st.offset + i);
                        let mask = 1usize << bit;
                        for x in 0..d {
                            if x & mask != 0 {
                                continue;
                            }
                            let y = x | mask;
                            let a = amps[x];
                            let b = amps[y];
                            amps[x] = m[(0, 0)] * a + m[(0, 1)] * b;
                            amps[y] = m[(1, 0)] * a + m[(1, 1)] * b;
                            ops.butterflies += 1;
                        }
                    }
                }
                StageKind::Phase { exps, .. } => {
                    let w = st.width();
                    let shift = n - st.offset - w;
                    let mask = (1usize << w) - 1;
                    let phases: [C64; 4] =
                        [c(1.0), C64::new(0.0, 1.0), c(-1.0), C64::new(0.0, -1.0)];
                    for (x, a) in amps.iter_mut().enumerate() {
                        let v = (x >> shift) & mask;
                        let mut e = exps[v] as usize;
                        if adjoint {
                            e = (4 - e) % 4;
                        }
                        if e != 0 {
                            *a *= phases[e];
                            ops.phase_mults += 1;
                        }
                    }
                }
                StageKind::Perm {
                    table, inv_table, ..
                } => {
                    let w = st.width();
                    let shift = n - st.offset - w;
                    let mask = (1usize << w) - 1;
                    let tbl = if adjoint { inv_table } else { table };
                    let mut out = vec![c(0.0); d];
                    for (x, &a) in amps.iter().enumerate() {
                        let v = (x >> shift) & mask;
                        let y = (x & !(mask << shift)) | ((tbl[v] as usize) << shift);
                        out[y] = a;
                        ops.moves += 1;
                    }
                    amps.copy_from_slice(&out);
                }
            }
        }
    }
}

/// A unitary ensemble member: staged circuit or dense matrix.
#[derive(Clone, Debug)]
pub enum Member {
    Staged(UnitarySpec),
    Dense(DMatrix<C64>),
}

impl Member {
    pub fn dim(&self) -> usize {
        match self {
            Member::Staged(s) => 1 << s.n_qubits(),
            Member::Dense(m) => m.nrows(),
        }
    }

    pub fn apply_counted(&self, state: &StateVector, adjoint: bool) -> (StateVector, OpCount) {
        let mut out = state.clone();
        let mut ops = OpCount::default();
        match self {
            Member::Staged(spec) => {
                assert_eq!(state.total_dim(), 1 << spec.n_qubits());
                spec.apply_stages(out.amps_mut().as_mut_slice(), adjoint, &mut ops);
            }
            Member::Dense(m) => {
                assert_eq!(state.total_dim(), m.nrows());
                let v = if adjoint {
                    m.adjoint() * state.amps()
                } else {
                    m * state.amps()
                };
                *out.amps_mut() = v;
                ops.moves += (m.nrows() * m.nrows()) as u64;
            }
        }
        (out, ops)
    }

    pub fn apply(&self, state: &StateVector) -> StateVector {
        self.apply_counted(state, false).0
    }

    pub fn apply_adjoint(&self, state: &StateVector) -> StateVector {
        self.apply_counted(state, true).0
    }

    /// Dense matrix realization (columns are images of basis states).
    pub fn dense(&self) -> DMatrix<C64> {
        match self {
            Member::Dense(m) => m.clone(),
            Member::Staged(spec) => {
                let d = 1 << spec.n_qubits();
                let mut out = DMatrix::from_element(d, d, c(0.0));
                for j in 0..d {
                    let mut amps = vec![c(0.0); d];
                    amps[j] = c(1.0);
                    let mut ops = OpCount::default();
                    spec.apply_stages(&mut amps, false, &mut ops);
                    for i in 0..d {
                        out[(i, j)] = amps[i];
                    }
                }
                out
            }
        }
    }
}

/// Indexed family of same-dimension unitaries with uniform seed semantics.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    dim: usize,
    members: Vec<Member>,
}

impl EnsembleSpec {
    pub fn new(members: Vec<Member>) -> Result<EnsembleSpec> {
        let Some(first) = members.first() else {
            return Err(Error::InvalidParameter("empty ensemble".into()));
        };
        let dim = first.dim();
        if members.iter().any(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch(
                "ensemble members of different dimensions".into(),
            ));
        }
        Ok(EnsembleSpec { dim, members })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, k: usize) -> &Member {
        &self.members[k]
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn dense_members(&self) -> Vec<DMatrix<C64>> {
        self.members.iter().map(|m| m.dense()).collect()
    }
}

/// Exact mutually unbiased bases on n qubits: the identity plus up to 2^n
/// members D_u H^{xn} with Z4 quadratic-form phases from the multiplication
/// table of GF(2^n), theta = X.
pub fn build_exact_mubs(n: usize, r: usize) -> Result<EnsembleSpec> {
    if n == 0 || n > 6 {
        return Err(Error::InvalidParameter(format!(
            "exact construction supported for 1..=6 qubits, got {n}"
        )));
    }
    let d = 1usize << n;
    if r == 0 || r > d + 1 {
        return Err(Error::InvalidParameter(format!(
            "basis count {r} out of range 1..={}",
            d + 1
        )));
    }
    let ctx = FieldCtx::new(n as u32)?;
    let mut members = vec![Member::Staged(UnitarySpec::identity(n))];
    let all_h = Stage::local(0, vec![LocalGate::H; n]);
    for j in 2..=r {
        let u = (j - 2) as u64;
        let alpha = mub_alpha_vector(&ctx, u);
        let spec = UnitarySpec::new(n, vec![all_h.clone(), Stage::phase(0, alpha)?])?;
        members.push(Member::Staged(spec));
    }
    EnsembleSpec::new(members)
}

/// Variant selector for the Hadamard-pattern construction.
#[derive(Clone, Copy, Debug)]
pub enum HadamardVariant {
    /// Codewords of the Hadamard code on n = 2^n' qubits: r <= n patterns at
    /// pairwise distance n/2, a 1/2-MUB family.
    HadamardCode { r: usize },
    /// Reed-Solomon over GF(2^m) concatenated with the Hadamard code on
    /// n = 2^(2m) qubits, n' = 2m. Degree bound k gives 2^(mk) codewords at
    /// pairwise distance >= (2^m - k + 1) 2^(m-1), a (1/2 - delta)-MUB
    /// family with delta = (k - 1) / 2^(m+1).
    Concatenated { rs_degree: usize, r: usize },
}

/// Hadamard-code codeword for message x on 2^n' bits: v_z = <x, z> mod 2.
fn hadamard_codeword(x: u64, n_prime: u32) -> u64 {
    let n = 1u64 << n_prime;
    let mut v = 0u64;
    for z in 0..n {
        let bit = ((x & z).count_ones() & 1) as u64;
        v |= bit << z;
    }
    v
}

/// Number of qubits the pattern family acts on.
pub fn hadamard_mub_qubits(n_prime: u32, variant: HadamardVariant) -> Result<usize> {
    if let HadamardVariant::Concatenated { .. } = variant {
        if !n_prime.is_multiple_of(2) || n_prime == 0 {
            return Err(Error::InvalidParameter(
                "concatenated variant needs an even positive n'".into(),
            ));
        }
    }
    if n_prime > 6 {
        return Err(Error::InvalidParameter(format!(
            "2^{n_prime} qubits is out of range"
        )));
    }
    Ok(1usize << n_prime)
}

/// Codewords (Hadamard patterns) of the selected variant. Bit z of a
/// codeword drives qubit z.
pub fn hadamard_mub_codewords(n_prime: u32, variant: HadamardVariant) -> Result<Vec<u64>> {
    hadamard_mub_qubits(n_prime, variant)?;
    match variant {
        HadamardVariant::HadamardCode { r } => {
            let n = 1u64 << n_prime;
            if r == 0 || r as u64 > n {
                return Err(Error::InvalidParameter(format!(
                    "Hadamard code on {n} bits has at most {n} codewords, asked for {r}"
                )));
            }
            Ok((0..r as u64)
                .map(|x| hadamard_codeword(x, n_prime))
                .collect())
        }
        HadamardVariant::Concatenated { rs_degree, r } => {
            let m = n_prime / 2;
            let q = 1u64 << m;
            if rs_degree == 0 || rs_degree as u64 > q {
                return Err(Error::InvalidParameter(format!(
                    "RS degree bound {rs_degree} out of range 1..={q}"
                )));
            }
            let count = q.pow(rs_degree as u32);
            if r == 0 || r as u64 > count {
                return Err(Error::InvalidParameter(format!(
                    "concatenated code has {count} codewords, asked for {r}"
                )));
            }
            let ctx = FieldCtx::new(m)?;
            let mut out = Vec::with_capacity(r);
            for msg in 0..r as u64 {
                // message digits are the RS polynomial coefficients
                let coeffs: Vec<crate::gf::FieldElem> = (0..rs_degree)
                    .map(|i| crate::gf::FieldElem((msg >> (i as u32 * m)) & (q - 1)))
                    .collect();
                let f = crate::gf::PolyGF::new(coeffs);
                let mut v = 0u64;
                for point in 0..q {
                    let sym = f.eval(&ctx, crate::gf::FieldElem(point)).bits();
                    let inner = hadamard_codeword(sym, m);
                    v |= inner << (point * q);
                }
                out.push(v);
            }
            Ok(out)
        }
    }
}

/// Approximate MUB family of pure Hadamard patterns H^v with v ranging over
/// the codewords of a binary code; the maximum cross overlap between
/// patterns v, v' is exactly 2^(-dist(v,v')/2).
pub fn build_hadamard_mubs(n_prime: u32, variant: HadamardVariant) -> Result<EnsembleSpec> {
    let codewords = hadamard_mub_codewords(n_prime, variant)?;
    let n = hadamard_mub_qubits(n_prime, variant)?;
    if n > 12 {
        return Err(Error::InvalidParameter(format!(
            "{n} qubits exceeds the dense state range"
        )));
    }
    let members = codewords
        .iter()
        .map(|&v| {
            let gates: Vec<LocalGate> = (0..n)
                .map(|q| {
                    if (v >> q) & 1 == 1 {
                        LocalGate::H
                    } else {
                        LocalGate::I
                    }
                })
                .collect();
            UnitarySpec::new(n, vec![Stage::local(0, gates)]).map(Member::Staged)
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleSpec::new(members)
}

/// Maximum over member pairs and basis labels of
/// |<x| U_i^dag U_j |y>| - d^(-gamma/2); the ensemble is a gamma-MUB family
/// iff the excess is <= 1e-10. Dense realization, so d <= 64.
pub fn verify_gamma_mub(ens: &EnsembleSpec, gamma: f64) -> Result<f64> {
    let d = ens.dim();
    if d > 64 {
        return Err(Error::InvalidParameter(format!(
            "dense verification limited to d <= 64, got {d}"
        )));
    }
    let target = (d as f64).powf(-gamma / 2.0);
    let dense = ens.dense_members();
    let mut excess: f64 = f64::NEG_INFINITY;
    for i in 0..dense.len() {
        for j in (i + 1)..dense.len() {
            let g = dense[i].adjoint() * &dense[j];
            for z in g.iter() {
                excess = excess.max(z.norm() - target);
            }
        }
    }
    Ok(excess)
}

/// Maximum of |<x| U_i^dag U_j |y>| over all basis labels for one member
/// pair, computed by staged application (no dense matrices), so it works up
/// to the full state range.
pub fn max_overlap_pair(ens: &EnsembleSpec, i: usize, j: usize) -> Result<f64> {
    let d = ens.dim();
    if i >= ens.len() || j >= ens.len() {
        return Err(Error::InvalidParameter("member index out of range".into()));
    }
    let mut max: f64 = 0.0;
    for y in 0..d {
        let e = StateVector::basis_state(vec![d], y)?;
        let col = ens.member(i).apply_adjoint(&ens.member(j).apply(&e));
        for a in col.amps().iter() {
            max = max.max(a.norm());
        }
    }
    Ok(max)
}

/// Frobenius residual of the complex projective 2-design identity for a
/// full set of d + 1 mutually unbiased bases:
/// ||(1/(d(d+1))) sum_{i,a} (U_i |a><a| U_i^dag)^(x2) - 2 Pi_sym/(d(d+1))||_F.
pub fn check_2design(ens: &EnsembleSpec) -> Result<f64> {
    let d = ens.dim();
    if ens.len() != d + 1 {
        return Err(Error::InvalidParameter(format!(
            "2-design check needs exactly d + 1 = {} members, got {}",
            d + 1,
            ens.len()
        )));
    }
    let mut sum = DMatrix::from_element(d * d, d * d, c(0.0));
    for m in ens.members() {
        let u = m.dense();
        for a in 0..d {
            let col = u.column(a);
            // (U|a>)^(x2)
            let mut w = DVector::from_element(d * d, c(0.0));
            for i in 0..d {
                for k in 0..d {
                    w[i * d + k] = col[i] * col[k];
                }
            }
            sum += &w * w.adjoint();
        }
    }
    let scale = 1.0 / (d * (d + 1)) as f64;
    // 2 Pi_sym = id + F
    let mut target = DMatrix::from_element(d * d, d * d, c(0.0));
    for a in 0..d {
        for b in 0..d {
            target[(a * d + b, a * d + b)] += c(1.0);
            target[(a * d + b, b * d + a)] += c(1.0);
        }
    }
    Ok(((sum - target) * c(scale)).norm())
}

/// Per-member report of the min-entropy flattening construction.
#[derive(Clone, Debug)]
pub struct FlattenEntry {
    /// Mass of the globally-largest entries that falls in this member's
    /// block.
    pub w: f64,
    /// The member survives the threshold test (w <= eps).
    pub in_t: bool,
    /// Exact total variation between the member's outcome distribution and
    /// its flattened companion q_j.
    pub tv_to_q: f64,
    /// Min-entropy of the companion q_j.
    pub hmin_q: f64,
}

#[derive(Clone, Debug)]
pub struct FlattenReport {
    pub entries: Vec<FlattenEntry>,
    pub gamma: f64,
    pub eps: f64,
    /// The guaranteed floor gamma n / 2 - log2(8 / eps^2).
    pub hmin_floor: f64,
    pub good_count: usize,
}

/// Flattening construction: concatenate the outcome distributions of all
/// members on `state`, mark the floor(d^(gamma/2)) globally largest entries,
/// and for each member build the companion distribution that moves the
/// marked mass to the uniform floor. Members whose marked mass stays below
/// eps keep both a small distance to the companion and a min-entropy floor.
pub fn minentropy_flatten(
    ens: &EnsembleSpec,
    state: &StateVector,
    gamma: f64,
    eps: f64,
) -> Result<FlattenReport> {
    let d = ens.dim();
    if state.total_dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs ensemble dim {d}",
            state.total_dim()
        )));
    }
    let r = ens.len();
    let n_bits = (d as f64).log2();
    let mut all = Vec::with_capacity(r * d);
    for m in ens.members() {
        let out = m.apply(state);
        all.extend(out.amps().iter().map(|a| a.norm_sqr()));
    }
    let s_size = (d as f64).powf(gamma / 2.0).floor() as usize;
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&a, &b| all[b].partial_cmp(&all[a]).unwrap().then(a.cmp(&b)));
    let marked: Vec<usize> = order.into_iter().take(s_size).collect();

    let mut w = vec![0.0; r];
    for &z in &marked {
        w[z / d] += all[z];
    }
    let hmin_floor = gamma * n_bits / 2.0 - (8.0 / (eps * eps)).log2();
    let mut entries = Vec::with_capacity(r);
    let mut good = 0;
    for j in 0..r {
        let block = &all[j * d..(j + 1) * d];
        let mut q: Vec<f64> = block.to_vec();
        for &z in &marked {
            if z / d == j {
                q[z % d] = 0.0;
            }
        }
        let add = w[j] / d as f64;
        for x in q.iter_mut() {
            *x += add;
        }
        let tv = 0.5
            * block
                .iter()
                .zip(&q)
                .map(|(p, qx)| (p - qx).abs())
                .sum::<f64>();
        let hmin_q = -q.iter().cloned().fold(0.0_f64, f64::max).log2();
        let in_t = w[j] <= eps;
        if in_t {
            good += 1;
        }
        entries.push(FlattenEntry {
            w: w[j],
            in_t,
            tv_to_q: tv,
            hmin_q,
        });
    }
    Ok(FlattenReport {
        entries,
        gamma,
        eps,
        hmin_floor,
        good_count: good,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::FieldElem;
    use crate::quantum::haar_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_form_basics() {
        // u = 0 -> T = 0 for every v
        let ctx = FieldCtx::new(3).unwrap();
        let alpha = mub_alpha_vector(&ctx, 0);
        for v in 0..8 {
            assert_eq!(quadratic_form_t(&alpha, v), 0);
        }
        // n=1 over GF(2): the 1x1 multiplication table gives T_u(v) = u v
        let ctx1 = FieldCtx::new(1).unwrap();
        let alpha1 = mub_alpha_vector(&ctx1, 1);
        assert_eq!(quadratic_form_t(&alpha1, 1), 1);
        assert_eq!(quadratic_form_t(&alpha1, 0), 0);
        // v = 0 -> 0 for any u
        for u in 0..8 {
            let a = mub_alpha_vector(&ctx, u);
            assert_eq!(quadratic_form_t(&a, 0), 0);
        }
    }

    #[test]
    fn exact_mubs_single_qubit() {
        // {I, H, diag(1,i) H} with all cross overlaps 1/sqrt(2)
        let ens = build_exact_mubs(1, 3).unwrap();
        let dense = ens.dense_members();
        let h = LocalGate::H.matrix();
        let dh = LocalGate::DHad.matrix();
        assert!((&dense[1] - &h).norm() < 1e-12);
        assert!((&dense[2] - &dh).norm() < 1e-12);
        assert!(verify_gamma_mub(&ens, 1.0).unwrap() <= 1e-10);
    }

    #[test]
    fn exact_mubs_trivial_and_two_qubit() {
        let ens = build_exact_mubs(2, 1).unwrap();
        assert_eq!(ens.len(), 1); // {I} is vacuously unbiased
        assert!(build_exact_mubs(2, 6).is_err()); // r too large

        let ens = build_exact_mubs(2, 5).unwrap();
        let excess = verify_gamma_mub(&ens, 1.0).unwrap();
        assert!(excess.abs() <= 1e-10, "excess {excess}");
    }

    #[test]
    fn exact_mubs_n3_n4() {
        for n in [3usize, 4] {
            let d = 1usize << n;
            let ens = build_exact_mubs(n, d + 1).unwrap();
            let excess = verify_gamma_mub(&ens, 1.0).unwrap();
            assert!(excess.abs() <= 1e-10, "n={n} excess {excess}");
        }
    }

    #[test]
    fn identical_bases_have_positive_excess() {
        let id = Member::Staged(UnitarySpec::identity(1));
        let ens = EnsembleSpec::new(vec![id.clone(), id]).unwrap();
        let excess = verify_gamma_mub(&ens, 1.0).unwrap();
        assert!((excess - (1.0 - 0.5_f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn hadamard_pattern_overlap_law() {
        // n'=1: codewords {(0,0),(0,1)} -> {I x I, I x H}
        let cw = hadamard_mub_codewords(1, HadamardVariant::HadamardCode { r: 2 }).unwrap();
        assert_eq!(cw, vec![0b00, 0b10]);
        let ens = build_hadamard_mubs(1, HadamardVariant::HadamardCode { r: 2 }).unwrap();
        let dense = ens.dense_members();
        let g = dense[0].adjoint() * &dense[1];
        let max = g.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        assert!((max - 0.5_f64.sqrt()).abs() < 1e-14);

        // the maximum overlap equals 2^(-dist/2) exactly for every pair
        for n_prime in [2u32, 3] {
            let r = 1usize << n_prime;
            let cw =
                hadamard_mub_codewords(n_prime, HadamardVariant::HadamardCode { r }).unwrap();
            let ens = build_hadamard_mubs(n_prime, HadamardVariant::HadamardCode { r }).unwrap();
            for i in 0..r {
                for j in (i + 1)..r {
                    let dist = (cw[i] ^ cw[j]).count_ones();
                    let max = max_overlap_pair(&ens, i, j).unwrap();
                    let want = 2f64.powf(-(dist as f64) / 2.0);
                    assert!(
                        (max - want).abs() < 1e-12,
                        "pair ({i},{j}) dist {dist}: {max} vs {want}"
                    );
                }
            }
        }
        // Hadamard code distance n/2 -> gamma = 1/2 at verifiable dimension
        let ens = build_hadamard_mubs(2, HadamardVariant::HadamardCode { r: 4 }).unwrap();
        let excess = verify_gamma_mub(&ens, 0.5).unwrap();
        assert!(excess <= 1e-10, "excess {excess}");
    }

    #[test]
    fn identical_pattern_overlap_is_one() {
        let ens = build_hadamard_mubs(1, HadamardVariant::HadamardCode { r: 1 }).unwrap();
        let dense = ens.dense_members();
        let g = dense[0].adjoint() * &dense[0];
        let max = g.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        assert!((max - 1.0).abs() < 1e-14);
    }

    #[test]
    fn concatenated_codewords_have_min_distance() {
        // n'=2 (m=1): RS over GF(2) concatenated with the 2-bit Hadamard code
        let variant = HadamardVariant::Concatenated { rs_degree: 1, r: 2 };
        let cw = hadamard_mub_codewords(2, variant).unwrap();
        assert_eq!(cw.len(), 2);
        let floor = 2; // (q - k + 1) 2^(m-1) at q=2, k=1
        for i in 0..cw.len() {
            for j in (i + 1)..cw.len() {
                let dist = (cw[i] ^ cw[j]).count_ones() as u64;
                assert!(dist >= floor, "dist {dist} < {floor}");
            }
        }

        // n'=4 (m=2): 16 codewords at degree bound 2
        let variant = HadamardVariant::Concatenated {
            rs_degree: 2,
            r: 16,
        };
        let cw = hadamard_mub_codewords(4, variant).unwrap();
        let floor = (4 - 2 + 1) * 2; // (q - k + 1) 2^(m-1)
        for i in 0..cw.len() {
            for j in (i + 1)..cw.len() {
                let dist = (cw[i] ^ cw[j]).count_ones() as u64;
                assert!(dist >= floor, "pair ({i},{j}) dist {dist} < {floor}");
            }
        }
        // together with the exact overlap law, the distance floor gives a
        // gamma-MUB family with gamma = floor / n
    }

    #[test]
    fn two_design_full_sets() {
        for n in [1usize, 2] {
            let d = 1usize << n;
            let ens = build_exact_mubs(n, d + 1).unwrap();
            let resid = check_2design(&ens).unwrap();
            assert!(resid < 1e-10, "d={d} residual {resid}");
        }
        // wrong member count is rejected
        let ens = build_exact_mubs(1, 2).unwrap();
        assert!(check_2design(&ens).is_err());
        // an incomplete set padded with a repeat is far from a 2-design
        let mut members = build_exact_mubs(1, 2).unwrap().members().to_vec();
        members.push(members[1].clone());
        let fake = EnsembleSpec::new(members).unwrap();
        assert!(check_2design(&fake).unwrap() > 0.01);
    }

    #[test]
    fn staged_equals_dense_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let ctx = FieldCtx::new(2).unwrap();
        // a three-stage spec: local gates, phases, and a permutation window
        let perm = BitPermutation::affine(&ctx, FieldElem(0b10), FieldElem(0b01)).unwrap();
        let spec = UnitarySpec::new(
            4,
            vec![
                Stage::local(
                    0,
                    vec![LocalGate::H, LocalGate::V2, LocalGate::I, LocalGate::DHad],
                ),
                Stage::phase(1, mub_alpha_vector(&ctx, 1)).unwrap(),
                Stage::perm(2, perm).unwrap(),
            ],
        )
        .unwrap();
        let member = Member::Staged(spec);
        let dense = member.dense();
        // unitarity of the realization
        let dev = (&dense * dense.adjoint() - DMatrix::identity(16, 16)).norm();
        assert!(dev < 1e-10);
        for _ in 0..100 {
            let st = haar_state(vec![16], &mut rng);
            let fast = member.apply(&st);
            let slow = &dense * st.amps();
            assert!((fast.amps() - &slow).norm() < 1e-10);
            // adjoint path matches the dense adjoint
            let fast_adj = member.apply_adjoint(&st);
            let slow_adj = dense.adjoint() * st.amps();
            assert!((fast_adj.amps() - &slow_adj).norm() < 1e-10);
        }
    }

    #[test]
    fn stage_costs_scale_linearly() {
        // local and phase stages cost O(d n) primitive operations, never d^2
        for n in [4usize, 6] {
            let d = 1u64 << n;
            let spec = UnitarySpec::new(n, vec![Stage::local(0, vec![LocalGate::H; n])]).unwrap();
            let st = StateVector::basis_state(vec![1 << n], 0).unwrap();
            let (_, ops) = Member::Staged(spec).apply_counted(&st, false);
            assert_eq!(ops.butterflies, n as u64 * d / 2);
            assert!(ops.total() < d * d);

            let ctx = FieldCtx::new(n as u32).unwrap();
            let spec =
                UnitarySpec::new(n, vec![Stage::phase(0, mub_alpha_vector(&ctx, 1)).unwrap()])
                    .unwrap();
            let (_, ops) = Member::Staged(spec).apply_counted(&st, false);
            assert!(ops.total() <= d);
        }
    }

    #[test]
    fn flatten_report_structure() {
        // state aligned with a member concentrates its mass there and the
        // member is excluded from the threshold set
        let ens = build_exact_mubs(3, 9).unwrap();
        let e0 = StateVector::basis_state(vec![8], 0).unwrap();
        let rep = minentropy_flatten(&ens, &e0, 1.0, 0.5).unwrap();
        assert!(!rep.entries[0].in_t, "identity member must be excluded");
        assert!(rep.entries[0].w > 0.9);

        // eps = 1 admits everything
        let rep = minentropy_flatten(&ens, &e0, 1.0, 1.0).unwrap();
        assert_eq!(rep.good_count, 9);
    }

    #[test]
    fn flatten_lemma_guarantees_hadamard() {
        // Hadamard-pattern family at n = 8 qubits (gamma = 1/2), eps = 1/2,
        // r = ceil(2/eps^2) = 8 members: at least (1 - eps) r survive, each
        // with tv <= eps and the min-entropy floor
        let n_prime = 3u32;
        let r = 8usize;
        let ens = build_hadamard_mubs(n_prime, HadamardVariant::HadamardCode { r }).unwrap();
        let eps = 0.5;
        let gamma = 0.5;
        let n_qubits = 8.0;
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for trial in 0..6 {
            let st = if trial == 0 {
                StateVector::basis_state(vec![256], 3).unwrap()
            } else {
                haar_state(vec![256], &mut rng)
            };
            let rep = minentropy_flatten(&ens, &st, gamma, eps).unwrap();
            assert!(
                rep.good_count as f64 >= (1.0 - eps) * r as f64,
                "good {} of {r}",
                rep.good_count
            );
            let floor = gamma * n_qubits / 2.0 - (8.0 / (eps * eps)).log2();
            for e in rep.entries.iter().filter(|e| e.in_t) {
                assert!(e.tv_to_q <= eps + 1e-12);
                assert!(e.tv_to_q <= e.w + 1e-12);
                assert!(e.hmin_q >= floor - 1e-9, "hmin {} < {floor}", e.hmin_q);
            }
        }
    }

    #[test]
    fn flatten_uniform_superposition_exact_mubs() {
        // spread state: most members keep low marked mass; the floor is
        // vacuous at these parameters
        let ens = build_exact_mubs(3, 8).unwrap();
        let st = StateVector::uniform_superposition(vec![8]).unwrap();
        let rep = minentropy_flatten(&ens, &st, 1.0, 0.5).unwrap();
        assert!(rep.good_count >= 6, "good {}", rep.good_count);
        for e in rep.entries.iter().filter(|e| e.in_t) {
            assert!(e.hmin_q >= rep.hmin_floor - 1e-9);
        }
    }
}
