//! Information locking built on an uncertainty-relation ensemble, the
//! measurement-attack evaluator, string commitment, hiding fingerprints, and
//! quantum identification codes.

use crate::mub::{EnsembleSpec, Member};
use crate::quantum::{haar_unitary, orthogonalize, trace_distance, C64, Distribution, StateVector};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Locking scheme: a message x and private randomness b are encoded as
/// U_k^dag |x>|b> under a key k indexing the ensemble.
#[derive(Clone, Debug)]
pub struct LockingScheme {
    ens: EnsembleSpec,
    d_a: usize,
    d_b: usize,
}

impl LockingScheme {
    pub fn new(ens: EnsembleSpec, n_bits: usize, d_b: usize) -> Result<LockingScheme> {
        LockingScheme::with_dims(ens, 1usize << n_bits, d_b)
    }

    /// Message alphabets that are not powers of two (prime moduli for the
    /// fingerprint hiding checks) are allowed here.
    pub fn with_dims(ens: EnsembleSpec, d_a: usize, d_b: usize) -> Result<LockingScheme> {
        if d_a == 0 || d_b == 0 || ens.dim() != d_a * d_b {
            return Err(Error::DimensionMismatch(format!(
                "ensemble dim {} != {d_a} * {d_b}",
                ens.dim()
            )));
        }
        Ok(LockingScheme { ens, d_a, d_b })
    }

    pub fn ensemble(&self) -> &EnsembleSpec {
        &self.ens
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_b(&self) -> usize {
        self.d_b
    }

    pub fn key_count(&self) -> usize {
        self.ens.len()
    }

    fn check_indices(&self, x: u64, k: usize, b: usize) -> Result<()> {
        if x >= self.d_a() as u64 {
            return Err(Error::InvalidParameter(format!("message {x} out of range")));
        }
        if k >= self.key_count() {
            return Err(Error::InvalidParameter(format!("key {k} out of range")));
        }
        if b >= self.d_b {
            return Err(Error::InvalidParameter(format!(
                "randomness index {b} out of range"
            )));
        }
        Ok(())
    }

    /// Pure-branch ciphertext U_k^dag |x>|b>.
    pub fn encode(&self, x: u64, k: usize, b: usize) -> Result<StateVector> {
        self.check_indices(x, k, b)?;
        let idx = x as usize * self.d_b + b;
        let e = StateVector::basis_state(vec![self.d_a(), self.d_b], idx)?;
        Ok(self.ens.member(k).apply_adjoint(&e))
    }

    /// Mixed ciphertext over the private randomness b.
    pub fn encode_mixed(&self, x: u64, k: usize) -> Result<crate::DensityOperator> {
        self.check_indices(x, k, 0)?;
        let d = self.ens.dim();
        let mut mat = DMatrix::from_element(d, d, c(0.0));
        for b in 0..self.d_b {
            let st = self.encode(x, k, b)?;
            mat += st.amps() * st.amps().adjoint();
        }
        mat /= c(self.d_b as f64);
        crate::DensityOperator::new(vec![self.d_a(), self.d_b], mat)
    }

    /// Exact decode distribution over (x, b): apply U_k and measure.
    pub fn decode_dist(&self, state: &StateVector, k: usize) -> Result<Distribution> {
        if state.total_dim() != self.ens.dim() {
            return Err(Error::DimensionMismatch("ciphertext dimension".into()));
        }
        if k >= self.key_count() {
            return Err(Error::InvalidParameter(format!("key {k} out of range")));
        }
        let out = self.ens.member(k).apply(state);
        let out = out.reshaped(vec![self.d_a(), self.d_b])?;
        out.measure_marginal(&[0, 1])
    }

    /// Sampled decode; returns the measured (x, b). Corrupted ciphertexts
    /// decode to whatever the measurement yields, with no error flag.
    pub fn decode(&self, state: &StateVector, k: usize, rng: &mut impl Rng) -> Result<(u64, usize)> {
        let dist = self.decode_dist(state, k)?;
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &p) in dist.probs().iter().enumerate() {
            acc += p;
            if u < acc {
                return Ok(((i / self.d_b) as u64, i % self.d_b));
            }
        }
        let last = dist.len() - 1;
        Ok(((last / self.d_b) as u64, last % self.d_b))
    }
}

impl LockingScheme {
    /// One-time-pad variant: the private register carries message bits of
    /// its own, encrypted with a key extension, so the message length
    /// matches the ciphertext width. Requires a power-of-two randomness
    /// dimension.
    pub fn encode_otp(&self, x: u64, extra: u64, k: usize, pad: u64) -> Result<StateVector> {
        if !self.d_b.is_power_of_two() {
            return Err(Error::InvalidParameter(
                "one-time-pad variant needs a power-of-two d_B".into(),
            ));
        }
        if extra >= self.d_b as u64 || pad >= self.d_b as u64 {
            return Err(Error::InvalidParameter(
                "pad register value out of range".into(),
            ));
        }
        self.encode(x, k, (extra ^ pad) as usize)
    }

    /// Decode of the padded variant: recover (x, extra) with the extended
    /// key (k, pad).
    pub fn decode_otp(
        &self,
        state: &StateVector,
        k: usize,
        pad: u64,
        rng: &mut impl Rng,
    ) -> Result<(u64, u64)> {
        let (x, b) = self.decode(state, k, rng)?;
        Ok((x, b as u64 ^ pad))
    }
}

/// Weighted rank-1 POVM outcome xi |e><e|.
#[derive(Clone, Debug)]
pub struct WeightedOutcome {
    pub weight: f64,
    pub vector: DVector<C64>,
}

/// Computational-basis attack: one unit-weight outcome per basis label.
pub fn computational_povm(dim: usize) -> Vec<WeightedOutcome> {
    (0..dim)
        .map(|i| {
            let mut v = DVector::from_element(dim, c(0.0));
            v[i] = c(1.0);
            WeightedOutcome {
                weight: 1.0,
                vector: v,
            }
        })
        .collect()
}

/// Message prior for the attack evaluator.
#[derive(Clone, Debug)]
pub enum MessageSource {
    Uniform,
    /// Uniform over an explicit subset of messages.
    Flat(Vec<u64>),
}

impl MessageSource {
    fn prior(&self, d_a: usize) -> Vec<f64> {
        match self {
            MessageSource::Uniform => vec![1.0 / d_a as f64; d_a],
            MessageSource::Flat(support) => {
                let mut p = vec![0.0; d_a];
                for &x in support {
                    p[x as usize] = 1.0 / support.len() as f64;
                }
                p
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackOutcomeRow {
    pub outcome: usize,
    pub prob: f64,
    pub posterior: Vec<f64>,
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackReport {
    pub rows: Vec<AttackOutcomeRow>,
    pub max_delta: f64,
}

/// Exact Bayesian evaluation of a rank-1 POVM attack on the locked message:
/// Pr[I = i | X = x] = (xi_i / d_B) (1/t) sum_k p^A_{U_k e_i}(x), posteriors
/// from the prior, and the per-outcome total-variation leakage.
pub fn attack_eval(
    scheme: &LockingScheme,
    povm: &[WeightedOutcome],
    source: &MessageSource,
) -> Result<AttackReport> {
    let d = scheme.ens.dim();
    let d_a = scheme.d_a();
    let d_b = scheme.d_b();
    let t = scheme.key_count();
    // POVM completeness: sum xi |e><e| = 1
    let mut acc = DMatrix::from_element(d, d, c(0.0));
    for o in povm {
        if o.vector.len() != d {
            return Err(Error::DimensionMismatch("POVM vector dimension".into()));
        }
        acc += (&o.vector * o.vector.adjoint()) * c(o.weight);
    }
    if (&acc - DMatrix::identity(d, d)).norm() > 1e-9 {
        return Err(Error::InvalidParameter(
            "POVM outcomes do not sum to the identity".into(),
        ));
    }

    let prior = source.prior(d_a);
    let mut rows = Vec::with_capacity(povm.len());
    let mut max_delta = 0.0_f64;
    for (i, o) in povm.iter().enumerate() {
        let e = StateVector::new(vec![d_a, d_b], o.vector.clone().map(|z| z / c(o.vector.norm())))?;
        // s_i(x) = (1/t) sum_k p^A_{U_k e_i}(x)
        let mut s = vec![0.0; d_a];
        for k in 0..t {
            let p = scheme.ens.member(k).apply(&e).measure_marginal(&[0])?;
            for (x, v) in p.probs().iter().enumerate() {
                s[x] += v / t as f64;
            }
        }
        let norm2 = o.vector.norm_squared();
        // Pr[I=i|X=x] with the rank-1 weight folded in
        let cond: Vec<f64> = s.iter().map(|v| o.weight * norm2 / d_b as f64 * v).collect();
        let prob_i: f64 = prior.iter().zip(&cond).map(|(p, q)| p * q).sum();
        let posterior: Vec<f64> = if prob_i > 0.0 {
            prior
                .iter()
                .zip(&cond)
                .map(|(p, q)| p * q / prob_i)
                .collect()
        } else {
            prior.clone()
        };
        let delta = 0.5
            * posterior
                .iter()
                .zip(&prior)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        max_delta = max_delta.max(delta);
        rows.push(AttackOutcomeRow {
            outcome: i,
            prob: prob_i,
            posterior,
            delta,
        });
    }
    Ok(AttackReport { rows, max_delta })
}

/// Commitment = the locked ciphertext of the committed string.
#[derive(Clone, Debug)]
pub struct Commitment {
    pub state: StateVector,
}

/// Commit phase: lock x under key k with fresh private randomness b.
pub fn commit(
    scheme: &LockingScheme,
    x: u64,
    k: usize,
    rng: &mut impl Rng,
) -> Result<Commitment> {
    let b = rng.random_range(0..scheme.d_b());
    Ok(Commitment {
        state: scheme.encode(x, k, b)?,
    })
}

/// Reveal phase: decode under the revealed key and accept iff the message
/// matches. Returns the exact acceptance probability.
pub fn verify_prob(scheme: &LockingScheme, com: &Commitment, x: u64, k: usize) -> Result<f64> {
    let dist = scheme.decode_dist(&com.state, k)?;
    let d_b = scheme.d_b();
    let lo = x as usize * d_b;
    Ok(dist.probs()[lo..lo + d_b].iter().sum())
}

/// Sampled accept/reject of the reveal phase.
pub fn verify(
    scheme: &LockingScheme,
    com: &Commitment,
    x: u64,
    k: usize,
    rng: &mut impl Rng,
) -> Result<bool> {
    let (got, _) = scheme.decode(&com.state, k, rng)?;
    Ok(got == x)
}

/// Deterministic sieve of primes in [lo, hi].
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    if hi < 2 || hi < lo {
        return Vec::new();
    }
    let mut sieve = vec![true; (hi + 1) as usize];
    sieve[0] = false;
    if hi >= 1 {
        sieve[1] = false;
    }
    let mut p = 2u64;
    while p * p <= hi {
        if sieve[p as usize] {
            let mut q = p * p;
            while q <= hi {
                sieve[q as usize] = false;
                q += p;
            }
        }
        p += 1;
    }
    (lo.max(2)..=hi).filter(|&i| sieve[i as usize]).collect()
}

/// Prime interval [l, u] of the fingerprint theorem at unit constants:
/// l = ((1/delta) log^2(1/eps) / eps^8)^(1/0.9) + 10 n, u = l + (2n/delta)^2.
pub fn fingerprint_prime_interval(n: u64, delta: f64, eps: f64) -> (u64, u64) {
    let l = ((1.0 / delta) * (1.0 / eps).log2().powi(2) / eps.powi(8)).powf(1.0 / 0.9)
        + 10.0 * n as f64;
    let u = l + (2.0 * n as f64 / delta).powi(2);
    (l.ceil() as u64, u.ceil() as u64)
}

/// Hiding fingerprint parameters: message bits, a prime modulus p = d_A,
/// key count t and randomness dimension d_B.
#[derive(Clone, Debug)]
pub struct FingerprintParams {
    pub n_bits: u64,
    pub p: u64,
    pub t: usize,
    pub d_b: usize,
}

impl FingerprintParams {
    /// Toy parameters with an explicit small prime.
    pub fn toy(n_bits: u64, p: u64, t: usize, d_b: usize) -> Result<FingerprintParams> {
        if primes_in(p, p).is_empty() {
            return Err(Error::InvalidParameter(format!("{p} is not prime")));
        }
        if p > (1 << n_bits) / 4 {
            return Err(Error::InvalidParameter(format!(
                "prime {p} exceeds 2^(n-2) for n = {n_bits}"
            )));
        }
        Ok(FingerprintParams { n_bits, p, t, d_b })
    }

    /// Theorem parameters: uniform prime from the interval, t and d_B from
    /// the stated scalings at unit constants.
    pub fn theorem(n_bits: u64, delta: f64, eps: f64, rng: &mut impl Rng) -> Result<FingerprintParams> {
        let (l, u) = fingerprint_prime_interval(n_bits, delta, eps);
        if u > 1 << 22 {
            return Err(Error::Infeasible(format!(
                "prime interval [{l}, {u}] is beyond desk scale"
            )));
        }
        let primes = primes_in(l, u);
        if primes.is_empty() {
            return Err(Error::Infeasible(format!("no prime in [{l}, {u}]")));
        }
        let p = primes[rng.random_range(0..primes.len())];
        let t = ((1.0 / eps).log2() / (eps * eps)).ceil() as usize;
        let d_b = (1.0 / (eps * eps)).ceil() as usize;
        Ok(FingerprintParams {
            n_bits,
            p,
            t,
            d_b,
        })
    }
}

/// A hiding-fingerprint scheme instance: Haar unitaries on dimension p d_B.
#[derive(Clone, Debug)]
pub struct FingerprintScheme {
    pub params: FingerprintParams,
    ens: EnsembleSpec,
}

impl FingerprintScheme {
    pub fn new(params: FingerprintParams, rng: &mut impl Rng) -> Result<FingerprintScheme> {
        let d = params.p as usize * params.d_b;
        if d > 128 {
            return Err(Error::InvalidParameter(format!(
                "fingerprint dimension {d} exceeds the dense range"
            )));
        }
        let members: Vec<Member> = (0..params.t)
            .map(|_| Member::Dense(haar_unitary(d, rng)))
            .collect();
        Ok(FingerprintScheme {
            params,
            ens: EnsembleSpec::new(members)?,
        })
    }

    pub fn ensemble(&self) -> &EnsembleSpec {
        &self.ens
    }

    /// As a locking scheme of X mod p (d_A = p).
    fn dims(&self) -> (usize, usize) {
        (self.params.p as usize, self.params.d_b)
    }

    /// Pure fingerprint state (U_k)^dag |x mod p>|b> with fresh (k, b).
    pub fn make(&self, x: u64, rng: &mut impl Rng) -> Result<StateVector> {
        let (p, d_b) = self.dims();
        let k = rng.random_range(0..self.params.t);
        let b = rng.random_range(0..d_b);
        let idx = (x % p as u64) as usize * d_b + b;
        let e = StateVector::basis_state(vec![p, d_b], idx)?;
        Ok(self.ens.member(k).apply_adjoint(&e))
    }

    /// Orthogonal projector onto span{U_k^dag |y mod p>|b>}.
    pub fn test_projector(&self, y: u64) -> Result<DMatrix<C64>> {
        let (p, d_b) = self.dims();
        let ym = (y % p as u64) as usize;
        let mut vectors = Vec::with_capacity(self.params.t * d_b);
        for k in 0..self.params.t {
            for b in 0..d_b {
                let e = StateVector::basis_state(vec![p, d_b], ym * d_b + b)?;
                vectors.push(self.ens.member(k).apply_adjoint(&e).amps().clone());
            }
        }
        let ortho = orthogonalize(&vectors)?;
        let d = p * d_b;
        let mut proj = DMatrix::from_element(d, d, c(0.0));
        for v in &ortho {
            proj += v * v.adjoint();
        }
        Ok(proj)
    }

    /// Acceptance probability of a pure fingerprint state against y.
    pub fn test_state(&self, fp: &StateVector, y: u64) -> Result<f64> {
        let proj = self.test_projector(y)?;
        Ok((&proj * fp.amps()).dotc(fp.amps()).re.clamp(0.0, 1.0))
    }

    /// Exact acceptance probability tr[Pi_{F_y} f(x)] of the mixed
    /// fingerprint of message x against y.
    pub fn test_message(&self, x: u64, y: u64) -> Result<f64> {
        let (p, d_b) = self.dims();
        let proj = self.test_projector(y)?;
        let xm = (x % p as u64) as usize;
        let mut acc = 0.0;
        for k in 0..self.params.t {
            for b in 0..d_b {
                let e = StateVector::basis_state(vec![p, d_b], xm * d_b + b)?;
                let v = self.ens.member(k).apply_adjoint(&e);
                acc += (&proj * v.amps()).dotc(v.amps()).re;
            }
        }
        Ok((acc / (self.params.t * d_b) as f64).clamp(0.0, 1.0))
    }

    /// The fingerprint encoder seen as a locking scheme of the residue
    /// x mod p, for hiding-side attack evaluation.
    pub fn as_locking(&self) -> Result<LockingScheme> {
        LockingScheme::with_dims(self.ens.clone(), self.params.p as usize, self.params.d_b)
    }

    /// Maximum cross overlap of the member bases (k != k'), the measured
    /// gamma-MUB quality entering the acceptance-error bound.
    pub fn measured_overlap(&self) -> f64 {
        let dense = self.ens.dense_members();
        let mut max: f64 = 0.0;
        for i in 0..dense.len() {
            for j in 0..dense.len() {
                if i == j {
                    continue;
                }
                let g = &dense[i] * dense[j].adjoint();
                for z in g.iter() {
                    max = max.max(z.norm());
                }
            }
        }
        max
    }

    /// Acceptance-error bound 3 (t d_B)^2 c^2 with c the measured overlap.
    pub fn error_bound(&self) -> f64 {
        let c = self.measured_overlap();
        let td = (self.params.t * self.params.d_b) as f64;
        3.0 * td * td * c * c
    }
}

/// Exact acceptance probability of the identification protocol: branch
/// weights come from measuring (K, A) on the superposed encoding of psi,
/// branch decoders project on the matching branch of phi. Zero-weight psi
/// branches are skipped; zero phi branches accept with probability 0.
pub fn qid_accept_prob(
    ens: &EnsembleSpec,
    psi: &StateVector,
    phi: &StateVector,
    d_a: usize,
) -> Result<f64> {
    let d = ens.dim();
    if psi.total_dim() != d || phi.total_dim() != d {
        return Err(Error::DimensionMismatch("state dimension".into()));
    }
    if d_a == 0 || !d.is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!(
            "dim {d} does not split off an A factor of {d_a}"
        )));
    }
    let d_b = d / d_a;
    let t = ens.len() as f64;
    let mut accept = 0.0;
    for m in ens.members() {
        let up = m.apply(psi);
        let vp = m.apply(phi);
        for a in 0..d_a {
            let mut wp = 0.0;
            let mut wq = 0.0;
            let mut inner = C64::new(0.0, 0.0);
            for b in 0..d_b {
                let x = up.amps()[a * d_b + b];
                let y = vp.amps()[a * d_b + b];
                wp += x.norm_sqr();
                wq += y.norm_sqr();
                inner += x.conj() * y;
            }
            if wp < 1e-30 || wq < 1e-30 {
                continue;
            }
            // weight (1/t) p^A(a), branch fidelity |<psi_hat|phi_hat>|^2
            accept += (wp / t) * inner.norm_sqr() / (wp * wq);
        }
    }
    Ok(accept.clamp(0.0, 1.0))
}

/// One sampled protocol round: measure (K, A), then the branch projector.
pub fn qid_round(
    ens: &EnsembleSpec,
    psi: &StateVector,
    phi: &StateVector,
    d_a: usize,
    rng: &mut impl Rng,
) -> Result<bool> {
    let d = ens.dim();
    let d_b = d / d_a;
    let t = ens.len();
    // sample (k, a) with probability (1/t) p^A_{U_k psi}(a)
    let k = rng.random_range(0..t);
    let up = ens.member(k).apply(psi);
    let pa = up.reshaped(vec![d_a, d_b])?.measure_marginal(&[0])?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut a_out = d_a - 1;
    for (a, &p) in pa.probs().iter().enumerate() {
        acc += p;
        if u < acc {
            a_out = a;
            break;
        }
    }
    let vp = ens.member(k).apply(phi);
    let mut wp = 0.0;
    let mut wq = 0.0;
    let mut inner = C64::new(0.0, 0.0);
    for b in 0..d_b {
        let x = up.amps()[a_out * d_b + b];
        let y = vp.amps()[a_out * d_b + b];
        wp += x.norm_sqr();
        wq += y.norm_sqr();
        inner += x.conj() * y;
    }
    if wp < 1e-30 || wq < 1e-30 {
        return Ok(false);
    }
    let fid = inner.norm_sqr() / (wp * wq);
    Ok(rng.random::<f64>() < fid)
}

/// Measured flatness deficiency of the encoding isometry on the vectors the
/// deviation bound needs: psi, phi, psi +- phi, psi +- i phi. For each, the
/// branch-mass profile is compared with the flat profile 1/(t d_A),
/// normalized by the vector norm.
pub fn qid_deficiency(
    ens: &EnsembleSpec,
    psi: &StateVector,
    phi: &StateVector,
    d_a: usize,
) -> Result<f64> {
    let d = ens.dim();
    let d_b = d / d_a;
    let t = ens.len() as f64;
    let i = C64::new(0.0, 1.0);
    let combos: Vec<DVector<C64>> = vec![
        psi.amps().clone(),
        phi.amps().clone(),
        psi.amps() + phi.amps(),
        psi.amps() - phi.amps(),
        psi.amps() + phi.amps() * i,
        psi.amps() - phi.amps() * i,
    ];
    let mut eps_bar = 0.0_f64;
    for v in combos {
        let norm2 = v.norm_squared();
        if norm2 < 1e-30 {
            continue;
        }
        let state = StateVector::new(vec![d], v.clone().map(|z| z / c(norm2.sqrt())))?;
        let flat = 1.0 / (t * d_a as f64);
        let mut def = 0.0;
        for m in ens.members() {
            let out = m.apply(&state);
            for a in 0..d_a {
                let mut w = 0.0;
                for b in 0..d_b {
                    w += out.amps()[a * d_b + b].norm_sqr();
                }
                def += (w / t - flat).abs();
            }
        }
        eps_bar = eps_bar.max(def);
    }
    Ok(eps_bar)
}

/// The identification deviation bound 12 eps + 2 sqrt(eps).
pub fn qid_deviation_bound(eps_bar: f64) -> f64 {
    12.0 * eps_bar + 2.0 * eps_bar.sqrt()
}

/// Exact perfect-distinguishability check: trace distance between the mixed
/// ciphertexts of two messages under the same key.
pub fn ciphertext_distance(scheme: &LockingScheme, x1: u64, x2: u64, k: usize) -> Result<f64> {
    let r1 = scheme.encode_mixed(x1, k)?;
    let r2 = scheme.encode_mixed(x2, k)?;
    trace_distance(&r1, &r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mub::{build_exact_mubs, UnitarySpec};
    use crate::quantum::haar_state;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn toy_scheme() -> LockingScheme {
        // 2-message scheme from the full qubit MUB triple, B trivial
        LockingScheme::new(build_exact_mubs(1, 3).unwrap(), 1, 1).unwrap()
    }

    fn toy_scheme_with_b() -> LockingScheme {
        // n=2 message bits with a 2-dimensional B register on 3 qubits
        let ens = build_exact_mubs(3, 5).unwrap();
        LockingScheme::new(ens, 2, 2).unwrap()
    }

    #[test]
    fn roundtrip_full_grid() {
        let s = toy_scheme_with_b();
        for x in 0..4u64 {
            for k in 0..s.key_count() {
                for b in 0..s.d_b() {
                    let ct = s.encode(x, k, b).unwrap();
                    let dist = s.decode_dist(&ct, k).unwrap();
                    let idx = x as usize * s.d_b() + b;
                    assert!((dist.probs()[idx] - 1.0).abs() < 1e-10);
                }
            }
        }
        assert!(s.encode(4, 0, 0).is_err());
        assert!(s.encode(0, 9, 0).is_err());
        assert!(s.encode(0, 0, 7).is_err());
    }

    #[test]
    fn otp_variant_roundtrip() {
        let s = toy_scheme_with_b();
        let mut r = rng(21);
        for x in 0..4u64 {
            for extra in 0..2u64 {
                for pad in 0..2u64 {
                    let k = r.random_range(0..s.key_count());
                    let ct = s.encode_otp(x, extra, k, pad).unwrap();
                    let (gx, gextra) = s.decode_otp(&ct, k, pad, &mut r).unwrap();
                    assert_eq!((gx, gextra), (x, extra));
                    // without the pad the extra bits stay masked
                    let (_, masked) = s.decode_otp(&ct, k, pad ^ 1, &mut r).unwrap();
                    assert_eq!(masked, extra ^ 1);
                }
            }
        }
    }

    #[test]
    fn ciphertext_orthogonality_and_distance() {
        let s = toy_scheme_with_b();
        for k in 0..s.key_count() {
            for b1 in 0..s.d_b() {
                for b2 in 0..s.d_b() {
                    let c1 = s.encode(1, k, b1).unwrap();
                    let c2 = s.encode(2, k, b2).unwrap();
                    assert!(c1.inner(&c2).norm() < 1e-10);
                }
            }
            assert!((ciphertext_distance(&s, 1, 2, k).unwrap() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn identity_scheme_does_not_hide() {
        // ensemble {I}: ciphertext is |x>|b>, so the computational attack
        // identifies the message
        let ens =
            EnsembleSpec::new(vec![Member::Staged(UnitarySpec::identity(2))]).unwrap();
        let s = LockingScheme::new(ens, 2, 1).unwrap();
        let ct = s.encode(3, 0, 0).unwrap();
        assert!((ct.amps()[3].norm() - 1.0).abs() < 1e-12);
        let rep = attack_eval(&s, &computational_povm(4), &MessageSource::Uniform).unwrap();
        assert!((rep.max_delta - (1.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn three_mub_attack_posterior() {
        // computational attack on the qubit triple: posterior (2/3, 1/3),
        // leakage exactly 1/6
        let s = toy_scheme();
        let rep = attack_eval(&s, &computational_povm(2), &MessageSource::Uniform).unwrap();
        assert!((rep.max_delta - 1.0 / 6.0).abs() < 1e-12);
        for row in &rep.rows {
            let hi = row.posterior.iter().cloned().fold(0.0_f64, f64::max);
            assert!((hi - 2.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_total_probability() {
        // sum_i Pr[I=i] p_{X|i} = p_X on a random rank-1 POVM
        let s = toy_scheme_with_b();
        let mut r = rng(3);
        // random orthonormal basis as the measurement
        let u = haar_unitary(8, &mut r);
        let povm: Vec<WeightedOutcome> = (0..8)
            .map(|j| WeightedOutcome {
                weight: 1.0,
                vector: u.column(j).into_owned(),
            })
            .collect();
        let rep = attack_eval(&s, &povm, &MessageSource::Uniform).unwrap();
        let total_p: f64 = rep.rows.iter().map(|r| r.prob).sum();
        assert!((total_p - 1.0).abs() < 1e-10);
        for x in 0..4 {
            let recon: f64 = rep.rows.iter().map(|r| r.prob * r.posterior[x]).sum();
            assert!((recon - 0.25).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_source_leakage_bound() {
        // uniform over half the messages (l = n - 1): measured leakage obeys
        // 2 eps_hat / (2^(l-n) - eps_hat) whenever eps_hat < 2^(l-n),
        // with eps_hat measured on the attack vectors themselves
        let s = toy_scheme_with_b();
        let mut r = rng(4);
        let u = haar_unitary(8, &mut r);
        let povm: Vec<WeightedOutcome> = (0..8)
            .map(|j| WeightedOutcome {
                weight: 1.0,
                vector: u.column(j).into_owned(),
            })
            .collect();
        let support = vec![0u64, 1];
        let rep = attack_eval(&s, &povm, &MessageSource::Flat(support)).unwrap();
        // measured ensemble error on the attack vectors
        let mut eps_hat = 0.0_f64;
        for o in &povm {
            let st = StateVector::new(vec![4, 2], o.vector.clone()).unwrap();
            eps_hat = eps_hat.max(
                crate::mur::eval_mur(s.ensemble(), &st, 4).unwrap().avg,
            );
        }
        let ratio = 0.5; // 2^(l - n)
        if eps_hat < ratio {
            let bound = 2.0 * eps_hat / (ratio - eps_hat);
            assert!(
                rep.max_delta <= bound + 1e-9,
                "delta {} > {bound}",
                rep.max_delta
            );
        }
    }

    #[test]
    fn commitment_honest_and_dishonest() {
        let s = toy_scheme_with_b();
        let mut r = rng(5);
        for x in 0..4u64 {
            let k = r.random_range(0..s.key_count());
            let com = commit(&s, x, k, &mut r).unwrap();
            // honest reveal accepts
            assert!((verify_prob(&s, &com, x, k).unwrap() - 1.0).abs() < 1e-10);
            assert!(verify(&s, &com, x, k, &mut r).unwrap());
            // wrong message rejects
            let x2 = (x + 1) % 4;
            assert!(verify_prob(&s, &com, x2, k).unwrap() < 1e-10);
            // wrong key: acceptance from the exact decode distribution
            let k2 = (k + 1) % s.key_count();
            let p = verify_prob(&s, &com, x, k2).unwrap();
            let dist = s.decode_dist(&com.state, k2).unwrap();
            let lo = x as usize * s.d_b();
            let expect: f64 = dist.probs()[lo..lo + s.d_b()].iter().sum();
            assert!((p - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn fingerprint_accepts_own_message() {
        let mut r = rng(6);
        let params = FingerprintParams::toy(8, 5, 2, 2).unwrap();
        let scheme = FingerprintScheme::new(params, &mut r).unwrap();
        for x in [0u64, 7, 200] {
            // exact mixed acceptance is 1
            let p = scheme.test_message(x, x).unwrap();
            assert!((p - 1.0).abs() < 1e-9, "p = {p}");
            // and any sampled pure fingerprint accepts
            let fp = scheme.make(x, &mut r).unwrap();
            assert!((scheme.test_state(&fp, x).unwrap() - 1.0).abs() < 1e-9);
        }
        // projector idempotence
        let proj = scheme.test_projector(3).unwrap();
        assert!((&proj * &proj - &proj).norm() < 1e-10);
    }

    #[test]
    fn fingerprint_error_bound() {
        let mut r = rng(7);
        let params = FingerprintParams::toy(8, 11, 2, 2).unwrap();
        let scheme = FingerprintScheme::new(params, &mut r).unwrap();
        let bound = scheme.error_bound();
        for (x, y) in [(0u64, 1u64), (3, 7), (12, 4)] {
            assert_ne!(x % 11, y % 11);
            let p = scheme.test_message(x, y).unwrap();
            assert!(p <= bound + 1e-9, "accept {p} > bound {bound}");
        }
    }

    #[test]
    fn fingerprint_hiding_via_attack() {
        // hiding of the residue: any rank-1 attack's posterior leakage is
        // bounded by the measured uncertainty of the attack vectors
        let mut r = rng(22);
        let params = FingerprintParams::toy(8, 5, 3, 2).unwrap();
        let scheme = FingerprintScheme::new(params, &mut r).unwrap();
        let lock = scheme.as_locking().unwrap();
        let dim = 10;
        let u = haar_unitary(dim, &mut r);
        let povm: Vec<WeightedOutcome> = (0..dim)
            .map(|j| WeightedOutcome {
                weight: 1.0,
                vector: u.column(j).into_owned(),
            })
            .collect();
        let rep = attack_eval(&lock, &povm, &MessageSource::Uniform).unwrap();
        let mut eps_hat = 0.0_f64;
        for o in &povm {
            let st = StateVector::new(vec![5, 2], o.vector.clone()).unwrap();
            eps_hat = eps_hat.max(crate::mur::eval_mur(lock.ensemble(), &st, 5).unwrap().avg);
        }
        assert!(
            rep.max_delta <= eps_hat + 1e-9,
            "delta {} > measured eps {eps_hat}",
            rep.max_delta
        );
    }

    #[test]
    fn fingerprint_single_member_is_projective() {
        // t = 1, d_B = 1: the test space is one-dimensional
        let mut r = rng(8);
        let params = FingerprintParams::toy(6, 5, 1, 1).unwrap();
        let scheme = FingerprintScheme::new(params, &mut r).unwrap();
        let fp = scheme.make(2, &mut r).unwrap();
        let y = 3u64;
        let e = StateVector::basis_state(vec![5, 1], 3).unwrap();
        let target = scheme.ensemble().member(0).apply_adjoint(&e);
        let expect = fp.inner(&target).norm_sqr();
        let got = scheme.test_state(&fp, y).unwrap();
        assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn qid_accepts_equal_states() {
        let ens = build_exact_mubs(2, 5).unwrap();
        let mut r = rng(9);
        for _ in 0..5 {
            let psi = haar_state(vec![4], &mut r);
            let p = qid_accept_prob(&ens, &psi, &psi, 2).unwrap();
            assert!((p - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn qid_single_branch_is_exact_overlap() {
        // t = 1 and trivial A: accept probability is exactly |<phi|psi>|^2
        let ens =
            EnsembleSpec::new(vec![Member::Staged(UnitarySpec::identity(2))]).unwrap();
        let mut r = rng(10);
        for _ in 0..10 {
            let psi = haar_state(vec![4], &mut r);
            let phi = haar_state(vec![4], &mut r);
            let p = qid_accept_prob(&ens, &psi, &phi, 1).unwrap();
            assert!((p - psi.inner(&phi).norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn qid_orthogonal_states_within_bound() {
        // full qubit triple on psi = |0>, phi = |1>: the exact branch sum
        // stays within the deviation bound of the true overlap 0
        let ens = build_exact_mubs(1, 3).unwrap();
        let psi = StateVector::basis_state(vec![2], 0).unwrap();
        let phi = StateVector::basis_state(vec![2], 1).unwrap();
        let p = qid_accept_prob(&ens, &psi, &phi, 2).unwrap();
        let eps = qid_deficiency(&ens, &psi, &phi, 2).unwrap();
        assert!(p <= qid_deviation_bound(eps) + 1e-9, "p {p}, eps {eps}");
    }

    #[test]
    fn qid_branch_weights_sum_to_one() {
        let ens = build_exact_mubs(2, 5).unwrap();
        let mut r = rng(11);
        let psi = haar_state(vec![4], &mut r);
        let t = ens.len() as f64;
        let mut total = 0.0;
        for m in ens.members() {
            let up = m.apply(&psi);
            total += up.amps().norm_squared() / t;
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qid_sampled_rounds_match_exact() {
        let ens = build_exact_mubs(1, 3).unwrap();
        let mut r = rng(12);
        let psi = haar_state(vec![2], &mut r);
        let phi = haar_state(vec![2], &mut r);
        let exact = qid_accept_prob(&ens, &psi, &phi, 2).unwrap();
        let n = 20000;
        let mut hits = 0;
        for _ in 0..n {
            if qid_round(&ens, &psi, &phi, 2, &mut r).unwrap() {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        let sigma = (exact * (1.0 - exact) / n as f64).sqrt().max(1e-3);
        assert!((freq - exact).abs() < 5.0 * sigma, "{freq} vs {exact}");
    }
}
