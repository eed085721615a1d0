//! Weak string erasure: a prepare-and-measure simulation with three bases
//! per qubit, correctness checks against the ideal output state, and the
//! noisy-storage security parameter calculus.

use crate::qcext::qubit_triple;
use crate::quantum::{C64, Distribution, StateVector};
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// One honest protocol execution.
#[derive(Clone, Debug, Serialize)]
pub struct WseTranscript {
    pub n: usize,
    /// Alice's basis string (values 0, 1, 2) and outcome bits.
    pub theta: Vec<u8>,
    pub x: Vec<u8>,
    /// Bob's basis string and outcome bits.
    pub theta_b: Vec<u8>,
    pub x_b: Vec<u8>,
    /// Matched positions I = {i : theta_i = theta_b_i} and the substring
    /// z = x_b restricted to I.
    pub matched: Vec<usize>,
    pub z: Vec<u8>,
}

/// Per-qubit outcome distributions |<y| V_b V_a^dag |x>|^2 for all basis
/// pairs, computed from the actual 2x2 matrices.
fn outcome_table() -> [[[[f64; 2]; 2]; 3]; 3] {
    let triple = qubit_triple();
    let mut table = [[[[0.0; 2]; 2]; 3]; 3];
    for (a, va) in triple.iter().enumerate() {
        for (b, vb) in triple.iter().enumerate() {
            let w = vb * va.adjoint();
            for x in 0..2 {
                for y in 0..2 {
                    table[a][b][x][y] = w[(y, x)].norm_sqr();
                }
            }
        }
    }
    table
}

/// Run the honest protocol in prepare-and-measure form: per qubit, Alice
/// prepares V_theta^dag |x> and Bob measures in basis theta_b; the outcome
/// is sampled from the exact single-qubit amplitudes.
pub fn wse_run(n: usize, rng: &mut impl Rng) -> WseTranscript {
    let table = outcome_table();
    let mut theta = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut theta_b = Vec::with_capacity(n);
    let mut x_b = Vec::with_capacity(n);
    for _ in 0..n {
        let a = rng.random_range(0..3u8);
        let bit = rng.random_range(0..2u8);
        let b = rng.random_range(0..3u8);
        let p0 = table[a as usize][b as usize][bit as usize][0];
        let out = if rng.random::<f64>() < p0 { 0u8 } else { 1u8 };
        theta.push(a);
        x.push(bit);
        theta_b.push(b);
        x_b.push(out);
    }
    let matched: Vec<usize> = (0..n).filter(|&i| theta[i] == theta_b[i]).collect();
    let z: Vec<u8> = matched.iter().map(|&i| x_b[i]).collect();
    WseTranscript {
        n,
        theta,
        x,
        theta_b,
        x_b,
        matched,
        z,
    }
}

/// Independent transcripts from per-index RNG streams.
pub fn wse_run_batch(n: usize, count: usize, seed: u64) -> Vec<WseTranscript> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            wse_run(n, &mut rng)
        })
        .collect()
}

/// Joint distribution over (x^n, I) of the purified protocol at fixed basis
/// strings: Alice measures her EPR halves in theta, Bob his in theta_b. Used
/// as the cross-check that the entangled form agrees in distribution with
/// the prepare-and-measure form.
pub fn epr_joint_distribution(theta: &[u8], theta_b: &[u8]) -> Result<Vec<f64>> {
    let n = theta.len();
    if n != theta_b.len() || n > 3 {
        return Err(Error::InvalidParameter(
            "entangled cross-check supports n <= 3".into(),
        ));
    }
    let triple = qubit_triple();
    // Per-qubit joint outcome probabilities from measuring an EPR pair.
    // Projecting Alice's half onto a basis vector steers Bob's half onto
    // its conjugate (the transpose trick), so the purified form equivalent
    // to preparing V_a^dag |x> measures Alice in the conjugated basis.
    let mut out = vec![1.0f64; 1 << (2 * n)];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        let va = triple[theta[i] as usize].map(|z| z.conj());
        let vb = &triple[theta_b[i] as usize];
        let mut phi = DVector::from_element(4, C64::new(0.0, 0.0));
        phi[0] = C64::new(s, 0.0);
        phi[3] = C64::new(s, 0.0);
        let rotated = (va.kronecker(vb)) * phi;
        let mut p = [[0.0f64; 2]; 2];
        for xa in 0..2 {
            for xb in 0..2 {
                p[xa][xb] = rotated[xa * 2 + xb].norm_sqr();
            }
        }
        for (idx, val) in out.iter_mut().enumerate() {
            let xa = (idx >> (2 * n - 1 - i)) & 1;
            let xb = (idx >> (n - 1 - i)) & 1;
            *val *= p[xa][xb];
        }
    }
    Ok(out)
}

/// Prepare-and-measure joint distribution over (x^n, x_b^n) at fixed bases.
pub fn pm_joint_distribution(theta: &[u8], theta_b: &[u8]) -> Result<Vec<f64>> {
    let n = theta.len();
    if n != theta_b.len() || n > 3 {
        return Err(Error::InvalidParameter(
            "cross-check supports n <= 3".into(),
        ));
    }
    let table = outcome_table();
    let mut out = vec![1.0f64; 1 << (2 * n)];
    for i in 0..n {
        for (idx, val) in out.iter_mut().enumerate() {
            let xa = (idx >> (2 * n - 1 - i)) & 1;
            let xb = (idx >> (n - 1 - i)) & 1;
            *val *= 0.5 * table[theta[i] as usize][theta_b[i] as usize][xa][xb];
        }
    }
    Ok(out)
}

/// Ideal subset weights: Pr[I] = p^#I (1-p)^(n-#I) for each I in 2^[n].
pub fn psi_masses(p: f64, n: usize) -> Vec<f64> {
    (0..(1usize << n))
        .map(|s| {
            let k = (s as u64).count_ones() as i32;
            p.powi(k) * (1.0 - p).powi(n as i32 - k)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrectnessReport {
    pub cells: usize,
    pub tv_empirical: f64,
    pub chi2: f64,
    pub chi2_threshold: f64,
    /// Number of transcripts where the matched substring differed from
    /// Alice's bits (must be zero).
    pub substring_mismatches: usize,
    pub pass: bool,
}

/// Compare the empirical joint distribution of (x^n, I) with the ideal
/// product uniform x Psi(1/3). Expects at least 10^4 transcripts at n <= 4.
pub fn wse_correctness_check(transcripts: &[WseTranscript]) -> Result<CorrectnessReport> {
    let Some(first) = transcripts.first() else {
        return Err(Error::InvalidParameter("no transcripts".into()));
    };
    let n = first.n;
    if n > 4 {
        return Err(Error::InvalidParameter(
            "exact histogram check limited to n <= 4".into(),
        ));
    }
    if transcripts.len() < 10_000 {
        return Err(Error::InvalidParameter(
            "need at least 10^4 transcripts".into(),
        ));
    }
    let cells = 1usize << (2 * n);
    let mut counts = vec![0u64; cells];
    let mut substring_mismatches = 0;
    for t in transcripts {
        if t.n != n {
            return Err(Error::DimensionMismatch("mixed transcript widths".into()));
        }
        let mut xi = 0usize;
        for &b in &t.x {
            xi = (xi << 1) | b as usize;
        }
        let mut set = 0usize;
        for &i in &t.matched {
            set |= 1 << i;
        }
        counts[xi * (1 << n) + set] += 1;
        // on I the substring equals Alice's bits exactly in every transcript
        if t.matched.iter().zip(&t.z).any(|(&i, &zb)| t.x[i] != zb) {
            substring_mismatches += 1;
        }
    }
    let total = transcripts.len() as f64;
    let psi = psi_masses(1.0 / 3.0, n);
    let mut tv = 0.0;
    let mut chi2 = 0.0;
    for xi in 0..(1 << n) {
        for (s, &ps) in psi.iter().enumerate() {
            let ideal = ps / (1 << n) as f64;
            let emp = counts[xi * (1 << n) + s] as f64 / total;
            tv += 0.5 * (emp - ideal).abs();
            chi2 += (emp * total - ideal * total).powi(2) / (ideal * total);
        }
    }
    let df = (cells - 1) as f64;
    let chi2_threshold = df + 5.0 * (2.0 * df).sqrt();
    Ok(CorrectnessReport {
        cells,
        tv_empirical: tv,
        chi2,
        chi2_threshold,
        substring_mismatches,
        pass: substring_mismatches == 0 && chi2 <= chi2_threshold,
    })
}

/// Storage-channel fidelity ceiling 2^(-n+N) for sending n qubits through
/// an N-qubit noiseless memory; vacuous (1, flagged) when N >= n.
pub fn channel_fidelity_bound(n: u64, stored: u64) -> (f64, bool) {
    if stored >= n {
        (1.0, true)
    } else {
        (2f64.powi(-((n - stored) as i32)), false)
    }
}

/// Security calculus for the bounded-storage instantiation.
#[derive(Clone, Debug, Serialize)]
pub struct SecurityParams {
    pub n: u64,
    pub eps: f64,
    pub stored: u64,
    pub kappa: f64,
    pub lambda_max: f64,
    pub secure: bool,
}

/// lambda_max = (log 3 - 1) - N/n - kappa/n clamped to [0, log 3 - 1], with
/// kappa = 8 log2(4/eps); secure iff the clamp is strictly positive.
pub fn wse_security_params(n: u64, eps: f64, stored: u64) -> Result<SecurityParams> {
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be in (0,1), got {eps}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let kappa = 8.0 * (4.0 / eps).log2();
    let cap = 3f64.log2() - 1.0;
    let raw = cap - stored as f64 / n as f64 - kappa / n as f64;
    let lambda_max = raw.clamp(0.0, cap);
    Ok(SecurityParams {
        n,
        eps,
        stored,
        kappa,
        lambda_max,
        secure: raw > 0.0,
    })
}

/// Empirical guessing statistics of two fixed dishonest strategies. These
/// are demonstrations only; no security statement is attached.
#[derive(Clone, Debug, Serialize)]
pub struct AdversaryReport {
    pub strategy: String,
    pub qubits: usize,
    pub guess_rate: f64,
}

/// Bob measures every qubit immediately in a random basis (classical
/// memory only), then learns theta and keeps his outcome as the guess.
pub fn adversary_measure_all(n: usize, seed: u64) -> AdversaryReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = outcome_table();
    let mut hits = 0usize;
    for _ in 0..n {
        let a = rng.random_range(0..3u8);
        let bit = rng.random_range(0..2u8);
        let b = rng.random_range(0..3u8);
        let p0 = table[a as usize][b as usize][bit as usize][0];
        let out = if rng.random::<f64>() < p0 { 0u8 } else { 1u8 };
        if out == bit {
            hits += 1;
        }
    }
    AdversaryReport {
        strategy: "measure-all-immediately".into(),
        qubits: n,
        guess_rate: hits as f64 / n as f64,
    }
}

/// Bob stores the first `stored` qubits until theta is announced (measuring
/// them in the right basis) and measures the rest immediately.
pub fn adversary_store_first(n: usize, stored: usize, seed: u64) -> AdversaryReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = outcome_table();
    let mut hits = 0usize;
    for i in 0..n {
        let a = rng.random_range(0..3u8);
        let bit = rng.random_range(0..2u8);
        if i < stored {
            hits += 1; // measured in the announced basis later: deterministic
            continue;
        }
        let b = rng.random_range(0..3u8);
        let p0 = table[a as usize][b as usize][bit as usize][0];
        let out = if rng.random::<f64>() < p0 { 0u8 } else { 1u8 };
        if out == bit {
            hits += 1;
        }
    }
    AdversaryReport {
        strategy: "store-first-qubits".into(),
        qubits: n,
        guess_rate: hits as f64 / n as f64,
    }
}

/// Convenience for the honest-run statistics of a batch.
#[derive(Clone, Debug, Serialize)]
pub struct HonestRunStats {
    pub qubits: u64,
    pub matched_disagreements: u64,
    pub match_rate: f64,
    pub mismatch_agree_rate: f64,
    pub x_bias: f64,
}

pub fn honest_run_stats(transcripts: &[WseTranscript]) -> HonestRunStats {
    let mut qubits = 0u64;
    let mut matched = 0u64;
    let mut matched_disagree = 0u64;
    let mut mismatch = 0u64;
    let mut mismatch_agree = 0u64;
    let mut ones = 0u64;
    for t in transcripts {
        qubits += t.n as u64;
        for i in 0..t.n {
            if t.x[i] == 1 {
                ones += 1;
            }
            if t.theta[i] == t.theta_b[i] {
                matched += 1;
                if t.x[i] != t.x_b[i] {
                    matched_disagree += 1;
                }
            } else {
                mismatch += 1;
                if t.x[i] == t.x_b[i] {
                    mismatch_agree += 1;
                }
            }
        }
    }
    HonestRunStats {
        qubits,
        matched_disagreements: matched_disagree,
        match_rate: matched as f64 / qubits as f64,
        mismatch_agree_rate: mismatch_agree as f64 / mismatch.max(1) as f64,
        x_bias: ones as f64 / qubits as f64,
    }
}

/// Mutual information (in bits) of the empirical joint histogram of two
/// binary strings; used to confirm I is independent of x^n.
pub fn empirical_mutual_information(pairs: &[(usize, usize)], da: usize, db: usize) -> f64 {
    let total = pairs.len() as f64;
    let mut joint = vec![0.0; da * db];
    let mut pa = vec![0.0; da];
    let mut pb = vec![0.0; db];
    for &(a, b) in pairs {
        joint[a * db + b] += 1.0 / total;
        pa[a] += 1.0 / total;
        pb[b] += 1.0 / total;
    }
    let mut mi = 0.0;
    for a in 0..da {
        for b in 0..db {
            let p = joint[a * db + b];
            if p > 0.0 {
                mi += p * (p / (pa[a] * pb[b])).log2();
            }
        }
    }
    mi
}

/// Distribution over match-set sizes in a batch (for quick binomial checks).
pub fn match_size_distribution(transcripts: &[WseTranscript], n: usize) -> Distribution {
    let mut counts = vec![0.0; n + 1];
    for t in transcripts {
        counts[t.matched.len()] += 1.0 / transcripts.len() as f64;
    }
    Distribution::new(counts).expect("histogram sums to 1")
}

/// The prepared single-qubit state V_theta^dag |x> (exposed for tests).
pub fn prepared_qubit(theta: u8, x: u8) -> StateVector {
    let triple = qubit_triple();
    let v: DMatrix<C64> = triple[theta as usize].adjoint();
    let mut amps = DVector::from_element(2, C64::new(0.0, 0.0));
    amps[x as usize] = C64::new(1.0, 0.0);
    StateVector::new(vec![2], v * amps).expect("unit vector")
}
