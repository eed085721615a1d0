//! Acceptance suite: one test per release criterion, each printing a
//! pass/fail line with the measured figures. Run with
//! `cargo test -p qurlab --test acceptance -- --nocapture` to see them all.

use nalgebra::{DMatrix, DVector};
use qurlab::extractor::{
    check_bijective_exhaustive, lhl_family, random_flat_source, verify_extractor,
    BitPermutation,
};
use qurlab::gf::{FieldCtx, FieldElem};
use qurlab::locking::{
    attack_eval, computational_povm, qid_accept_prob, qid_deficiency, qid_deviation_bound,
    LockingScheme, MessageSource,
};
use qurlab::mub::{build_exact_mubs, build_hadamard_mubs, check_2design, HadamardVariant};
use qurlab::mur::{gamma_expectation, gamma_experiment, random_mur_experiment};
use qurlab::qcext::{
    build_bitwise_qcext, build_full_mub_qcext, decoupling_eval, vn_uncertainty_check, QcBound,
};
use qurlab::quantum::{
    fidelity, h2_rel, haar_state, hmin_rel, orthogonalize, random_density, swap_operator,
    trace_distance, C64, DensityOperator, StateVector,
};
use qurlab::wse::{honest_run_stats, wse_run_batch, wse_security_params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

fn report(id: &str, pass: bool, detail: &str) {
    println!(
        "{}: {} ({})",
        id,
        if pass { "PASS" } else { "FAIL" },
        detail
    );
    assert!(pass, "{id} failed: {detail}");
}

#[test]
fn c01_mub_exactness() {
    // every cross-basis overlap equals d^(-1/2) within 1e-10 at d = 2..16
    let mut worst = 0.0f64;
    for n in 1..=4usize {
        let d = 1usize << n;
        let ens = build_exact_mubs(n, d + 1).unwrap();
        let target = (d as f64).powf(-0.5);
        for i in 0..ens.len() {
            for j in (i + 1)..ens.len() {
                for y in 0..d {
                    let e = StateVector::basis_state(vec![d], y).unwrap();
                    let col = ens.member(i).apply_adjoint(&ens.member(j).apply(&e));
                    for a in col.amps().iter() {
                        worst = worst.max((a.norm() - target).abs());
                    }
                }
            }
        }
    }
    report(
        "c01 mub-exactness",
        worst <= 1e-10,
        &format!("max |overlap - d^-1/2| = {worst:.3e}"),
    );
}

#[test]
fn c02_two_design_identity() {
    let mut worst = 0.0f64;
    for n in 1..=3usize {
        let d = 1usize << n;
        let ens = build_exact_mubs(n, d + 1).unwrap();
        worst = worst.max(check_2design(&ens).unwrap());
    }
    report(
        "c02 two-design",
        worst < 1e-10,
        &format!("max residual = {worst:.3e}"),
    );
}

#[test]
fn c03_hadamard_pattern_law() {
    // max overlap equals 2^(-dist/2) exactly for all codeword pairs
    let mut worst = 0.0f64;
    for n_prime in 1..=3u32 {
        let r = 1usize << n_prime;
        let variant = HadamardVariant::HadamardCode { r };
        let cw = qurlab::mub::hadamard_mub_codewords(n_prime, variant).unwrap();
        let ens = build_hadamard_mubs(n_prime, variant).unwrap();
        for i in 0..r {
            for j in (i + 1)..r {
                let dist = (cw[i] ^ cw[j]).count_ones();
                let max = qurlab::mub::max_overlap_pair(&ens, i, j).unwrap();
                worst = worst.max((max - 2f64.powf(-(dist as f64) / 2.0)).abs());
            }
        }
    }
    report(
        "c03 hadamard-overlap-law",
        worst < 1e-12,
        &format!("max |overlap - 2^(-dist/2)| = {worst:.3e}"),
    );
}

#[test]
fn c04_rs_bijectivity() {
    // forward then inverse is the identity on all of GF(16)^3 for all seeds
    let ctx = FieldCtx::new(4).unwrap();
    let mut checked = 0u64;
    let mut ok = true;
    for s in 1..16u64 {
        let p = BitPermutation::rs_seeded(&ctx, 3, 1, FieldElem(s)).unwrap();
        ok &= check_bijective_exhaustive(&p);
        checked += 1 << 12;
    }
    report(
        "c04 rs-bijectivity",
        ok,
        &format!("{checked} cases over 15 seeds, zero failures"),
    );
}

#[test]
fn c05_lhl_extractor() {
    // (n=8, k=6, eps=1/2) gives m=2; 200 random flat sources stay under the
    // requested error and under the hash-lemma guarantee (1/2) sqrt(2^(m-k))
    let ctx = FieldCtx::new(8).unwrap();
    let fam = lhl_family(&ctx, 6.0, 0.5).unwrap();
    assert_eq!(fam.m_bits(), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sources: Vec<_> = (0..200).map(|_| random_flat_source(8, 6, &mut rng)).collect();
    let rep = verify_extractor(&fam, 0.5, &sources).unwrap();
    let lhl_guarantee = 0.5 * 2f64.powf((2.0 - 6.0) / 2.0); // 1/4
    let pass = rep.pass && rep.max_avg_tv <= lhl_guarantee + 1e-12;
    report(
        "c05 lhl-extractor",
        pass,
        &format!(
            "max avg TV = {:.6} (<= eps 0.5 and hash bound {lhl_guarantee})",
            rep.max_avg_tv
        ),
    );
}

#[test]
fn c06_locking_toy_attack() {
    // qubit triple, computational attack: posterior (2/3, 1/3), leakage 1/6
    let scheme = LockingScheme::new(build_exact_mubs(1, 3).unwrap(), 1, 1).unwrap();
    let rep = attack_eval(&scheme, &computational_povm(2), &MessageSource::Uniform).unwrap();
    let dev = (rep.max_delta - 1.0 / 6.0).abs();
    report(
        "c06 locking-toy-attack",
        dev <= 1e-12,
        &format!("max delta = {} (expected 1/6)", rep.max_delta),
    );
}

#[test]
fn c07_decoupling_full_mub() {
    // 100 Haar-pure states at d_A=4, d_A1=2, d_E=4: no bound violations,
    // and exact decoupling on the product state
    let ens = build_full_mub_qcext(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut max_margin = f64::NEG_INFINITY;
    for _ in 0..100 {
        let psi = haar_state(vec![4, 4], &mut rng);
        let rep = decoupling_eval(&ens, &psi.to_density(), 2, 4, QcBound::FullMub).unwrap();
        if !rep.pass {
            violations += 1;
        }
        max_margin = max_margin.max(rep.avg - rep.bound_h2);
    }
    let rho_e = random_density(vec![4], 4, &mut rng);
    let prod = DensityOperator::maximally_mixed(vec![4]).tensor(&rho_e);
    let rep0 = decoupling_eval(&ens, &prod, 2, 4, QcBound::FullMub).unwrap();
    let max0 = rep0.distances.iter().cloned().fold(0.0f64, f64::max);
    let pass = violations == 0 && max0 <= 1e-9;
    report(
        "c07 decoupling-full-mub",
        pass,
        &format!(
            "violations {violations}/100, worst margin {max_margin:.3e}, product-state lhs {max0:.3e}"
        ),
    );
}

#[test]
fn c08_decoupling_bitwise() {
    // 108-member bitwise family at d=2, n=2, d_A1=2, d_E=4 on 100 Haar states
    let ens = build_bitwise_qcext(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    let mut max_margin = f64::NEG_INFINITY;
    for _ in 0..100 {
        let psi = haar_state(vec![4, 4], &mut rng);
        let rep =
            decoupling_eval(&ens, &psi.to_density(), 2, 4, QcBound::Bitwise { d: 2, n: 2 })
                .unwrap();
        if !rep.pass {
            violations += 1;
        }
        max_margin = max_margin.max(rep.avg - rep.bound_h2);
    }
    report(
        "c08 decoupling-bitwise",
        violations == 0,
        &format!("violations {violations}/100, worst margin {max_margin:.3e}"),
    );
}

#[test]
fn c09_von_neumann_ur() {
    // 1000 random two-qubit states plus the |0> anchor
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let rho = random_density(vec![2, 2], 4, &mut rng);
        let rep = vn_uncertainty_check(&rho, 1).unwrap();
        if rep.lhs < rep.rhs - 1e-9 {
            violations += 1;
        }
        worst = worst.min(rep.lhs - rep.rhs);
    }
    let sig = random_density(vec![2], 2, &mut rng);
    let zero = StateVector::basis_state(vec![2], 0).unwrap().to_density();
    let rep = vn_uncertainty_check(&zero.tensor(&sig), 1).unwrap();
    let anchor_ok = (rep.lhs - 2.0 / 3.0).abs() < 1e-9 && rep.rhs < rep.lhs;
    report(
        "c09 von-neumann-ur",
        violations == 0 && anchor_ok,
        &format!(
            "violations {violations}/1000 (worst margin {worst:.3e}), |0> case lhs = {:.6} vs rhs = {:.6}",
            rep.lhs, rep.rhs
        ),
    );
}

#[test]
fn c10_gamma_formula() {
    // Monte-Carlo mean of the l1(l2) norm over 1e5 Haar states matches the
    // closed form within 3 standard errors, and the (2,1) spot value is 4/3
    let mut pass = true;
    let mut detail = String::new();
    for (d_a, d_b) in [(2usize, 2usize), (4, 4), (8, 8)] {
        let rep = gamma_experiment(d_a, d_b, 100_000, 10).unwrap();
        let expect = gamma_expectation(d_a as u64, d_b as u64);
        let ok = (rep.mean - expect).abs() <= 3.0 * rep.std_err;
        pass &= ok;
        detail.push_str(&format!(
            "({d_a},{d_b}): mean {:.6} vs {expect:.6} se {:.2e}; ",
            rep.mean, rep.std_err
        ));
    }
    let spot = gamma_expectation(2, 1);
    pass &= (spot - 4.0 / 3.0).abs() < 1e-12;
    detail.push_str(&format!("(2,1) closed form {spot:.12}"));
    report("c10 gamma-formula", pass, &detail);
}

#[test]
fn c11_wse_honest_run() {
    // 1e5 qubits: no matched-basis disagreements; match rate within 3 sigma
    // of 1/3; mismatched agreement within 3 sigma of 1/2
    let ts = wse_run_batch(100, 1000, 11);
    let stats = honest_run_stats(&ts);
    let n = stats.qubits as f64;
    let sig_match = (2.0 / 9.0 / n).sqrt();
    let sig_half = (0.25 / (n * 2.0 / 3.0)).sqrt();
    let pass = stats.matched_disagreements == 0
        && (stats.match_rate - 1.0 / 3.0).abs() <= 3.0 * sig_match
        && (stats.mismatch_agree_rate - 0.5).abs() <= 3.0 * sig_half;
    report(
        "c11 wse-honest-run",
        pass,
        &format!(
            "disagreements {}, match rate {:.5}, mismatch agreement {:.5}",
            stats.matched_disagreements, stats.match_rate, stats.mismatch_agree_rate
        ),
    );
}

#[test]
fn c12_noisy_storage_calculus() {
    let p = wse_security_params(10_000, 0.01, 3000).unwrap();
    let hand = 3f64.log2() - 1.0 - 0.3 - 8.0 * (400f64).log2() / 10_000.0;
    let pass = (p.lambda_max - hand).abs() < 1e-12 && (p.lambda_max - 0.278).abs() < 1e-3 && p.secure;
    report(
        "c12 noisy-storage-params",
        pass,
        &format!("lambda_max = {:.6} (hand value {hand:.6})", p.lambda_max),
    );
}

#[test]
fn c13_qid_deviation() {
    // 50 random state pairs under the d=8 full MUB ensemble, split A=4, B=2
    let ens = build_exact_mubs(3, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut violations = 0;
    let mut max_dev = f64::NEG_INFINITY;
    for _ in 0..50 {
        let psi = haar_state(vec![8], &mut rng);
        let phi = haar_state(vec![8], &mut rng);
        let accept = qid_accept_prob(&ens, &psi, &phi, 4).unwrap();
        let overlap = psi.inner(&phi).norm_sqr();
        let eps_bar = qid_deficiency(&ens, &psi, &phi, 4).unwrap();
        let dev = (accept - overlap).abs();
        max_dev = max_dev.max(dev - qid_deviation_bound(eps_bar));
        if dev > qid_deviation_bound(eps_bar) + 1e-9 {
            violations += 1;
        }
    }
    report(
        "c13 qid-deviation",
        violations == 0,
        &format!("violations {violations}/50, worst slack {max_dev:.3e}"),
    );
}

#[test]
fn c14_random_mur() {
    // 16 Haar members at d_A = d_B = 8 on 200 Haar states
    let rep = random_mur_experiment(8, 8, 16, 200, 14).unwrap();
    let bound = (1.0f64 / 8.0).sqrt() + 3.0 * rep.std_err;
    report(
        "c14 random-mur",
        rep.mean <= bound,
        &format!(
            "mean avg TV = {:.5} <= sqrt(1/8) + 3se = {bound:.5}",
            rep.mean
        ),
    );
}

#[test]
fn c15_oracle_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    // relative min-entropy never exceeds collision entropy
    let mut ok_ent = true;
    for _ in 0..1000 {
        let rho = random_density(vec![4, 4], 16, &mut rng);
        let rho_e = rho.partial_trace(&[1]).unwrap();
        let hm = hmin_rel(&rho, &rho_e, 4).unwrap();
        let h2 = h2_rel(&rho, &rho_e, 4).unwrap();
        ok_ent &= hm <= h2 + 1e-9;
    }
    // distance-fidelity sandwich
    let mut ok_fvg = true;
    for _ in 0..1000 {
        let a = random_density(vec![4], 4, &mut rng);
        let b = random_density(vec![4], 4, &mut rng);
        let d = trace_distance(&a, &b).unwrap();
        let f = fidelity(&a, &b).unwrap();
        ok_fvg &= 1.0 - f <= d + 1e-9 && d <= (1.0 - f * f).sqrt() + 1e-9;
    }
    // swap trick
    let mut ok_swap = true;
    for _ in 0..100 {
        let m = random_density(vec![4], 4, &mut rng).mat().clone();
        let n = random_density(vec![4], 4, &mut rng).mat().clone();
        let lhs = (&m * &n).trace();
        let rhs = (m.kronecker(&n) * swap_operator(4)).trace();
        ok_swap &= (lhs - rhs).norm() < 1e-9;
    }
    // polar orthogonalization bound
    let mut ok_orth = true;
    for _ in 0..100 {
        let d = 8;
        let s = 4;
        let u = qurlab::quantum::haar_unitary(d, &mut rng);
        let fam: Vec<DVector<C64>> = (0..s)
            .map(|j| {
                let mut v = u.column(j).into_owned()
                    + haar_state(vec![d], &mut rng).amps() * c(0.2 * rng.random::<f64>());
                let nrm = v.norm();
                v /= c(nrm);
                v
            })
            .collect();
        let eps: f64 = (0..s)
            .flat_map(|i| (0..s).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .map(|(i, j)| fam[i].dotc(&fam[j]).norm_sqr())
            .sum::<f64>()
            / s as f64;
        let out = orthogonalize(&fam).unwrap();
        let avg: f64 = (0..s)
            .map(|i| (&fam[i] - &out[i]).norm_squared())
            .sum::<f64>()
            / s as f64;
        ok_orth &= avg <= eps + 1e-9;
        // and the output Gram matrix is the identity
        let gram_dev: f64 = (0..s)
            .flat_map(|i| (0..s).map(move |j| (i, j)))
            .map(|(i, j)| {
                let want = if i == j { 1.0 } else { 0.0 };
                (out[i].dotc(&out[j]) - c(want)).norm()
            })
            .fold(0.0, f64::max);
        ok_orth &= gram_dev < 1e-10;
    }
    let _ = DMatrix::<C64>::identity(1, 1);
    report(
        "c15 oracle-invariants",
        ok_ent && ok_fvg && ok_swap && ok_orth,
        &format!("hmin<=h2 {ok_ent}, distance-fidelity {ok_fvg}, swap {ok_swap}, polar {ok_orth}"),
    );
}
