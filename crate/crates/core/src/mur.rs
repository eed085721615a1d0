//! Metric uncertainty relation ensembles: construction from approximate
//! MUBs composed with permutation extractors, exact per-state evaluation,
//! heuristic worst-case search, the entropic conversion, and the
//! random-ensemble and norm-expectation experiments.

use crate::extractor::ExtractorFamily;
use crate::mub::{
    build_hadamard_mubs, EnsembleSpec, HadamardVariant, Member, Stage, UnitarySpec,
};
use crate::quantum::{binary_entropy, haar_state, haar_unitary, C64, StateVector};
use crate::{Error, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Per-state evaluation of an ensemble: total variation of the A-marginal
/// measurement statistics from uniform, member by member.
#[derive(Clone, Debug, Serialize)]
pub struct MurEvalReport {
    pub d_a: usize,
    pub d_b: usize,
    pub tvs: Vec<f64>,
    pub avg: f64,
}

/// Exact per-member TV of the A-marginal from uniform; the ensemble-level
/// figure is the mean.
pub fn eval_mur(ens: &EnsembleSpec, state: &StateVector, d_a: usize) -> Result<MurEvalReport> {
    let d = ens.dim();
    if state.total_dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "state dim {} vs ensemble dim {}",
            state.total_dim(),
            d
        )));
    }
    if d_a == 0 || !d.is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!(
            "dim {d} does not split off an A factor of {d_a}"
        )));
    }
    let d_b = d / d_a;
    let mut tvs = Vec::with_capacity(ens.len());
    for m in ens.members() {
        let out = m.apply(state).reshaped(vec![d_a, d_b])?;
        tvs.push(out.measure_marginal(&[0])?.tv_uniform());
    }
    let avg = tvs.iter().sum::<f64>() / tvs.len() as f64;
    Ok(MurEvalReport { d_a, d_b, tvs, avg })
}

/// An uncertainty-relation ensemble together with its register split.
#[derive(Clone, Debug)]
pub struct MurEnsemble {
    pub ens: EnsembleSpec,
    /// Qubits in the (close to uniform) A register.
    pub a_qubits: usize,
    pub n_qubits: usize,
    /// Pattern count per extractor seed.
    pub r: usize,
    pub seed_count: u64,
}

impl MurEnsemble {
    pub fn d_a(&self) -> usize {
        1 << self.a_qubits
    }

    pub fn d_b(&self) -> usize {
        1 << (self.n_qubits - self.a_qubits)
    }
}

/// Toy overrides: an explicit pattern count and permutation family in place
/// of the theorem-scale parameters.
#[derive(Clone, Debug)]
pub struct Ur1Toy {
    pub r: usize,
    pub family: ExtractorFamily,
}

/// Single-stage construction: members P_y V_j with V_j a Hadamard-pattern
/// MUB and P_y drawn from a strong permutation extractor family; A is the
/// extractor head. Theorem-scale extractor widths are far beyond dense
/// verification, so desk-scale instances must pass toy overrides.
pub fn build_mur_ur1(n: usize, eps: f64, delta: f64, toy: Option<Ur1Toy>) -> Result<MurEnsemble> {
    if !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "pattern construction needs n = 2^n' qubits, got {n}"
        )));
    }
    let n_prime = n.trailing_zeros();
    let eps_p = eps / 6.0;
    let (r, family) = match toy {
        Some(t) => (t.r, t.family),
        None => {
            let r = (2.0 / (eps_p * eps_p)).ceil() as usize;
            // theorem extractor: min-entropy floor (1 - delta/2) n/4 - log(8/eps'^2)
            let ell = (1.0 - delta / 2.0) * n as f64 / 4.0 - (8.0 / (eps_p * eps_p)).log2();
            return Err(Error::Infeasible(format!(
                "theorem-scale instance (r = {r}, extractor floor l = {ell:.1} bits on n = {n}) \
                 is beyond dense verification; pass toy overrides"
            )));
        }
    };
    if family.n_bits() as usize != n {
        return Err(Error::DimensionMismatch(format!(
            "extractor width {} != {} qubits",
            family.n_bits(),
            n
        )));
    }
    let patterns = build_hadamard_mubs(n_prime, HadamardVariant::HadamardCode { r })?;
    let seeds = family.seed_count();
    let mut members = Vec::with_capacity(r * seeds as usize);
    for j in 0..r {
        let Member::Staged(vj) = patterns.member(j) else {
            unreachable!("pattern members are staged")
        };
        for y in 0..seeds {
            let perm = family.member(y)?;
            let spec = vj.then(&UnitarySpec::new(n, vec![Stage::perm(0, perm)?])?)?;
            members.push(Member::Staged(spec));
        }
    }
    Ok(MurEnsemble {
        ens: EnsembleSpec::new(members)?,
        a_qubits: family.m_bits() as usize,
        n_qubits: n,
        r,
        seed_count: seeds,
    })
}

/// Recursive construction: after one stage leaves B = non-uniform qubits,
/// re-apply a stage on B. Members are (1_{A1} x U2) U1 and the A register
/// grows to A1 A2; member counts multiply and measured errors add.
pub fn build_mur_ur2(n: usize, stages: Vec<Ur1Toy>) -> Result<MurEnsemble> {
    if stages.is_empty() {
        return Err(Error::InvalidParameter("no stages".into()));
    }
    let mut a_total = 0usize;
    let mut current: Option<MurEnsemble> = None;
    let mut r_total = 1usize;
    let mut seeds_total = 1u64;
    for toy in stages {
        let width = n - a_total;
        if !width.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "stage width {width} is not a power of two"
            )));
        }
        let stage = build_mur_ur1(width, 0.5, 0.5, Some(toy))?;
        r_total *= stage.r;
        seeds_total *= stage.seed_count;
        let stage_a = stage.a_qubits;
        current = Some(match current {
            None => MurEnsemble {
                ens: stage.ens,
                a_qubits: stage_a,
                n_qubits: n,
                r: r_total,
                seed_count: seeds_total,
            },
            Some(prev) => {
                let mut members = Vec::with_capacity(prev.ens.len() * stage.ens.len());
                for m1 in prev.ens.members() {
                    let Member::Staged(u1) = m1 else {
                        unreachable!("constructed members are staged")
                    };
                    for m2 in stage.ens.members() {
                        let Member::Staged(u2) = m2 else {
                            unreachable!("constructed members are staged")
                        };
                        let embedded = u2.embedded(n, a_total)?;
                        members.push(Member::Staged(u1.then(&embedded)?));
                    }
                }
                MurEnsemble {
                    ens: EnsembleSpec::new(members)?,
                    a_qubits: prev.a_qubits + stage_a,
                    n_qubits: n,
                    r: r_total,
                    seed_count: seeds_total,
                }
            }
        });
        a_total += stage_a;
        if a_total >= n {
            return Err(Error::InvalidParameter(
                "recursion depth exceeds the available qubits".into(),
            ));
        }
    }
    Ok(current.expect("at least one stage"))
}

/// Worst-case search report.
#[derive(Clone, Debug)]
pub struct WorstCaseReport {
    pub eps_hat: f64,
    pub state: StateVector,
    pub candidates_tried: usize,
}

/// Heuristic lower bound on the supremum over states of the average TV:
/// seeds from computational basis states, each member's inverse-basis
/// states, `budget` Haar samples, then derivative-free coordinate ascent.
/// The reported eps_hat never exceeds 1 - 1/d_A.
pub fn worst_case_mur(
    ens: &EnsembleSpec,
    d_a: usize,
    budget: usize,
    ascent_steps: usize,
    seed: u64,
) -> Result<WorstCaseReport> {
    let d = ens.dim();
    let mut best: Option<(f64, StateVector)> = None;
    let mut tried = 0usize;
    let consider = |state: StateVector, best: &mut Option<(f64, StateVector)>| -> Result<()> {
        let avg = eval_mur(ens, &state, d_a)?.avg;
        if best.as_ref().is_none_or(|(b, _)| avg > *b) {
            *best = Some((avg, state));
        }
        Ok(())
    };
    for x in 0..d {
        consider(StateVector::basis_state(vec![d], x)?, &mut best)?;
        tried += 1;
    }
    for m in ens.members() {
        for x in 0..d {
            let e = StateVector::basis_state(vec![d], x)?;
            consider(m.apply_adjoint(&e), &mut best)?;
            tried += 1;
        }
    }
    for i in 0..budget {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        consider(haar_state(vec![d], &mut rng), &mut best)?;
        tried += 1;
    }
    // coordinate polish on (re, im) pairs with renormalization
    let (mut best_avg, mut best_state) = best.expect("at least one candidate");
    let mut step = 0.25f64;
    for it in 0..ascent_steps {
        let coord = it % d;
        let mut improved = false;
        for (dre, dim_) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let mut amps: DVector<C64> = best_state.amps().clone();
            amps[coord] += C64::new(dre, dim_);
            let norm = amps.norm();
            if norm < 1e-12 {
                continue;
            }
            amps /= C64::new(norm, 0.0);
            let cand = StateVector::new(vec![d], amps)?;
            let avg = eval_mur(ens, &cand, d_a)?.avg;
            if avg > best_avg + 1e-15 {
                best_avg = avg;
                best_state = cand;
                improved = true;
            }
        }
        if !improved && coord == d - 1 {
            step *= 0.5;
            if step < 1e-6 {
                break;
            }
        }
    }
    Ok(WorstCaseReport {
        eps_hat: best_avg,
        state: best_state,
        candidates_tried: tried,
    })
}

/// Entropic floor implied by an eps-metric uncertainty relation:
/// (1 - 8 eps) log2 d_A - 2 h(2 eps).
pub fn entropic_bound(eps: f64, d_a: usize) -> Result<f64> {
    if !(0.0 < eps && eps < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "eps must be in (0, 1/2), got {eps}"
        )));
    }
    Ok((1.0 - 8.0 * eps) * (d_a as f64).log2() - 2.0 * binary_entropy(2.0 * eps))
}

/// l1(l2) norm of a bipartite state: sum_a sqrt(sum_b |amp_{a,b}|^2).
pub fn l1l2_norm(state: &StateVector, d_a: usize) -> Result<f64> {
    let d = state.total_dim();
    if d_a == 0 || !d.is_multiple_of(d_a) {
        return Err(Error::DimensionMismatch(format!(
            "dim {d} does not split off an A factor of {d_a}"
        )));
    }
    let d_b = d / d_a;
    let mut total = 0.0;
    for a in 0..d_a {
        let mut block = 0.0;
        for b in 0..d_b {
            block += state.amps()[a * d_b + b].norm_sqr();
        }
        total += block.sqrt();
    }
    Ok(total)
}

/// log Gamma at a positive integer, exactly: sum of logs.
fn ln_gamma_int(n: u64) -> f64 {
    (2..n).map(|j| (j as f64).ln()).sum()
}

/// log Gamma at n + 1/2, exactly: Gamma(1/2) = sqrt(pi) plus the recurrence.
fn ln_gamma_half(n: u64) -> f64 {
    0.5 * std::f64::consts::PI.ln() + (1..=n).map(|j| (j as f64 - 0.5).ln()).sum::<f64>()
}

/// Closed-form expectation of the l1(l2) norm over Haar states:
/// d_A Gamma(d_B + 1/2)/Gamma(d_B) * Gamma(d_A d_B)/Gamma(d_A d_B + 1/2),
/// evaluated through log Gamma.
pub fn gamma_expectation(d_a: u64, d_b: u64) -> f64 {
    let ln = ln_gamma_half(d_b) - ln_gamma_int(d_b) + ln_gamma_int(d_a * d_b)
        - ln_gamma_half(d_a * d_b);
    d_a as f64 * ln.exp()
}

/// Monte-Carlo summary: sample mean with its standard error.
#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub trials: usize,
    pub mean: f64,
    pub std_err: f64,
}

impl McReport {
    pub fn from_samples(samples: &[f64]) -> McReport {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        McReport {
            trials: n,
            mean,
            std_err: (var / n as f64).sqrt(),
        }
    }

    pub fn ci3_upper(&self) -> f64 {
        self.mean + 3.0 * self.std_err
    }
}

/// Sample t Haar unitaries once, then evaluate the ensemble's average TV on
/// Haar states. Per-trial RNG streams keep the result independent of the
/// parallel schedule.
pub fn random_mur_experiment(
    d_a: usize,
    d_b: usize,
    t: usize,
    trials: usize,
    seed: u64,
) -> Result<McReport> {
    let d = d_a * d_b;
    if d > 256 {
        return Err(Error::InvalidParameter(format!(
            "total dimension {d} exceeds 256"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members: Vec<Member> = (0..t)
        .map(|_| Member::Dense(haar_unitary(d, &mut rng)))
        .collect();
    let ens = EnsembleSpec::new(members)?;
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            let st = haar_state(vec![d], &mut r);
            eval_mur(&ens, &st, d_a).map(|rep| rep.avg)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McReport::from_samples(&samples))
}

/// Monte-Carlo check of the norm expectation: sample mean of the l1(l2)
/// norm over Haar states against [`gamma_expectation`].
pub fn gamma_experiment(d_a: usize, d_b: usize, trials: usize, seed: u64) -> Result<McReport> {
    let d = d_a * d_b;
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(i as u64 + 1);
            let st = haar_state(vec![d], &mut r);
            l1l2_norm(&st, d_a)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(McReport::from_samples(&samples))
}

/// Instrumented two-layer composition check on one state: the composed
/// average TV never exceeds the first layer's measured error plus the
/// induced-state average of the second layer's.
#[derive(Clone, Debug, Serialize)]
pub struct CompositionCheck {
    pub composed_avg: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub pass: bool,
}

pub fn mur_composition_check(
    layer1: &MurEnsemble,
    layer2: &MurEnsemble,
    composed: &MurEnsemble,
    state: &StateVector,
) -> Result<CompositionCheck> {
    let n = layer1.n_qubits;
    let d = 1usize << n;
    let d_a1 = layer1.d_a();
    let d_b1 = d / d_a1;
    let eps1 = eval_mur(&layer1.ens, state, d_a1)?.avg;

    // second layer measured on the states induced by conditioning on the
    // first layer's A outcome, weighted by outcome probability
    let d_a2 = layer2.d_a();
    let mut eps2_sum = 0.0;
    for m1 in layer1.ens.members() {
        let out = m1.apply(state);
        let mut per_member = 0.0;
        for a1 in 0..d_a1 {
            let mut amps = DVector::from_element(d_b1, C64::new(0.0, 0.0));
            let mut p = 0.0;
            for b in 0..d_b1 {
                let amp = out.amps()[a1 * d_b1 + b];
                amps[b] = amp;
                p += amp.norm_sqr();
            }
            if p < 1e-15 {
                continue;
            }
            amps /= C64::new(p.sqrt(), 0.0);
            let cond = StateVector::new(vec![d_b1], amps)?;
            per_member += p * eval_mur(&layer2.ens, &cond, d_a2)?.avg;
        }
        eps2_sum += per_member;
    }
    let eps2 = eps2_sum / layer1.ens.len() as f64;

    let composed_avg = eval_mur(&composed.ens, state, composed.d_a())?.avg;
    Ok(CompositionCheck {
        composed_avg,
        eps1,
        eps2,
        pass: composed_avg <= eps1 + eps2 + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::rs_family;
    use crate::gf::FieldCtx;
    use crate::mub::build_exact_mubs;

    fn toy_family_4bits() -> ExtractorFamily {
        // 3-seed family on 4 bits with a 2-bit head
        let ctx = FieldCtx::new(2).unwrap();
        rs_family(&ctx, 2, 1, 0.5).unwrap()
    }

    #[test]
    fn eval_mur_analytic_cases() {
        // ensemble {I}, uniform superposition: avg TV = 0
        let id = EnsembleSpec::new(vec![Member::Staged(UnitarySpec::identity(2))]).unwrap();
        let st = StateVector::uniform_superposition(vec![4]).unwrap();
        assert!(eval_mur(&id, &st, 4).unwrap().avg < 1e-15);

        // ensemble {I}, basis state, B trivial: TV = 1 - 1/d_A
        let e0 = StateVector::basis_state(vec![4], 0).unwrap();
        let rep = eval_mur(&id, &e0, 4).unwrap();
        assert!((rep.avg - 0.75).abs() < 1e-15);

        // full 3-MUB ensemble at d=2 on |0>: avg TV = (1/3)(1/2 + 0 + 0)
        let mubs = build_exact_mubs(1, 3).unwrap();
        let zero = StateVector::basis_state(vec![2], 0).unwrap();
        let rep = eval_mur(&mubs, &zero, 2).unwrap();
        assert!((rep.avg - 1.0 / 6.0).abs() < 1e-12, "avg {}", rep.avg);
    }

    #[test]
    fn eval_mur_invariant_under_b_relabeling() {
        let mubs = build_exact_mubs(2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let st = haar_state(vec![4], &mut rng);
        let base = eval_mur(&mubs, &st, 2).unwrap();
        // permute the B labels after each member: X on the last qubit
        let flip = {
            let ctx = FieldCtx::new(1).unwrap();
            crate::extractor::BitPermutation::affine(
                &ctx,
                crate::gf::FieldElem(1),
                crate::gf::FieldElem(1),
            )
            .unwrap()
        };
        let relabeled: Vec<Member> = mubs
            .members()
            .iter()
            .map(|m| {
                let Member::Staged(u) = m else { unreachable!() };
                let stage =
                    UnitarySpec::new(2, vec![Stage::perm(1, flip.clone()).unwrap()]).unwrap();
                Member::Staged(u.then(&stage).unwrap())
            })
            .collect();
        let ens2 = EnsembleSpec::new(relabeled).unwrap();
        let moved = eval_mur(&ens2, &st, 2).unwrap();
        for (a, b) in base.tvs.iter().zip(&moved.tvs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ur1_toy_structure() {
        // n=4 qubits, r=2 Hadamard-code patterns, 3 extractor seeds: 6 members
        let mur = build_mur_ur1(
            4,
            0.5,
            0.5,
            Some(Ur1Toy {
                r: 2,
                family: toy_family_4bits(),
            }),
        )
        .unwrap();
        assert_eq!(mur.ens.len(), 6);
        assert_eq!(mur.d_a(), 4);
        // every member is norm-preserving and equal to its dense realization
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in mur.ens.members() {
            let dense = m.dense();
            let dev = (&dense * dense.adjoint() - nalgebra::DMatrix::identity(16, 16)).norm();
            assert!(dev < 1e-10);
            let st = haar_state(vec![16], &mut rng);
            let fast = m.apply(&st);
            assert!((fast.amps() - dense * st.amps()).norm() < 1e-10);
        }

        // theorem-scale request is reported as infeasible
        assert!(matches!(
            build_mur_ur1(4, 0.5, 0.5, None),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn ur2_width_bookkeeping() {
        // depth 1 equals ur1
        let one = build_mur_ur2(
            4,
            vec![Ur1Toy {
                r: 2,
                family: toy_family_4bits(),
            }],
        )
        .unwrap();
        let direct = build_mur_ur1(
            4,
            0.5,
            0.5,
            Some(Ur1Toy {
                r: 2,
                family: toy_family_4bits(),
            }),
        )
        .unwrap();
        assert_eq!(one.ens.len(), direct.ens.len());
        assert_eq!(one.a_qubits, direct.a_qubits);

        // depth 1 at n=8 with a 4-qubit head leaves d_B = 16
        let ctx4 = FieldCtx::new(4).unwrap();
        let fam8 = rs_family(&ctx4, 2, 1, 0.5).unwrap();
        let two = build_mur_ur2(8, vec![Ur1Toy { r: 2, family: fam8 }]).unwrap();
        assert_eq!(two.a_qubits, 4);
        assert_eq!(two.d_b(), 16);
    }

    #[test]
    fn ur2_depth_two_composition_bound() {
        // 8 qubits: stage 1 head 4, stage 2 on the remaining 4, head 2
        let ctx4 = FieldCtx::new(4).unwrap();
        let fam8 = rs_family(&ctx4, 2, 1, 0.5).unwrap(); // 8 bits -> head 4
        let stage1 = Ur1Toy { r: 2, family: fam8 };
        let stage2 = Ur1Toy {
            r: 2,
            family: toy_family_4bits(), // 4 bits -> head 2
        };

        let layer1 = build_mur_ur2(8, vec![stage1.clone()]).unwrap();
        let layer2 = build_mur_ur1(4, 0.5, 0.5, Some(stage2.clone())).unwrap();
        let composed = build_mur_ur2(8, vec![stage1, stage2]).unwrap();
        assert_eq!(composed.a_qubits, 6);
        assert_eq!(composed.ens.len(), layer1.ens.len() * layer2.ens.len());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..4 {
            let st = haar_state(vec![256], &mut rng);
            let chk = mur_composition_check(&layer1, &layer2, &composed, &st).unwrap();
            assert!(
                chk.pass,
                "composed {} > {} + {}",
                chk.composed_avg, chk.eps1, chk.eps2
            );
        }
    }

    #[test]
    fn worst_case_identity_and_mubs() {
        // ensemble {I}: worst state is a basis state, eps_hat = 1 - 1/d_A
        let id = EnsembleSpec::new(vec![Member::Staged(UnitarySpec::identity(2))]).unwrap();
        let rep = worst_case_mur(&id, 4, 5, 40, 3).unwrap();
        assert!((rep.eps_hat - 0.75).abs() < 1e-9);

        // full MUB ensemble d=2: the basis-state value 1/6 is found
        let mubs = build_exact_mubs(1, 3).unwrap();
        let rep = worst_case_mur(&mubs, 2, 30, 200, 3).unwrap();
        assert!(rep.eps_hat >= 1.0 / 6.0 - 1e-9, "eps_hat {}", rep.eps_hat);
        assert!(rep.eps_hat <= 0.5 + 1e-9);

        // monotone in budget (same seed, nested Haar streams)
        let lo = worst_case_mur(&mubs, 2, 5, 0, 3).unwrap();
        let hi = worst_case_mur(&mubs, 2, 25, 0, 3).unwrap();
        assert!(hi.eps_hat >= lo.eps_hat - 1e-15);
    }

    #[test]
    fn entropic_bound_values() {
        // eps -> 0: bound -> n
        assert!((entropic_bound(1e-12, 1 << 5).unwrap() - 5.0).abs() < 1e-6);
        // eps = 1/6, d_A = 2: (1 - 8/6) - 2 h(1/3), vacuous for the d=2 toy
        let b = entropic_bound(1.0 / 6.0, 2).unwrap();
        let expect = (1.0 - 8.0 / 6.0) - 2.0 * binary_entropy(1.0 / 3.0);
        assert!((b - expect).abs() < 1e-12);
        assert!(b < 0.0);
        assert!(entropic_bound(0.6, 2).is_err());
    }

    #[test]
    fn entropic_bound_consistent_with_measured_entropy() {
        // avg Shannon entropy of the full measurement >= bound(measured eps)
        let mubs = build_exact_mubs(2, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let st = haar_state(vec![4], &mut rng);
            let rep = eval_mur(&mubs, &st, 4).unwrap();
            if !(0.0 < rep.avg && rep.avg < 0.5) {
                continue;
            }
            let bound = entropic_bound(rep.avg, 4).unwrap();
            let avg_h: f64 = mubs
                .members()
                .iter()
                .map(|m| m.apply(&st).measure_marginal(&[0]).unwrap().shannon())
                .sum::<f64>()
                / mubs.len() as f64;
            assert!(avg_h >= bound - 1e-9, "H {avg_h} < bound {bound}");
        }
    }

    #[test]
    fn l1l2_and_gamma_values() {
        // product basis state: norm 1
        let e = StateVector::basis_state(vec![4], 2).unwrap();
        assert!((l1l2_norm(&e, 2).unwrap() - 1.0).abs() < 1e-15);
        // d_A = 1: Gamma ratios cancel
        assert!((gamma_expectation(1, 7) - 1.0).abs() < 1e-12);
        // d_A=2, d_B=1: 4/3 from Gamma(1.5) = sqrt(pi)/2, Gamma(2.5) = 3 sqrt(pi)/4
        assert!((gamma_expectation(2, 1) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_monte_carlo_small() {
        let rep = gamma_experiment(2, 2, 20000, 5).unwrap();
        let expect = gamma_expectation(2, 2);
        assert!(
            (rep.mean - expect).abs() <= 4.0 * rep.std_err,
            "mean {} vs {expect} (se {})",
            rep.mean,
            rep.std_err
        );
    }

    #[test]
    fn random_experiment_small() {
        // t=1, d_B=1: mean TV strictly between 0 and 1 - 1/d_A
        let rep = random_mur_experiment(4, 1, 1, 400, 6).unwrap();
        assert!(rep.mean > 0.0 && rep.mean < 0.75);

        // larger d_B drives the mean down at fixed d_A (paired runs)
        let lo = random_mur_experiment(4, 2, 4, 300, 7).unwrap();
        let hi = random_mur_experiment(4, 8, 4, 300, 7).unwrap();
        assert!(
            hi.mean < lo.mean,
            "mean did not decrease: {} vs {}",
            hi.mean,
            lo.mean
        );
    }

    #[test]
    fn random_experiment_deterministic_across_thread_counts() {
        let a = random_mur_experiment(4, 4, 4, 64, 9).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| random_mur_experiment(4, 4, 4, 64, 9).unwrap());
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }
}
