//! Experiment runner for the verification laboratory: every paper-facing
//! operation is exposed as a subcommand that writes a CSV or JSON table.
//! Results are pure functions of (config, seed); exit code 0 means every
//! check in the run passed, 1 means some check failed, 2 means the
//! parameters were invalid.

mod table;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qurlab::extractor::{
    self, check_bijective_exhaustive, check_bijective_sampled, random_flat_source, ExtractorFamily,
    Source,
};
use qurlab::gf::FieldCtx;
use qurlab::locking::{
    attack_eval, commit, computational_povm, qid_accept_prob, qid_deficiency,
    qid_deviation_bound, verify_prob, FingerprintParams, FingerprintScheme, LockingScheme,
    MessageSource, WeightedOutcome,
};
use qurlab::mub::{
    build_exact_mubs, build_hadamard_mubs, check_2design, minentropy_flatten, verify_gamma_mub,
    EnsembleSpec, HadamardVariant,
};
use qurlab::mur::{
    build_mur_ur1, eval_mur, gamma_expectation, gamma_experiment, random_mur_experiment,
    worst_case_mur, Ur1Toy,
};
use qurlab::qcext::{
    build_bitwise_qcext, build_full_mub_qcext, decoupling_eval, minent_ur_bound_bitwise,
    minent_ur_bound_full_mub, random_qcext_experiment, vn_uncertainty_check, QcBound,
};
use qurlab::quantum::{haar_state, haar_unitary, random_density, StateVector};
use qurlab::wse::{
    channel_fidelity_bound, honest_run_stats, wse_correctness_check, wse_run_batch,
    wse_security_params,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use table::{f12, Format, Table};

#[derive(Parser, Debug)]
#[command(name = "qurlab", version, about = "Uncertainty-relation laboratory runner")]
struct Cli {
    /// RNG seed; every result is a pure function of (config, seed).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the result table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker pool cap (falls back to QURLAB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON experiment config; replaces the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    format: Option<Format>,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    threads: Option<usize>,
    command: Cmd,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
enum Cmd {
    /// Mutually unbiased basis ensembles.
    Mub {
        #[command(subcommand)]
        cmd: MubCmd,
    },
    /// Strong permutation condensers and extractors.
    Extractor {
        #[command(subcommand)]
        cmd: ExtractorCmd,
    },
    /// Metric uncertainty relations.
    Mur {
        #[command(subcommand)]
        cmd: MurCmd,
    },
    /// Locking, commitment, fingerprints, identification.
    Lock {
        #[command(subcommand)]
        cmd: LockCmd,
    },
    /// QC-extractors and side-information bounds.
    Qcext {
        #[command(subcommand)]
        cmd: QcextCmd,
    },
    /// Weak string erasure.
    Wse {
        #[command(subcommand)]
        cmd: WseCmd,
    },
    /// Aggregate result files into a pass/fail summary.
    Report { files: Vec<PathBuf> },
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
enum MubCmd {
    /// Verify the gamma-MUB property of the exact construction.
    Verify {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        bases: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// 2-design residual of the full basis set.
    Design2 {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Min-entropy flattening report for a state.
    Flatten {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        gamma: f64,
        /// uniform | basis:<index> | haar
        #[arg(long, default_value = "uniform")]
        state: String,
        #[arg(long, value_enum, default_value_t = MubVariant::Exact)]
        variant: MubVariant,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MubVariant {
    Exact,
    Hadamard,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
enum ExtractorCmd {
    /// Leftover-hash extractor on GF(2^n): average TV over random flat
    /// sources.
    Lhl {
        #[arg(long)]
        n: u32,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        eps: f64,
        /// Output length override (default from m = k - 2 log(2/eps)).
        #[arg(long)]
        m: Option<u32>,
        #[arg(long, default_value_t = 200)]
        sources: usize,
        /// Write the family descriptor JSON here.
        #[arg(long)]
        emit_family: Option<PathBuf>,
    },
    /// Reed-Solomon condenser: exhaustive bijectivity plus condensing check.
    Rs {
        #[arg(long)]
        t: u32,
        #[arg(long)]
        blocks: usize,
        #[arg(long)]
        ell: usize,
        /// Condensed min-entropy target for the excess-mass oracle.
        #[arg(long)]
        k_prime: Option<f64>,
        /// Source min-entropy (defaults to the family's claimed input
        /// entropy (ell + 1) t).
        #[arg(long)]
        source_k: Option<u32>,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 50)]
        sources: usize,
        #[arg(long)]
        emit_family: Option<PathBuf>,
    },
    /// Recursive-extractor parameter calculus and the toy instance.
    Guv {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        eps: f64,
        /// Iterated-extraction target fraction 1 - delta.
        #[arg(long)]
        delta: Option<f64>,
        /// Build the toy instance on GF(2^t)^blocks and bijectivity-check it.
        #[arg(long)]
        toy_t: Option<u32>,
        #[arg(long)]
        toy_blocks: Option<usize>,
        #[arg(long)]
        emit_family: Option<PathBuf>,
    },
    /// Verify a family descriptor produced by --emit-family.
    Verify {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        sources: usize,
    },
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
struct ToyEnsembleArgs {
    /// Qubits (must be a power of two for the pattern code).
    #[arg(long)]
    n: usize,
    /// Hadamard-pattern count.
    #[arg(long)]
    r: usize,
    /// Field degree of the RS extractor stage.
    #[arg(long)]
    ext_t: u32,
    #[arg(long)]
    ext_blocks: usize,
    #[arg(long)]
    ext_ell: usize,
}

impl ToyEnsembleArgs {
    fn build(&self) -> anyhow::Result<qurlab::mur::MurEnsemble> {
        let ctx = FieldCtx::new(self.ext_t)?;
        let family = extractor::rs_family(&ctx, self.ext_blocks, self.ext_ell, 0.5)?;
        Ok(build_mur_ur1(
            self.n,
            0.5,
            0.5,
            Some(Ur1Toy {
                r: self.r,
                family,
            }),
        )?)
    }
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
enum MurCmd {
    /// Evaluate a toy ensemble on sampled states.
    Eval {
        #[command(flatten)]
        ens: ToyEnsembleArgs,
        /// uniform | basis:<index> | haar
        #[arg(long, default_value = "haar")]
        state: String,
        #[arg(long, default_value_t = 10)]
        states: usize,
    },
    /// Heuristic worst-case state search.
    Worst {
        #[command(flatten)]
        ens: ToyEnsembleArgs,
        #[arg(long, default_value_t = 50)]
        budget: usize,
        #[arg(long, default_value_t = 200)]
        ascent: usize,
    },
    /// Haar-ensemble Monte-Carlo experiment.
    Random {
        #[arg(long)]
        da: usize,
        #[arg(long)]
        db: usize,
        #[arg(long, default_value_t = 16)]
        members: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Norm-expectation Monte-Carlo against the closed form.
    Gamma {
        #[arg(long)]
        da: usize,
        #[arg(long)]
        db: usize,
        #[arg(long, default_value_t = 100000)]
        trials: usize,
    },
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
enum LockCmd {
    /// Exhaustive encode/decode grid.
    Roundtrip {
        #[arg(long)]
        n_bits: usize,
        #[arg(long, default_value_t = 1)]
        db: usize,
        #[arg(long)]
        bases: usize,
    },
    /// Measurement attack: per-outcome posteriors and leakage.
    Attack {
        #[arg(long)]
        n_bits: usize,
        #[arg(long, default_value_t = 1)]
        db: usize,
        #[arg(long)]
        bases: usize,
        #[arg(long, value_enum, default_value_t = AttackKind::Comp)]
        attack: AttackKind,
        /// Restrict the prior to the first 2^l messages.
        #[arg(long)]
        source_l: Option<u32>,
    },
    /// Commit/reveal round with the exact acceptance probability.
    Commit {
        #[arg(long)]
        n_bits: usize,
        #[arg(long, default_value_t = 2)]
        db: usize,
        #[arg(long)]
        bases: usize,
        #[arg(long)]
        x: u64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        reveal_x: u64,
        #[arg(long)]
        reveal_k: usize,
    },
    /// Hiding fingerprint toy instance.
    Fingerprint {
        #[arg(long)]
        n_bits: u64,
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 2)]
        t: usize,
        #[arg(long, default_value_t = 2)]
        db: usize,
        #[arg(long, default_value_t = 6)]
        pairs: usize,
    },
    /// Identification rounds against the deviation bound.
    Qid {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        bases: usize,
        #[arg(long)]
        da: usize,
        #[arg(long, default_value_t = 50)]
        pairs: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AttackKind {
    /// Computational-basis measurement.
    Comp,
    /// A Haar-random orthonormal basis.
    Haar,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
enum QcextCmd {
    /// Decoupling distances against the collision-entropy bound.
    Decouple {
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value_t = QcFamily::Full)]
        family: QcFamily,
        #[arg(long)]
        da1: usize,
        #[arg(long)]
        de: usize,
        #[arg(long, default_value_t = 20)]
        states: usize,
    },
    /// Haar-member Monte-Carlo experiment.
    Random {
        #[arg(long)]
        da: usize,
        #[arg(long)]
        da1: usize,
        #[arg(long)]
        de: usize,
        #[arg(long, default_value_t = 16)]
        members: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Von Neumann uncertainty check on random states.
    Vncheck {
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        de: usize,
        #[arg(long, default_value_t = 100)]
        states: usize,
    },
    /// Min-entropy uncertainty floors as pure arithmetic.
    Bounds {
        #[arg(long, value_enum)]
        kind: QcFamily,
        #[arg(long, default_value_t = 4)]
        da: usize,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 0.0)]
        hmin: f64,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 0.01)]
        delta_p: f64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum QcFamily {
    Full,
    Bitwise,
}

#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
enum WseCmd {
    /// Honest protocol statistics over a batch of transcripts.
    Run {
        #[arg(long, default_value_t = 100)]
        qubits: usize,
        #[arg(long, default_value_t = 1000)]
        transcripts: usize,
        /// Dump raw transcripts as JSON lines.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Exact-histogram correctness check at small n.
    Correctness {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 20000)]
        transcripts: usize,
    },
    /// Noisy-storage security calculus (single point or a sweep over n).
    Params {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        stored: u64,
        /// Additional n values, comma separated.
        #[arg(long, value_delimiter = ',')]
        sweep_n: Vec<u64>,
    },
}

fn parse_state(spec: &str, dims: Vec<usize>, rng: &mut ChaCha8Rng) -> anyhow::Result<StateVector> {
    if spec == "uniform" {
        return Ok(StateVector::uniform_superposition(dims)?);
    }
    if spec == "haar" {
        return Ok(haar_state(dims, rng));
    }
    if let Some(idx) = spec.strip_prefix("basis:") {
        let i: usize = idx.parse().context("basis index")?;
        return Ok(StateVector::basis_state(dims, i)?);
    }
    bail!("unknown state spec '{spec}' (expected uniform | basis:<i> | haar)")
}

fn build_mub_ensemble(
    variant: MubVariant,
    n: usize,
    r: usize,
) -> anyhow::Result<EnsembleSpec> {
    match variant {
        MubVariant::Exact => Ok(build_exact_mubs(n, r)?),
        MubVariant::Hadamard => {
            if !n.is_power_of_two() {
                bail!("hadamard variant needs n = 2^n' qubits");
            }
            Ok(build_hadamard_mubs(
                n.trailing_zeros(),
                HadamardVariant::HadamardCode { r },
            )?)
        }
    }
}

fn run_mub(cmd: &MubCmd, seed: u64) -> anyhow::Result<Table> {
    match cmd {
        MubCmd::Verify {
            n,
            bases,
            gamma,
            tol,
        } => {
            let ens = build_exact_mubs(*n, *bases)?;
            let excess = verify_gamma_mub(&ens, *gamma)?;
            let mut t = Table::new(
                "mub verify",
                &["n", "bases", "gamma", "excess", "tol", "pass"],
            );
            t.push(vec![
                n.to_string(),
                bases.to_string(),
                f12(*gamma),
                f12(excess),
                f12(*tol),
                (excess <= *tol).to_string(),
            ]);
            Ok(t)
        }
        MubCmd::Design2 { n, tol } => {
            let d = 1usize << n;
            let ens = build_exact_mubs(*n, d + 1)?;
            let residual = check_2design(&ens)?;
            let mut t = Table::new("mub design2", &["n", "d", "residual", "tol", "pass"]);
            t.push(vec![
                n.to_string(),
                d.to_string(),
                f12(residual),
                f12(*tol),
                (residual < *tol).to_string(),
            ]);
            Ok(t)
        }
        MubCmd::Flatten {
            n,
            r,
            eps,
            gamma,
            state,
            variant,
        } => {
            let ens = build_mub_ensemble(*variant, *n, *r)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let st = parse_state(state, vec![1 << n], &mut rng)?;
            let rep = minentropy_flatten(&ens, &st, *gamma, *eps)?;
            let mut t = Table::new(
                "mub flatten",
                &["index", "w", "in_t", "tv_to_q", "hmin_q", "hmin_floor", "pass"],
            );
            let need = ((1.0 - eps) * *r as f64).ceil() as usize;
            let overall = rep.good_count >= need;
            for (j, e) in rep.entries.iter().enumerate() {
                t.push(vec![
                    j.to_string(),
                    f12(e.w),
                    e.in_t.to_string(),
                    f12(e.tv_to_q),
                    f12(e.hmin_q),
                    f12(rep.hmin_floor),
                    overall.to_string(),
                ]);
            }
            Ok(t)
        }
    }
}

fn write_family(path: &Path, fam: &ExtractorFamily) -> anyhow::Result<()> {
    let json = serde_json::to_string_pretty(fam)?;
    std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))
}

fn extractor_summary_row(
    t: &mut Table,
    fam: &ExtractorFamily,
    rep: &extractor::ExtractorReport,
    extra_bound: Option<f64>,
) {
    let pass = rep.pass && extra_bound.is_none_or(|b| rep.max_avg_tv <= b + 1e-12);
    t.push(vec![
        fam.n_bits().to_string(),
        fam.m_bits().to_string(),
        fam.seed_count().to_string(),
        rep.per_source_avg_tv.len().to_string(),
        f12(rep.max_avg_tv),
        f12(rep.mean_avg_tv),
        f12(rep.eps),
        f12(extra_bound.unwrap_or(f64::NAN)),
        pass.to_string(),
    ]);
}

const EXTRACTOR_COLS: [&str; 9] = [
    "n", "m", "seeds", "sources", "max_avg_tv", "mean_avg_tv", "eps", "bound", "pass",
];

fn run_extractor(cmd: &ExtractorCmd, seed: u64) -> anyhow::Result<Table> {
    match cmd {
        ExtractorCmd::Lhl {
            n,
            k,
            eps,
            m,
            sources,
            emit_family,
        } => {
            let ctx = FieldCtx::new(*n)?;
            let fam = match m {
                Some(m) => extractor::lhl_family_with_m(&ctx, *k, *eps, *m)?,
                None => extractor::lhl_family(&ctx, *k, *eps)?,
            };
            if let Some(path) = emit_family {
                write_family(path, &fam)?;
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let srcs: Vec<Source> = (0..*sources)
                .map(|_| random_flat_source(*n, k.floor() as u32, &mut rng))
                .collect();
            let rep = extractor::verify_extractor(&fam, *eps, &srcs)?;
            // hash-lemma guarantee for flat k-sources
            let bound = 0.5 * 2f64.powf((fam.m_bits() as f64 - k) / 2.0);
            let mut t = Table::new("extractor lhl", &EXTRACTOR_COLS);
            extractor_summary_row(&mut t, &fam, &rep, Some(bound));
            Ok(t)
        }
        ExtractorCmd::Rs {
            t: deg,
            blocks,
            ell,
            k_prime,
            source_k,
            eps,
            sources,
            emit_family,
        } => {
            let ctx = FieldCtx::new(*deg)?;
            let fam = extractor::rs_family(&ctx, *blocks, *ell, *eps)?;
            if let Some(path) = emit_family {
                write_family(path, &fam)?;
            }
            let mut bijective = true;
            if fam.n_bits() <= 16 {
                for i in 0..fam.seed_count() {
                    bijective &= check_bijective_exhaustive(&fam.member(i)?);
                }
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for i in 0..fam.seed_count() {
                    bijective &= check_bijective_sampled(&fam.member(i)?, 10_000, &mut rng);
                }
            }
            let mut t = Table::new(
                "extractor rs",
                &[
                    "t",
                    "blocks",
                    "ell",
                    "seeds",
                    "bijective",
                    "k_prime",
                    "avg_excess",
                    "pass",
                ],
            );
            let (kp, excess, pass) = match k_prime {
                Some(kp) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let sk = source_k
                        .unwrap_or(fam.claimed_k() as u32)
                        .min(fam.n_bits());
                    let mut worst: f64 = 0.0;
                    for _ in 0..*sources {
                        let src = random_flat_source(fam.n_bits(), sk, &mut rng);
                        let rep = extractor::verify_condenser(&fam, *kp, *eps, &src)?;
                        worst = worst.max(rep.avg_excess);
                    }
                    (*kp, worst, worst <= *eps + 1e-12)
                }
                None => (f64::NAN, f64::NAN, true),
            };
            t.push(vec![
                deg.to_string(),
                blocks.to_string(),
                ell.to_string(),
                fam.seed_count().to_string(),
                bijective.to_string(),
                f12(kp),
                f12(excess),
                (bijective && pass).to_string(),
            ]);
            Ok(t)
        }
        ExtractorCmd::Guv {
            n,
            k,
            eps,
            delta,
            toy_t,
            toy_blocks,
            emit_family,
        } => {
            let rep = extractor::guv_params(*n, *k, *eps);
            let mut t = Table::new(
                "extractor guv",
                &[
                    "n",
                    "k",
                    "eps",
                    "seed_bits_bound",
                    "output_len",
                    "k_min",
                    "feasible",
                    "stages",
                    "toy_bijective",
                    "pass",
                ],
            );
            let stages = match delta {
                Some(d) => extractor::guv_repeat_params(*n, *k, *eps, *d)?.stages,
                None => 1,
            };
            let toy_ok = match (toy_t, toy_blocks) {
                (Some(tt), Some(tb)) => {
                    let ctx = FieldCtx::new(*tt)?;
                    let fam = extractor::guv_family_toy(&ctx, *tb, *eps)?;
                    if let Some(path) = emit_family {
                        write_family(path, &fam)?;
                    }
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut ok = true;
                    for _ in 0..16 {
                        let i = rand::Rng::random_range(&mut rng, 0..fam.seed_count());
                        ok &= if fam.n_bits() <= 16 {
                            check_bijective_exhaustive(&fam.member(i)?)
                        } else {
                            check_bijective_sampled(&fam.member(i)?, 10_000, &mut rng)
                        };
                    }
                    Some(ok)
                }
                _ => None,
            };
            t.push(vec![
                n.to_string(),
                k.to_string(),
                f12(*eps),
                rep.seed_bits_bound.to_string(),
                rep.output_len.to_string(),
                rep.k_min.to_string(),
                rep.feasible.to_string(),
                stages.to_string(),
                toy_ok.map_or("n/a".into(), |b| b.to_string()),
                toy_ok.unwrap_or(true).to_string(),
            ]);
            Ok(t)
        }
        ExtractorCmd::Verify {
            family,
            k,
            eps,
            sources,
        } => {
            let json = std::fs::read_to_string(family)
                .with_context(|| format!("reading {}", family.display()))?;
            let fam: ExtractorFamily = serde_json::from_str(&json).context("family descriptor")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let srcs: Vec<Source> = (0..*sources)
                .map(|_| random_flat_source(fam.n_bits(), *k, &mut rng))
                .collect();
            let rep = extractor::verify_extractor(&fam, *eps, &srcs)?;
            let mut t = Table::new("extractor verify", &EXTRACTOR_COLS);
            extractor_summary_row(&mut t, &fam, &rep, None);
            Ok(t)
        }
    }
}

fn run_mur(cmd: &MurCmd, seed: u64) -> anyhow::Result<Table> {
    match cmd {
        MurCmd::Eval { ens, state, states } => {
            let mur = ens.build()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = Table::new(
                "mur eval",
                &["state", "d_a", "members", "avg_tv", "max_tv", "pass"],
            );
            for i in 0..*states {
                let st = parse_state(state, vec![1 << ens.n], &mut rng)?;
                let rep = eval_mur(&mur.ens, &st, mur.d_a())?;
                let max = rep.tvs.iter().cloned().fold(0.0f64, f64::max);
                t.push(vec![
                    format!("{state}#{i}"),
                    mur.d_a().to_string(),
                    mur.ens.len().to_string(),
                    f12(rep.avg),
                    f12(max),
                    "true".into(),
                ]);
            }
            Ok(t)
        }
        MurCmd::Worst {
            ens,
            budget,
            ascent,
        } => {
            let mur = ens.build()?;
            let rep = worst_case_mur(&mur.ens, mur.d_a(), *budget, *ascent, seed)?;
            let mut t = Table::new(
                "mur worst",
                &["d_a", "members", "budget", "candidates", "eps_hat", "pass"],
            );
            t.push(vec![
                mur.d_a().to_string(),
                mur.ens.len().to_string(),
                budget.to_string(),
                rep.candidates_tried.to_string(),
                f12(rep.eps_hat),
                "true".into(),
            ]);
            Ok(t)
        }
        MurCmd::Random {
            da,
            db,
            members,
            trials,
        } => {
            let rep = random_mur_experiment(*da, *db, *members, *trials, seed)?;
            let bound = (1.0 / *db as f64).sqrt() + 3.0 * rep.std_err;
            let mut t = Table::new(
                "mur random",
                &["d_a", "d_b", "members", "trials", "mean", "std_err", "bound", "pass"],
            );
            t.push(vec![
                da.to_string(),
                db.to_string(),
                members.to_string(),
                trials.to_string(),
                f12(rep.mean),
                f12(rep.std_err),
                f12(bound),
                (rep.mean <= bound).to_string(),
            ]);
            Ok(t)
        }
        MurCmd::Gamma { da, db, trials } => {
            let rep = gamma_experiment(*da, *db, *trials, seed)?;
            let expect = gamma_expectation(*da as u64, *db as u64);
            let pass = (rep.mean - expect).abs() <= 3.0 * rep.std_err;
            let mut t = Table::new(
                "mur gamma",
                &["d_a", "d_b", "trials", "mean", "expected", "std_err", "pass"],
            );
            t.push(vec![
                da.to_string(),
                db.to_string(),
                trials.to_string(),
                f12(rep.mean),
                f12(expect),
                f12(rep.std_err),
                pass.to_string(),
            ]);
            Ok(t)
        }
    }
}


fn lock_scheme(n_bits: usize, db: usize, bases: usize) -> anyhow::Result<LockingScheme> {
    if !db.is_power_of_two() {
        bail!("--db must be a power of two, got {db}");
    }
    let qubits = n_bits + db.trailing_zeros() as usize;
    let ens = build_exact_mubs(qubits, bases)?;
    Ok(LockingScheme::new(ens, n_bits, db)?)
}

fn run_lock(cmd: &LockCmd, seed: u64) -> anyhow::Result<Table> {
    match cmd {
        LockCmd::Roundtrip { n_bits, db, bases } => {
            let scheme = lock_scheme(*n_bits, *db, *bases)?;
            let mut cases = 0u64;
            let mut failures = 0u64;
            for x in 0..(1u64 << n_bits) {
                for k in 0..scheme.key_count() {
                    for b in 0..*db {
                        cases += 1;
                        let ct = scheme.encode(x, k, b)?;
                        let dist = scheme.decode_dist(&ct, k)?;
                        let idx = x as usize * db + b;
                        if (dist.probs()[idx] - 1.0).abs() > 1e-9 {
                            failures += 1;
                        }
                    }
                }
            }
            let mut t = Table::new(
                "lock roundtrip",
                &["n_bits", "d_b", "keys", "cases", "failures", "pass"],
            );
            t.push(vec![
                n_bits.to_string(),
                db.to_string(),
                scheme.key_count().to_string(),
                cases.to_string(),
                failures.to_string(),
                (failures == 0).to_string(),
            ]);
            Ok(t)
        }
        LockCmd::Attack {
            n_bits,
            db,
            bases,
            attack,
            source_l,
        } => {
            let scheme = lock_scheme(*n_bits, *db, *bases)?;
            let dim = scheme.d_a() * scheme.d_b();
            let povm = match attack {
                AttackKind::Comp => computational_povm(dim),
                AttackKind::Haar => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let u = haar_unitary(dim, &mut rng);
                    (0..dim)
                        .map(|j| WeightedOutcome {
                            weight: 1.0,
                            vector: u.column(j).into_owned(),
                        })
                        .collect()
                }
            };
            let source = match source_l {
                None => MessageSource::Uniform,
                Some(l) => MessageSource::Flat((0..(1u64 << l)).collect()),
            };
            let rep = attack_eval(&scheme, &povm, &source)?;
            let mut t = Table::new(
                "lock attack",
                &["outcome", "prob", "posterior", "delta", "max_delta", "pass"],
            );
            for row in &rep.rows {
                let posterior = row
                    .posterior
                    .iter()
                    .map(|p| f12(*p))
                    .collect::<Vec<_>>()
                    .join(";");
                t.push(vec![
                    row.outcome.to_string(),
                    f12(row.prob),
                    posterior,
                    f12(row.delta),
                    f12(rep.max_delta),
                    "true".into(),
                ]);
            }
            Ok(t)
        }
        LockCmd::Commit {
            n_bits,
            db,
            bases,
            x,
            k,
            reveal_x,
            reveal_k,
        } => {
            let scheme = lock_scheme(*n_bits, *db, *bases)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let com = commit(&scheme, *x, *k, &mut rng)?;
            let accept = verify_prob(&scheme, &com, *reveal_x, *reveal_k)?;
            let honest = x == reveal_x && k == reveal_k;
            let pass = if honest { accept > 1.0 - 1e-9 } else { true };
            let mut t = Table::new(
                "lock commit",
                &["x", "k", "reveal_x", "reveal_k", "honest", "accept_prob", "pass"],
            );
            t.push(vec![
                x.to_string(),
                k.to_string(),
                reveal_x.to_string(),
                reveal_k.to_string(),
                honest.to_string(),
                f12(accept),
                pass.to_string(),
            ]);
            Ok(t)
        }
        LockCmd::Fingerprint {
            n_bits,
            p,
            t: keys,
            db,
            pairs,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = FingerprintParams::toy(*n_bits, *p, *keys, *db)?;
            let scheme = FingerprintScheme::new(params, &mut rng)?;
            let bound = scheme.error_bound();
            let mut t = Table::new(
                "lock fingerprint",
                &["x", "y", "same_residue", "accept", "bound", "pass"],
            );
            for i in 0..*pairs {
                let x = rand::Rng::random_range(&mut rng, 0..1u64 << n_bits);
                let y = if i == 0 {
                    x // own-message anchor
                } else {
                    rand::Rng::random_range(&mut rng, 0..1u64 << n_bits)
                };
                let accept = scheme.test_message(x, y)?;
                let same = x % p == y % p;
                let pass = if same {
                    accept > 1.0 - 1e-9
                } else {
                    accept <= bound + 1e-9
                };
                t.push(vec![
                    x.to_string(),
                    y.to_string(),
                    same.to_string(),
                    f12(accept),
                    f12(bound),
                    pass.to_string(),
                ]);
            }
            Ok(t)
        }
        LockCmd::Qid {
            n,
            bases,
            da,
            pairs,
        } => {
            let ens = build_exact_mubs(*n, *bases)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = Table::new(
                "lock qid",
                &["pair", "accept", "overlap", "deviation", "eps_bar", "bound", "pass"],
            );
            for i in 0..*pairs {
                let psi = haar_state(vec![1 << n], &mut rng);
                let phi = haar_state(vec![1 << n], &mut rng);
                let accept = qid_accept_prob(&ens, &psi, &phi, *da)?;
                let overlap = psi.inner(&phi).norm_sqr();
                let eps_bar = qid_deficiency(&ens, &psi, &phi, *da)?;
                let bound = qid_deviation_bound(eps_bar);
                let dev = (accept - overlap).abs();
                t.push(vec![
                    i.to_string(),
                    f12(accept),
                    f12(overlap),
                    f12(dev),
                    f12(eps_bar),
                    f12(bound),
                    (dev <= bound + 1e-9).to_string(),
                ]);
            }
            Ok(t)
        }
    }
}

fn run_qcext(cmd: &QcextCmd, seed: u64) -> anyhow::Result<Table> {
    match cmd {
        QcextCmd::Decouple {
            d,
            family,
            da1,
            de,
            states,
        } => {
            let (ens, bound_kind) = match family {
                QcFamily::Full => (build_full_mub_qcext(*d)?, QcBound::FullMub),
                QcFamily::Bitwise => {
                    let n = d.trailing_zeros() as usize;
                    (build_bitwise_qcext(n)?, QcBound::Bitwise { d: 2, n })
                }
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = Table::new(
                "qcext decouple",
                &["state", "members", "avg_lhs", "h2", "bound_h2", "pass"],
            );
            for i in 0..*states {
                let psi = haar_state(vec![*d, *de], &mut rng);
                let rep = decoupling_eval(&ens, &psi.to_density(), *da1, *de, bound_kind)?;
                t.push(vec![
                    format!("haar#{i}"),
                    ens.len().to_string(),
                    f12(rep.avg),
                    f12(rep.h2),
                    f12(rep.bound_h2),
                    rep.pass.to_string(),
                ]);
            }
            // product state decouples exactly
            let rho_e = random_density(vec![*de], *de, &mut rng);
            let prod = qurlab::DensityOperator::maximally_mixed(vec![*d]).tensor(&rho_e);
            let rep = decoupling_eval(&ens, &prod, *da1, *de, bound_kind)?;
            t.push(vec![
                "product".into(),
                ens.len().to_string(),
                f12(rep.avg),
                f12(rep.h2),
                f12(rep.bound_h2),
                (rep.avg <= 1e-9).to_string(),
            ]);
            Ok(t)
        }
        QcextCmd::Random {
            da,
            da1,
            de,
            members,
            trials,
        } => {
            let rep = random_qcext_experiment(*da, *da1, *de, *members, *trials, seed)?;
            let mut t = Table::new(
                "qcext random",
                &[
                    "d_a",
                    "d_a1",
                    "d_e",
                    "members",
                    "trials",
                    "mean_lhs",
                    "std_err",
                    "mean_bound",
                    "violations",
                    "pass",
                ],
            );
            t.push(vec![
                da.to_string(),
                da1.to_string(),
                de.to_string(),
                members.to_string(),
                trials.to_string(),
                f12(rep.mean_lhs),
                f12(rep.std_err),
                f12(rep.mean_bound),
                rep.violations.to_string(),
                (rep.violations == 0).to_string(),
            ]);
            Ok(t)
        }
        QcextCmd::Vncheck { n, de, states } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d_a = 1usize << n;
            let mut t = Table::new(
                "qcext vncheck",
                &["state", "lhs", "rhs", "margin", "h_cond", "pass"],
            );
            for i in 0..*states {
                let rho = random_density(vec![d_a, *de], d_a * de, &mut rng);
                let rep = vn_uncertainty_check(&rho, *n)?;
                t.push(vec![
                    format!("hs#{i}"),
                    f12(rep.lhs),
                    f12(rep.rhs),
                    f12(rep.lhs - rep.rhs),
                    f12(rep.h_cond),
                    rep.pass.to_string(),
                ]);
            }
            Ok(t)
        }
        QcextCmd::Bounds {
            kind,
            da,
            n,
            d,
            hmin,
            eps,
            delta_p,
        } => {
            let bound = match kind {
                QcFamily::Full => minent_ur_bound_full_mub(*da, *hmin, *eps),
                QcFamily::Bitwise => minent_ur_bound_bitwise(*n, *d, *hmin, *eps, *delta_p),
            };
            let mut t = Table::new(
                "qcext bounds",
                &["kind", "d_a", "n", "d", "hmin", "eps", "delta_p", "bound", "pass"],
            );
            t.push(vec![
                format!("{kind:?}").to_lowercase(),
                da.to_string(),
                n.to_string(),
                d.to_string(),
                f12(*hmin),
                f12(*eps),
                f12(*delta_p),
                f12(bound),
                "true".into(),
            ]);
            Ok(t)
        }
    }
}

fn run_wse(cmd: &WseCmd, seed: u64) -> anyhow::Result<Table> {
    match cmd {
        WseCmd::Run {
            qubits,
            transcripts,
            dump,
        } => {
            let ts = wse_run_batch(*qubits, *transcripts, seed);
            if let Some(path) = dump {
                let mut out = String::new();
                for tr in &ts {
                    out.push_str(&serde_json::to_string(tr)?);
                    out.push('\n');
                }
                std::fs::write(path, out)?;
            }
            let stats = honest_run_stats(&ts);
            let n = stats.qubits as f64;
            let sig_match = (2.0 / 9.0 / n).sqrt();
            let sig_half = (0.25 / (n * 2.0 / 3.0)).sqrt();
            let pass = stats.matched_disagreements == 0
                && (stats.match_rate - 1.0 / 3.0).abs() <= 3.0 * sig_match
                && (stats.mismatch_agree_rate - 0.5).abs() <= 3.0 * sig_half;
            let mut t = Table::new(
                "wse run",
                &[
                    "qubits",
                    "disagreements",
                    "match_rate",
                    "mismatch_agree_rate",
                    "x_bias",
                    "pass",
                ],
            );
            t.push(vec![
                stats.qubits.to_string(),
                stats.matched_disagreements.to_string(),
                f12(stats.match_rate),
                f12(stats.mismatch_agree_rate),
                f12(stats.x_bias),
                pass.to_string(),
            ]);
            Ok(t)
        }
        WseCmd::Correctness { n, transcripts } => {
            let ts = wse_run_batch(*n, *transcripts, seed);
            let rep = wse_correctness_check(&ts)?;
            let mut t = Table::new(
                "wse correctness",
                &[
                    "n",
                    "transcripts",
                    "cells",
                    "tv_empirical",
                    "chi2",
                    "chi2_threshold",
                    "substring_mismatches",
                    "pass",
                ],
            );
            t.push(vec![
                n.to_string(),
                transcripts.to_string(),
                rep.cells.to_string(),
                f12(rep.tv_empirical),
                f12(rep.chi2),
                f12(rep.chi2_threshold),
                rep.substring_mismatches.to_string(),
                rep.pass.to_string(),
            ]);
            Ok(t)
        }
        WseCmd::Params {
            n,
            eps,
            stored,
            sweep_n,
        } => {
            let mut t = Table::new(
                "wse params",
                &["n", "eps", "stored", "kappa", "lambda_max", "fidelity_bound", "secure", "pass"],
            );
            let mut all_n = vec![*n];
            all_n.extend_from_slice(sweep_n);
            for nn in all_n {
                let p = wse_security_params(nn, *eps, *stored)?;
                let (fb, _) = channel_fidelity_bound(nn, *stored);
                t.push(vec![
                    nn.to_string(),
                    f12(*eps),
                    stored.to_string(),
                    f12(p.kappa),
                    f12(p.lambda_max),
                    f12(fb),
                    p.secure.to_string(),
                    "true".into(),
                ]);
            }
            Ok(t)
        }
    }
}

fn run_report(files: &[PathBuf]) -> anyhow::Result<(Table, bool)> {
    let mut t = Table::new("report", &["file", "rows", "pass"]);
    let mut all_pass = true;
    for f in files {
        let content = std::fs::read_to_string(f)
            .with_context(|| format!("missing result file {}", f.display()))?;
        let parsed = Table::parse(&content)
            .ok_or_else(|| anyhow!("unparseable result file {}", f.display()))?;
        let pass = parsed.all_pass();
        all_pass &= pass;
        t.push(vec![
            f.display().to_string(),
            parsed.rows.len().to_string(),
            pass.to_string(),
        ]);
    }
    Ok((t, all_pass))
}

fn dispatch(cmd: &Cmd, seed: u64) -> anyhow::Result<(Table, bool)> {
    let table = match cmd {
        Cmd::Mub { cmd } => run_mub(cmd, seed)?,
        Cmd::Extractor { cmd } => run_extractor(cmd, seed)?,
        Cmd::Mur { cmd } => run_mur(cmd, seed)?,
        Cmd::Lock { cmd } => run_lock(cmd, seed)?,
        Cmd::Qcext { cmd } => run_qcext(cmd, seed)?,
        Cmd::Wse { cmd } => run_wse(cmd, seed)?,
        Cmd::Report { files } => return run_report(files),
    };
    let pass = table.all_pass();
    Ok((table, pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, seed, format, out) = match (&cli.config, &cli.command) {
        (Some(path), None) => {
            let content = match std::fs::read_to_string(path) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: cannot read config {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            let cfg: ConfigFile = match serde_json::from_str(&content) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: bad config {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            let threads = cfg.threads;
            init_threads(threads.or(cli.threads));
            (
                cfg.command,
                cfg.seed.unwrap_or(cli.seed),
                cfg.format.unwrap_or(cli.format),
                cfg.out.or(cli.out.clone()),
            )
        }
        (None, Some(c)) => {
            init_threads(cli.threads);
            (c.clone(), cli.seed, cli.format, cli.out.clone())
        }
        _ => {
            eprintln!("error: provide exactly one of a subcommand or --config");
            return ExitCode::from(2);
        }
    };

    match dispatch(&cmd, seed) {
        Ok((table, pass)) => {
            let rendered = table.render(format);
            match out {
                Some(path) => {
                    if let Err(e) = std::fs::write(&path, rendered) {
                        eprintln!("error: writing {}: {e}", path.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{rendered}"),
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn init_threads(requested: Option<usize>) {
    let n = requested.or_else(|| {
        std::env::var("QURLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}
