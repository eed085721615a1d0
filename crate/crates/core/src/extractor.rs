//! Strong permutation condensers and extractors over bit strings, with
//! exhaustive brute-force verification oracles.
//!
//! A family member is a structured invertible map on n-bit strings; the
//! "head" (most significant m bits of the output) carries the extracted or
//! condensed randomness, the tail keeps the map bijective. Bit strings are
//! packed with the first bit most significant, and field-element blocks are
//! laid out most significant block first, so "the first m bits" is always
//! `x >> (n - m)`.

use crate::gf::{poly_eval_multi, poly_interpolate, FieldCtx, FieldElem, PolyGF};
use crate::quantum::Distribution;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Structured invertible map on n-bit strings with forward and inverse
/// evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BitPermutation {
    n_bits: u32,
    kind: PermKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum PermKind {
    Identity,
    /// Reed-Solomon re-encoding: interpret the input as a polynomial over
    /// GF(2^t) with `n_blocks` coefficients and output its evaluations at
    /// the points y, zeta y, ..., zeta^{n_blocks - 1} y.
    RsSeeded {
        ctx: FieldCtx,
        n_blocks: usize,
        ell: usize,
        seed: FieldElem,
    },
    /// x -> x * y in GF(2^n); the pairwise-independent hashing permutation.
    LhlMul { ctx: FieldCtx, seed: FieldElem },
    /// x -> a * x + b over GF(2^n) with a != 0.
    Affine {
        ctx: FieldCtx,
        a: FieldElem,
        b: FieldElem,
    },
    /// Sequential application, first element applied first.
    Compose(Vec<BitPermutation>),
    /// Apply `inner` to the bit window starting `skip` bits below the top,
    /// identity elsewhere.
    Segment { skip: u32, inner: Box<BitPermutation> },
    /// Multiply the t-bit window at `dst_skip` by the t-bit window at
    /// `src_skip` (when the latter is nonzero). The source window is left
    /// untouched, so the map stays invertible.
    SeededFromWindow {
        ctx: FieldCtx,
        src_skip: u32,
        dst_skip: u32,
    },
}

fn window(x: u64, n: u32, skip: u32, width: u32) -> u64 {
    (x >> (n - skip - width)) & ((1u64 << width) - 1)
}

fn set_window(x: u64, n: u32, skip: u32, width: u32, value: u64) -> u64 {
    let shift = n - skip - width;
    let mask = ((1u64 << width) - 1) << shift;
    (x & !mask) | (value << shift)
}

impl BitPermutation {
    pub fn identity(n_bits: u32) -> BitPermutation {
        BitPermutation {
            n_bits,
            kind: PermKind::Identity,
        }
    }

    /// Reed-Solomon evaluation permutation on GF(2^t)^n_blocks. The head is
    /// the first `ell` output blocks. Rejects the zero seed: the evaluation
    /// points y, zeta y, ..., zeta^{n-1} y are then no longer distinct.
    pub fn rs_seeded(
        ctx: &FieldCtx,
        n_blocks: usize,
        ell: usize,
        seed: FieldElem,
    ) -> Result<BitPermutation> {
        if seed.is_zero() {
            return Err(Error::InvalidParameter(
                "zero seed gives coincident evaluation points".into(),
            ));
        }
        if n_blocks < 1 || ell > n_blocks {
            return Err(Error::InvalidParameter(format!(
                "bad block layout: {n_blocks} blocks, head {ell}"
            )));
        }
        // the n_blocks evaluation points are distinct only while the
        // generator orbit has not wrapped
        if (n_blocks as u64) > ctx.order() - 1 {
            return Err(Error::InvalidParameter(format!(
                "{} blocks need 2^t - 1 >= {} distinct points (t = {})",
                n_blocks,
                n_blocks,
                ctx.degree()
            )));
        }
        let n_bits = ctx.degree() * n_blocks as u32;
        if n_bits > 60 {
            return Err(Error::InvalidParameter(format!("width {n_bits} > 60")));
        }
        Ok(BitPermutation {
            n_bits,
            kind: PermKind::RsSeeded {
                ctx: ctx.clone(),
                n_blocks,
                ell,
                seed,
            },
        })
    }

    /// Leftover-hash permutation x -> x * y on GF(2^n), y != 0.
    pub fn lhl_mul(ctx: &FieldCtx, seed: FieldElem) -> Result<BitPermutation> {
        if seed.is_zero() {
            return Err(Error::InvalidParameter("zero multiplier".into()));
        }
        Ok(BitPermutation {
            n_bits: ctx.degree(),
            kind: PermKind::LhlMul {
                ctx: ctx.clone(),
                seed,
            },
        })
    }

    /// x -> a x + b over GF(2^n), a != 0.
    pub fn affine(ctx: &FieldCtx, a: FieldElem, b: FieldElem) -> Result<BitPermutation> {
        if a.is_zero() {
            return Err(Error::InvalidParameter(
                "affine scale must be nonzero".into(),
            ));
        }
        Ok(BitPermutation {
            n_bits: ctx.degree(),
            kind: PermKind::Affine {
                ctx: ctx.clone(),
                a,
                b,
            },
        })
    }

    pub fn compose(parts: Vec<BitPermutation>) -> Result<BitPermutation> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidParameter("empty composition".into()));
        };
        let n = first.n_bits;
        if parts.iter().any(|p| p.n_bits != n) {
            return Err(Error::DimensionMismatch(
                "composition of permutations with different widths".into(),
            ));
        }
        Ok(BitPermutation {
            n_bits: n,
            kind: PermKind::Compose(parts),
        })
    }

    /// Embed `inner` on the window of bits [skip, skip + inner.n_bits) from
    /// the top of an `n_bits`-wide string.
    pub fn segment(n_bits: u32, skip: u32, inner: BitPermutation) -> Result<BitPermutation> {
        if skip + inner.n_bits > n_bits {
            return Err(Error::DimensionMismatch(format!(
                "window {}+{} exceeds width {}",
                skip, inner.n_bits, n_bits
            )));
        }
        Ok(BitPermutation {
            n_bits,
            kind: PermKind::Segment {
                skip,
                inner: Box::new(inner),
            },
        })
    }

    pub fn seeded_from_window(
        n_bits: u32,
        ctx: &FieldCtx,
        src_skip: u32,
        dst_skip: u32,
    ) -> Result<BitPermutation> {
        let t = ctx.degree();
        if src_skip + t > n_bits || dst_skip + t > n_bits {
            return Err(Error::DimensionMismatch("window exceeds width".into()));
        }
        let overlap = src_skip < dst_skip + t && dst_skip < src_skip + t;
        if overlap {
            return Err(Error::InvalidParameter(
                "source and destination windows overlap".into(),
            ));
        }
        Ok(BitPermutation {
            n_bits,
            kind: PermKind::SeededFromWindow {
                ctx: ctx.clone(),
                src_skip,
                dst_skip,
            },
        })
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn forward(&self, x: u64) -> u64 {
        debug_assert!(self.n_bits == 64 || x >> self.n_bits == 0);
        match &self.kind {
            PermKind::Identity => x,
            PermKind::RsSeeded {
                ctx,
                n_blocks,
                ell: _,
                seed,
            } => {
                let t = ctx.degree();
                let coeffs: Vec<FieldElem> = (0..*n_blocks)
                    .map(|j| FieldElem(window(x, self.n_bits, j as u32 * t, t)))
                    .collect();
                let f = PolyGF::new(coeffs);
                let pts = ctx.generator_orbit(*seed, *n_blocks);
                let vals = poly_eval_multi(ctx, &f, &pts);
                let mut out = 0u64;
                for v in vals {
                    out = (out << t) | v.bits();
                }
                out
            }
            PermKind::LhlMul { ctx, seed } => ctx.mul(FieldElem(x), *seed).bits(),
            PermKind::Affine { ctx, a, b } => ctx.add(ctx.mul(*a, FieldElem(x)), *b).bits(),
            PermKind::Compose(parts) => parts.iter().fold(x, |acc, p| p.forward(acc)),
            PermKind::Segment { skip, inner } => {
                let w = window(x, self.n_bits, *skip, inner.n_bits);
                set_window(x, self.n_bits, *skip, inner.n_bits, inner.forward(w))
            }
            PermKind::SeededFromWindow {
                ctx,
                src_skip,
                dst_skip,
            } => {
                let t = ctx.degree();
                let s = window(x, self.n_bits, *src_skip, t);
                if s == 0 {
                    return x;
                }
                let w = window(x, self.n_bits, *dst_skip, t);
                let w2 = ctx.mul(FieldElem(w), FieldElem(s)).bits();
                set_window(x, self.n_bits, *dst_skip, t, w2)
            }
        }
    }

    pub fn inverse(&self, y: u64) -> u64 {
        match &self.kind {
            PermKind::Identity => y,
            PermKind::RsSeeded {
                ctx,
                n_blocks,
                ell: _,
                seed,
            } => {
                let t = ctx.degree();
                let vals: Vec<FieldElem> = (0..*n_blocks)
                    .map(|j| FieldElem(window(y, self.n_bits, j as u32 * t, t)))
                    .collect();
                let pts = ctx.generator_orbit(*seed, *n_blocks);
                let f = poly_interpolate(ctx, &pts, &vals)
                    .expect("orbit points are distinct for nonzero seed");
                let mut out = 0u64;
                for c in f.coeffs {
                    out = (out << t) | c.bits();
                }
                out
            }
            PermKind::LhlMul { ctx, seed } => {
                let inv = ctx.inv(*seed).expect("seed is nonzero");
                ctx.mul(FieldElem(y), inv).bits()
            }
            PermKind::Affine { ctx, a, b } => {
                let inv = ctx.inv(*a).expect("scale is nonzero");
                ctx.mul(inv, ctx.add(FieldElem(y), *b)).bits()
            }
            PermKind::Compose(parts) => parts.iter().rev().fold(y, |acc, p| p.inverse(acc)),
            PermKind::Segment { skip, inner } => {
                let w = window(y, self.n_bits, *skip, inner.n_bits);
                set_window(y, self.n_bits, *skip, inner.n_bits, inner.inverse(w))
            }
            PermKind::SeededFromWindow {
                ctx,
                src_skip,
                dst_skip,
            } => {
                let t = ctx.degree();
                let s = window(y, self.n_bits, *src_skip, t);
                if s == 0 {
                    return y;
                }
                let inv = ctx.inv(FieldElem(s)).expect("s is nonzero");
                let w = window(y, self.n_bits, *dst_skip, t);
                let w2 = ctx.mul(FieldElem(w), inv).bits();
                set_window(y, self.n_bits, *dst_skip, t, w2)
            }
        }
    }

    /// First m bits of the forward image.
    pub fn head(&self, x: u64, m: u32) -> u64 {
        self.forward(x) >> (self.n_bits - m)
    }
}

/// A seeded family of bit permutations with a declared head length and the
/// parameters it claims. The JSON form of [`FamilyKind`] (field modulus and
/// generator included) is the reproducibility descriptor.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtractorFamily {
    n_bits: u32,
    m_bits: u32,
    claimed_k: f64,
    claimed_eps: f64,
    kind: FamilyKind,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum FamilyKind {
    /// Single identity member; neutral element for composition.
    Identity,
    /// {x -> x y : y != 0} over GF(2^n).
    Lhl { ctx: FieldCtx },
    /// Reed-Solomon condenser, seeds GF(2^t) \ {0}.
    Rs {
        ctx: FieldCtx,
        n_blocks: usize,
        ell: usize,
    },
    /// RS condense, split the condensed head into equal blocks, leftover-hash
    /// each block with one shared seed.
    BlockExtract {
        rs_ctx: FieldCtx,
        n_blocks: usize,
        ell_rs: usize,
        block_ctx: FieldCtx,
        lhl_blocks: usize,
    },
    /// Outer family applied to the head of the inner family.
    Composed {
        inner: Box<ExtractorFamily>,
        outer: Box<ExtractorFamily>,
    },
    /// Toy instance of the recursive extractor: condense, hash the first
    /// block, and use it as a data-dependent seed for hashing the second.
    GuvToy { ctx: FieldCtx, n_blocks: usize },
}

impl ExtractorFamily {
    pub fn identity(n_bits: u32) -> ExtractorFamily {
        ExtractorFamily {
            n_bits,
            m_bits: n_bits,
            claimed_k: n_bits as f64,
            claimed_eps: 0.0,
            kind: FamilyKind::Identity,
        }
    }

    pub fn n_bits(&self) -> u32 {
        self.n_bits
    }

    pub fn m_bits(&self) -> u32 {
        self.m_bits
    }

    pub fn claimed_k(&self) -> f64 {
        self.claimed_k
    }

    pub fn claimed_eps(&self) -> f64 {
        self.claimed_eps
    }

    pub fn seed_count(&self) -> u64 {
        match &self.kind {
            FamilyKind::Identity => 1,
            FamilyKind::Lhl { ctx } => ctx.order() - 1,
            FamilyKind::Rs { ctx, .. } => ctx.order() - 1,
            FamilyKind::BlockExtract {
                rs_ctx, block_ctx, ..
            } => (rs_ctx.order() - 1) * (block_ctx.order() - 1),
            FamilyKind::Composed { inner, outer } => inner.seed_count() * outer.seed_count(),
            FamilyKind::GuvToy { ctx, .. } => (ctx.order() - 1) * (ctx.order() - 1),
        }
    }

    pub fn seed_bits(&self) -> u32 {
        64 - self.seed_count().max(1).leading_zeros()
    }

    /// Member permutation for a seed index in 0..seed_count(). Seeds are
    /// enumerated in lexicographic order of their field-element encodings.
    pub fn member(&self, index: u64) -> Result<BitPermutation> {
        if index >= self.seed_count() {
            return Err(Error::InvalidParameter(format!(
                "seed index {index} out of range {}",
                self.seed_count()
            )));
        }
        match &self.kind {
            FamilyKind::Identity => Ok(BitPermutation::identity(self.n_bits)),
            FamilyKind::Lhl { ctx } => BitPermutation::lhl_mul(ctx, FieldElem(index + 1)),
            FamilyKind::Rs {
                ctx,
                n_blocks,
                ell,
            } => BitPermutation::rs_seeded(ctx, *n_blocks, *ell, FieldElem(index + 1)),
            FamilyKind::BlockExtract {
                rs_ctx,
                n_blocks,
                ell_rs,
                block_ctx,
                lhl_blocks,
            } => {
                let lhl_count = block_ctx.order() - 1;
                let i_rs = index / lhl_count;
                let i_lhl = index % lhl_count;
                let rs =
                    BitPermutation::rs_seeded(rs_ctx, *n_blocks, *ell_rs, FieldElem(i_rs + 1))?;
                let wb = block_ctx.degree();
                let mut parts = vec![rs];
                for b in 0..*lhl_blocks {
                    let lhl = BitPermutation::lhl_mul(block_ctx, FieldElem(i_lhl + 1))?;
                    parts.push(BitPermutation::segment(self.n_bits, b as u32 * wb, lhl)?);
                }
                BitPermutation::compose(parts)
            }
            FamilyKind::Composed { inner, outer } => {
                let i_inner = index / outer.seed_count();
                let i_outer = index % outer.seed_count();
                let pi = inner.member(i_inner)?;
                let po = outer.member(i_outer)?;
                BitPermutation::compose(vec![pi, BitPermutation::segment(self.n_bits, 0, po)?])
            }
            FamilyKind::GuvToy { ctx, n_blocks } => {
                let q1 = ctx.order() - 1;
                let i_rs = index / q1;
                let i_lhl = index % q1;
                let t = ctx.degree();
                let rs = BitPermutation::rs_seeded(ctx, *n_blocks, 2, FieldElem(i_rs + 1))?;
                let lhl = BitPermutation::lhl_mul(ctx, FieldElem(i_lhl + 1))?;
                BitPermutation::compose(vec![
                    rs,
                    BitPermutation::segment(self.n_bits, 0, lhl)?,
                    BitPermutation::seeded_from_window(self.n_bits, ctx, 0, t)?,
                ])
            }
        }
    }

    pub fn members(&self) -> impl Iterator<Item = BitPermutation> + '_ {
        (0..self.seed_count()).map(|i| self.member(i).expect("index in range"))
    }
}

/// Reed-Solomon strong permutation condenser family over GF(2^t)^n_blocks:
/// seeds are the nonzero field elements, heads the first `ell` blocks.
pub fn rs_family(ctx: &FieldCtx, n_blocks: usize, ell: usize, eps: f64) -> Result<ExtractorFamily> {
    // validate the geometry once by building a member
    BitPermutation::rs_seeded(ctx, n_blocks, ell, FieldElem::ONE)?;
    let t = ctx.degree();
    Ok(ExtractorFamily {
        n_bits: t * n_blocks as u32,
        m_bits: t * ell as u32,
        claimed_k: ((ell + 1) as u32 * t) as f64,
        claimed_eps: eps,
        kind: FamilyKind::Rs {
            ctx: ctx.clone(),
            n_blocks,
            ell,
        },
    })
}

/// Leftover-hash extractor family on GF(2^n): head is the first m bits of
/// x * y. For a k-source the hash lemma guarantees average distance
/// (1/2) sqrt(2^(m-k)), so m >= k - 2 log(2/eps) suffices for error eps.
pub fn lhl_family(ctx: &FieldCtx, k: f64, eps: f64) -> Result<ExtractorFamily> {
    let n = ctx.degree();
    let m = (k - 2.0 * (2.0 / eps).log2()).floor();
    if m < 1.0 {
        return Err(Error::Infeasible(format!(
            "m = k - 2 log(2/eps) = {m:.2} < 1; need larger k or eps"
        )));
    }
    let m = (m as u32).min(n);
    lhl_family_with_m(ctx, k, eps, m)
}

/// Same family with an explicit output length.
pub fn lhl_family_with_m(ctx: &FieldCtx, k: f64, eps: f64, m: u32) -> Result<ExtractorFamily> {
    if m == 0 || m > ctx.degree() {
        return Err(Error::InvalidParameter(format!(
            "output length {m} out of range 1..={}",
            ctx.degree()
        )));
    }
    Ok(ExtractorFamily {
        n_bits: ctx.degree(),
        m_bits: m,
        claimed_k: k,
        claimed_eps: eps,
        kind: FamilyKind::Lhl { ctx: ctx.clone() },
    })
}

/// Outer family applied to the head of the inner family; the tail bits of
/// both stages are carried along so the composition stays a permutation.
/// Error parameters add.
pub fn compose_families(
    inner: &ExtractorFamily,
    outer: &ExtractorFamily,
) -> Result<ExtractorFamily> {
    if outer.n_bits != inner.m_bits {
        return Err(Error::DimensionMismatch(format!(
            "outer input width {} != inner head width {}",
            outer.n_bits, inner.m_bits
        )));
    }
    Ok(ExtractorFamily {
        n_bits: inner.n_bits,
        m_bits: outer.m_bits,
        claimed_k: inner.claimed_k,
        claimed_eps: inner.claimed_eps + outer.claimed_eps,
        kind: FamilyKind::Composed {
            inner: Box::new(inner.clone()),
            outer: Box::new(outer.clone()),
        },
    })
}

/// Toy parameters for [`block_extract_family`]: an explicit field degree in
/// place of the theorem value.
#[derive(Clone, Copy, Debug)]
pub struct BlockExtractToy {
    pub t: u32,
}

/// Theorem field degree t = ceil(8 s log2(24 n^2 (4s+1) / eps)) for the
/// block extractor.
pub fn block_extract_theorem_t(n_blocks: u64, s: u64, eps: f64) -> u64 {
    let x = 24.0 * (n_blocks as f64).powi(2) * (4 * s + 1) as f64 / eps;
    (8.0 * s as f64 * x.log2()).ceil() as u64
}

/// Seed-size bound 2 l t / s + t from the block-extractor lemma, in bits.
pub fn block_extract_seed_bound(ell: u64, t: u64, s: u64) -> u64 {
    2 * ell * t / s + t
}

/// RS-condense with head (2 ell - 1) blocks, partition the head into 2 s
/// equal blocks and leftover-hash each with one shared seed. The family maps
/// (n_bits, 2 ell t) sources eps-close to ell t uniform bits at theorem
/// parameters; in toy mode (explicit small t) only bijectivity and the
/// measured statistics are meaningful.
pub fn block_extract_family(
    n_bits: u32,
    ell: usize,
    s: usize,
    eps: f64,
    toy: Option<BlockExtractToy>,
) -> Result<ExtractorFamily> {
    let t = match toy {
        Some(toyp) => toyp.t as u64,
        None => {
            // theorem t solves n_blocks = n_bits / t implicitly; use the
            // conservative n_blocks <= n_bits
            block_extract_theorem_t(n_bits as u64, s as u64, eps)
        }
    };
    if t > crate::gf::MAX_DEGREE as u64 {
        return Err(Error::Infeasible(format!(
            "field degree t = {t} exceeds the supported {}; use toy mode",
            crate::gf::MAX_DEGREE
        )));
    }
    let t = t as u32;
    if !n_bits.is_multiple_of(t) {
        return Err(Error::InvalidParameter(format!(
            "width {n_bits} not divisible by block size {t}"
        )));
    }
    let n_blocks = (n_bits / t) as usize;
    let ell_rs = 2 * ell - 1;
    if ell == 0 || ell_rs > n_blocks {
        return Err(Error::InvalidParameter(format!(
            "condensed head {ell_rs} blocks incompatible with {n_blocks} input blocks"
        )));
    }
    let head_bits = ell_rs as u32 * t;
    let lhl_blocks = 2 * s;
    if lhl_blocks == 0 || !head_bits.is_multiple_of(lhl_blocks as u32) {
        return Err(Error::InvalidParameter(format!(
            "condensed head of {head_bits} bits does not split into {lhl_blocks} equal blocks"
        )));
    }
    let wb = head_bits / lhl_blocks as u32;
    let rs_ctx = FieldCtx::new(t)?;
    let block_ctx = FieldCtx::new(wb)?;
    Ok(ExtractorFamily {
        n_bits,
        m_bits: (ell as u32) * t,
        claimed_k: (2 * ell as u64 * t as u64) as f64,
        claimed_eps: eps,
        kind: FamilyKind::BlockExtract {
            rs_ctx,
            n_blocks,
            ell_rs,
            block_ctx,
            lhl_blocks,
        },
    })
}

/// Parameter calculus for the recursive extractor construction: for an
/// (n, k) source it extracts floor(k/4) bits with seed length at most
/// d(eps) = 200 ceil(200 log2(24 n^2 / eps)).
#[derive(Clone, Debug, Serialize)]
pub struct GuvReport {
    pub n: u64,
    pub k: u64,
    pub eps: f64,
    pub t_eps: u64,
    pub seed_bits_bound: u64,
    pub output_len: u64,
    pub k_min: u64,
    pub feasible: bool,
    pub violated: Option<String>,
}

pub fn guv_params(n: u64, k: u64, eps: f64) -> GuvReport {
    let t_eps = (200.0 * (24.0 * (n as f64) * (n as f64) / eps).log2()).ceil() as u64;
    let d_eps = 200 * t_eps;
    let feasible = k >= d_eps && k <= n && eps < 0.5;
    let violated = if eps >= 0.5 {
        Some(format!("eps = {eps} not < 1/2"))
    } else if k > n {
        Some(format!("k = {k} > n = {n}"))
    } else if k < d_eps {
        Some(format!(
            "k = {k} < 200 ceil(200 log2(24 n^2/eps)) = {d_eps}"
        ))
    } else {
        None
    };
    GuvReport {
        n,
        k,
        eps,
        t_eps,
        seed_bits_bound: d_eps,
        output_len: k / 4,
        k_min: d_eps,
        feasible,
        violated,
    }
}

/// Iterated application: each stage extracts a quarter of the remaining
/// min-entropy (losing one chaining bit), so reaching a (1 - delta) fraction
/// takes O(log(1/delta)) stages.
#[derive(Clone, Debug, Serialize)]
pub struct GuvRepeatReport {
    pub stages: u64,
    pub total_output: u64,
    pub total_seed_bits_bound: u64,
    pub per_stage: Vec<GuvReport>,
}

pub fn guv_repeat_params(n: u64, k: u64, eps: f64, delta: f64) -> Result<GuvRepeatReport> {
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    let target = ((1.0 - delta) * k as f64).ceil() as u64;
    let mut remaining = k;
    let mut total_output = 0;
    let mut total_seed = 0;
    let mut per_stage = Vec::new();
    while total_output < target {
        let stage = guv_params(n, remaining, eps);
        let out = stage.output_len;
        if out == 0 {
            break;
        }
        total_output += out;
        total_seed += stage.seed_bits_bound;
        remaining = remaining.saturating_sub(out + 1);
        per_stage.push(stage);
        if per_stage.len() > 64 {
            break;
        }
    }
    Ok(GuvRepeatReport {
        stages: per_stage.len() as u64,
        total_output,
        total_seed_bits_bound: total_seed,
        per_stage,
    })
}

/// Desk-scale instance of the recursive construction on GF(2^t)^n_blocks:
/// RS-condense, leftover-hash the first condensed block, then hash the
/// second block with the first as a data-dependent seed. The chained seed is
/// recoverable from the output, so every member is a bijection.
pub fn guv_family_toy(ctx: &FieldCtx, n_blocks: usize, eps: f64) -> Result<ExtractorFamily> {
    if n_blocks < 2 {
        return Err(Error::InvalidParameter(
            "toy recursion needs at least two blocks".into(),
        ));
    }
    BitPermutation::rs_seeded(ctx, n_blocks, 2, FieldElem::ONE)?;
    let t = ctx.degree();
    Ok(ExtractorFamily {
        n_bits: t * n_blocks as u32,
        m_bits: 2 * t,
        claimed_k: (3 * t) as f64,
        claimed_eps: eps,
        kind: FamilyKind::GuvToy {
            ctx: ctx.clone(),
            n_blocks,
        },
    })
}

/// Test source: a distribution on n-bit strings with explicit support.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Source {
    /// Uniform on the listed support (a flat source; min-entropy log2 of the
    /// support size).
    Flat(Vec<u64>),
    /// Uniform on [start, start + len): the structured interval source.
    Interval { start: u64, len: u64 },
    /// All mass on one string.
    PointMass(u64),
}

impl Source {
    pub fn support(&self) -> Vec<u64> {
        match self {
            Source::Flat(v) => v.clone(),
            Source::Interval { start, len } => (*start..start + len).collect(),
            Source::PointMass(x) => vec![*x],
        }
    }

    pub fn min_entropy(&self) -> f64 {
        (self.support().len() as f64).log2()
    }
}

/// Random flat source with 2^k support points on n-bit strings.
pub fn random_flat_source(n_bits: u32, k: u32, rng: &mut impl Rng) -> Source {
    let size = 1u64 << k;
    let space = 1u64 << n_bits;
    if size >= space {
        return Source::Interval {
            start: 0,
            len: space,
        };
    }
    let mut support = HashSet::with_capacity(size as usize);
    while (support.len() as u64) < size {
        support.insert(rng.random_range(0..space));
    }
    let mut v: Vec<u64> = support.into_iter().collect();
    v.sort_unstable();
    Source::Flat(v)
}

/// Exact head distribution of a source pushed through one member.
pub fn head_distribution(perm: &BitPermutation, m_bits: u32, source: &Source) -> Distribution {
    let support = source.support();
    let p = 1.0 / support.len() as f64;
    let mut probs = vec![0.0; 1 << m_bits];
    for &x in &support {
        probs[perm.head(x, m_bits) as usize] += p;
    }
    Distribution::new(probs).expect("histogram sums to 1")
}

/// Per-family report of a condenser check.
#[derive(Clone, Debug, Serialize)]
pub struct CondenserReport {
    pub k_prime: f64,
    /// Mean over seeds of the capped excess mass above the 2^-k' ceiling,
    /// i.e. the exact distance to the nearest k'-source.
    pub avg_excess: f64,
    pub worst_excess: f64,
    pub avg_tv_uniform: f64,
    pub pass: bool,
}

/// Closeness of the condensed output to a k'-source, averaged over seeds.
/// The exact distance from a distribution to the nearest min-entropy-k'
/// distribution is the capped excess mass sum_z max(p(z) - 2^-k', 0).
pub fn verify_condenser(
    family: &ExtractorFamily,
    k_prime: f64,
    eps: f64,
    source: &Source,
) -> Result<CondenserReport> {
    if family.n_bits > 16 {
        return Err(Error::InvalidParameter(
            "exhaustive condenser check limited to n <= 16".into(),
        ));
    }
    let cap = 2f64.powf(-k_prime);
    let mut sum_excess = 0.0;
    let mut worst: f64 = 0.0;
    let mut sum_tv = 0.0;
    let seeds = family.seed_count();
    for i in 0..seeds {
        let perm = family.member(i)?;
        let dist = head_distribution(&perm, family.m_bits, source);
        let excess: f64 = dist.probs().iter().map(|&p| (p - cap).max(0.0)).sum();
        sum_excess += excess;
        worst = worst.max(excess);
        sum_tv += dist.tv_uniform();
    }
    let avg_excess = sum_excess / seeds as f64;
    Ok(CondenserReport {
        k_prime,
        avg_excess,
        worst_excess: worst,
        avg_tv_uniform: sum_tv / seeds as f64,
        pass: avg_excess <= eps + 1e-12,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtractorReport {
    pub eps: f64,
    pub per_source_avg_tv: Vec<f64>,
    pub max_avg_tv: f64,
    pub mean_avg_tv: f64,
    pub pass: bool,
}

/// Average-over-seeds total variation of the head from uniform, for each
/// test source; the family passes if every source stays within eps.
pub fn verify_extractor(
    family: &ExtractorFamily,
    eps: f64,
    sources: &[Source],
) -> Result<ExtractorReport> {
    if family.n_bits > 16 {
        return Err(Error::InvalidParameter(
            "exhaustive extractor check limited to n <= 16".into(),
        ));
    }
    let seeds = family.seed_count();
    let mut per_source = Vec::with_capacity(sources.len());
    for source in sources {
        let mut sum_tv = 0.0;
        for i in 0..seeds {
            let perm = family.member(i)?;
            sum_tv += head_distribution(&perm, family.m_bits, source).tv_uniform();
        }
        per_source.push(sum_tv / seeds as f64);
    }
    let max = per_source.iter().cloned().fold(0.0_f64, f64::max);
    let mean = per_source.iter().sum::<f64>() / per_source.len().max(1) as f64;
    Ok(ExtractorReport {
        eps,
        per_source_avg_tv: per_source,
        max_avg_tv: max,
        mean_avg_tv: mean,
        pass: max <= eps + 1e-12,
    })
}

/// Exhaustive forward-inverse identity over the full input space.
pub fn check_bijective_exhaustive(perm: &BitPermutation) -> bool {
    let n = perm.n_bits();
    assert!(n <= 16, "exhaustive check limited to n <= 16");
    let space = 1u64 << n;
    let mut seen = vec![false; space as usize];
    for x in 0..space {
        let y = perm.forward(x);
        if y >= space || seen[y as usize] || perm.inverse(y) != x {
            return false;
        }
        seen[y as usize] = true;
    }
    true
}

/// Spot-check forward-inverse identity on random points (for widths where
/// exhaustion is out of reach).
pub fn check_bijective_sampled(perm: &BitPermutation, samples: u32, rng: &mut impl Rng) -> bool {
    let n = perm.n_bits();
    let space = 1u64 << n;
    (0..samples).all(|_| {
        let x = rng.random_range(0..space);
        perm.inverse(perm.forward(x)) == x
    })
}
