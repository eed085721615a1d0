//! Binary finite fields GF(2^t) and polynomial arithmetic over them.
//!
//! Field elements are coefficient vectors of polynomials over GF(2), packed
//! little-endian into a machine word (bit `i` is the coefficient of `X^i`).
//! The modulus is stored including its leading bit. Degrees up to t = 24 are
//! supported; the irreducible-polynomial search is deterministic and returns
//! the lowest bit mask, so a field context is reproducible from `t` alone.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

pub const MAX_DEGREE: u32 = 24;

/// Element of GF(2^t), valid only together with the [`FieldCtx`] it came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldElem(pub u64);

impl FieldElem {
    pub const ZERO: FieldElem = FieldElem(0);
    pub const ONE: FieldElem = FieldElem(1);

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

/// A binary field GF(2^t): extension degree, modulus polynomial and a fixed
/// generator of the multiplicative group.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldCtx {
    t: u32,
    modulus: u64,
    generator: FieldElem,
}

/// Remainder of carry-less division of `a` by `m` over GF(2).
fn poly_rem(mut a: u64, m: u64) -> u64 {
    let dm = 63 - m.leading_zeros();
    loop {
        let da = 63 - (a | 1).leading_zeros();
        if a == 0 || da < dm {
            return a;
        }
        a ^= m << (da - dm);
    }
}

/// Lowest-mask irreducible polynomial of degree `t` over GF(2).
///
/// Exhaustive trial division by every polynomial of degree 1..=t/2. At the
/// supported degrees the first irreducible appears after O(t) candidates.
pub fn find_irreducible(t: u32) -> Result<u64> {
    if t == 0 || t > MAX_DEGREE {
        return Err(Error::InvalidParameter(format!(
            "field degree must be in 1..={MAX_DEGREE}, got {t}"
        )));
    }
    if t == 1 {
        return Ok(0b10); // X
    }
    'cand: for cand in (1u64 << t)..(1u64 << (t + 1)) {
        for d in 2..(1u64 << (t / 2 + 1)) {
            if poly_rem(cand, d) == 0 {
                continue 'cand;
            }
        }
        return Ok(cand);
    }
    unreachable!("irreducible polynomials of degree {t} exist")
}

impl FieldCtx {
    /// Build GF(2^t) with the deterministic lowest-mask modulus and the
    /// smallest-encoding generator.
    pub fn new(t: u32) -> Result<FieldCtx> {
        let modulus = find_irreducible(t)?;
        let mut ctx = FieldCtx {
            t,
            modulus,
            generator: FieldElem::ONE,
        };
        ctx.generator = ctx.find_generator();
        Ok(ctx)
    }

    /// Reconstruct a context from a serialized descriptor, revalidating it.
    pub fn from_parts(t: u32, modulus: u64, generator: u64) -> Result<FieldCtx> {
        let fresh = FieldCtx::new(t)?;
        if fresh.modulus != modulus || fresh.generator.0 != generator {
            return Err(Error::InvalidParameter(format!(
                "field descriptor (t={t}, modulus={modulus:#x}, generator={generator}) \
                 does not match the deterministic construction"
            )));
        }
        Ok(fresh)
    }

    pub fn degree(&self) -> u32 {
        self.t
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn generator(&self) -> FieldElem {
        self.generator
    }

    /// Field order 2^t.
    pub fn order(&self) -> u64 {
        1 << self.t
    }

    pub fn elem(&self, bits: u64) -> Result<FieldElem> {
        if bits >> self.t != 0 {
            return Err(Error::InvalidParameter(format!(
                "element {bits:#x} out of range for GF(2^{})",
                self.t
            )));
        }
        Ok(FieldElem(bits))
    }

    pub fn add(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        FieldElem(a.0 ^ b.0)
    }

    /// Carry-less multiply then reduce mod the modulus polynomial.
    pub fn mul(&self, a: FieldElem, b: FieldElem) -> FieldElem {
        let mut acc = 0u64;
        let mut x = a.0;
        let mut y = b.0;
        while y != 0 {
            if y & 1 != 0 {
                acc ^= x;
            }
            x <<= 1;
            y >>= 1;
        }
        FieldElem(poly_rem(acc, self.modulus))
    }

    pub fn pow(&self, base: FieldElem, mut exp: u64) -> FieldElem {
        let mut result = FieldElem::ONE;
        let mut b = base;
        while exp != 0 {
            if exp & 1 != 0 {
                result = self.mul(result, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        result
    }

    /// Multiplicative inverse; zero has none.
    pub fn inv(&self, a: FieldElem) -> Result<FieldElem> {
        if a.is_zero() {
            return Err(Error::InvalidParameter("inverse of zero".into()));
        }
        Ok(self.pow(a, self.order() - 2))
    }

    /// Multiplicative order of a nonzero element.
    pub fn element_order(&self, a: FieldElem) -> u64 {
        let q1 = self.order() - 1;
        let mut ord = q1;
        for p in prime_factors(q1) {
            while ord.is_multiple_of(p) && self.pow(a, ord / p) == FieldElem::ONE {
                ord /= p;
            }
        }
        ord
    }

    /// Smallest-encoding element of multiplicative order 2^t - 1.
    fn find_generator(&self) -> FieldElem {
        let q1 = self.order() - 1;
        if q1 == 1 {
            return FieldElem::ONE;
        }
        let factors = prime_factors(q1);
        'cand: for g in 2..self.order() {
            let g = FieldElem(g);
            for &p in &factors {
                if self.pow(g, q1 / p) == FieldElem::ONE {
                    continue 'cand;
                }
            }
            return g;
        }
        unreachable!("multiplicative group of a finite field is cyclic")
    }

    /// Powers y, zeta y, zeta^2 y, ... of the generator times a base point.
    pub fn generator_orbit(&self, y: FieldElem, len: usize) -> Vec<FieldElem> {
        let mut pts = Vec::with_capacity(len);
        let mut cur = y;
        for _ in 0..len {
            pts.push(cur);
            cur = self.mul(cur, self.generator);
        }
        pts
    }
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Polynomial over GF(2^t) with a fixed coefficient count; high zero
/// coefficients are retained so encodings keep a fixed width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyGF {
    pub coeffs: Vec<FieldElem>,
}

impl PolyGF {
    pub fn new(coeffs: Vec<FieldElem>) -> PolyGF {
        PolyGF { coeffs }
    }

    pub fn block_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Horner evaluation at a single point.
    pub fn eval(&self, ctx: &FieldCtx, x: FieldElem) -> FieldElem {
        let mut acc = FieldElem::ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = ctx.add(ctx.mul(acc, x), c);
        }
        acc
    }
}

/// Evaluate `f` at each point. Naive O(n) per point; at the supported block
/// counts this replaces the fast multipoint schemes without loss.
pub fn poly_eval_multi(ctx: &FieldCtx, f: &PolyGF, points: &[FieldElem]) -> Vec<FieldElem> {
    points.iter().map(|&p| f.eval(ctx, p)).collect()
}

/// Lagrange interpolation: the unique polynomial of degree < points.len()
/// through the given pairs, padded to exactly `points.len()` coefficients.
pub fn poly_interpolate(
    ctx: &FieldCtx,
    points: &[FieldElem],
    values: &[FieldElem],
) -> Result<PolyGF> {
    let n = points.len();
    if values.len() != n {
        return Err(Error::InvalidParameter(format!(
            "{} points but {} values",
            n,
            values.len()
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if points[i] == points[j] {
                return Err(Error::InvalidParameter(format!(
                    "repeated interpolation point {:#x}",
                    points[i].0
                )));
            }
        }
    }
    let mut coeffs = vec![FieldElem::ZERO; n];
    // numerator basis: for each i, prod_{j != i} (X - x_j) scaled by the
    // inverse of prod_{j != i} (x_i - x_j); subtraction is xor in char 2
    for i in 0..n {
        let mut denom = FieldElem::ONE;
        for j in 0..n {
            if j != i {
                denom = ctx.mul(denom, ctx.add(points[i], points[j]));
            }
        }
        let scale = ctx.mul(values[i], ctx.inv(denom)?);
        // expand prod_{j != i} (X + x_j)
        let mut poly = vec![FieldElem::ZERO; n];
        poly[0] = FieldElem::ONE;
        let mut cur_deg = 0;
        for (j, &pt) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            let mut next = vec![FieldElem::ZERO; n];
            for k in 0..=cur_deg {
                // (X + x_j) * poly
                next[k + 1] = ctx.add(next[k + 1], poly[k]);
                next[k] = ctx.add(next[k], ctx.mul(poly[k], pt));
            }
            poly = next;
            cur_deg += 1;
        }
        for k in 0..n {
            coeffs[k] = ctx.add(coeffs[k], ctx.mul(scale, poly[k]));
        }
    }
    Ok(PolyGF::new(coeffs))
}
