//! Division-polynomial sequences psi_n(P) evaluated at a fixed curve point.
//!
//! Two engines produce the same sequence and cross-check each other:
//!
//! * a ladder over blocks of eight consecutive values, giving any psi_n in
//!   O(log n) field operations (random access, chunk seeding);
//! * a forward stream with O(1) amortized field operations per term, for
//!   bulk summation.
//!
//! The stream recurrence divides by the value four indices back, which
//! vanishes exactly when ord P divides that index; the stream then re-anchors
//! its window with one ladder call and keeps going.
//!
//! Base points must be affine with y != 0 (the even-index formulas divide by
//! psi_2 = 2y), so point orders 1 and 2 are rejected at construction.

use crate::curve::{Curve, Point};
use crate::fp::PrimeField;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum DivPolyError {
    #[error("the point at infinity has no division-polynomial seed")]
    InfinityPoint,
    #[error("2-torsion base point: psi_2 = 2y = 0")]
    TwoTorsionPoint,
    #[error("a negatively-exponentiated factor vanishes at this point")]
    ZeroDenominator,
}

/// Seed values and cached constants for the sequence psi_n(P).
#[derive(Debug, Clone, Copy)]
pub struct DivPolyBase {
    curve: Curve,
    x: u64,
    y: u64,
    psi2: u64,
    psi3: u64,
    psi4: u64,
    psi2_sq: u64,
    inv_psi2: u64,
    /// psi_{-2} .. psi_5, the ladder's starting block (center 1).
    block1: [u64; 8],
}

impl DivPolyBase {
    /// Seeds psi_0..psi_4 by direct substitution into the defining
    /// polynomials.
    pub fn new(curve: &Curve, p: Point) -> Result<Self, DivPolyError> {
        let (x, y) = match p {
            Point::Infinity => return Err(DivPolyError::InfinityPoint),
            Point::Affine { x, y } => (x, y),
        };
        if y == 0 {
            return Err(DivPolyError::TwoTorsionPoint);
        }
        let f = *curve.field();
        let a = curve.a();
        let b = curve.b();
        let x2 = f.sq(x);
        let x3 = f.mul(x2, x);
        let x4 = f.sq(x2);
        let x6 = f.sq(x3);
        let psi2 = f.add(y, y);
        // 3x^4 + 6a x^2 + 12b x - a^2
        let psi3 = f.sub(
            f.add(
                f.add(f.mul(3, x4), f.mul(f.mul(6, a), x2)),
                f.mul(f.mul(12 % f.modulus(), b), x),
            ),
            f.sq(a),
        );
        // 4y (x^6 + 5a x^4 + 20b x^3 - 5a^2 x^2 - 4ab x - 8b^2 - a^3)
        let inner = {
            let t1 = f.add(x6, f.mul(f.mul(5, a), x4));
            let t2 = f.add(t1, f.mul(f.mul(20 % f.modulus(), b), x3));
            let t3 = f.sub(t2, f.mul(f.mul(5, f.sq(a)), x2));
            let t4 = f.sub(t3, f.mul(f.mul(f.mul(4, a), b), x));
            let t5 = f.sub(t4, f.mul(8 % f.modulus(), f.sq(b)));
            f.sub(t5, f.mul(a, f.sq(a)))
        };
        let psi4 = f.mul(f.mul(4, y), inner);
        Ok(Self::assemble(*curve, x, y, psi2, psi3, psi4))
    }

    /// Builds a base with explicit seed values, bypassing the defining
    /// polynomials. Exists so the verification suite can inject a corrupted
    /// seed and prove the checks catch it; not for normal use.
    pub fn from_seeds(curve: &Curve, p: Point, psi3: u64, psi4: u64) -> Result<Self, DivPolyError> {
        let (x, y) = match p {
            Point::Infinity => return Err(DivPolyError::InfinityPoint),
            Point::Affine { x, y } => (x, y),
        };
        if y == 0 {
            return Err(DivPolyError::TwoTorsionPoint);
        }
        let f = curve.field();
        let psi2 = f.add(y, y);
        Ok(Self::assemble(
            *curve,
            x,
            y,
            psi2,
            f.reduce(psi3),
            f.reduce(psi4),
        ))
    }

    fn assemble(curve: Curve, x: u64, y: u64, psi2: u64, psi3: u64, psi4: u64) -> Self {
        let f = *curve.field();
        let psi2_sq = f.sq(psi2);
        let inv_psi2 = f.inv(psi2).expect("psi2 != 0 checked above");
        // psi_5 = psi_4 psi_2^3 - psi_3^3
        let psi5 = f.sub(
            f.mul(psi4, f.mul(psi2, psi2_sq)),
            f.mul(psi3, f.sq(psi3)),
        );
        let block1 = [f.neg(psi2), f.neg(1), 0, 1, psi2, psi3, psi4, psi5];
        DivPolyBase {
            curve,
            x,
            y,
            psi2,
            psi3,
            psi4,
            psi2_sq,
            inv_psi2,
            block1,
        }
    }

    #[inline]
    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    #[inline]
    pub fn field(&self) -> &PrimeField {
        self.curve.field()
    }

    #[inline]
    pub fn point(&self) -> Point {
        Point::Affine { x: self.x, y: self.y }
    }

    /// (psi_1, psi_2, psi_3, psi_4).
    pub fn seeds(&self) -> [u64; 4] {
        [1, self.psi2, self.psi3, self.psi4]
    }

    /// Doubling step: from the block psi_{c-3..c+4} produce the nine values
    /// psi_{2c-3..2c+5}.
    fn advance_block(&self, v: &[u64; 8]) -> [u64; 9] {
        let f = self.field();
        let mut d = [0u64; 9];
        // odd targets 2j+1 for j = c-2+i: psi_{j+2} psi_j^3 - psi_{j-1} psi_{j+1}^3
        for i in 0..5 {
            let t1 = f.mul(v[i + 3], f.mul(v[i + 1], f.sq(v[i + 1])));
            let t2 = f.mul(v[i], f.mul(v[i + 2], f.sq(v[i + 2])));
            d[2 * i] = f.sub(t1, t2);
        }
        // even targets 2j for j = c-1+i:
        // psi_j (psi_{j+2} psi_{j-1}^2 - psi_{j-2} psi_{j+1}^2) / psi_2
        for i in 0..4 {
            let t1 = f.mul(v[i + 4], f.sq(v[i + 1]));
            let t2 = f.mul(v[i], f.sq(v[i + 3]));
            d[2 * i + 1] = f.mul(f.mul(v[i + 2], f.sub(t1, t2)), self.inv_psi2);
        }
        d
    }

    /// The block psi_{n-3..n+4}, in O(log n) field operations.
    pub fn psi_block(&self, n: u64) -> [u64; 8] {
        assert!(n >= 1, "block index must be positive");
        let mut block = self.block1;
        if n == 1 {
            return block;
        }
        let bits = 64 - n.leading_zeros();
        for i in (0..bits - 1).rev() {
            let d = self.advance_block(&block);
            let off = ((n >> i) & 1) as usize;
            block.copy_from_slice(&d[off..off + 8]);
        }
        block
    }

    /// psi_n(P) by the block ladder.
    pub fn psi(&self, n: u64) -> u64 {
        self.psi_block(n)[3]
    }

    /// psi extended to all integers: psi_0 = 0, psi_{-n} = -psi_n.
    pub fn psi_signed(&self, n: i64) -> u64 {
        match n {
            0 => 0,
            n if n > 0 => self.psi(n as u64),
            n => self.field().neg(self.psi((-n) as u64)),
        }
    }

    /// x-coordinate of nP computed purely from the sequence:
    /// (x psi_n^2 - psi_{n-1} psi_{n+1}) / psi_n^2. `None` marks nP at
    /// infinity (psi_n = 0).
    pub fn mul_x(&self, n: u64) -> Option<u64> {
        let f = self.field();
        let block = self.psi_block(n);
        let pn = block[3];
        if pn == 0 {
            return None;
        }
        let num = f.sub(f.mul(self.x, f.sq(pn)), f.mul(block[2], block[4]));
        Some(f.mul(num, f.inv(f.sq(pn)).expect("pn != 0")))
    }

    /// Sequential stream of psi values starting at `start` (>= 1).
    pub fn stream(&self, start: u64) -> PsiStream {
        assert!(start >= 1, "stream start must be positive");
        let f = self.field();
        let win = match start {
            1 => [f.neg(self.psi3), f.neg(self.psi2), f.neg(1), 0],
            2 => [f.neg(self.psi2), f.neg(1), 0, 1],
            3 => [f.neg(1), 0, 1, self.psi2],
            4 => [0, 1, self.psi2, self.psi3],
            s => {
                let block = self.psi_block(s - 1);
                [block[0], block[1], block[2], block[3]]
            }
        };
        let mut scratch = Vec::with_capacity(4);
        let mut winv = win;
        f.batch_invert(&mut winv, &mut scratch);
        PsiStream {
            base: *self,
            next: start,
            win,
            winv,
            dirty: 0,
            scratch,
        }
    }
}

/// Forward generator for psi_{start}, psi_{start+1}, ... with constant
/// amortized cost per term (one shared inversion per four terms). Owns a
/// copy of its base so it can outlive the borrow it was created from.
pub struct PsiStream {
    base: DivPolyBase,
    next: u64,
    /// psi at indices next-4 .. next-1.
    win: [u64; 4],
    /// inverses of `win` (0 where the value is 0); slots older than `dirty`
    /// rotations are valid.
    winv: [u64; 4],
    dirty: u8,
    scratch: Vec<u64>,
}

impl PsiStream {
    fn push(&mut self, v: u64) {
        self.win.rotate_left(1);
        self.winv.rotate_left(1);
        self.win[3] = v;
        self.winv[3] = 0;
        self.dirty += 1;
        if self.dirty == 4 {
            self.winv = self.win;
            self.base
                .field()
                .batch_invert(&mut self.winv, &mut self.scratch);
            self.dirty = 0;
        }
    }

    /// Trailing denominator vanished (ord P | next-4): re-anchor the window
    /// at the current index with one ladder call.
    fn reseed(&mut self, t: u64) -> u64 {
        let block = self.base.psi_block(t);
        self.win.copy_from_slice(&block[0..4]);
        self.winv = self.win;
        self.base
            .field()
            .batch_invert(&mut self.winv, &mut self.scratch);
        self.dirty = 0;
        block[3]
    }
}

impl Iterator for PsiStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        let t = self.next;
        self.next = t + 1;
        if self.win[0] == 0 {
            return Some(self.reseed(t));
        }
        let f = self.base.field();
        // psi_t = (psi_{t-1} psi_{t-3} psi_2^2 - psi_3 psi_{t-2}^2) / psi_{t-4}
        let num = f.sub(
            f.mul(f.mul(self.win[3], self.win[1]), self.base.psi2_sq),
            f.mul(self.base.psi3, f.sq(self.win[2])),
        );
        let v = f.mul(num, self.winv[0]);
        self.push(v);
        Some(v)
    }
}

/// First `count` stream values from `start`.
pub fn psi_stream(base: &DivPolyBase, start: u64, count: usize) -> Vec<u64> {
    base.stream(start).take(count).collect()
}

/// Evaluates the product prod_i psi_{m_i}(Q)^{e_i} at an affine point Q with
/// y(Q) != 0. Vanishing of a negatively-exponentiated factor is
/// `ZeroDenominator`; vanishing of a positively-exponentiated factor (with
/// all denominators nonzero) gives 0.
pub fn psi_product_at(curve: &Curve, q: Point, spec: &[(u64, i64)]) -> Result<u64, DivPolyError> {
    let base = DivPolyBase::new(curve, q)?;
    let f = base.field();
    let values: Vec<u64> = spec.iter().map(|&(m, _)| base.psi(m)).collect();
    for (&(_, e), &v) in spec.iter().zip(&values) {
        if e < 0 && v == 0 {
            return Err(DivPolyError::ZeroDenominator);
        }
    }
    let mut num = 1u64;
    let mut den = 1u64;
    for (&(_, e), &v) in spec.iter().zip(&values) {
        if e == 0 {
            continue;
        }
        if e > 0 {
            if v == 0 {
                return Ok(0);
            }
            num = f.mul(num, f.pow(v, e as u64));
        } else {
            den = f.mul(den, f.pow(v, (-e) as u64));
        }
    }
    Ok(f.mul(num, f.inv(den).expect("denominator factors checked nonzero")))
}

/// The hypothesis under which the quadruple product
/// psi_{m1 n1} psi_{m2 n2} psi_{m1 n2}^{-1} psi_{m2 n1}^{-1} is guaranteed
/// not to be a nontrivial power: gcd(m1 n1, m2 n2) = gcd(m1 n2, m2 n1)
/// together with m1 != m2 and n1 != n2.
pub fn gcd_condition_holds(m1: u64, m2: u64, n1: u64, n2: u64) -> bool {
    assert!(m1 >= 1 && m2 >= 1 && n1 >= 1 && n2 >= 1);
    if m1 == m2 || n1 == n2 {
        return false;
    }
    fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    gcd_u128(m1 as u128 * n1 as u128, m2 as u128 * n2 as u128)
        == gcd_u128(m1 as u128 * n2 as u128, m2 as u128 * n1 as u128)
}
