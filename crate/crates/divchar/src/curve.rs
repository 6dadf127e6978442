//! Short Weierstrass curves y^2 = x^3 + ax + b over F_p and their group
//! structure: chord-tangent addition, scalar multiplication, exhaustive group
//! order, and exact point orders.
//!
//! The group order is an O(p) quadratic-residue scan, which is the
//! scalability ceiling of this crate; it is meant for moduli up to ~10^7.

use crate::fp::{self, FieldError, PrimeField};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CurveError {
    #[error("singular curve: 4a^3 + 27b^2 = 0 mod p")]
    Singular,
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A point on a curve, either the identity or an affine pair of canonical
/// residues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Point {
    Infinity,
    Affine { x: u64, y: u64 },
}

impl Point {
    pub fn is_infinity(&self) -> bool {
        matches!(self, Point::Infinity)
    }

    /// Affine coordinates, or `None` for the identity.
    pub fn xy(&self) -> Option<(u64, u64)> {
        match self {
            Point::Infinity => None,
            Point::Affine { x, y } => Some((*x, *y)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Curve {
    field: PrimeField,
    a: u64,
    b: u64,
}

/// Group order and exact point order, both with factorizations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PointOrderInfo {
    pub group_order: u64,
    pub group_factors: Vec<(u64, u32)>,
    pub point_order: u64,
    pub point_factors: Vec<(u64, u32)>,
}

/// Cached #E(F_p) with factorization, computed once per curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupInfo {
    pub order: u64,
    pub factors: Vec<(u64, u32)>,
}

impl Curve {
    pub fn new(field: PrimeField, a: u64, b: u64) -> Result<Self, CurveError> {
        let a = field.reduce(a);
        let b = field.reduce(b);
        let disc = field.add(
            field.mul(4 % field.modulus(), field.mul(a, field.sq(a))),
            field.mul(27 % field.modulus(), field.sq(b)),
        );
        if disc == 0 {
            return Err(CurveError::Singular);
        }
        Ok(Curve { field, a, b })
    }

    #[inline]
    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    #[inline]
    pub fn a(&self) -> u64 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> u64 {
        self.b
    }

    /// x^3 + ax + b.
    #[inline]
    pub fn rhs(&self, x: u64) -> u64 {
        let f = &self.field;
        f.add(f.mul(x, f.add(f.sq(x), self.a)), self.b)
    }

    pub fn contains(&self, p: Point) -> bool {
        match p {
            Point::Infinity => true,
            Point::Affine { x, y } => {
                x < self.field.modulus()
                    && y < self.field.modulus()
                    && self.field.sq(y) == self.rhs(x)
            }
        }
    }

    pub fn negate(&self, p: Point) -> Point {
        match p {
            Point::Infinity => Point::Infinity,
            Point::Affine { x, y } => Point::Affine {
                x,
                y: self.field.neg(y),
            },
        }
    }

    /// Chord-tangent addition. Total on points of the curve.
    pub fn add(&self, p: Point, q: Point) -> Point {
        let f = &self.field;
        let (x1, y1) = match p {
            Point::Infinity => return q,
            Point::Affine { x, y } => (x, y),
        };
        let (x2, y2) = match q {
            Point::Infinity => return p,
            Point::Affine { x, y } => (x, y),
        };
        let lambda = if x1 == x2 {
            if f.add(y1, y2) == 0 {
                return Point::Infinity;
            }
            // tangent: (3x^2 + a) / 2y
            let num = f.add(f.mul(3, f.sq(x1)), self.a);
            let den = f.add(y1, y1);
            f.mul(num, f.inv(den).expect("2y != 0 for non-2-torsion doubling"))
        } else {
            let num = f.sub(y2, y1);
            let den = f.sub(x2, x1);
            f.mul(num, f.inv(den).expect("x1 != x2"))
        };
        let x3 = f.sub(f.sub(f.sq(lambda), x1), x2);
        let y3 = f.sub(f.mul(lambda, f.sub(x1, x3)), y1);
        Point::Affine { x: x3, y: y3 }
    }

    /// Double-and-add; `0P = Infinity`.
    pub fn scalar_mul(&self, n: u64, p: Point) -> Point {
        let mut acc = Point::Infinity;
        let mut base = p;
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.add(acc, base);
            }
            base = self.add(base, base);
            k >>= 1;
        }
        acc
    }

    /// #E(F_p) = p + 1 + sum_x legendre(x^3 + ax + b), via a squares bitmap
    /// so the scan costs O(p) multiplications instead of O(p) exponentiations.
    pub fn group_order(&self) -> u64 {
        let p = self.field.modulus();
        let words = (p as usize).div_ceil(64);
        let mut squares = vec![0u64; words];
        let mut z = 0u64;
        // walk z^2 incrementally: (z+1)^2 = z^2 + 2z + 1
        let mut zsq = 0u64;
        loop {
            squares[(zsq / 64) as usize] |= 1 << (zsq % 64);
            z += 1;
            if z > p / 2 {
                break;
            }
            zsq = (zsq + 2 * z - 1) % p;
        }
        let mut order = p as i64 + 1;
        for x in 0..p {
            let v = self.rhs(x);
            if v == 0 {
                continue; // legendre 0
            }
            if squares[(v / 64) as usize] >> (v % 64) & 1 == 1 {
                order += 1;
            } else {
                order -= 1;
            }
        }
        let order = order as u64;
        let bound = 2.0 * (p as f64).sqrt();
        debug_assert!(
            (order as f64 - (p as f64 + 1.0)).abs() <= bound + 1.0,
            "Hasse bound violated"
        );
        order
    }

    pub fn group_info(&self) -> GroupInfo {
        let order = self.group_order();
        GroupInfo {
            order,
            factors: fp::factorize(order),
        }
    }

    /// Exact multiplicative order of `p`, stripping primes from the group
    /// order while the multiple stays at infinity.
    pub fn point_order(&self, p: Point, group: &GroupInfo) -> PointOrderInfo {
        let mut ord = group.order;
        for &(q, _) in &group.factors {
            while ord % q == 0 && self.scalar_mul(ord / q, p).is_infinity() {
                ord /= q;
            }
        }
        debug_assert!(self.scalar_mul(ord, p).is_infinity());
        PointOrderInfo {
            group_order: group.order,
            group_factors: group.factors.clone(),
            point_order: ord,
            point_factors: fp::factorize(ord),
        }
    }

    /// Lifts a random x to a curve point and keeps it when its order reaches
    /// `threshold`; `None` after `attempts` rejected samples.
    pub fn find_point_of_order_at_least<R: Rng>(
        &self,
        threshold: f64,
        group: &GroupInfo,
        attempts: u32,
        rng: &mut R,
    ) -> Option<(Point, PointOrderInfo)> {
        let p = self.field.modulus();
        for _ in 0..attempts {
            let x = rng.gen_range(0..p);
            let v = self.rhs(x);
            let y = match self.field.sqrt(v) {
                Some(y) => y.min(self.field.neg(y)),
                None => continue,
            };
            let pt = Point::Affine { x, y };
            let info = self.point_order(pt, group);
            if info.point_order as f64 >= threshold {
                return Some((pt, info));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn f5_curve() -> Curve {
        Curve::new(PrimeField::new(5).unwrap(), 1, 1).unwrap()
    }

    fn random_points<R: Rng>(curve: &Curve, n: usize, rng: &mut R) -> Vec<Point> {
        let p = curve.field().modulus();
        let mut pts = vec![Point::Infinity];
        while pts.len() < n {
            let x = rng.gen_range(0..p);
            if let Some(y) = curve.field().sqrt(curve.rhs(x)) {
                pts.push(Point::Affine { x, y });
                pts.push(Point::Affine {
                    x,
                    y: curve.field().neg(y),
                });
            }
        }
        pts.truncate(n);
        pts
    }

    #[test]
    fn singular_rejected() {
        let f = PrimeField::new(5).unwrap();
        // 4*0 + 27*0 = 0
        assert_eq!(Curve::new(f, 0, 0), Err(CurveError::Singular));
    }

    #[test]
    fn f5_fixture_add_and_mul() {
        let e = f5_curve();
        let p = Point::Affine { x: 0, y: 1 };
        assert!(e.contains(p));
        assert_eq!(e.add(p, p), Point::Affine { x: 4, y: 2 });
        assert_eq!(e.add(p, Point::Infinity), p);
        assert_eq!(
            e.add(p, Point::Affine { x: 0, y: 4 }),
            Point::Infinity
        );
        assert_eq!(e.scalar_mul(3, p), Point::Affine { x: 2, y: 1 });
        assert_eq!(e.scalar_mul(0, p), Point::Infinity);
        assert_eq!(e.scalar_mul(9, p), Point::Infinity);
    }

    #[test]
    fn group_order_by_enumeration() {
        // exhaustive point-count oracle
        let oracle = |e: &Curve| {
            let p = e.field().modulus();
            let mut count = 1u64;
            for x in 0..p {
                for y in 0..p {
                    if e.field().sq(y) == e.rhs(x) {
                        count += 1;
                    }
                }
            }
            count
        };
        let e = f5_curve();
        assert_eq!(oracle(&e), 9);
        assert_eq!(e.group_order(), 9);
        let e2 = Curve::new(PrimeField::new(5).unwrap(), 0, 1).unwrap();
        assert_eq!(oracle(&e2), 6);
        assert_eq!(e2.group_order(), 6);
        // against the oracle on a batch of small random curves
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for &p in &[7u64, 11, 13, 17, 19, 23] {
            let f = PrimeField::new(p).unwrap();
            for _ in 0..4 {
                let a = rng.gen_range(0..p);
                let b = rng.gen_range(0..p);
                if let Ok(e) = Curve::new(f, a, b) {
                    assert_eq!(e.group_order(), oracle(&e), "p={p} a={a} b={b}");
                }
            }
        }
    }

    #[test]
    fn hasse_bound_on_random_curves() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10 {
            let mut p = rng.gen_range(1000u64..20000);
            while !fp::is_prime(p) {
                p += 1;
            }
            let f = PrimeField::new(p).unwrap();
            let e = loop {
                let a = rng.gen_range(0..p);
                let b = rng.gen_range(0..p);
                if let Ok(e) = Curve::new(f, a, b) {
                    break e;
                }
            };
            let n = e.group_order() as f64;
            assert!((n - (p as f64 + 1.0)).abs() <= 2.0 * (p as f64).sqrt());
        }
    }

    #[test]
    fn group_law_axioms() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let f = PrimeField::new(10007).unwrap();
        let e = Curve::new(f, 3, 8).unwrap();
        let pts = random_points(&e, 60, &mut rng);
        for _ in 0..10_000 {
            let p = pts[rng.gen_range(0..pts.len())];
            let q = pts[rng.gen_range(0..pts.len())];
            let s = pts[rng.gen_range(0..pts.len())];
            assert_eq!(e.add(e.add(p, q), s), e.add(p, e.add(q, s)));
            assert_eq!(e.add(p, q), e.add(q, p));
            assert_eq!(e.add(p, Point::Infinity), p);
            assert_eq!(e.add(p, e.negate(p)), Point::Infinity);
            assert!(e.contains(e.add(p, q)));
        }
    }

    #[test]
    fn scalar_mul_is_additive() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let f = PrimeField::new(10007).unwrap();
        let e = Curve::new(f, 3, 8).unwrap();
        let pts = random_points(&e, 8, &mut rng);
        for p in pts {
            for _ in 0..50 {
                let m = rng.gen_range(0..50_000u64);
                let n = rng.gen_range(0..50_000u64);
                assert_eq!(
                    e.scalar_mul(m + n, p),
                    e.add(e.scalar_mul(m, p), e.scalar_mul(n, p))
                );
            }
        }
    }

    #[test]
    fn lagrange_and_point_order() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let f = PrimeField::new(10007).unwrap();
        let e = Curve::new(f, 3, 8).unwrap();
        let group = e.group_info();
        let pts = random_points(&e, 20, &mut rng);
        for p in pts {
            assert!(e.scalar_mul(group.order, p).is_infinity());
            let info = e.point_order(p, &group);
            assert!(group.order % info.point_order == 0);
            assert!(e.scalar_mul(info.point_order, p).is_infinity());
            for &(q, _) in &info.point_factors {
                assert!(!e.scalar_mul(info.point_order / q, p).is_infinity());
            }
        }
    }

    #[test]
    fn f5_point_order_examples() {
        let e = f5_curve();
        let group = e.group_info();
        let info = e.point_order(Point::Affine { x: 0, y: 1 }, &group);
        assert_eq!(info.point_order, 9);
        let id = e.point_order(Point::Infinity, &group);
        assert_eq!(id.point_order, 1);
    }

    #[test]
    fn order_of_scaled_point_identity() {
        // ord(mP) = ord(P) / gcd(m, ord(P)), exercised on random multipliers
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let f = PrimeField::new(10007).unwrap();
        let e = Curve::new(f, 3, 8).unwrap();
        let group = e.group_info();
        let pts = random_points(&e, 5, &mut rng);
        for p in pts {
            let info = e.point_order(p, &group);
            for _ in 0..1000 {
                let m = rng.gen_range(1..100_000u64);
                let scaled = e.point_order(e.scalar_mul(m, p), &group);
                assert_eq!(
                    scaled.point_order,
                    info.point_order / fp::gcd(m, info.point_order)
                );
            }
        }
    }

    #[test]
    fn point_search_thresholds() {
        let e = f5_curve();
        let group = e.group_info();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let (_, info) = e
            .find_point_of_order_at_least(9.0, &group, 200, &mut rng)
            .expect("the group is cyclic of order 9");
        assert_eq!(info.point_order, 9);
        assert!(e
            .find_point_of_order_at_least(1.0, &group, 200, &mut rng)
            .is_some());
        assert!(e
            .find_point_of_order_at_least(10.0, &group, 200, &mut rng)
            .is_none());
    }
}
