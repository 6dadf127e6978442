//! Prime-field arithmetic mod a machine-word prime.
//!
//! The modulus is capped below 2^31 so that any product of two canonical
//! residues fits a `u64` without a wide-multiply intrinsic. Every residue is
//! kept canonical in `[0, p)`; there is no lazy reduction.

use thiserror::Error;

/// Exclusive upper bound on the modulus. Products of two reduced residues
/// stay below 2^62.
pub const MAX_MODULUS: u64 = 1 << 31;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} out of range (need 3 < p < 2^31)")]
    OutOfRange(u64),
    #[error("zero has no inverse")]
    ZeroInverse,
}

/// The field F_p for an odd prime 3 < p < 2^31.
///
/// Elements are plain `u64` values kept canonical in `[0, p)` by the
/// operations below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    /// Builds the field, running a deterministic primality check on `p`.
    pub fn new(p: u64) -> Result<Self, FieldError> {
        if p <= 3 || p >= MAX_MODULUS {
            return Err(FieldError::OutOfRange(p));
        }
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        Ok(PrimeField { p })
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.p
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.p
    }

    /// Canonical residue of a signed value.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        x.rem_euclid(self.p as i64) as u64
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        a * b % self.p
    }

    #[inline]
    pub fn sq(&self, a: u64) -> u64 {
        a * a % self.p
    }

    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        let mut b = base % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.sq(b);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat.
    pub fn inv(&self, x: u64) -> Result<u64, FieldError> {
        if x == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(x, self.p - 2))
    }

    /// Quadratic-residue symbol: 1 for a nonzero square, -1 for a non-square,
    /// 0 for zero.
    pub fn legendre(&self, x: u64) -> i32 {
        if x % self.p == 0 {
            return 0;
        }
        let t = self.pow(x, (self.p - 1) / 2);
        if t == 1 {
            1
        } else {
            -1
        }
    }

    /// Square root by Tonelli-Shanks; `None` when `x` is a non-residue.
    pub fn sqrt(&self, x: u64) -> Option<u64> {
        let x = x % self.p;
        if x == 0 {
            return Some(0);
        }
        if self.legendre(x) != 1 {
            return None;
        }
        if self.p % 4 == 3 {
            return Some(self.pow(x, (self.p + 1) / 4));
        }
        let mut q = self.p - 1;
        let mut s = 0u32;
        while q % 2 == 0 {
            q /= 2;
            s += 1;
        }
        let mut z = 2;
        while self.legendre(z) != -1 {
            z += 1;
        }
        let mut m = s;
        let mut c = self.pow(z, q);
        let mut t = self.pow(x, q);
        let mut r = self.pow(x, q.div_ceil(2));
        while t != 1 {
            let mut i = 0u32;
            let mut tt = t;
            while tt != 1 {
                tt = self.sq(tt);
                i += 1;
            }
            let b = self.pow(c, 1u64 << (m - i - 1));
            m = i;
            c = self.sq(b);
            t = self.mul(t, c);
            r = self.mul(r, b);
        }
        Some(r)
    }

    /// Inverts every nonzero entry of `vals` in place with a single
    /// exponentiation (Montgomery's trick); zero entries stay zero.
    pub fn batch_invert(&self, vals: &mut [u64], scratch: &mut Vec<u64>) {
        scratch.clear();
        let mut acc = 1u64;
        for &v in vals.iter() {
            scratch.push(acc);
            if v != 0 {
                acc = self.mul(acc, v);
            }
        }
        let mut inv_acc = match self.inv(acc) {
            Ok(v) => v,
            Err(_) => return, // all entries zero
        };
        for i in (0..vals.len()).rev() {
            if vals[i] != 0 {
                let v = vals[i];
                vals[i] = self.mul(inv_acc, scratch[i]);
                inv_acc = self.mul(inv_acc, v);
            }
        }
    }
}

/// Deterministic Miller-Rabin over the full u64 range.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let pow = |mut base: u64, mut exp: u64| {
        let mut acc = 1u64;
        base %= n;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul(acc, base);
            }
            base = mul(base, base);
            exp >>= 1;
        }
        acc
    };
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Prime factorization by trial division; adequate for arguments below 2^40.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0u32;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn inverse_examples() {
        let f = PrimeField::new(5).unwrap();
        assert_eq!(f.inv(4).unwrap(), 4);
        assert_eq!(f.inv(2).unwrap(), 3);
        assert_eq!(f.inv(0), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn modulus_validation() {
        assert_eq!(PrimeField::new(9), Err(FieldError::NotPrime(9)));
        assert_eq!(PrimeField::new(3), Err(FieldError::OutOfRange(3)));
        assert_eq!(PrimeField::new(2), Err(FieldError::OutOfRange(2)));
        assert!(PrimeField::new(1 << 31).is_err());
        assert!(PrimeField::new(2147483647).is_ok()); // largest admissible prime
    }

    #[test]
    fn field_axioms_random() {
        let f = PrimeField::new(1_000_003).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let a = rng.gen_range(0..f.modulus());
            let b = rng.gen_range(0..f.modulus());
            let c = rng.gen_range(0..f.modulus());
            assert_eq!(f.add(a, b), f.add(b, a));
            assert_eq!(f.mul(a, b), f.mul(b, a));
            assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
            assert_eq!(f.sub(f.add(a, b), b), a);
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
        }
    }

    #[test]
    fn sqrt_roundtrip() {
        for &p in &[5u64, 13, 17, 1009, 1_000_003, 998_244_353] {
            let f = PrimeField::new(p).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(p);
            for _ in 0..200 {
                let a = rng.gen_range(1..p);
                let sq = f.sq(a);
                let r = f.sqrt(sq).expect("square must have a root");
                assert!(r == a || r == f.neg(a));
            }
            let mut nonresidues = 0;
            for _ in 0..200 {
                let a = rng.gen_range(1..p);
                if f.legendre(a) == -1 {
                    nonresidues += 1;
                    assert!(f.sqrt(a).is_none());
                }
            }
            assert!(nonresidues > 0);
        }
    }

    #[test]
    fn batch_invert_skips_zeros() {
        let f = PrimeField::new(101).unwrap();
        let mut vals = vec![3, 0, 7, 100, 0, 55];
        let orig = vals.clone();
        let mut scratch = Vec::new();
        f.batch_invert(&mut vals, &mut scratch);
        for (v, o) in vals.iter().zip(orig.iter()) {
            if *o == 0 {
                assert_eq!(*v, 0);
            } else {
                assert_eq!(f.mul(*v, *o), 1);
            }
        }
    }

    #[test]
    fn primality_small_table() {
        let primes: Vec<u64> = (2..200).filter(|&n| is_prime(n)).collect();
        let mut expect = Vec::new();
        for n in 2u64..200 {
            if (2..n).all(|d| n % d != 0) {
                expect.push(n);
            }
        }
        assert_eq!(primes, expect);
        assert!(is_prime(2147483647));
        assert!(!is_prime(2147483647 * 3));
    }

    #[test]
    fn factorize_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n = rng.gen_range(2u64..1_000_000);
            let fac = factorize(n);
            let back: u64 = fac.iter().map(|(p, e)| p.pow(*e)).product();
            assert_eq!(back, n);
            for (p, _) in &fac {
                assert!(is_prime(*p));
            }
        }
    }
}
