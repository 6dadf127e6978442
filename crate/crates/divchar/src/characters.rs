//! Multiplicative characters of F_p* of exact order d, and Dirichlet
//! characters mod q, with values kept as root-of-unity indices so every sum
//! built on them stays exact until report time.

use crate::fp::{self, PrimeField};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Dirichlet characters are fully tabulated, so their modulus is capped.
pub const DIRICHLET_MODULUS_CAP: u64 = 10_000_000;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum CharError {
    #[error("order {d} invalid: need d >= 2 and d | p-1 (p = {p})")]
    InvalidOrder { d: u64, p: u64 },
    #[error("label {label} invalid: need gcd(label, {d}) = 1")]
    InvalidLabel { label: u64, d: u64 },
    #[error("modulus {0} invalid: need 2 <= q <= {DIRICHLET_MODULUS_CAP}")]
    InvalidModulus(u64),
    #[error("expected {expected} exponents for the cyclic factors of (Z/{q})*, got {got}")]
    BadExponentCount { q: u64, expected: usize, got: usize },
}

/// A character value: zero, or the root-of-unity index k meaning
/// e^{2 pi i k / e} for the character's order e.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharValue {
    Zero,
    Root(u64),
}

impl CharValue {
    pub fn is_zero(&self) -> bool {
        matches!(self, CharValue::Zero)
    }
}

/// A multiplicative character of F_p* of exact order d, evaluated through the
/// power-residue symbol x^{(p-1)/d} and a d-entry root table. O(log p) per
/// evaluation, O(d) memory.
///
/// The `label` (coprime to d) selects which of the phi(d) characters of exact
/// order d is meant, relative to the smallest primitive root of p, so a
/// character is pinned down by (p, d, label) alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacterModP {
    field: PrimeField,
    order: u64,
    label: u64,
    exp: u64,
    root_table: HashMap<u64, u64>,
}

impl CharacterModP {
    pub fn new(field: PrimeField, d: u64, label: u64) -> Result<Self, CharError> {
        let p = field.modulus();
        if d < 2 || (p - 1) % d != 0 {
            return Err(CharError::InvalidOrder { d, p });
        }
        if fp::gcd(label % d, d) != 1 {
            return Err(CharError::InvalidLabel { label, d });
        }
        let g = primitive_root(&field);
        let zeta = field.pow(g, (p - 1) / d);
        let mut root_table = HashMap::with_capacity(d as usize);
        let mut z = 1u64;
        for j in 0..d {
            root_table.insert(z, j * (label % d) % d);
            z = field.mul(z, zeta);
        }
        debug_assert_eq!(root_table.len(), d as usize);
        Ok(CharacterModP {
            field,
            order: d,
            label: label % d,
            exp: (p - 1) / d,
            root_table,
        })
    }

    #[inline]
    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    #[inline]
    pub fn order(&self) -> u64 {
        self.order
    }

    #[inline]
    pub fn label(&self) -> u64 {
        self.label
    }

    /// chi(x), with chi(0) = 0.
    pub fn eval(&self, x: u64) -> CharValue {
        let x = self.field.reduce(x);
        if x == 0 {
            return CharValue::Zero;
        }
        let t = self.field.pow(x, self.exp);
        CharValue::Root(
            *self
                .root_table
                .get(&t)
                .expect("x^((p-1)/d) is a d-th root of unity"),
        )
    }
}

impl fmt::Display for CharacterModP {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "modp:d={},label={}", self.order, self.label)
    }
}

/// Smallest primitive root of F_p*.
pub fn primitive_root(field: &PrimeField) -> u64 {
    let p = field.modulus();
    let factors = fp::factorize(p - 1);
    'next: for g in 2..p {
        for &(q, _) in &factors {
            if field.pow(g, (p - 1) / q) == 1 {
                continue 'next;
            }
        }
        return g;
    }
    unreachable!("every prime field has a primitive root")
}

/// One cyclic factor of (Z/q)*: a generator lifted mod q and its order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CyclicFactor {
    pub generator: u64,
    pub order: u64,
}

/// Decomposes (Z/q)* into cyclic factors: the 2-part first (trivial for 2,
/// one factor for 4, the pair <-1>, <5> for 8 and above), then one factor per
/// odd prime power in increasing prime order.
pub fn unit_group_factors(q: u64) -> Vec<CyclicFactor> {
    assert!(q >= 2);
    let mut out = Vec::new();
    for part in local_parts(q) {
        let rest = q / part.pe;
        for &(g, order) in &part.generators {
            out.push(CyclicFactor {
                generator: crt_lift(g, part.pe, rest, q),
                order,
            });
        }
    }
    out
}

/// x ≡ g mod pe, x ≡ 1 mod rest.
fn crt_lift(g: u64, pe: u64, rest: u64, q: u64) -> u64 {
    if rest == 1 {
        return g % q;
    }
    let pe_inv = inv_mod(pe % rest, rest);
    let t = (1 + rest - g % rest) % rest * pe_inv % rest;
    (g + pe * t) % q
}

fn inv_mod(a: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i64, (a % m) as i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let quot = r0 / r1;
        (r0, r1) = (r1, r0 - quot * r1);
        (t0, t1) = (t1, t0 - quot * t1);
    }
    debug_assert_eq!(r0, 1);
    t0.rem_euclid(m as i64) as u64
}

/// The unit group of one prime-power component: generators with orders, and
/// a full discrete-log table mapping each local unit to its exponent vector.
struct LocalPart {
    pe: u64,
    generators: Vec<(u64, u64)>,
    dlog: HashMap<u64, Vec<u64>>,
}

fn local_parts(q: u64) -> Vec<LocalPart> {
    let mut parts = Vec::new();
    for (p, e) in fp::factorize(q) {
        let pe = p.pow(e);
        let generators: Vec<(u64, u64)> = if p == 2 {
            match e {
                1 => Vec::new(),
                2 => vec![(3, 2)],
                _ => vec![(pe - 1, 2), (5, pe / 4)],
            }
        } else {
            let phi = pe / p * (p - 1);
            vec![(generator_of_odd_prime_power(p, e), phi)]
        };
        // enumerate all products of generator powers
        let mut dlog = HashMap::new();
        let mut elems: Vec<(u64, Vec<u64>)> = vec![(1, Vec::new())];
        for &(g, order) in &generators {
            let mut next = Vec::with_capacity(elems.len() * order as usize);
            for (v, ts) in elems {
                let mut acc = v;
                for t in 0..order {
                    let mut ts2 = ts.clone();
                    ts2.push(t);
                    next.push((acc, ts2));
                    acc = acc * g % pe;
                }
            }
            elems = next;
        }
        for (v, ts) in elems {
            dlog.insert(v, ts);
        }
        parts.push(LocalPart {
            pe,
            generators,
            dlog,
        });
    }
    parts
}

/// Brute-force generator of (Z/p^e)* for odd p; q is desk-scale so a scan is
/// fine.
fn generator_of_odd_prime_power(p: u64, e: u32) -> u64 {
    let pe = p.pow(e);
    let phi = pe / p * (p - 1);
    let phi_factors = fp::factorize(phi);
    let pow_mod = |mut b: u64, mut n: u64| -> u64 {
        let mut acc = 1u64;
        b %= pe;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * b % pe;
            }
            b = b * b % pe;
            n >>= 1;
        }
        acc
    };
    'next: for g in 2..pe {
        if g % p == 0 {
            continue;
        }
        for &(f, _) in &phi_factors {
            if pow_mod(g, phi / f) == 1 {
                continue 'next;
            }
        }
        return g;
    }
    unreachable!("(Z/p^e)* is cyclic for odd p")
}

/// A Dirichlet character mod q, tabulated over all residues. Built from one
/// root-of-unity exponent per cyclic factor of (Z/q)* (same factor order as
/// [`unit_group_factors`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirichletCharacter {
    modulus: u64,
    order: u64,
    exponents: Vec<u64>,
    table: Vec<CharValue>,
}

impl DirichletCharacter {
    pub fn new(q: u64, exponents: &[u64]) -> Result<Self, CharError> {
        if q < 2 || q > DIRICHLET_MODULUS_CAP {
            return Err(CharError::InvalidModulus(q));
        }
        let parts = local_parts(q);
        let factor_orders: Vec<u64> = parts
            .iter()
            .flat_map(|p| p.generators.iter().map(|&(_, o)| o))
            .collect();
        if exponents.len() != factor_orders.len() {
            return Err(CharError::BadExponentCount {
                q,
                expected: factor_orders.len(),
                got: exponents.len(),
            });
        }
        let mut order = 1u64;
        for (&o, &a) in factor_orders.iter().zip(exponents) {
            order = fp::lcm(order, o / fp::gcd(a % o, o));
        }
        let mut table = vec![CharValue::Zero; q as usize];
        for n in 0..q {
            if fp::gcd(n, q) != 1 {
                continue;
            }
            let mut idx = 0u64;
            let mut slot = 0usize;
            for part in &parts {
                let ts = part
                    .dlog
                    .get(&(n % part.pe))
                    .expect("n coprime to q is a local unit");
                for (&t, &(_, o)) in ts.iter().zip(&part.generators) {
                    let a = exponents[slot] % o;
                    // (t a mod o) * order is an exact multiple of o
                    idx = (idx + t * a % o * order / o) % order;
                    slot += 1;
                }
            }
            table[n as usize] = CharValue::Root(idx);
        }
        let out = DirichletCharacter {
            modulus: q,
            order,
            exponents: exponents.to_vec(),
            table,
        };
        assert!(
            out.bucket_counts_balanced(),
            "character table must hit each root index equally often"
        );
        Ok(out)
    }

    /// Construction self-check: a character of order e maps exactly phi(q)/e
    /// residues onto each root index, which is what makes the full-period sum
    /// vanish for non-principal characters.
    fn bucket_counts_balanced(&self) -> bool {
        let mut counts = vec![0u64; self.order as usize];
        for v in &self.table {
            if let CharValue::Root(k) = v {
                counts[*k as usize] += 1;
            }
        }
        counts.iter().all(|&c| c == counts[0])
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    #[inline]
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn is_principal(&self) -> bool {
        self.order == 1
    }

    pub fn eval(&self, n: u64) -> CharValue {
        self.table[(n % self.modulus) as usize]
    }
}

impl fmt::Display for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let exps: Vec<String> = self.exponents.iter().map(|e| e.to_string()).collect();
        write!(f, "dirichlet:q={},exp={}", self.modulus, exps.join(","))
    }
}
