//! The character-sum engines: S_{f,chi,P}(N) and its relatives (correlation,
//! progression, scaled-index and complete twisted sums), the decomposition
//! audits that must hold exactly at the integer-bucket level, and the
//! right-hand sides of the four bound families with their hypothesis flags.
//!
//! Every sum is accumulated exactly: terms are unit-modulus roots of unity
//! with integer weights, counted per root index in a [`BucketAccumulator`].
//! Conversion to a complex number happens once, at report time, so two sums
//! agree iff their buckets agree.

use crate::characters::{CharValue, CharacterModP};
use crate::curve::{Curve, GroupInfo, Point, PointOrderInfo};
use crate::divpoly::{psi_product_at, DivPolyBase, DivPolyError, PsiStream};
use crate::fp::{gcd, lcm};
use crate::multiplicative::{
    psi_count_and_alpha, prime_factors_in_interval, SieveTables, SmoothParams, Twist, TwistValue,
};
use std::f64::consts::PI;
use thiserror::Error;

/// Documented cap on sequence indices (N <= R <= d(p + 1 + 2 sqrt p) at desk
/// scale stays far below this).
pub const INDEX_CAP: u64 = 1 << 40;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SumsError {
    #[error("point order {0} is below 3, so the sequence has no period d*ord")]
    SmallOrder(u64),
    #[error("N = {n} exceeds the period R = {r}; set the range override to sum anyway")]
    RangeExceedsR { n: u64, r: u64 },
    #[error(transparent)]
    DivPoly(#[from] DivPolyError),
}

/// Exact integer accumulator: one weight per root-of-unity index of a fixed
/// order, plus a counter for terms that are zero (vanishing character
/// argument or vanishing twist).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketAccumulator {
    order: u64,
    weights: Vec<i64>,
    zero_count: u64,
}

impl BucketAccumulator {
    pub fn new(order: u64) -> Self {
        assert!(order >= 1);
        BucketAccumulator {
            order,
            weights: vec![0; order as usize],
            zero_count: 0,
        }
    }

    #[inline]
    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    #[inline]
    pub fn zero_count(&self) -> u64 {
        self.zero_count
    }

    #[inline]
    pub fn add_root(&mut self, index: u64, weight: i64) {
        self.weights[(index % self.order) as usize] += weight;
    }

    #[inline]
    pub fn add_zero(&mut self) {
        self.zero_count += 1;
    }

    /// Exact merge; orders must agree.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.order, other.order);
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            *w += o;
        }
        self.zero_count += other.zero_count;
    }

    /// Merge with an integer coefficient applied to the weights (zero counts
    /// still add: they count visited terms, not signed mass).
    pub fn merge_weighted(&mut self, other: &Self, coeff: i64) {
        assert_eq!(self.order, other.order);
        for (w, o) in self.weights.iter_mut().zip(&other.weights) {
            *w += coeff * o;
        }
        self.zero_count += other.zero_count;
    }

    /// The complex value sum over j of weights(j) e^{2 pi i j / order};
    /// the only floating-point step in the pipeline. Quarter-turn angles
    /// take their exact values, so sums of real characters come out
    /// exactly real.
    pub fn complex(&self) -> (f64, f64) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, &w) in self.weights.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let quarters = 4 * j as u64;
            let (c, s) = if quarters % self.order == 0 {
                match quarters / self.order {
                    0 => (1.0, 0.0),
                    1 => (0.0, 1.0),
                    2 => (-1.0, 0.0),
                    _ => (0.0, -1.0),
                }
            } else {
                let theta = 2.0 * PI * j as f64 / self.order as f64;
                (theta.cos(), theta.sin())
            };
            re += w as f64 * c;
            im += w as f64 * s;
        }
        (re, im)
    }

    pub fn abs(&self) -> f64 {
        let (re, im) = self.complex();
        re.hypot(im)
    }
}

/// A fixed (curve, point, character) triple with its period R = d * ord P.
#[derive(Debug, Clone)]
pub struct SumContext {
    curve: Curve,
    point: Point,
    base: DivPolyBase,
    chi: CharacterModP,
    order_info: PointOrderInfo,
    r: u64,
    epsilon: f64,
}

impl SumContext {
    /// `epsilon` is the exponent in the order hypotheses checked by
    /// [`SumContext::satisfies_strong_r_condition`].
    pub fn new(
        curve: &Curve,
        point: Point,
        chi: CharacterModP,
        epsilon: f64,
        group: &GroupInfo,
    ) -> Result<Self, SumsError> {
        let order_info = curve.point_order(point, group);
        if order_info.point_order < 3 {
            return Err(SumsError::SmallOrder(order_info.point_order));
        }
        let base = DivPolyBase::new(curve, point)?;
        let r = chi.order() * order_info.point_order;
        Ok(SumContext {
            curve: *curve,
            point,
            base,
            chi,
            order_info,
            r,
            epsilon,
        })
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn point(&self) -> Point {
        self.point
    }

    pub fn base(&self) -> &DivPolyBase {
        &self.base
    }

    pub fn chi(&self) -> &CharacterModP {
        &self.chi
    }

    pub fn order_info(&self) -> &PointOrderInfo {
        &self.order_info
    }

    /// R = d * ord P, a period of chi(psi_n(P)).
    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn p(&self) -> u64 {
        self.curve.field().modulus()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// R >= p^{1/2 + epsilon}.
    pub fn satisfies_strong_r_condition(&self) -> bool {
        self.r as f64 >= (self.p() as f64).powf(0.5 + self.epsilon)
    }

    /// R >= p^{1/2} exp(2.1 log p / log log p).
    pub fn satisfies_weak_r_condition(&self) -> bool {
        let lp = (self.p() as f64).ln();
        self.r as f64 >= (self.p() as f64).sqrt() * (2.1 * lp / lp.ln()).exp()
    }
}

/// One evaluated sum: exact buckets plus descriptive metadata. Bound data is
/// attached by the scan layer when a bound family applies.
#[derive(Debug, Clone, PartialEq)]
pub struct SumResult {
    pub buckets: BucketAccumulator,
    pub n: u64,
    pub r: u64,
    pub twist: String,
    pub bound_rhs: Option<f64>,
    pub ratio: Option<f64>,
}

impl SumResult {
    fn new(buckets: BucketAccumulator, n: u64, r: u64, twist: String) -> Self {
        SumResult {
            buckets,
            n,
            r,
            twist,
            bound_rhs: None,
            ratio: None,
        }
    }

    pub fn complex(&self) -> (f64, f64) {
        self.buckets.complex()
    }

    pub fn abs(&self) -> f64 {
        self.buckets.abs()
    }

    pub fn zero_count(&self) -> u64 {
        self.buckets.zero_count()
    }

    /// Attaches a bound right-hand side and the ratio |S| / rhs.
    pub fn with_bound(mut self, rhs: f64) -> Self {
        self.ratio = Some(self.abs() / rhs);
        self.bound_rhs = Some(rhs);
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SumOpts {
    /// Permit N > R (the bound hypotheses assume N <= R, so this is off by
    /// default and surfaced as an explicit override).
    pub allow_beyond_r: bool,
    /// Worker threads for chunked accumulation; results are identical for
    /// any worker count because chunks merge by exact integer addition in
    /// index order.
    pub workers: usize,
}

impl Default for SumOpts {
    fn default() -> Self {
        SumOpts {
            allow_beyond_r: false,
            workers: 1,
        }
    }
}

#[inline]
fn add_term(
    buckets: &mut BucketAccumulator,
    chi_order: u64,
    chi_val: CharValue,
    twist_order: u64,
    twist_val: TwistValue,
) {
    let e = buckets.order();
    let CharValue::Root(ci) = chi_val else {
        buckets.add_zero();
        return;
    };
    match twist_val {
        TwistValue::Int(0) => buckets.add_zero(),
        TwistValue::Int(w) => buckets.add_root(ci * (e / chi_order), w),
        TwistValue::Char(CharValue::Zero) => buckets.add_zero(),
        TwistValue::Char(CharValue::Root(ti)) => {
            buckets.add_root((ci * (e / chi_order) + ti * (e / twist_order)) % e, 1)
        }
    }
}

fn sum_s_range(
    ctx: &SumContext,
    twist: &Twist,
    tables: &SieveTables,
    lo: u64,
    hi: u64,
    order: u64,
) -> BucketAccumulator {
    let mut buckets = BucketAccumulator::new(order);
    let d = ctx.chi.order();
    let t_ord = twist.char_order();
    let mut stream = ctx.base.stream(lo);
    for k in lo..=hi {
        let psi = stream.next().expect("stream is infinite");
        add_term(
            &mut buckets,
            d,
            ctx.chi.eval(psi),
            t_ord,
            twist.eval(k, tables),
        );
    }
    buckets
}

/// S_{f,chi,P}(N) = sum_{1<=n<=N} f(n) chi(psi_n(P)), streamed and
/// accumulated exactly.
pub fn sum_s(
    ctx: &SumContext,
    twist: &Twist,
    tables: &SieveTables,
    n: u64,
    opts: SumOpts,
) -> Result<SumResult, SumsError> {
    assert!(n >= 1, "empty ranges are not summed");
    assert!(n <= tables.limit(), "sieve tables too small for N = {n}");
    if n > ctx.r && !opts.allow_beyond_r {
        return Err(SumsError::RangeExceedsR { n, r: ctx.r });
    }
    let order = lcm(ctx.chi.order(), twist.char_order());
    let workers = opts.workers.max(1).min(n as usize);
    let buckets = if workers == 1 {
        sum_s_range(ctx, twist, tables, 1, n, order)
    } else {
        // contiguous chunks, each seeded by one ladder call; merged in index
        // order so the result is independent of scheduling
        let chunk = n.div_ceil(workers as u64);
        let mut parts: Vec<BucketAccumulator> = Vec::with_capacity(workers);
        std::thread::scope(|scope| {
            let mut handles = Vec::with_capacity(workers);
            for w in 0..workers as u64 {
                let lo = 1 + w * chunk;
                let hi = (lo + chunk - 1).min(n);
                if lo > hi {
                    break;
                }
                handles.push(scope.spawn(move || sum_s_range(ctx, twist, tables, lo, hi, order)));
            }
            for h in handles {
                parts.push(h.join().expect("worker panicked"));
            }
        });
        let mut acc = BucketAccumulator::new(order);
        for p in &parts {
            acc.merge(p);
        }
        acc
    };
    Ok(SumResult::new(buckets, n, ctx.r, twist.to_string()))
}

/// Produces chi(psi_{m k}(P)) for k = 1, 2, ... without walking all
/// intermediate indices: the index-scaling identity moves the sum to the
/// point mP, leaving a quadratic root-of-unity factor chi(psi_m(P))^{k^2}.
/// Falls back to a direct strided walk when mP is 2-torsion, and to a
/// constant Zero when psi_m(P) = 0 (then every psi_{mk} vanishes).
enum StridedChi<'a> {
    AllZero,
    Direct {
        chi: &'a CharacterModP,
        stream: PsiStream,
        stride: u64,
    },
    Transport {
        chi: &'a CharacterModP,
        stream: PsiStream,
        twist_index: u64,
        k: u64,
    },
}

impl<'a> StridedChi<'a> {
    fn new(ctx: &'a SumContext, m: u64) -> Self {
        assert!(m >= 1);
        if m == 1 {
            return StridedChi::Direct {
                chi: &ctx.chi,
                stream: ctx.base.stream(1),
                stride: 1,
            };
        }
        let mp = ctx.curve.scalar_mul(m, ctx.point);
        match DivPolyBase::new(&ctx.curve, mp) {
            Ok(base_m) => {
                let CharValue::Root(twist_index) = ctx.chi.eval(ctx.base.psi(m)) else {
                    return StridedChi::AllZero;
                };
                StridedChi::Transport {
                    chi: &ctx.chi,
                    stream: base_m.stream(1),
                    twist_index,
                    k: 0,
                }
            }
            Err(DivPolyError::InfinityPoint) => StridedChi::AllZero, // psi_m(P) = 0
            Err(_) => StridedChi::Direct {
                chi: &ctx.chi,
                stream: ctx.base.stream(1),
                stride: m,
            },
        }
    }

    /// Always walks every index; the reference route used to cross-check the
    /// transport route.
    fn new_direct(ctx: &'a SumContext, m: u64) -> Self {
        StridedChi::Direct {
            chi: &ctx.chi,
            stream: ctx.base.stream(1),
            stride: m,
        }
    }

    fn next_value(&mut self) -> CharValue {
        match self {
            StridedChi::AllZero => CharValue::Zero,
            StridedChi::Direct { chi, stream, stride } => {
                let psi = stream
                    .nth(*stride as usize - 1)
                    .expect("stream is infinite");
                chi.eval(psi)
            }
            StridedChi::Transport {
                chi,
                stream,
                twist_index,
                k,
            } => {
                *k += 1;
                let psi = stream.next().expect("stream is infinite");
                match chi.eval(psi) {
                    CharValue::Zero => CharValue::Zero,
                    CharValue::Root(i) => {
                        let d = chi.order();
                        let ksq = (*k % d) * (*k % d) % d;
                        CharValue::Root((i + *twist_index * ksq) % d)
                    }
                }
            }
        }
    }
}

/// sum_{n<=N} chi(psi_{l1 n}(P)) conj(chi(psi_{l2 n}(P))), for distinct
/// strides.
pub fn correlation_sum(ctx: &SumContext, l1: u64, l2: u64, n: u64) -> SumResult {
    assert!(l1 != l2, "the diagonal degenerates to N minus the zero count");
    assert!(l1.max(l2).saturating_mul(n) <= INDEX_CAP);
    let d = ctx.chi.order();
    let mut s1 = StridedChi::new(ctx, l1);
    let mut s2 = StridedChi::new(ctx, l2);
    let mut buckets = BucketAccumulator::new(d);
    for _ in 1..=n {
        match (s1.next_value(), s2.next_value()) {
            (CharValue::Root(a), CharValue::Root(b)) => {
                buckets.add_root((a + d - b) % d, 1);
            }
            _ => buckets.add_zero(),
        }
    }
    SumResult::new(buckets, n, ctx.r, format!("corr:l1={l1},l2={l2}"))
}

/// sum_{n<=N, n≡k (mod q)} chi(psi_n(P)), by striding one full stream.
pub fn progression_sum(ctx: &SumContext, q: u64, k: u64, n: u64) -> SumResult {
    assert!(q >= 1 && k >= 1 && k <= q);
    let d = ctx.chi.order();
    let mut buckets = BucketAccumulator::new(d);
    let mut stream = ctx.base.stream(1);
    for j in 1..=n {
        let psi = stream.next().expect("stream is infinite");
        if j % q != k % q {
            continue;
        }
        match ctx.chi.eval(psi) {
            CharValue::Root(i) => buckets.add_root(i, 1),
            CharValue::Zero => buckets.add_zero(),
        }
    }
    SumResult::new(buckets, n, ctx.r, format!("prog:q={q},k={k}"))
}

fn scaled_sum_impl(ctx: &SumContext, mut strided: StridedChi, m: u64, n: u64) -> SumResult {
    let d = ctx.chi.order();
    let mut buckets = BucketAccumulator::new(d);
    for _ in 1..=n {
        match strided.next_value() {
            CharValue::Root(i) => buckets.add_root(i, 1),
            CharValue::Zero => buckets.add_zero(),
        }
    }
    SumResult::new(buckets, n, ctx.r, format!("scaled:m={m}"))
}

/// sum_{n<=N} chi(psi_{m n}(P)), through the index-scaling identity when the
/// point mP admits it.
pub fn scaled_sum(ctx: &SumContext, m: u64, n: u64) -> SumResult {
    assert!(m >= 1 && m.saturating_mul(n) <= INDEX_CAP);
    scaled_sum_impl(ctx, StridedChi::new(ctx, m), m, n)
}

/// Reference evaluation of [`scaled_sum`] that always walks every index;
/// kept as the independent side of the dual-route check.
pub fn scaled_sum_direct(ctx: &SumContext, m: u64, n: u64) -> SumResult {
    assert!(m >= 1 && m.saturating_mul(n) <= INDEX_CAP);
    scaled_sum_impl(ctx, StridedChi::new_direct(ctx, m), m, n)
}

/// At the identity, psi_m has a zero of order m^2 - 1 (a pole for inverse
/// factors); a spec whose orders balance has the finite value
/// prod m_i^{e_i}, since the leading coefficient of psi_m there is m.
/// Anything else, including a leading coefficient divisible by p, is treated
/// as a zero-bucket term.
fn eval_spec_at_identity(ctx: &SumContext, spec: &[(u64, i64)]) -> CharValue {
    let total: i128 = spec
        .iter()
        .map(|&(m, e)| e as i128 * (m as i128 * m as i128 - 1))
        .sum();
    if total != 0 {
        return CharValue::Zero;
    }
    let f = ctx.curve.field();
    let mut num = 1u64;
    let mut den = 1u64;
    for &(m, e) in spec {
        let mm = f.reduce(m);
        if mm == 0 {
            return CharValue::Zero;
        }
        if e > 0 {
            num = f.mul(num, f.pow(mm, e as u64));
        } else if e < 0 {
            den = f.mul(den, f.pow(mm, (-e) as u64));
        }
    }
    ctx.chi
        .eval(f.mul(num, f.inv(den).expect("factors reduced nonzero")))
}

/// Complete twisted sum over a full period:
/// sum_{n=1..R} chi(Psi(nP)) e_R(a n), where Psi is the psi-product given by
/// `spec`. Terms where the product has a vanishing denominator, or where it
/// cannot be evaluated exactly (an unbalanced spec at the identity, a
/// non-constant spec at a 2-torsion point), are counted in the zero bucket.
pub fn complete_twisted_sum(ctx: &SumContext, spec: &[(u64, i64)], a_twist: u64) -> SumResult {
    assert!(spec.iter().all(|&(m, _)| m >= 1));
    // psi_1 is the constant 1; dropping those factors makes constant specs
    // evaluable at every point of the curve
    let reduced: Vec<(u64, i64)> = spec.iter().copied().filter(|&(m, _)| m > 1).collect();
    let d = ctx.chi.order();
    let r = ctx.r;
    let order = lcm(d, r);
    let mut buckets = BucketAccumulator::new(order);
    let mut q = Point::Infinity;
    for n in 1..=r {
        q = ctx.curve.add(q, ctx.point);
        let val = if reduced.is_empty() {
            ctx.chi.eval(1)
        } else {
            match q {
                Point::Infinity => eval_spec_at_identity(ctx, &reduced),
                Point::Affine { y: 0, .. } => CharValue::Zero,
                _ => match psi_product_at(&ctx.curve, q, &reduced) {
                    Ok(v) => ctx.chi.eval(v),
                    Err(_) => CharValue::Zero,
                },
            }
        };
        match val {
            CharValue::Zero => buckets.add_zero(),
            CharValue::Root(i) => {
                let idx = (i * (order / d) + a_twist % r * n % r * (order / r)) % order;
                buckets.add_root(idx, 1);
            }
        }
    }
    let spec_str: Vec<String> = spec.iter().map(|(m, e)| format!("({m},{e})")).collect();
    SumResult::new(
        buckets,
        r,
        r,
        format!("complete:spec=[{}],a={a_twist}", spec_str.join(",")),
    )
}

/// Degree proxy for a psi-product spec: sum |e_i| (m_i^2 - 1).
pub fn spec_degree(spec: &[(u64, i64)]) -> u64 {
    spec.iter()
        .map(|&(m, e)| e.unsigned_abs() * (m * m - 1))
        .sum()
}

/// The partition of [1, N] by the number r of prime factors (with
/// multiplicity) in the interval (x, y], and the single/repeated split of
/// each class.
#[derive(Debug, Clone)]
pub struct PartitionAudit {
    pub direct: SumResult,
    /// U_r indexed by r; classes above the binary-log cutoff are empty.
    pub per_r: Vec<SumResult>,
    /// U_{r,1}: all interval factors appear with multiplicity one.
    pub per_r_single: Vec<SumResult>,
    /// U_{r,2}: some interval factor repeats.
    pub per_r_multi: Vec<SumResult>,
    pub x: f64,
    pub y: f64,
}

impl PartitionAudit {
    /// sum_r U_r = S and U_r = U_{r,1} + U_{r,2}, at bucket level.
    pub fn identity_holds(&self) -> bool {
        let mut total = BucketAccumulator::new(self.direct.buckets.order());
        for u in &self.per_r {
            total.merge(&u.buckets);
        }
        if total != self.direct.buckets {
            return false;
        }
        self.per_r
            .iter()
            .zip(&self.per_r_single)
            .zip(&self.per_r_multi)
            .all(|((u, s), m)| {
                let mut sum = s.buckets.clone();
                sum.merge(&m.buckets);
                sum == u.buckets
            })
    }
}

pub fn partition_audit(
    ctx: &SumContext,
    twist: &Twist,
    tables: &SieveTables,
    n: u64,
    x: f64,
    y: f64,
    opts: SumOpts,
) -> Result<PartitionAudit, SumsError> {
    assert!(2.0 <= x && x < y);
    let direct = sum_s(ctx, twist, tables, n, opts)?;
    let order = direct.buckets.order();
    // 2^r > N forces emptiness (interval primes are >= 2)
    let r_max = 64 - n.leading_zeros() as usize;
    let d = ctx.chi.order();
    let t_ord = twist.char_order();
    let mk = |tag: &str, r: usize| {
        SumResult::new(
            BucketAccumulator::new(order),
            n,
            ctx.r,
            format!("{}:r={r},x={x},y={y},f={twist}", tag),
        )
    };
    let mut per_r: Vec<SumResult> = (0..=r_max).map(|r| mk("U", r)).collect();
    let mut per_r_single: Vec<SumResult> = (0..=r_max).map(|r| mk("U1", r)).collect();
    let mut per_r_multi: Vec<SumResult> = (0..=r_max).map(|r| mk("U2", r)).collect();
    let mut stream = ctx.base.stream(1);
    for k in 1..=n {
        let psi = stream.next().expect("stream is infinite");
        let r = prime_factors_in_interval(k, x, y, tables) as usize;
        let single = tables
            .factorize(k)
            .iter()
            .all(|&(p, e)| e == 1 || !(p as f64 > x && p as f64 <= y));
        let cv = ctx.chi.eval(psi);
        let tv = twist.eval(k, tables);
        add_term(&mut per_r[r].buckets, d, cv, t_ord, tv);
        let split = if r == 0 || single {
            &mut per_r_single
        } else {
            &mut per_r_multi
        };
        add_term(&mut split[r].buckets, d, cv, t_ord, tv);
    }
    Ok(PartitionAudit {
        direct,
        per_r,
        per_r_single,
        per_r_multi,
        x,
        y,
    })
}

/// Both routes of the squarefree-twist decomposition
/// S_{mu^2}(N) = sum_{d <= sqrt N} mu(d) sum_{k <= N/d^2} chi(psi_{d^2 k}),
/// plus the split of the right side by whether gcd(d, R) stays below
/// p^{epsilon/4}.
#[derive(Debug, Clone)]
pub struct MoebiusAudit {
    pub lhs: SumResult,
    pub rhs: BucketAccumulator,
    pub t1: BucketAccumulator,
    pub t2: BucketAccumulator,
    pub gcd_threshold: f64,
    pub n: u64,
}

impl MoebiusAudit {
    /// Weight vectors must agree exactly (zero buckets count different term
    /// sets on the two sides: f(n) = 0 terms on the left, per-(d,k) vanishing
    /// characters on the right).
    pub fn identity_holds(&self) -> bool {
        if self.lhs.buckets.weights() != self.rhs.weights() {
            return false;
        }
        let mut welded = self.t1.clone();
        welded.merge(&self.t2);
        welded == self.rhs
    }
}

pub fn moebius_sq_audit(
    ctx: &SumContext,
    tables: &SieveTables,
    n: u64,
    opts: SumOpts,
) -> Result<MoebiusAudit, SumsError> {
    let lhs = sum_s(ctx, &Twist::MoebiusSq, tables, n, opts)?;
    let d = ctx.chi.order();
    let mut rhs = BucketAccumulator::new(d);
    let mut t1 = BucketAccumulator::new(d);
    let mut t2 = BucketAccumulator::new(d);
    let gcd_threshold = (ctx.p() as f64).powf(ctx.epsilon / 4.0);
    let mut delta = 1u64;
    while delta * delta <= n {
        let mu = tables.mu(delta) as i64;
        if mu != 0 {
            let part = scaled_sum(ctx, delta * delta, n / (delta * delta));
            rhs.merge_weighted(&part.buckets, mu);
            if (gcd(delta, ctx.r) as f64) <= gcd_threshold {
                t1.merge_weighted(&part.buckets, mu);
            } else {
                t2.merge_weighted(&part.buckets, mu);
            }
        }
        delta += 1;
    }
    Ok(MoebiusAudit {
        lhs,
        rhs,
        t1,
        t2,
        gcd_threshold,
        n,
    })
}

/// The smooth-indicator sum evaluated directly and through the
/// cumulative-product decomposition n = l m (l just crossing L0, m built
/// from the remaining larger factors).
#[derive(Debug, Clone)]
pub struct SmoothSumReport {
    pub direct: SumResult,
    /// Smooth n <= L0, summed as-is.
    pub small_part: BucketAccumulator,
    /// Smooth n > L0, enumerated as (l, m) pairs.
    pub large_part: BucketAccumulator,
    pub params: SmoothParams,
    pub l0: u64,
}

impl SmoothSumReport {
    pub fn recomposed(&self) -> BucketAccumulator {
        let mut acc = self.small_part.clone();
        acc.merge(&self.large_part);
        acc
    }

    /// Weights agree exactly; the direct zero bucket additionally counts the
    /// N - Psi(N,y) non-smooth indices, which the decomposition never visits.
    pub fn identity_holds(&self) -> bool {
        let rec = self.recomposed();
        self.direct.buckets.weights() == rec.weights()
            && self.direct.zero_count()
                == rec.zero_count() + (self.direct.n - self.params.psi_count)
    }
}

pub fn smooth_sum(
    ctx: &SumContext,
    tables: &SieveTables,
    y: u64,
    n: u64,
    l0: u64,
    opts: SumOpts,
) -> Result<SmoothSumReport, SumsError> {
    assert!(2 <= y && y <= n && l0 >= 1);
    let direct = sum_s(ctx, &Twist::Smooth(y), tables, n, opts)?;
    let d = ctx.chi.order();
    let mut small_part = BucketAccumulator::new(d);
    let mut stream = ctx.base.stream(1);
    for k in 1..=l0.min(n) {
        let psi = stream.next().expect("stream is infinite");
        if !tables.is_smooth(k, y) {
            continue;
        }
        match ctx.chi.eval(psi) {
            CharValue::Root(i) => small_part.add_root(i, 1),
            CharValue::Zero => small_part.add_zero(),
        }
    }
    // every smooth n > L0 splits uniquely as n = l m with
    // L0 < l <= P(l) L0 and p(m) >= P(l); enumerate the pairs
    let mut large_part = BucketAccumulator::new(d);
    let l_hi = n.min(l0.saturating_mul(y));
    for l in (l0 + 1)..=l_hi {
        if !tables.is_smooth(l, y) {
            continue;
        }
        let pl = tables.lpf(l);
        if l > pl * l0 {
            continue;
        }
        let mut m = 1u64;
        while l * m <= n {
            if tables.is_smooth(m, y) && (m == 1 || tables.spf(m) >= pl) {
                match ctx.chi.eval(ctx.base.psi(l * m)) {
                    CharValue::Root(i) => large_part.add_root(i, 1),
                    CharValue::Zero => large_part.add_zero(),
                }
            }
            m += 1;
        }
    }
    let params = psi_count_and_alpha(n, y, tables);
    Ok(SmoothSumReport {
        direct,
        small_part,
        large_part,
        params,
        l0,
    })
}

/// The four bound families audited by the scan layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// tau_nu-bounded twists: eps^{-nu} N (log log R)^nu / log R.
    TauBounded,
    /// Dirichlet twists: p^{1/12} R^{5/6} (log R)(log log R)^{1/3}.
    DirichletTwist,
    /// Squarefree twist: root-N type saving plus a divisor-count tail.
    SquarefreeTwist,
    /// Smooth-indicator twist: saving driven by the counting exponent alpha.
    SmoothTwist,
}

impl Theorem {
    pub fn label(&self) -> &'static str {
        match self {
            Theorem::TauBounded => "1.1",
            Theorem::DirichletTwist => "1.2",
            Theorem::SquarefreeTwist => "1.3",
            Theorem::SmoothTwist => "1.4",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "1.1" => Some(Theorem::TauBounded),
            "1.2" => Some(Theorem::DirichletTwist),
            "1.3" => Some(Theorem::SquarefreeTwist),
            "1.4" => Some(Theorem::SmoothTwist),
            _ => None,
        }
    }

    pub fn all() -> [Theorem; 4] {
        [
            Theorem::TauBounded,
            Theorem::DirichletTwist,
            Theorem::SquarefreeTwist,
            Theorem::SmoothTwist,
        ]
    }
}

/// Inputs to a bound evaluation.
#[derive(Debug, Clone, Copy)]
pub struct BoundParams {
    pub p: u64,
    pub r: u64,
    pub n: u64,
    pub epsilon: f64,
    /// tau order of the twist (1 for 1-bounded twists).
    pub nu: u32,
    /// Smoothness data, required by the smooth family.
    pub smooth: Option<SmoothParams>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisFlag {
    pub name: &'static str,
    pub satisfied: bool,
}

/// An evaluated right-hand side with its hypothesis flags. All implied
/// constants are set to 1 and all o(1) terms to 0, so ratios are reported,
/// not asserted.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub rhs: f64,
    pub flags: Vec<HypothesisFlag>,
    pub gamma: Option<f64>,
}

impl BoundReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.flags.iter().all(|f| f.satisfied)
    }
}

pub fn bound_rhs(theorem: Theorem, params: &BoundParams) -> BoundReport {
    let p = params.p as f64;
    let r = params.r as f64;
    let n = params.n as f64;
    let eps = params.epsilon;
    let log_r = r.ln();
    let loglog_r = log_r.ln();
    let log_p = p.ln();
    let strong = HypothesisFlag {
        name: "r_ge_p_half_plus_eps",
        satisfied: r >= p.powf(0.5 + eps),
    };
    let weak = HypothesisFlag {
        name: "r_ge_weak_threshold",
        satisfied: r >= p.sqrt() * (2.1 * log_p / log_p.ln()).exp(),
    };
    match theorem {
        Theorem::TauBounded => {
            let nu = params.nu as f64;
            let rhs = eps.powf(-nu) * n * loglog_r.powf(nu) / log_r;
            let range = HypothesisFlag {
                name: "n_in_theorem_range",
                satisfied: p.powf(1.0 / 12.0) * r.powf(5.0 / 6.0 + eps) <= n && n <= r,
            };
            BoundReport {
                theorem,
                rhs,
                flags: vec![strong, range],
                gamma: None,
            }
        }
        Theorem::DirichletTwist => {
            let rhs = p.powf(1.0 / 12.0) * r.powf(5.0 / 6.0) * log_r * loglog_r.powf(1.0 / 3.0);
            BoundReport {
                theorem,
                rhs,
                flags: vec![weak],
                gamma: None,
            }
        }
        Theorem::SquarefreeTwist => {
            let main = n.sqrt()
                * p.powf(1.0 / 24.0)
                * r.powf(5.0 / 12.0)
                * log_r.powf(1.5)
                * loglog_r.powf(1.0 / 6.0);
            let tail = n * p.powf(-eps / 4.0) * (2f64.ln() * log_r / loglog_r).exp();
            let range = HypothesisFlag {
                name: "n_le_r",
                satisfied: n <= r,
            };
            BoundReport {
                theorem,
                rhs: main + tail,
                flags: vec![strong, range],
                gamma: None,
            }
        }
        Theorem::SmoothTwist => {
            let sp = params
                .smooth
                .expect("smooth bound needs Psi(N,y) and alpha");
            let alpha = sp.alpha;
            let gamma = (alpha * alpha + alpha - 1.0) / (2.0 * (alpha + 2.0));
            let rhs = (sp.y as f64).sqrt()
                * p.powf(1.0 / (24.0 * (alpha + 2.0)))
                * r.powf(5.0 / (12.0 * (alpha + 2.0)))
                * n.powf(-gamma)
                * sp.psi_count as f64;
            let y_min = HypothesisFlag {
                name: "y_ge_log_power",
                satisfied: sp.y as f64 >= n.ln().powf((3.0 + 5f64.sqrt()) / 2.0),
            };
            let gamma_pos = HypothesisFlag {
                name: "gamma_positive",
                satisfied: gamma > 0.0,
            };
            BoundReport {
                theorem,
                rhs,
                flags: vec![weak, y_min, gamma_pos],
                gamma: Some(gamma),
            }
        }
    }
}
