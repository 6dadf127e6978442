//! Deterministic curve/point ensembles: the RNG seed fully determines every
//! curve, point, and derived context.

use crate::config::{parse_fixture, EnsembleConfig};
use anyhow::{bail, Context, Result};
use divchar::curve::{Curve, GroupInfo, Point, PointOrderInfo};
use divchar::fp::{self, PrimeField};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;

/// One generated (curve, point) pair with its cached order data.
#[derive(Debug, Clone)]
pub struct Member {
    pub curve: Curve,
    pub point: Point,
    pub group: GroupInfo,
    pub order_info: PointOrderInfo,
    /// Explicit fixtures are flagged so reports can tell them apart.
    pub fixture: bool,
}

impl Member {
    pub fn p(&self) -> u64 {
        self.curve.field().modulus()
    }
}

/// Builds the ensemble: explicit fixtures first (their stated point, order
/// computed), then `curve_count` random curves with points found by rejection
/// sampling.
pub fn generate(cfg: &EnsembleConfig) -> Result<Vec<Member>> {
    let mut out = Vec::new();
    for fx in &cfg.curves {
        let (p, a, b, px, py) = parse_fixture(fx)?;
        let field = PrimeField::new(p).with_context(|| format!("fixture {fx:?}"))?;
        let curve = Curve::new(field, a, b).with_context(|| format!("fixture {fx:?}"))?;
        let point = Point::Affine {
            x: field.reduce(px),
            y: field.reduce(py),
        };
        if !curve.contains(point) {
            bail!("fixture {fx:?}: point is not on the curve");
        }
        let group = curve.group_info();
        let order_info = curve.point_order(point, &group);
        out.push(Member {
            curve,
            point,
            group,
            order_info,
            fixture: true,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let mut curves_left = cfg.curve_count;
    let mut rejections = 0u32;
    while curves_left > 0 {
        if rejections > 200 + 50 * cfg.curve_count {
            bail!(
                "could not assemble the ensemble: too many rejected curves \
                 (range [{}, {}], epsilon {})",
                cfg.prime_min,
                cfg.prime_max,
                cfg.epsilon
            );
        }
        let p = sample_prime(&mut rng, cfg.prime_min, cfg.prime_max);
        let field = PrimeField::new(p).expect("sampled prime in range");
        let a = rng.gen_range(0..p);
        let b = rng.gen_range(0..p);
        let curve = match Curve::new(field, a, b) {
            Ok(c) => c,
            Err(_) => {
                rejections += 1;
                continue;
            }
        };
        let group = curve.group_info();
        let threshold = if cfg.require_large_order {
            (p as f64).powf(0.5 + cfg.epsilon)
        } else {
            3.0
        };
        match curve.find_point_of_order_at_least(threshold, &group, cfg.point_attempts, &mut rng)
        {
            Some((point, order_info)) => {
                out.push(Member {
                    curve,
                    point,
                    group,
                    order_info,
                    fixture: false,
                });
                curves_left -= 1;
            }
            None => rejections += 1,
        }
    }
    Ok(out)
}

fn sample_prime<R: Rng>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    loop {
        let candidate = rng.gen_range(lo..=hi);
        if fp::is_prime(candidate) && candidate > 3 {
            return candidate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EnsembleConfig;

    fn small_cfg(seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            seed,
            prime_min: 1_000,
            prime_max: 5_000,
            curve_count: 4,
            epsilon: 0.1,
            require_large_order: true,
            point_attempts: 200,
            curves: vec!["5,1,1,0,1".into()],
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate(&small_cfg(42)).unwrap();
        let b = generate(&small_cfg(42)).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.curve, y.curve);
            assert_eq!(x.point, y.point);
            assert_eq!(x.order_info, y.order_info);
        }
        let c = generate(&small_cfg(43)).unwrap();
        assert!(
            a.iter()
                .zip(&c)
                .any(|(x, y)| x.curve != y.curve || x.point != y.point),
            "different seeds should give different ensembles"
        );
    }

    #[test]
    fn fixture_comes_first_and_orders_check_out() {
        let members = generate(&small_cfg(1)).unwrap();
        let fx = &members[0];
        assert!(fx.fixture);
        assert_eq!(fx.p(), 5);
        assert_eq!(fx.group.order, 9);
        assert_eq!(fx.order_info.point_order, 9);
        for m in &members[1..] {
            assert!(!m.fixture);
            let p = m.p() as f64;
            assert!(m.order_info.point_order as f64 >= p.powf(0.6));
            assert!(m.curve.contains(m.point));
        }
    }

    #[test]
    fn bad_fixture_rejected() {
        let mut cfg = small_cfg(1);
        cfg.curves = vec!["5,1,1,0,2".into()]; // (0,2) not on y^2 = x^3+x+1
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn unrestricted_search_accepts_small_orders() {
        let mut cfg = small_cfg(2);
        cfg.require_large_order = false;
        cfg.curves.clear();
        let members = generate(&cfg).unwrap();
        assert_eq!(members.len(), 4);
        for m in &members {
            assert!(m.order_info.point_order >= 3);
        }
    }
}
