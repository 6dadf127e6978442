//! Public-API walkthrough: build a context the way a consumer would and run
//! every named check against it.

use divchar::characters::CharacterModP;
use divchar::checks;
use divchar::curve::Curve;
use divchar::fp::PrimeField;
use divchar::multiplicative::{SieveTables, Twist};
use divchar::sums::SumContext;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn build_context(p: u64, d: u64, seed: u64) -> SumContext {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let field = PrimeField::new(p).unwrap();
    loop {
        let a = rng.gen_range(0..p);
        let b = rng.gen_range(0..p);
        let Ok(curve) = Curve::new(field, a, b) else {
            continue;
        };
        let group = curve.group_info();
        let threshold = (p as f64).powf(0.6);
        let Some((point, _)) = curve.find_point_of_order_at_least(threshold, &group, 128, &mut rng)
        else {
            continue;
        };
        let chi = CharacterModP::new(field, d, 1).unwrap();
        return SumContext::new(&curve, point, chi, 0.1, &group).unwrap();
    }
}

#[test]
fn every_named_check_passes_end_to_end() {
    let tables = SieveTables::build(30_000).unwrap();
    for (p, d, seed) in [(40_009u64, 2u64, 1u64), (10_009, 3, 2), (10_009, 6, 3)] {
        assert_eq!((p - 1) % d, 0);
        let ctx = build_context(p, d, seed);
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xabcd);
        let ord = ctx.order_info().point_order;
        let n = ctx.r().min(10_000);
        let outcomes = vec![
            checks::eds_identity(ctx.base(), &mut rng, 2_000, 500),
            checks::engine_equivalence(ctx.base(), 10_000),
            checks::zero_locus(ctx.base(), ord, (3 * ord).min(60_000)),
            checks::mult_formula(ctx.base(), 300),
            checks::transport_identity(&ctx, &mut rng, 500),
            checks::periodicity(&ctx, &mut rng, 128),
            checks::partition_audit_check(
                &ctx,
                &Twist::MoebiusSq,
                &tables,
                n,
                &[(2.0, 16.0), (16.0, 512.0)],
            ),
            checks::moebius_audit_check(&ctx, &tables, n),
            checks::smooth_agreement_check(&ctx, &tables, 50, n, 64),
            checks::progression_partition_check(&ctx, &tables, d, n),
            checks::complete_sum_trivial(&ctx),
            checks::char_orthogonality(*ctx.curve().field(), &[3, 4, 5, 8, 12]),
        ];
        for o in &outcomes {
            assert!(o.passed, "p={p} d={d} {}: {}", o.name, o.detail);
        }
        let (weil, worst) = checks::weil_audit(&ctx, &mut rng, 4);
        if ctx.r() <= 25_000 {
            assert!(weil.passed, "{}", weil.detail);
            assert!(worst <= 1.0);
        }
    }
}
