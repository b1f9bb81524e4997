mod criteria;

use criteria::{brute_max, criterion_submodular, near, points, submodular_context, SubmodularCase};
use kmed::submodular::maximize_f;
use proptest::prelude::*;

#[test]
fn objective_corpus() {
    criterion_submodular();
}

#[test]
fn no_closing_gives_plain_assignment_cost() {
    for seed in 0..50u64 {
        let SubmodularCase { ctx, .. } = submodular_context(seed);
        if ctx.close_count() != 0 {
            continue;
        }
        let plain: i128 = ctx
            .assign()
            .iter()
            .enumerate()
            .map(|(p, a)| near(&ctx, p, &a.iter().copied().collect::<Vec<_>>()).unwrap())
            .sum();
        assert_eq!(ctx.eval_g(&[]).value, plain);
    }
}

#[test]
fn modular_objective_is_solved_exactly() {
    // clients that each see a different part: gains add up, greedy is optimal
    for seed in 0..30u64 {
        let SubmodularCase { ctx, matroid } = submodular_context(seed);
        if ctx.close_count() != 0 || matroid.parts() != 1 {
            continue;
        }
        let chosen = maximize_f(&ctx, &matroid);
        assert_eq!(ctx.eval_f(&points(&chosen)), brute_max(&ctx, &matroid));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_never_increases_when_centers_are_added(seed in 0u64..10_000, mask in any::<u32>(), extra in any::<u32>()) {
        let SubmodularCase { ctx, matroid } = submodular_context(seed);
        let ground = matroid.ground();
        let x: Vec<usize> = ground.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| e.point).collect();
        let mut y = x.clone();
        y.extend(ground.iter().enumerate().filter(|(i, _)| extra >> i & 1 == 1).map(|(_, e)| e.point));
        prop_assert!(ctx.eval_g(&y).value <= ctx.eval_g(&x).value);
        prop_assert_eq!(ctx.eval_f(&[]), 0);
    }

    #[test]
    fn greedy_output_is_independent(seed in 0u64..10_000) {
        let SubmodularCase { ctx, matroid } = submodular_context(seed);
        let chosen = maximize_f(&ctx, &matroid);
        prop_assert!(matroid.is_independent(&chosen));
        prop_assert!(ctx.eval_f(&points(&chosen)) >= 0);
    }
}
