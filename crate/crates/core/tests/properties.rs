mod common;

use passive_ph::model::Mode;
use proptest::prelude::*;

fn mode_strategy() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Standard), Just(Mode::Descriptor)]
}

macro_rules! holds {
    ($check:expr) => {
        let r = $check;
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
    };
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn psd_projection_is_idempotent_and_feasible(seed in any::<u64>(), n in 1usize..=8, lb in 0.0f64..1.0) {
        holds!(common::psd_projection_idempotent(seed, n, lb));
    }

    #[test]
    fn psd_projection_satisfies_optimality_conditions(seed in any::<u64>(), n in 1usize..=8) {
        holds!(common::psd_projection_optimal(seed, n));
    }

    #[test]
    fn skew_projection_is_orthogonal(seed in any::<u64>(), n in 1usize..=8) {
        holds!(common::skew_projection_orthogonal(seed, n));
    }

    #[test]
    fn sym_skew_decomposition(seed in any::<u64>(), n in 1usize..=8) {
        holds!(common::sym_skew_decomposition(seed, n));
    }

    #[test]
    fn ph_projection_is_feasible(seed in any::<u64>(), n in 1usize..=6, m in 1usize..=3, mode in mode_strategy()) {
        holds!(common::ph_projection_feasible(seed, n, m, mode));
    }

    #[test]
    fn optimal_f_is_stationary(seed in any::<u64>(), n in 1usize..=8, m in 1usize..=4) {
        holds!(common::optimal_f_stationary(seed, n, m));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn gradient_matches_central_differences_standard(seed in any::<u64>(), n in 1usize..=8, m in 1usize..=4) {
        let rel = common::gradient_fd_error(n, m, Mode::Standard, seed);
        prop_assert!(rel <= 1e-5, "relative error {rel}");
    }

    #[test]
    fn gradient_matches_central_differences_descriptor(seed in any::<u64>(), n in 1usize..=8, m in 1usize..=4) {
        let rel = common::gradient_fd_error(n, m, Mode::Descriptor, seed);
        prop_assert!(rel <= 1e-5, "relative error {rel}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn fgm_never_increases_the_objective(seed in any::<u64>(), n in 2usize..=6, m in 1usize..=3, mode in mode_strategy()) {
        holds!(common::fgm_monotone(seed, n, m, mode));
    }

    #[test]
    fn ph_forms_satisfy_the_kyp_lmis(seed in any::<u64>(), n in 1usize..=8, m in 1usize..=4, mode in mode_strategy()) {
        holds!(common::ph_form_satisfies_kyp(seed, n, m, mode));
    }

    #[test]
    fn strict_ph_forms_are_admissible_and_strictly_passive(seed in any::<u64>(), n in 1usize..=6, m in 1usize..=3, mode in mode_strategy()) {
        holds!(common::strict_ph_certified(seed, n, m, mode));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn feasible_lmis_reconstruct_the_system(seed in any::<u64>(), n in 1usize..=5, m in 1usize..=3) {
        holds!(common::lmi_round_trip(seed, n, m));
    }
}
