mod common;

use proptest::prelude::*;

use common::props;

macro_rules! property {
    ($name:ident, $check:path) => {
        proptest! {
            #![proptest_config(ProptestConfig::with_cases(500))]
            #[test]
            fn $name(seed in any::<u64>()) {
                let r = common::big_stack(move || $check(seed));
                prop_assert!(r.is_ok(), "{}", r.unwrap_err());
            }
        }
    };
}

property!(subterm_concat, props::subterm_concat);
property!(replace_in_context, props::replace_in_context);
property!(replace_disjoint, props::replace_disjoint);
property!(fill_any_order, props::fill_any_order);
property!(ultrametric, props::ultrametric);
property!(replace_distance, props::replace_distance);
property!(subst_homomorphism, props::subst_homomorphism);
property!(convergent_has_target, props::convergent_has_target);
property!(mind_bounds_distance, props::mind_bounds_distance);
property!(mind_in_context, props::mind_in_context);
property!(redseq_mind_distance, props::redseq_mind_distance);
property!(redseq_disjoint, props::redseq_disjoint);
property!(derivation_endpoints, props::derivation_endpoints);
property!(derivation_wellformed, props::derivation_wellformed);
property!(derivation_respects, props::derivation_respects);
