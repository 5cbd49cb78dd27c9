mod common;

#[test]
fn ndcg_hand_values() {
    common::ndcg_hand_values().unwrap();
}

#[test]
fn retrieval_matches_brute_force() {
    common::retrieval_matches_brute_force().unwrap();
}

#[test]
fn ec_tc_match_double_loops() {
    common::ec_tc_match_double_loops().unwrap();
}

#[test]
fn weights_sum_to_one() {
    common::weights_sum_to_one().unwrap();
}

#[test]
fn features_match_frozen_oracle() {
    common::features_match_frozen_oracle().unwrap();
}

#[test]
fn ttest_matches_scipy() {
    common::ttest_matches_scipy().unwrap();
}

#[test]
fn forest_sanity() {
    common::forest_sanity().unwrap();
}

#[test]
fn merge_is_correct() {
    common::merge_is_correct().unwrap();
}

#[test]
fn kappa_fixtures() {
    common::kappa_fixtures().unwrap();
}
