use credit_audit_core::metrics::PredictionRow;
use credit_audit_core::profiles::{
    assign_profiles, default_by_cell, disagreement_matrix, rank_to_profile, score_to_profile, RiskProfile,
    RiskProfileTable,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use RiskProfile::*;

#[test]
fn score_bands_follow_the_industry_table() {
    let cases = [
        (300, DeepSubprime),
        (499, DeepSubprime),
        (500, Subprime),
        (600, Subprime),
        (601, NearPrime),
        (660, NearPrime),
        (661, Prime),
        (780, Prime),
        (781, SuperPrime),
        (850, SuperPrime),
    ];
    for (score, expected) in cases {
        assert_eq!(score_to_profile(score).unwrap(), expected, "score {score}");
    }
    assert!(score_to_profile(299).is_err());
    assert!(score_to_profile(851).is_err());
}

#[test]
fn printed_percentile_row_boundary() {
    let t = RiskProfileTable::published_cutoffs();
    assert_eq!(rank_to_profile(27.10, &t).unwrap(), Subprime);
    assert_eq!(rank_to_profile(27.11, &t).unwrap(), NearPrime);
    assert!(rank_to_profile(0.0, &t).is_err());
    assert_eq!(rank_to_profile(100.0, &t).unwrap(), SuperPrime);
}

fn quarter_rows(n: usize, seed: u64) -> Vec<PredictionRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| PredictionRow {
            consumer_id: format!("C{i}"),
            quarter: 8,
            p_hat: rng.random::<f64>(),
            label: u8::from(rng.random::<f64>() < 0.2),
            credit_score: Some(rng.random_range(300..=850)),
        })
        .collect()
}

#[test]
fn model_profile_shares_match_population_shares() {
    let table = RiskProfileTable::default();
    let rows = assign_profiles(&quarter_rows(100_000, 1), &table).unwrap();
    let mut counts = [0usize; 5];
    for r in &rows {
        counts[r.model_profile.index()] += 1;
    }
    let expected = [6.0, 20.1, 14.0, 36.3, 23.6];
    for (c, e) in counts.iter().zip(expected) {
        let share = 100.0 * *c as f64 / rows.len() as f64;
        assert!((share - e).abs() <= 0.5, "{share} vs {e}");
    }
}

#[test]
fn riskiest_predictions_land_in_deep_subprime() {
    let mut rows = quarter_rows(1000, 2);
    rows[0].p_hat = 2.0;
    rows[1].p_hat = -1.0;
    let profiled = assign_profiles(&rows, &RiskProfileTable::default()).unwrap();
    assert_eq!(profiled[0].model_profile, DeepSubprime);
    assert_eq!(profiled[1].model_profile, SuperPrime);
}

#[test]
fn perfect_agreement_has_no_disagreement() {
    let pairs = RiskProfile::ALL.iter().flat_map(|&p| std::iter::repeat_n((p, p), 7));
    let dm = disagreement_matrix(pairs);
    assert_eq!(dm.disagreement, [0.0; 5]);
    for r in 0..5 {
        assert_eq!(dm.m[r][r], 100.0);
    }
}

#[test]
fn disagreement_counts_and_rows() {
    let pairs = [
        (DeepSubprime, DeepSubprime),
        (DeepSubprime, Subprime),
        (DeepSubprime, Subprime),
        (DeepSubprime, NearPrime),
        (Prime, Prime),
    ];
    let dm = disagreement_matrix(pairs);
    assert_eq!(dm.counts[0], [1, 2, 1, 0, 0]);
    assert_eq!(dm.m[0], [25.0, 50.0, 25.0, 0.0, 0.0]);
    assert_eq!(dm.disagreement[0], 75.0);
    assert_eq!(dm.disagreement[3], 0.0);
    assert_eq!(dm.m[1], [0.0; 5]);
}

#[test]
fn cell_rates_average_labels_and_predictions() {
    let rows = assign_profiles(&quarter_rows(5000, 3), &RiskProfileTable::default()).unwrap();
    let cells = default_by_cell(&rows);
    assert_eq!(cells.iter().map(|c| c.n).sum::<usize>(), rows.len());
    for c in &cells {
        let members: Vec<_> = rows
            .iter()
            .filter(|r| r.score_profile == c.score_profile && r.model_profile == c.model_profile)
            .collect();
        let y = members.iter().map(|r| f64::from(r.label)).sum::<f64>() / members.len() as f64;
        assert!((y - c.realized_rate).abs() < 1e-12);
        assert_eq!(c.sparse, c.n < 30);
    }
}

fn profile() -> impl Strategy<Value = RiskProfile> {
    (0usize..5).prop_map(|i| RiskProfile::ALL[i])
}

proptest! {
    #[test]
    fn rows_sum_to_one_hundred(pairs in prop::collection::vec((profile(), profile()), 1..400)) {
        let dm = disagreement_matrix(pairs.iter().copied());
        for r in 0..5 {
            let total: u64 = dm.counts[r].iter().sum();
            if total > 0 {
                prop_assert!((dm.m[r].iter().sum::<f64>() - 100.0).abs() <= 0.05);
                prop_assert!((dm.disagreement[r] - (100.0 - dm.m[r][r])).abs() <= 0.05);
            }
        }
    }

    #[test]
    fn shuffling_rows_leaves_the_matrix_unchanged(
        pairs in prop::collection::vec((profile(), profile()), 1..200),
        seed in 0u64..100,
    ) {
        let mut shuffled = pairs.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
        prop_assert_eq!(disagreement_matrix(pairs), disagreement_matrix(shuffled));
    }

    #[test]
    fn score_profiles_are_monotone(a in 300u16..=850, b in 300u16..=850) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(score_to_profile(lo).unwrap() <= score_to_profile(hi).unwrap());
    }
}
