use credit_audit_core::equity::{
    access_regression, composition_shares, counterfactual_auc, fit_fe_ols, group_auc, ranking_difference,
    vulnerability_frame, vulnerability_specs, AccessOutcome, AccessSpec, ClusterMode, CompositionCell, CompositionDims,
    MinorityRule,
};
use credit_audit_core::metrics::{auc, weighted_auc, PredictionRow};
use credit_audit_core::panel::{generate_synthetic, GenConfig};
use credit_audit_core::profiles::{assign_profiles, RiskProfile, RiskProfileTable};
use credit_audit_core::{Error, FeatureSemantics};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cell(code: u8) -> CompositionCell {
    CompositionCell {
        delinquent: code & 1 != 0,
        thin_file: code & 2 != 0,
        mortgage: code & 4 != 0,
    }
}

#[test]
fn unit_weights_give_plain_auc_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let n = rng.random_range(10..200);
        let s: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
        y[0] = 0;
        y[1] = 1;
        assert_eq!(weighted_auc(&s, &y, Some(&vec![1.0; n])).unwrap(), auc(&s, &y).unwrap());
    }
}

#[test]
fn identical_compositions_leave_auc_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 800;
    // Both groups cycle through the eight cells in the same proportions.
    let cells: Vec<CompositionCell> = (0..n).map(|i| cell(((i / 2) % 8) as u8)).collect();
    let marginalized: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let labels: Vec<u8> = scores
        .iter()
        .map(|s| u8::from(*s + 0.3 * rng.random::<f64>() > 0.8))
        .collect();
    for dims in [
        CompositionDims::ALL,
        CompositionDims::DEFAULT_HISTORY,
        CompositionDims::MORTGAGE,
    ] {
        let cf = counterfactual_auc(&scores, &labels, &marginalized, &cells, dims).unwrap();
        assert!(cf.gap.abs() <= 1e-12);
        assert!(cf.flagged_cells.is_empty());
    }
}

#[test]
fn reweighting_moves_auc_toward_reference_mix() {
    // Within each cell the score is perfectly informative for cell 0 and
    // uninformative for cell 1; upweighting cell 0 must raise the AUC.
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    let mut cells = Vec::new();
    let mut marginalized = Vec::new();
    for i in 0..40 {
        let y = u8::from(i % 2 == 0);
        scores.push(if y == 1 { 0.9 } else { 0.1 });
        labels.push(y);
        cells.push(cell(0));
        marginalized.push(i < 10);
        scores.push(0.5);
        labels.push(y);
        cells.push(cell(1));
        marginalized.push(i >= 10);
    }
    let cf = counterfactual_auc(
        &scores,
        &labels,
        &marginalized,
        &cells,
        CompositionDims::DEFAULT_HISTORY,
    )
    .unwrap();
    assert!(cf.counterfactual > cf.actual);
}

#[test]
fn unsupported_reference_cells_are_flagged() {
    let cells = [cell(0), cell(0), cell(1), cell(1), cell(0), cell(1)];
    let marginalized = [true, true, false, false, false, false];
    let scores = [0.2, 0.8, 0.3, 0.7, 0.1, 0.9];
    let labels = [0, 1, 0, 1, 0, 1];
    let cf = counterfactual_auc(
        &scores,
        &labels,
        &marginalized,
        &cells,
        CompositionDims::DEFAULT_HISTORY,
    )
    .unwrap();
    assert_eq!(cf.flagged_cells, vec!["delinquent".to_string()]);
    assert_eq!(cf.gap, 0.0);

    let cells = [cell(0), cell(0), cell(1), cell(1)];
    let err = counterfactual_auc(
        &scores[..4],
        &labels[..4],
        &[true, true, false, false],
        &cells,
        CompositionDims::DEFAULT_HISTORY,
    );
    assert!(matches!(err, Err(Error::EmptyCellUnsupported(_))));
}

#[test]
fn ranking_difference_subtracts_by_key() {
    let model = [("a", 10.0), ("b", 55.5), ("c", 3.0), ("d", 90.0), ("e", 42.0)];
    let score = [("e", 40.0), ("d", 95.0), ("c", 3.0), ("b", 50.0), ("a", 12.5)];
    let d = ranking_difference(&model, &score).unwrap();
    let expected = [("a", -2.5), ("b", 5.5), ("c", 0.0), ("d", -5.0), ("e", 2.0)];
    assert_eq!(d, expected);
}

#[test]
fn composition_shares_are_complementary() {
    let cells: Vec<CompositionCell> = (0..30u8).map(|i| cell(i % 5)).collect();
    let groups: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
    let shares = composition_shares(&cells, &groups).unwrap();
    for s in shares.values() {
        assert!((s.current + s.delinquent - 1.0).abs() < 1e-12);
        assert!((s.thick_file + s.thin_file - 1.0).abs() < 1e-12);
        assert!((s.no_mortgage + s.mortgage - 1.0).abs() < 1e-12);
    }
    assert_eq!(shares[&true].n + shares[&false].n, 30);
}

fn true_pd_predictions(seed: u64) -> (credit_audit_core::Panel, Vec<PredictionRow>) {
    let cfg = GenConfig {
        n_consumers: 1500,
        n_quarters: 12,
        ..GenConfig::default()
    };
    let (panel, _) = generate_synthetic(&cfg, seed).unwrap();
    let labels = panel.labels();
    let rows = labels
        .iter()
        .map(|&(i, y)| {
            let r = &panel.records()[i];
            PredictionRow {
                consumer_id: r.consumer_id.clone(),
                quarter: r.quarter,
                p_hat: r.true_pd.unwrap(),
                label: y,
                credit_score: r.credit_score,
            }
        })
        .collect();
    (panel, rows)
}

#[test]
fn ranking_difference_averages_to_zero_within_a_quarter() {
    let (_, rows) = true_pd_predictions(20);
    let profiled = assign_profiles(&rows, &RiskProfileTable::default()).unwrap();
    let q = profiled[0].quarter;
    let model: Vec<_> = profiled
        .iter()
        .filter(|r| r.quarter == q)
        .map(|r| (r.consumer_id.clone(), r.model_percentile))
        .collect();
    let score: Vec<_> = profiled
        .iter()
        .filter(|r| r.quarter == q)
        .map(|r| (r.consumer_id.clone(), r.score_percentile))
        .collect();
    let d = ranking_difference(&model, &score).unwrap();
    let mean = d.iter().map(|(_, v)| v).sum::<f64>() / d.len() as f64;
    assert!(mean.abs() <= 1e-6, "{mean}");
}

#[test]
fn group_auc_covers_each_group() {
    let (_, rows) = true_pd_predictions(21);
    let groups: Vec<bool> = rows.iter().map(|r| r.quarter % 2 == 0).collect();
    let by_group = group_auc(&rows, &groups).unwrap();
    assert_eq!(by_group.len(), 2);
    for g in by_group.values() {
        assert!(g.auc_model > g.auc_score, "{g:?}");
    }
}

#[test]
fn vulnerability_regressions_run_on_a_synthetic_panel() {
    let (panel, rows) = true_pd_predictions(22);
    let profiled = assign_profiles(&rows, &RiskProfileTable::default()).unwrap();
    let frame = vulnerability_frame(&panel, &profiled, MinorityRule::Individual).unwrap();
    for mode in [ClusterMode::TwoWay, ClusterMode::Interacted] {
        for spec in vulnerability_specs(mode) {
            let fit = fit_fe_ols(&frame, &spec).unwrap();
            assert!(fit
                .coefficients
                .iter()
                .all(|c| c.estimate.is_finite() && c.std_error >= 0.0));
        }
    }
}

#[test]
fn access_effects_are_anchored_at_the_base_cell() {
    let (panel, _) = true_pd_predictions(23);
    let result = access_regression(
        &panel,
        &RiskProfileTable::default(),
        &FeatureSemantics::default(),
        &AccessSpec::new(AccessOutcome::CreditLimit),
    )
    .unwrap();
    assert_eq!(result.base_profile, RiskProfile::DeepSubprime);
    assert!((result.age_shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let base = result
        .age_adjusted
        .iter()
        .find(|e| e.profile == result.base_profile && e.quarter == Some(result.base_quarter))
        .unwrap();
    let pooled = result
        .age_adjusted
        .iter()
        .find(|e| e.profile == result.base_profile && e.quarter.is_none())
        .unwrap();
    assert_eq!(base.effect, pooled.effect);
    // Safer borrowers receive larger limits in the generator.
    let effect = |p| {
        result
            .age_adjusted
            .iter()
            .find(|e| e.profile == p && e.quarter.is_none())
            .unwrap()
            .effect
    };
    assert!(effect(RiskProfile::SuperPrime) > effect(RiskProfile::DeepSubprime));
}

proptest! {
    #[test]
    fn constant_weights_preserve_auc(
        s in prop::collection::vec(0.0f64..1.0, 4..60),
        c in 0.1f64..10.0,
    ) {
        let y: Vec<u8> = (0..s.len()).map(|i| (i % 2) as u8).collect();
        let w = vec![c; s.len()];
        prop_assert!((weighted_auc(&s, &y, Some(&w)).unwrap() - auc(&s, &y).unwrap()).abs() <= 1e-12);
    }
}
