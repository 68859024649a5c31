use credit_audit_core::metrics::{auc, gini, kendall, midranks, percentile_rank, spearman, weighted_auc, Direction};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn oracle_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 1.0;
                if s[i] > s[j] {
                    num += 1.0;
                } else if s[i] == s[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

fn oracle_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

fn oracle_tau_b(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let (mut s, mut ta, mut tb, mut pairs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1.0;
            let da = (a[i] - a[j]).signum() * f64::from(u8::from(a[i] != a[j]));
            let db = (b[i] - b[j]).signum() * f64::from(u8::from(b[i] != b[j]));
            s += da * db;
            ta += f64::from(u8::from(a[i] == a[j]));
            tb += f64::from(u8::from(b[i] == b[j]));
        }
    }
    s / ((pairs - ta) * (pairs - tb)).sqrt()
}

/// Values with frequent ties when `coarse` is set.
fn draw(rng: &mut ChaCha8Rng, n: usize, coarse: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if coarse {
                f64::from(rng.random_range(0..6u8))
            } else {
                rng.random::<f64>()
            }
        })
        .collect()
}

#[test]
fn auc_spearman_kendall_match_quadratic_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 500 {
        let n = rng.random_range(2..=200);
        let coarse = rng.random::<bool>();
        let s = draw(&mut rng, n, coarse);
        let y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
        let coarse_b = rng.random::<bool>();
        let b = draw(&mut rng, n, coarse_b);
        let degenerate_labels = y.iter().all(|&v| v == y[0]);
        let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        if degenerate_labels || constant(&s) || constant(&b) {
            continue;
        }
        let a = auc(&s, &y).unwrap();
        assert!((a - oracle_auc(&s, &y)).abs() <= 1e-12);
        assert_eq!(gini(&s, &y).unwrap(), 2.0 * a - 1.0);
        let rho = spearman(&s, &b).unwrap();
        assert!((rho - oracle_pearson(&oracle_ranks(&s), &oracle_ranks(&b))).abs() <= 1e-12);
        let tau = kendall(&s, &b).unwrap();
        assert!((tau - oracle_tau_b(&s, &b)).abs() <= 1e-12, "n={n} {tau}");
        checked += 1;
    }
}

#[test]
fn midranks_match_counting_oracle() {
    let v = [3.0, 1.0, 3.0, 2.0, 3.0];
    assert_eq!(midranks(&v).unwrap(), oracle_ranks(&v));
    assert_eq!(midranks(&v).unwrap(), vec![4.0, 1.0, 4.0, 2.0, 4.0]);
}

#[test]
fn unit_weights_reproduce_plain_auc() {
    let s = [0.1, 0.4, 0.35, 0.8, 0.4];
    let y = [0, 0, 1, 1, 1];
    let w = [1.0; 5];
    assert_eq!(weighted_auc(&s, &y, Some(&w)).unwrap(), auc(&s, &y).unwrap());
    // Pairs won: 0.35 -> 1, 0.8 -> 2, 0.4 -> 1 plus a tie.
    assert!((auc(&s, &y).unwrap() - 4.5 / 6.0).abs() < 1e-15);
}

fn scores_and_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(0u8..2, n).prop_filter("both classes", |y| y.contains(&0) && y.contains(&1)),
        )
    })
}

proptest! {
    #[test]
    fn auc_is_invariant_under_monotone_transforms((s, y) in scores_and_labels()) {
        let t: Vec<f64> = s.iter().map(|v| (0.7 * v).exp() + 3.0).collect();
        let a = auc(&s, &y).unwrap();
        prop_assert!((a - auc(&t, &y).unwrap()).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn negating_scores_reflects_auc((s, y) in scores_and_labels()) {
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        prop_assert!((auc(&s, &y).unwrap() + auc(&neg, &y).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn correlations_are_bounded_and_symmetric(a in prop::collection::vec(-3.0f64..3.0, 3..60), seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<f64> = a.iter().map(|v| v + rng.random::<f64>()).collect();
        if let (Ok(r1), Ok(r2)) = (spearman(&a, &b), spearman(&b, &a)) {
            prop_assert!((r1 - r2).abs() <= 1e-12 && r1.abs() <= 1.0);
        }
        if let (Ok(t1), Ok(t2)) = (kendall(&a, &b), kendall(&b, &a)) {
            prop_assert!((t1 - t2).abs() <= 1e-12 && t1.abs() <= 1.0);
        }
    }

    #[test]
    fn percentiles_lie_in_unit_range_and_bins_follow_order(v in prop::collection::vec(0.0f64..1.0, 1..300)) {
        let r = percentile_rank(&v, Direction::Descending).unwrap();
        for i in 0..v.len() {
            prop_assert!(r.percentiles[i] > 0.0 && r.percentiles[i] <= 100.0);
            prop_assert!((1..=100).contains(&r.bins[i]));
            for j in 0..v.len() {
                if v[i] > v[j] {
                    prop_assert!(r.percentiles[i] < r.percentiles[j]);
                    prop_assert!(r.bins[i] <= r.bins[j]);
                }
            }
        }
    }
}
