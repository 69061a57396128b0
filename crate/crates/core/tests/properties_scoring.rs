use proptest::prelude::*;

use somnogray::consensus::majority_score;
use somnogray::eval::{agreement, capture_curve, confusion, exclusion_curve, ConfusionMatrix};
use somnogray::hypno::{
    argmax_hypnogram, ensemble_average, panel_to_hypnodensity, EpochGrid, Hypnodensity, Hypnogram, ScorerPanel, Stage,
    N_STAGES,
};
use somnogray::uncertainty::{compute_uncertainty, select_gray_rank, RankPooling, UncertaintyMetric};

fn row() -> impl Strategy<Value = [f64; N_STAGES]> {
    prop::array::uniform5(0.0f64..1.0).prop_filter_map("positive mass", |r| {
        let s: f64 = r.iter().sum();
        (s > 1e-6).then(|| r.map(|p| p / s))
    })
}

fn hypnodensity(max_epochs: usize) -> impl Strategy<Value = Hypnodensity> {
    prop::collection::vec(row(), 1..max_epochs)
        .prop_map(|rows| Hypnodensity::new(EpochGrid::new("h", rows.len()).unwrap(), rows).unwrap())
}

fn scored_stage() -> impl Strategy<Value = Stage> {
    (0..N_STAGES).prop_map(|i| Stage::from_index(i).unwrap())
}

fn panel(max_scorers: usize, max_epochs: usize) -> impl Strategy<Value = ScorerPanel> {
    (1..=max_scorers, 1..=max_epochs).prop_flat_map(|(s, n)| {
        prop::collection::vec(prop::collection::vec(scored_stage(), n), s).prop_map(move |rows| {
            let grid = EpochGrid::new("p", n).unwrap();
            let scorers = rows
                .into_iter()
                .enumerate()
                .map(|(i, st)| (format!("s{i}"), Hypnogram::certain(grid.clone(), st).unwrap()))
                .collect();
            ScorerPanel::new(scorers).unwrap()
        })
    })
}

fn cohort() -> impl Strategy<Value = (Vec<Hypnodensity>, Vec<Hypnogram>)> {
    prop::collection::vec(
        (1usize..60).prop_flat_map(|n| (prop::collection::vec(row(), n), prop::collection::vec(scored_stage(), n))),
        1..4,
    )
    .prop_map(|recs| {
        recs.into_iter()
            .enumerate()
            .map(|(i, (rows, stages))| {
                let grid = EpochGrid::new(format!("r{i}"), rows.len()).unwrap();
                (Hypnodensity::new(grid.clone(), rows).unwrap(), Hypnogram::certain(grid, stages).unwrap())
            })
            .unzip()
    })
}

fn metric() -> impl Strategy<Value = UncertaintyMetric> {
    prop::sample::select(UncertaintyMetric::ALL.to_vec())
}

proptest! {
    #[test]
    fn argmax_survives_monotone_rescaling(h in hypnodensity(40), k in 0.2f64..5.0) {
        let rows: Vec<[f64; N_STAGES]> = h
            .rows()
            .iter()
            .map(|r| {
                let powered = r.map(|p| p.powf(k));
                let s: f64 = powered.iter().sum();
                powered.map(|p| p / s)
            })
            .collect();
        // Rescaling may create exact ties that were near-ties before; skip rows
        // whose top two collapse.
        let distinct = h.rows().iter().all(|r| {
            let mut v = *r;
            v.sort_by(|a, b| b.total_cmp(a));
            v[0] - v[1] > 1e-9
        });
        prop_assume!(distinct);
        let scaled = Hypnodensity::new(h.grid().clone(), rows).unwrap();
        let (a, b) = (argmax_hypnogram(&h), argmax_hypnogram(&scaled));
        prop_assert_eq!(a.stages(), b.stages());
    }

    #[test]
    fn ensemble_rows_stay_on_the_simplex(hs in (1usize..30).prop_flat_map(|n| prop::collection::vec(prop::collection::vec(row(), n), 1..6))) {
        let hs: Vec<Hypnodensity> = hs.into_iter().map(|rows| Hypnodensity::new(EpochGrid::new("e", rows.len()).unwrap(), rows).unwrap()).collect();
        let avg = ensemble_average(&hs).unwrap();
        for r in avg.rows() {
            prop_assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn metrics_are_permutation_invariant(r in row(), perm in Just((0..N_STAGES).collect::<Vec<_>>()).prop_shuffle(), m in metric()) {
        let mut p = [0.0; N_STAGES];
        for (i, &j) in perm.iter().enumerate() {
            p[i] = r[j];
        }
        let (a, b) = (m.evaluate(&r), m.evaluate(&p));
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn margin_ranking_orders_top_two_gaps(h in hypnodensity(60)) {
        let s = compute_uncertainty(&h, UncertaintyMetric::MarginOfConfidence);
        let gap = |e: usize| {
            let mut v = *h.row(e);
            v.sort_by(|a, b| b.total_cmp(a));
            v[0] - v[1]
        };
        let order = somnogray::uncertainty::uncertainty_order(&s, 0..h.len());
        for w in order.windows(2) {
            prop_assert!(gap(w[0]) <= gap(w[1]) + 1e-12);
        }
    }

    #[test]
    fn rank_masks_are_nested(h in hypnodensity(80), a in 0.0f64..1.0, b in 0.0f64..1.0, m in metric()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let s = [compute_uncertainty(&h, m)];
        let small = select_gray_rank(&s, lo, RankPooling::Dataset).unwrap().remove(0);
        let large = select_gray_rank(&s, hi, RankPooling::Dataset).unwrap().remove(0);
        for (x, y) in small.mask().iter().zip(large.mask()) {
            prop_assert!(!x || *y);
        }
    }

    #[test]
    fn majority_equals_argmax_of_vote_fractions(p in panel(9, 30)) {
        let c = majority_score(&p).unwrap();
        let a = argmax_hypnogram(&panel_to_hypnodensity(&p).unwrap());
        prop_assert_eq!(c.hypnogram.stages(), a.stages());
        prop_assert!((0.0..=1.0).contains(&c.tie_fraction));
    }

    #[test]
    fn duplicate_scorer_keeps_untied_epochs(p in panel(7, 30), pick in any::<prop::sample::Index>()) {
        let before = majority_score(&p).unwrap();
        let mut scorers = p.scorers().to_vec();
        let dup = scorers[pick.index(scorers.len())].1.clone();
        scorers.push(("dup".into(), dup));
        let after = majority_score(&ScorerPanel::new(scorers).unwrap()).unwrap();
        // A one-vote lead can become a tie that the tiebreak resolves the other
        // way, so only epochs untied on both sides must keep their stage.
        for e in 0..before.tie_mask.len() {
            if !before.tie_mask[e] && !after.tie_mask[e] {
                prop_assert_eq!(before.hypnogram.stages()[e], after.hypnogram.stages()[e]);
            }
            if !before.tie_mask[e] && after.tie_mask[e] {
                let mut v = p.votes(e);
                v.sort_unstable_by(|a, b| b.cmp(a));
                prop_assert_eq!(v[0] - v[1], 1);
            }
        }
    }

    #[test]
    fn single_scorer_has_no_ties(p in panel(1, 40)) {
        prop_assert_eq!(majority_score(&p).unwrap().tie_fraction, 0.0);
    }

    #[test]
    fn class_permutation_permutes_per_class_metrics(
        counts in prop::array::uniform5(prop::array::uniform5(0u64..30)),
        perm in Just((0..N_STAGES).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let total: u64 = counts.iter().flatten().sum();
        prop_assume!(total > 0);
        let mut permuted = [[0u64; N_STAGES]; N_STAGES];
        for i in 0..N_STAGES {
            for j in 0..N_STAGES {
                permuted[perm[i]][perm[j]] = counts[i][j];
            }
        }
        let a = agreement(&ConfusionMatrix::from_counts(counts));
        let b = agreement(&ConfusionMatrix::from_counts(permuted));
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
                prop_assert!((a.cohen_kappa - b.cohen_kappa).abs() < 1e-12);
                for i in 0..N_STAGES {
                    let (x, y) = (&a.per_class[i], &b.per_class[perm[i]]);
                    prop_assert!((x.f1 - y.f1).abs() < 1e-12 && x.support == y.support);
                }
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "one side failed: {:?} / {:?}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn independent_marginals_give_zero_kappa(r in prop::array::uniform5(0u64..6), c in prop::array::uniform5(0u64..6)) {
        // counts[i][j] = r[i]·c[j] makes the observed agreement equal the chance agreement.
        let mut counts = [[0u64; N_STAGES]; N_STAGES];
        for i in 0..N_STAGES {
            for j in 0..N_STAGES {
                counts[i][j] = r[i] * c[j];
            }
        }
        let total: u64 = counts.iter().flatten().sum();
        let diag_support = (0..N_STAGES).any(|i| r[i] > 0 && c[i] > 0);
        prop_assume!(total > 0 && (r.iter().filter(|&&x| x > 0).count() > 1 || c.iter().filter(|&&x| x > 0).count() > 1));
        prop_assume!(diag_support);
        if let Ok(rep) = agreement(&ConfusionMatrix::from_counts(counts)) {
            prop_assert!(rep.cohen_kappa.abs() < 1e-12, "kappa {}", rep.cohen_kappa);
        }
    }

    #[test]
    fn exclusion_curve_starts_at_plain_agreement((hyps, refs) in cohort(), m in metric()) {
        let total: usize = refs.iter().map(Hypnogram::len).sum();
        let grid = [0.0, 0.1, 0.3, 0.5];
        let curve = match exclusion_curve(&hyps, &refs, m, &grid, None) {
            Ok(c) => c,
            Err(_) => return Ok(()),
        };
        let mut cm = ConfusionMatrix::default();
        for (h, r) in hyps.iter().zip(&refs) {
            cm.merge(&confusion(r, &argmax_hypnogram(h), None).unwrap());
        }
        let plain = agreement(&cm).unwrap();
        prop_assert!((curve.points[0].report.accuracy - plain.accuracy).abs() < 1e-12);
        for (p, pct) in curve.points.iter().zip(grid) {
            let excluded = ((pct * total as f64).round() as u64).min(total as u64);
            prop_assert_eq!(p.excluded_epochs, excluded);
            prop_assert_eq!(p.retained_epochs, total as u64 - excluded);
        }
    }

    #[test]
    fn capture_curve_is_non_decreasing((hyps, refs) in cohort(), m in metric()) {
        let predicted: Vec<Hypnogram> = hyps.iter().map(argmax_hypnogram).collect();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        if let Ok(curve) = capture_curve(&hyps, &refs, &predicted, m, &grid, None) {
            for w in curve.points.windows(2) {
                prop_assert!(w[1].captured_fraction >= w[0].captured_fraction);
            }
        }
    }
}
