use proptest::prelude::*;

use crate::analysis::homogeneity_test;
use crate::coast::{crd_of, grow, prune_sequence, CoastTree, GrowConfig};
use crate::io::{fmt_num, parse_rankings, write_rankings, Delimiter, RankingFormat};
use crate::partition::VarianceEstimator;
use crate::perm::{kendall_tau, kendall_tau_pairwise, n_pairs, pairs, PairCounts};
use crate::{ranking_depth, ranking_risk, DiscreteRankingDistribution, Permutation, RankingSample};

fn perm(n: usize) -> impl Strategy<Value = Permutation> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle().prop_map(|r| Permutation::from_ranks(r).unwrap())
}

fn perm_triple() -> impl Strategy<Value = (Permutation, Permutation, Permutation)> {
    (1usize..=12).prop_flat_map(|n| (perm(n), perm(n), perm(n)))
}

fn sample(max_n: usize, max_len: usize) -> impl Strategy<Value = RankingSample> {
    (2..=max_n).prop_flat_map(move |n| {
        prop::collection::vec(perm(n), 1..=max_len).prop_map(move |r| RankingSample::new(n, r).unwrap())
    })
}

fn labeled_sample() -> impl Strategy<Value = RankingSample> {
    sample(8, 30).prop_flat_map(|s| {
        let len = s.len();
        (Just(s), prop::collection::vec(0usize..5, len))
            .prop_map(|(s, l)| RankingSample::with_labels(s.n(), s.rankings().to_vec(), l).unwrap())
    })
}

proptest! {
    #[test]
    fn kendall_tau_is_a_metric((a, b, c) in perm_triple()) {
        let d = |x: &Permutation, y: &Permutation| kendall_tau(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &b) == 0, a == b);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
        prop_assert!(d(&a, &b) <= n_pairs(a.n()));
        prop_assert_eq!(d(&a, &b), kendall_tau_pairwise(&a, &b).unwrap());
    }

    #[test]
    fn kendall_tau_is_relabeling_invariant((a, b, pi) in perm_triple()) {
        let (ap, bp) = (a.compose(&pi).unwrap(), b.compose(&pi).unwrap());
        prop_assert_eq!(kendall_tau(&ap, &bp).unwrap(), kendall_tau(&a, &b).unwrap());
    }

    #[test]
    fn risk_equals_marginal_disagreement(s in sample(7, 25), k in 0usize..25) {
        let dist = DiscreteRankingDistribution::empirical(&s).unwrap();
        let sigma = s.get(k % s.len()).inverse();
        let m = PairCounts::from_rankings(s.n(), s.rankings()).marginals();
        let by_pairs: f64 = pairs(s.n())
            .map(|(i, j)| if sigma.prefers(i, j) { m.get(j, i) } else { m.get(i, j) })
            .sum();
        let risk = ranking_risk(&dist, &sigma).unwrap();
        prop_assert!((risk - by_pairs).abs() < 1e-9);
        prop_assert!((risk - m.risk_of(&sigma)).abs() < 1e-9);
        let depth = ranking_depth(&dist, &sigma).unwrap();
        prop_assert!((depth + risk - n_pairs(s.n()) as f64).abs() < 1e-9);
    }

    #[test]
    fn ranking_files_round_trip(s in labeled_sample(), ranks in any::<bool>(), ws in any::<bool>(), drop in any::<bool>()) {
        let s = if drop { s.drop_labels() } else { s };
        let format = if ranks { RankingFormat::Ranks } else { RankingFormat::Ordering };
        let delim = if ws { Delimiter::Whitespace } else { Delimiter::Comma };
        let text = write_rankings(&s, format, delim);
        prop_assert_eq!(parse_rankings(&text, format, None).unwrap(), s);
    }

    #[test]
    fn fmt_num_keeps_twelve_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = fmt_num(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs());
    }

    #[test]
    fn growth_is_deterministic_and_round_trips(s in sample(5, 40), rule in any::<bool>(), one in any::<bool>()) {
        let config = GrowConfig {
            rule: if rule { crate::coast::SplitRule::Balanced } else { crate::coast::SplitRule::MinDistortion },
            one_split_per_iter: one,
            ..GrowConfig::default()
        };
        let (t1, tr1) = grow(&s, &config).unwrap();
        let (t2, tr2) = grow(&s, &config).unwrap();
        prop_assert_eq!(&t1, &t2);
        prop_assert_eq!(tr1.criteria(), tr2.criteria());
        let json = t1.to_json().unwrap();
        let back = CoastTree::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), json);
        let crd = crd_of(&t1).unwrap();
        let total: f64 = crd.atoms.iter().map(|a| a.weight).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        let members = t1.members(&s).unwrap();
        let routed: usize = t1.leaves().iter().map(|&l| members[l].len()).sum();
        prop_assert_eq!(routed, s.len());
    }

    #[test]
    fn plug_in_criterion_never_increases_along_growth(s in sample(5, 40)) {
        let config = GrowConfig { estimator: VarianceEstimator::PlugIn, one_split_per_iter: true, ..GrowConfig::default() };
        let (tree, trace) = grow(&s, &config).unwrap();
        let c = trace.criteria();
        prop_assert!(c.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let seq = prune_sequence(&tree);
        prop_assert!(seq.criteria().windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn rank_sum_p_value_is_symmetric(
        a in prop::collection::vec(-5i32..5, 1..25),
        b in prop::collection::vec(-5i32..5, 1..25),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let x = homogeneity_test(&a, &b).unwrap();
        let y = homogeneity_test(&b, &a).unwrap();
        prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
        prop_assert!((x.u_statistic + y.u_statistic - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&x.p_value));
    }
}
