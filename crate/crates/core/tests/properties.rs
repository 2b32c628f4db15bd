use csa_uep::delay::slot_decoder;
use csa_uep::density_evolution::{de_fixed_point, threshold, threshold_envelope, DeParams};
use csa_uep::error_floor::PreparedCatalog;
use csa_uep::nelder_mead::{nelder_mead, NelderMeadParams};
use csa_uep::sim::{largest_remainder_counts, peel, FrameGraph};
use csa_uep::stopping_set::{enumerate_stopping_sets, StoppingSet, StoppingSetCatalog};
use csa_uep::{average_distribution, ClassAssignment, ClassSpec, DegreeDistribution, ScenarioConfig};
use proptest::prelude::*;
use std::sync::OnceLock;

fn distribution() -> impl Strategy<Value = DegreeDistribution> {
    prop::collection::vec(0.0f64..1.0, 1..8).prop_filter_map("all-zero weights", |w| {
        let total: f64 = w.iter().sum();
        (total > 1e-3).then(|| {
            let pairs: Vec<(usize, f64)> = w.iter().enumerate().map(|(i, x)| (i + 2, x / total)).collect();
            DegreeDistribution::from_pairs(&pairs).unwrap()
        })
    })
}

fn two_classes() -> impl Strategy<Value = Vec<ClassSpec>> {
    (0.05f64..0.95, distribution(), distribution())
        .prop_map(|(a, d1, d2)| vec![ClassSpec::new(a, d1), ClassSpec::new(1.0 - a, d2)])
}

/// Random frame: up to 13 users on 2..=12 slots, each on 1..=4 distinct slots.
fn graph() -> impl Strategy<Value = FrameGraph> {
    (2usize..=12).prop_flat_map(|n| {
        let user = prop::collection::btree_set(0..n, 1..=4.min(n));
        prop::collection::vec(user, 0..14).prop_map(move |users| {
            let users: Vec<(usize, Vec<usize>)> = users.into_iter().map(|s| (0, s.into_iter().collect())).collect();
            FrameGraph::from_users(n, &users).unwrap()
        })
    })
}

fn catalog() -> &'static StoppingSetCatalog {
    static CAT: OnceLock<StoppingSetCatalog> = OnceLock::new();
    CAT.get_or_init(|| enumerate_stopping_sets(4, 4).unwrap())
}

proptest! {
    #[test]
    fn eval_is_monotone_and_pinned(d in distribution(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.eval(lo).unwrap() <= d.eval(hi).unwrap() + 1e-15);
        prop_assert_eq!(d.eval(0.0).unwrap(), 0.0);
        prop_assert!((d.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((d.eval_derivative(1.0).unwrap() - d.average_degree()).abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_finite_difference(d in distribution(), x in 0.01f64..0.99) {
        let h = 1e-6;
        let fd = (d.eval(x + h).unwrap() - d.eval(x - h).unwrap()) / (2.0 * h);
        prop_assert!((fd - d.eval_derivative(x).unwrap()).abs() < 1e-5 * (1.0 + fd.abs()));
    }

    #[test]
    fn mixture_is_linear(classes in two_classes(), x in 0.0f64..1.0) {
        let avg = average_distribution(&classes).unwrap();
        let direct: f64 = classes.iter().map(|c| c.alpha * c.dist.eval(x).unwrap()).sum();
        prop_assert!((avg.eval(x).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn scenario_json_round_trip(classes in two_classes(), n in 8usize..500, g in 0.01f64..2.0,
                                seed in any::<u64>(), fixed in any::<bool>()) {
        prop_assume!((g * n as f64).round() >= 1.0);
        let assignment = if fixed { ClassAssignment::FixedFraction } else { ClassAssignment::Stochastic };
        let config = ScenarioConfig::new(n, g, classes).with_seed(seed).with_assignment(assignment);
        let back = ScenarioConfig::from_json(&config.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, config);
    }

    #[test]
    fn largest_remainder_sums_to_m(w in prop::collection::vec(0.01f64..1.0, 1..6), m in 0usize..1000) {
        let total: f64 = w.iter().sum();
        let alphas: Vec<f64> = w.iter().map(|x| x / total).collect();
        let counts = largest_remainder_counts(&alphas, m);
        prop_assert_eq!(counts.iter().sum::<usize>(), m);
        for (c, a) in counts.iter().zip(&alphas) {
            prop_assert!((*c as f64 - a * m as f64).abs() < 1.0);
        }
    }

    #[test]
    fn peel_residual_has_no_singleton(g in graph()) {
        let resolved = peel(&g);
        for s in 0..g.n() {
            let live = g.slot_users(s).iter().filter(|&&u| !resolved[u as usize]).count();
            prop_assert_ne!(live, 1);
        }
    }

    #[test]
    fn slot_decoder_ends_where_peel_ends(g in graph()) {
        let resolved = peel(&g);
        let delays = slot_decoder(&g);
        for u in 0..g.m() {
            prop_assert_eq!(resolved[u], delays[u].is_some());
            if let Some(s) = delays[u] {
                // decoding needs at least the user's first copy
                prop_assert!(s as usize >= g.user_slots(u)[0] as usize);
            }
        }
    }

    #[test]
    fn canonical_form_ignores_labels(idx in 0usize..1000, perm_seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let cat = catalog();
        let set = &cat.sets[idx % cat.len()];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(perm_seed);
        let mut vn: Vec<usize> = (0..set.nu()).collect();
        let mut cn: Vec<usize> = (0..set.mu()).collect();
        vn.shuffle(&mut rng);
        cn.shuffle(&mut rng);
        let adj = set.biadjacency();
        let relabeled: Vec<Vec<usize>> = vn.iter().map(|&i| adj[i].iter().map(|&c| cn[c]).collect()).collect();
        let again = StoppingSet::from_biadjacency(&relabeled).unwrap();
        prop_assert_eq!(&again, set);
    }

    #[test]
    fn error_floor_grows_with_users(d in distribution(), m in 2usize..80) {
        let cat = catalog();
        let lo = PreparedCatalog::new(cat, 100, m).plr_by_degree(&d);
        let hi = PreparedCatalog::new(cat, 100, m + 1).plr_by_degree(&d);
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(a <= b);
        }
    }

    #[test]
    fn nelder_mead_trace_is_monotone(c in prop::collection::vec(-1.0f64..1.0, 1..5),
                                     start in prop::collection::vec(-1.0f64..1.0, 5)) {
        let f = |x: &[f64]| -x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let out = nelder_mead(f, &start[..c.len()], &NelderMeadParams::default());
        prop_assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(out.value >= f(&start[..c.len()]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn threshold_separates_convergence(d in distribution()) {
        let p = DeParams::default();
        let g = threshold(&d, 1e-3).threshold;
        prop_assert!((0.0..=2.0).contains(&g));
        prop_assert!(g <= threshold_envelope(&d) + 1e-3);
        if g > 2e-3 {
            prop_assert!(de_fixed_point(&d, g - 2e-3, &p).converged);
        }
        if g < 2.0 - 2e-3 {
            prop_assert!(!de_fixed_point(&d, g + 2e-3, &p).converged);
        }
    }
}
