use csa_uep::error_floor::plr_class;
use csa_uep::optimizer::{optimize, OptimizationProblem, Optimizer};
use csa_uep::presets::TABLE1;
use csa_uep::stopping_set::enumerate_stopping_sets;
use csa_uep::{average_distribution, density_evolution::threshold, ClassSpec, DegreeDistribution};

#[test]
fn vacuous_targets_reach_the_family_optimum() {
    let result = optimize(&OptimizationProblem::two_class(100, 0.5, 0.2, (1.0, 1.0)), 0).unwrap();
    assert!(result.feasible);
    assert!(result.threshold >= 0.87, "{result}");
}

#[test]
fn very_strict_targets_follow_the_all_degree_eight_floor() {
    // The all-degree-8 design has the lowest floor of the family; whether
    // targets are reachable is decided by comparing against it.
    let cat = enumerate_stopping_sets(4, 8).unwrap();
    let d8 = DegreeDistribution::monomial(8).unwrap();
    let classes = vec![ClassSpec::new(0.2, d8.clone()), ClassSpec::new(0.8, d8)];
    let floor = plr_class(&cat, &classes, 100, 50, 0).unwrap();

    for target in [1e-9, 1e-11] {
        let mut problem = OptimizationProblem::two_class(100, 0.5, 0.2, (target, target));
        problem.grid_step = 0.5;
        let result = optimize(&problem, 0).unwrap();
        assert_eq!(result.feasible, floor <= target, "target {target}: floor {floor:.3e}, {result}");
        if !result.feasible {
            // infeasible-best is still a valid design
            assert!(result.distributions.iter().all(|d| d.prob(8) > 0.99));
        }
    }
}

#[test]
fn feasible_results_recheck_exactly() {
    let cat = enumerate_stopping_sets(4, 8).unwrap();
    let problem = TABLE1[1].problem();
    let result = optimize(&problem, 0).unwrap();
    assert!(result.feasible);
    let classes: Vec<ClassSpec> =
        problem.classes.iter().zip(&result.distributions).map(|(c, d)| ClassSpec::new(c.alpha, d.clone())).collect();
    for k in 0..2 {
        let p = plr_class(&cat, &classes, 100, 50, k).unwrap();
        assert!(p <= problem.classes[k].target_plr, "class {k}: {p:e}");
        assert!((p - result.predicted_plr[k]).abs() <= 1e-12 * p);
    }
    let g = threshold(&average_distribution(&classes).unwrap(), problem.threshold_tol).threshold;
    assert!((g - result.threshold).abs() <= problem.threshold_tol);
}

#[test]
fn loosening_targets_never_lowers_the_threshold() {
    // α_1 = 0.2 rows, from strictest to loosest class-2 target
    let optimizer_for = |targets| Optimizer::new(OptimizationProblem::two_class(100, 0.5, 0.2, targets)).unwrap();
    let mut previous = 0.0;
    for targets in [(1e-5, 1e-4), (1e-5, 1e-3), (1e-5, 1e-2)] {
        let result = optimizer_for(targets).optimize(0).unwrap();
        assert!(result.feasible);
        assert!(result.threshold >= previous, "{targets:?}: {result}");
        previous = result.threshold;
    }
    let relaxed_class1 = optimizer_for((1e-4, 1e-3)).optimize(0).unwrap();
    let strict_class1 = optimizer_for((1e-5, 1e-3)).optimize(0).unwrap();
    assert!(relaxed_class1.threshold >= strict_class1.threshold);
}

#[test]
fn deterministic_across_workers() {
    let mut problem = OptimizationProblem::two_class(100, 0.5, 0.1, (1e-5, 1e-3));
    problem.grid_step = 0.2;
    let a = optimize(&problem, 1).unwrap();
    let b = optimize(&problem, 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
