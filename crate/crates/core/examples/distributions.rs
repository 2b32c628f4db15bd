//! Degree distributions, class mixtures and scenario files.
//!
//! Run with `cargo run --example distributions`.

use csa_uep::presets::design;
use csa_uep::{average_distribution, ClassSpec, DegreeDistribution, Result, ScenarioConfig};

fn main() -> Result<()> {
    let protected = DegreeDistribution::from_pairs(&[(3, 0.01), (8, 0.99)])?;
    let bulk = DegreeDistribution::from_pairs(&[(2, 0.27), (3, 0.73)])?;
    println!("class 1: Λ(x) = {protected}, mean degree {:.3}", protected.average_degree());
    println!("class 2: Λ(x) = {bulk}, mean degree {:.3}", bulk.average_degree());

    let classes = vec![ClassSpec::new(0.2, protected), ClassSpec::new(0.8, bulk)];
    let avg = average_distribution(&classes)?;
    println!("average: Λ(x) = {avg}");
    for x in [0.25, 0.5, 0.75] {
        println!("  Λ({x}) = {:.5}   Λ'({x}) = {:.5}", avg.eval(x)?, avg.eval_derivative(x)?);
    }

    // Evaluation outside [0, 1] is a domain error, not a silent extrapolation.
    assert!(avg.eval(1.5).is_err());
    // So is a distribution whose mass does not add up.
    assert!(DegreeDistribution::from_pairs(&[(2, 0.5), (3, 0.4)]).is_err());

    let scenario = ScenarioConfig::new(100, 0.5, classes).with_seed(42);
    let json = scenario.to_json()?;
    println!("\nscenario file:\n{json}");
    assert_eq!(ScenarioConfig::from_json(&json)?, scenario);
    println!("m = {} users on n = {} slots", scenario.m(), scenario.n);

    // The same classes (plus their loss targets) are available as a preset.
    let preset = design("b3").expect("preset").scenario(0.5);
    for (a, b) in preset.classes.iter().zip(&scenario.classes) {
        assert_eq!((a.alpha, &a.dist), (b.alpha, &b.dist));
    }
    Ok(())
}
