//! Asymptotic thresholds by density evolution.

use csa_uep::density_evolution::{de_trajectory, multi_edge_de, threshold, threshold_envelope, DeParams};
use csa_uep::presets::TABLE1;
use csa_uep::{average_distribution, DegreeDistribution, Result};

fn main() -> Result<()> {
    let x2 = DegreeDistribution::monomial(2)?;
    println!("Λ(x) = x²: g* = {:.4}", threshold(&x2, 1e-4).threshold);

    println!("\nrow  published  bisection  envelope");
    for row in &TABLE1 {
        let avg = average_distribution(&row.classes())?;
        let g = threshold(&avg, 1e-4).threshold;
        println!("{:>3}  {:>9.2}  {:>9.4}  {:>8.4}", row.label, row.threshold, g, threshold_envelope(&avg));
    }

    // Below the threshold the erasure probability is driven to zero, above it
    // the recursion settles on a positive fixed point.
    let row = &TABLE1[6];
    let avg = average_distribution(&row.classes())?;
    let params = DeParams::default();
    for g in [0.8, 0.95] {
        let (fp, xi) = de_trajectory(&avg, g, &params);
        println!("\ng = {g}: converged = {}, {} iterations, final ξ = {:.3e}", fp.converged, fp.iterations, fp.xi);
        let shown: Vec<String> = xi.iter().take(6).map(|x| format!("{x:.4}")).collect();
        println!("  ξ trajectory starts {}", shown.join(", "));
    }

    // Both classes see the same slot erasure probability; they differ in how
    // many replicas must all be erased.
    let run = multi_edge_de(&row.classes(), 0.8, &params);
    let q = run.final_erasure();
    println!("\nmulti-edge at g = 0.8: converged = {}, class erasure {:.2e} / {:.2e}", run.converged, q[0], q[1]);
    Ok(())
}
