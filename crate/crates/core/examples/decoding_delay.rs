//! Decoding delay with a decoder that runs after every received slot.

use csa_uep::delay::{mean_delay_class, run_delay_monte_carlo, slot_decoder};
use csa_uep::presets::design;
use csa_uep::sim::FrameGraph;
use csa_uep::Result;

fn main() -> Result<()> {
    // User 0 sits alone in slot 0; its copy in slot 2 is cancelled when slot 2
    // arrives, which frees user 1 there.
    let graph = FrameGraph::from_users(4, &[(0, vec![0, 2]), (0, vec![2, 3])])?;
    println!("decoding slots: {:?}", slot_decoder(&graph));

    let row = design("b3").expect("preset");
    for (k, c) in row.classes().iter().enumerate() {
        println!("class {}: mean delay at vanishing load {:.4}", k + 1, mean_delay_class(c));
    }

    println!("\n   g   class 1   class 2");
    for g in [0.02, 0.25, 0.5, 0.75, 0.95] {
        let stats = run_delay_monte_carlo(&row.scenario(g), 20_000, 0)?;
        println!("{g:>4}   {:.4}    {:.4}", stats.per_class[0].mean, stats.per_class[1].mean);
    }

    let stats = run_delay_monte_carlo(&row.scenario(0.5), 20_000, 0)?;
    println!("\nclass-1 delay PMF at g = 0.5 (first bins):");
    for (t, p) in stats.per_class[0].pmf().iter().take(5) {
        println!("  Δt = {t:.2}: {p:.4}");
    }
    Ok(())
}
