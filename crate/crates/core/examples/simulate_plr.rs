//! Monte Carlo packet loss rate with the peeling decoder, next to the
//! error-floor prediction.
//!
//! Frames are drawn from per-frame random streams, so the estimate depends
//! only on the seed and the number of frames, never on the worker count.

use csa_uep::error_floor::PreparedCatalog;
use csa_uep::harness::frame_rng;
use csa_uep::presets::design;
use csa_uep::sim::{generate_frame, peel, run_monte_carlo};
use csa_uep::stopping_set::enumerate_stopping_sets;
use csa_uep::Result;

const FRAMES: u64 = 100_000;

fn main() -> Result<()> {
    let row = design("b3").expect("preset");
    let scenario = row.scenario(0.5).with_seed(2024);

    // One frame by hand.
    let graph = generate_frame(&scenario, &mut frame_rng(scenario.seed, 0))?;
    let resolved = peel(&graph);
    println!(
        "frame 0: {} users, {} edges, {} unresolved",
        graph.m(),
        graph.edge_count(),
        resolved.iter().filter(|&&r| !r).count()
    );

    let catalog = enumerate_stopping_sets(4, 8)?;
    println!("\n   g  class  simulated PLR (95% CI)       predicted");
    for g in [0.3, 0.5, 0.7, 0.9] {
        let s = scenario.at_load(g);
        let out = run_monte_carlo(&s, FRAMES, 0)?;
        let pred = PreparedCatalog::new(&catalog, s.n, s.m()).plr_classes(&s.classes)?;
        for (k, (c, p)) in out.per_class.iter().zip(pred).enumerate() {
            println!("{g:>4}  {:>5}  {:.3e} ± {:.1e}   {p:.3e}", k + 1, c.plr, c.ci_halfwidth);
        }
    }
    Ok(())
}
