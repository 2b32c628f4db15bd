//! Error-floor PLR predictions per degree and per class.

use csa_uep::error_floor::PreparedCatalog;
use csa_uep::presets::TABLE1;
use csa_uep::stopping_set::{enumerate_stopping_sets, StoppingSetCatalog};
use csa_uep::{average_distribution, Result};

fn main() -> Result<()> {
    let full = enumerate_stopping_sets(4, 8)?;
    let n = 100;

    let row = &TABLE1[6];
    let classes = row.classes();
    let avg = average_distribution(&classes)?;

    // The pair of degree-2 users alone gives (m - 1) Λ_2 / C(n, 2).
    let pair = PreparedCatalog::new(&StoppingSetCatalog::elementary(), n, 50);
    println!("pair-only p_2 at m = 50: {:.4e}", pair.plr_degree(&avg, 2)?);

    let prepared = PreparedCatalog::new(&full, n, 50);
    for l in [2, 3, 8] {
        println!("p_{l} = {:.4e}", prepared.plr_degree(&avg, l)?);
    }

    println!("\nrow   targets            predicted at g = 0.5");
    for row in &TABLE1 {
        let p = prepared.plr_classes(&row.classes())?;
        println!("{:>3}   {:.0e} / {:.0e}    {:.2e} / {:.2e}", row.label, row.targets.0, row.targets.1, p[0], p[1]);
    }

    println!("\nload sweep for row {}:", row.label);
    for m in (10..=90).step_by(20) {
        let p = PreparedCatalog::new(&full, n, m).plr_classes(&classes)?;
        println!("  g = {:.1}: {:.2e} / {:.2e}", m as f64 / n as f64, p[0], p[1]);
    }
    Ok(())
}
