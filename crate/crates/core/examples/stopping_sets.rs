//! Enumerating small stopping sets.

use std::collections::BTreeMap;

use csa_uep::stopping_set::{enumerate_stopping_sets, StoppingSet};
use csa_uep::Result;

fn main() -> Result<()> {
    // Two users sharing both of their slots: the smallest stopping set.
    let pair = StoppingSet::from_biadjacency(&[vec![0, 1], vec![0, 1]])?;
    println!("pair: ν = {}, μ = {}, |Aut| = {}, c = {}", pair.nu(), pair.mu(), pair.aut(), pair.c());

    // A six-cycle: three degree-2 users, each pair sharing one slot.
    let cycle = StoppingSet::from_biadjacency(&[vec![0, 1], vec![1, 2], vec![2, 0]])?;
    println!("cycle: ν = {}, μ = {}, |Aut| = {}, c = {}", cycle.nu(), cycle.mu(), cycle.aut(), cycle.c());

    let catalog = enumerate_stopping_sets(4, 8)?;
    let mut by_size: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for s in &catalog.sets {
        *by_size.entry((s.nu(), s.mu())).or_default() += 1;
    }
    println!("\n{} sets with ν ≤ 4 and degrees ≤ 8 ({} minimal)", catalog.len(), catalog.minimal_only().len());
    for ((nu, mu), count) in by_size.iter().take(12) {
        println!("  ν = {nu}, μ = {mu}: {count}");
    }

    let restricted = catalog.restricted_to_degrees(&[2, 3, 8]);
    println!("with degrees in {{2, 3, 8}} only: {}", restricted.len());

    // Catalogs serialize to JSON for reuse.
    let small = enumerate_stopping_sets(3, 2)?;
    println!("\n{}", small.to_json()?);
    Ok(())
}
