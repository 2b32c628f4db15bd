//! Enumeration of small stopping sets.
//!
//! A stopping set here is a connected bipartite graph whose check nodes
//! (slots) all have degree at least two. Because slots are interchangeable,
//! a set on `ν` variable nodes is fully described by the multiset of slot
//! neighbourhoods, each a bitmask over the variable nodes. The canonical
//! form is the lexicographically smallest sorted mask list over all
//! relabelings of the variable nodes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported number of variable nodes in a catalog entry.
pub const MAX_NU: usize = 5;
/// Largest supported variable-node degree.
pub const MAX_DEGREE: usize = 8;

/// One stopping set up to isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StoppingSetRecord", into = "StoppingSetRecord")]
pub struct StoppingSet {
    masks: Vec<u8>,
    nu: usize,
    v: Vec<usize>,
    aut: u128,
    c: u128,
}

/// Serialized layout of a [`StoppingSet`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StoppingSetRecord {
    pub nu: usize,
    pub mu: usize,
    /// `v[j - 1]`: number of degree-j variable nodes.
    pub v: Vec<usize>,
    /// Check-node indices adjacent to each variable node.
    pub biadjacency: Vec<Vec<usize>>,
    pub c: u128,
    pub aut: u128,
}

impl From<StoppingSet> for StoppingSetRecord {
    fn from(s: StoppingSet) -> Self {
        Self { nu: s.nu, mu: s.mu(), biadjacency: s.biadjacency(), v: s.v, c: s.c, aut: s.aut }
    }
}

impl TryFrom<StoppingSetRecord> for StoppingSet {
    type Error = Error;

    fn try_from(r: StoppingSetRecord) -> Result<Self> {
        let s = StoppingSet::from_biadjacency(&r.biadjacency)?;
        if s.mu() != r.mu || s.v != r.v || s.c != r.c || s.aut != r.aut {
            return Err(Error::InvalidConfig("stopping set record disagrees with its biadjacency".into()));
        }
        Ok(s)
    }
}

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Relabeling tables: `table[p][mask]` is `mask` under permutation `p`.
struct Relabel {
    tables: Vec<Vec<u8>>,
}

impl Relabel {
    fn new(nu: usize) -> Self {
        let tables = permutations(nu)
            .into_iter()
            .map(|perm| {
                (0..1usize << nu)
                    .map(|mask| (0..nu).filter(|&i| mask >> i & 1 == 1).fold(0u8, |acc, i| acc | 1 << perm[i]))
                    .collect()
            })
            .collect();
        Self { tables }
    }

    /// Canonical sorted mask list and number of relabelings fixing it.
    fn canonical(&self, masks: &[u8]) -> (Vec<u8>, u128) {
        let mut sorted = masks.to_vec();
        sorted.sort_unstable();
        let mut best: Option<Vec<u8>> = None;
        let mut fixing = 0;
        let mut image = Vec::with_capacity(masks.len());
        for table in &self.tables {
            image.clear();
            image.extend(masks.iter().map(|&m| table[m as usize]));
            image.sort_unstable();
            if image == sorted {
                fixing += 1;
            }
            if best.as_ref().is_none_or(|b| image < *b) {
                best = Some(image.clone());
            }
        }
        (best.unwrap_or_default(), fixing)
    }
}

fn is_connected(nu: usize, masks: &[u8]) -> bool {
    let full = ((1u16 << nu) - 1) as u8;
    let mut comp: u8 = 1;
    loop {
        let grown = masks.iter().filter(|&&m| m & comp != 0).fold(comp, |acc, &m| acc | m);
        if grown == comp {
            return comp == full;
        }
        comp = grown;
    }
}

fn vn_degrees(nu: usize, masks: &[u8]) -> Vec<usize> {
    (0..nu).map(|i| masks.iter().filter(|&&m| m >> i & 1 == 1).count()).collect()
}

impl StoppingSet {
    /// Builds a stopping set from the check-node list of every variable node.
    pub fn from_biadjacency(biadjacency: &[Vec<usize>]) -> Result<Self> {
        let nu = biadjacency.len();
        if nu == 0 || nu > 8 {
            return Err(Error::Limit(format!("{nu} variable nodes; supported range is 1..=8")));
        }
        let mu = biadjacency.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
        let mut masks = vec![0u8; mu];
        for (i, cns) in biadjacency.iter().enumerate() {
            for &c in cns {
                if masks[c] >> i & 1 == 1 {
                    return Err(Error::InvalidConfig(format!("repeated edge ({i}, {c})")));
                }
                masks[c] |= 1 << i;
            }
        }
        Self::from_masks(nu, &masks, &Relabel::new(nu))
    }

    fn from_masks(nu: usize, masks: &[u8], relabel: &Relabel) -> Result<Self> {
        if let Some(c) = masks.iter().position(|m| m.count_ones() < 2) {
            return Err(Error::InvalidConfig(format!("check node {c} has degree below two")));
        }
        let degrees = vn_degrees(nu, masks);
        if degrees.contains(&0) || !is_connected(nu, masks) {
            return Err(Error::InvalidConfig("stopping set must be connected".into()));
        }
        let (canon, fixing) = relabel.canonical(masks);
        let mut aut = fixing;
        for run in canon.chunk_by(|a, b| a == b) {
            aut *= factorial(run.len());
        }
        let labeled = factorial(nu) * factorial(canon.len());
        debug_assert_eq!(labeled % aut, 0);
        let mut v = vec![0; degrees.iter().copied().max().unwrap_or(0)];
        for d in degrees {
            v[d - 1] += 1;
        }
        Ok(Self { masks: canon, nu, v, aut, c: labeled / aut })
    }

    /// Number of variable nodes, ν(S).
    pub fn nu(&self) -> usize {
        self.nu
    }

    /// Number of check nodes, μ(S).
    pub fn mu(&self) -> usize {
        self.masks.len()
    }

    /// `v()[j - 1]` is v_j(S), the number of degree-j variable nodes.
    pub fn v(&self) -> &[usize] {
        &self.v
    }

    pub fn v_j(&self, j: usize) -> usize {
        if j == 0 {
            0
        } else {
            self.v.get(j - 1).copied().unwrap_or(0)
        }
    }

    /// Largest variable-node degree.
    pub fn max_degree(&self) -> usize {
        self.v.len()
    }

    /// Order of the automorphism group (relabelings of both sides that
    /// preserve the graph).
    pub fn aut(&self) -> u128 {
        self.aut
    }

    /// Labeled realizations on ν labeled variable nodes and μ labeled
    /// check nodes: `ν! μ! / |Aut(S)|`.
    pub fn c(&self) -> u128 {
        self.c
    }

    /// Labeled realizations when every labeled variable node also has a
    /// prescribed degree: `μ! Π_j v_j! / |Aut(S)|`. This is the multiplicity
    /// that enters the error-floor sum.
    pub fn degree_labeled_count(&self) -> u128 {
        let prescribed: u128 = self.v.iter().map(|&k| factorial(k)).product();
        factorial(self.mu()) * prescribed / self.aut
    }

    /// Canonical check-node neighbourhood masks (bit i = variable node i).
    pub fn canonical_masks(&self) -> &[u8] {
        &self.masks
    }

    /// Check-node indices adjacent to each variable node.
    pub fn biadjacency(&self) -> Vec<Vec<usize>> {
        (0..self.nu).map(|i| (0..self.mu()).filter(|&c| self.masks[c] >> i & 1 == 1).collect()).collect()
    }

    /// True when no proper non-empty subset of variable nodes is itself a
    /// stopping set.
    pub fn is_minimal(&self) -> bool {
        let full = (1u16 << self.nu) - 1;
        (1..full).all(|subset| {
            let subset = subset as u8;
            self.masks.iter().any(|&m| (m & subset).count_ones() == 1)
        })
    }
}

/// Stopping sets up to a size bound, deduplicated by canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoppingSetCatalog {
    pub nu_max: usize,
    pub d_max: usize,
    pub sets: Vec<StoppingSet>,
}

impl StoppingSetCatalog {
    /// Catalog holding exactly `sets`, for hand-picked analyses.
    pub fn from_sets(sets: Vec<StoppingSet>) -> Self {
        let nu_max = sets.iter().map(StoppingSet::nu).max().unwrap_or(0);
        let d_max = sets.iter().map(StoppingSet::max_degree).max().unwrap_or(0);
        Self { nu_max, d_max, sets }
    }

    /// Two degree-2 variable nodes sharing two check nodes.
    pub fn elementary() -> Self {
        Self::from_sets(vec![StoppingSet::from_biadjacency(&[vec![0, 1], vec![0, 1]]).expect("valid elementary set")])
    }

    /// Keeps entries whose variable-node degrees all lie in `degrees`.
    pub fn restricted_to_degrees(&self, degrees: &[usize]) -> Self {
        let sets = self
            .sets
            .iter()
            .filter(|s| s.v.iter().enumerate().all(|(j, &k)| k == 0 || degrees.contains(&(j + 1))))
            .cloned()
            .collect();
        Self { sets, ..self.clone() }
    }

    /// Keeps minimal stopping sets only.
    pub fn minimal_only(&self) -> Self {
        Self { sets: self.sets.iter().filter(|s| s.is_minimal()).cloned().collect(), ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

struct Enumerator<'a> {
    nu: usize,
    d_max: usize,
    types: Vec<u8>,
    relabel: &'a Relabel,
    seen: HashSet<Vec<u8>>,
    found: Vec<StoppingSet>,
}

impl Enumerator<'_> {
    fn descend(&mut self, t: usize, degrees: &mut [usize], masks: &mut Vec<u8>) {
        if t == self.types.len() {
            if degrees.iter().all(|&d| d >= 2) && is_connected(self.nu, masks) {
                let (canon, _) = self.relabel.canonical(masks);
                if self.seen.insert(canon) {
                    let set = StoppingSet::from_masks(self.nu, masks, self.relabel).expect("enumerated sets are valid");
                    self.found.push(set);
                }
            }
            return;
        }
        let mask = self.types[t];
        let members: Vec<usize> = (0..self.nu).filter(|&i| mask >> i & 1 == 1).collect();
        let mut added = 0;
        loop {
            self.descend(t + 1, degrees, masks);
            if members.iter().any(|&i| degrees[i] == self.d_max) {
                break;
            }
            members.iter().for_each(|&i| degrees[i] += 1);
            masks.push(mask);
            added += 1;
        }
        members.iter().for_each(|&i| degrees[i] -= added);
        masks.truncate(masks.len() - added);
    }
}

/// Every connected stopping set with at most `nu_max` variable nodes of
/// degree `2..=d_max`, up to isomorphism. Entries are ordered by ν, then μ,
/// then canonical form.
pub fn enumerate_stopping_sets(nu_max: usize, d_max: usize) -> Result<StoppingSetCatalog> {
    if nu_max > MAX_NU {
        return Err(Error::Limit(format!("nu_max = {nu_max} exceeds {MAX_NU}")));
    }
    if d_max > MAX_DEGREE {
        return Err(Error::Limit(format!("d_max = {d_max} exceeds {MAX_DEGREE}")));
    }
    let mut sets = Vec::new();
    for nu in 2..=nu_max {
        let relabel = Relabel::new(nu);
        let types = (0..1u8 << nu).filter(|m| m.count_ones() >= 2).collect();
        let mut e = Enumerator { nu, d_max, types, relabel: &relabel, seen: HashSet::new(), found: Vec::new() };
        e.descend(0, &mut vec![0; nu], &mut Vec::new());
        sets.append(&mut e.found);
    }
    sets.sort_by(|a, b| (a.nu, a.mu(), &a.masks).cmp(&(b.nu, b.mu(), &b.masks)));
    Ok(StoppingSetCatalog { nu_max, d_max, sets })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_set() {
        let cat = enumerate_stopping_sets(2, 2).unwrap();
        assert_eq!(cat.len(), 1);
        let s = &cat.sets[0];
        assert_eq!((s.nu(), s.mu(), s.aut(), s.c()), (2, 2, 4, 1));
        assert_eq!(s.v(), &[0, 2]);
        assert_eq!(cat, StoppingSetCatalog::from_sets(vec![StoppingSetCatalog::elementary().sets[0].clone()]));
    }

    #[test]
    fn six_cycle() {
        let s = StoppingSet::from_biadjacency(&[vec![0, 1], vec![1, 2], vec![2, 0]]).unwrap();
        assert_eq!((s.nu(), s.mu(), s.aut(), s.c()), (3, 3, 6, 6));
        assert!(s.is_minimal());
    }

    #[test]
    fn single_vn_catalog_is_empty() {
        for d in 2..=8 {
            assert!(enumerate_stopping_sets(1, d).unwrap().is_empty());
        }
    }

    #[test]
    fn limits() {
        assert!(matches!(enumerate_stopping_sets(6, 2), Err(Error::Limit(_))));
        assert!(matches!(enumerate_stopping_sets(3, 9), Err(Error::Limit(_))));
    }

    #[test]
    fn rejects_non_stopping_sets() {
        // slot 2 is a singleton
        assert!(StoppingSet::from_biadjacency(&[vec![0, 1], vec![0, 1, 2]]).is_err());
        // two disjoint elementary sets
        assert!(StoppingSet::from_biadjacency(&[vec![0, 1], vec![0, 1], vec![2, 3], vec![2, 3]]).is_err());
    }

    #[test]
    fn degree_two_catalog_small_counts() {
        // ν = 2: the double edge; ν = 3: the 6-cycle and three users sharing two slots
        let cat = enumerate_stopping_sets(3, 2).unwrap();
        assert_eq!(cat.len(), 3);
    }

    #[test]
    fn entry_invariants() {
        let cat = enumerate_stopping_sets(4, 4).unwrap();
        for s in &cat.sets {
            assert_eq!(s.v().iter().sum::<usize>(), s.nu());
            let vn_edges: usize = s.v().iter().enumerate().map(|(j, k)| (j + 1) * k).sum();
            let cn_edges: usize = s.canonical_masks().iter().map(|m| m.count_ones() as usize).sum();
            assert_eq!(vn_edges, cn_edges);
            assert!(s.canonical_masks().iter().all(|m| m.count_ones() >= 2));
            assert_eq!(s.v_j(1), 0);
            assert_eq!(factorial(s.nu()) * factorial(s.mu()) % s.aut(), 0);
        }
    }

    #[test]
    fn json_round_trip() {
        let cat = enumerate_stopping_sets(3, 3).unwrap();
        let back = StoppingSetCatalog::from_json(&cat.to_json().unwrap()).unwrap();
        assert_eq!(back, cat);
        let tampered = cat.to_json().unwrap().replacen("\"aut\":4", "\"aut\":5", 1);
        assert!(StoppingSetCatalog::from_json(&tampered).is_err());
    }
}
