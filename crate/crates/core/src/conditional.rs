//! Conditional linkage structures derived from a VIG.
//!
//! `factorize` turns the interaction graph into a factorized conditional
//! distribution (UCond: one factor per variable; MCond: terminal cliques
//! merged into unconditioned group factors) whose factor order is a valid
//! forward-sampling order. `clique_seed` extracts, per start vertex, the
//! maximal candidate cliques around it; the deduplicated set forms an
//! overlapping conditional FOS for the factorized-GOM level while the MCond
//! factorization keeps driving the generational full-sampling step.

use alloc::vec::Vec;
use serde::Serialize;

use crate::fos::{FosElement, FosKind, FosModel};
use crate::vig::Vig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorizationKind {
    UCond,
    MCond,
}

/// Factorized conditional distribution over all variables; `factors` is a
/// valid forward-sampling order (each factor's parents appear in strictly
/// earlier factors).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Factorization {
    pub kind: FactorizationKind,
    pub start_vertex: usize,
    pub factors: Vec<FosElement>,
}

impl Factorization {
    /// Checks the forward-sampling validity invariant.
    pub fn is_forward_valid(&self) -> bool {
        let mut sampled = alloc::collections::BTreeSet::new();
        for factor in &self.factors {
            if !factor.parents.iter().all(|p| sampled.contains(p)) {
                return false;
            }
            for &v in &factor.variables {
                if !sampled.insert(v) {
                    return false;
                }
            }
        }
        true
    }
}

/// Derives a factorization by traversing each connected component from its
/// start vertex (the supplied start for its own component, the lowest index
/// elsewhere).
///
/// The traversal conditions the visited vertex on all of its not-yet-visited
/// neighbors and samples in reverse visit order, so the start vertex is
/// sampled last, conditioned on its whole neighborhood. After the start, the
/// next visited vertex is the frontier vertex with the fewest remaining
/// neighbors (ties to the highest index). For MCond the traversal stops as
/// soon as the remaining vertices form a clique, which becomes one jointly
/// sampled, unconditioned group factor; UCond always continues down to
/// single variables.
pub fn factorize(vig: &Vig, kind: FactorizationKind, start_vertex: usize) -> Factorization {
    assert!(start_vertex < vig.vertex_count(), "start vertex out of range");
    let mut factors = Vec::new();
    for component in vig.components() {
        let start = if component.contains(&start_vertex) { start_vertex } else { component[0] };
        factors.extend(factorize_component(vig, &component, start, kind));
    }
    let f = Factorization { kind, start_vertex, factors };
    debug_assert!(f.is_forward_valid());
    f
}

fn factorize_component(
    vig: &Vig,
    component: &[usize],
    start: usize,
    kind: FactorizationKind,
) -> Vec<FosElement> {
    let n = vig.vertex_count();
    let mut remaining = alloc::vec![false; n];
    for &v in component {
        remaining[v] = true;
    }
    let mut rem: Vec<usize> = component.to_vec();
    let mut frontier = alloc::vec![false; n];
    // factors in visit (elimination) order; reversed at the end
    let mut visited_factors: Vec<FosElement> = Vec::new();
    let mut group: Option<FosElement> = None;
    let mut first = true;
    loop {
        if kind == FactorizationKind::MCond && vig.is_clique(&rem) {
            if !rem.is_empty() {
                group = Some(FosElement::unconditional(rem.clone()));
            }
            break;
        }
        if rem.is_empty() {
            break;
        }
        let v = if first {
            first = false;
            start
        } else {
            // frontier vertex with minimum remaining degree, ties to the
            // highest index
            let mut best: Option<(usize, usize)> = None;
            for &u in &rem {
                if !frontier[u] {
                    continue;
                }
                let deg = vig.neighbors(u).iter().filter(|&&w| remaining[w]).count();
                let better = match best {
                    None => true,
                    Some((bd, bu)) => deg < bd || (deg == bd && u > bu),
                };
                if better {
                    best = Some((deg, u));
                }
            }
            best.expect("connected component must keep a frontier").1
        };
        remaining[v] = false;
        rem.retain(|&u| u != v);
        let parents: Vec<usize> =
            vig.neighbors(v).iter().copied().filter(|&u| remaining[u]).collect();
        for &u in vig.neighbors(v) {
            if remaining[u] {
                frontier[u] = true;
            }
        }
        visited_factors.push(FosElement::new(alloc::vec![v], parents));
    }
    let mut factors = Vec::with_capacity(visited_factors.len() + 1);
    if let Some(g) = group {
        factors.push(g);
    }
    factors.extend(visited_factors.into_iter().rev());
    factors
}

/// Overlapping maximal cliques found by per-vertex seeded searches.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliqueSet {
    pub cliques: Vec<FosElement>,
}

/// Grows, around every vertex, the maximal candidate cliques reached by
/// scanning candidates in ascending and in descending index order (a
/// candidate joins when adjacent to every current member). Duplicate
/// variable sets are removed; each clique's parents are all outside
/// variables some member is adjacent to.
pub fn clique_seed(vig: &Vig) -> CliqueSet {
    let n = vig.vertex_count();
    let mut seen: alloc::collections::BTreeSet<Vec<usize>> = Default::default();
    let mut cliques = Vec::new();
    for v in 0..n {
        for ascending in [true, false] {
            let members = grow_clique(vig, v, ascending);
            if seen.insert(members.clone()) {
                let mut parents: alloc::collections::BTreeSet<usize> = Default::default();
                for &m in &members {
                    for &u in vig.neighbors(m) {
                        if !members.contains(&u) {
                            parents.insert(u);
                        }
                    }
                }
                cliques.push(FosElement::new(members, parents.into_iter().collect()));
            }
        }
    }
    CliqueSet { cliques }
}

fn grow_clique(vig: &Vig, seed: usize, ascending: bool) -> Vec<usize> {
    let n = vig.vertex_count();
    let mut members = alloc::vec![seed];
    let order: Vec<usize> =
        if ascending { (0..n).collect() } else { (0..n).rev().collect() };
    for u in order {
        if u == seed {
            continue;
        }
        if members.iter().all(|&m| vig.has_edge(m, u)) {
            members.push(u);
        }
    }
    members.sort_unstable();
    members
}

/// Assembles a hybrid-GOM model: the factorization drives the generational
/// full-forward-sampling element (always applied first), followed by the
/// given factorized-level elements in a fresh random order each generation.
pub fn compose_hg(factorization: Factorization, fg_elements: Vec<FosElement>, kind: FosKind) -> FosModel {
    FosModel { kind, elements: fg_elements, factorization: Some(factorization) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_problem;
    use alloc::vec;

    fn rebgrid_vig() -> Vig {
        make_problem("rebgrid", 9).unwrap().analytic_vig().unwrap().clone()
    }

    fn factor_set(f: &Factorization) -> alloc::collections::BTreeSet<(Vec<usize>, Vec<usize>)> {
        f.factors.iter().map(|e| (e.variables.clone(), e.parents.clone())).collect()
    }

    #[test]
    fn mcond_rebgrid_from_vertex_8_matches_the_worked_factorization() {
        let f = factorize(&rebgrid_vig(), FactorizationKind::MCond, 8);
        let expected: alloc::collections::BTreeSet<(Vec<usize>, Vec<usize>)> = [
            (vec![0, 1, 2, 4], vec![]),
            (vec![3], vec![0, 1, 4]),
            (vec![5], vec![1, 2, 3, 4]),
            (vec![6], vec![0, 3, 4, 7]),
            (vec![7], vec![1, 3, 4, 5]),
            (vec![8], vec![2, 4, 5, 6, 7]),
        ]
        .into_iter()
        .collect();
        assert_eq!(factor_set(&f), expected);
        assert_eq!(f.factors.len(), 6);
        assert!(f.is_forward_valid());
        // partition property
        let mut all: Vec<usize> =
            f.factors.iter().flat_map(|e| e.variables.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn ucond_rebgrid_yields_nine_valid_factors() {
        let f = factorize(&rebgrid_vig(), FactorizationKind::UCond, 8);
        assert_eq!(f.factors.len(), 9);
        assert!(f.is_forward_valid());
        assert!(f.factors.iter().all(|e| e.variables.len() == 1));
    }

    #[test]
    fn edgeless_vig_gives_independent_factors() {
        let vig = Vig::new(5);
        let u = factorize(&vig, FactorizationKind::UCond, 3);
        assert_eq!(u.factors.len(), 5);
        assert!(u.factors.iter().all(|e| e.parents.is_empty()));
        let m = factorize(&vig, FactorizationKind::MCond, 3);
        assert_eq!(m.factors.len(), 5);
    }

    #[test]
    fn complete_vig_mcond_is_a_single_factor() {
        for n in [2usize, 4, 6] {
            let mut vig = Vig::new(n);
            for i in 0..n {
                for j in i + 1..n {
                    vig.add_edge(i, j);
                }
            }
            for start in 0..n {
                let f = factorize(&vig, FactorizationKind::MCond, start);
                assert_eq!(f.factors.len(), 1);
                assert_eq!(f.factors[0].variables, (0..n).collect::<Vec<_>>());
                assert!(f.factors[0].parents.is_empty());
            }
        }
    }

    #[test]
    fn disconnected_vig_restarts_per_component() {
        // components {0,2} and {1,3,4} (path 1-3-4)
        let vig = Vig::from_edges(5, [(0, 2), (1, 3), (3, 4)]);
        let f = factorize(&vig, FactorizationKind::MCond, 4);
        assert!(f.is_forward_valid());
        let mut all: Vec<usize> =
            f.factors.iter().flat_map(|e| e.variables.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn every_vig_edge_is_modeled_exactly_once() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.random_range(2..=32);
            let p = rng.random_range(0.05..0.6);
            let mut vig = Vig::new(n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(p) {
                        vig.add_edge(i, j);
                    }
                }
            }
            let start = rng.random_range(0..n);
            for kind in [FactorizationKind::UCond, FactorizationKind::MCond] {
                let f = factorize(&vig, kind, start);
                assert!(f.is_forward_valid(), "kind {kind:?}");
                // count every within-factor pair and every variable->parent
                // pair; together they must equal the VIG edge set exactly
                let mut counted = alloc::collections::BTreeMap::new();
                for factor in &f.factors {
                    for (ai, &a) in factor.variables.iter().enumerate() {
                        for &b in &factor.variables[ai + 1..] {
                            *counted.entry((a.min(b), a.max(b))).or_insert(0usize) += 1;
                        }
                        for &p in &factor.parents {
                            *counted.entry((a.min(p), a.max(p))).or_insert(0usize) += 1;
                        }
                    }
                }
                let edges: alloc::collections::BTreeMap<(usize, usize), usize> =
                    vig.edges().into_iter().map(|e| (e, 1usize)).collect();
                assert_eq!(counted, edges, "kind {kind:?} n {n}");
            }
        }
    }

    #[test]
    fn clique_seeding_rebgrid_finds_the_nine_listed_cliques() {
        let cs = clique_seed(&rebgrid_vig());
        let got: alloc::collections::BTreeSet<Vec<usize>> =
            cs.cliques.iter().map(|c| c.variables.clone()).collect();
        let expected: alloc::collections::BTreeSet<Vec<usize>> = [
            vec![0, 1, 3, 4],
            vec![1, 2, 4, 5],
            vec![3, 4, 6, 7],
            vec![4, 5, 7, 8],
            vec![0, 1, 2, 4],
            vec![2, 4, 5, 8],
            vec![4, 6, 7, 8],
            vec![0, 3, 4, 6],
            vec![1, 3, 4, 5, 7],
        ]
        .into_iter()
        .collect();
        assert_eq!(got, expected);
        assert_eq!(cs.cliques.len(), 9);
    }

    #[test]
    fn clique_parents_are_the_outside_neighbors() {
        let cs = clique_seed(&rebgrid_vig());
        let clique = cs
            .cliques
            .iter()
            .find(|c| c.variables == vec![0, 1, 3, 4])
            .expect("2x2 corner block present");
        assert_eq!(clique.parents, vec![2, 5, 6, 7, 8]);
    }

    #[test]
    fn edgeless_and_chain_cliques() {
        let cs = clique_seed(&Vig::new(4));
        assert_eq!(cs.cliques.len(), 4);
        assert!(cs.cliques.iter().all(|c| c.parents.is_empty()));

        let chain = Vig::from_edges(3, [(0, 1), (1, 2)]);
        let cs = clique_seed(&chain);
        let got: alloc::collections::BTreeSet<Vec<usize>> =
            cs.cliques.iter().map(|c| c.variables.clone()).collect();
        let expected: alloc::collections::BTreeSet<Vec<usize>> =
            [vec![0, 1], vec![1, 2]].into_iter().collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn clique_seeding_is_sound_covering_and_duplicate_free() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(77);
        for round in 0..100 {
            let n = rng.random_range(2..=16);
            let p = rng.random_range(0.1..0.7);
            let mut vig = Vig::new(n);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(p) {
                        vig.add_edge(i, j);
                    }
                }
            }
            let cs = clique_seed(&vig);
            let maximal = bron_kerbosch(&vig);
            let mut covered = alloc::vec![false; n];
            let mut seen = alloc::collections::BTreeSet::new();
            for c in &cs.cliques {
                assert!(vig.is_clique(&c.variables), "round {round}");
                assert!(
                    maximal.contains(&c.variables),
                    "round {round}: emitted clique must be maximal"
                );
                assert!(seen.insert(c.variables.clone()), "round {round}: duplicates");
                for &v in &c.variables {
                    covered[v] = true;
                }
            }
            assert!(covered.iter().all(|&c| c), "round {round}: coverage");
        }
    }

    /// Brute-force maximal-clique enumeration (test oracle).
    fn bron_kerbosch(vig: &Vig) -> alloc::collections::BTreeSet<Vec<usize>> {
        fn recurse(
            vig: &Vig,
            r: &mut Vec<usize>,
            mut p: Vec<usize>,
            mut x: Vec<usize>,
            out: &mut alloc::collections::BTreeSet<Vec<usize>>,
        ) {
            if p.is_empty() && x.is_empty() {
                let mut clique = r.clone();
                clique.sort_unstable();
                out.insert(clique);
                return;
            }
            while let Some(v) = p.pop() {
                let nv: Vec<usize> = vig.neighbors(v).to_vec();
                r.push(v);
                recurse(
                    vig,
                    r,
                    p.iter().copied().filter(|u| nv.contains(u)).collect(),
                    x.iter().copied().filter(|u| nv.contains(u)).collect(),
                    out,
                );
                r.pop();
                x.push(v);
            }
        }
        let mut out = Default::default();
        recurse(
            vig,
            &mut Vec::new(),
            (0..vig.vertex_count()).collect(),
            Vec::new(),
            &mut out,
        );
        out
    }

    #[test]
    fn compose_hg_shapes() {
        let vig = rebgrid_vig();
        let m = factorize(&vig, FactorizationKind::MCond, 8);
        let cs = clique_seed(&vig);
        let hg = compose_hg(m.clone(), m.factors.clone(), FosKind::MCond);
        assert_eq!(hg.element_count(), 6);
        assert!(hg.factorization.is_some());
        let hg_cs = compose_hg(m, cs.cliques, FosKind::CliqueSeeded);
        assert_eq!(hg_cs.element_count(), 9);
        let u = factorize(&vig, FactorizationKind::UCond, 0);
        let hg_u = compose_hg(u.clone(), u.factors.clone(), FosKind::UCond);
        assert_eq!(hg_u.element_count(), 9);
    }

    #[test]
    fn factorization_is_deterministic() {
        let vig = rebgrid_vig();
        for start in 0..9 {
            let a = factorize(&vig, FactorizationKind::MCond, start);
            let b = factorize(&vig, FactorizationKind::MCond, start);
            assert_eq!(a, b);
        }
    }
}
