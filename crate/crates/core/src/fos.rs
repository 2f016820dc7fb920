//! FOS linkage models.
//!
//! Non-conditional family-of-subsets models: univariate, full, marginal
//! product, and the fitness-based linkage tree built by UPGMA over dependency
//! strengths, bounded to a maximum element size and pruned so that groups of
//! pairwise jointly dependent variables are kept only as their largest
//! element.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use serde::Serialize;

use crate::conditional::Factorization;
use crate::linkage::DependencyMatrix;

/// Default cap on linkage-tree element sizes (further capped by dimension).
pub const DEFAULT_MAX_ELEMENT_SIZE: usize = 100;

/// One FOS element: the sampled variable set plus an optional conditioning
/// (parent) set; the sets are disjoint and kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FosElement {
    pub variables: Vec<usize>,
    pub parents: Vec<usize>,
}

impl FosElement {
    pub fn new(mut variables: Vec<usize>, mut parents: Vec<usize>) -> Self {
        variables.sort_unstable();
        variables.dedup();
        parents.sort_unstable();
        parents.dedup();
        debug_assert!(!variables.is_empty(), "FOS element needs variables");
        debug_assert!(
            variables.iter().all(|v| !parents.contains(v)),
            "variables and parents must be disjoint"
        );
        FosElement { variables, parents }
    }

    pub fn unconditional(variables: Vec<usize>) -> Self {
        FosElement::new(variables, Vec::new())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FosKind {
    Univariate,
    Full,
    MarginalProduct,
    LinkageTree,
    UCond,
    MCond,
    CliqueSeeded,
}

/// A linkage model: an ordered list of FOS elements, plus, for hybrid
/// conditional models, the factorization behind the generational
/// full-forward-sampling element (applied first each generation).
#[derive(Debug, Clone, PartialEq)]
pub struct FosModel {
    pub kind: FosKind,
    pub elements: Vec<FosElement>,
    pub factorization: Option<Factorization>,
}

impl FosModel {
    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    /// Marginal-product models must partition the variable index set.
    pub fn assert_marginal_product(&self, dimension: usize) {
        let mut seen = vec![false; dimension];
        for e in &self.elements {
            for &v in &e.variables {
                assert!(!seen[v], "marginal product elements must be disjoint");
                seen[v] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "marginal product must cover all variables");
    }

    /// Audit form for JSON export; the generational element, when present,
    /// is listed first as the full variable set.
    pub fn audit(&self) -> FosAudit {
        let mut elements = Vec::new();
        if let Some(f) = &self.factorization {
            let mut all: Vec<usize> =
                f.factors.iter().flat_map(|e| e.variables.iter().copied()).collect();
            all.sort_unstable();
            elements.push(FosElementAudit {
                variables: all,
                parents: Vec::new(),
                generational: true,
            });
        }
        elements.extend(self.elements.iter().map(|e| FosElementAudit {
            variables: e.variables.clone(),
            parents: e.parents.clone(),
            generational: false,
        }));
        FosAudit { schema: "fos/1", kind: self.kind, elements }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FosAudit {
    pub schema: &'static str,
    pub kind: FosKind,
    pub elements: Vec<FosElementAudit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FosElementAudit {
    pub variables: Vec<usize>,
    pub parents: Vec<usize>,
    pub generational: bool,
}

/// Generic structure-free models.
pub fn build_static(kind: FosKind, dimension: usize) -> FosModel {
    match kind {
        FosKind::Univariate => FosModel {
            kind,
            elements: (0..dimension)
                .map(|i| FosElement::unconditional(vec![i]))
                .collect(),
            factorization: None,
        },
        FosKind::Full => FosModel {
            kind,
            elements: vec![FosElement::unconditional((0..dimension).collect())],
            factorization: None,
        },
        other => panic!("build_static only supports univariate/full, got {other:?}"),
    }
}

/// Bounded, pruned fitness-based linkage tree.
///
/// UPGMA agglomeration over DSM strengths (average linkage, maximizing
/// similarity). Merge nodes join the FOS only if their merge similarity is
/// positive and their size does not exceed `max_element_size`; merging
/// itself always continues to the root. Ties between merge candidates are
/// broken by the lexicographically smallest (min-id, max-id) key, where a
/// cluster's id is its smallest member. Pruning then drops any two elements
/// whose disjoint union is another element all of whose variable pairs carry
/// nonzero strength.
pub fn build_linkage_tree(dsm: &DependencyMatrix, max_element_size: usize) -> FosModel {
    let n = dsm.dimension();
    #[derive(Clone)]
    struct Cluster {
        members: Vec<usize>,
        id: usize,
    }
    let mut clusters: Vec<Option<Cluster>> =
        (0..n).map(|i| Some(Cluster { members: vec![i], id: i })).collect();
    // average pairwise strength between clusters, indexed by slot
    let mut sim = vec![0.0f64; n * n];
    for a in 0..n {
        for b in a + 1..n {
            sim[a * n + b] = dsm.strength(a, b);
        }
    }
    let at = |s: &[f64], a: usize, b: usize| if a < b { s[a * n + b] } else { s[b * n + a] };

    // merge record: (members sorted, merge similarity, child slot ids)
    let mut merges: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut tree_triples: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)> = Vec::new();
    let mut active: Vec<usize> = (0..n).collect();
    while active.len() > 1 {
        let mut best: Option<(f64, (usize, usize), (usize, usize))> = None;
        for (ai, &a) in active.iter().enumerate() {
            for &b in &active[ai + 1..] {
                let s = at(&sim, a, b);
                let ca = clusters[a].as_ref().unwrap();
                let cb = clusters[b].as_ref().unwrap();
                let key = (ca.id.min(cb.id), ca.id.max(cb.id));
                let better = match &best {
                    None => true,
                    Some((bs, bkey, _)) => s > *bs || (s == *bs && key < *bkey),
                };
                if better {
                    best = Some((s, key, (a, b)));
                }
            }
        }
        let (similarity, _, (a, b)) = best.unwrap();
        let ca = clusters[a].take().unwrap();
        let cb = clusters[b].take().unwrap();
        let mut members = ca.members.clone();
        members.extend_from_slice(&cb.members);
        members.sort_unstable();
        tree_triples.push((ca.members.clone(), cb.members.clone(), members.clone()));
        merges.push((members.clone(), similarity));
        // UPGMA update: size-weighted average of the two children rows
        let (wa, wb) = (ca.members.len() as f64, cb.members.len() as f64);
        for &other in &active {
            if other == a || other == b {
                continue;
            }
            let merged = (wa * at(&sim, a, other) + wb * at(&sim, b, other)) / (wa + wb);
            let (lo, hi) = if a < other { (a, other) } else { (other, a) };
            sim[lo * n + hi] = merged;
        }
        clusters[a] = Some(Cluster { members, id: ca.id.min(cb.id) });
        active.retain(|&x| x != b);
    }

    // collect candidate elements: singletons plus positive-similarity merges
    // within the size bound
    let mut kept: BTreeSet<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for (members, similarity) in &merges {
        if *similarity > 0.0 && members.len() <= max_element_size {
            kept.insert(members.clone());
        }
    }

    // prune bottom-up along the tree: children of a fully pairwise-dependent
    // kept parent are dropped
    for (left, right, parent) in &tree_triples {
        if kept.contains(parent)
            && kept.contains(left)
            && kept.contains(right)
            && fully_dependent(dsm, parent)
        {
            kept.remove(left);
            kept.remove(right);
        }
    }

    let elements = kept
        .into_iter()
        .map(FosElement::unconditional)
        .collect();
    FosModel { kind: FosKind::LinkageTree, elements, factorization: None }
}

fn fully_dependent(dsm: &DependencyMatrix, members: &[usize]) -> bool {
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            if dsm.strength(a, b) <= 0.0 {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dsm_from(entries: &[(usize, usize, f64)], n: usize) -> DependencyMatrix {
        let mut dsm = DependencyMatrix::new(n);
        for &(i, j, d) in entries {
            dsm.set_strength(i, j, d);
        }
        dsm
    }

    fn element_sets(model: &FosModel) -> Vec<Vec<usize>> {
        model.elements.iter().map(|e| e.variables.clone()).collect()
    }

    #[test]
    fn static_models() {
        let u = build_static(FosKind::Univariate, 3);
        assert_eq!(element_sets(&u), vec![vec![0], vec![1], vec![2]]);
        u.assert_marginal_product(3);
        let f = build_static(FosKind::Full, 3);
        assert_eq!(element_sets(&f), vec![vec![0, 1, 2]]);
        f.assert_marginal_product(3);
    }

    #[test]
    fn two_blocks_prune_to_the_blocks() {
        // fully dependent {0,1} and {2,3}, zero across: the root merge has
        // similarity zero and is excluded, the block merges absorb their
        // singletons
        let dsm = dsm_from(&[(0, 1, 0.9), (2, 3, 0.8)], 4);
        let model = build_linkage_tree(&dsm, 100);
        assert_eq!(element_sets(&model), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn all_zero_dsm_keeps_only_singletons() {
        let dsm = DependencyMatrix::new(5);
        let model = build_linkage_tree(&dsm, 100);
        assert_eq!(
            element_sets(&model),
            vec![vec![0], vec![1], vec![2], vec![3], vec![4]]
        );
    }

    #[test]
    fn chain_keeps_partial_merges() {
        let dsm = dsm_from(&[(0, 1, 0.9), (1, 2, 0.5)], 3);
        let model = build_linkage_tree(&dsm, 100);
        // {0,1} absorbs its singletons; the root {0,1,2} merges at positive
        // average similarity but 0-2 are not directly dependent, so {2} and
        // the root both stay
        assert_eq!(element_sets(&model), vec![vec![0, 1], vec![0, 1, 2], vec![2]]);
    }

    #[test]
    fn bounding_excludes_oversized_elements() {
        let mut entries = Vec::new();
        for i in 0..6 {
            for j in i + 1..6 {
                entries.push((i, j, 0.9));
            }
        }
        let dsm = dsm_from(&entries, 6);
        let bounded = build_linkage_tree(&dsm, 3);
        for e in &bounded.elements {
            assert!(e.variables.len() <= 3);
        }
        // unbounded: the fully dependent root swallows everything
        let unbounded = build_linkage_tree(&dsm, 100);
        assert_eq!(element_sets(&unbounded), vec![vec![0, 1, 2, 3, 4, 5]]);
    }

    #[test]
    fn pruning_is_a_fixpoint() {
        let dsm = dsm_from(&[(0, 1, 0.9), (2, 3, 0.8), (1, 2, 0.2)], 4);
        let model = build_linkage_tree(&dsm, 100);
        // re-apply the pruning rule generically: no triple (a, b, k) with
        // disjoint union and full dependency may remain
        let sets = element_sets(&model);
        for (ai, a) in sets.iter().enumerate() {
            for (bi, b) in sets.iter().enumerate() {
                if ai == bi || a.iter().any(|v| b.contains(v)) {
                    continue;
                }
                let mut union: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
                union.sort_unstable();
                if sets.contains(&union) {
                    assert!(
                        !fully_dependent(&dsm, &union),
                        "unpruned triple {a:?} {b:?} -> {union:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn upgma_is_deterministic() {
        let mut entries = Vec::new();
        // symmetric ties everywhere: determinism comes from the tie-break
        for i in 0..5 {
            for j in i + 1..5 {
                entries.push((i, j, 0.5));
            }
        }
        let dsm = dsm_from(&entries, 5);
        let a = build_linkage_tree(&dsm, 100);
        let b = build_linkage_tree(&dsm, 100);
        assert_eq!(a, b);
        assert_eq!(element_sets(&a), vec![(0..5).collect::<Vec<_>>()]);
    }

    #[test]
    fn audit_lists_elements() {
        let model = build_static(FosKind::Univariate, 2);
        let audit = model.audit();
        assert_eq!(audit.elements.len(), 2);
        assert!(audit.elements.iter().all(|e| !e.generational));
    }
}
