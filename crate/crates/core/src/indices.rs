//! Structural indices of saturated maps.
//!
//! Sparsity is the least ratio `cut(S) / min(|S|, |V \ S|)` over proper
//! vertex subsets. On planar maps the cut around `S` is a closed walk in the
//! dual; weighting dual edges by subtree sizes of a primal spanning tree makes
//! the walk's total weight `±|S|` modulo `|V|`, so a breadth-first search over
//! (face, weight) states finds the optimum.

use std::collections::VecDeque;

use num_rational::Ratio;
use num_traits::Zero;

use crate::canonical::{Canonizer, SignatureContext};
use crate::error::{Error, Result};
use crate::model::{MapOfMotifs, MolecularMap};

pub type Rational = Ratio<u64>;

/// Default vertex cap of the exhaustive sparsity search.
pub const BRUTE_FORCE_CAP: usize = 20;

/// Indices reported for every unique map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexReport {
    pub largest_face: usize,
    pub face_gap: Rational,
    pub class_count: usize,
    pub chiral: bool,
    pub min_sparsity: Rational,
}

/// Largest face size and the gap `(s1 - s2) * F / (2E)` to the second largest.
pub fn face_stats(map: &MolecularMap) -> (usize, Rational) {
    let mut sizes = map.face_sizes();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    let largest = sizes.first().copied().unwrap_or(0);
    if sizes.len() < 2 || map.dart_count() == 0 {
        return (largest, Rational::zero());
    }
    let gap = (sizes[0] - sizes[1]) as u64 * sizes.len() as u64;
    (largest, Rational::new(gap, map.dart_count() as u64))
}

/// Exhaustive sparsity over all vertex subsets, in Gray-code order.
pub fn sparsity_bruteforce(map: &MolecularMap, cap: usize) -> Result<Rational> {
    let n = map.vertex_count();
    if n > cap {
        return Err(Error::TooLarge(n, cap));
    }
    if n < 2 {
        return Ok(Rational::zero());
    }
    // the last vertex stays outside S; complements cover the rest
    let m = n - 1;
    let mut in_s = vec![false; n];
    let mut size = 0u64;
    let mut cut: i64 = 0;
    let (mut best_num, mut best_den) = (u64::MAX, 1u64);
    for step in 1u64..1 << m {
        let v = step.trailing_zeros() as usize;
        let mut inside = 0i64;
        let mut outside = 0i64;
        for u in map.neighbors(v) {
            if u == v {
                continue;
            }
            if in_s[u] {
                inside += 1;
            } else {
                outside += 1;
            }
        }
        if in_s[v] {
            cut += inside - outside;
            size -= 1;
        } else {
            cut += outside - inside;
            size += 1;
        }
        in_s[v] = !in_s[v];
        let (num, den) = (cut as u64, size.min(n as u64 - size));
        if (num as u128) * (best_den as u128) < (best_num as u128) * (den as u128) {
            (best_num, best_den) = (num, den);
        }
    }
    Ok(Rational::new(best_num, best_den))
}

/// The dual of a molecular map with subtree-size weights on its darts.
#[derive(Clone, Debug)]
pub struct DualGraph {
    faces: usize,
    /// Per primal dart: (source face, target face, weight modulo n).
    darts: Vec<(u32, u32, u32)>,
    /// Outgoing primal darts per face.
    out: Vec<Vec<u32>>,
    twins: Vec<u32>,
}

impl DualGraph {
    pub fn build(map: &MolecularMap) -> Self {
        let n = map.vertex_count();
        let (face_of, faces) = map.face_labels();

        // primal breadth-first spanning tree from vertex 0
        let mut parent_dart = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        if n > 0 {
            seen[0] = true;
            order.push(0);
        }
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for s in 0..map.degree(v) {
                let u = map.neighbor(v, s);
                if !seen[u] {
                    seen[u] = true;
                    parent_dart[u] = map.dart(v, s);
                    order.push(u);
                }
            }
        }
        let mut sub = vec![1u64; n];
        for &v in order.iter().rev() {
            if parent_dart[v] != usize::MAX {
                let p = map.tail(parent_dart[v]);
                sub[p] += sub[v];
            }
        }
        let mut weight = vec![0u64; map.dart_count()];
        for v in 0..n {
            let d = parent_dart[v];
            if d != usize::MAX {
                weight[d] = sub[v] % n as u64;
                weight[map.reverse(d)] = (n as u64 - sub[v] % n as u64) % n as u64;
            }
        }
        let mut out = vec![Vec::new(); faces];
        let darts: Vec<(u32, u32, u32)> = (0..map.dart_count())
            .map(|d| {
                let (a, b) = (face_of[d], face_of[map.reverse(d)]);
                out[a as usize].push(d as u32);
                (a, b, weight[d] as u32)
            })
            .collect();
        let twins = (0..map.dart_count()).map(|d| map.reverse(d) as u32).collect();
        DualGraph { faces, darts, out, twins }
    }

    pub fn face_count(&self) -> usize {
        self.faces
    }

    /// Dual edges as `(face, face, weight)`, one per primal dart.
    pub fn darts(&self) -> &[(u32, u32, u32)] {
        &self.darts
    }

    /// Primal darts whose dual edges form a breadth-first spanning tree of the dual.
    pub fn spanning_tree(&self) -> Vec<usize> {
        let mut seen = vec![false; self.faces];
        let mut tree = Vec::new();
        let mut queue = VecDeque::new();
        if self.faces > 0 {
            seen[0] = true;
            queue.push_back(0usize);
        }
        while let Some(f) = queue.pop_front() {
            for &d in &self.out[f] {
                let t = self.darts[d as usize].1 as usize;
                if !seen[t] {
                    seen[t] = true;
                    tree.push(d as usize);
                    queue.push_back(t);
                }
            }
        }
        tree
    }

    /// One cycle per dual edge outside the spanning tree, as primal darts.
    pub fn fundamental_cycles(&self) -> Vec<Vec<usize>> {
        let tree = self.spanning_tree();
        let mut parent: Vec<Option<usize>> = vec![None; self.faces];
        let mut depth = vec![0usize; self.faces];
        let mut in_tree = vec![false; self.darts.len()];
        for &d in &tree {
            let (a, b, _) = self.darts[d];
            parent[b as usize] = Some(d);
            depth[b as usize] = depth[a as usize] + 1;
            in_tree[d] = true;
            in_tree[self.twin(d)] = true;
        }
        let mut cycles = Vec::new();
        for (d, &(a, b, _)) in self.darts.iter().enumerate() {
            if in_tree[d] || self.twin(d) < d {
                continue;
            }
            // a -> b across d, then up from b and down to a through the tree
            let (mut x, mut y) = (b as usize, a as usize);
            let mut up = Vec::new();
            let mut down = Vec::new();
            while x != y {
                if depth[x] >= depth[y] {
                    let e = parent[x].expect("tree edge");
                    up.push(self.twin(e));
                    x = self.darts[e].0 as usize;
                } else {
                    let e = parent[y].expect("tree edge");
                    down.push(e);
                    y = self.darts[e].0 as usize;
                }
            }
            let mut cycle = vec![d];
            cycle.extend(up);
            cycle.extend(down.into_iter().rev());
            cycles.push(cycle);
        }
        cycles
    }

    /// Primal dart crossing the same edge in the other direction.
    pub fn twin(&self, d: usize) -> usize {
        self.twins[d] as usize
    }
}

/// Sparsity through shortest weighted closed walks in the dual.
pub fn sparsity_planar(map: &MolecularMap) -> Rational {
    sparsity_planar_with(map, true)
}

/// As [`sparsity_planar`]; `prune` stops each search once no shorter cut can win.
pub fn sparsity_planar_with(map: &MolecularMap, prune: bool) -> Rational {
    let n = map.vertex_count();
    if n < 2 {
        return Rational::zero();
    }
    let dual = DualGraph::build(map);
    let half = (n / 2) as u64;
    let mut best = Rational::from_integer((0..n).map(|v| map.degree(v)).min().unwrap_or(0) as u64);
    let nn = n as u32;
    let states = dual.faces * n;
    let mut dist = vec![u32::MAX; states];
    let mut queue = VecDeque::with_capacity(states);
    for f0 in 0..dual.faces {
        dist.iter_mut().for_each(|x| *x = u32::MAX);
        queue.clear();
        dist[f0 * n] = 0;
        queue.push_back((f0 as u32, 0u32));
        while let Some((f, s)) = queue.pop_front() {
            let d0 = dist[f as usize * n + s as usize];
            if prune && Rational::new(d0 as u64 + 1, half) >= best {
                break;
            }
            for &d in &dual.out[f as usize] {
                let (_, t, w) = dual.darts[d as usize];
                let s2 = (s + w) % nn;
                let idx = t as usize * n + s2 as usize;
                if t as usize == f0 && s2 != 0 {
                    let m = (s2 as u64).min(n as u64 - s2 as u64);
                    let r = Rational::new(d0 as u64 + 1, m);
                    if r < best {
                        best = r;
                    }
                }
                if dist[idx] == u32::MAX {
                    dist[idx] = d0 + 1;
                    queue.push_back((t, s2));
                }
            }
        }
    }
    best
}

/// Computes every index of a saturated map.
pub fn compute_indices(ctx: &SignatureContext, map: &MapOfMotifs) -> Result<IndexReport> {
    let mm = map.to_molecular_map()?;
    let (largest_face, face_gap) = face_stats(&mm);
    let mut canon = Canonizer::new();
    let classes = canon.equivalence_classes(ctx, map)?;
    let class_count = classes.iter().max().map_or(0, |m| m + 1);
    let chiral = canon.canonical(ctx, map)? != canon.canonical(ctx, &map.mirror())?;
    Ok(IndexReport { largest_face, face_gap, class_count, chiral, min_sparsity: sparsity_planar(&mm) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::BackboneMode;
    use crate::canonical::tests::saturated_maps;
    use crate::canonical::canonical_signature;
    use proptest::prelude::*;
    use std::collections::HashSet;

    /// Direct evaluation of every subset, without incremental updates.
    fn sparsity_naive(map: &MolecularMap) -> Rational {
        let n = map.vertex_count();
        let mut best: Option<Rational> = None;
        for mask in 1u32..(1 << n) - 1 {
            let size = mask.count_ones() as u64;
            let cut = (0..n)
                .filter(|&v| mask >> v & 1 == 1)
                .flat_map(|v| map.neighbors(v))
                .filter(|&u| mask >> u & 1 == 0)
                .count() as u64;
            let r = Rational::new(cut, size.min(n as u64 - size));
            if best.map_or(true, |b| r < b) {
                best = Some(r);
            }
        }
        best.unwrap_or_else(Rational::zero)
    }

    fn unique(text: &str, n: usize, mode: BackboneMode) -> Vec<MapOfMotifs> {
        let (base, maps) = saturated_maps(text, n, mode);
        let ctx = SignatureContext::new(&base, n);
        let mut seen = HashSet::new();
        maps.into_iter().filter(|m| seen.insert(canonical_signature(&ctx, m).unwrap())).collect()
    }

    const YI: &str = "colors: a\nmotif Y: ~a ~a ~a\nmotif I: a a\n";
    const JV: &str = "colors: a b\nmotif J: a b\nmotif V1: ~a ~a b\nmotif V2: a ~b ~b\n";

    #[test]
    fn planar_sparsity_matches_both_oracles() {
        for (text, n) in [(YI, 5), (YI, 10), (JV, 6), (JV, 9)] {
            for m in unique(text, n, BackboneMode::Tree) {
                let mm = m.to_molecular_map().unwrap();
                let naive = sparsity_naive(&mm);
                assert_eq!(sparsity_bruteforce(&mm, BRUTE_FORCE_CAP).unwrap(), naive);
                assert_eq!(sparsity_planar(&mm), naive);
                assert_eq!(sparsity_planar_with(&mm, false), naive);
            }
        }
    }

    #[test]
    fn dual_cycle_space_has_the_right_dimension() {
        for m in unique(JV, 9, BackboneMode::Path) {
            let mm = m.to_molecular_map().unwrap();
            let dual = DualGraph::build(&mm);
            let cycles = dual.fundamental_cycles();
            assert_eq!(cycles.len(), mm.edge_count() + 1 - dual.face_count());
            for c in cycles {
                for w in c.windows(2) {
                    assert_eq!(dual.darts()[w[0]].1, dual.darts()[w[1]].0);
                }
                assert_eq!(dual.darts()[*c.last().unwrap()].1, dual.darts()[c[0]].0);
            }
            // Euler's formula on the map
            assert_eq!(mm.vertex_count() + dual.face_count(), mm.edge_count() + 2);
        }
    }

    #[test]
    fn face_stats_of_a_tetrahedral_cage() {
        let maps = unique(YI, 10, BackboneMode::Tree);
        let stats: HashSet<(usize, Rational)> =
            maps.iter().map(|m| face_stats(&m.to_molecular_map().unwrap())).collect();
        // the tetrahedron has four hexagonal faces: zero gap
        assert!(stats.contains(&(6, Rational::zero())));
    }

    #[test]
    fn brute_force_respects_its_cap() {
        let maps = unique(JV, 9, BackboneMode::Path);
        let mm = maps[0].to_molecular_map().unwrap();
        assert_eq!(sparsity_bruteforce(&mm, 8), Err(Error::TooLarge(9, 8)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn sparsity_is_invariant_under_mirroring(i in 0usize..236) {
            let maps = unique(JV, 9, BackboneMode::Path);
            let m = &maps[i % maps.len()];
            let a = sparsity_planar(&m.to_molecular_map().unwrap());
            let b = sparsity_planar(&m.mirror().to_molecular_map().unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
