//! Saturating a backbone by folding its outlines.
//!
//! The free ports met while walking a face form a cyclic word. A fold pairs
//! every letter with a complementary letter so that no two pairs cross;
//! bonding the pairs inside the face keeps the map planar.

use crate::error::{Error, Result};
use crate::model::{Color, Entry, MapOfMotifs, PortRef};

/// A cyclic word of free ports read along one face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Word {
    pub letters: Vec<Color>,
    pub origin: Vec<PortRef>,
}

impl Word {
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }
}

/// Outline words of every face holding a free port, each rotated to start
/// at its smallest port, ordered by that port.
pub fn outlines(map: &MapOfMotifs) -> Vec<Word> {
    let mut out: Vec<Word> = map
        .faces()
        .into_iter()
        .filter_map(|face| {
            let free: Vec<PortRef> = face.into_iter().filter(|&p| map.entry(p).is_free()).collect();
            let start = (0..free.len()).min_by_key(|&i| free[i])?;
            let origin: Vec<PortRef> = free[start..].iter().chain(&free[..start]).copied().collect();
            let letters = origin.iter().map(|&p| map.entry(p).color()).collect();
            Some(Word { letters, origin })
        })
        .collect();
    out.sort_by_key(|w| w.origin[0]);
    out
}

/// Cancels adjacent complementary letters; foldable iff nothing remains.
pub fn is_foldable(letters: &[Color]) -> bool {
    if letters.len() % 2 == 1 {
        return false;
    }
    let mut stack: Vec<Color> = Vec::with_capacity(letters.len());
    for &c in letters {
        match stack.last() {
            Some(&t) if t.complements(c) => {
                stack.pop();
            }
            _ => stack.push(c),
        }
    }
    stack.is_empty()
}

/// `M[i][j]`: the factor `i..=j` folds on its own. Empty factors fold.
#[derive(Clone, Debug, Default)]
pub struct FoldMatrix {
    len: usize,
    m: Vec<bool>,
}

impl FoldMatrix {
    pub fn build(letters: &[Color]) -> Self {
        let mut fm = FoldMatrix::default();
        fm.rebuild(letters, &mut Vec::new());
        fm
    }

    fn rebuild(&mut self, letters: &[Color], stack: &mut Vec<Color>) {
        let l = letters.len();
        self.len = l;
        self.m.clear();
        self.m.resize(l * l, false);
        for i in 0..l {
            stack.clear();
            for j in i..l {
                let c = letters[j];
                match stack.last() {
                    Some(&t) if t.complements(c) => {
                        stack.pop();
                    }
                    _ => stack.push(c),
                }
                self.m[i * l + j] = stack.is_empty();
            }
        }
    }

    /// Factor `i..=j` folds; `j < i` denotes the empty factor.
    #[inline]
    pub fn folds(&self, i: usize, j: isize) -> bool {
        j < i as isize || self.m[i * self.len + j as usize]
    }
}

/// Enumerates every fold of a word, as lists of index pairs `(i, k)` with `i < k`.
pub fn enum_fold_results<F: FnMut(&[(usize, usize)])>(letters: &[Color], mut sink: F) -> Result<()> {
    if !is_foldable(letters) {
        return Err(Error::NotFoldable);
    }
    let fm = FoldMatrix::build(letters);
    let mut pairs = Vec::with_capacity(letters.len() / 2);
    let mut segs = Vec::with_capacity(letters.len());
    if !letters.is_empty() {
        segs.push((0, letters.len() - 1));
    }
    fold_rec(letters, &fm, &mut segs, &mut pairs, &mut sink);
    Ok(())
}

fn fold_rec<F: FnMut(&[(usize, usize)])>(
    letters: &[Color],
    fm: &FoldMatrix,
    segs: &mut Vec<(usize, usize)>,
    pairs: &mut Vec<(usize, usize)>,
    sink: &mut F,
) {
    let Some((i, j)) = segs.pop() else {
        sink(pairs);
        return;
    };
    let mut k = i + 1;
    while k <= j {
        if letters[i].complements(letters[k])
            && fm.folds(i + 1, k as isize - 1)
            && fm.folds(k + 1, j as isize)
        {
            let depth = segs.len();
            if k < j {
                segs.push((k + 1, j));
            }
            if k > i + 1 {
                segs.push((i + 1, k - 1));
            }
            pairs.push((i, k));
            fold_rec(letters, fm, segs, pairs, sink);
            pairs.pop();
            segs.truncate(depth);
        }
        k += 2;
    }
    segs.push((i, j));
}

/// Returns a copy of `map` with the fold applied to one outline.
pub fn apply_result(map: &MapOfMotifs, outline: &Word, pairs: &[(usize, usize)]) -> Result<MapOfMotifs> {
    let l = outline.len();
    let mut used = vec![false; l];
    for &(i, k) in pairs {
        if i >= l || k >= l {
            return Err(Error::InvalidPair(i, k, "index out of range"));
        }
        if used[i] || used[k] || i == k {
            return Err(Error::InvalidPair(i, k, "index used twice"));
        }
        used[i] = true;
        used[k] = true;
        if !outline.letters[i].complements(outline.letters[k]) {
            return Err(Error::InvalidPair(i, k, "colors are not complementary"));
        }
    }
    for &(i, k) in pairs {
        let (lo, hi) = (i.min(k), i.max(k));
        for &(x, y) in pairs {
            let (a, b) = (x.min(y), x.max(y));
            if lo < a && a < hi && hi < b {
                return Err(Error::InvalidPair(i, k, "pairs cross"));
            }
        }
    }
    let mut out = map.clone();
    for &(i, k) in pairs {
        out.try_bond(outline.origin[i], outline.origin[k])?;
    }
    Ok(out)
}

/// Reusable buffers for saturating many backbones.
#[derive(Default)]
pub struct Folder {
    seen: Vec<bool>,
    words: Vec<(Vec<Color>, Vec<PortRef>)>,
    matrices: Vec<FoldMatrix>,
    stack: Vec<Color>,
}

impl Folder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fills the outline buffers; `false` as soon as one outline cannot fold.
    fn load(&mut self, map: &MapOfMotifs) -> usize {
        let darts = map.port_count();
        self.seen.clear();
        self.seen.resize(darts, false);
        let mut count = 0;
        let offsets = map.offsets();
        for c in 0..map.size() {
            for d0 in offsets[c] as usize..offsets[c + 1] as usize {
                if self.seen[d0] {
                    continue;
                }
                if count == self.words.len() {
                    self.words.push(Default::default());
                }
                let (letters, origin) = &mut self.words[count];
                letters.clear();
                origin.clear();
                let mut p = PortRef::new(c, d0 - offsets[c] as usize);
                loop {
                    let d = map.dart(p);
                    if self.seen[d] {
                        break;
                    }
                    self.seen[d] = true;
                    if let Entry::Free(col) = map.flat_entries()[d] {
                        letters.push(col);
                        origin.push(p);
                    }
                    p = map.face_next(p);
                }
                if !letters.is_empty() {
                    if !is_foldable(letters) {
                        return usize::MAX;
                    }
                    count += 1;
                }
            }
        }
        count
    }

    /// Whether every outline of `map` is foldable.
    pub fn foldable(&mut self, map: &MapOfMotifs) -> bool {
        self.load(map) != usize::MAX
    }

    /// Calls `sink` on every saturation of `map` obtained by folding all outlines.
    /// Returns the number of saturated maps produced.
    pub fn saturate_all<F: FnMut(&MapOfMotifs)>(&mut self, map: &MapOfMotifs, mut sink: F) -> usize {
        let count = self.load(map);
        if count == usize::MAX {
            return 0;
        }
        while self.matrices.len() < count {
            self.matrices.push(FoldMatrix::default());
        }
        for t in 0..count {
            self.matrices[t].rebuild(&self.words[t].0, &mut self.stack);
        }
        let mut work = map.clone();
        let mut produced = 0;
        let mut segs = Vec::new();
        let mut pairs = Vec::new();
        self.product(0, count, &mut work, &mut segs, &mut pairs, &mut |m| {
            produced += 1;
            sink(m)
        });
        produced
    }

    fn product<F: FnMut(&MapOfMotifs)>(
        &self,
        t: usize,
        count: usize,
        work: &mut MapOfMotifs,
        segs: &mut Vec<(usize, usize)>,
        pairs: &mut Vec<(usize, usize)>,
        sink: &mut F,
    ) {
        if t == count {
            sink(work);
            return;
        }
        let (letters, origin) = &self.words[t];
        segs.clear();
        pairs.clear();
        segs.push((0, letters.len() - 1));
        let mut results: Vec<Vec<(usize, usize)>> = Vec::new();
        fold_rec(letters, &self.matrices[t], segs, pairs, &mut |p: &[(usize, usize)]| results.push(p.to_vec()));
        for r in results {
            for &(i, k) in &r {
                work.bond(origin[i], origin[k]);
            }
            self.product(t + 1, count, work, segs, pairs, sink);
            for &(i, _) in &r {
                work.unbond(origin[i]);
            }
        }
    }
}

/// Every saturation of `map` reachable by folding its outlines.
pub fn saturate_all<F: FnMut(&MapOfMotifs)>(map: &MapOfMotifs, sink: F) -> usize {
    Folder::new().saturate_all(map, sink)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn word(bits: u32, len: usize) -> Vec<Color> {
        (0..len).map(|i| Color((bits >> i & 1) as u8)).collect()
    }

    /// All non-crossing complementary perfect matchings, by exhaustive search.
    fn oracle(letters: &[Color]) -> BTreeSet<Vec<(usize, usize)>> {
        fn rec(letters: &[Color], used: &mut Vec<bool>, acc: &mut Vec<(usize, usize)>, out: &mut BTreeSet<Vec<(usize, usize)>>) {
            let Some(i) = used.iter().position(|u| !u) else {
                let mut v = acc.clone();
                v.sort();
                out.insert(v);
                return;
            };
            used[i] = true;
            for k in i + 1..letters.len() {
                if used[k] || !letters[i].complements(letters[k]) {
                    continue;
                }
                let crosses = acc.iter().any(|&(a, b)| (a < i && i < b) != (a < k && k < b));
                if crosses {
                    continue;
                }
                used[k] = true;
                acc.push((i, k));
                rec(letters, used, acc, out);
                acc.pop();
                used[k] = false;
            }
            used[i] = false;
        }
        let mut out = BTreeSet::new();
        rec(letters, &mut vec![false; letters.len()], &mut Vec::new(), &mut out);
        out
    }

    fn enumerate(letters: &[Color]) -> Option<BTreeSet<Vec<(usize, usize)>>> {
        let mut got = BTreeSet::new();
        enum_fold_results(letters, |p| {
            let mut v = p.to_vec();
            v.sort();
            assert!(got.insert(v), "duplicate fold");
        })
        .ok()?;
        Some(got)
    }

    #[test]
    fn enumeration_matches_exhaustive_search_up_to_length_10() {
        for len in 0..=10 {
            for bits in 0..1u32 << len {
                let w = word(bits, len);
                let want = oracle(&w);
                match enumerate(&w) {
                    Some(got) => assert_eq!(got, want, "{bits:b}"),
                    None => assert!(want.is_empty(), "{bits:b}"),
                }
                assert_eq!(is_foldable(&w), !want.is_empty());
            }
        }
    }

    #[test]
    fn fold_matrix_matches_direct_check() {
        let w = word(0b0110_1001_1010, 12);
        let fm = FoldMatrix::build(&w);
        for i in 0..12 {
            for j in i..12 {
                assert_eq!(fm.folds(i, j as isize), is_foldable(&w[i..=j]));
            }
        }
    }

    #[test]
    fn apply_result_rejects_bad_pairs() {
        let w = Word {
            letters: word(0b1010, 4),
            origin: (0..4).map(|p| PortRef::new(0, p)).collect(),
        };
        let mut base = MapOfMotifs::new();
        base.push_center_colors(0, &w.letters);
        assert!(matches!(apply_result(&base, &w, &[(0, 2), (1, 3)]), Err(Error::InvalidPair(..))));
        assert!(matches!(apply_result(&base, &w, &[(0, 1), (1, 2)]), Err(Error::InvalidPair(..))));
        let ok = apply_result(&base, &w, &[(0, 3), (1, 2)]).unwrap();
        assert!(ok.is_saturated());
    }

    proptest! {
        #[test]
        fn reduction_is_confluent(bits in 0u32..1 << 20, len in 0usize..=20, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let w = word(bits, len);
            let expect = is_foldable(&w);
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let mut cur = w.clone();
            loop {
                let spots: Vec<usize> = (0..cur.len().saturating_sub(1))
                    .filter(|&i| cur[i].complements(cur[i + 1]))
                    .collect();
                if spots.is_empty() { break; }
                let i = spots[rng.gen_range(0..spots.len())];
                cur.drain(i..i + 2);
            }
            prop_assert_eq!(cur.is_empty(), expect);
        }
    }
}
