//! Backbone enumeration: paths, plane trees and cycles of motifs.
//!
//! A reach table answers, for a remaining size and a required characteristic
//! vector, whether some completion exists. With a table attached the
//! generators only emit almost-foldable backbones.

use std::collections::HashSet;
use std::sync::atomic::{AtomicBool, Ordering};

use crate::error::{Error, Result};
use crate::model::{Attachment, Color, Entry, MapOfMotifs, MotifBase, PortRef};

const MAX_TABLE: usize = 1 << 27;

/// Per positive color: positive ports minus negative ports.
pub type CharacteristicVector = Vec<i32>;

/// Sum of the characteristic vectors of the centers of a map.
pub fn characteristic(base: &MotifBase, map: &MapOfMotifs) -> CharacteristicVector {
    base.characteristic_of(&map.motif_counts(base.len()))
}

#[derive(Clone, Debug)]
struct Grid {
    half: i32,
    k: usize,
}

impl Grid {
    fn len(&self) -> usize {
        (2 * self.half as usize + 1).pow(self.k as u32)
    }

    #[inline]
    fn index(&self, v: &[i32]) -> Option<usize> {
        let w = 2 * self.half + 1;
        let mut idx = 0usize;
        for &x in v.iter().rev() {
            if x < -self.half || x > self.half {
                return None;
            }
            idx = idx * w as usize + (x + self.half) as usize;
        }
        Some(idx)
    }

    fn vector(&self, mut idx: usize) -> Vec<i32> {
        let w = (2 * self.half + 1) as usize;
        (0..self.k)
            .map(|_| {
                let x = (idx % w) as i32 - self.half;
                idx /= w;
                x
            })
            .collect()
    }
}

/// Completion feasibility for paths and forests.
#[derive(Clone, Debug)]
pub struct ReachTable {
    n: usize,
    grids: Vec<Grid>,
    /// `path[r][C]`: bitmask of entry colors `a` such that some path of `r`
    /// motifs, entered through a port of color `a`, sums to `C`.
    path: Vec<Vec<u64>>,
    /// `forest[r][C]`: some multiset of `r` motifs sums to `C`.
    forest: Vec<Vec<bool>>,
}

impl ReachTable {
    pub fn precompute(base: &MotifBase, n: usize) -> Result<Self> {
        let k = base.alphabet().len();
        if 2 * k > 64 {
            return Err(Error::TableTooLarge(usize::MAX));
        }
        let chv: Vec<Vec<i32>> = base.motifs().iter().map(|m| m.characteristic(k)).collect();
        let f = chv.iter().flatten().map(|x| x.abs()).max().unwrap_or(0);
        let grids: Vec<Grid> = (0..=n).map(|r| Grid { half: r as i32 * f, k }).collect();
        let total: usize = grids.iter().map(Grid::len).sum();
        if total > MAX_TABLE {
            return Err(Error::TableTooLarge(total));
        }

        // (entry color, exit color, vector) per motif port pair
        let mut steps: Vec<(Color, Color, usize)> = Vec::new();
        let mut singles: Vec<(Color, usize)> = Vec::new();
        for (mi, m) in base.motifs().iter().enumerate() {
            for u in 0..m.degree() {
                singles.push((m.ports[u], mi));
                for w in 0..m.degree() {
                    if w != u {
                        steps.push((m.ports[u], m.ports[w], mi));
                    }
                }
            }
        }
        steps.sort();
        steps.dedup();
        singles.sort();
        singles.dedup();

        let mut path = vec![Vec::new(); n + 1];
        let mut forest = vec![Vec::new(); n + 1];
        forest[0] = vec![true];
        path[0] = vec![0];
        for r in 1..=n {
            let g = &grids[r];
            let prev = &grids[r - 1];
            let mut p = vec![0u64; g.len()];
            let mut a = vec![false; g.len()];
            for (idx, &ok) in forest[r - 1].iter().enumerate() {
                if !ok {
                    continue;
                }
                let v = prev.vector(idx);
                for c in &chv {
                    let s: Vec<i32> = v.iter().zip(c).map(|(x, y)| x + y).collect();
                    a[g.index(&s).expect("within box")] = true;
                }
            }
            if r == 1 {
                for &(col, mi) in &singles {
                    p[g.index(&chv[mi]).expect("within box")] |= 1 << col.index();
                }
            } else {
                for (idx, &mask) in path[r - 1].iter().enumerate() {
                    if mask == 0 {
                        continue;
                    }
                    let v = prev.vector(idx);
                    for &(entry, exit, mi) in &steps {
                        if mask & (1 << exit.complement().index()) == 0 {
                            continue;
                        }
                        let s: Vec<i32> = v.iter().zip(&chv[mi]).map(|(x, y)| x + y).collect();
                        p[g.index(&s).expect("within box")] |= 1 << entry.index();
                    }
                }
            }
            path[r] = p;
            forest[r] = a;
        }
        Ok(ReachTable { n, grids, path, forest })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Some path of `r` motifs entered through color `a` sums to `c`.
    #[inline]
    pub fn path_feasible(&self, r: usize, a: Color, c: &[i32]) -> bool {
        match self.grids[r].index(c) {
            Some(i) => self.path[r][i] & (1 << a.index()) != 0,
            None => false,
        }
    }

    /// Entry colors of feasible paths of `r` motifs summing to `c`.
    pub fn path_entries(&self, r: usize, c: &[i32]) -> Vec<Color> {
        let mask = self.grids[r].index(c).map_or(0, |i| self.path[r][i]);
        (0..64).filter(|b| mask & (1 << b) != 0).map(|b| Color(b as u8)).collect()
    }

    /// Some multiset of `r` motifs sums to `c`.
    #[inline]
    pub fn forest_feasible(&self, r: usize, c: &[i32]) -> bool {
        match self.grids[r].index(c) {
            Some(i) => self.forest[r][i],
            None => false,
        }
    }
}

/// Backbone shape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackboneMode {
    Path,
    Tree,
    Cycle,
}

impl std::str::FromStr for BackboneMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(BackboneMode::Path),
            "tree" => Ok(BackboneMode::Tree),
            "cycle" => Ok(BackboneMode::Cycle),
            _ => Err(Error::Parse { line: 0, msg: format!("unknown backbone `{s}`") }),
        }
    }
}

impl std::fmt::Display for BackboneMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BackboneMode::Path => "path",
            BackboneMode::Tree => "tree",
            BackboneMode::Cycle => "cycle",
        })
    }
}

/// An independent slice of the search space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// First motif and the port the path leaves through.
    Path { first: usize, exit: Option<usize> },
    /// Root motif, smallest allowed motif, and the first attachment.
    Tree { root: usize, min_motif: usize, first: Option<(usize, Attachment)> },
}

struct State {
    map: MapOfMotifs,
    need: Vec<i32>,
    seq: Vec<u16>,
    slots: Vec<PortRef>,
}

/// Enumerates backbones of a fixed size.
pub struct Generator<'a> {
    base: &'a MotifBase,
    n: usize,
    reach: Option<&'a ReachTable>,
    stop: Option<&'a AtomicBool>,
    chv: Vec<Vec<i32>>,
}

impl<'a> Generator<'a> {
    pub fn new(base: &'a MotifBase, n: usize) -> Self {
        assert!(n >= 1, "backbone size must be positive");
        let k = base.alphabet().len();
        let chv = base.motifs().iter().map(|m| m.characteristic(k)).collect();
        Generator { base, n, reach: None, stop: None, chv }
    }

    /// Attaches a reach table; only almost-foldable backbones are emitted.
    pub fn prune(mut self, reach: &'a ReachTable) -> Self {
        assert!(reach.size() >= self.n);
        self.reach = Some(reach);
        self
    }

    pub fn stop_flag(mut self, stop: &'a AtomicBool) -> Self {
        self.stop = Some(stop);
        self
    }

    #[inline]
    fn stopped(&self) -> bool {
        self.stop.is_some_and(|s| s.load(Ordering::Relaxed))
    }

    fn new_state(&self) -> State {
        let deg = self.base.max_degree();
        State {
            map: MapOfMotifs::with_capacity(self.n, self.n * deg),
            need: vec![0; self.base.alphabet().len()],
            seq: Vec::with_capacity(self.n),
            slots: Vec::with_capacity(self.n * deg),
        }
    }

    fn push(&self, st: &mut State, att: Attachment) -> usize {
        for (x, y) in st.need.iter_mut().zip(&self.chv[att.motif]) {
            *x -= y;
        }
        st.seq.push(att.motif as u16);
        st.map.push_center(self.base, att)
    }

    fn pop(&self, st: &mut State) {
        let m = st.seq.pop().expect("nonempty") as usize;
        for (x, y) in st.need.iter_mut().zip(&self.chv[m]) {
            *x += y;
        }
        st.map.pop_center();
    }

    pub fn path_tasks(&self) -> Vec<Task> {
        let mut out = Vec::new();
        for (mi, m) in self.base.motifs().iter().enumerate() {
            if self.n == 1 {
                out.push(Task::Path { first: mi, exit: None });
            } else {
                out.extend((0..m.degree()).map(|e| Task::Path { first: mi, exit: Some(e) }));
            }
        }
        out
    }

    /// Every path, read from either end at most once.
    pub fn paths<F: FnMut(&MapOfMotifs)>(&self, mut sink: F) {
        for t in self.path_tasks() {
            self.run(t, &mut sink);
        }
    }

    /// Runs one task produced by [`Generator::path_tasks`] or [`Generator::tree_tasks`].
    pub fn run<F: FnMut(&MapOfMotifs)>(&self, task: Task, sink: &mut F) {
        let mut st = self.new_state();
        match task {
            Task::Path { first, exit } => {
                self.push(&mut st, Attachment { motif: first, offset: 0 });
                match exit {
                    None => self.path_done(&st, sink),
                    Some(e) => self.extend_path(&mut st, e, sink),
                }
            }
            Task::Tree { root, min_motif, first } => {
                let c = self.push(&mut st, Attachment { motif: root, offset: 0 });
                st.slots.extend((0..self.base.motif(root).degree()).map(|p| PortRef::new(c, p)));
                if self.n == 1 {
                    if first.is_none() {
                        sink(&st.map);
                    }
                    return;
                }
                if self.reach.is_some_and(|r| !r.forest_feasible(self.n - 1, &st.need)) {
                    return;
                }
                if let Some((i, att)) = first {
                    self.attach_tree(&mut st, i, att, min_motif, sink);
                }
            }
        }
    }

    fn path_done<F: FnMut(&MapOfMotifs)>(&self, st: &State, sink: &mut F) {
        if self.reach.is_some() && st.need.iter().any(|&x| x != 0) {
            return;
        }
        if st.seq.iter().ge(st.seq.iter().rev()) {
            sink(&st.map);
        }
    }

    fn extend_path<F: FnMut(&MapOfMotifs)>(&self, st: &mut State, exit: usize, sink: &mut F) {
        if self.stopped() {
            return;
        }
        let size = st.map.size();
        let last = PortRef::new(size - 1, exit);
        let x = st.map.entry(last).color();
        if let Some(r) = self.reach {
            if !r.path_feasible(self.n - size, x.complement(), &st.need) {
                return;
            }
        }
        for &att in self.base.attachments(x) {
            let c = self.push(st, att);
            st.map.bond(last, PortRef::new(c, 0));
            if size + 1 == self.n {
                self.path_done(st, sink);
            } else {
                for e in 1..st.map.degree(c) {
                    self.extend_path(st, e, sink);
                }
            }
            self.pop(st);
        }
    }

    /// Tasks for tree generation: each root, split by its first attachment.
    pub fn tree_tasks(&self) -> Vec<Task> {
        let mut out = Vec::new();
        for (root, min_motif) in self.tree_roots() {
            if self.n == 1 {
                out.push(Task::Tree { root, min_motif, first: None });
                continue;
            }
            let m = self.base.motif(root);
            for i in 0..m.degree() {
                for &att in self.base.attachments(m.ports[i]) {
                    if att.motif >= min_motif {
                        out.push(Task::Tree { root, min_motif, first: Some((i, att)) });
                    }
                }
            }
        }
        out
    }

    /// Roots: motif 0, plus motif `m > 0` when motifs `m..` alone can balance.
    fn tree_roots(&self) -> Vec<(usize, usize)> {
        let mut roots = vec![(0, 0)];
        let k = self.base.alphabet().len();
        for m in 1..self.base.len() {
            let mut layer: HashSet<Vec<i32>> = HashSet::new();
            layer.insert(self.chv[m].clone());
            for _ in 1..self.n {
                let mut next = HashSet::new();
                for v in &layer {
                    for c in &self.chv[m..] {
                        next.insert(v.iter().zip(c).map(|(x, y)| x + y).collect::<Vec<_>>());
                    }
                }
                layer = next;
            }
            if layer.contains(&vec![0; k]) {
                roots.push((m, m));
            }
        }
        roots
    }

    /// Plane trees in preorder; every tree containing motif 0 is rooted there.
    pub fn trees<F: FnMut(&MapOfMotifs)>(&self, mut sink: F) {
        for t in self.tree_tasks() {
            self.run(t, &mut sink);
        }
    }

    fn attach_tree<F: FnMut(&MapOfMotifs)>(
        &self,
        st: &mut State,
        i: usize,
        att: Attachment,
        min_motif: usize,
        sink: &mut F,
    ) {
        let slot = st.slots[i];
        let c = self.push(st, att);
        st.map.bond(slot, PortRef::new(c, 0));
        let deg = st.map.degree(c);
        st.slots.splice(i..=i, (1..deg).map(|p| PortRef::new(c, p)));
        self.grow_tree(st, i, min_motif, sink);
        st.slots.splice(i..i + deg - 1, std::iter::once(slot));
        self.pop(st);
    }

    fn grow_tree<F: FnMut(&MapOfMotifs)>(&self, st: &mut State, ptr: usize, min_motif: usize, sink: &mut F) {
        if self.stopped() {
            return;
        }
        let size = st.map.size();
        if size == self.n {
            sink(&st.map);
            return;
        }
        if self.reach.is_some_and(|r| !r.forest_feasible(self.n - size, &st.need)) {
            return;
        }
        for i in ptr..st.slots.len() {
            let x = st.map.entry(st.slots[i]).color();
            for &att in self.base.attachments(x) {
                if att.motif >= min_motif {
                    self.attach_tree(st, i, att, min_motif, sink);
                }
            }
        }
    }

    /// Paths closed by one extra bond between their end centers.
    pub fn cycles<F: FnMut(&MapOfMotifs)>(&self, mut sink: F) {
        for t in self.path_tasks() {
            self.run_cycle(t, &mut sink);
        }
    }

    pub fn run_cycle<F: FnMut(&MapOfMotifs)>(&self, task: Task, sink: &mut F) {
        if self.n < 2 {
            return;
        }
        let last = self.n - 1;
        let mut close = |m: &MapOfMotifs| {
            let mut m = m.clone();
            for (i, e) in m.entries(0).to_vec().into_iter().enumerate() {
                let Entry::Free(x) = e else { continue };
                for (j, f) in m.entries(last).to_vec().into_iter().enumerate() {
                    if let Entry::Free(y) = f {
                        if x.complements(y) {
                            m.bond(PortRef::new(0, i), PortRef::new(last, j));
                            sink(&m);
                            m.unbond(PortRef::new(0, i));
                        }
                    }
                }
            }
        };
        self.run(task, &mut close);
    }

    /// Dispatches on the backbone mode.
    pub fn generate<F: FnMut(&MapOfMotifs)>(&self, mode: BackboneMode, sink: F) {
        match mode {
            BackboneMode::Path => self.paths(sink),
            BackboneMode::Tree => self.trees(sink),
            BackboneMode::Cycle => self.cycles(sink),
        }
    }

    pub fn tasks(&self, mode: BackboneMode) -> Vec<Task> {
        match mode {
            BackboneMode::Tree => self.tree_tasks(),
            _ => self.path_tasks(),
        }
    }

    pub fn run_mode<F: FnMut(&MapOfMotifs)>(&self, mode: BackboneMode, task: Task, sink: &mut F) {
        match mode {
            BackboneMode::Cycle => self.run_cycle(task, sink),
            _ => self.run(task, sink),
        }
    }
}

pub fn gen_paths<F: FnMut(&MapOfMotifs)>(base: &MotifBase, n: usize, prune: Option<&ReachTable>, sink: F) {
    with_prune(base, n, prune).paths(sink)
}

pub fn gen_trees<F: FnMut(&MapOfMotifs)>(base: &MotifBase, n: usize, prune: Option<&ReachTable>, sink: F) {
    with_prune(base, n, prune).trees(sink)
}

pub fn gen_cycles<F: FnMut(&MapOfMotifs)>(base: &MotifBase, n: usize, prune: Option<&ReachTable>, sink: F) {
    with_prune(base, n, prune).cycles(sink)
}

fn with_prune<'a>(base: &'a MotifBase, n: usize, prune: Option<&'a ReachTable>) -> Generator<'a> {
    let g = Generator::new(base, n);
    match prune {
        Some(r) => g.prune(r),
        None => g,
    }
}
