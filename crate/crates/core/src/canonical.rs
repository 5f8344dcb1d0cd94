//! Canonical signatures of saturated maps.
//!
//! A traversal from a starting port visits every port once and writes one
//! record per port: the index and motif of its center, its color, the color
//! and motif of the peer port's center, and the peer center's index. Centers
//! are numbered in order of discovery. When the peer center was already
//! known, the record also carries the peer port's position in that center's
//! visiting order, which pins parallel bonds down. The signature is the least
//! record sequence over a fixed set of starts.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use parking_lot::Mutex;

use crate::error::{Error, Result};
use crate::model::{Color, Entry, MapOfMotifs, MotifBase, PortRef};

/// Digits of a canonical traversal. Ordered lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Signature(pub Vec<u16>);

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Signature {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Ok(Signature::default());
        }
        s.split('.')
            .map(|d| d.parse::<u16>().map_err(|_| Error::BadSignature(s.to_string())))
            .collect::<Result<Vec<_>>>()
            .map(Signature)
    }
}

/// Digit assignment for a base and a maximal map size.
#[derive(Clone, Debug)]
pub struct SignatureContext {
    n: usize,
    radix: usize,
    color_digit: Vec<u16>,
    motif_digit: Vec<u16>,
}

impl SignatureContext {
    /// Indices take digits `0..n`, then positive colors, negative colors and motifs.
    pub fn new(base: &MotifBase, n: usize) -> Self {
        let k = base.alphabet().len();
        let color_digit = (0..2 * k)
            .map(|c| (n + if c % 2 == 0 { c / 2 } else { k + c / 2 }) as u16)
            .collect();
        let motif_digit = (0..base.len()).map(|m| (n + 2 * k + m) as u16).collect();
        SignatureContext { n, radix: n + 2 * k + base.len(), color_digit, motif_digit }
    }

    pub fn radix(&self) -> usize {
        self.radix
    }

    pub fn max_size(&self) -> usize {
        self.n
    }
}

const UNSEEN: u32 = u32::MAX;

/// Scratch space for repeated signature computations.
#[derive(Default)]
pub struct Canonizer {
    index: Vec<u32>,
    loop_start: Vec<u32>,
    stack: Vec<(u32, u32)>,
    buf: Vec<u16>,
    best: Vec<u16>,
    starts: Vec<PortRef>,
}

impl Canonizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the traversal from `start` into `self.buf`. When `bound` is
    /// given, stops early and returns `false` unless the result is smaller.
    fn traverse(&mut self, ctx: &SignatureContext, map: &MapOfMotifs, start: PortRef, bounded: bool) -> Result<bool> {
        let n = map.size();
        if n > ctx.n {
            return Err(Error::MalformedMap(format!("map has {n} centers, context allows {}", ctx.n)));
        }
        self.index.clear();
        self.index.resize(n, UNSEEN);
        self.loop_start.clear();
        self.loop_start.resize(n, 0);
        self.stack.clear();
        self.buf.clear();

        let best = std::mem::take(&mut self.best);
        let mut tie = bounded;
        let mut pos = 0usize;
        let mut push = |buf: &mut Vec<u16>, d: u16, tie: &mut bool| -> bool {
            if *tie {
                match best.get(pos) {
                    None => return false,
                    Some(&b) if d > b => return false,
                    Some(&b) if d < b => *tie = false,
                    _ => {}
                }
            }
            buf.push(d);
            pos += 1;
            true
        };

        let c0 = start.center;
        self.index[c0 as usize] = 0;
        self.loop_start[c0 as usize] = start.port;
        let mut next = 1u32;
        self.stack.push((c0, 0));
        let mut ok = true;
        'outer: while let Some(top) = self.stack.last_mut() {
            let (c, k) = *top;
            let deg = map.degree(c as usize) as u32;
            if k == deg {
                self.stack.pop();
                continue;
            }
            top.1 += 1;
            let p = PortRef { center: c, port: (self.loop_start[c as usize] + k) % deg };
            let Entry::Bond { color, peer } = map.entry(p) else {
                self.best = best;
                return Err(Error::NotSaturated);
            };
            let t = peer.center as usize;
            let fresh = self.index[t] == UNSEEN;
            if fresh {
                self.index[t] = next;
                next += 1;
                let tdeg = map.degree(t) as u32;
                self.loop_start[t] = (peer.port + 1) % tdeg;
            }
            let record = [
                self.index[c as usize] as u16,
                ctx.motif_digit[map.motif_of(c as usize)],
                ctx.color_digit[color.index()],
                ctx.color_digit[color.complement().index()],
                ctx.motif_digit[map.motif_of(t)],
                self.index[t] as u16,
            ];
            for d in record {
                if !push(&mut self.buf, d, &mut tie) {
                    ok = false;
                    break 'outer;
                }
            }
            if fresh {
                self.stack.push((peer.center, 0));
            } else {
                let tdeg = map.degree(t) as u32;
                let rel = (peer.port + tdeg - self.loop_start[t]) % tdeg;
                if !push(&mut self.buf, rel as u16, &mut tie) {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok && next as usize != n {
            self.best = best;
            return Err(Error::Disconnected);
        }
        if ok && tie && self.buf.len() == best.len() {
            ok = false;
        }
        self.best = best;
        Ok(ok)
    }

    /// Traversal from one starting port.
    pub fn signature_from(&mut self, ctx: &SignatureContext, map: &MapOfMotifs, start: PortRef) -> Result<Signature> {
        self.traverse(ctx, map, start, false)?;
        Ok(Signature(self.buf.clone()))
    }

    /// Least traversal over starts of the given ports.
    fn min_over(&mut self, ctx: &SignatureContext, map: &MapOfMotifs, starts: &[PortRef]) -> Result<Signature> {
        self.best.clear();
        for (i, &s) in starts.iter().enumerate() {
            if self.traverse(ctx, map, s, i > 0)? {
                std::mem::swap(&mut self.best, &mut self.buf);
            }
        }
        Ok(Signature(self.best.clone()))
    }

    /// Least traversal over the ports of the rarest (motif, port color) couple.
    pub fn canonical(&mut self, ctx: &SignatureContext, map: &MapOfMotifs) -> Result<Signature> {
        if map.size() == 0 {
            return Ok(Signature::default());
        }
        if !map.is_saturated() {
            return Err(Error::NotSaturated);
        }
        let mut counts: HashMap<(u16, u16), usize> = HashMap::new();
        for c in 0..map.size() {
            for e in map.entries(c) {
                let key = (ctx.motif_digit[map.motif_of(c)], ctx.color_digit[e.color().index()]);
                *counts.entry(key).or_default() += 1;
            }
        }
        let rare = counts
            .iter()
            .min_by_key(|(&key, &cnt)| (cnt, key))
            .map(|(&k, _)| k)
            .expect("nonempty");
        let mut starts = std::mem::take(&mut self.starts);
        starts.clear();
        for c in 0..map.size() {
            if ctx.motif_digit[map.motif_of(c)] != rare.0 {
                continue;
            }
            for (i, e) in map.entries(c).iter().enumerate() {
                if ctx.color_digit[e.color().index()] == rare.1 {
                    starts.push(PortRef::new(c, i));
                }
            }
        }
        let sig = self.min_over(ctx, map, &starts);
        self.starts = starts;
        sig
    }

    /// Least traversal over every port; slower, used as a reference.
    pub fn canonical_all_starts(&mut self, ctx: &SignatureContext, map: &MapOfMotifs) -> Result<Signature> {
        let starts: Vec<PortRef> = (0..map.size())
            .flat_map(|c| (0..map.degree(c)).map(move |i| PortRef::new(c, i)))
            .collect();
        self.min_over(ctx, map, &starts)
    }

    /// Class id per center; two centers share a class iff an automorphism maps one to the other.
    pub fn equivalence_classes(&mut self, ctx: &SignatureContext, map: &MapOfMotifs) -> Result<Vec<usize>> {
        let mut ids: HashMap<Signature, usize> = HashMap::new();
        let mut out = Vec::with_capacity(map.size());
        for c in 0..map.size() {
            let starts: Vec<PortRef> = (0..map.degree(c)).map(|i| PortRef::new(c, i)).collect();
            let sig = self.min_over(ctx, map, &starts)?;
            let next = ids.len();
            out.push(*ids.entry(sig).or_insert(next));
        }
        Ok(out)
    }
}

pub fn signature_from(ctx: &SignatureContext, map: &MapOfMotifs, start: PortRef) -> Result<Signature> {
    Canonizer::new().signature_from(ctx, map, start)
}

pub fn canonical_signature(ctx: &SignatureContext, map: &MapOfMotifs) -> Result<Signature> {
    Canonizer::new().canonical(ctx, map)
}

pub fn equivalence_classes(ctx: &SignatureContext, map: &MapOfMotifs) -> Result<Vec<usize>> {
    Canonizer::new().equivalence_classes(ctx, map)
}

/// Signature of the map with every rotation order reversed.
pub fn chiral_twin(ctx: &SignatureContext, map: &MapOfMotifs) -> Result<Signature> {
    canonical_signature(ctx, &map.mirror())
}

/// Whether the map differs from its mirror image.
pub fn is_chiral(ctx: &SignatureContext, map: &MapOfMotifs) -> Result<bool> {
    let mut c = Canonizer::new();
    Ok(c.canonical(ctx, map)? != c.canonical(ctx, &map.mirror())?)
}

/// Rebuilds a map from a signature. Centers are numbered by discovery and
/// each center's ports by visiting order.
pub fn reconstruct(ctx: &SignatureContext, base: &MotifBase, sig: &Signature) -> Result<MapOfMotifs> {
    let bad = |m: &str| Error::BadSignature(m.to_string());
    let d = &sig.0;
    let n = ctx.n;
    let k = base.alphabet().len();
    let motif_of = |x: u16| -> Result<usize> {
        let m = (x as usize).checked_sub(n + 2 * k).ok_or_else(|| bad("expected a motif digit"))?;
        (m < base.len()).then_some(m).ok_or_else(|| bad("motif digit out of range"))
    };
    let color_of = |x: u16| -> Result<Color> {
        let c = (x as usize).checked_sub(n).filter(|&c| c < 2 * k).ok_or_else(|| bad("expected a color digit"))?;
        Ok(if c < k { Color::positive(c) } else { Color::negative(c - k) })
    };

    let mut motifs: Vec<usize> = Vec::new();
    let mut colors: Vec<Vec<Option<Color>>> = Vec::new();
    let mut peers: Vec<Vec<Option<PortRef>>> = Vec::new();
    let mut emitted: Vec<usize> = Vec::new();
    let open = |m: usize, motifs: &mut Vec<usize>, colors: &mut Vec<Vec<_>>, peers: &mut Vec<Vec<_>>, emitted: &mut Vec<usize>| {
        let deg = base.motif(m).degree();
        motifs.push(m);
        colors.push(vec![None; deg]);
        peers.push(vec![None; deg]);
        emitted.push(0);
    };

    let mut i = 0;
    while i < d.len() {
        if i + 6 > d.len() {
            return Err(bad("truncated record"));
        }
        let (c, mc, cu, cv, mt, t) = (d[i] as usize, motif_of(d[i + 1])?, color_of(d[i + 2])?, color_of(d[i + 3])?, motif_of(d[i + 4])?, d[i + 5] as usize);
        i += 6;
        if motifs.is_empty() {
            if c != 0 {
                return Err(bad("first record must start at center 0"));
            }
            open(mc, &mut motifs, &mut colors, &mut peers, &mut emitted);
        }
        if c >= motifs.len() || motifs[c] != mc {
            return Err(bad("inconsistent center"));
        }
        if !cu.complements(cv) {
            return Err(bad("colors are not complementary"));
        }
        let pc = emitted[c];
        if pc >= colors[c].len() {
            return Err(bad("too many ports"));
        }
        emitted[c] += 1;
        colors[c][pc] = Some(cu);
        let tp = if t == motifs.len() {
            open(mt, &mut motifs, &mut colors, &mut peers, &mut emitted);
            colors[t].len() - 1
        } else if t < motifs.len() {
            if motifs[t] != mt {
                return Err(bad("inconsistent peer motif"));
            }
            let rel = *d.get(i).ok_or_else(|| bad("truncated record"))? as usize;
            i += 1;
            if rel >= colors[t].len() {
                return Err(bad("peer position out of range"));
            }
            rel
        } else {
            return Err(bad("center index skips ahead"));
        };
        let here = PortRef::new(c, pc);
        let there = PortRef::new(t, tp);
        match peers[t][tp] {
            None => peers[t][tp] = Some(here),
            Some(p) if p == here => {}
            _ => return Err(bad("conflicting bond")),
        }
        match peers[c][pc] {
            None => peers[c][pc] = Some(there),
            Some(p) if p == there => {}
            _ => return Err(bad("conflicting bond")),
        }
        match colors[t][tp] {
            None => colors[t][tp] = Some(cv),
            Some(x) if x == cv => {}
            _ => return Err(bad("conflicting color")),
        }
    }
    if motifs.len() > n {
        return Err(bad("too many centers"));
    }
    let mut map = MapOfMotifs::new();
    for (c, &m) in motifs.iter().enumerate() {
        let cols: Vec<_> = colors[c].iter().map(|x| x.ok_or_else(|| bad("port never visited"))).collect::<Result<_>>()?;
        map.push_center_colors(m, &cols);
        if map.offset_of(base, c).is_none() {
            return Err(bad("center does not match its motif"));
        }
    }
    for c in 0..motifs.len() {
        for (p, peer) in peers[c].iter().enumerate() {
            let peer = peer.ok_or_else(|| bad("port never bonded"))?;
            let here = PortRef::new(c, p);
            if here < peer {
                map.try_bond(here, peer).map_err(|_| bad("invalid bond"))?;
            }
        }
    }
    Ok(map)
}

/// Concurrent set of signatures, sharded to limit contention.
pub struct DedupStore<P = ()> {
    shards: Vec<Mutex<HashMap<Signature, P>>>,
}

impl<P> DedupStore<P> {
    pub fn new(shards: usize) -> Self {
        DedupStore { shards: (0..shards.max(1)).map(|_| Mutex::new(HashMap::new())).collect() }
    }

    fn shard(&self, sig: &Signature) -> &Mutex<HashMap<Signature, P>> {
        let mut h = DefaultHasher::new();
        sig.hash(&mut h);
        &self.shards[h.finish() as usize % self.shards.len()]
    }

    /// Inserts; `true` if the signature was new. The first payload is kept.
    pub fn insert(&self, sig: Signature, payload: P) -> bool {
        let mut shard = self.shard(&sig).lock();
        if shard.contains_key(&sig) {
            return false;
        }
        shard.insert(sig, payload);
        true
    }

    pub fn contains(&self, sig: &Signature) -> bool {
        self.shard(sig).lock().contains_key(sig)
    }

    pub fn len(&self) -> usize {
        self.shards.iter().map(|s| s.lock().len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries sorted by signature.
    pub fn into_sorted(self) -> Vec<(Signature, P)> {
        let mut v: Vec<(Signature, P)> = self.shards.into_iter().flat_map(|s| s.into_inner()).collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::backbone::{BackboneMode, Generator};
    use crate::folding::Folder;

    /// Orientation-preserving isomorphism test by propagation from a port pair.
    pub(crate) fn isomorphic(a: &MapOfMotifs, b: &MapOfMotifs) -> bool {
        if a.size() != b.size() || a.port_count() != b.port_count() {
            return false;
        }
        if a.size() == 0 {
            return true;
        }
        let try_from = |p0: PortRef| -> bool {
            let n = a.size();
            let mut phi: Vec<Option<(u32, u32)>> = vec![None; n];
            let shift0 = p0.port as i64;
            phi[0] = Some((p0.center, shift0 as u32));
            let mut queue = vec![(0u32, p0.center, shift0)];
            while let Some((ca, cb, s)) = queue.pop() {
                let (ca, cb) = (ca as usize, cb as usize);
                let deg = a.degree(ca);
                if b.degree(cb) != deg || a.motif_of(ca) != b.motif_of(cb) {
                    return false;
                }
                for i in 0..deg {
                    let ea = a.entry(PortRef::new(ca, i));
                    let eb = b.entry(PortRef::new(cb, (i + s as usize) % deg));
                    if ea.color() != eb.color() {
                        return false;
                    }
                    let (Some(pa), Some(pb)) = (ea.peer(), eb.peer()) else {
                        if ea.peer().is_some() != eb.peer().is_some() {
                            return false;
                        }
                        continue;
                    };
                    let td = a.degree(pa.center as usize) as i64;
                    let ts = ((pb.port as i64 - pa.port as i64) % td + td) % td;
                    match phi[pa.center as usize] {
                        None => {
                            phi[pa.center as usize] = Some((pb.center, ts as u32));
                            queue.push((pa.center, pb.center, ts));
                        }
                        Some((c, sh)) => {
                            if c != pb.center || sh as i64 != ts {
                                return false;
                            }
                        }
                    }
                }
            }
            let mut used = vec![false; n];
            phi.iter().all(|x| match x {
                Some((c, _)) => !std::mem::replace(&mut used[*c as usize], true),
                None => false,
            })
        };
        (0..b.size()).any(|c| (0..b.degree(c)).any(|p| try_from(PortRef::new(c, p))))
    }

    pub(crate) fn saturated_maps(text: &str, n: usize, mode: BackboneMode) -> (MotifBase, Vec<MapOfMotifs>) {
        let base = MotifBase::parse(text).unwrap();
        let mut out = Vec::new();
        let mut folder = Folder::new();
        Generator::new(&base, n).generate(mode, |m| {
            folder.saturate_all(m, |s| out.push(s.clone()));
        });
        (base, out)
    }

    const BASES: [&str; 3] = [
        "colors: a b\nmotif J: a b\nmotif V1: ~a ~a b\nmotif V2: a ~b ~b\n",
        "colors: a\nmotif Y: ~a ~a ~a\nmotif I: a a\n",
        "colors: a\nmotif X1: a a a a\nmotif X2: ~a ~a ~a ~a\n",
    ];

    #[test]
    fn signature_is_an_isomorphism_invariant_and_complete() {
        for (text, sizes) in BASES.iter().zip([&[3usize, 6][..], &[5][..], &[2, 4, 6][..]]) {
            for &n in sizes {
                let (base, maps) = saturated_maps(text, n, BackboneMode::Tree);
                let ctx = SignatureContext::new(&base, n);
                let mut reps: Vec<(Signature, MapOfMotifs)> = Vec::new();
                for m in &maps {
                    let sig = canonical_signature(&ctx, m).unwrap();
                    let full = Canonizer::new().canonical_all_starts(&ctx, m).unwrap();
                    let mut same = 0;
                    for (s, r) in &reps {
                        let iso = isomorphic(m, r);
                        assert_eq!(iso, *s == sig, "n={n}");
                        let full_r = Canonizer::new().canonical_all_starts(&ctx, r).unwrap();
                        assert_eq!(iso, full_r == full);
                        same += iso as usize;
                    }
                    if same == 0 {
                        let back = reconstruct(&ctx, &base, &sig).unwrap();
                        assert!(isomorphic(&back, m));
                        back.validate(&base).unwrap();
                        reps.push((sig, m.clone()));
                    }
                }
                assert!(!reps.is_empty());
            }
        }
    }

    #[test]
    fn signature_length_counts_ports_and_back_edges() {
        let (base, maps) = saturated_maps(BASES[0], 6, BackboneMode::Tree);
        let ctx = SignatureContext::new(&base, 6);
        for m in maps.iter().take(50) {
            let sig = canonical_signature(&ctx, m).unwrap();
            let darts = m.port_count();
            assert_eq!(sig.0.len(), 6 * darts + darts - (m.size() - 1));
            assert!(sig.0.iter().all(|&d| (d as usize) < ctx.radix()));
        }
    }

    #[test]
    fn signature_round_trips_through_text() {
        let s = Signature(vec![0, 12, 7, 3]);
        assert_eq!(s.to_string().parse::<Signature>().unwrap(), s);
        assert!("1.x".parse::<Signature>().is_err());
    }

    #[test]
    fn classes_and_chirality_of_a_small_cage() {
        // tetrahedron of Y with I on every edge: one Y class, one I class, achiral
        let (base, maps) = saturated_maps(BASES[1], 10, BackboneMode::Tree);
        let ctx = SignatureContext::new(&base, 10);
        let tetra = maps
            .iter()
            .find(|m| {
                let mm = m.to_molecular_map().unwrap();
                let mut pairs: Vec<(usize, usize)> = (0..mm.vertex_count())
                    .filter(|&v| mm.label(v) == 1)
                    .map(|v| {
                        let (x, y) = (mm.neighbor(v, 0), mm.neighbor(v, 1));
                        (x.min(y), x.max(y))
                    })
                    .collect();
                pairs.sort();
                pairs.dedup();
                pairs.len() == 6 && pairs.iter().all(|(x, y)| x != y)
            })
            .expect("tetrahedral cage");
        let classes = equivalence_classes(&ctx, tetra).unwrap();
        assert_eq!(classes.iter().max().unwrap() + 1, 2);
        assert!(!is_chiral(&ctx, tetra).unwrap());
    }

    #[test]
    fn dedup_store_keeps_first() {
        let store: DedupStore<u8> = DedupStore::new(4);
        assert!(store.insert(Signature(vec![2]), 1));
        assert!(!store.insert(Signature(vec![2]), 2));
        assert!(store.insert(Signature(vec![1]), 3));
        assert_eq!(store.into_sorted(), vec![(Signature(vec![1]), 3), (Signature(vec![2]), 1)]);
    }

    #[test]
    fn unsaturated_maps_are_rejected() {
        let base = MotifBase::parse(BASES[1]).unwrap();
        let mut m = MapOfMotifs::new();
        m.push_center(&base, crate::model::Attachment { motif: 0, offset: 0 });
        let ctx = SignatureContext::new(&base, 1);
        assert_eq!(canonical_signature(&ctx, &m), Err(Error::NotSaturated));
    }
}
