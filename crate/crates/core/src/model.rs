//! Colors, motifs, motif bases and maps of motifs.
//!
//! A map of motifs stores, for every center, the cyclic list of its ports.
//! Each port is either free (carrying its color) or bonded to a port of
//! another center. Port `0` of a center is not necessarily port `0` of the
//! declared motif: centers may be rotated.

use std::collections::HashSet;
use std::fmt;

use crate::error::{Error, Result};

/// A port color. Even values are the positive colors, odd values their complements.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Color(pub u8);

impl Color {
    pub fn positive(i: usize) -> Self {
        Color((2 * i) as u8)
    }

    pub fn negative(i: usize) -> Self {
        Color((2 * i + 1) as u8)
    }

    pub fn complement(self) -> Self {
        Color(self.0 ^ 1)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// Index of the underlying positive color.
    pub fn base_index(self) -> usize {
        (self.0 >> 1) as usize
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn complements(self, other: Color) -> bool {
        self.0 ^ 1 == other.0
    }
}

/// The positive color names of a base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColorAlphabet {
    names: Vec<String>,
}

fn valid_color_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn valid_motif_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '+' | '-' | '~'))
}

impl ColorAlphabet {
    pub fn new<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(names.len());
        for n in names {
            let n = n.as_ref();
            if !valid_color_name(n) || !seen.insert(n.to_string()) {
                return Err(Error::UnknownColor(n.to_string()));
            }
            out.push(n.to_string());
        }
        if out.len() > 127 {
            return Err(Error::UnknownColor(out[127].clone()));
        }
        Ok(ColorAlphabet { names: out })
    }

    /// Number of positive colors.
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Parses `x` or `~x`.
    pub fn parse(&self, s: &str) -> Result<Color> {
        let (neg, name) = match s.strip_prefix('~') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColor(s.to_string()))?;
        Ok(if neg { Color::negative(i) } else { Color::positive(i) })
    }

    pub fn render(&self, c: Color) -> String {
        let name = &self.names[c.base_index()];
        if c.is_positive() {
            name.clone()
        } else {
            format!("~{name}")
        }
    }

    /// All colors, positive and negative, in index order.
    pub fn colors(&self) -> impl Iterator<Item = Color> {
        (0..2 * self.names.len()).map(|i| Color(i as u8))
    }
}

/// A named cyclic sequence of port colors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Motif {
    pub name: String,
    pub ports: Vec<Color>,
}

impl Motif {
    pub fn degree(&self) -> usize {
        self.ports.len()
    }

    /// Per positive color, positive ports minus negative ports.
    pub fn characteristic(&self, k: usize) -> Vec<i32> {
        let mut v = vec![0i32; k];
        for c in &self.ports {
            v[c.base_index()] += if c.is_positive() { 1 } else { -1 };
        }
        v
    }

    /// Ports read from `offset` onwards.
    pub fn rotated(&self, offset: usize) -> impl Iterator<Item = Color> + '_ {
        let d = self.ports.len();
        (0..d).map(move |i| self.ports[(offset + i) % d])
    }

    fn canonical_rotation(&self) -> Vec<Color> {
        (0..self.ports.len())
            .map(|o| self.rotated(o).collect::<Vec<_>>())
            .min()
            .unwrap_or_default()
    }
}

/// A motif placed so that its port `offset` becomes local port `0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Attachment {
    pub motif: usize,
    pub offset: usize,
}

/// A color alphabet and an ordered list of motifs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotifBase {
    alphabet: ColorAlphabet,
    motifs: Vec<Motif>,
    attach: Vec<Vec<Attachment>>,
}

impl MotifBase {
    pub fn new(alphabet: ColorAlphabet, motifs: Vec<Motif>) -> Result<Self> {
        if motifs.is_empty() {
            return Err(Error::EmptyBase);
        }
        let k = alphabet.len();
        let mut names = HashSet::new();
        let mut shapes = HashSet::new();
        for m in &motifs {
            if !valid_motif_name(&m.name) {
                return Err(Error::InvalidMotif(m.name.clone(), "bad name".into()));
            }
            if alphabet.names().iter().any(|c| *c == m.name) {
                return Err(Error::InvalidMotif(m.name.clone(), "name is a color".into()));
            }
            if m.ports.is_empty() {
                return Err(Error::InvalidMotif(m.name.clone(), "no ports".into()));
            }
            if m.ports.iter().any(|c| c.base_index() >= k) {
                return Err(Error::InvalidMotif(m.name.clone(), "color out of range".into()));
            }
            if !names.insert(m.name.clone()) || !shapes.insert(m.canonical_rotation()) {
                return Err(Error::DuplicateMotif(m.name.clone()));
            }
        }
        let mut attach = vec![Vec::new(); 2 * k];
        for c in alphabet.colors() {
            let want = c.complement();
            let mut seen: HashSet<(usize, Vec<Color>)> = HashSet::new();
            for (mi, m) in motifs.iter().enumerate() {
                for o in 0..m.degree() {
                    if m.ports[o] == want && seen.insert((mi, m.rotated(o).collect())) {
                        attach[c.index()].push(Attachment { motif: mi, offset: o });
                    }
                }
            }
        }
        Ok(MotifBase { alphabet, motifs, attach })
    }

    pub fn alphabet(&self) -> &ColorAlphabet {
        &self.alphabet
    }

    pub fn motifs(&self) -> &[Motif] {
        &self.motifs
    }

    pub fn motif(&self, i: usize) -> &Motif {
        &self.motifs[i]
    }

    pub fn len(&self) -> usize {
        self.motifs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motifs.is_empty()
    }

    pub fn motif_index(&self, name: &str) -> Option<usize> {
        self.motifs.iter().position(|m| m.name == name)
    }

    /// Rotated motifs whose port `0` can bond to a port of color `c`,
    /// one per distinct rotated sequence.
    pub fn attachments(&self, c: Color) -> &[Attachment] {
        &self.attach[c.index()]
    }

    pub fn max_degree(&self) -> usize {
        self.motifs.iter().map(Motif::degree).max().unwrap_or(0)
    }

    /// Parses the text format: a `colors:` line, then `motif NAME: ports` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut alphabet: Option<ColorAlphabet> = None;
        let mut motifs = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Parse { line: ln + 1, msg: msg.to_string() };
            match &alphabet {
                None => {
                    let rest = line
                        .strip_prefix("colors:")
                        .ok_or_else(|| err("expected `colors:`"))?;
                    let names: Vec<&str> = rest.split_whitespace().collect();
                    if names.is_empty() {
                        return Err(err("no colors"));
                    }
                    alphabet = Some(ColorAlphabet::new(&names).map_err(|e| err(&e.to_string()))?);
                }
                Some(al) => {
                    let rest = line
                        .strip_prefix("motif")
                        .filter(|r| r.starts_with(char::is_whitespace))
                        .ok_or_else(|| err("expected `motif NAME: ports`"))?;
                    let (name, ports) = rest.split_once(':').ok_or_else(|| err("missing `:`"))?;
                    let name = name.trim();
                    let ports = ports
                        .split_whitespace()
                        .map(|p| al.parse(p))
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| err(&e.to_string()))?;
                    motifs.push(Motif { name: name.to_string(), ports });
                }
            }
        }
        let alphabet = alphabet.ok_or(Error::EmptyBase)?;
        MotifBase::new(alphabet, motifs)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("colors: {}\n", self.alphabet.names().join(" "));
        for m in &self.motifs {
            let ports: Vec<String> = m.ports.iter().map(|c| self.alphabet.render(*c)).collect();
            s.push_str(&format!("motif {}: {}\n", m.name, ports.join(" ")));
        }
        s
    }

    /// Sum of characteristic vectors of a multiset given as motif counts.
    pub fn characteristic_of(&self, counts: &[usize]) -> Vec<i32> {
        let k = self.alphabet.len();
        let mut v = vec![0i32; k];
        for (m, &c) in self.motifs.iter().zip(counts) {
            for (x, y) in v.iter_mut().zip(m.characteristic(k)) {
                *x += y * c as i32;
            }
        }
        v
    }
}

/// A port of a center.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PortRef {
    pub center: u32,
    pub port: u32,
}

impl PortRef {
    pub fn new(center: usize, port: usize) -> Self {
        PortRef { center: center as u32, port: port as u32 }
    }
}

/// One port of a center.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Entry {
    Free(Color),
    Bond { color: Color, peer: PortRef },
}

impl Entry {
    pub fn color(self) -> Color {
        match self {
            Entry::Free(c) | Entry::Bond { color: c, .. } => c,
        }
    }

    pub fn is_free(self) -> bool {
        matches!(self, Entry::Free(_))
    }

    pub fn peer(self) -> Option<PortRef> {
        match self {
            Entry::Bond { peer, .. } => Some(peer),
            Entry::Free(_) => None,
        }
    }
}

/// Centers, their motifs and their rotation lists.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MapOfMotifs {
    motif: Vec<u16>,
    start: Vec<u32>,
    entries: Vec<Entry>,
    bonds: usize,
}

impl MapOfMotifs {
    pub fn new() -> Self {
        MapOfMotifs { motif: Vec::new(), start: vec![0], entries: Vec::new(), bonds: 0 }
    }

    pub fn with_capacity(centers: usize, ports: usize) -> Self {
        let mut start = Vec::with_capacity(centers + 1);
        start.push(0);
        MapOfMotifs {
            motif: Vec::with_capacity(centers),
            start,
            entries: Vec::with_capacity(ports),
            bonds: 0,
        }
    }

    /// Number of centers.
    pub fn size(&self) -> usize {
        self.motif.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds
    }

    pub fn port_count(&self) -> usize {
        self.entries.len()
    }

    pub fn motif_of(&self, c: usize) -> usize {
        self.motif[c] as usize
    }

    pub fn degree(&self, c: usize) -> usize {
        (self.start[c + 1] - self.start[c]) as usize
    }

    /// Index of a port in the flat port list.
    #[inline]
    pub fn dart(&self, p: PortRef) -> usize {
        self.start[p.center as usize] as usize + p.port as usize
    }

    #[inline]
    pub fn entry(&self, p: PortRef) -> Entry {
        self.entries[self.dart(p)]
    }

    pub fn entries(&self, c: usize) -> &[Entry] {
        &self.entries[self.start[c] as usize..self.start[c + 1] as usize]
    }

    pub fn offsets(&self) -> &[u32] {
        &self.start
    }

    pub fn flat_entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Adds a center carrying `motif`, rotated by `offset`, with all ports free.
    pub fn push_center(&mut self, base: &MotifBase, att: Attachment) -> usize {
        let m = base.motif(att.motif);
        self.entries.extend(m.rotated(att.offset).map(Entry::Free));
        self.motif.push(att.motif as u16);
        self.start.push(self.entries.len() as u32);
        self.motif.len() - 1
    }

    /// Adds a center with an explicit local color list.
    pub fn push_center_colors(&mut self, motif: usize, colors: &[Color]) -> usize {
        self.entries.extend(colors.iter().copied().map(Entry::Free));
        self.motif.push(motif as u16);
        self.start.push(self.entries.len() as u32);
        self.motif.len() - 1
    }

    /// Removes the last center, freeing every port bonded to it.
    pub fn pop_center(&mut self) {
        let c = self.motif.len() - 1;
        let (s, e) = (self.start[c] as usize, self.start[c + 1] as usize);
        let mut self_ports = 0;
        for d in s..e {
            if let Entry::Bond { peer, .. } = self.entries[d] {
                if peer.center as usize == c {
                    self_ports += 1;
                } else {
                    let pd = self.dart(peer);
                    self.entries[pd] = Entry::Free(self.entries[pd].color());
                    self.bonds -= 1;
                }
            }
        }
        self.bonds -= self_ports / 2;
        self.entries.truncate(s);
        self.start.pop();
        self.motif.pop();
    }

    /// Bonds two free ports. Colors are not checked.
    #[inline]
    pub fn bond(&mut self, a: PortRef, b: PortRef) {
        let (da, db) = (self.dart(a), self.dart(b));
        debug_assert!(self.entries[da].is_free() && self.entries[db].is_free());
        let (ca, cb) = (self.entries[da].color(), self.entries[db].color());
        self.entries[da] = Entry::Bond { color: ca, peer: b };
        self.entries[db] = Entry::Bond { color: cb, peer: a };
        self.bonds += 1;
    }

    /// Bonds two free ports after checking they are free and complementary.
    pub fn try_bond(&mut self, a: PortRef, b: PortRef) -> Result<()> {
        for p in [a, b] {
            if p.center as usize >= self.size() || p.port as usize >= self.degree(p.center as usize) {
                return Err(Error::MalformedMap(format!("no port {}.{}", p.center, p.port)));
            }
        }
        let (ea, eb) = (self.entry(a), self.entry(b));
        if a == b || !ea.is_free() || !eb.is_free() {
            return Err(Error::MalformedMap("port already bonded".into()));
        }
        if !ea.color().complements(eb.color()) {
            return Err(Error::MalformedMap("colors are not complementary".into()));
        }
        self.bond(a, b);
        Ok(())
    }

    /// Frees a bonded port and its peer.
    #[inline]
    pub fn unbond(&mut self, a: PortRef) {
        let da = self.dart(a);
        if let Entry::Bond { color, peer } = self.entries[da] {
            let db = self.dart(peer);
            self.entries[da] = Entry::Free(color);
            self.entries[db] = Entry::Free(self.entries[db].color());
            self.bonds -= 1;
        }
    }

    pub fn is_saturated(&self) -> bool {
        self.entries.iter().all(|e| !e.is_free())
    }

    pub fn free_ports(&self) -> impl Iterator<Item = PortRef> + '_ {
        (0..self.size()).flat_map(move |c| {
            self.entries(c)
                .iter()
                .enumerate()
                .filter(|(_, e)| e.is_free())
                .map(move |(i, _)| PortRef::new(c, i))
        })
    }

    /// Each bond once, as `(a, b)` with `a < b`.
    pub fn bonds(&self) -> Vec<(PortRef, PortRef)> {
        let mut out = Vec::with_capacity(self.bonds);
        for c in 0..self.size() {
            for (i, e) in self.entries(c).iter().enumerate() {
                if let Entry::Bond { peer, .. } = e {
                    let me = PortRef::new(c, i);
                    if me < *peer {
                        out.push((me, *peer));
                    }
                }
            }
        }
        out
    }

    /// Successor of a dart along its face.
    #[inline]
    pub fn face_next(&self, p: PortRef) -> PortRef {
        match self.entry(p) {
            Entry::Bond { peer, .. } => {
                let d = self.degree(peer.center as usize) as u32;
                PortRef { center: peer.center, port: (peer.port + 1) % d }
            }
            Entry::Free(_) => {
                let d = self.degree(p.center as usize) as u32;
                PortRef { center: p.center, port: (p.port + 1) % d }
            }
        }
    }

    /// Faces as dart cycles; free ports behave as pendant edges.
    pub fn faces(&self) -> Vec<Vec<PortRef>> {
        let mut seen = vec![false; self.entries.len()];
        let mut faces = Vec::new();
        for c in 0..self.size() {
            for i in 0..self.degree(c) {
                let p0 = PortRef::new(c, i);
                if seen[self.dart(p0)] {
                    continue;
                }
                let mut face = Vec::new();
                let mut p = p0;
                while !seen[self.dart(p)] {
                    seen[self.dart(p)] = true;
                    face.push(p);
                    p = self.face_next(p);
                }
                faces.push(face);
            }
        }
        faces
    }

    /// Face index of every dart, and the face count.
    pub fn face_labels(&self) -> (Vec<u32>, usize) {
        let mut label = vec![u32::MAX; self.entries.len()];
        let mut f = 0u32;
        for d0 in 0..self.entries.len() {
            if label[d0] != u32::MAX {
                continue;
            }
            let c = self.start.partition_point(|&s| s as usize <= d0) - 1;
            let mut p = PortRef::new(c, d0 - self.start[c] as usize);
            while label[self.dart(p)] == u32::MAX {
                label[self.dart(p)] = f;
                p = self.face_next(p);
            }
            f += 1;
        }
        (label, f as usize)
    }

    pub fn is_connected(&self) -> bool {
        let n = self.size();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(c) = stack.pop() {
            for e in self.entries(c) {
                if let Some(p) = e.peer() {
                    let q = p.center as usize;
                    if !seen[q] {
                        seen[q] = true;
                        count += 1;
                        stack.push(q);
                    }
                }
            }
        }
        count == n
    }

    /// Smallest rotation offset of the center's motif matching its local colors.
    pub fn offset_of(&self, base: &MotifBase, c: usize) -> Option<usize> {
        let m = base.motif(self.motif_of(c));
        let local = self.entries(c);
        if m.degree() != local.len() {
            return None;
        }
        (0..m.degree()).find(|&o| m.rotated(o).zip(local).all(|(x, e)| x == e.color()))
    }

    /// Checks symmetry, colors, motifs, connectivity and planarity.
    pub fn validate(&self, base: &MotifBase) -> Result<()> {
        for c in 0..self.size() {
            if self.motif_of(c) >= base.len() {
                return Err(Error::MalformedMap(format!("center {c} has unknown motif")));
            }
            if self.offset_of(base, c).is_none() {
                return Err(Error::MalformedMap(format!("center {c} does not match its motif")));
            }
            for (i, e) in self.entries(c).iter().enumerate() {
                if let Entry::Bond { color, peer } = *e {
                    let (pc, pp) = (peer.center as usize, peer.port as usize);
                    if pc >= self.size() || pp >= self.degree(pc) {
                        return Err(Error::MalformedMap(format!("dangling bond at {c}.{i}")));
                    }
                    match self.entry(peer) {
                        Entry::Bond { color: pcol, peer: back }
                            if back == PortRef::new(c, i) && pcol.complements(color) => {}
                        _ => return Err(Error::MalformedMap(format!("asymmetric bond at {c}.{i}"))),
                    }
                    if peer == PortRef::new(c, i) {
                        return Err(Error::MalformedMap(format!("port {c}.{i} bonded to itself")));
                    }
                }
            }
        }
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        self.check_planar()
    }

    /// Euler check on a connected map.
    pub fn check_planar(&self) -> Result<()> {
        if self.size() == 0 {
            return Ok(());
        }
        let (_, f) = self.face_labels();
        let euler = self.size() as i64 - self.bonds as i64 + f as i64;
        if euler == 2 {
            Ok(())
        } else {
            Err(Error::NonPlanar { euler })
        }
    }

    /// The same map with every rotation order reversed.
    pub fn mirror(&self) -> MapOfMotifs {
        let flip = |m: &MapOfMotifs, p: PortRef| {
            let d = m.degree(p.center as usize) as u32;
            PortRef { center: p.center, port: (d - p.port) % d }
        };
        let mut out = self.clone();
        for c in 0..self.size() {
            for i in 0..self.degree(c) {
                let src = PortRef::new(c, i);
                let dst = flip(self, src);
                let e = match self.entry(src) {
                    Entry::Free(col) => Entry::Free(col),
                    Entry::Bond { color, peer } => Entry::Bond { color, peer: flip(self, peer) },
                };
                let d = out.dart(dst);
                out.entries[d] = e;
            }
        }
        out
    }

    /// Motif multiplicities, indexed by motif.
    pub fn motif_counts(&self, base_len: usize) -> Vec<usize> {
        let mut v = vec![0; base_len];
        for &m in &self.motif {
            v[m as usize] += 1;
        }
        v
    }

    /// Collapses the map to its molecular graph. Requires saturation.
    pub fn to_molecular_map(&self) -> Result<MolecularMap> {
        if !self.is_saturated() {
            return Err(Error::NotSaturated);
        }
        let adj = self
            .entries
            .iter()
            .map(|e| {
                let p = e.peer().expect("saturated");
                (p.center, p.port)
            })
            .collect();
        Ok(MolecularMap { labels: self.motif.clone(), start: self.start.clone(), adj })
    }

    /// Renders the rotation table, e.g. `[(0:J,[0->1.0,1->free:~a])]`.
    pub fn rotation_table(&self, base: &MotifBase) -> String {
        let mut s = String::from("[");
        for c in 0..self.size() {
            if c > 0 {
                s.push(',');
            }
            let m = base.motif(self.motif_of(c));
            s.push_str(&format!("({}:{}", c, m.name));
            match self.offset_of(base, c) {
                Some(0) => {}
                Some(o) => s.push_str(&format!("@{o}")),
                None => s.push_str("@?"),
            }
            s.push_str(",[");
            for (i, e) in self.entries(c).iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                match e {
                    Entry::Free(col) => {
                        s.push_str(&format!("{i}->free:{}", base.alphabet().render(*col)))
                    }
                    Entry::Bond { peer, .. } => {
                        s.push_str(&format!("{i}->{}.{}", peer.center, peer.port))
                    }
                }
            }
            s.push_str("])");
        }
        s.push(']');
        s
    }

    /// Parses a rotation table produced by [`MapOfMotifs::rotation_table`].
    pub fn parse_rotation_table(text: &str, base: &MotifBase) -> Result<MapOfMotifs> {
        let bad = |m: &str| Error::MalformedMap(m.to_string());
        let body = text
            .trim()
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| bad("missing brackets"))?;
        let mut map = MapOfMotifs::new();
        let mut pending: Vec<(PortRef, PortRef)> = Vec::new();
        let mut rest = body;
        while !rest.is_empty() {
            rest = rest.strip_prefix(',').unwrap_or(rest);
            let close = rest.find("])").ok_or_else(|| bad("unterminated center"))?;
            let item = rest[..close].strip_prefix('(').ok_or_else(|| bad("expected `(`"))?;
            rest = &rest[close + 2..];
            let (head, ports) = item.split_once(",[").ok_or_else(|| bad("expected `,[`"))?;
            let (idx, name) = head.split_once(':').ok_or_else(|| bad("expected `:`"))?;
            let idx: usize = idx.parse().map_err(|_| bad("bad center index"))?;
            if idx != map.size() {
                return Err(bad("centers out of order"));
            }
            let (name, offset) = match name.split_once('@') {
                Some((n, o)) => (n, o.parse::<usize>().map_err(|_| bad("bad offset"))?),
                None => (name, 0),
            };
            let mi = base.motif_index(name).ok_or_else(|| Error::UnknownMotif(name.to_string()))?;
            let m = base.motif(mi);
            if offset >= m.degree() {
                return Err(bad("offset out of range"));
            }
            let c = map.push_center(base, Attachment { motif: mi, offset });
            let ports: Vec<&str> = if ports.is_empty() { vec![] } else { ports.split(',').collect() };
            if ports.len() != m.degree() {
                return Err(bad("wrong port count"));
            }
            for (i, p) in ports.iter().enumerate() {
                let (pi, target) = p.split_once("->").ok_or_else(|| bad("expected `->`"))?;
                if pi.parse::<usize>().ok() != Some(i) {
                    return Err(bad("ports out of order"));
                }
                if let Some(col) = target.strip_prefix("free:") {
                    if base.alphabet().parse(col)? != map.entry(PortRef::new(c, i)).color() {
                        return Err(bad("free color mismatch"));
                    }
                } else {
                    let (pc, pp) = target.split_once('.').ok_or_else(|| bad("expected `c.p`"))?;
                    let pc: usize = pc.parse().map_err(|_| bad("bad peer"))?;
                    let pp: usize = pp.parse().map_err(|_| bad("bad peer port"))?;
                    pending.push((PortRef::new(c, i), PortRef::new(pc, pp)));
                }
            }
        }
        for &(a, b) in &pending {
            if b.center as usize >= map.size() || b.port as usize >= map.degree(b.center as usize) {
                return Err(bad("peer out of range"));
            }
            if !pending.contains(&(b, a)) {
                return Err(bad("asymmetric bond"));
            }
            if a < b {
                map.try_bond(a, b)?;
            }
        }
        Ok(map)
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.center, self.port)
    }
}

/// Vertices labeled by motif; every slot points to the reverse slot of a neighbor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MolecularMap {
    labels: Vec<u16>,
    start: Vec<u32>,
    adj: Vec<(u32, u32)>,
}

impl MolecularMap {
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.len() / 2
    }

    pub fn dart_count(&self) -> usize {
        self.adj.len()
    }

    pub fn label(&self, v: usize) -> usize {
        self.labels[v] as usize
    }

    pub fn degree(&self, v: usize) -> usize {
        (self.start[v + 1] - self.start[v]) as usize
    }

    #[inline]
    pub fn dart(&self, v: usize, slot: usize) -> usize {
        self.start[v] as usize + slot
    }

    /// Vertex owning a dart.
    pub fn tail(&self, d: usize) -> usize {
        self.start.partition_point(|&s| s as usize <= d) - 1
    }

    /// Opposite dart.
    #[inline]
    pub fn reverse(&self, d: usize) -> usize {
        let (v, s) = self.adj[d];
        self.start[v as usize] as usize + s as usize
    }

    /// Neighbor reached by slot `slot` of `v`.
    pub fn neighbor(&self, v: usize, slot: usize) -> usize {
        self.adj[self.dart(v, slot)].0 as usize
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.degree(v)).map(move |s| self.neighbor(v, s))
    }

    /// Edges as dart pairs `(d, reverse(d))` with `d < reverse(d)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.adj.len())
            .filter_map(|d| {
                let r = self.reverse(d);
                (d < r).then_some((d, r))
            })
            .collect()
    }

    /// Face index per dart, and the face count.
    pub fn face_labels(&self) -> (Vec<u32>, usize) {
        let mut label = vec![u32::MAX; self.adj.len()];
        let mut f = 0u32;
        for d0 in 0..self.adj.len() {
            if label[d0] != u32::MAX {
                continue;
            }
            let mut d = d0;
            while label[d] == u32::MAX {
                label[d] = f;
                let (v, s) = self.adj[d];
                let deg = self.degree(v as usize) as u32;
                d = self.dart(v as usize, ((s + 1) % deg) as usize);
            }
            f += 1;
        }
        (label, f as usize)
    }

    /// Face sizes in face order.
    pub fn face_sizes(&self) -> Vec<usize> {
        let (label, f) = self.face_labels();
        let mut sizes = vec![0; f];
        for l in label {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const JV: &str = "colors: a b\nmotif J: a b\nmotif V1: ~a ~a b\nmotif V2: a ~b ~b\n";

    #[test]
    fn parse_and_attachment_lists() {
        let base = MotifBase::parse(JV).unwrap();
        let al = base.alphabet();
        let (a, b) = (al.parse("a").unwrap(), al.parse("b").unwrap());
        let l = |c: Color| base.attachments(c).iter().map(|t| (t.motif, t.offset)).collect::<Vec<_>>();
        assert_eq!(l(a), vec![(1, 0), (1, 1)]);
        assert_eq!(l(a.complement()), vec![(0, 0), (2, 0)]);
        assert_eq!(l(b), vec![(2, 1), (2, 2)]);
        assert_eq!(l(b.complement()), vec![(0, 1), (1, 2)]);
        assert_eq!(MotifBase::parse(&base.to_text()).unwrap(), base);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(matches!(MotifBase::parse("colors: a\nmotif X: b"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(MotifBase::parse("motif X: a"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            MotifBase::parse("colors: a\nmotif X: a ~a\nmotif Y: ~a a"),
            Err(Error::DuplicateMotif(_))
        ));
        assert!(matches!(MotifBase::parse("# nothing\n"), Err(Error::EmptyBase)));
        assert!(MotifBase::parse("colors: a # c\n\nmotif Y: ~a ~a ~a # tri\nmotif I: a a\n").is_ok());
    }

    fn triangle(base: &MotifBase) -> MapOfMotifs {
        // V1 - V2 - J in a ring would not balance; build J-V1 pair instead
        let mut m = MapOfMotifs::new();
        let j = m.push_center(base, Attachment { motif: 0, offset: 0 });
        let v = m.push_center(base, Attachment { motif: 1, offset: 0 });
        m.bond(PortRef::new(j, 0), PortRef::new(v, 0));
        m
    }

    #[test]
    fn faces_with_free_ports() {
        let base = MotifBase::parse(JV).unwrap();
        let m = triangle(&base);
        assert_eq!(m.faces().len(), 1);
        assert_eq!(m.faces()[0].len(), 5);
        m.validate(&base).unwrap();
        let t = m.rotation_table(&base);
        assert_eq!(t, "[(0:J,[0->1.0,1->free:b]),(1:V1,[0->0.0,1->free:~a,2->free:b])]");
        assert_eq!(MapOfMotifs::parse_rotation_table(&t, &base).unwrap(), m);
    }

    #[test]
    fn pop_center_restores_state() {
        let base = MotifBase::parse(JV).unwrap();
        let mut m = triangle(&base);
        let before = m.clone();
        let c = m.push_center(&base, Attachment { motif: 2, offset: 1 });
        m.bond(PortRef::new(1, 2), PortRef::new(c, 0));
        m.pop_center();
        assert_eq!(m, before);
    }

    #[test]
    fn mirror_is_involution() {
        let base = MotifBase::parse(JV).unwrap();
        let m = triangle(&base);
        assert_eq!(m.mirror().mirror(), m);
    }
}
