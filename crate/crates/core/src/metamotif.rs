//! Metamotifs: rewriting a base so that it has no degree-2 motifs.
//!
//! A degree-2 motif always sits between two other motifs, so it can be
//! absorbed into a neighbor. Every other motif is offered with each of its
//! ports either untouched or capped by a degree-2 motif. Afterwards, a color
//! carried by exactly one port of every motif that uses it forces motifs to
//! pair up along that color, and the pairs are merged when this does not
//! raise the largest degree.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::model::{Attachment, Color, ColorAlphabet, Entry, MapOfMotifs, Motif, MotifBase, PortRef};

/// A small map over the original base standing for one metamotif.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub centers: Vec<Attachment>,
    pub bonds: Vec<(PortRef, PortRef)>,
    /// Pattern ports exposed as the metamotif's ports, in declared order.
    pub ports: Vec<PortRef>,
}

impl Pattern {
    fn single(motif: usize, degree: usize) -> Self {
        Pattern {
            centers: vec![Attachment { motif, offset: 0 }],
            bonds: vec![],
            ports: (0..degree).map(|p| PortRef::new(0, p)).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.centers.len()
    }

    fn rotated(&self, t: usize) -> Pattern {
        let d = self.ports.len();
        Pattern { ports: (0..d).map(|i| self.ports[(t + i) % d]).collect(), ..self.clone() }
    }

    fn to_map(&self, base: &MotifBase) -> MapOfMotifs {
        let mut m = MapOfMotifs::new();
        for &a in &self.centers {
            m.push_center(base, a);
        }
        for &(a, b) in &self.bonds {
            m.bond(a, b);
        }
        m
    }

    /// Encoding independent of how centers are numbered.
    fn key(&self, base: &MotifBase) -> Vec<u32> {
        let map = self.to_map(base);
        let exposed = |p: PortRef| self.ports.iter().position(|&q| q == p);
        let mut index = vec![u32::MAX; map.size()];
        let mut loop_start = vec![0u32; map.size()];
        let mut out = Vec::new();
        let Some(&p0) = self.ports.first() else { return out };
        index[p0.center as usize] = 0;
        loop_start[p0.center as usize] = p0.port;
        let mut next = 1;
        let mut stack = vec![(p0.center, 0u32)];
        while let Some(top) = stack.last_mut() {
            let (c, k) = *top;
            let deg = map.degree(c as usize) as u32;
            if k == deg {
                stack.pop();
                continue;
            }
            top.1 += 1;
            let p = PortRef { center: c, port: (loop_start[c as usize] + k) % deg };
            out.push(map.motif_of(c as usize) as u32);
            out.push(map.entry(p).color().index() as u32);
            match map.entry(p) {
                Entry::Free(_) => out.push(1000 + exposed(p).expect("exposed") as u32),
                Entry::Bond { peer, .. } => {
                    let t = peer.center as usize;
                    if index[t] == u32::MAX {
                        index[t] = next;
                        next += 1;
                        loop_start[t] = (peer.port + 1) % map.degree(t) as u32;
                        stack.push((peer.center, 0));
                        out.push(index[t]);
                    } else {
                        let td = map.degree(t) as u32;
                        out.push(index[t]);
                        out.push(2000 + (peer.port + td - loop_start[t]) % td);
                    }
                }
            }
        }
        out
    }
}

/// The original base and, per metamotif, every pattern it can stand for.
#[derive(Clone, Debug)]
pub struct ExpansionMap {
    pub original: MotifBase,
    pub patterns: Vec<Vec<Pattern>>,
}

impl ExpansionMap {
    /// Largest number of original motifs behind one metamotif.
    pub fn max_pattern_size(&self) -> usize {
        self.patterns.iter().flatten().map(Pattern::size).max().unwrap_or(1)
    }
}

struct Draft {
    name: String,
    ports: Vec<Color>,
    patterns: Vec<Pattern>,
}

fn port_colors(base: &MotifBase, p: &Pattern) -> Vec<Color> {
    p.ports
        .iter()
        .map(|q| {
            let a = p.centers[q.center as usize];
            let m = base.motif(a.motif);
            m.ports[(a.offset + q.port as usize) % m.degree()]
        })
        .collect()
}

fn min_rotation(s: &[Color]) -> Vec<Color> {
    (0..s.len().max(1))
        .map(|t| (0..s.len()).map(|i| s[(t + i) % s.len()]).collect::<Vec<_>>())
        .min()
        .unwrap_or_default()
}

/// Groups drafts by cyclic port sequence, aligning every pattern to the
/// group's least rotation in every possible way.
fn normalize(original: &MotifBase, drafts: Vec<Draft>) -> Vec<Draft> {
    let mut out: Vec<Draft> = Vec::new();
    for d in drafts {
        let seq = min_rotation(&d.ports);
        let slot = match out.iter().position(|o| o.ports == seq) {
            Some(i) => i,
            None => {
                out.push(Draft { name: d.name.clone(), ports: seq.clone(), patterns: vec![] });
                out.len() - 1
            }
        };
        for p in &d.patterns {
            for t in 0..d.ports.len() {
                let r = p.rotated(t);
                if port_colors(original, &r) == seq {
                    let key = r.key(original);
                    if !out[slot].patterns.iter().any(|q| q.key(original) == key) {
                        out[slot].patterns.push(r);
                    }
                }
            }
        }
    }
    out
}

fn absorb(original: &MotifBase) -> Result<Vec<Draft>> {
    let motifs = original.motifs();
    let twos: Vec<usize> = (0..motifs.len()).filter(|&m| motifs[m].degree() == 2).collect();
    for &x in &twos {
        for &y in &twos {
            let cx = &motifs[x].ports;
            if motifs[y].ports.iter().any(|c| cx.iter().any(|d| d.complements(*c))) {
                return Err(Error::NonTerminating(motifs[x].name.clone(), motifs[y].name.clone()));
            }
        }
    }
    let al = original.alphabet();
    let mut drafts = Vec::new();
    for (h, host) in motifs.iter().enumerate() {
        if host.degree() == 2 && !twos.is_empty() {
            continue;
        }
        // per host port: None keeps it, Some((d, q)) caps it with port q of d
        let options: Vec<Vec<Option<(usize, usize)>>> = host
            .ports
            .iter()
            .map(|&c| {
                let mut v = vec![None];
                let mut seen = HashSet::new();
                for &d in &twos {
                    for q in 0..2 {
                        let dp = &motifs[d].ports;
                        if dp[q].complements(c) && seen.insert((d, dp[1 - q])) {
                            v.push(Some((d, q)));
                        }
                    }
                }
                v
            })
            .collect();
        let mut choice = vec![0usize; host.degree()];
        loop {
            let mut p = Pattern::single(h, host.degree());
            for (i, &ci) in choice.iter().enumerate() {
                if let Some((d, q)) = options[i][ci] {
                    let c = p.centers.len();
                    p.centers.push(Attachment { motif: d, offset: q });
                    p.bonds.push((PortRef::new(0, i), PortRef::new(c, 0)));
                    p.ports[i] = PortRef::new(c, 1);
                }
            }
            let ports = port_colors(original, &p);
            let name = if p.size() == 1 {
                host.name.clone()
            } else {
                let tag: Vec<String> = min_rotation(&ports).iter().map(|c| al.render(*c)).collect();
                format!("{}_{}", host.name, tag.join("."))
            };
            drafts.push(Draft { name, ports, patterns: vec![p] });
            // next choice in mixed radix
            let mut i = 0;
            while i < choice.len() {
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    break;
                }
                choice[i] = 0;
                i += 1;
            }
            if i == choice.len() {
                break;
            }
        }
    }
    Ok(drafts)
}

fn merge_pattern(a: &Pattern, i: usize, b: &Pattern, j: usize) -> Pattern {
    let shift = a.centers.len() as u32;
    let sh = |p: PortRef| PortRef { center: p.center + shift, port: p.port };
    let mut centers = a.centers.clone();
    centers.extend(&b.centers);
    let mut bonds = a.bonds.clone();
    bonds.extend(b.bonds.iter().map(|&(x, y)| (sh(x), sh(y))));
    bonds.push((a.ports[i], sh(b.ports[j])));
    let (da, db) = (a.ports.len(), b.ports.len());
    let mut ports: Vec<PortRef> = (1..da).map(|k| a.ports[(i + k) % da]).collect();
    ports.extend((1..db).map(|k| sh(b.ports[(j + k) % db])));
    Pattern { centers, bonds, ports }
}

/// One pairing step on a color used by a single port of every motif carrying it.
fn merge_private_color(original: &MotifBase, drafts: &[Draft], k: usize) -> Option<Vec<Draft>> {
    let max_deg = drafts.iter().map(|d| d.ports.len()).max().unwrap_or(0);
    'colors: for x in 0..k {
        let pos = Color::positive(x);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (m, d) in drafts.iter().enumerate() {
            let hits: Vec<usize> = (0..d.ports.len()).filter(|&i| d.ports[i].base_index() == x).collect();
            match hits.as_slice() {
                [] => {}
                [i] if d.ports[*i] == pos => plus.push((m, *i)),
                [i] => minus.push((m, *i)),
                _ => continue 'colors,
            }
        }
        if plus.is_empty() || minus.is_empty() {
            continue;
        }
        let ok = plus.iter().all(|&(p, _)| {
            minus.iter().all(|&(q, _)| {
                let deg = drafts[p].ports.len() + drafts[q].ports.len() - 2;
                deg >= 1 && deg <= max_deg
            })
        });
        if !ok {
            continue;
        }
        let involved: HashSet<usize> = plus.iter().chain(&minus).map(|&(m, _)| m).collect();
        let mut out: Vec<Draft> = drafts
            .iter()
            .enumerate()
            .filter(|(m, _)| !involved.contains(m))
            .map(|(_, d)| Draft { name: d.name.clone(), ports: d.ports.clone(), patterns: d.patterns.clone() })
            .collect();
        for &(p, i) in &plus {
            for &(q, j) in &minus {
                let (a, b) = (&drafts[p], &drafts[q]);
                let patterns: Vec<Pattern> = a
                    .patterns
                    .iter()
                    .flat_map(|pa| b.patterns.iter().map(move |pb| merge_pattern(pa, i, pb, j)))
                    .collect();
                let ports = port_colors(original, &patterns[0]);
                out.push(Draft { name: format!("{}+{}", a.name, b.name), ports, patterns });
            }
        }
        return Some(normalize(original, out));
    }
    None
}

/// Rewrites `base` without degree-2 motifs. Also returns how to expand maps back.
pub fn eliminate_degree2(base: &MotifBase) -> Result<(MotifBase, ExpansionMap)> {
    let mut drafts = normalize(base, absorb(base)?);
    let k = base.alphabet().len();
    while let Some(next) = merge_private_color(base, &drafts, k) {
        drafts = next;
    }
    let mut used = HashSet::new();
    let mut motifs = Vec::new();
    let mut patterns = Vec::new();
    for d in drafts {
        let mut name = d.name.clone();
        let mut suffix = 1;
        while !used.insert(name.clone()) || base.alphabet().names().contains(&name) {
            suffix += 1;
            name = format!("{}.{}", d.name, suffix);
        }
        motifs.push(Motif { name, ports: d.ports });
        patterns.push(d.patterns);
    }
    let alphabet = ColorAlphabet::new(base.alphabet().names())?;
    let meta = MotifBase::new(alphabet, motifs)?;
    Ok((meta, ExpansionMap { original: base.clone(), patterns }))
}

/// Expands a map over the metamotif base into every map it stands for.
pub fn expand(map: &MapOfMotifs, exp: &ExpansionMap, meta: &MotifBase) -> Result<Vec<MapOfMotifs>> {
    let n = map.size();
    let mut offsets = Vec::with_capacity(n);
    for c in 0..n {
        let o = map
            .offset_of(meta, c)
            .ok_or_else(|| Error::MalformedMap(format!("center {c} does not match its metamotif")))?;
        offsets.push(o);
    }
    let mut out = Vec::new();
    let mut choice = vec![0usize; n];
    loop {
        let mut m = MapOfMotifs::new();
        let mut port_of: Vec<Vec<PortRef>> = Vec::with_capacity(n);
        for c in 0..n {
            let pat = &exp.patterns[map.motif_of(c)][choice[c]];
            let first = m.size() as u32;
            for &a in &pat.centers {
                m.push_center(&exp.original, a);
            }
            let sh = |p: PortRef| PortRef { center: p.center + first, port: p.port };
            for &(a, b) in &pat.bonds {
                m.bond(sh(a), sh(b));
            }
            let d = pat.ports.len();
            port_of.push((0..d).map(|i| sh(pat.ports[(offsets[c] + i) % d])).collect());
        }
        for (a, b) in map.bonds() {
            m.try_bond(port_of[a.center as usize][a.port as usize], port_of[b.center as usize][b.port as usize])?;
        }
        out.push(m);
        let mut c = 0;
        while c < n {
            choice[c] += 1;
            if choice[c] < exp.patterns[map.motif_of(c)].len() {
                break;
            }
            choice[c] = 0;
            c += 1;
        }
        if c == n {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(base: &MotifBase) -> Vec<String> {
        let mut v: Vec<String> = base
            .motifs()
            .iter()
            .map(|m| m.ports.iter().map(|c| base.alphabet().render(*c)).collect::<Vec<_>>().join(" "))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn y_and_i_give_four_metamotifs() {
        let base = MotifBase::parse("colors: a\nmotif Y: ~a ~a ~a\nmotif I: a a\n").unwrap();
        let (meta, exp) = eliminate_degree2(&base).unwrap();
        assert_eq!(seqs(&meta), vec!["a a a", "a a ~a", "a ~a ~a", "~a ~a ~a"]);
        assert!(exp.patterns.iter().all(|p| p.len() == 1));
        assert_eq!(exp.max_pattern_size(), 4);
    }

    #[test]
    fn private_colors_are_merged() {
        let base = MotifBase::parse("colors: a b\nmotif X: a a a a\nmotif V: ~a ~a b\nmotif I: ~b ~b\n").unwrap();
        let (meta, _) = eliminate_degree2(&base).unwrap();
        assert_eq!(seqs(&meta), vec!["a a a a", "~a ~a ~a ~a"]);
    }

    #[test]
    fn concatenable_degree_two_motifs_are_rejected() {
        let base = MotifBase::parse("colors: a\nmotif Y: ~a ~a ~a\nmotif I: a ~a\n").unwrap();
        assert!(matches!(eliminate_degree2(&base), Err(Error::NonTerminating(..))));
    }

    #[test]
    fn bases_without_degree_two_are_unchanged() {
        let base = MotifBase::parse("colors: a\nmotif X1: a a a a\nmotif X2: ~a ~a ~a ~a\n").unwrap();
        let (meta, exp) = eliminate_degree2(&base).unwrap();
        assert_eq!(seqs(&meta), seqs(&base));
        assert_eq!(exp.max_pattern_size(), 1);
    }

    #[test]
    fn expansion_replaces_every_metamotif() {
        let base = MotifBase::parse("colors: a\nmotif Y: ~a ~a ~a\nmotif I: a a\n").unwrap();
        let (meta, exp) = eliminate_degree2(&base).unwrap();
        let y3 = meta.motifs().iter().position(|m| m.ports.iter().all(|c| c.is_positive())).unwrap();
        let y0 = meta.motifs().iter().position(|m| m.ports.iter().all(|c| !c.is_positive())).unwrap();
        let mut m = MapOfMotifs::new();
        m.push_center(&meta, Attachment { motif: y3, offset: 0 });
        m.push_center(&meta, Attachment { motif: y0, offset: 0 });
        for i in 0..3 {
            m.bond(PortRef::new(0, i), PortRef::new(1, (3 - i) % 3));
        }
        let maps = expand(&m, &exp, &meta).unwrap();
        assert_eq!(maps.len(), 1);
        assert_eq!(maps[0].size(), 5);
        maps[0].validate(&base).unwrap();
        assert!(maps[0].is_saturated());
    }
}
