//! The generate, fold, deduplicate and score pipeline, and the catalog format.

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::backbone::{BackboneMode, Generator, ReachTable};
use crate::canonical::{reconstruct, Canonizer, DedupStore, Signature, SignatureContext};
use crate::error::{Error, Result};
use crate::folding::Folder;
use crate::indices::{compute_indices, IndexReport, Rational};
use crate::metamotif::{eliminate_degree2, expand, ExpansionMap};
use crate::model::{MapOfMotifs, MotifBase};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything a run needs.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub base: MotifBase,
    /// Text the base was parsed from; hashed into the catalog header.
    pub base_text: String,
    pub size: usize,
    pub mode: BackboneMode,
    pub almost_foldable: bool,
    pub metamotif: bool,
    pub min_sparsity: Option<Rational>,
    pub indices: bool,
    pub workers: usize,
    pub budget: Option<Duration>,
}

impl RunConfig {
    pub fn new(base_text: &str, size: usize, mode: BackboneMode) -> Result<Self> {
        Ok(RunConfig {
            base: MotifBase::parse(base_text)?,
            base_text: base_text.to_string(),
            size,
            mode,
            almost_foldable: true,
            metamotif: false,
            min_sparsity: None,
            indices: true,
            workers: 1,
            budget: Some(Duration::from_secs(300)),
        })
    }
}

/// Wall time spent in each stage, summed over workers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub backbone: Duration,
    pub fold: Duration,
    pub dedup: Duration,
    pub indices: Duration,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CatalogSummary {
    pub backbones: u64,
    pub saturated: u64,
    pub unique: usize,
    pub kept: usize,
    pub times: StageTimes,
    pub wall: Duration,
    pub complete: bool,
    pub warnings: Vec<String>,
}

/// Three significant figures, as in `9.87e3`.
pub fn sci3(x: u64) -> String {
    if x < 1000 {
        return x.to_string();
    }
    format!("{:.2e}", x as f64)
}

impl CatalogSummary {
    pub fn render(&self, config: &RunConfig) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "size {}  backbone {}  almost-foldable {}  metamotif {}",
            config.size,
            config.mode,
            if config.almost_foldable { "yes" } else { "no" },
            if config.metamotif { "yes" } else { "no" }
        );
        let _ = writeln!(s, "backbones       {:>12}  ({})", self.backbones, sci3(self.backbones));
        let _ = writeln!(s, "saturated maps  {:>12}", self.saturated);
        let _ = writeln!(s, "unique maps     {:>12}", self.unique);
        let _ = writeln!(s, "kept            {:>12}", self.kept);
        let t = &self.times;
        let _ = writeln!(
            s,
            "time (s)        backbone {:.3}  fold {:.3}  dedup {:.3}  indices {:.3}  wall {:.3}",
            t.backbone.as_secs_f64(),
            t.fold.as_secs_f64(),
            t.dedup.as_secs_f64(),
            t.indices.as_secs_f64(),
            self.wall.as_secs_f64()
        );
        let _ = writeln!(s, "complete        {}", self.complete);
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub signature: Signature,
    pub counts: Vec<usize>,
    pub map: MapOfMotifs,
    pub report: Option<IndexReport>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CatalogHeader {
    pub base_hash: String,
    pub size: usize,
    pub mode: BackboneMode,
    pub almost_foldable: bool,
    pub metamotif: bool,
    pub radix: usize,
    pub max_size: usize,
    pub version: String,
    pub complete: bool,
}

#[derive(Clone, Debug)]
pub struct Catalog {
    pub header: CatalogHeader,
    pub base: MotifBase,
    pub expansion: Option<(MotifBase, ExpansionMap)>,
    pub records: Vec<Record>,
}

fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

struct Worker {
    folder: Folder,
    canon: Canonizer,
    fold: Duration,
    dedup: Duration,
    backbones: u64,
    saturated: u64,
}

/// Runs the pipeline and returns the catalog with its summary.
pub fn run(config: &RunConfig) -> Result<(Catalog, CatalogSummary)> {
    let start = Instant::now();
    let n = config.size;
    if n == 0 {
        return Err(Error::Parse { line: 0, msg: "size must be positive".into() });
    }
    let original = &config.base;
    let expansion = if config.metamotif { Some(eliminate_degree2(original)?) } else { None };
    let gen_base = expansion.as_ref().map_or(original, |(b, _)| b);
    let max_size = expansion.as_ref().map_or(n, |(_, e)| n * e.max_pattern_size());
    let ctx = SignatureContext::new(original, max_size);
    let meta_ctx = SignatureContext::new(gen_base, n);
    let reach = if config.almost_foldable { Some(ReachTable::precompute(gen_base, n)?) } else { None };

    let stop = AtomicBool::new(false);
    let mut generator = Generator::new(gen_base, n).stop_flag(&stop);
    if let Some(r) = &reach {
        generator = generator.prune(r);
    }
    let tasks = generator.tasks(config.mode);
    let store: DedupStore = DedupStore::new(64);
    // metamotif maps are deduplicated before expansion
    let meta_store: DedupStore = DedupStore::new(64);
    let total_backbones = AtomicU64::new(0);
    let failure: Mutex<Option<Error>> = Mutex::new(None);
    let totals = Mutex::new(StageTimes::default());
    let saturated = AtomicU64::new(0);
    let budget = config.budget;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.max(1))
        .build()
        .map_err(|e| Error::Io(e.to_string()))?;
    let (done_tx, done_rx) = std::sync::mpsc::channel::<()>();
    let work = || {
        tasks.par_iter().for_each(|&task| {
            let t0 = Instant::now();
            let mut w = Worker {
                folder: Folder::new(),
                canon: Canonizer::new(),
                fold: Duration::ZERO,
                dedup: Duration::ZERO,
                backbones: 0,
                saturated: 0,
            };
            let mut sink = |m: &MapOfMotifs| {
                w.backbones += 1;
                let f0 = Instant::now();
                let mut dedup = Duration::ZERO;
                let canon = &mut w.canon;
                let produced = w.folder.saturate_all(m, |sat| {
                    let d0 = Instant::now();
                    let expanded;
                    let maps: &[MapOfMotifs] = match &expansion {
                        Some((meta, exp)) => match canon
                            .canonical(&meta_ctx, sat)
                            .and_then(|sig| if meta_store.insert(sig, ()) { expand(sat, exp, meta) } else { Ok(vec![]) })
                        {
                            Ok(v) => {
                                expanded = v;
                                &expanded
                            }
                            Err(e) => {
                                failure.lock().get_or_insert(e);
                                stop.store(true, Ordering::Relaxed);
                                return;
                            }
                        },
                        None => std::slice::from_ref(sat),
                    };
                    for mm in maps {
                        match canon.canonical(&ctx, mm) {
                            Ok(sig) => {
                                store.insert(sig, ());
                            }
                            Err(e) => {
                                failure.lock().get_or_insert(e);
                                stop.store(true, Ordering::Relaxed);
                            }
                        }
                    }
                    dedup += d0.elapsed();
                });
                w.saturated += produced as u64;
                w.dedup += dedup;
                w.fold += f0.elapsed().saturating_sub(dedup);
            };
            generator.run_mode(config.mode, task, &mut sink);
            let elapsed = t0.elapsed();
            total_backbones.fetch_add(w.backbones, Ordering::Relaxed);
            saturated.fetch_add(w.saturated, Ordering::Relaxed);
            let mut t = totals.lock();
            t.fold += w.fold;
            t.dedup += w.dedup;
            t.backbone += elapsed.saturating_sub(w.fold + w.dedup);
        });
    };
    let complete = std::thread::scope(|scope| {
        if let Some(b) = budget {
            let stop = &stop;
            scope.spawn(move || {
                if let Err(std::sync::mpsc::RecvTimeoutError::Timeout) = done_rx.recv_timeout(b) {
                    stop.store(true, Ordering::Relaxed);
                }
            });
        }
        pool.install(work);
        let complete = !stop.load(Ordering::Relaxed);
        drop(done_tx);
        complete
    });
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }

    let i0 = Instant::now();
    let sigs: Vec<Signature> = store.into_sorted().into_iter().map(|(s, _)| s).collect();
    let unique = sigs.len();
    let records: Vec<Result<Option<Record>>> = pool.install(|| {
        sigs.into_par_iter()
            .map(|sig| {
                let map = reconstruct(&ctx, original, &sig)?;
                let report = if config.indices || config.min_sparsity.is_some() {
                    Some(compute_indices(&ctx, &map)?)
                } else {
                    None
                };
                if let (Some(th), Some(r)) = (config.min_sparsity, &report) {
                    if r.min_sparsity < th {
                        return Ok(None);
                    }
                }
                let counts = map.motif_counts(original.len());
                Ok(Some(Record { signature: sig, counts, map, report }))
            })
            .collect()
    });
    let records: Vec<Record> = records.into_iter().filter_map(|r| r.transpose()).collect::<Result<_>>()?;
    let mut times = totals.into_inner();
    times.indices = i0.elapsed();

    let backbones = total_backbones.into_inner();
    let mut warnings = Vec::new();
    if backbones == 0 {
        warnings.push(format!("no {} backbone of size {} exists for this base", config.mode, n));
    }
    if !complete {
        warnings.push("time budget exceeded, catalog is partial".into());
    }
    let summary = CatalogSummary {
        backbones,
        saturated: saturated.into_inner(),
        unique,
        kept: records.len(),
        times,
        wall: start.elapsed(),
        complete,
        warnings,
    };
    let catalog = Catalog {
        header: CatalogHeader {
            base_hash: sha256_hex(&config.base_text),
            size: n,
            mode: config.mode,
            almost_foldable: config.almost_foldable,
            metamotif: config.metamotif,
            radix: ctx.radix(),
            max_size,
            version: VERSION.to_string(),
            complete,
        },
        base: original.clone(),
        expansion,
        records,
    };
    Ok((catalog, summary))
}

/// Comparison operators of a filter clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Op {
    fn holds<T: PartialOrd>(self, a: T, b: T) -> bool {
        match self {
            Op::Eq => a == b,
            Op::Ne => a != b,
            Op::Lt => a < b,
            Op::Le => a <= b,
            Op::Gt => a > b,
            Op::Ge => a >= b,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Value {
    Num(Rational),
    Bool(bool),
}

#[derive(Clone, Debug, PartialEq)]
struct Clause {
    field: String,
    op: Op,
    value: Value,
}

/// A conjunction of comparisons on record fields, e.g. `min_sparsity>=3/2,chiral=false`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Predicate {
    clauses: Vec<Clause>,
}

const NUMERIC: [&str; 5] = ["size", "largest_face", "face_gap", "class_count", "min_sparsity"];

pub fn parse_rational(s: &str) -> Result<Rational> {
    let bad = || Error::BadPredicate(s.to_string());
    match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (u64, u64) = (p.trim().parse().map_err(|_| bad())?, q.trim().parse().map_err(|_| bad())?);
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(s.trim().parse().map_err(|_| bad())?)),
    }
}

impl FromStr for Predicate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut clauses = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (pos, len, op) = [(">=", Op::Ge), ("<=", Op::Le), ("!=", Op::Ne), ("=", Op::Eq), ("<", Op::Lt), (">", Op::Gt)]
                .iter()
                .find_map(|(tok, op)| part.find(tok).map(|i| (i, tok.len(), *op)))
                .ok_or_else(|| Error::BadPredicate(part.to_string()))?;
            let field = part[..pos].trim().to_string();
            let raw = part[pos + len..].trim();
            let value = if field == "chiral" {
                match raw {
                    "true" => Value::Bool(true),
                    "false" => Value::Bool(false),
                    _ => return Err(Error::BadPredicate(part.to_string())),
                }
            } else if NUMERIC.contains(&field.as_str()) {
                Value::Num(parse_rational(raw)?)
            } else {
                return Err(Error::UnknownField(field));
            };
            clauses.push(Clause { field, op, value });
        }
        Ok(Predicate { clauses })
    }
}

impl Predicate {
    pub fn always() -> Self {
        Predicate::default()
    }

    pub fn matches(&self, r: &Record) -> bool {
        self.clauses.iter().all(|c| {
            let int = |x: usize| Rational::from_integer(x as u64);
            let actual = match (c.field.as_str(), &r.report) {
                ("size", _) => Value::Num(int(r.map.size())),
                (_, None) => return false,
                ("largest_face", Some(x)) => Value::Num(int(x.largest_face)),
                ("face_gap", Some(x)) => Value::Num(x.face_gap),
                ("class_count", Some(x)) => Value::Num(int(x.class_count)),
                ("min_sparsity", Some(x)) => Value::Num(x.min_sparsity),
                ("chiral", Some(x)) => Value::Bool(x.chiral),
                _ => return false,
            };
            match (actual, &c.value) {
                (Value::Num(a), Value::Num(b)) => c.op.holds(a, *b),
                (Value::Bool(a), Value::Bool(b)) => c.op.holds(a, *b),
                _ => false,
            }
        })
    }
}

/// Keeps the records matching `predicate`, in order.
pub fn filter(catalog: &Catalog, predicate: &Predicate) -> Catalog {
    Catalog { records: catalog.records.iter().filter(|r| predicate.matches(r)).cloned().collect(), ..catalog.clone() }
}

fn ratio_text(r: Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

impl Catalog {
    /// Serializes the catalog: `#` header lines, then one tab-separated record per line.
    pub fn format(&self) -> String {
        let h = &self.header;
        let mut s = String::new();
        let _ = writeln!(s, "# cagegen catalog");
        let _ = writeln!(s, "# version: {}", h.version);
        let _ = writeln!(s, "# base-sha256: {}", h.base_hash);
        let _ = writeln!(s, "# size: {}", h.size);
        let _ = writeln!(s, "# mode: {}", h.mode);
        let _ = writeln!(s, "# almost-foldable: {}", h.almost_foldable);
        let _ = writeln!(s, "# metamotif: {}", h.metamotif);
        let _ = writeln!(s, "# radix: {}", h.radix);
        let _ = writeln!(s, "# max-centers: {}", h.max_size);
        let _ = writeln!(s, "# complete: {}", h.complete);
        for line in self.base.to_text().lines() {
            let _ = writeln!(s, "# base: {line}");
        }
        if let Some((meta, exp)) = &self.expansion {
            for (m, pats) in meta.motifs().iter().zip(&exp.patterns) {
                let ports: Vec<String> = m.ports.iter().map(|c| meta.alphabet().render(*c)).collect();
                for p in pats {
                    let mut pm = MapOfMotifs::new();
                    for &a in &p.centers {
                        pm.push_center(&exp.original, a);
                    }
                    for &(a, b) in &p.bonds {
                        pm.bond(a, b);
                    }
                    let exposed: Vec<String> = p.ports.iter().map(|q| q.to_string()).collect();
                    let _ = writeln!(
                        s,
                        "# metamotif {}: {}\t{}\t{}",
                        m.name,
                        ports.join(" "),
                        pm.rotation_table(&exp.original),
                        exposed.join(",")
                    );
                }
            }
        }
        let _ = writeln!(s, "# fields: signature\tcounts\trotation\tlargest_face\tface_gap\tclass_count\tchiral\tmin_sparsity");
        for r in &self.records {
            let counts: Vec<String> = self
                .base
                .motifs()
                .iter()
                .zip(&r.counts)
                .map(|(m, c)| format!("{}={}", m.name, c))
                .collect();
            let _ = write!(s, "{}\t{}\t{}", r.signature, counts.join(","), r.map.rotation_table(&self.base));
            match &r.report {
                Some(x) => {
                    let _ = writeln!(
                        s,
                        "\t{}\t{}\t{}\t{}\t{}",
                        x.largest_face,
                        ratio_text(x.face_gap),
                        x.class_count,
                        x.chiral,
                        ratio_text(x.min_sparsity)
                    );
                }
                None => {
                    let _ = writeln!(s, "\t-\t-\t-\t-\t-");
                }
            }
        }
        s
    }

    /// Reads records back; the base comes from the `# base:` header lines.
    pub fn parse(text: &str) -> Result<Catalog> {
        let mut fields: std::collections::HashMap<String, String> = Default::default();
        let mut base_text = String::new();
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("# ") {
                if let Some(b) = rest.strip_prefix("base: ") {
                    base_text.push_str(b);
                    base_text.push('\n');
                } else if let Some((k, v)) = rest.split_once(": ") {
                    fields.insert(k.to_string(), v.to_string());
                }
            } else if !line.trim().is_empty() {
                lines.push((i + 1, line));
            }
        }
        let base = MotifBase::parse(&base_text)?;
        let get = |k: &str| fields.get(k).cloned().ok_or_else(|| Error::Parse { line: 0, msg: format!("missing header `{k}`") });
        let num = |k: &str| -> Result<usize> {
            get(k)?.parse().map_err(|_| Error::Parse { line: 0, msg: format!("bad header `{k}`") })
        };
        let flag = |k: &str| -> Result<bool> { Ok(get(k)? == "true") };
        let header = CatalogHeader {
            base_hash: get("base-sha256")?,
            size: num("size")?,
            mode: get("mode")?.parse()?,
            almost_foldable: flag("almost-foldable")?,
            metamotif: flag("metamotif")?,
            radix: num("radix")?,
            max_size: num("max-centers")?,
            version: get("version")?,
            complete: flag("complete")?,
        };
        let mut records = Vec::new();
        for (ln, line) in lines {
            let err = |msg: &str| Error::Parse { line: ln, msg: msg.to_string() };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 8 {
                return Err(err("expected 8 tab-separated fields"));
            }
            let signature: Signature = cols[0].parse()?;
            let map = MapOfMotifs::parse_rotation_table(cols[2], &base)?;
            let counts = map.motif_counts(base.len());
            let report = if cols[3] == "-" {
                None
            } else {
                let p = |s: &str| parse_rational(s).map_err(|_| err("bad rational"));
                Some(IndexReport {
                    largest_face: cols[3].parse().map_err(|_| err("bad largest_face"))?,
                    face_gap: p(cols[4])?,
                    class_count: cols[5].parse().map_err(|_| err("bad class_count"))?,
                    chiral: cols[6] == "true",
                    min_sparsity: p(cols[7])?,
                })
            };
            records.push(Record { signature, counts, map, report });
        }
        Ok(Catalog { header, base, expansion: None, records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::tests::isomorphic;

    const JV: &str = "colors: a b\nmotif J: a b\nmotif V1: ~a ~a b\nmotif V2: a ~b ~b\n";

    fn small(mode: BackboneMode, n: usize) -> (Catalog, CatalogSummary) {
        run(&RunConfig::new(JV, n, mode).unwrap()).unwrap()
    }

    #[test]
    fn catalog_round_trips_and_signatures_rebuild_their_maps() {
        let (cat, summary) = small(BackboneMode::Path, 6);
        assert!(summary.complete);
        assert_eq!(summary.unique, cat.records.len());
        let text = cat.format();
        let back = Catalog::parse(&text).unwrap();
        assert_eq!(back.records, cat.records);
        assert_eq!(back.header, cat.header);
        let ctx = SignatureContext::new(&cat.base, 6);
        for r in &cat.records {
            let m = reconstruct(&ctx, &cat.base, &r.signature).unwrap();
            assert!(isomorphic(&m, &r.map));
        }
    }

    #[test]
    fn output_does_not_depend_on_worker_count() {
        let mut c = RunConfig::new(JV, 9, BackboneMode::Tree).unwrap();
        let one = run(&c).unwrap().0.format();
        c.workers = 3;
        assert_eq!(run(&c).unwrap().0.format(), one);
    }

    #[test]
    fn filters_behave() {
        let (cat, _) = small(BackboneMode::Path, 9);
        assert_eq!(filter(&cat, &Predicate::always()).records, cat.records);
        let p: Predicate = "min_sparsity>=3/2".parse().unwrap();
        let f = filter(&cat, &p);
        assert_eq!(filter(&f, &p).records, f.records);
        assert!(f.records.len() < cat.records.len());
        for r in &f.records {
            // no bridge: removing any single edge keeps the map connected
            let mm = r.map.to_molecular_map().unwrap();
            for (d, _) in mm.edges() {
                let mut seen = vec![false; mm.vertex_count()];
                let mut stack = vec![0usize];
                seen[0] = true;
                while let Some(v) = stack.pop() {
                    for s in 0..mm.degree(v) {
                        let e = mm.dart(v, s);
                        if e == d || mm.reverse(e) == d {
                            continue;
                        }
                        let u = mm.neighbor(v, s);
                        if !seen[u] {
                            seen[u] = true;
                            stack.push(u);
                        }
                    }
                }
                assert!(seen.iter().all(|&x| x));
            }
        }
        let achiral = filter(&cat, &"chiral=false".parse().unwrap());
        let ctx = SignatureContext::new(&cat.base, 9);
        for r in &achiral.records {
            assert_eq!(crate::canonical::chiral_twin(&ctx, &r.map).unwrap(), r.signature);
        }
        assert!(matches!("colour=3".parse::<Predicate>(), Err(Error::UnknownField(_))));
    }

    #[test]
    fn exhausted_budget_marks_the_catalog_partial() {
        let mut c = RunConfig::new(JV, 12, BackboneMode::Tree).unwrap();
        c.budget = Some(Duration::ZERO);
        let (cat, summary) = run(&c).unwrap();
        assert!(!summary.complete);
        assert!(!cat.header.complete);
        assert!(cat.format().contains("# complete: false"));
    }

    #[test]
    fn bipartite_base_without_paths_warns() {
        let text = "colors: a\nmotif Y: ~a ~a ~a\nmotif I: a a\n";
        let c = RunConfig::new(text, 10, BackboneMode::Path).unwrap();
        let (_, summary) = run(&c).unwrap();
        assert_eq!(summary.backbones, 0);
        assert_eq!(summary.warnings.len(), 1);
    }

    #[test]
    fn three_significant_figures() {
        assert_eq!(sci3(9872), "9.87e3");
        assert_eq!(sci3(245632), "2.46e5");
        assert_eq!(sci3(236), "236");
    }
}
