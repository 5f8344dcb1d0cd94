use std::collections::BTreeSet;

use cagegen::backbone::{BackboneMode, Generator, ReachTable};
use cagegen::canonical::{canonical_signature, Signature, SignatureContext};
use cagegen::catalog::{run, Catalog, RunConfig};
use cagegen::folding::Folder;
use cagegen::metamotif::{eliminate_degree2, expand};
use cagegen::MotifBase;

const YI: &str = include_str!("../bases/yi.base");

fn catalog(n: usize, metamotif: bool) -> Catalog {
    let mut config = RunConfig::new(YI, n, BackboneMode::Tree).unwrap();
    config.metamotif = metamotif;
    config.indices = false;
    config.budget = None;
    run(&config).unwrap().0
}

fn signatures(cat: &Catalog, ctx: &SignatureContext) -> BTreeSet<Signature> {
    cat.records.iter().map(|r| canonical_signature(ctx, &r.map).unwrap()).collect()
}

#[test]
fn expanded_maps_are_all_directly_generated() {
    let base = MotifBase::parse(YI).unwrap();
    for (meta, n) in [(2, 5), (4, 10)] {
        let ctx = SignatureContext::new(&base, n);
        let expanded = signatures(&catalog(meta, true), &ctx);
        let direct = signatures(&catalog(n, false), &ctx);
        assert!(!expanded.is_empty());
        assert!(expanded.is_subset(&direct), "meta size {meta}");
    }
}

#[test]
fn distinct_metamotif_maps_collapse_after_expansion() {
    let base = MotifBase::parse(YI).unwrap();
    let (meta, exp) = eliminate_degree2(&base).unwrap();
    let meta_ctx = SignatureContext::new(&meta, 2);
    let ctx = SignatureContext::new(&base, 5);
    let reach = ReachTable::precompute(&meta, 2).unwrap();
    let mut folder = Folder::new();
    let mut meta_sigs = BTreeSet::new();
    let mut sigs = BTreeSet::new();
    Generator::new(&meta, 2).prune(&reach).generate(BackboneMode::Tree, |m| {
        folder.saturate_all(m, |s| {
            meta_sigs.insert(canonical_signature(&meta_ctx, s).unwrap());
            for e in expand(s, &exp, &meta).unwrap() {
                sigs.insert(canonical_signature(&ctx, &e).unwrap());
            }
        });
    });
    assert!(meta_sigs.len() > sigs.len(), "{} metamotif maps, {} expanded", meta_sigs.len(), sigs.len());
}
