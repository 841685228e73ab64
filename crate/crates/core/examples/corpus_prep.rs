//! Loads the bundled mini corpus and shows the preparation steps applied
//! before querying: unanimity filtering, group slices and label balancing.

use std::num::NonZeroUsize;
use std::path::Path;

use modaudit::corpus::{balance, filter_unanimous, group_slice, load_corpus, CorpusFormat, GroupRegistry, Stratum};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/mini_corpus.jsonl");
    let groups = GroupRegistry::builtin();
    let corpus = load_corpus(&path, CorpusFormat::Jsonl, &groups)?;
    let (hate, non_hate) = corpus.label_counts();
    println!("loaded {} examples ({hate} hate, {non_hate} non-hate)", corpus.len());
    println!("digest {}", corpus.provenance().digest);

    let unanimous = filter_unanimous(&corpus, NonZeroUsize::new(3).unwrap());
    println!("unanimous with >= 3 annotators: {}", unanimous.len());

    for g in groups.ids() {
        let slice = group_slice(&corpus, g, &groups)?;
        let (h, n) = slice.label_counts();
        println!("  {:<12} {:>2} examples ({h} hate / {n} non-hate)", g, slice.len());
    }

    let balanced = balance(&corpus, &Stratum::Group("lgbtqia".into()), 7, &groups)?;
    println!("balanced lgbtqia slice: {:?}", balanced.examples().iter().map(|e| &e.id).collect::<Vec<_>>());
    println!("provenance: {:?}", balanced.provenance().options);
    Ok(())
}
