//! Builds the key-value memory for an event from ConceptNet-style triples
//! and offline search snippets, then measures coverage of gold targets.
//!
//! cargo run --example knowledge

use infergen::knowledge::{
    build_queries, coverage, CoverageItem, KnowledgeBase, KnowledgeSources, KnowledgeTriple,
    Snippet, SnippetStore, TripleStore,
};
use infergen::text::tokenize;

fn main() -> infergen::Result<()> {
    let triples = [
        ("coffee", "UsedFor", "staying awake", 2.0),
        ("coffee", "AtLocation", "kitchen", 1.5),
        ("make coffee", "HasPrerequisite", "boil water", 1.0),
        ("tea", "IsA", "drink", 1.0),
    ];
    let mut kb = KnowledgeBase::empty();
    kb.triples = TripleStore::new(
        triples
            .iter()
            .filter_map(|(s, r, o, w)| KnowledgeTriple::new(s, r, o, *w))
            .collect(),
    );

    let event = "PersonX makes PersonY 's coffee";
    let tokens = tokenize(event);
    let queries = build_queries(&tokens, "xIntent", &kb.phrases, &kb.lexicon)?;
    println!("queries for xIntent: {queries:?}");
    kb.snippets = SnippetStore::new(vec![
        Snippet {
            event: event.into(),
            query: queries[0].clone(),
            rank: 1,
            text: tokenize("she made him coffee because she wanted to be helpful and kind"),
        },
        Snippet {
            event: event.into(),
            query: queries[0].clone(),
            rank: 2,
            text: tokenize("the best coffee makers of the year"),
        },
    ])?;

    for sources in [
        KnowledgeSources::ConceptNet,
        KnowledgeSources::Web,
        KnowledgeSources::Both,
    ] {
        let entries = kb.entries_from(sources, event, &tokens, "xIntent")?;
        println!("\n{sources}: {} entries", entries.len());
        for e in &entries {
            println!(
                "  [{:?} {:.0}] {} => {}",
                e.source,
                e.score,
                e.key.join(" "),
                e.value.join(" ")
            );
        }
        let item = CoverageItem {
            relation: "xIntent".into(),
            gold: vec!["to be helpful".into(), "to be nice".into()],
            entries,
        };
        let report = coverage(&[item], &kb.lexicon);
        println!(
            "  covers a gold target: {}",
            report.per_relation["xIntent"].hits == 1
        );
    }
    Ok(())
}
