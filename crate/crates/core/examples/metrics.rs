//! Recall@k and BLEU-2@k over ranked generations.
//!
//! cargo run --example metrics

use infergen::metrics::{evaluate, normalize_text, sentence_bleu2, EvalRecord};

fn main() {
    println!(
        "normalize(\"To be HELPFUL!\") = {:?}",
        normalize_text("To be HELPFUL!")
    );
    println!(
        "sentence BLEU-2 of \"be very helpful\" against \"be helpful\": {:.4}",
        sentence_bleu2(&["be", "very", "helpful"], &[vec!["be", "helpful"]])
    );

    let records = [
        EvalRecord::new(
            "PersonX makes coffee",
            "xIntent",
            ["to be awake", "to get energy"],
            ["to be awake", "to relax", "to get energy"],
        ),
        EvalRecord::new(
            "PersonX helps PersonY",
            "xIntent",
            ["to be helpful"],
            ["to be very helpful", "to be nice"],
        ),
        EvalRecord::new(
            "PersonX wins",
            "xReact",
            ["happy", "proud"],
            ["happy", "excited"],
        ),
        EvalRecord::new("PersonX loses", "xReact", Vec::<&str>::new(), ["sad"]),
    ];
    for k in [1, 3] {
        let report = evaluate(&records, k);
        println!("\nk = {k}");
        for (rel, row) in &report.per_relation {
            println!(
                "  {rel:8} recall {:6.2}  bleu2 {:6.2}  ({} scored, {} skipped)",
                row.recall, row.bleu2, row.records, row.skipped
            );
        }
        println!(
            "  micro    recall {:6.2}  bleu2 {:6.2}",
            report.micro.recall, report.micro.bleu2
        );
    }
}
