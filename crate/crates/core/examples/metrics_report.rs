//! Five-metric report and per-class scores from a confusion matrix.

use item_align::metrics::{comparison_table, confusion, report, ConfusionMatrix};

fn main() -> item_align::Result<()> {
    let names: Vec<String> = ["yes", "no"].iter().map(|s| s.to_string()).collect();
    let cm = ConfusionMatrix::from_counts(vec![vec![45, 5], vec![10, 40]], names.clone())?;
    let r = report(&cm)?;
    println!("kappa {:.3}", r.kappa);

    let truth = [0, 0, 1, 1, 2, 2, 2];
    let pred = [0, 1, 1, 1, 2, 0, 2];
    let three: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let r3 = report(&confusion(&truth, &pred, &three)?)?;
    print!("{}", comparison_table(&[("two classes".into(), &r), ("three classes".into(), &r3)]).to_markdown());
    for (name, m) in three.iter().zip(&r3.per_class) {
        println!("{name}: precision {:.3} recall {:.3} f1 {:.3} (n={})", m.precision, m.recall, m.f1, m.support);
    }
    Ok(())
}
