//! Stratified 60/20/20 split, printed as per-skill counts.

use item_align::corpus::{stratified_split, Fractions, Level, Split};
use item_align::fixtures::{table1_corpus, TABLE1_TEST_B};

fn main() -> item_align::Result<()> {
    let corpus = table1_corpus("Test B", TABLE1_TEST_B, 1);
    let split = stratified_split(&corpus, Fractions::default(), 42, Level::Skill)?;
    println!("skill  train  validation  test");
    for (skill, name) in corpus.scheme().skills().iter().enumerate() {
        let count = |s: Split| {
            corpus
                .items()
                .iter()
                .filter(|it| it.skill == skill && split.get(&it.id) == Some(s))
                .count()
        };
        println!("{name:28} {:4} {:4} {:4}", count(Split::Train), count(Split::Validation), count(Split::Test));
    }
    Ok(())
}
