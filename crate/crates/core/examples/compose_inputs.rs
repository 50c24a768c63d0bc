//! Render one item under every input condition and report how many items
//! of a corpus exceed the token budget.

use item_align::corpus::{compose_input, truncation_report, InputCondition, WhitespaceTokenCounter, DEFAULT_TOKEN_BUDGET};
use item_align::fixtures::{lengthen_rationales, table1_corpus, TABLE1_TEST_A};

fn main() -> item_align::Result<()> {
    let corpus = table1_corpus("Test A", TABLE1_TEST_A, 1);
    let item = &corpus.items()[0];
    for cond in InputCondition::ALL {
        let c = compose_input(item, cond, DEFAULT_TOKEN_BUDGET, &WhitespaceTokenCounter);
        println!("{:48} {:4} tokens", cond.name(), c.token_count);
    }

    // 25 items get a 600-word rationale, so only rationale conditions truncate
    let long = lengthen_rationales(&corpus, 25, 600, 2);
    for cond in [InputCondition::PromptTableFigureOptionsKey, InputCondition::PromptTableFigureOptionsKeyRationale] {
        let r = truncation_report(&long, cond, DEFAULT_TOKEN_BUDGET)?;
        println!("{}: {}/{} truncated ({})", cond, r.truncated, r.total, r.fraction_display());
    }
    Ok(())
}
