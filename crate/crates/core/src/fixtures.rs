//! Synthetic item corpora with controlled label counts.
//!
//! The generated texts are filler; what matters is the label structure and
//! the lengths of the text fields, which make truncation and composition
//! behavior testable without real test content.

use rand::seq::index;
use rand::Rng;

use crate::corpus::{Corpus, Item, LabelScheme, OptionKey};
use crate::seed;

/// Skill counts of the 1,270-item training test, skills 1–10.
pub const TABLE1_TEST_A: [usize; 10] = [148, 141, 196, 93, 94, 128, 141, 180, 98, 51];
/// Skill counts of the 1,052-item external test, skills 1–10.
pub const TABLE1_TEST_B: [usize; 10] = [127, 126, 160, 70, 77, 109, 119, 151, 77, 36];

const WORDS: [&str; 24] = [
    "river", "archive", "signal", "harvest", "lantern", "orbit", "meadow", "cipher", "ledger",
    "canyon", "mosaic", "summit", "quartz", "harbor", "thicket", "beacon", "glacier", "prairie",
    "tundra", "atlas", "delta", "ember", "fjord", "grove",
];

fn id_prefix(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect()
}

fn words(rng: &mut impl Rng, n: usize) -> String {
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// A corpus with `skill_counts[s]` items for each canonical skill `s`.
///
/// Ids are `<name>-s<skill>-<n>` with the name lower-cased and
/// non-alphanumerics replaced by `-`, so corpora with different names never
/// share ids. Every seventh item carries a table and every eleventh a
/// figure description.
pub fn table1_corpus(name: &str, skill_counts: [usize; 10], seed: u64) -> Corpus {
    let scheme = LabelScheme::canonical();
    let prefix = id_prefix(name);
    let mut rng = seed::stream(seed, &[b"fixture-corpus", name.as_bytes()]);
    let mut items = Vec::with_capacity(skill_counts.iter().sum());
    for (skill, &count) in skill_counts.iter().enumerate() {
        for k in 0..count {
            let serial = items.len();
            let prompt_len = rng.random_range(30..90);
            let rationale_len = rng.random_range(20..60);
            let options: [String; 4] = std::array::from_fn(|_| {
                let n = rng.random_range(1..5);
                words(&mut rng, n)
            });
            items.push(Item {
                id: format!("{prefix}-s{:02}-{k:04}", skill + 1),
                prompt: words(&mut rng, prompt_len),
                question_text: Some(format!(
                    "Which choice best answers the skill {} question?",
                    skill + 1
                )),
                options,
                key: OptionKey::ALL[serial % 4],
                rationale: Some(words(&mut rng, rationale_len)),
                table_text: (serial % 7 == 0).then(|| {
                    "\\begin{tabular}{|c|c|} year & count \\\\ 2010 & 14 \\end{tabular}".to_string()
                }),
                figure_text: (serial % 11 == 0)
                    .then(|| "A bar graph comparing four groups.".to_string()),
                domain: scheme.domain_of(skill),
                skill,
            });
        }
    }
    Corpus::new(name, scheme, items).expect("fixture corpus is valid")
}

/// Replace the rationale of exactly `count` seeded-chosen items with a
/// `words_per_rationale`-word text.
pub fn lengthen_rationales(
    corpus: &Corpus,
    count: usize,
    words_per_rationale: usize,
    seed: u64,
) -> Corpus {
    let mut rng = seed::stream(seed, &[b"fixture-long-rationale"]);
    let chosen: std::collections::HashSet<usize> =
        index::sample(&mut rng, corpus.len(), count).into_iter().collect();
    let items = corpus
        .items()
        .iter()
        .enumerate()
        .map(|(i, item)| {
            let mut item = item.clone();
            if chosen.contains(&i) {
                item.rationale = Some(words(&mut rng, words_per_rationale));
            }
            item
        })
        .collect();
    Corpus::new(corpus.name.clone(), corpus.scheme().clone(), items).expect("still valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{truncation_report, InputCondition};

    #[test]
    fn ids_differ_between_named_corpora() {
        let a = table1_corpus("Test A", [1; 10], 1);
        let b = table1_corpus("Test B", [1; 10], 1);
        assert!(a.items().iter().all(|i| b.get(&i.id).is_none()));
        assert_eq!(a.items()[3].id, "test-a-s04-0000");
    }

    #[test]
    fn deterministic() {
        assert_eq!(table1_corpus("x", [3; 10], 9), table1_corpus("x", [3; 10], 9));
    }

    #[test]
    fn twenty_percent_truncated_fixture() {
        let base = table1_corpus("Test A", TABLE1_TEST_A, 3);
        let corpus = lengthen_rationales(&base, 254, 600, 3);
        // count directly: compose with rationale and count whitespace tokens
        let over = corpus
            .items()
            .iter()
            .filter(|it| {
                crate::corpus::compose_input(
                    it,
                    InputCondition::PromptTableFigureOptionsKeyRationale,
                    512,
                    &crate::corpus::WhitespaceTokenCounter,
                )
                .text
                .split_whitespace()
                .count()
                    > 512
            })
            .count();
        assert_eq!(over, 254);
        let r = truncation_report(&corpus, InputCondition::PromptTableFigureOptionsKeyRationale, 512)
            .unwrap();
        assert_eq!(r.truncated, 254);
        assert_eq!(r.fraction_display(), "0.2000");
        // without the rationale nothing is long enough to truncate
        let r = truncation_report(&corpus, InputCondition::PromptTableFigureOptionsKey, 512).unwrap();
        assert_eq!(r.truncated, 0);
    }
}
