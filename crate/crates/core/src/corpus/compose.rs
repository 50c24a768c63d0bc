use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Corpus, Item};
use crate::error::{Error, Result};

pub const DEFAULT_TOKEN_BUDGET: usize = 512;

/// The textual parts of an item, in concatenation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemField {
    Prompt,
    Table,
    Figure,
    QuestionText,
    Options,
    Key,
    Rationale,
}

/// The nine input conditions. Each one names a fixed, ordered list of
/// item fields; absent optional fields are skipped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputCondition {
    PromptOnly,
    PromptTableFigure,
    PromptTableFigureOptions,
    PromptTableFigureOptionsKey,
    PromptTableFigureOptionsKeyRationale,
    PromptTableFigureQtext,
    PromptTableFigureQtextOptions,
    PromptTableFigureQtextOptionsKey,
    PromptTableFigureQtextOptionsKeyRationale,
}

impl InputCondition {
    pub const ALL: [InputCondition; 9] = [
        InputCondition::PromptOnly,
        InputCondition::PromptTableFigure,
        InputCondition::PromptTableFigureOptions,
        InputCondition::PromptTableFigureOptionsKey,
        InputCondition::PromptTableFigureOptionsKeyRationale,
        InputCondition::PromptTableFigureQtext,
        InputCondition::PromptTableFigureQtextOptions,
        InputCondition::PromptTableFigureQtextOptionsKey,
        InputCondition::PromptTableFigureQtextOptionsKeyRationale,
    ];

    /// Conditions that leave out the question text. Question templates are
    /// near-constant within a label and let a classifier shortcut the
    /// content, so experiment defaults use this set.
    pub const WITHOUT_QUESTION_TEXT: [InputCondition; 5] = [
        InputCondition::PromptOnly,
        InputCondition::PromptTableFigure,
        InputCondition::PromptTableFigureOptions,
        InputCondition::PromptTableFigureOptionsKey,
        InputCondition::PromptTableFigureOptionsKeyRationale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InputCondition::PromptOnly => "prompt_only",
            InputCondition::PromptTableFigure => "prompt_table_figure",
            InputCondition::PromptTableFigureOptions => "prompt_table_figure_options",
            InputCondition::PromptTableFigureOptionsKey => "prompt_table_figure_options_key",
            InputCondition::PromptTableFigureOptionsKeyRationale => {
                "prompt_table_figure_options_key_rationale"
            }
            InputCondition::PromptTableFigureQtext => "prompt_table_figure_qtext",
            InputCondition::PromptTableFigureQtextOptions => "prompt_table_figure_qtext_options",
            InputCondition::PromptTableFigureQtextOptionsKey => {
                "prompt_table_figure_qtext_options_key"
            }
            InputCondition::PromptTableFigureQtextOptionsKeyRationale => {
                "prompt_table_figure_qtext_options_key_rationale"
            }
        }
    }

    pub fn fields(self) -> &'static [ItemField] {
        use ItemField::*;
        match self {
            InputCondition::PromptOnly => &[Prompt],
            InputCondition::PromptTableFigure => &[Prompt, Table, Figure],
            InputCondition::PromptTableFigureOptions => &[Prompt, Table, Figure, Options],
            InputCondition::PromptTableFigureOptionsKey => &[Prompt, Table, Figure, Options, Key],
            InputCondition::PromptTableFigureOptionsKeyRationale => {
                &[Prompt, Table, Figure, Options, Key, Rationale]
            }
            InputCondition::PromptTableFigureQtext => &[Prompt, Table, Figure, QuestionText],
            InputCondition::PromptTableFigureQtextOptions => {
                &[Prompt, Table, Figure, QuestionText, Options]
            }
            InputCondition::PromptTableFigureQtextOptionsKey => {
                &[Prompt, Table, Figure, QuestionText, Options, Key]
            }
            InputCondition::PromptTableFigureQtextOptionsKeyRationale => {
                &[Prompt, Table, Figure, QuestionText, Options, Key, Rationale]
            }
        }
    }

    pub fn includes(self, field: ItemField) -> bool {
        self.fields().contains(&field)
    }
}

impl fmt::Display for InputCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InputCondition::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown input condition `{s}`")))
    }
}

/// Counts tokens in composed text. Exact subword counts are encoder
/// specific and come from outside (see [`read_token_report`]).
pub trait TokenCounter: Sync {
    fn count(&self, text: &str) -> usize;
}

/// Whitespace-delimited token count.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenCounter;

impl TokenCounter for WhitespaceTokenCounter {
    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// An item rendered under one input condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposedInput {
    pub id: String,
    pub condition: InputCondition,
    pub text: String,
    pub token_count: usize,
    pub truncated: bool,
}

fn present(field: &Option<String>) -> Option<&str> {
    field.as_deref().filter(|s| !s.trim().is_empty())
}

fn render_field(item: &Item, field: ItemField) -> Option<String> {
    match field {
        ItemField::Prompt => Some(item.prompt.clone()),
        ItemField::Table => present(&item.table_text).map(str::to_string),
        ItemField::Figure => present(&item.figure_text).map(str::to_string),
        ItemField::QuestionText => present(&item.question_text).map(str::to_string),
        ItemField::Options => Some(
            ["A", "B", "C", "D"]
                .iter()
                .zip(&item.options)
                .map(|(letter, text)| format!("{letter}: {text}"))
                .collect::<Vec<_>>()
                .join(" "),
        ),
        ItemField::Key => Some(item.key.letter().to_string()),
        ItemField::Rationale => present(&item.rationale).map(str::to_string),
    }
}

/// Render `item` under `condition`. The text is never cut; `truncated`
/// only records that the token count exceeds the budget.
pub fn compose_input(
    item: &Item,
    condition: InputCondition,
    token_budget: usize,
    counter: &dyn TokenCounter,
) -> ComposedInput {
    let text = condition
        .fields()
        .iter()
        .filter_map(|&f| render_field(item, f))
        .collect::<Vec<_>>()
        .join(" ");
    let token_count = counter.count(&text);
    ComposedInput {
        id: item.id.clone(),
        condition,
        text,
        token_count,
        truncated: token_count > token_budget,
    }
}

/// Composed-input file: one JSON object per line, keys
/// `id, condition, text, token_count, truncated`.
pub fn write_composed(inputs: &[ComposedInput]) -> String {
    let mut out = String::new();
    for input in inputs {
        out.push_str(&serde_json::to_string(input).expect("composed input serializes"));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruncationReport {
    pub condition: InputCondition,
    pub token_budget: usize,
    pub truncated: usize,
    pub total: usize,
    pub flags: Vec<(String, bool)>,
}

impl TruncationReport {
    pub fn fraction(&self) -> f64 {
        self.truncated as f64 / self.total as f64
    }

    /// Fraction rendered to four decimals.
    pub fn fraction_display(&self) -> String {
        format!("{:.4}", self.fraction())
    }
}

pub fn truncation_report(
    corpus: &Corpus,
    condition: InputCondition,
    token_budget: usize,
) -> Result<TruncationReport> {
    truncation_report_with(corpus, condition, token_budget, &WhitespaceTokenCounter)
}

pub fn truncation_report_with(
    corpus: &Corpus,
    condition: InputCondition,
    token_budget: usize,
    counter: &dyn TokenCounter,
) -> Result<TruncationReport> {
    if corpus.is_empty() {
        return Err(Error::Empty(
            "truncation fraction is undefined for an empty corpus".into(),
        ));
    }
    let flags: Vec<(String, bool)> = corpus
        .items()
        .iter()
        .map(|item| {
            let c = compose_input(item, condition, token_budget, counter);
            (c.id, c.truncated)
        })
        .collect();
    Ok(TruncationReport {
        condition,
        token_budget,
        truncated: flags.iter().filter(|(_, t)| *t).count(),
        total: flags.len(),
        flags,
    })
}

/// One row of an externally produced subword token report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenReportRow {
    pub id: String,
    pub token_count: usize,
    pub truncated: bool,
}

/// Parse a token report (`{id, token_count, truncated}` per line) and
/// summarize it as a truncation report for `condition`.
pub fn read_token_report(
    source: &str,
    condition: InputCondition,
    token_budget: usize,
) -> Result<TruncationReport> {
    let mut flags = Vec::new();
    for (idx, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let row: TokenReportRow = serde_json::from_str(raw).map_err(|e| Error::Json {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        flags.push((row.id, row.token_count > token_budget));
    }
    if flags.is_empty() {
        return Err(Error::Empty("token report has no rows".into()));
    }
    Ok(TruncationReport {
        condition,
        token_budget,
        truncated: flags.iter().filter(|(_, t)| *t).count(),
        total: flags.len(),
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_corpus, LabelScheme, OptionKey};

    fn a3_item() -> Item {
        Item {
            id: "267a13e2".into(),
            prompt: "<p>In 2010 ... on the temple _____ the help of digital imaging techniques.".into(),
            question_text: Some(
                "Which choice completes the text so that it conforms to the conventions of Standard English?"
                    .into(),
            ),
            options: [
                "walls, with".into(),
                "walls with".into(),
                "walls so with".into(),
                "walls. With".into(),
            ],
            key: OptionKey::D,
            rationale: Some("Choice D is the best answer.".into()),
            table_text: None,
            figure_text: None,
            domain: 0,
            skill: 0,
        }
    }

    #[test]
    fn full_condition_matches_preprocessed_sample_layout() {
        let item = a3_item();
        let c = compose_input(
            &item,
            InputCondition::PromptTableFigureOptionsKeyRationale,
            512,
            &WhitespaceTokenCounter,
        );
        let want = format!(
            "{} A: walls, with B: walls with C: walls so with D: walls. With D {}",
            item.prompt,
            item.rationale.as_deref().unwrap()
        );
        assert_eq!(c.text, want);
        assert!(!c.truncated);
    }

    #[test]
    fn prompt_only_is_verbatim() {
        let item = a3_item();
        let c = compose_input(&item, InputCondition::PromptOnly, 512, &WhitespaceTokenCounter);
        assert_eq!(c.text, item.prompt);
        assert!(!c.truncated);
    }

    #[test]
    fn table_and_figure_are_included_when_present() {
        let mut item = a3_item();
        item.table_text = Some("\\begin{tabular}{cc}1&2\\end{tabular}".into());
        item.figure_text = Some("".into());
        let c = compose_input(&item, InputCondition::PromptTableFigure, 512, &WhitespaceTokenCounter);
        assert_eq!(c.text, format!("{} {}", item.prompt, item.table_text.as_deref().unwrap()));
    }

    #[test]
    fn qtext_conditions_insert_question_before_options() {
        let item = a3_item();
        let c = compose_input(
            &item,
            InputCondition::PromptTableFigureQtextOptions,
            512,
            &WhitespaceTokenCounter,
        );
        let q = item.question_text.as_deref().unwrap();
        assert!(c.text.starts_with(&format!("{} {} A: ", item.prompt, q)));
    }

    #[test]
    fn six_hundred_words_over_budget() {
        let mut item = a3_item();
        item.prompt = (0..600).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let c = compose_input(&item, InputCondition::PromptOnly, 512, &WhitespaceTokenCounter);
        assert_eq!(c.token_count, 600);
        assert!(c.truncated);
        // accounting only: the text is kept whole
        assert_eq!(c.text, item.prompt);
    }

    #[test]
    fn option_conditions_are_prefix_chains() {
        let item = a3_item();
        let texts: Vec<String> = [
            InputCondition::PromptTableFigureOptions,
            InputCondition::PromptTableFigureOptionsKey,
            InputCondition::PromptTableFigureOptionsKeyRationale,
        ]
        .iter()
        .map(|&c| compose_input(&item, c, 512, &WhitespaceTokenCounter).text)
        .collect();
        assert!(texts[1].starts_with(&texts[0]));
        assert!(texts[2].starts_with(&texts[1]));
    }

    #[test]
    fn condition_names_round_trip() {
        for c in InputCondition::ALL {
            assert_eq!(c.name().parse::<InputCondition>().unwrap(), c);
            let json = serde_json::to_string(&c).unwrap();
            assert_eq!(json, format!("\"{}\"", c.name()));
        }
        assert!("prompt".parse::<InputCondition>().is_err());
    }

    fn corpus_with_lengths(lengths: &[usize]) -> Corpus {
        let scheme = LabelScheme::canonical();
        let mut src = String::new();
        for (i, &n) in lengths.iter().enumerate() {
            let prompt = vec!["tok"; n].join(" ");
            src.push_str(&format!(
                r#"{{"id":"i{i}","prompt":"{prompt}","options":["a","b","c","d"],"key":"A","domain":"Standard English Conventions","skill":"Boundaries"}}"#
            ));
            src.push('\n');
        }
        parse_corpus("t", &src, &scheme).unwrap()
    }

    #[test]
    fn truncation_fraction_two_of_ten() {
        let mut lengths = vec![10; 10];
        lengths[3] = 600;
        lengths[7] = 513;
        let corpus = corpus_with_lengths(&lengths);
        let r = truncation_report(&corpus, InputCondition::PromptOnly, 512).unwrap();
        assert_eq!(r.fraction_display(), "0.2000");
        assert_eq!(r.flags.iter().filter(|(_, t)| *t).count(), 2);
        assert!(r.flags[3].1 && r.flags[7].1);
        let r = truncation_report(&corpus, InputCondition::PromptOnly, 1_000_000).unwrap();
        assert_eq!(r.fraction_display(), "0.0000");
    }

    #[test]
    fn truncation_of_empty_corpus_is_an_error() {
        let corpus = corpus_with_lengths(&[]);
        assert!(truncation_report(&corpus, InputCondition::PromptOnly, 512).is_err());
    }

    #[test]
    fn token_report_rows() {
        let src = "{\"id\":\"a\",\"token_count\":1400,\"truncated\":true}\n{\"id\":\"b\",\"token_count\":12,\"truncated\":false}\n";
        let r = read_token_report(src, InputCondition::PromptOnly, 512).unwrap();
        assert_eq!((r.truncated, r.total), (1, 2));
    }
}
