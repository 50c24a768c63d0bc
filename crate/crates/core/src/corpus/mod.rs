//! Item corpora: label scheme, item records, the line-delimited item file
//! format, input composition, stratified splitting and subsampling.

mod compose;
mod split;
mod summary;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub use compose::{
    compose_input, read_token_report, truncation_report, truncation_report_with, write_composed,
    ComposedInput, InputCondition, ItemField, TokenCounter, TokenReportRow, TruncationReport,
    WhitespaceTokenCounter, DEFAULT_TOKEN_BUDGET,
};
pub use split::{
    apportion, read_split, stratified_split, subsample, write_split, Fractions, Split,
    SplitAssignment,
};
pub use summary::{summarize, CorpusSummary};

const CANONICAL_DOMAINS: [&str; 4] = [
    "Standard English Conventions",
    "Information and Ideas",
    "Expression of Ideas",
    "Craft and Structure",
];

const CANONICAL_SKILLS: [&str; 10] = [
    "Boundaries",
    "Form, Structure, and Sense",
    "Command of Evidence",
    "Inferences",
    "Central Ideas and Details",
    "Transitions",
    "Rhetorical Synthesis",
    "Words in Context",
    "Text Structure and Purpose",
    "Cross-Text Connections",
];

/// Zero-based domain index of each canonical skill.
const CANONICAL_SKILL_TO_DOMAIN: [usize; 10] = [0, 0, 1, 1, 1, 2, 2, 3, 3, 3];

pub const N_DOMAINS: usize = 4;
pub const N_SKILLS: usize = 10;

/// Which level of the label hierarchy a model or statistic targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Domain,
    Skill,
}

impl Level {
    pub fn as_str(self) -> &'static str {
        match self {
            Level::Domain => "domain",
            Level::Skill => "skill",
        }
    }

    /// Column prefix used in report tables ("Skill 4", "Domain 2").
    pub fn title(self) -> &'static str {
        match self {
            Level::Domain => "Domain",
            Level::Skill => "Skill",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "domain" => Ok(Level::Domain),
            "skill" => Ok(Level::Skill),
            other => Err(Error::InvalidArgument(format!(
                "unknown level `{other}` (expected domain or skill)"
            ))),
        }
    }
}

/// Two-level label hierarchy: four domains, ten skills, each skill owned
/// by exactly one domain. Indices are zero-based throughout the API; the
/// human-facing numbering ("Skill 4") is `index + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelScheme {
    domains: Vec<String>,
    skills: Vec<String>,
    skill_to_domain: Vec<usize>,
}

impl LabelScheme {
    pub fn new(
        domains: Vec<String>,
        skills: Vec<String>,
        skill_to_domain: Vec<usize>,
    ) -> Result<Self> {
        if domains.len() != N_DOMAINS {
            return Err(Error::Scheme(format!(
                "expected {N_DOMAINS} domains, got {}",
                domains.len()
            )));
        }
        if skills.len() != N_SKILLS {
            return Err(Error::Scheme(format!(
                "expected {N_SKILLS} skills, got {}",
                skills.len()
            )));
        }
        if skill_to_domain.len() != skills.len() {
            return Err(Error::Scheme(
                "skill_to_domain must map every skill".into(),
            ));
        }
        if let Some(bad) = skill_to_domain.iter().find(|&&d| d >= domains.len()) {
            return Err(Error::Scheme(format!("domain index {bad} out of range")));
        }
        for d in 0..domains.len() {
            if !skill_to_domain.contains(&d) {
                return Err(Error::Scheme(format!(
                    "domain `{}` owns no skill",
                    domains[d]
                )));
            }
        }
        let unique = |names: &[String]| names.iter().collect::<HashSet<_>>().len() == names.len();
        if !unique(&domains) || !unique(&skills) {
            return Err(Error::Scheme("label names must be unique".into()));
        }
        Ok(Self {
            domains,
            skills,
            skill_to_domain,
        })
    }

    /// The four-domain, ten-skill reading-and-writing scheme.
    pub fn canonical() -> Self {
        Self {
            domains: CANONICAL_DOMAINS.iter().map(|s| s.to_string()).collect(),
            skills: CANONICAL_SKILLS.iter().map(|s| s.to_string()).collect(),
            skill_to_domain: CANONICAL_SKILL_TO_DOMAIN.to_vec(),
        }
    }

    pub fn domains(&self) -> &[String] {
        &self.domains
    }

    pub fn skills(&self) -> &[String] {
        &self.skills
    }

    pub fn labels(&self, level: Level) -> &[String] {
        match level {
            Level::Domain => &self.domains,
            Level::Skill => &self.skills,
        }
    }

    pub fn n_classes(&self, level: Level) -> usize {
        self.labels(level).len()
    }

    pub fn domain_of(&self, skill: usize) -> usize {
        self.skill_to_domain[skill]
    }

    pub fn skills_of(&self, domain: usize) -> impl Iterator<Item = usize> + '_ {
        self.skill_to_domain
            .iter()
            .enumerate()
            .filter(move |(_, &d)| d == domain)
            .map(|(s, _)| s)
    }

    pub fn domain_index(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d == name)
    }

    pub fn skill_index(&self, name: &str) -> Option<usize> {
        self.skills.iter().position(|s| s == name)
    }
}

impl Default for LabelScheme {
    fn default() -> Self {
        Self::canonical()
    }
}

/// Correct-answer letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptionKey {
    A,
    B,
    C,
    D,
}

impl OptionKey {
    pub const ALL: [OptionKey; 4] = [OptionKey::A, OptionKey::B, OptionKey::C, OptionKey::D];

    pub fn letter(self) -> &'static str {
        match self {
            OptionKey::A => "A",
            OptionKey::B => "B",
            OptionKey::C => "C",
            OptionKey::D => "D",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for OptionKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" => Ok(OptionKey::A),
            "B" => Ok(OptionKey::B),
            "C" => Ok(OptionKey::C),
            "D" => Ok(OptionKey::D),
            other => Err(Error::InvalidArgument(format!("key `{other}` not in A-D"))),
        }
    }
}

/// One test question.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub id: String,
    pub prompt: String,
    pub question_text: Option<String>,
    pub options: [String; 4],
    pub key: OptionKey,
    pub rationale: Option<String>,
    pub table_text: Option<String>,
    pub figure_text: Option<String>,
    /// Zero-based domain index.
    pub domain: usize,
    /// Zero-based skill index.
    pub skill: usize,
}

impl Item {
    pub fn label(&self, level: Level) -> usize {
        match level {
            Level::Domain => self.domain,
            Level::Skill => self.skill,
        }
    }

    fn validate(&self, scheme: &LabelScheme) -> std::result::Result<(), (&'static str, String)> {
        if self.id.is_empty() {
            return Err(("id", "must be nonempty".into()));
        }
        if self.prompt.is_empty() {
            return Err(("prompt", "must be nonempty".into()));
        }
        if self.skill >= scheme.skills.len() {
            return Err(("skill", format!("index {} out of range", self.skill)));
        }
        if self.domain >= scheme.domains.len() {
            return Err(("domain", format!("index {} out of range", self.domain)));
        }
        let owner = scheme.domain_of(self.skill);
        if owner != self.domain {
            return Err((
                "domain",
                format!(
                    "skill `{}` belongs to domain `{}`, not `{}`",
                    scheme.skills[self.skill], scheme.domains[owner], scheme.domains[self.domain]
                ),
            ));
        }
        Ok(())
    }
}

/// A named, validated collection of items.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    scheme: LabelScheme,
    items: Vec<Item>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, scheme: LabelScheme, items: Vec<Item>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, item) in items.iter().enumerate() {
            if let Err((field, reason)) = item.validate(&scheme) {
                return Err(Error::Record {
                    line: i + 1,
                    field,
                    reason,
                });
            }
            if !seen.insert(item.id.as_str()) {
                return Err(Error::DuplicateId {
                    line: i + 1,
                    id: item.id.clone(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            scheme,
            items,
        })
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|it| it.id == id)
    }

    /// Items whose ids pass `keep`, in corpus order.
    pub fn filter(&self, mut keep: impl FnMut(&Item) -> bool) -> Corpus {
        Corpus {
            name: self.name.clone(),
            scheme: self.scheme.clone(),
            items: self.items.iter().filter(|it| keep(it)).cloned().collect(),
        }
    }
}

/// Parse the line-delimited JSON item format. Blank lines are skipped.
pub fn parse_corpus(name: &str, source: &str, scheme: &LabelScheme) -> Result<Corpus> {
    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| Error::Json {
            line,
            reason: e.to_string(),
        })?;
        let Value::Object(obj) = value else {
            return Err(Error::Json {
                line,
                reason: "record is not a JSON object".into(),
            });
        };
        let item = parse_record(&obj, line, scheme)?;
        if !seen.insert(item.id.clone()) {
            return Err(Error::DuplicateId { line, id: item.id });
        }
        items.push(item);
    }
    Ok(Corpus {
        name: name.to_string(),
        scheme: scheme.clone(),
        items,
    })
}

fn parse_record(obj: &Map<String, Value>, line: usize, scheme: &LabelScheme) -> Result<Item> {
    let err = |field: &'static str, reason: &str| Error::Record {
        line,
        field,
        reason: reason.to_string(),
    };
    let required = |field: &'static str| -> Result<&str> {
        match obj.get(field) {
            None | Some(Value::Null) => Err(err(field, "missing required field")),
            Some(Value::String(s)) => Ok(s.as_str()),
            Some(_) => Err(err(field, "expected a string")),
        }
    };
    let optional = |field: &'static str| -> Result<Option<String>> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(err(field, "expected a string or null")),
        }
    };

    let id = required("id")?;
    if id.is_empty() {
        return Err(err("id", "must be nonempty"));
    }
    let prompt = required("prompt")?;
    if prompt.is_empty() {
        return Err(err("prompt", "must be nonempty"));
    }
    let options = match obj.get("options") {
        None | Some(Value::Null) => return Err(err("options", "missing required field")),
        Some(Value::Array(arr)) => {
            if arr.len() != 4 {
                return Err(err(
                    "options",
                    &format!("expected exactly 4 options, got {}", arr.len()),
                ));
            }
            let mut out: [String; 4] = Default::default();
            for (slot, v) in out.iter_mut().zip(arr) {
                match v {
                    Value::String(s) => *slot = s.clone(),
                    _ => return Err(err("options", "options must be strings")),
                }
            }
            out
        }
        Some(_) => return Err(err("options", "expected an array of 4 strings")),
    };
    let key: OptionKey = required("key")?
        .parse()
        .map_err(|_| err("key", "must be one of A, B, C, D"))?;
    let domain_name = required("domain")?;
    let domain = scheme
        .domain_index(domain_name)
        .ok_or_else(|| err("domain", &format!("unknown domain `{domain_name}`")))?;
    let skill_name = required("skill")?;
    let skill = scheme
        .skill_index(skill_name)
        .ok_or_else(|| err("skill", &format!("unknown skill `{skill_name}`")))?;

    let item = Item {
        id: id.to_string(),
        prompt: prompt.to_string(),
        question_text: optional("question_text")?,
        options,
        key,
        rationale: optional("rationale")?,
        table_text: optional("table")?,
        figure_text: optional("figure")?,
        domain,
        skill,
    };
    item.validate(scheme)
        .map_err(|(field, reason)| Error::Record {
            line,
            field,
            reason,
        })?;
    Ok(item)
}

#[derive(Serialize)]
struct ItemRecord<'a> {
    id: &'a str,
    prompt: &'a str,
    question_text: Option<&'a str>,
    options: &'a [String; 4],
    key: &'a str,
    rationale: Option<&'a str>,
    table: Option<&'a str>,
    figure: Option<&'a str>,
    domain: &'a str,
    skill: &'a str,
}

/// Serialize a corpus back to the item file format (one record per line,
/// fixed key order).
pub fn write_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for item in &corpus.items {
        let record = ItemRecord {
            id: &item.id,
            prompt: &item.prompt,
            question_text: item.question_text.as_deref(),
            options: &item.options,
            key: item.key.letter(),
            rationale: item.rationale.as_deref(),
            table: item.table_text.as_deref(),
            figure: item.figure_text.as_deref(),
            domain: &corpus.scheme.domains[item.domain],
            skill: &corpus.scheme.skills[item.skill],
        };
        out.push_str(&serde_json::to_string(&record).expect("item record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const A3_RECORD: &str = r#"{"id":"267a13e2","prompt":"<p>In 2010, archaeologist Noel Hidalgo Tan was visiting the twelfth-century temple of Angkor Wat in Cambodia when he noticed markings of red paint on the temple _____ the help of digital imaging techniques, he discovered the markings to be part of an elaborate mural containing over 200 paintings.","question_text":"Which choice completes the text so that it conforms to the conventions of Standard English?","options":["walls, with","walls with","walls so with","walls. With"],"key":"D","rationale":"Choice D is the best answer.","table":null,"figure":null,"domain":"Standard English Conventions","skill":"Boundaries"}"#;

    fn record_with(domain: &str, skill: &str) -> String {
        A3_RECORD
            .replace("\"Standard English Conventions\"", &format!("\"{domain}\""))
            .replace("\"Boundaries\"", &format!("\"{skill}\""))
    }

    #[test]
    fn canonical_scheme_hierarchy() {
        let s = LabelScheme::canonical();
        let groups: Vec<Vec<usize>> = (0..4).map(|d| s.skills_of(d).collect()).collect();
        assert_eq!(
            groups,
            vec![vec![0, 1], vec![2, 3, 4], vec![5, 6], vec![7, 8, 9]]
        );
    }

    #[test]
    fn scheme_rejects_unowned_domain() {
        let s = LabelScheme::canonical();
        let err = LabelScheme::new(
            s.domains().to_vec(),
            s.skills().to_vec(),
            vec![0, 0, 1, 1, 1, 1, 1, 3, 3, 3],
        )
        .unwrap_err();
        assert!(err.to_string().contains("owns no skill"));
    }

    #[test]
    fn parses_a3_record() {
        let c = parse_corpus("test-A", A3_RECORD, &LabelScheme::canonical()).unwrap();
        assert_eq!(c.len(), 1);
        let item = &c.items()[0];
        // first domain, first skill
        assert_eq!((item.domain, item.skill), (0, 0));
        assert_eq!(item.key, OptionKey::D);
        assert_eq!(item.options[3], "walls. With");
    }

    #[test]
    fn hierarchy_mismatch_is_rejected() {
        let src = record_with("Craft and Structure", "Boundaries");
        let err = parse_corpus("x", &src, &LabelScheme::canonical()).unwrap_err();
        match err {
            Error::Record { line, field, .. } => assert_eq!((line, field), (1, "domain")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let c = parse_corpus("x", "", &LabelScheme::canonical()).unwrap();
        assert!(c.is_empty());
        let c = parse_corpus("x", "\n  \n", &LabelScheme::canonical()).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn malformed_records_report_line_and_field() {
        let scheme = LabelScheme::canonical();
        let cases = [
            (A3_RECORD.replace("\"key\":\"D\"", "\"key\":\"E\""), "key"),
            (A3_RECORD.replace("\"skill\":\"Boundaries\"", "\"skill\":\"Spelling\""), "skill"),
            (A3_RECORD.replace("\"domain\":\"Standard English Conventions\",", ""), "domain"),
            (A3_RECORD.replace("\"walls so with\",", ""), "options"),
            (A3_RECORD.replace("\"rationale\":\"Choice D is the best answer.\"", "\"rationale\":3"), "rationale"),
        ];
        for (src, want) in cases {
            let two = format!("{}\n{}", record_with("Standard English Conventions", "Boundaries").replace("267a13e2", "other"), src);
            match parse_corpus("x", &two, &scheme).unwrap_err() {
                Error::Record { line, field, .. } => assert_eq!((line, field), (2, want)),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let src = format!("{A3_RECORD}\n{A3_RECORD}\n");
        match parse_corpus("x", &src, &LabelScheme::canonical()).unwrap_err() {
            Error::DuplicateId { line, id } => {
                assert_eq!(line, 2);
                assert_eq!(id, "267a13e2");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_then_parse_is_identity() {
        let scheme = LabelScheme::canonical();
        let c = parse_corpus("x", A3_RECORD, &scheme).unwrap();
        let text = write_corpus(&c);
        let back = parse_corpus("x", &text, &scheme).unwrap();
        assert_eq!(c, back);
        assert_eq!(write_corpus(&back), text);
    }
}
