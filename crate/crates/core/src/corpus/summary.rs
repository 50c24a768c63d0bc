use serde::Serialize;

use super::{Corpus, LabelScheme, Level};

/// Label counts of a corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub domain_counts: Vec<usize>,
    pub skill_counts: Vec<usize>,
    pub total: usize,
    #[serde(skip)]
    scheme: LabelScheme,
}

impl CorpusSummary {
    pub fn counts(&self, level: Level) -> &[usize] {
        match level {
            Level::Domain => &self.domain_counts,
            Level::Skill => &self.skill_counts,
        }
    }

    /// CSV with columns `label_type,label_name,count`: domain rows, then
    /// skill rows, then one `total` row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["label_type", "label_name", "count"])
            .expect("in-memory write");
        for level in [Level::Domain, Level::Skill] {
            for (name, count) in self.scheme.labels(level).iter().zip(self.counts(level)) {
                w.write_record([level.as_str(), name, &count.to_string()])
                    .expect("in-memory write");
            }
        }
        w.write_record(["total", "Total", &self.total.to_string()])
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}

pub fn summarize(corpus: &Corpus) -> CorpusSummary {
    let scheme = corpus.scheme();
    let mut domain_counts = vec![0; scheme.n_classes(Level::Domain)];
    let mut skill_counts = vec![0; scheme.n_classes(Level::Skill)];
    for item in corpus.items() {
        domain_counts[item.domain] += 1;
        skill_counts[item.skill] += 1;
    }
    CorpusSummary {
        domain_counts,
        skill_counts,
        total: corpus.len(),
        scheme: scheme.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn table_one_counts() {
        let corpus = fixtures::table1_corpus("Test A", fixtures::TABLE1_TEST_A, 1);
        let s = summarize(&corpus);
        assert_eq!(s.skill_counts, fixtures::TABLE1_TEST_A);
        assert_eq!(s.domain_counts, [289, 383, 269, 329]);
        assert_eq!(s.total, 1270);
    }

    #[test]
    fn empty_and_one_per_skill() {
        let empty = fixtures::table1_corpus("e", [0; 10], 1);
        let s = summarize(&empty);
        assert_eq!(s.total, 0);
        assert!(s.domain_counts.iter().chain(&s.skill_counts).all(|&c| c == 0));

        let ones = fixtures::table1_corpus("o", [1; 10], 1);
        let s = summarize(&ones);
        assert_eq!(s.skill_counts, [1; 10]);
        assert_eq!(s.domain_counts, [2, 3, 2, 3]);
        assert_eq!(s.total, 10);
    }

    #[test]
    fn csv_layout() {
        let ones = fixtures::table1_corpus("o", [1; 10], 1);
        let csv = summarize(&ones).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "label_type,label_name,count");
        assert_eq!(lines[1], "domain,Standard English Conventions,2");
        assert_eq!(lines[6], "skill,\"Form, Structure, and Sense\",1");
        assert_eq!(lines.last().unwrap(), &"total,Total,10");
    }
}
