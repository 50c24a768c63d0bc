use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Corpus, Level};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Fractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let f = Self {
            train,
            validation,
            test,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = self.as_array();
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Fractions(format!(
                "fractions must be finite and nonnegative, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Fractions(format!(
                "fractions must sum to 1, got {sum} from {parts:?}"
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

impl Default for Fractions {
    fn default() -> Self {
        Self {
            train: 0.6,
            validation: 0.2,
            test: 0.2,
        }
    }
}

/// Largest-remainder apportionment of `total` units across `quotas`
/// (which should sum to `total`). Equal remainders are ordered by a
/// seeded permutation drawn from `rng`.
pub fn apportion(quotas: &[f64], total: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut tie_order: Vec<usize> = (0..quotas.len()).collect();
    tie_order.shuffle(rng);
    let mut rank = vec![0usize; quotas.len()];
    for (pos, &i) in tie_order.iter().enumerate() {
        rank[i] = pos;
    }

    let mut counts: Vec<usize> = quotas
        .iter()
        .map(|&q| (q + 1e-9).floor().max(0.0) as usize)
        .collect();
    let assigned: usize = counts.iter().sum();
    if assigned >= total {
        return counts;
    }
    let remainder = total - assigned;
    // Quantized remainders so that near-equal values tie deterministically.
    let frac_key = |i: usize| ((quotas[i] - counts[i] as f64) * 1e9).round() as i64;
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| frac_key(b).cmp(&frac_key(a)).then(rank[a].cmp(&rank[b])));
    for &i in order.iter().cycle().take(remainder) {
        counts[i] += 1;
    }
    counts
}

/// Assignment of every item in a corpus to one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub seed: Option<u64>,
    pub fractions: Option<Fractions>,
    pub stratify_by: Option<Level>,
    /// Item id to split, in corpus order.
    pub assignment: IndexMap<String, Split>,
}

impl SplitAssignment {
    /// Wrap an externally supplied map after checking it covers `corpus`
    /// exactly.
    pub fn from_map(corpus: &Corpus, assignment: IndexMap<String, Split>) -> Result<Self> {
        for item in corpus.items() {
            if !assignment.contains_key(&item.id) {
                return Err(Error::Incompatible(format!(
                    "split file has no entry for item `{}`",
                    item.id
                )));
            }
        }
        if assignment.len() != corpus.len() {
            let known: HashSet<&str> = corpus.items().iter().map(|i| i.id.as_str()).collect();
            let extra = assignment
                .keys()
                .find(|k| !known.contains(k.as_str()))
                .cloned()
                .unwrap_or_default();
            return Err(Error::Incompatible(format!(
                "split file names unknown item `{extra}`"
            )));
        }
        Ok(Self {
            seed: None,
            fractions: None,
            stratify_by: None,
            assignment,
        })
    }

    pub fn get(&self, id: &str) -> Option<Split> {
        self.assignment.get(id).copied()
    }

    pub fn ids(&self, split: Split) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, &s)| s == split)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn count(&self, split: Split) -> usize {
        self.assignment.values().filter(|&&s| s == split).count()
    }

    /// The items of `corpus` assigned to any of `splits`, in corpus order.
    pub fn select(&self, corpus: &Corpus, splits: &[Split]) -> Corpus {
        corpus.filter(|item| {
            self.get(&item.id)
                .map(|s| splits.contains(&s))
                .unwrap_or(false)
        })
    }
}

/// Stratified, seeded train/validation/test split.
///
/// Each stratum (one label at `stratify_by`) is shuffled by its own seeded
/// stream and cut by largest-remainder apportionment of the fractions, so
/// every split count is within one of `fraction * stratum_size`.
pub fn stratified_split(
    corpus: &Corpus,
    fractions: Fractions,
    seed: u64,
    stratify_by: Level,
) -> Result<SplitAssignment> {
    fractions.validate()?;
    let k = corpus.scheme().n_classes(stratify_by);
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, item) in corpus.items().iter().enumerate() {
        strata[item.label(stratify_by)].push(i);
    }

    let nonzero = fractions.as_array().iter().filter(|&&f| f > 0.0).count();
    let mut by_index = vec![Split::Train; corpus.len()];
    for (label, members) in strata.iter_mut().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < nonzero {
            log::warn!(
                "stratum {} `{}` has {} items for {} nonzero splits; some splits get none",
                stratify_by,
                corpus.scheme().labels(stratify_by)[label],
                members.len(),
                nonzero
            );
        }
        let label_bytes = (label as u64).to_le_bytes();
        let mut rng = seed::stream(seed, &[b"split", stratify_by.as_str().as_bytes(), &label_bytes]);
        members.shuffle(&mut rng);
        let n = members.len();
        let quotas: Vec<f64> = fractions.as_array().iter().map(|f| f * n as f64).collect();
        let counts = apportion(&quotas, n, &mut rng);
        let mut cursor = 0;
        for (split, count) in Split::ALL.into_iter().zip(counts) {
            for &idx in &members[cursor..cursor + count] {
                by_index[idx] = split;
            }
            cursor += count;
        }
    }

    let assignment = corpus
        .items()
        .iter()
        .zip(by_index)
        .map(|(item, s)| (item.id.clone(), s))
        .collect();
    Ok(SplitAssignment {
        seed: Some(seed),
        fractions: Some(fractions),
        stratify_by: Some(stratify_by),
        assignment,
    })
}

/// Seeded subsample stratified by skill. Each skill keeps its share of
/// `total_size` to within one item; the result keeps corpus order.
pub fn subsample(corpus: &Corpus, total_size: usize, seed: u64) -> Result<Corpus> {
    let n = corpus.len();
    if total_size > n {
        return Err(Error::InvalidArgument(format!(
            "subsample size {total_size} exceeds corpus size {n}"
        )));
    }
    if total_size == 0 {
        log::warn!("subsample size 0 yields an empty corpus");
        return Ok(corpus.filter(|_| false));
    }
    if total_size == n {
        return Ok(corpus.clone());
    }
    let k = corpus.scheme().n_classes(Level::Skill);
    let mut strata: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, item) in corpus.items().iter().enumerate() {
        strata[item.skill].push(i);
    }
    let quotas: Vec<f64> = strata
        .iter()
        .map(|s| s.len() as f64 * total_size as f64 / n as f64)
        .collect();
    let mut rng = seed::stream(seed, &[b"subsample-apportion"]);
    let counts = apportion(&quotas, total_size, &mut rng);

    let mut keep = vec![false; n];
    for (skill, (members, count)) in strata.iter_mut().zip(counts).enumerate() {
        let skill_bytes = (skill as u64).to_le_bytes();
        let mut rng = seed::stream(seed, &[b"subsample", &skill_bytes]);
        members.shuffle(&mut rng);
        for &idx in members.iter().take(count) {
            keep[idx] = true;
        }
    }
    let mut idx = 0;
    Ok(corpus.filter(|_| {
        let k = keep[idx];
        idx += 1;
        k
    }))
}

#[derive(Serialize, Deserialize)]
struct SplitRecord {
    id: String,
    split: Split,
}

/// Split file: one `{id, split}` object per line, corpus order.
pub fn write_split(split: &SplitAssignment) -> String {
    let mut out = String::new();
    for (id, &s) in &split.assignment {
        let rec = SplitRecord {
            id: id.clone(),
            split: s,
        };
        out.push_str(&serde_json::to_string(&rec).expect("split record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_split(source: &str) -> Result<IndexMap<String, Split>> {
    let mut map = IndexMap::new();
    for (idx, raw) in source.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let rec: SplitRecord = serde_json::from_str(raw).map_err(|e| Error::Json {
            line: idx + 1,
            reason: e.to_string(),
        })?;
        if map.insert(rec.id.clone(), rec.split).is_some() {
            return Err(Error::DuplicateId {
                line: idx + 1,
                id: rec.id,
            });
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Item, LabelScheme, OptionKey};
    use proptest::prelude::*;

    fn item(id: usize, skill: usize, scheme: &LabelScheme) -> Item {
        Item {
            id: format!("i{id:04}"),
            prompt: format!("prompt {id}"),
            question_text: None,
            options: ["a".into(), "b".into(), "c".into(), "d".into()],
            key: OptionKey::A,
            rationale: None,
            table_text: None,
            figure_text: None,
            domain: scheme.domain_of(skill),
            skill,
        }
    }

    fn corpus_with_counts(counts: &[usize]) -> Corpus {
        let scheme = LabelScheme::canonical();
        let mut items = Vec::new();
        for (skill, &c) in counts.iter().enumerate() {
            for _ in 0..c {
                items.push(item(items.len(), skill, &scheme));
            }
        }
        Corpus::new("t", scheme, items).unwrap()
    }

    #[test]
    fn two_strata_of_five_split_three_one_one() {
        let corpus = corpus_with_counts(&[5, 5]);
        let s = stratified_split(&corpus, Fractions::default(), 11, Level::Skill).unwrap();
        for skill in 0..2 {
            let mut counts = [0; 3];
            for it in corpus.items().iter().filter(|i| i.skill == skill) {
                counts[s.get(&it.id).unwrap() as usize] += 1;
            }
            assert_eq!(counts, [3, 1, 1]);
        }
        let again = stratified_split(&corpus, Fractions::default(), 11, Level::Skill).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn fractions_must_sum_to_one() {
        let corpus = corpus_with_counts(&[5, 5]);
        let bad = Fractions {
            train: 0.5,
            validation: 0.5,
            test: 0.5,
        };
        assert!(matches!(
            stratified_split(&corpus, bad, 1, Level::Skill),
            Err(Error::Fractions(_))
        ));
        assert!(Fractions::new(-0.1, 0.6, 0.5).is_err());
    }

    #[test]
    fn tiny_stratum_may_leave_a_split_empty() {
        let corpus = corpus_with_counts(&[1, 2]);
        let s = stratified_split(&corpus, Fractions::default(), 3, Level::Skill).unwrap();
        assert_eq!(s.assignment.len(), 3);
    }

    #[test]
    fn subsample_identity_and_zero() {
        let corpus = corpus_with_counts(&[3, 4, 5]);
        assert_eq!(subsample(&corpus, 12, 1).unwrap(), corpus);
        assert!(subsample(&corpus, 0, 1).unwrap().is_empty());
        assert!(subsample(&corpus, 13, 1).is_err());
    }

    #[test]
    fn split_file_round_trip() {
        let corpus = corpus_with_counts(&[4, 6]);
        let s = stratified_split(&corpus, Fractions::default(), 5, Level::Skill).unwrap();
        let text = write_split(&s);
        let map = read_split(&text).unwrap();
        let back = SplitAssignment::from_map(&corpus, map).unwrap();
        assert_eq!(back.assignment, s.assignment);
        let short = text.lines().skip(1).collect::<Vec<_>>().join("\n");
        assert!(SplitAssignment::from_map(&corpus, read_split(&short).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_within_one(
            counts in proptest::collection::vec(1usize..30, 1..10),
            seed in any::<u64>(),
            a in 0u32..=10, b in 0u32..=10,
        ) {
            prop_assume!(a + b <= 10);
            let fr = Fractions::new(a as f64 / 10.0, b as f64 / 10.0, (10 - a - b) as f64 / 10.0).unwrap();
            let corpus = corpus_with_counts(&counts);
            let s = stratified_split(&corpus, fr, seed, Level::Skill).unwrap();
            prop_assert_eq!(s.assignment.len(), corpus.len());
            for (skill, &n) in counts.iter().enumerate() {
                let mut got = [0usize; 3];
                for it in corpus.items().iter().filter(|i| i.skill == skill) {
                    got[s.get(&it.id).unwrap() as usize] += 1;
                }
                for (g, f) in got.iter().zip(fr.as_array()) {
                    prop_assert!((*g as f64 - f * n as f64).abs() <= 1.0 + 1e-9);
                }
            }
        }

        #[test]
        fn subsample_keeps_proportions(
            counts in proptest::collection::vec(1usize..40, 1..10),
            seed in any::<u64>(),
            frac in 0.0f64..=1.0,
        ) {
            let corpus = corpus_with_counts(&counts);
            let n = corpus.len();
            let target = ((n as f64) * frac).round() as usize;
            let sub = subsample(&corpus, target, seed).unwrap();
            prop_assert_eq!(sub.len(), target);
            for (skill, &c) in counts.iter().enumerate() {
                let got = sub.items().iter().filter(|i| i.skill == skill).count();
                let want = c as f64 * target as f64 / n as f64;
                prop_assert!((got as f64 - want).abs() <= 1.0 + 1e-9);
            }
            prop_assert_eq!(subsample(&corpus, target, seed).unwrap(), sub);
        }
    }
}
