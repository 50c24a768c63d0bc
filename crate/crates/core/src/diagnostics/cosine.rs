use nalgebra::DMatrix;

use super::{resolve, Bank, GroupSelector};
use crate::corpus::Level;
use crate::error::{Error, Result};
use crate::table::{fmt3, fmt_full, Table};

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

fn unit_sum(rows: &DMatrix<f64>, which: &str) -> Result<Vec<f64>> {
    if rows.nrows() == 0 {
        return Err(Error::Empty(format!("group {which} is empty")));
    }
    let mut acc = vec![Neumaier::default(); rows.ncols()];
    for (i, row) in rows.row_iter().enumerate() {
        let norm = row.norm();
        if norm == 0.0 {
            return Err(Error::ZeroVector(format!("{which} row {i}")));
        }
        for (a, v) in acc.iter_mut().zip(row.iter()) {
            a.add(v / norm);
        }
    }
    Ok(acc.into_iter().map(Neumaier::value).collect())
}

/// Mean cosine similarity over all cross pairs of rows of `a` and `b`.
///
/// Uses the identity mean_ij <â_i, b̂_j> = <Σ â_i, Σ b̂_j> / (m n) with
/// compensated sums, so the cost is O((m + n) d).
pub fn avg_pairwise_cosine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let sa = unit_sum(a, "A")?;
    let sb = unit_sum(b, "B")?;
    let mut dot = Neumaier::default();
    for (x, y) in sa.iter().zip(&sb) {
        dot.add(x * y);
    }
    let mean = dot.value() / (a.nrows() as f64 * b.nrows() as f64);
    Ok(mean.clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRow {
    pub a: GroupSelector,
    pub b: GroupSelector,
    pub value: f64,
}

impl SimilarityRow {
    pub fn between(&self) -> bool {
        self.a.corpus != self.b.corpus
    }
}

/// Rows split into between-corpus and within-corpus sections, each in
/// input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimilarityTable {
    pub between: Vec<SimilarityRow>,
    pub within: Vec<SimilarityRow>,
}

impl SimilarityTable {
    pub fn rows(&self) -> impl Iterator<Item = &SimilarityRow> {
        self.between.iter().chain(&self.within)
    }

    pub fn len(&self) -> usize {
        self.between.len() + self.within.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, a: &GroupSelector, b: &GroupSelector) -> Option<f64> {
        self.rows()
            .find(|r| (&r.a == a && &r.b == b) || (&r.a == b && &r.b == a))
            .map(|r| r.value)
    }

    /// Section header rows followed by their pairs, values to 3 decimals.
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(["Group A", "Group B", "Cosine Similarity"]);
        for (title, rows) in [("Between Dataset", &self.between), ("Within Dataset", &self.within)] {
            if rows.is_empty() {
                continue;
            }
            t.push([title, "", ""]);
            for r in rows {
                t.push([r.a.to_string(), r.b.to_string(), fmt3(r.value)]);
            }
        }
        t
    }

    pub fn to_markdown(&self) -> String {
        self.to_table().to_markdown()
    }

    pub fn to_csv(&self) -> String {
        let mut t = Table::new(["section", "group_a", "group_b", "cosine_similarity"]);
        for r in self.rows() {
            let section = if r.between() { "between" } else { "within" };
            t.push([section.to_string(), r.a.to_string(), r.b.to_string(), fmt_full(r.value)]);
        }
        t.to_csv()
    }
}

pub fn cosine_table(pairs: &[(GroupSelector, GroupSelector)], banks: &[Bank<'_>]) -> Result<SimilarityTable> {
    let mut table = SimilarityTable::default();
    for (a, b) in pairs {
        let ga = resolve(banks, a)?;
        let gb = resolve(banks, b)?;
        let row = SimilarityRow {
            a: a.clone(),
            b: b.clone(),
            value: avg_pairwise_cosine(&ga.vectors, &gb.vectors)?,
        };
        if row.between() {
            table.between.push(row);
        } else {
            table.within.push(row);
        }
    }
    Ok(table)
}

/// The pair list comparing `focus` labels with an `anchor` label across two
/// corpora: A·f–B·f and A·f–B·anchor for each focus label, then
/// A·anchor–B·f and A·anchor–B·anchor, then the within-corpus focus–anchor
/// pairs of A and of B.
pub fn alignment_pairs(
    a: &str,
    b: &str,
    level: Level,
    focus: &[usize],
    anchor: usize,
) -> Vec<(GroupSelector, GroupSelector)> {
    let s = |c: &str, i| GroupSelector::new(c, level, i);
    let mut pairs = Vec::new();
    for &f in focus {
        pairs.push((s(a, f), s(b, f)));
        pairs.push((s(a, f), s(b, anchor)));
    }
    for &f in focus {
        pairs.push((s(a, anchor), s(b, f)));
    }
    pairs.push((s(a, anchor), s(b, anchor)));
    for corpus in [a, b] {
        for &f in focus {
            pairs.push((s(corpus, f), s(corpus, anchor)));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_row_iterator(rows.len(), rows[0].len(), rows.iter().flat_map(|r| r.iter().cloned()))
    }

    fn naive(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        let mut s = 0.0;
        for ra in a.row_iter() {
            for rb in b.row_iter() {
                s += ra.dot(&rb) / (ra.norm() * rb.norm());
            }
        }
        s / (a.nrows() * b.nrows()) as f64
    }

    #[test]
    fn small_examples() {
        let e1 = m(&[&[1.0, 0.0]]);
        let e2 = m(&[&[0.0, 1.0]]);
        assert_eq!(avg_pairwise_cosine(&e1, &e1).unwrap(), 1.0);
        assert_eq!(avg_pairwise_cosine(&e1, &e2).unwrap(), 0.0);
        let both = m(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(avg_pairwise_cosine(&e1, &both).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        let e1 = m(&[&[1.0, 0.0]]);
        assert!(matches!(avg_pairwise_cosine(&e1, &DMatrix::zeros(0, 2)), Err(Error::Empty(_))));
        assert!(matches!(avg_pairwise_cosine(&e1, &DMatrix::zeros(1, 2)), Err(Error::ZeroVector(_))));
        assert!(avg_pairwise_cosine(&e1, &DMatrix::zeros(1, 3)).is_err());
    }

    #[test]
    fn pair_layout_has_eleven_rows() {
        let pairs = alignment_pairs("Test A", "Test B", Level::Skill, &[3, 4], 7);
        assert_eq!(pairs.len(), 11);
        assert_eq!(pairs[1].0.to_string(), "Test A Skill 4");
        assert_eq!(pairs[1].1.to_string(), "Test B Skill 8");
        assert_eq!(pairs[10].0.to_string(), "Test B Skill 5");
        assert_eq!(pairs.iter().filter(|(a, b)| a.corpus != b.corpus).count(), 7);
    }

    #[test]
    fn empty_pair_list_gives_empty_table() {
        let t = cosine_table(&[], &[]).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.to_csv(), "section,group_a,group_b,cosine_similarity\n");
    }

    fn group(max_rows: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(0.1f64..3.0, 3), 1..max_rows)
    }

    proptest! {
        #[test]
        fn matches_naive_and_is_symmetric(a in group(12), b in group(12), signs in prop::collection::vec(any::<bool>(), 3)) {
            let flip = |g: &Vec<Vec<f64>>| {
                DMatrix::from_fn(g.len(), 3, |i, j| if signs[j] { -g[i][j] } else { g[i][j] })
            };
            let (ma, mb) = (flip(&a), DMatrix::from_fn(b.len(), 3, |i, j| b[i][j]));
            let v = avg_pairwise_cosine(&ma, &mb).unwrap();
            prop_assert!((v - naive(&ma, &mb)).abs() < 1e-12);
            prop_assert_eq!(v, avg_pairwise_cosine(&mb, &ma).unwrap());
        }
    }
}
