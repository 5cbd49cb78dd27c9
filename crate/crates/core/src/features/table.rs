//! Feature dump: `qid  type_id  target  f01 ... fNN`, tab-separated, with
//! `target` = the graded gain or `-` when unknown.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::FeatureVector;
use crate::error::{Error, Result};
use crate::eval::{header_block, TypeJudgments};
use crate::text::load_with;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRow {
    pub qid: String,
    pub type_id: String,
    pub target: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub n_features: usize,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn new(n_features: usize) -> Self {
        FeatureTable {
            n_features,
            rows: Vec::new(),
        }
    }

    /// Labels vectors with their gain from `judgments` (0 when unjudged), or
    /// leaves targets unknown when no judgments are given.
    pub fn from_vectors(vectors: Vec<FeatureVector>, judgments: Option<&TypeJudgments>) -> Self {
        let rows = vectors
            .into_iter()
            .map(|v| {
                let target = judgments.map(|j| {
                    f64::from(j.get(&v.qid).and_then(|g| g.get(&v.type_id)).copied().unwrap_or(0))
                });
                FeatureRow {
                    qid: v.qid,
                    type_id: v.type_id,
                    target,
                    values: v.values.to_vec(),
                }
            })
            .collect();
        FeatureTable {
            n_features: super::NUM_FEATURES,
            rows,
        }
    }

    /// Distinct qids in first-appearance order.
    pub fn qids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .filter(|r| seen.insert(r.qid.as_str()))
            .map(|r| r.qid.clone())
            .collect()
    }

    /// Row indices grouped by qid.
    pub fn groups(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut g: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            g.entry(r.qid.as_str()).or_default().push(i);
        }
        g
    }

    /// Keeps only the given feature columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<FeatureTable> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.n_features) {
            return Err(Error::InvalidArgument(format!(
                "feature column {c} out of range (table has {})",
                self.n_features
            )));
        }
        Ok(FeatureTable {
            n_features: columns.len(),
            rows: self
                .rows
                .iter()
                .map(|r| FeatureRow {
                    values: columns.iter().map(|&c| r.values[c]).collect(),
                    ..r.clone()
                })
                .collect(),
        })
    }

    /// Judgments implied by positive targets.
    pub fn judgments(&self) -> TypeJudgments {
        let mut j = TypeJudgments::new();
        for r in &self.rows {
            if let Some(t) = r.target.filter(|&t| t > 0.0) {
                j.insert(&r.qid, &r.type_id, t.round() as u32);
            }
        }
        j
    }

    pub fn to_tsv(&self, header: &[String]) -> String {
        let mut out = header_block(header);
        out.push_str("qid\ttype_id\ttarget");
        for i in 1..=self.n_features {
            let _ = write!(out, "\tf{i:02}");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{}\t{}\t", r.qid, r.type_id);
            match r.target {
                Some(t) => {
                    let _ = write!(out, "{t}");
                }
                None => out.push('-'),
            }
            for v in &r.values {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn parse_feature_table(text: &str) -> Result<FeatureTable> {
    let mut table: Option<FeatureTable> = None;
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let Some(table) = table.as_mut() else {
            table = Some(parse_header(&fields).map_err(|m| Error::parse(line_no, m))?);
            continue;
        };
        if fields.len() != 3 + table.n_features {
            return Err(Error::parse(
                line_no,
                format!("expected {} fields, found {}", 3 + table.n_features, fields.len()),
            ));
        }
        let (qid, type_id) = (fields[0].trim(), fields[1].trim());
        if qid.is_empty() || type_id.is_empty() {
            return Err(Error::parse(line_no, "empty qid or type id"));
        }
        if !seen.insert((qid.to_string(), type_id.to_string())) {
            return Err(Error::parse(line_no, format!("duplicate row for ({qid}, {type_id})")));
        }
        let target = match fields[2].trim() {
            "-" => None,
            t => Some(
                t.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite() && *x >= 0.0)
                    .ok_or_else(|| Error::parse(line_no, format!("bad target `{t}`")))?,
            ),
        };
        let values = fields[3..]
            .iter()
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::parse(line_no, "non-numeric or non-finite feature value"))?;
        table.rows.push(FeatureRow {
            qid: qid.to_string(),
            type_id: type_id.to_string(),
            target,
            values,
        });
    }
    table.ok_or_else(|| Error::parse(1, "missing header line"))
}

fn parse_header(fields: &[&str]) -> std::result::Result<FeatureTable, String> {
    if fields.len() < 4 || fields[..3] != ["qid", "type_id", "target"] {
        return Err("header must start with qid, type_id, target and list features".into());
    }
    for (i, f) in fields[3..].iter().enumerate() {
        if *f != format!("f{:02}", i + 1) {
            return Err(format!("feature column {} should be named f{:02}, found `{f}`", i + 1, i + 1));
        }
    }
    Ok(FeatureTable::new(fields.len() - 3))
}

pub fn load_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    load_with(path.as_ref(), parse_feature_table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_rows() {
        let text = "# seed=1\nqid\ttype_id\ttarget\tf01\tf02\nq1\tA\t3\t0.5\t1\nq1\tB\t-\t0\t2\n";
        let t = parse_feature_table(text).unwrap();
        assert_eq!(t.n_features, 2);
        assert_eq!(t.rows[0].target, Some(3.0));
        assert_eq!(t.rows[1].target, None);
        assert_eq!(parse_feature_table(&t.to_tsv(&[])).unwrap(), t);
        assert_eq!(t.judgments().get("q1").unwrap().len(), 1);
        let sel = t.select_columns(&[1]).unwrap();
        assert_eq!(sel.rows[1].values, vec![2.0]);
        assert!(t.select_columns(&[2]).is_err());
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_feature_table("").is_err());
        assert!(parse_feature_table("qid\ttype_id\ttarget\tf02\n").is_err());
        let head = "qid\ttype_id\ttarget\tf01\n";
        assert!(parse_feature_table(&format!("{head}q\tA\t1\n")).is_err());
        assert!(parse_feature_table(&format!("{head}q\tA\t-1\t0\n")).is_err());
        assert!(parse_feature_table(&format!("{head}q\tA\t1\tNaN\n")).is_err());
        assert!(parse_feature_table(&format!("{head}q\tA\t1\t0\nq\tA\t1\t0\n")).is_err());
    }

    proptest! {
        #[test]
        fn values_round_trip_exactly(values in proptest::collection::vec(-1e300f64..1e300, 1..6), target in 0u32..8) {
            let table = FeatureTable {
                n_features: values.len(),
                rows: vec![FeatureRow { qid: "q".into(), type_id: "T".into(), target: Some(f64::from(target)), values }],
            };
            prop_assert_eq!(parse_feature_table(&table.to_tsv(&[])).unwrap(), table);
        }
    }
}
