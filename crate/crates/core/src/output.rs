//! Text formats for run artefacts: the probability tree, the per-step
//! consistency trace, projection events, percentile tables and run metadata.
//!
//! Every file starts with `# config_hash=<hex>` so files from different runs
//! cannot be mixed silently. Numbers use Rust's locale-independent
//! formatting; times and DHP values print in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::histories::{HistoryTree, NodeId};
use crate::selection::{EpsilonSchedule, RunConfig, RunRecord};
use crate::stats::PercentileTable;

pub const TREE_FILE: &str = "tree.csv";
pub const CONSISTENCY_FILE: &str = "consistency.csv";
pub const PROJECTIONS_FILE: &str = "projections.csv";
pub const PERCENTILE_FILE: &str = "percentiles.csv";
pub const METADATA_FILE: &str = "metadata.txt";

const HASH_PREFIX: &str = "# config_hash=";
const TREE_HEADER: &str = "id,parent,time,partition,probability,status";
const CONSISTENCY_HEADER: &str = "t,min_dhp,epsilon,leaf_count,projection";
const PROJECTIONS_HEADER: &str = "t,leaf,partition,dhp,epsilon,child_a,child_b,probability_a,probability_b";

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).fold(String::new(), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

fn hash_line(hash: &str) -> String {
    format!("{HASH_PREFIX}{hash}\n")
}

/// Splits off the hash line, if present.
pub fn read_hash(text: &str) -> Option<&str> {
    text.lines().next()?.strip_prefix(HASH_PREFIX).map(str::trim)
}

/// `key = value` lines; `#` starts a comment line.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: n + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn format_key_values(entries: &[(String, String)]) -> String {
    entries.iter().fold(String::new(), |mut s, (k, v)| {
        writeln!(s, "{k} = {v}").unwrap();
        s
    })
}

/// Canonical key-value form of a run configuration, using the command-line
/// flag names. `table_source` names the percentile table file, if any.
pub fn config_entries(config: &RunConfig, table_source: Option<&str>) -> Vec<(String, String)> {
    let mut e: Vec<(String, String)> = vec![
        ("d1".into(), config.d1.to_string()),
        ("d2".into(), config.d2.to_string()),
        ("rank".into(), config.rank.to_string()),
        ("criterion".into(), config.kind.to_string()),
        ("delta".into(), config.triviality.delta.to_string()),
        ("delta-mode".into(), config.triviality.kind.to_string()),
        ("dt".into(), config.dt.to_string()),
        ("t-max".into(), config.t_max.to_string()),
        ("max-histories".into(), config.max_histories.to_string()),
        ("max-steps".into(), config.max_steps.to_string()),
        ("bisect-tol".into(), config.bisect_tol.to_string()),
        ("seed".into(), config.seed.to_string()),
        ("epsilon-mode".into(), config.schedule.mode_name().into()),
    ];
    match &config.schedule {
        EpsilonSchedule::Constant(eps) => e.push(("epsilon".into(), eps.to_string())),
        EpsilonSchedule::Percentile { p, table } => {
            e.push(("percentile-p".into(), p.to_string()));
            if let Some(src) = table_source {
                e.push(("percentile-table".into(), src.into()));
            }
            e.push(("percentile-table-hash".into(), config_hash(&table.to_csv())));
        }
    }
    e
}

/// Hash identifying a run configuration.
pub fn run_hash(config: &RunConfig) -> String {
    config_hash(&format_key_values(&config_entries(config, None)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeStatus {
    Internal,
    Live,
    Dead,
}

impl NodeStatus {
    fn name(self) -> &'static str {
        match self {
            NodeStatus::Internal => "internal",
            NodeStatus::Live => "leaf",
            NodeStatus::Dead => "dead",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "internal" => Some(NodeStatus::Internal),
            "leaf" => Some(NodeStatus::Live),
            "dead" => Some(NodeStatus::Dead),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeRow {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub time: f64,
    /// Schmidt labels of the projection that created the node.
    pub partition: Vec<usize>,
    /// Rounded to 12 significant digits.
    pub probability: f64,
    pub status: NodeStatus,
}

/// The probability tree as flat records, root first, then in creation order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDocument {
    pub rows: Vec<TreeRow>,
}

fn format_probability(p: f64) -> String {
    format!("{p:.11e}")
}

fn round_probability(p: f64) -> f64 {
    format_probability(p).parse().expect("formatted float parses")
}

impl TreeDocument {
    pub fn from_tree(tree: &HistoryTree) -> Self {
        let rows = tree
            .nodes()
            .iter()
            .map(|n| TreeRow {
                id: n.id,
                parent: n.parent,
                time: n.time,
                partition: n.partition.clone(),
                probability: round_probability(n.probability),
                status: if !n.is_leaf() {
                    NodeStatus::Internal
                } else if n.dead {
                    NodeStatus::Dead
                } else {
                    NodeStatus::Live
                },
            })
            .collect();
        Self { rows }
    }

    /// Probabilities of the terminal nodes, dead ones included.
    pub fn terminal_probabilities(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.status != NodeStatus::Internal)
            .map(|r| r.probability)
            .collect()
    }

    pub fn to_text(&self, hash: &str) -> String {
        let mut s = hash_line(hash);
        writeln!(s, "{TREE_HEADER}").unwrap();
        for r in &self.rows {
            let parent = r.parent.map(|p| p.to_string()).unwrap_or_default();
            let partition = r.partition.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
            writeln!(
                s,
                "{},{parent},{},{partition},{},{}",
                r.id,
                r.time,
                format_probability(r.probability),
                r.status.name()
            )
            .unwrap();
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, fields) in data_rows(text, TREE_HEADER)? {
            let perr = |m: String| Error::Parse { line: lineno, message: m };
            if fields.len() != 6 {
                return Err(perr(format!("expected 6 fields, got {}", fields.len())));
            }
            let parent = if fields[1].is_empty() {
                None
            } else {
                Some(fields[1].parse().map_err(|e| perr(format!("parent: {e}")))?)
            };
            let partition = if fields[3].is_empty() {
                Vec::new()
            } else {
                fields[3]
                    .split(';')
                    .map(|x| x.parse().map_err(|e| perr(format!("partition: {e}"))))
                    .collect::<Result<_>>()?
            };
            rows.push(TreeRow {
                id: fields[0].parse().map_err(|e| perr(format!("id: {e}")))?,
                parent,
                time: fields[2].parse().map_err(|e| perr(format!("time: {e}")))?,
                partition,
                probability: fields[4].parse().map_err(|e| perr(format!("probability: {e}")))?,
                status: NodeStatus::parse(fields[5]).ok_or_else(|| perr(format!("status `{}`", fields[5])))?,
            });
        }
        Ok(Self { rows })
    }
}

/// Data lines after the hash comment and the expected header, with their
/// 1-based line numbers.
fn data_rows<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut header_seen = false;
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != header {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("expected header `{header}`"),
                });
            }
            header_seen = true;
            continue;
        }
        out.push((n + 1, line.split(',').collect()));
    }
    if !header_seen {
        return Err(Error::Parse {
            line: 0,
            message: format!("missing header `{header}`"),
        });
    }
    Ok(out)
}

pub fn consistency_csv(record: &RunRecord, hash: &str) -> String {
    let mut s = hash_line(hash);
    writeln!(s, "{CONSISTENCY_HEADER}").unwrap();
    for step in &record.steps {
        let min = step.min_dhp.map(|x| x.to_string()).unwrap_or_default();
        writeln!(s, "{},{min},{},{},{}", step.t, step.epsilon, step.leaf_count, step.projections).unwrap();
    }
    s
}

pub fn projections_csv(record: &RunRecord, hash: &str) -> String {
    let mut s = hash_line(hash);
    writeln!(s, "{PROJECTIONS_HEADER}").unwrap();
    for e in &record.events {
        let partition = e.partition.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";");
        writeln!(
            s,
            "{},{},{partition},{},{},{},{},{},{}",
            e.t,
            e.leaf,
            e.dhp,
            e.epsilon,
            e.children[0],
            e.children[1],
            format_probability(e.child_probabilities[0]),
            format_probability(e.child_probabilities[1])
        )
        .unwrap();
    }
    s
}

/// Parsed row of the consistency trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRow {
    pub t: f64,
    pub min_dhp: Option<f64>,
    pub epsilon: f64,
    pub leaf_count: usize,
    pub projections: usize,
}

pub fn parse_consistency_csv(text: &str) -> Result<Vec<ConsistencyRow>> {
    data_rows(text, CONSISTENCY_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            let perr = |m: String| Error::Parse { line, message: m };
            if f.len() != 5 {
                return Err(perr(format!("expected 5 fields, got {}", f.len())));
            }
            Ok(ConsistencyRow {
                t: f[0].parse().map_err(|e| perr(format!("t: {e}")))?,
                min_dhp: if f[1].is_empty() {
                    None
                } else {
                    Some(f[1].parse().map_err(|e| perr(format!("min_dhp: {e}")))?)
                },
                epsilon: f[2].parse().map_err(|e| perr(format!("epsilon: {e}")))?,
                leaf_count: f[3].parse().map_err(|e| perr(format!("leaf_count: {e}")))?,
                projections: f[4].parse().map_err(|e| perr(format!("projection: {e}")))?,
            })
        })
        .collect()
}

/// Projection times from a projections file.
pub fn parse_projection_times(text: &str) -> Result<Vec<f64>> {
    data_rows(text, PROJECTIONS_HEADER)?
        .into_iter()
        .map(|(line, f)| {
            f[0].parse().map_err(|e| Error::Parse {
                line,
                message: format!("t: {e}"),
            })
        })
        .collect()
}

pub fn percentile_csv(table: &PercentileTable, hash: &str) -> String {
    hash_line(hash) + &table.to_csv()
}

/// Paths of the files making up one run's output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputBundle {
    pub dir: PathBuf,
    pub tree: PathBuf,
    pub consistency: PathBuf,
    pub projections: PathBuf,
    pub percentiles: Option<PathBuf>,
    pub metadata: PathBuf,
}

impl OutputBundle {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref().to_path_buf();
        Self {
            tree: dir.join(TREE_FILE),
            consistency: dir.join(CONSISTENCY_FILE),
            projections: dir.join(PROJECTIONS_FILE),
            percentiles: None,
            metadata: dir.join(METADATA_FILE),
            dir,
        }
    }

    /// Writes all files for `record`. `extra` metadata entries (code version,
    /// stop reason) are appended after the configuration.
    pub fn write_run(
        mut self,
        config: &RunConfig,
        record: &RunRecord,
        table_source: Option<&str>,
        extra: &[(String, String)],
    ) -> Result<Self> {
        fs::create_dir_all(&self.dir)?;
        let hash = run_hash(config);
        write_tree(&record.tree, &self.tree, &hash)?;
        fs::write(&self.consistency, consistency_csv(record, &hash))?;
        fs::write(&self.projections, projections_csv(record, &hash))?;
        if let EpsilonSchedule::Percentile { table, .. } = &config.schedule {
            let path = self.dir.join(PERCENTILE_FILE);
            fs::write(&path, percentile_csv(table, &hash))?;
            self.percentiles = Some(path);
        }
        let mut entries = config_entries(config, table_source);
        entries.extend_from_slice(extra);
        fs::write(&self.metadata, hash_line(&hash) + &format_key_values(&entries))?;
        Ok(self)
    }
}

pub fn write_tree(tree: &HistoryTree, path: impl AsRef<Path>, hash: &str) -> Result<()> {
    fs::write(path, TreeDocument::from_tree(tree).to_text(hash))?;
    Ok(())
}
