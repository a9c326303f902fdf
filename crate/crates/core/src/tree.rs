//! Edge-table ingestion and the validated population tree.
//!
//! The input is a comma-delimited table with one directed edge per row:
//!
//! ```text
//! from,to,Estimate,Total,Count,Population,Description
//! Z,A,4,11,NA,FALSE,First child of the root
//! ```
//!
//! `Estimate`/`Total` carry a survey that informs the branch probability of
//! the edge, `Count` carries a known marginal count for the `to` node (leaves
//! only). Missing values are written as `NA` or left empty.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const REQUIRED_COLUMNS: [&str; 5] = ["from", "to", "Estimate", "Total", "Count"];
const OPTIONAL_COLUMNS: [&str; 2] = ["Population", "Description"];

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error reading edge table: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("edge table is empty (expected a header row)")]
    MissingHeader,
    #[error("line 1: bad header {found:?}, expected from,to,Estimate,Total,Count[,Population[,Description]]")]
    BadHeader { found: Vec<String> },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity { line: u64, expected: usize, found: usize },
    #[error("line {line}: column {column} value {value:?} is not an integer")]
    NotInteger { line: u64, column: &'static str, value: String },
    #[error("line {line}: column {column} value {value} is negative")]
    Negative { line: u64, column: &'static str, value: String },
    #[error("line {line}: Estimate {estimate} exceeds Total {total}")]
    EstimateExceedsTotal { line: u64, estimate: u64, total: u64 },
    #[error("line {line}: Estimate and Total must be given together")]
    IncompleteSurvey { line: u64 },
    #[error("line {line}: Total must be positive")]
    ZeroTotal { line: u64 },
    #[error("line {line}: Population=TRUE requires Estimate and Total")]
    PopulationWithoutSurvey { line: u64 },
    #[error("line {line}: Population value {value:?} is not a logical (TRUE/FALSE/NA)")]
    BadLogical { line: u64, value: String },
    #[error("line {line}: empty node label in column {column}")]
    EmptyLabel { line: u64, column: &'static str },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("edge table has no rows")]
    Empty,
    #[error("no root: every node has a parent (cycle)")]
    NoRoot,
    #[error("multiple roots ({}): tree is disconnected", .roots.join(", "))]
    MultipleRoots { roots: Vec<String> },
    #[error("node {node} has more than one parent ({})", .parents.join(", "))]
    MultipleParents { node: String, parents: Vec<String> },
    #[error("line {line}: duplicate edge {from}->{to}")]
    DuplicateEdge { from: String, to: String, line: u64 },
    #[error("cycle or unreachable nodes: {}", .nodes.join(", "))]
    Cycle { nodes: Vec<String> },
    #[error("count given for internal node {node}; counts are allowed on leaves only")]
    CountOnInternal { node: String },
    #[error("{label} is not a leaf")]
    NotALeaf { label: String },
    #[error("unknown node {label}")]
    UnknownNode { label: String },
}

/// One row of the edge table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub from: String,
    pub to: String,
    /// Survey successes toward `to`.
    pub estimate: Option<u64>,
    /// Survey sample size drawn from `from`.
    pub total: Option<u64>,
    /// Marginal count of `to`; only meaningful on leaves.
    pub count: Option<u64>,
    /// Evidence is population-level; the exact ratio is used instead of sampling.
    pub population: bool,
    pub description: Option<String>,
    /// Source line (1-based, header is line 1); 0 when built in code.
    #[serde(default)]
    pub line: u64,
}

impl EdgeRecord {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        EdgeRecord {
            from: from.into(),
            to: to.into(),
            estimate: None,
            total: None,
            count: None,
            population: false,
            description: None,
            line: 0,
        }
    }

    pub fn survey(mut self, estimate: u64, total: u64) -> Self {
        self.estimate = Some(estimate);
        self.total = Some(total);
        self
    }

    pub fn count(mut self, count: u64) -> Self {
        self.count = Some(count);
        self
    }

    pub fn population(mut self) -> Self {
        self.population = true;
        self
    }

    pub fn description(mut self, text: impl Into<String>) -> Self {
        self.description = Some(text.into());
        self
    }

    pub fn evidence(&self) -> Evidence {
        match (self.estimate, self.total) {
            (Some(estimate), Some(total)) if self.population => {
                Evidence::PopulationRatio { estimate, total }
            }
            (Some(estimate), Some(total)) => Evidence::Survey { estimate, total },
            _ => Evidence::Uninformed,
        }
    }
}

/// What is known about the branch probability of one edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evidence {
    Survey { estimate: u64, total: u64 },
    PopulationRatio { estimate: u64, total: u64 },
    Uninformed,
}

impl Evidence {
    pub fn is_informed(&self) -> bool {
        !matches!(self, Evidence::Uninformed)
    }

    /// Observed ratio estimate/total, if any.
    pub fn ratio(&self) -> Option<f64> {
        match *self {
            Evidence::Survey { estimate, total } | Evidence::PopulationRatio { estimate, total } => {
                Some(estimate as f64 / total as f64)
            }
            Evidence::Uninformed => None,
        }
    }
}

/// A directed edge named by its endpoint labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.from, self.to)
    }
}

/// Reads an edge table. Blank lines are skipped.
pub fn parse_edge_table<R: Read>(source: R) -> Result<Vec<EdgeRecord>, TableError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Err(TableError::MissingHeader),
        Some(row) => row.map_err(csv_error)?,
    };
    let names: Vec<String> = header.iter().map(str::to_owned).collect();
    let width = header_width(&names).ok_or_else(|| TableError::BadHeader {
        found: names.clone(),
    })?;

    let mut records = Vec::new();
    for row in rows {
        let row = row.map_err(csv_error)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != width {
            return Err(TableError::Arity {
                line,
                expected: width,
                found: row.len(),
            });
        }
        records.push(parse_row(&row, line)?);
    }
    Ok(records)
}

pub(crate) fn csv_error(err: csv::Error) -> TableError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(io) => TableError::Io(io),
        kind => TableError::Csv {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn header_width(names: &[String]) -> Option<usize> {
    let expected = REQUIRED_COLUMNS.iter().chain(OPTIONAL_COLUMNS.iter());
    if names.len() < REQUIRED_COLUMNS.len() || names.len() > REQUIRED_COLUMNS.len() + OPTIONAL_COLUMNS.len() {
        return None;
    }
    names
        .iter()
        .zip(expected)
        .all(|(found, want)| found == want)
        .then_some(names.len())
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || field == "NA"
}

pub(crate) fn parse_count(field: &str, line: u64, column: &'static str) -> Result<Option<u64>, TableError> {
    if is_missing(field) {
        return Ok(None);
    }
    if let Ok(value) = field.parse::<u64>() {
        return Ok(Some(value));
    }
    if field.parse::<i64>().is_ok() {
        return Err(TableError::Negative {
            line,
            column,
            value: field.to_owned(),
        });
    }
    Err(TableError::NotInteger {
        line,
        column,
        value: field.to_owned(),
    })
}

pub(crate) fn parse_label(field: &str, line: u64, column: &'static str) -> Result<String, TableError> {
    if field.is_empty() {
        return Err(TableError::EmptyLabel { line, column });
    }
    Ok(field.to_owned())
}

fn parse_row(row: &csv::StringRecord, line: u64) -> Result<EdgeRecord, TableError> {
    let from = parse_label(&row[0], line, "from")?;
    let to = parse_label(&row[1], line, "to")?;
    let estimate = parse_count(&row[2], line, "Estimate")?;
    let total = parse_count(&row[3], line, "Total")?;
    let count = parse_count(&row[4], line, "Count")?;

    let population = match row.get(5) {
        None => false,
        Some(v) if is_missing(v) => false,
        Some("TRUE" | "True" | "true" | "T") => true,
        Some("FALSE" | "False" | "false" | "F") => false,
        Some(v) => {
            return Err(TableError::BadLogical {
                line,
                value: v.to_owned(),
            })
        }
    };
    let description = row
        .get(6)
        .filter(|d| !is_missing(d))
        .map(str::to_owned);

    match (estimate, total) {
        (Some(e), Some(t)) => {
            if t == 0 {
                return Err(TableError::ZeroTotal { line });
            }
            if e > t {
                return Err(TableError::EstimateExceedsTotal {
                    line,
                    estimate: e,
                    total: t,
                });
            }
        }
        (None, None) => {
            if population {
                return Err(TableError::PopulationWithoutSurvey { line });
            }
        }
        _ => return Err(TableError::IncompleteSurvey { line }),
    }

    Ok(EdgeRecord {
        from,
        to,
        estimate,
        total,
        count,
        population,
        description,
        line,
    })
}

/// Index of a node inside a [`PopTree`]. Indices follow breadth-first order
/// from the root, children in input order; the root is always `NodeId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

/// Validated rooted tree of population nodes.
#[derive(Debug, Clone)]
pub struct PopTree {
    labels: Vec<String>,
    index: HashMap<String, NodeId>,
    parent: Vec<Option<NodeId>>,
    children: Vec<Vec<NodeId>>,
    depth: Vec<usize>,
    /// Record of the edge entering each node (`None` for the root).
    incoming: Vec<Option<EdgeRecord>>,
    informative: Vec<NodeId>,
}

impl PopTree {
    /// A tree holding only its root.
    pub fn singleton(root: impl Into<String>) -> Self {
        let root = root.into();
        PopTree {
            index: HashMap::from([(root.clone(), NodeId(0))]),
            labels: vec![root],
            parent: vec![None],
            children: vec![Vec::new()],
            depth: vec![0],
            incoming: vec![None],
            informative: Vec::new(),
        }
    }

    pub fn root(&self) -> NodeId {
        NodeId(0)
    }

    pub fn root_label(&self) -> &str {
        &self.labels[0]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.labels.len() - 1
    }

    pub fn label(&self, node: NodeId) -> &str {
        &self.labels[node.0]
    }

    pub fn node(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied()
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parent[node.0]
    }

    pub fn children(&self, node: NodeId) -> &[NodeId] {
        &self.children[node.0]
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.depth[node.0]
    }

    pub fn is_leaf(&self, node: NodeId) -> bool {
        self.children[node.0].is_empty()
    }

    /// The record of the edge entering `node`.
    pub fn incoming(&self, node: NodeId) -> Option<&EdgeRecord> {
        self.incoming[node.0].as_ref()
    }

    pub fn evidence(&self, node: NodeId) -> Evidence {
        self.incoming(node)
            .map(EdgeRecord::evidence)
            .unwrap_or(Evidence::Uninformed)
    }

    pub fn count(&self, node: NodeId) -> Option<u64> {
        self.incoming(node).and_then(|r| r.count)
    }

    pub fn description(&self, node: NodeId) -> Option<&str> {
        self.incoming(node).and_then(|r| r.description.as_deref())
    }

    /// All nodes, breadth-first.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.labels.len()).map(NodeId)
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&n| self.is_leaf(n))
    }

    /// Nodes with at least one child, breadth-first.
    pub fn parents(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes().filter(|&n| !self.is_leaf(n))
    }

    /// Edge entering `node` as a label pair.
    pub fn edge_into(&self, node: NodeId) -> Option<Edge> {
        self.parent(node).map(|p| Edge {
            from: self.label(p).to_owned(),
            to: self.label(node).to_owned(),
        })
    }

    /// Edge records breadth-first (each non-root node contributes its incoming edge).
    pub fn records(&self) -> impl Iterator<Item = &EdgeRecord> + '_ {
        self.incoming.iter().flatten()
    }

    /// Informative leaves, breadth-first. These are the columns of the sample matrix.
    pub fn informative_leaves(&self) -> &[NodeId] {
        &self.informative
    }

    pub fn informative_labels(&self) -> Vec<&str> {
        self.informative.iter().map(|&n| self.label(n)).collect()
    }

    /// Copy of the tree with the survey on the edge entering `node` replaced.
    pub fn with_survey(&self, node: NodeId, estimate: u64, total: u64) -> PopTree {
        let mut tree = self.clone();
        if let Some(record) = tree.incoming[node.0].as_mut() {
            record.estimate = Some(estimate);
            record.total = Some(total);
            record.population = false;
        }
        tree.informative = informative_leaves(&tree);
        tree
    }
}

/// Builds and validates the tree described by `records`.
pub fn build_tree(records: &[EdgeRecord]) -> Result<PopTree, TreeError> {
    if records.is_empty() {
        return Err(TreeError::Empty);
    }

    // Labels in order of first appearance.
    let mut order: Vec<&str> = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    let mut edges_seen: HashSet<(&str, &str)> = HashSet::new();
    let mut incoming: HashMap<&str, &EdgeRecord> = HashMap::new();
    let mut out: HashMap<&str, Vec<&EdgeRecord>> = HashMap::new();

    for record in records {
        for label in [record.from.as_str(), record.to.as_str()] {
            if seen.insert(label) {
                order.push(label);
            }
        }
        if !edges_seen.insert((&record.from, &record.to)) {
            return Err(TreeError::DuplicateEdge {
                from: record.from.clone(),
                to: record.to.clone(),
                line: record.line,
            });
        }
        if let Some(previous) = incoming.insert(&record.to, record) {
            return Err(TreeError::MultipleParents {
                node: record.to.clone(),
                parents: vec![previous.from.clone(), record.from.clone()],
            });
        }
        out.entry(&record.from).or_default().push(record);
    }

    let roots: Vec<&str> = order
        .iter()
        .copied()
        .filter(|l| !incoming.contains_key(l))
        .collect();
    let root = match roots.as_slice() {
        [] => return Err(TreeError::NoRoot),
        [root] => *root,
        _ => {
            return Err(TreeError::MultipleRoots {
                roots: roots.iter().map(|s| s.to_string()).collect(),
            })
        }
    };

    let mut tree = PopTree::singleton(root);
    let mut queue = VecDeque::from([NodeId(0)]);
    while let Some(node) = queue.pop_front() {
        let label = tree.labels[node.0].clone();
        for record in out.get(label.as_str()).into_iter().flatten() {
            debug_assert!(!tree.index.contains_key(&record.to));
            let child = NodeId(tree.labels.len());
            tree.labels.push(record.to.clone());
            tree.index.insert(record.to.clone(), child);
            tree.parent.push(Some(node));
            tree.children.push(Vec::new());
            tree.depth.push(tree.depth[node.0] + 1);
            tree.incoming.push(Some((*record).clone()));
            tree.children[node.0].push(child);
            queue.push_back(child);
        }
    }

    if tree.labels.len() != order.len() {
        let nodes = order
            .iter()
            .filter(|l| !tree.index.contains_key(**l))
            .map(|s| s.to_string())
            .collect();
        return Err(TreeError::Cycle { nodes });
    }

    if let Some(node) = tree
        .nodes()
        .find(|&n| !tree.is_leaf(n) && tree.count(n).is_some())
    {
        return Err(TreeError::CountOnInternal {
            node: tree.label(node).to_owned(),
        });
    }

    tree.informative = informative_leaves(&tree);
    Ok(tree)
}

/// Leaves with a known count whose every root-path edge carries branch evidence.
pub fn informative_leaves(tree: &PopTree) -> Vec<NodeId> {
    tree.leaves()
        .filter(|&leaf| leaf != tree.root() && tree.count(leaf).is_some())
        .filter(|&leaf| {
            let mut node = leaf;
            while let Some(parent) = tree.parent(node) {
                if !tree.evidence(node).is_informed() {
                    return false;
                }
                node = parent;
            }
            true
        })
        .collect()
}

/// The unique root-to-leaf edge sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootPath {
    pub leaf: String,
    /// Edges from the root down to the leaf.
    pub edges: Vec<Edge>,
    /// Nodes entered by each edge, parallel to `edges`.
    pub nodes: Vec<NodeId>,
    pub count: Option<u64>,
}

pub fn path_to_leaf(tree: &PopTree, leaf: &str) -> Result<RootPath, TreeError> {
    let node = tree.node(leaf).ok_or_else(|| TreeError::UnknownNode {
        label: leaf.to_owned(),
    })?;
    if !tree.is_leaf(node) || node == tree.root() {
        return Err(TreeError::NotALeaf {
            label: leaf.to_owned(),
        });
    }
    let mut nodes = Vec::with_capacity(tree.depth(node));
    let mut cursor = node;
    while tree.parent(cursor).is_some() {
        nodes.push(cursor);
        cursor = tree.parent(cursor).unwrap();
    }
    nodes.reverse();
    let edges = nodes.iter().filter_map(|&n| tree.edge_into(n)).collect();
    Ok(RootPath {
        leaf: leaf.to_owned(),
        edges,
        nodes,
        count: tree.count(node),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "from,to,Estimate,Total,Count,Population,Description
Z,A,4,11,NA,FALSE,First child of the root
Z,B,34,70,500,FALSE,Second child of the root
Z,C,1,10,NA,FALSE,Third child of the root
A,D,9,10,50,FALSE,First grandchild
A,E,1,10,NA,FALSE,Second grandchild
";

    fn example_tree() -> PopTree {
        build_tree(&parse_edge_table(EXAMPLE.as_bytes()).unwrap()).unwrap()
    }

    #[test]
    fn parses_example_table() {
        let records = parse_edge_table(EXAMPLE.as_bytes()).unwrap();
        assert_eq!(records.len(), 5);
        let est: Vec<_> = records.iter().map(|r| r.estimate.unwrap()).collect();
        let tot: Vec<_> = records.iter().map(|r| r.total.unwrap()).collect();
        assert_eq!(est, [4, 34, 1, 9, 1]);
        assert_eq!(tot, [11, 70, 10, 10, 10]);
        let counted: Vec<_> = records
            .iter()
            .filter(|r| r.count.is_some())
            .map(|r| (r.to.as_str(), r.count.unwrap()))
            .collect();
        assert_eq!(counted, [("B", 500), ("D", 50)]);
        assert_eq!(records[0].description.as_deref(), Some("First child of the root"));
        assert_eq!(records[2].line, 4);
    }

    #[test]
    fn parses_minimal_row_with_empty_description() {
        let text = "from,to,Estimate,Total,Count,Population,Description\nZ,A,1,1,100,FALSE,\n";
        let records = parse_edge_table(text.as_bytes()).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!((r.estimate, r.total, r.count), (Some(1), Some(1), Some(100)));
        assert!(!r.population);
        assert_eq!(r.description, None);
    }

    #[test]
    fn optional_columns_may_be_absent() {
        let text = "from,to,Estimate,Total,Count\nZ,A,NA,,7\n";
        let records = parse_edge_table(text.as_bytes()).unwrap();
        assert_eq!(records[0].estimate, None);
        assert_eq!(records[0].total, None);
        assert!(!records[0].population);
    }

    #[test]
    fn rejects_estimate_above_total() {
        let text = "from,to,Estimate,Total,Count\nZ,A,1,2,NA\nZ,B,12,10,NA\n";
        let err = parse_edge_table(text.as_bytes()).unwrap_err();
        assert!(matches!(err, TableError::EstimateExceedsTotal { line: 3, .. }), "{err}");
        assert!(err.to_string().starts_with("line 3"));
    }

    #[test]
    fn rejects_bad_fields() {
        let cases = [
            ("Z,A,1.5,2,NA", "not an integer"),
            ("Z,A,-1,2,NA", "negative"),
            ("Z,A,1,2", "expected 5 fields"),
            ("Z,A,1,NA,NA", "given together"),
            ("Z,A,0,0,NA", "positive"),
            (",A,1,2,NA", "empty node label"),
        ];
        for (row, needle) in cases {
            let text = format!("from,to,Estimate,Total,Count\n{row}\n");
            let err = parse_edge_table(text.as_bytes()).unwrap_err().to_string();
            assert!(err.contains(needle), "{row}: {err}");
            assert!(err.starts_with("line 2"), "{row}: {err}");
        }
        let text = "from,to,Estimate,Total,Count,Population\nZ,A,NA,NA,NA,TRUE\n";
        assert!(matches!(
            parse_edge_table(text.as_bytes()),
            Err(TableError::PopulationWithoutSurvey { .. })
        ));
    }

    #[test]
    fn rejects_bad_header() {
        assert!(matches!(
            parse_edge_table("from,to,Estimate\n".as_bytes()),
            Err(TableError::BadHeader { .. })
        ));
        assert!(matches!(
            parse_edge_table("".as_bytes()),
            Err(TableError::MissingHeader)
        ));
    }

    #[test]
    fn builds_example_tree() {
        let tree = example_tree();
        assert_eq!(tree.root_label(), "Z");
        assert_eq!(tree.len(), 6);
        assert_eq!(tree.edge_count(), 5);
        let leaves: Vec<_> = tree.leaves().map(|n| tree.label(n)).collect();
        assert_eq!(leaves, ["B", "C", "D", "E"]);
        assert_eq!(tree.informative_labels(), ["B", "D"]);
        let kids: Vec<_> = tree
            .children(tree.root())
            .iter()
            .map(|&n| tree.label(n))
            .collect();
        assert_eq!(kids, ["A", "B", "C"]);
    }

    #[test]
    fn binary_fan_is_fully_informative() {
        let records = vec![
            EdgeRecord::new("Z", "A").survey(3, 10).count(30),
            EdgeRecord::new("Z", "B").survey(7, 10).count(70),
        ];
        let tree = build_tree(&records).unwrap();
        assert_eq!(tree.informative_labels(), ["A", "B"]);
    }

    #[test]
    fn structural_errors() {
        let forest = [EdgeRecord::new("Z", "A"), EdgeRecord::new("B", "C")];
        let err = build_tree(&forest).unwrap_err();
        assert!(matches!(err, TreeError::MultipleRoots { .. }));
        assert!(err.to_string().contains("multiple roots"));
        assert!(err.to_string().contains("disconnected"));

        let cycle = [
            EdgeRecord::new("Z", "A"),
            EdgeRecord::new("B", "C"),
            EdgeRecord::new("C", "B"),
        ];
        assert!(matches!(build_tree(&cycle), Err(TreeError::Cycle { .. })));

        let ring = [EdgeRecord::new("A", "B"), EdgeRecord::new("B", "A")];
        assert_eq!(build_tree(&ring).unwrap_err(), TreeError::NoRoot);

        let dup = [EdgeRecord::new("Z", "A"), EdgeRecord::new("Z", "A")];
        assert!(matches!(build_tree(&dup), Err(TreeError::DuplicateEdge { .. })));

        let two_parents = [
            EdgeRecord::new("Z", "A"),
            EdgeRecord::new("Z", "B"),
            EdgeRecord::new("A", "C"),
            EdgeRecord::new("B", "C"),
        ];
        assert!(matches!(
            build_tree(&two_parents),
            Err(TreeError::MultipleParents { .. })
        ));

        let internal = [
            EdgeRecord::new("Z", "A").count(5),
            EdgeRecord::new("A", "B").count(3),
        ];
        assert_eq!(
            build_tree(&internal).unwrap_err(),
            TreeError::CountOnInternal { node: "A".into() }
        );

        assert_eq!(build_tree(&[]).unwrap_err(), TreeError::Empty);
    }

    #[test]
    fn informative_requires_complete_path() {
        let mut records = parse_edge_table(EXAMPLE.as_bytes()).unwrap();
        records[0].estimate = None;
        records[0].total = None;
        let tree = build_tree(&records).unwrap();
        assert_eq!(tree.informative_labels(), ["B"]);

        for r in &mut records {
            r.count = None;
        }
        let tree = build_tree(&records).unwrap();
        assert!(informative_leaves(&tree).is_empty());
    }

    #[test]
    fn population_edges_count_as_evidence() {
        let records = [EdgeRecord::new("Z", "A").survey(1, 2).population().count(10)];
        let tree = build_tree(&records).unwrap();
        assert_eq!(tree.informative_labels(), ["A"]);
        assert_eq!(
            tree.evidence(tree.node("A").unwrap()),
            Evidence::PopulationRatio { estimate: 1, total: 2 }
        );
    }

    #[test]
    fn paths_to_leaves() {
        let tree = example_tree();
        let d = path_to_leaf(&tree, "D").unwrap();
        let pairs: Vec<_> = d.edges.iter().map(|e| e.to_string()).collect();
        assert_eq!(pairs, ["Z->A", "A->D"]);
        assert_eq!(d.count, Some(50));
        let b = path_to_leaf(&tree, "B").unwrap();
        assert_eq!(b.edges.len(), 1);
        assert_eq!(b.count, Some(500));
        assert!(matches!(
            path_to_leaf(&tree, "A"),
            Err(TreeError::NotALeaf { .. })
        ));
        assert!(matches!(
            path_to_leaf(&tree, "Q"),
            Err(TreeError::UnknownNode { .. })
        ));

        let single = build_tree(&[EdgeRecord::new("Z", "A")]).unwrap();
        assert_eq!(path_to_leaf(&single, "A").unwrap().edges.len(), 1);
    }
}
