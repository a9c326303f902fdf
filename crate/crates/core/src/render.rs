//! Tree diagrams as Graphviz DOT or indented ASCII.

use std::fmt::{self, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::estimate::EstimateReport;
use crate::tree::{NodeId, PopTree};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RenderMode {
    /// The tree as given, before estimation.
    #[default]
    Draw,
    /// Rounded root estimate and the known leaf counts.
    Count,
    /// Rounded root estimate and the mean root estimate of each leaf path.
    Est,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum RenderFormat {
    #[default]
    Dot,
    Ascii,
}

macro_rules! keyword_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(format!("unknown value {other:?}")),
                }
            }
        }
    };
}

keyword_enum!(RenderMode { "draw" => RenderMode::Draw, "count" => RenderMode::Count, "est" => RenderMode::Est });
keyword_enum!(RenderFormat { "dot" => RenderFormat::Dot, "ascii" => RenderFormat::Ascii });

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RenderSpec {
    pub mode: RenderMode,
    pub format: RenderFormat,
    /// In draw mode, label informed edges with their estimate/total ratio.
    pub show_probs: bool,
    /// Label nodes with their description where one is given.
    pub show_desc: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("{mode} mode needs an estimation report")]
    MissingReport { mode: RenderMode },
    #[error("report does not belong to this tree: {reason}")]
    ReportMismatch { reason: String },
}

struct Labels {
    nodes: Vec<(String, Option<String>)>,
    edges: Vec<Option<String>>,
}

fn labels(tree: &PopTree, spec: &RenderSpec, report: Option<&EstimateReport>) -> Result<Labels, RenderError> {
    let name = |n: NodeId| {
        spec.show_desc
            .then(|| tree.description(n))
            .flatten()
            .unwrap_or_else(|| tree.label(n))
            .to_owned()
    };
    let mut nodes: Vec<(String, Option<String>)> = tree.nodes().map(|n| (name(n), None)).collect();
    let mut edges: Vec<Option<String>> = vec![None; tree.len()];

    let report = match (spec.mode, report) {
        (RenderMode::Draw, _) => {
            if spec.show_probs {
                for n in tree.nodes() {
                    edges[n.0] = tree.evidence(n).ratio().map(|r| format!("{r:.2}"));
                }
            }
            return Ok(Labels { nodes, edges });
        }
        (mode, None) => return Err(RenderError::MissingReport { mode }),
        (_, Some(report)) => report,
    };

    if report.root != tree.root_label() {
        return Err(RenderError::ReportMismatch {
            reason: format!("report root is {}, tree root is {}", report.root, tree.root_label()),
        });
    }
    nodes[tree.root().0].1 = Some(report.rounded_estimate.to_string());
    for (leaf, summary) in &report.per_leaf {
        let node = tree
            .node(leaf)
            .filter(|&n| tree.is_leaf(n))
            .ok_or_else(|| RenderError::ReportMismatch {
                reason: format!("report leaf {leaf} is not a leaf of the tree"),
            })?;
        nodes[node.0].1 = Some(match spec.mode {
            RenderMode::Count => summary.count.to_string(),
            _ => format!("{:.0}", summary.mean_estimate),
        });
    }
    for edge in report.per_edge.values() {
        let node = tree
            .node(&edge.to)
            .filter(|&n| tree.parent(n).map(|p| tree.label(p)) == Some(edge.from.as_str()))
            .ok_or_else(|| RenderError::ReportMismatch {
                reason: format!("report edge {}->{} is not in the tree", edge.from, edge.to),
            })?;
        edges[node.0] = Some(format!("{:.2}", edge.mean));
    }
    Ok(Labels { nodes, edges })
}

fn dot_string(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn render_dot(tree: &PopTree, labels: &Labels) -> String {
    let mut out = String::from("digraph tree {\n  node [shape=ellipse];\n");
    for n in tree.nodes() {
        let (name, value) = &labels.nodes[n.0];
        let text = match value {
            Some(v) => format!("{name}\n{v}"),
            None => name.clone(),
        };
        let shape = if value.is_some() && n != tree.root() { ", shape=box" } else { "" };
        writeln!(out, "  {} [label={}{shape}];", dot_string(tree.label(n)), dot_string(&text)).unwrap();
    }
    for n in tree.nodes().skip(1) {
        let parent = tree.parent(n).expect("non-root");
        write!(out, "  {} -> {}", dot_string(tree.label(parent)), dot_string(tree.label(n))).unwrap();
        if let Some(label) = &labels.edges[n.0] {
            write!(out, " [label={}]", dot_string(label)).unwrap();
        }
        out.push_str(";\n");
    }
    out.push_str("}\n");
    out
}

fn ascii_line(labels: &Labels, n: NodeId) -> String {
    let (name, value) = &labels.nodes[n.0];
    let mut line = name.clone();
    if let Some(v) = value {
        write!(line, " ({v})").unwrap();
    }
    if let Some(p) = &labels.edges[n.0] {
        write!(line, " p={p}").unwrap();
    }
    line
}

fn render_ascii(tree: &PopTree, labels: &Labels) -> String {
    fn walk(tree: &PopTree, labels: &Labels, node: NodeId, prefix: &str, out: &mut String) {
        let children = tree.children(node);
        for (i, &child) in children.iter().enumerate() {
            let last = i + 1 == children.len();
            let (branch, indent) = if last { ("└── ", "    ") } else { ("├── ", "│   ") };
            writeln!(out, "{prefix}{branch}{}", ascii_line(labels, child)).unwrap();
            walk(tree, labels, child, &format!("{prefix}{indent}"), out);
        }
    }
    let mut out = ascii_line(labels, tree.root());
    out.push('\n');
    walk(tree, labels, tree.root(), "", &mut out);
    out
}

/// Renders the tree. Count and est modes take the values shown from `report`.
pub fn render_tree(
    tree: &PopTree,
    spec: &RenderSpec,
    report: Option<&EstimateReport>,
) -> Result<String, RenderError> {
    let labels = labels(tree, spec, report)?;
    Ok(match spec.format {
        RenderFormat::Dot => render_dot(tree, &labels),
        RenderFormat::Ascii => render_ascii(tree, &labels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{wmm_estimate, EstimateConfig};
    use crate::tree::{build_tree, EdgeRecord};

    fn example_tree() -> PopTree {
        build_tree(&[
            EdgeRecord::new("Z", "A").survey(4, 11).description("Group A"),
            EdgeRecord::new("Z", "B").survey(34, 70).count(500),
            EdgeRecord::new("Z", "C").survey(1, 10),
            EdgeRecord::new("A", "D").survey(9, 10).count(50),
            EdgeRecord::new("A", "E").survey(1, 10),
        ])
        .unwrap()
    }

    fn spec(mode: RenderMode, format: RenderFormat) -> RenderSpec {
        RenderSpec {
            mode,
            format,
            show_probs: true,
            show_desc: false,
        }
    }

    #[test]
    fn draw_dot_shows_ratios() {
        let text = render_tree(&example_tree(), &spec(RenderMode::Draw, RenderFormat::Dot), None).unwrap();
        assert!(text.starts_with("digraph tree {\n"));
        assert!(text.contains("\"Z\" -> \"A\" [label=\"0.36\"];"));
        assert!(text.contains("\"Z\" -> \"B\" [label=\"0.49\"];"));
        assert_eq!(text.matches(" -> ").count(), 5);
    }

    #[test]
    fn draw_ascii_layout() {
        let mut s = spec(RenderMode::Draw, RenderFormat::Ascii);
        s.show_desc = true;
        let text = render_tree(&example_tree(), &s, None).unwrap();
        let expected = "Z\n├── Group A p=0.36\n│   ├── D p=0.90\n│   └── E p=0.10\n├── B p=0.49\n└── C p=0.10\n";
        assert_eq!(text, expected);
    }

    #[test]
    fn singleton_tree() {
        let tree = PopTree::singleton("Root");
        let text = render_tree(&tree, &spec(RenderMode::Draw, RenderFormat::Ascii), None).unwrap();
        assert_eq!(text, "Root\n");
    }

    #[test]
    fn count_and_est_modes() {
        let tree = example_tree();
        let report = wmm_estimate(&tree, &EstimateConfig::new(200, 3)).unwrap();
        let count = render_tree(&tree, &spec(RenderMode::Count, RenderFormat::Ascii), Some(&report)).unwrap();
        let est = render_tree(&tree, &spec(RenderMode::Est, RenderFormat::Ascii), Some(&report)).unwrap();
        assert!(count.starts_with(&format!("Z ({})\n", report.rounded_estimate)));
        assert!(count.contains("B (500) p="));
        assert!(count.contains("D (50) p="));
        let b_mean = format!("B ({:.0}) p=", report.per_leaf["B"].mean_estimate);
        assert!(est.contains(&b_mean));
        let differing: Vec<(&str, &str)> = count.lines().zip(est.lines()).filter(|(a, b)| a != b).collect();
        assert_eq!(differing.len(), 2);
        assert!(differing.iter().all(|(a, _)| a.contains("B (") || a.contains("D (")));
    }

    #[test]
    fn post_estimation_modes_need_a_report() {
        for mode in [RenderMode::Count, RenderMode::Est] {
            assert_eq!(
                render_tree(&example_tree(), &spec(mode, RenderFormat::Dot), None),
                Err(RenderError::MissingReport { mode })
            );
        }
    }

    #[test]
    fn foreign_reports_are_rejected() {
        let other = build_tree(&[
            EdgeRecord::new("Z", "Q").survey(1, 2).count(5),
            EdgeRecord::new("Z", "R").survey(1, 2),
        ])
        .unwrap();
        let report = wmm_estimate(&other, &EstimateConfig::new(10, 3)).unwrap();
        assert!(matches!(
            render_tree(&example_tree(), &spec(RenderMode::Count, RenderFormat::Dot), Some(&report)),
            Err(RenderError::ReportMismatch { .. })
        ));
    }

    #[test]
    fn dot_escapes_labels() {
        let tree = build_tree(&[EdgeRecord::new("Z", "A").description("say \"hi\"")]).unwrap();
        let s = RenderSpec {
            show_desc: true,
            ..Default::default()
        };
        let text = render_tree(&tree, &s, None).unwrap();
        assert!(text.contains("label=\"say \\\"hi\\\"\""));
    }

    #[test]
    fn keywords_parse() {
        assert_eq!("est".parse::<RenderMode>(), Ok(RenderMode::Est));
        assert_eq!("ascii".parse::<RenderFormat>(), Ok(RenderFormat::Ascii));
        assert_eq!(RenderMode::Count.to_string(), "count");
        assert!("png".parse::<RenderFormat>().is_err());
    }
}
