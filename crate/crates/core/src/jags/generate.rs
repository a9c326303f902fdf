use std::collections::HashMap;
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tree::{NodeId, PopTree};

const PREAMBLE: &str = "# This JAGS model was created using 'makeJAGStree' in the 'JAGStree' package in R.\n\
# The root may have lognormal or discretized uniform prior.\n\
# Branching and leaf prior distributions are assumed Dirichlet and Multinomial, \n\
# respectively. \n";

const BLANK: &str = "\t\n";

/// Names the generator itself uses besides the node-derived ones.
const RESERVED: [&str; 9] = ["mu", "tau", "Lz", "Uz", "i", "for", "in", "data", "model"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JagsError {
    #[error("node label {label:?} is not a valid JAGS identifier (a letter followed by letters, digits or periods)")]
    InvalidLabel { label: String },
    #[error("parent {parent} has a single child {child}; no branching distribution applies")]
    SingleChild { parent: String, child: String },
    #[error("generated name {name} is used for both {first} and {second}")]
    NameCollision {
        name: String,
        first: String,
        second: String,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    #[default]
    Lognormal,
    Uniform,
}

impl fmt::Display for Prior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Prior::Lognormal => "lognormal",
            Prior::Uniform => "uniform",
        })
    }
}

impl FromStr for Prior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lognormal" => Ok(Prior::Lognormal),
            "uniform" => Ok(Prior::Uniform),
            other => Err(format!("unknown prior {other:?} (expected lognormal or uniform)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JagsModelText {
    pub preamble: String,
    pub data_chunk: String,
    pub model_chunk: String,
    pub full_text: String,
}

/// Concatenation of the labels, without separators.
pub fn sibling_tuple_name<S: AsRef<str>>(labels: &[S]) -> String {
    labels.iter().map(AsRef::as_ref).collect()
}

fn is_identifier(label: &str) -> bool {
    let mut chars = label.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '.')
}

struct Names<'t> {
    tree: &'t PopTree,
    tuples: Vec<Option<String>>,
}

impl<'t> Names<'t> {
    fn new(tree: &'t PopTree) -> Self {
        let tuples = tree
            .nodes()
            .map(|n| {
                let children = tree.children(n);
                (!children.is_empty()).then(|| {
                    let labels: Vec<&str> = children.iter().map(|&c| tree.label(c)).collect();
                    sibling_tuple_name(&labels)
                })
            })
            .collect();
        Names { tree, tuples }
    }

    fn tuple(&self, parent: NodeId) -> &str {
        self.tuples[parent.0].as_deref().expect("parent has children")
    }

    /// How the count of `node` is referred to in the model.
    fn reference(&self, node: NodeId) -> String {
        match self.tree.parent(node) {
            None => self.tree.label(node).to_owned(),
            Some(parent) => {
                let k = self.tree.children(parent).iter().position(|&c| c == node).expect("child");
                format!("{}[{}]", self.tuple(parent), k + 1)
            }
        }
    }

    /// Every top-level symbol the model defines or reads, with what it stands for.
    fn check_unique(&self) -> Result<(), JagsError> {
        let tree = self.tree;
        let mut owners: HashMap<String, String> = RESERVED
            .iter()
            .map(|&r| (r.to_owned(), "a reserved name".to_owned()))
            .collect();
        let mut claim = |name: String, owner: String| -> Result<(), JagsError> {
            if let Some(first) = owners.get(&name) {
                return Err(JagsError::NameCollision {
                    name,
                    first: first.clone(),
                    second: owner,
                });
            }
            owners.insert(name, owner);
            Ok(())
        };
        let root = tree.root_label();
        claim(root.to_owned(), format!("root {root}"))?;
        claim(format!("{root}.cont"), format!("continuous prior of {root}"))?;
        for parent in tree.parents() {
            let x = tree.label(parent);
            let n = tree.children(parent).len();
            claim(self.tuple(parent).to_owned(), format!("children of {x}"))?;
            claim(format!("p{x}"), format!("branch probabilities of {x}"))?;
            claim(format!("p{x}.params"), format!("prior parameters of {x}"))?;
            for k in 1..=n {
                claim(format!("p{x}{k}"), format!("prior parameter {k} of {x}"))?;
            }
            if n >= 3 {
                claim(format!("{x}.bin"), format!("binomial trials of {x}"))?;
                claim(format!("p{x}.bin"), format!("binomial probabilities of {x}"))?;
            }
        }
        Ok(())
    }
}

/// Emits the model for `tree`: a Dirichlet (or Beta for two children) prior
/// on each parent's branch probabilities, with the children's counts drawn
/// by sequential binomials and the last child taking the remainder.
pub fn generate_model(tree: &PopTree, prior: Prior) -> Result<JagsModelText, JagsError> {
    for node in tree.nodes() {
        let label = tree.label(node);
        if !is_identifier(label) {
            return Err(JagsError::InvalidLabel {
                label: label.to_owned(),
            });
        }
        if let [only] = tree.children(node) {
            return Err(JagsError::SingleChild {
                parent: label.to_owned(),
                child: tree.label(*only).to_owned(),
            });
        }
    }
    let names = Names::new(tree);
    names.check_unique()?;

    let mut data = String::from("data { \n");
    for parent in tree.parents() {
        let x = tree.label(parent);
        let params: Vec<String> = (1..=tree.children(parent).len()).map(|k| format!("p{x}{k}")).collect();
        writeln!(data, "\tp{x}.params <- c({}); ", params.join(", ")).unwrap();
    }
    data.push_str("} \n");

    let root = tree.root_label();
    let mut model = String::from("model { \n");
    match prior {
        Prior::Lognormal => writeln!(model, "\t{root}.cont ~ dlnorm(mu, tau); ").unwrap(),
        Prior::Uniform => writeln!(model, "\t{root}.cont ~ dunif(Lz, Uz); ").unwrap(),
    }
    writeln!(model, "\t{root} <- round({root}.cont); ").unwrap();
    for parent in tree.parents() {
        let x = tree.label(parent);
        let t = names.tuple(parent);
        let r = names.reference(parent);
        let n = tree.children(parent).len();
        if n == 2 {
            writeln!(model, "\tp{x} ~ dbeta(p{x}.params[1], p{x}.params[2]); ").unwrap();
            writeln!(model, "\t{t}[1] ~ dbinom(p{x}, {r}); ").unwrap();
            writeln!(model, "\t{t}[2] <- {r} - {t}[1]; ").unwrap();
        } else {
            writeln!(model, "\tp{x} ~ ddirch(p{x}.params); ").unwrap();
            writeln!(model, "\t{x}.bin[1] <- {r}; ").unwrap();
            writeln!(model, "\tp{x}.bin[1] <- p{x}[1]; ").unwrap();
            writeln!(model, "\tfor (i in 2:{n}){{ ").unwrap();
            writeln!(model, "\t\t{x}.bin[i] <- {x}.bin[i-1] - {t}[i-1] ").unwrap();
            writeln!(model, "\t\tp{x}.bin[i] <- p{x}[i]/(sum(p{x}[i:{n}])) ").unwrap();
            model.push_str("\t} \n");
            writeln!(model, "\tfor (i in 1:{}){{ ", n - 1).unwrap();
            writeln!(model, "\t\t{t}[i] ~ dbinom(p{x}.bin[i], {x}.bin[i]) ").unwrap();
            model.push_str("\t} \n");
            writeln!(model, "\t{t}[{n}] <- {x}.bin[1] - sum({t}[1:{}]); ", n - 1).unwrap();
        }
        model.push_str(BLANK);
    }
    model.push_str("} \n");

    let full_text = format!("{PREAMBLE}{BLANK}{data}{BLANK}{model}");
    Ok(JagsModelText {
        preamble: PREAMBLE.to_owned(),
        data_chunk: data,
        model_chunk: model,
        full_text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{build_tree, EdgeRecord};

    fn tree(edges: &[(&str, &str)]) -> PopTree {
        let records: Vec<EdgeRecord> = edges.iter().map(|(f, t)| EdgeRecord::new(*f, *t)).collect();
        build_tree(&records).unwrap()
    }

    #[test]
    fn tuple_names() {
        assert_eq!(sibling_tuple_name(&["A", "B", "C"]), "ABC");
        assert_eq!(sibling_tuple_name(&["D", "E"]), "DE");
        assert_eq!(sibling_tuple_name(&["A"]), "A");
    }

    #[test]
    fn binary_tree() {
        let text = generate_model(&tree(&[("Z", "A"), ("Z", "B")]), Prior::Lognormal).unwrap();
        assert_eq!(text.data_chunk, "data { \n\tpZ.params <- c(pZ1, pZ2); \n} \n");
        assert!(text.model_chunk.contains("\tAB[1] ~ dbinom(pZ, Z); \n"));
        assert!(text.model_chunk.contains("\tAB[2] <- Z - AB[1]; \n"));
    }

    #[test]
    fn uniform_prior_changes_only_the_root_line() {
        let t = tree(&[("Z", "A"), ("Z", "B"), ("A", "C"), ("A", "D"), ("A", "E")]);
        let ln = generate_model(&t, Prior::Lognormal).unwrap().full_text;
        let un = generate_model(&t, Prior::Uniform).unwrap().full_text;
        let diff: Vec<(&str, &str)> = ln.lines().zip(un.lines()).filter(|(a, b)| a != b).collect();
        assert_eq!(diff, vec![("\tZ.cont ~ dlnorm(mu, tau); ", "\tZ.cont ~ dunif(Lz, Uz); ")]);
        assert!(un.contains("\tA.bin[1] <- AB[1]; \n"));
    }

    #[test]
    fn rejects_bad_labels() {
        for bad in ["1A", "A_B", "A B", ".A"] {
            let err = generate_model(&tree(&[("Z", bad), ("Z", "B")]), Prior::Lognormal).unwrap_err();
            assert_eq!(err, JagsError::InvalidLabel { label: bad.to_owned() });
        }
        assert!(generate_model(&tree(&[("Z", "A.1"), ("Z", "B")]), Prior::Lognormal).is_ok());
    }

    #[test]
    fn rejects_single_child() {
        let err = generate_model(&tree(&[("Z", "A"), ("Z", "B"), ("A", "C")]), Prior::Lognormal).unwrap_err();
        assert!(matches!(err, JagsError::SingleChild { ref parent, .. } if parent == "A"));
    }

    #[test]
    fn rejects_colliding_names() {
        // Children (A, BC) of Z and (AB, C) of A both yield the tuple ABC.
        let t = tree(&[("Z", "A"), ("Z", "BC"), ("A", "AB"), ("A", "C")]);
        assert!(matches!(
            generate_model(&t, Prior::Lognormal),
            Err(JagsError::NameCollision { ref name, .. }) if name == "ABC"
        ));
        // The tuple of Z's children (p, A) is also A's branch-probability name.
        let t = tree(&[("Z", "p"), ("Z", "A"), ("A", "C"), ("A", "D")]);
        assert!(matches!(
            generate_model(&t, Prior::Lognormal),
            Err(JagsError::NameCollision { ref name, .. }) if name == "pA"
        ));
        let t = tree(&[("Z", "m"), ("Z", "u")]);
        assert!(matches!(
            generate_model(&t, Prior::Lognormal),
            Err(JagsError::NameCollision { ref name, .. }) if name == "mu"
        ));
    }
}
