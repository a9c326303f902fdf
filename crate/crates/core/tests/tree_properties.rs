use proptest::prelude::*;
use wmmtree::tree::{build_tree, informative_leaves, parse_edge_table, path_to_leaf, EdgeRecord, PopTree};

/// Random tree shape as a parent index for every non-root node (parent < node).
fn shapes() -> impl Strategy<Value = Vec<usize>> {
    (1usize..30).prop_flat_map(|n| {
        (0..n)
            .map(|i| (0..=i).boxed())
            .collect::<Vec<_>>()
    })
}

fn records(parents: &[usize], informed: &[bool], counted: &[bool]) -> Vec<EdgeRecord> {
    (0..parents.len())
        .map(|i| {
            let mut r = EdgeRecord::new(format!("n{}", parents[i]), format!("n{}", i + 1));
            if informed[i] {
                r = r.survey(1, 4);
            }
            let is_leaf = !parents.contains(&(i + 1));
            if is_leaf && counted[i] {
                r = r.count(10);
            }
            r
        })
        .collect()
}

fn case() -> impl Strategy<Value = (Vec<usize>, Vec<bool>, Vec<bool>)> {
    shapes().prop_flat_map(|parents| {
        let n = parents.len();
        (
            Just(parents),
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(any::<bool>(), n),
        )
    })
}

fn labels(tree: &PopTree) -> Vec<String> {
    tree.informative_labels().into_iter().map(str::to_owned).collect()
}

proptest! {
    #[test]
    fn edges_are_nodes_minus_one((parents, informed, counted) in case()) {
        let tree = build_tree(&records(&parents, &informed, &counted)).unwrap();
        prop_assert_eq!(tree.edge_count(), tree.len() - 1);
        prop_assert_eq!(tree.root_label(), "n0");
    }

    #[test]
    fn informative_leaves_have_counts_and_informed_paths((parents, informed, counted) in case()) {
        let tree = build_tree(&records(&parents, &informed, &counted)).unwrap();
        prop_assert_eq!(informative_leaves(&tree), tree.informative_leaves().to_vec());
        for leaf in tree.leaves() {
            let path = path_to_leaf(&tree, tree.label(leaf)).unwrap();
            let expected = path.count.is_some()
                && path.nodes.iter().all(|&n| tree.evidence(n).is_informed());
            prop_assert_eq!(tree.informative_leaves().contains(&leaf), expected);
        }
    }

    #[test]
    fn adding_evidence_never_removes_informative_leaves(
        (parents, informed, counted) in case(),
        extra in 0usize..30,
    ) {
        let before = build_tree(&records(&parents, &informed, &counted)).unwrap();
        let mut more = informed.clone();
        let k = extra % more.len();
        more[k] = true;
        let after = build_tree(&records(&parents, &more, &counted)).unwrap();
        let after_labels = labels(&after);
        for leaf in labels(&before) {
            prop_assert!(after_labels.contains(&leaf));
        }
    }

    #[test]
    fn paths_chain_from_the_root((parents, informed, counted) in case()) {
        let tree = build_tree(&records(&parents, &informed, &counted)).unwrap();
        for leaf in tree.leaves() {
            let path = path_to_leaf(&tree, tree.label(leaf)).unwrap();
            prop_assert_eq!(path.edges.len(), tree.depth(leaf));
            prop_assert_eq!(path.edges[0].from.as_str(), "n0");
            prop_assert_eq!(path.edges.last().unwrap().to.as_str(), tree.label(leaf));
            for pair in path.edges.windows(2) {
                prop_assert_eq!(&pair[0].to, &pair[1].from);
            }
        }
    }

    #[test]
    fn breadth_first_ids_follow_depth((parents, informed, counted) in case()) {
        let tree = build_tree(&records(&parents, &informed, &counted)).unwrap();
        let depths: Vec<usize> = tree.nodes().map(|n| tree.depth(n)).collect();
        prop_assert!(depths.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn table_text_round_trips((parents, informed, counted) in case()) {
        let recs = records(&parents, &informed, &counted);
        let mut text = String::from("from,to,Estimate,Total,Count,Population,Description\n");
        for r in &recs {
            let opt = |v: Option<u64>| v.map_or("NA".to_owned(), |v| v.to_string());
            text.push_str(&format!(
                "{},{},{},{},{},FALSE,\n",
                r.from, r.to, opt(r.estimate), opt(r.total), opt(r.count)
            ));
        }
        let parsed = parse_edge_table(text.as_bytes()).unwrap();
        prop_assert_eq!(parsed.len(), recs.len());
        for (a, b) in parsed.iter().zip(&recs) {
            prop_assert_eq!((&a.from, &a.to, a.estimate, a.total, a.count), (&b.from, &b.to, b.estimate, b.total, b.count));
        }
    }
}

#[test]
fn example_fixture_parses() {
    let file = std::fs::File::open(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/example_tree.csv")).unwrap();
    let records = parse_edge_table(file).unwrap();
    assert_eq!(records.len(), 5);
    let counted: Vec<&str> = records.iter().filter(|r| r.count.is_some()).map(|r| r.to.as_str()).collect();
    assert_eq!(counted, ["B", "D"]);
    let tree = build_tree(&records).unwrap();
    assert_eq!(tree.informative_labels(), ["B", "D"]);
    let leaves: Vec<&str> = tree.leaves().map(|n| tree.label(n)).collect();
    assert_eq!(leaves, ["B", "C", "D", "E"]);
}
