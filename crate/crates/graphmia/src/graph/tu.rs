//! Benchmark file-format ingestion and re-serialization.
//!
//! The format is a directory of plain-text files sharing a name prefix:
//! `<name>_A.txt` (comma-separated 1-indexed global node-id pairs, one edge
//! per line), `<name>_graph_indicator.txt` (graph id of node `i` on line
//! `i`), `<name>_graph_labels.txt` (one label per graph), and optionally
//! `<name>_node_labels.txt` and `<name>_node_attributes.txt`.
//!
//! Edge lists in the wild list either both directions of each undirected
//! edge or only one; the parser symmetrizes and deduplicates, so both
//! variants load identically. Node labels are one-hot encoded and placed
//! before any continuous attributes; graphs without either file get a
//! constant feature of 1.0 per node. Graph labels are remapped to a dense
//! 0-based range.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, Graph, GraphError};

fn read_file(path: &Path, mandatory: bool) -> Result<Option<String>, GraphError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            if mandatory {
                Err(GraphError::MissingFile {
                    path: path.display().to_string(),
                })
            } else {
                Ok(None)
            }
        }
        Err(e) => Err(GraphError::Io {
            path: path.display().to_string(),
            source: e,
        }),
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Non-empty trimmed lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_int(token: &str, file: &str, line: usize) -> Result<i64, GraphError> {
    token.trim().parse().map_err(|_| GraphError::Parse {
        file: file.to_string(),
        line,
        message: format!("non-numeric token {token:?}, expected an integer"),
    })
}

fn parse_real(token: &str, file: &str, line: usize) -> Result<f64, GraphError> {
    token.trim().parse().map_err(|_| GraphError::Parse {
        file: file.to_string(),
        line,
        message: format!("non-numeric token {token:?}, expected a real number"),
    })
}

/// Parse a benchmark-format directory into a [`Dataset`].
///
/// `directory` must contain `<name>_A.txt`, `<name>_graph_indicator.txt`,
/// and `<name>_graph_labels.txt`. All parse failures are reported with file
/// name and line number.
pub fn parse_tu_dataset(directory: &Path, name: &str) -> Result<Dataset, GraphError> {
    let file = |suffix: &str| directory.join(format!("{name}_{suffix}.txt"));

    let indicator_path = file("graph_indicator");
    let indicator_name = file_name(&indicator_path);
    let indicator_text =
        read_file(&indicator_path, true)?.expect("mandatory file present when Ok");

    // graph id per node, in node order (node ids are 1-based line numbers)
    let mut node_graph: Vec<i64> = Vec::new();
    for (line, text) in content_lines(&indicator_text) {
        node_graph.push(parse_int(text, &indicator_name, line)?);
    }
    if node_graph.is_empty() {
        return Err(GraphError::Parse {
            file: indicator_name,
            line: 1,
            message: "indicator file contains no nodes".into(),
        });
    }

    let graph_ids: Vec<i64> = {
        let set: BTreeSet<i64> = node_graph.iter().copied().collect();
        set.into_iter().collect()
    };
    let graph_index = |id: i64| graph_ids.binary_search(&id).expect("id seen in indicator");
    let num_graphs = graph_ids.len();

    // map each global node id to (graph, local index)
    let mut node_local: Vec<(usize, usize)> = Vec::with_capacity(node_graph.len());
    let mut graph_sizes = vec![0usize; num_graphs];
    for &gid in &node_graph {
        let g = graph_index(gid);
        node_local.push((g, graph_sizes[g]));
        graph_sizes[g] += 1;
    }

    let labels_path = file("graph_labels");
    let labels_name = file_name(&labels_path);
    let labels_text = read_file(&labels_path, true)?.expect("mandatory file present when Ok");
    let mut raw_labels: Vec<i64> = Vec::new();
    for (line, text) in content_lines(&labels_text) {
        raw_labels.push(parse_int(text, &labels_name, line)?);
    }
    if raw_labels.len() != num_graphs {
        return Err(GraphError::Parse {
            file: labels_name,
            line: raw_labels.len().max(1),
            message: format!(
                "expected one label per graph ({num_graphs}), found {}",
                raw_labels.len()
            ),
        });
    }
    let label_values: Vec<i64> = {
        let set: BTreeSet<i64> = raw_labels.iter().copied().collect();
        set.into_iter().collect()
    };
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| label_values.binary_search(l).expect("label seen"))
        .collect();

    let edges_path = file("A");
    let edges_name = file_name(&edges_path);
    let edges_text = read_file(&edges_path, true)?.expect("mandatory file present when Ok");
    let mut graph_edges: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); num_graphs];
    for (line, text) in content_lines(&edges_text) {
        let mut parts = text.split(',');
        let (a, b) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(GraphError::Parse {
                    file: edges_name,
                    line,
                    message: format!("expected two comma-separated node ids, got {text:?}"),
                })
            }
        };
        let u = parse_int(a, &edges_name, line)?;
        let v = parse_int(b, &edges_name, line)?;
        let to_index = |id: i64| -> Result<usize, GraphError> {
            if id < 1 || id as usize > node_graph.len() {
                return Err(GraphError::Parse {
                    file: edges_name.clone(),
                    line,
                    message: format!(
                        "node id {id} out of range 1..={}",
                        node_graph.len()
                    ),
                });
            }
            Ok(id as usize - 1)
        };
        let (u, v) = (to_index(u)?, to_index(v)?);
        if u == v {
            continue; // explicit self-loops are dropped; normalization re-adds them
        }
        let (gu, lu) = node_local[u];
        let (gv, lv) = node_local[v];
        if gu != gv {
            return Err(GraphError::Parse {
                file: edges_name,
                line,
                message: format!(
                    "edge joins nodes of different graphs ({} and {})",
                    graph_ids[gu], graph_ids[gv]
                ),
            });
        }
        graph_edges[gu].insert((lu.min(lv), lu.max(lv)));
    }

    // optional node labels, one-hot encoded over the sorted distinct values
    let node_labels_path = file("node_labels");
    let node_labels_name = file_name(&node_labels_path);
    let node_labels: Option<Vec<i64>> = match read_file(&node_labels_path, false)? {
        Some(text) => {
            let mut vals = Vec::new();
            for (line, t) in content_lines(&text) {
                vals.push(parse_int(t, &node_labels_name, line)?);
            }
            if vals.len() != node_graph.len() {
                return Err(GraphError::Parse {
                    file: node_labels_name,
                    line: vals.len().max(1),
                    message: format!(
                        "expected one node label per node ({}), found {}",
                        node_graph.len(),
                        vals.len()
                    ),
                });
            }
            Some(vals)
        }
        None => None,
    };
    let node_label_values: Vec<i64> = node_labels
        .as_ref()
        .map(|v| v.iter().copied().collect::<BTreeSet<i64>>().into_iter().collect())
        .unwrap_or_default();

    let attrs_path = file("node_attributes");
    let attrs_name = file_name(&attrs_path);
    let node_attrs: Option<Vec<Vec<f64>>> = match read_file(&attrs_path, false)? {
        Some(text) => {
            let mut rows = Vec::new();
            let mut width: Option<usize> = None;
            for (line, t) in content_lines(&text) {
                let row: Vec<f64> = t
                    .split(',')
                    .map(|tok| parse_real(tok, &attrs_name, line))
                    .collect::<Result<_, _>>()?;
                match width {
                    None => width = Some(row.len()),
                    Some(w) if w != row.len() => {
                        return Err(GraphError::Parse {
                            file: attrs_name,
                            line,
                            message: format!("expected {w} attributes, found {}", row.len()),
                        })
                    }
                    _ => {}
                }
                rows.push(row);
            }
            if rows.len() != node_graph.len() {
                return Err(GraphError::Parse {
                    file: attrs_name,
                    line: rows.len().max(1),
                    message: format!(
                        "expected one attribute row per node ({}), found {}",
                        node_graph.len(),
                        rows.len()
                    ),
                });
            }
            Some(rows)
        }
        None => None,
    };

    let onehot_dim = node_label_values.len();
    let attr_dim = node_attrs.as_ref().map_or(0, |r| r[0].len());
    let feature_dim = if onehot_dim + attr_dim == 0 {
        1 // constant feature
    } else {
        onehot_dim + attr_dim
    };

    let mut features: Vec<Array2<f64>> = graph_sizes
        .iter()
        .map(|&n| Array2::zeros((n, feature_dim)))
        .collect();
    for (global, &(g, local)) in node_local.iter().enumerate() {
        let mut row = features[g].row_mut(local);
        if onehot_dim + attr_dim == 0 {
            row[0] = 1.0;
            continue;
        }
        if let Some(nl) = &node_labels {
            let slot = node_label_values
                .binary_search(&nl[global])
                .expect("value seen");
            row[slot] = 1.0;
        }
        if let Some(attrs) = &node_attrs {
            for (j, &a) in attrs[global].iter().enumerate() {
                row[onehot_dim + j] = a;
            }
        }
    }

    let mut graphs = Vec::with_capacity(num_graphs);
    for (g, feats) in features.into_iter().enumerate() {
        let edges: Vec<(usize, usize)> = graph_edges[g].iter().copied().collect();
        graphs.push(Graph::new(feats, edges, labels[g])?);
    }
    Dataset::new(name, graphs, label_values.len())
}

/// Serialize a dataset back into the benchmark format under `directory`.
///
/// Each undirected edge is written in both directions, matching the common
/// convention; [`parse_tu_dataset`] reads the result back identically.
pub fn write_tu_dataset(ds: &Dataset, directory: &Path, name: &str) -> Result<(), GraphError> {
    fs::create_dir_all(directory).map_err(|e| GraphError::Io {
        path: directory.display().to_string(),
        source: e,
    })?;

    let mut a = String::new();
    let mut indicator = String::new();
    let mut labels = String::new();
    let mut attrs = String::new();
    let mut base = 0usize; // 1-based global id of the first node of the current graph
    for (gi, g) in ds.graphs().iter().enumerate() {
        for &(u, v) in g.edges() {
            let (gu, gv) = (base + u + 1, base + v + 1);
            let _ = writeln!(a, "{gu}, {gv}");
            let _ = writeln!(a, "{gv}, {gu}");
        }
        for i in 0..g.num_nodes() {
            let _ = writeln!(indicator, "{}", gi + 1);
            let row = g.node_features().row(i);
            let rendered: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(attrs, "{}", rendered.join(", "));
        }
        let _ = writeln!(labels, "{}", g.label());
        base += g.num_nodes();
    }

    let write = |suffix: &str, body: &str| -> Result<(), GraphError> {
        let path = directory.join(format!("{name}_{suffix}.txt"));
        crate::io_util::write_atomic(&path, body.as_bytes()).map_err(|e| GraphError::Io {
            path: path.display().to_string(),
            source: e,
        })
    };
    write("A", &a)?;
    write("graph_indicator", &indicator)?;
    write("graph_labels", &labels)?;
    write("node_attributes", &attrs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    /// Two triangles and a 3-node path, edges listed in both directions,
    /// with node labels and graph labels -1/1.
    fn write_fixture(dir: &Path, name: &str) {
        let files = [
            (
                "A",
                "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n\
                 4, 5\n5, 4\n5, 6\n6, 5\n4, 6\n6, 4\n\
                 7, 8\n8, 7\n8, 9\n9, 8\n",
            ),
            ("graph_indicator", "1\n1\n1\n2\n2\n2\n3\n3\n3\n"),
            ("graph_labels", "-1\n-1\n1\n"),
            ("node_labels", "0\n0\n1\n0\n1\n1\n0\n0\n0\n"),
        ];
        for (suffix, body) in files {
            fs::write(dir.join(format!("{name}_{suffix}.txt")), body).unwrap();
        }
    }

    #[test]
    fn parses_hand_built_fixture() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "FIX");
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.num_classes(), 2);
        let edge_counts: Vec<usize> = ds.graphs().iter().map(Graph::num_edges).collect();
        assert_eq!(edge_counts, vec![3, 3, 2]);
        // labels -1/1 remapped to 0/1
        let labels: Vec<usize> = ds.graphs().iter().map(Graph::label).collect();
        assert_eq!(labels, vec![0, 0, 1]);
        // node labels {0,1} one-hot into two feature columns
        assert_eq!(ds.feature_dim(), 2);
        assert_eq!(ds.graphs()[0].node_features().row(2).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn one_directional_edge_lists_load_identically() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "FIX");
        let both = parse_tu_dataset(dir.path(), "FIX").unwrap();

        let dir2 = tempfile::tempdir().unwrap();
        write_fixture(dir2.path(), "FIX");
        fs::write(
            dir2.path().join("FIX_A.txt"),
            "1, 2\n2, 3\n1, 3\n4, 5\n5, 6\n4, 6\n7, 8\n8, 9\n",
        )
        .unwrap();
        let single = parse_tu_dataset(dir2.path(), "FIX").unwrap();
        assert_eq!(both, single);
    }

    #[test]
    fn missing_mandatory_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "FIX");
        fs::remove_file(dir.path().join("FIX_graph_labels.txt")).unwrap();
        let err = parse_tu_dataset(dir.path(), "FIX").unwrap_err();
        match err {
            GraphError::MissingFile { path } => assert!(path.contains("FIX_graph_labels.txt")),
            other => panic!("expected MissingFile, got {other:?}"),
        }
    }

    #[test]
    fn bad_node_id_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "FIX");
        fs::write(dir.path().join("FIX_A.txt"), "1, 2\n1, 99\n").unwrap();
        let err = parse_tu_dataset(dir.path(), "FIX").unwrap_err();
        match err {
            GraphError::Parse { file, line, .. } => {
                assert_eq!(file, "FIX_A.txt");
                assert_eq!(line, 2);
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_token_reports_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "FIX");
        fs::write(dir.path().join("FIX_graph_labels.txt"), "-1\nwat\n1\n").unwrap();
        let err = parse_tu_dataset(dir.path(), "FIX").unwrap_err();
        match err {
            GraphError::Parse { file, line, message } => {
                assert_eq!(file, "FIX_graph_labels.txt");
                assert_eq!(line, 2);
                assert!(message.contains("wat"));
            }
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn missing_feature_files_yield_constant_feature() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "FIX");
        fs::remove_file(dir.path().join("FIX_node_labels.txt")).unwrap();
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();
        assert_eq!(ds.feature_dim(), 1);
        for g in ds.graphs() {
            assert!(g.node_features().iter().all(|&x| x == 1.0));
        }
    }

    #[test]
    fn roundtrip_through_serialization() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), "FIX");
        let ds = parse_tu_dataset(dir.path(), "FIX").unwrap();

        let out = tempfile::tempdir().unwrap();
        write_tu_dataset(&ds, out.path(), "FIX").unwrap();
        let again = parse_tu_dataset(out.path(), "FIX").unwrap();
        assert_eq!(ds, again);
    }
}
