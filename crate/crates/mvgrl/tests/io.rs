use std::fs;
use std::path::{Path, PathBuf};

use mvgrl::io::table::{contiguous_labels, read_embeddings, read_labels, read_matrix, write_embeddings, EmbeddingKind};
use mvgrl::io::{coo, load_dataset, load_node_bundle, load_tu_dataset, DatasetFormat, FormatError};
use mvgrl_core::graph::FeatureSource;
use mvgrl_core::{Matrix, SparseMatrix};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn write_tu(dir: &Path, a: &str, indicator: &str, labels: &str) {
    fs::write(dir.join("DS_A.txt"), a).unwrap();
    fs::write(dir.join("DS_graph_indicator.txt"), indicator).unwrap();
    fs::write(dir.join("DS_graph_labels.txt"), labels).unwrap();
}

#[test]
fn tu_fixture_golden() {
    let c = load_tu_dataset(&fixture("tu_toy")).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c.class_count(), 2);
    for g in c.graphs() {
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.num_edges(), 1);
        assert_eq!(g.adjacency().nnz(), 2);
        assert!(g.adjacency().is_symmetric());
        assert!(g.adjacency().diagonal().iter().all(|&d| d == 0.0));
    }
    // Raw labels [1, -1] remap in ascending order: -1 -> 0, 1 -> 1.
    assert_eq!(c.labels(), vec![1, 0]);
}

#[test]
fn tu_edgeless_single_graph() {
    let dir = tempfile::tempdir().unwrap();
    write_tu(dir.path(), "", "1\n", "3\n");
    let c = load_tu_dataset(dir.path()).unwrap();
    assert_eq!(c.len(), 1);
    assert_eq!(c.graphs()[0].num_nodes(), 1);
    assert_eq!(c.graphs()[0].num_edges(), 0);
    assert_eq!(c.labels(), vec![0]);
}

#[test]
fn tu_duplicates_collapse_and_crlf_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    write_tu(dir.path(), "1, 2\r\n1, 2\r\n2, 1\r\n2,3\r\n", "1\r\n1\r\n1\r\n", "0\r\n");
    let c = load_tu_dataset(dir.path()).unwrap();
    let g = &c.graphs()[0];
    assert_eq!(g.num_edges(), 2);
    assert_eq!(g.adjacency().nnz(), 4);
}

#[test]
fn tu_node_labels_attach_and_drive_features() {
    let dir = tempfile::tempdir().unwrap();
    write_tu(dir.path(), "1, 2\n3, 4\n", "1\n1\n2\n2\n", "0\n1\n");
    fs::write(dir.path().join("DS_node_labels.txt"), "5\n7\n7\n9\n").unwrap();
    let mut c = load_tu_dataset(dir.path()).unwrap();
    assert_eq!(c.graphs()[0].node_labels.as_deref(), Some(&[5, 7][..]));
    assert_eq!(c.graphs()[1].node_labels.as_deref(), Some(&[7, 9][..]));
    assert_eq!(c.init_features(400).unwrap(), FeatureSource::NodeLabels);
    assert_eq!(c.graphs()[0].features, Matrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]));
}

fn parse_error(e: FormatError) -> (PathBuf, u64) {
    match e {
        FormatError::Parse { path, line, .. } => (path, line),
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn tu_dangling_node_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    write_tu(dir.path(), "1, 2\n2, 5\n", "1\n1\n", "0\n");
    let err = load_tu_dataset(dir.path()).unwrap_err();
    let msg = err.to_string();
    let (path, line) = parse_error(err);
    assert!(path.ends_with("DS_A.txt"));
    assert_eq!(line, 2);
    assert!(msg.contains("DS_A.txt:2"), "{msg}");
}

#[test]
fn tu_non_contiguous_indicator() {
    let dir = tempfile::tempdir().unwrap();
    write_tu(dir.path(), "", "1\n1\n3\n", "0\n1\n");
    let (path, line) = parse_error(load_tu_dataset(dir.path()).unwrap_err());
    assert!(path.ends_with("DS_graph_indicator.txt"));
    assert_eq!(line, 3);
}

#[test]
fn tu_missing_mandatory_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("DS_A.txt"), "").unwrap();
    fs::write(dir.path().join("DS_graph_indicator.txt"), "1\n").unwrap();
    match load_tu_dataset(dir.path()).unwrap_err() {
        FormatError::Missing { path } => assert!(path.ends_with("DS_graph_labels.txt")),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn tu_cross_graph_edge_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_tu(dir.path(), "1, 3\n", "1\n1\n2\n", "0\n1\n");
    let (_, line) = parse_error(load_tu_dataset(dir.path()).unwrap_err());
    assert_eq!(line, 1);
}

#[test]
fn mutag_counts() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG");
    if !dir.is_dir() {
        eprintln!("MUTAG not present; skipping");
        return;
    }
    let c = load_tu_dataset(&dir).unwrap();
    assert_eq!(c.len(), 188);
    assert_eq!(c.class_count(), 2);
    let nodes: usize = c.graphs().iter().map(|g| g.num_nodes()).sum();
    assert_eq!(nodes, 3371);
    let edges: usize = c.graphs().iter().map(|g| g.num_edges()).sum();
    assert_eq!(edges, 3721);
    assert_eq!(c.labels().iter().filter(|&&l| l == 1).count(), 125);
}

#[test]
fn bundle_fixture_golden() {
    let g = load_node_bundle(&fixture("bundle_toy")).unwrap();
    assert_eq!(g.num_nodes(), 3);
    assert_eq!(g.adjacency().nnz(), 4);
    assert_eq!(g.num_edges(), 2);
    assert_eq!(g.features.shape(), (3, 2));
    assert_eq!(g.node_labels.as_deref(), Some(&[0, 1, 1][..]));
    let split = g.split.as_ref().unwrap();
    assert_eq!((split.train.as_slice(), split.val.as_slice(), split.test.as_slice()), (&[0][..], &[1][..], &[2][..]));
}

fn copy_bundle(dir: &Path) {
    for f in ["edges.tsv", "features.csv", "labels.csv", "train.txt", "val.txt", "test.txt"] {
        fs::copy(fixture("bundle_toy").join(f), dir.join(f)).unwrap();
    }
}

#[test]
fn bundle_overlapping_splits_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    fs::write(dir.path().join("test.txt"), "0\n2\n").unwrap();
    let err = load_node_bundle(dir.path()).unwrap_err();
    assert!(matches!(err, FormatError::Graph { .. }), "{err}");
    assert!(err.to_string().contains("train"), "{err}");
}

#[test]
fn bundle_label_count_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    fs::write(dir.path().join("labels.csv"), "0\n1\n").unwrap();
    assert!(matches!(load_node_bundle(dir.path()), Err(FormatError::Invalid { .. })));
}

#[test]
fn bundle_edge_out_of_range_names_line() {
    let dir = tempfile::tempdir().unwrap();
    copy_bundle(dir.path());
    fs::write(dir.path().join("edges.tsv"), "0\t1\n1\t3\n").unwrap();
    let (path, line) = parse_error(load_node_bundle(dir.path()).unwrap_err());
    assert!(path.ends_with("edges.tsv"));
    assert_eq!(line, 2);
}

#[test]
fn bundle_without_split_files() {
    let g = load_node_bundle(&fixture("path2")).unwrap();
    assert!(g.split.is_none());
}

#[test]
fn format_detection() {
    assert_eq!(DatasetFormat::detect(&fixture("tu_toy")).unwrap(), DatasetFormat::Tu);
    assert_eq!(DatasetFormat::detect(&fixture("bundle_toy")).unwrap(), DatasetFormat::Bundle);
    let missing = fixture("no_such_dataset");
    match load_dataset(&missing, None).unwrap_err() {
        FormatError::Missing { path } => assert_eq!(path, missing),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn embeddings_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.csv");
    let m = Matrix::from_rows(&[[0.1 + 0.2, -1e-300, 3.0], [f64::MIN_POSITIVE, 1.0 / 3.0, -0.0]]);
    write_embeddings(&path, EmbeddingKind::Graph, &m).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("graph,e0,e1,e2\n0,"));
    let (kind, back) = read_embeddings(&path).unwrap();
    assert_eq!(kind, EmbeddingKind::Graph);
    let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&m));
}

#[test]
fn labels_and_matrices_accept_headers() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.csv");
    fs::write(&labels, "id,label\n0,4\n1,-2\n2,4\n").unwrap();
    let raw = read_labels(&labels).unwrap();
    assert_eq!(raw, vec![4, -2, 4]);
    assert_eq!(contiguous_labels(&raw), (vec![1, 0, 1], 2));
    let m = dir.path().join("m.csv");
    fs::write(&m, "1,2\n3\n").unwrap();
    let (_, line) = parse_error(read_matrix(&m, true).unwrap_err());
    assert_eq!(line, 2);
}

#[test]
fn coo_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.coo.csv");
    let a = SparseMatrix::from_dense(&Matrix::from_rows(&[[0.5, 0.25], [0.0, 1.0]]));
    let b = SparseMatrix::identity(1);
    coo::write_coo(&path, &[a, b]).unwrap();
    let entries = coo::read_coo(&path).unwrap();
    assert_eq!(entries, vec![(0, 0, 0, 0.5), (0, 0, 1, 0.25), (0, 1, 1, 1.0), (1, 0, 0, 1.0)]);
}
