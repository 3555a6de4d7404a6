mod oracles;

#[test]
fn ppr_kernel_matches_truncated_series() {
    let gap = oracles::ppr_series_gap(50, 20, 11);
    assert!(gap <= 1e-8, "gap {gap:e}");
}

#[test]
fn heat_kernel_matches_eigendecomposition() {
    let gap = oracles::heat_eigen_gap(50, 20, 12);
    assert!(gap <= 1e-8, "gap {gap:e}");
}

#[test]
fn heat_columns_sum_to_one() {
    let gap = oracles::heat_column_sum_gap(50, 20, 13);
    assert!(gap <= 1e-8, "gap {gap:e}");
}

#[test]
fn ppr_rows_sum_to_one_on_regular_graphs() {
    let gap = oracles::ppr_regular_row_sum_gap(50, 20, 14);
    assert!(gap <= 1e-8, "gap {gap:e}");
}
