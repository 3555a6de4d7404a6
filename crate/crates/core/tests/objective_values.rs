mod oracles;

#[test]
fn estimator_closed_forms() {
    for (name, got, want) in oracles::closed_form_losses() {
        assert!((got - want).abs() <= 1e-9, "{name}: {got} vs {want}");
    }
}
