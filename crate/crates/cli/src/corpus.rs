//! Built-in scenario corpus, embedded at compile time.

/// `(name, scenario text)` pairs, sorted by name.
pub const CORPUS: &[(&str, &str)] = &[
    (
        "example1_consensus",
        include_str!("../corpus/example1_consensus.scn"),
    ),
    (
        "example1_estimator",
        include_str!("../corpus/example1_estimator.scn"),
    ),
    (
        "example1_impulsive",
        include_str!("../corpus/example1_impulsive.scn"),
    ),
    (
        "example2_theta_sweep",
        include_str!("../corpus/example2_theta_sweep.scn"),
    ),
    (
        "example3_epsilon0_sweep",
        include_str!("../corpus/example3_epsilon0_sweep.scn"),
    ),
    (
        "example4_counterexample",
        include_str!("../corpus/example4_counterexample.scn"),
    ),
];

/// Scenarios matching `name`: an exact match wins, otherwise every corpus
/// entry with `name` as a prefix (so `example1` runs all three example1
/// scenarios).
pub fn find(name: &str) -> Vec<(&'static str, &'static str)> {
    if let Some(hit) = CORPUS.iter().find(|(n, _)| *n == name) {
        return vec![*hit];
    }
    CORPUS
        .iter()
        .filter(|(n, _)| n.starts_with(name))
        .copied()
        .collect()
}
