use std::path::PathBuf;

use dpmnl::Error;
use dpmnl_bench::config::RunConfig;
use dpmnl_bench::experiment::{render_diagnostics, render_table, render_tsv, run_experiment};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn small_sim(reps: usize) -> RunConfig {
    RunConfig::parse(&format!(
        r#"
        [chain]
        n_iterations = 40
        burn_in = 10
        [sim]
        which = "sim1"
        n_total = 300
        n_train = 60
        [experiment]
        id = "sim1"
        repetitions = {reps}
        models = ["baseline", "mnl-ml", "mnl", "qmnl", "dpmnl"]
        "#
    ))
    .unwrap()
}

fn protein(id: &str, models: &str, tree: &str) -> RunConfig {
    RunConfig::parse(&format!(
        r#"
        [chain]
        n_iterations = 40
        burn_in = 10
        n_chains = 2
        [data]
        train = "{}"
        test = "{}"
        [hierarchy]
        path = "{}"
        [sources]
        train = ["{}"]
        test = ["{}"]
        [experiment]
        id = "{id}"
        repetitions = 1
        models = {models}
        "#,
        fixture("fold_train.csv"),
        fixture("fold_test.csv"),
        fixture(tree),
        fixture("ss_train.csv"),
        fixture("ss_test.csv"),
    ))
    .unwrap()
}

#[test]
fn single_repetition_has_no_spread_or_test() {
    let result = run_experiment(&small_sim(1)).unwrap();
    assert_eq!(result.rows.len(), 5);
    let tsv = render_tsv(&result).unwrap();
    for line in tsv.lines().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 7);
        assert_eq!(fields[2], "", "{line}");
        assert_eq!(fields[4], "", "{line}");
        assert_eq!(fields[6], "", "{line}");
    }
    assert!(result.max_normalisation_error < 1e-10);
}

#[test]
fn repeated_runs_give_identical_tables() {
    let cfg = small_sim(2);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(render_table(&a).unwrap(), render_table(&b).unwrap());
    assert_eq!(render_tsv(&a).unwrap(), render_tsv(&b).unwrap());
    assert_eq!(render_diagnostics(&a), render_diagnostics(&b));
    let table = render_table(&a).unwrap();
    assert!(table.contains("qMNL") && table.contains("MNL (ML)"));
    // The mixture model is the reference, so it carries no p-value itself.
    let tsv = render_tsv(&a).unwrap();
    let dp = tsv.lines().find(|l| l.starts_with("dpMNL")).unwrap();
    assert!(dp.ends_with('\t'));
    let mnl = tsv.lines().find(|l| l.starts_with("MNL\t")).unwrap();
    assert!(!mnl.ends_with('\t'));
}

#[test]
fn flat_tree_cormnl_reproduces_mnl() {
    let result = run_experiment(&protein("protein-hier", r#"["dpmnl", "dpcormnl"]"#, "flat_tree.tsv")).unwrap();
    let dp = result.row("dpMNL").unwrap();
    let cor = result.row("dpCorMNL").unwrap();
    assert_eq!(dp.metrics, cor.metrics);
    let diag: Vec<_> = result.diagnostics.iter().map(|d| &d.chain_mean_log_lik).collect();
    assert_eq!(diag[0], diag[1]);
}

#[test]
fn hierarchy_reports_parent_accuracy() {
    let result = run_experiment(&protein("protein-hier", r#"["baseline", "cormnl"]"#, "fold_tree.tsv")).unwrap();
    for row in &result.rows {
        assert!(row.metrics[0].parent_accuracy.is_some());
    }
    assert!(render_table(&result).unwrap().contains("parent(%)"));
}

#[test]
fn multisource_adds_blocks_cumulatively() {
    let result = run_experiment(&protein("protein-multisource", r#"["mnl", "dpmnl"]"#, "fold_tree.tsv")).unwrap();
    let labels: Vec<&str> = result.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(
        labels,
        ["MNL [1 source]", "dpMNL [1 source]", "MNL [2 sources]", "dpMNL [2 sources]"]
    );
}

#[test]
fn missing_protein_files_are_reported() {
    let cfg = RunConfig::parse("[experiment]\nid = \"protein\"\n").unwrap();
    assert!(matches!(run_experiment(&cfg), Err(Error::MissingInput(_))));
}

#[test]
fn protein_defaults_follow_the_four_chain_protocol() {
    let cfg = RunConfig::parse("[experiment]\nid = \"protein\"\n").unwrap();
    let chain = cfg.chain();
    assert_eq!((chain.n_chains, chain.n_iterations, chain.burn_in), (4, 10_000, 1000));
    assert!(cfg.prior().ard);
    let sim = RunConfig::parse("").unwrap();
    assert!(!sim.prior().ard);
    assert_eq!(sim.chain().n_iterations, 2000);
}
