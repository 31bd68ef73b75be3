use qdag_core::compiler::compile_named;
use qdag_core::reducer::apply_rule;
use qdag_core::testing::{all_evidence, chain3, chain4, fork, pair};
use qdag_core::voi::value_of_information;
use qdag_core::{reduce_fixpoint, EvalState, Evidence, Node, QDag, RewriteRule};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

fn eval(dag: &QDag, settings: &[(&str, &str)]) -> qdag_core::Output {
    let mut e = Evidence::unknown(dag);
    for (v, x) in settings {
        e.assign(dag, v, x).unwrap();
    }
    dag.evaluate(&e)
}

#[test]
fn fork_evaluations() {
    let dag = compile_named(&fork(), &["B"], &["C"]).unwrap();
    let on = eval(&dag, &[("C", "ON")]);
    assert!(close(on.get("B", "ON").unwrap(), 0.3475));
    assert!(close(on.get("B", "OFF").unwrap(), 0.2725));
    let off = eval(&dag, &[("C", "OFF")]);
    assert!(close(off.get("B", "ON").unwrap(), 0.2875));
    assert!(close(off.get("B", "OFF").unwrap(), 0.0925));
    let none = eval(&dag, &[("C", "?")]);
    assert!(close(none.get("B", "ON").unwrap(), 0.635));
    assert!(close(none.get("B", "OFF").unwrap(), 0.365));

    let normalizer: f64 = on.distribution("B").iter().map(|(_, p)| p).sum();
    assert!(close(normalizer, 0.62));
    let cond = on.conditional("B").unwrap();
    assert!(close(cond[0].1, 0.3475 / 0.62));
}

#[test]
fn fork_dag_shape() {
    let dag = compile_named(&fork(), &["B"], &["C"]).unwrap();
    let stats = dag.stats();
    assert_eq!(stats.esns, 2);
    assert_eq!(stats.numeric, 9);
    // reduction folds Pr(a)Pr(b|a) into single numbers
    let (reduced, _) = reduce_fixpoint(&dag);
    assert!(reduced.nodes().contains(&Node::Num(0.3 * 0.25)));
    for e in all_evidence(&dag) {
        let (a, b) = (dag.evaluate(&e), reduced.evaluate(&e));
        for (x, y) in a.entries.iter().zip(&b.entries) {
            assert!((x.probability - y.probability).abs() <= 1e-12 * x.probability.abs());
        }
    }
}

#[test]
fn query_and_evidence_overlap() {
    let dag = compile_named(&pair(), &["A", "B"], &["B"]).unwrap();
    let none = eval(&dag, &[]);
    assert!(close(none.get("A", "true").unwrap(), 0.3));
    assert!(close(none.get("A", "false").unwrap(), 0.7));
    assert!(close(none.get("B", "true").unwrap(), 0.59));
    assert!(close(none.get("B", "false").unwrap(), 0.41));
    let observed = eval(&dag, &[("B", "false")]);
    assert!(close(observed.get("A", "true").unwrap(), 0.27));
    assert!(close(observed.get("A", "false").unwrap(), 0.14));
    assert_eq!(observed.get("B", "true").unwrap(), 0.0);

    let v = value_of_information(&dag, &Evidence::unknown(&dag), "B", &[2.5, -3.0]).unwrap();
    assert!(close(v, 2.5 * 0.59 - 3.0 * 0.41));
}

#[test]
fn pruning_is_subsumed_by_reduction() {
    let net = chain3();
    let unpruned = compile_named(&net, &["A"], &["B"]).unwrap();
    let pruned_net = net.prune_named(&["A"], &["B"]).unwrap();
    assert_eq!(pruned_net.len(), 2);
    let pruned = compile_named(&pruned_net, &["A"], &["B"]).unwrap();
    let (reduced, _) = reduce_fixpoint(&unpruned);
    assert!(unpruned.len() > pruned.len());
    assert_eq!(reduced.len(), pruned.collect_garbage().len());
    for e in all_evidence(&unpruned) {
        assert_eq!(reduced.evaluate(&e), pruned.evaluate(&e));
    }
}

#[test]
fn sums_of_a_full_row_collapse_to_one() {
    // Σ_c Pr(c|b) folds to 1 and then vanishes
    let net = chain3();
    let dag = compile_named(&net, &["A"], &["B"]).unwrap();
    let (folded, n) = apply_rule(&dag, RewriteRule::NumericReduction);
    assert!(n > 0);
    assert!(folded.nodes().contains(&Node::Num(1.0)));
    let (clean, _) = apply_rule(&folded, RewriteRule::IdentityElimination);
    assert!(!clean.nodes().contains(&Node::Num(1.0)));
}

fn evidence_free_subdags_are_numbers(dag: &QDag) -> bool {
    let mut has_esn = vec![false; dag.len()];
    for (i, node) in dag.nodes().iter().enumerate() {
        has_esn[i] = match node {
            Node::Esn { .. } => true,
            Node::Num(_) => false,
            _ => node.operands().iter().any(|o| has_esn[o.0]),
        };
        if node.is_op() && !has_esn[i] {
            return false;
        }
    }
    true
}

fn descendants_of(dag: &QDag, var: &str) -> usize {
    let var = dag.evidence_var(var).unwrap();
    let mut hit = vec![false; dag.len()];
    let mut ops = 0;
    for (i, node) in dag.nodes().iter().enumerate() {
        hit[i] = match node {
            Node::Esn { var: v, .. } => *v == var,
            Node::Num(_) => false,
            _ => node.operands().iter().any(|o| hit[o.0]),
        };
        if hit[i] && node.is_op() {
            ops += 1;
        }
    }
    ops
}

#[test]
fn caching_is_subsumed_by_reduction() {
    // in the three-chain λ_B enters every cluster potential, so the property
    // holds before reduction; the four-chain has Σ_a Pr(a)Pr(b|a) to fold
    for (net, query, evidence, trivial) in [(chain3(), "C", "B", true), (chain4(), "D", "C", false)]
    {
        let dag = compile_named(&net, &[query], &[evidence]).unwrap();
        let (reduced, _) = reduce_fixpoint(&dag);
        assert!(evidence_free_subdags_are_numbers(&reduced));
        assert_eq!(evidence_free_subdags_are_numbers(&dag), trivial);

        let budget = descendants_of(&reduced, evidence);
        let mut state = EvalState::new(&reduced, Evidence::unknown(&reduced));
        let values = reduced.evidence_vars()[0].values.clone();
        for token in values.iter().map(String::as_str).chain(["?"]) {
            let (out, recomputed) = state.update(evidence, token).unwrap();
            assert!(recomputed <= budget, "{recomputed} > {budget}");
            assert_eq!(out, eval(&reduced, &[(evidence, token)]));
        }
    }
}
