//! Worked examples, checked against direct computations.

use std::f64::consts::{E, PI};

use anonq::amplify::phase_angles;
use anonq::election::{
    h1_success, prepare, qle, qle_upper_bound, success_probability, H1Algorithm,
};
use anonq::ghz::{cat_state, ghz_share, phase1, phase2};
use anonq::postelect::{recognize_graph, spanning_tree};
use anonq::qsim::{Mode, SparseState};
use anonq::runtime::{run_classical, verify_anonymity, GlobalInfo};
use anonq::subroutines::{flags, FkViews, H0Flooding};
use anonq::topology::{automorphisms, catalog, Automorphism, CatalogGraph, Topology};

fn graph(f: CatalogGraph, n: usize) -> Topology {
    catalog(f, n).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for at in 0..n {
            let mut q = p.clone();
            q.insert(at, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn c4_automorphisms_match_brute_force() {
    let g = graph(CatalogGraph::Ring, 4);
    let expected: Vec<Vec<usize>> = permutations(4)
        .into_iter()
        .filter(|perm| {
            (0..4).all(|v| {
                (1..=g.degree(v)).all(|p| {
                    let a = g.link(v, p).unwrap();
                    let b = g.link(perm[v], p).unwrap();
                    b.neighbor == perm[a.neighbor] && b.remote_port == a.remote_port
                })
            })
        })
        .collect();
    let mut found: Vec<Vec<usize>> = automorphisms(&g)
        .unwrap()
        .iter()
        .map(|a| a.as_slice().to_vec())
        .collect();
    found.sort();
    let mut expected = expected;
    expected.sort();
    assert_eq!(found, expected);
    assert!(found.len() >= 2);
    assert_eq!(
        automorphisms(&graph(CatalogGraph::Complete, 2))
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn flooding_counts() {
    let c4 = graph(CatalogGraph::Ring, 4);
    let exec = run_classical(
        &c4,
        &H0Flooding::new(4),
        &vec![vec![0]; 4],
        &GlobalInfo { n: 4 },
    )
    .unwrap();
    assert_eq!((exec.cost.rounds, exec.cost.qubits_sent), (4, 32));
    let p5 = graph(CatalogGraph::Path, 5);
    let x: Vec<Vec<u32>> = [1, 0, 0, 0, 0].iter().map(|&b| vec![b]).collect();
    let exec = run_classical(&p5, &H0Flooding::new(4), &x, &GlobalInfo { n: 5 }).unwrap();
    assert_eq!(exec.outputs, vec![flags::FALSE; 5]);
    assert_eq!(exec.cost.rounds, 4);
    let rotation = Automorphism::new(&c4, vec![1, 2, 3, 0]).unwrap();
    let x: Vec<Vec<u32>> = [1, 0, 0, 0].iter().map(|&b| vec![b]).collect();
    assert!(verify_anonymity(
        &c4,
        &H0Flooding::new(4),
        &x,
        &GlobalInfo { n: 4 },
        &rotation
    )
    .unwrap());
}

#[test]
fn fk_on_c4_agrees_with_the_sum() {
    let c4 = graph(CatalogGraph::Ring, 4);
    let x: Vec<Vec<u32>> = [1, 1, 0, 0].iter().map(|&b| vec![b]).collect();
    let exec = run_classical(&c4, &FkViews::new(2), &x, &GlobalInfo { n: 4 }).unwrap();
    assert_eq!(exec.outputs, vec![0; 4]);
}

#[test]
fn success_probabilities_and_angles() {
    assert!((success_probability(2).unwrap() - 0.5).abs() < 1e-15);
    assert!((h1_success(2).unwrap() - 0.5).abs() < 1e-15);
    assert!((success_probability(3).unwrap() - 4.0 / 9.0).abs() < 1e-15);
    for n in 2..=64 {
        assert!(success_probability(n).unwrap() > 1.0 / E);
    }
    let half = phase_angles(0.5).unwrap();
    assert!((half.theta - PI / 2.0).abs() < 1e-12 && (half.phi - PI / 2.0).abs() < 1e-12);
    let one = phase_angles(1.0).unwrap();
    assert!((one.theta - PI / 3.0).abs() < 1e-12);
}

#[test]
fn h1_examples_on_c3_and_c4() {
    let c3 = graph(CatalogGraph::Ring, 3);
    let alg = H1Algorithm::known(3);
    assert_eq!(alg.evaluate(&c3, &[1, 0, 0]).unwrap().value, flags::TRUE);
    assert_eq!(alg.evaluate(&c3, &[1, 1, 0]).unwrap().value, flags::FALSE);
    let c4 = graph(CatalogGraph::Ring, 4);
    assert_eq!(
        H1Algorithm::known(4).evaluate(&c4, &[0; 4]).unwrap().value,
        flags::FALSE
    );
}

#[test]
fn elections_on_small_graphs() {
    let k2 = graph(CatalogGraph::Complete, 2);
    let p = prepare(&k2, 2).unwrap();
    let h = 0.5f64.sqrt();
    assert!((p.state.amplitude(&[0, 1]).norm() - h).abs() < 1e-12);
    assert!((p.state.amplitude(&[1, 0]).norm() - h).abs() < 1e-12);

    let c3 = graph(CatalogGraph::Ring, 3);
    let r = qle(&c3, 3, Mode::AllBranches).unwrap();
    assert_eq!(r.branches.len(), 3);
    for q in r.leader_distribution(3) {
        assert!((q - 1.0 / 3.0).abs() < 1e-10);
    }

    let c5 = graph(CatalogGraph::Ring, 5);
    let p = prepare(&c5, 5).unwrap();
    for (basis, _) in p.state.amplitudes() {
        assert_eq!(basis.iter().filter(|&&b| b == 1).count(), 1);
    }
}

#[test]
fn upper_bound_examples() {
    let k2 = graph(CatalogGraph::Complete, 2);
    assert!(qle_upper_bound(&k2, 3, Mode::AllBranches)
        .unwrap()
        .is_exact());
    let c3 = graph(CatalogGraph::Ring, 3);
    let r = qle_upper_bound(&c3, 3, Mode::AllBranches).unwrap();
    assert!(r.is_exact());
    assert!((r.total_probability() - 1.0).abs() < 1e-9);
    for f in [
        CatalogGraph::Ring,
        CatalogGraph::Path,
        CatalogGraph::Complete,
        CatalogGraph::Star,
    ] {
        for n in 2..=4 {
            let Ok(g) = catalog(f, n) else { continue };
            let bounded = qle_upper_bound(&g, n, Mode::AllBranches).unwrap();
            let known = qle(&g, n, Mode::AllBranches).unwrap();
            assert!(bounded.is_exact() && known.is_exact(), "{f}-{n}");
        }
    }
}

fn renamed(mut s: SparseState, to: &str) -> SparseState {
    s.rename_register("R", to).unwrap();
    s
}

#[test]
fn ghz_phase_examples() {
    let k3 = graph(CatalogGraph::Complete, 3);
    let (branches, _) = phase1(&k3, 3, 0).unwrap();
    let one = branches.iter().find(|b| b.s == 1).unwrap();
    let f = one
        .state
        .fidelity(&renamed(cat_state(3, 2, 3).unwrap(), "R0"))
        .unwrap();
    assert!((f - 1.0).abs() < 1e-9);

    let pair = renamed(cat_state(3, 1, 3).unwrap(), "R0")
        .tensor(&renamed(cat_state(3, 1, 3).unwrap(), "R1"))
        .unwrap();
    let outs = phase2(&pair, 3, "R0", "R1").unwrap();
    let target = renamed(cat_state(3, 0, 3).unwrap(), "R0");
    for (_, _, st) in &outs {
        assert!((st.fidelity(&target).unwrap() - 1.0).abs() < 1e-9);
    }

    let pair = renamed(cat_state(2, 1, 4).unwrap(), "R0")
        .tensor(&renamed(cat_state(2, 1, 4).unwrap(), "R1"))
        .unwrap();
    for (_, _, st) in phase2(&pair, 2, "R0", "R1").unwrap() {
        let h = 0.5f64.sqrt();
        assert!((st.amplitude(&[0; 4]).norm() - h).abs() < 1e-12);
        assert!((st.amplitude(&[1; 4]).norm() - h).abs() < 1e-12);
        let phase = st.amplitude(&[1; 4]) / st.amplitude(&[0; 4]);
        assert!((phase.re - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ghz_share_enumerates_every_combination() {
    let c3 = graph(CatalogGraph::Ring, 3);
    let r = ghz_share(&c3, 2, Mode::AllBranches).unwrap();
    let combos: std::collections::BTreeSet<Vec<u32>> =
        r.branches.iter().map(|b| b.s.clone()).collect();
    assert_eq!(combos.len(), 4);
    assert!(r.worst_fidelity().unwrap() > 1.0 - 1e-9);
    let r = ghz_share(&c3, 3, Mode::AllBranches).unwrap();
    let combos: std::collections::BTreeSet<Vec<u32>> =
        r.branches.iter().map(|b| b.s.clone()).collect();
    assert_eq!(combos.len(), 27);
    assert!(r.worst_fidelity().unwrap() > 1.0 - 1e-9);
    let (_, single) = phase1(&c3, 3, 0).unwrap();
    assert_eq!(r.cost.qubits_sent, 3 * single.qubits_sent);
    assert_eq!(r.cost.rounds, single.rounds);
}

#[test]
fn c4_recognition_is_circulant() {
    let c4 = graph(CatalogGraph::Ring, 4);
    let (tree, _) = spanning_tree(&c4, 0).unwrap();
    assert_eq!(tree.height(), 3);
    let r = recognize_graph(&c4, &tree).unwrap();
    for row in &r.adjacency {
        assert_eq!(row.iter().filter(|&&b| b).count(), 2);
    }
}
