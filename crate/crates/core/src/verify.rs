//! Verification suites, one per acceptance criterion. Each suite runs a set
//! of named checks against brute-force oracles or exact identities.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::amplify::{phase_angles, two_level_model};
use crate::election::{prepare, qle, qle_upper_bound, H1Algorithm};
use crate::error::{Error, Result};
use crate::ghz::{
    allowed_gates, cat_mixing_fidelity, cat_preparation, cat_state, ghz_share, phase1,
};
use crate::postelect::{
    compute_function, compute_with_leader, gather_scatter_state, recognize_graph, spanning_tree,
    Builtin,
};
use crate::qsim::{Gate, Mode, RegisterSpec, SparseState};
use crate::runtime::{run_classical, verify_anonymity, CostReport, GlobalInfo};
use crate::subroutines::{flags, ConsistencyCheck, FkViews, H0Flooding};
use crate::topology::{automorphisms, catalog, CatalogGraph, Topology};

/// Largest `rounds(QLE) / n` allowed on rings: `2Δ` for the two H0 runs plus
/// `2 · 12Δ` for the two H1 runs, with `Δ = n`.
pub const ROUND_RATIO_BOUND: f64 = 26.0;
/// Largest `qubits(QLE) / (m n²)` allowed on rings. An H0 run sends `2mn`
/// qubits and an H1 run `2(2mn + 16mn(n - 1))`, so the ratio stays below 64.
pub const QUBIT_RATIO_BOUND: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Qle,
    Angles,
    H1,
    Costs,
    Scaling,
    UpperBound,
    CatMixing,
    Ghz,
    Anonymity,
    Postelect,
    Oracles,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Qle,
        Suite::Angles,
        Suite::H1,
        Suite::Costs,
        Suite::Scaling,
        Suite::UpperBound,
        Suite::CatMixing,
        Suite::Ghz,
        Suite::Anonymity,
        Suite::Postelect,
        Suite::Oracles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Qle => "qle",
            Suite::Angles => "angles",
            Suite::H1 => "h1",
            Suite::Costs => "costs",
            Suite::Scaling => "scaling",
            Suite::UpperBound => "upper-bound",
            Suite::CatMixing => "lemma-a",
            Suite::Ghz => "ghz",
            Suite::Anonymity => "anonymity",
            Suite::Postelect => "postelect",
            Suite::Oracles => "oracles",
        }
    }

    /// Acceptance criterion number.
    pub fn criterion(self) -> usize {
        Suite::ALL.iter().position(|&s| s == self).expect("listed") + 1
    }

    pub fn title(self) -> &'static str {
        match self {
            Suite::Qle => "exact leader election on catalog graphs, n = 2..5",
            Suite::Angles => "phase angles leave no bad amplitude",
            Suite::H1 => "H1 exact on all classical inputs and on superposition",
            Suite::Costs => "cost identities for QLE, C_S and H0",
            Suite::Scaling => "QLE cost ratios bounded on rings n = 3..6",
            Suite::UpperBound => "upper-bound election is exact",
            Suite::CatMixing => "W_k on cat states gives the constrained uniform state",
            Suite::Ghz => "GHZ sharing ends in cat(k, 0) in every branch",
            Suite::Anonymity => "equivariance under automorphisms of C4 and K3",
            Suite::Postelect => "recognition, functions and state sharing after election",
            Suite::Oracles => "subroutines agree with brute-force oracles",
        }
    }

    pub fn run(self) -> SuiteReport {
        let start = Instant::now();
        let checks = match self {
            Suite::Qle => suite_qle(),
            Suite::Angles => suite_angles(),
            Suite::H1 => suite_h1(),
            Suite::Costs => suite_costs(),
            Suite::Scaling => suite_scaling(),
            Suite::UpperBound => suite_upper_bound(),
            Suite::CatMixing => suite_cat_mixing(),
            Suite::Ghz => suite_ghz(),
            Suite::Anonymity => suite_anonymity(),
            Suite::Postelect => suite_postelect(),
            Suite::Oracles => suite_oracles(),
        };
        SuiteReport {
            suite: self,
            criterion: self.criterion(),
            passed: checks.iter().all(|c| c.passed),
            checks,
            seconds: start.elapsed().as_secs_f64(),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::OutOfRange(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub criterion: usize,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// `PASS [n] name: title (checks, time)`, plus the first failure.
    pub fn summary_line(&self) -> String {
        let mut line = format!(
            "{} [{}] {}: {} ({} checks, {:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.suite,
            self.suite.title(),
            self.checks.len(),
            self.seconds,
        );
        if let Some(f) = self.failures().next() {
            line.push_str(&format!(" first failure: {} ({})", f.name, f.detail));
        }
        line
    }
}

fn check<F>(name: impl Into<String>, f: F) -> Check
where
    F: FnOnce() -> Result<(bool, String)>,
{
    let name = name.into();
    match f() {
        Ok((passed, detail)) => Check {
            name,
            passed,
            detail,
        },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Catalog graphs of the given families and sizes, labeled `family-n`;
/// sizes a family does not support are skipped.
pub fn catalog_graphs(
    families: &[CatalogGraph],
    sizes: RangeInclusive<usize>,
) -> Vec<(String, Topology)> {
    let mut out = Vec::new();
    for &f in families {
        for n in sizes.clone() {
            if let Ok(g) = catalog(f, n) {
                out.push((format!("{f}-{n}"), g));
            }
        }
    }
    out
}

/// Every vector in `{0..k}^n`, in lexicographic order.
pub fn all_inputs(k: u32, n: usize) -> Vec<Vec<u32>> {
    let total = (k as usize).pow(n as u32);
    (0..total)
        .map(|mut i| {
            let mut x = vec![0; n];
            for d in x.iter_mut().rev() {
                *d = (i % k as usize) as u32;
                i /= k as usize;
            }
            x
        })
        .collect()
}

const BASIC: [CatalogGraph; 4] = [
    CatalogGraph::Ring,
    CatalogGraph::Path,
    CatalogGraph::Complete,
    CatalogGraph::Star,
];

fn suite_qle() -> Vec<Check> {
    catalog_graphs(&BASIC, 2..=5)
        .into_iter()
        .map(|(label, g)| {
            check(label, || {
                let r = qle(&g, g.n(), Mode::AllBranches)?;
                let total = r.total_probability();
                Ok((
                    r.is_exact() && (total - 1.0).abs() < 1e-9,
                    format!(
                        "{} branches, total probability {total:.17}",
                        r.branches.len()
                    ),
                ))
            })
        })
        .collect()
}

/// Bad amplitude after one `Q` in the plane spanned by the good and bad
/// parts of `A|0⟩`: `Q = -(I + (e^{iφ} - 1)|ψ⟩⟨ψ|) F_χ(θ)`.
fn plane_bad_amplitude(a: f64, theta: f64, phi: f64) -> f64 {
    let psi = [
        Complex64::new(a.sqrt(), 0.0),
        Complex64::new((1.0 - a).sqrt(), 0.0),
    ];
    let after_chi = [psi[0] * Complex64::from_polar(1.0, theta), psi[1]];
    let overlap = psi[0].conj() * after_chi[0] + psi[1].conj() * after_chi[1];
    let bad = -(after_chi[1] + (Complex64::from_polar(1.0, phi) - 1.0) * overlap * psi[1]);
    bad.norm()
}

fn suite_angles() -> Vec<Check> {
    let mut grid = vec![0.26];
    grid.extend((0..=70).map(|i| 0.30 + 0.01 * i as f64));
    let mut checks: Vec<Check> = grid
        .into_iter()
        .map(|a| {
            check(format!("a = {a:.2}"), || {
                let p = phase_angles(a)?;
                let independent = plane_bad_amplitude(a, p.theta, p.phi);
                let model = two_level_model(a, p.theta, p.phi).1.norm();
                Ok((
                    independent < 1e-10 && model < 1e-10,
                    format!("bad amplitude {independent:.3e} / {model:.3e}"),
                ))
            })
        })
        .collect();
    checks.push(check("a = 1/4 gives θ = π", || {
        let p = phase_angles(0.25)?;
        let bad = plane_bad_amplitude(0.25, p.theta, p.phi);
        Ok((
            (p.theta - std::f64::consts::PI).abs() < 1e-12 && bad < 1e-10,
            format!("θ = {:.17}, bad {bad:.3e}", p.theta),
        ))
    }));
    checks
}

fn unique_one(x: &[u32]) -> u32 {
    if x.iter().filter(|&&b| b == 1).count() == 1 {
        flags::TRUE
    } else {
        flags::FALSE
    }
}

fn h1_on_superposition(g: &Topology, alg: &H1Algorithm) -> Result<(bool, String)> {
    let n = g.n();
    let mut state = SparseState::new(n);
    state.add_register_all("X", 2, 0)?;
    state.add_register_all("Y", 2, flags::TRUE)?;
    state.apply_all_parties("X", &Gate::hadamard())?;
    alg.run_joint(g, &mut state, "X", "Y")?;
    let registers = state.layout().len() == 2 * n;
    let weight = 1.0 / (1u64 << n) as f64;
    let mut worst = 0.0f64;
    let mut correct = state.len() == 1 << n;
    for (basis, amp) in state.amplitudes() {
        let x = state.values(basis, "X")?;
        let y = state.values(basis, "Y")?;
        correct &= y.iter().all(|&v| v == unique_one(&x));
        worst = worst.max((amp.norm_sqr() - weight).abs());
    }
    Ok((
        registers && correct && worst < 1e-10,
        format!("{} components, worst weight error {worst:.3e}", state.len()),
    ))
}

fn suite_h1() -> Vec<Check> {
    let mut checks = Vec::new();
    for (label, g) in catalog_graphs(&CatalogGraph::ALL, 1..=4) {
        let alg = H1Algorithm::known(g.n());
        checks.push(check(format!("{label} all inputs"), || {
            let mut worst = 0.0f64;
            let mut wrong = Vec::new();
            for x in all_inputs(2, g.n()) {
                let run = alg.evaluate(&g, &x)?;
                worst = worst.max(run.off_target);
                if run.value != unique_one(&x) {
                    wrong.push(x);
                }
            }
            Ok((
                wrong.is_empty() && worst < 1e-10,
                format!("wrong on {wrong:?}, worst off-target {worst:.3e}"),
            ))
        }));
        checks.push(check(format!("{label} uniform superposition"), || {
            h1_on_superposition(&g, &alg)
        }));
    }
    checks
}

fn same_totals(a: &CostReport, b: &CostReport) -> bool {
    a.rounds == b.rounds && a.qubits_sent == b.qubits_sent && a.bits_sent == b.bits_sent
}

fn cost_text(c: &CostReport) -> String {
    format!(
        "{} rounds, {} qubits, {} bits",
        c.rounds, c.qubits_sent, c.bits_sent
    )
}

/// One row of the cost table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub graph: String,
    pub n: usize,
    pub m: usize,
    pub h0: CostReport,
    pub h1: CostReport,
    pub qle: CostReport,
    /// `cost(QLE) = 2 cost(H0) + 2 cost(H1)`.
    pub identity_holds: bool,
    pub rounds_per_n: f64,
    pub qubits_per_mn2: f64,
}

pub fn cost_row(label: &str, g: &Topology) -> Result<CostRow> {
    let n = g.n();
    let p = prepare(g, n)?;
    let expected = p.h0_cost.times(2).then(&p.h1_cost.times(2));
    let strip = |c: &CostReport| CostReport {
        per_round: Vec::new(),
        ..c.clone()
    };
    Ok(CostRow {
        graph: label.to_string(),
        n,
        m: g.m(),
        identity_holds: same_totals(&p.cost, &expected),
        rounds_per_n: p.cost.rounds as f64 / n as f64,
        qubits_per_mn2: p.cost.qubits_sent as f64 / (g.m() * n * n) as f64,
        h0: strip(&p.h0_cost),
        h1: strip(&p.h1_cost),
        qle: strip(&p.cost),
    })
}

fn suite_costs() -> Vec<Check> {
    let mut graphs = catalog_graphs(&BASIC, 2..=5);
    graphs.extend(catalog_graphs(&[CatalogGraph::Torus2d], 4..=4));
    let mut checks = Vec::new();
    for (label, g) in graphs {
        let n = g.n();
        let global = GlobalInfo { n };
        checks.push(check(format!("{label} QLE = 2 H0 + 2 H1"), || {
            let row = cost_row(&label, &g)?;
            Ok((
                row.identity_holds,
                format!(
                    "QLE {}; H0 {}; H1 {}",
                    cost_text(&row.qle),
                    cost_text(&row.h0),
                    cost_text(&row.h1)
                ),
            ))
        }));
        checks.push(check(format!("{label} C_S = 2 H0"), || {
            let h0 = run_classical(&g, &H0Flooding::new(n), &vec![vec![0]; n], &global)?.cost;
            let cs = run_classical(
                &g,
                &ConsistencyCheck::new(H0Flooding::new(n)),
                &vec![vec![0, 0]; n],
                &global,
            )?
            .cost;
            let ok = cs.rounds == h0.rounds
                && cs.qubits_sent == 2 * h0.qubits_sent
                && cs.bits_sent == 2 * h0.bits_sent;
            Ok((ok, format!("C_S {}; H0 {}", cost_text(&cs), cost_text(&h0))))
        }));
        checks.push(check(
            format!("{label} H0 sends 2mn qudits in n rounds"),
            || {
                let h0 = run_classical(&g, &H0Flooding::new(n), &vec![vec![0]; n], &global)?.cost;
                Ok((
                    h0.rounds == n && h0.qubits_sent == 2 * g.m() * n,
                    cost_text(&h0),
                ))
            },
        ));
    }
    checks
}

pub fn ring_cost_table(sizes: RangeInclusive<usize>) -> Result<Vec<CostRow>> {
    sizes
        .map(|n| cost_row(&format!("ring-{n}"), &catalog(CatalogGraph::Ring, n)?))
        .collect()
}

fn suite_scaling() -> Vec<Check> {
    let rows = match ring_cost_table(3..=6) {
        Ok(rows) => rows,
        Err(e) => return vec![check("ring table", || Err(e))],
    };
    let mut checks: Vec<Check> = rows
        .iter()
        .map(|r| {
            check(r.graph.clone(), || {
                Ok((
                    r.rounds_per_n <= ROUND_RATIO_BOUND && r.qubits_per_mn2 <= QUBIT_RATIO_BOUND,
                    format!(
                        "rounds/n = {:.4}, qubits/(m n^2) = {:.4}",
                        r.rounds_per_n, r.qubits_per_mn2
                    ),
                ))
            })
        })
        .collect();
    checks.push(check("ratios are monotone", || {
        let mono = rows.windows(2).all(|w| {
            w[1].rounds_per_n >= w[0].rounds_per_n - 1e-12
                && w[1].qubits_per_mn2 >= w[0].qubits_per_mn2 - 1e-12
        });
        Ok((mono, "rows ordered by n".into()))
    }));
    checks
}

fn suite_upper_bound() -> Vec<Check> {
    let mut checks = Vec::new();
    for (label, g) in catalog_graphs(&BASIC, 2..=3) {
        for bound in g.n()..=4 {
            checks.push(check(format!("{label} N = {bound}"), || {
                let r = qle_upper_bound(&g, bound, Mode::AllBranches)?;
                let total = r.total_probability();
                Ok((
                    r.is_exact() && (total - 1.0).abs() < 1e-9,
                    format!(
                        "{} branches, total probability {total:.17}",
                        r.branches.len()
                    ),
                ))
            }));
        }
    }
    checks
}

fn suite_cat_mixing() -> Vec<Check> {
    let mut checks = Vec::new();
    for k in [2, 3, 5] {
        for t in 0..k {
            for n in 1..=4 {
                checks.push(check(format!("k = {k}, t = {t}, n = {n}"), || {
                    let f = cat_mixing_fidelity(k, t, n)?;
                    Ok(((f - 1.0).abs() < 1e-10, format!("fidelity {f:.17}")))
                }));
            }
        }
    }
    checks
}

fn suite_ghz() -> Vec<Check> {
    let mut checks = Vec::new();
    for k in [2, 3] {
        for (label, g) in catalog_graphs(&[CatalogGraph::Ring, CatalogGraph::Complete], 2..=4) {
            checks.push(check(format!("k = {k}, {label}"), || {
                let r = ghz_share(&g, k, Mode::AllBranches)?;
                let worst = r.worst_fidelity()?;
                let total = r.total_probability();
                let foreign = r.foreign_gates();
                Ok((
                    worst >= 1.0 - 1e-9 && (total - 1.0).abs() < 1e-9 && foreign.is_empty(),
                    format!(
                        "{} branches, worst fidelity {worst:.17}, foreign gates {foreign:?}",
                        r.branches.len()
                    ),
                ))
            }));
            checks.push(check(
                format!("k = {k}, {label} phase one is uniform"),
                || {
                    let (branches, _) = phase1(&g, k, 0)?;
                    let worst = branches
                        .iter()
                        .map(|b| (b.probability - 1.0 / k as f64).abs())
                        .fold(0.0, f64::max);
                    Ok((
                        branches.len() == k as usize && worst < 1e-10,
                        format!("{} outcomes, worst deviation {worst:.3e}", branches.len()),
                    ))
                },
            ));
        }
        checks.push(check(format!("k = {k} gate set"), || {
            Ok((
                allowed_gates(k).len() == 5,
                format!("{:?}", allowed_gates(k)),
            ))
        }));
    }
    checks
}

fn permuted_input(x: &[u32], perm: &[usize]) -> Vec<u32> {
    let mut y = x.to_vec();
    for (v, &b) in x.iter().enumerate() {
        y[perm[v]] = b;
    }
    y
}

fn suite_anonymity() -> Vec<Check> {
    let graphs = [
        ("C4", catalog(CatalogGraph::Ring, 4)),
        ("K3", catalog(CatalogGraph::Complete, 3)),
    ];
    let mut checks = Vec::new();
    for (label, g) in graphs {
        let g = match g {
            Ok(g) => g,
            Err(e) => {
                checks.push(check(label, || Err(e)));
                continue;
            }
        };
        let n = g.n();
        let global = GlobalInfo { n };
        let auts = match automorphisms(&g) {
            Ok(a) => a,
            Err(e) => {
                checks.push(check(label, || Err(e)));
                continue;
            }
        };
        checks.push(check(format!("{label} automorphism group"), || {
            Ok((auts.len() == n, format!("{} automorphisms", auts.len())))
        }));
        let bits = all_inputs(2, n);
        checks.push(check(format!("{label} H0"), || {
            for aut in &auts {
                for x in &bits {
                    let input: Vec<Vec<u32>> = x.iter().map(|&b| vec![b]).collect();
                    if !verify_anonymity(&g, &H0Flooding::new(n), &input, &global, aut)? {
                        return Ok((false, format!("{aut:?} on {x:?}")));
                    }
                }
            }
            Ok((
                true,
                format!("{} inputs x {} automorphisms", bits.len(), auts.len()),
            ))
        }));
        checks.push(check(format!("{label} C_S"), || {
            let cs = ConsistencyCheck::new(H0Flooding::new(n));
            for aut in &auts {
                for r in &bits {
                    for z in &bits {
                        let input: Vec<Vec<u32>> =
                            r.iter().zip(z).map(|(&a, &b)| vec![a, b]).collect();
                        if !verify_anonymity(&g, &cs, &input, &global, aut)? {
                            return Ok((false, format!("{aut:?} on r = {r:?}, z = {z:?}")));
                        }
                    }
                }
            }
            Ok((
                true,
                format!(
                    "{} inputs x {} automorphisms",
                    bits.len() * bits.len(),
                    auts.len()
                ),
            ))
        }));
        checks.push(check(format!("{label} H1"), || {
            let alg = H1Algorithm::known(n);
            let mut base = SparseState::new(n);
            base.add_register_all("X", 2, 0)?;
            base.add_register_all("Y", 2, flags::TRUE)?;
            base.apply_local(0, "X", &Gate::hadamard())?;
            base.apply_local(1, "X", &Gate::pauli_x())?;
            let mut worst = 0.0f64;
            for aut in &auts {
                for x in &bits {
                    let a = alg.evaluate(&g, x)?;
                    let b = alg.evaluate(&g, &permuted_input(x, aut.as_slice()))?;
                    if a.value != b.value || a.cost != b.cost {
                        return Ok((false, format!("{aut:?} on {x:?}")));
                    }
                }
                let mut direct = base.clone();
                alg.run_joint(&g, &mut direct, "X", "Y")?;
                let mut moved = base.permute_parties(aut.as_slice())?;
                alg.run_joint(&g, &mut moved, "X", "Y")?;
                worst = worst.max(direct.permute_parties(aut.as_slice())?.distance(&moved)?);
            }
            Ok((
                worst < 1e-10,
                format!("worst joint-state distance {worst:.3e}"),
            ))
        }));
        checks.push(check(format!("{label} QLE"), || {
            let p = prepare(&g, n)?;
            let r = qle(&g, n, Mode::AllBranches)?;
            let dist: BTreeMap<Vec<u32>, f64> = r
                .branches
                .iter()
                .map(|b| (b.outcomes.clone(), b.probability))
                .collect();
            let mut worst = 0.0f64;
            for aut in &auts {
                worst = worst.max(
                    p.state
                        .permute_parties(aut.as_slice())?
                        .distance(&p.state)?,
                );
                for (x, q) in &dist {
                    let image = dist
                        .get(&permuted_input(x, aut.as_slice()))
                        .copied()
                        .unwrap_or(0.0);
                    worst = worst.max((q - image).abs());
                }
            }
            Ok((worst < 1e-10, format!("worst deviation {worst:.3e}")))
        }));
        for k in [2, 3] {
            checks.push(check(format!("{label} GHZ k = {k}"), || {
                let inputs = all_inputs(k, n);
                for aut in &auts {
                    for x in &inputs {
                        let input: Vec<Vec<u32>> = x.iter().map(|&b| vec![b]).collect();
                        if !verify_anonymity(&g, &FkViews::new(k), &input, &global, aut)? {
                            return Ok((false, format!("F_{k} {aut:?} on {x:?}")));
                        }
                    }
                }
                let r = ghz_share(&g, k, Mode::AllBranches)?;
                let mut worst = 0.0f64;
                for aut in &auts {
                    for b in &r.branches {
                        worst = worst.max(
                            1.0 - b
                                .state
                                .permute_parties(aut.as_slice())?
                                .fidelity(&b.state)?,
                        );
                    }
                }
                Ok((
                    worst < 1e-10,
                    format!(
                        "{} branches, worst infidelity {worst:.3e}",
                        r.branches.len()
                    ),
                ))
            }));
        }
    }
    checks
}

fn suite_postelect() -> Vec<Check> {
    let mut checks = Vec::new();
    for (label, g) in catalog_graphs(&CatalogGraph::ALL, 1..=6) {
        checks.push(check(format!("{label} recognition"), || {
            let n = g.n();
            for leader in [0, n - 1] {
                let (tree, tree_cost) = spanning_tree(&g, leader)?;
                let r = recognize_graph(&g, &tree)?;
                for u in 0..n {
                    for v in 0..n {
                        if r.adjacency[tree.ids[u] as usize - 1][tree.ids[v] as usize - 1]
                            != g.adjacent(u, v)
                        {
                            return Ok((false, format!("leader {leader}: entry ({u}, {v})")));
                        }
                    }
                }
                if tree_cost.rounds > 5 * n || r.cost.rounds > 2 * n + 1 {
                    return Ok((
                        false,
                        format!(
                            "tree {}, recognition {}",
                            cost_text(&tree_cost),
                            cost_text(&r.cost)
                        ),
                    ));
                }
            }
            Ok((true, "IDs give an isomorphism".into()))
        }));
    }
    for (label, g) in catalog_graphs(&CatalogGraph::ALL, 1..=4) {
        checks.push(check(format!("{label} functions"), || {
            let n = g.n();
            let elected =
                compute_function(&g, &vec![0; n], |a, x| Builtin::Majority.eval(a, x), 1)?;
            let truth = g.adjacency_matrix();
            let mut runs = 0;
            for f in Builtin::ALL {
                for x in all_inputs(2, n) {
                    let r = compute_with_leader(&g, elected.leader, &x, 2, |a, y| f.eval(a, y))?;
                    let expected = f.eval(&truth, &x);
                    if r.values.iter().any(|&v| v != expected) {
                        return Ok((false, format!("{f} on {x:?}: {:?} vs {expected}", r.values)));
                    }
                    runs += 1;
                }
            }
            Ok((true, format!("{runs} runs, leader {}", elected.leader)))
        }));
    }
    for k in [2, 3] {
        for (label, g) in catalog_graphs(&BASIC, 1..=4) {
            checks.push(check(format!("{label} cat sharing k = {k}"), || {
                let n = g.n();
                let (tree, _) = spanning_tree(&g, 0)?;
                let layout = (0..n).map(|v| RegisterSpec::new(v, "Q", k)).collect();
                let xi = SparseState::init(n, layout)?;
                let (mut out, cost) =
                    gather_scatter_state(&g, &tree, &xi, &cat_preparation(k, n)?)?;
                out.rename_register("Q", "R")?;
                let f = out.fidelity(&cat_state(k, 0, n)?)?;
                let hops: usize = tree.depth.iter().sum();
                Ok((
                    (f - 1.0).abs() < 1e-9 && cost.qubits_sent == 2 * hops,
                    format!("fidelity {f:.17}, {}", cost_text(&cost)),
                ))
            }));
        }
    }
    checks
}

fn consistent(r: &[u32], z: &[u32]) -> u32 {
    let marked: Vec<u32> = r
        .iter()
        .zip(z)
        .filter(|(_, &m)| m == flags::MARKED)
        .map(|(&b, _)| b)
        .collect();
    if marked.windows(2).all(|w| w[0] == w[1]) {
        flags::CONSISTENT
    } else {
        flags::INCONSISTENT
    }
}

fn suite_oracles() -> Vec<Check> {
    let mut checks = Vec::new();
    for (label, g) in catalog_graphs(&CatalogGraph::ALL, 1..=5) {
        let n = g.n();
        let global = GlobalInfo { n };
        let bits = all_inputs(2, n);
        checks.push(check(format!("{label} H0"), || {
            for x in &bits {
                let input: Vec<Vec<u32>> = x.iter().map(|&b| vec![b]).collect();
                let out = run_classical(&g, &H0Flooding::new(n), &input, &global)?.outputs;
                let expected = if x.iter().all(|&b| b == 0) {
                    flags::TRUE
                } else {
                    flags::FALSE
                };
                if out.iter().any(|&o| o != expected) {
                    return Ok((false, format!("{x:?} gave {out:?}")));
                }
            }
            Ok((true, format!("{} inputs", bits.len())))
        }));
        checks.push(check(format!("{label} C_S"), || {
            let cs = ConsistencyCheck::new(H0Flooding::new(n));
            for r in &bits {
                for z in &bits {
                    let input: Vec<Vec<u32>> = r.iter().zip(z).map(|(&a, &b)| vec![a, b]).collect();
                    let out = run_classical(&g, &cs, &input, &global)?.outputs;
                    let expected = consistent(r, z);
                    if out.iter().any(|&o| o != expected) {
                        return Ok((false, format!("r = {r:?}, z = {z:?} gave {out:?}")));
                    }
                }
            }
            Ok((true, format!("{} inputs", bits.len() * bits.len())))
        }));
        for k in [2, 3, 5] {
            checks.push(check(format!("{label} F_{k}"), || {
                let inputs = all_inputs(k, n);
                for x in &inputs {
                    let input: Vec<Vec<u32>> = x.iter().map(|&b| vec![b]).collect();
                    let out = run_classical(&g, &FkViews::new(k), &input, &global)?.outputs;
                    let expected = x.iter().sum::<u32>() % k;
                    if out.iter().any(|&o| o != expected) {
                        return Ok((false, format!("{x:?} gave {out:?}")));
                    }
                }
                Ok((true, format!("{} inputs", inputs.len())))
            }));
        }
    }
    checks
}
