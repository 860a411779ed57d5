use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::h1::{H1Algorithm, H1Oracle, H1Table};
use crate::amplify::{
    exact_amplify, FlagOracle, LocalGate, PhaseSplit, Preparation, Reflection, SubroutineOracle,
};
use crate::error::{Error, Result};
use crate::qsim::{Gate, MeasurementBranch, Mode, SparseState};
use crate::runtime::{CostReport, GlobalInfo};
use crate::subroutines::{flags, H0Flooding};
use crate::topology::Topology;

/// `s(n) = (1 - 1/n)^(n-1)`, the chance that exactly one of n coins with
/// heads probability `1/n` shows heads.
pub fn success_probability(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("s(n) needs n >= 2, got {n}")));
    }
    Ok((1.0 - 1.0 / n as f64).powi(n as i32 - 1))
}

/// `A = (1/√n) [[√(n-1), 1], [1, -√(n-1)]]`.
pub fn a_gate(n: usize) -> Result<Gate> {
    if n < 1 {
        return Err(Error::OutOfRange("A needs n >= 1".into()));
    }
    let p = ((n - 1) as f64 / n as f64).sqrt();
    let q = (1.0 / n as f64).sqrt();
    Gate::real(format!("A{n}"), &[vec![p, q], vec![q, -p]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Eligible,
    Ineligible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionBranch {
    /// Measured `R` by party (for the deciding guess, under an upper bound).
    pub outcomes: Vec<u32>,
    pub probability: f64,
    pub leader_party: Option<usize>,
    pub leader_count: usize,
    pub status: Vec<Status>,
    /// The verified guess that decided this branch (upper-bound runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub guess: Option<usize>,
}

impl ElectionBranch {
    fn from_outcomes(outcomes: Vec<u32>, probability: f64, guess: Option<usize>) -> Self {
        let status: Vec<Status> = outcomes
            .iter()
            .map(|&r| {
                if r == 1 {
                    Status::Eligible
                } else {
                    Status::Ineligible
                }
            })
            .collect();
        let leaders: Vec<usize> = (0..outcomes.len()).filter(|&v| outcomes[v] == 1).collect();
        ElectionBranch {
            leader_party: if leaders.len() == 1 {
                Some(leaders[0])
            } else {
                None
            },
            leader_count: leaders.len(),
            outcomes,
            probability,
            status,
            guess,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectionResult {
    pub branches: Vec<ElectionBranch>,
    pub cost: CostReport,
}

impl ElectionResult {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    /// Exactly one leader in every branch.
    pub fn is_exact(&self) -> bool {
        self.branches.iter().all(|b| b.leader_count == 1)
    }

    /// Probability that party `v` is elected, by party.
    pub fn leader_distribution(&self, n: usize) -> Vec<f64> {
        let mut p = vec![0.0; n];
        for b in &self.branches {
            if let Some(v) = b.leader_party {
                p[v] += b.probability;
            }
        }
        p
    }

    fn single_party() -> Self {
        ElectionResult {
            branches: vec![ElectionBranch::from_outcomes(vec![1], 1.0, None)],
            cost: CostReport::zero(),
        }
    }
}

/// The state just before the final measurement, with the costs it took.
#[derive(Debug, Clone)]
pub struct PreparedElection {
    /// Register `R` at every party.
    pub state: SparseState,
    pub cost: CostReport,
    pub h0_cost: CostReport,
    pub h1_cost: CostReport,
}

/// Steps 1-3 of the election: prepare `A^{⊗n}|0⟩`, then one exact
/// amplification towards the weight-one strings.
pub fn prepare(topology: &Topology, n: usize) -> Result<PreparedElection> {
    let parties = topology.n();
    let a = success_probability(n)?;
    let global = GlobalInfo { n };
    let mut state = SparseState::new(parties);
    state.add_register_all("R", 2, 0)?;
    state.add_register_all("S", 2, flags::TRUE)?;
    state.add_register_all("Sp", 2, flags::TRUE)?;
    let prep = LocalGate::new("R", a_gate(n)?);
    prep.apply(&mut state)?;
    let table = H1Table::new(H1Algorithm::known(n), topology);
    let h1 = H1Oracle::new(&table, "R", "S");
    let h0 = SubroutineOracle::new(topology, H0Flooding::new(n), &["R"], "Sp", global);
    let chi = Reflection {
        oracle: &h1,
        trigger: flags::TRUE,
        split: PhaseSplit::Uniform(n),
    };
    let zero = Reflection {
        oracle: &h0,
        trigger: flags::TRUE,
        split: PhaseSplit::Uniform(n),
    };
    let cost = exact_amplify(&mut state, &prep, &chi, &zero, a, n == parties)?;
    state.release("Sp")?;
    state.release("S")?;
    let h1_cost = table.cost()?;
    let mut probe = SparseState::new(parties);
    probe.add_register_all("R", 2, 0)?;
    probe.add_register_all("Sp", 2, flags::TRUE)?;
    let h0_cost = h0.compute(&mut probe)?;
    Ok(PreparedElection {
        state,
        cost,
        h0_cost,
        h1_cost,
    })
}

/// Exact leader election with the party count `n` known to everyone.
pub fn qle(topology: &Topology, n: usize, mode: Mode) -> Result<ElectionResult> {
    if topology.n() == 1 {
        return Ok(ElectionResult::single_party());
    }
    let prepared = prepare(topology, n)?;
    let measured = match mode {
        Mode::AllBranches => prepared.state.branches(&["R"])?,
        Mode::Sample(seed) => vec![prepared.state.measure_seeded(&["R"], seed)?],
    };
    let branches = measured
        .into_iter()
        .map(|b| {
            let p = if matches!(mode, Mode::Sample(_)) {
                1.0
            } else {
                b.probability
            };
            ElectionBranch::from_outcomes(b.values("R"), p, None)
        })
        .collect();
    Ok(ElectionResult {
        branches,
        cost: prepared.cost,
    })
}

/// Measured `R`, whether the check verified it, and its probability.
type GuessOutcome = (Vec<u32>, bool, f64);

/// One guess `g` of an upper-bound run: amplification as if `n = g`, then an
/// H1 check of the result into `V{g}`.
fn guess_state(
    topology: &Topology,
    table: &H1Table,
    bound: usize,
    g: usize,
) -> Result<(SparseState, CostReport)> {
    let (r, s, sp, v) = (
        format!("R{g}"),
        format!("S{g}"),
        format!("Sp{g}"),
        format!("V{g}"),
    );
    let mut state = SparseState::new(topology.n());
    state.add_register_all(&r, 2, 0)?;
    state.add_register_all(&s, 2, flags::TRUE)?;
    state.add_register_all(&sp, 2, flags::TRUE)?;
    state.add_register_all(&v, 2, flags::TRUE)?;
    let prep = LocalGate::new(&r, a_gate(g)?);
    prep.apply(&mut state)?;
    let h1 = H1Oracle::new(table, &r, &s);
    let h0 = SubroutineOracle::new(
        topology,
        H0Flooding::new(bound),
        &[&r],
        &sp,
        GlobalInfo { n: bound },
    );
    let chi = Reflection {
        oracle: &h1,
        trigger: flags::TRUE,
        split: PhaseSplit::Uniform(g),
    };
    let zero = Reflection {
        oracle: &h0,
        trigger: flags::TRUE,
        split: PhaseSplit::Uniform(g),
    };
    let mut cost = exact_amplify(
        &mut state,
        &prep,
        &chi,
        &zero,
        success_probability(g)?,
        false,
    )?;
    state.release(&sp)?;
    state.release(&s)?;
    cost = cost.then(&H1Oracle::new(table, &r, &v).compute(&mut state)?);
    Ok((state, cost))
}

/// Leader election knowing only an upper bound `bound >= n`.
///
/// Guesses `g = 2..=bound` run side by side. Each branch is decided by the
/// smallest guess whose check reports a unique leader.
pub fn qle_upper_bound(topology: &Topology, bound: usize, mode: Mode) -> Result<ElectionResult> {
    if bound < 2 {
        return Err(Error::OutOfRange(format!(
            "upper bound must be at least 2, got {bound}"
        )));
    }
    if topology.n() > bound {
        return Err(Error::OutOfRange(format!(
            "upper bound {bound} is below n = {}",
            topology.n()
        )));
    }
    if topology.n() == 1 {
        return Ok(ElectionResult::single_party());
    }
    let table = H1Table::new(H1Algorithm::upper_bound(bound), topology);
    let mut rng = match mode {
        Mode::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Mode::AllBranches => None,
    };
    let mut cost = CostReport::zero();
    let mut per_guess: Vec<(usize, Vec<GuessOutcome>)> = Vec::new();
    for g in 2..=bound {
        let (state, c) = guess_state(topology, &table, bound, g)?;
        cost = cost.alongside(&c);
        let names = [format!("R{g}"), format!("V{g}")];
        let names = [names[0].as_str(), names[1].as_str()];
        let branches: Vec<MeasurementBranch> = match rng.as_mut() {
            Some(rng) => vec![state.measure(&names, rng)?],
            None => state.branches(&names)?,
        };
        let sample = rng.is_some();
        let outcomes = branches
            .into_iter()
            .map(|b| {
                let verified = b.values(names[1]).iter().all(|&f| f == flags::TRUE);
                (
                    b.values(names[0]),
                    verified,
                    if sample { 1.0 } else { b.probability },
                )
            })
            .collect();
        per_guess.push((g, outcomes));
    }
    let mut merged: BTreeMap<(Option<usize>, Vec<u32>), f64> = BTreeMap::new();
    let mut combo = vec![0usize; per_guess.len()];
    'outer: loop {
        let mut p = 1.0;
        let mut decided = None;
        for (i, &c) in combo.iter().enumerate() {
            let (g, list) = &per_guess[i];
            let (r, verified, q) = &list[c];
            p *= q;
            if decided.is_none() && *verified {
                decided = Some((*g, r.clone()));
            }
        }
        let key = match decided {
            Some((g, r)) => (Some(g), r),
            None => (None, vec![0; topology.n()]),
        };
        *merged.entry(key).or_default() += p;
        for i in (0..combo.len()).rev() {
            combo[i] += 1;
            if combo[i] < per_guess[i].1.len() {
                continue 'outer;
            }
            combo[i] = 0;
        }
        break;
    }
    let branches = merged
        .into_iter()
        .map(|((g, r), p)| ElectionBranch::from_outcomes(r, p, g))
        .collect();
    Ok(ElectionResult { branches, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{catalog, CatalogGraph};

    #[test]
    fn success_probabilities() {
        assert_eq!(success_probability(2).unwrap(), 0.5);
        assert!((success_probability(3).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        for n in 2..=64 {
            assert!(success_probability(n).unwrap() > (-1.0f64).exp());
        }
        assert!(success_probability(1).is_err());
    }

    #[test]
    fn k2_prepares_the_weight_one_superposition() {
        let g = catalog(CatalogGraph::Complete, 2).unwrap();
        let prepared = prepare(&g, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(prepared.state.len(), 2);
        for basis in [[0u8, 1], [1, 0]] {
            assert!((prepared.state.amplitude(&basis).norm() - h).abs() < 1e-12);
        }
        let r = qle(&g, 2, Mode::AllBranches).unwrap();
        assert!(r.is_exact());
        assert_eq!(r.branches.len(), 2);
    }

    #[test]
    fn c3_elects_each_party_with_one_third() {
        let g = catalog(CatalogGraph::Ring, 3).unwrap();
        let r = qle(&g, 3, Mode::AllBranches).unwrap();
        assert!(r.is_exact());
        for p in r.leader_distribution(3) {
            assert!((p - 1.0 / 3.0).abs() < 1e-10);
        }
        let cost = prepare(&g, 3).unwrap();
        assert_eq!(
            cost.cost.qubits_sent,
            2 * cost.h0_cost.qubits_sent + 2 * cost.h1_cost.qubits_sent
        );
    }

    #[test]
    fn sampling_is_reproducible() {
        let g = catalog(CatalogGraph::Complete, 2).unwrap();
        let a = qle(&g, 2, Mode::Sample(7)).unwrap();
        let b = qle(&g, 2, Mode::Sample(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.branches.len(), 1);
        assert!(a.is_exact());
    }

    #[test]
    fn upper_bound_on_k2() {
        let g = catalog(CatalogGraph::Complete, 2).unwrap();
        let r = qle_upper_bound(&g, 3, Mode::AllBranches).unwrap();
        assert!(r.is_exact(), "{:?}", r.branches);
        assert!((r.total_probability() - 1.0).abs() < 1e-9);
        assert!(qle_upper_bound(&g, 1, Mode::AllBranches).is_err());
    }

    #[test]
    fn single_party_short_circuit() {
        let g = crate::topology::Topology::build(1, &[], None).unwrap();
        let r = qle(&g, 1, Mode::AllBranches).unwrap();
        assert_eq!(r.branches[0].leader_party, Some(0));
        assert_eq!(r.cost.rounds, 0);
    }
}
