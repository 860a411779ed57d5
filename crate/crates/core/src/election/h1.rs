use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::amplify::FlagOracle;
use crate::amplify::{
    exact_amplify, exact_amplify_inverse, LocalGate, PhaseSplit, Preparation, Reflection,
    SubroutineOracle,
};
use crate::error::{Error, Result};
use crate::qsim::{BinaryOp, Gate, Pass, SparseState};
use crate::runtime::{CostReport, GlobalInfo};
use crate::subroutines::{flags, ConsistencyCheck, H0Flooding};
use crate::topology::Topology;

/// Probability that `t` marked parties holding uniform random bits are
/// inconsistent: `1 - 2 (1/2)^t`.
pub fn h1_success(t: usize) -> Result<f64> {
    if t < 2 {
        return Err(Error::OutOfRange(format!("a(t) needs t >= 2, got {t}")));
    }
    Ok(1.0 - 2.0 * 0.5f64.powi(t as i32))
}

/// Who applies the phase share inside a second-test bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BankSplit {
    /// All parties apply `angle / n`.
    PerParty,
    /// Marked parties of bank `t` apply `angle / t`; needs no knowledge of n.
    PerMarked,
}

/// The measurement-free H1 procedure: a first test for `|x| = 0` and
/// parallel second tests `t = 2..=t_max` for `|x| >= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct H1Algorithm {
    pub t_max: usize,
    pub global: GlobalInfo,
    pub split: BankSplit,
}

/// Outcome of running H1 on one classical input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Run {
    /// TRUE iff exactly one party holds 1.
    pub value: u32,
    /// Amplitude left on the other value of Y.
    pub off_target: f64,
    pub cost: CostReport,
}

fn bank_regs(t: usize) -> [String; 5] {
    [
        format!("Z{t}"),
        format!("R{t}"),
        format!("S{t}"),
        format!("Sp{t}"),
        format!("Spp{t}"),
    ]
}

impl H1Algorithm {
    pub fn known(n: usize) -> Self {
        H1Algorithm {
            t_max: n,
            global: GlobalInfo { n },
            split: BankSplit::PerParty,
        }
    }

    pub fn upper_bound(bound: usize) -> Self {
        H1Algorithm {
            t_max: bound,
            global: GlobalInfo { n: bound },
            split: BankSplit::PerMarked,
        }
    }

    fn h0(&self) -> H0Flooding {
        H0Flooding::new(self.global.n)
    }

    fn phase_split(&self, t: usize) -> PhaseSplit {
        match self.split {
            BankSplit::PerParty => PhaseSplit::Uniform(self.global.n),
            BankSplit::PerMarked => PhaseSplit::Marked {
                register: format!("Z{t}"),
                count: t,
            },
        }
    }

    fn first_test(
        &self,
        topology: &Topology,
        state: &mut SparseState,
        x: &str,
        pass: Pass,
    ) -> Result<CostReport> {
        let h0 = self.h0();
        match pass {
            Pass::Compute => {
                state.add_register_all("R0", 2, 0)?;
                state.add_register_all("S0", 2, flags::TRUE)?;
                state.local_binary_op_all(x, "R0", &BinaryOp::Xor)?;
                state.apply_subroutine(topology, &h0, &["R0"], "S0", &self.global, Pass::Compute)
            }
            Pass::Uncompute => {
                let cost = state.apply_subroutine(
                    topology,
                    &h0,
                    &["R0"],
                    "S0",
                    &self.global,
                    Pass::Uncompute,
                )?;
                state.local_binary_op_all(x, "R0", &BinaryOp::Xor)?;
                state.release("S0")?;
                state.release("R0")?;
                Ok(cost)
            }
        }
    }

    fn bank(
        &self,
        topology: &Topology,
        state: &mut SparseState,
        x: &str,
        t: usize,
        pass: Pass,
    ) -> Result<CostReport> {
        let [z, r, s, sp, spp] = bank_regs(t);
        let cs = SubroutineOracle::new(
            topology,
            ConsistencyCheck::new(self.h0()),
            &[&r, &z],
            &s,
            self.global,
        );
        let zero = SubroutineOracle::new(topology, self.h0(), &[&r], &sp, self.global);
        let chi = Reflection {
            oracle: &cs,
            trigger: flags::INCONSISTENT,
            split: self.phase_split(t),
        };
        let zero = Reflection {
            oracle: &zero,
            trigger: flags::TRUE,
            split: self.phase_split(t),
        };
        let prep = LocalGate::controlled(&r, Gate::hadamard(), &z, flags::MARKED);
        let last = SubroutineOracle::new(
            topology,
            ConsistencyCheck::new(self.h0()),
            &[&r, &z],
            &spp,
            self.global,
        );
        let a = h1_success(t)?;
        match pass {
            Pass::Compute => {
                state.add_register_all(&z, 2, flags::UNMARKED)?;
                state.add_register_all(&r, 2, 0)?;
                state.add_register_all(&s, 2, flags::CONSISTENT)?;
                state.add_register_all(&sp, 2, flags::TRUE)?;
                state.add_register_all(&spp, 2, flags::CONSISTENT)?;
                state.local_binary_op_all(x, &z, &BinaryOp::Xor)?;
                prep.apply(state)?;
                let amp = exact_amplify(state, &prep, &chi, &zero, a, false)?;
                Ok(amp.then(&last.compute(state)?))
            }
            Pass::Uncompute => {
                let mut cost = last.uncompute(state)?;
                cost = cost.then(&exact_amplify_inverse(state, &prep, &chi, &zero, a)?);
                prep.apply_inverse(state)?;
                state.local_binary_op_all(x, &z, &BinaryOp::Xor)?;
                for reg in [&spp, &sp, &s, &r, &z] {
                    state.release(reg)?;
                }
                Ok(cost)
            }
        }
    }

    /// Runs H1 on one classical input.
    ///
    /// H1 acts block-diagonally in `x`, and for fixed `x` the first test and
    /// every bank touch disjoint registers. Each is therefore simulated as
    /// its own state holding a copy of `x`; the flip of Y is decided from
    /// their flag distributions and must be deterministic. Every factor is
    /// then inverted and must return to its fiducial registers.
    pub fn evaluate(&self, topology: &Topology, x: &[u32]) -> Result<H1Run> {
        let n = topology.n();
        if x.len() != n {
            return Err(Error::InputLength {
                expected: n,
                got: x.len(),
            });
        }
        let fresh = || -> Result<SparseState> {
            let mut s = SparseState::new(n);
            s.add_register_all("X", 2, 0)?;
            for (v, &b) in x.iter().enumerate() {
                if b != 0 {
                    s.apply_local(v, "X", &Gate::pauli_x())?;
                }
            }
            Ok(s)
        };
        // (probability the factor asks for a flip, probability it does not)
        let mut votes = Vec::new();
        let mut first = fresh()?;
        let first_cost = self.first_test(topology, &mut first, "X", Pass::Compute)?;
        let s0 = first.position(0, "S0")?;
        votes.push((
            first.probability(|k| k[s0] as u32 == flags::TRUE),
            first.probability(|k| k[s0] as u32 == flags::FALSE),
        ));
        let mut banks = Vec::new();
        let mut bank_cost = CostReport::zero();
        for t in 2..=self.t_max {
            let mut bank = fresh()?;
            bank_cost =
                bank_cost.alongside(&self.bank(topology, &mut bank, "X", t, Pass::Compute)?);
            let at = bank.position(0, &format!("Spp{t}"))?;
            votes.push((
                bank.probability(|k| k[at] as u32 == flags::INCONSISTENT),
                bank.probability(|k| k[at] as u32 == flags::CONSISTENT),
            ));
            banks.push((t, bank));
        }
        let stay: f64 = votes.iter().map(|v| v.1).product();
        let flip = -votes
            .iter()
            .map(|v| (-v.0.min(1.0)).ln_1p())
            .sum::<f64>()
            .exp_m1();
        let flips = flip > stay;
        let off_target = if flips { stay } else { flip }.max(0.0).sqrt();
        if off_target > 1e-10 {
            return Err(Error::NotExact(format!(
                "H1 leaves amplitude {off_target:e} on the wrong Y value for x = {x:?}"
            )));
        }
        let mut inverse_cost = CostReport::zero();
        for (t, mut bank) in banks {
            inverse_cost =
                inverse_cost.alongside(&self.bank(topology, &mut bank, "X", t, Pass::Uncompute)?);
        }
        let first_inverse = self.first_test(topology, &mut first, "X", Pass::Uncompute)?;
        let cost = first_cost
            .then(&bank_cost)
            .then(&inverse_cost)
            .then(&first_inverse);
        Ok(H1Run {
            value: if flips { flags::FALSE } else { flags::TRUE },
            off_target,
            cost,
        })
    }

    /// Runs H1 on a joint state holding `x` and `y` at every party, with all
    /// ancillas in the same state and a party-local controlled flip of `y`.
    /// Fails if any ancilla is not restored.
    pub fn run_joint(
        &self,
        topology: &Topology,
        state: &mut SparseState,
        x: &str,
        y: &str,
    ) -> Result<CostReport> {
        let first = self.first_test(topology, state, x, Pass::Compute)?;
        let mut banks = CostReport::zero();
        for t in 2..=self.t_max {
            banks = banks.alongside(&self.bank(topology, state, x, t, Pass::Compute)?);
        }
        let n = state.parties();
        let ys = state.positions(y)?;
        let s0 = state.positions("S0")?;
        let spp: Vec<Vec<usize>> = (2..=self.t_max)
            .map(|t| state.positions(&format!("Spp{t}")))
            .collect::<Result<_>>()?;
        state.classical_map("flip Y", |k| {
            let mut k = k.to_vec();
            for v in 0..n {
                let zero = k[s0[v]] as u32 == flags::TRUE;
                let many = spp.iter().any(|p| k[p[v]] as u32 == flags::INCONSISTENT);
                if zero || many {
                    k[ys[v]] ^= 1;
                }
            }
            k
        })?;
        let mut inverse = CostReport::zero();
        for t in (2..=self.t_max).rev() {
            inverse = inverse.alongside(&self.bank(topology, state, x, t, Pass::Uncompute)?);
        }
        let first_inverse = self.first_test(topology, state, x, Pass::Uncompute)?;
        Ok(first.then(&banks).then(&inverse).then(&first_inverse))
    }
}

/// Memoized H1 results on one topology.
pub struct H1Table<'a> {
    pub algorithm: H1Algorithm,
    pub topology: &'a Topology,
    memo: RefCell<HashMap<Vec<u32>, H1Run>>,
}

impl<'a> H1Table<'a> {
    pub fn new(algorithm: H1Algorithm, topology: &'a Topology) -> Self {
        H1Table {
            algorithm,
            topology,
            memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn run(&self, x: &[u32]) -> Result<H1Run> {
        if let Some(r) = self.memo.borrow().get(x) {
            return Ok(r.clone());
        }
        let r = self.algorithm.evaluate(self.topology, x)?;
        self.memo.borrow_mut().insert(x.to_vec(), r.clone());
        Ok(r)
    }

    /// The (input-independent) cost of one run.
    pub fn cost(&self) -> Result<CostReport> {
        Ok(self.run(&vec![0; self.topology.n()])?.cost)
    }
}

/// H1 from register `input` into register `output`, as a flag oracle.
pub struct H1Oracle<'t, 'a> {
    pub table: &'t H1Table<'a>,
    pub input: String,
    pub output: String,
}

impl<'t, 'a> H1Oracle<'t, 'a> {
    pub fn new(table: &'t H1Table<'a>, input: &str, output: &str) -> Self {
        H1Oracle {
            table,
            input: input.into(),
            output: output.into(),
        }
    }

    fn pass(&self, state: &mut SparseState, pass: Pass) -> Result<CostReport> {
        let mut cost: Option<CostReport> = None;
        state.apply_function(&[&self.input], &self.output, pass, |inputs| {
            let x: Vec<u32> = inputs.iter().map(|v| v[0]).collect();
            let run = self.table.run(&x)?;
            match &cost {
                None => cost = Some(run.cost.clone()),
                Some(c) if *c != run.cost => return Err(Error::NotOblivious("h1".into())),
                Some(_) => {}
            }
            Ok(vec![run.value; x.len()])
        })?;
        cost.ok_or(Error::EmptyState)
    }
}

impl FlagOracle for H1Oracle<'_, '_> {
    fn flag_register(&self) -> &str {
        &self.output
    }

    fn compute(&self, state: &mut SparseState) -> Result<CostReport> {
        self.pass(state, Pass::Compute)
    }

    fn uncompute(&self, state: &mut SparseState) -> Result<CostReport> {
        self.pass(state, Pass::Uncompute)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::run_classical;
    use crate::topology::{catalog, CatalogGraph};

    fn value(graph: CatalogGraph, x: &[u32]) -> H1Run {
        let g = catalog(graph, x.len()).unwrap();
        H1Algorithm::known(x.len()).evaluate(&g, x).unwrap()
    }

    #[test]
    fn examples() {
        assert_eq!(value(CatalogGraph::Ring, &[1, 0, 0]).value, flags::TRUE);
        assert_eq!(value(CatalogGraph::Ring, &[1, 1, 0]).value, flags::FALSE);
        assert_eq!(value(CatalogGraph::Ring, &[0, 0, 0, 0]).value, flags::FALSE);
        assert_eq!(value(CatalogGraph::Ring, &[1, 1, 1]).value, flags::FALSE);
    }

    #[test]
    fn a_of_t() {
        assert_eq!(h1_success(2).unwrap(), 0.5);
        assert_eq!(h1_success(3).unwrap(), 0.75);
        assert!(h1_success(1).is_err());
    }

    #[test]
    fn cost_is_first_test_plus_banks_twice() {
        let n = 4;
        let g = catalog(CatalogGraph::Star, n).unwrap();
        let h0 = run_classical(
            &g,
            &H0Flooding::new(n),
            &vec![vec![0]; n],
            &GlobalInfo { n },
        )
        .unwrap()
        .cost;
        let run = value(CatalogGraph::Star, &[0, 1, 1, 0]);
        assert_eq!(
            run.cost.qubits_sent,
            2 * (h0.qubits_sent + (n - 1) * 8 * h0.qubits_sent)
        );
        assert_eq!(run.cost.rounds, 12 * n);
    }

    #[test]
    fn joint_run_on_uniform_inputs() {
        let n = 3;
        let g = catalog(CatalogGraph::Path, n).unwrap();
        let mut state = SparseState::new(n);
        state.add_register_all("X", 2, 0).unwrap();
        state.add_register_all("Y", 2, flags::TRUE).unwrap();
        state.apply_all_parties("X", &Gate::hadamard()).unwrap();
        H1Algorithm::known(n)
            .run_joint(&g, &mut state, "X", "Y")
            .unwrap();
        assert_eq!(state.len(), 8);
        for (k, a) in state.amplitudes() {
            let x = [k[0], k[2], k[4]];
            let ones = x.iter().filter(|&&b| b == 1).count();
            let want = if ones == 1 { flags::TRUE } else { flags::FALSE } as u8;
            assert_eq!([k[1], k[3], k[5]], [want; 3]);
            assert!((a.norm() - (1.0f64 / 8.0).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn upper_bound_variant_agrees() {
        let g = catalog(CatalogGraph::Complete, 3).unwrap();
        let alg = H1Algorithm::upper_bound(4);
        for bits in 0..8u32 {
            let x: Vec<u32> = (0..3).map(|i| (bits >> i) & 1).collect();
            let want = if x.iter().sum::<u32>() == 1 {
                flags::TRUE
            } else {
                flags::FALSE
            };
            assert_eq!(alg.evaluate(&g, &x).unwrap().value, want, "x = {x:?}");
        }
    }
}
