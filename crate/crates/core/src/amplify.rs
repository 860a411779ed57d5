//! Single-iteration exact amplitude amplification.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{Gate, Pass, SparseState};
use crate::runtime::{CostReport, GlobalInfo};
use crate::subroutines::SymbolProgram;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePair {
    pub theta: f64,
    pub phi: f64,
    pub a: f64,
}

/// Phases that make one iterate of `-A F0(φ) A⁻¹ Fχ(θ)` exact for initial
/// success probability `a`.
///
/// The bad-subspace amplitude after one iterate is proportional to
/// `1 + (e^{iφ} - 1)(a e^{iθ} + 1 - a)`. With `φ = θ` and `z = e^{iθ}` this
/// vanishes iff `a z² + (1 - 2a) z + a = 0`, whose roots lie on the unit
/// circle for `a ≥ 1/4` and have real part `1 - 1/(2a)`.
pub fn phase_angles(a: f64) -> Result<PhasePair> {
    if !(0.25..=1.0).contains(&a) {
        return Err(Error::AngleDomain(a));
    }
    let theta = (1.0 - 1.0 / (2.0 * a)).clamp(-1.0, 1.0).acos();
    Ok(PhasePair {
        theta,
        phi: theta,
        a,
    })
}

/// Good and bad amplitudes after one iterate, computed with explicit 2×2
/// matrices on `span{good, bad}`.
pub fn two_level_model(a: f64, theta: f64, phi: f64) -> (Complex64, Complex64) {
    let (g, b) = (a.sqrt(), (1.0 - a).sqrt());
    let c = |x: f64| Complex64::new(x, 0.0);
    // columns: A|0⟩ = (g, b), A|1⟩ = (-b, g) in the (good, bad) basis
    let amat = [[c(g), c(-b)], [c(b), c(g)]];
    let ainv = [[c(g), c(b)], [c(-b), c(g)]];
    let mul = |m: &[[Complex64; 2]; 2], v: [Complex64; 2]| {
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    };
    let mut v = [c(g), c(b)];
    v[0] *= Complex64::from_polar(1.0, theta);
    v = mul(&ainv, v);
    v[0] *= Complex64::from_polar(1.0, phi);
    v = mul(&amat, v);
    (-v[0], -v[1])
}

/// A local, communication-free state preparation `A`.
pub trait Preparation {
    fn apply(&self, state: &mut SparseState) -> Result<CostReport>;
    fn apply_inverse(&self, state: &mut SparseState) -> Result<CostReport>;
}

/// Computes a flag into a register at every party, and erases it again.
pub trait FlagOracle {
    fn flag_register(&self) -> &str;
    fn compute(&self, state: &mut SparseState) -> Result<CostReport>;
    fn uncompute(&self, state: &mut SparseState) -> Result<CostReport>;
}

/// How a collective phase is shared out among the parties.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseSplit {
    /// Every party applies `angle / count`.
    Uniform(usize),
    /// Only parties whose `register` holds `MARKED` apply `angle / count`.
    Marked { register: String, count: usize },
}

/// One conditional phase flip `F(angle)`: compute a flag, kick the phase
/// where it shows `trigger`, erase the flag.
pub struct Reflection<'a> {
    pub oracle: &'a dyn FlagOracle,
    pub trigger: u32,
    pub split: PhaseSplit,
}

impl Reflection<'_> {
    fn apply(&self, state: &mut SparseState, angle: f64) -> Result<CostReport> {
        let forward = self.oracle.compute(state)?;
        let flag = self.oracle.flag_register().to_string();
        let trigger = self.trigger;
        match &self.split {
            PhaseSplit::Uniform(count) => {
                state.phase_kick(&flag, trigger, angle / *count as f64)?
            }
            PhaseSplit::Marked { register, count } => {
                let share = angle / *count as f64;
                state.phase_kick_with(&[&flag, register], |_, s| {
                    if s[0] == trigger && s[1] == crate::subroutines::flags::MARKED {
                        share
                    } else {
                        0.0
                    }
                })?
            }
        }
        let back = self.oracle.uncompute(state)?;
        Ok(forward.then(&back))
    }

    fn good_probability(&self, state: &mut SparseState) -> Result<f64> {
        let mut probe = state.clone();
        self.oracle.compute(&mut probe)?;
        let at = probe.position(0, self.oracle.flag_register())?;
        let trigger = self.trigger as u8;
        Ok(probe.probability(|k| k[at] == trigger))
    }
}

/// Applies `-A F0(φ) A⁻¹ Fχ(θ)` to `state`, which must equal `A` applied to
/// the fiducial state. With `check`, the good probability is first compared
/// with `a`.
pub fn exact_amplify(
    state: &mut SparseState,
    prep: &dyn Preparation,
    chi: &Reflection,
    zero: &Reflection,
    a: f64,
    check: bool,
) -> Result<CostReport> {
    let angles = phase_angles(a)?;
    if check {
        let got = chi.good_probability(state)?;
        if (got - a).abs() > 1e-10 {
            return Err(Error::SuccessProbabilityMismatch { expected: a, got });
        }
    }
    let mut cost = chi.apply(state, angles.theta)?;
    cost = cost.then(&prep.apply_inverse(state)?);
    cost = cost.then(&zero.apply(state, angles.phi)?);
    cost = cost.then(&prep.apply(state)?);
    state.negate();
    Ok(cost)
}

/// The inverse of [`exact_amplify`] with the same arguments.
pub fn exact_amplify_inverse(
    state: &mut SparseState,
    prep: &dyn Preparation,
    chi: &Reflection,
    zero: &Reflection,
    a: f64,
) -> Result<CostReport> {
    let angles = phase_angles(a)?;
    state.negate();
    let mut cost = prep.apply_inverse(state)?;
    cost = cost.then(&zero.apply(state, -angles.phi)?);
    cost = cost.then(&prep.apply(state)?);
    cost = cost.then(&chi.apply(state, -angles.theta)?);
    Ok(cost)
}

/// `gate` on `register` at every party, optionally only where `control`
/// holds a given symbol.
#[derive(Debug, Clone)]
pub struct LocalGate {
    pub register: String,
    pub gate: Gate,
    pub control: Option<(String, u32)>,
}

impl LocalGate {
    pub fn new(register: &str, gate: Gate) -> Self {
        LocalGate {
            register: register.into(),
            gate,
            control: None,
        }
    }

    pub fn controlled(register: &str, gate: Gate, control: &str, value: u32) -> Self {
        LocalGate {
            register: register.into(),
            gate,
            control: Some((control.into(), value)),
        }
    }

    fn run(&self, state: &mut SparseState, gate: &Gate) -> Result<CostReport> {
        match &self.control {
            None => state.apply_all_parties(&self.register, gate)?,
            Some((c, v)) => state.apply_controlled_all(c, *v, &self.register, gate)?,
        }
        Ok(CostReport::zero())
    }
}

impl Preparation for LocalGate {
    fn apply(&self, state: &mut SparseState) -> Result<CostReport> {
        self.run(state, &self.gate)
    }

    fn apply_inverse(&self, state: &mut SparseState) -> Result<CostReport> {
        self.run(state, &self.gate.dagger())
    }
}

/// A classical subroutine run coherently as a flag oracle.
pub struct SubroutineOracle<'a, P> {
    pub topology: &'a Topology,
    pub program: P,
    pub in_regs: Vec<String>,
    pub out_reg: String,
    pub global: GlobalInfo,
}

impl<'a, P: SymbolProgram> SubroutineOracle<'a, P> {
    pub fn new(
        topology: &'a Topology,
        program: P,
        in_regs: &[&str],
        out_reg: &str,
        global: GlobalInfo,
    ) -> Self {
        SubroutineOracle {
            topology,
            program,
            in_regs: in_regs.iter().map(|s| s.to_string()).collect(),
            out_reg: out_reg.into(),
            global,
        }
    }

    fn pass(&self, state: &mut SparseState, pass: Pass) -> Result<CostReport> {
        let ins: Vec<&str> = self.in_regs.iter().map(String::as_str).collect();
        state.apply_subroutine(
            self.topology,
            &self.program,
            &ins,
            &self.out_reg,
            &self.global,
            pass,
        )
    }
}

impl<P: SymbolProgram> FlagOracle for SubroutineOracle<'_, P> {
    fn flag_register(&self) -> &str {
        &self.out_reg
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
    use crate::subroutines::{flags, H0Flooding};
    use crate::topology::{catalog, CatalogGraph};
    use std::f64::consts::PI;

    #[test]
    fn angle_anchors() {
        assert!((phase_angles(0.25).unwrap().theta - PI).abs() < 1e-12);
        assert!((phase_angles(0.5).unwrap().theta - PI / 2.0).abs() < 1e-12);
        assert!((phase_angles(1.0).unwrap().theta - PI / 3.0).abs() < 1e-12);
        assert!(phase_angles(0.2).is_err());
        assert!(phase_angles(1.01).is_err());
    }

    #[test]
    fn model_is_exact_on_domain() {
        for i in 0..=75 {
            let a = 0.25 + i as f64 * 0.01;
            let p = phase_angles(a).unwrap();
            let (good, bad) = two_level_model(a, p.theta, p.phi);
            assert!(bad.norm() < 1e-10, "a = {a}");
            assert!((good.norm() - 1.0).abs() < 1e-10);
        }
    }

    /// Weight-one test as a communication-free oracle.
    struct WeightOne;

    impl FlagOracle for WeightOne {
        fn flag_register(&self) -> &str {
            "S"
        }

        fn compute(&self, state: &mut SparseState) -> Result<CostReport> {
            state.apply_function(&["R"], "S", Pass::Compute, |x| {
                let w: u32 = x.iter().map(|v| v[0]).sum();
                Ok(vec![
                    if w == 1 { flags::TRUE } else { flags::FALSE };
                    x.len()
                ])
            })?;
            Ok(CostReport::zero())
        }

        fn uncompute(&self, state: &mut SparseState) -> Result<CostReport> {
            state.apply_function(&["R"], "S", Pass::Uncompute, |x| {
                let w: u32 = x.iter().map(|v| v[0]).sum();
                Ok(vec![
                    if w == 1 { flags::TRUE } else { flags::FALSE };
                    x.len()
                ])
            })?;
            Ok(CostReport::zero())
        }
    }

    fn a_gate(n: usize) -> Gate {
        let (p, q) = (((n - 1) as f64 / n as f64).sqrt(), (1.0 / n as f64).sqrt());
        Gate::real("A", &[vec![p, q], vec![q, -p]]).unwrap()
    }

    fn amplify_weight_one(graph: CatalogGraph, n: usize) -> (SparseState, CostReport, CostReport) {
        let g = catalog(graph, n).unwrap();
        let global = GlobalInfo { n };
        let mut state = SparseState::new(n);
        for reg in ["R", "S", "Sp"] {
            state.add_register_all(reg, 2, 0).unwrap();
        }
        let prep = LocalGate::new("R", a_gate(n));
        prep.apply(&mut state).unwrap();
        let h0 = SubroutineOracle::new(&g, H0Flooding::new(n), &["R"], "Sp", global);
        let chi = Reflection {
            oracle: &WeightOne,
            trigger: flags::TRUE,
            split: PhaseSplit::Uniform(n),
        };
        let zero = Reflection {
            oracle: &h0,
            trigger: flags::TRUE,
            split: PhaseSplit::Uniform(n),
        };
        let a = (1.0 - 1.0 / n as f64).powi(n as i32 - 1);
        let cost = exact_amplify(&mut state, &prep, &chi, &zero, a, true).unwrap();
        let h0_cost =
            crate::runtime::run_classical(&g, &H0Flooding::new(n), &vec![vec![0]; n], &global)
                .unwrap()
                .cost;
        (state, cost, h0_cost)
    }

    #[test]
    fn k2_reaches_the_weight_one_states() {
        let (state, cost, h0) = amplify_weight_one(CatalogGraph::Complete, 2);
        let r: Vec<usize> = (0..2).map(|v| state.position(v, "R").unwrap()).collect();
        let mut support: Vec<(u8, u8)> = state
            .amplitudes()
            .map(|(k, _)| (k[r[0]], k[r[1]]))
            .collect();
        support.sort();
        assert_eq!(support, vec![(0, 1), (1, 0)]);
        for (_, amp) in state.amplitudes() {
            assert!((amp.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
        assert_eq!(cost.qubits_sent, 2 * h0.qubits_sent);
    }

    #[test]
    fn c3_support_is_weight_one() {
        let (state, _, _) = amplify_weight_one(CatalogGraph::Ring, 3);
        let r: Vec<usize> = (0..3).map(|v| state.position(v, "R").unwrap()).collect();
        let weight_one = state.probability(|k| r.iter().map(|&p| k[p] as u32).sum::<u32>() == 1);
        assert!((weight_one - 1.0).abs() < 1e-10);
        assert!(state
            .amplitudes()
            .all(|(k, _)| r.iter().map(|&p| k[p] as u32).sum::<u32>() == 1));
    }

    #[test]
    fn inverse_restores_the_prepared_state() {
        let n = 3;
        let g = catalog(CatalogGraph::Path, n).unwrap();
        let global = GlobalInfo { n };
        let mut state = SparseState::new(n);
        for reg in ["R", "S", "Sp"] {
            state.add_register_all(reg, 2, 0).unwrap();
        }
        let prep = LocalGate::new("R", a_gate(n));
        prep.apply(&mut state).unwrap();
        let start = state.clone();
        let h0 = SubroutineOracle::new(&g, H0Flooding::new(n), &["R"], "Sp", global);
        let chi = Reflection {
            oracle: &WeightOne,
            trigger: flags::TRUE,
            split: PhaseSplit::Uniform(n),
        };
        let zero = Reflection {
            oracle: &h0,
            trigger: flags::TRUE,
            split: PhaseSplit::Uniform(n),
        };
        let a = 4.0 / 9.0;
        let fwd = exact_amplify(&mut state, &prep, &chi, &zero, a, false).unwrap();
        let back = exact_amplify_inverse(&mut state, &prep, &chi, &zero, a).unwrap();
        assert_eq!(fwd.qubits_sent, back.qubits_sent);
        assert!(state.distance(&start).unwrap() < 1e-12);
    }

    #[test]
    fn mismatched_probability_is_rejected() {
        let n = 2;
        let g = catalog(CatalogGraph::Complete, n).unwrap();
        let mut state = SparseState::new(n);
        for reg in ["R", "S", "Sp"] {
            state.add_register_all(reg, 2, 0).unwrap();
        }
        let prep = LocalGate::new("R", Gate::hadamard());
        prep.apply(&mut state).unwrap();
        let h0 = SubroutineOracle::new(&g, H0Flooding::new(n), &["R"], "Sp", GlobalInfo { n });
        let chi = Reflection {
            oracle: &WeightOne,
            trigger: flags::TRUE,
            split: PhaseSplit::Uniform(n),
        };
        let zero = Reflection {
            oracle: &h0,
            trigger: flags::TRUE,
            split: PhaseSplit::Uniform(n),
        };
        assert!(matches!(
            exact_amplify(&mut state, &prep, &chi, &zero, 0.3, true),
            Err(Error::SuccessProbabilityMismatch { .. })
        ));
    }
}
