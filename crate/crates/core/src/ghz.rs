//! Sharing the cat state `(1/√k) Σ_x |x⟩^⊗n` over an anonymous network.
//!
//! Each of `k` parallel banks ends up in `cat(k, -s_i)` after one coherent
//! `F_k` run and a measurement. A bank with `s_i = 0` is the answer;
//! otherwise two banks with equal `s` are distilled into `cat(k, 0)`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qsim::{
    AmplitudeEntry, BinaryOp, Gate, MeasurementBranch, Mode, Pass, RegisterSpec, SparseState,
};
use crate::runtime::{CostReport, GlobalInfo, PartyProgram};
use crate::subroutines::FkViews;
use crate::topology::Topology;

pub fn omega(k: u32, power: u64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (power % k as u64) as f64 / k as f64)
}

/// `W_k |x⟩ = (1/√k) Σ_j ω_k^{xj} |j⟩`.
pub fn w_k_gate(k: u32) -> Result<Gate> {
    if k < 2 {
        return Err(Error::BadDimension(k));
    }
    let scale = 1.0 / (k as f64).sqrt();
    let matrix = (0..k as u64)
        .map(|j| (0..k as u64).map(|x| omega(k, x * j) * scale).collect())
        .collect();
    Gate::new(format!("W{k}"), matrix)
}

/// Register `R` (dimension `k`) at each of `n` parties, in the state
/// `(1/√k) Σ_x ω_k^{tx} |x⟩^⊗n`.
pub fn cat_state(k: u32, t: u32, n: usize) -> Result<SparseState> {
    if k < 2 {
        return Err(Error::BadDimension(k));
    }
    if t >= k {
        return Err(Error::OutOfRange(format!(
            "phase index {t} needs to be below {k}"
        )));
    }
    let scale = 1.0 / (k as f64).sqrt();
    let entries: Vec<AmplitudeEntry> = (0..k)
        .map(|x| {
            let a = omega(k, (t * x) as u64) * scale;
            let digit = char::from_digit(x, 36).expect("k is at most 36");
            AmplitudeEntry {
                basis: std::iter::repeat_n(digit, n).collect(),
                re: a.re,
                im: a.im,
            }
        })
        .collect();
    SparseState::from_entries(n, layout("R", k, n), &entries)
}

/// Uniform superposition over `y` with `t + Σ y ≡ 0 (mod k)`, register `R`.
pub fn constrained_uniform(k: u32, t: u32, n: usize) -> Result<SparseState> {
    let total = (k as usize).pow(n as u32);
    let keep: Vec<String> = (0..total)
        .map(|mut i| {
            let mut digits = vec![0u32; n];
            for d in digits.iter_mut().rev() {
                *d = (i % k as usize) as u32;
                i /= k as usize;
            }
            digits
        })
        .filter(|y| (t + y.iter().sum::<u32>()).is_multiple_of(k))
        .map(|y| {
            y.iter()
                .map(|&d| char::from_digit(d, 36).expect("k is at most 36"))
                .collect()
        })
        .collect();
    let a = 1.0 / (keep.len() as f64).sqrt();
    let entries: Vec<_> = keep
        .into_iter()
        .map(|basis| AmplitudeEntry {
            basis,
            re: a,
            im: 0.0,
        })
        .collect();
    SparseState::from_entries(n, layout("R", k, n), &entries)
}

fn layout(name: &str, k: u32, n: usize) -> Vec<RegisterSpec> {
    (0..n).map(|v| RegisterSpec::new(v, name, k)).collect()
}

/// Fidelity of `W_k^⊗n cat(k, t)` with [`constrained_uniform`].
pub fn cat_mixing_fidelity(k: u32, t: u32, n: usize) -> Result<f64> {
    let mut s = cat_state(k, t, n)?;
    s.apply_all_parties("R", &w_k_gate(k)?)?;
    s.fidelity(&constrained_uniform(k, t, n)?)
}

/// Prepares `cat(k, 0)` on `n` qudits from `|0…0⟩`: `W_k` on the first,
/// then the first added into every other.
pub fn cat_preparation(k: u32, n: usize) -> Result<Gate> {
    let w = w_k_gate(k)?;
    let k = k as usize;
    let size = k.pow(n as u32);
    let stride = size / k;
    let mut matrix = vec![vec![Complex64::new(0.0, 0.0); size]; size];
    for (col, (head, tail)) in (0..size).map(|c| (c / stride, c % stride)).enumerate() {
        for j in 0..k {
            let mut digits = Vec::with_capacity(n - 1);
            let mut rest = tail;
            for _ in 1..n {
                digits.push(rest % k);
                rest /= k;
            }
            let shifted = digits.iter().rev().fold(0, |acc, &d| acc * k + (d + j) % k);
            matrix[j * stride + shifted][col] = w.matrix[j][head];
        }
    }
    Gate::new(format!("cat-prep{k}"), matrix)
}

/// One post-measurement branch of a phase-one bank.
#[derive(Debug, Clone)]
pub struct BankBranch {
    pub s: u32,
    pub probability: f64,
    /// Registers `R{bank}`, in `cat(k, -s mod k)`.
    pub state: SparseState,
}

/// Phase one for bank `bank`: `W_k` everywhere, coherent `F_k` into `S{bank}`,
/// measurement of `S{bank}`, `W_k†` everywhere.
pub fn phase1(topology: &Topology, k: u32, bank: usize) -> Result<(Vec<BankBranch>, CostReport)> {
    let n = topology.n();
    let (r, s) = (format!("R{bank}"), format!("S{bank}"));
    let w = w_k_gate(k)?;
    let mut state = SparseState::new(n);
    state.add_register_all(&r, k, 0)?;
    state.add_register_all(&s, k, 0)?;
    state.apply_all_parties(&r, &w)?;
    let cost = state.apply_subroutine(
        topology,
        &FkViews::new(k),
        &[r.as_str()],
        &s,
        &GlobalInfo { n },
        Pass::Compute,
    )?;
    let mut out = Vec::new();
    for MeasurementBranch {
        outcomes,
        probability,
        mut state,
    } in state.branches(&[s.as_str()])?
    {
        let values: BTreeSet<u32> = outcomes.iter().map(|o| o.value).collect();
        if values.len() != 1 {
            return Err(Error::ProgramFault {
                program: FkViews::new(k).name(),
                msg: format!("parties disagree: {values:?}"),
            });
        }
        for v in 0..n {
            state.discard_register(v, &s)?;
        }
        state.apply_all_parties(&r, &w.dagger())?;
        out.push(BankBranch {
            s: outcomes[0].value,
            probability,
            state,
        });
    }
    Ok((out, cost))
}

/// Phase two: `R_from` added into `R_into` at every party, then `R_into`
/// measured and split off. Returns `(r, probability, state)` per outcome.
pub fn phase2(
    state: &SparseState,
    k: u32,
    from: &str,
    into: &str,
) -> Result<Vec<(Vec<u32>, f64, SparseState)>> {
    if state.spec(0, from)?.dim != k || state.spec(0, into)?.dim != k {
        return Err(Error::LayoutMismatch);
    }
    let mut state = state.clone();
    state.local_binary_op_all(from, into, &BinaryOp::AddMod)?;
    let mut out = Vec::new();
    for b in state.branches(&[into])? {
        let regs: Vec<(usize, &str)> = (0..state.parties()).map(|v| (v, into)).collect();
        let (_, rest) = b.state.split(&regs)?;
        out.push((b.values(into), b.probability, rest));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GhzBranch {
    /// Phase-one outcome per bank.
    pub s: Vec<u32>,
    /// The bank kept (0-based).
    pub kept: usize,
    /// The bank distilled into `kept`, when no `s_i` was zero.
    pub partner: Option<usize>,
    /// Phase-two outcomes, by party.
    pub r: Vec<u32>,
    pub probability: f64,
    /// Register `R` at every party.
    pub state: SparseState,
}

#[derive(Debug, Clone)]
pub struct GhzResult {
    pub k: u32,
    pub branches: Vec<GhzBranch>,
    pub cost: CostReport,
    /// Gate tally over the whole run.
    pub gates: BTreeMap<String, usize>,
}

impl GhzResult {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    /// Lowest fidelity with `cat(k, 0)` over all branches.
    pub fn worst_fidelity(&self) -> Result<f64> {
        let mut worst = 1.0f64;
        for b in &self.branches {
            let reference = cat_state(self.k, 0, b.state.parties())?;
            worst = worst.min(b.state.fidelity(&reference)?);
        }
        Ok(worst)
    }

    /// Labels outside `{W_k, W_k†, add mod k, F_k, measure}`.
    pub fn foreign_gates(&self) -> Vec<String> {
        let allowed = allowed_gates(self.k);
        self.gates
            .keys()
            .filter(|g| !allowed.contains(*g))
            .cloned()
            .collect()
    }
}

pub fn allowed_gates(k: u32) -> BTreeSet<String> {
    let w = format!("W{k}");
    [
        w.clone(),
        format!("{w}†"),
        format!("add mod {k}"),
        FkViews::new(k).name(),
        "measure".to_string(),
    ]
    .into_iter()
    .collect()
}

fn pick<T>(mut items: Vec<(f64, T)>, rng: &mut ChaCha8Rng) -> Result<(f64, T)> {
    use rand::Rng;
    let total: f64 = items.iter().map(|i| i.0).sum();
    let mut u = rng.gen::<f64>() * total;
    let last = items.len().checked_sub(1).ok_or(Error::EmptyState)?;
    let at = items
        .iter()
        .position(|i| {
            u -= i.0;
            u < 0.0
        })
        .unwrap_or(last);
    Ok(items.swap_remove(at))
}

/// Runs both phases on `topology` with modulus `k`. Every bank is measured;
/// in `AllBranches` mode every outcome combination is followed.
pub fn ghz_share(topology: &Topology, k: u32, mode: Mode) -> Result<GhzResult> {
    if k < 2 {
        return Err(Error::BadDimension(k));
    }
    let n = topology.n();
    let mut banks = Vec::new();
    let mut costs = Vec::new();
    for i in 0..k as usize {
        let (b, c) = phase1(topology, k, i)?;
        banks.push(b);
        costs.push(c);
    }
    let cost = CostReport::parallel(&costs);
    let mut rng = match mode {
        Mode::Sample(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        Mode::AllBranches => None,
    };
    let combos: Vec<Vec<usize>> = match rng.as_mut() {
        Some(rng) => {
            let mut c = Vec::new();
            for b in &banks {
                let items = b
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (x.probability, i))
                    .collect();
                c.push(pick(items, rng)?.1);
            }
            vec![c]
        }
        None => banks.iter().fold(vec![Vec::new()], |acc, b| {
            acc.into_iter()
                .flat_map(|prefix| {
                    (0..b.len()).map(move |i| {
                        let mut p = prefix.clone();
                        p.push(i);
                        p
                    })
                })
                .collect()
        }),
    };
    let mut branches = Vec::new();
    let mut gates = BTreeMap::new();
    for combo in combos {
        let chosen: Vec<&BankBranch> = combo
            .iter()
            .enumerate()
            .map(|(i, &c)| &banks[i][c])
            .collect();
        let s: Vec<u32> = chosen.iter().map(|b| b.s).collect();
        let probability: f64 = chosen.iter().map(|b| b.probability).product();
        let mut joint = SparseState::new(n);
        for b in &chosen {
            joint = joint.tensor(&b.state)?;
        }
        let (kept, partner) = match s.iter().position(|&x| x == 0) {
            Some(i) => (i, None),
            None => {
                let pair = (0..s.len())
                    .flat_map(|l| (l + 1..s.len()).map(move |m| (l, m)))
                    .find(|&(l, m)| s[l] == s[m])
                    .ok_or_else(|| Error::NotExact(format!("no equal pair among {s:?}")))?;
                (pair.0, Some(pair.1))
            }
        };
        let unused: Vec<String> = (0..s.len())
            .filter(|&i| i != kept && Some(i) != partner)
            .map(|i| format!("R{i}"))
            .collect();
        let drop: Vec<(usize, &str)> = unused
            .iter()
            .flat_map(|r| (0..n).map(move |v| (v, r.as_str())))
            .collect();
        if !drop.is_empty() {
            joint = joint.split(&drop)?.1;
        }
        let keep = format!("R{kept}");
        let finals: Vec<(Vec<u32>, f64, SparseState)> = match partner {
            None => vec![(Vec::new(), 1.0, joint)],
            Some(m) => {
                let outs = phase2(&joint, k, &keep, &format!("R{m}"))?;
                match rng.as_mut() {
                    Some(rng) => {
                        let (p, (r, st)) = pick(
                            outs.into_iter().map(|(r, p, st)| (p, (r, st))).collect(),
                            rng,
                        )?;
                        vec![(r, p, st)]
                    }
                    None => outs,
                }
            }
        };
        for (r, p, mut state) in finals {
            state.rename_register(&keep, "R")?;
            for (g, c) in state.gate_counts() {
                let e = gates.entry(g.clone()).or_insert(0);
                *e = (*e).max(*c);
            }
            let probability = if rng.is_some() { 1.0 } else { probability * p };
            branches.push(GhzBranch {
                s: s.clone(),
                kept,
                partner,
                r,
                probability,
                state,
            });
        }
    }
    Ok(GhzResult {
        k,
        branches,
        cost,
        gates,
    })
}
