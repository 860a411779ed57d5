//! Sparse joint state over party-owned qudit registers.
//!
//! Basis strings hold one symbol per register, registers ordered by party and
//! then by registration order. Amplitudes below [`PRUNE`] are dropped after
//! every operation; if that moves the norm by more than [`RENORM`], the state
//! is rescaled.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::{CommPattern, CostReport, GlobalInfo};
use crate::subroutines::SymbolProgram;
use crate::topology::Topology;

pub const PRUNE: f64 = 1e-14;
pub const RENORM: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-12;
/// Branches lighter than this are not enumerated.
pub const BRANCH_CUTOFF: f64 = 1e-12;

pub type Basis = Vec<u8>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterSpec {
    pub party: usize,
    pub name: String,
    pub dim: u32,
    pub fiducial: u32,
}

impl RegisterSpec {
    pub fn new(party: usize, name: impl Into<String>, dim: u32) -> Self {
        RegisterSpec {
            party,
            name: name.into(),
            dim,
            fiducial: 0,
        }
    }

    pub fn with_fiducial(mut self, fiducial: u32) -> Self {
        self.fiducial = fiducial;
        self
    }
}

/// A named unitary on one or more qudits.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub label: String,
    /// Row-major, `matrix[row][col]`.
    pub matrix: Vec<Vec<Complex64>>,
}

impl Gate {
    pub fn new(label: impl Into<String>, matrix: Vec<Vec<Complex64>>) -> Result<Gate> {
        let label = label.into();
        let d = matrix.len();
        if d == 0 || matrix.iter().any(|row| row.len() != d) {
            return Err(Error::NonUnitary(format!("{label}: not a square matrix")));
        }
        for i in 0..d {
            for j in 0..d {
                let dot: Complex64 = (0..d).map(|r| matrix[r][i].conj() * matrix[r][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).norm() > UNITARY_TOL {
                    return Err(Error::NonUnitary(format!(
                        "{label}: U†U differs from I at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Gate { label, matrix })
    }

    pub fn real(label: impl Into<String>, rows: &[Vec<f64>]) -> Result<Gate> {
        Gate::new(
            label,
            rows.iter()
                .map(|r| r.iter().map(|&x| Complex64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub fn identity(d: usize) -> Gate {
        let matrix = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if i == j {
                            Complex64::new(1.0, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        Gate {
            label: format!("I{d}"),
            matrix,
        }
    }

    pub fn hadamard() -> Gate {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Gate::real("H", &[vec![h, h], vec![h, -h]]).expect("hadamard is unitary")
    }

    pub fn pauli_x() -> Gate {
        Gate::real("X", &[vec![0.0, 1.0], vec![1.0, 0.0]]).expect("X is unitary")
    }

    pub fn dim(&self) -> usize {
        self.matrix.len()
    }

    pub fn dagger(&self) -> Gate {
        let d = self.dim();
        let matrix = (0..d)
            .map(|i| (0..d).map(|j| self.matrix[j][i].conj()).collect())
            .collect();
        let label = match self.label.strip_suffix('†') {
            Some(base) => base.to_string(),
            None => format!("{}†", self.label),
        };
        Gate { label, matrix }
    }

    pub fn mul(&self, other: &Gate) -> Gate {
        let d = self.dim();
        let matrix = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| (0..d).map(|r| self.matrix[i][r] * other.matrix[r][j]).sum())
                    .collect()
            })
            .collect();
        Gate {
            label: format!("{}·{}", self.label, other.label),
            matrix,
        }
    }
}

/// Reversible two-register updates `target ← op(source, target)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BinaryOp {
    Xor,
    AddMod,
    /// `table[source][target]` is the new target symbol.
    Custom(Vec<Vec<u32>>),
}

impl BinaryOp {
    fn label(&self, dim: u32) -> String {
        match self {
            BinaryOp::Xor => "cnot".into(),
            BinaryOp::AddMod => format!("add mod {dim}"),
            BinaryOp::Custom(_) => "custom".into(),
        }
    }

    fn check(&self, src_dim: u32, tgt_dim: u32) -> Result<()> {
        match self {
            BinaryOp::Xor => {
                if src_dim != tgt_dim || !tgt_dim.is_power_of_two() {
                    return Err(Error::NonBijective);
                }
            }
            BinaryOp::AddMod => {
                if src_dim > tgt_dim {
                    return Err(Error::NonBijective);
                }
            }
            BinaryOp::Custom(table) => {
                if table.len() != src_dim as usize {
                    return Err(Error::NonBijective);
                }
                for row in table {
                    let mut seen = vec![false; tgt_dim as usize];
                    if row.len() != tgt_dim as usize {
                        return Err(Error::NonBijective);
                    }
                    for &t in row {
                        if t >= tgt_dim || std::mem::replace(&mut seen[t as usize], true) {
                            return Err(Error::NonBijective);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn eval(&self, s: u32, t: u32, tgt_dim: u32) -> u32 {
        match self {
            BinaryOp::Xor => s ^ t,
            BinaryOp::AddMod => (s + t) % tgt_dim,
            BinaryOp::Custom(table) => table[s as usize][t as usize],
        }
    }
}

/// Whether measurements are sampled or enumerated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    AllBranches,
    Sample(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    Compute,
    Uncompute,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Outcome {
    pub party: usize,
    pub register: String,
    pub value: u32,
}

#[derive(Debug, Clone)]
pub struct MeasurementBranch {
    pub outcomes: Vec<Outcome>,
    pub probability: f64,
    pub state: SparseState,
}

impl MeasurementBranch {
    /// Measured values of `register`, by party.
    pub fn values(&self, register: &str) -> Vec<u32> {
        self.outcomes
            .iter()
            .filter(|o| o.register == register)
            .map(|o| o.value)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEntry {
    pub basis: String,
    pub re: f64,
    pub im: f64,
}

/// Serializable form of a [`SparseState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDump {
    pub parties: usize,
    pub layout: Vec<RegisterSpec>,
    pub amplitudes: Vec<AmplitudeEntry>,
}

#[derive(Debug, Clone)]
pub struct SparseState {
    parties: usize,
    layout: Vec<RegisterSpec>,
    amps: BTreeMap<Basis, Complex64>,
    gates: BTreeMap<String, usize>,
}

impl SparseState {
    /// The scalar state of `parties` parties holding no registers.
    pub fn new(parties: usize) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(Vec::new(), Complex64::new(1.0, 0.0));
        SparseState {
            parties,
            layout: Vec::new(),
            amps,
            gates: BTreeMap::new(),
        }
    }

    /// All registers at their fiducial symbols.
    pub fn init(parties: usize, layout: Vec<RegisterSpec>) -> Result<Self> {
        let mut state = SparseState::new(parties);
        for spec in layout {
            state.add_register(spec)?;
        }
        Ok(state)
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn layout(&self) -> &[RegisterSpec] {
        &self.layout
    }

    /// Number of stored basis components.
    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> impl Iterator<Item = (&Basis, &Complex64)> {
        self.amps.iter()
    }

    pub fn amplitude(&self, basis: &[u8]) -> Complex64 {
        self.amps.get(basis).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    /// Counts of every gate, measurement and subroutine applied so far.
    pub fn gate_counts(&self) -> &BTreeMap<String, usize> {
        &self.gates
    }

    fn tally(&mut self, label: &str, times: usize) {
        *self.gates.entry(label.to_string()).or_default() += times;
    }

    pub fn has_register(&self, party: usize, name: &str) -> bool {
        self.layout
            .iter()
            .any(|r| r.party == party && r.name == name)
    }

    pub fn position(&self, party: usize, name: &str) -> Result<usize> {
        self.layout
            .iter()
            .position(|r| r.party == party && r.name == name)
            .ok_or_else(|| Error::UnknownRegister(format!("{name}@{party}")))
    }

    /// Positions of `name` at parties `0..parties`.
    pub fn positions(&self, name: &str) -> Result<Vec<usize>> {
        (0..self.parties).map(|v| self.position(v, name)).collect()
    }

    pub fn spec(&self, party: usize, name: &str) -> Result<&RegisterSpec> {
        Ok(&self.layout[self.position(party, name)?])
    }

    /// Symbols of `name` at every party in one basis string.
    pub fn values(&self, basis: &[u8], name: &str) -> Result<Vec<u32>> {
        Ok(self
            .positions(name)?
            .into_iter()
            .map(|p| basis[p] as u32)
            .collect())
    }

    pub fn add_register(&mut self, spec: RegisterSpec) -> Result<()> {
        if spec.dim < 2 || spec.dim > 256 {
            return Err(Error::BadDimension(spec.dim));
        }
        if spec.fiducial >= spec.dim {
            return Err(Error::SymbolOutOfRange {
                register: spec.name.clone(),
                symbol: spec.fiducial,
                dim: spec.dim,
            });
        }
        if spec.party >= self.parties {
            return Err(Error::UnknownRegister(format!(
                "{}@{} (no such party)",
                spec.name, spec.party
            )));
        }
        if self.has_register(spec.party, &spec.name) {
            return Err(Error::DuplicateRegister(format!(
                "{}@{}",
                spec.name, spec.party
            )));
        }
        let at = self.layout.partition_point(|r| r.party <= spec.party);
        let value = spec.fiducial as u8;
        self.layout.insert(at, spec);
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .map(|(mut k, a)| {
                k.insert(at, value);
                (k, a)
            })
            .collect();
        Ok(())
    }

    /// Adds `name` at every party.
    pub fn add_register_all(&mut self, name: &str, dim: u32, fiducial: u32) -> Result<()> {
        for v in 0..self.parties {
            self.add_register(RegisterSpec::new(v, name, dim).with_fiducial(fiducial))?;
        }
        Ok(())
    }

    /// Removes a register that holds the same symbol in every component and
    /// returns that symbol.
    pub fn discard_register(&mut self, party: usize, name: &str) -> Result<u32> {
        let at = self.position(party, name)?;
        let values: BTreeSet<u8> = self.amps.keys().map(|k| k[at]).collect();
        if values.len() != 1 {
            return Err(Error::NotDisentangled(format!("{name}@{party}")));
        }
        self.layout.remove(at);
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .map(|(mut k, a)| {
                k.remove(at);
                (k, a)
            })
            .collect();
        Ok(*values.first().unwrap() as u32)
    }

    /// Removes `name` from every party, requiring it to be at its fiducial.
    pub fn release(&mut self, name: &str) -> Result<()> {
        for v in 0..self.parties {
            let fiducial = self.spec(v, name)?.fiducial;
            let at = self.position(v, name)?;
            if self.amps.keys().any(|k| k[at] as u32 != fiducial) {
                return Err(Error::NotAtFiducial(format!("{name}@{v}")));
            }
            self.discard_register(v, name)?;
        }
        Ok(())
    }

    pub fn rename_register(&mut self, old: &str, new: &str) -> Result<()> {
        for v in 0..self.parties {
            if self.has_register(v, new) {
                return Err(Error::DuplicateRegister(format!("{new}@{v}")));
            }
            let at = self.position(v, old)?;
            self.layout[at].name = new.to_string();
        }
        Ok(())
    }

    /// Hands a register to another party under a new name. Amplitudes are
    /// untouched; only the ownership (and so the layout order) changes.
    pub fn move_register(
        &mut self,
        party: usize,
        name: &str,
        to: usize,
        new_name: &str,
    ) -> Result<()> {
        if to >= self.parties {
            return Err(Error::UnknownRegister(format!(
                "{new_name}@{to} (no such party)"
            )));
        }
        if self.has_register(to, new_name) {
            return Err(Error::DuplicateRegister(format!("{new_name}@{to}")));
        }
        let at = self.position(party, name)?;
        let mut spec = self.layout.remove(at);
        spec.party = to;
        spec.name = new_name.to_string();
        let dest = self.layout.partition_point(|r| r.party <= to);
        self.layout.insert(dest, spec);
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .map(|(mut k, a)| {
                let s = k.remove(at);
                k.insert(dest, s);
                (k, a)
            })
            .collect();
        Ok(())
    }

    /// Tensor product; both states must describe the same parties with
    /// disjoint registers.
    pub fn tensor(&self, other: &SparseState) -> Result<SparseState> {
        if self.parties != other.parties {
            return Err(Error::LayoutMismatch);
        }
        for r in &other.layout {
            if self.has_register(r.party, &r.name) {
                return Err(Error::DuplicateRegister(format!("{}@{}", r.name, r.party)));
            }
        }
        // merged order: by party, self's registers first
        let mut order: Vec<(usize, usize, bool, usize)> = self
            .layout
            .iter()
            .enumerate()
            .map(|(i, r)| (r.party, 0, false, i))
            .chain(
                other
                    .layout
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (r.party, 1, true, i)),
            )
            .collect();
        order.sort();
        let layout = order
            .iter()
            .map(|&(_, _, from_other, i)| {
                if from_other {
                    other.layout[i].clone()
                } else {
                    self.layout[i].clone()
                }
            })
            .collect();
        let mut amps = BTreeMap::new();
        for (ka, a) in &self.amps {
            for (kb, b) in &other.amps {
                let key = order
                    .iter()
                    .map(|&(_, _, o, i)| if o { kb[i] } else { ka[i] })
                    .collect();
                amps.insert(key, a * b);
            }
        }
        let mut gates = self.gates.clone();
        for (g, c) in &other.gates {
            *gates.entry(g.clone()).or_default() += c;
        }
        let mut out = SparseState {
            parties: self.parties,
            layout,
            amps,
            gates,
        };
        out.settle();
        Ok(out)
    }

    /// Relabels party `v` as `perm[v]`.
    pub fn permute_parties(&self, perm: &[usize]) -> Result<SparseState> {
        if perm.len() != self.parties {
            return Err(Error::LayoutMismatch);
        }
        let mut order: Vec<(usize, usize)> = self
            .layout
            .iter()
            .enumerate()
            .map(|(i, r)| (perm[r.party], i))
            .collect();
        order.sort();
        let layout = order
            .iter()
            .map(|&(p, i)| RegisterSpec {
                party: p,
                ..self.layout[i].clone()
            })
            .collect();
        let amps = self
            .amps
            .iter()
            .map(|(k, a)| (order.iter().map(|&(_, i)| k[i]).collect(), *a))
            .collect();
        Ok(SparseState {
            parties: self.parties,
            layout,
            amps,
            gates: self.gates.clone(),
        })
    }

    /// Splits off `regs` when the state is a product across that cut
    /// (Schmidt rank one). Returns `(regs part, rest)`, each normalized;
    /// global phases are assigned arbitrarily.
    pub fn split(&self, regs: &[(usize, &str)]) -> Result<(SparseState, SparseState)> {
        let mut inside = vec![false; self.layout.len()];
        for &(v, name) in regs {
            inside[self.position(v, name)?] = true;
        }
        let cut = |k: &Basis| -> (Basis, Basis) {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (i, &s) in k.iter().enumerate() {
                if inside[i] {
                    a.push(s)
                } else {
                    b.push(s)
                }
            }
            (a, b)
        };
        let mut matrix: BTreeMap<Basis, BTreeMap<Basis, Complex64>> = BTreeMap::new();
        let mut cols = BTreeSet::new();
        for (k, amp) in &self.amps {
            let (a, b) = cut(k);
            cols.insert(b.clone());
            matrix.entry(a).or_default().insert(b, *amp);
        }
        let (pa, pb, pivot) = self
            .amps
            .iter()
            .max_by(|x, y| x.1.norm_sqr().total_cmp(&y.1.norm_sqr()))
            .map(|(k, a)| {
                let (a0, b0) = cut(k);
                (a0, b0, *a)
            })
            .ok_or(Error::EmptyState)?;
        let get = |a: &Basis, b: &Basis| {
            matrix
                .get(a)
                .and_then(|row| row.get(b))
                .copied()
                .unwrap_or_default()
        };
        for a in matrix.keys() {
            for b in &cols {
                let lhs = get(a, b) * pivot;
                let rhs = get(a, &pb) * get(&pa, b);
                if (lhs - rhs).norm() > 1e-10 {
                    return Err(Error::NotDisentangled(
                        regs.iter()
                            .map(|(v, n)| format!("{n}@{v}"))
                            .collect::<Vec<_>>()
                            .join(","),
                    ));
                }
            }
        }
        let layout_a: Vec<_> = self
            .layout
            .iter()
            .zip(&inside)
            .filter(|(_, &i)| i)
            .map(|(r, _)| r.clone())
            .collect();
        let layout_b: Vec<_> = self
            .layout
            .iter()
            .zip(&inside)
            .filter(|(_, &i)| !i)
            .map(|(r, _)| r.clone())
            .collect();
        let mut part_a = SparseState {
            parties: self.parties,
            layout: layout_a,
            amps: matrix.keys().map(|a| (a.clone(), get(a, &pb))).collect(),
            gates: BTreeMap::new(),
        };
        let mut part_b = SparseState {
            parties: self.parties,
            layout: layout_b,
            amps: cols.iter().map(|b| (b.clone(), get(&pa, b))).collect(),
            gates: self.gates.clone(),
        };
        part_a.normalize()?;
        part_b.normalize()?;
        Ok((part_a, part_b))
    }

    fn normalize(&mut self) -> Result<()> {
        self.amps.retain(|_, a| a.norm() >= PRUNE);
        let norm = self.norm_sqr().sqrt();
        if norm < PRUNE {
            return Err(Error::EmptyState);
        }
        for a in self.amps.values_mut() {
            *a /= norm;
        }
        Ok(())
    }

    /// Prunes dust and corrects norm drift.
    fn settle(&mut self) {
        self.amps.retain(|_, a| a.norm() >= PRUNE);
        let n2 = self.norm_sqr();
        if (n2 - 1.0).abs() > RENORM && n2 > 0.0 {
            let s = n2.sqrt();
            for a in self.amps.values_mut() {
                *a /= s;
            }
        }
    }

    fn map_components(
        &mut self,
        mut f: impl FnMut(&Basis, Complex64, &mut BTreeMap<Basis, Complex64>),
    ) {
        let mut out = BTreeMap::new();
        for (k, a) in &self.amps {
            f(k, *a, &mut out);
        }
        self.amps = out;
        self.settle();
    }

    fn apply_at(&mut self, at: usize, gate: &Gate, control: Option<(usize, u8)>) -> Result<()> {
        if gate.dim() != self.layout[at].dim as usize {
            return Err(Error::NonUnitary(format!(
                "{} has dimension {}, register {} has {}",
                gate.label,
                gate.dim(),
                self.layout[at].name,
                self.layout[at].dim
            )));
        }
        self.map_components(|k, a, out| {
            if let Some((c, v)) = control {
                if k[c] != v {
                    *out.entry(k.clone()).or_default() += a;
                    return;
                }
            }
            let s = k[at] as usize;
            for (j, row) in gate.matrix.iter().enumerate() {
                let m = row[s];
                if m.norm() > 0.0 {
                    let mut key = k.clone();
                    key[at] = j as u8;
                    *out.entry(key).or_default() += a * m;
                }
            }
        });
        Ok(())
    }

    pub fn apply_local(&mut self, party: usize, name: &str, gate: &Gate) -> Result<()> {
        let at = self.position(party, name)?;
        self.apply_at(at, gate, None)?;
        self.tally(&gate.label, 1);
        Ok(())
    }

    /// `gate` on `name` at every party.
    pub fn apply_all_parties(&mut self, name: &str, gate: &Gate) -> Result<()> {
        for at in self.positions(name)? {
            self.apply_at(at, gate, None)?;
        }
        self.tally(&gate.label, self.parties);
        Ok(())
    }

    /// At every party, `gate` on `target` when the party's `control` holds
    /// `value`.
    pub fn apply_controlled_all(
        &mut self,
        control: &str,
        value: u32,
        target: &str,
        gate: &Gate,
    ) -> Result<()> {
        let ctrl = self.positions(control)?;
        let tgt = self.positions(target)?;
        for (c, t) in ctrl.into_iter().zip(tgt) {
            self.apply_at(t, gate, Some((c, value as u8)))?;
        }
        self.tally(&format!("c-{}", gate.label), self.parties);
        Ok(())
    }

    /// A unitary on several registers at once, the first register being the
    /// most significant digit of the row index.
    pub fn apply_dense(&mut self, regs: &[(usize, &str)], gate: &Gate) -> Result<()> {
        let at: Vec<usize> = regs
            .iter()
            .map(|&(v, n)| self.position(v, n))
            .collect::<Result<_>>()?;
        let dims: Vec<usize> = at.iter().map(|&p| self.layout[p].dim as usize).collect();
        let total: usize = dims.iter().product();
        if gate.dim() != total {
            return Err(Error::NonUnitary(format!(
                "{} is not {total}-dimensional",
                gate.label
            )));
        }
        self.map_components(|k, a, out| {
            let col = at
                .iter()
                .zip(&dims)
                .fold(0, |acc, (&p, &d)| acc * d + k[p] as usize);
            for (row, r) in gate.matrix.iter().enumerate() {
                let m = r[col];
                if m.norm() == 0.0 {
                    continue;
                }
                let mut key = k.clone();
                let mut rest = row;
                for (&p, &d) in at.iter().zip(&dims).rev() {
                    key[p] = (rest % d) as u8;
                    rest /= d;
                }
                *out.entry(key).or_default() += a * m;
            }
        });
        self.tally(&gate.label, 1);
        Ok(())
    }

    /// Writes (or erases) `f(inputs)` into `out_reg`, component by component.
    ///
    /// `f` receives each party's tuple of `in_regs` symbols and returns one
    /// output symbol per party. On [`Pass::Compute`] every `out_reg` must be
    /// at its fiducial; on [`Pass::Uncompute`] it must hold exactly `f`'s
    /// value, and is reset to the fiducial.
    pub fn apply_function<F>(
        &mut self,
        in_regs: &[&str],
        out_reg: &str,
        pass: Pass,
        mut f: F,
    ) -> Result<()>
    where
        F: FnMut(&[Vec<u32>]) -> Result<Vec<u32>>,
    {
        let ins: Vec<Vec<usize>> = in_regs
            .iter()
            .map(|r| self.positions(r))
            .collect::<Result<_>>()?;
        let outs = self.positions(out_reg)?;
        let fiducial: Vec<u8> = (0..self.parties)
            .map(|v| self.layout[outs[v]].fiducial as u8)
            .collect();
        let dims: Vec<u32> = (0..self.parties)
            .map(|v| self.layout[outs[v]].dim)
            .collect();
        let mut memo: HashMap<Vec<Vec<u32>>, Vec<u32>> = HashMap::new();
        let mut out = BTreeMap::new();
        for (k, a) in &self.amps {
            let inputs: Vec<Vec<u32>> = (0..self.parties)
                .map(|v| ins.iter().map(|pos| k[pos[v]] as u32).collect())
                .collect();
            let value = match memo.get(&inputs) {
                Some(v) => v.clone(),
                None => {
                    let v = f(&inputs)?;
                    if v.len() != self.parties {
                        return Err(Error::InputLength {
                            expected: self.parties,
                            got: v.len(),
                        });
                    }
                    memo.insert(inputs, v.clone());
                    v
                }
            };
            let mut key = k.clone();
            for v in 0..self.parties {
                if value[v] >= dims[v] {
                    return Err(Error::SymbolOutOfRange {
                        register: out_reg.into(),
                        symbol: value[v],
                        dim: dims[v],
                    });
                }
                match pass {
                    Pass::Compute => {
                        if key[outs[v]] != fiducial[v] {
                            return Err(Error::NotAtFiducial(out_reg.to_string()));
                        }
                        key[outs[v]] = value[v] as u8;
                    }
                    Pass::Uncompute => {
                        if key[outs[v]] as u32 != value[v] {
                            return Err(Error::UncomputeMismatch(out_reg.to_string()));
                        }
                        key[outs[v]] = fiducial[v];
                    }
                }
            }
            out.insert(key, *a);
        }
        self.amps = out;
        Ok(())
    }

    /// Runs a classical subroutine coherently: once per distinct input in the
    /// support, checking that every run has the same communication pattern.
    pub fn apply_subroutine<P: SymbolProgram>(
        &mut self,
        topology: &Topology,
        program: &P,
        in_regs: &[&str],
        out_reg: &str,
        global: &GlobalInfo,
        pass: Pass,
    ) -> Result<CostReport> {
        let mut seen: Option<(CommPattern, CostReport)> = None;
        self.apply_function(in_regs, out_reg, pass, |inputs| {
            let exec = crate::runtime::run_classical(topology, program, inputs, global)?;
            let pattern = exec.trace.pattern(exec.cost.rounds);
            match &seen {
                None => seen = Some((pattern, exec.cost)),
                Some((p, c)) => {
                    if *p != pattern || *c != exec.cost {
                        return Err(Error::NotOblivious(program.name()));
                    }
                }
            }
            Ok(exec.outputs)
        })?;
        let cost = match seen {
            Some((_, c)) => c,
            None => return Err(Error::EmptyState),
        };
        let label = match pass {
            Pass::Compute => program.name(),
            Pass::Uncompute => format!("{}⁻¹", program.name()),
        };
        self.tally(&label, 1);
        Ok(cost)
    }

    /// Multiplies each component by `exp(i · phase · #parties whose name
    /// register shows trigger)`.
    pub fn phase_kick(&mut self, name: &str, trigger: u32, phase_per_party: f64) -> Result<()> {
        self.phase_kick_with(&[name], |_, s| {
            if s[0] == trigger {
                phase_per_party
            } else {
                0.0
            }
        })
    }

    /// Per-party phases chosen from the party's symbols in `regs`; the
    /// component picks up the sum.
    pub fn phase_kick_with<F>(&mut self, regs: &[&str], phase: F) -> Result<()>
    where
        F: Fn(usize, &[u32]) -> f64,
    {
        let pos: Vec<Vec<usize>> = regs
            .iter()
            .map(|r| self.positions(r))
            .collect::<Result<_>>()?;
        let mut local = vec![0u32; regs.len()];
        for (k, a) in self.amps.iter_mut() {
            let mut total = 0.0;
            for v in 0..self.parties {
                for (slot, p) in local.iter_mut().zip(&pos) {
                    *slot = k[p[v]] as u32;
                }
                total += phase(v, &local);
            }
            if total != 0.0 {
                *a *= Complex64::from_polar(1.0, total);
            }
        }
        self.tally("phase", self.parties);
        Ok(())
    }

    /// Global factor −1.
    pub fn negate(&mut self) {
        for a in self.amps.values_mut() {
            *a = -*a;
        }
    }

    pub fn local_binary_op(
        &mut self,
        party: usize,
        source: &str,
        target: &str,
        op: &BinaryOp,
    ) -> Result<()> {
        let s = self.position(party, source)?;
        let t = self.position(party, target)?;
        let tgt_dim = self.layout[t].dim;
        op.check(self.layout[s].dim, tgt_dim)?;
        self.amps = std::mem::take(&mut self.amps)
            .into_iter()
            .map(|(mut k, a)| {
                k[t] = op.eval(k[s] as u32, k[t] as u32, tgt_dim) as u8;
                (k, a)
            })
            .collect();
        self.tally(&op.label(tgt_dim), 1);
        Ok(())
    }

    pub fn local_binary_op_all(&mut self, source: &str, target: &str, op: &BinaryOp) -> Result<()> {
        for v in 0..self.parties {
            self.local_binary_op(v, source, target, op)?;
        }
        Ok(())
    }

    /// Applies a classical reversible map to basis strings. Fails if two
    /// components collide or a symbol leaves its register's range.
    pub fn classical_map<F>(&mut self, label: &str, f: F) -> Result<()>
    where
        F: Fn(&[u8]) -> Basis,
    {
        let mut out = BTreeMap::new();
        for (k, a) in &self.amps {
            let key = f(k);
            if key.len() != self.layout.len() {
                return Err(Error::LayoutMismatch);
            }
            for (s, r) in key.iter().zip(&self.layout) {
                if *s as u32 >= r.dim {
                    return Err(Error::SymbolOutOfRange {
                        register: r.name.clone(),
                        symbol: *s as u32,
                        dim: r.dim,
                    });
                }
            }
            if out.insert(key, *a).is_some() {
                return Err(Error::NonBijective);
            }
        }
        self.amps = out;
        self.tally(label, 1);
        Ok(())
    }

    /// Total probability of the components satisfying `pred`.
    pub fn probability<F: Fn(&[u8]) -> bool>(&self, pred: F) -> f64 {
        self.amps
            .iter()
            .filter(|(k, _)| pred(k))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Every outcome of measuring `names` at all parties in the computational
    /// basis, sorted by outcome.
    pub fn branches(&self, names: &[&str]) -> Result<Vec<MeasurementBranch>> {
        let mut targets = Vec::new();
        for name in names {
            for (v, p) in self.positions(name)?.into_iter().enumerate() {
                targets.push((v, name.to_string(), p));
            }
        }
        targets.sort();
        let mut groups: BTreeMap<Basis, BTreeMap<Basis, Complex64>> = BTreeMap::new();
        for (k, a) in &self.amps {
            let outcome: Basis = targets.iter().map(|t| k[t.2]).collect();
            groups.entry(outcome).or_default().insert(k.clone(), *a);
        }
        let mut result = Vec::new();
        for (outcome, amps) in groups {
            let p: f64 = amps.values().map(|a| a.norm_sqr()).sum();
            if p <= BRANCH_CUTOFF {
                continue;
            }
            let mut state = SparseState {
                parties: self.parties,
                layout: self.layout.clone(),
                amps,
                gates: self.gates.clone(),
            };
            state.normalize()?;
            state.tally("measure", targets.len());
            let outcomes = targets
                .iter()
                .zip(&outcome)
                .map(|((v, name, _), &s)| Outcome {
                    party: *v,
                    register: name.clone(),
                    value: s as u32,
                })
                .collect();
            result.push(MeasurementBranch {
                outcomes,
                probability: p,
                state,
            });
        }
        Ok(result)
    }

    /// Samples one branch.
    pub fn measure<R: Rng>(&self, names: &[&str], rng: &mut R) -> Result<MeasurementBranch> {
        let mut branches = self.branches(names)?;
        let total: f64 = branches.iter().map(|b| b.probability).sum();
        let mut u = rng.gen::<f64>() * total;
        let last = branches.len().checked_sub(1).ok_or(Error::EmptyState)?;
        let pick = branches
            .iter()
            .position(|b| {
                u -= b.probability;
                u < 0.0
            })
            .unwrap_or(last);
        Ok(branches.swap_remove(pick))
    }

    pub fn measure_seeded(&self, names: &[&str], seed: u64) -> Result<MeasurementBranch> {
        self.measure(names, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn same_layout(&self, other: &SparseState) -> bool {
        self.parties == other.parties
            && self.layout.len() == other.layout.len()
            && self
                .layout
                .iter()
                .zip(&other.layout)
                .all(|(a, b)| a.party == b.party && a.name == b.name && a.dim == b.dim)
    }

    /// `|⟨reference|self⟩|²`.
    pub fn fidelity(&self, reference: &SparseState) -> Result<f64> {
        if !self.same_layout(reference) {
            return Err(Error::LayoutMismatch);
        }
        let overlap: Complex64 = reference
            .amps
            .iter()
            .filter_map(|(k, r)| self.amps.get(k).map(|a| r.conj() * a))
            .sum();
        Ok(overlap.norm_sqr())
    }

    /// Largest per-component amplitude difference.
    pub fn distance(&self, other: &SparseState) -> Result<f64> {
        if !self.same_layout(other) {
            return Err(Error::LayoutMismatch);
        }
        let keys: BTreeSet<&Basis> = self.amps.keys().chain(other.amps.keys()).collect();
        Ok(keys
            .into_iter()
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(0.0, f64::max))
    }

    pub fn basis_string(basis: &[u8]) -> String {
        basis
            .iter()
            .map(|&s| char::from_digit(s as u32, 36).unwrap_or('?'))
            .collect()
    }

    pub fn to_entries(&self) -> Vec<AmplitudeEntry> {
        let mut entries: Vec<_> = self
            .amps
            .iter()
            .map(|(k, a)| AmplitudeEntry {
                basis: Self::basis_string(k),
                re: a.re,
                im: a.im,
            })
            .collect();
        entries.sort_by(|a, b| a.basis.cmp(&b.basis));
        entries
    }

    pub fn from_entries(
        parties: usize,
        layout: Vec<RegisterSpec>,
        entries: &[AmplitudeEntry],
    ) -> Result<SparseState> {
        let mut state = SparseState::init(parties, layout)?;
        let mut amps = BTreeMap::new();
        for e in entries {
            let key: Basis = e
                .basis
                .chars()
                .map(|c| c.to_digit(36).map(|d| d as u8))
                .collect::<Option<_>>()
                .ok_or(Error::LayoutMismatch)?;
            if key.len() != state.layout.len() {
                return Err(Error::LayoutMismatch);
            }
            amps.insert(key, Complex64::new(e.re, e.im));
        }
        state.amps = amps;
        state.settle();
        Ok(state)
    }

    pub fn dump(&self) -> StateDump {
        StateDump {
            parties: self.parties,
            layout: self.layout.clone(),
            amplitudes: self.to_entries(),
        }
    }

    pub fn from_dump(dump: &StateDump) -> Result<SparseState> {
        SparseState::from_entries(dump.parties, dump.layout.clone(), &dump.amplitudes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::GlobalInfo;
    use crate::subroutines::{flags, H0Flooding};
    use crate::topology::{catalog, CatalogGraph};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn qubits(n: usize, name: &str) -> SparseState {
        let mut s = SparseState::new(n);
        s.add_register_all(name, 2, 0).unwrap();
        s
    }

    #[test]
    fn init_examples() {
        let s = qubits(2, "R");
        assert_eq!(
            s.to_entries(),
            vec![AmplitudeEntry {
                basis: "00".into(),
                re: 1.0,
                im: 0.0
            }]
        );
        let s = SparseState::init(1, vec![RegisterSpec::new(0, "T", 3).with_fiducial(2)]).unwrap();
        assert_eq!(s.amplitude(&[2]), c(1.0));
        let s = SparseState::new(0);
        assert_eq!(s.amplitude(&[]), c(1.0));
        assert!(SparseState::init(1, vec![RegisterSpec::new(0, "T", 3).with_fiducial(3)]).is_err());
    }

    #[test]
    fn layout_orders_by_party_then_registration() {
        let mut s = SparseState::new(2);
        s.add_register(RegisterSpec::new(1, "A", 2)).unwrap();
        s.add_register(RegisterSpec::new(0, "B", 2)).unwrap();
        s.add_register(RegisterSpec::new(1, "C", 2)).unwrap();
        s.add_register(RegisterSpec::new(0, "D", 2)).unwrap();
        let names: Vec<_> = s
            .layout()
            .iter()
            .map(|r| (r.party, r.name.as_str()))
            .collect();
        assert_eq!(names, vec![(0, "B"), (0, "D"), (1, "A"), (1, "C")]);
    }

    #[test]
    fn all_party_gates() {
        let mut s = qubits(3, "R");
        s.apply_all_parties("R", &Gate::hadamard()).unwrap();
        assert_eq!(s.len(), 8);
        for (_, a) in s.amplitudes() {
            assert!((a - c(1.0 / 8f64.sqrt())).norm() < 1e-15);
        }
        let before = s.clone();
        s.apply_all_parties("R", &Gate::identity(2)).unwrap();
        assert!(s.distance(&before).unwrap() < 1e-15);
        assert!(Gate::real("bad", &[vec![1.0, 1.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn coherent_h0_and_its_inverse() {
        let g = catalog(CatalogGraph::Complete, 2).unwrap();
        let global = GlobalInfo { n: 2 };
        // (|00⟩ + |11⟩)/√2
        let mut bell = qubits(2, "X");
        bell.apply_local(0, "X", &Gate::hadamard()).unwrap();
        let x0 = bell.position(0, "X").unwrap();
        let x1 = bell.position(1, "X").unwrap();
        bell.classical_map("copy", |k| {
            let mut k = k.to_vec();
            k[x1] ^= k[x0];
            k
        })
        .unwrap();
        let start = {
            let mut b = bell.clone();
            b.add_register_all("Y", 2, flags::TRUE).unwrap();
            b
        };
        let mut state = start.clone();
        let h0 = H0Flooding::new(2);
        let fwd = state
            .apply_subroutine(&g, &h0, &["X"], "Y", &global, Pass::Compute)
            .unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // layout X0 Y0 X1 Y1
        assert!((state.amplitude(&[0, 0, 0, 0]) - c(h)).norm() < 1e-15);
        assert!((state.amplitude(&[1, 1, 1, 1]) - c(h)).norm() < 1e-15);
        let back = state
            .apply_subroutine(&g, &h0, &["X"], "Y", &global, Pass::Uncompute)
            .unwrap();
        assert_eq!(fwd, back);
        assert_eq!(fwd.then(&back).qubits_sent, 2 * fwd.qubits_sent);
        assert!(state.distance(&start).unwrap() < 1e-15);
        // erasing a value that is not there
        let mut wrong = start.clone();
        assert!(matches!(
            wrong.apply_subroutine(&g, &h0, &["X"], "Y", &global, Pass::Uncompute),
            Err(Error::UncomputeMismatch(_))
        ));
    }

    #[test]
    fn phase_kick_counts_triggered_parties() {
        let mut s = qubits(3, "R");
        s.apply_all_parties("R", &Gate::pauli_x()).unwrap();
        s.phase_kick("R", 1, 0.7).unwrap();
        assert!((s.amplitude(&[1, 1, 1]) - Complex64::from_polar(1.0, 2.1)).norm() < 1e-14);
        s.phase_kick("R", 0, 0.3).unwrap();
        assert!((s.amplitude(&[1, 1, 1]) - Complex64::from_polar(1.0, 2.1)).norm() < 1e-14);
    }

    #[test]
    fn measurement_examples() {
        let mut s = qubits(1, "R");
        s.apply_all_parties("R", &Gate::hadamard()).unwrap();
        let b = s.branches(&["R"]).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b.iter().all(|b| (b.probability - 0.5).abs() < 1e-15));

        let mut s = qubits(2, "R");
        s.apply_local(0, "R", &Gate::hadamard()).unwrap();
        s.apply_local(1, "R", &Gate::pauli_x()).unwrap();
        let (a, b) = (s.position(0, "R").unwrap(), s.position(1, "R").unwrap());
        s.classical_map("cnot", |k| {
            let mut k = k.to_vec();
            k[b] ^= k[a];
            k
        })
        .unwrap();
        let outs: Vec<Vec<u32>> = s
            .branches(&["R"])
            .unwrap()
            .iter()
            .map(|b| b.values("R"))
            .collect();
        assert_eq!(outs, vec![vec![0, 1], vec![1, 0]]);
        let x = s.measure_seeded(&["R"], 7).unwrap();
        let y = s.measure_seeded(&["R"], 7).unwrap();
        assert_eq!(x.outcomes, y.outcomes);
    }

    #[test]
    fn fidelity_examples() {
        let zero = qubits(1, "R");
        let mut one = zero.clone();
        one.apply_all_parties("R", &Gate::pauli_x()).unwrap();
        let mut plus = zero.clone();
        plus.apply_all_parties("R", &Gate::hadamard()).unwrap();
        assert!((zero.fidelity(&zero).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(zero.fidelity(&one).unwrap(), 0.0);
        assert!((plus.fidelity(&zero).unwrap() - 0.5).abs() < 1e-15);
        assert!(zero.fidelity(&qubits(1, "S")).is_err());
    }

    #[test]
    fn binary_ops() {
        let mut s = SparseState::new(1);
        s.add_register(RegisterSpec::new(0, "a", 2).with_fiducial(1))
            .unwrap();
        s.add_register(RegisterSpec::new(0, "b", 2)).unwrap();
        s.local_binary_op(0, "a", "b", &BinaryOp::Xor).unwrap();
        assert_eq!(s.amplitude(&[1, 1]), c(1.0));
        s.local_binary_op(0, "a", "b", &BinaryOp::Xor).unwrap();
        assert_eq!(s.amplitude(&[1, 0]), c(1.0));

        let mut t = SparseState::new(1);
        t.add_register(RegisterSpec::new(0, "a", 3).with_fiducial(2))
            .unwrap();
        t.add_register(RegisterSpec::new(0, "b", 3).with_fiducial(2))
            .unwrap();
        t.local_binary_op(0, "a", "b", &BinaryOp::AddMod).unwrap();
        assert_eq!(t.amplitude(&[2, 1]), c(1.0));
        let bad = BinaryOp::Custom(vec![vec![0, 0, 1]; 3]);
        assert!(matches!(
            t.local_binary_op(0, "a", "b", &bad),
            Err(Error::NonBijective)
        ));
    }

    #[test]
    fn split_and_discard() {
        let mut s = qubits(2, "R");
        s.apply_local(0, "R", &Gate::hadamard()).unwrap();
        let (a, rest) = s.split(&[(0, "R")]).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(rest.len(), 1);
        let (a0, a1) = (s.position(0, "R").unwrap(), s.position(1, "R").unwrap());
        s.classical_map("cnot", |k| {
            let mut k = k.to_vec();
            k[a1] ^= k[a0];
            k
        })
        .unwrap();
        assert!(matches!(
            s.split(&[(0, "R")]),
            Err(Error::NotDisentangled(_))
        ));
        assert!(matches!(
            s.discard_register(0, "R"),
            Err(Error::NotDisentangled(_))
        ));
    }

    #[test]
    fn move_and_json_round_trip() {
        let mut s = qubits(2, "Q");
        s.apply_local(1, "Q", &Gate::hadamard()).unwrap();
        s.move_register(1, "Q", 0, "Q2").unwrap();
        assert_eq!(s.layout()[1].name, "Q2");
        let back = SparseState::from_entries(2, s.layout().to_vec(), &s.to_entries()).unwrap();
        assert!((back.fidelity(&s).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tensor_and_permute() {
        let mut a = SparseState::new(2);
        a.add_register(RegisterSpec::new(1, "A", 2)).unwrap();
        a.apply_local(1, "A", &Gate::pauli_x()).unwrap();
        let mut b = SparseState::new(2);
        b.add_register(RegisterSpec::new(0, "B", 3).with_fiducial(2))
            .unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.amplitude(&[2, 1]), c(1.0));
        let p = ab.permute_parties(&[1, 0]).unwrap();
        assert_eq!(p.layout()[0].name, "A");
        assert_eq!(p.amplitude(&[1, 2]), c(1.0));
    }
}
