//! Code definitions: the toric code, honeycomb Floquet codes on a torus,
//! externally supplied Floquet lattices, and their measurement schedules.

mod floquet;
mod schedule;
mod toric;

use serde::{Deserialize, Serialize};

use crate::circuit::{Axis, PauliTerm};
use crate::gf2::BitVec;

pub use floquet::{
    build_honeycomb, derive_observables, export_lattice, load_floquet_lattice, FloquetEdge,
    FloquetLattice, ObservableSpec,
};
pub use schedule::{
    make_schedule, Check, CheckKind, CodeDef, DetectorTemplate, FinalDetectorTemplate,
    ObservableTemplate, RoundRange, ScheduleTemplate,
};
pub use toric::build_toric;

/// A Pauli operator without phase, stored as terms sorted by qubit.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliString {
    terms: Vec<(usize, char)>,
}

impl PauliString {
    pub fn new(terms: impl IntoIterator<Item = PauliTerm>) -> Self {
        let mut s = PauliString::default();
        for t in terms {
            s.mul_term(t);
        }
        s
    }

    pub fn uniform(axis: Axis, qubits: impl IntoIterator<Item = usize>) -> Self {
        PauliString::new(qubits.into_iter().map(|q| PauliTerm::new(q, axis)))
    }

    pub fn terms(&self) -> Vec<PauliTerm> {
        self.terms
            .iter()
            .map(|&(q, c)| PauliTerm::new(q, Axis::from_letter(c).unwrap()))
            .collect()
    }

    pub fn weight(&self) -> usize {
        self.terms.len()
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|t| t.0)
    }

    pub fn axis_at(&self, q: usize) -> Option<Axis> {
        self.terms
            .binary_search_by_key(&q, |t| t.0)
            .ok()
            .map(|i| Axis::from_letter(self.terms[i].1).unwrap())
    }

    /// Multiplies in a single-qubit Pauli, ignoring phase.
    pub fn mul_term(&mut self, t: PauliTerm) {
        match self.terms.binary_search_by_key(&t.qubit, |x| x.0) {
            Ok(i) => {
                let (x1, z1) = Axis::from_letter(self.terms[i].1).unwrap().bits();
                let (x2, z2) = t.axis.bits();
                match Axis::from_bits(x1 ^ x2, z1 ^ z2) {
                    Some(a) => self.terms[i].1 = a.letter(),
                    None => {
                        self.terms.remove(i);
                    }
                }
            }
            Err(i) => self.terms.insert(i, (t.qubit, t.axis.letter())),
        }
    }

    pub fn mul(&mut self, other: &PauliString) {
        for t in other.terms() {
            self.mul_term(t);
        }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        let mut anti = false;
        for &(q, c) in &self.terms {
            if let Some(b) = other.axis_at(q) {
                let a = Axis::from_letter(c).unwrap();
                anti ^= a != b;
            }
        }
        !anti
    }

    pub fn is_identity(&self) -> bool {
        self.terms.is_empty()
    }

    /// All non-identity factors are `axis`.
    pub fn is_uniform(&self, axis: Axis) -> bool {
        self.terms.iter().all(|t| t.1 == axis.letter())
    }

    /// Symplectic vector `(x | z)` of length `2n`.
    pub fn symplectic(&self, n: usize) -> BitVec {
        let mut v = BitVec::zeros(2 * n);
        for t in self.terms() {
            let (x, z) = t.axis.bits();
            if x {
                v.toggle(t.qubit);
            }
            if z {
                v.toggle(n + t.qubit);
            }
        }
        v
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("I");
        }
        for (i, (q, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str("*")?;
            }
            write!(f, "{c}{q}")?;
        }
        Ok(())
    }
}

/// A stabilizer code on `n` data qubits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizerCode {
    pub name: String,
    pub n: usize,
    pub stabilizers: Vec<PauliString>,
    pub logical_x: Vec<PauliString>,
    pub logical_z: Vec<PauliString>,
    pub k: usize,
    pub d: usize,
}

impl StabilizerCode {
    /// Every broken invariant, described. Empty when the code is valid.
    pub fn check(&self) -> Vec<String> {
        let mut out = Vec::new();
        let s = &self.stabilizers;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                if !s[i].commutes_with(&s[j]) {
                    out.push(format!("stabilizers {i} and {j} anticommute"));
                }
            }
        }
        let rows: Vec<BitVec> = s.iter().map(|p| p.symplectic(self.n)).collect();
        let r = crate::gf2::rank(&rows);
        if r + self.k != self.n {
            out.push(format!("stabilizer rank {r} != n - k = {}", self.n - self.k));
        }
        if self.logical_x.len() != self.k || self.logical_z.len() != self.k {
            out.push("logical operator count differs from k".into());
        }
        for (name, ls) in [("X", &self.logical_x), ("Z", &self.logical_z)] {
            for (i, l) in ls.iter().enumerate() {
                if let Some(j) = s.iter().position(|st| !st.commutes_with(l)) {
                    out.push(format!("logical {name}{i} anticommutes with stabilizer {j}"));
                }
            }
        }
        for (i, x) in self.logical_x.iter().enumerate() {
            for (j, z) in self.logical_z.iter().enumerate() {
                if x.commutes_with(z) == (i == j) {
                    out.push(format!("logical X{i} and Z{j} have wrong commutation"));
                }
            }
            for (j, x2) in self.logical_x.iter().enumerate() {
                if !x.commutes_with(x2) {
                    out.push(format!("logical X{i} and X{j} anticommute"));
                }
            }
        }
        for (i, z) in self.logical_z.iter().enumerate() {
            for (j, z2) in self.logical_z.iter().enumerate() {
                if !z.commutes_with(z2) {
                    out.push(format!("logical Z{i} and Z{j} anticommute"));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_products() {
        let mut a = PauliString::new([PauliTerm::new(0, Axis::X), PauliTerm::new(2, Axis::Z)]);
        a.mul(&PauliString::new([PauliTerm::new(0, Axis::Z), PauliTerm::new(2, Axis::Z)]));
        assert_eq!(a.to_string(), "Y0");
        let x = PauliString::uniform(Axis::X, [0, 1]);
        let z = PauliString::uniform(Axis::Z, [1, 2]);
        assert!(!x.commutes_with(&z));
        assert!(x.commutes_with(&PauliString::uniform(Axis::Z, [0, 1])));
    }
}
