//! Dense linear algebra over GF(2) with bit-packed rows.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_indices(len: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut v = BitVec::zeros(len);
        for i in idx {
            v.toggle(i);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        if self.get(i) != v {
            self.toggle(i);
        }
    }

    pub fn toggle(&mut self, i: usize) {
        self.words[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        debug_assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn dot(&self, other: &BitVec) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum::<u32>()
            % 2
            == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }

    fn first_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }
}

/// Incremental row-echelon basis. Each stored row has a distinct leading bit.
#[derive(Clone, Debug, Default)]
pub struct EchelonBasis {
    rows: Vec<(usize, BitVec)>,
}

impl EchelonBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v` against the basis.
    pub fn reduce(&self, v: &BitVec) -> BitVec {
        let mut v = v.clone();
        for (lead, row) in &self.rows {
            if v.get(*lead) {
                v.xor_assign(row);
            }
        }
        v
    }

    /// Adds `v`; returns false when it was already in the span.
    pub fn insert(&mut self, v: &BitVec) -> bool {
        let r = self.reduce(v);
        match r.first_one() {
            None => false,
            Some(lead) => {
                for (_, row) in &mut self.rows {
                    if row.get(lead) {
                        row.xor_assign(&r);
                    }
                }
                self.rows.push((lead, r));
                true
            }
        }
    }

    pub fn contains(&self, v: &BitVec) -> bool {
        self.reduce(v).is_zero()
    }
}

pub fn rank(rows: &[BitVec]) -> usize {
    let mut b = EchelonBasis::new();
    rows.iter().filter(|r| b.insert(r)).count()
}

/// Finds `x` with `sum_j x_j * cols[j] = rhs`, or `None`. Free variables are
/// set to zero, so the answer is a deterministic function of the inputs.
pub fn solve(cols: &[BitVec], rhs: &BitVec) -> Option<BitVec> {
    // Eliminate on the augmented column set, tracking combinations.
    let m = cols.len();
    let mut basis: Vec<(usize, BitVec, BitVec)> = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        let mut v = c.clone();
        let mut combo = BitVec::from_indices(m, [j]);
        for (lead, row, rc) in &basis {
            if v.get(*lead) {
                v.xor_assign(row);
                combo.xor_assign(rc);
            }
        }
        if let Some(lead) = v.first_one() {
            for (_, row, rc) in &mut basis {
                if row.get(lead) {
                    row.xor_assign(&v);
                    rc.xor_assign(&combo);
                }
            }
            basis.push((lead, v, combo));
        }
    }
    let mut r = rhs.clone();
    let mut x = BitVec::zeros(m);
    for (lead, row, rc) in &basis {
        if r.get(*lead) {
            r.xor_assign(row);
            x.xor_assign(rc);
        }
    }
    r.is_zero().then_some(x)
}

/// Basis of `{x : rows · x = 0}` for vectors of length `ncols`.
pub fn nullspace(rows: &[BitVec], ncols: usize) -> Vec<BitVec> {
    // Reduced row echelon form, then one basis vector per free column.
    let mut b = EchelonBasis::new();
    for r in rows {
        b.insert(r);
    }
    let pivots: Vec<(usize, BitVec)> = b.rows.clone();
    let pivot_cols: std::collections::HashSet<usize> = pivots.iter().map(|(l, _)| *l).collect();
    let mut out = Vec::new();
    for free in (0..ncols).filter(|c| !pivot_cols.contains(c)) {
        let mut x = BitVec::from_indices(ncols, [free]);
        for (lead, row) in &pivots {
            if row.get(free) {
                x.toggle(*lead);
            }
        }
        out.push(x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rand_rows(seed: u64, r: usize, c: usize) -> Vec<BitVec> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        (0..r)
            .map(|_| {
                let mut v = BitVec::zeros(c);
                for i in 0..c {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    if s >> 62 & 1 == 1 {
                        v.toggle(i);
                    }
                }
                v
            })
            .collect()
    }

    proptest! {
        #[test]
        fn nullspace_is_annihilated(seed in any::<u64>(), r in 1usize..12, c in 1usize..80) {
            let rows = rand_rows(seed, r, c);
            let ns = nullspace(&rows, c);
            prop_assert_eq!(ns.len() + rank(&rows), c);
            for x in &ns {
                for row in &rows {
                    prop_assert!(!row.dot(x));
                }
            }
        }

        #[test]
        fn solve_reproduces_rhs(seed in any::<u64>(), m in 1usize..20, n in 1usize..70) {
            let cols = rand_rows(seed, m, n);
            let pick = rand_rows(seed ^ 7, 1, m).pop().unwrap();
            let mut rhs = BitVec::zeros(n);
            for j in pick.ones() {
                rhs.xor_assign(&cols[j]);
            }
            let x = solve(&cols, &rhs).unwrap();
            let mut back = BitVec::zeros(n);
            for j in x.ones() {
                back.xor_assign(&cols[j]);
            }
            prop_assert_eq!(back, rhs);
        }
    }

    #[test]
    fn inconsistent_system() {
        let cols = vec![BitVec::from_indices(3, [0, 1])];
        assert!(solve(&cols, &BitVec::from_indices(3, [2])).is_none());
    }
}
