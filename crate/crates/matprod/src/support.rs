//! Boolean support dynamics: patterns, column-support partitions, condition (E),
//! permutation conjugation and the windowed κ estimate.

use serde::{Deserialize, Serialize};

use crate::linalg::{Mat, Scalar, MAX_DIM};

/// Index sets over `0..d` are stored as bitmasks (bit `i` = row `i`).
pub type IndexSet = u32;

pub fn set_to_vec(s: IndexSet) -> Vec<usize> {
    (0..MAX_DIM).filter(|i| s >> i & 1 == 1).collect()
}

pub fn vec_to_set(v: &[usize]) -> IndexSet {
    v.iter().fold(0, |acc, &i| acc | 1 << i)
}

fn is_subset(a: IndexSet, b: IndexSet) -> bool {
    a & !b == 0
}

/// `𝓘(A)` as one bitmask per column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportPattern {
    d: usize,
    cols: Vec<IndexSet>,
}

impl SupportPattern {
    pub fn zeros(d: usize) -> Self {
        SupportPattern { d, cols: vec![0; d] }
    }

    pub fn identity(d: usize) -> Self {
        SupportPattern { d, cols: (0..d).map(|j| 1 << j).collect() }
    }

    pub fn of<T: Scalar>(m: &Mat<T>) -> Self {
        let d = m.dim();
        let cols = (0..d)
            .map(|j| {
                let n = m.col_norm(j);
                (0..d).filter(|&i| m.get(i, j).is_support(&n, d)).fold(0, |acc, i| acc | 1 << i)
            })
            .collect();
        SupportPattern { d, cols }
    }

    pub fn from_columns(d: usize, cols: Vec<IndexSet>) -> Self {
        assert_eq!(cols.len(), d);
        SupportPattern { d, cols }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.cols[j] >> i & 1 == 1
    }

    pub fn column(&self, j: usize) -> IndexSet {
        self.cols[j]
    }

    pub fn columns(&self) -> &[IndexSet] {
        &self.cols
    }

    pub fn is_zero(&self) -> bool {
        self.cols.iter().all(|&c| c == 0)
    }

    pub fn count(&self) -> usize {
        self.cols.iter().map(|c| c.count_ones() as usize).sum()
    }

    /// `𝓘(ABU_j) = ⋃_{i∈𝓘(BU_j)} 𝓘(AU_i)`.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.d, rhs.d, "dimension mismatch");
        let cols = rhs
            .cols
            .iter()
            .map(|&c| {
                let mut acc = 0;
                let mut rest = c;
                while rest != 0 {
                    let i = rest.trailing_zeros() as usize;
                    acc |= self.cols[i];
                    rest &= rest - 1;
                }
                acc
            })
            .collect();
        SupportPattern { d: self.d, cols }
    }

    /// Support of `M·V` given the support of `V`.
    pub fn apply(&self, v: IndexSet) -> IndexSet {
        set_to_vec(v).into_iter().fold(0, |acc, i| acc | self.cols[i])
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.d {
            for j in 0..self.d {
                if self.get(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn h(&self) -> usize {
        partition_pattern(self).h
    }

    pub fn h_star(&self) -> usize {
        partition_pattern(self).h_star
    }
}

pub fn bool_mul(p: &SupportPattern, q: &SupportPattern) -> SupportPattern {
    p.mul(q)
}

pub fn column_support<T: Scalar>(m: &Mat<T>, j: usize) -> Vec<usize> {
    set_to_vec(SupportPattern::of(m).column(j))
}

/// Canonical partition of the columns by support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnPartition {
    pub h: usize,
    pub h_star: usize,
    /// Support sets, in descending lexicographic order of their indicator vectors.
    pub i_sets: Vec<Vec<usize>>,
    pub j_sets: Vec<Vec<usize>>,
    /// `c_0 = 0 < c_1 < … < c_H = d`.
    pub cuts: Vec<usize>,
}

impl ColumnPartition {
    pub fn i_mask(&self, h: usize) -> IndexSet {
        vec_to_set(&self.i_sets[h])
    }

    /// Class index of column `j`.
    pub fn class_of(&self, j: usize) -> usize {
        self.j_sets.iter().position(|s| s.contains(&j)).expect("every column is classified")
    }

    /// The classes with nonempty support, in order.
    pub fn nonempty_classes(&self) -> &[Vec<usize>] {
        &self.j_sets[..self.h_star]
    }
}

/// Lexicographic key of the indicator vector `U(I)`: row 0 is the most
/// significant position, so larger key = lexicographically larger.
fn lex_key(s: IndexSet) -> u32 {
    s.reverse_bits()
}

pub fn partition_pattern(p: &SupportPattern) -> ColumnPartition {
    let mut sets: Vec<IndexSet> = p.cols.clone();
    sets.sort_by_key(|&s| std::cmp::Reverse(lex_key(s)));
    sets.dedup();
    let j_sets: Vec<Vec<usize>> =
        sets.iter().map(|&s| (0..p.d).filter(|&j| p.cols[j] == s).collect()).collect();
    let mut cuts = vec![0];
    for j in &j_sets {
        cuts.push(cuts.last().unwrap() + j.len());
    }
    ColumnPartition {
        h: sets.len(),
        h_star: sets.iter().filter(|&&s| s != 0).count(),
        i_sets: sets.iter().map(|&s| set_to_vec(s)).collect(),
        j_sets,
        cuts,
    }
}

pub fn partition<T: Scalar>(m: &Mat<T>) -> ColumnPartition {
    partition_pattern(&SupportPattern::of(m))
}

pub fn satisfies_e_pattern(p: &SupportPattern) -> bool {
    let c = &p.cols;
    (0..c.len()).all(|a| (a + 1..c.len()).all(|b| is_subset(c[a], c[b]) || is_subset(c[b], c[a])))
}

pub fn satisfies_e<T: Scalar>(m: &Mat<T>) -> bool {
    satisfies_e_pattern(&SupportPattern::of(m))
}

/// A permutation σ of `0..d`, acting by `S U_j = U_{σ(j)}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermSpec {
    pub sigma: Vec<usize>,
}

impl PermSpec {
    pub fn identity(d: usize) -> Self {
        PermSpec { sigma: (0..d).collect() }
    }

    pub fn is_identity(&self) -> bool {
        self.sigma.iter().enumerate().all(|(i, &s)| i == s)
    }

    pub fn is_bijective(&self) -> bool {
        let mut seen = vec![false; self.sigma.len()];
        self.sigma.iter().all(|&s| s < seen.len() && !std::mem::replace(&mut seen[s], true))
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.sigma.len()];
        for (i, &s) in self.sigma.iter().enumerate() {
            inv[s] = i;
        }
        PermSpec { sigma: inv }
    }

    pub fn matrix<T: Scalar>(&self) -> Mat<T> {
        let d = self.sigma.len();
        let mut m = Mat::zeros(d);
        for (j, &s) in self.sigma.iter().enumerate() {
            m.set(s, j, T::one());
        }
        m
    }
}

/// σ_A: maps `c_{h-1}..c_h` increasingly onto `J_h`.
pub fn sigma_permutation(p: &ColumnPartition) -> PermSpec {
    PermSpec { sigma: p.j_sets.iter().flatten().copied().collect() }
}

/// `S⁻¹MS`, i.e. entry `(i,j)` is `M(σ(i), σ(j))`.
pub fn conjugate<T: Scalar>(m: &Mat<T>, s: &PermSpec) -> Mat<T> {
    let d = m.dim();
    assert_eq!(d, s.sigma.len(), "dimension mismatch");
    let mut out = Mat::zeros(d);
    for i in 0..d {
        for j in 0..d {
            out.set(i, j, m.get(s.sigma[i], s.sigma[j]).clone());
        }
    }
    out
}

pub fn conjugate_pattern(p: &SupportPattern, s: &PermSpec) -> SupportPattern {
    let inv = s.inverse();
    let cols = (0..p.d)
        .map(|j| set_to_vec(p.cols[s.sigma[j]]).into_iter().fold(0, |acc, i| acc | 1 << inv.sigma[i]))
        .collect();
    SupportPattern { d: p.d, cols }
}

/// Windowed κ with stabilization flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub kappa: usize,
    /// Smallest `m` whose windowed limsup reaches `kappa`.
    pub r: usize,
    /// Windowed limsup of `H(P_{m,n})` for each `m ≤ m_max`.
    pub limsup: Vec<usize>,
    pub stabilized: bool,
}

/// Shortest window for which the quarter-window rules make sense.
pub const MIN_WINDOW: usize = 8;

/// `max_{m ≤ m_max} limsup_n H(P_{m,n})` on the window `n ≤ n_max`.
///
/// The limsup for a fixed `m` is read as the max of `H` over the second half of
/// the window; it counts as stabilized when that max is hit again in the last
/// quarter.
pub fn kappa_estimate_patterns(seq: &[SupportPattern], m_max: usize, n_max: usize) -> KappaEstimate {
    let n_max = n_max.min(seq.len());
    if n_max == 0 {
        return KappaEstimate { kappa: 0, r: 0, limsup: vec![], stabilized: false };
    }
    let d = seq[0].dim();
    let half = n_max.div_ceil(2);
    let quarter = n_max - n_max / 4;
    let m_max = m_max.min(half.saturating_sub(1));
    let mut limsup = Vec::with_capacity(m_max + 1);
    let mut recurs = Vec::with_capacity(m_max + 1);
    for m in 0..=m_max {
        let mut p = SupportPattern::identity(d);
        let (mut best, mut best_late) = (0, 0);
        for n in m + 1..=n_max {
            p = p.mul(&seq[n - 1]);
            if n >= half {
                let h = p.h();
                best = best.max(h);
                if n > quarter {
                    best_late = best_late.max(h);
                }
            }
        }
        limsup.push(best);
        recurs.push(best_late == best);
    }
    let kappa = *limsup.iter().max().unwrap();
    let r = limsup.iter().position(|&h| h == kappa).unwrap();
    KappaEstimate { kappa, r, limsup, stabilized: n_max >= MIN_WINDOW && recurs[r] }
}

pub fn kappa_estimate<T: Scalar>(seq: &[Mat<T>], m_max: usize, n_max: usize) -> KappaEstimate {
    let pats: Vec<SupportPattern> = seq.iter().take(n_max).map(SupportPattern::of).collect();
    kappa_estimate_patterns(&pats, m_max, n_max)
}
