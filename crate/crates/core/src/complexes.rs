//! Finite bigraded cochain complexes over Q.
//!
//! A slot is a pair `(degree, weight)`. Differentials raise the degree by one
//! and preserve the weight; a missing differential is zero. Every complex here
//! is finite, so homology is computed slot by slot with exact elimination.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use thiserror::Error;

use crate::linalg::{self, rat, LinalgError, Rational, SparseMatrix};
use crate::par;

pub type Slot = (i32, i32);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComplexError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("differential at slot {slot:?} has shape {found:?}, expected {expected:?}")]
    Shape { slot: Slot, found: (usize, usize), expected: (usize, usize) },
    #[error("d∘d is nonzero at slot {0:?}")]
    NotSquareZero(Slot),
    #[error("map does not commute with differentials at slot {0:?}")]
    NotChainMap(Slot),
    #[error("mixed-complex identity {identity} fails at slot {slot:?}")]
    MixedIdentityFailure { identity: &'static str, slot: Slot },
    #[error("slot {slot:?} has dimension {size}, above the limit of {limit}")]
    BasisTooLarge { slot: Slot, size: usize, limit: usize },
    #[error("empty degree window [{0}, {1}]")]
    EmptyWindow(i32, i32),
}

fn next(s: Slot) -> Slot {
    (s.0 + 1, s.1)
}

fn prev(s: Slot) -> Slot {
    (s.0 - 1, s.1)
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BigradedComplex {
    bases: BTreeMap<Slot, Vec<String>>,
    diffs: BTreeMap<Slot, SparseMatrix>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Homology {
    pub dim: usize,
    pub representatives: Vec<Vec<Rational>>,
}

impl BigradedComplex {
    /// Validates shapes and `d∘d = 0`. Empty slots are dropped.
    pub fn new(
        bases: BTreeMap<Slot, Vec<String>>,
        diffs: BTreeMap<Slot, SparseMatrix>,
    ) -> Result<Self, ComplexError> {
        let limit = crate::limits::max_basis();
        for (s, b) in &bases {
            if b.len() > limit {
                return Err(ComplexError::BasisTooLarge { slot: *s, size: b.len(), limit });
            }
        }
        let bases: BTreeMap<Slot, Vec<String>> =
            bases.into_iter().filter(|(_, b)| !b.is_empty()).collect();
        let c = BigradedComplex { bases, diffs: BTreeMap::new() };
        let mut kept = BTreeMap::new();
        for (s, d) in diffs {
            let expected = (c.dim(next(s)), c.dim(s));
            if (d.rows(), d.cols()) != expected {
                return Err(ComplexError::Shape { slot: s, found: (d.rows(), d.cols()), expected });
            }
            if !d.is_zero() {
                kept.insert(s, d);
            }
        }
        let c = BigradedComplex { diffs: kept, ..c };
        for s in c.diffs.keys() {
            if let Some(d2) = c.diffs.get(&next(*s)) {
                if !d2.mul(&c.diffs[s]).is_zero() {
                    return Err(ComplexError::NotSquareZero(*s));
                }
            }
        }
        Ok(c)
    }

    /// A complex with the given slot dimensions and zero differential.
    pub fn zero_differential(dims: &BTreeMap<Slot, usize>) -> Self {
        let bases = dims
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|(s, n)| (*s, (0..*n).map(|i| format!("e{i}")).collect()))
            .collect();
        BigradedComplex { bases, diffs: BTreeMap::new() }
    }

    pub fn dim(&self, s: Slot) -> usize {
        self.bases.get(&s).map_or(0, |b| b.len())
    }

    pub fn labels(&self, s: Slot) -> &[String] {
        self.bases.get(&s).map_or(&[], |b| b.as_slice())
    }

    pub fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.bases.keys().copied()
    }

    pub fn weights(&self) -> BTreeSet<i32> {
        self.bases.keys().map(|s| s.1).collect()
    }

    pub fn degrees(&self, weight: i32) -> BTreeSet<i32> {
        self.bases.keys().filter(|s| s.1 == weight).map(|s| s.0).collect()
    }

    /// The differential leaving `s`, as a `dim(s+1) x dim(s)` matrix.
    pub fn differential(&self, s: Slot) -> SparseMatrix {
        self.diffs
            .get(&s)
            .cloned()
            .unwrap_or_else(|| SparseMatrix::zeros(self.dim(next(s)), self.dim(s)))
    }

    pub fn is_zero_differential(&self) -> bool {
        self.diffs.is_empty()
    }

    pub fn homology(&self, degree: i32, weight: i32) -> Result<Homology, ComplexError> {
        let s = (degree, weight);
        let d_in = self.differential(prev(s));
        let d_out = self.differential(s);
        let representatives = linalg::homology_basis(&d_in, &d_out)?;
        Ok(Homology { dim: representatives.len(), representatives })
    }

    pub fn homology_dim(&self, degree: i32, weight: i32) -> Result<usize, ComplexError> {
        let s = (degree, weight);
        Ok(linalg::homology_dim(&self.differential(prev(s)), &self.differential(s))?)
    }

    /// Homology dimension of every nonempty slot, computed slot-parallel.
    pub fn homology_table(&self) -> Result<BTreeMap<Slot, usize>, ComplexError> {
        let slots: Vec<Slot> = self.slots().collect();
        let dims = par::try_map(slots.clone(), |s| self.homology_dim(s.0, s.1))?;
        Ok(slots.into_iter().zip(dims).collect())
    }

    pub fn euler_characteristic(&self, weight: i32) -> i64 {
        self.degrees(weight)
            .into_iter()
            .map(|d| sign(d) * self.dim((d, weight)) as i64)
            .sum()
    }

    pub fn homology_euler_characteristic(&self, weight: i32) -> Result<i64, ComplexError> {
        let mut total = 0;
        for d in self.degrees(weight) {
            total += sign(d) * self.homology_dim(d, weight)? as i64;
        }
        Ok(total)
    }

    fn offsets<I: Iterator<Item = usize>>(dims: I) -> Vec<usize> {
        let mut acc = 0;
        dims.map(|d| {
            let o = acc;
            acc += d;
            o
        })
        .collect()
    }
}

fn sign(d: i32) -> i64 {
    if d.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Tensor product with the Koszul sign `(-1)^{deg of first factor}` on the second differential.
pub fn tensor(c: &BigradedComplex, d: &BigradedComplex) -> BigradedComplex {
    // block layout: slot -> ordered list of (slot of c, slot of d)
    let mut blocks: BTreeMap<Slot, Vec<(Slot, Slot)>> = BTreeMap::new();
    for s1 in c.slots() {
        for s2 in d.slots() {
            blocks.entry((s1.0 + s2.0, s1.1 + s2.1)).or_default().push((s1, s2));
        }
    }
    let mut bases = BTreeMap::new();
    let mut offset: BTreeMap<(Slot, Slot), usize> = BTreeMap::new();
    for (s, list) in &blocks {
        let mut labels = Vec::new();
        for &(s1, s2) in list {
            offset.insert((s1, s2), labels.len());
            for a in c.labels(s1) {
                for b in d.labels(s2) {
                    labels.push(format!("{a}⊗{b}"));
                }
            }
        }
        bases.insert(*s, labels);
    }
    let mut diffs = BTreeMap::new();
    for (s, list) in &blocks {
        let t = next(*s);
        let rows = bases.get(&t).map_or(0, |b: &Vec<String>| b.len());
        let cols = bases[s].len();
        let mut trip = Vec::new();
        for &(s1, s2) in list {
            let src = offset[&(s1, s2)];
            let n2 = d.dim(s2);
            if let Some(&dst) = offset.get(&(next(s1), s2)) {
                for (r, k, v) in c.differential(s1).entries() {
                    for j in 0..n2 {
                        trip.push((dst + r * n2 + j, src + k * n2 + j, v.clone()));
                    }
                }
            }
            if let Some(&dst) = offset.get(&(s1, next(s2))) {
                let n2t = d.dim(next(s2));
                let sg = rat(sign(s1.0));
                for i in 0..c.dim(s1) {
                    for (r, k, v) in d.differential(s2).entries() {
                        trip.push((dst + i * n2t + r, src + i * n2 + k, v * &sg));
                    }
                }
            }
        }
        if rows > 0 && cols > 0 {
            diffs.insert(*s, SparseMatrix::from_triplets(rows, cols, trip));
        }
    }
    BigradedComplex::new(bases, diffs).expect("tensor of complexes is a complex")
}

/// Moves slot `(d, w)` to `(d - n*w, w)`.
pub fn shear(c: &BigradedComplex, n: i32) -> BigradedComplex {
    let mv = |s: Slot| (s.0 - n * s.1, s.1);
    BigradedComplex {
        bases: c.bases.iter().map(|(s, b)| (mv(*s), b.clone())).collect(),
        diffs: c.diffs.iter().map(|(s, d)| (mv(*s), d.clone())).collect(),
    }
}

/// A map of bigraded complexes shifting slots by `(degree_shift, weight_shift)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainMap {
    source: BigradedComplex,
    target: BigradedComplex,
    maps: BTreeMap<Slot, SparseMatrix>,
    degree_shift: i32,
    weight_shift: i32,
}

impl ChainMap {
    /// Checks shapes and `d_T f = (-1)^{degree_shift} f d_S`.
    pub fn new(
        source: BigradedComplex,
        target: BigradedComplex,
        maps: BTreeMap<Slot, SparseMatrix>,
        degree_shift: i32,
        weight_shift: i32,
    ) -> Result<Self, ComplexError> {
        let f = ChainMap { source, target, maps, degree_shift, weight_shift };
        for (s, m) in &f.maps {
            let expected = (f.target.dim(f.image_slot(*s)), f.source.dim(*s));
            if (m.rows(), m.cols()) != expected {
                return Err(ComplexError::Shape { slot: *s, found: (m.rows(), m.cols()), expected });
            }
        }
        let sg = rat(sign(degree_shift));
        for s in f.source.slots() {
            let lhs = f.target.differential(f.image_slot(s)).mul(&f.at(s));
            let rhs = f.at(next(s)).mul(&f.source.differential(s)).scale(&sg);
            if lhs != rhs {
                return Err(ComplexError::NotChainMap(s));
            }
        }
        Ok(f)
    }

    pub fn identity(c: &BigradedComplex) -> Self {
        let maps = c.slots().map(|s| (s, SparseMatrix::identity(c.dim(s)))).collect();
        ChainMap { source: c.clone(), target: c.clone(), maps, degree_shift: 0, weight_shift: 0 }
    }

    pub fn zero(source: &BigradedComplex, target: &BigradedComplex) -> Self {
        ChainMap {
            source: source.clone(),
            target: target.clone(),
            maps: BTreeMap::new(),
            degree_shift: 0,
            weight_shift: 0,
        }
    }

    pub fn source(&self) -> &BigradedComplex {
        &self.source
    }

    pub fn target(&self) -> &BigradedComplex {
        &self.target
    }

    pub fn image_slot(&self, s: Slot) -> Slot {
        (s.0 + self.degree_shift, s.1 + self.weight_shift)
    }

    pub fn at(&self, s: Slot) -> SparseMatrix {
        self.maps.get(&s).cloned().unwrap_or_else(|| {
            SparseMatrix::zeros(self.target.dim(self.image_slot(s)), self.source.dim(s))
        })
    }

    /// Rank of the induced map on homology at source slot `s`.
    pub fn induced_rank(&self, s: Slot) -> Result<usize, ComplexError> {
        let reps = self.source.homology(s.0, s.1)?.representatives;
        let t = self.image_slot(s);
        let boundaries = self.target.differential(prev(t));
        let f = self.at(s);
        let images: Vec<Vec<Rational>> = reps.iter().map(|v| f.apply(v)).collect();
        let img = SparseMatrix::from_columns(self.target.dim(t), &images);
        let both = boundaries.hstack(&img);
        Ok(linalg::rank(&both) - linalg::rank(&boundaries))
    }

    /// Whether the induced map on homology is bijective at `s`.
    pub fn is_quasi_iso_at(&self, s: Slot) -> Result<bool, ComplexError> {
        let t = self.image_slot(s);
        let hs = self.source.homology_dim(s.0, s.1)?;
        let ht = self.target.homology_dim(t.0, t.1)?;
        Ok(hs == ht && self.induced_rank(s)? == hs)
    }
}

/// Mapping cone of a degree-0, weight-0 chain map: `Cone^n = S^{n+1} ⊕ T^n`.
pub fn cone(f: &ChainMap) -> Result<BigradedComplex, ComplexError> {
    if f.degree_shift != 0 || f.weight_shift != 0 {
        return Err(ComplexError::NotChainMap((f.degree_shift, f.weight_shift)));
    }
    let (s, t) = (&f.source, &f.target);
    let mut slots: BTreeSet<Slot> = t.slots().collect();
    slots.extend(s.slots().map(prev));
    let mut bases = BTreeMap::new();
    for &c in &slots {
        let mut labels: Vec<String> = s.labels(next(c)).iter().map(|l| format!("s:{l}")).collect();
        labels.extend(t.labels(c).iter().map(|l| format!("t:{l}")));
        bases.insert(c, labels);
    }
    let mut diffs = BTreeMap::new();
    for &c in &slots {
        let (ns, nt) = (s.dim(next(c)), t.dim(c));
        let (ns2, nt2) = (s.dim(next(next(c))), t.dim(next(c)));
        let rows = ns2 + nt2;
        let cols = ns + nt;
        let ds = s.differential(next(c)).scale(&rat(-1)).embed(rows, cols, 0, 0);
        let fm = f.at(next(c)).embed(rows, cols, ns2, 0);
        let dt = t.differential(c).embed(rows, cols, ns2, ns);
        diffs.insert(c, ds.add(&fm).add(&dt));
    }
    BigradedComplex::new(bases, diffs)
}

/// A complex with a second operator `B` of degree −1 and weight 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedComplex {
    complex: BigradedComplex,
    connes: BTreeMap<Slot, SparseMatrix>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Totalization {
    /// Columns `u^j`, `j <= 0`: computes cyclic homology.
    Cyclic,
    /// Columns `u^j`, `j >= 0`: negative cyclic homology.
    Negative,
    /// All columns.
    Periodic,
}

impl MixedComplex {
    /// `connes[s]` maps slot `s` to `(s.0 - 1, s.1)`. Checks b² = B² = bB + Bb = 0.
    pub fn new(
        complex: BigradedComplex,
        connes: BTreeMap<Slot, SparseMatrix>,
    ) -> Result<Self, ComplexError> {
        for (s, m) in &connes {
            let expected = (complex.dim(prev(*s)), complex.dim(*s));
            if (m.rows(), m.cols()) != expected {
                return Err(ComplexError::Shape { slot: *s, found: (m.rows(), m.cols()), expected });
            }
        }
        let connes = connes.into_iter().filter(|(_, m)| !m.is_zero()).collect();
        let m = MixedComplex { complex, connes };
        m.check_identities()?;
        Ok(m)
    }

    pub fn trivial(complex: BigradedComplex) -> Self {
        MixedComplex { complex, connes: BTreeMap::new() }
    }

    pub fn complex(&self) -> &BigradedComplex {
        &self.complex
    }

    pub fn connes(&self, s: Slot) -> SparseMatrix {
        self.connes.get(&s).cloned().unwrap_or_else(|| {
            SparseMatrix::zeros(self.complex.dim(prev(s)), self.complex.dim(s))
        })
    }

    /// The three composites `b∘b`, `B∘B`, `b∘B + B∘b` at every slot.
    pub fn identity_residues(&self) -> Vec<(&'static str, Slot, SparseMatrix)> {
        let c = &self.complex;
        let mut out = Vec::new();
        for s in c.slots() {
            out.push(("b∘b", s, c.differential(next(s)).mul(&c.differential(s))));
            out.push(("B∘B", s, self.connes(prev(s)).mul(&self.connes(s))));
            let bb = c.differential(prev(s)).mul(&self.connes(s));
            let bb2 = self.connes(next(s)).mul(&c.differential(s));
            out.push(("bB+Bb", s, bb.add(&bb2)));
        }
        out
    }

    pub fn check_identities(&self) -> Result<(), ComplexError> {
        for (identity, slot, m) in self.identity_residues() {
            if !m.is_zero() {
                return Err(ComplexError::MixedIdentityFailure { identity, slot });
            }
        }
        Ok(())
    }

    /// Total complex of the (b, B) bicomplex in degrees `window.0 - 1 ..= window.1 + 1`.
    pub fn totalize(
        &self,
        variant: Totalization,
        window: (i32, i32),
    ) -> Result<TotalComplex, ComplexError> {
        let (lo, hi) = window;
        if lo > hi {
            return Err(ComplexError::EmptyWindow(lo, hi));
        }
        let c = &self.complex;
        let allowed = |j: i32| match variant {
            Totalization::Cyclic => j <= 0,
            Totalization::Negative => j >= 0,
            Totalization::Periodic => true,
        };
        let mut layout: BTreeMap<Slot, Vec<(i32, i32)>> = BTreeMap::new(); // slot -> (j, chain degree)
        let mut bases = BTreeMap::new();
        for w in c.weights() {
            let degs = c.degrees(w);
            for n in lo - 1..=hi + 1 {
                let mut cols = Vec::new();
                let mut labels = Vec::new();
                for &m in &degs {
                    if (n - m).rem_euclid(2) != 0 {
                        continue;
                    }
                    let j = (n - m) / 2;
                    if !allowed(j) {
                        continue;
                    }
                    cols.push((j, m));
                    labels.extend(c.labels((m, w)).iter().map(|l| format!("u^{j}·{l}")));
                }
                cols.sort();
                layout.insert((n, w), cols);
                bases.insert((n, w), labels);
            }
        }
        let mut diffs = BTreeMap::new();
        for (&(n, w), cols) in &layout {
            if n > hi {
                continue;
            }
            let tgt = &layout[&(n + 1, w)];
            let tgt_off: BTreeMap<(i32, i32), usize> = tgt
                .iter()
                .zip(BigradedComplex::offsets(tgt.iter().map(|&(_, m)| c.dim((m, w)))))
                .map(|(k, o)| (*k, o))
                .collect();
            let rows: usize = tgt.iter().map(|&(_, m)| c.dim((m, w))).sum();
            let ncols: usize = cols.iter().map(|&(_, m)| c.dim((m, w))).sum();
            let mut trip = Vec::new();
            let mut src = 0;
            for &(j, m) in cols {
                if let Some(&dst) = tgt_off.get(&(j, m + 1)) {
                    for (r, k, v) in c.differential((m, w)).entries() {
                        trip.push((dst + r, src + k, v.clone()));
                    }
                }
                if let Some(&dst) = tgt_off.get(&(j + 1, m - 1)) {
                    for (r, k, v) in self.connes((m, w)).entries() {
                        trip.push((dst + r, src + k, v.clone()));
                    }
                }
                src += c.dim((m, w));
            }
            diffs.insert((n, w), SparseMatrix::from_triplets(rows, ncols, trip));
        }
        Ok(TotalComplex { complex: BigradedComplex::new(bases, diffs)?, window })
    }
}

/// A totalization together with the window on which its homology is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TotalComplex {
    pub complex: BigradedComplex,
    pub window: (i32, i32),
}

impl TotalComplex {
    /// Homology dimensions for every weight and every degree in the window.
    pub fn dims(&self) -> Result<BTreeMap<Slot, usize>, ComplexError> {
        let mut slots = Vec::new();
        for w in self.complex.weights() {
            for n in self.window.0..=self.window.1 {
                slots.push((n, w));
            }
        }
        let dims = par::try_map(slots.clone(), |s| self.complex.homology_dim(s.0, s.1))?;
        Ok(slots.into_iter().zip(dims).collect())
    }
}

/// Direct sum, slot by slot.
pub fn direct_sum(a: &BigradedComplex, b: &BigradedComplex) -> BigradedComplex {
    let slots: BTreeSet<Slot> = a.slots().chain(b.slots()).collect();
    let mut bases = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for &s in &slots {
        let mut l: Vec<String> = a.labels(s).to_vec();
        l.extend(b.labels(s).iter().cloned());
        bases.insert(s, l);
    }
    for &s in &slots {
        let rows = a.dim(next(s)) + b.dim(next(s));
        let cols = a.dim(s) + b.dim(s);
        let m = a
            .differential(s)
            .embed(rows, cols, 0, 0)
            .add(&b.differential(s).embed(rows, cols, a.dim(next(s)), a.dim(s)));
        diffs.insert(s, m);
    }
    BigradedComplex::new(bases, diffs).expect("direct sum of complexes")
}

/// Whether every entry of `v` is zero.
pub fn is_zero_vector(v: &[Rational]) -> bool {
    v.iter().all(Zero::is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize, p: &str) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    fn two_term(slot_lo: Slot, d: SparseMatrix) -> BigradedComplex {
        let mut bases = BTreeMap::new();
        bases.insert(slot_lo, labels(d.cols(), "a"));
        bases.insert(next(slot_lo), labels(d.rows(), "b"));
        let mut diffs = BTreeMap::new();
        diffs.insert(slot_lo, d);
        BigradedComplex::new(bases, diffs).unwrap()
    }

    fn unit() -> BigradedComplex {
        BigradedComplex::zero_differential(&BTreeMap::from([((0, 0), 1)]))
    }

    /// Koszul complex of x over Q[x], weight slices 0..=max: e in degree -1, weight = 1 + exponent.
    fn koszul_x(max: i32) -> BigradedComplex {
        let mut bases = BTreeMap::new();
        let mut diffs = BTreeMap::new();
        for w in 0..=max {
            bases.insert((0, w), vec![format!("x^{w}")]);
            if w >= 1 {
                bases.insert((-1, w), vec![format!("x^{}e", w - 1)]);
                diffs.insert((-1, w), SparseMatrix::identity(1));
            }
        }
        BigradedComplex::new(bases, diffs).unwrap()
    }

    /// de Rham complex of Q[x] in poly-weight slices: x^w -> w x^{w-1} dx.
    fn derham_line(max: i32) -> BigradedComplex {
        let mut bases = BTreeMap::new();
        let mut diffs = BTreeMap::new();
        for w in 0..=max {
            bases.insert((0, w), vec![format!("x^{w}")]);
            if w >= 1 {
                bases.insert((1, w), vec![format!("x^{}dx", w - 1)]);
                diffs.insert((0, w), SparseMatrix::from_i64(&[&[w as i64]]));
            }
        }
        BigradedComplex::new(bases, diffs).unwrap()
    }

    #[test]
    fn zero_differential_homology_is_chains() {
        let c = BigradedComplex::zero_differential(&BTreeMap::from([((0, 0), 3), ((-1, 0), 2)]));
        assert_eq!(c.homology_dim(0, 0).unwrap(), 3);
        assert_eq!(c.homology_dim(-1, 0).unwrap(), 2);
    }

    #[test]
    fn koszul_of_x() {
        let k = koszul_x(4);
        for w in 0..=4 {
            assert_eq!(k.homology_dim(0, w).unwrap(), usize::from(w == 0));
            assert_eq!(k.homology_dim(-1, w).unwrap(), 0);
        }
    }

    #[test]
    fn derham_of_line_is_exact_in_positive_weight() {
        let c = derham_line(5);
        assert_eq!(c.homology_dim(0, 0).unwrap(), 1);
        for w in 1..=5 {
            assert_eq!(c.homology_dim(0, w).unwrap(), 0);
            assert_eq!(c.homology_dim(1, w).unwrap(), 0);
        }
    }

    #[test]
    fn square_zero_is_enforced() {
        let mut bases = BTreeMap::new();
        bases.insert((0, 0), labels(1, "a"));
        bases.insert((1, 0), labels(1, "b"));
        bases.insert((2, 0), labels(1, "c"));
        let diffs = BTreeMap::from([
            ((0, 0), SparseMatrix::identity(1)),
            ((1, 0), SparseMatrix::identity(1)),
        ]);
        assert_eq!(BigradedComplex::new(bases, diffs), Err(ComplexError::NotSquareZero((0, 0))));
    }

    #[test]
    fn tensor_examples() {
        let c = koszul_x(2);
        let cu = tensor(&c, &unit());
        assert_eq!(cu.homology_table().unwrap(), c.homology_table().unwrap());
        assert_eq!(cu.euler_characteristic(1), c.euler_characteristic(1));

        let id = two_term((0, 0), SparseMatrix::identity(1));
        let t = tensor(&id, &id);
        for (_, d) in t.homology_table().unwrap() {
            assert_eq!(d, 0);
        }
        assert_eq!(t.dim((1, 0)), 2);

        let m1 = BigradedComplex::zero_differential(&BTreeMap::from([((-1, 0), 1)]));
        let t = tensor(&m1, &m1);
        assert_eq!(t.slots().collect::<Vec<_>>(), vec![(-2, 0)]);
    }

    #[test]
    fn shear_examples() {
        let c = koszul_x(3);
        assert_eq!(shear(&c, 0), c);
        let u = BigradedComplex::zero_differential(&(0..4).map(|j| ((2 * j, j), 1)).collect());
        let t = BigradedComplex::zero_differential(&(0..4).map(|j| ((0, j), 1)).collect());
        assert_eq!(shear(&u, 2), t);
        assert_eq!(shear(&shear(&c, 3), -3), c);
    }

    #[test]
    fn cone_examples() {
        let c = koszul_x(3);
        let cid = cone(&ChainMap::identity(&c)).unwrap();
        assert!(cid.homology_table().unwrap().values().all(|&d| d == 0));

        let cz = cone(&ChainMap::zero(&c, &c)).unwrap();
        for s in cz.slots() {
            let expected = c.homology_dim(s.0, s.1).unwrap() + c.homology_dim(s.0 + 1, s.1).unwrap();
            assert_eq!(cz.homology_dim(s.0, s.1).unwrap(), expected);
        }

        // multiplication by x: Q[x] slice w-1 -> slice w, both in degree 0
        let mut bases = BTreeMap::new();
        for w in 0..=4 {
            bases.insert((0, w), vec![format!("x^{w}")]);
        }
        let shifted: BTreeMap<Slot, Vec<String>> =
            (0..=3).map(|w| ((0, w + 1), vec![format!("x^{w}")])).collect();
        let source = BigradedComplex::new(shifted, BTreeMap::new()).unwrap();
        let target = BigradedComplex::new(bases, BTreeMap::new()).unwrap();
        let maps = (1..=4).map(|w| ((0, w), SparseMatrix::identity(1))).collect();
        let f = ChainMap::new(source, target, maps, 0, 0).unwrap();
        let cx = cone(&f).unwrap();
        for w in 0..=4 {
            assert_eq!(cx.homology_dim(0, w).unwrap(), usize::from(w == 0));
            assert_eq!(cx.homology_dim(-1, w).unwrap(), 0);
        }
    }

    #[test]
    fn non_chain_maps_are_rejected() {
        let c = derham_line(2);
        let mut maps = BTreeMap::new();
        maps.insert((0, 1), SparseMatrix::identity(1));
        assert!(matches!(
            ChainMap::new(c.clone(), c, maps, 0, 0),
            Err(ComplexError::NotChainMap(_))
        ));
    }

    #[test]
    fn trivial_mixed_complex_of_the_point() {
        let m = MixedComplex::trivial(unit());
        let hc = m.totalize(Totalization::Cyclic, (-6, 0)).unwrap().dims().unwrap();
        let got: Vec<usize> = (-6..=0).rev().map(|n| hc[&(n, 0)]).collect();
        assert_eq!(got, vec![1, 0, 1, 0, 1, 0, 1]);
        let neg = m.totalize(Totalization::Negative, (0, 4)).unwrap().dims().unwrap();
        let got: Vec<usize> = (0..=4).map(|n| neg[&(n, 0)]).collect();
        assert_eq!(got, vec![1, 0, 1, 0, 1]);
        let per = m.totalize(Totalization::Periodic, (-3, 3)).unwrap().dims().unwrap();
        let got: Vec<usize> = (-3..=3).map(|n| per[&(n, 0)]).collect();
        assert_eq!(got, vec![0, 1, 0, 1, 0, 1, 0]);
    }

    #[test]
    fn periodic_totalization_is_exact_when_b_is_invertible() {
        // Q in degrees 0 and -1, b = 0, B: degree 0 -> degree -1 an isomorphism
        let c = BigradedComplex::zero_differential(&BTreeMap::from([((0, 0), 1), ((-1, 0), 1)]));
        let m = MixedComplex::new(c, BTreeMap::from([((0, 0), SparseMatrix::identity(1))])).unwrap();
        let per = m.totalize(Totalization::Periodic, (-4, 4)).unwrap().dims().unwrap();
        assert!(per.values().all(|&d| d == 0));
    }

    #[test]
    fn mixed_identities_are_checked() {
        let c = koszul_x(1);
        // B from degree 0 weight 1 to degree -1 weight 1, nonzero: b B != -B b
        let r = MixedComplex::new(c, BTreeMap::from([((0, 1), SparseMatrix::identity(1))]));
        assert!(matches!(r, Err(ComplexError::MixedIdentityFailure { .. })));
    }

    fn arb_complex() -> impl Strategy<Value = BigradedComplex> {
        // weight slices 0..3, each a three-term complex A -> B -> C built from a
        // random matrix and a matrix killing its image
        proptest::collection::vec(
            (-2i32..2, 1usize..3, proptest::collection::vec(-2i64..3, 6)),
            1..4,
        )
        .prop_map(|slices| {
            let mut bases = BTreeMap::new();
            let mut diffs = BTreeMap::new();
            for (w, (d0, k, entries)) in slices.into_iter().enumerate() {
                let w = w as i32;
                let a = SparseMatrix::from_dense(
                    3,
                    k,
                    &(0..3)
                        .map(|r| (0..k).map(|c| rat(entries[(r * k + c) % 6])).collect())
                        .collect::<Vec<_>>(),
                );
                let ker = linalg::kernel_basis(&a.transpose());
                let b = if ker.is_empty() {
                    SparseMatrix::zeros(1, 3)
                } else {
                    SparseMatrix::from_columns(3, &ker[..1]).transpose()
                };
                bases.insert((d0, w), labels(k, "a"));
                bases.insert((d0 + 1, w), labels(3, "b"));
                bases.insert((d0 + 2, w), labels(1, "c"));
                diffs.insert((d0, w), a);
                diffs.insert((d0 + 1, w), b);
            }
            BigradedComplex::new(bases, diffs).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn euler_characteristic_is_homological(c in arb_complex()) {
            for w in c.weights() {
                prop_assert_eq!(c.euler_characteristic(w), c.homology_euler_characteristic(w).unwrap());
            }
        }

        #[test]
        fn shear_preserves_homology(c in arb_complex(), n in -3i32..4) {
            let s = shear(&c, n);
            for (slot, d) in c.homology_table().unwrap() {
                prop_assert_eq!(s.homology_dim(slot.0 - n * slot.1, slot.1).unwrap(), d);
            }
            prop_assert_eq!(shear(&s, -n), c);
        }

        #[test]
        fn kunneth(c in arb_complex(), d in arb_complex()) {
            let t = tensor(&c, &d);
            let hc = c.homology_table().unwrap();
            let hd = d.homology_table().unwrap();
            for (slot, dim) in t.homology_table().unwrap() {
                let mut expected = 0;
                for (s1, a) in &hc {
                    for (s2, b) in &hd {
                        if (s1.0 + s2.0, s1.1 + s2.1) == slot {
                            expected += a * b;
                        }
                    }
                }
                prop_assert_eq!(dim, expected);
            }
        }

        #[test]
        fn cone_long_exact_sequence(c in arb_complex()) {
            // cone of the identity is acyclic; cone of zero splits
            let cz = cone(&ChainMap::zero(&c, &c)).unwrap();
            for w in cz.weights() {
                prop_assert_eq!(
                    cz.homology_euler_characteristic(w).unwrap(),
                    c.homology_euler_characteristic(w).unwrap() - c.homology_euler_characteristic(w).unwrap()
                );
            }
            let ci = cone(&ChainMap::identity(&c)).unwrap();
            prop_assert!(ci.homology_table().unwrap().values().all(|&d| d == 0));
        }
    }
}
