//! Hochschild chains of graded-commutative algebras.
//!
//! The primary model is the normalized bar complex: in bar length `n` a basis
//! element is a tensor `a0 ⊗ a1 ⊗ … ⊗ an` of standard monomials with
//! `a1..an` of positive poly-weight. It sits in slot
//! `(Σ deg ai − n, Σ poly-weight ai)`. The Hochschild boundary `b` and the
//! Connes operator `B` both preserve poly-weight, so each weight slice is an
//! exact finite summand.
//!
//! For free algebras the Koszul resolution of the diagonal gives
//! `Sym_A(Ω_A[1])` with zero differential, and the antisymmetrization map
//! `ε_n` compares the two models.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::complexes::{BigradedComplex, ChainMap, ComplexError, MixedComplex, Slot, Totalization};
use crate::linalg::{rat, Rational, SparseMatrix};
use crate::par;
use crate::presentations::{Element, GCAlgebra, Generator, Monomial, PresentationError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HochschildError {
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error("relations of `{0}` are not homogeneous in poly-weight")]
    NotWeightGraded(String),
    #[error("`{0}` is not a polynomial ring in degree-0 generators")]
    NotClassicalPolynomial(String),
    #[error("`{0}` has relations; the Koszul model needs a free algebra")]
    NotFree(String),
    #[error("no scalar c satisfies π∘B = c·d∘π in bar length {n}")]
    NoScalarWorks { n: usize },
}

type Tensor = Vec<Monomial>;

#[derive(Debug, Clone)]
pub struct BarComplex {
    algebra: GCAlgebra,
    max_weight: u32,
    min_degree: i32,
    tensors: BTreeMap<Slot, Vec<Tensor>>,
    index: BTreeMap<Tensor, usize>,
    mixed: MixedComplex,
}

fn parity(d: i32) -> bool {
    d.rem_euclid(2) == 1
}

fn signed(c: &Rational, negative: bool) -> Rational {
    if negative {
        -c.clone()
    } else {
        c.clone()
    }
}

struct WeightSlice {
    tensors: BTreeMap<Slot, Vec<Tensor>>,
    b: Vec<(Slot, Tensor, Tensor, Rational)>,
    connes: Vec<(Slot, Tensor, Tensor, Rational)>,
}

impl BarComplex {
    /// All slices of poly-weight at most `max_weight`. `min_degree` only
    /// restricts what [`BarComplex::dims`] reports: weight slices are always
    /// built in full so that homology is exact.
    pub fn new(a: &GCAlgebra, max_weight: u32, min_degree: i32) -> Result<Self, HochschildError> {
        if !a.is_weight_graded() {
            return Err(HochschildError::NotWeightGraded(a.name().to_string()));
        }
        let mons: Vec<Vec<Monomial>> = (0..=max_weight).map(|w| a.monomials_of_weight(w)).collect();
        let slices = par::map((0..=max_weight).collect(), |w| Self::slice(a, &mons, w));
        let mut tensors = BTreeMap::new();
        let mut index = BTreeMap::new();
        let limit = crate::limits::max_basis();
        for s in &slices {
            for (slot, ts) in &s.tensors {
                if ts.len() > limit {
                    return Err(ComplexError::BasisTooLarge { slot: *slot, size: ts.len(), limit }.into());
                }
                for (i, t) in ts.iter().enumerate() {
                    index.insert(t.clone(), i);
                }
                tensors.insert(*slot, ts.clone());
            }
        }
        let dim = |s: Slot| tensors.get(&s).map_or(0, |v: &Vec<Tensor>| v.len());
        let mut b_trip: BTreeMap<Slot, Vec<(usize, usize, Rational)>> = BTreeMap::new();
        let mut c_trip: BTreeMap<Slot, Vec<(usize, usize, Rational)>> = BTreeMap::new();
        for s in &slices {
            for (slot, src, dst, c) in &s.b {
                b_trip.entry(*slot).or_default().push((index[dst], index[src], c.clone()));
            }
            for (slot, src, dst, c) in &s.connes {
                c_trip.entry(*slot).or_default().push((index[dst], index[src], c.clone()));
            }
        }
        let b = b_trip
            .into_iter()
            .map(|(s, t)| (s, SparseMatrix::from_triplets(dim((s.0 + 1, s.1)), dim(s), t)))
            .collect();
        let connes = c_trip
            .into_iter()
            .map(|(s, t)| (s, SparseMatrix::from_triplets(dim((s.0 - 1, s.1)), dim(s), t)))
            .collect();
        let labels = tensors
            .iter()
            .map(|(s, ts)| (*s, ts.iter().map(|t| format_tensor(a, t)).collect()))
            .collect();
        let complex = BigradedComplex::new(labels, b)?;
        let mixed = MixedComplex::new(complex, connes)?;
        Ok(BarComplex { algebra: a.clone(), max_weight, min_degree, tensors, index, mixed })
    }

    fn slot_of(a: &GCAlgebra, t: &[Monomial]) -> Slot {
        let deg: i32 = t.iter().map(|m| a.degree(m)).sum();
        let w: u32 = t.iter().map(|m| m.total()).sum();
        (deg - (t.len() as i32 - 1), w as i32)
    }

    fn slice(a: &GCAlgebra, mons: &[Vec<Monomial>], w: u32) -> WeightSlice {
        let mut all = Vec::new();
        for w0 in 0..=w {
            for a0 in &mons[w0 as usize] {
                let mut cur = vec![a0.clone()];
                Self::extend(mons, w - w0, &mut cur, &mut all);
            }
        }
        let mut tensors: BTreeMap<Slot, Vec<Tensor>> = BTreeMap::new();
        for t in all {
            tensors.entry(Self::slot_of(a, &t)).or_default().push(t);
        }
        let mut b = Vec::new();
        let mut connes = Vec::new();
        for (slot, ts) in &tensors {
            for t in ts {
                for (dst, c) in hochschild_boundary(a, t) {
                    b.push((*slot, t.clone(), dst, c));
                }
                for (dst, c) in connes_operator(a, t) {
                    connes.push((*slot, t.clone(), dst, c));
                }
            }
        }
        WeightSlice { tensors, b, connes }
    }

    fn extend(mons: &[Vec<Monomial>], left: u32, cur: &mut Tensor, out: &mut Vec<Tensor>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for k in 1..=left {
            for m in &mons[k as usize] {
                cur.push(m.clone());
                Self::extend(mons, left - k, cur, out);
                cur.pop();
            }
        }
    }

    pub fn algebra(&self) -> &GCAlgebra {
        &self.algebra
    }

    pub fn max_weight(&self) -> u32 {
        self.max_weight
    }

    pub fn min_degree(&self) -> i32 {
        self.min_degree
    }

    pub fn complex(&self) -> &BigradedComplex {
        self.mixed.complex()
    }

    pub fn mixed(&self) -> &MixedComplex {
        &self.mixed
    }

    pub fn tensors(&self, s: Slot) -> &[Tensor] {
        self.tensors.get(&s).map_or(&[], |v| v.as_slice())
    }

    /// Position of `t` within its slot basis, if `t` is a basis tensor.
    pub fn position(&self, t: &[Monomial]) -> Option<usize> {
        self.index.get(t).copied()
    }

    /// Coordinates of a linear combination of basis tensors in slot `s`.
    pub fn vector(&self, s: Slot, terms: &[(Tensor, Rational)]) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.tensors(s).len()];
        for (t, c) in terms {
            let i = self.position(t).expect("basis tensor");
            v[i] += c;
        }
        v
    }

    /// Hochschild homology dimensions for slots with degree at least `min_degree`.
    pub fn dims(&self) -> Result<BTreeMap<Slot, usize>, HochschildError> {
        let mut t = self.complex().homology_table()?;
        t.retain(|s, _| s.0 >= self.min_degree);
        Ok(t)
    }
}

fn format_tensor(a: &GCAlgebra, t: &[Monomial]) -> String {
    t.iter().map(|m| a.format_monomial(m)).collect::<Vec<_>>().join("⊗")
}

/// `b(a0 ⊗ … ⊗ an)` on a basis tensor, with Koszul signs for graded factors.
pub fn hochschild_boundary(a: &GCAlgebra, t: &[Monomial]) -> Vec<(Tensor, Rational)> {
    let n = t.len() - 1;
    let mut acc: BTreeMap<Tensor, Rational> = BTreeMap::new();
    let mut push = |k: Tensor, c: Rational| {
        let e = acc.entry(k).or_insert_with(Rational::zero);
        *e += c;
    };
    for i in 0..n {
        for (m, c) in a.mul_monomials(&t[i], &t[i + 1]).terms() {
            let mut u = t[..i].to_vec();
            u.push(m.clone());
            u.extend_from_slice(&t[i + 2..]);
            push(u, signed(c, i % 2 == 1));
        }
    }
    if n > 0 {
        let dn = a.degree(&t[n]);
        let rest: i32 = t[..n].iter().map(|m| a.degree(m)).sum();
        let neg = (n % 2 == 1) ^ (parity(dn) && parity(rest));
        for (m, c) in a.mul_monomials(&t[n], &t[0]).terms() {
            let mut u = vec![m.clone()];
            u.extend_from_slice(&t[1..n]);
            push(u, signed(c, neg));
        }
    }
    acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

/// Normalized Connes operator on a basis tensor.
pub fn connes_operator(a: &GCAlgebra, t: &[Monomial]) -> Vec<(Tensor, Rational)> {
    if t[0].is_one() {
        return Vec::new();
    }
    let n = t.len() - 1;
    let degs: Vec<i32> = t.iter().map(|m| a.degree(m)).collect();
    let mut acc: BTreeMap<Tensor, Rational> = BTreeMap::new();
    for i in 0..=n {
        let before: i32 = degs[..i].iter().sum();
        let after: i32 = degs[i..].iter().sum();
        let neg = (n * i % 2 == 1) ^ (parity(before) && parity(after));
        let mut u = vec![Monomial::one(a.ngens())];
        u.extend_from_slice(&t[i..]);
        u.extend_from_slice(&t[..i]);
        let e = acc.entry(u).or_insert_with(Rational::zero);
        *e += signed(&Rational::one(), neg);
    }
    acc.into_iter().filter(|(_, c)| !c.is_zero()).collect()
}

pub fn bar_complex(a: &GCAlgebra, max_weight: u32, min_degree: i32) -> Result<BarComplex, HochschildError> {
    BarComplex::new(a, max_weight, min_degree)
}

/// The bar complex with its Connes operator, as a mixed complex.
pub fn connes_b(bc: &BarComplex) -> MixedComplex {
    bc.mixed.clone()
}

/// `Sym_A(Ω_A[1])` for a free algebra: generators `x` and `dx`, with `dx` of
/// degree `deg x − 1` and form-weight `weight x − 1`.
pub fn loop_algebra(a: &GCAlgebra) -> Result<GCAlgebra, HochschildError> {
    if !a.relations().is_empty() {
        return Err(HochschildError::NotFree(a.name().to_string()));
    }
    let mut gens: Vec<Generator> = a.generators().to_vec();
    for g in a.generators() {
        gens.push(Generator::new(format!("d{}", g.name), g.degree - 1, g.weight - 1));
    }
    Ok(GCAlgebra::free(format!("Omega({})", a.name()), gens)?)
}

fn loop_slot(l: &GCAlgebra, m: &Monomial) -> Slot {
    (l.degree(m), m.total() as i32)
}

/// Hochschild homology of a free algebra via the Koszul resolution of the
/// diagonal: after base change the differential vanishes and the complex is
/// `Sym_A(Ω_A[1])`, sliced by `(degree, poly-weight)`.
pub fn koszul_hh(a: &GCAlgebra, max_weight: u32) -> Result<BigradedComplex, HochschildError> {
    let l = loop_algebra(a)?;
    let mut bases: BTreeMap<Slot, Vec<String>> = BTreeMap::new();
    for w in 0..=max_weight {
        for m in l.monomials_of_weight(w) {
            bases.entry(loop_slot(&l, &m)).or_default().push(l.format_monomial(&m));
        }
    }
    Ok(BigradedComplex::new(bases, BTreeMap::new())?)
}

/// The Koszul complex of `x_i ⊗ 1 − 1 ⊗ x_i` base-changed along the
/// multiplication map, for a classical polynomial ring: an exterior algebra
/// over `A` on generators `e_i` with `d e_i = x_i − x_i`.
pub fn koszul_diagonal_differentials(a: &GCAlgebra) -> Result<Vec<Element>, HochschildError> {
    require_classical(a)?;
    // μ(x_i ⊗ 1 − 1 ⊗ x_i)
    Ok((0..a.ngens()).map(|i| a.gen(i).sub(&a.gen(i))).collect())
}

fn require_classical(a: &GCAlgebra) -> Result<(), HochschildError> {
    if a.is_classical_polynomial() {
        Ok(())
    } else {
        Err(HochschildError::NotClassicalPolynomial(a.name().to_string()))
    }
}

fn permutations(n: usize) -> Vec<(Vec<usize>, bool)> {
    if n == 0 {
        return vec![(Vec::new(), false)];
    }
    let mut out = Vec::new();
    for (p, odd) in permutations(n - 1) {
        // insert n-1 at position k: it passes n-1-k elements
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push((q, odd ^ ((n - 1 - k) % 2 == 1)));
        }
    }
    out
}

fn split_form(k: usize, m: &Monomial) -> (Monomial, Vec<usize>) {
    let coeff = Monomial(m.0[..k].to_vec());
    let dxs = (0..k).filter(|&i| m.0[k + i] == 1).collect();
    (coeff, dxs)
}

/// Ω^n in poly-weight `w` for a classical polynomial ring, as loop-algebra monomials.
pub fn forms_basis(l: &GCAlgebra, n: usize, w: u32) -> Vec<Monomial> {
    l.weight_slice(-(n as i32), -(n as i32), w)
}

/// `ε_n(a dx_I) = Σ_σ sgn σ · a ⊗ x_{σ(I)}`.
pub fn hkr_epsilon(a: &GCAlgebra, form: &Monomial) -> Vec<(Tensor, Rational)> {
    let k = a.ngens();
    let (coeff, dxs) = split_form(k, form);
    permutations(dxs.len())
        .into_iter()
        .map(|(p, odd)| {
            let mut t = vec![coeff.clone()];
            t.extend(p.iter().map(|&j| Monomial::generator(k, dxs[j])));
            (t, signed(&Rational::one(), odd))
        })
        .collect()
}

/// The HKR map on `Ω^n` with poly-weight at most `max_weight`, as a chain map
/// into the bar complex.
pub fn hkr_map(a: &GCAlgebra, bc: &BarComplex, n: usize) -> Result<ChainMap, HochschildError> {
    require_classical(a)?;
    let l = loop_algebra(a)?;
    let mut bases = BTreeMap::new();
    let mut maps = BTreeMap::new();
    for w in 0..=bc.max_weight() {
        let forms = forms_basis(&l, n, w);
        if forms.is_empty() {
            continue;
        }
        let slot = (-(n as i32), w as i32);
        let cols: Vec<Vec<Rational>> = forms.iter().map(|f| bc.vector(slot, &hkr_epsilon(a, f))).collect();
        maps.insert(slot, SparseMatrix::from_columns(bc.tensors(slot).len(), &cols));
        bases.insert(slot, forms.iter().map(|f| l.format_monomial(f)).collect());
    }
    let source = BigradedComplex::new(bases, BTreeMap::new())?;
    Ok(ChainMap::new(source, bc.complex().clone(), maps, 0, 0)?)
}

/// Whether `hkr_map` induces a bijection on every slot of `Ω^n` up to the cap.
pub fn hkr_is_quasi_iso(a: &GCAlgebra, bc: &BarComplex, n: usize) -> Result<bool, HochschildError> {
    let f = hkr_map(a, bc, n)?;
    for w in 0..=bc.max_weight() as i32 {
        let s = (-(n as i32), w);
        if !f.is_quasi_iso_at(s)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn de_rham_of_monomial(l: &GCAlgebra, k: usize, m: &Monomial) -> Element {
    let mut out = Element::zero();
    for i in 0..k {
        if m.0[i] == 0 {
            continue;
        }
        let mut e = m.0.clone();
        e[i] -= 1;
        let mut dx = vec![0; 2 * k];
        dx[k + i] = 1;
        let term = l.mul_monomials(&Monomial(e), &Monomial(dx));
        out = out.add(&term.scale(&rat(m.0[i] as i64)));
    }
    out
}

fn lift(k: usize, m: &Monomial) -> Monomial {
    let mut e = m.0.clone();
    e.extend(std::iter::repeat_n(0, k));
    Monomial(e)
}

/// `π(a0 ⊗ … ⊗ an) = a0 da1 ∧ … ∧ dan`, the projection inverse to `ε_n` up to `n!`.
pub fn hkr_projection(l: &GCAlgebra, k: usize, t: &[Monomial]) -> Element {
    let mut acc = Element::term(lift(k, &t[0]), Rational::one());
    for m in &t[1..] {
        acc = l.mul(&acc, &de_rham_of_monomial(l, k, &lift(k, m)));
    }
    acc
}

/// The de Rham differential on a loop-algebra element (classical case).
pub fn de_rham(l: &GCAlgebra, k: usize, e: &Element) -> Element {
    let mut out = Element::zero();
    for (m, c) in e.terms() {
        let coeff = Monomial(m.0[..k].iter().copied().chain(std::iter::repeat_n(0, k)).collect());
        let mut forms = vec![0; k];
        forms.extend_from_slice(&m.0[k..]);
        let df = l.mul(&de_rham_of_monomial(l, k, &coeff), &Element::term(Monomial(forms), Rational::one()));
        out = out.add(&df.scale(c));
    }
    out
}

fn coordinates(basis: &[Monomial], e: &Element) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); basis.len()];
    for (m, c) in e.terms() {
        let i = basis.iter().position(|b| b == m).expect("form lies in the slot basis");
        v[i] = c.clone();
    }
    v
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BCheck {
    pub scalar: Rational,
    pub verified: bool,
    /// Poly-weights at which the identity was compared.
    pub weights: Vec<u32>,
}

/// Matrices of `π_{n+1}∘B` and `d∘π_n` on the bar slot of length `n` and poly-weight `w`.
pub fn b_vs_d_matrices(
    a: &GCAlgebra,
    bc: &BarComplex,
    n: usize,
    w: u32,
) -> Result<(SparseMatrix, SparseMatrix), HochschildError> {
    require_classical(a)?;
    let k = a.ngens();
    let l = loop_algebra(a)?;
    let slot = (-(n as i32), w as i32);
    let target = forms_basis(&l, n + 1, w);
    let connes = bc.mixed().connes(slot);
    let lower = bc.tensors((slot.0 - 1, slot.1));
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (j, t) in bc.tensors(slot).iter().enumerate() {
        let mut lhs = Element::zero();
        for (r, c) in connes.column(j).iter().enumerate() {
            if !c.is_zero() {
                lhs = lhs.add(&hkr_projection(&l, k, &lower[r]).scale(c));
            }
        }
        let rhs = de_rham(&l, k, &hkr_projection(&l, k, t));
        left.push(coordinates(&target, &lhs));
        right.push(coordinates(&target, &rhs));
    }
    Ok((SparseMatrix::from_columns(target.len(), &left), SparseMatrix::from_columns(target.len(), &right)))
}

/// Finds the scalar `c` with `π∘B = c·d∘π` on every bar slot of length `n`
/// up to the weight cap, and checks the identity exactly.
///
/// Restricted to the image of `ε_n` this reads `π∘B∘ε_n = c·d∘π∘ε_n`, the
/// chain-level form of `B ↔ d` under HKR without factorial normalization.
pub fn verify_b_is_de_rham(a: &GCAlgebra, n: usize, max_weight: u32) -> Result<BCheck, HochschildError> {
    require_classical(a)?;
    let bc = bar_complex(a, max_weight, -(n as i32) - 1)?;
    let weights: Vec<u32> = (0..=max_weight).collect();
    let pairs = par::try_map(weights.clone(), |w| b_vs_d_matrices(a, &bc, n, w))?;
    let mut scalar = None;
    for (l, r) in &pairs {
        if let Some((i, j, v)) = r.entries().first() {
            scalar = Some(l.get(*i, *j) / v);
            break;
        }
    }
    let scalar = match scalar {
        Some(c) => c,
        None if pairs.iter().all(|(l, _)| l.is_zero()) => rat(n as i64 + 1),
        None => return Err(HochschildError::NoScalarWorks { n }),
    };
    let verified = pairs.iter().all(|(l, r)| *l == r.scale(&scalar));
    Ok(BCheck { scalar, verified, weights })
}

pub type Table = BTreeMap<Slot, usize>;

fn in_window(t: Table, window: (i32, i32)) -> Table {
    t.into_iter().filter(|(s, _)| s.0 >= window.0 && s.0 <= window.1).collect()
}

/// Which model computes Hochschild homology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Bar,
    Koszul,
}

/// Hochschild homology on every slot of the window with poly-weight at most
/// `max_weight`; slots without chains report 0.
pub fn hh(a: &GCAlgebra, window: (i32, i32), max_weight: u32, backend: Backend) -> Result<Table, HochschildError> {
    let mut t = match backend {
        Backend::Bar => bar_complex(a, max_weight, window.0)?.complex().homology_table()?,
        Backend::Koszul => koszul_hh(a, max_weight)?.homology_table()?,
    };
    for w in 0..=max_weight as i32 {
        for d in window.0..=window.1 {
            t.entry((d, w)).or_insert(0);
        }
    }
    Ok(in_window(t, window).into_iter().filter(|((_, w), _)| *w <= max_weight as i32).collect())
}

fn totalized(a: &GCAlgebra, window: (i32, i32), max_weight: u32, variant: Totalization) -> Result<Table, HochschildError> {
    let bc = bar_complex(a, max_weight, window.0)?;
    Ok(bc.mixed().totalize(variant, window)?.dims()?)
}

pub fn hc(a: &GCAlgebra, window: (i32, i32), max_weight: u32) -> Result<Table, HochschildError> {
    totalized(a, window, max_weight, Totalization::Cyclic)
}

pub fn hc_negative(a: &GCAlgebra, window: (i32, i32), max_weight: u32) -> Result<Table, HochschildError> {
    totalized(a, window, max_weight, Totalization::Negative)
}

pub fn hp(a: &GCAlgebra, window: (i32, i32), max_weight: u32) -> Result<Table, HochschildError> {
    totalized(a, window, max_weight, Totalization::Periodic)
}
