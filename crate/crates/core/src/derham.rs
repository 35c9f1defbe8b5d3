//! Differential forms, de Rham cohomology and connections.
//!
//! Forms use the classical grading: `x` in degree 0 and `dx` in degree 1 with
//! form-weight −1, and `d` raises the degree by one. Shearing by −2 gives the
//! loop-space grading where `dx` sits in bidegree (−1, −1) (see [`to_loop_grading`]).
//!
//! A base algebra is either a polynomial ring or a quotient by a declared
//! regular sequence that passes the smoothness checks of [`check_smooth`].
//! Quotients whose relations are not homogeneous in poly-weight are filtered
//! rather than graded; their forms are modelled by the truncations
//! `Ω_{P,≤W} / N_W`, where `N_W` is spanned by the multiples `f·μ` and
//! `df∧ν` of poly-weight at most `W`. The differential preserves `N_W`, so
//! every truncation is a complex.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::complexes::{shear, BigradedComplex, ComplexError, Slot};
use crate::linalg::{self, rat, LinalgError, QuotientMap, Rational, SparseMatrix};
use crate::presentations::{
    buchberger, ConnectionDecl, Document, Element, GCAlgebra, Generator, Monomial, PresentationError,
    DEFAULT_BASIS_CAP,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerhamError {
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error(transparent)]
    Complex(#[from] ComplexError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("`{0}` must have all generators in bidegree (0, 0)")]
    NotClassical(String),
    #[error("`{algebra}` is not smooth: {reason}")]
    NotSmooth { algebra: String, reason: String },
    #[error("`{0}` has relations; this operation needs a polynomial base")]
    NeedsPolynomialBase(String),
    #[error("connection entry [{row}][{col}] = `{form}` is not a 1-form")]
    NotOneForm { row: usize, col: usize, form: String },
    #[error("connection entry [{row}][{col}] is outside rank {rank}")]
    EntryOutOfRange { row: usize, col: usize, rank: usize },
    #[error("module `{module}` is over unknown algebra `{over}`")]
    UnknownAlgebra { module: String, over: String },
    #[error("curvature is not central")]
    NotCentral,
    #[error("`{0}` is not a closed form")]
    NotClosed(String),
}

/// How a smooth base was certified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmoothnessWitness {
    Polynomial,
    /// A regular sequence whose Jacobian has full rank at `point` and whose
    /// singular locus `(f, maximal minors)` is empty.
    RegularSequence { point: Vec<i64> },
}

const JACOBIAN_ATTEMPTS: usize = 3;

fn require_classical(a: &GCAlgebra) -> Result<(), DerhamError> {
    if a.generators().iter().all(|g| g.degree == 0 && g.weight == 0) {
        Ok(())
    } else {
        Err(DerhamError::NotClassical(a.name().to_string()))
    }
}

fn partial(f: &Element, i: usize) -> Element {
    let mut out = Element::zero();
    for (m, c) in f.terms() {
        if m.0[i] > 0 {
            let mut e = m.0.clone();
            e[i] -= 1;
            out.add_term(Monomial(e), c * rat(m.0[i] as i64));
        }
    }
    out
}

fn evaluate(f: &Element, point: &[i64]) -> Rational {
    let mut total = Rational::zero();
    for (m, c) in f.terms() {
        let mut v = c.clone();
        for (e, x) in m.0.iter().zip(point) {
            v *= rat(*x).pow(*e as i32);
        }
        total += v;
    }
    total
}

fn determinant(free: &GCAlgebra, m: &[Vec<Element>]) -> Element {
    let n = m.len();
    if n == 0 {
        return free.one();
    }
    let mut out = Element::zero();
    for j in 0..n {
        let minor: Vec<Vec<Element>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, e)| e.clone()).collect())
            .collect();
        let term = free.mul(&m[0][j], &determinant(free, &minor));
        out = if j % 2 == 0 { out.add(&term) } else { out.sub(&term) };
    }
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Certifies that `a` is smooth.
///
/// The relations must form a sequence whose Jacobian has full rank at a
/// pseudo-random integer point (three attempts), and the ideal generated by
/// the relations and the maximal minors of the Jacobian must be the unit ideal.
pub fn check_smooth(a: &GCAlgebra, seed: u64) -> Result<SmoothnessWitness, DerhamError> {
    require_classical(a)?;
    let rels = a.relations();
    if rels.is_empty() {
        return Ok(SmoothnessWitness::Polynomial);
    }
    let n = a.ngens();
    let c = rels.len();
    let fail = |reason: String| DerhamError::NotSmooth { algebra: a.name().to_string(), reason };
    if c > n {
        return Err(fail(format!("{c} relations in {n} variables")));
    }
    let jac: Vec<Vec<Element>> = rels.iter().map(|f| (0..n).map(|i| partial(f, i)).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = None;
    for _ in 0..JACOBIAN_ATTEMPTS {
        let p: Vec<i64> = (0..n).map(|_| rng.gen_range(-50..=50)).collect();
        let rows: Vec<Vec<Rational>> = jac.iter().map(|r| r.iter().map(|e| evaluate(e, &p)).collect()).collect();
        if linalg::rank(&SparseMatrix::from_dense(c, n, &rows)) == c {
            point = Some(p);
            break;
        }
    }
    let point = point.ok_or_else(|| fail("Jacobian is rank-deficient at every sampled point".into()))?;
    let free = GCAlgebra::free(a.name(), a.generators().to_vec())?;
    let mut ideal: Vec<Element> = rels.to_vec();
    for cols in subsets(n, c) {
        let minor: Vec<Vec<Element>> = jac.iter().map(|r| cols.iter().map(|&j| r[j].clone()).collect()).collect();
        let det = determinant(&free, &minor);
        if !det.is_zero() {
            ideal.push(det);
        }
    }
    let gb = buchberger(&ideal, DEFAULT_BASIS_CAP)?;
    if gb.len() == 1 && gb[0].leading().is_some_and(|(m, _)| m.is_one()) {
        Ok(SmoothnessWitness::RegularSequence { point })
    } else {
        Err(fail("the singular locus is nonempty".into()))
    }
}

/// Which part of the poly-weight filtration a computation sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Exactly this poly-weight; needs weight-homogeneous relations.
    Slice(u32),
    /// Everything of poly-weight at most this.
    UpTo(u32),
}

impl Truncation {
    fn admits(&self, w: u32) -> bool {
        match *self {
            Truncation::Slice(s) => w == s,
            Truncation::UpTo(s) => w <= s,
        }
    }

    fn level(&self) -> u32 {
        match *self {
            Truncation::Slice(s) | Truncation::UpTo(s) => s,
        }
    }
}

/// Differential forms on a smooth base.
#[derive(Debug, Clone)]
pub struct Forms {
    base: GCAlgebra,
    ambient: GCAlgebra,
    relations: Vec<Element>,
    witness: SmoothnessWitness,
}

impl Forms {
    pub fn new(a: &GCAlgebra, seed: u64) -> Result<Self, DerhamError> {
        let witness = check_smooth(a, seed)?;
        let mut gens: Vec<Generator> = a.generators().to_vec();
        for g in a.generators() {
            gens.push(Generator::new(format!("d{}", g.name), 1, -1));
        }
        let ambient = GCAlgebra::free(format!("Omega({})", a.name()), gens)?;
        let k = a.ngens();
        let relations = a
            .relations()
            .iter()
            .map(|f| Element::from_terms(f.terms().map(|(m, c)| (pad(k, m), c.clone()))))
            .collect();
        Ok(Forms { base: a.clone(), ambient, relations, witness })
    }

    pub fn base(&self) -> &GCAlgebra {
        &self.base
    }

    /// The free algebra of forms on the ambient polynomial ring.
    pub fn algebra(&self) -> &GCAlgebra {
        &self.ambient
    }

    pub fn witness(&self) -> &SmoothnessWitness {
        &self.witness
    }

    pub fn nvars(&self) -> usize {
        self.base.ngens()
    }

    pub fn is_polynomial(&self) -> bool {
        self.relations.is_empty()
    }

    /// Whether poly-weight slices are exact summands.
    pub fn is_graded(&self) -> bool {
        self.base.is_weight_graded()
    }

    pub fn dx(&self, i: usize) -> Element {
        self.ambient.gen(self.nvars() + i)
    }

    pub fn x(&self, i: usize) -> Element {
        self.ambient.gen(i)
    }

    /// Embeds a base element as a 0-form.
    pub fn function(&self, f: &Element) -> Element {
        Element::from_terms(f.terms().map(|(m, c)| (pad(self.nvars(), m), c.clone())))
    }

    pub fn form_degree(&self, m: &Monomial) -> usize {
        m.0[self.nvars()..].iter().sum::<u32>() as usize
    }

    pub fn d(&self, e: &Element) -> Element {
        let k = self.nvars();
        let mut out = Element::zero();
        for (m, c) in e.terms() {
            for i in 0..k {
                if m.0[i] == 0 {
                    continue;
                }
                let mut rest = m.0.clone();
                rest[i] -= 1;
                let mut dx = vec![0; 2 * k];
                dx[k + i] = 1;
                let t = self.ambient.mul_monomials(&Monomial(dx), &Monomial(rest));
                out = out.add(&t.scale(&(c * rat(m.0[i] as i64))));
            }
        }
        out
    }

    pub fn wedge(&self, a: &Element, b: &Element) -> Element {
        self.ambient.mul(a, b)
    }

    /// Ambient monomials of form degree `p` admitted by `t`, in descending order.
    pub fn basis(&self, p: usize, t: Truncation) -> Vec<Monomial> {
        let mut out = Vec::new();
        for w in (0..=t.level()).rev() {
            if t.admits(w) {
                out.extend(self.ambient.weight_slice(p as i32, -(p as i32), w));
            }
        }
        out
    }

    fn weight(e: &Element) -> u32 {
        e.terms().map(|(m, _)| m.total()).max().unwrap_or(0)
    }

    /// Spanning vectors of `N^p` inside `basis(p, t)`.
    pub fn relation_span(&self, p: usize, t: Truncation) -> Vec<Vec<Rational>> {
        let target = self.basis(p, t);
        let index: BTreeMap<&Monomial, usize> = target.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut out = Vec::new();
        for f in &self.relations {
            let wf = Self::weight(f);
            let df = self.d(f);
            let mut generators: Vec<Element> = Vec::new();
            for w in 0..=t.level() {
                if !t.admits(w + wf) {
                    continue;
                }
                for mu in self.ambient.weight_slice(p as i32, -(p as i32), w) {
                    generators.push(self.wedge(f, &Element::term(mu, Rational::one())));
                }
                if p >= 1 {
                    for nu in self.ambient.weight_slice(p as i32 - 1, 1 - p as i32, w) {
                        generators.push(self.wedge(&Element::term(nu, Rational::one()), &df));
                    }
                }
            }
            for g in generators {
                out.push(vector_in(&index, target.len(), &g));
            }
        }
        out
    }

    /// The quotient `Ω^p_t / N^p_t` together with its ambient basis.
    pub fn quotient(&self, p: usize, t: Truncation) -> (Vec<Monomial>, QuotientMap) {
        let basis = self.basis(p, t);
        let q = QuotientMap::new(basis.len(), &self.relation_span(p, t));
        (basis, q)
    }

    /// Matrix of `d: Ω^p_t / N → Ω^{p+1}_t / N` in the quotient bases.
    pub fn d_matrix(&self, p: usize, t: Truncation) -> (SparseMatrix, usize, usize) {
        let (src, qs) = self.quotient(p, t);
        let (dst, qd) = self.quotient(p + 1, t);
        let index: BTreeMap<&Monomial, usize> = dst.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let cols: Vec<Vec<Rational>> = qs
            .free_coordinates()
            .iter()
            .map(|&j| {
                let img = self.d(&Element::term(src[j].clone(), Rational::one()));
                qd.project(&vector_in(&index, dst.len(), &img))
            })
            .collect();
        (SparseMatrix::from_columns(qd.quotient_dim(), &cols), qs.quotient_dim(), qd.quotient_dim())
    }

    /// Labels of the quotient basis of `Ω^p_t / N`.
    pub fn quotient_labels(&self, p: usize, t: Truncation) -> Vec<String> {
        let (basis, q) = self.quotient(p, t);
        q.free_coordinates().iter().map(|&i| self.ambient.format_monomial(&basis[i])).collect()
    }

    pub fn format(&self, e: &Element) -> String {
        self.ambient.format(e)
    }
}

fn pad(k: usize, m: &Monomial) -> Monomial {
    let mut e = m.0.clone();
    e.resize(2 * k, 0);
    Monomial(e)
}

fn vector_in(index: &BTreeMap<&Monomial, usize>, n: usize, e: &Element) -> Vec<Rational> {
    let mut v = vec![Rational::zero(); n];
    for (m, c) in e.terms() {
        let i = *index.get(m).expect("form lies in the truncation");
        v[i] += c;
    }
    v
}

/// Presentation of the Kähler differentials of a smooth base.
#[derive(Debug, Clone)]
pub struct Kaehler {
    pub forms: Forms,
    /// The 1-forms `df` of the relations; together with `f·Ω¹` they present Ω¹.
    pub relations: Vec<Element>,
}

impl Kaehler {
    pub fn generators(&self) -> Vec<String> {
        (0..self.forms.nvars()).map(|i| self.forms.format(&self.forms.dx(i))).collect()
    }

    /// Dimension of `Ω^p` in the given truncation.
    pub fn dim(&self, p: usize, t: Truncation) -> usize {
        self.forms.quotient(p, t).1.quotient_dim()
    }
}

pub fn kaehler(a: &GCAlgebra, seed: u64) -> Result<Kaehler, DerhamError> {
    let forms = Forms::new(a, seed)?;
    let relations = forms.relations.iter().map(|f| forms.d(f)).collect();
    Ok(Kaehler { forms, relations })
}

/// The de Rham complex; slots are `(p, w)` with `w` the poly-weight slice, or
/// the truncation level when the base is only filtered.
#[derive(Debug, Clone)]
pub struct DeRhamComplex {
    pub complex: BigradedComplex,
    pub filtered: bool,
}

pub fn de_rham_complex(forms: &Forms, cap: u32) -> Result<DeRhamComplex, DerhamError> {
    let filtered = !forms.is_graded();
    let n = forms.nvars();
    let mut bases = BTreeMap::new();
    let mut diffs = BTreeMap::new();
    for w in 0..=cap {
        let t = if filtered { Truncation::UpTo(w) } else { Truncation::Slice(w) };
        for p in 0..=n {
            bases.insert((p as i32, w as i32), forms.quotient_labels(p, t));
            if p < n {
                diffs.insert((p as i32, w as i32), forms.d_matrix(p, t).0);
            }
        }
    }
    Ok(DeRhamComplex { complex: BigradedComplex::new(bases, diffs)?, filtered })
}

/// Dimensions of `H^p_dR` per poly-weight slice (or truncation level) up to `cap`.
pub fn derham_cohomology(a: &GCAlgebra, p: usize, cap: u32, seed: u64) -> Result<BTreeMap<u32, usize>, DerhamError> {
    let forms = Forms::new(a, seed)?;
    let c = de_rham_complex(&forms, cap)?;
    let mut out = BTreeMap::new();
    for w in 0..=cap {
        out.insert(w, c.complex.homology_dim(p as i32, w as i32)?);
    }
    Ok(out)
}

/// Reindexes a complex graded by (form degree p, form-weight −p) into the
/// loop-space grading (−p, −p).
pub fn to_loop_grading(c: &BigradedComplex) -> BigradedComplex {
    shear(c, -2)
}

/// The forms of a polynomial base graded by (degree, form-weight) with zero differential.
pub fn forms_by_form_weight(forms: &Forms, cap: u32) -> BigradedComplex {
    let mut dims: BTreeMap<Slot, usize> = BTreeMap::new();
    for w in 0..=cap {
        for p in 0..=forms.nvars() {
            let n = forms.basis(p, Truncation::Slice(w)).len();
            *dims.entry((p as i32, -(p as i32))).or_default() += n;
        }
    }
    BigradedComplex::zero_differential(&dims)
}

/// An element `ω0 + ω1·δ` of `Ω[δ]`, the forms with the differential adjoined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OmegaDElement {
    pub base: Element,
    pub delta: Element,
}

/// `Ω[δ]` over a polynomial base: `δ` is odd of degree 1, `δ² = 0` and
/// `δω − (−1)^{|ω|} ωδ = dω`.
#[derive(Debug, Clone)]
pub struct OmegaD {
    forms: Forms,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewritingReport {
    pub checked_basis: usize,
    pub delta_squared_zero: bool,
    pub commutator_is_d: bool,
    pub associative: bool,
}

impl RewritingReport {
    pub fn ok(&self) -> bool {
        self.delta_squared_zero && self.commutator_is_d && self.associative
    }
}

fn sign_of_degree(e: &Element, forms: &Forms) -> Element {
    // (-1)^{|ω|} ω for a form of mixed degree
    Element::from_terms(e.terms().map(|(m, c)| {
        let odd = forms.form_degree(m) % 2 == 1;
        (m.clone(), if odd { -c.clone() } else { c.clone() })
    }))
}

impl OmegaD {
    pub fn forms(&self) -> &Forms {
        &self.forms
    }

    pub fn form(&self, e: Element) -> OmegaDElement {
        OmegaDElement { base: e, delta: Element::zero() }
    }

    pub fn delta(&self) -> OmegaDElement {
        OmegaDElement { base: Element::zero(), delta: self.forms.algebra().one() }
    }

    pub fn add(&self, a: &OmegaDElement, b: &OmegaDElement) -> OmegaDElement {
        OmegaDElement { base: a.base.add(&b.base), delta: a.delta.add(&b.delta) }
    }

    pub fn sub(&self, a: &OmegaDElement, b: &OmegaDElement) -> OmegaDElement {
        OmegaDElement { base: a.base.sub(&b.base), delta: a.delta.sub(&b.delta) }
    }

    /// `(a0 + a1δ)(b0 + b1δ) = (a0b0 + a1 db0) + (a0b1 + a1·(−1)^{|b0|}b0 + a1 db1)δ`.
    pub fn mul(&self, a: &OmegaDElement, b: &OmegaDElement) -> OmegaDElement {
        let f = &self.forms;
        let base = f.wedge(&a.base, &b.base).add(&f.wedge(&a.delta, &f.d(&b.base)));
        let delta = f
            .wedge(&a.base, &b.delta)
            .add(&f.wedge(&a.delta, &sign_of_degree(&b.base, f)))
            .add(&f.wedge(&a.delta, &f.d(&b.delta)));
        OmegaDElement { base, delta }
    }

    /// Graded commutator `[δ, ω] = δω − (−1)^{|ω|} ωδ` for a homogeneous form `ω`.
    pub fn delta_commutator(&self, w: &Element) -> OmegaDElement {
        let d = self.delta();
        let wf = self.form(w.clone());
        let left = self.mul(&d, &wf);
        let right = self.mul(&wf, &d);
        let right = OmegaDElement {
            base: sign_of_degree(&right.base, &self.forms),
            delta: sign_of_degree(&right.delta, &self.forms),
        };
        self.sub(&left, &right)
    }

    /// Checks the defining relations and associativity on all basis elements
    /// of poly-weight at most `cap`.
    pub fn verify(&self, cap: u32) -> RewritingReport {
        let f = &self.forms;
        let n = f.nvars();
        let mut mons = Vec::new();
        for p in 0..=n {
            mons.extend(f.basis(p, Truncation::UpTo(cap)));
        }
        let zero = OmegaDElement { base: Element::zero(), delta: Element::zero() };
        let d = self.delta();
        let delta_squared_zero = self.mul(&d, &d) == zero;
        let commutator_is_d = mons.iter().all(|m| {
            let w = Element::term(m.clone(), Rational::one());
            self.delta_commutator(&w) == self.form(f.d(&w))
        });
        let mut elems: Vec<OmegaDElement> = Vec::new();
        for m in mons.iter().filter(|m| m.total() <= 1.max(cap / 2)) {
            let w = Element::term(m.clone(), Rational::one());
            elems.push(self.form(w.clone()));
            elems.push(OmegaDElement { base: Element::zero(), delta: w });
        }
        elems.push(d);
        let mut associative = true;
        'outer: for a in &elems {
            for b in &elems {
                let ab = self.mul(a, b);
                for c in &elems {
                    if self.mul(&ab, c) != self.mul(a, &self.mul(b, c)) {
                        associative = false;
                        break 'outer;
                    }
                }
            }
        }
        RewritingReport { checked_basis: mons.len(), delta_squared_zero, commutator_is_d, associative }
    }
}

pub fn build_omega_d(a: &GCAlgebra) -> Result<OmegaD, DerhamError> {
    let forms = Forms::new(a, 0)?;
    if !forms.is_polynomial() {
        return Err(DerhamError::NeedsPolynomialBase(a.name().to_string()));
    }
    Ok(OmegaD { forms })
}

/// A free module `E = A^r` with connection `∇ = d + Γ`.
#[derive(Debug, Clone)]
pub struct ConnectionModule {
    name: String,
    forms: Forms,
    gamma: Vec<Vec<Element>>,
}

/// A section of `E ⊗ Ω`: one form per basis vector of `E`.
pub type Section = Vec<Element>;

impl ConnectionModule {
    pub fn new(name: impl Into<String>, base: &GCAlgebra, gamma: Vec<Vec<Element>>) -> Result<Self, DerhamError> {
        let forms = Forms::new(base, 0)?;
        if !forms.is_polynomial() {
            return Err(DerhamError::NeedsPolynomialBase(base.name().to_string()));
        }
        let r = gamma.len();
        for (i, row) in gamma.iter().enumerate() {
            if row.len() != r {
                return Err(DerhamError::EntryOutOfRange { row: i, col: row.len(), rank: r });
            }
            for (j, g) in row.iter().enumerate() {
                if g.terms().any(|(m, _)| forms.form_degree(m) != 1) {
                    return Err(DerhamError::NotOneForm { row: i, col: j, form: forms.format(g) });
                }
            }
        }
        Ok(ConnectionModule { name: name.into(), forms, gamma })
    }

    /// Builds the module from a parsed declaration; `dx` in entries is the
    /// differential of the base generator `x`.
    pub fn from_decl(decl: &ConnectionDecl, doc: &Document) -> Result<Self, DerhamError> {
        let base = doc.algebra(&decl.over).ok_or_else(|| DerhamError::UnknownAlgebra {
            module: decl.name.clone(),
            over: decl.over.clone(),
        })?;
        let forms = Forms::new(base, 0)?;
        let r = decl.rank;
        let mut gamma = vec![vec![Element::zero(); r]; r];
        for (i, j, e) in &decl.entries {
            if *i >= r || *j >= r {
                return Err(DerhamError::EntryOutOfRange { row: *i, col: *j, rank: r });
            }
            gamma[*i][*j] = e.eval(forms.algebra())?;
        }
        ConnectionModule::new(decl.name.clone(), base, gamma)
    }

    /// Rebuilds the module from its base and its connection matrix.
    pub fn from_connection_data(name: &str, base: &GCAlgebra, gamma: &[Vec<Element>]) -> Result<Self, DerhamError> {
        ConnectionModule::new(name, base, gamma.to_vec())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rank(&self) -> usize {
        self.gamma.len()
    }

    pub fn forms(&self) -> &Forms {
        &self.forms
    }

    pub fn gamma(&self) -> &[Vec<Element>] {
        &self.gamma
    }

    /// `(δs)_i = ds_i + Σ_j Γ_ij ∧ s_j`.
    pub fn delta(&self, s: &Section) -> Section {
        let f = &self.forms;
        (0..self.rank())
            .map(|i| {
                let mut out = f.d(&s[i]);
                for (j, sj) in s.iter().enumerate() {
                    out = out.add(&f.wedge(&self.gamma[i][j], sj));
                }
                out
            })
            .collect()
    }

    /// Left multiplication by a matrix of forms.
    pub fn act(&self, m: &[Vec<Element>], s: &Section) -> Section {
        let f = &self.forms;
        (0..self.rank())
            .map(|i| {
                let mut out = Element::zero();
                for (j, sj) in s.iter().enumerate() {
                    out = out.add(&f.wedge(&m[i][j], sj));
                }
                out
            })
            .collect()
    }

    /// The basis section `e_i ⊗ μ`.
    pub fn basis_section(&self, i: usize, mu: &Monomial) -> Section {
        let mut s = vec![Element::zero(); self.rank()];
        s[i] = Element::term(mu.clone(), Rational::one());
        s
    }

    fn slot_basis(&self, s: Slot) -> Vec<(usize, Monomial)> {
        if s.0 < 0 || s.1 < 0 {
            return Vec::new();
        }
        let mons = self.forms.basis(s.0 as usize, Truncation::Slice(s.1 as u32));
        (0..self.rank()).flat_map(|i| mons.iter().map(move |m| (i, m.clone()))).collect()
    }

    /// Splits an operator on sections into matrices between `(p, w)` slots.
    pub fn blocks<F>(&self, source: Slot, op: F) -> BTreeMap<Slot, SparseMatrix>
    where
        F: Fn(&Section) -> Section,
    {
        let src = self.slot_basis(source);
        let images: Vec<Section> = src.iter().map(|(i, m)| op(&self.basis_section(*i, m))).collect();
        let mut targets: BTreeSet<Slot> = BTreeSet::new();
        for img in &images {
            for e in img {
                for (m, _) in e.terms() {
                    targets.insert((self.forms.form_degree(m) as i32, m.total() as i32));
                }
            }
        }
        let mut out = BTreeMap::new();
        for t in targets {
            let basis = self.slot_basis(t);
            let index: BTreeMap<(usize, &Monomial), usize> =
                basis.iter().enumerate().map(|(k, (i, m))| ((*i, m), k)).collect();
            let mut trip = Vec::new();
            for (col, img) in images.iter().enumerate() {
                for (i, e) in img.iter().enumerate() {
                    for (m, c) in e.terms() {
                        if (self.forms.form_degree(m) as i32, m.total() as i32) == t {
                            trip.push((index[&(i, m)], col, c.clone()));
                        }
                    }
                }
            }
            out.insert(t, SparseMatrix::from_triplets(basis.len(), src.len(), trip));
        }
        out
    }

    /// Blocks of δ leaving slot `(p, w)`.
    pub fn delta_blocks(&self, source: Slot) -> BTreeMap<Slot, SparseMatrix> {
        self.blocks(source, |s| self.delta(s))
    }

    /// Blocks of δ∘δ leaving slot `(p, w)`, composed from the δ blocks.
    pub fn delta_squared_blocks(&self, source: Slot) -> BTreeMap<Slot, SparseMatrix> {
        let mut out: BTreeMap<Slot, SparseMatrix> = BTreeMap::new();
        for (mid, first) in self.delta_blocks(source) {
            for (t, second) in self.delta_blocks(mid) {
                let prod = second.mul(&first);
                let e = out.entry(t).or_insert_with(|| SparseMatrix::zeros(prod.rows(), prod.cols()));
                *e = e.add(&prod);
            }
        }
        out.retain(|_, m| !m.is_zero());
        out
    }

    /// Blocks of multiplication by the curvature leaving slot `(p, w)`.
    pub fn curvature_blocks(&self, source: Slot) -> BTreeMap<Slot, SparseMatrix> {
        let r = curvature(self);
        let mut out = self.blocks(source, |s| self.act(&r, s));
        out.retain(|_, m| !m.is_zero());
        out
    }

    /// Whether δ² equals multiplication by the curvature on every slot of
    /// poly-weight at most `cap`.
    pub fn delta_squared_is_curvature(&self, cap: u32) -> bool {
        let n = self.forms.nvars() as i32;
        (0..=n).all(|p| (0..=cap as i32).all(|w| self.delta_squared_blocks((p, w)) == self.curvature_blocks((p, w))))
    }
}

/// `R = dΓ + Γ∧Γ`.
pub fn curvature(m: &ConnectionModule) -> Vec<Vec<Element>> {
    let f = &m.forms;
    let r = m.rank();
    (0..r)
        .map(|i| {
            (0..r)
                .map(|j| {
                    let mut e = f.d(&m.gamma[i][j]);
                    for k in 0..r {
                        e = e.add(&f.wedge(&m.gamma[i][k], &m.gamma[k][j]));
                    }
                    e
                })
                .collect()
        })
        .collect()
}

pub fn is_zero_matrix(m: &[Vec<Element>]) -> bool {
    m.iter().all(|row| row.iter().all(Element::is_zero))
}

/// A flat connection viewed as a square-zero module over `Ω[δ]`.
#[derive(Debug, Clone)]
pub struct FlatModule {
    pub module: ConnectionModule,
}

impl FlatModule {
    pub fn delta(&self, s: &Section) -> Section {
        self.module.delta(s)
    }

    /// `δ(ω·s) − (−1)^{|ω|} ω·δ(s) = dω·s` for a homogeneous form `ω`.
    pub fn leibniz_holds(&self, w: &Element, s: &Section) -> bool {
        let f = self.module.forms();
        let ws: Section = s.iter().map(|e| f.wedge(w, e)).collect();
        let lhs_a = self.delta(&ws);
        let ds = self.delta(s);
        let odd = w.terms().next().is_some_and(|(m, _)| f.form_degree(m) % 2 == 1);
        let rhs: Section = s.iter().map(|e| f.wedge(&f.d(w), e)).collect();
        lhs_a
            .iter()
            .zip(&ds)
            .zip(&rhs)
            .all(|((l, d), r)| {
                let wd = f.wedge(w, d);
                let lhs = if odd { l.add(&wd) } else { l.sub(&wd) };
                lhs == *r
            })
    }
}

#[derive(Debug, Clone)]
pub enum FlatDescent {
    Flat(Box<FlatModule>),
    FlatnessFailure(Vec<Vec<Element>>),
}

pub fn flat_descend(m: &ConnectionModule) -> FlatDescent {
    let r = curvature(m);
    if is_zero_matrix(&r) {
        FlatDescent::Flat(Box::new(FlatModule { module: m.clone() }))
    } else {
        FlatDescent::FlatnessFailure(r)
    }
}

/// A central curvature `R = id ⊗ ω`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurvatureCharacter {
    pub omega: Element,
    pub closed: bool,
}

pub fn central_character(m: &ConnectionModule) -> Result<CurvatureCharacter, DerhamError> {
    let r = curvature(m);
    let omega = r[0][0].clone();
    for (i, row) in r.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let expected = if i == j { &omega } else { &Element::zero() };
            if e != expected {
                return Err(DerhamError::NotCentral);
            }
        }
    }
    let closed = m.forms.d(&omega).is_zero();
    if !closed {
        return Err(DerhamError::NotClosed(m.forms.format(&omega)));
    }
    Ok(CurvatureCharacter { omega, closed })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equivalence {
    pub equivalent: bool,
    /// A 1-form with `dα = ω2 − ω1`.
    pub alpha: Option<Element>,
}

/// Decides whether `ω2 − ω1` is exact within poly-weight `cap`, slice by slice.
pub fn character_equivalent(forms: &Forms, w1: &Element, w2: &Element, cap: u32) -> Result<Equivalence, DerhamError> {
    let diff = w2.sub(w1);
    if diff.terms().any(|(m, _)| m.total() > cap || forms.form_degree(m) != 2) {
        return Ok(Equivalence { equivalent: false, alpha: None });
    }
    let mut alpha = Element::zero();
    for w in 0..=cap {
        let target = forms.basis(2, Truncation::Slice(w));
        let source = forms.basis(1, Truncation::Slice(w));
        let tindex: BTreeMap<&Monomial, usize> = target.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let part = Element::from_terms(diff.terms().filter(|(m, _)| m.total() == w).map(|(m, c)| (m.clone(), c.clone())));
        if part.is_zero() {
            continue;
        }
        let cols: Vec<Vec<Rational>> = source
            .iter()
            .map(|m| vector_in(&tindex, target.len(), &forms.d(&Element::term(m.clone(), Rational::one()))))
            .collect();
        let d = SparseMatrix::from_columns(target.len(), &cols);
        match linalg::solve(&d, &vector_in(&tindex, target.len(), &part)) {
            None => return Ok(Equivalence { equivalent: false, alpha: None }),
            Some(x) => {
                for (m, c) in source.iter().zip(x) {
                    alpha.add_term(m.clone(), c);
                }
            }
        }
    }
    debug_assert_eq!(forms.d(&alpha), diff);
    Ok(Equivalence { equivalent: true, alpha: Some(alpha) })
}
