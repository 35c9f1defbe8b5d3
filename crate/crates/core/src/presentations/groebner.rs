//! Buchberger's algorithm for ideals of the even (polynomial) part.

use num_traits::One;

use super::algebra::Element;
use super::PresentationError;
use crate::linalg::Rational;

pub const DEFAULT_BASIS_CAP: usize = 512;

fn monic(p: &Element) -> Element {
    match p.leading() {
        None => Element::zero(),
        Some((_, c)) => p.scale(&c.recip()),
    }
}

/// Full reduction of `p` by `basis` (leading terms taken in graded-lex order).
pub fn reduce(p: &Element, basis: &[Element]) -> Element {
    let mut rest = p.clone();
    let mut remainder = Element::zero();
    'outer: while let Some((m, c)) = rest.pop_leading() {
        for g in basis {
            let (lm, lc) = g.leading().expect("basis elements are nonzero");
            if lm.divides(&m) {
                let q = m.quotient(lm);
                let f: Rational = &c / lc;
                // subtract f * q * (g - lt(g)); lt cancels against the popped term
                for (gm, gc) in g.terms() {
                    if gm == lm {
                        continue;
                    }
                    rest.add_term(gm.times(&q), -(&f * gc));
                }
                continue 'outer;
            }
        }
        remainder.add_term(m, c);
    }
    remainder
}

fn s_polynomial(f: &Element, g: &Element) -> Element {
    let (lf, cf) = f.leading().unwrap();
    let (lg, cg) = g.leading().unwrap();
    let l = lf.lcm(lg);
    let a = f.shift_by(&l.quotient(lf), &cf.recip());
    let b = g.shift_by(&l.quotient(lg), &cg.recip());
    a.sub(&b)
}

/// Reduced Gröbner basis of the ideal generated by `gens`, monic and sorted by
/// leading monomial.
pub fn buchberger(gens: &[Element], cap: usize) -> Result<Vec<Element>, PresentationError> {
    let mut basis: Vec<Element> = Vec::new();
    for g in gens {
        let r = reduce(g, &basis);
        if !r.is_zero() {
            basis.push(monic(&r));
        }
    }
    let mut pairs: Vec<(usize, usize)> =
        (0..basis.len()).flat_map(|j| (0..j).map(move |i| (i, j))).collect();
    while let Some((i, j)) = pairs.pop() {
        let (li, _) = basis[i].leading().unwrap();
        let (lj, _) = basis[j].leading().unwrap();
        if li.coprime(lj) {
            continue;
        }
        let r = reduce(&s_polynomial(&basis[i], &basis[j]), &basis);
        if r.is_zero() {
            continue;
        }
        basis.push(monic(&r));
        if basis.len() > cap {
            return Err(PresentationError::NonterminationGuard { cap });
        }
        let k = basis.len() - 1;
        pairs.extend((0..k).map(|i| (i, k)));
    }
    Ok(interreduce(basis))
}

fn interreduce(mut basis: Vec<Element>) -> Vec<Element> {
    // drop elements whose leading monomial is divisible by another one
    let mut keep: Vec<Element> = Vec::new();
    basis.sort_by(|a, b| a.leading().unwrap().0.cmp(b.leading().unwrap().0));
    for g in basis {
        let lm = g.leading().unwrap().0.clone();
        if keep.iter().any(|h| h.leading().unwrap().0.divides(&lm)) {
            continue;
        }
        keep.push(g);
    }
    let n = keep.len();
    for i in 0..n {
        let others: Vec<Element> =
            keep.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()).collect();
        let (lm, _) = keep[i].leading().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        let tail = Element::from_terms(
            keep[i].terms().filter(|(m, _)| **m != lm).map(|(m, c)| (m.clone(), c.clone())),
        );
        let mut g = reduce(&tail, &others);
        g.add_term(lm, Rational::one());
        keep[i] = g;
    }
    keep
}

/// Whether every S-polynomial of `basis` reduces to zero.
pub fn is_groebner(basis: &[Element]) -> bool {
    for j in 0..basis.len() {
        for i in 0..j {
            if !reduce(&s_polynomial(&basis[i], &basis[j]), basis).is_zero() {
                return false;
            }
        }
    }
    true
}
