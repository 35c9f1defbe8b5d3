//! Parser for `.ring` files.
//!
//! ```text
//! file     := item*
//! item     := algebra | module
//! algebra  := "algebra" IDENT "{" "gens:" genlist ";" ("rels:" exprlist ";")? "}"
//! genlist  := (IDENT ":(" INT "," INT ")" ("," IDENT ":(" INT "," INT ")")*)?
//! module   := "module" IDENT "over" IDENT "{" "rank:" INT ";" ("conn:" entry ("," entry)* ";")* "}"
//! entry    := IDENT "[" INT "]" "[" INT "]" "=" expr
//! ```
//!
//! Expressions are polynomials with `+ - * ^`, parentheses and literals `p` or
//! `p/q`; `a^b` with a factor `b` is a product, so printed forms such as
//! `dx^dy` read back. Inside a module, `dx` denotes the differential of the generator `x`.
//! Line comments start with `#` or `//`.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use super::algebra::{Element, GCAlgebra, Generator, Monomial};
use super::PresentationError;
use crate::linalg::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Num(Rational),
    Var(String),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    /// Evaluates in `alg`, reducing to normal form after every product.
    pub fn eval(&self, alg: &GCAlgebra) -> Result<Element, PresentationError> {
        Ok(match self {
            Expr::Num(q) => alg.constant(q.clone()),
            Expr::Var(v) => alg.gen_named(v)?,
            Expr::Add(a, b) => a.eval(alg)?.add(&b.eval(alg)?),
            Expr::Sub(a, b) => a.eval(alg)?.sub(&b.eval(alg)?),
            Expr::Mul(a, b) => alg.mul(&a.eval(alg)?, &b.eval(alg)?),
            Expr::Neg(a) => a.eval(alg)?.neg(),
            Expr::Pow(a, k) => alg.pow(&a.eval(alg)?, *k),
        })
    }

    fn odd_power(&self, gens: &[Generator]) -> Option<String> {
        match self {
            Expr::Num(_) | Expr::Var(_) => None,
            Expr::Pow(a, k) => {
                if let Expr::Var(v) = a.as_ref() {
                    if *k >= 2 && gens.iter().any(|g| &g.name == v && g.is_odd()) {
                        return Some(v.clone());
                    }
                }
                a.odd_power(gens)
            }
            Expr::Neg(a) => a.odd_power(gens),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.odd_power(gens).or_else(|| b.odd_power(gens))
            }
        }
    }

    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Pow(a, _) | Expr::Neg(a) => a.variables(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.variables(out);
                b.variables(out);
            }
        }
    }
}

/// A `module` item: a free module with a connection matrix of 1-form expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionDecl {
    pub name: String,
    pub over: String,
    pub rank: usize,
    pub entries: Vec<(usize, usize, Expr)>,
}

#[derive(Debug, Clone, Default)]
pub struct Document {
    pub algebras: Vec<GCAlgebra>,
    pub modules: Vec<ConnectionDecl>,
}

impl Document {
    pub fn algebra(&self, name: &str) -> Option<&GCAlgebra> {
        self.algebras.iter().find(|a| a.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, PresentationError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        if c.is_ascii_digit() {
            let s = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let text: String = chars[s..i].iter().collect();
            col += i - s;
            out.push(Token { tok: Tok::Int(text.parse().unwrap()), line, column: start_col });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            let text: String = chars[s..i].iter().collect();
            col += i - s;
            out.push(Token { tok: Tok::Ident(text), line, column: start_col });
            continue;
        }
        if "{}():,;+-*^/[]=".contains(c) {
            out.push(Token { tok: Tok::Sym(c), line, column: start_col });
            i += 1;
            col += 1;
            continue;
        }
        return Err(PresentationError::Parse {
            line,
            column: col,
            message: format!("unexpected character `{c}`"),
        });
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn new(src: &str) -> Result<Self, PresentationError> {
        let toks = lex(src)?;
        let lines = src.lines().count().max(1);
        let last = src.lines().last().map_or(0, |l| l.chars().count());
        Ok(Parser { toks, pos: 0, end: (lines, last + 1) })
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, PresentationError> {
        let (line, column) = match self.toks.get(self.pos) {
            Some(t) => (t.line, t.column),
            None => self.end,
        };
        Err(PresentationError::Parse { line, column, message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), PresentationError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), PresentationError> {
        if self.peek_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{kw}`"))
        }
    }

    fn ident(&mut self) -> Result<String, PresentationError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected identifier"),
        }
    }

    fn int(&mut self) -> Result<i64, PresentationError> {
        let neg = self.eat_sym('-');
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                let v = n.to_i64();
                match v {
                    Some(v) => Ok(if neg { -v } else { v }),
                    None => self.err("integer out of range"),
                }
            }
            _ => self.err("expected integer"),
        }
    }

    fn expr(&mut self) -> Result<Expr, PresentationError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_sym('+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat_sym('-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, PresentationError> {
        let mut lhs = self.unary()?;
        while self.eat_sym('*') {
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, PresentationError> {
        if self.eat_sym('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_sym('+') {
            return self.unary();
        }
        let base = self.atom()?;
        if self.eat_sym('^') {
            if matches!(self.peek(), Some(Tok::Ident(_)) | Some(Tok::Sym('('))) {
                // `a^b` with a factor on the right is the wedge product, as printed for forms
                return Ok(Expr::Mul(Box::new(base), Box::new(self.unary()?)));
            }
            let k = self.int()?;
            if k < 0 || k > u32::MAX as i64 {
                return self.err("exponent must be a nonnegative integer");
            }
            return Ok(Expr::Pow(Box::new(base), k as u32));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, PresentationError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.pos += 1;
                if self.eat_sym('/') {
                    match self.peek().cloned() {
                        Some(Tok::Int(d)) if !d.is_zero() => {
                            self.pos += 1;
                            Ok(Expr::Num(Rational::new(n, d)))
                        }
                        _ => self.err("expected nonzero denominator"),
                    }
                } else {
                    Ok(Expr::Num(Rational::from_integer(n)))
                }
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                Ok(Expr::Var(s))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            _ => self.err("expected expression"),
        }
    }

    fn algebra(&mut self) -> Result<GCAlgebra, PresentationError> {
        self.expect_keyword("algebra")?;
        let name = self.ident()?;
        self.expect_sym('{')?;
        self.expect_keyword("gens")?;
        self.expect_sym(':')?;
        let mut gens = Vec::new();
        let mut more = !self.eat_sym(';');
        while more {
            let at = self.pos;
            let g = self.ident()?;
            self.expect_sym(':')?;
            self.expect_sym('(')?;
            let d = self.int()?;
            self.expect_sym(',')?;
            let w = self.int()?;
            self.expect_sym(')')?;
            if gens.iter().any(|h: &Generator| h.name == g) {
                self.pos = at;
                return self.err(format!("generator `{g}` declared twice"));
            }
            gens.push(Generator::new(g, d as i32, w as i32));
            more = self.eat_sym(',');
            if !more {
                self.expect_sym(';')?;
            }
        }
        let mut rels = Vec::new();
        if self.peek_keyword("rels") {
            self.pos += 1;
            self.expect_sym(':')?;
            loop {
                rels.push(self.expr()?);
                if !self.eat_sym(',') {
                    break;
                }
            }
            self.expect_sym(';')?;
        }
        self.expect_sym('}')?;
        for r in &rels {
            if let Some(g) = r.odd_power(&gens) {
                return Err(PresentationError::Sign { generator: g });
            }
        }
        let free = GCAlgebra::free(name.clone(), gens.clone())?;
        let rels = rels.iter().map(|r| r.eval(&free)).collect::<Result<Vec<_>, _>>()?;
        GCAlgebra::new(name, gens, rels)
    }

    fn module(&mut self) -> Result<ConnectionDecl, PresentationError> {
        self.expect_keyword("module")?;
        let name = self.ident()?;
        self.expect_keyword("over")?;
        let over = self.ident()?;
        self.expect_sym('{')?;
        self.expect_keyword("rank")?;
        self.expect_sym(':')?;
        let rank = self.int()?;
        if rank < 1 {
            return self.err("rank must be positive");
        }
        let rank = rank as usize;
        self.expect_sym(';')?;
        let mut entries = Vec::new();
        while self.peek_keyword("conn") {
            self.pos += 1;
            self.expect_sym(':')?;
            loop {
                let _matrix = self.ident()?;
                self.expect_sym('[')?;
                let i = self.int()?;
                self.expect_sym(']')?;
                self.expect_sym('[')?;
                let j = self.int()?;
                self.expect_sym(']')?;
                if i < 0 || j < 0 || i as usize >= rank || j as usize >= rank {
                    return self.err(format!("entry [{i}][{j}] outside rank {rank}"));
                }
                self.expect_sym('=')?;
                entries.push((i as usize, j as usize, self.expr()?));
                if !self.eat_sym(',') {
                    break;
                }
            }
            self.expect_sym(';')?;
        }
        self.expect_sym('}')?;
        Ok(ConnectionDecl { name, over, rank, entries })
    }
}

pub fn parse_document(src: &str) -> Result<Document, PresentationError> {
    let mut p = Parser::new(src)?;
    let mut doc = Document::default();
    while !p.at_end() {
        if p.peek_keyword("algebra") {
            doc.algebras.push(p.algebra()?);
        } else if p.peek_keyword("module") {
            let m = p.module()?;
            if doc.algebra(&m.over).is_none() {
                return Err(PresentationError::UnknownGenerator(format!("algebra {}", m.over)));
            }
            doc.modules.push(m);
        } else {
            return p.err("expected `algebra` or `module`");
        }
    }
    Ok(doc)
}

/// Parses a document and returns its first algebra.
pub fn parse_algebra(src: &str) -> Result<GCAlgebra, PresentationError> {
    let doc = parse_document(src)?;
    match doc.algebras.into_iter().next() {
        Some(a) => Ok(a),
        None => Err(PresentationError::Parse { line: 1, column: 1, message: "no algebra item".into() }),
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, PresentationError> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    if !p.at_end() {
        return p.err("trailing input after expression");
    }
    Ok(e)
}

/// Parses and evaluates `src` in `alg`.
pub fn parse_expr_in(alg: &GCAlgebra, src: &str) -> Result<Element, PresentationError> {
    parse_expr(src)?.eval(alg)
}

/// Parses and evaluates `src` in the free algebra on the generators of `alg`.
pub fn parse_expr_free(alg: &GCAlgebra, src: &str) -> Result<Element, PresentationError> {
    let free = GCAlgebra::free(alg.name(), alg.generators().to_vec())?;
    let e = parse_expr(src)?.eval(&free)?;
    // exponent vectors coincide, so reuse them directly
    Ok(Element::from_terms(e.terms().map(|(m, c)| (Monomial(m.0.clone()), c.clone()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_ring() {
        let a = parse_algebra("algebra A { gens: x:(0,0); }").unwrap();
        assert_eq!(a.ngens(), 1);
        assert!(a.is_polynomial());
    }

    #[test]
    fn exterior_from_odd_generator() {
        let l = parse_algebra("algebra L { gens: l:(-1,-1); }").unwrap();
        assert!(l.generators()[0].is_odd());
        assert!(l.monomials_of_weight(2).is_empty());
        assert_eq!(l.monomials_of_weight(1).len(), 1);
    }

    #[test]
    fn quotient_records_basis() {
        let b = parse_algebra("algebra B { gens: x:(0,0), y:(0,0); rels: y^2 - x^3; }").unwrap();
        assert_eq!(b.rewriting_basis().len(), 1);
        assert_eq!(b.format(&b.rewriting_basis()[0]), "x^3 - y^2");
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_algebra("algebra A {\n  gens: x:(0,0)\n}").unwrap_err();
        assert_eq!(e, PresentationError::Parse { line: 3, column: 1, message: "expected `;`".into() });
        let e = parse_algebra("algebra A { gens: x:(0,0); rels: x + ; }").unwrap_err();
        assert!(matches!(e, PresentationError::Parse { line: 1, column: 38, .. }), "{e:?}");
        assert!(matches!(parse_algebra("algebra A { gens: x:(0,0) $ }"), Err(PresentationError::Parse { .. })));
    }

    #[test]
    fn grading_and_sign_errors() {
        let e = parse_algebra("algebra A { gens: x:(0,0), u:(2,1); rels: u - x; }").unwrap_err();
        assert!(matches!(e, PresentationError::Grading { .. }));
        let e = parse_algebra("algebra A { gens: x:(0,0), e:(1,0); rels: e^2 + x; }").unwrap_err();
        assert_eq!(e, PresentationError::Sign { generator: "e".into() });
        let e = parse_algebra("algebra A { gens: x:(0,0); rels: z; }").unwrap_err();
        assert_eq!(e, PresentationError::UnknownGenerator("z".into()));
    }

    #[test]
    fn rational_literals() {
        let a = parse_algebra("algebra A { gens: x:(0,0); }").unwrap();
        let e = parse_expr_in(&a, "3/6*x - 1/2*x").unwrap();
        assert!(e.is_zero());
    }

    #[test]
    fn modules() {
        let doc = parse_document(
            "algebra P { gens: x:(0,0), y:(0,0); }\n\
             // rank two nilpotent\n\
             module E over P { rank: 2; conn: G[0][1] = dx; }",
        )
        .unwrap();
        assert_eq!(doc.modules.len(), 1);
        let m = &doc.modules[0];
        assert_eq!((m.rank, m.entries.len()), (2, 1));
        assert_eq!(m.entries[0].2, Expr::Var("dx".into()));
        let e = parse_document("algebra P { gens: x:(0,0); } module E over P { rank: 1; conn: G[1][0] = dx; }");
        assert!(matches!(e, Err(PresentationError::Parse { .. })));
    }
}
