//! Mixed-model formulas: `resp ~ 1 + x + (1 + x | g) + zerocorr(x | h)`.
//!
//! The accepted language is deliberately small: intercept markers `0` and
//! `1`, numeric covariates by column name, random-effects terms
//! `(expr | factor)` and `zerocorr(expr | factor)`, all joined by `+`.
//! Interactions, nesting and transformations are not part of it.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// The columns of one term expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermExpr {
    pub intercept: bool,
    pub covariates: Vec<String>,
}

impl TermExpr {
    pub fn regressors(&self) -> Vec<Regressor> {
        let mut out = Vec::with_capacity(self.covariates.len() + 1);
        if self.intercept {
            out.push(Regressor::Intercept);
        }
        out.extend(self.covariates.iter().cloned().map(Regressor::Covariate));
        out
    }

    pub fn len(&self) -> usize {
        self.intercept as usize + self.covariates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomTerm {
    pub expr: TermExpr,
    pub grouping: String,
    pub zerocorr: bool,
}

/// Parsed model formula. Terms are kept in source order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    pub response: String,
    pub fixed: TermExpr,
    pub random: Vec<RandomTerm>,
}

impl Formula {
    /// Columns of the fixed-effects model matrix, in order.
    pub fn fixed_terms(&self) -> Vec<Regressor> {
        self.fixed.regressors()
    }
}

/// One column of a per-level model matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regressor {
    Intercept,
    Covariate(String),
}

impl Regressor {
    pub fn name(&self) -> &str {
        match self {
            Regressor::Intercept => "(Intercept)",
            Regressor::Covariate(name) => name,
        }
    }
}

/// Lower-triangular mask of the free entries of a `p × p` template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrMask {
    p: usize,
    free: Vec<bool>,
}

impl CorrMask {
    /// All lower-triangular entries free.
    pub fn full(p: usize) -> Self {
        let mut free = alloc::vec![false; p * p];
        for j in 0..p {
            for i in j..p {
                free[i + j * p] = true;
            }
        }
        CorrMask { p, free }
    }

    /// Only the diagonal free.
    pub fn diagonal(p: usize) -> Self {
        let mut free = alloc::vec![false; p * p];
        for j in 0..p {
            free[j + j * p] = true;
        }
        CorrMask { p, free }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Entry `(i, j)` of the template is a free parameter. Always false above
    /// the diagonal.
    pub fn is_free(&self, i: usize, j: usize) -> bool {
        i >= j && self.free[i + j * self.p]
    }

    fn set(&mut self, i: usize, j: usize, value: bool) {
        debug_assert!(i > j);
        self.free[i + j * self.p] = value;
    }

    pub fn free_count(&self) -> usize {
        self.free.iter().filter(|&&b| b).count()
    }

    /// Free positions `(row, col)` in column-major order over the lower triangle.
    pub fn free_positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let p = self.p;
        (0..p).flat_map(move |j| (j..p).map(move |i| (i, j))).filter(move |&(i, j)| self.is_free(i, j))
    }
}

/// A random-effects term after amalgamation: one per grouping factor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermSpec {
    pub grouping: String,
    pub columns: Vec<Regressor>,
    pub corr_mask: CorrMask,
}

impl TermSpec {
    pub fn n_theta(&self) -> usize {
        self.corr_mask.free_count()
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Zero,
    One,
    Tilde,
    Plus,
    LParen,
    RParen,
    Bar,
    End,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            '~' => Tok::Tilde,
            '+' => Tok::Plus,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '|' => Tok::Bar,
            c if c.is_ascii_digit() => {
                while i + 1 < chars.len() && chars[i + 1].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..=i].iter().collect();
                match digits.as_str() {
                    "0" => Tok::Zero,
                    "1" => Tok::One,
                    _ => {
                        return Err(Error::Syntax {
                            pos: start,
                            expected: "`0`, `1` or a column name",
                        })
                    }
                }
            }
            c if is_ident_start(c) => {
                while i + 1 < chars.len() && is_ident_continue(chars[i + 1]) {
                    i += 1;
                }
                Tok::Ident(chars[start..=i].iter().collect())
            }
            _ => {
                return Err(Error::Syntax {
                    pos: start,
                    expected: "a column name, `0`, `1`, `+`, `(`, `)`, `|` or `~`",
                })
            }
        };
        toks.push((tok, start));
        i += 1;
    }
    toks.push((Tok::End, chars.len()));
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

#[derive(Default)]
struct ExprBuilder {
    zero: bool,
    one: bool,
    covariates: Vec<String>,
}

impl ExprBuilder {
    fn push(&mut self, tok: &Tok, pos: usize) -> Result<()> {
        match tok {
            Tok::Zero | Tok::One => {
                let (seen, other) = if *tok == Tok::Zero {
                    (&mut self.zero, self.one)
                } else {
                    (&mut self.one, self.zero)
                };
                if *seen {
                    return Err(Error::DuplicateTerm(
                        if *tok == Tok::Zero { "0" } else { "1" }.to_string(),
                    ));
                }
                if other {
                    return Err(Error::Syntax {
                        pos,
                        expected: "at most one of the intercept markers `0` and `1`",
                    });
                }
                *seen = true;
            }
            Tok::Ident(name) => {
                if self.covariates.contains(name) {
                    return Err(Error::DuplicateTerm(name.clone()));
                }
                self.covariates.push(name.clone());
            }
            _ => unreachable!("only term tokens are pushed"),
        }
        Ok(())
    }

    fn finish(self) -> TermExpr {
        TermExpr {
            intercept: !self.zero,
            covariates: self.covariates,
        }
    }
}

impl Parser {
    fn peek(&self) -> &(Tok, usize) {
        &self.toks[self.at]
    }

    fn next(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if t.0 != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expect_ident(&mut self, expected: &'static str) -> Result<String> {
        match self.next() {
            (Tok::Ident(name), _) => Ok(name),
            (_, pos) => Err(Error::Syntax { pos, expected }),
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let response = self.expect_ident("a response column name")?;
        match self.next() {
            (Tok::Tilde, _) => {}
            (_, pos) => return Err(Error::Syntax { pos, expected: "`~`" }),
        }
        if self.peek().0 == Tok::End {
            return Err(Error::EmptyRhs);
        }

        let mut fixed = ExprBuilder::default();
        let mut random: Vec<RandomTerm> = Vec::new();
        loop {
            let (tok, pos) = self.next();
            match tok {
                Tok::Zero | Tok::One => fixed.push(&tok, pos)?,
                Tok::Ident(ref name)
                    if name == "zerocorr" && self.peek().0 == Tok::LParen =>
                {
                    self.next();
                    let term = self.random_term(true)?;
                    push_random(&mut random, term)?;
                }
                Tok::Ident(_) => fixed.push(&tok, pos)?,
                Tok::LParen => {
                    let term = self.random_term(false)?;
                    push_random(&mut random, term)?;
                }
                Tok::Bar => return Err(Error::BarOutsideParens { pos }),
                _ => return Err(Error::Syntax { pos, expected: "a term" }),
            }
            match self.next() {
                (Tok::Plus, _) => {}
                (Tok::End, _) => break,
                (Tok::Bar, pos) => return Err(Error::BarOutsideParens { pos }),
                (_, pos) => {
                    return Err(Error::Syntax {
                        pos,
                        expected: "`+` or the end of the formula",
                    })
                }
            }
        }
        Ok(Formula {
            response,
            fixed: fixed.finish(),
            random,
        })
    }

    /// Parses `expr | factor )` after the opening parenthesis.
    fn random_term(&mut self, zerocorr: bool) -> Result<RandomTerm> {
        let mut expr = ExprBuilder::default();
        loop {
            let (tok, pos) = self.next();
            match tok {
                Tok::Zero | Tok::One | Tok::Ident(_) => expr.push(&tok, pos)?,
                _ => {
                    return Err(Error::Syntax {
                        pos,
                        expected: "`0`, `1` or a column name",
                    })
                }
            }
            match self.next() {
                (Tok::Plus, _) => {}
                (Tok::Bar, _) => break,
                (_, pos) => return Err(Error::Syntax { pos, expected: "`+` or `|`" }),
            }
        }
        let grouping = self.expect_ident("a grouping factor name")?;
        match self.next() {
            (Tok::RParen, _) => {}
            (_, pos) => return Err(Error::Syntax { pos, expected: "`)`" }),
        }
        let expr = expr.finish();
        if expr.is_empty() {
            return Err(Error::EmptyTerm(grouping));
        }
        Ok(RandomTerm {
            expr,
            grouping,
            zerocorr,
        })
    }
}

fn push_random(random: &mut Vec<RandomTerm>, term: RandomTerm) -> Result<()> {
    if random.contains(&term) {
        return Err(Error::DuplicateTerm(term.to_string()));
    }
    random.push(term);
    Ok(())
}

/// Parses a mixed-model formula.
///
/// Whitespace is insignificant. Every term expression carries an implicit
/// intercept unless `0` is given. Errors carry the character position of the
/// offending token.
pub fn parse_formula(text: &str) -> Result<Formula> {
    let toks = lex(text)?;
    Parser { toks, at: 0 }.formula()
}

// ---------------------------------------------------------------------------
// Rendering

impl fmt::Display for TermExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.intercept { "1" } else { "0" })?;
        for c in &self.covariates {
            write!(f, " + {c}")?;
        }
        Ok(())
    }
}

impl fmt::Display for RandomTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zerocorr {
            write!(f, "zerocorr({} | {})", self.expr, self.grouping)
        } else {
            write!(f, "({} | {})", self.expr, self.grouping)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ~ {}", self.response, self.fixed)?;
        for t in &self.random {
            write!(f, " + {t}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Amalgamation

/// Merges random-effects terms that share a grouping factor.
///
/// Groups appear in order of first mention. The merged columns are the union
/// of the terms' columns in source order. Correlation between two columns is
/// a free parameter only when some correlated term contains both and no
/// `zerocorr` term contains both.
pub fn amalgamate(formula: &Formula) -> Vec<TermSpec> {
    let mut groups: Vec<(&str, Vec<&RandomTerm>)> = Vec::new();
    for term in &formula.random {
        match groups.iter_mut().find(|(g, _)| *g == term.grouping) {
            Some((_, terms)) => terms.push(term),
            None => groups.push((&term.grouping, alloc::vec![term])),
        }
    }

    groups
        .into_iter()
        .map(|(grouping, terms)| {
            let mut columns: Vec<Regressor> = Vec::new();
            let mut members: Vec<(Vec<usize>, bool)> = Vec::with_capacity(terms.len());
            for term in terms {
                let mut idx = Vec::new();
                for r in term.expr.regressors() {
                    let pos = match columns.iter().position(|c| *c == r) {
                        Some(pos) => pos,
                        None => {
                            columns.push(r);
                            columns.len() - 1
                        }
                    };
                    if !idx.contains(&pos) {
                        idx.push(pos);
                    }
                }
                members.push((idx, term.zerocorr));
            }

            let p = columns.len();
            let mut mask = CorrMask::diagonal(p);
            for j in 0..p {
                for i in (j + 1)..p {
                    let both = |m: &&(Vec<usize>, bool)| m.0.contains(&i) && m.0.contains(&j);
                    let allowed = members.iter().filter(both).any(|m| !m.1);
                    let vetoed = members.iter().filter(both).any(|m| m.1);
                    mask.set(i, j, allowed && !vetoed);
                }
            }
            TermSpec {
                grouping: grouping.to_string(),
                columns,
                corr_mask: mask,
            }
        })
        .collect()
}
