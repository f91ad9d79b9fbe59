//! A small expression language for defining ψ, L, M, Φ and candidates in
//! text: parsing with position-annotated errors, symbolic differentiation
//! with constant folding, IEEE-double evaluation, and a pretty-printer whose
//! output reparses to the same tree.
//!
//! Precedence: `^` (right-associative) binds tighter than unary minus,
//! which binds tighter than `*`/`/`, which bind tighter than `+`/`-`.

use std::fmt;

use crate::error::{Error, Result};
use crate::special;

/// Variables the language knows. Which subset is legal depends on the slot
/// an expression is compiled for (ψ uses only t; Lagrangians use t, x, d and
/// xtau for delay problems; candidates may use the ψ-image offset s and the
/// order alpha; high-order Lagrangians address d1..d9).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    X,
    D,
    XTau,
    /// s = ψ(t) − ψ(a), bound by the problem loader
    S,
    Alpha,
    /// d1..d9 for high-order Lagrangians; D and DN(1) are the same slot
    DN(u8),
}

impl Var {
    pub fn name(&self) -> String {
        match self {
            Var::T => "t".into(),
            Var::X => "x".into(),
            Var::D => "d".into(),
            Var::XTau => "xtau".into(),
            Var::S => "s".into(),
            Var::Alpha => "alpha".into(),
            Var::DN(k) => format!("d{k}"),
        }
    }

    fn from_name(s: &str) -> Option<Var> {
        match s {
            "t" => Some(Var::T),
            "x" => Some(Var::X),
            "d" => Some(Var::D),
            "xtau" => Some(Var::XTau),
            "s" => Some(Var::S),
            "alpha" => Some(Var::Alpha),
            _ => {
                let bytes = s.as_bytes();
                if bytes.len() == 2 && bytes[0] == b'd' && bytes[1].is_ascii_digit() {
                    let k = bytes[1] - b'0';
                    if (1..=9).contains(&k) {
                        return Some(Var::DN(k));
                    }
                }
                None
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    GammaFn,
}

impl UnOp {
    fn name(&self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Exp => "exp",
            UnOp::Ln => "ln",
            UnOp::Sqrt => "sqrt",
            UnOp::Sin => "sin",
            UnOp::Cos => "cos",
            UnOp::GammaFn => "gammafn",
        }
    }

    fn from_name(s: &str) -> Option<UnOp> {
        match s {
            "exp" => Some(UnOp::Exp),
            "ln" => Some(UnOp::Ln),
            "sqrt" => Some(UnOp::Sqrt),
            "sin" => Some(UnOp::Sin),
            "cos" => Some(UnOp::Cos),
            "gammafn" => Some(UnOp::GammaFn),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    /// All variables appearing in the expression.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            Expr::Unary(_, e) => e.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Errors when the expression uses a variable outside `allowed`.
    pub fn check_vars(&self, allowed: &[Var], slot: &str) -> Result<()> {
        for v in self.variables() {
            let ok = allowed.contains(&v)
                || matches!(v, Var::DN(1)) && allowed.contains(&Var::D)
                || v == Var::D && allowed.contains(&Var::DN(1));
            if !ok {
                return Err(Error::Validation(format!(
                    "variable `{}` is not allowed in the {slot} slot",
                    v.name()
                )));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        let here = (line, col);
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '+' => out.push(sp(Tok::Plus, here)),
            '-' => out.push(sp(Tok::Minus, here)),
            '*' => out.push(sp(Tok::Star, here)),
            '/' => out.push(sp(Tok::Slash, here)),
            '^' => out.push(sp(Tok::Caret, here)),
            '(' => out.push(sp(Tok::LParen, here)),
            ')' => out.push(sp(Tok::RParen, here)),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let v: f64 = text.parse().map_err(|_| Error::Syntax {
                    line,
                    col,
                    msg: format!("malformed number `{text}`"),
                })?;
                out.push(sp(Tok::Num(v), here));
                col += i - start;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                out.push(sp(Tok::Ident(text), here));
                col += i - start;
                continue;
            }
            other => {
                return Err(Error::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
        i += 1;
        col += 1;
    }
    Ok(out)
}

fn sp(tok: Tok, at: (usize, usize)) -> Spanned {
    Spanned {
        tok,
        line: at.0,
        col: at.1,
    }
}

// ---------------------------------------------------------------------------
// parser (Pratt)
// ---------------------------------------------------------------------------

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> Error {
        match self.toks.get(self.pos.min(self.toks.len().saturating_sub(1))) {
            Some(t) => Error::Syntax {
                line: t.line,
                col: t.col,
                msg: msg.into(),
            },
            None => Error::Syntax {
                line: 1,
                col: 1,
                msg: msg.into(),
            },
        }
    }

    fn parse_expr(&mut self, min_bp: u8) -> Result<Expr> {
        let first = self.next().ok_or_else(|| self.err_here("unexpected end of input"))?;
        let mut lhs = match first.tok {
            Tok::Num(v) => Expr::Const(v),
            Tok::Ident(name) => self.parse_ident(name, (first.line, first.col))?,
            Tok::Minus => {
                // unary minus binds tighter than * but looser than ^
                let operand = self.parse_expr(26)?;
                Expr::Unary(UnOp::Neg, Box::new(operand))
            }
            Tok::LParen => {
                let inner = self.parse_expr(0)?;
                match self.next() {
                    Some(Spanned { tok: Tok::RParen, .. }) => inner,
                    _ => return Err(self.err_here("expected `)`")),
                }
            }
            _ => {
                return Err(Error::Syntax {
                    line: first.line,
                    col: first.col,
                    msg: "expected a value".into(),
                })
            }
        };
        loop {
            let (op, lbp, rbp) = match self.peek().map(|s| &s.tok) {
                Some(Tok::Plus) => (BinOp::Add, 10, 11),
                Some(Tok::Minus) => (BinOp::Sub, 10, 11),
                Some(Tok::Star) => (BinOp::Mul, 20, 21),
                Some(Tok::Slash) => (BinOp::Div, 20, 21),
                Some(Tok::Caret) => (BinOp::Pow, 31, 30), // right-assoc
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.next();
            let rhs = self.parse_expr(rbp)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn parse_ident(&mut self, name: String, at: (usize, usize)) -> Result<Expr> {
        if let Some(f) = UnOp::from_name(&name) {
            match self.next() {
                Some(Spanned { tok: Tok::LParen, .. }) => {}
                _ => {
                    return Err(Error::Syntax {
                        line: at.0,
                        col: at.1,
                        msg: format!("function `{name}` needs parenthesized arguments"),
                    })
                }
            }
            let arg = self.parse_expr(0)?;
            match self.next() {
                Some(Spanned { tok: Tok::RParen, .. }) => {}
                _ => return Err(self.err_here("expected `)`")),
            }
            return Ok(Expr::Unary(f, Box::new(arg)));
        }
        match name.as_str() {
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "e" => Ok(Expr::Const(std::f64::consts::E)),
            _ => match Var::from_name(&name) {
                Some(v) => Ok(Expr::Var(v)),
                None => Err(Error::UnknownIdent(name)),
            },
        }
    }
}

/// Parses an expression with standard precedence and position-annotated
/// errors.
pub fn parse(src: &str) -> Result<Expr> {
    if src.trim().is_empty() {
        return Err(Error::Syntax {
            line: 1,
            col: 1,
            msg: "empty expression".into(),
        });
    }
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.parse_expr(0)?;
    if p.pos != p.toks.len() {
        return Err(p.err_here("trailing input"));
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

/// Variable bindings for evaluation; unbound variables error.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub t: Option<f64>,
    pub x: Option<f64>,
    pub d: Option<f64>,
    pub xtau: Option<f64>,
    pub s: Option<f64>,
    pub alpha: Option<f64>,
    pub dn: [Option<f64>; 9],
}

impl Env {
    fn get(&self, v: Var) -> Result<f64> {
        let val = match v {
            Var::T => self.t,
            Var::X => self.x,
            Var::D => self.d.or(self.dn[0]),
            Var::XTau => self.xtau,
            Var::S => self.s,
            Var::Alpha => self.alpha,
            Var::DN(k) => {
                let slot = self.dn[(k - 1) as usize];
                if k == 1 {
                    slot.or(self.d)
                } else {
                    slot
                }
            }
        };
        val.ok_or_else(|| Error::Unbound(v.name()))
    }
}

/// IEEE-double evaluation; deterministic, domain errors are reported.
pub fn evaluate(e: &Expr, env: &Env) -> Result<f64> {
    match e {
        Expr::Const(c) => Ok(*c),
        Expr::Var(v) => env.get(*v),
        Expr::Unary(op, inner) => {
            let v = evaluate(inner, env)?;
            match op {
                UnOp::Neg => Ok(-v),
                UnOp::Exp => Ok(v.exp()),
                UnOp::Ln => {
                    if v <= 0.0 {
                        Err(Error::Domain(format!("ln of non-positive value {v}")))
                    } else {
                        Ok(v.ln())
                    }
                }
                UnOp::Sqrt => {
                    if v < 0.0 {
                        Err(Error::Domain(format!("sqrt of negative value {v}")))
                    } else {
                        Ok(v.sqrt())
                    }
                }
                UnOp::Sin => Ok(v.sin()),
                UnOp::Cos => Ok(v.cos()),
                UnOp::GammaFn => special::gamma(v),
            }
        }
        Expr::Binary(op, l, r) => {
            let a = evaluate(l, env)?;
            let b = evaluate(r, env)?;
            match op {
                BinOp::Add => Ok(a + b),
                BinOp::Sub => Ok(a - b),
                BinOp::Mul => Ok(a * b),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(Error::Domain("division by zero".into()))
                    } else {
                        Ok(a / b)
                    }
                }
                BinOp::Pow => {
                    if a < 0.0 && b.fract() != 0.0 {
                        Err(Error::Domain(format!(
                            "negative base {a} with non-integer exponent {b}"
                        )))
                    } else {
                        Ok(a.powf(b))
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// differentiation
// ---------------------------------------------------------------------------

/// Symbolic derivative with constant folding. `gammafn` of a wrt-dependent
/// argument is rejected.
pub fn differentiate(e: &Expr, wrt: Var) -> Result<Expr> {
    Ok(fold(diff(e, wrt)?))
}

fn depends_on(e: &Expr, v: Var) -> bool {
    match e {
        Expr::Const(_) => false,
        Expr::Var(w) => *w == v || (matches!(w, Var::DN(1)) && v == Var::D) || (*w == Var::D && v == Var::DN(1)),
        Expr::Unary(_, i) => depends_on(i, v),
        Expr::Binary(_, l, r) => depends_on(l, v) || depends_on(r, v),
    }
}

fn diff(e: &Expr, wrt: Var) -> Result<Expr> {
    use BinOp::*;
    use Expr::*;
    Ok(match e {
        Const(_) => Const(0.0),
        Var(v) => {
            if depends_on(e, wrt) && (*v == wrt || matches!((v, wrt), (self::Var::DN(1), self::Var::D) | (self::Var::D, self::Var::DN(1)))) {
                Const(1.0)
            } else {
                Const(0.0)
            }
        }
        Unary(op, inner) => {
            if !depends_on(e, wrt) {
                return Ok(Const(0.0));
            }
            let di = diff(inner, wrt)?;
            match op {
                UnOp::Neg => Unary(UnOp::Neg, Box::new(di)),
                UnOp::Exp => Binary(Mul, Box::new(e.clone()), Box::new(di)),
                UnOp::Ln => Binary(Div, Box::new(di), inner.clone()),
                UnOp::Sqrt => Binary(
                    Div,
                    Box::new(di),
                    Box::new(Binary(Mul, Box::new(Const(2.0)), Box::new(e.clone()))),
                ),
                UnOp::Sin => Binary(Mul, Box::new(Unary(UnOp::Cos, inner.clone())), Box::new(di)),
                UnOp::Cos => Binary(
                    Mul,
                    Box::new(Unary(UnOp::Neg, Box::new(Unary(UnOp::Sin, inner.clone())))),
                    Box::new(di),
                ),
                UnOp::GammaFn => {
                    return Err(Error::NonDifferentiable(
                        "gammafn with an argument depending on the differentiation variable".into(),
                    ))
                }
            }
        }
        Binary(op, l, r) => {
            if !depends_on(e, wrt) {
                return Ok(Const(0.0));
            }
            let dl = diff(l, wrt)?;
            let dr = diff(r, wrt)?;
            match op {
                Add => Binary(Add, Box::new(dl), Box::new(dr)),
                Sub => Binary(Sub, Box::new(dl), Box::new(dr)),
                Mul => Binary(
                    Add,
                    Box::new(Binary(Mul, Box::new(dl), r.clone())),
                    Box::new(Binary(Mul, l.clone(), Box::new(dr))),
                ),
                Div => Binary(
                    Div,
                    Box::new(Binary(
                        Sub,
                        Box::new(Binary(Mul, Box::new(dl), r.clone())),
                        Box::new(Binary(Mul, l.clone(), Box::new(dr))),
                    )),
                    Box::new(Binary(Mul, r.clone(), r.clone())),
                ),
                Pow => {
                    if !depends_on(r, wrt) {
                        // d(u^c) = c u^{c-1} u'
                        let exponent_minus_one =
                            Binary(Sub, r.clone(), Box::new(Const(1.0)));
                        Binary(
                            Mul,
                            Box::new(Binary(
                                Mul,
                                r.clone(),
                                Box::new(Binary(Pow, l.clone(), Box::new(exponent_minus_one))),
                            )),
                            Box::new(dl),
                        )
                    } else {
                        // d(u^v) = u^v (v' ln u + v u'/u)
                        Binary(
                            Mul,
                            Box::new(e.clone()),
                            Box::new(Binary(
                                Add,
                                Box::new(Binary(Mul, Box::new(dr), Box::new(Unary(UnOp::Ln, l.clone())))),
                                Box::new(Binary(
                                    Div,
                                    Box::new(Binary(Mul, r.clone(), Box::new(dl))),
                                    l.clone(),
                                )),
                            )),
                        )
                    }
                }
            }
        }
    })
}

/// Constant folding and algebraic cleanup (x+0, x*1, x*0, x^1, x^0, 0/x).
pub fn fold(e: Expr) -> Expr {
    use BinOp::*;
    use Expr::*;
    match e {
        Unary(op, inner) => {
            let i = fold(*inner);
            if let Const(c) = i {
                let env = Env::default();
                if let Ok(v) = evaluate(&Unary(op, Box::new(Const(c))), &env) {
                    return Const(v);
                }
            }
            if op == UnOp::Neg {
                if let Unary(UnOp::Neg, inner2) = i {
                    return *inner2;
                }
            }
            Unary(op, Box::new(i))
        }
        Binary(op, l, r) => {
            let a = fold(*l);
            let b = fold(*r);
            if let (Const(ca), Const(cb)) = (&a, &b) {
                let env = Env::default();
                if let Ok(v) = evaluate(&Binary(op, Box::new(Const(*ca)), Box::new(Const(*cb))), &env)
                {
                    return Const(v);
                }
            }
            match (op, &a, &b) {
                (Add, Const(c), _) if *c == 0.0 => b,
                (Add, _, Const(c)) if *c == 0.0 => a,
                (Sub, _, Const(c)) if *c == 0.0 => a,
                (Mul, Const(c), _) if *c == 0.0 => Const(0.0),
                (Mul, _, Const(c)) if *c == 0.0 => Const(0.0),
                (Mul, Const(c), _) if *c == 1.0 => b,
                (Mul, _, Const(c)) if *c == 1.0 => a,
                (Div, Const(c), _) if *c == 0.0 => Const(0.0),
                (Div, _, Const(c)) if *c == 1.0 => a,
                (Pow, _, Const(c)) if *c == 1.0 => a,
                (Pow, _, Const(c)) if *c == 0.0 => Const(1.0),
                _ => Binary(op, Box::new(a), Box::new(b)),
            }
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// pretty printing
// ---------------------------------------------------------------------------

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Const(_) | Expr::Var(_) => 100,
        Expr::Unary(UnOp::Neg, _) => 25,
        Expr::Unary(..) => 100,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 10,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => 20,
        Expr::Binary(BinOp::Pow, ..) => 30,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if *c == f64::INFINITY {
                    write!(f, "(1/0)")
                } else if c.fract() == 0.0 && c.abs() < 1e15 {
                    write!(f, "{}", *c as i64)
                } else {
                    write!(f, "{c}")
                }
            }
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Unary(UnOp::Neg, inner) => {
                // operand of unary minus needs parens at or below its level
                if precedence(inner) <= 25 {
                    write!(f, "-({inner})")
                } else {
                    write!(f, "-{inner}")
                }
            }
            Expr::Unary(op, inner) => write!(f, "{}({inner})", op.name()),
            Expr::Binary(op, l, r) => {
                // left-associative ops parenthesize right children of equal
                // precedence so the reparse reproduces the tree exactly
                let (sym, lp, rp) = match op {
                    BinOp::Add => ("+", 10, 11),
                    BinOp::Sub => ("-", 10, 11),
                    BinOp::Mul => ("*", 20, 21),
                    BinOp::Div => ("/", 20, 21),
                    BinOp::Pow => ("^", 31, 30),
                };
                if precedence(l) < lp {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {sym} ")?;
                if precedence(r) < rp {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}
