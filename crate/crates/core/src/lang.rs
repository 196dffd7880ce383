//! The toy concurrent imperative language: AST, parser, renderer and
//! well-formedness checks.
//!
//! Source layout is a list of labeled declarations followed by one or more
//! thread blocks:
//!
//! ```text
//! low l1 = 0;
//! low l2 = 0;
//! high h = 0;
//! thread { if (l1 == 1) { l2 := h; } else { skip; } }
//! thread { l1 := 1; }
//! thread { h := 1; }
//! ```
//!
//! Low variables are numbered `1..=|L|` in declaration order and high
//! variables continue from `|L| + 1`, so the low store is always the prefix
//! of the full store.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Runtime value domain. Booleans are encoded as `0` / non-zero.
pub type Value = i64;

/// Declaration-order ordinal of a variable (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VarId(pub u32);

impl VarId {
    /// Zero-based slot in a [`Store`](crate::exec::Store).
    pub fn index(self) -> usize {
        (self.0 as usize).wrapping_sub(1)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecurityLabel {
    High,
    Low,
}

impl fmt::Display for SecurityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SecurityLabel::High => "high",
            SecurityLabel::Low => "low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub label: SecurityLabel,
    pub id: VarId,
    pub init: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    And,
    Or,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::And => "&&",
            BinaryOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(Value),
    Var(VarId),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn unary(op: UnaryOp, operand: Expr) -> Expr {
        Expr::Unary(op, Box::new(operand))
    }

    fn for_each_var(&self, f: &mut impl FnMut(VarId)) {
        match self {
            Expr::Lit(_) => {}
            Expr::Var(id) => f(*id),
            Expr::Unary(_, e) => e.for_each_var(f),
            Expr::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Skip,
    Assign {
        target: VarId,
        rhs: Expr,
    },
    If {
        guard: Expr,
        then_branch: Vec<Stmt>,
        else_branch: Vec<Stmt>,
    },
    While {
        guard: Expr,
        body: Vec<Stmt>,
    },
}

impl Stmt {
    /// Every variable read or written by this statement, including nested ones.
    fn for_each_var(&self, f: &mut impl FnMut(VarId)) {
        match self {
            Stmt::Skip => {}
            Stmt::Assign { target, rhs } => {
                f(*target);
                rhs.for_each_var(f);
            }
            Stmt::If {
                guard,
                then_branch,
                else_branch,
            } => {
                guard.for_each_var(f);
                then_branch.iter().for_each(|s| s.for_each_var(f));
                else_branch.iter().for_each(|s| s.for_each_var(f));
            }
            Stmt::While { guard, body } => {
                guard.for_each_var(f);
                body.iter().for_each(|s| s.for_each_var(f));
            }
        }
    }
}

/// A parsed program: labeled declarations plus a fixed set of threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    /// Declarations in source order.
    pub decls: Vec<VarDecl>,
    pub threads: Vec<Vec<Stmt>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("program has no threads")]
    NoThreads,
    #[error("duplicate declaration of `{name}`")]
    DuplicateName { name: String },
    #[error("invalid variable name `{name}`")]
    InvalidName { name: String },
    #[error("declaration `{name}` has id {found}, expected {expected}")]
    BadId {
        name: String,
        expected: VarId,
        found: VarId,
    },
    #[error("thread {thread}: statement `{stmt}` uses undeclared variable #{id}")]
    UndeclaredVariable {
        thread: usize,
        stmt: String,
        id: VarId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown variable id {0}")]
pub struct UnknownVariable(pub VarId);

impl Program {
    /// Builds a program and checks every well-formedness invariant.
    pub fn new(decls: Vec<VarDecl>, threads: Vec<Vec<Stmt>>) -> Result<Program, ValidationError> {
        let p = Program { decls, threads };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.threads.is_empty() {
            return Err(ValidationError::NoThreads);
        }
        let mut names = HashSet::new();
        let nlow = self.low_count();
        let (mut next_low, mut next_high) = (1u32, nlow as u32 + 1);
        for d in &self.decls {
            if !is_identifier(&d.name) {
                return Err(ValidationError::InvalidName {
                    name: d.name.clone(),
                });
            }
            if !names.insert(d.name.as_str()) {
                return Err(ValidationError::DuplicateName {
                    name: d.name.clone(),
                });
            }
            let slot = match d.label {
                SecurityLabel::Low => &mut next_low,
                SecurityLabel::High => &mut next_high,
            };
            if d.id != VarId(*slot) {
                return Err(ValidationError::BadId {
                    name: d.name.clone(),
                    expected: VarId(*slot),
                    found: d.id,
                });
            }
            *slot += 1;
        }
        let nvars = self.decls.len() as u32;
        for (tid, body) in self.threads.iter().enumerate() {
            for stmt in body {
                let mut bad = None;
                stmt.for_each_var(&mut |id| {
                    if bad.is_none() && !(1..=nvars).contains(&id.0) {
                        bad = Some(id);
                    }
                });
                if let Some(id) = bad {
                    return Err(ValidationError::UndeclaredVariable {
                        thread: tid,
                        stmt: self.render_stmt_line(stmt),
                        id,
                    });
                }
            }
        }
        Ok(())
    }

    /// Number of low variables, `|L|`.
    pub fn low_count(&self) -> usize {
        self.decls
            .iter()
            .filter(|d| d.label == SecurityLabel::Low)
            .count()
    }

    pub fn var_count(&self) -> usize {
        self.decls.len()
    }

    pub fn decl(&self, id: VarId) -> Option<&VarDecl> {
        self.decls.iter().find(|d| d.id == id)
    }

    pub fn lookup(&self, name: &str) -> Option<&VarDecl> {
        self.decls.iter().find(|d| d.name == name)
    }

    pub fn label_of(&self, id: VarId) -> Result<SecurityLabel, UnknownVariable> {
        self.decl(id).map(|d| d.label).ok_or(UnknownVariable(id))
    }

    /// High declarations ordered by id.
    pub fn high_decls(&self) -> impl Iterator<Item = &VarDecl> {
        self.decls.iter().filter(|d| d.label == SecurityLabel::High)
    }

    /// Low declarations ordered by id.
    pub fn low_decls(&self) -> impl Iterator<Item = &VarDecl> {
        self.decls.iter().filter(|d| d.label == SecurityLabel::Low)
    }

    pub fn var_name(&self, id: VarId) -> String {
        match self.decl(id) {
            Some(d) => d.name.clone(),
            None => format!("#{}", id.0),
        }
    }

    /// Canonical source text. Parsing the result yields a structurally equal
    /// program.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for d in &self.decls {
            let _ = writeln!(out, "{} {} = {};", d.label, d.name, d.init);
        }
        for body in &self.threads {
            out.push_str("\nthread {\n");
            self.render_block(&mut out, body, 1);
            out.push_str("}\n");
        }
        out
    }

    pub fn render_expr(&self, e: &Expr) -> String {
        let mut out = String::new();
        self.write_expr(&mut out, e);
        out
    }

    fn render_stmt_line(&self, s: &Stmt) -> String {
        let mut out = String::new();
        self.render_stmt(&mut out, s, 0);
        out.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    fn render_block(&self, out: &mut String, body: &[Stmt], depth: usize) {
        for s in body {
            self.render_stmt(out, s, depth);
        }
    }

    fn render_stmt(&self, out: &mut String, s: &Stmt, depth: usize) {
        let pad = "    ".repeat(depth);
        match s {
            Stmt::Skip => {
                let _ = writeln!(out, "{pad}skip;");
            }
            Stmt::Assign { target, rhs } => {
                let _ = writeln!(
                    out,
                    "{pad}{} := {};",
                    self.var_name(*target),
                    self.render_expr(rhs)
                );
            }
            Stmt::If {
                guard,
                then_branch,
                else_branch,
            } => {
                let _ = writeln!(out, "{pad}if ({}) {{", self.render_expr(guard));
                self.render_block(out, then_branch, depth + 1);
                let _ = writeln!(out, "{pad}}} else {{");
                self.render_block(out, else_branch, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
            Stmt::While { guard, body } => {
                let _ = writeln!(out, "{pad}while ({}) {{", self.render_expr(guard));
                self.render_block(out, body, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
    }

    fn write_expr(&self, out: &mut String, e: &Expr) {
        match e {
            Expr::Lit(v) => {
                let _ = write!(out, "{v}");
            }
            Expr::Var(id) => out.push_str(&self.var_name(*id)),
            Expr::Unary(op, inner) => {
                out.push(match op {
                    UnaryOp::Neg => '-',
                    UnaryOp::Not => '!',
                });
                self.write_operand(out, inner);
            }
            Expr::Binary(op, a, b) => {
                self.write_operand(out, a);
                let _ = write!(out, " {} ", op.symbol());
                self.write_operand(out, b);
            }
        }
    }

    // Compound operands are always parenthesized so that rendering never
    // depends on precedence or associativity.
    fn write_operand(&self, out: &mut String, e: &Expr) {
        match e {
            Expr::Binary(..) => {
                out.push('(');
                self.write_expr(out, e);
                out.push(')');
            }
            Expr::Lit(v) if *v < 0 => {
                let _ = write!(out, "({v})");
            }
            _ => self.write_expr(out, e),
        }
    }
}

const KEYWORDS: &[&str] = &["low", "high", "thread", "skip", "if", "else", "while"];

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&s)
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    DuplicateDeclaration(String),
    UndeclaredVariable(String),
}

/// A parse failure with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {}", self.message())]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn message(&self) -> String {
        match &self.kind {
            ParseErrorKind::Syntax(m) => m.clone(),
            ParseErrorKind::DuplicateDeclaration(n) => format!("duplicate declaration of `{n}`"),
            ParseErrorKind::UndeclaredVariable(n) => format!("undeclared variable `{n}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(String),
    Low,
    High,
    Thread,
    Skip,
    If,
    Else,
    While,
    Semi,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Assign,
    Equals,
    Plus,
    Minus,
    Star,
    EqEq,
    NotEq,
    Lt,
    Le,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(n) => return write!(f, "identifier `{n}`"),
            Tok::Int(n) => return write!(f, "integer `{n}`"),
            Tok::Low => "`low`",
            Tok::High => "`high`",
            Tok::Thread => "`thread`",
            Tok::Skip => "`skip`",
            Tok::If => "`if`",
            Tok::Else => "`else`",
            Tok::While => "`while`",
            Tok::Semi => "`;`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::Assign => "`:=`",
            Tok::Equals => "`=`",
            Tok::Plus => "`+`",
            Tok::Minus => "`-`",
            Tok::Star => "`*`",
            Tok::EqEq => "`==`",
            Tok::NotEq => "`!=`",
            Tok::Lt => "`<`",
            Tok::Le => "`<=`",
            Tok::AndAnd => "`&&`",
            Tok::OrOr => "`||`",
            Tok::Bang => "`!`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(source: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError {
        line,
        col,
        kind: ParseErrorKind::Syntax(msg),
    };
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
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            match word.as_str() {
                "low" => Tok::Low,
                "high" => Tok::High,
                "thread" => Tok::Thread,
                "skip" => Tok::Skip,
                "if" => Tok::If,
                "else" => Tok::Else,
                "while" => Tok::While,
                _ => Tok::Ident(word),
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            Tok::Int(chars[start..i].iter().collect())
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, len) = match (c, next) {
                (':', Some('=')) => (Tok::Assign, 2),
                ('=', Some('=')) => (Tok::EqEq, 2),
                ('!', Some('=')) => (Tok::NotEq, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('&', Some('&')) => (Tok::AndAnd, 2),
                ('|', Some('|')) => (Tok::OrOr, 2),
                ('=', _) => (Tok::Equals, 1),
                ('<', _) => (Tok::Lt, 1),
                ('!', _) => (Tok::Bang, 1),
                (';', _) => (Tok::Semi, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                _ => return Err(err(line, col, format!("unexpected character `{c}`"))),
            };
            i += len;
            col += len;
            tok
        };
        out.push(Spanned {
            tok,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    decls: Vec<VarDecl>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, kind: ParseErrorKind) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            col: t.col,
            kind,
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error_here(ParseErrorKind::Syntax(format!(
            "expected {expected}, found {}",
            self.peek()
        )))
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&tok.to_string()))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn int(&mut self, negative: bool) -> PResult<Value> {
        let Tok::Int(digits) = self.peek().clone() else {
            return Err(self.unexpected("integer"));
        };
        let magnitude: i128 = digits.parse().unwrap_or(i128::MAX);
        let v = if negative { -magnitude } else { magnitude };
        let v = Value::try_from(v).map_err(|_| {
            self.error_here(ParseErrorKind::Syntax(format!(
                "integer literal `{digits}` out of range"
            )))
        })?;
        self.bump();
        Ok(v)
    }

    fn program(&mut self) -> PResult<Program> {
        let mut raw = Vec::new();
        while matches!(self.peek(), Tok::Low | Tok::High) {
            let label = match self.bump().tok {
                Tok::Low => SecurityLabel::Low,
                _ => SecurityLabel::High,
            };
            let at = self.toks[self.pos].clone();
            let name = self.ident()?;
            if raw.iter().any(|(n, _, _): &(String, _, _)| *n == name) {
                return Err(ParseError {
                    line: at.line,
                    col: at.col,
                    kind: ParseErrorKind::DuplicateDeclaration(name),
                });
            }
            self.expect(Tok::Equals)?;
            let negative = *self.peek() == Tok::Minus;
            if negative {
                self.bump();
            }
            let init = self.int(negative)?;
            self.expect(Tok::Semi)?;
            raw.push((name, label, init));
        }
        let nlow = raw.iter().filter(|d| d.1 == SecurityLabel::Low).count() as u32;
        let (mut next_low, mut next_high) = (1, nlow + 1);
        self.decls = raw
            .into_iter()
            .map(|(name, label, init)| {
                let slot = match label {
                    SecurityLabel::Low => &mut next_low,
                    SecurityLabel::High => &mut next_high,
                };
                let id = VarId(*slot);
                *slot += 1;
                VarDecl {
                    name,
                    label,
                    id,
                    init,
                }
            })
            .collect();

        let mut threads = Vec::new();
        while *self.peek() == Tok::Thread {
            self.bump();
            threads.push(self.block()?);
        }
        if threads.is_empty() {
            return Err(self.unexpected("`thread`"));
        }
        if *self.peek() != Tok::Eof {
            return Err(self.unexpected("`thread` or end of input"));
        }
        Ok(Program {
            decls: std::mem::take(&mut self.decls),
            threads,
        })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while *self.peek() != Tok::RBrace {
            body.push(self.stmt()?);
        }
        self.bump();
        Ok(body)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        match self.peek() {
            Tok::Skip => {
                self.bump();
                self.expect(Tok::Semi)?;
                Ok(Stmt::Skip)
            }
            Tok::If => {
                self.bump();
                let guard = self.paren_expr()?;
                let then_branch = self.block()?;
                let else_branch = if *self.peek() == Tok::Else {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If {
                    guard,
                    then_branch,
                    else_branch,
                })
            }
            Tok::While => {
                self.bump();
                let guard = self.paren_expr()?;
                let body = self.block()?;
                Ok(Stmt::While { guard, body })
            }
            Tok::Ident(_) => {
                let target = self.var_ref()?;
                self.expect(Tok::Assign)?;
                let rhs = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Assign { target, rhs })
            }
            _ => Err(self.unexpected("statement")),
        }
    }

    fn var_ref(&mut self) -> PResult<VarId> {
        let at = self.toks[self.pos].clone();
        let name = self.ident()?;
        match self.decls.iter().find(|d| d.name == name) {
            Some(d) => Ok(d.id),
            None => Err(ParseError {
                line: at.line,
                col: at.col,
                kind: ParseErrorKind::UndeclaredVariable(name),
            }),
        }
    }

    fn paren_expr(&mut self) -> PResult<Expr> {
        self.expect(Tok::LParen)?;
        let e = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok(e)
    }

    fn expr(&mut self) -> PResult<Expr> {
        self.binary_level(0)
    }

    // Precedence levels, loosest first.
    fn binary_level(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[(Tok, BinaryOp)]] = &[
            &[(Tok::OrOr, BinaryOp::Or)],
            &[(Tok::AndAnd, BinaryOp::And)],
            &[(Tok::EqEq, BinaryOp::Eq), (Tok::NotEq, BinaryOp::Ne)],
            &[(Tok::Lt, BinaryOp::Lt), (Tok::Le, BinaryOp::Le)],
            &[(Tok::Plus, BinaryOp::Add), (Tok::Minus, BinaryOp::Sub)],
            &[(Tok::Star, BinaryOp::Mul)],
        ];
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary_level(level + 1)?;
        while let Some((_, op)) = LEVELS[level].iter().find(|(t, _)| t == self.peek()) {
            self.bump();
            let rhs = self.binary_level(level + 1)?;
            lhs = Expr::binary(*op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(Expr::unary(UnaryOp::Neg, self.unary()?))
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::unary(UnaryOp::Not, self.unary()?))
            }
            Tok::Int(_) => Ok(Expr::Lit(self.int(false)?)),
            Tok::Ident(_) => Ok(Expr::Var(self.var_ref()?)),
            Tok::LParen => self.paren_expr(),
            _ => Err(self.unexpected("expression")),
        }
    }
}

/// Parses program source text, assigning variable ids by label and
/// declaration order.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser {
        toks,
        pos: 0,
        decls: Vec::new(),
    };
    p.program()
}
