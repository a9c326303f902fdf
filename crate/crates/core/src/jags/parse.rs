//! Recursive-descent parser for the JAGS subset produced by the generator.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

const DISTRIBUTIONS: [(&str, usize); 5] = [
    ("dlnorm", 2),
    ("dunif", 2),
    ("ddirch", 1),
    ("dbeta", 2),
    ("dbinom", 2),
];
const FUNCTIONS: [&str; 3] = ["c", "round", "sum"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoopSummary {
    pub variable: String,
    pub from: i64,
    pub to: i64,
    pub line: usize,
}

/// A top-level assignment `target <- minuend - subtracted...`, the form
/// used for the last child of every sibling tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Residual {
    pub target: String,
    pub minuend: String,
    pub subtracted: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseSummary {
    /// Data-block symbols with the length of their `c(...)` vector.
    pub declared: BTreeMap<String, Option<usize>>,
    /// Stochastic nodes, element-wise (`ABC[1]`) or whole (`pZ`).
    pub sampled: BTreeSet<String>,
    /// Deterministic nodes, element-wise with loops expanded.
    pub deterministic: BTreeSet<String>,
    pub loops: Vec<LoopSummary>,
    /// Number of binomial draws after loop expansion.
    pub binomials: usize,
    pub residuals: Vec<Residual>,
    /// Deterministic nodes defined as a plain copy of another node.
    pub aliases: BTreeMap<String, String>,
}

impl ParseSummary {
    /// Every node the model block defines.
    pub fn defined(&self) -> BTreeSet<String> {
        self.sampled.union(&self.deterministic).cloned().collect()
    }

    /// Follows plain copies (`Z.bin[1] <- Z`) to the node they refer to.
    pub fn resolve<'a>(&'a self, mut symbol: &'a str) -> &'a str {
        while let Some(next) = self.aliases.get(symbol) {
            symbol = next;
        }
        symbol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

impl Pos {
    fn error(self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    Arrow,
    Tilde,
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Num(n) => format!("number {n}"),
            Tok::Eof => "end of input".to_owned(),
            other => format!("{:?}", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::Arrow => "<-",
            Tok::Tilde => "~",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Ident(_) | Tok::Num(_) | Tok::Eof => "",
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut column) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column };
        let start = i;
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            Tok::Num(s.parse().map_err(|_| pos.error(format!("malformed number {s:?}")))?)
        } else {
            i += 1;
            match c {
                '<' if chars.get(i) == Some(&'-') => {
                    i += 1;
                    Tok::Arrow
                }
                '~' => Tok::Tilde,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBrack,
                ']' => Tok::RBrack,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                ':' => Tok::Colon,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                other => return Err(pos.error(format!("unexpected character {other:?}"))),
            }
        };
        column += i - start;
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, column }));
    Ok(out)
}

#[derive(Debug, Clone)]
enum Index {
    Single(Expr),
    Range(Expr, Expr),
}

#[derive(Debug, Clone)]
struct Var {
    name: String,
    indices: Vec<Index>,
    pos: Pos,
}

#[derive(Debug, Clone)]
enum Expr {
    Num(f64, Pos),
    Var(Var),
    Call { name: String, args: Vec<Expr>, pos: Pos },
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone)]
enum Stmt {
    Assign { target: Var, value: Expr },
    Sample { target: Var, dist: String, args: Vec<Expr>, pos: Pos },
    For { var: String, from: Expr, to: Expr, body: Vec<Stmt>, pos: Pos },
}

/// Statements of the optional data block and the model block.
type Blocks = (Option<Vec<Stmt>>, Option<Vec<Stmt>>);

struct Parser {
    tokens: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].0
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.tokens[self.at].clone();
        if t.0 != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<Pos, ParseError> {
        let (tok, pos) = self.bump();
        if tok == want {
            Ok(pos)
        } else {
            Err(pos.error(format!("expected {:?}, found {}", want.symbol(), tok.describe())))
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match self.bump() {
            (Tok::Ident(s), pos) => Ok((s, pos)),
            (tok, pos) => Err(pos.error(format!("expected identifier, found {}", tok.describe()))),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn program(&mut self) -> Result<Blocks, ParseError> {
        let mut data = None;
        let mut model = None;
        if let Tok::Ident(name) = self.peek() {
            if name == "data" {
                self.bump();
                data = Some(self.block()?);
            }
        }
        if let Tok::Ident(name) = self.peek() {
            if name == "model" {
                self.bump();
                model = Some(self.block()?);
            }
        }
        if data.is_none() && model.is_none() {
            let (tok, pos) = self.bump();
            return Err(pos.error(format!("expected data or model block, found {}", tok.describe())));
        }
        let (tok, pos) = self.bump();
        if tok != Tok::Eof {
            return Err(pos.error(format!("expected end of input, found {}", tok.describe())));
        }
        Ok((data, model))
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while !self.eat(&Tok::RBrace) {
            body.push(self.statement()?);
        }
        Ok(body)
    }

    fn statement(&mut self) -> Result<Stmt, ParseError> {
        if matches!(self.peek(), Tok::Ident(s) if s == "for") {
            let (_, pos) = self.bump();
            self.expect(Tok::LParen)?;
            let (var, _) = self.ident()?;
            match self.bump() {
                (Tok::Ident(s), _) if s == "in" => {}
                (tok, p) => return Err(p.error(format!("expected \"in\", found {}", tok.describe()))),
            }
            let from = self.expr()?;
            self.expect(Tok::Colon)?;
            let to = self.expr()?;
            self.expect(Tok::RParen)?;
            let body = self.block()?;
            return Ok(Stmt::For { var, from, to, body, pos });
        }
        let target = self.var()?;
        let stmt = match self.bump() {
            (Tok::Arrow, _) => Stmt::Assign {
                target,
                value: self.expr()?,
            },
            (Tok::Tilde, _) => {
                let (dist, pos) = self.ident()?;
                let Some(&(_, arity)) = DISTRIBUTIONS.iter().find(|(d, _)| *d == dist) else {
                    return Err(pos.error(format!("unsupported distribution {dist}")));
                };
                let args = self.args()?;
                if args.len() != arity {
                    return Err(pos.error(format!("{dist} takes {arity} arguments, found {}", args.len())));
                }
                Stmt::Sample { target, dist, args, pos }
            }
            (tok, pos) => return Err(pos.error(format!("expected \"<-\" or \"~\", found {}", tok.describe()))),
        };
        self.eat(&Tok::Semi);
        Ok(stmt)
    }

    fn var(&mut self) -> Result<Var, ParseError> {
        let (name, pos) = self.ident()?;
        let mut indices = Vec::new();
        if self.eat(&Tok::LBrack) {
            loop {
                let first = self.expr()?;
                indices.push(if self.eat(&Tok::Colon) {
                    Index::Range(first, self.expr()?)
                } else {
                    Index::Single(first)
                });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RBrack)?;
        }
        Ok(Var { name, indices, pos })
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if self.eat(&Tok::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            match self.bump() {
                (Tok::RParen, _) => return Ok(args),
                (Tok::Comma, _) => {}
                (tok, pos) => {
                    return Err(pos.error(format!("expected \",\" or \")\", found {}", tok.describe())))
                }
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => '+',
                Tok::Minus => '-',
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => '*',
                Tok::Slash => '/',
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(self.factor()?));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Num(n, pos))
            }
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.factor()?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if self.tokens[self.at + 1].0 == Tok::LParen {
                    self.bump();
                    if !FUNCTIONS.contains(&name.as_str()) {
                        return Err(pos.error(format!("unsupported function {name}")));
                    }
                    let args = self.args()?;
                    Ok(Expr::Call { name, args, pos })
                } else {
                    Ok(Expr::Var(self.var()?))
                }
            }
            tok => Err(pos.error(format!("expected expression, found {}", tok.describe()))),
        }
    }
}

/// Concrete element reference, e.g. `ABC` with indices `[1]`.
struct Reference {
    name: String,
    indices: Vec<(i64, i64)>,
    pos: Pos,
}

struct Analyzer {
    summary: ParseSummary,
    env: HashMap<String, i64>,
    extents: HashMap<String, i64>,
    references: Vec<Reference>,
}

fn element(name: &str, index: &[i64]) -> String {
    if index.is_empty() {
        name.to_owned()
    } else {
        let parts: Vec<String> = index.iter().map(i64::to_string).collect();
        format!("{name}[{}]", parts.join(","))
    }
}

impl Analyzer {
    fn int(&self, e: &Expr) -> Result<i64, ParseError> {
        match e {
            Expr::Num(n, pos) => {
                if n.fract() == 0.0 {
                    Ok(*n as i64)
                } else {
                    Err(pos.error(format!("index {n} is not an integer")))
                }
            }
            Expr::Var(v) if v.indices.is_empty() => self
                .env
                .get(&v.name)
                .copied()
                .ok_or_else(|| v.pos.error(format!("{} is not a loop variable", v.name))),
            Expr::Neg(inner) => Ok(-self.int(inner)?),
            Expr::Bin(op, a, b) => {
                let (a, b) = (self.int(a)?, self.int(b)?);
                Ok(match op {
                    '+' => a + b,
                    '-' => a - b,
                    '*' => a * b,
                    _ => a / b.max(1),
                })
            }
            Expr::Var(v) => Err(v.pos.error("indexed value used as an index")),
            Expr::Call { pos, .. } => Err(pos.error("function call used as an index")),
        }
    }

    fn indices(&self, var: &Var) -> Result<Vec<(i64, i64)>, ParseError> {
        var.indices
            .iter()
            .map(|ix| match ix {
                Index::Single(e) => self.int(e).map(|k| (k, k)),
                Index::Range(a, b) => Ok((self.int(a)?, self.int(b)?)),
            })
            .collect()
    }

    fn target(&mut self, var: &Var) -> Result<String, ParseError> {
        let ranges = self.indices(var)?;
        if ranges.iter().any(|(a, b)| a != b) {
            return Err(var.pos.error("range on the left-hand side"));
        }
        let index: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        if let Some(&k) = index.iter().find(|&&k| k < 1) {
            return Err(var.pos.error(format!("index {k} of {} is below 1", var.name)));
        }
        if let Some(&k) = index.first() {
            let extent = self.extents.entry(var.name.clone()).or_insert(0);
            *extent = (*extent).max(k);
        }
        let name = element(&var.name, &index);
        if self.summary.sampled.contains(&name)
            || self.summary.deterministic.contains(&name)
            || self.summary.declared.contains_key(&name)
        {
            return Err(var.pos.error(format!("{name} is defined more than once")));
        }
        Ok(name)
    }

    fn collect(&mut self, e: &Expr) -> Result<(), ParseError> {
        match e {
            Expr::Num(..) => Ok(()),
            Expr::Var(v) => {
                if v.indices.is_empty() {
                    return Ok(());
                }
                let indices = self.indices(v)?;
                self.references.push(Reference {
                    name: v.name.clone(),
                    indices,
                    pos: v.pos,
                });
                Ok(())
            }
            Expr::Call { args, .. } => args.iter().try_for_each(|a| self.collect(a)),
            Expr::Neg(inner) => self.collect(inner),
            Expr::Bin(_, a, b) => {
                self.collect(a)?;
                self.collect(b)
            }
        }
    }

    /// Element names covered by a reference to `var`.
    fn expand(&self, var: &Var) -> Result<Vec<String>, ParseError> {
        let ranges = self.indices(var)?;
        match ranges.as_slice() {
            [] => Ok(vec![var.name.clone()]),
            [(a, b)] => Ok((*a..=*b).map(|k| element(&var.name, &[k])).collect()),
            _ => Err(var.pos.error("multi-dimensional residual")),
        }
    }

    fn residual(&self, target: &str, value: &Expr) -> Result<Option<Residual>, ParseError> {
        let Expr::Bin('-', minuend, rest) = value else {
            return Ok(None);
        };
        let Expr::Var(minuend) = minuend.as_ref() else {
            return Ok(None);
        };
        let subtracted = match rest.as_ref() {
            Expr::Var(v) => self.expand(v)?,
            Expr::Call { name, args, .. } if name == "sum" && args.len() == 1 => match &args[0] {
                Expr::Var(v) => self.expand(v)?,
                _ => return Ok(None),
            },
            _ => return Ok(None),
        };
        let mut expanded = self.expand(minuend)?;
        if expanded.len() != 1 {
            return Err(minuend.pos.error("range as minuend"));
        }
        let minuend = expanded.remove(0);
        Ok(Some(Residual {
            target: target.to_owned(),
            minuend,
            subtracted,
        }))
    }

    fn data(&mut self, body: &[Stmt]) -> Result<(), ParseError> {
        for stmt in body {
            match stmt {
                Stmt::Assign { target, value } => {
                    if !target.indices.is_empty() {
                        return Err(target.pos.error("indexed assignment in data block"));
                    }
                    if self.summary.declared.contains_key(&target.name) {
                        return Err(target.pos.error(format!("{} is declared more than once", target.name)));
                    }
                    let length = match value {
                        Expr::Call { name, args, .. } if name == "c" => Some(args.len()),
                        _ => None,
                    };
                    if let Some(n) = length {
                        self.extents.insert(target.name.clone(), n as i64);
                    }
                    self.collect(value)?;
                    self.summary.declared.insert(target.name.clone(), length);
                }
                Stmt::Sample { pos, .. } | Stmt::For { pos, .. } => {
                    return Err(pos.error("data block allows only assignments"));
                }
            }
        }
        Ok(())
    }

    fn model(&mut self, body: &[Stmt], depth: usize) -> Result<(), ParseError> {
        for stmt in body {
            match stmt {
                Stmt::Assign { target, value } => {
                    let name = self.target(target)?;
                    self.collect(value)?;
                    if depth == 0 {
                        if let Some(r) = self.residual(&name, value)? {
                            self.summary.residuals.push(r);
                        }
                    }
                    if let Expr::Var(source) = value {
                        if let [single] = &self.expand(source)?[..] {
                            self.summary.aliases.insert(name.clone(), single.clone());
                        }
                    }
                    self.summary.deterministic.insert(name);
                }
                Stmt::Sample { target, dist, args, .. } => {
                    let name = self.target(target)?;
                    for a in args {
                        self.collect(a)?;
                    }
                    if dist == "ddirch" {
                        if let Expr::Var(v) = &args[0] {
                            if let Some(&n) = self.extents.get(&v.name).filter(|_| v.indices.is_empty()) {
                                self.extents.insert(name.clone(), n);
                            }
                        }
                    }
                    if dist == "dbinom" {
                        self.summary.binomials += 1;
                    }
                    self.summary.sampled.insert(name);
                }
                Stmt::For { var, from, to, body, pos } => {
                    if self.env.contains_key(var) {
                        return Err(pos.error(format!("loop variable {var} is already in use")));
                    }
                    let (a, b) = (self.int(from)?, self.int(to)?);
                    if a > b {
                        return Err(pos.error(format!("empty loop range {a}:{b}")));
                    }
                    self.summary.loops.push(LoopSummary {
                        variable: var.clone(),
                        from: a,
                        to: b,
                        line: pos.line,
                    });
                    for k in a..=b {
                        self.env.insert(var.clone(), k);
                        self.model(body, depth + 1)?;
                    }
                    self.env.remove(var);
                }
            }
        }
        Ok(())
    }

    fn check_references(&self) -> Result<(), ParseError> {
        for r in &self.references {
            let Some(&extent) = self.extents.get(&r.name) else {
                return Err(r.pos.error(format!("{} is indexed but never defined as a vector", r.name)));
            };
            for &(a, b) in &r.indices {
                if a > b {
                    return Err(r.pos.error(format!("empty index range {a}:{b} on {}", r.name)));
                }
                if a < 1 || b > extent {
                    let k = if a < 1 { a } else { b };
                    return Err(r.pos.error(format!("index {k} out of bounds for {} (1..{extent})", r.name)));
                }
            }
        }
        Ok(())
    }
}

/// Parses model text in the generated dialect and returns its symbol tables.
pub fn parse_generated_model(text: &str) -> Result<ParseSummary, ParseError> {
    let mut parser = Parser {
        tokens: lex(text)?,
        at: 0,
    };
    let (data, model) = parser.program()?;
    let mut analyzer = Analyzer {
        summary: ParseSummary::default(),
        env: HashMap::new(),
        extents: HashMap::new(),
        references: Vec::new(),
    };
    if let Some(data) = data {
        analyzer.data(&data)?;
    }
    if let Some(model) = model {
        analyzer.model(&model, 0)?;
    }
    analyzer.check_references()?;
    Ok(analyzer.summary)
}
