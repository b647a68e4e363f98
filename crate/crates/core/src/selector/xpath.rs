//! XPath 1.0 subset over element nodes.
//!
//! Location paths with the child, descendant, descendant-or-self, self and
//! parent axes (plus their abbreviations), name tests, `*`, `node()`, and
//! predicates built from positions, attributes, `text()`, nested relative
//! paths, comparisons, `and`/`or`, and the functions `last()`, `position()`,
//! `count()`, `contains()`, `starts-with()`, `normalize-space()`, `string()`
//! and `not()`.

use std::fmt;

use crate::dom::{Document, NodeId};

use super::SelectorError;

#[derive(Debug, Clone, PartialEq)]
pub struct LocationPath {
    pub absolute: bool,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub axis: Axis,
    pub test: NodeTest,
    pub predicates: Vec<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Child,
    Descendant,
    DescendantOrSelf,
    SelfAxis,
    Parent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeTest {
    Name(String),
    AnyElement,
    AnyNode,
}

/// What a path inside a predicate ends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathTail {
    Attribute(String),
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Literal(String),
    Path(LocationPath, Option<PathTail>),
    Call(Function, Vec<Expr>),
    Compare(CmpOp, Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Function {
    Last,
    Position,
    Count,
    Contains,
    StartsWith,
    NormalizeSpace,
    StringFn,
    Not,
}

impl Function {
    fn name(self) -> &'static str {
        match self {
            Function::Last => "last",
            Function::Position => "position",
            Function::Count => "count",
            Function::Contains => "contains",
            Function::StartsWith => "starts-with",
            Function::NormalizeSpace => "normalize-space",
            Function::StringFn => "string",
            Function::Not => "not",
        }
    }

    fn arity(self) -> std::ops::RangeInclusive<usize> {
        match self {
            Function::Last | Function::Position => 0..=0,
            Function::Count | Function::Not => 1..=1,
            Function::Contains | Function::StartsWith => 2..=2,
            Function::NormalizeSpace | Function::StringFn => 0..=1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Expr {
    /// True if the predicate depends on the context position.
    pub fn is_positional(&self) -> bool {
        match self {
            Expr::Number(_) => true,
            Expr::Call(Function::Last | Function::Position, _) => true,
            Expr::Call(_, args) => args.iter().any(Expr::is_positional),
            Expr::Compare(_, l, r) | Expr::And(l, r) | Expr::Or(l, r) => {
                l.is_positional() || r.is_positional()
            }
            Expr::Literal(_) | Expr::Path(..) => false,
        }
    }
}

impl Step {
    fn is_abbreviated_descendant(&self) -> bool {
        self.axis == Axis::DescendantOrSelf
            && self.test == NodeTest::AnyNode
            && self.predicates.is_empty()
    }
}

// ---------------------------------------------------------------------------
// lexing

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Slash,
    DoubleSlash,
    LBracket,
    RBracket,
    LParen,
    RParen,
    At,
    Comma,
    Dot,
    DotDot,
    Star,
    AxisName(String),
    Name(String),
    Number(f64),
    Literal(String),
    Op(CmpOp),
}

fn lex(src: &str) -> Result<Vec<(usize, Token)>, SelectorError> {
    let err = |offset: usize, message: &str| SelectorError::Parse {
        expression: src.to_string(),
        offset,
        message: message.to_string(),
    };
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        let next = chars.get(i + 1).map(|(_, c)| *c);
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '/' if next == Some('/') => {
                i += 2;
                Token::DoubleSlash
            }
            '/' => {
                i += 1;
                Token::Slash
            }
            '[' => {
                i += 1;
                Token::LBracket
            }
            ']' => {
                i += 1;
                Token::RBracket
            }
            '(' => {
                i += 1;
                Token::LParen
            }
            ')' => {
                i += 1;
                Token::RParen
            }
            '@' => {
                i += 1;
                Token::At
            }
            ',' => {
                i += 1;
                Token::Comma
            }
            '*' => {
                i += 1;
                Token::Star
            }
            '=' => {
                i += 1;
                Token::Op(CmpOp::Eq)
            }
            '!' if next == Some('=') => {
                i += 2;
                Token::Op(CmpOp::Ne)
            }
            '<' | '>' => {
                let eq = next == Some('=');
                i += if eq { 2 } else { 1 };
                Token::Op(match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                })
            }
            '.' if next == Some('.') => {
                i += 2;
                Token::DotDot
            }
            '.' if !next.is_some_and(|n| n.is_ascii_digit()) => {
                i += 1;
                Token::Dot
            }
            '"' | '\'' => {
                let start = i + 1;
                let mut j = start;
                while j < chars.len() && chars[j].1 != c {
                    j += 1;
                }
                if j == chars.len() {
                    return Err(err(off, "unterminated literal"));
                }
                let text: String = chars[start..j].iter().map(|(_, c)| *c).collect();
                i = j + 1;
                Token::Literal(text)
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().map(|(_, c)| *c).collect();
                Token::Number(text.parse().map_err(|_| err(off, "bad number"))?)
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].1.is_alphanumeric() || matches!(chars[i].1, '_' | '-' | '.'))
                {
                    i += 1;
                }
                let name: String = chars[start..i].iter().map(|(_, c)| *c).collect();
                if chars.get(i).map(|x| x.1) == Some(':')
                    && chars.get(i + 1).map(|x| x.1) == Some(':')
                {
                    i += 2;
                    Token::AxisName(name)
                } else {
                    Token::Name(name)
                }
            }
            _ => return Err(err(off, &format!("unexpected character {c:?}"))),
        };
        out.push((off, tok));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// parsing

pub fn parse(src: &str) -> Result<LocationPath, SelectorError> {
    let tokens = lex(src)?;
    let mut p = Parser {
        src,
        tokens,
        pos: 0,
    };
    if p.tokens.is_empty() {
        return Err(p.error("empty expression"));
    }
    let (path, tail) = p.location_path()?;
    if tail.is_some() {
        return Err(p.error("selector must select elements, not attributes or text"));
    }
    if p.pos != p.tokens.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(path)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n).map(|(_, t)| t)
    }

    fn error(&self, msg: &str) -> SelectorError {
        SelectorError::Parse {
            expression: self.src.to_string(),
            offset: self
                .tokens
                .get(self.pos)
                .map(|(o, _)| *o)
                .unwrap_or(self.src.len()),
            message: msg.to_string(),
        }
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Token, what: &str) -> Result<(), SelectorError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn location_path(&mut self) -> Result<(LocationPath, Option<PathTail>), SelectorError> {
        let mut path = LocationPath {
            absolute: false,
            steps: Vec::new(),
        };
        match self.peek() {
            Some(Token::Slash) => {
                self.pos += 1;
                path.absolute = true;
                if !self.starts_step() {
                    // bare "/" selects the document node, which is not an element
                    return Err(self.error("expected a step after '/'"));
                }
            }
            Some(Token::DoubleSlash) => {
                self.pos += 1;
                path.absolute = true;
                path.steps.push(descendant_or_self());
            }
            _ => {}
        }
        loop {
            if let Some(tail) = self.tail()? {
                return Ok((path, Some(tail)));
            }
            path.steps.push(self.step()?);
            match self.peek() {
                Some(Token::Slash) => self.pos += 1,
                Some(Token::DoubleSlash) => {
                    self.pos += 1;
                    path.steps.push(descendant_or_self());
                }
                _ => return Ok((path, None)),
            }
        }
    }

    fn starts_step(&self) -> bool {
        matches!(
            self.peek(),
            Some(
                Token::Name(_)
                    | Token::Star
                    | Token::Dot
                    | Token::DotDot
                    | Token::AxisName(_)
                    | Token::At
            )
        )
    }

    fn tail(&mut self) -> Result<Option<PathTail>, SelectorError> {
        match (self.peek(), self.peek_at(1)) {
            (Some(Token::At), _) => {
                self.pos += 1;
                match self.peek().cloned() {
                    Some(Token::Name(n)) => {
                        self.pos += 1;
                        Ok(Some(PathTail::Attribute(n.to_ascii_lowercase())))
                    }
                    Some(Token::Star) => Err(self.error("@* is not supported")),
                    _ => Err(self.error("expected attribute name")),
                }
            }
            (Some(Token::Name(n)), Some(Token::LParen)) if n == "text" => {
                self.pos += 2;
                self.expect(&Token::RParen, "')'")?;
                Ok(Some(PathTail::Text))
            }
            _ => Ok(None),
        }
    }

    fn step(&mut self) -> Result<Step, SelectorError> {
        match self.peek().cloned() {
            Some(Token::Dot) => {
                self.pos += 1;
                return Ok(Step {
                    axis: Axis::SelfAxis,
                    test: NodeTest::AnyNode,
                    predicates: Vec::new(),
                });
            }
            Some(Token::DotDot) => {
                self.pos += 1;
                return Ok(Step {
                    axis: Axis::Parent,
                    test: NodeTest::AnyNode,
                    predicates: Vec::new(),
                });
            }
            _ => {}
        }
        let axis = match self.peek().cloned() {
            Some(Token::AxisName(a)) => {
                self.pos += 1;
                match a.as_str() {
                    "child" => Axis::Child,
                    "descendant" => Axis::Descendant,
                    "descendant-or-self" => Axis::DescendantOrSelf,
                    "self" => Axis::SelfAxis,
                    "parent" => Axis::Parent,
                    other => return Err(self.error(&format!("unsupported axis {other}::"))),
                }
            }
            _ => Axis::Child,
        };
        let test = match self.peek().cloned() {
            Some(Token::Star) => {
                self.pos += 1;
                NodeTest::AnyElement
            }
            Some(Token::Name(n)) if n == "node" && self.peek_at(1) == Some(&Token::LParen) => {
                self.pos += 2;
                self.expect(&Token::RParen, "')'")?;
                NodeTest::AnyNode
            }
            Some(Token::Name(n)) => {
                if self.peek_at(1) == Some(&Token::LParen) {
                    return Err(self.error(&format!("unexpected function {n}() in a step")));
                }
                self.pos += 1;
                NodeTest::Name(n.to_ascii_lowercase())
            }
            _ => return Err(self.error("expected a node test")),
        };
        let mut predicates = Vec::new();
        while self.eat(&Token::LBracket) {
            predicates.push(self.or_expr()?);
            self.expect(&Token::RBracket, "']'")?;
        }
        Ok(Step {
            axis,
            test,
            predicates,
        })
    }

    fn or_expr(&mut self) -> Result<Expr, SelectorError> {
        let mut left = self.and_expr()?;
        while matches!(self.peek(), Some(Token::Name(n)) if n == "or") {
            self.pos += 1;
            let right = self.and_expr()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_expr(&mut self) -> Result<Expr, SelectorError> {
        let mut left = self.cmp_expr()?;
        while matches!(self.peek(), Some(Token::Name(n)) if n == "and") {
            self.pos += 1;
            let right = self.cmp_expr()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn cmp_expr(&mut self) -> Result<Expr, SelectorError> {
        let mut left = self.primary()?;
        while let Some(Token::Op(op)) = self.peek().cloned() {
            self.pos += 1;
            let right = self.primary()?;
            left = Expr::Compare(op, Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn primary(&mut self) -> Result<Expr, SelectorError> {
        match self.peek().cloned() {
            Some(Token::Number(n)) => {
                self.pos += 1;
                Ok(Expr::Number(n))
            }
            Some(Token::Literal(s)) => {
                self.pos += 1;
                Ok(Expr::Literal(s))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let e = self.or_expr()?;
                self.expect(&Token::RParen, "')'")?;
                Ok(e)
            }
            Some(Token::Name(n))
                if self.peek_at(1) == Some(&Token::LParen) && n != "text" && n != "node" =>
            {
                let f = match n.as_str() {
                    "last" => Function::Last,
                    "position" => Function::Position,
                    "count" => Function::Count,
                    "contains" => Function::Contains,
                    "starts-with" => Function::StartsWith,
                    "normalize-space" => Function::NormalizeSpace,
                    "string" => Function::StringFn,
                    "not" => Function::Not,
                    other => return Err(self.error(&format!("unsupported function {other}()"))),
                };
                self.pos += 2;
                let mut args = Vec::new();
                if !self.eat(&Token::RParen) {
                    loop {
                        args.push(self.or_expr()?);
                        if self.eat(&Token::Comma) {
                            continue;
                        }
                        self.expect(&Token::RParen, "')'")?;
                        break;
                    }
                }
                if !f.arity().contains(&args.len()) {
                    return Err(self.error(&format!("wrong argument count for {}()", f.name())));
                }
                Ok(Expr::Call(f, args))
            }
            Some(_) => {
                let (path, tail) = self.location_path()?;
                Ok(Expr::Path(path, tail))
            }
            None => Err(self.error("unexpected end of expression")),
        }
    }
}

fn descendant_or_self() -> Step {
    Step {
        axis: Axis::DescendantOrSelf,
        test: NodeTest::AnyNode,
        predicates: Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// evaluation

/// A context item: the document node or an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Item {
    DocNode,
    Node(NodeId),
}

#[derive(Debug, Clone)]
enum Value {
    Nodes(Vec<Item>),
    Strings(Vec<String>),
    Number(f64),
    Str(String),
    Bool(bool),
}

struct Ctx<'d> {
    doc: &'d Document,
}

impl LocationPath {
    /// Evaluates the path. With a scope node, absolute paths are re-rooted at
    /// the scope: `//a` means descendants of the scope, `/a` its children.
    pub fn select(&self, doc: &Document, scope: Option<NodeId>) -> Vec<NodeId> {
        if doc.is_empty() {
            return Vec::new();
        }
        let ctx = Ctx { doc };
        let start = match scope {
            Some(s) => vec![Item::Node(s)],
            None => vec![Item::DocNode],
        };
        ctx.eval_steps(&self.steps, start)
            .into_iter()
            .filter_map(|i| match i {
                Item::Node(n) => Some(n),
                Item::DocNode => None,
            })
            .collect()
    }

    /// Copy with positional predicates stripped from the final step.
    pub fn without_final_position(&self) -> LocationPath {
        let mut out = self.clone();
        if let Some(last) = out.steps.last_mut() {
            last.predicates.retain(|p| !p.is_positional());
        }
        out
    }
}

impl<'d> Ctx<'d> {
    fn eval_steps(&self, steps: &[Step], start: Vec<Item>) -> Vec<Item> {
        let mut current = start;
        for step in steps {
            let mut next = Vec::new();
            for item in &current {
                let mut candidates: Vec<Item> = self
                    .axis(*item, step.axis)
                    .into_iter()
                    .filter(|c| self.test(*c, &step.test))
                    .collect();
                for pred in &step.predicates {
                    let size = candidates.len();
                    candidates = candidates
                        .into_iter()
                        .enumerate()
                        .filter(|(i, c)| self.predicate(pred, *c, i + 1, size))
                        .map(|(_, c)| c)
                        .collect();
                }
                next.extend(candidates);
            }
            next.sort();
            next.dedup();
            current = next;
        }
        current
    }

    fn axis(&self, item: Item, axis: Axis) -> Vec<Item> {
        let doc = self.doc;
        match (axis, item) {
            (Axis::SelfAxis, _) => vec![item],
            (Axis::Parent, Item::DocNode) => vec![],
            (Axis::Parent, Item::Node(n)) => {
                vec![doc.element_parent(n).map_or(Item::DocNode, Item::Node)]
            }
            (Axis::Child, Item::DocNode) => doc.root().map(Item::Node).into_iter().collect(),
            (Axis::Child, Item::Node(n)) => doc.element_children(n).map(Item::Node).collect(),
            (Axis::Descendant, Item::DocNode) => doc.elements().map(Item::Node).collect(),
            (Axis::Descendant, Item::Node(n)) => {
                doc.descendant_elements(n).map(Item::Node).collect()
            }
            (Axis::DescendantOrSelf, _) => {
                let mut v = vec![item];
                v.extend(self.axis(item, Axis::Descendant));
                v
            }
        }
    }

    fn test(&self, item: Item, test: &NodeTest) -> bool {
        match (test, item) {
            (NodeTest::AnyNode, _) => true,
            (_, Item::DocNode) => false,
            (NodeTest::AnyElement, Item::Node(n)) => self.doc.is_element(n),
            (NodeTest::Name(name), Item::Node(n)) => self.doc.tag(n) == Some(name.as_str()),
        }
    }

    fn predicate(&self, expr: &Expr, item: Item, pos: usize, size: usize) -> bool {
        match self.eval(expr, item, pos, size) {
            Value::Number(n) => n == pos as f64,
            v => truthy(&v),
        }
    }

    fn string_value(&self, item: Item) -> String {
        match item {
            Item::DocNode => self.doc.root().map(|r| self.doc.text_content(r)).unwrap_or_default(),
            Item::Node(n) => self.doc.text_content(n),
        }
    }

    fn eval(&self, expr: &Expr, item: Item, pos: usize, size: usize) -> Value {
        match expr {
            Expr::Number(n) => Value::Number(*n),
            Expr::Literal(s) => Value::Str(s.clone()),
            Expr::Path(path, tail) => {
                let start = if path.absolute {
                    vec![Item::DocNode]
                } else {
                    vec![item]
                };
                let nodes = self.eval_steps(&path.steps, start);
                match tail {
                    None => Value::Nodes(nodes),
                    Some(PathTail::Attribute(a)) => Value::Strings(
                        nodes
                            .into_iter()
                            .filter_map(|i| match i {
                                Item::Node(n) => self.doc.attr(n, a).map(str::to_string),
                                Item::DocNode => None,
                            })
                            .collect(),
                    ),
                    Some(PathTail::Text) => Value::Strings(
                        nodes
                            .into_iter()
                            .flat_map(|i| match i {
                                Item::Node(n) => self
                                    .doc
                                    .own_text(n)
                                    .into_iter()
                                    .map(str::to_string)
                                    .collect::<Vec<_>>(),
                                Item::DocNode => Vec::new(),
                            })
                            .collect(),
                    ),
                }
            }
            Expr::Call(f, args) => {
                let arg = |i: usize| self.eval(&args[i], item, pos, size);
                let str_arg = |i: usize| -> String {
                    if args.len() > i {
                        self.to_string(&arg(i))
                    } else {
                        self.string_value(item)
                    }
                };
                match f {
                    Function::Last => Value::Number(size as f64),
                    Function::Position => Value::Number(pos as f64),
                    Function::Count => Value::Number(match arg(0) {
                        Value::Nodes(n) => n.len() as f64,
                        Value::Strings(s) => s.len() as f64,
                        _ => 0.0,
                    }),
                    Function::Contains => Value::Bool(str_arg(0).contains(&str_arg(1))),
                    Function::StartsWith => Value::Bool(str_arg(0).starts_with(&str_arg(1))),
                    Function::NormalizeSpace => Value::Str(
                        str_arg(0).split_whitespace().collect::<Vec<_>>().join(" "),
                    ),
                    Function::StringFn => Value::Str(str_arg(0)),
                    Function::Not => Value::Bool(!truthy(&arg(0))),
                }
            }
            Expr::And(l, r) => Value::Bool(
                truthy(&self.eval(l, item, pos, size)) && truthy(&self.eval(r, item, pos, size)),
            ),
            Expr::Or(l, r) => Value::Bool(
                truthy(&self.eval(l, item, pos, size)) || truthy(&self.eval(r, item, pos, size)),
            ),
            Expr::Compare(op, l, r) => {
                let l = self.eval(l, item, pos, size);
                let r = self.eval(r, item, pos, size);
                Value::Bool(self.compare(*op, &l, &r))
            }
        }
    }

    fn to_string(&self, v: &Value) -> String {
        match v {
            Value::Nodes(n) => n.first().map(|i| self.string_value(*i)).unwrap_or_default(),
            Value::Strings(s) => s.first().cloned().unwrap_or_default(),
            Value::Number(n) => format_number(*n),
            Value::Str(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
        }
    }

    fn atoms(&self, v: &Value) -> Vec<String> {
        match v {
            Value::Nodes(n) => n.iter().map(|i| self.string_value(*i)).collect(),
            Value::Strings(s) => s.clone(),
            other => vec![self.to_string(other)],
        }
    }

    fn compare(&self, op: CmpOp, l: &Value, r: &Value) -> bool {
        let numeric = matches!(l, Value::Number(_))
            || matches!(r, Value::Number(_))
            || !matches!(op, CmpOp::Eq | CmpOp::Ne);
        let ls = self.atoms(l);
        let rs = self.atoms(r);
        ls.iter().any(|a| {
            rs.iter().any(|b| {
                if numeric {
                    let (x, y) = (to_number(a), to_number(b));
                    match op {
                        CmpOp::Eq => x == y,
                        CmpOp::Ne => x != y,
                        CmpOp::Lt => x < y,
                        CmpOp::Le => x <= y,
                        CmpOp::Gt => x > y,
                        CmpOp::Ge => x >= y,
                    }
                } else {
                    match op {
                        CmpOp::Eq => a == b,
                        _ => a != b,
                    }
                }
            })
        })
    }
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::Nodes(n) => !n.is_empty(),
        Value::Strings(s) => !s.is_empty(),
        Value::Number(n) => *n != 0.0 && !n.is_nan(),
        Value::Str(s) => !s.is_empty(),
        Value::Bool(b) => *b,
    }
}

fn to_number(s: &str) -> f64 {
    s.trim().parse().unwrap_or(f64::NAN)
}

fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.is_finite() {
        format!("{}", n as i64)
    } else {
        n.to_string()
    }
}

// ---------------------------------------------------------------------------
// printing

impl fmt::Display for LocationPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.absolute {
            f.write_str("/")?;
        }
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            if !step.is_abbreviated_descendant() {
                write!(f, "{step}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.axis, &self.test, self.predicates.is_empty()) {
            (Axis::SelfAxis, NodeTest::AnyNode, true) => return f.write_str("."),
            (Axis::Parent, NodeTest::AnyNode, true) => return f.write_str(".."),
            _ => {}
        }
        match self.axis {
            Axis::Child => {}
            Axis::Descendant => f.write_str("descendant::")?,
            Axis::DescendantOrSelf => f.write_str("descendant-or-self::")?,
            Axis::SelfAxis => f.write_str("self::")?,
            Axis::Parent => f.write_str("parent::")?,
        }
        match &self.test {
            NodeTest::Name(n) => f.write_str(n)?,
            NodeTest::AnyElement => f.write_str("*")?,
            NodeTest::AnyNode => f.write_str("node()")?,
        }
        for p in &self.predicates {
            write!(f, "[{p}]")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(n) => f.write_str(&format_number(*n)),
            Expr::Literal(s) if s.contains('\'') => write!(f, "\"{s}\""),
            Expr::Literal(s) => write!(f, "'{s}'"),
            Expr::Path(p, tail) => {
                let prefix = p.to_string();
                match tail {
                    None => f.write_str(&prefix),
                    Some(t) => {
                        if !p.steps.is_empty() {
                            f.write_str(&prefix)?;
                            f.write_str("/")?;
                        } else if p.absolute {
                            f.write_str("/")?;
                        }
                        match t {
                            PathTail::Attribute(a) => write!(f, "@{a}"),
                            PathTail::Text => f.write_str("text()"),
                        }
                    }
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::Compare(op, l, r) => {
                let op = match op {
                    CmpOp::Eq => "=",
                    CmpOp::Ne => "!=",
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                };
                write!(f, "{l}{op}{r}")
            }
            Expr::And(l, r) => write!(f, "({l} and {r})"),
            Expr::Or(l, r) => write!(f, "({l} or {r})"),
        }
    }
}
