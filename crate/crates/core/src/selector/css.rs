//! CSS level-3 selector subset.
//!
//! Supported: type/universal, `#id`, `.class`, attribute selectors with
//! `= ~= |= ^= $= *=`, the four combinators, selector lists, and the
//! structural pseudo-classes (`:nth-child()`, `:first-of-type`, `:root`,
//! `:empty`, `:not()` over a compound, ...).

use std::fmt;

use crate::dom::{Document, NodeId};

use super::SelectorError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectorList(pub Vec<ComplexSelector>);

/// Compounds joined by combinators, left to right.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexSelector {
    pub compounds: Vec<Compound>,
    /// `combinators[i]` joins `compounds[i]` and `compounds[i + 1]`.
    pub combinators: Vec<Combinator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combinator {
    Descendant,
    Child,
    NextSibling,
    SubsequentSibling,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Compound {
    /// `None` means no type selector; `Some("*")` is an explicit universal.
    pub tag: Option<String>,
    pub simples: Vec<Simple>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Simple {
    Id(String),
    Class(String),
    Attr {
        name: String,
        op: Option<(AttrOp, String)>,
    },
    Pseudo(Pseudo),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrOp {
    Equals,
    Includes,
    DashMatch,
    Prefix,
    Suffix,
    Substring,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pseudo {
    Root,
    Empty,
    FirstChild,
    LastChild,
    OnlyChild,
    FirstOfType,
    LastOfType,
    OnlyOfType,
    NthChild(Nth),
    NthLastChild(Nth),
    NthOfType(Nth),
    NthLastOfType(Nth),
    Not(Box<Compound>),
}

impl Pseudo {
    /// True for pseudo-classes that select by sibling position.
    pub fn is_positional(&self) -> bool {
        !matches!(self, Pseudo::Root | Pseudo::Empty | Pseudo::Not(_))
    }
}

/// `an+b`
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Nth {
    pub a: i64,
    pub b: i64,
}

impl Nth {
    fn matches(self, index: i64) -> bool {
        if self.a == 0 {
            return index == self.b;
        }
        let diff = index - self.b;
        diff % self.a == 0 && diff / self.a >= 0
    }
}

pub fn parse(input: &str) -> Result<SelectorList, SelectorError> {
    let mut p = Parser {
        src: input,
        chars: input.char_indices().collect(),
        pos: 0,
    };
    let list = p.selector_list()?;
    if p.pos != p.chars.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(list)
}

struct Parser<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|(_, c)| *c)
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).map(|(_, c)| *c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn error(&self, msg: &str) -> SelectorError {
        let offset = self
            .chars
            .get(self.pos)
            .map(|(i, _)| *i)
            .unwrap_or(self.src.len());
        SelectorError::Parse {
            expression: self.src.to_string(),
            offset,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) -> bool {
        let start = self.pos;
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        self.pos > start
    }

    fn expect(&mut self, c: char) -> Result<(), SelectorError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{c}'")))
        }
    }

    fn selector_list(&mut self) -> Result<SelectorList, SelectorError> {
        let mut list = Vec::new();
        loop {
            self.skip_ws();
            list.push(self.complex()?);
            self.skip_ws();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                }
                _ => break,
            }
        }
        Ok(SelectorList(list))
    }

    fn complex(&mut self) -> Result<ComplexSelector, SelectorError> {
        let mut compounds = vec![self.compound()?];
        let mut combinators = Vec::new();
        loop {
            let had_ws = self.skip_ws();
            let comb = match self.peek() {
                Some('>') => Combinator::Child,
                Some('+') => Combinator::NextSibling,
                Some('~') => Combinator::SubsequentSibling,
                Some(',') | None | Some(')') => break,
                Some(_) if had_ws => Combinator::Descendant,
                Some(_) => return Err(self.error("expected combinator")),
            };
            if comb != Combinator::Descendant {
                self.pos += 1;
                self.skip_ws();
            }
            combinators.push(comb);
            compounds.push(self.compound()?);
        }
        Ok(ComplexSelector {
            compounds,
            combinators,
        })
    }

    fn compound(&mut self) -> Result<Compound, SelectorError> {
        let mut compound = Compound::default();
        if self.peek() == Some('*') {
            self.pos += 1;
            compound.tag = Some("*".into());
        } else if self.peek().is_some_and(is_ident_start) {
            compound.tag = Some(self.ident()?.to_ascii_lowercase());
        }
        loop {
            match self.peek() {
                Some('#') => {
                    self.pos += 1;
                    compound.simples.push(Simple::Id(self.ident()?));
                }
                Some('.') => {
                    self.pos += 1;
                    compound.simples.push(Simple::Class(self.ident()?));
                }
                Some('[') => {
                    self.pos += 1;
                    compound.simples.push(self.attribute()?);
                }
                Some(':') => {
                    self.pos += 1;
                    compound.simples.push(Simple::Pseudo(self.pseudo()?));
                }
                _ => break,
            }
        }
        if compound.tag.is_none() && compound.simples.is_empty() {
            return Err(self.error("expected a selector"));
        }
        Ok(compound)
    }

    fn ident(&mut self) -> Result<String, SelectorError> {
        let mut out = String::new();
        if self.peek() == Some('-') {
            out.push('-');
            self.pos += 1;
        }
        match self.peek() {
            Some('\\') => {}
            Some(c) if is_ident_start(c) => {}
            _ => return Err(self.error("expected identifier")),
        }
        while let Some(c) = self.peek() {
            if c == '\\' {
                self.pos += 1;
                match self.bump() {
                    Some(esc) => out.push(esc),
                    None => return Err(self.error("dangling escape")),
                }
            } else if is_ident_char(c) {
                out.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn string(&mut self) -> Result<String, SelectorError> {
        let quote = self.bump().ok_or_else(|| self.error("expected string"))?;
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('\\') => match self.bump() {
                    Some(c) => out.push(c),
                    None => return Err(self.error("unterminated string")),
                },
                Some(c) if c == quote => return Ok(out),
                Some(c) => out.push(c),
                None => return Err(self.error("unterminated string")),
            }
        }
    }

    fn attribute(&mut self) -> Result<Simple, SelectorError> {
        self.skip_ws();
        let name = self.ident()?.to_ascii_lowercase();
        self.skip_ws();
        let op = match (self.peek(), self.peek_at(1)) {
            (Some(']'), _) => None,
            (Some('='), _) => Some(AttrOp::Equals),
            (Some('~'), Some('=')) => Some(AttrOp::Includes),
            (Some('|'), Some('=')) => Some(AttrOp::DashMatch),
            (Some('^'), Some('=')) => Some(AttrOp::Prefix),
            (Some('$'), Some('=')) => Some(AttrOp::Suffix),
            (Some('*'), Some('=')) => Some(AttrOp::Substring),
            _ => return Err(self.error("bad attribute operator")),
        };
        let op = match op {
            None => None,
            Some(op) => {
                self.pos += if op == AttrOp::Equals { 1 } else { 2 };
                self.skip_ws();
                let value = match self.peek() {
                    Some('"') | Some('\'') => self.string()?,
                    _ => self.ident()?,
                };
                self.skip_ws();
                Some((op, value))
            }
        };
        self.expect(']')?;
        Ok(Simple::Attr { name, op })
    }

    fn pseudo(&mut self) -> Result<Pseudo, SelectorError> {
        let name = self.ident()?.to_ascii_lowercase();
        let simple = match name.as_str() {
            "root" => Some(Pseudo::Root),
            "empty" => Some(Pseudo::Empty),
            "first-child" => Some(Pseudo::FirstChild),
            "last-child" => Some(Pseudo::LastChild),
            "only-child" => Some(Pseudo::OnlyChild),
            "first-of-type" => Some(Pseudo::FirstOfType),
            "last-of-type" => Some(Pseudo::LastOfType),
            "only-of-type" => Some(Pseudo::OnlyOfType),
            _ => None,
        };
        if let Some(p) = simple {
            return Ok(p);
        }
        self.expect('(')?;
        self.skip_ws();
        let pseudo = match name.as_str() {
            "nth-child" => Pseudo::NthChild(self.nth()?),
            "nth-last-child" => Pseudo::NthLastChild(self.nth()?),
            "nth-of-type" => Pseudo::NthOfType(self.nth()?),
            "nth-last-of-type" => Pseudo::NthLastOfType(self.nth()?),
            "not" => Pseudo::Not(Box::new(self.compound()?)),
            _ => return Err(self.error(&format!("unsupported pseudo-class :{name}"))),
        };
        self.skip_ws();
        self.expect(')')?;
        Ok(pseudo)
    }

    fn nth(&mut self) -> Result<Nth, SelectorError> {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | ' '))
        {
            self.pos += 1;
        }
        let raw: String = self.chars[start..self.pos]
            .iter()
            .map(|(_, c)| *c)
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_ascii_lowercase();
        parse_nth(&raw).ok_or_else(|| self.error("bad an+b expression"))
    }
}

fn parse_nth(raw: &str) -> Option<Nth> {
    match raw {
        "odd" => return Some(Nth { a: 2, b: 1 }),
        "even" => return Some(Nth { a: 2, b: 0 }),
        _ => {}
    }
    match raw.find('n') {
        None => raw.parse().ok().map(|b| Nth { a: 0, b }),
        Some(i) => {
            let a = match &raw[..i] {
                "" | "+" => 1,
                "-" => -1,
                s => s.parse().ok()?,
            };
            let b = match &raw[i + 1..] {
                "" => 0,
                s => s.strip_prefix('+').unwrap_or(s).parse().ok()?,
            };
            Some(Nth { a, b })
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || !c.is_ascii()
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || !c.is_ascii()
}

/// True if `s` can be written as a bare CSS identifier.
pub fn is_identifier(s: &str) -> bool {
    let rest = s.strip_prefix('-').unwrap_or(s);
    rest.chars().next().is_some_and(is_ident_start) && rest.chars().all(is_ident_char)
}

// ---------------------------------------------------------------------------
// matching

impl SelectorList {
    pub fn matches(&self, doc: &Document, node: NodeId) -> bool {
        self.0.iter().any(|c| c.matches(doc, node))
    }

    /// querySelectorAll semantics: elements of the scope subtree (excluding the
    /// scope node itself) that match, in document order.
    pub fn select(&self, doc: &Document, scope: Option<NodeId>) -> Vec<NodeId> {
        match scope {
            None => doc.elements().filter(|n| self.matches(doc, *n)).collect(),
            Some(s) => doc
                .descendant_elements(s)
                .filter(|n| self.matches(doc, *n))
                .collect(),
        }
    }
}

impl ComplexSelector {
    pub fn matches(&self, doc: &Document, node: NodeId) -> bool {
        self.match_at(doc, node, self.compounds.len() - 1)
    }

    fn match_at(&self, doc: &Document, node: NodeId, idx: usize) -> bool {
        if !self.compounds[idx].matches(doc, node) {
            return false;
        }
        if idx == 0 {
            return true;
        }
        match self.combinators[idx - 1] {
            Combinator::Child => doc
                .element_parent(node)
                .is_some_and(|p| self.match_at(doc, p, idx - 1)),
            Combinator::Descendant => doc
                .ancestors(node)
                .filter(|a| doc.is_element(*a))
                .any(|a| self.match_at(doc, a, idx - 1)),
            Combinator::NextSibling => previous_siblings(doc, node)
                .next()
                .is_some_and(|s| self.match_at(doc, s, idx - 1)),
            Combinator::SubsequentSibling => {
                previous_siblings(doc, node).any(|s| self.match_at(doc, s, idx - 1))
            }
        }
    }
}

fn previous_siblings(doc: &Document, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
    let siblings = doc.element_siblings(node);
    let pos = siblings.iter().position(|s| *s == node).unwrap_or(0);
    siblings.into_iter().take(pos).rev()
}

impl Compound {
    pub fn matches(&self, doc: &Document, node: NodeId) -> bool {
        let Some(tag) = doc.tag(node) else {
            return false;
        };
        if let Some(t) = &self.tag {
            if t != "*" && t != tag {
                return false;
            }
        }
        self.simples.iter().all(|s| s.matches(doc, node))
    }

    pub fn without_positional(&self) -> Compound {
        Compound {
            tag: self.tag.clone(),
            simples: self
                .simples
                .iter()
                .filter(|s| !matches!(s, Simple::Pseudo(p) if p.is_positional()))
                .cloned()
                .collect(),
        }
    }
}

impl Simple {
    fn matches(&self, doc: &Document, node: NodeId) -> bool {
        match self {
            Simple::Id(id) => doc.attr(node, "id") == Some(id.as_str()),
            Simple::Class(c) => doc.classes(node).any(|x| x == c),
            Simple::Attr { name, op } => {
                let Some(value) = doc.attr(node, name) else {
                    return false;
                };
                match op {
                    None => true,
                    Some((op, v)) => match op {
                        AttrOp::Equals => value == v,
                        AttrOp::Includes => value.split_ascii_whitespace().any(|w| w == v),
                        AttrOp::DashMatch => {
                            value == v || value.starts_with(&format!("{v}-"))
                        }
                        AttrOp::Prefix => !v.is_empty() && value.starts_with(v.as_str()),
                        AttrOp::Suffix => !v.is_empty() && value.ends_with(v.as_str()),
                        AttrOp::Substring => !v.is_empty() && value.contains(v.as_str()),
                    },
                }
            }
            Simple::Pseudo(p) => p.matches(doc, node),
        }
    }
}

impl Pseudo {
    fn matches(&self, doc: &Document, node: NodeId) -> bool {
        let position = |same_type: bool, from_end: bool| -> i64 {
            let tag = doc.tag(node);
            let mut sibs: Vec<NodeId> = doc
                .element_siblings(node)
                .into_iter()
                .filter(|s| !same_type || doc.tag(*s) == tag)
                .collect();
            if from_end {
                sibs.reverse();
            }
            sibs.iter().position(|s| *s == node).map_or(0, |p| p as i64 + 1)
        };
        let count = |same_type: bool| -> usize {
            let tag = doc.tag(node);
            doc.element_siblings(node)
                .into_iter()
                .filter(|s| !same_type || doc.tag(*s) == tag)
                .count()
        };
        match self {
            Pseudo::Root => doc.root() == Some(node),
            Pseudo::Empty => doc.children(node).iter().all(|c| {
                !doc.is_element(*c)
                    && !matches!(doc.data(*c), crate::dom::NodeData::Text(t) if !t.is_empty())
            }),
            Pseudo::FirstChild => position(false, false) == 1,
            Pseudo::LastChild => position(false, true) == 1,
            Pseudo::OnlyChild => count(false) == 1,
            Pseudo::FirstOfType => position(true, false) == 1,
            Pseudo::LastOfType => position(true, true) == 1,
            Pseudo::OnlyOfType => count(true) == 1,
            Pseudo::NthChild(n) => n.matches(position(false, false)),
            Pseudo::NthLastChild(n) => n.matches(position(false, true)),
            Pseudo::NthOfType(n) => n.matches(position(true, false)),
            Pseudo::NthLastOfType(n) => n.matches(position(true, true)),
            Pseudo::Not(c) => !c.matches(doc, node),
        }
    }
}

// ---------------------------------------------------------------------------
// printing

impl fmt::Display for SelectorList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Display for ComplexSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.compounds.iter().enumerate() {
            if i > 0 {
                f.write_str(match self.combinators[i - 1] {
                    Combinator::Descendant => " ",
                    Combinator::Child => " > ",
                    Combinator::NextSibling => " + ",
                    Combinator::SubsequentSibling => " ~ ",
                })?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Compound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.tag {
            Some(t) => f.write_str(t)?,
            None if self.simples.is_empty() => f.write_str("*")?,
            None => {}
        }
        for s in &self.simples {
            match s {
                Simple::Id(id) => write!(f, "#{}", escape_ident(id))?,
                Simple::Class(c) => write!(f, ".{}", escape_ident(c))?,
                Simple::Attr { name, op: None } => write!(f, "[{name}]")?,
                Simple::Attr {
                    name,
                    op: Some((op, v)),
                } => {
                    let op = match op {
                        AttrOp::Equals => "=",
                        AttrOp::Includes => "~=",
                        AttrOp::DashMatch => "|=",
                        AttrOp::Prefix => "^=",
                        AttrOp::Suffix => "$=",
                        AttrOp::Substring => "*=",
                    };
                    write!(f, "[{name}{op}\"{}\"]", v.replace('\\', "\\\\").replace('"', "\\\""))?
                }
                Simple::Pseudo(p) => write!(f, "{p}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for Pseudo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pseudo::Root => f.write_str(":root"),
            Pseudo::Empty => f.write_str(":empty"),
            Pseudo::FirstChild => f.write_str(":first-child"),
            Pseudo::LastChild => f.write_str(":last-child"),
            Pseudo::OnlyChild => f.write_str(":only-child"),
            Pseudo::FirstOfType => f.write_str(":first-of-type"),
            Pseudo::LastOfType => f.write_str(":last-of-type"),
            Pseudo::OnlyOfType => f.write_str(":only-of-type"),
            Pseudo::NthChild(n) => write!(f, ":nth-child({n})"),
            Pseudo::NthLastChild(n) => write!(f, ":nth-last-child({n})"),
            Pseudo::NthOfType(n) => write!(f, ":nth-of-type({n})"),
            Pseudo::NthLastOfType(n) => write!(f, ":nth-last-of-type({n})"),
            Pseudo::Not(c) => write!(f, ":not({c})"),
        }
    }
}

impl fmt::Display for Nth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.a, self.b) {
            (0, b) => write!(f, "{b}"),
            (a, 0) => write!(f, "{a}n"),
            (a, b) if b > 0 => write!(f, "{a}n+{b}"),
            (a, b) => write!(f, "{a}n{b}"),
        }
    }
}

fn escape_ident(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for (i, c) in s.chars().enumerate() {
        let ok = if i == 0 {
            is_ident_start(c) || c == '-'
        } else {
            is_ident_char(c)
        };
        if !ok {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAGE: &str = r#"<html><body>
      <ul id="list">
        <li class="r first">a</li><li class="r">b</li><li class="r hl">c</li>
        <li class="other">d</li>
      </ul>
      <p lang="en-US" data-x="hello world">p</p><p></p>
    </body></html>"#;

    fn sel(doc: &Document, expr: &str) -> Vec<String> {
        parse(expr)
            .unwrap()
            .select(doc, None)
            .into_iter()
            .map(|n| doc.text_content(n))
            .collect()
    }

    #[test]
    fn basic_matching() {
        let doc = Document::parse(PAGE);
        assert_eq!(sel(&doc, "li.r"), ["a", "b", "c"]);
        assert_eq!(sel(&doc, "#list > li:nth-child(2)"), ["b"]);
        assert_eq!(sel(&doc, "ul li:last-child"), ["d"]);
        assert_eq!(sel(&doc, "li.first + li"), ["b"]);
        assert_eq!(sel(&doc, "li.first ~ li.r"), ["b", "c"]);
        assert_eq!(sel(&doc, "li:not(.r)"), ["d"]);
        assert_eq!(sel(&doc, "li:nth-child(odd)"), ["a", "c"]);
        assert_eq!(sel(&doc, "li:nth-child(-n+2)"), ["a", "b"]);
        assert_eq!(sel(&doc, "p[lang|=en]"), ["p"]);
        assert_eq!(sel(&doc, "p[data-x~=world]"), ["p"]);
        assert_eq!(sel(&doc, "p[data-x^='hel']"), ["p"]);
        assert_eq!(sel(&doc, "p:empty"), [""]);
        assert_eq!(sel(&doc, "li.hl, li.other"), ["c", "d"]);
        assert_eq!(parse(":root").unwrap().select(&doc, None).len(), 1);
    }

    #[test]
    fn scoped_select_excludes_scope() {
        let doc = Document::parse(PAGE);
        let ul = parse("#list").unwrap().select(&doc, None)[0];
        assert_eq!(parse("li").unwrap().select(&doc, Some(ul)).len(), 4);
        assert!(parse("ul").unwrap().select(&doc, Some(ul)).is_empty());
        // the context may reach outside the scope, as with querySelectorAll
        assert_eq!(parse("body li").unwrap().select(&doc, Some(ul)).len(), 4);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", ".", "li[", "li:nth-child(x)", "li >", "a b]", ":hover", "#"] {
            assert!(parse(bad).is_err(), "{bad:?} should fail");
        }
    }

    #[test]
    fn printing_round_trips() {
        for expr in [
            "ul > li:nth-child(2)",
            "#list li.r.hl",
            "a[href^=\"/book\"]",
            "li:not(.r) ~ p",
            "div, span",
            "li:nth-child(2n+1)",
        ] {
            let printed = parse(expr).unwrap().to_string();
            assert_eq!(parse(&printed).unwrap(), parse(expr).unwrap(), "{expr}");
        }
        assert_eq!(parse("ul>li").unwrap().to_string(), "ul > li");
    }

    #[test]
    fn nth_parsing() {
        assert_eq!(parse_nth("2n+1"), Some(Nth { a: 2, b: 1 }));
        assert_eq!(parse_nth("-n+3"), Some(Nth { a: -1, b: 3 }));
        assert_eq!(parse_nth("n"), Some(Nth { a: 1, b: 0 }));
        assert_eq!(parse_nth("7"), Some(Nth { a: 0, b: 7 }));
        assert_eq!(parse_nth("3n-1"), Some(Nth { a: 3, b: -1 }));
        assert!(!Nth { a: -1, b: 3 }.matches(4));
        assert!(Nth { a: -1, b: 3 }.matches(1));
    }
}
