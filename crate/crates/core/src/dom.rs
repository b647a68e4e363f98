//! Owned, immutable HTML trees.
//!
//! Pages are parsed with html5ever (through `scraper`) and copied into a flat
//! arena in preorder, so a node's id doubles as its document-order position and
//! every subtree is a contiguous id range. The arena is `Send + Sync` and can be
//! shared freely between tasks.

use std::fmt::Write as _;

use scraper::Html;
use serde::{Deserialize, Serialize};
use url::Url;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeData {
    Element {
        name: String,
        attrs: Vec<(String, String)>,
    },
    Text(String),
    Comment(String),
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<NodeId>,
    children: Vec<NodeId>,
    /// One past the last id in this node's subtree.
    end: usize,
    data: NodeData,
}

#[derive(Debug, Clone, Default)]
pub struct Document {
    nodes: Vec<Node>,
}

const VOID_ELEMENTS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

const RAW_TEXT_ELEMENTS: &[&str] = &["script", "style", "xmp", "iframe", "noembed", "noframes"];

impl Document {
    /// Parses a full document or a fragment. Blank input yields an empty document.
    pub fn parse(html: &str) -> Self {
        if html.trim().is_empty() {
            return Self::default();
        }
        let parsed = Html::parse_document(html);
        let mut doc = Document { nodes: Vec::new() };
        for child in parsed.tree.root().children() {
            if child.value().is_element() {
                doc.copy_subtree(child, None);
            }
        }
        doc
    }

    fn copy_subtree(&mut self, node: ego_tree::NodeRef<'_, scraper::Node>, parent: Option<NodeId>) {
        let data = match node.value() {
            scraper::Node::Element(el) => NodeData::Element {
                name: el.name().to_ascii_lowercase(),
                attrs: el
                    .attrs()
                    .map(|(k, v)| (k.to_ascii_lowercase(), v.to_string()))
                    .collect(),
            },
            scraper::Node::Text(t) => NodeData::Text(t.to_string()),
            scraper::Node::Comment(c) => NodeData::Comment(c.to_string()),
            _ => return,
        };
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            parent,
            children: Vec::new(),
            end: 0,
            data,
        });
        if let Some(p) = parent {
            self.nodes[p.0].children.push(id);
        }
        for child in node.children() {
            self.copy_subtree(child, Some(id));
        }
        self.nodes[id.0].end = self.nodes.len();
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// The document element (`<html>`), if any.
    pub fn root(&self) -> Option<NodeId> {
        if self.nodes.is_empty() {
            None
        } else {
            Some(NodeId(0))
        }
    }

    pub fn data(&self, id: NodeId) -> &NodeData {
        &self.nodes[id.0].data
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id.0].parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].children
    }

    pub fn is_element(&self, id: NodeId) -> bool {
        matches!(self.nodes[id.0].data, NodeData::Element { .. })
    }

    pub fn tag(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id.0].data {
            NodeData::Element { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn attrs(&self, id: NodeId) -> &[(String, String)] {
        match &self.nodes[id.0].data {
            NodeData::Element { attrs, .. } => attrs,
            _ => &[],
        }
    }

    pub fn attr(&self, id: NodeId, name: &str) -> Option<&str> {
        self.attrs(id)
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn classes(&self, id: NodeId) -> impl Iterator<Item = &str> {
        self.attr(id, "class").unwrap_or("").split_ascii_whitespace()
    }

    pub fn element_parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent(id).filter(|p| self.is_element(*p))
    }

    pub fn element_children(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.children(id)
            .iter()
            .copied()
            .filter(|c| self.is_element(*c))
    }

    /// Element siblings including `id` itself, in document order.
    pub fn element_siblings(&self, id: NodeId) -> Vec<NodeId> {
        match self.parent(id) {
            Some(p) => self.element_children(p).collect(),
            None => vec![id],
        }
    }

    /// All elements in document order.
    pub fn elements(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len())
            .map(NodeId)
            .filter(|id| self.is_element(*id))
    }

    /// Descendant elements of `id` (excluding `id`) in document order.
    pub fn descendant_elements(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        (id.0 + 1..self.nodes[id.0].end)
            .map(NodeId)
            .filter(|n| self.is_element(*n))
    }

    pub fn is_ancestor(&self, ancestor: NodeId, node: NodeId) -> bool {
        node.0 > ancestor.0 && node.0 < self.nodes[ancestor.0].end
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent(id), move |n| self.parent(*n))
    }

    /// Concatenated text of all descendant text nodes.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        for i in id.0..self.nodes[id.0].end {
            if let NodeData::Text(t) = &self.nodes[i].data {
                out.push_str(t);
            }
        }
        out
    }

    /// Text of direct text children only.
    pub fn own_text(&self, id: NodeId) -> Vec<&str> {
        self.children(id)
            .iter()
            .filter_map(|c| match &self.nodes[c.0].data {
                NodeData::Text(t) => Some(t.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn inner_html(&self, id: NodeId) -> String {
        let mut out = String::new();
        for c in self.children(id) {
            self.write_node(*c, &mut out, false);
        }
        out
    }

    pub fn outer_html(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.write_node(id, &mut out, false);
        out
    }

    pub fn to_html(&self) -> String {
        match self.root() {
            Some(root) => self.outer_html(root),
            None => String::new(),
        }
    }

    /// Serializes without `<script>` elements and without `on*` event attributes.
    /// `javascript:` URLs in `href`/`src`/`action` are neutralized as well.
    pub fn to_sanitized_html(&self) -> String {
        let mut out = String::new();
        if let Some(root) = self.root() {
            self.write_node(root, &mut out, true);
        }
        out
    }

    fn write_node(&self, id: NodeId, out: &mut String, sanitize: bool) {
        match &self.nodes[id.0].data {
            NodeData::Text(t) => {
                let raw = self
                    .tag(self.parent(id).unwrap_or(id))
                    .is_some_and(|p| RAW_TEXT_ELEMENTS.contains(&p));
                if raw {
                    out.push_str(t);
                } else {
                    escape_into(out, t, false);
                }
            }
            NodeData::Comment(c) => {
                let _ = write!(out, "<!--{c}-->");
            }
            NodeData::Element { name, attrs } => {
                if sanitize && name == "script" {
                    return;
                }
                out.push('<');
                out.push_str(name);
                for (k, v) in attrs {
                    if sanitize && is_unsafe_attr(k, v) {
                        continue;
                    }
                    out.push(' ');
                    out.push_str(k);
                    out.push_str("=\"");
                    escape_into(out, v, true);
                    out.push('"');
                }
                out.push('>');
                if VOID_ELEMENTS.contains(&name.as_str()) {
                    return;
                }
                for c in &self.nodes[id.0].children {
                    self.write_node(*c, out, sanitize);
                }
                let _ = write!(out, "</{name}>");
            }
        }
    }
}

fn is_unsafe_attr(name: &str, value: &str) -> bool {
    name.starts_with("on")
        || (matches!(name, "href" | "src" | "action" | "formaction")
            && value
                .trim_start()
                .to_ascii_lowercase()
                .starts_with("javascript:"))
}

fn escape_into(out: &mut String, s: &str, attr: bool) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' if !attr => out.push_str("&lt;"),
            '>' if !attr => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\u{a0}' => out.push_str("&nbsp;"),
            c => out.push(c),
        }
    }
}


/// A parsed page together with the URL relative links resolve against.
#[derive(Debug, Clone)]
pub struct DocumentHandle {
    pub base_url: Url,
    pub document: Document,
}

impl DocumentHandle {
    /// Parses `html` fetched from `url`. A `<base href>` in the page overrides `url`.
    pub fn parse(html: &str, url: Url) -> Self {
        let document = Document::parse(html);
        let base_url = document
            .elements()
            .find(|id| document.tag(*id) == Some("base") && document.attr(*id, "href").is_some())
            .and_then(|id| url.join(document.attr(id, "href")?).ok())
            .unwrap_or(url);
        Self { base_url, document }
    }

    pub fn resolve(&self, reference: &str) -> Option<Url> {
        self.base_url.join(reference.trim()).ok()
    }
}

/// Position of an element as element-child indices from the document element.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodePath {
    pub steps: Vec<usize>,
}

impl NodePath {
    pub fn new(steps: Vec<usize>) -> Self {
        Self { steps }
    }

    pub fn resolve(&self, doc: &Document) -> Option<NodeId> {
        let mut node = doc.root()?;
        for &step in &self.steps {
            node = doc.element_children(node).nth(step)?;
        }
        Some(node)
    }

    /// Path of an element; `None` for non-element nodes.
    pub fn of(doc: &Document, node: NodeId) -> Option<Self> {
        if !doc.is_element(node) {
            return None;
        }
        let mut steps = Vec::new();
        let mut current = node;
        while let Some(parent) = doc.element_parent(current) {
            let idx = doc.element_children(parent).position(|c| c == current)?;
            steps.push(idx);
            current = parent;
        }
        steps.reverse();
        Some(Self { steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAGE: &str = r#"<!DOCTYPE html><html><head><title>t</title>
        <script>alert(1)</script></head>
        <body><div id="main" onclick="x()"><p class="a b">Hello <b>world</b></p>
        <a href="javascript:void(0)">x</a><br><img src="/i.png"></div></body></html>"#;

    #[test]
    fn preorder_ids_and_ranges() {
        let doc = Document::parse(PAGE);
        let root = doc.root().unwrap();
        assert_eq!(doc.tag(root), Some("html"));
        let all: Vec<_> = doc.elements().collect();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
        let body = doc.elements().find(|n| doc.tag(*n) == Some("body")).unwrap();
        for d in doc.descendant_elements(body) {
            assert!(doc.is_ancestor(body, d));
        }
    }

    #[test]
    fn text_and_classes() {
        let doc = Document::parse(PAGE);
        let p = doc.elements().find(|n| doc.tag(*n) == Some("p")).unwrap();
        assert_eq!(doc.text_content(p), "Hello world");
        assert_eq!(doc.classes(p).collect::<Vec<_>>(), vec!["a", "b"]);
        assert_eq!(doc.inner_html(p), "Hello <b>world</b>");
    }

    #[test]
    fn sanitized_output_has_no_scripts_or_handlers() {
        let doc = Document::parse(PAGE);
        let clean = doc.to_sanitized_html();
        assert!(!clean.contains("<script"));
        assert!(!clean.contains("onclick"));
        assert!(!clean.contains("javascript:"));
        assert!(clean.contains(r#"<img src="/i.png">"#));
        let reparsed = Document::parse(&clean);
        assert!(reparsed.elements().all(|n| reparsed.tag(n) != Some("script")));
    }

    #[test]
    fn blank_input_is_empty() {
        assert!(Document::parse("").is_empty());
        assert!(Document::parse("  \n ").root().is_none());
    }

    #[test]
    fn node_path_round_trip() {
        let doc = Document::parse(PAGE);
        for n in doc.elements() {
            let path = NodePath::of(&doc, n).unwrap();
            assert_eq!(path.resolve(&doc), Some(n));
        }
        assert_eq!(NodePath::new(vec![9, 9]).resolve(&doc), None);
        assert_eq!(NodePath::default().resolve(&doc), doc.root());
    }

    #[test]
    fn base_href_overrides_url() {
        let h = DocumentHandle::parse(
            r#"<html><head><base href="http://other.test/dir/"></head></html>"#,
            Url::parse("http://x.test/a").unwrap(),
        );
        assert_eq!(h.resolve("p").unwrap().as_str(), "http://other.test/dir/p");
    }
}
