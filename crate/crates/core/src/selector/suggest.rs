use serde::{Deserialize, Serialize};

use crate::dom::{Document, DocumentHandle, NodeId, NodePath};
use crate::model::{Selector, SelectorKind};

use super::css::is_identifier;
use super::{CompiledSelector, SelectorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Specificity {
    Unique,
    Generalized,
}

/// What a suggested expression hangs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anchor {
    Id,
    Class,
    Structural,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectorSuggestion {
    pub selector: Selector,
    pub match_count: usize,
    pub specificity: Specificity,
    pub rank: usize,
    pub anchor: Anchor,
}

/// Order in which anchors are preferred; ties break on expression length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingPolicy {
    pub anchor_order: Vec<Anchor>,
}

impl Default for RankingPolicy {
    fn default() -> Self {
        Self {
            anchor_order: vec![Anchor::Id, Anchor::Class, Anchor::Structural],
        }
    }
}

impl RankingPolicy {
    fn weight(&self, anchor: Anchor) -> usize {
        self.anchor_order
            .iter()
            .position(|a| *a == anchor)
            .unwrap_or(self.anchor_order.len())
    }
}

/// Candidate selectors for the element at `path`, best first.
///
/// Every suggestion matches the element. There is always at least one unique
/// suggestion, and when the element has siblings with the same tag there is a
/// generalized one covering all of them.
pub fn suggest_selectors(
    doc: &DocumentHandle,
    path: &NodePath,
    policy: &RankingPolicy,
) -> Result<Vec<SelectorSuggestion>, SelectorError> {
    let d = &doc.document;
    let node = path
        .resolve(d)
        .ok_or_else(|| SelectorError::UnresolvablePath(path.steps.clone()))?;

    let mut candidates: Vec<(SelectorKind, String, Anchor)> = Vec::new();
    if let Some(id) = unique_id(d, node) {
        candidates.push((SelectorKind::Css, css_id(d, node, id), Anchor::Id));
    }

    if d.element_parent(node).is_none() {
        candidates.push((SelectorKind::Css, tag(d, node).to_string(), Anchor::Structural));
    } else {
        let (anchor_node, anchor_css, anchor_xpath) = match d
            .ancestors(node)
            .find(|a| d.is_element(*a) && unique_id(d, *a).is_some())
        {
            Some(a) => {
                let id = unique_id(d, a).unwrap_or_default();
                (Some(a), css_id(d, a, id), xpath_id(id))
            }
            None => (None, String::new(), String::new()),
        };
        let anchor_kind = if anchor_node.is_some() {
            Anchor::Id
        } else {
            Anchor::Structural
        };

        // chain of elements strictly below the anchor (or from the root) down to node
        let mut chain: Vec<NodeId> = std::iter::once(node)
            .chain(d.ancestors(node).filter(|a| d.is_element(*a)))
            .take_while(|n| Some(*n) != anchor_node)
            .collect();
        chain.reverse();

        let css_step = |n: NodeId, positional: bool| -> String {
            if positional && d.element_parent(n).is_some() {
                format!("{}:nth-child({})", tag(d, n), child_position(d, n))
            } else {
                tag(d, n).to_string()
            }
        };
        let xpath_step = |n: NodeId, positional: bool| -> String {
            let same = same_tag_siblings(d, n);
            if positional && same.len() > 1 {
                let k = same.iter().position(|s| *s == n).unwrap_or(0) + 1;
                format!("{}[{k}]", tag(d, n))
            } else {
                tag(d, n).to_string()
            }
        };
        let join_css = |last_positional: bool| -> String {
            let mut parts: Vec<String> = Vec::new();
            if anchor_node.is_some() {
                parts.push(anchor_css.clone());
            }
            for (i, n) in chain.iter().enumerate() {
                let last = i + 1 == chain.len();
                parts.push(css_step(*n, !last || last_positional));
            }
            parts.join(" > ")
        };
        let join_xpath = |last_positional: bool| -> String {
            let steps: Vec<String> = chain
                .iter()
                .enumerate()
                .map(|(i, n)| xpath_step(*n, i + 1 < chain.len() || last_positional))
                .collect();
            format!("{anchor_xpath}/{}", steps.join("/"))
        };

        candidates.push((SelectorKind::Css, join_css(true), anchor_kind));
        candidates.push((SelectorKind::Xpath, join_xpath(true), anchor_kind));
        if same_tag_siblings(d, node).len() > 1 {
            candidates.push((SelectorKind::Css, join_css(false), anchor_kind));
            candidates.push((SelectorKind::Xpath, join_xpath(false), anchor_kind));
        }

        let classes: Vec<&str> = d.classes(node).filter(|c| is_identifier(c)).collect();
        if !classes.is_empty() {
            let t = tag(d, node);
            for c in &classes {
                candidates.push((SelectorKind::Css, format!("{t}.{c}"), Anchor::Class));
            }
            if classes.len() > 1 {
                candidates.push((
                    SelectorKind::Css,
                    format!("{t}.{}", classes.join(".")),
                    Anchor::Class,
                ));
            }
            if let Some(parent) = d.element_parent(node) {
                if let Some(id) = unique_id(d, parent) {
                    candidates.push((
                        SelectorKind::Css,
                        format!("{} > {t}.{}", css_id(d, parent, id), classes[0]),
                        Anchor::Class,
                    ));
                }
            }
        }
    }

    let mut out: Vec<SelectorSuggestion> = Vec::new();
    for (kind, expression, anchor) in candidates {
        if out
            .iter()
            .any(|s| s.selector.kind == kind && s.selector.expression == expression)
        {
            continue;
        }
        let Ok(compiled) = CompiledSelector::compile_expression(kind, &expression) else {
            continue;
        };
        let matches = compiled.select(d, None);
        if !matches.contains(&node) {
            continue;
        }
        let specificity = if matches.len() == 1 {
            Specificity::Unique
        } else {
            Specificity::Generalized
        };
        out.push(SelectorSuggestion {
            selector: Selector {
                kind,
                expression,
                expect_many: specificity == Specificity::Generalized,
            },
            match_count: matches.len(),
            specificity,
            rank: 0,
            anchor,
        });
    }
    out.sort_by(|a, b| {
        policy
            .weight(a.anchor)
            .cmp(&policy.weight(b.anchor))
            .then(a.selector.expression.len().cmp(&b.selector.expression.len()))
            .then(a.selector.expression.cmp(&b.selector.expression))
    });
    for (i, s) in out.iter_mut().enumerate() {
        s.rank = i;
    }
    Ok(out)
}

fn tag(d: &Document, n: NodeId) -> &str {
    d.tag(n).unwrap_or("*")
}

fn unique_id(d: &Document, n: NodeId) -> Option<&str> {
    let id = d.attr(n, "id").filter(|id| !id.is_empty())?;
    let count = d.elements().filter(|e| d.attr(*e, "id") == Some(id)).count();
    (count == 1 && !(id.contains('\'') && id.contains('"'))).then_some(id)
}

fn css_id(d: &Document, n: NodeId, id: &str) -> String {
    if is_identifier(id) {
        format!("#{id}")
    } else {
        format!("{}[id=\"{}\"]", tag(d, n), id.replace('"', "\\\""))
    }
}

fn xpath_id(id: &str) -> String {
    if id.contains('\'') {
        format!("//*[@id=\"{id}\"]")
    } else {
        format!("//*[@id='{id}']")
    }
}

fn child_position(d: &Document, n: NodeId) -> usize {
    d.element_siblings(n)
        .iter()
        .position(|s| *s == n)
        .map_or(1, |p| p + 1)
}

fn same_tag_siblings(d: &Document, n: NodeId) -> Vec<NodeId> {
    let t = d.tag(n);
    d.element_siblings(n)
        .into_iter()
        .filter(|s| d.tag(*s) == t)
        .collect()
}
