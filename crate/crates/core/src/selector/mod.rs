//! Selector evaluation, generalization and suggestion.

pub mod css;
mod suggest;
pub mod xpath;

use thiserror::Error;

use crate::dom::{Document, DocumentHandle, NodeId};
use crate::model::{Selector, SelectorKind};

pub use suggest::{suggest_selectors, Anchor, RankingPolicy, SelectorSuggestion, Specificity};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectorError {
    #[error("cannot parse selector {expression:?} at offset {offset}: {message}")]
    Parse {
        expression: String,
        offset: usize,
        message: String,
    },
    #[error("node path {0:?} does not resolve in this document")]
    UnresolvablePath(Vec<usize>),
}

/// A selector parsed once and evaluable many times.
#[derive(Debug, Clone)]
pub enum CompiledSelector {
    Css(css::SelectorList),
    Xpath(xpath::LocationPath),
}

impl CompiledSelector {
    pub fn compile(selector: &Selector) -> Result<Self, SelectorError> {
        Self::compile_expression(selector.kind, &selector.expression)
    }

    pub fn compile_expression(kind: SelectorKind, expression: &str) -> Result<Self, SelectorError> {
        match kind {
            SelectorKind::Css => css::parse(expression).map(CompiledSelector::Css),
            SelectorKind::Xpath => xpath::parse(expression).map(CompiledSelector::Xpath),
        }
    }

    /// Matches in document order. `scope` limits results to that node's subtree.
    pub fn select(&self, doc: &Document, scope: Option<NodeId>) -> Vec<NodeId> {
        if doc.is_empty() {
            return Vec::new();
        }
        match self {
            CompiledSelector::Css(list) => list.select(doc, scope),
            CompiledSelector::Xpath(path) => path.select(doc, scope),
        }
    }

    pub fn first(&self, doc: &Document, scope: Option<NodeId>) -> Option<NodeId> {
        self.select(doc, scope).into_iter().next()
    }
}

/// Evaluates `selector` over the whole document.
pub fn evaluate(selector: &Selector, doc: &DocumentHandle) -> Result<Vec<NodeId>, SelectorError> {
    Ok(CompiledSelector::compile(selector)?.select(&doc.document, None))
}

/// Evaluates `selector` within the subtree of `scope`. XPath expressions are
/// interpreted relative to the scope node.
pub fn evaluate_in(
    selector: &Selector,
    doc: &Document,
    scope: NodeId,
) -> Result<Vec<NodeId>, SelectorError> {
    Ok(CompiledSelector::compile(selector)?.select(doc, Some(scope)))
}

/// Relaxes positional constraints on the final step so the selector matches
/// all structurally similar siblings. Returns the input unchanged when there is
/// nothing to relax or when it does not parse.
pub fn generalize(selector: &Selector, doc: &DocumentHandle) -> Selector {
    let relaxed = match CompiledSelector::compile(selector) {
        Ok(CompiledSelector::Xpath(path)) => {
            let stripped = path.without_final_position();
            (stripped != path).then(|| stripped.to_string())
        }
        Ok(CompiledSelector::Css(list)) => {
            let mut changed = false;
            let mut list = list;
            for complex in &mut list.0 {
                if let Some(last) = complex.compounds.last_mut() {
                    let stripped = last.without_positional();
                    if stripped != *last {
                        *last = stripped;
                        changed = true;
                    }
                }
            }
            changed.then(|| list.to_string())
        }
        Err(_) => None,
    };
    let Some(expression) = relaxed else {
        return selector.clone();
    };
    let candidate = Selector {
        kind: selector.kind,
        expression,
        expect_many: true,
    };
    let (Ok(before), Ok(after)) = (evaluate(selector, doc), evaluate(&candidate, doc)) else {
        return selector.clone();
    };
    if before.iter().all(|n| after.binary_search(n).is_ok()) {
        candidate
    } else {
        selector.clone()
    }
}
