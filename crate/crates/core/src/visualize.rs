//! Presentation models for result sets.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{DomainObject, PropertyValue, ResultSet};

pub const TABLE: &str = "table_of_properties";
pub const GROUP_BY: &str = "group_by_property_value";
pub const AGGREGATE: &str = "aggregate_count";

pub type RenderOptions = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionType {
    String,
    PropertyRef,
    Enum(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionSchema {
    pub option_name: String,
    #[serde(rename = "type")]
    pub option_type: OptionType,
    /// `None` marks a required option.
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualizerDescriptor {
    pub id: String,
    pub display_name: String,
    pub options_schema: Vec<OptionSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableModel {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<PropertyValue>>,
    /// One map per row with the properties beyond the display limit.
    pub overflow: Vec<IndexMap<String, PropertyValue>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupedModel {
    pub group_property: String,
    pub groups: IndexMap<String, Vec<DomainObject>>,
    pub missing_group: Vec<DomainObject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateModel {
    pub dimension: String,
    pub counts: IndexMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PresentationModel {
    Table(TableModel),
    Grouped(GroupedModel),
    Aggregate(AggregateModel),
    Custom {
        visualizer: String,
        data: serde_json::Value,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VisualizeError {
    #[error("unknown visualizer {0:?}")]
    UnknownVisualizer(String),
    #[error("invalid option {option:?}: {message}")]
    InvalidOption { option: String, message: String },
    #[error("visualizer {0:?} is already registered")]
    DuplicateId(String),
}

impl VisualizeError {
    pub fn name(&self) -> &'static str {
        match self {
            VisualizeError::UnknownVisualizer(_) => "unknown-visualizer",
            VisualizeError::InvalidOption { .. } => "invalid-option",
            VisualizeError::DuplicateId(_) => "duplicate-id",
        }
    }

    fn option(option: &str, message: impl Into<String>) -> Self {
        VisualizeError::InvalidOption {
            option: option.to_string(),
            message: message.into(),
        }
    }
}

pub type RenderFn =
    Arc<dyn Fn(&ResultSet, &RenderOptions) -> Result<PresentationModel, VisualizeError> + Send + Sync>;

/// Registered visualizers in registration order.
pub struct VisualizerRegistry {
    entries: RwLock<IndexMap<String, (VisualizerDescriptor, RenderFn)>>,
}

impl Default for VisualizerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl VisualizerRegistry {
    pub fn empty() -> Self {
        Self {
            entries: RwLock::new(IndexMap::new()),
        }
    }

    pub fn with_builtins() -> Self {
        let r = Self::empty();
        let opt = |name: &str, option_type: OptionType, default: Option<&str>| OptionSchema {
            option_name: name.into(),
            option_type,
            default: default.map(str::to_string),
        };
        r.register(
            VisualizerDescriptor {
                id: TABLE.into(),
                display_name: "Table of properties".into(),
                options_schema: vec![
                    opt("column_priority", OptionType::String, Some("")),
                    opt("display_limit", OptionType::String, Some("")),
                ],
            },
            Arc::new(|rs, o| table(rs, o).map(PresentationModel::Table)),
        )
        .expect("fresh registry");
        r.register(
            VisualizerDescriptor {
                id: GROUP_BY.into(),
                display_name: "Group by property value".into(),
                options_schema: vec![opt("property", OptionType::PropertyRef, None)],
            },
            Arc::new(|rs, o| {
                Ok(PresentationModel::Grouped(group_by(&rs.items, &o["property"])))
            }),
        )
        .expect("fresh registry");
        r.register(
            VisualizerDescriptor {
                id: AGGREGATE.into(),
                display_name: "Aggregate count".into(),
                options_schema: vec![opt("dimension", OptionType::PropertyRef, None)],
            },
            Arc::new(|rs, o| {
                Ok(PresentationModel::Aggregate(aggregate(&rs.items, &o["dimension"])))
            }),
        )
        .expect("fresh registry");
        r
    }

    pub fn register(
        &self,
        descriptor: VisualizerDescriptor,
        render: RenderFn,
    ) -> Result<(), VisualizeError> {
        let mut entries = self.entries.write().expect("registry lock poisoned");
        if entries.contains_key(&descriptor.id) {
            return Err(VisualizeError::DuplicateId(descriptor.id));
        }
        entries.insert(descriptor.id.clone(), (descriptor, render));
        Ok(())
    }

    pub fn list(&self) -> Vec<VisualizerDescriptor> {
        self.entries
            .read()
            .expect("registry lock poisoned")
            .values()
            .map(|(d, _)| d.clone())
            .collect()
    }

    /// Renders with `visualizer_id`, or the table when `None`. Options are
    /// checked against the schema and defaults filled in first.
    pub fn render(
        &self,
        result_set: &ResultSet,
        visualizer_id: Option<&str>,
        options: &RenderOptions,
    ) -> Result<PresentationModel, VisualizeError> {
        let id = visualizer_id.unwrap_or(TABLE);
        let (descriptor, render) = self
            .entries
            .read()
            .expect("registry lock poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| VisualizeError::UnknownVisualizer(id.to_string()))?;
        let resolved = resolve_options(&descriptor, result_set, options)?;
        render(result_set, &resolved)
    }
}

fn resolve_options(
    descriptor: &VisualizerDescriptor,
    result_set: &ResultSet,
    options: &RenderOptions,
) -> Result<RenderOptions, VisualizeError> {
    for name in options.keys() {
        if !descriptor.options_schema.iter().any(|s| &s.option_name == name) {
            return Err(VisualizeError::option(name, "not an option of this visualizer"));
        }
    }
    let properties = result_set.property_names();
    let mut out = RenderOptions::new();
    for schema in &descriptor.options_schema {
        let name = &schema.option_name;
        let value = match (options.get(name), &schema.default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.clone(),
            (None, None) => return Err(VisualizeError::option(name, "required")),
        };
        match &schema.option_type {
            OptionType::String => {}
            OptionType::PropertyRef => {
                if value.is_empty() {
                    return Err(VisualizeError::option(name, "must name a property"));
                }
                if !properties.is_empty() && !properties.contains(&value) {
                    return Err(VisualizeError::option(
                        name,
                        format!("{value:?} is not a property of these results"),
                    ));
                }
            }
            OptionType::Enum(allowed) => {
                if !allowed.contains(&value) {
                    return Err(VisualizeError::option(
                        name,
                        format!("{value:?} is not one of {allowed:?}"),
                    ));
                }
            }
        }
        out.insert(name.clone(), value);
    }
    Ok(out)
}

fn table(rs: &ResultSet, options: &RenderOptions) -> Result<TableModel, VisualizeError> {
    let mut columns = rs.property_names();
    let priority = options.get("column_priority").map(String::as_str).unwrap_or("");
    let mut front = Vec::new();
    for name in priority.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        if !rs.items.is_empty() && !columns.iter().any(|c| c == name) {
            return Err(VisualizeError::option(
                "column_priority",
                format!("{name:?} is not a property of these results"),
            ));
        }
        if let Some(pos) = columns.iter().position(|c| c == name) {
            front.push(columns.remove(pos));
        }
    }
    front.append(&mut columns);
    let mut columns = front;

    let limit = match options.get("display_limit").map(|s| s.trim()) {
        None | Some("") => None,
        Some(raw) => Some(raw.parse::<usize>().map_err(|_| {
            VisualizeError::option("display_limit", format!("{raw:?} is not a non-negative integer"))
        })?),
    };
    let hidden = match limit {
        Some(n) if n < columns.len() => columns.split_off(n),
        _ => Vec::new(),
    };
    let cell = |o: &DomainObject, c: &str| o.values.get(c).cloned().unwrap_or(PropertyValue::Missing);
    Ok(TableModel {
        rows: rs
            .items
            .iter()
            .map(|o| columns.iter().map(|c| cell(o, c)).collect())
            .collect(),
        overflow: rs
            .items
            .iter()
            .map(|o| hidden.iter().map(|c| (c.clone(), cell(o, c))).collect())
            .collect(),
        columns,
    })
}

/// Groups in order of first appearance; missing values go to `missing_group`.
pub fn group_by(items: &[DomainObject], property: &str) -> GroupedModel {
    let mut groups: IndexMap<String, Vec<DomainObject>> = IndexMap::new();
    let mut missing_group = Vec::new();
    for item in items {
        match item.value(property) {
            Some(v) => groups.entry(v.to_string()).or_default().push(item.clone()),
            None => missing_group.push(item.clone()),
        }
    }
    GroupedModel {
        group_property: property.to_string(),
        groups,
        missing_group,
    }
}

pub fn aggregate(items: &[DomainObject], dimension: &str) -> AggregateModel {
    let mut counts: IndexMap<String, usize> = IndexMap::new();
    for v in items.iter().filter_map(|i| i.value(dimension)) {
        *counts.entry(v.to_string()).or_default() += 1;
    }
    AggregateModel {
        dimension: dimension.to_string(),
        counts,
    }
}
