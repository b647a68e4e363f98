use std::cmp::Ordering;

use chrono::NaiveDate;

use crate::extract::DomainObject;
use crate::model::{Comparator, LocalOrdering, SortDirection};

#[derive(Debug, Clone, PartialEq, PartialOrd)]
enum Key {
    Number(f64),
    Date(NaiveDate),
    Text(String),
}

fn key(object: &DomainObject, ordering: &LocalOrdering) -> Option<Key> {
    let raw = object.value(&ordering.property)?.trim();
    match ordering.comparator {
        Comparator::Lexical => Some(Key::Text(raw.to_lowercase())),
        Comparator::Numeric => {
            let cleaned: String = raw
                .chars()
                .filter(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | 'e' | 'E'))
                .collect();
            cleaned
                .parse::<f64>()
                .ok()
                .filter(|f| f.is_finite())
                .map(Key::Number)
        }
        Comparator::Date => parse_date(raw).map(Key::Date),
    }
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(raw) {
        return Some(dt.date_naive());
    }
    for format in ["%Y-%m-%d", "%d/%m/%Y", "%B %d, %Y", "%d %B %Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(raw, format) {
            return Some(d);
        }
    }
    raw.parse::<i32>()
        .ok()
        .and_then(|y| NaiveDate::from_ymd_opt(y, 1, 1))
}

/// Stable sort by one property. Objects whose value is missing or does not
/// parse under the comparator go last in either direction.
pub fn apply_local_ordering(items: &mut [DomainObject], ordering: &LocalOrdering) {
    let mut keyed: Vec<(Option<Key>, DomainObject)> = items
        .iter()
        .map(|o| (key(o, ordering), o.clone()))
        .collect();
    keyed.sort_by(|(a, _), (b, _)| match (a, b) {
        (Some(a), Some(b)) => {
            let ord = a.partial_cmp(b).unwrap_or(Ordering::Equal);
            match ordering.direction {
                SortDirection::Asc => ord,
                SortDirection::Desc => ord.reverse(),
            }
        }
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
    for (slot, (_, object)) in items.iter_mut().zip(keyed) {
        *slot = object;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{PropertyValue, Provenance};
    use chrono::Utc;
    use indexmap::IndexMap;
    use proptest::prelude::*;

    fn object(i: usize, rating: Option<&str>) -> DomainObject {
        let mut values = IndexMap::new();
        values.insert(
            "rating".to_string(),
            rating.map_or(PropertyValue::Missing, |r| PropertyValue::Text(r.into())),
        );
        DomainObject {
            type_name: "Book".into(),
            values,
            target_url: format!("http://x.test/{i}"),
            provenance: Provenance {
                source_url: "http://x.test/".into(),
                container_index: i,
                fetched_at: Utc::now(),
            },
        }
    }

    fn ordering(direction: SortDirection, comparator: Comparator) -> LocalOrdering {
        LocalOrdering {
            property: "rating".into(),
            direction,
            comparator,
        }
    }

    #[test]
    fn numeric_desc_with_missing_last() {
        let mut items = vec![
            object(0, Some("3.5")),
            object(1, None),
            object(2, Some("10")),
            object(3, Some("4.0")),
        ];
        apply_local_ordering(&mut items, &ordering(SortDirection::Desc, Comparator::Numeric));
        let order: Vec<_> = items.iter().map(|o| o.provenance.container_index).collect();
        assert_eq!(order, [2, 3, 0, 1]);
    }

    #[test]
    fn lexical_and_dates() {
        let mut items = vec![object(0, Some("b")), object(1, Some("A")), object(2, Some("c"))];
        apply_local_ordering(&mut items, &ordering(SortDirection::Asc, Comparator::Lexical));
        let order: Vec<_> = items.iter().map(|o| o.provenance.container_index).collect();
        assert_eq!(order, [1, 0, 2]);

        let mut items = vec![
            object(0, Some("2016-06-06")),
            object(1, Some("1999")),
            object(2, Some("2001-02-03")),
        ];
        apply_local_ordering(&mut items, &ordering(SortDirection::Asc, Comparator::Date));
        let order: Vec<_> = items.iter().map(|o| o.provenance.container_index).collect();
        assert_eq!(order, [1, 2, 0]);
    }

    proptest! {
        #[test]
        fn output_is_sorted_permutation(
            ratings in proptest::collection::vec(proptest::option::of(0u32..1000), 0..40),
            desc in any::<bool>(),
        ) {
            let items: Vec<_> = ratings
                .iter()
                .enumerate()
                .map(|(i, r)| object(i, r.map(|r| format!("{}.{}", r / 10, r % 10)).as_deref()))
                .collect();
            let direction = if desc { SortDirection::Desc } else { SortDirection::Asc };
            let o = ordering(direction, Comparator::Numeric);
            let mut sorted = items.clone();
            apply_local_ordering(&mut sorted, &o);

            let mut a: Vec<_> = items.iter().map(|x| x.target_url.clone()).collect();
            let mut b: Vec<_> = sorted.iter().map(|x| x.target_url.clone()).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);

            for w in sorted.windows(2) {
                match (key(&w[0], &o), key(&w[1], &o)) {
                    (Some(Key::Number(x)), Some(Key::Number(y))) => {
                        let ok = if desc { x >= y } else { x <= y };
                        prop_assert!(ok);
                    }
                    (None, Some(_)) => prop_assert!(false, "missing before present"),
                    _ => {}
                }
            }
        }
    }
}
