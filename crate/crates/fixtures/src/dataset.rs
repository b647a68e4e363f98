use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub const PAGE_SIZE: usize = 10;
pub const BOOK_COUNT: usize = 30;
pub const BORGES_COUNT: usize = 4;
pub const CORTAZAR_COUNT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VenueKind {
    Journal,
    Conference,
}

impl VenueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VenueKind::Journal => "journal",
            VenueKind::Conference => "conference",
        }
    }

    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "journal" => Some(VenueKind::Journal),
            "conference" => Some(VenueKind::Conference),
            _ => None,
        }
    }
}

/// Server-side sort orders exposed by the fixture engines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortKey {
    /// Highest rating first, ties by id.
    Rating,
    /// Newest first, ties by id.
    Year,
}

impl SortKey {
    pub fn as_str(self) -> &'static str {
        match self {
            SortKey::Rating => "rating",
            SortKey::Year => "year",
        }
    }

    pub fn parse(raw: &str) -> Option<Self> {
        match raw {
            "rating" => Some(SortKey::Rating),
            "year" => Some(SortKey::Year),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Book {
    pub id: u32,
    pub title: String,
    pub author: String,
    pub rating: f64,
    pub venue_kind: VenueKind,
    pub year: u32,
    pub description: String,
}

impl Book {
    pub fn rating_text(&self) -> String {
        format!("{:.1}", self.rating)
    }

    pub fn path(&self) -> String {
        format!("/book/{}", self.id)
    }

    /// Citation shown only on the detail page.
    pub fn bibtex(&self) -> String {
        format!(
            "@book{{book{},\n  title = {{{}}},\n  author = {{{}}},\n  year = {{{}}}\n}}",
            self.id, self.title, self.author, self.year
        )
    }
}

static DATASET: OnceLock<Vec<Book>> = OnceLock::new();

pub fn dataset() -> &'static [Book] {
    DATASET.get_or_init(|| {
        serde_json::from_str(include_str!("../data/books.json")).expect("bundled dataset parses")
    })
}

pub fn book(id: u32) -> Option<&'static Book> {
    dataset().iter().find(|b| b.id == id)
}

/// Expected records for a query, by scanning every record: each whitespace
/// token of `keywords` must occur, case-insensitively, in title or author.
pub fn ground_truth(
    keywords: &str,
    venue: Option<VenueKind>,
    sort: Option<SortKey>,
) -> Vec<&'static Book> {
    let tokens: Vec<String> = keywords.split_whitespace().map(str::to_lowercase).collect();
    let mut out: Vec<&Book> = Vec::new();
    for b in dataset() {
        let haystack = format!("{} {}", b.title, b.author).to_lowercase();
        let mut hit = true;
        for t in &tokens {
            if !haystack.contains(t.as_str()) {
                hit = false;
            }
        }
        if let Some(v) = venue {
            if b.venue_kind != v {
                hit = false;
            }
        }
        if hit {
            out.push(b);
        }
    }
    // insertion sort keeps this independent of the server's sort
    for i in 1..out.len() {
        let mut j = i;
        while j > 0 && before(out[j], out[j - 1], sort) {
            out.swap(j, j - 1);
            j -= 1;
        }
    }
    out
}

fn before(a: &Book, b: &Book, sort: Option<SortKey>) -> bool {
    match sort {
        None => a.id < b.id,
        Some(SortKey::Rating) => a.rating > b.rating || (a.rating == b.rating && a.id < b.id),
        Some(SortKey::Year) => a.year > b.year || (a.year == b.year && a.id < b.id),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_counts() {
        assert_eq!(dataset().len(), BOOK_COUNT);
        assert_eq!(ground_truth("Borges", None, None).len(), BORGES_COUNT);
        assert_eq!(ground_truth("Julio Cortázar", None, None).len(), CORTAZAR_COUNT);
        assert_eq!(ground_truth("cortázar", None, None).len(), CORTAZAR_COUNT);
        assert!(ground_truth("zzzz", None, None).is_empty());
        assert_eq!(ground_truth("", None, None).len(), BOOK_COUNT);
    }

    #[test]
    fn ratings_in_range_and_ids_dense() {
        for (i, b) in dataset().iter().enumerate() {
            assert_eq!(b.id as usize, i + 1);
            assert!((1.0..=5.0).contains(&b.rating));
        }
    }

    #[test]
    fn venue_filter() {
        let journals = ground_truth("", Some(VenueKind::Journal), None);
        assert!(journals.iter().all(|b| b.venue_kind == VenueKind::Journal));
        let expected = dataset()
            .iter()
            .filter(|b| b.venue_kind == VenueKind::Journal)
            .count();
        assert_eq!(journals.len(), expected);
    }

    #[test]
    fn sorted_by_rating() {
        let all = ground_truth("", None, Some(SortKey::Rating));
        assert!(all.windows(2).all(|w| w[0].rating >= w[1].rating));
    }
}
