//! Sanitized page snapshots used for selector picking.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use searchsvc_core::DocumentHandle;
use serde::Serialize;

pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotInfo {
    pub snapshot_id: String,
    pub url: String,
    pub fetched_at: String,
    pub sanitized_html: String,
}

/// A snapshot plus the document node paths refer to. The document is parsed
/// from the sanitized markup, so paths computed client-side agree with it.
pub struct Snapshot {
    pub info: SnapshotInfo,
    pub document: DocumentHandle,
    created: Instant,
}

pub struct SnapshotCache {
    ttl: Duration,
    entries: Mutex<HashMap<String, Arc<Snapshot>>>,
}

impl Default for SnapshotCache {
    fn default() -> Self {
        Self::new(DEFAULT_TTL)
    }
}

impl SnapshotCache {
    pub fn new(ttl: Duration) -> Self {
        Self {
            ttl,
            entries: Mutex::new(HashMap::new()),
        }
    }

    pub fn insert(&self, url: url::Url, fetched_at: String, raw_html: &str) -> Arc<Snapshot> {
        let sanitized_html = DocumentHandle::parse(raw_html, url.clone())
            .document
            .to_sanitized_html();
        let document = DocumentHandle::parse(&sanitized_html, url.clone());
        let snapshot = Arc::new(Snapshot {
            info: SnapshotInfo {
                snapshot_id: uuid::Uuid::new_v4().simple().to_string(),
                url: url.to_string(),
                fetched_at,
                sanitized_html,
            },
            document,
            created: Instant::now(),
        });
        let mut entries = self.entries.lock().expect("snapshot lock");
        let ttl = self.ttl;
        entries.retain(|_, s| s.created.elapsed() < ttl);
        entries.insert(snapshot.info.snapshot_id.clone(), snapshot.clone());
        snapshot
    }

    /// `None` for unknown or expired ids.
    pub fn get(&self, id: &str) -> Option<Arc<Snapshot>> {
        let mut entries = self.entries.lock().expect("snapshot lock");
        match entries.get(id) {
            Some(s) if s.created.elapsed() < self.ttl => Some(s.clone()),
            Some(_) => {
                entries.remove(id);
                None
            }
            None => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitizes_and_expires() {
        let cache = SnapshotCache::new(Duration::from_millis(30));
        let url = url::Url::parse("http://x.test/").unwrap();
        let s = cache.insert(
            url,
            "2016-06-06T00:00:00Z".into(),
            "<html><body onload=\"x()\"><script>alert(1)</script><p>hi</p></body></html>",
        );
        assert!(!s.info.sanitized_html.contains("script"));
        assert!(!s.info.sanitized_html.contains("onload"));
        assert!(cache.get(&s.info.snapshot_id).is_some());
        std::thread::sleep(Duration::from_millis(40));
        assert!(cache.get(&s.info.snapshot_id).is_none());
    }
}
