//! Bounded FIFO that never blocks the producer: when full, the oldest item
//! is discarded and counted. Freshest data wins.

use std::collections::VecDeque;
use std::sync::Arc;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;
use tokio::sync::Notify;

#[derive(Debug, Default)]
pub struct QueueCounters {
    pub pushed: AtomicU64,
    pub dropped: AtomicU64,
    pub popped: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct QueueStats {
    pub pushed: u64,
    pub dropped: u64,
    pub popped: u64,
    pub len: usize,
}

struct Inner<T> {
    items: VecDeque<T>,
    closed: bool,
}

struct Shared<T> {
    inner: Mutex<Inner<T>>,
    notify: Notify,
    capacity: usize,
    counters: QueueCounters,
}

pub struct DropOldestQueue<T> {
    shared: Arc<Shared<T>>,
}

impl<T> Clone for DropOldestQueue<T> {
    fn clone(&self) -> Self {
        Self {
            shared: self.shared.clone(),
        }
    }
}

impl<T> DropOldestQueue<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "queue capacity must be positive");
        Self {
            shared: Arc::new(Shared {
                inner: Mutex::new(Inner {
                    items: VecDeque::with_capacity(capacity),
                    closed: false,
                }),
                notify: Notify::new(),
                capacity,
                counters: QueueCounters::default(),
            }),
        }
    }

    /// Enqueues `item`, evicting the oldest entry if full. Returns the
    /// evicted item. Pushing to a closed queue drops the item and counts it.
    pub fn push(&self, item: T) -> Option<T> {
        let c = &self.shared.counters;
        c.pushed.fetch_add(1, Ordering::Relaxed);
        let evicted = {
            let mut inner = self.shared.inner.lock();
            if inner.closed {
                c.dropped.fetch_add(1, Ordering::Relaxed);
                return Some(item);
            }
            let evicted = if inner.items.len() == self.shared.capacity {
                c.dropped.fetch_add(1, Ordering::Relaxed);
                inner.items.pop_front()
            } else {
                None
            };
            inner.items.push_back(item);
            evicted
        };
        self.shared.notify.notify_one();
        evicted
    }

    pub fn try_pop(&self) -> Option<T> {
        let item = self.shared.inner.lock().items.pop_front();
        if item.is_some() {
            self.shared.counters.popped.fetch_add(1, Ordering::Relaxed);
        }
        item
    }

    /// Waits for the next item. Returns `None` once the queue is closed and
    /// drained.
    pub async fn pop(&self) -> Option<T> {
        loop {
            let notified = self.shared.notify.notified();
            {
                let mut inner = self.shared.inner.lock();
                if let Some(item) = inner.items.pop_front() {
                    drop(inner);
                    self.shared.counters.popped.fetch_add(1, Ordering::Relaxed);
                    return Some(item);
                }
                if inner.closed {
                    return None;
                }
            }
            notified.await;
        }
    }

    /// Stops accepting items; queued items can still be popped.
    pub fn close(&self) {
        self.shared.inner.lock().closed = true;
        self.shared.notify.notify_waiters();
        self.shared.notify.notify_one();
    }

    pub fn len(&self) -> usize {
        self.shared.inner.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> QueueStats {
        let c = &self.shared.counters;
        QueueStats {
            pushed: c.pushed.load(Ordering::Relaxed),
            dropped: c.dropped.load(Ordering::Relaxed),
            popped: c.popped.load(Ordering::Relaxed),
            len: self.len(),
        }
    }
}
